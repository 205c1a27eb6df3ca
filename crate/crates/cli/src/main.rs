fn main() {
    std::process::exit(risforge::run(std::env::args_os()));
}
