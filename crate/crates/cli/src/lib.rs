//! Command-line harness for `risforge`: batch experiments over scenarios
//! with CSV and JSON output.

pub mod app;
pub mod experiments;
pub mod output;
pub mod seeds;

pub use app::run;
