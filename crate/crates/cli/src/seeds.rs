//! Seed lists on the command line: `n`, `a..b` (half-open), `a..=b`, or a
//! comma-separated mix of those.

use risforge_core::{Error, Result};

/// Longest expansion accepted from a single argument.
pub const MAX_SEEDS: u64 = 1 << 20;

fn number(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid seed {s:?}")))
}

/// Parses a seed specification into an ordered list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (lo, hi) = if let Some((a, b)) = part.split_once("..=") {
            let hi = number(b)?
                .checked_add(1)
                .ok_or_else(|| Error::Config(format!("seed range {part:?} overflows")))?;
            (number(a)?, hi)
        } else if let Some((a, b)) = part.split_once("..") {
            (number(a)?, number(b)?)
        } else {
            let n = number(part)?;
            seeds.push(n);
            continue;
        };
        if lo >= hi {
            return Err(Error::Config(format!("empty seed range {part:?}")));
        }
        if hi - lo + seeds.len() as u64 > MAX_SEEDS {
            return Err(Error::Config(format!("seed range {part:?} is too long")));
        }
        seeds.extend(lo..hi);
    }
    Ok(seeds)
}
