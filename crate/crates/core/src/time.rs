//! Integer-nanosecond time base.
//!
//! Every instant and duration inside the crate is a `u64` count of
//! nanoseconds. Millisecond values only appear at the boundaries (files,
//! CLI flags, reports) and are converted with [`ms_to_ns`] / [`ns_to_ms`].

use thiserror::Error;

/// An absolute point in simulated time, in nanoseconds.
pub type Instant = u64;

/// A length of simulated time, in nanoseconds.
pub type Duration = u64;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_S: u64 = 1_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum TimeError {
    #[error("negative or non-finite duration: {0}")]
    Invalid(String),
    #[error("unknown duration unit in {0:?} (expected ns, us, ms or s)")]
    Unit(String),
}

/// Converts milliseconds to nanoseconds, rounding to the nearest nanosecond.
pub fn ms_to_ns(ms: f64) -> Result<Duration, TimeError> {
    if !ms.is_finite() || ms < 0.0 {
        return Err(TimeError::Invalid(ms.to_string()));
    }
    Ok((ms * NS_PER_MS as f64).round() as u64)
}

pub fn ns_to_ms(ns: u64) -> f64 {
    ns as f64 / NS_PER_MS as f64
}

/// Parses a duration such as `0.12`, `0.12ms`, `120us`, `4.2s` or `500ns`.
/// A bare number is read as milliseconds.
pub fn parse_duration(text: &str) -> Result<Duration, TimeError> {
    let text = text.trim();
    let split = text.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number.trim().parse().map_err(|_| TimeError::Invalid(text.to_string()))?;
    if !value.is_finite() || value < 0.0 {
        return Err(TimeError::Invalid(text.to_string()));
    }
    let scale = match unit.trim() {
        "" | "ms" => NS_PER_MS,
        "us" => NS_PER_US,
        "ns" => 1,
        "s" => NS_PER_S,
        _ => return Err(TimeError::Unit(text.to_string())),
    };
    Ok((value * scale as f64).round() as u64)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

pub(crate) fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_milliseconds_exactly() {
        assert_eq!(ms_to_ns(0.12).unwrap(), 120_000);
        assert_eq!(ms_to_ns(84.0).unwrap(), 84_000_000);
        assert_eq!(ms_to_ns(10.84).unwrap(), 10_840_000);
        assert!(ms_to_ns(-1.0).is_err());
        assert!(ms_to_ns(f64::NAN).is_err());
    }

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse_duration("0.12").unwrap(), 120_000);
        assert_eq!(parse_duration("0.12ms").unwrap(), 120_000);
        assert_eq!(parse_duration("120us").unwrap(), 120_000);
        assert_eq!(parse_duration("4.2s").unwrap(), 4_200_000_000);
        assert_eq!(parse_duration("7ns").unwrap(), 7);
        assert!(matches!(parse_duration("3min"), Err(TimeError::Unit(_))));
        assert!(parse_duration("-1ms").is_err());
        assert!(parse_duration("ms").is_err());
    }

    #[test]
    fn lcm_and_gcd() {
        assert_eq!(lcm(4, 6), 12);
        assert_eq!(gcd(84, 30), 6);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(8, 2), 4);
    }
}
