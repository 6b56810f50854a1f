//! Canonical JSON encoding used on every wire and file surface.
//!
//! Field names are snake_case (from the serde derives), durations are integer
//! milliseconds, and every real number is written with at least four
//! fractional digits so specific gravity always reads like `1.0600`. The
//! digits written are the shortest representation that round-trips, so
//! `decode(encode(x)) == x` holds exactly for finite values.

use std::io;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::Formatter;

const MIN_FRACTION_DIGITS: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_real(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        writer.write_all(format_real(f64::from(value)).as_bytes())
    }
}

/// Formats a finite real with at least four fractional digits.
pub fn format_real(value: f64) -> String {
    // `Display` for f64 never uses exponent notation and is round-trip exact.
    let mut s = format!("{value}");
    let fraction = match s.find('.') {
        Some(dot) => s.len() - dot - 1,
        None => {
            s.push('.');
            0
        }
    };
    for _ in fraction..MIN_FRACTION_DIGITS {
        s.push('0');
    }
    s
}

pub fn to_writer<W: io::Write, T: ?Sized + Serialize>(writer: W, value: &T) -> serde_json::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, CanonicalFormatter);
    value.serialize(&mut ser)
}

pub fn to_vec<T: ?Sized + Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::with_capacity(128);
    to_writer(&mut out, value)?;
    Ok(out)
}

pub fn to_string<T: ?Sized + Serialize>(value: &T) -> serde_json::Result<String> {
    // The formatter only ever emits ASCII.
    Ok(String::from_utf8(to_vec(value)?).expect("canonical JSON is UTF-8"))
}

pub fn from_str<T: DeserializeOwned>(s: &str) -> serde_json::Result<T> {
    serde_json::from_str(s)
}

pub fn from_slice<T: DeserializeOwned>(bytes: &[u8]) -> serde_json::Result<T> {
    serde_json::from_slice(bytes)
}
