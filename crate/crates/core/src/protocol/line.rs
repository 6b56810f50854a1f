use std::io::{self, BufRead};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::domain::codec;

/// Canonical JSON followed by `\n`.
pub fn encode_line<T: Serialize>(value: &T) -> String {
    let mut s = codec::to_string(value).expect("frame types always serialize");
    s.push('\n');
    s
}

pub fn decode_line<T: DeserializeOwned>(line: &str) -> serde_json::Result<T> {
    codec::from_str(line.trim_end_matches(['\r', '\n']))
}

/// Splits a byte stream into lines, keeping undecodable bytes so they can be
/// quarantined instead of lost.
pub struct LineReader<R> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, buf: Vec::new() }
    }

    /// Next non-empty line, or `None` at end of stream. Invalid UTF-8 is
    /// replaced rather than rejected.
    pub fn next_line(&mut self) -> io::Result<Option<String>> {
        loop {
            self.buf.clear();
            if self.inner.read_until(b'\n', &mut self.buf)? == 0 {
                return Ok(None);
            }
            let line = String::from_utf8_lossy(&self.buf);
            let line = line.trim_end_matches(['\r', '\n']);
            if !line.is_empty() {
                return Ok(Some(line.to_owned()));
            }
        }
    }
}
