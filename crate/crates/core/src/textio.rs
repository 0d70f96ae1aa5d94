//! Line-oriented helpers shared by the persisted file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting of the
//! value widened to `f64`, so reading back is exact for `f32` and `f64`.

use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) struct LineReader<R> {
    inner: R,
    what: &'static str,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R, what: &'static str) -> Self {
        Self {
            inner,
            what,
            line_no: 0,
            buf: String::new(),
        }
    }

    /// Next line without its terminator; error at end of input.
    pub fn next_line(&mut self) -> Result<&str> {
        self.buf.clear();
        let n = self.inner.read_line(&mut self.buf)?;
        if n == 0 {
            return Err(Error::format(self.what, format!("truncated after line {}", self.line_no)));
        }
        self.line_no += 1;
        Ok(self.buf.trim_end_matches(['\n', '\r']))
    }

    /// Succeeds only at end of input.
    pub fn expect_eof(&mut self) -> Result<()> {
        self.buf.clear();
        if self.inner.read_line(&mut self.buf)? != 0 {
            return Err(Error::format(self.what, format!("trailing data after line {}", self.line_no)));
        }
        Ok(())
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.what, format!("line {}: {}", self.line_no, message.into()))
    }

    /// Reads a `key value` line and returns the value.
    pub fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?.to_string();
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ if line == key => Ok(String::new()),
            _ => Err(self.error(format!("expected `{key}`, found {line:?}"))),
        }
    }

    pub fn keyed_parse<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.error(format!("bad value {v:?} for `{key}`")))
    }

    pub fn floats<T: Scalar>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next_line()?.to_string();
        let out = parse_floats(&line).map_err(|m| self.error(m))?;
        if out.len() != expected {
            return Err(self.error(format!("expected {expected} values, found {}", out.len())));
        }
        Ok(out)
    }
}

pub(crate) fn parse_floats<T: Scalar>(line: &str) -> std::result::Result<Vec<T>, String> {
    line.split_ascii_whitespace()
        .map(|s| s.parse::<f64>().map(T::of).map_err(|_| format!("bad number {s:?}")))
        .collect()
}

pub(crate) fn write_floats<T: Scalar>(w: &mut impl Write, values: &[T]) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b" ")?;
        }
        first = false;
        write!(w, "{:?}", v.to_f64_lossless())?;
    }
    w.write_all(b"\n")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
