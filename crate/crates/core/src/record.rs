//! Flat `key=value` records separated by single spaces. Shared by the
//! chunk text form and the trace format.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Fixed-precision decimal used for every real in canonical text.
pub fn fmt_real(x: f64) -> String {
    // Normalize -0.0 so equal values always print identically.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.9}")
}

pub fn parse_real(s: &str, line: usize, key: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("field {key}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("field {key}: non-finite value")));
    }
    Ok(v)
}

pub fn parse_uint(s: &str, line: usize, key: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("field {key}: not an unsigned integer: {s:?}")))
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.to_owned(), value.into()));
        self
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str, line: usize) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(line, format!("missing field {key}")))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str, line: usize) -> Result<Self> {
        let mut rec = Record::new();
        if text.is_empty() {
            return Err(Error::parse(line, "empty record"));
        }
        for token in text.split(' ') {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected key=value, got {token:?}")))?;
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
                return Err(Error::parse(line, format!("bad key {k:?}")));
            }
            if v.contains('=') {
                return Err(Error::parse(line, format!("stray '=' in value of {k}")));
            }
            if rec.get(k).is_some() {
                return Err(Error::parse(line, format!("duplicate key {k}")));
            }
            rec.push(k, v);
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(fmt_real(-0.0), "0.000000000");
        assert_eq!(fmt_real(-100.0), "-100.000000000");
    }

    #[test]
    fn parse_render() {
        let r = Record::parse("tick=3 kind=Broadcast", 1).unwrap();
        assert_eq!(r.get("kind"), Some("Broadcast"));
        assert_eq!(r.render(), "tick=3 kind=Broadcast");
    }

    #[test]
    fn rejects_garbage() {
        assert!(Record::parse("tick", 4).is_err());
        assert!(Record::parse("tick=1  kind=x", 4).is_err());
        assert!(Record::parse("a=1 a=2", 4).is_err());
        assert!(Record::parse("Tick=1", 4).is_err());
        assert_eq!(
            Record::parse("x", 9).unwrap_err(),
            Error::Parse { line: 9, msg: "expected key=value, got \"x\"".into() }
        );
    }

    #[test]
    fn reals_reject_nan() {
        assert!(parse_real("NaN", 1, "w").is_err());
        assert!(parse_real("inf", 1, "w").is_err());
        assert_eq!(parse_real("-2.500000000", 1, "w").unwrap(), -2.5);
    }
}
