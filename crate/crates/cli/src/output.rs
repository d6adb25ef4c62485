//! Artifact writing: 12-significant-digit numbers, CSV/JSON files and the
//! per-directory manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 12;
pub const MANIFEST_FILE: &str = "manifest.json";

/// `x` printed with at most 12 significant digits, trailing zeros removed.
/// Plain notation for exponents in [-5, 12), scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let body = if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let (lead, rest) = digits.split_at(1);
        if rest.is_empty() {
            format!("{lead}e{exp}")
        } else {
            format!("{lead}.{rest}e{exp}")
        }
    } else if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let point = exp as usize + 1;
        if digits.len() <= point {
            format!("{digits}{}", "0".repeat(point - digits.len()))
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Round every float in a JSON tree to 12 significant digits.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
                .parse()
                .expect("round trip");
            *n = serde_json::Number::from_f64(rounded).expect("finite");
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// An output directory that records every file written into it.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Pretty JSON with rounded floats. Non-finite floats become `null`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        round_json(&mut v);
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// CSV with a header row; `None` cells are left empty.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<Option<f64>>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|c| c.map(fmt_sig).unwrap_or_default()))?;
        }
        let bytes = w.into_inner().context("flushing CSV")?;
        self.write_text(name, &String::from_utf8(bytes)?)
    }
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Everything needed to rerun an invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    /// The configuration actually used, after command-line overrides.
    pub resolved_config: String,
    pub output_directory: String,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub started_utc: String,
    pub workers: usize,
    pub arguments: Vec<String>,
    pub files: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(fmt_sig(1234.5), "1234.5");
        assert_eq!(fmt_sig(100.0), "100");
        assert_eq!(fmt_sig(0.999_999_999_999_9), "1");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(2.0e15), "2e15");
        assert_eq!(fmt_sig(0.000_012_5), "0.0000125");
        assert_eq!(fmt_sig(123_456_789_012.4), "123456789012");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn formatted_values_round_trip_to_twelve_digits() {
        for x in [std::f64::consts::PI, 1e-300, -7.25e9, 0.6180339887498949] {
            let y: f64 = fmt_sig(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-12, "{x} -> {y}");
        }
    }

    #[test]
    fn json_floats_are_rounded() {
        let mut v = serde_json::json!({"a": 1.0 / 3.0, "b": [2.0 / 3.0, 4], "c": "x"});
        round_json(&mut v);
        assert_eq!(v["a"].as_f64().unwrap(), 0.333333333333);
        assert_eq!(v["b"][0].as_f64().unwrap(), 0.666666666667);
        assert_eq!(v["b"][1].as_u64().unwrap(), 4);
    }
}
