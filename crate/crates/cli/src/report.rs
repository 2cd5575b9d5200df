//! JSON report document and its float formatting.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "bornforge-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct Detail {
    pub index: usize,
    pub label: String,
    pub discrepancy: f64,
    pub pass: bool,
    pub data: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub command: String,
    pub tol_law: f64,
    pub instances: usize,
    pub max_discrepancy: f64,
    pub pass: bool,
    pub details: Vec<Detail>,
}

impl Report {
    /// `pass` holds exactly when every detail passes.
    pub fn new(command: impl Into<String>, tol_law: f64, details: Vec<Detail>) -> Report {
        let max_discrepancy = details.iter().map(|d| d.discrepancy).fold(0.0, f64::max);
        Report {
            version: SCHEMA_VERSION,
            command: command.into(),
            tol_law,
            instances: details.len(),
            max_discrepancy,
            pass: details.iter().all(|d| d.pass),
            details,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut ser = Serializer::with_formatter(&mut out, ScientificFormatter);
        self.serialize(&mut ser).expect("report is serializable");
        out.push(b'\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CliError::Input(format!("cannot write report {}: {e}", path.display())))
    }
}

pub fn detail(
    index: usize,
    label: impl Into<String>,
    discrepancy: f64,
    pass: bool,
    data: &impl Serialize,
) -> Detail {
    Detail {
        index,
        label: label.into(),
        discrepancy,
        pass,
        data: serde_json::to_value(data).expect("detail payload is serializable"),
    }
}

/// Compact JSON with every float written as `{:.16e}` (17 significant digits).
struct ScientificFormatter;

impl Formatter for ScientificFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let r = Report::new("x", 1e-10, vec![detail(0, "a", 0.1, true, &[1.0 / 3.0])]);
        let text = String::from_utf8(r.to_json()).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["details"][0]["data"][0].as_f64(), Some(1.0 / 3.0));
        assert_eq!(back["version"], SCHEMA_VERSION);
    }

    #[test]
    fn pass_requires_every_detail() {
        let r = Report::new("x", 1e-10, vec![detail(0, "a", 0.0, true, &()), detail(1, "b", 2.0, false, &())]);
        assert!(!r.pass);
        assert_eq!(r.max_discrepancy, 2.0);
        assert!(Report::new("x", 1e-10, vec![]).pass);
    }
}
