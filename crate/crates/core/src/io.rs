//! Plain CSV tables for reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// A named block of rows sharing one header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Shortest decimal that parses back to the same `f64`; infinities as `inf`/`-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_quoting() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push_floats(&[0.1, 1.0 / 3.0]);
        t.push(vec!["p,q".into(), "inf".into()]);
        let s = t.to_csv_string().unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[1], "0.1,0.3333333333333333");
        assert_eq!(lines[2], "\"p,q\",inf");
        assert_eq!("0.3333333333333333".parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(2.0), "2.0");
    }
}
