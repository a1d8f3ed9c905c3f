//! Small string tables for the auxiliary subcommands (lattice-min, noise-eig, egorov, regimes).

use crate::emit::{write_atomic, Format};
use crate::CliError;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    /// Array of objects keyed by the header; numeric-looking cells become JSON numbers.
    pub fn to_json(&self) -> Result<Vec<u8>, CliError> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| {
                        let val = match v.parse::<f64>() {
                            Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| serde_json::Value::String(v.clone()), serde_json::Value::Number),
                            _ => match v.as_str() {
                                "true" => serde_json::Value::Bool(true),
                                "false" => serde_json::Value::Bool(false),
                                _ => serde_json::Value::String(v.clone()),
                            },
                        };
                        (h.clone(), val)
                    })
                    .collect()
            })
            .collect();
        let mut v = serde_json::to_vec_pretty(&rows).map_err(|e| CliError::Io(e.to_string()))?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes `<dir>/<stem>.<ext>` when a directory is given, otherwise prints to stdout.
    pub fn output(&self, format: Format, dir: Option<&Path>, stem: &str) -> Result<(), CliError> {
        let bytes = self.render(format)?;
        match dir {
            Some(d) => {
                let ext = match format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                };
                let p = d.join(format!("{stem}.{ext}"));
                write_atomic(&p, &bytes)?;
                eprintln!("wrote {}", p.display());
                Ok(())
            }
            None => {
                use std::io::Write;
                std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json() {
        let mut t = Table::new(&["n", "label", "ok"]);
        t.push(vec!["3".into(), "a,b".into(), "true".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "n,label,ok\n3,\"a,b\",true\n");
        let v: serde_json::Value = serde_json::from_slice(&t.to_json().unwrap()).unwrap();
        assert_eq!(v[0]["n"], serde_json::json!(3.0));
        assert_eq!(v[0]["label"], "a,b");
        assert_eq!(v[0]["ok"], true);
    }
}
