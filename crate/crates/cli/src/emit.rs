//! CSV / JSON output, written atomically (temp file in the target directory, then rename).

use crate::sweep::ResultRow;
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: [&str; 11] = ["epsilon", "N", "theta_q", "theta_p", "flavor", "side", "tau", "norm_lo", "norm_hi", "regime", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).and_then(|_| tmp.flush()).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

/// Multi-dimensional angles are ';'-joined per block (q components, then p components).
fn theta_cols(theta: &Option<Vec<f64>>) -> (String, String) {
    match theta {
        None => (String::new(), String::new()),
        Some(t) => {
            let d = t.len() / 2;
            (join(&t[..d]), join(&t[d..]))
        }
    }
}

/// τ column: integer, "inf" for the infinity marker, empty when the row failed.
fn tau_col(r: &ResultRow) -> String {
    match (r.tau, &r.error) {
        (Some(t), _) => t.to_string(),
        (None, None) => "inf".into(),
        (None, Some(_)) => String::new(),
    }
}

pub fn to_csv(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        let (tq, tp) = theta_cols(&r.theta);
        let regime = if r.error.is_some() && r.regime.is_none() { "error".to_string() } else { opt(&r.regime) };
        w.write_record([
            r.epsilon.to_string(),
            r.n.to_string(),
            tq,
            tp,
            r.flavor.to_string(),
            r.side.to_string(),
            tau_col(r),
            opt(&r.norm_lo),
            opt(&r.norm_hi),
            regime,
            format!("{:.3}", r.wall_ms),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDoc {
    pub config_hash: String,
    pub rows: Vec<ResultRow>,
}

pub fn to_json(rows: &[ResultRow], config_hash: &str) -> Result<Vec<u8>, CliError> {
    let doc = JsonDoc { config_hash: config_hash.to_string(), rows: rows.to_vec() };
    let mut v = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

pub fn read_json(path: &Path) -> Result<JsonDoc, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// (flavor, side, path, ln ε⁻¹, τ) for every finite row, for external plotting.
pub fn plot_data(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["flavor", "side", "path", "ln_inv_epsilon", "tau"]).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        if let Some(t) = r.tau {
            w.write_record([r.flavor.to_string(), r.side.to_string(), opt(&r.path), (1.0 / r.epsilon).ln().to_string(), t.to_string()])
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes `<stem>.csv` or `<stem>.json` plus `<stem>_plot.csv` into `dir`; returns the paths written.
pub fn emit(rows: &[ResultRow], format: Format, dir: &Path, stem: &str, config_hash: &str) -> Result<Vec<PathBuf>, CliError> {
    let main = match format {
        Format::Csv => (dir.join(format!("{stem}.csv")), to_csv(rows)?),
        Format::Json => (dir.join(format!("{stem}.json")), to_json(rows, config_hash)?),
    };
    let plot = (dir.join(format!("{stem}_plot.csv")), plot_data(rows)?);
    for (p, b) in [&main, &plot] {
        write_atomic(p, b)?;
    }
    Ok(vec![main.0, plot.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use toral_relax::noise::Side;
    use toral_relax::norm::Flavor;
    use toral_relax::relaxation::{NormPath, Regime};

    fn rows() -> Vec<ResultRow> {
        let base = ResultRow {
            epsilon: 0.1,
            n: 280,
            theta: Some(vec![0.0, 0.5]),
            flavor: Flavor::Noisy,
            side: Side::Quantum,
            path: Some(NormPath::Exact),
            tau: Some(6),
            norm_lo: Some(0.3722219810532),
            norm_hi: Some(1.0 / 3.0),
            regime: Some(Regime::Semiclassical),
            scan_cap_hit: false,
            error: None,
            wall_ms: 0.123456,
        };
        vec![
            base.clone(),
            ResultRow { tau: None, flavor: Flavor::Coarse, scan_cap_hit: true, ..base.clone() },
            ResultRow { tau: None, theta: None, norm_lo: None, norm_hi: None, regime: None, error: Some("bad".into()), ..base },
        ]
    }

    #[test]
    fn header_only_for_no_rows() {
        let s = String::from_utf8(to_csv(&[]).unwrap()).unwrap();
        assert_eq!(s, "epsilon,N,theta_q,theta_p,flavor,side,tau,norm_lo,norm_hi,regime,wall_ms\n");
    }

    #[test]
    fn csv_columns() {
        let s = String::from_utf8(to_csv(&rows()).unwrap()).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[1], "0.1,280,0,0.5,noisy,quantum,6,0.3722219810532,0.3333333333333333,semiclassical,0.123");
        assert_eq!(lines[2].split(',').nth(6), Some("inf"));
        assert_eq!(lines[3], "0.1,280,,,noisy,quantum,,,,error,0.123");
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let r = rows();
        let paths = emit(&r, Format::Json, dir.path(), "sweep", "abc").unwrap();
        let doc = read_json(&paths[0]).unwrap();
        assert_eq!(doc.config_hash, "abc");
        assert_eq!(doc.rows, r);
        for (a, b) in doc.rows.iter().zip(&r) {
            assert_eq!(a.norm_hi.map(f64::to_bits), b.norm_hi.map(f64::to_bits));
            assert_eq!(a.wall_ms.to_bits(), b.wall_ms.to_bits());
        }
        let plot = std::fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(plot.lines().count(), 2);
        assert!(plot.lines().nth(1).unwrap().starts_with("noisy,quantum,exact,2.302585092994046,6"));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        assert!(matches!(emit(&rows(), Format::Csv, &blocker.join("sub"), "s", "h"), Err(CliError::Io(_))));
    }

    proptest::proptest! {
        #[test]
        fn emitted_rows_roundtrip(eps in 1e-6f64..10.0, lo in 0.0f64..1.0, hi in 0.0f64..1.0, wall in 0.0f64..1e6, tau in proptest::option::of(0u64..1_000_000)) {
            let r = ResultRow { epsilon: eps, norm_lo: Some(lo), norm_hi: Some(hi), wall_ms: wall, tau, ..rows()[0].clone() };
            let v = vec![r.clone(), r];
            let doc: JsonDoc = serde_json::from_slice(&to_json(&v, "h").unwrap()).unwrap();
            proptest::prop_assert_eq!(&doc.rows, &v);
            let csv = String::from_utf8(to_csv(&v).unwrap()).unwrap();
            proptest::prop_assert_eq!(csv.lines().count(), 3);
            let eps_back: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
            proptest::prop_assert_eq!(eps_back.to_bits(), eps.to_bits());
        }
    }
}
