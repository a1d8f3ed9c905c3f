//! Parameter sweeps over ε: one row per (ε, flavor, side[, path]), computed in parallel and merged in
//! config order, with results cached by the content hash of the config.

use crate::config::{Cell, ExperimentConfig};
use crate::CliError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use toral_relax::noise::Side;
use toral_relax::norm::Flavor;
use toral_relax::quantum::QuantumSetting;
use toral_relax::relaxation::{classify_regime, tau_classical, tau_quantum, NormPath, Regime, RelaxationResult, SearchOptions};
use toral_relax::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: i64,
    /// Bloch angle of the quantum setting; None when (F, N) admits none.
    pub theta: Option<Vec<f64>>,
    pub flavor: Flavor,
    pub side: Side,
    /// Norm path for quantum rows.
    pub path: Option<NormPath>,
    /// None with no error means τ = ∞.
    pub tau: Option<u64>,
    pub norm_lo: Option<f64>,
    pub norm_hi: Option<f64>,
    pub regime: Option<Regime>,
    pub scan_cap_hit: bool,
    pub error: Option<String>,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn is_infinite(&self) -> bool {
        self.tau.is_none() && self.error.is_none()
    }
}

/// Rows plus whether any of them hit a numerical failure (as opposed to an inadmissible (F, N) pair).
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub numerical_failures: usize,
    pub cached: bool,
}

struct Task {
    eps: f64,
    n: i64,
    cell: Cell,
    path: Option<NormPath>,
}

fn tasks(config: &ExperimentConfig) -> Vec<Task> {
    let mut v = vec![];
    for &eps in &config.epsilon_grid {
        let n = config.n_rule.n_for(eps);
        for &cell in &config.flavors {
            match cell.side {
                Side::Classical => v.push(Task { eps, n, cell, path: None }),
                Side::Quantum => v.extend(config.paths.iter().map(|&p| Task { eps, n, cell, path: Some(p) })),
            }
        }
    }
    v
}

/// Computes every row; errors inside a row are recorded on it, never fatal.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    Ok(run_sweep_counted(config)?.0)
}

fn run_sweep_counted(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, usize), CliError> {
    config.validate()?;
    let p = config.prepare()?;
    let opts = SearchOptions::default();
    let exponent = config.n_rule.exponent();
    let results: Vec<(ResultRow, bool)> = tasks(config)
        .par_iter()
        .map(|t| {
            let start = Instant::now();
            let setting = QuantumSetting::for_map(&p.map.linear, t.n);
            let regime = classify_regime(&p.map.linear, t.eps, t.n, exponent).ok().map(|r| r.label);
            let res: Result<RelaxationResult, Error> = match (t.cell.side, &setting) {
                (Side::Classical, _) => tau_classical(&p.map, &p.kernel, t.eps, t.cell.flavor, &opts),
                (Side::Quantum, Ok(s)) => tau_quantum(&p.map, &p.kernel, t.eps, s, t.cell.flavor, t.path.unwrap(), &opts),
                (Side::Quantum, Err(e)) => Err(e.clone()),
            };
            let numerical = matches!(res, Err(Error::NoConvergence(_)));
            let mut row = ResultRow {
                epsilon: t.eps,
                n: t.n,
                theta: setting.ok().map(|s| s.theta),
                flavor: t.cell.flavor,
                side: t.cell.side,
                path: t.path,
                tau: None,
                norm_lo: None,
                norm_hi: None,
                regime,
                scan_cap_hit: false,
                error: None,
                wall_ms: 0.0,
            };
            match res {
                Ok(r) => {
                    row.tau = r.tau;
                    row.norm_lo = Some(r.bracket.0);
                    row.norm_hi = Some(r.bracket.1);
                    row.scan_cap_hit = r.scan_cap_hit;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            (row, numerical)
        })
        .collect();
    let failures = results.iter().filter(|(_, f)| *f).count();
    Ok((results.into_iter().map(|(r, _)| r).collect(), failures))
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    config_hash: String,
    numerical_failures: usize,
    rows: Vec<ResultRow>,
}

pub fn cache_path(out: &Path, hash: &str) -> PathBuf {
    out.join(".cache").join(format!("{hash}.json"))
}

/// run_sweep behind the content-hash cache in `out/.cache`; `force` recomputes and refreshes the entry.
pub fn run_sweep_cached(config: &ExperimentConfig, out: &Path, force: bool) -> Result<SweepOutcome, CliError> {
    config.validate()?;
    let hash = config.content_hash();
    let path = cache_path(out, &hash);
    if !force {
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                if entry.config_hash == hash {
                    return Ok(SweepOutcome { rows: entry.rows, numerical_failures: entry.numerical_failures, cached: true });
                }
            }
        }
    }
    let (rows, numerical_failures) = run_sweep_counted(config)?;
    let entry = CacheEntry { config_hash: hash, numerical_failures, rows };
    let bytes = serde_json::to_vec(&entry).map_err(|e| CliError::Io(e.to_string()))?;
    crate::emit::write_atomic(&path, &bytes)?;
    Ok(SweepOutcome { rows: entry.rows, numerical_failures, cached: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of τ against ln(ε⁻¹) over rows of a single flavor/side/path; infinite or failed rows
/// are skipped, and at least three finite rows are required.
pub fn fit_rate(rows: &[ResultRow]) -> Result<RateFit, CliError> {
    if let Some(r0) = rows.first() {
        if rows.iter().any(|r| r.flavor != r0.flavor || r.side != r0.side || r.path != r0.path) {
            return Err(CliError::Numerical(Error::InvalidParameter("fit_rate needs rows of a single flavor/side/path".into())));
        }
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.tau.map(|t| ((1.0 / r.epsilon).ln(), t as f64))).collect();
    if pts.len() < 3 {
        return Err(CliError::Numerical(Error::InsufficientRows(pts.len())));
    }
    let (slope, intercept, r2) = linear_fit(&pts).ok_or_else(|| CliError::Numerical(Error::InvalidParameter("all ε equal".into())))?;
    Ok(RateFit { slope, intercept, r2, points: pts.len() })
}

/// Least-squares line through (x, y) points: (slope, intercept, r²); None when all x coincide.
/// r² is 1 for a perfect fit, including the constant case.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64, tau: Option<u64>) -> ResultRow {
        ResultRow {
            epsilon: eps,
            n: 100,
            theta: Some(vec![0.0, 0.0]),
            flavor: Flavor::Noisy,
            side: Side::Quantum,
            path: Some(NormPath::Exact),
            tau,
            norm_lo: Some(0.5),
            norm_hi: Some(0.3),
            regime: Some(Regime::Semiclassical),
            scan_cap_hit: false,
            error: None,
            wall_ms: 1.0,
        }
    }

    #[test]
    fn fit_of_rounded_synthetic_times() {
        let grid = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 1e-3, 1e-4, 1e-6];
        let rows: Vec<_> = grid.iter().map(|&e| row(e, Some(((1.0 / e).ln() / 0.9624).round() as u64))).collect();
        let fit = fit_rate(&rows).unwrap();
        // rounding moves each point by at most ½, which over this ln ε⁻¹ span shifts the slope by < 0.05
        assert!((fit.slope - 1.0 / 0.9624).abs() < 0.05, "{fit:?}");
        assert!(fit.r2 > 0.99);
    }

    #[test]
    fn fit_exact_line_and_constant() {
        let rows: Vec<_> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|&x| row((-x).exp(), Some((3.0 * x + 2.0) as u64))).collect();
        let fit = fit_rate(&rows).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 2.0).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
        let flat: Vec<_> = [0.1, 0.01, 0.001].iter().map(|&e| row(e, Some(7))).collect();
        let fit = fit_rate(&flat).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 7.0);
    }

    #[test]
    fn fit_needs_three_finite_rows_of_one_kind() {
        let two = vec![row(0.1, Some(3)), row(0.01, Some(6))];
        assert!(matches!(fit_rate(&two), Err(CliError::Numerical(Error::InsufficientRows(2)))));
        let with_inf = vec![row(0.1, Some(3)), row(0.01, Some(6)), row(0.001, None)];
        assert!(matches!(fit_rate(&with_inf), Err(CliError::Numerical(Error::InsufficientRows(2)))));
        let mut mixed = vec![row(0.1, Some(3)), row(0.01, Some(6)), row(0.001, Some(9))];
        mixed[1].side = Side::Classical;
        assert!(fit_rate(&mixed).is_err());
    }

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn empty_grid_gives_no_rows() {
        let c = config(r#"{"schema": 1, "epsilon_grid": [], "N_rule": {"fixed": 8}}"#);
        assert!(run_sweep(&c).unwrap().is_empty());
    }

    #[test]
    fn exact_and_dense_agree_on_a_linear_map() {
        let c = config(
            r#"{"schema": 1, "epsilon_grid": [0.3], "N_rule": {"fixed": 12}, "paths": ["exact", "dense"],
            "flavors": [{"flavor": "noisy", "side": "quantum"}]}"#,
        );
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].path, Some(NormPath::Exact));
        assert_eq!(rows[1].path, Some(NormPath::Dense));
        assert!(rows[0].tau.is_some());
        assert_eq!(rows[0].tau, rows[1].tau);
    }

    #[test]
    fn rows_follow_config_order_and_ignore_thread_count() {
        let c = config(r#"{"schema": 1, "epsilon_grid": [0.2, 0.1, 0.05], "N_rule": {"scaled": {"M_prime": 4}}}"#);
        let run = |k: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
            pool.install(|| run_sweep(&c).unwrap())
        };
        let strip = |mut v: Vec<ResultRow>| {
            v.iter_mut().for_each(|r| r.wall_ms = 0.0);
            v
        };
        let a = strip(run(1));
        let b = strip(run(4));
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        let order: Vec<(f64, Flavor, Side)> = a.iter().map(|r| (r.epsilon, r.flavor, r.side)).collect();
        assert_eq!(order[0], (0.2, Flavor::Noisy, Side::Classical));
        assert_eq!(order[3], (0.2, Flavor::Coarse, Side::Quantum));
        assert_eq!(order[4].0, 0.1);
        for r in &a {
            assert!(r.error.is_none());
            if r.flavor == Flavor::Noisy {
                assert!(r.tau.is_some());
            }
        }
    }

    #[test]
    fn inadmissible_rows_are_reported_not_fatal() {
        let c = config(r#"{"schema": 1, "epsilon_grid": [0.25, 0.2], "N_rule": {"power": {"exponent": 1}}, "map": {"matrix": [[1, 1], [0, 1]]},
            "flavors": [{"flavor": "noisy", "side": "classical"}, {"flavor": "noisy", "side": "quantum"}]}"#);
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 4);
        let bad: Vec<_> = rows.iter().filter(|r| r.side == Side::Quantum && r.n == 5).collect();
        assert_eq!(bad.len(), 1);
        assert!(bad.iter().all(|r| r.error.is_some() && r.theta.is_none()));
        assert!(rows.iter().filter(|r| r.n == 4).all(|r| r.error.is_none()));
    }

    #[test]
    fn cache_hits_reproduce_rows() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(r#"{"schema": 1, "epsilon_grid": [0.2, 0.1], "N_rule": {"fixed": 16}}"#);
        let a = run_sweep_cached(&c, dir.path(), false).unwrap();
        assert!(!a.cached);
        let b = run_sweep_cached(&c, dir.path(), false).unwrap();
        assert!(b.cached);
        assert_eq!(a.rows, b.rows);
        let forced = run_sweep_cached(&c, dir.path(), true).unwrap();
        assert!(!forced.cached);
        let strip = |v: &[ResultRow]| v.iter().map(|r| ResultRow { wall_ms: 0.0, ..r.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&forced.rows), strip(&a.rows));
    }
}
