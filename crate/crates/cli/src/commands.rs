//! Table-producing subcommands.

use crate::config::ExperimentConfig;
use crate::table::Table;
use crate::CliError;
use toral_relax::lattice::{min_orbit_extension_reduced, OrbitVariant, SymplecticIntMatrix};
use toral_relax::map::ClassicalMapSpec;
use toral_relax::noise::{ges_bounds, residue_point, NoiseKernel};
use toral_relax::quantum::egorov::egorov_discrepancy;
use toral_relax::quantum::QuantumSetting;
use toral_relax::relaxation::classify_regime;
use toral_relax::series::FourierSeries;

/// min over k ≠ 0 of the orbit extension for n in [n_min, n_max], with ln(min)/(2ĥn).
pub fn lattice_min(f: &SymplecticIntMatrix, n_min: u64, n_max: u64, variant: OrbitVariant) -> Result<Table, CliError> {
    let h = f.ks_entropy()?.min_averaged;
    let mut t = Table::new(&["n", "min", "ln_min", "rate_ratio", "argmin", "radius", "confirmed"]);
    for n in n_min..=n_max {
        let m = min_orbit_extension_reduced(f, n, 4, variant)?;
        let ratio = if n > 0 { m.ln_value() / (2.0 * h * n as f64) } else { f64::NAN };
        let arg: Vec<String> = m.argmin.iter().map(|x| x.to_string()).collect();
        t.push(vec![n.to_string(), m.value.to_string(), m.ln_value().to_string(), ratio.to_string(), arg.join(";"), m.radius.to_string(), m.confirmed.to_string()]);
    }
    Ok(t)
}

/// ĝ(εk), γ_{ε,N}(k) and (for the Gaussian) the sandwich bounds, for every k with |k|_∞ ≤ kmax.
pub fn noise_eig(kernel: &NoiseKernel, eps: f64, n: i64, kmax: i64) -> Result<Table, CliError> {
    let dim = 2 * kernel.dim_d();
    let mut t = Table::new(&["k", "ghat", "gamma", "bound_lo", "bound_hi"]);
    let side = (2 * kmax + 1) as usize;
    let count = side.checked_pow(dim as u32).ok_or_else(|| CliError::Config("kmax too large".into()))?;
    for idx in 0..count {
        let k: Vec<i64> = residue_point(idx, side as i64, dim);
        if k.iter().any(|x| x.abs() > kmax) {
            continue;
        }
        let ghat = kernel.classical_eigenvalue(eps, &k)?;
        let gamma = kernel.quantum_eigenvalue(eps, n, &k)?;
        let (lo, hi) = if kernel.is_gaussian() { ges_bounds(eps, n, &k) } else { (f64::NAN, f64::NAN) };
        let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
        let opt = |x: f64| if x.is_nan() { String::new() } else { x.to_string() };
        t.push(vec![ks.join(";"), ghat.to_string(), gamma.to_string(), opt(lo), opt(hi)]);
    }
    t.rows.sort_by_key(|r| r[0].split(';').map(|x| x.parse::<i64>().unwrap().abs()).max());
    Ok(t)
}

/// Egorov discrepancy of f = cos 2πq after `steps` steps, for each N, with successive ratios.
pub fn egorov(map: &ClassicalMapSpec, steps: u64, ns: &[i64]) -> Result<Table, CliError> {
    let f = FourierSeries::cos_q();
    let mut t = Table::new(&["N", "discrepancy", "ratio_to_previous", "leakage", "flagged"]);
    let mut prev: Option<f64> = None;
    for &n in ns {
        let s = QuantumSetting::for_map(&map.linear, n)?;
        let r = egorov_discrepancy(map, &f, steps, &s)?;
        let ratio = prev.map_or(String::new(), |p| (p / r.discrepancy).to_string());
        t.push(vec![n.to_string(), r.discrepancy.to_string(), ratio, r.leakage.to_string(), r.flagged.to_string()]);
        prev = Some(r.discrepancy);
    }
    Ok(t)
}

/// Regime label of every (ε, N) pair; N either from the config rule or the explicit list.
pub fn regimes(config: &ExperimentConfig, ns: Option<&[i64]>) -> Result<Table, CliError> {
    let f = config.prepare()?.map.linear;
    let mut t = Table::new(&["epsilon", "N", "epsilon_N", "regime", "ehrenfest_time"]);
    for &eps in &config.epsilon_grid {
        let list: Vec<i64> = match ns {
            Some(v) => v.to_vec(),
            None => vec![config.n_rule.n_for(eps)],
        };
        for n in list {
            let r = classify_regime(&f, eps, n, config.n_rule.exponent())?;
            t.push(vec![eps.to_string(), n.to_string(), (eps * n as f64).to_string(), r.label.to_string(), r.ehrenfest.to_string()]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_min_table() {
        let t = lattice_min(&SymplecticIntMatrix::cat(), 1, 4, OrbitVariant::Sum).unwrap();
        assert_eq!(t.rows.len(), 4);
        // n = 1, k = (0, 1) (or a symmetric image): |k|² + |Fk|² = 1 + 2 = 3
        assert_eq!(t.rows[0][1], "3");
        assert!(t.rows.iter().all(|r| r[6] == "true"));
    }

    #[test]
    fn noise_eig_table_is_sandwiched() {
        let t = noise_eig(&NoiseKernel::gaussian(1), 0.5, 40, 2).unwrap();
        assert_eq!(t.rows.len(), 25);
        assert_eq!(t.rows[0][0], "0;0");
        for r in &t.rows {
            let g: f64 = r[2].parse().unwrap();
            let lo: f64 = r[3].parse().unwrap();
            let hi: f64 = r[4].parse().unwrap();
            assert!(lo <= g + 1e-15 && g <= hi + 1e-15);
        }
    }

    #[test]
    fn egorov_table_ratios() {
        let t = egorov(&ClassicalMapSpec::kicked_cat(0.3), 1, &[16, 32]).unwrap();
        let ratio: f64 = t.rows[1][2].parse().unwrap();
        assert!(ratio > 3.0, "{ratio}");
    }

    #[test]
    fn regimes_table() {
        let c = ExperimentConfig::from_json(r#"{"schema": 1, "epsilon_grid": [0.01], "N_rule": {"fixed": 10}}"#).unwrap();
        let t = regimes(&c, Some(&[5, 40, 10000])).unwrap();
        let labels: Vec<&str> = t.rows.iter().map(|r| r[3].as_str()).collect();
        assert_eq!(labels, ["deeply_quantum", "quantum", "semiclassical"]);
    }
}
