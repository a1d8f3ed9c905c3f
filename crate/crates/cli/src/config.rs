//! JSON experiment configuration (schema 1).

use crate::CliError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use toral_relax::lattice::SymplecticIntMatrix;
use toral_relax::map::ClassicalMapSpec;
use toral_relax::noise::{KernelFamily, NoiseKernel, Side};
use toral_relax::norm::Flavor;
use toral_relax::quantum::QuantumSetting;
use toral_relax::relaxation::NormPath;
use toral_relax::series::FourierSeries;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickTerm {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub matrix: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick: Option<Vec<KickTerm>>,
    /// Coordinate index sets of invariant blocks, for reducible F in 2d > 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { matrix: vec![vec![2, 1], vec![1, 1]], translation: None, kick: None, blocks: None }
    }
}

impl MapConfig {
    pub fn build(&self) -> Result<ClassicalMapSpec, CliError> {
        let mut f = SymplecticIntMatrix::new(self.matrix.clone()).map_err(|e| CliError::Config(format!("map.matrix: {e}")))?;
        if let Some(b) = &self.blocks {
            f = f.with_block_indices(b.clone()).map_err(|e| CliError::Config(format!("map.blocks: {e}")))?;
        }
        let t = self.translation.clone().unwrap_or_else(|| vec![0.0; f.size()]);
        let kick = match &self.kick {
            None => None,
            Some(terms) => {
                let terms = terms.iter().map(|t| (t.k.clone(), Complex64::new(t.re, t.im))).collect();
                Some(FourierSeries::new(f.dim_d(), terms).map_err(|e| CliError::Config(format!("map.kick: {e}")))?)
            }
        };
        ClassicalMapSpec::new(f, t, kick).map_err(|e| CliError::Config(format!("map: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRule {
    Fixed(i64),
    Scaled {
        #[serde(rename = "M_prime")]
        m_prime: f64,
    },
    Power {
        exponent: f64,
    },
}

impl NRule {
    pub fn n_for(&self, eps: f64) -> i64 {
        match *self {
            NRule::Fixed(n) => n,
            NRule::Scaled { m_prime } => (m_prime / eps).ceil() as i64,
            NRule::Power { exponent } => eps.powf(-exponent).ceil() as i64,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            NRule::Power { exponent } => Some(exponent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub flavor: Flavor,
    pub side: Side,
}

fn all_cells() -> Vec<Cell> {
    let mut v = vec![];
    for flavor in [Flavor::Noisy, Flavor::Coarse] {
        for side in [Side::Classical, Side::Quantum] {
            v.push(Cell { flavor, side });
        }
    }
    v
}

fn default_paths() -> Vec<NormPath> {
    vec![NormPath::Exact]
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub epsilon_grid: Vec<f64>,
    #[serde(rename = "N_rule")]
    pub n_rule: NRule,
    #[serde(default = "all_cells")]
    pub flavors: Vec<Cell>,
    #[serde(default = "default_paths")]
    pub paths: Vec<NormPath>,
    #[serde(default)]
    pub seed: u64,
    /// 0 = not set; the --threads flag and TORAL_RELAX_THREADS take precedence.
    #[serde(default)]
    pub threads: usize,
}

/// Everything a sweep needs, validated.
pub struct Prepared {
    pub map: ClassicalMapSpec,
    pub kernel: NoiseKernel,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema {}, expected {SCHEMA}", self.schema)));
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(CliError::Config("epsilon_grid must be strictly positive".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config("epsilon_grid must be strictly descending".into()));
        }
        match self.n_rule {
            NRule::Fixed(n) if n < 1 => return Err(CliError::Config("N_rule.fixed must be positive".into())),
            NRule::Scaled { m_prime } if !(m_prime > 0.0 && m_prime.is_finite()) => {
                return Err(CliError::Config("N_rule.scaled.M_prime must be positive".into()))
            }
            NRule::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                return Err(CliError::Config("N_rule.power.exponent must be positive".into()))
            }
            _ => {}
        }
        if self.paths.is_empty() {
            return Err(CliError::Config("paths must not be empty".into()));
        }
        self.prepare().map(|_| ())
    }

    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let map = self.map.build()?;
        let kernel = NoiseKernel::new(self.kernel, map.dim_d()).map_err(|e| CliError::Config(format!("kernel: {e}")))?;
        Ok(Prepared { map, kernel })
    }

    /// ε values whose N admits no Bloch angle; those rows carry an error instead of a τ.
    pub fn inadmissible(&self) -> Result<Vec<(f64, i64)>, CliError> {
        let p = self.prepare()?;
        Ok(self
            .epsilon_grid
            .iter()
            .map(|&e| (e, self.n_rule.n_for(e)))
            .filter(|&(_, n)| QuantumSetting::for_map(&p.map.linear, n).is_err())
            .collect())
    }

    /// SHA-256 of the canonical JSON of every result-relevant field (the thread count is excluded).
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(&bytes);
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{"schema": 1, "kernel": {"family": "gaussian"}, "epsilon_grid": [0.1, 0.05],
        "N_rule": {"scaled": {"M_prime": 28}}}"#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::from_json(BASIC).unwrap();
        assert_eq!(c.map, MapConfig::default());
        assert_eq!(c.flavors.len(), 4);
        assert_eq!(c.paths, vec![NormPath::Exact]);
        assert_eq!(c.n_rule.n_for(0.1), 280);
        assert_eq!(c.n_rule.n_for(0.05), 560);
    }

    #[test]
    fn n_rules() {
        assert_eq!(NRule::Fixed(64).n_for(0.3), 64);
        assert_eq!(NRule::Power { exponent: 2.0 }.n_for(0.1), 100);
        assert_eq!(NRule::Scaled { m_prime: 28.0 }.n_for(0.002), 14000);
        let r: NRule = serde_json::from_str(r#"{"fixed": 12}"#).unwrap();
        assert_eq!(r, NRule::Fixed(12));
        let r: NRule = serde_json::from_str(r#"{"power": {"exponent": 1.5}}"#).unwrap();
        assert_eq!(r.exponent(), Some(1.5));
    }

    #[test]
    fn rejects_bad_grids_and_schema() {
        for bad in [
            r#"{"schema": 2, "epsilon_grid": [], "N_rule": {"fixed": 8}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.05, 0.1], "N_rule": {"fixed": 8}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1, 0.1], "N_rule": {"fixed": 8}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1, -0.1], "N_rule": {"fixed": 8}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1], "N_rule": {"fixed": 0}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1], "N_rule": {"fixed": 8}, "map": {"matrix": [[1, 1], [1, 1]]}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1], "N_rule": {"fixed": 8}, "kernel": {"family": "power_law", "params": {"tail": 1.0}}}"#,
            r#"{"schema": 1, "epsilon_grid": [0.1], "N_rule": {"fixed": 8}, "bogus": 1}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn kicked_map_and_kernels() {
        let c = ExperimentConfig::from_json(
            r#"{"schema": 1, "epsilon_grid": [0.1], "N_rule": {"fixed": 8},
            "map": {"matrix": [[2, 1], [1, 1]], "kick": [{"k": [0, 1], "re": 0.1}, {"k": [0, -1], "re": 0.1}]},
            "kernel": {"family": "compact_bump", "params": {"radius": 1.0}}}"#,
        )
        .unwrap();
        let p = c.prepare().unwrap();
        assert!(p.map.has_kick());
        assert_eq!(p.kernel.family(), KernelFamily::CompactBump { radius: 1.0 });
    }

    #[test]
    fn hash_ignores_threads_only() {
        let a = ExperimentConfig::from_json(BASIC).unwrap();
        let mut b = a.clone();
        b.threads = 7;
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 1;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn inadmissible_pairs_are_listed() {
        // the shear [[1,1],[0,1]] has F − I singular and an odd checkerboard vector, so odd N admit no angle
        let c = ExperimentConfig::from_json(
            r#"{"schema": 1, "epsilon_grid": [0.5, 0.25, 0.2], "N_rule": {"power": {"exponent": 1}}, "map": {"matrix": [[1, 1], [0, 1]]}}"#,
        )
        .unwrap();
        assert_eq!(c.inadmissible().unwrap(), vec![(0.2, 5)]);
        let cat = ExperimentConfig::from_json(BASIC).unwrap();
        assert!(cat.inadmissible().unwrap().is_empty());
    }
}
