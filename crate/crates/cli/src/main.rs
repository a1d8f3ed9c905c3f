use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use toral_relax::lattice::OrbitVariant;
use toral_relax::map::ClassicalMapSpec;
use toral_relax_cli::emit::{emit, Format};
use toral_relax_cli::sweep::{fit_rate, run_sweep_cached, ResultRow};
use toral_relax_cli::{acceptance, commands, resolve_threads, CliError, ExperimentConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "toral-relax", version, about = "Classical and quantum relaxation times of noisy toral maps")]
struct Cli {
    /// JSON experiment config (schema 1); the cat map with gaussian noise when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; tables go to stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Recompute even when a cached sweep exists
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (overrides TORAL_RELAX_THREADS and the config)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Relaxation times at a single ε
    Relax {
        #[arg(long)]
        epsilon: Option<f64>,
        /// Fixed N (otherwise the config's N rule)
        #[arg(long = "N", alias = "n")]
        n: Option<i64>,
    },
    /// Full ε sweep from the config, with slope fits
    Sweep,
    /// Minimal orbit extension over nonzero lattice vectors
    LatticeMin {
        #[arg(long, default_value_t = 1)]
        n_min: u64,
        #[arg(long, default_value_t = 14)]
        n_max: u64,
        #[arg(long, value_parser = ["sum", "endpoint"], default_value = "sum")]
        variant: String,
    },
    /// Classical and quantum noise eigenvalues with the gaussian sandwich bounds
    NoiseEig {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long = "N", alias = "n", default_value_t = 16)]
        n: i64,
        #[arg(long, default_value_t = 3)]
        kmax: i64,
    },
    /// Egorov discrepancy against N (kicked cat map unless the config has a kick)
    Egorov {
        #[arg(long, default_value_t = 0.3)]
        kappa: f64,
        #[arg(long, default_value_t = 3)]
        steps: u64,
        #[arg(long = "N-values", alias = "n-values", value_delimiter = ',', default_values_t = [32i64, 64, 128])]
        n_values: Vec<i64>,
    },
    /// Regime labels over the config's ε grid
    Regimes {
        #[arg(long = "N-values", alias = "n-values", value_delimiter = ',')]
        n_values: Option<Vec<i64>>,
    },
    /// Run the acceptance suite
    Accept {
        /// Criterion ids (all when omitted)
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
    },
}

const DEFAULT_CONFIG: &str = r#"{"schema": 1, "epsilon_grid": [0.1, 0.05, 0.02, 0.01, 0.005, 0.002],
    "N_rule": {"scaled": {"M_prime": 28}}}"#;

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(p) => ExperimentConfig::load(p),
        None => ExperimentConfig::from_json(DEFAULT_CONFIG),
    }
}

fn print_fits(rows: &[ResultRow]) {
    let mut groups: Vec<Vec<ResultRow>> = vec![];
    for r in rows {
        match groups.iter_mut().find(|g| g[0].flavor == r.flavor && g[0].side == r.side && g[0].path == r.path) {
            Some(g) => g.push(r.clone()),
            None => groups.push(vec![r.clone()]),
        }
    }
    for g in groups {
        let path = g[0].path.map_or(String::new(), |p| format!("/{p}"));
        match fit_rate(&g) {
            Ok(f) => eprintln!("fit {}/{}{path}: slope {:.4}, intercept {:.4}, r² {:.4} ({} points)", g[0].flavor, g[0].side, f.slope, f.intercept, f.r2, f.points),
            Err(e) => eprintln!("fit {}/{}{path}: {e}", g[0].flavor, g[0].side),
        }
    }
}

fn output_rows(cli: &Cli, rows: &[ResultRow], hash: &str, stem: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(dir) => {
            for p in emit(rows, cli.format, dir, stem, hash)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        None => {
            use std::io::Write;
            let bytes = match cli.format {
                Format::Csv => toral_relax_cli::emit::to_csv(rows)?,
                Format::Json => toral_relax_cli::emit::to_json(rows, hash)?,
            };
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(cli)?;
    let threads = resolve_threads(cli.threads, std::env::var(THREADS_ENV).ok().as_deref(), config.threads)?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    let out = cli.out.as_deref();
    match &cli.cmd {
        Cmd::Relax { epsilon, n } => {
            let mut c = config.clone();
            let eps = epsilon.or_else(|| c.epsilon_grid.first().copied()).ok_or_else(|| CliError::Config("no ε given".into()))?;
            c.epsilon_grid = vec![eps];
            if let Some(n) = n {
                c.n_rule = toral_relax_cli::config::NRule::Fixed(*n);
            }
            c.validate()?;
            let rows = toral_relax_cli::run_sweep(&c)?;
            output_rows(cli, &rows, &c.content_hash(), "relax")?;
            numerical_check(&rows)
        }
        Cmd::Sweep => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let res = run_sweep_cached(&config, &dir, cli.force)?;
            if res.cached {
                eprintln!("cache hit {} (use --force to recompute)", config.content_hash());
            }
            for (e, n) in config.inadmissible()? {
                eprintln!("warning: no admissible Bloch angle at ε = {e}, N = {n}; quantum rows carry an error");
            }
            for p in emit(&res.rows, cli.format, &dir, "sweep", &config.content_hash())? {
                eprintln!("wrote {}", p.display());
            }
            print_fits(&res.rows);
            if res.numerical_failures > 0 {
                return Err(CliError::Numerical(toral_relax::Error::NoConvergence(format!("{} rows did not converge", res.numerical_failures))));
            }
            Ok(())
        }
        Cmd::LatticeMin { n_min, n_max, variant } => {
            let v = if variant == "sum" { OrbitVariant::Sum } else { OrbitVariant::Endpoint };
            let f = config.prepare()?.map.linear;
            commands::lattice_min(&f, *n_min, *n_max, v)?.output(cli.format, out, "lattice_min")
        }
        Cmd::NoiseEig { epsilon, n, kmax } => {
            let kernel = config.prepare()?.kernel;
            commands::noise_eig(&kernel, *epsilon, *n, *kmax)?.output(cli.format, out, "noise_eig")
        }
        Cmd::Egorov { kappa, steps, n_values } => {
            let p = config.prepare()?;
            let map = if p.map.has_kick() { p.map } else { ClassicalMapSpec::kicked_cat(*kappa) };
            commands::egorov(&map, *steps, n_values)?.output(cli.format, out, "egorov")
        }
        Cmd::Regimes { n_values } => commands::regimes(&config, n_values.as_deref())?.output(cli.format, out, "regimes"),
        Cmd::Accept { only } => {
            let ids = only.clone().unwrap_or_else(|| acceptance::IDS.to_vec());
            let mut failed = vec![];
            for id in ids {
                let r = acceptance::run(id)?;
                println!("{r}");
                if !r.passed {
                    failed.push(id);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Acceptance(format!("criteria {failed:?} failed")))
            }
        }
    }
}

fn numerical_check(rows: &[ResultRow]) -> Result<(), CliError> {
    match rows.iter().find_map(|r| r.error.as_ref().filter(|e| e.starts_with("no convergence"))) {
        Some(e) => Err(CliError::Numerical(toral_relax::Error::NoConvergence(e.clone()))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
