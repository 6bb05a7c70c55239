//! Command-line front end. Files go to `--out`, a JSON summary to stdout.

use super::experiments::{
    asymptotic_csv, run_asymptotic, run_convergence_trace, run_power_experiment, run_sweep, run_validation, SweepKind,
};
use super::output::{write_json, write_text};
use super::scenario::{NetworkScenario, Preset, TargetSpec};
use super::HarnessError;
use crate::powerctl::Variant;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dsmimo", version, about = "Double-scattering massive MIMO uplink simulator")]
pub struct Cli {
    /// Scenario TOML; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Named parameter set applied on top of the scenario file.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Power-control algorithm(s) to run.
    #[arg(long, global = true, value_enum, default_value_t = VariantChoice::Both)]
    pub variant: VariantChoice,
    /// SE target in bit/s/Hz: `v` or `lo:hi` for per-user uniform targets.
    #[arg(long, global = true)]
    pub xi: Option<TargetSpec>,
    /// Monte-Carlo realizations per drop.
    #[arg(long, global = true)]
    pub mc: Option<usize>,
    /// Number of independent user drops.
    #[arg(long, global = true)]
    pub drops: Option<usize>,
    /// Gauss-Seidel instead of Jacobi updates.
    #[arg(long, global = true)]
    pub gauss_seidel: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantChoice {
    Alg1,
    Alg2,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Alg1 => vec![Variant::Alg1],
            VariantChoice::Alg2 => vec![Variant::Alg2],
            VariantChoice::Both => vec![Variant::Alg1, Variant::Alg2],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the effective scenario as TOML.
    Scenario,
    /// Closed-form versus Monte-Carlo SE at full power.
    Validate,
    /// Power minimization with both algorithms.
    Power,
    /// Per-iteration trajectory on one drop.
    Converge {
        /// Index of the drop to trace.
        #[arg(long, default_value_t = 0)]
        drop: usize,
    },
    /// Large-system limits of the full-power SE.
    Asymptotic,
    /// Repeat an experiment over a parameter grid.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Comma-separated grid; defaults depend on the kind.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

impl Cli {
    /// Defaults or file, then preset, then individual flags.
    pub fn scenario(&self) -> Result<NetworkScenario, HarnessError> {
        let mut s = match &self.scenario {
            Some(path) => NetworkScenario::load(path)?,
            None => NetworkScenario::default(),
        };
        if let Some(p) = self.preset {
            s.apply_preset(p);
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(xi) = self.xi {
            s.experiment.xi = xi;
        }
        if let Some(mc) = self.mc {
            s.experiment.monte_carlo = mc;
        }
        if let Some(d) = self.drops {
            s.experiment.drops = d;
        }
        if self.gauss_seidel {
            s.power.gauss_seidel = true;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(converged) => {
            if converged {
                EXIT_OK
            } else {
                eprintln!("error: fixed-point iteration did not converge within max_iter");
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Scenario(_) => EXIT_SCENARIO,
                _ => EXIT_FAILURE,
            }
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
    }
}

fn print_summary<T: serde::Serialize>(value: &T) -> Result<(), HarnessError> {
    println!("{}", serde_json::to_string_pretty(value).map_err(std::io::Error::other)?);
    Ok(())
}

/// `Ok(false)` when some fixed-point iteration hit `max_iter`.
fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let s = cli.scenario()?;
    let out = &cli.out;
    let drops = s.experiment.drops;
    let variants = cli.variant.variants();
    match &cli.command {
        Command::Scenario => {
            write_text(out, "scenario.toml", &s.to_toml())?;
            print!("{}", s.to_toml());
            Ok(true)
        }
        Command::Validate => {
            let v = run_validation(&s, drops, s.experiment.monte_carlo)?;
            write_text(out, "validation.csv", &v.to_csv())?;
            write_text(out, "validation_cdf.csv", &v.cdf("").to_csv())?;
            write_json(out, "validation_summary.json", &v.summary)?;
            print_summary(&v.summary)?;
            Ok(true)
        }
        Command::Power => {
            let p = run_power_experiment(&s, s.experiment.xi, &variants, drops)?;
            write_text(out, "power_drops.csv", &p.drops_csv())?;
            write_text(out, "power_users.csv", &p.users_csv())?;
            write_text(out, "power_cdf.csv", &p.power_cdf().to_csv())?;
            let summary = serde_json::json!({
                "xi": p.xi.to_string(),
                "drops": drops,
                "feasible_fraction": p.feasible_fraction(),
                "variants": p.summaries,
            });
            write_json(out, "power_summary.json", &summary)?;
            print_summary(&summary)?;
            Ok(p.all_converged())
        }
        Command::Converge { drop } => {
            let c = run_convergence_trace(&s, *drop, s.experiment.xi, &variants)?;
            write_text(out, "convergence.csv", &c.to_csv())?;
            for r in &c.reports {
                write_text(out, &format!("fixed_point_{}.json", r.variant), &format!("{}\n", r.to_json()))?;
            }
            let summary: Vec<_> = c
                .reports
                .iter()
                .map(|r| serde_json::json!({"variant": r.variant, "iterations": r.iterations, "converged": r.converged, "verdict": r.verdict, "total_power_mw": r.total_power()}))
                .collect();
            print_summary(&summary)?;
            Ok(c.all_converged())
        }
        Command::Asymptotic => {
            let rows = run_asymptotic(&s, drops)?;
            write_text(out, "asymptotic.csv", &asymptotic_csv(&rows))?;
            print_summary(&serde_json::json!({"drops": drops, "users": rows.len()}))?;
            Ok(true)
        }
        Command::Sweep { kind, values } => {
            let values = values.clone().unwrap_or_else(|| kind.default_values());
            let sw = run_sweep(&s, *kind, &values, &variants)?;
            let name = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            write_text(out, &format!("sweep_{name}.csv"), &sw.to_csv())?;
            if !sw.cdf.columns.is_empty() {
                write_text(out, &format!("sweep_{name}_cdf.csv"), &sw.cdf.to_csv())?;
            }
            write_json(out, &format!("sweep_{name}.json"), &sw)?;
            print_summary(&sw.points)?;
            let converged = sw.points.iter().all(|p| p.power.iter().all(|v| v.non_converged == 0));
            Ok(converged)
        }
    }
}
