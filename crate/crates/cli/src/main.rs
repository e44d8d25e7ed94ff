use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scuba_cli::analytic;
use scuba_cli::{
    exit, load, replay_to_dir, reproduce_to_dir, run_to_dir, sweep_to_dir, CliError, OutputDir, ReproduceOptions,
    Result, RunManifest, ScenarioFile, Target, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
use scuba_core::{ScubaMode, Topology};

/// Simulate, sweep and analyse the SCUBA sidelink MAC.
#[derive(Parser)]
#[command(name = "scuba", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario document (TOML), or a run manifest (JSON). Defaults apply without one.
    scenario: Option<PathBuf>,

    /// Override a field, e.g. `--set sl_paging.t_sl_drx=64`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    replicas: Option<u32>,
}

impl ScenarioArgs {
    fn load(&self, extra: &[String]) -> Result<ScenarioFile> {
        let mut sets = self.sets.clone();
        if let Some(s) = self.seed {
            sets.push(format!("seed={s}"));
        }
        if let Some(r) = self.replicas {
            sets.push(format!("replicas={r}"));
        }
        sets.extend_from_slice(extra);
        load(self.scenario.as_deref(), &sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: report.json, summary.csv and optionally trace.ndjson.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the newline-delimited trace (single replica).
        #[arg(long)]
        trace: bool,
    },
    /// Re-run a scenario for each value of one numeric parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Field path (`sl_paging.n_sl_po`) or alias (N_SL-DRX in SFs, N_SAM-U, N_UE, ...).
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Closed forms only, no simulation.
        #[arg(long)]
        analytic_only: bool,
    },
    /// Evaluate a closed-form model and print JSON.
    Analytic {
        #[command(subcommand)]
        model: Model,
    },
    /// Run reproduction targets and compare against reference values.
    Reproduce {
        /// Targets, or `all`.
        #[arg(required = true, value_parser = parse_target_list)]
        targets: Vec<Vec<Target>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiplies horizons and trial counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Repeat the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Args)]
struct Probabilities {
    #[arg(long, requires = "p_cdrx")]
    p_cona: Option<f64>,
    #[arg(long, requires = "p_cona")]
    p_cdrx: Option<f64>,
    /// SAM-Us heard before a SAM-D.
    #[arg(long)]
    k_sam_u: Option<f64>,
    /// Measure the mode probabilities by running the scenario.
    #[arg(long, conflicts_with = "p_cona")]
    from_sim: bool,
}

impl Probabilities {
    fn resolve(&self, file: &ScenarioFile) -> Result<Option<scuba_core::analytics::StateProbabilities>> {
        if self.from_sim {
            let mut p = analytic::probabilities_from_sim(file)?;
            if let Some(k) = self.k_sam_u {
                p.k_sam_u = k;
            }
            return Ok(Some(p));
        }
        match (self.p_cona, self.p_cdrx) {
            (Some(a), Some(c)) => analytic::probabilities_from_flags(a, c, self.k_sam_u, &file.scenario).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Subcommand)]
enum Model {
    /// Average power of a mode.
    Power {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_parser = parse_serde::<ScubaMode>)]
        mode: ScubaMode,
        #[command(flatten)]
        probs: Probabilities,
    },
    /// Data collision probability on one SL-PO.
    Collision {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        n_ue: u32,
        #[arg(long, value_parser = parse_topology, default_value = "random-peers")]
        topology: Topology,
        /// Buffer probability; defaults to the scenario's Poisson sidelink traffic.
        #[arg(long)]
        p_tx: Option<f64>,
        /// Also estimate by Monte Carlo with this many trials.
        #[arg(long, value_name = "TRIALS")]
        monte_carlo: Option<u64>,
    },
    /// SAM collision probability.
    SamCollision {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        n_ue: u32,
        #[command(flatten)]
        probs: Probabilities,
    },
    /// Battery life with SCUBA's data exchanges.
    Battery {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// SCUBA power instead of the one derived from the sidelink traffic.
        #[arg(long)]
        power_mw: Option<f64>,
    },
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

/// `central` and `random` are accepted as short forms.
fn parse_topology(s: &str) -> std::result::Result<Topology, String> {
    match s {
        "central" => Ok(Topology::CentralDst),
        "random" => Ok(Topology::RandomPeers),
        _ => parse_serde(s),
    }
}

fn parse_target_list(s: &str) -> std::result::Result<Vec<Target>, String> {
    use clap::ValueEnum;
    if s == "all" {
        return Ok(Target::ALL.to_vec());
    }
    Target::from_str(s, true).map(|t| vec![t])
}

fn parse_values(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| CliError::config("--values", format!("`{v}` is not a number")))
        })
        .collect()
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("results serialize"));
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, trace } => {
            let extra: Vec<String> = if trace {
                vec!["output.trace=true".into()]
            } else {
                vec![]
            };
            let file = scenario.load(&extra)?;
            let out = OutputDir::create(&cli.out)?;
            let r = run_to_dir(&file, &out)?;
            println!(
                "{}: {:.4} mW, latency avg {:.1} ms p99 {:.1} ms over {} messages",
                out.path().display(),
                r.avg_power_mw,
                r.latency_ms.avg,
                r.latency_ms.p99,
                r.latency_ms.count
            );
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            analytic_only,
        } => {
            let file = scenario.load(&[])?;
            let values = parse_values(&values)?;
            let out = OutputDir::create(&cli.out)?;
            let rows = sweep_to_dir(&file, &axis, &values, analytic_only, &out)?;
            println!("{}: {} sweep points", out.path().display(), rows.len());
        }
        Command::Analytic { model } => match model {
            Model::Power { scenario, mode, probs } => {
                let file = scenario.load(&[])?;
                let p = probs.resolve(&file)?;
                print_json(&analytic::power(&file, mode, p)?);
            }
            Model::Collision {
                scenario,
                n_ue,
                topology,
                p_tx,
                monte_carlo,
            } => {
                let file = scenario.load(&[])?;
                print_json(&analytic::collision(&file, n_ue, topology, p_tx, monte_carlo)?);
            }
            Model::SamCollision { scenario, n_ue, probs } => {
                let file = scenario.load(&[])?;
                let p = probs.resolve(&file)?.ok_or_else(|| {
                    CliError::Usage("sam-collision needs --p-cona and --p-cdrx, or --from-sim".into())
                })?;
                print_json(&analytic::sam_collision(&file, n_ue, &p)?);
            }
            Model::Battery { scenario, power_mw } => {
                let file = scenario.load(&[])?;
                print_json(&analytic::battery(&file, power_mw)?);
            }
        },
        Command::Reproduce { targets, seed, scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(CliError::config("--scale", "must be positive"));
            }
            let opts = ReproduceOptions { seed, scale };
            let root = OutputDir::create(&cli.out)?;
            let mut targets: Vec<Target> = targets.into_iter().flatten().collect();
            targets.dedup();
            let (mut failed, mut total) = (0, 0);
            for t in targets {
                let report = reproduce_to_dir(t, &opts, &root.sub(t.name())?)?;
                print!("{}", report.comparison_table());
                failed += report.failures().len();
                total += report.graded();
            }
            if failed > 0 {
                return Err(CliError::Tolerance { failed, total });
            }
        }
        Command::Replay { manifest } => {
            let m = RunManifest::read(&manifest)?;
            let out = OutputDir::create(&cli.out)?;
            replay_to_dir(&m, &out)?;
            println!("{}: replayed `{}`", out.path().display(), m.command);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("scuba: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
