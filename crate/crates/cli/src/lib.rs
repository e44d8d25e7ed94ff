//! Command implementations behind the `scuba` binary: scenario documents, output
//! bundles, sweeps, analytic evaluations and reproduction targets.
//!
//! Every command that writes files writes `manifest.json` first. A manifest can be
//! passed back to `scuba run` in place of a scenario document to repeat the run.

pub mod analytic;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod reproduce;
pub mod svg;
pub mod sweep;

use std::fs::File;
use std::io::BufWriter;

use scuba_core::engine::{run_replicas, simulate};
use scuba_core::MetricsReport;

pub use config::{load, OutputOptions, ScenarioFile};
pub use error::{exit, CliError, Result};
pub use manifest::{OutputDir, RunManifest, MANIFEST_NAME};
pub use output::{SummaryRow, SUMMARY_COLUMNS};
pub use reproduce::{reproduce, Check, ReproduceOptions, Target, TargetReport};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SCUBA_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "scuba-out";

/// Runs one scenario into `out`: manifest, `report.json`, `summary.csv` and, when
/// enabled, `trace.ndjson`.
pub fn run_to_dir(file: &ScenarioFile, out: &OutputDir) -> Result<MetricsReport> {
    let mut outputs = vec!["report.json".to_string(), "summary.csv".to_string()];
    if file.output.trace {
        outputs.push("trace.ndjson".into());
    }
    out.write_manifest(&RunManifest::new("run", file, outputs))?;
    let s = &file.scenario;
    let report = if file.output.trace {
        let path = out.join("trace.ndjson");
        let f = File::create(&path).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        let mut sink = output::NdjsonTrace::new(BufWriter::new(f));
        let c = simulate(s, &mut sink)?;
        sink.finish().map_err(|source| CliError::Write { path, source })?;
        c.report(&s.power)
    } else {
        run_replicas(s, file.replicas)?.report(&s.power)
    };
    out.write_json("report.json", &report)?;
    out.write("summary.csv", &output::csv_bytes(&[SummaryRow::new(file, &report)])?)?;
    Ok(report)
}

/// Sweeps `axis` over `values` into `out`: manifest, `sweep.csv` and `sweep.svg`.
pub fn sweep_to_dir(
    file: &ScenarioFile,
    axis: &str,
    values: &[f64],
    analytic_only: bool,
    out: &OutputDir,
) -> Result<Vec<sweep::SweepRow>> {
    let axis = sweep::resolve_axis(axis, file)?;
    if values.is_empty() {
        return Err(CliError::config(&axis.name, "the sweep has no values"));
    }
    // Reject bad points before anything is written.
    for &v in values {
        axis.apply(file, v)?;
    }
    let mut outputs = vec!["sweep.csv".to_string()];
    if file.output.plot {
        outputs.push("sweep.svg".into());
    }
    let manifest = RunManifest::new("sweep", file, outputs)
        .with_parameter("axis", &axis.name)
        .with_parameter("values", values)
        .with_parameter("analytic_only", analytic_only);
    out.write_manifest(&manifest)?;
    let rows = sweep::sweep(file, &axis, values, analytic_only)?;
    out.write("sweep.csv", &output::csv_bytes(&rows)?)?;
    if file.output.plot {
        out.write("sweep.svg", sweep::plot(&axis, &rows).as_bytes())?;
    }
    Ok(rows)
}

/// Runs `target` into `out`: manifest, the target's artifacts and `checks.csv`.
pub fn reproduce_to_dir(target: Target, opts: &ReproduceOptions, out: &OutputDir) -> Result<TargetReport> {
    let file = ScenarioFile {
        scenario: scuba_core::Scenario {
            seed: opts.seed,
            ..Default::default()
        },
        ..ScenarioFile::default()
    };
    let manifest = RunManifest::new(format!("reproduce {}", target.name()), &file, target.outputs())
        .with_parameter("scale", opts.scale);
    out.write_manifest(&manifest)?;
    let report = reproduce(target, opts)?;
    for a in &report.artifacts {
        out.write(&a.name, &a.bytes)?;
    }
    Ok(report)
}

/// Repeats the command recorded in a manifest into `out`.
pub fn replay_to_dir(m: &RunManifest, out: &OutputDir) -> Result<()> {
    let file = m.file();
    file.validate()?;
    let param = |k: &str| {
        m.parameters
            .get(k)
            .ok_or_else(|| CliError::config(format!("parameters.{k}"), "missing from the manifest"))
    };
    let bad = |k: &str| CliError::config(format!("parameters.{k}"), "has the wrong type");
    match m.command.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["run"] => run_to_dir(&file, out).map(drop),
        ["sweep"] => {
            let axis = param("axis")?.as_str().ok_or_else(|| bad("axis"))?;
            let values: Vec<f64> = serde_json::from_value(param("values")?.clone()).map_err(|_| bad("values"))?;
            let analytic_only = param("analytic_only")?.as_bool().ok_or_else(|| bad("analytic_only"))?;
            sweep_to_dir(&file, axis, &values, analytic_only, out).map(drop)
        }
        ["reproduce", name] => {
            let target = Target::ALL
                .into_iter()
                .find(|t| t.name() == *name)
                .ok_or_else(|| CliError::config("command", format!("unknown target {name}")))?;
            let scale = param("scale")?.as_f64().ok_or_else(|| bad("scale"))?;
            let opts = ReproduceOptions { seed: m.seed, scale };
            reproduce_to_dir(target, &opts, out).map(drop)
        }
        _ => Err(CliError::config("command", format!("cannot replay `{}`", m.command))),
    }
}
