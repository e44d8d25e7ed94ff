//! One-parameter sweeps: a scenario re-run per value of a numeric field.

use rayon::prelude::*;
use scuba_core::analytics::{p_collision, PowerModelInputs, StateProbabilities};
use scuba_core::engine::run_replicas;
use scuba_core::{MetricsReport, ScubaMode};
use serde::Serialize;

use crate::analytic::{buffer_probability, mode_power, probabilities_from_report};
use crate::config::{get_path, is_file_key, set_path, ScenarioFile};
use crate::error::{CliError, Result};
use crate::output::mode_label;
use crate::svg::{Panel, Series};

/// A sweepable field and the factor from axis units to field units.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub path: String,
    pub factor: f64,
    pub integer: bool,
}

/// Short names in the protocol's own notation. `N_SL-DRX` is in SFs, the field in frames.
const ALIASES: [(&str, &str, f64); 7] = [
    ("N_SL-DRX", "sl_paging.t_sl_drx", 0.1),
    ("T_SL-DRX", "sl_paging.t_sl_drx", 1.0),
    ("N_SL-PO", "sl_paging.n_sl_po", 1.0),
    ("N_SAM-U", "sam.n_sam_u_interval", 1.0),
    ("N_SAM-D", "sam.n_sam_d_interval", 1.0),
    ("N_UE", "n_ue", 1.0),
    ("N_BANDS", "n_bands", 1.0),
];

fn normalise(s: &str) -> String {
    s.to_ascii_uppercase().replace('_', "-")
}

/// Resolves `name` against the aliases, then against the numeric fields of `base`.
pub fn resolve_axis(name: &str, base: &ScenarioFile) -> Result<Axis> {
    let table = base.to_table()?;
    let (path, factor) = ALIASES
        .iter()
        .find(|(a, ..)| normalise(a) == normalise(name))
        .map(|&(_, p, f)| (p.to_string(), f))
        .unwrap_or_else(|| (name.to_string(), 1.0));
    let unknown = || {
        let names: Vec<&str> = ALIASES.iter().map(|a| a.0).collect();
        CliError::config(
            name,
            format!(
                "unknown sweep axis; use a numeric scenario field or one of {}",
                names.join(", ")
            ),
        )
    };
    if is_file_key(&path) {
        return Err(unknown());
    }
    let integer = match get_path(&table, &path) {
        Some(toml::Value::Integer(_)) => true,
        Some(toml::Value::Float(_)) => false,
        _ => return Err(unknown()),
    };
    Ok(Axis {
        name: name.to_string(),
        path,
        factor,
        integer,
    })
}

impl Axis {
    fn field_value(&self, v: f64) -> Result<toml::Value> {
        let x = v * self.factor;
        if !x.is_finite() {
            return Err(CliError::config(&self.path, format!("{v} is not a number")));
        }
        if self.integer {
            let r = x.round();
            if (x - r).abs() > 1e-9 || r < 0.0 {
                return Err(CliError::config(
                    &self.path,
                    format!("axis value {v} gives {x}, not a non-negative integer"),
                ));
            }
            Ok(toml::Value::Integer(r as i64))
        } else {
            Ok(toml::Value::Float(x))
        }
    }

    /// The document at one sweep point, validated.
    pub fn apply(&self, base: &ScenarioFile, v: f64) -> Result<ScenarioFile> {
        let mut t = base.to_table()?;
        set_path(&mut t, &self.path, self.field_value(v)?)?;
        ScenarioFile::from_table(t)
    }
}

/// One line of `sweep.csv`. Simulated columns are empty in analytic-only sweeps, the
/// analytic ones when a closed form does not apply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub seed: u64,
    pub replicas: u32,
    pub mode: String,
    pub n_ue: u32,
    pub t_sl_drx: u32,
    pub avg_power_mw: Option<f64>,
    pub analytic_power_mw: Option<f64>,
    pub latency_avg_ms: Option<f64>,
    pub latency_p99_ms: Option<f64>,
    pub messages_completed: Option<u64>,
    pub transmissions: Option<u64>,
    pub collided: Option<u64>,
    pub data_collided: Option<u64>,
    pub sam_collided: Option<u64>,
    pub analytic_p_c: Option<f64>,
}

fn analytic_columns(file: &ScenarioFile, report: Option<&MetricsReport>) -> (Option<f64>, Option<f64>) {
    let s = &file.scenario;
    let first = s.mode_of(0);
    let uniform = (1..s.n_ue).all(|u| s.mode_of(u) == first);
    let inp = PowerModelInputs::from_scenario(s).ok();
    let probs = match report {
        Some(r) => probabilities_from_report(s, r).ok(),
        None => Some(StateProbabilities::idle()),
    };
    let power = match (uniform, inp, probs) {
        (true, Some(inp), Some(p)) => mode_power(&inp, first, &p).ok(),
        _ => None,
    };
    let pc = if first == ScubaMode::Llm || s.sl_paging.is_llm() {
        None
    } else {
        buffer_probability(s).ok().and_then(|p| {
            p_collision(
                s.n_ue,
                s.n_bands,
                p,
                s.sl_paging.n_sl_po,
                s.sl_paging.n_sl_drx(),
                s.topology,
            )
            .ok()
        })
    };
    (power, pc)
}

fn row(axis: &Axis, v: f64, file: &ScenarioFile, report: Option<&MetricsReport>) -> SweepRow {
    let s = &file.scenario;
    let (analytic_power_mw, analytic_p_c) = analytic_columns(file, report);
    SweepRow {
        axis: axis.name.clone(),
        value: v,
        seed: s.seed,
        replicas: file.replicas,
        mode: mode_label(s),
        n_ue: s.n_ue,
        t_sl_drx: s.sl_paging.t_sl_drx,
        avg_power_mw: report.map(|r| r.avg_power_mw),
        analytic_power_mw,
        latency_avg_ms: report.map(|r| r.latency_ms.avg),
        latency_p99_ms: report.map(|r| r.latency_ms.p99),
        messages_completed: report.map(|r| r.messages_completed),
        transmissions: report.map(|r| r.transmissions),
        collided: report.map(|r| r.collided),
        data_collided: report.map(|r| r.data_collided),
        sam_collided: report.map(|r| r.sam_collided),
        analytic_p_c,
    }
}

/// Runs every point (in parallel) and returns the rows in `values` order. All points are
/// validated before any runs.
pub fn sweep(base: &ScenarioFile, axis: &Axis, values: &[f64], analytic_only: bool) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::config(&axis.name, "the sweep has no values"));
    }
    let points: Vec<ScenarioFile> = values.iter().map(|&v| axis.apply(base, v)).collect::<Result<_>>()?;
    let reports: Vec<Option<MetricsReport>> = if analytic_only {
        vec![None; points.len()]
    } else {
        points
            .par_iter()
            .map(|f| run_replicas(&f.scenario, f.replicas).map(|c| Some(c.report(&f.scenario.power))))
            .collect::<scuba_core::Result<_>>()?
    };
    Ok(values
        .iter()
        .zip(&points)
        .zip(&reports)
        .map(|((&v, f), r)| row(axis, v, f, r.as_ref()))
        .collect())
}

fn series(name: &str, rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> Option<Series> {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| pick(r).map(|y| (r.value, y))).collect();
    (!pts.is_empty()).then(|| Series::line(name, pts))
}

pub fn plot(axis: &Axis, rows: &[SweepRow]) -> String {
    let mut panels = Vec::new();
    let power: Vec<Series> = [
        series("simulated", rows, |r| r.avg_power_mw),
        series("analytic", rows, |r| r.analytic_power_mw).map(Series::dashed),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !power.is_empty() {
        panels.push(Panel {
            title: "Average power".into(),
            x_label: axis.name.clone(),
            y_label: "mW".into(),
            series: power,
            ..Panel::default()
        });
    }
    let latency: Vec<Series> = [
        series("average", rows, |r| r.latency_avg_ms),
        series("99th percentile", rows, |r| r.latency_p99_ms).map(Series::dashed),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !latency.is_empty() {
        panels.push(Panel {
            title: "Latency".into(),
            x_label: axis.name.clone(),
            y_label: "ms".into(),
            series: latency,
            ..Panel::default()
        });
    }
    if let Some(pc) = series("analytic", rows, |r| r.analytic_p_c.filter(|&p| p > 0.0)) {
        panels.push(Panel {
            title: "Data collision probability".into(),
            x_label: axis.name.clone(),
            y_label: "p_c".into(),
            log_y: true,
            series: vec![pc],
            ..Panel::default()
        });
    }
    crate::svg::render(&panels)
}
