//! CSV tables and the newline-delimited trace.

use std::io::Write;

use scuba_core::engine::{TraceRecord, TraceSink};
use scuba_core::{MetricsReport, Scenario, ScubaError};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioFile;
use crate::error::{CliError, Result};

/// One line of `summary.csv`. The column order is the field order and is pinned by a
/// golden test; add columns at the end only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub replicas: u32,
    /// `native`, `sam`, `llm` or `mixed`.
    pub mode: String,
    pub n_ue: u32,
    /// Frames.
    pub t_sl_drx: u32,
    pub measured_sf: u64,
    pub avg_power_mw: f64,
    pub latency_avg_ms: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_max_ms: f64,
    pub messages_created: u64,
    pub messages_completed: u64,
    pub messages_pending: u64,
    pub transmissions: u64,
    pub collided: u64,
    pub data_collided: u64,
    pub sam_collided: u64,
    pub p_cona: f64,
    pub p_cdrx: f64,
    pub p_idrx: f64,
    pub max_duty_cycle: f64,
}

pub const SUMMARY_COLUMNS: &str = "seed,replicas,mode,n_ue,t_sl_drx,measured_sf,avg_power_mw,\
latency_avg_ms,latency_p50_ms,latency_p99_ms,latency_max_ms,messages_created,messages_completed,\
messages_pending,transmissions,collided,data_collided,sam_collided,p_cona,p_cdrx,p_idrx,max_duty_cycle";

pub fn mode_label(s: &Scenario) -> String {
    let first = s.mode_of(0);
    if (1..s.n_ue).any(|u| s.mode_of(u) != first) {
        return "mixed".into();
    }
    serde_json::to_value(first)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

impl SummaryRow {
    pub fn new(file: &ScenarioFile, r: &MetricsReport) -> Self {
        let s = &file.scenario;
        Self {
            seed: s.seed,
            replicas: file.replicas,
            mode: mode_label(s),
            n_ue: s.n_ue,
            t_sl_drx: s.sl_paging.t_sl_drx,
            measured_sf: r.measured_sf,
            avg_power_mw: r.avg_power_mw,
            latency_avg_ms: r.latency_ms.avg,
            latency_p50_ms: r.latency_ms.p50,
            latency_p99_ms: r.latency_ms.p99,
            latency_max_ms: r.latency_ms.max,
            messages_created: r.messages_created,
            messages_completed: r.messages_completed,
            messages_pending: r.messages_pending,
            transmissions: r.transmissions,
            collided: r.collided,
            data_collided: r.data_collided,
            sam_collided: r.sam_collided,
            p_cona: r.occupancy.p_cona,
            p_cdrx: r.occupancy.p_cdrx,
            p_idrx: r.occupancy.p_idrx,
            max_duty_cycle: r.max_duty_cycle,
        }
    }
}

/// CSV with a header row named after the fields. No rows, no header.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Core(ScubaError::Invariant(format!("row does not serialize: {e}"))))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Core(ScubaError::Invariant(format!("csv buffer: {e}"))))
}

/// Writes one JSON object per trace record. The first I/O error stops writing and is
/// reported by [`NdjsonTrace::finish`].
pub struct NdjsonTrace<W: Write> {
    out: W,
    error: Option<std::io::Error>,
    pub records: u64,
}

impl<W: Write> NdjsonTrace<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            error: None,
            records: 0,
        }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for NdjsonTrace<W> {
    fn record(&mut self, rec: &TraceRecord) -> scuba_core::Result<()> {
        if self.error.is_some() {
            return Ok(());
        }
        let res = serde_json::to_writer(&mut self.out, rec)
            .map_err(std::io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        match res {
            Ok(()) => self.records += 1,
            Err(e) => self.error = Some(e),
        }
        Ok(())
    }
}
