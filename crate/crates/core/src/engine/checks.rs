//! Protocol properties checked over a trace as it is recorded.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::trace::{duty_cycle, Action, TraceRecord, TraceSink};
use crate::cellular::SlAvailability;
use crate::error::Result;
use crate::mac::{grant_to_data_sf, HarqConfig, MessageKind, UeIndex};
use crate::paging::Sf;

/// Violation counts and coverage of one checked trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub records: u64,
    /// Radio used while the cellular link held it.
    pub tdm_violations: u64,
    /// Reception while transmitting or switching, or two records for one UE and SF.
    pub half_duplex_violations: u64,
    pub grants: u64,
    /// Grants whose data SF is not where the mapping puts it, or whose data SF carried
    /// another TB.
    pub grant_violations: u64,
    /// Granted data SFs that carried the TB.
    pub grants_honoured: u64,
    /// Granted data SFs reached after the granting session had ended.
    pub grants_voided: u64,
    pub messages: u64,
    /// Messages fully acknowledged.
    pub acked: u64,
    /// Messages still buffered at the horizon.
    pub buffered: u64,
    /// Messages in neither or both terminal states.
    pub terminal_violations: u64,
    pub max_duty_cycle: f64,
}

impl PropertyReport {
    pub fn holds(&self, duty_limit: f64) -> bool {
        self.tdm_violations == 0
            && self.half_duplex_violations == 0
            && self.grant_violations == 0
            && self.terminal_violations == 0
            && self.max_duty_cycle < duty_limit
    }
}

/// A [`TraceSink`] that checks TDM exclusivity, half-duplex operation, the grant-to-data
/// mapping and TB terminal states without keeping the whole trace.
#[derive(Debug)]
pub struct PropertyMonitor {
    harq: HarqConfig,
    report: PropertyReport,
    last: HashMap<UeIndex, Sf>,
    /// UE -> data SF -> (session origin, msg, TB).
    grants: HashMap<UeIndex, BTreeMap<Sf, (Sf, u64, u16)>>,
    /// (src, msg) -> TBs acknowledged to the source.
    acked: HashMap<(UeIndex, u64), HashSet<u16>>,
    /// TX records kept for the duty-cycle sweep (TX and SAM only).
    tx: Vec<TraceRecord>,
}

impl PropertyMonitor {
    pub fn new(harq: HarqConfig) -> Self {
        Self {
            harq,
            report: PropertyReport::default(),
            last: HashMap::new(),
            grants: HashMap::new(),
            acked: HashMap::new(),
            tx: Vec::new(),
        }
    }

    fn check_grant_slot(&mut self, rec: &TraceRecord) {
        let Some(pending) = self.grants.get_mut(&rec.ue) else {
            return;
        };
        // Data SFs that passed without a record were slept through (blocked).
        while pending.first_key_value().is_some_and(|(&at, _)| at < rec.sf) {
            pending.pop_first();
        }
        if let Some((origin, msg, tb)) = pending.remove(&rec.sf) {
            // A grant dies with a session that failed before its data SF.
            if rec.origin.is_some_and(|o| o != origin) {
                self.report.grants_voided += 1;
            } else if rec.action == Action::Tx {
                if rec.msg == Some(msg) && rec.tb == Some(tb) {
                    self.report.grants_honoured += 1;
                } else {
                    self.report.grant_violations += 1;
                }
            }
        }
    }

    /// Closes the check. `n_tbs` gives the TB count of a message id; `buffered` lists the
    /// ids of messages still queued at their sources.
    pub fn finish(
        mut self,
        n_tbs: impl Fn(u64) -> u32,
        buffered: impl IntoIterator<Item = (UeIndex, u64)>,
        window: u64,
        horizon: Sf,
    ) -> PropertyReport {
        let buffered: HashSet<(UeIndex, u64)> = buffered.into_iter().collect();
        let mut seen: HashSet<(UeIndex, u64)> = self.acked.keys().copied().collect();
        seen.extend(buffered.iter().copied());
        for key in seen {
            self.report.messages += 1;
            let done = self.acked.get(&key).is_some_and(|tbs| tbs.len() as u32 == n_tbs(key.1));
            let queued = buffered.contains(&key);
            match (done, queued) {
                (true, false) => self.report.acked += 1,
                (false, true) => self.report.buffered += 1,
                _ => self.report.terminal_violations += 1,
            }
        }
        let ues: HashSet<UeIndex> = self.tx.iter().map(|r| r.ue).collect();
        self.report.max_duty_cycle = ues
            .into_iter()
            .map(|u| duty_cycle(&self.tx, u, window, horizon))
            .fold(0.0, f64::max);
        self.report
    }
}

impl TraceSink for PropertyMonitor {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.report.records += 1;
        if self.last.insert(rec.ue, rec.sf).is_some_and(|prev| prev >= rec.sf) {
            self.report.half_duplex_violations += 1;
        }
        let tdm_ok = match rec.availability {
            SlAvailability::Free => true,
            SlAvailability::Busy => rec.action == Action::Sleep,
            SlAvailability::SamUWindowOnly => {
                rec.action == Action::Sleep || (rec.action == Action::Sam && rec.kind == Some(MessageKind::SamU))
            }
        };
        if !tdm_ok {
            self.report.tdm_violations += 1;
        }
        if rec.action != Action::Listen && !rec.rx.is_empty() {
            self.report.half_duplex_violations += 1;
        }
        self.check_grant_slot(rec);
        if let (Some((tb, data_sf)), Some(origin), Some(msg)) = (rec.grant, rec.origin, rec.msg) {
            self.report.grants += 1;
            let n_frame = self.harq.frame_len() as u64;
            let off = rec.sf - origin;
            let expected = grant_to_data_sf((off % n_frame) as u32, &self.harq)
                .map(|p| origin + off / n_frame * n_frame + p as u64);
            if expected.ok() != Some(data_sf) {
                self.report.grant_violations += 1;
            }
            self.grants
                .entry(rec.ue)
                .or_default()
                .insert(data_sf, (origin, msg, tb));
        }
        for e in &rec.rx {
            if e.kind == MessageKind::Ack && e.to == Some(rec.ue) {
                if let (Some(msg), Some(tb)) = (e.msg, e.tb) {
                    self.acked.entry((rec.ue, msg)).or_default().insert(tb);
                }
            }
        }
        if rec.action == Action::Tx && rec.kind == Some(MessageKind::Data) {
            if let Some(msg) = rec.msg {
                self.acked.entry((rec.ue, msg)).or_default();
            }
        }
        if matches!(rec.action, Action::Tx | Action::Sam) {
            self.tx.push(TraceRecord {
                rx: Vec::new(),
                ..rec.clone()
            });
        }
        Ok(())
    }
}

/// Runs `scenario` under a [`PropertyMonitor`]. Duty cycle uses one-hour windows.
pub fn check_scenario(scenario: &super::Scenario) -> Result<PropertyReport> {
    let mut sim = super::Simulation::new(scenario.clone())?;
    let mut monitor = PropertyMonitor::new(scenario.harq);
    sim.run_to_end(&mut monitor)?;
    let n_tbs = crate::mac::segment_payload(scenario.payload_bytes, &scenario.harq)?;
    let buffered: Vec<(UeIndex, u64)> = (0..scenario.n_ue)
        .flat_map(|u| sim.node(u).queued().map(move |m| (u, m.id)).collect::<Vec<_>>())
        .collect();
    Ok(monitor.finish(
        |_| n_tbs,
        buffered,
        crate::metrics::DutyCycleMeter::HOUR,
        scenario.horizon,
    ))
}
