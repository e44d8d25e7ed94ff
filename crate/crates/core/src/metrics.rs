//! Energy, latency, occupancy and duty-cycle accounting, and battery-life arithmetic.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cellular::ModeGroup;
use crate::error::{Result, ScubaError};
use crate::mac::{Activity, NodeStats};
use crate::paging::Sf;

/// Radio power draw per activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerProfile {
    /// mW.
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_switch: f64,
    /// SF duration, ms.
    pub t_sf: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self {
            p_tx: 100.0,
            p_rx: 80.0,
            p_switch: 80.0,
            t_sf: 1.0,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("power.p_tx", self.p_tx),
            ("power.p_rx", self.p_rx),
            ("power.p_switch", self.p_switch),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScubaError::config(field, "must be a finite non-negative power"));
            }
        }
        if !(self.t_sf > 0.0 && self.t_sf.is_finite()) {
            return Err(ScubaError::config("power.t_sf", "must be positive"));
        }
        Ok(())
    }
}

/// Activity class charged by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityClass {
    Tx,
    RxListen,
    Switch,
    Sleep,
}

/// Energy in half-SF units per class. Integer counts keep merges exact; a SAM is one
/// half-SF of transmission, every other activity two.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub tx_half_sf: u64,
    pub rx_half_sf: u64,
    pub switch_half_sf: u64,
}

impl EnergyLedger {
    pub fn record(&mut self, class: ActivityClass, half_sfs: u64) {
        match class {
            ActivityClass::Tx => self.tx_half_sf += half_sfs,
            ActivityClass::RxListen => self.rx_half_sf += half_sfs,
            ActivityClass::Switch => self.switch_half_sf += half_sfs,
            ActivityClass::Sleep => {}
        }
    }

    pub fn record_activity(&mut self, activity: &Activity) {
        let (class, units) = classify(activity);
        self.record(class, units);
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        self.tx_half_sf += other.tx_half_sf;
        self.rx_half_sf += other.rx_half_sf;
        self.switch_half_sf += other.switch_half_sf;
    }

    /// Energy per class in mJ: `(tx, rx_listen, switch)`.
    pub fn energy_mj(&self, p: &PowerProfile) -> EnergyBreakdown {
        let half = p.t_sf / 2.0 / 1000.0;
        EnergyBreakdown {
            tx: self.tx_half_sf as f64 * half * p.p_tx,
            rx_listen: self.rx_half_sf as f64 * half * p.p_rx,
            switch: self.switch_half_sf as f64 * half * p.p_switch,
        }
    }
}

/// Class and half-SF count of one SF of activity.
pub fn classify(activity: &Activity) -> (ActivityClass, u64) {
    match activity {
        Activity::Sleep => (ActivityClass::Sleep, 0),
        Activity::Listen => (ActivityClass::RxListen, 2),
        Activity::Switch => (ActivityClass::Switch, 2),
        Activity::Tx { packet } if packet.is_sam() => (ActivityClass::Tx, 1),
        Activity::Tx { .. } => (ActivityClass::Tx, 2),
    }
}

/// Energy of one SF of `class`, mJ. A SAM is charged `n_sam · p_tx · t_sf` by passing
/// `fraction = n_sam`.
pub fn record_sf(class: ActivityClass, fraction: f64, p: &PowerProfile) -> f64 {
    let power = match class {
        ActivityClass::Tx => p.p_tx,
        ActivityClass::RxListen => p.p_rx,
        ActivityClass::Switch => p.p_switch,
        ActivityClass::Sleep => 0.0,
    };
    power * p.t_sf * fraction / 1000.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub tx: f64,
    pub rx_listen: f64,
    pub switch: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.tx + self.rx_listen + self.switch
    }
}

/// SFs spent per mode group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub cona: u64,
    pub cdrx: u64,
    pub idrx: u64,
}

impl Occupancy {
    pub fn record(&mut self, g: ModeGroup) {
        match g {
            ModeGroup::Cona => self.cona += 1,
            ModeGroup::Cdrx => self.cdrx += 1,
            ModeGroup::Idrx => self.idrx += 1,
        }
    }

    pub fn merge(&mut self, o: &Occupancy) {
        self.cona += o.cona;
        self.cdrx += o.cdrx;
        self.idrx += o.idrx;
    }

    pub fn total(&self) -> u64 {
        self.cona + self.cdrx + self.idrx
    }

    pub fn fractions(&self) -> OccupancyFractions {
        let t = self.total().max(1) as f64;
        OccupancyFractions {
            p_cona: self.cona as f64 / t,
            p_cdrx: self.cdrx as f64 / t,
            p_idrx: self.idrx as f64 / t,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OccupancyFractions {
    pub p_cona: f64,
    pub p_cdrx: f64,
    pub p_idrx: f64,
}

/// Nearest-rank percentile of `samples` (need not be sorted), `q` in (0, 100].
pub fn percentile(samples: &[u64], q: f64) -> Result<u64> {
    if samples.is_empty() {
        return Err(ScubaError::NoData);
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(ScubaError::InvalidArgument(format!("percentile {q} outside (0, 100]")));
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    Ok(nearest_rank_sorted(&v, q))
}

fn nearest_rank_sorted(sorted: &[u64], q: f64) -> u64 {
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: u64,
    /// ms.
    pub avg: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

impl LatencySummary {
    /// Summary of latencies in SFs, reported in ms.
    pub fn from_sfs(samples: &[u64], t_sf: f64) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_unstable();
        let sum: u128 = v.iter().map(|&x| x as u128).sum();
        Self {
            count: v.len() as u64,
            avg: sum as f64 / v.len() as f64 * t_sf,
            p50: nearest_rank_sorted(&v, 50.0) as f64 * t_sf,
            p99: nearest_rank_sorted(&v, 99.0) as f64 * t_sf,
            max: *v.last().unwrap() as f64 * t_sf,
        }
    }
}

/// Online maximum of transmit time over a sliding window, in half-SF units.
#[derive(Debug, Clone)]
pub struct DutyCycleMeter {
    window: u64,
    events: VecDeque<(Sf, u64)>,
    in_window: u64,
    max_in_window: u64,
    first_sf: Option<Sf>,
    last_sf: Sf,
}

impl DutyCycleMeter {
    /// One hour of 1 ms SFs.
    pub const HOUR: u64 = 3_600_000;

    pub fn new(window: u64) -> Self {
        Self {
            window: window.max(1),
            events: VecDeque::new(),
            in_window: 0,
            max_in_window: 0,
            first_sf: None,
            last_sf: 0,
        }
    }

    /// Notes `half_sfs` of transmission at `sf`; calls must be non-decreasing in `sf`.
    pub fn record(&mut self, sf: Sf, half_sfs: u64) {
        self.first_sf.get_or_insert(sf);
        self.last_sf = sf;
        if half_sfs == 0 {
            return;
        }
        while let Some(&(t, u)) = self.events.front() {
            if t + self.window <= sf {
                self.events.pop_front();
                self.in_window -= u;
            } else {
                break;
            }
        }
        self.events.push_back((sf, half_sfs));
        self.in_window += half_sfs;
        self.max_in_window = self.max_in_window.max(self.in_window);
    }

    /// Notes an SF without transmission (extends the observed span).
    pub fn tick(&mut self, sf: Sf) {
        self.first_sf.get_or_insert(sf);
        self.last_sf = sf;
    }

    /// Largest transmit fraction of any window. Spans shorter than the window divide by
    /// the span instead.
    pub fn max_fraction(&self) -> f64 {
        let Some(first) = self.first_sf else { return 0.0 };
        let span = (self.last_sf - first + 1).min(self.window);
        self.max_in_window as f64 / 2.0 / span as f64
    }
}

/// Battery life in days: `e_b / (e_scuba_per_day + e_cellular_per_day)`, all in Wh.
pub fn battery_life_days(e_b: f64, e_scuba_per_day: f64, e_cellular_per_day: f64) -> Result<f64> {
    let day = e_scuba_per_day + e_cellular_per_day;
    if !(e_b > 0.0) || !(day > 0.0) || e_scuba_per_day < 0.0 || e_cellular_per_day < 0.0 {
        return Err(ScubaError::InvalidArgument(format!(
            "battery {e_b} Wh over daily energy {day} Wh"
        )));
    }
    Ok(e_b / day)
}

/// Battery-life inputs. The cellular share is calibrated so that the cellular link alone
/// lasts `baseline_days`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryModel {
    /// Wh.
    pub capacity_wh: f64,
    pub baseline_days: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            capacity_wh: 5.0,
            baseline_days: 328.5,
        }
    }
}

impl BatteryModel {
    pub fn cellular_wh_per_day(&self) -> f64 {
        self.capacity_wh / self.baseline_days
    }

    /// Battery life with SCUBA adding `scuba_mw` of average power.
    pub fn days_with_power(&self, scuba_mw: f64) -> Result<f64> {
        battery_life_days(self.capacity_wh, scuba_mw * 24.0 / 1000.0, self.cellular_wh_per_day())
    }
}

/// Accumulates raw measurements; merging is associative, so replicas and UEs can be
/// combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsCollector {
    pub measured_sf: u64,
    pub ue_sfs: u64,
    pub energy: EnergyLedger,
    pub occupancy: Occupancy,
    pub latencies: Vec<u64>,
    pub transmissions: u64,
    pub collided: u64,
    pub data_collided: u64,
    pub sam_collided: u64,
    pub max_duty_cycle: f64,
    pub stats: NodeStats,
    pub messages_created: u64,
    pub messages_pending: u64,
    pub per_ue_energy: Vec<EnergyLedger>,
}

impl MetricsCollector {
    pub fn merge(&mut self, o: &MetricsCollector) {
        self.measured_sf += o.measured_sf;
        self.ue_sfs += o.ue_sfs;
        self.energy.merge(&o.energy);
        self.occupancy.merge(&o.occupancy);
        self.latencies.extend_from_slice(&o.latencies);
        self.transmissions += o.transmissions;
        self.collided += o.collided;
        self.data_collided += o.data_collided;
        self.sam_collided += o.sam_collided;
        self.max_duty_cycle = self.max_duty_cycle.max(o.max_duty_cycle);
        merge_stats(&mut self.stats, &o.stats);
        self.messages_created += o.messages_created;
        self.messages_pending += o.messages_pending;
        if self.per_ue_energy.len() < o.per_ue_energy.len() {
            self.per_ue_energy
                .resize(o.per_ue_energy.len(), EnergyLedger::default());
        }
        for (a, b) in self.per_ue_energy.iter_mut().zip(&o.per_ue_energy) {
            a.merge(b);
        }
    }

    pub fn report(&self, p: &PowerProfile) -> MetricsReport {
        let energy = self.energy.energy_mj(p);
        let ue_seconds = self.ue_sfs as f64 * p.t_sf / 1000.0;
        let per_ue_seconds = if self.per_ue_energy.is_empty() {
            0.0
        } else {
            ue_seconds / self.per_ue_energy.len() as f64
        };
        MetricsReport {
            measured_sf: self.measured_sf,
            avg_power_mw: if ue_seconds > 0.0 {
                energy.total() / ue_seconds
            } else {
                0.0
            },
            per_ue_power_mw: self
                .per_ue_energy
                .iter()
                .map(|e| {
                    if per_ue_seconds > 0.0 {
                        e.energy_mj(p).total() / per_ue_seconds
                    } else {
                        0.0
                    }
                })
                .collect(),
            energy_mj: energy,
            latency_ms: LatencySummary::from_sfs(&self.latencies, p.t_sf),
            occupancy: self.occupancy.fractions(),
            transmissions: self.transmissions,
            collided: self.collided,
            data_collided: self.data_collided,
            sam_collided: self.sam_collided,
            max_duty_cycle: self.max_duty_cycle,
            messages_created: self.messages_created,
            messages_completed: self.stats.completions,
            messages_pending: self.messages_pending,
            stats: self.stats.clone(),
        }
    }
}

fn merge_stats(a: &mut NodeStats, b: &NodeStats) {
    a.attempts += b.attempts;
    a.blocked += b.blocked;
    a.failures += b.failures;
    a.completions += b.completions;
    a.data_tx += b.data_tx;
    a.retx += b.retx;
    a.grant_tx += b.grant_tx;
    a.ack_tx += b.ack_tx;
    a.sam_u_tx += b.sam_u_tx;
    a.sam_d_tx += b.sam_d_tx;
    a.dst_sessions += b.dst_sessions;
    a.duplicates_rx += b.duplicates_rx;
    a.delivered += b.delivered;
    a.sam_d_after_u += b.sam_d_after_u;
    a.sam_u_before_d += b.sam_u_before_d;
}

/// Aggregated results of a run. Field names are the stable output contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub measured_sf: u64,
    /// Mean over UEs.
    pub avg_power_mw: f64,
    pub per_ue_power_mw: Vec<f64>,
    pub energy_mj: EnergyBreakdown,
    pub latency_ms: LatencySummary,
    pub occupancy: OccupancyFractions,
    pub transmissions: u64,
    pub collided: u64,
    pub data_collided: u64,
    pub sam_collided: u64,
    pub max_duty_cycle: f64,
    pub messages_created: u64,
    pub messages_completed: u64,
    pub messages_pending: u64,
    pub stats: NodeStats,
}
