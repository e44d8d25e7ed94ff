//! SF-stepped simulator: cellular machines, SCUBA nodes, the shared medium and metrics.

pub mod checks;
pub mod medium;
pub mod trace;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cellular::{CellularConfig, CellularState, SlAvailability};
use crate::error::{Result, ScubaError};
use crate::mac::{
    Activity, Body, HarqConfig, Node, NodeConfig, Packet, PeerInfo, SamConfig, SamKind, ScubaMode, SfContext, UeIndex,
};
use crate::metrics::{classify, DutyCycleMeter, EnergyLedger, MetricsCollector, MetricsReport, PowerProfile};
use crate::paging::{build_sl_schedule, idrx_po_sfs, PagingConfig, Sf, SlPagingConfig, UeIdentity, BETA_LTE};
use crate::traffic::{substream, StreamPurpose, TrafficGenerator, TrafficModel};

pub use crate::mac::band_select;
pub use checks::{check_scenario, PropertyMonitor, PropertyReport};
pub use medium::{resolve, Outcome};
pub use trace::{duty_cycle, Action, EventLog, NullSink, RxEntry, TraceRecord, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Every message goes to a uniformly chosen other UE.
    #[default]
    RandomPeers,
    /// UE 0 only receives; every other UE reports to it.
    CentralDst,
}

/// Everything a run depends on. Defaults are the common simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    /// SFs simulated.
    pub horizon: Sf,
    /// SFs excluded from power, occupancy and latency statistics.
    pub warmup: Sf,
    pub n_ue: u32,
    pub topology: Topology,
    pub n_bands: u16,
    pub mode: ScubaMode,
    /// Per-UE mode override; empty means every UE uses `mode`.
    pub modes: Vec<ScubaMode>,
    /// Per-UE IMSIs; empty draws them from the seed.
    pub imsis: Vec<u64>,
    pub beta: u32,
    pub payload_bytes: u32,
    pub n_sl_inat: u64,
    pub paging: PagingConfig,
    pub sl_paging: SlPagingConfig,
    pub cellular: CellularConfig,
    pub harq: HarqConfig,
    pub sam: SamConfig,
    pub cellular_traffic: TrafficModel,
    pub sidelink_traffic: TrafficModel,
    pub power: PowerProfile,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon: 600_000,
            warmup: 0,
            n_ue: 2,
            topology: Topology::RandomPeers,
            n_bands: 2,
            mode: ScubaMode::Native,
            modes: Vec::new(),
            imsis: Vec::new(),
            beta: BETA_LTE,
            payload_bytes: 100,
            n_sl_inat: 0,
            paging: PagingConfig::default(),
            sl_paging: SlPagingConfig::default(),
            cellular: CellularConfig::short_data(),
            harq: HarqConfig::default(),
            sam: SamConfig::default(),
            cellular_traffic: TrafficModel::poisson(30_000),
            sidelink_traffic: TrafficModel::poisson(30_000),
            power: PowerProfile::default(),
        }
    }
}

impl Scenario {
    pub fn mode_of(&self, ue: UeIndex) -> ScubaMode {
        self.modes.get(ue as usize).copied().unwrap_or(self.mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ue < 2 {
            return Err(ScubaError::config("n_ue", "at least two UEs are required"));
        }
        if self.n_bands == 0 {
            return Err(ScubaError::config("n_bands", "at least one band is required"));
        }
        if self.horizon == 0 {
            return Err(ScubaError::config("horizon", "must be positive"));
        }
        if self.warmup >= self.horizon {
            return Err(ScubaError::config("warmup", "must be shorter than the horizon"));
        }
        if !self.modes.is_empty() && self.modes.len() != self.n_ue as usize {
            return Err(ScubaError::config(
                "modes",
                format!("{} entries for {} UEs", self.modes.len(), self.n_ue),
            ));
        }
        if !self.imsis.is_empty() && self.imsis.len() != self.n_ue as usize {
            return Err(ScubaError::config(
                "imsis",
                format!("{} entries for {} UEs", self.imsis.len(), self.n_ue),
            ));
        }
        if self.beta == 0 {
            return Err(ScubaError::config("beta", "must be positive"));
        }
        if self.payload_bytes == 0 {
            return Err(ScubaError::config("payload_bytes", "must be positive"));
        }
        self.paging.validate()?;
        self.cellular.validate()?;
        self.harq.validate()?;
        self.power.validate()?;
        self.cellular_traffic.validate("cellular_traffic")?;
        self.sidelink_traffic.validate("sidelink_traffic")?;
        let modes: Vec<ScubaMode> = (0..self.n_ue).map(|u| self.mode_of(u)).collect();
        if modes.iter().any(|m| *m != ScubaMode::Llm) {
            self.sl_paging.validate()?;
            if self.sl_paging.is_llm() {
                return Err(ScubaError::config(
                    "sl_paging.t_sl_drx",
                    "0 selects low-latency mode; set mode = \"llm\" or a positive cycle",
                ));
            }
        }
        if modes.iter().any(|m| m.emits_sam()) {
            self.sam.validate(self.cellular.drx_inat)?;
        }
        let n_sl = crate::mac::segment_payload(self.payload_bytes, &self.harq)?;
        if n_sl > 512 {
            return Err(ScubaError::config(
                "payload_bytes",
                "message exceeds half the sequence space",
            ));
        }
        Ok(())
    }

    pub fn node_config(&self, ue: UeIndex) -> NodeConfig {
        NodeConfig {
            mode: self.mode_of(ue),
            harq: self.harq,
            sam: self.sam,
            n_sl_po: self.sl_paging.n_sl_po,
            n_sl_inat: self.n_sl_inat,
            drx_inat: self.cellular.drx_inat,
            n_bands: self.n_bands,
            rai: self.cellular.rai_enabled,
            ..NodeConfig::default()
        }
    }

    /// Copy with another seed, for independent replicas.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

struct Ue {
    cell: CellularState,
    node: Node,
    cell_gen: TrafficGenerator,
    sl_gen: Option<TrafficGenerator>,
    next_cell: Option<Sf>,
    next_sl: Option<Sf>,
    dst_rng: ChaCha8Rng,
    duty: DutyCycleMeter,
    energy: EnergyLedger,
    sleeping: bool,
}

/// A running scenario. [`run`] drives one to its horizon.
pub struct Simulation {
    scenario: Scenario,
    ues: Vec<Ue>,
    directory: Vec<PeerInfo>,
    sf: Sf,
    collector: MetricsCollector,
    activities: Vec<Activity>,
    txs: Vec<Packet>,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let s = &scenario;
        let mut ues = Vec::with_capacity(s.n_ue as usize);
        let mut directory = Vec::with_capacity(s.n_ue as usize);
        for u in 0..s.n_ue {
            let mut phase_rng = substream(s.seed, u, StreamPurpose::Phase);
            let imsi = match s.imsis.get(u as usize) {
                Some(&i) => i,
                None => phase_rng.random_range(0..1_000_000_000_000_000u64),
            };
            let identity = UeIdentity::new(imsi, s.beta)?;
            let mode = s.mode_of(u);
            let schedule = if mode == ScubaMode::Llm {
                None
            } else {
                Some(Arc::new(build_sl_schedule(&s.sl_paging, &s.paging, &identity)?))
            };
            let idrx_po = idrx_po_sfs(&s.paging, &identity)?.into_iter().collect();
            let cdrx_offset = phase_rng.random_range(0..s.cellular.cdrx_cycle);
            let cell = CellularState::new(s.cellular, idrx_po, cdrx_offset);
            let node = Node::new(
                u,
                s.node_config(u),
                schedule.clone(),
                substream(s.seed, u, StreamPurpose::Mac),
            )?;
            let mut cell_gen =
                TrafficGenerator::new(s.cellular_traffic, substream(s.seed, u, StreamPurpose::Cellular))?;
            let sends = !(s.topology == Topology::CentralDst && u == 0);
            let mut sl_gen = if sends {
                Some(TrafficGenerator::new(
                    s.sidelink_traffic,
                    substream(s.seed, u, StreamPurpose::Sidelink),
                )?)
            } else {
                None
            };
            ues.push(Ue {
                next_cell: cell_gen.next_arrival(0),
                next_sl: sl_gen.as_mut().and_then(|g| g.next_arrival(0)),
                cell,
                node,
                cell_gen,
                sl_gen,
                dst_rng: substream(s.seed, u, StreamPurpose::Destination),
                duty: DutyCycleMeter::new(DutyCycleMeter::HOUR),
                energy: EnergyLedger::default(),
                sleeping: true,
            });
            directory.push(PeerInfo {
                identity,
                mode,
                schedule,
            });
        }
        Ok(Self {
            activities: Vec::with_capacity(ues.len()),
            txs: Vec::new(),
            ues,
            directory,
            sf: 0,
            collector: MetricsCollector::default(),
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn now(&self) -> Sf {
        self.sf
    }

    pub fn directory(&self) -> &[PeerInfo] {
        &self.directory
    }

    pub fn node(&self, ue: UeIndex) -> &Node {
        &self.ues[ue as usize].node
    }

    /// Queues a message outside the traffic model, created at the current SF.
    pub fn inject(&mut self, src: UeIndex, dst: UeIndex, payload_bytes: u32) -> Result<u64> {
        if dst as usize >= self.ues.len() || src as usize >= self.ues.len() {
            return Err(ScubaError::UnknownDestination(dst.max(src)));
        }
        self.collector.messages_created += 1;
        self.ues[src as usize].node.enqueue(dst, payload_bytes, self.sf)
    }

    /// Forces a cellular arrival at the current SF.
    pub fn inject_cellular(&mut self, ue: UeIndex) {
        self.ues[ue as usize].cell.on_cellular_arrival(self.sf);
    }

    fn pick_dst(&mut self, u: usize) -> UeIndex {
        let n = self.ues.len() as u32;
        match self.scenario.topology {
            Topology::CentralDst => 0,
            Topology::RandomPeers if n == 2 => 1 - u as u32,
            Topology::RandomPeers => {
                let r = self.ues[u].dst_rng.random_range(0..n - 1);
                if r >= u as u32 {
                    r + 1
                } else {
                    r
                }
            }
        }
    }

    /// Advances one SF.
    pub fn step(&mut self, sink: &mut dyn TraceSink) -> Result<()> {
        let sf = self.sf;
        let measuring = sf >= self.scenario.warmup;
        let tracing = sink.enabled();
        self.activities.clear();
        self.txs.clear();
        let mut steps = Vec::with_capacity(self.ues.len());

        for u in 0..self.ues.len() {
            if self.ues[u].next_cell == Some(sf) {
                let ue = &mut self.ues[u];
                ue.cell.on_cellular_arrival(sf);
                ue.next_cell = ue.cell_gen.next_arrival(sf);
            }
            if self.ues[u].next_sl == Some(sf) {
                let dst = self.pick_dst(u);
                let payload = self.scenario.payload_bytes;
                let ue = &mut self.ues[u];
                ue.node.enqueue(dst, payload, sf)?;
                ue.next_sl = ue.sl_gen.as_mut().and_then(|g| g.next_arrival(sf));
                self.collector.messages_created += 1;
            }
            let ue = &mut self.ues[u];
            let step = ue.cell.advance(sf)?;
            let activity = ue.node.decide(&SfContext {
                sf,
                step,
                cell: &ue.cell,
                directory: &self.directory,
            });
            check_tdm(sf, u, step.availability, &activity)?;
            if let Activity::Tx { packet } = activity {
                self.txs.push(packet);
            }
            self.activities.push(activity);
            steps.push(step);
        }

        let outcomes = resolve(&self.txs);
        let delivered: Vec<Packet> = self
            .txs
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| **o == Outcome::Delivered)
            .map(|(p, _)| *p)
            .collect();
        if measuring {
            for (p, o) in self.txs.iter().zip(&outcomes) {
                self.collector.transmissions += 1;
                if *o == Outcome::Collided {
                    self.collector.collided += 1;
                    match p.body {
                        Body::Sam { .. } => self.collector.sam_collided += 1,
                        Body::Sl { data: Some(_), .. } => self.collector.data_collided += 1,
                        _ => {}
                    }
                }
            }
        }

        let mut tx_idx = 0;
        for (u, &step) in steps.iter().enumerate() {
            let activity = self.activities[u];
            let ue = &mut self.ues[u];
            let heard: Vec<&Packet> = if activity == Activity::Listen {
                delivered.iter().filter(|p| p.from != u as UeIndex).collect()
            } else {
                Vec::new()
            };
            if !heard.is_empty() {
                ue.node.receive(sf, heard.iter().copied());
            }
            let (_, units) = classify(&activity);
            let is_tx = matches!(activity, Activity::Tx { .. });
            if is_tx {
                ue.duty.record(sf, units);
            } else {
                ue.duty.tick(sf);
            }
            if measuring {
                ue.energy.record_activity(&activity);
                self.collector.occupancy.record(step.mode.group());
                self.collector.ue_sfs += 1;
            }
            for c in ue.node.drain_completions() {
                if c.msg.created_at >= self.scenario.warmup {
                    self.collector.latencies.push(c.completed_at - c.msg.created_at);
                }
            }
            if tracing {
                let asleep = activity.is_sleep();
                if !(asleep && ue.sleeping) {
                    let mut rec = TraceRecord::new(sf, u as UeIndex, step.mode, step.availability, &activity);
                    if is_tx {
                        rec.outcome = Some(outcomes[tx_idx]);
                    }
                    rec.rx = heard.iter().map(|p| RxEntry::from_packet(p)).collect();
                    sink.record(&rec)?;
                }
                ue.sleeping = asleep;
            }
            if is_tx {
                tx_idx += 1;
            }
        }
        if measuring {
            self.collector.measured_sf += 1;
        }
        self.sf += 1;
        Ok(())
    }

    /// Runs to the horizon.
    pub fn run_to_end(&mut self, sink: &mut dyn TraceSink) -> Result<()> {
        while self.sf < self.scenario.horizon {
            self.step(sink)?;
        }
        Ok(())
    }

    /// Raw measurements so far.
    pub fn collect(&self) -> MetricsCollector {
        let mut c = self.collector.clone();
        for ue in &self.ues {
            let s = ue.node.stats();
            let mut one = MetricsCollector {
                stats: s.clone(),
                messages_pending: ue.node.queue_len() as u64,
                max_duty_cycle: ue.duty.max_fraction(),
                ..MetricsCollector::default()
            };
            one.energy = ue.energy;
            c.merge(&one);
            c.per_ue_energy.push(ue.energy);
        }
        c
    }
}

fn check_tdm(sf: Sf, ue: usize, avail: SlAvailability, activity: &Activity) -> Result<()> {
    let ok = match avail {
        SlAvailability::Free => true,
        SlAvailability::Busy => activity.is_sleep(),
        SlAvailability::SamUWindowOnly => matches!(
            activity,
            Activity::Sleep
                | Activity::Tx {
                    packet: Packet {
                        body: Body::Sam { kind: SamKind::U, .. },
                        ..
                    }
                }
        ),
    };
    if ok {
        Ok(())
    } else {
        Err(ScubaError::Invariant(format!(
            "UE {ue} active at SF {sf} while the cellular link holds the radio ({avail:?}): {activity:?}"
        )))
    }
}

/// Raw measurements of one scenario.
pub fn simulate(scenario: &Scenario, sink: &mut dyn TraceSink) -> Result<MetricsCollector> {
    let mut sim = Simulation::new(scenario.clone())?;
    sim.run_to_end(sink)?;
    Ok(sim.collect())
}

/// Runs a scenario to its horizon.
pub fn run(scenario: &Scenario) -> Result<MetricsReport> {
    Ok(simulate(scenario, &mut NullSink)?.report(&scenario.power))
}

/// Runs a scenario with tracing.
pub fn run_traced(scenario: &Scenario, sink: &mut dyn TraceSink) -> Result<MetricsReport> {
    Ok(simulate(scenario, sink)?.report(&scenario.power))
}

/// Seed of replica `r`; replica 0 keeps the scenario seed.
pub fn replica_seed(seed: u64, r: u32) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs `replicas` independent copies in parallel and merges their measurements in
/// replica order.
pub fn run_replicas(scenario: &Scenario, replicas: u32) -> Result<MetricsCollector> {
    if replicas == 0 {
        return Err(ScubaError::InvalidArgument("at least one replica".into()));
    }
    let parts: Vec<Result<MetricsCollector>> = (0..replicas)
        .into_par_iter()
        .map(|r| simulate(&scenario.with_seed(replica_seed(scenario.seed, r)), &mut NullSink))
        .collect();
    let mut total = MetricsCollector::default();
    for p in parts {
        let p = p?;
        total.merge(&p);
    }
    Ok(total)
}
