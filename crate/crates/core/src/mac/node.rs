//! Per-UE SCUBA protocol machine: SL-PO listening, SL connected mode at both ends,
//! SAM discovery and emission, and LLM listening.
//!
//! The engine calls [`Node::decide`] once per SF, resolves the medium, and hands the
//! packets heard by listening UEs to [`Node::receive`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::harq::{frame_slot, grant_to_data_sf, FrameSlot, HarqConfig, HarqScheme};
use super::sam::{SamConfig, SamEmitter, SamKind};
use super::{Activity, Body, GrantHeader, Packet, PeerInfo, ScubaMode, SeqWindow, SlMessage, TbHeader, UeIndex};
use crate::cellular::{CellStep, CellularState, ModeGroup, SlAvailability};
use crate::error::{Result, ScubaError};
use crate::paging::{next_sl_po, PoSchedule, Sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub mode: ScubaMode,
    pub harq: HarqConfig,
    pub sam: SamConfig,
    pub n_sl_po: u32,
    pub n_sl_inat: u64,
    /// Cellular DRX-INAT, the sleep after hearing a SAM-U.
    pub drx_inat: u64,
    pub n_bands: u16,
    pub rai: bool,
    /// Consecutive failed fixed-PO attempts after which the next PO is skipped with probability 1/2.
    pub skip_after_failures: u32,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            mode: ScubaMode::Native,
            harq: HarqConfig::default(),
            sam: SamConfig::default(),
            n_sl_po: 4,
            n_sl_inat: 0,
            drx_inat: 100,
            n_bands: 2,
            rai: false,
            skip_after_failures: 2,
        }
    }
}

/// A message whose every transport block was acknowledged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub msg: SlMessage,
    /// SF of the final ACK.
    pub completed_at: Sf,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub attempts: u64,
    pub blocked: u64,
    pub failures: u64,
    pub completions: u64,
    pub data_tx: u64,
    pub retx: u64,
    pub grant_tx: u64,
    pub ack_tx: u64,
    pub sam_u_tx: u64,
    pub sam_d_tx: u64,
    pub dst_sessions: u64,
    pub duplicates_rx: u64,
    pub delivered: u64,
    /// Discoveries that heard at least one SAM-U and then a SAM-D.
    pub sam_d_after_u: u64,
    /// SAM-Us heard across those discoveries.
    pub sam_u_before_d: u64,
}

impl NodeStats {
    /// Mean SAM-Us a source heard before the SAM-D that let it transmit.
    pub fn mean_sam_u_before_d(&self) -> Option<f64> {
        (self.sam_d_after_u > 0).then(|| self.sam_u_before_d as f64 / self.sam_d_after_u as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Via {
    FixedPo,
    DynamicPo,
    Immediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    /// Attempt at the DST's fixed SL-PO, retry at the next one.
    Fixed,
    /// Listen for SAMs first.
    Discovery,
    /// LLM at both ends: attempt at once unless the DST recently reported ConA.
    Passive,
    /// DST in LLM, SRC without SAM support: attempt at once.
    Immediate,
}

/// Coarse SRC phase for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrcPhaseKind {
    Idle,
    AwaitFree,
    Discovery,
    DiscoverySleep,
    Ready,
    Backoff,
    Scheduled,
    Session,
}

#[derive(Debug)]
enum SrcPhase {
    Idle,
    AwaitFree,
    Discovery { start: Sf, until: Sf },
    DiscoverySleep { until: Sf },
    Ready,
    Backoff { until: Sf },
    Scheduled { at: Sf, via: Via },
    Session(Box<SrcSession>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Idle,
    Tx,
    Rx,
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Want {
    Nothing,
    Listen,
    Switch,
    Tx(Body),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    None,
    Dst,
    SrcSession,
    Sam(SamKind),
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SrcWant {
    Nothing,
    Listen,
    PreStart,
    Session(Want),
}

#[derive(Debug, Default, Clone, Copy)]
struct PeerSam {
    last_u: Option<Sf>,
    last_d: Option<(Sf, Sf)>,
}

#[derive(Debug, Clone, Copy)]
struct PlannedTx {
    data: Option<u16>,
    grant: Option<(u16, Sf)>,
}

enum SessionStep {
    Want(Want),
    Fail,
}

#[derive(Debug)]
struct SrcSession {
    msg: SlMessage,
    seq_base: u16,
    origin: Sf,
    band: u16,
    via: Via,
    acked: Vec<bool>,
    n_acked: u32,
    tx_count: Vec<u32>,
    frame_plan: Vec<u16>,
    /// Grant-based: data SF -> TB.
    grants: BTreeMap<Sf, u16>,
    assigned: Vec<bool>,
    /// ACK SF -> TB.
    expected: BTreeMap<Sf, u16>,
    got_this_frame: u32,
    frames: u32,
    max_frames: u32,
    planned: Option<PlannedTx>,
    more: bool,
}

impl SrcSession {
    fn new(msg: SlMessage, seq_base: u16, origin: Sf, band: u16, via: Via, h: u32) -> Self {
        let n = msg.n_sl as usize;
        Self {
            max_frames: 2 * (msg.n_sl.div_ceil(h)) + 4,
            msg,
            seq_base,
            origin,
            band,
            via,
            acked: vec![false; n],
            n_acked: 0,
            tx_count: vec![0; n],
            frame_plan: Vec::new(),
            grants: BTreeMap::new(),
            assigned: vec![false; n],
            expected: BTreeMap::new(),
            got_this_frame: 0,
            frames: 0,
            planned: None,
            more: false,
        }
    }

    fn seq(&self, tb: u16) -> u16 {
        (self.seq_base + tb) % SeqWindow::MODULUS
    }

    fn unit(&self, data: Option<u16>, grant: Option<(u16, Sf)>) -> Body {
        Body::Sl {
            to: self.msg.dst,
            msg: self.msg.id,
            n_tbs: self.msg.n_sl as u16,
            origin: self.origin,
            data: data.map(|tb| TbHeader {
                tb,
                seq: self.seq(tb),
                retx: self.tx_count[tb as usize] > 0,
            }),
            grant: grant.map(|(tb, data_sf)| GrantHeader {
                tb,
                data_sf,
                retx: self.tx_count[tb as usize] > 0,
            }),
            more: self.more,
        }
    }

    fn intent(&mut self, sf: Sf, harq: &HarqConfig) -> SessionStep {
        let h = harq.n_harq;
        let n_frame = harq.frame_len() as u64;
        let off = sf - self.origin;
        let pos = (off % n_frame) as u32;
        let frame = off / n_frame;
        // ACK slots that passed unanswered.
        while let Some((&at, &tb)) = self.expected.first_key_value() {
            if at >= sf {
                break;
            }
            self.expected.remove(&at);
            if !self.acked[tb as usize] {
                self.assigned[tb as usize] = false;
            }
        }
        self.planned = None;
        match frame_slot(pos, h) {
            FrameSlot::Tx(j) => {
                if j == 0 {
                    self.got_this_frame = 0;
                    self.frames += 1;
                    if harq.scheme == HarqScheme::FixedMcs {
                        self.frame_plan = (0..self.msg.n_sl as u16)
                            .filter(|&tb| !self.acked[tb as usize])
                            .take(h as usize)
                            .collect();
                    }
                }
                let planned = match harq.scheme {
                    HarqScheme::FixedMcs => PlannedTx {
                        data: self.frame_plan.get(j as usize).copied(),
                        grant: None,
                    },
                    HarqScheme::GrantBased => {
                        let data = self.grants.get(&sf).copied();
                        let target =
                            self.origin + frame * n_frame + grant_to_data_sf(j, harq).expect("TX position") as u64;
                        let next = (0..self.msg.n_sl as u16)
                            .find(|&tb| !self.acked[tb as usize] && !self.assigned[tb as usize]);
                        let grant = match next {
                            Some(tb) if !self.grants.contains_key(&target) => Some((tb, target)),
                            _ => None,
                        };
                        PlannedTx { data, grant }
                    }
                };
                if planned.data.is_none() && planned.grant.is_none() {
                    return SessionStep::Want(Want::Nothing);
                }
                self.planned = Some(planned);
                SessionStep::Want(Want::Tx(self.unit(planned.data, planned.grant)))
            }
            FrameSlot::SwitchToRx => {
                if self.expected.range(sf..=sf + h as u64).next().is_some() {
                    SessionStep::Want(Want::Switch)
                } else {
                    SessionStep::Want(Want::Nothing)
                }
            }
            FrameSlot::Rx(_) => {
                if self.expected.contains_key(&sf) {
                    SessionStep::Want(Want::Listen)
                } else {
                    SessionStep::Want(Want::Nothing)
                }
            }
            FrameSlot::SwitchToTx => {
                // A session continuing a finished message has not opened a frame yet.
                if self.frames == 0 {
                    SessionStep::Want(Want::Switch)
                } else if self.got_this_frame == 0 || self.frames >= self.max_frames {
                    SessionStep::Fail
                } else {
                    SessionStep::Want(Want::Switch)
                }
            }
        }
    }

    /// Records whether the planned transmission of this SF went out.
    fn commit(&mut self, sf: Sf, sent: bool, h: u32, stats: &mut NodeStats) {
        let Some(p) = self.planned.take() else { return };
        if let Some(tb) = p.data {
            self.grants.remove(&sf);
            if sent {
                if self.tx_count[tb as usize] > 0 {
                    stats.retx += 1;
                }
                self.tx_count[tb as usize] += 1;
                stats.data_tx += 1;
                self.expected.insert(sf + h as u64 + 1, tb);
            } else {
                self.assigned[tb as usize] = false;
            }
        }
        if let Some((tb, data_sf)) = p.grant {
            if sent {
                stats.grant_tx += 1;
                self.grants.insert(data_sf, tb);
                self.assigned[tb as usize] = true;
            }
        }
    }

    /// Returns `true` when the ACK completes the message.
    fn on_ack(&mut self, sf: Sf, msg: u64, tb: u16) -> bool {
        if msg != self.msg.id || self.expected.get(&sf) != Some(&tb) {
            return false;
        }
        self.expected.remove(&sf);
        self.got_this_frame += 1;
        if !self.acked[tb as usize] {
            self.acked[tb as usize] = true;
            self.n_acked += 1;
        }
        self.n_acked == self.msg.n_sl
    }
}

#[derive(Debug)]
struct DstSession {
    src: UeIndex,
    msg: u64,
    origin: Sf,
    band: u16,
    detected_frame: u64,
    /// ACK SF -> (TB, seq).
    acks: BTreeMap<Sf, (u16, u16)>,
    expect_data: BTreeSet<Sf>,
    rx_this_frame: u32,
    /// TBs still missing when the current frame opened.
    frame_remaining: u32,
    /// The source announced a further message.
    more: bool,
    /// TBs of `msg` received in this session. A retry resends whatever the source has
    /// not seen acknowledged, which may include TBs delivered earlier.
    seen: Vec<bool>,
}

enum DstStep {
    Want(Want),
    End,
}

impl DstSession {
    fn switch_msg(&mut self, msg: u64, n_tbs: u16) {
        self.msg = msg;
        self.seen = vec![false; n_tbs as usize];
    }

    fn remaining(&self) -> u32 {
        self.seen.iter().filter(|r| !**r).count() as u32
    }

    fn intent(&mut self, sf: Sf, harq: &HarqConfig) -> DstStep {
        let remaining = self.remaining();
        let h = harq.n_harq;
        let n_frame = harq.frame_len() as u64;
        let off = sf - self.origin;
        let pos = (off % n_frame) as u32;
        let frame = off / n_frame;
        while self.expect_data.first().is_some_and(|&d| d < sf) {
            self.expect_data.pop_first();
        }
        match frame_slot(pos, h) {
            FrameSlot::Tx(j) => {
                if frame > self.detected_frame && j == 0 {
                    self.rx_this_frame = 0;
                    self.frame_remaining = if remaining == 0 && self.more { h } else { remaining };
                }
                let listen = match harq.scheme {
                    HarqScheme::GrantBased => true,
                    HarqScheme::FixedMcs => frame == self.detected_frame || j < self.frame_remaining.min(h),
                };
                DstStep::Want(if listen { Want::Listen } else { Want::Nothing })
            }
            FrameSlot::SwitchToRx => {
                if self.acks.range(sf..=sf + h as u64).next().is_some() {
                    DstStep::Want(Want::Switch)
                } else {
                    DstStep::Want(Want::Nothing)
                }
            }
            FrameSlot::Rx(_) => match self.acks.remove(&sf) {
                Some((tb, seq)) => DstStep::Want(Want::Tx(Body::Ack {
                    to: self.src,
                    msg: self.msg,
                    tb,
                    seq,
                })),
                None => DstStep::Want(Want::Nothing),
            },
            FrameSlot::SwitchToTx => {
                if self.rx_this_frame == 0 || (remaining == 0 && self.expect_data.is_empty() && !self.more) {
                    DstStep::End
                } else {
                    DstStep::Want(Want::Switch)
                }
            }
        }
    }
}

/// SCUBA state of one UE.
pub struct Node {
    index: UeIndex,
    cfg: NodeConfig,
    own_schedule: Option<Arc<PoSchedule>>,
    emitter: Option<SamEmitter>,
    rng: ChaCha8Rng,
    queue: VecDeque<(SlMessage, u16)>,
    phase: SrcPhase,
    flow: Flow,
    attempts_for_head: u32,
    /// SAM-Us heard while discovering the head message's destination.
    discovery_sam_u: u64,
    consecutive_failures: u32,
    seq_next: HashMap<UeIndex, u16>,
    next_msg_id: u64,
    dst: Option<Box<DstSession>>,
    partial: HashMap<(UeIndex, u64), Vec<bool>>,
    recently_done: VecDeque<(UeIndex, u64)>,
    dedup: HashMap<UeIndex, SeqWindow>,
    dyn_po: Option<(Sf, Sf)>,
    sl_inat_until: Sf,
    heard: HashMap<UeIndex, PeerSam>,
    prev: Dir,
    prev_sf: Option<Sf>,
    source: Source,
    stats: NodeStats,
    outbox: Vec<Completion>,
}

impl Node {
    pub fn new(
        index: UeIndex,
        cfg: NodeConfig,
        own_schedule: Option<Arc<PoSchedule>>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if cfg.mode != ScubaMode::Llm && own_schedule.as_ref().is_none_or(|s| s.is_empty()) {
            return Err(ScubaError::config(
                "sl_paging.t_sl_drx",
                format!("UE {index} in {:?} mode needs a fixed SL-PO schedule", cfg.mode),
            ));
        }
        if cfg.n_bands == 0 {
            return Err(ScubaError::config("n_bands", "must be positive"));
        }
        Ok(Self {
            index,
            emitter: cfg.mode.emits_sam().then(|| SamEmitter::new(cfg.sam, cfg.rai)),
            cfg,
            own_schedule,
            rng,
            queue: VecDeque::new(),
            phase: SrcPhase::Idle,
            flow: Flow::Fixed,
            attempts_for_head: 0,
            discovery_sam_u: 0,
            consecutive_failures: 0,
            seq_next: HashMap::new(),
            next_msg_id: 0,
            dst: None,
            partial: HashMap::new(),
            recently_done: VecDeque::new(),
            dedup: HashMap::new(),
            dyn_po: None,
            sl_inat_until: 0,
            heard: HashMap::new(),
            prev: Dir::Idle,
            prev_sf: None,
            source: Source::None,
            stats: NodeStats::default(),
            outbox: Vec::new(),
        })
    }

    pub fn index(&self) -> UeIndex {
        self.index
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Messages still queued (head first).
    pub fn queued(&self) -> impl Iterator<Item = &SlMessage> {
        self.queue.iter().map(|(m, _)| m)
    }

    pub fn drain_completions(&mut self) -> std::vec::Drain<'_, Completion> {
        self.outbox.drain(..)
    }

    pub fn phase_kind(&self) -> SrcPhaseKind {
        match self.phase {
            SrcPhase::Idle => SrcPhaseKind::Idle,
            SrcPhase::AwaitFree => SrcPhaseKind::AwaitFree,
            SrcPhase::Discovery { .. } => SrcPhaseKind::Discovery,
            SrcPhase::DiscoverySleep { .. } => SrcPhaseKind::DiscoverySleep,
            SrcPhase::Ready => SrcPhaseKind::Ready,
            SrcPhase::Backoff { .. } => SrcPhaseKind::Backoff,
            SrcPhase::Scheduled { .. } => SrcPhaseKind::Scheduled,
            SrcPhase::Session(_) => SrcPhaseKind::Session,
        }
    }

    pub fn in_dst_session(&self) -> bool {
        self.dst.is_some()
    }

    /// Queues a message of `payload_bytes` for `dst`, created at `now`.
    pub fn enqueue(&mut self, dst: UeIndex, payload_bytes: u32, now: Sf) -> Result<u64> {
        if dst == self.index {
            return Err(ScubaError::UnknownDestination(dst));
        }
        let n_sl = super::harq::segment_payload(payload_bytes, &self.cfg.harq)?;
        if n_sl > 512 {
            return Err(ScubaError::InvalidArgument(format!(
                "{payload_bytes}-byte payload needs {n_sl} TBs, more than half the sequence space"
            )));
        }
        let id = ((self.index as u64) << 40) | self.next_msg_id;
        self.next_msg_id += 1;
        let seq = self.seq_next.entry(dst).or_insert(0);
        let base = *seq;
        *seq = (base + n_sl as u16) % SeqWindow::MODULUS;
        self.queue.push_back((
            SlMessage {
                id,
                src: self.index,
                dst,
                payload_bytes,
                n_sl,
                created_at: now,
                kind: super::MessageKind::Data,
            },
            base,
        ));
        Ok(id)
    }

    fn n_frame(&self) -> u64 {
        self.cfg.harq.frame_len() as u64
    }

    fn flow_for(&self, dst: &PeerInfo) -> Flow {
        match (self.cfg.mode, dst.mode) {
            (_, ScubaMode::Native) | (ScubaMode::Native, ScubaMode::Sam) => Flow::Fixed,
            (_, ScubaMode::Sam) => Flow::Discovery,
            (ScubaMode::Llm, ScubaMode::Llm) => Flow::Passive,
            (ScubaMode::Sam, ScubaMode::Llm) => Flow::Discovery,
            (ScubaMode::Native, ScubaMode::Llm) => Flow::Immediate,
        }
    }

    fn discovery_phase(&self, sf: Sf, step: &CellStep) -> SrcPhase {
        if step.mode.group() == ModeGroup::Cona {
            SrcPhase::AwaitFree
        } else {
            SrcPhase::Discovery {
                start: sf,
                until: sf + self.cfg.sam.n_sam,
            }
        }
    }

    fn fixed_or_ready(&self, after: Sf, dst: &PeerInfo) -> SrcPhase {
        match &dst.schedule {
            Some(s) => SrcPhase::Scheduled {
                at: next_sl_po(s, after),
                via: Via::FixedPo,
            },
            None => SrcPhase::Ready,
        }
    }

    fn fresh_sam_u(&self, dst: UeIndex, sf: Sf) -> bool {
        let Some(p) = self.heard.get(&dst) else { return false };
        match p.last_u {
            Some(u) if sf < u + self.cfg.sam.n_sam => p.last_d.is_none_or(|(d, _)| d < u),
            _ => false,
        }
    }

    fn head_dst<'a>(&self, directory: &'a [PeerInfo]) -> Option<&'a PeerInfo> {
        self.queue.front().map(|(m, _)| &directory[m.dst as usize])
    }

    fn src_intent(&mut self, ctx: &SfContext<'_>, reserved: bool) -> SrcWant {
        let sf = ctx.sf;
        for _ in 0..16 {
            match &mut self.phase {
                SrcPhase::Idle => {
                    let Some(dst) = self.head_dst(ctx.directory) else {
                        return SrcWant::Nothing;
                    };
                    self.flow = self.flow_for(dst);
                    self.attempts_for_head = 0;
                    self.discovery_sam_u = 0;
                    self.phase = match self.flow {
                        Flow::Fixed => self.fixed_or_ready(sf, dst),
                        Flow::Discovery => self.discovery_phase(sf, &ctx.step),
                        Flow::Passive | Flow::Immediate => SrcPhase::Ready,
                    };
                }
                SrcPhase::AwaitFree => {
                    if ctx.step.mode.group() == ModeGroup::Cona {
                        return SrcWant::Nothing;
                    }
                    self.phase = self.discovery_phase(sf, &ctx.step);
                }
                SrcPhase::Discovery { start, until } => {
                    let (start, until) = (*start, *until);
                    let dst = self.head_dst(ctx.directory).expect("queued message");
                    let heard = self.heard.get(&self.queue[0].0.dst).copied().unwrap_or_default();
                    if let Some((_, po)) = heard.last_d.filter(|&(at, _)| at >= start) {
                        if self.discovery_sam_u > 0 {
                            self.stats.sam_d_after_u += 1;
                            self.stats.sam_u_before_d += std::mem::take(&mut self.discovery_sam_u);
                        }
                        self.phase = if po > sf {
                            SrcPhase::Scheduled {
                                at: po,
                                via: Via::DynamicPo,
                            }
                        } else {
                            self.discovery_phase(sf, &ctx.step)
                        };
                        if po <= sf {
                            return SrcWant::Listen;
                        }
                        continue;
                    }
                    if let Some(at) = heard.last_u.filter(|&at| at >= start) {
                        self.discovery_sam_u += 1;
                        self.phase = SrcPhase::DiscoverySleep {
                            until: at + self.cfg.drx_inat,
                        };
                        continue;
                    }
                    if sf >= until {
                        self.phase = self.fixed_or_ready(sf, dst);
                        continue;
                    }
                    return SrcWant::Listen;
                }
                SrcPhase::DiscoverySleep { until } => {
                    if sf < *until {
                        return SrcWant::Nothing;
                    }
                    self.phase = self.discovery_phase(sf, &ctx.step);
                }
                SrcPhase::Ready => {
                    let dst = self.queue[0].0.dst;
                    if self.flow == Flow::Passive && self.fresh_sam_u(dst, sf) {
                        return SrcWant::Nothing;
                    }
                    if ctx.step.availability != SlAvailability::Free || reserved {
                        return SrcWant::Nothing;
                    }
                    self.phase = SrcPhase::Scheduled {
                        at: sf + 1,
                        via: Via::Immediate,
                    };
                    return SrcWant::PreStart;
                }
                SrcPhase::Backoff { until } => {
                    if sf < *until {
                        return SrcWant::Nothing;
                    }
                    self.phase = SrcPhase::Ready;
                }
                SrcPhase::Scheduled { at, via } => {
                    let (at, via) = (*at, *via);
                    if sf + 1 == at {
                        return SrcWant::PreStart;
                    }
                    if sf < at {
                        return SrcWant::Nothing;
                    }
                    if sf == at && ctx.step.availability == SlAvailability::Free && !reserved {
                        let (msg, seq_base) = self.queue[0].clone();
                        let band = super::band_select(&mut self.rng, self.cfg.n_bands);
                        self.stats.attempts += 1;
                        self.attempts_for_head += 1;
                        self.phase = SrcPhase::Session(Box::new(SrcSession::new(
                            msg,
                            seq_base,
                            sf,
                            band,
                            via,
                            self.cfg.harq.n_harq,
                        )));
                        continue;
                    }
                    self.stats.blocked += 1;
                    let dst = self.head_dst(ctx.directory).expect("queued message");
                    self.phase = match via {
                        Via::FixedPo => self.fixed_or_ready(at, dst),
                        Via::DynamicPo => self.discovery_phase(sf, &ctx.step),
                        Via::Immediate => SrcPhase::Ready,
                    };
                }
                SrcPhase::Session(s) => {
                    s.more = self.queue.get(1).is_some_and(|(m, _)| m.dst == s.msg.dst);
                    let step = s.intent(sf, &self.cfg.harq);
                    match step {
                        SessionStep::Want(w) => return SrcWant::Session(w),
                        SessionStep::Fail => {
                            let via = s.via;
                            self.on_failure(sf, via, ctx);
                        }
                    }
                }
            }
        }
        SrcWant::Nothing
    }

    fn on_failure(&mut self, sf: Sf, via: Via, ctx: &SfContext<'_>) {
        self.stats.failures += 1;
        self.consecutive_failures += 1;
        let dst = self.head_dst(ctx.directory).expect("queued message");
        self.phase = match (via, self.flow) {
            (Via::FixedPo, Flow::Fixed) => {
                let sched = dst.schedule.as_ref().expect("fixed flow has a schedule");
                let mut at = next_sl_po(sched, sf);
                if self.consecutive_failures >= self.cfg.skip_after_failures && self.rng.random_bool(0.5) {
                    at = next_sl_po(sched, at);
                }
                SrcPhase::Scheduled { at, via: Via::FixedPo }
            }
            (Via::Immediate, _) => SrcPhase::Backoff {
                until: sf + self.rng.random_range(1..=self.n_frame()),
            },
            _ => self.discovery_phase(sf, &ctx.step),
        };
    }

    fn on_success(&mut self, sf: Sf) {
        let (msg, _) = self.queue.pop_front().expect("session message");
        let dst = msg.dst;
        self.stats.completions += 1;
        self.consecutive_failures = 0;
        self.outbox.push(Completion {
            msg,
            completed_at: sf,
            attempts: self.attempts_for_head,
        });
        self.sl_inat_until = sf + 1 + self.cfg.n_sl_inat;
        let prev = std::mem::replace(&mut self.phase, SrcPhase::Idle);
        // The connected mode lasts until the buffer for this destination is empty.
        if let (SrcPhase::Session(s), Some((next, seq_base))) = (prev, self.queue.front()) {
            if next.dst == dst && s.more {
                self.stats.attempts += 1;
                self.attempts_for_head = 1;
                self.phase = SrcPhase::Session(Box::new(SrcSession::new(
                    next.clone(),
                    *seq_base,
                    s.origin,
                    s.band,
                    s.via,
                    self.cfg.harq.n_harq,
                )));
            }
        }
    }

    fn own_po_listen(&self, sf: Sf) -> bool {
        self.cfg.mode != ScubaMode::Llm && self.own_schedule.as_ref().is_some_and(|s| s.is_listen_sf(sf))
            || self.dyn_po.is_some_and(|(a, b)| sf >= a && sf < b)
    }

    /// Chooses the SCUBA activity for `ctx.sf`.
    pub fn decide(&mut self, ctx: &SfContext<'_>) -> Activity {
        let sf = ctx.sf;
        let mode = ctx.step.mode;
        let avail = ctx.step.availability;
        if let Some(em) = &mut self.emitter {
            em.observe(sf, mode);
        }
        let prev = if self.prev_sf.is_some_and(|p| p + 1 == sf) {
            self.prev
        } else {
            Dir::Idle
        };

        let mut want = Want::Nothing;
        let mut source = Source::None;
        if let Some(d) = self.dst.as_mut() {
            match d.intent(sf, &self.cfg.harq) {
                DstStep::Want(w) => {
                    want = w;
                    source = Source::Dst;
                }
                DstStep::End => {
                    self.dst = None;
                    self.sl_inat_until = sf + self.cfg.n_sl_inat;
                }
            }
        }
        let reserved = self.dst.is_some();
        let src_want = self.src_intent(ctx, reserved);
        if source == Source::None {
            match src_want {
                SrcWant::Session(w) => {
                    want = w;
                    source = Source::SrcSession;
                }
                SrcWant::PreStart => {
                    source = Source::Background;
                    want = if prev == Dir::Rx { Want::Switch } else { Want::Nothing };
                }
                SrcWant::Listen | SrcWant::Nothing => {
                    let sam = self.emitter.as_ref().and_then(|e| e.due(sf, mode, avail));
                    let po_listen = self.own_po_listen(sf);
                    let listen = avail == SlAvailability::Free
                        && (po_listen
                            || self.cfg.mode == ScubaMode::Llm
                            || sf < self.sl_inat_until
                            || src_want == SrcWant::Listen);
                    match sam {
                        Some(SamKind::U) => {
                            want = Want::Tx(Body::Sam {
                                kind: SamKind::U,
                                po: None,
                            });
                            source = Source::Sam(SamKind::U);
                        }
                        Some(SamKind::D) if !po_listen => {
                            // Room for two HARQ frames, enough for a typical report.
                            let po = ctx
                                .cell
                                .predicted_free_run_from(sf + 2, 2 * self.n_frame(), 4 * ctx.cell.config().cdrx_cycle)
                                .unwrap_or(sf + 2);
                            want = Want::Tx(Body::Sam {
                                kind: SamKind::D,
                                po: Some(po),
                            });
                            source = Source::Sam(SamKind::D);
                        }
                        _ if listen => {
                            want = Want::Listen;
                            source = Source::Background;
                        }
                        _ => {}
                    }
                }
            }
        }

        // TDM gating by the cellular verdict.
        let allowed = match avail {
            SlAvailability::Free => true,
            SlAvailability::SamUWindowOnly => source == Source::Sam(SamKind::U),
            SlAvailability::Busy => false,
        };
        if !allowed {
            want = Want::Nothing;
        }
        // Half-duplex: a direction change needs a switch SF.
        let wanted_tx = matches!(want, Want::Tx(_));
        want = match want {
            Want::Tx(_) if prev == Dir::Rx => Want::Switch,
            Want::Listen if prev == Dir::Tx => Want::Switch,
            w => w,
        };
        // Switch SFs are radio activity and need a free SF of their own.
        if want == Want::Switch && avail != SlAvailability::Free {
            want = Want::Nothing;
        }

        let activity = match want {
            Want::Nothing => Activity::Sleep,
            Want::Listen => Activity::Listen,
            Want::Switch => Activity::Switch,
            Want::Tx(body) => {
                let band = match (source, &body) {
                    (Source::SrcSession, _) => match &self.phase {
                        SrcPhase::Session(s) => s.band,
                        _ => 0,
                    },
                    (Source::Dst, _) => self.dst.as_ref().map_or(0, |d| d.band),
                    _ => super::band_select(&mut self.rng, self.cfg.n_bands),
                };
                Activity::Tx {
                    packet: Packet {
                        from: self.index,
                        band,
                        body,
                    },
                }
            }
        };

        let sent = matches!(activity, Activity::Tx { .. });
        if source == Source::SrcSession || wanted_tx {
            if let SrcPhase::Session(s) = &mut self.phase {
                s.commit(
                    sf,
                    sent && source == Source::SrcSession,
                    self.cfg.harq.n_harq,
                    &mut self.stats,
                );
            }
        }
        if sent {
            match source {
                Source::Dst => self.stats.ack_tx += 1,
                Source::Sam(kind) => {
                    if let Some(em) = &mut self.emitter {
                        em.commit(sf, kind);
                    }
                    match kind {
                        SamKind::U => self.stats.sam_u_tx += 1,
                        SamKind::D => {
                            self.stats.sam_d_tx += 1;
                            if let Activity::Tx {
                                packet:
                                    Packet {
                                        body: Body::Sam { po: Some(po), .. },
                                        ..
                                    },
                            } = activity
                            {
                                self.dyn_po = Some((po, po + self.cfg.n_sl_po as u64));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        self.source = source;
        self.prev = match activity {
            Activity::Sleep => Dir::Idle,
            Activity::Listen => Dir::Rx,
            Activity::Switch => Dir::Switch,
            Activity::Tx { .. } => Dir::Tx,
        };
        self.prev_sf = Some(sf);
        activity
    }

    /// Delivers the packets heard at `sf`. Only call after a `Listen` decision.
    pub fn receive<'p>(&mut self, sf: Sf, packets: impl IntoIterator<Item = &'p Packet>) {
        for p in packets {
            if p.from == self.index {
                continue;
            }
            match p.body {
                Body::Sam { kind, po } => {
                    let e = self.heard.entry(p.from).or_default();
                    match kind {
                        SamKind::U => e.last_u = Some(sf),
                        SamKind::D => e.last_d = Some((sf, po.unwrap_or(sf + 2))),
                    }
                }
                Body::Sl {
                    to,
                    msg,
                    n_tbs,
                    origin,
                    data,
                    grant,
                    more,
                } if to == self.index => {
                    let in_src_session = matches!(self.phase, SrcPhase::Session(_));
                    let same_src = self.dst.as_ref().is_some_and(|d| d.src == p.from);
                    let matches_session = same_src && self.dst.as_ref().is_some_and(|d| d.msg == msg);
                    if same_src && !matches_session {
                        // The source moved on to its next message within the session.
                        self.dst.as_mut().expect("session").switch_msg(msg, n_tbs);
                        let key = (p.from, msg);
                        if !self.partial.contains_key(&key) && !self.recently_done.contains(&key) {
                            self.partial.insert(key, vec![false; n_tbs as usize]);
                        }
                    } else if !matches_session {
                        if self.dst.is_some() || in_src_session {
                            continue;
                        }
                        let frame = (sf - origin) / self.n_frame();
                        self.dst = Some(Box::new(DstSession {
                            src: p.from,
                            msg,
                            origin,
                            band: p.band,
                            detected_frame: frame,
                            acks: BTreeMap::new(),
                            expect_data: BTreeSet::new(),
                            rx_this_frame: 0,
                            frame_remaining: n_tbs as u32,
                            more: false,
                            seen: vec![false; n_tbs as usize],
                        }));
                        self.stats.dst_sessions += 1;
                        let key = (p.from, msg);
                        if !self.partial.contains_key(&key) && !self.recently_done.contains(&key) {
                            self.partial.insert(key, vec![false; n_tbs as usize]);
                        }
                    }
                    self.dst.as_mut().expect("session").more = more;
                    self.on_unit(sf, p.from, msg, data, grant);
                }
                Body::Ack { to, msg, tb, .. } if to == self.index => {
                    if let SrcPhase::Session(s) = &mut self.phase {
                        if s.on_ack(sf, msg, tb) {
                            self.on_success(sf);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn on_unit(&mut self, sf: Sf, src: UeIndex, msg: u64, data: Option<TbHeader>, grant: Option<GrantHeader>) {
        let h = self.cfg.harq.n_harq as u64;
        let d = self.dst.as_mut().expect("active DST session");
        d.rx_this_frame += 1;
        if let Some(g) = grant {
            d.expect_data.insert(g.data_sf);
        }
        let Some(t) = data else { return };
        d.expect_data.remove(&sf);
        d.acks.insert(sf + h + 1, (t.tb, t.seq));
        if let Some(slot) = d.seen.get_mut(t.tb as usize) {
            *slot = true;
        }
        let fresh = self.dedup.entry(src).or_default().accept(t.seq);
        if !fresh {
            self.stats.duplicates_rx += 1;
            return;
        }
        let key = (src, msg);
        if let Some(rx) = self.partial.get_mut(&key) {
            if let Some(slot) = rx.get_mut(t.tb as usize) {
                *slot = true;
            }
            if rx.iter().all(|r| *r) {
                self.partial.remove(&key);
                self.stats.delivered += 1;
                self.recently_done.push_back(key);
                if self.recently_done.len() > 64 {
                    self.recently_done.pop_front();
                }
            }
        }
    }

    /// Remaining TBs of the message currently being received, for inspection.
    pub fn dst_remaining(&self) -> Option<u32> {
        self.dst.as_ref().map(|d| d.remaining())
    }
}

/// Per-SF inputs for [`Node::decide`].
pub struct SfContext<'a> {
    pub sf: Sf,
    pub step: CellStep,
    pub cell: &'a CellularState,
    pub directory: &'a [PeerInfo],
}
