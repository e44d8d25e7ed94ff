//! SCUBA MAC: HARQ geometry, availability messages and the per-UE protocol machine.

pub mod harq;
pub mod node;
pub mod sam;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::paging::{PoSchedule, Sf, UeIdentity};

pub use harq::{
    ack_sf_for_data, frame_slot, grant_to_data_sf, harq_frame_length, segment_payload, FrameSlot, HarqConfig,
    HarqScheme,
};
pub use node::{Completion, Node, NodeConfig, NodeStats, SfContext, SrcPhaseKind};
pub use sam::{llm_listens, SamConfig, SamEmitter, SamKind};

/// Uniform band for one transmission attempt.
pub fn band_select<R: rand::Rng + ?Sized>(rng: &mut R, n_bands: u16) -> u16 {
    if n_bands <= 1 {
        0
    } else {
        rng.random_range(0..n_bands)
    }
}

/// Index of a UE inside a scenario.
pub type UeIndex = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScubaMode {
    #[default]
    Native,
    Sam,
    Llm,
}

impl ScubaMode {
    pub fn emits_sam(self) -> bool {
        matches!(self, ScubaMode::Sam | ScubaMode::Llm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Data,
    Grant,
    Ack,
    SamU,
    SamD,
}

/// Application-level sidelink message queued at its source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlMessage {
    pub id: u64,
    pub src: UeIndex,
    pub dst: UeIndex,
    pub payload_bytes: u32,
    pub n_sl: u32,
    pub created_at: Sf,
    pub kind: MessageKind,
}

/// Header of one transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TbHeader {
    pub tb: u16,
    /// 10-bit sequence number.
    pub seq: u16,
    pub retx: bool,
}

/// Grant announcing where a transport block will be sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantHeader {
    pub tb: u16,
    pub data_sf: Sf,
    pub retx: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    /// Data and/or grant of an SL connected-mode session opened at `origin`.
    Sl {
        to: UeIndex,
        msg: u64,
        n_tbs: u16,
        origin: Sf,
        data: Option<TbHeader>,
        grant: Option<GrantHeader>,
        /// The source holds another message for the same destination.
        more: bool,
    },
    Ack {
        to: UeIndex,
        msg: u64,
        tb: u16,
        seq: u16,
    },
    Sam {
        kind: SamKind,
        /// Advertised dynamic SL-PO (SAM-D only).
        po: Option<Sf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub from: UeIndex,
    pub band: u16,
    pub body: Body,
}

impl Packet {
    pub fn kind(&self) -> MessageKind {
        match self.body {
            Body::Sl { data: Some(_), .. } => MessageKind::Data,
            Body::Sl { .. } => MessageKind::Grant,
            Body::Ack { .. } => MessageKind::Ack,
            Body::Sam { kind: SamKind::U, .. } => MessageKind::SamU,
            Body::Sam { kind: SamKind::D, .. } => MessageKind::SamD,
        }
    }

    /// SAMs occupy half an SF.
    pub fn is_sam(&self) -> bool {
        matches!(self.body, Body::Sam { .. })
    }

    pub fn addressee(&self) -> Option<UeIndex> {
        match self.body {
            Body::Sl { to, .. } | Body::Ack { to, .. } => Some(to),
            Body::Sam { .. } => None,
        }
    }
}

/// What a UE does with its SCUBA radio in one SF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "activity", rename_all = "snake_case")]
pub enum Activity {
    Sleep,
    Listen,
    Switch,
    Tx { packet: Packet },
}

impl Activity {
    pub fn is_sleep(&self) -> bool {
        matches!(self, Activity::Sleep)
    }
}

/// Static directory entry: what any UE may know about a peer.
#[derive(Debug, Clone)]
pub struct PeerInfo {
    pub identity: UeIdentity,
    pub mode: ScubaMode,
    /// Fixed SL-PO schedule; `None` in LLM.
    pub schedule: Option<Arc<PoSchedule>>,
}

/// Sliding duplicate filter over 10-bit sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct SeqWindow {
    seen: [u64; 16],
}

impl SeqWindow {
    pub const MODULUS: u16 = 1024;

    /// Returns `true` for a sequence number not seen in the current half-window.
    pub fn accept(&mut self, seq: u16) -> bool {
        let s = (seq % Self::MODULUS) as usize;
        if self.seen[s / 64] & (1 << (s % 64)) != 0 {
            return false;
        }
        self.seen[s / 64] |= 1 << (s % 64);
        let c = (s + 512) % 1024;
        self.seen[c / 64] &= !(1 << (c % 64));
        true
    }
}
