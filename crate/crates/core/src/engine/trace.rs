//! Trace records, sinks and checks computed from a recorded trace.

use serde::{Deserialize, Serialize};

use super::medium::Outcome;
use crate::cellular::{CellMode, SlAvailability};
use crate::error::Result;
use crate::mac::{Activity, Body, MessageKind, Packet, UeIndex};
use crate::paging::Sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Sleep,
    Listen,
    Switch,
    Tx,
    Sam,
}

/// A packet heard by a listening UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxEntry {
    pub from: UeIndex,
    pub kind: MessageKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<UeIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msg: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tb: Option<u16>,
}

/// One UE's SCUBA activity in one SF. Sleep is logged only when entered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sf: Sf,
    pub ue: UeIndex,
    pub mode: CellMode,
    pub availability: SlAvailability,
    pub action: Action,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<MessageKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<UeIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msg: Option<u64>,
    /// Transport block carried as data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tb: Option<u16>,
    /// Granted transport block and the SF its data is scheduled in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grant: Option<(u16, Sf)>,
    /// First SF of the session a data or grant unit belongs to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Sf>,
    /// Dynamic SL-PO advertised by a SAM-D.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub po: Option<Sf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rx: Vec<RxEntry>,
}

impl TraceRecord {
    pub fn new(sf: Sf, ue: UeIndex, mode: CellMode, availability: SlAvailability, activity: &Activity) -> Self {
        let mut r = Self {
            sf,
            ue,
            mode,
            availability,
            action: Action::Sleep,
            band: None,
            kind: None,
            to: None,
            msg: None,
            tb: None,
            grant: None,
            origin: None,
            po: None,
            outcome: None,
            rx: Vec::new(),
        };
        match activity {
            Activity::Sleep => {}
            Activity::Listen => r.action = Action::Listen,
            Activity::Switch => r.action = Action::Switch,
            Activity::Tx { packet } => {
                r.action = if packet.is_sam() { Action::Sam } else { Action::Tx };
                r.band = Some(packet.band);
                r.kind = Some(packet.kind());
                r.to = packet.addressee();
                match packet.body {
                    Body::Sl {
                        msg,
                        data,
                        grant,
                        origin,
                        ..
                    } => {
                        r.msg = Some(msg);
                        r.origin = Some(origin);
                        r.tb = data.map(|d| d.tb);
                        r.grant = grant.map(|g| (g.tb, g.data_sf));
                    }
                    Body::Ack { msg, tb, .. } => {
                        r.msg = Some(msg);
                        r.tb = Some(tb);
                    }
                    Body::Sam { po, .. } => r.po = po,
                }
            }
        }
        r
    }
}

impl RxEntry {
    pub fn from_packet(p: &Packet) -> Self {
        let (msg, tb) = match p.body {
            Body::Sl { msg, data, .. } => (Some(msg), data.map(|d| d.tb)),
            Body::Ack { msg, tb, .. } => (Some(msg), Some(tb)),
            Body::Sam { .. } => (None, None),
        };
        Self {
            from: p.from,
            kind: p.kind(),
            to: p.addressee(),
            msg,
            tb,
        }
    }
}

pub trait TraceSink {
    /// Whether records should be built at all.
    fn enabled(&self) -> bool {
        true
    }

    fn record(&mut self, rec: &TraceRecord) -> Result<()>;
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn enabled(&self) -> bool {
        false
    }

    fn record(&mut self, _: &TraceRecord) -> Result<()> {
        Ok(())
    }
}

/// In-memory trace.
#[derive(Debug, Default, Clone)]
pub struct EventLog {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for EventLog {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }
}

/// Largest fraction of any `window`-SF span that `ue` spent transmitting, recomputed from
/// a trace (SAMs count half an SF). Spans shorter than the window divide by the span.
pub fn duty_cycle(log: &[TraceRecord], ue: UeIndex, window: u64, horizon: Sf) -> f64 {
    let tx: Vec<(Sf, u64)> = log
        .iter()
        .filter(|r| r.ue == ue)
        .filter_map(|r| match r.action {
            Action::Tx => Some((r.sf, 2)),
            Action::Sam => Some((r.sf, 1)),
            _ => None,
        })
        .collect();
    if tx.is_empty() || horizon == 0 {
        return 0.0;
    }
    // Two-pointer sweep; every optimal window can be taken to start at a transmission.
    let mut best = 0u64;
    let mut sum = 0u64;
    let mut j = 0;
    for i in 0..tx.len() {
        while j < tx.len() && tx[j].0 < tx[i].0 + window {
            sum += tx[j].1;
            j += 1;
        }
        best = best.max(sum);
        sum -= tx[i].1;
    }
    best as f64 / 2.0 / window.min(horizon) as f64
}
