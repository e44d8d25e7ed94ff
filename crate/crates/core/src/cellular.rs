//! Primary-RAT mode machine (ConA, CDRX, IDRX) and the per-SF SCUBA availability verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScubaError};
use crate::paging::{HyperFrameMask, Sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellularConfig {
    /// RRC connection setup, SFs.
    pub t_rrc: u64,
    /// ConA data exchange, SFs.
    pub t_data: u64,
    pub drx_inat: u64,
    pub data_inat: u64,
    pub cdrx_cycle: u64,
    pub cdrx_on: u64,
    pub idrx_cycle: u64,
    pub rai_enabled: bool,
    /// Every `switch_period`-th ConA-data SF is a switch SF.
    pub switch_period: u64,
}

impl Default for CellularConfig {
    fn default() -> Self {
        Self::short_data()
    }
}

impl CellularConfig {
    pub fn short_data() -> Self {
        Self {
            t_rrc: 100,
            t_data: 250,
            drx_inat: 100,
            data_inat: 10_000,
            cdrx_cycle: 640,
            cdrx_on: 20,
            idrx_cycle: 640,
            rai_enabled: false,
            switch_period: 2,
        }
    }

    pub fn long_data() -> Self {
        Self {
            t_data: 5_000,
            data_inat: 5_000,
            ..Self::short_data()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cellular.t_rrc", self.t_rrc),
            ("cellular.t_data", self.t_data),
            ("cellular.drx_inat", self.drx_inat),
            ("cellular.data_inat", self.data_inat),
            ("cellular.cdrx_cycle", self.cdrx_cycle),
            ("cellular.cdrx_on", self.cdrx_on),
            ("cellular.idrx_cycle", self.idrx_cycle),
            ("cellular.switch_period", self.switch_period),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(ScubaError::config(field, "must be positive"));
            }
        }
        if self.cdrx_on >= self.cdrx_cycle {
            return Err(ScubaError::config(
                "cellular.cdrx_on",
                format!(
                    "on-duration {} must be shorter than the cycle {}",
                    self.cdrx_on, self.cdrx_cycle
                ),
            ));
        }
        if self.drx_inat > self.data_inat {
            return Err(ScubaError::config(
                "cellular.drx_inat",
                format!("DRX-INAT {} exceeds Data-INAT {}", self.drx_inat, self.data_inat),
            ));
        }
        Ok(())
    }
}

/// Whether ConA-data SF `elapsed` (0-based) is a switch SF.
pub fn is_cona_switch_sf(cfg: &CellularConfig, elapsed: u64) -> bool {
    (elapsed + 1).is_multiple_of(cfg.switch_period)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    ConaSetup,
    ConaData,
    ConaDrxInactivity,
    CdrxOn,
    CdrxOff,
    IdrxPo,
    IdrxSleep,
}

/// Coarse grouping used for occupancy statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeGroup {
    Cona,
    Cdrx,
    Idrx,
}

impl CellMode {
    pub const ALL: [CellMode; 7] = [
        CellMode::ConaSetup,
        CellMode::ConaData,
        CellMode::ConaDrxInactivity,
        CellMode::CdrxOn,
        CellMode::CdrxOff,
        CellMode::IdrxPo,
        CellMode::IdrxSleep,
    ];

    pub fn group(self) -> ModeGroup {
        match self {
            CellMode::ConaSetup | CellMode::ConaData | CellMode::ConaDrxInactivity => ModeGroup::Cona,
            CellMode::CdrxOn | CellMode::CdrxOff => ModeGroup::Cdrx,
            CellMode::IdrxPo | CellMode::IdrxSleep => ModeGroup::Idrx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlAvailability {
    Free,
    SamUWindowOnly,
    Busy,
}

/// Availability of a mode. `switch_sf` only matters in ConA-data.
pub fn availability(mode: CellMode, switch_sf: bool) -> SlAvailability {
    match mode {
        CellMode::ConaData if switch_sf => SlAvailability::SamUWindowOnly,
        CellMode::ConaSetup | CellMode::ConaData | CellMode::ConaDrxInactivity => SlAvailability::Busy,
        CellMode::CdrxOn | CellMode::IdrxPo => SlAvailability::Busy,
        CellMode::CdrxOff | CellMode::IdrxSleep => SlAvailability::Free,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// `bursts` cellular data bursts are buffered for the data phase.
    Setup {
        remaining: u64,
        bursts: u64,
    },
    Data {
        elapsed: u64,
        remaining: u64,
    },
    DrxInactivity {
        remaining: u64,
    },
    Cdrx {
        data_inat_remaining: u64,
    },
    Idrx,
}

/// Outcome of one [`CellularState::advance`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellStep {
    pub mode: CellMode,
    pub availability: SlAvailability,
    /// SF at which the current mode group was entered.
    pub group_entered_at: Sf,
}

/// Per-UE primary-RAT state. Starts in IDRX.
#[derive(Debug, Clone)]
pub struct CellularState {
    cfg: CellularConfig,
    idrx_po: HyperFrameMask,
    cdrx_offset: u64,
    phase: Phase,
    next_sf: Sf,
    group: ModeGroup,
    group_entered_at: Sf,
    arrivals: u64,
}

impl CellularState {
    /// `idrx_po` marks the UE's IDRX PO SFs; `cdrx_offset` shifts the CDRX on-duration.
    pub fn new(cfg: CellularConfig, idrx_po: HyperFrameMask, cdrx_offset: u64) -> Self {
        Self {
            cdrx_offset: cdrx_offset % cfg.cdrx_cycle,
            cfg,
            idrx_po,
            phase: Phase::Idrx,
            next_sf: 0,
            group: ModeGroup::Idrx,
            group_entered_at: 0,
            arrivals: 0,
        }
    }

    pub fn config(&self) -> &CellularConfig {
        &self.cfg
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    /// Applies a cellular data arrival at `now`, before `advance(now)`.
    pub fn on_cellular_arrival(&mut self, now: Sf) {
        let _ = now;
        self.arrivals += 1;
        self.phase = match self.phase {
            Phase::Idrx => Phase::Setup {
                remaining: self.cfg.t_rrc,
                bursts: 1,
            },
            Phase::Setup { remaining, bursts } => Phase::Setup {
                remaining,
                bursts: bursts + 1,
            },
            // Bursts queue behind the one in progress.
            Phase::Data { elapsed, remaining } => Phase::Data {
                elapsed,
                remaining: remaining + self.cfg.t_data,
            },
            Phase::DrxInactivity { .. } | Phase::Cdrx { .. } => Phase::Data {
                elapsed: 0,
                remaining: self.cfg.t_data,
            },
        };
    }

    fn cdrx_on_at(&self, sf: Sf) -> bool {
        (sf + self.cfg.cdrx_cycle - self.cdrx_offset) % self.cfg.cdrx_cycle < self.cfg.cdrx_on
    }

    /// Mode and availability of `sf` without consuming it.
    pub fn peek(&self, sf: Sf) -> (CellMode, SlAvailability) {
        let (mode, switch) = match self.phase {
            Phase::Setup { .. } => (CellMode::ConaSetup, false),
            Phase::Data { elapsed, .. } => (CellMode::ConaData, is_cona_switch_sf(&self.cfg, elapsed)),
            Phase::DrxInactivity { .. } => (CellMode::ConaDrxInactivity, false),
            Phase::Cdrx { .. } => {
                if self.cdrx_on_at(sf) {
                    (CellMode::CdrxOn, false)
                } else {
                    (CellMode::CdrxOff, false)
                }
            }
            Phase::Idrx => {
                if self.idrx_po.contains(sf) {
                    (CellMode::IdrxPo, false)
                } else {
                    (CellMode::IdrxSleep, false)
                }
            }
        };
        (mode, availability(mode, switch))
    }

    /// Consumes SF `sf`, which must follow the previous call directly.
    pub fn advance(&mut self, sf: Sf) -> Result<CellStep> {
        if sf != self.next_sf {
            return Err(ScubaError::Sequencing {
                expected: self.next_sf,
                got: sf,
            });
        }
        self.next_sf = sf + 1;
        let (mode, availability) = self.peek(sf);
        let group = mode.group();
        if group != self.group {
            self.group = group;
            self.group_entered_at = sf;
        }
        let step = CellStep {
            mode,
            availability,
            group_entered_at: self.group_entered_at,
        };
        self.phase = match self.phase {
            Phase::Setup { remaining, bursts } if remaining > 1 => Phase::Setup {
                remaining: remaining - 1,
                bursts,
            },
            Phase::Setup { bursts, .. } => Phase::Data {
                elapsed: 0,
                remaining: bursts * self.cfg.t_data,
            },
            Phase::Data { elapsed, remaining } if remaining > 1 => Phase::Data {
                elapsed: elapsed + 1,
                remaining: remaining - 1,
            },
            Phase::Data { .. } if self.cfg.rai_enabled => Phase::Idrx,
            Phase::Data { .. } => Phase::DrxInactivity {
                remaining: self.cfg.drx_inat,
            },
            Phase::DrxInactivity { remaining } if remaining > 1 => Phase::DrxInactivity {
                remaining: remaining - 1,
            },
            Phase::DrxInactivity { .. } => Phase::Cdrx {
                data_inat_remaining: self.cfg.data_inat,
            },
            Phase::Cdrx { data_inat_remaining } if data_inat_remaining > 1 => Phase::Cdrx {
                data_inat_remaining: data_inat_remaining - 1,
            },
            Phase::Cdrx { .. } => Phase::Idrx,
            Phase::Idrx => Phase::Idrx,
        };
        Ok(step)
    }

    /// First SF at or after `from` that is free assuming no further arrivals, searching
    /// at most `limit` SFs ahead.
    pub fn predicted_free_from(&self, from: Sf, limit: u64) -> Option<Sf> {
        let mut sim = self.clone();
        let mut sf = self.next_sf;
        while sf < from {
            sim.advance(sf).ok()?;
            sf += 1;
        }
        for _ in 0..limit {
            if sim.advance(sf).ok()?.availability == SlAvailability::Free {
                return Some(sf);
            }
            sf += 1;
        }
        None
    }

    /// First SF at or after `from` that opens `run` consecutive free SFs, assuming no
    /// further arrivals, searching at most `limit` SFs ahead.
    pub fn predicted_free_run_from(&self, from: Sf, run: u64, limit: u64) -> Option<Sf> {
        let mut sim = self.clone();
        let mut sf = self.next_sf;
        while sf < from {
            sim.advance(sf).ok()?;
            sf += 1;
        }
        let mut start = sf;
        for _ in 0..limit + run {
            if sim.advance(sf).ok()?.availability != SlAvailability::Free {
                start = sf + 1;
            } else if sf + 1 - start >= run.max(1) {
                return Some(start);
            }
            sf += 1;
            if start >= from + limit {
                return None;
            }
        }
        None
    }

    /// Current mode group (as of the last advanced SF).
    pub fn group(&self) -> ModeGroup {
        self.group
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(cfg: CellularConfig) -> CellularState {
        let po: HyperFrameMask = (0..16).map(|k| 640 * k + 9).collect();
        CellularState::new(cfg, po, 0)
    }

    fn run(m: &mut CellularState, from: Sf, n: u64) -> Vec<CellStep> {
        (from..from + n).map(|sf| m.advance(sf).unwrap()).collect()
    }

    #[test]
    fn availability_table() {
        use CellMode::*;
        assert_eq!(availability(CdrxOff, false), SlAvailability::Free);
        assert_eq!(availability(IdrxPo, false), SlAvailability::Busy);
        assert_eq!(availability(ConaData, true), SlAvailability::SamUWindowOnly);
        assert_eq!(availability(ConaData, false), SlAvailability::Busy);
        assert_eq!(availability(CdrxOn, false), SlAvailability::Busy);
        assert_eq!(availability(IdrxSleep, false), SlAvailability::Free);
        for mode in [ConaSetup, ConaDrxInactivity, CdrxOn, CdrxOff, IdrxPo, IdrxSleep] {
            assert_eq!(availability(mode, true), availability(mode, false));
        }
    }

    #[test]
    fn switch_pattern() {
        let cfg = CellularConfig::default();
        let sw: Vec<u64> = (0..6).filter(|&e| is_cona_switch_sf(&cfg, e)).collect();
        assert_eq!(sw, vec![1, 3, 5]);
        assert!(!is_cona_switch_sf(&cfg, 0));
        let every4 = CellularConfig {
            switch_period: 4,
            ..cfg
        };
        let sw: Vec<u64> = (0..12).filter(|&e| is_cona_switch_sf(&every4, e)).collect();
        assert_eq!(sw, vec![3, 7, 11]);
    }

    #[test]
    fn idle_arrival_pays_rrc_setup() {
        let mut m = machine(CellularConfig::default());
        run(&mut m, 0, 50);
        m.on_cellular_arrival(50);
        let steps = run(&mut m, 50, 100);
        assert!(steps.iter().all(|s| s.mode == CellMode::ConaSetup));
        assert_eq!(m.advance(150).unwrap().mode, CellMode::ConaData);
    }

    #[test]
    fn full_episode_timing() {
        let cfg = CellularConfig::default();
        let mut m = machine(cfg);
        m.on_cellular_arrival(0);
        let steps = run(&mut m, 0, 100 + 250 + 100 + 10_000 + 5);
        let count = |mode: CellMode| steps.iter().filter(|s| s.mode == mode).count() as u64;
        assert_eq!(count(CellMode::ConaSetup), 100);
        assert_eq!(count(CellMode::ConaData), 250);
        assert_eq!(count(CellMode::ConaDrxInactivity), 100);
        assert_eq!(count(CellMode::CdrxOn) + count(CellMode::CdrxOff), 10_000);
        assert_eq!(steps.last().unwrap().mode.group(), ModeGroup::Idrx);
    }

    #[test]
    fn rai_skips_cdrx() {
        let cfg = CellularConfig {
            rai_enabled: true,
            ..CellularConfig::default()
        };
        let mut m = machine(cfg);
        m.on_cellular_arrival(0);
        let steps = run(&mut m, 0, 400);
        assert!(steps.iter().all(|s| s.mode.group() != ModeGroup::Cdrx));
        assert_eq!(steps[350].mode.group(), ModeGroup::Idrx);
    }

    #[test]
    fn arrivals_in_connected_modes() {
        let cfg = CellularConfig::default();
        let mut m = machine(cfg);
        m.on_cellular_arrival(0);
        run(&mut m, 0, 200);
        m.on_cellular_arrival(200);
        let steps = run(&mut m, 200, 250);
        assert!(steps.iter().all(|s| s.mode == CellMode::ConaData));
        // Into CDRX, then an arrival returns straight to ConA-data.
        run(&mut m, 450, 300);
        assert_eq!(m.group(), ModeGroup::Cdrx);
        m.on_cellular_arrival(750);
        assert_eq!(m.advance(750).unwrap().mode, CellMode::ConaData);
    }

    #[test]
    fn arrivals_queue_behind_current_burst() {
        let mut m = machine(CellularConfig::default());
        m.on_cellular_arrival(0);
        run(&mut m, 0, 40);
        // During setup: the data phase carries both bursts.
        m.on_cellular_arrival(40);
        let steps = run(&mut m, 40, 561);
        assert_eq!(steps[59].mode, CellMode::ConaSetup);
        assert!(steps[60..560].iter().all(|s| s.mode == CellMode::ConaData));
        assert_eq!(steps[560].mode, CellMode::ConaDrxInactivity);
    }

    #[test]
    fn idrx_po_positions() {
        let mut m = machine(CellularConfig::default());
        let steps = run(&mut m, 0, 2000);
        let pos: Vec<usize> = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.mode == CellMode::IdrxPo)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(pos, vec![9, 649, 1289, 1929]);
    }

    #[test]
    fn rejects_out_of_order() {
        let mut m = machine(CellularConfig::default());
        m.advance(0).unwrap();
        assert_eq!(m.advance(2), Err(ScubaError::Sequencing { expected: 1, got: 2 }));
    }

    #[test]
    fn predicted_free_skips_on_duration() {
        let mut m = machine(CellularConfig::default());
        m.on_cellular_arrival(0);
        run(&mut m, 0, 451);
        assert_eq!(m.group(), ModeGroup::Cdrx);
        // offset 0: SFs 640..660 are on-duration.
        assert_eq!(m.predicted_free_from(639, 100), Some(639));
        assert_eq!(m.predicted_free_from(640, 100), Some(660));
        // A 20-SF run starting at 630 would cross the on-duration.
        assert_eq!(m.predicted_free_run_from(630, 20, 100), Some(660));
        assert_eq!(m.predicted_free_run_from(600, 20, 100), Some(600));
        assert_eq!(m.predicted_free_run_from(630, 10, 100), Some(630));
    }

    #[test]
    fn validation() {
        let bad = CellularConfig {
            cdrx_on: 640,
            ..CellularConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = CellularConfig {
            drx_inat: 20_000,
            ..CellularConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(CellularConfig::long_data().validate().is_ok());
    }
}
