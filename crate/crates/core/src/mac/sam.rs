//! Sidelink availability messages: configuration and emission timing.

use serde::{Deserialize, Serialize};

use crate::cellular::{CellMode, ModeGroup, SlAvailability};
use crate::error::{Result, ScubaError};
use crate::paging::Sf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamConfig {
    /// Discovery listening window, SFs.
    pub n_sam: u64,
    pub n_sam_u_interval: u64,
    pub n_sam_d_interval: u64,
    /// SAM length in SFs.
    pub sam_len: f64,
}

impl Default for SamConfig {
    fn default() -> Self {
        Self {
            n_sam: 150,
            n_sam_u_interval: 20,
            n_sam_d_interval: 75,
            sam_len: 0.5,
        }
    }
}

impl SamConfig {
    pub fn validate(&self, drx_inat: u64) -> Result<()> {
        if self.n_sam <= drx_inat {
            return Err(ScubaError::config(
                "sam.n_sam",
                format!("discovery window {} must exceed DRX-INAT {}", self.n_sam, drx_inat),
            ));
        }
        if self.n_sam_u_interval == 0 || 2 * self.n_sam_u_interval > self.n_sam {
            return Err(ScubaError::config(
                "sam.n_sam_u_interval",
                format!("must lie in [1, n_sam/2] = [1, {}]", self.n_sam / 2),
            ));
        }
        if self.n_sam_d_interval == 0 || 2 * self.n_sam_d_interval > self.n_sam {
            return Err(ScubaError::config(
                "sam.n_sam_d_interval",
                format!("must lie in [1, n_sam/2] = [1, {}]", self.n_sam / 2),
            ));
        }
        if !(self.sam_len > 0.0 && self.sam_len <= 0.5) {
            return Err(ScubaError::config("sam.sam_len", "must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamKind {
    /// The sender is in ConA.
    U,
    /// The sender advertises a dynamic SL-PO.
    D,
}

/// Decides when a UE emits SAMs. Call [`SamEmitter::poll`] once per SF.
#[derive(Debug, Clone)]
pub struct SamEmitter {
    cfg: SamConfig,
    rai: bool,
    next_u_due: Sf,
    next_d_due: Sf,
    /// End of the SAM-D period after entering IDRX with RAI.
    d_until: Option<Sf>,
    last_group: ModeGroup,
}

impl SamEmitter {
    pub fn new(cfg: SamConfig, rai: bool) -> Self {
        Self {
            cfg,
            rai,
            next_u_due: 0,
            next_d_due: 0,
            d_until: None,
            last_group: ModeGroup::Idrx,
        }
    }

    /// Tracks mode-group entries; call for every SF before [`SamEmitter::due`].
    pub fn observe(&mut self, sf: Sf, mode: CellMode) {
        let group = mode.group();
        if group != self.last_group {
            match group {
                ModeGroup::Cdrx => {
                    self.next_d_due = sf;
                    self.d_until = None;
                }
                ModeGroup::Idrx if self.rai && self.last_group == ModeGroup::Cona => {
                    self.next_d_due = sf;
                    self.d_until = Some(sf + self.cfg.n_sam);
                }
                _ => self.d_until = None,
            }
            self.last_group = group;
        }
    }

    /// SAM that would be due at `sf` given its availability, without committing it.
    pub fn due(&self, sf: Sf, mode: CellMode, avail: SlAvailability) -> Option<SamKind> {
        match (mode.group(), avail) {
            (ModeGroup::Cona, SlAvailability::SamUWindowOnly) if sf >= self.next_u_due => Some(SamKind::U),
            (ModeGroup::Cdrx, SlAvailability::Free) if sf >= self.next_d_due => Some(SamKind::D),
            (ModeGroup::Idrx, SlAvailability::Free)
                if self.d_until.is_some_and(|end| sf < end) && sf >= self.next_d_due =>
            {
                Some(SamKind::D)
            }
            _ => None,
        }
    }

    /// Records an emission at `sf`.
    pub fn commit(&mut self, sf: Sf, kind: SamKind) {
        match kind {
            SamKind::U => self.next_u_due = sf + self.cfg.n_sam_u_interval,
            SamKind::D => self.next_d_due = sf + self.cfg.n_sam_d_interval,
        }
    }

    /// `due` followed by `commit`.
    pub fn poll(&mut self, sf: Sf, mode: CellMode, avail: SlAvailability) -> Option<SamKind> {
        self.observe(sf, mode);
        let kind = self.due(sf, mode, avail)?;
        self.commit(sf, kind);
        Some(kind)
    }
}

/// Whether an LLM UE listens at an SF with this availability.
pub fn llm_listens(avail: SlAvailability) -> bool {
    avail == SlAvailability::Free
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{CellularConfig, CellularState};
    use crate::paging::HyperFrameMask;

    fn walk(cfg: CellularConfig, sam: SamConfig, arrivals: &[Sf], horizon: Sf) -> Vec<(Sf, SamKind, CellMode)> {
        let mut cell = CellularState::new(cfg, HyperFrameMask::default(), 0);
        let mut em = SamEmitter::new(sam, cfg.rai_enabled);
        let mut out = Vec::new();
        for sf in 0..horizon {
            if arrivals.contains(&sf) {
                cell.on_cellular_arrival(sf);
            }
            let step = cell.advance(sf).unwrap();
            if let Some(k) = em.poll(sf, step.mode, step.availability) {
                out.push((sf, k, step.mode));
            }
        }
        out
    }

    #[test]
    fn sam_u_count_over_long_cona() {
        let cfg = CellularConfig::long_data();
        let ev = walk(cfg, SamConfig::default(), &[0], 100 + 5000);
        let u: Vec<_> = ev.iter().filter(|e| e.1 == SamKind::U).collect();
        assert_eq!(u.len(), 250);
        assert!(u.iter().all(|e| e.2 == CellMode::ConaData));
    }

    #[test]
    fn sam_d_every_interval_in_cdrx_off() {
        let cfg = CellularConfig::short_data();
        let ev = walk(cfg, SamConfig::default(), &[0], 450 + 10_000 + 500);
        let d: Vec<_> = ev.iter().filter(|e| e.1 == SamKind::D).collect();
        assert!(d.iter().all(|e| e.2 == CellMode::CdrxOff));
        assert_eq!(d[0].0, 450);
        for w in d.windows(2) {
            assert!(w[1].0 - w[0].0 >= 75);
            // Only the on-duration (20 SFs) can postpone an emission.
            assert!(w[1].0 - w[0].0 <= 75 + 20);
        }
        assert!(d.len() >= 10_000 / 95 && d.len() <= 10_000 / 75 + 1);
    }

    #[test]
    fn rai_sam_d_window() {
        let cfg = CellularConfig {
            rai_enabled: true,
            ..CellularConfig::short_data()
        };
        let ev = walk(cfg, SamConfig::default(), &[0], 2000);
        let d: Vec<Sf> = ev.iter().filter(|e| e.1 == SamKind::D).map(|e| e.0).collect();
        // IDRX entered at 350; SAM-D at 350 and 425 within the 150-SF window.
        assert_eq!(d, vec![350, 425]);
    }

    #[test]
    fn llm_listen_predicate() {
        assert!(llm_listens(SlAvailability::Free));
        assert!(!llm_listens(SlAvailability::Busy));
        assert!(!llm_listens(SlAvailability::SamUWindowOnly));
    }

    #[test]
    fn config_validation() {
        assert!(SamConfig::default().validate(100).is_ok());
        assert!(SamConfig {
            n_sam: 100,
            ..SamConfig::default()
        }
        .validate(100)
        .is_err());
        assert!(SamConfig {
            n_sam_d_interval: 80,
            ..SamConfig::default()
        }
        .validate(100)
        .is_err());
        assert!(SamConfig {
            sam_len: 0.7,
            ..SamConfig::default()
        }
        .validate(100)
        .is_err());
    }
}
