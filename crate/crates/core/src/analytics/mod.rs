//! Closed-form power, energy and collision models: the analytical counterpart of the
//! simulator.
//!
//! Average power is evaluated as `r_tx·E_TXData + r_rx·E_RXData + E_NoData/t_sf`. The data
//! terms are per-event energies weighted by event rates in events per second, and the
//! no-data term is an energy per SF, i.e. an average idle power once divided by `t_sf`.
//! Reading the three weights as probabilities that sum to one mixes per-event and per-SF
//! quantities, so the rate reading is used throughout.

mod collision;
mod montecarlo;
mod power;

pub use collision::{binomial_tail, p_b_given_a, p_collision, p_sam, p_sam_collision, p_sl_tx};
pub use montecarlo::{collision_monte_carlo, MonteCarloEstimate};
pub use power::{energy_sl_rx, energy_sl_tx, power_llm, power_native, power_sam, scuba_data_power, ModeEnergies};

use serde::{Deserialize, Serialize};

use crate::engine::Scenario;
use crate::error::{Result, ScubaError};
use crate::mac::{segment_payload, SamConfig};
use crate::metrics::{OccupancyFractions, PowerProfile};
use crate::traffic::TrafficKind;

/// Primary-RAT mode probabilities, taken from simulation occupancy or supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateProbabilities {
    pub p_cona: f64,
    pub p_cdrx: f64,
    pub p_idrx: f64,
    /// Expected SAM-Us heard by a source before a SAM-D.
    pub k_sam_u: f64,
}

impl StateProbabilities {
    pub fn new(p_cona: f64, p_cdrx: f64, p_idrx: f64, k_sam_u: f64) -> Result<Self> {
        let s = Self {
            p_cona,
            p_cdrx,
            p_idrx,
            k_sam_u,
        };
        s.validate()?;
        Ok(s)
    }

    /// Device always idle.
    pub fn idle() -> Self {
        Self {
            p_cona: 0.0,
            p_cdrx: 0.0,
            p_idrx: 1.0,
            k_sam_u: 0.0,
        }
    }

    /// Occupancy measured by the simulator, with `k_sam_u` defaulting to the SAM-U count
    /// of one ConA data phase.
    pub fn from_occupancy(occ: &OccupancyFractions, t_data: u64, sam: &SamConfig) -> Result<Self> {
        Self::new(
            occ.p_cona,
            occ.p_cdrx,
            occ.p_idrx,
            default_k_sam_u(t_data, sam.n_sam_u_interval),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_cona", self.p_cona),
            ("p_cdrx", self.p_cdrx),
            ("p_idrx", self.p_idrx),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ScubaError::InvalidArgument(format!("{name}={p} is not a probability")));
            }
        }
        let sum = self.p_cona + self.p_cdrx + self.p_idrx;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScubaError::InvalidArgument(format!(
                "state probabilities sum to {sum}, not 1"
            )));
        }
        if !(self.k_sam_u >= 0.0 && self.k_sam_u.is_finite()) {
            return Err(ScubaError::InvalidArgument(format!(
                "k_sam_u={} must be non-negative",
                self.k_sam_u
            )));
        }
        Ok(())
    }
}

/// SAM-Us emitted across one ConA data phase.
pub fn default_k_sam_u(t_data: u64, n_sam_u_interval: u64) -> f64 {
    if n_sam_u_interval == 0 {
        0.0
    } else {
        t_data as f64 / n_sam_u_interval as f64
    }
}

/// Inputs of the power models. Durations are in SFs, rates in events per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModelInputs {
    pub power: PowerProfile,
    pub n_sl: u32,
    pub n_sl_inat: u64,
    pub n_harq: u32,
    pub n_sl_po: u32,
    /// SL-DRX cycle, SFs. Zero only for the low-latency mode.
    pub n_sl_drx: u64,
    pub n_sam: f64,
    /// Discovery window, SFs.
    pub n_sam_window: u64,
    pub n_sam_u_interval: u64,
    pub n_sam_d_interval: u64,
    pub n_cdrx: u64,
    pub n_idrx: u64,
    /// Free SFs per CDRX and IDRX cycle, all used for listening in the low-latency mode.
    pub n_cdrx_free: f64,
    pub n_idrx_free: f64,
    pub r_tx: f64,
    pub r_rx: f64,
}

impl Default for PowerModelInputs {
    fn default() -> Self {
        Self::from_scenario(&Scenario::default()).expect("default scenario is valid")
    }
}

impl PowerModelInputs {
    /// Inputs matching one UE of `s`. Each UE is assumed to receive as often as it sends.
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let rate = match s.sidelink_traffic.kind {
            TrafficKind::None => 0.0,
            _ => 1000.0 / (s.sidelink_traffic.mean_iat as f64 * s.power.t_sf),
        };
        let c = &s.cellular;
        Ok(Self {
            power: s.power,
            n_sl: segment_payload(s.payload_bytes, &s.harq)?,
            n_sl_inat: s.n_sl_inat,
            n_harq: s.harq.n_harq,
            n_sl_po: s.sl_paging.n_sl_po,
            n_sl_drx: s.sl_paging.t_sl_drx as u64 * 10,
            n_sam: s.sam.sam_len,
            n_sam_window: s.sam.n_sam,
            n_sam_u_interval: s.sam.n_sam_u_interval,
            n_sam_d_interval: s.sam.n_sam_d_interval,
            n_cdrx: c.cdrx_cycle,
            n_idrx: c.idrx_cycle,
            n_cdrx_free: c.cdrx_cycle.saturating_sub(c.cdrx_on) as f64,
            // One PO SF per IDRX cycle.
            n_idrx_free: c.idrx_cycle.saturating_sub(1) as f64,
            r_tx: rate,
            r_rx: rate,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sl == 0 {
            return Err(ScubaError::InvalidArgument("n_sl must be at least 1".into()));
        }
        if self.n_harq == 0 {
            return Err(ScubaError::InvalidArgument("n_harq must be at least 1".into()));
        }
        for (name, v) in [
            ("n_sam", self.n_sam),
            ("n_cdrx_free", self.n_cdrx_free),
            ("n_idrx_free", self.n_idrx_free),
            ("r_tx", self.r_tx),
            ("r_rx", self.r_rx),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScubaError::InvalidArgument(format!("{name}={v} must be non-negative")));
            }
        }
        self.power.validate()
    }
}
