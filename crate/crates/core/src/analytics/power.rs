//! Energy per SL exchange and average power of the native, SAM and low-latency modes.

use super::{PowerModelInputs, StateProbabilities};
use crate::error::{Result, ScubaError};

/// SF duration in seconds, so that mW times this is mJ.
fn sf_s(inp: &PowerModelInputs) -> f64 {
    inp.power.t_sf / 1000.0
}

fn switches(inp: &PowerModelInputs) -> f64 {
    (inp.n_sl as f64 / inp.n_harq as f64 + 1.0).ceil()
}

/// Energy (mJ) a source spends completing one SL transmission.
pub fn energy_sl_tx(inp: &PowerModelInputs) -> Result<f64> {
    inp.validate()?;
    let p = &inp.power;
    let n = inp.n_sl as f64;
    Ok(sf_s(inp) * (p.p_tx * n + p.p_rx * n + p.p_switch * switches(inp) + p.p_rx * inp.n_sl_inat as f64))
}

/// Energy (mJ) a destination spends receiving one SL transmission. The first HARQ frame is
/// listened in full; later frames only for the TBs still expected.
pub fn energy_sl_rx(inp: &PowerModelInputs) -> Result<f64> {
    inp.validate()?;
    let p = &inp.power;
    let n = inp.n_sl as f64;
    let h = inp.n_harq as f64;
    let listen = h + (n - h).max(0.0);
    Ok(sf_s(inp) * (p.p_rx * listen + p.p_tx * n + p.p_switch * switches(inp) + p.p_rx * inp.n_sl_inat as f64))
}

/// Per-event data energies and the per-SF idle energy of one mode, all in mJ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEnergies {
    pub tx_data: f64,
    pub rx_data: f64,
    pub no_data: f64,
}

impl ModeEnergies {
    /// Average power, mW.
    pub fn power(&self, inp: &PowerModelInputs) -> f64 {
        inp.r_tx * self.tx_data + inp.r_rx * self.rx_data + self.no_data / sf_s(inp)
    }
}

fn per_interval(energy: f64, interval: u64, what: &str) -> Result<f64> {
    if energy == 0.0 {
        Ok(0.0)
    } else if interval == 0 {
        Err(ScubaError::InvalidArgument(format!("{what} interval must be positive")))
    } else {
        Ok(energy / interval as f64)
    }
}

fn idle_po_energy(inp: &PowerModelInputs) -> Result<f64> {
    let e = inp.power.p_rx * inp.n_sl_po as f64 * sf_s(inp);
    if inp.n_sl_drx == 0 {
        return Err(ScubaError::LlmMode);
    }
    Ok(e / inp.n_sl_drx as f64)
}

pub(crate) fn native_energies(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<ModeEnergies> {
    s.validate()?;
    let awake = 1.0 - s.p_cona;
    Ok(ModeEnergies {
        tx_data: awake * energy_sl_tx(inp)?,
        rx_data: awake * energy_sl_rx(inp)?,
        no_data: awake * idle_po_energy(inp)?,
    })
}

/// Data energies shared by the SAM and low-latency modes, plus the SAM emission energies
/// per SF in ConA (SAM-U) and CDRX (SAM-D).
fn sam_data_energies(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<(f64, f64, f64, f64)> {
    s.validate()?;
    let p = &inp.power;
    let t = sf_s(inp);
    let sam_tx = p.p_tx * inp.n_sam * t;
    let sam_u = per_interval(sam_tx, inp.n_sam_u_interval, "SAM-U")?;
    let sam_d = per_interval(sam_tx, inp.n_sam_d_interval, "SAM-D")?;
    let n_u = inp.n_sam_u_interval as f64;
    let n_d = inp.n_sam_d_interval as f64;
    // Discovery listening before a transmission.
    let discovery = s.p_idrx
        * p.p_rx
        * t
        * (s.p_cona * (s.k_sam_u * n_u + n_d) / 2.0 + s.p_cdrx * n_d / 2.0 + s.p_idrx * inp.n_sam_window as f64);
    let tx = s.p_cona * sam_u + (1.0 - s.p_cona) * energy_sl_tx(inp)? + discovery;
    let rx = s.p_cona * sam_u + (1.0 - s.p_cona) * energy_sl_rx(inp)? + s.p_cdrx * sam_d;
    Ok((tx, rx, sam_u, sam_d))
}

pub(crate) fn sam_energies(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<ModeEnergies> {
    let (tx_data, rx_data, sam_u, sam_d) = sam_data_energies(inp, s)?;
    let po = idle_po_energy(inp)?;
    Ok(ModeEnergies {
        tx_data,
        rx_data,
        no_data: s.p_cona * sam_u + s.p_cdrx * (sam_d + po) + s.p_idrx * po,
    })
}

pub(crate) fn llm_energies(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<ModeEnergies> {
    let (tx_data, rx_data, sam_u, sam_d) = sam_data_energies(inp, s)?;
    let p = &inp.power;
    let t = sf_s(inp);
    let cdrx_listen = per_interval(p.p_rx * inp.n_cdrx_free * t, inp.n_cdrx, "CDRX cycle")?;
    let idrx_listen = per_interval(p.p_rx * inp.n_idrx_free * t, inp.n_idrx, "IDRX cycle")?;
    Ok(ModeEnergies {
        tx_data,
        rx_data,
        no_data: s.p_cona * sam_u + s.p_cdrx * (sam_d + cdrx_listen) + s.p_idrx * idrx_listen,
    })
}

/// Average native-mode power, mW.
pub fn power_native(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<f64> {
    Ok(native_energies(inp, s)?.power(inp))
}

/// Average SAM-mode power, mW.
pub fn power_sam(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<f64> {
    Ok(sam_energies(inp, s)?.power(inp))
}

/// Average low-latency-mode power, mW. The SL-DRX cycle is not used.
pub fn power_llm(inp: &PowerModelInputs, s: &StateProbabilities) -> Result<f64> {
    Ok(llm_energies(inp, s)?.power(inp))
}

/// Power (mW) spent on SL data exchanges alone, without paging or SAM overheads.
pub fn scuba_data_power(inp: &PowerModelInputs) -> Result<f64> {
    Ok(inp.r_tx * energy_sl_tx(inp)? + inp.r_rx * energy_sl_rx(inp)?)
}
