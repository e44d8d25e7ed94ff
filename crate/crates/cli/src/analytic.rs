//! The `analytic` command: closed forms evaluated on a scenario plus flags.

use scuba_core::analytics::{
    collision_monte_carlo, default_k_sam_u, energy_sl_rx, energy_sl_tx, p_collision, p_sam, p_sam_collision, p_sl_tx,
    power_llm, power_native, power_sam, scuba_data_power, PowerModelInputs, StateProbabilities,
};
use scuba_core::engine::run_replicas;
use scuba_core::{MetricsReport, Scenario, ScubaMode, Topology, TrafficKind};
use serde::Serialize;

use crate::config::ScenarioFile;
use crate::error::{CliError, Result};

pub fn mode_power(inp: &PowerModelInputs, mode: ScubaMode, probs: &StateProbabilities) -> Result<f64> {
    Ok(match mode {
        ScubaMode::Native => power_native(inp, probs)?,
        ScubaMode::Sam => power_sam(inp, probs)?,
        ScubaMode::Llm => power_llm(inp, probs)?,
    })
}

/// Probability that a source holds data at an SL-PO, from Poisson sidelink arrivals.
pub fn buffer_probability(s: &Scenario) -> Result<f64> {
    if s.sidelink_traffic.kind != TrafficKind::Poisson {
        return Err(CliError::config(
            "sidelink_traffic.kind",
            "the buffer probability needs Poisson arrivals; pass --p-tx instead",
        ));
    }
    let iat_s = s.sidelink_traffic.mean_iat as f64 * s.power.t_sf / 1000.0;
    Ok(p_sl_tx(iat_s, s.sl_paging.n_sl_drx(), s.power.t_sf)?)
}

/// Mode probabilities measured on a run. `k_sam_u` is the mean number of SAM-Us a
/// source heard before a SAM-D when the run had any, else one per SAM-U interval of a
/// ConA data phase.
pub fn probabilities_from_report(s: &Scenario, r: &MetricsReport) -> Result<StateProbabilities> {
    let k = r
        .stats
        .mean_sam_u_before_d()
        .unwrap_or_else(|| default_k_sam_u(s.cellular.t_data, s.sam.n_sam_u_interval));
    let o = r.occupancy;
    // Renormalise away float residue so validation sees an exact sum.
    let sum = o.p_cona + o.p_cdrx + o.p_idrx;
    if !(sum > 0.0) {
        return Err(CliError::Core(scuba_core::ScubaError::NoData));
    }
    Ok(StateProbabilities::new(
        o.p_cona / sum,
        o.p_cdrx / sum,
        1.0 - (o.p_cona + o.p_cdrx) / sum,
        k,
    )?)
}

pub fn probabilities_from_sim(file: &ScenarioFile) -> Result<StateProbabilities> {
    let s = &file.scenario;
    let r = run_replicas(s, file.replicas)?.report(&s.power);
    probabilities_from_report(s, &r)
}

/// Probabilities given on the command line: ConA and CDRX, IDRX taking the rest.
pub fn probabilities_from_flags(
    p_cona: f64,
    p_cdrx: f64,
    k_sam_u: Option<f64>,
    s: &Scenario,
) -> Result<StateProbabilities> {
    let k = k_sam_u.unwrap_or_else(|| default_k_sam_u(s.cellular.t_data, s.sam.n_sam_u_interval));
    StateProbabilities::new(p_cona, p_cdrx, 1.0 - p_cona - p_cdrx, k)
        .map_err(|e| CliError::config("--p-cona/--p-cdrx", e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerResult {
    pub mode: ScubaMode,
    pub n_sl_drx: u64,
    /// Data exchanges per second, each direction.
    pub rate_per_s: f64,
    pub probabilities: StateProbabilities,
    pub energy_sl_tx_mj: f64,
    pub energy_sl_rx_mj: f64,
    /// Power of the data exchanges alone.
    pub data_power_mw: f64,
    pub power_mw: f64,
}

/// Average power of `mode`. Native mode defaults to an idle primary link; the SAM and
/// low-latency modes need probabilities.
pub fn power(file: &ScenarioFile, mode: ScubaMode, probs: Option<StateProbabilities>) -> Result<PowerResult> {
    let probs = match (probs, mode) {
        (Some(p), _) => p,
        (None, ScubaMode::Native) => StateProbabilities::idle(),
        (None, _) => {
            return Err(CliError::Usage(
                "sam and llm power need --p-cona and --p-cdrx, or --from-sim".into(),
            ))
        }
    };
    let inp = PowerModelInputs::from_scenario(&file.scenario)?;
    Ok(PowerResult {
        mode,
        n_sl_drx: inp.n_sl_drx,
        rate_per_s: inp.r_tx,
        probabilities: probs,
        energy_sl_tx_mj: energy_sl_tx(&inp)?,
        energy_sl_rx_mj: energy_sl_rx(&inp)?,
        data_power_mw: scuba_data_power(&inp)?,
        power_mw: mode_power(&inp, mode, &probs)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub p: f64,
    pub sigma: f64,
    /// Distance from the closed form in standard errors.
    pub z: f64,
    /// Any two pending sources meeting, not only the pair the closed form follows.
    pub any_pair: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionResult {
    pub n_ue: u32,
    pub n_bands: u16,
    pub topology: Topology,
    pub p_tx_buffer: f64,
    pub n_sl_po: u32,
    pub n_sl_drx: u64,
    pub p_collision: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
}

pub fn monte_carlo_summary(analytic: f64, e: &scuba_core::analytics::MonteCarloEstimate) -> MonteCarloSummary {
    let sigma = e.sigma(analytic);
    MonteCarloSummary {
        trials: e.trials,
        p: e.p(),
        sigma,
        z: if sigma > 0.0 { (e.p() - analytic) / sigma } else { 0.0 },
        any_pair: e.any_pair(),
    }
}

/// Data collision probability on one SL-PO. `p_tx` defaults to the buffer probability
/// of the scenario's sidelink traffic.
pub fn collision(
    file: &ScenarioFile,
    n_ue: u32,
    topology: Topology,
    p_tx: Option<f64>,
    mc_trials: Option<u64>,
) -> Result<CollisionResult> {
    let s = &file.scenario;
    let p = match p_tx {
        Some(p) => p,
        None => buffer_probability(s)?,
    };
    let n_sl_drx = s.sl_paging.n_sl_drx();
    let pc = p_collision(n_ue, s.n_bands, p, s.sl_paging.n_sl_po, n_sl_drx, topology)?;
    let monte_carlo = match mc_trials {
        Some(trials) => {
            let e = collision_monte_carlo(
                n_ue,
                s.n_bands,
                p,
                s.sl_paging.n_sl_po,
                n_sl_drx,
                topology,
                trials,
                s.seed,
            )?;
            Some(monte_carlo_summary(pc, &e))
        }
        None => None,
    };
    Ok(CollisionResult {
        n_ue,
        n_bands: s.n_bands,
        topology,
        p_tx_buffer: p,
        n_sl_po: s.sl_paging.n_sl_po,
        n_sl_drx,
        p_collision: pc,
        monte_carlo,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SamCollisionResult {
    pub n_ue: u32,
    pub n_bands: u16,
    pub n_sam_u_interval: u64,
    pub n_sam_d_interval: u64,
    pub probabilities: StateProbabilities,
    pub p_sam: f64,
    pub p_collision: f64,
}

pub fn sam_collision(file: &ScenarioFile, n_ue: u32, probs: &StateProbabilities) -> Result<SamCollisionResult> {
    let s = &file.scenario;
    Ok(SamCollisionResult {
        n_ue,
        n_bands: s.n_bands,
        n_sam_u_interval: s.sam.n_sam_u_interval,
        n_sam_d_interval: s.sam.n_sam_d_interval,
        probabilities: *probs,
        p_sam: p_sam(probs, &s.sam)?,
        p_collision: p_sam_collision(n_ue, s.n_bands, probs, &s.sam)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryResult {
    pub capacity_wh: f64,
    pub baseline_days: f64,
    pub sidelink_mean_iat_s: f64,
    pub scuba_power_mw: f64,
    pub days: f64,
}

/// Battery life with SCUBA's data exchanges added to the calibrated cellular drain.
/// `power_mw` overrides the power derived from the scenario's sidelink traffic.
pub fn battery(file: &ScenarioFile, power_mw: Option<f64>) -> Result<BatteryResult> {
    let s = &file.scenario;
    let scuba = match power_mw {
        Some(p) if p >= 0.0 && p.is_finite() => p,
        Some(p) => return Err(CliError::config("--power-mw", format!("{p} is not a power"))),
        None => scuba_data_power(&PowerModelInputs::from_scenario(s)?)?,
    };
    Ok(BatteryResult {
        capacity_wh: file.battery.capacity_wh,
        baseline_days: file.battery.baseline_days,
        sidelink_mean_iat_s: s.sidelink_traffic.mean_iat as f64 * s.power.t_sf / 1000.0,
        scuba_power_mw: scuba,
        days: file.battery.days_with_power(scuba)?,
    })
}
