//! Data and SAM collision probabilities.

use super::StateProbabilities;
use crate::engine::Topology;
use crate::error::{Result, ScubaError};
use crate::mac::SamConfig;

/// Probability that a UE with Poisson SL arrivals (mean inter-arrival `gamma_inv_s`
/// seconds) has a non-empty buffer after one SL-DRX cycle of `n_sl_drx` SFs.
pub fn p_sl_tx(gamma_inv_s: f64, n_sl_drx: u64, t_sf_ms: f64) -> Result<f64> {
    if !(gamma_inv_s > 0.0) {
        return Err(ScubaError::InvalidArgument(format!(
            "mean inter-arrival time {gamma_inv_s} s must be positive"
        )));
    }
    if gamma_inv_s.is_infinite() {
        return Ok(0.0);
    }
    let x = n_sl_drx as f64 * t_sf_ms / 1000.0 / gamma_inv_s;
    Ok(-(-x).exp_m1())
}

/// P(X ≥ 2) for X ~ Binomial(n, p). Small tails are summed term by term in log space;
/// large ones are taken as the complement of P(X ≤ 1), where nothing cancels.
pub fn binomial_tail(n: u32, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ScubaError::InvalidArgument(format!("{p} is not a probability")));
    }
    if n < 2 || p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let nf = n as f64;
    let head = (nf * lq).exp() + (nf.ln() + lp + (nf - 1.0) * lq).exp();
    if head < 0.5 {
        return Ok((1.0 - head).max(0.0));
    }
    // ln C(n, 1)
    let mut ln_c = nf.ln();
    let mut sum = 0.0;
    for k in 2..=n {
        let kf = k as f64;
        ln_c += (nf - kf + 1.0).ln() - kf.ln();
        sum += (ln_c + kf * lp + (nf - kf) * lq).exp();
    }
    Ok(sum.min(1.0))
}

/// Probability that the pending transmissions meet on one SL-PO, given that at least two
/// sources hold data: the sum of `(n_sl_po/n_sl_drx)^k` for `k` from 2 to `n_ue`.
pub fn p_b_given_a(n_ue: u32, n_sl_po: u32, n_sl_drx: u64) -> Result<f64> {
    if n_sl_drx == 0 || n_sl_po as u64 >= n_sl_drx {
        return Err(ScubaError::InvalidArgument(format!(
            "SL-PO length {n_sl_po} must be shorter than the SL-DRX cycle {n_sl_drx}"
        )));
    }
    if n_ue < 2 {
        return Ok(0.0);
    }
    let q = n_sl_po as f64 / n_sl_drx as f64;
    // Geometric series q^2 + ... + q^n.
    Ok(q * q * (-((n_ue - 1) as f64 * q.ln()).exp_m1()) / (1.0 - q))
}

fn check_bands(n_bands: u16) -> Result<f64> {
    if n_bands == 0 {
        return Err(ScubaError::InvalidArgument("at least one band is required".into()));
    }
    Ok(n_bands as f64)
}

/// SL data collision probability with every UE free of cellular activity.
pub fn p_collision(
    n_ue: u32,
    n_bands: u16,
    p_tx_buffer: f64,
    n_sl_po: u32,
    n_sl_drx: u64,
    topology: Topology,
) -> Result<f64> {
    let nb = check_bands(n_bands)?;
    let pa = binomial_tail(n_ue, p_tx_buffer)?;
    let pb = match topology {
        // Every source targets the same SL-PO.
        Topology::CentralDst => 1.0,
        Topology::RandomPeers => p_b_given_a(n_ue, n_sl_po, n_sl_drx)?,
    };
    Ok(pa * pb / nb)
}

/// Probability that a UE emits a SAM in a given SF.
pub fn p_sam(probs: &StateProbabilities, sam: &SamConfig) -> Result<f64> {
    probs.validate()?;
    let rate = |interval: u64| {
        if interval == 0 {
            Err(ScubaError::InvalidArgument("SAM intervals must be positive".into()))
        } else {
            Ok(sam.sam_len / interval as f64)
        }
    };
    Ok(probs.p_cona * rate(sam.n_sam_u_interval)? + probs.p_cdrx * rate(sam.n_sam_d_interval)?)
}

/// SAM collision probability.
pub fn p_sam_collision(n_ue: u32, n_bands: u16, probs: &StateProbabilities, sam: &SamConfig) -> Result<f64> {
    let nb = check_bands(n_bands)?;
    Ok(binomial_tail(n_ue, p_sam(probs, sam)?)? / nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_probability() {
        let p = p_sl_tx(30.0, 10240, 1.0).unwrap();
        // At least one arrival: sum of Poisson terms from n = 1.
        let x: f64 = 10.24 / 30.0;
        let mut term = (-x).exp();
        let mut series = 0.0;
        for n in 1..40 {
            term *= x / n as f64;
            series += term;
        }
        assert!((p - series).abs() < 1e-14, "{p} vs {series}");
        assert!((p - 0.28923).abs() < 1e-4, "{p}");
        assert_eq!(p_sl_tx(30.0, 0, 1.0).unwrap(), 0.0);
        assert_eq!(p_sl_tx(f64::INFINITY, 10240, 1.0).unwrap(), 0.0);
        assert!(p_sl_tx(0.0, 10240, 1.0).is_err());
    }

    /// Direct evaluation with f64 binomial coefficients, fine for small n.
    fn tail_direct(n: u32, p: f64) -> f64 {
        let mut c = 1.0;
        let mut sum = 0.0;
        for k in 0..=n {
            if k > 0 {
                c = c * (n - k + 1) as f64 / k as f64;
            }
            if k >= 2 {
                sum += c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            }
        }
        sum
    }

    #[test]
    fn tail_matches_direct_sum() {
        for n in [2, 3, 10, 50, 100] {
            for p in [1e-6, 0.01, 0.28923, 0.9] {
                let a = binomial_tail(n, p).unwrap();
                let b = tail_direct(n, p);
                assert!(
                    (a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-15,
                    "n={n} p={p}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn tail_large_n_is_finite() {
        let t = binomial_tail(10_000, 1e-3).unwrap();
        // Poisson(10) approximation: 1 - e^-10 (1 + 10).
        let approx = 1.0 - (-10.0f64).exp() * 11.0;
        assert!(t.is_finite() && (t - approx).abs() < 1e-3, "{t}");
        assert!((binomial_tail(10_000, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn central_pair_hand_value() {
        let p = 0.28923;
        let pc = p_collision(2, 2, p, 4, 10240, Topology::CentralDst).unwrap();
        assert!((pc - p * p / 2.0).abs() < 1e-15);
        assert!((pc - 0.04183).abs() < 5e-6);
        assert_eq!(p_collision(2, 2, 0.0, 4, 10240, Topology::RandomPeers).unwrap(), 0.0);
        assert_eq!(p_collision(1, 2, 0.5, 4, 10240, Topology::CentralDst).unwrap(), 0.0);
        assert!(p_collision(2, 0, 0.5, 4, 10240, Topology::CentralDst).is_err());
    }

    #[test]
    fn b_given_a_matches_sum() {
        for n in [2u32, 5, 100] {
            let q: f64 = 4.0 / 320.0;
            let direct: f64 = (2..=n).map(|k| q.powi(k as i32)).sum();
            let closed = p_b_given_a(n, 4, 320).unwrap();
            assert!((closed - direct).abs() < 1e-15, "{n}");
        }
        assert!(p_b_given_a(2, 4, 4).is_err());
    }

    #[test]
    fn sam_probability() {
        let sam = SamConfig::default();
        let cona = StateProbabilities::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!((p_sam(&cona, &sam).unwrap() - 0.025).abs() < 1e-15);
        let idle = StateProbabilities::idle();
        assert_eq!(p_sam_collision(10, 2, &idle, &sam).unwrap(), 0.0);
    }
}
