//! Monte Carlo estimate of the data collision probability.
//!
//! Each trial draws the buffer state of every UE for one SL-DRX cycle. When two or more
//! UEs hold data, the first two of them are followed: under random peers each lands on
//! the observed SL-PO with probability `n_sl_po/n_sl_drx`, and the pair collides when
//! both do and they picked the same band. This is the event the closed form counts. The
//! `any_pair` estimate instead lets every pending source draw a slot and a band and counts
//! a trial when any two of them meet, which is what a real medium would see.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::Topology;
use crate::error::{Result, ScubaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub trials: u64,
    pub hits: u64,
    pub any_pair_hits: u64,
}

impl MonteCarloEstimate {
    pub fn p(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    pub fn any_pair(&self) -> f64 {
        self.any_pair_hits as f64 / self.trials as f64
    }

    /// Standard error of [`Self::p`] under the hypothesis that the true value is
    /// `reference`, or of the empirical rate if that is larger.
    pub fn sigma(&self, reference: f64) -> f64 {
        let n = self.trials as f64;
        let var = |p: f64| p * (1.0 - p) / n;
        var(self.p()).max(var(reference)).sqrt()
    }
}

const CHUNKS: u64 = 64;

#[allow(clippy::too_many_arguments)]
pub fn collision_monte_carlo(
    n_ue: u32,
    n_bands: u16,
    p_tx_buffer: f64,
    n_sl_po: u32,
    n_sl_drx: u64,
    topology: Topology,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_bands == 0 || !(0.0..=1.0).contains(&p_tx_buffer) || n_sl_drx == 0 || trials == 0 {
        return Err(ScubaError::InvalidArgument(
            "Monte Carlo needs a band, a probability, a cycle and trials".into(),
        ));
    }
    // SL-PO slots per cycle; the observed one is slot 0.
    let slots = (n_sl_drx / n_sl_po.max(1) as u64).max(1);
    let q = (n_sl_po as f64 / n_sl_drx as f64).min(1.0);
    let counts: Vec<(u64, u64, u64)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = trials / CHUNKS + u64::from(c < trials % CHUNKS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut hits = 0;
            let mut any = 0;
            let mut pending: Vec<(u64, u16)> = Vec::with_capacity(n_ue as usize);
            for _ in 0..n {
                pending.clear();
                for _ in 0..n_ue {
                    if rng.random::<f64>() < p_tx_buffer {
                        let slot = match topology {
                            Topology::CentralDst => 0,
                            Topology::RandomPeers => rng.random_range(0..slots),
                        };
                        pending.push((slot, rng.random_range(0..n_bands)));
                    }
                }
                if pending.len() < 2 {
                    continue;
                }
                let meet = match topology {
                    Topology::CentralDst => true,
                    Topology::RandomPeers => rng.random::<f64>() < q && rng.random::<f64>() < q,
                };
                if meet && pending[0].1 == pending[1].1 {
                    hits += 1;
                }
                pending.sort_unstable();
                if pending.windows(2).any(|w| w[0] == w[1]) {
                    any += 1;
                }
            }
            (n, hits, any)
        })
        .collect();
    let (t, h, a) = counts
        .into_iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    Ok(MonteCarloEstimate {
        trials: t,
        hits: h,
        any_pair_hits: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let a = collision_monte_carlo(10, 2, 0.3, 4, 320, Topology::RandomPeers, 10_000, 7).unwrap();
        let b = collision_monte_carlo(10, 2, 0.3, 4, 320, Topology::RandomPeers, 10_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 10_000);
        assert!(a.any_pair_hits >= a.hits);
    }

    #[test]
    fn central_pair_rate() {
        // Two UEs: both pending w.p. p^2, then same band w.p. 1/2.
        let p = 0.3;
        let e = collision_monte_carlo(2, 2, p, 4, 10240, Topology::CentralDst, 400_000, 1).unwrap();
        let want = p * p / 2.0;
        assert!((e.p() - want).abs() < 4.0 * e.sigma(want), "{} vs {want}", e.p());
    }
}
