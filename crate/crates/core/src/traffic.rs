//! Seeded arrival processes for cellular and sidelink traffic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScubaError};
use crate::paging::Sf;

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Cellular = 0,
    Sidelink = 1,
    Mac = 2,
    Destination = 3,
    Phase = 4,
}

/// Generator for stream `(ue, purpose)`. Adding UEs never changes the draws of existing ones.
pub fn substream(seed: u64, ue: u32, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ue as u64) << 8) | purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Poisson,
    Periodic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModel {
    pub kind: TrafficKind,
    /// Mean inter-arrival time (Poisson) or period (periodic), SFs.
    pub mean_iat: u64,
    /// Offset of the periodic grid. `None` draws it uniformly from `[0, period)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u64>,
}

impl TrafficModel {
    pub fn poisson(mean_iat: u64) -> Self {
        Self {
            kind: TrafficKind::Poisson,
            mean_iat,
            phase: None,
        }
    }

    pub fn periodic(period: u64, phase: Option<u64>) -> Self {
        Self {
            kind: TrafficKind::Periodic,
            mean_iat: period,
            phase,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: TrafficKind::None,
            mean_iat: 1,
            phase: None,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.mean_iat == 0 {
            return Err(ScubaError::config(format!("{field}.mean_iat"), "must be positive"));
        }
        if let Some(phase) = self.phase {
            if self.kind == TrafficKind::Periodic && phase >= self.mean_iat {
                return Err(ScubaError::config(
                    format!("{field}.phase"),
                    format!("phase {phase} must be below the period {}", self.mean_iat),
                ));
            }
        }
        Ok(())
    }
}

/// Arrival generator owning its random stream.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    model: TrafficModel,
    phase: u64,
    exp: Option<Exp<f64>>,
    rng: ChaCha8Rng,
}

impl TrafficGenerator {
    pub fn new(model: TrafficModel, mut rng: ChaCha8Rng) -> Result<Self> {
        model.validate("traffic")?;
        let phase = match (model.kind, model.phase) {
            (TrafficKind::Periodic, Some(p)) => p,
            (TrafficKind::Periodic, None) => rng.random_range(0..model.mean_iat),
            _ => 0,
        };
        let exp = match model.kind {
            TrafficKind::Poisson => Some(
                Exp::new(1.0 / model.mean_iat as f64)
                    .map_err(|e| ScubaError::config("traffic.mean_iat", e.to_string()))?,
            ),
            _ => None,
        };
        Ok(Self { model, phase, exp, rng })
    }

    pub fn from_seed(model: TrafficModel, seed: u64) -> Result<Self> {
        Self::new(model, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn model(&self) -> &TrafficModel {
        &self.model
    }

    /// Next arrival strictly after `now`; `None` for the empty process.
    pub fn next_arrival(&mut self, now: Sf) -> Option<Sf> {
        match self.model.kind {
            TrafficKind::None => None,
            TrafficKind::Periodic => {
                let period = self.model.mean_iat;
                if now < self.phase {
                    Some(self.phase)
                } else {
                    Some(self.phase + ((now - self.phase) / period + 1) * period)
                }
            }
            TrafficKind::Poisson => {
                let draw = self.exp.as_ref().expect("poisson generator").sample(&mut self.rng);
                Some(now + (draw.ceil() as u64).max(1))
            }
        }
    }
}

/// All arrivals in `(0, horizon]`, strictly increasing.
pub fn generate_trace(model: TrafficModel, seed: u64, horizon: Sf) -> Result<Vec<Sf>> {
    if horizon == 0 {
        return Err(ScubaError::InvalidArgument("horizon must be positive".into()));
    }
    let mut g = TrafficGenerator::from_seed(model, seed)?;
    let mut out = Vec::new();
    let mut now = 0;
    while let Some(t) = g.next_arrival(now) {
        if t > horizon {
            break;
        }
        out.push(t);
        now = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SECOND: u64 = 1000;

    #[test]
    fn periodic_examples() {
        let mut g = TrafficGenerator::from_seed(TrafficModel::periodic(300 * SECOND, Some(0)), 1).unwrap();
        assert_eq!(g.next_arrival(0), Some(300_000));
        assert_eq!(g.next_arrival(300_000), Some(600_000));
        assert_eq!(g.next_arrival(299_999), Some(300_000));
        let trace = generate_trace(TrafficModel::periodic(300 * SECOND, Some(0)), 1, 1_000_000).unwrap();
        assert_eq!(trace, vec![300_000, 600_000, 900_000]);
    }

    #[test]
    fn periodic_with_phase() {
        let mut g = TrafficGenerator::from_seed(TrafficModel::periodic(100, Some(30)), 1).unwrap();
        assert_eq!(g.next_arrival(0), Some(30));
        assert_eq!(g.next_arrival(30), Some(130));
        let bad = TrafficModel::periodic(100, Some(100));
        assert!(bad.validate("t").is_err());
    }

    #[test]
    fn poisson_mean_and_count() {
        let mut g = TrafficGenerator::from_seed(TrafficModel::poisson(30 * SECOND), 7).unwrap();
        let n = 100_000;
        let mut now = 0;
        for _ in 0..n {
            now = g.next_arrival(now).unwrap();
        }
        let mean = now as f64 / n as f64;
        assert!((mean - 30_000.0).abs() < 300.0, "mean {mean}");

        // Count over 1e6 SFs: mean 33.3, sigma 5.8.
        let mut counts = Vec::new();
        for seed in 0..200 {
            counts.push(
                generate_trace(TrafficModel::poisson(30 * SECOND), seed, 1_000_000)
                    .unwrap()
                    .len() as f64,
            );
        }
        let avg = counts.iter().sum::<f64>() / counts.len() as f64;
        assert!((avg - 33.33).abs() < 3.0 * 5.77 / 200f64.sqrt(), "avg {avg}");
        for c in counts {
            assert!((c - 33.33).abs() < 4.0 * 5.77);
        }
    }

    #[test]
    fn determinism() {
        let m = TrafficModel::poisson(1000);
        assert_eq!(
            generate_trace(m, 3, 1_000_000).unwrap(),
            generate_trace(m, 3, 1_000_000).unwrap()
        );
        assert_ne!(
            generate_trace(m, 3, 1_000_000).unwrap(),
            generate_trace(m, 4, 1_000_000).unwrap()
        );
    }

    #[test]
    fn substreams_are_independent() {
        let mut a: ChaCha8Rng = substream(9, 0, StreamPurpose::Cellular);
        let mut b: ChaCha8Rng = substream(9, 1, StreamPurpose::Cellular);
        let mut c: ChaCha8Rng = substream(9, 0, StreamPurpose::Sidelink);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert!(x != y && x != z && y != z);
    }

    #[test]
    fn poisson_ks_against_exponential() {
        // One-sample Kolmogorov-Smirnov, 1% critical value 1.628 / sqrt(n).
        let mean = 30_000.0;
        let mut g = TrafficGenerator::from_seed(TrafficModel::poisson(30_000), 11).unwrap();
        let mut now = 0;
        let mut iats: Vec<f64> = (0..100_000)
            .map(|_| {
                let t = g.next_arrival(now).unwrap();
                let d = (t - now) as f64;
                now = t;
                d
            })
            .collect();
        iats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = iats.len() as f64;
        let mut d_max: f64 = 0.0;
        for (i, &x) in iats.iter().enumerate() {
            // Continuity correction for the ceil-to-SF rounding.
            let cdf = 1.0 - (-(x - 0.5) / mean).exp();
            d_max = d_max
                .max((cdf - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - cdf).abs());
        }
        assert!(d_max < 1.628 / n.sqrt(), "D = {d_max}");
    }
}
