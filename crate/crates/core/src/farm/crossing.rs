use alloc::vec::Vec;


use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::FarmError;
use crate::rng::RngStream;
use crate::time::SimTime;

/// One beam crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub id: u64,
    pub n_interactions: u32,
    pub size_bytes: u64,
    pub corrupt: bool,
    pub heavy_flavor: bool,
}

/// Operator-adjustable generation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    /// Crossings per virtual second.
    pub crossing_rate: f64,
    pub mean_interactions: f64,
    pub mean_size_bytes: f64,
    pub error_rate: f64,
    pub heavy_flavor_fraction: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            // ~1000 crossings/s per active worker, the same per-processor
            // load as 2.53 MHz spread over ~2500 processors.
            crossing_rate: 10_000.0,
            mean_interactions: 6.0,
            mean_size_bytes: 200_000.0,
            error_rate: 0.0,
            heavy_flavor_fraction: 0.1,
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<(), FarmError> {
        fn check(name: &'static str, value: f64, ok: bool) -> Result<(), FarmError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(FarmError::InvalidParam { name, value })
            }
        }
        check("crossing_rate", self.crossing_rate, self.crossing_rate >= 0.0)?;
        check("mean_interactions", self.mean_interactions, self.mean_interactions >= 0.0)?;
        check("mean_size_bytes", self.mean_size_bytes, self.mean_size_bytes >= 1.0)?;
        check("error_rate", self.error_rate, (0.0..=1.0).contains(&self.error_rate))?;
        check(
            "heavy_flavor_fraction",
            self.heavy_flavor_fraction,
            (0.0..=1.0).contains(&self.heavy_flavor_fraction),
        )
    }
}

/// Stateful crossing source.
///
/// The count per call is `crossing_rate * dt` plus the fractional remainder
/// carried over from earlier calls, so the long-run count is exact.
#[derive(Clone, Debug)]
pub struct CrossingGenerator {
    next_id: u64,
    carry: f64,
    rng: RngStream,
    poisson: Option<(f64, Poisson<f64>)>,
}

impl CrossingGenerator {
    pub fn new(rng: RngStream) -> Self {
        CrossingGenerator {
            next_id: 0,
            carry: 0.0,
            rng,
            poisson: None,
        }
    }

    pub fn generated(&self) -> u64 {
        self.next_id
    }

    pub fn generate(&mut self, params: &ExperimentParams, dt: SimTime) -> Vec<Crossing> {
        let expected = params.crossing_rate * dt.as_secs_f64() + self.carry;
        // tolerance absorbs rounding in the accumulated carry
        let n = libm::floor(expected + 1e-9);
        self.carry = expected - n;
        let n = n as usize;
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }

        let poisson = if params.mean_interactions > 0.0 {
            match &self.poisson {
                Some((mean, dist)) if *mean == params.mean_interactions => Some(*dist),
                _ => {
                    let dist = Poisson::new(params.mean_interactions).ok();
                    if let Some(d) = dist {
                        self.poisson = Some((params.mean_interactions, d));
                    }
                    dist
                }
            }
        } else {
            None
        };
        let sigma = 0.1 * params.mean_size_bytes;
        let size = Normal::new(params.mean_size_bytes, sigma).ok();

        for _ in 0..n {
            let n_interactions = poisson.map_or(0, |p| p.sample(&mut self.rng) as u32);
            let raw = size.map_or(params.mean_size_bytes, |d| d.sample(&mut self.rng));
            let size_bytes = libm::round(raw).max(1.0) as u64;
            let corrupt = self.rng.bernoulli(params.error_rate);
            let heavy_flavor = self.rng.bernoulli(params.heavy_flavor_fraction);
            out.push(Crossing {
                id: self.next_id,
                n_interactions,
                size_bytes,
                corrupt,
                heavy_flavor,
            });
            self.next_id += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(seed: u64) -> CrossingGenerator {
        CrossingGenerator::new(RngStream::new(seed, "generation"))
    }

    #[test]
    fn zero_rate_generates_nothing() {
        let params = ExperimentParams {
            crossing_rate: 0.0,
            ..ExperimentParams::default()
        };
        assert!(gen(1).generate(&params, SimTime::from_secs(10)).is_empty());
    }

    #[test]
    fn error_rate_one_corrupts_everything() {
        let params = ExperimentParams {
            error_rate: 1.0,
            ..ExperimentParams::default()
        };
        let xs = gen(1).generate(&params, SimTime::from_millis(100));
        assert_eq!(xs.len(), 1000);
        assert!(xs.iter().all(|c| c.corrupt));
    }

    #[test]
    fn fractional_counts_carry_over() {
        let params = ExperimentParams {
            crossing_rate: 2500.0,
            ..ExperimentParams::default()
        };
        let mut g = gen(3);
        let total: usize = (0..1000).map(|_| g.generate(&params, SimTime::from_micros(300)).len()).sum();
        // 2500/s * 0.3 ms = 0.75 per call
        assert_eq!(total, 750);
    }

    #[test]
    fn ids_are_unique_and_sizes_positive() {
        let params = ExperimentParams {
            mean_size_bytes: 1.0,
            ..ExperimentParams::default()
        };
        let mut g = gen(9);
        let xs = g.generate(&params, SimTime::from_millis(50));
        assert!(xs.windows(2).all(|w| w[1].id == w[0].id + 1));
        assert!(xs.iter().all(|c| c.size_bytes >= 1));
    }

    #[test]
    fn interaction_mean_over_a_million_crossings() {
        let params = ExperimentParams {
            crossing_rate: 1_000_000.0,
            ..ExperimentParams::default()
        };
        let xs = gen(42).generate(&params, SimTime::from_secs(1));
        assert_eq!(xs.len(), 1_000_000);
        let mean = xs.iter().map(|c| f64::from(c.n_interactions)).sum::<f64>() / xs.len() as f64;
        assert!((5.97..=6.03).contains(&mean), "mean {mean}");
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = ExperimentParams {
            error_rate: 1.5,
            ..ExperimentParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(ExperimentParams::default().validate().is_ok());
    }
}
