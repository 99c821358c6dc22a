use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Aggregate Level-2/Level-3 pass probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamConfig {
    pub l2_pass: f64,
    pub l3_pass: f64,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        // L2 cuts the rate by 10, L3 by a further 2.
        DownstreamConfig {
            l2_pass: 0.1,
            l3_pass: 0.5,
        }
    }
}

/// Bernoulli thinning of the L1-accepted stream.
#[derive(Clone, Debug)]
pub struct DownstreamFilter {
    cfg: DownstreamConfig,
    rng: RngStream,
}

impl DownstreamFilter {
    pub fn new(cfg: DownstreamConfig, rng: RngStream) -> Self {
        DownstreamFilter { cfg, rng }
    }

    /// `(passed L2, passed L3)` for one L1-accepted event.
    pub fn filter_one(&mut self) -> (bool, bool) {
        let l2 = self.rng.bernoulli(self.cfg.l2_pass);
        let l3 = l2 && self.rng.bernoulli(self.cfg.l3_pass);
        (l2, l3)
    }
}

/// Thins `accepted_l1` events, returning `(l2_passed, l3_passed)`.
pub fn downstream_filter(filter: &mut DownstreamFilter, accepted_l1: u64) -> (u64, u64) {
    let mut l2 = 0;
    let mut l3 = 0;
    for _ in 0..accepted_l1 {
        let (a, b) = filter.filter_one();
        l2 += u64::from(a);
        l3 += u64::from(b);
    }
    (l2, l3)
}
