use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Behavior, Crossing, FarmError, PaStatus, WorkerState};
use crate::rng::RngStream;
use crate::time::SimTime;

/// Stochastic stand-in for the physics application.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaConfig {
    /// Median per-crossing service time, seconds.
    pub median_service: f64,
    /// Log-space standard deviation of the service time.
    pub dispersion: f64,
    /// Time budget the PA declares for each crossing, seconds.
    pub estimate: f64,
    pub p_overrun: f64,
    /// Overrunning crossings would take `estimate * U(min, max)` if left alone.
    pub overrun_factor_min: f64,
    pub overrun_factor_max: f64,
    pub minimum_bias_accept: f64,
    pub heavy_flavor_accept: f64,
}

impl Default for PaConfig {
    fn default() -> Self {
        PaConfig {
            // mean = 0.77 ms * exp(0.3^2 / 2) ~ 0.8 ms: 80% busy at 1000 crossings/s.
            median_service: 0.000_77,
            dispersion: 0.3,
            estimate: 0.005,
            p_overrun: 0.001,
            overrun_factor_min: 1.5,
            overrun_factor_max: 3.0,
            minimum_bias_accept: 0.01,
            heavy_flavor_accept: 0.65,
        }
    }
}

impl PaConfig {
    pub fn validate(&self) -> Result<(), FarmError> {
        let checks: [(&'static str, f64, bool); 7] = [
            ("median_service", self.median_service, self.median_service > 0.0),
            ("dispersion", self.dispersion, self.dispersion >= 0.0),
            ("estimate", self.estimate, self.estimate > 0.0),
            ("p_overrun", self.p_overrun, (0.0..=1.0).contains(&self.p_overrun)),
            (
                "overrun_factor_min",
                self.overrun_factor_min,
                self.overrun_factor_min > 1.0 && self.overrun_factor_min <= self.overrun_factor_max,
            ),
            (
                "minimum_bias_accept",
                self.minimum_bias_accept,
                (0.0..=1.0).contains(&self.minimum_bias_accept),
            ),
            (
                "heavy_flavor_accept",
                self.heavy_flavor_accept,
                (0.0..=1.0).contains(&self.heavy_flavor_accept),
            ),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(FarmError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    pub fn estimate_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.estimate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

/// Result of handing a crossing to the PA.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaOutcome {
    /// Completes within budget after `service`.
    Accept { service: SimTime },
    Reject { service: SimTime },
    /// Never completes without intervention.
    Hang,
    /// Would complete after `duration`, which exceeds the declared estimate.
    Overrun { duration: SimTime, verdict: Verdict },
}

/// Runs the PA model on one crossing.
///
/// Four values are drawn from `rng` on every call (service time, overrun coin,
/// overrun length, accept coin) so the stream position never depends on the
/// crossing's class.
pub fn pa_process(
    worker: &WorkerState,
    crossing: &Crossing,
    cfg: &PaConfig,
    rng: &mut RngStream,
) -> Result<PaOutcome, FarmError> {
    match worker.pa_status {
        PaStatus::Idle => {}
        PaStatus::Hung => return Err(FarmError::WorkerHung(worker.id)),
        PaStatus::Processing | PaStatus::Restarting => return Err(FarmError::WorkerBusy(worker.id)),
    }

    let service = match LogNormal::new(libm::log(cfg.median_service), cfg.dispersion) {
        Ok(d) => d.sample(rng),
        Err(_) => cfg.median_service,
    };
    let overrun = rng.bernoulli(cfg.p_overrun);
    let factor = cfg.overrun_factor_min + rng.uniform() * (cfg.overrun_factor_max - cfg.overrun_factor_min);
    let accept_p = if crossing.heavy_flavor {
        cfg.heavy_flavor_accept
    } else {
        cfg.minimum_bias_accept
    };
    let accept_coin = rng.bernoulli(accept_p);

    if crossing.corrupt {
        match worker.behavior {
            Behavior::RunPoor => return Ok(PaOutcome::Hang),
            Behavior::RunWell => {
                return Ok(PaOutcome::Reject {
                    service: clamp_service(service, cfg),
                })
            }
        }
    }

    let verdict = if accept_coin { Verdict::Accept } else { Verdict::Reject };
    if overrun {
        return Ok(PaOutcome::Overrun {
            duration: SimTime::from_secs_f64(cfg.estimate * factor),
            verdict,
        });
    }
    let service = clamp_service(service, cfg);
    Ok(match verdict {
        Verdict::Accept => PaOutcome::Accept { service },
        Verdict::Reject => PaOutcome::Reject { service },
    })
}

// In-budget crossings finish strictly before the deadline.
fn clamp_service(service: f64, cfg: &PaConfig) -> SimTime {
    let cap = cfg.estimate * 0.99;
    SimTime::from_secs_f64(if service > cap { cap } else { service }).max(SimTime::from_nanos(1))
}
