use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::interp::{Interpreter, Value};
use super::{parse, StatechartSpec};
use crate::vla::{
    FarmletContext, FarmletEvent, FarmletPolicy, VlaAction, VlaError, WorkerVlaContext, WorkerVlaEvent, WorkerVlaLogic,
};
use crate::time::SimTime;

/// Default worker agent statechart.
pub const WORKER_VLA_SPEC: &str = include_str!("../../specs/worker_vla.sc");
/// Default farmlet agent statechart.
pub const FARMLET_VLA_SPEC: &str = include_str!("../../specs/farmlet_vla.sc");

pub fn default_worker_spec() -> StatechartSpec {
    parse(WORKER_VLA_SPEC).expect("shipped worker spec parses")
}

pub fn default_farmlet_spec() -> StatechartSpec {
    parse(FARMLET_VLA_SPEC).expect("shipped farmlet spec parses")
}

fn vars(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn err(e: super::RuntimeError) -> VlaError {
    VlaError::Statechart(e.to_string())
}

/// Worker agent driven by a statechart.
///
/// Context: `wr` (bool), `estimate` and `grace` (seconds).
#[derive(Clone, Debug)]
pub struct DslWorkerVla {
    interp: Interpreter,
}

impl DslWorkerVla {
    pub fn new(spec: StatechartSpec) -> Self {
        DslWorkerVla {
            interp: Interpreter::new(spec),
        }
    }
}

impl WorkerVlaLogic for DslWorkerVla {
    fn on_event(&mut self, _now: SimTime, event: WorkerVlaEvent, ctx: &WorkerVlaContext) -> Result<Vec<VlaAction>, VlaError> {
        let c = vars([
            ("wr", Value::Bool(ctx.wr)),
            ("estimate", Value::Num(ctx.estimate.as_secs_f64())),
            ("grace", Value::Num(ctx.grace.as_secs_f64())),
        ]);
        self.interp.step(event.name(), None, &c).map_err(err)
    }

    fn reset(&mut self) {
        self.interp.reset();
    }

    fn state_name(&self) -> &str {
        self.interp.state()
    }
}

/// Farmlet agent policy driven by a statechart.
#[derive(Clone, Debug)]
pub struct DslFarmletPolicy {
    interp: Interpreter,
}

impl DslFarmletPolicy {
    pub fn new(spec: StatechartSpec) -> Self {
        DslFarmletPolicy {
            interp: Interpreter::new(spec),
        }
    }
}

impl FarmletPolicy for DslFarmletPolicy {
    fn decide(&mut self, event: FarmletEvent, ctx: &FarmletContext) -> Result<Vec<VlaAction>, VlaError> {
        let mut c = vars([
            ("wr", Value::Bool(ctx.authority.wr)),
            ("fp", Value::Bool(ctx.authority.fp)),
            ("gp", Value::Bool(ctx.authority.gp)),
            ("gf", Value::Bool(ctx.authority.gf)),
            ("reset_authority", Value::Bool(ctx.reset_authority)),
            ("count", Value::Num(f64::from(ctx.count))),
            ("n_subsume", Value::Num(f64::from(ctx.n_subsume))),
            ("subsumed", Value::Bool(ctx.subsumed)),
            ("occupancy", Value::Num(ctx.occupancy)),
            ("target", Value::Num(ctx.prescale.target_occupancy)),
            ("gain", Value::Num(ctx.prescale.gain)),
            ("max_rate", Value::Num(ctx.prescale.max_rate)),
        ]);
        if let FarmletEvent::Fault { worker, .. } = event {
            c.insert("worker".to_string(), Value::Num(f64::from(worker.0)));
        }
        let code = event.code().map(|c| c.as_str());
        self.interp.step(event.name(), code, &c).map_err(err)
    }

    fn state_name(&self) -> &str {
        self.interp.state()
    }
}
