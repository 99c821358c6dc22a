use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::{Action, BinOp, Expr, Func, StatechartSpec};
use super::RuntimeError;
use crate::farm::{FarmletId, WorkerId};
use crate::time::SimTime;
use crate::vla::VlaAction;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
        }
    }
}

/// Named variables visible to guards and action arguments.
pub trait Context {
    fn lookup(&self, name: &str) -> Option<Value>;
}

impl Context for BTreeMap<String, Value> {
    fn lookup(&self, name: &str) -> Option<Value> {
        self.get(name).cloned()
    }
}

/// Adds the built-in `event` and `code` variables on top of a context.
struct WithEvent<'a> {
    inner: &'a dyn Context,
    event: &'a str,
    code: Option<&'a str>,
}

impl Context for WithEvent<'_> {
    fn lookup(&self, name: &str) -> Option<Value> {
        match name {
            "event" => Some(Value::Str(String::from(self.event))),
            "code" => Some(Value::Str(String::from(self.code.unwrap_or("")))),
            _ => self.inner.lookup(name),
        }
    }
}

fn num(v: Value, what: &str) -> Result<f64, RuntimeError> {
    match v {
        Value::Num(n) => Ok(n),
        other => Err(RuntimeError::TypeMismatch(format!("{what}: expected number, found {}", other.type_name()))),
    }
}

fn boolean(v: Value, what: &str) -> Result<bool, RuntimeError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(RuntimeError::TypeMismatch(format!("{what}: expected bool, found {}", other.type_name()))),
    }
}

pub fn eval(e: &Expr, ctx: &dyn Context) -> Result<Value, RuntimeError> {
    Ok(match e {
        Expr::Num(n) => Value::Num(*n),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Str(s) => Value::Str(s.clone()),
        Expr::Var(v) => ctx.lookup(v).ok_or_else(|| RuntimeError::UnknownVariable(v.clone()))?,
        Expr::Not(x) => Value::Bool(!boolean(eval(x, ctx)?, "!")?),
        Expr::Bin(BinOp::And, l, r) => {
            // short-circuit: the right side is not evaluated when the left decides
            Value::Bool(boolean(eval(l, ctx)?, "&&")? && boolean(eval(r, ctx)?, "&&")?)
        }
        Expr::Bin(BinOp::Or, l, r) => Value::Bool(boolean(eval(l, ctx)?, "||")? || boolean(eval(r, ctx)?, "||")?),
        Expr::Bin(op @ (BinOp::Eq | BinOp::Ne), l, r) => {
            let (a, b) = (eval(l, ctx)?, eval(r, ctx)?);
            if core::mem::discriminant(&a) != core::mem::discriminant(&b) {
                return Err(RuntimeError::TypeMismatch(format!(
                    "cannot compare {} with {}",
                    a.type_name(),
                    b.type_name()
                )));
            }
            Value::Bool((a == b) == (*op == BinOp::Eq))
        }
        Expr::Bin(op, l, r) => {
            let sym = op.symbol();
            let (a, b) = (num(eval(l, ctx)?, sym)?, num(eval(r, ctx)?, sym)?);
            match op {
                BinOp::Lt => Value::Bool(a < b),
                BinOp::Le => Value::Bool(a <= b),
                BinOp::Gt => Value::Bool(a > b),
                BinOp::Ge => Value::Bool(a >= b),
                BinOp::Add => Value::Num(a + b),
                BinOp::Sub => Value::Num(a - b),
                BinOp::Mul => Value::Num(a * b),
                BinOp::Div => Value::Num(a / b),
                _ => unreachable!("logical and equality operators handled above"),
            }
        }
        Expr::Call(f, args) => {
            let mut xs = Vec::with_capacity(args.len());
            for a in args {
                xs.push(num(eval(a, ctx)?, f.name())?);
            }
            Value::Num(match (f, xs.as_slice()) {
                (Func::Abs, [x]) => libm::fabs(*x),
                (Func::Min, [a, b]) => {
                    if b < a {
                        *b
                    } else {
                        *a
                    }
                }
                (Func::Max, [a, b]) => {
                    if b > a {
                        *b
                    } else {
                        *a
                    }
                }
                (Func::Clamp, [x, lo, hi]) => {
                    if x < lo {
                        *lo
                    } else if x > hi {
                        *hi
                    } else {
                        *x
                    }
                }
                _ => return Err(RuntimeError::TypeMismatch(format!("{}: wrong argument count", f.name()))),
            })
        }
    })
}

/// Evaluates an action's arguments into a concrete agent action.
pub fn resolve(action: &Action, ctx: &dyn Context) -> Result<VlaAction, RuntimeError> {
    let id = |e: &Expr, what: &str| -> Result<u32, RuntimeError> {
        let n = num(eval(e, ctx)?, what)?;
        if n < 0.0 || libm::trunc(n) != n || n > f64::from(u32::MAX) {
            return Err(RuntimeError::BadArgument(format!("{what}: {n} is not an id")));
        }
        Ok(n as u32)
    };
    Ok(match action {
        Action::NotifyPa => VlaAction::NotifyPa,
        Action::StopTimer => VlaAction::StopTimer,
        Action::ArmTimer(e) => {
            let secs = num(eval(e, ctx)?, "arm_timer")?;
            if secs.is_nan() || secs <= 0.0 || !secs.is_finite() {
                return Err(RuntimeError::BadArgument(format!("arm_timer: duration {secs}")));
            }
            VlaAction::ArmTimer {
                duration: SimTime::from_secs_f64(secs),
            }
        }
        Action::ResetPa(None) => VlaAction::ResetPa { worker: None },
        Action::ResetPa(Some(e)) => VlaAction::ResetPa {
            worker: Some(WorkerId(id(e, "reset_pa")?)),
        },
        Action::Escalate(level, code) => VlaAction::Escalate {
            level: *level,
            code: *code,
        },
        Action::SetPrescale(e) => {
            let rate = num(eval(e, ctx)?, "set_prescale")?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(RuntimeError::BadArgument(format!("set_prescale: rate {rate} outside [0, 1]")));
            }
            VlaAction::SetPrescale { rate }
        }
        Action::Reroute(a, b) => VlaAction::Reroute {
            from: FarmletId(id(a, "reroute")?),
            to: FarmletId(id(b, "reroute")?),
        },
        Action::Quarantine(e) => VlaAction::Quarantine {
            worker: WorkerId(id(e, "quarantine")?),
        },
        Action::Forward(d) => VlaAction::Forward { direction: *d },
    })
}

/// One interpreter step from `current`.
///
/// Exactly one enabled transition is taken; none leaves the state unchanged
/// with no actions; several is a runtime error. Action arguments are
/// evaluated in the context as it was before the step.
pub fn step(
    spec: &StatechartSpec,
    current: &str,
    event: &str,
    code: Option<&str>,
    ctx: &dyn Context,
) -> Result<(String, Vec<VlaAction>), RuntimeError> {
    if !spec.has_state(current) {
        return Err(RuntimeError::UnknownState(String::from(current)));
    }
    let full = WithEvent { inner: ctx, event, code };
    let mut enabled = Vec::new();
    for t in spec.transitions_from(current) {
        if t.trigger.event != event {
            continue;
        }
        if let Some(c) = &t.trigger.code {
            if Some(c.as_str()) != code {
                continue;
            }
        }
        let on = match &t.guard {
            None => true,
            Some(g) => boolean(eval(g, &full)?, "guard")?,
        };
        if on {
            enabled.push(t);
        }
    }
    match enabled.as_slice() {
        [] => Ok((String::from(current), Vec::new())),
        [t] => {
            let mut actions = Vec::with_capacity(t.actions.len());
            for a in &t.actions {
                actions.push(resolve(a, &full)?);
            }
            Ok((t.to.clone(), actions))
        }
        many => Err(RuntimeError::Nondeterministic {
            state: String::from(current),
            event: String::from(event),
            enabled: many.len(),
        }),
    }
}

/// A spec plus its current state.
#[derive(Clone, Debug)]
pub struct Interpreter {
    spec: StatechartSpec,
    state: String,
}

impl Interpreter {
    pub fn new(spec: StatechartSpec) -> Self {
        let state = spec.initial.clone();
        Interpreter { spec, state }
    }

    pub fn spec(&self) -> &StatechartSpec {
        &self.spec
    }

    pub fn state(&self) -> &str {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = self.spec.initial.clone();
    }

    pub fn step(&mut self, event: &str, code: Option<&str>, ctx: &dyn Context) -> Result<Vec<VlaAction>, RuntimeError> {
        let (next, actions) = step(&self.spec, &self.state, event, code, ctx)?;
        self.state = next;
        Ok(actions)
    }
}
