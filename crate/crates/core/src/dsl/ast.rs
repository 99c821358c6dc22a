use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::vla::{Direction, FaultCode, Level};

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Clamp,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Clamp => "clamp",
            Func::Abs => "abs",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Abs => 1,
            Func::Min | Func::Max => 2,
            Func::Clamp => 3,
        }
    }

    pub(crate) fn from_name(s: &str) -> Option<Func> {
        match s {
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "clamp" => Some(Func::Clamp),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }
}

/// Side-effect-free guard and argument expressions.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Str(String),
    Var(String),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Expr::Var(v) => f.write_str(v),
            Expr::Not(e) => {
                f.write_str("!")?;
                e.write_prec(f, 7)
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let paren = p < min;
                if paren {
                    f.write_str("(")?;
                }
                l.write_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.write_prec(f, p + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write_prec(f, 0)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

/// Names of the fixed action vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    NotifyPa,
    ArmTimer,
    StopTimer,
    ResetPa,
    Escalate,
    SetPrescale,
    Reroute,
    Quarantine,
    Forward,
}

impl ActionName {
    pub const ALL: [ActionName; 9] = [
        ActionName::NotifyPa,
        ActionName::ArmTimer,
        ActionName::StopTimer,
        ActionName::ResetPa,
        ActionName::Escalate,
        ActionName::SetPrescale,
        ActionName::Reroute,
        ActionName::Quarantine,
        ActionName::Forward,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionName::NotifyPa => "notify_pa",
            ActionName::ArmTimer => "arm_timer",
            ActionName::StopTimer => "stop_timer",
            ActionName::ResetPa => "reset_pa",
            ActionName::Escalate => "escalate",
            ActionName::SetPrescale => "set_prescale",
            ActionName::Reroute => "reroute",
            ActionName::Quarantine => "quarantine",
            ActionName::Forward => "forward",
        }
    }

    pub fn from_name(s: &str) -> Option<ActionName> {
        ActionName::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    NotifyPa,
    /// Duration in seconds.
    ArmTimer(Expr),
    StopTimer,
    /// Without an argument the agent's own worker is meant.
    ResetPa(Option<Expr>),
    Escalate(Level, FaultCode),
    SetPrescale(Expr),
    Reroute(Expr, Expr),
    Quarantine(Expr),
    Forward(Direction),
}

impl Action {
    pub fn name(&self) -> ActionName {
        match self {
            Action::NotifyPa => ActionName::NotifyPa,
            Action::ArmTimer(_) => ActionName::ArmTimer,
            Action::StopTimer => ActionName::StopTimer,
            Action::ResetPa(_) => ActionName::ResetPa,
            Action::Escalate(..) => ActionName::Escalate,
            Action::SetPrescale(_) => ActionName::SetPrescale,
            Action::Reroute(..) => ActionName::Reroute,
            Action::Quarantine(_) => ActionName::Quarantine,
            Action::Forward(_) => ActionName::Forward,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name().as_str())?;
        match self {
            Action::NotifyPa | Action::StopTimer | Action::ResetPa(None) => Ok(()),
            Action::ArmTimer(e) | Action::SetPrescale(e) | Action::Quarantine(e) | Action::ResetPa(Some(e)) => {
                write!(f, "({e})")
            }
            Action::Escalate(level, code) => write!(f, "({level}, {code})"),
            Action::Reroute(a, b) => write!(f, "({a}, {b})"),
            Action::Forward(d) => write!(f, "({d})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trigger {
    pub event: String,
    /// Restricts the trigger to messages carrying this code.
    pub code: Option<String>,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.event)?;
        if let Some(c) = &self.code {
            write!(f, ":{c}")?;
        }
        Ok(())
    }
}

/// One transition. `span` is ignored by equality.
#[derive(Clone, Debug)]
pub struct Transition {
    pub from: String,
    pub trigger: Trigger,
    pub guard: Option<Expr>,
    pub to: String,
    pub actions: Vec<Action>,
    pub span: Span,
}

impl PartialEq for Transition {
    fn eq(&self, o: &Self) -> bool {
        self.from == o.from
            && self.trigger == o.trigger
            && self.guard == o.guard
            && self.to == o.to
            && self.actions == o.actions
    }
}

/// A flat statechart. Transitions are kept grouped by source state, in
/// state declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct StatechartSpec {
    pub name: String,
    /// Declared action vocabulary, if any; used for unused-action diagnostics.
    pub uses: Option<Vec<ActionName>>,
    pub initial: String,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
}

impl StatechartSpec {
    pub fn transitions_from<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    pub fn has_state(&self, s: &str) -> bool {
        self.states.iter().any(|x| x == s)
    }
}

/// Canonical text form; parsing it yields an equal spec.
impl fmt::Display for StatechartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "statechart {} {{", self.name)?;
        if let Some(uses) = &self.uses {
            f.write_str("  uses ")?;
            for (i, a) in uses.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(a.as_str())?;
            }
            f.write_str(";\n")?;
        }
        writeln!(f, "  initial {};", self.initial)?;
        for s in &self.states {
            writeln!(f, "  state {s} {{")?;
            for t in self.transitions_from(s) {
                write!(f, "    on {}", t.trigger)?;
                if let Some(g) = &t.guard {
                    write!(f, " [{g}]")?;
                }
                write!(f, " -> {}", t.to)?;
                if !t.actions.is_empty() {
                    f.write_str(" do ")?;
                    for (i, a) in t.actions.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                }
                f.write_str(";\n")?;
            }
            f.write_str("  }\n")?;
        }
        f.write_str("}\n")
    }
}
