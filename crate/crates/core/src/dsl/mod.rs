//! The statechart mitigation language.
//!
//! Grammar (`#` and `//` start line comments):
//!
//! ```text
//! spec       := "statechart" IDENT "{" uses? "initial" IDENT ";" state* "}"
//! uses       := "uses" ACTION ("," ACTION)* ";"
//! state      := "state" IDENT "{" transition* "}"
//! transition := "on" IDENT (":" IDENT)? ("[" expr "]")? "->" IDENT
//!               ("do" action ("," action)*)? ";"
//! action     := notify_pa | stop_timer | arm_timer(expr) | reset_pa | reset_pa(expr)
//!             | escalate(LEVEL, CODE) | set_prescale(expr) | reroute(expr, expr)
//!             | quarantine(expr) | forward(up | down)
//! expr       := expr op expr | "!" expr | "(" expr ")" | NUMBER | "-" NUMBER
//!             | STRING | true | false | IDENT | FUNC "(" expr, ... ")"
//! ```
//!
//! Binary operators, loosest first: `||`, `&&`, `== !=`, `< <= > >=`, `+ -`,
//! `* /`; all left-associative. Functions: `min`, `max`, `clamp`, `abs`.
//! The trigger `fault:e1` matches event `fault` carrying code `e1`; guards
//! also see the built-in variables `event` and `code`.
//!
//! Statecharts are flat. A step takes the unique enabled transition; more
//! than one is an error, which [`validate`] reports statically.

mod ast;
mod interp;
mod lexer;
mod parser;
mod policies;
mod validate;

use alloc::string::String;
use core::fmt;

use thiserror::Error;

pub use ast::{Action, ActionName, BinOp, Expr, Func, Span, StatechartSpec, Transition, Trigger};
pub use interp::{eval, resolve, step, Context, Interpreter, Value};
pub use parser::{parse, parse_expr};
pub use policies::{
    default_farmlet_spec, default_worker_spec, DslFarmletPolicy, DslWorkerVla, FARMLET_VLA_SPEC, WORKER_VLA_SPEC,
};
pub use validate::{has_errors, validate, Diagnostic, DiagnosticKind, Severity};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownAction(String),
    DuplicateState(String),
    UndefinedState(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub span: Span,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.span)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownAction(a) => write!(f, "unknown action `{a}`"),
            ParseErrorKind::DuplicateState(s) => write!(f, "duplicate state `{s}`"),
            ParseErrorKind::UndefinedState(s) => write!(f, "undefined state `{s}`"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("bad action argument: {0}")]
    BadArgument(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("{enabled} transitions enabled in `{state}` on `{event}`")]
    Nondeterministic { state: String, event: String, enabled: usize },
}
