use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::ast::{BinOp, Expr, Span, StatechartSpec, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Unreachable,
    Nondeterministic,
    UnusedAction,
    /// Guard too large for the overlap check; treated as overlapping.
    GuardTooComplex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Option<Span>,
}

impl core::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.span {
            Some(span) => write!(f, "{level} at {span}: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

/// Atoms beyond this count make the overlap check give up (conservatively).
const MAX_ATOMS: usize = 16;

/// Reports unreachable states and unused declared actions (warnings) and
/// overlapping transitions on the same state and trigger (errors).
pub fn validate(spec: &StatechartSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue = VecDeque::from([spec.initial.as_str()]);
    seen.insert(&spec.initial);
    while let Some(s) = queue.pop_front() {
        for t in spec.transitions_from(s) {
            if seen.insert(&t.to) {
                queue.push_back(&t.to);
            }
        }
    }
    for s in &spec.states {
        if !seen.contains(s.as_str()) {
            out.push(Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::Unreachable,
                message: format!("state `{s}` is unreachable from `{}`", spec.initial),
                span: None,
            });
        }
    }

    let ts = &spec.transitions;
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            let (a, b) = (&ts[i], &ts[j]);
            if a.from != b.from || a.trigger.event != b.trigger.event {
                continue;
            }
            if let (Some(ca), Some(cb)) = (&a.trigger.code, &b.trigger.code) {
                if ca != cb {
                    continue;
                }
            }
            match guards_overlap(a, b) {
                Overlap::No => {}
                Overlap::Yes => out.push(Diagnostic {
                    severity: Severity::Error,
                    kind: DiagnosticKind::Nondeterministic,
                    message: format!(
                        "transitions at {} and {} on `{}` from `{}` can be enabled together",
                        a.span, b.span, a.trigger, a.from
                    ),
                    span: Some(b.span),
                }),
                Overlap::Unknown => out.push(Diagnostic {
                    severity: Severity::Error,
                    kind: DiagnosticKind::GuardTooComplex,
                    message: format!(
                        "guards at {} and {} are too complex to prove disjoint",
                        a.span, b.span
                    ),
                    span: Some(b.span),
                }),
            }
        }
    }

    if let Some(uses) = &spec.uses {
        for name in uses {
            let used = spec.transitions.iter().flat_map(|t| &t.actions).any(|a| a.name() == *name);
            if !used {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    kind: DiagnosticKind::UnusedAction,
                    message: format!("action `{name}` is declared but never used"),
                    span: None,
                });
            }
        }
    }
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

enum Overlap {
    Yes,
    No,
    Unknown,
}

fn guards_overlap(a: &Transition, b: &Transition) -> Overlap {
    let t = Expr::Bool(true);
    let ga = a.guard.as_ref().unwrap_or(&t);
    let gb = b.guard.as_ref().unwrap_or(&t);
    let both = Expr::bin(BinOp::And, ga.clone(), gb.clone());
    match satisfiable(&both) {
        Some(true) => Overlap::Yes,
        Some(false) => Overlap::No,
        None => Overlap::Unknown,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Const {
    Num(f64),
    Bool(bool),
    Str(String),
}

/// A comparison `key op constant`. `key` is a variable or a normalized
/// variable difference `a - b`.
#[derive(Clone, Debug, PartialEq)]
struct Atom {
    key: String,
    op: BinOp,
    rhs: Const,
}

fn flip(op: BinOp) -> BinOp {
    match op {
        BinOp::Lt => BinOp::Gt,
        BinOp::Le => BinOp::Ge,
        BinOp::Gt => BinOp::Lt,
        BinOp::Ge => BinOp::Le,
        o => o,
    }
}

fn negate(op: BinOp) -> BinOp {
    match op {
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        BinOp::Lt => BinOp::Ge,
        BinOp::Le => BinOp::Gt,
        BinOp::Gt => BinOp::Le,
        BinOp::Ge => BinOp::Lt,
        o => o,
    }
}

fn as_const(e: &Expr) -> Option<Const> {
    match e {
        Expr::Num(n) => Some(Const::Num(*n)),
        Expr::Bool(b) => Some(Const::Bool(*b)),
        Expr::Str(s) => Some(Const::Str(s.clone())),
        _ => None,
    }
}

/// Boolean skeleton of a guard; leaves index into an atom table.
enum Skel {
    Lit(bool),
    Atom(usize),
    /// Opaque leaf: unconstrained.
    Free(usize),
    Not(alloc::boxed::Box<Skel>),
    And(alloc::boxed::Box<Skel>, alloc::boxed::Box<Skel>),
    Or(alloc::boxed::Box<Skel>, alloc::boxed::Box<Skel>),
}

struct Abstraction {
    atoms: Vec<Atom>,
    free: Vec<String>,
}

impl Abstraction {
    fn intern(&mut self, atom: Atom) -> usize {
        if let Some(i) = self.atoms.iter().position(|a| *a == atom) {
            return i;
        }
        self.atoms.push(atom);
        self.atoms.len() - 1
    }

    fn free(&mut self, e: &Expr) -> usize {
        let k = format!("{e}");
        if let Some(i) = self.free.iter().position(|f| *f == k) {
            return i;
        }
        self.free.push(k);
        self.free.len() - 1
    }

    fn skel(&mut self, e: &Expr) -> Skel {
        use alloc::boxed::Box;
        match e {
            Expr::Bool(b) => Skel::Lit(*b),
            Expr::Var(v) => Skel::Atom(self.intern(Atom {
                key: v.clone(),
                op: BinOp::Eq,
                rhs: Const::Bool(true),
            })),
            Expr::Not(x) => Skel::Not(Box::new(self.skel(x))),
            Expr::Bin(BinOp::And, l, r) => Skel::And(Box::new(self.skel(l)), Box::new(self.skel(r))),
            Expr::Bin(BinOp::Or, l, r) => Skel::Or(Box::new(self.skel(l)), Box::new(self.skel(r))),
            Expr::Bin(op, l, r) if op.is_comparison() => {
                let atom = match (&**l, &**r) {
                    (Expr::Var(v), c) if as_const(c).is_some() => as_const(c).map(|rhs| Atom {
                        key: v.clone(),
                        op: *op,
                        rhs,
                    }),
                    (c, Expr::Var(v)) if as_const(c).is_some() => as_const(c).map(|rhs| Atom {
                        key: v.clone(),
                        op: flip(*op),
                        rhs,
                    }),
                    (Expr::Var(a), Expr::Var(b)) if a != b => {
                        // a op b  <=>  (a - b) op 0, with a canonical orientation
                        let (x, y, o) = if a < b { (a, b, *op) } else { (b, a, flip(*op)) };
                        Some(Atom {
                            key: format!("{x} - {y}"),
                            op: o,
                            rhs: Const::Num(0.0),
                        })
                    }
                    _ => None,
                };
                match atom {
                    Some(a) => Skel::Atom(self.intern(a)),
                    None => Skel::Free(self.free(e)),
                }
            }
            _ => Skel::Free(self.free(e)),
        }
    }
}

fn eval_skel(s: &Skel, atoms: u32, free: u32) -> bool {
    match s {
        Skel::Lit(b) => *b,
        Skel::Atom(i) => atoms >> i & 1 == 1,
        Skel::Free(i) => free >> i & 1 == 1,
        Skel::Not(x) => !eval_skel(x, atoms, free),
        Skel::And(l, r) => eval_skel(l, atoms, free) && eval_skel(r, atoms, free),
        Skel::Or(l, r) => eval_skel(l, atoms, free) || eval_skel(r, atoms, free),
    }
}

/// Whether some context makes `e` true. `None` when the guard has too many atoms.
fn satisfiable(e: &Expr) -> Option<bool> {
    let mut abs = Abstraction {
        atoms: Vec::new(),
        free: Vec::new(),
    };
    let skel = abs.skel(e);
    let (na, nf) = (abs.atoms.len(), abs.free.len());
    if na + nf > MAX_ATOMS {
        return None;
    }
    for assign in 0u32..(1u32 << na) {
        let any_free = (0u32..(1u32 << nf)).any(|fa| eval_skel(&skel, assign, fa));
        if any_free && consistent(&abs.atoms, assign) {
            return Some(true);
        }
    }
    Some(false)
}

/// Checks a truth assignment of atoms against the value domains.
fn consistent(atoms: &[Atom], assign: u32) -> bool {
    let mut by_key: BTreeMap<&str, Vec<(BinOp, &Const)>> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        let op = if assign >> i & 1 == 1 { a.op } else { negate(a.op) };
        by_key.entry(a.key.as_str()).or_default().push((op, &a.rhs));
    }
    by_key.values().all(|cs| key_consistent(cs))
}

fn key_consistent(cs: &[(BinOp, &Const)]) -> bool {
    let bools: Vec<(BinOp, bool)> = cs
        .iter()
        .filter_map(|(o, c)| match c {
            Const::Bool(b) => Some((*o, *b)),
            _ => None,
        })
        .collect();
    let strs: Vec<(BinOp, &str)> = cs
        .iter()
        .filter_map(|(o, c)| match c {
            Const::Str(s) => Some((*o, s.as_str())),
            _ => None,
        })
        .collect();
    let nums: Vec<(BinOp, f64)> = cs
        .iter()
        .filter_map(|(o, c)| match c {
            Const::Num(n) => Some((*o, *n)),
            _ => None,
        })
        .collect();
    bool_ok(&bools) && str_ok(&strs) && num_ok(&nums)
}

fn bool_ok(cs: &[(BinOp, bool)]) -> bool {
    [false, true].into_iter().any(|v| {
        cs.iter().all(|(op, c)| match op {
            BinOp::Eq => v == *c,
            BinOp::Ne => v != *c,
            // ordering on booleans is a runtime type error; never enabled
            _ => false,
        })
    })
}

fn str_ok(cs: &[(BinOp, &str)]) -> bool {
    let eqs: BTreeSet<&str> = cs.iter().filter(|(o, _)| *o == BinOp::Eq).map(|(_, s)| *s).collect();
    if cs.iter().any(|(o, _)| !matches!(o, BinOp::Eq | BinOp::Ne)) {
        return false;
    }
    match eqs.len() {
        0 => true,
        1 => {
            let v = eqs.iter().next().copied().unwrap_or_default();
            !cs.iter().any(|(o, s)| *o == BinOp::Ne && *s == v)
        }
        _ => false,
    }
}

/// Real-interval feasibility with point exclusions.
fn num_ok(cs: &[(BinOp, f64)]) -> bool {
    let mut lo = f64::NEG_INFINITY;
    let mut lo_strict = false;
    let mut hi = f64::INFINITY;
    let mut hi_strict = false;
    let mut point: Option<f64> = None;
    let mut excluded: Vec<f64> = Vec::new();
    for &(op, c) in cs {
        match op {
            BinOp::Eq => {
                if point.is_some_and(|p| p != c) {
                    return false;
                }
                point = Some(c);
            }
            BinOp::Ne => excluded.push(c),
            BinOp::Gt | BinOp::Ge => {
                let strict = op == BinOp::Gt;
                if c > lo || (c == lo && strict) {
                    lo = c;
                    lo_strict = strict;
                }
            }
            BinOp::Lt | BinOp::Le => {
                let strict = op == BinOp::Lt;
                if c < hi || (c == hi && strict) {
                    hi = c;
                    hi_strict = strict;
                }
            }
            _ => {}
        }
    }
    let within = |v: f64| (v > lo || (v == lo && !lo_strict)) && (v < hi || (v == hi && !hi_strict));
    if let Some(p) = point {
        return within(p) && !excluded.contains(&p);
    }
    if lo < hi {
        // an open interval has infinitely many points; finitely many exclusions cannot empty it
        return true;
    }
    lo == hi && !lo_strict && !hi_strict && !excluded.contains(&lo)
}

#[cfg(test)]
mod tests {
    use super::super::parse_expr;
    use super::*;

    fn sat(s: &str) -> bool {
        satisfiable(&parse_expr(s).unwrap()).unwrap()
    }

    #[test]
    fn boolean_atoms() {
        assert!(sat("wr"));
        assert!(!sat("wr && !wr"));
        assert!(!sat("wr == true && wr == false"));
        assert!(sat("wr || !wr"));
    }

    #[test]
    fn numeric_intervals() {
        assert!(!sat("count >= 3 && count < 3"));
        assert!(sat("count >= 3 && count <= 3"));
        assert!(!sat("count > 3 && count <= 3"));
        assert!(!sat("count == 2 && count != 2"));
        assert!(sat("count > 1 && count < 2 && count != 1.5"));
        assert!(!sat("3 < count && count < 1"));
    }

    #[test]
    fn variable_differences() {
        assert!(!sat("count >= n && count < n"));
        assert!(!sat("count >= n && n > count"));
        assert!(sat("count >= n && n >= count"));
    }

    #[test]
    fn strings() {
        assert!(!sat("code == \"e1\" && code == \"e2\""));
        assert!(sat("code != \"e1\" && code != \"e2\""));
        assert!(!sat("code == \"e1\" && code != \"e1\""));
    }

    #[test]
    fn opaque_terms_are_unconstrained() {
        // distinct opaque terms are independent, so this is (conservatively) satisfiable
        assert!(sat("min(a, b) > 1 && min(a, b) < 0"));
        assert!(!sat("min(a, b) > 1 && !(min(a, b) > 1)"));
    }
}
