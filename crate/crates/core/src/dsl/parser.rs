use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use super::ast::{Action, ActionName, BinOp, Expr, Func, StatechartSpec, Span, Transition, Trigger};
use super::lexer::{tokenize, Tok};
use super::{ParseError, ParseErrorKind};
use crate::vla::{Direction, FaultCode, Level};

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: String) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            kind: ParseErrorKind::Syntax(msg),
        })
    }

    fn expect(&mut self, want: Tok) -> PResult<Span> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            self.err(format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().1;
                Ok((s, sp))
            }
            other => self.err(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            other => self.err(format!("expected `{kw}`, found {}", other.describe())),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn spec(&mut self) -> PResult<StatechartSpec> {
        self.keyword("statechart")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;

        let mut uses = None;
        if self.at_keyword("uses") {
            self.bump();
            let mut list = Vec::new();
            loop {
                let (a, sp) = self.ident()?;
                let an = ActionName::from_name(&a).ok_or(ParseError {
                    span: sp,
                    kind: ParseErrorKind::UnknownAction(a),
                })?;
                list.push(an);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::Semi)?;
            uses = Some(list);
        }

        self.keyword("initial")?;
        let (initial, initial_span) = self.ident()?;
        self.expect(Tok::Semi)?;

        let mut states: Vec<String> = Vec::new();
        let mut transitions = Vec::new();
        while self.at_keyword("state") {
            self.bump();
            let (sname, sp) = self.ident()?;
            if states.contains(&sname) {
                return Err(ParseError {
                    span: sp,
                    kind: ParseErrorKind::DuplicateState(sname),
                });
            }
            states.push(sname.clone());
            self.expect(Tok::LBrace)?;
            while self.at_keyword("on") {
                transitions.push(self.transition(&sname)?);
            }
            self.expect(Tok::RBrace)?;
        }
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return self.err(format!("expected end of input, found {}", self.peek().describe()));
        }

        if !states.contains(&initial) {
            return Err(ParseError {
                span: initial_span,
                kind: ParseErrorKind::UndefinedState(initial),
            });
        }
        for t in &transitions {
            if !states.contains(&t.to) {
                return Err(ParseError {
                    span: t.span,
                    kind: ParseErrorKind::UndefinedState(t.to.clone()),
                });
            }
        }
        Ok(StatechartSpec {
            name,
            uses,
            initial,
            states,
            transitions,
        })
    }

    fn transition(&mut self, from: &str) -> PResult<Transition> {
        let span = self.span();
        self.keyword("on")?;
        let (event, _) = self.ident()?;
        let code = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.ident()?.0)
        } else {
            None
        };
        let guard = if *self.peek() == Tok::LBracket {
            self.bump();
            let g = self.expr(1)?;
            self.expect(Tok::RBracket)?;
            Some(g)
        } else {
            None
        };
        self.expect(Tok::Arrow)?;
        let (to, _) = self.ident()?;
        let mut actions = Vec::new();
        if self.at_keyword("do") {
            self.bump();
            loop {
                actions.push(self.action()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Semi)?;
        Ok(Transition {
            from: from.to_string(),
            trigger: Trigger { event, code },
            guard,
            to,
            actions,
            span,
        })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        if *self.peek() != Tok::LParen {
            return Ok(Vec::new());
        }
        self.bump();
        let mut out = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                out.push(self.expr(1)?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn word_args(&mut self) -> PResult<Vec<(String, Span)>> {
        self.expect(Tok::LParen)?;
        let mut out = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.ident()?);
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn action(&mut self) -> PResult<Action> {
        let (name, sp) = self.ident()?;
        let an = ActionName::from_name(&name).ok_or(ParseError {
            span: sp,
            kind: ParseErrorKind::UnknownAction(name.clone()),
        })?;
        let arity_err = |n: usize, want: &str| ParseError {
            span: sp,
            kind: ParseErrorKind::Syntax(format!("{name} takes {want}, got {n} argument(s)")),
        };
        let action = match an {
            ActionName::NotifyPa | ActionName::StopTimer => {
                let a = self.args()?;
                if !a.is_empty() {
                    return Err(arity_err(a.len(), "no arguments"));
                }
                if an == ActionName::NotifyPa {
                    Action::NotifyPa
                } else {
                    Action::StopTimer
                }
            }
            ActionName::ArmTimer | ActionName::SetPrescale | ActionName::Quarantine => {
                let mut a = self.args()?;
                if a.len() != 1 {
                    return Err(arity_err(a.len(), "1 argument"));
                }
                let e = a.remove(0);
                match an {
                    ActionName::ArmTimer => Action::ArmTimer(e),
                    ActionName::SetPrescale => Action::SetPrescale(e),
                    _ => Action::Quarantine(e),
                }
            }
            ActionName::ResetPa => {
                let mut a = self.args()?;
                match a.len() {
                    0 => Action::ResetPa(None),
                    1 => Action::ResetPa(Some(a.remove(0))),
                    n => return Err(arity_err(n, "0 or 1 arguments")),
                }
            }
            ActionName::Reroute => {
                let mut a = self.args()?;
                if a.len() != 2 {
                    return Err(arity_err(a.len(), "2 arguments"));
                }
                let to = a.pop().unwrap_or(Expr::Num(0.0));
                let from = a.pop().unwrap_or(Expr::Num(0.0));
                Action::Reroute(from, to)
            }
            ActionName::Escalate => {
                let w = self.word_args()?;
                if w.len() != 2 {
                    return Err(arity_err(w.len(), "2 arguments"));
                }
                let level = match w[0].0.as_str() {
                    "worker" => Level::Worker,
                    "farmlet" => Level::Farmlet,
                    "global" => Level::Global,
                    other => {
                        return Err(ParseError {
                            span: w[0].1,
                            kind: ParseErrorKind::Syntax(format!("unknown level `{other}`")),
                        })
                    }
                };
                let code: FaultCode = w[1].0.parse().map_err(|_| ParseError {
                    span: w[1].1,
                    kind: ParseErrorKind::Syntax(format!("unknown fault code `{}`", w[1].0)),
                })?;
                Action::Escalate(level, code)
            }
            ActionName::Forward => {
                let w = self.word_args()?;
                if w.len() != 1 {
                    return Err(arity_err(w.len(), "1 argument"));
                }
                match w[0].0.as_str() {
                    "up" => Action::Forward(Direction::Up),
                    "down" => Action::Forward(Direction::Down),
                    other => {
                        return Err(ParseError {
                            span: w[0].1,
                            kind: ParseErrorKind::Syntax(format!("unknown direction `{other}`")),
                        })
                    }
                }
            }
        };
        Ok(action)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn expr(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.bump();
            let rhs = self.expr(p + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Not(alloc::boxed::Box::new(self.unary()?)))
            }
            Tok::Minus => match self.peek_at(1).clone() {
                Tok::Num(n) => {
                    self.bump();
                    self.bump();
                    Ok(Expr::Num(-n))
                }
                _ => self.err(String::from("unary minus applies only to numeric literals")),
            },
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr(1)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => {
                let sp = self.bump().1;
                match s.as_str() {
                    "true" => Ok(Expr::Bool(true)),
                    "false" => Ok(Expr::Bool(false)),
                    _ if *self.peek() == Tok::LParen => {
                        let f = Func::from_name(&s).ok_or(ParseError {
                            span: sp,
                            kind: ParseErrorKind::Syntax(format!("unknown function `{s}`")),
                        })?;
                        let args = self.args()?;
                        if args.len() != f.arity() {
                            return Err(ParseError {
                                span: sp,
                                kind: ParseErrorKind::Syntax(format!(
                                    "{} takes {} argument(s), got {}",
                                    f.name(),
                                    f.arity(),
                                    args.len()
                                )),
                            });
                        }
                        Ok(Expr::Call(f, args))
                    }
                    _ => Ok(Expr::Var(s)),
                }
            }
            other => self.err(format!("expected expression, found {}", other.describe())),
        }
    }
}

/// Parses statechart text. Also checks that every referenced state exists.
pub fn parse(src: &str) -> Result<StatechartSpec, ParseError> {
    let toks = tokenize(src)?;
    Parser { toks, pos: 0 }.spec()
}

/// Parses a standalone expression, as used in guards.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr(1)?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("expected end of input, found {}", p.peek().describe()));
    }
    Ok(e)
}
