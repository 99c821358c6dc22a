use std::collections::BTreeMap;

use proptest::prelude::*;
use vlafarm_core::dsl::{
    default_farmlet_spec, default_worker_spec, has_errors, parse, step, validate, Action, ActionName, BinOp,
    DiagnosticKind, DslFarmletPolicy, DslWorkerVla, Expr, Func, ParseErrorKind, Severity, Span, StatechartSpec,
    Transition, Trigger, Value,
};
use vlafarm_core::farm::WorkerId;
use vlafarm_core::mitigation::{AuthorityMask, PrescaleController};
use vlafarm_core::vla::{
    farmlet_decide, Direction, FarmletContext, FarmletEvent, FarmletPolicy, FaultCode, HandWorkerVla, Level,
    VlaAction, VlaError, WorkerVlaContext, WorkerVlaEvent, WorkerVlaLogic,
};
use vlafarm_core::SimTime;

const MINIMAL: &str = "statechart m { initial A; state A { on go -> B; } state B { } }";

#[test]
fn minimal_spec_round_trips() {
    let s = parse(MINIMAL).unwrap();
    assert_eq!(parse(&s.to_string()).unwrap(), s);
    assert_eq!(s.states, vec!["A", "B"]);
    assert!(validate(&s).is_empty());
}

#[test]
fn undefined_target_names_the_state() {
    let e = parse("statechart m { initial A; state A { on go -> Nowhere; } }").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::UndefinedState("Nowhere".into()));
    assert!(e.to_string().contains("Nowhere"));
    assert_eq!(e.span, Span { line: 1, col: 37 });
}

#[test]
fn undefined_initial_rejected() {
    let e = parse("statechart m { initial Q; state A { } }").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::UndefinedState("Q".into()));
}

#[test]
fn duplicate_state_rejected() {
    let e = parse("statechart m { initial A;\n state A { }\n state A { } }").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::DuplicateState("A".into()));
    assert_eq!(e.span, Span { line: 3, col: 8 });
}

#[test]
fn unknown_action_rejected() {
    let e = parse("statechart m { initial A; state A { on go -> A do explode; } }").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::UnknownAction("explode".into()));
}

#[test]
fn syntax_error_reports_position() {
    let e = parse("statechart m {\n  initial A\n  state A { }\n}").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    assert_eq!(e.span, Span { line: 3, col: 3 });
    for bad in [
        "statechart m { initial A; state A { on go -> A do arm_timer; } }",
        "statechart m { initial A; state A { on go -> A do escalate(region, e1); } }",
        "statechart m { initial A; state A { on go -> A do escalate(farmlet, e9); } }",
        "statechart m { initial A; state A { on go [-x] -> A; } }",
        "statechart m { initial A; state A { on go [sqrt(2)] -> A; } }",
        "statechart m { initial A; state A { } } extra",
    ] {
        assert!(matches!(parse(bad).unwrap_err().kind, ParseErrorKind::Syntax(_)), "{bad}");
    }
}

#[test]
fn unguarded_duplicates_are_nondeterministic() {
    let s = parse("statechart m { initial A; state A { on go -> A; on go -> A do stop_timer; } }").unwrap();
    let d = validate(&s);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].kind, DiagnosticKind::Nondeterministic);
    assert_eq!(d[0].severity, Severity::Error);
}

#[test]
fn disjoint_guards_and_codes_are_deterministic() {
    let s = parse(
        "statechart m { initial A; state A {
           on f:e1 -> A; on f:e2 -> A;
           on g [n >= 3] -> A; on g [n < 3] -> A;
         } }",
    )
    .unwrap();
    assert!(validate(&s).is_empty());
    // an uncoded trigger overlaps every coded one
    let s = parse("statechart m { initial A; state A { on f:e1 -> A; on f -> A; } }").unwrap();
    assert!(has_errors(&validate(&s)));
}

#[test]
fn unreachable_state_is_a_warning() {
    let s = parse("statechart m { initial A; state A { } state B { on go -> A; } }").unwrap();
    let d = validate(&s);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].kind, DiagnosticKind::Unreachable);
    assert!(!has_errors(&d));
}

#[test]
fn unused_declared_action_is_a_warning() {
    let s = parse("statechart m { uses notify_pa, forward; initial A; state A { on go -> A do notify_pa; } }").unwrap();
    let d = validate(&s);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].kind, DiagnosticKind::UnusedAction);
    assert!(d[0].message.contains("forward"));
}

#[test]
fn shipped_specs_are_clean() {
    for s in [default_worker_spec(), default_farmlet_spec()] {
        assert_eq!(validate(&s), vec![], "{}", s.name);
        assert_eq!(parse(&s.to_string()).unwrap(), s);
    }
}

/// Protocol transitions enumerated by hand: arm on crossing start; stop on
/// completion in time; first expiry into grace; stop on cleanup success in
/// grace; second expiry with reset authority; second expiry without it.
#[test]
fn worker_spec_transition_count_matches_protocol_enumeration() {
    let s = default_worker_spec();
    let enumerated = [
        ("Idle", "crossing_start"),
        ("Normal", "pa_done"),
        ("Normal", "deadline_expired"),
        ("Grace", "pa_done"),
        ("Grace", "deadline_expired"),
        ("Grace", "deadline_expired"),
    ];
    assert_eq!(s.transitions.len(), enumerated.len());
    for (t, (from, ev)) in s.transitions.iter().zip(enumerated) {
        assert_eq!((t.from.as_str(), t.trigger.event.as_str()), (from, ev));
    }
}

#[test]
fn worker_spec_first_expiry_enters_grace() {
    let s = default_worker_spec();
    let ctx: BTreeMap<String, Value> = [
        ("wr".to_string(), Value::Bool(true)),
        ("estimate".to_string(), Value::Num(0.005)),
        ("grace".to_string(), Value::Num(0.00125)),
    ]
    .into();
    let (next, actions) = step(&s, "Normal", "deadline_expired", None, &ctx).unwrap();
    assert_eq!(next, "Grace");
    assert_eq!(
        actions,
        vec![
            VlaAction::NotifyPa,
            VlaAction::ArmTimer {
                duration: SimTime::from_micros(1250)
            }
        ]
    );
    let (next, actions) = step(&s, "Normal", "no_such_event", None, &ctx).unwrap();
    assert_eq!((next.as_str(), actions.len()), ("Normal", 0));
}

#[test]
fn runtime_nondeterminism_is_an_error() {
    let s = parse("statechart m { initial A; state A { on go [a] -> A; on go [b] -> A; } }").unwrap();
    let ctx: BTreeMap<String, Value> =
        [("a".to_string(), Value::Bool(true)), ("b".to_string(), Value::Bool(true))].into();
    assert!(step(&s, "A", "go", None, &ctx).is_err());
    let ctx: BTreeMap<String, Value> =
        [("a".to_string(), Value::Bool(true)), ("b".to_string(), Value::Bool(false))].into();
    assert!(step(&s, "A", "go", None, &ctx).is_ok());
}

const TRI: &str = "
statechart tri {
  initial A;
  state A {
    on x -> B do notify_pa;
    on y -> A do stop_timer;
  }
  state B {
    on x -> C do arm_timer(0.5);
    on z -> A do forward(up);
  }
  state C {
    on y [flag] -> A do reset_pa;
    on y [!flag] -> B do escalate(farmlet, e1);
    on z -> C;
  }
}";

/// Independent transition table for `TRI`.
fn tri_oracle(state: char, ev: &str, flag: bool) -> (char, Vec<VlaAction>) {
    match (state, ev) {
        ('A', "x") => ('B', vec![VlaAction::NotifyPa]),
        ('A', "y") => ('A', vec![VlaAction::StopTimer]),
        ('B', "x") => (
            'C',
            vec![VlaAction::ArmTimer {
                duration: SimTime::from_millis(500),
            }],
        ),
        ('B', "z") => (
            'A',
            vec![VlaAction::Forward {
                direction: Direction::Up,
            }],
        ),
        ('C', "y") if flag => ('A', vec![VlaAction::ResetPa { worker: None }]),
        ('C', "y") => (
            'B',
            vec![VlaAction::Escalate {
                level: Level::Farmlet,
                code: FaultCode::E1,
            }],
        ),
        ('C', "z") => ('C', vec![]),
        (s, _) => (s, vec![]),
    }
}

#[test]
fn interpreter_matches_oracle_on_all_short_sequences() {
    let spec = parse(TRI).unwrap();
    assert!(validate(&spec).is_empty());
    let events = ["x", "y", "z", "w"];
    let mut checked = 0;
    for flag in [false, true] {
        let ctx: BTreeMap<String, Value> = [("flag".to_string(), Value::Bool(flag))].into();
        for len in 0..=4u32 {
            for idx in 0..events.len().pow(len) {
                let mut k = idx;
                let (mut s_interp, mut s_oracle) = (String::from("A"), 'A');
                let (mut log_i, mut log_o) = (Vec::new(), Vec::new());
                for _ in 0..len {
                    let ev = events[k % events.len()];
                    k /= events.len();
                    let (n, a) = step(&spec, &s_interp, ev, None, &ctx).unwrap();
                    s_interp = n;
                    log_i.extend(a);
                    let (n, a) = tri_oracle(s_oracle, ev, flag);
                    s_oracle = n;
                    log_o.extend(a);
                }
                assert_eq!(s_interp, s_oracle.to_string());
                assert_eq!(log_i, log_o);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 2 * (1 + 4 + 16 + 64 + 256));
}

// ---- round trip ----

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}".prop_filter("reserved", |s| {
        !matches!(
            s.as_str(),
            "true" | "false" | "min" | "max" | "clamp" | "abs" | "on" | "do" | "state" | "initial" | "uses" | "statechart"
        )
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1.0e6..1.0e6f64).prop_map(Expr::Num),
        (0u32..1000).prop_map(|n| Expr::Num(f64::from(n))),
        any::<bool>().prop_map(Expr::Bool),
        "[a-z \"\\\\]{0,4}".prop_map(Expr::Str),
        ident().prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        let ops = prop_oneof![
            Just(BinOp::Or),
            Just(BinOp::And),
            Just(BinOp::Eq),
            Just(BinOp::Ne),
            Just(BinOp::Lt),
            Just(BinOp::Le),
            Just(BinOp::Gt),
            Just(BinOp::Ge),
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            (ops, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::bin(o, l, r)),
            inner.clone().prop_map(|a| Expr::Call(Func::Abs, vec![a])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
            (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| Expr::Call(Func::Clamp, vec![a, b, c])),
        ]
    })
}

fn action() -> impl Strategy<Value = Action> {
    let level = prop_oneof![Just(Level::Worker), Just(Level::Farmlet), Just(Level::Global)];
    let code = prop_oneof![Just(FaultCode::E1), Just(FaultCode::E2), Just(FaultCode::E3), Just(FaultCode::E4)];
    prop_oneof![
        Just(Action::NotifyPa),
        Just(Action::StopTimer),
        expr().prop_map(Action::ArmTimer),
        proptest::option::of(expr()).prop_map(Action::ResetPa),
        (level, code).prop_map(|(l, c)| Action::Escalate(l, c)),
        expr().prop_map(Action::SetPrescale),
        (expr(), expr()).prop_map(|(a, b)| Action::Reroute(a, b)),
        expr().prop_map(Action::Quarantine),
        prop_oneof![Just(Direction::Up), Just(Direction::Down)].prop_map(Action::Forward),
    ]
}

fn spec() -> impl Strategy<Value = StatechartSpec> {
    (
        ident(),
        proptest::collection::btree_set(ident(), 1..5),
        proptest::option::of(proptest::collection::vec(proptest::sample::select(ActionName::ALL.to_vec()), 1..4)),
    )
        .prop_flat_map(|(name, states, uses)| {
            let states: Vec<String> = states.into_iter().collect();
            let n = states.len();
            let tr = (
                0..n,
                ident(),
                proptest::option::of(ident()),
                proptest::option::of(expr()),
                0..n,
                proptest::collection::vec(action(), 0..3),
            );
            (
                Just(name),
                Just(states),
                Just(uses),
                0..n,
                proptest::collection::vec(tr, 0..6),
            )
        })
        .prop_map(|(name, states, uses, init, mut trs)| {
            // transitions are stored grouped by source state, in state order
            trs.sort_by_key(|t| t.0);
            let transitions = trs
                .into_iter()
                .map(|(from, event, code, guard, to, actions)| Transition {
                    from: states[from].clone(),
                    trigger: Trigger { event, code },
                    guard,
                    to: states[to].clone(),
                    actions,
                    span: Span::default(),
                })
                .collect();
            StatechartSpec {
                name,
                uses,
                initial: states[init].clone(),
                states,
                transitions,
            }
        })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(s in spec()) {
        let text = s.to_string();
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn worker_spec_matches_hand_coded_agent(
        events in proptest::collection::vec((0usize..3, any::<bool>()), 0..40),
        estimate_us in 1u64..100_000,
        grace_us in 1u64..50_000,
    ) {
        let mut hand = HandWorkerVla::new();
        let mut dsl = DslWorkerVla::new(default_worker_spec());
        let mut now = SimTime::ZERO;
        for (e, wr) in events {
            now += SimTime::from_micros(10);
            let ev = WorkerVlaEvent::ALL[e];
            let ctx = WorkerVlaContext {
                wr,
                estimate: SimTime::from_micros(estimate_us),
                grace: SimTime::from_micros(grace_us),
            };
            let h = hand.on_event(now, ev, &ctx);
            let d = dsl.on_event(now, ev, &ctx).unwrap();
            match h {
                Ok(a) => prop_assert_eq!(a, d),
                // the statechart has no crossing_start edge out of an armed state
                Err(VlaError::AlreadyArmed) => prop_assert!(d.is_empty()),
                Err(other) => prop_assert!(false, "{other}"),
            }
            prop_assert_eq!(hand.state_name(), dsl.state_name());
        }
    }

    #[test]
    fn farmlet_spec_matches_hand_coded_policy(
        fault in any::<bool>(),
        worker in 0u32..16,
        code in 0usize..4,
        mask in (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
        reset_authority in any::<bool>(),
        count in 0u32..6,
        n_subsume in 1u32..5,
        subsumed in any::<bool>(),
        occupancy in 0.0..=1.0f64,
        gain in 0.0..5.0f64,
        target in 0.0..=1.0f64,
    ) {
        let codes = [FaultCode::E1, FaultCode::E2, FaultCode::E3, FaultCode::E4];
        let event = if fault {
            FarmletEvent::Fault { worker: WorkerId(worker), code: codes[code] }
        } else {
            FarmletEvent::StatsTick
        };
        let ctx = FarmletContext {
            authority: AuthorityMask { wr: mask.0, fp: mask.1, gp: mask.2, gf: mask.3 },
            reset_authority,
            count,
            n_subsume,
            subsumed,
            occupancy,
            prescale: PrescaleController { target_occupancy: target, gain, max_rate: 1.0 },
        };
        let mut dsl = DslFarmletPolicy::new(default_farmlet_spec());
        prop_assert_eq!(farmlet_decide(event, &ctx), dsl.decide(event, &ctx).unwrap());
    }
}
