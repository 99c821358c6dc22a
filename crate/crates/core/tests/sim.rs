use proptest::prelude::*;

use vlafarm_core::control::{check_record, Command, LinkRef, LogicKind, NodeName, ScenarioScript, TimedCommand};
use vlafarm_core::farm::{Behavior, FarmletId, FarmletRole, PaStatus};
use vlafarm_core::mitigation::AuthorityMask;
use vlafarm_core::sim::{script_commands, SimOptions};
use vlafarm_core::{LinkKind, SimTime, Simulation};

fn script(duration: f64, commands: Vec<(f64, Command)>) -> ScenarioScript {
    ScenarioScript {
        duration,
        commands: commands.into_iter().map(|(t, cmd)| TimedCommand { t, cmd }).collect(),
        ..ScenarioScript::default()
    }
}

fn run(s: &ScenarioScript) -> Simulation {
    let opts = SimOptions {
        record_actions: true,
        ..SimOptions::default()
    };
    let mut sim = Simulation::with_options(s.clone(), opts).unwrap();
    sim.run_commands(&script_commands(s), "script", SimTime::from_secs_f64(s.duration), |_| {})
        .unwrap();
    sim
}

fn sever_farmlet0() -> Command {
    Command::Sever {
        link: LinkRef {
            source: NodeName::Global,
            dest: NodeName::Farmlet(FarmletId(0)),
            kind: LinkKind::Data,
        },
    }
}

#[test]
fn same_seed_same_trace_and_telemetry() {
    let s = script(2.0, vec![(0.5, Command::HangPa { worker: 1 }), (1.0, sever_farmlet0())]);
    let mut a = run(&s);
    let mut b = run(&s);
    assert_eq!(a.take_trace(), b.take_trace());
    assert_eq!(a.take_telemetry(), b.take_telemetry());
    assert_eq!(a.action_log(), b.action_log());
}

#[test]
fn different_seeds_diverge() {
    let mut s = script(1.0, Vec::new());
    let a = *run(&s).counters();
    s.seed = 2;
    let b = *run(&s).counters();
    assert_eq!(a.generated, b.generated);
    assert_ne!(a.generated_bytes, b.generated_bytes);
}

#[test]
fn telemetry_period_sets_record_count() {
    let mut s = script(10.0, Vec::new());
    s.telemetry_period = 1.0;
    let mut sim = run(&s);
    let recs = sim.take_telemetry();
    assert_eq!(recs.len(), 10);
    assert!(recs.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn nothing_is_generated_while_stopped() {
    let s = script(3.0, vec![(1.0, Command::Stop), (2.0, Command::Go)]);
    let mut sim = Simulation::new(s.clone()).unwrap();
    sim.run_until(SimTime::from_secs(1)).unwrap();
    sim.apply_command(Command::Stop, "op", None).unwrap();
    let before = *sim.counters();
    sim.run_until(SimTime::from_secs(2)).unwrap();
    assert_eq!(sim.counters(), &before);
    // a command issued while stopped waits for go
    let ack = sim.apply_command(Command::HangPa { worker: 0 }, "op", None).unwrap();
    assert!(ack.deferred);
    assert_ne!(sim.workers()[0].pa_status, PaStatus::Hung);
    sim.apply_command(Command::Go, "op", None).unwrap();
    assert_eq!(sim.workers()[0].pa_status, PaStatus::Hung);
    sim.run_until(SimTime::from_secs(3)).unwrap();
    assert!(sim.counters().generated > before.generated);
    let names: Vec<_> = sim.journal().entries().iter().map(|e| e.command.name()).collect();
    assert_eq!(names, ["stop", "go", "hang_pa"]);
    for r in sim.take_telemetry() {
        assert!(check_record(&r).is_empty(), "{:?}", check_record(&r));
    }
}

#[test]
fn hang_with_wr_restarts_after_one_notify_and_grace() {
    let mut s = script(2.0, vec![(1.0, Command::HangPa { worker: 3 })]);
    s.pa.p_overrun = 0.0;
    let sim = run(&s);
    let v = sim.vla_counters();
    assert_eq!((v.notifies, v.worker_resets, v.escalations), (1, 1, 0));
    assert_ne!(sim.workers()[3].pa_status, PaStatus::Hung);
    assert_eq!(sim.counters().lost, 1);
}

#[test]
fn hang_without_wr_escalates_once() {
    let mut s = script(2.0, vec![(1.0, Command::HangPa { worker: 3 })]);
    s.pa.p_overrun = 0.0;
    s.authority.wr = false;
    let sim = run(&s);
    let v = sim.vla_counters();
    assert_eq!((v.notifies, v.worker_resets, v.escalations), (1, 0, 1));
    assert_eq!(sim.workers()[3].pa_status, PaStatus::Hung);
    assert_eq!(v.fault_summaries, 1);
}

#[test]
fn repeated_faults_subsume_the_worker() {
    let mut s = script(
        10.0,
        vec![
            (0.0, Command::SetBehavior {
                behavior: Behavior::RunPoor,
                worker: Some(2),
            }),
            (0.0, Command::SetErrorRate { p: 0.02 }),
        ],
    );
    s.pa.p_overrun = 0.0;
    s.authority.wr = false;
    s.vla.farmlet.reset_authority = true;
    let mut sim = run(&s);
    assert!(sim.is_subsumed(2));
    assert!(sim.workers()[2].quarantined);
    assert_eq!(sim.vla_counters().quarantines, 1);
    assert_eq!(sim.vla_counters().farmlet_resets, 2);
    for r in sim.take_telemetry() {
        assert!(check_record(&r).is_empty());
    }
    // operator restart lifts the quarantine
    sim.apply_command(Command::RestartPa { worker: 2 }, "op", None).unwrap();
    assert!(!sim.is_subsumed(2));
    assert!(!sim.workers()[2].quarantined);
}

#[test]
fn severed_link_fails_over_to_the_spare() {
    let s = script(4.0, vec![(1.0, sever_farmlet0())]);
    let sim = run(&s);
    let fo = sim.failovers();
    assert_eq!(fo.len(), 1);
    assert_eq!((fo[0].unfit, fo[0].spare), (0, 2));
    assert_eq!(sim.farmlets()[0].role, FarmletRole::Unfit);
    assert_eq!(sim.farmlets()[2].role, FarmletRole::Active);
    assert_eq!(sim.farmlets()[0].received, fo[0].unfit_received);
}

#[test]
fn overload_with_fp_never_overflows() {
    let mut s = script(5.0, Vec::new());
    s.params.crossing_rate *= 1.5;
    let sim = run(&s);
    assert!(sim.farmlets().iter().all(|f| f.overflowed == 0));
    assert!(sim.counters().dropped_prescale > 0);
}

#[test]
fn gp_keeps_active_rates_equal() {
    let mut s = script(3.0, Vec::new());
    s.params.crossing_rate *= 1.5;
    s.authority = AuthorityMask {
        gp: true,
        fp: false,
        ..AuthorityMask::standard()
    };
    let mut sim = run(&s);
    for r in sim.take_telemetry() {
        let rates: Vec<f64> = r
            .farmlets
            .iter()
            .filter(|f| f.role == FarmletRole::Active)
            .map(|f| f.drop_rate)
            .collect();
        assert!(rates.windows(2).all(|w| w[0] == w[1]), "t={}: {rates:?}", r.t);
    }
}

#[test]
fn hand_and_statechart_agents_act_identically() {
    let drills = [
        script(3.0, vec![(1.0, Command::HangPa { worker: 3 })]),
        {
            let mut s = script(3.0, vec![(1.0, Command::HangPa { worker: 3 })]);
            s.authority.wr = false;
            s
        },
        {
            let mut s = script(3.0, Vec::new());
            s.params.crossing_rate *= 1.5;
            s
        },
        {
            let mut s = script(
                6.0,
                vec![
                    (0.0, Command::SetBehavior {
                        behavior: Behavior::RunPoor,
                        worker: Some(2),
                    }),
                    (0.0, Command::SetErrorRate { p: 0.02 }),
                ],
            );
            s.authority.wr = false;
            s.vla.farmlet.reset_authority = true;
            s
        },
    ];
    for mut s in drills {
        s.vla.logic = LogicKind::Hand;
        let hand = run(&s);
        s.vla.logic = LogicKind::Dsl;
        let dsl = run(&s);
        assert!(!hand.action_log().is_empty());
        assert_eq!(hand.action_log(), dsl.action_log());
        assert_eq!(hand.counters(), dsl.counters());
    }
}

fn command_strategy() -> impl Strategy<Value = Command> {
    prop_oneof![
        (0u32..16).prop_map(|worker| Command::HangPa { worker }),
        (0u32..16).prop_map(|worker| Command::RestartPa { worker }),
        Just(sever_farmlet0()),
        (0.0f64..0.2).prop_map(|p| Command::SetErrorRate { p }),
        (0u32..16).prop_map(|w| Command::SetBehavior {
            behavior: Behavior::RunPoor,
            worker: Some(w),
        }),
        (5_000.0f64..20_000.0).prop_map(|rate| Command::SetParams { rate, size: 200_000.0 }),
        any::<(bool, bool, bool, bool)>().prop_map(|(wr, fp, gp, gf)| Command::SetAuthority {
            mask: AuthorityMask { wr, fp, gp, gf },
        }),
        Just(Command::Stop),
        Just(Command::Go),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_record_conserves_crossings(
        seed in 0u64..1000,
        mut cmds in prop::collection::vec((0.0f64..1.5, command_strategy()), 0..6),
    ) {
        cmds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut s = script(1.5, Vec::new());
        s.seed = seed;
        let mut sim = Simulation::new(s).unwrap();
        for (t, cmd) in cmds {
            sim.run_until(SimTime::from_secs_f64(t)).unwrap();
            // stop/go out of order is rejected; that is not under test here
            let _ = sim.apply_command(cmd, "prop", None);
        }
        sim.run_until(SimTime::from_secs_f64(1.5)).unwrap();
        prop_assert!(sim.violations().is_empty(), "{:?}", sim.violations());
        let recs = sim.take_telemetry();
        prop_assert!(!recs.is_empty());
        for r in &recs {
            let bad = check_record(r);
            prop_assert!(bad.is_empty(), "t={}: {:?}", r.t, bad);
        }
        prop_assert!(recs.windows(2).all(|w| w[0].t < w[1].t));
    }
}
