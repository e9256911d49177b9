mod common;

use common::goal_from;
use hdial::acts::{ActionId, DomainId, SubTask, DONTCARE};
use hdial::belief::BeliefState;
use hdial::env::{DialogueEnv, EnvMode};
use hdial::harness::{run_dialogue, DialogueSeeds};
use hdial::ontology::FLAG_ENTITY_OFFERED;
use hdial::policy::{Policy, RandomPolicy, ScriptedPolicy};
use hdial::rng::{stream_rng, DialRng, Stream};
use hdial::smdp::{
    available_actions, discounted_return, execute_option, run_episode, HierarchyConfig, OptionDef,
    RunMode,
};
use hdial::trace::Trace;
use hdial::user::{UserConfig, UserModel, UserSimulator};
use hdial::world::World;

fn world() -> World {
    World::builtin(7).unwrap()
}

fn still() -> UserConfig {
    UserConfig {
        p_change: 0.0,
        ..UserConfig::default()
    }
}

fn booking_goal() -> hdial::user::UserGoal {
    goal_from(
        DomainId::Restaurant,
        &[
            ("pricerange", DONTCARE),
            ("area", DONTCARE),
            ("food", "thai"),
        ],
        &["phone"],
        Some(SubTask::Booking),
        &[
            ("hour", "6pm"),
            ("peopleno", "2"),
            ("durationdays", "1"),
            ("day", "friday"),
        ],
    )
}

/// Always picks the same act when it is available, otherwise the first one.
struct Fixed(ActionId);

impl Policy for Fixed {
    fn select(
        &self,
        _: DomainId,
        _: &BeliefState,
        actions: &[ActionId],
        _: f64,
        _: &mut DialRng,
    ) -> hdial::Result<ActionId> {
        Ok(if actions.contains(&self.0) {
            self.0.clone()
        } else {
            actions[0].clone()
        })
    }
}

#[test]
fn discounted_return_examples() {
    assert_eq!(discounted_return(&[], 0.99), 0.0);
    assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0), 3.0);
    let r = discounted_return(&[-1.0, -1.0, 19.0], 0.99);
    assert!((r - 16.6319).abs() < 1e-12, "{r}");
}

#[test]
fn option_availability() {
    let w = world();
    let spec = w.ontology.get(DomainId::Restaurant).unwrap();
    let mut b = BeliefState::new(spec);
    let before = available_actions(spec, &b, false);
    assert!(before.iter().all(|a| !a.is_option()));
    assert!(spec.primitive_acts.iter().all(|a| before.contains(a)));
    b.set_flag(FLAG_ENTITY_OFFERED, true);
    let after = available_actions(spec, &b, false);
    assert!(after.contains(&ActionId::Option(SubTask::Booking)));
    assert!(after.contains(&ActionId::Option(SubTask::Payment)));
    for task in SubTask::ALL {
        let sub = w.ontology.sub_spec(task).unwrap();
        let mut sb = BeliefState::new(sub);
        for f in sub.context_flags.clone() {
            sb.set_flag(&f, true);
        }
        assert!(available_actions(sub, &sb, false)
            .iter()
            .all(|a| !a.is_option()));
    }
}

#[test]
fn mask_withholds_inform_and_bye_until_useful() {
    let w = world();
    let spec = w.ontology.get(DomainId::Hotel).unwrap();
    let mut b = BeliefState::new(spec);
    let early = available_actions(spec, &b, true);
    assert!(!early.contains(&ActionId::Inform) && !early.contains(&ActionId::Bye));
    b.set_flag(FLAG_ENTITY_OFFERED, true);
    b.set_requested("phone", true);
    let pending = available_actions(spec, &b, true);
    assert!(pending.contains(&ActionId::Inform) && !pending.contains(&ActionId::Bye));
    b.set_requested("phone", false);
    assert!(available_actions(spec, &b, true).contains(&ActionId::Bye));
}

fn run_scripted(
    goal: hdial::user::UserGoal,
    mode: EnvMode,
    config: &HierarchyConfig,
) -> hdial::smdp::EpisodeLog {
    let w = world();
    let mut user = UserSimulator::new(&w, goal, still(), stream_rng(1, Stream::Misc, 0));
    let policy = ScriptedPolicy::new(w.ontology.clone());
    let mut rng = stream_rng(1, Stream::Misc, 1);
    run_episode(
        mode,
        &policy,
        &w,
        &mut user,
        config,
        &mut rng,
        RunMode::Eval,
    )
    .unwrap()
}

#[test]
fn scripted_dialogues_pay_twenty_minus_length() {
    for mode in [EnvMode::Hierarchical, EnvMode::Flat] {
        let log = run_scripted(booking_goal(), mode, &HierarchyConfig::default());
        assert!(log.success.overall, "{mode:?}");
        assert_eq!(log.total_return, 20.0 - log.length as f64);
        if mode == EnvMode::Flat {
            assert!(log.turns.iter().all(|t| !t.option_boundary));
            assert!(log.options.is_empty());
        }
    }
}

#[test]
fn option_discount_is_gamma_to_the_tau() {
    let config = HierarchyConfig {
        max_sub_steps: 3,
        ..HierarchyConfig::default()
    };
    let log = run_scripted(booking_goal(), EnvMode::Hierarchical, &config);
    let step = log
        .master_steps
        .iter()
        .find(|s| s.point.action.is_option())
        .expect("scripted policy enters the booking option");
    assert_eq!(step.tau, 3);
    assert!((step.discount - 0.99f64.powi(3)).abs() < 1e-15);
    assert!((step.reward - (-1.0 - 0.99 - 0.9801)).abs() < 1e-12);
}

#[test]
fn capped_option_fails_with_minus_tau() {
    let w = world();
    let config = HierarchyConfig {
        max_sub_steps: 4,
        ..HierarchyConfig::default()
    };
    let mut user = UserSimulator::new(&w, booking_goal(), still(), stream_rng(1, Stream::Misc, 0));
    let mut env = DialogueEnv::new(
        &w,
        EnvMode::Hierarchical,
        config.reward_spec(),
        DomainId::Restaurant,
    )
    .unwrap();
    let scripted = ScriptedPolicy::new(w.ontology.clone());
    let mut rng = stream_rng(1, Stream::Misc, 1);
    env.begin(&mut user).unwrap();
    // Master turns until the booking option becomes available.
    loop {
        let actions = available_actions(env.top_spec(), env.master_belief(), true);
        let a = scripted
            .select(
                DomainId::Restaurant,
                env.master_belief(),
                &actions,
                0.0,
                &mut rng,
            )
            .unwrap();
        if a.is_option() {
            break;
        }
        env.step(DomainId::Restaurant, &a, &mut user).unwrap();
    }
    let option = OptionDef::new(SubTask::Booking, config.max_sub_steps);
    let repeat = Fixed(ActionId::Repeat);
    let out = execute_option(
        &option,
        &repeat,
        &mut env,
        &mut user,
        &config,
        &mut rng,
        RunMode::Eval,
    )
    .unwrap();
    assert_eq!(out.tau, 4);
    assert!(!out.sub_success);
    let intrinsic: f64 = out.sub_transitions.steps.iter().map(|s| s.reward).sum();
    assert_eq!(intrinsic, -4.0);
    assert!(out.sub_transitions.steps.last().unwrap().is_terminal);
}

#[test]
fn option_on_terminal_dialogue_is_an_error() {
    let w = world();
    let config = HierarchyConfig::default();
    let mut user = UserSimulator::new(&w, booking_goal(), still(), stream_rng(1, Stream::Misc, 0));
    let mut env = DialogueEnv::new(
        &w,
        EnvMode::Hierarchical,
        config.reward_spec(),
        DomainId::Restaurant,
    )
    .unwrap();
    env.begin(&mut user).unwrap();
    env.step(DomainId::Restaurant, &ActionId::Bye, &mut user)
        .unwrap();
    let mut rng = stream_rng(1, Stream::Misc, 1);
    let option = OptionDef::new(SubTask::Booking, 15);
    assert!(execute_option(
        &option,
        &RandomPolicy,
        &mut env,
        &mut user,
        &config,
        &mut rng,
        RunMode::Eval
    )
    .is_err());
}

#[test]
fn timeout_returns_minus_thirty() {
    let w = world();
    for mode in [EnvMode::Hierarchical, EnvMode::Flat] {
        let mut user =
            UserSimulator::new(&w, booking_goal(), still(), stream_rng(1, Stream::Misc, 0));
        let mut rng = stream_rng(1, Stream::Misc, 1);
        let log = run_episode(
            mode,
            &Fixed(ActionId::Repeat),
            &w,
            &mut user,
            &HierarchyConfig::default(),
            &mut rng,
            RunMode::Train,
        )
        .unwrap();
        assert_eq!(log.length, 30);
        assert!(!log.success.overall);
        assert_eq!(log.total_return, -30.0);
    }
}

#[test]
fn random_episodes_keep_the_accounting_identity() {
    let w = world();
    let h = HierarchyConfig::default();
    for i in 0..300u64 {
        let seeds = DialogueSeeds {
            seed: 21,
            user: Stream::Misc,
            policy: Stream::TrainPolicy,
            index: i,
        };
        let log = run_dialogue(
            &RandomPolicy,
            &w,
            EnvMode::Hierarchical,
            &h,
            &UserConfig::default(),
            true,
            seeds,
            RunMode::Train,
        )
        .unwrap();
        let flat = discounted_return(&log.extrinsic_rewards(), h.discount);
        assert!((log.master_return() - flat).abs() <= 1e-12);
        assert!(log.length <= 30);
        let bonus = if log.success.overall { 20.0 } else { 0.0 };
        assert_eq!(log.total_return, bonus - log.length as f64);
        for (d, eps) in &log.transitions {
            if !d.is_master() {
                assert!(eps
                    .iter()
                    .flat_map(|e| &e.steps)
                    .all(|s| !s.point.action.is_option()));
            }
        }
        for s in log
            .master_steps
            .iter()
            .filter(|s| s.point.action.is_option())
        {
            assert!((s.discount - h.discount.powi(s.tau as i32)).abs() < 1e-14);
        }
    }
}

#[test]
fn eval_runs_are_deterministic() {
    let w = world();
    let h = HierarchyConfig::default();
    let seeds = DialogueSeeds {
        seed: 3,
        user: Stream::EvalUser,
        policy: Stream::EvalPolicy,
        index: 17,
    };
    let run = || {
        run_dialogue(
            &RandomPolicy,
            &w,
            EnvMode::Hierarchical,
            &h,
            &UserConfig::default(),
            true,
            seeds,
            RunMode::Eval,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn golden_trace() {
    let log = run_scripted(
        booking_goal(),
        EnvMode::Hierarchical,
        &HierarchyConfig::default(),
    );
    let trace = Trace::from_log(&log);
    let text = trace.to_jsonl().unwrap();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden/scripted_booking.jsonl");
    if std::env::var_os("HDIAL_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden =
        std::fs::read_to_string(&path).expect("golden trace missing; rerun with HDIAL_BLESS=1");
    assert_eq!(text, golden);
    let parsed = Trace::read(golden.as_bytes()).unwrap();
    assert_eq!(parsed, trace);
    assert_eq!(parsed.turns.len(), log.length);
}

#[test]
fn truncated_trace_is_rejected() {
    let log = run_scripted(
        booking_goal(),
        EnvMode::Hierarchical,
        &HierarchyConfig::default(),
    );
    let text = Trace::from_log(&log).to_jsonl().unwrap();
    let cut: Vec<&str> = text.lines().collect();
    let truncated = cut[..cut.len() - 2].join("\n");
    assert!(Trace::read(truncated.as_bytes()).is_err());
}

#[test]
fn user_goal_is_kept_in_log() {
    let w = world();
    let mut user = UserSimulator::new(&w, booking_goal(), still(), stream_rng(1, Stream::Misc, 0));
    let g = user.goal().clone();
    let mut rng = stream_rng(1, Stream::Misc, 1);
    let log = run_episode(
        EnvMode::Flat,
        &RandomPolicy,
        &w,
        &mut user,
        &HierarchyConfig::default(),
        &mut rng,
        RunMode::Train,
    )
    .unwrap();
    assert_eq!(log.goal, g);
}
