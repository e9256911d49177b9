//! Options and the two episode loops.
//!
//! In the hierarchical loop a master policy picks primitive acts or options.
//! An option hands control to a sub-domain policy that runs until its sub-goal
//! is reached, it hits `max_sub_steps`, or the dialogue ends. The master sees
//! one SMDP transition per option with reward `sum_k g^k r_k` and discount
//! `g^tau`; the sub-domain learns from the internal critic's reward only. The
//! flat loop runs one policy over the union of all primitive acts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::acts::{ActionId, DomainId, SubTask, UserAct};
use crate::belief::BeliefState;
use crate::env::{intrinsic_reward, DialogueEnv, EnvMode, RewardSpec, SuccessReport};
use crate::error::{Error, Result};
use crate::gp::EpisodeTransitions;
use crate::kernel::JointPoint;
use crate::ontology::{DomainSpec, FLAG_ENTITY_OFFERED};
use crate::policy::Policy;
use crate::rng::DialRng;
use crate::user::{UserGoal, UserModel};
use crate::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyConfig {
    pub discount: f64,
    pub master_exploration_scale: f64,
    pub sub_exploration_scale: f64,
    pub flat_exploration_scale: f64,
    pub max_dialogue_length: usize,
    pub max_sub_steps: usize,
    /// Off while pretraining masters without sub-tasks.
    pub options_enabled: bool,
    /// Withhold `inform` and `bye` while they cannot help; see [`available_actions`].
    pub mask_unexecutable: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            master_exploration_scale: 2.0,
            sub_exploration_scale: 1.0,
            flat_exploration_scale: 2.0,
            max_dialogue_length: 30,
            max_sub_steps: 15,
            options_enabled: true,
            mask_unexecutable: true,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config(format!(
                "discount {} outside (0, 1]",
                self.discount
            )));
        }
        let scales = [
            self.master_exploration_scale,
            self.sub_exploration_scale,
            self.flat_exploration_scale,
        ];
        if scales.iter().any(|s| !(0.0..).contains(s) || !s.is_finite()) {
            return Err(Error::Config(
                "exploration scales must be finite and non-negative".into(),
            ));
        }
        if self.master_exploration_scale < self.sub_exploration_scale {
            return Err(Error::Config(
                "master_exploration_scale must be at least sub_exploration_scale".into(),
            ));
        }
        if self.max_dialogue_length == 0 || self.max_sub_steps == 0 {
            return Err(Error::Config(
                "dialogue and option step limits must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn reward_spec(&self) -> RewardSpec {
        RewardSpec {
            max_length: self.max_dialogue_length,
            ..RewardSpec::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Train,
    Eval,
}

/// An option: a sub-domain policy, where it may start, and when it stops.
#[derive(Clone, Debug, PartialEq)]
pub struct OptionDef {
    pub task: SubTask,
    pub sub_domain: DomainId,
    pub max_sub_steps: usize,
}

impl OptionDef {
    pub fn new(task: SubTask, max_sub_steps: usize) -> Self {
        Self {
            task,
            sub_domain: task.domain(),
            max_sub_steps,
        }
    }

    /// Input set: available once the master has an entity on the table.
    pub fn available(&self, master_belief: &BeliefState) -> bool {
        master_belief.flag(FLAG_ENTITY_OFFERED)
    }

    /// Deterministic termination.
    pub fn terminates(&self, sub_goal_reached: bool, elapsed: usize, dialogue_over: bool) -> bool {
        sub_goal_reached || dialogue_over || elapsed >= self.max_sub_steps
    }
}

/// `sum_k g^k r_k`, accumulated front to back.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    let mut total = 0.0;
    let mut g = 1.0;
    for r in rewards {
        total += g * r;
        g *= discount;
    }
    total
}

/// Primitive acts plus each option whose input set holds. With `mask` on,
/// acts that cannot do anything useful yet are withheld: `inform` until an
/// entity has been offered, and `bye` until then or while the user still has
/// requests pending.
pub fn available_actions(spec: &DomainSpec, belief: &BeliefState, mask: bool) -> Vec<ActionId> {
    let mut acts = spec.primitive_acts.clone();
    if mask {
        let offered = belief.flag(FLAG_ENTITY_OFFERED);
        let pending = !belief.pending_requests().is_empty();
        acts.retain(|a| match a {
            ActionId::Inform => offered,
            ActionId::Bye => offered && !pending,
            _ => true,
        });
    }
    acts.extend(
        spec.options
            .iter()
            .filter(|t| OptionDef::new(**t, 1).available(belief))
            .map(|t| ActionId::Option(*t)),
    );
    acts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub domain: DomainId,
    pub point: JointPoint,
    pub user_act: Option<UserAct>,
    pub reward_extrinsic: f64,
    pub reward_intrinsic: Option<f64>,
    /// First turn of an option execution.
    pub option_boundary: bool,
}

/// One transition of the top-level policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterStep {
    pub point: JointPoint,
    pub reward: f64,
    pub discount: f64,
    pub tau: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionRun {
    pub task: SubTask,
    pub tau: usize,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub mode: EnvMode,
    pub top_domain: DomainId,
    pub goal: UserGoal,
    pub opening: UserAct,
    pub turns: Vec<TurnRecord>,
    pub master_steps: Vec<MasterStep>,
    /// Learning data per policy domain. Sub-domains get one episode per option run.
    pub transitions: BTreeMap<DomainId, Vec<EpisodeTransitions>>,
    pub options: Vec<OptionRun>,
    pub success: SuccessReport,
    pub total_return: f64,
    pub length: usize,
}

impl EpisodeLog {
    pub fn extrinsic_rewards(&self) -> Vec<f64> {
        self.turns.iter().map(|t| t.reward_extrinsic).collect()
    }

    /// Discounted return seen by the top-level policy through its own transitions.
    pub fn master_return(&self) -> f64 {
        let mut total = 0.0;
        let mut g = 1.0;
        for s in &self.master_steps {
            total += g * s.reward;
            g *= s.discount;
        }
        total
    }
}

pub struct OptionOutcome {
    pub tau: usize,
    pub cumulative_extrinsic: f64,
    pub discount: f64,
    pub sub_transitions: EpisodeTransitions,
    pub sub_success: bool,
    pub turns: Vec<TurnRecord>,
}

/// Runs one option to termination.
pub fn execute_option(
    option: &OptionDef,
    policy: &dyn Policy,
    env: &mut DialogueEnv,
    user: &mut dyn UserModel,
    config: &HierarchyConfig,
    rng: &mut DialRng,
    mode: RunMode,
) -> Result<OptionOutcome> {
    if env.is_terminal() {
        return Err(Error::Option(
            "option invoked on a terminal dialogue".into(),
        ));
    }
    env.enter_option(option.task)?;
    let spec = env.world().ontology.sub_spec(option.task)?.clone();
    let scale = match mode {
        RunMode::Train => config.sub_exploration_scale,
        RunMode::Eval => 0.0,
    };
    let mut out = OptionOutcome {
        tau: 0,
        cumulative_extrinsic: 0.0,
        discount: 1.0,
        sub_transitions: EpisodeTransitions::new(),
        sub_success: false,
        turns: Vec::new(),
    };
    loop {
        let belief = env
            .sub_belief(option.task)
            .ok_or_else(|| Error::Option(format!("no `{}` belief", option.task)))?
            .clone();
        let actions = available_actions(&spec, &belief, config.mask_unexecutable);
        let action = policy.select(option.sub_domain, &belief, &actions, scale, rng)?;
        let point = JointPoint::new(belief.to_vector(), action.clone());
        let step = env.step(option.sub_domain, &action, user)?;
        out.cumulative_extrinsic += out.discount * step.reward;
        out.discount *= config.discount;
        out.tau += 1;
        let reached = env.sub_goal_reached(option.task, user.goal());
        let done = option.terminates(reached, out.tau, step.terminal);
        let intrinsic = intrinsic_reward(env.reward_spec(), done, reached);
        out.sub_transitions
            .push(point.clone(), intrinsic, config.discount);
        out.turns.push(TurnRecord {
            domain: option.sub_domain,
            point,
            user_act: step.user_act,
            reward_extrinsic: step.reward,
            reward_intrinsic: Some(intrinsic),
            option_boundary: out.tau == 1,
        });
        if done {
            out.sub_transitions.close();
            out.sub_success = reached;
            return Ok(out);
        }
    }
}

/// Hierarchical dialogue with the user's master domain.
pub fn run_episode_hierarchical(
    policy: &dyn Policy,
    world: &World,
    user: &mut dyn UserModel,
    config: &HierarchyConfig,
    rng: &mut DialRng,
    mode: RunMode,
) -> Result<EpisodeLog> {
    run_episode(
        EnvMode::Hierarchical,
        policy,
        world,
        user,
        config,
        rng,
        mode,
    )
}

/// Flat baseline: one policy, one time scale, no options.
pub fn run_episode_flat(
    policy: &dyn Policy,
    world: &World,
    user: &mut dyn UserModel,
    config: &HierarchyConfig,
    rng: &mut DialRng,
    mode: RunMode,
) -> Result<EpisodeLog> {
    run_episode(EnvMode::Flat, policy, world, user, config, rng, mode)
}

pub fn run_episode(
    env_mode: EnvMode,
    policy: &dyn Policy,
    world: &World,
    user: &mut dyn UserModel,
    config: &HierarchyConfig,
    rng: &mut DialRng,
    mode: RunMode,
) -> Result<EpisodeLog> {
    let master = user.goal().master_domain;
    let mut env = DialogueEnv::new(world, env_mode, config.reward_spec(), master)?;
    let top = env.top_domain();
    let mut spec = env.top_spec().clone();
    if !config.options_enabled {
        spec = spec.without_options();
    }
    let scale = match (mode, env_mode) {
        (RunMode::Eval, _) => 0.0,
        (RunMode::Train, EnvMode::Hierarchical) => config.master_exploration_scale,
        (RunMode::Train, EnvMode::Flat) => config.flat_exploration_scale,
    };
    let opening = env.begin(user)?;

    let mut turns = Vec::new();
    let mut master_steps = Vec::new();
    let mut master_tr = EpisodeTransitions::new();
    let mut sub_tr: BTreeMap<DomainId, Vec<EpisodeTransitions>> = BTreeMap::new();
    let mut options = Vec::new();

    while !env.is_terminal() {
        let belief = env.master_belief().clone();
        let actions = available_actions(&spec, &belief, config.mask_unexecutable);
        let action = policy.select(top, &belief, &actions, scale, rng)?;
        let point = JointPoint::new(belief.to_vector(), action.clone());
        let (reward, discount, tau) = match &action {
            ActionId::Option(task) => {
                let option = OptionDef::new(*task, config.max_sub_steps);
                let out = execute_option(&option, policy, &mut env, user, config, rng, mode)?;
                options.push(OptionRun {
                    task: *task,
                    tau: out.tau,
                    success: out.sub_success,
                });
                sub_tr
                    .entry(option.sub_domain)
                    .or_default()
                    .push(out.sub_transitions);
                turns.extend(out.turns);
                (out.cumulative_extrinsic, out.discount, out.tau)
            }
            _ => {
                let step = env.step(top, &action, user)?;
                turns.push(TurnRecord {
                    domain: top,
                    point: point.clone(),
                    user_act: step.user_act,
                    reward_extrinsic: step.reward,
                    reward_intrinsic: None,
                    option_boundary: false,
                });
                (step.reward, config.discount, 1)
            }
        };
        master_tr.push(point.clone(), reward, discount);
        master_steps.push(MasterStep {
            point,
            reward,
            discount,
            tau,
        });
    }
    master_tr.close();

    let mut transitions = sub_tr;
    transitions.insert(top, vec![master_tr]);
    let success = env
        .success()
        .ok_or_else(|| Error::InvalidEpisode("dialogue ended without a success report".into()))?;
    let total_return = turns.iter().map(|t| t.reward_extrinsic).sum();
    Ok(EpisodeLog {
        mode: env_mode,
        top_domain: top,
        goal: user.goal().clone(),
        opening,
        length: turns.len(),
        turns,
        master_steps,
        transitions,
        options,
        success,
        total_return,
    })
}
