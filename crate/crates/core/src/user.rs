//! Agenda-based simulated user.
//!
//! The user holds a goal (constraints for a master-domain entity, slots to
//! ask about, and a sub-task to complete afterwards) and a stack of pending
//! acts. Each turn it answers the system act directly when it can, and
//! otherwise pops the next item off the stack. The sub-task only becomes
//! reachable once an entity satisfying the goal has been accepted.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::acts::{DomainId, SubTask, SystemUtterance, UserAct, DONTCARE, TASK_SLOT};
use crate::db::Entity;
use crate::error::{Error, Result};
use crate::ontology::KNOWN;
use crate::rng::DialRng;
use crate::world::World;

/// Goal sampling gives up after this many rejected draws.
pub const MAX_GOAL_DRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserConfig {
    /// Per-turn probability of changing one master constraint.
    pub p_change: f64,
    pub dontcare_prob: f64,
    /// Relative weights of restaurant and hotel when choosing the master domain.
    pub master_weights: [f64; 2],
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            p_change: 0.05,
            dontcare_prob: 0.3,
            master_weights: [0.5, 0.5],
        }
    }
}

impl UserConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.p_change) || !prob(self.dontcare_prob) {
            return Err(Error::Config(
                "user probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.master_weights.iter().any(|w| !(0.0..).contains(w))
            || self.master_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(
                "master_weights must be non-negative with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserGoal {
    pub master_domain: DomainId,
    pub constraints: BTreeMap<String, String>,
    pub requestables: Vec<String>,
    /// `None` while pretraining master policies without sub-tasks.
    pub sub_task: Option<SubTask>,
    /// Every sub-task slot except the entity reference, which is bound when
    /// the user accepts an entity.
    #[serde(default)]
    pub sub_constraints: BTreeMap<String, String>,
}

impl UserGoal {
    pub fn is_satisfied_by(&self, entity: &Entity) -> bool {
        entity.matches(&self.constraints)
    }

    /// Checks slot names and values against the world and that the goal is
    /// realisable.
    pub fn validate(&self, world: &World) -> Result<()> {
        let spec = world.ontology.get(self.master_domain)?;
        if !self.master_domain.is_master() {
            return Err(Error::Config(format!(
                "`{}` is not a master domain",
                self.master_domain
            )));
        }
        for (slot, value) in &self.constraints {
            let s = spec
                .slot(slot)
                .ok_or_else(|| Error::UnknownSlot(slot.clone()))?;
            if value != DONTCARE && !s.values.contains(value) {
                return Err(Error::Config(format!(
                    "`{value}` is not a value of `{slot}`"
                )));
            }
        }
        for r in &self.requestables {
            if !spec.user_requestables().any(|u| u == r) {
                return Err(Error::UnknownSlot(r.clone()));
            }
        }
        if let Some(task) = self.sub_task {
            let sub = world.ontology.sub_spec(task)?;
            for s in sub.constraint_slots.iter().filter(|s| !s.reference) {
                let v = self.sub_constraints.get(&s.name).ok_or_else(|| {
                    Error::Config(format!("goal lacks sub-task slot `{}`", s.name))
                })?;
                if v != DONTCARE && !s.values.contains(v) {
                    return Err(Error::Config(format!(
                        "`{v}` is not a value of `{}`",
                        s.name
                    )));
                }
            }
        }
        if world
            .db(self.master_domain)?
            .query(&self.constraints)?
            .is_empty()
        {
            return Err(Error::Config("goal constraints match no entity".into()));
        }
        Ok(())
    }
}

/// Samples a realisable goal. `with_sub_task = false` gives the master-only
/// goals used for pretraining.
pub fn sample_goal<R: rand::Rng + ?Sized>(
    world: &World,
    config: &UserConfig,
    with_sub_task: bool,
    rng: &mut R,
) -> Result<UserGoal> {
    let [wr, wh] = config.master_weights;
    let master_domain = if rng.random::<f64>() * (wr + wh) < wr {
        DomainId::Restaurant
    } else {
        DomainId::Hotel
    };
    let spec = world.ontology.get(master_domain)?;
    let db = world.db(master_domain)?;

    let mut constraints = None;
    for _ in 0..MAX_GOAL_DRAWS {
        let draw: BTreeMap<String, String> = spec
            .constraint_slots
            .iter()
            .map(|s| {
                let v = if s.dontcare_allowed && rng.random_bool(config.dontcare_prob) {
                    DONTCARE.to_string()
                } else {
                    s.values[rng.random_range(0..s.values.len())].clone()
                };
                (s.name.clone(), v)
            })
            .collect();
        if !db.query(&draw)?.is_empty() {
            constraints = Some(draw);
            break;
        }
    }
    let constraints = constraints.ok_or(Error::GoalSampling(MAX_GOAL_DRAWS))?;

    let mut requestables: Vec<String> = spec.user_requestables().cloned().collect();
    requestables.shuffle(rng);
    let keep = rng.random_range(1..=2usize).min(requestables.len());
    requestables.truncate(keep);

    let (sub_task, sub_constraints) = if with_sub_task {
        let task = SubTask::ALL[rng.random_range(0..SubTask::ALL.len())];
        let sub = world.ontology.sub_spec(task)?;
        let values = sub
            .constraint_slots
            .iter()
            .filter(|s| !s.reference)
            .map(|s| {
                let v = if s.dontcare_allowed && rng.random_bool(config.dontcare_prob) {
                    DONTCARE.to_string()
                } else {
                    s.values[rng.random_range(0..s.values.len())].clone()
                };
                (s.name.clone(), v)
            })
            .collect();
        (Some(task), values)
    } else {
        (None, BTreeMap::new())
    };

    Ok(UserGoal {
        master_domain,
        constraints,
        requestables,
        sub_task,
        sub_constraints,
    })
}

/// With probability `p_change`, moves one constraint to a different value that
/// keeps the goal realisable. Only slots that have such a value are eligible.
/// Returns the changed slot and its new value.
pub fn maybe_change_goal<R: rand::Rng + ?Sized>(
    goal: &mut UserGoal,
    world: &World,
    p_change: f64,
    rng: &mut R,
) -> Result<Option<(String, String)>> {
    if !rng.random_bool(p_change) {
        return Ok(None);
    }
    let spec = world.ontology.get(goal.master_domain)?;
    let db = world.db(goal.master_domain)?;
    let mut pool: Vec<(String, Vec<String>)> = Vec::new();
    for slot in &spec.constraint_slots {
        let Some(current) = goal.constraints.get(&slot.name) else {
            continue;
        };
        let mut alternatives = Vec::new();
        for v in slot.values.iter().filter(|v| *v != current) {
            let mut trial = goal.constraints.clone();
            trial.insert(slot.name.clone(), v.clone());
            if !db.query(&trial)?.is_empty() {
                alternatives.push(v.clone());
            }
        }
        if !alternatives.is_empty() {
            pool.push((slot.name.clone(), alternatives));
        }
    }
    if pool.is_empty() {
        return Ok(None);
    }
    let (slot, alternatives) = &pool[rng.random_range(0..pool.len())];
    let value = alternatives[rng.random_range(0..alternatives.len())].clone();
    goal.constraints.insert(slot.clone(), value.clone());
    Ok(Some((slot.clone(), value)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Looking for an entity.
    Master,
    /// Entity accepted; asking about it and completing the sub-task.
    Sub,
    /// Everything done; the next turn says goodbye.
    Done,
}

/// Stack of pending user acts.
#[derive(Clone, Debug, PartialEq)]
pub struct Agenda {
    stack: Vec<UserAct>,
    phase: Phase,
}

impl Agenda {
    pub fn new() -> Self {
        Self {
            stack: Vec::new(),
            phase: Phase::Master,
        }
    }

    pub fn push(&mut self, act: UserAct) {
        self.stack.push(act);
    }

    pub fn pop(&mut self) -> Option<UserAct> {
        self.stack.pop()
    }

    pub fn peek(&self) -> Option<&UserAct> {
        self.stack.last()
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn clear(&mut self) {
        self.stack.clear();
    }

    pub fn retain(&mut self, keep: impl FnMut(&UserAct) -> bool) {
        self.stack.retain(keep);
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Moves the phase forward. Phases never go back.
    pub fn advance(&mut self, to: Phase) {
        assert!(
            to >= self.phase,
            "agenda phase cannot go from {:?} to {to:?}",
            self.phase
        );
        self.phase = to;
    }
}

impl Default for Agenda {
    fn default() -> Self {
        Self::new()
    }
}

/// Anything that can play the user role against the environment.
pub trait UserModel {
    fn goal(&self) -> &UserGoal;

    /// Opening act of the dialogue.
    fn start(&mut self) -> Result<UserAct>;

    /// Called once per turn with what the system just said.
    fn respond(&mut self, utterance: &SystemUtterance) -> Result<UserAct>;
}

pub struct UserSimulator<'w> {
    world: &'w World,
    goal: UserGoal,
    agenda: Agenda,
    config: UserConfig,
    rng: DialRng,
    last_act: Option<UserAct>,
    accepted: Option<String>,
    sub_done: bool,
    goal_changes: usize,
}

impl<'w> UserSimulator<'w> {
    pub fn new(world: &'w World, goal: UserGoal, config: UserConfig, rng: DialRng) -> Self {
        Self {
            world,
            sub_done: goal.sub_task.is_none(),
            goal,
            agenda: Agenda::new(),
            config,
            rng,
            last_act: None,
            accepted: None,
            goal_changes: 0,
        }
    }

    /// Samples a goal with `rng` and hands the same generator to the user.
    pub fn sampled(
        world: &'w World,
        config: UserConfig,
        with_sub_task: bool,
        mut rng: DialRng,
    ) -> Result<Self> {
        let goal = sample_goal(world, &config, with_sub_task, &mut rng)?;
        Ok(Self::new(world, goal, config, rng))
    }

    pub fn from_seed(world: &'w World, goal: UserGoal, config: UserConfig, seed: u64) -> Self {
        Self::new(world, goal, config, DialRng::seed_from_u64(seed))
    }

    pub fn agenda(&self) -> &Agenda {
        &self.agenda
    }

    pub fn phase(&self) -> Phase {
        self.agenda.phase
    }

    pub fn accepted_entity(&self) -> Option<&str> {
        self.accepted.as_deref()
    }

    pub fn goal_changes(&self) -> usize {
        self.goal_changes
    }

    pub fn sub_task_done(&self) -> bool {
        self.sub_done
    }

    /// Fills the agenda and produces the opening act.
    fn open(&mut self) -> Result<UserAct> {
        let spec = self.world.ontology.get(self.goal.master_domain)?;
        let mut informs: Vec<UserAct> = spec
            .constraint_slots
            .iter()
            .filter_map(|s| {
                self.goal
                    .constraints
                    .get(&s.name)
                    .map(|v| UserAct::inform(&s.name, v))
            })
            .collect();
        informs.shuffle(&mut self.rng);
        self.agenda = Agenda::new();
        for act in informs {
            self.agenda.push(act);
        }
        let act = self.agenda.pop().unwrap_or(UserAct::Affirm);
        self.last_act = Some(act.clone());
        Ok(act)
    }

    fn pop_or(&mut self, fallback: UserAct) -> UserAct {
        self.agenda.pop().unwrap_or(fallback)
    }

    fn forget_inform(&mut self, slot: &str) {
        self.agenda
            .retain(|a| !matches!(a, UserAct::Inform { slot: s, .. } if s == slot));
    }

    fn is_master_slot(&self, slot: &str) -> bool {
        self.goal.constraints.contains_key(slot)
    }

    /// Goal value of a slot of the active sub-task, once reachable.
    fn sub_value(&self, slot: &str) -> Option<String> {
        if self.agenda.phase != Phase::Sub {
            return None;
        }
        let task = self.goal.sub_task?;
        let spec = self.world.ontology.sub_spec(task).ok()?;
        let s = spec.slot(slot)?;
        if s.reference {
            self.accepted.clone()
        } else {
            self.goal.sub_constraints.get(slot).cloned()
        }
    }

    fn accept(&mut self, entity: &Entity) {
        self.accepted = Some(entity.name.clone());
        self.agenda.clear();
        self.agenda.advance(Phase::Sub);
        if let Some(task) = self.goal.sub_task {
            self.agenda.push(UserAct::inform(TASK_SLOT, task.as_str()));
        }
        for r in self.goal.requestables.iter().rev() {
            self.agenda.push(UserAct::request(r));
        }
    }

    fn first_violation(&self, entity: &Entity) -> Option<(String, String)> {
        let spec = self.world.ontology.get(self.goal.master_domain).ok()?;
        spec.constraint_slots.iter().find_map(|s| {
            let g = self.goal.constraints.get(&s.name)?;
            (g != DONTCARE && entity.attributes.get(&s.name) != Some(g))
                .then(|| (s.name.clone(), g.clone()))
        })
    }

    fn commit_mismatch(
        &self,
        task: SubTask,
        values: &BTreeMap<String, Option<String>>,
        entity: &Option<String>,
    ) -> Option<(String, String)> {
        let spec = self.world.ontology.sub_spec(task).ok()?;
        for s in &spec.constraint_slots {
            if s.reference {
                let accepted = self.accepted.clone().unwrap_or_default();
                if entity.as_deref() != Some(accepted.as_str()) {
                    return Some((s.name.clone(), accepted));
                }
                continue;
            }
            let goal = self.goal.sub_constraints.get(&s.name)?;
            let ok = match values.get(&s.name).and_then(|v| v.as_deref()) {
                None => false,
                Some(v) => goal == DONTCARE || v == goal,
            };
            if !ok {
                return Some((s.name.clone(), goal.clone()));
            }
        }
        None
    }

    fn react(&mut self, utterance: &SystemUtterance) -> UserAct {
        let phase = self.agenda.phase;
        match utterance {
            SystemUtterance::Request { slot } => {
                if let Some(v) = self.goal.constraints.get(slot).cloned() {
                    self.forget_inform(slot);
                    UserAct::inform(slot, v)
                } else if let Some(v) = self.sub_value(slot) {
                    UserAct::inform(slot, v)
                } else {
                    UserAct::negate()
                }
            }
            SystemUtterance::Confirm { slot, value } => {
                let goal_value = if self.is_master_slot(slot) {
                    self.forget_inform(slot);
                    self.goal.constraints.get(slot).cloned()
                } else {
                    self.sub_value(slot)
                };
                let Some(g) = goal_value else {
                    return UserAct::negate();
                };
                let reference = self.world.ontology.sub_task_of(slot).is_some()
                    && self
                        .goal
                        .sub_task
                        .and_then(|t| self.world.ontology.sub_spec(t).ok())
                        .and_then(|s| s.slot(slot))
                        .map(|s| s.reference)
                        .unwrap_or(false);
                let consistent = if reference {
                    value.as_deref() == Some(KNOWN)
                } else {
                    g == DONTCARE || value.as_deref() == Some(g.as_str())
                };
                if consistent {
                    UserAct::Affirm
                } else {
                    UserAct::correct(slot, g)
                }
            }
            SystemUtterance::Offer { entity } => match phase {
                Phase::Master => {
                    if self.goal.is_satisfied_by(entity) {
                        self.accept(entity);
                        self.pop_or(UserAct::Affirm)
                    } else {
                        match self.first_violation(entity) {
                            Some((slot, value)) => {
                                self.forget_inform(&slot);
                                UserAct::correct(slot, value)
                            }
                            None => UserAct::negate(),
                        }
                    }
                }
                _ if self.accepted.as_deref() == Some(entity.name.as_str()) => {
                    self.pop_or(UserAct::Affirm)
                }
                _ => UserAct::negate(),
            },
            SystemUtterance::NoneAvailable => self.pop_or(UserAct::negate()),
            SystemUtterance::Inform { slots, .. } => {
                self.agenda
                    .retain(|a| !matches!(a, UserAct::Request { slot } if slots.contains(slot)));
                self.pop_or(UserAct::Affirm)
            }
            SystemUtterance::Commit {
                task,
                values,
                entity,
            } => {
                if phase != Phase::Sub || self.goal.sub_task != Some(*task) {
                    return UserAct::negate();
                }
                if self.sub_done {
                    return self.pop_or(UserAct::Affirm);
                }
                match self.commit_mismatch(*task, values, entity) {
                    Some((slot, value)) => UserAct::correct(slot, value),
                    None => {
                        self.sub_done = true;
                        self.agenda.retain(
                            |a| !matches!(a, UserAct::Inform { slot, .. } if slot == TASK_SLOT),
                        );
                        self.pop_or(UserAct::Affirm)
                    }
                }
            }
            SystemUtterance::Repeat => self.last_act.clone().unwrap_or_else(UserAct::negate),
            SystemUtterance::Bye => UserAct::Bye,
        }
    }
}

impl UserModel for UserSimulator<'_> {
    fn goal(&self) -> &UserGoal {
        &self.goal
    }

    fn start(&mut self) -> Result<UserAct> {
        self.open()
    }

    fn respond(&mut self, utterance: &SystemUtterance) -> Result<UserAct> {
        if self.agenda.phase == Phase::Master {
            if let Some((slot, value)) = maybe_change_goal(
                &mut self.goal,
                self.world,
                self.config.p_change,
                &mut self.rng,
            )? {
                self.goal_changes += 1;
                self.forget_inform(&slot);
                self.agenda.push(UserAct::inform(slot, value));
            }
        }
        let act = if self.agenda.phase == Phase::Done {
            UserAct::Bye
        } else {
            self.react(utterance)
        };
        if self.agenda.phase == Phase::Sub && self.sub_done && self.agenda.is_empty() {
            self.agenda.advance(Phase::Done);
        }
        self.last_act = Some(act.clone());
        Ok(act)
    }
}

pub const GOALS_FORMAT: &str = "hdial-goals";
pub const GOALS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalFile {
    format: String,
    version: u32,
    goals: Vec<UserGoal>,
}

/// Parses a TOML goal fixture file and validates every goal against `world`.
pub fn parse_goals(text: &str, world: &World) -> Result<Vec<UserGoal>> {
    let file: GoalFile = toml::from_str(text)?;
    if file.format != GOALS_FORMAT {
        return Err(Error::Parse(format!(
            "not a goal file: format `{}`",
            file.format
        )));
    }
    if file.version != GOALS_VERSION {
        return Err(Error::Version {
            what: "goal file",
            expected: GOALS_VERSION,
            found: file.version,
        });
    }
    for g in &file.goals {
        g.validate(world)?;
    }
    Ok(file.goals)
}

pub fn load_goals(path: &Path, world: &World) -> Result<Vec<UserGoal>> {
    parse_goals(&std::fs::read_to_string(path)?, world)
}

pub fn goals_to_toml(goals: &[UserGoal]) -> Result<String> {
    Ok(toml::to_string(&GoalFile {
        format: GOALS_FORMAT.into(),
        version: GOALS_VERSION,
        goals: goals.to_vec(),
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agenda_is_a_stack() {
        let mut a = Agenda::new();
        a.push(UserAct::inform("area", "north"));
        a.push(UserAct::request("phone"));
        assert_eq!(a.peek(), Some(&UserAct::request("phone")));
        assert_eq!(a.pop(), Some(UserAct::request("phone")));
        assert_eq!(a.len(), 1);
        a.retain(|x| !matches!(x, UserAct::Inform { .. }));
        assert!(a.is_empty());
    }

    #[test]
    #[should_panic(expected = "cannot go")]
    fn agenda_phase_never_goes_back() {
        let mut a = Agenda::new();
        a.advance(Phase::Sub);
        a.advance(Phase::Master);
    }
}
