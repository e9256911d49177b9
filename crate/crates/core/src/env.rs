//! The multi-domain dialogue environment.
//!
//! The environment owns the belief states, executes system acts against the
//! databases, forwards what the system said to the user, and scores the
//! dialogue. In hierarchical mode there is one belief per master domain plus
//! one per sub-task; in flat mode a single belief covers everything.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acts::{ActionId, DomainId, SubTask, SystemUtterance, UserAct, DONTCARE};
use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::ontology::{from_flag, DomainSpec, FLAG_ENTITY_OFFERED, FLAG_TASK_DONE};
use crate::user::{UserGoal, UserModel};
use crate::world::World;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvMode {
    Hierarchical,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSpec {
    pub success_bonus: f64,
    pub per_turn: f64,
    pub max_length: usize,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            success_bonus: 20.0,
            per_turn: -1.0,
            max_length: 30,
        }
    }
}

impl RewardSpec {
    /// Reward for one turn; the bonus is paid on the terminal turn only.
    pub fn turn_reward(&self, terminal: bool, success: bool) -> f64 {
        if terminal && success {
            self.per_turn + self.success_bonus
        } else {
            self.per_turn
        }
    }
}

/// Internal critic for sub-dialogues: same shape as the extrinsic reward.
pub fn intrinsic_reward(reward: &RewardSpec, terminal: bool, sub_goal_reached: bool) -> f64 {
    reward.turn_reward(terminal, sub_goal_reached)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferRecord {
    pub entity: String,
    pub attributes: BTreeMap<String, String>,
    /// Requestable slots informed while this entity was on the table.
    pub informed: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub task: SubTask,
    pub values: BTreeMap<String, Option<String>>,
    pub entity: Option<String>,
}

/// Everything the success check needs to know about a dialogue.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueFacts {
    pub offers: Vec<OfferRecord>,
    pub commits: Vec<CommitRecord>,
}

impl DialogueFacts {
    fn offer_mut(&mut self, entity: &str) -> Option<&mut OfferRecord> {
        self.offers.iter_mut().find(|o| o.entity == entity)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub overall: bool,
    pub master_part: bool,
    pub sub_part: bool,
}

/// True if `commit` completes the goal's sub-task: every slot holds the goal
/// value (any value for `dontcare`) and an entity is attached.
pub fn commit_satisfies(goal: &UserGoal, commit: &CommitRecord) -> bool {
    if Some(commit.task) != goal.sub_task || commit.entity.is_none() {
        return false;
    }
    goal.sub_constraints.iter().all(|(slot, want)| {
        match commit.values.get(slot).and_then(|v| v.as_deref()) {
            None => false,
            Some(v) => want == DONTCARE || v == want,
        }
    })
}

/// Master part: some offered entity matches the goal constraints and every
/// goal requestable was informed for it. Sub part: the last commit of the
/// goal's sub-task matches the sub-goal (vacuously true without a sub-task).
pub fn success_check(goal: &UserGoal, facts: &DialogueFacts) -> SuccessReport {
    let master_part = facts.offers.iter().any(|o| {
        goal.constraints
            .iter()
            .all(|(s, v)| v == DONTCARE || o.attributes.get(s) == Some(v))
            && goal.requestables.iter().all(|r| o.informed.contains(r))
    });
    let sub_part = match goal.sub_task {
        None => true,
        Some(task) => facts
            .commits
            .iter()
            .rev()
            .find(|c| c.task == task)
            .is_some_and(|c| commit_satisfies(goal, c)),
    };
    SuccessReport {
        overall: master_part && sub_part,
        master_part,
        sub_part,
    }
}

/// Result of one system turn.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub utterance: SystemUtterance,
    /// `None` when the system ended the dialogue itself.
    pub user_act: Option<UserAct>,
    pub reward: f64,
    pub terminal: bool,
}

pub struct DialogueEnv<'w> {
    world: &'w World,
    mode: EnvMode,
    reward: RewardSpec,
    master: DomainId,
    master_spec: DomainSpec,
    master_belief: BeliefState,
    sub_beliefs: BTreeMap<SubTask, BeliefState>,
    /// Entity handed to each sub-task at option entry.
    bound_entity: BTreeMap<SubTask, String>,
    current_entity: Option<String>,
    facts: DialogueFacts,
    turns: usize,
    terminal: bool,
    success: Option<SuccessReport>,
}

impl<'w> DialogueEnv<'w> {
    pub fn new(
        world: &'w World,
        mode: EnvMode,
        reward: RewardSpec,
        master: DomainId,
    ) -> Result<Self> {
        if !master.is_master() {
            return Err(Error::Config(format!("`{master}` is not a master domain")));
        }
        let master_spec = match mode {
            EnvMode::Hierarchical => world.ontology.get(master)?.clone(),
            EnvMode::Flat => world.ontology.flat(master)?,
        };
        let mut sub_beliefs = BTreeMap::new();
        if mode == EnvMode::Hierarchical {
            for task in SubTask::ALL {
                sub_beliefs.insert(task, BeliefState::new(world.ontology.sub_spec(task)?));
            }
        }
        Ok(Self {
            world,
            mode,
            reward,
            master,
            master_belief: BeliefState::new(&master_spec),
            master_spec,
            sub_beliefs,
            bound_entity: BTreeMap::new(),
            current_entity: None,
            facts: DialogueFacts::default(),
            turns: 0,
            terminal: false,
            success: None,
        })
    }

    pub fn world(&self) -> &'w World {
        self.world
    }

    pub fn mode(&self) -> EnvMode {
        self.mode
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn master(&self) -> DomainId {
        self.master
    }

    /// Domain id of the top-level policy: the master itself or its flat variant.
    pub fn top_domain(&self) -> DomainId {
        self.master_belief.domain
    }

    pub fn top_spec(&self) -> &DomainSpec {
        &self.master_spec
    }

    pub fn master_belief(&self) -> &BeliefState {
        &self.master_belief
    }

    pub fn sub_belief(&self, task: SubTask) -> Option<&BeliefState> {
        self.sub_beliefs.get(&task)
    }

    pub fn belief(&self, domain: DomainId) -> Result<&BeliefState> {
        if domain == self.master_belief.domain {
            return Ok(&self.master_belief);
        }
        SubTask::ALL
            .into_iter()
            .find(|t| t.domain() == domain)
            .and_then(|t| self.sub_beliefs.get(&t))
            .ok_or_else(|| {
                Error::Config(format!("domain `{domain}` is not active in this dialogue"))
            })
    }

    pub fn facts(&self) -> &DialogueFacts {
        &self.facts
    }

    pub fn current_entity(&self) -> Option<&str> {
        self.current_entity.as_deref()
    }

    pub fn turns(&self) -> usize {
        self.turns
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Final success report, available once the dialogue is terminal.
    pub fn success(&self) -> Option<SuccessReport> {
        self.success
    }

    /// Lets the user open the dialogue.
    pub fn begin(&mut self, user: &mut dyn UserModel) -> Result<UserAct> {
        let act = user.start()?;
        self.observe(&act, user.goal());
        Ok(act)
    }

    /// Hands control to a sub-task: the master domain and the offered entity
    /// are written into the sub-domain belief.
    pub fn enter_option(&mut self, task: SubTask) -> Result<()> {
        if self.terminal {
            return Err(Error::Option(
                "cannot enter an option in a terminal dialogue".into(),
            ));
        }
        let master = self.master;
        let entity = self.current_entity.clone();
        let spec = self.world.ontology.sub_spec(task)?;
        let belief = self
            .sub_beliefs
            .get_mut(&task)
            .ok_or_else(|| Error::Option(format!("no `{task}` sub-domain in flat mode")))?;
        for m in DomainId::MASTERS {
            belief.set_flag(&from_flag(m), m == master);
        }
        if let Some(name) = entity {
            for s in spec.constraint_slots.iter().filter(|s| s.reference) {
                belief.set_known(&s.name);
            }
            self.bound_entity.insert(task, name);
        }
        Ok(())
    }

    /// Internal critic: has the goal's sub-task been committed correctly?
    pub fn sub_goal_reached(&self, task: SubTask, goal: &UserGoal) -> bool {
        goal.sub_task == Some(task)
            && self
                .facts
                .commits
                .iter()
                .rev()
                .find(|c| c.task == task)
                .is_some_and(|c| commit_satisfies(goal, c))
    }

    fn slot_value(belief: &BeliefState, slot: &str) -> Option<String> {
        belief.top(slot).map(str::to_string)
    }

    /// Turns a system act into what the user hears, recording offers,
    /// informs and commits.
    pub fn apply_system_act(
        &mut self,
        domain: DomainId,
        act: &ActionId,
    ) -> Result<SystemUtterance> {
        let belief = self.belief(domain)?.clone();
        let allowed = if domain == self.master_belief.domain {
            self.master_spec.primitive_acts.contains(act)
        } else {
            self.world
                .ontology
                .get(domain)?
                .primitive_acts
                .contains(act)
        };
        if !allowed && !act.is_option() {
            return Err(Error::UnknownAction(format!(
                "`{act}` in domain `{domain}`"
            )));
        }
        let utterance = match act {
            ActionId::Request(slot) => SystemUtterance::Request { slot: slot.clone() },
            ActionId::Confirm(slot) => SystemUtterance::Confirm {
                slot: slot.clone(),
                value: Self::slot_value(&belief, slot),
            },
            ActionId::Offer => self.offer(&belief)?,
            ActionId::Inform => {
                let slots = self.master_belief.pending_requests();
                match self.current_entity.clone() {
                    Some(name) => {
                        for s in &slots {
                            self.master_belief.set_requested(s, false);
                        }
                        if let Some(rec) = self.facts.offer_mut(&name) {
                            rec.informed.extend(slots.iter().cloned());
                        }
                        let entity = self.world.db(self.master)?.find(&name).cloned();
                        SystemUtterance::Inform { entity, slots }
                    }
                    None => SystemUtterance::Inform {
                        entity: None,
                        slots: Vec::new(),
                    },
                }
            }
            ActionId::Commit(task) => {
                let spec = self.world.ontology.sub_spec(*task)?;
                let values = spec
                    .constraint_slots
                    .iter()
                    .filter(|s| !s.reference)
                    .map(|s| (s.name.clone(), Self::slot_value(&belief, &s.name)))
                    .collect();
                let entity = match self.mode {
                    EnvMode::Hierarchical => self.bound_entity.get(task).cloned(),
                    EnvMode::Flat => self.current_entity.clone(),
                };
                let record = CommitRecord {
                    task: *task,
                    values,
                    entity: entity.clone(),
                };
                self.facts.commits.push(record.clone());
                SystemUtterance::Commit {
                    task: *task,
                    values: record.values,
                    entity,
                }
            }
            ActionId::Repeat => SystemUtterance::Repeat,
            ActionId::Bye => SystemUtterance::Bye,
            ActionId::Option(_) => {
                return Err(Error::Option(
                    "options are executed by the policy loop, not the environment".into(),
                ))
            }
        };
        Ok(utterance)
    }

    fn offer(&mut self, belief: &BeliefState) -> Result<SystemUtterance> {
        let db = self.world.db(self.master)?;
        let constraints: BTreeMap<String, String> = db
            .slots
            .iter()
            .filter_map(|s| {
                belief
                    .top(s)
                    .filter(|v| *v != DONTCARE)
                    .map(|v| (s.clone(), v.to_string()))
            })
            .collect();
        let Some(entity) = db.query(&constraints)?.first().map(|e| (*e).clone()) else {
            self.current_entity = None;
            return Ok(SystemUtterance::NoneAvailable);
        };
        if self.facts.offer_mut(&entity.name).is_none() {
            self.facts.offers.push(OfferRecord {
                entity: entity.name.clone(),
                attributes: entity.attributes.clone(),
                informed: BTreeSet::new(),
            });
        }
        self.current_entity = Some(entity.name.clone());
        Ok(SystemUtterance::Offer { entity })
    }

    /// Applies a user act to every belief and refreshes the context flags.
    fn observe(&mut self, act: &UserAct, goal: &UserGoal) {
        self.master_belief.apply(act);
        for b in self.sub_beliefs.values_mut() {
            b.apply(act);
        }
        self.refresh_flags(goal);
    }

    fn refresh_flags(&mut self, goal: &UserGoal) {
        let offered = match &self.current_entity {
            Some(name) => self
                .world
                .db(self.master)
                .ok()
                .and_then(|db| db.find(name))
                .is_some_and(|e| {
                    e.attributes
                        .iter()
                        .all(|(slot, value)| match self.master_belief.top(slot) {
                            None => true,
                            Some(v) => v == DONTCARE || v == value,
                        })
                }),
            None => false,
        };
        self.master_belief.set_flag(FLAG_ENTITY_OFFERED, offered);
        if self.mode == EnvMode::Flat {
            let refs: Vec<String> = self
                .master_spec
                .constraint_slots
                .iter()
                .filter(|s| s.reference)
                .map(|s| s.name.clone())
                .collect();
            for r in refs {
                if offered {
                    self.master_belief.set_known(&r);
                }
            }
        }
        let done = goal
            .sub_task
            .is_some_and(|t| self.sub_goal_reached(t, goal));
        self.master_belief.set_flag(FLAG_TASK_DONE, done);
    }

    /// One system turn: execute `act` in `domain`, let the user answer, update
    /// beliefs and pay the extrinsic reward.
    pub fn step(
        &mut self,
        domain: DomainId,
        act: &ActionId,
        user: &mut dyn UserModel,
    ) -> Result<StepOutcome> {
        if self.terminal {
            return Err(Error::InvalidEpisode("step on a terminal dialogue".into()));
        }
        let utterance = self.apply_system_act(domain, act)?;
        self.turns += 1;
        let user_act = if matches!(utterance, SystemUtterance::Bye) {
            None
        } else {
            Some(user.respond(&utterance)?)
        };
        match &user_act {
            Some(a) => self.observe(a, user.goal()),
            None => self.refresh_flags(user.goal()),
        }
        let terminal = user_act.is_none()
            || matches!(user_act, Some(UserAct::Bye))
            || self.turns >= self.reward.max_length;
        let mut success = false;
        if terminal {
            let report = success_check(user.goal(), &self.facts);
            success = report.overall;
            self.success = Some(report);
            self.terminal = true;
        }
        Ok(StepOutcome {
            utterance,
            user_act,
            reward: self.reward.turn_reward(terminal, success),
            terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonus_only_on_successful_terminal_turn() {
        let r = RewardSpec::default();
        assert_eq!(r.turn_reward(false, true), -1.0);
        assert_eq!(r.turn_reward(true, false), -1.0);
        assert_eq!(r.turn_reward(true, true), 19.0);
    }

    #[test]
    fn commit_with_missing_value_does_not_satisfy() {
        let goal = UserGoal {
            master_domain: DomainId::Hotel,
            constraints: Default::default(),
            requestables: vec![],
            sub_task: Some(SubTask::Payment),
            sub_constraints: [("method".to_string(), "card".to_string())].into(),
        };
        let mut commit = CommitRecord {
            task: SubTask::Payment,
            values: [("method".to_string(), None)].into(),
            entity: Some("x".into()),
        };
        assert!(!commit_satisfies(&goal, &commit));
        commit.values.insert("method".into(), Some("card".into()));
        assert!(commit_satisfies(&goal, &commit));
        commit.task = SubTask::Booking;
        assert!(!commit_satisfies(&goal, &commit));
    }
}
