//! Action selection: GP policies, the hand-written optimal policy used as a
//! ceiling, and the uniform random floor.

use std::collections::BTreeMap;
use std::path::Path;

use rand::RngExt;

use crate::acts::{ActionId, DomainId, SubTask};
use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::gp::{GPQModel, GpParams};
use crate::kernel::KernelSpec;
use crate::ontology::{Ontology, FLAG_ENTITY_OFFERED, FLAG_TASK_DONE};
use crate::rng::DialRng;

pub trait Policy {
    /// Picks one of `actions` for `belief` in `domain`. `exploration` is the
    /// posterior-sampling scale; 0 means greedy.
    fn select(
        &self,
        domain: DomainId,
        belief: &BeliefState,
        actions: &[ActionId],
        exploration: f64,
        rng: &mut DialRng,
    ) -> Result<ActionId>;
}

/// One GP model per domain.
#[derive(Clone, Debug, Default)]
pub struct GpPolicies {
    pub models: BTreeMap<DomainId, GPQModel>,
}

impl GpPolicies {
    /// Fresh prior models for `domains`, sized from the ontology.
    pub fn fresh(
        ontology: &Ontology,
        domains: &[DomainId],
        kernel: &KernelSpec,
        params: &GpParams,
    ) -> Result<Self> {
        let mut models = BTreeMap::new();
        for &d in domains {
            let dim = ontology.policy_spec(d)?.belief_dim();
            models.insert(d, GPQModel::new(kernel.clone(), params.clone(), dim)?);
        }
        Ok(Self { models })
    }

    pub fn get(&self, domain: DomainId) -> Result<&GPQModel> {
        self.models.get(&domain).ok_or(Error::MissingPolicy(domain))
    }

    pub fn get_mut(&mut self, domain: DomainId) -> Result<&mut GPQModel> {
        self.models
            .get_mut(&domain)
            .ok_or(Error::MissingPolicy(domain))
    }

    /// Writes `<dir>/<domain>.json` for every model.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (d, m) in &self.models {
            m.save(&dir.join(format!("{d}.json")))?;
        }
        Ok(())
    }

    /// Loads whichever of `domains` have a file in `dir`; a missing file is an error.
    pub fn load_dir(dir: &Path, domains: &[DomainId]) -> Result<Self> {
        let mut models = BTreeMap::new();
        for &d in domains {
            models.insert(d, GPQModel::load(&dir.join(format!("{d}.json")))?);
        }
        Ok(Self { models })
    }
}

impl Policy for GpPolicies {
    fn select(
        &self,
        domain: DomainId,
        belief: &BeliefState,
        actions: &[ActionId],
        exploration: f64,
        rng: &mut DialRng,
    ) -> Result<ActionId> {
        self.get(domain)?
            .sample_action(&belief.to_vector(), actions, exploration, rng)
    }
}

/// Hand-coded policy that completes every dialogue when the user does not
/// change goals. Works in master, sub and flat domains.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    ontology: Ontology,
}

impl ScriptedPolicy {
    pub fn new(ontology: Ontology) -> Self {
        Self { ontology }
    }

    fn first_unknown(&self, belief: &BeliefState, task: Option<SubTask>) -> Option<String> {
        let names: Vec<String> = match task {
            Some(t) => self
                .ontology
                .sub_spec(t)
                .ok()?
                .constraint_slots
                .iter()
                .filter(|s| !s.reference)
                .map(|s| s.name.clone())
                .collect(),
            None => self
                .ontology
                .get(master_of(belief.domain))
                .ok()?
                .constraint_slots
                .iter()
                .map(|s| s.name.clone())
                .collect(),
        };
        names.into_iter().find(|n| belief.top(n).is_none())
    }

    fn choose(&self, belief: &BeliefState, actions: &[ActionId]) -> ActionId {
        let domain = belief.domain;
        if let Some(task) = SubTask::ALL.into_iter().find(|t| t.domain() == domain) {
            return match self.first_unknown(belief, Some(task)) {
                Some(slot) => ActionId::Request(slot),
                None => ActionId::Commit(task),
            };
        }
        let offered = belief.flag(FLAG_ENTITY_OFFERED);
        if offered && !belief.pending_requests().is_empty() {
            return ActionId::Inform;
        }
        if belief.flag(FLAG_TASK_DONE) {
            return ActionId::Bye;
        }
        if offered {
            if let Some(task) = SubTask::ALL
                .into_iter()
                .find(|t| belief.flag(&crate::ontology::wants_flag(*t)))
            {
                let option = ActionId::Option(task);
                if actions.contains(&option) {
                    return option;
                }
                return match self.first_unknown(belief, Some(task)) {
                    Some(slot) => ActionId::Request(slot),
                    None => ActionId::Commit(task),
                };
            }
            return ActionId::Bye;
        }
        match self.first_unknown(belief, None) {
            Some(slot) => ActionId::Request(slot),
            None => ActionId::Offer,
        }
    }
}

fn master_of(domain: DomainId) -> DomainId {
    match domain {
        DomainId::RestaurantFlat => DomainId::Restaurant,
        DomainId::HotelFlat => DomainId::Hotel,
        d => d,
    }
}

impl Policy for ScriptedPolicy {
    fn select(
        &self,
        _domain: DomainId,
        belief: &BeliefState,
        actions: &[ActionId],
        _exploration: f64,
        _rng: &mut DialRng,
    ) -> Result<ActionId> {
        let a = self.choose(belief, actions);
        if actions.contains(&a) {
            Ok(a)
        } else {
            Err(Error::UnknownAction(format!(
                "scripted choice `{a}` is not available"
            )))
        }
    }
}

/// Uniform choice among the available actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn select(
        &self,
        _domain: DomainId,
        _belief: &BeliefState,
        actions: &[ActionId],
        _exploration: f64,
        rng: &mut DialRng,
    ) -> Result<ActionId> {
        if actions.is_empty() {
            return Err(Error::NoActions);
        }
        Ok(actions[rng.random_range(0..actions.len())].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::world::World;

    #[test]
    fn scripted_requests_then_offers() {
        let w = World::builtin(7).unwrap();
        let spec = w.ontology.get(DomainId::Restaurant).unwrap();
        let mut b = BeliefState::new(spec);
        let p = ScriptedPolicy::new(w.ontology.clone());
        let all = spec.all_actions();
        let first = p.choose(&b, &all);
        assert!(matches!(first, ActionId::Request(_)), "{first}");
        for s in &spec.constraint_slots {
            let v = s.values[0].clone();
            b = crate::belief::update_belief(&b, &crate::acts::UserAct::inform(&s.name, v));
        }
        assert_eq!(p.choose(&b, &all), ActionId::Offer);
    }

    #[test]
    fn scripted_refuses_unavailable_choice() {
        let w = World::builtin(7).unwrap();
        let spec = w.ontology.get(DomainId::Hotel).unwrap();
        let b = BeliefState::new(spec);
        let mut rng = stream_rng(1, Stream::Misc, 0);
        let p = ScriptedPolicy::new(w.ontology.clone());
        assert!(p
            .select(DomainId::Hotel, &b, &[ActionId::Repeat], 0.0, &mut rng)
            .is_err());
    }

    #[test]
    fn random_policy_needs_actions() {
        let w = World::builtin(7).unwrap();
        let b = BeliefState::new(w.ontology.get(DomainId::Hotel).unwrap());
        let mut rng = stream_rng(1, Stream::Misc, 0);
        assert!(RandomPolicy
            .select(DomainId::Hotel, &b, &[], 0.0, &mut rng)
            .is_err());
        let one = [ActionId::Bye];
        assert_eq!(
            RandomPolicy
                .select(DomainId::Hotel, &b, &one, 0.0, &mut rng)
                .unwrap(),
            ActionId::Bye
        );
    }
}
