//! Noise-free belief tracking.
//!
//! Layout of the flattened vector: for each constraint slot a distribution over
//! `values ++ [dontcare, none]`, then one flag per user-requestable slot
//! (requested and not yet answered), then the domain's context flags.

use serde::{Deserialize, Serialize};

use crate::acts::{DomainId, UserAct, DONTCARE, TASK_SLOT};
use crate::ontology::{DomainSpec, KNOWN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotBelief {
    pub name: String,
    values: Vec<String>,
    reference: bool,
    probs: Vec<f64>,
}

impl SlotBelief {
    fn dontcare_index(&self) -> usize {
        self.values.len()
    }

    fn none_index(&self) -> usize {
        self.values.len() + 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn collapse(&mut self, idx: usize) {
        self.probs.iter_mut().for_each(|p| *p = 0.0);
        self.probs[idx] = 1.0;
    }

    fn set(&mut self, value: &str) {
        let idx = if value == DONTCARE {
            self.dontcare_index()
        } else if self.reference {
            0
        } else {
            self.values
                .iter()
                .position(|v| v == value)
                .unwrap_or(self.none_index())
        };
        self.collapse(idx);
    }

    /// Most likely value; `None` when the slot is still unknown.
    pub fn top(&self) -> Option<&str> {
        let idx = crate::gp::argmax(&self.probs);
        if idx == self.none_index() {
            None
        } else if idx == self.dontcare_index() {
            Some(DONTCARE)
        } else {
            Some(&self.values[idx])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub domain: DomainId,
    slots: Vec<SlotBelief>,
    requested: Vec<(String, bool)>,
    flags: Vec<(String, bool)>,
}

impl BeliefState {
    pub fn new(spec: &DomainSpec) -> Self {
        let slots = spec
            .constraint_slots
            .iter()
            .map(|s| {
                let mut probs = vec![0.0; s.width()];
                probs[s.values.len() + 1] = 1.0;
                SlotBelief {
                    name: s.name.clone(),
                    values: s.values.clone(),
                    reference: s.reference,
                    probs,
                }
            })
            .collect();
        Self {
            domain: spec.id,
            slots,
            requested: spec
                .user_requestables()
                .map(|r| (r.clone(), false))
                .collect(),
            flags: spec
                .context_flags
                .iter()
                .map(|f| (f.clone(), false))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.slots.iter().map(|s| s.probs.len()).sum::<usize>()
            + self.requested.len()
            + self.flags.len()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for s in &self.slots {
            v.extend_from_slice(&s.probs);
        }
        v.extend(self.requested.iter().map(|(_, r)| f64::from(u8::from(*r))));
        v.extend(self.flags.iter().map(|(_, f)| f64::from(u8::from(*f))));
        v
    }

    pub fn slots(&self) -> &[SlotBelief] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&SlotBelief> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn has_slot(&self, name: &str) -> bool {
        self.slot(name).is_some()
    }

    /// Most likely value of `slot`; `None` if unknown or not a slot here.
    pub fn top(&self, slot: &str) -> Option<&str> {
        self.slot(slot).and_then(SlotBelief::top)
    }

    /// Collapses `slot` onto `value`. Values outside the value set collapse
    /// onto `none`. Returns false if this belief has no such slot.
    pub fn set(&mut self, slot: &str, value: &str) -> bool {
        match self.slots.iter_mut().find(|s| s.name == slot) {
            Some(s) => {
                s.set(value);
                true
            }
            None => false,
        }
    }

    /// Marks a reference slot as supplied.
    pub fn set_known(&mut self, slot: &str) -> bool {
        self.set(slot, KNOWN)
    }

    pub fn is_requested(&self, slot: &str) -> bool {
        self.requested.iter().any(|(s, r)| s == slot && *r)
    }

    pub fn pending_requests(&self) -> Vec<String> {
        self.requested
            .iter()
            .filter(|(_, r)| *r)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn set_requested(&mut self, slot: &str, on: bool) -> bool {
        match self.requested.iter_mut().find(|(s, _)| s == slot) {
            Some(entry) => {
                entry.1 = on;
                true
            }
            None => false,
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        self.flags.iter().any(|(f, v)| f == name && *v)
    }

    pub fn has_flag(&self, name: &str) -> bool {
        self.flags.iter().any(|(f, _)| f == name)
    }

    pub fn set_flag(&mut self, name: &str, on: bool) -> bool {
        match self.flags.iter_mut().find(|(f, _)| f == name) {
            Some(entry) => {
                entry.1 = on;
                true
            }
            None => false,
        }
    }

    /// Applies a user act in place. Slots and flags this belief does not
    /// track are ignored.
    pub fn apply(&mut self, act: &UserAct) {
        match act {
            UserAct::Inform { slot, value } if slot == TASK_SLOT => {
                self.set_flag(&format!("wants_{value}"), true);
            }
            UserAct::Inform { slot, value } => {
                self.set(slot, value);
            }
            UserAct::Negate {
                correction: Some((slot, value)),
            } => {
                self.set(slot, value);
            }
            UserAct::Request { slot } => {
                self.set_requested(slot, true);
            }
            UserAct::Affirm | UserAct::Negate { correction: None } | UserAct::Bye => {}
        }
    }
}

/// Pure form of [`BeliefState::apply`].
pub fn update_belief(belief: &BeliefState, act: &UserAct) -> BeliefState {
    let mut next = belief.clone();
    next.apply(act);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Ontology;

    fn hotel() -> BeliefState {
        BeliefState::new(Ontology::builtin().get(DomainId::Hotel).unwrap())
    }

    fn normalised(b: &BeliefState) -> bool {
        b.slots()
            .iter()
            .all(|s| (s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9)
    }

    #[test]
    fn starts_unknown() {
        let b = hotel();
        assert_eq!(b.dim(), 36);
        assert_eq!(b.to_vector().len(), 36);
        assert!(normalised(&b));
        assert_eq!(b.top("pricerange"), None);
    }

    #[test]
    fn inform_collapses() {
        let b = update_belief(&hotel(), &UserAct::inform("pricerange", "moderate"));
        assert_eq!(b.top("pricerange"), Some("moderate"));
        assert_eq!(
            b.slot("pricerange").unwrap().probs(),
            &[0.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert!(normalised(&b));
    }

    #[test]
    fn inform_dontcare() {
        let b = update_belief(&hotel(), &UserAct::inform("stars", DONTCARE));
        assert_eq!(b.top("stars"), Some(DONTCARE));
        assert_eq!(b.slot("stars").unwrap().probs()[5], 1.0);
    }

    #[test]
    fn unknown_value_maps_to_none() {
        let b = update_belief(&hotel(), &UserAct::inform("stars", "4"));
        let b = update_belief(&b, &UserAct::inform("stars", "seven"));
        assert_eq!(b.top("stars"), None);
        assert!(normalised(&b));
    }

    #[test]
    fn request_sets_flag() {
        let b = update_belief(&hotel(), &UserAct::request("price"));
        assert!(b.is_requested("price"));
        assert_eq!(b.pending_requests(), ["price"]);
    }

    #[test]
    fn task_inform_sets_want_flag() {
        let b = update_belief(&hotel(), &UserAct::inform(TASK_SLOT, "booking"));
        assert!(b.flag("wants_booking"));
        assert!(!b.flag("wants_payment"));
    }

    #[test]
    fn correction_overrides() {
        let b = update_belief(&hotel(), &UserAct::inform("kind", "hotel"));
        let b = update_belief(&b, &UserAct::correct("kind", "guesthouse"));
        assert_eq!(b.top("kind"), Some("guesthouse"));
        let b = update_belief(&b, &UserAct::Affirm);
        assert_eq!(b.top("kind"), Some("guesthouse"));
    }
}
