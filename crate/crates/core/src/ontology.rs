//! Domain ontologies: slots, value sets and the system action inventory.

use serde::{Deserialize, Serialize};

use crate::acts::{ActionId, DomainId, SubTask};
use crate::error::{Error, Result};

/// The value of a reference slot once the user or the master domain has
/// supplied it. The literal value (an entity name) is kept by the environment.
pub const KNOWN: &str = "known";

pub const FLAG_ENTITY_OFFERED: &str = "entity_offered";
pub const FLAG_TASK_DONE: &str = "task_done";

pub fn wants_flag(task: SubTask) -> String {
    format!("wants_{task}")
}

pub fn from_flag(master: DomainId) -> String {
    format!("from_{master}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub values: Vec<String>,
    /// Whether user goals may leave this slot unconstrained.
    #[serde(default)]
    pub dontcare_allowed: bool,
    /// Reference slots hold an entity name rather than a categorical value.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reference: bool,
}

impl SlotSpec {
    fn categorical(name: &str, values: &[&str], dontcare_allowed: bool) -> Self {
        Self {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
            dontcare_allowed,
            reference: false,
        }
    }

    fn reference(name: &str) -> Self {
        Self {
            name: name.to_string(),
            values: vec![KNOWN.to_string()],
            dontcare_allowed: false,
            reference: true,
        }
    }

    /// Width in the belief vector: values plus `dontcare` and `none`.
    pub fn width(&self) -> usize {
        self.values.len() + 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Master,
    Sub,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub id: DomainId,
    pub kind: DomainKind,
    pub constraint_slots: Vec<SlotSpec>,
    pub requestable_slots: Vec<String>,
    /// Database size, masters only.
    #[serde(default)]
    pub entity_count: usize,
    pub primitive_acts: Vec<ActionId>,
    #[serde(default)]
    pub options: Vec<SubTask>,
    pub context_flags: Vec<String>,
}

impl DomainSpec {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.constraint_slots.iter().find(|s| s.name == name)
    }

    /// Requestable slots the user asks the system about (as opposed to slots
    /// the system asks the user to fill).
    pub fn user_requestables(&self) -> impl Iterator<Item = &String> {
        self.requestable_slots
            .iter()
            .filter(|r| self.slot(r).is_none())
    }

    pub fn belief_dim(&self) -> usize {
        self.constraint_slots
            .iter()
            .map(SlotSpec::width)
            .sum::<usize>()
            + self.user_requestables().count()
            + self.context_flags.len()
    }

    /// The same domain with its options removed: the action set a master
    /// policy has before sub-tasks exist.
    pub fn without_options(&self) -> DomainSpec {
        DomainSpec {
            options: Vec::new(),
            ..self.clone()
        }
    }

    pub fn option_actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.options.iter().map(|t| ActionId::Option(*t))
    }

    /// Primitive acts followed by options.
    pub fn all_actions(&self) -> Vec<ActionId> {
        self.primitive_acts
            .iter()
            .cloned()
            .chain(self.option_actions())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self
            .constraint_slots
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("{}: duplicate slot names", self.id)));
        }
        for s in &self.constraint_slots {
            if s.values.is_empty() {
                return Err(Error::Config(format!(
                    "{}: slot `{}` has no values",
                    self.id, s.name
                )));
            }
        }
        if self.kind == DomainKind::Master && self.entity_count == 0 {
            return Err(Error::Config(format!(
                "{}: master domain needs entities",
                self.id
            )));
        }
        Ok(())
    }
}

fn slot_acts(slots: &[SlotSpec]) -> Vec<ActionId> {
    let mut acts: Vec<ActionId> = slots
        .iter()
        .map(|s| ActionId::Request(s.name.clone()))
        .collect();
    acts.extend(slots.iter().map(|s| ActionId::Confirm(s.name.clone())));
    acts
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn master(
    id: DomainId,
    slots: Vec<SlotSpec>,
    requestables: &[&str],
    entity_count: usize,
) -> DomainSpec {
    let mut acts = slot_acts(&slots);
    acts.extend([
        ActionId::Offer,
        ActionId::Inform,
        ActionId::Repeat,
        ActionId::Bye,
    ]);
    DomainSpec {
        id,
        kind: DomainKind::Master,
        constraint_slots: slots,
        requestable_slots: strings(requestables),
        entity_count,
        primitive_acts: acts,
        options: SubTask::ALL.to_vec(),
        context_flags: master_flags(),
    }
}

fn master_flags() -> Vec<String> {
    let mut flags = vec![FLAG_ENTITY_OFFERED.to_string()];
    flags.extend(SubTask::ALL.iter().map(|t| wants_flag(*t)));
    flags.push(FLAG_TASK_DONE.to_string());
    flags
}

fn sub(task: SubTask, slots: Vec<SlotSpec>) -> DomainSpec {
    let mut acts = slot_acts(&slots);
    acts.extend([ActionId::Commit(task), ActionId::Repeat]);
    DomainSpec {
        id: task.domain(),
        kind: DomainKind::Sub,
        requestable_slots: slots.iter().map(|s| s.name.clone()).collect(),
        constraint_slots: slots,
        entity_count: 0,
        primitive_acts: acts,
        options: Vec::new(),
        context_flags: DomainId::MASTERS.iter().map(|m| from_flag(*m)).collect(),
    }
}

/// All four domains of the multi-domain system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ontology {
    pub domains: Vec<DomainSpec>,
}

impl Ontology {
    pub fn builtin() -> Self {
        let areas: &[&str] = &["centre", "north", "south", "east", "west"];
        let prices: &[&str] = &["cheap", "moderate", "expensive"];
        let restaurant = master(
            DomainId::Restaurant,
            vec![
                SlotSpec::categorical("pricerange", prices, true),
                SlotSpec::categorical("area", areas, true),
                SlotSpec::categorical(
                    "food",
                    &["british", "chinese", "french", "indian", "italian", "thai"],
                    true,
                ),
            ],
            &["phone", "address", "postcode"],
            100,
        );
        let hotel = master(
            DomainId::Hotel,
            vec![
                SlotSpec::categorical("pricerange", prices, true),
                SlotSpec::categorical("kind", &["hotel", "guesthouse"], true),
                SlotSpec::categorical("stars", &["0", "1", "2", "3", "4"], true),
                SlotSpec::categorical("hasparking", &["yes", "no"], true),
                SlotSpec::categorical("area", areas, true),
            ],
            &["name", "price", "phone", "address", "postcode"],
            33,
        );
        let booking = sub(
            SubTask::Booking,
            vec![
                SlotSpec::categorical("hour", &["11am", "1pm", "4pm", "6pm", "7pm", "8pm"], false),
                SlotSpec::categorical("peopleno", &["1", "2", "3", "4", "5", "6"], false),
                SlotSpec::categorical("durationdays", &["1", "2", "3", "4", "5"], false),
                SlotSpec::categorical(
                    "day",
                    &[
                        "monday",
                        "tuesday",
                        "wednesday",
                        "thursday",
                        "friday",
                        "saturday",
                        "sunday",
                    ],
                    true,
                ),
                SlotSpec::reference("entityname"),
            ],
        );
        let payment = sub(
            SubTask::Payment,
            vec![
                SlotSpec::categorical("amount", &["10", "20", "50", "100"], false),
                SlotSpec::categorical("method", &["card", "cash", "transfer"], false),
                SlotSpec::categorical(
                    "cardnumber",
                    &["visa-1111", "visa-2222", "mc-3333", "mc-4444"],
                    false,
                ),
            ],
        );
        Self {
            domains: vec![restaurant, hotel, booking, payment],
        }
    }

    pub fn get(&self, id: DomainId) -> Result<&DomainSpec> {
        self.domains
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| Error::Config(format!("ontology has no domain `{id}`")))
    }

    pub fn sub_spec(&self, task: SubTask) -> Result<&DomainSpec> {
        self.get(task.domain())
    }

    /// A master domain merged with both sub-domains under one policy: one time
    /// scale, the union of the primitive acts, no options.
    pub fn flat(&self, master_id: DomainId) -> Result<DomainSpec> {
        let flat_id = master_id
            .flat()
            .ok_or_else(|| Error::Config(format!("`{master_id}` is not a master domain")))?;
        let master = self.get(master_id)?;
        let mut slots = master.constraint_slots.clone();
        let mut requestables = master.requestable_slots.clone();
        for task in SubTask::ALL {
            let s = self.sub_spec(task)?;
            slots.extend(s.constraint_slots.iter().cloned());
            requestables.extend(s.requestable_slots.iter().cloned());
        }
        let mut acts = slot_acts(&slots);
        acts.extend([ActionId::Offer, ActionId::Inform]);
        acts.extend(SubTask::ALL.iter().map(|t| ActionId::Commit(*t)));
        acts.extend([ActionId::Repeat, ActionId::Bye]);
        let spec = DomainSpec {
            id: flat_id,
            kind: DomainKind::Flat,
            constraint_slots: slots,
            requestable_slots: requestables,
            entity_count: master.entity_count,
            primitive_acts: acts,
            options: Vec::new(),
            context_flags: master.context_flags.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The spec whose policy controls `id`, including the derived flat domains.
    pub fn policy_spec(&self, id: DomainId) -> Result<DomainSpec> {
        match id {
            DomainId::RestaurantFlat => self.flat(DomainId::Restaurant),
            DomainId::HotelFlat => self.flat(DomainId::Hotel),
            other => self.get(other).cloned(),
        }
    }

    /// Which sub-task a slot belongs to, if any.
    pub fn sub_task_of(&self, slot: &str) -> Option<SubTask> {
        SubTask::ALL.into_iter().find(|t| {
            self.sub_spec(*t)
                .map(|s| s.slot(slot).is_some())
                .unwrap_or(false)
        })
    }

    pub fn validate(&self) -> Result<()> {
        for id in [
            DomainId::Restaurant,
            DomainId::Hotel,
            DomainId::Booking,
            DomainId::Payment,
        ] {
            self.get(id)?.validate()?;
        }
        Ok(())
    }
}
