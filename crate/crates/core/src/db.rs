//! Synthetic venue databases.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{DomainId, DONTCARE};
use crate::error::{Error, Result};
use crate::ontology::{DomainKind, DomainSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    /// Values of the constraint slots.
    pub attributes: BTreeMap<String, String>,
    /// Values of the requestable slots (phone, address, ...).
    pub info: BTreeMap<String, String>,
}

impl Entity {
    /// True if the entity satisfies every constraint that is not `dontcare`.
    pub fn matches<'a, I>(&self, constraints: I) -> bool
    where
        I: IntoIterator<Item = (&'a String, &'a String)>,
    {
        constraints
            .into_iter()
            .all(|(slot, value)| value == DONTCARE || self.attributes.get(slot) == Some(value))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityDB {
    pub domain: DomainId,
    pub seed: u64,
    pub slots: Vec<String>,
    /// Sorted by name.
    pub entities: Vec<Entity>,
}

const STREETS: &[&str] = &[
    "regent",
    "mill",
    "hills",
    "trumpington",
    "king",
    "castle",
    "station",
    "bridge",
];

fn info_value(slot: &str, idx: usize, rng: &mut ChaCha8Rng) -> String {
    match slot {
        "phone" => format!("01223 {:06}", rng.random_range(0..1_000_000u32)),
        "address" => format!(
            "{} {} street",
            rng.random_range(1..200u32),
            STREETS[rng.random_range(0..STREETS.len())]
        ),
        "postcode" => format!(
            "cb{} {}{}",
            rng.random_range(1..6u32),
            rng.random_range(1..10u32),
            idx % 10
        ),
        "price" => format!("{} pounds", 10 * rng.random_range(3..16u32)),
        other => format!("{other}-{idx}"),
    }
}

/// Builds `spec.entity_count` entities deterministically from `seed`. Every
/// value of every constraint slot occurs in at least one entity.
pub fn generate_database(spec: &DomainSpec, seed: u64) -> Result<EntityDB> {
    if spec.kind != DomainKind::Master {
        return Err(Error::Database(format!("`{}` has no database", spec.id)));
    }
    let n = spec.entity_count;
    if n == 0 {
        return Err(Error::Database(format!("`{}` has entity_count 0", spec.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<String>> = Vec::with_capacity(spec.constraint_slots.len());
    for slot in &spec.constraint_slots {
        if slot.values.len() > n {
            return Err(Error::Database(format!(
                "{} entities cannot cover the {} values of `{}`",
                n,
                slot.values.len(),
                slot.name
            )));
        }
        let mut col = slot.values.clone();
        while col.len() < n {
            col.push(slot.values[rng.random_range(0..slot.values.len())].clone());
        }
        col.shuffle(&mut rng);
        columns.push(col);
    }
    let prefix = spec.id.as_str();
    let entities = (0..n)
        .map(|i| {
            let name = format!("{prefix}-{i:03}");
            let attributes = spec
                .constraint_slots
                .iter()
                .zip(&columns)
                .map(|(s, col)| (s.name.clone(), col[i].clone()))
                .collect();
            let info = spec
                .requestable_slots
                .iter()
                .map(|r| {
                    let v = if r == "name" {
                        name.clone()
                    } else {
                        info_value(r, i, &mut rng)
                    };
                    (r.clone(), v)
                })
                .collect();
            Entity {
                name,
                attributes,
                info,
            }
        })
        .collect();
    Ok(EntityDB {
        domain: spec.id,
        seed,
        slots: spec
            .constraint_slots
            .iter()
            .map(|s| s.name.clone())
            .collect(),
        entities,
    })
}

impl EntityDB {
    /// Entities matching all non-dontcare constraints, in name order.
    pub fn query(&self, constraints: &BTreeMap<String, String>) -> Result<Vec<&Entity>> {
        db_query(self, constraints)
    }

    pub fn find(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }
}

pub fn db_query<'a>(
    db: &'a EntityDB,
    constraints: &BTreeMap<String, String>,
) -> Result<Vec<&'a Entity>> {
    if let Some(unknown) = constraints.keys().find(|k| !db.slots.contains(k)) {
        return Err(Error::UnknownSlot(unknown.clone()));
    }
    Ok(db
        .entities
        .iter()
        .filter(|e| e.matches(constraints))
        .collect())
}
