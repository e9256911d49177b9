//! The ontology together with the generated databases, and their file format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acts::DomainId;
use crate::db::{generate_database, EntityDB};
use crate::error::{Error, Result};
use crate::ontology::Ontology;

pub const WORLD_FORMAT: &str = "hdial-world";
pub const WORLD_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub ontology: Ontology,
    pub databases: BTreeMap<DomainId, EntityDB>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    format: String,
    version: u32,
    domains: Ontology,
    databases: Vec<EntityDB>,
}

impl World {
    pub fn generate(ontology: Ontology, seed: u64) -> Result<Self> {
        ontology.validate()?;
        let mut databases = BTreeMap::new();
        for id in DomainId::MASTERS {
            databases.insert(id, generate_database(ontology.get(id)?, seed)?);
        }
        Ok(Self {
            ontology,
            databases,
        })
    }

    pub fn builtin(seed: u64) -> Result<Self> {
        Self::generate(Ontology::builtin(), seed)
    }

    pub fn db(&self, master: DomainId) -> Result<&EntityDB> {
        self.databases
            .get(&master)
            .ok_or_else(|| Error::Database(format!("no database for `{master}`")))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WorldFile {
            format: WORLD_FORMAT.into(),
            version: WORLD_VERSION,
            domains: self.ontology.clone(),
            databases: self.databases.values().cloned().collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile = serde_json::from_str(text)?;
        if file.format != WORLD_FORMAT {
            return Err(Error::Parse(format!(
                "not a world file: format `{}`",
                file.format
            )));
        }
        if file.version != WORLD_VERSION {
            return Err(Error::Version {
                what: "world file",
                expected: WORLD_VERSION,
                found: file.version,
            });
        }
        file.domains.validate()?;
        let mut databases = BTreeMap::new();
        for db in file.databases {
            let spec = file.domains.get(db.domain)?;
            let slots: Vec<&String> = spec.constraint_slots.iter().map(|s| &s.name).collect();
            if db.slots.iter().collect::<Vec<_>>() != slots {
                return Err(Error::Database(format!(
                    "`{}` database slots do not match the ontology",
                    db.domain
                )));
            }
            databases.insert(db.domain, db);
        }
        for id in DomainId::MASTERS {
            if !databases.contains_key(&id) {
                return Err(Error::Database(format!(
                    "world file lacks a `{id}` database"
                )));
            }
        }
        Ok(Self {
            ontology: file.domains,
            databases,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
