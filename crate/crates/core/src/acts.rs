//! Identifiers and dialogue acts exchanged between the system and the user.
//!
//! Everything here has a canonical text form (`request(area)`,
//! `inform(stars=dontcare)`, `book()`), used by the trace files, the model
//! files and the chat prompt.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::db::Entity;
use crate::error::{Error, Result};

/// Value meaning "any value is acceptable".
pub const DONTCARE: &str = "dontcare";

/// Pseudo-slot through which the user announces the sub-task they want.
pub const TASK_SLOT: &str = "task";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainId {
    Restaurant,
    Hotel,
    Booking,
    Payment,
    /// Restaurant combined with both sub-domains under one policy.
    RestaurantFlat,
    /// Hotel combined with both sub-domains under one policy.
    HotelFlat,
}

impl DomainId {
    pub const MASTERS: [DomainId; 2] = [DomainId::Restaurant, DomainId::Hotel];
    pub const SUBS: [DomainId; 2] = [DomainId::Booking, DomainId::Payment];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::Restaurant => "restaurant",
            DomainId::Hotel => "hotel",
            DomainId::Booking => "booking",
            DomainId::Payment => "payment",
            DomainId::RestaurantFlat => "restaurant-flat",
            DomainId::HotelFlat => "hotel-flat",
        }
    }

    pub fn is_master(self) -> bool {
        matches!(self, DomainId::Restaurant | DomainId::Hotel)
    }

    /// Flat counterpart of a master domain.
    pub fn flat(self) -> Option<DomainId> {
        match self {
            DomainId::Restaurant => Some(DomainId::RestaurantFlat),
            DomainId::Hotel => Some(DomainId::HotelFlat),
            _ => None,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "restaurant" => DomainId::Restaurant,
            "hotel" => DomainId::Hotel,
            "booking" => DomainId::Booking,
            "payment" => DomainId::Payment,
            "restaurant-flat" => DomainId::RestaurantFlat,
            "hotel-flat" => DomainId::HotelFlat,
            other => return Err(Error::Parse(format!("unknown domain `{other}`"))),
        })
    }
}

/// The shared sub-tasks. Each one is reachable from a master domain as an option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubTask {
    Booking,
    Payment,
}

impl SubTask {
    pub const ALL: [SubTask; 2] = [SubTask::Booking, SubTask::Payment];

    pub fn domain(self) -> DomainId {
        match self {
            SubTask::Booking => DomainId::Booking,
            SubTask::Payment => DomainId::Payment,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubTask::Booking => "booking",
            SubTask::Payment => "payment",
        }
    }

    /// Name of the option that invokes this sub-task.
    pub fn option_name(self) -> &'static str {
        match self {
            SubTask::Booking => "book",
            SubTask::Payment => "pay",
        }
    }
}

impl fmt::Display for SubTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "booking" => Ok(SubTask::Booking),
            "payment" => Ok(SubTask::Payment),
            other => Err(Error::Parse(format!("unknown sub-task `{other}`"))),
        }
    }
}

/// A system action: either a primitive dialogue act or a composite option.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ActionId {
    Request(String),
    Confirm(String),
    /// Offer the first database entity consistent with the current belief.
    Offer,
    /// Inform every slot the user has requested about the offered entity.
    Inform,
    /// Place the booking / payment with the values currently believed.
    Commit(SubTask),
    Repeat,
    Bye,
    /// Temporally extended action that hands control to a sub-domain.
    Option(SubTask),
}

impl ActionId {
    pub fn is_option(&self) -> bool {
        matches!(self, ActionId::Option(_))
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionId::Request(s) => write!(f, "request({s})"),
            ActionId::Confirm(s) => write!(f, "confirm({s})"),
            ActionId::Offer => f.write_str("offer"),
            ActionId::Inform => f.write_str("inform"),
            ActionId::Commit(t) => write!(f, "commit({t})"),
            ActionId::Repeat => f.write_str("repeat"),
            ActionId::Bye => f.write_str("bye"),
            ActionId::Option(t) => write!(f, "{}()", t.option_name()),
        }
    }
}

fn call_arg<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')
}

impl FromStr for ActionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = match s {
            "offer" => Some(ActionId::Offer),
            "inform" => Some(ActionId::Inform),
            "repeat" => Some(ActionId::Repeat),
            "bye" => Some(ActionId::Bye),
            "book()" => Some(ActionId::Option(SubTask::Booking)),
            "pay()" => Some(ActionId::Option(SubTask::Payment)),
            _ => None,
        };
        if let Some(a) = parsed {
            return Ok(a);
        }
        if let Some(slot) = call_arg(s, "request").filter(|a| !a.is_empty()) {
            return Ok(ActionId::Request(slot.to_string()));
        }
        if let Some(slot) = call_arg(s, "confirm").filter(|a| !a.is_empty()) {
            return Ok(ActionId::Confirm(slot.to_string()));
        }
        if let Some(task) = call_arg(s, "commit") {
            return Ok(ActionId::Commit(task.parse()?));
        }
        Err(Error::UnknownAction(s.to_string()))
    }
}

impl From<ActionId> for String {
    fn from(a: ActionId) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for ActionId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A single user dialogue act. Users produce exactly one act per turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum UserAct {
    Inform {
        slot: String,
        value: String,
    },
    Request {
        slot: String,
    },
    Affirm,
    /// Denial, optionally carrying the correct value for one slot.
    Negate {
        correction: Option<(String, String)>,
    },
    Bye,
}

impl UserAct {
    pub fn inform(slot: impl Into<String>, value: impl Into<String>) -> Self {
        UserAct::Inform {
            slot: slot.into(),
            value: value.into(),
        }
    }

    pub fn request(slot: impl Into<String>) -> Self {
        UserAct::Request { slot: slot.into() }
    }

    pub fn negate() -> Self {
        UserAct::Negate { correction: None }
    }

    pub fn correct(slot: impl Into<String>, value: impl Into<String>) -> Self {
        UserAct::Negate {
            correction: Some((slot.into(), value.into())),
        }
    }

    /// The slot/value pair this act asserts, if any.
    pub fn asserted(&self) -> Option<(&str, &str)> {
        match self {
            UserAct::Inform { slot, value } => Some((slot, value)),
            UserAct::Negate {
                correction: Some((slot, value)),
            } => Some((slot, value)),
            _ => None,
        }
    }
}

impl fmt::Display for UserAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserAct::Inform { slot, value } => write!(f, "inform({slot}={value})"),
            UserAct::Request { slot } => write!(f, "request({slot})"),
            UserAct::Affirm => f.write_str("affirm"),
            UserAct::Negate { correction: None } => f.write_str("negate"),
            UserAct::Negate {
                correction: Some((s, v)),
            } => write!(f, "negate({s}={v})"),
            UserAct::Bye => f.write_str("bye"),
        }
    }
}

fn slot_value(arg: &str) -> Option<(String, String)> {
    let (slot, value) = arg.split_once('=')?;
    let (slot, value) = (slot.trim(), value.trim());
    if slot.is_empty() || value.is_empty() || slot.contains(char::is_whitespace) {
        return None;
    }
    Some((slot.to_string(), value.to_string()))
}

impl FromStr for UserAct {
    type Err = Error;

    /// Parses the act grammar: `inform(slot=value)`, `request(slot)`,
    /// `affirm`, `negate`, `negate(slot=value)`, `bye`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a user act: `{s}`"));
        match s {
            "affirm" => return Ok(UserAct::Affirm),
            "negate" => return Ok(UserAct::negate()),
            "bye" => return Ok(UserAct::Bye),
            _ => {}
        }
        if let Some(arg) = call_arg(s, "inform") {
            let (slot, value) = slot_value(arg).ok_or_else(bad)?;
            return Ok(UserAct::Inform { slot, value });
        }
        if let Some(arg) = call_arg(s, "negate") {
            let pair = slot_value(arg).ok_or_else(bad)?;
            return Ok(UserAct::Negate {
                correction: Some(pair),
            });
        }
        if let Some(arg) = call_arg(s, "request") {
            let slot = arg.trim();
            if slot.is_empty() || slot.contains(char::is_whitespace) {
                return Err(bad());
            }
            return Ok(UserAct::request(slot));
        }
        Err(bad())
    }
}

impl From<UserAct> for String {
    fn from(a: UserAct) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for UserAct {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// What the user observes after the environment executes a system act.
#[derive(Clone, Debug, PartialEq)]
pub enum SystemUtterance {
    Request {
        slot: String,
    },
    /// `value` is the belief's current top value, `None` if nothing is known.
    Confirm {
        slot: String,
        value: Option<String>,
    },
    Offer {
        entity: Entity,
    },
    NoneAvailable,
    Inform {
        entity: Option<Entity>,
        slots: Vec<String>,
    },
    Commit {
        task: SubTask,
        values: BTreeMap<String, Option<String>>,
        entity: Option<String>,
    },
    Repeat,
    Bye,
}
