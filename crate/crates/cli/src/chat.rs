//! Terminal chat: a person plays the user at the dialogue-act level.

use std::io::{BufRead, Write};

use hdial::acts::{SystemUtterance, UserAct, TASK_SLOT};
use hdial::db::Entity;
use hdial::user::{UserGoal, UserModel};

pub const HELP: &str = "\
Type one dialogue act per line:
  inform(slot=value)   state a constraint, e.g. inform(food=thai)
  request(slot)        ask about the offered venue, e.g. request(phone)
  affirm               yes
  negate               no
  negate(slot=value)   no, and here is the right value
  bye                  end the dialogue
To start a sub-task after accepting a venue: inform(task=booking) or inform(task=payment).";

/// Renders a system act as a line of templated text.
pub fn render(u: &SystemUtterance) -> String {
    match u {
        SystemUtterance::Request { slot } => format!("Which {slot} would you like?"),
        SystemUtterance::Confirm {
            slot,
            value: Some(v),
        } => format!("Did you say the {slot} is {v}?"),
        SystemUtterance::Confirm { slot, value: None } => format!("Could you confirm the {slot}?"),
        SystemUtterance::Offer { entity } => format!(
            "How about {}? It has {}.",
            entity.name,
            pairs(&entity.attributes)
        ),
        SystemUtterance::NoneAvailable => "Sorry, nothing matches what you asked for.".into(),
        SystemUtterance::Inform {
            entity: Some(e),
            slots,
        } => inform_text(e, slots),
        SystemUtterance::Inform { entity: None, .. } => "I have not suggested a venue yet.".into(),
        SystemUtterance::Commit {
            task,
            values,
            entity,
        } => {
            let what = entity.as_deref().unwrap_or("an unnamed venue");
            let details: Vec<String> = values
                .iter()
                .map(|(k, v)| format!("{k} {}", v.as_deref().unwrap_or("unknown")))
                .collect();
            format!("I confirm a {task} at {what}: {}.", details.join(", "))
        }
        SystemUtterance::Repeat => "Sorry, could you say that again?".into(),
        SystemUtterance::Bye => "Goodbye.".into(),
    }
}

fn pairs<'a>(kv: impl IntoIterator<Item = (&'a String, &'a String)>) -> String {
    kv.into_iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn inform_text(e: &Entity, slots: &[String]) -> String {
    if slots.is_empty() {
        return format!("{} has {}.", e.name, pairs(&e.attributes));
    }
    let facts: Vec<String> = slots
        .iter()
        .map(|s| {
            let v = e.info.get(s).or_else(|| e.attributes.get(s));
            format!("the {s} is {}", v.map_or("not known", String::as_str))
        })
        .collect();
    format!("For {}, {}.", e.name, facts.join(" and "))
}

/// The goal a human is asked to pursue, as prose.
pub fn describe_goal(g: &UserGoal) -> String {
    let mut lines = vec![format!(
        "You are looking for a {} with {}.",
        g.master_domain,
        pairs(&g.constraints)
    )];
    if !g.requestables.is_empty() {
        lines.push(format!("Ask for its {}.", g.requestables.join(" and ")));
    }
    if let Some(task) = g.sub_task {
        lines.push(format!(
            "Then arrange a {task} ({TASK_SLOT}={task}) with {}.",
            pairs(&g.sub_constraints)
        ));
    }
    lines.join("\n")
}

/// A user whose acts are typed on `input`; system turns are echoed to `output`.
pub struct HumanUser<R, W> {
    goal: UserGoal,
    input: R,
    output: W,
    /// Set when the human leaves on the opening turn.
    leaving: bool,
}

impl<R: BufRead, W: Write> HumanUser<R, W> {
    pub fn new(goal: UserGoal, input: R, output: W) -> Self {
        Self {
            goal,
            input,
            output,
            leaving: false,
        }
    }

    pub fn output(&mut self) -> &mut W {
        &mut self.output
    }

    /// Reads lines until one parses; end of input counts as `bye`.
    fn read_act(&mut self) -> hdial::Result<UserAct> {
        loop {
            write!(self.output, "> ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                writeln!(self.output)?;
                return Ok(UserAct::Bye);
            }
            if line.trim().is_empty() {
                continue;
            }
            match line.parse::<UserAct>() {
                Ok(act) => return Ok(act),
                Err(_) if line.trim() == "help" => writeln!(self.output, "{HELP}")?,
                Err(e) => writeln!(self.output, "{e}\n{HELP}")?,
            }
        }
    }
}

impl<R: BufRead, W: Write> UserModel for HumanUser<R, W> {
    fn goal(&self) -> &UserGoal {
        &self.goal
    }

    fn start(&mut self) -> hdial::Result<UserAct> {
        writeln!(self.output, "system: Hello, how may I help you?")?;
        let act = self.read_act()?;
        self.leaving = act == UserAct::Bye;
        Ok(act)
    }

    fn respond(&mut self, u: &SystemUtterance) -> hdial::Result<UserAct> {
        if self.leaving {
            return Ok(UserAct::Bye);
        }
        writeln!(self.output, "system: {}", render(u))?;
        self.read_act()
    }
}
