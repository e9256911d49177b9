//! Line-delimited JSON traces of single dialogues.
//!
//! The first line is a header naming the format, the goal and the user's
//! opening act. Each following line is one turn. A final summary line closes
//! the trace, so a truncated file is detectable.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::acts::{ActionId, DomainId, UserAct};
use crate::env::{EnvMode, SuccessReport};
use crate::error::{Error, Result};
use crate::smdp::EpisodeLog;
use crate::user::UserGoal;

pub const TRACE_FORMAT: &str = "hdial-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub mode: EnvMode,
    pub top_domain: DomainId,
    pub goal: UserGoal,
    pub opening: UserAct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceTurn {
    pub turn: usize,
    pub domain: DomainId,
    pub action: ActionId,
    pub belief: Vec<f64>,
    pub user_act: Option<UserAct>,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub option_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub success: SuccessReport,
    pub total_return: f64,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub turns: Vec<TraceTurn>,
    pub summary: TraceSummary,
}

impl Trace {
    pub fn from_log(log: &EpisodeLog) -> Self {
        let header = TraceHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            mode: log.mode,
            top_domain: log.top_domain,
            goal: log.goal.clone(),
            opening: log.opening.clone(),
        };
        let turns = log
            .turns
            .iter()
            .enumerate()
            .map(|(i, t)| TraceTurn {
                turn: i + 1,
                domain: t.domain,
                action: t.point.action.clone(),
                belief: t.point.belief.clone(),
                user_act: t.user_act.clone(),
                reward: t.reward_extrinsic,
                intrinsic: t.reward_intrinsic,
                option_start: t.option_boundary,
            })
            .collect();
        let summary = TraceSummary {
            success: log.success,
            total_return: log.total_return,
            length: log.length,
        };
        Self {
            header,
            turns,
            summary,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", serde_json::to_string(&self.header)?)?;
        for t in &self.turns {
            writeln!(out, "{}", serde_json::to_string(t)?)?;
        }
        writeln!(out, "{}", serde_json::to_string(&self.summary)?)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let lines: Vec<String> = input
            .lines()
            .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
            .collect::<std::io::Result<_>>()?;
        let (first, rest) = lines
            .split_first()
            .ok_or_else(|| Error::Parse("empty trace".into()))?;
        let header: TraceHeader = serde_json::from_str(first)?;
        if header.format != TRACE_FORMAT {
            return Err(Error::Parse(format!(
                "not a trace: format `{}`",
                header.format
            )));
        }
        if header.version != TRACE_VERSION {
            return Err(Error::Version {
                what: "trace",
                expected: TRACE_VERSION,
                found: header.version,
            });
        }
        let (last, body) = rest
            .split_last()
            .ok_or_else(|| Error::Parse("trace has no summary line".into()))?;
        let turns = body
            .iter()
            .map(|l| serde_json::from_str(l))
            .collect::<std::result::Result<Vec<TraceTurn>, _>>()?;
        let summary: TraceSummary = serde_json::from_str(last)?;
        if summary.length != turns.len() {
            return Err(Error::Parse(format!(
                "summary says {} turns, trace has {}",
                summary.length,
                turns.len()
            )));
        }
        Ok(Self {
            header,
            turns,
            summary,
        })
    }
}
