use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{load_network, AgentState, Network, TargetChangeNotice};
use crate::fixtures::episode;
use crate::ground::GroundAtom;

use super::{parse_script, EventOutcome, ScenarioError, ScenarioEvent, Session, StageReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Satisfiable,
    Unsatisfiable,
}

/// One line of the structured transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub kind: &'static str,
    /// Step after the event.
    pub step: i64,
    /// Absent when the event solved nothing.
    pub verdict: Option<Verdict>,
    pub notices: Vec<TargetChangeNotice>,
    pub event: ScenarioEvent,
    pub outcome: EventOutcome,
}

impl TranscriptRecord {
    pub(super) fn new(seq: usize, step: i64, event: ScenarioEvent, outcome: EventOutcome) -> Self {
        let stages = outcome.stages();
        let verdict = (!stages.is_empty()).then(|| {
            if stages.iter().all(|s| s.satisfiable) {
                Verdict::Satisfiable
            } else {
                Verdict::Unsatisfiable
            }
        });
        TranscriptRecord {
            seq,
            kind: event.name(),
            step,
            verdict,
            notices: outcome.notices().to_vec(),
            event,
            outcome,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

pub(super) fn to_jsonl(records: &[TranscriptRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

pub struct GoldenRun {
    pub session: Session,
    /// Every stage solve, in order.
    pub stages: Vec<StageReport>,
}

/// An event that could not be applied, numbered from 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("event {index} ({kind}): {error}")]
pub struct RunError {
    pub index: usize,
    pub kind: &'static str,
    pub error: ScenarioError,
}

/// Applies `events` in order to a fresh session.
pub fn run_script(
    network: Network,
    agents: Vec<AgentState>,
    events: Vec<ScenarioEvent>,
) -> Result<GoldenRun, RunError> {
    let mut session = Session::new(network, agents).map_err(|error| RunError {
        index: 0,
        kind: "load",
        error,
    })?;
    let mut stages = Vec::new();
    for (i, event) in events.into_iter().enumerate() {
        let kind = event.name();
        let outcome = session.apply(event).map_err(|error| RunError {
            index: i + 1,
            kind,
            error,
        })?;
        stages.extend(outcome.stages().iter().cloned());
    }
    Ok(GoldenRun { session, stages })
}

/// The bundled closure episode: close vertiport 6, advance, and agent 4's
/// landing request.
pub fn golden_scenario() -> GoldenRun {
    let (network, agents) = load_network(episode::NETWORK).expect("bundled network loads");
    let events = parse_script(episode::SCRIPT).expect("bundled script parses");
    run_script(network, agents, events).expect("bundled script applies")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageDiff {
    pub stage: usize,
    pub satisfiable: bool,
    pub missing: Vec<GroundAtom>,
    pub unexpected: Vec<GroundAtom>,
}

impl StageDiff {
    pub fn passed(&self) -> bool {
        self.satisfiable && self.missing.is_empty() && self.unexpected.is_empty()
    }
}

/// Compares stage solves with the three expected answer sets. A stage that
/// never ran counts as unsatisfiable with every atom missing.
pub fn golden_diff(stages: &[StageReport]) -> Vec<StageDiff> {
    (1..=3)
        .map(|stage| {
            let expected = episode::expected(stage);
            let (satisfiable, got): (bool, BTreeSet<GroundAtom>) = match stages.get(stage - 1) {
                Some(s) => (s.satisfiable, s.shown.iter().cloned().collect()),
                None => (false, BTreeSet::new()),
            };
            StageDiff {
                stage,
                satisfiable,
                missing: expected.difference(&got).cloned().collect(),
                unexpected: got.difference(&expected).cloned().collect(),
            }
        })
        .collect()
}
