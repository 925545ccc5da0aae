//! The closure episode as a stepped process: a vertiport manager reports
//! closures and landing requests, UATMs query the shared knowledge base,
//! relay retarget requests to each other and apply the results.

mod script;
pub mod templates;
mod transcript;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{
    emit_text, read_notices, AgentId, AgentState, Coverage, CoveredBy, LandingRequest, Leg, Network, ShapeError,
    TargetChangeNotice, UatmId, ValidationError, VertiportId,
};
use crate::ground::{ground, GroundAtom, GroundError, GroundProgram};
use crate::solve::{answer_sets, explain, Conflict, DerivationTree, SolveError, SolveReport};
use crate::syntax::{parse_program, Program};

pub use script::{parse_script, ScriptError};
pub use transcript::{
    golden_diff, golden_scenario, run_script, GoldenRun, RunError, StageDiff, TranscriptRecord, Verdict,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("unknown vertiport {0}")]
    UnknownVertiport(VertiportId),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("unknown corridor {0}")]
    UnknownCorridor(Leg),
    #[error("waypoint {waypoint} outside 1..{length} of corridor {corridor}")]
    WaypointOutOfRange { corridor: Leg, waypoint: i64, length: i64 },
    #[error("step horizon {horizon} reached")]
    HorizonExceeded { horizon: i64 },
    #[error("nothing has been solved yet")]
    NothingSolved,
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Readback(#[from] ShapeError),
}

/// Who sends or receives a relayed message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Uatm(UatmId),
    /// The human manager of a vertiport.
    Manager(VertiportId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Uatm(u) => write!(f, "uatm {u}"),
            Endpoint::Manager(v) => write!(f, "manager of vertiport {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RelayKind {
    TargetChangeRequest { agent: AgentId, step: i64 },
    ClosureNotice { vertiport: VertiportId },
    ManagerReply { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelayMessage {
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: RelayKind,
    pub enqueued_at_step: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioEvent {
    Close {
        vertiport: VertiportId,
        manager: String,
    },
    Landing {
        agent: AgentId,
        corridor: Leg,
        waypoint: i64,
    },
    Advance,
    Reopen {
        vertiport: VertiportId,
    },
}

impl ScenarioEvent {
    pub fn close(vertiport: i64) -> Self {
        ScenarioEvent::Close {
            vertiport: VertiportId(vertiport),
            manager: format!("vp{vertiport} manager"),
        }
    }

    pub fn landing(agent: i64, corridor: Leg, waypoint: i64) -> Self {
        ScenarioEvent::Landing {
            agent: AgentId(agent),
            corridor,
            waypoint,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioEvent::Close { .. } => "close",
            ScenarioEvent::Landing { .. } => "landing",
            ScenarioEvent::Advance => "advance",
            ScenarioEvent::Reopen { .. } => "reopen",
        }
    }
}

/// Which query program a stage solve added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Survey,
    Reroute,
    Landing,
}

/// The deterministic part of one solve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub query: Query,
    pub satisfiable: bool,
    pub models: usize,
    pub shown: Vec<GroundAtom>,
    pub conflicts: Vec<Conflict>,
}

impl StageReport {
    fn new(query: Query, report: &SolveReport) -> Self {
        StageReport {
            query,
            satisfiable: report.satisfiable,
            models: report.models.len(),
            shown: report
                .models
                .first()
                .map(|m| m.shown.iter().cloned().collect())
                .unwrap_or_default(),
            conflicts: report.conflicts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Diagnostic {
    AlreadyClosed {
        vertiport: VertiportId,
    },
    NotClosed {
        vertiport: VertiportId,
    },
    NoOwner {
        vertiport: VertiportId,
    },
    NoCandidate {
        vertiport: VertiportId,
    },
    /// The fallback is itself closed; cascades are not resolved.
    CandidateClosed {
        vertiport: VertiportId,
        candidate: VertiportId,
    },
    VertiportOpen {
        vertiport: VertiportId,
    },
    Unsatisfiable {
        query: Query,
        constraints: Vec<String>,
    },
    MultipleModels {
        query: Query,
    },
    PlanNotExtended {
        agent: AgentId,
        leg: Leg,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::AlreadyClosed { vertiport } => write!(f, "vertiport {vertiport} is already closed"),
            Diagnostic::NotClosed { vertiport } => write!(f, "vertiport {vertiport} is not closed"),
            Diagnostic::NoOwner { vertiport } => write!(f, "no UATM covers vertiport {vertiport}; nobody can reroute"),
            Diagnostic::NoCandidate { vertiport } => {
                write!(
                    f,
                    "no candidate vertiport for {vertiport}; heading agents keep their target"
                )
            }
            Diagnostic::CandidateClosed { vertiport, candidate } => {
                write!(f, "candidate {candidate} of vertiport {vertiport} is closed too")
            }
            Diagnostic::VertiportOpen { vertiport } => {
                write!(f, "vertiport {vertiport} is open; no rerouting needed")
            }
            Diagnostic::Unsatisfiable { query, constraints } => {
                write!(f, "{query:?} query is unsatisfiable")?;
                for c in constraints {
                    write!(f, "; violated: {c}")?;
                }
                Ok(())
            }
            Diagnostic::MultipleModels { query } => {
                write!(f, "{query:?} query has several answer sets; using the first")
            }
            Diagnostic::PlanNotExtended { agent, leg } => {
                write!(f, "leg {leg} does not continue the plan of agent {agent}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosureOutcome {
    pub vertiport: VertiportId,
    pub owner: Option<UatmId>,
    pub candidate: Option<VertiportId>,
    pub found: Vec<Coverage>,
    /// Retargets applied by this event.
    pub notices: Vec<TargetChangeNotice>,
    pub stages: Vec<StageReport>,
    pub relayed: Vec<RelayMessage>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LandingOutcome {
    pub agent: AgentId,
    pub step: i64,
    pub corridor: Leg,
    pub waypoint: i64,
    pub landing_requests: Vec<LandingRequest>,
    pub notices: Vec<TargetChangeNotice>,
    pub stages: Vec<StageReport>,
    pub relayed: Vec<RelayMessage>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdvanceOutcome {
    pub step: i64,
    pub delivered: Vec<RelayMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReopenOutcome {
    pub vertiport: VertiportId,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventOutcome {
    Close(ClosureOutcome),
    Landing(LandingOutcome),
    Advance(AdvanceOutcome),
    Reopen(ReopenOutcome),
}

impl EventOutcome {
    pub fn stages(&self) -> &[StageReport] {
        match self {
            EventOutcome::Close(c) => &c.stages,
            EventOutcome::Landing(l) => &l.stages,
            _ => &[],
        }
    }

    pub fn notices(&self) -> &[TargetChangeNotice] {
        match self {
            EventOutcome::Close(c) => &c.notices,
            EventOutcome::Landing(l) => &l.notices,
            _ => &[],
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            EventOutcome::Close(c) => &c.diagnostics,
            EventOutcome::Landing(l) => &l.diagnostics,
            EventOutcome::Reopen(r) => &r.diagnostics,
            EventOutcome::Advance(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum LogKind {
    Event { event: ScenarioEvent },
    Sent { message: RelayMessage },
    Delivered { message: RelayMessage },
    Retarget { notice: TargetChangeNotice },
    Diagnostic { diagnostic: Diagnostic },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub step: i64,
    #[serde(flatten)]
    pub kind: LogKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Base,
    Survey,
    Reroute,
    Landing,
    Feedback,
}

struct LastSolve {
    program: GroundProgram,
    report: SolveReport,
}

/// One running episode over a network.
pub struct Session {
    network: Network,
    agents: BTreeMap<AgentId, AgentState>,
    current_step: i64,
    horizon: i64,
    relay_latency: i64,
    closed: BTreeSet<VertiportId>,
    relay_queues: BTreeMap<UatmId, VecDeque<RelayMessage>>,
    event_log: Vec<LogEntry>,
    transcript: Vec<TranscriptRecord>,
    /// Knowledge base, in the order statements were added.
    kb: Vec<(Segment, Program)>,
    /// Episode number per closed vertiport.
    episodes: BTreeMap<VertiportId, usize>,
    applied: BTreeSet<TargetChangeNotice>,
    /// Retargets each UATM has received.
    acknowledged: BTreeSet<(UatmId, AgentId, i64)>,
    last: Option<LastSolve>,
}

impl Session {
    pub fn new(network: Network, agents: Vec<AgentState>) -> Result<Self, ScenarioError> {
        network.validate(&agents)?;
        let base = parse_program(&emit_text(&network, &agents)).expect("emitted facts parse");
        Ok(Session {
            horizon: network.step_horizon,
            agents: agents.into_iter().map(|a| (a.agent, a)).collect(),
            network,
            current_step: 1,
            relay_latency: 1,
            closed: BTreeSet::new(),
            relay_queues: BTreeMap::new(),
            event_log: Vec::new(),
            transcript: Vec::new(),
            kb: vec![(Segment::Base, base)],
            episodes: BTreeMap::new(),
            applied: BTreeSet::new(),
            acknowledged: BTreeSet::new(),
            last: None,
        })
    }

    /// Steps a relayed message waits before delivery.
    pub fn with_relay_latency(mut self, steps: i64) -> Self {
        self.relay_latency = steps.max(0);
        self
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.values()
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    pub fn current_step(&self) -> i64 {
        self.current_step
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn closed(&self) -> &BTreeSet<VertiportId> {
        &self.closed
    }

    pub fn pending(&self) -> impl Iterator<Item = &RelayMessage> {
        self.relay_queues.values().flatten()
    }

    pub fn event_log(&self) -> &[LogEntry] {
        &self.event_log
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        transcript::to_jsonl(&self.transcript)
    }

    pub fn last_report(&self) -> Option<&SolveReport> {
        self.last.as_ref().map(|l| &l.report)
    }

    pub fn acknowledged(&self) -> &BTreeSet<(UatmId, AgentId, i64)> {
        &self.acknowledged
    }

    /// Agents still heading to a closed vertiport.
    pub fn stale_agents(&self) -> Vec<AgentId> {
        self.agents
            .values()
            .filter(|a| a.target().is_some_and(|t| self.closed.contains(&t)))
            .map(|a| a.agent)
            .collect()
    }

    /// The knowledge base as one program. Shown predicates are those of
    /// the latest survey query when it is the last query added, otherwise
    /// those of every query added after it.
    pub fn program(&self) -> Program {
        let mut program = Program::default();
        for (_, p) in &self.kb {
            program.rules.extend(p.rules.iter().cloned());
        }
        let start = match self.kb.iter().rposition(|(s, _)| *s == Segment::Survey) {
            Some(i) if self.kb[i + 1..].iter().any(|(s, _)| *s != Segment::Feedback) => i + 1,
            Some(i) => i,
            None => 0,
        };
        for (_, p) in &self.kb[start..] {
            program.extend(Program {
                rules: Vec::new(),
                shows: p.shows.clone(),
            });
        }
        program
    }

    /// Explains an atom of the latest model.
    pub fn explain(&self, atom: &GroundAtom) -> Result<DerivationTree, ScenarioError> {
        let last = self.last.as_ref().ok_or(ScenarioError::NothingSolved)?;
        let model = last.report.models.first().ok_or(ScenarioError::NothingSolved)?;
        Ok(explain(atom, model, &last.program)?)
    }

    /// Applies one event and records it in the transcript.
    pub fn apply(&mut self, event: ScenarioEvent) -> Result<EventOutcome, ScenarioError> {
        let outcome = match &event {
            ScenarioEvent::Close { vertiport, .. } => EventOutcome::Close(self.close(*vertiport)?),
            ScenarioEvent::Landing {
                agent,
                corridor,
                waypoint,
            } => EventOutcome::Landing(self.landing(*agent, *corridor, *waypoint)?),
            ScenarioEvent::Advance => EventOutcome::Advance(self.advance()?),
            ScenarioEvent::Reopen { vertiport } => EventOutcome::Reopen(self.reopen(*vertiport)?),
        };
        self.log_at(self.current_step, LogKind::Event { event: event.clone() });
        for d in outcome.diagnostics() {
            self.log(LogKind::Diagnostic { diagnostic: d.clone() });
        }
        self.transcript.push(TranscriptRecord::new(
            self.transcript.len() + 1,
            self.current_step,
            event,
            outcome.clone(),
        ));
        Ok(outcome)
    }

    pub fn close_vertiport(&mut self, vertiport: VertiportId) -> Result<ClosureOutcome, ScenarioError> {
        match self.apply(ScenarioEvent::close(vertiport.0))? {
            EventOutcome::Close(c) => Ok(c),
            _ => unreachable!("close yields a closure outcome"),
        }
    }

    pub fn inject_landing_request(
        &mut self,
        agent: AgentId,
        corridor: Leg,
        waypoint: i64,
    ) -> Result<LandingOutcome, ScenarioError> {
        match self.apply(ScenarioEvent::landing(agent.0, corridor, waypoint))? {
            EventOutcome::Landing(l) => Ok(l),
            _ => unreachable!("landing yields a landing outcome"),
        }
    }

    pub fn advance_step(&mut self) -> Result<Vec<RelayMessage>, ScenarioError> {
        match self.apply(ScenarioEvent::Advance)? {
            EventOutcome::Advance(a) => Ok(a.delivered),
            _ => unreachable!("advance yields an advance outcome"),
        }
    }

    pub fn reopen_vertiport(&mut self, vertiport: VertiportId) -> Result<ReopenOutcome, ScenarioError> {
        match self.apply(ScenarioEvent::Reopen { vertiport })? {
            EventOutcome::Reopen(r) => Ok(r),
            _ => unreachable!("reopen yields a reopen outcome"),
        }
    }

    fn log(&mut self, kind: LogKind) {
        self.log_at(self.current_step, kind);
    }

    fn log_at(&mut self, step: i64, kind: LogKind) {
        self.event_log.push(LogEntry { step, kind });
    }

    fn push(&mut self, segment: Segment, text: &str) {
        let program = parse_program(text).expect("query templates parse");
        self.kb.push((segment, program));
    }

    fn solve(&mut self, query: Query, diagnostics: &mut Vec<Diagnostic>) -> Result<StageReport, ScenarioError> {
        let program = ground(&self.program())?;
        let report = answer_sets(&program, 2)?;
        let stage = StageReport::new(query, &report);
        if !report.satisfiable {
            diagnostics.push(Diagnostic::Unsatisfiable {
                query,
                constraints: report.conflicts.iter().map(|c| c.rule.clone()).collect(),
            });
        } else if report.models.len() > 1 {
            diagnostics.push(Diagnostic::MultipleModels { query });
        }
        self.last = Some(LastSolve { program, report });
        Ok(stage)
    }

    fn model_atoms(&self) -> BTreeSet<GroundAtom> {
        self.last
            .as_ref()
            .and_then(|l| l.report.models.first())
            .map(|m| m.atoms.clone())
            .unwrap_or_default()
    }

    fn check_vertiport(&self, vertiport: VertiportId) -> Result<(), ScenarioError> {
        if self.network.vertiports.contains(&vertiport) {
            Ok(())
        } else {
            Err(ScenarioError::UnknownVertiport(vertiport))
        }
    }

    fn close(&mut self, vertiport: VertiportId) -> Result<ClosureOutcome, ScenarioError> {
        self.check_vertiport(vertiport)?;
        let mut out = ClosureOutcome {
            vertiport,
            owner: self.network.owner(vertiport),
            candidate: self.network.candidate(vertiport),
            found: Vec::new(),
            notices: Vec::new(),
            stages: Vec::new(),
            relayed: Vec::new(),
            diagnostics: Vec::new(),
        };
        if !self.closed.insert(vertiport) {
            out.diagnostics.push(Diagnostic::AlreadyClosed { vertiport });
        }
        let Some(owner) = out.owner else {
            out.diagnostics.push(Diagnostic::NoOwner { vertiport });
            return Ok(out);
        };
        match out.candidate {
            None => out.diagnostics.push(Diagnostic::NoCandidate { vertiport }),
            Some(c) if self.closed.contains(&c) => out.diagnostics.push(Diagnostic::CandidateClosed {
                vertiport,
                candidate: c,
            }),
            Some(_) => {}
        }

        let kb_len = self.kb.len();
        let episode = match self.episodes.get(&vertiport) {
            Some(&e) => {
                let stage = self.solve(Query::Reroute, &mut out.diagnostics)?;
                out.stages.push(stage);
                e
            }
            None => {
                let e = self.episodes.len() + 1;
                self.push(Segment::Survey, &templates::survey(vertiport, owner, e));
                let stage = self.solve(Query::Survey, &mut out.diagnostics)?;
                let ok = stage.satisfiable;
                out.stages.push(stage);
                if ok {
                    self.push(Segment::Reroute, &templates::reroute(vertiport, owner, e));
                    let stage = self.solve(Query::Reroute, &mut out.diagnostics)?;
                    out.stages.push(stage);
                }
                e
            }
        };
        if out.stages.iter().any(|s| !s.satisfiable) {
            self.kb.truncate(kb_len);
            return Ok(out);
        }
        self.episodes.insert(vertiport, episode);

        let atoms = self.model_atoms();
        out.found = found_agents(&atoms, owner, episode);
        out.notices = self.apply_notices(&atoms, &mut out.diagnostics)?;

        let me = Endpoint::Uatm(owner);
        let peers: Vec<UatmId> = self.network.uatms.iter().copied().filter(|u| *u != owner).collect();
        for u in peers {
            out.relayed
                .push(self.send(me, u, RelayKind::ClosureNotice { vertiport }));
        }
        for n in out.notices.clone() {
            for u in self.watchers_of(n.agent, owner) {
                out.relayed.push(self.send(
                    me,
                    u,
                    RelayKind::TargetChangeRequest {
                        agent: n.agent,
                        step: n.step,
                    },
                ));
            }
        }
        let text = match out.candidate {
            Some(c) => format!(
                "vertiport {vertiport} closed: {} heading agents found, {} retargeted to vertiport {c}",
                out.found.len(),
                out.notices.len()
            ),
            None => format!(
                "vertiport {vertiport} closed: {} heading agents found, no candidate",
                out.found.len()
            ),
        };
        let reply = RelayMessage {
            from: me,
            to: Endpoint::Manager(vertiport),
            kind: RelayKind::ManagerReply { text },
            enqueued_at_step: self.current_step,
        };
        self.log(LogKind::Delivered { message: reply.clone() });
        out.relayed.push(reply);
        Ok(out)
    }

    fn landing(&mut self, agent: AgentId, corridor: Leg, waypoint: i64) -> Result<LandingOutcome, ScenarioError> {
        if !self.agents.contains_key(&agent) {
            return Err(ScenarioError::UnknownAgent(agent));
        }
        let length = self
            .network
            .corridor(corridor)
            .ok_or(ScenarioError::UnknownCorridor(corridor))?
            .length;
        if !(1..=length).contains(&waypoint) {
            return Err(ScenarioError::WaypointOutOfRange {
                corridor,
                waypoint,
                length,
            });
        }
        let step = self.current_step;
        let vertiport = corridor.to;
        let mut out = LandingOutcome {
            agent,
            step,
            corridor,
            waypoint,
            landing_requests: Vec::new(),
            notices: Vec::new(),
            stages: Vec::new(),
            relayed: Vec::new(),
            diagnostics: Vec::new(),
        };
        let state = self.agents.get_mut(&agent).expect("checked above");
        state.step = step;
        state.corridor = corridor;
        state.waypoint = waypoint;

        let owner = match (self.closed.contains(&vertiport), self.network.owner(vertiport)) {
            (false, _) => {
                out.diagnostics.push(Diagnostic::VertiportOpen { vertiport });
                None
            }
            (true, None) => {
                out.diagnostics.push(Diagnostic::NoOwner { vertiport });
                None
            }
            (true, Some(u)) => Some(u),
        };
        let Some(owner) = owner else {
            return Ok(out);
        };
        let manager = Endpoint::Manager(vertiport);
        let report = RelayMessage {
            from: manager,
            to: Endpoint::Uatm(owner),
            kind: RelayKind::ClosureNotice { vertiport },
            enqueued_at_step: step,
        };
        self.log(LogKind::Delivered {
            message: report.clone(),
        });
        out.relayed.push(report);

        let kb_len = self.kb.len();
        if step + 1 > self.horizon {
            self.horizon = step + 1;
            self.push(Segment::Feedback, &format!("step({}).", self.horizon));
        }
        self.push(Segment::Landing, &templates::landing(agent, step, corridor, waypoint));
        let stage = self.solve(Query::Landing, &mut out.diagnostics)?;
        let ok = stage.satisfiable;
        out.stages.push(stage);
        if !ok {
            self.kb.truncate(kb_len);
            return Ok(out);
        }
        let atoms = self.model_atoms();
        let readback = read_notices(&atoms)?;
        out.landing_requests = readback
            .landing_requests
            .into_iter()
            .filter(|r| r.agent == agent)
            .collect();
        out.notices = self.apply_notices(&atoms, &mut out.diagnostics)?;
        for n in out.notices.clone() {
            for u in self.watchers_of(n.agent, owner) {
                out.relayed.push(self.send(
                    Endpoint::Uatm(owner),
                    u,
                    RelayKind::TargetChangeRequest {
                        agent: n.agent,
                        step: n.step,
                    },
                ));
            }
        }
        Ok(out)
    }

    fn advance(&mut self) -> Result<AdvanceOutcome, ScenarioError> {
        if self.current_step >= self.horizon {
            return Err(ScenarioError::HorizonExceeded { horizon: self.horizon });
        }
        self.current_step += 1;
        let mut delivered = Vec::new();
        for queue in self.relay_queues.values_mut() {
            while queue
                .front()
                .is_some_and(|m| m.enqueued_at_step + self.relay_latency <= self.current_step)
            {
                delivered.push(queue.pop_front().expect("front checked"));
            }
        }
        for m in &delivered {
            if let (Endpoint::Uatm(u), RelayKind::TargetChangeRequest { agent, step }) = (m.to, &m.kind) {
                self.acknowledged.insert((u, *agent, *step));
            }
            self.log(LogKind::Delivered { message: m.clone() });
        }
        Ok(AdvanceOutcome {
            step: self.current_step,
            delivered,
        })
    }

    fn reopen(&mut self, vertiport: VertiportId) -> Result<ReopenOutcome, ScenarioError> {
        self.check_vertiport(vertiport)?;
        let mut diagnostics = Vec::new();
        if !self.closed.remove(&vertiport) {
            diagnostics.push(Diagnostic::NotClosed { vertiport });
        }
        Ok(ReopenOutcome { vertiport, diagnostics })
    }

    fn send(&mut self, from: Endpoint, to: UatmId, kind: RelayKind) -> RelayMessage {
        let message = RelayMessage {
            from,
            to: Endpoint::Uatm(to),
            kind,
            enqueued_at_step: self.current_step,
        };
        self.relay_queues.entry(to).or_default().push_back(message.clone());
        self.log(LogKind::Sent {
            message: message.clone(),
        });
        message
    }

    /// UATMs other than `owner` watching the agent's current position.
    fn watchers_of(&self, agent: AgentId, owner: UatmId) -> Vec<UatmId> {
        let Some(a) = self.agents.get(&agent) else {
            return Vec::new();
        };
        let mut watchers = self.network.watchers(a.corridor, a.waypoint);
        watchers.remove(&owner);
        watchers.into_iter().collect()
    }

    /// Lifts retargets from the model, applies those not seen before to the
    /// typed plans and feeds them back as `target/3` facts.
    fn apply_notices(
        &mut self,
        atoms: &BTreeSet<GroundAtom>,
        diagnostics: &mut Vec<Diagnostic>,
    ) -> Result<Vec<TargetChangeNotice>, ScenarioError> {
        let fresh: Vec<TargetChangeNotice> = read_notices(atoms)?
            .notices
            .into_iter()
            .filter(|n| !self.applied.contains(n))
            .collect();
        let mut facts = String::new();
        for n in &fresh {
            self.applied.insert(*n);
            if let Some(a) = self.agents.get_mut(&n.agent) {
                if a.target() == Some(n.appended_leg.from) {
                    a.plan.push(n.appended_leg);
                } else {
                    diagnostics.push(Diagnostic::PlanNotExtended {
                        agent: n.agent,
                        leg: n.appended_leg,
                    });
                }
            }
            facts.push_str(&templates::retarget_fact(n.agent, n.step, n.new_target));
            facts.push('\n');
            self.log(LogKind::Retarget { notice: *n });
        }
        if !fresh.is_empty() {
            self.push(Segment::Feedback, &facts);
        }
        Ok(fresh)
    }
}

/// Coverage atoms of one episode.
fn found_agents(atoms: &BTreeSet<GroundAtom>, owner: UatmId, episode: usize) -> Vec<Coverage> {
    let suffix = templates::episode_suffix(episode);
    let own = format!("covered_by_uatm{owner}{suffix}");
    let other = format!("covered_by_other{suffix}");
    let mut found: Vec<Coverage> = atoms
        .iter()
        .filter_map(|a| {
            let by = if a.predicate == own {
                CoveredBy::Uatm(owner)
            } else if a.predicate == other {
                CoveredBy::Other
            } else {
                return None;
            };
            let [id] = a.int_args()?.try_into().ok()?;
            Some(Coverage { agent: AgentId(id), by })
        })
        .collect();
    found.sort();
    found
}
