//! Operator-facing access to one running session: commands, read-only
//! snapshots and a stream of state deltas. Transport lives elsewhere.

use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

use crate::domain::{
    coverage_gaps, AgentId, AgentState, CoverageGap, Leg, Network, NetworkConfig, UatmId, VertiportId,
};
use crate::ground::GroundAtom;
use crate::scenario::{EventOutcome, RelayMessage, ScenarioError, ScenarioEvent, Session, TranscriptRecord, Verdict};
use crate::solve::{DerivationTree, SolveError};

/// Version of every document this module produces.
pub const WIRE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("no session loaded")]
    NoSession,
    #[error("cannot parse atom `{text}`: {reason}")]
    BadAtom { text: String, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

impl ServiceError {
    /// Whether the atom asked about is simply absent from the model.
    pub fn is_not_in_model(&self) -> bool {
        matches!(
            self,
            ServiceError::Scenario(ScenarioError::Solve(SolveError::NotInModel { .. }))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertiportStatus {
    pub id: VertiportId,
    pub closed: bool,
    pub owner: Option<UatmId>,
    pub candidate: Option<VertiportId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub agent: AgentId,
    pub step: i64,
    pub corridor: Leg,
    pub waypoint: i64,
    pub plan: Vec<Leg>,
    pub target: Option<VertiportId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub schema: u32,
    pub step: i64,
    pub horizon: i64,
    pub vertiports: Vec<VertiportStatus>,
    pub agents: Vec<AgentSnapshot>,
    pub pending: Vec<RelayMessage>,
    /// Verdict of the latest solve.
    pub verdict: Option<Verdict>,
}

impl SessionSnapshot {
    pub fn capture(session: &Session) -> Self {
        let network = session.network();
        SessionSnapshot {
            schema: WIRE_SCHEMA,
            step: session.current_step(),
            horizon: session.horizon(),
            vertiports: network
                .vertiports
                .iter()
                .map(|&id| VertiportStatus {
                    id,
                    closed: session.closed().contains(&id),
                    owner: network.owner(id),
                    candidate: network.candidate(id),
                })
                .collect(),
            agents: session.agents().map(agent_snapshot).collect(),
            pending: session.pending().cloned().collect(),
            verdict: session.last_report().map(|r| {
                if r.satisfiable {
                    Verdict::Satisfiable
                } else {
                    Verdict::Unsatisfiable
                }
            }),
        }
    }
}

fn agent_snapshot(a: &AgentState) -> AgentSnapshot {
    AgentSnapshot {
        agent: a.agent,
        step: a.step,
        corridor: a.corridor,
        waypoint: a.waypoint,
        plan: a.plan.clone(),
        target: a.target(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkDocument {
    pub schema: u32,
    pub config: NetworkConfig,
    pub coverage_gaps: Vec<CoverageGap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandResult {
    pub schema: u32,
    pub accepted: bool,
    pub outcome: Option<EventOutcome>,
    pub diagnostics: Vec<String>,
}

/// Sent to every subscriber once per applied command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Delta {
    pub schema: u32,
    pub seq: u64,
    pub record: TranscriptRecord,
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Explanation {
    pub schema: u32,
    pub atom: GroundAtom,
    pub tree: DerivationTree,
    /// The tree as indented text.
    pub text: String,
}

struct Writer {
    initial: Option<(Network, Vec<AgentState>)>,
    session: Option<Session>,
    seq: u64,
    subscribers: Vec<UnboundedSender<Delta>>,
}

#[derive(Default)]
struct View {
    network: Option<Arc<NetworkDocument>>,
    snapshot: Option<Arc<SessionSnapshot>>,
}

/// One session behind a single writer. Reads are served from the view
/// published after each command.
pub struct OperatorService {
    writer: Mutex<Writer>,
    view: RwLock<View>,
}

impl Default for OperatorService {
    fn default() -> Self {
        OperatorService::new()
    }
}

impl OperatorService {
    pub fn new() -> Self {
        OperatorService {
            writer: Mutex::new(Writer {
                initial: None,
                session: None,
                seq: 0,
                subscribers: Vec::new(),
            }),
            view: RwLock::new(View::default()),
        }
    }

    pub fn with_session(network: Network, agents: Vec<AgentState>) -> Result<Self, ServiceError> {
        let service = OperatorService::new();
        service.load(network, agents)?;
        Ok(service)
    }

    /// Replaces the session with a fresh one.
    pub fn load(&self, network: Network, agents: Vec<AgentState>) -> Result<(), ServiceError> {
        let session = Session::new(network.clone(), agents.clone())?;
        let document = NetworkDocument {
            schema: WIRE_SCHEMA,
            config: NetworkConfig::from_network(&network, &agents),
            coverage_gaps: coverage_gaps(&network),
        };
        let mut w = self.lock();
        let snapshot = SessionSnapshot::capture(&session);
        w.initial = Some((network, agents));
        w.session = Some(session);
        let mut view = self.view.write().expect("view lock");
        view.network = Some(Arc::new(document));
        view.snapshot = Some(Arc::new(snapshot));
        Ok(())
    }

    /// Restarts the loaded session from its initial state.
    pub fn reset(&self) -> Result<SessionSnapshot, ServiceError> {
        let (network, agents) = self.lock().initial.clone().ok_or(ServiceError::NoSession)?;
        self.load(network, agents)?;
        self.state().map(|s| (*s).clone())
    }

    pub fn network(&self) -> Result<Arc<NetworkDocument>, ServiceError> {
        self.view
            .read()
            .expect("view lock")
            .network
            .clone()
            .ok_or(ServiceError::NoSession)
    }

    pub fn state(&self) -> Result<Arc<SessionSnapshot>, ServiceError> {
        self.view
            .read()
            .expect("view lock")
            .snapshot
            .clone()
            .ok_or(ServiceError::NoSession)
    }

    pub fn subscribe(&self) -> UnboundedReceiver<Delta> {
        let (tx, rx) = unbounded_channel();
        self.lock().subscribers.push(tx);
        rx
    }

    pub fn close(&self, vertiport: VertiportId) -> CommandResult {
        self.command(ScenarioEvent::close(vertiport.0))
    }

    pub fn landing_request(&self, agent: AgentId, corridor: Leg, waypoint: i64) -> CommandResult {
        self.command(ScenarioEvent::landing(agent.0, corridor, waypoint))
    }

    pub fn advance(&self) -> CommandResult {
        self.command(ScenarioEvent::Advance)
    }

    pub fn reopen(&self, vertiport: VertiportId) -> CommandResult {
        self.command(ScenarioEvent::Reopen { vertiport })
    }

    /// Applies one event. Accepted commands publish a new snapshot and
    /// send one delta to every subscriber before the lock is released.
    pub fn command(&self, event: ScenarioEvent) -> CommandResult {
        let mut w = self.lock();
        let Some(session) = w.session.as_mut() else {
            return rejected(&ServiceError::NoSession);
        };
        let outcome = match session.apply(event) {
            Ok(o) => o,
            Err(e) => return rejected(&ServiceError::Scenario(e)),
        };
        let record = session
            .transcript()
            .last()
            .expect("applied events are recorded")
            .clone();
        let snapshot = SessionSnapshot::capture(session);
        w.seq += 1;
        let delta = Delta {
            schema: WIRE_SCHEMA,
            seq: w.seq,
            record,
            snapshot: snapshot.clone(),
        };
        w.subscribers.retain(|s| s.send(delta.clone()).is_ok());
        self.view.write().expect("view lock").snapshot = Some(Arc::new(snapshot));
        CommandResult {
            schema: WIRE_SCHEMA,
            accepted: true,
            diagnostics: outcome.diagnostics().iter().map(|d| d.to_string()).collect(),
            outcome: Some(outcome),
        }
    }

    pub fn explain(&self, atom_text: &str) -> Result<Explanation, ServiceError> {
        let atom: GroundAtom = atom_text
            .trim()
            .parse()
            .map_err(|reason: String| ServiceError::BadAtom {
                text: atom_text.to_string(),
                reason,
            })?;
        let w = self.lock();
        let session = w.session.as_ref().ok_or(ServiceError::NoSession)?;
        let tree = session.explain(&atom)?;
        Ok(Explanation {
            schema: WIRE_SCHEMA,
            text: tree.to_string(),
            atom,
            tree,
        })
    }

    /// The session transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> Result<String, ServiceError> {
        let w = self.lock();
        Ok(w.session.as_ref().ok_or(ServiceError::NoSession)?.transcript_jsonl())
    }

    fn lock(&self) -> MutexGuard<'_, Writer> {
        self.writer.lock().unwrap_or_else(|p| p.into_inner())
    }
}

fn rejected(e: &ServiceError) -> CommandResult {
    CommandResult {
        schema: WIRE_SCHEMA,
        accepted: false,
        outcome: None,
        diagnostics: vec![e.to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::load_network;
    use crate::fixtures::episode;
    use crate::scenario::{golden_scenario, parse_script};

    fn service() -> OperatorService {
        let (n, a) = load_network(episode::NETWORK).unwrap();
        OperatorService::with_session(n, a).unwrap()
    }

    fn drain(rx: &mut UnboundedReceiver<Delta>) -> Vec<Delta> {
        std::iter::from_fn(|| rx.try_recv().ok()).collect()
    }

    #[test]
    fn no_session() {
        let s = OperatorService::new();
        assert_eq!(s.state().unwrap_err(), ServiceError::NoSession);
        assert!(s.network().is_err());
        let r = s.advance();
        assert!(!r.accepted);
        assert_eq!(r.diagnostics, vec!["no session loaded"]);
        assert_eq!(s.reset().unwrap_err(), ServiceError::NoSession);
    }

    #[test]
    fn fresh_snapshot() {
        let s = service();
        let snap = s.state().unwrap();
        assert_eq!(snap.step, 1);
        assert!(snap.vertiports.iter().all(|v| !v.closed));
        assert_eq!(snap.agents.len(), 6);
        assert_eq!(snap.verdict, None);
        assert_eq!(s.network().unwrap().coverage_gaps.len(), 4);
    }

    #[test]
    fn close_and_landing() {
        let s = service();
        let r = s.close(VertiportId(6));
        assert!(r.accepted);
        assert_eq!(r.outcome.as_ref().unwrap().notices().len(), 5);
        let snap = s.state().unwrap();
        assert!(snap.vertiports.iter().find(|v| v.id == VertiportId(6)).unwrap().closed);
        let retargeted = snap.agents.iter().filter(|a| a.target == Some(VertiportId(5))).count();
        assert_eq!(retargeted, 5);
        assert_eq!(snap.verdict, Some(Verdict::Satisfiable));

        assert!(s.advance().accepted);
        let r = s.landing_request(AgentId(4), Leg::new(7, 6), 17);
        assert!(r.accepted);
        let n = r.outcome.unwrap().notices().to_vec();
        assert_eq!((n[0].agent, n[0].step), (AgentId(4), 3));
    }

    #[test]
    fn rejected_commands_send_no_delta() {
        let s = service();
        let mut rx = s.subscribe();
        let r = s.close(VertiportId(99));
        assert!(!r.accepted);
        assert_eq!(r.diagnostics, vec!["unknown vertiport 99"]);
        assert!(drain(&mut rx).is_empty());
    }

    #[test]
    fn one_delta_per_command_in_order() {
        let s = service();
        let mut a = s.subscribe();
        let mut b = s.subscribe();
        assert!(drain(&mut a).is_empty());
        s.close(VertiportId(6));
        s.landing_request(AgentId(4), Leg::new(7, 6), 17);
        for rx in [&mut a, &mut b] {
            let deltas = drain(rx);
            let kinds: Vec<_> = deltas.iter().map(|d| (d.seq, d.record.kind)).collect();
            assert_eq!(kinds, vec![(1, "close"), (2, "landing")]);
        }
    }

    #[test]
    fn golden_replay_matches_the_scenario_transcript() {
        let s = service();
        let mut rx = s.subscribe();
        for event in parse_script(episode::SCRIPT).unwrap() {
            assert!(s.command(event).accepted);
        }
        let deltas = drain(&mut rx);
        assert_eq!(deltas.len(), 3);
        let replayed: String = deltas.iter().map(|d| d.record.to_json_line() + "\n").collect();
        let expected = golden_scenario().session.transcript_jsonl();
        assert_eq!(replayed, expected);
        assert_eq!(s.transcript_jsonl().unwrap(), expected);
    }

    #[test]
    fn snapshot_round_trip() {
        let s = service();
        s.close(VertiportId(6));
        let snap = s.state().unwrap();
        let text = serde_json::to_string(&*snap).unwrap();
        let back: SessionSnapshot = serde_json::from_str(&text).unwrap();
        assert_eq!(back, *snap);
        assert!(!snap.pending.is_empty());
    }

    #[test]
    fn explanations() {
        let s = service();
        s.close(VertiportId(6));
        let e = s.explain("target_change(1,2)").unwrap();
        assert!(e.tree.rule.source.starts_with("target_change(A, T) :-"));
        assert!(e.text.starts_with("target_change(1,2)"));
        let fact = s.explain("edge(7,6)").unwrap();
        assert!(fact.tree.is_fact() && fact.tree.children.is_empty());
        assert!(s.explain("target_change(4,2)").unwrap_err().is_not_in_model());
        assert!(matches!(
            s.explain("target_change(("),
            Err(ServiceError::BadAtom { .. })
        ));
    }

    #[test]
    fn reset_restores_the_initial_state() {
        let s = service();
        let fresh = s.state().unwrap();
        s.close(VertiportId(6));
        assert_eq!(s.reset().unwrap(), *fresh);
        assert_eq!(s.transcript_jsonl().unwrap(), "");
    }

    #[test]
    fn concurrent_commands_are_linearized() {
        let s = Arc::new(service());
        let mut rx = s.subscribe();
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let s = Arc::clone(&s);
                std::thread::spawn(move || {
                    if i % 2 == 0 {
                        s.reopen(VertiportId(1 + i))
                    } else {
                        s.close(VertiportId(1 + i))
                    }
                })
            })
            .collect();
        for h in handles {
            assert!(h.join().unwrap().accepted);
        }
        let deltas = drain(&mut rx);
        let seqs: Vec<u64> = deltas.iter().map(|d| d.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3, 4]);
        let records: Vec<usize> = deltas.iter().map(|d| d.record.seq).collect();
        assert_eq!(records, vec![1, 2, 3, 4]);
        assert_eq!(deltas.last().unwrap().snapshot, *s.state().unwrap());
    }
}
