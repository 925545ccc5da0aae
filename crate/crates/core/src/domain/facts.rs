use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::ground::{expand_intervals, GroundAtom, GroundError};
use crate::syntax::{parse_program, BodyElement, CmpOp, Program, Rule, Term};

use super::{AgentId, AgentState, Bound, Corridor, CoverageSegment, Leg, Network, UatmId, VertiportId};

const SOURCE_RULE: &str = "source(A, 1, U) :- agent(A), plan(A, 1, U, V), not plan(A, 1, _, U).";
const TARGET_RULE: &str = "target(A, 1, V) :- agent(A), plan(A, 1, U, V), not plan(A, 1, V, _).";

/// Contiguous runs of a sorted id set.
fn runs(ids: impl Iterator<Item = i64>) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    for id in ids {
        match out.last_mut() {
            Some((_, hi)) if *hi + 1 == id => *hi = id,
            _ => out.push((id, id)),
        }
    }
    out
}

fn range_facts(out: &mut String, predicate: &str, ids: impl Iterator<Item = i64>) {
    for (lo, hi) in runs(ids) {
        if lo == hi {
            let _ = write!(out, "{predicate}({lo}). ");
        } else {
            let _ = write!(out, "{predicate}({lo}..{hi}). ");
        }
    }
}

/// The environment and agent programs as `.lp` text.
pub fn emit_text(network: &Network, agents: &[AgentState]) -> String {
    let mut out = String::new();
    range_facts(&mut out, "uatm", network.uatms.iter().map(|u| u.0));
    range_facts(&mut out, "agent", network.agent_ids.iter().map(|a| a.0));
    range_facts(&mut out, "vp", network.vertiports.iter().map(|v| v.0));
    out = out.trim_end().to_string();
    out.push_str("\n\n");
    for c in &network.corridors {
        let _ = writeln!(out, "edge({}, {}).", c.from, c.to);
    }
    out.push('\n');
    for (u, v) in &network.vertiport_cover {
        let _ = writeln!(out, "cover({u}, {v}).");
    }
    out.push('\n');
    for c in &network.corridors {
        let _ = writeln!(out, "edge_range({}, {}, 1..{}).", c.from, c.to, c.length);
    }
    out.push('\n');
    for s in &network.coverage {
        let head = format!(
            "covered_wp({}, {}, {}, P) :- edge_range({}, {}, P)",
            s.from, s.to, s.uatm, s.from, s.to
        );
        let _ = match s.bound {
            Bound::All => writeln!(out, "{head}."),
            Bound::AtMost(k) => writeln!(out, "{head}, P <= {k}."),
            Bound::AtLeast(k) => writeln!(out, "{head}, P >= {k}."),
        };
    }
    out.push('\n');
    for (v, c) in &network.candidates {
        let _ = writeln!(out, "candidate_vp({v}, {c}).");
    }
    out.push('\n');
    if network.step_horizon == 1 {
        out.push_str("step(1).\n");
    } else {
        let _ = writeln!(out, "step(1..{}).", network.step_horizon);
    }
    if agents.is_empty() {
        return out;
    }
    out.push('\n');
    for a in agents {
        let _ = writeln!(
            out,
            "loc({}, {}, {}, {}, {}).",
            a.agent, a.step, a.corridor.from, a.corridor.to, a.waypoint
        );
    }
    out.push('\n');
    for a in agents {
        let legs: Vec<String> = a
            .plan
            .iter()
            .map(|l| format!("plan({}, {}, {}, {}).", a.agent, a.step, l.from, l.to))
            .collect();
        let _ = writeln!(out, "{}", legs.join(" "));
    }
    out.push('\n');
    let _ = writeln!(out, "{SOURCE_RULE}");
    let _ = writeln!(out, "{TARGET_RULE}");
    out
}

/// The environment and agent programs.
pub fn emit_facts(network: &Network, agents: &[AgentState]) -> Program {
    parse_program(&emit_text(network, agents)).expect("emitted text parses")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("statement is not part of a network description: {0}")]
    Unrecognized(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("{0}")]
    Incomplete(String),
}

fn ints(atom: &GroundAtom) -> Result<Vec<i64>, ExtractError> {
    atom.int_args()
        .ok_or_else(|| ExtractError::Unrecognized(format!("{atom} has non-integer arguments")))
}

/// `covered_wp(F, T, U, P) :- edge_range(F, T, P)[, P <= k | P >= k].`
fn coverage_rule(rule: &Rule) -> Option<CoverageSegment> {
    let head = rule.head.as_ref()?;
    if head.predicate != "covered_wp" || head.args.len() != 4 {
        return None;
    }
    let int = |t: &Term| match t {
        Term::Int(n) => Some(*n),
        _ => None,
    };
    let (from, to, uatm) = (int(&head.args[0])?, int(&head.args[1])?, int(&head.args[2])?);
    let Term::Var(p) = &head.args[3] else { return None };
    let mut bound = Bound::All;
    let mut has_range = false;
    for el in &rule.body {
        match el {
            BodyElement::Pos(a) if a.predicate == "edge_range" && a.args.len() == 3 => {
                let ok = int(&a.args[0]) == Some(from)
                    && int(&a.args[1]) == Some(to)
                    && matches!(&a.args[2], Term::Var(v) if v == p);
                if !ok {
                    return None;
                }
                has_range = true;
            }
            BodyElement::Cmp(c) if matches!(&c.left, Term::Var(v) if v == p) && bound == Bound::All => {
                bound = match c.op {
                    CmpOp::Le => Bound::AtMost(int(&c.right)?),
                    CmpOp::Ge => Bound::AtLeast(int(&c.right)?),
                    _ => return None,
                };
            }
            _ => return None,
        }
    }
    has_range.then_some(CoverageSegment {
        from: VertiportId(from),
        to: VertiportId(to),
        uatm: UatmId(uatm),
        bound,
    })
}

/// Reads a network and agent states back from environment and agent
/// programs such as those produced by [`emit_facts`].
pub fn extract(program: &Program) -> Result<(Network, Vec<AgentState>), ExtractError> {
    let mut network = Network {
        vertiports: BTreeSet::new(),
        uatms: BTreeSet::new(),
        agent_ids: BTreeSet::new(),
        corridors: Vec::new(),
        coverage: Vec::new(),
        vertiport_cover: Vec::new(),
        candidates: Vec::new(),
        step_horizon: 0,
    };
    let mut legs: Vec<Leg> = Vec::new();
    let mut ranges: BTreeMap<Leg, BTreeSet<i64>> = BTreeMap::new();
    let mut locs: Vec<AgentState> = Vec::new();
    let mut plans: Vec<(AgentId, i64, Leg)> = Vec::new();

    for rule in &program.rules {
        let text = rule.to_string();
        if text == SOURCE_RULE || text == TARGET_RULE {
            continue;
        }
        if let Some(seg) = coverage_rule(rule) {
            network.coverage.push(seg);
            continue;
        }
        if !rule.is_fact() {
            return Err(ExtractError::Unrecognized(text));
        }
        for fact in expand_intervals(rule)? {
            let atom = GroundAtom::from_atom(fact.head.as_ref().expect("facts have heads"))?;
            let a = ints(&atom)?;
            match (atom.predicate.as_str(), a.as_slice()) {
                ("uatm", &[u]) => {
                    network.uatms.insert(UatmId(u));
                }
                ("agent", &[id]) => {
                    network.agent_ids.insert(AgentId(id));
                }
                ("vp", &[v]) => {
                    network.vertiports.insert(VertiportId(v));
                }
                ("edge", &[f, t]) => {
                    if !legs.contains(&Leg::new(f, t)) {
                        legs.push(Leg::new(f, t));
                    }
                }
                ("edge_range", &[f, t, p]) => {
                    if !legs.contains(&Leg::new(f, t)) {
                        legs.push(Leg::new(f, t));
                    }
                    ranges.entry(Leg::new(f, t)).or_default().insert(p);
                }
                ("cover", &[u, v]) => network.vertiport_cover.push((UatmId(u), VertiportId(v))),
                ("candidate_vp", &[v, c]) => network.candidates.push((VertiportId(v), VertiportId(c))),
                ("step", &[s]) => network.step_horizon = network.step_horizon.max(s),
                ("loc", &[id, step, f, t, wp]) => locs.push(AgentState {
                    agent: AgentId(id),
                    step,
                    corridor: Leg::new(f, t),
                    waypoint: wp,
                    plan: Vec::new(),
                }),
                ("plan", &[id, step, f, t]) => plans.push((AgentId(id), step, Leg::new(f, t))),
                _ => return Err(ExtractError::Unrecognized(format!("{atom}."))),
            }
        }
    }
    for leg in legs {
        let waypoints = ranges.remove(&leg).unwrap_or_default();
        let length = waypoints.last().copied().unwrap_or(0);
        if waypoints.len() as i64 != length || waypoints.first() != Some(&1) {
            return Err(ExtractError::Incomplete(format!(
                "corridor {leg} does not have contiguous waypoints starting at 1"
            )));
        }
        network.corridors.push(Corridor {
            from: leg.from,
            to: leg.to,
            length,
        });
    }
    for state in &mut locs {
        state.plan = plans
            .iter()
            .filter(|(a, s, _)| *a == state.agent && *s == state.step)
            .map(|(_, _, l)| *l)
            .collect();
    }
    Ok((network, locs))
}
