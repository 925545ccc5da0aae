//! Typed model of the vertiport network and the agents flying it.

mod config;
mod facts;
mod readback;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{load_network, ConfigError, NetworkConfig};
pub use facts::{emit_facts, emit_text, extract, ExtractError};
pub use readback::{
    read_notices, Coverage, CoveredBy, LandingRequest, NewPlan, Readback, ShapeError, TargetChangeNotice,
};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub i64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(VertiportId);
id_type!(UatmId);
id_type!(AgentId);

/// A directed corridor reference, serialized as `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Leg {
    pub from: VertiportId,
    pub to: VertiportId,
}

impl Leg {
    pub fn new(from: i64, to: i64) -> Self {
        Leg {
            from: VertiportId(from),
            to: VertiportId(to),
        }
    }

    pub fn reversed(self) -> Self {
        Leg {
            from: self.to,
            to: self.from,
        }
    }
}

impl From<[i64; 2]> for Leg {
    fn from([from, to]: [i64; 2]) -> Self {
        Leg::new(from, to)
    }
}

impl From<Leg> for [i64; 2] {
    fn from(l: Leg) -> Self {
        [l.from.0, l.to.0]
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corridor {
    pub from: VertiportId,
    pub to: VertiportId,
    /// Waypoints are numbered `1..=length`.
    pub length: i64,
}

impl Corridor {
    pub fn leg(&self) -> Leg {
        Leg {
            from: self.from,
            to: self.to,
        }
    }

    pub fn contains(&self, waypoint: i64) -> bool {
        (1..=self.length).contains(&waypoint)
    }
}

/// Part of a corridor watched by one UATM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Bound {
    All,
    AtMost(i64),
    AtLeast(i64),
}

impl Bound {
    pub fn covers(self, waypoint: i64) -> bool {
        match self {
            Bound::All => true,
            Bound::AtMost(k) => waypoint <= k,
            Bound::AtLeast(k) => waypoint >= k,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::All => f.write_str("all"),
            Bound::AtMost(k) => write!(f, "at-most {k}"),
            Bound::AtLeast(k) => write!(f, "at-least {k}"),
        }
    }
}

impl std::str::FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "all" {
            return Ok(Bound::All);
        }
        let parse = |rest: &str| {
            rest.trim()
                .parse::<i64>()
                .map_err(|_| format!("bad waypoint in coverage bound `{s}`"))
        };
        if let Some(rest) = s.strip_prefix("at-most") {
            return parse(rest).map(Bound::AtMost);
        }
        if let Some(rest) = s.strip_prefix("at-least") {
            return parse(rest).map(Bound::AtLeast);
        }
        Err(format!(
            "coverage bound `{s}` is not `all`, `at-most K` or `at-least K`"
        ))
    }
}

impl TryFrom<String> for Bound {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Bound> for String {
    fn from(b: Bound) -> Self {
        b.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSegment {
    pub from: VertiportId,
    pub to: VertiportId,
    pub uatm: UatmId,
    pub bound: Bound,
}

impl CoverageSegment {
    pub fn leg(&self) -> Leg {
        Leg {
            from: self.from,
            to: self.to,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Network {
    pub vertiports: BTreeSet<VertiportId>,
    pub uatms: BTreeSet<UatmId>,
    /// Declared agents, including ones without a location.
    pub agent_ids: BTreeSet<AgentId>,
    pub corridors: Vec<Corridor>,
    pub coverage: Vec<CoverageSegment>,
    /// `(uatm, vertiport)` pairs in declaration order.
    pub vertiport_cover: Vec<(UatmId, VertiportId)>,
    /// `(closed vertiport, fallback)` pairs in declaration order.
    pub candidates: Vec<(VertiportId, VertiportId)>,
    pub step_horizon: i64,
}

impl Network {
    pub fn corridor(&self, leg: Leg) -> Option<&Corridor> {
        self.corridors.iter().find(|c| c.leg() == leg)
    }

    pub fn candidate(&self, vertiport: VertiportId) -> Option<VertiportId> {
        self.candidates.iter().find(|(v, _)| *v == vertiport).map(|(_, c)| *c)
    }

    pub fn covered_vertiports(&self) -> BTreeMap<UatmId, BTreeSet<VertiportId>> {
        let mut out: BTreeMap<UatmId, BTreeSet<VertiportId>> = BTreeMap::new();
        for (u, v) in &self.vertiport_cover {
            out.entry(*u).or_default().insert(*v);
        }
        out
    }

    /// The UATM that owns a vertiport, if any.
    pub fn owner(&self, vertiport: VertiportId) -> Option<UatmId> {
        self.vertiport_cover
            .iter()
            .find(|(_, v)| *v == vertiport)
            .map(|(u, _)| *u)
    }

    /// UATMs watching a waypoint.
    pub fn watchers(&self, leg: Leg, waypoint: i64) -> BTreeSet<UatmId> {
        self.coverage
            .iter()
            .filter(|s| s.leg() == leg && s.bound.covers(waypoint))
            .map(|s| s.uatm)
            .collect()
    }

    /// Checks every structural invariant, reporting all violations.
    pub fn validate(&self, agents: &[AgentState]) -> Result<(), ValidationError> {
        let mut problems = Vec::new();
        if self.vertiports.is_empty() {
            problems.push("network has no vertiports".to_string());
        }
        if self.uatms.is_empty() {
            problems.push("network has no UATMs".to_string());
        }
        if self.step_horizon < 1 {
            problems.push(format!("step horizon {} is below 1", self.step_horizon));
        }
        let mut seen = BTreeSet::new();
        for c in &self.corridors {
            let leg = c.leg();
            for v in [c.from, c.to] {
                if !self.vertiports.contains(&v) {
                    problems.push(format!("corridor {leg}: unknown vertiport {v}"));
                }
            }
            if c.from == c.to {
                problems.push(format!("corridor {leg}: both ends are the same vertiport"));
            }
            if c.length < 1 {
                problems.push(format!("corridor {leg}: length {} is below 1", c.length));
            }
            if !seen.insert(leg) {
                problems.push(format!("corridor {leg}: declared twice"));
            }
            match self.corridor(leg.reversed()) {
                None => problems.push(format!("corridor {leg}: no reverse corridor {}", leg.reversed())),
                Some(r) if r.length != c.length => problems.push(format!(
                    "corridor {leg}: length {} differs from reverse length {}",
                    c.length, r.length
                )),
                Some(_) => {}
            }
        }
        for s in &self.coverage {
            let leg = s.leg();
            if !self.uatms.contains(&s.uatm) {
                problems.push(format!("coverage of {leg}: unknown UATM {}", s.uatm));
            }
            match self.corridor(leg) {
                None => problems.push(format!("coverage of {leg}: no such corridor")),
                Some(c) => {
                    if let Bound::AtMost(k) | Bound::AtLeast(k) = s.bound {
                        if !c.contains(k) {
                            problems.push(format!("coverage of {leg}: waypoint {k} outside 1..{}", c.length));
                        }
                    }
                }
            }
        }
        for (u, v) in &self.vertiport_cover {
            if !self.uatms.contains(u) {
                problems.push(format!("vertiport cover ({u},{v}): unknown UATM {u}"));
            }
            if !self.vertiports.contains(v) {
                problems.push(format!("vertiport cover ({u},{v}): unknown vertiport {v}"));
            }
        }
        let mut closable = BTreeSet::new();
        for (v, c) in &self.candidates {
            for x in [v, c] {
                if !self.vertiports.contains(x) {
                    problems.push(format!("candidate ({v},{c}): unknown vertiport {x}"));
                }
            }
            if v == c {
                problems.push(format!("candidate ({v},{c}): fallback equals the vertiport"));
            }
            if !closable.insert(*v) {
                problems.push(format!("candidate ({v},{c}): vertiport {v} has two fallbacks"));
            }
        }
        let mut agent_seen = BTreeSet::new();
        for a in agents {
            let name = format!("agent {}", a.agent);
            if !self.agent_ids.contains(&a.agent) {
                problems.push(format!("{name}: not a declared agent"));
            }
            if !agent_seen.insert(a.agent) {
                problems.push(format!("{name}: state given twice"));
            }
            if !(1..=self.step_horizon).contains(&a.step) {
                problems.push(format!("{name}: step {} outside 1..{}", a.step, self.step_horizon));
            }
            match self.corridor(a.corridor) {
                None => problems.push(format!("{name}: corridor {} does not exist", a.corridor)),
                Some(c) if !c.contains(a.waypoint) => problems.push(format!(
                    "{name}: waypoint {} outside 1..{} of corridor {}",
                    a.waypoint, c.length, a.corridor
                )),
                Some(_) => {}
            }
            if a.plan.is_empty() {
                problems.push(format!("{name}: empty plan"));
            }
            if !a.plan.contains(&a.corridor) {
                problems.push(format!("{name}: corridor {} is not a leg of the plan", a.corridor));
            }
            for leg in &a.plan {
                if self.corridor(*leg).is_none() {
                    problems.push(format!("{name}: plan leg {leg} is not a corridor"));
                }
            }
            for pair in a.plan.windows(2) {
                if pair[0].to != pair[1].from {
                    problems.push(format!("{name}: plan legs {} and {} do not chain", pair[0], pair[1]));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { problems })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid network:\n  {}", problems.join("\n  "))]
pub struct ValidationError {
    pub problems: Vec<String>,
}

/// An agent's position and remaining route at a given step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent: AgentId,
    pub step: i64,
    pub corridor: Leg,
    pub waypoint: i64,
    /// Ordered corridor legs.
    pub plan: Vec<Leg>,
}

impl AgentState {
    pub fn source(&self) -> Option<VertiportId> {
        self.plan.first().map(|l| l.from)
    }

    pub fn target(&self) -> Option<VertiportId> {
        self.plan.last().map(|l| l.to)
    }
}

/// A maximal run of waypoints no UATM watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageGap {
    pub corridor: Leg,
    pub first: i64,
    pub last: i64,
}

impl fmt::Display for CoverageGap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "corridor {} waypoints {}..{} uncovered",
            self.corridor, self.first, self.last
        )
    }
}

pub fn coverage_gaps(network: &Network) -> Vec<CoverageGap> {
    let mut out = Vec::new();
    for c in &network.corridors {
        let mut start = None;
        for wp in 1..=c.length + 1 {
            let covered = wp > c.length || !network.watchers(c.leg(), wp).is_empty();
            match (covered, start) {
                (false, None) => start = Some(wp),
                (true, Some(first)) => {
                    out.push(CoverageGap {
                        corridor: c.leg(),
                        first,
                        last: wp - 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
