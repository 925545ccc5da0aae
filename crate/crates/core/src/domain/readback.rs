use std::collections::BTreeSet;

use serde::Serialize;

use crate::ground::GroundAtom;

use super::{AgentId, Leg, UatmId, VertiportId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{atom}`: expected {expected} integer arguments")]
pub struct ShapeError {
    pub atom: GroundAtom,
    pub expected: usize,
}

/// An agent's destination moved to `new_target` at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TargetChangeNotice {
    pub agent: AgentId,
    pub step: i64,
    pub new_target: VertiportId,
    /// From the old target to the new one.
    pub appended_leg: Leg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NewPlan {
    pub agent: AgentId,
    pub step: i64,
    pub leg: Leg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LandingRequest {
    pub agent: AgentId,
    pub step: i64,
    pub vertiport: VertiportId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveredBy {
    Uatm(UatmId),
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Coverage {
    pub agent: AgentId,
    pub by: CoveredBy,
}

/// Solver output lifted into typed values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Readback {
    pub notices: Vec<TargetChangeNotice>,
    pub new_plans: Vec<NewPlan>,
    pub landing_requests: Vec<LandingRequest>,
    pub covered: Vec<Coverage>,
    /// Atoms of other predicates, and `target_change` atoms without a
    /// matching `new_plan`.
    pub residual: Vec<GroundAtom>,
}

fn args<const N: usize>(atom: &GroundAtom) -> Result<[i64; N], ShapeError> {
    let err = || ShapeError {
        atom: atom.clone(),
        expected: N,
    };
    let ints = atom.int_args().ok_or_else(err)?;
    ints.try_into().map_err(|_| err())
}

pub fn read_notices(shown: &BTreeSet<GroundAtom>) -> Result<Readback, ShapeError> {
    let mut out = Readback::default();
    let mut changes = Vec::new();
    for atom in shown {
        let p = atom.predicate.as_str();
        match (p, atom.args.len()) {
            ("target_change", 2) => changes.push((args::<2>(atom)?, atom)),
            ("new_plan", 4) => {
                let [a, t, u, v] = args(atom)?;
                out.new_plans.push(NewPlan {
                    agent: AgentId(a),
                    step: t,
                    leg: Leg::new(u, v),
                });
            }
            ("landing_request", 3) => {
                let [a, t, v] = args(atom)?;
                out.landing_requests.push(LandingRequest {
                    agent: AgentId(a),
                    step: t,
                    vertiport: VertiportId(v),
                });
            }
            ("covered_by_other", 1) => {
                let [a] = args(atom)?;
                out.covered.push(Coverage {
                    agent: AgentId(a),
                    by: CoveredBy::Other,
                });
            }
            (_, 1)
                if p.strip_prefix("covered_by_uatm")
                    .is_some_and(|n| n.parse::<i64>().is_ok()) =>
            {
                let n: i64 = p["covered_by_uatm".len()..].parse().expect("checked");
                let [a] = args(atom)?;
                out.covered.push(Coverage {
                    agent: AgentId(a),
                    by: CoveredBy::Uatm(UatmId(n)),
                });
            }
            _ => out.residual.push(atom.clone()),
        }
    }
    for ([a, t], atom) in changes {
        let plan = out.new_plans.iter().find(|p| p.agent == AgentId(a) && p.step == t);
        match plan {
            Some(p) => out.notices.push(TargetChangeNotice {
                agent: AgentId(a),
                step: t,
                new_target: p.leg.to,
                appended_leg: p.leg,
            }),
            None => out.residual.push(atom.clone()),
        }
    }
    out.notices.sort();
    out.residual.sort();
    Ok(out)
}
