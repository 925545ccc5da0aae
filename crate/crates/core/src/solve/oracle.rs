//! Reference semantics by exhaustive enumeration. Deliberately shares no
//! evaluation code with the engine.

use std::collections::BTreeSet;

use crate::ground::{GroundAggregate, GroundProgram, GroundRule, NegLiteral};

use super::{AnswerSet, SolveError};

pub const BRUTE_FORCE_LIMIT: usize = 20;

fn neg_true(n: &NegLiteral, set: &BTreeSet<usize>) -> bool {
    n.atoms().iter().all(|a| !set.contains(&a.index()))
}

fn aggregate_true(agg: &GroundAggregate, set: &BTreeSet<usize>) -> bool {
    let mut tuples = Vec::new();
    for e in &agg.elements {
        let holds = e.pos.iter().all(|a| set.contains(&a.index())) && e.neg.iter().all(|n| neg_true(n, set));
        if holds && !tuples.contains(&&e.tuple) {
            tuples.push(&e.tuple);
        }
    }
    agg.holds_for(tuples.len())
}

fn body_true(r: &GroundRule, set: &BTreeSet<usize>) -> bool {
    r.pos.iter().all(|a| set.contains(&a.index()))
        && r.neg.iter().all(|n| neg_true(n, set))
        && r.aggregates.iter().all(|agg| aggregate_true(agg, set))
}

/// Least model of the reduct of the program by `candidate`.
fn reduct_least_model(gp: &GroundProgram, candidate: &BTreeSet<usize>) -> BTreeSet<usize> {
    let reduct: Vec<&GroundRule> = gp
        .rules
        .iter()
        .filter(|r| r.head.is_some())
        .filter(|r| r.neg.iter().all(|n| neg_true(n, candidate)))
        .filter(|r| r.aggregates.iter().all(|agg| aggregate_true(agg, candidate)))
        .collect();
    let mut model = BTreeSet::new();
    loop {
        let before = model.len();
        for r in &reduct {
            if r.pos.iter().all(|a| model.contains(&a.index())) {
                model.insert(r.head.unwrap().index());
            }
        }
        if model.len() == before {
            return model;
        }
    }
}

fn ids(gp: &GroundProgram, atoms: &BTreeSet<crate::ground::GroundAtom>) -> Option<BTreeSet<usize>> {
    atoms.iter().map(|a| gp.atom_id(a).map(|id| id.index())).collect()
}

/// Checks a candidate directly against the definition: it equals the least
/// model of its reduct, every atom is supported, and no constraint body
/// holds. Returns the first failed check.
pub fn is_answer_set(gp: &GroundProgram, atoms: &BTreeSet<crate::ground::GroundAtom>) -> Result<(), String> {
    let set = ids(gp, atoms).ok_or("candidate mentions atoms outside the universe")?;
    for &a in &set {
        let supported = gp
            .rules
            .iter()
            .any(|r| r.head.map(|h| h.index()) == Some(a) && body_true(r, &set));
        if !supported {
            return Err(format!("{} is unsupported", gp.atoms()[a]));
        }
    }
    if reduct_least_model(gp, &set) != set {
        return Err("candidate is not the least model of its reduct".into());
    }
    for r in gp.rules.iter().filter(|r| r.head.is_none()) {
        if body_true(r, &set) {
            return Err(format!("constraint violated: {}", gp.rule_text(r)));
        }
    }
    Ok(())
}

/// All answer sets, by trying every subset of the atom universe.
pub fn brute_force_answer_sets(gp: &GroundProgram) -> Result<Vec<AnswerSet>, SolveError> {
    let n = gp.atom_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SolveError::TooLarge {
            atoms: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let set: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if reduct_least_model(gp, &set) != set {
            continue;
        }
        if gp.rules.iter().any(|r| r.head.is_none() && body_true(r, &set)) {
            continue;
        }
        let atoms = set.iter().map(|&i| gp.atoms()[i].clone()).collect();
        out.push(AnswerSet::new(atoms, &gp.shows));
    }
    out.sort();
    Ok(out)
}
