//! Stable-model computation over ground programs.
//!
//! The well-founded model is computed first by an alternating fixpoint.
//! Atoms it leaves undecided are settled by branching, smallest atom id
//! first, false before true, with each branch re-running the fixpoint under
//! its assumptions. Every total candidate is checked against its reduct
//! before it is reported.

mod explain;
mod oracle;
mod report;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ground::{
    AtomId, GroundAggregate, GroundAtom, GroundElement, GroundProgram, GroundRule, NegLiteral, Origin,
};
use crate::syntax::Signature;

pub use explain::{explain, AggregateWitness, DerivationTree, RuleRef};
pub use oracle::{brute_force_answer_sets, is_answer_set, BRUTE_FORCE_LIMIT};
pub use report::cpu_time;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("aggregate in a rule for `{head}` depends on `{head}` through `{via}`")]
    UnstratifiedAggregate { head: String, via: String },
    #[error("aggregate condition atom `{atom}` is undecided")]
    UndecidedDependency { atom: GroundAtom },
    #[error("`{atom}` is not in the answer set")]
    NotInModel { atom: GroundAtom },
    #[error("{atoms} atoms exceed the brute-force limit of {limit}")]
    TooLarge { atoms: usize, limit: usize },
}

/// A three-valued interpretation over the atom universe of one program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Interpretation {
    pub true_set: BTreeSet<AtomId>,
    pub false_set: BTreeSet<AtomId>,
    pub unknown_set: BTreeSet<AtomId>,
}

impl Interpretation {
    fn from_bounds(lower: &[bool], upper: &[bool]) -> Self {
        let mut out = Interpretation::default();
        for i in 0..lower.len() {
            let id = AtomId(i as u32);
            if lower[i] {
                out.true_set.insert(id);
            } else if upper[i] {
                out.unknown_set.insert(id);
            } else {
                out.false_set.insert(id);
            }
        }
        out
    }

    /// A total interpretation with exactly `atoms` true.
    pub fn total(gp: &GroundProgram, atoms: &BTreeSet<GroundAtom>) -> Self {
        let mut out = Interpretation::default();
        for (i, a) in gp.atoms().iter().enumerate() {
            let id = AtomId(i as u32);
            if atoms.contains(a) {
                out.true_set.insert(id);
            } else {
                out.false_set.insert(id);
            }
        }
        out
    }

    pub fn is_total(&self) -> bool {
        self.unknown_set.is_empty()
    }

    pub fn atoms<'a>(&self, gp: &'a GroundProgram, set: &BTreeSet<AtomId>) -> BTreeSet<&'a GroundAtom> {
        set.iter().map(|&id| gp.atom(id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct AnswerSet {
    pub atoms: BTreeSet<GroundAtom>,
    pub shown: BTreeSet<GroundAtom>,
}

impl AnswerSet {
    pub fn new(atoms: BTreeSet<GroundAtom>, shows: &[Signature]) -> Self {
        let shown = project_shown(&atoms, shows);
        AnswerSet { atoms, shown }
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }
}

/// Atoms whose signature is listed in `shows`; everything when `shows`
/// is empty.
pub fn project_shown(atoms: &BTreeSet<GroundAtom>, shows: &[Signature]) -> BTreeSet<GroundAtom> {
    if shows.is_empty() {
        return atoms.clone();
    }
    let shows: HashSet<&Signature> = shows.iter().collect();
    atoms
        .iter()
        .filter(|a| shows.contains(&a.signature()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SolveStats {
    pub ground_rules: usize,
    pub atoms: usize,
    pub branches: usize,
    #[serde(skip)]
    pub wall: Duration,
    #[serde(skip)]
    pub cpu: Duration,
}

/// An integrity constraint whose body held in some candidate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Conflict {
    /// The constraint as written.
    pub rule: String,
    /// The violated ground instance.
    pub instance: String,
    #[serde(skip)]
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    pub models: Vec<AnswerSet>,
    pub satisfiable: bool,
    pub stats: SolveStats,
    /// Constraints that eliminated candidates, in ground rule order.
    pub conflicts: Vec<Conflict>,
}

/// Number of distinct tuples among elements whose condition holds in a
/// two-valued sense.
fn count_where(agg: &GroundAggregate, holds: impl Fn(&GroundElement) -> bool) -> usize {
    agg.elements
        .iter()
        .filter(|e| holds(e))
        .map(|e| &e.tuple)
        .collect::<HashSet<_>>()
        .len()
}

fn neg_blocked(n: &NegLiteral, set: &[bool]) -> bool {
    n.atoms().iter().any(|a| set[a.index()])
}

/// Condition certainly true: positives in `sure`, negatives outside `maybe`.
fn element_certain(e: &GroundElement, sure: &[bool], maybe: &[bool]) -> bool {
    e.pos.iter().all(|a| sure[a.index()]) && !e.neg.iter().any(|n| neg_blocked(n, maybe))
}

/// Condition possibly true: positives in `maybe`, negatives outside `sure`.
fn element_possible(e: &GroundElement, maybe: &[bool], sure: &[bool]) -> bool {
    e.pos.iter().all(|a| maybe[a.index()]) && !e.neg.iter().any(|n| neg_blocked(n, sure))
}

/// Whether some count in `lo..=hi` satisfies the aggregate.
fn any_count(agg: &GroundAggregate, lo: usize, hi: usize) -> bool {
    (lo..=hi).any(|c| agg.holds_for(c))
}

fn every_count(agg: &GroundAggregate, lo: usize, hi: usize) -> bool {
    lo <= hi && (lo..=hi).all(|c| agg.holds_for(c))
}

/// Counts the aggregate under a (possibly partial) interpretation.
pub fn eval_aggregate(agg: &GroundAggregate, interp: &Interpretation, gp: &GroundProgram) -> Result<usize, SolveError> {
    for e in &agg.elements {
        for a in e.pos.iter().chain(e.neg.iter().flat_map(|n| n.atoms())) {
            if interp.unknown_set.contains(a) {
                return Err(SolveError::UndecidedDependency {
                    atom: gp.atom(*a).clone(),
                });
            }
        }
    }
    Ok(count_where(agg, |e| {
        e.pos.iter().all(|a| interp.true_set.contains(a))
            && !e
                .neg
                .iter()
                .any(|n| n.atoms().iter().any(|a| interp.true_set.contains(a)))
    }))
}

/// Whether the aggregate holds under a decided interpretation.
pub fn aggregate_holds(agg: &GroundAggregate, interp: &Interpretation, gp: &GroundProgram) -> Result<bool, SolveError> {
    eval_aggregate(agg, interp, gp).map(|c| agg.holds_for(c))
}

/// Rule lookup tables shared by the fixpoint passes.
struct Index<'g> {
    gp: &'g GroundProgram,
    /// atom -> rules having it in the positive body (once per occurrence)
    watch: Vec<Vec<usize>>,
    with_aggregates: Vec<usize>,
    constraints: Vec<usize>,
}

impl<'g> Index<'g> {
    fn new(gp: &'g GroundProgram) -> Self {
        let mut watch = vec![Vec::new(); gp.atom_count()];
        let mut with_aggregates = Vec::new();
        let mut constraints = Vec::new();
        for (i, r) in gp.rules.iter().enumerate() {
            for a in &r.pos {
                watch[a.index()].push(i);
            }
            if !r.aggregates.is_empty() {
                with_aggregates.push(i);
            }
            if r.head.is_none() {
                constraints.push(i);
            }
        }
        Index {
            gp,
            watch,
            with_aggregates,
            constraints,
        }
    }

    fn empty(&self, value: bool) -> Vec<bool> {
        vec![value; self.gp.atom_count()]
    }

    /// Least fixpoint of the definite rules whose non-positive parts are
    /// accepted by `negation` and `aggregates`. Atoms in `blocked` are
    /// never derived.
    fn closure(
        &self,
        seed: Vec<bool>,
        blocked: Option<&[bool]>,
        negation: &dyn Fn(&GroundRule) -> bool,
        aggregates: &dyn Fn(&GroundRule, &[bool]) -> bool,
    ) -> Vec<bool> {
        let rules = &self.gp.rules;
        let mut set = seed;
        let mut missing: Vec<usize> = rules
            .iter()
            .map(|r| r.pos.iter().filter(|a| !set[a.index()]).count())
            .collect();
        let mut queue: Vec<usize> = (0..rules.len()).filter(|&i| missing[i] == 0).collect();
        loop {
            while let Some(i) = queue.pop() {
                let r = &rules[i];
                let Some(h) = r.head else { continue };
                if set[h.index()] || blocked.is_some_and(|b| b[h.index()]) {
                    continue;
                }
                if !negation(r) || !aggregates(r, &set) {
                    continue;
                }
                set[h.index()] = true;
                for &j in &self.watch[h.index()] {
                    missing[j] -= 1;
                    if missing[j] == 0 {
                        queue.push(j);
                    }
                }
            }
            // aggregates may have become true as the set grew
            let mut fired = false;
            for &i in &self.with_aggregates {
                let r = &rules[i];
                let Some(h) = r.head else { continue };
                if missing[i] != 0 || set[h.index()] || blocked.is_some_and(|b| b[h.index()]) {
                    continue;
                }
                if negation(r) && aggregates(r, &set) {
                    set[h.index()] = true;
                    fired = true;
                    for &j in &self.watch[h.index()] {
                        missing[j] -= 1;
                        if missing[j] == 0 {
                            queue.push(j);
                        }
                    }
                }
            }
            if !fired && queue.is_empty() {
                return set;
            }
        }
    }

    /// Possibly-true atoms given the certain atoms `lower` and the previous
    /// over-approximation `upper`.
    fn upper(&self, lower: &[bool], upper: &[bool], denied: &[bool]) -> Vec<bool> {
        let negation = |r: &GroundRule| !r.neg.iter().any(|n| neg_blocked(n, lower));
        let aggregates = |r: &GroundRule, x: &[bool]| {
            r.aggregates.iter().all(|agg| {
                let lo = count_where(agg, |e| element_certain(e, lower, upper));
                let hi = count_where(agg, |e| element_possible(e, x, lower));
                any_count(agg, lo, hi.max(lo))
            })
        };
        self.closure(self.empty(false), Some(denied), &negation, &aggregates)
    }

    /// Certainly-true atoms given the over-approximation `upper`.
    fn lower(&self, upper: &[bool], assumed: &[bool]) -> Vec<bool> {
        let negation = |r: &GroundRule| !r.neg.iter().any(|n| neg_blocked(n, upper));
        let aggregates = |r: &GroundRule, y: &[bool]| {
            r.aggregates.iter().all(|agg| {
                let lo = count_where(agg, |e| element_certain(e, y, upper));
                let hi = count_where(agg, |e| element_possible(e, upper, y));
                every_count(agg, lo, hi)
            })
        };
        self.closure(assumed.to_vec(), None, &negation, &aggregates)
    }

    /// Alternating fixpoint from `(lower, upper)` under the assumptions.
    /// `None` when the assumptions are contradictory.
    fn refine(
        &self,
        mut lower: Vec<bool>,
        mut upper: Vec<bool>,
        assumed: &[bool],
        denied: &[bool],
    ) -> Option<(Vec<bool>, Vec<bool>)> {
        loop {
            let next_upper = self.upper(&lower, &upper, denied);
            let next_lower = self.lower(&next_upper, assumed);
            let inconsistent = (0..next_lower.len()).any(|i| {
                (next_lower[i] && !next_upper[i]) || (assumed[i] && !next_upper[i]) || (denied[i] && next_lower[i])
            });
            if inconsistent {
                return None;
            }
            if next_upper == upper && next_lower == lower {
                return Some((lower, upper));
            }
            lower = next_lower;
            upper = next_upper;
        }
    }

    /// A constraint whose body is certainly true under the bounds.
    fn violated_constraint(&self, lower: &[bool], upper: &[bool]) -> Option<usize> {
        self.constraints.iter().copied().find(|&i| {
            let r = &self.gp.rules[i];
            r.pos.iter().all(|a| lower[a.index()])
                && !r.neg.iter().any(|n| neg_blocked(n, upper))
                && r.aggregates.iter().all(|agg| {
                    let lo = count_where(agg, |e| element_certain(e, lower, upper));
                    let hi = count_where(agg, |e| element_possible(e, upper, lower));
                    every_count(agg, lo, hi)
                })
        })
    }

    /// Reduct check for a total candidate.
    fn is_stable(&self, model: &[bool]) -> bool {
        let negation = |r: &GroundRule| !r.neg.iter().any(|n| neg_blocked(n, model));
        let aggregates = |r: &GroundRule, _: &[bool]| {
            r.aggregates
                .iter()
                .all(|agg| agg.holds_for(count_where(agg, |e| element_certain(e, model, model))))
        };
        self.closure(self.empty(false), None, &negation, &aggregates) == model
    }
}

/// Rejects programs with recursion through an aggregate.
pub fn check_stratification(gp: &GroundProgram) -> Result<(), SolveError> {
    let mut edges: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let name = |id: &AtomId| gp.atom(*id).predicate.as_str();
    for r in &gp.rules {
        let Some(h) = r.head else { continue };
        let entry = edges.entry(name(&h)).or_default();
        for a in &r.pos {
            entry.insert(name(a));
        }
        for n in &r.neg {
            for a in n.atoms() {
                entry.insert(name(a));
            }
        }
        for agg in &r.aggregates {
            for e in &agg.elements {
                for a in e.pos.iter().chain(e.neg.iter().flat_map(|n| n.atoms())) {
                    entry.insert(name(a));
                }
            }
        }
    }
    let reaches = |from: &str, to: &str| {
        let mut seen = HashSet::new();
        let mut stack = vec![from];
        while let Some(p) = stack.pop() {
            if p == to {
                return true;
            }
            if seen.insert(p) {
                if let Some(next) = edges.get(p) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        false
    };
    for r in &gp.rules {
        let Some(h) = r.head else { continue };
        let head = name(&h);
        for agg in &r.aggregates {
            for e in &agg.elements {
                for a in e.pos.iter().chain(e.neg.iter().flat_map(|n| n.atoms())) {
                    if reaches(name(a), head) {
                        return Err(SolveError::UnstratifiedAggregate {
                            head: head.to_string(),
                            via: name(a).to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// The three-valued well-founded model.
pub fn well_founded(gp: &GroundProgram) -> Result<Interpretation, SolveError> {
    check_stratification(gp)?;
    let index = Index::new(gp);
    let none = index.empty(false);
    let (lower, upper) = index
        .refine(index.empty(false), index.empty(true), &none, &none)
        .expect("no assumptions, no contradiction");
    Ok(Interpretation::from_bounds(&lower, &upper))
}

struct Search<'i, 'g> {
    index: &'i Index<'g>,
    limit: usize,
    models: Vec<BTreeSet<AtomId>>,
    branches: usize,
    conflicts: BTreeSet<usize>,
}

impl Search<'_, '_> {
    fn done(&self) -> bool {
        self.limit != 0 && self.models.len() >= self.limit
    }

    fn run(&mut self, lower: Vec<bool>, upper: Vec<bool>, assumed: Vec<bool>, denied: Vec<bool>) {
        if self.done() {
            return;
        }
        if let Some(c) = self.index.violated_constraint(&lower, &upper) {
            self.conflicts.insert(c);
            return;
        }
        let pick = (0..lower.len()).find(|&i| upper[i] && !lower[i]);
        let Some(a) = pick else {
            if self.index.is_stable(&lower) {
                self.models.push(
                    (0..lower.len())
                        .filter(|&i| lower[i])
                        .map(|i| AtomId(i as u32))
                        .collect(),
                );
            }
            return;
        };
        // false branch
        self.branches += 1;
        let mut d = denied.clone();
        d[a] = true;
        if let Some((l, u)) = self.index.refine(lower.clone(), upper.clone(), &assumed, &d) {
            self.run(l, u, assumed.clone(), d);
        }
        if self.done() {
            return;
        }
        // true branch
        self.branches += 1;
        let mut p = assumed;
        p[a] = true;
        let mut l = lower;
        l[a] = true;
        if let Some((l, u)) = self.index.refine(l, upper, &p, &denied) {
            self.run(l, u, p, denied);
        }
    }
}

/// Computes up to `limit` answer sets (`0` for all).
pub fn answer_sets(gp: &GroundProgram, limit: usize) -> Result<SolveReport, SolveError> {
    let started = Instant::now();
    let cpu_start = cpu_time();
    check_stratification(gp)?;
    let index = Index::new(gp);
    let none = index.empty(false);
    let (lower, upper) = index
        .refine(index.empty(false), index.empty(true), &none, &none)
        .expect("no assumptions, no contradiction");
    let mut search = Search {
        index: &index,
        limit,
        models: Vec::new(),
        branches: 0,
        conflicts: BTreeSet::new(),
    };
    search.run(lower, upper, none.clone(), none);

    let models: Vec<AnswerSet> = search
        .models
        .iter()
        .map(|ids| AnswerSet::new(ids.iter().map(|&id| gp.atom(id).clone()).collect(), &gp.shows))
        .collect();
    let conflicts = search
        .conflicts
        .iter()
        .map(|&i| {
            let r = &gp.rules[i];
            Conflict {
                rule: gp.source_text(&r.origin),
                instance: gp.rule_text(r),
                origin: r.origin.clone(),
            }
        })
        .collect();
    Ok(SolveReport {
        satisfiable: !models.is_empty(),
        models,
        stats: SolveStats {
            ground_rules: gp.rules.len(),
            atoms: gp.atom_count(),
            branches: search.branches,
            wall: started.elapsed(),
            cpu: cpu_time().saturating_sub(cpu_start),
        },
        conflicts,
    })
}

/// The first answer set, if any.
pub fn solve_one(gp: &GroundProgram) -> Result<Option<AnswerSet>, SolveError> {
    Ok(answer_sets(gp, 1)?.models.into_iter().next())
}

#[cfg(test)]
mod tests;
