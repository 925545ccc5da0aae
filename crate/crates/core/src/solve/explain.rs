use std::collections::HashMap;
use std::fmt::{self, Display, Formatter};

use serde::Serialize;

use crate::ground::{AtomId, GroundAtom, GroundProgram, GroundRule, Value};

use super::{count_where, element_certain, neg_blocked, AnswerSet, SolveError};

/// The rule instance justifying a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleRef {
    /// Index of the source rule.
    pub origin: usize,
    pub substitution: Vec<(String, Value)>,
    pub source: String,
    pub instance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregateWitness {
    pub aggregate: String,
    pub count: usize,
    /// Distinct tuples whose condition holds, in element order.
    pub tuples: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivationTree {
    pub atom: GroundAtom,
    pub rule: RuleRef,
    pub children: Vec<DerivationTree>,
    /// Negative literals, each satisfied because no matching atom is in
    /// the answer set.
    pub neg_leaves: Vec<String>,
    pub agg_leaves: Vec<AggregateWitness>,
}

impl DerivationTree {
    pub fn is_fact(&self) -> bool {
        self.children.is_empty() && self.neg_leaves.is_empty() && self.agg_leaves.is_empty()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Atoms at fact leaves, in tree order.
    pub fn fact_leaves(&self) -> Vec<&GroundAtom> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if t.is_fact() {
                out.push(&t.atom);
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a DerivationTree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    fn write(&self, f: &mut Formatter<'_>, indent: usize) -> fmt::Result {
        let pad = "  ".repeat(indent);
        if self.is_fact() {
            return writeln!(f, "{pad}{}  [fact]", self.atom);
        }
        writeln!(f, "{pad}{}  <- {}", self.atom, self.rule.source)?;
        for c in &self.children {
            c.write(f, indent + 1)?;
        }
        for n in &self.neg_leaves {
            writeln!(f, "{pad}  {n}  [absent from answer set]")?;
        }
        for a in &self.agg_leaves {
            let tuples: Vec<String> = a
                .tuples
                .iter()
                .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                .collect();
            writeln!(f, "{pad}  {}  [count {}: {}]", a.aggregate, a.count, tuples.join(" "))?;
        }
        Ok(())
    }
}

impl Display for DerivationTree {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

fn body_holds(r: &GroundRule, model: &[bool]) -> bool {
    r.pos.iter().all(|a| model[a.index()])
        && !r.neg.iter().any(|n| neg_blocked(n, model))
        && r.aggregates
            .iter()
            .all(|agg| agg.holds_for(count_where(agg, |e| element_certain(e, model, model))))
}

/// Stage at which each atom enters the least model of the reduct.
fn stages(gp: &GroundProgram, model: &[bool]) -> Vec<Option<usize>> {
    let mut level = vec![None; gp.atom_count()];
    let applicable: Vec<&GroundRule> = gp
        .rules
        .iter()
        .filter(|r| r.head.is_some_and(|h| model[h.index()]) && body_holds(r, model))
        .collect();
    let mut stage = 0;
    loop {
        let fresh: Vec<AtomId> = applicable
            .iter()
            .filter(|r| level[r.head.unwrap().index()].is_none())
            .filter(|r| r.pos.iter().all(|a| level[a.index()].is_some_and(|l| l < stage)))
            .map(|r| r.head.unwrap())
            .collect();
        if fresh.is_empty() {
            return level;
        }
        for h in fresh {
            level[h.index()] = Some(stage);
        }
        stage += 1;
    }
}

/// Builds a derivation tree for `atom` in `model`. Each node uses the
/// applicable rule whose positive body entered the model earliest, the
/// first such rule in ground order on ties.
pub fn explain(atom: &GroundAtom, model: &AnswerSet, gp: &GroundProgram) -> Result<DerivationTree, SolveError> {
    let not_in_model = || SolveError::NotInModel { atom: atom.clone() };
    if !model.contains(atom) {
        return Err(not_in_model());
    }
    let id = gp.atom_id(atom).ok_or_else(not_in_model)?;
    let mut truth = vec![false; gp.atom_count()];
    for a in &model.atoms {
        if let Some(i) = gp.atom_id(a) {
            truth[i.index()] = true;
        }
    }
    let level = stages(gp, &truth);
    if level[id.index()].is_none() {
        return Err(not_in_model());
    }
    let mut best: HashMap<AtomId, usize> = HashMap::new();
    for (i, r) in gp.rules.iter().enumerate() {
        let Some(h) = r.head else { continue };
        let Some(lh) = level[h.index()] else { continue };
        if !body_holds(r, &truth) {
            continue;
        }
        let Some(depth) = r
            .pos
            .iter()
            .map(|a| level[a.index()].filter(|&l| l < lh))
            .try_fold(0usize, |m, l| l.map(|l| m.max(l + 1)))
        else {
            continue;
        };
        let better = match best.get(&h) {
            None => true,
            Some(&j) => {
                let other = gp.rules[j]
                    .pos
                    .iter()
                    .map(|a| level[a.index()].unwrap() + 1)
                    .max()
                    .unwrap_or(0);
                depth < other
            }
        };
        if better {
            best.insert(h, i);
        }
    }
    let mut memo = HashMap::new();
    Ok(build(id, gp, &truth, &best, &mut memo))
}

fn build(
    id: AtomId,
    gp: &GroundProgram,
    truth: &[bool],
    best: &HashMap<AtomId, usize>,
    memo: &mut HashMap<AtomId, DerivationTree>,
) -> DerivationTree {
    if let Some(t) = memo.get(&id) {
        return t.clone();
    }
    let r = &gp.rules[best[&id]];
    let children = r.pos.iter().map(|&a| build(a, gp, truth, best, memo)).collect();
    let neg_leaves = r.neg.iter().map(|n| gp.neg_text(n)).collect();
    let agg_leaves = r
        .aggregates
        .iter()
        .map(|agg| {
            let mut tuples: Vec<Vec<Value>> = Vec::new();
            for e in &agg.elements {
                if element_certain(e, truth, truth) && !tuples.contains(&e.tuple) {
                    tuples.push(e.tuple.clone());
                }
            }
            AggregateWitness {
                aggregate: gp.aggregate_text(agg),
                count: tuples.len(),
                tuples,
            }
        })
        .collect();
    let tree = DerivationTree {
        atom: gp.atom(id).clone(),
        rule: RuleRef {
            origin: r.origin.rule,
            substitution: r.origin.substitution.clone(),
            source: gp.source_text(&r.origin),
            instance: gp.rule_text(r),
        },
        children,
        neg_leaves,
        agg_leaves,
    };
    memo.insert(id, tree.clone());
    tree
}
