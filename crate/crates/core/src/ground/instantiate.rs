use std::collections::{BTreeSet, HashMap, HashSet};

use crate::syntax::{AggregateAtom, Atom, BodyElement, CmpOp, Program, Rule, Term};

use super::safety::{global_vars, shared_vars};
use super::{
    eval_term, lookup, AtomId, GroundAggregate, GroundAtom, GroundElement, GroundError, GroundProgram, GroundRule,
    GroundStats, NegLiteral, Origin, Projection, Value,
};

type Binding = Vec<(String, Value)>;
type SigKey = (String, usize);

#[derive(Default)]
struct Universe {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, u32>,
    by_sig: HashMap<SigKey, Vec<u32>>,
}

impl Universe {
    fn insert(&mut self, atom: GroundAtom) -> bool {
        if self.index.contains_key(&atom) {
            return false;
        }
        let id = self.atoms.len() as u32;
        self.by_sig
            .entry((atom.predicate.clone(), atom.args.len()))
            .or_default()
            .push(id);
        self.index.insert(atom.clone(), id);
        self.atoms.push(atom);
        true
    }

    fn of(&self, predicate: &str, arity: usize) -> &[u32] {
        self.by_sig
            .get(&(predicate.to_string(), arity))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

enum Step {
    Match(usize),
    Assign { var: String, term: Term },
    Count { body: usize, var: String },
}

/// Evaluation order for one literal list (a rule body or an aggregate
/// element condition).
struct Plan {
    steps: Vec<Step>,
    /// Comparisons not consumed as assignments, checked once all variables
    /// are bound.
    checks: Vec<usize>,
    /// Per body position: plans of the aggregate's elements.
    elements: Vec<Vec<Plan>>,
}

fn plan(body: &[BodyElement], initial: &BTreeSet<String>, rule_level: bool, globals: &BTreeSet<String>) -> Plan {
    let mut bound = initial.clone();
    let mut steps = Vec::new();
    let mut used = vec![false; body.len()];
    let all_bound = |t: &Term, bound: &BTreeSet<String>| {
        let mut ok = true;
        t.for_each_var(&mut |v| ok &= bound.contains(&v.name));
        ok
    };
    loop {
        let mut progressed = false;
        for (i, el) in body.iter().enumerate() {
            if used[i] {
                continue;
            }
            match el {
                BodyElement::Cmp(c) if c.op == CmpOp::Eq => {
                    for (side, other) in [(&c.left, &c.right), (&c.right, &c.left)] {
                        if let Term::Var(v) = side {
                            if !bound.contains(&v.name) && all_bound(other, &bound) {
                                bound.insert(v.name.clone());
                                steps.push(Step::Assign {
                                    var: v.name.clone(),
                                    term: other.clone(),
                                });
                                used[i] = true;
                                progressed = true;
                                break;
                            }
                        }
                    }
                }
                BodyElement::Aggregate(agg) if rule_level && agg.relation == CmpOp::Eq => {
                    if let Term::Var(v) = &agg.guard {
                        if bound.contains(&v.name) {
                            continue;
                        }
                        let mut outside = BTreeSet::new();
                        for (j, other) in body.iter().enumerate() {
                            if j != i {
                                other.for_each_var(&mut |w| {
                                    outside.insert(w.name.clone());
                                });
                            }
                        }
                        if shared_vars(agg, &outside).iter().all(|s| bound.contains(s)) {
                            bound.insert(v.name.clone());
                            steps.push(Step::Count {
                                body: i,
                                var: v.name.clone(),
                            });
                            used[i] = true;
                            progressed = true;
                        }
                    }
                }
                _ => {}
            }
            if progressed {
                break;
            }
        }
        if progressed {
            continue;
        }
        // the positive atom with the most already-determined arguments
        let best = body
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .filter_map(|(i, el)| match el {
                BodyElement::Pos(a) => Some((i, a)),
                _ => None,
            })
            .max_by_key(|(i, a)| {
                let fixed = a.args.iter().filter(|t| all_bound(t, &bound)).count();
                (fixed, std::cmp::Reverse(*i))
            });
        match best {
            Some((i, a)) => {
                for t in &a.args {
                    if let Term::Var(v) = t {
                        bound.insert(v.name.clone());
                    }
                }
                used[i] = true;
                steps.push(Step::Match(i));
            }
            None => break,
        }
    }
    let checks = body
        .iter()
        .enumerate()
        .filter(|(i, el)| !used[*i] && matches!(el, BodyElement::Cmp(_)))
        .map(|(i, _)| i)
        .collect();
    let elements = body
        .iter()
        .map(|el| match el {
            BodyElement::Aggregate(agg) => agg
                .elements
                .iter()
                .map(|e| plan(&e.condition, globals, false, globals))
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    Plan {
        steps,
        checks,
        elements,
    }
}

struct Prepared<'a> {
    source: usize,
    rule: &'a Rule,
    plan: Plan,
    /// Named rule-level variables in first-occurrence order.
    origin_vars: Vec<String>,
    /// Signatures whose growth can enable new instances.
    deps: HashSet<SigKey>,
}

fn prepare(source: usize, rule: &Rule) -> Prepared<'_> {
    let globals = global_vars(rule);
    let plan = plan(&rule.body, &BTreeSet::new(), true, &globals);
    let origin_vars = rule
        .variables()
        .into_iter()
        .filter(|v| !v.anonymous && globals.contains(&v.name))
        .map(|v| v.name)
        .collect();
    let mut deps = HashSet::new();
    let add = |el: &BodyElement, deps: &mut HashSet<SigKey>| {
        if let BodyElement::Pos(a) = el {
            deps.insert((a.predicate.clone(), a.args.len()));
        }
    };
    for el in &rule.body {
        add(el, &mut deps);
        if let BodyElement::Aggregate(agg) = el {
            for e in &agg.elements {
                for c in &e.condition {
                    add(c, &mut deps);
                }
            }
        }
    }
    Prepared {
        source,
        rule,
        plan,
        origin_vars,
        deps,
    }
}

struct Engine<'u> {
    universe: &'u Universe,
    line: usize,
}

/// A partially built element or rule instance.
struct Instance {
    pos: Vec<u32>,
    neg: Vec<NegLiteral>,
}

impl<'u> Engine<'u> {
    /// Enumerates the substitutions that satisfy the plan's binding steps,
    /// calling `leaf` with each complete binding.
    fn exec(
        &self,
        plan: &Plan,
        body: &[BodyElement],
        step: usize,
        binding: &mut Binding,
        leaf: &mut dyn FnMut(&mut Binding) -> Result<(), GroundError>,
    ) -> Result<(), GroundError> {
        let Some(s) = plan.steps.get(step) else {
            return leaf(binding);
        };
        match s {
            Step::Match(i) => {
                let BodyElement::Pos(atom) = &body[*i] else {
                    unreachable!()
                };
                for &id in self.universe.of(&atom.predicate, atom.args.len()) {
                    let mark = binding.len();
                    if self.unify(atom, &self.universe.atoms[id as usize], binding)? {
                        self.exec(plan, body, step + 1, binding, leaf)?;
                    }
                    binding.truncate(mark);
                }
                Ok(())
            }
            Step::Assign { var, term } => {
                let v = eval_term(term, binding, self.line)?;
                binding.push((var.clone(), v));
                self.exec(plan, body, step + 1, binding, leaf)?;
                binding.pop();
                Ok(())
            }
            Step::Count { body: i, var } => {
                let BodyElement::Aggregate(agg) = &body[*i] else {
                    unreachable!()
                };
                let elements = self.elements(agg, &plan.elements[*i], binding, false)?;
                let upper = distinct_tuples(&elements);
                for n in 0..=upper {
                    binding.push((var.clone(), Value::Int(n as i64)));
                    self.exec(plan, body, step + 1, binding, leaf)?;
                    binding.pop();
                }
                Ok(())
            }
        }
    }

    /// Binds plain variables of `pattern` against `atom`; arguments whose
    /// variables are still open are skipped and verified at the leaf.
    fn unify(&self, pattern: &Atom, atom: &GroundAtom, binding: &mut Binding) -> Result<bool, GroundError> {
        for (t, value) in pattern.args.iter().zip(&atom.args) {
            if let Term::Var(v) = t {
                match lookup(binding, &v.name) {
                    Some(b) if b != value => return Ok(false),
                    Some(_) => {}
                    None => binding.push((v.name.clone(), value.clone())),
                }
            }
        }
        for (t, value) in pattern.args.iter().zip(&atom.args) {
            if matches!(t, Term::Var(_)) || !self.closed(t, binding) {
                continue;
            }
            if &eval_term(t, binding, self.line)? != value {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn closed(&self, t: &Term, binding: &Binding) -> bool {
        let mut ok = true;
        t.for_each_var(&mut |v| ok &= lookup(binding, &v.name).is_some());
        ok
    }

    fn ground_atom(&self, atom: &Atom, binding: &Binding) -> Result<GroundAtom, GroundError> {
        let args = atom
            .args
            .iter()
            .map(|t| eval_term(t, binding, self.line))
            .collect::<Result<_, _>>()?;
        Ok(GroundAtom::new(atom.predicate.clone(), args))
    }

    /// Checks comparisons and positive atoms and resolves negative
    /// literals. `None` when the body can never hold.
    fn complete(
        &self,
        body: &[BodyElement],
        checks: &[usize],
        binding: &Binding,
        with_negation: bool,
        dropped: &mut usize,
    ) -> Result<Option<Instance>, GroundError> {
        for &i in checks {
            let BodyElement::Cmp(c) = &body[i] else { unreachable!() };
            let l = eval_term(&c.left, binding, self.line)?;
            let r = eval_term(&c.right, binding, self.line)?;
            if !c.op.holds(&l, &r) {
                *dropped += 1;
                return Ok(None);
            }
        }
        let mut inst = Instance {
            pos: Vec::new(),
            neg: Vec::new(),
        };
        for el in body {
            match el {
                BodyElement::Pos(a) => {
                    let g = self.ground_atom(a, binding)?;
                    match self.universe.index.get(&g) {
                        Some(&id) => inst.pos.push(id),
                        None => return Ok(None),
                    }
                }
                BodyElement::Neg(a) if with_negation => {
                    if let Some(n) = self.negative(a, binding)? {
                        inst.neg.push(n);
                    }
                }
                _ => {}
            }
        }
        Ok(Some(inst))
    }

    fn negative(&self, atom: &Atom, binding: &Binding) -> Result<Option<NegLiteral>, GroundError> {
        let mut pattern = Vec::with_capacity(atom.args.len());
        for t in &atom.args {
            let mut open = false;
            t.for_each_var(&mut |v| open |= v.anonymous && lookup(binding, &v.name).is_none());
            pattern.push(if open {
                None
            } else {
                Some(eval_term(t, binding, self.line)?)
            });
        }
        if pattern.iter().all(Option::is_some) {
            let g = GroundAtom::new(atom.predicate.clone(), pattern.iter().flatten().cloned().collect());
            if let Some(&id) = self.universe.index.get(&g) {
                return Ok(Some(NegLiteral::Atom(AtomId(id))));
            }
        }
        let matches: Vec<AtomId> = self
            .universe
            .of(&atom.predicate, atom.args.len())
            .iter()
            .filter(|&&id| {
                let a = &self.universe.atoms[id as usize];
                pattern
                    .iter()
                    .zip(&a.args)
                    .all(|(p, v)| p.as_ref().is_none_or(|p| p == v))
            })
            .map(|&id| AtomId(id))
            .collect();
        // kept even without matches: always true, but explanations cite it
        Ok(Some(NegLiteral::Absent(Projection {
            predicate: atom.predicate.clone(),
            pattern,
            matches,
        })))
    }

    fn elements(
        &self,
        agg: &AggregateAtom,
        plans: &[Plan],
        binding: &mut Binding,
        with_negation: bool,
    ) -> Result<Vec<GroundElement>, GroundError> {
        let mut out = Vec::new();
        for (el, plan) in agg.elements.iter().zip(plans) {
            let mut ignored = 0;
            self.exec(plan, &el.condition, 0, binding, &mut |b| {
                if let Some(inst) = self.complete(&el.condition, &plan.checks, b, with_negation, &mut ignored)? {
                    let tuple = el
                        .tuple
                        .iter()
                        .map(|t| eval_term(t, b, self.line))
                        .collect::<Result<_, _>>()?;
                    out.push(GroundElement {
                        tuple,
                        pos: inst.pos.into_iter().map(AtomId).collect(),
                        neg: inst.neg,
                    });
                }
                Ok(())
            })?;
        }
        Ok(out)
    }
}

fn distinct_tuples(elements: &[GroundElement]) -> usize {
    elements.iter().map(|e| &e.tuple).collect::<HashSet<_>>().len()
}

fn possible(guard: &Value, relation: CmpOp, upper: usize) -> bool {
    (0..=upper).any(|c| relation.holds(guard, &Value::Int(c as i64)))
}

/// Upper-bound fixpoint followed by the final instantiation pass.
pub(super) fn run(expanded: &[(usize, Rule)], program: &Program) -> Result<GroundProgram, GroundError> {
    let prepared: Vec<Prepared> = expanded.iter().map(|(i, r)| prepare(*i, r)).collect();
    let mut universe = Universe::default();
    let mut stats = GroundStats::default();

    let mut grown: Option<HashSet<SigKey>> = None;
    loop {
        stats.passes += 1;
        let mut new_atoms = Vec::new();
        for p in &prepared {
            let Some(head) = &p.rule.head else { continue };
            if let Some(g) = &grown {
                if !p.deps.iter().any(|d| g.contains(d)) {
                    continue;
                }
            }
            let engine = Engine {
                universe: &universe,
                line: p.rule.span.line,
            };
            let mut binding = Vec::new();
            let mut ignored = 0;
            engine.exec(&p.plan, &p.rule.body, 0, &mut binding, &mut |b| {
                if engine
                    .complete(&p.rule.body, &p.plan.checks, b, false, &mut ignored)?
                    .is_none()
                {
                    return Ok(());
                }
                if !aggregates_possible(&engine, p, b)? {
                    return Ok(());
                }
                let g = engine.ground_atom(head, b)?;
                if !universe.index.contains_key(&g) {
                    new_atoms.push(g);
                }
                Ok(())
            })?;
        }
        let mut changed = HashSet::new();
        for a in new_atoms {
            let key = (a.predicate.clone(), a.args.len());
            if universe.insert(a) {
                changed.insert(key);
            }
        }
        if changed.is_empty() {
            break;
        }
        grown = Some(changed);
    }

    // final pass over the fixed universe
    let mut rules = Vec::new();
    {
        let universe = &universe;
        for p in &prepared {
            let engine = Engine {
                universe,
                line: p.rule.span.line,
            };
            let mut binding = Vec::new();
            let mut substitutions = 0;
            let mut dropped = 0;
            engine.exec(&p.plan, &p.rule.body, 0, &mut binding, &mut |b| {
                substitutions += 1;
                let Some(inst) = engine.complete(&p.rule.body, &p.plan.checks, b, true, &mut dropped)? else {
                    return Ok(());
                };
                let mut aggregates = Vec::new();
                for (i, el) in p.rule.body.iter().enumerate() {
                    let BodyElement::Aggregate(agg) = el else { continue };
                    let elements = engine.elements(agg, &p.plan.elements[i], b, true)?;
                    let guard = eval_term(&agg.guard, b, engine.line)?;
                    if !possible(&guard, agg.relation, distinct_tuples(&elements)) {
                        return Ok(());
                    }
                    aggregates.push(GroundAggregate {
                        guard,
                        relation: agg.relation,
                        elements,
                    });
                }
                let head = match &p.rule.head {
                    Some(h) => {
                        let g = engine.ground_atom(h, b)?;
                        Some(AtomId(universe.index[&g]))
                    }
                    None => None,
                };
                let substitution = p
                    .origin_vars
                    .iter()
                    .map(|name| (name.clone(), lookup(b, name).cloned().expect("bound")))
                    .collect();
                rules.push(GroundRule {
                    head,
                    pos: inst.pos.into_iter().map(AtomId).collect(),
                    neg: inst.neg,
                    aggregates,
                    origin: Origin {
                        rule: p.source,
                        substitution,
                    },
                });
                Ok(())
            })?;
            stats.substitutions += substitutions;
            stats.dropped_by_comparison += dropped;
        }
    }

    // renumber atoms in sorted order
    let mut order: Vec<u32> = (0..universe.atoms.len() as u32).collect();
    order.sort_by(|&a, &b| universe.atoms[a as usize].cmp(&universe.atoms[b as usize]));
    let mut rank = vec![0u32; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old as usize] = new as u32;
    }
    let remap = |id: &mut AtomId| id.0 = rank[id.index()];
    let remap_neg = |n: &mut NegLiteral| match n {
        NegLiteral::Atom(id) => remap(id),
        NegLiteral::Absent(p) => {
            p.matches.iter_mut().for_each(remap);
            p.matches.sort();
        }
    };
    for r in &mut rules {
        if let Some(h) = &mut r.head {
            remap(h);
        }
        r.pos.iter_mut().for_each(remap);
        r.neg.iter_mut().for_each(remap_neg);
        for agg in &mut r.aggregates {
            for el in &mut agg.elements {
                el.pos.iter_mut().for_each(remap);
                el.neg.iter_mut().for_each(remap_neg);
            }
        }
    }
    rules.sort_by(|a, b| a.origin.cmp(&b.origin));
    let atoms = order.iter().map(|&i| universe.atoms[i as usize].clone()).collect();

    Ok(GroundProgram::from_parts(
        rules,
        atoms,
        program.shows.clone(),
        program.rules.clone(),
        stats,
    ))
}

fn aggregates_possible(engine: &Engine, p: &Prepared, binding: &mut Binding) -> Result<bool, GroundError> {
    for (i, el) in p.rule.body.iter().enumerate() {
        let BodyElement::Aggregate(agg) = el else { continue };
        if p.plan
            .steps
            .iter()
            .any(|s| matches!(s, Step::Count { body, .. } if *body == i))
        {
            continue;
        }
        let elements = engine.elements(agg, &p.plan.elements[i], binding, false)?;
        let guard = eval_term(&agg.guard, binding, engine.line)?;
        if !possible(&guard, agg.relation, distinct_tuples(&elements)) {
            return Ok(false);
        }
    }
    Ok(true)
}
