use std::collections::BTreeSet;

use crate::syntax::{AggregateAtom, BodyElement, CmpOp, Rule, Term, Variable};

/// Names of the variables that make a rule unsafe; anonymous variables are
/// reported as `_`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyViolation {
    pub variables: Vec<String>,
}

/// Checks that every variable of the rule is bound by a positive literal.
///
/// Variables count as bound when they appear as a plain argument of a
/// positive body atom, when an `==` comparison equates them with a bound
/// term, or when they are the guard of an `N = #count{..}` aggregate.
/// Anonymous variables inside negative literals are exempt: `not p(X, _)`
/// reads as "no `p(X, _)` instance exists". Aggregate elements form their
/// own scope that sees the outer bound variables.
pub fn check_safety(rule: &Rule) -> Result<(), SafetyViolation> {
    let mut bound = BTreeSet::new();
    for el in &rule.body {
        if let BodyElement::Pos(a) = el {
            bind_plain_args(&a.args, &mut bound);
        }
    }
    propagate(&rule.body, &mut bound, true);

    let mut unsafe_vars = BTreeSet::new();
    let mut agg_unsafe = Vec::new();
    let mut need = |v: &Variable, bound: &BTreeSet<String>| {
        if !bound.contains(&v.name) {
            unsafe_vars.insert(display_name(v));
        }
    };
    if let Some(h) = &rule.head {
        h.for_each_var(&mut |v| need(v, &bound));
    }
    for el in &rule.body {
        match el {
            BodyElement::Pos(a) => a.for_each_var(&mut |v| need(v, &bound)),
            BodyElement::Neg(a) => a.for_each_var(&mut |v| {
                if !v.anonymous {
                    need(v, &bound)
                }
            }),
            BodyElement::Cmp(c) => {
                c.left.for_each_var(&mut |v| need(v, &bound));
                c.right.for_each_var(&mut |v| need(v, &bound));
            }
            BodyElement::Aggregate(agg) => {
                agg.guard.for_each_var(&mut |v| need(v, &bound));
                agg_unsafe.extend(aggregate_unsafe(agg, &bound));
            }
        }
    }
    unsafe_vars.extend(agg_unsafe);
    if unsafe_vars.is_empty() {
        Ok(())
    } else {
        Err(SafetyViolation {
            variables: unsafe_vars.into_iter().collect(),
        })
    }
}

fn display_name(v: &Variable) -> String {
    if v.anonymous {
        "_".to_string()
    } else {
        v.name.clone()
    }
}

fn bind_plain_args(args: &[Term], bound: &mut BTreeSet<String>) {
    for t in args {
        if let Term::Var(v) = t {
            bound.insert(v.name.clone());
        }
    }
}

fn all_bound(t: &Term, bound: &BTreeSet<String>) -> bool {
    let mut ok = true;
    t.for_each_var(&mut |v| ok &= bound.contains(&v.name));
    ok
}

/// Variables of an aggregate that also occur outside of it.
pub(crate) fn shared_vars(agg: &AggregateAtom, outside: &BTreeSet<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for el in &agg.elements {
        for t in &el.tuple {
            t.for_each_var(&mut |v| {
                if outside.contains(&v.name) {
                    out.insert(v.name.clone());
                }
            });
        }
        for c in &el.condition {
            c.for_each_var(&mut |v| {
                if outside.contains(&v.name) {
                    out.insert(v.name.clone());
                }
            });
        }
    }
    out
}

/// Variables occurring outside of aggregate elements (head, literals,
/// comparisons, aggregate guards).
pub(crate) fn global_vars(rule: &Rule) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if let Some(h) = &rule.head {
        h.for_each_var(&mut |v| {
            out.insert(v.name.clone());
        });
    }
    for el in &rule.body {
        match el {
            BodyElement::Aggregate(agg) => agg.guard.for_each_var(&mut |v| {
                out.insert(v.name.clone());
            }),
            other => other.for_each_var(&mut |v| {
                out.insert(v.name.clone());
            }),
        }
    }
    out
}

/// Closes `bound` under `==` bindings (and, at rule level, assignment
/// aggregates).
fn propagate(body: &[BodyElement], bound: &mut BTreeSet<String>, rule_level: bool) {
    loop {
        let mut changed = false;
        for el in body {
            match el {
                BodyElement::Cmp(c) if c.op == CmpOp::Eq => {
                    for (side, other) in [(&c.left, &c.right), (&c.right, &c.left)] {
                        if let Term::Var(v) = side {
                            if !bound.contains(&v.name) && all_bound(other, bound) {
                                bound.insert(v.name.clone());
                                changed = true;
                            }
                        }
                    }
                }
                BodyElement::Aggregate(agg) if rule_level && agg.relation == CmpOp::Eq => {
                    if let Term::Var(v) = &agg.guard {
                        if !bound.contains(&v.name) {
                            // the guard binds once the variables the
                            // aggregate shares with the rest of the rule do
                            let mut outside = BTreeSet::new();
                            for other in body {
                                if !std::ptr::eq(other, el) {
                                    other.for_each_var(&mut |w| {
                                        outside.insert(w.name.clone());
                                    });
                                }
                            }
                            if shared_vars(agg, &outside).iter().all(|s| bound.contains(s)) {
                                bound.insert(v.name.clone());
                                changed = true;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        if !changed {
            return;
        }
    }
}

fn aggregate_unsafe(agg: &AggregateAtom, outer: &BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for el in &agg.elements {
        let mut bound = outer.clone();
        for c in &el.condition {
            if let BodyElement::Pos(a) = c {
                bind_plain_args(&a.args, &mut bound);
            }
        }
        propagate(&el.condition, &mut bound, false);
        let mut need = |v: &Variable| {
            if !bound.contains(&v.name) {
                out.push(display_name(v));
            }
        };
        for t in &el.tuple {
            t.for_each_var(&mut need);
        }
        for c in &el.condition {
            match c {
                BodyElement::Neg(a) => a.for_each_var(&mut |v| {
                    if !v.anonymous {
                        need(v)
                    }
                }),
                other => other.for_each_var(&mut need),
            }
        }
    }
    out
}
