use crate::syntax::{AggregateAtom, Atom, BodyElement, Rule, Term};

use super::{eval_term, GroundError, Value};

/// Expands every interval occurring in an atom argument into one rule copy
/// per value, taking the cross product over all interval positions.
/// `lo > hi` yields no copies.
pub fn expand_intervals(rule: &Rule) -> Result<Vec<Rule>, GroundError> {
    let mut ranges = Vec::new();
    let mut error = None;
    visit_intervals(rule, &mut |lo, hi| {
        if error.is_some() {
            return;
        }
        match (bound(lo, rule), bound(hi, rule)) {
            (Ok(lo), Ok(hi)) => ranges.push((lo, hi)),
            (Err(e), _) | (_, Err(e)) => error = Some(e),
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    if aggregates_contain_intervals(rule) {
        return Err(GroundError::NonGroundInterval {
            line: rule.span.line,
            detail: "intervals inside aggregates are not supported".into(),
        });
    }
    if ranges.is_empty() {
        return Ok(vec![rule.clone()]);
    }

    let mut choices: Vec<Vec<i64>> = vec![Vec::new()];
    for (lo, hi) in &ranges {
        let mut next = Vec::new();
        for prefix in &choices {
            for v in *lo..=*hi {
                let mut c = prefix.clone();
                c.push(v);
                next.push(c);
            }
        }
        choices = next;
    }
    Ok(choices
        .into_iter()
        .map(|values| {
            let mut it = values.into_iter();
            let mut copy = rule.clone();
            replace_intervals(&mut copy, &mut it);
            copy
        })
        .collect())
}

fn bound(t: &Term, rule: &Rule) -> Result<i64, GroundError> {
    if !t.is_ground() {
        return Err(GroundError::NonGroundInterval {
            line: rule.span.line,
            detail: format!("interval bound `{t}` contains a variable"),
        });
    }
    match eval_term(t, &[], rule.span.line)? {
        Value::Int(n) => Ok(n),
        Value::Sym(s) => Err(GroundError::NonGroundInterval {
            line: rule.span.line,
            detail: format!("interval bound `{s}` is not an integer"),
        }),
    }
}

fn visit_intervals<'a>(rule: &'a Rule, f: &mut dyn FnMut(&'a Term, &'a Term)) {
    let mut atom = |a: &'a Atom| {
        for arg in &a.args {
            if let Term::Interval(lo, hi) = arg {
                f(lo, hi);
            }
        }
    };
    if let Some(h) = &rule.head {
        atom(h);
    }
    for el in &rule.body {
        if let BodyElement::Pos(a) | BodyElement::Neg(a) = el {
            atom(a);
        }
    }
}

fn replace_intervals(rule: &mut Rule, values: &mut impl Iterator<Item = i64>) {
    let mut atom = |a: &mut Atom| {
        for arg in &mut a.args {
            if let Term::Interval(..) = arg {
                *arg = Term::Int(values.next().expect("one value per interval"));
            }
        }
    };
    if let Some(h) = &mut rule.head {
        atom(h);
    }
    for el in &mut rule.body {
        if let BodyElement::Pos(a) | BodyElement::Neg(a) = el {
            atom(a);
        }
    }
}

fn aggregates_contain_intervals(rule: &Rule) -> bool {
    let agg_has = |agg: &AggregateAtom| {
        agg.elements.iter().any(|el| {
            el.condition.iter().any(|c| match c {
                BodyElement::Pos(a) | BodyElement::Neg(a) => a.args.iter().any(Term::contains_interval),
                _ => false,
            })
        })
    };
    rule.body.iter().any(|el| match el {
        BodyElement::Aggregate(agg) => agg_has(agg),
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;
    use proptest::prelude::*;

    fn expand(text: &str) -> Result<Vec<String>, GroundError> {
        let p = parse_program(text).unwrap();
        Ok(expand_intervals(&p.rules[0])?.iter().map(|r| r.to_string()).collect())
    }

    #[test]
    fn uatm_range() {
        assert_eq!(expand("uatm(1..3).").unwrap(), vec!["uatm(1).", "uatm(2).", "uatm(3)."]);
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(expand("p(2..2).").unwrap(), vec!["p(2)."]);
        assert!(expand("p(3..1).").unwrap().is_empty());
    }

    #[test]
    fn corridor_range() {
        let facts = expand("edge_range(7,6,1..22).").unwrap();
        assert_eq!(facts.len(), 22);
        assert_eq!(facts[0], "edge_range(7, 6, 1).");
        assert_eq!(facts[21], "edge_range(7, 6, 22).");
    }

    #[test]
    fn variable_bound_is_rejected() {
        assert!(matches!(expand("p(1..X)."), Err(GroundError::NonGroundInterval { .. })));
    }

    #[test]
    fn arithmetic_bounds() {
        assert_eq!(expand("p(1+1..2*2).").unwrap().len(), 3);
    }

    proptest! {
        #[test]
        fn cardinality_is_product_of_ranges(
            a in -3i64..6, b in -3i64..6, c in -3i64..6, d in -3i64..6,
        ) {
            let text = format!("p({a}..{b}, x, {c}..{d}).");
            let n = expand(&text).unwrap().len() as i64;
            let expected = (b - a + 1).max(0) * (d - c + 1).max(0);
            prop_assert_eq!(n, expected);
        }
    }
}
