use std::fmt::{self, Display, Formatter, Write};

use super::{AggregateAtom, Atom, BodyElement, CmpOp, Comparison, Program, Rule, Term};

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(n) => write!(f, "{n}"),
            Term::Sym(s) => f.write_str(s),
            Term::Var(v) if v.anonymous => f.write_char('_'),
            Term::Var(v) => f.write_str(&v.name),
            Term::Arith(op, l, r) => {
                write_operand(f, l)?;
                f.write_str(op.symbol())?;
                write_operand(f, r)
            }
            Term::Interval(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

fn write_operand(f: &mut Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Arith(..) => write!(f, "({t})"),
        // keeps `X-(-3)` from printing as `X--3`
        Term::Int(n) if *n < 0 => write!(f, "({n})"),
        _ => write!(f, "{t}"),
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl Display for Comparison {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

impl Display for AggregateAtom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            CmpOp::Eq => "=",
            other => other.symbol(),
        };
        write!(f, "{} {} #count{{", self.guard, rel)?;
        for (i, el) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write_list(f, &el.tuple, ", ")?;
            if !el.condition.is_empty() {
                f.write_str(": ")?;
                write_list(f, &el.condition, ", ")?;
            }
        }
        f.write_char('}')
    }
}

impl Display for BodyElement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            BodyElement::Pos(a) => write!(f, "{a}"),
            BodyElement::Neg(a) => write!(f, "not {a}"),
            BodyElement::Cmp(c) => write!(f, "{c}"),
            BodyElement::Aggregate(a) => write!(f, "{a}"),
        }
    }
}

impl Display for Rule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match (&self.head, self.body.is_empty()) {
            (Some(h), true) => write!(f, "{h}."),
            (Some(h), false) => {
                write!(f, "{h} :- ")?;
                write_list(f, &self.body, ", ")?;
                f.write_char('.')
            }
            (None, _) => {
                f.write_str(":- ")?;
                write_list(f, &self.body, ", ")?;
                f.write_char('.')
            }
        }
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for s in &self.shows {
            writeln!(f, "#show {s}.")?;
        }
        Ok(())
    }
}

fn write_list<T: Display>(f: &mut Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}
