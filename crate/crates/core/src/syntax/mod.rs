//! Abstract syntax for the supported logic-program fragment.
//!
//! The fragment covers facts (with integer intervals), normal rules,
//! integrity constraints, `#count` aggregates with a single guard,
//! comparisons, integer arithmetic (`+`, `-`, `*`) and `#show name/arity`
//! directives. Anything outside of that (choice rules, disjunction,
//! classical negation, optimization statements) is rejected by the parser.

mod lexer;
mod parser;
mod render;

use std::collections::BTreeSet;
use std::fmt;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_atom, parse_program};

/// Errors produced while tokenizing or parsing program text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("{line}:{column}: illegal character {ch:?}")]
    IllegalCharacter { line: usize, column: usize, ch: char },
    #[error("{line}:{column}: integer literal out of range")]
    IntegerOverflow { line: usize, column: usize },
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        expected: Vec<String>,
        message: String,
    },
}

impl SyntaxError {
    pub fn line(&self) -> usize {
        match self {
            SyntaxError::IllegalCharacter { line, .. }
            | SyntaxError::IntegerOverflow { line, .. }
            | SyntaxError::Parse { line, .. } => *line,
        }
    }
}

/// Source position of a statement.
///
/// Positions never take part in structural comparisons: two rules parsed
/// from differently formatted text compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn apply(self, left: i64, right: i64) -> Option<i64> {
        match self {
            ArithOp::Add => left.checked_add(right),
            ArithOp::Sub => left.checked_sub(right),
            ArithOp::Mul => left.checked_mul(right),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds<T: Ord>(self, left: &T, right: &T) -> bool {
        match self {
            CmpOp::Eq => left == right,
            CmpOp::Ne => left != right,
            CmpOp::Lt => left < right,
            CmpOp::Le => left <= right,
            CmpOp::Gt => left > right,
            CmpOp::Ge => left >= right,
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A variable occurrence. Anonymous variables (`_`) are renamed to fresh
/// names during parsing and keep `anonymous = true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    pub name: String,
    pub anonymous: bool,
}

impl Variable {
    pub fn named(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            anonymous: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(i64),
    Sym(String),
    Var(Variable),
    Arith(ArithOp, Box<Term>, Box<Term>),
    Interval(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(Variable::named(name))
    }

    pub fn arith(op: ArithOp, left: Term, right: Term) -> Term {
        Term::Arith(op, Box::new(left), Box::new(right))
    }

    pub fn interval(lo: Term, hi: Term) -> Term {
        Term::Interval(Box::new(lo), Box::new(hi))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Sym(_) => true,
            Term::Var(_) => false,
            Term::Arith(_, l, r) | Term::Interval(l, r) => l.is_ground() && r.is_ground(),
        }
    }

    pub fn contains_interval(&self) -> bool {
        match self {
            Term::Interval(..) => true,
            Term::Arith(_, l, r) => l.contains_interval() || r.contains_interval(),
            _ => false,
        }
    }

    /// Visits every variable occurring in the term.
    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a Variable)) {
        match self {
            Term::Var(v) => f(v),
            Term::Arith(_, l, r) | Term::Interval(l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
            Term::Int(_) | Term::Sym(_) => {}
        }
    }

    pub fn vars(&self) -> BTreeSet<&Variable> {
        let mut out = BTreeSet::new();
        self.for_each_var(&mut |v| {
            out.insert(v);
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn signature(&self) -> Signature {
        Signature::new(self.predicate.clone(), self.args.len())
    }

    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a Variable)) {
        for arg in &self.args {
            arg.for_each_var(f);
        }
    }
}

/// A predicate name together with its arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Signature {
    pub name: String,
    pub arity: usize,
}

impl Signature {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Signature {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub op: CmpOp,
    pub left: Term,
    pub right: Term,
}

/// `guard relation #count{ elements }`, read as "guard relation count".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateAtom {
    pub guard: Term,
    pub relation: CmpOp,
    pub elements: Vec<AggregateElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateElement {
    pub tuple: Vec<Term>,
    pub condition: Vec<BodyElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BodyElement {
    Pos(Atom),
    Neg(Atom),
    Cmp(Comparison),
    Aggregate(AggregateAtom),
}

impl BodyElement {
    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a Variable)) {
        match self {
            BodyElement::Pos(a) | BodyElement::Neg(a) => a.for_each_var(f),
            BodyElement::Cmp(c) => {
                c.left.for_each_var(f);
                c.right.for_each_var(f);
            }
            BodyElement::Aggregate(agg) => {
                agg.guard.for_each_var(f);
                for el in &agg.elements {
                    for t in &el.tuple {
                        t.for_each_var(f);
                    }
                    for c in &el.condition {
                        c.for_each_var(f);
                    }
                }
            }
        }
    }
}

/// A rule; `head == None` makes it an integrity constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Option<Atom>,
    pub body: Vec<BodyElement>,
    pub span: Span,
}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule {
            head: Some(head),
            body: Vec::new(),
            span: Span::default(),
        }
    }

    pub fn is_fact(&self) -> bool {
        self.head.is_some() && self.body.is_empty()
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_none()
    }

    /// Variables in order of first occurrence (head first, then body).
    pub fn variables(&self) -> Vec<Variable> {
        let mut seen = Vec::<Variable>::new();
        let mut push = |v: &Variable| {
            if !seen.contains(v) {
                seen.push(v.clone());
            }
        };
        if let Some(h) = &self.head {
            h.for_each_var(&mut |v| push(v));
        }
        for el in &self.body {
            el.for_each_var(&mut |v| push(v));
        }
        seen
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub shows: Vec<Signature>,
}

impl Program {
    pub fn statement_count(&self) -> usize {
        self.rules.len() + self.shows.len()
    }

    /// Appends the statements of `other`, keeping order.
    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
        for s in other.shows {
            if !self.shows.contains(&s) {
                self.shows.push(s);
            }
        }
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}
