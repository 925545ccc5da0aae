//! Grounding: turns a [`Program`] into a variable-free [`GroundProgram`].
//!
//! Rules are instantiated against an upper bound of the derivable atoms,
//! computed as the least fixpoint of the program with negation ignored and
//! aggregates treated as possibly true. Rule instances whose positive body
//! falls outside the bound never hold in any model and are not produced.

mod instantiate;
mod intervals;
mod safety;

use std::collections::HashMap;
use std::fmt::{self, Display, Formatter};

use serde::{Deserialize, Serialize};

use crate::syntax::{CmpOp, Program, Rule, Signature, Term};

pub use intervals::expand_intervals;
pub use safety::{check_safety, SafetyViolation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("line {line}: {detail}")]
    NonGroundInterval { line: usize, detail: String },
    #[error("line {line}: unsafe variables {}", variables.join(", "))]
    Unsafe {
        rule: usize,
        line: usize,
        variables: Vec<String>,
    },
    #[error("line {line}: arithmetic on symbolic constant `{symbol}`")]
    ArithmeticOnSymbol { line: usize, symbol: String },
    #[error("line {line}: integer overflow")]
    ArithmeticOverflow { line: usize },
}

impl GroundError {
    pub fn line(&self) -> usize {
        match self {
            GroundError::NonGroundInterval { line, .. }
            | GroundError::Unsafe { line, .. }
            | GroundError::ArithmeticOnSymbol { line, .. }
            | GroundError::ArithmeticOverflow { line } => *line,
        }
    }
}

/// A ground constant. Integers order before symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Sym(_) => None,
        }
    }
}

impl Display for Value {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

/// Evaluates a term under a binding. Unbound variables are a caller bug.
pub(crate) fn eval_term(t: &Term, binding: &[(String, Value)], line: usize) -> Result<Value, GroundError> {
    match t {
        Term::Int(n) => Ok(Value::Int(*n)),
        Term::Sym(s) => Ok(Value::Sym(s.clone())),
        Term::Var(v) => Ok(lookup(binding, &v.name)
            .unwrap_or_else(|| panic!("variable {} evaluated before binding", v.name))
            .clone()),
        Term::Arith(op, l, r) => {
            let l = eval_term(l, binding, line)?;
            let r = eval_term(r, binding, line)?;
            match (l, r) {
                (Value::Int(a), Value::Int(b)) => op
                    .apply(a, b)
                    .map(Value::Int)
                    .ok_or(GroundError::ArithmeticOverflow { line }),
                (Value::Sym(s), _) | (_, Value::Sym(s)) => Err(GroundError::ArithmeticOnSymbol { line, symbol: s }),
            }
        }
        Term::Interval(..) => unreachable!("intervals are expanded before evaluation"),
    }
}

pub(crate) fn lookup<'a>(binding: &'a [(String, Value)], name: &str) -> Option<&'a Value> {
    binding.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
}

/// Serialized in its text form, e.g. `"loc(1,1,7,6,20)"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Value>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Shorthand for atoms with integer arguments.
    pub fn ints(predicate: &str, args: &[i64]) -> Self {
        GroundAtom::new(predicate, args.iter().map(|&n| Value::Int(n)).collect())
    }

    pub fn signature(&self) -> Signature {
        Signature::new(self.predicate.clone(), self.args.len())
    }

    pub fn int_args(&self) -> Option<Vec<i64>> {
        self.args.iter().map(Value::as_int).collect()
    }

    /// Converts a parsed atom without variables.
    pub fn from_atom(atom: &crate::syntax::Atom) -> Result<Self, GroundError> {
        let mut args = Vec::with_capacity(atom.args.len());
        for a in &atom.args {
            if !a.is_ground() || a.contains_interval() {
                return Err(GroundError::NonGroundInterval {
                    line: 0,
                    detail: format!("`{a}` is not a ground constant"),
                });
            }
            args.push(eval_term(a, &[], 0)?);
        }
        Ok(GroundAtom::new(atom.predicate.clone(), args))
    }
}

impl Display for GroundAtom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for GroundAtom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let atom = crate::syntax::parse_atom(s).map_err(|e| e.to_string())?;
        GroundAtom::from_atom(&atom).map_err(|e| e.to_string())
    }
}

impl Serialize for GroundAtom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroundAtom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `not p(c1, _, c3)`: no atom of `p` with the fixed arguments exists.
/// Also used, without `None` positions, for atoms outside the universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub predicate: String,
    /// `None` marks a projected (anonymous) position.
    pub pattern: Vec<Option<Value>>,
    /// Atoms of the universe matching the pattern.
    pub matches: Vec<AtomId>,
}

impl Display for Projection {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.pattern.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.pattern.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match a {
                    Some(v) => write!(f, "{v}")?,
                    None => f.write_str("_")?,
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NegLiteral {
    Atom(AtomId),
    Absent(Projection),
}

impl NegLiteral {
    /// Atoms whose presence falsifies the literal.
    pub fn atoms(&self) -> &[AtomId] {
        match self {
            NegLiteral::Atom(id) => std::slice::from_ref(id),
            NegLiteral::Absent(p) => &p.matches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundElement {
    pub tuple: Vec<Value>,
    pub pos: Vec<AtomId>,
    pub neg: Vec<NegLiteral>,
}

/// `guard relation count`, where count is the number of distinct tuples
/// of elements whose condition holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAggregate {
    pub guard: Value,
    pub relation: CmpOp,
    pub elements: Vec<GroundElement>,
}

impl GroundAggregate {
    pub fn holds_for(&self, count: usize) -> bool {
        self.relation.holds(&self.guard, &Value::Int(count as i64))
    }
}

/// Where a ground rule came from: the index of the source rule and the
/// values of its (rule-level) variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub rule: usize,
    pub substitution: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundRule {
    /// `None` for integrity constraints.
    pub head: Option<AtomId>,
    pub pos: Vec<AtomId>,
    pub neg: Vec<NegLiteral>,
    pub aggregates: Vec<GroundAggregate>,
    pub origin: Origin,
}

impl GroundRule {
    pub fn neg_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.neg.iter().flat_map(|n| n.atoms().iter().copied())
    }

    pub fn is_fact(&self) -> bool {
        self.head.is_some() && self.pos.is_empty() && self.neg.is_empty() && self.aggregates.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GroundStats {
    /// Complete substitutions of the rule-level variables in the final pass.
    pub substitutions: usize,
    /// Substitutions dropped because a comparison evaluated to false.
    pub dropped_by_comparison: usize,
    /// Passes of the upper-bound fixpoint.
    pub passes: usize,
}

#[derive(Debug, Clone)]
pub struct GroundProgram {
    pub rules: Vec<GroundRule>,
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
    pub shows: Vec<Signature>,
    /// The source rules, indexed by [`Origin::rule`].
    pub sources: Vec<Rule>,
    pub stats: GroundStats,
}

impl GroundProgram {
    pub(crate) fn from_parts(
        rules: Vec<GroundRule>,
        atoms: Vec<GroundAtom>,
        shows: Vec<Signature>,
        sources: Vec<Rule>,
        stats: GroundStats,
    ) -> Self {
        let index = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), AtomId(i as u32)))
            .collect();
        GroundProgram {
            rules,
            atoms,
            index,
            shows,
            sources,
            stats,
        }
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    /// The atom universe, sorted; an atom's position is its [`AtomId`].
    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn source_text(&self, origin: &Origin) -> String {
        self.sources.get(origin.rule).map(|r| r.to_string()).unwrap_or_default()
    }

    /// Text of one ground rule in `.lp` syntax.
    pub fn rule_text(&self, rule: &GroundRule) -> String {
        let mut body: Vec<String> = rule.pos.iter().map(|&a| self.atom(a).to_string()).collect();
        for n in &rule.neg {
            match n {
                NegLiteral::Atom(a) => body.push(format!("not {}", self.atom(*a))),
                NegLiteral::Absent(p) => body.push(format!("not {p}")),
            }
        }
        for agg in &rule.aggregates {
            body.push(self.aggregate_text(agg));
        }
        let head = rule.head.map(|h| self.atom(h).to_string());
        match (head, body.is_empty()) {
            (Some(h), true) => format!("{h}."),
            (Some(h), false) => format!("{h} :- {}.", body.join(", ")),
            (None, _) => format!(":- {}.", body.join(", ")),
        }
    }

    pub fn neg_text(&self, n: &NegLiteral) -> String {
        match n {
            NegLiteral::Atom(a) => format!("not {}", self.atom(*a)),
            NegLiteral::Absent(p) => format!("not {p}"),
        }
    }

    pub fn aggregate_text(&self, agg: &GroundAggregate) -> String {
        let rel = match agg.relation {
            CmpOp::Eq => "=",
            other => other.symbol(),
        };
        let elements: Vec<String> = agg
            .elements
            .iter()
            .map(|el| {
                let tuple: Vec<String> = el.tuple.iter().map(|v| v.to_string()).collect();
                let mut cond: Vec<String> = el.pos.iter().map(|&a| self.atom(a).to_string()).collect();
                for n in &el.neg {
                    match n {
                        NegLiteral::Atom(a) => cond.push(format!("not {}", self.atom(*a))),
                        NegLiteral::Absent(p) => cond.push(format!("not {p}")),
                    }
                }
                if cond.is_empty() {
                    tuple.join(",")
                } else {
                    format!("{}: {}", tuple.join(","), cond.join(", "))
                }
            })
            .collect();
        format!("{} {} #count{{{}}}", agg.guard, rel, elements.join("; "))
    }

    /// Debug dump of the whole ground program in `.lp` syntax.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&self.rule_text(r));
            out.push('\n');
        }
        for s in &self.shows {
            out.push_str(&format!("#show {s}.\n"));
        }
        out
    }
}

/// Grounds a program: interval expansion, safety check, instantiation.
pub fn ground(program: &Program) -> Result<GroundProgram, GroundError> {
    let mut expanded = Vec::new();
    for (index, rule) in program.rules.iter().enumerate() {
        if let Err(v) = check_safety(rule) {
            return Err(GroundError::Unsafe {
                rule: index,
                line: rule.span.line,
                variables: v.variables,
            });
        }
        for copy in expand_intervals(rule)? {
            expanded.push((index, copy));
        }
    }
    instantiate::run(&expanded, program)
}
