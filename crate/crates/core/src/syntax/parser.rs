use super::lexer::{tokenize, Token, TokenKind};
use super::{
    AggregateAtom, AggregateElement, ArithOp, Atom, BodyElement, Comparison, Program, Rule, Signature, Span,
    SyntaxError, Term, Variable,
};

const UNSUPPORTED: &str = "feature not in supported fragment";

/// Parses program text into a [`Program`].
///
/// Every `_` is replaced by a fresh anonymous variable; statement order is
/// kept as written.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        anon: 0,
    };
    let mut program = Program::default();
    while !parser.at_end() {
        parser.statement(&mut program)?;
    }
    Ok(program)
}

/// Parses a single atom such as `target_change(1,2)`; a trailing period is
/// accepted.
pub fn parse_atom(text: &str) -> Result<Atom, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        anon: 0,
    };
    let atom = parser.atom()?;
    if parser.check(&TokenKind::Dot) {
        parser.pos += 1;
    }
    if !parser.at_end() {
        return Err(parser.error(&["end of input"], "unexpected trailing input"));
    }
    Ok(atom)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    anon: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn check(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    fn position(&self) -> (usize, usize) {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(t) if self.pos < self.tokens.len() => (t.line, t.column),
            // Past the end: point just after the last token.
            Some(t) => (t.line, t.column + 1),
            None => (1, 1),
        }
    }

    fn error(&self, expected: &[&str], message: impl Into<String>) -> SyntaxError {
        let (line, column) = self.position();
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        let found = match self.peek() {
            Some(k) => describe(k),
            None => "end of input".to_string(),
        };
        let mut message = message.into();
        if message.is_empty() {
            message = format!("expected {}, found {}", expected.join(" or "), found);
        }
        SyntaxError::Parse {
            line,
            column,
            expected,
            message,
        }
    }

    fn unsupported(&self, what: &str) -> SyntaxError {
        self.error(&[], format!("{UNSUPPORTED}: {what}"))
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> Result<(), SyntaxError> {
        if self.check(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&[label], ""))
        }
    }

    fn statement(&mut self, program: &mut Program) -> Result<(), SyntaxError> {
        let (line, column) = self.position();
        let span = Span { line, column };
        match self.peek() {
            Some(TokenKind::Show) => {
                self.pos += 1;
                let name = match self.peek() {
                    Some(TokenKind::Ident(n)) => n.clone(),
                    Some(TokenKind::Dot) => {
                        return Err(self.error(
                            &["predicate/arity"],
                            "#show without a predicate signature is not supported",
                        ))
                    }
                    _ => return Err(self.error(&["predicate/arity"], "")),
                };
                self.pos += 1;
                self.expect(TokenKind::Slash, "'/'")?;
                let arity = match self.peek() {
                    Some(TokenKind::Int(n)) if *n >= 0 => *n as usize,
                    _ => return Err(self.error(&["arity"], "")),
                };
                self.pos += 1;
                self.expect(TokenKind::Dot, "'.'")?;
                program.shows.push(Signature::new(name, arity));
                Ok(())
            }
            Some(TokenKind::Directive(name)) => {
                let what = format!("#{name}");
                Err(self.unsupported(&what))
            }
            Some(TokenKind::If) => {
                self.pos += 1;
                let body = self.body()?;
                self.expect(TokenKind::Dot, "'.'")?;
                program.rules.push(Rule { head: None, body, span });
                Ok(())
            }
            Some(TokenKind::LBrace) => Err(self.unsupported("choice rule")),
            Some(TokenKind::Minus) => Err(self.unsupported("classical negation")),
            Some(TokenKind::Ident(_)) => {
                let head = self.atom()?;
                match self.peek() {
                    Some(TokenKind::Pipe) | Some(TokenKind::Semicolon) => {
                        return Err(self.unsupported("disjunctive head"))
                    }
                    _ => {}
                }
                let body = if self.check(&TokenKind::If) {
                    self.pos += 1;
                    self.body()?
                } else {
                    Vec::new()
                };
                self.expect(TokenKind::Dot, "'.'")?;
                program.rules.push(Rule {
                    head: Some(head),
                    body,
                    span,
                });
                Ok(())
            }
            _ => Err(self.error(&["atom", "':-'", "'#show'"], "")),
        }
    }

    fn body(&mut self) -> Result<Vec<BodyElement>, SyntaxError> {
        let mut body = vec![self.literal(true)?];
        while matches!(self.peek(), Some(TokenKind::Comma) | Some(TokenKind::Semicolon)) {
            self.pos += 1;
            body.push(self.literal(true)?);
        }
        Ok(body)
    }

    fn literal(&mut self, allow_aggregate: bool) -> Result<BodyElement, SyntaxError> {
        match self.peek() {
            Some(TokenKind::Not) => {
                self.pos += 1;
                match self.peek() {
                    Some(TokenKind::Ident(_)) => {}
                    Some(TokenKind::Not) => return Err(self.unsupported("double negation")),
                    Some(TokenKind::Minus) => return Err(self.unsupported("classical negation")),
                    _ => return Err(self.error(&["atom"], "")),
                }
                let atom = self.atom()?;
                if matches!(self.peek(), Some(TokenKind::Cmp(_))) {
                    return Err(self.unsupported("negated comparison"));
                }
                Ok(BodyElement::Neg(atom))
            }
            Some(TokenKind::Count) => {
                if !allow_aggregate {
                    return Err(self.unsupported("nested aggregate"));
                }
                let elements = self.aggregate_elements()?;
                let op = match self.peek() {
                    Some(TokenKind::Cmp(op)) => *op,
                    _ => return Err(self.error(&["comparison guard"], "")),
                };
                self.pos += 1;
                let guard = self.term()?;
                self.check_guard(&guard)?;
                Ok(BodyElement::Aggregate(AggregateAtom {
                    guard,
                    relation: op.flip(),
                    elements,
                }))
            }
            Some(TokenKind::Directive(name)) => {
                let what = format!("#{name}");
                Err(self.unsupported(&what))
            }
            Some(TokenKind::Minus) if matches!(self.peek_at(1), Some(TokenKind::Ident(_))) => {
                Err(self.unsupported("classical negation"))
            }
            Some(TokenKind::Ident(_)) if !matches!(self.peek_at(1), Some(TokenKind::Cmp(_))) => {
                let atom = self.atom()?;
                if matches!(self.peek(), Some(TokenKind::Cmp(_))) {
                    return Err(self.error(&["',' or '.'"], "atoms cannot be compared"));
                }
                Ok(BodyElement::Pos(atom))
            }
            _ => {
                let left = self.term()?;
                let op = match self.peek() {
                    Some(TokenKind::Cmp(op)) => *op,
                    _ => return Err(self.error(&["comparison operator"], "")),
                };
                self.pos += 1;
                if let Some(TokenKind::Directive(name)) = self.peek() {
                    let what = format!("#{name}");
                    return Err(self.unsupported(&what));
                }
                if self.check(&TokenKind::Count) {
                    if !allow_aggregate {
                        return Err(self.unsupported("nested aggregate"));
                    }
                    self.check_guard(&left)?;
                    let elements = self.aggregate_elements()?;
                    if matches!(self.peek(), Some(TokenKind::Cmp(_))) {
                        return Err(self.unsupported("aggregate with two guards"));
                    }
                    return Ok(BodyElement::Aggregate(AggregateAtom {
                        guard: left,
                        relation: op,
                        elements,
                    }));
                }
                let right = self.term()?;
                for t in [&left, &right] {
                    if t.contains_interval() {
                        return Err(self.unsupported("interval in comparison"));
                    }
                }
                Ok(BodyElement::Cmp(Comparison { op, left, right }))
            }
        }
    }

    fn check_guard(&self, guard: &Term) -> Result<(), SyntaxError> {
        if guard.contains_interval() {
            return Err(self.unsupported("interval as aggregate guard"));
        }
        Ok(())
    }

    /// Parses `#count{ ... }` starting at the `#count` token.
    fn aggregate_elements(&mut self) -> Result<Vec<AggregateElement>, SyntaxError> {
        self.expect(TokenKind::Count, "'#count'")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut elements = Vec::new();
        if self.check(&TokenKind::RBrace) {
            self.pos += 1;
            return Ok(elements);
        }
        loop {
            let mut tuple = vec![self.term()?];
            while self.check(&TokenKind::Comma) {
                self.pos += 1;
                tuple.push(self.term()?);
            }
            if tuple.iter().any(Term::contains_interval) {
                return Err(self.unsupported("interval in aggregate tuple"));
            }
            let mut condition = Vec::new();
            if self.check(&TokenKind::Colon) {
                self.pos += 1;
                condition.push(self.literal(false)?);
                while self.check(&TokenKind::Comma) {
                    self.pos += 1;
                    condition.push(self.literal(false)?);
                }
            }
            elements.push(AggregateElement { tuple, condition });
            match self.peek() {
                Some(TokenKind::Semicolon) => self.pos += 1,
                Some(TokenKind::RBrace) => {
                    self.pos += 1;
                    return Ok(elements);
                }
                _ => return Err(self.error(&["';'", "'}'"], "")),
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let predicate = match self.peek() {
            Some(TokenKind::Ident(n)) => n.clone(),
            _ => return Err(self.error(&["predicate name"], "")),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.check(&TokenKind::LParen) {
            self.pos += 1;
            args.push(self.term()?);
            while self.check(&TokenKind::Comma) {
                self.pos += 1;
                args.push(self.term()?);
            }
            self.expect(TokenKind::RParen, "')'")?;
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        let lo = self.sum()?;
        if self.check(&TokenKind::DotDot) {
            self.pos += 1;
            let hi = self.sum()?;
            return Ok(Term::interval(lo, hi));
        }
        Ok(lo)
    }

    fn sum(&mut self) -> Result<Term, SyntaxError> {
        let mut left = self.product()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.product()?;
            left = self.arith(op, left, right)?;
        }
    }

    fn product(&mut self) -> Result<Term, SyntaxError> {
        let mut left = self.unary()?;
        while self.check(&TokenKind::Star) {
            self.pos += 1;
            let right = self.unary()?;
            left = self.arith(ArithOp::Mul, left, right)?;
        }
        Ok(left)
    }

    fn arith(&self, op: ArithOp, left: Term, right: Term) -> Result<Term, SyntaxError> {
        if left.contains_interval() || right.contains_interval() {
            return Err(self.unsupported("interval inside arithmetic"));
        }
        Ok(Term::arith(op, left, right))
    }

    fn unary(&mut self) -> Result<Term, SyntaxError> {
        if self.check(&TokenKind::Minus) {
            self.pos += 1;
            return Ok(match self.unary()? {
                Term::Int(n) => Term::Int(
                    n.checked_neg()
                        .ok_or_else(|| self.error(&[], "integer literal out of range"))?,
                ),
                other => Term::arith(ArithOp::Mul, Term::Int(-1), other),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, SyntaxError> {
        let term = match self.peek() {
            Some(TokenKind::Int(n)) => Term::Int(*n),
            Some(TokenKind::Ident(name)) => {
                if matches!(self.peek_at(1), Some(TokenKind::LParen)) {
                    return Err(self.unsupported("function term"));
                }
                Term::Sym(name.clone())
            }
            Some(TokenKind::Variable(name)) if name == "_" => {
                self.anon += 1;
                Term::Var(Variable {
                    name: format!("_#{}", self.anon),
                    anonymous: true,
                })
            }
            Some(TokenKind::Variable(name)) => Term::var(name.clone()),
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.term()?;
                self.expect(TokenKind::RParen, "')'")?;
                return Ok(inner);
            }
            _ => return Err(self.error(&["term"], "")),
        };
        self.pos += 1;
        Ok(term)
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(n) => format!("identifier '{n}'"),
        TokenKind::Variable(n) => format!("variable '{n}'"),
        TokenKind::Int(n) => format!("integer {n}"),
        TokenKind::If => "':-'".into(),
        TokenKind::DotDot => "'..'".into(),
        TokenKind::Dot => "'.'".into(),
        TokenKind::Comma => "','".into(),
        TokenKind::Semicolon => "';'".into(),
        TokenKind::Colon => "':'".into(),
        TokenKind::LParen => "'('".into(),
        TokenKind::RParen => "')'".into(),
        TokenKind::LBrace => "'{'".into(),
        TokenKind::RBrace => "'}'".into(),
        TokenKind::Cmp(op) => format!("'{}'", op.symbol()),
        TokenKind::Not => "'not'".into(),
        TokenKind::Count => "'#count'".into(),
        TokenKind::Show => "'#show'".into(),
        TokenKind::Directive(n) => format!("'#{n}'"),
        TokenKind::Slash => "'/'".into(),
        TokenKind::Plus => "'+'".into(),
        TokenKind::Minus => "'-'".into(),
        TokenKind::Star => "'*'".into(),
        TokenKind::Pipe => "'|'".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::episode;
    use crate::syntax::CmpOp;

    fn fragment_error(text: &str) -> String {
        match parse_program(text).unwrap_err() {
            SyntaxError::Parse { message, .. } => message,
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn smallest_program() {
        let p = parse_program("a.").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert!(p.rules[0].is_fact());
        assert_eq!(p.rules[0].head, Some(Atom::new("a", vec![])));
        assert!(p.shows.is_empty());
    }

    #[test]
    fn environment_statement_census() {
        let p = parse_program(episode::ENV_INFO).unwrap();
        assert_eq!(p.statement_count(), 58);
        assert!(p.shows.is_empty());
        let covered_wp = p
            .rules
            .iter()
            .filter(|r| r.head.as_ref().unwrap().predicate == "covered_wp")
            .count();
        assert_eq!(covered_wp, 20);
    }

    #[test]
    fn query01_shows() {
        let p = parse_program(episode::QUERY_01).unwrap();
        assert_eq!(
            p.shows,
            vec![
                Signature::new("loc", 5),
                Signature::new("covered_by_uatm2", 1),
                Signature::new("covered_by_other", 1)
            ]
        );
        assert_eq!(p.rules.len(), 6);
    }

    #[test]
    fn aggregate_forms() {
        let p = parse_program(episode::QUERY_01).unwrap();
        let BodyElement::Aggregate(agg) = &p.rules[4].body[0] else {
            panic!("expected aggregate");
        };
        assert_eq!(agg.guard, Term::Int(1));
        assert_eq!(agg.relation, CmpOp::Le);
        assert_eq!(agg.elements.len(), 2);

        let p = parse_program(episode::QUERY_03).unwrap();
        let BodyElement::Aggregate(agg) = &p.rules[0].body[0] else {
            panic!("expected aggregate");
        };
        assert_eq!(agg.guard, Term::var("N"));
        assert_eq!(agg.relation, CmpOp::Eq);
        assert_eq!(agg.elements[0].condition.len(), 2);

        // right-hand guards are normalized to the left
        let p = parse_program("c :- #count{X: p(X)} >= 2.").unwrap();
        let BodyElement::Aggregate(agg) = &p.rules[0].body[0] else {
            panic!("expected aggregate");
        };
        assert_eq!((agg.guard.clone(), agg.relation), (Term::Int(2), CmpOp::Le));
    }

    #[test]
    fn anonymous_variables_are_fresh() {
        let p = parse_program("p(X) :- q(X, _, _), not r(X, _).").unwrap();
        let vars = p.rules[0].variables();
        let anon: Vec<_> = vars.iter().filter(|v| v.anonymous).collect();
        assert_eq!(anon.len(), 3);
        let names: std::collections::BTreeSet<_> = anon.iter().map(|v| &v.name).collect();
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn arithmetic_and_intervals() {
        let p = parse_program("s(T+1) :- s(T), step(T+1). n(-3). m(2*X-1) :- n(X). r(1..2, 4..5).").unwrap();
        assert_eq!(
            p.rules[0].head.as_ref().unwrap().args[0],
            Term::arith(ArithOp::Add, Term::var("T"), Term::Int(1))
        );
        assert_eq!(p.rules[1].head.as_ref().unwrap().args[0], Term::Int(-3));
        assert_eq!(
            p.rules[3].head.as_ref().unwrap().args[1],
            Term::interval(Term::Int(4), Term::Int(5))
        );
    }

    #[test]
    fn missing_period() {
        let err = parse_program("a :- b\nc.").unwrap_err();
        match err {
            SyntaxError::Parse {
                line, column, expected, ..
            } => {
                assert_eq!((line, column), (2, 1));
                assert!(expected.iter().any(|e| e.contains('.')));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_program("a").unwrap_err();
        assert!(matches!(err, SyntaxError::Parse { line: 1, column: 2, .. }));
    }

    #[test]
    fn out_of_fragment_constructs() {
        for text in [
            "{a}.",
            "a | b.",
            "a ; b.",
            "-a.",
            "a :- -b.",
            "#minimize{X: p(X)}.",
            "#const n = 3.",
            "c :- 1 <= #sum{X: p(X)}.",
            "c :- 1 <= #count{X: 1 <= #count{Y: p(Y)}}.",
            "p(f(1)).",
        ] {
            let message = fragment_error(text);
            assert!(
                message.contains("feature not in supported fragment"),
                "{text}: {message}"
            );
        }
        let message = fragment_error("#show.");
        assert!(message.contains("#show"), "{message}");
    }

    #[test]
    fn arity_is_part_of_the_key() {
        let p = parse_program("covered_wp(1, 2, 3, 4). covered_wp(1, 2, 3).").unwrap();
        let sigs: Vec<_> = p.rules.iter().map(|r| r.head.as_ref().unwrap().signature()).collect();
        assert_ne!(sigs[0], sigs[1]);
    }

    #[test]
    fn parse_single_atom() {
        let atom = parse_atom("target_change(1,2)").unwrap();
        assert_eq!(atom.predicate, "target_change");
        assert_eq!(atom.args, vec![Term::Int(1), Term::Int(2)]);
        assert!(parse_atom("target_change(1,").is_err());
        assert!(parse_atom("a. b.").is_err());
    }
}
