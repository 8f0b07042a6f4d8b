//! A closed predicate language for executable key/box hypotheses.
//!
//! ```text
//! expr    := "IF" expr "THEN" expr "ELSE" expr | or
//! or      := and { "OR" and }
//! and     := unary { "AND" unary }
//! unary   := "NOT" unary | primary
//! primary := atom | "(" expr ")"
//! atom    := "color_match" | "shape_match" | "number_match" | "number_known"
//!          | "key_has_number" | "key_has_shape"
//!          | "key_color_is" "(" ident ")" | "box_color_is" "(" ident ")"
//!          | "box_position_is" "(" int ")" | "key_number_is" "(" int ")"
//!          | "pair" "(" ident "," ident ")" | "TRUE" | "FALSE"
//! ```
//!
//! Keywords are case-insensitive on input and printed upper-case. `#` starts a
//! comment that runs to the end of the line. The printer emits the minimum
//! parentheses needed for `parse(print(e)) == e`.

use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{BoxDef, KeyDef, Layout, NumberSet};
use crate::hypothesis::{Hypothesis, SoC};

/// What an agent knows about one box when it evaluates a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxView {
    pub id: String,
    pub color: String,
    pub shape: String,
    pub position: u8,
    pub number_belief: NumberSet,
    pub observed: bool,
}

impl BoxView {
    pub fn observed(def: &BoxDef) -> Self {
        BoxView {
            id: def.id.clone(),
            color: def.color.clone(),
            shape: def.shape.clone(),
            position: def.position,
            number_belief: NumberSet::singleton(def.true_number),
            observed: true,
        }
    }

    pub fn unobserved(def: &BoxDef, candidates: NumberSet) -> Self {
        BoxView { number_belief: candidates, observed: false, ..Self::observed(def) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    ColorMatch,
    ShapeMatch,
    NumberMatch,
    NumberKnown,
    KeyHasNumber,
    KeyHasShape,
    KeyColorIs(String),
    BoxColorIs(String),
    BoxPositionIs(u8),
    KeyNumberIs(u8),
    Pair { key: String, box_: String },
    True,
    False,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Atom(Atom),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn atom(a: Atom) -> Self {
        Expr::Atom(a)
    }

    pub fn not(e: Expr) -> Self {
        Expr::Not(Box::new(e))
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Self {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Self {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    /// Left-folded disjunction; `FALSE` when empty.
    pub fn any(items: impl IntoIterator<Item = Expr>) -> Self {
        items.into_iter().reduce(Expr::or).unwrap_or(Expr::Atom(Atom::False))
    }

    pub fn eval(&self, key: &KeyDef, view: &BoxView) -> bool {
        match self {
            Expr::Atom(a) => a.eval(key, view),
            Expr::Not(e) => !e.eval(key, view),
            Expr::And(a, b) => a.eval(key, view) && b.eval(key, view),
            Expr::Or(a, b) => a.eval(key, view) || b.eval(key, view),
            Expr::If(c, t, e) => {
                if c.eval(key, view) {
                    t.eval(key, view)
                } else {
                    e.eval(key, view)
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::If(..) => 0,
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(..) => 3,
            Expr::Atom(_) => 4,
        }
    }

    fn write(&self, out: &mut String, min_prec: u8) {
        let wrap = self.precedence() < min_prec;
        if wrap {
            out.push('(');
        }
        match self {
            Expr::Atom(a) => out.push_str(&a.to_string()),
            Expr::Not(e) => {
                out.push_str("NOT ");
                e.write(out, 3);
            }
            Expr::And(a, b) => {
                a.write(out, 2);
                out.push_str(" AND ");
                b.write(out, 3);
            }
            Expr::Or(a, b) => {
                a.write(out, 1);
                out.push_str(" OR ");
                b.write(out, 2);
            }
            Expr::If(c, t, e) => {
                out.push_str("IF ");
                c.write(out, 0);
                out.push_str(" THEN ");
                t.write(out, 0);
                out.push_str(" ELSE ");
                e.write(out, 0);
            }
        }
        if wrap {
            out.push(')');
        }
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Expr::Atom(a) => f(a),
            Expr::Not(e) => e.visit_atoms(f),
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Expr::If(c, t, e) => {
                c.visit_atoms(f);
                t.visit_atoms(f);
                e.visit_atoms(f);
            }
        }
    }
}

impl Atom {
    pub fn eval(&self, key: &KeyDef, view: &BoxView) -> bool {
        match self {
            Atom::ColorMatch => key.color == view.color,
            Atom::ShapeMatch => key.shape.as_deref() == Some(view.shape.as_str()),
            Atom::NumberMatch => key.number.is_some_and(|n| view.number_belief.contains(n)),
            Atom::NumberKnown => view.observed,
            Atom::KeyHasNumber => key.number.is_some(),
            Atom::KeyHasShape => key.shape.is_some(),
            Atom::KeyColorIs(c) => &key.color == c,
            Atom::BoxColorIs(c) => &view.color == c,
            Atom::BoxPositionIs(p) => view.position == *p,
            Atom::KeyNumberIs(n) => key.number == Some(*n),
            Atom::Pair { key: k, box_: b } => &key.id == k && &view.id == b,
            Atom::True => true,
            Atom::False => false,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::ColorMatch => f.write_str("color_match"),
            Atom::ShapeMatch => f.write_str("shape_match"),
            Atom::NumberMatch => f.write_str("number_match"),
            Atom::NumberKnown => f.write_str("number_known"),
            Atom::KeyHasNumber => f.write_str("key_has_number"),
            Atom::KeyHasShape => f.write_str("key_has_shape"),
            Atom::KeyColorIs(c) => write!(f, "key_color_is({c})"),
            Atom::BoxColorIs(c) => write!(f, "box_color_is({c})"),
            Atom::BoxPositionIs(p) => write!(f, "box_position_is({p})"),
            Atom::KeyNumberIs(n) => write!(f, "key_number_is({n})"),
            Atom::Pair { key, box_ } => write!(f, "pair({key}, {box_})"),
            Atom::True => f.write_str("TRUE"),
            Atom::False => f.write_str("FALSE"),
        }
    }
}

/// A parsed hypothesis program. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RuleProgram {
    root: Expr,
}

impl RuleProgram {
    pub fn new(root: Expr) -> Self {
        RuleProgram { root }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Evaluates the program; total over every key and box view.
    pub fn eval(&self, key: &KeyDef, view: &BoxView) -> bool {
        self.root.eval(key, view)
    }

    /// Canonical text.
    pub fn print(&self) -> String {
        let mut out = String::new();
        self.root.write(&mut out, 0);
        out
    }

    /// Checks that every color, id and number constant exists in `layout`.
    pub fn check_constants(&self, layout: &Layout) -> Result<(), ParseError> {
        let mut err = None;
        self.root.visit_atoms(&mut |a| {
            if err.is_some() {
                return;
            }
            let unknown = match a {
                Atom::KeyColorIs(c) => (!layout.keys.iter().any(|k| &k.color == c)).then(|| c.clone()),
                Atom::BoxColorIs(c) => (!layout.boxes.iter().any(|b| &b.color == c)).then(|| c.clone()),
                Atom::Pair { key, box_ } => {
                    if layout.key_index(key).is_err() {
                        Some(key.clone())
                    } else if layout.box_index(box_).is_err() {
                        Some(box_.clone())
                    } else {
                        None
                    }
                }
                _ => None,
            };
            if let Some(name) = unknown {
                err = Some(ParseError::new(ParseErrorKind::UnknownConstant, format!("`{name}` is not in the layout"), 1, 1));
            }
        });
        err.map_or(Ok(()), Err)
    }
}

impl fmt::Display for RuleProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

impl From<RuleProgram> for String {
    fn from(p: RuleProgram) -> String {
        p.print()
    }
}

impl TryFrom<String> for RuleProgram {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_rule(&s)
    }
}

impl std::str::FromStr for RuleProgram {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rule(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownPredicate,
    UnknownConstant,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at {line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    fn new(kind: ParseErrorKind, message: String, line: usize, column: usize) -> Self {
        ParseError { kind, message, line, column }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Int(u64),
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                bump(&mut chars);
            }
        } else if c == '(' || c == ')' || c == ',' {
            bump(&mut chars);
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => Tok::Comma,
            };
            tokens.push(Token { tok, line: tl, column: tc });
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while chars.peek().is_some_and(|c| c.is_ascii_digit()) {
                s.push(bump(&mut chars));
            }
            let n = s.parse::<u64>().map_err(|_| {
                ParseError::new(ParseErrorKind::UnknownConstant, format!("integer `{s}` is too large"), tl, tc)
            })?;
            tokens.push(Token { tok: Tok::Int(n), line: tl, column: tc });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while chars.peek().is_some_and(|&c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                s.push(bump(&mut chars));
            }
            tokens.push(Token { tok: Tok::Word(s), line: tl, column: tc });
        } else {
            return Err(ParseError::new(ParseErrorKind::Syntax, format!("unexpected character `{c}`"), tl, tc));
        }
    }
    tokens.push(Token { tok: Tok::Eof, line, column });
    Ok(tokens)
}

const KEYWORDS: [&str; 8] = ["if", "then", "else", "and", "or", "not", "true", "false"];

fn is_keyword(word: &str, kw: &str) -> bool {
    word.eq_ignore_ascii_case(kw)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if is_keyword(w, kw))
    }

    fn syntax<T>(&self, tok: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::new(ParseErrorKind::Syntax, msg.into(), tok.line, tok.column))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.next();
            Ok(())
        } else {
            let t = self.peek().clone();
            self.syntax(&t, format!("expected `{}`, found {}", kw.to_uppercase(), Self::describe(&t.tok)))
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            self.syntax(&t, format!("expected {}, found {}", Self::describe(&want), Self::describe(&t.tok)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.at_keyword("if") {
            self.next();
            let c = self.expr()?;
            self.expect_keyword("then")?;
            let t = self.expr()?;
            self.expect_keyword("else")?;
            let e = self.expr()?;
            return Ok(Expr::if_(c, t, e));
        }
        self.or()
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.at_keyword("or") {
            self.next();
            lhs = Expr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.at_keyword("and") {
            self.next();
            lhs = Expr::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.at_keyword("not") {
            self.next();
            return Ok(Expr::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Word(w) => self.atom(w, &t).map(Expr::Atom),
            other => self.syntax(&t, format!("expected a predicate, found {}", Self::describe(other))),
        }
    }

    fn ident_arg(&mut self) -> Result<String, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) => Ok(w.clone()),
            Tok::Int(n) => Err(ParseError::new(
                ParseErrorKind::UnknownConstant,
                format!("expected a name, found the number {n}"),
                t.line,
                t.column,
            )),
            _ => self.syntax(&t, format!("expected a name, found {}", Self::describe(&t.tok))),
        }
    }

    fn int_arg(&mut self) -> Result<u8, ParseError> {
        let t = self.next();
        match &t.tok {
            &Tok::Int(n) if (1..=u8::MAX as u64).contains(&n) => Ok(n as u8),
            Tok::Int(n) => Err(ParseError::new(
                ParseErrorKind::UnknownConstant,
                format!("number {n} is out of range 1..=255"),
                t.line,
                t.column,
            )),
            Tok::Word(w) => Err(ParseError::new(
                ParseErrorKind::UnknownConstant,
                format!("expected a number, found `{w}`"),
                t.line,
                t.column,
            )),
            _ => self.syntax(&t, format!("expected a number, found {}", Self::describe(&t.tok))),
        }
    }

    fn atom(&mut self, word: &str, at: &Token) -> Result<Atom, ParseError> {
        if let Some(kw) = KEYWORDS.iter().find(|kw| is_keyword(word, kw)) {
            return match *kw {
                "true" => Ok(Atom::True),
                "false" => Ok(Atom::False),
                _ => self.syntax(at, format!("expected a predicate, found `{}`", word)),
            };
        }
        let simple = match word {
            "color_match" => Some(Atom::ColorMatch),
            "shape_match" => Some(Atom::ShapeMatch),
            "number_match" => Some(Atom::NumberMatch),
            "number_known" => Some(Atom::NumberKnown),
            "key_has_number" => Some(Atom::KeyHasNumber),
            "key_has_shape" => Some(Atom::KeyHasShape),
            _ => None,
        };
        if let Some(a) = simple {
            return Ok(a);
        }
        let atom = match word {
            "key_color_is" | "box_color_is" | "box_position_is" | "key_number_is" | "pair" => {
                self.expect(Tok::LParen)?;
                let a = match word {
                    "key_color_is" => Atom::KeyColorIs(self.ident_arg()?),
                    "box_color_is" => Atom::BoxColorIs(self.ident_arg()?),
                    "box_position_is" => Atom::BoxPositionIs(self.int_arg()?),
                    "key_number_is" => Atom::KeyNumberIs(self.int_arg()?),
                    _ => {
                        let key = self.ident_arg()?;
                        self.expect(Tok::Comma)?;
                        Atom::Pair { key, box_: self.ident_arg()? }
                    }
                };
                self.expect(Tok::RParen)?;
                a
            }
            _ => {
                return Err(ParseError::new(
                    ParseErrorKind::UnknownPredicate,
                    format!("unknown predicate `{word}`"),
                    at.line,
                    at.column,
                ))
            }
        };
        Ok(atom)
    }
}

/// Parses rule text into a program.
pub fn parse_rule(text: &str) -> Result<RuleProgram, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek().tok == Tok::Eof {
        let t = p.peek().clone();
        return p.syntax(&t, "empty rule");
    }
    let root = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return p.syntax(&t, format!("unexpected {} after complete rule", Parser::describe(&t.tok)));
    }
    Ok(RuleProgram { root })
}

/// Maps each box to the keys the program predicts will open it.
pub fn rule_to_soc(program: &RuleProgram, boxes: &[BoxView], keys: &[KeyDef]) -> SoC {
    SoC::from_fn(boxes.len(), keys.len(), |b, k| program.eval(&keys[k.0], &boxes[b.0]))
}

/// Picks a key for a novel box: one the hypothesis predicts will open it,
/// uniformly among ties, or uniformly among all candidates when none is
/// predicted to work.
pub fn generalization_choice<'a, R: Rng + ?Sized>(
    h: &Hypothesis,
    layout: &Layout,
    novel_box: &BoxView,
    candidates: &'a [KeyDef],
    rng: &mut R,
) -> &'a KeyDef {
    let predicted: Vec<&KeyDef> = candidates.iter().filter(|k| h.predicts_novel(layout, k, novel_box)).collect();
    if predicted.is_empty() {
        candidates.choose(rng).expect("at least one candidate")
    } else {
        predicted.choose(rng).expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::standard_generalization_trials;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(s: &str) -> RuleProgram {
        parse_rule(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    fn key(l: &Layout, id: &str) -> KeyDef {
        l.key(l.key_index(id).unwrap()).clone()
    }

    fn view(l: &Layout, id: &str, observed: bool) -> BoxView {
        let def = l.boxdef(l.box_index(id).unwrap());
        if observed {
            BoxView::observed(def)
        } else {
            BoxView::unobserved(def, NumberSet::full(5))
        }
    }

    #[test]
    fn parses_atoms_and_conditionals() {
        assert_eq!(parse("color_match").root(), &Expr::Atom(Atom::ColorMatch));
        let p = parse("IF box_position_is(1) THEN color_match ELSE shape_match");
        assert_eq!(
            p.root(),
            &Expr::if_(
                Expr::Atom(Atom::BoxPositionIs(1)),
                Expr::Atom(Atom::ColorMatch),
                Expr::Atom(Atom::ShapeMatch)
            )
        );
        let p = parse("pair(red1, red) or not number_known and TRUE");
        assert_eq!(p.print(), "pair(red1, red) OR NOT number_known AND TRUE");
    }

    #[test]
    fn comments_and_keyword_case() {
        let p = parse("color_match # taught rule\n or number_match");
        assert_eq!(p.print(), "color_match OR number_match");
        assert_eq!(parse("if true then false else true").print(), "IF TRUE THEN FALSE ELSE TRUE");
    }

    #[test]
    fn syntax_errors_report_position() {
        let e = parse_rule("number_match AND").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!((e.line, e.column), (1, 17));
        let e = parse_rule("color_match\n  OR )").unwrap_err();
        assert_eq!((e.kind, e.line, e.column), (ParseErrorKind::Syntax, 2, 6));
        assert_eq!(parse_rule("").unwrap_err().kind, ParseErrorKind::Syntax);
        assert_eq!(parse_rule("color_match shape_match").unwrap_err().kind, ParseErrorKind::Syntax);
        assert_eq!(parse_rule("color_match $").unwrap_err().kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn unknown_predicates_and_constants() {
        assert_eq!(parse_rule("size_match").unwrap_err().kind, ParseErrorKind::UnknownPredicate);
        assert_eq!(parse_rule("box_position_is(red)").unwrap_err().kind, ParseErrorKind::UnknownConstant);
        assert_eq!(parse_rule("key_number_is(0)").unwrap_err().kind, ParseErrorKind::UnknownConstant);
        assert_eq!(parse_rule("key_color_is(3)").unwrap_err().kind, ParseErrorKind::UnknownConstant);
        let l = Layout::standard();
        assert!(parse("key_color_is(grey) AND pair(red1, red)").check_constants(&l).is_ok());
        assert_eq!(parse("box_color_is(magenta)").check_constants(&l).unwrap_err().kind, ParseErrorKind::UnknownConstant);
        assert_eq!(parse("pair(red9, red)").check_constants(&l).unwrap_err().kind, ParseErrorKind::UnknownConstant);
    }

    #[test]
    fn printer_parenthesizes_minimally() {
        let a = || Expr::Atom(Atom::ColorMatch);
        let b = || Expr::Atom(Atom::ShapeMatch);
        let c = || Expr::Atom(Atom::NumberMatch);
        let cases = [
            (Expr::and(a(), Expr::and(b(), c())), "color_match AND (shape_match AND number_match)"),
            (Expr::and(Expr::and(a(), b()), c()), "color_match AND shape_match AND number_match"),
            (Expr::and(Expr::or(a(), b()), c()), "(color_match OR shape_match) AND number_match"),
            (Expr::not(Expr::or(a(), b())), "NOT (color_match OR shape_match)"),
            (Expr::or(Expr::if_(a(), b(), c()), a()), "(IF color_match THEN shape_match ELSE number_match) OR color_match"),
            (Expr::if_(a(), Expr::if_(b(), c(), a()), Expr::or(b(), c())),
             "IF color_match THEN IF shape_match THEN number_match ELSE color_match ELSE shape_match OR number_match"),
        ];
        for (e, text) in cases {
            let p = RuleProgram::new(e.clone());
            assert_eq!(p.print(), text);
            assert_eq!(parse(text).root(), &e);
        }
    }

    #[test]
    fn evaluation_semantics() {
        let l = Layout::standard();
        assert!(parse("color_match").eval(&key(&l, "red1"), &view(&l, "red", false)));
        let nm = parse("number_match");
        assert!(nm.eval(&key(&l, "grey2"), &view(&l, "pink", true)));
        assert!(nm.eval(&key(&l, "grey2"), &view(&l, "pink", false)));
        assert!(!nm.eval(&key(&l, "white7"), &view(&l, "pink", false)));
        assert!(!nm.eval(&key(&l, "greycloud"), &view(&l, "pink", false)));
        let cautious = parse("number_known AND number_match");
        assert!(!cautious.eval(&key(&l, "grey2"), &view(&l, "pink", false)));
        assert!(parse("shape_match").eval(&key(&l, "greycloud"), &view(&l, "pink", false)));
        assert!(parse("pair(grey2, pink)").eval(&key(&l, "grey2"), &view(&l, "pink", false)));
        assert!(!parse("pair(grey2, pink)").eval(&key(&l, "grey2"), &view(&l, "red", false)));
    }

    #[test]
    fn rule_to_soc_color_and_false() {
        let l = Layout::standard();
        let soc = rule_to_soc(&parse("color_match"), &l.unobserved_views(), &l.keys);
        let expected = [("red", "red1"), ("pink", "pink6"), ("white", "white7"), ("purple", "purplearrow"), ("blue", "bluestar")];
        for (b, k) in expected {
            let keys = soc.keys_for(l.box_index(b).unwrap());
            assert_eq!(keys, vec![l.key_index(k).unwrap()]);
        }
        let none = rule_to_soc(&parse("FALSE"), &l.unobserved_views(), &l.keys);
        assert!(l.box_indices().all(|b| none.keys_for(b).is_empty()));
    }

    #[test]
    fn generalization_prefers_predicted_key() {
        let l = Layout::standard();
        let trial = &standard_generalization_trials()[0];
        let novel = BoxView::observed(&trial.novel_box);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let number = Hypothesis::Program(parse("number_match"));
        assert_eq!(generalization_choice(&number, &l, &novel, &trial.candidates, &mut rng).id, "blue4");
        let color = Hypothesis::Program(parse("color_match"));
        assert_eq!(generalization_choice(&color, &l, &novel, &trial.candidates, &mut rng).id, "greenmoon");
    }
}
