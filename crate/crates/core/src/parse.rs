//! Lexer and recursive-descent parser for the textual constraint syntax
//! and the model-file format.
//!
//! Terms: `+ - * / ^`, numbers, identifiers, `exp log sin cos tan sqrt
//! abs min max pow`. Formulas: comparisons `< <= > >= =`, `and`/`or`
//! (also `&&`/`||`), `not`, `true`/`false`, and bounded quantifiers
//! `exists x in [a, b] . φ` / `forall x in [a, b] . φ`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::formula::{BinOp, Comparison, Constant, Formula, Func, Quantified, Term};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(f64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "->", "<=", ">=", "&&", "||", "==", "+", "-", "*", "/", "^", "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "=",
    "<", ">", "!",
];

pub(crate) fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        let starts_number = c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[start..j].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(pos, format!("malformed number `{text}`")))?;
            out.push((Tok::Num(value), pos));
            advance(&mut i, &mut line, &mut col, j - start, &chars);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            while j < chars.len() && chars[j] == '\'' {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            out.push((Tok::Ident(text), pos));
            advance(&mut i, &mut line, &mut col, j - start, &chars);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push((Tok::Sym(s), pos));
                advance(&mut i, &mut line, &mut col, s.len(), &chars);
            }
            None => return Err(ParseError::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// Name resolution for identifiers inside expressions.
pub(crate) struct Scope<'a> {
    pub constants: &'a BTreeMap<String, Constant>,
    /// Whether a free identifier is an acceptable variable; `None` accepts any.
    pub is_var: Option<&'a dyn Fn(&str) -> bool>,
    pub bound: Vec<String>,
}

pub(crate) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: lex(src)?, at: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub(crate) fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub(crate) fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::new(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    pub(crate) fn term(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        let mut lhs = self.product(scope)?;
        loop {
            if self.eat_sym("+") {
                lhs = Term::binary(BinOp::Add, lhs, self.product(scope)?);
            } else if self.eat_sym("-") {
                lhs = Term::binary(BinOp::Sub, lhs, self.product(scope)?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        let mut lhs = self.unary(scope)?;
        loop {
            if self.eat_sym("*") {
                lhs = Term::binary(BinOp::Mul, lhs, self.unary(scope)?);
            } else if self.eat_sym("/") {
                lhs = Term::binary(BinOp::Div, lhs, self.unary(scope)?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        if self.eat_sym("-") {
            let inner = self.unary(scope)?;
            return Ok(match inner {
                Term::Const(c) => Term::Const(c.neg()),
                t => Term::Neg(Box::new(t)),
            });
        }
        if self.eat_sym("+") {
            return self.unary(scope);
        }
        self.power(scope)
    }

    fn power(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        let base = self.primary(scope)?;
        if self.is_sym("^") {
            self.bump();
            let n = self.int_exponent()?;
            return Ok(Term::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn int_exponent(&mut self) -> Result<i32, ParseError> {
        let pos = self.pos();
        let parens = self.eat_sym("(");
        let neg = self.eat_sym("-");
        let v = match self.bump() {
            Tok::Num(v) => v,
            _ => return Err(ParseError::new(pos, "exponent must be an integer literal")),
        };
        if parens {
            self.expect_sym(")")?;
        }
        if v.fract() != 0.0 || v.abs() > 64.0 {
            return Err(ParseError::new(pos, "exponent must be an integer between -64 and 64"));
        }
        Ok(if neg { -(v as i32) } else { v as i32 })
    }

    fn primary(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Term::Const(Constant::decimal(v)))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term(scope)?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.is_sym("(") {
                    return self.call(&name, pos, scope);
                }
                if scope.bound.contains(&name) {
                    return Ok(Term::Var(name));
                }
                if let Some(c) = scope.constants.get(&name) {
                    return Ok(Term::Const(*c));
                }
                match scope.is_var {
                    Some(ok) if !ok(&name) => Err(ParseError::new(pos, format!("unknown variable `{name}`"))),
                    _ => Ok(Term::Var(name)),
                }
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn call(&mut self, name: &str, pos: Pos, scope: &mut Scope) -> Result<Term, ParseError> {
        self.expect_sym("(")?;
        let t = match name {
            "min" | "max" => {
                let a = self.term(scope)?;
                self.expect_sym(",")?;
                let b = self.term(scope)?;
                let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                Term::binary(op, a, b)
            }
            "pow" => {
                let a = self.term(scope)?;
                self.expect_sym(",")?;
                let n = self.int_exponent()?;
                Term::Pow(Box::new(a), n)
            }
            _ => match Func::from_name(name) {
                Some(f) => Term::Call(f, Box::new(self.term(scope)?)),
                None => return Err(ParseError::new(pos, format!("unknown function `{name}`"))),
            },
        };
        self.expect_sym(")")?;
        Ok(t)
    }

    pub(crate) fn formula(&mut self, scope: &mut Scope) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conjunction(scope)?];
        while self.is_kw("or") || self.is_sym("||") {
            self.bump();
            parts.push(self.conjunction(scope)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self, scope: &mut Scope) -> Result<Formula, ParseError> {
        let mut parts = vec![self.literal(scope)?];
        while self.is_kw("and") || self.is_sym("&&") {
            self.bump();
            parts.push(self.literal(scope)?);
        }
        Ok(Formula::and(parts))
    }

    fn literal(&mut self, scope: &mut Scope) -> Result<Formula, ParseError> {
        if self.is_kw("not") || self.is_sym("!") {
            self.bump();
            return Ok(self.literal(scope)?.negate());
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Formula::False);
        }
        if self.is_kw("exists") || self.is_kw("forall") {
            return self.quantifier(scope);
        }
        if self.is_sym("(") {
            // either a parenthesized formula or a comparison starting with a
            // parenthesized term: try the comparison first
            let save = self.at;
            match self.comparison(scope) {
                Ok(f) => return Ok(f),
                Err(first) => {
                    self.at = save;
                    self.bump();
                    let inner = match self.formula(scope) {
                        Ok(f) => f,
                        Err(_) => return Err(first),
                    };
                    if !self.eat_sym(")") {
                        return Err(first);
                    }
                    return Ok(inner);
                }
            }
        }
        self.comparison(scope)
    }

    fn comparison(&mut self, scope: &mut Scope) -> Result<Formula, ParseError> {
        let lhs = self.term(scope)?;
        let op = match self.peek() {
            Tok::Sym("<") => Comparison::Lt,
            Tok::Sym("<=") => Comparison::Le,
            Tok::Sym(">") => Comparison::Gt,
            Tok::Sym(">=") => Comparison::Ge,
            Tok::Sym("=") | Tok::Sym("==") => Comparison::Eq,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.bump();
        let rhs = self.term(scope)?;
        Ok(Formula::compare(lhs, op, rhs))
    }

    fn quantifier(&mut self, scope: &mut Scope) -> Result<Formula, ParseError> {
        let exists = self.is_kw("exists");
        self.bump();
        let (var, _) = self.expect_ident()?;
        self.expect_kw("in")?;
        self.expect_sym("[")?;
        let lo = self.term(scope)?;
        self.expect_sym(",")?;
        let hi = self.term(scope)?;
        self.expect_sym("]")?;
        if !self.eat_sym(".") {
            self.expect_sym(":")?;
        }
        scope.bound.push(var.clone());
        let body = self.formula(scope);
        scope.bound.pop();
        let q = Quantified {
            var,
            lo,
            hi,
            body: Box::new(body?),
        };
        Ok(if exists { Formula::Exists(q) } else { Formula::Forall(q) })
    }
}

/// Parse a standalone formula. Any identifier that is not a function
/// name is taken as a variable.
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let constants = BTreeMap::new();
    let mut scope = Scope {
        constants: &constants,
        is_var: None,
        bound: Vec::new(),
    };
    let mut p = Parser::new(src)?;
    let f = p.formula(&mut scope)?;
    if !p.at_eof() {
        return Err(p.unexpected("end of formula"));
    }
    Ok(f)
}

/// Parse a standalone term.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let constants = BTreeMap::new();
    let mut scope = Scope {
        constants: &constants,
        is_var: None,
        bound: Vec::new(),
    };
    let mut p = Parser::new(src)?;
    let t = p.term(&mut scope)?;
    if !p.at_eof() {
        return Err(p.unexpected("end of term"));
    }
    Ok(t)
}

/// Evaluate a variable-free term to a constant with a rigorous enclosure.
pub(crate) fn fold_constant(t: &Term, pos: Pos) -> Result<Constant, ParseError> {
    let value = t
        .eval_f64(&|_| None)
        .map_err(|e| ParseError::new(pos, format!("constant expression: {e}")))?;
    let mut violation = false;
    let enclosure = t
        .eval_iv(&|_| None, &mut violation)
        .map_err(|e| ParseError::new(pos, format!("constant expression: {e}")))?;
    if !value.is_finite() || violation || enclosure.is_empty() {
        return Err(ParseError::new(pos, "constant expression is not a finite real"));
    }
    Ok(Constant { value, enclosure })
}
