//! Input documents: generator declarations followed by data statements,
//! each terminated by `;`.
//!
//! ```text
//! gen g free;
//! gen t affine linear=1 const=1;
//! gen a1 affine linear=g const=g home 1;
//! system 2;
//! torsor a1 + 1;
//! ```
//!
//! Expressions use integers, `+ - * / ^`, parentheses, generator names,
//! `s(expr, k)` for σ^k, `name[k]` for a shifted generator and `wp(expr)`
//! for σ(x) − x.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use sigma_core::rat::fmt_rat;
use sigma_core::{CircleValue, Element, GenKind, Presentation, RatFunc, Rat};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown generator `{name}`")]
    UnknownGenerator { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Document(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    /// `σ(x) − x = a`.
    Torsor(Element),
    /// `σ(x) − e1·x = e2`.
    Twisted(Element, Element),
    /// `σ(x) = e^z·x`.
    Mult(Element, i64),
    Summand(Element),
    Entry(Element, CircleValue),
    /// `None` asks for a free valuation.
    Query(Element, Option<CircleValue>),
    Element(Element),
    Height(u32),
    Subfield(Vec<String>),
    Angles(Vec<CircleValue>),
    Target(Element),
    Btilde(Element),
    /// Block indices are stored 0-based.
    Part(usize, Element),
    Rewrite(usize, Element),
    Witness(usize, Element),
    Shift(Element),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub presentation: Presentation,
    /// 0-based home blocks of generators declared with `home`.
    pub homes: BTreeMap<u32, BTreeSet<usize>>,
    pub system: Option<usize>,
    pub statements: Vec<Statement>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Int(s.parse().expect("digits")), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
            continue;
        }
        if "+-*/^()[],;=".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line: l0, col: c0 });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ParseError::Syntax { line: l0, col: c0, msg: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

const RESERVED: [&str; 2] = ["s", "wp"];

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    p: &'a Presentation,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn semantic<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Semantic { line: t.line, col: t.col, msg: msg.into() })
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == Tok::Sym(c) {
            Ok(t)
        } else {
            self.syntax(&t, format!("expected `{c}`, found {}", describe(&t.tok)))
        }
    }

    fn ident(&mut self) -> Result<(String, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => self.syntax(&t, format!("expected a name, found {}", describe(other))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (s, t) = self.ident()?;
        if s == kw {
            Ok(())
        } else {
            self.syntax(&t, format!("expected `{kw}`, found `{s}`"))
        }
    }

    fn signed_int(&mut self) -> Result<(BigInt, Token), ParseError> {
        let neg = self.is_sym('-');
        if neg {
            self.next();
        }
        let t = self.next();
        match &t.tok {
            Tok::Int(n) => Ok((if neg { -n.clone() } else { n.clone() }, t.clone())),
            other => self.syntax(&t, format!("expected an integer, found {}", describe(other))),
        }
    }

    fn small_int(&mut self) -> Result<i64, ParseError> {
        let (n, t) = self.signed_int()?;
        i64::try_from(&n).or_else(|_| self.semantic(&t, "integer out of range"))
    }

    /// `p` or `p/q`, possibly negative.
    fn rational(&mut self) -> Result<Rat, ParseError> {
        let (n, _) = self.signed_int()?;
        if self.is_sym('/') {
            self.next();
            let (d, t) = self.signed_int()?;
            if d == BigInt::from(0) {
                return self.semantic(&t, "zero denominator");
            }
            return Ok(Rat::new(n, d));
        }
        Ok(Rat::from_integer(n))
    }

    fn index(&mut self) -> Result<usize, ParseError> {
        let (n, t) = self.signed_int()?;
        match usize::try_from(&n) {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => self.semantic(&t, "block indices start at 1"),
        }
    }

    fn expr(&mut self) -> Result<Element, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.is_sym('+') {
                self.next();
                acc = acc.add(&self.term()?);
            } else if self.is_sym('-') {
                self.next();
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Element, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.is_sym('*') {
                self.next();
                acc = acc.mul(&self.unary()?);
            } else if self.is_sym('/') {
                let op = self.next();
                let d = self.unary()?;
                acc = match acc.div(&d) {
                    Ok(x) => x,
                    Err(_) => return self.semantic(&op, "division by zero"),
                };
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Element, ParseError> {
        if self.is_sym('-') {
            self.next();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Element, ParseError> {
        let base = self.atom()?;
        if !self.is_sym('^') {
            return Ok(base);
        }
        let op = self.next();
        let e = if self.is_sym('(') {
            self.next();
            let e = self.small_int()?;
            self.expect_sym(')')?;
            e
        } else {
            self.small_int()?
        };
        match base.pow(e) {
            Ok(x) => Ok(x),
            Err(_) => self.semantic(&op, "negative power of zero"),
        }
    }

    fn atom(&mut self) -> Result<Element, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Int(n) => Ok(RatFunc::constant(Rat::from_integer(n.clone()))),
            Tok::Sym('(') => {
                let x = self.expr()?;
                self.expect_sym(')')?;
                Ok(x)
            }
            Tok::Ident(name) if (name == "s" || name == "wp") && self.is_sym('(') => {
                self.next();
                let x = self.expr()?;
                let out = if name == "s" {
                    self.expect_sym(',')?;
                    let k = self.small_int()?;
                    self.p.sigma(&x, k)
                } else {
                    self.p.wp(&x)
                };
                self.expect_sym(')')?;
                Ok(out)
            }
            Tok::Ident(name) => {
                let Some(x) = self.p.var(name) else {
                    return Err(ParseError::UnknownGenerator { line: t.line, col: t.col, name: name.clone() });
                };
                if self.is_sym('[') {
                    self.next();
                    let k = self.small_int()?;
                    self.expect_sym(']')?;
                    return Ok(self.p.sigma(&x, k));
                }
                Ok(x)
            }
            other => self.syntax(&t, format!("expected an expression, found {}", describe(other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a single expression over `p`.
pub fn parse_expr(p: &Presentation, text: &str) -> Result<Element, ParseError> {
    let toks = lex(text)?;
    let mut ps = Parser { toks: &toks, pos: 0, p };
    let x = ps.expr()?;
    let t = ps.peek().clone();
    if t.tok != Tok::Eof {
        return ps.syntax(&t, format!("unexpected {}", describe(&t.tok)));
    }
    Ok(x)
}

pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    let toks = lex(text)?;
    let mut doc = Document::default();
    let mut pos = 0;
    loop {
        let p = doc.presentation.clone();
        let mut ps = Parser { toks: &toks, pos, p: &p };
        let head = ps.peek().clone();
        if head.tok == Tok::Eof {
            break;
        }
        let (kw, _) = ps.ident()?;
        match kw.as_str() {
            "gen" => gen_statement(&mut ps, &mut doc, &head)?,
            "system" => {
                let n = ps.index()? + 1;
                doc.system = Some(n);
            }
            _ => {
                let st = data_statement(&mut ps, &kw, &head)?;
                doc.statements.push(st);
            }
        }
        ps.expect_sym(';')?;
        pos = ps.pos;
    }
    if let Some(n) = doc.system {
        for (id, home) in &doc.homes {
            if let Some(&i) = home.iter().find(|&&i| i >= n) {
                let name = &doc.presentation.gen(*id).expect("declared").name;
                return Err(ParseError::Document(format!(
                    "generator `{name}` has home {} outside system {n}",
                    i + 1
                )));
            }
        }
    } else if !doc.homes.is_empty() {
        return Err(ParseError::Document("`home` used without `system`".into()));
    }
    Ok(doc)
}

fn gen_statement(ps: &mut Parser, doc: &mut Document, head: &Token) -> Result<(), ParseError> {
    let (name, nt) = ps.ident()?;
    if RESERVED.contains(&name.as_str()) {
        return ps.semantic(&nt, format!("`{name}` is reserved"));
    }
    let (kind, kt) = ps.ident()?;
    let gk = match kind.as_str() {
        "free" => GenKind::Free,
        "affine" => {
            ps.keyword("linear")?;
            ps.expect_sym('=')?;
            let linear = ps.expr()?;
            ps.keyword("const")?;
            ps.expect_sym('=')?;
            let constant = ps.expr()?;
            GenKind::Affine { linear, constant }
        }
        other => return ps.syntax(&kt, format!("expected `free` or `affine`, found `{other}`")),
    };
    let mut home = BTreeSet::new();
    if matches!(&ps.peek().tok, Tok::Ident(s) if s == "home") {
        ps.next();
        home.insert(ps.index()?);
        while ps.is_sym(',') {
            ps.next();
            home.insert(ps.index()?);
        }
    }
    let added = match gk {
        GenKind::Free => doc.presentation.add_free(&name),
        GenKind::Affine { linear, constant } => doc.presentation.add_affine(&name, linear, constant),
    };
    let id = added.or_else(|e| ps.semantic(head, format!("generator `{name}`: {e}")))?;
    if !home.is_empty() {
        doc.homes.insert(id, home);
    }
    Ok(())
}

fn data_statement(ps: &mut Parser, kw: &str, head: &Token) -> Result<Statement, ParseError> {
    Ok(match kw {
        "torsor" => Statement::Torsor(ps.expr()?),
        "twisted" => {
            let e1 = ps.expr()?;
            ps.expect_sym(',')?;
            Statement::Twisted(e1, ps.expr()?)
        }
        "mult" => {
            let e = ps.expr()?;
            ps.expect_sym(',')?;
            Statement::Mult(e, ps.small_int()?)
        }
        "summand" => Statement::Summand(ps.expr()?),
        "entry" => {
            let x = ps.expr()?;
            ps.expect_sym('=')?;
            Statement::Entry(x, CircleValue::new(ps.rational()?))
        }
        "query" => {
            let x = ps.expr()?;
            if ps.is_sym('=') {
                ps.next();
                Statement::Query(x, Some(CircleValue::new(ps.rational()?)))
            } else {
                Statement::Query(x, None)
            }
        }
        "element" => Statement::Element(ps.expr()?),
        "height" => {
            let (n, t) = ps.signed_int()?;
            match u32::try_from(&n) {
                Ok(h) if h >= 1 => Statement::Height(h),
                _ => return ps.semantic(&t, "height must be a positive integer"),
            }
        }
        "subfield" => {
            let mut names = Vec::new();
            while !ps.is_sym(';') {
                if !names.is_empty() {
                    ps.expect_sym(',')?;
                }
                let (n, t) = ps.ident()?;
                if ps.p.id_of(&n).is_none() {
                    return Err(ParseError::UnknownGenerator { line: t.line, col: t.col, name: n });
                }
                names.push(n);
            }
            Statement::Subfield(names)
        }
        "r" => {
            let mut v = vec![CircleValue::new(ps.rational()?)];
            while ps.is_sym(',') {
                ps.next();
                v.push(CircleValue::new(ps.rational()?));
            }
            Statement::Angles(v)
        }
        "target" => Statement::Target(ps.expr()?),
        "btilde" => Statement::Btilde(ps.expr()?),
        "part" | "rewrite" | "witness" => {
            let i = ps.index()?;
            let x = ps.expr()?;
            match kw {
                "part" => Statement::Part(i, x),
                "rewrite" => Statement::Rewrite(i, x),
                _ => Statement::Witness(i, x),
            }
        }
        "shift" => Statement::Shift(ps.expr()?),
        other => return ps.syntax(head, format!("unknown statement `{other}`")),
    })
}

/// Prints a document in the input grammar; parsing the output gives back an
/// equal document.
pub fn print_document(doc: &Document) -> String {
    let p = &doc.presentation;
    let f = |x: &Element| p.fmt(x);
    let a = |v: &CircleValue| fmt_rat(v.angle());
    let mut out = String::new();
    for g in p.generators() {
        match &g.kind {
            GenKind::Free => write!(out, "gen {} free", g.name),
            GenKind::Affine { linear, constant } => {
                write!(out, "gen {} affine linear={} const={}", g.name, f(linear), f(constant))
            }
        }
        .expect("write to string");
        if let Some(home) = doc.homes.get(&g.id) {
            let list: Vec<String> = home.iter().map(|i| (i + 1).to_string()).collect();
            write!(out, " home {}", list.join(",")).expect("write to string");
        }
        out.push_str(";\n");
    }
    if let Some(n) = doc.system {
        writeln!(out, "system {n};").expect("write to string");
    }
    for st in &doc.statements {
        let line = match st {
            Statement::Torsor(x) => format!("torsor {}", f(x)),
            Statement::Twisted(e1, e2) => format!("twisted {}, {}", f(e1), f(e2)),
            Statement::Mult(e, z) => format!("mult {}, {z}", f(e)),
            Statement::Summand(x) => format!("summand {}", f(x)),
            Statement::Entry(x, v) => format!("entry {} = {}", f(x), a(v)),
            Statement::Query(x, Some(v)) => format!("query {} = {}", f(x), a(v)),
            Statement::Query(x, None) => format!("query {}", f(x)),
            Statement::Element(x) => format!("element {}", f(x)),
            Statement::Height(h) => format!("height {h}"),
            Statement::Subfield(names) => format!("subfield {}", names.join(", ")).trim_end().to_string(),
            Statement::Angles(v) => format!("r {}", v.iter().map(a).collect::<Vec<_>>().join(", ")),
            Statement::Target(x) => format!("target {}", f(x)),
            Statement::Btilde(x) => format!("btilde {}", f(x)),
            Statement::Part(i, x) => format!("part {} {}", i + 1, f(x)),
            Statement::Rewrite(i, x) => format!("rewrite {} {}", i + 1, f(x)),
            Statement::Witness(i, x) => format!("witness {} {}", i + 1, f(x)),
            Statement::Shift(x) => format!("shift {}", f(x)),
        };
        out.push_str(&line);
        out.push_str(";\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = "gen g free; gen a1 affine linear=g const=g;";

    #[test]
    fn two_generators() {
        let d = parse_document(PAIR).unwrap();
        assert_eq!(d.presentation.generators().len(), 2);
        let x = parse_expr(&d.presentation, "s(a1,1) - g*a1 - g").unwrap();
        assert!(x.is_zero());
    }

    #[test]
    fn malformed_shift() {
        let d = parse_document("gen g free;").unwrap();
        let err = parse_expr(&d.presentation, "g[").unwrap_err();
        assert_eq!(err, ParseError::Syntax { line: 1, col: 3, msg: "expected an integer, found end of input".into() });
        let err = parse_document("gen g free;\ntorsor g[;").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, col: 10, .. }), "{err}");
    }

    #[test]
    fn unknown_and_stratification() {
        let err = parse_document("gen a affine linear=1 const=b;").unwrap_err();
        assert_eq!(err, ParseError::UnknownGenerator { line: 1, col: 29, name: "b".into() });
        let err = parse_document("gen g free; gen g free;").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }), "{err}");
        assert!(parse_document("gen s free;").is_err());
    }

    #[test]
    fn sugar_agrees_with_sigma() {
        let d = parse_document(PAIR).unwrap();
        let p = &d.presentation;
        assert_eq!(parse_expr(p, "g[2]").unwrap(), parse_expr(p, "s(g, 2)").unwrap());
        assert_eq!(parse_expr(p, "wp(a1)").unwrap(), parse_expr(p, "(g - 1)*a1 + g").unwrap());
        assert_eq!(parse_expr(p, "g^-2").unwrap(), parse_expr(p, "1/(g*g)").unwrap());
        assert_eq!(parse_expr(p, "-g^2").unwrap(), parse_expr(p, "0 - g*g").unwrap());
    }

    #[test]
    fn round_trip() {
        let text = "gen g free; gen t affine linear=1 const=1; gen u affine linear=1 const=g/2 home 1; gen v affine linear=1 const=1 home 2,1;
                    system 2; torsor a; twisted g, (g + 1)/(2*g[-1]); mult g^3, -2; summand u - t; entry u - t = 1/3; query t - u;
                    element 3; height 2; subfield g, t; subfield; r 1/2, 0, -1/3; btilde 1; part 1 v; rewrite 2 2/3*u; witness 1 v; shift 1;";
        let err = parse_document(text).unwrap_err();
        assert!(matches!(err, ParseError::UnknownGenerator { ref name, .. } if name == "a"));
        let text = text.replace("torsor a;", "torsor g*u;");
        let d = parse_document(&text).unwrap();
        let printed = print_document(&d);
        assert_eq!(parse_document(&printed).unwrap(), d, "{printed}");
    }
}
