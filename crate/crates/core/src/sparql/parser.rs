use std::collections::HashMap;

use super::{AlgebraExpr, CompareOp, Expr, QueryError, QueryModifiers, ServiceTarget, TermPattern, TriplePattern};
use crate::rdf::{has_scheme, vocab, Iri, Literal, RdfTerm};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    IriRef(String),
    PName(String, String),
    Var(String),
    Str(String),
    LangTag(String),
    Number(String, &'static str),
    Word(String),
    BNode(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const PUNCT: &[&str] = &[
    "^^", "&&", "||", "!=", "<=", ">=", "{", "}", "(", ")", ".", ",", ";", "*", "=", "<", ">", "!", "^", "/", "|", "+",
    "-", "?", "[", "]",
];

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax { line: self.line, column: self.column, message: message.into() }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn advance(&mut self, n: usize) {
        for c in self.text[self.pos..self.pos + n].chars() {
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        self.pos += n;
    }

    fn skip_ws(&mut self) {
        loop {
            let r = self.rest();
            let Some(c) = r.chars().next() else { return };
            if c.is_whitespace() {
                self.advance(c.len_utf8());
            } else if c == '#' {
                let n = r.find('\n').unwrap_or(r.len());
                self.advance(n);
            } else {
                return;
            }
        }
    }

    fn name_len(s: &str) -> usize {
        s.char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '-' || *c == '.'))
            .map_or(s.len(), |(i, _)| i)
    }

    fn tokens(mut self) -> Result<Vec<Token>, QueryError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let (line, column) = (self.line, self.column);
            let r = self.rest();
            let Some(c) = r.chars().next() else {
                out.push(Token { tok: Tok::Eof, line, column });
                return Ok(out);
            };
            let tok = if c == '<' && Self::iri_len(r).is_some() {
                let n = Self::iri_len(r).unwrap();
                let iri = r[1..n - 1].to_owned();
                self.advance(n);
                Tok::IriRef(iri)
            } else if (c == '?' || c == '$') && r[1..].chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                let n = r[1..]
                    .char_indices()
                    .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
                    .map_or(r.len() - 1, |(i, _)| i);
                let v = r[1..1 + n].to_owned();
                self.advance(1 + n);
                Tok::Var(v)
            } else if c == '"' || c == '\'' {
                Tok::Str(self.string()?)
            } else if c == '@' {
                let n = 1 + r[1..]
                    .char_indices()
                    .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '-'))
                    .map_or(r.len() - 1, |(i, _)| i);
                let tag = r[1..n].to_owned();
                self.advance(n);
                Tok::LangTag(tag)
            } else if c.is_ascii_digit() || (c == '.' && r[1..].starts_with(|c: char| c.is_ascii_digit())) {
                let (s, dt) = Self::number(r);
                let s = s.to_owned();
                self.advance(s.len());
                Tok::Number(s, dt)
            } else if let Some(tail) = r.strip_prefix("_:") {
                let n = Self::name_len(tail);
                let label = tail[..n].trim_end_matches('.').to_owned();
                self.advance(2 + label.len());
                Tok::BNode(label)
            } else if c.is_alphabetic() || c == ':' || c == '_' {
                let n = Self::name_len(r);
                let word = &r[..n];
                if let Some(colon) = r[..].find(':').filter(|i| *i == n) {
                    // prefixed name `prefix:local`
                    let local_n = Self::name_len(&r[colon + 1..]);
                    let local = r[colon + 1..colon + 1 + local_n].trim_end_matches('.');
                    let tok = Tok::PName(word.to_owned(), local.to_owned());
                    self.advance(colon + 1 + local.len());
                    tok
                } else {
                    let word = word.trim_end_matches('.').to_owned();
                    self.advance(word.len());
                    Tok::Word(word)
                }
            } else if let Some(p) = PUNCT.iter().find(|p| r.starts_with(**p)) {
                self.advance(p.len());
                Tok::Punct(p)
            } else {
                return Err(self.err(format!("unexpected character '{c}'")));
            };
            out.push(Token { tok, line, column });
        }
    }

    fn iri_len(r: &str) -> Option<usize> {
        for (i, c) in r.char_indices().skip(1) {
            match c {
                '>' => return Some(i + 1),
                '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' => return None,
                c if c.is_whitespace() => return None,
                _ => {}
            }
        }
        None
    }

    fn number(r: &str) -> (&str, &'static str) {
        let b = r.as_bytes();
        let mut i = 0;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mut dt = vocab::XSD_INTEGER;
        if i < b.len() && b[i] == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit) {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            dt = vocab::XSD_DECIMAL;
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if b.get(j).is_some_and(u8::is_ascii_digit) {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
                dt = vocab::XSD_DOUBLE;
            }
        }
        (&r[..i], dt)
    }

    fn string(&mut self) -> Result<String, QueryError> {
        let r = self.rest();
        let quote = r.chars().next().unwrap();
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let long = r.starts_with(&triple);
        let start = if long { 3 } else { 1 };
        let mut out = String::new();
        let mut chars = r[start..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    let (_, e) = chars.next().ok_or_else(|| self.err("unterminated string"))?;
                    match e {
                        't' => out.push('\t'),
                        'n' => out.push('\n'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        '"' | '\'' | '\\' => out.push(e),
                        'u' | 'U' => {
                            let len = if e == 'u' { 4 } else { 8 };
                            let mut code = 0u32;
                            for _ in 0..len {
                                let d = chars
                                    .next()
                                    .and_then(|(_, c)| c.to_digit(16))
                                    .ok_or_else(|| self.err("invalid \\u escape"))?;
                                code = code * 16 + d;
                            }
                            out.push(char::from_u32(code).ok_or_else(|| self.err("invalid code point"))?);
                        }
                        _ => return Err(self.err("invalid string escape")),
                    }
                }
                c if c == quote && (!long || r[start + i..].starts_with(&triple)) => {
                    let end = start + i + if long { 3 } else { 1 };
                    self.advance(end);
                    return Ok(out);
                }
                '\n' if !long => return Err(self.err("newline in string")),
                c => out.push(c),
            }
        }
        Err(self.err("unterminated string"))
    }
}

/// Parses a SELECT query in the supported subset into its algebra.
pub fn parse_query(text: &str) -> Result<AlgebraExpr, QueryError> {
    let tokens = Lexer { text, pos: 0, line: 1, column: 1 }.tokens()?;
    let mut prefixes = HashMap::new();
    for (p, ns) in
        [("rdf", vocab::RDF), ("rdfs", vocab::RDFS), ("xsd", vocab::XSD), ("owl", vocab::OWL), ("hdo", vocab::HDO)]
    {
        prefixes.insert(p.to_owned(), ns.to_owned());
    }
    let mut p = Parser { tokens, i: 0, prefixes, base: None };
    p.query()
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
    prefixes: HashMap<String, String>,
    base: Option<String>,
}

const UNSUPPORTED_QUERY_FORMS: &[&str] = &["CONSTRUCT", "ASK", "DESCRIBE"];
const UPDATE_KEYWORDS: &[&str] =
    &["INSERT", "DELETE", "LOAD", "CLEAR", "CREATE", "DROP", "COPY", "MOVE", "ADD", "WITH"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.i]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.i].clone();
        if self.i + 1 < self.tokens.len() {
            self.i += 1;
        }
        t
    }

    fn err_at(t: &Token, message: impl Into<String>) -> QueryError {
        QueryError::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn unsupported_at(t: &Token, feature: impl Into<String>) -> QueryError {
        QueryError::Unsupported { feature: feature.into(), line: t.line, column: t.column }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::IriRef(i) => format!("<{i}>"),
            Tok::PName(p, l) => format!("{p}:{l}"),
            Tok::Var(v) => format!("?{v}"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::LangTag(t) => format!("@{t}"),
            Tok::Number(n, _) => n.clone(),
            Tok::Word(w) => w.clone(),
            Tok::BNode(b) => format!("_:{b}"),
            Tok::Punct(p) => (*p).to_owned(),
            Tok::Eof => "end of query".to_owned(),
        }
    }

    fn unexpected(&self, expected: &str) -> QueryError {
        let t = self.peek();
        Self::err_at(t, format!("expected {expected}, found {}", Self::describe(&t.tok)))
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(x) if *x == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), QueryError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{p}'")))
        }
    }

    fn word_upper(&self) -> Option<String> {
        match &self.peek().tok {
            Tok::Word(w) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn query(&mut self) -> Result<AlgebraExpr, QueryError> {
        // prologue
        loop {
            match self.word_upper().as_deref() {
                Some("PREFIX") => {
                    self.next();
                    let t = self.next();
                    let label = match t.tok {
                        Tok::PName(p, l) if l.is_empty() => p,
                        Tok::Punct(":") => String::new(),
                        _ => return Err(Self::err_at(&t, "expected prefix label")),
                    };
                    let t = self.next();
                    let Tok::IriRef(ns) = &t.tok else {
                        return Err(Self::err_at(&t, "expected IRI after PREFIX"));
                    };
                    let ns = self.resolve(ns, &t)?;
                    self.prefixes.insert(label, ns);
                }
                Some("BASE") => {
                    self.next();
                    let t = self.next();
                    let Tok::IriRef(b) = &t.tok else {
                        return Err(Self::err_at(&t, "expected IRI after BASE"));
                    };
                    self.base = Some(self.resolve(b, &t)?);
                }
                _ => break,
            }
        }
        let t = self.peek().clone();
        match self.word_upper().as_deref() {
            Some("SELECT") => {}
            Some(w) if UNSUPPORTED_QUERY_FORMS.contains(&w) => return Err(Self::unsupported_at(&t, w)),
            Some(w) if UPDATE_KEYWORDS.contains(&w) => return Err(Self::unsupported_at(&t, format!("UPDATE ({w})"))),
            _ => return Err(self.unexpected("SELECT")),
        }
        self.next();
        let mut modifiers = QueryModifiers::default();
        if self.is_word("DISTINCT") {
            self.next();
            modifiers.distinct = true;
        } else if self.is_word("REDUCED") {
            return Err(Self::unsupported_at(self.peek(), "REDUCED"));
        }
        let mut vars = Vec::new();
        let mut star = false;
        if self.eat_punct("*") {
            star = true;
        } else {
            loop {
                match &self.peek().tok {
                    Tok::Var(v) => {
                        if !vars.contains(v) {
                            vars.push(v.clone());
                        }
                        self.next();
                    }
                    Tok::Punct("(") => return Err(Self::unsupported_at(self.peek(), "projection expressions")),
                    _ => break,
                }
            }
            if vars.is_empty() {
                return Err(self.unexpected("variable or '*'"));
            }
        }
        if self.is_word("FROM") {
            return Err(Self::unsupported_at(self.peek(), "FROM (dataset clause)"));
        }
        if self.is_word("WHERE") {
            self.next();
        }
        let pattern = self.group()?;
        loop {
            let t = self.peek().clone();
            match self.word_upper().as_deref() {
                Some("LIMIT") => {
                    self.next();
                    modifiers.limit = Some(self.integer()?);
                }
                Some("OFFSET") => {
                    self.next();
                    modifiers.offset = self.integer()?;
                }
                Some("GROUP") => return Err(Self::unsupported_at(&t, "GROUP BY")),
                Some("ORDER") => return Err(Self::unsupported_at(&t, "ORDER BY")),
                Some("HAVING") => return Err(Self::unsupported_at(&t, "HAVING")),
                Some("VALUES") => return Err(Self::unsupported_at(&t, "VALUES")),
                _ => break,
            }
        }
        if self.peek().tok != Tok::Eof {
            return Err(self.unexpected("end of query"));
        }
        modifiers.projection = Some(if star { pattern.in_scope_variables() } else { vars });
        Ok(modifiers.wrap(pattern))
    }

    fn integer(&mut self) -> Result<u64, QueryError> {
        let t = self.next();
        match &t.tok {
            Tok::Number(n, dt) if *dt == vocab::XSD_INTEGER => {
                n.parse().map_err(|_| Self::err_at(&t, "integer out of range"))
            }
            _ => Err(Self::err_at(&t, "expected integer")),
        }
    }

    fn resolve(&self, raw: &str, t: &Token) -> Result<String, QueryError> {
        if has_scheme(raw) {
            return Ok(raw.to_owned());
        }
        crate::rdf::turtle_resolve(self.base.as_deref(), raw).map_err(|e| Self::err_at(t, e.to_string()))
    }

    fn iri(&self, t: &Token) -> Result<Option<Iri>, QueryError> {
        let s = match &t.tok {
            Tok::IriRef(raw) => self.resolve(raw, t)?,
            Tok::PName(p, l) => {
                let ns = self.prefixes.get(p).ok_or_else(|| Self::err_at(t, format!("undeclared prefix '{p}'")))?;
                format!("{ns}{l}")
            }
            _ => return Ok(None),
        };
        Iri::new(s).map(Some).map_err(|e| Self::err_at(t, e.to_string()))
    }

    /// `{ ... }`
    fn group(&mut self) -> Result<AlgebraExpr, QueryError> {
        self.expect_punct("{")?;
        if self.is_word("SELECT") {
            return Err(Self::unsupported_at(self.peek(), "subqueries"));
        }
        let mut acc: Option<AlgebraExpr> = None;
        let mut last_was_bgp = false;
        let mut filters = Vec::new();
        loop {
            let t = self.peek().clone();
            if self.eat_punct("}") {
                break;
            }
            if self.eat_punct(".") {
                continue;
            }
            let upper = self.word_upper();
            match upper.as_deref() {
                Some("FILTER") => {
                    self.next();
                    filters.push(self.filter_constraint()?);
                    continue;
                }
                Some("SERVICE") => {
                    self.next();
                    let silent = if self.is_word("SILENT") {
                        self.next();
                        true
                    } else {
                        false
                    };
                    let et = self.next();
                    let endpoint = match &et.tok {
                        Tok::Var(v) => ServiceTarget::Var(v.clone()),
                        _ => {
                            ServiceTarget::Iri(self.iri(&et)?.ok_or_else(|| Self::err_at(&et, "expected service IRI"))?)
                        }
                    };
                    let body = self.group()?;
                    if body.service_count() > 0 {
                        return Err(Self::unsupported_at(&et, "nested SERVICE"));
                    }
                    let node = AlgebraExpr::Service { endpoint, body: Box::new(body), silent };
                    acc = Some(join_opt(acc, node));
                    last_was_bgp = false;
                }
                Some("BIND") => {
                    self.next();
                    self.expect_punct("(")?;
                    let vt = self.peek().clone();
                    let value = self
                        .constant(&vt)?
                        .ok_or_else(|| Self::unsupported_at(&vt, "BIND with a non-constant expression"))?;
                    if !self.is_word("AS") {
                        return Err(self.unexpected("AS"));
                    }
                    self.next();
                    let var = match self.next().tok {
                        Tok::Var(v) => v,
                        _ => return Err(Self::err_at(&vt, "expected variable after AS")),
                    };
                    self.expect_punct(")")?;
                    let inner = acc.take().unwrap_or(AlgebraExpr::Bgp(vec![]));
                    acc = Some(AlgebraExpr::Extend { var, value, inner: Box::new(inner) });
                    last_was_bgp = false;
                }
                Some(w @ ("OPTIONAL" | "MINUS" | "GRAPH" | "VALUES")) => return Err(Self::unsupported_at(&t, w)),
                _ if self.is_punct("{") => {
                    let mut g = self.group()?;
                    while self.is_word("UNION") {
                        self.next();
                        let r = self.group()?;
                        g = AlgebraExpr::union(g, r);
                    }
                    acc = Some(join_opt(acc, g));
                    last_was_bgp = false;
                }
                _ => {
                    let patterns = self.triples_block()?;
                    acc = Some(match acc {
                        Some(AlgebraExpr::Bgp(mut ps)) if last_was_bgp => {
                            ps.extend(patterns);
                            AlgebraExpr::Bgp(ps)
                        }
                        Some(AlgebraExpr::Join(l, r)) if last_was_bgp => match *r {
                            AlgebraExpr::Bgp(mut ps) => {
                                ps.extend(patterns);
                                AlgebraExpr::Join(l, Box::new(AlgebraExpr::Bgp(ps)))
                            }
                            other => AlgebraExpr::Join(
                                Box::new(AlgebraExpr::Join(l, Box::new(other))),
                                Box::new(AlgebraExpr::Bgp(patterns)),
                            ),
                        },
                        other => join_opt(other, AlgebraExpr::Bgp(patterns)),
                    });
                    last_was_bgp = true;
                }
            }
        }
        let mut out = acc.unwrap_or(AlgebraExpr::Bgp(vec![]));
        for f in filters {
            out = AlgebraExpr::Filter(f, Box::new(out));
        }
        Ok(out)
    }

    /// Triples up to the next group-level keyword, `{` or `}`.
    fn triples_block(&mut self) -> Result<Vec<TriplePattern>, QueryError> {
        let mut out = Vec::new();
        loop {
            let st = self.peek().clone();
            let subject = self.term_or_var(&st, true)?;
            self.next();
            loop {
                let pt = self.peek().clone();
                let predicate = if matches!(&pt.tok, Tok::Word(w) if w == "a") {
                    self.next();
                    TermPattern::Term(RdfTerm::Iri(Iri::from_static(vocab::RDF_TYPE)))
                } else {
                    if matches!(pt.tok, Tok::Punct("^" | "(" | "!")) {
                        return Err(Self::unsupported_at(&pt, "property paths"));
                    }
                    let p = self.term_or_var(&pt, false)?;
                    if matches!(p, TermPattern::Term(RdfTerm::Literal(_)) | TermPattern::Term(RdfTerm::BlankNode(_))) {
                        return Err(Self::err_at(&pt, "predicate must be an IRI or variable"));
                    }
                    self.next();
                    p
                };
                if let Tok::Punct(op @ ("/" | "|" | "*" | "+" | "?")) = self.peek().tok {
                    let t = self.peek().clone();
                    return Err(Self::unsupported_at(&t, format!("property paths ('{op}')")));
                }
                loop {
                    let ot = self.peek().clone();
                    let object = self.object_term(&ot)?;
                    out.push(
                        TriplePattern::new(subject.clone(), predicate.clone(), object)
                            .map_err(|m| Self::err_at(&st, m))?,
                    );
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                if self.eat_punct(";") {
                    while self.eat_punct(";") {}
                    if self.is_punct(".") || self.is_punct("}") {
                        break;
                    }
                    continue;
                }
                break;
            }
            if !self.eat_punct(".") {
                return Ok(out);
            }
            // continue only when another triple follows
            match &self.peek().tok {
                Tok::IriRef(_) | Tok::PName(..) | Tok::Var(_) => continue,
                Tok::Word(w) if !is_group_keyword(w) => continue,
                _ => return Ok(out),
            }
        }
    }

    fn term_or_var(&self, t: &Token, subject: bool) -> Result<TermPattern, QueryError> {
        match &t.tok {
            Tok::Var(v) => Ok(TermPattern::Var(v.clone())),
            Tok::IriRef(_) | Tok::PName(..) => Ok(TermPattern::Term(RdfTerm::Iri(self.iri(t)?.unwrap()))),
            Tok::BNode(_) | Tok::Punct("[") => Err(Self::unsupported_at(t, "blank nodes in query patterns")),
            Tok::Punct("(") if subject => Err(Self::unsupported_at(t, "collections")),
            Tok::Str(_) | Tok::Number(..) if subject => Err(Self::err_at(t, "literal in subject position")),
            Tok::Word(w) if w.eq_ignore_ascii_case("SELECT") => Err(Self::unsupported_at(t, "subqueries")),
            Tok::Word(w) if w.eq_ignore_ascii_case("OPTIONAL") => Err(Self::unsupported_at(t, "OPTIONAL")),
            _ => Err(Self::err_at(
                t,
                format!("expected {}, found {}", if subject { "subject" } else { "predicate" }, Self::describe(&t.tok)),
            )),
        }
    }

    fn object_term(&mut self, t: &Token) -> Result<TermPattern, QueryError> {
        if let Some(c) = self.constant(t)? {
            return Ok(TermPattern::Term(c));
        }
        match &t.tok {
            Tok::Var(v) => {
                self.next();
                Ok(TermPattern::Var(v.clone()))
            }
            Tok::BNode(_) | Tok::Punct("[") => Err(Self::unsupported_at(t, "blank nodes in query patterns")),
            Tok::Punct("(") => Err(Self::unsupported_at(t, "collections")),
            _ => Err(Self::err_at(t, format!("expected object, found {}", Self::describe(&t.tok)))),
        }
    }

    /// IRI, literal, number or boolean starting at `t` (already peeked);
    /// consumes it when present.
    fn constant(&mut self, t: &Token) -> Result<Option<RdfTerm>, QueryError> {
        let term = match &t.tok {
            Tok::IriRef(_) | Tok::PName(..) => {
                let iri = self.iri(t)?.unwrap();
                self.next_if_same(t);
                RdfTerm::Iri(iri)
            }
            Tok::Str(s) => {
                let s = s.clone();
                self.next_if_same(t);
                match self.peek().tok.clone() {
                    Tok::LangTag(tag) => {
                        let lt = self.next();
                        RdfTerm::Literal(Literal::lang(s, tag).map_err(|e| Self::err_at(&lt, e.to_string()))?)
                    }
                    Tok::Punct("^^") => {
                        self.next();
                        let dt_tok = self.next();
                        let dt = self.iri(&dt_tok)?.ok_or_else(|| Self::err_at(&dt_tok, "expected datatype IRI"))?;
                        if dt.as_str() == vocab::RDF_LANG_STRING {
                            return Err(Self::err_at(&dt_tok, "rdf:langString requires a language tag"));
                        }
                        RdfTerm::Literal(Literal::typed(s, dt))
                    }
                    _ => RdfTerm::Literal(Literal::simple(s)),
                }
            }
            Tok::Number(n, dt) => {
                let l = Literal::typed(n.clone(), Iri::from_static(dt));
                self.next_if_same(t);
                RdfTerm::Literal(l)
            }
            Tok::Punct(sign @ ("+" | "-")) => {
                let sign = *sign;
                let Tok::Number(n, dt) = self.tokens.get(self.i + 1).map(|t| t.tok.clone()).unwrap_or(Tok::Eof) else {
                    return Ok(None);
                };
                self.next();
                self.next();
                RdfTerm::Literal(Literal::typed(format!("{sign}{n}"), Iri::from_static(dt)))
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                let l = Literal::typed(w.clone(), Iri::from_static(vocab::XSD_BOOLEAN));
                self.next_if_same(t);
                RdfTerm::Literal(l)
            }
            _ => return Ok(None),
        };
        Ok(Some(term))
    }

    fn next_if_same(&mut self, t: &Token) {
        if self.peek().line == t.line && self.peek().column == t.column {
            self.next();
        }
    }

    fn filter_constraint(&mut self) -> Result<Expr, QueryError> {
        if self.is_punct("(") {
            self.next();
            let e = self.expr()?;
            self.expect_punct(")")?;
            Ok(e)
        } else {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Word(_) => self.primary(),
                _ => Err(Self::err_at(&t, "expected '(' or function call after FILTER")),
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.and_expr()?;
        while self.eat_punct("||") {
            let r = self.and_expr()?;
            e = Expr::Or(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.relational()?;
        while self.eat_punct("&&") {
            let r = self.relational()?;
            e = Expr::And(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn relational(&mut self) -> Result<Expr, QueryError> {
        let l = self.unary()?;
        let op = match &self.peek().tok {
            Tok::Punct("=") => CompareOp::Eq,
            Tok::Punct("!=") => CompareOp::Ne,
            Tok::Punct("<") => CompareOp::Lt,
            Tok::Punct("<=") => CompareOp::Le,
            Tok::Punct(">") => CompareOp::Gt,
            Tok::Punct(">=") => CompareOp::Ge,
            Tok::Punct(op @ ("+" | "-" | "*" | "/")) => {
                let t = self.peek().clone();
                return Err(Self::unsupported_at(&t, format!("arithmetic ('{op}')")));
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("IN") => {
                let t = self.peek().clone();
                return Err(Self::unsupported_at(&t, "IN"));
            }
            _ => return Ok(l),
        };
        self.next();
        let r = self.unary()?;
        if let Tok::Punct(op @ ("+" | "-" | "*" | "/")) = self.peek().tok {
            let t = self.peek().clone();
            return Err(Self::unsupported_at(&t, format!("arithmetic ('{op}')")));
        }
        Ok(Expr::Compare(op, Box::new(l), Box::new(r)))
    }

    fn unary(&mut self) -> Result<Expr, QueryError> {
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr::Not(Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        let t = self.peek().clone();
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        if let Tok::Var(v) = &t.tok {
            self.next();
            return Ok(Expr::Var(v.clone()));
        }
        if let Tok::Word(w) = &t.tok {
            if w != "true" && w != "false" {
                let name = w.to_ascii_uppercase();
                self.next();
                if !self.is_punct("(") {
                    return Err(Self::err_at(&t, format!("unexpected '{w}'")));
                }
                self.next();
                let e = match name.as_str() {
                    "REGEX" => {
                        let text = self.expr()?;
                        self.expect_punct(",")?;
                        let pattern = self.string_arg()?;
                        let flags = if self.eat_punct(",") {
                            let ft = self.peek().clone();
                            let f = self.string_arg()?;
                            if !(f.is_empty() || f == "i") {
                                return Err(Self::unsupported_at(&ft, format!("regex flags \"{f}\"")));
                            }
                            f
                        } else {
                            String::new()
                        };
                        Expr::Regex { text: Box::new(text), pattern, flags }
                    }
                    "STR" => Expr::Str(Box::new(self.expr()?)),
                    "BOUND" => match self.next().tok {
                        Tok::Var(v) => Expr::Bound(v),
                        _ => return Err(Self::err_at(&t, "BOUND expects a variable")),
                    },
                    "EXISTS" | "NOT" => return Err(Self::unsupported_at(&t, "EXISTS")),
                    other => return Err(Self::unsupported_at(&t, format!("function {other}"))),
                };
                self.expect_punct(")")?;
                return Ok(e);
            }
        }
        match self.constant(&t)? {
            Some(c) => Ok(Expr::Const(c)),
            None => Err(Self::err_at(&t, format!("expected expression, found {}", Self::describe(&t.tok)))),
        }
    }

    fn string_arg(&mut self) -> Result<String, QueryError> {
        let t = self.next();
        match &t.tok {
            Tok::Str(s) => {
                if matches!(self.peek().tok, Tok::LangTag(_) | Tok::Punct("^^")) {
                    return Err(Self::unsupported_at(&t, "non-simple literal as regex argument"));
                }
                Ok(s.clone())
            }
            _ => Err(Self::err_at(&t, "expected string literal")),
        }
    }
}

fn is_group_keyword(w: &str) -> bool {
    ["FILTER", "SERVICE", "BIND", "OPTIONAL", "MINUS", "GRAPH", "VALUES", "UNION"]
        .iter()
        .any(|k| w.eq_ignore_ascii_case(k))
}

fn join_opt(acc: Option<AlgebraExpr>, next: AlgebraExpr) -> AlgebraExpr {
    match acc {
        None => next,
        Some(a) => AlgebraExpr::join(a, next),
    }
}
