use std::collections::BTreeMap;

use super::{escape_string, has_scheme, valid_lang_tag, vocab, Graph, Iri, Literal, RdfError, RdfTerm, Triple};

/// Parses the supported Turtle subset. Relative IRIs are resolved against
/// `base` (or an in-document `@base`); without one they are an error.
pub fn parse_turtle(text: &str, base: Option<&str>) -> Result<Graph, RdfError> {
    let mut parser = TurtleParser {
        src: text.as_bytes(),
        text,
        pos: 0,
        line: 1,
        col: 1,
        base: base.map(str::to_owned),
        prefixes: BTreeMap::new(),
        graph: Graph::new(),
    };
    parser.document()?;
    let mut graph = parser.graph;
    graph.prefixes = parser.prefixes;
    Ok(graph)
}

struct TurtleParser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    base: Option<String>,
    prefixes: BTreeMap<String, String>,
    graph: Graph,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '.' || c == '%'
}

impl<'a> TurtleParser<'a> {
    fn err(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax { line: self.line, column: self.col, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<(), RdfError> {
        self.skip_ws();
        match self.peek() {
            Some(x) if x == c => {
                self.bump();
                Ok(())
            }
            Some(x) => Err(self.err(format!("expected '{c}', found '{x}'"))),
            None => Err(self.err(format!("expected '{c}', found end of input"))),
        }
    }

    fn starts_with_keyword(&self, kw: &str) -> bool {
        let rest = &self.src[self.pos..];
        rest.len() >= kw.len()
            && rest[..kw.len()].eq_ignore_ascii_case(kw.as_bytes())
            && rest.get(kw.len()).is_none_or(|b| b.is_ascii_whitespace() || *b == b'<')
    }

    fn document(&mut self) -> Result<(), RdfError> {
        loop {
            self.skip_ws();
            let Some(c) = self.peek() else { return Ok(()) };
            if c == '@' {
                self.bump();
                let word = self.word();
                match word.as_str() {
                    "prefix" => {
                        self.prefix_decl()?;
                        self.expect('.')?;
                    }
                    "base" => {
                        self.base_decl()?;
                        self.expect('.')?;
                    }
                    other => return Err(self.err(format!("unknown directive '@{other}'"))),
                }
            } else if self.starts_with_keyword("PREFIX") {
                self.word();
                self.prefix_decl()?;
            } else if self.starts_with_keyword("BASE") {
                self.word();
                self.base_decl()?;
            } else {
                self.triples()?;
                self.expect('.')?;
            }
        }
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphabetic() {
                w.push(c);
                self.bump();
            } else {
                break;
            }
        }
        w
    }

    fn prefix_decl(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        let mut label = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !is_name_char(c) {
                return Err(self.err(format!("invalid character '{c}' in prefix label")));
            }
            label.push(c);
            self.bump();
        }
        self.expect(':')?;
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.prefixes.insert(label, iri);
        Ok(())
    }

    fn base_decl(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.base = Some(iri);
        Ok(())
    }

    /// `<...>` resolved to an absolute IRI string.
    fn iri_ref(&mut self) -> Result<String, RdfError> {
        if self.peek() != Some('<') {
            return Err(self.err("expected '<'"));
        }
        self.bump();
        let mut raw = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some('\\') => raw.push(self.unicode_escape()?),
                Some(c) if c.is_whitespace() || c == '<' || c == '"' => {
                    return Err(self.err(format!("invalid character '{c}' in IRI")))
                }
                Some(c) => raw.push(c),
                None => return Err(self.err("unterminated IRI")),
            }
        }
        self.resolve(&raw)
    }

    fn resolve(&self, raw: &str) -> Result<String, RdfError> {
        if has_scheme(raw) {
            return Ok(raw.to_owned());
        }
        resolve_relative(self.base.as_deref(), raw)
    }

    fn unicode_escape(&mut self) -> Result<char, RdfError> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err("invalid escape in IRI")),
        };
        self.hex_char(len)
    }

    fn hex_char(&mut self, len: usize) -> Result<char, RdfError> {
        let mut code = 0u32;
        for _ in 0..len {
            let d = self.bump().and_then(|c| c.to_digit(16)).ok_or_else(|| self.err("invalid hex escape"))?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| self.err("invalid code point"))
    }

    fn triples(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        let subject = match self.peek() {
            Some('[') => return Err(self.err("anonymous blank nodes are not supported")),
            Some('(') => return Err(self.err("collections are not supported")),
            Some('"') | Some('\'') => return Err(self.err("literal in subject position")),
            _ => self.resource_or_bnode()?,
        };
        if subject.is_literal() {
            return Err(self.err("literal in subject position"));
        }
        loop {
            self.skip_ws();
            let predicate = self.verb()?;
            loop {
                self.skip_ws();
                let object = self.object()?;
                let triple =
                    Triple::new(subject.clone(), predicate.clone(), object).map_err(|e| self.err(e.to_string()))?;
                self.graph.insert(triple);
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            self.skip_ws();
            if self.peek() == Some(';') {
                while self.peek() == Some(';') {
                    self.bump();
                    self.skip_ws();
                }
                if matches!(self.peek(), Some('.') | None) {
                    return Ok(());
                }
            } else {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> Result<Iri, RdfError> {
        if self.peek() == Some('a') {
            let next = self.src.get(self.pos + 1).copied();
            if next.is_none_or(|b| b.is_ascii_whitespace() || b == b'<' || b == b'"') {
                self.bump();
                return Ok(Iri::from_static(vocab::RDF_TYPE));
            }
        }
        match self.resource_or_bnode()? {
            RdfTerm::Iri(i) => Ok(i),
            _ => Err(self.err("predicate must be an IRI")),
        }
    }

    fn resource_or_bnode(&mut self) -> Result<RdfTerm, RdfError> {
        match self.peek() {
            Some('<') => {
                let iri = self.iri_ref()?;
                Iri::new(iri).map(RdfTerm::Iri).map_err(|e| self.err(e.to_string()))
            }
            Some('_') if self.src.get(self.pos + 1) == Some(&b':') => {
                self.bump();
                self.bump();
                let label = self.name_chars();
                if label.is_empty() {
                    return Err(self.err("empty blank node label"));
                }
                Ok(RdfTerm::BlankNode(label))
            }
            Some(_) => self.prefixed_name().map(RdfTerm::Iri),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn name_chars(&mut self) -> String {
        let start = self.pos;
        let mut end = self.pos;
        for (i, c) in self.text[start..].char_indices() {
            if is_name_char(c) {
                end = start + i + c.len_utf8();
            } else {
                break;
            }
        }
        // a trailing '.' terminates the statement
        while end > start && self.src[end - 1] == b'.' {
            end -= 1;
        }
        let s = self.text[start..end].to_owned();
        for _ in s.chars() {
            self.bump();
        }
        s
    }

    fn prefixed_name(&mut self) -> Result<Iri, RdfError> {
        let (line, column) = (self.line, self.col);
        let mut label = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !is_name_char(c) || c == '.' {
                return Err(self.err(format!("unexpected character '{c}'")));
            }
            label.push(c);
            self.bump();
        }
        if self.peek() != Some(':') {
            return Err(self.err(format!("expected prefixed name, found '{label}'")));
        }
        self.bump();
        let local = self.name_chars();
        let Some(ns) = self.prefixes.get(&label) else {
            return Err(RdfError::UndeclaredPrefix { prefix: label, line, column });
        };
        Iri::new(format!("{ns}{local}")).map_err(|e| self.err(e.to_string()))
    }

    fn object(&mut self) -> Result<RdfTerm, RdfError> {
        match self.peek() {
            Some('"') | Some('\'') => self.literal(),
            Some('[') => Err(self.err("anonymous blank nodes are not supported")),
            Some('(') => Err(self.err("collections are not supported")),
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' => self.numeric(),
            Some(_) if self.keyword_literal("true") => Ok(bool_literal("true")),
            Some(_) if self.keyword_literal("false") => Ok(bool_literal("false")),
            Some(_) => self.resource_or_bnode(),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn keyword_literal(&mut self, kw: &str) -> bool {
        let rest = &self.src[self.pos..];
        if rest.starts_with(kw.as_bytes())
            && rest.get(kw.len()).is_none_or(|b| !(b.is_ascii_alphanumeric() || *b == b':' || *b == b'_'))
        {
            for _ in 0..kw.len() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn numeric(&mut self) -> Result<RdfTerm, RdfError> {
        let mut s = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            s.push(c);
            self.bump();
        }
        let mut seen_dot = false;
        let mut seen_exp = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else if c == '.' && !seen_dot && !seen_exp {
                // only a decimal point if followed by a digit
                match self.src.get(self.pos + 1) {
                    Some(b) if b.is_ascii_digit() => {
                        seen_dot = true;
                        s.push(c);
                        self.bump();
                    }
                    _ => break,
                }
            } else if (c == 'e' || c == 'E') && !seen_exp {
                seen_exp = true;
                s.push(c);
                self.bump();
                if let Some(c @ ('+' | '-')) = self.peek() {
                    s.push(c);
                    self.bump();
                }
            } else {
                break;
            }
        }
        if !s.chars().any(|c| c.is_ascii_digit()) {
            return Err(self.err("invalid numeric literal"));
        }
        let dt = if seen_exp {
            vocab::XSD_DOUBLE
        } else if seen_dot {
            vocab::XSD_DECIMAL
        } else {
            vocab::XSD_INTEGER
        };
        Ok(RdfTerm::Literal(Literal::typed(s, Iri::from_static(dt))))
    }

    fn literal(&mut self) -> Result<RdfTerm, RdfError> {
        let lexical = self.string()?;
        match self.peek() {
            Some('@') => {
                self.bump();
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if !valid_lang_tag(&tag) {
                    return Err(self.err(format!("invalid language tag '{tag}'")));
                }
                Literal::lang(lexical, tag).map(RdfTerm::Literal).map_err(|e| self.err(e.to_string()))
            }
            Some('^') => {
                self.bump();
                if self.bump() != Some('^') {
                    return Err(self.err("expected '^^'"));
                }
                let dt = match self.resource_or_bnode()? {
                    RdfTerm::Iri(i) => i,
                    _ => return Err(self.err("datatype must be an IRI")),
                };
                if dt.as_str() == vocab::RDF_LANG_STRING {
                    return Err(self.err("rdf:langString requires a language tag"));
                }
                Ok(RdfTerm::Literal(Literal::typed(lexical, dt)))
            }
            _ => Ok(RdfTerm::Literal(Literal::simple(lexical))),
        }
    }

    fn string(&mut self) -> Result<String, RdfError> {
        let quote = self.bump().expect("caller checked quote");
        let long = self.peek() == Some(quote) && self.src.get(self.pos + 1) == Some(&(quote as u8));
        if long {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex_char(4)?,
                        Some('U') => self.hex_char(8)?,
                        _ => return Err(self.err("invalid string escape")),
                    };
                    out.push(c);
                }
                Some(c) if c == quote => {
                    if !long {
                        return Ok(out);
                    }
                    if self.peek() == Some(quote) && self.src.get(self.pos + 1) == Some(&(quote as u8)) {
                        self.bump();
                        self.bump();
                        return Ok(out);
                    }
                    out.push(c);
                }
                Some('\n') if !long => return Err(self.err("newline in short string")),
                Some(c) => out.push(c),
            }
        }
    }
}

fn bool_literal(v: &str) -> RdfTerm {
    RdfTerm::Literal(Literal::typed(v, Iri::from_static(vocab::XSD_BOOLEAN)))
}

pub(crate) fn resolve_relative(base: Option<&str>, raw: &str) -> Result<String, RdfError> {
    let base = base.ok_or_else(|| RdfError::RelativeIri(raw.to_owned()))?;
    let base_url = url::Url::parse(base).map_err(|_| RdfError::InvalidIri(base.to_owned()))?;
    base_url.join(raw).map(|u| u.to_string()).map_err(|_| RdfError::InvalidIri(raw.to_owned()))
}

fn valid_local(local: &str) -> bool {
    local.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') && !local.starts_with('-')
}

/// Shortest prefixed form of `iri`, or `<iri>`.
pub(crate) fn compact_iri(iri: &str, prefixes: &BTreeMap<String, String>) -> String {
    let mut best: Option<(&str, &str)> = None;
    for (label, ns) in prefixes {
        if let Some(local) = iri.strip_prefix(ns.as_str()) {
            if valid_local(local) && best.is_none_or(|(_, b)| ns.len() > b.len()) {
                best = Some((label, ns));
            }
        }
    }
    match best {
        Some((label, ns)) => format!("{label}:{}", &iri[ns.len()..]),
        None => format!("<{iri}>"),
    }
}

pub(crate) fn write_term(term: &RdfTerm, prefixes: &BTreeMap<String, String>) -> String {
    match term {
        RdfTerm::Iri(i) => compact_iri(i.as_str(), prefixes),
        RdfTerm::BlankNode(b) => format!("_:{b}"),
        RdfTerm::Literal(l) => {
            let mut s = format!("\"{}\"", escape_string(l.lexical()));
            if let Some(tag) = l.language() {
                s.push('@');
                s.push_str(tag);
            } else if l.datatype().as_str() != vocab::XSD_STRING {
                s.push_str("^^");
                s.push_str(&compact_iri(l.datatype().as_str(), prefixes));
            }
            s
        }
    }
}

/// Canonical Turtle: prefixes sorted by label, subjects and predicates in
/// term order, objects grouped per predicate.
pub fn serialize_turtle(graph: &Graph) -> String {
    let prefixes = graph.prefixes();
    let mut out = String::new();
    for (label, ns) in prefixes {
        out.push_str(&format!("@prefix {label}: <{ns}> .\n"));
    }
    let mut current: Option<&RdfTerm> = None;
    let mut current_pred: Option<&Iri> = None;
    for t in graph.iter() {
        if current != Some(t.subject()) {
            if current.is_some() {
                out.push_str(" .\n");
            }
            out.push('\n');
            out.push_str(&write_term(t.subject(), prefixes));
            out.push(' ');
            current = Some(t.subject());
            current_pred = None;
        }
        if current_pred == Some(t.predicate()) {
            out.push_str(" , ");
        } else {
            if current_pred.is_some() {
                out.push_str(" ;\n    ");
            }
            if t.predicate().as_str() == vocab::RDF_TYPE {
                out.push('a');
            } else {
                out.push_str(&compact_iri(t.predicate().as_str(), prefixes));
            }
            out.push(' ');
            current_pred = Some(t.predicate());
        }
        out.push_str(&write_term(t.object(), prefixes));
    }
    if current.is_some() {
        out.push_str(" .\n");
    }
    out
}
