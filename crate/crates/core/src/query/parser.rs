use crate::graph::{EdgeLabel, NodeKind};

use super::{properties, Clause, Hop, IdFilter, NodePattern, Projection, QueryError, QueryPlan};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Comma,
    Dot,
    Dash,
    Arrow,
    Ident(String),
    Str(String),
    Int(u64),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Dash => "`-`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(n) => format!("integer {n}"),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(pos: usize, expected: &[&str], found: String) -> QueryError {
    QueryError::Syntax {
        pos,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match ch {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((pos, tok));
            continue;
        }
        if ch == '-' {
            chars.next();
            if matches!(chars.peek(), Some(&(_, '>'))) {
                chars.next();
                out.push((pos, Tok::Arrow));
            } else {
                out.push((pos, Tok::Dash));
            }
            continue;
        }
        if ch == '"' {
            chars.next();
            let mut value = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => break,
                    Some((esc_pos, '\\')) => match chars.next() {
                        Some((_, '"')) => value.push('"'),
                        Some((_, '\\')) => value.push('\\'),
                        Some((_, 'n')) => value.push('\n'),
                        Some((_, 't')) => value.push('\t'),
                        Some((_, 'r')) => value.push('\r'),
                        Some((_, other)) => {
                            return Err(syntax(esc_pos, &["escape sequence"], format!("`\\{other}`")))
                        }
                        None => return Err(syntax(src.len(), &["`\"`"], "end of input".into())),
                    },
                    Some((_, c)) => value.push(c),
                    None => return Err(syntax(src.len(), &["`\"`"], "end of input".into())),
                }
            }
            out.push((pos, Tok::Str(value)));
            continue;
        }
        if ch.is_ascii_digit() {
            let mut end = pos;
            while let Some(&(p, c)) = chars.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                end = p + c.len_utf8();
                chars.next();
            }
            let digits = &src[pos..end];
            let n = digits
                .parse()
                .map_err(|_| syntax(pos, &["integer"], format!("out-of-range integer {digits}")))?;
            out.push((pos, Tok::Int(n)));
            continue;
        }
        if ch.is_alphabetic() || ch == '_' {
            let mut end = pos;
            while let Some(&(p, c)) = chars.peek() {
                if !(c.is_alphanumeric() || c == '_') {
                    break;
                }
                end = p + c.len_utf8();
                chars.next();
            }
            out.push((pos, Tok::Ident(src[pos..end].to_string())));
            continue;
        }
        return Err(syntax(pos, &["token"], format!("character {ch:?}")));
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.at].clone();
        if t.1 != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        syntax(self.pos(), expected, self.peek().describe())
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<usize, QueryError> {
        if *self.peek() == tok {
            Ok(self.bump().0)
        } else {
            Err(self.error(&[name]))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(usize, String), QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().0;
                Ok((pos, s))
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn query(&mut self) -> Result<QueryPlan, QueryError> {
        let mut clauses = vec![self.clause()?];
        while self.at_keyword("UNION") {
            let pos = self.bump().0;
            let clause = self.clause()?;
            if clause.projections.len() != clauses[0].projections.len() {
                return Err(QueryError::InvalidPattern {
                    pos,
                    message: "UNION clauses must return the same number of columns".into(),
                });
            }
            clauses.push(clause);
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["UNION", "end of input"]));
        }
        Ok(QueryPlan { clauses })
    }

    fn clause(&mut self) -> Result<Clause, QueryError> {
        self.keyword("MATCH")?;
        let anchor = self.node_pattern(true)?;
        let hop = if *self.peek() == Tok::Dash {
            let dash_pos = self.bump().0;
            self.expect(Tok::LBracket, "`[`")?;
            self.expect(Tok::Colon, "`:`")?;
            let (label_pos, label) = self.ident("edge label")?;
            let edge = EdgeLabel::from_name(&label).ok_or(QueryError::UnknownLabel { pos: label_pos, label })?;
            self.expect(Tok::RBracket, "`]`")?;
            self.expect(Tok::Arrow, "`->`")?;
            let target = self.node_pattern(false)?;
            if !edge.allows(anchor.label, target.label) {
                return Err(QueryError::InvalidPattern {
                    pos: dash_pos,
                    message: format!("{edge} cannot connect {} -> {}", anchor.label, target.label),
                });
            }
            if target.var == anchor.var {
                return Err(QueryError::InvalidPattern {
                    pos: dash_pos,
                    message: format!("variable {:?} declared twice", target.var),
                });
            }
            Some(Hop { edge, target })
        } else {
            None
        };

        let mut clause = Clause {
            anchor,
            hop,
            filter: None,
            projections: Vec::new(),
        };

        if self.at_keyword("WHERE") {
            self.bump();
            let (var_pos, var) = self.ident("variable")?;
            if clause.pattern_for(&var).is_none() {
                return Err(QueryError::UnknownVariable { pos: var_pos, var });
            }
            self.expect(Tok::Dot, "`.`")?;
            let (key_pos, key) = self.ident("`id`")?;
            if key != "id" {
                return Err(syntax(key_pos, &["`id`"], format!("identifier {key:?}")));
            }
            self.keyword("IN")?;
            self.expect(Tok::LBracket, "`[`")?;
            let mut ids = vec![self.int()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                ids.push(self.int()?);
            }
            self.expect(Tok::RBracket, "`]`")?;
            clause.filter = Some(IdFilter { var, ids });
        }

        self.keyword("RETURN")?;
        loop {
            let (var_pos, var) = self.ident("variable")?;
            let label = clause
                .pattern_for(&var)
                .map(|p| p.label)
                .ok_or_else(|| QueryError::UnknownVariable {
                    pos: var_pos,
                    var: var.clone(),
                })?;
            self.expect(Tok::Dot, "`.`")?;
            let (key_pos, key) = self.ident("property")?;
            if !properties(label).contains(&key.as_str()) {
                return Err(QueryError::UnknownProperty {
                    pos: key_pos,
                    label,
                    property: key,
                });
            }
            clause.projections.push(Projection { var, key });
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(clause)
    }

    fn int(&mut self) -> Result<u64, QueryError> {
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn node_pattern(&mut self, allow_props: bool) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let (_, var) = self.ident("variable")?;
        self.expect(Tok::Colon, "`:`")?;
        let (label_pos, label_text) = self.ident("label")?;
        let label = NodeKind::from_label(&label_text).ok_or(QueryError::UnknownLabel {
            pos: label_pos,
            label: label_text,
        })?;
        let mut props: Vec<(String, String)> = Vec::new();
        if allow_props && *self.peek() == Tok::LBrace {
            self.bump();
            loop {
                let (key_pos, key) = self.ident("property")?;
                if key == "id" || !properties(label).contains(&key.as_str()) {
                    return Err(QueryError::UnknownProperty {
                        pos: key_pos,
                        label,
                        property: key,
                    });
                }
                if props.iter().any(|(k, _)| *k == key) {
                    return Err(QueryError::InvalidPattern {
                        pos: key_pos,
                        message: format!("property {key:?} repeated"),
                    });
                }
                self.expect(Tok::Colon, "`:`")?;
                let value = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.error(&["string"])),
                };
                props.push((key, value));
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RBrace => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error(&["`,`", "`}`"])),
                }
            }
        }
        let expected: &[&str] = if allow_props { &["`{`", "`)`"] } else { &["`)`"] };
        if *self.peek() != Tok::RParen {
            return Err(self.error(expected));
        }
        self.bump();
        Ok(NodePattern { var, label, props })
    }
}

/// Parses query text into a plan validated against the graph schema.
pub fn parse(query_text: &str) -> Result<QueryPlan, QueryError> {
    let toks = lex(query_text)?;
    Parser { toks, at: 0 }.query()
}
