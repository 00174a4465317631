//! Structural check for masked queries.
//!
//! Masked queries are not executable SPARQL (braces are `OB`/`CB`, IRIs are
//! placeholders) so this is a small recursive-descent recognizer for the
//! clause shapes that occur in KGQA datasets: SELECT/ASK with optional
//! sub-selects, triple blocks with `;`/`,` lists, FILTER, VALUES, OPTIONAL,
//! MINUS, UNION, BIND and the usual solution modifiers.

use std::fmt;

pub const OPEN_BRACE: &str = "OB";
pub const CLOSE_BRACE: &str = "CB";
const CARET: &str = "CARET";

const CLAUSE_KEYWORDS: &[&str] = &[
    "SELECT", "ASK", "CONSTRUCT", "DESCRIBE", "WHERE", "DISTINCT", "REDUCED", "FILTER", "VALUES", "OPTIONAL", "MINUS",
    "BIND", "UNION", "ORDER", "GROUP", "BY", "LIMIT", "OFFSET", "HAVING", "AS", "PREFIX", "BASE",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at token {}: {}", self.position, self.message)
    }
}

impl std::error::Error for SyntaxError {}

type Parse<T = ()> = Result<T, SyntaxError>;

/// Checks that a masked query is well formed.
pub fn check_masked_query<S: AsRef<str>>(tokens: &[S]) -> Parse {
    let tokens: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let mut p = Parser { tokens: &tokens, pos: 0 };
    p.query()?;
    if p.pos != tokens.len() {
        return p.fail("trailing tokens after query");
    }
    Ok(())
}

pub fn is_well_formed<S: AsRef<str>>(tokens: &[S]) -> bool {
    check_masked_query(tokens).is_ok()
}

fn is_keyword(token: &str) -> bool {
    CLAUSE_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(token))
}

fn is_var(token: &str) -> bool {
    (token.starts_with('?') || token.starts_with('$')) && token.len() > 1
}

fn is_punct(token: &str) -> bool {
    matches!(
        token,
        "(" | ")" | "." | ";" | "," | "{" | "}" | "[" | "]" | "=" | "!=" | "<" | ">" | "<=" | ">=" | "&&" | "||" | "!"
            | "*" | "^"
    ) || token == OPEN_BRACE
        || token == CLOSE_BRACE
        || token == CARET
}

fn is_literal(token: &str) -> bool {
    crate::vocab::is_literal(token)
}

struct Parser<'a> {
    tokens: &'a [&'a str],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<&'a str> {
        self.tokens.get(self.pos + offset).copied()
    }

    fn at(&self, token: &str) -> bool {
        self.peek() == Some(token)
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.eq_ignore_ascii_case(kw))
    }

    fn fail<T>(&self, message: impl Into<String>) -> Parse<T> {
        Err(SyntaxError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, token: &str) -> Parse {
        if self.at(token) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {token:?}, found {:?}", self.peek()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Parse {
        if self.at_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {kw}, found {:?}", self.peek()))
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        let hit = self.at(token);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn query(&mut self) -> Parse {
        loop {
            if self.eat_kw("PREFIX") {
                self.any_term()?;
                self.any_term()?;
            } else if self.eat_kw("BASE") {
                self.any_term()?;
            } else {
                break;
            }
        }
        if self.at_kw("SELECT") {
            self.select_query()
        } else if self.eat_kw("ASK") {
            self.eat_kw("WHERE");
            self.group()
        } else {
            self.fail("expected SELECT or ASK")
        }
    }

    fn select_query(&mut self) -> Parse {
        self.expect_kw("SELECT")?;
        if !self.eat_kw("DISTINCT") {
            self.eat_kw("REDUCED");
        }
        if !self.eat("*") {
            let mut count = 0;
            loop {
                match self.peek() {
                    Some(t) if is_var(t) => self.pos += 1,
                    Some("(") => {
                        self.pos += 1;
                        self.expression()?;
                        self.expect_kw("AS")?;
                        self.var()?;
                        self.expect(")")?;
                    }
                    _ => break,
                }
                count += 1;
            }
            if count == 0 {
                return self.fail("empty projection");
            }
        }
        self.eat_kw("WHERE");
        self.group()?;
        self.solution_modifiers()
    }

    fn solution_modifiers(&mut self) -> Parse {
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            let start = self.pos;
            while self.peek().is_some_and(is_var) || self.at("(") {
                self.order_condition()?;
            }
            if self.pos == start {
                return self.fail("empty GROUP BY");
            }
        }
        if self.eat_kw("HAVING") {
            self.constraint()?;
        }
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            let start = self.pos;
            while self.at_kw("ASC") || self.at_kw("DESC") || self.at("(") || self.peek().is_some_and(is_var) {
                self.order_condition()?;
            }
            if self.pos == start {
                return self.fail("empty ORDER BY");
            }
        }
        loop {
            if self.eat_kw("LIMIT") || self.eat_kw("OFFSET") {
                match self.peek() {
                    Some(t) if t.bytes().all(|b| b.is_ascii_digit()) => self.pos += 1,
                    _ => return self.fail("LIMIT/OFFSET needs an integer"),
                }
            } else {
                return Ok(());
            }
        }
    }

    fn order_condition(&mut self) -> Parse {
        if self.eat_kw("ASC") || self.eat_kw("DESC") {
            self.expect("(")?;
            self.expression()?;
            return self.expect(")");
        }
        if self.eat("(") {
            self.expression()?;
            return self.expect(")");
        }
        self.var()
    }

    fn var(&mut self) -> Parse {
        match self.peek() {
            Some(t) if is_var(t) => {
                self.pos += 1;
                Ok(())
            }
            other => self.fail(format!("expected variable, found {other:?}")),
        }
    }

    fn group(&mut self) -> Parse {
        self.expect(OPEN_BRACE)?;
        if self.at_kw("SELECT") {
            self.select_query()?;
        } else {
            self.group_body()?;
        }
        self.expect(CLOSE_BRACE)
    }

    fn group_body(&mut self) -> Parse {
        loop {
            match self.peek() {
                None => return self.fail("unclosed group"),
                Some(CLOSE_BRACE) => return Ok(()),
                Some(t) if t.eq_ignore_ascii_case("FILTER") => {
                    self.pos += 1;
                    self.constraint()?;
                    self.eat(".");
                }
                Some(t) if t.eq_ignore_ascii_case("VALUES") => {
                    self.pos += 1;
                    self.values_block()?;
                    self.eat(".");
                }
                Some(t) if t.eq_ignore_ascii_case("OPTIONAL") || t.eq_ignore_ascii_case("MINUS") => {
                    self.pos += 1;
                    self.group()?;
                    self.eat(".");
                }
                Some(t) if t.eq_ignore_ascii_case("BIND") => {
                    self.pos += 1;
                    self.expect("(")?;
                    self.expression()?;
                    self.expect_kw("AS")?;
                    self.var()?;
                    self.expect(")")?;
                    self.eat(".");
                }
                Some(OPEN_BRACE) => {
                    self.group()?;
                    while self.eat_kw("UNION") {
                        self.group()?;
                    }
                    self.eat(".");
                }
                Some(_) => self.triples()?,
            }
        }
    }

    // subject verb object-list (';' verb object-list)* terminated by '.' or
    // the end of the group.
    fn triples(&mut self) -> Parse {
        self.term()?;
        loop {
            self.term()?;
            self.term()?;
            while self.eat(",") {
                self.term()?;
            }
            if self.eat(";") {
                if self.at(".") || self.at(CLOSE_BRACE) {
                    break;
                }
                continue;
            }
            break;
        }
        if self.eat(".") || self.at(CLOSE_BRACE) {
            Ok(())
        } else if self.peek().is_some_and(|t| {
            is_keyword(t) || t == OPEN_BRACE
        }) {
            // A following clause may start without a separating dot.
            Ok(())
        } else {
            self.fail(format!("triple not terminated, found {:?}", self.peek()))
        }
    }

    fn term(&mut self) -> Parse {
        match self.peek() {
            Some(t) if is_literal(t) => {
                self.pos += 1;
                self.literal_suffix()
            }
            Some(t) if is_keyword(t) || is_punct(t) => self.fail(format!("expected a term, found {t:?}")),
            Some(_) => {
                self.pos += 1;
                Ok(())
            }
            None => self.fail("expected a term, found end of query"),
        }
    }

    fn any_term(&mut self) -> Parse {
        match self.peek() {
            Some(t) if !is_punct(t) => {
                self.pos += 1;
                Ok(())
            }
            other => self.fail(format!("expected a name, found {other:?}")),
        }
    }

    // `"1.6" CARET CARET <...#float>` or `"x" @en`
    fn literal_suffix(&mut self) -> Parse {
        if self.at(CARET) && self.peek_at(1) == Some(CARET) {
            self.pos += 2;
            return self.any_term();
        }
        if self.peek().is_some_and(|t| t.starts_with('@') && t.len() > 1) {
            self.pos += 1;
        }
        Ok(())
    }

    fn constraint(&mut self) -> Parse {
        if self.eat("(") {
            self.expression()?;
            return self.expect(")");
        }
        // Builtin call such as `regex(?x, "a")`.
        match (self.peek(), self.peek_at(1)) {
            (Some(name), Some("(")) if !is_keyword(name) && !is_punct(name) => {
                self.pos += 2;
                if !self.at(")") {
                    self.expression()?;
                }
                self.expect(")")
            }
            _ => self.fail("FILTER needs a parenthesized constraint"),
        }
    }

    // Balanced run of expression tokens; stops before `)` or `AS` at depth 0.
    fn expression(&mut self) -> Parse {
        let start = self.pos;
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => return self.fail("unclosed parenthesis"),
                Some(")") if depth == 0 => break,
                Some(")") => depth -= 1,
                Some("(") => depth += 1,
                Some(t) if depth == 0 && t.eq_ignore_ascii_case("AS") => break,
                Some(t) if t == OPEN_BRACE || t == CLOSE_BRACE || t == "." || t == ";" => {
                    return self.fail(format!("{t:?} inside expression"))
                }
                Some(t) if is_keyword(t) && !t.eq_ignore_ascii_case("DISTINCT") => {
                    return self.fail(format!("clause keyword {t} inside expression"))
                }
                Some(_) => {}
            }
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("empty expression");
        }
        Ok(())
    }

    fn values_block(&mut self) -> Parse {
        if self.peek().is_some_and(is_var) {
            self.pos += 1;
            self.expect(OPEN_BRACE)?;
            while !self.at(CLOSE_BRACE) {
                self.data_value()?;
            }
            return self.expect(CLOSE_BRACE);
        }
        self.expect("(")?;
        let mut width = 0;
        while self.peek().is_some_and(is_var) {
            self.pos += 1;
            width += 1;
        }
        self.expect(")")?;
        self.expect(OPEN_BRACE)?;
        while self.eat("(") {
            for _ in 0..width {
                self.data_value()?;
            }
            self.expect(")")?;
        }
        self.expect(CLOSE_BRACE)
    }

    fn data_value(&mut self) -> Parse {
        match self.peek() {
            Some(t) if is_var(t) => self.fail("variable in VALUES data"),
            _ => self.term(),
        }
    }
}
