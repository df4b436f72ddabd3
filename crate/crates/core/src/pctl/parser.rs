//! Recursive-descent parser for the property language.
//!
//! ```text
//! prop  := "P" ( "=?" | CMP NUMBER ) "[" path "]"
//! path  := "X" sf | sf "U" ("<=" INT)? sf | "F" ("<=" INT)? sf
//!        | "G" ("<=" INT)? sf | "SEQ" "(" sf "," sf ")"
//! sf    := "true" | "false" | LABEL | "!" sf | sf "&" sf | sf "|" sf | "(" sf ")"
//! ```
//!
//! `!` binds tighter than `&`, which binds tighter than `|`. Labels are
//! double-quoted.

use super::ast::{Comparator, PathFormula, ProbBound, Property, StateFormula};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Label(String),
    Number(String),
    Cmp(Comparator),
    Query,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Bang,
    Amp,
    Pipe,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Label(s) => format!("label \"{s}\""),
            Tok::Number(s) => format!("number {s}"),
            Tok::Cmp(c) => format!("`{}`", c.symbol()),
            Tok::Query => "`=?`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |nl| {
        before[nl + 1..].chars().count()
    }) + 1;
    (line, column)
}

fn syntax(text: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = position(text, offset);
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        match c {
            c if c.is_ascii_whitespace() => i += 1,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let cmp = match (c, eq) {
                    (b'<', false) => Comparator::Lt,
                    (b'<', true) => Comparator::Le,
                    (_, false) => Comparator::Gt,
                    (_, true) => Comparator::Ge,
                };
                i += if eq { 2 } else { 1 };
                out.push(Token {
                    tok: Tok::Cmp(cmp),
                    offset: start,
                });
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'?') {
                    i += 2;
                    out.push(Token {
                        tok: Tok::Query,
                        offset: start,
                    });
                } else {
                    return Err(syntax(text, start, "expected `=?`"));
                }
            }
            b'"' => {
                let end = text[i + 1..]
                    .find('"')
                    .ok_or_else(|| syntax(text, start, "unterminated label"))?;
                let label = &text[i + 1..i + 1 + end];
                if label.is_empty() {
                    return Err(syntax(text, start, "empty label"));
                }
                out.push(Token {
                    tok: Tok::Label(label.to_string()),
                    offset: start,
                });
                i += end + 2;
            }
            c if c.is_ascii_digit() || c == b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                        i += 1;
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                out.push(Token {
                    tok: Tok::Number(text[start..i].to_string()),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(text, start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> Error {
        syntax(
            self.text,
            self.offset(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn property(&mut self) -> Result<Property> {
        if !self.is_ident("P") {
            return Err(self.error("`P`"));
        }
        self.bump();
        let bound = match self.bump() {
            Tok::Query => ProbBound::Query,
            Tok::Cmp(c) => {
                let at = self.offset();
                let threshold = match self.bump() {
                    Tok::Number(n) => n
                        .parse::<f64>()
                        .map_err(|_| syntax(self.text, at, format!("malformed number {n}")))?,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("a probability threshold"));
                    }
                };
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::Semantic(format!(
                        "threshold {threshold} is outside [0, 1]"
                    )));
                }
                ProbBound::Compare(c, threshold)
            }
            _ => {
                self.pos -= 1;
                return Err(self.error("`=?` or a comparison"));
            }
        };
        self.expect(Tok::LBracket, "`[`")?;
        let path = self.path()?;
        if self.is_ident("U") {
            return Err(syntax(
                self.text,
                self.offset(),
                "`U` is non-associative; parenthesize operands",
            ));
        }
        self.expect(Tok::RBracket, "`]`")?;
        if *self.peek() != Tok::Eof {
            return Err(self.error("end of input"));
        }
        Ok(Property { bound, path })
    }

    fn step_bound(&mut self) -> Result<Option<u64>> {
        match self.peek() {
            Tok::Cmp(Comparator::Le) => {
                self.bump();
                let at = self.offset();
                match self.bump() {
                    Tok::Number(n) => n
                        .parse::<u64>()
                        .map(Some)
                        .map_err(|_| syntax(self.text, at, format!("step bound {n} is not a non-negative integer"))),
                    _ => {
                        self.pos -= 1;
                        Err(self.error("an integer step bound"))
                    }
                }
            }
            Tok::Cmp(_) => Err(syntax(self.text, self.offset(), "step bounds use `<=`")),
            _ => Ok(None),
        }
    }

    fn path(&mut self) -> Result<PathFormula> {
        if let Tok::Ident(word) = self.peek().clone() {
            match word.as_str() {
                "X" => {
                    self.bump();
                    return Ok(PathFormula::Next(self.state_formula()?));
                }
                "F" => {
                    self.bump();
                    let bound = self.step_bound()?;
                    let target = self.state_formula()?;
                    return Ok(PathFormula::Eventually { target, bound });
                }
                "G" => {
                    self.bump();
                    let bound = self.step_bound()?;
                    let invariant = self.state_formula()?;
                    return Ok(PathFormula::Globally { invariant, bound });
                }
                "SEQ" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let first = self.state_formula()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let second = self.state_formula()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(PathFormula::Seq(first, second));
                }
                _ => {}
            }
        }
        let left = self.state_formula()?;
        if !self.is_ident("U") {
            return Err(self.error("`U` or a path operator"));
        }
        self.bump();
        let bound = self.step_bound()?;
        let right = self.state_formula()?;
        Ok(PathFormula::Until { left, right, bound })
    }

    fn state_formula(&mut self) -> Result<StateFormula> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = StateFormula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<StateFormula> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = StateFormula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StateFormula> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(StateFormula::not(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<StateFormula> {
        match self.peek().clone() {
            Tok::Label(l) => {
                self.bump();
                Ok(StateFormula::Label(l))
            }
            Tok::LParen => {
                self.bump();
                let f = self.state_formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(w) if w == "true" => {
                self.bump();
                Ok(StateFormula::True)
            }
            Tok::Ident(w) if w == "false" => {
                self.bump();
                Ok(StateFormula::False)
            }
            Tok::Ident(w) if w == "P" => Err(Error::Semantic(
                "probability operators may only appear at the top level".into(),
            )),
            Tok::Ident(w) if !matches!(w.as_str(), "X" | "U" | "F" | "G" | "SEQ") => {
                Err(syntax(
                    self.text,
                    self.offset(),
                    format!("unquoted identifier `{w}`; labels must be double-quoted"),
                ))
            }
            _ => Err(self.error("a state formula")),
        }
    }
}

/// Parses a property such as `P=? [ F "goal" ]` or `P<=0.01 [ G<=100 !"crash" ]`.
pub fn parse_property(text: &str) -> Result<Property> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        text,
        tokens,
        pos: 0,
    };
    parser.property()
}

#[cfg(test)]
mod tests {
    use super::*;
    use StateFormula as S;

    #[test]
    fn eventually_query() {
        let p = parse_property(r#"P=? [ F "crossed" ]"#).unwrap();
        assert_eq!(
            p,
            Property::query(PathFormula::Eventually {
                target: S::label("crossed"),
                bound: None
            })
        );
    }

    #[test]
    fn threshold_property() {
        let p = parse_property(r#"P<=0.01 [ F "collision" ]"#).unwrap();
        assert_eq!(p.bound, ProbBound::Compare(Comparator::Le, 0.01));
        assert_eq!(
            p.path,
            PathFormula::Eventually {
                target: S::label("collision"),
                bound: None
            }
        );
    }

    #[test]
    fn bounded_globally() {
        let p = parse_property(r#"P=? [ G<=100 !"collision" ]"#).unwrap();
        assert_eq!(
            p.path,
            PathFormula::Globally {
                invariant: S::not(S::label("collision")),
                bound: Some(100)
            }
        );
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_property(r#"P>=0.5[F<=3"a"&!"b"|"c"]"#).unwrap();
        let b = parse_property("  P >= 0.5 [ F <= 3 \"a\" & ! \"b\" | \"c\" ]  ").unwrap();
        assert_eq!(a, b);
        // precedence: ! > & > |
        assert_eq!(
            a.path,
            PathFormula::Eventually {
                target: S::or(S::and(S::label("a"), S::not(S::label("b"))), S::label("c")),
                bound: Some(3)
            }
        );
    }

    #[test]
    fn until_next_seq() {
        let p = parse_property(r#"P=? [ ("a" | "b") U<=4 "c" ]"#).unwrap();
        assert_eq!(
            p.path,
            PathFormula::Until {
                left: S::or(S::label("a"), S::label("b")),
                right: S::label("c"),
                bound: Some(4)
            }
        );
        let p = parse_property(r#"P>0 [ X true ]"#).unwrap();
        assert_eq!(p.path, PathFormula::Next(S::True));
        let p = parse_property(r#"P=? [ SEQ("passenger", "gas_station") ]"#).unwrap();
        assert_eq!(p.path, PathFormula::Seq(S::label("passenger"), S::label("gas_station")));
    }

    #[test]
    fn display_reparses() {
        for text in [
            r#"P=? [ G<=100 !"collision" ]"#,
            r#"P<=0.25 [ ("a" & !"b") U "c" ]"#,
            r#"P=? [ SEQ("a", "b" | false) ]"#,
            r#"P>0.5 [ X "a" ]"#,
        ] {
            let p = parse_property(text).unwrap();
            assert_eq!(parse_property(&p.to_string()).unwrap(), p);
        }
    }

    #[test]
    fn errors() {
        let err = parse_property(r#"P=? [ F "a" "#).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 13, .. }), "{err}");
        assert!(matches!(
            parse_property(r#"P<=1.5 [ F "a" ]"#),
            Err(Error::Semantic(_))
        ));
        assert!(matches!(
            parse_property(r#"P=? [ F P=? [ F "a" ] ]"#),
            Err(Error::Semantic(_))
        ));
        assert!(matches!(
            parse_property(r#"P=? [ "a" U "b" U "c" ]"#),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_property(r#"P=? [ F goal ]"#),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_property(r#"P=? [ F<=2.5 "a" ]"#),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(parse_property("P=? [ F \"a ]"), Err(Error::Syntax { .. })));
        let err = parse_property("P=? [\n F # ]").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, column: 4, .. }), "{err}");
    }
}
