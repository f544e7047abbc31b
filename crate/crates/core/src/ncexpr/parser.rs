//! Recursive-descent parser.
//!
//! ```text
//! input   := header? expr
//! header  := "vars" name+ ";"
//! expr    := term (("+" | "-") term)*
//! term    := unary ("*" unary)*
//! unary   := "-" unary | postfix
//! postfix := primary ("^-1" | "^(-1)")*
//! primary := number | number "i" | "i" | var | "inv(" expr ")" | "adj(" expr ")" | "(" expr ")"
//! var     := "x" digits | declared name
//! ```
//!
//! `a - b` parses as `a + (-b)`.

use super::{Expr, ExprRef};
use crate::error::{Error, Result};
use crate::numkernel::C64;

/// Parses `text` over variables `x1..x{g}`, honouring a leading
/// `vars a b c;` header that names `x1, x2, x3`.
pub fn parse(text: &str, g: usize) -> Result<ExprRef> {
    let (names, body, offset) = split_header(text)?;
    Parser::new(body, offset, g, &names).parse_all()
}

/// Parses with externally declared variable names (no header expected).
pub fn parse_with_vars(text: &str, g: usize, names: &[String]) -> Result<ExprRef> {
    Parser::new(text, 0, g, names).parse_all()
}

/// Splits an optional `vars ...;` header. Returns the declared names, the
/// remaining text and its byte offset in `text`.
pub fn split_header(text: &str) -> Result<(Vec<String>, &str, usize)> {
    let trimmed = text.trim_start();
    let lead = text.len() - trimmed.len();
    let is_header = trimmed
        .strip_prefix("vars")
        .map(|rest| rest.starts_with(|c: char| c.is_whitespace()))
        .unwrap_or(false);
    if !is_header {
        return Ok((vec![], text, 0));
    }
    let end = trimmed.find(';').ok_or(Error::Parse {
        pos: lead,
        msg: "variable header must end with `;`".into(),
    })?;
    let names: Vec<String> = trimmed[4..end]
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    for (i, n) in names.iter().enumerate() {
        let single_letter = n.chars().count() == 1 && n.chars().all(|c| c.is_ascii_alphabetic());
        if !single_letter || n == "i" {
            return Err(Error::Parse {
                pos: lead,
                msg: format!("variable alias `{n}` must be a single letter other than `i`"),
            });
        }
        if names[..i].contains(n) {
            return Err(Error::Parse {
                pos: lead,
                msg: format!("variable alias `{n}` declared twice"),
            });
        }
    }
    let body_start = lead + end + 1;
    Ok((names, &text[body_start..], body_start))
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    offset: usize,
    g: usize,
    names: &'a [String],
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, offset: usize, g: usize, names: &'a [String]) -> Self {
        Parser {
            src: text.as_bytes(),
            text,
            pos: 0,
            offset,
            g,
            names,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.offset + self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn parse_all(mut self) -> Result<ExprRef> {
        if self.names.len() > self.g {
            return self.err(format!(
                "{} variable names declared but only {} variables",
                self.names.len(),
                self.g
            ));
        }
        let e = self.expr()?;
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<ExprRef> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::add(&lhs, &rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::sub(&lhs, &rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ExprRef> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            let rhs = self.unary()?;
            lhs = Expr::mul(&lhs, &rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprRef> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::neg(&inner));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<ExprRef> {
        let mut e = self.primary()?;
        while self.eat(b'^') {
            let parenthesized = self.eat(b'(');
            if !(self.eat(b'-') && self.peek() == Some(b'1')) {
                return self.err("only the exponent -1 is supported");
            }
            self.pos += 1;
            if self
                .src
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
            {
                return self.err("only the exponent -1 is supported");
            }
            if parenthesized {
                self.expect(b')')?;
            }
            e = Expr::inv(&e);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<ExprRef> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<ExprRef> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let literal = &self.text[start..self.pos];
        let value: f64 = match literal.parse() {
            Ok(v) => v,
            Err(_) => {
                self.pos = start;
                return self.err(format!("malformed number `{literal}`"));
            }
        };
        if self.src.get(self.pos) == Some(&b'i') && !self.ident_char_at(self.pos + 1) {
            self.pos += 1;
            return Ok(Expr::scalar(C64::new(0.0, value)));
        }
        if self.ident_char_at(self.pos) {
            return self.err("a number cannot be followed by a name; use `*`");
        }
        Ok(Expr::scalar(C64::new(value, 0.0)))
    }

    fn ident_char_at(&self, pos: usize) -> bool {
        self.src
            .get(pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
    }

    fn identifier(&mut self) -> Result<ExprRef> {
        let start = self.pos;
        while self.ident_char_at(self.pos) {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        if name == "inv" || name == "adj" {
            if self.peek() != Some(b'(') {
                return self.err(format!("`{name}` must be followed by `(`"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(if name == "inv" {
                Expr::inv(&arg)
            } else {
                Expr::adj(&arg)
            });
        }
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(Expr::var(i + 1));
        }
        if name == "i" {
            return Ok(Expr::scalar(C64::new(0.0, 1.0)));
        }
        if let Some(index) = name.strip_prefix('x') {
            if !index.is_empty()
                && index.bytes().all(|b| b.is_ascii_digit())
                && !index.starts_with('0')
            {
                if let Ok(i) = index.parse::<usize>() {
                    if i <= self.g {
                        return Ok(Expr::var(i));
                    }
                }
            }
        }
        Err(Error::UnknownVariable {
            name: name.to_string(),
            pos: self.offset + start,
        })
    }
}
