//! Parser for the test-function mini-language.
//!
//! ```text
//! expr  := term ('+' term)*
//! term  := [number '*'] atom
//! atom  := 'chebyshev:' k | 'monomial:' k
//!        | 'gaussian:' center ',' width
//!        | 'resolvent-re:' x ',' y | 'resolvent-im:' x ',' y
//!        | 'cosh:' rate '(' expr ')' | 'poisson:' eta '(' expr ')'
//! ```
//!
//! Example: `0.5*chebyshev:2+1.0*monomial:4`.

use super::{poisson_smooth, TestFunction};
use crate::eigen::ComplexPoint;
use crate::error::{Error, Result};

pub fn parse_spec(input: &str) -> Result<TestFunction> {
    let mut p = Parser {
        src: input,
        pos: 0,
    };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parameter(format!(
            "bad test function spec {:?} at offset {}: {msg}",
            self.src, self.pos
        ))
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<TestFunction> {
        let mut terms = vec![self.term()?];
        while self.eat('+') {
            terms.push(self.term()?);
        }
        if terms.len() == 1 && terms[0].0.is_none() {
            return Ok(terms.pop().expect("one term").1);
        }
        Ok(TestFunction::combination(
            terms.into_iter().map(|(w, f)| (w.unwrap_or(1.0), f)),
        ))
    }

    fn term(&mut self) -> Result<(Option<f64>, TestFunction)> {
        self.skip_ws();
        let starts_numeric = self
            .rest()
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '.');
        let weight = if starts_numeric {
            let w = self.number()?;
            self.expect('*')?;
            Some(w)
        } else {
            None
        };
        Ok((weight, self.atom()?))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let bytes = self.rest().as_bytes();
        let mut end = 0;
        while end < bytes.len() {
            let c = bytes[end];
            let exponent_sign =
                (c == b'+' || c == b'-') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
            if c.is_ascii_digit()
                || c == b'.'
                || c == b'e'
                || c == b'E'
                || (c == b'-' && end == 0)
                || exponent_sign
            {
                end += 1;
            } else {
                break;
            }
        }
        let token = &self.rest()[..end];
        let value: f64 = token
            .parse()
            .map_err(|_| self.error(&format!("invalid number {token:?}")))?;
        if !value.is_finite() {
            return Err(self.error("number is not finite"));
        }
        self.pos += end;
        Ok(value)
    }

    fn integer(&mut self) -> Result<u32> {
        let v = self.number()?;
        if v < 0.0 || v.fract() != 0.0 || v > 512.0 {
            return Err(self.error("degree must be a non-negative integer up to 512"));
        }
        Ok(v as u32)
    }

    fn pair(&mut self) -> Result<(f64, f64)> {
        let a = self.number()?;
        self.expect(',')?;
        let b = self.number()?;
        Ok((a, b))
    }

    fn nested(&mut self) -> Result<TestFunction> {
        self.expect('(')?;
        let inner = self.expr()?;
        self.expect(')')?;
        Ok(inner)
    }

    fn atom(&mut self) -> Result<TestFunction> {
        self.skip_ws();
        let name_len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphabetic() || c == '-'))
            .unwrap_or(self.rest().len());
        let name = self.rest()[..name_len].to_ascii_lowercase();
        self.pos += name_len;
        self.expect(':')?;
        match name.as_str() {
            "chebyshev" => Ok(TestFunction::chebyshev(self.integer()?)),
            "monomial" => Ok(TestFunction::monomial(self.integer()?)),
            "gaussian" => {
                let (c, w) = self.pair()?;
                TestFunction::gaussian(c, w)
            }
            "resolvent-re" | "resolvent-im" => {
                let (x, y) = self.pair()?;
                let z = ComplexPoint::new(x, y)?;
                Ok(if name == "resolvent-re" {
                    TestFunction::resolvent_re(z)
                } else {
                    TestFunction::resolvent_im(z)
                })
            }
            "cosh" => {
                let rate = self.number()?;
                let base = self.nested()?;
                TestFunction::cosh_weighted(rate, base)
            }
            "poisson" => {
                let eta = self.number()?;
                let base = self.nested()?;
                poisson_smooth(base, eta)
            }
            "" => Err(self.error("missing function family")),
            other => Err(self.error(&format!("unknown function family {other:?}"))),
        }
    }
}
