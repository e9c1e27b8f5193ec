//! Recursive-descent parser for the user-facing infix grammar.
//!
//! numbers (decimal, scientific notation allowed), coordinates `x1..xn`
//! (aliases `x`, `y`, `z` for n <= 3), `omega`, operators `+ - * / ^`
//! (integer exponents only), functions `sin cos exp bump`, parentheses.
//! Anti-derivative nodes are internal and not parseable here; they only
//! appear in the canonical s-expression format.

use super::Expression;
use crate::error::ParseError;

pub fn parse(source: &str, dimension: usize) -> Result<Expression, ParseError> {
    let mut p = Parser { src: source.as_bytes(), pos: 0, dim: dimension };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ParseError::Syntax {
            pos: p.pos,
            message: format!("unexpected `{}`", p.src[p.pos] as char),
        });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = Expression::sum(acc, rhs);
                }
                b'-' => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = Expression::sub(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.unary()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = Expression::product(acc, rhs);
                }
                b'/' => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = Expression::quotient(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expression::neg(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let k = self.exponent()?;
            return Ok(Expression::int_pow(base, k));
        }
        Ok(base)
    }

    /// Exponent: an optionally negated integer literal, possibly in parens.
    fn exponent(&mut self) -> Result<i32, ParseError> {
        let parens = self.peek() == Some(b'(');
        if parens {
            self.pos += 1;
        }
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        if self.pos == digits_start {
            return Err(ParseError::Syntax { pos: start, message: "expected integer exponent".into() });
        }
        if lit.contains('.') {
            return Err(ParseError::NonIntegerExponent { pos: start, literal: lit });
        }
        let k: i32 = lit
            .parse()
            .map_err(|_| ParseError::NonIntegerExponent { pos: start, literal: lit.clone() })?;
        if parens {
            if self.peek() != Some(b')') {
                return Err(ParseError::Syntax { pos: self.pos, message: "expected `)`".into() });
            }
            self.pos += 1;
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            None => Err(ParseError::Syntax { pos: self.pos, message: "unexpected end of input".into() }),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(ParseError::Syntax { pos: self.pos, message: "expected `)`".into() });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(ParseError::Syntax {
                pos: self.pos,
                message: format!("unexpected `{}`", c as char),
            }),
        }
    }

    fn number(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // scientific notation
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // `e` belonged to something else
            }
        }
        let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        lit.parse::<f64>().map(Expression::constant).map_err(|_| ParseError::Syntax {
            pos: start,
            message: format!("bad number `{lit}`"),
        })
    }

    fn identifier(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        match name.as_str() {
            "omega" => Ok(Expression::omega()),
            "sin" | "cos" | "exp" | "bump" => {
                if self.peek() != Some(b'(') {
                    return Err(ParseError::Syntax {
                        pos: self.pos,
                        message: format!("expected `(` after `{name}`"),
                    });
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(ParseError::Syntax { pos: self.pos, message: "expected `)`".into() });
                }
                self.pos += 1;
                Ok(match name.as_str() {
                    "sin" => Expression::sin(arg),
                    "cos" => Expression::cos(arg),
                    "exp" => Expression::exp(arg),
                    _ => Expression::bump(arg),
                })
            }
            "x" | "y" | "z" if self.dim <= 3 => {
                let idx = match name.as_str() {
                    "x" => 1,
                    "y" => 2,
                    _ => 3,
                };
                if idx > self.dim {
                    return Err(ParseError::CoordinateOutOfRange {
                        pos: start,
                        index: idx,
                        dimension: self.dim,
                    });
                }
                Ok(Expression::coord(idx - 1))
            }
            _ => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx == 0 || idx > self.dim {
                            return Err(ParseError::CoordinateOutOfRange {
                                pos: start,
                                index: idx,
                                dimension: self.dim,
                            });
                        }
                        return Ok(Expression::coord(idx - 1));
                    }
                }
                Err(ParseError::UnknownIdentifier { pos: start, name })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ParseError;

    #[test]
    fn grammar_examples() {
        let e = parse("omega^2*sin(omega*x)", 1).unwrap();
        assert_eq!(e.canonical(), "(* (^ omega 2) (sin (* omega x1)))");

        let e = parse("bump(x)+1", 1).unwrap();
        assert_eq!(e.canonical(), "(+ (bump x1) 1.0000000000000000e0)");
    }

    #[test]
    fn rejects_non_integer_exponent() {
        let err = parse("x^1.5", 1).unwrap_err();
        assert!(matches!(err, ParseError::NonIntegerExponent { .. }));
    }

    #[test]
    fn rejects_unknown_identifier_and_bad_coordinate() {
        assert!(matches!(parse("foo(x)", 1).unwrap_err(), ParseError::UnknownIdentifier { .. }));
        assert!(matches!(
            parse("x2+1", 1).unwrap_err(),
            ParseError::CoordinateOutOfRange { index: 2, dimension: 1, .. }
        ));
        assert!(matches!(
            parse("y", 1).unwrap_err(),
            ParseError::CoordinateOutOfRange { index: 2, dimension: 1, .. }
        ));
    }

    #[test]
    fn negative_exponent_and_unary_minus() {
        let e = parse("omega^-1*sin(omega*x)", 1).unwrap();
        assert_eq!(e.canonical(), "(* (^ omega -1) (sin (* omega x1)))");
        let e = parse("-x", 1).unwrap();
        assert_eq!(e.canonical(), "(* -1.0000000000000000e0 x1)");
        let e = parse("omega^(-2)", 1).unwrap();
        assert_eq!(e.canonical(), "(^ omega -2)");
    }

    #[test]
    fn subtraction_desugars() {
        let e = parse("1-x", 1).unwrap();
        assert_eq!(
            e.canonical(),
            "(+ 1.0000000000000000e0 (* -1.0000000000000000e0 x1))"
        );
    }

    #[test]
    fn aliases_in_two_dimensions() {
        let e = parse("sin(x)*bump(y)", 2).unwrap();
        assert_eq!(e.canonical(), "(* (sin x1) (bump x2))");
    }

    #[test]
    fn round_trips_through_canonical() {
        for src in ["omega^2*sin(omega*x)", "bump(x)+1", "1/(1+x^2)", "exp(-x)*cos(2*x)"] {
            let e = parse(src, 1).unwrap();
            let back = Expression::from_canonical(&e.canonical(), 1).unwrap();
            assert_eq!(back, e, "round trip failed for {src}");
        }
    }
}
