use std::sync::Arc;

use super::{check_vars, BinOp, Expr, Func, Node, ParseError};

const MAX_DEPTH: usize = 200;

/// Parse `src` as an expression in the declared variables.
///
/// Declared variable names shadow the constants `pi` and `e`.
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let vars = check_vars(vars)?;
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        vars: vars.clone(),
        depth: 0,
    };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(Expr::from_parts(node, vars))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: Arc<[String]>,
    depth: usize,
}

impl Parser<'_> {
    fn syntax(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
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

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax(&["shallower nesting"]));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = if self.eat(b'-') {
            Node::Neg(Box::new(self.unary()?))
        } else if self.eat(b'+') {
            self.unary()?
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax(&[")"]));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.syntax(&["number", "identifier", "("])),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - b
        };
        let mut p = self.pos;
        let mut n = digits(&mut p);
        if p < s.len() && s[p] == b'.' {
            p += 1;
            n += digits(&mut p);
        }
        if n == 0 {
            return Err(self.syntax(&["digit"]));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            // A bare trailing `e` is left for the caller (e.g. `2e` is a syntax error).
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii digits");
        let value: f64 = text.parse().map_err(|_| self.syntax(&["number"]))?;
        if !value.is_finite() {
            return Err(self.syntax(&["finite number"]));
        }
        self.pos = p;
        Ok(Node::Num(value))
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");

        if self.peek() == Some(b'(') {
            let at = self.pos;
            self.pos += 1;
            let func = Func::from_name(name);
            if func.is_none() && name != "pow" {
                return Err(ParseError::UnknownFunction {
                    name: name.to_string(),
                });
            }
            let mut args = Vec::new();
            if !self.eat(b')') {
                loop {
                    args.push(self.expr()?);
                    if self.eat(b',') {
                        continue;
                    }
                    if self.eat(b')') {
                        break;
                    }
                    return Err(self.syntax(&[",", ")"]));
                }
            }
            let expected = if func.is_some() { 1 } else { 2 };
            if args.len() != expected {
                self.pos = at;
                return Err(ParseError::Arity {
                    name: name.to_string(),
                    expected,
                    got: args.len(),
                });
            }
            let mut args = args.into_iter();
            let a = Box::new(args.next().expect("arity checked"));
            return Ok(match func {
                Some(f) => Node::Call(f, a),
                None => Node::Bin(BinOp::Pow, a, Box::new(args.next().expect("arity checked"))),
            });
        }

        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(Node::Var(i));
        }
        match name {
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            _ => Err(ParseError::UnknownVariable {
                name: name.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_error_offset() {
        match parse("1 + * 2", &[]) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("(x", &["x"]) {
            Err(ParseError::Syntax { offset, expected }) => {
                assert_eq!(offset, 2);
                assert_eq!(expected, vec![")".to_string()]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x y", &["x", "y"]), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("", &[]), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_names() {
        assert_eq!(
            parse("foo(x)", &["x"]),
            Err(ParseError::UnknownFunction { name: "foo".into() })
        );
        assert_eq!(
            parse("x + w", &["x"]),
            Err(ParseError::UnknownVariable { name: "w".into() })
        );
        assert!(matches!(parse("sin(1, 2)", &[]), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("pow(1)", &[]), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn variable_limits() {
        assert!(matches!(
            parse("a", &["a", "b", "c", "d"]),
            Err(ParseError::TooManyVariables(4))
        ));
        assert!(matches!(parse("1", &["sin"]), Err(ParseError::InvalidVariable(_))));
        assert!(matches!(parse("1", &["x", "x"]), Err(ParseError::InvalidVariable(_))));
    }

    #[test]
    fn declared_variable_shadows_constant() {
        let e = parse("e + 1", &["e"]).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 3.0);
    }

    #[test]
    fn number_forms() {
        assert_eq!(parse("1e3", &[]).unwrap().eval(&[]).unwrap(), 1000.0);
        assert_eq!(parse(".5", &[]).unwrap().eval(&[]).unwrap(), 0.5);
        assert_eq!(parse("2.5E-1", &[]).unwrap().eval(&[]).unwrap(), 0.25);
        assert!(parse("1e999", &[]).is_err());
        assert!(parse(".", &[]).is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("{}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse(&src, &[]).is_err());
        let src = "-".repeat(5000) + "1";
        assert!(parse(&src, &[]).is_err());
    }
}
