use std::fmt;

use super::{BinOp, Node};

fn prec(n: &Node) -> u8 {
    match n {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
        _ => 5,
    }
}

fn op_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => " + ",
        BinOp::Sub => " - ",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Pow => "^",
    }
}

fn wrapped(f: &mut fmt::Formatter<'_>, n: &Node, vars: &[String], paren: bool) -> fmt::Result {
    if paren {
        f.write_str("(")?;
        write_node(f, n, vars)?;
        f.write_str(")")
    } else {
        write_node(f, n, vars)
    }
}

pub(super) fn write_node(f: &mut fmt::Formatter<'_>, n: &Node, vars: &[String]) -> fmt::Result {
    match n {
        Node::Num(v) => {
            if prec(n) == 3 {
                write!(f, "({v:?})")
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Neg(a) => {
            f.write_str("-")?;
            wrapped(f, a, vars, prec(a) < 4)
        }
        Node::Bin(op, a, b) => {
            let p = prec(n);
            let (lp, rp) = match op {
                // left associative: keep the tree shape of a right-nested operand
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => (prec(a) < p, prec(b) <= p),
                // right associative; a unary exponent can stay bare
                BinOp::Pow => (prec(a) <= p, prec(b) < 3),
            };
            wrapped(f, a, vars, lp)?;
            f.write_str(op_str(*op))?;
            wrapped(f, b, vars, rp)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, vars)?;
            f.write_str(")")
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn roundtrip(src: &str, vars: &[&str]) {
        let e = parse(src, vars).unwrap();
        let printed = e.to_string();
        let back = parse(&printed, vars).unwrap();
        assert_eq!(e.root(), back.root(), "{src} -> {printed}");
    }

    #[test]
    fn printing_roundtrips_structure() {
        for src in [
            "1 - (2 - 3)",
            "1 - 2 - 3",
            "a / (b / c)",
            "(a / b) / c",
            "a * (b * c)",
            "-(a + b)",
            "-a^2",
            "(-a)^2",
            "a^b^c",
            "(a^b)^c",
            "2^-a",
            "--a",
            "sin(a)*cos(b) + exp(-c^2)",
            "pow(a, 2) / sqrt(b)",
        ] {
            roundtrip(src, &["a", "b", "c"]);
        }
    }

    #[test]
    fn negative_literals_are_parenthesized() {
        let e = parse("x", &["x"]).unwrap();
        let n = e.with_root(crate::expr::Node::Num(-2.5));
        assert_eq!(n.to_string(), "(-2.5)");
    }
}
