use super::{BinOp, DiffError, Func, Node};

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn as_num(n: &Node) -> Option<f64> {
    match n {
        Node::Num(v) => Some(*v),
        _ => None,
    }
}

pub(super) fn add(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Node::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub(super) fn sub(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Node::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub(super) fn mul(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Node::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub(super) fn div(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(x), _) if x == 0.0 => num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Node::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(v) => num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    match as_num(&b) {
        Some(y) if y == 1.0 => a,
        Some(y) if y == 0.0 => num(1.0),
        _ => Node::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn depends(n: &Node, var: usize) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(i) => *i == var,
        Node::Neg(a) | Node::Call(_, a) => depends(a, var),
        Node::Bin(_, a, b) => depends(a, var) || depends(b, var),
    }
}

pub(super) fn differentiate(n: &Node, var: usize) -> Result<Node, DiffError> {
    if !depends(n, var) {
        return Ok(num(0.0));
    }
    Ok(match n {
        Node::Num(_) => num(0.0),
        Node::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(differentiate(a, var)?),
        Node::Bin(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => add(differentiate(a, var)?, differentiate(b, var)?),
                BinOp::Sub => sub(differentiate(a, var)?, differentiate(b, var)?),
                BinOp::Mul => add(
                    mul(differentiate(a, var)?, b.clone()),
                    mul(a.clone(), differentiate(b, var)?),
                ),
                BinOp::Div => {
                    let da = differentiate(a, var)?;
                    let db = differentiate(b, var)?;
                    if as_num(&db) == Some(0.0) {
                        div(da, b.clone())
                    } else {
                        div(
                            sub(mul(da, b.clone()), mul(a.clone(), db)),
                            pow(b.clone(), num(2.0)),
                        )
                    }
                }
                BinOp::Pow => {
                    if !depends(b, var) {
                        // d(a^c) = c a^(c-1) a'
                        let c = b.clone();
                        let c_minus_1 = sub(c.clone(), num(1.0));
                        mul(mul(c, pow(a.clone(), c_minus_1)), differentiate(a, var)?)
                    } else {
                        // d(a^b) = a^b (b' ln a + b a'/a)
                        let da = differentiate(a, var)?;
                        let db = differentiate(b, var)?;
                        let whole = pow(a.clone(), b.clone());
                        let t1 = mul(db, call(Func::Log, a.clone()));
                        let t2 = if as_num(&da) == Some(0.0) {
                            num(0.0)
                        } else {
                            div(mul(b.clone(), da), a.clone())
                        };
                        mul(whole, add(t1, t2))
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let inner = a.as_ref().clone();
            let da = differentiate(a, var)?;
            let outer = match f {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Tan => add(num(1.0), pow(call(Func::Tan, inner), num(2.0))),
                Func::Tanh => pow(call(Func::Sech, inner), num(2.0)),
                Func::Sech => neg(mul(
                    call(Func::Sech, inner.clone()),
                    call(Func::Tanh, inner),
                )),
                Func::Exp => call(Func::Exp, inner),
                Func::Log => div(num(1.0), inner),
                Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                Func::Abs => return Err(DiffError::NonDifferentiable { op: "abs" }),
            };
            mul(outer, da)
        }
    })
}
