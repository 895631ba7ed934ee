//! Closed-form arithmetic expressions in up to three named variables.
//!
//! Every user-supplied function in a scene config (direction fields, profiles,
//! curves, potentials) is an [`Expr`]. Expressions are parsed once, are
//! immutable afterwards, and can be evaluated and differentiated symbolically.

mod diff;
mod parser;
mod print;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parser::parse;

/// Maximum number of free variables an expression may declare.
pub const MAX_VARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Sech,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "sech" => Func::Sech,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree node. Variables are stored as indices into the owning
/// [`Expr`]'s variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected one of {}", .expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown function `{name}`")]
    UnknownFunction { name: String },
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    #[error("function `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("at most {MAX_VARS} variables may be declared, got {0}")]
    TooManyVariables(usize),
    #[error("invalid variable name `{0}`")]
    InvalidVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{op}` at operand {operand}")]
    Domain { op: &'static str, operand: f64 },
    #[error("expected {expected} argument(s), got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("`{op}` is not differentiable here")]
    NonDifferentiable { op: &'static str },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

/// A parsed expression together with its ordered variable list.
#[derive(Clone, PartialEq)]
pub struct Expr {
    root: Arc<Node>,
    vars: Arc<[String]>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?}; {})", self.vars, self)
    }
}

impl Expr {
    pub(crate) fn from_parts(root: Node, vars: Arc<[String]>) -> Self {
        Expr {
            root: Arc::new(root),
            vars,
        }
    }

    /// A constant expression over the given variables.
    pub fn constant(value: f64, vars: &[&str]) -> Result<Self, ParseError> {
        let vars = check_vars(vars)?;
        Ok(Expr::from_parts(Node::Num(value), vars))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// True when the tree references variable `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        node_depends_on(&self.root, index)
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.root, Node::Num(v) if v == 0.0)
    }

    /// Evaluate with positional arguments matching [`Expr::variables`].
    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        if args.len() != self.vars.len() {
            return Err(EvalError::Arity {
                expected: self.vars.len(),
                got: args.len(),
            });
        }
        eval_node(&self.root, args)
    }

    /// Evaluate with named bindings. Every declared variable must be bound.
    pub fn eval_map(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let mut args = [0.0; MAX_VARS];
        for (i, name) in self.vars.iter().enumerate() {
            args[i] = *bindings.get(name).ok_or(EvalError::Arity {
                expected: self.vars.len(),
                got: bindings.len(),
            })?;
        }
        eval_node(&self.root, &args[..self.vars.len()])
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn derivative(&self, var: &str) -> Result<Expr, DiffError> {
        let index = self
            .var_index(var)
            .ok_or_else(|| DiffError::UnknownVariable(var.to_string()))?;
        self.derivative_index(index)
    }

    pub fn derivative_index(&self, index: usize) -> Result<Expr, DiffError> {
        let root = diff::differentiate(&self.root, index)?;
        Ok(Expr::from_parts(root, self.vars.clone()))
    }

    /// Directional derivative `dir · ∇` over all declared variables.
    pub fn directional(&self, dir: &[Expr]) -> Result<Expr, DiffError> {
        let mut acc = Node::Num(0.0);
        for (i, d) in dir.iter().enumerate().take(self.vars.len()) {
            let part = diff::differentiate(&self.root, i)?;
            let term = diff::mul(rebind(d.root(), d.variables(), &self.vars)?, part);
            acc = diff::add(acc, term);
        }
        Ok(Expr::from_parts(acc, self.vars.clone()))
    }

    /// Build a new expression from a node over this expression's variables.
    pub fn with_root(&self, root: Node) -> Expr {
        Expr::from_parts(root, self.vars.clone())
    }

    /// Re-express this tree over a different variable list. Every variable
    /// referenced by the tree must appear (by name) in `vars`.
    pub fn rebind(&self, vars: &[&str]) -> Result<Expr, ParseError> {
        let new_vars = check_vars(vars)?;
        let root = rebind(&self.root, &self.vars, &new_vars).map_err(|e| match e {
            DiffError::UnknownVariable(name) => ParseError::UnknownVariable { name },
            DiffError::NonDifferentiable { op } => ParseError::UnknownVariable {
                name: op.to_string(),
            },
        })?;
        Ok(Expr::from_parts(root, new_vars))
    }

    /// `self + other`; `other` is re-expressed over this expression's variables.
    pub fn add(&self, other: &Expr) -> Result<Expr, DiffError> {
        Ok(self.with_root(diff::add((*self.root).clone(), rebind(other.root(), &other.vars, &self.vars)?)))
    }

    pub fn sub(&self, other: &Expr) -> Result<Expr, DiffError> {
        Ok(self.with_root(diff::sub((*self.root).clone(), rebind(other.root(), &other.vars, &self.vars)?)))
    }

    pub fn mul(&self, other: &Expr) -> Result<Expr, DiffError> {
        Ok(self.with_root(diff::mul((*self.root).clone(), rebind(other.root(), &other.vars, &self.vars)?)))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr, DiffError> {
        Ok(self.with_root(diff::div((*self.root).clone(), rebind(other.root(), &other.vars, &self.vars)?)))
    }

    /// The same tree with its variables renamed position by position.
    pub fn rename(&self, vars: &[&str]) -> Result<Expr, ParseError> {
        if vars.len() != self.vars.len() {
            return Err(ParseError::InvalidVariable(vars.join(",")));
        }
        Ok(Expr::from_parts((*self.root).clone(), check_vars(vars)?))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        node_size(&self.root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_node(f, &self.root, &self.vars)
    }
}

pub(crate) fn check_vars(vars: &[&str]) -> Result<Arc<[String]>, ParseError> {
    if vars.len() > MAX_VARS {
        return Err(ParseError::TooManyVariables(vars.len()));
    }
    for (i, v) in vars.iter().enumerate() {
        let mut chars = v.chars();
        let valid_start = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if !valid_start
            || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            || Func::from_name(v).is_some()
            || *v == "pow"
            || vars[..i].contains(v)
        {
            return Err(ParseError::InvalidVariable(v.to_string()));
        }
    }
    Ok(vars.iter().map(|s| s.to_string()).collect())
}

fn rebind(node: &Node, from: &[String], to: &[String]) -> Result<Node, DiffError> {
    Ok(match node {
        Node::Num(v) => Node::Num(*v),
        Node::Var(i) => {
            let name = &from[*i];
            let j = to
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| DiffError::UnknownVariable(name.clone()))?;
            Node::Var(j)
        }
        Node::Neg(a) => Node::Neg(Box::new(rebind(a, from, to)?)),
        Node::Bin(op, a, b) => Node::Bin(
            *op,
            Box::new(rebind(a, from, to)?),
            Box::new(rebind(b, from, to)?),
        ),
        Node::Call(f, a) => Node::Call(*f, Box::new(rebind(a, from, to)?)),
    })
}

fn node_depends_on(node: &Node, index: usize) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(i) => *i == index,
        Node::Neg(a) | Node::Call(_, a) => node_depends_on(a, index),
        Node::Bin(_, a, b) => node_depends_on(a, index) || node_depends_on(b, index),
    }
}

fn node_size(node: &Node) -> usize {
    match node {
        Node::Num(_) | Node::Var(_) => 1,
        Node::Neg(a) | Node::Call(_, a) => 1 + node_size(a),
        Node::Bin(_, a, b) => 1 + node_size(a) + node_size(b),
    }
}

#[inline]
fn finite(op: &'static str, operand: f64, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::Domain { op, operand })
    }
}

fn eval_node(node: &Node, args: &[f64]) -> Result<f64, EvalError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(i) => Ok(args[*i]),
        Node::Neg(a) => Ok(-eval_node(a, args)?),
        Node::Bin(op, a, b) => {
            let x = eval_node(a, args)?;
            let y = eval_node(b, args)?;
            match op {
                BinOp::Add => finite("+", x, x + y),
                BinOp::Sub => finite("-", x, x - y),
                BinOp::Mul => finite("*", x, x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(EvalError::Domain {
                            op: "/",
                            operand: y,
                        });
                    }
                    finite("/", y, x / y)
                }
                BinOp::Pow => pow(x, y),
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, args)?;
            apply(*f, x)
        }
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::Domain {
            op: "pow",
            operand: base,
        });
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::Domain {
            op: "pow",
            operand: base,
        });
    }
    let value = if exponent == 2.0 {
        base * base
    } else if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    finite("pow", base, value)
}

fn apply(f: Func, x: f64) -> Result<f64, EvalError> {
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Tan => finite("tan", x, x.tan()),
        Func::Tanh => Ok(x.tanh()),
        Func::Sech => Ok(sech(x)),
        Func::Exp => finite("exp", x, x.exp()),
        Func::Log => {
            if x <= 0.0 {
                Err(EvalError::Domain {
                    op: "log",
                    operand: x,
                })
            } else {
                Ok(x.ln())
            }
        }
        Func::Sqrt => {
            if x < 0.0 {
                Err(EvalError::Domain {
                    op: "sqrt",
                    operand: x,
                })
            } else {
                Ok(x.sqrt())
            }
        }
        Func::Abs => Ok(x.abs()),
    }
}

/// `1/cosh(x)` evaluated without overflow for large |x|.
fn sech(x: f64) -> f64 {
    let a = x.abs();
    let e = (-a).exp();
    2.0 * e / (1.0 + e * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str, vars: &[&str]) -> Expr {
        parse(src, vars).unwrap()
    }

    #[test]
    fn literal_zero() {
        let e = p("0", &[]);
        assert_eq!(*e.root(), Node::Num(0.0));
    }

    #[test]
    fn unary_minus_root() {
        let e = p("-(0.6+0.2*tanh(x))", &["x"]);
        assert!(matches!(e.root(), Node::Neg(_)));
    }

    #[test]
    fn basic_evaluation() {
        assert_eq!(p("exp(-x^2)", &["x"]).eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(p("x+y", &["x", "y"]).eval(&[1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(p("tanh(0)", &[]).eval(&[]).unwrap(), 0.0);
        // exp(-1) from an independent evaluation
        assert_eq!(
            p("exp(-x^2)", &["x"]).eval(&[1.0]).unwrap(),
            0.36787944117144233
        );
    }

    #[test]
    fn named_bindings() {
        let e = p("x*y - z", &["x", "y", "z"]);
        let mut b = HashMap::new();
        b.insert("x".to_string(), 2.0);
        b.insert("y".to_string(), 3.0);
        b.insert("z".to_string(), 1.0);
        assert_eq!(e.eval_map(&b).unwrap(), 5.0);
        b.remove("z");
        assert!(e.eval_map(&b).is_err());
    }

    #[test]
    fn domain_errors() {
        let e = p("log(x)", &["x"]);
        assert!(matches!(
            e.eval(&[0.0]),
            Err(EvalError::Domain { op: "log", .. })
        ));
        let e = p("sqrt(x)", &["x"]);
        assert!(matches!(
            e.eval(&[-1.0]),
            Err(EvalError::Domain { op: "sqrt", .. })
        ));
        let e = p("1/x", &["x"]);
        assert!(matches!(
            e.eval(&[0.0]),
            Err(EvalError::Domain { op: "/", .. })
        ));
        let e = p("exp(x)", &["x"]);
        assert!(e.eval(&[1000.0]).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus binds looser than ^
        assert_eq!(p("-2^2", &[]).eval(&[]).unwrap(), -4.0);
        // ^ is right associative
        assert_eq!(p("2^3^2", &[]).eval(&[]).unwrap(), 512.0);
        assert_eq!(p("2^-1", &[]).eval(&[]).unwrap(), 0.5);
        assert_eq!(p("1-2-3", &[]).eval(&[]).unwrap(), -4.0);
        assert_eq!(p("8/4/2", &[]).eval(&[]).unwrap(), 1.0);
        assert_eq!(p("2*3+4*5", &[]).eval(&[]).unwrap(), 26.0);
        assert_eq!(p("pow(2, 10)", &[]).eval(&[]).unwrap(), 1024.0);
        assert!((p("pi", &[]).eval(&[]).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!((p("e", &[]).eval(&[]).unwrap() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn sech_is_stable() {
        let e = p("sech(x)", &["x"]);
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        assert!(e.eval(&[800.0]).unwrap() == 0.0);
        assert!((e.eval(&[1.0]).unwrap() - 1.0 / 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let d = p("x^2", &["x"]).derivative("x").unwrap();
        assert_eq!(d.eval(&[3.0]).unwrap(), 6.0);
        let d = p("tanh(x)", &["x"]).derivative("x").unwrap();
        assert_eq!(d.eval(&[0.0]).unwrap(), 1.0);
        let e = p("-(0.6+0.2*tanh(x))", &["x"]);
        let d = e.derivative("x").unwrap();
        let h = 1e-6;
        let fd = (e.eval(&[h]).unwrap() - e.eval(&[-h]).unwrap()) / (2.0 * h);
        assert!((d.eval(&[0.0]).unwrap() + 0.2).abs() < 1e-15);
        assert!((fd + 0.2).abs() < 1e-8);
    }

    #[test]
    fn abs_is_rejected_by_derivative() {
        let e = p("abs(x) + 1", &["x"]);
        assert_eq!(
            e.derivative("x"),
            Err(DiffError::NonDifferentiable { op: "abs" })
        );
        // constant with respect to the differentiation variable
        let e = p("abs(y) * x", &["x", "y"]);
        assert_eq!(e.derivative("x").unwrap().eval(&[0.0, -2.0]).unwrap(), 2.0);
    }

    #[test]
    fn directional_derivative() {
        let phi = p("x^2*y", &["x", "y"]);
        let dir = [p("0.6", &[]), p("0.8", &[])];
        let d = phi.directional(&dir).unwrap();
        // 0.6*2xy + 0.8*x^2 at (1,2)
        assert!((d.eval(&[1.0, 2.0]).unwrap() - (0.6 * 4.0 + 0.8)).abs() < 1e-14);
    }

    #[test]
    fn rebind_reorders_variables() {
        let e = p("x - 2*y", &["x", "y"]);
        let r = e.rebind(&["y", "x", "z"]).unwrap();
        assert_eq!(r.eval(&[1.0, 5.0, 0.0]).unwrap(), 3.0);
        assert!(e.rebind(&["x"]).is_err());
    }
}
