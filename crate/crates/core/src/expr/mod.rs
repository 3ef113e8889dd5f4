//! Scalar expressions over named variables, evaluated over any [`Scalar`].
//!
//! Grammar, loosest first: `+ -`, `* /`, unary `-`, `^` with a non-negative
//! integer literal exponent. Functions: `sin cos exp log sqrt`.

mod diff;
mod parse;
mod tape;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::jet::Jet;
use crate::scalar::Scalar;

pub use parse::parse;
use tape::Tape;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable `{name}` at position {position}")]
    UnknownVariable { name: String, position: usize },
    #[error("exponent at position {position} must be a non-negative integer literal")]
    NonIntegerExponent { position: usize },
    #[error("domain error: {function} of leading value {value}")]
    Domain { function: &'static str, value: f64 },
    #[error("expected {expected} variable bindings, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Syntax tree node. Variables are indices into the owning expression's
/// variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn num(v: f64) -> Node {
        Node::Num(v)
    }

    pub fn binary(op: BinOp, a: Node, b: Node) -> Node {
        Node::Binary(op, Box::new(a), Box::new(b))
    }

    fn map_vars(&self, f: &impl Fn(usize) -> Node) -> Node {
        match self {
            Node::Num(v) => Node::Num(*v),
            Node::Var(i) => f(*i),
            Node::Neg(a) => Node::Neg(Box::new(a.map_vars(f))),
            Node::Binary(op, a, b) => Node::binary(*op, a.map_vars(f), b.map_vars(f)),
            Node::Pow(a, n) => Node::Pow(Box::new(a.map_vars(f)), *n),
            Node::Call(func, a) => Node::Call(*func, Box::new(a.map_vars(f))),
        }
    }
}

/// A parsed expression together with its declared variables, compiled to a
/// postfix tape for evaluation.
#[derive(Clone)]
pub struct Expression {
    root: Node,
    variables: Vec<String>,
    tape: Tape,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.variables == other.variables
    }
}

impl Expression {
    /// Wraps a tree whose variable indices refer to `variables`.
    pub fn from_node(root: Node, variables: Vec<String>) -> Expression {
        let tape = Tape::compile(&root);
        Expression {
            root,
            variables,
            tape,
        }
    }

    pub fn constant(value: f64, variables: Vec<String>) -> Expression {
        Expression::from_node(Node::Num(value), variables)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Whether the tree references variable `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        self.tape.uses(index)
    }

    /// Literal value if the tree is a bare number.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Re-expresses the tree over a new variable list, matching by name.
    pub fn rebind(&self, variables: &[String]) -> Result<Expression, ExprError> {
        let mut map = Vec::with_capacity(self.variables.len());
        for name in &self.variables {
            let idx = variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| ExprError::UnknownVariable {
                    name: name.clone(),
                    position: 0,
                })?;
            map.push(idx);
        }
        let root = self.root.map_vars(&|i| Node::Var(map[i]));
        Ok(Expression::from_node(root, variables.to_vec()))
    }

    /// Replaces every variable `i` by `replacements[i]`, whose indices refer
    /// to `variables`.
    pub fn substitute(&self, replacements: &[Node], variables: Vec<String>) -> Expression {
        assert_eq!(replacements.len(), self.variables.len());
        let root = self.root.map_vars(&|i| replacements[i].clone());
        Expression::from_node(root, variables)
    }

    /// Evaluates with one value per declared variable, in declaration order.
    pub fn eval<S: Scalar>(&self, values: &[S]) -> Result<S, ExprError> {
        if values.len() != self.variables.len() {
            return Err(ExprError::Arity {
                expected: self.variables.len(),
                got: values.len(),
            });
        }
        self.tape.run(values)
    }

    /// Evaluates with named bindings.
    pub fn eval_named<S: Scalar>(&self, bindings: &HashMap<&str, S>) -> Result<S, ExprError> {
        let values = self
            .variables
            .iter()
            .map(|v| {
                bindings
                    .get(v.as_str())
                    .cloned()
                    .ok_or_else(|| ExprError::Unbound(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.tape.run(&values)
    }

    /// Taylor expansion along bound jets, each truncated at `order`.
    pub fn eval_jet(
        &self,
        bindings: &HashMap<&str, Jet<f64>>,
        order: usize,
    ) -> Result<Jet<f64>, ExprError> {
        let truncated: HashMap<&str, Jet<f64>> = bindings
            .iter()
            .map(|(k, j)| (*k, j.truncate(order)))
            .collect();
        Ok(self.eval_named(&truncated)?.truncate(order))
    }

    /// `∂e/∂v` at a real point for each named `v`, one seeded evaluation each.
    pub fn gradient(
        &self,
        bindings: &HashMap<&str, f64>,
        wrt: &[&str],
    ) -> Result<Vec<f64>, ExprError> {
        let values = self
            .variables
            .iter()
            .map(|v| {
                bindings
                    .get(v.as_str())
                    .copied()
                    .ok_or_else(|| ExprError::Unbound(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let idx = wrt
            .iter()
            .map(|w| {
                self.variable_index(w)
                    .ok_or_else(|| ExprError::Unbound(w.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        partials(self, &values, &idx)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.variables)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, vars: &[String]) -> fmt::Result {
    match node {
        Node::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            write!(f, "(")?;
            write_node(f, a, vars)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, b, vars)?;
            write!(f, ")")
        }
        Node::Pow(a, n) => {
            write_node(f, a, vars)?;
            write!(f, "^{n}")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
    }
}

/// `∂e/∂vᵢ` for each index in `wrt`, evaluated along `values`.
///
/// `S` may itself be a jet, in which case the partials come back as time
/// series along the same parameter.
pub fn partials<S: Scalar>(
    e: &Expression,
    values: &[S],
    wrt: &[usize],
) -> Result<Vec<S>, ExprError> {
    let mut seeded: Vec<Jet<S>> = values.iter().cloned().map(Jet::constant).collect();
    let mut out = Vec::with_capacity(wrt.len());
    for &i in wrt {
        if !e.depends_on(i) {
            out.push(S::zero());
            continue;
        }
        seeded[i] = Jet::variable(values[i].clone(), 1);
        out.push(e.eval(&seeded)?.coeff(1));
        seeded[i] = Jet::constant(values[i].clone());
    }
    Ok(out)
}

/// Value and gradient of `e` restricted to `wrt`, together with the Hessian
/// rows for `wrt` applied to `direction`: returns `(∂e/∂vᵢ, Σⱼ ∂²e/∂vᵢ∂vⱼ dⱼ)`.
pub fn gradient_and_hessian_vector<S: Scalar>(
    e: &Expression,
    values: &[S],
    wrt: &[usize],
    direction: &[S],
) -> Result<(Vec<S>, Vec<S>), ExprError> {
    let inner: Vec<Jet<S>> = values
        .iter()
        .zip(direction)
        .map(|(v, d)| Jet::from_coeffs([v.clone(), d.clone()]))
        .collect();
    let partial = partials(e, &inner, wrt)?;
    Ok(partial
        .into_iter()
        .map(|p| (p.coeff(0), p.coeff(1)))
        .unzip())
}
