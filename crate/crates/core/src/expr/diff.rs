use super::{BinOp, Expression, Func, Node};

fn num(node: &Node) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        _ => None,
    }
}

fn add(a: Node, b: Node) -> Node {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Node::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Node::binary(BinOp::Add, a, b),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(v) => Node::Num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Node::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Node::binary(BinOp::Sub, a, b),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Node::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Node::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Node::binary(BinOp::Mul, a, b),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (num(&a), num(&b)) {
        (Some(x), _) if x == 0.0 => Node::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Node::binary(BinOp::Div, a, b),
    }
}

fn pow(a: Node, n: u32) -> Node {
    match (n, num(&a)) {
        (0, _) => Node::Num(1.0),
        (1, _) => a,
        (_, Some(x)) => Node::Num(x.powi(n as i32)),
        _ => Node::Pow(Box::new(a), n),
    }
}

/// Rebuilds a tree through the folding constructors.
fn fold(node: &Node) -> Node {
    match node {
        Node::Num(_) | Node::Var(_) => node.clone(),
        Node::Neg(a) => neg(fold(a)),
        Node::Binary(op, a, b) => {
            let (a, b) = (fold(a), fold(b));
            match op {
                BinOp::Add => add(a, b),
                BinOp::Sub => sub(a, b),
                BinOp::Mul => mul(a, b),
                BinOp::Div => div(a, b),
            }
        }
        Node::Pow(a, n) => pow(fold(a), *n),
        Node::Call(func, a) => Node::Call(*func, Box::new(fold(a))),
    }
}

fn d(node: &Node, var: usize) -> Node {
    match node {
        Node::Num(_) => Node::Num(0.0),
        Node::Var(i) => Node::Num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(d(a, var)),
        Node::Binary(op, a, b) => {
            let (da, db) = (d(a, var), d(b, var));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => sub(div(da, b.clone()), div(mul(a, db), pow(b, 2))),
            }
        }
        Node::Pow(a, n) => {
            let da = d(a, var);
            if num(&da) == Some(0.0) {
                return Node::Num(0.0);
            }
            mul(mul(Node::Num(*n as f64), pow((**a).clone(), n - 1)), da)
        }
        Node::Call(func, a) => {
            let da = d(a, var);
            if num(&da) == Some(0.0) {
                return Node::Num(0.0);
            }
            let a = (**a).clone();
            let outer = match func {
                Func::Sin => Node::Call(Func::Cos, Box::new(a)),
                Func::Cos => neg(Node::Call(Func::Sin, Box::new(a))),
                Func::Exp => Node::Call(Func::Exp, Box::new(a)),
                Func::Log => return div(da, a),
                Func::Sqrt => return div(da, mul(Node::Num(2.0), Node::Call(Func::Sqrt, Box::new(a)))),
            };
            mul(outer, da)
        }
    }
}

impl Expression {
    /// Symbolic partial derivative with respect to variable `index`, with
    /// constant folding of the trivial terms.
    pub fn derivative(&self, index: usize) -> Expression {
        let root = if self.depends_on(index) {
            fold(&d(&fold(self.root()), index))
        } else {
            Node::Num(0.0)
        };
        Expression::from_node(root, self.variables().to_vec())
    }
}
