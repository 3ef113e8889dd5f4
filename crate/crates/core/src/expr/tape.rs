use super::{BinOp, ExprError, Func, Node};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Bin(BinOp),
    Pow(u32),
    Call(Func),
}

/// Postfix form of a tree, evaluated with an explicit stack.
#[derive(Debug, Clone)]
pub(super) struct Tape {
    ops: Vec<Op>,
    used: Vec<usize>,
}

impl Tape {
    pub(super) fn compile(root: &Node) -> Tape {
        let mut ops = Vec::new();
        emit(root, &mut ops);
        let mut used: Vec<usize> = ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(*i),
                _ => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        Tape { ops, used }
    }

    pub(super) fn uses(&self, index: usize) -> bool {
        self.used.binary_search(&index).is_ok()
    }

    pub(super) fn run<S: Scalar>(&self, values: &[S]) -> Result<S, ExprError> {
        let mut stack: Vec<S> = Vec::with_capacity(8);
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(S::from_f64(v)),
                Op::Var(i) => stack.push(values[i].clone()),
                Op::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(-a);
                }
                Op::Bin(bin) => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    stack.push(match bin {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        BinOp::Div => {
                            if b.value() == 0.0 {
                                return Err(ExprError::Domain {
                                    function: "division",
                                    value: 0.0,
                                });
                            }
                            a / b
                        }
                    });
                }
                Op::Pow(n) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.powi(n));
                }
                Op::Call(func) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(call(func, a)?);
                }
            }
        }
        Ok(stack.pop().expect("empty tape"))
    }
}

fn call<S: Scalar>(func: Func, a: S) -> Result<S, ExprError> {
    let domain = |v: f64| ExprError::Domain {
        function: func.name(),
        value: v,
    };
    Ok(match func {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => {
            if !(a.value() > 0.0) {
                return Err(domain(a.value()));
            }
            a.ln()
        }
        Func::Sqrt => {
            if !(a.value() > 0.0) {
                return Err(domain(a.value()));
            }
            a.sqrt()
        }
    })
}

fn emit(node: &Node, ops: &mut Vec<Op>) {
    match node {
        Node::Num(v) => ops.push(Op::Const(*v)),
        Node::Var(i) => ops.push(Op::Var(*i)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Binary(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Bin(*op));
        }
        Node::Pow(a, n) => {
            emit(a, ops);
            ops.push(Op::Pow(*n));
        }
        Node::Call(func, a) => {
            emit(a, ops);
            ops.push(Op::Call(*func));
        }
    }
}
