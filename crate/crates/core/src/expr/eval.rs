use crate::dual::Dual;
use crate::func::{DiffFn, DomainFault, EvalError};
use crate::interval::Interval;

use super::{BinaryOp, Expr, UnaryOp};

/// Evaluates `ast` and its derivative at `x` by dual-number propagation.
pub fn eval_dual(ast: &Expr, x: f64) -> Result<Dual, EvalError> {
    let fault = |fault| EvalError::Domain { x, fault };
    Ok(match ast {
        Expr::Const(c) => Dual::constant(*c),
        Expr::Var => Dual::variable(x),
        Expr::Unary(op, a) => {
            let a = eval_dual(a, x)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log if a.value <= 0.0 => return Err(fault(DomainFault::LogNonPositive)),
                UnaryOp::Log => a.ln(),
                UnaryOp::Sqrt if a.value < 0.0 => return Err(fault(DomainFault::SqrtNegative)),
                UnaryOp::Sqrt => a.sqrt(),
                UnaryOp::Abs => a.abs(),
                UnaryOp::Atan => a.atan(),
                UnaryOp::Tanh => a.tanh(),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = eval_dual(a, x)?;
            let b = eval_dual(b, x)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b.value == 0.0 => return Err(fault(DomainFault::DivisionByZero)),
                BinaryOp::Div => a / b,
                BinaryOp::Pow => power(a, b).map_err(fault)?,
                BinaryOp::Min => a.min(b),
                BinaryOp::Max => a.max(b),
            }
        }
    })
}

fn power(base: Dual, exponent: Dual) -> Result<Dual, DomainFault> {
    if base.value == 0.0 && exponent.value < 0.0 {
        return Err(DomainFault::ZeroToNegativePower);
    }
    if exponent.derivative == 0.0 {
        // locally constant exponent: the ln(base) term drops out
        if base.value < 0.0 && exponent.value.fract() != 0.0 {
            return Err(DomainFault::NegativeBaseFractionalPower);
        }
        return Ok(base.powf(exponent.value));
    }
    if base.value > 0.0 {
        Ok(base.pow(exponent))
    } else if base.value == 0.0 {
        if exponent.value == 0.0 {
            Err(DomainFault::ZeroToNegativePower)
        } else {
            Ok(base.powf(exponent.value))
        }
    } else {
        Err(DomainFault::NegativeBaseFractionalPower)
    }
}

/// Why a scanned point was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum FaultReason {
    Eval(EvalError),
    NonFinite { value: f64, derivative: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFault {
    pub x: f64,
    pub reason: FaultReason,
}

/// Evaluates on `n` uniformly spaced points of `window` (endpoints included)
/// and returns every point where evaluation fails or produces a non-finite
/// value or derivative.
pub fn scan_domain(ast: &Expr, window: &Interval, n: usize) -> Vec<PointFault> {
    let n = n.max(2);
    let step = window.length() / (n - 1) as f64;
    (0..n)
        .filter_map(|i| {
            let x = if i == n - 1 {
                window.hi
            } else {
                window.lo + i as f64 * step
            };
            match eval_dual(ast, x) {
                Err(e) => Some(PointFault {
                    x,
                    reason: FaultReason::Eval(e),
                }),
                Ok(d) if !d.is_finite() => Some(PointFault {
                    x,
                    reason: FaultReason::NonFinite {
                        value: d.value,
                        derivative: d.derivative,
                    },
                }),
                Ok(_) => None,
            }
        })
        .collect()
}

impl DiffFn for Expr {
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        eval_dual(self, x)
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}
