//! Scalar functions that evaluate to a value and a derivative.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dual::Dual;

/// Why an expression could not be evaluated at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainFault {
    LogNonPositive,
    DivisionByZero,
    ZeroToNegativePower,
    SqrtNegative,
    NegativeBaseFractionalPower,
}

impl fmt::Display for DomainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainFault::LogNonPositive => "log of a non-positive number",
            DomainFault::DivisionByZero => "division by zero",
            DomainFault::ZeroToNegativePower => "zero raised to a negative power",
            DomainFault::SqrtNegative => "sqrt of a negative number",
            DomainFault::NegativeBaseFractionalPower => "negative base with non-integer exponent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{fault} at x = {x}")]
    Domain { x: f64, fault: DomainFault },
    #[error("x = {x} is outside the domain [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
}

/// A differentiable scalar function of one variable.
pub trait DiffFn: Send + Sync + fmt::Debug {
    /// Returns `(h(x), h'(x))`.
    fn eval(&self, x: f64) -> Result<Dual, EvalError>;

    /// Human-readable description used in reports.
    fn describe(&self) -> String;

    /// Points where the derivative may jump. Quadrature splits panels here.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    fn value(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(x).map(|d| d.value)
    }
}

/// Shared handle to a [`DiffFn`].
pub type DifferentiableFn = Arc<dyn DiffFn>;

/// `x ↦ −h(x)`.
#[derive(Debug, Clone)]
pub struct Negated(pub DifferentiableFn);

impl DiffFn for Negated {
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        self.0.eval(x).map(|d| -d)
    }

    fn describe(&self) -> String {
        format!("-({})", self.0.describe())
    }

    fn kinks(&self) -> Vec<f64> {
        self.0.kinks()
    }
}

/// `x ↦ h(−x)`.
#[derive(Debug, Clone)]
pub struct Reflected(pub DifferentiableFn);

impl DiffFn for Reflected {
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        self.0
            .eval(-x)
            .map(|d| Dual::new(d.value, -d.derivative))
    }

    fn describe(&self) -> String {
        format!("({})[x -> -x]", self.0.describe())
    }

    fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.0.kinks().into_iter().map(|p| -p).collect();
        k.reverse();
        k
    }
}

/// Adapter for closures that already produce dual values.
pub struct FnDiff<F> {
    name: String,
    f: F,
}

impl<F> FnDiff<F>
where
    F: Fn(f64) -> Dual + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> fmt::Debug for FnDiff<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDiff").field("name", &self.name).finish()
    }
}

impl<F> DiffFn for FnDiff<F>
where
    F: Fn(f64) -> Dual + Send + Sync,
{
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        Ok((self.f)(x))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}
