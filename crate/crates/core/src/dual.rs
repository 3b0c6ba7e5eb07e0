//! Forward-mode dual numbers.
//!
//! A [`Dual`] carries a value together with its derivative with respect to
//! the single independent variable. Arithmetic follows the usual rules for
//! `a + a'ε` with `ε² = 0`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dual {
    pub value: f64,
    pub derivative: f64,
}

impl Dual {
    pub const fn new(value: f64, derivative: f64) -> Self {
        Self { value, derivative }
    }

    /// The independent variable at `x` (seed derivative 1).
    pub const fn variable(x: f64) -> Self {
        Self::new(x, 1.0)
    }

    pub const fn constant(c: f64) -> Self {
        Self::new(c, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.derivative.is_finite()
    }

    pub fn sin(self) -> Self {
        Self::new(self.value.sin(), self.derivative * self.value.cos())
    }

    pub fn cos(self) -> Self {
        Self::new(self.value.cos(), -self.derivative * self.value.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, self.derivative * e)
    }

    /// Natural logarithm. The caller is responsible for `value > 0`.
    pub fn ln(self) -> Self {
        Self::new(self.value.ln(), self.derivative / self.value)
    }

    /// Square root. At 0 the derivative is infinite unless the inner
    /// derivative vanishes.
    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let d = if self.derivative == 0.0 {
            0.0
        } else {
            self.derivative / (2.0 * s)
        };
        Self::new(s, d)
    }

    /// Absolute value with the convention `abs'(0) = 0`.
    pub fn abs(self) -> Self {
        let sign = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        Self::new(self.value.abs(), sign * self.derivative)
    }

    pub fn atan(self) -> Self {
        Self::new(
            self.value.atan(),
            self.derivative / (1.0 + self.value * self.value),
        )
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        Self::new(t, self.derivative * (1.0 - t * t))
    }

    /// `self ^ p` for a constant exponent.
    pub fn powf(self, p: f64) -> Self {
        let v = self.value.powf(p);
        let d = if self.derivative == 0.0 || p == 0.0 {
            0.0
        } else {
            p * self.value.powf(p - 1.0) * self.derivative
        };
        Self::new(v, d)
    }

    /// `self ^ other` where both may vary. Requires `self.value > 0`.
    pub fn pow(self, other: Self) -> Self {
        let v = self.value.powf(other.value);
        let d = v
            * (other.derivative * self.value.ln() + other.value * self.derivative / self.value);
        Self::new(v, d)
    }

    /// Pointwise minimum; the derivative follows the selected branch
    /// (the left operand on ties).
    pub fn min(self, other: Self) -> Self {
        if other.value < self.value {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other.value > self.value {
            other
        } else {
            self
        }
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.derivative + rhs.derivative)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.derivative - rhs.derivative)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.value * rhs.value,
            self.derivative * rhs.value + self.value * rhs.derivative,
        )
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let v = self.value / rhs.value;
        Self::new(v, (self.derivative - v * rhs.derivative) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.derivative)
    }
}

impl Mul<f64> for Dual {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.value * rhs, self.derivative * rhs)
    }
}
