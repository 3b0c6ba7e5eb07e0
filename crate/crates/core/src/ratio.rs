//! Validated `(f, g)` pairs and the derived quantities `r = f/g`,
//! `ρ = f'/g'` and `ρ̃ = (f'g − fg')/|g'|`.
//!
//! A pair is only constructed once `g` and `g'` have been checked to stay
//! away from zero and keep a constant sign over a Chebyshev-spaced sample of
//! the window. The check is sampling-based; it is not a certified enclosure.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dual::Dual;
use crate::func::{DifferentiableFn, EvalError};
use crate::interval::Interval;
use crate::patterns::refine_sign_change;

/// Minimum number of validation samples.
pub const MIN_GRID: usize = 64;

/// Relative threshold below which `g` or `g'` counts as zero.
pub const ZERO_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    pub fn times(self, other: Sign) -> Self {
        if self == other {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+1",
            Sign::Negative => "-1",
        })
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(serde::de::Error::custom(format!("sign must be 1 or -1, got {other}"))),
        }
    }
}

/// Which derived quantity to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    R,
    Rho,
    RhoTilde,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairError {
    #[error("analysis window {0} must be finite with positive length")]
    InvalidWindow(Interval),
    #[error("grid_n = {0} is below the minimum of {MIN_GRID}")]
    GridTooSmall(usize),
    #[error("g vanishes near x = {x}")]
    ZeroG { x: f64 },
    #[error("g' vanishes near x = {x}")]
    ZeroGPrime { x: f64 },
    #[error("{which} changes sign without passing through zero near x = {x}")]
    SignChange { x: f64, which: &'static str },
    #[error("{which} is not finite at x = {x}")]
    NonFinite { x: f64, which: &'static str },
    #[error("x = {x} is not inside the analysis window {window}")]
    OutsideWindow { x: f64, window: Interval },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Values of `f` and `g` (with derivatives) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub x: f64,
    pub f: Dual,
    pub g: Dual,
}

impl PointEval {
    pub fn r(&self) -> f64 {
        self.f.value / self.g.value
    }

    pub fn rho(&self) -> f64 {
        self.f.derivative / self.g.derivative
    }

    /// `(f'g − fg')/|g'|`, which equals `r' g²/|g'|` without forming `r'`.
    pub fn rho_tilde(&self) -> f64 {
        (self.f.derivative * self.g.value - self.f.value * self.g.derivative)
            / self.g.derivative.abs()
    }

    /// `(ρ − r)·g·sign(g')`: the same quantity by a second route.
    pub fn rho_tilde_via_ratios(&self) -> f64 {
        (self.rho() - self.r()) * self.g.value * self.g.derivative.signum()
    }

    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::R => self.r(),
            Quantity::Rho => self.rho(),
            Quantity::RhoTilde => self.rho_tilde(),
        }
    }
}

/// Sampled values of one quantity together with the window they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub window: Interval,
    pub points: Vec<(f64, f64)>,
}

impl SampleSet {
    /// Wraps bare points; the window is their hull.
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        let lo = points.first().map_or(0.0, |p| p.0);
        let hi = points.last().map_or(0.0, |p| p.0);
        Self {
            window: Interval::closed(lo, hi),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn negated(&self) -> Self {
        Self {
            window: self.window,
            points: self.points.iter().map(|&(x, v)| (x, -v)).collect(),
        }
    }

    /// Median absolute value, the scale for relative tolerances.
    pub fn median_abs(&self) -> f64 {
        median_abs(self.values())
    }

    /// Mean spacing between consecutive abscissae.
    pub fn grid_step(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        (self.points[self.points.len() - 1].0 - self.points[0].0) / (self.points.len() - 1) as f64
    }
}

pub(crate) fn median_abs(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.map(f64::abs).filter(|a| a.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Uniform analysis grid: `n` cell midpoints, so the outermost points sit
/// `length/(2n)` inside the window.
pub fn uniform_grid(window: &Interval, n: usize) -> Vec<f64> {
    let step = window.length() / n as f64;
    (0..n).map(|i| window.lo + (i as f64 + 0.5) * step).collect()
}

/// Chebyshev nodes of the first kind on `window`, ascending.
pub fn chebyshev_grid(window: &Interval, n: usize) -> Vec<f64> {
    let mid = window.midpoint();
    let half = 0.5 * window.length();
    (0..n)
        .map(|k| mid - half * (PI * (2 * k + 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

/// A validated `(f, g)` pair on a finite analysis window.
#[derive(Clone)]
pub struct FunctionPair {
    f: DifferentiableFn,
    g: DifferentiableFn,
    window: Interval,
    sign_g: Sign,
    sign_g_prime: Sign,
    grid_n: usize,
}

impl fmt::Debug for FunctionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionPair")
            .field("f", &self.f.describe())
            .field("g", &self.g.describe())
            .field("window", &self.window)
            .field("sign_gg", &self.sign_gg())
            .field("grid_n", &self.grid_n)
            .finish()
    }
}

/// Builds a pair after checking that `g` and `g'` are nonzero with constant
/// sign on `grid_n` Chebyshev samples of `window`.
pub fn make_pair(
    f: DifferentiableFn,
    g: DifferentiableFn,
    window: Interval,
    grid_n: usize,
) -> Result<FunctionPair, PairError> {
    let (sign_g, sign_g_prime) = validate_denominator(&g, &window, grid_n)?;
    for x in chebyshev_grid(&window, grid_n) {
        if !f.eval(x)?.is_finite() {
            return Err(PairError::NonFinite { x, which: "f" });
        }
    }
    Ok(FunctionPair {
        f,
        g,
        window,
        sign_g,
        sign_g_prime,
        grid_n,
    })
}

/// Checks the standing assumptions on a denominator and returns the signs
/// of `g` and `g'`.
pub fn validate_denominator(
    g: &DifferentiableFn,
    window: &Interval,
    grid_n: usize,
) -> Result<(Sign, Sign), PairError> {
    if !window.is_finite() || !(window.length() > 0.0) {
        return Err(PairError::InvalidWindow(*window));
    }
    if grid_n < MIN_GRID {
        return Err(PairError::GridTooSmall(grid_n));
    }
    let xs = chebyshev_grid(window, grid_n);
    let mut gs = Vec::with_capacity(grid_n);
    for &x in &xs {
        let gv = g.eval(x)?;
        if !gv.value.is_finite() {
            return Err(PairError::NonFinite { x, which: "g" });
        }
        if !gv.derivative.is_finite() {
            return Err(PairError::NonFinite { x, which: "g'" });
        }
        gs.push(gv);
    }
    let scale_g = gs.iter().fold(1.0f64, |m, d| m.max(d.value.abs()));
    let scale_dg = gs.iter().fold(1.0f64, |m, d| m.max(d.derivative.abs()));

    let value = |x: f64| g.eval(x).map(|d| d.value).unwrap_or(f64::NAN);
    let slope = |x: f64| g.eval(x).map(|d| d.derivative).unwrap_or(f64::NAN);

    for k in 0..grid_n {
        let (x, d) = (xs[k], gs[k]);
        if d.value.abs() <= ZERO_REL * scale_g {
            return Err(PairError::ZeroG { x });
        }
        if d.derivative.abs() <= ZERO_REL * scale_dg {
            return Err(PairError::ZeroGPrime { x });
        }
        if k + 1 == grid_n {
            break;
        }
        let next = gs[k + 1];
        if Sign::of(d.value) != Sign::of(next.value) {
            return Err(locate_sign_change(&value, x, xs[k + 1], scale_g, "g", |x| {
                PairError::ZeroG { x }
            }));
        }
        if Sign::of(d.derivative) != Sign::of(next.derivative) {
            return Err(locate_sign_change(&slope, x, xs[k + 1], scale_dg, "g'", |x| {
                PairError::ZeroGPrime { x }
            }));
        }
    }
    Ok((Sign::of(gs[0].value), Sign::of(gs[0].derivative)))
}

/// Bisects a sign flip between two samples and decides whether it is a
/// zero crossing or a jump.
fn locate_sign_change(
    probe: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    scale: f64,
    which: &'static str,
    zero: impl Fn(f64) -> PairError,
) -> PairError {
    let xtol = 1e-13 * (b - a).abs().max(1e-300) + 1e-15 * a.abs().max(b.abs());
    match refine_sign_change(probe, (a, b), xtol) {
        Ok(root) => {
            let h = 4.0 * xtol;
            let near = probe(root).abs().min(probe(root - h).abs()).min(probe(root + h).abs());
            if near <= 1e-6 * scale {
                zero(root)
            } else {
                PairError::SignChange { x: root, which }
            }
        }
        Err(_) => PairError::SignChange { x: 0.5 * (a + b), which },
    }
}

impl FunctionPair {
    pub fn f(&self) -> &DifferentiableFn {
        &self.f
    }

    pub fn g(&self) -> &DifferentiableFn {
        &self.g
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn sign_g(&self) -> Sign {
        self.sign_g
    }

    pub fn sign_g_prime(&self) -> Sign {
        self.sign_g_prime
    }

    /// The constant sign of `g·g'`.
    pub fn sign_gg(&self) -> Sign {
        self.sign_g.times(self.sign_g_prime)
    }

    /// Spacing of the analysis grid.
    pub fn grid_step(&self) -> f64 {
        self.window.length() / self.grid_n as f64
    }

    /// Same functions, different grid size (re-validated).
    pub fn with_grid(&self, grid_n: usize) -> Result<FunctionPair, PairError> {
        make_pair(self.f.clone(), self.g.clone(), self.window, grid_n)
    }

    pub fn eval_point(&self, x: f64) -> Result<PointEval, PairError> {
        if !self.window.contains_interior(x) {
            return Err(PairError::OutsideWindow {
                x,
                window: self.window,
            });
        }
        Ok(PointEval {
            x,
            f: self.f.eval(x)?,
            g: self.g.eval(x)?,
        })
    }

    pub fn ratio_at(&self, x: f64) -> Result<f64, PairError> {
        self.eval_point(x).map(|p| p.r())
    }

    pub fn rho_at(&self, x: f64) -> Result<f64, PairError> {
        self.eval_point(x).map(|p| p.rho())
    }

    pub fn rho_tilde_at(&self, x: f64) -> Result<f64, PairError> {
        self.eval_point(x).map(|p| p.rho_tilde())
    }

    /// Evaluates `f` and `g` on the `n`-point uniform analysis grid.
    pub fn sample_points(&self, n: usize) -> Result<Vec<PointEval>, PairError> {
        uniform_grid(&self.window, n.max(2))
            .into_iter()
            .map(|x| self.eval_point(x))
            .collect()
    }

    /// `n` uniform interior samples of one quantity.
    pub fn sample(&self, which: Quantity, n: usize) -> Result<SampleSet, PairError> {
        let pts = self.sample_points(n)?;
        Ok(samples_of(&self.window, &pts, which))
    }

    /// A reentrant callable for endpoint refinement; evaluation failures map to NaN.
    pub fn probe(&self, which: Quantity) -> impl Fn(f64) -> f64 + '_ {
        move |x| {
            self.eval_point(x)
                .map(|p| p.get(which))
                .unwrap_or(f64::NAN)
        }
    }
}

/// Projects pre-evaluated points onto one quantity.
pub fn samples_of(window: &Interval, pts: &[PointEval], which: Quantity) -> SampleSet {
    SampleSet {
        window: *window,
        points: pts.iter().map(|p| (p.x, p.get(which))).collect(),
    }
}
