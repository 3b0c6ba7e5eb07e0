//! Building `f` from a prescribed derivative ratio.
//!
//! Given `g`, a monotone continuous `ρ`, a point `z` in a chosen maximal
//! interval of constancy `I` of `ρ` and the level `K = ρ|I`,
//!
//! ```text
//! f(x) = K·g(z) + ∫_z^x ρ(u) dg(u)
//! ```
//!
//! has `f'/g' = ρ` and `r = f/g` constant (equal to `K`) exactly on `I`.
//! Since `g` is differentiable the Stieltjes integral is `∫ ρ(u) g'(u) du`.
//! It is evaluated as `K·g(x) + ∫_z^x (ρ(u) − K) g'(u) du`, which is the
//! same function but has an integrand that vanishes identically on `I`.
//!
//! The module also provides piecewise-linear staircase `ρ`s and a seeded
//! generator of test pairs covering every `(ρ direction, sign gg')` row.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::Dual;
use crate::expr::parse;
use crate::func::{DiffFn, DifferentiableFn, EvalError};
use crate::interval::Interval;
use crate::patterns::Direction;
use crate::quad::{adaptive_simpson, QuadError};
use crate::ratio::{make_pair, validate_denominator, FunctionPair, PairError, Sign};

/// Number of checkpoint panels across the window.
pub const CHECKPOINTS: usize = 1024;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("flat intervals {0} and {1} overlap or are out of order")]
    OverlappingFlats(Interval, Interval),
    #[error("flat interval {0} must have positive finite length")]
    EmptyFlat(Interval),
    #[error("slope {0} must be positive and finite")]
    NonPositiveSlope(f64),
    #[error("expected 1 or {expected} slopes, got {got}")]
    SlopeCount { expected: usize, got: usize },
    #[error("z = {z} is not inside the window {window}")]
    ZOutsideWindow { z: f64, window: Interval },
    #[error("flat index {index} out of range ({count} flats)")]
    NoSuchFlat { index: usize, count: usize },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Piecewise-linear monotone `ρ` with prescribed flats.
///
/// `slopes` holds one magnitude per sloped segment (`flats.len() + 1` of
/// them, left to right) or a single magnitude used everywhere. The
/// function passes through `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSpec {
    #[serde(rename = "flat_intervals")]
    pub flats: Vec<[f64; 2]>,
    pub slopes: Vec<f64>,
    pub direction: Direction,
    #[serde(default)]
    pub anchor: [f64; 2],
}

impl StaircaseSpec {
    /// Sorted flat endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.flats.iter().flat_map(|f| [f[0], f[1]]).collect()
    }

    pub fn flat_intervals(&self) -> Vec<Interval> {
        self.flats.iter().map(|f| Interval::closed(f[0], f[1])).collect()
    }

    fn slope(&self, segment: usize) -> f64 {
        if self.slopes.len() == 1 {
            self.slopes[0]
        } else {
            self.slopes[segment]
        }
    }

    fn validate(&self) -> Result<(), ConstructError> {
        for f in &self.flats {
            let i = Interval::closed(f[0], f[1]);
            if !i.is_finite() || !(i.length() > 0.0) {
                return Err(ConstructError::EmptyFlat(i));
            }
        }
        for w in self.flats.windows(2) {
            if !(w[0][1] < w[1][0]) {
                return Err(ConstructError::OverlappingFlats(
                    Interval::closed(w[0][0], w[0][1]),
                    Interval::closed(w[1][0], w[1][1]),
                ));
            }
        }
        let expected = self.flats.len() + 1;
        if self.slopes.len() != 1 && self.slopes.len() != expected {
            return Err(ConstructError::SlopeCount {
                expected,
                got: self.slopes.len(),
            });
        }
        if let Some(&s) = self.slopes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(ConstructError::NonPositiveSlope(s));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    level: f64,
    slope: f64,
}

/// Evaluable staircase. Values on a flat are the stored level, bit for bit.
#[derive(Debug, Clone)]
pub struct StaircaseRho {
    spec: StaircaseSpec,
    knots: Vec<f64>,
    segments: Vec<Segment>,
}

impl StaircaseRho {
    pub fn spec(&self) -> &StaircaseSpec {
        &self.spec
    }

    /// The constant value on flat `index`.
    pub fn flat_level(&self, index: usize) -> Option<f64> {
        self.segments.get(2 * index + 1).map(|s| s.level)
    }

    fn segment_of(&self, x: f64) -> usize {
        // right-hand convention: a knot belongs to the segment it starts
        self.knots.partition_point(|&k| k <= x)
    }

    fn raw(&self, x: f64) -> (f64, f64) {
        let s = self.segments[self.segment_of(x)];
        if s.slope == 0.0 {
            (s.level, 0.0)
        } else {
            (s.level + s.slope * (x - s.start), s.slope)
        }
    }
}

/// Builds the continuous piecewise-linear `ρ` described by `spec`.
pub fn make_staircase_rho(spec: &StaircaseSpec) -> Result<StaircaseRho, ConstructError> {
    spec.validate()?;
    let sign = spec.direction.sign();
    let knots = spec.breakpoints();
    let mut segments = Vec::with_capacity(2 * spec.flats.len() + 1);
    let first_start = knots.first().copied().unwrap_or(0.0);
    segments.push(Segment {
        start: first_start,
        level: 0.0,
        slope: sign * spec.slope(0),
    });
    let mut level = 0.0;
    for (j, f) in spec.flats.iter().enumerate() {
        segments.push(Segment {
            start: f[0],
            level,
            slope: 0.0,
        });
        segments.push(Segment {
            start: f[1],
            level,
            slope: sign * spec.slope(j + 1),
        });
        if let Some(next) = spec.flats.get(j + 1) {
            level += sign * spec.slope(j + 1) * (next[0] - f[1]);
        }
    }
    let mut rho = StaircaseRho {
        spec: spec.clone(),
        knots,
        segments,
    };
    let shift = spec.anchor[1] - rho.raw(spec.anchor[0]).0;
    for s in &mut rho.segments {
        s.level += shift;
    }
    Ok(rho)
}

impl DiffFn for StaircaseRho {
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        let (v, d) = self.raw(x);
        Ok(Dual::new(v, d))
    }

    fn describe(&self) -> String {
        format!(
            "staircase(direction={}, flats={:?}, slopes={:?}, anchor={:?})",
            self.spec.direction, self.spec.flats, self.spec.slopes, self.spec.anchor
        )
    }

    fn kinks(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// `f(x) = K·g(x) + ∫_z^x (ρ − K) g'` with a checkpointed running integral.
pub struct ConstructedFn {
    g: DifferentiableFn,
    rho: DifferentiableFn,
    z: f64,
    k: f64,
    window: Interval,
    tol_density: f64,
    nodes: Vec<f64>,
    running: Vec<f64>,
    offset: f64,
    kinks: Vec<f64>,
}

impl fmt::Debug for ConstructedFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstructedFn")
            .field("g", &self.g.describe())
            .field("rho", &self.rho.describe())
            .field("z", &self.z)
            .field("k", &self.k)
            .field("window", &self.window)
            .finish()
    }
}

impl ConstructedFn {
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn rho(&self) -> &DifferentiableFn {
        &self.rho
    }

    pub fn g(&self) -> &DifferentiableFn {
        &self.g
    }

    fn integrand(&self, u: f64) -> Result<f64, EvalError> {
        let rho = self.rho.eval(u)?.value;
        let dg = self.g.eval(u)?.derivative;
        Ok((rho - self.k) * dg)
    }

    /// `∫_a^b (ρ − K) g'` with panels split at the kinks of `ρ`.
    fn piecewise(&self, a: f64, b: f64) -> Result<f64, QuadError> {
        let mut total = 0.0;
        let mut left = a;
        let start = self.kinks.partition_point(|&k| k <= a);
        for &k in &self.kinks[start..] {
            if k >= b {
                break;
            }
            total += adaptive_simpson(|u| self.integrand(u), left, k, self.tol_density * (k - left))?;
            left = k;
        }
        total += adaptive_simpson(|u| self.integrand(u), left, b, self.tol_density * (b - left))?;
        Ok(total)
    }

    /// Running integral from the window's left end.
    fn running_at(&self, x: f64) -> Result<f64, QuadError> {
        let h = self.window.length() / CHECKPOINTS as f64;
        let j = (((x - self.window.lo) / h).floor().max(0.0) as usize).min(CHECKPOINTS - 1);
        // always integrate forward from the panel's left node
        let j = if self.nodes[j] > x { j.saturating_sub(1) } else { j };
        Ok(self.running[j] + self.piecewise(self.nodes[j], x)?)
    }
}

impl DiffFn for ConstructedFn {
    fn eval(&self, x: f64) -> Result<Dual, EvalError> {
        if !(x >= self.window.lo && x <= self.window.hi) {
            return Err(EvalError::OutOfRange {
                x,
                lo: self.window.lo,
                hi: self.window.hi,
            });
        }
        let g = self.g.eval(x)?;
        let rho = self.rho.eval(x)?.value;
        let integral = self.running_at(x).map_err(|e| match e {
            QuadError::Eval(e) => e,
            _ => EvalError::Quadrature { a: self.z, b: x },
        })?;
        Ok(Dual::new(
            self.k * g.value + (integral - self.offset),
            rho * g.derivative,
        ))
    }

    fn describe(&self) -> String {
        format!(
            "{}*g(z) + int_z^x rho dg [g = {}, rho = {}, z = {}]",
            self.k,
            self.g.describe(),
            self.rho.describe(),
            self.z
        )
    }

    fn kinks(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// Builds `f` from `(g, ρ, z, K)` on `window`.
///
/// `quad_tol` is the absolute error budget of the integral over the whole
/// window; it is spread over the checkpoint panels in proportion to length.
pub fn construct_f(
    g: DifferentiableFn,
    rho: DifferentiableFn,
    z: f64,
    k: f64,
    window: Interval,
    quad_tol: f64,
) -> Result<ConstructedFn, ConstructError> {
    validate_denominator(&g, &window, crate::ratio::MIN_GRID.max(256))?;
    if !(z >= window.lo && z <= window.hi) {
        return Err(ConstructError::ZOutsideWindow { z, window });
    }
    let h = window.length() / CHECKPOINTS as f64;
    let nodes: Vec<f64> = (0..=CHECKPOINTS)
        .map(|j| if j == CHECKPOINTS { window.hi } else { window.lo + j as f64 * h })
        .collect();
    let mut kinks: Vec<f64> = rho
        .kinks()
        .into_iter()
        .chain(g.kinks())
        .filter(|p| p.is_finite())
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    let mut f = ConstructedFn {
        g,
        rho,
        z,
        k,
        window,
        tol_density: quad_tol / window.length(),
        nodes,
        running: Vec::with_capacity(CHECKPOINTS + 1),
        offset: 0.0,
        kinks,
    };
    let mut acc = 0.0;
    f.running.push(acc);
    for j in 0..CHECKPOINTS {
        acc += f.piecewise(f.nodes[j], f.nodes[j + 1])?;
        f.running.push(acc);
    }
    f.offset = f.running_at(z)?;
    Ok(f)
}

/// The `ρ` used for a generated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSpec {
    Staircase(StaircaseSpec),
    /// A smooth strictly monotone `ρ` given as an expression.
    Smooth { expr: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub grid_n: usize,
    pub min_flats: usize,
    pub max_flats: usize,
    /// Probability of drawing a smooth `ρ` instead of a staircase.
    pub smooth_fraction: f64,
    pub quad_tol: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            min_flats: 0,
            max_flats: 3,
            smooth_fraction: 0.1,
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }
}

/// A seeded test pair with its construction data.
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub seed: u64,
    pub pair: FunctionPair,
    pub rho_spec: RhoSpec,
    pub rho: DifferentiableFn,
    /// The prescribed m.i.c. of `r`; a point when `ρ` has no flat.
    pub chosen: Interval,
    pub z: f64,
    pub k: f64,
    pub rho_direction: Direction,
    pub g_template: &'static str,
}

impl GeneratedPair {
    pub fn staircase(&self) -> Option<&StaircaseSpec> {
        match &self.rho_spec {
            RhoSpec::Staircase(s) => Some(s),
            RhoSpec::Smooth { .. } => None,
        }
    }

    /// Flats of `ρ` other than the chosen one.
    pub fn other_flats(&self) -> Vec<Interval> {
        self.staircase()
            .map(|s| {
                s.flat_intervals()
                    .into_iter()
                    .filter(|f| *f != self.chosen)
                    .collect()
            })
            .unwrap_or_default()
    }
}

struct Template {
    expr: &'static str,
    sign_gg: Sign,
    /// Range for the window's left end.
    lo_range: (f64, f64),
}

/// Denominators known to satisfy the standing assumptions on every window
/// the generator can draw for them (lengths up to 4.5).
const TEMPLATES: [Template; 8] = [
    Template { expr: "exp(x)", sign_gg: Sign::Positive, lo_range: (-3.0, 0.0) },
    Template { expr: "x + 3", sign_gg: Sign::Positive, lo_range: (-2.5, 1.0) },
    Template { expr: "-exp(x)", sign_gg: Sign::Positive, lo_range: (-3.0, 0.0) },
    Template { expr: "atan(x) + 2", sign_gg: Sign::Positive, lo_range: (-3.0, 0.0) },
    Template { expr: "exp(-x)", sign_gg: Sign::Negative, lo_range: (-1.0, 2.0) },
    Template { expr: "1/(x + 4)", sign_gg: Sign::Negative, lo_range: (-3.5, 0.0) },
    Template { expr: "-exp(-x)", sign_gg: Sign::Negative, lo_range: (-1.0, 2.0) },
    Template { expr: "3 - x", sign_gg: Sign::Negative, lo_range: (-3.5, -2.0) },
];

/// `(ρ direction, sign gg')` for a table row index `0..4`.
pub fn table_row(index: usize) -> (Direction, Sign) {
    match index % 4 {
        0 => (Direction::Up, Sign::Positive),
        1 => (Direction::Down, Sign::Positive),
        2 => (Direction::Up, Sign::Negative),
        _ => (Direction::Down, Sign::Negative),
    }
}

/// Draws a pair deterministically from `seed`. The table row is `seed mod 4`,
/// so any four consecutive seeds cover all rows.
pub fn random_pair(seed: u64, config: &GeneratorConfig) -> Result<GeneratedPair, ConstructError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (direction, sign_gg) = table_row((seed % 4) as usize);

    let candidates: Vec<&Template> = TEMPLATES.iter().filter(|t| t.sign_gg == sign_gg).collect();
    let template = candidates[rng.random_range(0..candidates.len())];
    let len = rng.random_range(3.0..4.5);
    let lo = rng.random_range(template.lo_range.0..template.lo_range.1);
    let window = Interval::open(lo, lo + len);
    let g: DifferentiableFn = Arc::new(parse(template.expr).expect("template parses"));

    let inner_lo = lo + 0.1 * len;
    let inner_len = 0.8 * len;
    let sign = direction.sign();

    let smooth = rng.random_bool(config.smooth_fraction.clamp(0.0, 1.0));
    let (rho, rho_spec, chosen, k): (DifferentiableFn, RhoSpec, Interval, f64) = if smooth {
        let p = inner_lo + rng.random_range(0.2..0.8) * inner_len;
        let amp = rng.random_range(0.5..2.0);
        let rate = rng.random_range(0.5..2.0);
        let level = rng.random_range(-1.0..1.0);
        let expr = format!("{level:?} + {:?}*atan({rate:?}*(x - ({p:?})))", sign * amp);
        let rho = parse(&expr).expect("generated expression parses");
        let k = rho.value(p)?;
        (Arc::new(rho), RhoSpec::Smooth { expr }, Interval::point(p), k)
    } else {
        let n_flats = rng.random_range(config.min_flats..=config.max_flats.max(config.min_flats));
        let lens: Vec<f64> = (0..n_flats).map(|_| rng.random_range(0.25..0.5)).collect();
        let min_gap = 0.2;
        let spare = inner_len - lens.iter().sum::<f64>() - min_gap * (n_flats + 1) as f64;
        let weights: Vec<f64> = (0..=n_flats).map(|_| rng.random_range(0.1..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        let mut flats = Vec::with_capacity(n_flats);
        let mut cursor = inner_lo;
        for (i, l) in lens.iter().enumerate() {
            cursor += min_gap + spare * weights[i] / wsum;
            flats.push([cursor, cursor + l]);
            cursor += l;
        }
        let slopes: Vec<f64> = (0..=n_flats).map(|_| rng.random_range(0.5..2.0)).collect();
        let anchor_x = flats.first().map_or(window.midpoint(), |f| f[0]);
        let spec = StaircaseSpec {
            flats,
            slopes,
            direction,
            anchor: [anchor_x, rng.random_range(-1.0..1.0)],
        };
        let rho = make_staircase_rho(&spec)?;
        let (chosen, k) = if n_flats == 0 {
            let p = inner_lo + rng.random_range(0.2..0.8) * inner_len;
            (Interval::point(p), rho.value(p)?)
        } else {
            let idx = rng.random_range(0..n_flats);
            let f = spec.flats[idx];
            (Interval::closed(f[0], f[1]), rho.flat_level(idx).expect("flat exists"))
        };
        (Arc::new(rho), RhoSpec::Staircase(spec), chosen, k)
    };

    let z = chosen.midpoint();
    let f = construct_f(g.clone(), rho.clone(), z, k, window, config.quad_tol)?;
    let pair = make_pair(Arc::new(f), g, window, config.grid_n)?;
    Ok(GeneratedPair {
        seed,
        pair,
        rho_spec,
        rho,
        chosen,
        z,
        k,
        rho_direction: direction,
        g_template: template.expr,
    })
}
