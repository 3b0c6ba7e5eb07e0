//! Monotonicity patterns, maximal intervals of constancy, and the level-0
//! set of `ρ̃`, all detected from sampled values.
//!
//! Strict and non-strict monotonicity are not distinguished: anything within
//! the zero tolerance of flat is treated as flat. Detected endpoints are
//! refined by bisection when a probe callable is supplied.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::ratio::{FunctionPair, Quantity, SampleSet};

pub const MIN_SAMPLES: usize = 16;

/// Default relative zero band for `ρ̃` and for first differences.
pub const DEFAULT_TOL_ZERO: f64 = 1e-7;

/// Default relative band for the constancy predicate.
pub const DEFAULT_TOL_CONST: f64 = 1e-10;

/// Minimum length of an interval of constancy, in grid steps.
pub const MIN_IC_STEPS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample abscissae must be strictly increasing (at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite sample value at x = {0}")]
    NonFinite(f64),
    #[error("sign sequence {signs} has no single-switch shape (first violation near x = {x})")]
    Unclassifiable { signs: String, x: f64 },
    #[error("sub-tolerance set is not an interval: components near x = {first} and x = {second}")]
    NonInterval { first: f64, second: f64 },
    #[error("no sign change on [{a}, {b}]: probe gives {fa} and {fb}")]
    BadBracket { a: f64, b: f64, fa: f64, fb: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    Increasing,
    Decreasing,
    DownUp,
    UpDown,
    Constant,
}

impl PatternKind {
    pub fn mirrored_vertical(self) -> Self {
        match self {
            PatternKind::Increasing => PatternKind::Decreasing,
            PatternKind::Decreasing => PatternKind::Increasing,
            PatternKind::DownUp => PatternKind::UpDown,
            PatternKind::UpDown => PatternKind::DownUp,
            PatternKind::Constant => PatternKind::Constant,
        }
    }

    pub fn mirrored_horizontal(self) -> Self {
        match self {
            PatternKind::Increasing => PatternKind::Decreasing,
            PatternKind::Decreasing => PatternKind::Increasing,
            other => other,
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Direction of a (not necessarily strictly) monotone function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One-switch monotonicity families. `DownUp` is non-increasing, then
/// constant on `[c, d]`, then non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    DownUp,
    UpDown,
}

impl Family {
    pub fn mirrored(self) -> Self {
        match self {
            Family::DownUp => Family::UpDown,
            Family::UpDown => Family::DownUp,
        }
    }

    pub fn kind(self) -> PatternKind {
        match self {
            Family::DownUp => PatternKind::DownUp,
            Family::UpDown => PatternKind::UpDown,
        }
    }

    /// Monotone and constant shapes are the degenerate placements of
    /// `[c, d]`; only the opposite two-phase shape is excluded.
    pub fn contains(self, kind: PatternKind) -> bool {
        kind != self.mirrored().kind()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub kind: PatternKind,
    pub switch: Interval,
}

impl Pattern {
    /// Canonical pattern for a kind whose switch is fixed by the window.
    fn canonical(kind: PatternKind, window: &Interval) -> Self {
        let switch = match kind {
            PatternKind::Increasing => Interval::point(window.lo),
            PatternKind::Decreasing => Interval::point(window.hi),
            _ => window.as_closed(),
        };
        Self { kind, switch }
    }

    /// Pattern of the negated function.
    pub fn mirrored_vertical(&self, window: &Interval) -> Self {
        let kind = self.kind.mirrored_vertical();
        match kind {
            PatternKind::Increasing | PatternKind::Decreasing => Self::canonical(kind, window),
            _ => Self {
                kind,
                switch: self.switch,
            },
        }
    }

    /// Pattern of `x ↦ h(−x)` on the mirrored window.
    pub fn mirrored_horizontal(&self) -> Self {
        Self {
            kind: self.kind.mirrored_horizontal(),
            switch: self.switch.reflected(),
        }
    }
}

/// How sample values relate to the monotonicity being classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignSource {
    /// Values share the sign of the function's derivative (e.g. `ρ̃` for `r`).
    DerivativeProxy,
    /// Values of the function itself; first differences are classified.
    RawValues,
}

fn classify(v: f64, thr: f64) -> i8 {
    if v > thr {
        1
    } else if v < -thr {
        -1
    } else {
        0
    }
}

fn sign_char(s: i8) -> char {
    match s {
        1 => '+',
        -1 => '-',
        _ => '0',
    }
}

fn check_samples(samples: &SampleSet) -> Result<(), PatternError> {
    if samples.len() < MIN_SAMPLES {
        return Err(PatternError::TooFewSamples(samples.len()));
    }
    for (i, w) in samples.points.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(PatternError::NotIncreasing(i + 1));
        }
    }
    if let Some(&(x, _)) = samples.points.iter().find(|p| !p.1.is_finite()) {
        return Err(PatternError::NonFinite(x));
    }
    Ok(())
}

/// The zero band `tol·(1 + median|v|)` used for sign classification.
pub fn zero_threshold(samples: &SampleSet, tol: f64) -> f64 {
    tol * (1.0 + samples.median_abs())
}

/// Bisection for a sign change of `probe` inside `bracket`.
///
/// Returns an endpoint if the probe is exactly zero there, otherwise halves
/// until the bracket is no wider than `xtol` and returns its midpoint.
pub fn refine_sign_change(
    probe: &dyn Fn(f64) -> f64,
    bracket: (f64, f64),
    xtol: f64,
) -> Result<f64, PatternError> {
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let (flo, fhi) = (probe(lo), probe(hi));
    if flo.is_nan() {
        return Err(PatternError::NonFinite(lo));
    }
    if fhi.is_nan() {
        return Err(PatternError::NonFinite(hi));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(PatternError::BadBracket {
            a: lo,
            b: hi,
            fa: flo,
            fb: fhi,
        });
    }
    let lo_positive = flo > 0.0;
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = probe(mid);
        if fm.is_nan() {
            return Err(PatternError::NonFinite(mid));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection tolerance for endpoint refinement on a window.
fn refine_xtol(window: &Interval) -> f64 {
    1e-12 * window.length().max(1.0)
}

/// Locates where `inside(x)` stops holding between `a` (inside) and `b`
/// (outside). Falls back to the midpoint if the probe disagrees with the
/// samples.
fn refine_boundary(inside: &dyn Fn(f64) -> Option<bool>, a: f64, b: f64, xtol: f64) -> f64 {
    let step = |x: f64| match inside(x) {
        Some(true) => -1.0,
        Some(false) => 1.0,
        None => f64::NAN,
    };
    refine_sign_change(&step, (a, b), xtol).unwrap_or(0.5 * (a + b))
}

/// Classifies the monotonicity pattern of sampled data.
///
/// With [`SignSource::DerivativeProxy`] the sign sequence of the values must
/// read `(−)*(0)*(+)*` or `(+)*(0)*(−)*`. With [`SignSource::RawValues`] the
/// first differences are classified and flats inside a monotone stretch are
/// allowed. `probe`, when given, must evaluate the same quantity as the
/// samples and is used to refine the switch endpoints.
pub fn detect_pattern(
    samples: &SampleSet,
    tol: f64,
    source: SignSource,
    probe: Option<&dyn Fn(f64) -> f64>,
) -> Result<Pattern, PatternError> {
    check_samples(samples)?;
    let thr = zero_threshold(samples, tol);
    match source {
        SignSource::DerivativeProxy => proxy_pattern(samples, thr, probe),
        SignSource::RawValues => raw_pattern(samples, thr),
    }
}

/// Runs of equal sign class: (class, first index, last index).
fn sign_runs(signs: &[i8]) -> Vec<(i8, usize, usize)> {
    let mut runs: Vec<(i8, usize, usize)> = Vec::new();
    for (i, &s) in signs.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == s => r.2 = i,
            _ => runs.push((s, i, i)),
        }
    }
    runs
}

fn signature(runs: &[(i8, usize, usize)]) -> String {
    runs.iter().map(|r| sign_char(r.0)).collect()
}

fn proxy_pattern(
    samples: &SampleSet,
    thr: f64,
    probe: Option<&dyn Fn(f64) -> f64>,
) -> Result<Pattern, PatternError> {
    let window = samples.window;
    let pts = &samples.points;
    let signs: Vec<i8> = samples.values().map(|v| classify(v, thr)).collect();
    let runs = sign_runs(&signs);
    let classes: Vec<i8> = runs.iter().map(|r| r.0).collect();

    let kind = match classes.as_slice() {
        [0] => return Ok(Pattern::canonical(PatternKind::Constant, &window)),
        [1] => return Ok(Pattern::canonical(PatternKind::Increasing, &window)),
        [-1] => return Ok(Pattern::canonical(PatternKind::Decreasing, &window)),
        [-1, 0] | [0, 1] | [-1, 1] | [-1, 0, 1] => PatternKind::DownUp,
        [1, 0] | [0, -1] | [1, -1] | [1, 0, -1] => PatternKind::UpDown,
        _ => {
            let bad = first_violation(&runs);
            return Err(PatternError::Unclassifiable {
                signs: signature(&runs),
                x: pts[bad].0,
            });
        }
    };

    let xtol = refine_xtol(&window);
    let class_at = |x: f64| probe.map(|p| p(x)).filter(|v| !v.is_nan()).map(|v| classify(v, thr));

    // boundary of the leading run
    let (first_class, _, first_end) = runs[0];
    let (last_class, last_start, _) = runs[runs.len() - 1];
    let (a, b) = (pts[first_end].0, pts[first_end + 1].0);
    let direct = runs.len() == 2 && first_class != 0 && last_class != 0;

    if direct {
        // no sampled zero band: c = d at the crossing itself
        let root = match probe {
            Some(p) => refine_sign_change(p, (a, b), xtol).unwrap_or_else(|_| interpolate_root(pts, first_end)),
            None => interpolate_root(pts, first_end),
        };
        return Ok(Pattern {
            kind,
            switch: Interval::point(root),
        });
    }

    let c = if first_class == 0 {
        window.lo
    } else if probe.is_some() {
        refine_boundary(&|x| class_at(x).map(|s| s == first_class), a, b, xtol)
    } else {
        0.5 * (a + b)
    };
    let d = if last_class == 0 {
        window.hi
    } else {
        let (a, b) = (pts[last_start - 1].0, pts[last_start].0);
        if probe.is_some() {
            refine_boundary(&|x| class_at(x).map(|s| s != last_class), a, b, xtol)
        } else {
            0.5 * (a + b)
        }
    };
    Ok(Pattern {
        kind,
        switch: Interval::closed(c, d),
    })
}

/// Linear interpolation of the zero between samples `i` and `i + 1`.
fn interpolate_root(pts: &[(f64, f64)], i: usize) -> f64 {
    let (x0, v0) = pts[i];
    let (x1, v1) = pts[i + 1];
    if v1 == v0 {
        return 0.5 * (x0 + x1);
    }
    x0 - v0 * (x1 - x0) / (v1 - v0)
}

/// Index of the first sample in the run that breaks the single-switch shape.
fn first_violation(runs: &[(i8, usize, usize)]) -> usize {
    let nonzero: Vec<&(i8, usize, usize)> = runs.iter().filter(|r| r.0 != 0).collect();
    // two-phase with an interior zero run that then repeats a sign, or a third sign run
    if nonzero.len() >= 3 {
        return nonzero[2].1;
    }
    if nonzero.len() == 2 && nonzero[0].0 == nonzero[1].0 {
        return nonzero[1].1;
    }
    // zero runs on both sides of a signed run
    runs.get(2).map_or(runs[runs.len() - 1].1, |r| r.1)
}

fn raw_pattern(samples: &SampleSet, thr: f64) -> Result<Pattern, PatternError> {
    let window = samples.window;
    let pts = &samples.points;
    let diffs: Vec<i8> = pts.windows(2).map(|w| classify(w[1].1 - w[0].1, thr)).collect();
    let first_pos = diffs.iter().position(|&s| s == 1);
    let last_pos = diffs.iter().rposition(|&s| s == 1);
    let first_neg = diffs.iter().position(|&s| s == -1);
    let last_neg = diffs.iter().rposition(|&s| s == -1);

    match (first_pos, first_neg) {
        (None, None) => Ok(Pattern::canonical(PatternKind::Constant, &window)),
        (Some(_), None) => Ok(Pattern::canonical(PatternKind::Increasing, &window)),
        (None, Some(_)) => Ok(Pattern::canonical(PatternKind::Decreasing, &window)),
        (Some(fp), Some(fneg)) => {
            let (lp, ln) = (last_pos.unwrap(), last_neg.unwrap());
            if ln < fp {
                // difference i spans samples i..=i+1
                Ok(Pattern {
                    kind: PatternKind::DownUp,
                    switch: Interval::closed(pts[ln + 1].0, pts[fp].0),
                })
            } else if lp < fneg {
                Ok(Pattern {
                    kind: PatternKind::UpDown,
                    switch: Interval::closed(pts[lp + 1].0, pts[fneg].0),
                })
            } else {
                let nonzero: Vec<(usize, i8)> =
                    diffs.iter().copied().enumerate().filter(|p| p.1 != 0).collect();
                let signs: Vec<i8> = nonzero.iter().map(|p| p.1).collect();
                let runs = sign_runs(&signs);
                // the third monotone stretch is where the shape breaks
                let bad = nonzero[runs[2].1].0;
                Err(PatternError::Unclassifiable {
                    signs: signature(&runs),
                    x: pts[bad].0,
                })
            }
        }
    }
}

/// Ordered, disjoint maximal intervals of constancy.
///
/// Interior endpoints are closed. An end that reaches the first or last
/// sample is reported open at the window edge: the function may continue
/// to be constant beyond the window, so such intervals are truncated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MicSet {
    pub intervals: Vec<Interval>,
}

impl MicSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.intervals.iter()
    }

    /// The interval whose endpoints are closest to `target`, with the distance.
    pub fn closest(&self, target: &Interval) -> Option<(&Interval, f64)> {
        self.intervals
            .iter()
            .map(|i| (i, i.endpoint_distance(target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// True when the interval is cut off by the window on either side.
    pub fn is_truncated(interval: &Interval) -> bool {
        !interval.lo_closed || !interval.hi_closed
    }
}

/// The constancy band `tol·(1 + median|v|)` on `max − min`.
pub fn constancy_threshold(samples: &SampleSet, tol: f64) -> f64 {
    tol * (1.0 + samples.median_abs())
}

/// Sample-index runs `[i, j]` that are maximal with `max − min ≤ eps`,
/// scanned greedily from the left.
pub fn constancy_runs(values: &[f64], eps: f64) -> Vec<(usize, usize)> {
    let n = values.len();
    let mut runs = Vec::new();
    let mut i = 0;
    while i + 1 < n {
        let (mut lo, mut hi) = (values[i], values[i]);
        let mut j = i;
        while j + 1 < n {
            let v = values[j + 1];
            let (nlo, nhi) = (lo.min(v), hi.max(v));
            if nhi - nlo > eps {
                break;
            }
            lo = nlo;
            hi = nhi;
            j += 1;
        }
        if j > i {
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    runs
}

/// Detects maximal intervals of constancy longer than `min_ic_len`.
pub fn detect_mics(
    samples: &SampleSet,
    tol: f64,
    min_ic_len: f64,
    probe: Option<&dyn Fn(f64) -> f64>,
) -> Result<MicSet, PatternError> {
    check_samples(samples)?;
    let eps = constancy_threshold(samples, tol);
    let values: Vec<f64> = samples.values().collect();
    let pts = &samples.points;
    let window = samples.window;
    let xtol = refine_xtol(&window);
    let n = pts.len();

    let mut intervals = Vec::new();
    for (i, j) in constancy_runs(&values, eps) {
        let run = &values[i..=j];
        let lo = run.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = run.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let level = 0.5 * (lo + hi);
        let inside = |x: f64| probe.map(|p| p(x)).filter(|v| !v.is_nan()).map(|v| (v - level).abs() <= 0.5 * eps);

        let (left, left_closed) = if i == 0 {
            (window.lo, false)
        } else if probe.is_some() {
            (refine_boundary(&inside, pts[i].0, pts[i - 1].0, xtol), true)
        } else {
            (pts[i].0, true)
        };
        let (right, right_closed) = if j == n - 1 {
            (window.hi, false)
        } else if probe.is_some() {
            (refine_boundary(&inside, pts[j].0, pts[j + 1].0, xtol), true)
        } else {
            (pts[j].0, true)
        };
        if right - left > min_ic_len {
            intervals.push(Interval {
                lo: left,
                hi: right,
                lo_closed: left_closed,
                hi_closed: right_closed,
            });
        }
    }
    Ok(MicSet { intervals })
}

/// The level-0 set of `ρ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level0 {
    pub interval: Interval,
    /// A single crossing (or a band shorter than the minimum i.c. length):
    /// a switch point, not an interval of constancy.
    pub switch_point: bool,
}

/// `{x : |ρ̃(x)| ≤ tol·(1 + median|ρ̃|)}` on the pair's analysis grid, as a
/// single interval with refined endpoints.
pub fn level0_set(pair: &FunctionPair, tol: f64) -> Result<Option<Level0>, PatternError> {
    let samples = pair
        .sample(Quantity::RhoTilde, pair.grid_n())
        .map_err(|_| PatternError::NonFinite(f64::NAN))?;
    let probe = pair.probe(Quantity::RhoTilde);
    level0_of_samples(&samples, tol, MIN_IC_STEPS * pair.grid_step(), &probe)
}

/// Sample-level core of [`level0_set`].
pub fn level0_of_samples(
    samples: &SampleSet,
    tol: f64,
    min_ic_len: f64,
    probe: &dyn Fn(f64) -> f64,
) -> Result<Option<Level0>, PatternError> {
    check_samples(samples)?;
    let thr = zero_threshold(samples, tol);
    let pts = &samples.points;
    let window = samples.window;
    let xtol = refine_xtol(&window);
    let signs: Vec<i8> = samples.values().map(|v| classify(v, thr)).collect();
    let runs = sign_runs(&signs);
    let zeros: Vec<&(i8, usize, usize)> = runs.iter().filter(|r| r.0 == 0).collect();

    if zeros.is_empty() {
        let crossings: Vec<usize> = runs.windows(2).map(|w| w[0].2).collect();
        return match crossings.as_slice() {
            [] => Ok(None),
            [i] => {
                let root = refine_sign_change(probe, (pts[*i].0, pts[*i + 1].0), xtol)
                    .unwrap_or_else(|_| interpolate_root(pts, *i));
                Ok(Some(Level0 {
                    interval: Interval::point(root),
                    switch_point: true,
                }))
            }
            [i, j, ..] => Err(PatternError::NonInterval {
                first: pts[*i].0,
                second: pts[*j].0,
            }),
        };
    }

    for w in zeros.windows(2) {
        // more than two grid steps between components
        if w[1].1 - w[0].2 > 2 {
            return Err(PatternError::NonInterval {
                first: pts[w[0].2].0,
                second: pts[w[1].1].0,
            });
        }
    }
    let (first, last) = (zeros[0].1, zeros[zeros.len() - 1].2);
    let in_band = |x: f64| {
        let v = probe(x);
        (!v.is_nan()).then(|| classify(v, thr) == 0)
    };
    let (lo, lo_closed) = if first == 0 {
        (window.lo, false)
    } else {
        (refine_boundary(&in_band, pts[first].0, pts[first - 1].0, xtol), true)
    };
    let (hi, hi_closed) = if last == pts.len() - 1 {
        (window.hi, false)
    } else {
        (refine_boundary(&in_band, pts[last].0, pts[last + 1].0, xtol), true)
    };
    let interval = Interval {
        lo,
        hi,
        lo_closed,
        hi_closed,
    };
    Ok(Some(Level0 {
        interval,
        switch_point: interval.length() <= min_ic_len,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> SampleSet {
        let window = Interval::open(lo, hi);
        let points = crate::ratio::uniform_grid(&window, n)
            .into_iter()
            .map(|x| (x, f(x)))
            .collect();
        SampleSet { window, points }
    }

    #[test]
    fn bisection_examples() {
        let r = refine_sign_change(&|x| x, (-1.0, 2.0), 1e-9).unwrap();
        assert!(r.abs() <= 1e-9);
        let r = refine_sign_change(&|x| x * x * x - 8.0, (0.0, 3.0), 1e-9).unwrap();
        assert!((r - 2.0).abs() <= 1e-8);
        assert!(matches!(
            refine_sign_change(&|x| 1.0 + x * x, (0.0, 1.0), 1e-9),
            Err(PatternError::BadBracket { .. })
        ));
        assert_eq!(refine_sign_change(&|x| x - 1.0, (1.0, 3.0), 1e-9).unwrap(), 1.0);
        assert!((refine_sign_change(&|x| x - 0.5, (1.0, 0.0), 1e-12).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn positive_proxy_is_increasing() {
        let s = sampled(0.1, 10.0, 256, |x| x * x);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, None).unwrap();
        assert_eq!(p.kind, PatternKind::Increasing);
        assert_eq!(p.switch, Interval::point(0.1));
    }

    #[test]
    fn zero_proxy_is_constant_on_window() {
        let s = sampled(1.0, 2.0, 64, |_| 0.0);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, None).unwrap();
        assert_eq!(p.kind, PatternKind::Constant);
        assert_eq!(p.switch, Interval::closed(1.0, 2.0));
    }

    #[test]
    fn flat_bottom_is_down_up_with_refined_switch() {
        let f = |x: f64| {
            if x < -1.0 {
                x + 1.0
            } else if x > 1.0 {
                x - 1.0
            } else {
                0.0
            }
        };
        let s = sampled(-2.0, 2.0, 100, f);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, Some(&f)).unwrap();
        assert_eq!(p.kind, PatternKind::DownUp);
        assert!((p.switch.lo + 1.0).abs() < 1e-6 && (p.switch.hi - 1.0).abs() < 1e-6, "{:?}", p.switch);
        let coarse = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, None).unwrap();
        assert!(coarse.switch.endpoint_distance(&Interval::closed(-1.0, 1.0)) < 0.04);
    }

    #[test]
    fn direct_crossing_gives_switch_point() {
        let f = |x: f64| 0.3 - x;
        let s = sampled(-1.0, 1.0, 64, f);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, Some(&f)).unwrap();
        assert_eq!(p.kind, PatternKind::UpDown);
        assert!((p.switch.lo - 0.3).abs() < 1e-10 && p.switch.length() == 0.0);
    }

    #[test]
    fn non_monotone_proxy_is_unclassifiable() {
        let s = sampled(-3.0, 5.0, 64, |x| x.sin());
        match detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, None) {
            Err(PatternError::Unclassifiable { signs, .. }) => assert_eq!(signs, "-+-"),
            other => panic!("{other:?}"),
        }
        // a flat between two positive stretches means the proxy is not monotone
        let s = sampled(-2.0, 2.0, 64, |x: f64| if x.abs() < 0.5 { 0.0 } else { 1.0 });
        assert!(matches!(
            detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::DerivativeProxy, None),
            Err(PatternError::Unclassifiable { .. })
        ));
    }

    #[test]
    fn raw_values_allow_interior_flats() {
        let f = |x: f64| if x < 0.0 { x } else if x < 1.0 { 0.0 } else { x - 1.0 };
        let s = sampled(-2.0, 3.0, 128, f);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::RawValues, None).unwrap();
        assert_eq!(p.kind, PatternKind::Increasing);
        let s = sampled(-2.0, 2.0, 128, |x| x * x);
        let p = detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::RawValues, None).unwrap();
        assert_eq!(p.kind, PatternKind::DownUp);
        assert!(p.switch.lo <= 0.0 + 0.04 && p.switch.hi >= -0.04);
        let s = sampled(-3.0, 3.0, 128, |x| x.sin());
        assert!(detect_pattern(&s, DEFAULT_TOL_ZERO, SignSource::RawValues, None).is_err());
    }

    #[test]
    fn sample_preconditions() {
        let s = sampled(0.0, 1.0, 8, |x| x);
        assert_eq!(
            detect_pattern(&s, 1e-7, SignSource::RawValues, None),
            Err(PatternError::TooFewSamples(8))
        );
        let mut s = sampled(0.0, 1.0, 32, |x| x);
        s.points.swap(3, 4);
        assert_eq!(detect_mics(&s, 1e-7, 0.0, None), Err(PatternError::NotIncreasing(4)));
    }

    #[test]
    fn identity_has_no_constancy() {
        let s = sampled(-1.0, 1.0, 128, |x| x);
        assert!(detect_mics(&s, DEFAULT_TOL_CONST, 0.05, None).unwrap().is_empty());
    }

    #[test]
    fn two_flats_are_two_mics() {
        let f = |x: f64| {
            if x < -1.5 {
                x + 1.5
            } else if x <= -1.0 {
                0.0
            } else if x < 1.0 {
                x + 1.0
            } else if x <= 1.5 {
                2.0
            } else {
                x + 0.5
            }
        };
        let s = sampled(-2.0, 2.0, 400, f);
        let mics = detect_mics(&s, DEFAULT_TOL_CONST, 0.03, Some(&f)).unwrap();
        assert_eq!(mics.len(), 2);
        assert!(mics.intervals[0].endpoint_distance(&Interval::closed(-1.5, -1.0)) < 1e-9);
        assert!(mics.intervals[1].endpoint_distance(&Interval::closed(1.0, 1.5)) < 1e-9);
        assert!(mics.iter().all(|i| !MicSet::is_truncated(i)));
    }

    #[test]
    fn window_touching_mic_is_open() {
        let s = sampled(0.0, 2.0, 64, |x: f64| if x < 1.0 { 5.0 } else { 5.0 + x - 1.0 });
        let mics = detect_mics(&s, DEFAULT_TOL_CONST, 0.1, None).unwrap();
        assert_eq!(mics.len(), 1);
        let i = mics.intervals[0];
        assert_eq!(i.lo, 0.0);
        assert!(!i.lo_closed && i.hi_closed);
        assert!(MicSet::is_truncated(&i));
    }

    #[test]
    fn level0_single_band() {
        let f = |x: f64| if x < -1.0 { x + 1.0 } else if x > 1.0 { x - 1.0 } else { 0.0 };
        let s = sampled(-2.0, 2.0, 256, f);
        let l = level0_of_samples(&s, DEFAULT_TOL_ZERO, 0.05, &f).unwrap().unwrap();
        assert!(!l.switch_point);
        assert!(l.interval.endpoint_distance(&Interval::closed(-1.0, 1.0)) < 1e-6);
    }

    #[test]
    fn level0_crossing_and_absence() {
        let f = |x: f64| x - 0.123;
        let s = sampled(-1.0, 1.0, 64, f);
        let l = level0_of_samples(&s, DEFAULT_TOL_ZERO, 0.05, &f).unwrap().unwrap();
        assert!(l.switch_point);
        assert!((l.interval.lo - 0.123).abs() < 1e-10);
        let g = |x: f64| x * x + 0.01;
        let s = sampled(0.1, 10.0, 64, g);
        assert_eq!(level0_of_samples(&s, DEFAULT_TOL_ZERO, 0.05, &g).unwrap(), None);
    }

    #[test]
    fn level0_rejects_two_components() {
        let f = |x: f64| if x.abs() > 1.5 || x.abs() < 0.5 { 0.0 } else { 1.0 };
        let s = sampled(-2.0, 2.0, 64, f);
        assert!(matches!(
            level0_of_samples(&s, DEFAULT_TOL_ZERO, 0.05, &f),
            Err(PatternError::NonInterval { .. })
        ));
        let f = |x: f64| (3.0 * x).sin();
        let s = sampled(-2.0, 2.0, 64, f);
        assert!(matches!(
            level0_of_samples(&s, DEFAULT_TOL_ZERO, 0.05, &f),
            Err(PatternError::NonInterval { .. })
        ));
    }

    #[test]
    fn family_membership() {
        assert!(Family::DownUp.contains(PatternKind::Increasing));
        assert!(Family::DownUp.contains(PatternKind::Constant));
        assert!(!Family::DownUp.contains(PatternKind::UpDown));
        assert!(!Family::UpDown.contains(PatternKind::DownUp));
    }
}
