//! Rule tables and the full analysis of a pair.
//!
//! [`check_pair`] samples `r`, `ρ` and `ρ̃` once on the uniform analysis grid
//! and derives everything else from those samples plus refinement probes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::construct::GeneratedPair;
use crate::func::{Negated, Reflected};
use crate::interval::Interval;
use crate::patterns::{
    detect_mics, detect_pattern, level0_of_samples, Direction, Family, Level0, MicSet, Pattern,
    PatternKind, SignSource, DEFAULT_TOL_CONST, DEFAULT_TOL_ZERO, MIN_IC_STEPS,
};
use crate::ratio::{make_pair, samples_of, FunctionPair, PairError, PointEval, Quantity, Sign};

/// One row of the rule tables, keyed by the direction of `ρ` and the sign
/// of `gg'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRow {
    pub rho_dir: Direction,
    pub sign_gg: Sign,
    pub r_family: Family,
    pub rho_tilde_dir: Direction,
}

/// Family of `r` for a monotone `ρ`.
pub fn predict_r_family(rho_dir: Direction, sign_gg: Sign) -> Family {
    match (rho_dir, sign_gg) {
        (Direction::Up, Sign::Positive) | (Direction::Down, Sign::Negative) => Family::DownUp,
        (Direction::Down, Sign::Positive) | (Direction::Up, Sign::Negative) => Family::UpDown,
    }
}

/// Direction of `ρ̃`: that of `ρ` when `gg' > 0`, the opposite otherwise.
pub fn predict_rho_tilde_dir(rho_dir: Direction, sign_gg: Sign) -> Direction {
    match sign_gg {
        Sign::Positive => rho_dir,
        Sign::Negative => rho_dir.flipped(),
    }
}

/// The family forced on `r` by the sign rule once `ρ̃` is monotone:
/// a non-decreasing `ρ̃` reads `(−)*(0)*(+)*`.
pub fn family_from_rho_tilde(rho_tilde_dir: Direction) -> Family {
    match rho_tilde_dir {
        Direction::Up => Family::DownUp,
        Direction::Down => Family::UpDown,
    }
}

/// All four rows in table order.
pub fn rule_rows() -> [RuleRow; 4] {
    [
        (Direction::Up, Sign::Positive),
        (Direction::Down, Sign::Positive),
        (Direction::Up, Sign::Negative),
        (Direction::Down, Sign::Negative),
    ]
    .map(|(rho_dir, sign_gg)| RuleRow {
        rho_dir,
        sign_gg,
        r_family: predict_r_family(rho_dir, sign_gg),
        rho_tilde_dir: predict_rho_tilde_dir(rho_dir, sign_gg),
    })
}

/// Direction of `ρ` as detected from its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoDirection {
    Up,
    Down,
    /// `ρ` is constant on the whole window; both table rows apply.
    ConstantRho,
    NotMonotone,
}

impl RhoDirection {
    pub fn direction(self) -> Option<Direction> {
        match self {
            RhoDirection::Up => Some(Direction::Up),
            RhoDirection::Down => Some(Direction::Down),
            _ => None,
        }
    }
}

/// Tolerances of the analysis. Every field is echoed in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Relative zero band for signs of `ρ̃` and first differences.
    pub tol_zero: f64,
    /// Relative band for the constancy predicate of m.i.c. detection.
    pub tol_const: f64,
    /// Minimum i.c. length in grid steps.
    pub min_ic_steps: f64,
    /// Allowed distance between switch endpoints and the level-0 set.
    pub switch_tol: f64,
    /// Allowed endpoint distance, in grid steps, when matching m.i.c.'s.
    pub mic_match_steps: f64,
    /// Relative bound on the fitted `C` for the m.i.c. of `r`.
    pub c_tol: f64,
    /// Tolerance of the identity `ρ̃ = (ρ − r)·g·sign(g')`.
    pub identity_tol: f64,
    /// Finite-difference step as a fraction of the grid step.
    pub fd_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tol_zero: DEFAULT_TOL_ZERO,
            tol_const: DEFAULT_TOL_CONST,
            min_ic_steps: MIN_IC_STEPS,
            switch_tol: 1e-3,
            mic_match_steps: 2.0,
            c_tol: 1e-6,
            identity_tol: 1e-9,
            fd_fraction: 1.0 / 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    pub f: String,
    pub g: String,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mics {
    pub r: MicSet,
    pub rho: MicSet,
    pub rho_tilde: MicSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Checks {
    pub prop1: bool,
    pub prop2: bool,
    pub uniqueness: bool,
    pub sign_identity: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.prop1 && self.prop2 && self.uniqueness && self.sign_identity
    }
}

/// Fit of `r = K₁ + C/g` on an m.i.c. `J` of `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstancyFit {
    pub interval: Interval,
    pub k1: f64,
    pub c: f64,
    /// `|C|` divided by the scale of `f` on `J`.
    pub c_relative: f64,
    pub max_residual: f64,
    pub samples: usize,
    /// Whether `J` is the m.i.c. of `r`.
    pub is_r_mic: bool,
}

/// Sample-level outcome of the sign agreement check.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignIdentityStats {
    pub checked: usize,
    pub sign_violations: usize,
    pub identity_violations: usize,
    pub first_violation: Option<f64>,
    pub max_identity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub pair: PairInfo,
    pub window: Interval,
    pub sign_gg: Sign,
    pub rho_direction: RhoDirection,
    pub rho_pattern: Option<Pattern>,
    pub predicted_family: Option<Family>,
    pub observed_pattern: Option<Pattern>,
    pub switch: Option<[f64; 2]>,
    pub level0: Option<Level0>,
    pub rho_tilde_pattern: Option<Pattern>,
    pub predicted_rho_tilde: Option<Direction>,
    pub mics: Mics,
    pub fits: Vec<ConstancyFit>,
    pub sign_identity: SignIdentityStats,
    pub checks: Checks,
    pub diagnostics: Vec<String>,
    pub tolerances: AnalysisConfig,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.checks.all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// `f ↦ −f`.
    Vertical,
    /// `x ↦ −x` for both functions, with the window mirrored.
    Horizontal,
}

/// Reflects a pair and re-validates it.
pub fn reflect(pair: &FunctionPair, axis: Axis) -> Result<FunctionPair, PairError> {
    match axis {
        Axis::Vertical => make_pair(
            Arc::new(Negated(pair.f().clone())),
            pair.g().clone(),
            pair.window(),
            pair.grid_n(),
        ),
        Axis::Horizontal => make_pair(
            Arc::new(Reflected(pair.f().clone())),
            Arc::new(Reflected(pair.g().clone())),
            pair.window().reflected(),
            pair.grid_n(),
        ),
    }
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| m.max(v.abs()))
}

/// Least-squares fit of `r = K₁ + C/g` over the samples inside `j`.
fn fit_constancy(pts: &[PointEval], j: &Interval, k1: f64) -> Option<(f64, f64, f64, usize)> {
    let inside: Vec<&PointEval> = pts.iter().filter(|p| j.contains(p.x)).collect();
    if inside.is_empty() {
        return None;
    }
    let (num, den) = inside.iter().fold((0.0, 0.0), |(n, d), p| {
        let u = 1.0 / p.g.value;
        (n + (p.r() - k1) * u, d + u * u)
    });
    let c = num / den;
    let residual = max_abs(inside.iter().map(|p| p.r() - k1 - c / p.g.value));
    let scale = 1.0_f64
        .max(max_abs(inside.iter().map(|p| p.f.value)))
        .max(max_abs(inside.iter().map(|p| k1 * p.g.value)));
    Some((c, c.abs() / scale, residual, inside.len()))
}

fn sign_identity(
    pair: &FunctionPair,
    pts: &[PointEval],
    config: &AnalysisConfig,
    scale: f64,
) -> SignIdentityStats {
    let h = pair.grid_step() * config.fd_fraction;
    let thr = config.tol_zero * scale;
    let mut stats = SignIdentityStats::default();
    for p in pts {
        let rt = p.rho_tilde();
        let via = p.rho_tilde_via_ratios();
        let err = (rt - via).abs();
        stats.max_identity_error = stats.max_identity_error.max(err);
        if err > config.identity_tol * (1.0 + rt.abs()) {
            stats.identity_violations += 1;
            stats.first_violation.get_or_insert(p.x);
        }
        if rt.abs() <= thr {
            continue;
        }
        stats.checked += 1;
        let diff = match (pair.ratio_at(p.x + h), pair.ratio_at(p.x - h)) {
            (Ok(a), Ok(b)) => a - b,
            _ => f64::NAN,
        };
        if !(diff.signum() == rt.signum() && diff != 0.0) {
            stats.sign_violations += 1;
            stats.first_violation.get_or_insert(p.x);
        }
    }
    stats
}

fn switch_matches(pattern: &Pattern, level0: Option<&Level0>, window: &Interval, tol: f64) -> bool {
    match level0 {
        Some(l) => pattern.switch.endpoint_distance(&l.interval) <= tol,
        // no zero of ρ̃ at all: r is strictly monotone and c = d sits on the window edge
        None => {
            matches!(pattern.kind, PatternKind::Increasing | PatternKind::Decreasing)
                && (pattern.switch.lo - window.lo).abs().min((pattern.switch.lo - window.hi).abs()) <= tol
        }
    }
}

/// Runs every detector on `pair` and checks the propositions.
pub fn check_pair(pair: &FunctionPair, config: &AnalysisConfig) -> Result<AnalysisReport, PairError> {
    let window = pair.window();
    let pts = pair.sample_points(pair.grid_n())?;
    let min_ic_len = config.min_ic_steps * pair.grid_step();
    let s_r = samples_of(&window, &pts, Quantity::R);
    let s_rho = samples_of(&window, &pts, Quantity::Rho);
    let s_rt = samples_of(&window, &pts, Quantity::RhoTilde);
    let probe_r = pair.probe(Quantity::R);
    let probe_rho = pair.probe(Quantity::Rho);
    let probe_rt = pair.probe(Quantity::RhoTilde);
    let mut diagnostics = Vec::new();

    let rho_pattern = detect_pattern(&s_rho, config.tol_zero, SignSource::RawValues, None);
    let rho_direction = match &rho_pattern {
        Ok(p) => match p.kind {
            PatternKind::Increasing => RhoDirection::Up,
            PatternKind::Decreasing => RhoDirection::Down,
            PatternKind::Constant => RhoDirection::ConstantRho,
            _ => RhoDirection::NotMonotone,
        },
        Err(_) => RhoDirection::NotMonotone,
    };
    if let Err(e) = &rho_pattern {
        diagnostics.push(format!("rho: {e}"));
    }
    if rho_direction == RhoDirection::NotMonotone {
        diagnostics.push("rho is not monotone on the window; the rule tables do not apply".into());
    }
    let sign_gg = pair.sign_gg();
    let predicted_family = rho_direction.direction().map(|d| predict_r_family(d, sign_gg));
    let predicted_rho_tilde = rho_direction.direction().map(|d| predict_rho_tilde_dir(d, sign_gg));

    let observed = detect_pattern(&s_rt, config.tol_zero, SignSource::DerivativeProxy, Some(&probe_rt));
    if let Err(e) = &observed {
        diagnostics.push(format!("r: {e}"));
    }
    let rho_tilde_pattern = detect_pattern(&s_rt, config.tol_zero, SignSource::RawValues, None);
    if let Err(e) = &rho_tilde_pattern {
        diagnostics.push(format!("rho_tilde: {e}"));
    }
    let level0 = match level0_of_samples(&s_rt, config.tol_zero, min_ic_len, &probe_rt) {
        Ok(l) => l,
        Err(e) => {
            diagnostics.push(format!("level-0 set: {e}"));
            None
        }
    };

    let mut mic_error = false;
    let mut mics_of = |name: &str, s, probe: &dyn Fn(f64) -> f64| {
        detect_mics(s, config.tol_const, min_ic_len, Some(probe)).unwrap_or_else(|e| {
            diagnostics.push(format!("m.i.c. of {name}: {e}"));
            mic_error = true;
            MicSet::default()
        })
    };
    let mics = Mics {
        r: mics_of("r", &s_r, &probe_r),
        rho: mics_of("rho", &s_rho, &probe_rho),
        rho_tilde: mics_of("rho_tilde", &s_rt, &probe_rt),
    };

    // observed family, switch = level-0 set, ρ̃ direction
    let prop1 = match (&observed, rho_direction) {
        (Ok(obs), RhoDirection::Up | RhoDirection::Down) => {
            let family = predicted_family.expect("monotone rho has a family");
            let in_family = family.contains(obs.kind);
            let switch_ok = switch_matches(obs, level0.as_ref(), &window, config.switch_tol);
            let tilde_ok = match (&rho_tilde_pattern, predicted_rho_tilde) {
                (Ok(p), Some(Direction::Up)) => {
                    matches!(p.kind, PatternKind::Increasing | PatternKind::Constant)
                }
                (Ok(p), Some(Direction::Down)) => {
                    matches!(p.kind, PatternKind::Decreasing | PatternKind::Constant)
                }
                _ => false,
            };
            if !in_family {
                diagnostics.push(format!("observed {} is not in the {family} family", obs.kind));
            }
            if !switch_ok {
                diagnostics.push(format!("switch {} does not match the level-0 set", obs.switch));
            }
            if !tilde_ok {
                diagnostics.push("rho_tilde direction does not follow rho".into());
            }
            in_family && switch_ok && tilde_ok
        }
        // r = K₁ + C/g is monotone
        (Ok(obs), RhoDirection::ConstantRho) => matches!(
            obs.kind,
            PatternKind::Increasing | PatternKind::Decreasing | PatternKind::Constant
        ),
        _ => false,
    };

    let uniqueness = !mic_error && mics.r.len() <= 1;
    if mics.r.len() > 1 {
        diagnostics.push(format!("r has {} maximal intervals of constancy", mics.r.len()));
    }

    // fits on every m.i.c. of ρ; C ≈ 0 exactly on the m.i.c. of r
    let match_tol = config.mic_match_steps * pair.grid_step();
    let r_mic = mics.r.intervals.first().copied();
    let mut fits = Vec::new();
    let mut prop2 = !mic_error;
    for j in mics.rho.iter() {
        let k1 = {
            let vals: Vec<f64> = pts.iter().filter(|p| j.contains(p.x)).map(|p| p.rho()).collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        };
        let is_r_mic = r_mic.is_some_and(|m| m.endpoint_distance(j) <= match_tol);
        let Some((c, c_relative, max_residual, samples)) = fit_constancy(&pts, j, k1) else {
            continue;
        };
        let residual_scale = 1.0 + max_abs(pts.iter().filter(|p| j.contains(p.x)).map(|p| p.r()));
        let fit_ok = max_residual <= config.tol_zero * residual_scale;
        let c_ok = (c_relative <= config.c_tol) == is_r_mic;
        if !fit_ok {
            diagnostics.push(format!("r - (K1 + C/g) residual {max_residual:e} on {j}"));
        }
        if !c_ok {
            diagnostics.push(format!("fitted C = {c:e} on {j} disagrees with the m.i.c. of r"));
        }
        prop2 &= fit_ok && c_ok;
        fits.push(ConstancyFit {
            interval: *j,
            k1,
            c,
            c_relative,
            max_residual,
            samples,
            is_r_mic,
        });
    }
    if let Some(m) = r_mic {
        let in_rho = mics.rho.closest(&m).is_some_and(|(_, d)| d <= match_tol);
        let in_rt = mics.rho_tilde.closest(&m).is_some_and(|(_, d)| d <= match_tol);
        let level0_ok = level0.is_some_and(|l| l.interval.endpoint_distance(&m) <= match_tol);
        if !(in_rho && in_rt && level0_ok) {
            diagnostics.push(format!(
                "m.i.c. {m} of r: in rho {in_rho}, in rho_tilde {in_rt}, level-0 {level0_ok}"
            ));
        }
        prop2 &= in_rho && in_rt && level0_ok;
    }
    // the m.i.c.'s of ρ and ρ̃ coincide
    let same_sets = mics.rho.len() == mics.rho_tilde.len()
        && mics
            .rho
            .iter()
            .zip(mics.rho_tilde.iter())
            .all(|(a, b)| a.endpoint_distance(b) <= match_tol);
    if !same_sets && rho_direction != RhoDirection::NotMonotone {
        diagnostics.push("m.i.c.'s of rho and rho_tilde differ".into());
        prop2 = false;
    }

    let rt_scale = 1.0 + s_rt.median_abs();
    let stats = sign_identity(pair, &pts, config, rt_scale);
    let sign_ok = stats.sign_violations == 0 && stats.identity_violations == 0;
    if !sign_ok {
        diagnostics.push(format!(
            "sign identity: {} sign and {} identity violations",
            stats.sign_violations, stats.identity_violations
        ));
    }

    let observed_pattern = observed.ok();
    Ok(AnalysisReport {
        pair: PairInfo {
            f: pair.f().describe(),
            g: pair.g().describe(),
            grid_n: pair.grid_n(),
        },
        window,
        sign_gg,
        rho_direction,
        rho_pattern: rho_pattern.ok(),
        predicted_family,
        switch: observed_pattern.map(|p| [p.switch.lo, p.switch.hi]),
        observed_pattern,
        level0,
        rho_tilde_pattern: rho_tilde_pattern.ok(),
        predicted_rho_tilde,
        mics,
        fits,
        sign_identity: stats,
        checks: Checks {
            prop1,
            prop2,
            uniqueness,
            sign_identity: sign_ok,
        },
        diagnostics,
        tolerances: *config,
    })
}

/// Outcome of checking a constructed pair against its prescription.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionCheck {
    /// `r` has exactly the chosen m.i.c., or none when the choice is a point.
    pub mic_ok: bool,
    /// Endpoint distance between the chosen interval and the detected one.
    pub mic_distance: Option<f64>,
    /// `max |f'/g' − ρ| / (1 + |ρ|)` over the grid.
    pub roundtrip_error: f64,
    pub roundtrip_ok: bool,
}

impl ConstructionCheck {
    pub fn passed(&self) -> bool {
        self.mic_ok && self.roundtrip_ok
    }
}

/// Compares a generated pair's analysis with the construction data.
pub fn check_construction(
    generated: &GeneratedPair,
    report: &AnalysisReport,
    endpoint_tol: f64,
    roundtrip_tol: f64,
) -> Result<ConstructionCheck, PairError> {
    let chosen = generated.chosen;
    let (mic_ok, mic_distance) = if chosen.is_nondegenerate() {
        match report.mics.r.intervals.as_slice() {
            [only] => {
                let d = only.endpoint_distance(&chosen);
                (d <= endpoint_tol, Some(d))
            }
            _ => (false, None),
        }
    } else {
        // a point choice: no m.i.c., and r switches at that point
        let d = report
            .observed_pattern
            .map(|p| p.switch.endpoint_distance(&chosen));
        (report.mics.r.is_empty() && d.is_some_and(|d| d <= endpoint_tol), d)
    };
    let pts = generated.pair.sample_points(generated.pair.grid_n())?;
    let mut roundtrip_error: f64 = 0.0;
    for p in &pts {
        let want = generated.rho.value(p.x)?;
        roundtrip_error = roundtrip_error.max((p.rho() - want).abs() / (1.0 + want.abs()));
    }
    Ok(ConstructionCheck {
        mic_ok,
        mic_distance,
        roundtrip_error,
        roundtrip_ok: roundtrip_error <= roundtrip_tol,
    })
}
