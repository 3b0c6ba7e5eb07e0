//! Adaptive Simpson quadrature.

use thiserror::Error;

use crate::func::EvalError;

/// Maximum recursion depth before a panel is declared non-convergent.
pub const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("panel [{a}, {b}] did not reach the requested tolerance within depth {MAX_DEPTH}")]
    NonConvergence { a: f64, b: f64 },
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Each panel compares the coarse Simpson estimate with the sum of its two
/// halves; the error estimate is `|fine − coarse| / 15` and accepted panels
/// return the Richardson-corrected value. `b < a` yields the negated
/// integral over `[b, a]`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (eval(a)?, eval(m)?, eval(b)?);
    let panel = Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
    };
    refine(&eval, panel, tol, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine(
    eval: &dyn Fn(f64) -> Result<f64, QuadError>,
    p: Panel,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadError> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let (flm, frm) = (eval(lm)?, eval(rm)?);
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    // a panel narrower than float resolution cannot be split further
    let collapsed = lm <= p.a || rm >= p.b;
    if delta.abs() <= 15.0 * tol || collapsed {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(QuadError::NonConvergence { a: p.a, b: p.b });
    }
    let l = refine(
        eval,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        },
        0.5 * tol,
        depth - 1,
    )?;
    let r = refine(
        eval,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        },
        0.5 * tol,
        depth - 1,
    )?;
    Ok(l + r)
}
