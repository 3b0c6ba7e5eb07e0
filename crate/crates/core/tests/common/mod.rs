#![allow(dead_code)]

use monotone_ratio::expr::{BinaryOp, Expr, UnaryOp};
use rand::Rng;

const UNARY: [UnaryOp; 9] = [
    UnaryOp::Neg,
    UnaryOp::Sin,
    UnaryOp::Cos,
    UnaryOp::Exp,
    UnaryOp::Log,
    UnaryOp::Sqrt,
    UnaryOp::Abs,
    UnaryOp::Atan,
    UnaryOp::Tanh,
];

const BINARY: [BinaryOp; 7] = [
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Pow,
    BinaryOp::Min,
    BinaryOp::Max,
];

/// Random expression tree of at most `depth` levels below the root.
pub fn random_expr<R: Rng>(rng: &mut R, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            Expr::Var
        } else {
            Expr::Const((rng.random_range(-3.0..3.0_f64) * 100.0).round() / 100.0)
        };
    }
    if rng.random_bool(0.4) {
        let op = UNARY[rng.random_range(0..UNARY.len())];
        Expr::unary(op, random_expr(rng, depth - 1))
    } else {
        let op = BINARY[rng.random_range(0..BINARY.len())];
        Expr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    }
}

/// Plain `f64` evaluation. `branches` records every sign or comparison that
/// selects a smooth piece, so stencils that straddle a kink can be detected.
pub fn eval_plain(e: &Expr, x: f64, branches: &mut Vec<i8>) -> f64 {
    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    match e {
        Expr::Const(c) => *c,
        Expr::Var => x,
        Expr::Unary(op, a) => {
            let v = eval_plain(a, x, branches);
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Log => {
                    branches.push(sign(v));
                    if v > 0.0 { v.ln() } else { f64::NAN }
                }
                UnaryOp::Sqrt => {
                    branches.push(sign(v));
                    if v > 0.0 { v.sqrt() } else { f64::NAN }
                }
                UnaryOp::Abs => {
                    branches.push(sign(v));
                    v.abs()
                }
                UnaryOp::Atan => v.atan(),
                UnaryOp::Tanh => v.tanh(),
            }
        }
        Expr::Binary(op, a, b) => {
            let u = eval_plain(a, x, branches);
            let v = eval_plain(b, x, branches);
            match op {
                BinaryOp::Add => u + v,
                BinaryOp::Sub => u - v,
                BinaryOp::Mul => u * v,
                BinaryOp::Div => {
                    branches.push(sign(v));
                    if v != 0.0 { u / v } else { f64::NAN }
                }
                BinaryOp::Pow => {
                    branches.push(sign(u));
                    if u > 0.0 || (u < 0.0 && v.fract() == 0.0 && b.is_constant()) {
                        u.powf(v)
                    } else {
                        f64::NAN
                    }
                }
                BinaryOp::Min => {
                    branches.push(sign(v - u));
                    u.min(v)
                }
                BinaryOp::Max => {
                    branches.push(sign(v - u));
                    u.max(v)
                }
            }
        }
    }
}

/// Outcome of comparing a dual-number derivative with finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdCheck {
    Agree,
    Disagree { ad: f64, fd: f64 },
    /// Domain fault, non-finite value or kink inside the stencil.
    Skipped,
}

/// Ridders' extrapolated central difference of the plain evaluator against
/// the dual derivative at `x`, within `rel` relative tolerance.
pub fn check_derivative(e: &Expr, x: f64, rel: f64) -> AdCheck {
    let Ok(dual) = monotone_ratio::expr::eval_dual(e, x) else {
        return AdCheck::Skipped;
    };
    if !dual.value.is_finite() || !dual.derivative.is_finite() || dual.value.abs() > 1e8 {
        return AdCheck::Skipped;
    }
    let mut base = Vec::new();
    let _ = eval_plain(e, x, &mut base);
    if base.contains(&0) {
        return AdCheck::Skipped;
    }
    let plain = |t: f64| {
        let mut sig = Vec::new();
        let v = eval_plain(e, t, &mut sig);
        (v.is_finite() && sig == base).then_some(v)
    };
    let scale = x.abs().max(1.0);
    let Some((fd, _)) = [1e-1, 1e-2, 1e-3, 1e-4]
        .into_iter()
        .filter_map(|h0| ridders(&plain, x, h0 * scale))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return AdCheck::Skipped;
    };
    let ad = dual.derivative;
    if (ad - fd).abs() <= rel * ad.abs().max(1.0) {
        AdCheck::Agree
    } else {
        AdCheck::Disagree { ad, fd }
    }
}

/// Ridders' method: central differences on a shrinking step sequence with
/// polynomial extrapolation from `h`, returning the estimate with the
/// smallest error and that error. `None` when no step keeps the stencil on
/// the same smooth piece.
fn ridders(f: &dyn Fn(f64) -> Option<f64>, x: f64, mut h: f64) -> Option<(f64, f64)> {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 24;
    const SAFE: f64 = 2.0;
    let central = |h: f64| Some((f(x + h)? - f(x - h)?) / (2.0 * h));
    let first = loop {
        if let Some(d) = central(h) {
            break d;
        }
        h /= CON;
        if h < 1e-9 {
            return None;
        }
    };
    let mut table = vec![vec![0.0; NTAB]; NTAB];
    table[0][0] = first;
    let mut best = first;
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        table[0][i] = central(h)?;
        let mut fac = CON2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    Some((best, err))
}
