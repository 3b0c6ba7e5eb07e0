//! Monotonicity patterns and intervals of constancy of ratios `r = f/g`.
//!
//! The behaviour of `r` is read off the derivative ratio `ρ = f'/g'` and the
//! transform `ρ̃ = r'g²/|g'|`:
//!
//! - if `ρ` is monotone and `gg'` has constant sign, `r` is non-increasing,
//!   then constant on some `[c, d]`, then non-decreasing (or the mirror
//!   pattern), with `[c, d]` the level-0 set of `ρ̃`;
//! - `r` has at most one maximal interval of constancy, and it is also one
//!   of `ρ` and of `ρ̃`;
//! - any flat of `ρ` can be made the flat of `r` by choosing `f` as
//!   `K·g(z) + ∫_z^x ρ dg`.
//!
//! Modules: [`expr`] parses and differentiates expressions, [`ratio`] builds
//! validated pairs, [`patterns`] does the sampled detection, [`rules`] runs
//! the checks, [`construct`] builds `f` from `ρ`, and [`cli`] is the command
//! line front end.

pub mod cli;
pub mod construct;
pub mod dual;
pub mod expr;
pub mod func;
pub mod interval;
pub mod patterns;
pub mod quad;
pub mod ratio;
pub mod rules;

pub use dual::Dual;
pub use func::{DiffFn, DifferentiableFn, EvalError};
pub use interval::Interval;
pub use ratio::{make_pair, FunctionPair, PairError, Quantity, Sign};
