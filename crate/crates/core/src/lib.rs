//! Numerical laboratory for the semilinear heat equation
//! u_t = Δu + V(x) f(u) on 1D intervals and radial domains: integration to
//! blowup, rate and deviation diagnostics, comparison-principle oracles,
//! sublevel-set topology of the potential, and an experiment harness.

// Guards are written as !(x > 0.0) on purpose: the negated form rejects
// NaN inputs, which x <= 0.0 would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// numeric kernels index several grid arrays in lockstep
#![allow(clippy::needless_range_loop)]

pub mod csvio;
pub mod diagnostics;
pub mod expr;
pub mod harness;
pub mod oracles;
pub mod problem;
pub mod solver;
pub mod zeroset;
