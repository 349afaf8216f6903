//! Closed-form and brute-force reference objects: the exact blowup ODE,
//! the cosine-squared supersolution and its pointwise sufficient condition,
//! the plateau cutoff profile with edge asymptotics, the comparison
//! threshold between the sub-kappa and kappa amplitudes, the self-similar
//! window transform, and the Dirichlet heat kernel of the unit interval.

use crate::problem::{Nonlinearity, Potential, ProblemError};
use crate::solver::Trajectory;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("time {t} is at or beyond the blowup time {t_star}")]
    BeyondBlowup { t: f64, t_star: f64 },
    #[error("grid node {x} lies outside the ball B({x0}, {r})")]
    OutsideBall { x: f64, x0: f64, r: f64 },
    #[error("cutoff parameters infeasible: {detail} (gradient-term ok: {grad_ok}, laplacian-term ok: {lap_ok})")]
    InfeasibleCutoff {
        detail: String,
        grad_ok: bool,
        lap_ok: bool,
    },
    #[error("requested window leaves the trajectory support: {0}")]
    WindowOutOfSupport(String),
    #[error("nonlinearity {0} has no power exponent; the rescaling is undefined")]
    NotPowerLike(String),
    #[error("supersolution search failed: {0}")]
    SearchFailed(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

// ---------------------------------------------------------------------------
// Exact ODE blowup
// ---------------------------------------------------------------------------

/// Solution of u' = A u^p, u(0) = u0: blows up at T = u0^(1-p) / ((p-1) A)
/// with u(t) = [(p-1) A (T-t)]^(-alpha).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeBlowup {
    pub t_star: f64,
    pub alpha: f64,
    pub p: f64,
    pub a_coeff: f64,
}

pub fn exact_ode_blowup(u0: f64, p: f64, a_coeff: f64) -> Result<OdeBlowup, OracleError> {
    if !(u0 > 0.0 && p > 1.0 && a_coeff > 0.0) {
        return Err(OracleError::InvalidInput(format!(
            "need u0 > 0, p > 1, A > 0; got u0={u0}, p={p}, A={a_coeff}"
        )));
    }
    Ok(OdeBlowup {
        t_star: u0.powf(1.0 - p) / ((p - 1.0) * a_coeff),
        alpha: 1.0 / (p - 1.0),
        p,
        a_coeff,
    })
}

impl OdeBlowup {
    pub fn u_at(&self, t: f64) -> Result<f64, OracleError> {
        if t >= self.t_star {
            return Err(OracleError::BeyondBlowup {
                t,
                t_star: self.t_star,
            });
        }
        Ok(((self.p - 1.0) * self.a_coeff * (self.t_star - t)).powf(-self.alpha))
    }

    /// (T-t)^alpha u(t), constant in t and equal to kappa A^(-alpha).
    pub fn amplitude(&self) -> f64 {
        ((self.p - 1.0) * self.a_coeff).powf(-self.alpha)
    }
}

// ---------------------------------------------------------------------------
// Supersolution w = K / [q(x) + (T-t)]^alpha
// ---------------------------------------------------------------------------

/// Self-similar supersolution with the cosine-squared weight
/// q(x) = beta cos^2(pi |x-x0| / 2r). Dominates any type-I solution near a
/// potential zero once the pointwise condition `pointwise_condition` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Supersolution {
    pub k_amp: f64,
    pub beta: f64,
    pub r: f64,
    pub x0: f64,
    pub t_star: f64,
    pub alpha: f64,
    /// ambient dimension for the Laplacian of q
    pub dim: u32,
}

impl Supersolution {
    fn xi(&self, x: f64) -> f64 {
        std::f64::consts::PI * (x - self.x0).abs() / (2.0 * self.r)
    }

    pub fn q(&self, x: f64) -> f64 {
        let c = self.xi(x).cos();
        self.beta * c * c
    }

    fn q_prime(&self, rho: f64) -> f64 {
        let xi = std::f64::consts::PI * rho / (2.0 * self.r);
        -(self.beta * std::f64::consts::PI / (2.0 * self.r)) * (2.0 * xi).sin()
    }

    fn q_second(&self, rho: f64) -> f64 {
        let xi = std::f64::consts::PI * rho / (2.0 * self.r);
        -(self.beta * std::f64::consts::PI.powi(2) / (2.0 * self.r * self.r)) * (2.0 * xi).cos()
    }

    pub fn laplacian_q(&self, x: f64) -> f64 {
        let rho = (x - self.x0).abs();
        if rho < 1e-12 * self.r {
            // symmetric limit: q'(rho)/rho -> q''(0)
            return self.dim as f64 * self.q_second(0.0);
        }
        self.q_second(rho) + (self.dim - 1) as f64 / rho * self.q_prime(rho)
    }

    /// |∇q|^2 / q in closed form: beta (pi/r)^2 sin^2(xi); finite up to the
    /// ball edge where q itself vanishes.
    pub fn grad_sq_over_q(&self, x: f64) -> f64 {
        let s = self.xi(x).sin();
        self.beta * (std::f64::consts::PI / self.r).powi(2) * s * s
    }

    pub fn w(&self, t: f64, x: f64) -> f64 {
        self.k_amp * (self.q(x) + (self.t_star - t)).powf(-self.alpha)
    }

    /// PDE residual w_t - Δw - V(x) C (1+w)^p; nonnegative means w is a
    /// supersolution at (t, x).
    pub fn residual(&self, t: f64, x: f64, v: f64, c_growth: f64, p: f64) -> f64 {
        let d = self.q(x) + (self.t_star - t);
        let parabolic = self.alpha * self.k_amp * d.powf(-self.alpha - 1.0)
            * (1.0 + self.laplacian_q(x) - (self.alpha + 1.0) * self.q_prime((x - self.x0).abs()).powi(2) / d);
        let w = self.k_amp * d.powf(-self.alpha);
        parabolic - v * c_growth * (1.0 + w).powf(p)
    }

    /// Time-independent sufficient condition
    /// 1 + Δq - (alpha+1) |∇q|^2/q - (2C/alpha) K^(p-1) V(x) >= 0.
    pub fn pointwise_condition(&self, x: f64, v: f64, c_growth: f64, p: f64) -> f64 {
        1.0 + self.laplacian_q(x)
            - (self.alpha + 1.0) * self.grad_sq_over_q(x)
            - (2.0 * c_growth / self.alpha) * self.k_amp.powf(p - 1.0) * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub min_residual: f64,
    pub condition_min: f64,
}

/// Evaluates the PDE residual (over the grid and a 64-point time sample in
/// (0, T)) and the pointwise sufficient condition (time-independent, over
/// the grid); returns both minima.
pub fn supersolution_residual(
    s: &Supersolution,
    potential: &Potential,
    c_growth: f64,
    p: f64,
    grid: &[f64],
) -> Result<ResidualReport, OracleError> {
    for &x in grid {
        if (x - s.x0).abs() > s.r * (1.0 + 1e-12) {
            return Err(OracleError::OutsideBall { x, x0: s.x0, r: s.r });
        }
    }
    let mut min_residual = f64::INFINITY;
    let mut condition_min = f64::INFINITY;
    for &x in grid {
        let v = potential.eval(x);
        condition_min = condition_min.min(s.pointwise_condition(x, v, c_growth, p));
        for k in 0..64 {
            let t = s.t_star * (k as f64 + 0.5) / 64.0;
            min_residual = min_residual.min(s.residual(t, x, v, c_growth, p));
        }
    }
    Ok(ResidualReport {
        min_residual,
        condition_min: condition_min,
    })
}

/// Searches (K, then r, then beta) in the proof's quantifier order by
/// geometric bisection, 40 steps per parameter: K above the type-I
/// amplitude and the initial data, r small enough that
/// (2C/alpha) K^(p-1) V < 1/3 on the ball, beta small enough that the
/// pointwise condition holds.
#[allow(clippy::too_many_arguments)]
pub fn search_supersolution(
    potential: &Potential,
    c_growth: f64,
    p: f64,
    m_amp: f64,
    x0: f64,
    rho: f64,
    u0_max: f64,
    t_star: f64,
    dim: u32,
) -> Result<Supersolution, OracleError> {
    if !(p > 1.0 && rho > 0.0 && t_star > 0.0 && c_growth > 0.0) {
        return Err(OracleError::InvalidInput(
            "need p > 1, rho > 0, T > 0, C > 0".into(),
        ));
    }
    let alpha = 1.0 / (p - 1.0);
    let mut k_amp = 1.05 * m_amp.max(1e-6);
    for _ in 0..40 {
        // r: shrink until the potential term is below 1/3 on the ball
        let mut r = 0.499 * rho;
        let mut r_ok = false;
        for _ in 0..40 {
            let v_max = (0..=200)
                .map(|i| potential.eval(x0 - r + 2.0 * r * i as f64 / 200.0))
                .fold(f64::NEG_INFINITY, f64::max);
            if (2.0 * c_growth / alpha) * k_amp.powf(p - 1.0) * v_max < 1.0 / 3.0 {
                r_ok = true;
                break;
            }
            r *= 0.5;
        }
        if !r_ok {
            return Err(OracleError::SearchFailed(format!(
                "no admissible radius below {rho} for K = {k_amp}"
            )));
        }
        // beta: shrink until the pointwise condition clears zero
        let mut beta = 0.5;
        let mut found = None;
        for _ in 0..40 {
            let cand = Supersolution {
                k_amp,
                beta,
                r,
                x0,
                t_star,
                alpha,
                dim,
            };
            let cond_min = (0..=400)
                .map(|i| {
                    let x = x0 - r + 2.0 * r * i as f64 / 400.0;
                    cand.pointwise_condition(x, potential.eval(x), c_growth, p)
                })
                .fold(f64::INFINITY, f64::min);
            if cond_min > 0.0 {
                found = Some(cand);
                break;
            }
            beta *= 0.5;
        }
        let Some(cand) = found else {
            return Err(OracleError::SearchFailed(format!(
                "condition (q-weight) not satisfiable at K = {k_amp}, r = {r}"
            )));
        };
        // the comparison also needs w(0, .) >= u0 on the ball
        let w_min_initial = cand.k_amp * (cand.beta + t_star).powf(-alpha);
        if w_min_initial >= u0_max {
            return Ok(cand);
        }
        k_amp *= 2.0;
    }
    Err(OracleError::SearchFailed(
        "no K covering the initial data within 40 doublings".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub holds: bool,
    /// max over checked space-time samples of u / w
    pub max_ratio: f64,
    pub nodes_checked: usize,
    pub snapshots_checked: usize,
}

/// Direct comparison u <= w over every stored snapshot, on the ball nodes.
pub fn check_dominance(
    traj: &Trajectory,
    grid: &[f64],
    s: &Supersolution,
) -> DominanceReport {
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&i| (grid[i] - s.x0).abs() <= s.r)
        .collect();
    let mut max_ratio = 0.0f64;
    let mut snapshots_checked = 0;
    for snap in &traj.snapshots {
        if snap.t >= s.t_star {
            break;
        }
        snapshots_checked += 1;
        for &i in &nodes {
            let w = s.w(snap.t, grid[i]);
            max_ratio = max_ratio.max(snap.u[i] / w);
        }
    }
    DominanceReport {
        holds: max_ratio <= 1.0 + 1e-9,
        max_ratio,
        nodes_checked: nodes.len(),
        snapshots_checked,
    }
}

// ---------------------------------------------------------------------------
// Cutoff profile
// ---------------------------------------------------------------------------

/// Contact point of the bridge: the profile vanishes at |x| = 2R/3.
pub const CUTOFF_A: f64 = 2.0 / 3.0;

// h(s) = tau^3 (1 + C1 tau + C2 tau^2 + C3 tau^3) with tau = 2/3 - s is the
// minimal-degree polynomial meeting h(1/2)=1, h'(1/2)=h''(1/2)=0,
// h(a)=h'(a)=h''(a)=0, h'''(a)=-6. Coefficients are exact integers.
const H_C1: f64 = 19422.0;
const H_C2: f64 = -186516.0;
const H_C3: f64 = 466344.0;

/// The cubic-contact blending polynomial on [1/2, 2/3].
pub fn cutoff_h(s: f64) -> f64 {
    let tau = CUTOFF_A - s;
    tau.powi(3) * (1.0 + H_C1 * tau + H_C2 * tau * tau + H_C3 * tau.powi(3))
}

/// dh/ds = -dh/dtau.
pub fn cutoff_h_d1(s: f64) -> f64 {
    let tau = CUTOFF_A - s;
    -(3.0 * tau.powi(2)
        + 4.0 * H_C1 * tau.powi(3)
        + 5.0 * H_C2 * tau.powi(4)
        + 6.0 * H_C3 * tau.powi(5))
}

/// d2h/ds2 = +d2h/dtau2.
pub fn cutoff_h_d2(s: f64) -> f64 {
    let tau = CUTOFF_A - s;
    6.0 * tau + 12.0 * H_C1 * tau.powi(2) + 20.0 * H_C2 * tau.powi(3) + 30.0 * H_C3 * tau.powi(4)
}

/// d3h/ds3 = -d3h/dtau3; equals -6 at the contact point.
pub fn cutoff_h_d3(s: f64) -> f64 {
    let tau = CUTOFF_A - s;
    -(6.0 + 24.0 * H_C1 * tau + 60.0 * H_C2 * tau.powi(2) + 120.0 * H_C3 * tau.powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffProfile {
    pub r_outer: f64,
    pub sigma: f64,
    pub level: u32,
    /// (|x|/R, phi) samples on a uniform grid of the radius
    pub samples: Vec<(f64, f64)>,
    /// sup over {phi > 0} of (|phi'|^2 + |Δ(phi^2)|) / phi^sigma
    pub c_inferred: f64,
}

/// psi(s) = 1 below 1/2, h(s)^l on the bridge, 0 beyond 2/3; phi and its
/// derivatives in closed form.
fn psi_and_derivatives(s: f64, l: u32) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= CUTOFF_A {
        return (0.0, 0.0, 0.0);
    }
    let h = cutoff_h(s);
    let h1 = cutoff_h_d1(s);
    let h2 = cutoff_h_d2(s);
    let lf = l as f64;
    let psi = h.powi(l as i32);
    let psi1 = lf * h.powi(l as i32 - 1) * h1;
    let psi2 = lf * (lf - 1.0) * h.powi(l as i32 - 2) * h1 * h1 + lf * h.powi(l as i32 - 1) * h2;
    (psi, psi1, psi2)
}

/// Evaluates phi_R(x) = psi(|x|/R) at a point.
pub fn cutoff_phi(x: f64, r_outer: f64, l: u32) -> f64 {
    psi_and_derivatives(x.abs() / r_outer, l).0
}

/// Builds the sampled cutoff profile and infers the constant of the
/// gradient/Laplacian bound. The edge asymptotics psi ~ (a-s)^(3l) demand
/// 2(3l-1) >= 3 sigma l for the gradient term and 3l-2 >= 3 sigma for the
/// second-derivative term; infeasible pairs are rejected with the verdict
/// of each term.
pub fn cutoff_build(
    r_outer: f64,
    l: u32,
    sigma: f64,
    n_samples: usize,
) -> Result<CutoffProfile, OracleError> {
    if !(r_outer > 0.0) || !(sigma > 0.0 && sigma < 2.0) {
        return Err(OracleError::InvalidInput(format!(
            "need R > 0 and 0 < sigma < 2; got R={r_outer}, sigma={sigma}"
        )));
    }
    let grad_ok = 2.0 * (3.0 * l as f64 - 1.0) >= 3.0 * sigma * l as f64;
    let lap_ok = 3.0 * l as f64 - 2.0 >= 3.0 * sigma;
    if l < 2 || !grad_ok || !lap_ok {
        return Err(OracleError::InfeasibleCutoff {
            detail: format!(
                "l = {l}, sigma = {sigma}: need l >= 2, 2(3l-1) >= 3*sigma*l ({} vs {}), 3l-2 >= 3*sigma ({} vs {})",
                2 * (3 * l - 1),
                3.0 * sigma * l as f64,
                3 * l as i64 - 2,
                3.0 * sigma
            ),
            grad_ok,
            lap_ok,
        });
    }
    let n = n_samples.max(64);
    let mut samples = Vec::with_capacity(n + 1);
    let mut c_inferred = 0.0f64;
    for i in 0..=n {
        let s = i as f64 / n as f64; // |x|/R over [0, 1]
        let (psi, psi1, psi2) = psi_and_derivatives(s, l);
        samples.push((s, psi));
        if psi > 0.0 {
            let phi1 = psi1 / r_outer;
            let phi2 = psi2 / (r_outer * r_outer);
            let lap_phi_sq = 2.0 * phi1 * phi1 + 2.0 * psi * phi2;
            let ratio = (phi1 * phi1 + lap_phi_sq.abs()) / psi.powf(sigma);
            if ratio > c_inferred {
                c_inferred = ratio;
            }
        }
    }
    Ok(CutoffProfile {
        r_outer,
        sigma,
        level: l,
        samples,
        c_inferred,
    })
}

// ---------------------------------------------------------------------------
// Comparison threshold (choice of B between k A^-alpha and kappa A^-alpha)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdCheck {
    pub ok: bool,
    pub margin: f64,
    pub b_used: f64,
    pub kappa: f64,
}

/// With B the midpoint of (k A^-alpha, kappa A^-alpha), checks
/// B alpha - A B^p - epsilon >= C_eps tau0^(p alpha) and returns the margin.
pub fn comparison_threshold_check(
    p: f64,
    a_coeff: f64,
    k: f64,
    epsilon: f64,
    c_eps: f64,
    tau0: f64,
) -> Result<ThresholdCheck, OracleError> {
    if !(p > 1.0 && a_coeff > 0.0) {
        return Err(OracleError::InvalidInput("need p > 1 and A > 0".into()));
    }
    let alpha = 1.0 / (p - 1.0);
    let kappa = alpha.powf(alpha);
    if !(k > 0.0 && k < kappa) {
        return Err(OracleError::InvalidInput(format!(
            "need 0 < k < kappa = {kappa}, got k = {k}"
        )));
    }
    let scale = a_coeff.powf(-alpha);
    let b_used = 0.5 * (k + kappa) * scale;
    let margin = b_used * alpha - a_coeff * b_used.powf(p) - epsilon - c_eps * tau0.powf(p * alpha);
    Ok(ThresholdCheck {
        ok: margin > 0.0,
        margin,
        b_used,
        kappa,
    })
}

/// Exponent m = (1+2 epsilon) k^(p-1) of the intermediate bound; the
/// construction needs m < alpha, which is enforced here. epsilon is the
/// caller's choice.
pub fn intermediate_exponent(p: f64, k: f64, epsilon: f64) -> Result<f64, OracleError> {
    if !(p > 1.0) || !(epsilon > 0.0) {
        return Err(OracleError::InvalidInput(
            "need p > 1 and epsilon > 0".into(),
        ));
    }
    let alpha = 1.0 / (p - 1.0);
    let kappa = alpha.powf(alpha);
    if !(k > 0.0 && k < kappa) {
        return Err(OracleError::InvalidInput(format!(
            "need 0 < k < kappa = {kappa}, got k = {k}"
        )));
    }
    let m = (1.0 + 2.0 * epsilon) * k.powf(p - 1.0);
    if m >= alpha {
        return Err(OracleError::InvalidInput(format!(
            "epsilon = {epsilon} too large: m = {m} must stay below alpha = {alpha}"
        )));
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Self-similar rescaling
// ---------------------------------------------------------------------------

/// v(s, y) = lambda^(2 alpha) u(t_hat + lambda^2 s, x0 + lambda y) with
/// lambda = sqrt(T - t_hat), sampled on a regular (s, y) lattice by
/// bilinear interpolation of the stored snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledWindow {
    pub lambda: f64,
    pub t_hat: f64,
    pub x0: f64,
    pub alpha: f64,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// v[si][yi]
    pub v: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn rescale_window(
    traj: &Trajectory,
    grid: &[f64],
    t_star: f64,
    t_hat: f64,
    x0: f64,
    alpha: f64,
    s_range: (f64, f64),
    y_max: f64,
    n_s: usize,
    n_y: usize,
) -> Result<RescaledWindow, OracleError> {
    if !(t_hat < t_star) {
        return Err(OracleError::InvalidInput(format!(
            "need t_hat < T, got t_hat = {t_hat}, T = {t_star}"
        )));
    }
    if !(s_range.0 < s_range.1 && s_range.1 < 1.0) {
        return Err(OracleError::InvalidInput(
            "s range must be increasing and stay below 1".into(),
        ));
    }
    let lambda = (t_star - t_hat).sqrt();
    let t_first = traj.snapshots[0].t;
    let t_last = traj.last().t;
    let (x_lo, x_hi) = (grid[0], grid[grid.len() - 1]);
    let t_of = |s: f64| t_hat + lambda * lambda * s;
    let x_of = |y: f64| x0 + lambda * y;
    if t_of(s_range.0) < t_first - 1e-14 || t_of(s_range.1) > t_last * (1.0 + 1e-14) + 1e-300 {
        return Err(OracleError::WindowOutOfSupport(format!(
            "time window [{}, {}] vs stored [{t_first}, {t_last}]",
            t_of(s_range.0),
            t_of(s_range.1)
        )));
    }
    if x_of(-y_max) < x_lo - 1e-14 || x_of(y_max) > x_hi + 1e-14 {
        return Err(OracleError::WindowOutOfSupport(format!(
            "space window [{}, {}] vs grid [{x_lo}, {x_hi}]",
            x_of(-y_max),
            x_of(y_max)
        )));
    }

    let s_nodes: Vec<f64> = (0..=n_s)
        .map(|i| s_range.0 + (s_range.1 - s_range.0) * i as f64 / n_s as f64)
        .collect();
    let y_nodes: Vec<f64> = (0..=n_y)
        .map(|j| -y_max + 2.0 * y_max * j as f64 / n_y as f64)
        .collect();
    let scale = lambda.powf(2.0 * alpha);
    let mut v = Vec::with_capacity(s_nodes.len());
    for &s in &s_nodes {
        let t = t_of(s).clamp(t_first, t_last);
        // bracketing snapshots in time
        let hi = traj
            .snapshots
            .partition_point(|snap| snap.t < t)
            .min(traj.snapshots.len() - 1);
        let lo = hi.saturating_sub(1);
        let (ta, tb) = (traj.snapshots[lo].t, traj.snapshots[hi].t);
        let w = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        let mut row = Vec::with_capacity(y_nodes.len());
        for &y in &y_nodes {
            let x = x_of(y).clamp(x_lo, x_hi);
            let ua = sample_linear(grid, &traj.snapshots[lo].u, x);
            let ub = sample_linear(grid, &traj.snapshots[hi].u, x);
            row.push(scale * ((1.0 - w) * ua + w * ub));
        }
        v.push(row);
    }
    Ok(RescaledWindow {
        lambda,
        t_hat,
        x0,
        alpha,
        s: s_nodes,
        y: y_nodes,
        v,
    })
}

impl RescaledWindow {
    /// Inverse transform: u(t, x) recovered from the window samples.
    pub fn u_from(&self, t: f64, x: f64) -> Option<f64> {
        let s = (t - self.t_hat) / (self.lambda * self.lambda);
        let y = (x - self.x0) / self.lambda;
        if s < self.s[0] || s > *self.s.last().unwrap() || y < self.y[0] || y > *self.y.last().unwrap()
        {
            return None;
        }
        let si = self.s.partition_point(|&v| v < s).clamp(1, self.s.len() - 1);
        let yi = self.y.partition_point(|&v| v < y).clamp(1, self.y.len() - 1);
        let (s0, s1) = (self.s[si - 1], self.s[si]);
        let (y0, y1) = (self.y[yi - 1], self.y[yi]);
        let ws = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let wy = if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.0 };
        let v00 = self.v[si - 1][yi - 1];
        let v01 = self.v[si - 1][yi];
        let v10 = self.v[si][yi - 1];
        let v11 = self.v[si][yi];
        let v = (1.0 - ws) * ((1.0 - wy) * v00 + wy * v01) + ws * ((1.0 - wy) * v10 + wy * v11);
        Some(self.lambda.powf(-2.0 * self.alpha) * v)
    }
}

fn sample_linear(grid: &[f64], u: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return u[0];
    }
    if x >= grid[grid.len() - 1] {
        return u[u.len() - 1];
    }
    let j = grid.partition_point(|&g| g <= x).min(grid.len() - 1);
    let (x0, x1) = (grid[j - 1], grid[j]);
    let w = (x - x0) / (x1 - x0);
    u[j - 1] * (1.0 - w) + u[j] * w
}

/// f_lambda(v) = lambda^(2p/(p-1)) f(lambda^(-2/(p-1)) v); identically v^p
/// for the pure power kind.
pub fn rescaled_nonlinearity(
    f: &Nonlinearity,
    lambda: f64,
    v: f64,
) -> Result<f64, OracleError> {
    if !(lambda > 0.0) || v < 0.0 {
        return Err(OracleError::InvalidInput(format!(
            "need lambda > 0 and v >= 0, got lambda={lambda}, v={v}"
        )));
    }
    let p = f
        .power_exponent()
        .ok_or_else(|| OracleError::NotPowerLike(f.describe()))?;
    let inner = lambda.powf(-2.0 / (p - 1.0)) * v;
    let r = f.eval(inner)?;
    Ok(lambda.powf(2.0 * p / (p - 1.0)) * r.f)
}

// ---------------------------------------------------------------------------
// Dirichlet heat kernel of (0, 1)
// ---------------------------------------------------------------------------

/// G(t, x, y) = sum_k 2 sin(k pi x) sin(k pi y) e^(-k^2 pi^2 t), truncated
/// once the geometric tail bound drops below 1e-13.
pub fn dirichlet_heat_kernel(
    t: f64,
    x: f64,
    y: f64,
    max_terms: usize,
) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::InvalidInput(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut sum = 0.0;
    for k in 1..=max_terms.max(1) {
        let kf = k as f64;
        let decay = (-kf * kf * pi * pi * t).exp();
        sum += 2.0 * (kf * pi * x).sin() * (kf * pi * y).sin() * decay;
        // remaining terms are dominated by a geometric series with ratio
        // exp(-(2k+1) pi^2 t)
        let ratio = (-(2.0 * kf + 1.0) * pi * pi * t).exp();
        if 2.0 * decay * ratio / (1.0 - ratio) < 1e-13 {
            break;
        }
    }
    Ok(sum)
}

/// Boundary flux dG/dy at y = 0 by termwise differentiation.
pub fn dirichlet_heat_flux(t: f64, x: f64, max_terms: usize) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::InvalidInput(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut sum = 0.0;
    for k in 1..=max_terms.max(1) {
        let kf = k as f64;
        let decay = (-kf * kf * pi * pi * t).exp();
        sum += 2.0 * kf * pi * (kf * pi * x).sin() * decay;
        let ratio = (-(2.0 * kf + 1.0) * pi * pi * t).exp();
        if 2.0 * (kf + 1.0) * pi * decay * ratio / (1.0 - ratio) < 1e-13 {
            break;
        }
    }
    Ok(sum)
}

/// Exact termwise integral of G over y in (0, 1): only odd modes survive.
pub fn dirichlet_heat_mass(t: f64, x: f64, max_terms: usize) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::InvalidInput(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut sum = 0.0;
    for k in (1..=max_terms.max(1)).step_by(2) {
        let kf = k as f64;
        let decay = (-kf * kf * pi * pi * t).exp();
        sum += 4.0 / (kf * pi) * (kf * pi * x).sin() * decay;
        if 4.0 / (kf * pi) * decay < 1e-14 {
            break;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelFit {
    pub c1: f64,
    pub c2: f64,
    pub samples: usize,
    pub violations: usize,
}

/// Fits positive constants (c1, c2) such that
/// G(t,x,y) >= c1 min(rho(x) rho(y)/t, 1) t^(-1/2) exp(-c2 |x-y|^2/t) on a
/// sample of t in [t_lo, t_hi] and interior x, y, then re-verifies that no
/// sample violates the fitted bound.
pub fn fit_heat_kernel_lower_bound(t_lo: f64, t_hi: f64) -> Result<HeatKernelFit, OracleError> {
    if !(0.0 < t_lo && t_lo < t_hi) {
        return Err(OracleError::InvalidInput("need 0 < t_lo < t_hi".into()));
    }
    let rho = |x: f64| x.min(1.0 - x);
    let times: Vec<f64> = (0..12)
        .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / 11.0))
        .collect();
    let coords: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let shape = |c2: f64, t: f64, x: f64, y: f64| {
        (rho(x) * rho(y) / t).min(1.0) * t.powf(-0.5) * (-c2 * (x - y) * (x - y) / t).exp()
    };
    // c1(c2) is nondecreasing in c2; take the smallest c2 whose floor is
    // within 90% of the saturated value
    let c2_grid: Vec<f64> = (0..9).map(|j| 0.25 * 2f64.powi(j)).collect();
    let c1_of = |c2: f64| -> Result<f64, OracleError> {
        let mut c1 = f64::INFINITY;
        for &t in &times {
            for &x in &coords {
                for &y in &coords {
                    let g = dirichlet_heat_kernel(t, x, y, 10_000)?;
                    c1 = c1.min(g / shape(c2, t, x, y));
                }
            }
        }
        Ok(c1)
    };
    let c1_sat = c1_of(*c2_grid.last().unwrap())?;
    let mut chosen = (*c2_grid.last().unwrap(), c1_sat);
    for &c2 in &c2_grid {
        let c1 = c1_of(c2)?;
        if c1 >= 0.9 * c1_sat && c1 > 0.0 {
            chosen = (c2, c1);
            break;
        }
    }
    let (c2, c1_raw) = chosen;
    let c1 = c1_raw * (1.0 - 1e-9);
    let mut violations = 0;
    let mut samples = 0;
    for &t in &times {
        for &x in &coords {
            for &y in &coords {
                samples += 1;
                let g = dirichlet_heat_kernel(t, x, y, 10_000)?;
                if g < c1 * shape(c2, t, x, y) {
                    violations += 1;
                }
            }
        }
    }
    Ok(HeatKernelFit {
        c1,
        c2,
        samples,
        violations,
    })
}
