//! Quantitative diagnostics on computed trajectories: type-I rate fits,
//! the reaction-dominance (ODE-behavior) deviation ratio, the J = u_t - εf
//! monotonicity functional, the eigenfunction-weighted Kaplan mass,
//! reflection/monotonicity checks, the nondegeneracy floor at a blowup
//! point, and double-log rate fits for slowly growing nonlinearities.

use crate::problem::ProblemSpec;
use crate::solver::{laplacian_apply, linear_fit, SolutionState, Trajectory};
use crate::zeroset::RegionMask;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("insufficient data: need {need} frames in the fit window, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("mask reaches within {dist} nodes of the domain boundary (need >= 3)")]
    MaskTouchesBoundary { dist: usize },
    #[error("potential is not bounded away from zero on the dilated mask (min = {min_v:e})")]
    MaskWhereVVanishes { min_v: f64 },
    #[error("nonlinearity {0} has no power exponent; the deviation ratio needs u^p")]
    NotPowerLike(String),
    #[error("epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("nonlinearity must be convex for the J functional")]
    NotConvex,
    #[error("ell = {ell} exceeds the domain half-width {half}")]
    EllTooWide { ell: f64, half: f64 },
    #[error("domain is not an interval symmetric about 0")]
    NotSymmetricInterval,
    #[error("{x0} is not a blowup point: scaled amplitude {amplitude:e} is far below the threshold {threshold:e}")]
    NotABlowupPoint {
        x0: f64,
        amplitude: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
}

// ---------------------------------------------------------------------------
// Type-I rate fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// fitted exponent of (T-t)^-exponent (estimates alpha)
    pub exponent_hat: f64,
    /// fitted amplitude (estimates the type-I constant M)
    pub amplitude_hat: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub frames: usize,
}

/// Regression of log(max u) on log(T_hat - t) over frames with max u in
/// [1e3, 1e10]. The last 2% of the (T_hat - t) range is excluded: those
/// frames are discretization-dominated.
pub fn fit_type_one_rate(
    traj: &Trajectory,
    t_hat: f64,
) -> Result<RateFit, DiagnosticsError> {
    let series = traj.max_value_series();
    let tau_hi = series
        .iter()
        .find(|&&(_, u)| (1e3..=1e10).contains(&u))
        .map(|&(t, _)| t_hat - t)
        .unwrap_or(0.0);
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(t, u)| {
            let tau = t_hat - t;
            (1e3..=1e10).contains(&u) && tau > 0.02 * tau_hi && tau > 0.0
        })
        .map(|&(t, u)| ((t_hat - t).ln(), u.ln()))
        .collect();
    if points.len() < 20 {
        return Err(DiagnosticsError::InsufficientData {
            need: 20,
            have: points.len(),
        });
    }
    let (slope, intercept, r2) = linear_fit(&points);
    let t_lo = t_hat - points[0].0.exp();
    let t_hi = t_hat - points[points.len() - 1].0.exp();
    Ok(RateFit {
        exponent_hat: -slope,
        amplitude_hat: intercept.exp(),
        r_squared: r2,
        window: (t_lo, t_hi),
        frames: points.len(),
    })
}

// ---------------------------------------------------------------------------
// ODE-behavior deviation ratio
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSeries {
    pub times: Vec<f64>,
    /// sup over the qualifying nodes of |u_t - V f(u)| / (u^p + k_floor),
    /// with u_t reconstructed as Δu + V f(u) (so the numerator is |Δu|)
    pub sup_ratio: Vec<f64>,
    /// running max of the measured ratio
    pub running_max: Vec<f64>,
    pub u_threshold: f64,
    pub k_floor: f64,
    pub mask_nodes: usize,
}

/// Measures how far each snapshot is from the spatially-free ODE
/// u_t = V f(u) on the masked nodes with u above the threshold. Time
/// derivatives are never finite-differenced across snapshots: u_t is
/// reconstructed from the spatial operator, making the deviation exactly
/// the diffusion term.
pub fn ode_deviation(
    traj: &Trajectory,
    spec: &ProblemSpec,
    mask: &RegionMask,
    u_threshold: f64,
    k_floor: f64,
) -> Result<DeviationSeries, DiagnosticsError> {
    let p = spec
        .nonlinearity
        .power_exponent()
        .ok_or_else(|| DiagnosticsError::NotPowerLike(spec.nonlinearity.describe()))?;
    let dist = mask.distance_to_boundary();
    if dist < 3 {
        return Err(DiagnosticsError::MaskTouchesBoundary { dist });
    }
    // V must be bounded below on a dilation of the mask
    let v = spec.potential_on_grid();
    let n = v.len();
    let mut min_v = f64::INFINITY;
    for i in mask.indices() {
        for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
            min_v = min_v.min(v[j]);
        }
    }
    if !(min_v > 0.0) {
        return Err(DiagnosticsError::MaskWhereVVanishes { min_v });
    }

    let mut times = Vec::new();
    let mut sup_ratio = Vec::new();
    let mut running_max = Vec::new();
    let mut running = 0.0f64;
    for snap in &traj.snapshots {
        let lap = laplacian_apply(&snap.u, &spec.domain)?;
        let mut sup: Option<f64> = None;
        for i in mask.indices() {
            let u = snap.u[i];
            if u >= u_threshold {
                let ratio = lap[i].abs() / (u.powf(p) + k_floor);
                sup = Some(sup.map_or(ratio, |s: f64| s.max(ratio)));
            }
        }
        if let Some(s) = sup {
            running = running.max(s);
            times.push(snap.t);
            sup_ratio.push(s);
            running_max.push(running);
        }
    }
    Ok(DeviationSeries {
        times,
        sup_ratio,
        running_max,
        u_threshold,
        k_floor,
        mask_nodes: mask.count(),
    })
}

// ---------------------------------------------------------------------------
// J = u_t - eps f(u)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JFunctional {
    pub j: Vec<f64>,
    pub min_j: f64,
    pub argmin: usize,
    pub epsilon: f64,
}

/// J = u_t - eps f(u) with u_t reconstructed as Δu + V f(u), so
/// J = Δu + (V - eps) f(u); min over interior nodes. J >= 0 integrates to
/// the type-I bound.
pub fn friedman_mcleod_j(
    state: &SolutionState,
    spec: &ProblemSpec,
    epsilon: f64,
) -> Result<JFunctional, DiagnosticsError> {
    if !(epsilon > 0.0) {
        return Err(DiagnosticsError::NonpositiveEpsilon(epsilon));
    }
    if !spec.nonlinearity.is_convex() {
        return Err(DiagnosticsError::NotConvex);
    }
    let lap = laplacian_apply(&state.u, &spec.domain)?;
    let v = spec.potential_on_grid();
    let n = state.u.len();
    let mut j = vec![0.0; n];
    let mut min_j = f64::INFINITY;
    let mut argmin = 1;
    for i in 0..n {
        let f = spec.nonlinearity.eval(state.u[i])?.f;
        j[i] = lap[i] + (v[i] - epsilon) * f;
        if i > 0 && i < n - 1 && j[i] < min_j {
            min_j = j[i];
            argmin = i;
        }
    }
    Ok(JFunctional {
        j,
        min_j,
        argmin,
        epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCertificate {
    pub epsilon: f64,
    pub t1: f64,
    pub certified: bool,
    /// min over certified snapshots and masked nodes of J
    pub min_j: f64,
    pub snapshots_checked: usize,
}

/// Searches for a certificate: a time t1 and an eps > 0 such that
/// J = u_t - eps f(u) stays nonnegative on the masked nodes from t1 on.
/// eps is chosen from the data at each candidate t1 as half the minimum of
/// u_t / f(u) over the mask, following the role of gamma / sup f in the
/// maximum-principle argument.
pub fn monotone_certificate(
    traj: &Trajectory,
    spec: &ProblemSpec,
    mask: &RegionMask,
) -> Result<MonotoneCertificate, DiagnosticsError> {
    let v = spec.potential_on_grid();
    let n_snaps = traj.snapshots.len();
    // candidate t1 at each decade of max-u growth
    let mut candidates: Vec<usize> = Vec::new();
    let u0_max = traj.snapshots[0].max_u().max(1e-12);
    let mut next_level = u0_max;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        if snap.max_u() >= next_level {
            candidates.push(k);
            next_level = snap.max_u().max(next_level) * 10.0;
        }
    }
    if candidates.is_empty() {
        candidates.push(0);
    }

    let j_min_on_mask = |state: &SolutionState, eps: f64| -> Result<f64, DiagnosticsError> {
        let lap = laplacian_apply(&state.u, &spec.domain)?;
        let mut min_j = f64::INFINITY;
        for i in mask.indices() {
            let f = spec.nonlinearity.eval(state.u[i])?.f;
            min_j = min_j.min(lap[i] + (v[i] - eps) * f);
        }
        Ok(min_j)
    };

    let mut best: Option<MonotoneCertificate> = None;
    for &k in &candidates {
        let state = &traj.snapshots[k];
        let lap = laplacian_apply(&state.u, &spec.domain)?;
        let mut eps = f64::INFINITY;
        for i in mask.indices() {
            let f = spec.nonlinearity.eval(state.u[i])?.f;
            let ut = lap[i] + v[i] * f;
            if f > 0.0 {
                eps = eps.min(ut / f);
            }
        }
        if !(eps > 0.0) || !eps.is_finite() {
            continue;
        }
        let eps = 0.5 * eps;
        let mut min_j = f64::INFINITY;
        let mut ok = true;
        for snap in &traj.snapshots[k..] {
            let m = j_min_on_mask(snap, eps)?;
            min_j = min_j.min(m);
            if m < 0.0 {
                ok = false;
                break;
            }
        }
        let cert = MonotoneCertificate {
            epsilon: eps,
            t1: state.t,
            certified: ok,
            min_j,
            snapshots_checked: n_snaps - k,
        };
        if ok {
            return Ok(cert);
        }
        best = Some(cert);
    }
    Ok(best.unwrap_or(MonotoneCertificate {
        epsilon: 0.0,
        t1: traj.snapshots[0].t,
        certified: false,
        min_j: f64::NEG_INFINITY,
        snapshots_checked: 0,
    }))
}

// ---------------------------------------------------------------------------
// Kaplan functional
// ---------------------------------------------------------------------------

/// Trapezoid quadrature of u(x) cos(pi x / 2 ell) over [-ell, ell], with
/// linear interpolation at the partial end cells.
pub fn kaplan_functional(
    state: &SolutionState,
    grid: &[f64],
    ell: f64,
) -> Result<f64, DiagnosticsError> {
    let half = grid[grid.len() - 1].min(-grid[0]);
    if !(ell > 0.0) || ell > half + 1e-12 {
        return Err(DiagnosticsError::EllTooWide { ell, half });
    }
    let weight = |x: f64| (std::f64::consts::PI * x / (2.0 * ell)).cos();
    let sample = |x: f64| -> f64 {
        let j = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
        let (x0, x1) = (grid[j - 1], grid[j]);
        let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        (state.u[j - 1] * (1.0 - w) + state.u[j] * w) * weight(x)
    };
    // integration nodes: grid nodes inside (-ell, ell) plus the endpoints
    let mut xs: Vec<f64> = vec![-ell];
    xs.extend(grid.iter().cloned().filter(|&x| x > -ell && x < ell));
    xs.push(ell);
    let mut integral = 0.0;
    for w in xs.windows(2) {
        integral += 0.5 * (sample(w[0]) + sample(w[1])) * (w[1] - w[0]);
    }
    Ok(integral)
}

// ---------------------------------------------------------------------------
// Symmetry / monotonicity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// max |u(x) - u(-x)| relative to the sup norm
    pub even_defect: f64,
    /// max of the centered difference u_x on [0, L], relative to the sup norm
    pub ux_max: f64,
    pub max_at_origin: bool,
    /// L >= 1/3 is the hypothesis range of the reflection argument
    pub proven_regime: bool,
    pub l_used: f64,
}

pub fn symmetry_monotonicity_check(
    state: &SolutionState,
    spec: &ProblemSpec,
    l_cap: f64,
) -> Result<SymmetryReport, DiagnosticsError> {
    if !spec.domain.is_symmetric_interval() {
        return Err(DiagnosticsError::NotSymmetricInterval);
    }
    let grid = spec.domain.grid();
    let n = grid.len();
    let scale = state.max_u().max(1.0);
    let mut even_defect = 0.0f64;
    for i in 0..n / 2 {
        even_defect = even_defect.max((state.u[i] - state.u[n - 1 - i]).abs());
    }
    even_defect /= scale;

    let dx = spec.domain.dx();
    let mut ux_max = f64::NEG_INFINITY;
    for i in 1..n - 1 {
        if grid[i] >= 0.0 && grid[i] <= l_cap {
            ux_max = ux_max.max((state.u[i + 1] - state.u[i - 1]) / (2.0 * dx));
        }
    }
    let ux_max = ux_max / scale;

    let argmax = state.argmax();
    let max_at_origin = grid[argmax].abs() <= dx * (1.0 + 1e-12);
    Ok(SymmetryReport {
        even_defect,
        ux_max,
        max_at_origin,
        proven_regime: (1.0 / 3.0..1.0).contains(&l_cap),
        l_used: l_cap,
    })
}

// ---------------------------------------------------------------------------
// Nondegeneracy floor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    /// min over the final decade of log(T_hat - t) of (T_hat - t)^alpha u(t, x0)
    pub liminf_hat: f64,
    /// kappa A^(-alpha)
    pub threshold: f64,
    pub satisfied: bool,
    pub window: (f64, f64),
    pub frames: usize,
}

/// Approximates liminf (T-t)^alpha u(t, x0) by the minimum over snapshots
/// in the final decade of T_hat - t, and compares against the floor
/// kappa A^(-alpha) with 10% slack.
#[allow(clippy::too_many_arguments)]
pub fn nondegeneracy_check(
    traj: &Trajectory,
    grid: &[f64],
    x0: f64,
    a_coeff: f64,
    alpha: f64,
    kappa: f64,
    t_hat: f64,
) -> Result<NondegeneracyReport, DiagnosticsError> {
    let node = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let threshold = kappa * a_coeff.powf(-alpha);
    let tau_end = (t_hat - traj.last().t).max(f64::MIN_POSITIVE);
    let mut liminf_hat = f64::INFINITY;
    let mut window = (f64::INFINITY, f64::NEG_INFINITY);
    let mut frames = 0;
    for snap in &traj.snapshots {
        let tau = t_hat - snap.t;
        if tau <= 0.0 || tau > 10.0 * tau_end {
            continue;
        }
        frames += 1;
        window = (window.0.min(snap.t), window.1.max(snap.t));
        liminf_hat = liminf_hat.min(tau.powf(alpha) * snap.u[node]);
    }
    if liminf_hat < 1e-3 * threshold {
        return Err(DiagnosticsError::NotABlowupPoint {
            x0,
            amplitude: liminf_hat,
            threshold,
        });
    }
    Ok(NondegeneracyReport {
        liminf_hat,
        threshold,
        satisfied: liminf_hat >= 0.9 * threshold,
        window,
        frames,
    })
}

// ---------------------------------------------------------------------------
// Weak-nonlinearity (double-exponential) rate fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakRateFit {
    /// slope of log log u(t, 0) against -log(T_hat - t); the two-sided
    /// estimate predicts 1/(a-1)
    pub slope_hat: f64,
    pub r_squared: f64,
    /// fitted constants of the sandwich
    /// c1 (1-|x|) exp[c1 tau^-b] <= u <= u(t,0) <= exp[c2 tau^-b]
    pub c1: f64,
    pub c2: f64,
    pub sandwich_holds: bool,
    pub frames: usize,
}

fn center_node(grid: &[f64]) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap()
}

/// Log-threshold for the double-exponential fit window: the growth rate
/// approaches its asymptote only once log u is within a quarter of its
/// final span, so earlier frames would bias the slope low.
fn weak_window_floor(traj: &Trajectory, center: usize) -> f64 {
    let u_end = traj.last().u[center].max(1.0);
    100.0f64.max((0.25 * u_end.ln()).exp())
}

/// Regression of log log u(t, 0) on -log(T_hat - t) over the asymptotic
/// tail of the center series, excluding the last 2% of the tau range; fits
/// the spatial lower constant C1 and the center upper constant C2 and
/// verifies the sandwich at every frame of the window.
pub fn weak_rate_fit(
    traj: &Trajectory,
    grid: &[f64],
    t_hat: f64,
    a: f64,
) -> Result<WeakRateFit, DiagnosticsError> {
    let b = 1.0 / (a - 1.0);
    let c = center_node(grid);
    let floor = weak_window_floor(traj, c);
    let frames: Vec<&SolutionState> = traj
        .snapshots
        .iter()
        .filter(|s| s.u[c] >= floor && t_hat - s.t > 0.0)
        .collect();
    if frames.len() < 20 {
        return Err(DiagnosticsError::InsufficientData {
            need: 20,
            have: frames.len(),
        });
    }
    let tau_hi = t_hat - frames[0].t;
    let fit_frames: Vec<&&SolutionState> = frames
        .iter()
        .filter(|s| t_hat - s.t > 0.02 * tau_hi)
        .collect();
    if fit_frames.len() < 20 {
        return Err(DiagnosticsError::InsufficientData {
            need: 20,
            have: fit_frames.len(),
        });
    }
    let points: Vec<(f64, f64)> = fit_frames
        .iter()
        .map(|s| (-(t_hat - s.t).ln(), s.u[c].ln().ln()))
        .collect();
    let (slope, _, r2) = linear_fit(&points);

    // C2: smallest constant with u(t,0) <= exp[C2 tau^-b] over the window
    let mut c2 = 0.0f64;
    for s in &fit_frames {
        let tau = t_hat - s.t;
        c2 = c2.max(s.u[c].ln() * tau.powf(b));
    }
    // C1: largest constant with c1 (1-|x|) exp[c1 tau^-b] <= u everywhere;
    // solved per sample by bisection on the monotone map c -> c(1-|x|)e^{c q}
    let half_width = grid[grid.len() - 1];
    let mut c1 = f64::INFINITY;
    for s in &fit_frames {
        let q = (t_hat - s.t).powf(-b);
        for (i, &x) in grid.iter().enumerate() {
            let margin = 1.0 - (x / half_width).abs();
            if margin <= 0.0 {
                continue;
            }
            let u = s.u[i].max(f64::MIN_POSITIVE);
            // find c with c * margin * exp(c q) = u
            let f = |cc: f64| cc * margin * (cc * q).exp() - u;
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            while f(hi) < 0.0 && hi < 1e6 {
                hi *= 2.0;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            c1 = c1.min(lo);
        }
    }
    // the sandwich needs c1 <= c2 and the max at the center at every frame
    let mut sandwich = c1 > 0.0 && c1 <= c2;
    for s in &fit_frames {
        if s.argmax() != c && (s.max_u() - s.u[c]).abs() > 1e-12 * s.max_u() {
            sandwich = false;
        }
    }
    Ok(WeakRateFit {
        slope_hat: slope,
        r_squared: r2,
        c1,
        c2,
        sandwich_holds: sandwich,
        frames: fit_frames.len(),
    })
}

/// Refines the blowup-time estimate for double-exponential growth by
/// maximizing the r^2 of the double-log regression over candidate T. The
/// type-I estimator degenerates on this data; this scan replaces its
/// additive-dt fallback. Since the maximum sits at a concavity point,
/// m' <= v_center f(m), so T - t_end is at least the remaining time of
/// the free ODE; the scan never goes below that bound.
pub fn estimate_weak_blowup_time(
    traj: &Trajectory,
    grid: &[f64],
    a: f64,
    v_center: f64,
) -> Result<f64, DiagnosticsError> {
    let c = center_node(grid);
    let floor = weak_window_floor(traj, c);
    let frames: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .filter(|s| s.u[c] >= floor)
        .map(|s| (s.t, s.u[c].ln().ln()))
        .collect();
    if frames.len() < 20 {
        return Err(DiagnosticsError::InsufficientData {
            need: 20,
            have: frames.len(),
        });
    }
    let t_end = frames.last().unwrap().0;
    let u_end = traj.last().u[c].max(std::f64::consts::E);
    // remaining lifetime of m' = v f(m): integral of du/(u log^a(1+u))
    let gap_floor = if v_center > 0.0 {
        u_end.ln().powf(1.0 - a) / ((a - 1.0) * v_center)
    } else {
        1e-6
    };
    let r2_at = |t_cand: f64| {
        let pts: Vec<(f64, f64)> = frames
            .iter()
            .filter(|&&(t, _)| t_cand - t > 0.0)
            .map(|&(t, y)| (-(t_cand - t).ln(), y))
            .collect();
        if pts.len() < 10 {
            return f64::NEG_INFINITY;
        }
        let (_, _, r2) = linear_fit(&pts);
        r2
    };
    // coarse geometric scan of the gap above the ODE floor, then golden
    // refinement
    let mut best = (t_end + gap_floor, r2_at(t_end + gap_floor));
    for i in 1..96 {
        let gap = gap_floor * 8f64.powf(i as f64 / 95.0);
        let r2 = r2_at(t_end + gap);
        if r2 > best.1 {
            best = (t_end + gap, r2);
        }
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (
        (best.0 - t_end) / 1.3,
        (best.0 - t_end) * 1.3,
    );
    lo = lo.max(gap_floor);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = r2_at(t_end + x1);
    let mut f2 = r2_at(t_end + x2);
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = r2_at(t_end + x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = r2_at(t_end + x1);
        }
    }
    Ok(t_end + 0.5 * (lo + hi))
}
