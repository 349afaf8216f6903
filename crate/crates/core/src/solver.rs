//! Method-of-lines finite-difference integrator: second-order stencils,
//! explicit midpoint (RK2) time stepping with a reaction-limited adaptive
//! step, blowup detection, and trajectory persistence with bit-exact
//! reload for resume.

use crate::problem::{BoundaryKind, Domain, Geometry, ProblemSpec};
use crate::zeroset::RegionMask;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("state is not finite at node {node} (t = {t})")]
    StepOverflow { node: usize, t: f64 },
    #[error("negative value {value:e} at node {node} beyond roundoff clamp (t = {t})")]
    NegativeValue { node: usize, value: f64, t: f64 },
    #[error("grid function has {got} nodes but the domain has {expected}")]
    GridMismatch { got: usize, expected: usize },
    #[error("need at least {need} snapshots in the terminal decade, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("trajectory store at {path} is malformed: {detail}")]
    BadStore { path: String, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
}

// ---------------------------------------------------------------------------
// States and trajectories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub u: Vec<f64>,
    pub dt_last: f64,
    pub step_count: u64,
}

impl SolutionState {
    pub fn initial(u0: Vec<f64>) -> Self {
        SolutionState {
            t: 0.0,
            u: u0,
            dt_last: 0.0,
            step_count: 0,
        }
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.u.len() {
            if self.u[i] > self.u[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TerminalStatus {
    BlowupDetected,
    TimeHorizonReached,
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<SolutionState>,
    pub events: Vec<Event>,
    pub status: TerminalStatus,
}

impl Trajectory {
    pub fn last(&self) -> &SolutionState {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn max_value_series(&self) -> Vec<(f64, f64)> {
        self.snapshots.iter().map(|s| (s.t, s.max_u())).collect()
    }

    pub fn max_location_series(&self, domain: &Domain) -> Vec<(f64, f64)> {
        let grid = domain.grid();
        self.snapshots
            .iter()
            .map(|s| (s.t, grid[s.argmax()]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub t_hat: f64,
    pub t_hat_uncertainty: f64,
    pub fit_degenerate: bool,
    pub fit_r_squared: f64,
    pub blowup_set: RegionMask,
    pub max_value_series: Vec<(f64, f64)>,
    pub max_location_series: Vec<(f64, f64)>,
}

// ---------------------------------------------------------------------------
// Laplacian
// ---------------------------------------------------------------------------

/// Precomputed geometry for the discrete Laplacian.
pub struct LaplacianOp {
    geometry: Geometry,
    boundary: BoundaryKind,
    grid: Vec<f64>,
    inv_dx2: f64,
    inv_2dx: f64,
}

impl LaplacianOp {
    pub fn new(domain: &Domain) -> LaplacianOp {
        let dx = domain.dx();
        LaplacianOp {
            geometry: domain.geometry,
            boundary: domain.boundary,
            grid: domain.grid(),
            inv_dx2: 1.0 / (dx * dx),
            inv_2dx: 0.5 / dx,
        }
    }

    /// Writes the discrete Laplacian of `u` into `out`. Interior nodes use
    /// the 3-point second difference, radial grids add (n-1)/r u_r with the
    /// symmetry limit 2n (u1 - u0)/dr^2 at r = 0. Neumann ends mirror a
    /// ghost node; Dirichlet ends are held at zero so their row is zero.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        debug_assert_eq!(n, self.grid.len());
        let radial_n = match self.geometry {
            Geometry::Interval { .. } => 0,
            Geometry::RadialBall { n, .. } | Geometry::RadialAnnulus { n, .. } => n,
        };
        for i in 1..n - 1 {
            let mut lap = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * self.inv_dx2;
            if radial_n > 1 {
                lap += (radial_n - 1) as f64 / self.grid[i] * (u[i + 1] - u[i - 1]) * self.inv_2dx;
            }
            out[i] = lap;
        }
        // left end
        out[0] = match (self.geometry, self.boundary) {
            // r = 0 center of a ball is always the symmetry stencil
            (Geometry::RadialBall { n, .. }, _) => {
                2.0 * n as f64 * (u[1] - u[0]) * self.inv_dx2
            }
            (_, BoundaryKind::DirichletZero) => 0.0,
            (Geometry::Interval { .. }, BoundaryKind::Neumann) => {
                2.0 * (u[1] - u[0]) * self.inv_dx2
            }
            (Geometry::RadialAnnulus { n, .. }, BoundaryKind::Neumann) => {
                // mirrored ghost kills the first-derivative term
                let _ = n;
                2.0 * (u[1] - u[0]) * self.inv_dx2
            }
        };
        // right end
        out[n - 1] = match self.boundary {
            BoundaryKind::DirichletZero => 0.0,
            BoundaryKind::Neumann => 2.0 * (u[n - 2] - u[n - 1]) * self.inv_dx2,
        };
    }
}

/// Free-function form of the Laplacian for diagnostics and oracles.
pub fn laplacian_apply(u: &[f64], domain: &Domain) -> Result<Vec<f64>, SolverError> {
    if u.len() != domain.grid_points {
        return Err(SolverError::GridMismatch {
            got: u.len(),
            expected: domain.grid_points,
        });
    }
    let op = LaplacianOp::new(domain);
    let mut out = vec![0.0; u.len()];
    op.apply_into(u, &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Terminate as blown up once max u reaches this.
    pub u_blow: f64,
    /// Integration horizon in time.
    pub horizon: f64,
    /// Fraction of the stability limit actually taken.
    pub safety: f64,
    /// dt floor, as a multiple of max(horizon, 1).
    pub dt_min_factor: f64,
    /// Snapshot density in max-u decades.
    pub frames_per_decade: u32,
    /// Time-triggered snapshots: horizon / time_ticks apart.
    pub time_ticks: u32,
    /// Steady when the relative per-step change stays below this...
    pub steady_rel_tol: f64,
    /// ...for this many consecutive steps.
    pub steady_window: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            u_blow: 1e12,
            horizon: 10.0,
            safety: 0.4,
            dt_min_factor: 1e-30,
            frames_per_decade: 24,
            time_ticks: 256,
            steady_rel_tol: 1e-12,
            steady_window: 50,
        }
    }
}

impl SolverConfig {
    pub fn dt_min(&self) -> f64 {
        self.dt_min_factor * self.horizon.max(1.0)
    }
}

/// One PDE instance prepared for integration. Engines hold no mutable
/// state; many can run concurrently.
pub struct Engine {
    pub spec: ProblemSpec,
    lap: LaplacianOp,
    v_grid: Vec<f64>,
    dx: f64,
    dim_factor: f64,
    dirichlet: bool,
}

impl Engine {
    pub fn new(spec: &ProblemSpec) -> Engine {
        Engine {
            lap: LaplacianOp::new(&spec.domain),
            v_grid: spec.potential_on_grid(),
            dx: spec.domain.dx(),
            dim_factor: spec.domain.dim_factor(),
            dirichlet: spec.domain.boundary == BoundaryKind::DirichletZero,
            spec: spec.clone(),
        }
    }

    fn impose_boundary(&self, u: &mut [f64]) {
        if self.dirichlet {
            let n = u.len();
            if !matches!(self.spec.domain.geometry, Geometry::RadialBall { .. }) {
                u[0] = 0.0;
            }
            u[n - 1] = 0.0;
        }
    }

    /// du/dt = Δu + V f(u); returns the index of a saturated node if the
    /// reaction left the representable range.
    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        self.lap.apply_into(u, out);
        for i in 0..u.len() {
            let r = self.spec.nonlinearity.eval(u[i])?;
            if r.saturated {
                return Err(SolverError::StepOverflow { node: i, t });
            }
            out[i] += self.v_grid[i] * r.f;
        }
        if self.dirichlet {
            let n = u.len();
            if !matches!(self.spec.domain.geometry, Geometry::RadialBall { .. }) {
                out[0] = 0.0;
            }
            out[n - 1] = 0.0;
        }
        Ok(())
    }

    /// dt = safety * min(dx^2 / (2 dim_factor), 1 / max V f'(u)), with the
    /// reaction rate guarded below by 1e-30.
    pub fn adaptive_dt(&self, state: &SolutionState, safety: f64) -> f64 {
        let diffusive = self.dx * self.dx / (2.0 * self.dim_factor);
        let mut max_rate = 0.0f64;
        for i in 0..state.u.len() {
            if let Ok(r) = self.spec.nonlinearity.eval(state.u[i]) {
                let rate = self.v_grid[i] * r.f_prime;
                if rate > max_rate {
                    max_rate = rate;
                }
            } else {
                max_rate = f64::MAX;
            }
        }
        let tau_reaction = 1.0 / max_rate.max(1e-30);
        safety * diffusive.min(tau_reaction)
    }

    /// One explicit midpoint step; boundary re-imposed after each stage and
    /// roundoff-scale negatives clamped to zero.
    pub fn advance(&self, state: &SolutionState, dt: f64) -> Result<SolutionState, SolverError> {
        let n = state.u.len();
        let mut k = vec![0.0; n];
        self.rhs_into(&state.u, state.t, &mut k)?;
        let mut half = vec![0.0; n];
        for i in 0..n {
            half[i] = state.u[i] + 0.5 * dt * k[i];
        }
        self.impose_boundary(&mut half);
        let clamp = 1e-12 * state.max_u().max(1.0);
        self.clamp_negatives(&mut half, clamp, state.t)?;

        self.rhs_into(&half, state.t, &mut k)?;
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] = state.u[i] + dt * k[i];
        }
        self.impose_boundary(&mut next);
        self.clamp_negatives(&mut next, clamp, state.t + dt)?;
        for (i, &v) in next.iter().enumerate() {
            if !v.is_finite() {
                return Err(SolverError::StepOverflow {
                    node: i,
                    t: state.t + dt,
                });
            }
        }
        Ok(SolutionState {
            t: state.t + dt,
            u: next,
            dt_last: dt,
            step_count: state.step_count + 1,
        })
    }

    fn clamp_negatives(&self, u: &mut [f64], clamp: f64, t: f64) -> Result<(), SolverError> {
        for (i, v) in u.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v >= -clamp {
                    *v = 0.0;
                } else {
                    return Err(SolverError::NegativeValue {
                        node: i,
                        value: *v,
                        t,
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

// Snapshot triggers are pure functions of the last stored frame so that a
// resumed run reproduces the original frame sequence exactly.
fn next_level_trigger(last_stored_max: f64, u_ref: f64, frames_per_decade: u32) -> f64 {
    let k = ((last_stored_max.max(u_ref) / u_ref).log10() * frames_per_decade as f64).floor();
    u_ref * 10f64.powf((k + 1.0) / frames_per_decade as f64)
}

fn next_tick_trigger(last_stored_t: f64, tick: f64) -> f64 {
    ((last_stored_t / tick).floor() + 1.0) * tick
}

/// Integrates the problem until blowup, steady state, or the horizon.
pub fn run_to_blowup(
    spec: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(Trajectory, Option<BlowupReport>), SolverError> {
    let engine = Engine::new(spec);
    let initial = SolutionState::initial(spec.initial_data.clone());
    let seed = Trajectory {
        snapshots: vec![initial],
        events: Vec::new(),
        status: TerminalStatus::TimeHorizonReached,
    };
    run_from(&engine, config, seed)
}

/// Continues a trajectory (used both by `run_to_blowup` and resume): steps
/// from the last stored snapshot, appending frames under the same policy.
pub fn run_from(
    engine: &Engine,
    config: &SolverConfig,
    mut traj: Trajectory,
) -> Result<(Trajectory, Option<BlowupReport>), SolverError> {
    let u_ref = traj.snapshots[0].max_u().max(1e-12);
    let tick = config.horizon / config.time_ticks as f64;
    let dt_min = config.dt_min();

    let mut state = traj.last().clone();

    // degenerate initial data: identically zero with f(0) = 0 is steady
    if state.max_u() == 0.0 {
        if let Ok(r) = engine.spec.nonlinearity.eval(0.0) {
            if r.f == 0.0 {
                traj.status = TerminalStatus::Steady;
                traj.events.push(Event {
                    t: state.t,
                    message: "u0 = 0 with f(0) = 0: steady immediately".into(),
                });
                return Ok((traj, None));
            }
        }
    }

    let mut steady_streak: u32 = 0;
    let status;
    loop {
        let max_u = state.max_u();
        if max_u >= config.u_blow {
            status = TerminalStatus::BlowupDetected;
            traj.events.push(Event {
                t: state.t,
                message: format!("max u = {max_u:e} reached u_blow = {:e}", config.u_blow),
            });
            break;
        }
        if state.t >= config.horizon * (1.0 - 1e-15) {
            status = TerminalStatus::TimeHorizonReached;
            break;
        }
        let mut dt = engine.adaptive_dt(&state, config.safety);
        if state.t + dt > config.horizon {
            dt = config.horizon - state.t;
        }
        if dt < dt_min {
            status = TerminalStatus::BlowupDetected;
            traj.events.push(Event {
                t: state.t,
                message: format!("dt = {dt:e} collapsed below dt_min = {dt_min:e}"),
            });
            break;
        }

        let next = engine.advance(&state, dt)?;

        // steady detection over a window of consecutive steps
        let mut change = 0.0f64;
        for i in 0..state.u.len() {
            change = change.max((next.u[i] - state.u[i]).abs());
        }
        let rel = change / state.max_u().max(1e-300);
        if rel < config.steady_rel_tol {
            steady_streak += 1;
        } else {
            steady_streak = 0;
        }

        state = next;

        let last = traj.last();
        let level = next_level_trigger(last.max_u(), u_ref, config.frames_per_decade);
        let time_trig = next_tick_trigger(last.t, tick);
        if state.max_u() >= level || state.t >= time_trig {
            traj.snapshots.push(state.clone());
        }

        if steady_streak >= config.steady_window {
            status = TerminalStatus::Steady;
            traj.events.push(Event {
                t: state.t,
                message: format!(
                    "relative change below {:e} for {} steps",
                    config.steady_rel_tol, config.steady_window
                ),
            });
            break;
        }
    }

    if traj.last() != &state {
        traj.snapshots.push(state);
    }
    traj.status = status;

    let report = if status == TerminalStatus::BlowupDetected {
        Some(build_blowup_report(engine, config, &traj))
    } else {
        None
    };
    Ok((traj, report))
}

/// Reconstructs the blowup report of a (possibly reloaded) trajectory.
pub fn make_blowup_report(
    spec: &ProblemSpec,
    config: &SolverConfig,
    traj: &Trajectory,
) -> Option<BlowupReport> {
    if traj.status != TerminalStatus::BlowupDetected {
        return None;
    }
    Some(build_blowup_report(&Engine::new(spec), config, traj))
}

fn build_blowup_report(
    engine: &Engine,
    config: &SolverConfig,
    traj: &Trajectory,
) -> BlowupReport {
    let alpha = engine
        .spec
        .constants
        .map(|c| c.alpha)
        .unwrap_or(1.0);
    let estimate = estimate_blowup_time(traj, alpha).unwrap_or_else(|_| TimeEstimate {
        t_hat: traj.last().t + traj.last().dt_last,
        uncertainty: traj.last().dt_last.max(f64::EPSILON * traj.last().t),
        degenerate: true,
        r_squared: 0.0,
    });
    // a node belongs to the numerical blowup set when its terminal value
    // participates in the runaway: within four decades of the maximum and
    // above sqrt(u_blow); bounded bystanders sit orders of magnitude lower
    let last = traj.last();
    let set_threshold = config.u_blow.sqrt().max(1e-4 * last.max_u());
    let blowup_set = RegionMask::from_predicate(last.u.len(), |i| last.u[i] >= set_threshold);
    BlowupReport {
        t_hat: estimate.t_hat.max(last.t),
        t_hat_uncertainty: estimate.uncertainty,
        fit_degenerate: estimate.degenerate,
        fit_r_squared: estimate.r_squared,
        blowup_set,
        max_value_series: traj.max_value_series(),
        max_location_series: traj.max_location_series(&engine.spec.domain),
    }
}

// ---------------------------------------------------------------------------
// Blowup-time estimation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeEstimate {
    pub t_hat: f64,
    pub uncertainty: f64,
    /// Set when the type-I ansatz does not linearize the data
    /// (r^2 < 0.99); t_hat then falls back to last t + dt_last.
    pub degenerate: bool,
    pub r_squared: f64,
}

/// Least-squares fit of (max u)^(-1/alpha) against t over the terminal
/// decade of max-u growth; under the type-I ansatz the data is linear and
/// the blowup time is the root of the fitted line. When thinning left
/// fewer than 20 frames in the last decade the window widens to at most
/// three decades before giving up.
pub fn estimate_blowup_time(
    traj: &Trajectory,
    alpha: f64,
) -> Result<TimeEstimate, SolverError> {
    let series = traj.max_value_series();
    let u_end = series.last().map(|&(_, u)| u).unwrap_or(0.0);
    let mut window: Vec<(f64, f64)> = Vec::new();
    for decades in 1..=3 {
        let cutoff = u_end / 10f64.powi(decades);
        window = series
            .iter()
            .filter(|&&(_, u)| u >= cutoff && u > 0.0)
            .map(|&(t, u)| (t, u.powf(-1.0 / alpha)))
            .collect();
        if window.len() >= 20 {
            break;
        }
    }
    if window.len() < 20 {
        return Err(SolverError::InsufficientData {
            need: 20,
            have: window.len(),
        });
    }
    let (slope, intercept, r2) = linear_fit(&window);
    let last = traj.last();
    if !(slope < 0.0) || !r2.is_finite() || r2 < 0.99 {
        return Ok(TimeEstimate {
            t_hat: last.t + last.dt_last,
            uncertainty: last.dt_last.max(f64::EPSILON * last.t.abs()),
            degenerate: true,
            r_squared: if r2.is_finite() { r2 } else { 0.0 },
        });
    }
    let t_hat = -intercept / slope;
    // residual-based uncertainty mapped through the slope
    let n = window.len() as f64;
    let ss_res: f64 = window
        .iter()
        .map(|&(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let sigma = (ss_res / (n - 2.0)).sqrt();
    Ok(TimeEstimate {
        t_hat,
        uncertainty: sigma / slope.abs(),
        degenerate: false,
        r_squared: r2,
    })
}

/// Centered least squares; returns (slope, intercept, r_squared) for y on x.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Writes one CSV per snapshot plus an index file. Floats are written with
/// their shortest round-trip representation, so reload is bit-exact.
pub fn persist_trajectory(
    traj: &Trajectory,
    domain: &Domain,
    dir: &Path,
) -> Result<(), SolverError> {
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps).map_err(|source| SolverError::Io {
        path: snaps.display().to_string(),
        source,
    })?;
    let grid = domain.grid();
    let mut index = String::new();
    let _ = writeln!(index, "# status={:?}", traj.status);
    index.push_str("id,t,max_u,dt_last,step_count,file\n");
    for (id, snap) in traj.snapshots.iter().enumerate() {
        let file = format!("snap_{id:06}.csv");
        let mut body = String::with_capacity(snap.u.len() * 24);
        body.push_str("x,u\n");
        for (i, &x) in grid.iter().enumerate() {
            let _ = writeln!(body, "{},{}", x, snap.u[i]);
        }
        let path = snaps.join(&file);
        std::fs::write(&path, body).map_err(|source| SolverError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let _ = writeln!(
            index,
            "{},{},{},{},{},{}",
            id,
            snap.t,
            snap.max_u(),
            snap.dt_last,
            snap.step_count,
            file
        );
    }
    let path = dir.join("index.csv");
    std::fs::write(&path, index).map_err(|source| SolverError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory, SolverError> {
    let index_path = dir.join("index.csv");
    let text = std::fs::read_to_string(&index_path).map_err(|source| SolverError::Io {
        path: index_path.display().to_string(),
        source,
    })?;
    let mut status = TerminalStatus::TimeHorizonReached;
    let mut snapshots = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("id,") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# status=") {
            status = match rest {
                "BlowupDetected" => TerminalStatus::BlowupDetected,
                "Steady" => TerminalStatus::Steady,
                _ => TerminalStatus::TimeHorizonReached,
            };
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(SolverError::BadStore {
                path: index_path.display().to_string(),
                detail: format!("line {}: expected 6 columns", lineno + 1),
            });
        }
        let parse = |s: &str| -> Result<f64, SolverError> {
            s.parse().map_err(|_| SolverError::BadStore {
                path: index_path.display().to_string(),
                detail: format!("line {}: bad float `{s}`", lineno + 1),
            })
        };
        let t = parse(cols[1])?;
        let dt_last = parse(cols[3])?;
        let step_count: u64 = cols[4].parse().map_err(|_| SolverError::BadStore {
            path: index_path.display().to_string(),
            detail: format!("line {}: bad step count", lineno + 1),
        })?;
        let snap_path = dir.join("snapshots").join(cols[5]);
        let rows = crate::csvio::read_two_column(&snap_path)
            .map_err(crate::problem::ProblemError::from)?;
        snapshots.push(SolutionState {
            t,
            u: rows.into_iter().map(|(_, u)| u).collect(),
            dt_last,
            step_count,
        });
    }
    if snapshots.is_empty() {
        return Err(SolverError::BadStore {
            path: index_path.display().to_string(),
            detail: "no snapshots".into(),
        });
    }
    Ok(Trajectory {
        snapshots,
        events: vec![Event {
            t: 0.0,
            message: format!("loaded from {}", dir.display()),
        }],
        status,
    })
}

/// Resumes integration from snapshot `upto` of a stored trajectory,
/// discarding everything after it and continuing under the same policy.
pub fn resume(
    spec: &ProblemSpec,
    config: &SolverConfig,
    mut stored: Trajectory,
    upto: usize,
) -> Result<(Trajectory, Option<BlowupReport>), SolverError> {
    stored.snapshots.truncate(upto + 1);
    stored.events.push(Event {
        t: stored.last().t,
        message: format!("resumed from snapshot {upto}"),
    });
    let engine = Engine::new(spec);
    run_from(&engine, config, stored)
}
