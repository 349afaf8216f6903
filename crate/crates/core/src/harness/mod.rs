//! Experiment harness: builds problem instances from flat configs, runs
//! the solver, drives the selected diagnostics and oracle checks, evaluates
//! the config's assertions, and assembles reports. Sweeps run the cartesian
//! product of their axes with per-cell output directories.

pub mod config;
pub mod report;

use crate::diagnostics::{self, DiagnosticsError};
use crate::oracles::OracleError;
use crate::problem::{
    validate_hypotheses, BoundaryKind, CheckStatus, Domain, Geometry, HypothesisCheck,
    Nonlinearity, Potential, ProblemError, ProblemSpec,
};
use crate::solver::{
    self, BlowupReport, SolverConfig, SolverError, TerminalStatus, Trajectory,
};
use crate::zeroset::{RegionMask, ZerosetError};
use config::Config;
use report::{
    AssertOutcome, DeviationSummary, DiagnosticsSummary, ExperimentReport, KaplanSummary,
    RunSummary, Section, SymmetrySummary, WeakSummary, ZerosetSummary,
};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("hypothesis validation refused the run: {0}")]
    HypothesisRefused(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Zeroset(#[from] ZerosetError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] crate::csvio::CsvError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Spec construction
// ---------------------------------------------------------------------------

pub fn build_spec(cfg: &Config) -> Result<ProblemSpec, HarnessError> {
    let geometry = match cfg.require("domain.kind")? {
        "interval" => Geometry::Interval {
            a: cfg.require_f64("domain.a")?,
            b: cfg.require_f64("domain.b")?,
        },
        "radial_ball" => Geometry::RadialBall {
            n: cfg.usize_or("domain.n", 3)? as u32,
            radius: cfg.require_f64("domain.radius")?,
        },
        "radial_annulus" => Geometry::RadialAnnulus {
            n: cfg.usize_or("domain.n", 3)? as u32,
            r1: cfg.require_f64("domain.r1")?,
            r2: cfg.require_f64("domain.r2")?,
        },
        other => {
            return Err(HarnessError::Config(format!(
                "unknown domain.kind `{other}`"
            )))
        }
    };
    let boundary = match cfg.get("domain.boundary").unwrap_or("dirichlet") {
        "dirichlet" => BoundaryKind::DirichletZero,
        "neumann" => BoundaryKind::Neumann,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown domain.boundary `{other}`"
            )))
        }
    };
    let domain = Domain::new(geometry, cfg.usize_or("domain.grid_points", 256)?, boundary)?;

    let potential = match cfg.require("potential.kind")? {
        "constant" => Potential::Constant(cfg.require_f64("potential.value")?),
        "power_of_radius" => Potential::PowerOfRadius(cfg.require_f64("potential.sigma")?),
        "expression" => Potential::expression(cfg.require("potential.expr")?)?,
        "csv" => Potential::from_csv(Path::new(cfg.require("potential.path")?))?,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown potential.kind `{other}`"
            )))
        }
    };

    let nonlinearity = match cfg.require("nonlinearity.kind")? {
        "power" => Nonlinearity::Power {
            p: cfg.require_f64("nonlinearity.p")?,
        },
        "shifted_power" => Nonlinearity::ShiftedPower {
            p: cfg.require_f64("nonlinearity.p")?,
        },
        "exponential" => Nonlinearity::Exponential,
        "log_power" => Nonlinearity::LogPower {
            a: cfg.require_f64("nonlinearity.a")?,
        },
        other => {
            return Err(HarnessError::Config(format!(
                "unknown nonlinearity.kind `{other}`"
            )))
        }
    };

    let scale = cfg.f64_or("initial.scale", 1.0)?;
    let grid = domain.grid();
    let initial: Vec<f64> = match cfg.require("initial.kind")? {
        "constant" => {
            let v = cfg.require_f64("initial.value")?;
            vec![v * scale; grid.len()]
        }
        "expression" => {
            let ast = crate::expr::Expr::parse(cfg.require("initial.expr")?)
                .map_err(ProblemError::from)?;
            grid.iter().map(|&x| scale * ast.eval(x)).collect()
        }
        "csv" => {
            let rows = crate::csvio::read_two_column(Path::new(cfg.require("initial.path")?))
                .map_err(ProblemError::from)?;
            let sampled = Potential::sampled(rows)?;
            grid.iter().map(|&x| scale * sampled.eval(x)).collect()
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown initial.kind `{other}`"
            )))
        }
    };

    Ok(ProblemSpec::new(domain, potential, nonlinearity, initial)?)
}

pub fn solver_config(cfg: &Config) -> Result<SolverConfig, HarnessError> {
    let defaults = SolverConfig::default();
    Ok(SolverConfig {
        u_blow: cfg.f64_or("solver.u_blow", defaults.u_blow)?,
        horizon: cfg.f64_or("solver.horizon", defaults.horizon)?,
        safety: cfg.f64_or("solver.safety", defaults.safety)?,
        dt_min_factor: cfg.f64_or("solver.dt_min_factor", defaults.dt_min_factor)?,
        frames_per_decade: cfg.usize_or(
            "solver.frames_per_decade",
            defaults.frames_per_decade as usize,
        )? as u32,
        time_ticks: cfg.usize_or("solver.time_ticks", defaults.time_ticks as usize)? as u32,
        steady_rel_tol: defaults.steady_rel_tol,
        steady_window: defaults.steady_window,
    })
}

// ---------------------------------------------------------------------------
// Preset hypothesis revalidation
// ---------------------------------------------------------------------------

/// Runs the generic hypothesis checks plus the named preset's own, and
/// refuses the run on any failure. Presets are data files; this is what
/// keeps a silently edited preset from producing an unlabeled experiment.
pub fn validate_for_run(
    cfg: &Config,
    spec: &ProblemSpec,
) -> Result<Vec<HypothesisCheck>, HarnessError> {
    let mut entries = validate_hypotheses(spec).entries;
    let mode = cfg.get("run.hypotheses").unwrap_or("none");
    let mut extra = match mode {
        "none" => Vec::new(),
        "isolated-zero" => isolated_zero_checks(spec)?,
        "positive-potential" => positive_potential_checks(spec),
        "reflection" => reflection_checks(cfg, spec)?,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown run.hypotheses `{other}`"
            )))
        }
    };
    entries.append(&mut extra);
    if let Some(bad) = entries.iter().find(|e| e.status == CheckStatus::Fail) {
        return Err(HarnessError::HypothesisRefused(format!(
            "{}: {}",
            bad.name, bad.detail
        )));
    }
    // named modes additionally require the monotone mode to be available
    if mode != "none" {
        if let Some(res) = entries.iter().find(|e| e.name == "monotone_residual") {
            if res.status != CheckStatus::Pass {
                return Err(HarnessError::HypothesisRefused(format!(
                    "monotone_residual: {}",
                    res.detail
                )));
            }
        }
    }
    Ok(entries)
}

fn check(name: &str, ok: bool, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        name: name.to_string(),
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
        offending: Vec::new(),
    }
}

fn isolated_zero_checks(spec: &ProblemSpec) -> Result<Vec<HypothesisCheck>, HarnessError> {
    let mut out = Vec::new();
    let v0 = spec.potential.eval(0.0);
    out.push(check(
        "potential_zero_at_origin",
        v0.abs() <= crate::problem::ZERO_TOL,
        format!("V(0) = {v0:e}"),
    ));
    let grid = spec.domain.grid();
    let v = spec.potential_on_grid();
    let node = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let left_is_boundary = !matches!(spec.domain.geometry, Geometry::RadialBall { .. });
    let iso = crate::zeroset::isolating_subdomain_with_ends(&v, node, left_is_boundary, true);
    out.push(check(
        "zero_component_interior",
        iso.is_ok(),
        match &iso {
            Ok(s) => format!("omega0 found at m = {}, eta = {:.6}", s.m, s.eta),
            Err(e) => e.to_string(),
        },
    ));
    Ok(out)
}

fn positive_potential_checks(spec: &ProblemSpec) -> Vec<HypothesisCheck> {
    let v = spec.potential_on_grid();
    let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = vec![check(
        "potential_bounded_below",
        min_v > 0.0,
        format!("min V = {min_v:e}"),
    )];
    out.push(match spec.constants {
        Some(c) => check(
            "sobolev_subcritical",
            c.subcritical,
            format!("p = {}, p_S = {}", c.p, c.p_s),
        ),
        None => check(
            "sobolev_subcritical",
            false,
            "nonlinearity has no power exponent".into(),
        ),
    });
    out
}

fn reflection_checks(cfg: &Config, spec: &ProblemSpec) -> Result<Vec<HypothesisCheck>, HarnessError> {
    let l_cap = cfg.f64_or("diag.symmetry.l", 1.0 / 3.0)?;
    let mut out = Vec::new();
    out.push(check(
        "symmetric_interval",
        spec.domain.is_symmetric_interval(),
        format!("{:?}", spec.domain.geometry),
    ));
    if !spec.domain.is_symmetric_interval() {
        return Ok(out);
    }
    let grid = spec.domain.grid();
    let v = spec.potential_on_grid();
    let u0 = &spec.initial_data;
    let n = grid.len();
    let v_scale = v.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let u_scale = u0.iter().cloned().fold(0.0f64, f64::max).max(1e-300);

    let even = |f: &[f64], scale: f64| -> f64 {
        (0..n / 2)
            .map(|i| (f[i] - f[n - 1 - i]).abs())
            .fold(0.0f64, f64::max)
            / scale
    };
    out.push(check(
        "potential_even",
        even(&v, v_scale) < 1e-10,
        format!("relative defect {:.2e}", even(&v, v_scale)),
    ));
    out.push(check(
        "initial_even",
        even(u0, u_scale) < 1e-10,
        format!("relative defect {:.2e}", even(u0, u_scale)),
    ));
    out.push(check(
        "positive_at_origin",
        spec.potential.eval(0.0) > 0.0 && u0[n / 2].max(u0[(n - 1) / 2]) > 0.0,
        format!("V(0) = {}", spec.potential.eval(0.0)),
    ));

    // V' <= 0 and u0' <= 0 on [0, L]; caps V <= V(L), u0 <= u0(L) on [L, end]
    let l_node = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - l_cap).abs().total_cmp(&(b.1 - l_cap).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let mut v_mono = true;
    let mut u_mono = true;
    for i in 0..n - 1 {
        if grid[i] >= 0.0 && grid[i + 1] <= l_cap + 1e-12 {
            v_mono &= v[i + 1] <= v[i] + 1e-10 * v_scale;
            u_mono &= u0[i + 1] <= u0[i] + 1e-10 * u_scale;
        }
    }
    out.push(check(
        "potential_nonincreasing_to_l",
        v_mono,
        format!("checked up to L = {l_cap}"),
    ));
    out.push(check(
        "initial_nonincreasing_to_l",
        u_mono,
        format!("checked up to L = {l_cap}"),
    ));
    let mut v_cap = true;
    let mut u_cap = true;
    for i in 0..n {
        if grid[i] >= l_cap {
            v_cap &= v[i] <= v[l_node] + 1e-10 * v_scale;
            u_cap &= u0[i] <= u0[l_node] + 1e-10 * u_scale;
        }
    }
    out.push(check(
        "potential_capped_beyond_l",
        v_cap,
        format!("V(L) = {}", v[l_node]),
    ));
    out.push(check(
        "initial_capped_beyond_l",
        u_cap,
        format!("u0(L) = {}", u0[l_node]),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

pub fn run_experiment(
    cfg: &Config,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport, HarnessError> {
    let start = std::time::Instant::now();
    let spec = build_spec(cfg)?;
    let hypotheses = validate_for_run(cfg, &spec)?;
    let sc = solver_config(cfg)?;
    let (traj, blowup) = solver::run_to_blowup(&spec, &sc)?;
    let mut rep = analyze(cfg, &spec, &traj, blowup.as_ref())?;
    rep.hypotheses = hypotheses;
    rep.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir {
        report::emit(cfg, &spec, &traj, &rep, dir)?;
    }
    Ok(rep)
}

/// Pure analysis of a trajectory: every diagnostic the config selects,
/// the zeroset call, and the assertion verdicts. Rerunning this on a
/// reloaded trajectory reproduces the original report's numbers.
pub fn analyze(
    cfg: &Config,
    spec: &ProblemSpec,
    traj: &Trajectory,
    blowup: Option<&BlowupReport>,
) -> Result<ExperimentReport, HarnessError> {
    let grid = spec.domain.grid();
    let n = grid.len();
    let last = traj.last();

    let run = RunSummary {
        status: traj.status,
        steps: last.step_count,
        t_end: last.t,
        max_u_end: last.max_u(),
        snapshots: traj.snapshots.len(),
        t_hat: blowup.map(|b| b.t_hat),
        t_hat_uncertainty: blowup.map(|b| b.t_hat_uncertainty),
        fit_degenerate: blowup.map(|b| b.fit_degenerate),
    };

    // zeroset
    let zeroset = match cfg.f64_opt("zeroset.x0")? {
        Some(x0) => {
            let v = spec.potential_on_grid();
            let node = grid
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
                .map(|(i, _)| i)
                .unwrap();
            // the center of a ball is a symmetry point, not a boundary
            let left_is_boundary = !matches!(spec.domain.geometry, Geometry::RadialBall { .. });
            let iso = crate::zeroset::isolating_subdomain_with_ends(&v, node, left_is_boundary, true)?;
            let max_u_on_omega0 = traj
                .snapshots
                .iter()
                .flat_map(|s| iso.omega0.indices().map(move |i| s.u[i]))
                .fold(0.0f64, f64::max);
            let bnodes = iso.omega0.boundary_nodes();
            Some(ZerosetSummary {
                eta: iso.eta,
                m: iso.m,
                node_count: iso.omega0.count(),
                x_lo: grid[*bnodes.first().unwrap()],
                x_hi: grid[*bnodes.last().unwrap()],
                max_u_on_omega0,
                omega0: iso.omega0,
            })
        }
        None => None,
    };

    // rate fit
    let rate_fit = if cfg.bool_or("diag.rate_fit", false)? {
        match blowup {
            Some(b) => match diagnostics::fit_type_one_rate(traj, b.t_hat) {
                Ok(fit) => Section::present(fit),
                Err(e) => Section::not_applicable(e.to_string()),
            },
            None => Section::not_applicable("no blowup detected".into()),
        }
    } else {
        Section::not_applicable("not selected".into())
    };

    // deviation ratio
    let deviation = if cfg.bool_or("diag.deviation", false)? {
        let mask = match cfg.get("diag.deviation.mask").unwrap_or("inner_half") {
            "inner_half" => inner_half_mask(spec),
            "omega0" => zeroset
                .as_ref()
                .map(|z| z.omega0.clone())
                .ok_or_else(|| {
                    HarnessError::Config("deviation.mask = omega0 needs zeroset.x0".into())
                })?,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown deviation mask `{other}`"
                )))
            }
        };
        let series = diagnostics::ode_deviation(
            traj,
            spec,
            &mask,
            cfg.f64_or("diag.deviation.u_threshold", 1e4)?,
            cfg.f64_or("diag.deviation.k_floor", 1e6)?,
        )?;
        let min_sup = series.sup_ratio.iter().cloned().fold(f64::INFINITY, f64::min);
        let final_sup = series.sup_ratio.last().cloned().unwrap_or(f64::NAN);
        // monotone decrease over the last two decades of max u
        let max_end = last.max_u();
        let lookup: std::collections::BTreeMap<u64, f64> = traj
            .snapshots
            .iter()
            .map(|s| (s.t.to_bits(), s.max_u()))
            .collect();
        let mut monotone = true;
        let mut prev: Option<f64> = None;
        for (i, &t) in series.times.iter().enumerate() {
            let mu = lookup.get(&t.to_bits()).cloned().unwrap_or(0.0);
            if mu >= max_end / 100.0 {
                if let Some(p) = prev {
                    if series.sup_ratio[i] > p * (1.0 + 1e-9) + 1e-12 {
                        monotone = false;
                    }
                }
                prev = Some(series.sup_ratio[i]);
            }
        }
        Section::present(DeviationSummary {
            min_sup,
            final_sup,
            monotone_last_two_decades: monotone,
            u_threshold: series.u_threshold,
            k_floor: series.k_floor,
            times: series.times,
            sup_ratio: series.sup_ratio,
            running_max: series.running_max,
        })
    } else {
        Section::not_applicable("not selected".into())
    };

    // J certificate on omega0
    let j_certificate = if cfg.bool_or("diag.j_certificate", false)? {
        let mask = zeroset
            .as_ref()
            .map(|z| z.omega0.clone())
            .ok_or_else(|| HarnessError::Config("j_certificate needs zeroset.x0".into()))?;
        Section::present(diagnostics::monotone_certificate(traj, spec, &mask)?)
    } else {
        Section::not_applicable("not selected".into())
    };

    // Kaplan functional series
    let kaplan = match cfg.f64_opt("diag.kaplan.ell")? {
        Some(ell) => {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for s in &traj.snapshots {
                times.push(s.t);
                values.push(diagnostics::kaplan_functional(s, &grid, ell)?);
            }
            // increasing, convex slopes over the last frames
            let tail = 10.min(values.len());
            let lo = values.len() - tail;
            let mut increasing = true;
            let mut convex = true;
            let mut prev_slope = f64::NEG_INFINITY;
            for i in lo + 1..values.len() {
                if values[i] <= values[i - 1] {
                    increasing = false;
                }
                let dt = times[i] - times[i - 1];
                if dt > 0.0 {
                    let slope = (values[i] - values[i - 1]) / dt;
                    if slope + 1e-12 * slope.abs() < prev_slope {
                        convex = false;
                    }
                    prev_slope = slope;
                }
            }
            Section::present(KaplanSummary {
                ell,
                final_value: *values.last().unwrap(),
                increasing_near_end: increasing,
                convex_near_end: convex,
                times,
                values,
            })
        }
        None => Section::not_applicable("not selected".into()),
    };

    // symmetry / reflection monotonicity
    let symmetry = match cfg.f64_opt("diag.symmetry.l")? {
        Some(l_cap) => {
            let mut worst_defect = 0.0f64;
            let mut worst_ux = f64::NEG_INFINITY;
            let mut all_origin = true;
            let mut rows = Vec::new();
            let mut proven = true;
            for s in &traj.snapshots {
                let rep = diagnostics::symmetry_monotonicity_check(s, spec, l_cap)?;
                worst_defect = worst_defect.max(rep.even_defect);
                worst_ux = worst_ux.max(rep.ux_max);
                all_origin &= rep.max_at_origin;
                proven = rep.proven_regime;
                rows.push((s.t, rep.even_defect, rep.ux_max, rep.max_at_origin));
            }
            Section::present(SymmetrySummary {
                l_used: l_cap,
                proven_regime: proven,
                even_defect_max: worst_defect,
                ux_max: worst_ux,
                max_at_origin_all: all_origin,
                rows,
            })
        }
        None => Section::not_applicable("not selected".into()),
    };

    // nondegeneracy at the final maximum
    let nondegeneracy = if cfg.bool_or("diag.nondegeneracy", false)? {
        match (blowup, spec.constants) {
            (Some(b), Some(c)) => {
                let x0 = grid[last.argmax()];
                let a_coeff = spec.potential.eval(x0);
                match diagnostics::nondegeneracy_check(
                    traj, &grid, x0, a_coeff, c.alpha, c.kappa, b.t_hat,
                ) {
                    Ok(rep) => Section::present(rep),
                    Err(e) => Section::not_applicable(e.to_string()),
                }
            }
            (None, _) => Section::not_applicable("no blowup detected".into()),
            (_, None) => Section::not_applicable("nonlinearity has no power exponent".into()),
        }
    } else {
        Section::not_applicable("not selected".into())
    };

    // weak-nonlinearity double-log fit, with its own refined time estimate
    let weak = if cfg.bool_or("diag.weak_fit", false)? {
        match (blowup, spec.nonlinearity) {
            (Some(_), Nonlinearity::LogPower { a }) => {
                let v_center = spec.potential.eval(0.5 * (grid[0] + grid[n - 1]));
                let t_hat = diagnostics::estimate_weak_blowup_time(traj, &grid, a, v_center)?;
                let fit = diagnostics::weak_rate_fit(traj, &grid, t_hat, a)?;
                let c = grid
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                    .map(|(i, _)| i)
                    .unwrap();
                let center_series: Vec<(f64, f64)> =
                    traj.snapshots.iter().map(|s| (s.t, s.u[c])).collect();
                Section::present(WeakSummary {
                    t_hat_refined: t_hat,
                    predicted_slope: 1.0 / (a - 1.0),
                    fit,
                    center_series,
                })
            }
            (None, _) => Section::not_applicable("no blowup detected".into()),
            (_, _) => Section::not_applicable("nonlinearity is not log-power".into()),
        }
    } else {
        Section::not_applicable("not selected".into())
    };

    let diagnostics_summary = DiagnosticsSummary {
        rate_fit,
        deviation,
        j_certificate,
        kaplan,
        symmetry,
        nondegeneracy,
        weak,
    };

    let asserts = evaluate_asserts(cfg, spec, traj, blowup, &zeroset, &diagnostics_summary, n)?;

    Ok(ExperimentReport {
        name: cfg.name(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: 0.0,
        config: cfg.map.clone(),
        grid_points: n,
        hypotheses: Vec::new(),
        run,
        zeroset,
        diagnostics: diagnostics_summary,
        asserts,
    })
}

fn inner_half_mask(spec: &ProblemSpec) -> RegionMask {
    let grid = spec.domain.grid();
    let (a, b) = spec.domain.span();
    let center = 0.5 * (a + b);
    let quarter = 0.25 * (b - a);
    RegionMask::from_predicate(grid.len(), |i| (grid[i] - center).abs() <= quarter)
}

// ---------------------------------------------------------------------------
// Assertions
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn evaluate_asserts(
    cfg: &Config,
    spec: &ProblemSpec,
    traj: &Trajectory,
    blowup: Option<&BlowupReport>,
    zeroset: &Option<ZerosetSummary>,
    diag: &DiagnosticsSummary,
    n: usize,
) -> Result<Vec<AssertOutcome>, HarnessError> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(AssertOutcome {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    if let Some(want) = cfg.get("assert.status") {
        let got = match traj.status {
            TerminalStatus::BlowupDetected => "blowup",
            TerminalStatus::Steady => "steady",
            TerminalStatus::TimeHorizonReached => "horizon",
        };
        push("status", got == want, format!("want {want}, got {got}"));
    }

    if let Some(value) = cfg.f64_opt("assert.t_hat.value")? {
        let tol = cfg.f64_or("assert.t_hat.tol", 1e-6)?;
        let got = blowup.map(|b| b.t_hat);
        let passed = got.map(|t| (t - value).abs() <= tol).unwrap_or(false);
        push(
            "t_hat",
            passed,
            format!("want {value} ± {tol:e}, got {got:?}"),
        );
    }

    if let Some(value) = cfg.f64_opt("assert.exponent.value")? {
        let rtol = cfg.f64_or("assert.exponent.rtol", 0.05)?;
        let got = diag.rate_fit.value.as_ref().map(|f| f.exponent_hat);
        let passed = got
            .map(|e| (e - value).abs() <= rtol * value.abs())
            .unwrap_or(false);
        push(
            "exponent",
            passed,
            format!("want {value} ± {}%, got {got:?}", rtol * 100.0),
        );
    }

    if let Some(min) = cfg.f64_opt("assert.r_squared.min")? {
        let got = diag.rate_fit.value.as_ref().map(|f| f.r_squared);
        let passed = got.map(|r| r >= min).unwrap_or(false);
        push("r_squared", passed, format!("want >= {min}, got {got:?}"));
    }

    if let Some(min) = cfg.f64_opt("assert.max_u.min")? {
        let got = traj.last().max_u();
        push("max_u", got >= min, format!("want >= {min:e}, got {got:e}"));
    }

    if let Some(max) = cfg.f64_opt("assert.omega0_max_u.max")? {
        match zeroset {
            Some(z) => push(
                "omega0_max_u",
                z.max_u_on_omega0 <= max,
                format!("want <= {max:e}, got {:e}", z.max_u_on_omega0),
            ),
            None => push("omega0_max_u", false, "no zeroset computed".into()),
        }
    }

    if let Some(min) = cfg.f64_opt("assert.min_interior_u.min")? {
        // every interior node must have exceeded the bar at some snapshot
        // (monotone runs: the final snapshot carries the running max)
        let mut worst = f64::INFINITY;
        let mut worst_node = 0;
        for i in 1..n - 1 {
            let reached = traj
                .snapshots
                .iter()
                .map(|s| s.u[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if reached < worst {
                worst = reached;
                worst_node = i;
            }
        }
        push(
            "min_interior_u",
            worst >= min,
            format!("want >= {min:e}, slowest node {worst_node} reached {worst:e}"),
        );
    }

    if let Some(value) = cfg.f64_opt("assert.weak_slope.value")? {
        let rtol = cfg.f64_or("assert.weak_slope.rtol", 0.2)?;
        let got = diag.weak.value.as_ref().map(|w| w.fit.slope_hat);
        let passed = got
            .map(|s| (s - value).abs() <= rtol * value.abs())
            .unwrap_or(false);
        push(
            "weak_slope",
            passed,
            format!("want {value} ± {}%, got {got:?}", rtol * 100.0),
        );
    }

    if let Some(bar) = cfg.f64_opt("assert.deviation.below")? {
        let got = diag.deviation.value.as_ref().map(|d| d.min_sup);
        let passed = got.map(|m| m < bar).unwrap_or(false);
        push(
            "deviation_below",
            passed,
            format!("want min sup < {bar}, got {got:?}"),
        );
    }

    if cfg.get("assert.deviation.monotone_decades").is_some() {
        let got = diag
            .deviation
            .value
            .as_ref()
            .map(|d| d.monotone_last_two_decades);
        push(
            "deviation_monotone",
            got == Some(true),
            format!("monotone over last two decades: {got:?}"),
        );
    }

    if cfg.bool_or("assert.j_certificate", false)? {
        let got = diag.j_certificate.value.as_ref().map(|c| c.certified);
        push(
            "j_certificate",
            got == Some(true),
            match diag.j_certificate.value.as_ref() {
                Some(c) => format!(
                    "certified = {}, eps = {:e}, t1 = {}, min J = {:e}",
                    c.certified, c.epsilon, c.t1, c.min_j
                ),
                None => "certificate not computed".into(),
            },
        );
    }

    if let Some(x) = cfg.f64_opt("assert.blowup_set_excludes.x")? {
        let radius = cfg.f64_or("assert.blowup_set_excludes.radius", 0.1)?;
        match blowup {
            Some(b) => {
                let grid = spec.domain.grid();
                let inside: Vec<usize> = b
                    .blowup_set
                    .indices()
                    .filter(|&i| (grid[i] - x).abs() <= radius)
                    .collect();
                push(
                    "blowup_set_excludes",
                    inside.is_empty() && !b.blowup_set.is_empty(),
                    format!(
                        "{} blowup nodes within {radius} of {x} (set size {})",
                        inside.len(),
                        b.blowup_set.count()
                    ),
                );
            }
            None => push("blowup_set_excludes", false, "no blowup report".into()),
        }
    }

    if cfg.bool_or("assert.monotone", false)? {
        let mut ok = true;
        let mut worst = 0.0f64;
        for w in traj.snapshots.windows(2) {
            let slack = 1e-10 * w[1].max_u().max(1.0);
            for i in 0..n {
                let drop = w[0].u[i] - w[1].u[i];
                if drop > slack {
                    ok = false;
                    worst = worst.max(drop / w[1].max_u().max(1.0));
                }
            }
        }
        push(
            "monotone",
            ok,
            format!("worst relative decrease {worst:e}"),
        );
    }

    if let Some(bar) = cfg.f64_opt("assert.symmetry.even_defect_max")? {
        let got = diag.symmetry.value.as_ref().map(|s| s.even_defect_max);
        push(
            "symmetry_even",
            got.map(|d| d <= bar).unwrap_or(false),
            format!("want <= {bar:e}, got {got:?}"),
        );
    }
    if let Some(bar) = cfg.f64_opt("assert.symmetry.ux_max")? {
        let got = diag.symmetry.value.as_ref().map(|s| s.ux_max);
        push(
            "symmetry_ux",
            got.map(|d| d <= bar).unwrap_or(false),
            format!("want <= {bar:e}, got {got:?}"),
        );
    }
    if cfg.bool_or("assert.symmetry.max_at_origin", false)? {
        let got = diag.symmetry.value.as_ref().map(|s| s.max_at_origin_all);
        push(
            "symmetry_origin",
            got == Some(true),
            format!("max at origin at all snapshots: {got:?}"),
        );
    }

    if cfg.bool_or("assert.kaplan.increasing_convex", false)? {
        let got = diag
            .kaplan
            .value
            .as_ref()
            .map(|k| k.increasing_near_end && k.convex_near_end);
        push(
            "kaplan_shape",
            got == Some(true),
            format!("increasing and convex near the end: {got:?}"),
        );
    }

    if let Some(tol) = cfg.f64_opt("assert.nondegeneracy.equality_tol")? {
        let got = diag
            .nondegeneracy
            .value
            .as_ref()
            .map(|r| r.liminf_hat / r.threshold);
        let passed = got.map(|r| (r - 1.0).abs() <= tol).unwrap_or(false);
        push(
            "nondegeneracy_equality",
            passed,
            format!("want liminf/threshold = 1 ± {tol}, got {got:?}"),
        );
    }

    Ok(out)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub overrides: Vec<(String, String)>,
    pub status: Option<TerminalStatus>,
    pub t_end: Option<f64>,
    pub max_u_end: Option<f64>,
    pub t_hat: Option<f64>,
    pub exponent_hat: Option<f64>,
    pub asserts_passed: Option<bool>,
    pub error: Option<String>,
}

/// Runs the cartesian product of the sweep axes. Cells run concurrently up
/// to BLOWUP_LAB_WORKERS (default: available parallelism); each owns its
/// own output subdirectory and the aggregate is written in cell order.
pub fn sweep(cfg: &Config, out_dir: Option<&Path>) -> Result<Vec<SweepCell>, HarnessError> {
    let axes = cfg.sweep_axes()?;
    if axes.is_empty() {
        return Err(HarnessError::Config("sweep has no sweep.* axes".into()));
    }
    for (target, _) in &axes {
        if !cfg.map.contains_key(target) {
            return Err(HarnessError::Config(format!(
                "sweep axis targets unknown key `{target}`"
            )));
        }
    }
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let workers = std::env::var("BLOWUP_LAB_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, total.max(1));

    let cell_overrides = |index: usize| -> Vec<(String, String)> {
        let mut rem = index;
        let mut overrides = Vec::new();
        for (target, values) in &axes {
            let k = rem % values.len();
            rem /= values.len();
            overrides.push((target.clone(), values[k].clone()));
        }
        overrides
    };

    let results: Vec<std::sync::Mutex<Option<SweepCell>>> =
        (0..total).map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if index >= total {
                    break;
                }
                let overrides = cell_overrides(index);
                let mut cell_cfg = cfg.clone();
                for (k, v) in &overrides {
                    cell_cfg.set(k, v.clone());
                }
                // sweeps within a sweep are not a thing
                let keys: Vec<String> = cell_cfg
                    .map
                    .keys()
                    .filter(|k| k.starts_with("sweep."))
                    .cloned()
                    .collect();
                for k in keys {
                    cell_cfg.map.remove(&k);
                }
                let cell_dir = out_dir.map(|d| d.join(format!("cell_{index:04}")));
                let outcome = run_experiment(&cell_cfg, cell_dir.as_deref());
                let cell = match outcome {
                    Ok(rep) => SweepCell {
                        index,
                        overrides,
                        status: Some(rep.run.status),
                        t_end: Some(rep.run.t_end),
                        max_u_end: Some(rep.run.max_u_end),
                        t_hat: rep.run.t_hat,
                        exponent_hat: rep.diagnostics.rate_fit.value.as_ref().map(|f| f.exponent_hat),
                        asserts_passed: Some(rep.asserts.iter().all(|a| a.passed)),
                        error: None,
                    },
                    Err(e) => SweepCell {
                        index,
                        overrides,
                        status: None,
                        t_end: None,
                        max_u_end: None,
                        t_hat: None,
                        exponent_hat: None,
                        asserts_passed: None,
                        error: Some(e.to_string()),
                    },
                };
                *results[index].lock().unwrap() = Some(cell);
            });
        }
    });

    let cells: Vec<SweepCell> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("all cells visited"))
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut agg = String::from("cell");
        for (target, _) in &axes {
            agg.push(',');
            agg.push_str(target);
        }
        agg.push_str(",status,t_end,max_u_end,t_hat,exponent_hat,asserts_passed,error\n");
        for cell in &cells {
            agg.push_str(&cell.index.to_string());
            for (_, v) in &cell.overrides {
                agg.push(',');
                agg.push_str(v);
            }
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            agg.push_str(&format!(
                ",{},{},{},{},{},{},{}\n",
                cell.status.map(|s| format!("{s:?}")).unwrap_or_default(),
                fmt_opt(cell.t_end),
                fmt_opt(cell.max_u_end),
                fmt_opt(cell.t_hat),
                fmt_opt(cell.exponent_hat),
                cell.asserts_passed
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                cell.error.clone().unwrap_or_default().replace(',', ";"),
            ));
        }
        let path = dir.join("aggregate.csv");
        std::fs::write(&path, agg).map_err(io_err(&path))?;
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exclusion_potential_expression_evaluates_correctly() {
        let cfg = config::load("zero-exclusion").unwrap();
        let spec = build_spec(&cfg).unwrap();
        let v = |x: f64| spec.potential.eval(x);
        assert_eq!(v(0.0), 0.0);
        assert!((v(0.3) - 0.09).abs() < 1e-12);
        assert!((v(0.375) - 0.190625).abs() < 1e-12); // x^2 + 0.1*smoothstep(1/2)
        assert!((v(0.45) - 0.3025).abs() < 1e-12);
        assert!((v(1.0) - 1.1).abs() < 1e-12);
        assert!((v(2.0) - 4.1).abs() < 1e-12);
        assert!((v(-0.375) - v(0.375)).abs() == 0.0);
    }

    #[test]
    fn preset_hypotheses_accept_shipped_presets() {
        for name in ["zero-exclusion", "type-one-rate", "log-global"] {
            let cfg = config::load(name).unwrap();
            let spec = build_spec(&cfg).unwrap();
            let checks = validate_for_run(&cfg, &spec)
                .unwrap_or_else(|e| panic!("preset {name} refused: {e}"));
            assert!(!checks.is_empty());
        }
    }

    #[test]
    fn preset_validation_refuses_broken_edit() {
        // flipping the potential sign must be caught before any run
        let mut cfg = config::load("type-one-rate").unwrap();
        cfg.set("potential.value", "-1".into());
        let spec = build_spec(&cfg).unwrap();
        assert!(matches!(
            validate_for_run(&cfg, &spec),
            Err(HarnessError::HypothesisRefused(_))
        ));

        // breaking the evenness hypothesis of the reflection argument
        let mut cfg = config::load("log-global").unwrap();
        cfg.set("initial.expr", "(1-x^2)^2 + 0.1*(x+1)".into());
        let spec = build_spec(&cfg).unwrap();
        assert!(validate_for_run(&cfg, &spec).is_err());
    }

    #[test]
    fn ode_preset_spec_is_flat_constant() {
        let cfg = config::load("ode-exact-p2").unwrap();
        let spec = build_spec(&cfg).unwrap();
        assert!(spec.initial_data.iter().all(|&u| u == 1.0));
        assert_eq!(spec.domain.grid_points, 256);
        let sc = solver_config(&cfg).unwrap();
        assert_eq!(sc.u_blow, 4e3);
        assert_eq!(sc.safety, 0.4);
    }
}
