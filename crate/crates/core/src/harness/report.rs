//! Report assembly and emission: a JSON summary, tidy CSV series, and
//! plot-script text files per figure. CSV bytes are a pure function of the
//! trajectory and config, so identical runs produce identical files;
//! wall-clock provenance lives only in the JSON.

use super::{config::Config, io_err, HarnessError};
use crate::csvio;
use crate::diagnostics::{MonotoneCertificate, NondegeneracyReport, RateFit, WeakRateFit};
use crate::problem::{HypothesisCheck, ProblemSpec};
use crate::solver::{self, TerminalStatus, Trajectory};
use crate::zeroset::RegionMask;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// A report section that is either present or explicitly not applicable.
#[derive(Debug, Clone, Serialize)]
pub struct Section<T: Serialize> {
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<T>,
}

impl<T: Serialize> Section<T> {
    pub fn present(value: T) -> Self {
        Section {
            applicable: true,
            reason: None,
            value: Some(value),
        }
    }

    pub fn not_applicable(reason: String) -> Self {
        Section {
            applicable: false,
            reason: Some(reason),
            value: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: TerminalStatus,
    pub steps: u64,
    pub t_end: f64,
    pub max_u_end: f64,
    pub snapshots: usize,
    pub t_hat: Option<f64>,
    pub t_hat_uncertainty: Option<f64>,
    pub fit_degenerate: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZerosetSummary {
    pub eta: f64,
    pub m: u64,
    pub node_count: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub max_u_on_omega0: f64,
    #[serde(skip)]
    pub omega0: RegionMask,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationSummary {
    pub min_sup: f64,
    pub final_sup: f64,
    pub monotone_last_two_decades: bool,
    pub u_threshold: f64,
    pub k_floor: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub sup_ratio: Vec<f64>,
    #[serde(skip)]
    pub running_max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KaplanSummary {
    pub ell: f64,
    pub final_value: f64,
    pub increasing_near_end: bool,
    pub convex_near_end: bool,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrySummary {
    pub l_used: f64,
    pub proven_regime: bool,
    pub even_defect_max: f64,
    pub ux_max: f64,
    pub max_at_origin_all: bool,
    #[serde(skip)]
    pub rows: Vec<(f64, f64, f64, bool)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakSummary {
    pub t_hat_refined: f64,
    pub predicted_slope: f64,
    pub fit: WeakRateFit,
    #[serde(skip)]
    pub center_series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSummary {
    pub rate_fit: Section<RateFit>,
    pub deviation: Section<DeviationSummary>,
    pub j_certificate: Section<MonotoneCertificate>,
    pub kaplan: Section<KaplanSummary>,
    pub symmetry: Section<SymmetrySummary>,
    pub nondegeneracy: Section<NondegeneracyReport>,
    pub weak: Section<WeakSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub version: String,
    pub wall_time_s: f64,
    pub config: BTreeMap<String, String>,
    pub grid_points: usize,
    pub hypotheses: Vec<HypothesisCheck>,
    pub run: RunSummary,
    pub zeroset: Option<ZerosetSummary>,
    pub diagnostics: DiagnosticsSummary,
    pub asserts: Vec<AssertOutcome>,
}

impl ExperimentReport {
    pub fn all_asserts_passed(&self) -> bool {
        self.asserts.iter().all(|a| a.passed)
    }
}

/// Diagnostic CSV files a run may produce; recheck compares exactly these.
pub const SERIES_FILES: &[&str] = &[
    "max_series.csv",
    "final_profile.csv",
    "deviation.csv",
    "kaplan.csv",
    "symmetry.csv",
    "center_series.csv",
    "omega0_mask.csv",
];

pub fn emit(
    cfg: &Config,
    spec: &ProblemSpec,
    traj: &Trajectory,
    report: &ExperimentReport,
    dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grid = spec.domain.grid();
    let mut outputs: Vec<String> = Vec::new();
    let mut write = |name: &str, body: String| -> Result<(), HarnessError> {
        csvio::write_file(&dir.join(name), &body)?;
        outputs.push(name.to_string());
        Ok(())
    };

    // max-value series
    {
        let mut body = String::from("t,max_u,argmax_x,dt_last\n");
        for s in &traj.snapshots {
            let _ = writeln!(
                body,
                "{},{},{},{}",
                s.t,
                s.max_u(),
                grid[s.argmax()],
                s.dt_last
            );
        }
        write("max_series.csv", body)?;
    }

    // final profile
    {
        let last = traj.last();
        let mut body = String::from("x,u\n");
        for (i, &x) in grid.iter().enumerate() {
            let _ = writeln!(body, "{},{}", x, last.u[i]);
        }
        write("final_profile.csv", body)?;
    }

    if let Some(dev) = &report.diagnostics.deviation.value {
        let mut body = String::from("t,sup_ratio,running_max\n");
        for i in 0..dev.times.len() {
            let _ = writeln!(
                body,
                "{},{},{}",
                dev.times[i], dev.sup_ratio[i], dev.running_max[i]
            );
        }
        write("deviation.csv", body)?;
        write(
            "deviation.gnuplot",
            "set datafile separator \",\"\nset logscale y\nset xlabel \"t\"\nset ylabel \"sup |u_t - V f(u)| / (u^p + K)\"\nplot \"deviation.csv\" using 1:2 with lines title \"per-snapshot sup\", \\\n     \"deviation.csv\" using 1:3 with lines title \"running max\"\n".into(),
        )?;
    }

    if let Some(k) = &report.diagnostics.kaplan.value {
        let mut body = String::from("t,phi\n");
        for i in 0..k.times.len() {
            let _ = writeln!(body, "{},{}", k.times[i], k.values[i]);
        }
        write("kaplan.csv", body)?;
    }

    if let Some(s) = &report.diagnostics.symmetry.value {
        let mut body = String::from("t,even_defect,ux_max,max_at_origin\n");
        for &(t, defect, ux, origin) in &s.rows {
            let _ = writeln!(body, "{},{},{},{}", t, defect, ux, u8::from(origin));
        }
        write("symmetry.csv", body)?;
    }

    if let Some(w) = &report.diagnostics.weak.value {
        let mut body = String::from("t,u_center\n");
        for &(t, u) in &w.center_series {
            let _ = writeln!(body, "{},{}", t, u);
        }
        write("center_series.csv", body)?;
    }

    if let Some(z) = &report.zeroset {
        write("omega0_mask.csv", z.omega0.to_csv(&grid))?;
        write(
            "omega0_overlay.gnuplot",
            format!(
                "set datafile separator \",\"\nset xlabel \"x\"\nset y2tics\n# omega0: [{}, {}], eta = {}, m = {}\nplot \"final_profile.csv\" using 1:2 with lines title \"u(T)\", \\\n     \"omega0_mask.csv\" using 1:2 axes x1y2 with steps title \"omega0\"\n",
                z.x_lo, z.x_hi, z.eta, z.m
            ),
        )?;
    }

    if let Some(fit) = &report.diagnostics.rate_fit.value {
        let t_hat = report.run.t_hat.unwrap_or(f64::NAN);
        write(
            "rate_fit.gnuplot",
            format!(
                "set datafile separator \",\"\nset logscale xy\nset xlabel \"T - t\"\nset ylabel \"max u\"\nt_hat = {}\nplot \"max_series.csv\" using (t_hat - column(1)):2 with points title \"max u\", \\\n     {} * x**(-{}) title \"fit: exponent {:.4}, r2 {:.6}\"\n",
                t_hat, fit.amplitude_hat, fit.exponent_hat, fit.exponent_hat, fit.r_squared
            ),
        )?;
    }

    write(
        "final_profiles.gnuplot",
        "set datafile separator \",\"\nset xlabel \"x\"\nset ylabel \"u\"\nplot \"final_profile.csv\" using 1:2 with lines title \"u at the last snapshot\"\n".into(),
    )?;

    if cfg.bool_or("run.persist", false)? {
        solver::persist_trajectory(traj, &spec.domain, &dir.join("trajectory"))?;
        outputs.push("trajectory".into());
    }

    let json = serde_json::json!({
        "report": report,
        "outputs": outputs,
    });
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json)?).map_err(io_err(&path))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RecheckReport {
    pub compared: Vec<(String, bool)>,
    pub all_identical: bool,
}

/// Reloads the persisted trajectory of a run directory, recomputes every
/// diagnostic from it, emits the results under `<dir>/recheck`, and
/// byte-compares the diagnostic CSVs against the originals.
pub fn recheck(dir: &Path) -> Result<RecheckReport, HarnessError> {
    let json_path = dir.join("report.json");
    let text = std::fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let config_map = value
        .get("report")
        .and_then(|r| r.get("config"))
        .and_then(|c| c.as_object())
        .ok_or_else(|| HarnessError::Config("report.json has no config echo".into()))?;
    let mut cfg = Config {
        map: BTreeMap::new(),
    };
    for (k, v) in config_map {
        if let Some(s) = v.as_str() {
            cfg.set(k, s.to_string());
        }
    }
    let spec = super::build_spec(&cfg)?;
    let sc = super::solver_config(&cfg)?;
    let traj = solver::load_trajectory(&dir.join("trajectory"))?;
    let blowup = solver::make_blowup_report(&spec, &sc, &traj);
    let report = super::analyze(&cfg, &spec, &traj, blowup.as_ref())?;
    let recheck_dir = dir.join("recheck");
    emit(&cfg, &spec, &traj, &report, &recheck_dir)?;

    let mut compared = Vec::new();
    let mut all = true;
    for name in SERIES_FILES {
        let original = dir.join(name);
        if !original.exists() {
            continue;
        }
        let a = std::fs::read(&original).map_err(io_err(&original))?;
        let twin = recheck_dir.join(name);
        let b = std::fs::read(&twin).map_err(io_err(&twin))?;
        let same = a == b;
        all &= same;
        compared.push((name.to_string(), same));
    }
    Ok(RecheckReport {
        compared,
        all_identical: all,
    })
}
