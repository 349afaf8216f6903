//! Command-line front end: run and sweep experiments from flat configs or
//! shipped presets, evaluate the closed-form oracles in check mode, find
//! isolating subdomains of sampled potentials, and re-verify stored runs.

use blowup_lab::harness::{self, config};
use blowup_lab::oracles;
use blowup_lab::problem::Nonlinearity;
use blowup_lab::zeroset;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "blowup-lab",
    about = "Numerical laboratory for u_t = Δu + V(x) f(u): blowup runs, diagnostics, and oracle checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file or preset name
    Run {
        /// Preset name or path to a .conf file
        config: String,
        /// Output directory for the report, series CSVs, and plot scripts
        #[arg(long)]
        out: Option<PathBuf>,
        /// Persist the trajectory store (enables `report` re-verification)
        #[arg(long)]
        persist: bool,
    },
    /// Run the cartesian product of the config's sweep.* axes
    Sweep {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a closed-form oracle and emit a pass/fail JSON
    Check {
        #[command(subcommand)]
        oracle: CheckCommand,
    },
    /// Find the isolating subdomain around a zero of a sampled potential
    Zeroset {
        /// Two-column CSV of (x, V) samples
        potential_csv: PathBuf,
        /// Coordinate of the zero to isolate
        x0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the diagnostics of a stored run and compare byte-for-byte
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Exact blowup ODE u' = A u^p
    Ode { u0: f64, p: f64, a_coeff: f64 },
    /// Plateau cutoff profile and its inferred gradient/Laplacian constant
    Cutoff { r_outer: f64, l: u32, sigma: f64 },
    /// Margin of the comparison amplitude B between k and kappa
    Threshold {
        p: f64,
        a_coeff: f64,
        k: f64,
        epsilon: f64,
        c_eps: f64,
        tau0: f64,
    },
    /// Dirichlet heat kernel of (0,1): value, flux, mass, and symmetry
    HeatKernel { t: f64, x: f64, y: f64 },
    /// Rescaled nonlinearity lambda^(2p/(p-1)) f(lambda^(-2/(p-1)) v)
    RescaledF {
        kind: String,
        p: f64,
        lambda: f64,
        v: f64,
    },
    /// Intermediate exponent m = (1+2 eps) k^(p-1), enforcing m < alpha
    IntermediateM { p: f64, k: f64, epsilon: f64 },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            config,
            out,
            persist,
        } => {
            let mut cfg = config::load(&config)?;
            if persist {
                cfg.set("run.persist", "true".into());
            }
            let report = harness::run_experiment(&cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            for a in &report.asserts {
                eprintln!(
                    "assert {:24} {}  {}",
                    a.name,
                    if a.passed { "PASS" } else { "FAIL" },
                    a.detail
                );
            }
            Ok(exit_for(report.all_asserts_passed()))
        }
        Command::Sweep { config, out } => {
            let cfg = config::load(&config)?;
            let cells = harness::sweep(&cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&cells)?);
            let ok = cells
                .iter()
                .all(|c| c.error.is_none() && c.asserts_passed.unwrap_or(true));
            Ok(exit_for(ok))
        }
        Command::Check { oracle } => {
            let (json, pass) = run_check(oracle)?;
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(exit_for(pass))
        }
        Command::Zeroset {
            potential_csv,
            x0,
            out,
        } => {
            let rows = blowup_lab::csvio::read_two_column(&potential_csv)?;
            let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let vs: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let node = xs
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
                .map(|(i, _)| i)
                .ok_or("empty potential file")?;
            let iso = zeroset::isolating_subdomain(&vs, node)?;
            let bnodes = iso.omega0.boundary_nodes();
            let json = serde_json::json!({
                "x0": xs[node],
                "m": iso.m,
                "eta": iso.eta,
                "omega0_nodes": iso.omega0.count(),
                "omega0_span": [xs[bnodes[0]], xs[*bnodes.last().unwrap()]],
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("omega0_mask.csv"), iso.omega0.to_csv(&xs))?;
                std::fs::write(dir.join("zeroset.json"), serde_json::to_string_pretty(&json)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let rep = harness::report::recheck(&dir)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(exit_for(rep.all_identical))
        }
    }
}

fn exit_for(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run_check(
    oracle: CheckCommand,
) -> Result<(serde_json::Value, bool), Box<dyn std::error::Error>> {
    Ok(match oracle {
        CheckCommand::Ode { u0, p, a_coeff } => {
            let ode = oracles::exact_ode_blowup(u0, p, a_coeff)?;
            let alpha = ode.alpha;
            let kappa = alpha.powf(alpha);
            let amp = ode.amplitude();
            let pass = ((amp - kappa * a_coeff.powf(-alpha)) / amp).abs() < 1e-12;
            (
                serde_json::json!({
                    "oracle": "ode",
                    "inputs": {"u0": u0, "p": p, "A": a_coeff},
                    "t_star": ode.t_star,
                    "alpha": alpha,
                    "amplitude": amp,
                    "kappa_scaled": kappa * a_coeff.powf(-alpha),
                    "pass": pass,
                }),
                pass,
            )
        }
        CheckCommand::Cutoff { r_outer, l, sigma } => match oracles::cutoff_build(r_outer, l, sigma, 8192) {
            Ok(profile) => {
                let pass = profile.c_inferred.is_finite();
                (
                    serde_json::json!({
                        "oracle": "cutoff",
                        "inputs": {"R": r_outer, "l": l, "sigma": sigma},
                        "c_inferred": profile.c_inferred,
                        "plateau_value": 1.0,
                        "support_edge": 2.0 * r_outer / 3.0,
                        "pass": pass,
                    }),
                    pass,
                )
            }
            Err(e) => (
                serde_json::json!({
                    "oracle": "cutoff",
                    "inputs": {"R": r_outer, "l": l, "sigma": sigma},
                    "error": e.to_string(),
                    "pass": false,
                }),
                false,
            ),
        },
        CheckCommand::Threshold {
            p,
            a_coeff,
            k,
            epsilon,
            c_eps,
            tau0,
        } => {
            let c = oracles::comparison_threshold_check(p, a_coeff, k, epsilon, c_eps, tau0)?;
            (
                serde_json::json!({
                    "oracle": "threshold",
                    "inputs": {"p": p, "A": a_coeff, "k": k, "epsilon": epsilon, "c_eps": c_eps, "tau0": tau0},
                    "b_used": c.b_used,
                    "kappa": c.kappa,
                    "margin": c.margin,
                    "pass": c.ok,
                }),
                c.ok,
            )
        }
        CheckCommand::HeatKernel { t, x, y } => {
            let g = oracles::dirichlet_heat_kernel(t, x, y, 100_000)?;
            let g_sym = oracles::dirichlet_heat_kernel(t, y, x, 100_000)?;
            let mass = oracles::dirichlet_heat_mass(t, x, 100_000)?;
            let flux = oracles::dirichlet_heat_flux(t, x, 100_000)?;
            let pass = (g - g_sym).abs() < 1e-12 && mass < 1.0;
            (
                serde_json::json!({
                    "oracle": "heat-kernel",
                    "inputs": {"t": t, "x": x, "y": y},
                    "g": g,
                    "symmetry_defect": (g - g_sym).abs(),
                    "mass": mass,
                    "flux_at_zero": flux,
                    "pass": pass,
                }),
                pass,
            )
        }
        CheckCommand::RescaledF { kind, p, lambda, v } => {
            let f = match kind.as_str() {
                "power" => Nonlinearity::Power { p },
                "shifted_power" => Nonlinearity::ShiftedPower { p },
                other => return Err(format!("unknown power-like kind `{other}`").into()),
            };
            let got = oracles::rescaled_nonlinearity(&f, lambda, v)?;
            (
                serde_json::json!({
                    "oracle": "rescaled-f",
                    "inputs": {"kind": kind, "p": p, "lambda": lambda, "v": v},
                    "value": got,
                    "pure_power_value": v.powf(p),
                    "pass": true,
                }),
                true,
            )
        }
        CheckCommand::IntermediateM { p, k, epsilon } => match oracles::intermediate_exponent(p, k, epsilon) {
            Ok(m) => (
                serde_json::json!({
                    "oracle": "intermediate-m",
                    "inputs": {"p": p, "k": k, "epsilon": epsilon},
                    "m": m,
                    "alpha": 1.0 / (p - 1.0),
                    "pass": true,
                }),
                true,
            ),
            Err(e) => (
                serde_json::json!({
                    "oracle": "intermediate-m",
                    "inputs": {"p": p, "k": k, "epsilon": epsilon},
                    "error": e.to_string(),
                    "pass": false,
                }),
                false,
            ),
        },
    })
}
