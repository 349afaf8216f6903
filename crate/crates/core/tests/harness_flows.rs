//! End-to-end harness flows: report emission and its file set, recheck of
//! stored runs, sweep aggregation with failing cells, config-driven CSV
//! inputs, and the grid-refinement behavior of the detected blowup time.

use blowup_lab::harness::{self, config::Config, report};
use std::path::PathBuf;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "blowup_lab_flows_{}_{name}",
        std::process::id()
    ));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn emitted_file_set_matches_declaration() {
    let dir = scratch("emit");
    let mut cfg = harness::config::load("ode-exact-p2").unwrap();
    cfg.set("run.persist", "true".into());
    let rep = harness::run_experiment(&cfg, Some(&dir)).unwrap();
    assert!(rep.all_asserts_passed());

    // the json echoes its own output list; every declared file exists
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let outputs = value["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for out in outputs {
        assert!(
            dir.join(out.as_str().unwrap()).exists(),
            "declared output {out} missing"
        );
    }
    for required in ["max_series.csv", "final_profile.csv", "final_profiles.gnuplot"] {
        assert!(dir.join(required).exists(), "{required} missing");
    }
    // schema spot-checks
    assert!(value["report"]["run"]["t_hat"].is_number());
    assert!(value["report"]["config"]["solver.u_blow"].is_string());
    assert_eq!(value["report"]["run"]["status"], "BlowupDetected");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn report_without_blowup_marks_rate_fit_not_applicable() {
    let dir = scratch("steady");
    let cfg = Config::parse(
        "run.name = decay\n\
         domain.kind = interval\n\
         domain.a = -1\n\
         domain.b = 1\n\
         domain.grid_points = 65\n\
         domain.boundary = dirichlet\n\
         potential.kind = constant\n\
         potential.value = 1\n\
         nonlinearity.kind = power\n\
         nonlinearity.p = 2\n\
         initial.kind = expression\n\
         initial.expr = 0.1*cos(pi*x/2)\n\
         solver.horizon = 1\n\
         diag.rate_fit = true\n\
         assert.status = horizon\n",
    )
    .unwrap();
    let rep = harness::run_experiment(&cfg, Some(&dir)).unwrap();
    assert!(rep.all_asserts_passed(), "{:?}", rep.asserts);
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rate = &value["report"]["diagnostics"]["rate_fit"];
    assert_eq!(rate["applicable"], false);
    assert!(rate["reason"].as_str().unwrap().contains("no blowup"));
    assert!(!dir.join("rate_fit.gnuplot").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn recheck_reproduces_diagnostics_bit_for_bit() {
    let dir = scratch("recheck");
    let mut cfg = harness::config::load("type-one-rate").unwrap();
    cfg.set("run.persist", "true".into());
    harness::run_experiment(&cfg, Some(&dir)).unwrap();
    let rep = report::recheck(&dir).unwrap();
    assert!(rep.all_identical, "{:?}", rep.compared);
    assert!(rep.compared.len() >= 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_keeps_failed_cells_in_the_aggregate() {
    let dir = scratch("sweep");
    let mut cfg = harness::config::load("ode-exact-p2").unwrap();
    // p = 0.5 violates p > 1 and must fail its cell without killing the sweep
    cfg.set("sweep.nonlinearity.p", "2, 0.5, 3".into());
    cfg.set("solver.u_blow", "1e3".into());
    cfg.map.remove("assert.t_hat.value");
    cfg.map.remove("assert.t_hat.tol");
    cfg.map.remove("assert.nondegeneracy.equality_tol");
    let cells = harness::sweep(&cfg, Some(&dir)).unwrap();
    assert_eq!(cells.len(), 3);
    assert!(cells[0].error.is_none());
    assert!(cells[1].error.as_deref().unwrap_or("").contains("exceed"));
    assert!(cells[2].error.is_none());

    let agg = std::fs::read_to_string(dir.join("aggregate.csv")).unwrap();
    // header plus one row per cell, failures included
    assert_eq!(agg.lines().count(), 4, "{agg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn lambda_sweep_times_decrease_with_amplitude() {
    let cells = harness::sweep(&harness::config::load("lambda-sweep").unwrap(), None).unwrap();
    assert_eq!(cells.len(), 4);
    let mut prev = f64::INFINITY;
    for cell in &cells {
        assert!(cell.error.is_none(), "{:?}", cell.error);
        assert_eq!(cell.asserts_passed, Some(true));
        let t_hat = cell.t_hat.expect("blowup time estimated");
        assert!(t_hat < prev, "t_hat must decrease with lambda");
        prev = t_hat;
    }
}

#[test]
fn csv_inputs_feed_potential_and_initial_data() {
    let dir = scratch("csv");
    std::fs::create_dir_all(&dir).unwrap();
    let mut v_csv = String::from("x,v\n");
    let mut u_csv = String::from("x,u\n");
    for i in 0..=200 {
        let x = -1.0 + 2.0 * i as f64 / 200.0;
        v_csv.push_str(&format!("{},{}\n", x, 1.0 + 0.5 * x * x));
        u_csv.push_str(&format!("{},{}\n", x, (1.0 - x * x).max(0.0)));
    }
    std::fs::write(dir.join("v.csv"), v_csv).unwrap();
    std::fs::write(dir.join("u0.csv"), u_csv).unwrap();

    let cfg = Config::parse(&format!(
        "run.name = csv-driven\n\
         domain.kind = interval\n\
         domain.a = -1\n\
         domain.b = 1\n\
         domain.grid_points = 129\n\
         domain.boundary = dirichlet\n\
         potential.kind = csv\n\
         potential.path = {}\n\
         nonlinearity.kind = power\n\
         nonlinearity.p = 2\n\
         initial.kind = csv\n\
         initial.path = {}\n\
         initial.scale = 12\n\
         solver.u_blow = 1e6\n\
         solver.horizon = 2\n\
         assert.status = blowup\n",
        dir.join("v.csv").display(),
        dir.join("u0.csv").display()
    ))
    .unwrap();
    let rep = harness::run_experiment(&cfg, None).unwrap();
    assert!(rep.all_asserts_passed(), "{:?}", rep.asserts);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn detected_time_converges_at_second_order_under_refinement() {
    // halving dx must shrink the change in t_hat by roughly 4x
    let mut t_hats = Vec::new();
    for n in [129usize, 257, 513] {
        let mut cfg = harness::config::load("type-one-rate").unwrap();
        cfg.set("domain.grid_points", n.to_string());
        let spec = harness::build_spec(&cfg).unwrap();
        let sc = harness::solver_config(&cfg).unwrap();
        let (_, blowup) = blowup_lab::solver::run_to_blowup(&spec, &sc).unwrap();
        t_hats.push(blowup.unwrap().t_hat);
    }
    let d1 = (t_hats[1] - t_hats[0]).abs();
    let d2 = (t_hats[2] - t_hats[1]).abs();
    assert!(
        d2 < d1 / 2.5,
        "refinement changes: {d1:e} then {d2:e} (t_hats {t_hats:?})"
    );
}

#[test]
fn rescale_window_inverse_matches_stored_solution() {
    // zoom into a smooth evolving profile at dx = 1/512 and map the
    // window back: values must match the stored snapshots to
    // interpolation error
    let cfg = Config::parse(
        "run.name = rescale-roundtrip\n\
         domain.kind = interval\n\
         domain.a = -1\n\
         domain.b = 1\n\
         domain.grid_points = 1025\n\
         domain.boundary = dirichlet\n\
         potential.kind = constant\n\
         potential.value = 1\n\
         nonlinearity.kind = power\n\
         nonlinearity.p = 2\n\
         initial.kind = expression\n\
         initial.expr = 8*cos(pi*x/2)^2\n\
         solver.horizon = 0.05\n\
         solver.u_blow = 1e12\n",
    )
    .unwrap();
    let spec = harness::build_spec(&cfg).unwrap();
    let sc = harness::solver_config(&cfg).unwrap();
    let (traj, _) = blowup_lab::solver::run_to_blowup(&spec, &sc).unwrap();
    assert!(traj.snapshots.len() > 100, "dense time ticks expected");

    let grid = spec.domain.grid();
    let t_star = 0.2;
    let t_hat = 0.025;
    let window = blowup_lab::oracles::rescale_window(
        &traj,
        &grid,
        t_star,
        t_hat,
        0.2,
        1.0,
        (-0.09, 0.09),
        1.0,
        64,
        512,
    )
    .unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for snap in &traj.snapshots {
        let s = (snap.t - t_hat) / (window.lambda * window.lambda);
        if !(-0.08..=0.08).contains(&s) {
            continue;
        }
        for (i, &x) in grid.iter().enumerate() {
            if (x - 0.2).abs() > 0.9 * window.lambda {
                continue;
            }
            if let Some(u_rec) = window.u_from(snap.t, x) {
                checked += 1;
                worst = worst.max((u_rec - snap.u[i]).abs() / snap.u[i].abs().max(1e-9));
            }
        }
    }
    assert!(checked > 1000, "only {checked} samples in the window");
    assert!(worst < 1e-3, "round-trip error {worst:e}");
}
