mod common;

use common::scenario;
use slp_core::report::{csv, CSV_HEADER};
use slp_core::vehicle::{linearize_discretize, simulate_nonlinear};
use slp_core::{emit_report, plan, Grid, Method, PlanOptions, ReportError, RoadCenterline, SpatialState, VehicleParams};

fn params() -> VehicleParams {
    VehicleParams {
        a: 1.1,
        b: 5.2,
        w: 0.95,
        l: 4.3,
        delta_max: 40f64.to_radians(),
        delta_rate_max: 30f64.to_radians(),
        mu: 0.9,
    }
}

/// One forward-Euler stage against RK4 over the same interval: the local defect
/// shrinks with the square of the step.
#[test]
fn euler_stage_defect_is_second_order() {
    let p = params();
    let pts: Vec<[f64; 2]> = (0..=200)
        .map(|i| {
            let t = i as f64 * 0.01;
            [40.0 * t.sin(), 40.0 - 40.0 * t.cos()]
        })
        .collect();
    let cl = RoadCenterline::from_waypoints(&pts, 0.5).unwrap();
    let z = SpatialState::new(0.2, 0.8);
    let u = 0.15;
    let s0 = 20.0;
    let mut logs = Vec::new();
    for k in 0..6 {
        let h = 2.0 / 2f64.powi(k);
        let grid = Grid::from_stations(vec![s0, s0 + h]);
        let stage = linearize_discretize(&grid, &[z, z], &[u], &cl, &p).unwrap()[0];
        let euler = stage.propagate(z.as_array(), u);
        let truth = simulate_nonlinear(z, &[u], &grid, &cl, &p).unwrap()[1];
        let defect = (euler[0] - truth.e_psi).hypot(euler[1] - truth.e_y);
        logs.push((h.ln(), defect.ln()));
    }
    for w in logs.windows(2) {
        let order = (w[0].1 - w[1].1) / (w[0].0 - w[1].0);
        assert!((order - 2.0).abs() < 0.15, "observed order {order:.3}");
    }
}

#[test]
fn warm_starts_beat_cold_starts() {
    let sc = scenario("tight");
    let (mut warm, mut better) = (0, 0);
    for method in [Method::Slp, Method::Slpp] {
        for grid in [100, 150, 200] {
            let options = PlanOptions { grid: Some(grid), compare_cold_start: true, ..PlanOptions::default() };
            let out = plan(&sc, method, &options).unwrap();
            for r in out.records.iter().filter(|r| r.warm_started) {
                warm += 1;
                if r.pivots <= r.cold_pivots.unwrap() {
                    better += 1;
                }
            }
        }
    }
    assert!(warm >= 5, "only {warm} warm-started solves recorded");
    assert!(better * 5 >= warm * 4, "{better} of {warm} warm starts at or below the cold pivot count");
}

#[test]
fn csv_has_one_finite_row_per_station() {
    let sc = scenario("tight");
    for method in [Method::Slp, Method::Cpp] {
        let out = plan(&sc, method, &PlanOptions::default()).unwrap();
        let text = csv(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), out.grid.intervals() + 1);
        for row in rows {
            let values: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(values.len(), 9);
            assert!(values.iter().all(|v| v.is_finite()), "{row}");
        }
    }
}

#[test]
fn report_files_and_steering_limits() {
    let sc = scenario("tight");
    let out = plan(&sc, Method::Slp, &PlanOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cl = sc.centerline().unwrap();
    let hw = |s: f64| sc.road.halfwidth.half_width_at(s);
    let files = emit_report(&out, &cl, &hw, dir.path()).unwrap();
    assert_eq!(files.len(), 6);
    assert!(files.iter().all(|f| f.metadata().unwrap().len() > 0));
    let steering = std::fs::read_to_string(dir.path().join("steering.svg")).unwrap();
    assert_eq!(steering.matches("stroke-dasharray").count(), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["method"], "slp");
    assert_eq!(summary["iterations"], out.iterations);

    let mut empty = out.clone();
    empty.states.clear();
    assert!(matches!(csv(&empty), Err(ReportError::EmptyResult)));
}

#[test]
fn obstacle_free_plan_with_offset_goal_stays_in_lane() {
    let mut sc = scenario("straight");
    sc.end.e_y = 1.5;
    let out = plan(&sc, Method::Slp, &PlanOptions::default()).unwrap();
    assert!(out.converged && out.slacks.max() < 1e-9);
    let last = out.states.last().unwrap();
    assert!((last.e_y - 1.5).abs() < 1e-6 && last.e_psi.abs() < 1e-6);
    let hw = sc.road.halfwidth.half_width_at(0.0);
    assert!(out.states.iter().all(|z| z.e_y.abs() < hw));
}
