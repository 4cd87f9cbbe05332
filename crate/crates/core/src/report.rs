//! Plan output: per-station CSV, SVG plots and a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::frenet::RoadCenterline;
use crate::planner::Plan;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("empty result")]
    EmptyResult,
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    fs::write(path, text).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

pub const CSV_HEADER: &str = "s,e_psi,e_y,delta,x,y,eta,kappa,v_max";

pub fn csv(plan: &Plan) -> Result<String, ReportError> {
    if plan.states.is_empty() {
        return Err(ReportError::EmptyResult);
    }
    let delta = plan.steering_at_stations();
    let mut out = String::with_capacity(plan.states.len() * 120);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (j, z) in plan.states.iter().enumerate() {
        let p = plan.positions[j];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            plan.grid.stations()[j],
            z.e_psi,
            z.e_y,
            delta.get(j).copied().unwrap_or(0.0),
            p[0],
            p[1],
            plan.speed.eta[j],
            plan.speed.curvature[j],
            plan.speed.v_max[j]
        );
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct IterationSummary {
    objective: f64,
    max_slack: f64,
    pivots: usize,
    phase_two_pivots: usize,
    cold_pivots: Option<usize>,
    warm_started: bool,
    lp_rows: usize,
    lp_vars: usize,
    simulation_defect: f64,
    collision_free: bool,
    smooth: bool,
    violation: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    method: String,
    stations: usize,
    iterations: usize,
    converged: bool,
    termination: Option<String>,
    objective: Option<f64>,
    slack_corridor: f64,
    slack_end_heading: f64,
    slack_end_lateral: f64,
    sample_time: f64,
    max_abs_steering_deg: f64,
    steering_limit_deg: f64,
    min_v_max_kmh: f64,
    min_v_max_eta: f64,
    path_length: f64,
    cpp_waypoints: Vec<[f64; 2]>,
    cpp_merged_waypoints: usize,
    records: Vec<IterationSummary>,
}

pub fn summary_json(plan: &Plan) -> Result<String, ReportError> {
    if plan.states.is_empty() {
        return Err(ReportError::EmptyResult);
    }
    let (v_min, at) = plan.speed.minimum();
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let summary = Summary {
        method: plan.method.to_string(),
        stations: plan.states.len(),
        iterations: plan.iterations,
        converged: plan.converged,
        termination: plan.termination.map(|t| format!("{t:?}")),
        objective: finite(plan.objective),
        slack_corridor: plan.slacks.corridor,
        slack_end_heading: plan.slacks.end_heading,
        slack_end_lateral: plan.slacks.end_lateral,
        sample_time: plan.sample_time,
        max_abs_steering_deg: plan.max_abs_steering().to_degrees(),
        steering_limit_deg: plan.params.delta_max.to_degrees(),
        min_v_max_kmh: v_min * 3.6,
        min_v_max_eta: at,
        path_length: plan.speed.eta.last().copied().unwrap_or(0.0),
        cpp_waypoints: plan.cpp_waypoints.clone(),
        cpp_merged_waypoints: plan.cpp_merged_waypoints,
        records: plan
            .records
            .iter()
            .map(|r| IterationSummary {
                objective: r.objective,
                max_slack: r.max_slack,
                pivots: r.pivots,
                phase_two_pivots: r.phase_two_pivots,
                cold_pivots: r.cold_pivots,
                warm_started: r.warm_started,
                lp_rows: r.lp_rows,
                lp_vars: r.lp_vars,
                simulation_defect: if r.simulation_defect.is_finite() { r.simulation_defect } else { -1.0 },
                collision_free: r.check.collision_free,
                smooth: r.check.smooth,
                violation: r.check.violation,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"))
}

/// Writes `trajectory.csv`, `summary.json` and four SVG plots into `dir`.
pub fn emit_report(plan: &Plan, centerline: &RoadCenterline, road_halfwidth: &dyn Fn(f64) -> f64, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let csv = csv(plan)?;
    fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.display().to_string(), source })?;
    let files = [
        ("trajectory.csv", csv),
        ("summary.json", summary_json(plan)?),
        ("global.svg", global_plot(plan, centerline, road_halfwidth)),
        ("lateral.svg", lateral_plot(plan)),
        ("steering.svg", steering_plot(plan)),
        ("speed.svg", speed_plot(plan)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

struct Series {
    points: Vec<[f64; 2]>,
    color: &'static str,
    dashed: bool,
    closed: bool,
}

impl Series {
    fn line(points: Vec<[f64; 2]>, color: &'static str) -> Self {
        Self { points, color, dashed: false, closed: false }
    }

    fn dashed(points: Vec<[f64; 2]>, color: &'static str) -> Self {
        Self { points, color, dashed: true, closed: false }
    }

    fn polygon(points: Vec<[f64; 2]>, color: &'static str) -> Self {
        Self { points, color, dashed: false, closed: true }
    }
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], equal_aspect: bool) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p[0].is_finite() && p[1].is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let (mut sx, mut sy) = (w / (x1 - x0), h / (y1 - y0));
    if equal_aspect {
        let k = sx.min(sy);
        sx = k;
        sy = k;
    }
    let map = |p: [f64; 2]| (MARGIN + (p[0] - x0) * sx, HEIGHT - MARGIN - (p[1] - y0) * sy);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black" stroke-width="0.8"/>"#
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = x0 + t * (x1 - x0).min(w / sx);
        let (px, _) = map([xv, y0]);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, HEIGHT - MARGIN + 16.0, tick(xv));
        let yv = y0 + t * (y1 - y0).min(h / sy);
        let (_, py) = map([x0, yv]);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{}</text>"#, MARGIN - 6.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p[0].is_finite() && p[1].is_finite())
            .map(|&p| {
                let (a, b) = map(p);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let tag = if s.closed { "polygon" } else { "polyline" };
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<{tag} points="{}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
            coords.join(" "),
            s.color
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn title(plan: &Plan, what: &str) -> String {
    format!("{} {what}", plan.method.as_str().to_uppercase())
}

/// Global plane: road edges, obstacles, path and footprints.
pub fn global_plot(plan: &Plan, cl: &RoadCenterline, halfwidth: &dyn Fn(f64) -> f64) -> String {
    let st = plan.grid.stations();
    let (s0, s1) = (st[0], st[st.len() - 1]);
    let edge = |sign: f64| -> Vec<[f64; 2]> {
        let n = 200;
        (0..=n)
            .filter_map(|i| {
                let s = s0 + (s1 - s0) * i as f64 / n as f64;
                cl.frenet_to_global(s, sign * halfwidth(s)).ok()
            })
            .collect()
    };
    let mut series = vec![Series::line(edge(1.0), "gray"), Series::line(edge(-1.0), "gray")];
    let center: Vec<[f64; 2]> = (0..=200)
        .filter_map(|i| cl.frenet_to_global(s0 + (s1 - s0) * i as f64 / 200.0, 0.0).ok())
        .collect();
    series.push(Series::dashed(center, "lightgray"));
    for env in &plan.envelopes {
        let poly: Vec<[f64; 2]> =
            env.corners().iter().filter_map(|c| cl.frenet_to_global(c[0].clamp(cl.s_min(), cl.s_max()), c[1]).ok()).collect();
        series.push(Series::polygon(poly, "firebrick"));
    }
    series.push(Series::line(plan.positions.clone(), "navy"));
    let p = &plan.params;
    let every = (plan.states.len() / 25).max(1);
    for (j, pos) in plan.positions.iter().enumerate().step_by(every) {
        let (sin, cos) = plan.headings[j].sin_cos();
        let body = [[p.b, p.w], [-p.a, p.w], [-p.a, -p.w], [p.b, -p.w]];
        let poly = body.iter().map(|&[x, y]| [pos[0] + x * cos - y * sin, pos[1] + x * sin + y * cos]).collect();
        series.push(Series::polygon(poly, "steelblue"));
    }
    svg(&title(plan, "trajectory, global frame"), "x [m]", "y [m]", &series, true)
}

/// Road-aligned plane with corridor bounds.
pub fn lateral_plot(plan: &Plan) -> String {
    let st = plan.grid.stations();
    let mut series = Vec::new();
    if let Some(c) = &plan.corridor {
        let bp = c.breakpoints();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for i in 0..bp.len() - 1 {
            lo.push([bp[i], c.lower()[i]]);
            lo.push([bp[i + 1], c.lower()[i]]);
            hi.push([bp[i], c.upper()[i]]);
            hi.push([bp[i + 1], c.upper()[i]]);
        }
        series.push(Series::dashed(lo, "firebrick"));
        series.push(Series::dashed(hi, "firebrick"));
    }
    series.push(Series::line(st.iter().zip(&plan.states).map(|(&s, z)| [s, z.e_y]).collect(), "navy"));
    svg(&title(plan, "lateral offset"), "s [m]", "e_y [m]", &series, false)
}

/// Steering over traveled distance with the actuator limits.
pub fn steering_plot(plan: &Plan) -> String {
    let eta = &plan.speed.eta;
    let (e0, e1) = (eta[0], eta[eta.len() - 1]);
    let lim = plan.params.delta_max.to_degrees();
    let delta = plan.steering_at_stations();
    let series = [
        Series::dashed(vec![[e0, lim], [e1, lim]], "firebrick"),
        Series::dashed(vec![[e0, -lim], [e1, -lim]], "firebrick"),
        Series::line(eta.iter().zip(&delta).map(|(&e, d)| [e, d.to_degrees()]).collect(), "navy"),
    ];
    svg(&title(plan, "steering"), "eta [m]", "delta [deg]", &series, false)
}

pub fn speed_plot(plan: &Plan) -> String {
    let series = [Series::line(
        plan.speed.eta.iter().zip(&plan.speed.v_max).map(|(&e, v)| [e, v * 3.6]).collect(),
        "navy",
    )];
    svg(&title(plan, "friction speed bound"), "eta [m]", "v max [km/h]", &series, false)
}
