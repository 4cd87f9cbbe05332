//! Sequential linear programming loop.

use log::{debug, info};
use thiserror::Error;

use crate::assembly::{add_parallel_overtake, assemble, AssemblyError, AssemblySettings, BoundaryPoses, LpIterate};
use crate::footprint::{corner_positions, linearized_block};
use crate::lp::LinearProgram;
use crate::frenet::{Corridor, ObstacleEnvelope, RoadCenterline};
use crate::simplex::{solve, BasisHint, LpStatus, SolverError, SolverOptions};
use crate::vehicle::{linearize_discretize, simulate_nonlinear, Grid, ModelError, SpatialState, VehicleParams, SINGULAR_HEADING};

#[derive(Debug, Clone, PartialEq)]
pub struct SlpSettings {
    pub max_iterations: usize,
    pub assembly: AssemblySettings,
    pub parallel_overtake: bool,
    pub footprint: bool,
    pub warm_start: bool,
    /// Also solve every LP cold to record the pivot count a warm start saves.
    pub compare_cold_start: bool,
    /// Keep the LP of the last iteration in the outcome.
    pub keep_last_lp: bool,
    pub collision_tol: f64,
    pub jagged_alternations: usize,
    pub jagged_threshold: f64,
    pub solver: SolverOptions,
}

impl Default for SlpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            assembly: AssemblySettings::default(),
            parallel_overtake: false,
            footprint: true,
            warm_start: true,
            compare_cold_start: false,
            keep_last_lp: false,
            collision_tol: 0.01,
            jagged_alternations: 3,
            jagged_threshold: 0.5f64.to_radians(),
            solver: SolverOptions::default(),
        }
    }
}

/// Everything that stays fixed across iterations.
#[derive(Debug, Clone, Copy)]
pub struct SlpProblem<'a> {
    pub centerline: &'a RoadCenterline,
    pub grid: &'a Grid,
    pub corridor: &'a Corridor,
    /// Envelopes as seen by the constraints (already inflated when required).
    pub envelopes: &'a [ObstacleEnvelope],
    pub params: &'a VehicleParams,
    pub poses: BoundaryPoses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub states: Vec<SpatialState>,
    pub inputs: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SlpError {
    #[error("no collision-free piecewise-affine initial path")]
    Initialization,
    #[error("iteration {iteration}: {source}")]
    Model { iteration: usize, source: ModelError },
    #[error("iteration {iteration}: {source}")]
    Assembly { iteration: usize, source: AssemblyError },
    #[error("iteration {iteration}: {source}")]
    Solver { iteration: usize, source: SolverError },
    #[error("iteration {iteration}: LP reported {status:?}")]
    LpStatus { iteration: usize, status: LpStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    CollisionRetryExhausted,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub collision_free: bool,
    pub smooth: bool,
    /// Deepest intrusion into a bound or obstacle, in meters (0 when clear).
    pub violation: f64,
    pub reasons: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.collision_free && self.smooth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub objective: f64,
    pub max_slack: f64,
    pub pivots: usize,
    pub phase_two_pivots: usize,
    pub cold_pivots: Option<usize>,
    pub warm_started: bool,
    pub lp_rows: usize,
    pub lp_vars: usize,
    /// Largest lateral gap between the LP states and a nonlinear simulation of its inputs.
    pub simulation_defect: f64,
    pub check: CheckOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlpOutcome {
    pub iterate: LpIterate,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: TerminationReason,
    pub records: Vec<IterationRecord>,
    pub last_lp: Option<LinearProgram>,
}

/// Lateral clearance and longitudinal reach used when placing the initial path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    pub lateral: f64,
    pub rear: f64,
    pub front: f64,
}

impl Clearance {
    pub fn for_vehicle(params: &VehicleParams, footprint: bool) -> Self {
        if footprint {
            Self { lateral: params.w, rear: params.a, front: params.b }
        } else {
            Self { lateral: 0.0, rear: 0.0, front: 0.0 }
        }
    }
}

/// Least-heading-varying piecewise-affine path through obstacle corner offsets.
///
/// Candidates sit at the near corners of each envelope, grown by the clearance,
/// on the passing side. A dynamic program over candidates ordered by `s`
/// minimizes the largest segment heading among paths that keep the clearance
/// to the corridor.
pub fn init_reference(
    corridor: &Corridor,
    envelopes: &[ObstacleEnvelope],
    poses: &BoundaryPoses,
    grid: &Grid,
    clearance: Clearance,
) -> Result<ReferenceTrajectory, SlpError> {
    let path = reference_waypoints(corridor, envelopes, poses, grid, clearance)?;
    let st = grid.stations();
    let mut states = Vec::with_capacity(st.len());
    let mut seg = 0;
    for &s in st {
        while seg + 2 < path.len() && s >= path[seg + 1][0] {
            seg += 1;
        }
        let (p, q) = (path[seg], path[seg + 1]);
        let slope = (q[1] - p[1]) / (q[0] - p[0]);
        let e_y = p[1] + slope * (s - p[0]);
        let e_psi = slope.atan().clamp(-SINGULAR_HEADING, SINGULAR_HEADING);
        states.push(SpatialState::new(e_psi, e_y));
    }
    Ok(ReferenceTrajectory { states, inputs: vec![0.0; grid.intervals()] })
}

/// Waypoints `(s, e_y)` of the initial path, strictly increasing in `s`.
pub fn reference_waypoints(
    corridor: &Corridor,
    envelopes: &[ObstacleEnvelope],
    poses: &BoundaryPoses,
    grid: &Grid,
    clearance: Clearance,
) -> Result<Vec<[f64; 2]>, SlpError> {
    let st = grid.stations();
    let (s0, s_n) = (st[0], st[st.len() - 1]);
    let mut nodes = vec![[s0, poses.start.e_y]];
    for cand in corner_candidates(corridor, envelopes, clearance) {
        if cand[0] > s0 && cand[0] < s_n {
            nodes.push(cand);
        }
    }
    nodes.push([s_n, poses.end.e_y]);
    nodes[1..].sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));

    let k = nodes.len();
    let mut cost = vec![f64::INFINITY; k];
    let mut prev = vec![usize::MAX; k];
    cost[0] = 0.0;
    for t in 1..k {
        for i in 0..t {
            if !cost[i].is_finite() || nodes[t][0] <= nodes[i][0] + 1e-9 {
                continue;
            }
            if !segment_clear(nodes[i], nodes[t], corridor, clearance) {
                continue;
            }
            let heading = ((nodes[t][1] - nodes[i][1]) / (nodes[t][0] - nodes[i][0])).atan().abs();
            let c = cost[i].max(heading);
            if c < cost[t] - 1e-12 {
                cost[t] = c;
                prev[t] = i;
            }
        }
    }
    if !cost[k - 1].is_finite() {
        return Err(SlpError::Initialization);
    }
    let mut path = vec![nodes[k - 1]];
    let mut t = k - 1;
    while t != 0 {
        t = prev[t];
        path.push(nodes[t]);
    }
    path.reverse();
    debug!("initial path through {} waypoints, peak heading {:.4}", path.len(), cost[k - 1]);
    Ok(path)
}

/// Near corners of every envelope grown by the clearance, clipped into the corridor.
pub fn corner_candidates(corridor: &Corridor, envelopes: &[ObstacleEnvelope], c: Clearance) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for env in envelopes {
        let e = match env.side {
            crate::frenet::PassSide::Left => env.e_y_high + c.lateral,
            crate::frenet::PassSide::Right => env.e_y_low - c.lateral,
        };
        for s in [env.s_begin - c.front, env.s_end + c.rear] {
            let (lo, hi) = corridor.bounds_at(s.clamp(corridor_start(corridor), corridor_end(corridor)));
            let e = e.clamp(lo + c.lateral, (hi - c.lateral).max(lo + c.lateral));
            out.push([s, e]);
        }
    }
    out
}

fn corridor_start(c: &Corridor) -> f64 {
    c.breakpoints()[0]
}

fn corridor_end(c: &Corridor) -> f64 {
    c.breakpoints()[c.breakpoints().len() - 1]
}

/// Tightest corridor bounds over the stretch a vehicle centered at `s` occupies.
fn swept_bounds(corridor: &Corridor, s: f64, c: Clearance) -> (f64, f64) {
    let bp = corridor.breakpoints();
    let (from, to) = (s - c.rear, s + c.front);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..bp.len() - 1 {
        let overlaps = if c.rear + c.front > 0.0 { bp[i] < to && bp[i + 1] > from } else { bp[i] <= s && s <= bp[i + 1] };
        if overlaps {
            lo = lo.max(corridor.lower()[i]);
            hi = hi.min(corridor.upper()[i]);
        }
    }
    if lo == f64::NEG_INFINITY {
        return corridor.bounds_at(s.clamp(bp[0], bp[bp.len() - 1]));
    }
    (lo, hi)
}

fn segment_clear(p: [f64; 2], q: [f64; 2], corridor: &Corridor, c: Clearance) -> bool {
    let mut cuts = vec![p[0], q[0]];
    for &b in corridor.breakpoints() {
        for x in [b - c.front, b + c.rear, b] {
            if x > p[0] && x < q[0] {
                cuts.push(x);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let slope = (q[1] - p[1]) / (q[0] - p[0]);
    let at = |s: f64| p[1] + slope * (s - p[0]);
    let tol = 1e-6;
    cuts.windows(2).all(|w| {
        let (lo, hi) = swept_bounds(corridor, 0.5 * (w[0] + w[1]), c);
        [w[0], w[1]].iter().all(|&s| {
            let e = at(s);
            e >= lo + c.lateral - tol && e <= hi - c.lateral + tol
        })
    })
}

/// Collision and smoothness test of a candidate plan.
///
/// With the footprint enabled the four corners are checked against the corridor
/// and the envelopes, and envelope corners against the vehicle rectangle;
/// otherwise only the reference point is checked.
pub fn termination_check(
    states: &[SpatialState],
    grid: &Grid,
    corridor: &Corridor,
    envelopes: &[ObstacleEnvelope],
    params: &VehicleParams,
    settings: &SlpSettings,
) -> CheckOutcome {
    let st = grid.stations();
    let tol = settings.collision_tol;
    let (s_lo, s_hi) = (corridor_start(corridor), corridor_end(corridor));
    let mut violation = 0.0f64;
    let mut reasons = Vec::new();
    for (j, z) in states.iter().enumerate() {
        let points: Vec<[f64; 2]> =
            if settings.footprint { corner_positions(st[j], *z, params).to_vec() } else { vec![[st[j], z.e_y]] };
        for (ci, pt) in points.iter().enumerate() {
            if pt[0] >= s_lo && pt[0] <= s_hi {
                let (lo, hi) = corridor.bounds_at(pt[0]);
                let depth = (lo - pt[1]).max(pt[1] - hi);
                if depth > tol {
                    reasons.push(format!("station {j} point {ci} leaves the corridor by {depth:.3} m"));
                }
                violation = violation.max(depth);
            }
            for (l, env) in envelopes.iter().enumerate() {
                if env.contains(pt[0], pt[1], tol) {
                    let depth = (pt[0] - env.s_begin)
                        .min(env.s_end - pt[0])
                        .min(pt[1] - env.e_y_low)
                        .min(env.e_y_high - pt[1]);
                    reasons.push(format!("station {j} point {ci} inside obstacle {l}"));
                    violation = violation.max(depth);
                }
            }
        }
        if settings.footprint {
            let (sin, cos) = z.e_psi.sin_cos();
            for (l, env) in envelopes.iter().enumerate() {
                for [cs, ce] in env.corners() {
                    let (ds, de) = (cs - st[j], ce - z.e_y);
                    let x = ds * cos + de * sin;
                    let y = -ds * sin + de * cos;
                    let depth = (x + params.a).min(params.b - x).min(params.w - y.abs());
                    if depth > tol {
                        reasons.push(format!("obstacle {l} corner inside the vehicle at station {j}"));
                        violation = violation.max(depth);
                    }
                }
            }
        }
    }
    let collision_free = reasons.is_empty();
    let smooth = !is_jagged(states, settings.jagged_alternations, settings.jagged_threshold);
    if !smooth {
        reasons.push("heading profile is jagged".into());
    }
    CheckOutcome { collision_free, smooth, violation: violation.max(0.0), reasons }
}

/// True when the heading increments change sign at least `alternations` times
/// in a row with every increment larger than `threshold`.
pub fn is_jagged(states: &[SpatialState], alternations: usize, threshold: f64) -> bool {
    let diffs: Vec<f64> = states.windows(2).map(|w| w[1].e_psi - w[0].e_psi).collect();
    let mut run = 0;
    for w in diffs.windows(2) {
        if w[0].abs() > threshold && w[1].abs() > threshold && w[0].signum() != w[1].signum() {
            run += 1;
            if run >= alternations {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

pub fn run(problem: &SlpProblem, reference: ReferenceTrajectory, settings: &SlpSettings) -> Result<SlpOutcome, SlpError> {
    let n = problem.grid.intervals();
    let mut reference = reference;
    let mut hint: Option<BasisHint> = None;
    let mut records = Vec::new();
    let mut best: Option<(f64, LpIterate, f64)> = None;
    let mut last_collision_free = true;
    let mut last_lp = None;
    for iteration in 1..=settings.max_iterations.max(1) {
        let stages =
            linearize_discretize(problem.grid, &reference.states, &reference.inputs, problem.centerline, problem.params)
                .map_err(|source| SlpError::Model { iteration, source })?;
        let blocks: Vec<_> = if settings.footprint {
            (1..=n)
                .map(|j| linearized_block(j, reference.states[j], problem.grid, problem.corridor, problem.params))
                .collect()
        } else {
            Vec::new()
        };
        let mut asm = assemble(
            &stages,
            problem.grid,
            problem.corridor,
            &blocks,
            &problem.poses,
            problem.params,
            &settings.assembly,
        )
        .map_err(|source| SlpError::Assembly { iteration, source })?;
        if settings.parallel_overtake {
            add_parallel_overtake(&mut asm, problem.envelopes, problem.grid);
        }
        let warm = if settings.warm_start { hint.as_ref() } else { None };
        let sol = solve(&asm.lp, warm, &settings.solver).map_err(|source| SlpError::Solver { iteration, source })?;
        if sol.status != LpStatus::Optimal {
            return Err(SlpError::LpStatus { iteration, status: sol.status });
        }
        let cold_pivots = if settings.compare_cold_start && warm.is_some() {
            let cold = solve(&asm.lp, None, &settings.solver).map_err(|source| SlpError::Solver { iteration, source })?;
            Some(cold.pivots)
        } else {
            None
        };
        let iterate = asm.map.extract(&sol.x);
        let check = termination_check(
            &iterate.states,
            problem.grid,
            problem.corridor,
            problem.envelopes,
            problem.params,
            settings,
        );
        let simulation_defect = simulate_nonlinear(
            problem.poses.start,
            &iterate.inputs,
            problem.grid,
            problem.centerline,
            problem.params,
        )
        .map(|sim| sim.iter().zip(&iterate.states).map(|(a, b)| (a.e_y - b.e_y).abs()).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
        info!(
            "iteration {iteration}: objective {:.6}, max slack {:.2e}, {} pivots, check {}",
            sol.objective,
            iterate.max_slack(),
            sol.pivots,
            if check.passed() { "passed" } else { "failed" }
        );
        for r in check.reasons.iter().take(5) {
            debug!("  {r}");
        }
        records.push(IterationRecord {
            objective: sol.objective,
            max_slack: iterate.max_slack(),
            pivots: sol.pivots,
            phase_two_pivots: sol.phase_two_pivots,
            cold_pivots,
            warm_started: sol.warm_started,
            lp_rows: asm.lp.equalities.len() + asm.lp.inequalities.len(),
            lp_vars: asm.lp.num_vars(),
            simulation_defect,
            check: check.clone(),
        });
        if settings.keep_last_lp {
            last_lp = Some(asm.lp);
        }
        if check.passed() {
            return Ok(SlpOutcome {
                iterate,
                objective: sol.objective,
                iterations: iteration,
                converged: true,
                reason: TerminationReason::Converged,
                records,
                last_lp,
            });
        }
        last_collision_free = check.collision_free;
        if best.as_ref().map_or(true, |(v, _, _)| check.violation <= *v) {
            best = Some((check.violation, iterate.clone(), sol.objective));
        }
        reference = ReferenceTrajectory { states: iterate.states, inputs: iterate.inputs };
        hint = Some(sol.basis);
    }
    let (_, iterate, objective) = best.expect("at least one iteration");
    Ok(SlpOutcome {
        iterate,
        objective,
        iterations: records.len(),
        converged: false,
        reason: if last_collision_free {
            TerminationReason::IterationCap
        } else {
            TerminationReason::CollisionRetryExhausted
        },
        records,
        last_lp,
    })
}
