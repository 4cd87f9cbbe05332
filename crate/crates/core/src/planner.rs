//! Runs a scenario with one of the planning methods and packages the result.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use thiserror::Error;

use crate::assembly::{AssemblySettings, BoundaryPoses};
use crate::clothoid::{cpp_waypoints, map_to_road, plan_cpp, CppError};
use crate::frenet::{corridor_bounds, map_obstacles, Corridor, FrenetError, ObstacleEnvelope, RoadCenterline};
use crate::lp::LinearProgram;
use crate::scenario::{Scenario, ScenarioError};
use crate::slp::{self, init_reference, Clearance, IterationRecord, SlpError, SlpProblem, SlpSettings, TerminationReason};
use crate::speed::{self, SpeedProfile};
use crate::vehicle::{Grid, ModelError, SpatialState, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Sequential linear programming.
    Slp,
    /// Sequential linear programming with parallel-overtake heading rows.
    Slpp,
    /// Clothoid path planning baseline.
    Cpp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Slp => "slp",
            Method::Slpp => "slpp",
            Method::Cpp => "cpp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "slp" => Ok(Method::Slp),
            "slpp" => Ok(Method::Slpp),
            "cpp" => Ok(Method::Cpp),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Command-line style overrides of the scenario settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOptions {
    pub iterations: Option<usize>,
    pub grid: Option<usize>,
    pub disable_footprint: bool,
    pub compare_cold_start: bool,
    pub keep_last_lp: bool,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Slp(#[from] SlpError),
    #[error(transparent)]
    Cpp(#[from] CppError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slacks {
    pub corridor: f64,
    pub end_heading: f64,
    pub end_lateral: f64,
}

impl Slacks {
    pub fn max(&self) -> f64 {
        self.corridor.max(self.end_heading).max(self.end_lateral)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub method: Method,
    pub params: VehicleParams,
    pub grid: Grid,
    pub states: Vec<SpatialState>,
    /// Steering per grid interval.
    pub inputs: Vec<f64>,
    /// Global position and heading per station.
    pub positions: Vec<[f64; 2]>,
    pub headings: Vec<f64>,
    pub speed: SpeedProfile,
    pub slacks: Slacks,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Option<TerminationReason>,
    pub records: Vec<IterationRecord>,
    pub sample_time: f64,
    /// Corridor the plan was built against, when one exists.
    pub corridor: Option<Corridor>,
    /// Obstacle envelopes as used by the method (inflated where applicable).
    pub envelopes: Vec<ObstacleEnvelope>,
    pub cpp_waypoints: Vec<[f64; 2]>,
    pub cpp_merged_waypoints: usize,
    pub last_lp: Option<LinearProgram>,
}

impl Plan {
    pub fn max_abs_steering(&self) -> f64 {
        self.inputs.iter().fold(0.0, |m, u| m.max(u.abs()))
    }

    /// Largest change between consecutive commands, starting from `delta_prev`.
    pub fn max_steering_step(&self, delta_prev: f64) -> f64 {
        let mut prev = delta_prev;
        let mut worst = 0.0f64;
        for &u in &self.inputs {
            worst = worst.max((u - prev).abs());
            prev = u;
        }
        worst
    }

    /// Steering value reported at every station (the last one repeats the last command).
    pub fn steering_at_stations(&self) -> Vec<f64> {
        let mut d = self.inputs.clone();
        if let Some(&last) = d.last() {
            d.push(last);
        }
        d
    }
}

/// Scenario objects shared by all methods.
pub struct Prepared {
    pub centerline: RoadCenterline,
    pub params: VehicleParams,
    pub envelopes: Vec<ObstacleEnvelope>,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared, PlanError> {
    scenario.validate()?;
    let centerline = scenario.centerline()?;
    let envelopes = map_obstacles(&scenario.obstacles, &centerline)?;
    Ok(Prepared { centerline, params: scenario.vehicle_params(), envelopes })
}

pub fn plan(scenario: &Scenario, method: Method, options: &PlanOptions) -> Result<Plan, PlanError> {
    let prep = prepare(scenario)?;
    match method {
        Method::Slp | Method::Slpp => plan_slp(scenario, &prep, method, options),
        Method::Cpp => plan_clothoid(scenario, &prep, options),
    }
}

fn horizon(scenario: &Scenario) -> (f64, f64) {
    (scenario.start.s, scenario.start.s + scenario.horizon)
}

fn plan_slp(scenario: &Scenario, prep: &Prepared, method: Method, options: &PlanOptions) -> Result<Plan, PlanError> {
    let set = &scenario.settings;
    let footprint = set.footprint && !options.disable_footprint;
    let params = prep.params;
    let envelopes: Vec<ObstacleEnvelope> = if footprint {
        prep.envelopes.clone()
    } else {
        prep.envelopes.iter().map(|e| e.inflated(set.safety_margin)).collect()
    };
    let (s0, s1) = horizon(scenario);
    let n = options.grid.unwrap_or(set.grid);
    let grid = Grid::build(s0, scenario.horizon, n, &envelopes)?;
    let min_gap = if footprint { 2.0 * params.w } else { 1e-6 };
    let corridor = corridor_bounds(&envelopes, &scenario.road.halfwidth, s0, s1, min_gap)?;
    let sample_time = scenario.sample_time(grid.mean_step());
    let poses = BoundaryPoses { start: scenario.start_state(), delta_prev: scenario.delta_prev(), end: scenario.end_state() };
    let settings = SlpSettings {
        max_iterations: options.iterations.unwrap_or(set.max_iterations),
        assembly: AssemblySettings {
            smoothing_weight: set.smoothing_weight,
            slack_weight: set.slack_weight,
            sample_time,
            ..AssemblySettings::default()
        },
        parallel_overtake: method == Method::Slpp || set.parallel_overtake,
        footprint,
        compare_cold_start: options.compare_cold_start,
        collision_tol: set.collision_tol,
        jagged_alternations: set.jagged_alternations,
        jagged_threshold: set.jagged_threshold_deg.to_radians(),
        keep_last_lp: options.keep_last_lp,
        ..SlpSettings::default()
    };
    let reference = init_reference(&corridor, &envelopes, &poses, &grid, Clearance::for_vehicle(&params, footprint))?;
    let problem = SlpProblem {
        centerline: &prep.centerline,
        grid: &grid,
        corridor: &corridor,
        envelopes: &envelopes,
        params: &params,
        poses,
    };
    let out = slp::run(&problem, reference, &settings)?;
    if !out.converged {
        warn!("{method} stopped after {} iterations without passing the final check", out.iterations);
    }
    info!("{method}: {} iterations, objective {:.6}", out.iterations, out.objective);
    let it = out.iterate;
    let v_cap = set.v_cap_kmh / 3.6;
    let speed = speed::profile(&it.states, &it.inputs, &grid, &prep.centerline, &params, v_cap)?;
    let (positions, headings) = to_global(&prep.centerline, &grid, &it.states)?;
    Ok(Plan {
        method,
        params,
        states: it.states,
        inputs: it.inputs,
        positions,
        headings,
        speed,
        slacks: Slacks { corridor: it.sigma, end_heading: it.sigma_e_psi_end, end_lateral: it.sigma_e_y_end },
        objective: out.objective,
        iterations: out.iterations,
        converged: out.converged,
        termination: Some(out.reason),
        records: out.records,
        sample_time,
        corridor: Some(corridor),
        envelopes,
        cpp_waypoints: Vec::new(),
        cpp_merged_waypoints: 0,
        last_lp: out.last_lp,
        grid,
    })
}

fn plan_clothoid(scenario: &Scenario, prep: &Prepared, options: &PlanOptions) -> Result<Plan, PlanError> {
    let set = &scenario.settings;
    let params = prep.params;
    let envelopes: Vec<ObstacleEnvelope> = prep.envelopes.iter().map(|e| e.inflated(set.safety_margin)).collect();
    let (s0, s1) = horizon(scenario);
    let n = options.grid.unwrap_or(set.grid);
    let grid = Grid::build(s0, scenario.horizon, n, &envelopes)?;
    let waypoints = cpp_waypoints(&envelopes, [s0, scenario.start.e_y], [s1, scenario.end.e_y]);
    let path = plan_cpp(&waypoints.points, None)?;
    let road = map_to_road(&path, &grid, &prep.centerline, &params, 0.01);
    let inputs = road.steering[..grid.intervals()].to_vec();
    let v_max = speed::v_max_fric(&road.curvature, params.mu, set.v_cap_kmh / 3.6);
    let speed = SpeedProfile { eta: road.eta, curvature: road.curvature, v_max };
    let (positions, headings) = to_global(&prep.centerline, &grid, &road.states)?;
    let corridor = corridor_bounds(&envelopes, &scenario.road.halfwidth, s0, s1, 0.0).ok();
    Ok(Plan {
        method: Method::Cpp,
        params,
        states: road.states,
        inputs,
        positions,
        headings,
        speed,
        slacks: Slacks::default(),
        objective: f64::NAN,
        iterations: 0,
        converged: true,
        termination: None,
        records: Vec::new(),
        sample_time: scenario.sample_time(grid.mean_step()),
        corridor,
        envelopes,
        cpp_waypoints: waypoints.points,
        cpp_merged_waypoints: waypoints.merged,
        last_lp: None,
        grid,
    })
}

fn to_global(
    cl: &RoadCenterline,
    grid: &Grid,
    states: &[SpatialState],
) -> Result<(Vec<[f64; 2]>, Vec<f64>), FrenetError> {
    let mut pos = Vec::with_capacity(states.len());
    let mut head = Vec::with_capacity(states.len());
    for (&s, z) in grid.stations().iter().zip(states) {
        pos.push(cl.frenet_to_global(s, z.e_y)?);
        head.push(cl.heading_at(s) + z.e_psi);
    }
    Ok((pos, head))
}
