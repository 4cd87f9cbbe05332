//! Kinematic bicycle dynamics with the centerline arc length as the
//! independent variable.
//!
//! With `u = delta` and `kappa = 1 / rho` the road curvature,
//!
//! ```text
//! e_psi' = (1 - kappa e_y) tan(delta) / (l cos e_psi) - kappa
//! e_y'   = (1 - kappa e_y) tan(e_psi)
//! ```
//!
//! which is regular on straight roads (`kappa = 0`).

use crate::frenet::{ObstacleEnvelope, RoadCenterline};
use thiserror::Error;

/// Heading errors at or beyond this magnitude are treated as singular.
pub const SINGULAR_HEADING: f64 = 89.0 * std::f64::consts::PI / 180.0;

const GRID_DEDUP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("singular state at station {station}: e_psi = {e_psi:.4} rad, 1 - kappa e_y = {scale:.4}")]
    Singular { station: usize, e_psi: f64, scale: f64 },
    #[error("reference length mismatch: {states} states and {inputs} inputs for {stations} stations")]
    LengthMismatch { states: usize, inputs: usize, stations: usize },
    #[error("invalid grid request: horizon {horizon} m with {intervals} intervals")]
    BadGrid { horizon: f64, intervals: usize },
}

/// Vehicle geometry and actuator limits (SI units, radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Center of gravity to rear edge.
    pub a: f64,
    /// Center of gravity to front edge.
    pub b: f64,
    /// Half width.
    pub w: f64,
    /// Wheelbase.
    pub l: f64,
    pub delta_max: f64,
    pub delta_rate_max: f64,
    /// Tire-road friction coefficient.
    pub mu: f64,
}

impl VehicleParams {
    pub fn min_turning_radius(&self) -> f64 {
        self.l / self.delta_max.tan()
    }
}

/// Heading error and lateral offset relative to the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialState {
    pub e_psi: f64,
    pub e_y: f64,
}

impl SpatialState {
    pub fn new(e_psi: f64, e_y: f64) -> Self {
        Self { e_psi, e_y }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.e_psi, self.e_y]
    }
}

pub type Mat2 = [[f64; 2]; 2];

/// Affine stage map `z_{j+1} = A z_j + B u_j + g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedStage {
    pub a: Mat2,
    pub b: [f64; 2],
    pub g: [f64; 2],
    pub station: f64,
    pub step: f64,
}

impl LinearizedStage {
    pub fn propagate(&self, z: [f64; 2], u: f64) -> [f64; 2] {
        [
            self.a[0][0] * z[0] + self.a[0][1] * z[1] + self.b[0] * u + self.g[0],
            self.a[1][0] * z[0] + self.a[1][1] * z[1] + self.b[1] * u + self.g[1],
        ]
    }
}

fn check(z: SpatialState, kappa: f64, station: usize) -> Result<f64, ModelError> {
    let scale = 1.0 - kappa * z.e_y;
    if !(z.e_psi.abs() < SINGULAR_HEADING) || !(scale > 0.0) {
        return Err(ModelError::Singular { station, e_psi: z.e_psi, scale });
    }
    Ok(scale)
}

/// Right-hand side `(e_psi', e_y')` of the spatial dynamics.
pub fn spatial_dynamics(z: SpatialState, u: f64, kappa: f64, params: &VehicleParams) -> Result<[f64; 2], ModelError> {
    let scale = check(z, kappa, 0)?;
    Ok(rhs(z, u, kappa, params.l, scale))
}

#[inline]
fn rhs(z: SpatialState, u: f64, kappa: f64, l: f64, scale: f64) -> [f64; 2] {
    [scale * u.tan() / (l * z.e_psi.cos()) - kappa, scale * z.e_psi.tan()]
}

/// Analytic Jacobians of the spatial dynamics at a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobians {
    /// `df/dz`, rows `(e_psi', e_y')`, columns `(e_psi, e_y)`.
    pub a: Mat2,
    /// `df/du`.
    pub b: [f64; 2],
    /// `f(z_ref, u_ref)`.
    pub residual: [f64; 2],
}

pub fn jacobians(z: SpatialState, u: f64, kappa: f64, params: &VehicleParams) -> Result<Jacobians, ModelError> {
    let scale = check(z, kappa, 0)?;
    let l = params.l;
    let (cos_psi, tan_psi) = (z.e_psi.cos(), z.e_psi.tan());
    let tan_u = u.tan();
    let cos_u = u.cos();
    let a = [
        [
            scale * tan_u * tan_psi / (l * cos_psi),
            -kappa * tan_u / (l * cos_psi),
        ],
        [scale / (cos_psi * cos_psi), -kappa * tan_psi],
    ];
    let b = [scale / (l * cos_psi * cos_u * cos_u), 0.0];
    Ok(Jacobians { a, b, residual: rhs(z, u, kappa, l, scale) })
}

/// Discretization stations `s_0 < s_1 < ... < s_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    stations: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `intervals` steps over `[start, start + horizon]`,
    /// refined with every envelope corner strictly inside the range.
    pub fn build(start: f64, horizon: f64, intervals: usize, envelopes: &[ObstacleEnvelope]) -> Result<Self, ModelError> {
        if !(horizon > 0.0) || intervals < 2 {
            return Err(ModelError::BadGrid { horizon, intervals });
        }
        let end = start + horizon;
        let mut stations: Vec<f64> = (0..=intervals)
            .map(|j| if j == intervals { end } else { start + horizon * j as f64 / intervals as f64 })
            .collect();
        for env in envelopes {
            for s in [env.s_begin, env.s_end] {
                if s > start + GRID_DEDUP && s < end - GRID_DEDUP {
                    stations.push(s);
                }
            }
        }
        stations.sort_by(f64::total_cmp);
        stations.dedup_by(|a, b| (*a - *b).abs() <= GRID_DEDUP);
        Ok(Self { stations })
    }

    pub fn from_stations(stations: Vec<f64>) -> Self {
        assert!(stations.len() >= 2 && stations.windows(2).all(|w| w[0] < w[1]));
        Self { stations }
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.stations.len() - 1
    }

    pub fn step(&self, j: usize) -> f64 {
        self.stations[j + 1] - self.stations[j]
    }

    pub fn mean_step(&self) -> f64 {
        (self.stations[self.intervals()] - self.stations[0]) / self.intervals() as f64
    }
}

/// Forward-Euler discretization of the dynamics linearized about the reference.
/// Road curvature is held at its value at the start of each interval.
pub fn linearize_discretize(
    grid: &Grid,
    states: &[SpatialState],
    inputs: &[f64],
    centerline: &RoadCenterline,
    params: &VehicleParams,
) -> Result<Vec<LinearizedStage>, ModelError> {
    let n = grid.intervals();
    if states.len() != n + 1 || inputs.len() != n {
        return Err(ModelError::LengthMismatch { states: states.len(), inputs: inputs.len(), stations: n + 1 });
    }
    (0..n)
        .map(|j| {
            let s = grid.stations()[j];
            let kappa = centerline.curvature_at(s);
            let jac = jacobians(states[j], inputs[j], kappa, params).map_err(|e| at_station(e, j))?;
            Ok(discretize(&jac, states[j], inputs[j], s, grid.step(j)))
        })
        .collect()
}

fn at_station(err: ModelError, station: usize) -> ModelError {
    match err {
        ModelError::Singular { e_psi, scale, .. } => ModelError::Singular { station, e_psi, scale },
        other => other,
    }
}

pub fn discretize(jac: &Jacobians, z: SpatialState, u: f64, station: f64, step: f64) -> LinearizedStage {
    let zr = z.as_array();
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for r in 0..2 {
        for c in 0..2 {
            a[r][c] = if r == c { 1.0 } else { 0.0 } + step * jac.a[r][c];
        }
        let affine = jac.residual[r] - jac.a[r][0] * zr[0] - jac.a[r][1] * zr[1] - jac.b[r] * u;
        g[r] = step * affine;
    }
    LinearizedStage { a, b: [step * jac.b[0], step * jac.b[1]], g, station, step }
}

/// Substeps per grid interval in [`simulate_nonlinear`].
pub const RK4_SUBSTEPS: usize = 8;

/// Integrates the nonlinear dynamics with fixed-step RK4 and zero-order-hold inputs.
pub fn simulate_nonlinear(
    z0: SpatialState,
    inputs: &[f64],
    grid: &Grid,
    centerline: &RoadCenterline,
    params: &VehicleParams,
) -> Result<Vec<SpatialState>, ModelError> {
    let n = grid.intervals();
    if inputs.len() != n {
        return Err(ModelError::LengthMismatch { states: 1, inputs: inputs.len(), stations: n + 1 });
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(z0);
    let mut z = z0;
    for j in 0..n {
        z = rk4_interval(z, inputs[j], grid.stations()[j], grid.step(j), RK4_SUBSTEPS, centerline, params)
            .map_err(|e| at_station(e, j))?;
        out.push(z);
    }
    Ok(out)
}

pub(crate) fn rk4_interval(
    z0: SpatialState,
    u: f64,
    s0: f64,
    length: f64,
    substeps: usize,
    centerline: &RoadCenterline,
    params: &VehicleParams,
) -> Result<SpatialState, ModelError> {
    let h = length / substeps as f64;
    let f = |s: f64, z: [f64; 2]| {
        spatial_dynamics(SpatialState::new(z[0], z[1]), u, centerline.curvature_at(s), params)
    };
    let mut z = z0.as_array();
    let mut s = s0;
    for _ in 0..substeps {
        let k1 = f(s, z)?;
        let k2 = f(s + h / 2.0, [z[0] + h / 2.0 * k1[0], z[1] + h / 2.0 * k1[1]])?;
        let k3 = f(s + h / 2.0, [z[0] + h / 2.0 * k2[0], z[1] + h / 2.0 * k2[1]])?;
        let k4 = f(s + h, [z[0] + h * k3[0], z[1] + h * k3[1]])?;
        for i in 0..2 {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        s += h;
    }
    Ok(SpatialState::new(z[0], z[1]))
}
