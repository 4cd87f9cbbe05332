//! Traveled arc length, path curvature and the friction speed bound.

use crate::frenet::RoadCenterline;
use crate::vehicle::{Grid, ModelError, SpatialState, VehicleParams, SINGULAR_HEADING};

pub const GRAVITY: f64 = 9.81;

/// Curvature magnitude below which a sample counts as straight.
pub const STRAIGHT_CURVATURE: f64 = 1e-6;

/// 130 km/h.
pub const DEFAULT_SPEED_CAP: f64 = 130.0 / 3.6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    pub eta: Vec<f64>,
    pub curvature: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl SpeedProfile {
    /// Smallest bound and its `eta`.
    pub fn minimum(&self) -> (f64, f64) {
        self.v_max
            .iter()
            .zip(&self.eta)
            .fold((f64::INFINITY, 0.0), |best, (&v, &e)| if v < best.0 { (v, e) } else { best })
    }
}

/// Trapezoidal integration of `d eta / ds = (1 - kappa_s e_y) / cos(e_psi)`.
pub fn path_length(states: &[SpatialState], grid: &Grid, centerline: &RoadCenterline) -> Result<Vec<f64>, ModelError> {
    let st = grid.stations();
    if states.len() != st.len() {
        return Err(ModelError::LengthMismatch { states: states.len(), inputs: 0, stations: st.len() });
    }
    let rate = |j: usize| {
        let z = states[j];
        let scale = 1.0 - centerline.curvature_at(st[j]) * z.e_y;
        if z.e_psi.abs() >= SINGULAR_HEADING || scale <= 0.0 {
            Err(ModelError::Singular { station: j, e_psi: z.e_psi, scale })
        } else {
            Ok(scale / z.e_psi.cos())
        }
    };
    let mut eta = Vec::with_capacity(st.len());
    eta.push(0.0);
    let mut prev = rate(0)?;
    for j in 1..st.len() {
        let r = rate(j)?;
        eta.push(eta[j - 1] + 0.5 * (prev + r) * (st[j] - st[j - 1]));
        prev = r;
    }
    Ok(eta)
}

/// `kappa = tan(delta) / l`.
pub fn curvature_from_steering(inputs: &[f64], params: &VehicleParams) -> Vec<f64> {
    inputs.iter().map(|d| d.tan() / params.l).collect()
}

/// `min(v_cap, sqrt(mu g / |kappa|))`.
pub fn v_max_fric(curvature: &[f64], mu: f64, v_cap: f64) -> Vec<f64> {
    curvature
        .iter()
        .map(|k| if k.abs() < STRAIGHT_CURVATURE { v_cap } else { (mu * GRAVITY / k.abs()).sqrt().min(v_cap) })
        .collect()
}

/// Profile on the full grid; the last station reuses the last input.
pub fn profile(
    states: &[SpatialState],
    inputs: &[f64],
    grid: &Grid,
    centerline: &RoadCenterline,
    params: &VehicleParams,
    v_cap: f64,
) -> Result<SpeedProfile, ModelError> {
    let eta = path_length(states, grid, centerline)?;
    let mut curvature = curvature_from_steering(inputs, params);
    if let Some(&last) = curvature.last() {
        curvature.push(last);
    }
    let v_max = v_max_fric(&curvature, params.mu, v_cap);
    Ok(SpeedProfile { eta, curvature, v_max })
}
