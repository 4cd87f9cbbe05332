//! Scenario files.
//!
//! TOML with angles in degrees so that values written by [`Scenario::save`]
//! read back unchanged. Example:
//!
//! ```toml
//! name = "straight"
//! horizon = 80.0
//!
//! [road]
//! centerline = [[0.0, 0.0], [100.0, 0.0]]
//! halfwidth = 3.5            # or [[s_from, half_width], ...]
//!
//! [vehicle]
//! a = 1.2
//! b = 1.6
//! w = 0.9
//! l = 2.8
//! delta_max_deg = 35.0
//! delta_rate_max_deg = 25.0
//! mu = 0.8
//!
//! [start]
//! s = 0.0
//! e_psi_deg = 0.0
//! e_y = 0.0
//!
//! [end]
//! e_psi_deg = 0.0
//! e_y = 0.0
//!
//! [[obstacles]]
//! vertices = [[30.0, -1.0], [34.0, -1.0], [34.0, 1.0], [30.0, 1.0]]
//! side = "left"
//!
//! [settings]
//! grid = 200
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frenet::{Obstacle, RoadCenterline, RoadWidth};
use crate::speed::DEFAULT_SPEED_CAP;
use crate::vehicle::{SpatialState, VehicleParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Length of the planning horizon along the centerline, meters.
    pub horizon: f64,
    pub road: RoadSpec,
    pub vehicle: VehicleSpec,
    pub start: StartSpec,
    pub end: EndSpec,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSpec {
    pub centerline: Vec<[f64; 2]>,
    pub halfwidth: RoadWidth,
    #[serde(default = "default_resample_step")]
    pub resample_step: f64,
}

fn default_resample_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub l: f64,
    pub delta_max_deg: f64,
    pub delta_rate_max_deg: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub s: f64,
    pub e_psi_deg: f64,
    pub e_y: f64,
    #[serde(default)]
    pub delta_prev_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndSpec {
    pub e_psi_deg: f64,
    pub e_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Number of grid intervals before obstacle corners are inserted.
    pub grid: usize,
    pub max_iterations: usize,
    pub smoothing_weight: f64,
    pub slack_weight: f64,
    /// Seconds; derived from the mean grid step and `reference_speed` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_time: Option<f64>,
    pub reference_speed: f64,
    pub parallel_overtake: bool,
    pub footprint: bool,
    /// Obstacle inflation for the clothoid baseline and for point-mass planning.
    pub safety_margin: f64,
    pub collision_tol: f64,
    pub jagged_alternations: usize,
    pub jagged_threshold_deg: f64,
    pub v_cap_kmh: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            grid: 200,
            max_iterations: 5,
            smoothing_weight: 1.0,
            slack_weight: 1e4,
            sample_time: None,
            reference_speed: 10.0,
            parallel_overtake: false,
            footprint: true,
            safety_margin: 0.0,
            collision_tol: 0.01,
            jagged_alternations: 3,
            jagged_threshold_deg: 0.5,
            v_cap_kmh: DEFAULT_SPEED_CAP * 3.6,
        }
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        let v = &self.vehicle;
        VehicleParams {
            a: v.a,
            b: v.b,
            w: v.w,
            l: v.l,
            delta_max: v.delta_max_deg.to_radians(),
            delta_rate_max: v.delta_rate_max_deg.to_radians(),
            mu: v.mu,
        }
    }

    pub fn start_state(&self) -> SpatialState {
        SpatialState::new(self.start.e_psi_deg.to_radians(), self.start.e_y)
    }

    pub fn end_state(&self) -> SpatialState {
        SpatialState::new(self.end.e_psi_deg.to_radians(), self.end.e_y)
    }

    pub fn delta_prev(&self) -> f64 {
        self.start.delta_prev_deg.to_radians()
    }

    pub fn centerline(&self) -> Result<RoadCenterline, ScenarioError> {
        RoadCenterline::from_waypoints(&self.road.centerline, self.road.resample_step)
            .map_err(|e| invalid("road.centerline", e.to_string()))
    }

    /// Rate-constraint time step for a grid with the given mean spacing.
    pub fn sample_time(&self, mean_step: f64) -> f64 {
        self.settings.sample_time.unwrap_or(mean_step / self.settings.reference_speed)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let cl = self.centerline()?;
        if !self.road.halfwidth.is_valid() {
            return Err(invalid("road.halfwidth", "half-widths must be positive and the table sorted by s"));
        }
        let v = &self.vehicle;
        for (field, value) in [("vehicle.a", v.a), ("vehicle.b", v.b), ("vehicle.w", v.w), ("vehicle.l", v.l)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(field, format!("must be positive, got {value}")));
            }
        }
        if !(v.delta_max_deg > 0.0 && v.delta_max_deg < 90.0) {
            return Err(invalid("vehicle.delta_max_deg", "must lie in (0, 90)"));
        }
        if !(v.delta_rate_max_deg > 0.0) || !v.delta_rate_max_deg.is_finite() {
            return Err(invalid("vehicle.delta_rate_max_deg", "must be positive"));
        }
        if !(v.mu > 0.0 && v.mu <= 1.5) {
            return Err(invalid("vehicle.mu", "must lie in (0, 1.5]"));
        }
        if !(self.start.e_psi_deg.abs() < 90.0) {
            return Err(invalid("start.e_psi_deg", "forward motion requires |e_psi| < 90 degrees"));
        }
        if !(self.end.e_psi_deg.abs() < 90.0) {
            return Err(invalid("end.e_psi_deg", "forward motion requires |e_psi| < 90 degrees"));
        }
        if self.start.delta_prev_deg.abs() > v.delta_max_deg {
            return Err(invalid("start.delta_prev_deg", "exceeds the steering limit"));
        }
        if !cl.contains(self.start.s) {
            return Err(invalid("start.s", format!("outside the centerline range [0, {:.3}]", cl.length())));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.start.s + self.horizon > cl.s_max() + 1e-9 {
            return Err(invalid("horizon", "extends past the end of the centerline"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.vertices.len() < 3 {
                return Err(invalid("obstacles", format!("obstacle {i} needs at least 3 vertices")));
            }
        }
        let s = &self.settings;
        if s.grid < 2 {
            return Err(invalid("settings.grid", "need at least 2 intervals"));
        }
        if s.max_iterations < 1 {
            return Err(invalid("settings.max_iterations", "must be at least 1"));
        }
        if !(s.smoothing_weight >= 0.0) {
            return Err(invalid("settings.smoothing_weight", "must be nonnegative"));
        }
        if !(s.slack_weight > 0.0) {
            return Err(invalid("settings.slack_weight", "must be positive"));
        }
        if let Some(ts) = s.sample_time {
            if !(ts > 0.0) {
                return Err(invalid("settings.sample_time", "must be positive"));
            }
        }
        if !(s.reference_speed > 0.0) {
            return Err(invalid("settings.reference_speed", "must be positive"));
        }
        if !(s.safety_margin >= 0.0) || !(s.collision_tol >= 0.0) {
            return Err(invalid("settings.safety_margin", "margins must be nonnegative"));
        }
        if !(s.v_cap_kmh > 0.0) {
            return Err(invalid("settings.v_cap_kmh", "must be positive"));
        }
        Ok(())
    }
}
