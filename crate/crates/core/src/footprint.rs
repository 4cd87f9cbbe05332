//! Rectangular vehicle footprint in the road-aligned frame.
//!
//! Corners are numbered counter-clockwise from the front-left one:
//! `c1` front-left, `c2` rear-left, `c3` rear-right, `c4` front-right.
//! The right side of the vehicle is the line through `c3` and `c4`, the left
//! side the line through `c2` and `c1`; both have slope `tan(e_psi)` in the
//! `(s, e_y)` plane.

use crate::frenet::Corridor;
use crate::vehicle::{Grid, SpatialState, VehicleParams};

/// Per-corner offsets along and across the vehicle axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerOffsets {
    pub longitudinal: [f64; 4],
    pub lateral_s: [f64; 4],
    pub lateral_e_y: [f64; 4],
}

impl CornerOffsets {
    pub fn new(params: &VehicleParams) -> Self {
        let (a, b, w) = (params.a, params.b, params.w);
        Self {
            longitudinal: [b, -a, -a, b],
            lateral_s: [-w, -w, w, w],
            lateral_e_y: [w, w, -w, -w],
        }
    }
}

/// Corner coordinates `(s_c, e_y_c)` for `c1..c4`.
pub fn corner_positions(s: f64, z: SpatialState, params: &VehicleParams) -> [[f64; 2]; 4] {
    let off = CornerOffsets::new(params);
    let (sin, cos) = z.e_psi.sin_cos();
    std::array::from_fn(|i| {
        [
            s + off.longitudinal[i] * cos + off.lateral_s[i] * sin,
            z.e_y + off.longitudinal[i] * sin + off.lateral_e_y[i] * cos,
        ]
    })
}

/// Line `e_y(s) = anchor_e_y + slope * (s - anchor_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLine {
    pub slope: f64,
    pub anchor_s: f64,
    pub anchor_e_y: f64,
}

impl BoundaryLine {
    pub fn at(&self, s: f64) -> f64 {
        self.anchor_e_y + self.slope * (s - self.anchor_s)
    }
}

/// Right (lower) and left (upper) vehicle side lines at station `s_j`.
pub fn boundary_lines(s_j: f64, z: SpatialState, params: &VehicleParams) -> (BoundaryLine, BoundaryLine) {
    let c = corner_positions(s_j, z, params);
    let slope = z.e_psi.tan();
    (
        BoundaryLine { slope, anchor_s: c[2][0], anchor_e_y: c[2][1] },
        BoundaryLine { slope, anchor_s: c[1][0], anchor_e_y: c[1][1] },
    )
}

/// Grid indices whose boundary rows constrain the vehicle placed at station `j`.
///
/// Stations between the rearmost and frontmost corner (at the reference
/// state) are covered, extended by one neighbor on each side.
pub fn coverage_set(j: usize, z_ref: SpatialState, grid: &Grid, params: &VehicleParams) -> Vec<usize> {
    let st = grid.stations();
    let n = grid.intervals();
    let c = corner_positions(st[j], z_ref, params);
    let rear = c[1][0].min(c[2][0]) - 1e-9;
    let front = c[0][0].max(c[3][0]) + 1e-9;
    let first = st.partition_point(|&s| s < rear);
    let last = st.partition_point(|&s| s <= front);
    // `j` always lies in [rear, front] so the inner range is non-empty.
    let lo = first.min(j).saturating_sub(1);
    let hi = (last.max(j + 1)).min(n);
    (lo..=hi).collect()
}

/// Stacked linearized footprint rows for one station:
/// `Q_lower z_j >= q_lower` and `Q_upper z_j <= q_upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintConstraintBlock {
    pub station: usize,
    pub covered: Vec<usize>,
    pub q_lower: Vec<[f64; 2]>,
    pub rhs_lower: Vec<f64>,
    pub q_upper: Vec<[f64; 2]>,
    pub rhs_upper: Vec<f64>,
    /// Constant part of the linearized lines, `lin(s_k) = Q_k z + offset_k`.
    pub offset_lower: Vec<f64>,
    pub offset_upper: Vec<f64>,
}

impl FootprintConstraintBlock {
    pub fn len(&self) -> usize {
        self.covered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covered.is_empty()
    }

    /// Linearized side values at the covered stations.
    pub fn linearized_values(&self, z: SpatialState) -> (Vec<f64>, Vec<f64>) {
        let eval = |q: &[[f64; 2]], h: &[f64]| {
            q.iter().zip(h).map(|(r, h)| r[0] * z.e_psi + r[1] * z.e_y + h).collect()
        };
        (eval(&self.q_lower, &self.offset_lower), eval(&self.q_upper, &self.offset_upper))
    }
}

/// Side lines in closed form, with `d = s - s_j`:
/// `lower = e_y + tan(e_psi) d - w / cos(e_psi)`, `upper = e_y + tan(e_psi) d + w / cos(e_psi)`.
/// Returns values and `e_psi` derivatives `(lower, d_lower, upper, d_upper)`.
fn side_terms(d: f64, z: SpatialState, w: f64) -> (f64, f64, f64, f64) {
    let (sin, cos) = z.e_psi.sin_cos();
    let tan = sin / cos;
    let base = z.e_y + tan * d;
    let sec2 = 1.0 / (cos * cos);
    (base - w / cos, (d - w * sin) * sec2, base + w / cos, (d + w * sin) * sec2)
}

/// First-order expansion of the side lines about `z_ref`, evaluated at every
/// covered station with corridor bounds folded into the right-hand sides.
pub fn linearized_block(
    j: usize,
    z_ref: SpatialState,
    grid: &Grid,
    corridor: &Corridor,
    params: &VehicleParams,
) -> FootprintConstraintBlock {
    let covered = coverage_set(j, z_ref, grid, params);
    let st = grid.stations();
    let mut block = FootprintConstraintBlock {
        station: j,
        covered: covered.clone(),
        q_lower: Vec::with_capacity(covered.len()),
        rhs_lower: Vec::with_capacity(covered.len()),
        q_upper: Vec::with_capacity(covered.len()),
        rhs_upper: Vec::with_capacity(covered.len()),
        offset_lower: Vec::with_capacity(covered.len()),
        offset_upper: Vec::with_capacity(covered.len()),
    };
    for &k in &covered {
        let (lo, d_lo, up, d_up) = side_terms(st[k] - st[j], z_ref, params.w);
        let h_lo = lo - d_lo * z_ref.e_psi - z_ref.e_y;
        let h_up = up - d_up * z_ref.e_psi - z_ref.e_y;
        let (e_min, e_max) = corridor.bounds_at(st[k]);
        block.q_lower.push([d_lo, 1.0]);
        block.offset_lower.push(h_lo);
        block.rhs_lower.push(e_min - h_lo);
        block.q_upper.push([d_up, 1.0]);
        block.offset_upper.push(h_up);
        block.rhs_upper.push(e_max - h_up);
    }
    block
}

/// Nonlinear side values at `s` for the vehicle at station `s_j` in state `z`.
pub fn nonlinear_sides(s: f64, s_j: f64, z: SpatialState, params: &VehicleParams) -> (f64, f64) {
    let (lower, upper) = boundary_lines(s_j, z, params);
    (lower.at(s), upper.at(s))
}
