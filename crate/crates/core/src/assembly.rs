//! Sparse LP for one SLP iteration.
//!
//! States, inputs and the two epigraph variables stay explicit and are tied
//! together by the discretized dynamics as equality rows. Corridor, footprint
//! and terminal rows are softened by nonnegative slacks with a large weight.

use thiserror::Error;

use crate::footprint::FootprintConstraintBlock;
use crate::frenet::{Corridor, ObstacleEnvelope};
use crate::lp::{LinearProgram, RowKind, RowLabel};
use crate::vehicle::{Grid, LinearizedStage, SpatialState, VehicleParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblySettings {
    /// Weight of the peak input-difference term.
    pub smoothing_weight: f64,
    /// Weight of every slack variable.
    pub slack_weight: f64,
    /// Time step converting the steering-rate limit into a per-station bound.
    pub sample_time: f64,
    /// Drop footprint rows that can never bind because other rows of the same
    /// station and side dominate them for every heading.
    pub prune_footprint: bool,
}

impl Default for AssemblySettings {
    fn default() -> Self {
        Self { smoothing_weight: 1.0, slack_weight: 1e4, sample_time: 0.1, prune_footprint: true }
    }
}

/// Boundary conditions of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoses {
    pub start: SpatialState,
    /// Steering command applied before the horizon.
    pub delta_prev: f64,
    pub end: SpatialState,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("expected {expected} stages for the grid, got {got}")]
    StageCount { expected: usize, got: usize },
    #[error("footprint block for station {0} is outside 1..=N")]
    BlockStation(usize),
    #[error("previous steering command exceeds the steering limit")]
    PreviousInput,
}

/// Column of every named variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableMap {
    pub e_psi: Vec<usize>,
    pub e_y: Vec<usize>,
    pub u: Vec<usize>,
    pub t_u: usize,
    pub t_du: usize,
    pub sigma: usize,
    pub sigma_e_psi_end: usize,
    pub sigma_e_y_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledLp {
    pub lp: LinearProgram,
    pub map: VariableMap,
}

/// Values of the mapped variables in a primal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LpIterate {
    pub states: Vec<SpatialState>,
    pub inputs: Vec<f64>,
    pub t_u: f64,
    pub t_du: f64,
    pub sigma: f64,
    pub sigma_e_psi_end: f64,
    pub sigma_e_y_end: f64,
}

impl LpIterate {
    pub fn max_slack(&self) -> f64 {
        self.sigma.max(self.sigma_e_psi_end).max(self.sigma_e_y_end)
    }
}

impl VariableMap {
    pub fn extract(&self, x: &[f64]) -> LpIterate {
        LpIterate {
            states: self.e_psi.iter().zip(&self.e_y).map(|(&p, &y)| SpatialState::new(x[p], x[y])).collect(),
            inputs: self.u.iter().map(|&j| x[j]).collect(),
            t_u: x[self.t_u],
            t_du: x[self.t_du],
            sigma: x[self.sigma],
            sigma_e_psi_end: x[self.sigma_e_psi_end],
            sigma_e_y_end: x[self.sigma_e_y_end],
        }
    }
}

pub fn assemble(
    stages: &[LinearizedStage],
    grid: &Grid,
    corridor: &Corridor,
    blocks: &[FootprintConstraintBlock],
    poses: &BoundaryPoses,
    params: &VehicleParams,
    settings: &AssemblySettings,
) -> Result<AssembledLp, AssemblyError> {
    let n = grid.intervals();
    if stages.len() != n {
        return Err(AssemblyError::StageCount { expected: n, got: stages.len() });
    }
    if let Some(b) = blocks.iter().find(|b| b.station == 0 || b.station > n) {
        return Err(AssemblyError::BlockStation(b.station));
    }
    if poses.delta_prev.abs() > params.delta_max {
        return Err(AssemblyError::PreviousInput);
    }
    let inf = f64::INFINITY;
    let mut lp = LinearProgram::new();
    let mut e_psi = Vec::with_capacity(n + 1);
    let mut e_y = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let (lo_p, hi_p, lo_y, hi_y) = if j == 0 {
            let z = poses.start;
            (z.e_psi, z.e_psi, z.e_y, z.e_y)
        } else {
            (-inf, inf, -inf, inf)
        };
        e_psi.push(lp.add_var(format!("epsi_{j}"), 0.0, lo_p, hi_p));
        e_y.push(lp.add_var(format!("ey_{j}"), 0.0, lo_y, hi_y));
    }
    let u: Vec<usize> = (0..n).map(|j| lp.add_var(format!("u_{j}"), 0.0, -params.delta_max, params.delta_max)).collect();
    let t_u = lp.add_var("t_u", 1.0, 0.0, inf);
    let t_du = lp.add_var("t_du", settings.smoothing_weight, 0.0, inf);
    let w = settings.slack_weight;
    let sigma = lp.add_var("sigma", w, 0.0, inf);
    let sigma_e_psi_end = lp.add_var("sigma_epsi_N", w, 0.0, inf);
    let sigma_e_y_end = lp.add_var("sigma_ey_N", w, 0.0, inf);
    let z = |j: usize| [e_psi[j], e_y[j]];

    for (j, st) in stages.iter().enumerate() {
        for r in 0..2 {
            let next = z(j + 1)[r];
            let mut coeffs = vec![(next, 1.0)];
            for c in 0..2 {
                if st.a[r][c] != 0.0 {
                    coeffs.push((z(j)[c], -st.a[r][c]));
                }
            }
            if st.b[r] != 0.0 {
                coeffs.push((u[j], -st.b[r]));
            }
            lp.add_eq(coeffs, st.g[r], RowLabel::new(RowKind::Dynamics, j, r));
        }
    }

    let end = poses.end;
    lp.add_le(vec![(e_psi[n], 1.0), (sigma_e_psi_end, -1.0)], end.e_psi, RowLabel::new(RowKind::TerminalHeading, 0, 0));
    lp.add_le(vec![(e_psi[n], -1.0), (sigma_e_psi_end, -1.0)], -end.e_psi, RowLabel::new(RowKind::TerminalHeading, 0, 1));
    lp.add_le(vec![(e_y[n], 1.0), (sigma_e_y_end, -1.0)], end.e_y, RowLabel::new(RowKind::TerminalLateral, 0, 0));
    lp.add_le(vec![(e_y[n], -1.0), (sigma_e_y_end, -1.0)], -end.e_y, RowLabel::new(RowKind::TerminalLateral, 0, 1));

    for j in 1..=n {
        let (lo, hi) = corridor.bounds_at(grid.stations()[j]);
        lp.add_le(vec![(e_y[j], 1.0), (sigma, -1.0)], hi, RowLabel::new(RowKind::CorridorUpper, j, 0));
        lp.add_le(vec![(e_y[j], -1.0), (sigma, -1.0)], -lo, RowLabel::new(RowKind::CorridorLower, j, 0));
    }

    let du_max = params.delta_rate_max * settings.sample_time;
    for j in 0..n {
        // First difference; the first row carries the previous command as a constant.
        let (diff, offset): (Vec<(usize, f64)>, f64) =
            if j == 0 { (vec![(u[0], 1.0)], poses.delta_prev) } else { (vec![(u[j], 1.0), (u[j - 1], -1.0)], 0.0) };
        let neg: Vec<(usize, f64)> = diff.iter().map(|&(k, a)| (k, -a)).collect();
        lp.add_le(diff.clone(), du_max + offset, RowLabel::new(RowKind::RateUpper, j, 0));
        lp.add_le(neg.clone(), du_max - offset, RowLabel::new(RowKind::RateLower, j, 0));
        let mut up = diff;
        up.push((t_du, -1.0));
        let mut down = neg;
        down.push((t_du, -1.0));
        lp.add_le(up, offset, RowLabel::new(RowKind::RatePeak, j, 0));
        lp.add_le(down, -offset, RowLabel::new(RowKind::RatePeak, j, 1));
        lp.add_le(vec![(u[j], 1.0), (t_u, -1.0)], 0.0, RowLabel::new(RowKind::InputPeak, j, 0));
        lp.add_le(vec![(u[j], -1.0), (t_u, -1.0)], 0.0, RowLabel::new(RowKind::InputPeak, j, 1));
    }

    for block in blocks {
        let [p, y] = z(block.station);
        let all: Vec<usize> = (0..block.covered.len()).collect();
        // Lower rows read e_y + sigma >= rhs - d * e_psi, upper rows e_y - sigma <= rhs - d * e_psi.
        let (keep_lower, keep_upper) = if settings.prune_footprint {
            let lower: Vec<[f64; 2]> = block.q_lower.iter().zip(&block.rhs_lower).map(|(q, &r)| [-q[0], r]).collect();
            let upper: Vec<[f64; 2]> = block.q_upper.iter().zip(&block.rhs_upper).map(|(q, &r)| [q[0], -r]).collect();
            (upper_envelope(&lower), upper_envelope(&upper))
        } else {
            (all.clone(), all)
        };
        for i in keep_lower {
            let ql = block.q_lower[i];
            lp.add_le(
                vec![(p, -ql[0]), (y, -ql[1]), (sigma, -1.0)],
                -block.rhs_lower[i],
                RowLabel::new(RowKind::FootprintLower, block.station, block.covered[i]),
            );
        }
        for i in keep_upper {
            let qu = block.q_upper[i];
            lp.add_le(
                vec![(p, qu[0]), (y, qu[1]), (sigma, -1.0)],
                block.rhs_upper[i],
                RowLabel::new(RowKind::FootprintUpper, block.station, block.covered[i]),
            );
        }
    }

    let map = VariableMap { e_psi, e_y, u, t_u, t_du, sigma, sigma_e_psi_end, sigma_e_y_end };
    Ok(AssembledLp { lp, map })
}

/// Indices of the lines `slope * x + intercept` that attain `max` over the
/// lines for some real `x`, in increasing slope order. A line that only
/// touches the maximum at a single crossing of two others is dropped.
pub fn upper_envelope(lines: &[[f64; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&i, &j| lines[i][0].total_cmp(&lines[j][0]).then(lines[j][1].total_cmp(&lines[i][1])));
    let tol = 1e-12;
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &k in &order {
        let [a3, b3] = lines[k];
        if let Some(&last) = hull.last() {
            let [a2, b2] = lines[last];
            if (a3 - a2).abs() <= tol * (1.0 + a2.abs()) {
                // Parallel to the previous line and not higher.
                if b3 <= b2 {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let [a1, b1] = lines[hull[hull.len() - 2]];
            let [a2, b2] = lines[hull[hull.len() - 1]];
            // The middle line is never above both neighbours.
            let lhs = (b3 - b1) * (a2 - a1);
            let rhs = (b2 - b1) * (a3 - a1);
            let scale = (b3 - b1).abs().max((b2 - b1).abs()).max(1.0) * (a3 - a1).abs().max(tol);
            if lhs - rhs >= -tol * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    hull
}

/// Stations `j in 1..=N` whose coordinate lies within the envelope's extent.
pub fn parallel_stations(envelope: &ObstacleEnvelope, grid: &Grid) -> Vec<usize> {
    let st = grid.stations();
    (1..st.len()).filter(|&j| envelope.s_begin <= st[j] && st[j] <= envelope.s_end).collect()
}

/// Pins the heading to each obstacle's own heading while alongside it,
/// softened by the terminal heading slack.
pub fn add_parallel_overtake(asm: &mut AssembledLp, envelopes: &[ObstacleEnvelope], grid: &Grid) {
    let sig = asm.map.sigma_e_psi_end;
    for (l, env) in envelopes.iter().enumerate() {
        for j in parallel_stations(env, grid) {
            let p = asm.map.e_psi[j];
            asm.lp.add_le(vec![(p, 1.0), (sig, -1.0)], env.heading, RowLabel::new(RowKind::ParallelUpper, j, l));
            asm.lp.add_le(vec![(p, -1.0), (sig, -1.0)], -env.heading, RowLabel::new(RowKind::ParallelLower, j, l));
        }
    }
}
