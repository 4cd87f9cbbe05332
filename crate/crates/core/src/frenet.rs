//! Road-aligned coordinates.
//!
//! The centerline is a resampled polyline parameterized by cumulative chord
//! length `s`. Headings come from central differences of the positions and
//! curvature from central differences of the unwrapped heading. Lateral
//! offsets `e_y` are positive to the left of the centerline tangent.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

const STATION_EPS: f64 = 1e-9;
const STRAIGHT_CURVATURE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrenetError {
    #[error("centerline needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("consecutive centerline waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
    #[error("resample step must be positive, got {0}")]
    BadResampleStep(f64),
    #[error("station s = {s} outside centerline range [{min}, {max}]")]
    OutOfRange { s: f64, min: f64, max: f64 },
    #[error("projection of ({x}, {y}) is ambiguous: lateral offset {e_y} exceeds the local curvature radius")]
    ProjectionAmbiguous { x: f64, y: f64, e_y: f64 },
    #[error("point ({x}, {y}) does not project onto the centerline")]
    NoProjection { x: f64, y: f64 },
    #[error("corridor gap {gap:.3} m at s = {s:.3} m is narrower than the required {required:.3} m")]
    InfeasibleCorridor { s: f64, gap: f64, required: f64 },
    #[error("obstacle {0} has fewer than three vertices")]
    DegenerateObstacle(usize),
}

/// Arc-length parameterized road centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadCenterline {
    stations: Vec<f64>,
    positions: Vec<[f64; 2]>,
    headings: Vec<f64>,
    curvatures: Vec<f64>,
}

impl RoadCenterline {
    /// Builds the centerline from waypoints. Every input segment is split into
    /// equal pieces no longer than `resample_step`; the input waypoints are
    /// kept as stations.
    pub fn from_waypoints(waypoints: &[[f64; 2]], resample_step: f64) -> Result<Self, FrenetError> {
        if waypoints.len() < 2 {
            return Err(FrenetError::TooFewWaypoints(waypoints.len()));
        }
        if !(resample_step > 0.0) || !resample_step.is_finite() {
            return Err(FrenetError::BadResampleStep(resample_step));
        }
        let mut positions = vec![waypoints[0]];
        let mut stations = vec![0.0];
        for (k, pair) in waypoints.windows(2).enumerate() {
            let (p, q) = (pair[0], pair[1]);
            let len = dist(p, q);
            if len <= STATION_EPS {
                return Err(FrenetError::DuplicateWaypoint(k, k + 1));
            }
            let pieces = (len / resample_step - 1e-9).ceil().max(1.0) as usize;
            let s0 = *stations.last().unwrap();
            for i in 1..=pieces {
                let t = i as f64 / pieces as f64;
                let pt = if i == pieces {
                    q
                } else {
                    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
                };
                let prev = *positions.last().unwrap();
                stations.push(if i == pieces { s0 + len } else { stations.last().unwrap() + dist(prev, pt) });
                positions.push(pt);
            }
        }

        let n = positions.len();
        let mut headings = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            let raw = (positions[j][1] - positions[i][1]).atan2(positions[j][0] - positions[i][0]);
            let h = match headings.last() {
                Some(&prev) => unwrap_near(raw, prev),
                None => raw,
            };
            headings.push(h);
        }

        let mut curvatures = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            let kappa = (headings[j] - headings[i]) / (stations[j] - stations[i]);
            curvatures.push(if kappa.abs() < STRAIGHT_CURVATURE { 0.0 } else { kappa });
        }

        Ok(Self { stations, positions, headings, curvatures })
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn headings(&self) -> &[f64] {
        &self.headings
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    pub fn s_min(&self) -> f64 {
        self.stations[0]
    }

    pub fn s_max(&self) -> f64 {
        self.length()
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_min() - STATION_EPS && s <= self.s_max() + STATION_EPS
    }

    /// Segment index and interpolation weight for `s`, clamped to the range.
    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.stations.len();
        let k = self.stations.partition_point(|&st| st <= s).clamp(1, n - 1) - 1;
        let span = self.stations[k + 1] - self.stations[k];
        let t = ((s - self.stations[k]) / span).clamp(0.0, 1.0);
        (k, t)
    }

    pub fn position_at(&self, s: f64) -> [f64; 2] {
        let (k, t) = self.locate(s);
        let (p, q) = (self.positions[k], self.positions[k + 1]);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let (k, t) = self.locate(s);
        self.headings[k] + t * (self.headings[k + 1] - self.headings[k])
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        let (k, t) = self.locate(s);
        self.curvatures[k] + t * (self.curvatures[k + 1] - self.curvatures[k])
    }

    /// Maps road-aligned coordinates to the global plane.
    pub fn frenet_to_global(&self, s: f64, e_y: f64) -> Result<[f64; 2], FrenetError> {
        if !self.contains(s) {
            return Err(FrenetError::OutOfRange { s, min: self.s_min(), max: self.s_max() });
        }
        let p = self.position_at(s);
        let psi = self.heading_at(s);
        Ok([p[0] - e_y * psi.sin(), p[1] + e_y * psi.cos()])
    }

    /// Projects a global point onto the centerline, returning `(s, e_y)`.
    ///
    /// The foot point is the root of `(p - c(s)) . t(s)`, so the inverse map
    /// agrees with [`Self::frenet_to_global`] to bisection precision.
    pub fn global_to_frenet(&self, point: [f64; 2]) -> Result<(f64, f64), FrenetError> {
        let n = self.stations.len();
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..n - 1 {
            let d = point_segment_distance(point, self.positions[k], self.positions[k + 1]);
            if d < best.0 - 1e-12 {
                best = (d, k);
            }
        }
        let k = best.1;
        let lo = k.saturating_sub(1);
        let hi = (k + 2).min(n - 1);
        let s = self
            .root_in(point, lo, hi)
            .or_else(|| self.root_in(point, 0, n - 1))
            .ok_or(FrenetError::NoProjection { x: point[0], y: point[1] })?;

        let c = self.position_at(s);
        let psi = self.heading_at(s);
        let e_y = -(point[0] - c[0]) * psi.sin() + (point[1] - c[1]) * psi.cos();
        if e_y * self.curvature_at(s) >= 1.0 {
            return Err(FrenetError::ProjectionAmbiguous { x: point[0], y: point[1], e_y });
        }
        Ok((s, e_y))
    }

    fn tangential_residual(&self, point: [f64; 2], s: f64) -> f64 {
        let c = self.position_at(s);
        let psi = self.heading_at(s);
        (point[0] - c[0]) * psi.cos() + (point[1] - c[1]) * psi.sin()
    }

    /// Root of the tangential residual among stations `lo..=hi`, choosing the
    /// root with the smallest lateral distance when several exist.
    fn root_in(&self, point: [f64; 2], lo: usize, hi: usize) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        let mut g_prev = self.tangential_residual(point, self.stations[lo]);
        if g_prev == 0.0 {
            best = Some((self.stations[lo], dist(point, self.positions[lo])));
        }
        for k in lo..hi {
            let (a, b) = (self.stations[k], self.stations[k + 1]);
            let g_b = self.tangential_residual(point, b);
            if g_prev > 0.0 && g_b <= 0.0 {
                let s = self.bisect(point, a, b, g_prev);
                let d = dist(point, self.position_at(s));
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((s, d));
                }
            }
            g_prev = g_b;
        }
        best.map(|(s, _)| s)
    }

    fn bisect(&self, point: [f64; 2], mut a: f64, mut b: f64, g_a: f64) -> f64 {
        let sign_a = g_a.signum();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let g = self.tangential_residual(point, m);
            if g == 0.0 {
                return m;
            }
            if g.signum() == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (q[0] - p[0]).hypot(q[1] - p[1])
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn unwrap_near(angle: f64, reference: f64) -> f64 {
    let mut a = angle;
    while a - reference > PI {
        a -= 2.0 * PI;
    }
    while a - reference < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Which side of an obstacle the vehicle passes on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassSide {
    Left,
    Right,
}

/// Obstacle polygon in the global plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub vertices: Vec<[f64; 2]>,
    pub side: PassSide,
}

/// Axis-aligned rectangle bounding a transformed obstacle in the `(s, e_y)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleEnvelope {
    pub s_begin: f64,
    pub s_end: f64,
    pub e_y_low: f64,
    pub e_y_high: f64,
    /// Long-axis heading of the transformed obstacle, in `(-pi/2, pi/2]`.
    pub heading: f64,
    pub side: PassSide,
}

impl ObstacleEnvelope {
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            s_begin: self.s_begin - margin,
            s_end: self.s_end + margin,
            e_y_low: self.e_y_low - margin,
            e_y_high: self.e_y_high + margin,
            ..*self
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.s_begin, self.e_y_low],
            [self.s_end, self.e_y_low],
            [self.s_end, self.e_y_high],
            [self.s_begin, self.e_y_high],
        ]
    }

    /// Strict interior test with a tolerance shrinking the rectangle.
    pub fn contains(&self, s: f64, e_y: f64, tol: f64) -> bool {
        s > self.s_begin + tol && s < self.s_end - tol && e_y > self.e_y_low + tol && e_y < self.e_y_high - tol
    }
}

/// Transforms obstacle polygons into `(s, e_y)` envelopes, sorted by `s_begin`.
pub fn map_obstacles(obstacles: &[Obstacle], cl: &RoadCenterline) -> Result<Vec<ObstacleEnvelope>, FrenetError> {
    let mut out = Vec::with_capacity(obstacles.len());
    for (idx, obs) in obstacles.iter().enumerate() {
        if obs.vertices.len() < 3 {
            return Err(FrenetError::DegenerateObstacle(idx));
        }
        let pts = obs
            .vertices
            .iter()
            .map(|&v| cl.global_to_frenet(v))
            .collect::<Result<Vec<_>, _>>()?;
        let (mut s_lo, mut s_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut e_lo, mut e_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(s, e) in &pts {
            s_lo = s_lo.min(s);
            s_hi = s_hi.max(s);
            e_lo = e_lo.min(e);
            e_hi = e_hi.max(e);
        }
        let mut longest = (0.0, 0.0);
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            let (ds, de) = (b.0 - a.0, b.1 - a.1);
            let len = ds.hypot(de);
            if len > longest.0 + 1e-9 {
                longest = (len, fold_half_turn(de.atan2(ds)));
            }
        }
        out.push(ObstacleEnvelope {
            s_begin: s_lo,
            s_end: s_hi,
            e_y_low: e_lo,
            e_y_high: e_hi,
            heading: longest.1,
            side: obs.side,
        });
    }
    out.sort_by(|a, b| a.s_begin.total_cmp(&b.s_begin));
    Ok(out)
}

fn fold_half_turn(angle: f64) -> f64 {
    let mut a = angle;
    while a > FRAC_PI_2 {
        a -= PI;
    }
    while a <= -FRAC_PI_2 {
        a += PI;
    }
    a
}

/// Road half-width, constant or a piecewise-constant table of `(s_from, half_width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoadWidth {
    Constant(f64),
    Table(Vec<[f64; 2]>),
}

impl RoadWidth {
    pub fn half_width_at(&self, s: f64) -> f64 {
        match self {
            RoadWidth::Constant(w) => *w,
            RoadWidth::Table(rows) => {
                let mut w = rows.first().map_or(0.0, |r| r[1]);
                for r in rows {
                    if r[0] <= s {
                        w = r[1];
                    }
                }
                w
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            RoadWidth::Constant(_) => Vec::new(),
            RoadWidth::Table(rows) => rows.iter().map(|r| r[0]).collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            RoadWidth::Constant(w) => *w > 0.0 && w.is_finite(),
            RoadWidth::Table(rows) => {
                !rows.is_empty()
                    && rows.iter().all(|r| r[1] > 0.0 && r[1].is_finite() && r[0].is_finite())
                    && rows.windows(2).all(|w| w[0][0] < w[1][0])
            }
        }
    }
}

/// Piecewise-constant lateral bounds `e_y^min(s) <= e_y <= e_y^max(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    breakpoints: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Corridor {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Bounds at `s`. On a breakpoint both adjacent pieces apply and the
    /// tighter bound wins, so obstacle extents are closed intervals.
    pub fn bounds_at(&self, s: f64) -> (f64, f64) {
        let n = self.lower.len();
        let k = self.breakpoints.partition_point(|&b| b <= s).clamp(1, n) - 1;
        let (mut lo, mut hi) = (self.lower[k], self.upper[k]);
        let near = |i: usize| (self.breakpoints[i] - s).abs() <= STATION_EPS;
        if k > 0 && near(k) {
            lo = lo.max(self.lower[k - 1]);
            hi = hi.min(self.upper[k - 1]);
        }
        if k + 1 < n && near(k + 1) {
            lo = lo.max(self.lower[k + 1]);
            hi = hi.min(self.upper[k + 1]);
        }
        (lo, hi)
    }

    pub fn lower_at(&self, s: f64) -> f64 {
        self.bounds_at(s).0
    }

    pub fn upper_at(&self, s: f64) -> f64 {
        self.bounds_at(s).1
    }

    /// Corridor from explicit pieces; `breakpoints.len() == lower.len() + 1`.
    pub fn from_pieces(breakpoints: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(breakpoints.len(), lower.len() + 1);
        assert_eq!(lower.len(), upper.len());
        Self { breakpoints, lower, upper }
    }
}

/// Builds the traversable corridor over `[s_from, s_to]`.
///
/// Envelopes passed on the left raise the lower bound to their upper edge,
/// envelopes passed on the right lower the upper bound to their lower edge.
/// Every piece must leave at least `min_gap` of lateral room.
pub fn corridor_bounds(
    envelopes: &[ObstacleEnvelope],
    road: &RoadWidth,
    s_from: f64,
    s_to: f64,
    min_gap: f64,
) -> Result<Corridor, FrenetError> {
    let mut cuts = vec![s_from, s_to];
    for env in envelopes {
        cuts.push(env.s_begin);
        cuts.push(env.s_end);
    }
    cuts.extend(road.breakpoints());
    cuts.retain(|&c| c >= s_from && c <= s_to);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= STATION_EPS);

    let mut lower = Vec::with_capacity(cuts.len() - 1);
    let mut upper = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let hw = road.half_width_at(mid);
        let (mut lo, mut hi) = (-hw, hw);
        for env in envelopes.iter().filter(|e| e.s_begin < mid && mid < e.s_end) {
            match env.side {
                PassSide::Left => lo = lo.max(env.e_y_high),
                PassSide::Right => hi = hi.min(env.e_y_low),
            }
        }
        let gap = hi - lo;
        if gap < min_gap || gap <= 0.0 {
            return Err(FrenetError::InfeasibleCorridor { s: mid, gap, required: min_gap });
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(Corridor { breakpoints: cuts, lower, upper })
}
