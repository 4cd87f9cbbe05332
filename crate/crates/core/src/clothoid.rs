//! Clothoid path planning baseline.
//!
//! Waypoints are the corners of margin-inflated obstacles on the passing side.
//! Consecutive waypoints are joined by straights or by a symmetric lane change
//! made of four clothoids with zero heading and curvature at both ends. The
//! path is built in the `(s, e_y)` plane and mapped onto the road afterwards.

use std::f64::consts::{FRAC_PI_2, PI};

use log::warn;
use num_complex::Complex64;
use thiserror::Error;

use crate::frenet::{ObstacleEnvelope, PassSide, RoadCenterline};
use crate::vehicle::{Grid, SpatialState, VehicleParams};

/// Fresnel integrals `C(t) = int_0^t cos(pi x^2 / 2) dx` and `S(t)` likewise with `sin`.
pub fn fresnel(t: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200;
    let x = t.abs();
    let (c, s) = if x < 1e-150 {
        (x, 0.0)
    } else if x <= 1.5 {
        // Power series, alternating between the cosine and sine sums.
        let fact = FRAC_PI_2 * x * x;
        let (mut sum_c, mut sum_s) = (x, 0.0);
        let mut term = x;
        let mut sign = 1.0;
        let mut odd = true;
        let mut n = 3.0;
        let mut sum = 0.0;
        for k in 1..MAX_ITER {
            term *= fact / k as f64;
            sum += sign * term / n;
            let test = sum.abs() * EPS;
            if odd {
                sign = -sign;
                sum_s = sum;
                sum = sum_c;
            } else {
                sum_c = sum;
                sum = sum_s;
            }
            if term < test {
                break;
            }
            odd = !odd;
            n += 2.0;
        }
        (sum_c, sum_s)
    } else {
        // Continued fraction for the complementary error function, Lentz's method.
        let pix2 = PI * x * x;
        let mut b = Complex64::new(1.0, -pix2);
        let mut cc = Complex64::new(1e300, 0.0);
        let mut d = b.inv();
        let mut h = d;
        let mut n = -1.0;
        for _ in 2..MAX_ITER {
            n += 2.0;
            let a = -n * (n + 1.0);
            b += Complex64::new(4.0, 0.0);
            d = (d * a + b).inv();
            cc = b + cc.inv() * a;
            let del = cc * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex64::new(x, -x);
        let cs = Complex64::new(0.5, 0.5) * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 0.5 * pix2) * h);
        (cs.re, cs.im)
    };
    if t < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// Planar pose `(x, y, heading)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Curve with curvature `kappa0 + sharpness * sigma`; a straight when both vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClothoidSegment {
    pub start: Pose,
    pub kappa0: f64,
    pub sharpness: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub eta: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
}

impl ClothoidSegment {
    pub fn straight(start: Pose, length: f64) -> Self {
        Self { start, kappa0: 0.0, sharpness: 0.0, length }
    }

    pub fn kappa_at(&self, sigma: f64) -> f64 {
        self.kappa0 + self.sharpness * sigma
    }

    pub fn heading_at(&self, sigma: f64) -> f64 {
        self.start.psi + self.kappa0 * sigma + 0.5 * self.sharpness * sigma * sigma
    }

    /// Exact position after arc length `sigma`.
    pub fn pose_at(&self, sigma: f64) -> Pose {
        let psi = self.heading_at(sigma);
        let (x, y) = displacement(self.start.psi, self.kappa0, self.sharpness, sigma);
        Pose { x: self.start.x + x, y: self.start.y + y, psi }
    }

    pub fn end(&self) -> Pose {
        self.pose_at(self.length)
    }
}

/// `int_0^sigma exp(i (psi0 + k0 t + c t^2 / 2)) dt`.
fn displacement(psi0: f64, k0: f64, c: f64, sigma: f64) -> (f64, f64) {
    if c.abs() < 1e-14 {
        if k0.abs() < 1e-14 {
            return (sigma * psi0.cos(), sigma * psi0.sin());
        }
        let psi1 = psi0 + k0 * sigma;
        return ((psi1.sin() - psi0.sin()) / k0, (psi0.cos() - psi1.cos()) / k0);
    }
    if c < 0.0 {
        let (x, y) = displacement(-psi0, -k0, -c, sigma);
        return (x, -y);
    }
    let scale = (PI / c).sqrt();
    let root = (c / PI).sqrt();
    let (c0, s0) = fresnel(root * (k0 / c));
    let (c1, s1) = fresnel(root * (sigma + k0 / c));
    let rot = Complex64::from_polar(scale, psi0 - k0 * k0 / (2.0 * c));
    let v = rot * Complex64::new(c1 - c0, s1 - s0);
    (v.re, v.im)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitivePath {
    pub segments: Vec<ClothoidSegment>,
}

impl PrimitivePath {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn end(&self) -> Option<Pose> {
        self.segments.last().map(|s| s.end())
    }

    /// Pose and curvature after arc length `eta`, clamped to the path.
    pub fn pose_at(&self, eta: f64) -> Option<(Pose, f64)> {
        let mut rest = eta.max(0.0);
        for (i, seg) in self.segments.iter().enumerate() {
            if rest <= seg.length || i + 1 == self.segments.len() {
                let sigma = rest.min(seg.length);
                return Some((seg.pose_at(sigma), seg.kappa_at(sigma)));
            }
            rest -= seg.length;
        }
        None
    }

    /// Samples at uniform arc-length steps, plus every joint.
    pub fn sample(&self, step: f64) -> Vec<PathSample> {
        let mut out = Vec::new();
        let mut eta0 = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let pieces = (seg.length / step).ceil().max(1.0) as usize;
            let first = if i == 0 { 0 } else { 1 };
            for k in first..=pieces {
                let sigma = seg.length * k as f64 / pieces as f64;
                let p = seg.pose_at(sigma);
                out.push(PathSample { eta: eta0 + sigma, x: p.x, y: p.y, psi: p.psi, kappa: seg.kappa_at(sigma) });
            }
            eta0 += seg.length;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CppError {
    #[error("need at least two waypoints")]
    TooFewWaypoints,
    #[error("waypoints {0} and {1} are not increasing in s")]
    NotMonotone(usize, usize),
    #[error("lane change of {offset:.3} m over {length:.3} m is not realizable")]
    Unrealizable { offset: f64, length: f64 },
    #[error("lane change needs sharpness {required:.4} 1/m^2, cap is {cap:.4}")]
    SharpnessCap { required: f64, cap: f64 },
}

/// Four mirrored clothoids shifting laterally by `offset` over `length`,
/// starting from `start` with zero heading.
pub fn lane_change(start: Pose, length: f64, offset: f64) -> Result<[ClothoidSegment; 4], CppError> {
    let unrealizable = CppError::Unrealizable { offset, length };
    if !(length > 0.0) || !offset.is_finite() {
        return Err(unrealizable);
    }
    let theta = 2.0 * (offset / length).atan();
    let t = theta.abs();
    let (cx, sy) = if t < 1e-12 {
        (1.0, 0.0)
    } else {
        let (c, s) = fresnel((t / PI).sqrt());
        let k = (PI / t).sqrt();
        (k * c, k * s)
    };
    let half = 0.5 * t;
    let lambda = length / (4.0 * (cx * half.cos() + sy * half.sin()) * half.cos());
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(unrealizable);
    }
    let kappa_m = theta / lambda;
    let c = kappa_m / lambda;
    let mut segs = [ClothoidSegment::straight(start, lambda); 4];
    let plan = [(0.0, c), (kappa_m, -c), (0.0, -c), (-kappa_m, c)];
    let mut pose = start;
    for (seg, (k0, sharp)) in segs.iter_mut().zip(plan) {
        *seg = ClothoidSegment { start: pose, kappa0: k0, sharpness: sharp, length: lambda };
        pose = seg.end();
    }
    Ok(segs)
}

/// Waypoints `(s, e_y)` for the baseline, with the number of merged overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CppWaypoints {
    pub points: Vec<[f64; 2]>,
    pub merged: usize,
}

/// Corners of the (already inflated) envelopes on the passing side, bracketed by start and end.
pub fn cpp_waypoints(envelopes: &[ObstacleEnvelope], start: [f64; 2], end: [f64; 2]) -> CppWaypoints {
    let mut sorted: Vec<&ObstacleEnvelope> = envelopes.iter().collect();
    sorted.sort_by(|a, b| a.s_begin.total_cmp(&b.s_begin));
    let mut points = vec![start];
    let mut merged = 0;
    for env in sorted {
        let e = match env.side {
            PassSide::Left => env.e_y_high,
            PassSide::Right => env.e_y_low,
        };
        let (a, b) = ([env.s_begin.max(start[0]), e], [env.s_end.min(end[0]), e]);
        let last = *points.last().unwrap();
        if points.len() > 1 && a[0] <= last[0] {
            let mid = [0.5 * (a[0] + last[0]), 0.5 * (a[1] + last[1])];
            *points.last_mut().unwrap() = mid;
            merged += 1;
            warn!("inflated obstacles overlap near s = {:.2}, merging waypoints", mid[0]);
        } else {
            points.push(a);
        }
        let last = *points.last().unwrap();
        if b[0] > last[0] {
            points.push(b);
        }
    }
    if points.last().map_or(true, |p| end[0] > p[0]) {
        points.push(end);
    } else if let Some(p) = points.last_mut() {
        *p = end;
    }
    CppWaypoints { points, merged }
}

/// Straights between equal offsets, lane changes elsewhere.
pub fn plan_cpp(waypoints: &[[f64; 2]], max_sharpness: Option<f64>) -> Result<PrimitivePath, CppError> {
    if waypoints.len() < 2 {
        return Err(CppError::TooFewWaypoints);
    }
    let mut path = PrimitivePath::default();
    for (i, w) in waypoints.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let length = q[0] - p[0];
        if !(length > 0.0) {
            return Err(CppError::NotMonotone(i, i + 1));
        }
        let start = Pose { x: p[0], y: p[1], psi: 0.0 };
        let offset = q[1] - p[1];
        if offset.abs() < 1e-9 {
            path.segments.push(ClothoidSegment::straight(start, length));
            continue;
        }
        let segs = lane_change(start, length, offset)?;
        if let Some(cap) = max_sharpness {
            let required = segs[0].sharpness.abs();
            if required > cap {
                return Err(CppError::SharpnessCap { required, cap });
            }
        }
        path.segments.extend(segs);
    }
    Ok(path)
}

/// `delta = atan(l kappa)`.
pub fn reconstruct_steering(curvature: &[f64], params: &VehicleParams) -> Vec<f64> {
    curvature.iter().map(|k| (params.l * k).atan()).collect()
}

/// Baseline path mapped onto the road and resampled at the grid stations.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadPath {
    pub states: Vec<SpatialState>,
    pub eta: Vec<f64>,
    /// Curvature of the traveled path.
    pub curvature: Vec<f64>,
    pub steering: Vec<f64>,
}

/// Maps a path built in the `(s, e_y)` plane onto the road.
///
/// With `theta` the path heading in that plane, the road-relative heading is
/// `atan(tan(theta) / (1 - kappa_s e_y))` and the traveled curvature follows
/// from differentiating the global heading along the traveled arc length.
pub fn map_to_road(
    path: &PrimitivePath,
    grid: &Grid,
    centerline: &RoadCenterline,
    params: &VehicleParams,
    sample_step: f64,
) -> RoadPath {
    let samples = path.sample(sample_step);
    let st = grid.stations();
    let mut fine_s = Vec::with_capacity(samples.len());
    let mut fine_z = Vec::with_capacity(samples.len());
    let mut fine_rate = Vec::with_capacity(samples.len());
    let mut fine_k = Vec::with_capacity(samples.len());
    for p in &samples {
        let s = p.x;
        let e = p.y;
        let ks = centerline.curvature_at(s);
        let dks = 0.5 * (centerline.curvature_at(s + 0.5) - centerline.curvature_at(s - 0.5));
        let tan = p.psi.tan();
        let d = 1.0 - ks * e;
        let e_psi = (tan / d).atan();
        // d/ds of tan(theta) and of 1 - kappa_s e_y.
        let cos = p.psi.cos();
        let dtan = p.kappa / (cos * cos * cos);
        let dd = -dks * e - ks * tan;
        let de_psi = (dtan * d - tan * dd) / (d * d + tan * tan);
        let kappa = (ks + de_psi) * e_psi.cos() / d;
        fine_s.push(s);
        fine_z.push(SpatialState::new(e_psi, e));
        fine_rate.push(d / e_psi.cos());
        fine_k.push(kappa);
    }
    let mut fine_eta = vec![0.0; samples.len()];
    for i in 1..samples.len() {
        fine_eta[i] = fine_eta[i - 1] + 0.5 * (fine_rate[i - 1] + fine_rate[i]) * (fine_s[i] - fine_s[i - 1]);
    }
    let interp = |values: &dyn Fn(usize) -> f64, s: f64| -> f64 {
        let i = fine_s.partition_point(|&x| x < s).clamp(1, fine_s.len() - 1);
        let (s0, s1) = (fine_s[i - 1], fine_s[i]);
        let t = if s1 > s0 { ((s - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 1.0 };
        values(i - 1) * (1.0 - t) + values(i) * t
    };
    let states: Vec<SpatialState> = st
        .iter()
        .map(|&s| SpatialState::new(interp(&|i| fine_z[i].e_psi, s), interp(&|i| fine_z[i].e_y, s)))
        .collect();
    let eta0 = interp(&|i| fine_eta[i], st[0]);
    let eta = st.iter().map(|&s| interp(&|i| fine_eta[i], s) - eta0).collect();
    let curvature: Vec<f64> = st.iter().map(|&s| interp(&|i| fine_k[i], s)).collect();
    let steering = reconstruct_steering(&curvature, params);
    RoadPath { states, eta, curvature, steering }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        // Composite Simpson.
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(a + h * i as f64);
        }
        sum * h / 3.0
    }

    #[test]
    fn fresnel_limits_and_values() {
        assert_eq!(fresnel(0.0), (0.0, 0.0));
        let (c, s) = fresnel(1e4);
        assert!((c - 0.5).abs() < 1e-4 && (s - 0.5).abs() < 1e-4);
        for t in [0.3, 1.0, 1.49, 1.51, 2.5, 4.0] {
            let (c, s) = fresnel(t);
            let qc = quad(|x| (FRAC_PI_2 * x * x).cos(), 0.0, t, 20000);
            let qs = quad(|x| (FRAC_PI_2 * x * x).sin(), 0.0, t, 20000);
            assert!((c - qc).abs() < 1e-10, "C({t}) {c} vs {qc}");
            assert!((s - qs).abs() < 1e-10, "S({t}) {s} vs {qs}");
        }
        let (c, s) = fresnel(-1.0);
        assert_eq!((c, s), {
            let (c, s) = fresnel(1.0);
            (-c, -s)
        });
    }

    #[test]
    fn segment_positions_match_quadrature() {
        for (k0, c) in [(0.0, 0.01), (0.05, -0.004), (-0.03, 0.002), (0.02, 0.0)] {
            let seg = ClothoidSegment { start: Pose { x: 1.0, y: -2.0, psi: 0.3 }, kappa0: k0, sharpness: c, length: 25.0 };
            let p = seg.end();
            let qx = quad(|t| seg.heading_at(t).cos(), 0.0, 25.0, 4000);
            let qy = quad(|t| seg.heading_at(t).sin(), 0.0, 25.0, 4000);
            assert!((p.x - 1.0 - qx).abs() < 1e-9 && (p.y + 2.0 - qy).abs() < 1e-9);
        }
    }

    #[test]
    fn lane_change_reaches_target_symmetrically() {
        let segs = lane_change(Pose { x: 0.0, y: 0.0, psi: 0.0 }, 30.0, 3.0).unwrap();
        let end = segs[3].end();
        assert!((end.x - 30.0).abs() < 1e-9 && (end.y - 3.0).abs() < 1e-9 && end.psi.abs() < 1e-12);
        let path = PrimitivePath { segments: segs.to_vec() };
        let samples = path.sample(0.01);
        let total = path.total_length();
        assert!(samples[0].kappa == 0.0 && samples[samples.len() - 1].kappa.abs() < 1e-12);
        // Odd about the midpoint.
        for k in 0..50 {
            let eta = total * k as f64 / 100.0;
            let kappa = |e: f64| path.pose_at(e).unwrap().1;
            assert!((kappa(eta) + kappa(total - eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_waypoints_give_single_straight() {
        let wp = cpp_waypoints(&[], [0.0, 0.0], [100.0, 0.0]);
        let path = plan_cpp(&wp.points, None).unwrap();
        assert_eq!(path.segments.len(), 1);
        assert_eq!(path.segments[0].sharpness, 0.0);
        assert_eq!(path.end().unwrap(), Pose { x: 100.0, y: 0.0, psi: 0.0 });
    }

    #[test]
    fn endpoint_closure_by_integration() {
        let wp = [[0.0, 0.0], [20.0, 2.5], [35.0, 2.5], [60.0, -1.0], [90.0, 0.0]];
        let path = plan_cpp(&wp, None).unwrap();
        let samples = path.sample(0.005);
        let (mut x, mut y) = (0.0, 0.0);
        for w in samples.windows(2) {
            let h = w[1].eta - w[0].eta;
            x += 0.5 * h * (w[0].psi.cos() + w[1].psi.cos());
            y += 0.5 * h * (w[0].psi.sin() + w[1].psi.sin());
        }
        let tol = 1e-4 * path.total_length() / 100.0;
        assert!((x - 90.0).abs() < tol && y.abs() < tol, "{x} {y}");
    }

    #[test]
    fn overlapping_obstacles_merge() {
        let env = |a: f64, b: f64, side| ObstacleEnvelope { s_begin: a, s_end: b, e_y_low: -1.0, e_y_high: 1.0, heading: 0.0, side };
        let wp = cpp_waypoints(&[env(10.0, 20.0, PassSide::Left), env(18.0, 30.0, PassSide::Right)], [0.0, 0.0], [50.0, 0.0]);
        assert_eq!(wp.merged, 1);
        assert_eq!(wp.points, vec![[0.0, 0.0], [10.0, 1.0], [19.0, 0.0], [30.0, -1.0], [50.0, 0.0]]);
    }

    #[test]
    fn sharpness_cap_is_reported() {
        let err = plan_cpp(&[[0.0, 0.0], [10.0, 3.0]], Some(1e-3)).unwrap_err();
        assert!(matches!(err, CppError::SharpnessCap { .. }));
    }

    #[test]
    fn steering_reconstruction() {
        let p = VehicleParams { a: 1.0, b: 5.3, w: 0.95, l: 4.3, delta_max: 0.7, delta_rate_max: 0.7, mu: 0.8 };
        let d = reconstruct_steering(&[0.0, 1.0 / 5.1, -0.05, 0.05], &p);
        assert_eq!(d[0], 0.0);
        assert!((d[1].to_degrees() - 40.0).abs() < 0.2);
        assert!(d[2] < 0.0 && d[2] == -d[3]);
    }

    #[test]
    fn straight_road_mapping_keeps_path_curvature() {
        let p = VehicleParams { a: 1.0, b: 3.0, w: 0.9, l: 2.7, delta_max: 0.7, delta_rate_max: 0.7, mu: 0.8 };
        let cl = RoadCenterline::from_waypoints(&[[0.0, 0.0], [100.0, 0.0]], 1.0).unwrap();
        let grid = Grid::build(0.0, 60.0, 60, &[]).unwrap();
        let path = plan_cpp(&[[0.0, 0.0], [60.0, 2.0]], None).unwrap();
        let road = map_to_road(&path, &grid, &cl, &p, 0.01);
        for (j, &s) in grid.stations().iter().enumerate() {
            let (mut lo, mut hi) = (0.0, path.total_length());
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if path.pose_at(mid).unwrap().0.x < s {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (pose, kappa) = path.pose_at(lo).unwrap();
            assert!((road.curvature[j] - kappa).abs() < 1e-4);
            assert!((road.states[j].e_y - pose.y).abs() < 1e-6);
        }
        assert!((road.eta[60] - path.total_length()).abs() < 1e-4);
    }
}
