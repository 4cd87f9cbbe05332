#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use slp_core::{LinearProgram, RowLabel, Scenario};

pub fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Dense copy of a random LP for the brute-force oracle.
pub struct DenseLp {
    pub lp: LinearProgram,
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    /// General rows followed by the box bounds.
    pub ineq: Vec<(Vec<f64>, f64)>,
}

/// Random LP in a box `[-bound, bound]^n` with up to `max_rows` general inequalities
/// and at most one equality.
pub fn random_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize, bound: f64) -> DenseLp {
    let n = rng.gen_range(2..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let n_eq = rng.gen_range(0..=1usize);
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new();
    for (j, &cj) in c.iter().enumerate() {
        lp.add_var(format!("x{j}"), cj, -bound, bound);
    }
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for k in 0..n_eq {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rhs = rng.gen_range(-4.0..4.0);
        lp.add_eq(row.iter().copied().enumerate().collect(), rhs, RowLabel::generic(k));
        eq.push((row, rhs));
    }
    for k in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rhs = rng.gen_range(-6.0..8.0);
        lp.add_le(row.iter().copied().enumerate().collect(), rhs, RowLabel::generic(100 + k));
        ineq.push((row, rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineq.push((e.clone(), bound));
        e[j] = -1.0;
        ineq.push((e, bound));
    }
    DenseLp { lp, c, eq, ineq }
}

/// Brute-force optimum over all vertices of `{x : E x = f, G x <= h}`.
pub fn vertex_enumeration(d: &DenseLp) -> Option<f64> {
    let n = d.c.len();
    let need = n - d.eq.len();
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(need);
    let mut visit = |chosen: &[usize]| {
        let mut a: Vec<Vec<f64>> = d.eq.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = d.eq.iter().map(|(_, v)| *v).collect();
        for &i in chosen {
            a.push(d.ineq[i].0.clone());
            b.push(d.ineq[i].1);
        }
        let Some(x) = gauss(a, b) else { return };
        let ok_eq = d.eq.iter().all(|(r, v)| (dot(r, &x) - v).abs() < 1e-7);
        let ok_in = d.ineq.iter().all(|(r, v)| dot(r, &x) <= v + 1e-7);
        if ok_eq && ok_in {
            let obj = dot(&d.c, &x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    };
    combinations(0, need, d.ineq.len(), &mut pick, &mut visit);
    best
}

fn combinations(start: usize, need: usize, total: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == need {
        f(pick);
        return;
    }
    for i in start..total {
        pick.push(i);
        combinations(i + 1, need, total, pick, f);
        pick.pop();
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-9 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in 0..n {
            if i != k {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// The classic degenerate instance on which textbook Dantzig pricing cycles.
pub fn beale() -> LinearProgram {
    let mut lp = LinearProgram::new();
    let inf = f64::INFINITY;
    let x4 = lp.add_var("x4", -0.75, 0.0, inf);
    let x5 = lp.add_var("x5", 150.0, 0.0, inf);
    let x6 = lp.add_var("x6", -0.02, 0.0, inf);
    let x7 = lp.add_var("x7", 6.0, 0.0, inf);
    lp.add_le(vec![(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)], 0.0, RowLabel::generic(0));
    lp.add_le(vec![(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)], 0.0, RowLabel::generic(1));
    lp.add_le(vec![(x6, 1.0)], 1.0, RowLabel::generic(2));
    lp
}
