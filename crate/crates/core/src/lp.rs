//! Sparse linear program container.
//!
//! `min c^T x` subject to `A_eq x = b_eq`, `A_in x <= b_in` and
//! `lower <= x <= upper` (bounds may be infinite).

use std::fmt::Write as _;
use std::io;

/// Constraint family, used to identify rows across structurally similar LPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    Generic,
    Dynamics,
    TerminalHeading,
    TerminalLateral,
    CorridorLower,
    CorridorUpper,
    RateLower,
    RateUpper,
    InputPeak,
    RatePeak,
    FootprintLower,
    FootprintUpper,
    ParallelLower,
    ParallelUpper,
}

/// Stable row identity: family plus up to two indices (e.g. station and covered station).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowLabel {
    pub kind: RowKind,
    pub major: u32,
    pub minor: u32,
}

impl RowLabel {
    pub fn new(kind: RowKind, major: usize, minor: usize) -> Self {
        Self { kind, major: major as u32, minor: minor as u32 }
    }

    pub fn generic(index: usize) -> Self {
        Self::new(RowKind::Generic, index, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub label: RowLabel,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub equalities: Vec<Row>,
    /// Rows of the form `a^T x <= b`.
    pub inequalities: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, label: RowLabel) {
        self.equalities.push(Row { coeffs, rhs, label });
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, label: RowLabel) {
        self.inequalities.push(Row { coeffs, rhs, label });
    }

    /// Adds `a^T x >= rhs` as `-a^T x <= -rhs`.
    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, label: RowLabel) {
        let coeffs = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.inequalities.push(Row { coeffs, rhs: -rhs, label });
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Checks index ranges, vector lengths and finiteness of the data.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.names.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(format!(
                "inconsistent variable arrays: {} costs, {} names, {} lower, {} upper",
                n,
                self.names.len(),
                self.lower.len(),
                self.upper.len()
            ));
        }
        if let Some(j) = self.cost.iter().position(|c| !c.is_finite()) {
            return Err(format!("cost of variable {j} is not finite"));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(format!("invalid bounds [{lo}, {hi}] on variable {j}"));
            }
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if !row.rhs.is_finite() {
                return Err(format!("row {:?} has a non-finite right-hand side", row.label));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(format!("row {:?} references variable {j} of {n}", row.label));
                }
                if !a.is_finite() {
                    return Err(format!("row {:?} has a non-finite coefficient", row.label));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any equality, inequality or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|r| (r.activity(x) - r.rhs).abs());
        let le = self.inequalities.iter().map(|r| (r.activity(x) - r.rhs).max(0.0));
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }

    /// Writes the program in CPLEX LP text format.
    pub fn write_lp_format<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        let name = |j: usize| sanitize(&self.names[j], j);
        let mut s = String::new();
        let _ = writeln!(s, "\\ generated by slp-core");
        let _ = write!(s, "Minimize\n obj:");
        let mut any = false;
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(s, " {} {} {}", if c < 0.0 { "-" } else { "+" }, c.abs(), name(j));
                any = true;
            }
        }
        if !any {
            let _ = write!(s, " 0 {}", if self.cost.is_empty() { "x".to_string() } else { name(0) });
        }
        s.push_str("\nSubject To\n");
        let write_row = |s: &mut String, prefix: &str, idx: usize, row: &Row, sense: &str| {
            let _ = write!(s, " {prefix}{idx}:");
            if row.coeffs.is_empty() {
                let _ = write!(s, " 0 {}", name(0));
            }
            for &(j, a) in &row.coeffs {
                let _ = write!(s, " {} {} {}", if a < 0.0 { "-" } else { "+" }, a.abs(), name(j));
            }
            let _ = writeln!(s, " {sense} {}", row.rhs);
        };
        for (i, row) in self.equalities.iter().enumerate() {
            write_row(&mut s, "e", i, row, "=");
        }
        for (i, row) in self.inequalities.iter().enumerate() {
            write_row(&mut s, "c", i, row, "<=");
        }
        s.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let fmt = |v: f64| {
                if v == f64::INFINITY {
                    "+inf".to_string()
                } else if v == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    v.to_string()
                }
            };
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                let _ = writeln!(s, " {} free", name(j));
            } else {
                let _ = writeln!(s, " {} <= {} <= {}", fmt(lo), name(j), fmt(hi));
            }
        }
        s.push_str("End\n");
        out.write_all(s.as_bytes())
    }
}

fn sanitize(name: &str, j: usize) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    match clean.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => clean,
        _ => format!("x{j}_{clean}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ge_rows_are_negated() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0, 0.0, f64::INFINITY);
        lp.add_ge(vec![(x, 2.0)], 3.0, RowLabel::generic(0));
        assert_eq!(lp.inequalities[0].coeffs, vec![(0, -2.0)]);
        assert_eq!(lp.inequalities[0].rhs, -3.0);
        assert!((lp.max_violation(&[1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(lp.max_violation(&[1.5]), 0.0);
    }

    #[test]
    fn validation_catches_bad_indices() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 1.0, 0.0, 1.0);
        lp.add_le(vec![(3, 1.0)], 1.0, RowLabel::generic(0));
        assert!(lp.validate().is_err());
    }

    #[test]
    fn lp_format_lists_every_section() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("u_0", -1.0, f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var("sigma", 1e4, 0.0, f64::INFINITY);
        lp.add_eq(vec![(x, 1.0), (y, -1.0)], 0.5, RowLabel::generic(0));
        lp.add_le(vec![(x, 1.0)], 2.0, RowLabel::generic(1));
        let mut buf = Vec::new();
        lp.write_lp_format(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize\n obj: - 1 u_0 + 10000 sigma"));
        assert!(text.contains(" e0: + 1 u_0 - 1 sigma = 0.5"));
        assert!(text.contains(" c0: + 1 u_0 <= 2"));
        assert!(text.contains(" u_0 free"));
        assert!(text.contains(" 0 <= sigma <= +inf"));
        assert!(text.ends_with("End\n"));
    }
}
