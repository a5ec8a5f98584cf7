//! Direct re-evaluation of every constraint of a [`ConeProgram`] at a point.
//! Works on the user-facing description only.

use crate::program::{Affine, ConeProgram, SparseRow};

#[derive(Debug, Clone, Default)]
pub struct ViolationReport {
    pub max_abs: f64,
    /// Violation divided by `1 + magnitude of the terms involved`.
    pub max_scaled: f64,
    /// Human-readable name of the worst constraint (by scaled violation).
    pub worst: String,
}

impl ViolationReport {
    fn record(&mut self, violation: f64, magnitude: f64, what: impl FnOnce() -> String) {
        let v = violation.max(0.0);
        let scaled = v / (1.0 + magnitude);
        if v > self.max_abs {
            self.max_abs = v;
        }
        if scaled > self.max_scaled || (scaled.is_nan() && !self.max_scaled.is_nan()) {
            self.max_scaled = scaled;
            self.worst = what();
        }
    }
}

fn magnitude(row: &SparseRow, x: &[f64]) -> f64 {
    row.entries.iter().map(|&(j, v)| (v * x[j]).abs()).sum()
}

fn affine_mag(a: &Affine, x: &[f64]) -> f64 {
    magnitude(&a.row, x) + a.constant.abs()
}

/// Evaluates all constraints of `p` at `x`. Panics if `x` is shorter than the
/// variable count.
pub fn verify(p: &ConeProgram, x: &[f64]) -> ViolationReport {
    assert!(x.len() >= p.num_vars, "point has {} entries for {} variables", x.len(), p.num_vars);
    let mut rep = ViolationReport::default();
    if x.iter().take(p.num_vars).any(|v| !v.is_finite()) {
        rep.max_abs = f64::INFINITY;
        rep.max_scaled = f64::INFINITY;
        rep.worst = "non-finite point".into();
        return rep;
    }
    for (i, c) in p.equalities.iter().enumerate() {
        let lhs = c.row.dot(x);
        rep.record((lhs - c.rhs).abs(), magnitude(&c.row, x).max(c.rhs.abs()), || format!("equality {i}"));
    }
    for (i, c) in p.inequalities.iter().enumerate() {
        let lhs = c.row.dot(x);
        rep.record(lhs - c.rhs, magnitude(&c.row, x).max(c.rhs.abs()), || format!("inequality {i}"));
    }
    for (i, c) in p.socs.iter().enumerate() {
        let lhs = c.rows.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
        let rhs = c.bound.eval(x);
        let mag = c.rows.iter().map(|a| affine_mag(a, x)).fold(affine_mag(&c.bound, x), f64::max);
        rep.record(lhs - rhs, mag, || format!("cone {i}"));
    }
    for (i, c) in p.quadratics.iter().enumerate() {
        let lhs = c.eval_lhs(x);
        let k = c.vars.len();
        let mut qmag = 0.0;
        for a in 0..k {
            for b in 0..k {
                qmag += (x[c.vars[a]] * c.quad[a * k + b] * x[c.vars[b]]).abs();
            }
        }
        let mag = qmag + magnitude(&c.lin, x) + c.rhs.abs();
        rep.record(lhs - c.rhs, mag, || format!("quadratic {i}"));
    }
    rep
}
