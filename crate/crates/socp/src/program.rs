//! Problem description: a linear objective to maximize over linear, second-order
//! cone and convex quadratic constraints.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::ProgramError;

/// Sparse linear form `Σ coef·x[index]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a row, merging repeated indices and dropping exact zeros.
    pub fn from_pairs<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { entries: merged }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Affine scalar `row·x + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub row: SparseRow,
    pub constant: f64,
}

impl Affine {
    pub fn new(row: SparseRow, constant: f64) -> Self {
        Self { row, constant }
    }

    pub fn constant(value: f64) -> Self {
        Self { row: SparseRow::new(), constant: value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.row.dot(x) + self.constant
    }
}

/// `row·x = rhs` for equalities, `row·x ≤ rhs` for inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub row: SparseRow,
    pub rhs: f64,
}

/// `‖(rows[0](x), …, rows[m-1](x))‖₂ ≤ bound(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub rows: Vec<Affine>,
    pub bound: Affine,
}

/// `x_vᵀ Q x_v + lin·x ≤ rhs`, where `x_v` gathers the entries listed in `vars`
/// and `quad` is the dense row-major `k×k` matrix Q (k = `vars.len()`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub vars: Vec<usize>,
    pub quad: Vec<f64>,
    pub lin: SparseRow,
    pub rhs: f64,
}

impl QuadConstraint {
    pub fn eval_lhs(&self, x: &[f64]) -> f64 {
        let k = self.vars.len();
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                acc += x[self.vars[a]] * self.quad[a * k + b] * x[self.vars[b]];
            }
        }
        acc + self.lin.dot(x)
    }
}

/// A convex program in maximization form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConeProgram {
    pub num_vars: usize,
    /// Objective coefficients; the solver maximizes `objective·x`.
    pub objective: Vec<f64>,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
    pub socs: Vec<SocConstraint>,
    pub quadratics: Vec<QuadConstraint>,
}

const PSD_TOL: f64 = 1e-8;

impl ConeProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: vec![0.0; num_vars], ..Self::default() }
    }

    /// Appends a fresh variable with zero objective weight and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, count: usize) -> Vec<usize> {
        (0..count).map(|_| self.add_var()).collect()
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) {
        self.equalities.push(LinearConstraint { row, rhs });
    }

    pub fn add_le(&mut self, row: SparseRow, rhs: f64) {
        self.inequalities.push(LinearConstraint { row, rhs });
    }

    pub fn add_soc(&mut self, rows: Vec<Affine>, bound: Affine) {
        self.socs.push(SocConstraint { rows, bound });
    }

    pub fn add_quad(&mut self, vars: Vec<usize>, quad: Vec<f64>, lin: SparseRow, rhs: f64) {
        self.quadratics.push(QuadConstraint { vars, quad, lin, rhs });
    }

    /// Total number of constraint rows of every kind.
    pub fn constraint_count(&self) -> usize {
        self.equalities.len() + self.inequalities.len() + self.socs.len() + self.quadratics.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks dimensions, finiteness, symmetry and positive semidefiniteness.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars;
        if self.objective.len() != n {
            return Err(ProgramError::Dimension(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                n
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(ProgramError::NonFinite("objective".into()));
        }
        let check_row = |row: &SparseRow, what: &str| -> Result<(), ProgramError> {
            for &(j, v) in &row.entries {
                if j >= n {
                    return Err(ProgramError::Dimension(format!(
                        "{what} references variable {j} but only {n} exist"
                    )));
                }
                if !v.is_finite() {
                    return Err(ProgramError::NonFinite(what.to_string()));
                }
            }
            Ok(())
        };
        let check_scalar = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ProgramError::NonFinite(what.to_string()))
            }
        };
        for (i, c) in self.equalities.iter().enumerate() {
            let what = format!("equality {i}");
            check_row(&c.row, &what)?;
            check_scalar(c.rhs, &what)?;
        }
        for (i, c) in self.inequalities.iter().enumerate() {
            let what = format!("inequality {i}");
            check_row(&c.row, &what)?;
            check_scalar(c.rhs, &what)?;
        }
        for (i, c) in self.socs.iter().enumerate() {
            let what = format!("cone {i}");
            for a in c.rows.iter().chain(std::iter::once(&c.bound)) {
                check_row(&a.row, &what)?;
                check_scalar(a.constant, &what)?;
            }
        }
        for (i, c) in self.quadratics.iter().enumerate() {
            let what = format!("quadratic {i}");
            check_row(&c.lin, &what)?;
            check_scalar(c.rhs, &what)?;
            let k = c.vars.len();
            if c.quad.len() != k * k {
                return Err(ProgramError::Dimension(format!(
                    "{what}: matrix has {} entries, expected {}",
                    c.quad.len(),
                    k * k
                )));
            }
            let mut seen = c.vars.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != k {
                return Err(ProgramError::Dimension(format!("{what}: repeated variable")));
            }
            if let Some(&j) = c.vars.iter().find(|&&j| j >= n) {
                return Err(ProgramError::Dimension(format!(
                    "{what} references variable {j} but only {n} exist"
                )));
            }
            if c.quad.iter().any(|v| !v.is_finite()) {
                return Err(ProgramError::NonFinite(what));
            }
            let scale = c.quad.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for a in 0..k {
                for b in 0..a {
                    if (c.quad[a * k + b] - c.quad[b * k + a]).abs() > 1e-9 * scale {
                        return Err(ProgramError::NotSymmetric(i));
                    }
                }
            }
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(k, k, &c.quad));
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if k > 0 && min < -PSD_TOL * scale {
                return Err(ProgramError::NotPsd { index: i, min_eigenvalue: min });
            }
        }
        Ok(())
    }

    /// Text dump, one constraint per line.
    ///
    /// ```text
    /// vars 3
    /// max 0:1
    /// eq 0:1 1:-1 = 0
    /// le 2:1 <= 5
    /// soc [0:1 -3] [1:1 -4] <= [2:1 +0]
    /// quad 0,1 Q=1,0,0,1 lin 2:1 <= 4
    /// ```
    pub fn to_text(&self) -> String {
        fn row(out: &mut String, r: &SparseRow) {
            let mut first = true;
            for &(j, v) in &r.entries {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{j}:{v:e}");
            }
        }
        fn affine(out: &mut String, a: &Affine) {
            out.push('[');
            row(out, &a.row);
            let _ = write!(out, " {:+e}]", a.constant);
        }
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.num_vars);
        out.push_str("max ");
        row(&mut out, &SparseRow::from_pairs(self.objective.iter().cloned().enumerate()));
        out.push('\n');
        for c in &self.equalities {
            out.push_str("eq ");
            row(&mut out, &c.row);
            let _ = writeln!(out, " = {:e}", c.rhs);
        }
        for c in &self.inequalities {
            out.push_str("le ");
            row(&mut out, &c.row);
            let _ = writeln!(out, " <= {:e}", c.rhs);
        }
        for c in &self.socs {
            out.push_str("soc");
            for a in &c.rows {
                out.push(' ');
                affine(&mut out, a);
            }
            out.push_str(" <= ");
            affine(&mut out, &c.bound);
            out.push('\n');
        }
        for c in &self.quadratics {
            let vars: Vec<String> = c.vars.iter().map(|v| v.to_string()).collect();
            let quad: Vec<String> = c.quad.iter().map(|v| format!("{v:e}")).collect();
            let _ = write!(out, "quad {} Q={} lin ", vars.join(","), quad.join(","));
            row(&mut out, &c.lin);
            let _ = writeln!(out, " <= {:e}", c.rhs);
        }
        out
    }

    pub fn dump(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_text())
    }
}
