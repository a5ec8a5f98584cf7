//! Lowering of a [`ConeProgram`] into the standard form
//! `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cones::Cones;
use crate::program::{Affine, ConeProgram, SparseRow};

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub nrows: usize,
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_rows(rows: &[SparseRow]) -> Self {
        let mut ptr = Vec::with_capacity(rows.len() + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for r in rows {
            for &(j, v) in &r.entries {
                idx.push(j);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        Self { nrows: rows.len(), ptr, idx, val }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[i]..self.ptr[i + 1]).map(move |k| (self.idx[k], self.val[k]))
    }

    /// `out = self · x`
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.nrows) {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out += selfᵀ · y`
    pub fn mul_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate().take(self.nrows) {
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
    }
}

pub(crate) struct ConicForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub a: Csr,
    pub b: Vec<f64>,
    pub g: Csr,
    pub h: Vec<f64>,
    pub cones: Cones,
}

fn inf_norm(row: &SparseRow) -> f64 {
    row.entries.iter().fold(0.0_f64, |m, e| m.max(e.1.abs()))
}

fn scaled(row: &SparseRow, k: f64) -> SparseRow {
    SparseRow { entries: row.entries.iter().map(|&(j, v)| (j, v * k)).collect() }
}

/// Rewrites `x_vᵀQx_v + lin·x ≤ rhs` as `‖w(x)‖² ≤ u(x)` and then as the
/// rotated cone `‖(2√τ·w, u − τ)‖ ≤ u + τ`.
fn quad_to_soc(
    vars: &[usize],
    quad: &[f64],
    lin: &SparseRow,
    rhs: f64,
) -> (Vec<Affine>, Affine) {
    let k = vars.len();
    // normalize so the largest entry of Q is 1; this keeps u and τ comparable
    let norm = quad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let norm = if norm > 0.0 { norm } else { 1.0 };
    let quad: Vec<f64> = quad.iter().map(|v| v / norm).collect();
    let lin = scaled(lin, 1.0 / norm);
    let rhs = rhs / norm;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(k, k, &quad));
    let scale = 1.0;

    let mut q_v = vec![0.0; k];
    let mut other = Vec::new();
    for &(j, v) in &lin.entries {
        match vars.iter().position(|&w| w == j) {
            Some(a) => q_v[a] += v,
            None => other.push((j, v)),
        }
    }

    let mut w_rows: Vec<Affine> = Vec::new();
    let mut q_perp = q_v.clone();
    let mut g_sq = 0.0;
    for e in 0..k {
        let lam = eig.eigenvalues[e];
        if lam <= 1e-12 * scale {
            continue;
        }
        let vec = eig.eigenvectors.column(e);
        let proj: f64 = (0..k).map(|a| vec[a] * q_v[a]).sum();
        for a in 0..k {
            q_perp[a] -= proj * vec[a];
        }
        let g = 0.5 * proj / lam.sqrt();
        g_sq += g * g;
        let row = SparseRow::from_pairs((0..k).map(|a| (vars[a], lam.sqrt() * vec[a])));
        w_rows.push(Affine::new(row, g));
    }

    let u_const = rhs + g_sq;
    let mut u_pairs: Vec<(usize, f64)> = other.iter().map(|&(j, v)| (j, -v)).collect();
    for a in 0..k {
        if q_perp[a].abs() > 1e-14 * scale.max(q_v[a].abs()) {
            u_pairs.push((vars[a], -q_perp[a]));
        }
    }
    let u = SparseRow::from_pairs(u_pairs);
    let tau = u_const.abs().max(1.0);
    let two_rt = 2.0 * tau.sqrt();

    let mut rows: Vec<Affine> = w_rows
        .into_iter()
        .map(|a| Affine::new(scaled(&a.row, two_rt), a.constant * two_rt))
        .collect();
    rows.push(Affine::new(u.clone(), u_const - tau));
    (rows, Affine::new(u, u_const + tau))
}

impl ConicForm {
    /// Assumes `p` has passed validation.
    pub fn from_program(p: &ConeProgram) -> Self {
        let n = p.num_vars;
        let c: Vec<f64> = p.objective.iter().map(|v| -v).collect();

        let mut a_rows = Vec::with_capacity(p.equalities.len());
        let mut b = Vec::with_capacity(p.equalities.len());
        for e in &p.equalities {
            let s = inf_norm(&e.row);
            let k = if s > 0.0 { 1.0 / s } else { 1.0 };
            a_rows.push(scaled(&e.row, k));
            b.push(e.rhs * k);
        }

        let mut g_rows = Vec::new();
        let mut h = Vec::new();
        for e in &p.inequalities {
            let s = inf_norm(&e.row);
            let k = if s > 0.0 { 1.0 / s } else { 1.0 };
            g_rows.push(scaled(&e.row, k));
            h.push(e.rhs * k);
        }

        let mut soc_dims = Vec::new();
        let mut push_cone = |rows: &[Affine], bound: &Affine| {
            let s = rows
                .iter()
                .chain(std::iter::once(bound))
                .fold(0.0_f64, |m, a| m.max(inf_norm(&a.row)));
            let k = if s > 0.0 { 1.0 / s } else { 1.0 };
            g_rows.push(scaled(&bound.row, -k));
            h.push(bound.constant * k);
            for a in rows {
                g_rows.push(scaled(&a.row, -k));
                h.push(a.constant * k);
            }
            soc_dims.push(rows.len() + 1);
        };
        for cone in &p.socs {
            push_cone(&cone.rows, &cone.bound);
        }
        for q in &p.quadratics {
            let (rows, bound) = quad_to_soc(&q.vars, &q.quad, &q.lin, q.rhs);
            push_cone(&rows, &bound);
        }

        let cones = Cones::new(p.inequalities.len(), soc_dims);
        Self {
            n,
            c,
            a: Csr::from_rows(&a_rows),
            b,
            g: Csr::from_rows(&g_rows),
            h,
            cones,
        }
    }
}
