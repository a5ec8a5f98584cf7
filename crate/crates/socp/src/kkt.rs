//! Assembly and solution of the Newton system
//!
//! ```text
//! [ 0  Aᵀ  Gᵀ ] [dx]   [r1]
//! [ A  0   0  ] [dy] = [r2]
//! [ G  0  −W² ] [dz]   [r3]
//! ```
//!
//! kept in this expanded quasi-definite form: eliminating `dz` would require
//! `W⁻²`, whose entries blow up as iterates approach the cone boundary.

use std::collections::HashMap;

use crate::conic::ConicForm;
use crate::cones::{Cones, Scaling};
use crate::ldl::{min_degree_order, Ldl};

const STATIC_REG: f64 = 7e-8;
const DYN_EPS: f64 = 1e-13;
const DYN_REG: f64 = 2e-7;
const REFINE_STEPS: usize = 12;

pub(crate) struct Kkt {
    n: usize,
    p: usize,
    m: usize,
    nodes: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// unregularized matrix, upper triangle in permuted numbering
    base: Vec<f64>,
    vals: Vec<f64>,
    signs: Vec<f64>,
    diag_pos: Vec<usize>,
    /// A and G entries, constant across iterations
    fixed: Vec<(usize, f64)>,
    lp_pos: Vec<usize>,
    /// upper triangle of each cone's `−W²` block, row by row
    soc_pos: Vec<Vec<usize>>,
    ldl: Ldl,
}

impl Kkt {
    pub fn new(f: &ConicForm) -> Self {
        let n = f.n;
        let p = f.a.nrows;
        let m = f.g.nrows;
        let cones = &f.cones;
        let zn = n + p;
        let nodes = n + p + m;

        let mut pairs: Vec<(usize, usize)> = (0..nodes).map(|i| (i, i)).collect();
        for i in 0..p {
            for (j, _) in f.a.row(i) {
                pairs.push((j, n + i));
            }
        }
        for i in 0..m {
            for (j, _) in f.g.row(i) {
                pairs.push((j, zn + i));
            }
        }
        for (&o, &d) in cones.offsets.iter().zip(&cones.soc) {
            for r in 0..d {
                for c in r + 1..d {
                    pairs.push((zn + o + r, zn + o + c));
                }
            }
        }

        let edges: Vec<(usize, usize)> = pairs.iter().filter(|(i, j)| i != j).cloned().collect();
        let order = min_degree_order(nodes, &edges);
        let mut perm = vec![0usize; nodes];
        for (k, &v) in order.iter().enumerate() {
            perm[v] = k;
        }

        // (column, row) in permuted numbering, row ≤ column
        let mut upper: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (perm[i], perm[j]);
                (a.max(b), a.min(b))
            })
            .collect();
        upper.sort_unstable();
        upper.dedup();
        let mut col_ptr = vec![0usize; nodes + 1];
        let mut row_idx = Vec::with_capacity(upper.len());
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(upper.len());
        for (k, &(col, row)) in upper.iter().enumerate() {
            col_ptr[col + 1] += 1;
            row_idx.push(row);
            index.insert((row, col), k);
        }
        for c in 0..nodes {
            col_ptr[c + 1] += col_ptr[c];
        }
        let lookup = |i: usize, j: usize| -> usize {
            let (a, b) = (perm[i], perm[j]);
            index[&(a.min(b), a.max(b))]
        };

        let diag_pos: Vec<usize> = (0..nodes).map(|i| lookup(i, i)).collect();
        let mut fixed = Vec::new();
        for i in 0..p {
            for (j, v) in f.a.row(i) {
                fixed.push((lookup(j, n + i), v));
            }
        }
        for i in 0..m {
            for (j, v) in f.g.row(i) {
                fixed.push((lookup(j, zn + i), v));
            }
        }
        let lp_pos: Vec<usize> = (0..cones.lp).map(|i| diag_pos[zn + i]).collect();
        let soc_pos: Vec<Vec<usize>> = cones
            .offsets
            .iter()
            .zip(&cones.soc)
            .map(|(&o, &d)| {
                let mut v = Vec::with_capacity(d * (d + 1) / 2);
                for r in 0..d {
                    for c in r..d {
                        v.push(lookup(zn + o + r, zn + o + c));
                    }
                }
                v
            })
            .collect();

        let mut signs = vec![-1.0; nodes];
        for v in 0..n {
            signs[perm[v]] = 1.0;
        }
        let ldl = Ldl::symbolic(nodes, &col_ptr, &row_idx);
        let nnz = row_idx.len();
        Self {
            n,
            p,
            m,
            nodes,
            perm,
            col_ptr,
            row_idx,
            base: vec![0.0; nnz],
            vals: vec![0.0; nnz],
            signs,
            diag_pos,
            fixed,
            lp_pos,
            soc_pos,
            ldl,
        }
    }

    /// Assembles and factors the matrix for the current scaling.
    pub fn factor(&mut self, _cones: &Cones, w: &Scaling) -> Result<(), String> {
        let base = &mut self.base;
        base.iter_mut().for_each(|v| *v = 0.0);
        for &(pos, v) in &self.fixed {
            base[pos] += v;
        }
        for (i, &pos) in self.lp_pos.iter().enumerate() {
            base[pos] -= w.lp_w2(i);
        }
        for (k, positions) in self.soc_pos.iter().enumerate() {
            let w2 = w.soc_w2(k);
            let d = w.soc[k].w.len();
            let mut t = 0;
            for r in 0..d {
                for c in r..d {
                    base[positions[t]] -= w2[r * d + c];
                    t += 1;
                }
            }
        }

        self.vals.copy_from_slice(&self.base);
        for (i, &pos) in self.diag_pos[..self.n + self.p].iter().enumerate() {
            self.vals[pos] += self.signs[self.perm[i]] * STATIC_REG;
        }
        self.ldl
            .numeric(&self.col_ptr, &self.row_idx, &self.vals, &self.signs, DYN_EPS, DYN_REG)
            .map_err(|k| format!("non-finite pivot at KKT column {k}"))
    }

    /// The unregularized matrix times `v`, both in permuted numbering.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in 0..self.nodes {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let a = self.base[k];
                out[r] += a * v[c];
                if r != c {
                    out[c] += a * v[r];
                }
            }
        }
    }

    /// Solves the Newton system for `(dx, dy, dz)`, refining against the
    /// unregularized matrix.
    pub fn solve(
        &self,
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, p, m) = (self.n, self.p, self.m);
        let mut rhs = vec![0.0; self.nodes];
        for (i, v) in r1.iter().chain(r2).chain(r3).enumerate() {
            rhs[self.perm[i]] = *v;
        }

        let rhs_norm = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut sol = rhs.clone();
        self.ldl.solve(&mut sol);
        let mut kv = vec![0.0; self.nodes];
        let mut best_res = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            self.apply(&sol, &mut kv);
            let mut res: Vec<f64> = rhs.iter().zip(&kv).map(|(a, b)| a - b).collect();
            let rn = res.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if rn <= 1e-14 * (1.0 + rhs_norm) || rn >= 0.9 * best_res {
                break;
            }
            best_res = rn;
            self.ldl.solve(&mut res);
            for (s, c) in sol.iter_mut().zip(&res) {
                *s += c;
            }
        }
        let pick = |range: std::ops::Range<usize>| -> Vec<f64> { range.map(|i| sol[self.perm[i]]).collect() };
        (pick(0..n), pick(n..n + p), pick(n + p..n + p + m))
    }
}
