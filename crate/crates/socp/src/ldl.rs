//! Sparse LDLᵀ for quasi-definite matrices: minimum-degree ordering,
//! elimination-tree symbolic analysis and an up-looking numeric factorization
//! with sign-aware dynamic regularization.

use std::collections::HashSet;

const NONE: usize = usize::MAX;

/// Minimum-degree elimination order. Returns `order[k] = node eliminated k-th`.
/// Ties go to the lowest node index, so the result is deterministic.
pub(crate) fn min_degree_order(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut remaining = n;
    while remaining > 0 {
        let mut best = NONE;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if alive[v] && adj[v].len() < best_deg {
                best = v;
                best_deg = adj[v].len();
            }
        }
        if best_deg + 1 == remaining {
            // what is left is a clique: any order gives the same fill
            order.extend((0..n).filter(|&v| alive[v]));
            break;
        }
        alive[best] = false;
        remaining -= 1;
        order.push(best);
        let mut nbrs: Vec<usize> = adj[best].drain().collect();
        nbrs.sort_unstable();
        for &u in &nbrs {
            adj[u].remove(&best);
            for &w in &nbrs {
                if w != u {
                    adj[u].insert(w);
                }
            }
        }
    }
    order
}

/// Symbolic + numeric factor of an upper-triangular CSC matrix (already permuted).
#[derive(Debug, Clone)]
pub(crate) struct Ldl {
    n: usize,
    parent: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    lnz: Vec<usize>,
    y: Vec<f64>,
    pattern: Vec<usize>,
    flag: Vec<usize>,
    /// Number of pivots replaced by the regularization value in the last factorization.
    pub bumped: usize,
}

impl Ldl {
    pub fn symbolic(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Self {
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &row in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
                let mut i = row;
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        Self {
            n,
            parent,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            lnz: vec![0; n],
            y: vec![0.0; n],
            pattern: vec![0; n],
            flag: vec![NONE; n],
            bumped: 0,
        }
    }

    /// Numeric factorization. Pivots whose sign disagrees with `signs[k]` (or
    /// are tiny) are replaced by `signs[k]·reg`. Fails only on non-finite pivots.
    pub fn numeric(
        &mut self,
        col_ptr: &[usize],
        row_idx: &[usize],
        vals: &[f64],
        signs: &[f64],
        eps: f64,
        reg: f64,
    ) -> Result<(), usize> {
        self.bumped = 0;
        for k in 0..self.n {
            self.y[k] = 0.0;
            let mut top = self.n;
            self.flag[k] = k;
            self.lnz[k] = 0;
            for p in col_ptr[k]..col_ptr[k + 1] {
                let mut i = row_idx[p];
                self.y[i] += vals[p];
                let mut len = 0;
                while self.flag[i] != k {
                    self.pattern[len] = i;
                    len += 1;
                    self.flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    self.pattern[top] = self.pattern[len];
                }
            }
            let mut dk = self.y[k];
            self.y[k] = 0.0;
            for t in top..self.n {
                let i = self.pattern[t];
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p2 = self.lp[i] + self.lnz[i];
                for p in self.lp[i]..p2 {
                    self.y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[p2] = k;
                self.lx[p2] = l_ki;
                self.lnz[i] += 1;
            }
            if !dk.is_finite() {
                return Err(k);
            }
            if signs[k] * dk <= eps {
                dk = signs[k] * reg;
                self.bumped += 1;
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                xj -= self.lx[p] * x[self.li[p]];
            }
            x[j] = xj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_upper_csc(a: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = a.len();
        let mut cp = vec![0];
        let mut ri = Vec::new();
        let mut vx = Vec::new();
        for k in 0..n {
            for i in 0..=k {
                if a[i][k] != 0.0 || i == k {
                    ri.push(i);
                    vx.push(a[i][k]);
                }
            }
            cp.push(ri.len());
        }
        (cp, ri, vx)
    }

    #[test]
    fn quasi_definite_solve_matches_product() {
        let a = vec![
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 1.0],
            vec![1.0, 0.0, 1.0, -1.0],
        ];
        let (cp, ri, vx) = dense_to_upper_csc(&a);
        let mut f = Ldl::symbolic(4, &cp, &ri);
        f.numeric(&cp, &ri, &vx, &[1.0, 1.0, 1.0, -1.0], 1e-14, 1e-8).unwrap();
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b: Vec<f64> = (0..4).map(|i| (0..4).map(|j| a[i][j] * x_true[j]).sum()).collect();
        f.solve(&mut b);
        for i in 0..4 {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
        assert_eq!(f.bumped, 0);
    }

    #[test]
    fn ordering_is_a_permutation() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 0)];
        let mut ord = min_degree_order(5, &edges);
        assert_eq!(ord[0], 4);
        ord.sort_unstable();
        assert_eq!(ord, vec![0, 1, 2, 3, 4]);
    }
}
