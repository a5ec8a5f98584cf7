//! Nonnegative orthant × second-order cones: Jordan algebra, step lengths and
//! Nesterov–Todd scaling.

#[derive(Debug, Clone)]
pub(crate) struct Cones {
    pub lp: usize,
    pub soc: Vec<usize>,
    pub offsets: Vec<usize>,
    pub dim: usize,
}

impl Cones {
    pub fn new(lp: usize, soc: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(soc.len());
        let mut at = lp;
        for &d in &soc {
            offsets.push(at);
            at += d;
        }
        Self { lp, soc, offsets, dim: at }
    }

    /// Barrier degree: one per orthant coordinate, one per cone.
    pub fn degree(&self) -> usize {
        self.lp + self.soc.len()
    }

    fn socs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets.iter().cloned().zip(self.soc.iter().cloned())
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[..self.lp].iter_mut().for_each(|v| *v = 1.0);
        for (o, _) in self.socs() {
            e[o] = 1.0;
        }
        e
    }

    /// Largest `t` with `u − t·e` still in the closed cone (can be negative).
    pub fn margin(&self, u: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &v in &u[..self.lp] {
            m = m.min(v);
        }
        for (o, d) in self.socs() {
            m = m.min(u[o] - norm(&u[o + 1..o + d]));
        }
        m
    }

    /// Strict interior membership with the same arithmetic the scaling uses.
    pub fn is_interior(&self, u: &[f64]) -> bool {
        u[..self.lp].iter().all(|&v| v > 0.0)
            && self.socs().all(|(o, d)| u[o] > 0.0 && soc_residual(&u[o..o + d]) > 0.0)
    }

    /// `u ← u + t·e`
    pub fn shift(&self, u: &mut [f64], t: f64) {
        u[..self.lp].iter_mut().for_each(|v| *v += t);
        for (o, _) in self.socs() {
            u[o] += t;
        }
    }

    /// Largest step `α ≥ 0` keeping `u + α·du` in the cone (∞ if unbounded).
    pub fn max_step(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.lp {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        for (o, d) in self.socs() {
            alpha = alpha.min(soc_step(&u[o..o + d], &du[o..o + d]));
        }
        alpha
    }

    /// Jordan product `u ∘ v`.
    pub fn prod(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.lp {
            out[i] = u[i] * v[i];
        }
        for (o, d) in self.socs() {
            out[o] = dot(&u[o..o + d], &v[o..o + d]);
            for i in 1..d {
                out[o + i] = u[o] * v[o + i] + v[o] * u[o + i];
            }
        }
        out
    }

    /// Solves `λ ∘ x = v` for `x`, with `λ` in the cone interior.
    pub fn div(&self, lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.lp {
            out[i] = v[i] / lambda[i];
        }
        for (o, d) in self.socs() {
            let l = &lambda[o..o + d];
            let w = &v[o..o + d];
            let det = l[0] * l[0] - dot(&l[1..], &l[1..]);
            let x0 = (l[0] * w[0] - dot(&l[1..], &w[1..])) / det;
            out[o] = x0;
            for i in 1..d {
                out[o + i] = (w[i] - x0 * l[i]) / l[0];
            }
        }
        out
    }
}

/// `u₀² − ‖u₁‖²`, factored to limit cancellation near the boundary.
fn soc_residual(u: &[f64]) -> f64 {
    let n1 = norm(&u[1..]);
    (u[0] - n1) * (u[0] + n1)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn soc_step(u: &[f64], du: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    if du[0] < 0.0 {
        alpha = -u[0] / du[0];
    }
    // (u0 + α d0)² − ‖u1 + α d1‖² = a α² + b α + c
    let a = du[0] * du[0] - dot(&du[1..], &du[1..]);
    let b = 2.0 * (u[0] * du[0] - dot(&u[1..], &du[1..]));
    let c = (u[0] * u[0] - dot(&u[1..], &u[1..])).max(0.0);
    let scale = a.abs().max(b.abs()).max(c);
    if scale == 0.0 {
        return alpha;
    }
    let root = if a.abs() <= 1e-15 * scale {
        if b < 0.0 {
            -c / b
        } else {
            f64::INFINITY
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            let r1 = if q != 0.0 { c / q } else { f64::INFINITY };
            let r2 = q / a;
            [r1, r2]
                .into_iter()
                .filter(|r| *r >= 0.0)
                .fold(f64::INFINITY, f64::min)
        }
    };
    alpha.min(root)
}

#[derive(Debug, Clone)]
pub(crate) struct SocScaling {
    pub eta: f64,
    pub w: Vec<f64>,
}

/// Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub lp: Vec<f64>,
    pub soc: Vec<SocScaling>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    /// `None` when `s` or `z` has left the cone interior.
    pub fn new(cones: &Cones, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut lp = Vec::with_capacity(cones.lp);
        for i in 0..cones.lp {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            lp.push((s[i] / z[i]).sqrt());
        }
        let mut soc = Vec::with_capacity(cones.soc.len());
        for (o, d) in cones.socs() {
            let sc = &s[o..o + d];
            let zc = &z[o..o + d];
            let sres = soc_residual(sc);
            let zres = soc_residual(zc);
            if !(sres > 0.0 && zres > 0.0 && sc[0] > 0.0 && zc[0] > 0.0) {
                return None;
            }
            let sn = sres.sqrt();
            let zn = zres.sqrt();
            let sb: Vec<f64> = sc.iter().map(|v| v / sn).collect();
            let zb: Vec<f64> = zc.iter().map(|v| v / zn).collect();
            let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
            let mut w = vec![0.0; d];
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..d {
                w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
            }
            // renormalize so that w₀² − ‖w₁‖² = 1 holds to rounding
            let wr = (w[0] * w[0] - dot(&w[1..], &w[1..])).sqrt();
            if !(wr.is_finite() && wr > 0.0) {
                return None;
            }
            w.iter_mut().for_each(|v| *v /= wr);
            soc.push(SocScaling { eta: (sn / zn).sqrt(), w });
        }
        let mut scaling = Self { lp, soc, lambda: Vec::new() };
        scaling.lambda = scaling.apply(cones, z);
        Some(scaling)
    }

    /// `W v`
    pub fn apply(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cones.dim];
        for i in 0..cones.lp {
            out[i] = self.lp[i] * v[i];
        }
        for (k, (o, d)) in cones.socs().enumerate() {
            let sc = &self.soc[k];
            wbar_apply(&sc.w, &v[o..o + d], &mut out[o..o + d], false);
            out[o..o + d].iter_mut().for_each(|x| *x *= sc.eta);
        }
        out
    }

    /// `W⁻¹ v`
    pub fn apply_inv(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cones.dim];
        for i in 0..cones.lp {
            out[i] = v[i] / self.lp[i];
        }
        for (k, (o, d)) in cones.socs().enumerate() {
            let sc = &self.soc[k];
            wbar_apply(&sc.w, &v[o..o + d], &mut out[o..o + d], true);
            out[o..o + d].iter_mut().for_each(|x| *x /= sc.eta);
        }
        out
    }

    /// Dense `W⁻²` block of cone `k`, row-major.
    #[cfg(test)]
    pub fn soc_w2inv(&self, k: usize) -> Vec<f64> {
        let sc = &self.soc[k];
        let d = sc.w.len();
        let mut jw = sc.w.clone();
        jw[1..].iter_mut().for_each(|v| *v = -*v);
        let f = 1.0 / (sc.eta * sc.eta);
        let mut m = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let j = if a == b { if a == 0 { 1.0 } else { -1.0 } } else { 0.0 };
                m[a * d + b] = f * (2.0 * jw[a] * jw[b] - j);
            }
        }
        m
    }

    /// Dense `W²` block of cone `k`, row-major.
    pub fn soc_w2(&self, k: usize) -> Vec<f64> {
        let sc = &self.soc[k];
        let d = sc.w.len();
        let f = sc.eta * sc.eta;
        let mut m = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let j = if a == b { if a == 0 { 1.0 } else { -1.0 } } else { 0.0 };
                m[a * d + b] = f * (2.0 * sc.w[a] * sc.w[b] - j);
            }
        }
        m
    }

    pub fn lp_w2(&self, i: usize) -> f64 {
        self.lp[i] * self.lp[i]
    }
}

/// `W̄ v` (or `W̄⁻¹ v = J W̄ J v` when `inverse`).
fn wbar_apply(w: &[f64], v: &[f64], out: &mut [f64], inverse: bool) {
    let d = w.len();
    let sgn = if inverse { -1.0 } else { 1.0 };
    let w1v1: f64 = dot(&w[1..], &v[1..]);
    out[0] = w[0] * v[0] + sgn * w1v1;
    let coef = sgn * v[0] + w1v1 / (1.0 + w[0]);
    for i in 1..d {
        out[i] = v[i] + coef * w[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cones() -> Cones {
        Cones::new(2, vec![3, 4])
    }

    fn interior(seed: u64) -> Vec<f64> {
        // deterministic pseudo-random interior point
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let c = cones();
        let mut u: Vec<f64> = (0..c.dim).map(|_| next()).collect();
        for i in 0..c.lp {
            u[i] = u[i].abs() + 0.1;
        }
        for (o, d) in c.socs() {
            u[o] = norm(&u[o + 1..o + d]) + 0.05 + u[o].abs();
        }
        u
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let c = cones();
        for seed in 0..50 {
            let s = interior(seed);
            let z = interior(seed + 1000);
            let w = Scaling::new(&c, &s, &z).unwrap();
            let wz = w.apply(&c, &z);
            let winv_s = w.apply_inv(&c, &s);
            for i in 0..c.dim {
                assert!((wz[i] - winv_s[i]).abs() < 1e-10 * (1.0 + wz[i].abs()), "seed {seed} entry {i}");
            }
            let back = w.apply(&c, &w.apply_inv(&c, &s));
            for i in 0..c.dim {
                assert!((back[i] - s[i]).abs() < 1e-10 * (1.0 + s[i].abs()));
            }
        }
    }

    #[test]
    fn dense_w2_blocks_match_operator() {
        let c = cones();
        let s = interior(7);
        let z = interior(8);
        let w = Scaling::new(&c, &s, &z).unwrap();
        for k in 0..c.soc.len() {
            let (o, d) = (c.offsets[k], c.soc[k]);
            let m2 = w.soc_w2(k);
            let m2i = w.soc_w2inv(k);
            // W² z = s on this block
            for a in 0..d {
                let v: f64 = (0..d).map(|b| m2[a * d + b] * z[o + b]).sum();
                assert!((v - s[o + a]).abs() < 1e-9 * (1.0 + s[o + a].abs()));
                let u: f64 = (0..d).map(|b| m2i[a * d + b] * s[o + b]).sum();
                assert!((u - z[o + a]).abs() < 1e-9 * (1.0 + z[o + a].abs()));
            }
        }
    }

    #[test]
    fn division_inverts_product() {
        let c = cones();
        let l = interior(3);
        let v = interior(4);
        let p = c.prod(&l, &v);
        let back = c.div(&l, &p);
        for i in 0..c.dim {
            assert!((back[i] - v[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn step_to_boundary() {
        let c = Cones::new(1, vec![3]);
        let u = [1.0, 2.0, 0.0, 0.0];
        let du = [-1.0, -1.0, 1.0, 0.0];
        // orthant hits at 1; cone: (2−a)² = a² → a = 1
        let a = c.max_step(&u, &du);
        assert!((a - 1.0).abs() < 1e-12);
        let du2 = [0.0, 1.0, 0.0, 0.0];
        assert!(c.max_step(&u, &du2).is_infinite());
    }
}
