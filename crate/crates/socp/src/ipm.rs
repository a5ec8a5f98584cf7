//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling and
//! Mehrotra predictor-corrector steps.

use crate::conic::ConicForm;
use crate::cones::{dot, norm, Scaling};
use crate::error::ProgramError;
use crate::kkt::Kkt;
use crate::program::ConeProgram;
use crate::verify::verify;

/// Iterations without a better merit before the solver gives up.
const STALL_ITERS: usize = 20;
/// A stalled run whose best merit is within this factor of `tol` is reported
/// as [`Status::OptimalInaccurate`].
const INACCURATE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Progress stalled short of `tol` but within a small factor of it.
    OptimalInaccurate,
    /// A Farkas certificate of primal infeasibility was found.
    Infeasible,
    /// A ray of unbounded improvement was found.
    Unbounded,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Feasibility and duality-gap tolerance, relative to problem data.
    pub tol: f64,
    pub max_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Print one progress line per iteration to standard error.
    pub verbose: bool,
}

impl Status {
    /// Whether the returned point is a usable optimum.
    pub fn is_optimal(self) -> bool {
        matches!(self, Status::Optimal | Status::OptimalInaccurate)
    }
}

impl Default for Settings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 100, step_fraction: 0.99, verbose: false }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// `objective·x` of the original (maximization) program.
    pub objective: f64,
    /// Largest scaled constraint violation reported by [`verify`].
    pub max_violation: f64,
    pub iterations: usize,
    /// Relative duality gap at termination.
    pub gap: f64,
    /// Norm of the homogeneous residual per iteration; nonincreasing.
    pub infeasibility_log: Vec<f64>,
    pub detail: String,
}

pub fn solve(p: &ConeProgram, tol: f64, max_iters: usize) -> Result<Solution, ProgramError> {
    solve_with(p, &Settings { tol, max_iters, ..Settings::default() })
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn residuals(f: &ConicForm, it: &Iterate) -> Residuals {
    // r1 = Aᵀy + Gᵀz + cτ
    let mut r1: Vec<f64> = f.c.iter().map(|c| c * it.tau).collect();
    f.a.mul_t_add(&it.y, &mut r1);
    f.g.mul_t_add(&it.z, &mut r1);
    // r2 = −Ax + bτ
    let mut ax = vec![0.0; f.a.nrows];
    f.a.mul(&it.x, &mut ax);
    let r2: Vec<f64> = ax.iter().zip(&f.b).map(|(a, b)| -a + b * it.tau).collect();
    // r3 = −Gx + hτ − s
    let mut gx = vec![0.0; f.g.nrows];
    f.g.mul(&it.x, &mut gx);
    let r3: Vec<f64> = (0..f.g.nrows).map(|i| -gx[i] + f.h[i] * it.tau - it.s[i]).collect();
    let r4 = -dot(&f.c, &it.x) - dot(&f.b, &it.y) - dot(&f.h, &it.z) - it.kappa;
    Residuals { r1, r2, r3, r4 }
}

fn initial_point(f: &ConicForm, kkt: &mut Kkt) -> Option<Iterate> {
    let cones = &f.cones;
    let e = cones.identity();
    let unit = Scaling::new(cones, &e, &e)?;
    kkt.factor(cones, &unit).ok()?;

    // primal: min ‖s‖ s.t. Gx + s = h, Ax = b
    let zero_n = vec![0.0; f.n];
    let (x, _, dz) = kkt.solve(&zero_n, &f.b, &f.h);
    let mut s: Vec<f64> = dz.iter().map(|v| -v).collect();
    let ap = cones.margin(&s);
    if ap <= 0.0 {
        cones.shift(&mut s, 1.0 - ap);
    }

    // dual: min ‖z‖ s.t. Gᵀz + Aᵀy + c = 0
    let neg_c: Vec<f64> = f.c.iter().map(|v| -v).collect();
    let zero_p = vec![0.0; f.a.nrows];
    let zero_m = vec![0.0; f.g.nrows];
    let (_, y, mut z) = kkt.solve(&neg_c, &zero_p, &zero_m);
    let ad = cones.margin(&z);
    if ad <= 0.0 {
        cones.shift(&mut z, 1.0 - ad);
    }
    Some(Iterate { x, y, s, z, tau: 1.0, kappa: 1.0 })
}

pub fn solve_with(p: &ConeProgram, settings: &Settings) -> Result<Solution, ProgramError> {
    p.validate()?;
    let f = ConicForm::from_program(p);
    let cones = &f.cones;
    let tol = settings.tol;
    let mut kkt = Kkt::new(&f);

    let finish = |status: Status, x_scaled: Vec<f64>, iters: usize, gap: f64, log: Vec<f64>, detail: String| {
        let x = x_scaled;
        let objective = p.objective_value(&x);
        let report = verify(p, &x);
        let (status, detail) = if status.is_optimal() && report.max_scaled > 1e-6 {
            (Status::NumericalFailure, format!("converged point violates a constraint by {:.2e}", report.max_scaled))
        } else {
            (status, detail)
        };
        Solution {
            status,
            objective,
            max_violation: report.max_scaled,
            x,
            iterations: iters,
            gap,
            infeasibility_log: log,
            detail,
        }
    };

    let Some(mut it) = initial_point(&f, &mut kkt) else {
        return Ok(finish(
            Status::NumericalFailure,
            vec![0.0; f.n],
            0,
            f64::INFINITY,
            Vec::new(),
            "could not factor the initial system".into(),
        ));
    };

    let b_scale = 1.0 + inf_norm(&f.b).max(inf_norm(&f.h));
    let c_scale = 1.0 + inf_norm(&f.c);
    let nu = cones.degree() as f64;
    let mut log = Vec::new();
    let mut last_gap = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut best_iter = 0;

    for iter in 0..=settings.max_iters {
        let r = residuals(&f, &it);
        let res_norm = norm(&r.r1).max(norm(&r.r2)).max(norm(&r.r3));
        log.push(res_norm.max(r.r4.abs()));

        let tau = it.tau;
        let pres = (inf_norm(&r.r2).max(inf_norm(&r.r3)) / tau) / b_scale;
        let dres = (inf_norm(&r.r1) / tau) / c_scale;
        let pcost = dot(&f.c, &it.x) / tau;
        let dcost = -(dot(&f.b, &it.y) + dot(&f.h, &it.z)) / tau;
        let gap = dot(&it.s, &it.z) / (tau * tau);
        let relgap = gap / pcost.abs().min(dcost.abs()).max(1.0);
        last_gap = relgap;

        let x_now: Vec<f64> = it.x.iter().map(|v| v / tau).collect();
        let merit = pres.max(dres).max(relgap.min(gap));
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, x_now.clone(), relgap));
            best_iter = iter;
        }

        if settings.verbose {
            eprintln!(
                "{iter:3} pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} relgap {relgap:.2e} tau {:.2e} kappa {:.2e} pcost {pcost:.8e}",
                it.tau, it.kappa
            );
        }
        if pres < tol && dres < tol && (gap < tol || relgap < tol) {
            return Ok(finish(Status::Optimal, x_now, iter, relgap, log, String::new()));
        }

        // infeasibility / unboundedness certificates
        let by_hz = dot(&f.b, &it.y) + dot(&f.h, &it.z);
        if by_hz < 0.0 {
            let mut atyz = vec![0.0; f.n];
            f.a.mul_t_add(&it.y, &mut atyz);
            f.g.mul_t_add(&it.z, &mut atyz);
            if inf_norm(&atyz) / -by_hz < tol && it.kappa > it.tau {
                return Ok(finish(Status::Infeasible, x_now, iter, relgap, log, String::new()));
            }
        }
        let cx = dot(&f.c, &it.x);
        if cx < 0.0 {
            let mut ax = vec![0.0; f.a.nrows];
            f.a.mul(&it.x, &mut ax);
            let mut gxs = vec![0.0; f.g.nrows];
            f.g.mul(&it.x, &mut gxs);
            for (g, s) in gxs.iter_mut().zip(&it.s) {
                *g += s;
            }
            if inf_norm(&ax).max(inf_norm(&gxs)) / -cx < tol && it.kappa > it.tau {
                return Ok(finish(Status::Unbounded, x_now, iter, relgap, log, String::new()));
            }
        }
        if iter == settings.max_iters || iter >= best_iter + STALL_ITERS {
            break;
        }

        let Some(w) = Scaling::new(cones, &it.s, &it.z) else {
            return Ok(fallback(&finish, best, iter, log, "iterate left the cone", tol));
        };
        if let Err(e) = kkt.factor(cones, &w) {
            return Ok(fallback(&finish, best, iter, log, &e, tol));
        }

        // direction for the τ column
        let neg_c: Vec<f64> = f.c.iter().map(|v| -v).collect();
        let (dx1, dy1, dz1) = kkt.solve(&neg_c, &f.b, &f.h);
        let denom_base = dot(&f.c, &dx1) + dot(&f.b, &dy1) + dot(&f.h, &dz1);

        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);
        let lambda = &w.lambda;
        let ll = cones.prod(lambda, lambda);

        let direction = |eta: f64, ds_target: &[f64], dk_target: f64| {
            // rhs in the sign convention of Kkt::solve
            let q1: Vec<f64> = r.r1.iter().map(|v| -eta * v).collect();
            let q2: Vec<f64> = r.r2.iter().map(|v| eta * v).collect();
            let wl = w.apply(cones, &cones.div(lambda, ds_target));
            let q3: Vec<f64> = (0..f.g.nrows).map(|i| eta * r.r3[i] - wl[i]).collect();
            let (dx2, dy2, dz2) = kkt.solve(&q1, &q2, &q3);
            let r4 = -eta * r.r4 + dk_target / it.tau;
            let num = r4 + dot(&f.c, &dx2) + dot(&f.b, &dy2) + dot(&f.h, &dz2);
            let den = it.kappa / it.tau - denom_base;
            let dtau = num / den;
            let dx: Vec<f64> = dx2.iter().zip(&dx1).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = dy2.iter().zip(&dy1).map(|(a, b)| a + dtau * b).collect();
            let dz: Vec<f64> = dz2.iter().zip(&dz1).map(|(a, b)| a + dtau * b).collect();
            // ds = W(λ \ d_s − W dz)
            let wdz = w.apply(cones, &dz);
            let inner: Vec<f64> = cones.div(lambda, ds_target).iter().zip(&wdz).map(|(a, b)| a - b).collect();
            let ds = w.apply(cones, &inner);
            let dkappa = (dk_target - it.kappa * dtau) / it.tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };

        let step_len = |dz: &[f64], ds: &[f64], dtau: f64, dkappa: f64| {
            let mut a = cones.max_step(&it.s, ds).min(cones.max_step(&it.z, dz));
            if dtau < 0.0 {
                a = a.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-it.kappa / dkappa);
            }
            a
        };

        // predictor
        let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = step_len(&dz_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let winv_ds = w.apply_inv(cones, &ds_a);
        let w_dz = w.apply(cones, &dz_a);
        let cross = cones.prod(&winv_ds, &w_dz);
        let e = cones.identity();
        let ds_comb: Vec<f64> = (0..f.g.nrows).map(|i| -ll[i] - cross[i] + sigma * mu * e[i]).collect();
        let dk_comb = -it.tau * it.kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(1.0 - sigma, &ds_comb, dk_comb);
        let mut alpha = (settings.step_fraction * step_len(&dz, &ds, dtau, dkappa)).min(1.0);
        // the boundary test above is analytic; guard against rounding onto the boundary
        for _ in 0..40 {
            let s_new: Vec<f64> = it.s.iter().zip(&ds).map(|(v, d)| v + alpha * d).collect();
            let z_new: Vec<f64> = it.z.iter().zip(&dz).map(|(v, d)| v + alpha * d).collect();
            if cones.is_interior(&s_new) && cones.is_interior(&z_new) {
                break;
            }
            alpha *= 0.7;
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Ok(fallback(&finish, best, iter, log, "zero step length", tol));
        }

        for (v, d) in it.x.iter_mut().zip(&dx) {
            *v += alpha * d;
        }
        for (v, d) in it.y.iter_mut().zip(&dy) {
            *v += alpha * d;
        }
        for (v, d) in it.z.iter_mut().zip(&dz) {
            *v += alpha * d;
        }
        for (v, d) in it.s.iter_mut().zip(&ds) {
            *v += alpha * d;
        }
        it.tau += alpha * dtau;
        it.kappa += alpha * dkappa;
        if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
            return Ok(fallback(&finish, best, iter + 1, log, "iterate became non-finite", tol));
        }
    }
    let iters = log.len() - 1;
    let (merit, x, gap) = best.unwrap_or((f64::INFINITY, vec![0.0; f.n], last_gap));
    if merit < tol {
        return Ok(finish(Status::Optimal, x, iters, gap, log, "best iterate after a stall".into()));
    }
    if merit < INACCURATE_FACTOR * tol {
        return Ok(finish(Status::OptimalInaccurate, x, iters, gap, log, format!("stalled at merit {merit:.2e}")));
    }
    Ok(finish(Status::MaxIter, x, iters, gap, log, "iteration limit reached".into()))
}

fn fallback<F>(
    finish: &F,
    best: Option<(f64, Vec<f64>, f64)>,
    iter: usize,
    log: Vec<f64>,
    why: &str,
    tol: f64,
) -> Solution
where
    F: Fn(Status, Vec<f64>, usize, f64, Vec<f64>, String) -> Solution,
{
    let (merit, x, gap) = best.unwrap_or((f64::INFINITY, Vec::new(), f64::INFINITY));
    // an earlier iterate may already meet the tolerance
    let status = if merit < tol {
        Status::Optimal
    } else if merit < INACCURATE_FACTOR * tol {
        Status::OptimalInaccurate
    } else {
        Status::NumericalFailure
    };
    finish(status, x, iter, gap, log, why.to_string())
}
