//! Successive convex approximation of the relay trajectory.
//!
//! Each subproblem is a cone program in scaled units: positions in km,
//! velocities as fractions of `V_max`, accelerations as fractions of `A_max`,
//! rates in Mbit/s and buffer contents in Mbit.

use std::fmt;

use relayplan_socp::{solve, Affine, ConeProgram, ProgramError, SparseRow, Status};
use thiserror::Error;

use crate::channel::{FsoLinkModel, RfLinkModel};
use crate::queue::{self, evolve_queue, QueueTrace, RatePlan};
use crate::scenario::{Bound, ScenarioParams, Trajectory};

const LEN: f64 = 1000.0;
const RATE: f64 = 1e6;
const SOLVER_TOL: f64 = 1e-7;
const SOLVER_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    DelayLimited,
    DelayTolerant,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::DelayLimited => "delay-limited",
            Mode::DelayTolerant => "delay-tolerant",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delay-limited" | "delay_limited" | "limited" => Ok(Mode::DelayLimited),
            "delay-tolerant" | "delay_tolerant" | "tolerant" => Ok(Mode::DelayTolerant),
            _ => Err(format!("unknown mode `{s}` (expected delay-limited or delay-tolerant)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Midpoint,
    Source,
    Destination,
    Sweep,
}

impl std::str::FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midpoint" => Ok(InitMode::Midpoint),
            "source" => Ok(InitMode::Source),
            "destination" => Ok(InitMode::Destination),
            "sweep" => Ok(InitMode::Sweep),
            _ => Err(format!("unknown initializer `{s}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("initial trajectory: {0}")]
    Infeasible(String),
    #[error("subproblem {iteration}: solver returned {status:?} ({detail})")]
    Solver { iteration: usize, status: Status, detail: String },
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    pub init: InitMode,
    /// relative stopping tolerance ε
    pub tol: f64,
    pub max_iters: usize,
}

impl PlanOptions {
    pub fn from_params(p: &ScenarioParams) -> Self {
        Self { init: InitMode::Midpoint, tol: p.sca_tol, max_iters: p.sca_max_iters }
    }
}

/// Column layout of the subproblem variables.
#[derive(Debug, Clone, Copy)]
pub struct VarMap {
    pub n: usize,
    pos: usize,
    vel: usize,
    acc: usize,
    t_s: usize,
    t_d: usize,
    dist: usize,
    q: usize,
    pub total: usize,
}

impl VarMap {
    fn new(n: usize) -> Self {
        let pos = 0;
        let vel = pos + 2 * (n + 2);
        let acc = vel + 2 * (n + 2);
        let t_s = acc + 2 * (n + 1);
        let t_d = t_s + n;
        let dist = t_d + n - 1;
        let q = dist + n;
        Self { n, pos, vel, acc, t_s, t_d, dist, q, total: q + n }
    }

    /// slot `k ∈ 0..=N+1`, component `c`
    pub fn pos(&self, k: usize, c: usize) -> usize {
        self.pos + 2 * k + c
    }

    pub fn vel(&self, k: usize, c: usize) -> usize {
        self.vel + 2 * k + c
    }

    /// slot `k ∈ 0..=N`
    pub fn acc(&self, k: usize, c: usize) -> usize {
        self.acc + 2 * k + c
    }

    /// slot `k ∈ 1..=N`
    pub fn t_s(&self, k: usize) -> usize {
        self.t_s + k - 1
    }

    /// slot `k ∈ 2..=N`
    pub fn t_d(&self, k: usize) -> usize {
        self.t_d + k - 2
    }

    pub fn dist(&self, k: usize) -> usize {
        self.dist + k - 1
    }

    pub fn q(&self, k: usize) -> usize {
        self.q + k - 1
    }
}

/// Constraint counts by family. The first nine fields are the model's own
/// tally; the rest are auxiliary rows introduced by the cone formulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub kinematics: usize,
    pub acceleration: usize,
    pub velocity: usize,
    pub fso_rate: usize,
    pub rf_rate: usize,
    pub causality: usize,
    pub queue_nonneg: usize,
    pub queue_cap: usize,
    pub delay: usize,
    pub velocity_boundary: usize,
    pub rate_nonneg: usize,
    pub fso_distance: usize,
    pub queue_recursion: usize,
    pub endpoints: usize,
    /// implied cap `Q'_k ≤ k·δt·R_FSO(h)` used in place of an unbounded buffer
    pub queue_implied: usize,
}

impl Census {
    pub fn core_total(&self) -> usize {
        self.kinematics
            + self.acceleration
            + self.velocity
            + self.fso_rate
            + self.rf_rate
            + self.causality
            + self.queue_nonneg
            + self.queue_cap
            + self.delay
    }

    pub fn total(&self) -> usize {
        self.core_total()
            + self.velocity_boundary
            + self.rate_nonneg
            + self.fso_distance
            + self.queue_recursion
            + self.endpoints
            + self.queue_implied
    }
}

pub struct Subproblem {
    pub program: ConeProgram,
    pub vars: VarMap,
    pub census: Census,
}

fn row<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> SparseRow {
    SparseRow::from_pairs(pairs)
}

/// Builds the convex restriction of the planning problem around `reference`.
pub fn build_subproblem(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    reference: &Trajectory,
    mode: Mode,
) -> Result<Subproblem, PlanError> {
    let n = p.num_slots;
    if reference.num_slots() != n {
        return Err(PlanError::Infeasible(format!(
            "reference has {} slots, scenario has {n}",
            reference.num_slots()
        )));
    }
    let v = VarMap::new(n);
    let dt = p.slot_s;
    let mut prog = ConeProgram::new(v.total);
    let mut census = Census::default();

    for k in 2..=n {
        prog.objective[v.t_d(k)] = 1.0 / (n - 1) as f64;
    }

    let kv = p.a_max * dt / p.v_max;
    let kp_v = p.v_max * dt / LEN;
    let kp_a = p.a_max * dt * dt / (2.0 * LEN);
    for k in 0..=n {
        for c in 0..2 {
            prog.add_eq(row([(v.vel(k + 1, c), 1.0), (v.vel(k, c), -1.0), (v.acc(k, c), -kv)]), 0.0);
            prog.add_eq(
                row([
                    (v.pos(k + 1, c), 1.0),
                    (v.pos(k, c), -1.0),
                    (v.vel(k, c), -kp_v),
                    (v.acc(k, c), -kp_a),
                ]),
                0.0,
            );
            census.kinematics += 2;
        }
    }
    let unit = |a: usize, b: usize| {
        (vec![Affine::new(row([(a, 1.0)]), 0.0), Affine::new(row([(b, 1.0)]), 0.0)], Affine::constant(1.0))
    };
    for k in 0..=n {
        let (rows, bound) = unit(v.acc(k, 0), v.acc(k, 1));
        prog.add_soc(rows, bound);
        census.acceleration += 1;
    }
    for k in 0..=n + 1 {
        let (rows, bound) = unit(v.vel(k, 0), v.vel(k, 1));
        prog.add_soc(rows, bound);
        if k == 0 || k == n + 1 {
            census.velocity_boundary += 1;
        } else {
            census.velocity += 1;
        }
    }
    if let Some(e) = &p.endpoints {
        for c in 0..2 {
            prog.add_eq(row([(v.pos(0, c), 1.0)]), e.q_i[c] / LEN);
            prog.add_eq(row([(v.pos(n + 1, c), 1.0)]), e.q_f[c] / LEN);
            prog.add_eq(row([(v.vel(0, c), 1.0)]), e.v_i[c] / p.v_max);
            prog.add_eq(row([(v.vel(n + 1, c), 1.0)]), e.v_f[c] / p.v_max);
            census.endpoints += 4;
        }
    }

    // source hop: ‖q − q_S‖ ≤ d and t_S below the tangent of the true rate in d
    let src = [p.src_pos[0] / LEN, p.src_pos[1] / LEN];
    let src_h = (p.altitude - p.src_pos[2]) / LEN;
    for k in 1..=n {
        prog.add_soc(
            vec![
                Affine::new(row([(v.pos(k, 0), 1.0)]), -src[0]),
                Affine::new(row([(v.pos(k, 1), 1.0)]), -src[1]),
                Affine::constant(src_h),
            ],
            Affine::new(row([(v.dist(k), 1.0)]), 0.0),
        );
        census.fso_distance += 1;
        let d_ref = dist3(reference.point3(k, p.altitude), p.src_pos);
        let (intercept, slope) = fso.tangent_at(d_ref);
        prog.add_le(row([(v.t_s(k), 1.0), (v.dist(k), -slope * LEN / RATE)]), intercept / RATE);
        census.fso_rate += 1;
        prog.add_le(row([(v.t_s(k), -1.0)]), 0.0);
        census.rate_nonneg += 1;
    }

    // destination hop: t_D + c·B^k·‖q − q_D‖² ≤ c·(A^k + B^k·z_k) with z in m²
    let dst = [p.dst_pos[0] / LEN, p.dst_pos[1] / LEN];
    let dst_h2 = (p.altitude - p.dst_pos[2]).powi(2);
    let c_rf = rf.bandwidth_hz / RATE;
    for k in 2..=n {
        let z_k = dist3_sq(reference.point3(k, p.altitude), p.dst_pos);
        let (a_k, b_k) = rf.linearization_at_sq(z_k);
        let w = c_rf * b_k * LEN * LEN;
        let dd = dst[0] * dst[0] + dst[1] * dst[1];
        let rhs = c_rf * (a_k + b_k * z_k - b_k * dst_h2) - w * dd;
        prog.add_quad(
            vec![v.pos(k, 0), v.pos(k, 1)],
            vec![w, 0.0, 0.0, w],
            row([(v.t_d(k), 1.0), (v.pos(k, 0), -2.0 * w * dst[0]), (v.pos(k, 1), -2.0 * w * dst[1])]),
            rhs,
        );
        census.rf_rate += 1;
        prog.add_le(row([(v.t_d(k), -1.0)]), 0.0);
        census.rate_nonneg += 1;
    }

    // buffer: Q'[1] = t_S[1]δt, Q'[k] = Q'[k−1] + (t_S[k] − t_D[k])δt
    prog.add_eq(row([(v.q(1), 1.0), (v.t_s(1), -dt)]), 0.0);
    census.queue_recursion += 1;
    for k in 2..=n {
        prog.add_eq(row([(v.q(k), 1.0), (v.q(k - 1), -1.0), (v.t_s(k), -dt), (v.t_d(k), dt)]), 0.0);
        census.queue_recursion += 1;
        prog.add_le(row([(v.t_d(k), 1.0), (v.t_s(k), -1.0), (v.q(k - 1), -1.0 / dt)]), 0.0);
        census.causality += 1;
    }
    // no hop can beat the FSO rate straight above the source, so an unbounded
    // buffer still never holds more than k·δt·R_FSO(h); the solver stalls on
    // the open queue direction without this row
    let r_top = fso.rate_at(src_h * LEN);
    for k in 1..=n {
        prog.add_le(row([(v.q(k), -1.0)]), 0.0);
        census.queue_nonneg += 1;
        match p.buffer_bits {
            Bound::Finite(cap) => {
                prog.add_le(row([(v.q(k), 1.0)]), cap / RATE);
                census.queue_cap += 1;
            }
            Bound::Infinite => {
                prog.add_le(row([(v.q(k), 1.0)]), k as f64 * dt * r_top / RATE);
                census.queue_implied += 1;
            }
        }
    }
    if mode == Mode::DelayLimited {
        if let Bound::Finite(l_req) = p.delay_req_slots {
            let mut pairs: Vec<(usize, f64)> = (1..=n).map(|k| (v.q(k), 1.0)).collect();
            pairs.extend((1..=n).map(|k| (v.t_s(k), -l_req * dt)));
            prog.add_le(row(pairs), 0.0);
            census.delay += 1;
        }
    }
    Ok(Subproblem { program: prog, vars: v, census })
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    dist3_sq(a, b).sqrt()
}

fn dist3_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Hover at a point on the S-D axis, or a constant-speed sweep from S to D.
pub fn initialize_trajectory(p: &ScenarioParams, init: InitMode) -> Result<Trajectory, PlanError> {
    let n = p.num_slots;
    if let Some(e) = &p.endpoints {
        let hover_ok = e.q_i[..2] == e.q_f[..2] && e.v_i[..2] == [0.0, 0.0] && e.v_f[..2] == [0.0, 0.0];
        if hover_ok {
            return Ok(Trajectory::hover([e.q_i[0], e.q_i[1]], n, p.slot_s));
        }
        return kinematic_feasible_point(p);
    }
    let l = p.link_length();
    Ok(match init {
        InitMode::Midpoint => Trajectory::hover(p.axis_point(0.5 * l), n, p.slot_s),
        InitMode::Source => Trajectory::hover(p.axis_point(0.0), n, p.slot_s),
        InitMode::Destination => Trajectory::hover(p.axis_point(l), n, p.slot_s),
        InitMode::Sweep => {
            let speed = (l / ((n + 1) as f64 * p.slot_s)).min(p.v_max);
            let u = p.axis();
            Trajectory::integrate(p.axis_point(0.0), [speed * u[0], speed * u[1]], vec![[0.0; 2]; n + 1], p.slot_s)
        }
    })
}

/// Any trajectory meeting the endpoint and flight constraints, found by
/// solving the kinematic constraints alone.
fn kinematic_feasible_point(p: &ScenarioParams) -> Result<Trajectory, PlanError> {
    let n = p.num_slots;
    let reference = Trajectory::hover(p.axis_point(0.5 * p.link_length()), n, p.slot_s);
    let (fso, rf) = dummy_models();
    let mut sub = build_subproblem(p, &fso, &rf, &reference, Mode::DelayTolerant)?;
    sub.program.objective.iter_mut().for_each(|c| *c = 0.0);
    let sol = solve(&sub.program, SOLVER_TOL, SOLVER_ITERS)?;
    match sol.status {
        Status::Optimal | Status::OptimalInaccurate => Ok(extract_trajectory(p, &sub.vars, &sol.x)),
        Status::Infeasible => Err(PlanError::Infeasible(
            "endpoint constraints cannot be met within the horizon at the speed and acceleration limits".into(),
        )),
        status => Err(PlanError::Solver { iteration: 0, status, detail: sol.detail }),
    }
}

fn dummy_models() -> (FsoLinkModel, RfLinkModel) {
    (
        FsoLinkModel {
            beta_per_m: 1e-4,
            k1: 10.0,
            k2: 2e-4,
            bandwidth_hz: 1e6,
            asnr_linear: 1.0,
            apr: 0.1,
            mu_star: None,
        },
        RfLinkModel {
            gamma0: 1e10,
            alpha: 1.0,
            bandwidth_hz: 1e6,
            los_c: 10.0,
            los_d: 0.6,
            nlos_atten: 0.2,
            los_prob_bar: 1.0,
        },
    )
}

/// Rebuilds a kinematically exact trajectory from the slot-0 state and the
/// accelerations of a subproblem solution.
pub fn extract_trajectory(p: &ScenarioParams, v: &VarMap, x: &[f64]) -> Trajectory {
    let n = v.n;
    let pos0 = [x[v.pos(0, 0)] * LEN, x[v.pos(0, 1)] * LEN];
    let clip = |a: [f64; 2], limit: f64| {
        let m = a[0].hypot(a[1]);
        if m > limit {
            [a[0] * limit / m, a[1] * limit / m]
        } else {
            a
        }
    };
    let vel0 = clip([x[v.vel(0, 0)] * p.v_max, x[v.vel(0, 1)] * p.v_max], p.v_max);
    let acc: Vec<[f64; 2]> =
        (0..=n).map(|k| clip([x[v.acc(k, 0)] * p.a_max, x[v.acc(k, 1)] * p.a_max], p.a_max)).collect();
    Trajectory::integrate(pos0, vel0, acc, p.slot_s)
}

/// Clips a candidate plan onto link capacities, causality and the buffer limit.
pub fn repair_plan(t_s: &[f64], t_d: &[f64], r_fso: &[f64], r_rf: &[f64], buffer: Bound, slot_s: f64) -> RatePlan {
    let n = t_s.len();
    let cap = buffer.finite().unwrap_or(f64::INFINITY);
    let mut c_sr = Vec::with_capacity(n);
    let mut c_rd = Vec::with_capacity(n.saturating_sub(1));
    let mut q = 0.0_f64;
    for k in 1..=n {
        let mut s = t_s[k - 1].clamp(0.0, r_fso[k - 1].max(0.0));
        let d = if k == 1 { 0.0 } else { t_d[k - 2].clamp(0.0, r_rf[k - 1].max(0.0)).min(q / slot_s + s) };
        s = s.min(((cap - q) / slot_s + d).max(0.0));
        q = (q + (s - d) * slot_s).max(0.0);
        c_sr.push(s);
        if k > 1 {
            c_rd.push(d);
        }
    }
    RatePlan { c_sr, c_rd }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub plan: RatePlan,
    pub trace: QueueTrace,
    pub objective_bps: f64,
}

fn delay_ok(plan: &RatePlan, trace: &QueueTrace, l_req: f64, slot_s: f64) -> bool {
    let sq: f64 = trace.q_bits.iter().sum();
    let ss: f64 = plan.c_sr.iter().sum::<f64>() * slot_s;
    sq <= l_req * ss * (1.0 + 1e-9) + 1e-6
}

/// Best rate plan along a fixed trajectory under the true link rates.
///
/// Without an active delay limit the greedy plan is optimal. With one, the
/// greedy plan is used when it already meets the limit and otherwise the
/// rate-only linear program is solved.
pub fn evaluate_plan(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    traj: &Trajectory,
    mode: Mode,
) -> Result<Evaluation, PlanError> {
    let (r_fso, r_rf) = queue::link_capacities(p, traj, fso, rf);
    evaluate_caps(&r_fso, &r_rf, p.buffer_bits, active_delay(p, mode), p.slot_s)
}

fn active_delay(p: &ScenarioParams, mode: Mode) -> Option<f64> {
    match mode {
        Mode::DelayLimited => p.delay_req_slots.finite(),
        Mode::DelayTolerant => None,
    }
}

pub fn evaluate_caps(
    r_fso: &[f64],
    r_rf: &[f64],
    buffer: Bound,
    delay_req: Option<f64>,
    slot_s: f64,
) -> Result<Evaluation, PlanError> {
    let greedy = queue::greedy_rates_from_caps(r_fso, r_rf, buffer, slot_s);
    let trace = evolve_queue(&greedy, slot_s).expect("greedy plans are causal");
    let needs_lp = match delay_req {
        Some(l) => !delay_ok(&greedy, &trace, l, slot_s),
        None => false,
    };
    if !needs_lp {
        return Ok(Evaluation { objective_bps: trace.throughput_bps, plan: greedy, trace });
    }
    let (t_s, t_d) = rate_lp(r_fso, r_rf, buffer, delay_req, slot_s)?;
    let plan = repair_plan(&t_s, &t_d, r_fso, r_rf, buffer, slot_s);
    let trace = evolve_queue(&plan, slot_s).expect("repaired plans are causal");
    Ok(Evaluation { objective_bps: trace.throughput_bps, plan, trace })
}

/// Rate-only linear program along fixed capacities; returns `(t_S, t_D)` in bps.
pub fn rate_lp(
    r_fso: &[f64],
    r_rf: &[f64],
    buffer: Bound,
    delay_req: Option<f64>,
    slot_s: f64,
) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
    let n = r_fso.len();
    let dt = slot_s;
    let ts = |k: usize| k - 1;
    let td = |k: usize| n + k - 2;
    let qv = |k: usize| 2 * n - 1 + k - 1;
    let mut prog = ConeProgram::new(3 * n - 1);
    for k in 2..=n {
        prog.objective[td(k)] = 1.0 / (n - 1) as f64;
    }
    for k in 1..=n {
        prog.add_le(row([(ts(k), 1.0)]), r_fso[k - 1].max(0.0) / RATE);
        prog.add_le(row([(ts(k), -1.0)]), 0.0);
        prog.add_le(row([(qv(k), -1.0)]), 0.0);
        if let Bound::Finite(cap) = buffer {
            prog.add_le(row([(qv(k), 1.0)]), cap / RATE);
        }
    }
    prog.add_eq(row([(qv(1), 1.0), (ts(1), -dt)]), 0.0);
    for k in 2..=n {
        prog.add_le(row([(td(k), 1.0)]), r_rf[k - 1].max(0.0) / RATE);
        prog.add_le(row([(td(k), -1.0)]), 0.0);
        prog.add_eq(row([(qv(k), 1.0), (qv(k - 1), -1.0), (ts(k), -dt), (td(k), dt)]), 0.0);
        prog.add_le(row([(td(k), 1.0), (ts(k), -1.0), (qv(k - 1), -1.0 / dt)]), 0.0);
    }
    if let Some(l_req) = delay_req {
        let mut pairs: Vec<(usize, f64)> = (1..=n).map(|k| (qv(k), 1.0)).collect();
        pairs.extend((1..=n).map(|k| (ts(k), -l_req * dt)));
        prog.add_le(row(pairs), 0.0);
    }
    let sol = solve(&prog, SOLVER_TOL, SOLVER_ITERS)?;
    if !sol.status.is_optimal() {
        return Err(PlanError::Solver { iteration: 0, status: sol.status, detail: sol.detail });
    }
    let t_s = (1..=n).map(|k| sol.x[ts(k)] * RATE).collect();
    let t_d = (2..=n).map(|k| sol.x[td(k)] * RATE).collect();
    Ok((t_s, t_d))
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub plan: RatePlan,
    pub trace: QueueTrace,
    /// true average throughput Φ of `plan`
    pub objective_bps: f64,
    pub iterations: usize,
    /// subproblem optimum per iteration, bps
    pub objective_log: Vec<f64>,
    /// true Φ of each iterate, bps
    pub true_log: Vec<f64>,
    pub mode: Mode,
    /// subproblem optimum of the returned iterate, bps
    pub surrogate_objective_bps: f64,
    pub surrogate_gap: f64,
    pub census: Census,
}

/// Runs the SCA loop with options taken from the scenario.
pub fn optimize(p: &ScenarioParams, fso: &FsoLinkModel, rf: &RfLinkModel, mode: Mode) -> Result<PlanResult, PlanError> {
    optimize_with(p, fso, rf, mode, &PlanOptions::from_params(p))
}

pub fn optimize_with(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    mode: Mode,
    opts: &PlanOptions,
) -> Result<PlanResult, PlanError> {
    let mut reference = initialize_trajectory(p, opts.init)?;
    optimize_from(p, fso, rf, mode, opts, &mut reference)
}

/// Runs the SCA loop starting from a given reference trajectory.
pub fn optimize_from(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    mode: Mode,
    opts: &PlanOptions,
    reference: &mut Trajectory,
) -> Result<PlanResult, PlanError> {
    let mut objective_log = Vec::new();
    let mut true_log = Vec::new();
    let mut best: Option<(Trajectory, Evaluation, f64, Census)> = None;
    let mut prev = 0.0_f64;

    for iteration in 1..=opts.max_iters.max(1) {
        let sub = build_subproblem(p, fso, rf, reference, mode)?;
        let sol = solve(&sub.program, SOLVER_TOL, SOLVER_ITERS)?;
        if !sol.status.is_optimal() {
            return Err(PlanError::Solver { iteration, status: sol.status, detail: sol.detail });
        }
        let surrogate = sol.objective * RATE;
        let traj = extract_trajectory(p, &sub.vars, &sol.x);
        let eval = evaluate_plan(p, fso, rf, &traj, mode)?;
        objective_log.push(surrogate);
        true_log.push(eval.objective_bps);

        let better = best.as_ref().map_or(true, |b| eval.objective_bps > b.1.objective_bps);
        if better {
            best = Some((traj.clone(), eval, surrogate, sub.census));
        }
        let gain = surrogate - prev;
        prev = surrogate;
        *reference = traj;
        if gain < (opts.tol * surrogate.abs()).max(1.0) {
            break;
        }
    }

    let (trajectory, eval, surrogate, census) = best.expect("at least one iteration runs");
    Ok(PlanResult {
        trajectory,
        iterations: objective_log.len(),
        objective_bps: eval.objective_bps,
        surrogate_gap: eval.objective_bps - surrogate,
        surrogate_objective_bps: surrogate,
        plan: eval.plan,
        trace: eval.trace,
        objective_log,
        true_log,
        mode,
        census,
    })
}

/// Checks a trajectory and plan against the flight limits, true link rates,
/// causality, buffer and (when active) the delay limit. Shares no code with
/// the subproblem builder.
pub fn verify_plan(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    traj: &Trajectory,
    plan: &RatePlan,
    mode: Mode,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = traj.check(p.v_max, p.a_max, 1e-6) {
        out.push(e);
    }
    if let Some(e) = &p.endpoints {
        let n = traj.num_slots();
        let near = |a: [f64; 2], b: &[f64; 3]| (a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-3;
        if !near(traj.pos[0], &e.q_i) || !near(traj.pos[n + 1], &e.q_f) {
            out.push("endpoint positions not met".into());
        }
        if !near(traj.vel[0], &e.v_i) || !near(traj.vel[n + 1], &e.v_f) {
            out.push("endpoint velocities not met".into());
        }
    }
    if plan.num_slots() != traj.num_slots() {
        out.push("plan and trajectory lengths differ".into());
        return out;
    }
    let n = traj.num_slots();
    let r_fso: Vec<f64> = (1..=n)
        .map(|k| {
            let q = [traj.pos[k][0], traj.pos[k][1], p.altitude];
            fso.rate(q, p.src_pos)
        })
        .collect();
    let r_rf: Vec<f64> = (1..=n)
        .map(|k| {
            let q = [traj.pos[k][0], traj.pos[k][1], p.altitude];
            rf.rate(q, p.dst_pos)
        })
        .collect();
    out.extend(queue::check_plan(plan, &r_fso, &r_rf, p.buffer_bits, p.slot_s, 1e-6));
    if let Some(l_req) = active_delay(p, mode) {
        let mut q = 0.0;
        let mut sq = 0.0;
        for k in 1..=n {
            q += (plan.c_sr[k - 1] - plan.rd(k)) * p.slot_s;
            sq += q;
        }
        let ss: f64 = plan.c_sr.iter().sum::<f64>() * p.slot_s;
        if sq > l_req * ss * (1.0 + 1e-6) + 1e-3 {
            out.push(format!("average delay {:.4} slots above the limit {l_req}", sq / ss.max(1e-300)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_layout_is_contiguous() {
        let v = VarMap::new(5);
        assert_eq!(v.pos(6, 1) + 1, v.vel(0, 0));
        assert_eq!(v.vel(6, 1) + 1, v.acc(0, 0));
        assert_eq!(v.acc(5, 1) + 1, v.t_s(1));
        assert_eq!(v.t_s(5) + 1, v.t_d(2));
        assert_eq!(v.t_d(5) + 1, v.dist(1));
        assert_eq!(v.dist(5) + 1, v.q(1));
        assert_eq!(v.q(5) + 1, v.total);
    }

    #[test]
    fn repair_respects_buffer() {
        let plan = repair_plan(&[10.0, 10.0, 10.0], &[0.0, 0.0], &[10.0; 3], &[5.0; 3], Bound::Finite(15.0), 1.0);
        assert_eq!(plan.c_sr, vec![10.0, 5.0, 0.0]);
    }
}
