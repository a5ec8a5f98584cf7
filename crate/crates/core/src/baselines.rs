//! Reference schemes: a relay hovering at the max-min point, and a data
//! ferry that loads near the source, flies silently and unloads near the
//! destination.

use thiserror::Error;

use crate::channel::{FsoLinkModel, RfLinkModel};
use crate::queue::{self, evolve_queue, QueueTrace, RatePlan};
use crate::scenario::{Bound, ScenarioParams, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("ferry ranges d1 = {d1} m and d2 = {d2} m leave no cruise leg on a {l} m link")]
    Ranges { d1: f64, d2: f64, l: f64 },
    #[error("one ferry cycle needs {need} slots but the horizon has {have}")]
    Horizon { need: usize, have: usize },
}

#[derive(Debug, Clone)]
pub struct StaticResult {
    /// hover distance from the source along the S-D axis, meters
    pub x_s: f64,
    pub phi: f64,
    pub trajectory: Trajectory,
    pub plan: RatePlan,
    pub trace: QueueTrace,
}

fn axis_rates(p: &ScenarioParams, fso: &FsoLinkModel, rf: &RfLinkModel, s: f64) -> (f64, f64) {
    let q = p.axis_point(s);
    let q3 = [q[0], q[1], p.altitude];
    (fso.rate(q3, p.src_pos), rf.rate(q3, p.dst_pos))
}

/// Hover point maximizing `min(R_FSO, R_RF)` on a 1 m grid, evaluated with an
/// unbounded buffer.
pub fn static_relay(p: &ScenarioParams, fso: &FsoLinkModel, rf: &RfLinkModel) -> StaticResult {
    let l = p.link_length();
    let steps = l.floor() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=steps {
        let s = i as f64;
        let (a, b) = axis_rates(p, fso, rf, s);
        let m = a.min(b);
        if m > best.1 {
            best = (s, m);
        }
    }
    let x_s = best.0;
    let trajectory = Trajectory::hover(p.axis_point(x_s), p.num_slots, p.slot_s);
    let plan = queue::greedy_rates(p, &trajectory, fso, rf, Bound::Infinite);
    let trace = evolve_queue(&plan, p.slot_s).expect("greedy plans are causal");
    StaticResult { x_s, phi: trace.throughput_bps, trajectory, plan, trace }
}

/// Rest-to-rest move over `distance` meters in the fewest whole slots:
/// `k_a` slots of constant acceleration, a coast, and `k_a` slots of braking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    /// slot transitions from departure to arrival
    pub slots: usize,
    pub accel_slots: usize,
    /// acceleration magnitude actually used, m/s²
    pub accel: f64,
}

pub fn cruise_leg(distance: f64, v_max: f64, a_max: f64, dt: f64) -> Leg {
    if distance <= 0.0 {
        return Leg { slots: 0, accel_slots: 0, accel: 0.0 };
    }
    let reach = |k: usize, ka: usize| {
        let a = a_max.min(v_max / (ka as f64 * dt));
        a * (ka * (k - ka)) as f64 * dt * dt
    };
    let mut k = 2;
    loop {
        let best = (1..=k / 2).map(|ka| (ka, reach(k, ka))).fold((0, 0.0), |m, e| if e.1 > m.1 { e } else { m });
        if best.1 >= distance * (1.0 - 1e-12) {
            let ka = best.0;
            let accel = distance / ((ka * (k - ka)) as f64 * dt * dt);
            return Leg { slots: k, accel_slots: ka, accel };
        }
        k += 1;
    }
}

fn leg_accels(leg: &Leg, dir: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; leg.slots];
    for i in 0..leg.accel_slots {
        out[i] = [leg.accel * dir[0], leg.accel * dir[1]];
        out[leg.slots - 1 - i] = [-leg.accel * dir[0], -leg.accel * dir[1]];
    }
    out
}

#[derive(Debug, Clone)]
pub struct FerryResult {
    pub phi: f64,
    pub cycles: usize,
    pub leg: Leg,
    /// dwell slots at the load point, one entry per cycle
    pub load_slots: Vec<usize>,
    pub unload_slots: Vec<usize>,
    pub trajectory: Trajectory,
    pub plan: RatePlan,
    pub trace: QueueTrace,
}

impl FerryResult {
    pub fn describe(&self) -> String {
        format!(
            "cycles={} leg_slots={} accel_slots={} accel_mps2={:.4} load_slots={:?} unload_slots={:?}",
            self.cycles, self.leg.slots, self.leg.accel_slots, self.leg.accel, self.load_slots, self.unload_slots
        )
    }
}

enum Phase {
    Load(usize, f64),
    Unload(usize),
    Leg([f64; 2]),
}

/// Data ferrying with dwell points on the S-D axis at `d1` from the source and
/// `d2` from the destination, evaluated with an unbounded buffer.
pub fn data_ferry(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    d1: f64,
    d2: f64,
) -> Result<FerryResult, BaselineError> {
    let l = p.link_length();
    if !(d1 >= 0.0 && d2 >= 0.0 && d1 + d2 < l) {
        return Err(BaselineError::Ranges { d1, d2, l });
    }
    let n = p.num_slots;
    let leg = cruise_leg(l - d1 - d2, p.v_max, p.a_max, p.slot_s);
    let flight = leg.slots - 1;
    if 2 + flight > n {
        return Err(BaselineError::Horizon { need: 2 + flight, have: n });
    }
    let (r_load, _) = axis_rates(p, fso, rf, d1);
    let (_, r_unload) = axis_rates(p, fso, rf, l - d2);
    let dt = p.slot_s;

    let mut best: Option<FerryResult> = None;
    let mut m = 1;
    while 2 * m + (2 * m - 1) * flight <= n {
        let budget = n - (2 * m - 1) * flight;
        let mut phases = Vec::new();
        let mut loads = Vec::new();
        let mut unloads = Vec::new();
        for c in 0..m {
            let w = budget / m + usize::from(c < budget % m);
            // the first slot of the horizon cannot forward anything, which
            // only matters if the first cycle is unload-limited
            let (t_l, target) = (1..w)
                .map(|t| {
                    let t_u = w - t;
                    (t, (t as f64 * r_load).min(t_u as f64 * r_unload) * dt)
                })
                .fold((1, f64::NEG_INFINITY), |a, e| if e.1 > a.1 { e } else { a });
            loads.push(t_l);
            unloads.push(w - t_l);
            phases.push(Phase::Load(t_l, target));
            phases.push(Phase::Leg(p.axis()));
            phases.push(Phase::Unload(w - t_l));
            if c + 1 < m {
                let u = p.axis();
                phases.push(Phase::Leg([-u[0], -u[1]]));
            }
        }
        let result = build_ferry(p, fso, rf, &phases, &leg, d1, m, loads, unloads);
        if best.as_ref().map_or(true, |b| result.phi > b.phi) {
            best = Some(result);
        }
        m += 1;
    }
    Ok(best.expect("the horizon fits at least one cycle"))
}

#[allow(clippy::too_many_arguments)]
fn build_ferry(
    p: &ScenarioParams,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    phases: &[Phase],
    leg: &Leg,
    d1: f64,
    cycles: usize,
    load_slots: Vec<usize>,
    unload_slots: Vec<usize>,
) -> FerryResult {
    let n = p.num_slots;
    let dt = p.slot_s;
    // acc[k] moves the relay from slot k to slot k+1; dwell phases count the
    // arrival slot, so each leg adds `slots − 1` in-flight slots
    let mut acc: Vec<[f64; 2]> = Vec::with_capacity(n + 1);
    let mut role: Vec<Option<(bool, f64)>> = Vec::with_capacity(n);
    for ph in phases {
        match *ph {
            Phase::Load(t, target) => {
                acc.extend(std::iter::repeat([0.0; 2]).take(t.saturating_sub(1)));
                role.extend(std::iter::repeat(Some((true, target))).take(t));
            }
            Phase::Unload(t) => {
                acc.extend(std::iter::repeat([0.0; 2]).take(t.saturating_sub(1)));
                role.extend(std::iter::repeat(Some((false, 0.0))).take(t));
            }
            Phase::Leg(dir) => {
                acc.extend(leg_accels(leg, dir));
                role.extend(std::iter::repeat(None).take(leg.slots - 1));
            }
        }
    }
    acc.resize(n + 1, [0.0; 2]);
    role.resize(n, None);
    // slot 1 is the first dwell slot; slot 0 holds the same point at rest
    let mut full_acc = vec![[0.0; 2]];
    full_acc.extend_from_slice(&acc[..n]);
    let trajectory = Trajectory::integrate(p.axis_point(d1), [0.0; 2], full_acc, dt);

    let mut c_sr = Vec::with_capacity(n);
    let mut c_rd = Vec::with_capacity(n - 1);
    let mut q = 0.0;
    let mut loaded = 0.0;
    let mut last_target = f64::NAN;
    for k in 1..=n {
        let pt = trajectory.point3(k, p.altitude);
        let (s, d) = match role[k - 1] {
            Some((true, target)) => {
                if target != last_target {
                    loaded = 0.0;
                    last_target = target;
                }
                let s = fso.rate(pt, p.src_pos).min(((target - loaded) / dt).max(0.0));
                loaded += s * dt;
                (s, 0.0)
            }
            Some((false, _)) => {
                last_target = f64::NAN;
                let d = if k == 1 { 0.0 } else { rf.rate(pt, p.dst_pos).min(q / dt) };
                (0.0, d)
            }
            None => {
                last_target = f64::NAN;
                (0.0, 0.0)
            }
        };
        q += (s - d) * dt;
        c_sr.push(s);
        if k > 1 {
            c_rd.push(d);
        }
    }
    let plan = RatePlan { c_sr, c_rd };
    let trace = evolve_queue(&plan, dt).expect("ferry plans only forward buffered bits");
    FerryResult {
        phi: trace.throughput_bps,
        cycles,
        leg: *leg,
        load_slots,
        unload_slots,
        trajectory,
        plan,
        trace,
    }
}
