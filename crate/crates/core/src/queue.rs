//! Relay buffer dynamics and delay metrics.
//!
//! Slot indices in comments are 1-based as in the rate plan: `c_sr[0]` is
//! slot 1 and `c_rd[0]` is slot 2, since a decode-and-forward relay cannot
//! send anything in the slot it first receives.

use std::fmt::Write as _;

use thiserror::Error;

use crate::channel::{FsoLinkModel, RfLinkModel};
use crate::scenario::{Bound, ScenarioParams, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("queue goes negative at slot {slot}: {bits:.6e} bits")]
    Negative { slot: usize, bits: f64 },
    #[error("plan has {c_sr} source-side and {c_rd} destination-side rates; expected N and N-1")]
    Shape { c_sr: usize, c_rd: usize },
    #[error("negative or non-finite rate at slot {0}")]
    BadRate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePlan {
    /// bps, slots `1..=N`
    pub c_sr: Vec<f64>,
    /// bps, slots `2..=N`
    pub c_rd: Vec<f64>,
}

impl RatePlan {
    pub fn num_slots(&self) -> usize {
        self.c_sr.len()
    }

    /// Destination-side rate at 1-based slot `n`, zero in slot 1.
    pub fn rd(&self, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            self.c_rd[n - 2]
        }
    }

    fn check_shape(&self) -> Result<(), QueueError> {
        let n = self.c_sr.len();
        if n < 1 || self.c_rd.len() + 1 != n {
            return Err(QueueError::Shape { c_sr: n, c_rd: self.c_rd.len() });
        }
        for (i, v) in self.c_sr.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(QueueError::BadRate(i + 1));
            }
        }
        for (i, v) in self.c_rd.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(QueueError::BadRate(i + 2));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrace {
    /// bits held after each slot `1..=N`
    pub q_bits: Vec<f64>,
    /// average end-to-end rate over slots `2..=N`
    pub throughput_bps: f64,
    /// Little's-law delay in slots; `None` when nothing arrives
    pub avg_delay_slots: Option<f64>,
    /// delay minus the one decode-and-forward slot
    pub avg_delay_adjusted: Option<f64>,
    pub arrival_rate_bps: f64,
}

pub fn evolve_queue(plan: &RatePlan, slot_s: f64) -> Result<QueueTrace, QueueError> {
    plan.check_shape()?;
    let n = plan.num_slots();
    let mut q = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 1..=n {
        let cur = prev + (plan.c_sr[k - 1] - plan.rd(k)) * slot_s;
        if cur < -1e-6 {
            return Err(QueueError::Negative { slot: k, bits: cur });
        }
        q.push(cur);
        prev = cur;
    }
    let throughput = if n > 1 { plan.c_rd.iter().sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let lambda = plan.c_sr.iter().sum::<f64>() / n as f64;
    let mean_q = q.iter().sum::<f64>() / n as f64;
    let delay = if lambda > 0.0 { Some(mean_q / lambda / slot_s) } else { None };
    Ok(QueueTrace {
        q_bits: q,
        throughput_bps: throughput,
        avg_delay_slots: delay,
        avg_delay_adjusted: delay.map(|l| l - 1.0),
        arrival_rate_bps: lambda,
    })
}

/// Greedy rates from per-slot link capacities. `r_fso[i]` and `r_rf[i]` are the
/// capacities at slot `i + 1`; `r_rf[0]` is ignored.
pub fn greedy_rates_from_caps(r_fso: &[f64], r_rf: &[f64], buffer: Bound, slot_s: f64) -> RatePlan {
    let n = r_fso.len();
    let cap = buffer.finite().unwrap_or(f64::INFINITY);
    let mut c_sr = Vec::with_capacity(n);
    let mut c_rd = Vec::with_capacity(n.saturating_sub(1));
    let mut q = 0.0_f64;
    for k in 1..=n {
        let fso = r_fso[k - 1].max(0.0);
        let rd = if k == 1 { 0.0 } else { r_rf[k - 1].max(0.0).min(q / slot_s + fso) };
        let sr = fso.min(((cap - q) / slot_s + rd).max(0.0));
        q = (q + (sr - rd) * slot_s).max(0.0);
        c_sr.push(sr);
        if k > 1 {
            c_rd.push(rd);
        }
    }
    RatePlan { c_sr, c_rd }
}

/// True link capacities along a trajectory, slots `1..=N`.
pub fn link_capacities(
    p: &ScenarioParams,
    traj: &Trajectory,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
) -> (Vec<f64>, Vec<f64>) {
    let n = traj.num_slots();
    let mut r_fso = Vec::with_capacity(n);
    let mut r_rf = Vec::with_capacity(n);
    for k in 1..=n {
        let q = traj.point3(k, p.altitude);
        r_fso.push(fso.rate(q, p.src_pos));
        r_rf.push(rf.rate(q, p.dst_pos));
    }
    (r_fso, r_rf)
}

/// Maximum transfer rates along a trajectory under the buffer limit.
pub fn greedy_rates(
    p: &ScenarioParams,
    traj: &Trajectory,
    fso: &FsoLinkModel,
    rf: &RfLinkModel,
    buffer: Bound,
) -> RatePlan {
    let (r_fso, r_rf) = link_capacities(p, traj, fso, rf);
    greedy_rates_from_caps(&r_fso, &r_rf, buffer, traj.slot_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketDelays {
    /// per delivered packet, in slots
    pub delays: Vec<usize>,
    pub undelivered: usize,
    pub mean: Option<f64>,
    pub max: Option<usize>,
    /// `histogram[d]` counts packets with delay `d`
    pub histogram: Vec<usize>,
}

/// FIFO replay of whole packets through the fluid plan. A packet arrives in
/// the slot where cumulative source-side bits first cover it and departs in
/// the slot where cumulative destination-side bits do; its delay is the
/// difference.
pub fn packet_delay_replay(plan: &RatePlan, packet_bits: f64, slot_s: f64) -> PacketDelays {
    assert!(packet_bits > 0.0, "packet size must be positive");
    let n = plan.num_slots();
    let mut cum_s = Vec::with_capacity(n);
    let mut cum_d = Vec::with_capacity(n);
    let (mut s, mut d) = (0.0, 0.0);
    for k in 1..=n {
        s += plan.c_sr[k - 1] * slot_s;
        d += plan.rd(k) * slot_s;
        cum_s.push(s);
        cum_d.push(d);
    }
    let slack = 1e-9 * packet_bits;
    let total = ((s + slack) / packet_bits).floor() as usize;
    let mut delays = Vec::with_capacity(total);
    let mut undelivered = 0;
    let (mut a, mut b) = (0usize, 0usize);
    for k in 1..=total {
        let mark = k as f64 * packet_bits - slack;
        while a < n && cum_s[a] < mark {
            a += 1;
        }
        while b < n && cum_d[b] < mark {
            b += 1;
        }
        if b >= n {
            undelivered += total - k + 1;
            break;
        }
        delays.push(b.saturating_sub(a));
    }
    let max = delays.iter().copied().max();
    let mut histogram = vec![0usize; max.map_or(0, |m| m + 1)];
    for &v in &delays {
        histogram[v] += 1;
    }
    let mean = if delays.is_empty() {
        None
    } else {
        Some(delays.iter().sum::<usize>() as f64 / delays.len() as f64)
    };
    PacketDelays { delays, undelivered, mean, max, histogram }
}

/// Independent feasibility check of a plan against link capacities and the
/// buffer; returns every violation found.
pub fn check_plan(
    plan: &RatePlan,
    r_fso: &[f64],
    r_rf: &[f64],
    buffer: Bound,
    slot_s: f64,
    tol_rel: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = plan.check_shape() {
        out.push(e.to_string());
        return out;
    }
    let n = plan.num_slots();
    let tol = |cap: f64| tol_rel * cap.abs().max(1.0);
    for k in 1..=n {
        if plan.c_sr[k - 1] > r_fso[k - 1] + tol(r_fso[k - 1]) {
            out.push(format!("slot {k}: source-side rate above the FSO capacity"));
        }
        if k > 1 && plan.rd(k) > r_rf[k - 1] + tol(r_rf[k - 1]) {
            out.push(format!("slot {k}: destination-side rate above the RF capacity"));
        }
    }
    let (mut sent, mut got) = (0.0, 0.0);
    let scale = plan.c_sr.iter().fold(1.0_f64, |m, v| m.max(*v)) * slot_s * n as f64;
    for k in 1..=n {
        got += plan.c_sr[k - 1] * slot_s;
        sent += plan.rd(k) * slot_s;
        let q = got - sent;
        if q < -tol_rel * scale {
            out.push(format!("slot {k}: forwarded more than received"));
        }
        if let Bound::Finite(cap) = buffer {
            if q > cap + tol_rel * scale.max(cap) {
                out.push(format!("slot {k}: buffer holds {q:.6e} bits over {cap:.6e}"));
            }
        }
    }
    out
}

/// Columnar trace: `slot, c_sr_bps, c_rd_bps, q_bits`.
pub fn trace_text(plan: &RatePlan, trace: &QueueTrace) -> String {
    let mut s = String::from("slot,c_sr_bps,c_rd_bps,q_bits\n");
    for k in 1..=plan.num_slots() {
        let _ = writeln!(s, "{k},{:.6e},{:.6e},{:.6e}", plan.c_sr[k - 1], plan.rd(k), trace.q_bits[k - 1]);
    }
    s
}
