//! Experiment drivers and the plain-text data products they write.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{self, BaselineError, FerryResult, StaticResult};
use crate::channel::{link_models, ChannelError};
use crate::planner::{self, Mode, PlanError, PlanOptions, PlanResult};
use crate::queue::{packet_delay_replay, trace_text};
use crate::scenario::{Bound, ScenarioError, ScenarioParams, Trajectory};

/// Target static-relay throughput on the reference scenario, bps.
pub const STATIC_ANCHOR_BPS: f64 = 2.0203e7;
/// Packet size used for transmission-delay replays, bits.
pub const PACKET_BITS: f64 = 1e6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Value of `γ0` for which static relaying yields `target_bps`, found by
/// bisection on `log10 γ0`.
pub fn calibrate_gamma0(p: &ScenarioParams, target_bps: f64) -> Result<f64, HarnessError> {
    let phi_at = |lg: f64| -> Result<f64, HarnessError> {
        let mut q = p.clone();
        q.gamma0_override = Some(10f64.powf(lg));
        let (fso, rf) = link_models(&q)?;
        Ok(baselines::static_relay(&q, &fso, &rf).phi)
    };
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    if phi_at(lo)? > target_bps || phi_at(hi)? < target_bps {
        return Err(HarnessError::Input(format!("static throughput {target_bps:.4e} bps is out of reach")));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if phi_at(mid)? < target_bps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(10f64.powf(0.5 * (lo + hi)))
}

/// Default parameters with the FSO ASNR read as an amplitude figure and `γ0`
/// fitted to the static-relay anchor.
pub fn reference_scenario() -> Result<ScenarioParams, HarnessError> {
    calibrated(&ScenarioParams { fso_asnr_is_amplitude: true, ..ScenarioParams::default() })
}

/// A copy of `p` with `γ0` fitted to the static-relay anchor.
pub fn calibrated(p: &ScenarioParams) -> Result<ScenarioParams, HarnessError> {
    let mut q = p.clone();
    q.gamma0_override = Some(calibrate_gamma0(p, STATIC_ANCHOR_BPS)?);
    Ok(q)
}

/// `10·log10(γ0 / (H²)^α)`: the reference SNR equivalent to a given `γ0`.
pub fn gamma0_to_db(p: &ScenarioParams, gamma0: f64) -> f64 {
    10.0 * (gamma0 / (p.altitude * p.altitude).powf(p.pathloss_exp_half)).log10()
}

pub fn optimize(p: &ScenarioParams, mode: Mode, opts: &PlanOptions) -> Result<PlanResult, HarnessError> {
    let (fso, rf) = link_models(p)?;
    Ok(planner::optimize_with(p, &fso, &rf, mode, opts)?)
}

pub fn trajectory_text(t: &Trajectory) -> String {
    let mut s = String::from("slot,x_m,y_m,vx,vy,ax,ay\n");
    for k in 0..t.pos.len() {
        let a = t.acc.get(k).copied().unwrap_or([0.0; 2]);
        let _ = writeln!(
            s,
            "{k},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t.pos[k][0], t.pos[k][1], t.vel[k][0], t.vel[k][1], a[0], a[1]
        );
    }
    s
}

/// Reads a trajectory file written by [`trajectory_text`].
pub fn parse_trajectory(text: &str, slot_s: f64) -> Result<Trajectory, HarnessError> {
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    let mut acc = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Input(format!("trajectory line {}: {e}", i + 1)))?;
        if f.len() != 7 {
            return Err(HarnessError::Input(format!("trajectory line {}: expected 7 columns", i + 1)));
        }
        pos.push([f[1], f[2]]);
        vel.push([f[3], f[4]]);
        acc.push([f[5], f[6]]);
    }
    if pos.len() < 4 {
        return Err(HarnessError::Input("trajectory needs at least 4 rows".into()));
    }
    acc.pop();
    Ok(Trajectory { pos, vel, acc, slot_s })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmfBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// Fraction of slots `1..=N` whose x-coordinate falls in each bin
/// `[origin + k·w, origin + (k+1)·w)`, from the lowest to the highest occupied bin.
pub fn pmf(t: &Trajectory, bin_width: f64, origin: f64) -> Vec<PmfBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let n = t.num_slots();
    let idx: Vec<i64> = (1..=n).map(|k| ((t.pos[k][0] - origin) / bin_width).floor() as i64).collect();
    let (lo, hi) = (*idx.iter().min().unwrap(), *idx.iter().max().unwrap());
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for i in &idx {
        counts[(i - lo) as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let b = lo + j as i64;
            PmfBin {
                lo: origin + b as f64 * bin_width,
                hi: origin + (b + 1) as f64 * bin_width,
                mass: c as f64 / n as f64,
            }
        })
        .collect()
}

/// Bin with the largest mass; ties go to the bin nearest the source.
pub fn modal_bin(bins: &[PmfBin]) -> &PmfBin {
    bins.iter().fold(&bins[0], |m, b| if b.mass > m.mass { b } else { m })
}

pub fn pmf_text(bins: &[PmfBin]) -> String {
    let mut s = String::from("bin_lo_m,bin_hi_m,mass\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{:.9}", b.lo, b.hi, b.mass);
    }
    s
}

pub fn metrics_text(p: &ScenarioParams, r: &PlanResult) -> String {
    let delays = packet_delay_replay(&r.plan, PACKET_BITS, p.slot_s);
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.6}"));
    let mut s = String::new();
    let _ = writeln!(s, "mode={}", r.mode);
    let _ = writeln!(s, "objective_bps={:.6e}", r.objective_bps);
    let _ = writeln!(s, "surrogate_objective_bps={:.6e}", r.surrogate_objective_bps);
    let _ = writeln!(s, "surrogate_gap={:.6e}", r.surrogate_gap);
    let _ = writeln!(s, "iterations={}", r.iterations);
    let _ = writeln!(s, "buffer_bits={}", p.buffer_bits);
    let _ = writeln!(s, "delay_req_slots={}", p.delay_req_slots);
    let _ = writeln!(s, "avg_delay_slots={}", opt(r.trace.avg_delay_slots));
    let _ = writeln!(s, "avg_delay_adjusted={}", opt(r.trace.avg_delay_adjusted));
    let _ = writeln!(s, "mean_packet_delay_slots={}", opt(delays.mean));
    let _ = writeln!(s, "undelivered_packets={}", delays.undelivered);
    let _ = writeln!(s, "constraints={}", r.census.total());
    s
}

pub fn iteration_log_text(r: &PlanResult) -> String {
    let mut s = String::from("iter,objective_bps,true_objective_bps\n");
    for (i, (a, b)) in r.objective_log.iter().zip(&r.true_log).enumerate() {
        let _ = writeln!(s, "{},{:.9e},{:.9e}", i + 1, a, b);
    }
    s
}

/// Writes trajectory, metrics, iteration log and queue trace into `out`.
pub fn write_plan(out: &Path, p: &ScenarioParams, r: &PlanResult) -> io::Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("trajectory.csv"), trajectory_text(&r.trajectory))?;
    fs::write(out.join("metrics.txt"), metrics_text(p, r))?;
    fs::write(out.join("iterations.csv"), iteration_log_text(r))?;
    fs::write(out.join("queue.csv"), trace_text(&r.plan, &r.trace))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    BufferBits,
    DelayReqSlots,
    RefSnrDb,
    VisibilityKm,
}

impl std::str::FromStr for SweepKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buffer_bits" => Ok(SweepKey::BufferBits),
            "delay_req_slots" => Ok(SweepKey::DelayReqSlots),
            "ref_snr_db" => Ok(SweepKey::RefSnrDb),
            "visibility_km" => Ok(SweepKey::VisibilityKm),
            _ => Err(format!(
                "unsupported sweep key `{s}` (expected buffer_bits, delay_req_slots, ref_snr_db or visibility_km)"
            )),
        }
    }
}

/// One sweep value; `inf` is accepted for the buffer and delay keys.
pub fn apply_sweep_value(p: &ScenarioParams, key: SweepKey, value: Bound) -> Result<ScenarioParams, HarnessError> {
    let mut q = p.clone();
    let finite = |what: &str| {
        value.finite().ok_or_else(|| HarnessError::Input(format!("{what} cannot be infinite")))
    };
    match key {
        SweepKey::BufferBits => q.buffer_bits = value,
        SweepKey::DelayReqSlots => q.delay_req_slots = value,
        SweepKey::RefSnrDb => {
            q.ref_snr_db = finite("ref_snr_db")?;
            q.gamma0_override = None;
        }
        SweepKey::VisibilityKm => q.visibility_km = finite("visibility_km")?,
    }
    q.validate()?;
    Ok(q)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: Bound,
    pub objective_bps: Option<f64>,
    pub iterations: Option<usize>,
    pub mean_delay_slots: Option<f64>,
    pub mean_packet_delay: Option<f64>,
    pub error: Option<String>,
    pub result: Option<PlanResult>,
}

/// Runs one optimization per value in parallel; failures are kept in-row.
pub fn sweep(p: &ScenarioParams, key: SweepKey, values: &[Bound], mode: Mode, opts: &PlanOptions) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let run = apply_sweep_value(p, key, value).and_then(|q| optimize(&q, mode, opts).map(|r| (q, r)));
            match run {
                Ok((q, r)) => {
                    let delays = packet_delay_replay(&r.plan, PACKET_BITS, q.slot_s);
                    SweepRow {
                        value,
                        objective_bps: Some(r.objective_bps),
                        iterations: Some(r.iterations),
                        mean_delay_slots: r.trace.avg_delay_slots,
                        mean_packet_delay: delays.mean,
                        error: None,
                        result: Some(r),
                    }
                }
                Err(e) => SweepRow {
                    value,
                    objective_bps: None,
                    iterations: None,
                    mean_delay_slots: None,
                    mean_packet_delay: None,
                    error: Some(e.to_string()),
                    result: None,
                },
            }
        })
        .collect()
}

pub fn sweep_text(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6e}"));
    let mut s = String::from("value,objective_bps,iterations,mean_delay_slots,mean_packet_delay,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.value,
            opt(r.objective_bps),
            r.iterations.map_or(String::new(), |i| i.to_string()),
            opt(r.mean_delay_slots),
            opt(r.mean_packet_delay),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    s
}

pub fn static_metrics_text(r: &StaticResult) -> String {
    format!("scheme=static\nx_s={}\nobjective_bps={:.6e}\n", r.x_s, r.phi)
}

pub fn ferry_metrics_text(r: &FerryResult, d1: f64, d2: f64) -> String {
    format!("scheme=ferry\nd1={d1}\nd2={d2}\nobjective_bps={:.6e}\ncycle={}\n", r.phi, r.describe())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Static,
    Ferry { d1: f64, d2: f64 },
}

/// Runs a baseline and writes its trajectory, queue trace and metrics.
pub fn run_baseline(p: &ScenarioParams, scheme: Scheme, out: &Path) -> Result<String, HarnessError> {
    let (fso, rf) = link_models(p)?;
    fs::create_dir_all(out)?;
    let (traj, plan, trace, metrics) = match scheme {
        Scheme::Static => {
            let r = baselines::static_relay(p, &fso, &rf);
            let m = static_metrics_text(&r);
            (r.trajectory, r.plan, r.trace, m)
        }
        Scheme::Ferry { d1, d2 } => {
            let r = baselines::data_ferry(p, &fso, &rf, d1, d2)?;
            let m = ferry_metrics_text(&r, d1, d2);
            (r.trajectory, r.plan, r.trace, m)
        }
    };
    fs::write(out.join("trajectory.csv"), trajectory_text(&traj))?;
    fs::write(out.join("queue.csv"), trace_text(&plan, &trace))?;
    fs::write(out.join("metrics.txt"), &metrics)?;
    Ok(metrics)
}
