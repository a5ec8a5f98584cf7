//! Scenario configuration: physical constants, flight limits and the
//! flat `key=value` file format they are loaded from.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{self, ChannelError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A limit that may be switched off entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bound::Infinite)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" | "unbounded" => Ok(Bound::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|e| format!("expected a number or `inf`: {e}"))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(Bound::Finite(v))
                    } else {
                        Err("use `inf` for an unbounded value".to_string())
                    }
                }),
        }
    }
}

/// Fixed initial/final state of the relay, in meters and m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoints {
    pub q_i: [f64; 3],
    pub q_f: [f64; 3],
    pub v_i: [f64; 3],
    pub v_f: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub src_pos: [f64; 3],
    pub dst_pos: [f64; 3],
    pub altitude: f64,
    pub horizon_s: f64,
    pub num_slots: usize,
    pub slot_s: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub visibility_km: f64,
    pub wavelength_nm: f64,
    pub fso_bandwidth_hz: f64,
    pub fso_asnr_db: f64,
    /// Read `fso_asnr_db` as `10·log10(γ_FSO)` instead of `10·log10(γ²_FSO)`.
    pub fso_asnr_is_amplitude: bool,
    pub apr: f64,
    pub rf_bandwidth_hz: f64,
    pub ref_snr_db: f64,
    pub gamma0_override: Option<f64>,
    pub pathloss_exp_half: f64,
    pub los_c: f64,
    pub los_d: f64,
    pub nlos_atten: f64,
    pub buffer_bits: Bound,
    pub delay_req_slots: Bound,
    pub endpoints: Option<Endpoints>,
    pub sca_tol: f64,
    pub sca_max_iters: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            src_pos: [0.0, 0.0, 0.0],
            dst_pos: [2000.0, 0.0, 0.0],
            altitude: 100.0,
            horizon_s: 200.0,
            num_slots: 200,
            slot_s: 1.0,
            v_max: 50.0,
            a_max: 5.0,
            visibility_km: 0.8,
            wavelength_nm: 1550.0,
            fso_bandwidth_hz: 1e8,
            fso_asnr_db: 5.0,
            fso_asnr_is_amplitude: false,
            apr: 0.1,
            rf_bandwidth_hz: 1e8,
            ref_snr_db: 6.0,
            gamma0_override: None,
            pathloss_exp_half: 2.2,
            los_c: 10.0,
            los_d: 0.6,
            nlos_atten: 0.2,
            buffer_bits: Bound::Finite(2.5e9),
            delay_req_slots: Bound::Finite(5.0),
            endpoints: None,
            sca_tol: 1e-3,
            sca_max_iters: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub beta_per_m: f64,
    pub k1: f64,
    pub k2: f64,
    pub gamma0: f64,
    pub los_prob_bar: f64,
    pub asnr_linear: f64,
    /// `None` on the `α0 > ½` branch, which does not need it.
    pub mu_star: Option<f64>,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|e| format!("bad number `{p}`: {e}"))?;
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true/false, got `{s}`")),
    }
}

fn num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("bad value `{s}`: {e}"))
}

impl ScenarioParams {
    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses scenario text; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut p = Self::default();
        let mut horizon_given = false;
        let mut slot_given = false;
        let mut endpoints_on = false;
        let mut ends = Endpoints { q_i: [0.0; 3], q_f: [0.0; 3], v_i: [0.0; 3], v_f: [0.0; 3] };

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ScenarioError::Parse {
                line,
                msg: format!("expected key=value, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let res: Result<(), String> = (|| {
                match key {
                    "src_pos" => p.src_pos = parse_vec3(value)?,
                    "dst_pos" => p.dst_pos = parse_vec3(value)?,
                    "altitude" => p.altitude = num(value)?,
                    "horizon_s" => {
                        p.horizon_s = num(value)?;
                        horizon_given = true;
                    }
                    "num_slots" => p.num_slots = num(value)?,
                    "slot_s" => {
                        p.slot_s = num(value)?;
                        slot_given = true;
                    }
                    "v_max" => p.v_max = num(value)?,
                    "a_max" => p.a_max = num(value)?,
                    "visibility_km" => p.visibility_km = num(value)?,
                    "wavelength_nm" => p.wavelength_nm = num(value)?,
                    "fso_bandwidth_hz" => p.fso_bandwidth_hz = num(value)?,
                    "fso_asnr_db" => p.fso_asnr_db = num(value)?,
                    "fso_asnr_is_amplitude" => p.fso_asnr_is_amplitude = parse_bool(value)?,
                    "apr" => p.apr = num(value)?,
                    "rf_bandwidth_hz" => p.rf_bandwidth_hz = num(value)?,
                    "ref_snr_db" => p.ref_snr_db = num(value)?,
                    "gamma0_override" => {
                        p.gamma0_override = match value.to_ascii_lowercase().as_str() {
                            "" | "none" => None,
                            _ => Some(num(value)?),
                        }
                    }
                    "pathloss_exp_half" => p.pathloss_exp_half = num(value)?,
                    "los_c" => p.los_c = num(value)?,
                    "los_d" => p.los_d = num(value)?,
                    "nlos_atten" => p.nlos_atten = num(value)?,
                    "buffer_bits" => p.buffer_bits = value.parse()?,
                    "delay_req_slots" => p.delay_req_slots = value.parse()?,
                    "endpoint_constraints" => endpoints_on = parse_bool(value)?,
                    "q_i" => ends.q_i = parse_vec3(value)?,
                    "q_f" => ends.q_f = parse_vec3(value)?,
                    "v_i" => ends.v_i = parse_vec3(value)?,
                    "v_f" => ends.v_f = parse_vec3(value)?,
                    "sca_tol" => {
                        p.sca_tol = match value.to_ascii_lowercase().as_str() {
                            "inf" => f64::INFINITY,
                            _ => num(value)?,
                        }
                    }
                    "sca_max_iters" => p.sca_max_iters = num(value)?,
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            })();
            res.map_err(|msg| ScenarioError::Parse { line, msg })?;
        }

        match (horizon_given, slot_given) {
            (false, _) => p.horizon_s = p.num_slots as f64 * p.slot_s,
            (true, false) if p.num_slots > 0 => p.slot_s = p.horizon_s / p.num_slots as f64,
            _ => {}
        }
        if endpoints_on {
            p.endpoints = Some(ends);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        let finite = [
            self.altitude,
            self.horizon_s,
            self.slot_s,
            self.v_max,
            self.a_max,
            self.visibility_km,
            self.wavelength_nm,
            self.fso_bandwidth_hz,
            self.fso_asnr_db,
            self.apr,
            self.rf_bandwidth_hz,
            self.ref_snr_db,
            self.pathloss_exp_half,
            self.los_c,
            self.los_d,
            self.nlos_atten,
        ];
        if finite.iter().any(|v| !v.is_finite())
            || self.src_pos.iter().chain(&self.dst_pos).any(|v| !v.is_finite())
        {
            return fail("all parameters must be finite numbers");
        }
        if self.num_slots < 2 {
            return fail("num_slots must be at least 2");
        }
        if self.slot_s <= 0.0 {
            return fail("slot_s must be positive");
        }
        let t = self.num_slots as f64 * self.slot_s;
        if (self.horizon_s - t).abs() > 1e-9 * t.max(1.0) {
            return fail("horizon_s must equal num_slots × slot_s");
        }
        if self.v_max <= 0.0 || self.a_max <= 0.0 {
            return fail("v_max and a_max must be positive");
        }
        if self.fso_bandwidth_hz <= 0.0 || self.rf_bandwidth_hz <= 0.0 {
            return fail("bandwidths must be positive");
        }
        if self.altitude <= 0.0 {
            return fail("altitude must be positive");
        }
        if self.visibility_km <= 0.0 || self.wavelength_nm <= 0.0 {
            return fail("visibility_km and wavelength_nm must be positive");
        }
        if !(self.apr > 0.0 && self.apr < 1.0) || self.apr == 0.5 {
            return fail("apr must lie in (0, 1) and differ from 0.5");
        }
        if !(self.nlos_atten > 0.0 && self.nlos_atten <= 1.0) {
            return fail("nlos_atten must lie in (0, 1]");
        }
        if self.pathloss_exp_half < 1.0 {
            return fail("pathloss_exp_half must be at least 1");
        }
        if let Some(g) = self.gamma0_override {
            if !(g.is_finite() && g > 0.0) {
                return fail("gamma0_override must be positive");
            }
        }
        if let Bound::Finite(b) = self.buffer_bits {
            if b < 0.0 {
                return fail("buffer_bits must be non-negative");
            }
        }
        if let Bound::Finite(d) = self.delay_req_slots {
            if d < 0.0 {
                return fail("delay_req_slots must be non-negative");
            }
        }
        if !(self.sca_tol > 0.0) {
            return fail("sca_tol must be positive");
        }
        if self.sca_max_iters == 0 {
            return fail("sca_max_iters must be at least 1");
        }
        if let Some(e) = &self.endpoints {
            if e.q_i.iter().chain(&e.q_f).chain(&e.v_i).chain(&e.v_f).any(|v| !v.is_finite()) {
                return fail("endpoint vectors must be finite");
            }
        }
        Ok(())
    }

    /// Source-destination distance in the horizontal plane.
    pub fn link_length(&self) -> f64 {
        let dx = self.dst_pos[0] - self.src_pos[0];
        let dy = self.dst_pos[1] - self.src_pos[1];
        dx.hypot(dy)
    }

    /// Unit vector from source to destination in the horizontal plane.
    pub fn axis(&self) -> [f64; 2] {
        let l = self.link_length();
        if l == 0.0 {
            return [1.0, 0.0];
        }
        [(self.dst_pos[0] - self.src_pos[0]) / l, (self.dst_pos[1] - self.src_pos[1]) / l]
    }

    /// Point on the S-D axis at horizontal distance `s` from the source.
    pub fn axis_point(&self, s: f64) -> [f64; 2] {
        let u = self.axis();
        [self.src_pos[0] + s * u[0], self.src_pos[1] + s * u[1]]
    }

    /// Linear `γ²_FSO`.
    pub fn asnr_linear(&self) -> f64 {
        if self.fso_asnr_is_amplitude {
            10f64.powf(2.0 * self.fso_asnr_db / 10.0)
        } else {
            10f64.powf(self.fso_asnr_db / 10.0)
        }
    }

    pub fn derived(&self) -> Result<DerivedConstants, ChannelError> {
        derived_constants(self)
    }

    /// Writes the parameters back out in the file format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let v3 = |v: &[f64; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("src_pos", v3(&self.src_pos));
        kv("dst_pos", v3(&self.dst_pos));
        kv("altitude", self.altitude.to_string());
        kv("horizon_s", self.horizon_s.to_string());
        kv("num_slots", self.num_slots.to_string());
        kv("slot_s", self.slot_s.to_string());
        kv("v_max", self.v_max.to_string());
        kv("a_max", self.a_max.to_string());
        kv("visibility_km", self.visibility_km.to_string());
        kv("wavelength_nm", self.wavelength_nm.to_string());
        kv("fso_bandwidth_hz", self.fso_bandwidth_hz.to_string());
        kv("fso_asnr_db", self.fso_asnr_db.to_string());
        kv("fso_asnr_is_amplitude", self.fso_asnr_is_amplitude.to_string());
        kv("apr", self.apr.to_string());
        kv("rf_bandwidth_hz", self.rf_bandwidth_hz.to_string());
        kv("ref_snr_db", self.ref_snr_db.to_string());
        if let Some(g) = self.gamma0_override {
            kv("gamma0_override", g.to_string());
        }
        kv("pathloss_exp_half", self.pathloss_exp_half.to_string());
        kv("los_c", self.los_c.to_string());
        kv("los_d", self.los_d.to_string());
        kv("nlos_atten", self.nlos_atten.to_string());
        kv("buffer_bits", self.buffer_bits.to_string());
        kv("delay_req_slots", self.delay_req_slots.to_string());
        if let Some(e) = &self.endpoints {
            kv("endpoint_constraints", "true".into());
            kv("q_i", v3(&e.q_i));
            kv("q_f", v3(&e.q_f));
            kv("v_i", v3(&e.v_i));
            kv("v_f", v3(&e.v_f));
        }
        kv("sca_tol", if self.sca_tol.is_infinite() { "inf".into() } else { self.sca_tol.to_string() });
        kv("sca_max_iters", self.sca_max_iters.to_string());
        s
    }
}

/// β, k1, k2, γ0 and P̄_LoS for a scenario.
pub fn derived_constants(p: &ScenarioParams) -> Result<DerivedConstants, ChannelError> {
    let beta = channel::attenuation_per_m(p.visibility_km, p.wavelength_nm);
    let asnr = p.asnr_linear();
    let mu_star = if p.apr < 0.5 { Some(channel::solve_mu_star(p.apr)?) } else { None };
    let k1 = channel::fso_k1(asnr, p.apr)?;
    let los_prob_bar = channel::los_probability_at_angle(90.0, p.los_c, p.los_d, p.nlos_atten);
    let gamma0 = match p.gamma0_override {
        Some(g) => g,
        None => 10f64.powf(p.ref_snr_db / 10.0) * (p.altitude * p.altitude).powf(p.pathloss_exp_half),
    };
    Ok(DerivedConstants {
        beta_per_m: beta,
        k1,
        k2: 2.0 * beta,
        gamma0,
        los_prob_bar,
        asnr_linear: asnr,
        mu_star,
    })
}

/// Time-indexed relay state on the flight plane, slots `0..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub pos: Vec<[f64; 2]>,
    pub vel: Vec<[f64; 2]>,
    /// slots `0..=N`
    pub acc: Vec<[f64; 2]>,
    pub slot_s: f64,
}

impl Trajectory {
    /// Number of communication slots `N`.
    pub fn num_slots(&self) -> usize {
        self.pos.len() - 2
    }

    /// Constant hover at `point`.
    pub fn hover(point: [f64; 2], num_slots: usize, slot_s: f64) -> Self {
        Self {
            pos: vec![point; num_slots + 2],
            vel: vec![[0.0; 2]; num_slots + 2],
            acc: vec![[0.0; 2]; num_slots + 1],
            slot_s,
        }
    }

    /// Integrates accelerations forward from the slot-0 state.
    pub fn integrate(pos0: [f64; 2], vel0: [f64; 2], acc: Vec<[f64; 2]>, slot_s: f64) -> Self {
        let dt = slot_s;
        let mut pos = Vec::with_capacity(acc.len() + 1);
        let mut vel = Vec::with_capacity(acc.len() + 1);
        pos.push(pos0);
        vel.push(vel0);
        for a in &acc {
            let (q, v) = (*pos.last().unwrap(), *vel.last().unwrap());
            pos.push([q[0] + v[0] * dt + 0.5 * a[0] * dt * dt, q[1] + v[1] * dt + 0.5 * a[1] * dt * dt]);
            vel.push([v[0] + a[0] * dt, v[1] + a[1] * dt]);
        }
        Self { pos, vel, acc, slot_s }
    }

    /// Largest violation of the discrete kinematic model, in meters (positions)
    /// or m/s (velocities).
    pub fn kinematic_residual(&self) -> f64 {
        let dt = self.slot_s;
        let mut worst = 0.0_f64;
        for (n, a) in self.acc.iter().enumerate() {
            for c in 0..2 {
                let v = self.vel[n + 1][c] - self.vel[n][c] - a[c] * dt;
                let q = self.pos[n + 1][c] - self.pos[n][c] - self.vel[n][c] * dt - 0.5 * a[c] * dt * dt;
                worst = worst.max(v.abs()).max(q.abs());
            }
        }
        worst
    }

    /// Checks kinematics and the speed/acceleration limits; returns the first
    /// violation found.
    pub fn check(&self, v_max: f64, a_max: f64, tol: f64) -> Result<(), String> {
        let n = self.num_slots();
        if self.vel.len() != n + 2 || self.acc.len() != n + 1 {
            return Err("trajectory arrays have inconsistent lengths".into());
        }
        let r = self.kinematic_residual();
        if r > tol {
            return Err(format!("kinematic residual {r:.3e} exceeds {tol:.1e}"));
        }
        for (k, a) in self.acc.iter().enumerate() {
            let m = a[0].hypot(a[1]);
            if m > a_max * (1.0 + 1e-6) + tol {
                return Err(format!("acceleration {m:.6} exceeds the limit at slot {k}"));
            }
        }
        for k in 1..=n {
            let m = self.vel[k][0].hypot(self.vel[k][1]);
            if m > v_max * (1.0 + 1e-6) + tol {
                return Err(format!("speed {m:.6} exceeds the limit at slot {k}"));
            }
        }
        Ok(())
    }

    /// Position at communication slot `n` (1-based) lifted to altitude `h`.
    pub fn point3(&self, n: usize, h: f64) -> [f64; 3] {
        [self.pos[n][0], self.pos[n][1], h]
    }
}
