use relayplan::baselines::{cruise_leg, data_ferry, static_relay, BaselineError};
use relayplan::channel::link_models;
use relayplan::harness::reference_scenario;
use relayplan::planner::verify_plan;
use relayplan::{Bound, Mode, ScenarioParams};

fn unbounded(p: ScenarioParams) -> ScenarioParams {
    ScenarioParams { buffer_bits: Bound::Infinite, ..p }
}

#[test]
fn static_relay_sits_at_the_rate_crossing() {
    let p = ScenarioParams::default();
    let (fso, rf) = link_models(&p).unwrap();
    let r = static_relay(&p, &fso, &rf);
    let rates = |x: f64| (fso.rate([x, 0.0, 100.0], p.src_pos), rf.rate([x, 0.0, 100.0], p.dst_pos));
    let (a, b) = rates(r.x_s);
    for dx in [-1.0, 1.0] {
        let (c, d) = rates(r.x_s + dx);
        assert!(c.min(d) <= a.min(b));
    }
    // the two rates swap order across the optimum
    let (l0, l1) = rates(r.x_s - 1.0);
    let (r0, r1) = rates(r.x_s + 1.0);
    assert!((l0 - l1).signum() != (r0 - r1).signum());
    // slot 1 only loads; whatever it stored is forwarded later on top of the
    // bottleneck rate, within the RF headroom
    let n = p.num_slots as f64;
    let m = a.min(b);
    let closed_form = if a <= b { (a * n).min(b * (n - 1.0)) / (n - 1.0) } else { b };
    assert!((r.phi - closed_form).abs() <= 1e-9 * r.phi, "{} vs {closed_form}", r.phi);
    assert!(r.phi >= m && r.phi <= m * n / (n - 1.0) * (1.0 + 1e-12));
}

#[test]
fn narrower_fso_band_pulls_the_hover_point_to_the_source() {
    let p = ScenarioParams::default();
    let (fso, rf) = link_models(&p).unwrap();
    let base = static_relay(&p, &fso, &rf).x_s;
    let q = ScenarioParams { fso_bandwidth_hz: p.fso_bandwidth_hz / 2.0, ..p };
    let (fso, rf) = link_models(&q).unwrap();
    assert!(static_relay(&q, &fso, &rf).x_s < base);
}

#[test]
fn calibrated_hover_point() {
    let p = reference_scenario().unwrap();
    let (fso, rf) = link_models(&p).unwrap();
    let r = static_relay(&p, &fso, &rf);
    assert!((r.x_s - 1568.0).abs() <= 25.0, "x_s = {}", r.x_s);
    assert!((r.phi / 2.0203e7 - 1.0).abs() < 1e-6);
}

#[test]
fn cruise_leg_timing() {
    // 1400 m at 5 m/s² and 50 m/s: 10 s up, 18 s at top speed, 10 s down
    let leg = cruise_leg(1400.0, 50.0, 5.0, 1.0);
    assert_eq!(leg.slots, 38);
    assert_eq!(leg.accel_slots, 10);
    assert!((leg.accel - 5.0).abs() < 1e-12);
    // short hops never reach top speed
    let leg = cruise_leg(100.0, 50.0, 5.0, 1.0);
    assert_eq!(leg.slots, 9);
    assert!(leg.accel <= 5.0);
    assert_eq!(cruise_leg(0.0, 50.0, 5.0, 1.0).slots, 0);
}

#[test]
fn ferry_plans_are_feasible() {
    let p = unbounded(ScenarioParams::default());
    let (fso, rf) = link_models(&p).unwrap();
    let r = data_ferry(&p, &fso, &rf, 300.0, 300.0).unwrap();
    assert!(r.phi > 0.0);
    assert_eq!(r.leg.slots, 38);
    assert!(verify_plan(&p, &fso, &rf, &r.trajectory, &r.plan, Mode::DelayTolerant).is_empty());
    assert_eq!(r.load_slots.len(), r.cycles);
    assert!((r.trajectory.pos[1][0] - 300.0).abs() < 1e-9);

    let s = static_relay(&p, &fso, &rf);
    assert!(verify_plan(&p, &fso, &rf, &s.trajectory, &s.plan, Mode::DelayTolerant).is_empty());
}

#[test]
fn ferry_with_unlimited_rf_is_load_limited() {
    let p = unbounded(ScenarioParams { gamma0_override: Some(1e40), ..ScenarioParams::default() });
    let (fso, rf) = link_models(&p).unwrap();
    let r = data_ferry(&p, &fso, &rf, 300.0, 300.0).unwrap();
    let r_load = fso.rate([300.0, 0.0, 100.0], p.src_pos);
    let loaded: usize = r.load_slots.iter().sum();
    let expected = loaded as f64 * r_load / (p.num_slots - 1) as f64;
    assert!((r.phi - expected).abs() <= 1e-9 * expected, "{} vs {expected}", r.phi);
}

#[test]
fn ferry_rejects_bad_ranges_and_short_horizons() {
    let p = ScenarioParams::default();
    let (fso, rf) = link_models(&p).unwrap();
    assert!(matches!(data_ferry(&p, &fso, &rf, 1200.0, 900.0), Err(BaselineError::Ranges { .. })));
    let q = ScenarioParams::parse("num_slots=30\nhorizon_s=30").unwrap();
    assert!(matches!(data_ferry(&q, &fso, &rf, 300.0, 300.0), Err(BaselineError::Horizon { .. })));
}
