use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relayplan::channel::link_models;
use relayplan::queue::{
    check_plan, evolve_queue, greedy_rates, greedy_rates_from_caps, packet_delay_replay, trace_text, QueueError,
};
use relayplan::{Bound, RatePlan, ScenarioParams, Trajectory};

/// Slot-by-slot store-and-forward in bits: forward what the RF link and the
/// buffer allow, then accept what the FSO link and the free space allow.
fn greedy_oracle(r_fso: &[f64], r_rf: &[f64], cap: Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut q = 0.0;
    let (mut sent_in, mut sent_out) = (vec![], vec![]);
    for k in 0..r_fso.len() {
        let out = if k == 0 { 0.0 } else { r_rf[k].min(q + r_fso[k]) };
        let room = match cap {
            Some(c) => c - q + out,
            None => f64::INFINITY,
        };
        let inn = r_fso[k].min(room);
        q = q + inn - out;
        sent_in.push(inn);
        if k > 0 {
            sent_out.push(out);
        }
    }
    (sent_in, sent_out)
}

#[test]
fn three_slot_hand_computation() {
    let plan = RatePlan { c_sr: vec![10.0; 3], c_rd: vec![10.0, 10.0] };
    let t = evolve_queue(&plan, 1.0).unwrap();
    assert_eq!(t.q_bits, vec![10.0, 10.0, 10.0]);
    assert_eq!(t.throughput_bps, 10.0);
    assert_eq!(t.arrival_rate_bps, 10.0);
    assert_eq!(t.avg_delay_slots, Some(1.0));
    assert_eq!(t.avg_delay_adjusted, Some(0.0));
}

#[test]
fn empty_system_has_undefined_delay() {
    let plan = RatePlan { c_sr: vec![0.0; 4], c_rd: vec![0.0; 3] };
    let t = evolve_queue(&plan, 1.0).unwrap();
    assert_eq!(t.q_bits, vec![0.0; 4]);
    assert_eq!(t.throughput_bps, 0.0);
    assert_eq!(t.avg_delay_slots, None);
}

#[test]
fn single_batch_in_and_out() {
    let plan = RatePlan { c_sr: vec![10.0, 0.0, 0.0], c_rd: vec![10.0, 0.0] };
    assert_eq!(evolve_queue(&plan, 1.0).unwrap().q_bits, vec![10.0, 0.0, 0.0]);
}

#[test]
fn acausal_and_malformed_plans_are_rejected() {
    let plan = RatePlan { c_sr: vec![1.0, 0.0, 0.0], c_rd: vec![5.0, 0.0] };
    assert!(matches!(evolve_queue(&plan, 1.0), Err(QueueError::Negative { slot: 2, .. })));
    let plan = RatePlan { c_sr: vec![1.0, 1.0], c_rd: vec![] };
    assert!(matches!(evolve_queue(&plan, 1.0), Err(QueueError::Shape { .. })));
    let plan = RatePlan { c_sr: vec![1.0, f64::NAN], c_rd: vec![0.0] };
    assert_eq!(evolve_queue(&plan, 1.0), Err(QueueError::BadRate(2)));
}

#[test]
fn greedy_without_binding_limits_uses_full_capacity() {
    let r_fso = vec![9.0, 8.0, 7.0, 9.0, 8.0];
    let r_rf = vec![5.0, 6.0, 7.0, 3.0, 4.0];
    let plan = greedy_rates_from_caps(&r_fso, &r_rf, Bound::Infinite, 1.0);
    assert_eq!(plan.c_sr, r_fso);
    assert_eq!(plan.c_rd, r_rf[1..].to_vec());
}

#[test]
fn zero_buffer_passes_through() {
    let r_fso = vec![9.0, 2.0, 7.0, 1.0, 8.0];
    let r_rf = vec![5.0, 6.0, 3.0, 3.0, 4.0];
    let plan = greedy_rates_from_caps(&r_fso, &r_rf, Bound::Finite(0.0), 1.0);
    for k in 2..=5 {
        assert_eq!(plan.c_sr[k - 1], r_fso[k - 1].min(r_rf[k - 1]));
    }
    let t = evolve_queue(&plan, 1.0).unwrap();
    assert!(t.q_bits[1..].iter().all(|&q| q == 0.0));
}

#[test]
fn greedy_matches_the_recursion_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.gen_range(2..=10);
        // integer rates keep every operation exact in floating point
        let r_fso: Vec<f64> = (0..n).map(|_| rng.gen_range(0..1_000_000) as f64).collect();
        let r_rf: Vec<f64> = (0..n).map(|_| rng.gen_range(0..1_000_000) as f64).collect();
        let cap = if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..2_000_000) as f64) };
        let buffer = cap.map_or(Bound::Infinite, Bound::Finite);
        let plan = greedy_rates_from_caps(&r_fso, &r_rf, buffer, 1.0);
        let (c_sr, c_rd) = greedy_oracle(&r_fso, &r_rf, cap);
        assert_eq!(plan.c_sr, c_sr);
        assert_eq!(plan.c_rd, c_rd);
    }
}

#[test]
fn greedy_along_a_trajectory_respects_capacities() {
    let p = ScenarioParams::default();
    let (fso, rf) = link_models(&p).unwrap();
    let traj = Trajectory::hover([700.0, 0.0], p.num_slots, p.slot_s);
    let plan = greedy_rates(&p, &traj, &fso, &rf, Bound::Finite(1e8));
    let r_fso = fso.rate([700.0, 0.0, 100.0], p.src_pos);
    let r_rf = rf.rate([700.0, 0.0, 100.0], p.dst_pos);
    assert!(plan.c_sr.iter().all(|&s| s <= r_fso));
    assert!(plan.c_rd.iter().all(|&d| d <= r_rf));
    let t = evolve_queue(&plan, p.slot_s).unwrap();
    assert!(t.q_bits.iter().all(|&q| (0.0..=1e8 + 1e-6).contains(&q)));
}

#[test]
fn packet_replay_examples() {
    let plan = RatePlan { c_sr: vec![1e6, 1e6, 1e6, 0.0], c_rd: vec![1e6, 1e6, 1e6] };
    let r = packet_delay_replay(&plan, 1e6, 1.0);
    assert_eq!(r.delays, vec![1, 1, 1]);
    assert_eq!(r.undelivered, 0);
    assert_eq!(r.mean, Some(1.0));
    assert_eq!(r.histogram, vec![0, 3]);

    let plan = RatePlan { c_sr: vec![10.0; 3], c_rd: vec![10.0, 10.0] };
    let r = packet_delay_replay(&plan, 10.0, 1.0);
    assert_eq!(r.delays, vec![1, 1]);
    assert_eq!(r.undelivered, 1);

    let plan = RatePlan { c_sr: vec![5.0; 4], c_rd: vec![0.0; 3] };
    let r = packet_delay_replay(&plan, 2.0, 1.0);
    assert!(r.delays.is_empty());
    assert_eq!(r.undelivered, 10);
    assert_eq!(r.mean, None);
}

#[test]
fn plan_checker_flags_each_violation() {
    let caps = vec![10.0; 3];
    let ok = RatePlan { c_sr: vec![10.0, 10.0, 0.0], c_rd: vec![10.0, 10.0] };
    assert!(check_plan(&ok, &caps, &caps, Bound::Infinite, 1.0, 1e-9).is_empty());
    let over = RatePlan { c_sr: vec![11.0, 10.0, 0.0], c_rd: vec![10.0, 10.0] };
    assert_eq!(check_plan(&over, &caps, &caps, Bound::Infinite, 1.0, 1e-9).len(), 1);
    let early = RatePlan { c_sr: vec![5.0, 0.0, 0.0], c_rd: vec![10.0, 0.0] };
    assert!(!check_plan(&early, &caps, &caps, Bound::Infinite, 1.0, 1e-9).is_empty());
    assert!(!check_plan(&ok, &caps, &caps, Bound::Finite(5.0), 1.0, 1e-9).is_empty());
}

#[test]
fn trace_export_columns() {
    let plan = RatePlan { c_sr: vec![10.0; 3], c_rd: vec![10.0, 10.0] };
    let t = evolve_queue(&plan, 1.0).unwrap();
    let text = trace_text(&plan, &t);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "slot,c_sr_bps,c_rd_bps,q_bits");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,1.000000e1,0.000000e0,"));
}

fn causal_plan() -> impl Strategy<Value = (RatePlan, f64)> {
    (2usize..40, 0.25f64..2.0).prop_flat_map(|(n, dt)| {
        (prop::collection::vec(0.0f64..1e7, n), prop::collection::vec(0.0f64..1e7, n), Just(dt))
            .prop_map(|(fso, rf, dt)| (greedy_rates_from_caps(&fso, &rf, Bound::Infinite, dt), dt))
    })
}

proptest! {
    #[test]
    fn conservation((plan, dt) in causal_plan()) {
        let t = evolve_queue(&plan, dt).unwrap();
        let net: f64 = plan.c_sr.iter().sum::<f64>() * dt - plan.c_rd.iter().sum::<f64>() * dt;
        let q_n = *t.q_bits.last().unwrap();
        prop_assert!((net - q_n).abs() <= 1e-6 * (1.0 + net.abs()));
    }

    #[test]
    fn departures_never_exceed_arrivals((plan, dt) in causal_plan()) {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 1..=plan.num_slots() {
            a += plan.c_sr[k - 1] * dt;
            d += plan.rd(k) * dt;
            prop_assert!(d <= a * (1.0 + 1e-12) + 1e-6);
        }
        let t = evolve_queue(&plan, dt).unwrap();
        prop_assert!(t.q_bits.iter().all(|&q| q >= -1e-6));
    }

    #[test]
    fn queue_matches_the_cumulative_form((plan, dt) in causal_plan()) {
        let t = evolve_queue(&plan, dt).unwrap();
        for n in 1..=plan.num_slots() {
            let s: f64 = (1..=n).map(|k| plan.c_sr[k - 1] * dt).sum();
            let d: f64 = (1..=n).map(|k| plan.rd(k) * dt).sum();
            prop_assert!((t.q_bits[n - 1] - (s - d)).abs() <= 1e-6 * (1.0 + s));
        }
    }

    #[test]
    fn littles_law_on_stationary_plans(n in 5usize..200, packets_per_slot in 1u32..20, packet in 1e3f64..1e7) {
        let rate = packets_per_slot as f64 * packet;
        let mut c_sr = vec![rate; n];
        c_sr[n - 1] = 0.0;
        let plan = RatePlan { c_sr, c_rd: vec![rate; n - 1] };
        let t = evolve_queue(&plan, 1.0).unwrap();
        let replay = packet_delay_replay(&plan, packet, 1.0);
        prop_assert_eq!(replay.undelivered, 0);
        let little = t.avg_delay_slots.unwrap();
        prop_assert!((little - replay.mean.unwrap()).abs() <= 1.0);
    }

    #[test]
    fn greedy_stays_within_the_buffer(
        fso in prop::collection::vec(0.0f64..1e7, 2..30),
        cap in 0.0f64..2e7,
    ) {
        let rf: Vec<f64> = fso.iter().rev().cloned().collect();
        let plan = greedy_rates_from_caps(&fso, &rf, Bound::Finite(cap), 1.0);
        let t = evolve_queue(&plan, 1.0).unwrap();
        prop_assert!(t.q_bits.iter().all(|&q| q <= cap + 1e-6));
        prop_assert!(check_plan(&plan, &fso, &rf, Bound::Finite(cap), 1.0, 1e-9).is_empty());
    }
}
