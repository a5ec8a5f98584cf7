use relayplan::harness::{
    apply_sweep_value, metrics_text, modal_bin, optimize, parse_trajectory, pmf, pmf_text, run_baseline, sweep,
    sweep_text, trajectory_text, Scheme, SweepKey,
};
use relayplan::planner::{InitMode, PlanOptions};
use relayplan::{Bound, Mode, ScenarioParams, Trajectory};

fn small() -> ScenarioParams {
    ScenarioParams::parse("num_slots=30\nhorizon_s=30\n").unwrap()
}

#[test]
fn hover_fills_one_bin() {
    let t = Trajectory::hover([700.0, 0.0], 50, 1.0);
    let bins = pmf(&t, 300.0, 250.0);
    assert_eq!(bins.len(), 1);
    assert_eq!(bins[0].mass, 1.0);
    assert_eq!((bins[0].lo, bins[0].hi), (550.0, 850.0));
}

#[test]
fn uniform_sweep_gives_a_flat_pmf() {
    let n = 2000;
    let speed = 2000.0 / (n + 1) as f64;
    let t = Trajectory::integrate([0.0, 0.0], [speed, 0.0], vec![[0.0; 2]; n + 1], 1.0);
    let bins = pmf(&t, 250.0, 0.0);
    assert_eq!(bins.len(), 8);
    let masses: Vec<f64> = bins.iter().map(|b| b.mass).collect();
    let (lo, hi) = masses.iter().fold((1.0_f64, 0.0_f64), |(a, b), &m| (a.min(m), b.max(m)));
    assert!(hi <= 2.0 * lo);
    assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn modal_bin_prefers_the_source_side_on_ties() {
    let mut t = Trajectory::hover([100.0, 0.0], 4, 1.0);
    t.pos[3] = [1000.0, 0.0];
    t.pos[4] = [1000.0, 0.0];
    let bins = pmf(&t, 300.0, 0.0);
    assert_eq!(modal_bin(&bins).lo, 0.0);
    assert!(pmf_text(&bins).starts_with("bin_lo_m,bin_hi_m,mass\n0,300,0.500000000\n"));
}

#[test]
fn trajectory_file_round_trip() {
    let acc: Vec<[f64; 2]> = (0..=12).map(|k| [if k < 6 { 2.5 } else { -2.5 }, 0.5]).collect();
    let t = Trajectory::integrate([10.0, -3.0], [1.0, 0.0], acc, 1.0);
    let back = parse_trajectory(&trajectory_text(&t), 1.0).unwrap();
    assert_eq!(back.num_slots(), t.num_slots());
    for (a, b) in back.pos.iter().zip(&t.pos) {
        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
    }
    assert!(back.kinematic_residual() < 1e-5);
    assert!(parse_trajectory("slot,x\n0,1\n", 1.0).is_err());
    assert!(parse_trajectory("h\n0,a,0,0,0,0,0\n", 1.0).is_err());
}

#[test]
fn sweep_rows_follow_the_values() {
    let p = small();
    let opts = PlanOptions { init: InitMode::Midpoint, tol: 1e-3, max_iters: 4 };
    let values = [Bound::Finite(1e8), Bound::Finite(1e9), Bound::Infinite];
    let rows = sweep(&p, SweepKey::BufferBits, &values, Mode::DelayTolerant, &opts);
    assert_eq!(rows.len(), 3);
    for (row, v) in rows.iter().zip(&values) {
        assert_eq!(row.value, *v);
        assert!(row.error.is_none(), "{:?}", row.error);
        assert!(row.objective_bps.unwrap() > 0.0);
    }
    let text = sweep_text(&rows);
    assert!(text.starts_with("value,objective_bps,iterations,mean_delay_slots,mean_packet_delay"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn sweep_failures_stay_in_their_row() {
    let p = small();
    let opts = PlanOptions::from_params(&p);
    let rows = sweep(&p, SweepKey::VisibilityKm, &[Bound::Finite(-1.0), Bound::Finite(0.8)], Mode::DelayTolerant, &opts);
    assert!(rows[0].error.is_some() && rows[0].objective_bps.is_none());
    assert!(rows[1].error.is_none());
}

#[test]
fn sweep_keys_touch_the_right_field() {
    let p = small();
    let q = apply_sweep_value(&p, SweepKey::RefSnrDb, Bound::Finite(21.0)).unwrap();
    assert_eq!(q.ref_snr_db, 21.0);
    let q = apply_sweep_value(&p, SweepKey::DelayReqSlots, Bound::Infinite).unwrap();
    assert_eq!(q.delay_req_slots, Bound::Infinite);
    assert!(apply_sweep_value(&p, SweepKey::VisibilityKm, Bound::Infinite).is_err());
    assert!("altitude".parse::<SweepKey>().is_err());
}

#[test]
fn outputs_are_deterministic() {
    let p = small();
    let opts = PlanOptions::from_params(&p);
    let a = optimize(&p, Mode::DelayLimited, &opts).unwrap();
    let b = optimize(&p, Mode::DelayLimited, &opts).unwrap();
    assert_eq!(metrics_text(&p, &a), metrics_text(&p, &b));
    assert_eq!(trajectory_text(&a.trajectory), trajectory_text(&b.trajectory));

    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = run_baseline(&p, Scheme::Static, d1.path()).unwrap();
    let m2 = run_baseline(&p, Scheme::Static, d2.path()).unwrap();
    assert_eq!(m1, m2);
    for f in ["trajectory.csv", "queue.csv", "metrics.txt"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap());
    }
}
