use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relayplan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relayplan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn metric(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn tolerant_run_from_config_writes_products() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.txt"), "num_slots = 60\nhorizon_s = 60\nbuffer_bits = 1e9\n").unwrap();
    let out = relayplan(
        &["optimize", "--config", "s.txt", "--mode", "delay-tolerant", "--max-iters", "4", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("o/metrics.txt")).unwrap();
    assert_eq!(metric(&metrics, "mode"), "delay-tolerant");
    assert!(metric(&metrics, "objective_bps").parse::<f64>().unwrap() > 0.0);
    for f in ["trajectory.csv", "queue.csv", "iterations.csv", "scenario.txt"] {
        assert!(dir.path().join("o").join(f).exists(), "{f} missing");
    }
}

#[test]
fn delay_limit_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(
        &["optimize", "--mode", "delay-limited", "--delay-req", "5", "--max-iters", "3", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metric(&stdout, "mode"), "delay-limited");
    assert_eq!(metric(&stdout, "delay_req_slots"), "5");
    assert!(metric(&stdout, "avg_delay_slots").parse::<f64>().unwrap() <= 5.0 + 1e-6);
}

#[test]
fn missing_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(&["optimize", "--config", "absent.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.txt"));
}

#[test]
fn bad_config_value_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.txt"), "v_max = -3\n").unwrap();
    let out = relayplan(&["optimize", "--config", "s.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_sweep_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(&["sweep", "--sweep-key", "buffer_bits", "--values", ""], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = relayplan(&["sweep", "--sweep-key", "wingspan", "--values", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_table_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(
        &[
            "sweep", "--mode", "delay-tolerant", "--sweep-key", "buffer_bits", "--values", "5e8,inf", "--max-iters", "2",
            "--out", "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let mut lines = table.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("value,objective_bps,iterations,mean_delay_slots,mean_packet_delay"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("inf,"));
}

#[test]
fn static_baseline_reports_hover_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(&["baseline", "--scheme", "static", "--out", "b"], dir.path());
    assert!(out.status.success());
    let metrics = fs::read_to_string(dir.path().join("b/metrics.txt")).unwrap();
    let x_s: f64 = metric(&metrics, "x_s").parse().unwrap();
    assert!(x_s > 0.0 && x_s < 3000.0);
}

#[test]
fn ferry_baseline_describes_its_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = relayplan(&["baseline", "--scheme", "ferry", "--d1", "300", "--d2", "300", "--out", "b"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(metric(&stdout, "cycle").contains("leg_slots=38"));
}

#[test]
fn unknown_scheme_and_bad_ranges_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(relayplan(&["baseline", "--scheme", "balloon"], dir.path()).status.code(), Some(1));
    let out = relayplan(&["baseline", "--scheme", "ferry", "--d1", "2000", "--d2", "1500"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hovering_relay_fills_one_bin() {
    let dir = tempfile::tempdir().unwrap();
    assert!(relayplan(&["baseline", "--scheme", "static", "--out", "b"], dir.path()).status.success());
    let out = relayplan(&["pmf", "b/trajectory.csv", "--bin-width", "300"], dir.path());
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ends_with(",1.000000000"));
}

#[test]
fn pmf_rejects_missing_file_and_bad_width() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(relayplan(&["pmf", "none.csv"], dir.path()).status.code(), Some(1));
    fs::write(dir.path().join("t.csv"), "slot,x_m,y_m,vx,vy,ax,ay\n0,1,0,0,0,0,0\n").unwrap();
    assert_eq!(relayplan(&["pmf", "t.csv", "--bin-width", "0"], dir.path()).status.code(), Some(1));
}

#[test]
fn unreachable_endpoints_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.txt"),
        "num_slots = 10\nendpoint_constraints = true\nq_i = 0, 0, 100\nq_f = 3000, 0, 100\n",
    )
    .unwrap();
    let out = relayplan(&["optimize", "--config", "s.txt", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
