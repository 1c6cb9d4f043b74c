use std::fs;

use udn_posync::eval::{
    read_an_epochs_csv, read_epochs_csv, read_summary, run_scenario, summarize, write_outputs, InitPolicy, ScenarioConfig, TrajectoryChoice, EPOCHS_HEADER,
};
use udn_posync::fusion::FilterMode;

fn short(replications: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        replications,
        warmup_epochs: 20,
        ..Default::default()
    };
    cfg.trajectory.duration = 15.0;
    cfg
}

fn modes(names: &[&str]) -> Vec<FilterMode> {
    names.iter().map(|m| m.parse().unwrap()).collect()
}

#[test]
fn noiseless_truth_initialized_run_is_exact() {
    let mut cfg = short(2);
    cfg.init = InitPolicy::Truth;
    cfg.measurement.noise.sigma_elevation_deg = 0.0;
    cfg.measurement.noise.sigma_azimuth_deg = 0.0;
    cfg.measurement.noise.sigma_delay = 0.0;
    cfg.fusion.fixed_measurement_std = Some([1e-6, 1e-6, 1e-12]);
    // Gentle motion with matched process noise: both the one-step prediction
    // error (a·dt²/2) and the sigma-point curvature term (P/r) then stay
    // well below a micrometre.
    cfg.trajectory.accel = 0.2;
    cfg.fusion.sigma_v = 0.2;
    let r = run_scenario(&cfg).unwrap();
    let failures: Vec<_> = r.failures().collect();
    assert!(failures.is_empty(), "{failures:#?}");
    for (mode, s) in &r.modes {
        assert!(s.pooled.rmse_3d < 1e-6, "{mode}: {}", s.pooled.rmse_3d);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = short(3);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_outputs(&run_scenario(&cfg).unwrap(), d.path()).unwrap();
    }
    for f in ["epochs.csv", "an_epochs.csv", "summary.json", "config_echo.json"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn record_counts_match_epochs() {
    let cfg = short(2);
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.epochs.len(), cfg.epochs() * cfg.modes.len() * 2);
    assert_eq!(r.an_epochs.len(), r.epochs.len() * cfg.los_count);
    assert_eq!(r.replications[0].trajectory, udn_posync::sim::TrajectoryKind::Vehicle);
    assert_eq!(r.replications[1].trajectory, udn_posync::sim::TrajectoryKind::Drone);
}

#[test]
fn stream_does_not_depend_on_the_mode_set() {
    let mut a = short(2);
    a.modes = modes(&["posclock-ukf"]);
    let mut b = short(2);
    b.modes = modes(&["possync-ekf-doa", "posclock-ekf"]);
    let (ra, rb) = (run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    for (x, y) in ra.replications.iter().zip(&rb.replications) {
        assert_eq!(x.stream_hash.len(), 64);
        assert_eq!(x.stream_hash, y.stream_hash);
    }
    assert_eq!(ra.measurements, rb.measurements);
}

#[test]
fn doa_only_is_not_better_than_doa_toa() {
    let mut cfg = ScenarioConfig {
        replications: 10,
        trajectory_kind: TrajectoryChoice::Vehicle,
        modes: modes(&["posclock-ukf", "posclock-ukf-doa", "posclock-ekf", "posclock-ekf-doa"]),
        ..Default::default()
    };
    cfg.trajectory.duration = 30.0;
    let r = run_scenario(&cfg).unwrap();
    for est in ["ukf", "ekf"] {
        let full = r.modes[&format!("posclock-{est}")].median.rmse_3d;
        let doa = r.modes[&format!("posclock-{est}-doa")].median.rmse_3d;
        assert!(doa >= full, "{est}: doa-only {doa} < doa+toa {full}");
    }
}

#[test]
fn summary_is_recomputable_from_the_csv_files() {
    let mut cfg = short(2);
    cfg.modes = modes(&["posclock-ekf", "possync-ukf"]);
    let r = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, dir.path()).unwrap();

    let epochs = read_epochs_csv(&dir.path().join("epochs.csv")).unwrap();
    let an = read_an_epochs_csv(&dir.path().join("an_epochs.csv")).unwrap();
    assert_eq!(epochs, r.epochs);
    let (modes, meas) = summarize(&epochs, &an, cfg.warmup_epochs);
    let file = read_summary(&dir.path().join("summary.json")).unwrap();
    assert_eq!(file.warmup_epochs, 20);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    for (name, s) in &file.modes {
        let m = &modes[name];
        for (a, b) in [
            (s.pooled.rmse_3d, m.pooled.rmse_3d),
            (s.pooled.rmse_2d, m.pooled.rmse_2d),
            (s.pooled.rmse_z, m.pooled.rmse_z),
            (s.pooled.rmse_clock_un_ns, m.pooled.rmse_clock_un_ns),
            (s.median.rmse_3d, m.median.rmse_3d),
        ] {
            assert!(close(a, b), "{name}: {a} vs {b}");
        }
        assert_eq!(s.pooled.rmse_clock_an_ns.is_some(), name.starts_with("possync"));
    }
    assert!(close(file.measurements.rmse_delay_ns, meas.rmse_delay_ns));

    let echo = fs::read_to_string(dir.path().join("config_echo.json")).unwrap();
    assert_eq!(ScenarioConfig::from_json_str(&echo).unwrap(), cfg);
}

#[test]
fn csv_header_is_versioned() {
    let mut cfg = short(1);
    cfg.modes = modes(&["posclock-ukf"]);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&run_scenario(&cfg).unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), EPOCHS_HEADER);
    assert!(EPOCHS_HEADER.starts_with("schema_version,"));
    assert!(lines.all(|l| l.starts_with("1,")));
}

#[test]
fn output_directory_handling() {
    let mut cfg = short(1);
    cfg.modes = modes(&["posclock-ekf"]);
    let r = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("a/b/c");
    write_outputs(&r, &nested).unwrap();
    assert!(nested.join("summary.json").exists());

    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    assert!(write_outputs(&r, &file.join("out")).is_err());
}

#[test]
fn channel_mode_cascade_runs_end_to_end() {
    let mut cfg = ScenarioConfig {
        replications: 1,
        warmup_epochs: 10,
        trajectory_kind: TrajectoryChoice::Vehicle,
        modes: modes(&["posclock-ukf"]),
        ..Default::default()
    };
    cfg.network.extent = [50.0, 0.0];
    cfg.trajectory.duration = 3.0;
    cfg.trajectory.v_max = 1.0;
    cfg.trajectory.bounds = Some([[10.0, 40.0], [5.0, 20.0]]);
    cfg.measurement.mode = udn_posync::sim::MeasurementMode::Channel;
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.failures().count(), 0);
    assert!(r.measurements.rmse_delay_ns < 10.0, "{:?}", r.measurements);
    assert!(r.modes["posclock-ukf"].pooled.rmse_3d < 3.0);
}
