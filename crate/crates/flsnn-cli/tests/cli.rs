use std::fs;
use std::path::{Path, PathBuf};

use flsnn_cli::{plot, report, run, sweep};
use flsnn_core::config::ExperimentConfig;
use flsnn_core::fl::RoundMetrics;

const DESK_CONFIG: &str = "\
seed = 21
model.kind = \"ann\"
model.layers = [6, 8, 3]
fl.clients = 2
fl.rounds = 2
fl.batch_size = 8
data.features = 6
data.classes = 3
data.train_samples = 60
data.test_samples = 30
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_writes_one_row_per_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DESK_CONFIG);
    let out = tmp.path().join("run");
    run::cmd_train(&cfg, Some(&out), None).unwrap();

    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], RoundMetrics::CSV_HEADER);
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("2,"));
    assert!(out.join("model.bin").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DESK_CONFIG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run::cmd_train(&cfg, Some(&a), None).unwrap();
    run::cmd_train(&cfg, Some(&b), None).unwrap();
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    assert_eq!(fs::read(a.join("model.bin")).unwrap(), fs::read(b.join("model.bin")).unwrap());
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DESK_CONFIG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run::cmd_train(&cfg, Some(&a), Some(7)).unwrap();
    run::cmd_train(&cfg, Some(&b), None).unwrap();
    assert_ne!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    let manifest = run::RunManifest::load(&a).unwrap();
    assert_eq!(manifest.seed, 7);
}

#[test]
fn fldr_linear_kappa_column_follows_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let base = DESK_CONFIG.replace("fl.rounds = 2", "fl.rounds = 5");
    let text = format!(
        "{base}compression.mode = \"linear\"\ncompression.alpha = 0.06\ncompression.omega = 0.01\ncompression.rounds = 100\n"
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("run");
    run::cmd_train(&cfg, Some(&out), None).unwrap();
    let rows = report::read_metrics_csv(&out.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    for (i, line) in csv.lines().skip(1).enumerate() {
        let kappa: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((kappa - (0.06 - 0.0005 * i as f64)).abs() < 1e-12);
    }
}

#[test]
fn sweep_kappa_writes_summary_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{DESK_CONFIG}compression.mode = \"fixed\"\n");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("sweep");
    sweep::cmd_sweep(
        &cfg,
        "compression.kappa",
        &["1.0".into(), "0.5".into(), "0.06".into()],
        Some(&out),
        None,
        Some(1),
    )
    .unwrap();

    for v in ["1.0", "0.5", "0.06"] {
        assert!(out.join(format!("kappa-{v}")).join("metrics.csv").exists());
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "compression.kappa,highest_acc,cum_frac_incl,cum_frac_excl");
    // fraction of traffic decreases with kappa
    let frac = |line: &str| -> f64 { line.split(',').nth(3).unwrap().parse().unwrap() };
    assert!(frac(lines[1]) >= frac(lines[2]));
    assert!(frac(lines[2]) > frac(lines[3]));
}

#[test]
fn degenerate_sigma_sweep_equals_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{DESK_CONFIG}channel.mode = \"relative\"\nchannel.sigma = 0.1\n");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("sweep");
    sweep::cmd_sweep(&cfg, "channel.sigma", &["0.0".into()], Some(&out), None, Some(1)).unwrap();

    let plain = tmp.path().join("plain");
    let zero_noise = format!("{DESK_CONFIG}channel.mode = \"relative\"\nchannel.sigma = 0.0\n");
    let cfg0 = write_config(&tmp.path().join("."), &zero_noise);
    run::cmd_train(&cfg0, Some(&plain), None).unwrap();
    assert_eq!(
        fs::read(out.join("sigma-0.0/metrics.csv")).unwrap(),
        fs::read(plain.join("metrics.csv")).unwrap()
    );
}

#[test]
fn sweep_rejects_bad_axis() {
    let err = sweep::override_key(DESK_CONFIG, "compression.kapa", "0.5").unwrap_err().to_string();
    assert!(err.contains("kapa"), "{err}");
}

#[test]
fn integer_axis_values_stay_integers() {
    let cfg = sweep::override_key(DESK_CONFIG, "fl.rounds", "7").unwrap();
    assert_eq!(cfg.fl.rounds, 7);
}

fn write_run(dir: &Path, label: &str, rows: &[(usize, f64, f64)]) {
    fs::create_dir_all(dir).unwrap();
    let mut csv = String::from(RoundMetrics::CSV_HEADER);
    csv.push('\n');
    for &(round, acc, frac) in rows {
        csv.push_str(&format!("{round},0.06,1.0,1.0,{acc},100,100,{frac},{frac},0.0\n"));
    }
    fs::write(dir.join("metrics.csv"), csv).unwrap();
    let manifest = format!(
        "{{\"label\":\"{label}\",\"seed\":1,\"config_sha256\":\"x\",\"rounds\":{},\"highest_acc\":0.0,\"final_acc\":0.0,\"cum_frac_incl\":0.0,\"cum_frac_excl\":0.0}}",
        rows.len()
    );
    fs::write(dir.join("manifest.json"), manifest).unwrap();
}

#[test]
fn report_matches_hand_reading() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    // 3 hand-built rounds: crosses 25% at round 1, 50% at round 3, never 75%
    write_run(&dir, "hand", &[(1, 0.30, 0.010), (2, 0.45, 0.020), (3, 0.55, 0.030)]);
    let cols = report::build_report(&[dir]).unwrap();
    assert_eq!(cols.len(), 1);
    let c = &cols[0];
    assert_eq!(c.label, "hand");
    assert_eq!(c.at_threshold[0], Some(0.010)); // 25%
    assert_eq!(c.at_threshold[1], Some(0.020)); // 40%
    assert_eq!(c.at_threshold[2], Some(0.030)); // 50%
    assert_eq!(c.at_threshold[3], None); // 60%
    assert_eq!(c.at_threshold[5], None); // 75%: absence marker
    assert!((c.highest_acc - 0.55).abs() < 1e-12);
    let text = report::render_text(&cols);
    assert!(text.contains(report::ABSENT));
}

#[test]
fn threshold_zero_reads_round_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    write_run(&dir, "hand", &[(1, 0.30, 0.010), (2, 0.45, 0.020)]);
    let rows = report::read_metrics_csv(&dir.join("metrics.csv")).unwrap();
    assert_eq!(report::fraction_at_threshold(&rows, 0.0), Some(0.010));
}

#[test]
fn report_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    write_run(&dir, "hand", &[(1, 0.80, 0.010)]);
    let path = report::cmd_report(&[dir], Some(tmp.path())).unwrap();
    let csv = fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("accuracy,hand\n"));
    assert!(csv.contains("0.75,0.010000"));
    assert!(csv.contains("highest,0.8"));
}

#[test]
fn report_rejects_missing_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("empty");
    fs::create_dir_all(&dir).unwrap();
    assert!(report::cmd_report(&[dir], Some(tmp.path())).is_err());
}

#[test]
fn plot_single_run_has_r_points() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    write_run(&dir, "one", &[(1, 0.3, 0.01), (2, 0.4, 0.02), (3, 0.5, 0.03), (4, 0.6, 0.04)]);
    let path = plot::cmd_plot(&[dir], "test_acc", Some(tmp.path())).unwrap();
    let svg = fs::read_to_string(path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert_eq!(svg.matches("<circle").count(), 4);
    assert!(svg.contains(">one<"));
}

#[test]
fn plot_two_runs_two_polylines() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write_run(&a, "a", &[(1, 0.3, 0.01), (2, 0.4, 0.02)]);
    write_run(&b, "b", &[(1, 0.2, 0.01), (2, 0.5, 0.02)]);
    let path = plot::cmd_plot(&[a, b], "test_loss", Some(tmp.path())).unwrap();
    let svg = fs::read_to_string(path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">a<") && svg.contains(">b<"));
}

#[test]
fn plot_empty_metrics_errors_without_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    write_run(&dir, "x", &[]);
    let err = plot::cmd_plot(&[dir], "test_acc", Some(tmp.path())).unwrap_err();
    assert!(err.to_string().contains("no data rows"));
    assert!(!tmp.path().join("plot-test_acc.svg").exists());
}

#[test]
fn plot_rejects_unknown_field() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r1");
    write_run(&dir, "x", &[(1, 0.3, 0.01)]);
    let err = plot::cmd_plot(&[dir], "accuracy", Some(tmp.path())).unwrap_err();
    assert!(err.to_string().contains("unknown field"));
}

#[test]
fn env_var_sets_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    // run_dir resolution only; no run executed
    std::env::set_var("FLSNN_OUT_ROOT", tmp.path());
    let cfg = ExperimentConfig::default();
    let dir = run::resolve_run_dir(&cfg, None);
    std::env::remove_var("FLSNN_OUT_ROOT");
    assert!(dir.starts_with(tmp.path()));
    assert!(dir.file_name().unwrap().to_string_lossy().ends_with("-s42"));
}
