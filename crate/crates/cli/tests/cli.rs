use std::fs;
use std::path::Path;
use std::process::Command;

use qdemon_cli::{cmd_run, cmd_sweep, RunConfig, SWEEP_HEADER};
use qdemon_core::ft::SweepAxis;
use qdemon_core::FeedbackMode;
use serde_json::Value;

fn config(dir: &Path, text: &str) -> RunConfig {
    let mut cfg = RunConfig::parse_str(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn single_trajectory_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = "n_traj=1\nseed=99\ntau_us=0.4\nbootstrap_b=100";
    let (summary, _) = cmd_run(&config(a.path(), text)).unwrap();
    cmd_run(&config(b.path(), text)).unwrap();
    // one sample has no standard error
    assert!(summary.mean_i_se.is_nan());
    let v: Value = serde_json::from_slice(&fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    assert!(v["mean_i_se"].is_null());
    assert_eq!(read_all(a.path()), read_all(b.path()));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let text = "n_traj=300\nseed=7\ntau_us=0.8\nbootstrap_b=200\nemit_paths=true\npath_stride=40\nfeedback_mode=randomized";
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (threads, dir) in [1, 2, 5].into_iter().zip(&dirs) {
        let cfg = config(dir.path(), text);
        in_pool(threads, || cmd_run(&cfg)).unwrap();
    }
    let first = read_all(dirs[0].path());
    assert_eq!(first.len(), 5);
    for d in &dirs[1..] {
        assert_eq!(read_all(d.path()), first);
    }
}

#[test]
fn trajectory_file_has_one_line_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        feedback_mode: FeedbackMode::Randomized,
        ..config(dir.path(), "n_traj=400\ntau_us=0.4\nbootstrap_b=100")
    };
    let (summary, _) = cmd_run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 400);
    let rejected = lines.iter().filter(|l| l["accepted"] == false).count();
    assert!(rejected > 300, "random pulses should mostly miss the window");
    assert_eq!(summary.n_accepted, 400 - rejected);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["id"], i as u64);
        assert_eq!(l["version"], qdemon_cli::VERSION);
        assert!(l.get("paths").is_none());
    }

    let csv = fs::read_to_string(dir.path().join("bloch_points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401);
    assert!(csv.starts_with("id,accepted,x_pre,y_pre,z_pre,x_post,y_post,z_post\n"));
}

#[test]
fn downsampled_paths_have_the_requested_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "n_traj=3\nemit_paths=true\npath_stride=20\nbootstrap_b=100");
    cmd_run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let paths = &v["paths"];
        for key in ["times", "demon", "true", "omniscient", "info_tilde"] {
            assert_eq!(paths[key].as_array().unwrap().len(), 100, "{key}");
        }
        let last = paths["times"].as_array().unwrap().last().unwrap().as_f64().unwrap();
        assert!((last - 2.0).abs() < 1e-12);
        // the final sample is the pre-feedback demon state
        assert_eq!(paths["demon"].as_array().unwrap().last().unwrap(), &v["demon_pre_fb"]);
    }
}

#[test]
fn summary_is_independent_of_path_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = "n_traj=200\ntau_us=0.8\nbootstrap_b=100";
    cmd_run(&config(a.path(), base)).unwrap();
    cmd_run(&config(b.path(), &format!("{base}\nemit_paths=true\npath_stride=7"))).unwrap();
    let sa: Value = serde_json::from_slice(&fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    let sb: Value = serde_json::from_slice(&fs::read(b.path().join("summary.json")).unwrap()).unwrap();
    for key in ["ft_tpm", "ft_weighted", "ft_no_info", "mean_i", "mean_i_se", "i_gain", "i_loss"] {
        assert_eq!(sa[key], sb[key], "{key}");
    }
}

#[test]
fn summary_echoes_parameters_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (summary, _) = cmd_run(&config(dir.path(), "n_traj=100\nmode=filter-only\ntau_us=0.4\nbootstrap_b=100")).unwrap();
    assert!(summary.ft_tpm.is_none());
    assert!(!summary.flags.is_empty());
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["params"]["config"]["mode"], "filter-only");
    assert_eq!(v["params"]["derived"]["n_steps"], 400);
    assert!((v["params"]["derived"]["s0"].as_f64().unwrap() - 0.0901).abs() < 1e-4);
    assert!(v["params"]["config"].get("output_dir").is_none());
    assert!(v["ft_tpm"].is_null());
}

#[test]
fn tau_sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "n_traj=100\nbootstrap_b=100");
    cmd_sweep(&cfg, SweepAxis::Tau, &[0.4, 0.8, 1.2, 1.6, 2.0]).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], SWEEP_HEADER);
    assert!(lines[1].starts_with("0.4,"));
    let meta: Value = serde_json::from_slice(&fs::read(dir.path().join("sweep.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["axis"], "tau");
    assert_eq!(meta["points"].as_array().unwrap().len(), 5);
}

#[test]
fn beta_sweep_reports_thermal_polarization_and_repeats_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let betas = [0.1, 1.0, 2.5, 4.0];
    let text = "n_traj=80\ntau_us=0.4\nbootstrap_b=100";
    cmd_sweep(&config(a.path(), text), SweepAxis::Beta, &betas).unwrap();
    in_pool(3, || cmd_sweep(&config(b.path(), text), SweepAxis::Beta, &betas)).unwrap();
    assert_eq!(read_all(a.path()), read_all(b.path()));

    let mut rdr = csv::Reader::from_path(a.path().join("sweep.csv")).unwrap();
    for (row, beta) in rdr.records().zip(betas) {
        let row = row.unwrap();
        let value: f64 = row[0].parse().unwrap();
        let z0: f64 = row[1].parse().unwrap();
        assert_eq!(value, beta);
        assert!((z0 - (beta / 2.0f64).tanh()).abs() <= 1e-12);
    }
}

#[test]
fn failing_sweep_point_aborts_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "n_traj=20\nbootstrap_b=100");
    let err = cmd_sweep(&cfg, SweepAxis::Tau, &[0.4, 0.4005]).unwrap_err();
    assert!(err.to_string().contains("0.4005"), "{err}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn binary_reports_bad_keys_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_qdemon");

    let out = Command::new(exe).args(["run", "--eta", "1.5"]).current_dir(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));

    let cfg_path = dir.path().join("bad.cfg");
    fs::write(&cfg_path, "eta = 0.3\nwobble = 2\n").unwrap();
    let out = Command::new(exe)
        .args(["run", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wobble"));

    // flags override the file
    fs::write(&cfg_path, "n_traj = 5000\ntau_us = 0.4\nbootstrap_b = 100\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = Command::new(exe)
        .args(["run", "--config", cfg_path.to_str().unwrap(), "--n-traj", "30", "--threads", "2"])
        .args(["--output-dir", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("trajectories.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 30);
}

#[test]
fn check_command_passes_on_defaults() {
    let exe = env!("CARGO_BIN_EXE_qdemon");
    let out = Command::new(exe).args(["check", "--bootstrap-b", "200"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

#[test]
fn check_command_reports_purity_margin_at_unit_efficiency() {
    let exe = env!("CARGO_BIN_EXE_qdemon");
    let out = Command::new(exe)
        .args(["check", "--n-traj", "400", "--tau-us", "0.8", "--bootstrap-b", "200", "--eta", "1"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let purity = stdout.lines().find(|l| l.contains("purity")).unwrap();
    assert!(purity.starts_with("PASS"), "{stdout}");
    assert!(purity.contains("margin"));
    // near-pure demon states make the exponential average heavy-tailed at
    // this size, so other rows may fail; failures must be named
    if !out.status.success() {
        assert_eq!(out.status.code(), Some(1));
        let stderr = String::from_utf8_lossy(&out.stderr);
        let failed: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
        assert!(!failed.is_empty());
        for line in failed {
            let name = line.split_whitespace().nth(1).unwrap();
            assert!(stderr.contains(name), "{stderr}");
        }
    }
}
