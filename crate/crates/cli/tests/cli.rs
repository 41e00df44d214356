use std::path::Path;
use std::process::{Command, Output};

use spikecov::harness::io::{read_chain, read_matrix_csv, read_truth, write_matrix_csv};
use spikecov::harness::{loss_against_truth, simulate, ExperimentConfig};
use spikecov::{Mat, OrthoFrame};

fn spikecov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikecov"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = spikecov(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: [&str; 8] = ["--n", "40", "--p", "30", "--s", "5", "--seed", "7"];
const SHORT_CHAIN: [&str; 4] = ["--burnin", "60", "--samples", "40"];

fn simulate_into(dir: &Path) {
    let mut args = vec!["simulate", "-o", dir.to_str().unwrap()];
    args.extend(SMALL);
    ok(&args);
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate_into(a.path());
    simulate_into(b.path());
    for f in ["truth.json", "data.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let y = read_matrix_csv(&a.path().join("data.csv"), false).unwrap();
    assert_eq!(y.shape(), (40, 30));
    let cfg = ExperimentConfig {
        n: 40,
        p: 30,
        s: 5,
        base_seed: 7,
        ..Default::default()
    };
    let (model, y_mem) = simulate(&cfg, 7).unwrap();
    assert_eq!(y, y_mem);
    assert_eq!(read_truth(&a.path().join("truth.json")).unwrap(), model);
}

#[test]
fn header_toggle() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--header", "-o", dir.path().to_str().unwrap()];
    args.extend(SMALL);
    ok(&args);
    let text = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert!(text.starts_with("c0,c1,"));
    assert_eq!(
        read_matrix_csv(&dir.path().join("data.csv"), true)
            .unwrap()
            .shape(),
        (40, 30)
    );
}

fn fit_into(data: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "fit",
        "--data",
        data.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ];
    args.extend(SHORT_CHAIN);
    args.extend(["--seed", "3"]);
    args.extend(extra);
    ok(&args)
}

#[test]
fn fit_is_deterministic_and_orthonormal() {
    let sim = tempfile::tempdir().unwrap();
    simulate_into(sim.path());
    let data = sim.path().join("data.csv");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    fit_into(&data, a.path(), &[]);
    fit_into(&data, b.path(), &[]);
    for f in [
        "sigma_hat.csv",
        "u_hat.csv",
        "omega_hat.csv",
        "xi_freq.csv",
        "summary.json",
        "chain.bin",
        "ci_lower.csv",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let u = read_matrix_csv(&a.path().join("u_hat.csv"), false).unwrap();
    assert!((u.transpose() * &u - Mat::identity(1, 1)).norm() < 1e-10);
    let (head, draws) = read_chain(&a.path().join("chain.bin")).unwrap();
    assert_eq!((head.n, head.p, head.r, head.seed), (40, 30, 1, 3));
    assert_eq!(draws.len(), 40);
}

#[test]
fn fit_csv_chain_and_auto_rank() {
    let sim = tempfile::tempdir().unwrap();
    simulate_into(sim.path());
    let out = tempfile::tempdir().unwrap();
    fit_into(
        &sim.path().join("data.csv"),
        out.path(),
        &["--rank", "auto", "--csv-chain"],
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["r"], 1);
    assert_eq!(summary["rank_estimate"]["rank"], 1);
    let (head, draws) = read_chain(&out.path().join("chain.csv")).unwrap();
    assert_eq!(head.n_draws, draws.len());
}

#[test]
fn losses_zero_for_truth_and_match_library() {
    let sim = tempfile::tempdir().unwrap();
    simulate_into(sim.path());
    let truth_path = sim.path().join("truth.json");
    let model = read_truth(&truth_path).unwrap();
    let sig = sim.path().join("sigma0.csv");
    let u0 = sim.path().join("u0.csv");
    write_matrix_csv(&sig, &model.covariance(), false).unwrap();
    write_matrix_csv(&u0, model.u0.mat(), false).unwrap();
    let args = [
        "losses",
        "--sigma-hat",
        sig.to_str().unwrap(),
        "--u-hat",
        u0.to_str().unwrap(),
        "--truth",
        truth_path.to_str().unwrap(),
        "-o",
        sim.path().to_str().unwrap(),
    ];
    let stdout = ok(&args);
    let rep: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    for k in [
        "op_loss",
        "proj_loss_sq",
        "two_inf_loss_sq",
        "frob_loss",
        "inf_loss",
    ] {
        assert!(rep[k].as_f64().unwrap().abs() < 1e-12, "{k}");
    }

    let fit_dir = tempfile::tempdir().unwrap();
    fit_into(&sim.path().join("data.csv"), fit_dir.path(), &[]);
    let s_hat = fit_dir.path().join("sigma_hat.csv");
    let u_hat = fit_dir.path().join("u_hat.csv");
    let args = [
        "losses",
        "--sigma-hat",
        s_hat.to_str().unwrap(),
        "--u-hat",
        u_hat.to_str().unwrap(),
        "--truth",
        truth_path.to_str().unwrap(),
        "-o",
        fit_dir.path().to_str().unwrap(),
    ];
    let rep: serde_json::Value = serde_json::from_str(ok(&args).trim()).unwrap();
    let want = loss_against_truth(
        &read_matrix_csv(&s_hat, false).unwrap(),
        &OrthoFrame::with_tolerance(read_matrix_csv(&u_hat, false).unwrap(), 1e-8).unwrap(),
        &model,
    )
    .unwrap();
    assert!((rep["op_loss"].as_f64().unwrap() - want.op_loss).abs() < 1e-12);
    assert!((rep["two_inf_loss_sq"].as_f64().unwrap() - want.two_inf_loss_sq).abs() < 1e-12);
    let table = std::fs::read_to_string(fit_dir.path().join("losses.csv")).unwrap();
    assert!(table.starts_with("method,op_loss,proj_loss_sq,two_inf_loss_sq,frob_loss,inf_loss"));
}

#[test]
fn replicate_single_run_medians() {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec![
        "replicate",
        "--replicates",
        "1",
        "-o",
        out.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    args.extend(SHORT_CHAIN);
    ok(&args);
    let mut per = csv::Reader::from_path(out.path().join("replicates.csv")).unwrap();
    let per: Vec<csv::StringRecord> = per.records().map(|r| r.unwrap()).collect();
    let mut med = csv::Reader::from_path(out.path().join("medians.csv")).unwrap();
    let med: Vec<csv::StringRecord> = med.records().map(|r| r.unwrap()).collect();
    assert_eq!(per.len(), 2);
    assert_eq!(&per[0][1], "7");
    for (p, m) in per.iter().zip(&med) {
        assert_eq!(&p[3], &m[0]);
        for k in 0..5 {
            assert_eq!(&p[4 + k], &m[1 + k]);
        }
    }
}

#[test]
fn replicate_seeds_are_logged() {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec![
        "replicate",
        "--replicates",
        "3",
        "--jobs",
        "2",
        "-o",
        out.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    args.extend(SHORT_CHAIN);
    ok(&args);
    let mut rdr = csv::Reader::from_path(out.path().join("replicates.csv")).unwrap();
    let seeds: Vec<String> = rdr.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(seeds, ["7", "7", "8", "8", "9", "9"]);
}

#[test]
fn motivating_csv() {
    let out = tempfile::tempdir().unwrap();
    ok(&[
        "motivating",
        "--s",
        "8",
        "--p",
        "20",
        "-o",
        out.path().to_str().unwrap(),
    ]);
    let mut rdr = csv::Reader::from_path(out.path().join("motivating.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    for row in &rows {
        let (p1, p2, t1, t2) = (row[4], row[5], row[6], row[7]);
        assert!((p1 - p2).abs() < 1e-9);
        assert!(t1 < t2 && t2 < p1);
    }
    // curves shrink toward the small-eps end
    assert!(rows[0][4] < rows[19][4]);
}

#[test]
fn keypixels_nested() {
    let sim = tempfile::tempdir().unwrap();
    simulate_into(sim.path());
    let out = tempfile::tempdir().unwrap();
    let data = sim.path().join("data.csv");
    let mut args = vec![
        "keypixels",
        "--data",
        data.to_str().unwrap(),
        "-o",
        out.path().to_str().unwrap(),
    ];
    args.extend(SHORT_CHAIN);
    args.extend(["--tau", "0", "0.05", "0.2"]);
    ok(&args);
    let mut rdr = csv::Reader::from_path(out.path().join("key_features.csv")).unwrap();
    let sets: Vec<Vec<usize>> = rdr
        .records()
        .map(|r| {
            r.unwrap()[2]
                .split_whitespace()
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(sets.len(), 3);
    assert!(sets[1].iter().all(|j| sets[0].contains(j)));
    assert!(sets[2].iter().all(|j| sets[1].contains(j)));
    let u = read_matrix_csv(&out.path().join("u_hat.csv"), false).unwrap();
    let nonzero = (0..u.nrows()).filter(|&j| u[(j, 0)] != 0.0).count();
    assert_eq!(sets[0].len(), nonzero);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 25, "p": 12, "s": 3, "base_seed": 5}"#).unwrap();
    ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "9",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    let y = read_matrix_csv(&dir.path().join("data.csv"), false).unwrap();
    assert_eq!(y.shape(), (9, 12));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikecov(&["simulate", "--s", "500", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = spikecov(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = spikecov(&[
        "fit",
        "--data",
        dir.path().join("missing.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = spikecov(&[
        "motivating",
        "--s",
        "20",
        "--eps-max",
        "0.5",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.108"));
}
