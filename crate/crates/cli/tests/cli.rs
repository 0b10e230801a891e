use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsmask::grid::{read_pgm, write_mask_pgm, write_pgm};
use gsmask::levelset::read_level_set;
use gsmask::metrics::roc_auc;
use gsmask::splat::render;
use gsmask::synth::ShapeFamily;
use gsmask::{threshold, BinaryMask, EvalReport, FitResult, GaussianSplat};
use gsmask_cli::{cmd_bench, BenchArgs, RunConfig, EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE};

fn gsmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmask"))
        .args(args)
        .env_remove("GSMASK_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ellipse_target(dir: &Path) -> PathBuf {
    let path = dir.join("ellipse.pgm");
    let g = render(&GaussianSplat::new(33.1, 30.7, 9.0, 6.0, 0.4).unwrap(), 64, 64).unwrap();
    write_mask_pgm(&threshold(&g, 0.5), &path).unwrap();
    path
}

#[test]
fn render_writes_requested_dims_and_peaks_at_mu() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = gsmask(&[
        "--out-dir",
        s(&out),
        "--width",
        "40",
        "--height",
        "30",
        "render",
        "--mu-x",
        "12.3",
        "--mu-y",
        "20.8",
        "--s-x",
        "4",
        "--s-y",
        "2.5",
        "--r",
        "0.7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(out.join("render.pgm")).unwrap();
    assert!(bytes.starts_with(b"P5\n40 30\n"));
    let field = read_pgm(out.join("render.pgm")).unwrap();
    assert_eq!(field.dims(), (40, 30));
    assert_eq!(field.argmax(), (12, 20));
    assert!(out.join("config.json").is_file());
}

#[test]
fn degenerate_scale_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsmask(&[
        "--out-dir",
        s(dir.path()),
        "render",
        "--mu-x",
        "5",
        "--mu-y",
        "5",
        "--s-x",
        "0",
        "--s-y",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL));
    assert!(stderr(&o).contains("degenerate splat scale"), "{}", stderr(&o));
}

#[test]
fn fit_ellipse_converges_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let target = ellipse_target(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gsmask(&[
            "--out-dir",
            s(&out),
            "--seed",
            "3",
            "--snapshot-every",
            "100",
            "fit",
            "--target",
            s(&target),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let json = fs::read(a.join("fit.json")).unwrap();
    assert_eq!(json, fs::read(b.join("fit.json")).unwrap());
    let result: FitResult = serde_json::from_slice(&json).unwrap();
    assert!(result.converged);
    assert!(result.target_dice.unwrap() >= 0.98);
    assert!(a.join("mask.pgm").is_file() && a.join("splat.pgm").is_file());
    assert!(a.join("snapshots/epoch_0000.pgm").is_file());
}

#[test]
fn dual_fit_writes_level_set_and_lsf_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let target = ellipse_target(dir.path());
    let out = dir.path().join("dual");
    let o = gsmask(&[
        "--out-dir",
        s(&out),
        "--epochs",
        "60",
        "--snapshot-every",
        "30",
        "fit",
        "--mode",
        "dual",
        "--target",
        s(&target),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: FitResult = serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(result.epochs_run, 60);
    assert!(result.cross_branch_dice.is_some());
    let lsf = read_level_set(out.join("level_set.pgm")).unwrap();
    assert_eq!(lsf.dims(), (64, 64));
    assert!(out.join("snapshots/epoch_0030_lsf.pgm").is_file());
}

#[test]
fn all_background_target_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.pgm");
    write_mask_pgm(&BinaryMask::empty(16, 16).unwrap(), &path).unwrap();
    let o = gsmask(&["--out-dir", s(dir.path()), "fit", "--target", s(&path)]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));
    assert!(stderr(&o).contains("undefined boundary"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let nope = dir.path().join("nope.pgm");
    for args in [
        vec!["fit", "--target", s(&nope)],
        vec!["eval", "--pred", s(&nope), "--gt", s(&nope)],
        vec!["edt", "--mask", s(&nope)],
    ] {
        let mut full = vec!["--out-dir", s(dir.path())];
        full.extend(args);
        assert_eq!(gsmask(&full).status.code(), Some(EXIT_DATA));
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gsmask(&["frobnicate"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(gsmask(&["eval"]).status.code(), Some(EXIT_USAGE));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "lamda_m = 1.0\n").unwrap();
    let o = gsmask(&[
        "--config",
        s(&bad),
        "render",
        "--mu-x",
        "1",
        "--mu-y",
        "1",
        "--s-x",
        "1",
        "--s-y",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = gsmask(&[
        "--out-dir",
        s(dir.path()),
        "--lambda-m",
        "-1",
        "render",
        "--mu-x",
        "1",
        "--mu-y",
        "1",
        "--s-x",
        "1",
        "--s-y",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE), "{}", stderr(&o));
}

#[test]
fn config_precedence_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    let from_file = dir.path().join("from-file");
    fs::write(
        &cfg_path,
        format!(
            r#"{{"width": 20, "height": 10, "seed": 5, "out_dir": {:?}}}"#,
            s(&from_file)
        ),
    )
    .unwrap();
    let from_env = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_gsmask"))
        .args([
            "--config",
            s(&cfg_path),
            "--height",
            "12",
            "render",
            "--mu-x",
            "5",
            "--mu-y",
            "5",
            "--s-x",
            "2",
            "--s-y",
            "2",
        ])
        .env("GSMASK_OUT_DIR", &from_env)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!from_file.exists());
    let echoed: RunConfig = serde_json::from_slice(&fs::read(from_env.join("config.json")).unwrap()).unwrap();
    assert_eq!((echoed.width, echoed.height, echoed.seed), (20, 12, 5));
    assert_eq!(echoed.out_dir, from_env);
    assert_eq!(echoed.lambda_dice, 0.5);
    assert_eq!(read_pgm(from_env.join("render.pgm")).unwrap().dims(), (20, 12));
}

#[test]
fn eval_identical_masks_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let target = ellipse_target(dir.path());
    let out = dir.path().join("eval");
    let o = gsmask(&["--out-dir", s(&out), "eval", "--pred", s(&target), "--gt", s(&target)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: EvalReport = serde_json::from_slice(&fs::read(out.join("eval.json")).unwrap()).unwrap();
    for v in [
        r.jaccard,
        r.dice,
        r.accuracy,
        r.sensitivity,
        r.specificity,
        r.auc.unwrap(),
        r.average_precision.unwrap(),
    ] {
        assert_eq!(v, 1.0);
    }
}

#[test]
fn eval_scores_csv_matches_pairwise_auc() {
    let dir = tempfile::tempdir().unwrap();
    let scores = [0.9, 0.8, 0.8, 0.7, 0.55, 0.5, 0.5, 0.4, 0.3, 0.1];
    let labels = [true, true, false, true, false, true, false, false, true, false];
    let mut text = String::from("score,label\n");
    for (sc, l) in scores.iter().zip(labels) {
        text.push_str(&format!("{sc},{}\n", u8::from(l)));
    }
    let csv_path = dir.path().join("scores.csv");
    fs::write(&csv_path, text).unwrap();
    let out = dir.path().join("eval");
    let o = gsmask(&["--out-dir", s(&out), "eval", "--scores", s(&csv_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: EvalReport = serde_json::from_slice(&fs::read(out.join("eval.json")).unwrap()).unwrap();
    // 5 positives x 5 negatives: wins 17, ties 2.
    let (mut twice, mut pairs) = (0, 0);
    for (a, &la) in scores.iter().zip(&labels) {
        for (b, &lb) in scores.iter().zip(&labels) {
            if la && !lb {
                pairs += 1;
                twice += if a > b {
                    2
                } else if a == b {
                    1
                } else {
                    0
                };
            }
        }
    }
    assert_eq!(r.auc.unwrap(), f64::from(twice) / f64::from(2 * pairs));
    assert_eq!(r.auc.unwrap(), roc_auc(&scores, &labels).unwrap());
    let curve = fs::read_to_string(out.join("pr_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("threshold,precision,recall"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn edt_round_trips_through_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let target = ellipse_target(dir.path());
    let out = dir.path().join("edt");
    let o = gsmask(&["--out-dir", s(&out), "edt", "--mask", s(&target)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("level_set.json").is_file() && out.join("edt.json").is_file());
    let lsf = read_level_set(out.join("level_set.pgm")).unwrap();
    let mask = gsmask::grid::read_mask_pgm(&target).unwrap();
    let exact = gsmask::signed_edt(&mask).unwrap();
    // 16-bit storage: off-boundary distances keep their sign, boundary zeros come back within a quantum.
    for (a, b) in lsf.as_field().values().iter().zip(exact.as_field().values()) {
        assert!((a - b).abs() < 1e-3);
        assert!(*b == 0.0 || a.signum() == b.signum());
    }
}

#[test]
fn eval_soft_prediction_uses_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let g = render(&GaussianSplat::new(16.0, 16.0, 5.0, 4.0, 0.0).unwrap(), 32, 32).unwrap();
    let pred = dir.path().join("pred.pgm");
    write_pgm(&g, &pred).unwrap();
    let gt = dir.path().join("gt.pgm");
    write_mask_pgm(&threshold(&g, 0.5), &gt).unwrap();
    let out = dir.path().join("eval");
    let o = gsmask(&[
        "--out-dir",
        s(&out),
        "--threshold",
        "0.9",
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: EvalReport = serde_json::from_slice(&fs::read(out.join("eval.json")).unwrap()).unwrap();
    assert!(r.sensitivity < 1.0);
    assert_eq!(r.specificity, 1.0);
    assert_eq!(r.auc, Some(1.0));
}

#[test]
fn bench_ellipses_beat_crescents_with_five_folds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        kinds: vec![ShapeFamily::Ellipse, ShapeFamily::Crescent],
        ..RunConfig::default()
    };
    let r = cmd_bench(&cfg, &BenchArgs::default()).unwrap();
    let (e, c) = (&r.kinds[0], &r.kinds[1]);
    eprintln!("ellipse {:.4} crescent {:.4}", e.mean_dice, c.mean_dice);
    assert!(e.mean_dice >= 0.97);
    assert!(c.mean_dice < e.mean_dice);
    assert_eq!(r.k, 5);
    assert_eq!(e.folds.len(), 5);
    assert_eq!(r.aggregate_folds.len(), 5);
    assert_eq!(e.samples.len(), 20);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("suite/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 40);
    assert!(dir.path().join("suite/crescent_019.pgm").is_file());
}
