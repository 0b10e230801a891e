use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gsmask::grid::{read_mask_pgm, read_pgm, write_mask_pgm, write_pgm};
use gsmask::levelset::{lsf_to_soft_mask_signed, read_level_set, signed_edt_with, write_level_set, LevelSetMapping};
use gsmask::metrics::{kfold_split, mask_dice, pr_curve, EvalReport, PrPoint};
use gsmask::optim::{fit_dual_task_observed, fit_splat_observed, moment_init, EpochState};
use gsmask::splat::render;
use gsmask::synth::{generate, sample_spec, ShapeFamily, TrueParams};
use gsmask::{threshold, BoundaryRule, FitResult, GaussianSplat, LevelSetField, ScalarField, ShapeSpec};
use serde::{Deserialize, Serialize};

use crate::{CliError, RunConfig};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(gsmask::Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

/// Creates the output directory and echoes the resolved configuration into it.
fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    create_dir(&cfg.out_dir)?;
    write_json(cfg, &cfg.out_dir.join("config.json"))?;
    Ok(cfg.out_dir.clone())
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("input file {} does not exist", path.display())))
    }
}

#[derive(Args, Clone, Debug)]
pub struct RenderArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu_x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_y: f64,
    #[arg(long)]
    pub s_x: f64,
    #[arg(long)]
    pub s_y: f64,
    /// Rotation in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub r: f64,
    /// Raster path; defaults to `<out_dir>/render.pgm`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_render(cfg: &RunConfig, args: &RenderArgs) -> Result<PathBuf, CliError> {
    let splat = GaussianSplat::new(args.mu_x, args.mu_y, args.s_x, args.s_y, args.r)?;
    let field = render(&splat, cfg.width, cfg.height)?;
    let dir = prepare_out_dir(cfg)?;
    let path = args.out.clone().unwrap_or_else(|| dir.join("render.pgm"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_pgm(&field, &path)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    Splat,
    Dual,
}

#[derive(Args, Clone, Debug)]
pub struct FitArgs {
    /// Binary target mask (PGM). Optional only for unlabeled dual fits.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FitModeArg::Splat)]
    pub mode: FitModeArg,
    /// Initial splat as `mu_x,mu_y,s_x,s_y,r`; defaults to the target's moments.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    /// Initial level set (PGM with JSON sidecar) for dual fits; defaults to zeros.
    #[arg(long)]
    pub init_lsf: Option<PathBuf>,
}

struct Snapshot {
    epoch: usize,
    mask: ScalarField,
    level_set: Option<LevelSetField>,
}

pub fn cmd_fit(cfg: &RunConfig, args: &FitArgs) -> Result<FitResult, CliError> {
    let weights = cfg.loss_weights();
    let fit_cfg = cfg.fit_config();
    let target = match &args.target {
        Some(p) => {
            require_file(p)?;
            let mask = read_mask_pgm(p)?;
            mask.ensure_both_classes()?;
            Some(mask)
        }
        None => None,
    };
    let init_lsf = match &args.init_lsf {
        Some(p) => {
            require_file(p)?;
            Some(read_level_set(p)?)
        }
        None => None,
    };
    let init = match (&args.init, &target) {
        (Some(s), _) => s.parse::<GaussianSplat>()?,
        (None, Some(t)) => moment_init(t)?,
        (None, None) => {
            return Err(CliError::Usage(
                "`--init` is required when no `--target` is given".into(),
            ))
        }
    };

    let mut snapshots = Vec::new();
    let every = cfg.snapshot_every;
    let observer = |s: &EpochState| {
        if let Some(n) = every {
            if s.epoch.is_multiple_of(n) {
                snapshots.push(Snapshot {
                    epoch: s.epoch,
                    mask: s.mask.clone(),
                    level_set: s.level_set.cloned(),
                });
            }
        }
    };

    let result = match args.mode {
        FitModeArg::Splat => {
            let Some(target) = &target else {
                return Err(CliError::Usage("`fit --mode splat` needs `--target`".into()));
            };
            if args.init_lsf.is_some() {
                return Err(CliError::Usage("`--init-lsf` only applies to `--mode dual`".into()));
            }
            fit_splat_observed(target, init, &weights, &fit_cfg, observer)?
        }
        FitModeArg::Dual => {
            let lsf = match (init_lsf, &target) {
                (Some(l), _) => l,
                (None, Some(t)) => LevelSetField::zeros(t.width(), t.height())?,
                (None, None) => {
                    return Err(CliError::Usage("unlabeled dual fits need `--init-lsf`".into()));
                }
            };
            fit_dual_task_observed(target.as_ref(), init, lsf, &weights, &fit_cfg, observer)?
        }
    };

    let dir = prepare_out_dir(cfg)?;
    write_json(&result, &dir.join("fit.json"))?;
    let (w, h) = match (&target, &result.level_set) {
        (Some(t), _) => t.dims(),
        (None, Some(l)) => l.dims(),
        (None, None) => (cfg.width, cfg.height),
    };
    let g = render(&result.splat, w, h)?;
    write_pgm(&g, dir.join("splat.pgm"))?;
    write_mask_pgm(&threshold(&g, 0.5), dir.join("mask.pgm"))?;
    if let Some(l) = &result.level_set {
        write_level_set(l, dir.join("level_set.pgm"))?;
    }
    if !snapshots.is_empty() {
        let snap_dir = dir.join("snapshots");
        create_dir(&snap_dir)?;
        for s in &snapshots {
            write_pgm(&s.mask, snap_dir.join(format!("epoch_{:04}.pgm", s.epoch)))?;
            if let Some(l) = &s.level_set {
                let m = lsf_to_soft_mask_signed(l, weights.k_sigmoid, weights.dtc_sign)?;
                write_pgm(&m, snap_dir.join(format!("epoch_{:04}_lsf.pgm", s.epoch)))?;
            }
        }
    }
    Ok(result)
}

#[derive(Args, Clone, Debug)]
pub struct EdtArgs {
    /// Binary mask (PGM).
    #[arg(long)]
    pub mask: PathBuf,
    /// Raster path; defaults to `<out_dir>/level_set.pgm`. The sidecar sits next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdtReport {
    pub width: usize,
    pub height: usize,
    pub boundary_rule: BoundaryRule,
    pub min: f64,
    pub max: f64,
    pub interior_pixels: usize,
    pub mapping: LevelSetMapping,
}

pub fn cmd_edt(cfg: &RunConfig, args: &EdtArgs) -> Result<EdtReport, CliError> {
    require_file(&args.mask)?;
    let mask = read_mask_pgm(&args.mask)?;
    let lsf = signed_edt_with(&mask, cfg.boundary_rule)?;
    let dir = prepare_out_dir(cfg)?;
    let path = args.out.clone().unwrap_or_else(|| dir.join("level_set.pgm"));
    let mapping = write_level_set(&lsf, &path)?;
    let (min, max) = lsf.as_field().min_max();
    let report = EdtReport {
        width: mask.width(),
        height: mask.height(),
        boundary_rule: cfg.boundary_rule,
        min,
        max,
        interior_pixels: mask.count_foreground(),
        mapping,
    };
    write_json(&report, &dir.join("edt.json"))?;
    Ok(report)
}

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = true)]
pub struct EvalArgs {
    /// Prediction raster; values above `threshold` are foreground, raw values rank for AUC/AP.
    #[arg(long, requires = "gt", conflicts_with = "scores")]
    pub pred: Option<PathBuf>,
    /// Ground-truth mask (PGM).
    #[arg(long, requires = "pred")]
    pub gt: Option<PathBuf>,
    /// CSV of `score,label` rows; a header row is allowed.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Reads `score,label` rows. A first row that does not parse is taken as a header.
pub fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Vec<bool>), CliError> {
    require_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliError::Data(format!(
                "{}: row {} has {} columns, expected score,label",
                path.display(),
                row + 1,
                record.len()
            )));
        }
        let score = record[0].parse::<f64>().ok();
        let label = parse_label(&record[1]);
        match (score, label) {
            (Some(s), Some(l)) => {
                scores.push(s);
                labels.push(l);
            }
            _ if row == 0 => continue,
            _ => {
                return Err(CliError::Data(format!(
                    "{}: cannot parse row {}",
                    path.display(),
                    row + 1
                )));
            }
        }
    }
    Ok((scores, labels))
}

fn write_pr_curve(points: &[PrPoint], path: &Path) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for p in points {
        w.serialize(p).map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<EvalReport, CliError> {
    let (scores, labels) = match (&args.pred, &args.gt, &args.scores) {
        (Some(pred), Some(gt), None) => {
            require_file(pred)?;
            require_file(gt)?;
            let p = read_pgm(pred)?;
            let g = read_mask_pgm(gt)?;
            p.ensure_same_dims(g.dims())?;
            (p.values().to_vec(), g.values().to_vec())
        }
        (None, None, Some(path)) => read_scores_csv(path)?,
        _ => return Err(CliError::Usage("give either `--pred` and `--gt`, or `--scores`".into())),
    };
    let both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
    let report = if both {
        EvalReport::from_scores(&scores, &labels, cfg.threshold)?
    } else {
        let pred: Vec<bool> = scores.iter().map(|&s| s > cfg.threshold).collect();
        EvalReport::from_counts(gsmask::metrics::confusion_from_labels(&pred, &labels)?)?
    };
    let dir = prepare_out_dir(cfg)?;
    write_json(&report, &dir.join("eval.json"))?;
    if both {
        write_pr_curve(&pr_curve(&scores, &labels)?, &dir.join("pr_curve.csv"))?;
    }
    Ok(report)
}

/// The suite itself is described by the run configuration (`kinds`, `suite_size`, `folds`, ...).
#[derive(Args, Clone, Debug, Default)]
pub struct BenchArgs {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub spec: ShapeSpec,
    pub truth: TrueParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub index: usize,
    pub seed: u64,
    pub dice: f64,
    pub epochs_run: usize,
    pub converged: bool,
    pub splat: GaussianSplat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub mean_dice: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: ShapeFamily,
    pub samples: Vec<SampleReport>,
    pub folds: Vec<FoldReport>,
    pub mean_dice: f64,
    /// Standard deviation of the per-fold means.
    pub fold_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub suite_size: usize,
    pub k: usize,
    pub kinds: Vec<KindReport>,
    /// Per-fold mean Dice over every family.
    pub aggregate_folds: Vec<FoldReport>,
    pub aggregate_mean_dice: f64,
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Seed of the `index`-th shape in a suite generated from `seed`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

pub fn cmd_bench(cfg: &RunConfig, _args: &BenchArgs) -> Result<BenchReport, CliError> {
    let (w, h) = (cfg.width, cfg.height);
    let weights = cfg.loss_weights();
    let fit_cfg = cfg.fit_config();
    let folds = kfold_split(cfg.suite_size, cfg.folds, cfg.seed)?;
    let dir = prepare_out_dir(cfg)?;
    let suite_dir = dir.join("suite");
    create_dir(&suite_dir)?;

    let mut manifest = Vec::new();
    let mut kinds = Vec::new();
    for &kind in &cfg.kinds {
        let mut samples = Vec::with_capacity(cfg.suite_size);
        for index in 0..cfg.suite_size {
            let seed = sample_seed(cfg.seed, index);
            let spec = sample_spec(kind, seed, w, h);
            let (mask, truth) = generate(&spec, w, h)?;
            let file = format!("{}_{index:03}.pgm", kind.name());
            write_mask_pgm(&mask, suite_dir.join(&file))?;
            manifest.push(ManifestEntry { file, spec, truth });
            let fit = fit_splat_observed(&mask, moment_init(&mask)?, &weights, &fit_cfg, |_| {})?;
            let pred = threshold(&render(&fit.splat, w, h)?, 0.5);
            samples.push(SampleReport {
                index,
                seed,
                dice: mask_dice(&pred, &mask)?,
                epochs_run: fit.epochs_run,
                converged: fit.converged,
                splat: fit.splat,
            });
        }
        let fold_reports: Vec<FoldReport> = (0..folds.k)
            .map(|f| {
                let test_indices = folds.test_indices(f);
                let mean_dice = mean(test_indices.iter().map(|&i| samples[i].dice));
                FoldReport {
                    fold: f,
                    test_indices,
                    mean_dice,
                }
            })
            .collect();
        let fold_mean = mean(fold_reports.iter().map(|f| f.mean_dice));
        let fold_std = mean(fold_reports.iter().map(|f| (f.mean_dice - fold_mean).powi(2))).sqrt();
        kinds.push(KindReport {
            kind,
            mean_dice: mean(samples.iter().map(|s| s.dice)),
            samples,
            folds: fold_reports,
            fold_std,
        });
    }

    let aggregate_folds = (0..folds.k)
        .map(|f| {
            let test_indices = folds.test_indices(f);
            let mean_dice = mean(
                kinds
                    .iter()
                    .flat_map(|k| test_indices.iter().map(move |&i| k.samples[i].dice)),
            );
            FoldReport {
                fold: f,
                test_indices,
                mean_dice,
            }
        })
        .collect();
    let report = BenchReport {
        seed: cfg.seed,
        width: w,
        height: h,
        suite_size: cfg.suite_size,
        k: folds.k,
        aggregate_mean_dice: mean(kinds.iter().flat_map(|k| k.samples.iter().map(|s| s.dice))),
        kinds,
        aggregate_folds,
    };
    write_json(&manifest, &suite_dir.join("manifest.json"))?;
    write_json(&report, &dir.join("bench.json"))?;
    Ok(report)
}
