//! Flat run configuration: defaults, then a TOML/JSON file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use gsmask::levelset::DtcSign;
use gsmask::loss::DtcSchedule;
use gsmask::optim::AdamConfig;
use gsmask::synth::ShapeFamily;
use gsmask::{BoundaryRule, FitConfig, LossWeights};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub width: usize,
    pub height: usize,

    pub lambda_m: f64,
    pub lambda_l: f64,
    pub lambda_dice: f64,
    pub lambda_dtc: f64,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub k_sigmoid: f64,
    pub dtc_sign: DtcSign,

    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub lsf_lr: f64,
    pub epochs: usize,
    pub mask_sharpness: f64,
    pub patience: usize,
    pub plateau_threshold: f64,
    pub lr_factor: f64,
    pub max_lr_decays: usize,
    pub stop_on_exact_match: bool,
    pub dtc_schedule: DtcSchedule,
    pub boundary_rule: BoundaryRule,
    pub lsf_clip: Option<f64>,

    /// Write mask snapshots every this many epochs during `fit`.
    pub snapshot_every: Option<usize>,
    /// Binarization threshold used by `eval`.
    pub threshold: f64,

    /// Shapes per family in the `bench` suite.
    pub suite_size: usize,
    pub folds: usize,
    pub kinds: Vec<ShapeFamily>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        let f = FitConfig::default();
        Self {
            seed: 0,
            out_dir: PathBuf::from("gsmask-out"),
            width: 64,
            height: 64,
            lambda_m: w.lambda_m,
            lambda_l: w.lambda_l,
            lambda_dice: w.lambda_dice,
            lambda_dtc: w.lambda_dtc,
            focal_gamma: w.focal_gamma,
            focal_alpha: w.focal_alpha,
            k_sigmoid: w.k_sigmoid,
            dtc_sign: w.dtc_sign,
            lr: f.adam.lr,
            beta1: f.adam.beta1,
            beta2: f.adam.beta2,
            eps: f.adam.eps,
            weight_decay: f.adam.weight_decay,
            lsf_lr: f.lsf_lr,
            epochs: f.epochs,
            mask_sharpness: f.mask_sharpness,
            patience: f.patience,
            plateau_threshold: f.plateau_threshold,
            lr_factor: f.lr_factor,
            max_lr_decays: f.max_lr_decays,
            stop_on_exact_match: f.stop_on_exact_match,
            dtc_schedule: f.dtc_schedule,
            boundary_rule: f.boundary_rule,
            lsf_clip: f.lsf_clip,
            snapshot_every: None,
            threshold: 0.5,
            suite_size: 20,
            folds: 5,
            kinds: ShapeFamily::ALL.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_m: self.lambda_m,
            lambda_l: self.lambda_l,
            lambda_dice: self.lambda_dice,
            lambda_dtc: self.lambda_dtc,
            focal_gamma: self.focal_gamma,
            focal_alpha: self.focal_alpha,
            k_sigmoid: self.k_sigmoid,
            dtc_sign: self.dtc_sign,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            epochs: self.epochs,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            lsf_lr: self.lsf_lr,
            mask_sharpness: self.mask_sharpness,
            patience: self.patience,
            plateau_threshold: self.plateau_threshold,
            lr_factor: self.lr_factor,
            max_lr_decays: self.max_lr_decays,
            stop_on_exact_match: self.stop_on_exact_match,
            dtc_schedule: self.dtc_schedule,
            boundary_rule: self.boundary_rule,
            lsf_clip: self.lsf_clip,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.loss_weights().validate()?;
        self.fit_config().validate()?;
        if self.width == 0 || self.height == 0 {
            return Err(CliError::Usage("width and height must be positive".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Usage("folds must be at least 2".into()));
        }
        if self.suite_size < self.folds {
            return Err(CliError::Usage(format!(
                "suite_size {} is smaller than the fold count {}",
                self.suite_size, self.folds
            )));
        }
        if self.snapshot_every == Some(0) {
            return Err(CliError::Usage("snapshot_every must be positive".into()));
        }
        Ok(())
    }

    /// Reads a flat config; the format follows the extension (`.toml` or `.json`).
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
            }
            _ => Err(CliError::Usage(format!(
                "config {} must end in .toml or .json",
                path.display()
            ))),
        }
    }

    /// Defaults, overlaid by `--config`, overlaid by explicit flags.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        args.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn serde_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_sign(s: &str) -> Result<DtcSign, String> {
    let v: i8 = s.parse().map_err(|_| format!("expected -1 or 1, got {s:?}"))?;
    DtcSign::try_from(v)
}

/// Flags shared by every subcommand; each one overrides the matching config key.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// Flat TOML or JSON file with any subset of the run configuration keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "GSMASK_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub height: Option<usize>,

    #[arg(long, global = true)]
    pub lambda_m: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_l: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_dice: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_dtc: Option<f64>,
    #[arg(long, global = true)]
    pub focal_gamma: Option<f64>,
    #[arg(long, global = true)]
    pub focal_alpha: Option<f64>,
    #[arg(long, global = true)]
    pub k_sigmoid: Option<f64>,
    /// -1 maps the interior above 0.5; 1 uses the literal sigmoid(k L).
    #[arg(long, global = true, value_parser = parse_sign, allow_hyphen_values = true)]
    pub dtc_sign: Option<DtcSign>,

    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub beta1: Option<f64>,
    #[arg(long, global = true)]
    pub beta2: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub weight_decay: Option<f64>,
    #[arg(long, global = true)]
    pub lsf_lr: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub mask_sharpness: Option<f64>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub plateau_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub lr_factor: Option<f64>,
    #[arg(long, global = true)]
    pub max_lr_decays: Option<usize>,
    #[arg(long, global = true)]
    pub stop_on_exact_match: Option<bool>,
    /// `exponential` or `constant`.
    #[arg(long, global = true, value_parser = serde_value::<DtcSchedule>)]
    pub dtc_schedule: Option<DtcSchedule>,
    /// `outer_ring` or `inner_ring`.
    #[arg(long, global = true, value_parser = serde_value::<BoundaryRule>)]
    pub boundary_rule: Option<BoundaryRule>,
    #[arg(long, global = true)]
    pub lsf_clip: Option<f64>,

    #[arg(long, global = true)]
    pub snapshot_every: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,

    #[arg(long, global = true)]
    pub suite_size: Option<usize>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Comma-separated shape families for `bench`.
    #[arg(long, global = true, value_delimiter = ',', value_parser = serde_value::<ShapeFamily>)]
    pub kinds: Option<Vec<ShapeFamily>>,
}

macro_rules! overlay {
    ($args:expr, $cfg:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$args.$field {
            $cfg.$field = v.clone();
        })*
    };
}

impl ConfigArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        overlay!(self, cfg;
            seed, out_dir, width, height,
            lambda_m, lambda_l, lambda_dice, lambda_dtc, focal_gamma, focal_alpha, k_sigmoid, dtc_sign,
            lr, beta1, beta2, eps, weight_decay, lsf_lr, epochs, mask_sharpness, patience,
            plateau_threshold, lr_factor, max_lr_decays, stop_on_exact_match, dtc_schedule, boundary_rule,
            threshold, suite_size, folds, kinds,
        );
        if let Some(r) = self.lsf_clip {
            cfg.lsf_clip = Some(r);
        }
        if let Some(n) = self.snapshot_every {
            cfg.snapshot_every = Some(n);
        }
    }
}
