//! Sweep scheduling: drive calibration, model training, and per-SNR trial
//! fan-out. All randomness is counter-seeded, so any number of workers
//! produces the same tallies.

use crate::config::{SimConfig, TrainSnrMode};
use crate::elm::{train, ElmModel};
use crate::impairments::snr_to_sigma2;
use crate::methods::{calibrate_method_drive, generate_dataset, run_trial, MethodId, TrialOutcome};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

/// Aggregate outcome for one (method, SNR) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: MethodId,
    pub axis: String,
    pub axis_value: f64,
    pub snr_db: f64,
    pub trials: u64,
    pub sync_errors: u64,
    pub bits_total: u64,
    pub bit_errors: u64,
    pub seed: u64,
    pub config_digest: String,
}

impl ResultRecord {
    pub fn sync_error_prob(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.sync_errors as f64 / self.trials as f64
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits_total == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_total as f64
        }
    }
}

/// Models trained for a sweep, exposed so callers can persist them.
#[derive(Default)]
pub struct TrainedModels {
    /// One model per ELM method (mixed-SNR policy), or one per
    /// (method, snr index) under per-point training.
    pub models: HashMap<(MethodId, Option<usize>), ElmModel>,
}

impl TrainedModels {
    fn for_point(&self, method: MethodId, mode: TrainSnrMode, snr_idx: usize) -> Option<&ElmModel> {
        match mode {
            TrainSnrMode::Mixed => self.models.get(&(method, None)),
            TrainSnrMode::PerPoint => self.models.get(&(method, Some(snr_idx))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    sync_errors: u64,
    bits_total: u64,
    bit_errors: u64,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            trials: self.trials + other.trials,
            sync_errors: self.sync_errors + other.sync_errors,
            bits_total: self.bits_total + other.bits_total,
            bit_errors: self.bit_errors + other.bit_errors,
        }
    }

    fn from_outcome(out: &TrialOutcome) -> Tally {
        Tally {
            trials: 1,
            sync_errors: u64::from(out.sync_error),
            bits_total: out.bits_total,
            bit_errors: out.bit_errors,
        }
    }
}

/// Calibrate drives and train models for the given methods, without running
/// any evaluation trials.
pub fn prepare(
    cfg: &SimConfig,
    methods: &[MethodId],
) -> Result<(HashMap<MethodId, f64>, TrainedModels)> {
    cfg.validate()?;
    let mut drives = HashMap::new();
    if cfg.hpa_enabled {
        for &method in methods {
            let gamma = calibrate_method_drive(method, cfg)?;
            log::info!("{method}: calibrated drive gain {gamma:.6}");
            drives.insert(method, gamma);
        }
    }
    let mut trained = TrainedModels::default();
    for &method in methods.iter().filter(|m| m.uses_elm()) {
        let drive = drives.get(&method).copied();
        match cfg.train_snr_mode {
            TrainSnrMode::Mixed => {
                let start = Instant::now();
                let set = generate_dataset(method, cfg, drive, None)?;
                let mut rng = stream(cfg.seed, Purpose::ModelInit, method.id(), u32::MAX, 0);
                let model = train(&set, cfg.n_tilde, cfg.ridge, &mut rng)?;
                log::info!(
                    "{method}: trained on {} samples in {:.2}s",
                    cfg.n_t,
                    start.elapsed().as_secs_f64()
                );
                trained.models.insert((method, None), model);
            }
            TrainSnrMode::PerPoint => {
                for (idx, &snr) in cfg.snr_grid_db.iter().enumerate() {
                    let start = Instant::now();
                    let set = generate_dataset(method, cfg, drive, Some((idx as u32, snr)))?;
                    let mut rng =
                        stream(cfg.seed, Purpose::ModelInit, method.id(), idx as u32, 0);
                    let model = train(&set, cfg.n_tilde, cfg.ridge, &mut rng)?;
                    log::info!(
                        "{method}: trained for {snr} dB in {:.2}s",
                        start.elapsed().as_secs_f64()
                    );
                    trained.models.insert((method, Some(idx)), model);
                }
            }
        }
    }
    Ok((drives, trained))
}

/// Evaluate the grid with already-prepared drives and models.
pub fn evaluate(
    cfg: &SimConfig,
    methods: &[MethodId],
    drives: &HashMap<MethodId, f64>,
    trained: &TrainedModels,
) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let digest = cfg.digest();
    let mut records = Vec::new();
    for &method in methods {
        let drive = drives.get(&method).copied();
        if cfg.hpa_enabled && drive.is_none() {
            return Err(Error::invalid(format!("{method}: no calibrated drive")));
        }
        for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
            let sigma2 = snr_to_sigma2(snr_db, cfg.energy);
            let model = if method.uses_elm() {
                let m = trained
                    .for_point(method, cfg.train_snr_mode, snr_idx)
                    .ok_or_else(|| {
                        Error::invalid(format!("{method}: no trained model for grid point"))
                    })?;
                Some(m)
            } else {
                None
            };
            let start = Instant::now();
            let tally = (0..cfg.trials_per_point as u32)
                .into_par_iter()
                .map(|t| {
                    let mut rng =
                        stream(cfg.seed, Purpose::Eval, method.id(), snr_idx as u32, t);
                    run_trial(method, cfg, sigma2, drive, model, &mut rng)
                        .map(|out| Tally::from_outcome(&out))
                })
                .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
            if cfg.trials_per_point > 0 {
                log::info!(
                    "{method} @ {snr_db} dB: {} trials, {:.1} us/trial",
                    tally.trials,
                    start.elapsed().as_micros() as f64 / tally.trials as f64
                );
            }
            records.push(ResultRecord {
                method,
                axis: "none".to_string(),
                axis_value: 0.0,
                snr_db,
                trials: tally.trials,
                sync_errors: tally.sync_errors,
                bits_total: tally.bits_total,
                bit_errors: tally.bit_errors,
                seed: cfg.seed,
                config_digest: digest.clone(),
            });
        }
    }
    Ok(records)
}

/// End-to-end sweep: calibrate, train where needed, evaluate every
/// (method, SNR) grid point. Deterministic in (cfg, seed).
pub fn run_sweep(cfg: &SimConfig, methods: &[MethodId]) -> Result<Vec<ResultRecord>> {
    let (drives, trained) = prepare(cfg, methods)?;
    evaluate(cfg, methods, &drives, &trained)
}

/// Robustness-study axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    Evm,
    L,
    N,
    Rho,
}

impl StudyAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyAxis::Evm => "evm",
            StudyAxis::L => "l",
            StudyAxis::N => "n",
            StudyAxis::Rho => "rho",
        }
    }
}

impl FromStr for StudyAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "evm" => Ok(StudyAxis::Evm),
            "l" => Ok(StudyAxis::L),
            "n" => Ok(StudyAxis::N),
            "rho" => Ok(StudyAxis::Rho),
            other => Err(Error::invalid(format!("unknown study axis `{other}`"))),
        }
    }
}

/// One sweep per axis value, with only that axis varied from the base
/// config. The N axis rescales the hidden layer to keep the base
/// hidden-to-input ratio, since the model dimensions change with N.
pub fn run_parameter_study(
    cfg: &SimConfig,
    axis: StudyAxis,
    values: &[f64],
    methods: &[MethodId],
) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    for &value in values {
        let mut point_cfg = cfg.clone();
        match axis {
            StudyAxis::Evm => point_cfg.evm_target_percent = value,
            StudyAxis::L => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::config("l", format!("bad axis value {value}")));
                }
                point_cfg.l = value as usize;
            }
            StudyAxis::N => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::config("n", format!("bad axis value {value}")));
                }
                let n = value as usize;
                point_cfg.n_tilde = (cfg.n_tilde * n).div_ceil(cfg.n);
                point_cfg.n = n;
            }
            StudyAxis::Rho => point_cfg.rho = value,
        }
        point_cfg.validate()?;
        let mut point_records = run_sweep(&point_cfg, methods)?;
        for rec in point_records.iter_mut() {
            rec.axis = axis.as_str().to_string();
            rec.axis_value = value;
        }
        records.append(&mut point_records);
    }
    Ok(records)
}
