//! Scenario configuration: profiles, flat key=value config files, validation,
//! and the config digest stamped into every result record.

use crate::{Error, Result};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// SNR policy for ELM training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainSnrMode {
    /// Each training sample draws its SNR uniformly from the evaluation grid.
    Mixed,
    /// One model per evaluation SNR point.
    PerPoint,
}

impl fmt::Display for TrainSnrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainSnrMode::Mixed => write!(f, "mixed"),
            TrainSnrMode::PerPoint => write!(f, "per-point"),
        }
    }
}

impl FromStr for TrainSnrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(TrainSnrMode::Mixed),
            "per-point" => Ok(TrainSnrMode::PerPoint),
            other => Err(Error::config(
                "train_snr_mode",
                format!("unknown mode `{other}` (expected mixed|per-point)"),
            )),
        }
    }
}

/// How the time-division frame spends its energy budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdEnergyRule {
    /// Every TD symbol (preamble and data) at per-symbol power E.
    PerSymbol,
    /// Preamble boosted so its total energy matches the superimposed pilot
    /// energy rho*E*N; data power adjusted to keep the frame total at N*E.
    PreambleBoost,
}

impl fmt::Display for TdEnergyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TdEnergyRule::PerSymbol => write!(f, "per-symbol"),
            TdEnergyRule::PreambleBoost => write!(f, "preamble-boost"),
        }
    }
}

impl FromStr for TdEnergyRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-symbol" => Ok(TdEnergyRule::PerSymbol),
            "preamble-boost" => Ok(TdEnergyRule::PreambleBoost),
            other => Err(Error::config(
                "td_energy_rule",
                format!("unknown rule `{other}` (expected per-symbol|preamble-boost)"),
            )),
        }
    }
}

/// All scenario parameters for one campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Search window / frame length N; the receive window is M = 2N.
    pub n: usize,
    /// Number of multipath taps L.
    pub l: usize,
    /// Hidden neuron count.
    pub n_tilde: usize,
    /// Training set size.
    pub n_t: usize,
    /// Time-division preamble length.
    pub n_s: usize,
    /// Power proportional coefficient.
    pub rho: f64,
    /// Per-symbol transmit power E.
    pub energy: f64,
    /// Channel power decay coefficient.
    pub eta: f64,
    /// HPA distortion target in percent.
    pub evm_target_percent: f64,
    /// Ridge added to the ELM normal equations.
    pub ridge: f64,
    /// Evaluation SNR grid in dB.
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: usize,
    pub seed: u64,
    pub train_snr_mode: TrainSnrMode,
    pub td_energy_rule: TdEnergyRule,
    pub hpa_enabled: bool,
}

impl SimConfig {
    /// Desk-scale default profile.
    pub fn desk() -> Self {
        SimConfig {
            n: 64,
            l: 8,
            n_tilde: 640,
            n_t: 20_000,
            n_s: 16,
            rho: 0.3,
            energy: 1.0,
            eta: 0.2,
            evm_target_percent: 35.0,
            ridge: 1e-8,
            snr_grid_db: (0..=8).map(|i| 2.0 * i as f64).collect(),
            trials_per_point: 2000,
            seed: 1,
            train_snr_mode: TrainSnrMode::Mixed,
            td_energy_rule: TdEnergyRule::PerSymbol,
            hpa_enabled: true,
        }
    }

    /// Published-scale profile; reachable but far heavier than the desk one.
    pub fn paper() -> Self {
        SimConfig {
            n: 512,
            n_tilde: 5120,
            n_t: 100_000,
            trials_per_point: 100_000,
            ..SimConfig::desk()
        }
    }

    /// Receive window length M = 2N.
    pub fn m(&self) -> usize {
        2 * self.n
    }

    /// Largest usable frame offset: Eq-range cap N-L+1, additionally bounded
    /// by N-1 so the one-hot label and the N-entry metric can express it.
    pub fn tau_max(&self) -> usize {
        (self.n - self.l + 1).min(self.n - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "frame length must be >= 2"));
        }
        if self.l < 1 || self.l >= self.n {
            return Err(Error::config("l", format!("need 1 <= L < N, got L={}", self.l)));
        }
        if self.n_tilde < 1 {
            return Err(Error::config("n_tilde", "hidden dim must be >= 1"));
        }
        if self.n_t < 1 {
            return Err(Error::config("n_t", "training set size must be >= 1"));
        }
        if self.n_s >= self.n {
            return Err(Error::config(
                "n_s",
                format!("preamble length {} must be < N = {}", self.n_s, self.n),
            ));
        }
        if self.n_s < 1 {
            return Err(Error::config("n_s", "preamble length must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.rho) || !self.rho.is_finite() {
            return Err(Error::config("rho", format!("{} outside [0, 1]", self.rho)));
        }
        if !(self.energy > 0.0) || !self.energy.is_finite() {
            return Err(Error::config("energy", "must be positive and finite"));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::config("eta", "must be non-negative"));
        }
        if !(0.0 < self.evm_target_percent && self.evm_target_percent < 100.0) {
            return Err(Error::config(
                "evm_target_percent",
                format!("{} outside (0, 100)", self.evm_target_percent),
            ));
        }
        if self.ridge < 0.0 || !self.ridge.is_finite() {
            return Err(Error::config("ridge", "must be non-negative"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::config("snr_grid_db", "grid must be nonempty"));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(Error::config("snr_grid_db", "NaN grid point"));
        }
        Ok(())
    }

    /// Canonical one-line-per-field rendering; the digest is computed over it.
    pub fn canonical_string(&self) -> String {
        let grid = self
            .snr_grid_db
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "n={}\nl={}\nn_tilde={}\nn_t={}\nn_s={}\nrho={}\nenergy={}\neta={}\n\
             evm_target_percent={}\nridge={}\nsnr_grid_db={}\ntrials_per_point={}\n\
             seed={}\ntrain_snr_mode={}\ntd_energy_rule={}\nhpa_enabled={}\n",
            self.n,
            self.l,
            self.n_tilde,
            self.n_t,
            self.n_s,
            self.rho,
            self.energy,
            self.eta,
            self.evm_target_percent,
            self.ridge,
            grid,
            self.trials_per_point,
            self.seed,
            self.train_snr_mode,
            self.td_energy_rule,
            self.hpa_enabled,
        )
    }

    /// 64-bit FNV-1a over the canonical string, as 16 hex digits.
    pub fn digest(&self) -> String {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut hash = OFFSET;
        for byte in self.canonical_string().as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(PRIME);
        }
        format!("{hash:016x}")
    }

    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(field: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
        }
        match key {
            "n" => self.n = parse("n", value)?,
            "l" => self.l = parse("l", value)?,
            "n_tilde" => self.n_tilde = parse("n_tilde", value)?,
            "n_t" => self.n_t = parse("n_t", value)?,
            "n_s" => self.n_s = parse("n_s", value)?,
            "rho" => self.rho = parse("rho", value)?,
            "energy" => self.energy = parse("energy", value)?,
            "eta" => self.eta = parse("eta", value)?,
            "evm_target_percent" => self.evm_target_percent = parse("evm_target_percent", value)?,
            "ridge" => self.ridge = parse("ridge", value)?,
            "snr_grid_db" => {
                self.snr_grid_db = value
                    .split(',')
                    .map(|tok| parse("snr_grid_db", tok.trim()))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "trials_per_point" => self.trials_per_point = parse("trials_per_point", value)?,
            "seed" => self.seed = parse("seed", value)?,
            "train_snr_mode" => self.train_snr_mode = value.parse()?,
            "td_energy_rule" => self.td_energy_rule = value.parse()?,
            "hpa_enabled" => self.hpa_enabled = parse("hpa_enabled", value)?,
            other => {
                return Err(Error::config(other, "unknown key"));
            }
        }
        Ok(())
    }

    /// Parse a flat key=value config file (# comments, blank lines allowed)
    /// on top of the given base profile.
    pub fn from_file(path: &Path, base: SimConfig) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = base;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected key=value, got `{line}`"),
                )
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
