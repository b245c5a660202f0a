//! The four end-to-end pipelines: superimposed ELM (Prop), time-division
//! correlation, time-division ELM, and superimposed correlation; plus the
//! dataset generator feeding the ELM variants.

use crate::config::{SimConfig, TdEnergyRule};
use crate::detection::{cancel_training, demap_and_count, invert_channel};
use crate::elm::{infer, decide_offset, ElmModel, TrainingSet};
use crate::impairments::{
    calibrate_drive, draw_channel, rescale_to_power, saleh_hpa, transmit, ChannelRealization,
    NoiseModel, SalehParams,
};
use crate::metric::{correlation_metric, normalize_metric, td_correlation_metric, MetricVector};
use crate::rng::{stream, Purpose};
use crate::waveform::{qpsk_modulate, random_bits, superimpose, zadoff_chu, TrainingSequence};
use crate::{Complex, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

/// The four compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    /// Superimposed training + ELM offset classifier.
    Prop,
    /// Time-division preamble + correlation argmax.
    TdCorr,
    /// Time-division preamble + ELM on the sliding metric.
    TdElm,
    /// Superimposed training + correlation argmax.
    SupCorr,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [
        MethodId::Prop,
        MethodId::TdCorr,
        MethodId::TdElm,
        MethodId::SupCorr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Prop => "Prop",
            MethodId::TdCorr => "TD_Corr",
            MethodId::TdElm => "TD_ELM",
            MethodId::SupCorr => "Sup_Corr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Prop" | "prop" => Ok(MethodId::Prop),
            "TD_Corr" | "td-corr" | "td_corr" => Ok(MethodId::TdCorr),
            "TD_ELM" | "td-elm" | "td_elm" => Ok(MethodId::TdElm),
            "Sup_Corr" | "sup-corr" | "sup_corr" => Ok(MethodId::SupCorr),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }

    /// Stable id used in stream keying and file names.
    pub fn id(self) -> u8 {
        match self {
            MethodId::Prop => 0,
            MethodId::TdCorr => 1,
            MethodId::TdElm => 2,
            MethodId::SupCorr => 3,
        }
    }

    pub fn uses_elm(self) -> bool {
        matches!(self, MethodId::Prop | MethodId::TdElm)
    }

    pub fn is_superimposed(self) -> bool {
        matches!(self, MethodId::Prop | MethodId::SupCorr)
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Payload details the receiver needs for detection.
enum Payload {
    Sup {
        training: TrainingSequence,
        bits: Vec<u8>,
    },
    Td {
        preamble: TrainingSequence,
        data_bits: Vec<u8>,
        data_amp: f64,
    },
}

/// One simulated transmission: clean frame, distortion, offset, channel, and
/// the received window.
struct Scene {
    tau: usize,
    channel: ChannelRealization,
    received: Vec<Complex>,
    payload: Payload,
}

/// Amplitudes for the TD frame sections under the configured energy rule.
fn td_amplitudes(cfg: &SimConfig) -> (f64, f64) {
    match cfg.td_energy_rule {
        TdEnergyRule::PerSymbol => (cfg.energy.sqrt(), cfg.energy.sqrt()),
        TdEnergyRule::PreambleBoost => {
            let n = cfg.n as f64;
            let ns = cfg.n_s as f64;
            let preamble_power = cfg.rho * cfg.energy * n / ns;
            let data_power = (1.0 - cfg.rho) * cfg.energy * n / (n - ns);
            (preamble_power.sqrt(), data_power.sqrt())
        }
    }
}

/// Clean (pre-HPA) frame samples plus the payload descriptor.
fn build_frame(method: MethodId, cfg: &SimConfig, rng: &mut impl Rng) -> Result<(Vec<Complex>, Payload)> {
    if method.is_superimposed() {
        let training = zadoff_chu(cfg.n, 1)?;
        let bits = random_bits(2 * cfg.n, rng);
        let data = qpsk_modulate(&bits)?;
        let frame = superimpose(&training, &data, cfg.rho, cfg.energy)?;
        Ok((frame.samples, Payload::Sup { training, bits }))
    } else {
        let preamble = zadoff_chu(cfg.n_s, 1)?;
        let data_bits = random_bits(2 * (cfg.n - cfg.n_s), rng);
        let data = qpsk_modulate(&data_bits)?;
        let (preamble_amp, data_amp) = td_amplitudes(cfg);
        let mut samples: Vec<Complex> = preamble
            .samples
            .iter()
            .map(|z| preamble_amp * z)
            .collect();
        samples.extend(data.symbols.iter().map(|z| data_amp * z));
        Ok((
            samples,
            Payload::Td {
                preamble,
                data_bits,
                data_amp,
            },
        ))
    }
}

fn simulate_scene(
    method: MethodId,
    cfg: &SimConfig,
    sigma2: f64,
    drive: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Scene> {
    let (clean, payload) = build_frame(method, cfg, rng)?;
    let distorted = if cfg.hpa_enabled {
        let gamma = drive.ok_or_else(|| {
            Error::invalid(format!("{method}: HPA enabled but no calibrated drive gain"))
        })?;
        let amplified = saleh_hpa(&clean, &SalehParams::default(), gamma);
        // radiate the same energy as the undistorted chain
        rescale_to_power(&amplified, cfg.energy)
    } else {
        clean
    };
    let tau = rng.random_range(0..=cfg.tau_max());
    let channel = draw_channel(cfg.l, cfg.eta, rng)?;
    let received = transmit(&distorted, tau, &channel, &NoiseModel { sigma2 }, rng)?;
    Ok(Scene {
        tau,
        channel,
        received,
        payload,
    })
}

fn scene_metric(cfg: &SimConfig, scene: &Scene) -> Result<MetricVector> {
    match &scene.payload {
        Payload::Sup { training, .. } => correlation_metric(&scene.received, training),
        Payload::Td { preamble, .. } => {
            td_correlation_metric(&scene.received, preamble, cfg.n)
        }
    }
}

/// Per-trial tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub sync_error: bool,
    pub bit_errors: u64,
    pub bits_total: u64,
}

/// Run one end-to-end trial of the given method.
///
/// ELM methods require a trained model of matching dimensions; correlation
/// methods take the metric argmax directly. A degenerate all-zero metric is
/// counted as a sync error with the offset guess pinned to zero.
pub fn run_trial(
    method: MethodId,
    cfg: &SimConfig,
    sigma2: f64,
    drive: Option<f64>,
    model: Option<&ElmModel>,
    rng: &mut impl Rng,
) -> Result<TrialOutcome> {
    if method.uses_elm() {
        let model = model
            .ok_or_else(|| Error::invalid(format!("{method}: missing trained ELM model")))?;
        if model.input_dim != cfg.n {
            return Err(Error::invalid(format!(
                "{method}: model input dim {} != N = {}",
                model.input_dim, cfg.n
            )));
        }
    }
    let scene = simulate_scene(method, cfg, sigma2, drive, rng)?;
    let raw = scene_metric(cfg, &scene)?;

    let (tau_hat, degenerate) = match normalize_metric(&raw) {
        Ok(qbar) => {
            let tau_hat = if method.uses_elm() {
                let output = infer(model.expect("checked above"), &qbar)?;
                decide_offset(&output)
            } else {
                qbar.argmax()
            };
            (tau_hat, false)
        }
        Err(Error::DegenerateMetric) => (0, true),
        Err(e) => return Err(e),
    };
    let sync_error = degenerate || tau_hat != scene.tau;

    // detection clamps the offset estimate into the invertible range
    let tau_det = tau_hat.min(cfg.n - cfg.l + 1);
    let x_est = invert_channel(&scene.received, &scene.channel, tau_det, cfg.n)?;
    let (bit_errors, bits_total) = match &scene.payload {
        Payload::Sup { training, bits } => {
            if cfg.rho == 1.0 {
                // pure training frame: nothing to demap
                (0, 0)
            } else {
                let c_hat = cancel_training(&x_est, training, cfg.rho, cfg.energy)?;
                let det = demap_and_count(&c_hat, bits)?;
                (det.bit_errors, det.bits_total)
            }
        }
        Payload::Td {
            data_bits,
            data_amp,
            ..
        } => {
            let c_hat: Vec<Complex> = x_est[cfg.n_s..].iter().map(|z| z / *data_amp).collect();
            let det = demap_and_count(&c_hat, data_bits)?;
            (det.bit_errors, det.bits_total)
        }
    };
    Ok(TrialOutcome {
        sync_error,
        bit_errors,
        bits_total,
    })
}

/// Clean frame ensemble used to calibrate the HPA drive for a method.
pub fn calibration_probe(method: MethodId, cfg: &SimConfig, frames: usize) -> Result<Vec<Complex>> {
    let mut probe = Vec::with_capacity(frames * cfg.n);
    for i in 0..frames {
        let mut rng = stream(cfg.seed, Purpose::Calibrate, method.id(), 0, i as u32);
        let (clean, _) = build_frame(method, cfg, &mut rng)?;
        probe.extend(clean);
    }
    Ok(probe)
}

const CALIBRATION_FRAMES: usize = 64;

/// Calibrate the HPA drive gain to the configured EVM target on the method's
/// own frame ensemble.
pub fn calibrate_method_drive(method: MethodId, cfg: &SimConfig) -> Result<f64> {
    let probe = calibration_probe(method, cfg, CALIBRATION_FRAMES)?;
    calibrate_drive(cfg.evm_target_percent, &SalehParams::default(), &probe)
}

/// Generate the ELM training set for a method: each column is the normalized
/// metric of an independent trial, labels one-hot at the drawn offset.
///
/// `fixed_snr` pins every sample to one grid point (per-point training);
/// otherwise each sample draws its SNR uniformly from the evaluation grid.
/// Columns are generated on independent counter-seeded streams and may be
/// computed in parallel without affecting the result.
pub fn generate_dataset(
    method: MethodId,
    cfg: &SimConfig,
    drive: Option<f64>,
    fixed_snr: Option<(u32, f64)>,
) -> Result<TrainingSet> {
    if !method.uses_elm() {
        return Err(Error::invalid(format!("{method}: not an ELM method")));
    }
    let snr_tag = fixed_snr.map_or(u32::MAX, |(idx, _)| idx);
    let columns: Vec<(usize, Vec<f64>)> = (0..cfg.n_t)
        .into_par_iter()
        .map(|i| -> Result<(usize, Vec<f64>)> {
            let mut rng = stream(cfg.seed, Purpose::Train, method.id(), snr_tag, i as u32);
            let snr_db = match fixed_snr {
                Some((_, snr)) => snr,
                None => cfg.snr_grid_db[rng.random_range(0..cfg.snr_grid_db.len())],
            };
            let sigma2 = crate::impairments::snr_to_sigma2(snr_db, cfg.energy);
            let scene = simulate_scene(method, cfg, sigma2, drive, &mut rng)?;
            let qbar = normalize_metric(&scene_metric(cfg, &scene)?)?;
            Ok((scene.tau, qbar.values))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut inputs = DMatrix::zeros(cfg.n, cfg.n_t);
    let mut labels = DMatrix::zeros(cfg.n, cfg.n_t);
    for (col, (tau, values)) in columns.iter().enumerate() {
        for (row, v) in values.iter().enumerate() {
            inputs[(row, col)] = *v;
        }
        labels[(*tau, col)] = 1.0;
    }
    Ok(TrainingSet { inputs, labels })
}
