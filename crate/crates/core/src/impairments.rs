//! Transmitter and channel impairments: Saleh HPA with EVM calibration,
//! multipath Rayleigh fading with exponential power decay, and AWGN.

use crate::{Complex, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Saleh AM-AM / AM-PM parameters.
#[derive(Debug, Clone, Copy)]
pub struct SalehParams {
    pub alpha_a: f64,
    pub beta_a: f64,
    pub alpha_phi: f64,
    pub beta_phi: f64,
}

impl Default for SalehParams {
    fn default() -> Self {
        SalehParams {
            alpha_a: 1.96,
            beta_a: 0.99,
            alpha_phi: 2.53,
            beta_phi: 2.82,
        }
    }
}

impl SalehParams {
    /// AM-AM characteristic A(r) = alpha_a*r / (1 + beta_a*r^2).
    pub fn am_am(&self, r: f64) -> f64 {
        self.alpha_a * r / (1.0 + self.beta_a * r * r)
    }

    /// AM-PM characteristic Phi(r) = alpha_phi*r^2 / (1 + beta_phi*r^2).
    pub fn am_pm(&self, r: f64) -> f64 {
        self.alpha_phi * r * r / (1.0 + self.beta_phi * r * r)
    }
}

/// Memoryless Saleh amplifier. Each sample z is driven at amplitude
/// r = drive_gain*|z| and mapped to A(r)*exp(j*(arg z + Phi(r))).
pub fn saleh_hpa(signal: &[Complex], params: &SalehParams, drive_gain: f64) -> Vec<Complex> {
    assert!(drive_gain > 0.0, "drive_gain must be positive");
    signal
        .iter()
        .map(|z| {
            let r = drive_gain * z.norm();
            if r == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::from_polar(params.am_am(r), z.arg() + params.am_pm(r))
            }
        })
        .collect()
}

/// Error vector magnitude in percent: 100*sqrt(sum|d-r|^2 / sum|r|^2).
pub fn evm_percent(distorted: &[Complex], reference: &[Complex]) -> Result<f64> {
    if distorted.len() != reference.len() || reference.is_empty() {
        return Err(Error::invalid(format!(
            "evm: lengths {} vs {}",
            distorted.len(),
            reference.len()
        )));
    }
    let ref_power: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
    if ref_power == 0.0 {
        return Err(Error::UndefinedMetric(
            "evm: all-zero reference".to_string(),
        ));
    }
    let err_power: f64 = distorted
        .iter()
        .zip(reference)
        .map(|(d, r)| (d - r).norm_sqr())
        .sum();
    Ok(100.0 * (err_power / ref_power).sqrt())
}

/// Re-measure the EVM achieved by a drive gain on a probe ensemble, against
/// the small-signal linear reference R = alpha_a*gamma*probe.
pub fn measure_evm(probe: &[Complex], params: &SalehParams, drive_gain: f64) -> Result<f64> {
    let distorted = saleh_hpa(probe, params, drive_gain);
    let reference: Vec<Complex> = probe
        .iter()
        .map(|z| params.alpha_a * drive_gain * z)
        .collect();
    evm_percent(&distorted, &reference)
}

const DRIVE_LO: f64 = 1e-3;
const DRIVE_HI: f64 = 1e3;

/// Find the drive gain that hits the target EVM on the probe ensemble.
///
/// EVM(gamma) is empirically monotone over the bracket, so a bisection on
/// log(gamma) converges; the returned gain reproduces the target within
/// 0.1 percentage points on the same probe.
pub fn calibrate_drive(
    target_evm: f64,
    params: &SalehParams,
    probe: &[Complex],
) -> Result<f64> {
    if !(0.0 < target_evm && target_evm < 100.0) {
        return Err(Error::CalibrationFailure(format!(
            "target EVM {target_evm}% outside (0, 100)"
        )));
    }
    if probe.is_empty() {
        return Err(Error::CalibrationFailure("empty probe".to_string()));
    }
    let f_lo = measure_evm(probe, params, DRIVE_LO)?;
    let f_hi = measure_evm(probe, params, DRIVE_HI)?;
    if f_lo > target_evm || f_hi < target_evm {
        return Err(Error::CalibrationFailure(format!(
            "target {target_evm}% outside reachable range [{f_lo:.3}, {f_hi:.3}]"
        )));
    }
    let mut lo = DRIVE_LO.ln();
    let mut hi = DRIVE_HI.ln();
    let mut gamma = (0.5 * (lo + hi)).exp();
    for _ in 0..200 {
        gamma = (0.5 * (lo + hi)).exp();
        let f = measure_evm(probe, params, gamma)?;
        if (f - target_evm).abs() <= 0.01 {
            break;
        }
        if f < target_evm {
            lo = gamma.ln();
        } else {
            hi = gamma.ln();
        }
    }
    let achieved = measure_evm(probe, params, gamma)?;
    if (achieved - target_evm).abs() > 0.1 {
        return Err(Error::CalibrationFailure(format!(
            "bisection stalled at EVM {achieved:.3}% for target {target_evm}%"
        )));
    }
    Ok(gamma)
}

/// One multipath realization: L complex taps, unit 2-norm.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub taps: Vec<Complex>,
    pub eta: f64,
}

impl ChannelRealization {
    pub fn num_paths(&self) -> usize {
        self.taps.len()
    }
}

/// Draw a multipath Rayleigh channel with power profile exp(-eta*(l-1)).
///
/// Taps 2..L are independently zeroed with probability 0.5; the first tap is
/// always present. The realization is renormalized to unit 2-norm.
pub fn draw_channel(l: usize, eta: f64, rng: &mut impl Rng) -> Result<ChannelRealization> {
    if l == 0 {
        return Err(Error::invalid("draw_channel: L must be >= 1"));
    }
    if eta < 0.0 {
        return Err(Error::invalid(format!("draw_channel: eta {eta} < 0")));
    }
    let mut taps = Vec::with_capacity(l);
    for idx in 0..l {
        let power = (-eta * idx as f64).exp();
        let per_dim = Normal::new(0.0, (power / 2.0).sqrt()).expect("valid std dev");
        let tap = Complex::new(per_dim.sample(rng), per_dim.sample(rng));
        // draw the Bernoulli unconditionally to keep the stream layout fixed
        let zeroed = rng.random::<bool>();
        if idx > 0 && zeroed {
            taps.push(Complex::new(0.0, 0.0));
        } else {
            taps.push(tap);
        }
    }
    let norm = taps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        // probability zero for a continuous draw
        return Err(Error::invalid("draw_channel: all-zero realization"));
    }
    for tap in taps.iter_mut() {
        *tap /= norm;
    }
    Ok(ChannelRealization { taps, eta })
}

/// AWGN with total complex variance sigma2 per sample (sigma2/2 per real
/// dimension).
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub sigma2: f64,
}

/// Noise variance from the SNR definition: sigma2 = E / 10^(snr_db/10).
pub fn snr_to_sigma2(snr_db: f64, energy: f64) -> f64 {
    energy / 10f64.powf(snr_db / 10.0)
}

/// Toeplitz convolution matrix of the channel: rows = cols + L - 1, entry
/// (r, c) = h[r - c].
pub fn convolution_matrix(channel: &ChannelRealization, cols: usize) -> DMatrix<Complex> {
    let l = channel.taps.len();
    let rows = cols + l - 1;
    DMatrix::from_fn(rows, cols, |r, c| {
        if r >= c && r - c < l {
            channel.taps[r - c]
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

/// Embed the distorted frame at offset tau, convolve with the channel, and
/// add AWGN; returns the length-2N receive window.
pub fn transmit(
    distorted: &[Complex],
    tau: usize,
    channel: &ChannelRealization,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<Vec<Complex>> {
    let n = distorted.len();
    let l = channel.taps.len();
    if l > n {
        return Err(Error::invalid(format!("transmit: L={l} exceeds N={n}")));
    }
    if tau > n - l + 1 {
        return Err(Error::invalid(format!(
            "transmit: tau={tau} outside [0, {}]",
            n - l + 1
        )));
    }
    let ext_len = 2 * n - l + 1;
    let m = 2 * n;
    // full linear convolution of the zero-padded extended vector
    let mut y = vec![Complex::new(0.0, 0.0); m];
    for (i, x) in distorted.iter().enumerate() {
        let pos = tau + i;
        for (k, h) in channel.taps.iter().enumerate() {
            y[pos + k] += h * x;
        }
    }
    debug_assert_eq!(ext_len + l - 1, m);
    if noise.sigma2 > 0.0 {
        let per_dim = Normal::new(0.0, (noise.sigma2 / 2.0).sqrt()).expect("valid std dev");
        for sample in y.iter_mut() {
            *sample += Complex::new(per_dim.sample(rng), per_dim.sample(rng));
        }
    }
    Ok(y)
}

/// Rescale a block to the given average per-sample power.
pub fn rescale_to_power(signal: &[Complex], target_power: f64) -> Vec<Complex> {
    let mean = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / signal.len() as f64;
    if mean == 0.0 {
        return signal.to_vec();
    }
    let gain = (target_power / mean).sqrt();
    signal.iter().map(|z| gain * z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_abs_diff_eq;

    fn test_rng(b: u32) -> rand_chacha::ChaCha12Rng {
        stream(1234, Purpose::Eval, 0, 0, b)
    }

    #[test]
    fn hpa_zero_maps_to_zero() {
        let out = saleh_hpa(&[Complex::new(0.0, 0.0)], &SalehParams::default(), 1.0);
        assert_eq!(out[0], Complex::new(0.0, 0.0));
    }

    #[test]
    fn hpa_unit_sample_matches_scalar_evaluation() {
        let out = saleh_hpa(&[Complex::new(1.0, 0.0)], &SalehParams::default(), 1.0);
        assert_abs_diff_eq!(out[0].norm(), 1.96 / 1.99, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0].arg(), 2.53 / 3.82, epsilon = 1e-12);
    }

    #[test]
    fn hpa_amplitude_peak_at_inverse_sqrt_beta() {
        // dA/dr = 0 at r = 1/sqrt(beta_a), A there = alpha_a/(2 sqrt(beta_a))
        let p = SalehParams::default();
        let r_peak = 1.0 / p.beta_a.sqrt();
        let a_peak = p.alpha_a / (2.0 * p.beta_a.sqrt());
        assert_abs_diff_eq!(p.am_am(r_peak), a_peak, epsilon = 1e-12);
        assert!(p.am_am(r_peak) > p.am_am(r_peak * 0.99));
        assert!(p.am_am(r_peak) > p.am_am(r_peak * 1.01));
    }

    #[test]
    fn hpa_small_drive_is_linear() {
        let p = SalehParams::default();
        let z = Complex::new(0.6, -0.8);
        for &g in &[1e-3, 1e-4] {
            let out = saleh_hpa(&[z], &p, g)[0];
            let linear = p.alpha_a * g * z;
            // cubic-order deviation from the small-signal linear response
            assert!((out - linear).norm() < 10.0 * g * g * g);
        }
    }

    #[test]
    fn evm_basic_values() {
        let r = vec![Complex::new(1.0, 0.0), Complex::new(0.0, 2.0)];
        assert_abs_diff_eq!(evm_percent(&r, &r).unwrap(), 0.0, epsilon = 1e-12);
        let zero = vec![Complex::new(0.0, 0.0); 2];
        assert_abs_diff_eq!(evm_percent(&zero, &r).unwrap(), 100.0, epsilon = 1e-12);
        let scaled: Vec<Complex> = r.iter().map(|z| 1.1 * z).collect();
        assert_abs_diff_eq!(evm_percent(&scaled, &r).unwrap(), 10.0, epsilon = 1e-9);
        assert!(matches!(
            evm_percent(&r, &zero),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn calibration_hits_target_and_is_monotone() {
        let p = SalehParams::default();
        let mut rng = test_rng(1);
        let probe: Vec<Complex> = (0..4096)
            .map(|_| {
                let n = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
                Complex::new(n.sample(&mut rng), n.sample(&mut rng))
            })
            .collect();
        let gamma = calibrate_drive(35.0, &p, &probe).unwrap();
        // fresh probe re-measurement
        let mut rng2 = test_rng(2);
        let fresh: Vec<Complex> = (0..4096)
            .map(|_| {
                let n = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
                Complex::new(n.sample(&mut rng2), n.sample(&mut rng2))
            })
            .collect();
        let same = measure_evm(&probe, &p, gamma).unwrap();
        assert!((same - 35.0).abs() <= 0.1, "calibration-probe EVM {same}");
        // an independent probe sees the same gamma within sampling spread
        let evm = measure_evm(&fresh, &p, gamma).unwrap();
        assert!((evm - 35.0).abs() <= 2.0, "re-measured EVM {evm}");
        // EVM over a gamma grid is non-decreasing
        let mut prev = 0.0;
        for i in 0..10 {
            let g = 10f64.powf(-2.0 + 0.4 * i as f64);
            let e = measure_evm(&probe, &p, g).unwrap();
            assert!(e >= prev - 1e-9, "EVM not monotone at gamma={g}");
            prev = e;
        }
        // vanishing target drives gamma toward zero
        let tiny = calibrate_drive(0.1, &p, &probe).unwrap();
        assert!(tiny < gamma / 10.0);
    }

    #[test]
    fn channel_single_path_unit_modulus() {
        let mut rng = test_rng(3);
        let ch = draw_channel(1, 0.2, &mut rng).unwrap();
        assert_eq!(ch.taps.len(), 1);
        assert_abs_diff_eq!(ch.taps[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn channel_unit_norm_and_zeroing_rate() {
        let mut rng = test_rng(4);
        let draws = 100_000;
        let l = 4;
        let mut zeros = 0usize;
        for _ in 0..draws {
            let ch = draw_channel(l, 0.2, &mut rng).unwrap();
            let norm: f64 = ch.taps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            assert!(ch.taps[0].norm() > 0.0);
            zeros += ch.taps[1..].iter().filter(|z| z.norm() == 0.0).count();
        }
        let frac = zeros as f64 / (draws * (l - 1)) as f64;
        assert!((frac - 0.5).abs() < 0.01, "zero-tap fraction {frac}");
        assert!(draw_channel(0, 0.2, &mut rng).is_err());
    }

    #[test]
    fn transmit_identity_channel() {
        let mut rng = test_rng(5);
        let x: Vec<Complex> = (0..6).map(|i| Complex::new(i as f64, -1.0)).collect();
        let ch = ChannelRealization {
            taps: vec![Complex::new(1.0, 0.0)],
            eta: 0.0,
        };
        let y = transmit(&x, 0, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
        assert_eq!(y.len(), 12);
        for i in 0..6 {
            assert_abs_diff_eq!((y[i] - x[i]).norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(y[6 + i].norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn transmit_matches_matrix_form() {
        // noiseless: transmit == H * x_ext with H per the Toeplitz layout
        let mut rng = test_rng(6);
        for _ in 0..20 {
            let n = 8;
            let l = 3;
            let ch = draw_channel(l, 0.2, &mut rng).unwrap();
            let x: Vec<Complex> = (0..n)
                .map(|_| {
                    Complex::new(
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                    )
                })
                .collect();
            let tau = rng.random_range(0..=(n - l + 1));
            let y = transmit(&x, tau, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();

            let ext_len = 2 * n - l + 1;
            let mut x_ext = vec![Complex::new(0.0, 0.0); ext_len];
            x_ext[tau..tau + n].copy_from_slice(&x);
            let h = convolution_matrix(&ch, ext_len);
            let xv = nalgebra::DVector::from_vec(x_ext);
            let y_mat = &h * &xv;
            for i in 0..2 * n {
                assert!((y[i] - y_mat[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transmit_offset_shift_covariance() {
        let mut rng = test_rng(7);
        let n = 8;
        let ch = draw_channel(2, 0.2, &mut rng).unwrap();
        let x: Vec<Complex> = (0..n).map(|i| Complex::new(1.0 + i as f64, 0.5)).collect();
        let y0 = transmit(&x, 2, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
        let y1 = transmit(&x, 3, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
        for i in 0..y0.len() - 1 {
            assert!((y1[i + 1] - y0[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn transmit_rejects_tau_out_of_range() {
        let mut rng = test_rng(8);
        let ch = draw_channel(3, 0.2, &mut rng).unwrap();
        let x = vec![Complex::new(1.0, 0.0); 8];
        assert!(transmit(&x, 7, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).is_err());
        assert!(transmit(&x, 6, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng).is_ok());
    }

    #[test]
    fn noise_variance_matches_sigma2() {
        let mut rng = test_rng(9);
        let x = vec![Complex::new(0.0, 0.0); 50_000];
        let ch = ChannelRealization {
            taps: vec![Complex::new(1.0, 0.0)],
            eta: 0.0,
        };
        let sigma2 = 0.37;
        let y = transmit(&x, 0, &ch, &NoiseModel { sigma2 }, &mut rng).unwrap();
        let var = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var - sigma2).abs() / sigma2 < 0.05, "sample variance {var}");
    }

    #[test]
    fn snr_conversion() {
        assert_abs_diff_eq!(snr_to_sigma2(0.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(snr_to_sigma2(10.0, 1.0), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(snr_to_sigma2(3.0, 2.0), 2.0 / 10f64.powf(0.3), epsilon = 1e-12);
        assert_abs_diff_eq!(snr_to_sigma2(3.0, 2.0), 1.00237, epsilon = 1e-5);
        // infinite SNR means noiseless
        assert_eq!(snr_to_sigma2(f64::INFINITY, 1.0), 0.0);
    }

    #[test]
    fn rescale_preserves_target_power() {
        let mut rng = test_rng(10);
        let x: Vec<Complex> = (0..1000)
            .map(|_| Complex::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let y = rescale_to_power(&x, 2.0);
        let mean = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert_abs_diff_eq!(mean, 2.0, epsilon = 1e-9);
    }
}
