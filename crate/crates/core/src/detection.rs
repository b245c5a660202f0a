//! Post-synchronization symbol detection: channel pseudo-inversion,
//! superimposed-training cancellation, demapping, and bit-error accounting.

use crate::elm::{pseudo_inverse, PINV_REL_TOL};
use crate::impairments::{convolution_matrix, ChannelRealization};
use crate::waveform::{qpsk_demodulate, qpsk_symbol, TrainingSequence};
use crate::{Complex, Error, Result};
use nalgebra::DVector;

#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub symbols_hat: Vec<Complex>,
    pub bits_hat: Vec<u8>,
    pub bit_errors: u64,
    pub bits_total: u64,
}

/// Invert the channel over the whole receive window and extract the N-sample
/// frame starting at the estimated offset.
///
/// The receiver is granted perfect channel knowledge; the convolution matrix
/// is rebuilt per call and pseudo-inverted by SVD.
pub fn invert_channel(
    y: &[Complex],
    channel: &ChannelRealization,
    tau_hat: usize,
    n: usize,
) -> Result<Vec<Complex>> {
    let l = channel.taps.len();
    if n < l {
        return Err(Error::invalid(format!("invert_channel: N={n} < L={l}")));
    }
    if tau_hat > n - l + 1 {
        return Err(Error::invalid(format!(
            "invert_channel: tau_hat={tau_hat} outside [0, {}]",
            n - l + 1
        )));
    }
    let ext_len = 2 * n - l + 1;
    if y.len() != ext_len + l - 1 {
        return Err(Error::invalid(format!(
            "invert_channel: received length {} != M = {}",
            y.len(),
            ext_len + l - 1
        )));
    }
    let x_est_full = solve_least_squares(y, channel, ext_len)?;
    Ok(x_est_full.iter().skip(tau_hat).take(n).cloned().collect())
}

/// Least-squares solve of H x = y for the full convolution matrix H.
///
/// H always has full column rank (the first tap is nonzero), so the normal
/// equations give the Moore-Penrose solution. The Gram matrix H^H H is
/// Hermitian banded Toeplitz and is assembled from the tap autocorrelation
/// in O(L^2); a Cholesky solve replaces the much costlier explicit SVD
/// pseudo-inverse, which remains as a verified fallback.
fn solve_least_squares(
    y: &[Complex],
    channel: &ChannelRealization,
    ext_len: usize,
) -> Result<DVector<Complex>> {
    let taps = &channel.taps;
    let l = taps.len();
    let mut autocorr = vec![Complex::new(0.0, 0.0); l];
    for k in 0..l {
        for t in 0..l - k {
            autocorr[k] += taps[t].conj() * taps[t + k];
        }
    }
    let gram = nalgebra::DMatrix::from_fn(ext_len, ext_len, |i, j| {
        let d = i.abs_diff(j);
        if d >= l {
            Complex::new(0.0, 0.0)
        } else if i >= j {
            autocorr[d]
        } else {
            autocorr[d].conj()
        }
    });
    // rhs = H^H y, a sliding correlation of the window with the taps
    let rhs = DVector::from_fn(ext_len, |j, _| {
        (0..l).map(|t| taps[t].conj() * y[j + t]).sum::<Complex>()
    });
    if let Some(chol) = nalgebra::Cholesky::new(gram.clone()) {
        let x = chol.solve(&rhs);
        let residual = (&gram * &x - &rhs).norm();
        if residual.is_finite() && residual <= 1e-8 * rhs.norm().max(1.0) {
            return Ok(x);
        }
    }
    log::warn!("normal equations ill-conditioned; falling back to SVD pseudo-inverse");
    let h = convolution_matrix(channel, ext_len);
    let h_pinv = pseudo_inverse(&h, PINV_REL_TOL)?;
    Ok(h_pinv * DVector::from_column_slice(y))
}

/// Undo the superimposition: c_hat = (x_est - sqrt(rho E) s) / sqrt((1-rho) E).
pub fn cancel_training(
    x_est: &[Complex],
    s: &TrainingSequence,
    rho: f64,
    energy: f64,
) -> Result<Vec<Complex>> {
    if !(0.0..1.0).contains(&rho) {
        if rho == 1.0 {
            return Err(Error::NoData);
        }
        return Err(Error::invalid(format!("cancel_training: rho {rho}")));
    }
    if x_est.len() != s.len() {
        return Err(Error::invalid(format!(
            "cancel_training: lengths {} vs {}",
            x_est.len(),
            s.len()
        )));
    }
    let pilot_amp = (rho * energy).sqrt();
    let data_amp = ((1.0 - rho) * energy).sqrt();
    Ok(x_est
        .iter()
        .zip(&s.samples)
        .map(|(x, si)| (x - pilot_amp * si) / data_amp)
        .collect())
}

/// Minimum-distance QPSK decisions, Gray demap, and Hamming distance against
/// the transmitted bits.
pub fn demap_and_count(c_hat: &[Complex], true_bits: &[u8]) -> Result<DetectionResult> {
    if true_bits.len() != 2 * c_hat.len() {
        return Err(Error::invalid(format!(
            "demap_and_count: {} bits for {} symbols",
            true_bits.len(),
            c_hat.len()
        )));
    }
    let bits_hat = qpsk_demodulate(c_hat);
    let symbols_hat = bits_hat
        .chunks_exact(2)
        .map(|p| qpsk_symbol(p[0], p[1]))
        .collect();
    let bit_errors = bits_hat
        .iter()
        .zip(true_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(DetectionResult {
        symbols_hat,
        bits_hat,
        bit_errors,
        bits_total: true_bits.len() as u64,
    })
}
