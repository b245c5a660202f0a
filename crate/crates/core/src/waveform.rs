//! Training sequences, QPSK data, and superimposed frame construction.

use crate::{Complex, Error, Result};
use std::f64::consts::PI;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Unit-modulus training sequence (Zadoff-Chu family).
#[derive(Debug, Clone)]
pub struct TrainingSequence {
    pub samples: Vec<Complex>,
    pub root: u32,
}

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Zadoff-Chu sequence of the given length and root.
///
/// Even lengths use the phase -pi*u*n^2/N variant, odd lengths -pi*u*n(n+1)/N.
/// The root must be coprime with the length so the sequence keeps its ideal
/// periodic autocorrelation.
pub fn zadoff_chu(length: usize, root: u32) -> Result<TrainingSequence> {
    if length == 0 {
        return Err(Error::invalid("zadoff_chu: length must be positive"));
    }
    if root == 0 || gcd(root as u64, length as u64) != 1 {
        return Err(Error::invalid(format!(
            "zadoff_chu: root {root} not coprime with length {length}"
        )));
    }
    let n = length as f64;
    let u = root as f64;
    let samples = (0..length)
        .map(|k| {
            let kf = k as f64;
            let phase = if length % 2 == 0 {
                -PI * u * kf * kf / n
            } else {
                -PI * u * kf * (kf + 1.0) / n
            };
            Complex::from_polar(1.0, phase)
        })
        .collect();
    Ok(TrainingSequence {
        samples,
        root,
    })
}

/// Gray-mapped QPSK data block: N unit-power symbols carrying 2N bits.
#[derive(Debug, Clone)]
pub struct DataSymbols {
    pub symbols: Vec<Complex>,
    pub bits: Vec<u8>,
}

impl DataSymbols {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Map one bit pair to a QPSK symbol: (b0, b1) -> ((1-2*b0) + j(1-2*b1))/sqrt(2).
pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex {
    Complex::new(
        (1.0 - 2.0 * f64::from(b0)) * FRAC_1_SQRT_2,
        (1.0 - 2.0 * f64::from(b1)) * FRAC_1_SQRT_2,
    )
}

/// Gray-map an even-length bit sequence onto unit-power QPSK symbols.
pub fn qpsk_modulate(bits: &[u8]) -> Result<DataSymbols> {
    if bits.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "qpsk_modulate: odd bit count {}",
            bits.len()
        )));
    }
    let symbols = bits
        .chunks_exact(2)
        .map(|pair| qpsk_symbol(pair[0], pair[1]))
        .collect();
    Ok(DataSymbols {
        symbols,
        bits: bits.to_vec(),
    })
}

/// Hard-decision demap back to bits; inverse of [`qpsk_modulate`] on clean
/// symbols and a minimum-distance decision otherwise.
pub fn qpsk_demodulate(symbols: &[Complex]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for z in symbols {
        bits.push(u8::from(z.re < 0.0));
        bits.push(u8::from(z.im < 0.0));
    }
    bits
}

/// Superimposed transmit frame x = sqrt(rho*E)*s + sqrt((1-rho)*E)*c.
#[derive(Debug, Clone)]
pub struct SuperimposedFrame {
    pub samples: Vec<Complex>,
    pub rho: f64,
    pub energy: f64,
}

/// Superimpose training and data at power split rho, per-symbol power E.
pub fn superimpose(
    s: &TrainingSequence,
    c: &DataSymbols,
    rho: f64,
    energy: f64,
) -> Result<SuperimposedFrame> {
    if s.len() != c.len() {
        return Err(Error::invalid(format!(
            "superimpose: length mismatch {} vs {}",
            s.len(),
            c.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("superimpose: rho {rho} out of [0,1]")));
    }
    if energy <= 0.0 {
        return Err(Error::invalid(format!(
            "superimpose: energy {energy} must be positive"
        )));
    }
    let a = (rho * energy).sqrt();
    let d = ((1.0 - rho) * energy).sqrt();
    let samples = s
        .samples
        .iter()
        .zip(&c.symbols)
        .map(|(si, ci)| a * si + d * ci)
        .collect();
    Ok(SuperimposedFrame {
        samples,
        rho,
        energy,
    })
}

/// Draw `count` random bits from the stream.
pub fn random_bits(count: usize, rng: &mut impl rand::Rng) -> Vec<u8> {
    (0..count).map(|_| u8::from(rng.random::<bool>())).collect()
}
