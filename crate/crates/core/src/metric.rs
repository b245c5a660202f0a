//! Cross-correlation synchronization metrics and their normalization.

use crate::waveform::TrainingSequence;
use crate::{Complex, Error, Result};

/// Per-offset synchronization statistic; entry j is the candidate score for
/// frame offset j (0-based).
#[derive(Debug, Clone)]
pub struct MetricVector {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl MetricVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest entry; ties break to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

fn sliding_correlation(
    y: &[Complex],
    template: &[Complex],
    window: usize,
) -> Result<MetricVector> {
    let need = template.len() + window - 1;
    if y.len() < need {
        return Err(Error::invalid(format!(
            "correlation metric: received length {} < required {}",
            y.len(),
            need
        )));
    }
    let values = (0..window)
        .map(|j| {
            let acc: Complex = template
                .iter()
                .zip(&y[j..j + template.len()])
                .map(|(t, yi)| t.conj() * yi)
                .sum();
            acc.norm_sqr()
        })
        .collect();
    Ok(MetricVector {
        values,
        normalized: false,
    })
}

/// Full-length superimposed-training metric: g[j] = |sum_i s_i^* y_{j+i}|^2
/// over the N-offset search window.
pub fn correlation_metric(y: &[Complex], s: &TrainingSequence) -> Result<MetricVector> {
    sliding_correlation(y, &s.samples, s.len())
}

/// Sliding preamble metric for the time-division baselines: same shape
/// contract as [`correlation_metric`] but correlating only N_s samples.
pub fn td_correlation_metric(
    y: &[Complex],
    preamble: &TrainingSequence,
    window: usize,
) -> Result<MetricVector> {
    sliding_correlation(y, &preamble.samples, window)
}

/// Scale the metric to unit 2-norm. Idempotent and argmax-preserving.
pub fn normalize_metric(g: &MetricVector) -> Result<MetricVector> {
    let norm = g.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateMetric);
    }
    Ok(MetricVector {
        values: g.values.iter().map(|v| v / norm).collect(),
        normalized: true,
    })
}
