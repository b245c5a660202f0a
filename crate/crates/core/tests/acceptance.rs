//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//! Criteria 5 and 6 share a single desk-scale sweep.

use framesync::config::SimConfig;
use framesync::detection::{cancel_training, demap_and_count, invert_channel};
use framesync::elm::{
    hidden_layer, infer, load_model, pseudo_inverse, save_model, train, TrainingSet, PINV_REL_TOL,
};
use framesync::harness::{emit_csv, run_sweep, ResultRecord};
use framesync::impairments::{
    calibrate_drive, draw_channel, measure_evm, snr_to_sigma2, transmit, NoiseModel, SalehParams,
};
use framesync::methods::{calibration_probe, MethodId};
use framesync::metric::MetricVector;
use framesync::rng::{stream, Purpose};
use framesync::waveform::{qpsk_modulate, random_bits, superimpose, zadoff_chu};
use framesync::Complex;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use std::sync::OnceLock;

fn criterion<F: FnOnce() + std::panic::UnwindSafe>(number: u32, name: &str, body: F) {
    let outcome = std::panic::catch_unwind(body);
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("criterion {number} ({name}): {verdict}");
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
}

#[test]
fn criterion_1_noiseless_exactness() {
    criterion(1, "noiseless exactness", || {
        let mut cfg = SimConfig::desk();
        cfg.l = 1;
        cfg.hpa_enabled = false;
        cfg.snr_grid_db = vec![f64::INFINITY];
        cfg.trials_per_point = 1000;
        cfg.n_t = 4000;
        cfg.validate().unwrap();
        let records = run_sweep(&cfg, &[MethodId::SupCorr, MethodId::Prop]).unwrap();
        assert_eq!(records.len(), 2);
        for rec in &records {
            assert_eq!(rec.trials, 1000);
            assert_eq!(
                rec.sync_errors, 0,
                "{}: {} sync errors under noiseless conditions",
                rec.method, rec.sync_errors
            );
        }
    });
}

/// Abramowitz-Stegun 7.1.26 erfc, |error| < 1.5e-7.
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn criterion_2_qpsk_awgn_theory() {
    criterion(2, "QPSK/AWGN BER theory", || {
        let n = 64usize;
        let energy = 1.0;
        let s = zadoff_chu(n, 1).unwrap();
        let frames_per_point = 7_900u32; // > 1e6 bits at 2N bits per frame
        for (idx, snr_db) in [0.0, 2.0, 4.0, 6.0, 8.0].into_iter().enumerate() {
            let sigma2 = snr_to_sigma2(snr_db, energy);
            let (errs, bits) = (0..frames_per_point)
                .into_par_iter()
                .map(|f| {
                    let mut rng = stream(2026, Purpose::Eval, 200, idx as u32, f);
                    let bits = random_bits(2 * n, &mut rng);
                    let c = qpsk_modulate(&bits).unwrap();
                    // rho = 0: the frame is pure data
                    let x = superimpose(&s, &c, 0.0, energy).unwrap();
                    let ch = draw_channel(1, 0.2, &mut rng).unwrap();
                    let tau = rng.random_range(0..=n - 1);
                    let y =
                        transmit(&x.samples, tau, &ch, &NoiseModel { sigma2 }, &mut rng).unwrap();
                    // genie-aided sync: detect at the true offset
                    let x_est = invert_channel(&y, &ch, tau, n).unwrap();
                    let c_hat = cancel_training(&x_est, &s, 0.0, energy).unwrap();
                    let det = demap_and_count(&c_hat, &bits).unwrap();
                    (det.bit_errors, det.bits_total)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            assert!(bits as usize >= 1_000_000);
            let ber = errs as f64 / bits as f64;
            let theory = q_func((energy / sigma2).sqrt());
            let rel = (ber - theory).abs() / theory;
            assert!(
                rel < 0.10,
                "{snr_db} dB: BER {ber:.5e} vs theory {theory:.5e} (rel {rel:.3})"
            );
        }
    });
}

#[test]
fn criterion_3_pseudo_inverse_suite() {
    criterion(3, "LS/pseudo-inverse", || {
        // Penrose conditions on 50 random matrices up to 20x30
        let mut rng = stream(3, Purpose::Eval, 201, 0, 0);
        for case in 0..50 {
            let rows = rng.random_range(1..=20);
            let cols = rng.random_range(1..=30);
            let a = DMatrix::<Complex>::from_fn(rows, cols, |_, _| {
                Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let p = pseudo_inverse(&a, PINV_REL_TOL).unwrap();
            let scale = a.norm().max(1.0);
            assert!((&a * &p * &a - &a).norm() / scale < 1e-8, "case {case}: P1");
            assert!((&p * &a * &p - &p).norm() / scale < 1e-8, "case {case}: P2");
            let ap = &a * &p;
            let pa = &p * &a;
            assert!((&ap - ap.adjoint()).norm() < 1e-8, "case {case}: P3");
            assert!((&pa - pa.adjoint()).norm() < 1e-8, "case {case}: P4");
        }

        // exact interpolation when the sample count matches the hidden dim
        let (n, n_tilde) = (16usize, 64usize);
        let mut rng = stream(3, Purpose::Eval, 201, 1, 0);
        let inputs = DMatrix::from_fn(n, n_tilde, |_, _| rng.random::<f64>());
        let mut labels = DMatrix::zeros(n, n_tilde);
        for col in 0..n_tilde {
            labels[(rng.random_range(0..n), col)] = 1.0;
        }
        let set = TrainingSet { inputs, labels };
        let mut init = stream(3, Purpose::ModelInit, 201, 1, 0);
        let model = train(&set, n_tilde, 0.0, &mut init).unwrap();
        let h = hidden_layer(&model.w, &model.b, model.activation, &set.inputs).unwrap();
        let residual = (&model.upsilon * &h - &set.labels).norm();
        assert!(residual < 1e-6, "interpolation residual {residual}");

        // LS optimality: no perturbation of the pinv solution does better
        let mut rng = stream(3, Purpose::Eval, 201, 2, 0);
        let a = DMatrix::<f64>::from_fn(30, 20, |_, _| rng.random::<f64>() - 0.5);
        let b = nalgebra::DVector::from_fn(30, |_, _| rng.random::<f64>() - 0.5);
        let x = pseudo_inverse(&a, PINV_REL_TOL).unwrap() * &b;
        let best = (&a * &x - &b).norm();
        for _ in 0..100 {
            let delta = nalgebra::DVector::from_fn(20, |_, _| 1e-3 * (rng.random::<f64>() - 0.5));
            let probe = (&a * (&x + delta) - &b).norm();
            assert!(probe >= best - 1e-12, "perturbation beat LS: {probe} < {best}");
        }
    });
}

#[test]
fn criterion_4_evm_calibration() {
    criterion(4, "EVM calibration", || {
        let cfg = SimConfig::desk();
        let probe = calibration_probe(MethodId::Prop, &cfg, 64).unwrap();
        let mut last_gamma = 0.0;
        for target in [35.0, 40.0, 45.0, 50.0] {
            let gamma = calibrate_drive(target, &SalehParams::default(), &probe).unwrap();
            let evm = measure_evm(&probe, &SalehParams::default(), gamma).unwrap();
            assert!(
                (evm - target).abs() <= 0.5,
                "target {target}%: re-measured {evm}%"
            );
            assert!(gamma > last_gamma, "gamma not increasing at {target}%");
            last_gamma = gamma;
        }
    });
}

static DESK_SWEEP: OnceLock<Vec<ResultRecord>> = OnceLock::new();

fn desk_sweep() -> &'static [ResultRecord] {
    DESK_SWEEP.get_or_init(|| {
        let cfg = SimConfig::desk();
        run_sweep(&cfg, &[MethodId::Prop, MethodId::TdCorr, MethodId::SupCorr]).unwrap()
    })
}

fn by_method(records: &[ResultRecord], method: MethodId) -> Vec<&ResultRecord> {
    records.iter().filter(|r| r.method == method).collect()
}

/// Two-sigma band for the difference of two error-probability estimates;
/// trend comparisons count only statistically significant violations.
fn two_sigma(a: &ResultRecord, b: &ResultRecord) -> f64 {
    let (pa, pb) = (a.sync_error_prob(), b.sync_error_prob());
    let var = pa * (1.0 - pa) / a.trials as f64 + pb * (1.0 - pb) / b.trials as f64;
    2.0 * var.sqrt()
}

#[test]
fn criterion_5_sync_error_trends() {
    criterion(5, "sync error trends vs SNR", || {
        let records = desk_sweep();
        for method in [MethodId::Prop, MethodId::TdCorr, MethodId::SupCorr] {
            let curve = by_method(records, method);
            assert_eq!(curve.len(), 9);
            let violations = curve
                .windows(2)
                .filter(|w| {
                    w[1].sync_error_prob() > w[0].sync_error_prob() + two_sigma(&w[0], &w[1])
                })
                .count();
            assert!(
                violations <= 1,
                "{method}: {violations} non-monotonic grid steps"
            );
        }
        let prop = by_method(records, MethodId::Prop);
        let sup = by_method(records, MethodId::SupCorr);
        let td = by_method(records, MethodId::TdCorr);
        for ((p, s), t) in prop.iter().zip(&sup).zip(&td) {
            if p.snr_db >= 4.0 {
                assert!(
                    p.sync_error_prob() <= s.sync_error_prob() + two_sigma(p, s),
                    "Prop {} > Sup_Corr {} at {} dB",
                    p.sync_error_prob(),
                    s.sync_error_prob(),
                    p.snr_db
                );
            }
            assert!(
                s.sync_error_prob() <= t.sync_error_prob() + two_sigma(s, t),
                "Sup_Corr {} > TD_Corr {} at {} dB",
                s.sync_error_prob(),
                t.sync_error_prob(),
                s.snr_db
            );
        }
    });
}

#[test]
fn criterion_6_ber_trends() {
    criterion(6, "BER trends vs SNR", || {
        let records = desk_sweep();
        let prop = by_method(records, MethodId::Prop);
        let sup = by_method(records, MethodId::SupCorr);
        let td = by_method(records, MethodId::TdCorr);
        for ((p, s), t) in prop.iter().zip(&sup).zip(&td) {
            if p.snr_db >= 10.0 {
                assert!(
                    p.ber() <= s.ber(),
                    "Prop BER {} > Sup_Corr {} at {} dB",
                    p.ber(),
                    s.ber(),
                    p.snr_db
                );
                assert!(
                    p.ber() <= t.ber(),
                    "Prop BER {} > TD_Corr {} at {} dB",
                    p.ber(),
                    t.ber(),
                    p.snr_db
                );
            }
        }
    });
}

#[test]
fn criterion_7_detection_exactness() {
    criterion(7, "end-to-end detection exactness", || {
        let n = 32usize;
        let s = zadoff_chu(n, 1).unwrap();
        let total: u64 = (0..500u32)
            .into_par_iter()
            .map(|f| {
                let mut rng = stream(7, Purpose::Eval, 202, 0, f);
                let l = 1 + (f as usize % 4);
                let ch = draw_channel(l, 0.2, &mut rng).unwrap();
                let bits = random_bits(2 * n, &mut rng);
                let c = qpsk_modulate(&bits).unwrap();
                let x = superimpose(&s, &c, 0.3, 1.0).unwrap();
                let tau = rng.random_range(0..=n - l + 1);
                let y = transmit(&x.samples, tau, &ch, &NoiseModel { sigma2: 0.0 }, &mut rng)
                    .unwrap();
                let x_est = invert_channel(&y, &ch, tau, n).unwrap();
                let c_hat = cancel_training(&x_est, &s, 0.3, 1.0).unwrap();
                demap_and_count(&c_hat, &bits).unwrap().bit_errors
            })
            .sum();
        assert_eq!(total, 0, "{total} bit errors across 500 noiseless frames");
    });
}

#[test]
fn criterion_8_worker_count_reproducibility() {
    criterion(8, "worker-count reproducibility", || {
        let mut cfg = SimConfig::desk();
        cfg.n = 16;
        cfg.l = 3;
        cfg.n_s = 4;
        cfg.n_tilde = 64;
        cfg.n_t = 500;
        cfg.trials_per_point = 50;
        cfg.snr_grid_db = vec![0.0, 6.0, 12.0];
        cfg.validate().unwrap();
        let methods = MethodId::ALL;
        let dir = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for workers in [1usize, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            let records = pool.install(|| run_sweep(&cfg, &methods)).unwrap();
            let path = dir.path().join(format!("w{workers}.csv"));
            emit_csv(&records, &path).unwrap();
            outputs.push(std::fs::read(&path).unwrap());
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "CSV differs between 1 and 8 workers");
    });
}

#[test]
fn criterion_9_model_persistence() {
    criterion(9, "model persistence round-trip", || {
        let n = 16usize;
        let mut rng = stream(9, Purpose::Eval, 203, 0, 0);
        let inputs = DMatrix::from_fn(n, 200, |_, _| rng.random::<f64>());
        let mut labels = DMatrix::zeros(n, 200);
        for col in 0..200 {
            labels[(rng.random_range(0..n), col)] = 1.0;
        }
        let set = TrainingSet { inputs, labels };
        let mut init = stream(9, Purpose::ModelInit, 203, 0, 0);
        let model = train(&set, 48, 1e-8, &mut init).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.elm");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for case in 0..100 {
            let mut rng = stream(9, Purpose::Eval, 203, 1, case);
            let mut values: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            values.iter_mut().for_each(|v| *v /= norm);
            let qbar = MetricVector {
                values,
                normalized: true,
            };
            let a = infer(&model, &qbar).unwrap();
            let b = infer(&loaded, &qbar).unwrap();
            let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "case {case}: inference not bitwise equal");
        }

        // corrupted files must be rejected
        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("truncated.elm");
        std::fs::write(&truncated, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load_model(&truncated).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        let bad_path = dir.path().join("magic.elm");
        std::fs::write(&bad_path, &bad_magic).unwrap();
        assert!(load_model(&bad_path).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        let trail_path = dir.path().join("trailing.elm");
        std::fs::write(&trail_path, &trailing).unwrap();
        assert!(load_model(&trail_path).is_err());
    });
}
