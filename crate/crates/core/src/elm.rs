//! Extreme learning machine offset classifier.
//!
//! Random fixed hidden layer, minimum-norm least-squares output weights,
//! one-hot offset labels. Also hosts the shared SVD pseudo-inverse kernel
//! used both here and for channel inversion.

use crate::metric::MetricVector;
use crate::{Error, Result};
use nalgebra::{ComplexField, DMatrix, DVector};
use rand::Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Hidden-layer activation. Only sigmoid is exercised by the pipelines; the
/// other ids exist for the model file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Sigmoid = 0,
    Tanh = 1,
    Relu = 2,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Trained classifier: y = Upsilon * sigma(W * g + b).
#[derive(Debug, Clone)]
pub struct ElmModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub upsilon: DMatrix<f64>,
    pub activation: Activation,
}

/// Metric/label pairs: columns of `inputs` are normalized metric vectors,
/// columns of `labels` are one-hot offset indicators.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub inputs: DMatrix<f64>,
    pub labels: DMatrix<f64>,
}

impl TrainingSet {
    pub fn num_samples(&self) -> usize {
        self.inputs.ncols()
    }
}

/// Moore-Penrose inverse via SVD, truncating singular values below
/// rel_tol * sigma_max.
pub fn pseudo_inverse<T>(a: &DMatrix<T>, rel_tol: f64) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    if a.iter().any(|e| !e.clone().modulus().is_finite()) {
        return Err(Error::invalid("pseudo_inverse: non-finite entry"));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = rel_tol * sigma_max;
    let k = svd.singular_values.len();
    let mut sigma_inv = DMatrix::<T>::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > thresh && s > 0.0 {
            sigma_inv[(i, i)] = T::from_real(1.0 / s);
        }
    }
    Ok(v_t.adjoint() * sigma_inv * u.adjoint())
}

/// Default relative truncation for the pseudo-inverse.
pub const PINV_REL_TOL: f64 = 1e-12;

/// Draw input weights and biases i.i.d. uniform on [-1, 1].
pub fn init_random(
    input_dim: usize,
    hidden_dim: usize,
    rng: &mut impl Rng,
) -> (DMatrix<f64>, DVector<f64>) {
    assert!(input_dim >= 1 && hidden_dim >= 1);
    // fill in a fixed (row-major) order so the draw sequence is part of the
    // reproducibility contract
    let mut w = DMatrix::zeros(hidden_dim, input_dim);
    for r in 0..hidden_dim {
        for c in 0..input_dim {
            w[(r, c)] = 2.0 * rng.random::<f64>() - 1.0;
        }
    }
    let b = DVector::from_fn(hidden_dim, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    (w, b)
}

/// Hidden-layer response sigma(W * inputs + b 1^T) for a column batch.
pub fn hidden_layer(
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    activation: Activation,
    inputs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if inputs.nrows() != w.ncols() {
        return Err(Error::invalid(format!(
            "hidden_layer: input rows {} != model input dim {}",
            inputs.nrows(),
            w.ncols()
        )));
    }
    let mut h = w * inputs;
    for mut col in h.column_iter_mut() {
        for (i, z) in col.iter_mut().enumerate() {
            *z = activation.apply(*z + b[i]);
        }
    }
    Ok(h)
}

/// Learn output weights by the regularized normal equations
/// Upsilon = T H^T (H H^T + ridge I)^{-1}; with ridge = 0 and a singular
/// system the solve falls back to the SVD pseudo-inverse of H.
pub fn train(
    set: &TrainingSet,
    hidden_dim: usize,
    ridge: f64,
    rng: &mut impl Rng,
) -> Result<ElmModel> {
    let input_dim = set.inputs.nrows();
    let n_t = set.inputs.ncols();
    if n_t == 0 || set.labels.ncols() != n_t {
        return Err(Error::invalid(format!(
            "train: {} input columns vs {} label columns",
            n_t,
            set.labels.ncols()
        )));
    }
    if set.labels.nrows() != input_dim {
        return Err(Error::invalid("train: label rows != input rows"));
    }
    let activation = Activation::Sigmoid;
    let (w, b) = init_random(input_dim, hidden_dim, rng);
    let h = hidden_layer(&w, &b, activation, &set.inputs)?;

    let mut gram = &h * h.transpose();
    for i in 0..hidden_dim {
        gram[(i, i)] += ridge;
    }
    // solve (H H^T + ridge I) X = H T^T, then Upsilon = X^T; a singular
    // system (possible at ridge = 0) falls back to the SVD pseudo-inverse
    let rhs = &h * set.labels.transpose();
    let chol_solution = gram.clone().cholesky().map(|chol| chol.solve(&rhs));
    let solve_ok = chol_solution.as_ref().is_some_and(|x| {
        let residual = (&gram * x - &rhs).norm();
        x.iter().all(|v| v.is_finite()) && residual <= 1e-6 * rhs.norm().max(1.0)
    });
    let upsilon = match chol_solution {
        Some(x) if solve_ok => x.transpose(),
        _ => {
            let sv = gram.singular_values();
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            log::warn!(
                "train: normal equations singular (cond ~ {:.3e}), using SVD pseudo-inverse",
                smax / smin.max(f64::MIN_POSITIVE)
            );
            &set.labels * pseudo_inverse(&h, PINV_REL_TOL)?
        }
    };
    if upsilon.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("train: non-finite output weights"));
    }
    Ok(ElmModel {
        input_dim,
        hidden_dim,
        w,
        b,
        upsilon,
        activation,
    })
}

/// Network output O = Upsilon * sigma(W * qbar + b) for one metric vector.
pub fn infer(model: &ElmModel, qbar: &MetricVector) -> Result<Vec<f64>> {
    if qbar.len() != model.input_dim {
        return Err(Error::invalid(format!(
            "infer: metric length {} != input dim {}",
            qbar.len(),
            model.input_dim
        )));
    }
    let q = DVector::from_column_slice(&qbar.values);
    let mut z = &model.w * q;
    for (i, v) in z.iter_mut().enumerate() {
        *v = model.activation.apply(*v + model.b[i]);
    }
    let o = &model.upsilon * z;
    Ok(o.iter().cloned().collect())
}

/// Offset decision: argmax_j |o_j|^2, 0-based, ties to the smallest index.
pub fn decide_offset(output: &[f64]) -> usize {
    assert!(!output.is_empty(), "decide_offset: empty output");
    let mut best = 0;
    for (j, o) in output.iter().enumerate() {
        if o * o > output[best] * output[best] {
            best = j;
        }
    }
    best
}

const MODEL_MAGIC: &[u8; 5] = b"ELMFS";
const MODEL_VERSION: u8 = 1;

/// Serialize a model: magic, version, activation id, N and hidden dim as
/// u32 LE, then W, b, Upsilon as row-major f64 LE.
pub fn save_model(model: &ElmModel, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&[MODEL_VERSION, model.activation as u8])?;
    out.write_all(&(model.input_dim as u32).to_le_bytes())?;
    out.write_all(&(model.hidden_dim as u32).to_le_bytes())?;
    write_matrix_row_major(&mut out, &model.w)?;
    for v in model.b.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    write_matrix_row_major(&mut out, &model.upsilon)?;
    out.flush()?;
    Ok(())
}

fn write_matrix_row_major(out: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact_or_corrupt(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|_| Error::CorruptModel(format!("truncated while reading {what}")))
}

fn read_f64(input: &mut impl Read, what: &str) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact_or_corrupt(input, &mut buf, what)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn load_model(path: &Path) -> Result<ElmModel> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    read_exact_or_corrupt(&mut input, &mut magic, "magic")?;
    if &magic != MODEL_MAGIC {
        return Err(Error::CorruptModel("bad magic bytes".to_string()));
    }
    let mut head = [0u8; 2];
    read_exact_or_corrupt(&mut input, &mut head, "header")?;
    if head[0] != MODEL_VERSION {
        return Err(Error::CorruptModel(format!("unknown version {}", head[0])));
    }
    let activation = Activation::from_id(head[1])
        .ok_or_else(|| Error::CorruptModel(format!("unknown activation id {}", head[1])))?;
    let mut dim = [0u8; 4];
    read_exact_or_corrupt(&mut input, &mut dim, "input dim")?;
    let input_dim = u32::from_le_bytes(dim) as usize;
    read_exact_or_corrupt(&mut input, &mut dim, "hidden dim")?;
    let hidden_dim = u32::from_le_bytes(dim) as usize;
    if input_dim == 0 || hidden_dim == 0 {
        return Err(Error::CorruptModel(format!(
            "degenerate dims {input_dim}x{hidden_dim}"
        )));
    }
    let mut w = DMatrix::zeros(hidden_dim, input_dim);
    for r in 0..hidden_dim {
        for c in 0..input_dim {
            w[(r, c)] = read_f64(&mut input, "W")?;
        }
    }
    let mut b = DVector::zeros(hidden_dim);
    for i in 0..hidden_dim {
        b[i] = read_f64(&mut input, "b")?;
    }
    let mut upsilon = DMatrix::zeros(input_dim, hidden_dim);
    for r in 0..input_dim {
        for c in 0..hidden_dim {
            upsilon[(r, c)] = read_f64(&mut input, "Upsilon")?;
        }
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::CorruptModel("trailing bytes after payload".to_string()));
    }
    Ok(ElmModel {
        input_dim,
        hidden_dim,
        w,
        b,
        upsilon,
        activation,
    })
}

const DATASET_MAGIC: &[u8; 5] = b"ELMDS";

/// Serialize a training set: magic, version, N and N_t as u32 LE, one-hot
/// label index per column as u32 LE, then inputs column-major f64 LE.
pub fn save_dataset(set: &TrainingSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&[MODEL_VERSION])?;
    out.write_all(&(set.inputs.nrows() as u32).to_le_bytes())?;
    out.write_all(&(set.inputs.ncols() as u32).to_le_bytes())?;
    for col in set.labels.column_iter() {
        let hot = col
            .iter()
            .position(|v| *v == 1.0)
            .ok_or_else(|| Error::invalid("save_dataset: column without one-hot entry"))?;
        out.write_all(&(hot as u32).to_le_bytes())?;
    }
    for col in set.inputs.column_iter() {
        for v in col.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<TrainingSet> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    read_exact_or_corrupt(&mut input, &mut magic, "magic")?;
    if &magic != DATASET_MAGIC {
        return Err(Error::CorruptModel("bad dataset magic".to_string()));
    }
    let mut ver = [0u8; 1];
    read_exact_or_corrupt(&mut input, &mut ver, "version")?;
    if ver[0] != MODEL_VERSION {
        return Err(Error::CorruptModel(format!("unknown version {}", ver[0])));
    }
    let mut dim = [0u8; 4];
    read_exact_or_corrupt(&mut input, &mut dim, "N")?;
    let n = u32::from_le_bytes(dim) as usize;
    read_exact_or_corrupt(&mut input, &mut dim, "N_t")?;
    let n_t = u32::from_le_bytes(dim) as usize;
    if n == 0 || n_t == 0 {
        return Err(Error::CorruptModel("degenerate dataset dims".to_string()));
    }
    let mut labels = DMatrix::zeros(n, n_t);
    for c in 0..n_t {
        read_exact_or_corrupt(&mut input, &mut dim, "label")?;
        let hot = u32::from_le_bytes(dim) as usize;
        if hot >= n {
            return Err(Error::CorruptModel(format!("label index {hot} >= N {n}")));
        }
        labels[(hot, c)] = 1.0;
    }
    let mut inputs = DMatrix::zeros(n, n_t);
    for c in 0..n_t {
        for r in 0..n {
            inputs[(r, c)] = read_f64(&mut input, "inputs")?;
        }
    }
    Ok(TrainingSet { inputs, labels })
}
