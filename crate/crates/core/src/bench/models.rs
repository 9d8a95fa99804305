//! The four predictive models: linear and single-hidden-layer networks, each
//! with and without sector information. All models work on log targets.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{DivError, Result};
use crate::sample::WeightedSampleSet;
use crate::whitening::{fit_whitening, WhiteningMethod};

pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Lin,
    Lins,
    Nnet,
    Nnets,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lin, ModelKind::Lins, ModelKind::Nnet, ModelKind::Nnets];

    pub fn uses_sector(self) -> bool {
        matches!(self, ModelKind::Lins | ModelKind::Nnets)
    }

    pub fn is_network(self) -> bool {
        matches!(self, ModelKind::Nnet | ModelKind::Nnets)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Lin => "LIN",
            ModelKind::Lins => "LINS",
            ModelKind::Nnet => "NNET",
            ModelKind::Nnets => "NNETS",
        })
    }
}

impl FromStr for ModelKind {
    type Err = DivError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LIN" => Ok(ModelKind::Lin),
            "LINS" => Ok(ModelKind::Lins),
            "NNET" => Ok(ModelKind::Nnet),
            "NNETS" => Ok(ModelKind::Nnets),
            _ => Err(DivError::InvalidInput(format!("unknown model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self { hidden: 16, epochs: 1000, learning_rate: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyper: Hyper,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, hyper: Hyper::default() }
    }
}

/// Linear model coefficients: one block of `1 + d_x` rows per sector for
/// LINS (full interaction), a single block for LIN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub per_sector: bool,
    pub n_sectors: usize,
    /// design columns × targets, row-major
    pub coef: Vec<f64>,
    pub n_targets: usize,
    pub ridge: f64,
}

/// Single hidden layer with tanh activation. Inputs are standardized; the
/// outputs live in the whitened frame of the centered training log targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub use_sector: bool,
    pub n_sectors: usize,
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub target_mean: Vec<f64>,
    /// inverse of the target whitening matrix, row-major
    pub unwhiten: Vec<f64>,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredictiveModel {
    Linear(LinearModel),
    Network(NetworkModel),
}

fn linear_row(x: &[f64], sector: usize, per_sector: bool, n_sectors: usize) -> Vec<f64> {
    let block = 1 + x.len();
    let blocks = if per_sector { n_sectors } else { 1 };
    let mut row = vec![0.0; block * blocks];
    let off = if per_sector { sector * block } else { 0 };
    row[off] = 1.0;
    row[off + 1..off + block].copy_from_slice(x);
    row
}

fn fit_linear(train: &Dataset, per_sector: bool) -> Result<LinearModel> {
    let y = train.log_targets();
    let k = train.n_sectors();
    let rows: Vec<Vec<f64>> = (0..train.rows())
        .map(|i| linear_row(&train.features[i], train.sector[i], per_sector, k))
        .collect();
    let p = rows[0].len();
    let dy = train.n_targets();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let ym = DMatrix::from_fn(rows.len(), dy, |i, j| y[i][j]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &ym;
    let solve = |ridge: f64| -> Option<DMatrix<f64>> {
        let mut a = xtx.clone();
        let shift = ridge * (xtx.trace() / p as f64).max(1.0);
        for j in 0..p {
            a[(j, j)] += shift;
        }
        let chol = a.cholesky()?;
        let sol = chol.solve(&xty);
        sol.iter().all(|v| v.is_finite()).then_some(sol)
    };
    // Rank deficiency shows up as a failed or badly conditioned factorization.
    let eig = xtx.clone().symmetric_eigenvalues();
    let well_posed = eig.min() > 1e-12 * eig.max().max(f64::MIN_POSITIVE);
    let (coef, ridge) = match if well_posed { solve(0.0) } else { None } {
        Some(c) => (c, 0.0),
        None => (
            solve(RIDGE_FALLBACK).ok_or_else(|| DivError::Numerical("normal equations failed even with ridge".into()))?,
            RIDGE_FALLBACK,
        ),
    };
    let mut flat = Vec::with_capacity(p * dy);
    for i in 0..p {
        for j in 0..dy {
            flat.push(coef[(i, j)]);
        }
    }
    Ok(LinearModel { per_sector, n_sectors: k, coef: flat, n_targets: dy, ridge })
}

fn network_input(x: &[f64], sector: usize, use_sector: bool, n_sectors: usize, mean: &[f64], sd: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().zip(mean).zip(sd).map(|((v, m), s)| (v - m) / s).collect();
    if use_sector {
        v.extend((0..n_sectors).map(|k| if k == sector { 1.0 } else { 0.0 }));
    }
    v
}

fn fit_network(train: &Dataset, use_sector: bool, hyper: &Hyper) -> Result<NetworkModel> {
    if hyper.hidden == 0 || hyper.epochs == 0 || !(hyper.learning_rate > 0.0) {
        return Err(DivError::InvalidInput("network needs positive width, epochs and learning rate".into()));
    }
    let n = train.rows();
    let dx = train.n_features();
    let k = train.n_sectors();
    let input_mean: Vec<f64> = (0..dx).map(|j| train.features.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let input_sd: Vec<f64> = (0..dx)
        .map(|j| {
            let v = train.features.iter().map(|r| (r[j] - input_mean[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| network_input(&train.features[i], train.sector[i], use_sector, k, &input_mean, &input_sd))
        .collect();

    let logs = train.log_targets();
    let dy = train.n_targets();
    let target_mean: Vec<f64> = (0..dy).map(|j| logs.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = logs.iter().map(|r| r.iter().zip(&target_mean).map(|(v, m)| v - m).collect()).collect();
    let map = fit_whitening(&WeightedSampleSet::new(centered.clone(), None)?, WhiteningMethod::ZcaCor, 0.0)?;
    let ys: Vec<Vec<f64>> = centered.iter().map(|r| map.apply_point(r)).collect();
    let unwhiten_m = map
        .matrix()
        .try_inverse()
        .ok_or_else(|| DivError::Numerical("target whitening matrix is singular".into()))?;
    let unwhiten: Vec<f64> = (0..dy).flat_map(|i| (0..dy).map(move |j| (i, j))).map(|(i, j)| unwhiten_m[(i, j)]).collect();

    let d_in = xs[0].len();
    let h = hyper.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let lim1 = (6.0 / (d_in + h) as f64).sqrt();
    let lim2 = (6.0 / (h + dy) as f64).sqrt();
    let mut w1: Vec<f64> = (0..h * d_in).map(|_| rng.random_range(-lim1..lim1)).collect();
    let mut b1 = vec![0.0; h];
    let mut w2: Vec<f64> = (0..dy * h).map(|_| rng.random_range(-lim2..lim2)).collect();
    let mut b2 = vec![0.0; dy];

    let lr = hyper.learning_rate;
    let mut loss = f64::NAN;
    let mut act = vec![0.0; h];
    let mut out = vec![0.0; dy];
    for _ in 0..hyper.epochs {
        let mut g_w1 = vec![0.0; h * d_in];
        let mut g_b1 = vec![0.0; h];
        let mut g_w2 = vec![0.0; dy * h];
        let mut g_b2 = vec![0.0; dy];
        let mut sse = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            for j in 0..h {
                let z = b1[j] + (0..d_in).map(|i| w1[j * d_in + i] * x[i]).sum::<f64>();
                act[j] = z.tanh();
            }
            for t in 0..dy {
                out[t] = b2[t] + (0..h).map(|j| w2[t * h + j] * act[j]).sum::<f64>();
            }
            for t in 0..dy {
                let r = out[t] - y[t];
                sse += r * r;
                // d(mean squared error)/d out
                let d = 2.0 * r / (n * dy) as f64;
                g_b2[t] += d;
                for j in 0..h {
                    g_w2[t * h + j] += d * act[j];
                }
            }
            for j in 0..h {
                let back: f64 = (0..dy).map(|t| 2.0 * (out[t] - y[t]) / (n * dy) as f64 * w2[t * h + j]).sum();
                let dz = back * (1.0 - act[j] * act[j]);
                g_b1[j] += dz;
                for i in 0..d_in {
                    g_w1[j * d_in + i] += dz * x[i];
                }
            }
        }
        loss = sse / (n * dy) as f64;
        if !loss.is_finite() {
            return Err(DivError::Numerical("network training diverged (loss is not finite)".into()));
        }
        for (w, g) in w1.iter_mut().zip(&g_w1) {
            *w -= lr * g;
        }
        for (w, g) in b1.iter_mut().zip(&g_b1) {
            *w -= lr * g;
        }
        for (w, g) in w2.iter_mut().zip(&g_w2) {
            *w -= lr * g;
        }
        for (w, g) in b2.iter_mut().zip(&g_b2) {
            *w -= lr * g;
        }
    }
    Ok(NetworkModel {
        use_sector,
        n_sectors: k,
        input_mean,
        input_sd,
        target_mean,
        unwhiten,
        hidden: h,
        w1,
        b1,
        w2,
        b2,
        final_loss: loss,
    })
}

pub fn fit_model(spec: &ModelSpec, train: &Dataset) -> Result<PredictiveModel> {
    if train.rows() == 0 {
        return Err(DivError::InvalidInput("empty training set".into()));
    }
    match spec.kind {
        ModelKind::Lin => fit_linear(train, false).map(PredictiveModel::Linear),
        ModelKind::Lins => fit_linear(train, true).map(PredictiveModel::Linear),
        ModelKind::Nnet => fit_network(train, false, &spec.hyper).map(PredictiveModel::Network),
        ModelKind::Nnets => fit_network(train, true, &spec.hyper).map(PredictiveModel::Network),
    }
}

impl PredictiveModel {
    /// Predicted log targets, one row per input row.
    pub fn predict_log(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        match self {
            PredictiveModel::Linear(m) => {
                if m.n_sectors != data.n_sectors() && m.per_sector {
                    return Err(DivError::DimensionMismatch { expected: m.n_sectors, found: data.n_sectors() });
                }
                Ok((0..data.rows())
                    .map(|i| {
                        let row = linear_row(&data.features[i], data.sector[i], m.per_sector, m.n_sectors);
                        (0..m.n_targets)
                            .map(|t| row.iter().enumerate().map(|(j, v)| v * m.coef[j * m.n_targets + t]).sum())
                            .collect()
                    })
                    .collect())
            }
            PredictiveModel::Network(m) => {
                let dy = m.target_mean.len();
                let h = m.hidden;
                Ok((0..data.rows())
                    .map(|i| {
                        let x = network_input(&data.features[i], data.sector[i], m.use_sector, m.n_sectors, &m.input_mean, &m.input_sd);
                        let d_in = x.len();
                        let act: Vec<f64> = (0..h)
                            .map(|j| (m.b1[j] + (0..d_in).map(|k| m.w1[j * d_in + k] * x[k]).sum::<f64>()).tanh())
                            .collect();
                        let z: Vec<f64> = (0..dy)
                            .map(|t| m.b2[t] + (0..h).map(|j| m.w2[t * h + j] * act[j]).sum::<f64>())
                            .collect();
                        (0..dy)
                            .map(|a| m.target_mean[a] + (0..dy).map(|b| m.unwhiten[a * dy + b] * z[b]).sum::<f64>())
                            .collect()
                    })
                    .collect())
            }
        }
    }

    /// Predicted targets on the original (positive) scale.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict_log(data)?
            .into_iter()
            .map(|r| r.into_iter().map(f64::exp).collect())
            .collect())
    }

    pub fn final_loss(&self) -> Option<f64> {
        match self {
            PredictiveModel::Network(m) => Some(m.final_loss),
            PredictiveModel::Linear(_) => None,
        }
    }
}

/// Root mean squared error over all entries.
pub fn rmse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut count = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for (a, b) in p.iter().zip(t) {
            s += (a - b) * (a - b);
            count += 1;
        }
    }
    (s / count.max(1) as f64).sqrt()
}
