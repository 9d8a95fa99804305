//! Model-comparison benchmark on ESG-like data.
//!
//! Pipeline: draw (or load) a dataset, split 80/20, fit LIN, LINS, NNET and
//! NNETS on log targets, and score test predictions by Energy divergence
//! (energy_sq) after whitening both laws with one map fitted on the true
//! test log targets. RMSE is reported on the original scale.

pub mod data;
pub mod models;
pub mod score;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{synth_dataset, synth_dataset_noiseless, Dataset, Regime};
pub use models::{fit_model, Hyper, ModelKind, ModelSpec, PredictiveModel};
pub use score::{score_predictions, Predictions, ScoreRow, Scoreboard, DEFAULT_ALPHAS};

use crate::error::Result;
use crate::whitening::WhiteningMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub synth_seed: u64,
    pub rows: usize,
    pub regime: Regime,
    pub alphas: Vec<f64>,
    pub whitening: WhiteningMethod,
    pub hyper: Hyper,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synth_seed: 0,
            rows: data::DEFAULT_ROWS,
            regime: Regime::SectorLinear,
            alphas: DEFAULT_ALPHAS.to_vec(),
            whitening: WhiteningMethod::ZcaCor,
            hyper: Hyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scoreboard: Scoreboard,
    pub train_rows: usize,
    pub test_rows: usize,
    /// final training loss of each network (whitened MSE)
    pub network_losses: Vec<(String, f64)>,
    /// ridge used by each linear fit (0 when the normal equations were well posed)
    pub linear_ridges: Vec<(String, f64)>,
}

/// Fits the four models on `train` (in parallel) and returns test-split
/// log predictions in `ModelKind::ALL` order.
pub fn fit_and_predict(train: &Dataset, test: &Dataset, hyper: &Hyper) -> Result<Vec<(ModelKind, PredictiveModel, Predictions)>> {
    ModelKind::ALL
        .par_iter()
        .map(|&kind| {
            let model = fit_model(&ModelSpec { kind, hyper: *hyper }, train)?;
            let log = model.predict_log(test)?;
            Ok((kind, model, Predictions { model: kind.to_string(), log }))
        })
        .collect()
}

/// Runs the whole benchmark on an explicit dataset.
pub fn run_on_dataset(ds: &Dataset, alphas: &[f64], method: WhiteningMethod, hyper: &Hyper) -> Result<BenchReport> {
    let (train, test) = ds.split();
    let fitted = fit_and_predict(&train, &test, hyper)?;
    let preds: Vec<Predictions> = fitted.iter().map(|f| f.2.clone()).collect();
    let scoreboard = score_predictions(&preds, &test.log_targets(), alphas, method)?;
    let mut network_losses = Vec::new();
    let mut linear_ridges = Vec::new();
    for (kind, model, _) in &fitted {
        match model {
            PredictiveModel::Network(m) => network_losses.push((kind.to_string(), m.final_loss)),
            PredictiveModel::Linear(m) => linear_ridges.push((kind.to_string(), m.ridge)),
        }
    }
    Ok(BenchReport {
        scoreboard,
        train_rows: train.rows(),
        test_rows: test.rows(),
        network_losses,
        linear_ridges,
    })
}

/// Synthesizes a dataset from `cfg` and runs the benchmark.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let ds = synth_dataset(cfg.synth_seed, cfg.rows, cfg.regime)?;
    run_on_dataset(&ds, &cfg.alphas, cfg.whitening, &cfg.hyper)
}

/// Rescores `preds` after multiplying target column `col` by `c` in both the
/// true and the predicted test targets (a change of measurement unit).
pub fn rescaled_scoreboard(
    preds: &[Predictions],
    truth_log: &[Vec<f64>],
    col: usize,
    c: f64,
    alphas: &[f64],
    method: WhiteningMethod,
) -> Result<Scoreboard> {
    let rescale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let mut r = r.clone();
                r[col] = (r[col].exp() * c).ln();
                r
            })
            .collect()
    };
    let preds: Vec<Predictions> = preds
        .iter()
        .map(|p| Predictions { model: p.model.clone(), log: rescale(&p.log) })
        .collect();
    score_predictions(&preds, &rescale(truth_log), alphas, method)
}
