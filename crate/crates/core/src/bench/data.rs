//! Synthetic ESG/financial datasets and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{DivError, Result};

pub const FEATURE_NAMES: [&str; 4] = ["ESG", "E_SC", "S_SC", "G_SC"];
pub const TARGET_NAMES: [&str; 3] = ["TASS", "TOVR", "SFND"];

/// Sector labels and their frequencies in the reference sample of 1062 firms.
pub const SECTORS: [(&str, u32); 5] = [
    ("Consumer", 351),
    ("Financials", 14),
    ("Health.Util", 55),
    ("Manufacturing", 579),
    ("Tech.Com", 63),
];

pub const DEFAULT_ROWS: usize = 1062;
pub const MIN_ROWS: usize = 200;

/// Tabulated means and standard deviations of the four score columns.
pub const FEATURE_MEANS: [f64; 4] = [0.65, 0.76, 0.51, 0.62];
pub const FEATURE_SDS: [f64; 4] = [0.11, 0.17, 0.23, 0.15];

// Location/scale of the normal laws whose [0,1] truncations have the
// tabulated moments.
const LATENT: [(f64, f64); 4] = [
    (0.6502939538240886, 0.11046666988216162),
    (0.9079100502407941, 0.25429987094221096),
    (0.5142159334215, 0.2742930334715151),
    (0.6230615353098531, 0.15388444246601898),
];

// Loading of E, S, G on a common latent factor.
const FACTOR_LOADING: f64 = 0.4;

// Median levels (EUR) of TASS, TOVR, SFND.
const TARGET_MEDIANS: [f64; 3] = [43824.91, 43528.31, 15054.90];

/// Standard deviation of the log-scale noise shared by the three targets
/// (correlation 0.6 between targets).
pub const LOG_NOISE_SD: f64 = 0.5;
const NOISE_CORRELATION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SectorLinear,
    GlobalLinear,
    Nonlinear,
}

impl FromStr for Regime {
    type Err = DivError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sector_linear" => Ok(Regime::SectorLinear),
            "global_linear" => Ok(Regime::GlobalLinear),
            "nonlinear" => Ok(Regime::Nonlinear),
            other => Err(DivError::InvalidInput(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub sector_names: Vec<String>,
    /// rows × d_x
    pub features: Vec<Vec<f64>>,
    /// rows × d_y, strictly positive
    pub targets: Vec<Vec<f64>>,
    /// index into `sector_names`
    pub sector: Vec<usize>,
    pub split_seed: u64,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        target_names: Vec<String>,
        sector_names: Vec<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        sector: Vec<usize>,
        split_seed: u64,
    ) -> Result<Self> {
        let rows = features.len();
        if rows == 0 {
            return Err(DivError::InvalidInput("dataset has no rows".into()));
        }
        if targets.len() != rows || sector.len() != rows {
            return Err(DivError::InvalidInput("features, targets and sectors differ in length".into()));
        }
        for (i, (x, y)) in features.iter().zip(&targets).enumerate() {
            if x.len() != feature_names.len() {
                return Err(DivError::DimensionMismatch { expected: feature_names.len(), found: x.len() });
            }
            if y.len() != target_names.len() {
                return Err(DivError::DimensionMismatch { expected: target_names.len(), found: y.len() });
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(DivError::InvalidInput(format!("non-finite value in row {i}")));
            }
            if y.iter().any(|v| *v <= 0.0) {
                return Err(DivError::SupportViolation(format!("targets must be positive (row {i})")));
            }
            if sector[i] >= sector_names.len() {
                return Err(DivError::InvalidInput(format!("undeclared sector label in row {i}")));
            }
        }
        Ok(Self { feature_names, target_names, sector_names, features, targets, sector, split_seed })
    }

    pub fn rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_names.len()
    }

    pub fn n_sectors(&self) -> usize {
        self.sector_names.len()
    }

    pub fn log_targets(&self) -> Vec<Vec<f64>> {
        self.targets.iter().map(|y| y.iter().map(|v| v.ln()).collect()).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
            sector: idx.iter().map(|&i| self.sector[i]).collect(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            sector_names: self.sector_names.clone(),
            features: Vec::new(),
            targets: Vec::new(),
            sector: Vec::new(),
            split_seed: self.split_seed,
        }
    }

    /// 80/20 train/test split by a permutation seeded with `split_seed`.
    pub fn split(&self) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.split_seed));
        let n_train = (0.8 * self.rows() as f64).round() as usize;
        (self.subset(&idx[..n_train]), self.subset(&idx[n_train..]))
    }

    /// Multiplies target column `col` by `c > 0`.
    pub fn rescale_target(&self, col: usize, c: f64) -> Result<Self> {
        if col >= self.n_targets() || !(c > 0.0) {
            return Err(DivError::InvalidInput("bad rescaling".into()));
        }
        let mut out = self.clone();
        for y in &mut out.targets {
            y[col] *= c;
        }
        Ok(out)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.feature_names.clone();
        header.extend(self.target_names.iter().cloned());
        header.push("sector".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.rows() {
            let mut rec: Vec<String> = self.features[i].iter().map(|v| format!("{v:?}")).collect();
            rec.extend(self.targets[i].iter().map(|v| format!("{v:?}")));
            rec.push(self.sector_names[self.sector[i]].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a CSV with declared feature, target and sector columns. Sector
    /// labels are sorted so the encoding does not depend on row order.
    pub fn read_csv<R: std::io::Read>(
        reader: R,
        features: &[String],
        targets: &[String],
        sector: &str,
        split_seed: u64,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| DivError::Csv { row: 1, message: e.to_string() })?.clone();
        let col = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DivError::InvalidInput(format!("column '{name}' not found")))
        };
        let fcols: Vec<usize> = features.iter().map(|c| col(c)).collect::<Result<_>>()?;
        let tcols: Vec<usize> = targets.iter().map(|c| col(c)).collect::<Result<_>>()?;
        let scol = col(sector)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut labels = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 2;
            let rec = rec.map_err(|e| DivError::Csv { row, message: e.to_string() })?;
            let num = |c: usize| -> Result<f64> {
                let cell = rec.get(c).unwrap_or("");
                cell.parse::<f64>()
                    .map_err(|_| DivError::Csv { row, message: format!("non-numeric cell '{cell}'") })
            };
            xs.push(fcols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
            ys.push(tcols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
            let label = rec.get(scol).unwrap_or("").to_string();
            if label.is_empty() {
                return Err(DivError::Csv { row, message: "missing sector label".into() });
            }
            labels.push(label);
        }
        let mut names: Vec<String> = labels.clone();
        names.sort();
        names.dedup();
        let code: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let sector_idx = labels.iter().map(|l| code[l.as_str()]).collect();
        Self::new(features.to_vec(), targets.to_vec(), names, xs, ys, sector_idx, split_seed)
    }

    pub fn load_csv(path: impl AsRef<Path>, features: &[String], targets: &[String], sector: &str, split_seed: u64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, features, targets, sector, split_seed)
    }
}

fn csv_err(e: csv::Error) -> DivError {
    DivError::Csv { row: 0, message: e.to_string() }
}

/// Structural coefficients of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// [sector][target]
    pub intercepts: Vec<Vec<f64>>,
    /// [sector][feature][target], acting on centered features
    pub slopes: Vec<Vec<Vec<f64>>>,
}

/// Fixed coefficients for each regime (independent of the data seed).
pub fn synth_truth(regime: Regime) -> SynthTruth {
    let base: Vec<f64> = TARGET_MEDIANS.iter().map(|m| m.ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ec7_0f00);
    let k = SECTORS.len();
    let (dx, dy) = (FEATURE_NAMES.len(), TARGET_NAMES.len());
    let global_slopes: Vec<Vec<f64>> = (0..dx).map(|_| (0..dy).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    match regime {
        Regime::SectorLinear => {
            let shifts = [0.0, 1.2, -0.6, 0.5, -1.0];
            SynthTruth {
                intercepts: (0..k)
                    .map(|s| (0..dy).map(|t| base[t] + shifts[s] * (1.0 + 0.3 * t as f64)).collect())
                    .collect(),
                slopes: (0..k)
                    .map(|_| (0..dx).map(|_| (0..dy).map(|_| rng.random_range(-4.0..4.0)).collect()).collect())
                    .collect(),
            }
        }
        Regime::GlobalLinear | Regime::Nonlinear => SynthTruth {
            intercepts: vec![base.clone(); k],
            slopes: vec![global_slopes; k],
        },
    }
}

fn nonlinear_signal(x: &[f64], t: usize) -> f64 {
    let c: Vec<f64> = x.iter().zip(FEATURE_MEANS).map(|(v, m)| v - m).collect();
    match t {
        0 => 2.0 * (6.0 * c[1]).sin() + 8.0 * c[2] * c[3],
        1 => 3.0 * (c[0] * 8.0).tanh() - 12.0 * c[2] * c[2],
        _ => 2.0 * (5.0 * c[3]).cos() + 6.0 * c[1] * c[2],
    }
}

/// Inverse CDF of N(loc, scale²) truncated to [0, 1].
fn truncated_quantile(u: f64, loc: f64, scale: f64) -> f64 {
    let n = Normal::standard();
    let a = n.cdf(-loc / scale);
    let b = n.cdf((1.0 - loc) / scale);
    let p = (a + u * (b - a)).clamp(1e-300, 1.0 - 1e-16);
    (loc + scale * n.inverse_cdf(p)).clamp(0.0, 1.0)
}

/// Draws an ESG-like dataset. Scores follow truncated normals on [0, 1]
/// coupled through a Gaussian copula; log targets are the regime's signal
/// plus correlated Gaussian noise.
pub fn synth_dataset(seed: u64, rows: usize, regime: Regime) -> Result<Dataset> {
    if rows < MIN_ROWS {
        return Err(DivError::InvalidInput(format!("synthetic datasets need at least {MIN_ROWS} rows, got {rows}")));
    }
    let truth = synth_truth(regime);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u32 = SECTORS.iter().map(|s| s.1).sum();
    let n_std = Normal::standard();
    let load = FACTOR_LOADING;
    let idio = (1.0 - load * load).sqrt();
    // z_ESG is the normalized sum of the three pillar scores
    let sum_sd = (3.0 + 6.0 * load * load).sqrt();
    let mut features = Vec::with_capacity(rows);
    let mut targets = Vec::with_capacity(rows);
    let mut sector = Vec::with_capacity(rows);
    for _ in 0..rows {
        let draw = rng.random_range(0..total);
        let mut acc = 0;
        let s = SECTORS
            .iter()
            .position(|(_, f)| {
                acc += f;
                draw < acc
            })
            .unwrap_or(0);
        let f: f64 = StandardNormal.sample(&mut rng);
        let z: Vec<f64> = (0..3)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                load * f + idio * e
            })
            .collect();
        let z_esg = z.iter().sum::<f64>() / sum_sd;
        let zs = [z_esg, z[0], z[1], z[2]];
        let x: Vec<f64> = zs
            .iter()
            .zip(LATENT)
            .map(|(z, (loc, sc))| truncated_quantile(n_std.cdf(*z), loc, sc))
            .collect();
        let common: f64 = StandardNormal.sample(&mut rng);
        let rho = NOISE_CORRELATION.sqrt();
        let y: Vec<f64> = (0..TARGET_NAMES.len())
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let noise = LOG_NOISE_SD * (rho * common + (1.0 - NOISE_CORRELATION).sqrt() * e);
                let mut signal = truth.intercepts[s][t];
                for (k, xv) in x.iter().enumerate() {
                    signal += truth.slopes[s][k][t] * (xv - FEATURE_MEANS[k]);
                }
                if regime == Regime::Nonlinear {
                    signal += nonlinear_signal(&x, t);
                }
                (signal + noise).exp()
            })
            .collect();
        features.push(x);
        targets.push(y);
        sector.push(s);
    }
    Dataset::new(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        TARGET_NAMES.iter().map(|s| s.to_string()).collect(),
        SECTORS.iter().map(|s| s.0.to_string()).collect(),
        features,
        targets,
        sector,
        seed,
    )
}

/// Noise-free variant: targets are exp(signal) exactly.
pub fn synth_dataset_noiseless(seed: u64, rows: usize, regime: Regime) -> Result<Dataset> {
    let mut ds = synth_dataset(seed, rows, regime)?;
    let truth = synth_truth(regime);
    for i in 0..ds.rows() {
        let s = ds.sector[i];
        for t in 0..ds.n_targets() {
            let x = &ds.features[i];
            let mut signal = truth.intercepts[s][t];
            for (k, xv) in x.iter().enumerate() {
                signal += truth.slopes[s][k][t] * (xv - FEATURE_MEANS[k]);
            }
            if regime == Regime::Nonlinear {
                signal += nonlinear_signal(x, t);
            }
            ds.targets[i][t] = signal.exp();
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_quantile_endpoints() {
        let (loc, sc) = LATENT[1];
        assert!(truncated_quantile(0.0, loc, sc) >= 0.0);
        assert!(truncated_quantile(1.0, loc, sc) <= 1.0);
        assert!(truncated_quantile(0.3, loc, sc) < truncated_quantile(0.6, loc, sc));
    }

    #[test]
    fn shapes_and_split() {
        let ds = synth_dataset(1, 500, Regime::SectorLinear).unwrap();
        assert_eq!(ds.rows(), 500);
        assert!(ds.features.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(ds.targets.iter().flatten().all(|v| *v > 0.0));
        let (tr, te) = ds.split();
        assert_eq!(tr.rows(), 400);
        assert_eq!(te.rows(), 100);
        assert!(synth_dataset(1, 199, Regime::SectorLinear).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = synth_dataset(4, 200, Regime::Nonlinear).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let back = Dataset::read_csv(&buf[..], &names(&FEATURE_NAMES), &names(&TARGET_NAMES), "sector", 4).unwrap();
        assert_eq!(back.features, ds.features);
        assert_eq!(back.targets, ds.targets);
        // sorted label order matches the declared one
        assert_eq!(back.sector, ds.sector);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let text = "a,y,sector\n0.1,2.0,A\nabc,1.0,B\n";
        let err = Dataset::read_csv(text.as_bytes(), &["a".into()], &["y".into()], "sector", 0).unwrap_err();
        assert!(matches!(err, DivError::Csv { row: 3, .. }), "{err:?}");
    }
}
