//! Scoreboard: whitened Energy divergence in a common frame, plus RMSE.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::models::rmse;
use crate::energy::{EnergyOrder, DEFAULT_MOMENT_TOL};
use crate::error::{DivError, Result};
use crate::sample::WeightedSampleSet;
use crate::whitening::{common_frame_divergence, DivergenceSelector, WhiteningMethod};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    /// energy_sq in the whitened frame of the true log targets, one per α
    pub energy: Vec<f64>,
    pub rmse: f64,
    /// per energy column, then RMSE
    pub winner: Vec<bool>,
    /// diagnostic only
    pub monotone_in_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub alphas: Vec<f64>,
    pub whitening: WhiteningMethod,
    pub frame: String,
    pub rows: Vec<ScoreRow>,
    /// model names in ascending order, per energy column then RMSE
    pub ranking: Vec<Vec<String>>,
}

/// Log-scale predictions of one model on the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub model: String,
    pub log: Vec<Vec<f64>>,
}

fn check_alpha(alpha: f64) -> Result<EnergyOrder> {
    let order = EnergyOrder::euclidean(alpha)?;
    if alpha >= 2.0 || alpha <= 0.0 {
        return Err(DivError::Inadmissible(format!(
            "benchmark energy orders must lie in (0, 2), got {alpha}"
        )));
    }
    Ok(order)
}

/// Scores each model against the true test targets.
pub fn score_predictions(
    preds: &[Predictions],
    truth_log: &[Vec<f64>],
    alphas: &[f64],
    method: WhiteningMethod,
) -> Result<Scoreboard> {
    if preds.is_empty() || alphas.is_empty() {
        return Err(DivError::InvalidInput("nothing to score".into()));
    }
    let orders: Vec<EnergyOrder> = alphas.iter().map(|&a| check_alpha(a)).collect::<Result<_>>()?;
    let truth = WeightedSampleSet::new(truth_log.to_vec(), None)?;
    let truth_orig: Vec<Vec<f64>> = truth_log.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect();
    let mut rows = Vec::with_capacity(preds.len());
    for p in preds {
        if p.log.len() != truth_log.len() {
            return Err(DivError::DimensionMismatch { expected: truth_log.len(), found: p.log.len() });
        }
        let law = WeightedSampleSet::new(p.log.clone(), None)?;
        let energy: Vec<f64> = orders
            .iter()
            .map(|&order| {
                let sel = DivergenceSelector::Energy { order, moment_tol: DEFAULT_MOMENT_TOL };
                common_frame_divergence(&sel, &truth, &law, &truth, method).map(|r| r.value)
            })
            .collect::<Result<_>>()?;
        let orig: Vec<Vec<f64>> = p.log.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect();
        let monotone_in_alpha = energy.windows(2).all(|w| w[0] <= w[1]) || energy.windows(2).all(|w| w[0] >= w[1]);
        rows.push(ScoreRow {
            model: p.model.clone(),
            energy,
            rmse: rmse(&orig, &truth_orig),
            winner: Vec::new(),
            monotone_in_alpha,
        });
    }
    let columns = alphas.len() + 1;
    let value = |r: &ScoreRow, c: usize| if c < alphas.len() { r.energy[c] } else { r.rmse };
    let mut ranking = Vec::with_capacity(columns);
    for c in 0..columns {
        let best = rows.iter().map(|r| value(r, c)).fold(f64::INFINITY, f64::min);
        for r in rows.iter_mut() {
            let v = value(r, c);
            r.winner.push(v == best);
        }
        let mut order: Vec<&ScoreRow> = rows.iter().collect();
        order.sort_by(|a, b| value(a, c).total_cmp(&value(b, c)).then_with(|| a.model.cmp(&b.model)));
        ranking.push(order.into_iter().map(|r| r.model.clone()).collect());
    }
    Ok(Scoreboard { alphas: alphas.to_vec(), whitening: method, frame: "common".into(), rows, ranking })
}

impl Scoreboard {
    pub fn row(&self, model: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Models winning every energy column.
    pub fn energy_winner(&self) -> Option<&str> {
        self.rows
            .iter()
            .find(|r| r.winner[..self.alphas.len()].iter().all(|w| *w))
            .map(|r| r.model.as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plain-text table, winners marked with `*`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut header = format!("{:<8}", "model");
        for a in &self.alphas {
            header.push_str(&format!("{:>18}", format!("alpha={a}")));
        }
        header.push_str(&format!("{:>18}", "RMSE"));
        out.push_str(header.trim_end());
        out.push('\n');
        for r in &self.rows {
            let mut line = format!("{:<8}", r.model);
            let cells = r.energy.iter().copied().chain(std::iter::once(r.rmse));
            for (v, w) in cells.zip(&r.winner) {
                let cell = format!("{v:.6e}{}", if *w { "*" } else { " " });
                let _ = write!(line, "{cell:>18}");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, json_path: impl AsRef<Path>, table_path: Option<&Path>) -> Result<()> {
        std::fs::write(json_path, self.to_json()?)?;
        if let Some(p) = table_path {
            std::fs::write(p, self.to_table())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> Vec<Vec<f64>> {
        (0..40).map(|i| vec![(i as f64 * 0.37).sin() * 2.0 + 10.0, (i as f64 * 0.11).cos() + 0.1 * i as f64]).collect()
    }

    #[test]
    fn perfect_predictor_scores_zero() {
        let t = truth();
        let preds = vec![
            Predictions { model: "PERFECT".into(), log: t.clone() },
            Predictions { model: "MEAN".into(), log: vec![vec![10.0, 2.0]; t.len()] },
        ];
        let sb = score_predictions(&preds, &t, &DEFAULT_ALPHAS, WhiteningMethod::ZcaCor).unwrap();
        let p = sb.row("PERFECT").unwrap();
        assert!(p.energy.iter().all(|e| e.abs() < 1e-12), "{:?}", p.energy);
        assert!(p.rmse == 0.0);
        assert!(p.winner.iter().all(|w| *w));
        assert_eq!(sb.energy_winner(), Some("PERFECT"));
        assert_eq!(sb.ranking[0][0], "PERFECT");
    }

    #[test]
    fn table_shape_and_json_round_trip() {
        let t = truth();
        let preds: Vec<Predictions> = ["LIN", "LINS", "NNET", "NNETS"]
            .iter()
            .enumerate()
            .map(|(k, m)| Predictions {
                model: m.to_string(),
                log: t.iter().map(|r| vec![r[0] + 0.1 * k as f64 * r[1], r[1] * (1.0 + 0.05 * k as f64)]).collect(),
            })
            .collect();
        let sb = score_predictions(&preds, &t, &DEFAULT_ALPHAS, WhiteningMethod::Cholesky).unwrap();
        let table = sb.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        for l in &lines[1..] {
            assert_eq!(l.split_whitespace().count(), 5);
        }
        assert_eq!(Scoreboard::from_json(&sb.to_json().unwrap()).unwrap(), sb);
        for c in 0..4 {
            let flagged: Vec<&ScoreRow> = sb.rows.iter().filter(|r| r.winner[c]).collect();
            assert!(!flagged.is_empty());
            let v = |r: &ScoreRow| if c < 3 { r.energy[c] } else { r.rmse };
            let min = sb.rows.iter().map(v).fold(f64::INFINITY, f64::min);
            assert!(flagged.iter().all(|r| v(r) == min));
        }
    }

    #[test]
    fn rejects_inadmissible_alpha() {
        let t = truth();
        let preds = vec![Predictions { model: "A".into(), log: t.clone() }];
        assert!(score_predictions(&preds, &t, &[2.5], WhiteningMethod::ZcaCor).is_err());
    }
}
