//! Tabulated and analytic probability densities.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{DivError, Result};
use crate::numeric::NeumaierSum;

/// Tolerance on the trapezoidal mass of a normalized grid.
pub const MASS_TOL: f64 = 1e-6;

/// On-disk grid format: values are row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// A density tabulated on a regular rectangular grid in 1 to 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridDensity {
    /// Validates and renormalizes to unit trapezoidal mass.
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut g = Self::raw(origin, spacing, shape, values)?;
        let mass = g.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(DivError::NotNormalized { mass });
        }
        for v in g.values.iter_mut() {
            *v /= mass;
        }
        Ok(g)
    }

    /// Validated grid without renormalization.
    pub fn raw(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let dim = shape.len();
        if !(1..=3).contains(&dim) {
            return Err(DivError::InvalidInput(format!("grids must be 1-D to 3-D, got {dim}-D")));
        }
        if origin.len() != dim || spacing.len() != dim {
            return Err(DivError::DimensionMismatch {
                expected: dim,
                found: origin.len().min(spacing.len()),
            });
        }
        if spacing.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(DivError::InvalidInput("grid spacing must be positive and finite".into()));
        }
        if shape.iter().any(|&s| s < 3) {
            return Err(DivError::InvalidInput("every grid axis needs at least 3 nodes".into()));
        }
        let count: usize = shape.iter().product();
        if values.len() != count {
            return Err(DivError::InvalidInput(format!(
                "grid of shape {shape:?} needs {count} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DivError::InvalidInput("grid values must be finite and nonnegative".into()));
        }
        Ok(Self { origin, spacing, shape, values })
    }

    /// Tabulates `f` on the grid and normalizes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, f: F) -> Result<Self> {
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut x = vec![0.0; shape.len()];
        for flat in 0..count {
            coordinate(&origin, &spacing, &shape, flat, &mut x);
            values.push(f(&x));
        }
        Self::new(origin, spacing, shape, values)
    }

    /// Symmetric cube [−half_width, half_width]^dim with `nodes` per axis.
    pub fn cube<F: Fn(&[f64]) -> f64>(dim: usize, half_width: f64, nodes: usize, f: F) -> Result<Self> {
        let h = 2.0 * half_width / (nodes - 1) as f64;
        Self::from_fn(vec![-half_width; dim], vec![h; dim], vec![nodes; dim], f)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.shape == other.shape && self.origin == other.origin && self.spacing == other.spacing
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize, out: &mut [f64]) {
        coordinate(&self.origin, &self.spacing, &self.shape, flat, out);
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rest = flat;
        for k in (0..self.dim()).rev() {
            idx[k] = rest % self.shape[k];
            rest /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    /// Trapezoidal weight of a node.
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let idx = self.multi_index(flat);
        idx.iter()
            .enumerate()
            .map(|(k, &i)| {
                let h = self.spacing[k];
                if i == 0 || i + 1 == self.shape[k] {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }

    /// Trapezoidal integral of `g(node, value)` over the whole grid.
    pub fn integrate<F: Fn(&[f64], f64) -> f64>(&self, g: F) -> f64 {
        let mut acc = NeumaierSum::new();
        let mut x = vec![0.0; self.dim()];
        for flat in 0..self.len() {
            self.node(flat, &mut x);
            acc.add(self.trapezoid_weight(flat) * g(&x, self.values[flat]));
        }
        acc.value()
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_, v| v)
    }

    /// Mean vector ∫ v f.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.integrate(|x, v| x[k] * v)).collect()
    }

    /// Temperature T = (1/n) ∫ |v − u|² f.
    pub fn temperature(&self) -> f64 {
        let u = self.mean();
        self.integrate(|x, v| x.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * v)
            / self.dim() as f64
    }

    /// Every other node along each axis (spacing doubled), not renormalized.
    pub fn coarsened(&self) -> Result<Self> {
        let shape: Vec<usize> = self.shape.iter().map(|s| (s - 1) / 2 + 1).collect();
        let spacing: Vec<f64> = self.spacing.iter().map(|h| 2.0 * h).collect();
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut rest;
        for flat in 0..count {
            let mut idx = vec![0; shape.len()];
            rest = flat;
            for k in (0..shape.len()).rev() {
                idx[k] = 2 * (rest % shape[k]);
                rest /= shape[k];
            }
            values.push(self.values[self.flat_index(&idx)]);
        }
        Self::raw(self.origin.clone(), spacing, shape, values)
    }

    pub fn to_file(&self) -> GridFile {
        GridFile {
            origin: self.origin.clone(),
            spacing: self.spacing.clone(),
            shape: self.shape.clone(),
            values: self.values.clone(),
        }
    }

    pub fn from_file(file: GridFile) -> Result<Self> {
        let g = Self::raw(file.origin, file.spacing, file.shape, file.values)?;
        let mass = g.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            // accepted and renormalized, like sample weights
            return Self::new(g.origin, g.spacing, g.shape, g.values);
        }
        Ok(g)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }
}

fn coordinate(origin: &[f64], spacing: &[f64], shape: &[usize], flat: usize, out: &mut [f64]) {
    let mut rest = flat;
    for k in (0..shape.len()).rev() {
        let i = rest % shape[k];
        rest /= shape[k];
        out[k] = origin[k] + i as f64 * spacing[k];
    }
}

/// Analytic reference densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceDensity {
    /// Maxwellian with unit mass, mean `mean` and per-axis variance `temperature`.
    Gaussian { mean: Vec<f64>, temperature: f64 },
    /// Inverse-Gamma law on w > 0 with shape μ and scale μ − 1 (mean 1).
    InverseGamma { mu: f64 },
}

impl ReferenceDensity {
    pub fn gaussian(mean: Vec<f64>, temperature: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(DivError::InvalidInput("dimension must be positive".into()));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(DivError::InvalidInput(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self::Gaussian { mean, temperature })
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::Gaussian {
            mean: vec![0.0; dim],
            temperature: 1.0,
        }
    }

    pub fn inverse_gamma(mu: f64) -> Result<Self> {
        if !(mu > 1.0) || !mu.is_finite() {
            return Err(DivError::InvalidInput(format!("the inverse-Gamma index must exceed 1, got {mu}")));
        }
        Ok(Self::InverseGamma { mu })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::InverseGamma { .. } => 1,
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { mean, temperature } => {
                let n = mean.len() as f64;
                let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * n * (2.0 * std::f64::consts::PI * temperature).ln() - r2 / (2.0 * temperature)
            }
            Self::InverseGamma { mu } => {
                let w = x[0];
                if w <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let beta = mu - 1.0;
                mu * beta.ln() - ln_gamma(*mu) - beta / w - (1.0 + mu) * w.ln()
            }
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// ∇ log f.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, temperature } => x.iter().zip(mean).map(|(a, b)| -(a - b) / temperature).collect(),
            Self::InverseGamma { mu } => {
                let w = x[0];
                vec![(mu - 1.0) / (w * w) - (1.0 + mu) / w]
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, .. } => mean.clone(),
            Self::InverseGamma { .. } => vec![1.0],
        }
    }

    /// −∫ f log f in closed form.
    pub fn entropy(&self) -> f64 {
        match self {
            Self::Gaussian { mean, temperature } => {
                0.5 * mean.len() as f64 * (1.0 + (2.0 * std::f64::consts::PI * temperature).ln())
            }
            Self::InverseGamma { mu } => mu + (mu - 1.0).ln() + ln_gamma(*mu) - (1.0 + mu) * digamma(*mu),
        }
    }

    /// ∫ |∇f|²/f in closed form.
    pub fn fisher(&self) -> f64 {
        match self {
            Self::Gaussian { mean, temperature } => mean.len() as f64 / temperature,
            Self::InverseGamma { mu } => {
                // E[(β/w² − (1+μ)/w)²] with E[w^{−k}] = Γ(μ+k)/(Γ(μ) β^k)
                let beta = mu - 1.0;
                let inv = |k: f64| (ln_gamma(mu + k) - ln_gamma(*mu) - k * beta.ln()).exp();
                beta * beta * inv(4.0) - 2.0 * beta * (1.0 + mu) * inv(3.0) + (1.0 + mu) * (1.0 + mu) * inv(2.0)
            }
        }
    }

    /// P(W > w) for the inverse-Gamma law.
    pub fn survival(&self, w: f64) -> Result<f64> {
        match self {
            Self::InverseGamma { mu } => {
                if w <= 0.0 {
                    return Ok(1.0);
                }
                let g = Gamma::new(*mu, mu - 1.0).map_err(|e| DivError::Numerical(e.to_string()))?;
                Ok(g.cdf(1.0 / w))
            }
            Self::Gaussian { .. } => Err(DivError::InvalidInput("survival is defined for the inverse-Gamma law".into())),
        }
    }

    /// Tabulates the density on a grid (normalized by trapezoid).
    pub fn tabulate(&self, origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>) -> Result<GridDensity> {
        if shape.len() != self.dim() {
            return Err(DivError::DimensionMismatch {
                expected: self.dim(),
                found: shape.len(),
            });
        }
        GridDensity::from_fn(origin, spacing, shape, |x| self.pdf(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_normalization_and_moments() {
        let g = GridDensity::cube(1, 8.0, 801, |x| 3.0 * (-(x[0] - 0.5) * (x[0] - 0.5) / 2.0).exp()).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!((g.mean()[0] - 0.5).abs() < 1e-8);
        assert!((g.temperature() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_validation() {
        assert!(GridDensity::new(vec![0.0], vec![0.0], vec![3], vec![1.0; 3]).is_err());
        assert!(GridDensity::new(vec![0.0], vec![1.0], vec![3], vec![1.0; 2]).is_err());
        assert!(GridDensity::new(vec![0.0], vec![1.0], vec![3], vec![0.0; 3]).is_err());
        assert!(GridDensity::new(vec![0.0; 4], vec![1.0; 4], vec![3; 4], vec![1.0; 81]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = GridDensity::from_fn(vec![0.0; 3], vec![1.0; 3], vec![5, 6, 7], |_| 1.0).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        let c = g.coarsened().unwrap();
        assert_eq!(c.shape(), &[3, 3, 4]);
    }

    #[test]
    fn json_round_trip() {
        let g = GridDensity::cube(2, 3.0, 11, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        g.save_json(&p).unwrap();
        let back = GridDensity::load_json(&p).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn inverse_gamma_closed_forms() {
        let f = ReferenceDensity::inverse_gamma(3.0).unwrap();
        assert!(ReferenceDensity::inverse_gamma(1.0).is_err());
        // survival at large w behaves like c·w^{−μ}
        let s1 = f.survival(10.0).unwrap();
        let s2 = f.survival(20.0).unwrap();
        let slope = (s2 / s1).ln() / 2f64.ln();
        assert!((slope + 3.0).abs() < 0.3);
        // entropy and Fisher information against fine quadrature in u = ln w
        let (mut h, mut i, mut mass) = (0.0, 0.0, 0.0);
        let n = 200_000;
        let (a, b) = (-8.0f64, 14.0f64);
        let du = (b - a) / n as f64;
        for k in 0..=n {
            let u = a + k as f64 * du;
            let w = u.exp();
            let wt = if k == 0 || k == n { 0.5 } else { 1.0 } * du * w;
            let lp = f.log_pdf(&[w]);
            let p = lp.exp();
            let sc = f.score(&[w])[0];
            mass += wt * p;
            h -= wt * p * lp;
            i += wt * p * sc * sc;
        }
        assert!((mass - 1.0).abs() < 1e-8);
        assert!((h - f.entropy()).abs() < 1e-6, "{h} vs {}", f.entropy());
        assert!((i - f.fisher()).abs() < 1e-5 * f.fisher(), "{i} vs {}", f.fisher());
    }

    #[test]
    fn gaussian_closed_forms() {
        let g = ReferenceDensity::standard_gaussian(1);
        assert!((g.entropy() - 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln())).abs() < 1e-15);
        assert!((ReferenceDensity::gaussian(vec![0.0; 3], 2.0).unwrap().fisher() - 1.5).abs() < 1e-15);
    }
}
