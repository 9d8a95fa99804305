//! Linear whitening maps `S(X) = W·X` with `Wᵀ W = Σ⁻¹`, and divergences
//! evaluated after whitening each argument with its own map.
//!
//! Two map selectors are provided. Cholesky takes `W = Lᵀ` where `L` is the
//! lower Cholesky factor of `Σ⁻¹`. ZCA-cor takes `W = P^{-1/2} V^{-1/2}` with
//! `V` the diagonal of variances and `P` the correlation matrix. Both are
//! stable under positive diagonal rescaling of the input, so a divergence of
//! whitened arguments is scale invariant. Points are not centered.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{energy_sq, energy_sq_location_gradient, EnergyOrder};
use crate::error::{DivError, Result};
use crate::fourier::{fourier_metric, FourierOrder, QuadratureSpec};
use crate::report::DivergenceReport;
use crate::sample::WeightedSampleSet;
use crate::transport::{wasserstein_1d, wasserstein_lp, DEFAULT_MAX_SUPPORT};

/// Relative floor applied to eigenvalues before taking inverse square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhiteningMethod {
    Cholesky,
    ZcaCor,
}

impl std::str::FromStr for WhiteningMethod {
    type Err = DivError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" | "chol" => Ok(Self::Cholesky),
            "zca-cor" | "zcacor" | "zca_cor" => Ok(Self::ZcaCor),
            other => Err(DivError::InvalidInput(format!("unknown whitening method '{other}'"))),
        }
    }
}

/// An n×n whitening matrix with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningMap {
    pub dim: usize,
    /// Row-major entries of W.
    pub entries: Vec<f64>,
    pub method: WhiteningMethod,
    pub source_fingerprint: u64,
    pub ridge: f64,
    /// λ_max/λ_min of the (regularized) covariance.
    pub condition_number: f64,
    /// False once a ridge was added: the Q-cancellation is then inexact.
    pub scale_stable: bool,
}

impl WhiteningMap {
    pub fn from_matrix(w: &DMatrix<f64>, method: WhiteningMethod) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(DivError::InvalidInput("whitening matrix must be square".into()));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(DivError::Numerical("non-finite whitening matrix".into()));
        }
        let n = w.nrows();
        Ok(Self {
            dim: n,
            entries: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| w[(i, j)]).collect(),
            method,
            source_fingerprint: 0,
            ridge: 0.0,
            condition_number: f64::NAN,
            scale_stable: true,
        })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Transforms every point by W; weights are unchanged.
    pub fn apply(&self, mu: &WeightedSampleSet) -> Result<WeightedSampleSet> {
        mu.check_dim(self.dim)?;
        mu.map_points(|p| self.apply_point(p))
    }

    /// ‖W Σ Wᵀ − I‖_max for a covariance Σ.
    pub fn residual(&self, sigma: &DMatrix<f64>) -> f64 {
        let w = self.matrix();
        let m = &w * sigma * w.transpose() - DMatrix::identity(self.dim, self.dim);
        m.amax()
    }
}

fn symmetric_power(m: &DMatrix<f64>, power: f64) -> (DMatrix<f64>, f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let floor = EIGEN_FLOOR * lmax;
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| l.max(floor).powf(power)),
    );
    let u = &eig.eigenvectors;
    let mut r = u * DMatrix::from_diagonal(&d) * u.transpose();
    // exact symmetry
    let n = r.nrows();
    for a in 0..n {
        for b in (a + 1)..n {
            let v = 0.5 * (r[(a, b)] + r[(b, a)]);
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    (r, lmax, lmin)
}

/// Whitening map fitted on μ's covariance (optionally regularized by
/// `ridge · mean(diag Σ) · I`).
pub fn fit_whitening(
    mu: &WeightedSampleSet,
    method: WhiteningMethod,
    ridge: f64,
) -> Result<WhiteningMap> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(DivError::InvalidInput(format!("ridge must be nonnegative, got {ridge}")));
    }
    let cov = mu.covariance();
    let n = mu.dim();
    let mut sigma = cov.matrix.clone();
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(DivError::Numerical("non-finite covariance".into()));
    }
    if ridge > 0.0 {
        let shift = ridge * sigma.trace() / n as f64;
        for k in 0..n {
            sigma[(k, k)] += shift;
        }
    } else if cov.degenerate {
        return Err(DivError::DegenerateCovariance(format!(
            "minimum eigenvalue {:e} against trace {:e}; a positive ridge would regularize it",
            cov.min_eigenvalue,
            cov.matrix.trace()
        )));
    }
    let eig = sigma.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    if !(lmin > 0.0) {
        return Err(DivError::DegenerateCovariance(format!(
            "covariance is not positive definite (minimum eigenvalue {lmin:e})"
        )));
    }

    let w = match method {
        WhiteningMethod::Cholesky => {
            let inv = sigma
                .clone()
                .cholesky()
                .ok_or_else(|| DivError::DegenerateCovariance("Cholesky factorization failed".into()))?
                .inverse();
            let inv = (&inv + inv.transpose()) * 0.5;
            let l = inv
                .cholesky()
                .ok_or_else(|| DivError::DegenerateCovariance("Σ⁻¹ is not positive definite".into()))?
                .l();
            l.transpose()
        }
        WhiteningMethod::ZcaCor => {
            let v_inv_sqrt: Vec<f64> = (0..n).map(|k| 1.0 / sigma[(k, k)].sqrt()).collect();
            let mut p = sigma.clone();
            for a in 0..n {
                for b in 0..n {
                    p[(a, b)] = sigma[(a, b)] * v_inv_sqrt[a] * v_inv_sqrt[b];
                }
                p[(a, a)] = 1.0;
            }
            let (p_inv_sqrt, _, _) = symmetric_power(&p, -0.5);
            p_inv_sqrt * DMatrix::from_diagonal(&DVector::from_vec(v_inv_sqrt))
        }
    };
    let mut map = WhiteningMap::from_matrix(&w, method)?;
    map.source_fingerprint = mu.fingerprint();
    map.ridge = ridge;
    map.condition_number = lmax / lmin;
    map.scale_stable = ridge == 0.0;
    Ok(map)
}

/// Fits and applies in one step.
pub fn whiten(mu: &WeightedSampleSet, method: WhiteningMethod, ridge: f64) -> Result<(WhiteningMap, WeightedSampleSet)> {
    let map = fit_whitening(mu, method, ridge)?;
    let white = map.apply(mu)?;
    Ok((map, white))
}

/// Maximum pointwise deviation between S(μ) and S(Qμ).
pub fn check_scale_stability(method: WhiteningMethod, mu: &WeightedSampleSet, q: &[f64]) -> Result<f64> {
    if q.iter().any(|x| !(*x > 0.0)) {
        return Err(DivError::InvalidInput("Q must be a positive diagonal".into()));
    }
    let (_, a) = whiten(mu, method, 0.0)?;
    let (_, b) = whiten(&mu.scaled_diag(q)?, method, 0.0)?;
    Ok(a
        .coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Which divergence to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceSelector {
    Energy { order: EnergyOrder, moment_tol: f64 },
    Fourier { order: FourierOrder, quad: QuadratureSpec, moment_tol: f64 },
    Wasserstein { p: f64 },
}

/// Evaluates a divergence directly on (μ, ν).
pub fn evaluate(div: &DivergenceSelector, mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<DivergenceReport> {
    match div {
        DivergenceSelector::Energy { order, moment_tol } => energy_sq(mu, nu, *order, *moment_tol),
        DivergenceSelector::Fourier { order, quad, moment_tol } => {
            fourier_metric(mu, nu, order, quad, *moment_tol)
        }
        DivergenceSelector::Wasserstein { p } => {
            if mu.dim() == 1 {
                wasserstein_1d(mu, nu, *p)
            } else {
                wasserstein_lp(mu, nu, *p, DEFAULT_MAX_SUPPORT).map(|(r, _)| r)
            }
        }
    }
}

/// D(S_μ(μ), S_ν(ν)) with a map fitted on each argument separately.
pub fn whitened_divergence(
    div: &DivergenceSelector,
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    method: WhiteningMethod,
) -> Result<DivergenceReport> {
    mu.check_dim(nu.dim())?;
    let (map_mu, white_mu) = whiten(mu, method, 0.0)?;
    let (map_nu, white_nu) = whiten(nu, method, 0.0)?;
    let mut report = evaluate(div, &white_mu, &white_nu)?;
    report.note("whitening", serde_json::to_value(method)?);
    report.note("condition_mu", map_mu.condition_number);
    report.note("condition_nu", map_nu.condition_number);
    Ok(report)
}

/// D(S(μ), S(ν)) with one map fitted on `frame` and applied to both.
pub fn common_frame_divergence(
    div: &DivergenceSelector,
    frame: &WeightedSampleSet,
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    method: WhiteningMethod,
) -> Result<DivergenceReport> {
    let map = fit_whitening(frame, method, 0.0)?;
    let mut report = evaluate(div, &map.apply(mu)?, &map.apply(nu)?)?;
    report.note("whitening", serde_json::to_value(method)?);
    report.note("frame", "common");
    report.note("condition_frame", map.condition_number);
    Ok(report)
}

/// Gradient in θ of `energy_sq(S(μ), S(ν + θ))`, maps refreshed per θ.
///
/// The covariance of ν + θ does not depend on θ, so `S(ν + θ) = W_ν ν + W_ν θ`
/// and the chain rule gives `W_νᵀ ∇E` evaluated at shift `W_ν θ`.
pub fn whitened_energy_location_gradient(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    theta: &[f64],
    order: EnergyOrder,
    method: WhiteningMethod,
) -> Result<Vec<f64>> {
    let (_, white_mu) = whiten(mu, method, 0.0)?;
    let map_nu = fit_whitening(&nu.translated(theta)?, method, 0.0)?;
    let white_nu = map_nu.apply(nu)?;
    let shift = map_nu.apply_point(theta);
    let g = energy_sq_location_gradient(&white_mu, &white_nu, &shift, order)?;
    let n = map_nu.dim;
    Ok((0..n)
        .map(|k| (0..n).map(|i| map_nu.entries[i * n + k] * g[i]).sum())
        .collect())
}
