//! Generalized Energy distances, the Cramér distance and Gini-family
//! functionals.
//!
//! The squared Energy distance of order α is
//!
//! ```text
//! E_α²(μ, ν) = sign(α) · ∬ ‖x − y‖^α d(μ−ν)(x) d(μ−ν)(y)
//! ```
//!
//! with `sign = (−1)^{⌊α/2⌋+1}` for α > 0 and `+1` for α < 0. For α ∈ (0, 2)
//! this is the classical `2E‖X−Y‖^α − E‖X−X'‖^α − E‖Y−Y'‖^α`.

use serde::{Deserialize, Serialize};

use crate::error::{DivError, Result};
use crate::numeric::{is_even_integer, NeumaierSum};
use crate::report::{DivergenceReport, Family};
use crate::sample::{
    pairwise_power_sum, require_matching_moments, self_power_sum, Norm, WeightedSampleSet,
    MAX_MOMENT_ORDER,
};
use crate::whitening::{fit_whitening, WhiteningMap, WhiteningMethod};

/// Negative values of this relative size are rounding noise and are clamped.
pub const CLAMP_WINDOW: f64 = 1e-10;

/// Default tolerance for moment matching when α > 2.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-9;

/// A validated Energy-distance order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOrder {
    alpha: f64,
    norm: Norm,
}

impl EnergyOrder {
    pub fn new(alpha: f64, norm: Norm) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(DivError::Inadmissible(format!("alpha = {alpha}")));
        }
        if is_even_integer(alpha) && alpha >= 0.0 {
            return Err(DivError::Inadmissible(format!(
                "alpha = {alpha} is an even integer: the kernel only sees finitely many moments"
            )));
        }
        if norm == Norm::L1 && alpha != 1.0 {
            return Err(DivError::Inadmissible(
                "the l1 variant is only defined for alpha = 1".into(),
            ));
        }
        if alpha > 2.0 * MAX_MOMENT_ORDER as f64 {
            return Err(DivError::Inadmissible(format!(
                "alpha = {alpha} needs moments beyond order {MAX_MOMENT_ORDER}"
            )));
        }
        Ok(Self { alpha, norm })
    }

    pub fn euclidean(alpha: f64) -> Result<Self> {
        Self::new(alpha, Norm::Euclidean)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// ⌊α/2⌋.
    pub fn k(&self) -> i64 {
        (self.alpha / 2.0).floor() as i64
    }

    /// Sign that makes the double integral nonnegative.
    pub fn sign(&self) -> f64 {
        // negative orders: |x|^α is a positive definite kernel
        if self.alpha < 0.0 || (self.k() + 1) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Number of leading moments μ and ν must share for finiteness.
    pub fn required_matching(&self) -> usize {
        if self.alpha > 2.0 {
            self.k() as usize
        } else {
            0
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.alpha <= -(dim as f64) {
            return Err(DivError::Inadmissible(format!(
                "alpha = {} must exceed -dim = -{dim}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Squared generalized Energy distance between two empirical measures.
///
/// For α < 0 the self-interaction sums skip the diagonal (the kernel is
/// infinite there) and coincident cross pairs are rejected.
pub fn energy_sq(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    order: EnergyOrder,
    moment_tol: f64,
) -> Result<DivergenceReport> {
    mu.check_dim(nu.dim())?;
    order.check_dim(mu.dim())?;
    let required = order.required_matching();
    require_matching_moments(mu, nu, required, moment_tol)?;

    let alpha = order.alpha();
    let cross = pairwise_power_sum(mu, nu, alpha, order.norm())?;
    let self_mu = self_power_sum(mu, alpha, order.norm())?;
    let self_nu = self_power_sum(nu, alpha, order.norm())?;
    // s_a + s_b in a fixed order keeps the result symmetric in (mu, nu)
    let (s_lo, s_hi) = if self_mu.total_cmp(&self_nu).is_le() {
        (self_mu, self_nu)
    } else {
        (self_nu, self_mu)
    };
    let mut acc = NeumaierSum::new();
    acc.add(s_lo);
    acc.add(s_hi);
    acc.add(-2.0 * cross);
    let raw = order.sign() * acc.value();

    let scale = 2.0 * cross.abs() + self_mu.abs() + self_nu.abs();
    let rounding = 4.0 * f64::EPSILON * scale;
    let floor = CLAMP_WINDOW * scale.max(1.0);
    let value = if raw >= 0.0 {
        raw
    } else if raw >= -floor {
        0.0
    } else {
        return Err(DivError::Numerical(format!(
            "energy_sq = {raw:e} is negative beyond rounding; the inputs violate the \
             admissibility conditions for alpha = {alpha}"
        )));
    };
    Ok(
        DivergenceReport::new(Family::Energy, alpha, value, rounding)?
            .with("cross", cross)
            .with("self_mu", self_mu)
            .with("self_nu", self_nu)
            .with("sign", order.sign())
            .with("raw", raw)
            .with("required_matching", required as u64)
            .with(
                "norm",
                match order.norm() {
                    Norm::Euclidean => "l2",
                    Norm::L1 => "l1",
                },
            ),
    )
}

/// Gradient in θ of `energy_sq(mu, nu + θ)` (Euclidean norm), with
/// subgradient zero at coincident points.
pub fn energy_sq_location_gradient(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    theta: &[f64],
    order: EnergyOrder,
) -> Result<Vec<f64>> {
    mu.check_dim(nu.dim())?;
    mu.check_dim(theta.len())?;
    if order.norm() != Norm::Euclidean {
        return Err(DivError::InvalidInput(
            "location gradient is implemented for the Euclidean norm".into(),
        ));
    }
    let alpha = order.alpha();
    let dim = mu.dim();
    let mut acc = vec![NeumaierSum::new(); dim];
    let mut z = vec![0.0; dim];
    for (x, w) in mu.points().zip(mu.weights()) {
        for (y, v) in nu.points().zip(nu.weights()) {
            let mut sq = 0.0;
            for k in 0..dim {
                z[k] = x[k] - y[k] - theta[k];
                sq += z[k] * z[k];
            }
            if sq == 0.0 {
                continue;
            }
            let factor = w * v * sq.powf(0.5 * alpha - 1.0);
            for k in 0..dim {
                acc[k].add(factor * z[k]);
            }
        }
    }
    let c = 2.0 * alpha * order.sign();
    Ok(acc.iter().map(|s| c * s.value()).collect())
}

fn require_1d(mu: &WeightedSampleSet, what: &str) -> Result<()> {
    if mu.dim() != 1 {
        return Err(DivError::InvalidInput(format!(
            "{what} is defined for one-dimensional samples, got dimension {}",
            mu.dim()
        )));
    }
    Ok(())
}

/// Atoms of a 1-D set sorted by position.
fn sorted_atoms(mu: &WeightedSampleSet) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = mu
        .coords()
        .iter()
        .copied()
        .zip(mu.weights().iter().copied())
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

/// ∫ (F_μ − F_ν)² dx over the merged breakpoints of two step CDFs.
pub fn cdf_l2_squared(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<f64> {
    require_1d(mu, "the CDF distance")?;
    require_1d(nu, "the CDF distance")?;
    let a = sorted_atoms(mu);
    let b = sorted_atoms(nu);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (NeumaierSum::new(), NeumaierSum::new());
    let mut acc = NeumaierSum::new();
    let mut prev: Option<f64> = None;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if let Some(x0) = prev {
            let d = fa.value() - fb.value();
            acc.add(d * d * (x - x0));
        }
        while i < a.len() && a[i].0 == x {
            fa.add(a[i].1);
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb.add(b[j].1);
            j += 1;
        }
        prev = Some(x);
    }
    Ok(acc.value())
}

/// Σ_i Σ_j w_i v_j |x_i − y_j| for 1-D sets via sorting and prefix sums.
fn mean_abs_difference_sorted(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    // For each y_j: Σ_i w_i |x_i − y_j| = y_j(W_< − W_>) − (S_< − S_>)
    let total_w: f64 = a.iter().map(|p| p.1).collect::<NeumaierSum>().value();
    let total_s: f64 = a.iter().map(|p| p.0 * p.1).collect::<NeumaierSum>().value();
    let mut acc = NeumaierSum::new();
    let mut i = 0;
    let mut w_lo = NeumaierSum::new();
    let mut s_lo = NeumaierSum::new();
    for &(y, v) in b {
        while i < a.len() && a[i].0 <= y {
            w_lo.add(a[i].1);
            s_lo.add(a[i].0 * a[i].1);
            i += 1;
        }
        let wl = w_lo.value();
        let sl = s_lo.value();
        let term = y * (2.0 * wl - total_w) - (2.0 * sl - total_s);
        acc.add(v * term);
    }
    acc.value()
}

/// Cramér distance `sqrt(∫ (F_μ − F_ν)² dx)` between 1-D measures.
///
/// Diagnostics carry the expectation form `2E|X−Y| − E|X−X'| − E|Y−Y'|`,
/// which equals twice the squared Cramér distance.
pub fn cramer(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<DivergenceReport> {
    require_1d(mu, "the Cramér distance")?;
    require_1d(nu, "the Cramér distance")?;
    let sq = cdf_l2_squared(mu, nu)?;
    let expectation = if mu.len() * nu.len() <= 4_000_000 {
        let order = EnergyOrder::euclidean(1.0)?;
        energy_sq(mu, nu, order, DEFAULT_MOMENT_TOL)?.diagnostic_f64("raw").unwrap_or(0.0)
    } else {
        let a = sorted_atoms(mu);
        let b = sorted_atoms(nu);
        2.0 * mean_abs_difference_sorted(&a, &b)
            - mean_abs_difference_sorted(&a, &a)
            - mean_abs_difference_sorted(&b, &b)
    };
    let value = sq.max(0.0).sqrt();
    let err = 8.0 * f64::EPSILON * (1.0 + value);
    Ok(DivergenceReport::new(Family::Cramer, 1.0, value, err)?
        .with("cdf_l2_squared", sq)
        .with("expectation_form", expectation))
}

/// Squared Energy distance of order 1 in one dimension through the exact
/// identity `E_1² = 2 ∫ (F_μ − F_ν)²`. O((N+M) log(N+M)).
pub fn energy1_via_cdf(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<DivergenceReport> {
    let sq = cdf_l2_squared(mu, nu)?;
    let value = 2.0 * sq.max(0.0);
    DivergenceReport::new(Family::Energy, 1.0, value, 8.0 * f64::EPSILON * (1.0 + value))
        .map(|r| r.with("route", "cdf"))
}

/// Gini Mean Difference ∬ ‖x − y‖ dμ dν.
pub fn gmd(mu: &WeightedSampleSet, nu: &WeightedSampleSet, norm: Norm) -> Result<f64> {
    pairwise_power_sum(mu, nu, 1.0, norm)
}

fn nonzero_mean(mu: &WeightedSampleSet) -> Result<f64> {
    let m = mu.mean()[0];
    if m.abs() <= 1e-12 {
        return Err(DivError::InvalidInput(format!(
            "the Gini index needs a nonzero mean, got {m:e}"
        )));
    }
    Ok(m)
}

/// Gini index GMD(μ, μ) / (2·mean) of a 1-D measure.
pub fn gini_index(mu: &WeightedSampleSet) -> Result<f64> {
    require_1d(mu, "the Gini index")?;
    let m = nonzero_mean(mu)?;
    Ok(gmd(mu, mu, Norm::Euclidean)? / (2.0 * m))
}

/// Mahalanobis Gini index: mean pairwise Mahalanobis distance over twice
/// the Mahalanobis norm of the mean.
pub fn gini_t(mu: &WeightedSampleSet) -> Result<f64> {
    let cov = mu.covariance();
    if cov.degenerate {
        return Err(DivError::DegenerateCovariance(format!(
            "minimum eigenvalue {:e}",
            cov.min_eigenvalue
        )));
    }
    // Σ⁻¹ = W^T W, so (x−y)^T Σ⁻¹ (x−y) = ‖W(x−y)‖².
    let map = fit_whitening(mu, WhiteningMethod::Cholesky, 0.0)?;
    let white = map.apply(mu)?;
    let m_norm = euclid(&map.apply_point(&mu.mean()));
    if m_norm <= 1e-12 {
        return Err(DivError::InvalidInput(
            "zero Mahalanobis norm of the mean".into(),
        ));
    }
    Ok(self_power_sum(&white, 1.0, Norm::Euclidean)? / (2.0 * m_norm))
}

/// ℓ1 Gini index in the frame of a ZCA-cor whitening map.
pub fn gini_l1(mu: &WeightedSampleSet, zca: &WhiteningMap) -> Result<f64> {
    let white = zca.apply(mu)?;
    let m_l1: f64 = zca.apply_point(&mu.mean()).iter().map(|x| x.abs()).sum();
    if m_l1 <= 1e-12 {
        return Err(DivError::InvalidInput(
            "zero l1 norm of the whitened mean".into(),
        ));
    }
    Ok(self_power_sum(&white, 1.0, Norm::L1)? / (2.0 * m_l1))
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Ingredients of `E_1 = 2·GMD(μ,ν) − 2m_μG(μ) − 2m_νG(ν)` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGiniDecomposition {
    pub gmd_cross: f64,
    pub mean_mu: f64,
    pub mean_nu: f64,
    pub gini_mu: f64,
    pub gini_nu: f64,
    pub energy_sq_1: f64,
}

pub fn energy_gini_decomposition(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
) -> Result<EnergyGiniDecomposition> {
    require_1d(mu, "the Gini decomposition")?;
    require_1d(nu, "the Gini decomposition")?;
    let mean_mu = nonzero_mean(mu)?;
    let mean_nu = nonzero_mean(nu)?;
    let gmd_cross = gmd(mu, nu, Norm::Euclidean)?;
    let gini_mu = gini_index(mu)?;
    let gini_nu = gini_index(nu)?;
    let energy_sq_1 = 2.0 * gmd_cross - 2.0 * mean_mu * gini_mu - 2.0 * mean_nu * gini_nu;
    Ok(EnergyGiniDecomposition {
        gmd_cross,
        mean_mu,
        mean_nu,
        gini_mu,
        gini_nu,
        energy_sq_1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> WeightedSampleSet {
        WeightedSampleSet::from_values(values).unwrap()
    }

    fn e(alpha: f64) -> EnergyOrder {
        EnergyOrder::euclidean(alpha).unwrap()
    }

    #[test]
    fn order_validation() {
        assert!(EnergyOrder::euclidean(2.0).is_err());
        assert!(EnergyOrder::euclidean(4.0).is_err());
        assert!(EnergyOrder::euclidean(0.0).is_err());
        assert!(EnergyOrder::new(1.5, Norm::L1).is_err());
        assert!(EnergyOrder::new(1.0, Norm::L1).is_ok());
        assert!(EnergyOrder::euclidean(-2.0).is_ok());
    }

    #[test]
    fn sign_rule() {
        assert_eq!(e(0.5).sign(), -1.0);
        assert_eq!(e(1.5).sign(), -1.0);
        assert_eq!(e(2.5).sign(), 1.0);
        assert_eq!(e(4.5).sign(), -1.0);
        assert_eq!(e(6.5).sign(), 1.0);
        assert_eq!(e(-0.5).sign(), 1.0);
        assert_eq!(e(-2.5).sign(), 1.0);
    }

    #[test]
    fn required_matching_follows_floor_half_alpha() {
        assert_eq!(e(1.0).required_matching(), 0);
        assert_eq!(e(2.5).required_matching(), 1);
        assert_eq!(e(4.5).required_matching(), 2);
        assert_eq!(e(-0.5).required_matching(), 0);
    }

    #[test]
    fn identical_measures_have_zero_energy() {
        let a = set(&[0.3, 1.7, -2.0, 4.0]);
        let r = energy_sq(&a, &a, e(1.0), DEFAULT_MOMENT_TOL).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn dirac_pair_alpha_one() {
        for a in [0.5, 1.0, 2.0, 7.25] {
            let r = energy_sq(
                &WeightedSampleSet::dirac(&[0.0]).unwrap(),
                &WeightedSampleSet::dirac(&[a]).unwrap(),
                e(1.0),
                DEFAULT_MOMENT_TOL,
            )
            .unwrap();
            assert!((r.value - 2.0 * a).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_alpha_matches_naive_double_sum() {
        let a = set(&[0.0, 0.4, 1.1]);
        let b = set(&[2.0, 2.5, 3.3, 4.0]);
        let alpha = -0.5;
        let k = |x: f64, y: f64| (x - y).abs().powf(alpha);
        let mut cross = 0.0;
        for x in a.coords() {
            for y in b.coords() {
                cross += k(*x, *y) / 12.0;
            }
        }
        let self_sum = |s: &WeightedSampleSet| {
            let n = s.len() as f64;
            let mut acc = 0.0;
            for (i, x) in s.coords().iter().enumerate() {
                for (j, y) in s.coords().iter().enumerate() {
                    if i != j {
                        acc += k(*x, *y) / (n * n);
                    }
                }
            }
            acc
        };
        let expected = -(2.0 * cross - self_sum(&a) - self_sum(&b));
        let r = energy_sq(&a, &b, e(alpha), DEFAULT_MOMENT_TOL).unwrap();
        assert!((r.value - expected).abs() < 1e-13, "{} vs {expected}", r.value);
    }

    #[test]
    fn higher_order_requires_matching_means() {
        let a = set(&[0.0, 1.0]);
        let b = set(&[0.5, 1.5]);
        let err = energy_sq(&a, &b, e(2.5), 1e-9).unwrap_err();
        assert!(matches!(err, DivError::MomentMismatch { order: 1, .. }));
        let c = set(&[-1.0, 2.0]);
        assert!(energy_sq(&a, &c, e(2.5), 1e-9).is_ok());
    }

    #[test]
    fn alpha_below_minus_dim_is_rejected() {
        let a = set(&[0.0, 1.0]);
        let b = set(&[3.0, 4.0]);
        assert!(energy_sq(&a, &b, e(-1.5), 1e-9).is_err());
    }

    #[test]
    fn cramer_simple_cases() {
        let d0 = WeightedSampleSet::dirac(&[0.0]).unwrap();
        let d1 = WeightedSampleSet::dirac(&[1.0]).unwrap();
        assert_eq!(cramer(&d0, &d0).unwrap().value, 0.0);
        let r = cramer(&d0, &d1).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!((r.diagnostic_f64("expectation_form").unwrap() - 2.0).abs() < 1e-15);
        let two_d = WeightedSampleSet::dirac(&[0.0, 0.0]).unwrap();
        assert!(cramer(&two_d, &two_d).is_err());
    }

    #[test]
    fn sorted_mean_abs_difference_matches_double_loop() {
        let a = sorted_atoms(&set(&[0.1, -3.0, 2.2, 2.2, 5.0]));
        let b = sorted_atoms(&set(&[1.0, 0.0, -1.0]));
        let mut naive = 0.0;
        for (x, w) in &a {
            for (y, v) in &b {
                naive += w * v * (x - y).abs();
            }
        }
        assert!((mean_abs_difference_sorted(&a, &b) - naive).abs() < 1e-14);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_index(&WeightedSampleSet::dirac(&[3.0]).unwrap()).unwrap(), 0.0);
        assert!((gini_index(&set(&[0.0, 2.0])).unwrap() - 0.5).abs() < 1e-15);
        // Σ|x_i − x_j| / (2 N² mean) over {1,2,3,4} = 20 / (2·16·2.5) = 1/4
        let direct = {
            let v = [1.0f64, 2.0, 3.0, 4.0];
            let mut s = 0.0;
            for x in v {
                for y in v {
                    s += (x - y).abs();
                }
            }
            s / (2.0 * 16.0 * 2.5)
        };
        assert!((direct - 0.25).abs() < 1e-15);
        assert!((gini_index(&set(&[1.0, 2.0, 3.0, 4.0])).unwrap() - direct).abs() < 1e-15);
        assert!(gini_index(&set(&[-1.0, 1.0])).is_err());
    }

    #[test]
    fn gmd_norms() {
        let a = WeightedSampleSet::dirac(&[0.0, 0.0]).unwrap();
        let b = WeightedSampleSet::dirac(&[3.0, 4.0]).unwrap();
        assert_eq!(gmd(&a, &a, Norm::Euclidean).unwrap(), 0.0);
        assert_eq!(gmd(&a, &b, Norm::Euclidean).unwrap(), 5.0);
        assert_eq!(gmd(&a, &b, Norm::L1).unwrap(), 7.0);
    }

    #[test]
    fn gini_t_reduces_to_gini_index_in_1d() {
        let s = set(&[0.5, 1.0, 2.5, 3.0, 7.0]);
        let g = gini_index(&s).unwrap();
        assert!((gini_t(&s).unwrap() - g).abs() < 1e-12);
        assert!(matches!(
            gini_t(&WeightedSampleSet::dirac(&[2.0, 1.0]).unwrap()),
            Err(DivError::DegenerateCovariance(_))
        ));
    }

    #[test]
    fn gini_l1_reduces_to_gini_index_for_white_1d_data() {
        // {0, 2} uniform: variance 1, so the ZCA-cor map is the identity
        let s = set(&[0.0, 2.0]);
        let zca = fit_whitening(&s, WhiteningMethod::ZcaCor, 0.0).unwrap();
        assert!((gini_l1(&s, &zca).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gini_decomposition_identity() {
        let a = set(&[0.0, 2.0]);
        let b = set(&[1.0, 3.0]);
        let d = energy_gini_decomposition(&a, &b).unwrap();
        let direct = energy_sq(&a, &b, e(1.0), 1e-9).unwrap().value;
        assert!((d.energy_sq_1 - direct).abs() < 1e-12);
        let same = energy_gini_decomposition(&a, &a).unwrap();
        assert!(same.energy_sq_1.abs() < 1e-15);
        assert!((2.0 * same.mean_mu * same.gini_mu - gmd(&a, &a, Norm::Euclidean).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn location_gradient_matches_finite_differences() {
        let mu = WeightedSampleSet::new(
            vec![vec![0.0, 0.1], vec![1.0, -0.3], vec![0.4, 0.9]],
            None,
        )
        .unwrap();
        let nu = WeightedSampleSet::new(vec![vec![2.0, 0.0], vec![1.5, 1.5]], None).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let order = e(alpha);
            let theta = [0.2, -0.1];
            let g = energy_sq_location_gradient(&mu, &nu, &theta, order).unwrap();
            let h = 1e-6;
            for k in 0..2 {
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += h;
                tm[k] -= h;
                let fp = energy_sq(&mu, &nu.translated(&tp).unwrap(), order, 1e-9).unwrap().raw();
                let fm = energy_sq(&mu, &nu.translated(&tm).unwrap(), order, 1e-9).unwrap().raw();
                let fd = (fp - fm) / (2.0 * h);
                assert!((g[k] - fd).abs() < 1e-6, "alpha={alpha} k={k}: {} vs {fd}", g[k]);
            }
        }
    }

    trait Raw {
        fn raw(&self) -> f64;
    }
    impl Raw for DivergenceReport {
        fn raw(&self) -> f64 {
            self.diagnostic_f64("raw").unwrap()
        }
    }
}
