//! Cheap oracle suite shipped with the binary (`divkit selftest`).

use serde::Serialize;

use crate::density::{GridDensity, ReferenceDensity};
use crate::energy::{energy_sq, EnergyOrder, DEFAULT_MOMENT_TOL};
use crate::error::Result;
use crate::fourier::{c_alpha, fourier_metric, FourierOrder, QuadratureSpec};
use crate::infodiv::{fisher_with_error, kl, Density, DensityPair};
use crate::kinetics::{equilibrium_sample, tail_index};
use crate::sample::WeightedSampleSet;
use crate::transport::{wasserstein_1d, wasserstein_lp, DEFAULT_MAX_SUPPORT};
use crate::whitening::{check_scale_stability, fit_whitening, WhiteningMethod};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    /// observed discrepancy
    pub value: f64,
    pub tolerance: f64,
}

fn check(name: &str, value: f64, tolerance: f64) -> SelfCheck {
    SelfCheck { name: name.into(), passed: value <= tolerance, value, tolerance }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<SelfCheck>) -> SelfCheck {
    f().unwrap_or_else(|e| SelfCheck { name: format!("{name}: {e}"), passed: false, value: f64::NAN, tolerance: 0.0 })
}

fn lcg_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
                })
                .collect()
        })
        .collect()
}

/// Runs every check; never panics.
pub fn run() -> Vec<SelfCheck> {
    let mut out = Vec::new();
    let a = 1.0;
    let d0 = || WeightedSampleSet::dirac(&[0.0]);
    let da = || WeightedSampleSet::dirac(&[a]);

    out.push(guarded("energy delta pair", || {
        let e = energy_sq(&d0()?, &da()?, EnergyOrder::euclidean(1.0)?, DEFAULT_MOMENT_TOL)?;
        Ok(check("energy delta pair: E1^2 = 2a", (e.value - 2.0 * a).abs(), 1e-14))
    }));

    out.push(guarded("fourier delta pair", || {
        let r = fourier_metric(&d0()?, &da()?, &FourierOrder::new(2.0, 1)?, &QuadratureSpec::default(), DEFAULT_MOMENT_TOL)?;
        let f2 = r.value * r.value;
        let excess = ((f2 - 2.0 * std::f64::consts::PI * a).abs() - r.error_estimate).max(0.0);
        Ok(check("fourier delta pair: F2^2 = 2 pi a within error estimate", excess, 0.0))
    }));

    out.push(guarded("energy fourier identity", || {
        let r = fourier_metric(&d0()?, &da()?, &FourierOrder::new(2.0, 1)?, &QuadratureSpec::default(), DEFAULT_MOMENT_TOL)?;
        let c = c_alpha(1, 1.0)?;
        Ok(check("energy fourier identity: |c F2^2 - 2a| / 2a", (c * r.value * r.value - 2.0 * a).abs() / (2.0 * a), 1e-3))
    }));

    out.push(guarded("transport", || {
        let mu = WeightedSampleSet::new(lcg_points(12, 1, 1), None)?;
        let nu = WeightedSampleSet::new(lcg_points(9, 1, 2), None)?;
        let q = wasserstein_1d(&mu, &nu, 1.0)?.value;
        let (lp, plan) = wasserstein_lp(&mu, &nu, 1.0, DEFAULT_MAX_SUPPORT)?;
        let gap = (q - lp.value).abs().max(plan.marginal_residual(&mu, &nu));
        Ok(check("transport: quantile W1 = simplex W1", gap, 1e-10))
    }));

    out.push(guarded("whitening", || {
        let pts: Vec<Vec<f64>> = lcg_points(200, 3, 3)
            .into_iter()
            .map(|p| vec![p[0], 0.5 * p[0] + p[1], 2.0 * p[2] - p[1]])
            .collect();
        let mu = WeightedSampleSet::new(pts, None)?;
        let sigma = mu.covariance().matrix;
        let mut worst: f64 = 0.0;
        for m in [WhiteningMethod::Cholesky, WhiteningMethod::ZcaCor] {
            worst = worst.max(fit_whitening(&mu, m, 0.0)?.residual(&sigma));
        }
        Ok(check("whitening: |W Sigma W^T - I|", worst, 1e-8))
    }));

    out.push(guarded("scale stability", || {
        let mu = WeightedSampleSet::new(lcg_points(100, 2, 4), None)?;
        let mut worst: f64 = 0.0;
        for m in [WhiteningMethod::Cholesky, WhiteningMethod::ZcaCor] {
            worst = worst.max(check_scale_stability(m, &mu, &[3.0, 0.02])?);
        }
        Ok(check("whitening: scale stability", worst, 1e-9))
    }));

    out.push(guarded("maxwellian fisher", || {
        let t: f64 = 1.5;
        let g = ReferenceDensity::gaussian(vec![0.0, 0.0], t)?.tabulate(vec![-12.0, -12.0], vec![0.1, 0.1], vec![241, 241])?;
        let (i, _) = fisher_with_error(&Density::Grid(g))?;
        Ok(check("maxwellian fisher: I = n/T", (i - 2.0 / t).abs(), 1e-3))
    }));

    out.push(guarded("gaussian kl", || {
        let f = ReferenceDensity::gaussian(vec![0.3], 1.0)?;
        let g = ReferenceDensity::gaussian(vec![0.0], 2.0)?;
        let grid = GridDensity::cube(1, 15.0, 3001, |x| f.pdf(x))?;
        let closed = 0.5 * ((2.0f64).ln() + (1.0 + 0.09) / 2.0 - 1.0);
        let r = kl(&DensityPair::new(grid, g)?)?;
        Ok(check("kl: gaussian closed form", (r.value - closed).abs(), 1e-6))
    }));

    out.push(guarded("inverse gamma tail", || {
        let s = equilibrium_sample(3.0, 20_000)?;
        let h = tail_index(s.coords(), 400)?;
        Ok(check("equilibrium: Hill index near 3", (h - 3.0).abs(), 0.5))
    }));

    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        let checks = super::run();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(checks.len(), 9);
    }
}
