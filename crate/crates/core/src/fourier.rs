//! Characteristic functions and the Fourier-based metric
//!
//! ```text
//! F_s(μ, ν)² = ∫ |μ̂(ξ) − ν̂(ξ)|² / |ξ|^s dξ
//! ```
//!
//! evaluated by quadrature on the signed measure σ = μ − ν. The radial
//! direction uses composite Gauss-Legendre panels (8 nodes for the value, 6
//! on the same panels for the discretization estimate) plus a power-law model
//! on the innermost cell. Angular integrals are exact in 1-D, trapezoidal on
//! the half circle in 2-D, Gauss-Legendre in cos θ times trapezoidal in φ in
//! 3-D, and randomized quasi-Monte Carlo above that.
//!
//! `error_estimate` of the returned report bounds `|F² − value²|`: the
//! squared metric is what the tail, near-zero and discretization terms
//! control.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{DivError, Result};
use crate::numeric::{compensated_sum, gauss_legendre, is_even_integer, sphere_surface, NeumaierSum};
use crate::report::{DivergenceReport, Family};
use crate::sample::{matched_moment_order, require_matching_moments, WeightedSampleSet, MAX_MOMENT_ORDER};

/// μ̂(ξ) = Σ_j w_j exp(−i⟨x_j, ξ⟩).
pub fn char_fn(mu: &WeightedSampleSet, xi: &[f64]) -> Result<Complex64> {
    mu.check_dim(xi.len())?;
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(DivError::InvalidInput("non-finite frequency".into()));
    }
    let (mut re, mut im) = (NeumaierSum::new(), NeumaierSum::new());
    for (x, w) in mu.points().zip(mu.weights()) {
        let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        re.add(w * c);
        im.add(-w * s);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Number of leading moment orders that must agree for `F_s` to be finite
/// near the origin in dimension `n`.
///
/// With h = (s − n)/2 this is ⌊h⌋ when h is not an integer and h − 1 when it
/// is; 0 whenever s < n + 2.
pub fn required_matching_order(s: f64, n: usize) -> usize {
    let h = (s - n as f64) / 2.0;
    if h <= 0.0 {
        0
    } else if h.fract() == 0.0 {
        (h as usize).saturating_sub(1)
    } else {
        h.floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierOrder {
    pub s: f64,
    pub dim: usize,
    pub required_matching: usize,
}

impl FourierOrder {
    pub fn new(s: f64, dim: usize) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(DivError::Inadmissible(format!("s must be positive, got {s}")));
        }
        if dim == 0 {
            return Err(DivError::InvalidInput("dimension must be positive".into()));
        }
        Ok(Self {
            s,
            dim,
            required_matching: required_matching_order(s, dim),
        })
    }
}

/// Constant with `E_α² = c_alpha(n, α) · F_{n+α}²`:
/// `|2^α π^{−n/2} Γ((n+α)/2) / Γ(−α/2)|`.
///
/// For α ∈ (0, 2) this is `α 2^{α−1} π^{−n/2} Γ((n+α)/2) / Γ(1 − α/2)`.
pub fn c_alpha(n: usize, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= -(n as f64) {
        return Err(DivError::Inadmissible(format!("alpha = {alpha} must exceed -n = -{n}")));
    }
    if alpha >= 0.0 && is_even_integer(alpha) {
        return Err(DivError::Inadmissible(format!("alpha = {alpha} is an even integer")));
    }
    let nf = n as f64;
    let c = 2f64.powf(alpha) * std::f64::consts::PI.powf(-nf / 2.0) * gamma((nf + alpha) / 2.0)
        / gamma(-alpha / 2.0);
    Ok(c.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    /// Radial panels times an angular product rule (n ≤ 3).
    RadialSphereProduct,
    /// Randomized rank-1 lattice with 16 shifts (any n).
    RandomizedQmc,
}

/// Discretization parameters of [`fourier_metric`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// R_max; `None` selects it from a pilot estimate and the tail bound.
    pub truncation_radius: Option<f64>,
    /// r_min; 0 integrates the innermost cell with a power-law model.
    pub inner_cutoff: f64,
    /// Minimum number of uniform radial panels on [0, R_max].
    pub radial_points: usize,
    /// Minimum angular resolution for n ≥ 2.
    pub angular_points: usize,
    /// `None` picks the product rule for n ≤ 3 and QMC above.
    pub scheme: Option<QuadratureScheme>,
    /// Lattice points per randomization (QMC only).
    pub qmc_points: usize,
    pub seed: u64,
    /// Both measures convolved with N(0, h² I): characteristic functions
    /// are multiplied by exp(−h²|ξ|²/2).
    pub gaussian_smoothing: f64,
    /// Cap on (quadrature nodes) × (atoms) when R_max is chosen automatically.
    pub work_budget: f64,
    /// Automatic R_max aims at a tail bound below this fraction of F².
    pub tail_fraction: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            truncation_radius: None,
            inner_cutoff: 0.0,
            radial_points: 64,
            angular_points: 32,
            scheme: None,
            qmc_points: 4096,
            seed: 0,
            gaussian_smoothing: 0.0,
            work_budget: 4e8,
            tail_fraction: 5e-4,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.truncation_radius {
            if !(r > self.inner_cutoff) || !r.is_finite() {
                return Err(DivError::InvalidInput(format!(
                    "truncation radius {r} must exceed the inner cutoff {}",
                    self.inner_cutoff
                )));
            }
        }
        if !(self.inner_cutoff >= 0.0) {
            return Err(DivError::InvalidInput("inner cutoff must be nonnegative".into()));
        }
        if self.radial_points < 16 || self.angular_points < 16 {
            return Err(DivError::InvalidInput("radial and angular point counts must be at least 16".into()));
        }
        if !(self.gaussian_smoothing >= 0.0) || !(self.work_budget > 0.0) || !(self.tail_fraction > 0.0) {
            return Err(DivError::InvalidInput("smoothing, budget and tail fraction must be positive".into()));
        }
        if self.qmc_points < 16 {
            return Err(DivError::InvalidInput("qmc_points must be at least 16".into()));
        }
        Ok(())
    }

    /// Same spec with R_max and the radial resolution doubled.
    pub fn refined(&self, r_max: f64) -> Self {
        Self {
            truncation_radius: Some(2.0 * r_max),
            radial_points: 2 * self.radial_points,
            ..self.clone()
        }
    }
}

/// σ = μ − ν with coincident atoms merged.
#[derive(Debug, Clone)]
struct SignedMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl SignedMeasure {
    fn difference(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Self {
        let dim = mu.dim();
        let mut atoms: Vec<(&[f64], f64)> = mu
            .points()
            .zip(mu.weights().iter().copied())
            .chain(nu.points().zip(nu.weights().iter().map(|w| -w)))
            .collect();
        atoms.sort_by(|a, b| {
            for (x, y) in a.0.iter().zip(b.0) {
                let o = x.total_cmp(y);
                if o.is_ne() {
                    return o;
                }
            }
            a.1.abs().total_cmp(&b.1.abs())
        });
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut i = 0;
        while i < atoms.len() {
            let mut j = i;
            // positive and negative parts summed separately keep σ(ν,μ) = −σ(μ,ν) exact
            let (mut pos, mut neg) = (0.0, 0.0);
            while j < atoms.len() && atoms[j].0 == atoms[i].0 {
                if atoms[j].1 >= 0.0 {
                    pos += atoms[j].1;
                } else {
                    neg += -atoms[j].1;
                }
                j += 1;
            }
            let w = pos - neg;
            if w != 0.0 {
                coords.extend_from_slice(atoms[i].0);
                weights.push(w);
            }
            i = j;
        }
        Self { dim, coords, weights }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// |σ̂(ξ)|².
    #[inline]
    fn sq_modulus(&self, xi: &[f64]) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        if self.dim == 1 {
            let t = xi[0];
            for (x, w) in self.coords.iter().zip(&self.weights) {
                let (s, c) = (x * t).sin_cos();
                re += w * c;
                im += w * s;
            }
        } else {
            for (k, w) in self.weights.iter().enumerate() {
                let p = &self.coords[k * self.dim..(k + 1) * self.dim];
                let phase: f64 = p.iter().zip(xi).map(|(a, b)| a * b).sum();
                let (s, c) = phase.sin_cos();
                re += w * c;
                im += w * s;
            }
        }
        re * re + im * im
    }

    /// Bounding-box diagonal.
    fn diameter(&self) -> f64 {
        let mut d2 = 0.0;
        for k in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..self.len() {
                let v = self.coords[i * self.dim + k];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            d2 += (hi - lo) * (hi - lo);
        }
        d2.sqrt()
    }

    fn abs_mass(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    fn sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Angular resolution needed to resolve modes up to `r·d` on a circle.
fn circle_points(rd: f64, minimum: usize) -> usize {
    minimum.max((rd + 2.0 * rd.cbrt() + 12.0).ceil() as usize)
}

struct Integrator<'a> {
    sigma: &'a SignedMeasure,
    dim: usize,
    s: f64,
    h: f64,
    diam: f64,
    angular_points: usize,
}

/// Radial sample: the angular integral G(r) and max |σ̂| on the shell.
#[derive(Clone, Copy)]
struct Shell {
    g: f64,
    max_sq: f64,
    nodes: usize,
}

impl<'a> Integrator<'a> {
    fn new(sigma: &'a SignedMeasure, s: f64, h: f64, angular_points: usize) -> Self {
        let diam = sigma.diameter().max(1e-300);
        Self {
            sigma,
            dim: sigma.dim,
            s,
            h,
            diam,
            angular_points,
        }
    }

    fn angular_count(&self, r: f64) -> usize {
        let rd = r * self.diam;
        match self.dim {
            1 => 1,
            2 => circle_points(0.5 * rd, self.angular_points),
            _ => {
                let nu = self.u_points(rd);
                let (u, _) = gauss_legendre(nu);
                u.iter()
                    .map(|x| {
                        let ui = 0.5 * (x + 1.0);
                        circle_points(rd * (1.0 - ui * ui).sqrt(), self.angular_points)
                    })
                    .sum()
            }
        }
    }

    fn u_points(&self, rd: f64) -> usize {
        (self.angular_points / 2).max((0.5 * rd + 2.0 * rd.cbrt() + 8.0).ceil() as usize)
    }

    fn shell(&self, r: f64) -> Shell {
        match self.dim {
            1 => {
                let v = self.sigma.sq_modulus(&[r]);
                Shell { g: 2.0 * v, max_sq: v, nodes: 1 }
            }
            2 => {
                let m = circle_points(0.5 * r * self.diam, self.angular_points);
                let step = std::f64::consts::PI / m as f64;
                let mut acc = 0.0;
                let mut max_sq: f64 = 0.0;
                for k in 0..m {
                    let (sn, cs) = (k as f64 * step).sin_cos();
                    let v = self.sigma.sq_modulus(&[r * cs, r * sn]);
                    acc += v;
                    max_sq = max_sq.max(v);
                }
                Shell { g: 2.0 * step * acc, max_sq, nodes: m }
            }
            3 => {
                let rd = r * self.diam;
                let nu = self.u_points(rd);
                let (un, uw) = gauss_legendre(nu);
                let mut acc = 0.0;
                let mut max_sq: f64 = 0.0;
                let mut nodes = 0;
                for (x, w) in un.iter().zip(&uw) {
                    let u = 0.5 * (x + 1.0);
                    let rho = (1.0 - u * u).sqrt();
                    let m = circle_points(rd * rho, self.angular_points);
                    let step = 2.0 * std::f64::consts::PI / m as f64;
                    let mut ring = 0.0;
                    for k in 0..m {
                        let (sn, cs) = (k as f64 * step).sin_cos();
                        let v = self.sigma.sq_modulus(&[r * rho * cs, r * rho * sn, r * u]);
                        ring += v;
                        max_sq = max_sq.max(v);
                    }
                    acc += 0.5 * w * step * ring;
                    nodes += m;
                }
                Shell { g: 2.0 * acc, max_sq, nodes }
            }
            _ => unreachable!("product rule used only for n ≤ 3"),
        }
    }

    /// Radial weight r^{n−1−s}·exp(−h² r²).
    fn radial_factor(&self, r: f64) -> f64 {
        let mut f = r.powf(self.dim as f64 - 1.0 - self.s);
        if self.h > 0.0 {
            f *= (-(self.h * r) * (self.h * r)).exp();
        }
        f
    }
}

/// Radial panels on [start, R].
fn radial_panels(r_max: f64, start: f64, diam: f64, radial_points: usize) -> (Vec<(f64, f64)>, f64) {
    let width = (std::f64::consts::PI / diam).min(r_max / radial_points as f64);
    let mut panels = Vec::new();
    let first_uniform = if start >= width {
        start
    } else {
        // geometric panels down to the inner cell
        let r0 = if start > 0.0 { start } else { width / 4096.0 };
        let mut a = r0;
        while a < width * (1.0 - 1e-12) {
            let b = (2.0 * a).min(width);
            panels.push((a, b));
            a = b;
        }
        width
    };
    if r_max > first_uniform {
        let count = ((r_max - first_uniform) / width).ceil().max(1.0) as usize;
        let h = (r_max - first_uniform) / count as f64;
        for k in 0..count {
            let a = first_uniform + k as f64 * h;
            let b = if k + 1 == count { r_max } else { a + h };
            panels.push((a, b));
        }
    }
    let r0 = if start > 0.0 { start } else { width / 4096.0 };
    (panels, r0)
}

struct RadialResult {
    value: f64,
    disc_error: f64,
    near_value: f64,
    near_error: f64,
    sup_grid: f64,
    nodes: usize,
    q_fit: f64,
}

/// Quadrature node count at radius `r_max`, or `None` once it exceeds `limit`.
fn nodes_for(integ: &Integrator, r_max: f64, start: f64, radial_points: usize, limit: f64) -> Option<usize> {
    let width = (std::f64::consts::PI / integ.diam).min(r_max / radial_points as f64);
    // 14 nodes per panel, at least one angular node each
    if 14.0 * ((r_max - start.min(width)) / width).ceil() > limit {
        return None;
    }
    let (panels, _) = radial_panels(r_max, start, integ.diam, radial_points);
    let (x8, _) = gauss_legendre(8);
    let (x6, _) = gauss_legendre(6);
    let mut total = 2usize;
    for (a, b) in panels {
        for x in x8.iter().chain(&x6) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
            total += integ.angular_count(r);
        }
        if total as f64 > limit {
            return None;
        }
    }
    Some(total)
}

fn integrate_radial(integ: &Integrator, r_max: f64, start: f64, radial_points: usize, q_theory: f64) -> RadialResult {
    let (panels, r0) = radial_panels(r_max, start, integ.diam, radial_points);
    let (x8, w8) = gauss_legendre(8);
    let (x6, w6) = gauss_legendre(6);
    let per_panel: Vec<(f64, f64, f64, usize)> = panels
        .par_iter()
        .map(|&(a, b)| {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut sup: f64 = 0.0;
            let mut nodes = 0;
            let mut eval = |x: f64| {
                let r = mid + half * x;
                let sh = integ.shell(r);
                nodes += sh.nodes;
                let damp = if integ.h > 0.0 { (-(integ.h * r) * (integ.h * r)).exp() } else { 1.0 };
                sup = sup.max((sh.max_sq * damp).sqrt() / r.powf(integ.s));
                sh.g * integ.radial_factor(r)
            };
            let i8: f64 = x8.iter().zip(&w8).map(|(x, w)| w * eval(*x)).sum::<f64>() * half;
            let i6: f64 = x6.iter().zip(&w6).map(|(x, w)| w * eval(*x)).sum::<f64>() * half;
            (i8, (i8 - i6).abs(), sup, nodes)
        })
        .collect();
    let value = compensated_sum(&per_panel.iter().map(|p| p.0).collect::<Vec<_>>());
    let disc_error = compensated_sum(&per_panel.iter().map(|p| p.1).collect::<Vec<_>>());
    let sup_grid = per_panel.iter().map(|p| p.2).fold(0.0, f64::max);
    let mut nodes: usize = per_panel.iter().map(|p| p.3).sum();

    let (near_value, near_error, q_fit) = if start > 0.0 {
        // [0, r_min] omitted; bound it by the theoretical power-law model
        let g0 = integ.shell(start).g * integ.radial_factor(start);
        nodes += 1;
        (0.0, g0 * start / (q_theory + 1.0), f64::NAN)
    } else {
        let g_full = integ.shell(r0).g * integ.radial_factor(r0);
        let g_half = integ.shell(0.5 * r0).g * integ.radial_factor(0.5 * r0);
        nodes += 2;
        let mut q = if g_full > 0.0 && g_half > 0.0 {
            (g_full / g_half).log2()
        } else {
            q_theory
        };
        if !q.is_finite() || q < q_theory {
            q = q_theory;
        }
        let fit = g_full * r0 / (q + 1.0);
        let theory = g_full * r0 / (q_theory + 1.0);
        (fit, (theory - fit).abs(), q)
    };
    RadialResult {
        value: value + near_value,
        disc_error,
        near_value,
        near_error,
        sup_grid,
        nodes,
        q_fit,
    }
}

/// Bound on ∫_{|ξ|>R} |σ̂|² e^{−h²|ξ|²} |ξ|^{−s} dξ and the part carried by the
/// non-oscillating Σσ_p² term.
fn tail_bound(sigma: &SignedMeasure, s: f64, h: f64, r: f64) -> (f64, f64) {
    let n = sigma.dim;
    let nf = n as f64;
    let surf = sphere_surface(n);
    let a0 = sigma.sum_sq();
    let s1 = sigma.abs_mass();
    let mut best = f64::INFINITY;
    let mut mean_part = f64::NAN;
    if s > nf {
        let base = surf * r.powf(nf - s) / (s - nf);
        mean_part = a0 * base;
        let osc = oscillatory_tail(sigma, s, r).unwrap_or((s1 * s1 - a0).max(0.0) * base);
        best = a0 * base + osc;
    }
    if h > 0.0 {
        // r^k e^{−h²r²} ≤ f(R) e^{−c(r−R)} once c = 2h²R − k/R > 0
        let k = nf - 1.0 - s;
        let c = 2.0 * h * h * r - k / r;
        if c > 0.0 {
            let f = r.powf(k) * (-(h * r) * (h * r)).exp();
            best = best.min(s1 * s1 * surf * f / c);
        }
    }
    (best, mean_part)
}

/// Pairwise bound on the oscillating part of the tail (n ≤ 3, s > n).
fn oscillatory_tail(sigma: &SignedMeasure, s: f64, r: f64) -> Option<f64> {
    let k = sigma.len();
    if k > 3000 || sigma.dim > 3 {
        return None;
    }
    let n = sigma.dim as f64;
    let surf = sphere_surface(sigma.dim);
    let crude = surf * r.powf(n - s) / (s - n);
    let mut acc = NeumaierSum::new();
    for p in 0..k {
        for q in (p + 1)..k {
            let d = crate::sample::squared_distance(sigma.point(p), sigma.point(q)).sqrt();
            let ww = 2.0 * (sigma.weights[p] * sigma.weights[q]).abs();
            let refined = match sigma.dim {
                1 => 2.0 * 2.0 * r.powf(-s) / d,
                2 => {
                    2.0 * std::f64::consts::PI * (2.0 / (std::f64::consts::PI * d)).sqrt() * r.powf(1.5 - s)
                        / (s - 1.5)
                }
                _ => 4.0 * std::f64::consts::PI * 2.0 * r.powf(1.0 - s) / (d * d),
            };
            acc.add(ww * refined.min(crude));
        }
    }
    Some(acc.value())
}

/// F_s(μ, ν) by quadrature.
pub fn fourier_metric(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    order: &FourierOrder,
    quad: &QuadratureSpec,
    moment_tol: f64,
) -> Result<DivergenceReport> {
    mu.check_dim(nu.dim())?;
    mu.check_dim(order.dim)?;
    quad.validate()?;
    let n = order.dim;
    let s = order.s;
    require_matching_moments(mu, nu, order.required_matching, moment_tol)?;
    let (matched, _) = matched_moment_order(mu, nu, MAX_MOMENT_ORDER, moment_tol)?;
    let base = |value: f64, err: f64| -> Result<DivergenceReport> {
        Ok(DivergenceReport::new(Family::Fourier, s, value, err)?
            .with("required_matching", order.required_matching as u64)
            .with("matched_moment_order", matched as u64)
            .with("admissible", true)
            .with("error_estimate_applies_to", "value_squared"))
    };

    let sigma = SignedMeasure::difference(mu, nu);
    if sigma.len() == 0 {
        return base(0.0, 0.0).map(|r| r.with("value_squared", 0.0));
    }
    if s >= n as f64 + 2.0 * matched as f64 + 2.0 {
        return Err(DivError::Inadmissible(format!(
            "s = {s} needs moments matched beyond order {matched} in dimension {n} \
             (finite only for s < n + 2·{matched} + 2)"
        )));
    }
    let h = quad.gaussian_smoothing;
    if s <= n as f64 && h == 0.0 {
        return Err(DivError::Inadmissible(format!(
            "s = {s} ≤ n = {n}: the integral diverges at infinity for atomic measures; \
             use Gaussian smoothing"
        )));
    }
    // exponent of the integrand r^{n−1−s} G(r) near the origin
    let q_theory = 2.0 * (matched as f64 + 1.0) + n as f64 - 1.0 - s;

    let scheme = quad.scheme.unwrap_or(if n <= 3 {
        QuadratureScheme::RadialSphereProduct
    } else {
        QuadratureScheme::RandomizedQmc
    });
    if scheme == QuadratureScheme::RadialSphereProduct && n > 3 {
        return Err(DivError::InvalidInput("the product rule supports n ≤ 3".into()));
    }

    let integ = Integrator::new(&sigma, s, h, quad.angular_points);
    let atoms = sigma.len() as f64;
    let work = |r: f64| -> f64 {
        match scheme {
            QuadratureScheme::RadialSphereProduct => {
                nodes_for(&integ, r, quad.inner_cutoff, quad.radial_points, quad.work_budget / atoms)
                    .map_or(f64::INFINITY, |k| k as f64 * atoms)
            }
            QuadratureScheme::RandomizedQmc => (16 * quad.qmc_points) as f64 * atoms,
        }
    };
    let evaluate = |r: f64| -> Result<(f64, f64, RadialResult)> {
        match scheme {
            QuadratureScheme::RadialSphereProduct => {
                let rr = integrate_radial(&integ, r, quad.inner_cutoff, quad.radial_points, q_theory);
                Ok((rr.value, rr.disc_error + rr.near_error, rr))
            }
            QuadratureScheme::RandomizedQmc => {
                let beta = n as f64 - s + 2.0 * (matched as f64 + 1.0);
                let (v, se, nodes) = qmc_integral(&sigma, s, h, r, beta, quad.qmc_points, quad.seed);
                Ok((
                    v,
                    3.0 * se,
                    RadialResult {
                        value: v,
                        disc_error: 3.0 * se,
                        near_value: 0.0,
                        near_error: 0.0,
                        sup_grid: f64::NAN,
                        nodes,
                        q_fit: f64::NAN,
                    },
                ))
            }
        }
    };

    let mut budget_limited = false;
    let mut pilot_value = f64::NAN;
    let r_max = match quad.truncation_radius {
        Some(r) => r,
        None => {
            let width = std::f64::consts::PI / integ.diam;
            let mut r_pilot = 32.0 * width;
            if h > 0.0 {
                r_pilot = r_pilot.min(6.0 / h);
            }
            let (pv, _, _) = evaluate(r_pilot)?;
            pilot_value = pv;
            let target = quad.tail_fraction * pv.max(f64::MIN_POSITIVE);
            let mut r = r_pilot;
            let mut iter = 0;
            while tail_bound(&sigma, s, h, r).0 > target && iter < 200 {
                r *= 2.0;
                iter += 1;
            }
            // tighten
            let (mut lo, mut hi) = (r / 2.0, r);
            if tail_bound(&sigma, s, h, lo).0 <= target {
                hi = lo;
            } else {
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if tail_bound(&sigma, s, h, mid).0 <= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            let mut r = hi.max(r_pilot);
            if work(r) > quad.work_budget {
                budget_limited = true;
                let (mut lo, mut hi) = (r_pilot.min(r), r);
                if work(lo) > quad.work_budget {
                    r = lo;
                } else {
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        if work(mid) <= quad.work_budget {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    r = lo;
                }
            }
            r
        }
    };

    let (value_sq_raw, quad_err, detail) = evaluate(r_max)?;
    let (tail, tail_mean) = tail_bound(&sigma, s, h, r_max);
    let value_sq = value_sq_raw.max(0.0);
    let rounding = 16.0 * f64::EPSILON * value_sq.abs() * (1.0 + atoms.log2());
    let err = quad_err + tail + rounding;
    let mut report = base(value_sq.sqrt(), err)?
        .with("value_squared", value_sq)
        .with("truncation_radius", r_max)
        .with("tail_bound", tail)
        .with("discretization_error", detail.disc_error)
        .with("near_zero_error", detail.near_error)
        .with("near_zero_value", detail.near_value)
        .with("nodes", detail.nodes as u64)
        .with("atoms", sigma.len() as u64)
        .with("budget_limited", budget_limited)
        .with(
            "scheme",
            match scheme {
                QuadratureScheme::RadialSphereProduct => "radial_sphere_product",
                QuadratureScheme::RandomizedQmc => "randomized_qmc",
            },
        );
    if tail_mean.is_finite() {
        report.note("tail_mean_correction", tail_mean);
    }
    if detail.sup_grid.is_finite() {
        report.note("sup_grid_max", detail.sup_grid);
    }
    if detail.q_fit.is_finite() {
        report.note("near_zero_exponent", detail.q_fit);
    }
    if pilot_value.is_finite() {
        report.note("pilot_value_squared", pilot_value);
    }
    if h > 0.0 {
        report.note("gaussian_smoothing", h);
    }
    Ok(report)
}

/// Randomized lattice estimate of ∫_{|ξ|≤R} |σ̂|² e^{−h²|ξ|²} |ξ|^{−s} dξ.
///
/// Radii are drawn as r = R t^{1/β} so that the integrand is bounded near the
/// origin; directions come from normal quantiles of the lattice coordinates.
fn qmc_integral(
    sigma: &SignedMeasure,
    s: f64,
    h: f64,
    r_max: f64,
    beta: f64,
    points: usize,
    seed: u64,
) -> (f64, f64, usize) {
    const REPLICAS: usize = 16;
    let n = sigma.dim;
    let surf = sphere_surface(n);
    let primes = [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0, 59.0, 61.0, 67.0, 71.0, 73.0, 79.0];
    let gen: Vec<f64> = (0..=n).map(|k| primes[k % primes.len()].sqrt().fract() + (k / primes.len()) as f64 * 0.1).collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let estimates: Vec<f64> = (0..REPLICAS)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let shift: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
            let mut acc = NeumaierSum::new();
            let mut xi = vec![0.0; n];
            for i in 0..points {
                let mut norm2 = 0.0;
                for k in 0..n {
                    let u = (shift[k] + (i as f64 + 1.0) * gen[k]).fract().clamp(1e-12, 1.0 - 1e-12);
                    xi[k] = normal.inverse_cdf(u);
                    norm2 += xi[k] * xi[k];
                }
                let t = (shift[n] + (i as f64 + 1.0) * gen[n]).fract().max(1e-300);
                let r = r_max * t.powf(1.0 / beta);
                let scale = r / norm2.sqrt();
                for x in xi.iter_mut() {
                    *x *= scale;
                }
                let mut f = sigma.sq_modulus(&xi) * r.powf(n as f64 - s - beta);
                if h > 0.0 {
                    f *= (-(h * r) * (h * r)).exp();
                }
                acc.add(f);
            }
            surf * r_max.powf(beta) / beta * acc.value() / points as f64
        })
        .collect();
    let mean = compensated_sum(&estimates) / REPLICAS as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (REPLICAS as f64 - 1.0);
    (mean, (var / REPLICAS as f64).sqrt(), REPLICAS * points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dirac(x: f64) -> WeightedSampleSet {
        WeightedSampleSet::dirac(&[x]).unwrap()
    }

    #[test]
    fn char_fn_examples() {
        let mu = WeightedSampleSet::from_values(&[0.3, -1.2, 4.0]).unwrap();
        let z = char_fn(&mu, &[0.0]).unwrap();
        assert_eq!(z, Complex64::new(1.0, 0.0));
        let a = 0.7;
        let z = char_fn(&dirac(a), &[2.0]).unwrap();
        let expect = Complex64::new(0.0, -a * 2.0).exp();
        assert!((z - expect).norm() < 1e-15);
        let pair = WeightedSampleSet::from_values(&[-1.0, 1.0]).unwrap();
        assert!(char_fn(&pair, &[PI / 2.0]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn required_matching_cases() {
        assert_eq!(required_matching_order(2.0, 1), 0);
        assert_eq!(required_matching_order(3.0, 1), 0);
        assert_eq!(required_matching_order(4.0, 1), 1);
        assert_eq!(required_matching_order(6.0, 2), 1);
        assert_eq!(required_matching_order(7.0, 2), 2);
        assert_eq!(required_matching_order(0.5, 3), 0);
    }

    #[test]
    fn c_alpha_values() {
        assert!((c_alpha(1, 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((c_alpha(2, 1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        for n in 1..4 {
            for alpha in [-0.5, 0.5, 1.5, 2.5, 3.3] {
                assert!(c_alpha(n, alpha).unwrap() > 0.0);
            }
        }
        assert!(c_alpha(1, 2.0).is_err());
        assert!(c_alpha(1, -1.0).is_err());
        // α ∈ (0,2) closed form
        let (n, a) = (3usize, 0.7f64);
        let alt = a * 2f64.powf(a - 1.0) * PI.powf(-1.5) * gamma((n as f64 + a) / 2.0) / gamma(1.0 - a / 2.0);
        assert!((c_alpha(n, a).unwrap() - alt).abs() < 1e-14 * alt);
    }

    #[test]
    fn identical_measures_give_zero() {
        let mu = WeightedSampleSet::from_values(&[0.0, 1.0, 5.0]).unwrap();
        let r = fourier_metric(&mu, &mu, &FourierOrder::new(2.0, 1).unwrap(), &QuadratureSpec::default(), 1e-9).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn dirac_pair_matches_closed_form() {
        for a in [0.5, 1.0, 2.0] {
            let r = fourier_metric(&dirac(0.0), &dirac(a), &FourierOrder::new(2.0, 1).unwrap(), &QuadratureSpec::default(), 1e-9)
                .unwrap();
            let sq = r.diagnostic_f64("value_squared").unwrap();
            assert!((sq - 2.0 * PI * a).abs() <= r.error_estimate, "a={a}: {sq} vs {}", 2.0 * PI * a);
            assert!(r.error_estimate / (2.0 * PI * a) < 1e-3);
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let mu = WeightedSampleSet::from_values(&[0.0, 0.3, 1.0]).unwrap();
        let nu = WeightedSampleSet::from_values(&[0.5, 2.0]).unwrap();
        let o = FourierOrder::new(2.0, 1).unwrap();
        let q = QuadratureSpec::default();
        let a = fourier_metric(&mu, &nu, &o, &q, 1e-9).unwrap();
        let b = fourier_metric(&nu, &mu, &o, &q, 1e-9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn mismatched_means_rejected_when_required() {
        let o = FourierOrder::new(4.0, 1).unwrap();
        let err = fourier_metric(&dirac(0.0), &dirac(1.0), &o, &QuadratureSpec::default(), 1e-9).unwrap_err();
        assert!(matches!(err, DivError::MomentMismatch { order: 1, .. }));
        // s = n + 2 needs matched means too
        let o = FourierOrder::new(3.0, 1).unwrap();
        assert!(matches!(
            fourier_metric(&dirac(0.0), &dirac(1.0), &o, &QuadratureSpec::default(), 1e-9),
            Err(DivError::Inadmissible(_))
        ));
    }

    #[test]
    fn spec_validation() {
        let q = QuadratureSpec { radial_points: 8, ..Default::default() };
        assert!(q.validate().is_err());
        let q = QuadratureSpec { truncation_radius: Some(0.0), ..Default::default() };
        assert!(q.validate().is_err());
    }
}
