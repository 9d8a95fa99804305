//! Relative entropy, Fisher information and relative Fisher information on
//! grid and reference densities.
//!
//! Grid integrals use the trapezoidal rule. Gradients are central
//! differences on interior nodes; the outermost layer of nodes is dropped
//! from gradient-based integrals. Error estimates are Richardson differences
//! `|I_h − I_{2h}| / 3` against the grid with every other node.

use crate::density::{GridDensity, ReferenceDensity};
use crate::error::{DivError, Result};
use crate::numeric::NeumaierSum;
use crate::report::{DivergenceReport, Family};

/// Floor applied to density values in denominators.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Negative divergences down to this size are quadrature noise and clamped.
pub const CLAMP_WINDOW: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Grid(GridDensity),
    Reference(ReferenceDensity),
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Grid(g) => g.dim(),
            Density::Reference(r) => r.dim(),
        }
    }
}

impl From<GridDensity> for Density {
    fn from(g: GridDensity) -> Self {
        Density::Grid(g)
    }
}

impl From<ReferenceDensity> for Density {
    fn from(r: ReferenceDensity) -> Self {
        Density::Reference(r)
    }
}

/// Two densities resolved onto a common evaluation grid when either is
/// tabulated.
#[derive(Debug, Clone)]
pub struct DensityPair {
    pub f: Density,
    pub g: Density,
    pub common_grid: Option<GridDensity>,
}

impl DensityPair {
    pub fn new(f: impl Into<Density>, g: impl Into<Density>) -> Result<Self> {
        let (f, g) = (f.into(), g.into());
        if f.dim() != g.dim() {
            return Err(DivError::DimensionMismatch {
                expected: f.dim(),
                found: g.dim(),
            });
        }
        let common_grid = match (&f, &g) {
            (Density::Grid(a), Density::Grid(b)) => {
                if !a.same_geometry(b) {
                    return Err(DivError::InvalidInput("grid densities must share one grid".into()));
                }
                Some(a.clone())
            }
            (Density::Grid(a), _) | (_, Density::Grid(a)) => Some(a.clone()),
            _ => None,
        };
        Ok(Self { f, g, common_grid })
    }
}

/// Values of a density on the nodes of `grid`.
fn on_grid(d: &Density, grid: &GridDensity) -> Vec<f64> {
    match d {
        Density::Grid(g) => g.values().to_vec(),
        Density::Reference(r) => {
            let mut x = vec![0.0; grid.dim()];
            (0..grid.len())
                .map(|flat| {
                    grid.node(flat, &mut x);
                    r.pdf(&x)
                })
                .collect()
        }
    }
}

/// Grid with the same geometry and the given values (not renormalized).
fn with_values(grid: &GridDensity, values: Vec<f64>) -> Result<GridDensity> {
    GridDensity::raw(grid.origin().to_vec(), grid.spacing().to_vec(), grid.shape().to_vec(), values)
}

fn check_normalized(g: &GridDensity) -> Result<()> {
    let mass = g.mass();
    if (mass - 1.0).abs() > crate::density::MASS_TOL {
        return Err(DivError::NotNormalized { mass });
    }
    Ok(())
}

/// Error of `fine` from the same rule at twice the spacing, for a rule of
/// order h^`order`.
fn richardson_order(fine: f64, coarse: f64, order: i32) -> f64 {
    (fine - coarse).abs() / (2f64.powi(order) - 1.0) + 64.0 * f64::EPSILON * (1.0 + fine.abs())
}

fn richardson(fine: f64, coarse: f64) -> f64 {
    richardson_order(fine, coarse, 2)
}

fn grid_entropy(g: &GridDensity) -> f64 {
    g.integrate(|_, v| if v > 0.0 { -v * v.ln() } else { 0.0 })
}

/// −∫ f log f with its quadrature error estimate (0 for closed forms).
pub fn entropy_with_error(f: &Density) -> Result<(f64, f64)> {
    match f {
        Density::Reference(r) => Ok((r.entropy(), 0.0)),
        Density::Grid(g) => {
            check_normalized(g)?;
            let fine = grid_entropy(g);
            let coarse = grid_entropy(&g.coarsened()?);
            Ok((fine, richardson(fine, coarse)))
        }
    }
}

pub fn entropy(f: &Density) -> Result<f64> {
    entropy_with_error(f).map(|(v, _)| v)
}

fn grid_kl(f: &GridDensity, g: &[f64]) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for (flat, (&fv, &gv)) in f.values().iter().zip(g).enumerate() {
        if fv <= 0.0 {
            continue;
        }
        if gv <= 0.0 {
            return Err(DivError::SupportViolation(format!(
                "g vanishes at grid node {flat} where f = {fv:e}"
            )));
        }
        acc.add(f.trapezoid_weight(flat) * fv * (fv / gv).ln());
    }
    Ok(acc.value())
}

fn clamp(value: f64, what: &str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_WINDOW {
        Ok(0.0)
    } else {
        Err(DivError::Numerical(format!("{what} = {value:e} is negative beyond quadrature noise")))
    }
}

/// H(f | g) = ∫ f log(f/g).
pub fn kl(pair: &DensityPair) -> Result<DivergenceReport> {
    match &pair.common_grid {
        None => {
            let (f, g) = match (&pair.f, &pair.g) {
                (Density::Reference(f), Density::Reference(g)) => (f, g),
                _ => unreachable!(),
            };
            let v = gaussian_kl(f, g)?;
            DivergenceReport::new(Family::KL, 0.0, clamp(v, "kl")?, 0.0).map(|r| r.with("method", "closed_form"))
        }
        Some(grid) => {
            let fv = on_grid(&pair.f, grid);
            let gv = on_grid(&pair.g, grid);
            let fg = with_values(grid, fv)?;
            check_normalized(&fg)?;
            let fine = grid_kl(&fg, &gv)?;
            let fc = fg.coarsened()?;
            let gc = with_values(grid, gv)?.coarsened()?;
            let coarse = grid_kl(&fc, gc.values())?;
            DivergenceReport::new(Family::KL, 0.0, clamp(fine, "kl")?, richardson(fine, coarse))
                .map(|r| r.with("method", "trapezoid").with("raw", fine))
        }
    }
}

fn gaussian_parts(r: &ReferenceDensity) -> Result<(&[f64], f64)> {
    match r {
        ReferenceDensity::Gaussian { mean, temperature } => Ok((mean, *temperature)),
        _ => Err(DivError::InvalidInput(
            "closed forms cover Gaussian pairs; tabulate other densities on a grid".into(),
        )),
    }
}

fn gaussian_kl(f: &ReferenceDensity, g: &ReferenceDensity) -> Result<f64> {
    let (u1, t1) = gaussian_parts(f)?;
    let (u2, t2) = gaussian_parts(g)?;
    let n = u1.len() as f64;
    let d2: f64 = u1.iter().zip(u2).map(|(a, b)| (a - b) * (a - b)).sum();
    let ratio = t1 / t2;
    Ok(0.5 * n * (ratio - 1.0 - ratio.ln()) + d2 / (2.0 * t2))
}

fn gaussian_relative_fisher(f: &ReferenceDensity, g: &ReferenceDensity) -> Result<f64> {
    let (u1, t1) = gaussian_parts(f)?;
    let (u2, t2) = gaussian_parts(g)?;
    let n = u1.len() as f64;
    let a = 1.0 / t2 - 1.0 / t1;
    let d2: f64 = u1.iter().zip(u2).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(n * a * a * t1 + d2 / (t2 * t2))
}

/// Fourth-order central-difference gradient of the grid values at an
/// interior node.
fn gradient(g: &GridDensity, values: &[f64], idx: &mut [usize], out: &mut [f64]) {
    for k in 0..g.dim() {
        let i = idx[k];
        let mut at = |j: usize| {
            idx[k] = j;
            values[g.flat_index(idx)]
        };
        let (p1, m1, p2, m2) = (at(i + 1), at(i - 1), at(i + 2), at(i - 2));
        idx[k] = i;
        out[k] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * g.spacing()[k]);
    }
}

/// Two boundary layers are dropped so that the five-point stencil fits.
fn is_interior(g: &GridDensity, idx: &[usize]) -> bool {
    idx.iter().zip(g.shape()).all(|(&i, &s)| i >= 2 && i + 3 <= s)
}

/// Trapezoid weight on the interior sub-grid.
fn interior_weight(g: &GridDensity, idx: &[usize]) -> f64 {
    idx.iter()
        .enumerate()
        .map(|(k, &i)| {
            let h = g.spacing()[k];
            if i == 2 || i + 3 == g.shape()[k] {
                0.5 * h
            } else {
                h
            }
        })
        .product()
}

fn check_stencil(g: &GridDensity) -> Result<()> {
    if g.shape().iter().any(|&s| s < 9) {
        return Err(DivError::InvalidInput(format!(
            "Fisher information needs at least 9 nodes per axis, got shape {:?}",
            g.shape()
        )));
    }
    Ok(())
}

/// ∫ |∇f/f − s_g|² f over the interior, with s_g = None meaning 0.
fn grid_fisher_like<S>(g: &GridDensity, mut score_g: S) -> Result<f64>
where
    S: FnMut(usize, &[f64], &[usize]) -> Option<Vec<f64>>,
{
    let dim = g.dim();
    let values = g.values();
    let mut acc = NeumaierSum::new();
    let mut grad = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for flat in 0..g.len() {
        let mut idx = g.multi_index(flat);
        if !is_interior(g, &idx) {
            continue;
        }
        let f = values[flat];
        gradient(g, values, &mut idx, &mut grad);
        g.node(flat, &mut x);
        let f_floor = f.max(DENSITY_FLOOR);
        let term = match score_g(flat, &x, &idx) {
            None => grad.iter().map(|d| d * d).sum::<f64>() / f_floor,
            Some(sg) => {
                if f <= 0.0 {
                    return Err(DivError::SupportViolation(format!("f vanishes at interior node {flat}")));
                }
                grad.iter().zip(&sg).map(|(d, s)| (d / f - s) * (d / f - s)).sum::<f64>() * f
            }
        };
        acc.add(interior_weight(g, &idx) * term);
    }
    Ok(acc.value())
}

fn grid_fisher(g: &GridDensity) -> Result<f64> {
    grid_fisher_like(g, |_, _, _| None)
}

/// ∫ |∇f|²/f with its error estimate (0 for closed forms).
pub fn fisher_with_error(f: &Density) -> Result<(f64, f64)> {
    match f {
        Density::Reference(r) => Ok((r.fisher(), 0.0)),
        Density::Grid(g) => {
            check_normalized(g)?;
            check_stencil(g)?;
            let fine = grid_fisher(g)?;
            let coarse = grid_fisher(&g.coarsened()?)?;
            Ok((fine, richardson_order(fine, coarse, 4)))
        }
    }
}

pub fn fisher(f: &Density) -> Result<f64> {
    fisher_with_error(f).map(|(v, _)| v)
}

fn grid_relative_fisher(f: &GridDensity, g: &Density, g_values: &GridDensity) -> Result<f64> {
    match g {
        Density::Reference(r) => grid_fisher_like(f, |_, x, _| Some(r.score(x))),
        Density::Grid(_) => {
            let gv = g_values.values();
            let mut grad = vec![0.0; f.dim()];
            grid_fisher_like(f, |flat, _, idx| {
                let mut idx = idx.to_vec();
                gradient(g_values, gv, &mut idx, &mut grad);
                let gval = gv[flat].max(DENSITY_FLOOR);
                Some(grad.iter().map(|d| d / gval).collect())
            })
        }
    }
}

/// I(f | g) = ∫ |∇ log f − ∇ log g|² f.
pub fn relative_fisher(pair: &DensityPair) -> Result<DivergenceReport> {
    match &pair.common_grid {
        None => {
            let (f, g) = match (&pair.f, &pair.g) {
                (Density::Reference(f), Density::Reference(g)) => (f, g),
                _ => unreachable!(),
            };
            let v = gaussian_relative_fisher(f, g)?;
            DivergenceReport::new(Family::Fisher, 0.0, clamp(v, "relative Fisher")?, 0.0)
                .map(|r| r.with("method", "closed_form"))
        }
        Some(grid) => {
            let fv = on_grid(&pair.f, grid);
            let gv = on_grid(&pair.g, grid);
            if let Some(k) = fv.iter().chain(&gv).position(|v| !(*v > 0.0)) {
                return Err(DivError::SupportViolation(format!(
                    "relative Fisher information needs strictly positive densities (node {})",
                    k % grid.len()
                )));
            }
            let fg = with_values(grid, fv)?;
            check_normalized(&fg)?;
            check_stencil(&fg)?;
            let gg = with_values(grid, gv)?;
            let fine = grid_relative_fisher(&fg, &pair.g, &gg)?;
            let coarse = grid_relative_fisher(&fg.coarsened()?, &pair.g, &gg.coarsened()?)?;
            DivergenceReport::new(Family::Fisher, 0.0, clamp(fine, "relative Fisher")?, richardson_order(fine, coarse, 4))
                .map(|r| r.with("method", "central_difference_4").with("raw", fine))
        }
    }
}

/// Maxwellian with the grid density's own mean and temperature.
pub fn best_maxwellian(f: &GridDensity) -> Result<ReferenceDensity> {
    ReferenceDensity::gaussian(f.mean(), f.temperature())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_grid(dim: usize, nodes: usize, half: f64, mean: f64, t: f64) -> GridDensity {
        GridDensity::cube(dim, half, nodes, |x| {
            (-x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (2.0 * t)).exp()
        })
        .unwrap()
    }

    #[test]
    fn entropy_examples() {
        let g = Density::Grid(gauss_grid(1, 1201, 10.0, 0.0, 1.0));
        let expected = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        assert!((entropy(&g).unwrap() - expected).abs() < 1e-6);
        let uniform = GridDensity::from_fn(vec![0.0], vec![0.01], vec![101], |_| 1.0).unwrap();
        assert!(entropy(&Density::Grid(uniform)).unwrap().abs() < 1e-12);
        let m3 = ReferenceDensity::standard_gaussian(3);
        assert!((entropy(&m3.into()).unwrap() - 1.5 * (1.0 + (2.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
    }

    #[test]
    fn kl_examples() {
        let f = gauss_grid(1, 1201, 12.0, 0.0, 1.0);
        let pair = DensityPair::new(f.clone(), f.clone()).unwrap();
        assert_eq!(kl(&pair).unwrap().value, 0.0);
        let m = 0.8;
        let pair = DensityPair::new(f.clone(), ReferenceDensity::gaussian(vec![m], 1.0).unwrap()).unwrap();
        let r = kl(&pair).unwrap();
        assert!((r.value - m * m / 2.0).abs() < 1e-6, "{}", r.value);
        let closed = DensityPair::new(
            ReferenceDensity::standard_gaussian(1),
            ReferenceDensity::gaussian(vec![m], 1.0).unwrap(),
        )
        .unwrap();
        assert!((kl(&closed).unwrap().value - m * m / 2.0).abs() < 1e-15);
    }

    #[test]
    fn kl_support_violation() {
        let f = GridDensity::from_fn(vec![0.0], vec![1.0], vec![5], |_| 1.0).unwrap();
        let g = GridDensity::from_fn(vec![0.0], vec![1.0], vec![5], |x| if x[0] > 2.0 { 0.0 } else { 1.0 }).unwrap();
        assert!(matches!(kl(&DensityPair::new(f, g).unwrap()), Err(DivError::SupportViolation(_))));
    }

    #[test]
    fn fisher_examples() {
        for t in [0.5f64, 1.0, 2.0] {
            let g = gauss_grid(1, 2001, 10.0 * t.sqrt(), 0.0, t);
            assert!((fisher(&Density::Grid(g)).unwrap() - 1.0 / t).abs() < 1e-4);
        }
        // f(x/c)/c has Fisher information I/c²
        let a = fisher(&Density::Grid(gauss_grid(1, 2001, 10.0, 0.0, 1.0))).unwrap();
        let b = fisher(&Density::Grid(gauss_grid(1, 2001, 20.0, 0.0, 4.0))).unwrap();
        assert!((b - a / 4.0).abs() < 1e-4);
    }

    #[test]
    fn relative_fisher_examples() {
        let f = gauss_grid(1, 2001, 12.0, 0.0, 1.0);
        assert_eq!(relative_fisher(&DensityPair::new(f.clone(), f.clone()).unwrap()).unwrap().value, 0.0);
        let m = 0.6;
        let pair = DensityPair::new(f, ReferenceDensity::gaussian(vec![m], 1.0).unwrap()).unwrap();
        assert!((relative_fisher(&pair).unwrap().value - m * m).abs() < 1e-4);
        let closed = DensityPair::new(
            ReferenceDensity::standard_gaussian(1),
            ReferenceDensity::gaussian(vec![m], 1.0).unwrap(),
        )
        .unwrap();
        assert!((relative_fisher(&closed).unwrap().value - m * m).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_identities_on_skewed_grid() {
        let f = GridDensity::cube(1, 12.0, 1601, |x| {
            let v = x[0];
            (-(v - 0.3) * (v - 0.3) / 2.0).exp() * (1.0 + 0.4 * (1.3 * v).sin() * (-v * v / 8.0).exp())
        })
        .unwrap();
        let m = best_maxwellian(&f).unwrap();
        let pair = DensityPair::new(f.clone(), m.clone()).unwrap();
        let h = kl(&pair).unwrap();
        let (hf, ef) = entropy_with_error(&Density::Grid(f.clone())).unwrap();
        assert!((h.value - (m.entropy() - hf)).abs() <= 10.0 * (h.error_estimate + ef));
        let i = relative_fisher(&pair).unwrap();
        let (if_, eif) = fisher_with_error(&Density::Grid(f)).unwrap();
        assert!((i.value - (if_ - m.fisher())).abs() <= 10.0 * (i.error_estimate + eif));
    }
}
