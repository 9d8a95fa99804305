//! Wasserstein distances between empirical measures.
//!
//! In one dimension the optimal coupling is the quantile coupling and W_p is
//! computed exactly from the merged weight breakpoints. In general dimension
//! the transportation problem is solved exactly by the transportation simplex
//! (northwest-corner start, Dantzig pricing, Bland's rule after a run of
//! degenerate pivots).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::energy::{energy_sq, EnergyOrder, DEFAULT_MOMENT_TOL};
use crate::error::{DivError, Result};
use crate::fourier::{fourier_metric, FourierOrder, QuadratureSpec};
use crate::numeric::{linear_fit, NeumaierSum};
use crate::report::{DivergenceReport, Family};
use crate::sample::{squared_distance, WeightedSampleSet};

/// Default bound on the support size of each side for the exact solver.
pub const DEFAULT_MAX_SUPPORT: usize = 512;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// (i, j, mass) with mass > 0.
    pub pairs: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub order_p: f64,
}

impl TransportPlan {
    /// Largest deviation of the plan's marginals from the weights of μ, ν.
    pub fn marginal_residual(&self, mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> f64 {
        let mut rows = vec![NeumaierSum::new(); mu.len()];
        let mut cols = vec![NeumaierSum::new(); nu.len()];
        for &(i, j, m) in &self.pairs {
            rows[i].add(m);
            cols[j].add(m);
        }
        let r = rows.iter().zip(mu.weights()).map(|(s, w)| (s.value() - w).abs());
        let c = cols.iter().zip(nu.weights()).map(|(s, w)| (s.value() - w).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// Σ mass·‖x_i − y_j‖^p recomputed from the pairs.
    pub fn recomputed_cost(&self, mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, m)| m * ground_cost(mu.point(i), nu.point(j), self.order_p))
            .collect::<NeumaierSum>()
            .value()
    }
}

#[inline]
fn ground_cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    let sq = squared_distance(x, y);
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(DivError::InvalidInput(format!("p must be a finite real ≥ 1, got {p}")));
    }
    Ok(())
}

/// Sorted (position, weight) atoms of a 1-D set.
fn sorted_atoms(mu: &WeightedSampleSet) -> Vec<(f64, f64)> {
    let mut a: Vec<(f64, f64)> = mu.coords().iter().copied().zip(mu.weights().iter().copied()).collect();
    a.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    a
}

/// Exact W_p on the line via the quantile coupling.
pub fn wasserstein_1d(mu: &WeightedSampleSet, nu: &WeightedSampleSet, p: f64) -> Result<DivergenceReport> {
    check_p(p)?;
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(DivError::InvalidInput("wasserstein_1d needs one-dimensional samples".into()));
    }
    // canonical argument order makes the value exactly symmetric
    let (a, b) = {
        let (a, b) = (sorted_atoms(mu), sorted_atoms(nu));
        let key = |v: &[(f64, f64)]| v.iter().map(|x| (x.0.to_bits(), x.1.to_bits())).collect::<Vec<_>>();
        if key(&a) <= key(&b) {
            (a, b)
        } else {
            (b, a)
        }
    };
    let cost = quantile_cost(&a, &b, p);
    let value = cost.max(0.0).powf(1.0 / p);
    Ok(DivergenceReport::new(Family::Wasserstein, p, value, 8.0 * f64::EPSILON * (1.0 + value))?
        .with("cost", cost)
        .with("method", "quantile"))
}

fn quantile_cost(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (NeumaierSum::new(), NeumaierSum::new());
    ca.add(a[0].1);
    cb.add(b[0].1);
    let mut prev = 0.0;
    let mut acc = NeumaierSum::new();
    loop {
        let (fa, fb) = (ca.value(), cb.value());
        let t = fa.min(fb);
        let mass = t - prev;
        if mass > 0.0 {
            let d = (a[i].0 - b[j].0).abs();
            acc.add(mass * if p == 1.0 { d } else { d.powf(p) });
        }
        prev = prev.max(t);
        let last_a = i + 1 == a.len();
        let last_b = j + 1 == b.len();
        if last_a && last_b {
            break;
        }
        let advance_a = !last_a && (fa <= fb || last_b);
        let advance_b = !last_b && (fb <= fa || last_a);
        if advance_a {
            i += 1;
            ca.add(a[i].1);
        }
        if advance_b {
            j += 1;
            cb.add(b[j].1);
        }
    }
    // leftover mass from rounding of the cumulative sums
    let rest = 1.0 - prev;
    if rest > 0.0 {
        let d = (a[a.len() - 1].0 - b[b.len() - 1].0).abs();
        acc.add(rest * d.powf(p));
    }
    acc.value()
}

/// Exact W_p by the transportation simplex.
pub fn wasserstein_lp(
    mu: &WeightedSampleSet,
    nu: &WeightedSampleSet,
    p: f64,
    max_support: usize,
) -> Result<(DivergenceReport, TransportPlan)> {
    check_p(p)?;
    mu.check_dim(nu.dim())?;
    let (m, n) = (mu.len(), nu.len());
    if m > max_support || n > max_support {
        return Err(DivError::TooLarge(format!(
            "supports {m} × {n} exceed the exact-solver limit {max_support} per side"
        )));
    }
    let cost: Vec<f64> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| ground_cost(mu.point(i), nu.point(j), p))
        .collect();
    let sol = transportation_simplex(mu.weights(), nu.weights(), &cost, m, n)?;
    let pairs: Vec<(usize, usize, f64)> = sol
        .basis
        .iter()
        .filter(|c| c.2 > 0.0)
        .map(|&(i, j, x)| (i, j, x))
        .collect();
    let mut sorted = pairs.clone();
    sorted.sort_by_key(|p| (p.0, p.1));
    let total = sorted
        .iter()
        .map(|&(i, j, x)| x * cost[i * n + j])
        .collect::<NeumaierSum>()
        .value()
        .max(0.0);
    let plan = TransportPlan {
        pairs: sorted,
        cost: total,
        order_p: p,
    };
    let value = total.powf(1.0 / p);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let marginal = plan.marginal_residual(mu, nu);
    let err = (marginal + sol.dual_residual) * max_cost * (m + n) as f64 + 8.0 * f64::EPSILON * total;
    let err_value = if value > 0.0 {
        err / (p * value.powf(p - 1.0))
    } else {
        err.powf(1.0 / p)
    };
    let report = DivergenceReport::new(Family::Wasserstein, p, value, err_value)?
        .with("cost", total)
        .with("method", "transportation_simplex")
        .with("dual_residual", sol.dual_residual)
        .with("marginal_residual", marginal)
        .with("iterations", sol.iterations as u64)
        .with("bland_pivots", sol.bland_pivots as u64);
    Ok((report, plan))
}

struct SimplexSolution {
    basis: Vec<(usize, usize, f64)>,
    dual_residual: f64,
    iterations: usize,
    bland_pivots: usize,
}

/// Solves min Σ c_ij x_ij subject to row sums `a`, column sums `b`, x ≥ 0.
fn transportation_simplex(a: &[f64], b: &[f64], cost: &[f64], m: usize, n: usize) -> Result<SimplexSolution> {
    // balance the two marginals exactly in the last column
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let sa: f64 = a.iter().copied().collect::<NeumaierSum>().value();
    let sb: f64 = b.iter().copied().collect::<NeumaierSum>().value();
    demand[n - 1] += sa - sb;
    if demand[n - 1] < 0.0 {
        demand[n - 1] = 0.0;
    }

    // northwest corner: exactly m + n − 1 basic cells (some may carry 0)
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = supply[i].min(demand[j]);
        basis.push((i, j, x));
        supply[i] -= x;
        demand[j] -= x;
        if i + 1 == m && j + 1 == n {
            break;
        }
        if i + 1 == m {
            j += 1;
        } else if j + 1 == n || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    // whatever rounding left over sits in the last basic cell
    if let Some(last) = basis.last_mut() {
        last.2 += supply[m - 1].max(0.0);
    }

    let max_c = cost.iter().copied().fold(0.0, f64::max);
    let eps = 1e-12 * (1.0 + max_c);
    let mut in_basis = vec![usize::MAX; m * n];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        in_basis[i * n + j] = k;
    }
    let cap = 100_000 + 50 * m * n;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut bland_pivots = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    let mut iterations = 0;

    loop {
        // tree adjacency and potentials u_i + v_j = c_ij on basic cells
        for l in adj.iter_mut() {
            l.clear();
        }
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        potentials(&basis, &adj, cost, m, n, &mut u, &mut v);

        // pricing
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        'outer: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] != usize::MAX {
                    continue;
                }
                let d = cost[i * n + j] - u[i] - v[j];
                if bland {
                    if d < -eps {
                        entering = Some((i, j));
                        break 'outer;
                    }
                } else if d < best {
                    best = d;
                    entering = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut residual: f64 = 0.0;
            for i in 0..m {
                for j in 0..n {
                    let d = cost[i * n + j] - u[i] - v[j];
                    if in_basis[i * n + j] == usize::MAX {
                        residual = residual.max(-d);
                    } else {
                        residual = residual.max(d.abs());
                    }
                }
            }
            return Ok(SimplexSolution {
                basis,
                dual_residual: residual.max(0.0),
                iterations,
                bland_pivots,
            });
        };
        iterations += 1;
        if bland {
            bland_pivots += 1;
        }
        if iterations > cap {
            return Err(DivError::DegenerateBasis(format!(
                "no convergence after {cap} pivots ({bland_pivots} under Bland's rule)"
            )));
        }

        // path in the basis tree from row ei to column ej
        let path = tree_path(&basis, &adj, m, ei, m + ej).ok_or_else(|| {
            DivError::DegenerateBasis("basis is not a spanning tree".into())
        })?;
        // path[0] touches row ei; odd positions (0, 2, ...) lose mass
        let mut theta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        for (t, &k) in path.iter().enumerate() {
            if t % 2 == 0 {
                let (bi, bj, x) = basis[k];
                let idx = bi * n + bj;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let (li, lj, lx) = basis[l];
                        x < lx || (x == lx && idx < li * n + lj)
                    }
                };
                if better {
                    theta = x;
                    leave = Some(k);
                }
            }
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = theta.max(0.0);
        if theta <= 0.0 {
            degenerate_run += 1;
            if degenerate_run > DEGENERATE_RUN {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        for (t, &k) in path.iter().enumerate() {
            if t % 2 == 0 {
                basis[k].2 = (basis[k].2 - theta).max(0.0);
            } else {
                basis[k].2 += theta;
            }
        }
        let (li, lj, _) = basis[leave];
        in_basis[li * n + lj] = usize::MAX;
        basis[leave] = (ei, ej, theta);
        in_basis[ei * n + ej] = leave;
    }
}

fn potentials(
    basis: &[(usize, usize, f64)],
    adj: &[Vec<usize>],
    cost: &[f64],
    m: usize,
    n: usize,
    u: &mut [f64],
    v: &mut [f64],
) {
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::new();
    seen[0] = true;
    u[0] = 0.0;
    queue.push_back(0usize);
    while let Some(node) = queue.pop_front() {
        for &k in &adj[node] {
            let (i, j, _) = basis[k];
            let c = cost[i * n + j];
            if node < m {
                let other = m + j;
                if !seen[other] {
                    seen[other] = true;
                    v[j] = c - u[i];
                    queue.push_back(other);
                }
            } else if !seen[i] {
                seen[i] = true;
                u[i] = c - v[j];
                queue.push_back(i);
            }
        }
    }
}

/// Basic cells along the unique tree path between two nodes.
fn tree_path(basis: &[(usize, usize, f64)], adj: &[Vec<usize>], m: usize, from: usize, to: usize) -> Option<Vec<usize>> {
    let total = adj.len();
    let mut parent_edge = vec![usize::MAX; total];
    let mut parent = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &k in &adj[node] {
            let (i, j, _) = basis[k];
            let other = if node < m { m + j } else { i };
            if !seen[other] {
                seen[other] = true;
                parent[other] = node;
                parent_edge[other] = k;
                queue.push_back(other);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        path.push(parent_edge[node]);
        node = parent[node];
    }
    path.reverse();
    Some(path)
}

/// W_1 by the quantile formula in 1-D and the simplex otherwise.
pub fn wasserstein_1(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<DivergenceReport> {
    if mu.dim() == 1 {
        wasserstein_1d(mu, nu, 1.0)
    } else {
        wasserstein_lp(mu, nu, 1.0, DEFAULT_MAX_SUPPORT).map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1LowerBound {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// ½ E_1² against W_1.
pub fn check_w1_lower_bound(mu: &WeightedSampleSet, nu: &WeightedSampleSet) -> Result<W1LowerBound> {
    let e = energy_sq(mu, nu, EnergyOrder::euclidean(1.0)?, DEFAULT_MOMENT_TOL)?;
    let w = if mu.dim() == 1 {
        wasserstein_1d(mu, nu, 1.0)?
    } else {
        wasserstein_lp(mu, nu, 1.0, DEFAULT_MAX_SUPPORT)?.0
    };
    let lhs = 0.5 * e.value;
    Ok(W1LowerBound {
        lhs,
        rhs: w.value,
        slack: w.value - lhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1UpperBound {
    pub w1: f64,
    pub f_metric: f64,
    pub f_error_estimate: f64,
    /// 2/(n+2), the exponent of the leading term of the bound.
    pub bound_exponent: f64,
}

/// Ingredients of W_1 ≤ C (F^{2/(n+2)} + F^{4/(n+2)²}) with F = F_{n+1}.
pub fn check_w1_upper_bound(mu: &WeightedSampleSet, nu: &WeightedSampleSet, quad: &QuadratureSpec) -> Result<W1UpperBound> {
    let n = mu.dim();
    let w = wasserstein_1(mu, nu)?;
    let f = fourier_metric(mu, nu, &FourierOrder::new(n as f64 + 1.0, n)?, quad, DEFAULT_MOMENT_TOL)?;
    Ok(W1UpperBound {
        w1: w.value,
        f_metric: f.value,
        f_error_estimate: f.error_estimate,
        bound_exponent: 2.0 / (n as f64 + 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub points: Vec<W1UpperBound>,
    /// Least-squares slope of log W_1 on log F.
    pub slope: f64,
    pub r2: f64,
    pub bound_exponent: f64,
}

/// Log-log slope of W_1 against F_{n+1} over a family of pairs approaching
/// each other.
pub fn fit_w1_upper_exponent(
    family: &[(WeightedSampleSet, WeightedSampleSet)],
    quad: &QuadratureSpec,
) -> Result<ExponentFit> {
    if family.len() < 4 {
        return Err(DivError::InvalidInput(format!(
            "the exponent fit needs at least 4 family members, got {}",
            family.len()
        )));
    }
    let points = family
        .iter()
        .map(|(a, b)| check_w1_upper_bound(a, b, quad))
        .collect::<Result<Vec<_>>>()?;
    if points.iter().any(|p| !(p.w1 > 0.0) || !(p.f_metric > 0.0)) {
        return Err(DivError::InvalidInput("family members must be distinct pairs".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.f_metric.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.w1.ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    let bound_exponent = points[0].bound_exponent;
    Ok(ExponentFit {
        points,
        slope,
        r2,
        bound_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[f64]) -> WeightedSampleSet {
        WeightedSampleSet::from_values(v).unwrap()
    }

    #[test]
    fn one_d_examples() {
        let d0 = WeightedSampleSet::dirac(&[0.0]).unwrap();
        let d1 = WeightedSampleSet::dirac(&[1.0]).unwrap();
        assert_eq!(wasserstein_1d(&d0, &d1, 1.0).unwrap().value, 1.0);
        assert!((wasserstein_1d(&set(&[0.0, 2.0]), &set(&[1.0, 3.0]), 1.0).unwrap().value - 1.0).abs() < 1e-15);
        assert!(wasserstein_1d(&d0, &d1, 0.5).is_err());
    }

    #[test]
    fn unequal_weights_quantile() {
        // mass 0.5 at 0 and 0.5 at 1 against all mass at 0.25
        let a = set(&[0.0, 1.0]);
        let b = set(&[0.25]);
        let w = wasserstein_1d(&a, &b, 1.0).unwrap().value;
        assert!((w - 0.5).abs() < 1e-15);
        let (r, plan) = wasserstein_lp(&a, &b, 1.0, 16).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
        assert!(plan.marginal_residual(&a, &b) < 1e-15);
    }

    #[test]
    fn lp_single_pair() {
        let a = WeightedSampleSet::dirac(&[0.0, 0.0]).unwrap();
        let b = WeightedSampleSet::dirac(&[3.0, 4.0]).unwrap();
        let (r, plan) = wasserstein_lp(&a, &b, 2.0, 16).unwrap();
        assert!((r.value - 5.0).abs() < 1e-14);
        assert_eq!(plan.pairs.len(), 1);
    }

    #[test]
    fn lp_identity_plan() {
        let a = WeightedSampleSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]], None).unwrap();
        let (r, plan) = wasserstein_lp(&a, &a, 1.0, 16).unwrap();
        assert_eq!(r.value, 0.0);
        for (i, j, _) in plan.pairs {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn lp_matches_quantile_on_line() {
        let a = set(&[0.3, 1.9, -0.7, 2.2, 5.0]);
        let b = set(&[1.0, 0.1, 4.4, -2.0]);
        for p in [1.0, 2.0, 1.5] {
            let q = wasserstein_1d(&a, &b, p).unwrap().value;
            let (l, plan) = wasserstein_lp(&a, &b, p, 16).unwrap();
            assert!((q - l.value).abs() < 1e-12, "p={p}: {q} vs {}", l.value);
            assert!((plan.recomputed_cost(&a, &b) - plan.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bound_edge_case() {
        let d0 = WeightedSampleSet::dirac(&[0.0]).unwrap();
        let d1 = WeightedSampleSet::dirac(&[1.0]).unwrap();
        let b = check_w1_lower_bound(&d0, &d1).unwrap();
        assert_eq!((b.lhs, b.rhs), (1.0, 1.0));
        assert_eq!(b.slack, 0.0);
    }

    #[test]
    fn exponent_fit_needs_four_points() {
        let d0 = WeightedSampleSet::dirac(&[0.0]).unwrap();
        let fam = vec![(d0.clone(), d0.translated(&[0.1]).unwrap()); 3];
        assert!(fit_w1_upper_exponent(&fam, &QuadratureSpec::default()).is_err());
    }
}
