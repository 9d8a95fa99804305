//! Empirical probability measures on R^n and the reductions every divergence
//! is built from.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DivError, Result};
use crate::numeric::{deterministic_row_sum, fingerprint, NeumaierSum};

/// Highest mixed-moment order supported by [`WeightedSampleSet::moments`].
pub const MAX_MOMENT_ORDER: usize = 4;

/// Distance below which two points are treated as coincident under a
/// negative-power kernel.
pub const COINCIDENCE_RADIUS: f64 = 1e-12;

/// Norm used inside power kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    L1,
}

impl Norm {
    #[inline]
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => squared_distance(x, y).sqrt(),
            Norm::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    /// `‖x - y‖^alpha`, computed from the squared distance when possible.
    #[inline]
    pub fn power(self, x: &[f64], y: &[f64], alpha: f64) -> f64 {
        match self {
            Norm::Euclidean => {
                let sq = squared_distance(x, y);
                if alpha == 1.0 {
                    sq.sqrt()
                } else if alpha == 2.0 {
                    sq
                } else if sq == 0.0 {
                    if alpha > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    sq.powf(0.5 * alpha)
                }
            }
            Norm::L1 => {
                let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                if alpha == 1.0 {
                    d
                } else {
                    d.powf(alpha)
                }
            }
        }
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// An empirical probability measure: points in R^n with nonnegative weights
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSampleSet {
    /// Builds a sample set from row vectors. `None` weights means uniform.
    /// Positive weight totals are renormalized to one.
    pub fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| DivError::InvalidInput("sample set needs at least one point".into()))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DivError::InvalidInput(format!(
                    "point {i} has dimension {} but the set has dimension {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, weights)
    }

    /// Builds a sample set from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(DivError::InvalidInput("dimension must be positive".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(DivError::InvalidInput(format!(
                "{} coordinates cannot form points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(DivError::InvalidInput(format!(
                "non-finite coordinate in point {}",
                k / dim
            )));
        }
        let n = coords.len() / dim;
        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => normalize_weights(w, n)?,
        };
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    /// Uniformly weighted 1-D sample set.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec(), None)
    }

    /// A single atom of unit mass.
    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::from_flat(point.len(), point.to_vec(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Hash of coordinates and weights, stable across runs.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(
            std::iter::once(self.dim as f64)
                .chain(self.coords.iter().copied())
                .chain(self.weights.iter().copied()),
        )
    }

    /// Applies `f` to every point; weights are kept.
    pub fn map_points<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut dim = None;
        for p in self.points() {
            let q = f(p);
            match dim {
                None => dim = Some(q.len()),
                Some(d) if d != q.len() => {
                    return Err(DivError::InvalidInput("point map changed dimension".into()))
                }
                _ => {}
            }
            coords.extend(q);
        }
        Self::from_flat(dim.unwrap_or(self.dim), coords, Some(self.weights.clone()))
    }

    /// Multiplies every coordinate by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.iter().map(|x| c * x).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Multiplies coordinate k by `q[k]`.
    pub fn scaled_diag(&self, q: &[f64]) -> Result<Self> {
        self.check_dim(q.len())?;
        Ok(Self {
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .enumerate()
                .map(|(k, x)| q[k % self.dim] * x)
                .collect(),
            weights: self.weights.clone(),
        })
    }

    /// Adds `shift` to every point.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        self.check_dim(shift.len())?;
        Ok(Self {
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .enumerate()
                .map(|(k, x)| x + shift[k % self.dim])
                .collect(),
            weights: self.weights.clone(),
        })
    }

    /// Law of X + Z for independent X ~ self, Z ~ other, as all pairwise sums.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let mut coords = Vec::with_capacity(self.len() * other.len() * self.dim);
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for (p, wp) in self.points().zip(&self.weights) {
            for (q, wq) in other.points().zip(&other.weights) {
                coords.extend(p.iter().zip(q).map(|(a, b)| a + b));
                weights.push(wp * wq);
            }
        }
        Self::from_flat(self.dim, coords, Some(weights))
    }

    /// Mixture λ·self + (1-λ)·other.
    pub fn mixture(&self, other: &Self, lambda: f64) -> Result<Self> {
        self.check_dim(other.dim)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DivError::InvalidInput("mixture weight must lie in [0, 1]".into()));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights: Vec<f64> = self.weights.iter().map(|w| lambda * w).collect();
        weights.extend(other.weights.iter().map(|w| (1.0 - lambda) * w));
        Self::from_flat(self.dim, coords, Some(weights))
    }

    pub fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(DivError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Weighted mean vector.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                self.points()
                    .zip(&self.weights)
                    .map(|(p, w)| w * p[k])
                    .collect::<NeumaierSum>()
                    .value()
            })
            .collect()
    }

    /// All mixed moments Σ_j w_j x_j^e with |e| ≤ order.
    pub fn moments(&self, order: usize) -> Result<Moments> {
        if order > MAX_MOMENT_ORDER {
            return Err(DivError::InvalidInput(format!(
                "moment order {order} exceeds the supported maximum {MAX_MOMENT_ORDER}"
            )));
        }
        let entries = multi_indices(self.dim, order)
            .into_iter()
            .map(|e| {
                let v = self
                    .points()
                    .zip(&self.weights)
                    .map(|(p, w)| {
                        w * p
                            .iter()
                            .zip(&e)
                            .map(|(x, k)| x.powi(*k as i32))
                            .product::<f64>()
                    })
                    .collect::<NeumaierSum>()
                    .value();
                (e, v)
            })
            .collect();
        Ok(Moments { entries })
    }

    /// Weighted covariance (no Bessel correction), symmetrized.
    pub fn covariance(&self) -> Covariance {
        let n = self.dim;
        let mean = self.mean();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = self
                    .points()
                    .zip(&self.weights)
                    .map(|(p, w)| w * (p[a] - mean[a]) * (p[b] - mean[b]))
                    .collect::<NeumaierSum>()
                    .value();
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        let trace = m.trace();
        let min_eig = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let degenerate = !(trace > 0.0) || min_eig <= 1e-10 * trace;
        Covariance {
            matrix: m,
            mean: DVector::from_vec(mean),
            degenerate,
            min_eigenvalue: min_eig,
        }
    }

    /// Reads a CSV file: header line, numeric columns, optional weight column.
    ///
    /// With `weight_column = None` a column literally named `weight` is used
    /// when present; otherwise weights are uniform.
    pub fn load_csv(path: impl AsRef<Path>, weight_column: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv(file, weight_column)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, weight_column: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| DivError::Csv {
                row: 1,
                message: e.to_string(),
            })?
            .clone();
        let weight_idx = match weight_column {
            Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
                DivError::InvalidInput(format!("weight column '{name}' not found in header"))
            })?),
            None => headers.iter().position(|h| h == "weight"),
        };
        let width = headers.len();
        let dim = width - usize::from(weight_idx.is_some());
        if dim == 0 {
            return Err(DivError::Csv {
                row: 1,
                message: "no coordinate columns".into(),
            });
        }
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            // header is line 1
            let row = k + 2;
            let record = record.map_err(|e| DivError::Csv {
                row,
                message: e.to_string(),
            })?;
            if record.len() != width {
                return Err(DivError::Csv {
                    row,
                    message: format!("expected {width} fields, found {}", record.len()),
                });
            }
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| DivError::Csv {
                    row,
                    message: format!("non-numeric value '{field}' in column {}", c + 1),
                })?;
                if !v.is_finite() {
                    return Err(DivError::Csv {
                        row,
                        message: format!("non-finite value in column {}", c + 1),
                    });
                }
                if Some(c) == weight_idx {
                    if v < 0.0 {
                        return Err(DivError::Csv {
                            row,
                            message: format!("negative weight {v}"),
                        });
                    }
                    weights.push(v);
                } else {
                    coords.push(v);
                }
            }
        }
        if coords.is_empty() {
            return Err(DivError::Csv {
                row: 2,
                message: "no data rows".into(),
            });
        }
        Self::from_flat(dim, coords, weight_idx.map(|_| weights))
    }

    /// Writes `x1..xn,weight` with shortest round-trip number formatting.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        wtr.write_record(&header).map_err(csv_write_error)?;
        for (p, w) in self.points().zip(&self.weights) {
            let mut rec: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            rec.push(format!("{w:?}"));
            wtr.write_record(&rec).map_err(csv_write_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_write_error(e: csv::Error) -> DivError {
    DivError::Csv {
        row: 0,
        message: e.to_string(),
    }
}

fn normalize_weights(w: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if w.len() != n {
        return Err(DivError::InvalidInput(format!(
            "{} weights for {n} points",
            w.len()
        )));
    }
    if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(DivError::InvalidInput(format!(
            "weight {i} is negative or non-finite"
        )));
    }
    let total = w.iter().copied().collect::<NeumaierSum>().value();
    if !(total > 0.0) {
        return Err(DivError::InvalidInput("weights sum to zero".into()));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Loads a sample set from CSV.
pub fn load_samples(path: impl AsRef<Path>, weight_column: Option<&str>) -> Result<WeightedSampleSet> {
    WeightedSampleSet::load_csv(path, weight_column)
}

/// Mixed moments keyed by exponent vectors, graded by total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub entries: Vec<(Vec<u32>, f64)>,
}

impl Moments {
    pub fn get(&self, exponents: &[u32]) -> Option<f64> {
        self.entries
            .iter()
            .find(|(e, _)| e.as_slice() == exponents)
            .map(|(_, v)| *v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }
}

/// Exponent vectors of total degree ≤ order, grouped by degree.
fn multi_indices(dim: usize, order: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for degree in 0..=order {
        let mut current = vec![0u32; dim];
        fill_degree(&mut out, &mut current, 0, degree as u32);
    }
    out
}

fn fill_degree(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, k: usize, remaining: u32) {
    if k + 1 == current.len() {
        current[k] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[k] = e;
        fill_degree(out, current, k + 1, remaining - e);
    }
}

/// Highest order `k ≤ max_order` such that every mixed moment of order ≤ k
/// agrees within `tol · max(1, |m_a|, |m_b|)`; `None` means even the
/// first moments disagree. On mismatch the offending moment is described.
pub fn matched_moment_order(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    max_order: usize,
    tol: f64,
) -> Result<(usize, Option<DivError>)> {
    a.check_dim(b.dim())?;
    let ma = a.moments(max_order)?;
    let mb = b.moments(max_order)?;
    let mut matched = 0;
    for degree in 1..=max_order {
        for ((e, va), (_, vb)) in ma.entries.iter().zip(&mb.entries) {
            if e.iter().sum::<u32>() as usize != degree {
                continue;
            }
            let diff = (va - vb).abs();
            let allowed = tol * 1f64.max(va.abs()).max(vb.abs());
            if diff > allowed {
                return Ok((
                    matched,
                    Some(DivError::MomentMismatch {
                        order: degree,
                        detail: format!("exponents {e:?}: {va} vs {vb}"),
                        difference: diff,
                        tolerance: allowed,
                    }),
                ));
            }
        }
        matched = degree;
    }
    Ok((matched, None))
}

/// Errors unless all mixed moments up to `order` agree within tolerance.
pub fn require_matching_moments(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    order: usize,
    tol: f64,
) -> Result<()> {
    if order == 0 {
        return a.check_dim(b.dim());
    }
    match matched_moment_order(a, b, order, tol)? {
        (_, Some(err)) => Err(err),
        _ => Ok(()),
    }
}

/// Weighted covariance with its degeneracy diagnosis.
#[derive(Debug, Clone)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Rank-deficient to tolerance 1e-10·trace.
    pub degenerate: bool,
    pub min_eigenvalue: f64,
}

/// Orders two sample sets canonically so that pairwise reductions can be
/// made exactly symmetric in their arguments.
fn canonical_order(a: &WeightedSampleSet, b: &WeightedSampleSet) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| {
            for (x, y) in a.coords.iter().zip(&b.coords) {
                let o = x.total_cmp(y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
        .then_with(|| {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                let o = x.total_cmp(y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

/// Σ_i Σ_j w_i v_j ‖x_i − y_j‖^α with compensated, thread-count independent
/// summation. The result is bit-identical under swapping `a` and `b`.
///
/// A negative `alpha` with a coincident cross pair is an error.
pub fn pairwise_power_sum(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    alpha: f64,
    norm: Norm,
) -> Result<f64> {
    a.check_dim(b.dim())?;
    let swapped = canonical_order(a, b) == Ordering::Greater;
    let (first, second) = if swapped { (b, a) } else { (a, b) };
    if alpha < 0.0 {
        if let Some((i, j)) = find_coincidence(first, second, false) {
            let (i, j) = if swapped { (j, i) } else { (i, j) };
            return Err(DivError::SingularPair { i, j });
        }
    }
    Ok(power_sum_ordered(first, second, alpha, norm, false))
}

/// Σ_i Σ_j w_i w_j ‖x_i − x_j‖^α over one set. For negative `alpha` the
/// diagonal i = j is excluded and coincident off-diagonal pairs are an error.
pub fn self_power_sum(a: &WeightedSampleSet, alpha: f64, norm: Norm) -> Result<f64> {
    if alpha < 0.0 {
        if let Some((i, j)) = find_coincidence(a, a, true) {
            return Err(DivError::SingularPair { i, j });
        }
    }
    Ok(power_sum_ordered(a, a, alpha, norm, alpha < 0.0))
}

fn find_coincidence(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    skip_diagonal: bool,
) -> Option<(usize, usize)> {
    let r2 = COINCIDENCE_RADIUS * COINCIDENCE_RADIUS;
    for i in 0..a.len() {
        let x = a.point(i);
        for j in 0..b.len() {
            if skip_diagonal && i == j {
                continue;
            }
            if squared_distance(x, b.point(j)) < r2 {
                return Some((i, j));
            }
        }
    }
    None
}

fn power_sum_ordered(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    alpha: f64,
    norm: Norm,
    skip_diagonal: bool,
) -> f64 {
    deterministic_row_sum(a.len(), |i| {
        let x = a.point(i);
        let mut row = NeumaierSum::new();
        for j in 0..b.len() {
            if skip_diagonal && i == j {
                continue;
            }
            row.add(b.weights[j] * norm.power(x, b.point(j), alpha));
        }
        a.weights[i] * row.value()
    })
}
