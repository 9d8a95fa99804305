//! Monte Carlo simulation of the binary wealth-exchange model
//!
//! ```text
//! v* = (1 − ελ) v + ελ w + √ε η v
//! w* = (1 − ελ) w + ελ v + √ε η̃ w
//! ```
//!
//! with independent zero-mean η, η̃ of variance σ. The interaction scale ε
//! keeps the Pareto index of the large-time law at `μ = 1 + 2λ/σ` and avoids
//! the blow-up of the unscaled rule (ε = 1) at moderate σ. Kinetic time is
//! the number of interactions divided by N.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::density::ReferenceDensity;
use crate::energy::{energy1_via_cdf, energy_sq, EnergyOrder, DEFAULT_MOMENT_TOL};
use crate::error::{DivError, Result};
use crate::fourier::{fourier_metric, FourierOrder, QuadratureSpec};
use crate::numeric::{linear_fit, NeumaierSum};
use crate::report::DivergenceReport;
use crate::sample::WeightedSampleSet;
use crate::transport::wasserstein_1d;

/// Default interaction scale.
pub const DEFAULT_EPSILON: f64 = 0.025;

/// Size of the quantile discretization of the equilibrium law.
pub const EQUILIBRIUM_POINTS: usize = 100_000;

/// Redraw attempts before an interaction is skipped.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaLaw {
    /// ±√σ with probability ½ each.
    TwoPoint,
    /// Uniform on [−√(3σ), √(3σ)].
    UniformSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampPolicy {
    /// Redraw the (η, η̃) pair until both post-trade wealths are nonnegative.
    RejectRedraw,
    /// Set negative post-trade wealth to 0.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeParams {
    pub lambda: f64,
    pub sigma: f64,
    pub eta_law: EtaLaw,
    pub clamp_negative: ClampPolicy,
    pub epsilon: f64,
    /// Rescale the ensemble to its initial mean after every batch of
    /// interactions. The trade rule is homogeneous of degree one and both
    /// clamp policies are scale invariant, so this removes the random walk
    /// of the total wealth without changing the law of the shape.
    #[serde(default)]
    pub conserve_mean: bool,
}

impl TradeParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        let p = Self {
            lambda,
            sigma,
            eta_law: EtaLaw::TwoPoint,
            clamp_negative: ClampPolicy::RejectRedraw,
            epsilon: DEFAULT_EPSILON,
            conserve_mean: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(DivError::InvalidInput(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(DivError::InvalidInput(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(DivError::InvalidInput(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }

    /// μ = 1 + 2λ/σ.
    pub fn pareto_index(&self) -> f64 {
        1.0 + 2.0 * self.lambda / self.sigma
    }

    /// Reference exponent (2r+1)/2 · [σ(2r+3)/2 + 2] of the Fourier-space
    /// decay estimate, at r = −1.
    pub fn decay_exponent_reference(&self) -> f64 {
        let r = -1.0;
        (2.0 * r + 1.0) / 2.0 * (self.sigma * (2.0 * r + 3.0) / 2.0 + 2.0)
    }

    fn draw_eta(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.eta_law {
            EtaLaw::TwoPoint => {
                let a = self.sigma.sqrt();
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            EtaLaw::UniformSymmetric => {
                let a = (3.0 * self.sigma).sqrt();
                rng.random_range(-a..=a)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub wealths: Vec<f64>,
    pub interactions: u64,
    pub rng_seed: u64,
    pub params: TradeParams,
    pub redraws: u64,
    pub truncations: u64,
    initial_mean: f64,
    rng: ChaCha8Rng,
}

impl EnsembleState {
    pub fn new(wealths: Vec<f64>, params: TradeParams, seed: u64) -> Result<Self> {
        if wealths.len() < 2 {
            return Err(DivError::InvalidInput("an ensemble needs at least 2 agents".into()));
        }
        if wealths.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(DivError::InvalidInput("wealths must be finite and nonnegative".into()));
        }
        let initial_mean = wealths.iter().copied().collect::<NeumaierSum>().value() / wealths.len() as f64;
        Ok(Self {
            wealths,
            interactions: 0,
            rng_seed: seed,
            params,
            redraws: 0,
            truncations: 0,
            initial_mean,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// All agents at wealth 1.
    pub fn delta_one(n: usize, params: TradeParams, seed: u64) -> Result<Self> {
        Self::new(vec![1.0; n], params, seed)
    }

    pub fn len(&self) -> usize {
        self.wealths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wealths.is_empty()
    }

    /// Kinetic time: interactions per agent.
    pub fn time(&self) -> f64 {
        self.interactions as f64 / self.wealths.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.wealths.iter().copied().collect::<NeumaierSum>().value() / self.wealths.len() as f64
    }

    pub fn to_samples(&self) -> Result<WeightedSampleSet> {
        WeightedSampleSet::from_values(&self.wealths)
    }

    /// Performs `n_interactions` binary trades between random distinct pairs.
    pub fn step(&mut self, n_interactions: u64) {
        let n = self.wealths.len();
        let p = self.params;
        let el = p.epsilon * p.lambda;
        let se = p.epsilon.sqrt();
        for _ in 0..n_interactions {
            let i = self.rng.random_range(0..n);
            let mut j = self.rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let (v, w) = (self.wealths[i], self.wealths[j]);
            let mut attempts = 0;
            loop {
                let eta = p.draw_eta(&mut self.rng);
                let eta_t = p.draw_eta(&mut self.rng);
                let v_new = (1.0 - el) * v + el * w + se * eta * v;
                let w_new = (1.0 - el) * w + el * v + se * eta_t * w;
                if v_new >= 0.0 && w_new >= 0.0 {
                    self.wealths[i] = v_new;
                    self.wealths[j] = w_new;
                    break;
                }
                match p.clamp_negative {
                    ClampPolicy::Truncate => {
                        self.wealths[i] = v_new.max(0.0);
                        self.wealths[j] = w_new.max(0.0);
                        self.truncations += 1;
                        break;
                    }
                    ClampPolicy::RejectRedraw => {
                        self.redraws += 1;
                        attempts += 1;
                        if attempts >= MAX_REDRAWS {
                            break;
                        }
                    }
                }
            }
        }
        self.interactions += n_interactions;
        if p.conserve_mean {
            let m = self.mean();
            if m > 0.0 {
                let c = self.initial_mean / m;
                self.wealths.iter_mut().for_each(|w| *w *= c);
            }
        }
    }

    /// Advances to kinetic time `t` (no-op if already past it).
    pub fn advance_to(&mut self, t: f64) {
        let target = (t * self.wealths.len() as f64).round() as u64;
        if target > self.interactions {
            self.step(target - self.interactions);
        }
    }
}

/// Inverse-Gamma law with mean 1 and index μ = 1 + 2λ/σ.
pub fn equilibrium_density(params: &TradeParams) -> Result<ReferenceDensity> {
    ReferenceDensity::inverse_gamma(params.pareto_index())
}

/// y with P(G ≤ y) = p for G ~ Gamma(shape a, rate b).
fn gamma_quantile(a: f64, b: f64, p: f64) -> f64 {
    // work with the lower tail when p < ½ and the upper tail otherwise
    let lower = p < 0.5;
    let target = if lower { p } else { 1.0 - p };
    let f = |x: f64| if lower { gamma_lr(a, x) } else { gamma_ur(a, x) };
    let ln_norm = a * b.ln() - ln_gamma(a);
    let log_pdf = |y: f64| ln_norm + (a - 1.0) * y.ln() - b * y;
    // bracket in x = b·y
    let (mut lo, mut hi) = (0.0f64, a.max(1.0));
    while (lower && f(hi) < target) || (!lower && f(hi) > target) {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi).max(1e-300);
    for _ in 0..200 {
        let val = f(x) - target;
        if (lower && val > 0.0) || (!lower && val < 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        let y = x / b;
        let dens = log_pdf(y).exp() / b; // d/dx of the lower tail
        let deriv = if lower { dens } else { -dens };
        let mut next = if deriv != 0.0 { x - val / deriv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x {
            x = next;
            break;
        }
        x = next;
    }
    x / b
}

/// Quantile-stratified sample of the inverse-Gamma equilibrium: atoms at
/// the quantiles (k + ½)/n.
pub fn equilibrium_sample(mu: f64, n: usize) -> Result<WeightedSampleSet> {
    if !(mu > 1.0) {
        return Err(DivError::InvalidInput(format!("the equilibrium index must exceed 1, got {mu}")));
    }
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let q = (k as f64 + 0.5) / n as f64;
            1.0 / gamma_quantile(mu, mu - 1.0, 1.0 - q)
        })
        .collect();
    WeightedSampleSet::from_values(&values)
}

/// Hill estimate of the tail index from the top `k` order statistics.
pub fn tail_index(wealths: &[f64], k: usize) -> Result<f64> {
    if k < 50 {
        return Err(DivError::InvalidInput(format!("the Hill estimator needs k ≥ 50, got {k}")));
    }
    if 2 * k > wealths.len() {
        return Err(DivError::InvalidInput(format!(
            "k = {k} exceeds half the sample size {}",
            wealths.len()
        )));
    }
    let mut sorted: Vec<f64> = wealths.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    if !(threshold > 0.0) {
        return Err(DivError::InvalidInput("the (k+1)-th largest value must be positive".into()));
    }
    let h = sorted[..k].iter().map(|x| (x / threshold).ln()).collect::<NeumaierSum>().value() / k as f64;
    Ok(1.0 / h)
}

/// A divergence tracked along the relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    Energy { alpha: f64 },
    Fourier { s: f64 },
    W1,
}

impl Probe {
    pub fn label(&self) -> String {
        match self {
            Probe::Energy { alpha } => format!("energy:{alpha}"),
            Probe::Fourier { s } => format!("fourier:{s}"),
            Probe::W1 => "w1".into(),
        }
    }

    /// Parses `energy:1,fourier:2,w1`.
    pub fn parse_list(text: &str) -> Result<Vec<Probe>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let (name, arg) = match item.split_once(':') {
                    Some((a, b)) => (a, Some(b)),
                    None => (item, None),
                };
                let num = |d: f64| -> Result<f64> {
                    arg.map(|a| a.parse::<f64>().map_err(|_| DivError::InvalidInput(format!("bad probe parameter '{a}'"))))
                        .unwrap_or(Ok(d))
                };
                match name {
                    "energy" => Ok(Probe::Energy { alpha: num(1.0)? }),
                    "fourier" => Ok(Probe::Fourier { s: num(2.0)? }),
                    "w1" => Ok(Probe::W1),
                    other => Err(DivError::InvalidInput(format!("unknown probe '{other}'"))),
                }
            })
            .collect()
    }

    pub fn defaults() -> Vec<Probe> {
        vec![Probe::Energy { alpha: 1.0 }, Probe::Fourier { s: 2.0 }, Probe::W1]
    }

    /// Evaluates the probe between the ensemble law and the equilibrium sample.
    pub fn evaluate(&self, law: &WeightedSampleSet, eq: &WeightedSampleSet, quad: &QuadratureSpec) -> Result<DivergenceReport> {
        match *self {
            Probe::Energy { alpha: 1.0 } => energy1_via_cdf(law, eq),
            Probe::Energy { alpha } => energy_sq(law, eq, EnergyOrder::euclidean(alpha)?, DEFAULT_MOMENT_TOL),
            Probe::Fourier { s } => fourier_metric(law, eq, &FourierOrder::new(s, 1)?, quad, DEFAULT_MOMENT_TOL),
            Probe::W1 => wasserstein_1d(law, eq, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Every agent at wealth 1.
    DeltaOne,
    /// Agents at the equilibrium quantiles (k + ½)/N.
    Equilibrium,
    /// N independent equilibrium draws; the t = 0 probes then sit at the
    /// Monte Carlo noise floor of an N-sample.
    EquilibriumDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: f64,
    pub probe: String,
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub n: usize,
    pub horizon: f64,
    pub checkpoints: usize,
    pub seed: u64,
    pub initial: InitialCondition,
    pub probes: Vec<Probe>,
    pub equilibrium_points: usize,
    pub quadrature: QuadratureSpec,
}

impl RelaxationConfig {
    pub fn new(n: usize, horizon: f64, checkpoints: usize, seed: u64) -> Self {
        Self {
            n,
            horizon,
            checkpoints,
            seed,
            initial: InitialCondition::DeltaOne,
            probes: Probe::defaults(),
            equilibrium_points: EQUILIBRIUM_POINTS,
            quadrature: QuadratureSpec {
                work_budget: 1e8,
                ..QuadratureSpec::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub entries: Vec<TraceEntry>,
    /// (time, mean wealth) at every checkpoint.
    pub means: Vec<(f64, f64)>,
    pub pareto_index: f64,
    /// Reference decay exponent of the Fourier-space estimate; recorded, not asserted.
    pub decay_exponent_reference: f64,
    pub params: TradeParams,
    pub config: RelaxationConfig,
    pub redraws: u64,
    pub truncations: u64,
    pub final_wealths: Vec<f64>,
}

impl RelaxationTrace {
    /// Values of one probe in checkpoint order.
    pub fn series(&self, probe: &Probe) -> Vec<(f64, f64)> {
        let label = probe.label();
        self.entries
            .iter()
            .filter(|e| e.probe == label)
            .map(|e| (e.time, e.value))
            .collect()
    }

    /// Entries only, as serialized by the CLI.
    pub fn entries_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }
}

fn initial_state(params: &TradeParams, cfg: &RelaxationConfig) -> Result<EnsembleState> {
    match cfg.initial {
        InitialCondition::DeltaOne => EnsembleState::delta_one(cfg.n, *params, cfg.seed),
        InitialCondition::Equilibrium => {
            let eq = equilibrium_sample(params.pareto_index(), cfg.n)?;
            EnsembleState::new(eq.coords().to_vec(), *params, cfg.seed)
        }
        InitialCondition::EquilibriumDraw => {
            EnsembleState::new(equilibrium_draw(params.pareto_index(), cfg.n, cfg.seed)?, *params, cfg.seed)
        }
    }
}

/// `n` independent inverse-Gamma draws by inversion. The stream is kept
/// apart from the one driving the trades.
pub fn equilibrium_draw(mu: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(mu > 1.0) {
        return Err(DivError::InvalidInput(format!("the equilibrium index must exceed 1, got {mu}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e9a1_d7a3_0001);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(f64::EPSILON..1.0)).collect();
    Ok(u.into_par_iter().map(|q| 1.0 / gamma_quantile(mu, mu - 1.0, q)).collect())
}

fn checkpoint_times(horizon: f64, checkpoints: usize) -> Vec<f64> {
    (0..=checkpoints).map(|k| horizon * k as f64 / checkpoints as f64).collect()
}

/// Runs the simulator and measures each probe against the equilibrium at
/// `checkpoints + 1` uniformly spaced times (t = 0 included).
pub fn relaxation_trace(params: &TradeParams, cfg: &RelaxationConfig) -> Result<RelaxationTrace> {
    params.validate()?;
    if cfg.checkpoints == 0 || !(cfg.horizon > 0.0) {
        return Err(DivError::InvalidInput("need a positive horizon and at least one checkpoint".into()));
    }
    let eq = equilibrium_sample(params.pareto_index(), cfg.equilibrium_points)?;
    let mut state = initial_state(params, cfg)?;
    let mut entries = Vec::new();
    let mut means = Vec::new();
    for t in checkpoint_times(cfg.horizon, cfg.checkpoints) {
        state.advance_to(t);
        let law = state.to_samples()?;
        let reports: Vec<DivergenceReport> = cfg
            .probes
            .iter()
            .map(|p| p.evaluate(&law, &eq, &cfg.quadrature))
            .collect::<Result<_>>()?;
        for (p, r) in cfg.probes.iter().zip(reports) {
            entries.push(TraceEntry {
                time: state.time(),
                probe: p.label(),
                value: r.value,
                error_estimate: r.error_estimate,
            });
        }
        means.push((state.time(), state.mean()));
    }
    Ok(RelaxationTrace {
        entries,
        means,
        pareto_index: params.pareto_index(),
        decay_exponent_reference: params.decay_exponent_reference(),
        params: *params,
        config: cfg.clone(),
        redraws: state.redraws,
        truncations: state.truncations,
        final_wealths: state.wealths,
    })
}

/// Mean wealth at each checkpoint for independent replicas (seeds
/// `seed, seed+1, ...`), run in parallel.
pub fn replica_means(params: &TradeParams, n: usize, horizon: f64, checkpoints: usize, seed: u64, replicas: usize) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut state = EnsembleState::delta_one(n, *params, seed + r as u64)?;
            Ok(checkpoint_times(horizon, checkpoints)
                .into_iter()
                .map(|t| {
                    state.advance_to(t);
                    state.mean()
                })
                .collect())
        })
        .collect()
}

/// Log-linear decay fit over the window before the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
    pub first: usize,
    pub last: usize,
}

/// Fits log(value) against time from the first positive-time checkpoint up
/// to the last one still above twice the plateau (minimum of the final
/// third of the series).
pub fn decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 4 {
        return Err(DivError::InvalidInput("decay fit needs at least 4 checkpoints".into()));
    }
    let tail_start = series.len() - series.len() / 3;
    let plateau = series[tail_start..].iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let first = series.iter().position(|p| p.0 > 0.0).unwrap_or(1);
    let mut last = first;
    for (k, p) in series.iter().enumerate().skip(first) {
        if p.1 > 2.0 * plateau {
            last = k;
        } else {
            break;
        }
    }
    if last < first + 2 {
        last = (first + 2).min(series.len() - 1);
    }
    let window = &series[first..=last];
    if window.iter().any(|p| !(p.1 > 0.0)) {
        return Err(DivError::InvalidInput("decay fit needs positive values".into()));
    }
    let x: Vec<f64> = window.iter().map(|p| p.0).collect();
    let y: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let (rate, _, r2) = linear_fit(&x, &y);
    Ok(DecayFit { rate, r2, first, last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params() {
        let p = TradeParams::new(0.5, 0.5).unwrap();
        assert_eq!(p.pareto_index(), 3.0);
        assert!((p.decay_exponent_reference() + 1.125).abs() < 1e-15);
        assert!(TradeParams::new(1.0, 0.5).is_err());
        assert!(TradeParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn eta_moments() {
        for law in [EtaLaw::TwoPoint, EtaLaw::UniformSymmetric] {
            let p = TradeParams { eta_law: law, ..TradeParams::new(0.3, 0.4).unwrap() };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| p.draw_eta(&mut rng)).collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let v = draws.iter().map(|x| x * x).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.01);
            assert!((v - 0.4).abs() < 0.01);
        }
    }

    #[test]
    fn fixed_point_without_noise_or_drift() {
        let p = TradeParams {
            lambda: 0.0,
            sigma: 0.0,
            eta_law: EtaLaw::TwoPoint,
            clamp_negative: ClampPolicy::RejectRedraw,
            epsilon: 1.0,
            conserve_mean: false,
        };
        let mut s = EnsembleState::new(vec![0.5, 1.0, 2.0, 3.5], p, 3).unwrap();
        s.step(100);
        assert_eq!(s.wealths, vec![0.5, 1.0, 2.0, 3.5]);
        assert_eq!(s.time(), 25.0);
        let mut one = EnsembleState::delta_one(2, p, 0).unwrap();
        one.step(1);
        assert_eq!(one.wealths, vec![1.0, 1.0]);
    }

    #[test]
    fn wealth_stays_nonnegative_under_both_policies() {
        for policy in [ClampPolicy::RejectRedraw, ClampPolicy::Truncate] {
            let p = TradeParams {
                clamp_negative: policy,
                epsilon: 1.0,
                ..TradeParams::new(0.5, 0.5).unwrap()
            };
            let mut s = EnsembleState::delta_one(500, p, 9).unwrap();
            s.step(20_000);
            assert!(s.wealths.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn determinism() {
        let p = TradeParams::new(0.5, 0.5).unwrap();
        let mut a = EnsembleState::delta_one(100, p, 42).unwrap();
        let mut b = EnsembleState::delta_one(100, p, 42).unwrap();
        a.step(5000);
        b.step(5000);
        assert_eq!(a.wealths, b.wealths);
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for (a, b) in [(3.0, 2.0), (1.5, 0.5), (11.0, 10.0)] {
            for p in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
                let y = gamma_quantile(a, b, p);
                let back = gamma_lr(a, b * y);
                assert!((back - p).abs() < 1e-12 + 1e-10 * p.min(1.0 - p), "a={a} p={p}: {back}");
            }
        }
    }

    #[test]
    fn equilibrium_sample_mean_and_hill() {
        let s = equilibrium_sample(3.0, 100_000).unwrap();
        let m = s.mean()[0];
        assert!((m - 1.0).abs() < 0.01, "{m}");
        let h = tail_index(s.coords(), 1000).unwrap();
        assert!((h - 3.0).abs() < 0.4, "{h}");
    }

    #[test]
    fn tail_index_argument_checks() {
        let x: Vec<f64> = (1..=200).map(|k| k as f64).collect();
        assert!(tail_index(&x, 49).is_err());
        assert!(tail_index(&x, 101).is_err());
        assert!(tail_index(&x, 100).is_ok());
    }

    #[test]
    fn probe_parsing() {
        let p = Probe::parse_list("energy:1,fourier:2,w1").unwrap();
        assert_eq!(p, Probe::defaults());
        assert!(Probe::parse_list("foo").is_err());
    }

    #[test]
    fn decay_fit_on_exponential() {
        let s: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, (-0.3 * k as f64).exp() + 1e-4)).collect();
        let f = decay_fit(&s).unwrap();
        assert!(f.rate < 0.0 && f.r2 > 0.99);
    }
}
