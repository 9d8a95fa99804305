//! divkit: generalized Energy distances, Fourier-based metrics, Wasserstein
//! distances, entropy and Fisher divergences, Gini-family functionals, and
//! the whitening transforms that make them scale invariant.
//!
//! The crate also carries a Monte Carlo wealth-exchange simulator whose
//! relaxation to its inverse-Gamma equilibrium is tracked with these
//! divergences, and a model-comparison benchmark scored by whitened Energy
//! divergence.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`sample`] | [`WeightedSampleSet`], CSV I/O, moments, covariance, power sums |
//! | [`energy`] | Energy distance of any admissible order, Cramér, Gini family |
//! | [`fourier`] | characteristic functions, `F_s` by quadrature, Energy↔Fourier constant |
//! | [`transport`] | 1-D quantile coupling, transportation simplex, W₁ bounds |
//! | [`whitening`] | Cholesky and ZCA-cor maps, whitened divergences |
//! | [`density`], [`infodiv`] | grid/reference densities, entropy, KL, Fisher |
//! | [`kinetics`] | binary wealth-exchange simulator and relaxation traces |
//! | [`bench`] | synthetic ESG benchmark with four predictive models |

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod density;
pub mod energy;
pub mod error;
pub mod fourier;
pub mod infodiv;
pub mod kinetics;
pub mod numeric;
pub mod report;
pub mod sample;
pub mod selftest;
pub mod transport;
pub mod whitening;

pub use error::{DivError, Result};
pub use report::{DivergenceReport, Family};
pub use sample::{load_samples, Norm, WeightedSampleSet};
