use divkit::energy::{energy_sq, EnergyOrder};
use divkit::fourier::{c_alpha, fourier_metric, FourierOrder, QuadratureSpec};
use divkit::WeightedSampleSet;

/// E|m + Z|^(-1/2) for Z ~ N(0, tau^2), by t = ±u^2 which removes the
/// singularity, then composite Simpson.
fn smoothed_kernel(m: f64, tau: f64) -> f64 {
    let p = |t: f64| (-(t - m).powi(2) / (2.0 * tau * tau)).exp() / (tau * (2.0 * std::f64::consts::PI).sqrt());
    let f = |u: f64| 2.0 * (p(u * u) + p(-u * u));
    let upper = (m.abs() + 14.0 * tau).sqrt();
    let n = 20_000;
    let h = upper / n as f64;
    let mut s = f(0.0) + f(upper);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn smoothed_energy(mu: &WeightedSampleSet, nu: &WeightedSampleSet, h: f64) -> f64 {
    let tau = 2f64.sqrt() * h;
    let sum = |a: &WeightedSampleSet, b: &WeightedSampleSet| {
        let mut acc = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                acc += a.weights()[i] * b.weights()[j] * smoothed_kernel(a.point(i)[0] - b.point(j)[0], tau);
            }
        }
        acc
    };
    // the order -1/2 kernel is positive definite, so the sign is +1
    sum(mu, mu) + sum(nu, nu) - 2.0 * sum(mu, nu)
}

#[test]
fn negative_order_constant_matches_smoothed_energy() {
    let mu = WeightedSampleSet::new(vec![vec![0.0], vec![1.3]], None).unwrap();
    let nu = WeightedSampleSet::new(vec![vec![0.4], vec![2.0], vec![-1.0]], Some(vec![0.2, 0.5, 0.3])).unwrap();
    let (alpha, h) = (-0.5, 0.6);
    let quad = QuadratureSpec { gaussian_smoothing: h, ..QuadratureSpec::default() };
    let f = fourier_metric(&mu, &nu, &FourierOrder::new(1.0 + alpha, 1).unwrap(), &quad, 1e-9).unwrap();
    let f2 = f.diagnostic_f64("value_squared").unwrap();
    let c = c_alpha(1, alpha).unwrap();
    let oracle = smoothed_energy(&mu, &nu, h);
    assert!(oracle > 0.0);
    let gap = (c * f2 - oracle).abs();
    assert!(gap <= c * f.error_estimate + 1e-9 * oracle, "c F^2 = {}, oracle {oracle}, c err {}", c * f2, c * f.error_estimate);
    // the convention with an extra (2 pi)^-1 would be off by a factor 2 pi
    let other = c / (2.0 * std::f64::consts::PI);
    assert!((other * f2 - oracle).abs() > 0.5 * oracle);
}

#[test]
fn unsmoothed_pair_matches_the_energy_distance() {
    let mu = WeightedSampleSet::from_values(&[0.0, 1.0]).unwrap();
    let nu = WeightedSampleSet::from_values(&[0.5, 3.0]).unwrap();
    let plain = energy_sq(&mu, &nu, EnergyOrder::euclidean(1.0).unwrap(), 1e-9).unwrap().value;
    let f = fourier_metric(&mu, &nu, &FourierOrder::new(2.0, 1).unwrap(), &QuadratureSpec::default(), 1e-9).unwrap();
    let c = c_alpha(1, 1.0).unwrap();
    let f2 = f.diagnostic_f64("value_squared").unwrap();
    assert!((c * f2 - plain).abs() <= c * f.error_estimate + 1e-12, "{} vs {plain}", c * f2);
}
