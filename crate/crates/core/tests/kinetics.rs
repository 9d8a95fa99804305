use divkit::energy::{energy_sq, EnergyOrder};
use divkit::kinetics::*;
use rayon::prelude::*;

fn simulate(params: TradeParams, n: usize, horizon: f64, seed: u64) -> EnsembleState {
    let mut s = EnsembleState::delta_one(n, params, seed).unwrap();
    s.advance_to(horizon);
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn mean_is_conserved_at_every_checkpoint() {
    let params = TradeParams { conserve_mean: true, ..TradeParams::new(0.5, 0.5).unwrap() };
    for seed in 0..16 {
        let mut s = EnsembleState::delta_one(2_000, params, seed).unwrap();
        for k in 1..=10 {
            s.advance_to(2.0 * k as f64);
            assert!((s.mean() - 1.0).abs() < 1e-9, "seed {seed} t {}: {}", s.time(), s.mean());
        }
    }
}

#[test]
fn mean_is_conserved_in_expectation_across_seeds() {
    let params = TradeParams::new(0.5, 0.5).unwrap();
    let reps = replica_means(&params, 10_000, 20.0, 10, 0, 16).unwrap();
    for k in 0..=10 {
        let at: Vec<f64> = reps.iter().map(|r| r[k]).collect();
        let grand = at.iter().sum::<f64>() / 16.0;
        let var = at.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / 15.0;
        let se = (var / 16.0).sqrt();
        assert!((grand - 1.0).abs() <= 4.0 * se, "checkpoint {k}: {grand} with SE {se}");
    }
}

#[test]
fn same_seed_same_ensemble() {
    let params = TradeParams::new(0.3, 0.4).unwrap();
    let a = simulate(params, 500, 5.0, 11);
    let b = simulate(params, 500, 5.0, 11);
    let c = simulate(params, 500, 5.0, 12);
    assert_eq!(a.wealths, b.wealths);
    assert_ne!(a.wealths, c.wealths);
    assert_eq!(a.interactions, b.interactions);
}

#[test]
fn tail_index_near_equilibrium_value() {
    for (lambda, sigma, horizon) in [(0.5, 0.5, 50.0), (0.25, 0.5, 200.0)] {
        let params = TradeParams::new(lambda, sigma).unwrap();
        let target = params.pareto_index();
        let n = 10_000;
        let hills: Vec<f64> = (0..5)
            .map(|seed| tail_index(&simulate(params, n, horizon, seed).wealths, n / 50).unwrap())
            .collect();
        let m = median(hills.clone());
        assert!((m - target).abs() <= 0.2 * target, "({lambda}, {sigma}): {hills:?} vs {target}");
    }
}

#[test]
fn simulated_law_approaches_equilibrium() {
    let params = TradeParams::new(0.5, 0.5).unwrap();
    let eq = equilibrium_sample(params.pareto_index(), 4_000).unwrap();
    let order = EnergyOrder::euclidean(1.0).unwrap();
    let mut s = EnsembleState::delta_one(5_000, params, 3).unwrap();
    s.advance_to(5.0);
    let early = energy_sq(&s.to_samples().unwrap(), &eq, order, 1e-9).unwrap().value;
    s.advance_to(60.0);
    let late = energy_sq(&s.to_samples().unwrap(), &eq, order, 1e-9).unwrap().value;
    assert!(late < 0.1 * early, "early {early}, late {late}");
    // the stratified equilibrium sample itself has the right mean and tail
    assert!((eq.mean()[0] - 1.0).abs() < 1e-2);
}

#[test]
fn trace_time_axis_and_probe_count() {
    let params = TradeParams::new(0.5, 0.5).unwrap();
    let mut cfg = RelaxationConfig::new(1_000, 4.0, 4, 0);
    cfg.probes = vec![Probe::Energy { alpha: 1.0 }, Probe::W1];
    let tr = relaxation_trace(&params, &cfg).unwrap();
    let times: Vec<f64> = tr.series(&Probe::W1).iter().map(|p| p.0).collect();
    // the initial state is recorded ahead of the checkpoints
    assert_eq!(times.len(), 5);
    assert_eq!(times[0], 0.0);
    assert!((times[4] - 4.0).abs() < 1e-9);
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

fn cheap_probes(cfg: &mut RelaxationConfig) {
    cfg.probes = vec![Probe::Energy { alpha: 1.0 }, Probe::Fourier { s: 2.0 }, Probe::W1];
    cfg.quadrature.work_budget = 1e7;
    cfg.equilibrium_points = 10_000;
}

#[test]
fn equilibrium_start_stays_at_the_noise_floor() {
    // a single realization of these statistics fluctuates by a factor of a
    // few, so the floor and the trace are replica averages
    let params = TradeParams::new(0.5, 0.5).unwrap();
    let reps = 8;
    let traces: Vec<RelaxationTrace> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = RelaxationConfig::new(2_000, 20.0, 10, seed);
            cfg.initial = InitialCondition::EquilibriumDraw;
            cheap_probes(&mut cfg);
            relaxation_trace(&params, &cfg).unwrap()
        })
        .collect();
    for probe in &traces[0].config.probes {
        let avg: Vec<f64> = (0..=10)
            .map(|k| traces.iter().map(|t| t.series(probe)[k].1).sum::<f64>() / reps as f64)
            .collect();
        assert!(avg[0] > 0.0);
        assert!(avg.iter().all(|v| *v <= 2.0 * avg[0]), "{}: {avg:?}", probe.label());
    }
}

#[test]
fn fourier_probe_decays_log_linearly() {
    let params = TradeParams::new(0.5, 0.5).unwrap();
    let mut cfg = RelaxationConfig::new(2_000, 50.0, 20, 2);
    cheap_probes(&mut cfg);
    let tr = relaxation_trace(&params, &cfg).unwrap();
    let fit = decay_fit(&tr.series(&Probe::Fourier { s: 2.0 })).unwrap();
    assert!(fit.rate < 0.0 && fit.r2 >= 0.8, "{fit:?}");
    assert!(fit.last >= fit.first + 2);
}
