use qfcsim::cme::eta_sin2;
use qfcsim::fitting::{fit_linear, fit_nls, fit_noise, NlsOptions, NlsProblem, NoiseModelKind};
use qfcsim::noise::{noise, NoiseParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noise_params(a: f64) -> NoiseParams {
    NoiseParams::new(a, 0.20, 0.12, 14.45, 0.93, 2.0).unwrap()
}

#[test]
fn linear_slope_coverage() {
    let x: Vec<f64> = (0..60).map(|i| i as f64 / 10.0).collect();
    let eps = Normal::new(0.0, 0.5).unwrap();
    let mut hits = 0;
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 0.7 + eps.sample(&mut rng)).collect();
        let fit = fit_linear(&x, &y).unwrap();
        hits += usize::from(fit.param("slope").unwrap().ci_contains(1.5));
    }
    let coverage = hits as f64 / 1000.0;
    assert!((0.93..=0.97).contains(&coverage), "{coverage}");
}

#[test]
fn noise_coefficient_coverage() {
    let truth = noise_params(1e6);
    let powers: Vec<f64> = (1..=40).map(|i| i as f64 * 2.5e-3).collect();
    let clean: Vec<f64> = powers.iter().map(|&p| noise(p, &truth).unwrap()).collect();
    let sigma = 0.02 * clean.iter().cloned().fold(0.0, f64::max);
    let eps = Normal::new(0.0, sigma).unwrap();
    let mut hits = 0;
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let data: Vec<(f64, f64)> = powers.iter().zip(&clean).map(|(&p, &n)| (p, n + eps.sample(&mut rng))).collect();
        let fit = fit_noise(&data, &truth, NoiseModelKind::Lossy).unwrap();
        hits += usize::from(fit.param("a").unwrap().ci_contains(1e6));
    }
    let coverage = hits as f64 / 500.0;
    assert!(coverage >= 0.93, "{coverage}");
}

#[test]
fn lossy_noise_fit_beats_lossless_on_lossy_data() {
    let truth = noise_params(1e6);
    let data: Vec<(f64, f64)> = (1..=30)
        .map(|i| {
            let p = i as f64 * 5e-3;
            (p, noise(p, &truth).unwrap())
        })
        .collect();
    let lossy = fit_noise(&data, &truth, NoiseModelKind::Lossy).unwrap();
    let lossless = fit_noise(&data, &truth, NoiseModelKind::Lossless).unwrap();
    assert!((lossy.value("a") / 1e6 - 1.0).abs() < 1e-12);
    assert!(lossless.ssr() > lossy.ssr());
}

fn mean_ci_width<F: Fn(u64, usize) -> f64>(replication: usize, width: F) -> f64 {
    (0..50).map(|seed| width(seed, replication)).sum::<f64>() / 50.0
}

#[test]
fn ci_width_scales_with_replication() {
    let base: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
    let eps = Normal::new(0.0, 0.3).unwrap();
    let linear = |seed: u64, k: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + k as u64);
        let x: Vec<f64> = base.iter().cycle().take(base.len() * k).copied().collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + eps.sample(&mut rng)).collect();
        let p = fit_linear(&x, &y).unwrap();
        let s = p.param("slope").unwrap();
        s.ci95_hi.unwrap() - s.ci95_lo.unwrap()
    };

    let powers: Vec<f64> = (1..=20).map(|i| i as f64 * 0.01).collect();
    let eta_eps = Normal::new(0.0, 0.01).unwrap();
    let sin2 = |seed: u64, k: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 37 + k as u64);
        let data: Vec<(f64, f64)> = powers
            .iter()
            .cycle()
            .take(powers.len() * k)
            .map(|&p| (p, eta_sin2(8.31, p, 2.0) + eta_eps.sample(&mut rng)))
            .collect();
        let problem = NlsProblem {
            model: |p: f64, th: &[f64]| eta_sin2(th[0], p, 2.0),
            data: &data,
            names: &["eta_nor"],
            init: &[6.0],
            bounds: None,
        };
        let s = fit_nls(&problem, &NlsOptions::default()).unwrap();
        let e = s.param("eta_nor").unwrap();
        e.ci95_hi.unwrap() - e.ci95_lo.unwrap()
    };

    for (name, w1, w4) in [
        ("linear", mean_ci_width(1, linear), mean_ci_width(4, linear)),
        ("sin2", mean_ci_width(1, sin2), mean_ci_width(4, sin2)),
    ] {
        let ratio = w1 / w4;
        assert!((ratio / 2.0 - 1.0).abs() <= 0.15, "{name}: {ratio}");
    }
}
