//! Random defect maps and yield statistics.
//!
//! Every trial draws from its own ChaCha8 stream, selected by the trial index
//! under a shared master seed, so a trial's defect map depends only on
//! `(seed, trial)` and results are identical for any worker count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defect::{ideal_peak, Defect, DefectMap, EfficiencyMode, PoledWaveguide};
use crate::device::WaveguideSpec;
use crate::error::{Error, Result};

const Z95: f64 = 1.96;

/// Defect width law. Widths are integer micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthDistribution {
    PoissonUm { mean_um: f64 },
}

impl WidthDistribution {
    pub fn poisson(mean_um: f64) -> Result<Self> {
        if !(mean_um > 0.0 && mean_um.is_finite()) {
            return Err(Error::invalid("mean_um", format!("must be > 0, got {mean_um}")));
        }
        Ok(Self::PoissonUm { mean_um })
    }

    pub fn mean_um(&self) -> f64 {
        match *self {
            Self::PoissonUm { mean_um } => mean_um,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::PoissonUm { mean_um } => Poisson::new(mean_um)
                .expect("mean validated at construction")
                .sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub mode: EfficiencyMode,
    /// Worker-count hint; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threshold: 0.9,
            mode: EfficiencyMode::PeakInWindow,
            threads: None,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_mode(mut self, mode: EfficiencyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid(
                "threshold",
                format!("must lie in (0, 1], got {}", self.threshold),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "worker count must be >= 1"));
        }
        Ok(())
    }
}

/// RNG stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws `n_defects` defects with uniform positions in (0, L) and Poisson
/// widths. Zero-width draws are kept.
pub fn sample_defect_map<R: Rng + ?Sized>(
    spec: &WaveguideSpec,
    n_defects: usize,
    dist: &WidthDistribution,
    rng: &mut R,
) -> DefectMap {
    let l = spec.length_um();
    let mut defects: Vec<Defect> = Vec::with_capacity(n_defects);
    for _ in 0..n_defects {
        let position = loop {
            let x = rng.random::<f64>() * l;
            if x > 0.0 && !defects.iter().any(|d| d.position_um == x) {
                break x;
            }
        };
        let width = dist.sample(rng);
        defects.push(Defect::new(position, width));
    }
    defects.sort_by(|a, b| a.position_um.total_cmp(&b.position_um));
    DefectMap::new(defects).expect("sampled positions are distinct and in range")
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub relative_efficiency: f64,
    pub zero_width_draws: usize,
}

/// Relative efficiency of every trial, in trial order.
pub fn run_trials(
    spec: &WaveguideSpec,
    n_defects: usize,
    dist: &WidthDistribution,
    cfg: &McConfig,
) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let ideal = ideal_peak(spec);
    let one = |trial: usize| -> TrialOutcome {
        let mut rng = trial_rng(cfg.seed, trial as u64);
        let map = sample_defect_map(spec, n_defects, dist, &mut rng);
        let zero_width_draws = map.zero_width_count();
        let wg = PoledWaveguide::with_ideal_peak(*spec, map, ideal)
            .expect("sampled map lies within the waveguide");
        TrialOutcome {
            relative_efficiency: wg.relative_efficiency(cfg.mode),
            zero_width_draws,
        }
    };
    let run = || (0..cfg.trials).into_par_iter().map(one).collect::<Vec<_>>();
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Fraction of trials reaching the threshold, with a normal-approximation
/// 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldEstimate {
    pub defect_count: usize,
    pub length_cm: f64,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    /// 1.96·√(p̂(1 − p̂)/trials), before clamping.
    pub half_width: f64,
    /// Interval clamped to [0, 1].
    pub ci95: (f64, f64),
    pub zero_width_draws: usize,
}

impl YieldEstimate {
    fn from_outcomes(
        outcomes: &[TrialOutcome],
        threshold: f64,
        defect_count: usize,
        length_cm: f64,
    ) -> Self {
        let trials = outcomes.len();
        let successes = outcomes
            .iter()
            .filter(|o| o.relative_efficiency >= threshold)
            .count();
        let p_hat = successes as f64 / trials as f64;
        let half_width = Z95 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
        Self {
            defect_count,
            length_cm,
            trials,
            successes,
            p_hat,
            half_width,
            ci95: ((p_hat - half_width).max(0.0), (p_hat + half_width).min(1.0)),
            zero_width_draws: outcomes.iter().map(|o| o.zero_width_draws).sum(),
        }
    }
}

pub fn success_probability(
    spec: &WaveguideSpec,
    n_defects: usize,
    dist: &WidthDistribution,
    cfg: &McConfig,
) -> Result<YieldEstimate> {
    let outcomes = run_trials(spec, n_defects, dist, cfg)?;
    Ok(YieldEstimate::from_outcomes(
        &outcomes,
        cfg.threshold,
        n_defects,
        spec.length_cm(),
    ))
}

/// Normalized histogram of relative efficiency over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mass: Vec<f64>,
    pub mean: f64,
}

impl Histogram {
    /// Index of the most populated bin (lowest index on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }
}

pub fn efficiency_distribution(
    spec: &WaveguideSpec,
    n_defects: usize,
    dist: &WidthDistribution,
    cfg: &McConfig,
    bins: usize,
) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::invalid("bins", "need at least 2 bins"));
    }
    let outcomes = run_trials(spec, n_defects, dist, cfg)?;
    let mut counts = vec![0usize; bins];
    for o in &outcomes {
        let idx = (o.relative_efficiency.clamp(0.0, 1.0) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let total = outcomes.len() as f64;
    let mass = counts.iter().map(|&c| c as f64 / total).collect();
    let bin_edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mean = outcomes.iter().map(|o| o.relative_efficiency).sum::<f64>() / total;
    Ok(Histogram {
        bin_edges,
        counts,
        mass,
        mean,
    })
}

/// One yield estimate per length, all under the same master seed.
pub fn probability_vs_length(
    template: &WaveguideSpec,
    n_defects: usize,
    lengths_cm: &[f64],
    dist: &WidthDistribution,
    cfg: &McConfig,
) -> Result<Vec<YieldEstimate>> {
    lengths_cm
        .iter()
        .map(|&l| {
            let spec = template.with_length_cm(l)?;
            success_probability(&spec, n_defects, dist, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> WaveguideSpec {
        WaveguideSpec::uv_to_telecom(2.0, 3.07).unwrap()
    }

    #[test]
    fn zero_defects_gives_empty_map_and_certain_success() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let map = sample_defect_map(&spec(), 0, &dist, &mut trial_rng(1, 0));
        assert!(map.is_empty());
        let est = success_probability(&spec(), 0, &dist, &McConfig::new(200, 7)).unwrap();
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.half_width, 0.0);
    }

    #[test]
    fn poisson_width_moments() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let mut rng = trial_rng(2024, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((12.2..=12.4).contains(&mean), "mean {mean}");
        assert!((11.9..=12.7).contains(&var), "var {var}");
        assert!(draws.iter().all(|w| w.fract() == 0.0 && *w >= 0.0));
    }

    #[test]
    fn sampled_maps_are_sorted_and_in_range() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let s = spec();
        for t in 0..50 {
            let map = sample_defect_map(&s, 10, &dist, &mut trial_rng(9, t));
            assert_eq!(map.len(), 10);
            assert!(map.defects().windows(2).all(|w| w[0].position_um < w[1].position_um));
            assert!(map.iter().all(|d| d.position_um > 0.0 && d.position_um < s.length_um()));
        }
    }

    #[test]
    fn same_seed_same_map() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let a = sample_defect_map(&spec(), 5, &dist, &mut trial_rng(42, 17));
        let b = sample_defect_map(&spec(), 5, &dist, &mut trial_rng(42, 17));
        let c = sample_defect_map(&spec(), 5, &dist, &mut trial_rng(42, 18));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let base = McConfig::new(300, 11);
        let one = run_trials(&spec(), 2, &dist, &base.with_threads(1)).unwrap();
        let many = run_trials(&spec(), 2, &dist, &base.with_threads(4)).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn p_hat_nonincreasing_in_threshold() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let outcomes = run_trials(&spec(), 2, &dist, &McConfig::new(400, 3)).unwrap();
        let mut last = 1.0;
        for th in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let p = YieldEstimate::from_outcomes(&outcomes, th, 2, 2.0).p_hat;
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn histogram_of_defect_free_waveguide() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        let h = efficiency_distribution(&spec(), 0, &dist, &McConfig::new(100, 1), 20).unwrap();
        assert_eq!(h.mass[19], 1.0);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(efficiency_distribution(&spec(), 0, &dist, &McConfig::new(100, 1), 1).is_err());
    }

    #[test]
    fn config_validation() {
        let dist = WidthDistribution::poisson(12.3).unwrap();
        assert!(run_trials(&spec(), 1, &dist, &McConfig::new(0, 1)).is_err());
        assert!(run_trials(&spec(), 1, &dist, &McConfig::new(10, 1).with_threshold(1.5)).is_err());
        assert!(WidthDistribution::poisson(0.0).is_err());
    }
}
