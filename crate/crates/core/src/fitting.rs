//! Least-squares fitting: linear, through-origin, and damped nonlinear, plus
//! the named efficiency and noise fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cme::{eta_sin2, lossy_gain_factor};
use crate::device::LossSet;
use crate::error::{Error, Result};
use crate::noise::{noise_lossless, noise_lossy, NoiseParams};

/// Two-sided 95 % normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// Absent when the fit has no residual degrees of freedom.
    pub stderr: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
}

impl FitParam {
    fn new(name: &str, value: f64, stderr: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            value,
            stderr,
            ci95_lo: stderr.map(|s| value - Z95 * s),
            ci95_hi: stderr.map(|s| value + Z95 * s),
        }
    }

    pub fn ci_contains(&self, x: f64) -> bool {
        match (self.ci95_lo, self.ci95_hi) {
            (Some(lo), Some(hi)) => lo <= x && x <= hi,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub r2: f64,
    /// y − model, in input order.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of a parameter that the fit is known to produce.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("fit has no parameter {name}"))
            .value
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

fn r_squared(y: &[f64], residuals: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    if sst == 0.0 {
        if ssr == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ssr / sst
    }
}

fn check_xy(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid("data", format!("x has {} values, y has {}", x.len(), y.len())));
    }
    if let Some(i) = x.iter().zip(y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::invalid("data", format!("non-finite value at index {i}")));
    }
    Ok(())
}

/// Ordinary least squares y = slope·x + intercept.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_xy(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateDesign(format!("need >= 2 points, got {n}")));
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    let ym = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign("all x values are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let (se_slope, se_icpt) = if n > 2 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - 2) as f64;
        let se_s = (s2 / sxx).sqrt();
        let se_i = (s2 * (1.0 / n as f64 + xm * xm / sxx)).sqrt();
        (Some(se_s), Some(se_i))
    } else {
        (None, None)
    };
    Ok(FitResult {
        params: vec![FitParam::new("slope", slope, se_slope), FitParam::new("intercept", intercept, se_icpt)],
        r2: r_squared(y, &residuals),
        residuals,
        iterations: 1,
        converged: true,
    })
}

/// Least squares y = slope·x.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_xy(x, y)?;
    let n = x.len();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if n == 0 || sxx == 0.0 {
        return Err(Error::DegenerateDesign("no nonzero x values".into()));
    }
    let slope = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - slope * a).collect();
    let se = (n > 1).then(|| {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - 1) as f64;
        (s2 / sxx).sqrt()
    });
    Ok(FitResult {
        params: vec![FitParam::new("slope", slope, se)],
        r2: r_squared(y, &residuals),
        residuals,
        iterations: 1,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOptions {
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub initial_damping: f64,
    pub rank_tol: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            initial_damping: 1e-3,
            rank_tol: 1e-12,
        }
    }
}

/// A parameterized scalar model f(x; p).
pub struct NlsProblem<'a, F: Fn(f64, &[f64]) -> f64> {
    pub model: F,
    pub data: &'a [(f64, f64)],
    pub names: &'a [&'a str],
    pub init: &'a [f64],
    /// Per-parameter (lo, hi); None means unbounded.
    pub bounds: Option<&'a [(f64, f64)]>,
}

fn jacobian<F: Fn(f64, &[f64]) -> f64>(model: &F, data: &[(f64, f64)], p: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), p.len());
    let mut work = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1.0);
        work[k] = p[k] + h;
        let plus: Vec<f64> = data.iter().map(|&(x, _)| model(x, &work)).collect();
        work[k] = p[k] - h;
        for (i, &(x, _)) in data.iter().enumerate() {
            j[(i, k)] = (plus[i] - model(x, &work)) / (2.0 * h);
        }
        work[k] = p[k];
    }
    j
}

fn residuals<F: Fn(f64, &[f64]) -> f64>(model: &F, data: &[(f64, f64)], p: &[f64]) -> Vec<f64> {
    data.iter().map(|&(x, y)| y - model(x, p)).collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Unit-diagonal scaling of JᵀJ followed by a pivot check; names the first
/// parameter whose column is (numerically) dependent on the others.
fn check_rank(jtj: &DMatrix<f64>, names: &[&str], tol: f64) -> Result<()> {
    let n = jtj.nrows();
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)]).collect();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::RankDeficient { parameter: names[i].to_string() });
    }
    let mut a = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]).sqrt());
    // Cholesky-style elimination without pivoting keeps the column-to-name map
    for k in 0..n {
        let pivot = a[(k, k)];
        if pivot < tol {
            return Err(Error::RankDeficient { parameter: names[k].to_string() });
        }
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    Ok(())
}

fn clamp(p: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Damped Gauss–Newton with Marquardt scaling and central-difference
/// Jacobian. A run that hits the iteration cap is returned with
/// `converged = false`.
pub fn fit_nls<F: Fn(f64, &[f64]) -> f64>(problem: &NlsProblem<'_, F>, opts: &NlsOptions) -> Result<FitResult> {
    let NlsProblem { model, data, names, init, bounds } = problem;
    let np = init.len();
    if names.len() != np {
        return Err(Error::invalid("names", format!("{} names for {} parameters", names.len(), np)));
    }
    if data.len() < np {
        return Err(Error::DegenerateDesign(format!("{} points for {} parameters", data.len(), np)));
    }
    if let Some(b) = bounds {
        if b.len() != np {
            return Err(Error::invalid("bounds", format!("{} bounds for {} parameters", b.len(), np)));
        }
        for (k, (&v, &(lo, hi))) in init.iter().zip(b.iter()).enumerate() {
            if !(lo <= v && v <= hi) {
                return Err(Error::invalid("init", format!("{} = {v} outside [{lo}, {hi}]", names[k])));
            }
        }
    }

    let mut p = init.to_vec();
    let mut r = residuals(model, data, &p);
    let mut ssr = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        if ssr == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(model, data, &p);
        let jtj = j.transpose() * &j;
        check_rank(&jtj, names, opts.rank_tol)?;
        let g = j.transpose() * DVector::from_column_slice(&r);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] *= 1.0 + lambda;
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, *bounds);
            let step = p
                .iter()
                .zip(&trial)
                .map(|(a, b)| (b - a).abs() / a.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            let rt = residuals(model, data, &trial);
            let st = sum_sq(&rt);
            if st < ssr {
                p = trial;
                r = rt;
                ssr = st;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step < opts.rel_tol {
                    converged = true;
                }
                break;
            }
            if step < opts.rel_tol {
                // no smaller step can improve: at the minimum to working precision
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            converged = true;
            break;
        }
    }

    let j = jacobian(model, data, &p);
    let jtj = j.transpose() * &j;
    check_rank(&jtj, names, opts.rank_tol)?;
    let dof = data.len() - np;
    let cov = if dof > 0 {
        jtj.try_inverse().map(|inv| inv * (ssr / dof as f64))
    } else {
        None
    };
    let params = names
        .iter()
        .enumerate()
        .map(|(k, name)| FitParam::new(name, p[k], cov.as_ref().map(|c| c[(k, k)].max(0.0).sqrt())))
        .collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();
    Ok(FitResult {
        params,
        r2: r_squared(&y, &r),
        residuals: r,
        iterations,
        converged,
    })
}

/// Through-origin fit of the lowest-power points, η_int = η_nor·G·P₂^out,
/// with G the loss-corrected gain factor. Input order does not matter.
pub fn fit_efficiency_low_conversion(
    data: &[(f64, f64)],
    losses: &LossSet,
    length_cm: f64,
    n_points: usize,
) -> Result<FitResult> {
    if n_points == 0 || n_points > data.len() {
        return Err(Error::invalid("n_points", format!("must be in 1..={}, got {n_points}", data.len())));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let used = &sorted[..n_points];
    let x: Vec<f64> = used.iter().map(|d| d.0).collect();
    let y: Vec<f64> = used.iter().map(|d| d.1).collect();
    let fit = fit_through_origin(&x, &y)?;
    let gain = lossy_gain_factor(losses, length_cm);
    let slope = &fit.params[0];
    Ok(FitResult {
        params: vec![FitParam::new("eta_nor", slope.value / gain, slope.stderr.map(|s| s / gain))],
        ..fit
    })
}

/// Full-sweep fit of sin²(√(η_nor P)·L).
pub fn fit_efficiency_sin2(data: &[(f64, f64)], length_cm: f64) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::invalid("data", "must be nonempty"));
    }
    let model = |p: f64, q: &[f64]| eta_sin2(q[0], p, length_cm);
    // the sin² landscape is multimodal in η_nor; start from the best grid point
    let ssr_at = |e: f64| data.iter().map(|&(p, y)| (y - eta_sin2(e, p, length_cm)).powi(2)).sum::<f64>();
    let start = (0..=400)
        .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 400.0))
        .min_by(|a, b| ssr_at(*a).total_cmp(&ssr_at(*b)))
        .unwrap();
    let bounds = [(0.0, f64::INFINITY)];
    fit_nls(
        &NlsProblem {
            model,
            data,
            names: &["eta_nor"],
            init: &[start],
            bounds: Some(&bounds),
        },
        &NlsOptions::default(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModelKind {
    Lossless,
    Lossy,
}

/// Closed-form one-parameter fit of the noise coefficient a; the remaining
/// noise parameters are held fixed (their `a` is ignored).
pub fn fit_noise(data: &[(f64, f64)], fixed: &NoiseParams, kind: NoiseModelKind) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::invalid("data", "must be nonempty"));
    }
    let unit = fixed.with_a(1.0)?;
    let basis: Vec<f64> = data
        .iter()
        .map(|&(p, _)| match kind {
            NoiseModelKind::Lossless => noise_lossless(p, &unit),
            NoiseModelKind::Lossy => noise_lossy(p, &unit),
        })
        .collect::<Result<_>>()?;
    let smm: f64 = basis.iter().map(|m| m * m).sum();
    if smm == 0.0 {
        return Err(Error::DegenerateDesign("model predicts zero noise at every point".into()));
    }
    let a = basis.iter().zip(data).map(|(m, d)| m * d.1).sum::<f64>() / smm;
    let residuals: Vec<f64> = basis.iter().zip(data).map(|(m, d)| d.1 - a * m).collect();
    let n = data.len();
    let se = (n > 1).then(|| (sum_sq(&residuals) / (n - 1) as f64 / smm).sqrt());
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();
    Ok(FitResult {
        params: vec![FitParam::new("a", a, se)],
        r2: r_squared(&y, &residuals),
        residuals,
        iterations: 1,
        converged: true,
    })
}

/// Rescales a fitted η_nor by the simulated-to-measured peak ratio.
pub fn correct_higher_modes(eta_nor_fit: f64, eta_peak_measured: f64, eta_peak_simulated: f64) -> Result<f64> {
    if !(eta_peak_measured > 0.0) {
        return Err(Error::invalid(
            "eta_peak_measured",
            format!("must be > 0, got {eta_peak_measured}"),
        ));
    }
    Ok(eta_nor_fit * eta_peak_simulated / eta_peak_measured)
}
