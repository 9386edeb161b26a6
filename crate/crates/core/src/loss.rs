//! Propagation loss from cut-back series and Fabry–Pérot fringe contrast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::fit_linear;

/// Maximum number of extrema averaged on each side of the fringe.
pub const FRINGE_AVERAGE: usize = 5;
/// Alternating extrema needed for three visible oscillation periods.
pub const MIN_EXTREMA: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutbackDataset {
    points: Vec<(f64, f64)>,
}

impl CutbackDataset {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(l, t)) in points.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid("length_cm", format!("row {i}: must be finite and >= 0, got {l}")));
            }
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid("transmission", format!("row {i}: must be in (0, 1], got {t}")));
            }
        }
        let first = points.first().map(|p| p.0);
        if points.len() < 2 || points.iter().all(|p| Some(p.0) == first) {
            return Err(Error::DegenerateDesign("cut-back needs >= 2 distinct lengths".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutbackFit {
    pub alpha_per_cm: f64,
    /// Absent with only two points.
    pub stderr: Option<f64>,
    pub r2: f64,
    /// ln T at zero length (coupling loss).
    pub intercept: f64,
}

/// OLS on (L, ln T); α is minus the slope.
pub fn cutback_fit(data: &CutbackDataset) -> Result<CutbackFit> {
    let x: Vec<f64> = data.points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = data.points.iter().map(|p| p.1.ln()).collect();
    let f = fit_linear(&x, &y)?;
    Ok(CutbackFit {
        alpha_per_cm: -f.params[0].value,
        stderr: f.params[0].stderr,
        r2: f.r2,
        intercept: f.params[1].value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeContrast {
    /// T_min / T_max.
    pub b: f64,
    pub t_max: f64,
    pub t_min: f64,
    pub maxima_found: usize,
    pub minima_found: usize,
    pub maxima_used: usize,
    pub minima_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Max,
    Min,
}

/// Interior local extrema of a sampled curve. Runs of equal values count
/// once; the curve endpoints are never extrema.
fn find_extrema(values: &[f64]) -> Vec<(Extremum, f64)> {
    let mut runs: Vec<f64> = Vec::new();
    for &v in values {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    runs.windows(3)
        .filter_map(|w| {
            if w[1] > w[0] && w[1] > w[2] {
                Some((Extremum::Max, w[1]))
            } else if w[1] < w[0] && w[1] < w[2] {
                Some((Extremum::Min, w[1]))
            } else {
                None
            }
        })
        .collect()
}

/// Fringe contrast from a transmission spectrum (frequency, transmission).
pub fn fp_contrast(spectrum: &[(f64, f64)]) -> Result<FringeContrast> {
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = sorted.iter().map(|s| s.1).collect();
    let extrema = find_extrema(&values);
    let mut maxima: Vec<f64> = extrema.iter().filter(|e| e.0 == Extremum::Max).map(|e| e.1).collect();
    let mut minima: Vec<f64> = extrema.iter().filter(|e| e.0 == Extremum::Min).map(|e| e.1).collect();
    if maxima.len() < 2 || minima.len() < 2 {
        return Err(Error::InsufficientFringes {
            maxima: maxima.len(),
            minima: minima.len(),
        });
    }
    maxima.sort_by(|a, b| b.total_cmp(a));
    minima.sort_by(|a, b| a.total_cmp(b));
    let kmax = FRINGE_AVERAGE.min(maxima.len());
    let kmin = FRINGE_AVERAGE.min(minima.len());
    let t_max = maxima[..kmax].iter().sum::<f64>() / kmax as f64;
    let t_min = minima[..kmin].iter().sum::<f64>() / kmin as f64;
    Ok(FringeContrast {
        b: t_min / t_max,
        t_max,
        t_min,
        maxima_found: maxima.len(),
        minima_found: minima.len(),
        maxima_used: kmax,
        minima_used: kmin,
    })
}

/// Facet reflectance ((n−1)/(n+1))².
pub fn facet_reflectance(n: f64) -> f64 {
    ((n - 1.0) / (n + 1.0)).powi(2)
}

/// Contrast produced by a cavity with loss α (inverse of [`fp_loss`]).
pub fn fp_forward_contrast(alpha_per_cm: f64, n: f64, length_cm: f64) -> f64 {
    let zeta = facet_reflectance(n) * (-alpha_per_cm * length_cm).exp();
    ((1.0 - zeta) / (1.0 + zeta)).powi(2)
}

/// α = ln(R/R̄)/L with R̄ = (1 − √b)/(1 + √b).
pub fn fp_loss(b: f64, n: f64, length_cm: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::invalid("b", format!("must be in (0, 1), got {b}")));
    }
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::invalid("n", format!("must be > 1, got {n}")));
    }
    if !(length_cm > 0.0 && length_cm.is_finite()) {
        return Err(Error::invalid("length_cm", format!("must be > 0, got {length_cm}")));
    }
    let r = facet_reflectance(n);
    let sb = b.sqrt();
    let r_bar = (1.0 - sb) / (1.0 + sb);
    let ratio = r / r_bar;
    if (ratio - 1.0).abs() <= 1e-12 {
        return Ok(0.0);
    }
    let alpha = ratio.ln() / length_cm;
    if r_bar > r {
        return Err(Error::ContrastExceedsFacetLimit { alpha_per_cm: alpha });
    }
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeSource {
    Spectrum(Vec<(f64, f64)>),
    Contrast(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpMeasurement {
    pub source: FringeSource,
    pub refractive_index: f64,
    pub length_cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpResult {
    pub alpha_per_cm: f64,
    pub b: f64,
    /// Present when the contrast was extracted from a spectrum.
    pub contrast: Option<FringeContrast>,
}

impl FpMeasurement {
    pub fn new(source: FringeSource, refractive_index: f64, length_cm: f64) -> Result<Self> {
        if let FringeSource::Spectrum(s) = &source {
            let mut sorted = s.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(i) = sorted.iter().position(|p| !(p.1 >= 0.0) || !p.0.is_finite()) {
                return Err(Error::invalid("spectrum", format!("row {i}: invalid sample")));
            }
            let values: Vec<f64> = sorted.iter().map(|p| p.1).collect();
            let n = find_extrema(&values).len();
            if n < MIN_EXTREMA {
                return Err(Error::invalid(
                    "spectrum",
                    format!("need >= {MIN_EXTREMA} alternating extrema, found {n}"),
                ));
            }
        }
        Ok(Self {
            source,
            refractive_index,
            length_cm,
        })
    }

    pub fn evaluate(&self) -> Result<FpResult> {
        let (b, contrast) = match &self.source {
            FringeSource::Contrast(b) => (*b, None),
            FringeSource::Spectrum(s) => {
                let c = fp_contrast(s)?;
                (c.b, Some(c))
            }
        };
        Ok(FpResult {
            alpha_per_cm: fp_loss(b, self.refractive_index, self.length_cm)?,
            b,
            contrast,
        })
    }
}
