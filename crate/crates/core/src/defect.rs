//! Defect-perturbed nonlinear coefficient profile and its Fourier response.
//!
//! The grating is modelled as
//!
//! ```text
//! d(z) = d_eff · sin(2πz/Λ) · exp(i Φ(z)),    Φ(z) = Σ_j φ_j H(z − x_j)
//! φ_j  = (2π/Λ)(w_j − Λ/2)
//! ```
//!
//! and the conversion response at grating spatial frequency q is
//! `|A(q, L)|²` with `A(q, z) = ∫₀^z d(z') e^{−i2πqz'} dz'`.
//!
//! Between consecutive defects Φ is constant, so the sine carrier is split
//! into two complex exponentials and each segment is integrated in closed
//! form. The x₀ = 0 term of the phase sum only adds a global phase and is not
//! stored.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::WaveguideSpec;
use crate::error::{Error, Result};
use crate::units::UM_PER_CM;

/// Dense scan resolution for [`EfficiencyMode::PeakInWindow`].
pub const PEAK_SCAN_POINTS: usize = 513;
/// Half-width of the peak search window in units of 1/L.
pub const PEAK_WINDOW_HALF_WIDTH: f64 = 10.0;

const GOLDEN_ITERATIONS: usize = 80;

/// Phase shift of a defect of width `width_um`, reduced to (−π, π].
pub fn phase_shift(width_um: f64, poling_period_um: f64) -> f64 {
    wrap_phase(TAU / poling_period_um * (width_um - 0.5 * poling_period_um))
}

fn wrap_phase(theta: f64) -> f64 {
    let mut r = theta - TAU * (theta / TAU).round();
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub position_um: f64,
    pub width_um: f64,
}

impl Defect {
    pub fn new(position_um: f64, width_um: f64) -> Self {
        Self {
            position_um,
            width_um,
        }
    }
}

/// Ordered domain defects. Positions strictly increasing, widths ≥ 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectMap {
    defects: Vec<Defect>,
}

impl DefectMap {
    pub fn new(defects: Vec<Defect>) -> Result<Self> {
        for (i, d) in defects.iter().enumerate() {
            if !(d.position_um >= 0.0 && d.position_um.is_finite()) {
                return Err(Error::InvalidDefectMap(format!(
                    "defect {i}: position {} µm must be finite and >= 0",
                    d.position_um
                )));
            }
            if !(d.width_um >= 0.0 && d.width_um.is_finite()) {
                return Err(Error::InvalidDefectMap(format!(
                    "defect {i}: width {} µm must be finite and >= 0",
                    d.width_um
                )));
            }
            if i > 0 && d.position_um <= defects[i - 1].position_um {
                return Err(Error::InvalidDefectMap(format!(
                    "defect {i}: position {} µm not strictly after {} µm",
                    d.position_um,
                    defects[i - 1].position_um
                )));
            }
        }
        Ok(Self { defects })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn defects(&self) -> &[Defect] {
        &self.defects
    }

    pub fn iter(&self) -> impl Iterator<Item = &Defect> {
        self.defects.iter()
    }

    /// Number of zero-width entries (no physical domain, but φ = π).
    pub fn zero_width_count(&self) -> usize {
        self.defects.iter().filter(|d| d.width_um == 0.0).count()
    }

    fn check_within(&self, length_um: f64) -> Result<()> {
        match self.defects.last() {
            Some(d) if d.position_um > length_um => Err(Error::InvalidDefectMap(format!(
                "defect at {} µm lies beyond the waveguide end at {length_um} µm",
                d.position_um
            ))),
            _ => Ok(()),
        }
    }
}

/// Piecewise-constant cumulative phase Φ(z).
///
/// The first breakpoint is always `(0, 0)`; each following one marks a defect
/// position and the phase that holds from there on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl PhaseProfile {
    pub fn from_defects(defects: &DefectMap, poling_period_um: f64) -> Self {
        let mut breakpoints = Vec::with_capacity(defects.len() + 1);
        breakpoints.push((0.0, 0.0));
        let mut phase = 0.0;
        for d in defects.iter() {
            phase += phase_shift(d.width_um, poling_period_um);
            if d.position_um == 0.0 {
                breakpoints[0].1 = phase;
            } else {
                breakpoints.push((d.position_um, phase));
            }
        }
        Self { breakpoints }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Φ(z) with the right-continuous Heaviside convention H(0) = 1.
    pub fn phase_at(&self, z_um: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(z, _)| z <= z_um);
        self.breakpoints[idx.saturating_sub(1)].1
    }
}

/// Relative efficiency normalized to the defect-free peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub q_values: Vec<f64>,
    pub relative_eta: Vec<f64>,
}

impl TuningCurve {
    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }

    /// (q, value) of the largest sample.
    pub fn peak(&self) -> (f64, f64) {
        let (i, &v) = self
            .relative_eta
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                if *v > *acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        (self.q_values[i], v)
    }

    /// Full width at half maximum around the highest sample, linearly
    /// interpolated. `None` if the curve does not fall below half on both
    /// sides.
    pub fn fwhm(&self) -> Option<f64> {
        let (_, peak) = self.peak();
        let ipk = self.relative_eta.iter().position(|&v| v == peak)?;
        let half = 0.5 * peak;
        let y = &self.relative_eta;
        let q = &self.q_values;
        let mut left = None;
        for i in (0..ipk).rev() {
            if y[i] < half {
                let t = (half - y[i]) / (y[i + 1] - y[i]);
                left = Some(q[i] + t * (q[i + 1] - q[i]));
                break;
            }
        }
        let mut right = None;
        for i in ipk + 1..y.len() {
            if y[i] < half {
                let t = (y[i - 1] - half) / (y[i - 1] - y[i]);
                right = Some(q[i - 1] + t * (q[i] - q[i - 1]));
                break;
            }
        }
        Some(right? - left?)
    }
}

/// How a single relative-efficiency figure is extracted from the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyMode {
    /// Evaluate at the nominal grating frequency q = 1/Λ.
    AtNominalQ,
    /// Maximum over q ∈ 1/Λ ± 10/L, i.e. after re-tuning the phase-matching
    /// point.
    #[default]
    PeakInWindow,
}

/// Peak of the defect-free response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealPeak {
    pub q: f64,
    /// |A|² in cm².
    pub power: f64,
}

/// Locates the defect-free peak by golden-section refinement around 1/Λ.
pub fn ideal_peak(spec: &WaveguideSpec) -> IdealPeak {
    let profile = PhaseProfile::from_defects(&DefectMap::empty(), spec.poling_period_um());
    let l = spec.length_um();
    let q0 = spec.nominal_q();
    let f = |q: f64| amplitude_with(spec, &profile, q, l).norm_sqr();
    let (q, power) = golden_max(f, q0 - 0.5 / l, q0 + 0.5 / l);
    IdealPeak { q, power }
}

/// A waveguide with a specific defect map, ready for spectral evaluation.
#[derive(Debug, Clone)]
pub struct PoledWaveguide {
    spec: WaveguideSpec,
    defects: DefectMap,
    profile: PhaseProfile,
    ideal: IdealPeak,
}

impl PoledWaveguide {
    pub fn new(spec: WaveguideSpec, defects: DefectMap) -> Result<Self> {
        let ideal = ideal_peak(&spec);
        Self::with_ideal_peak(spec, defects, ideal)
    }

    /// Reuses a precomputed defect-free reference (Monte Carlo inner loop).
    pub fn with_ideal_peak(spec: WaveguideSpec, defects: DefectMap, ideal: IdealPeak) -> Result<Self> {
        defects.check_within(spec.length_um())?;
        let profile = PhaseProfile::from_defects(&defects, spec.poling_period_um());
        Ok(Self {
            spec,
            defects,
            profile,
            ideal,
        })
    }

    pub fn ideal(spec: WaveguideSpec) -> Self {
        Self::new(spec, DefectMap::empty()).expect("empty map is always valid")
    }

    pub fn spec(&self) -> &WaveguideSpec {
        &self.spec
    }

    pub fn defects(&self) -> &DefectMap {
        &self.defects
    }

    pub fn phase_profile(&self) -> &PhaseProfile {
        &self.profile
    }

    pub fn ideal_peak(&self) -> IdealPeak {
        self.ideal
    }

    /// A(q, z_end) = ∫₀^{z_end} d(z) e^{−i2πqz} dz, with q in µm⁻¹ and the
    /// result in cm (so the ideal peak is ≈ d_eff·L/2).
    pub fn amplitude_integral(&self, q: f64, z_end_cm: f64) -> Result<Complex64> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", format!("grating frequency must be > 0, got {q}")));
        }
        if !(0.0..=self.spec.length_cm()).contains(&z_end_cm) {
            return Err(Error::invalid(
                "z_end_cm",
                format!("must lie in [0, {}], got {z_end_cm}", self.spec.length_cm()),
            ));
        }
        Ok(self.amplitude(q, z_end_cm * UM_PER_CM))
    }

    fn amplitude(&self, q: f64, z_end_um: f64) -> Complex64 {
        amplitude_with(&self.spec, &self.profile, q, z_end_um)
    }

    fn relative_at(&self, q: f64) -> f64 {
        self.amplitude(q, self.spec.length_um()).norm_sqr() / self.ideal.power
    }

    /// Relative efficiency sampled on `num_points` evenly spaced q values.
    pub fn tuning_curve(&self, q_min: f64, q_max: f64, num_points: usize) -> Result<TuningCurve> {
        if !(q_min < q_max) || q_min <= 0.0 {
            return Err(Error::invalid(
                "q_range",
                format!("need 0 < q_min < q_max, got [{q_min}, {q_max}]"),
            ));
        }
        if num_points < 2 {
            return Err(Error::invalid("num_points", "need at least 2 points"));
        }
        let q_values = linspace(q_min, q_max, num_points);
        let relative_eta = q_values.iter().map(|&q| self.relative_at(q)).collect();
        Ok(TuningCurve {
            q_values,
            relative_eta,
        })
    }

    /// |A(q, z)|² / |A_ideal(q_peak, L)|² along the waveguide.
    ///
    /// The samples are `num_points` evenly spaced positions merged with every
    /// defect position, so abrupt changes at defects are resolved.
    pub fn efficiency_evolution(&self, q: f64, num_points: usize) -> Result<Vec<(f64, f64)>> {
        if num_points < 2 {
            return Err(Error::invalid("num_points", "need at least 2 points"));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", format!("must be > 0, got {q}")));
        }
        let l = self.spec.length_um();
        let mut zs = linspace(0.0, l, num_points);
        zs.extend(self.defects.iter().map(|d| d.position_um));
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        Ok(zs
            .into_iter()
            .map(|z| {
                let rel = self.amplitude(q, z).norm_sqr() / self.ideal.power;
                (z / UM_PER_CM, rel)
            })
            .collect())
    }

    pub fn relative_efficiency(&self, mode: EfficiencyMode) -> f64 {
        match mode {
            EfficiencyMode::AtNominalQ => self.relative_at(self.spec.nominal_q()),
            EfficiencyMode::PeakInWindow => self.peak_in_window().1,
        }
    }

    /// (q, relative efficiency) at the maximum within 1/Λ ± 10/L.
    pub fn peak_in_window(&self) -> (f64, f64) {
        let l = self.spec.length_um();
        let q0 = self.spec.nominal_q();
        let half = PEAK_WINDOW_HALF_WIDTH / l;
        let qs = linspace(q0 - half, q0 + half, PEAK_SCAN_POINTS);
        let vals: Vec<f64> = qs.iter().map(|&q| self.relative_at(q)).collect();
        let step = qs[1] - qs[0];
        let grid_max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut best = (q0, f64::NEG_INFINITY);
        for i in 0..vals.len() {
            let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
            let right = vals.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
            // refine every local maximum that could beat the grid maximum
            if vals[i] >= left && vals[i] >= right && vals[i] >= 0.98 * grid_max {
                let lo = (qs[i] - step).max(q0 - half);
                let hi = (qs[i] + step).min(q0 + half);
                let (q, v) = golden_max(|q| self.relative_at(q), lo, hi);
                let (q, v) = if vals[i] > v { (qs[i], vals[i]) } else { (q, v) };
                if v > best.1 {
                    best = (q, v);
                }
            }
        }
        best
    }
}

/// Closed-form ∫₀^{z_end} d(z) e^{−i2πqz} dz over the piecewise-constant
/// phase profile, in cm.
fn amplitude_with(spec: &WaveguideSpec, profile: &PhaseProfile, q: f64, z_end_um: f64) -> Complex64 {
    let inv_period = spec.nominal_q();
    // sin(kz) e^{-iβz} = (e^{i(k-β)z} - e^{-i(k+β)z}) / 2i
    let w_rot = TAU * (inv_period - q);
    let w_counter = -TAU * (inv_period + q);
    let bps = profile.breakpoints();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &(a, phase)) in bps.iter().enumerate() {
        if a >= z_end_um {
            break;
        }
        let b = bps.get(i + 1).map_or(z_end_um, |&(z, _)| z.min(z_end_um));
        if b <= a {
            continue;
        }
        let seg = segment_exp(w_rot, a, b) - segment_exp(w_counter, a, b);
        acc += Complex64::from_polar(1.0, phase) * seg;
    }
    // 1/(2i) = -i/2; µm → cm
    acc * Complex64::new(0.0, -0.5) * (spec.d_eff() / UM_PER_CM)
}

/// ∫_a^b e^{iωz} dz = e^{iω(a+b)/2} (b − a) sinc(ω(b − a)/2).
fn segment_exp(omega: f64, a: f64, b: f64) -> Complex64 {
    let len = b - a;
    let half = 0.5 * omega * len;
    Complex64::from_polar(len * sinc(half), 0.5 * omega * (a + b))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + step * i as f64 })
        .collect()
}

/// Golden-section maximization of a unimodal function on [lo, hi].
fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
