//! Pump-induced noise models and the efficiency-to-noise ratio.
//!
//! Noise photons are generated at a rate a·P per unit length along the
//! waveguide and are partly back-converted by the same process that converts
//! the signal. Only the part generated at x that survives to the output
//! contributes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cme::{internal_efficiency, CmeParams};
use crate::device::{external_efficiency, ThroughputBudget};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};

/// How the local pump power depends on position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// P(x) = P·e^{α_pump(L−x)}, with P the pump power at the output facet.
    #[default]
    Printed,
    /// P(x) = P·e^{−α_pump·x}, with P the launched pump power.
    Attenuating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Hz·W⁻¹·cm⁻¹.
    pub a_hz_per_w_per_cm: f64,
    pub alpha_pump_per_cm: f64,
    pub alpha_dfg_per_cm: f64,
    /// W⁻¹·cm⁻².
    pub eta_nor: f64,
    pub eta_int_max: f64,
    pub length_cm: f64,
    #[serde(default)]
    pub sign_convention: SignConvention,
}

impl NoiseParams {
    pub fn new(
        a_hz_per_w_per_cm: f64,
        alpha_pump_per_cm: f64,
        alpha_dfg_per_cm: f64,
        eta_nor: f64,
        eta_int_max: f64,
        length_cm: f64,
    ) -> Result<Self> {
        let p = Self {
            a_hz_per_w_per_cm,
            alpha_pump_per_cm,
            alpha_dfg_per_cm,
            eta_nor,
            eta_int_max,
            length_cm,
            sign_convention: SignConvention::Printed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sign_convention(mut self, c: SignConvention) -> Self {
        self.sign_convention = c;
        self
    }

    pub fn with_a(mut self, a: f64) -> Result<Self> {
        self.a_hz_per_w_per_cm = a;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_hz_per_w_per_cm", self.a_hz_per_w_per_cm),
            ("alpha_pump_per_cm", self.alpha_pump_per_cm),
            ("alpha_dfg_per_cm", self.alpha_dfg_per_cm),
            ("eta_nor", self.eta_nor),
            ("eta_int_max", self.eta_int_max),
            ("length_cm", self.length_cm),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.eta_int_max > 1.0 {
            return Err(Error::invalid("eta_int_max", format!("must be <= 1, got {}", self.eta_int_max)));
        }
        if self.length_cm == 0.0 {
            return Err(Error::invalid("length_cm", "must be > 0"));
        }
        Ok(())
    }

    fn lossless(&self) -> bool {
        self.alpha_pump_per_cm == 0.0 && self.alpha_dfg_per_cm == 0.0
    }
}

fn check_power(p_w: f64) -> Result<()> {
    if p_w >= 0.0 && p_w.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("pump_power_w", format!("must be finite and >= 0, got {p_w}")))
    }
}

/// ∫₀^L sin²(k·s) ds.
fn sin2_integral(k: f64, l: f64) -> f64 {
    let u = k * l;
    if u < 1e-3 {
        k * k * l.powi(3) / 3.0 - k.powi(4) * l.powi(5) / 15.0
    } else {
        l / 2.0 - (2.0 * u).sin() / (4.0 * k)
    }
}

/// Closed-form lossless noise a·P·∫₀^L [1 − η_max·sin²((L−x)√(η_nor P))] dx.
pub fn noise_lossless(p_w: f64, params: &NoiseParams) -> Result<f64> {
    check_power(p_w)?;
    let l = params.length_cm;
    let k = (params.eta_nor * p_w).sqrt();
    Ok(params.a_hz_per_w_per_cm * p_w * (l - params.eta_int_max * sin2_integral(k, l)))
}

pub fn default_quadrature() -> AdaptiveOptions {
    AdaptiveOptions {
        rel_tol: 1e-11,
        ..Default::default()
    }
}

/// Loss-corrected noise, integrated numerically to 1e-9 relative or better.
pub fn noise_lossy(p_w: f64, params: &NoiseParams) -> Result<f64> {
    noise_lossy_with(p_w, params, default_quadrature())
}

pub fn noise_lossy_with(p_w: f64, params: &NoiseParams, opts: AdaptiveOptions) -> Result<f64> {
    check_power(p_w)?;
    params.validate()?;
    if p_w == 0.0 || params.a_hz_per_w_per_cm == 0.0 {
        return Ok(0.0);
    }
    let l = params.length_cm;
    let ap = params.alpha_pump_per_cm;
    let ad = params.alpha_dfg_per_cm;
    let eta_max = params.eta_int_max;
    let k0 = (params.eta_nor * p_w).sqrt();
    let growth = |x: f64| match params.sign_convention {
        SignConvention::Printed => (ap * (l - x)).exp(),
        SignConvention::Attenuating => (-ap * x).exp(),
    };
    let integrand = |x: f64| {
        let s = l - x;
        let g = growth(x);
        let theta = s * k0 * g.sqrt();
        g * ((-ad * s).exp() - eta_max * theta.sin().powi(2))
    };
    // |dθ/dx| bounds the local oscillation rate of sin²(θ)
    let rate = |x: f64| {
        let s = l - x;
        let g = growth(x);
        k0 * g.sqrt() * (1.0 + 0.5 * ap * s)
    };
    let max_panel = |x: f64| {
        let r = rate(x);
        if r > 0.0 {
            std::f64::consts::PI / (4.0 * r)
        } else {
            l
        }
    };
    let integral = integrate_adaptive(integrand, 0.0, l, max_panel, opts)?;
    Ok(params.a_hz_per_w_per_cm * p_w * integral)
}

/// Noise via the closed form when losses vanish, the quadrature otherwise.
pub fn noise(p_w: f64, params: &NoiseParams) -> Result<f64> {
    if params.lossless() {
        noise_lossless(p_w, params)
    } else {
        noise_lossy(p_w, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrPoint {
    pub pump_w: f64,
    pub eta_ext: f64,
    pub noise_hz: f64,
    /// Absent where the noise vanishes.
    pub enr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrCurve {
    pub points: Vec<EnrPoint>,
    pub argmax_eta_ext_w: f64,
    pub argmax_enr_w: Option<f64>,
}

impl EnrCurve {
    /// Builds the curve from (P, η_ext, noise) samples. Ties resolve to the
    /// first sample.
    pub fn from_samples(samples: &[(f64, f64, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("pump_sweep", "must be nonempty"));
        }
        let points: Vec<EnrPoint> = samples
            .iter()
            .map(|&(p, eta_ext, noise_hz)| EnrPoint {
                pump_w: p,
                eta_ext,
                noise_hz,
                enr: (noise_hz != 0.0).then(|| eta_ext / noise_hz),
            })
            .collect();
        let mut best_eta = 0;
        for (i, pt) in points.iter().enumerate() {
            if pt.eta_ext > points[best_eta].eta_ext {
                best_eta = i;
            }
        }
        let mut best_enr: Option<(f64, f64)> = None;
        for pt in &points {
            if let Some(e) = pt.enr {
                if best_enr.is_none_or(|(_, b)| e > b) {
                    best_enr = Some((pt.pump_w, e));
                }
            }
        }
        Ok(Self {
            argmax_eta_ext_w: points[best_eta].pump_w,
            argmax_enr_w: best_enr.map(|(p, _)| p),
            points,
        })
    }
}

/// ENR over a pump sweep. Each sweep value is the launched pump power for the
/// coupled-mode solution; the noise model receives the pump power referenced
/// the way its sign convention expects.
pub fn enr_curve(
    pump_sweep_w: &[f64],
    noise_params: &NoiseParams,
    cme_params: &CmeParams,
    budget: &ThroughputBudget,
) -> Result<EnrCurve> {
    if pump_sweep_w.is_empty() {
        return Err(Error::invalid("pump_sweep", "must be nonempty"));
    }
    let samples: Vec<(f64, f64, f64)> = pump_sweep_w
        .par_iter()
        .map(|&p| {
            let eta_int = internal_efficiency(&cme_params.with_pump_w(p)?)?;
            let p_noise = match noise_params.sign_convention {
                SignConvention::Printed => p * (-noise_params.alpha_pump_per_cm * noise_params.length_cm).exp(),
                SignConvention::Attenuating => p,
            };
            let n = noise(p_noise, noise_params)?;
            Ok((p, external_efficiency(budget, eta_int), n))
        })
        .collect::<Result<_>>()?;
    EnrCurve::from_samples(&samples)
}
