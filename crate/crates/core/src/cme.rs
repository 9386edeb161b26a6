//! Lossy three-wave coupled-mode equations and closed-form efficiency models.
//!
//! Amplitudes use photon-flux normalization (|aᵢ|² in photons/s). For the
//! difference-frequency process ω₁ = ω₂ + ω₃ at phase matching:
//!
//! ```text
//! da₁/dz = −iκ a₂ a₃  − α₁/2 a₁
//! da₂/dz = −iκ a₁ a₃* − α₂/2 a₂
//! da₃/dz = −iκ a₁ a₂* − α₃/2 a₃
//! ```
//!
//! The coupling κ is fixed by the normalized efficiency through
//! κ²|a₂|² = η_nor·P₂, so the lossless strong-pump solution is exactly
//! η = sin²(√(η_nor P₂)·L).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::LossSet;
use crate::error::{Error, Result};
use crate::units::{photon_flux, HC_J_NM};

/// Below this |Δα|·L the low-conversion model switches to its Δα → 0 limit.
pub const DELTA_ALPHA_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmeParams {
    /// W⁻¹·cm⁻².
    pub eta_nor: f64,
    pub losses: LossSet,
    pub length_cm: f64,
    /// Launched (P₁, P₂) in W at z = 0.
    pub input_powers_w: (f64, f64),
    /// (signal, pump, converted) in nm.
    pub wavelengths_nm: [f64; 3],
}

impl CmeParams {
    pub fn new(
        eta_nor: f64,
        losses: LossSet,
        length_cm: f64,
        input_powers_w: (f64, f64),
        wavelengths_nm: [f64; 3],
    ) -> Result<Self> {
        let p = Self {
            eta_nor,
            losses,
            length_cm,
            input_powers_w,
            wavelengths_nm,
        };
        p.validate()?;
        Ok(p)
    }

    /// 393 nm signal, 527 nm pump, 1550 nm output; 1 nW signal.
    pub fn uv_to_telecom(eta_nor: f64, losses: LossSet, length_cm: f64, pump_w: f64) -> Result<Self> {
        Self::new(eta_nor, losses, length_cm, (1e-9, pump_w), [393.0, 527.0, 1550.0])
    }

    pub fn with_pump_w(mut self, pump_w: f64) -> Result<Self> {
        self.input_powers_w.1 = pump_w;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta_nor >= 0.0 && self.eta_nor.is_finite()) {
            return Err(Error::invalid("eta_nor", format!("must be >= 0, got {}", self.eta_nor)));
        }
        if !(self.length_cm > 0.0 && self.length_cm.is_finite()) {
            return Err(Error::invalid("length_cm", format!("must be > 0, got {}", self.length_cm)));
        }
        let (p1, p2) = self.input_powers_w;
        if !(p1 > 0.0 && p1.is_finite()) {
            return Err(Error::invalid("signal_power_w", format!("must be > 0, got {p1}")));
        }
        if !(p2 >= 0.0 && p2.is_finite()) {
            return Err(Error::invalid("pump_power_w", format!("must be >= 0, got {p2}")));
        }
        if self.wavelengths_nm.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("wavelengths_nm", "all must be > 0"));
        }
        Ok(())
    }

    /// Coupling constant κ in cm⁻¹·s^{1/2}.
    fn kappa(&self) -> f64 {
        (self.eta_nor * HC_J_NM / self.wavelengths_nm[1]).sqrt()
    }

    fn initial_state(&self) -> [Complex64; 3] {
        let n1 = photon_flux(self.input_powers_w.0, self.wavelengths_nm[0]);
        let n2 = photon_flux(self.input_powers_w.1, self.wavelengths_nm[1]);
        [
            Complex64::new(n1.sqrt(), 0.0),
            Complex64::new(n2.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmeState {
    pub z_cm: f64,
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
}

impl CmeState {
    /// Photon fluxes (|a₁|², |a₂|², |a₃|²).
    pub fn fluxes(&self) -> [f64; 3] {
        [self.a1.norm_sqr(), self.a2.norm_sqr(), self.a3.norm_sqr()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub initial_steps: usize,
    /// Endpoint flux change between successive halvings.
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            initial_steps: 64,
            rel_tol: 1e-8,
            max_refinements: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmeSolution {
    pub trajectory: Vec<CmeState>,
    pub steps: usize,
    /// Scaled endpoint change after each halving.
    pub refinement_deltas: Vec<f64>,
}

impl CmeSolution {
    pub fn endpoint(&self) -> &CmeState {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

/// Fixed-step RK4 with global step halving until the endpoint fluxes settle.
pub fn integrate_cme(params: &CmeParams, num_steps_hint: usize) -> Result<Vec<CmeState>> {
    let opts = IntegratorOptions {
        initial_steps: num_steps_hint.max(4),
        ..Default::default()
    };
    integrate_with(params, &opts).map(|s| s.trajectory)
}

pub fn integrate_with(params: &CmeParams, opts: &IntegratorOptions) -> Result<CmeSolution> {
    params.validate()?;
    let init = params.initial_state();
    let n1_in = init[0].norm_sqr();

    let mut steps = opts.initial_steps.max(1);
    let mut trajectory = rk4(params, init, steps);
    let mut prev = trajectory.last().unwrap().fluxes();
    let mut deltas = Vec::new();
    for _ in 0..opts.max_refinements {
        steps *= 2;
        trajectory = rk4(params, init, steps);
        let last = trajectory.last().unwrap().fluxes();
        let scales = [n1_in, last[1].max(prev[1]).max(f64::MIN_POSITIVE), n1_in];
        let delta = (0..3)
            .map(|i| (last[i] - prev[i]).abs() / scales[i])
            .fold(0.0, f64::max);
        deltas.push(delta);
        if delta < opts.rel_tol {
            return Ok(CmeSolution {
                trajectory,
                steps,
                refinement_deltas: deltas,
            });
        }
        prev = last;
        if steps > 1 << 26 {
            break;
        }
    }
    let last = trajectory.last().unwrap().fluxes();
    Err(Error::IntegrationFailure {
        refinements: deltas.len(),
        previous: prev,
        last,
    })
}

fn derivative(params: &CmeParams, kappa: f64, a: &[Complex64; 3]) -> [Complex64; 3] {
    let mi_k = Complex64::new(0.0, -kappa);
    let [l1, l2, l3] = params.losses.as_array();
    [
        mi_k * a[1] * a[2] - 0.5 * l1 * a[0],
        mi_k * a[0] * a[2].conj() - 0.5 * l2 * a[1],
        mi_k * a[0] * a[1].conj() - 0.5 * l3 * a[2],
    ]
}

fn rk4(params: &CmeParams, init: [Complex64; 3], steps: usize) -> Vec<CmeState> {
    let kappa = params.kappa();
    let h = params.length_cm / steps as f64;
    let add = |a: &[Complex64; 3], k: &[Complex64; 3], s: f64| -> [Complex64; 3] {
        [a[0] + k[0] * s, a[1] + k[1] * s, a[2] + k[2] * s]
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = init;
    out.push(state(0.0, &a));
    for i in 0..steps {
        let k1 = derivative(params, kappa, &a);
        let k2 = derivative(params, kappa, &add(&a, &k1, 0.5 * h));
        let k3 = derivative(params, kappa, &add(&a, &k2, 0.5 * h));
        let k4 = derivative(params, kappa, &add(&a, &k3, h));
        for j in 0..3 {
            a[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
        let z = if i + 1 == steps { params.length_cm } else { h * (i + 1) as f64 };
        out.push(state(z, &a));
    }
    out
}

fn state(z_cm: f64, a: &[Complex64; 3]) -> CmeState {
    CmeState {
        z_cm,
        a1: a[0],
        a2: a[1],
        a3: a[2],
    }
}

/// Output-referenced photon-number efficiency N₃(L) / (N₁(0)·e^{−α₁L}).
///
/// The denominator is the signal flux that would leave the waveguide with the
/// pump off, so the ratio can exceed 1 when α₁ > α₃.
pub fn output_referenced_efficiency(params: &CmeParams, endpoint: &CmeState) -> f64 {
    let n1_in = photon_flux(params.input_powers_w.0, params.wavelengths_nm[0]);
    let transmitted = n1_in * (-params.losses.alpha1_per_cm() * params.length_cm).exp();
    endpoint.a3.norm_sqr() / transmitted
}

/// η_int for a single launched pump power.
pub fn internal_efficiency(params: &CmeParams) -> Result<f64> {
    let sol = integrate_with(params, &IntegratorOptions::default())?;
    Ok(output_referenced_efficiency(params, sol.endpoint()))
}

/// (P₂, η_int) for each launched pump power, evaluated in parallel.
pub fn internal_efficiency_curve(params: &CmeParams, pump_powers_w: &[f64]) -> Result<Vec<(f64, f64)>> {
    pump_powers_w
        .par_iter()
        .map(|&p| {
            let pp = params.with_pump_w(p)?;
            Ok((p, internal_efficiency(&pp)?))
        })
        .collect()
}

/// Lossless undepleted-pump model sin²(√(η_nor·P₂)·L).
pub fn eta_sin2(eta_nor: f64, p2_w: f64, length_cm: f64) -> f64 {
    ((eta_nor * p2_w).sqrt() * length_cm).sin().powi(2)
}

/// (e^{ΔαL} − 1)²/Δα², continuous through Δα = 0 where it equals L².
pub fn lossy_gain_factor(losses: &LossSet, length_cm: f64) -> f64 {
    let da = losses.delta_alpha();
    if (da * length_cm).abs() < DELTA_ALPHA_LIMIT {
        length_cm * length_cm
    } else {
        ((da * length_cm).exp_m1() / da).powi(2)
    }
}

/// Low-conversion efficiency with propagation loss,
/// η_nor·P₂^out·(e^{ΔαL} − 1)²/Δα².
pub fn eta_low_conversion_lossy(eta_nor: f64, p2_out_w: f64, losses: &LossSet, length_cm: f64) -> f64 {
    eta_nor * p2_out_w * lossy_gain_factor(losses, length_cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn lossless_at(gl: f64) -> CmeParams {
        let l = 2.0;
        let eta_nor = 7.0;
        let p2 = (gl / l).powi(2) / eta_nor;
        CmeParams::uv_to_telecom(eta_nor, LossSet::lossless(), l, p2).unwrap()
    }

    #[test]
    fn quarter_period_converts_fully() {
        let eta = internal_efficiency(&lossless_at(FRAC_PI_2)).unwrap();
        assert!((eta - 1.0).abs() < 1e-6, "{eta}");
    }

    #[test]
    fn half_period_back_converts() {
        let eta = internal_efficiency(&lossless_at(PI)).unwrap();
        assert!(eta <= 1e-6, "{eta}");
    }

    #[test]
    fn zero_pump_gives_zero() {
        let p = lossless_at(1.0).with_pump_w(0.0).unwrap();
        assert_eq!(internal_efficiency(&p).unwrap(), 0.0);
    }

    #[test]
    fn manley_rowe_holds_without_loss() {
        let p = lossless_at(2.5);
        let traj = integrate_cme(&p, 64).unwrap();
        let n0 = traj[0].fluxes();
        let inv0 = n0[0] + n0[2];
        for s in &traj {
            let n = s.fluxes();
            assert!(((n[0] + n[2]) / inv0 - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn halving_deltas_shrink() {
        let opts = IntegratorOptions {
            initial_steps: 8,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let losses = LossSet::new(0.22, 0.20, 0.12).unwrap();
        let p = CmeParams::uv_to_telecom(8.0, losses, 2.0, 0.09).unwrap();
        let sol = integrate_with(&p, &opts).unwrap();
        assert!(sol.refinement_deltas.len() >= 3);
        assert!(sol.refinement_deltas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn refinement_budget_exhaustion_is_an_error() {
        let opts = IntegratorOptions {
            initial_steps: 4,
            rel_tol: 0.0,
            max_refinements: 2,
        };
        let err = integrate_with(&lossless_at(1.0), &opts).unwrap_err();
        assert!(matches!(err, Error::IntegrationFailure { refinements: 2, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn sin2_closed_form() {
        assert!((eta_sin2(1.0, (FRAC_PI_2 / 2.0).powi(2), 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(eta_sin2(7.03, 0.0, 2.0), 0.0);
        // sin²(2·√(7.03·0.052)), 40-digit reference
        assert!((eta_sin2(7.03, 0.052, 2.0) - 0.874_868_977_990_979_4).abs() < 1e-14);
    }

    #[test]
    fn low_conversion_gain_at_reported_losses() {
        let losses = LossSet::new(0.22, 0.20, 0.12).unwrap();
        let g = lossy_gain_factor(&losses, 2.0);
        assert!((g - 5.440_052_677_266_79).abs() < 1e-12);
        let eta = eta_low_conversion_lossy(7.03, 1e-3, &losses, 2.0);
        assert!((eta - 0.038_243_570_321_185_53).abs() < 1e-14);
    }

    #[test]
    fn low_conversion_limit_is_continuous() {
        let zero = LossSet::new(0.1, 0.1, 0.2).unwrap();
        assert_eq!(zero.delta_alpha(), 0.0);
        assert_eq!(eta_low_conversion_lossy(7.0, 1e-3, &zero, 2.0), 7.0 * 1e-3 * 4.0);
        let tiny = LossSet::new(0.1 + 2e-9, 0.1, 0.2).unwrap();
        let a = eta_low_conversion_lossy(7.0, 1e-3, &tiny, 2.0);
        assert!((a - 0.028).abs() < 1e-10);
        // just above the branch switch, expm1 keeps full accuracy
        let small = LossSet::new(0.1 + 2e-7, 0.1, 0.2).unwrap();
        let b = eta_low_conversion_lossy(7.0, 1e-3, &small, 2.0);
        let x = small.delta_alpha() * 2.0;
        let series = 0.028 * (1.0 + x + 7.0 / 12.0 * x * x);
        assert!((b / series - 1.0).abs() < 1e-12);
    }

    #[test]
    fn param_validation() {
        assert!(CmeParams::uv_to_telecom(-1.0, LossSet::lossless(), 2.0, 0.05).is_err());
        assert!(CmeParams::uv_to_telecom(7.0, LossSet::lossless(), 0.0, 0.05).is_err());
        assert!(CmeParams::uv_to_telecom(7.0, LossSet::lossless(), 2.0, -0.05).is_err());
        assert!(CmeParams::new(7.0, LossSet::lossless(), 2.0, (0.0, 0.05), [393.0, 527.0, 1550.0]).is_err());
    }
}
