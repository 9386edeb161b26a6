//! Shared physical types and the external-efficiency budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gate applied to `|1/λ₁ − 1/λ₂ − 1/λ₃| · λ₁`.
pub const ENERGY_CONSERVATION_TOLERANCE: f64 = 1e-2;

/// Waveguide geometry and QPM parameters.
///
/// Wavelengths are ordered (signal λ₁, pump λ₂, converted λ₃) for the
/// difference-frequency process 1/λ₃ = 1/λ₁ − 1/λ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    length_cm: f64,
    poling_period_um: f64,
    d_eff: f64,
    wavelengths_nm: [f64; 3],
}

impl WaveguideSpec {
    pub fn new(
        length_cm: f64,
        poling_period_um: f64,
        d_eff: f64,
        wavelengths_nm: [f64; 3],
    ) -> Result<Self> {
        if !(length_cm > 0.0 && length_cm.is_finite()) {
            return Err(Error::invalid("length_cm", format!("must be > 0, got {length_cm}")));
        }
        if !(poling_period_um > 0.0 && poling_period_um.is_finite()) {
            return Err(Error::invalid(
                "poling_period_um",
                format!("must be > 0, got {poling_period_um}"),
            ));
        }
        if !d_eff.is_finite() {
            return Err(Error::invalid("d_eff", "must be finite"));
        }
        if wavelengths_nm.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "wavelengths_nm",
                format!("all must be > 0, got {wavelengths_nm:?}"),
            ));
        }
        let relative = check_energy_conservation(wavelengths_nm) * wavelengths_nm[0];
        if relative >= ENERGY_CONSERVATION_TOLERANCE {
            return Err(Error::EnergyConservation {
                relative,
                tolerance: ENERGY_CONSERVATION_TOLERANCE,
            });
        }
        Ok(Self {
            length_cm,
            poling_period_um,
            d_eff,
            wavelengths_nm,
        })
    }

    /// The 393 → 1550 nm converter pumped at 527 nm, with unit d_eff.
    pub fn uv_to_telecom(length_cm: f64, poling_period_um: f64) -> Result<Self> {
        Self::new(length_cm, poling_period_um, 1.0, [393.0, 527.0, 1550.0])
    }

    pub fn length_cm(&self) -> f64 {
        self.length_cm
    }

    pub fn length_um(&self) -> f64 {
        self.length_cm * crate::units::UM_PER_CM
    }

    pub fn poling_period_um(&self) -> f64 {
        self.poling_period_um
    }

    pub fn d_eff(&self) -> f64 {
        self.d_eff
    }

    pub fn wavelengths_nm(&self) -> [f64; 3] {
        self.wavelengths_nm
    }

    /// First-order grating spatial frequency 1/Λ in µm⁻¹.
    pub fn nominal_q(&self) -> f64 {
        1.0 / self.poling_period_um
    }

    /// Copy with a different length; everything else unchanged.
    pub fn with_length_cm(&self, length_cm: f64) -> Result<Self> {
        Self::new(length_cm, self.poling_period_um, self.d_eff, self.wavelengths_nm)
    }
}

/// Power attenuation coefficients for signal, pump and converted wave.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossSet {
    alpha1_per_cm: f64,
    alpha2_per_cm: f64,
    alpha3_per_cm: f64,
}

impl LossSet {
    pub fn new(alpha1_per_cm: f64, alpha2_per_cm: f64, alpha3_per_cm: f64) -> Result<Self> {
        for (name, a) in [
            ("alpha1_per_cm", alpha1_per_cm),
            ("alpha2_per_cm", alpha2_per_cm),
            ("alpha3_per_cm", alpha3_per_cm),
        ] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {a}")));
            }
        }
        Ok(Self {
            alpha1_per_cm,
            alpha2_per_cm,
            alpha3_per_cm,
        })
    }

    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn alpha1_per_cm(&self) -> f64 {
        self.alpha1_per_cm
    }

    pub fn alpha2_per_cm(&self) -> f64 {
        self.alpha2_per_cm
    }

    pub fn alpha3_per_cm(&self) -> f64 {
        self.alpha3_per_cm
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha1_per_cm, self.alpha2_per_cm, self.alpha3_per_cm]
    }

    /// Δα = (α₁ + α₂ − α₃)/2.
    pub fn delta_alpha(&self) -> f64 {
        (self.alpha1_per_cm + self.alpha2_per_cm - self.alpha3_per_cm) / 2.0
    }
}

/// Transmission factors of the external-efficiency chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputBudget {
    t_waveguide: f64,
    t_collect: f64,
    t_filter: f64,
    /// Stored for reporting; not part of η_ext.
    detector_efficiency: f64,
}

impl ThroughputBudget {
    pub fn new(
        t_waveguide: f64,
        t_collect: f64,
        t_filter: f64,
        detector_efficiency: f64,
    ) -> Result<Self> {
        for (name, t) in [
            ("t_waveguide", t_waveguide),
            ("t_collect", t_collect),
            ("t_filter", t_filter),
            ("detector_efficiency", detector_efficiency),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {t}")));
            }
        }
        Ok(Self {
            t_waveguide,
            t_collect,
            t_filter,
            detector_efficiency,
        })
    }

    pub fn unity() -> Self {
        Self {
            t_waveguide: 1.0,
            t_collect: 1.0,
            t_filter: 1.0,
            detector_efficiency: 1.0,
        }
    }

    pub fn t_waveguide(&self) -> f64 {
        self.t_waveguide
    }

    pub fn t_collect(&self) -> f64 {
        self.t_collect
    }

    pub fn t_filter(&self) -> f64 {
        self.t_filter
    }

    pub fn detector_efficiency(&self) -> f64 {
        self.detector_efficiency
    }
}

/// η_ext = T_WG · η_int · T_collect · T_filter.
///
/// `eta_int` is output-referenced and may exceed 1 (see [`crate::cme`]).
pub fn external_efficiency(budget: &ThroughputBudget, eta_int: f64) -> f64 {
    budget.t_waveguide * eta_int * budget.t_collect * budget.t_filter
}

/// |1/λ₁ − 1/λ₂ − 1/λ₃| in nm⁻¹.
pub fn check_energy_conservation(wavelengths_nm: [f64; 3]) -> f64 {
    let [l1, l2, l3] = wavelengths_nm;
    (1.0 / l1 - 1.0 / l2 - 1.0 / l3).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn budget_reproduces_reported_external_efficiency() {
        let b = ThroughputBudget::new(0.49, 0.80, 0.79, 0.85).unwrap();
        let eta = external_efficiency(&b, 0.93);
        assert!((eta - 0.288_002_4).abs() < 1e-12);
    }

    #[test]
    fn budget_identity_and_zero() {
        assert_eq!(external_efficiency(&ThroughputBudget::unity(), 1.0), 1.0);
        let half = ThroughputBudget::new(0.5, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(external_efficiency(&half, 0.0), 0.0);
    }

    #[test]
    fn detector_efficiency_does_not_enter() {
        let a = ThroughputBudget::new(0.5, 0.6, 0.7, 0.1).unwrap();
        let b = ThroughputBudget::new(0.5, 0.6, 0.7, 0.9).unwrap();
        assert_eq!(external_efficiency(&a, 0.8), external_efficiency(&b, 0.8));
    }

    #[test]
    fn budget_rejects_out_of_range_factor() {
        assert!(ThroughputBudget::new(1.2, 0.5, 0.5, 0.5).is_err());
        assert!(ThroughputBudget::new(0.5, -0.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn energy_conservation_residuals() {
        let r = check_energy_conservation([393.0, 527.0, 1550.0]);
        assert!(r < 3e-6);
        assert!((r - 1.834_764_9e-6).abs() < 1e-12);
        assert_eq!(check_energy_conservation([400.0, 800.0, 800.0]), 0.0);
        let bad = check_energy_conservation([393.0, 527.0, 1400.0]);
        assert!((bad - 6.728_966e-5).abs() < 1e-10);
        assert!(bad * 393.0 > ENERGY_CONSERVATION_TOLERANCE);
    }

    #[test]
    fn spec_construction_checks_energy() {
        assert!(WaveguideSpec::uv_to_telecom(2.0, 3.07).is_ok());
        let err = WaveguideSpec::new(2.0, 3.07, 1.0, [393.0, 527.0, 1400.0]).unwrap_err();
        assert!(matches!(err, Error::EnergyConservation { .. }));
        assert!(WaveguideSpec::uv_to_telecom(0.0, 3.07).is_err());
        assert!(WaveguideSpec::uv_to_telecom(2.0, -1.0).is_err());
    }

    #[test]
    fn delta_alpha_of_reported_losses() {
        let l = LossSet::new(0.22, 0.20, 0.12).unwrap();
        assert!((l.delta_alpha() - 0.15).abs() < 1e-15);
        assert!(LossSet::new(-0.1, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn external_efficiency_is_multiplicative_and_monotone(
            t in 0.0f64..=1.0, c in 0.0f64..=1.0, f in 0.0f64..=1.0,
            eta in 0.0f64..1.5, scale in 0.0f64..=1.0,
        ) {
            let b = ThroughputBudget::new(t, c, f, 1.0).unwrap();
            let scaled = ThroughputBudget::new(t * scale, c, f, 1.0).unwrap();
            let base = external_efficiency(&b, eta);
            prop_assert!((external_efficiency(&scaled, eta) - scale * base).abs() <= 1e-12);
            prop_assert!(external_efficiency(&scaled, eta) <= base + 1e-15);
            prop_assert!(external_efficiency(&b, eta * scale) <= base + 1e-15);
        }
    }
}
