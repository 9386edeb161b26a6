//! Fixed conversions between user-facing and internal units.

/// Planck constant times speed of light, J·nm.
pub const HC_J_NM: f64 = 6.626_070_15e-34 * 299_792_458.0 * 1e9;

pub const UM_PER_CM: f64 = 1e4;

pub fn mm_to_cm(mm: f64) -> f64 {
    mm / 10.0
}

pub fn cm_to_mm(cm: f64) -> f64 {
    cm * 10.0
}

pub fn mw_to_w(mw: f64) -> f64 {
    mw * 1e-3
}

pub fn w_to_mw(w: f64) -> f64 {
    w * 1e3
}

/// %/(W·cm²) → W⁻¹·cm⁻².
pub fn percent_eta_nor_to_internal(pct: f64) -> f64 {
    pct / 100.0
}

/// W⁻¹·cm⁻² → %/(W·cm²).
pub fn internal_eta_nor_to_percent(eta: f64) -> f64 {
    eta * 100.0
}

/// Photon flux (s⁻¹) carried by `power_w` at `wavelength_nm`.
pub fn photon_flux(power_w: f64, wavelength_nm: f64) -> f64 {
    power_w * wavelength_nm / HC_J_NM
}

/// Optical power (W) of a photon flux at `wavelength_nm`.
pub fn flux_to_power(flux: f64, wavelength_nm: f64) -> f64 {
    flux * HC_J_NM / wavelength_nm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_roundtrip() {
        assert_eq!(mm_to_cm(20.0), 2.0);
        assert_eq!(cm_to_mm(2.0), 20.0);
        assert!((mw_to_w(52.0) - 0.052).abs() < 1e-15);
        assert!((percent_eta_nor_to_internal(703.0) - 7.03).abs() < 1e-12);
        assert!((internal_eta_nor_to_percent(8.39) - 839.0).abs() < 1e-9);
    }

    #[test]
    fn photon_flux_of_one_milliwatt_at_1550() {
        // 1 mW at 1550 nm is ~7.8e15 photons/s
        let n = photon_flux(1e-3, 1550.0);
        assert!((n / 7.803e15 - 1.0).abs() < 1e-3);
        assert!((flux_to_power(n, 1550.0) - 1e-3).abs() < 1e-18);
    }
}
