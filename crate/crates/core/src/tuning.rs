//! Counter-tuning of the DFG phase-matching point and the SPDC noise peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningModel {
    pub lambda_ref_nm: f64,
    pub t_dfg_ref_c: f64,
    pub slope_dfg_c_per_pm: f64,
    pub t_spdc_ref_c: f64,
    pub slope_spdc_c_per_pm: f64,
}

impl TuningModel {
    pub fn new(
        lambda_ref_nm: f64,
        t_dfg_ref_c: f64,
        slope_dfg_c_per_pm: f64,
        t_spdc_ref_c: f64,
        slope_spdc_c_per_pm: f64,
    ) -> Result<Self> {
        if !(lambda_ref_nm > 0.0 && lambda_ref_nm.is_finite()) {
            return Err(Error::invalid("lambda_ref_nm", format!("must be > 0, got {lambda_ref_nm}")));
        }
        for (name, v) in [
            ("t_dfg_ref_c", t_dfg_ref_c),
            ("slope_dfg_c_per_pm", slope_dfg_c_per_pm),
            ("t_spdc_ref_c", t_spdc_ref_c),
            ("slope_spdc_c_per_pm", slope_spdc_c_per_pm),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(Self {
            lambda_ref_nm,
            t_dfg_ref_c,
            slope_dfg_c_per_pm,
            t_spdc_ref_c,
            slope_spdc_c_per_pm,
        })
    }

    /// 527.37 nm pump phase-matched at 33.0 °C on a noise peak; DFG slope
    /// −0.01 °C/pm, SPDC slope +0.02 °C/pm (measured).
    pub fn measured_defaults() -> Self {
        Self::new(527.37, 33.0, -0.01, 33.0, 0.02).expect("valid defaults")
    }

    fn detuning_pm(&self, lambda_nm: f64) -> f64 {
        (lambda_nm - self.lambda_ref_nm) * 1000.0
    }

    pub fn t_dfg(&self, lambda_nm: f64) -> f64 {
        self.t_dfg_ref_c + self.slope_dfg_c_per_pm * self.detuning_pm(lambda_nm)
    }

    pub fn t_spdc(&self, lambda_nm: f64) -> f64 {
        self.t_spdc_ref_c + self.slope_spdc_c_per_pm * self.detuning_pm(lambda_nm)
    }

    /// Pump wavelength where the two temperatures coincide, if the slopes differ.
    pub fn crossing_nm(&self) -> Option<f64> {
        let ds = self.slope_dfg_c_per_pm - self.slope_spdc_c_per_pm;
        (ds != 0.0).then(|| self.lambda_ref_nm + (self.t_spdc_ref_c - self.t_dfg_ref_c) / ds / 1000.0)
    }
}

/// (t_dfg, t_spdc) in °C at the given pump wavelength.
pub fn predict_operating_points(model: &TuningModel, lambda_pump_nm: f64) -> (f64, f64) {
    (model.t_dfg(lambda_pump_nm), model.t_spdc(lambda_pump_nm))
}

/// Noise counts versus waveguide temperature, measured at the reference pump
/// wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    samples: Vec<(f64, f64)>,
}

impl NoiseProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("noise_profile", format!("needs >= 2 samples, got {}", samples.len())));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(
                    "noise_profile",
                    format!("temperatures must be strictly increasing (rows {} and {})", i, i + 1),
                ));
            }
        }
        if let Some(i) = samples.iter().position(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::invalid("noise_profile", format!("non-finite value in row {i}")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn support(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Linear interpolation; None outside the sampled range.
    pub fn interpolate(&self, t_c: f64) -> Option<f64> {
        let (lo, hi) = self.support();
        if !(t_c >= lo && t_c <= hi) {
            return None;
        }
        let i = self.samples.partition_point(|s| s.0 <= t_c);
        if i == self.samples.len() {
            return Some(self.samples[i - 1].1);
        }
        let (t0, n0) = self.samples[i - 1];
        let (t1, n1) = self.samples[i];
        Some(n0 + (n1 - n0) * (t_c - t0) / (t1 - t0))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|&(t, n)| (t, n * factor)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningSuggestion {
    pub lambda_opt_nm: f64,
    pub predicted_noise_hz: f64,
    pub worst_lambda_nm: f64,
    pub worst_noise_hz: f64,
    /// (λ, t_dfg, predicted noise) for every grid point.
    pub scan: Vec<(f64, f64, f64)>,
}

impl DetuningSuggestion {
    pub fn reduction_factor(&self) -> f64 {
        self.worst_noise_hz / self.predicted_noise_hz
    }
}

/// Noise seen at the DFG phase-matching temperature for pump wavelength λ.
///
/// The profile rides the SPDC peak: at detuning Δλ its features sit
/// slope_spdc·Δλ higher in temperature than in the reference measurement.
pub fn noise_at(model: &TuningModel, profile: &NoiseProfile, lambda_nm: f64) -> Result<f64> {
    let t = model.t_dfg(lambda_nm);
    let shifted = t - model.slope_spdc_c_per_pm * model.detuning_pm(lambda_nm);
    profile.interpolate(shifted).ok_or_else(|| {
        let (lo, hi) = profile.support();
        Error::OutOfRange {
            lambda_nm,
            temperature_c: shifted,
            lo_c: lo,
            hi_c: hi,
        }
    })
}

/// Grid search for the pump wavelength minimizing noise at the DFG operating
/// temperature. Ties go to the smallest wavelength.
pub fn suggest_pump_detuning(
    model: &TuningModel,
    profile: &NoiseProfile,
    lambda_range_nm: (f64, f64),
    grid_points: usize,
) -> Result<DetuningSuggestion> {
    let (lo, hi) = lambda_range_nm;
    if grid_points < 2 {
        return Err(Error::invalid("grid_points", format!("must be >= 2, got {grid_points}")));
    }
    if !(lo < hi && lo > 0.0 && hi.is_finite()) {
        return Err(Error::invalid("lambda_range_nm", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut scan = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let lambda = if i + 1 == grid_points { hi } else { lo + step * i as f64 };
        scan.push((lambda, model.t_dfg(lambda), noise_at(model, profile, lambda)?));
    }
    let mut best = 0;
    let mut worst = 0;
    for (i, s) in scan.iter().enumerate() {
        if s.2 < scan[best].2 {
            best = i;
        }
        if s.2 > scan[worst].2 {
            worst = i;
        }
    }
    Ok(DetuningSuggestion {
        lambda_opt_nm: scan[best].0,
        predicted_noise_hz: scan[best].2,
        worst_lambda_nm: scan[worst].0,
        worst_noise_hz: scan[worst].2,
        scan,
    })
}
