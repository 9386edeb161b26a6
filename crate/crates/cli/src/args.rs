use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qfcsim", version, about = "QPM waveguide simulation and measurement analysis")]
pub struct Cli {
    /// Master seed; falls back to QFCSIM_SEED, then 42.
    #[arg(long, global = true, env = "QFCSIM_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for Monte Carlo and sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for CSV tables and the JSON summary.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Relative efficiency versus grating frequency for a defect map.
    TuningCurve(TuningCurveArgs),
    /// Relative efficiency along the waveguide.
    Evolution(EvolutionArgs),
    /// Yield probability over random defect maps.
    Mc(McArgs),
    /// Lossy coupled-mode internal efficiency over a pump sweep.
    Cme(CmeArgs),
    /// Noise counts, external efficiency and ENR over a pump sweep.
    Noise(NoiseArgs),
    /// External efficiency from the throughput chain.
    Budget(BudgetArgs),
    /// Fit efficiency or noise data.
    Fit(FitArgs),
    /// Propagation loss from cut-back or Fabry–Pérot data.
    #[command(subcommand)]
    Loss(LossCommand),
    /// Pump wavelength that minimizes noise at the DFG operating point.
    Detune(DetuneArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TuningCurve(_) => "tuning-curve",
            Command::Evolution(_) => "evolution",
            Command::Mc(_) => "mc",
            Command::Cme(_) => "cme",
            Command::Noise(_) => "noise",
            Command::Budget(_) => "budget",
            Command::Fit(_) => "fit",
            Command::Loss(_) => "loss",
            Command::Detune(_) => "detune",
        }
    }
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct Geometry {
    /// Waveguide length in mm.
    #[arg(long, default_value_t = 20.0)]
    pub length_mm: f64,
    /// Poling period in µm.
    #[arg(long, default_value_t = 3.07)]
    pub period_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AtNominalQ,
    PeakInWindow,
}

#[derive(Debug, Args, Serialize)]
pub struct TuningCurveArgs {
    #[command(flatten)]
    pub geometry: Geometry,
    /// Defect map CSV (position_um,width_um) or `none`.
    #[arg(long, default_value = "none")]
    pub defects: String,
    /// Samples across the scan window.
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    /// Half-width of the scan window in units of 1/L.
    #[arg(long, default_value_t = 10.0)]
    pub span: f64,
    /// How the summary relative efficiency is taken.
    #[arg(long, value_enum, default_value_t = Mode::PeakInWindow)]
    pub mode: Mode,
}

#[derive(Debug, Args, Serialize)]
pub struct EvolutionArgs {
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long, default_value = "none")]
    pub defects: String,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Offset from 1/Λ in units of 1/L.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub detuning: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct McArgs {
    #[command(flatten)]
    pub geometry: Geometry,
    /// Defect counts: comma list and/or inclusive ranges, e.g. `0..10` or `1,2,5..7`.
    #[arg(long, default_value = "0..10")]
    pub defect_counts: String,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Poisson mean of the defect width in µm.
    #[arg(long, default_value_t = 12.3)]
    pub width_mean_um: f64,
    /// Relative-efficiency success threshold.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Mode::PeakInWindow)]
    pub mode: Mode,
    /// Extra lengths in mm (comma list); defaults to --length-mm.
    #[arg(long, value_delimiter = ',')]
    pub lengths_mm: Vec<f64>,
    /// Also write a relative-efficiency histogram with this many bins.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct Losses {
    /// Signal loss in cm⁻¹.
    #[arg(long, default_value_t = 0.22)]
    pub alpha1: f64,
    /// Pump loss in cm⁻¹.
    #[arg(long, default_value_t = 0.20)]
    pub alpha2: f64,
    /// Idler loss in cm⁻¹.
    #[arg(long, default_value_t = 0.12)]
    pub alpha3: f64,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct PumpSweep {
    #[arg(long, default_value_t = 2.0)]
    pub pump_start_mw: f64,
    #[arg(long, default_value_t = 150.0)]
    pub pump_stop_mw: f64,
    #[arg(long, default_value_t = 2.0)]
    pub pump_step_mw: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CmeArgs {
    /// Waveguide length in mm.
    #[arg(long, default_value_t = 20.0)]
    pub length_mm: f64,
    /// Normalized efficiency in %/(W·cm²).
    #[arg(long, default_value_t = 839.0)]
    pub eta_nor_pct: f64,
    #[command(flatten)]
    pub losses: Losses,
    #[command(flatten)]
    pub sweep: PumpSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    Printed,
    Attenuating,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct Budget {
    #[arg(long, default_value_t = 0.49)]
    pub twg: f64,
    #[arg(long, default_value_t = 0.80)]
    pub collect: f64,
    #[arg(long, default_value_t = 0.79)]
    pub filter: f64,
    #[arg(long, default_value_t = 0.85)]
    pub detector: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 20.0)]
    pub length_mm: f64,
    /// Noise coefficient a in Hz/(W·cm).
    #[arg(long)]
    pub a: f64,
    #[arg(long, default_value_t = 839.0)]
    pub eta_nor_pct: f64,
    /// Peak internal efficiency used inside the noise model.
    #[arg(long, default_value_t = 0.93)]
    pub eta_int_max: f64,
    #[arg(long, value_enum, default_value_t = Convention::Printed)]
    pub convention: Convention,
    #[command(flatten)]
    pub losses: Losses,
    #[command(flatten)]
    pub sweep: PumpSweep,
    #[command(flatten)]
    pub budget: Budget,
}

#[derive(Debug, Args, Serialize)]
pub struct BudgetArgs {
    #[arg(long)]
    pub twg: f64,
    #[arg(long)]
    pub eta_int: f64,
    #[arg(long)]
    pub collect: f64,
    #[arg(long)]
    pub filter: f64,
    #[arg(long, default_value_t = 1.0)]
    pub detector: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    Sin2,
    Lowconv,
    NoiseLossless,
    NoiseLossy,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: FitModel,
    /// pump_mw,eta_int for efficiency models; pump_mw,counts_hz for noise models.
    pub data: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub length_mm: f64,
    #[command(flatten)]
    pub losses: Losses,
    /// Points used by the low-conversion fit.
    #[arg(long, default_value_t = 5)]
    pub n_points: usize,
    /// Fixed η_nor for noise fits, %/(W·cm²).
    #[arg(long, default_value_t = 839.0)]
    pub eta_nor_pct: f64,
    #[arg(long, default_value_t = 0.93)]
    pub eta_int_max: f64,
    #[arg(long, value_enum, default_value_t = Convention::Printed)]
    pub convention: Convention,
    /// Measured peak internal efficiency for the higher-mode correction.
    #[arg(long, requires = "simulated_peak")]
    pub measured_peak: Option<f64>,
    /// Simulated peak internal efficiency for the higher-mode correction.
    #[arg(long, requires = "measured_peak")]
    pub simulated_peak: Option<f64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossCommand {
    /// Linear fit of ln T against length.
    Cutback {
        /// length_cm,transmission
        data: PathBuf,
    },
    /// Fabry–Pérot fringe contrast.
    Fp {
        /// frequency_ghz,transmission spectrum.
        #[arg(required_unless_present = "contrast", conflicts_with = "contrast")]
        data: Option<PathBuf>,
        /// Contrast b = Tmin/Tmax given directly.
        #[arg(long)]
        contrast: Option<f64>,
        #[arg(long, default_value_t = 2.14)]
        index: f64,
        #[arg(long, default_value_t = 20.0)]
        length_mm: f64,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct DetuneArgs {
    /// temperature_c,counts_hz noise profile.
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub lambda_min_nm: f64,
    #[arg(long)]
    pub lambda_max_nm: f64,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 527.37)]
    pub lambda_ref_nm: f64,
    #[arg(long, default_value_t = 33.0)]
    pub t_dfg_ref_c: f64,
    #[arg(long, default_value_t = -0.01, allow_hyphen_values = true)]
    pub slope_dfg_c_per_pm: f64,
    #[arg(long, default_value_t = 33.0)]
    pub t_spdc_ref_c: f64,
    #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
    pub slope_spdc_c_per_pm: f64,
}
