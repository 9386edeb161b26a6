use std::path::Path;

use anyhow::{bail, Context, Result};
use qfcsim::cme::{eta_low_conversion_lossy, eta_sin2, internal_efficiency_curve, CmeParams};
use qfcsim::defect::{Defect, DefectMap, EfficiencyMode, PoledWaveguide};
use qfcsim::fitting::{
    correct_higher_modes, fit_efficiency_low_conversion, fit_efficiency_sin2, fit_noise, FitResult, NoiseModelKind,
};
use qfcsim::loss::{cutback_fit, CutbackDataset, FpMeasurement, FringeSource};
use qfcsim::monte_carlo::{efficiency_distribution, probability_vs_length, McConfig, WidthDistribution};
use qfcsim::noise::{enr_curve, noise, NoiseParams, SignConvention};
use qfcsim::tuning::{suggest_pump_detuning, NoiseProfile, TuningModel};
use qfcsim::units::{cm_to_mm, mm_to_cm, mw_to_w, percent_eta_nor_to_internal, w_to_mw};
use qfcsim::{external_efficiency, LossSet, ThroughputBudget, WaveguideSpec};
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::sha256_hex;
use crate::table::{self, Cell, Table};

/// Minimum trial count accepted by `mc`.
pub const MIN_TRIALS: usize = 100;

type Predictor = Box<dyn Fn(f64, f64) -> Result<f64>>;

pub struct Output {
    pub summary: Value,
    pub tables: Vec<Table>,
    /// Digests of input files, folded into the config digest.
    pub inputs: Vec<(String, String)>,
    /// False when an iterative fit stopped before converging.
    pub converged: bool,
}

impl Output {
    fn new(summary: Value, tables: Vec<Table>) -> Self {
        Self {
            summary,
            tables,
            inputs: Vec::new(),
            converged: true,
        }
    }
}

pub struct RunContext {
    pub seed: u64,
    pub threads: Option<usize>,
}

pub fn run(cmd: &Command, ctx: &RunContext) -> Result<Output> {
    match cmd {
        Command::TuningCurve(a) => tuning_curve(a),
        Command::Evolution(a) => evolution(a),
        Command::Mc(a) => mc(a, ctx),
        Command::Cme(a) => cme(a),
        Command::Noise(a) => noise_sweep(a),
        Command::Budget(a) => budget(a),
        Command::Fit(a) => fit(a),
        Command::Loss(a) => loss(a),
        Command::Detune(a) => detune(a),
    }
}

fn spec(g: &Geometry) -> Result<WaveguideSpec> {
    Ok(WaveguideSpec::uv_to_telecom(mm_to_cm(g.length_mm), g.period_um)?)
}

fn mode(m: Mode) -> EfficiencyMode {
    match m {
        Mode::AtNominalQ => EfficiencyMode::AtNominalQ,
        Mode::PeakInWindow => EfficiencyMode::PeakInWindow,
    }
}

fn losses(l: &Losses) -> Result<LossSet> {
    Ok(LossSet::new(l.alpha1, l.alpha2, l.alpha3)?)
}

fn read(path: &Path, schema: &[&str], out: &mut Vec<(String, String)>) -> Result<Vec<(f64, f64)>> {
    let (rows, bytes) = table::read_pairs(path, schema)?;
    out.push((path.display().to_string(), sha256_hex(&bytes)));
    Ok(rows)
}

fn waveguide(g: &Geometry, defects: &str, inputs: &mut Vec<(String, String)>) -> Result<PoledWaveguide> {
    let s = spec(g)?;
    let map = if defects == "none" {
        DefectMap::empty()
    } else {
        let rows = read(Path::new(defects), table::DEFECT_MAP, inputs)?;
        DefectMap::new(rows.into_iter().map(|(x, w)| Defect::new(x, w)).collect())?
    };
    Ok(PoledWaveguide::new(s, map)?)
}

fn tuning_curve(a: &TuningCurveArgs) -> Result<Output> {
    let mut inputs = Vec::new();
    let wg = waveguide(&a.geometry, &a.defects, &mut inputs)?;
    if !(a.span > 0.0 && a.span.is_finite()) {
        bail!("--span must be > 0, got {}", a.span);
    }
    let s = wg.spec();
    let half = a.span / s.length_um();
    let curve = wg.tuning_curve(s.nominal_q() - half, s.nominal_q() + half, a.points)?;
    let (peak_q, peak) = curve.peak();
    let mut t = Table::new("tuning_curve", &["q_per_um", "detuning_per_l", "relative_eta"]);
    for (q, e) in curve.q_values.iter().zip(&curve.relative_eta) {
        t.push([Cell::from(*q), Cell::from((q - s.nominal_q()) * s.length_um()), Cell::from(*e)]);
    }
    let summary = json!({
        "nominal_q_per_um": s.nominal_q(),
        "peak_q_per_um": peak_q,
        "peak_relative_eta": peak,
        "fwhm_per_um": curve.fwhm(),
        "mode": a.mode,
        "relative_efficiency": wg.relative_efficiency(mode(a.mode)),
        "defects": wg.defects().len(),
    });
    let mut out = Output::new(summary, vec![t]);
    out.inputs = inputs;
    Ok(out)
}

fn evolution(a: &EvolutionArgs) -> Result<Output> {
    let mut inputs = Vec::new();
    let wg = waveguide(&a.geometry, &a.defects, &mut inputs)?;
    let s = wg.spec();
    let q = s.nominal_q() + a.detuning / s.length_um();
    let ev = wg.efficiency_evolution(q, a.points)?;
    let mut t = Table::new("evolution", &["z_mm", "relative_eta"]);
    for (z, e) in &ev {
        t.push([Cell::from(cm_to_mm(*z)), Cell::from(*e)]);
    }
    let summary = json!({
        "q_per_um": q,
        "final_relative_eta": ev.last().map(|p| p.1),
        "max_relative_eta": ev.iter().map(|p| p.1).fold(0.0, f64::max),
    });
    let mut out = Output::new(summary, vec![t]);
    out.inputs = inputs;
    Ok(out)
}

/// Parses `0..10`, `1,2` or mixtures like `0,3..5` (ranges inclusive).
pub fn parse_counts(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().with_context(|| format!("bad range start in `{part}`"))?;
            let hi: usize = hi.trim().parse().with_context(|| format!("bad range end in `{part}`"))?;
            if hi < lo {
                bail!("empty range `{part}`");
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().with_context(|| format!("bad defect count `{part}`"))?);
        }
    }
    if out.is_empty() {
        bail!("--defect-counts is empty");
    }
    Ok(out)
}

fn mc(a: &McArgs, ctx: &RunContext) -> Result<Output> {
    if a.trials < MIN_TRIALS {
        bail!("--trials must be at least {MIN_TRIALS} for a valid confidence interval, got {}", a.trials);
    }
    let counts = parse_counts(&a.defect_counts)?;
    let template = spec(&a.geometry)?;
    let dist = WidthDistribution::poisson(a.width_mean_um)?;
    let mut cfg = McConfig::new(a.trials, ctx.seed)
        .with_threshold(a.threshold)
        .with_mode(mode(a.mode));
    if let Some(n) = ctx.threads {
        cfg = cfg.with_threads(n);
    }
    let lengths_cm: Vec<f64> = if a.lengths_mm.is_empty() {
        vec![template.length_cm()]
    } else {
        a.lengths_mm.iter().map(|&l| mm_to_cm(l)).collect()
    };
    let mut t = Table::new(
        "mc",
        &["n_defects", "length_mm", "trials", "successes", "p_hat", "ci_lo", "ci_hi", "zero_width_draws"],
    );
    let mut rows = Vec::new();
    for &n in &counts {
        for y in probability_vs_length(&template, n, &lengths_cm, &dist, &cfg)? {
            t.push([
                Cell::from(n),
                Cell::from(cm_to_mm(y.length_cm)),
                Cell::from(y.trials),
                Cell::from(y.successes),
                Cell::from(y.p_hat),
                Cell::from(y.ci95.0),
                Cell::from(y.ci95.1),
                Cell::from(y.zero_width_draws),
            ]);
            rows.push(json!({
                "n_defects": n,
                "length_mm": cm_to_mm(y.length_cm),
                "p_hat": y.p_hat,
                "ci95": [y.ci95.0, y.ci95.1],
                "zero_width_draws": y.zero_width_draws,
            }));
        }
    }
    let mut tables = vec![t];
    if let Some(bins) = a.bins {
        let mut h = Table::new("histogram", &["n_defects", "bin_lo", "bin_hi", "count", "mass"]);
        for &n in &counts {
            let hist = efficiency_distribution(&template, n, &dist, &cfg, bins)?;
            for i in 0..bins {
                h.push([
                    Cell::from(n),
                    Cell::from(hist.bin_edges[i]),
                    Cell::from(hist.bin_edges[i + 1]),
                    Cell::from(hist.counts[i]),
                    Cell::from(hist.mass[i]),
                ]);
            }
        }
        tables.push(h);
    }
    let summary = json!({
        "trials": a.trials,
        "threshold": a.threshold,
        "mode": a.mode,
        "width_mean_um": a.width_mean_um,
        "results": rows,
    });
    Ok(Output::new(summary, tables))
}

fn sweep_w(s: &PumpSweep) -> Result<Vec<f64>> {
    let PumpSweep {
        pump_start_mw: lo,
        pump_stop_mw: hi,
        pump_step_mw: step,
    } = *s;
    if !(lo >= 0.0 && hi >= lo && step > 0.0 && hi.is_finite()) {
        bail!("pump sweep needs 0 <= start <= stop and step > 0, got {lo}..{hi} step {step}");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| mw_to_w(lo + step * i as f64)).collect())
}

fn cme_params(length_mm: f64, eta_nor_pct: f64, l: &Losses) -> Result<CmeParams> {
    Ok(CmeParams::uv_to_telecom(
        percent_eta_nor_to_internal(eta_nor_pct),
        losses(l)?,
        mm_to_cm(length_mm),
        0.0,
    )?)
}

fn argmax(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    points.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.1 >= p.1 => Some(b),
        _ => Some(p),
    })
}

fn cme(a: &CmeArgs) -> Result<Output> {
    let params = cme_params(a.length_mm, a.eta_nor_pct, &a.losses)?;
    let pumps = sweep_w(&a.sweep)?;
    let curve = internal_efficiency_curve(&params, &pumps)?;
    let l = params.length_cm;
    let ls = params.losses;
    let mut t = Table::new("cme", &["pump_mw", "pump_out_mw", "eta_int", "eta_sin2", "eta_low_conversion"]);
    for &(p, eta) in &curve {
        let p_out = p * (-ls.alpha2_per_cm() * l).exp();
        t.push([
            Cell::from(w_to_mw(p)),
            Cell::from(w_to_mw(p_out)),
            Cell::from(eta),
            Cell::from(eta_sin2(params.eta_nor, p, l)),
            Cell::from(eta_low_conversion_lossy(params.eta_nor, p_out, &ls, l)),
        ]);
    }
    let peak = argmax(&curve);
    let summary = json!({
        "eta_nor_per_w_cm2": params.eta_nor,
        "peak_pump_mw": peak.map(|p| w_to_mw(p.0)),
        "peak_eta_int": peak.map(|p| p.1),
    });
    Ok(Output::new(summary, vec![t]))
}

fn convention(c: Convention) -> SignConvention {
    match c {
        Convention::Printed => SignConvention::Printed,
        Convention::Attenuating => SignConvention::Attenuating,
    }
}

fn budget_of(b: &Budget) -> Result<ThroughputBudget> {
    Ok(ThroughputBudget::new(b.twg, b.collect, b.filter, b.detector)?)
}

fn noise_sweep(a: &NoiseArgs) -> Result<Output> {
    let cme = cme_params(a.length_mm, a.eta_nor_pct, &a.losses)?;
    let np = NoiseParams::new(
        a.a,
        a.losses.alpha2,
        a.losses.alpha3,
        cme.eta_nor,
        a.eta_int_max,
        cme.length_cm,
    )?
    .with_sign_convention(convention(a.convention));
    let curve = enr_curve(&sweep_w(&a.sweep)?, &np, &cme, &budget_of(&a.budget)?)?;
    let mut t = Table::new("noise", &["pump_mw", "eta_ext", "counts_hz", "enr"]);
    for p in &curve.points {
        t.push([Cell::from(w_to_mw(p.pump_w)), Cell::from(p.eta_ext), Cell::from(p.noise_hz), Cell::from(p.enr)]);
    }
    let summary = json!({
        "argmax_eta_ext_mw": w_to_mw(curve.argmax_eta_ext_w),
        "argmax_enr_mw": curve.argmax_enr_w.map(w_to_mw),
        "max_eta_ext": curve.points.iter().map(|p| p.eta_ext).fold(0.0, f64::max),
    });
    Ok(Output::new(summary, vec![t]))
}

fn budget(a: &BudgetArgs) -> Result<Output> {
    let b = ThroughputBudget::new(a.twg, a.collect, a.filter, a.detector)?;
    if !(a.eta_int >= 0.0 && a.eta_int.is_finite()) {
        bail!("--eta-int must be >= 0, got {}", a.eta_int);
    }
    let eta_ext = external_efficiency(&b, a.eta_int);
    let summary = json!({
        "eta_ext": eta_ext,
        "eta_ext_detected": eta_ext * b.detector_efficiency(),
        "factors": { "twg": a.twg, "eta_int": a.eta_int, "collect": a.collect, "filter": a.filter, "detector": a.detector },
    });
    Ok(Output::new(summary, Vec::new()))
}

fn fit_summary(fit: &FitResult) -> Value {
    let params: Vec<Value> = fit
        .params
        .iter()
        .map(|p| {
            json!({
                "name": p.name, "value": p.value, "stderr": p.stderr,
                "ci95": [p.ci95_lo, p.ci95_hi],
            })
        })
        .collect();
    json!({ "params": params, "r2": fit.r2, "iterations": fit.iterations, "converged": fit.converged })
}

fn fit(a: &FitArgs) -> Result<Output> {
    let mut inputs = Vec::new();
    let l = mm_to_cm(a.length_mm);
    let ls = losses(&a.losses)?;
    let noise_kind = match a.model {
        FitModel::NoiseLossless => Some(NoiseModelKind::Lossless),
        FitModel::NoiseLossy => Some(NoiseModelKind::Lossy),
        _ => None,
    };
    let schema = if noise_kind.is_some() {
        table::NOISE_SWEEP
    } else {
        table::EFFICIENCY_SWEEP
    };
    let data: Vec<(f64, f64)> = read(&a.data, schema, &mut inputs)?
        .into_iter()
        .map(|(p, y)| (mw_to_w(p), y))
        .collect();

    let (fit, predict): (FitResult, Predictor) = match (a.model, noise_kind) {
        (FitModel::Sin2, _) => (fit_efficiency_sin2(&data, l)?, Box::new(move |p, v| Ok(eta_sin2(v, p, l)))),
        (FitModel::Lowconv, _) => (
            fit_efficiency_low_conversion(&data, &ls, l, a.n_points)?,
            Box::new(move |p, v| Ok(eta_low_conversion_lossy(v, p, &ls, l))),
        ),
        (_, Some(kind)) => {
            let fixed = NoiseParams::new(
                1.0,
                a.losses.alpha2,
                a.losses.alpha3,
                percent_eta_nor_to_internal(a.eta_nor_pct),
                a.eta_int_max,
                l,
            )?
            .with_sign_convention(convention(a.convention));
            let f = fit_noise(&data, &fixed, kind)?;
            (f, Box::new(move |p, v| Ok(noise(p, &fixed.with_a(v)?)?)))
        }
        _ => unreachable!("every model is covered"),
    };
    let value = fit.params[0].value;
    let mut t = Table::new("fit", &["pump_mw", "observed", "fitted", "residual"]);
    for &(p, y) in &data {
        let m = predict(p, value)?;
        t.push([Cell::from(w_to_mw(p)), Cell::from(y), Cell::from(m), Cell::from(y - m)]);
    }
    let mut summary = fit_summary(&fit);
    summary["model"] = json!(a.model);
    if noise_kind.is_none() {
        summary["eta_nor_pct"] = json!(qfcsim::units::internal_eta_nor_to_percent(value));
        if let (Some(m), Some(s)) = (a.measured_peak, a.simulated_peak) {
            let corrected = correct_higher_modes(value, m, s)?;
            summary["corrected_eta_nor"] = json!(corrected);
            summary["corrected_eta_nor_pct"] = json!(qfcsim::units::internal_eta_nor_to_percent(corrected));
        }
    }
    let mut out = Output::new(summary, vec![t]);
    out.inputs = inputs;
    out.converged = fit.converged;
    Ok(out)
}

fn loss(cmd: &LossCommand) -> Result<Output> {
    let mut inputs = Vec::new();
    let mut out = match cmd {
        LossCommand::Cutback { data } => {
            let rows = read(data, table::CUTBACK, &mut inputs)?;
            let fit = cutback_fit(&CutbackDataset::new(rows.clone())?)?;
            let mut t = Table::new("cutback", &["length_cm", "transmission", "ln_transmission", "fitted_ln"]);
            for &(l, tr) in &rows {
                t.push([
                    Cell::from(l),
                    Cell::from(tr),
                    Cell::from(tr.ln()),
                    Cell::from(fit.intercept - fit.alpha_per_cm * l),
                ]);
            }
            let summary = json!({
                "method": "cutback",
                "alpha_per_cm": fit.alpha_per_cm,
                "stderr": fit.stderr,
                "r2": fit.r2,
                "intercept": fit.intercept,
            });
            Output::new(summary, vec![t])
        }
        LossCommand::Fp {
            data,
            contrast,
            index,
            length_mm,
        } => {
            let source = match (data, contrast) {
                (Some(path), _) => FringeSource::Spectrum(read(path, table::FP_SPECTRUM, &mut inputs)?),
                (None, Some(b)) => FringeSource::Contrast(*b),
                (None, None) => bail!("give a spectrum file or --contrast"),
            };
            let r = FpMeasurement::new(source, *index, mm_to_cm(*length_mm))?.evaluate()?;
            let summary = json!({
                "method": "fabry-perot",
                "alpha_per_cm": r.alpha_per_cm,
                "contrast": r.b,
                "extrema": r.contrast.as_ref().map(|c| json!({
                    "maxima_found": c.maxima_found, "minima_found": c.minima_found,
                    "maxima_used": c.maxima_used, "minima_used": c.minima_used,
                    "t_max": c.t_max, "t_min": c.t_min,
                })),
            });
            Output::new(summary, Vec::new())
        }
    };
    out.inputs = inputs;
    Ok(out)
}

fn detune(a: &DetuneArgs) -> Result<Output> {
    let mut inputs = Vec::new();
    let model = TuningModel::new(
        a.lambda_ref_nm,
        a.t_dfg_ref_c,
        a.slope_dfg_c_per_pm,
        a.t_spdc_ref_c,
        a.slope_spdc_c_per_pm,
    )?;
    let profile = NoiseProfile::new(read(&a.profile, table::NOISE_PROFILE, &mut inputs)?)?;
    let s = suggest_pump_detuning(&model, &profile, (a.lambda_min_nm, a.lambda_max_nm), a.grid_points)?;
    let mut t = Table::new("detune", &["lambda_nm", "t_dfg_c", "counts_hz"]);
    for &(l, temp, n) in &s.scan {
        t.push([Cell::from(l), Cell::from(temp), Cell::from(n)]);
    }
    let summary = json!({
        "lambda_opt_nm": s.lambda_opt_nm,
        "t_dfg_opt_c": model.t_dfg(s.lambda_opt_nm),
        "predicted_noise_hz": s.predicted_noise_hz,
        "worst_lambda_nm": s.worst_lambda_nm,
        "worst_noise_hz": s.worst_noise_hz,
        "reduction_factor": s.reduction_factor(),
    });
    let mut out = Output::new(summary, vec![t]);
    out.inputs = inputs;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defect_count_lists() {
        assert_eq!(parse_counts("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_counts("1,2").unwrap(), vec![1, 2]);
        assert_eq!(parse_counts("0, 4..5").unwrap(), vec![0, 4, 5]);
        assert!(parse_counts("3..1").is_err());
        assert!(parse_counts("a").is_err());
        assert!(parse_counts("").is_err());
    }

    #[test]
    fn sweep_includes_both_ends() {
        let s = sweep_w(&PumpSweep {
            pump_start_mw: 2.0,
            pump_stop_mw: 150.0,
            pump_step_mw: 2.0,
        })
        .unwrap();
        assert_eq!(s.len(), 75);
        assert!((s[74] - 0.150).abs() < 1e-15);
        assert!(sweep_w(&PumpSweep {
            pump_start_mw: 5.0,
            pump_stop_mw: 1.0,
            pump_step_mw: 1.0
        })
        .is_err());
    }
}
