//! Config-driven experiment runner: continuity scans, deviation-decay
//! fits, avalanche fuzzing, schedule traces, and file emission.
//!
//! Identical config + seed produces byte-identical CSV and JSON.

pub mod io;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::amo;
use crate::avalanche;
use crate::diophantine::{continued_fraction, Omega};
use crate::error::{Error, Result};
use crate::lyapunov;
use crate::multiscale::{self, GridEvaluator, ScheduleConstants};
use crate::potential::PotentialSpec;

use io::{fmt_float, CsvWriter};

pub const OUT_DIR_ENV: &str = "COCYCLE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Estimate,
    EnergyScan,
    OmegaContinuity,
    DeviationDecay,
    AvalancheFuzz,
    ScheduleTrace,
    Corollary2,
    UniformBound,
    AmoSpectrum,
}

/// A single experiment description. Unknown keys are rejected; fields not
/// used by the selected kind are ignored after validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Omega>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_probe: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_energies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_budget_log: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            potential: None,
            lambda: None,
            omega: None,
            energy: None,
            e_min: None,
            e_max: None,
            e_step: None,
            kappa: None,
            scale_n: None,
            grid_m: None,
            q_probe: None,
            n_energies: None,
            trials: None,
            seed: None,
            budget_n: None,
            verify_levels: None,
            level_budget: None,
            q_budget_log: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn omega(&self) -> Omega {
        self.omega.clone().unwrap_or(Omega::GoldenMean)
    }

    fn potential(&self) -> Result<PotentialSpec> {
        match (&self.potential, self.lambda) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(l)) => Ok(amo::amo_potential(l)),
            (None, None) => Err(Error::Config(
                "either `potential` or `lambda` must be given".into(),
            )),
        }
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| Error::Config("`lambda` is required for this experiment".into()))
    }

    fn grid_m(&self, default: usize) -> Result<usize> {
        let m = self.grid_m.unwrap_or(default);
        if m < lyapunov::MIN_GRID {
            return Err(Error::Config(format!(
                "grid_m = {m} is below the minimum of {}",
                lyapunov::MIN_GRID
            )));
        }
        Ok(m)
    }

    fn scale_n(&self, default: u64) -> Result<u64> {
        let n = self.scale_n.unwrap_or(default);
        if n == 0 {
            return Err(Error::Config("scale_n must be >= 1".into()));
        }
        Ok(n)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FitOutcome {
    Fit(FitResult),
    /// Fewer than 3 positive points were available.
    Insufficient {
        positive_points: usize,
        dropped_nonpositive: usize,
    },
}

/// Least squares of log(value) against q; points with value ≤ 0 are
/// dropped and counted.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> FitOutcome {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, v)| v > 0.0)
        .map(|&(q, v)| (q, v.ln()))
        .collect();
    let dropped = points.len() - kept.len();
    if kept.len() < 3 {
        return FitOutcome::Insufficient {
            positive_points: kept.len(),
            dropped_nonpositive: dropped,
        };
    }
    let n = kept.len() as f64;
    let sx: f64 = kept.iter().map(|p| p.0).sum();
    let sy: f64 = kept.iter().map(|p| p.1).sum();
    let sxx: f64 = kept.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = kept.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return FitOutcome::Insufficient {
            positive_points: kept.len(),
            dropped_nonpositive: dropped,
        };
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = kept.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = kept
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot < 1e-30 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    FitOutcome::Fit(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn resolve_out_dir(config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &config.out_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("cocycle-out")
}

/// Runs one experiment: writes a manifest, one CSV per data series, a JSON
/// summary, and simple SVG plots where a natural series exists.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let out_dir = resolve_out_dir(config);
    let mut files = Vec::new();

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed(),
        "config": config,
    });

    let summary = match config.kind {
        ExperimentKind::Estimate => run_estimate(config, &out_dir, &mut files)?,
        ExperimentKind::EnergyScan => run_energy_scan(config, &out_dir, &mut files)?,
        ExperimentKind::OmegaContinuity => run_omega_continuity(config, &out_dir, &mut files)?,
        ExperimentKind::DeviationDecay => run_deviation_decay(config, &out_dir, &mut files)?,
        ExperimentKind::AvalancheFuzz => run_avalanche_fuzz(config, &out_dir, &mut files)?,
        ExperimentKind::ScheduleTrace => run_schedule_trace(config, &out_dir, &mut files)?,
        ExperimentKind::Corollary2 => run_corollary2(config, &out_dir, &mut files)?,
        ExperimentKind::UniformBound => run_uniform_bound(config, &out_dir, &mut files)?,
        ExperimentKind::AmoSpectrum => run_amo_spectrum(config, &out_dir, &mut files)?,
    };

    let manifest_path = out_dir.join("manifest.json");
    io::write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    let summary_path = out_dir.join("summary.json");
    io::write_json(&summary_path, &summary)?;
    files.push(summary_path);

    Ok(RunArtifacts {
        out_dir,
        files,
        summary,
    })
}

fn run_estimate(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let v = config.potential()?;
    let omega = config.omega().value();
    let energy = config
        .energy
        .ok_or_else(|| Error::Config("`energy` is required for estimate".into()))?;
    let n = config.scale_n(1000)?;
    let m = config.grid_m(256)?;

    let ext = lyapunov::extrapolate_l(&v, omega, energy, n, m)?;
    let est_n = lyapunov::finite_scale_l(&v, omega, energy, n, m)?;
    let est_2n = lyapunov::finite_scale_l(&v, omega, energy, 2 * n, m)?;

    let mut csv = CsvWriter::new(&["N", "L_N", "dispersion"]);
    csv.row_floats(&[n as f64, est_n.value, est_n.dispersion]);
    csv.row_floats(&[(2 * n) as f64, est_2n.value, est_2n.dispersion]);
    let path = out.join("estimate.csv");
    csv.write_to(&path)?;
    files.push(path);

    Ok(json!({
        "kind": "estimate",
        "energy": energy,
        "n0": n,
        "l_n0": ext.l_n0,
        "l_2n0": ext.l_2n0,
        "l_extrap": ext.extrapolated,
        "dispersion_n0": est_n.dispersion,
    }))
}

fn run_energy_scan(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let v = config.potential()?;
    let omega = config.omega().value();
    let n = config.scale_n(2000)?;
    let m = config.grid_m(256)?;
    let default_half_width = config.lambda.map(|l| 2.0 + l.abs() + 1.0);
    let e_min = config
        .e_min
        .or(default_half_width.map(|w| -w))
        .ok_or_else(|| Error::Config("`e_min` required (no lambda to derive it from)".into()))?;
    let e_max = config
        .e_max
        .or(default_half_width)
        .ok_or_else(|| Error::Config("`e_max` required (no lambda to derive it from)".into()))?;
    let e_step = config.e_step.unwrap_or(0.05);
    if !(e_step > 0.0) || e_max <= e_min {
        return Err(Error::Config("need e_max > e_min and e_step > 0".into()));
    }

    let count = ((e_max - e_min) / e_step).floor() as usize + 1;
    let mut csv = CsvWriter::new(&["E", "L_N", "L_2N", "L_extrap"]);
    let mut series = Vec::with_capacity(count);
    for i in 0..count {
        let e = e_min + i as f64 * e_step;
        let ext = lyapunov::extrapolate_l(&v, omega, e, n, m)?;
        csv.row_floats(&[e, ext.l_n0, ext.l_2n0, ext.extrapolated]);
        series.push((e, ext.extrapolated));
    }
    let path = out.join("energy_scan.csv");
    csv.write_to(&path)?;
    files.push(path);

    let svg = out.join("energy_scan.svg");
    io::write_svg_polyline(&svg, "extrapolated Lyapunov exponent vs E", &series)?;
    files.push(svg);

    let max_l = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min_l = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "kind": "energy_scan",
        "points": count,
        "n0": n,
        "min_l_extrap": min_l,
        "max_l_extrap": max_l,
    }))
}

fn run_omega_continuity(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let lambda = config.lambda()?;
    let omega = config.omega();
    let energy = config
        .energy
        .ok_or_else(|| Error::Config("`energy` is required for omega_continuity".into()))?;
    let n = config.scale_n(2000)?;
    let m = config.grid_m(256)?;
    let q_probe = config.q_probe.unwrap_or(55);

    let cf = continued_fraction(&omega, q_probe)?;
    let along = amo::approximant_l_gap(lambda, &cf, energy, n, m)?;
    let v = amo::amo_potential(lambda);
    let limit = lyapunov::extrapolate_l(&v, omega.value(), energy, n, m)?.extrapolated;

    let mut csv = CsvWriter::new(&["q", "omega", "L_extrap"]);
    let mut series = Vec::new();
    for (i, &(q, l)) in along.iter().enumerate() {
        let (p, _) = cf.convergents[i];
        csv.row(&[
            q.to_string(),
            fmt_float(p as f64 / q as f64),
            fmt_float(l),
        ]);
        series.push((q as f64, l));
    }
    let path = out.join("omega_continuity.csv");
    csv.write_to(&path)?;
    files.push(path);
    let svg = out.join("omega_continuity.svg");
    io::write_svg_polyline(&svg, "L along convergents", &series)?;
    files.push(svg);

    let last = along.last().map(|&(_, l)| l).unwrap_or(f64::NAN);
    Ok(json!({
        "kind": "omega_continuity",
        "energy": energy,
        "irrational_limit": limit,
        "last_rational_value": last,
        "gap_at_deepest_convergent": (last - limit).abs(),
    }))
}

fn run_deviation_decay(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let v = config.potential()?;
    let omega = config.omega();
    let energy = config.energy.unwrap_or(0.0);
    let kappa = config.kappa.unwrap_or(0.1);
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Config(format!("kappa must lie in (0,1), got {kappa}")));
    }
    let m = config.grid_m(256)?;
    let q_max = config.q_probe.unwrap_or(55);
    let q_min = 8;

    let cf = continued_fraction(&omega, q_max)?;
    let mut points = Vec::new();
    let mut csv = CsvWriter::new(&["q", "N", "measure"]);
    for &(_, q) in cf.convergents.iter().filter(|&&(_, q)| q >= q_min) {
        let n = (lyapunov::DEVIATION_SCALE_C * kappa.powi(-2) * q as f64).ceil() as u64;
        let profile = lyapunov::per_site_profile(&v, omega.value(), energy, n, m)?;
        let l_n = profile.mean();
        let dev = lyapunov::deviation_measure(&profile, l_n, kappa, q)?;
        csv.row(&[q.to_string(), n.to_string(), fmt_float(dev.measure)]);
        points.push((q as f64, dev.measure));
    }
    let path = out.join("deviation_decay.csv");
    csv.write_to(&path)?;
    files.push(path);
    let svg = out.join("deviation_decay.svg");
    io::write_svg_polyline(&svg, "deviation measure vs q", &points)?;
    files.push(svg);

    let fit = fit_exponential_decay(&points);
    Ok(json!({
        "kind": "deviation_decay",
        "kappa": kappa,
        "points": points.len(),
        "fit": fit,
    }))
}

fn run_avalanche_fuzz(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let trials = config.trials.unwrap_or(1000);
    let seed = config.seed();
    let n = 20usize;
    let floors = [1e2, 1e3, 1e4];

    let mut csv = CsvWriter::new(&["trial", "mu", "hypotheses_ok", "residual", "residual_mu_over_n"]);
    let mut c_fit = 0.0f64;
    let mut failures = 0usize;
    let mut floor_stats = Vec::new();
    for &mu in &floors {
        let mut total = 0.0;
        let mut kept = 0usize;
        for t in 0..trials {
            let trial_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add(t as u64)
                .wrapping_add((mu as u64) << 32);
            let mats = avalanche::random_hyperbolic_sequence(trial_seed, n, mu);
            let input = avalanche::AvalancheInput::new(mats, mu)?;
            let flags = avalanche::check_hypotheses(&input);
            let ok = flags.all_ok();
            if !ok {
                failures += 1;
                csv.row(&[
                    t.to_string(),
                    fmt_float(mu),
                    "false".into(),
                    String::new(),
                    String::new(),
                ]);
                continue;
            }
            let rep = avalanche::plain_report(&input, 1.0);
            let normalized = rep.residual * mu / n as f64;
            c_fit = c_fit.max(normalized);
            total += rep.residual;
            kept += 1;
            csv.row(&[
                t.to_string(),
                fmt_float(mu),
                "true".into(),
                fmt_float(rep.residual),
                fmt_float(normalized),
            ]);
        }
        floor_stats.push(json!({
            "mu": mu,
            "trials_kept": kept,
            "mean_residual": if kept > 0 { total / kept as f64 } else { f64::NAN },
        }));
    }
    let path = out.join("avalanche_fuzz.csv");
    csv.write_to(&path)?;
    files.push(path);

    let means: Vec<(f64, f64)> = floor_stats
        .iter()
        .map(|s| {
            (
                s["mu"].as_f64().unwrap(),
                s["mean_residual"].as_f64().unwrap(),
            )
        })
        .collect();
    let slope = if means.iter().all(|&(_, r)| r > 0.0) {
        (means[2].1.ln() - means[0].1.ln()) / (means[2].0.ln() - means[0].0.ln())
    } else {
        f64::NAN
    };

    Ok(json!({
        "kind": "avalanche_fuzz",
        "trials_per_floor": trials,
        "sequence_length": n,
        "c_fit": c_fit,
        "hypothesis_failures": failures,
        "per_floor": floor_stats,
        "log_log_slope": slope,
    }))
}

fn run_schedule_trace(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let omega = config.omega();
    let kappa = config.kappa.unwrap_or(0.01);
    let n0 = config.scale_n(100)?;
    let level_budget = config.level_budget.unwrap_or(8);
    let q_budget_log = config.q_budget_log.unwrap_or(50.0);
    let constants = ScheduleConstants::default();

    let cf = continued_fraction(&omega, u64::MAX / 4)?;
    let schedule = multiscale::build_schedule(&cf, kappa, n0, level_budget, q_budget_log, &constants)?;

    let mut csv = CsvWriter::new(&[
        "s",
        "q",
        "N",
        "case",
        "intermediate_N",
        "second_scale_N",
        "interleaving_ok",
        "divisibility_conflict",
    ]);
    for level in &schedule.levels {
        csv.row(&[
            level.s.to_string(),
            level.q.to_string(),
            level.n.to_string(),
            format!("{:?}", level.case_tag),
            level
                .intermediate_n
                .map(|n| n.to_string())
                .unwrap_or_default(),
            level
                .second_scale_n
                .map(|n| n.to_string())
                .unwrap_or_default(),
            level.interleaving_ok.to_string(),
            level.divisibility_conflict.to_string(),
        ]);
    }
    let path = out.join("schedule.csv");
    csv.write_to(&path)?;
    files.push(path);

    let mut verified = Vec::new();
    if let Some(levels) = config.verify_levels {
        let v = config.potential()?;
        let energy = config.energy.unwrap_or(0.0);
        let m = config.grid_m(128)?;
        let budget = config.budget_n.unwrap_or(10_000_000);
        let law = GridEvaluator::new(v, omega.value(), energy, m)?;
        let mut csv = CsvWriter::new(&[
            "s", "lemma6", "lemma7", "lemma8", "step47", "step48", "step49", "bound47", "bound48",
            "bound49",
        ]);
        for s in 0..levels.min(schedule.levels.len().saturating_sub(1)) {
            let r = multiscale::verify_step(&law, &schedule, s, budget)?;
            csv.row(&[
                s.to_string(),
                fmt_float(r.lemma6),
                fmt_float(r.lemma7),
                r.lemma8.map(fmt_float).unwrap_or_default(),
                fmt_float(r.step47),
                fmt_float(r.step48),
                fmt_float(r.step49),
                fmt_float(r.bound47),
                fmt_float(r.bound48),
                fmt_float(r.bound49),
            ]);
            verified.push(s);
        }
        let path = out.join("step_residuals.csv");
        csv.write_to(&path)?;
        files.push(path);
    }

    Ok(json!({
        "kind": "schedule_trace",
        "kappa": kappa,
        "levels": schedule.levels.len(),
        "truncated": schedule.truncated,
        "verified_steps": verified,
    }))
}

fn run_corollary2(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let lambda = config.lambda()?;
    let omega = config.omega();
    let q_probe = config.q_probe.unwrap_or(89);
    let n = config.scale_n(10_000)?;
    let m = config.grid_m(512)?;
    let n_energies = config.n_energies.unwrap_or(20);

    let report = amo::corollary2_check(lambda, &omega, q_probe, n, m, n_energies)?;

    let mut csv = CsvWriter::new(&["E", "L_extrap", "deviation", "flagged"]);
    let mut series = Vec::new();
    for (i, (&e, &l)) in report.energies.iter().zip(&report.l_values).enumerate() {
        csv.row(&[
            fmt_float(e),
            fmt_float(l),
            fmt_float((l - report.target).abs()),
            report.flagged.contains(&i).to_string(),
        ]);
        series.push((e, l));
    }
    let path = out.join("corollary2.csv");
    csv.write_to(&path)?;
    files.push(path);
    let svg = out.join("corollary2.svg");
    io::write_svg_polyline(&svg, "L at approximant-band probes", &series)?;
    files.push(svg);

    Ok(json!({
        "kind": "corollary2",
        "lambda": lambda,
        "q_probe": q_probe,
        "target": report.target,
        "max_abs_deviation": report.max_abs_deviation,
        "flagged": report.flagged,
    }))
}

fn run_uniform_bound(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let lambda = config.lambda()?;
    let omega = config.omega();
    let q_probe = config.q_probe.unwrap_or(89);
    let n = config.scale_n(10_000)?;
    let m = config.grid_m(256)?;
    let n_energies = config.n_energies.unwrap_or(64);

    let cf = continued_fraction(&omega, q_probe)?;
    let &(p, q) = cf
        .convergents
        .iter()
        .find(|&&(_, q)| q == q_probe)
        .ok_or_else(|| Error::Config(format!("{q_probe} is not a convergent denominator")))?;
    let spectrum = amo::periodic_spectrum(lambda, p, q, amo::DEFAULT_X_SAMPLES, 1e-5)?;
    let energies = amo::probe_energies(&spectrum, n_energies);
    let v = amo::amo_potential(lambda);

    let mut csv = CsvWriter::new(&["E", "excess"]);
    let mut worst = f64::NEG_INFINITY;
    let mut series = Vec::new();
    for &e in &energies {
        let excess = lyapunov::uniform_upper_check(&v, omega.value(), e, n, m)?;
        csv.row_floats(&[e, excess]);
        worst = worst.max(excess);
        series.push((e, excess));
    }
    let path = out.join("uniform_bound.csv");
    csv.write_to(&path)?;
    files.push(path);
    let svg = out.join("uniform_bound.svg");
    io::write_svg_polyline(&svg, "max-over-x excess over extrapolated L", &series)?;
    files.push(svg);

    Ok(json!({
        "kind": "uniform_bound",
        "lambda": lambda,
        "n": n,
        "energies": energies.len(),
        "max_excess": worst,
    }))
}

fn run_amo_spectrum(
    config: &ExperimentConfig,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let lambda = config.lambda()?;
    let resolution = config.e_step.unwrap_or(1e-6);
    let (p, q) = match config.omega() {
        Omega::Rational { p, q } => (p, q),
        other => {
            let q_probe = config.q_probe.unwrap_or(89);
            let cf = continued_fraction(&other, q_probe)?;
            *cf.convergents
                .iter()
                .find(|&&(_, q)| q == q_probe)
                .ok_or_else(|| Error::Config(format!("{q_probe} is not a convergent denominator")))?
        }
    };

    let spectrum = amo::periodic_spectrum(lambda, p, q, amo::DEFAULT_X_SAMPLES, resolution)?;
    let mut csv = CsvWriter::new(&["band", "E_lo", "E_hi", "width"]);
    for (i, &(lo, hi)) in spectrum.bands.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            fmt_float(lo),
            fmt_float(hi),
            fmt_float(hi - lo),
        ]);
    }
    let path = out.join("amo_spectrum.csv");
    csv.write_to(&path)?;
    files.push(path);

    Ok(json!({
        "kind": "amo_spectrum",
        "lambda": lambda,
        "p": p,
        "q": q,
        "bands": spectrum.bands.len(),
        "total_bandwidth": spectrum.total_bandwidth(),
    }))
}
