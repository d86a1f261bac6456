//! Benchmark protocol: a stringent EM pre-run for the maximal log-likelihood,
//! then a race of accelerators from a common start.

use std::fmt::Write as _;

use crate::em::{
    run, AcceleratorConfig, EmModel, RunFailure, RunTrace, StopRule, Termination, Variant,
};
use crate::line_search::LineSearchSettings;
use crate::ParamVec;

/// Parameter-change threshold of the pre-run.
pub const LMAX_L1_EPS: f64 = 1e-10;

/// Raced runs stop once the log-likelihood reaches `l_max - RACE_GAP`.
pub const RACE_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LmaxResult {
    pub lmax: f64,
    pub theta: ParamVec,
    pub iterations: usize,
    /// False when the safety cap stopped the pre-run first.
    pub converged: bool,
}

/// Runs plain EM until `|theta_{t+1} - theta_t|_1 < 1e-10`.
pub fn compute_lmax(
    model: &dyn EmModel,
    start: &ParamVec,
    safety_cap: usize,
) -> Result<LmaxResult, RunFailure> {
    let mut cfg = AcceleratorConfig::new(Variant::Em, StopRule::ParamL1(LMAX_L1_EPS));
    cfg.safety_cap = safety_cap;
    let trace = run(model, start, &cfg)?;
    Ok(LmaxResult {
        lmax: trace.final_loglik(),
        theta: trace.final_theta().clone(),
        iterations: trace.iterations(),
        converged: trace.terminated_by != Some(Termination::SafetyCap),
    })
}

/// Variants raced on `model`: the five base accelerators, plus the ECME
/// pair when the model has an ML-step.
pub fn default_race_variants(model: &dyn EmModel) -> Vec<Variant> {
    let mut v = Variant::RACE.to_vec();
    if model.has_ml_step() {
        v.extend([Variant::Ecme, Variant::EcmeDecmeV1]);
    }
    v
}

#[derive(Debug)]
pub struct RaceEntry {
    pub variant: Variant,
    /// Trace of the first repeat, or the error message.
    pub outcome: Result<RunTrace, String>,
    /// Wall time of each repeat in seconds.
    pub wall_secs: Vec<f64>,
}

impl RaceEntry {
    pub fn wall_min(&self) -> f64 {
        self.wall_secs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn wall_median(&self) -> f64 {
        let mut w = self.wall_secs.clone();
        if w.is_empty() {
            return f64::NAN;
        }
        w.sort_by(f64::total_cmp);
        let m = w.len() / 2;
        if w.len() % 2 == 1 {
            w[m]
        } else {
            0.5 * (w[m - 1] + w[m])
        }
    }
}

#[derive(Debug, Clone)]
pub struct RaceSpec {
    pub variants: Vec<Variant>,
    pub stop: StopRule,
    pub settings: LineSearchSettings,
    pub repeat: usize,
    pub safety_cap: usize,
    /// Relaxation factor for SORF.
    pub fixed_alpha: Option<f64>,
}

/// Runs every variant from `start`. A failing variant is recorded and does
/// not stop the others.
pub fn race(model: &dyn EmModel, start: &ParamVec, spec: &RaceSpec) -> Vec<RaceEntry> {
    spec.variants
        .iter()
        .map(|&variant| {
            let mut cfg =
                AcceleratorConfig::new(variant, spec.stop).with_settings(spec.settings.clone());
            cfg.safety_cap = spec.safety_cap;
            cfg.fixed_alpha = spec.fixed_alpha;
            let mut wall_secs = Vec::new();
            let mut outcome = None;
            for _ in 0..spec.repeat.max(1) {
                match run(model, start, &cfg) {
                    Ok(trace) => {
                        wall_secs.push(trace.wall_secs);
                        outcome.get_or_insert(Ok(trace));
                    }
                    Err(fail) => {
                        log::warn!("{variant} failed: {fail}");
                        outcome = Some(Err(fail.to_string()));
                        break;
                    }
                }
            }
            RaceEntry {
                variant,
                outcome: outcome.expect("at least one repeat"),
                wall_secs,
            }
        })
        .collect()
}

/// One row per variant: iterations, final log-likelihood, counters and wall
/// times (min and median over repeats).
pub fn summary_csv(entries: &[RaceEntry]) -> String {
    let mut out = String::from(
        "variant,iterations,final_loglik,em_calls,loglik_calls,wall_min_s,wall_median_s,terminated_by,error\n",
    );
    for e in entries {
        match &e.outcome {
            Ok(t) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.12e},{},{},{:.6e},{:.6e},{},",
                    e.variant,
                    t.iterations(),
                    t.final_loglik(),
                    t.em_calls(),
                    t.loglik_calls(),
                    e.wall_min(),
                    e.wall_median(),
                    t.terminated_by.map_or("running", Termination::as_str)
                );
            }
            Err(msg) => {
                let clean = msg.replace([',', '\n'], ";");
                let _ = writeln!(out, "{},,,,,,,failed,{clean}", e.variant);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SurrogateModel;
    use crate::spectral::QuadSurrogate;
    use crate::Matrix;

    fn two_scale() -> SurrogateModel {
        SurrogateModel::new(
            QuadSurrogate::new(
                ParamVec::zeros(2),
                Matrix::from_diagonal(&ParamVec::from_vec(vec![0.0316, 0.3768])),
                Matrix::identity(2, 2),
            )
            .unwrap(),
        )
    }

    #[test]
    fn lmax_of_surrogate_is_zero() {
        let r = compute_lmax(&two_scale(), &ParamVec::from_vec(vec![1.0, -1.0]), 200_000).unwrap();
        assert!(r.converged);
        assert!(r.lmax.abs() < 1e-9);
    }

    #[test]
    fn lmax_reports_cap() {
        let r = compute_lmax(&two_scale(), &ParamVec::from_vec(vec![1.0, -1.0]), 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn race_rows_match_traces() {
        let m = two_scale();
        let spec = RaceSpec {
            variants: Variant::RACE.to_vec(),
            stop: StopRule::LoglikTarget(-RACE_GAP),
            settings: LineSearchSettings::exact(),
            repeat: 3,
            safety_cap: 10_000,
            fixed_alpha: None,
        };
        let entries = race(&m, &ParamVec::from_vec(vec![2.0, 1.0]), &spec);
        let csv = summary_csv(&entries);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 5);
        for (e, row) in entries.iter().zip(&rows) {
            let t = e.outcome.as_ref().unwrap();
            let iters: usize = row.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(iters, t.records.len());
            assert_eq!(e.wall_secs.len(), 3);
            assert!(e.wall_min() <= e.wall_median());
        }
        let v1 = &entries[2];
        assert_eq!(v1.variant, Variant::DecmeV1);
        assert!(v1.outcome.as_ref().unwrap().iterations() <= 2);
    }

    #[test]
    fn failing_variant_is_isolated() {
        let m = two_scale();
        let spec = RaceSpec {
            variants: vec![Variant::Ecme, Variant::Em],
            stop: StopRule::MaxIter(5),
            settings: LineSearchSettings::default(),
            repeat: 1,
            safety_cap: 10_000,
            fixed_alpha: None,
        };
        let entries = race(&m, &ParamVec::from_vec(vec![2.0, 1.0]), &spec);
        assert!(entries[0].outcome.is_err());
        assert_eq!(entries[1].outcome.as_ref().unwrap().iterations(), 5);
        let csv = summary_csv(&entries);
        assert!(csv.lines().nth(1).unwrap().starts_with("ecme,,"));
    }

    #[test]
    fn default_variants_follow_ml_step() {
        let m = two_scale();
        assert_eq!(default_race_variants(&m).len(), 5);
        let m = m.with_ml_block(vec![0]);
        assert_eq!(default_race_variants(&m).len(), 7);
    }
}
