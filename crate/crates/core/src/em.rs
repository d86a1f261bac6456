//! The EM plug-in surface and the accelerator engine.
//!
//! Every accelerator here is an instance of the same iteration. From the
//! current estimate `tt_prev` it first takes the model's own EM step
//! `theta_t = M(tt_prev)` and then maximizes the observed log-likelihood over
//! a small affine set through `theta_t` built from past iterates:
//!
//! | variant  | search from `theta_t` along                                    |
//! |----------|----------------------------------------------------------------|
//! | EM       | nothing                                                        |
//! | SOR      | `theta_t - tt_prev`                                            |
//! | SORF     | fixed step `alpha (theta_t - tt_prev)`, no search              |
//! | DECME_v1 | SOR, then from the SOR point toward it from `tt_prev2`         |
//! | DECME_v2 | `theta_t - tt_prev2`                                           |
//! | DECME_v3 | `tt_prev - tt_prev2`                                           |
//!
//! ECME variants replace `M` by the model's EM step followed by its ML-step.
//! Because the EM step never decreases the likelihood and every search is
//! guarded, all searched variants are monotone.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::line_search::{guarded_line_step, ConstraintSpec, LineSearchSettings};
use crate::ParamVec;

/// A model whose maximum likelihood estimate is computed by EM.
///
/// `em_step` performs one full E-step plus M-step (or CM-steps). The engine
/// only ever calls it at feasible points and expects a feasible result with
/// log-likelihood no lower than the input, up to roundoff.
pub trait EmModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn em_step(&self, theta: &ParamVec) -> ParamVec;
    fn loglik(&self, theta: &ParamVec) -> f64;
    fn constraints(&self) -> &ConstraintSpec;

    /// Whether [`EmModel::ml_step`] is implemented.
    fn has_ml_step(&self) -> bool {
        false
    }

    /// Maximizes the observed log-likelihood over a fixed, model-specific
    /// subspace through `theta` (an ECME ML-step).
    fn ml_step(&self, _theta: &ParamVec) -> Option<ParamVec> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Em,
    Sor,
    Sorf,
    DecmeV1,
    DecmeV2,
    DecmeV3,
    Ecme,
    EcmeDecmeV1,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Em,
        Variant::Sor,
        Variant::Sorf,
        Variant::DecmeV1,
        Variant::DecmeV2,
        Variant::DecmeV3,
        Variant::Ecme,
        Variant::EcmeDecmeV1,
    ];

    /// The five accelerators raced by default.
    pub const RACE: [Variant; 5] = [
        Variant::Em,
        Variant::Sor,
        Variant::DecmeV1,
        Variant::DecmeV2,
        Variant::DecmeV3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Em => "em",
            Variant::Sor => "sor",
            Variant::Sorf => "sorf",
            Variant::DecmeV1 => "decme_v1",
            Variant::DecmeV2 => "decme_v2",
            Variant::DecmeV3 => "decme_v3",
            Variant::Ecme => "ecme",
            Variant::EcmeDecmeV1 => "ecme_decme_v1",
        }
    }

    pub fn uses_ml_step(self) -> bool {
        matches!(self, Variant::Ecme | Variant::EcmeDecmeV1)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == key)
            .ok_or_else(|| Error::Parse(format!("unknown variant '{s}'")))
    }
}

/// When to stop a run. A safety cap on iterations always applies as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once the log-likelihood reaches the target.
    LoglikTarget(f64),
    /// Stop once `||theta_t - theta_{t-1}||_1 < eps`.
    ParamL1(f64),
    MaxIter(usize),
}

impl FromStr for StopRule {
    type Err = Error;

    /// `target:VALUE`, `l1:EPS` or `iter:N`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("stop rule '{s}' must look like kind:value")))?;
        let bad = |e: &dyn fmt::Display| Error::Parse(format!("stop rule '{s}': {e}"));
        match kind.trim() {
            "target" => Ok(StopRule::LoglikTarget(value.parse().map_err(|e| bad(&e))?)),
            "l1" => Ok(StopRule::ParamL1(value.parse().map_err(|e| bad(&e))?)),
            "iter" => Ok(StopRule::MaxIter(value.parse().map_err(|e| bad(&e))?)),
            other => Err(Error::Parse(format!("unknown stop rule kind '{other}'"))),
        }
    }
}

pub const DEFAULT_SAFETY_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratorConfig {
    pub variant: Variant,
    /// SORF relaxation factor; required for SORF, must exceed -1.
    pub fixed_alpha: Option<f64>,
    /// DECME_v1 cycle length; `None` means the model dimension.
    pub restart_period: Option<usize>,
    pub settings: LineSearchSettings,
    pub stop: StopRule,
    pub safety_cap: usize,
}

impl AcceleratorConfig {
    pub fn new(variant: Variant, stop: StopRule) -> Self {
        Self {
            variant,
            fixed_alpha: None,
            restart_period: None,
            settings: LineSearchSettings::default(),
            stop,
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }

    pub fn with_settings(mut self, settings: LineSearchSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_fixed_alpha(mut self, alpha: f64) -> Self {
        self.fixed_alpha = Some(alpha);
        self
    }

    pub fn with_restart_period(mut self, period: usize) -> Self {
        self.restart_period = Some(period);
        self
    }

    fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.variant == Variant::Sorf {
            match self.fixed_alpha {
                Some(a) if a > -1.0 => {}
                Some(a) => {
                    return Err(Error::InvalidSettings(format!(
                        "SORF relaxation factor must exceed -1, got {a}"
                    )))
                }
                None => return Err(Error::InvalidSettings("SORF needs a fixed alpha".into())),
            }
        }
        if self.restart_period == Some(0) {
            return Err(Error::InvalidSettings(
                "restart period must be at least 1".into(),
            ));
        }
        match self.stop {
            StopRule::ParamL1(eps) if !(eps > 0.0) => Err(Error::InvalidSettings(
                "l1 stop tolerance must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    LoglikTarget,
    ParamL1,
    MaxIter,
    SafetyCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::LoglikTarget => "target",
            Termination::ParamL1 => "l1",
            Termination::MaxIter => "max_iter",
            Termination::SafetyCap => "safety_cap",
        }
    }
}

/// One iteration of a run. Counters are cumulative since the start.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub theta: ParamVec,
    pub loglik: f64,
    /// Relaxation factors used in this iteration (two for DECME_v1).
    pub alphas: Vec<f64>,
    pub em_calls: usize,
    pub loglik_calls: usize,
    pub wall_secs: f64,
    /// SORF only: the fixed step had to be cut back to stay feasible.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub model: String,
    pub variant: Variant,
    pub start: ParamVec,
    pub start_loglik: f64,
    pub records: Vec<IterRecord>,
    pub wall_secs: f64,
    pub terminated_by: Option<Termination>,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_theta(&self) -> &ParamVec {
        self.records.last().map_or(&self.start, |r| &r.theta)
    }

    pub fn final_loglik(&self) -> f64 {
        self.records.last().map_or(self.start_loglik, |r| r.loglik)
    }

    pub fn em_calls(&self) -> usize {
        self.records.last().map_or(0, |r| r.em_calls)
    }

    pub fn loglik_calls(&self) -> usize {
        self.records.last().map_or(1, |r| r.loglik_calls)
    }

    /// Log-likelihoods including the start, in order.
    pub fn logliks(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.start_loglik).chain(self.records.iter().map(|r| r.loglik))
    }

    /// Largest single-step decrease of the log-likelihood (0 if monotone).
    pub fn max_loglik_drop(&self) -> f64 {
        let ll: Vec<f64> = self.logliks().collect();
        ll.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_loglik_drop() <= slack
    }

    /// CSV with columns `iter, loglik, alpha1, alpha2, em_calls,
    /// loglik_calls, wall_ms, theta_0, ...`. Missing alphas are empty.
    pub fn to_csv(&self) -> String {
        let p = self.start.len();
        let mut out = String::from("iter,loglik,alpha1,alpha2,em_calls,loglik_calls,wall_ms");
        for i in 0..p {
            out.push_str(&format!(",theta_{i}"));
        }
        out.push('\n');
        for r in &self.records {
            let alpha = |k: usize| r.alphas.get(k).map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                r.iter,
                r.loglik,
                alpha(0),
                alpha(1),
                r.em_calls,
                r.loglik_calls,
                r.wall_secs * 1e3
            ));
            for v in r.theta.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// A run that stopped on an error, with everything recorded up to it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub trace: RunTrace,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} run of {} failed after {} iterations: {}",
            self.trace.variant,
            self.trace.model,
            self.trace.iterations(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Result of one accelerated step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub theta: ParamVec,
    pub alphas: Vec<f64>,
    pub em_calls: usize,
    pub loglik_evals: usize,
    pub clipped: bool,
}

fn is_negligible(d: &ParamVec, theta: &ParamVec) -> bool {
    d.norm() < 1e-14 * (1.0 + theta.norm())
}

/// The EM map followed, for ECME, by the ML-step.
pub fn step_ecme(model: &dyn EmModel, theta: &ParamVec) -> Result<ParamVec> {
    if !model.has_ml_step() {
        return Err(Error::MissingMlStep(model.name().to_string()));
    }
    let mq = model.em_step(theta);
    model
        .ml_step(&mq)
        .ok_or_else(|| Error::MissingMlStep(model.name().to_string()))
}

/// Step functions for one model and base map.
pub struct Accelerator<'m> {
    model: &'m dyn EmModel,
    ecme: bool,
    settings: LineSearchSettings,
}

impl<'m> Accelerator<'m> {
    pub fn new(model: &'m dyn EmModel, settings: LineSearchSettings) -> Self {
        Self {
            model,
            ecme: false,
            settings,
        }
    }

    /// Uses EM followed by the ML-step as the base map.
    pub fn ecme(model: &'m dyn EmModel, settings: LineSearchSettings) -> Result<Self> {
        if !model.has_ml_step() {
            return Err(Error::MissingMlStep(model.name().to_string()));
        }
        Ok(Self {
            model,
            ecme: true,
            settings,
        })
    }

    fn base_map(&self, theta: &ParamVec) -> Result<ParamVec> {
        if self.ecme {
            step_ecme(self.model, theta)
        } else {
            Ok(self.model.em_step(theta))
        }
    }

    fn search(&self, from: &ParamVec, d: &ParamVec) -> Result<(ParamVec, f64, usize)> {
        if is_negligible(d, from) {
            return Ok((from.clone(), 0.0, 0));
        }
        let step = guarded_line_step(
            |t| self.model.loglik(t),
            from,
            d,
            self.model.constraints(),
            &self.settings,
        )
        .map_err(|e| Error::LineSearchFailure(Box::new(e)))?;
        Ok((step.theta, step.alpha, step.evals))
    }

    /// Plain EM (or ECME) step.
    pub fn step_em(&self, theta_prev: &ParamVec) -> Result<StepOutcome> {
        Ok(StepOutcome {
            theta: self.base_map(theta_prev)?,
            alphas: Vec::new(),
            em_calls: 1,
            loglik_evals: 0,
            clipped: false,
        })
    }

    /// SOR: search along the EM step from the EM point.
    pub fn step_sor(&self, theta_prev_tilde: &ParamVec) -> Result<StepOutcome> {
        let em_point = self.base_map(theta_prev_tilde)?;
        let d = &em_point - theta_prev_tilde;
        let (theta, alpha, evals) = self.search(&em_point, &d)?;
        Ok(StepOutcome {
            theta,
            alphas: vec![alpha],
            em_calls: 1,
            loglik_evals: evals,
            clipped: false,
        })
    }

    /// SORF: `theta_t + alpha (theta_t - theta_prev)`, cut back inside the
    /// feasible region if necessary.
    pub fn step_sorf(&self, theta_prev: &ParamVec, alpha: f64) -> Result<StepOutcome> {
        let em_point = self.base_map(theta_prev)?;
        let d = &em_point - theta_prev;
        let mut used = alpha;
        let mut clipped = false;
        let spec = self.model.constraints();
        if !spec.is_feasible(&(&em_point + &d * alpha)) {
            let iv = spec.feasible_interval(&em_point, &d)?;
            used = if alpha >= iv.hi {
                iv.hi * (1.0 - 1e-9)
            } else {
                iv.lo * (1.0 - 1e-9)
            };
            clipped = true;
            log::debug!("SORF step clipped from {alpha} to {used}");
        }
        Ok(StepOutcome {
            theta: &em_point + &d * used,
            alphas: vec![used],
            em_calls: 1,
            loglik_evals: 0,
            clipped,
        })
    }

    /// DECME_v1: a SOR substep followed by a search along the line through
    /// the SOR point and the estimate from two iterations back.
    pub fn step_decme_v1(
        &self,
        theta_tilde_prev: &ParamVec,
        theta_tilde_prev2: &ParamVec,
    ) -> Result<StepOutcome> {
        let sor = self.step_sor(theta_tilde_prev)?;
        let d2 = &sor.theta - theta_tilde_prev2;
        let (theta, alpha2, evals) = self.search(&sor.theta, &d2)?;
        Ok(StepOutcome {
            theta,
            alphas: vec![sor.alphas[0], alpha2],
            em_calls: 1,
            loglik_evals: sor.loglik_evals + evals,
            clipped: false,
        })
    }

    /// DECME_v2: one search along `theta_t - theta_tilde_prev2`.
    pub fn step_decme_v2(
        &self,
        theta_tilde_prev: &ParamVec,
        theta_tilde_prev2: &ParamVec,
    ) -> Result<StepOutcome> {
        let em_point = self.base_map(theta_tilde_prev)?;
        let d = &em_point - theta_tilde_prev2;
        let (theta, alpha, evals) = self.search(&em_point, &d)?;
        Ok(StepOutcome {
            theta,
            alphas: vec![alpha],
            em_calls: 1,
            loglik_evals: evals,
            clipped: false,
        })
    }

    /// DECME_v3: one search from `theta_t` along `theta_tilde_prev - theta_tilde_prev2`.
    pub fn step_decme_v3(
        &self,
        theta_tilde_prev: &ParamVec,
        theta_tilde_prev2: &ParamVec,
    ) -> Result<StepOutcome> {
        let em_point = self.base_map(theta_tilde_prev)?;
        let d = theta_tilde_prev - theta_tilde_prev2;
        let (theta, alpha, evals) = self.search(&em_point, &d)?;
        Ok(StepOutcome {
            theta,
            alphas: vec![alpha],
            em_calls: 1,
            loglik_evals: evals,
            clipped: false,
        })
    }
}

/// Runs an accelerator from `start` until the stop rule (or the safety cap)
/// fires.
///
/// The first iteration of every DECME variant is a SOR step. DECME_v1 (and
/// its ECME form) restarts with a SOR step every `restart_period`
/// iterations, forgetting the older anchor.
///
/// `loglik_calls` counts one evaluation at the start, one per iteration for
/// monitoring, and every evaluation made by line searches.
pub fn run(
    model: &dyn EmModel,
    start: &ParamVec,
    cfg: &AcceleratorConfig,
) -> std::result::Result<RunTrace, RunFailure> {
    let mut trace = RunTrace {
        model: model.name().to_string(),
        variant: cfg.variant,
        start: start.clone(),
        start_loglik: f64::NAN,
        records: Vec::new(),
        wall_secs: 0.0,
        terminated_by: None,
    };
    macro_rules! fail {
        ($e:expr) => {
            return Err(RunFailure { error: $e, trace })
        };
    }
    if let Err(e) = cfg.validate() {
        fail!(e);
    }
    if start.len() != model.dim() {
        fail!(Error::DimensionMismatch {
            expected: model.dim(),
            got: start.len()
        });
    }
    if !model.constraints().is_feasible(start) {
        fail!(Error::InfeasibleStart);
    }
    let acc = if cfg.variant.uses_ml_step() {
        match Accelerator::ecme(model, cfg.settings.clone()) {
            Ok(a) => a,
            Err(e) => fail!(e),
        }
    } else {
        Accelerator::new(model, cfg.settings.clone())
    };
    let period = cfg.restart_period.unwrap_or(model.dim()).max(1);
    let max_iter = match cfg.stop {
        StopRule::MaxIter(n) => n.min(cfg.safety_cap),
        _ => cfg.safety_cap,
    };

    let clock = Instant::now();
    trace.start_loglik = model.loglik(start);
    let mut em_calls = 0;
    let mut loglik_calls = 1;
    let mut prev = start.clone();
    let mut prev2: Option<ParamVec> = None;

    for t in 1..=max_iter {
        let step = match (cfg.variant, &prev2) {
            (Variant::Em | Variant::Ecme, _) => acc.step_em(&prev),
            (Variant::Sorf, _) => acc.step_sorf(&prev, cfg.fixed_alpha.unwrap_or(0.0)),
            (Variant::DecmeV1 | Variant::EcmeDecmeV1, Some(anchor)) if (t - 1) % period != 0 => {
                acc.step_decme_v1(&prev, anchor)
            }
            (Variant::DecmeV2, Some(anchor)) => acc.step_decme_v2(&prev, anchor),
            (Variant::DecmeV3, Some(anchor)) => acc.step_decme_v3(&prev, anchor),
            _ => acc.step_sor(&prev),
        };
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                trace.wall_secs = clock.elapsed().as_secs_f64();
                fail!(e);
            }
        };
        em_calls += step.em_calls;
        loglik_calls += step.loglik_evals + 1;
        let loglik = model.loglik(&step.theta);
        let moved_l1 = (&step.theta - &prev).lp_norm(1);
        trace.records.push(IterRecord {
            iter: t,
            theta: step.theta.clone(),
            loglik,
            alphas: step.alphas,
            em_calls,
            loglik_calls,
            wall_secs: clock.elapsed().as_secs_f64(),
            clipped: step.clipped,
        });
        prev2 = Some(std::mem::replace(&mut prev, step.theta));

        let stop = match cfg.stop {
            StopRule::LoglikTarget(target) if loglik >= target => Some(Termination::LoglikTarget),
            StopRule::ParamL1(eps) if moved_l1 < eps => Some(Termination::ParamL1),
            StopRule::MaxIter(n) if t >= n => Some(Termination::MaxIter),
            _ => None,
        };
        if stop.is_some() {
            trace.terminated_by = stop;
            break;
        }
    }
    if trace.terminated_by.is_none() {
        trace.terminated_by = Some(Termination::SafetyCap);
    }
    trace.wall_secs = clock.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SurrogateModel;
    use crate::rng::stream_rng;
    use crate::spectral::{sample_lambdas, QuadSurrogate};
    use crate::Matrix;
    use nalgebra::DVector;

    fn two_scale() -> SurrogateModel {
        SurrogateModel::new(
            QuadSurrogate::new(
                ParamVec::zeros(2),
                Matrix::from_diagonal(&DVector::from_vec(vec![0.0316, 0.3768])),
                Matrix::identity(2, 2),
            )
            .unwrap(),
        )
    }

    fn random_model(seed: u64, p: usize) -> SurrogateModel {
        let mut rng = stream_rng(seed, p as u64);
        let lam = sample_lambdas(&mut rng, p, 0.02, 0.98, 0.05).unwrap();
        SurrogateModel::new(QuadSurrogate::random(&mut rng, &lam).unwrap())
    }

    #[test]
    fn variant_and_stop_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("DECME-V1".parse::<Variant>().unwrap(), Variant::DecmeV1);
        assert!("aem".parse::<Variant>().is_err());
        assert_eq!(
            "l1:1e-5".parse::<StopRule>().unwrap(),
            StopRule::ParamL1(1e-5)
        );
        assert_eq!(
            "target:-12.5".parse::<StopRule>().unwrap(),
            StopRule::LoglikTarget(-12.5)
        );
        assert_eq!("iter:7".parse::<StopRule>().unwrap(), StopRule::MaxIter(7));
        assert!("l1".parse::<StopRule>().is_err());
    }

    #[test]
    fn em_contracts_eta_by_dm_eigenvalues() {
        let m = two_scale();
        let d = m.surrogate().spectral().unwrap();
        let start = ParamVec::from_vec(vec![1.0, -2.0]);
        let cfg = AcceleratorConfig::new(Variant::Em, StopRule::MaxIter(5));
        let trace = run(&m, &start, &cfg).unwrap();
        let mut eta = d.eta(m.surrogate().theta_hat(), &start).unwrap();
        for r in &trace.records {
            let next = d.eta(m.surrogate().theta_hat(), &r.theta).unwrap();
            // lambdas descending: 0.3768 then 0.0316.
            assert!((next[0] / eta[0] - 0.6232).abs() < 1e-12);
            assert!((next[1] / eta[1] - 0.9684).abs() < 1e-12);
            eta = next;
        }
    }

    #[test]
    fn em_at_fixed_point_stops_immediately() {
        let m = two_scale();
        let start = m.surrogate().theta_hat().clone();
        let cfg = AcceleratorConfig::new(Variant::Em, StopRule::ParamL1(1e-12));
        let trace = run(&m, &start, &cfg).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.terminated_by, Some(Termination::ParamL1));
        assert_eq!(trace.final_theta(), &start);
    }

    #[test]
    fn sor_at_fixed_point_short_circuits() {
        let m = two_scale();
        let acc = Accelerator::new(&m, LineSearchSettings::default());
        let out = acc.step_sor(m.surrogate().theta_hat()).unwrap();
        assert_eq!(out.alphas, vec![0.0]);
        assert_eq!(out.loglik_evals, 0);
        assert_eq!(&out.theta, m.surrogate().theta_hat());
    }

    #[test]
    fn sor_alpha_is_positive_and_matches_closed_form() {
        for seed in 0..100 {
            let m = random_model(seed, 2 + (seed as usize % 5));
            let s = m.surrogate();
            let d = s.spectral().unwrap();
            let mut rng = stream_rng(seed, 99);
            let start = s.theta_hat()
                + ParamVec::from_fn(s.dim(), |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let acc = Accelerator::new(&m, LineSearchSettings::exact());
            let out = acc.step_sor(&start).unwrap();
            let closed = d.sor_alpha(&d.eta(s.theta_hat(), &start).unwrap()).unwrap();
            assert!(out.alphas[0] > 0.0);
            assert!(
                (out.alphas[0] - closed).abs() <= 1e-6 * closed.abs(),
                "{} vs {closed}",
                out.alphas[0]
            );
        }
    }

    #[test]
    fn sorf_zero_alpha_is_em() {
        let m = random_model(4, 4);
        let start = ParamVec::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let em = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::Em, StopRule::MaxIter(30)),
        )
        .unwrap();
        let sorf = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::Sorf, StopRule::MaxIter(30)).with_fixed_alpha(0.0),
        )
        .unwrap();
        for (a, b) in em.records.iter().zip(&sorf.records) {
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.loglik, b.loglik);
        }
    }

    #[test]
    fn sorf_damped_contracts_by_half_lambda() {
        let m = two_scale();
        let d = m.surrogate().spectral().unwrap();
        let acc = Accelerator::new(&m, LineSearchSettings::default());
        let start = ParamVec::from_vec(vec![0.4, 0.9]);
        let next = acc.step_sorf(&start, -0.5).unwrap().theta;
        let (e0, e1) = (
            d.eta(m.surrogate().theta_hat(), &start).unwrap(),
            d.eta(m.surrogate().theta_hat(), &next).unwrap(),
        );
        for i in 0..2 {
            assert!((e1[i] / e0[i] - (1.0 - 0.5 * d.lambdas[i])).abs() < 1e-12);
        }
    }

    // Worst-case per-step rate of SORF at fixed alpha on the surrogate,
    // measured from a long run starting on a mix of both eigendirections.
    fn empirical_sorf_rate(m: &SurrogateModel, alpha: f64) -> f64 {
        let acc = Accelerator::new(m, LineSearchSettings::default());
        let s = m.surrogate();
        let mut theta = s.theta_hat() + ParamVec::from_vec(vec![1.0, 1.0]);
        let e0 = (&theta - s.theta_hat()).norm();
        let n = 60;
        for _ in 0..n {
            theta = acc.step_sorf(&theta, alpha).unwrap().theta;
        }
        ((&theta - s.theta_hat()).norm() / e0).powf(1.0 / n as f64)
    }

    #[test]
    fn optimal_sorf_factor_minimizes_empirical_rate() {
        let m = two_scale();
        let (a_opt, rate) = m.surrogate().spectral().unwrap().optimal_sorf();
        let at_opt = empirical_sorf_rate(&m, a_opt);
        assert!((at_opt - rate).abs() < 5e-3, "{at_opt} vs {rate}");
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=120 {
            let a = k as f64 * 0.05;
            let r = empirical_sorf_rate(&m, a);
            if r < best.0 {
                best = (r, a);
            }
        }
        assert!(
            (best.1 - a_opt).abs() <= 0.05,
            "grid min at {} vs {a_opt}",
            best.1
        );
        assert!(at_opt < 1.0 - 0.0316);
    }

    #[test]
    fn decme_v1_first_iteration_is_sor() {
        let m = random_model(8, 5);
        let start = ParamVec::from_vec(vec![0.3, -0.2, 1.0, 2.0, -1.0]);
        let s = LineSearchSettings::default();
        let sor = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::Sor, StopRule::MaxIter(1)).with_settings(s.clone()),
        )
        .unwrap();
        let v1 = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::DecmeV1, StopRule::MaxIter(1)).with_settings(s),
        )
        .unwrap();
        assert_eq!(sor.records[0].theta, v1.records[0].theta);
        assert_eq!(sor.records[0].alphas, v1.records[0].alphas);
    }

    #[test]
    fn decme_v1_terminates_in_two_steps_on_plane() {
        let m = two_scale();
        for (i, start) in [[1.0, 1.0], [-3.0, 0.5], [0.2, -4.0]].iter().enumerate() {
            let cfg = AcceleratorConfig::new(Variant::DecmeV1, StopRule::MaxIter(2))
                .with_settings(LineSearchSettings::exact());
            let trace = run(&m, &ParamVec::from_row_slice(start), &cfg).unwrap();
            let err = trace.final_theta().amax();
            assert!(err < 1e-8, "start {i}: error {err}");
        }
    }

    #[test]
    fn decme_v1_finite_termination_p6() {
        let m = random_model(17, 6);
        let start = m.surrogate().theta_hat() + ParamVec::from_element(6, 1.0);
        let cfg = AcceleratorConfig::new(Variant::DecmeV1, StopRule::MaxIter(7))
            .with_settings(LineSearchSettings::exact());
        let trace = run(&m, &start, &cfg).unwrap();
        let hit = trace
            .records
            .iter()
            .position(|r| (&r.theta - m.surrogate().theta_hat()).norm() < 1e-8);
        assert!(
            hit.is_some_and(|i| i < 7),
            "{:?}",
            trace.records.last().map(|r| r.loglik)
        );
    }

    #[test]
    fn decme_v1_zero_second_direction_is_skipped() {
        let m = two_scale();
        let acc = Accelerator::new(&m, LineSearchSettings::default());
        let prev = ParamVec::from_vec(vec![1.0, 1.0]);
        let sor = acc.step_sor(&prev).unwrap();
        let out = acc.step_decme_v1(&prev, &sor.theta).unwrap();
        assert_eq!(out.alphas[1], 0.0);
        assert_eq!(out.theta, sor.theta);
    }

    #[test]
    fn v2_v3_zero_directions() {
        let m = two_scale();
        let acc = Accelerator::new(&m, LineSearchSettings::default());
        let prev = ParamVec::from_vec(vec![1.0, 1.0]);
        let em = m.em_step(&prev);
        let v2 = acc.step_decme_v2(&prev, &em).unwrap();
        assert_eq!((v2.theta.clone(), v2.alphas[0]), (em.clone(), 0.0));
        let v3 = acc.step_decme_v3(&prev, &prev).unwrap();
        assert_eq!((v3.theta, v3.alphas[0]), (em, 0.0));
    }

    #[test]
    fn v2_v3_beat_sor_on_two_scale_surrogate() {
        let m = two_scale();
        let total = |v: Variant| -> usize {
            (0..36)
                .map(|k| {
                    let a = (k as f64 * 10.0).to_radians();
                    let start = ParamVec::from_vec(vec![3.0 * a.cos(), 3.0 * a.sin()]);
                    let cfg = AcceleratorConfig::new(v, StopRule::LoglikTarget(-1e-10))
                        .with_settings(LineSearchSettings::exact());
                    run(&m, &start, &cfg).unwrap().iterations()
                })
                .sum()
        };
        let (sor, v2, v3) = (
            total(Variant::Sor),
            total(Variant::DecmeV2),
            total(Variant::DecmeV3),
        );
        assert!(v2 < sor, "v2 {v2} sor {sor}");
        assert!(v3 < sor, "v3 {v3} sor {sor}");
    }

    #[test]
    fn counters_are_consistent() {
        for v in [
            Variant::Em,
            Variant::Sor,
            Variant::DecmeV1,
            Variant::DecmeV2,
            Variant::DecmeV3,
        ] {
            let m = random_model(2, 4);
            let start = m.surrogate().theta_hat() + ParamVec::from_element(4, 0.5);
            let cfg = AcceleratorConfig::new(v, StopRule::MaxIter(12));
            let trace = run(&m, &start, &cfg).unwrap();
            assert_eq!(trace.em_calls(), trace.iterations());
            let mut evals = 1;
            for r in &trace.records {
                assert_eq!(r.em_calls, r.iter);
                assert!(r.loglik_calls > evals);
                evals = r.loglik_calls;
            }
            assert!(trace.is_monotone(1e-10), "{v}");
        }
    }

    #[test]
    fn ecme_requires_ml_step() {
        let m = two_scale();
        let cfg = AcceleratorConfig::new(Variant::Ecme, StopRule::MaxIter(3));
        let err = run(&m, &ParamVec::from_vec(vec![1.0, 1.0]), &cfg).unwrap_err();
        assert!(matches!(err.error, Error::MissingMlStep(_)));
        assert!(matches!(
            step_ecme(&m, &ParamVec::zeros(2)),
            Err(Error::MissingMlStep(_))
        ));
    }

    #[test]
    fn ecme_with_block_ml_step_is_monotone() {
        let mut rng = stream_rng(31, 0);
        let s = QuadSurrogate::random(&mut rng, &[0.9, 0.6, 0.3, 0.1]).unwrap();
        let m = SurrogateModel::new(s).with_ml_block(vec![0, 1]);
        let start = m.surrogate().theta_hat() + ParamVec::from_element(4, 2.0);
        for v in [Variant::Ecme, Variant::EcmeDecmeV1] {
            let trace = run(
                &m,
                &start,
                &AcceleratorConfig::new(v, StopRule::MaxIter(40)),
            )
            .unwrap();
            assert!(trace.is_monotone(1e-10));
            assert!(trace.final_loglik() > trace.start_loglik);
        }
    }

    #[test]
    fn sorf_requires_alpha_and_rejects_infeasible_start() {
        let m = two_scale();
        let start = ParamVec::from_vec(vec![1.0, 1.0]);
        let err = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::Sorf, StopRule::MaxIter(3)),
        )
        .unwrap_err();
        assert!(matches!(err.error, Error::InvalidSettings(_)));
        let err = run(
            &m,
            &start,
            &AcceleratorConfig::new(Variant::Sorf, StopRule::MaxIter(3)).with_fixed_alpha(-1.5),
        )
        .unwrap_err();
        assert!(matches!(err.error, Error::InvalidSettings(_)));
    }

    #[test]
    fn csv_layout() {
        let m = two_scale();
        let cfg = AcceleratorConfig::new(Variant::DecmeV1, StopRule::MaxIter(3));
        let trace = run(&m, &ParamVec::from_vec(vec![1.0, 1.0]), &cfg).unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,loglik,alpha1,alpha2,em_calls,loglik_calls,wall_ms,theta_0,theta_1"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "1");
        assert_eq!(first[3], "");
        assert_eq!(csv.lines().count(), 4);
    }
}
