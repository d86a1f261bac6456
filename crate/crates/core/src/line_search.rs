//! Derivative-free line search over feasible parameter lines.
//!
//! A constrained model describes its parameter space with a [`ConstraintSpec`].
//! For a point `theta` and a direction `d`, [`ConstraintSpec::feasible_interval`]
//! returns the open interval of `alpha` for which `theta + alpha d` stays
//! feasible, as the intersection over the constraint items. The interval is
//! handed to [`maximize_on_interval`], a Brent-style golden-section and
//! parabolic-interpolation maximizer, and [`guarded_line_step`] combines the
//! two with an ascent guard.

use crate::error::{Error, Result};
use crate::ParamVec;

/// Open interval of step sizes. Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, alpha: f64) -> bool {
        self.lo < alpha && alpha < self.hi
    }

    fn intersect(self, other: Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Restricts the interval to `lo < alpha < hi` given `a + b alpha > 0`.
    fn restrict_linear(self, a: f64, b: f64) -> Interval {
        if b > 0.0 {
            self.intersect(Interval::new(-a / b, f64::INFINITY))
        } else if b < 0.0 {
            self.intersect(Interval::new(f64::NEG_INFINITY, -a / b))
        } else {
            self
        }
    }

    fn clipped(self, clip: f64) -> Interval {
        Interval::new(self.lo.max(-clip), self.hi.min(clip))
    }
}

/// One item of a model's constraint catalog. Indices refer to positions in
/// the packed parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Each listed parameter must stay strictly positive.
    Positive(Vec<usize>),
    /// Free mixture weights (the first K-1 of K): each positive, sum below one.
    Simplex(Vec<usize>),
    /// A 2x2 symmetric matrix packed as (m11, m12, m22) that must stay
    /// positive definite.
    PosDef2x2([usize; 3]),
    /// No restriction.
    Free,
}

impl Constraint {
    fn indices(&self) -> Vec<usize> {
        match self {
            Constraint::Positive(ix) | Constraint::Simplex(ix) => ix.clone(),
            Constraint::PosDef2x2(ix) => ix.to_vec(),
            Constraint::Free => Vec::new(),
        }
    }

    fn is_satisfied(&self, theta: &ParamVec) -> bool {
        match self {
            Constraint::Positive(ix) => ix.iter().all(|&i| theta[i] > 0.0),
            Constraint::Simplex(ix) => {
                ix.iter().all(|&i| theta[i] > 0.0)
                    && ix.iter().map(|&i| theta[i]).sum::<f64>() < 1.0
            }
            Constraint::PosDef2x2([a, b, c]) => {
                let (m11, m12, m22) = (theta[*a], theta[*b], theta[*c]);
                m11 > 0.0 && m11 * m22 - m12 * m12 > 0.0
            }
            Constraint::Free => true,
        }
    }

    fn interval(&self, theta: &ParamVec, d: &ParamVec) -> Interval {
        match self {
            Constraint::Positive(ix) => ix.iter().fold(Interval::UNBOUNDED, |iv, &i| {
                iv.restrict_linear(theta[i], d[i])
            }),
            Constraint::Simplex(ix) => {
                let iv = ix.iter().fold(Interval::UNBOUNDED, |iv, &i| {
                    iv.restrict_linear(theta[i], d[i])
                });
                let s: f64 = ix.iter().map(|&i| theta[i]).sum();
                let ds: f64 = ix.iter().map(|&i| d[i]).sum();
                iv.restrict_linear(1.0 - s, -ds)
            }
            Constraint::PosDef2x2([a, b, c]) => {
                let (m11, m12, m22) = (theta[*a], theta[*b], theta[*c]);
                let (d11, d12, d22) = (d[*a], d[*b], d[*c]);
                // det(M + alpha D) = qa alpha^2 + qb alpha + qc, positive at 0.
                let qa = d11 * d22 - d12 * d12;
                let qb = m11 * d22 + m22 * d11 - 2.0 * m12 * d12;
                let qc = m11 * m22 - m12 * m12;
                positive_component_around_zero(qa, qb, qc).restrict_linear(m11, d11)
            }
            Constraint::Free => Interval::UNBOUNDED,
        }
    }
}

/// Connected component containing 0 of `{alpha : qa alpha^2 + qb alpha + qc > 0}`,
/// assuming `qc > 0`.
fn positive_component_around_zero(qa: f64, qb: f64, qc: f64) -> Interval {
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-15 * scale {
        return Interval::UNBOUNDED.restrict_linear(qc, qb);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        // No real roots; qa > 0 here since the value at 0 is positive.
        return Interval::UNBOUNDED;
    }
    // Cancellation-free roots.
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 {
        let r = (-qc / qa).abs().sqrt();
        (-r, r)
    } else {
        (q / qa, qc / q)
    };
    let (r_lo, r_hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if qa < 0.0 {
        Interval::new(r_lo, r_hi)
    } else if r_lo > 0.0 {
        Interval::new(f64::NEG_INFINITY, r_lo)
    } else {
        Interval::new(r_hi, f64::INFINITY)
    }
}

/// The constraint catalog of a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSpec {
    items: Vec<Constraint>,
}

impl ConstraintSpec {
    pub fn new(items: Vec<Constraint>) -> Self {
        Self { items }
    }

    pub fn free() -> Self {
        Self::new(vec![Constraint::Free])
    }

    pub fn items(&self) -> &[Constraint] {
        &self.items
    }

    /// Checks that indices are in range and no index appears in two items.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut seen = vec![false; dim];
        for item in &self.items {
            for i in item.indices() {
                if i >= dim {
                    return Err(Error::InvalidConstraints(format!(
                        "index {i} out of range for dimension {dim}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidConstraints(format!(
                        "index {i} appears in more than one item"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, theta: &ParamVec) -> bool {
        theta.iter().all(|v| v.is_finite()) && self.items.iter().all(|c| c.is_satisfied(theta))
    }

    /// Open interval of `alpha` keeping `theta + alpha d` feasible. Always
    /// contains 0 for a feasible `theta`. Endpoints are not clipped.
    pub fn feasible_interval(&self, theta: &ParamVec, d: &ParamVec) -> Result<Interval> {
        if theta.len() != d.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                got: d.len(),
            });
        }
        if !self.is_feasible(theta) {
            return Err(Error::InfeasiblePoint);
        }
        let iv = self.items.iter().fold(Interval::UNBOUNDED, |iv, c| {
            iv.intersect(c.interval(theta, d))
        });
        if !iv.contains(0.0) {
            return Err(Error::EmptyInterval {
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        Ok(iv)
    }
}

/// Controls for [`maximize_on_interval`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchSettings {
    /// Absolute accuracy in alpha.
    pub tol: f64,
    /// Relative accuracy in alpha, added to `tol`.
    pub rel_tol: f64,
    pub max_evals: usize,
    /// Infinite interval endpoints are replaced by +/- this value.
    pub interval_clip: f64,
    /// Optional lower bound on alpha (e.g. 0 to force overrelaxation).
    pub lower_bound_hint: Option<f64>,
    /// Refine the result with one parabolic step through points spaced well
    /// apart, kept unless it is clearly worse. Brent alone resolves a flat
    /// maximum only to about sqrt(eps) relative accuracy.
    pub polish: bool,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        Self {
            tol: 0.01,
            rel_tol: f64::EPSILON.sqrt(),
            max_evals: 100,
            interval_clip: 1e6,
            lower_bound_hint: None,
            polish: false,
        }
    }
}

impl LineSearchSettings {
    /// Near-exact search used when checking results that assume exact line
    /// searches.
    pub fn exact() -> Self {
        Self {
            tol: 1e-8,
            rel_tol: 1e-10,
            max_evals: 400,
            polish: true,
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidSettings(
                "line search tolerance must be positive".into(),
            ));
        }
        if self.max_evals == 0 || !(self.interval_clip > 0.0) {
            return Err(Error::InvalidSettings(
                "max_evals and interval_clip must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a scalar maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMax {
    pub alpha: f64,
    pub value: f64,
    pub evals: usize,
    /// The evaluation budget ran out before the bracket met the tolerance;
    /// `alpha` is the best point seen.
    pub budget_exhausted: bool,
}

enum BrentOutcome {
    Done(LineMax),
    NonFinite { at: f64, evals: usize },
}

fn brent_max<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    s: &LineSearchSettings,
) -> BrentOutcome {
    // Brent's fmin applied to -f.
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (lo, hi);
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evals = 1;
    let fx0 = f(x);
    if !fx0.is_finite() {
        return BrentOutcome::NonFinite { at: x, evals };
    }
    let mut fx = -fx0;
    let (mut fw, mut fv) = (fx, fx);
    let tol3 = s.tol / 3.0;
    let mut exhausted = false;

    loop {
        let xm = 0.5 * (a + b);
        let tol1 = s.rel_tol * x.abs() + tol3;
        let t2 = 2.0 * tol1;
        if (x - xm).abs() <= t2 - 0.5 * (b - a) {
            break;
        }
        if evals >= s.max_evals {
            exhausted = true;
            break;
        }
        let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
        if e.abs() > tol1 {
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            r = e;
            e = d;
        }
        if p.abs() >= (0.5 * q * r).abs() || p <= q * (a - x) || p >= q * (b - x) {
            e = if x < xm { b - x } else { a - x };
            d = golden * e;
        } else {
            d = p / q;
            let u = x + d;
            if u - a < t2 || b - u < t2 {
                d = if x < xm { tol1 } else { -tol1 };
            }
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        evals += 1;
        let fu_raw = f(u);
        if !fu_raw.is_finite() {
            return BrentOutcome::NonFinite { at: u, evals };
        }
        let fu = -fu_raw;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    BrentOutcome::Done(LineMax {
        alpha: x,
        value: -fx,
        evals,
        budget_exhausted: exhausted,
    })
}

// Parabola through x and x +/- h, with h far above the value noise floor.
fn polish<F: FnMut(f64) -> f64>(f: &mut F, iv: Interval, best: &mut LineMax) {
    let x = best.alpha;
    let h = 1e-4 * (1.0 + x.abs());
    if x - h <= iv.lo || x + h >= iv.hi {
        return;
    }
    let (fl, fr) = (f(x - h), f(x + h));
    best.evals += 2;
    let curv = fl - 2.0 * best.value + fr;
    if !(fl.is_finite() && fr.is_finite() && curv < 0.0) {
        return;
    }
    let u = x + 0.5 * h * (fl - fr) / curv;
    if !((u - x).abs() <= h) || u == x {
        return;
    }
    let fu = f(u);
    best.evals += 1;
    // Near the top, value differences drown in cancellation noise, so the
    // vertex is kept unless it is worse by a visible fraction of the
    // parabola's own height over h.
    if fu.is_finite() && fu >= best.value + 1e-3 * curv {
        best.alpha = u;
        best.value = fu;
    }
}

/// Maximizes `f` over the interval `iv` (infinite endpoints clipped).
///
/// If `f` is non-finite somewhere in the interval, the search is retried once
/// on the interval shrunk tenfold toward zero before giving up.
pub fn maximize_on_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    iv: Interval,
    s: &LineSearchSettings,
) -> Result<LineMax> {
    s.validate()?;
    let mut iv = iv.clipped(s.interval_clip);
    if let Some(hint) = s.lower_bound_hint {
        if hint < iv.hi {
            iv.lo = iv.lo.max(hint);
        }
    }
    if !(iv.lo < iv.hi) {
        return Err(Error::EmptyInterval {
            lo: iv.lo,
            hi: iv.hi,
        });
    }
    let mut spent = 0;
    for attempt in 0..2 {
        match brent_max(&mut f, iv.lo, iv.hi, s) {
            BrentOutcome::Done(mut best) => {
                best.evals += spent;
                if s.polish {
                    polish(&mut f, iv, &mut best);
                }
                let margin = 1e-12 * (iv.hi - iv.lo);
                let pulled = best.alpha.clamp(iv.lo + margin, iv.hi - margin);
                if pulled != best.alpha {
                    best.alpha = pulled;
                    best.value = f(pulled);
                    best.evals += 1;
                }
                return Ok(best);
            }
            BrentOutcome::NonFinite { at, evals } => {
                spent += evals;
                if attempt == 1 {
                    return Err(Error::NonFiniteValue(at));
                }
                iv = Interval::new(iv.lo / 10.0, iv.hi / 10.0);
            }
        }
    }
    unreachable!()
}

/// Outcome of [`guarded_line_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedStep {
    pub theta: ParamVec,
    pub alpha: f64,
    pub value: f64,
    /// Objective evaluations, including the one at `alpha = 0`.
    pub evals: usize,
    /// The search result was worse than the starting point, which was kept.
    pub fell_back: bool,
}

/// Maximizes `objective(theta_from + alpha d)` over the feasible interval,
/// never returning a point worse than `theta_from`.
pub fn guarded_line_step<F: FnMut(&ParamVec) -> f64>(
    mut objective: F,
    theta_from: &ParamVec,
    d: &ParamVec,
    spec: &ConstraintSpec,
    s: &LineSearchSettings,
) -> Result<GuardedStep> {
    let iv = spec.feasible_interval(theta_from, d)?;
    let base = objective(theta_from);
    let found = maximize_on_interval(|a| objective(&(theta_from + d * a)), iv, s)?;
    let evals = found.evals + 1;
    if found.value >= base {
        Ok(GuardedStep {
            theta: theta_from + d * found.alpha,
            alpha: found.alpha,
            value: found.value,
            evals,
            fell_back: false,
        })
    } else {
        Ok(GuardedStep {
            theta: theta_from.clone(),
            alpha: 0.0,
            value: base,
            evals,
            fell_back: true,
        })
    }
}
