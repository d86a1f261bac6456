//! Bivariate t location/scatter/degrees-of-freedom model.
//!
//! Packing: `(mu_1, mu_2, psi_11, psi_12, psi_22, nu)`.
//!
//! The EM step updates `mu` and `psi` from the usual weighted moments with
//! weights `(nu + 2) / (nu + delta_j)`, then sets `nu` by maximizing the
//! observed log-likelihood over `nu` with `mu`, `psi` held at their new values.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{constraints_for, Dataset, ModelKind};
use crate::em::EmModel;
use crate::line_search::{maximize_on_interval, ConstraintSpec, Interval, LineSearchSettings};
use crate::ParamVec;

/// Range searched by the degrees-of-freedom update.
pub const NU_RANGE: (f64, f64) = (1e-2, 1e3);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvtParams {
    pub mu: [f64; 2],
    /// `(psi_11, psi_12, psi_22)`
    pub psi: [f64; 3],
    pub nu: f64,
}

impl MvtParams {
    pub fn new(mu: [f64; 2], psi: [f64; 3], nu: f64) -> Self {
        Self { mu, psi, nu }
    }

    /// Standard bivariate t with `nu` degrees of freedom.
    pub fn standard(nu: f64) -> Self {
        Self::new([0.0, 0.0], [1.0, 0.0, 1.0], nu)
    }

    pub fn det(&self) -> f64 {
        self.psi[0] * self.psi[2] - self.psi[1] * self.psi[1]
    }

    pub fn is_valid(&self) -> bool {
        self.psi[0] > 0.0 && self.det() > 0.0 && self.nu > 0.0
    }

    pub fn pack(&self) -> ParamVec {
        ParamVec::from_vec(vec![
            self.mu[0],
            self.mu[1],
            self.psi[0],
            self.psi[1],
            self.psi[2],
            self.nu,
        ])
    }

    pub fn unpack(theta: &ParamVec) -> Self {
        assert_eq!(theta.len(), 6, "packed bivariate t has six entries");
        Self::new(
            [theta[0], theta[1]],
            [theta[2], theta[3], theta[4]],
            theta[5],
        )
    }

    fn mahalanobis(&self, x: &[f64]) -> f64 {
        let (a, b, c) = (self.psi[0], self.psi[1], self.psi[2]);
        let (u, v) = (x[0] - self.mu[0], x[1] - self.mu[1]);
        (c * u * u - 2.0 * b * u * v + a * v * v) / self.det()
    }
}

// Log-density terms not depending on the observation.
fn log_norm_const(p: &MvtParams) -> f64 {
    ln_gamma((p.nu + 2.0) / 2.0) - ln_gamma(p.nu / 2.0) - (p.nu * PI).ln() - 0.5 * p.det().ln()
}

fn loglik_from_deltas(p: &MvtParams, deltas: &[f64]) -> f64 {
    let c = log_norm_const(p);
    let half = 0.5 * (p.nu + 2.0);
    deltas.iter().map(|&d| c - half * (d / p.nu).ln_1p()).sum()
}

/// Sum of bivariate t log-densities.
pub fn mvt_loglik(params: &MvtParams, data: &Dataset) -> f64 {
    assert_eq!(data.d(), 2, "bivariate t needs two columns");
    let deltas: Vec<f64> = data.rows().map(|x| params.mahalanobis(x)).collect();
    loglik_from_deltas(params, &deltas)
}

/// E-step weights `(nu + 2) / (nu + delta_j)`.
pub fn mvt_weights(params: &MvtParams, data: &Dataset) -> Vec<f64> {
    data.rows()
        .map(|x| (params.nu + 2.0) / (params.nu + params.mahalanobis(x)))
        .collect()
}

/// Settings for the one-dimensional degrees-of-freedom search (in log nu).
pub fn nu_search_settings() -> LineSearchSettings {
    LineSearchSettings {
        tol: 1e-10,
        rel_tol: 1e-12,
        max_evals: 200,
        ..LineSearchSettings::default()
    }
}

/// One EM step (weighted moments for `mu` and `psi`, ML update of `nu`).
pub fn mvt_em_step(params: &MvtParams, data: &Dataset) -> MvtParams {
    let w = mvt_weights(params, data);
    let sw: f64 = w.iter().sum();
    let mut mu = [0.0; 2];
    for (x, wj) in data.rows().zip(&w) {
        mu[0] += wj * x[0];
        mu[1] += wj * x[1];
    }
    mu[0] /= sw;
    mu[1] /= sw;
    let mut psi = [0.0; 3];
    for (x, wj) in data.rows().zip(&w) {
        let (u, v) = (x[0] - mu[0], x[1] - mu[1]);
        psi[0] += wj * u * u;
        psi[1] += wj * u * v;
        psi[2] += wj * v * v;
    }
    let n = data.n() as f64;
    for s in &mut psi {
        *s /= n;
    }
    let moved = MvtParams::new(mu, psi, params.nu);
    let deltas: Vec<f64> = data.rows().map(|x| moved.mahalanobis(x)).collect();
    let at_nu = |nu: f64| loglik_from_deltas(&MvtParams { nu, ..moved }, &deltas);
    let kept = at_nu(params.nu);
    let iv = Interval::new(NU_RANGE.0.ln(), NU_RANGE.1.ln());
    let nu = match maximize_on_interval(|s| at_nu(s.exp()), iv, &nu_search_settings()) {
        Ok(best) if best.value > kept => best.alpha.exp(),
        _ => params.nu,
    };
    MvtParams { nu, ..moved }
}

/// Draws `n` observations from the bivariate t.
pub fn mvt_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, params: &MvtParams) -> Dataset {
    if n == 0 {
        return Dataset::empty(2);
    }
    let l11 = params.psi[0].sqrt();
    let l21 = params.psi[1] / l11;
    let l22 = (params.psi[2] - l21 * l21).sqrt();
    let chi = ChiSquared::new(params.nu).expect("nu must be positive");
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let scale = (chi.sample(rng) / params.nu).sqrt().recip();
        values.push(params.mu[0] + scale * l11 * z1);
        values.push(params.mu[1] + scale * (l21 * z1 + l22 * z2));
    }
    Dataset::new(values, 2).expect("samples are finite")
}

#[derive(Debug, Clone)]
pub struct BivariateT {
    data: Dataset,
    constraints: ConstraintSpec,
    name: String,
}

impl BivariateT {
    pub fn new(data: Dataset) -> Self {
        assert_eq!(data.d(), 2, "bivariate t needs two columns");
        let name = format!("mvt(d=2, n={})", data.n());
        Self {
            data,
            constraints: constraints_for(ModelKind::Mvt(2)),
            name,
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

impl EmModel for BivariateT {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        6
    }

    fn em_step(&self, theta: &ParamVec) -> ParamVec {
        mvt_em_step(&MvtParams::unpack(theta), &self.data).pack()
    }

    fn loglik(&self, theta: &ParamVec) -> f64 {
        mvt_loglik(&MvtParams::unpack(theta), &self.data)
    }

    fn constraints(&self) -> &ConstraintSpec {
        &self.constraints
    }
}
