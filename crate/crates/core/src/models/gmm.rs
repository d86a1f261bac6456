//! Univariate K-component Gaussian mixtures.
//!
//! Parameters are packed as `(pi_1..pi_{K-1}, mu_1..mu_K, var_1..var_K)`; the
//! last weight is implied by the others.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{constraints_for, Dataset, ModelKind};
use crate::em::EmModel;
use crate::line_search::ConstraintSpec;
use crate::rng::stream_rng;
use crate::ParamVec;

/// Smallest variance the M-step will produce.
pub const VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Self {
        assert!(
            weights.len() == means.len() && means.len() == variances.len() && !weights.is_empty(),
            "mixture parameter lengths disagree"
        );
        Self {
            weights,
            means,
            variances,
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn is_valid(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
            && (self.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9
            && self.variances.iter().all(|&v| v > 0.0)
            && self.means.iter().all(|m| m.is_finite())
    }

    pub fn pack(&self) -> ParamVec {
        let k = self.k();
        ParamVec::from_iterator(
            3 * k - 1,
            self.weights[..k - 1]
                .iter()
                .chain(&self.means)
                .chain(&self.variances)
                .copied(),
        )
    }

    pub fn unpack(theta: &ParamVec, k: usize) -> Self {
        assert_eq!(theta.len(), 3 * k - 1, "packed mixture has wrong length");
        let mut weights: Vec<f64> = theta.rows(0, k - 1).iter().copied().collect();
        weights.push(1.0 - weights.iter().sum::<f64>());
        Self {
            weights,
            means: theta.rows(k - 1, k).iter().copied().collect(),
            variances: theta.rows(2 * k - 1, k).iter().copied().collect(),
        }
    }

    /// Two components with weights (0.3, 0.7), unit variances and means
    /// `+sep/2`, `-sep/2`.
    pub fn design_truth(sep: f64) -> Self {
        Self::new(vec![0.3, 0.7], vec![sep / 2.0, -sep / 2.0], vec![1.0, 1.0])
    }

    /// Starting point for [`GmmParams::design_truth`]: equal weights,
    /// variances 0.5 and means inflated by half.
    pub fn design_start(sep: f64) -> Self {
        Self::new(
            vec![0.5, 0.5],
            vec![1.5 * sep / 2.0, -1.5 * sep / 2.0],
            vec![0.5, 0.5],
        )
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

// log(pi_i N(x; mu_i, var_i)) for each component, written into `out`.
fn component_logs(p: &GmmParams, x: f64, out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate().take(p.k()) {
        let var = p.variances[i];
        let z = x - p.means[i];
        *slot = p.weights[i].ln() - 0.5 * (2.0 * PI * var).ln() - 0.5 * z * z / var;
    }
}

/// Observed-data log-likelihood `sum_j log sum_i pi_i N(x_j; mu_i, var_i)`.
pub fn gmm_loglik(params: &GmmParams, data: &[f64]) -> f64 {
    let mut buf = vec![0.0; params.k()];
    data.iter()
        .map(|&x| {
            component_logs(params, x, &mut buf);
            log_sum_exp(&buf)
        })
        .sum()
}

/// One EM step: responsibilities, then weighted moments.
pub fn gmm_em_step(params: &GmmParams, data: &[f64]) -> GmmParams {
    let k = params.k();
    let mut buf = vec![0.0; k];
    let mut mass = vec![0.0; k];
    let mut first = vec![0.0; k];
    let mut resp = vec![0.0; k * data.len()];
    for (j, &x) in data.iter().enumerate() {
        component_logs(params, x, &mut buf);
        let norm = log_sum_exp(&buf);
        for i in 0..k {
            let r = (buf[i] - norm).exp();
            resp[j * k + i] = r;
            mass[i] += r;
            first[i] += r * x;
        }
    }
    let n = data.len() as f64;
    let means: Vec<f64> = (0..k)
        .map(|i| {
            if mass[i] > 0.0 {
                first[i] / mass[i]
            } else {
                params.means[i]
            }
        })
        .collect();
    let mut second = vec![0.0; k];
    for (j, &x) in data.iter().enumerate() {
        for i in 0..k {
            let z = x - means[i];
            second[i] += resp[j * k + i] * z * z;
        }
    }
    let variances: Vec<f64> = (0..k)
        .map(|i| {
            let v = if mass[i] > 0.0 {
                second[i] / mass[i]
            } else {
                0.0
            };
            if v < VARIANCE_FLOOR {
                log::warn!("mixture component {i} collapsed (variance {v:e}); flooring");
                VARIANCE_FLOOR
            } else {
                v
            }
        })
        .collect();
    let mut weights: Vec<f64> = mass[..k - 1].iter().map(|m| m / n).collect();
    weights.push(1.0 - weights.iter().sum::<f64>());
    GmmParams {
        weights,
        means,
        variances,
    }
}

/// Draws `n` observations from the mixture.
pub fn gmm_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, params: &GmmParams) -> Dataset {
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = params.k() - 1;
            for (i, w) in params.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            let z: f64 = rng.sample(StandardNormal);
            params.means[comp] + params.variances[comp].sqrt() * z
        })
        .collect();
    if values.is_empty() {
        return Dataset::empty(1);
    }
    Dataset::new(values, 1).expect("samples are finite")
}

/// [`gmm_sample`] on stream 0 of `seed`.
pub fn gmm_simulate(seed: u64, n: usize, params: &GmmParams) -> Dataset {
    gmm_replicate(seed, 0, n, params)
}

/// Replicate `replicate` of a simulation design: [`gmm_sample`] on its own
/// stream of `seed`.
pub fn gmm_replicate(seed: u64, replicate: u64, n: usize, params: &GmmParams) -> Dataset {
    gmm_sample(&mut stream_rng(seed, replicate), n, params)
}

/// A univariate mixture fitted to a fixed dataset.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    k: usize,
    data: Vec<f64>,
    constraints: ConstraintSpec,
    name: String,
}

impl GaussianMixture {
    pub fn new(k: usize, data: &Dataset) -> Self {
        assert!(k >= 1, "need at least one component");
        assert_eq!(data.d(), 1, "mixture data must be univariate");
        Self {
            k,
            data: data.values().to_vec(),
            constraints: constraints_for(ModelKind::Gmm(k)),
            name: format!("gmm(k={k}, n={})", data.n()),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl EmModel for GaussianMixture {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        3 * self.k - 1
    }

    fn em_step(&self, theta: &ParamVec) -> ParamVec {
        gmm_em_step(&GmmParams::unpack(theta, self.k), &self.data).pack()
    }

    fn loglik(&self, theta: &ParamVec) -> f64 {
        gmm_loglik(&GmmParams::unpack(theta, self.k), &self.data)
    }

    fn constraints(&self) -> &ConstraintSpec {
        &self.constraints
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn normal_pdf(x: f64, m: f64, v: f64) -> f64 {
        (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    }

    #[test]
    fn single_standard_normal_at_mode() {
        let p = GmmParams::new(vec![1.0], vec![0.0], vec![1.0]);
        assert_relative_eq!(
            gmm_loglik(&p, &[0.0]),
            -0.918_938_533_204_672_7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn identical_components_collapse_to_one() {
        let two = GmmParams::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]);
        let one = GmmParams::new(vec![1.0], vec![0.0], vec![1.0]);
        for x in [-2.0, 0.3, 5.0] {
            assert_relative_eq!(
                gmm_loglik(&two, &[x]),
                gmm_loglik(&one, &[x]),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn matches_direct_density_sum() {
        let mut rng = stream_rng(12, 0);
        let p = GmmParams::new(
            vec![0.2, 0.5, 0.3],
            vec![-1.0, 0.5, 3.0],
            vec![0.7, 1.2, 2.0],
        );
        let data = gmm_sample(&mut rng, 20, &p);
        let direct: f64 = data
            .values()
            .iter()
            .map(|&x| {
                (0..3)
                    .map(|i| p.weights[i] * normal_pdf(x, p.means[i], p.variances[i]))
                    .sum::<f64>()
                    .ln()
            })
            .sum();
        assert_relative_eq!(
            gmm_loglik(&p, data.values()),
            direct,
            max_relative = 1e-12,
            epsilon = 1e-10
        );
    }

    #[test]
    fn far_tail_does_not_underflow() {
        let p = GmmParams::design_truth(6.0);
        assert!(gmm_loglik(&p, &[80.0]).is_finite());
        let next = gmm_em_step(&p, &[80.0, -80.0, 0.0]);
        assert!(next.is_valid());
    }

    #[test]
    fn single_component_step_is_sample_moments() {
        let data = [1.0, 2.0, 4.0, 7.0];
        let p = GmmParams::new(vec![1.0], vec![0.0], vec![1.0]);
        let next = gmm_em_step(&p, &data);
        let mean = 3.5;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert_relative_eq!(next.means[0], mean, epsilon = 1e-14);
        assert_relative_eq!(next.variances[0], var, epsilon = 1e-14);
        assert_eq!(next.weights, vec![1.0]);
    }

    #[test]
    fn symmetric_step_preserves_symmetry() {
        let data = [-3.0, -1.0, -0.5, 0.5, 1.0, 3.0];
        let p = GmmParams::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.8, 0.8]);
        let next = gmm_em_step(&p, &data);
        assert_relative_eq!(next.weights[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(next.means[0], -next.means[1], epsilon = 1e-14);
        assert_relative_eq!(next.variances[0], next.variances[1], epsilon = 1e-14);
    }

    #[test]
    fn pack_roundtrip_and_weights_sum() {
        let p = GmmParams::new(
            vec![0.1, 0.6, 0.3],
            vec![1.0, 2.0, 3.0],
            vec![0.5, 0.25, 2.0],
        );
        let back = GmmParams::unpack(&p.pack(), 3);
        assert_relative_eq!(back.weights.iter().sum::<f64>(), 1.0);
        assert_eq!(back.means, p.means);
        assert_eq!(p.pack().len(), 8);
    }

    #[test]
    fn simulation_is_reproducible_and_calibrated() {
        let p = GmmParams::design_truth(6.0);
        let a = gmm_simulate(42, 1000, &p);
        assert_eq!(a, gmm_simulate(42, 1000, &p));
        assert!(gmm_simulate(42, 0, &p).is_empty());
        // Components are six standard deviations apart: classify by sign.
        let frac = a.values().iter().filter(|&&x| x > 0.0).count() as f64 / 1000.0;
        assert!((frac - 0.3).abs() < 0.05, "{frac}");
    }

    #[test]
    fn density_integrates_to_one() {
        let p = GmmParams::new(vec![0.3, 0.7], vec![1.5, -2.0], vec![0.4, 2.5]);
        // Composite Simpson on [-50, 50].
        let n = 200_000;
        let h = 100.0 / n as f64;
        let f = |x: f64| gmm_loglik(&p, &[x]).exp();
        let mut s = f(-50.0) + f(50.0);
        for i in 1..n {
            let x = -50.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn em_step_ascends(
            seed in 0u64..10_000,
            w in 0.05f64..0.95,
            m1 in -4.0f64..4.0,
            m2 in -4.0f64..4.0,
            v1 in 0.1f64..4.0,
            v2 in 0.1f64..4.0,
        ) {
            let truth = GmmParams::design_truth(2.0);
            let data = gmm_simulate(seed, 200, &truth);
            let p = GmmParams::new(vec![w, 1.0 - w], vec![m1, m2], vec![v1, v2]);
            let mut cur = p;
            for _ in 0..5 {
                let next = gmm_em_step(&cur, data.values());
                let (l0, l1) = (gmm_loglik(&cur, data.values()), gmm_loglik(&next, data.values()));
                prop_assert!(l1 >= l0 - 1e-10 * (1.0 + l0.abs()));
                prop_assert!(next.is_valid());
                prop_assert!((next.weights.iter().sum::<f64>() - 1.0).abs() <= 2.0 * f64::EPSILON);
                cur = next;
            }
        }
    }
}
