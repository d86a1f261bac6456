//! Quadratic surrogates and the spectral theory of EM near a maximum.
//!
//! Near the MLE the observed log-likelihood is modelled as the quadratic
//! `-1/2 (theta - theta_hat)' I_obs (theta - theta_hat)` and the EM map as the
//! affine contraction `theta + I_com^{-1} I_obs (theta_hat - theta)`. Writing
//! `I_com^{-1/2} I_obs I_com^{-1/2} = T diag(lambda) T'` with `T` orthogonal and
//! `P = I_com^{-1/2} T`, the coordinates `eta = P^{-1} (theta_hat - theta)`
//! contract independently under EM: `eta_i <- (1 - lambda_i) eta_i`.
//!
//! [`SpectralDecomp`] exposes the closed forms that follow from this picture
//! (SOR relaxation factor, two-step SOR contraction, optimal fixed
//! overrelaxation) and serves as the oracle for the engine's behaviour on
//! surrogates.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, InfoMatrix, Result};
use crate::{Matrix, ParamVec};

const ASYMMETRY_TOL: f64 = 1e-12;
const PD_RATIO: f64 = 1e-12;

/// Synthetic near-MLE problem `(theta_hat, I_obs, I_com)`.
#[derive(Debug, Clone)]
pub struct QuadSurrogate {
    theta_hat: ParamVec,
    i_obs: Matrix,
    i_com: Matrix,
    // I_com^{-1} I_obs, the matrix EM removes from the error each step.
    rate: Matrix,
}

/// Eigen-structure of `I_com^{-1} I_obs`, sorted by descending lambda.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub lambdas: DVector<f64>,
    pub p_mat: Matrix,
    pub p_inv: Matrix,
    pub t_mat: Matrix,
}

fn symmetrized(m: &Matrix, which: InfoMatrix) -> Result<Matrix> {
    let scale = m.norm();
    let asym = (m - m.transpose()).norm();
    if !scale.is_finite() || asym > ASYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(which));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub(crate) fn sym_eigen(m: &Matrix) -> Result<(DVector<f64>, Matrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

fn is_positive_definite(m: &Matrix) -> Result<bool> {
    let (values, _) = sym_eigen(m)?;
    let largest = values[0];
    let smallest = values[values.len() - 1];
    Ok(largest > 0.0 && smallest > PD_RATIO * largest)
}

/// Symmetric square root and its inverse of an SPD matrix.
pub(crate) fn sym_sqrt_pair(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let (values, vectors) = sym_eigen(m)?;
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::EigenFailure);
    }
    let root = DMatrix::from_diagonal(&values.map(f64::sqrt));
    let inv_root = DMatrix::from_diagonal(&values.map(|v| 1.0 / v.sqrt()));
    let sqrt = &vectors * root * vectors.transpose();
    let inv_sqrt = &vectors * inv_root * vectors.transpose();
    Ok((sqrt, inv_sqrt))
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

impl QuadSurrogate {
    /// Validated surrogate. Both information matrices and their difference
    /// `I_mis = I_com - I_obs` must be positive definite.
    pub fn new(theta_hat: ParamVec, i_obs: Matrix, i_com: Matrix) -> Result<Self> {
        let p = theta_hat.len();
        for m in [&i_obs, &i_com] {
            check_dim(p, m.nrows())?;
            check_dim(p, m.ncols())?;
        }
        let i_obs = symmetrized(&i_obs, InfoMatrix::Observed)?;
        let i_com = symmetrized(&i_com, InfoMatrix::Complete)?;
        if !is_positive_definite(&i_obs)? {
            return Err(Error::NotPositiveDefinite(InfoMatrix::Observed));
        }
        if !is_positive_definite(&i_com)? {
            return Err(Error::NotPositiveDefinite(InfoMatrix::Complete));
        }
        if !is_positive_definite(&(&i_com - &i_obs))? {
            return Err(Error::NotPositiveDefinite(InfoMatrix::Missing));
        }
        Ok(Self::from_parts_unchecked(theta_hat, i_obs, i_com))
    }

    /// Builds a surrogate without any validation. Meant for degenerate
    /// experiments such as `I_com = I_obs` (no missing information), where the
    /// EM map converges in one step. `i_com` must still be invertible.
    pub fn from_parts_unchecked(theta_hat: ParamVec, i_obs: Matrix, i_com: Matrix) -> Self {
        let rate = i_com
            .clone()
            .lu()
            .solve(&i_obs)
            .expect("i_com must be invertible");
        Self {
            theta_hat,
            i_obs,
            i_com,
            rate,
        }
    }

    /// Random surrogate with prescribed spectrum `lambdas` (each in (0, 1)).
    ///
    /// `I_com = A'A + p I` for a standard normal `A`, `T` is a random
    /// orthogonal matrix, and `I_obs = I_com^{1/2} T diag(lambdas) T' I_com^{1/2}`.
    /// `theta_hat` is standard normal.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, lambdas: &[f64]) -> Result<Self> {
        let p = lambdas.len();
        let theta_hat = ParamVec::from_fn(p, |_, _| rng.sample(StandardNormal));
        Self::random_centered_at(rng, theta_hat, lambdas)
    }

    /// As [`QuadSurrogate::random`] with a caller-chosen `theta_hat`.
    pub fn random_centered_at<R: Rng + ?Sized>(
        rng: &mut R,
        theta_hat: ParamVec,
        lambdas: &[f64],
    ) -> Result<Self> {
        let p = lambdas.len();
        check_dim(p, theta_hat.len())?;
        if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::InvalidSettings(
                "surrogate eigenvalues must lie in (0, 1)".into(),
            ));
        }
        let a = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
        let i_com = a.transpose() * &a + Matrix::identity(p, p) * p as f64;
        let t = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal))
            .qr()
            .q();
        let (root, _) = sym_sqrt_pair(&i_com)?;
        let lam = Matrix::from_diagonal(&DVector::from_column_slice(lambdas));
        let i_obs = &root * &t * lam * t.transpose() * &root;
        let i_obs = (&i_obs + i_obs.transpose()) * 0.5;
        Self::new(theta_hat, i_obs, i_com)
    }

    /// Independent surrogates stacked into one, with block-diagonal
    /// information matrices.
    pub fn block_diagonal(parts: &[&QuadSurrogate]) -> Result<Self> {
        let p: usize = parts.iter().map(|s| s.dim()).sum();
        let mut theta_hat = ParamVec::zeros(p);
        let mut i_obs = Matrix::zeros(p, p);
        let mut i_com = Matrix::zeros(p, p);
        let mut at = 0;
        for s in parts {
            let q = s.dim();
            theta_hat.rows_mut(at, q).copy_from(&s.theta_hat);
            i_obs.view_mut((at, at), (q, q)).copy_from(&s.i_obs);
            i_com.view_mut((at, at), (q, q)).copy_from(&s.i_com);
            at += q;
        }
        Self::new(theta_hat, i_obs, i_com)
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn theta_hat(&self) -> &ParamVec {
        &self.theta_hat
    }

    pub fn i_obs(&self) -> &Matrix {
        &self.i_obs
    }

    pub fn i_com(&self) -> &Matrix {
        &self.i_com
    }

    pub fn i_mis(&self) -> Matrix {
        &self.i_com - &self.i_obs
    }

    /// `I_com^{-1} I_obs`.
    pub fn rate_matrix(&self) -> &Matrix {
        &self.rate
    }

    /// Quadratic log-likelihood, maximal (zero) at `theta_hat`.
    pub fn loglik(&self, theta: &ParamVec) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        let e = theta - &self.theta_hat;
        Ok(-0.5 * e.dot(&(&self.i_obs * &e)))
    }

    /// One EM step: `theta + I_com^{-1} I_obs (theta_hat - theta)`.
    pub fn em_map(&self, theta: &ParamVec) -> Result<ParamVec> {
        check_dim(self.dim(), theta.len())?;
        let gap = &self.theta_hat - theta;
        Ok(theta + &self.rate * gap)
    }

    /// The missing-information fraction `I - I_com^{-1} I_obs`.
    pub fn dm_matrix(&self) -> Matrix {
        Matrix::identity(self.dim(), self.dim()) - &self.rate
    }

    /// Symmetric-route eigendecomposition of `I_com^{-1} I_obs`.
    pub fn spectral(&self) -> Result<SpectralDecomp> {
        let (root, inv_root) = sym_sqrt_pair(&self.i_com)?;
        let whitened = &inv_root * &self.i_obs * &inv_root;
        let whitened = (&whitened + whitened.transpose()) * 0.5;
        let (lambdas, t_mat) = sym_eigen(&whitened)?;
        let p_mat = &inv_root * &t_mat;
        let p_inv = t_mat.transpose() * &root;
        Ok(SpectralDecomp {
            lambdas,
            p_mat,
            p_inv,
            t_mat,
        })
    }

    /// Plain-text form: `p`, the `theta_hat` row, `p` rows of `I_obs`, then
    /// `p` rows of `I_com`, whitespace separated.
    pub fn to_text(&self) -> String {
        let p = self.dim();
        let mut out = format!("{p}\n");
        let row = |it: &mut dyn Iterator<Item = f64>| {
            it.map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&row(&mut self.theta_hat.iter().copied()));
        out.push('\n');
        for m in [&self.i_obs, &self.i_com] {
            for i in 0..p {
                out.push_str(&row(&mut m.row(i).iter().copied()));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let p: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty surrogate file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension line: {e}")))?;
        let mut parse_row = |what: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} row")))?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))?;
            if row.len() != p {
                return Err(Error::Parse(format!(
                    "{what} row has {} entries, expected {p}",
                    row.len()
                )));
            }
            Ok(row)
        };
        let theta_hat = ParamVec::from_vec(parse_row("theta_hat")?);
        let mut read_matrix = |what: &str| -> Result<Matrix> {
            let mut data = Vec::with_capacity(p * p);
            for _ in 0..p {
                data.extend(parse_row(what)?);
            }
            Ok(Matrix::from_row_slice(p, p, &data))
        };
        let i_obs = read_matrix("i_obs")?;
        let i_com = read_matrix("i_com")?;
        Self::new(theta_hat, i_obs, i_com)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// `eta = P^{-1} (theta_hat - theta)`.
    pub fn eta(&self, theta_hat: &ParamVec, theta: &ParamVec) -> Result<ParamVec> {
        check_dim(self.dim(), theta_hat.len())?;
        check_dim(self.dim(), theta.len())?;
        Ok(&self.p_inv * (theta_hat - theta))
    }

    /// `P diag(lambda) P^{-1}`, which reproduces `I_com^{-1} I_obs`.
    pub fn reassemble(&self) -> Matrix {
        &self.p_mat * Matrix::from_diagonal(&self.lambdas) * &self.p_inv
    }

    /// DM eigenvalues `1 - lambda_i`, descending.
    pub fn dm_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lambdas.iter().map(|l| 1.0 - l).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Exact SOR relaxation factor from the current eta coordinates:
    /// `(eta' L^2 eta) / (eta' L^3 eta) - 1`.
    pub fn sor_alpha(&self, eta: &ParamVec) -> Result<f64> {
        check_dim(self.dim(), eta.len())?;
        let (mut num, mut den) = (0.0, 0.0);
        for (l, e) in self.lambdas.iter().zip(eta.iter()) {
            let w = e * e * l * l;
            num += w;
            den += w * l;
        }
        if den == 0.0 {
            return Err(Error::ZeroEta);
        }
        Ok(num / den - 1.0)
    }

    /// Contraction factor of two consecutive SOR steps for `p = 2`, given
    /// `r = (eta_1 / eta_2)^2` at the start of the pair.
    pub fn sor2_contraction(&self, eta_ratio_sq: f64) -> Result<f64> {
        if self.dim() != 2 {
            return Err(Error::NotTwoDimensional(self.dim()));
        }
        if !(eta_ratio_sq > 0.0) || !eta_ratio_sq.is_finite() {
            return Err(Error::NonpositiveRatio(eta_ratio_sq));
        }
        let (l1, l2) = (self.lambdas[0], self.lambdas[1]);
        let r = eta_ratio_sq;
        let cross = (l1 * l1) / (l2 * l2) * r + (l2 * l2) / (l1 * l1) / r;
        Ok((l2 - l1).powi(2) / (l1 * l1 + l2 * l2 + l1 * l2 * cross))
    }

    /// Fixed relaxation factor with the best worst-case rate, and that rate.
    pub fn optimal_sorf(&self) -> (f64, f64) {
        let l1 = self.lambdas[0];
        let lp = self.lambdas[self.dim() - 1];
        (2.0 / (l1 + lp) - 1.0, (l1 - lp) / (l1 + lp))
    }
}

/// `p` eigenvalues in `[lo, hi]`, descending, with adjacent gaps of at least
/// `min_gap`. Uniform over such configurations.
pub fn sample_lambdas<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    lo: f64,
    hi: f64,
    min_gap: f64,
) -> Result<Vec<f64>> {
    let slack = hi - lo - min_gap * p.saturating_sub(1) as f64;
    if p == 0 || !(slack > 0.0) {
        return Err(Error::InvalidSettings(format!(
            "cannot place {p} eigenvalues with gap {min_gap} in [{lo}, {hi}]"
        )));
    }
    let mut u: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * slack).collect();
    u.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, x)| lo + x + min_gap * i as f64)
        .collect();
    out.reverse();
    Ok(out)
}
