//! Finite-difference estimation of the EM rate matrix `DM` at a fixed point,
//! and its eigen-decomposition.
//!
//! Each eigenvalue of `DM` is the linear convergence rate of EM along the
//! matching eigenvector, so the report shows which directions EM is slow in.

use std::fmt::Write as _;

use log::{debug, warn};

use crate::em::{step_ecme, EmModel};
use crate::error::{Error, Result};
use crate::line_search::ConstraintSpec;
use crate::spectral::{sym_eigen, sym_sqrt_pair};
use crate::{Matrix, ParamVec};

/// Default relative step: coordinate `i` is perturbed by `h (1 + |theta_i|)`.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Imaginary parts up to this size are treated as roundoff.
pub const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DmEstimate {
    pub dm: Matrix,
    /// Relative step actually used (after any shrinking).
    pub step: f64,
    /// Coordinates differenced one-sidedly because a perturbation left the
    /// feasible region.
    pub one_sided: Vec<usize>,
    /// `max_i |M(theta)_i - theta_i|` at the probed point.
    pub fixed_point_residual: f64,
}

/// Jacobian of the EM map at `theta_star`.
pub fn estimate_dm(model: &dyn EmModel, theta_star: &ParamVec, h: f64) -> Result<DmEstimate> {
    estimate_map_jacobian(|t| Ok(model.em_step(t)), model.constraints(), theta_star, h)
}

/// Jacobian of the ECME map (EM followed by the ML-step) at `theta_star`.
pub fn estimate_dm_ecme(model: &dyn EmModel, theta_star: &ParamVec, h: f64) -> Result<DmEstimate> {
    if !model.has_ml_step() {
        return Err(Error::MissingMlStep(model.name().to_string()));
    }
    estimate_map_jacobian(|t| step_ecme(model, t), model.constraints(), theta_star, h)
}

/// Central-difference Jacobian of a fixed-point map.
///
/// `theta_star` must satisfy `|M(theta*) - theta*|_inf < 10 h`. If one of the
/// two perturbations of a coordinate is infeasible a one-sided difference is
/// used; if both are, the step is shrunk tenfold once before giving up.
pub fn estimate_map_jacobian<F>(
    map: F,
    constraints: &ConstraintSpec,
    theta_star: &ParamVec,
    h: f64,
) -> Result<DmEstimate>
where
    F: Fn(&ParamVec) -> Result<ParamVec>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidSettings(format!(
            "step must be positive, got {h}"
        )));
    }
    let p = theta_star.len();
    let center = map(theta_star)?;
    if center.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: center.len(),
        });
    }
    let residual = (&center - theta_star).amax();
    if !(residual < 10.0 * h) {
        return Err(Error::NotAFixedPoint(residual));
    }
    match jacobian_with_step(&map, constraints, theta_star, &center, h) {
        Err(Error::InfeasiblePerturbation(i)) => {
            debug!(
                "coordinate {i} cannot be perturbed at step {h}; retrying at {}",
                h / 10.0
            );
            jacobian_with_step(&map, constraints, theta_star, &center, h / 10.0)
        }
        other => other,
    }
    .map(|(dm, one_sided, step)| DmEstimate {
        dm,
        step,
        one_sided,
        fixed_point_residual: residual,
    })
}

fn jacobian_with_step<F>(
    map: &F,
    constraints: &ConstraintSpec,
    theta: &ParamVec,
    center: &ParamVec,
    h: f64,
) -> Result<(Matrix, Vec<usize>, f64)>
where
    F: Fn(&ParamVec) -> Result<ParamVec>,
{
    let p = theta.len();
    let mut dm = Matrix::zeros(p, p);
    let mut one_sided = Vec::new();
    for i in 0..p {
        let hi = h * (1.0 + theta[i].abs());
        let mut up = theta.clone();
        up[i] += hi;
        let mut down = theta.clone();
        down[i] -= hi;
        let column = match (constraints.is_feasible(&up), constraints.is_feasible(&down)) {
            (true, true) => (map(&up)? - map(&down)?) / (2.0 * hi),
            (true, false) => {
                one_sided.push(i);
                (map(&up)? - center) / hi
            }
            (false, true) => {
                one_sided.push(i);
                (center - map(&down)?) / hi
            }
            (false, false) => return Err(Error::InfeasiblePerturbation(i)),
        };
        dm.set_column(i, &column);
    }
    if !one_sided.is_empty() {
        warn!("one-sided differences for coordinates {one_sided:?}");
    }
    Ok((dm, one_sided, h))
}

/// Eigenpairs of an estimated rate matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct DmReport {
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: Matrix,
    /// Largest imaginary part seen among the eigenvalues.
    pub max_imag: f64,
}

impl DmReport {
    /// True when some eigenvalue had an imaginary part above [`IMAG_TOL`].
    pub fn has_complex(&self) -> bool {
        self.max_imag > IMAG_TOL
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `index,eigenvalue` rows with a header.
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{},{v:e}", i + 1);
        }
        out
    }

    /// Whitespace-separated eigenvector matrix, one row per coordinate.
    pub fn eigenvectors_text(&self) -> String {
        matrix_text(&self.eigenvectors)
    }
}

pub fn matrix_text(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Eigen-decomposition of a general square matrix.
///
/// Eigenvalues come from the real Schur form; each eigenvector is the right
/// singular vector of `DM - lambda I` with the smallest singular value.
/// Complex pairs are reported by their real parts and recorded in `max_imag`.
pub fn dm_eigen_report(dm: &Matrix) -> Result<DmReport> {
    let p = dm.nrows();
    if dm.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: dm.ncols(),
        });
    }
    if p == 0 {
        return Ok(DmReport {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
            max_imag: 0.0,
        });
    }
    let schur = dm
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailure)?;
    let complex = schur.complex_eigenvalues();
    let max_imag = complex.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_imag > IMAG_TOL {
        warn!("rate matrix has complex eigenvalues (max imaginary part {max_imag:e})");
    }
    let mut values: Vec<f64> = complex.iter().map(|z| z.re).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let mut vectors = Matrix::zeros(p, p);
    for (k, &v) in values.iter().enumerate() {
        let shifted = dm - Matrix::identity(p, p) * v;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.ok_or(Error::EigenFailure)?;
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or(Error::EigenFailure)?;
        let mut vec = v_t.row(smallest).transpose();
        orient(&mut vec);
        vectors.set_column(k, &vec);
    }
    Ok(DmReport {
        eigenvalues: values,
        eigenvectors: vectors,
        max_imag,
    })
}

/// Eigen-decomposition using the complete-data information `i_com`.
///
/// `DM = I - I_com^{-1} I_obs` is similar to the symmetric matrix
/// `I_com^{1/2} DM I_com^{-1/2}`; the estimate is symmetrized in that frame,
/// decomposed, and the eigenvectors mapped back by `I_com^{-1/2}`.
pub fn dm_eigen_report_with_icom(dm: &Matrix, i_com: &Matrix) -> Result<DmReport> {
    let p = dm.nrows();
    for n in [dm.ncols(), i_com.nrows(), i_com.ncols()] {
        if n != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: n,
            });
        }
    }
    let (root, inv_root) = sym_sqrt_pair(i_com)?;
    let similar = &root * dm * &inv_root;
    let asym = (&similar - similar.transpose()).amax() * 0.5;
    let (values, t) = sym_eigen(&((&similar + similar.transpose()) * 0.5))?;
    let mut vectors = inv_root * t;
    for mut col in vectors.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    for k in 0..p {
        let mut v = vectors.column(k).into_owned();
        orient(&mut v);
        vectors.set_column(k, &v);
    }
    Ok(DmReport {
        eigenvalues: values.iter().copied().collect(),
        eigenvectors: vectors,
        max_imag: asym,
    })
}

// Sign convention: the largest-magnitude entry is positive.
fn orient(v: &mut ParamVec) {
    let (imax, _) = v.iamax_full();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
}
