//! Building a model and its starting point from flags.

use std::path::PathBuf;

use anyhow::anyhow;
use decme::em::EmModel;
use decme::models::{BivariateT, Dataset, GaussianMixture, GmmParams, MvtParams, SurrogateModel};
use decme::spectral::QuadSurrogate;
use decme::ParamVec;

use crate::args::{ModelArg, ModelSel};
use crate::config::{ConfigFile, Manifest};
use crate::Failure;

pub struct Problem {
    pub model: Box<dyn EmModel>,
    pub start: ParamVec,
    /// The surrogate itself, when the model is one.
    pub surrogate: Option<QuadSurrogate>,
}

pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Failure::Usage(anyhow!("{what}: cannot parse '{}': {e}", s.trim())))
        })
        .collect()
}

/// Starting point for a mixture fitted to arbitrary data: equal weights,
/// means spread over one standard deviation either side of the sample mean,
/// each variance half the sample variance.
fn moment_start_gmm(data: &[f64], k: usize) -> GmmParams {
    let n = data.len().max(1) as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).max(1e-8);
    let sd = var.sqrt();
    let means = (0..k)
        .map(|i| {
            if k == 1 {
                mean
            } else {
                mean + sd * (1.0 - 2.0 * i as f64 / (k - 1) as f64)
            }
        })
        .collect();
    GmmParams::new(vec![1.0 / k as f64; k], means, vec![0.5 * var; k])
}

/// Sample mean and covariance, one degree of freedom.
fn moment_start_mvt(data: &Dataset) -> MvtParams {
    let n = data.n().max(1) as f64;
    let mut mu = [0.0; 2];
    for r in data.rows() {
        mu[0] += r[0] / n;
        mu[1] += r[1] / n;
    }
    let mut psi = [0.0; 3];
    for r in data.rows() {
        let (a, b) = (r[0] - mu[0], r[1] - mu[1]);
        psi[0] += a * a / n;
        psi[1] += a * b / n;
        psi[2] += b * b / n;
    }
    let p = MvtParams::new(mu, psi, 1.0);
    if p.is_valid() {
        p
    } else {
        MvtParams::new(mu, [1.0, 0.0, 1.0], 1.0)
    }
}

pub fn load_problem(
    sel: &ModelSel,
    cfg: &ConfigFile,
    manifest: &mut Manifest,
) -> Result<Problem, Failure> {
    let kind: ModelArg = cfg
        .pick(sel.model, "model")?
        .ok_or_else(|| Failure::Usage(anyhow!("--model is required (gmm, mvt or surrogate)")))?;
    let data: PathBuf = cfg
        .pick(sel.data.clone(), "data")?
        .ok_or_else(|| Failure::Usage(anyhow!("--data is required")))?;
    let start_raw: Option<String> = cfg.pick(sel.start.clone(), "start")?;
    let safety_cap: Option<usize> = cfg.pick(sel.safety_cap, "safety_cap")?;
    manifest.set("model", kind.as_str());
    manifest.set("data", data.display());
    manifest.set_opt("safety_cap", safety_cap);

    if !data.exists() {
        return Err(Failure::Io(anyhow!(
            "dataset {} does not exist",
            data.display()
        )));
    }
    let read_csv = || {
        Dataset::read_csv(&data)
            .map_err(|e| Failure::Io(anyhow!("reading {}: {e}", data.display())))
    };

    let (model, default_start, surrogate): (Box<dyn EmModel>, ParamVec, _) = match kind {
        ModelArg::Gmm => {
            let ds = read_csv()?;
            if ds.d() != 1 {
                return Err(Failure::Usage(anyhow!(
                    "{}: mixture data must have one column, found {}",
                    data.display(),
                    ds.d()
                )));
            }
            let k: usize = cfg.pick_or(sel.k, "k", 2)?;
            let sep: Option<f64> = cfg.pick(sel.sep, "sep")?;
            manifest.set("k", k);
            manifest.set_opt("sep", sep);
            if k < 1 {
                return Err(Failure::Usage(anyhow!("--k must be at least 1")));
            }
            let start = match sep {
                Some(s) if k == 2 => GmmParams::design_start(s),
                Some(_) => {
                    return Err(Failure::Usage(anyhow!(
                        "--sep selects a two-component start; got --k {k}"
                    )))
                }
                None => moment_start_gmm(ds.values(), k),
            };
            (Box::new(GaussianMixture::new(k, &ds)), start.pack(), None)
        }
        ModelArg::Mvt => {
            let ds = read_csv()?;
            if ds.d() != 2 {
                return Err(Failure::Usage(anyhow!(
                    "{}: bivariate t data must have two columns, found {}",
                    data.display(),
                    ds.d()
                )));
            }
            let start = moment_start_mvt(&ds).pack();
            (Box::new(BivariateT::new(ds)), start, None)
        }
        ModelArg::Surrogate => {
            let q = QuadSurrogate::read(&data).map_err(|e| match e {
                decme::Error::Io(io) => Failure::Io(anyhow!("reading {}: {io}", data.display())),
                other => Failure::Usage(anyhow!("{}: {other}", data.display())),
            })?;
            let mut model = SurrogateModel::new(q.clone());
            let block: Option<String> = cfg.pick(sel.ml_block.clone(), "ml_block")?;
            if let Some(raw) = block {
                let idx: Vec<usize> = parse_list(&raw, "--ml-block")?;
                if idx.is_empty() || idx.iter().any(|&i| i >= q.dim()) {
                    return Err(Failure::Usage(anyhow!(
                        "--ml-block indices must lie in 0..{} and not be empty",
                        q.dim()
                    )));
                }
                manifest.set("ml_block", &raw);
                model = model.with_ml_block(idx);
            }
            let start = q.theta_hat().add_scalar(1.0);
            (Box::new(model), start, Some(q))
        }
    };

    let start = match start_raw {
        Some(raw) => {
            let v: Vec<f64> = parse_list(&raw, "--start")?;
            if v.len() != model.dim() {
                return Err(Failure::Usage(anyhow!(
                    "--start has {} values but the model has {} parameters",
                    v.len(),
                    model.dim()
                )));
            }
            ParamVec::from_vec(v)
        }
        None => default_start,
    };
    if !model.constraints().is_feasible(&start) {
        return Err(Failure::Usage(anyhow!(
            "starting point {:?} is infeasible",
            start.as_slice()
        )));
    }
    manifest.set("start", join(start.iter()));
    manifest.set("model_name", model.name());
    Ok(Problem {
        model,
        start,
        surrogate,
    })
}

pub fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses a comma list into a parameter of length `dim`.
pub fn parse_theta(raw: &str, dim: usize, what: &str) -> Result<ParamVec, Failure> {
    let v: Vec<f64> = parse_list(raw, what)?;
    if v.len() != dim {
        return Err(Failure::Usage(anyhow!(
            "{what} has {} values, expected {dim}",
            v.len()
        )));
    }
    Ok(ParamVec::from_vec(v))
}

pub fn require_positive(value: f64, what: &str) -> Result<f64, Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Failure::Usage(anyhow!(
            "{what} must be a positive number, got {value}"
        )))
    }
}
