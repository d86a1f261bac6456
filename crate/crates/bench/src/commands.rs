use std::path::{Path, PathBuf};

use anyhow::anyhow;
use decme::checks::{run_suite, SuiteConfig};
use decme::dm_probe::{
    dm_eigen_report, dm_eigen_report_with_icom, estimate_dm, estimate_dm_ecme, matrix_text,
    DEFAULT_STEP,
};
use decme::em::{StopRule, Variant, DEFAULT_SAFETY_CAP};
use decme::line_search::LineSearchSettings;
use decme::models::gmm::gmm_replicate;
use decme::models::mvt::mvt_sample;
use decme::models::{GmmParams, MvtParams};
use decme::protocol::{compute_lmax, default_race_variants, race, summary_csv, RaceSpec, RACE_GAP};
use decme::rng::stream_rng;
use decme::spectral::{sample_lambdas, QuadSurrogate};

use crate::args::{Common, FitArgs, ModelArg, RaceArgs, SimulateArgs, SpectralArgs, VerifyArgs};
use crate::config::{ensure_dir, write_file, ConfigFile, Manifest};
use crate::plot::convergence_svg;
use crate::problem::{join, load_problem, parse_list, parse_theta, require_positive, Problem};
use crate::{core_failure, Failure};

pub const DEFAULT_SEED: u64 = 20_090_101;
pub const DEFAULT_OUT: &str = "decme-out";

/// Config file, output directory and seed, resolved for one command.
struct Session {
    cfg: ConfigFile,
    out: PathBuf,
    seed: u64,
    manifest: Manifest,
}

impl Session {
    fn open(command: &str, common: &Common) -> Result<Self, Failure> {
        let cfg = ConfigFile::load(common.config.as_deref())?;
        let out: PathBuf = cfg.pick_or(common.out.clone(), "out", PathBuf::from(DEFAULT_OUT))?;
        let seed: u64 = cfg.pick_or(common.seed, "seed", DEFAULT_SEED)?;
        let mut manifest = Manifest::new(command);
        if let Some(path) = &common.config {
            manifest.set("config", path.display());
        }
        manifest.set("out", out.display());
        manifest.set("seed", seed);
        ensure_dir(&out)?;
        Ok(Self {
            cfg,
            out,
            seed,
            manifest,
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self) -> Result<(), Failure> {
        let path = self.manifest.write(&self.out)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut s = Session::open("simulate", &args.common)?;
    let kind: ModelArg = s
        .cfg
        .pick(args.model, "model")?
        .ok_or_else(|| Failure::Usage(anyhow!("--model is required (gmm, mvt or surrogate)")))?;
    let replicates: usize = s.cfg.pick_or(args.replicates, "replicates", 10)?;
    s.manifest.set("model", kind.as_str());
    s.manifest.set("replicates", replicates);

    let mut files = Vec::with_capacity(replicates);
    match kind {
        ModelArg::Gmm => {
            let sep: f64 = s
                .cfg
                .pick(args.sep, "sep")?
                .ok_or_else(|| Failure::Usage(anyhow!("--sep is required for gmm simulation")))?;
            let n: usize = s.cfg.pick_or(args.n, "n", 1000)?;
            require_positive(sep, "--sep")?;
            let truth = GmmParams::design_truth(sep);
            s.manifest.set("sep", sep);
            s.manifest.set("n", n);
            s.manifest.set("truth", join(truth.pack().iter()));
            for r in 0..replicates {
                let ds = gmm_replicate(s.seed, r as u64, n, &truth);
                let path = s.file(&format!("gmm_sep{sep}_rep{r:02}.csv"));
                ds.write_csv(&path).map_err(|e| io_failure(&path, e))?;
                files.push(path);
            }
        }
        ModelArg::Mvt => {
            let n: usize = s.cfg.pick_or(args.n, "n", 75)?;
            let nu: f64 = s.cfg.pick_or(args.nu, "nu", 3.0)?;
            require_positive(nu, "--nu")?;
            let truth = MvtParams::standard(nu);
            s.manifest.set("n", n);
            s.manifest.set("nu", nu);
            s.manifest.set("truth", join(truth.pack().iter()));
            for r in 0..replicates {
                let ds = mvt_sample(&mut stream_rng(s.seed, r as u64), n, &truth);
                let path = s.file(&format!("mvt_rep{r:02}.csv"));
                ds.write_csv(&path).map_err(|e| io_failure(&path, e))?;
                files.push(path);
            }
        }
        ModelArg::Surrogate => {
            let p: usize = s.cfg.pick(args.p, "p")?.ok_or_else(|| {
                Failure::Usage(anyhow!("--p is required for surrogate simulation"))
            })?;
            if p < 1 {
                return Err(Failure::Usage(anyhow!("--p must be at least 1")));
            }
            let gap = (0.4 / p as f64).min(0.05);
            s.manifest.set("p", p);
            s.manifest.set("lambda_range", "0.02,0.98");
            s.manifest.set("lambda_gap", gap);
            for r in 0..replicates {
                let mut rng = stream_rng(s.seed, r as u64);
                let lambdas = sample_lambdas(&mut rng, p, 0.02, 0.98, gap).map_err(core_failure)?;
                let q = QuadSurrogate::random(&mut rng, &lambdas).map_err(core_failure)?;
                let path = s.file(&format!("surrogate_p{p}_rep{r:02}.txt"));
                q.write(&path).map_err(|e| io_failure(&path, e))?;
                files.push(path);
            }
        }
    }
    for (i, f) in files.iter().enumerate() {
        s.manifest.set(&format!("file_{i:02}"), f.display());
    }
    s.finish()?;
    println!("wrote {} dataset(s) to {}", files.len(), s.out.display());
    Ok(())
}

fn io_failure(path: &Path, e: decme::Error) -> Failure {
    Failure::Io(anyhow!("writing {}: {e}", path.display()))
}

fn safety_cap(s: &Session, cli: Option<usize>) -> Result<usize, Failure> {
    let cap = s.cfg.pick_or(cli, "safety_cap", DEFAULT_SAFETY_CAP)?;
    if cap == 0 {
        return Err(Failure::Usage(anyhow!("--safety-cap must be at least 1")));
    }
    Ok(cap)
}

/// Stringent EM pre-run; records the result in the manifest.
fn pre_run(p: &Problem, s: &mut Session, cap: usize) -> Result<(f64, decme::ParamVec), Failure> {
    let r = compute_lmax(p.model.as_ref(), &p.start, cap)
        .map_err(|f| Failure::Numerical(anyhow!("{f}")))?;
    s.manifest.set("lmax", r.lmax);
    s.manifest.set("lmax_iterations", r.iterations);
    s.manifest.set("lmax_converged", r.converged);
    s.manifest.set("theta_star", join(r.theta.iter()));
    if !r.converged {
        s.finish()?;
        return Err(Failure::Numerical(anyhow!(
            "EM pre-run hit the safety cap after {} iterations; best log-likelihood {}",
            r.iterations,
            r.lmax
        )));
    }
    Ok((r.lmax, r.theta))
}

pub fn lmax(args: &FitArgs) -> Result<(), Failure> {
    let mut s = Session::open("lmax", &args.common)?;
    let p = load_problem(&args.model, &s.cfg, &mut s.manifest)?;
    let cap = safety_cap(&s, args.model.safety_cap)?;
    let (lmax, _) = pre_run(&p, &mut s, cap)?;
    s.finish()?;
    println!("{lmax}");
    Ok(())
}

/// How a race decides to stop, before l_max is known.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RaceStop {
    /// Stop at `l_max - gap`.
    Gap(f64),
    Rule(StopRule),
}

fn parse_race_stop(raw: &str) -> Result<RaceStop, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::Usage(anyhow!("--stop '{raw}': {e}"));
    match raw.split_once(':') {
        Some(("target", v)) => {
            let gap: f64 = v.trim().parse().map_err(|e| bad(&e))?;
            if gap.is_nan() || gap < 0.0 {
                return Err(bad(&"gap must be non-negative"));
            }
            Ok(RaceStop::Gap(gap))
        }
        _ => raw
            .parse::<StopRule>()
            .map(RaceStop::Rule)
            .map_err(|e| bad(&e)),
    }
}

fn parse_variants(raw: &str) -> Result<Vec<Variant>, Failure> {
    let v: Vec<Variant> = parse_list(raw, "--variants")?;
    if v.is_empty() {
        return Err(Failure::Usage(anyhow!("--variants is empty")));
    }
    Ok(v)
}

pub fn race_cmd(args: &RaceArgs) -> Result<(), Failure> {
    let mut s = Session::open("race", &args.common)?;
    let p = load_problem(&args.model, &s.cfg, &mut s.manifest)?;
    let cap = safety_cap(&s, args.model.safety_cap)?;
    let stop_raw: String =
        s.cfg
            .pick_or(args.stop.clone(), "stop", format!("target:{RACE_GAP}"))?;
    let stop = parse_race_stop(&stop_raw)?;
    let ls_tol: f64 = s
        .cfg
        .pick_or(args.ls_tol, "ls_tol", LineSearchSettings::default().tol)?;
    let repeat: usize = s.cfg.pick_or(args.repeat, "repeat", 1)?;
    let variants = match s.cfg.pick::<String>(args.variants.clone(), "variants")? {
        Some(raw) => parse_variants(&raw)?,
        None => default_race_variants(p.model.as_ref()),
    };
    let mut alpha: Option<f64> = s.cfg.pick(args.alpha, "alpha")?;
    if variants.contains(&Variant::Sorf) && alpha.is_none() {
        match &p.surrogate {
            Some(q) => alpha = Some(q.spectral().map_err(core_failure)?.optimal_sorf().0),
            None => return Err(Failure::Usage(anyhow!("sorf needs --alpha for this model"))),
        }
    }
    if repeat == 0 {
        return Err(Failure::Usage(anyhow!("--repeat must be at least 1")));
    }
    let settings = LineSearchSettings::default().with_tol(require_positive(ls_tol, "--ls-tol")?);
    settings
        .validate()
        .map_err(|e| Failure::Usage(anyhow!("{e}")))?;
    for v in &variants {
        if v.uses_ml_step() && !p.model.has_ml_step() {
            log::warn!(
                "{v} needs an ML-step, which {} does not provide",
                p.model.name()
            );
        }
    }
    s.manifest.set("stop", &stop_raw);
    s.manifest.set("ls_tol", ls_tol);
    s.manifest.set("repeat", repeat);
    s.manifest.set(
        "variants",
        variants
            .iter()
            .map(|v| v.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    s.manifest.set_opt("alpha", alpha);

    let rule = match stop {
        RaceStop::Rule(r) => r,
        RaceStop::Gap(gap) => {
            let known: Option<f64> = s.cfg.pick(args.lmax, "lmax")?;
            let lmax = match known {
                Some(l) => {
                    s.manifest.set("lmax", l);
                    l
                }
                None => pre_run(&p, &mut s, cap)?.0,
            };
            s.manifest.set("target", lmax - gap);
            StopRule::LoglikTarget(lmax - gap)
        }
    };

    let spec = RaceSpec {
        variants,
        stop: rule,
        settings,
        repeat,
        safety_cap: cap,
        fixed_alpha: alpha,
    };
    let entries = race(p.model.as_ref(), &p.start, &spec);

    let summary = summary_csv(&entries);
    write_file(&s.file("summary.csv"), &summary)?;
    let mut traces = Vec::new();
    for e in &entries {
        match &e.outcome {
            Ok(t) => {
                write_file(&s.file(&format!("trace_{}.csv", e.variant)), &t.to_csv())?;
                let title = format!("{} on {}", e.variant, t.model);
                write_file(
                    &s.file(&format!("plot_{}.svg", e.variant)),
                    &convergence_svg(&title, &[t]),
                )?;
                traces.push(t);
            }
            Err(msg) => log::warn!("{} failed: {msg}", e.variant),
        }
    }
    if !traces.is_empty() {
        let title = format!("log-likelihood increase, {}", p.model.name());
        write_file(
            &s.file("convergence.svg"),
            &convergence_svg(&title, &traces),
        )?;
    }
    let failed = entries.len() - traces.len();
    s.manifest.set("failed_variants", failed);
    s.finish()?;
    print!("{summary}");
    if traces.is_empty() {
        return Err(Failure::Numerical(anyhow!("every variant failed")));
    }
    Ok(())
}

pub fn spectral_cmd(args: &SpectralArgs) -> Result<(), Failure> {
    let mut s = Session::open("spectral", &args.common)?;
    let p = load_problem(&args.model, &s.cfg, &mut s.manifest)?;
    let h: f64 = s.cfg.pick_or(args.hstep, "hstep", DEFAULT_STEP)?;
    require_positive(h, "--hstep")?;
    let ecme = s.cfg.flag(args.ecme, "ecme")?;
    s.manifest.set("hstep", h);
    s.manifest.set("map", if ecme { "ecme" } else { "em" });

    let theta_raw: Option<String> = s.cfg.pick(args.theta.clone(), "theta")?;
    let theta = match (theta_raw, &p.surrogate) {
        (Some(raw), _) => parse_theta(&raw, p.model.dim(), "--theta")?,
        (None, Some(q)) => q.theta_hat().clone(),
        (None, None) => {
            let cap = safety_cap(&s, args.model.safety_cap)?;
            pre_run(&p, &mut s, cap)?.1
        }
    };
    s.manifest.set("theta_star", join(theta.iter()));

    let est = if ecme {
        estimate_dm_ecme(p.model.as_ref(), &theta, h)
    } else {
        estimate_dm(p.model.as_ref(), &theta, h)
    }
    .map_err(core_failure)?;
    let report = match &p.surrogate {
        Some(q) => dm_eigen_report_with_icom(&est.dm, q.i_com()),
        None => dm_eigen_report(&est.dm),
    }
    .map_err(core_failure)?;

    s.manifest.set("step_used", est.step);
    s.manifest.set(
        "one_sided",
        est.one_sided
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    s.manifest
        .set("fixed_point_residual", est.fixed_point_residual);
    s.manifest.set("max_imag", report.max_imag);
    s.manifest.set("complex_eigenvalues", report.has_complex());
    s.manifest.set("spectral_radius", report.spectral_radius());
    if let (Some(q), false) = (&p.surrogate, ecme) {
        let exact = q.spectral().map_err(core_failure)?.dm_eigenvalues();
        let err = exact
            .iter()
            .zip(&report.eigenvalues)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        s.manifest.set("analytic_max_abs_error", err);
    }
    if report.has_complex() {
        log::warn!(
            "rate matrix has complex eigenvalues (max imaginary part {:e})",
            report.max_imag
        );
    }
    write_file(&s.file("eigenvalues.csv"), &report.eigenvalues_csv())?;
    write_file(&s.file("eigenvectors.txt"), &report.eigenvectors_text())?;
    write_file(&s.file("dm.txt"), &matrix_text(&est.dm))?;
    s.finish()?;
    print!("{}", report.eigenvalues_csv());
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mut s = Session::open("verify", &args.common)?;
    let trials: Option<usize> = s.cfg.pick(args.trials, "trials")?;
    let p: Option<usize> = s.cfg.pick(args.p, "p")?;
    if trials == Some(0) {
        return Err(Failure::Usage(anyhow!("--trials must be at least 1")));
    }
    if matches!(p, Some(d) if d < 2) {
        return Err(Failure::Usage(anyhow!("--p must be at least 2")));
    }
    s.manifest.set_opt("trials", trials);
    s.manifest.set_opt("p", p);
    let reports = run_suite(&SuiteConfig {
        seed: s.seed,
        trials,
        p,
    })
    .map_err(core_failure)?;

    let mut csv = String::from("check,status,measured,bound,margin,samples,max_loglik_drop,secs\n");
    let mut failed = Vec::new();
    for r in &reports {
        println!("{r}");
        let status = if !r.passed() {
            "fail"
        } else if r.margin().is_nan() {
            "info"
        } else {
            "pass"
        };
        csv.push_str(&format!(
            "{},{status},{:e},{:e},{:e},{},{:e},{:.4}\n",
            r.name,
            r.measured,
            r.bound,
            r.margin(),
            r.samples,
            r.max_loglik_drop,
            r.elapsed_secs
        ));
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    write_file(&s.file("verify.csv"), &csv)?;
    s.manifest.set("checks", reports.len());
    s.manifest.set("failed", failed.join(","));
    s.finish()?;
    if failed.is_empty() {
        println!("all {} checks passed", reports.len());
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            reports.len(),
            failed.join(", ")
        )))
    }
}
