//! Acceptance suite: one PASS/FAIL line per criterion, details indented
//! below it. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use decme::checks::{
    check_conjugate_termination, check_dm_probe, check_ecme_pattern, check_sor_alpha,
    check_sor_two_dim, CheckReport, MONOTONE_SLACK,
};
use decme::em::{run, AcceleratorConfig, RunTrace, StopRule, Variant};
use decme::line_search::LineSearchSettings;
use decme::models::gmm::gmm_replicate;
use decme::models::mvt::mvt_sample;
use decme::models::{BivariateT, GaussianMixture, GmmParams, MvtParams};
use decme::protocol::{compute_lmax, race, RaceSpec, RACE_GAP};
use decme::rng::stream_rng;

const SURROGATE_SEED: u64 = 20_090_101;
const GMM_SEED: u64 = 42;
const GMM_SEPARATIONS: [f64; 5] = [6.0, 4.0, 3.0, 2.0, 1.5];
const GMM_REPLICATES: u64 = 10;
const GMM_N: usize = 1000;
const MVT_SEEDS: std::ops::Range<u64> = 0..6;

struct Criterion {
    id: u32,
    title: &'static str,
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Criterion {
    fn print(&self) {
        let status = if self.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {}: {} | {}",
            self.id, self.title, self.summary
        );
        for d in &self.details {
            println!("    {d}");
        }
    }
}

/// Drop tracking for the monotonicity sweep.
#[derive(Default)]
struct Drops {
    worst: f64,
    source: String,
}

impl Drops {
    fn note(&mut self, drop: f64, source: &str) {
        if drop > self.worst {
            self.worst = drop;
            self.source = source.to_string();
        }
    }

    fn reports(&mut self, reports: &[CheckReport]) {
        for r in reports {
            self.note(r.max_loglik_drop, &r.name);
        }
    }

    fn trace(&mut self, t: &RunTrace) {
        self.note(
            t.max_loglik_drop(),
            &format!("{} on {}", t.variant, t.model),
        );
    }
}

fn from_reports(
    id: u32,
    title: &'static str,
    reports: &[CheckReport],
    secs: f64,
    time_limit: Option<f64>,
) -> Criterion {
    let checks_ok = reports.iter().all(CheckReport::passed);
    let time_ok = time_limit.is_none_or(|lim| secs < lim);
    let mut details: Vec<String> = reports.iter().map(|r| r.to_string()).collect();
    if let Some(lim) = time_limit {
        details.push(format!("runtime {secs:.2}s (limit {lim}s)"));
    }
    let worst = reports
        .iter()
        .filter(|r| r.margin().is_finite())
        .min_by(|a, b| a.margin().total_cmp(&b.margin()));
    let summary = match worst {
        Some(r) => format!(
            "{} checks, tightest {} margin {:.3e}, {secs:.2}s",
            reports.len(),
            r.name,
            r.margin()
        ),
        None => format!("no checks ran, {secs:.2}s"),
    };
    Criterion {
        id,
        title,
        passed: checks_ok && time_ok && !reports.is_empty(),
        summary,
        details,
    }
}

fn only(reports: &[CheckReport], names: &[&str]) -> Vec<CheckReport> {
    let picked: Vec<CheckReport> = reports
        .iter()
        .filter(|r| names.contains(&r.name.as_str()))
        .cloned()
        .collect();
    assert_eq!(picked.len(), names.len(), "missing check among {names:?}");
    picked
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn failed(id: u32, title: &'static str, err: impl std::fmt::Display) -> Criterion {
    Criterion {
        id,
        title,
        passed: false,
        summary: format!("error: {err}"),
        details: Vec::new(),
    }
}

fn alpha_positivity(drops: &mut Drops) -> Criterion {
    let title = "SOR relaxation factor positive and equal to closed form";
    let (res, secs) = timed(|| check_sor_alpha(SURROGATE_SEED, 500, 2..=8, 10));
    match res {
        Ok(r) => {
            drops.reports(&r);
            from_reports(1, title, &r, secs, Some(30.0))
        }
        Err(e) => failed(1, title, e),
    }
}

fn two_dim(drops: &mut Drops) -> Vec<Criterion> {
    let (res, secs) = timed(|| check_sor_two_dim(SURROGATE_SEED, 100, 20));
    let r = match res {
        Ok(r) => r,
        Err(e) => {
            return vec![
                failed(2, "period-two relaxation", &e),
                failed(3, "rate ordering", &e),
                failed(4, "zigzag geometry", &e),
            ]
        }
    };
    drops.reports(&r);
    vec![
        from_reports(
            2,
            "period-two relaxation",
            &only(&r, &["sor2_alpha_period_two"]),
            secs,
            None,
        ),
        from_reports(
            3,
            "rate ordering",
            &only(
                &r,
                &[
                    "sor2_contraction_bound",
                    "sor2_bound_beats_em",
                    "sor2_contraction_formula",
                    "sorf_optimal_beats_em",
                ],
            ),
            secs,
            None,
        ),
        from_reports(
            4,
            "zigzag geometry",
            &only(
                &r,
                &[
                    "zigzag_odd_collinear",
                    "zigzag_even_collinear",
                    "zigzag_lines_meet_at_max",
                    "zigzag_sign_pattern",
                ],
            ),
            secs,
            None,
        ),
    ]
}

fn conjugate(drops: &mut Drops) -> Criterion {
    let title = "DECME_v1 conjugate-direction termination";
    let (res, secs) = timed(|| check_conjugate_termination(SURROGATE_SEED, 50, 2..=10));
    match res {
        Ok(r) => {
            drops.reports(&r);
            from_reports(5, title, &r, secs, Some(60.0))
        }
        Err(e) => failed(5, title, e),
    }
}

fn dm_probe() -> Criterion {
    let title = "DM probe fidelity and ECME pattern";
    let (res, secs) = timed(|| -> decme::Result<Vec<CheckReport>> {
        let mut r = check_dm_probe(SURROGATE_SEED, 100, 2..=8)?;
        r.extend(check_ecme_pattern(SURROGATE_SEED, 20)?);
        Ok(r)
    });
    match res {
        Ok(r) => from_reports(6, title, &r, secs, None),
        Err(e) => failed(6, title, e),
    }
}

fn gmm_speedup(drops: &mut Drops) -> Criterion {
    let title = "GMM design: DECME_v1 speedup over EM";
    let started = Instant::now();
    let variants = [Variant::Em, Variant::Sor, Variant::DecmeV1];
    let spec = RaceSpec {
        variants: variants.to_vec(),
        stop: StopRule::ParamL1(1e-5),
        settings: LineSearchSettings::default(),
        repeat: 1,
        safety_cap: 200_000,
        fixed_alpha: None,
    };
    let mut ok = true;
    let mut details = Vec::new();
    let mut ratios = Vec::new();
    for sep in GMM_SEPARATIONS {
        let truth = GmmParams::design_truth(sep);
        let start = GmmParams::design_start(sep).pack();
        let mut iters: [Vec<f64>; 3] = Default::default();
        for r in 0..GMM_REPLICATES {
            let data = gmm_replicate(GMM_SEED, r, GMM_N, &truth);
            let model = GaussianMixture::new(2, &data);
            for (slot, entry) in race(&model, &start, &spec).into_iter().enumerate() {
                match entry.outcome {
                    Ok(t) => {
                        drops.trace(&t);
                        if t.terminated_by != Some(decme::em::Termination::ParamL1) {
                            ok = false;
                            details.push(format!(
                                "sep {sep} rep {r}: {} stopped by {:?}",
                                t.variant, t.terminated_by
                            ));
                        }
                        iters[slot].push(t.iterations() as f64);
                    }
                    Err(e) => {
                        ok = false;
                        details.push(format!("sep {sep} rep {r}: {} failed: {e}", variants[slot]));
                    }
                }
            }
        }
        let [em, sor, v1] = iters.map(median);
        let ratio = em / v1;
        let need_ratio = sep <= 2.0;
        let sep_ok = v1 <= sor && (!need_ratio || ratio >= 10.0);
        ok &= sep_ok;
        ratios.push(format!("{sep}:{ratio:.1}"));
        details.push(format!(
            "{} sep {sep}: median iterations EM {em}, SOR {sor}, DECME_v1 {v1}; EM/DECME_v1 {ratio:.2}{}",
            if sep_ok { "PASS" } else { "FAIL" },
            if need_ratio { " (need >= 10)" } else { "" }
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    details.push(format!("runtime {secs:.1}s (limit 600s)"));
    Criterion {
        id: 7,
        title,
        passed: ok && secs < 600.0,
        summary: format!("EM/DECME_v1 median ratios {}, {secs:.1}s", ratios.join(" ")),
        details,
    }
}

fn bivariate_t(drops: &mut Drops) -> Criterion {
    let title = "bivariate t: common l_max, DECME_v1 faster than EM";
    let started = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    let start = MvtParams::standard(1.0).pack();
    let mut worst_gap = 0.0f64;
    for seed in MVT_SEEDS {
        let data = mvt_sample(&mut stream_rng(seed, 0), 75, &MvtParams::standard(3.0));
        let model = BivariateT::new(data);
        let lmax = match compute_lmax(&model, &start, 200_000) {
            Ok(r) if r.converged => r.lmax,
            Ok(r) => {
                ok = false;
                details.push(format!(
                    "seed {seed}: l_max pre-run hit the cap at {}",
                    r.lmax
                ));
                continue;
            }
            Err(e) => {
                ok = false;
                details.push(format!("seed {seed}: l_max pre-run failed: {e}"));
                continue;
            }
        };
        // Each variant converges on its own parameter-change rule.
        let mut finals = Vec::new();
        for v in Variant::RACE {
            let cfg = AcceleratorConfig::new(v, StopRule::ParamL1(1e-8));
            match run(&model, &start, &cfg) {
                Ok(t) => {
                    drops.trace(&t);
                    let gap = (t.final_loglik() - lmax).abs();
                    worst_gap = worst_gap.max(gap);
                    ok &= gap < 1e-5;
                    finals.push(format!("{v} {gap:.1e}"));
                }
                Err(e) => {
                    ok = false;
                    finals.push(format!("{v} failed: {e}"));
                }
            }
        }
        // Iterations under the l_max protocol.
        let spec = RaceSpec {
            variants: vec![Variant::Em, Variant::DecmeV1],
            stop: StopRule::LoglikTarget(lmax - RACE_GAP),
            settings: LineSearchSettings::default(),
            repeat: 1,
            safety_cap: 200_000,
            fixed_alpha: None,
        };
        let entries = race(&model, &start, &spec);
        let iters: Vec<Option<usize>> = entries
            .iter()
            .map(|e| {
                e.outcome.as_ref().ok().map(|t| {
                    drops.trace(t);
                    t.iterations()
                })
            })
            .collect();
        match (iters[0], iters[1]) {
            (Some(em), Some(v1)) => {
                ok &= v1 < em;
                details.push(format!(
                    "seed {seed}: l_max {lmax:.6}, |final - l_max| {}; iterations EM {em}, DECME_v1 {v1}",
                    finals.join(", ")
                ));
            }
            _ => {
                ok = false;
                details.push(format!("seed {seed}: race failed"));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Criterion {
        id: 9,
        title,
        passed: ok,
        summary: format!(
            "{} datasets, worst |final - l_max| {worst_gap:.2e}, {secs:.1}s",
            MVT_SEEDS.count()
        ),
        details,
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a name filter that excludes us means skip.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }

    let mut drops = Drops::default();
    let mut results = vec![alpha_positivity(&mut drops)];
    results.extend(two_dim(&mut drops));
    results.push(conjugate(&mut drops));
    results.push(dm_probe());
    results.push(gmm_speedup(&mut drops));
    results.push(Criterion {
        id: 8,
        title: "monotone log-likelihood across criteria 1-7",
        passed: drops.worst <= MONOTONE_SLACK,
        summary: format!(
            "worst decrease {:.2e} (slack {MONOTONE_SLACK:e}){}",
            drops.worst,
            if drops.source.is_empty() {
                String::new()
            } else {
                format!(", at {}", drops.source)
            }
        ),
        details: Vec::new(),
    });
    let mut drops_t = Drops::default();
    let mut c9 = bivariate_t(&mut drops_t);
    if drops_t.worst > MONOTONE_SLACK {
        c9.passed = false;
        c9.details.push(format!(
            "log-likelihood decreased by {:.2e} in {}",
            drops_t.worst, drops_t.source
        ));
    }
    results.push(c9);

    results.sort_by_key(|c| c.id);
    for c in &results {
        c.print();
    }
    let n_fail = results.iter().filter(|c| !c.passed).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - n_fail,
        results.len()
    );
    if n_fail == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
