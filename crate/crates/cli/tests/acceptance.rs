//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness; exits nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use otmap::experiments::{self, lecam_distance, EpsRule, ExperimentKind, ExperimentSpec, RateReport};
use otmap::measures::{sample_uniform_box_with, DiscreteMeasure, PointCloud};
use otmap::onenn::solve_assignment;
use otmap::semidual::{
    solve_population, to_half_sqdist_target_potential, PotentialVector, SemiDualProblem, SourceMeasure,
};
use otmap::sinkhorn::{self, SinkhornOptions};
use otmap::verify::{self, two_atom_problem, Tolerances};
use otmap::RandomSource;
use rand::Rng;

type Outcome = Result<(bool, String), String>;
type Check<'a> = &'a dyn Fn(&mut Option<RateReport>) -> Outcome;

fn main() -> ExitCode {
    let mut slab: Option<RateReport> = None;
    let mut failed = 0;
    let criteria: [(&str, Check); 10] = [
        ("1 slab rate", &|s| slab_rate(slab_run(s)?)),
        ("2 1nn suboptimality", &|s| onenn_gap(slab_run(s)?)),
        ("3 high-dimension rate", &|_| high_dimension()),
        ("4 le cam distance", &|_| lecam()),
        ("5 chi2 identity", &|_| suite("chi2")),
        ("6 two-atom closed form", &|_| two_atom()),
        ("7 stability inequality", &|_| suite("stability")),
        ("8 oracle equivalences", &|_| oracles()),
        ("9 rounding bound", &|s| rounding(slab_run(s)?)),
        ("10 determinism", &|_| determinism()),
    ];
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = check(&mut slab).unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!("{} criterion {name}: {detail} ({:.1?})", if ok { "PASS" } else { "FAIL" }, start.elapsed());
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn slab_run(cache: &mut Option<RateReport>) -> Result<&RateReport, String> {
    if cache.is_none() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::Slab,
            d: 10,
            j: 2,
            n_grid: vec![256, 512, 1024, 2048, 4096],
            trials: 10,
            eps_rule: EpsRule::Scaled(1.0),
            ..ExperimentSpec::default()
        };
        *cache = Some(experiments::run(&spec).map_err(err)?);
    }
    let report = cache.as_ref().unwrap();
    if !report.failures.is_empty() {
        return Err(format!("{} cells failed", report.failures.len()));
    }
    Ok(report)
}

fn slope(report: &RateReport, est: &str) -> Result<f64, String> {
    report.estimator(est).and_then(|e| e.fit).map(|f| f.slope).ok_or_else(|| format!("no fit for {est}"))
}

fn means(report: &RateReport, est: &str) -> Result<Vec<f64>, String> {
    report
        .estimator(est)
        .map(|e| e.rows.iter().map(|r| r.mse_mean).collect())
        .ok_or_else(|| format!("no rows for {est}"))
}

fn slab_rate(report: &RateReport) -> Outcome {
    let s = slope(report, experiments::ENTROPIC)?;
    Ok(((-0.65..=-0.35).contains(&s), format!("entropic slope {s:+.4} in [-0.65, -0.35]")))
}

fn onenn_gap(report: &RateReport) -> Outcome {
    let (se, sn) = (slope(report, experiments::ENTROPIC)?, slope(report, experiments::ONE_NN)?);
    let (me, mn) = (means(report, experiments::ENTROPIC)?, means(report, experiments::ONE_NN)?);
    let (le, ln) = (*me.last().unwrap(), *mn.last().unwrap());
    Ok((
        sn - se >= 0.15 && ln > le,
        format!(
            "1nn slope {sn:+.4} vs entropic {se:+.4} (gap {:.4}); mse at n=4096 1nn {ln:.3e} vs entropic {le:.3e}",
            sn - se
        ),
    ))
}

fn high_dimension() -> Outcome {
    let spec = ExperimentSpec {
        kind: ExperimentKind::Slab,
        d: 50,
        j: 10,
        n_grid: vec![256, 512, 1024, 2048],
        trials: 10,
        eps_rule: EpsRule::Scaled(1.0),
        ..ExperimentSpec::default()
    };
    let report = experiments::run(&spec).map_err(err)?;
    if !report.failures.is_empty() {
        return Err(format!("{} cells failed", report.failures.len()));
    }
    let s = slope(&report, experiments::ENTROPIC)?;
    let (me, mn) = (means(&report, experiments::ENTROPIC)?, means(&report, experiments::ONE_NN)?);
    let ratios: Vec<f64> = mn.iter().zip(&me).map(|(a, b)| a / b).collect();
    let ahead = mn.iter().zip(&me).all(|(a, b)| a > b);
    let growing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.1}")).collect();
    Ok((
        (-0.70..=-0.30).contains(&s) && ahead && growing,
        format!("entropic slope {s:+.4} in [-0.70, -0.30]; 1nn/entropic mse ratios {}", shown.join(", ")),
    ))
}

fn lecam() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, r) in [0.02, 0.05, 0.1].into_iter().enumerate() {
        let est = lecam_distance(10, r, 50_000, &RandomSource::new(2024, k as u64)).map_err(err)?;
        let z = (est.mean - r) / est.std_error;
        ok &= z.abs() <= 3.0;
        parts.push(format!("r={r}: {:.5} ({z:+.2} se)", est.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn suite(name: &str) -> Outcome {
    let results = verify::run_suite(name, &Tolerances::default()).map_err(err)?;
    let ok = results.iter().all(|c| c.passed);
    let details: Vec<String> = results.iter().map(|c| c.detail.clone()).collect();
    Ok((ok, details.join("; ")))
}

fn two_atom() -> Outcome {
    let eps = 0.1;
    let prob = two_atom_problem(eps, 4096).map_err(err)?;
    let psi = solve_population(&prob, 1e-13, 100_000).map_err(err)?;
    let map = |x: f64| prob.map_at(&psi, &[x]).map(|v| v[0]).map_err(err);
    let (mut max_err, mut odd, mut monotone, mut prev) = (0.0f64, true, true, f64::NEG_INFINITY);
    for k in 0..100 {
        let x = -1.0 + (2.0 * k as f64 + 1.0) / 100.0;
        let t = map(x)?;
        // Two-term softmax between −1 and +1 with equal potentials.
        let closed = 1.0 - 2.0 * common::logistic(-2.0 * x / eps);
        max_err = max_err.max((t - closed).abs());
        odd &= (map(-x)? + t).abs() <= 1e-12;
        monotone &= t >= prev;
        prev = t;
    }

    // Limit constant ∫₀^∞ (1 − tanh u)² du by quadrature of the closed form.
    let h = 1e-4;
    let constant: f64 = (0..400_000).map(|k| (1.0 - ((k as f64 + 0.5) * h).tanh()).powi(2) * h).sum();
    let mut ratios = Vec::new();
    for e in [1e-1, 1e-2, 1e-3] {
        ratios.push(verify::approximation_ratio(e).map_err(err)?);
    }
    let rel = (ratios[2] - constant).abs() / constant;
    Ok((
        max_err <= 1e-12 && odd && monotone && rel <= 0.03,
        format!(
            "max closed-form error {max_err:.2e}, odd {odd}, monotone {monotone}; ratios {:.5} {:.5} {:.5} vs constant {constant:.5} (rel {rel:.1e})",
            ratios[0], ratios[1], ratios[2]
        ),
    ))
}

fn line(points: &[f64], w: &[f64]) -> Result<DiscreteMeasure, String> {
    DiscreteMeasure::new(PointCloud::from_flat(points.len(), 1, points.to_vec()).map_err(err)?, w.to_vec()).map_err(err)
}

fn oracles() -> Outcome {
    let tight = SinkhornOptions { tol: 1e-14, max_iter: 1_000_000, record_trace: false };

    let mu = line(&[0.0, 1.0], &[0.3, 0.7])?;
    let nu = line(&[0.0, 1.0], &[0.6, 0.4])?;
    let reference = common::naive_sinkhorn(&[0.3, 0.7], &[0.6, 0.4], &[0.0, 0.5, 0.5, 0.0], 0.5, 1e-14);
    let (pot, _) = sinkhorn::solve(&mu, &nu, 0.5, &tight).map_err(err)?;
    let plan_gap = sinkhorn::plan(&pot, &mu, &nu).iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let mut rng = RandomSource::new(2024, 10).rng();
    let mut assign_gap = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let xs = sample_uniform_box_with(0.0, 1.0, n, 2, &mut rng).map_err(err)?;
        let ys = sample_uniform_box_with(0.0, 1.0, n, 2, &mut rng).map_err(err)?;
        let cost: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| common::half_sq_dist(xs.point(i), ys.point(j))).collect()).collect();
        let plan = solve_assignment(&xs, &ys).map_err(err)?;
        assign_gap = assign_gap.max((plan.objective - common::brute_force_matching(&cost)).abs());
    }

    let source = SourceMeasure::tensor_midpoint_2d(0.0, 1.0, 64, |x, y| 1.0 + x * y).map_err(err)?;
    let targets = sample_uniform_box_with(0.0, 1.0, 5, 2, &mut rng).map_err(err)?;
    let prob = SemiDualProblem::new(targets, vec![0.1, 0.15, 0.2, 0.25, 0.3], source, 0.1).map_err(err)?;
    let psi: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let g = prob.gradient(&PotentialVector::shifted(psi.clone())).map_err(err)?;
    let fd = common::central_differences(
        |p| prob.value(&PotentialVector::shifted(p.to_vec())).unwrap_or(f64::NAN),
        &psi,
        1e-5,
    );
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grad_rel = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;

    let mu = DiscreteMeasure::empirical(sample_uniform_box_with(0.0, 1.0, 50, 2, &mut rng).map_err(err)?);
    let nu = DiscreteMeasure::new(sample_uniform_box_with(0.0, 1.0, 3, 2, &mut rng).map_err(err)?, vec![0.2, 0.3, 0.5])
        .map_err(err)?;
    let (pot, _) = sinkhorn::solve(&mu, &nu, 0.1, &tight).map_err(err)?;
    let prob =
        SemiDualProblem::from_target_measure(&nu, SourceMeasure::from_measure(&mu).map_err(err)?, 0.1).map_err(err)?;
    let sol = solve_population(&prob, 1e-13, 1_000_000).map_err(err)?;
    let gd = to_half_sqdist_target_potential(&prob, &sol).map_err(err)?;
    let cross_gap = gd.iter().zip(&pot.g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    Ok((
        plan_gap <= 1e-10 && assign_gap <= 1e-12 && grad_rel <= 1e-6 && cross_gap <= 1e-6,
        format!(
            "2x2 plan gap {plan_gap:.1e}; assignment gap {assign_gap:.1e} over 100; gradient rel {grad_rel:.1e}; semidual vs sinkhorn {cross_gap:.1e}"
        ),
    ))
}

fn rounding(report: &RateReport) -> Outcome {
    let mut unrounded = BTreeMap::new();
    for r in report.records.iter().filter(|r| r.estimator == experiments::ENTROPIC) {
        unrounded.insert((r.n, r.trial), r.mse);
    }
    let mut cells = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in report.records.iter().filter(|r| r.estimator == experiments::ENTROPIC_ROUNDED) {
        let base = unrounded.get(&(r.n, r.trial)).ok_or("missing entropic record")?;
        worst = worst.max(r.mse - (2.0 * base + 3.0 * r.mse_se));
        cells += 1;
    }
    Ok((cells > 0 && worst <= 0.0, format!("{cells} cells, max(rounded - 2*unrounded - 3se) = {worst:.3e}")))
}

fn otmap(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_otmap")).args(args).output().map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "otmap {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let entry = entry.map_err(err)?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).map_err(err)?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    fs::write(root.join("mu.csv"), "w,x1,x2\n0.2,0,0\n0.3,1,0\n0.5,0.5,1\n").map_err(err)?;
    fs::write(root.join("nu.csv"), "w,x1,x2\n0.4,0.2,0.1\n0.6,0.9,0.8\n").map_err(err)?;
    let (mu, nu) = (root.join("mu.csv"), root.join("nu.csv"));
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for label in ["sinkhorn", "experiment"] {
        let mut runs = Vec::new();
        for run in 0..2 {
            let dir = root.join(format!("{label}-{run}"));
            let dir_s = dir.to_string_lossy().into_owned();
            let stdout = match label {
                "sinkhorn" => otmap(&[
                    "sinkhorn",
                    "--source",
                    &mu.to_string_lossy(),
                    "--target",
                    &nu.to_string_lossy(),
                    "--eps",
                    "0.1",
                    "--out-dir",
                    &dir_s,
                    "--trace",
                ])?,
                _ => otmap(&[
                    "experiment",
                    "--kind",
                    "lecam",
                    "--d",
                    "3",
                    "--n-grid",
                    "64,128",
                    "--trials",
                    "2",
                    "--mc-points",
                    "2000",
                    "--seed",
                    "7",
                    "--out-dir",
                    &dir_s,
                ])?,
            };
            let mut files = snapshot(&dir)?;
            files.insert("<stdout>".into(), stdout);
            runs.push(files);
        }
        compared += runs[0].len();
        if runs[0] != runs[1] {
            mismatches.push(label);
        }
    }
    let a = otmap(&["verify", "--suite", "tanh"])?;
    let b = otmap(&["verify", "--suite", "tanh"])?;
    compared += 1;
    if a != b {
        mismatches.push("verify");
    }
    Ok((mismatches.is_empty(), format!("{compared} outputs compared, mismatches: {mismatches:?}")))
}
