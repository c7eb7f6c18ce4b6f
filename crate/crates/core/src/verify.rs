//! Runtime verification suites: closed-form oracles and numerical invariants
//! that can be re-checked on any build from the command line.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::experiments::lecam_distance;
use crate::maps::fit_entropic;
use crate::measures::{chi2, kl, sample_uniform_box_with, DiscreteMeasure, PointCloud};
use crate::numeric::{sq_dist, sum_compensated};
use crate::onenn::solve_assignment;
use crate::random::RandomSource;
use crate::semidual::{
    solve_population, to_half_sqdist_target_potential, PotentialVector, SemiDualProblem, SourceMeasure,
};
use crate::sinkhorn::{self, SinkhornOptions};

pub const SUITES: [&str; 9] =
    ["chi2", "stability", "gradient", "tanh", "approx-law", "lecam", "sinkhorn", "assignment", "cross-solver"];

const SEED: u64 = 20_240_601;

/// Named tolerances; every key has a default and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        let pairs = [
            ("chi2.std-errors", 3.0),
            ("stability.slack", 1e-8),
            ("gradient.relative", 1e-6),
            ("tanh.absolute", 1e-12),
            ("approx-law.relative", 0.03),
            ("lecam.std-errors", 3.0),
            ("sinkhorn.marginal", 1e-9),
            ("assignment.absolute", 1e-12),
            ("cross-solver.absolute", 1e-6),
        ];
        Self(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match self.0.get_mut(key) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(invalid(format!("unknown tolerance `{key}`"))),
        }
    }

    /// Applies overrides from a flat JSON object.
    pub fn with_json_overrides(mut self, text: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
        for (k, v) in map {
            self.set(&k, v)?;
        }
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(suite: &'static str, name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { suite, name: name.into(), passed, detail }
    }
}

/// Runs one suite, or all of them when `suite` is `None`.
pub fn run(suite: Option<&str>, tol: &Tolerances) -> Result<Vec<CheckResult>> {
    match suite {
        Some(name) => run_suite(name, tol),
        None => {
            let mut out = Vec::new();
            for name in SUITES {
                out.extend(run_suite(name, tol)?);
            }
            Ok(out)
        }
    }
}

pub fn run_suite(name: &str, tol: &Tolerances) -> Result<Vec<CheckResult>> {
    match name {
        "chi2" => chi2_expectation(tol),
        "stability" => stability(tol),
        "gradient" => gradient(tol),
        "tanh" => tanh_map(tol),
        "approx-law" => approximation_law(tol),
        "lecam" => lecam(tol),
        "sinkhorn" => sinkhorn_marginals(tol),
        "assignment" => assignment(tol),
        "cross-solver" => cross_solver(tol),
        _ => Err(invalid(format!("unknown suite `{name}`; expected one of {}", SUITES.join(", ")))),
    }
}

/// Empirical `χ²(Q_n, Q)` for one draw of `n` samples from uniform `Q` on `J` atoms.
pub fn empirical_chi2<R: Rng>(j: usize, n: usize, q: &DiscreteMeasure, rng: &mut R) -> Result<f64> {
    let pick = Uniform::new(0, j);
    let mut counts = vec![0usize; j];
    for _ in 0..n {
        counts[pick.sample(rng)] += 1;
    }
    let w: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    chi2(&DiscreteMeasure::new(q.atoms().clone(), w)?, q)
}

fn chi2_expectation(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let k = tol.get("chi2.std-errors");
    let reps = 10_000;
    let mut out = Vec::new();
    for (idx, &(j, n)) in [(2usize, 50usize), (5, 200), (10, 1000)].iter().enumerate() {
        let atoms = PointCloud::from_flat(j, 1, (0..j).map(|v| v as f64).collect())?;
        let q = DiscreteMeasure::new(atoms, vec![1.0 / j as f64; j])?;
        let mut rng = RandomSource::new(SEED, idx as u64).rng();
        let vals = (0..reps).map(|_| empirical_chi2(j, n, &q, &mut rng)).collect::<Result<Vec<_>>>()?;
        let (mean, se) = mean_se(&vals);
        let target = (j as f64 - 1.0) / n as f64;
        out.push(CheckResult::new(
            "chi2",
            format!("E chi2(Q_n,Q) = (J-1)/n at J={j}, n={n}"),
            (mean - target).abs() <= k * se,
            format!("mean {mean:.6e}, expected {target:.6e}, se {se:.2e}"),
        ));
    }
    Ok(out)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = sum_compensated(v.iter().copied()) / m;
    let var = sum_compensated(v.iter().map(|x| (x - mean) * (x - mean))) / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Both sides of the entropic-map stability bound for measures that share
/// supports: returns `(lhs, rhs)`.
pub fn stability_sides(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
    epsilon: f64,
) -> Result<(f64, f64)> {
    let opts = SinkhornOptions { tol: 1e-13, max_iter: 1_000_000, record_trace: false };
    let (t, _) = fit_entropic(mu, nu, epsilon, &opts)?;
    let (t2, _) = fit_entropic(mu2, nu2, epsilon, &opts)?;
    let radius = [mu, nu, mu2, nu2].iter().map(|m| m.atoms().max_norm()).fold(0.0, f64::max);
    let xs = mu.atoms();
    let mse = sum_compensated(xs.iter().zip(mu.weights()).map(|(x, w)| w * sq_dist(&t.eval(x), &t2.eval(x))));
    let lhs = epsilon / (8.0 * radius * radius) * mse;
    let dphi =
        sum_compensated(xs.iter().zip(mu.weights()).map(|(x, w)| w * (t2.source_potential(x) - t.source_potential(x))));
    let dpsi = sum_compensated(nu.weights().iter().zip(t2.psi().iter().zip(t.psi())).map(|(w, (a, b))| w * (a - b)));
    let rhs = dphi + dpsi + epsilon * kl(nu, nu2)?;
    Ok((lhs, rhs))
}

fn stability(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let slack = tol.get("stability.slack");
    let mut out = Vec::new();
    for (e_idx, &eps) in [0.05, 0.2, 1.0].iter().enumerate() {
        let mut rng = RandomSource::new(SEED, 100 + e_idx as u64).rng();
        let mut worst = f64::NEG_INFINITY;
        let instances = 50;
        for _ in 0..instances {
            let (n, m, d) = (rng.gen_range(2..7), rng.gen_range(2..6), rng.gen_range(1..4));
            let xs = sample_uniform_box_with(-1.0, 1.0, n, d, &mut rng)?;
            let ys = sample_uniform_box_with(-1.0, 1.0, m, d, &mut rng)?;
            let mu = DiscreteMeasure::new(xs.clone(), random_simplex(n, &mut rng))?;
            let mu2 = DiscreteMeasure::new(xs, random_simplex(n, &mut rng))?;
            let nu = DiscreteMeasure::new(ys.clone(), random_simplex(m, &mut rng))?;
            let nu2 = DiscreteMeasure::new(ys, random_simplex(m, &mut rng))?;
            let (lhs, rhs) = stability_sides(&mu, &nu, &mu2, &nu2, eps)?;
            worst = worst.max(lhs - rhs);
        }
        out.push(CheckResult::new(
            "stability",
            format!("stability bound on {instances} instances at eps={eps}"),
            worst <= slack,
            format!("max(lhs - rhs) = {worst:.3e}"),
        ));
    }
    Ok(out)
}

fn gradient(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let rel = tol.get("gradient.relative");
    let mut rng = RandomSource::new(SEED, 200).rng();
    let source = SourceMeasure::tensor_midpoint_2d(0.0, 1.0, 64, |x, y| 1.0 + x * y)?;
    let targets = sample_uniform_box_with(0.0, 1.0, 5, 2, &mut rng)?;
    let prob = SemiDualProblem::new(targets, random_simplex(5, &mut rng), source, 0.1)?;
    let psi: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let g = prob.gradient(&PotentialVector::shifted(psi.clone()))?;
    let h = 1e-5;
    let mut err: f64 = 0.0;
    for j in 0..psi.len() {
        let mut up = psi.clone();
        let mut dn = psi.clone();
        up[j] += h;
        dn[j] -= h;
        let fd = (prob.value(&PotentialVector::shifted(up))? - prob.value(&PotentialVector::shifted(dn))?) / (2.0 * h);
        err = err.max((fd - g[j]).abs());
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = err / scale;
    Ok(vec![CheckResult::new(
        "gradient",
        "semi-dual gradient against central differences",
        r <= rel,
        format!("relative error {r:.3e}"),
    )])
}

/// Two-atom problem `P = Unif[−1,1]`, `Q = ½δ₋₁ + ½δ₊₁` on a midpoint grid.
pub fn two_atom_problem(epsilon: f64, nodes: usize) -> Result<SemiDualProblem> {
    let source = SourceMeasure::midpoint_1d(-1.0, 1.0, nodes, |_| 1.0)?;
    SemiDualProblem::new(PointCloud::from_flat(2, 1, vec![-1.0, 1.0])?, vec![0.5, 0.5], source, epsilon)
}

fn tanh_map(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let abs = tol.get("tanh.absolute");
    let mut out = Vec::new();
    for eps in [0.5, 0.1] {
        let prob = two_atom_problem(eps, 4096)?;
        let psi = solve_population(&prob, 1e-13, 100_000)?;
        let u = psi.to_unshifted(&[0.5, 0.5], eps);
        let mut err: f64 = 0.0;
        let mut odd = true;
        let mut monotone = true;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let x = -1.0 + (2.0 * k as f64 + 1.0) / 100.0;
            let t = prob.map_at(&psi, &[x])?[0];
            // Softmax over logits (±x − ψ_∓) / ε with unshifted ψ.
            let a = (-x - u.values[0]) / eps;
            let b = (x - u.values[1]) / eps;
            let m = a.max(b);
            let closed = ((b - m).exp() - (a - m).exp()) / ((b - m).exp() + (a - m).exp());
            err = err.max((t - closed).abs()).max((t - (x / eps).tanh()).abs());
            odd &= (prob.map_at(&psi, &[-x])?[0] + t).abs() <= abs;
            monotone &= t >= prev;
            prev = t;
        }
        out.push(CheckResult::new(
            "tanh",
            format!("two-atom map is tanh(x/eps), odd and monotone at eps={eps}"),
            err <= abs && odd && monotone,
            format!("max error {err:.3e}, odd {odd}, monotone {monotone}"),
        ));
    }
    Ok(out)
}

/// `ln 4 − 1`: the limit of `‖T_ε − T₀‖²_{L²(P)} / ε` on the two-atom
/// problem, where `T_ε(x) = tanh(x/ε)` and `p(0) = ½`.
pub fn approximation_constant() -> f64 {
    4f64.ln() - 1.0
}

/// `‖T_ε − T₀‖²_{L²(P)} / ε` on the two-atom problem, by quadrature of the
/// population semi-dual solution.
pub fn approximation_ratio(epsilon: f64) -> Result<f64> {
    let nodes = ((200.0 / epsilon).ceil() as usize).max(4096);
    let prob = two_atom_problem(epsilon, nodes)?;
    let psi = solve_population(&prob, 1e-12, 100_000)?;
    let src = SourceMeasure::midpoint_1d(-1.0, 1.0, nodes, |_| 1.0)?;
    let err = sum_compensated(src.nodes().iter().zip(src.weights()).map(|(x, w)| {
        let t = prob.map_at(&psi, x).expect("shifted potential")[0];
        w * (t - x[0].signum()).powi(2)
    }));
    Ok(err / epsilon)
}

fn approximation_law(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let rel = tol.get("approx-law.relative");
    let c = approximation_constant();
    let ratios = [1e-1, 1e-2, 1e-3].iter().map(|&e| approximation_ratio(e)).collect::<Result<Vec<_>>>()?;
    let last = (ratios[2] - c).abs() / c;
    Ok(vec![CheckResult::new(
        "approx-law",
        "||T_eps - T_0||^2 / eps tends to ln 4 - 1",
        last <= rel,
        format!("ratios {:.6} {:.6} {:.6}, constant {c:.6}", ratios[0], ratios[1], ratios[2]),
    )])
}

fn lecam(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let k = tol.get("lecam.std-errors");
    let mut out = Vec::new();
    for (idx, r) in [0.02, 0.05, 0.1].into_iter().enumerate() {
        let est = lecam_distance(3, r, 50_000, &RandomSource::new(SEED, 300 + idx as u64))?;
        out.push(CheckResult::new(
            "lecam",
            format!("map distance equals r={r}"),
            (est.mean - r).abs() <= k * est.std_error,
            format!("mse {:.6e}, se {:.2e}", est.mean, est.std_error),
        ));
    }
    Ok(out)
}

fn sinkhorn_marginals(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let t = tol.get("sinkhorn.marginal");
    let mut rng = RandomSource::new(SEED, 400).rng();
    let mut worst: f64 = 0.0;
    let instances = 20;
    for _ in 0..instances {
        let (n, m) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let mu =
            DiscreteMeasure::new(sample_uniform_box_with(-1.0, 1.0, n, 2, &mut rng)?, random_simplex(n, &mut rng))?;
        let nu =
            DiscreteMeasure::new(sample_uniform_box_with(-1.0, 1.0, m, 2, &mut rng)?, random_simplex(m, &mut rng))?;
        let eps = rng.gen_range(0.05..1.0);
        let opts = SinkhornOptions { tol: 1e-12, max_iter: 1_000_000, record_trace: false };
        let (pot, _) = sinkhorn::solve(&mu, &nu, eps, &opts)?;
        let (rows, cols) = sinkhorn::marginals(&pot, &mu, &nu);
        for (a, b) in rows.iter().zip(mu.weights()).chain(cols.iter().zip(nu.weights())) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(vec![CheckResult::new(
        "sinkhorn",
        format!("plan marginals on {instances} random instances"),
        worst <= t,
        format!("max marginal error {worst:.3e}"),
    )])
}

fn brute_force_assignment(xs: &PointCloud, ys: &PointCloud) -> f64 {
    fn rec(i: usize, used: &mut [bool], xs: &PointCloud, ys: &PointCloud, acc: f64, best: &mut f64) {
        if i == xs.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..ys.len() {
            if !used[j] {
                used[j] = true;
                rec(i + 1, used, xs, ys, acc + 0.5 * sq_dist(xs.point(i), ys.point(j)), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut vec![false; ys.len()], xs, ys, 0.0, &mut best);
    best
}

fn assignment(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let t = tol.get("assignment.absolute");
    let mut rng = RandomSource::new(SEED, 500).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..9);
        let xs = sample_uniform_box_with(0.0, 1.0, n, 2, &mut rng)?;
        let ys = sample_uniform_box_with(0.0, 1.0, n, 2, &mut rng)?;
        let plan = solve_assignment(&xs, &ys)?;
        worst = worst.max((plan.objective - brute_force_assignment(&xs, &ys)).abs());
    }
    Ok(vec![CheckResult::new(
        "assignment",
        "assignment matches exhaustive search on 100 instances",
        worst <= t,
        format!("max objective gap {worst:.3e}"),
    )])
}

fn cross_solver(tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let t = tol.get("cross-solver.absolute");
    let mut rng = RandomSource::new(SEED, 600).rng();
    let mu = DiscreteMeasure::empirical(sample_uniform_box_with(0.0, 1.0, 50, 2, &mut rng)?);
    let nu = DiscreteMeasure::new(sample_uniform_box_with(0.0, 1.0, 3, 2, &mut rng)?, random_simplex(3, &mut rng))?;
    let eps = 0.1;
    let opts = SinkhornOptions { tol: 1e-13, max_iter: 1_000_000, record_trace: false };
    let (pot, _) = sinkhorn::solve(&mu, &nu, eps, &opts)?;
    let prob = SemiDualProblem::from_target_measure(&nu, SourceMeasure::from_measure(&mu)?, eps)?;
    let psi = solve_population(&prob, 1e-13, 1_000_000)?;
    let g = to_half_sqdist_target_potential(&prob, &psi)?;
    let err = g.iter().zip(&pot.g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(vec![CheckResult::new(
        "cross-solver",
        "semi-dual and Sinkhorn target potentials agree",
        err <= t,
        format!("max gap {err:.3e}"),
    )])
}
