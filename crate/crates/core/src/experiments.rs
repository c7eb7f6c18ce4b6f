//! Synthetic rate experiments: ground-truth maps, data generation, Monte
//! Carlo error estimates, repeated trials over a sample-size grid and
//! log-log slope fits.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::maps::{fit_entropic, SemiDiscreteMap, TransportMap};
use crate::measures::{fmt_f64, sample_uniform_box_with, DiscreteMeasure, PointCloud};
use crate::numeric::{sq_dist, sq_norm, sum_compensated};
use crate::onenn::fit_onenn;
use crate::random::RandomSource;
use crate::serialize::to_json_string;
use crate::sinkhorn::SinkhornOptions;

/// Stream reserved for drawing the ground truth itself.
pub const GROUND_TRUTH_STREAM: u64 = u64::MAX;
/// Monte Carlo points used to check the cell masses of a random partition.
pub const CELL_CHECK_POINTS: usize = 20_000;
/// Attempts allowed before a random partition is given up on.
pub const CELL_BUDGET: usize = 100;

const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Equal-mass slabs along the first coordinate, `P = Unif([0,1]^d)`.
    Slab,
    /// Random atoms and dual weights, `P = Unif([0,1]^d)`.
    RandomLaguerre,
    /// `x ↦ (2 sign(x₁), x₂, …, x_d)` on `P = Unif([−1,1]^d)`.
    SignSplit,
    /// Two atoms `∓½e₁` on `P = Unif([−½,½]^d)`, masses `(½ − r, ½ + r)`.
    LeCam,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Slab => "slab",
            Self::RandomLaguerre => "random-laguerre",
            Self::SignSplit => "sign-split",
            Self::LeCam => "lecam",
        }
    }

    /// Bounds of the source box `[lo, hi]^d`.
    pub fn source_box(self) -> (f64, f64) {
        match self {
            Self::Slab | Self::RandomLaguerre => (0.0, 1.0),
            Self::SignSplit => (-1.0, 1.0),
            Self::LeCam => (-0.5, 0.5),
        }
    }

    /// Whether the target is finitely supported.
    pub fn is_discrete(self) -> bool {
        !matches!(self, Self::SignSplit)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slab" => Ok(Self::Slab),
            "random-laguerre" => Ok(Self::RandomLaguerre),
            "sign-split" => Ok(Self::SignSplit),
            "lecam" => Ok(Self::LeCam),
            _ => Err(invalid(format!("unknown experiment kind `{s}`"))),
        }
    }
}

/// Regularisation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "c", rename_all = "kebab-case")]
pub enum EpsRule {
    /// `ε = c`.
    Fixed(f64),
    /// `ε = c · n^{−1/2}`.
    Scaled(f64),
}

impl EpsRule {
    pub fn epsilon(self, n: usize) -> f64 {
        match self {
            Self::Fixed(c) => c,
            Self::Scaled(c) => c / (n as f64).sqrt(),
        }
    }

    pub fn constant(self) -> f64 {
        match self {
            Self::Fixed(c) | Self::Scaled(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub d: usize,
    /// Number of target atoms (ignored for sign-split and lecam).
    pub j: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub mc_points: usize,
    pub eps_rule: EpsRule,
    pub seed: u64,
    /// Le Cam perturbation: the target puts mass `½ − r` on `−½e₁`.
    pub r: f64,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Slab,
            d: 10,
            j: 2,
            n_grid: vec![256, 512, 1024, 2048, 4096],
            trials: 10,
            mc_points: 50_000,
            eps_rule: EpsRule::Scaled(1.0),
            seed: 0,
            r: 0.05,
            sinkhorn_tol: 1e-9,
            sinkhorn_max_iter: 100_000,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d must be at least 1"));
        }
        if matches!(self.kind, ExperimentKind::Slab | ExperimentKind::RandomLaguerre) && self.j == 0 {
            return Err(invalid("J must be at least 1"));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(invalid("n-grid must be a nonempty list of positive sizes"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n-grid must be strictly increasing"));
        }
        if self.trials == 0 || self.trials >= 1 << 23 {
            return Err(invalid("trials must be in 1..2^23"));
        }
        if self.mc_points == 0 {
            return Err(invalid("mc-points must be at least 1"));
        }
        let c = self.eps_rule.constant();
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("the ε constant must be positive"));
        }
        if self.kind == ExperimentKind::LeCam && !(self.r >= 0.0 && self.r < 0.5) {
            return Err(invalid("r must lie in [0, 0.5)"));
        }
        if !(self.sinkhorn_tol > 0.0) || self.sinkhorn_max_iter == 0 {
            return Err(invalid("sinkhorn tolerance and budget must be positive"));
        }
        Ok(())
    }

    fn sinkhorn_options(&self) -> SinkhornOptions {
        SinkhornOptions { tol: self.sinkhorn_tol, max_iter: self.sinkhorn_max_iter, record_trace: false }
    }

    fn sampler(&self) -> BoxSampler {
        let (lo, hi) = self.kind.source_box();
        BoxSampler { lo, hi, d: self.d }
    }
}

/// Uniform distribution on `[lo, hi]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSampler {
    pub lo: f64,
    pub hi: f64,
    pub d: usize,
}

impl BoxSampler {
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<PointCloud> {
        sample_uniform_box_with(self.lo, self.hi, n, self.d, rng)
    }
}

/// The map `T₀` of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    SemiDiscrete(SemiDiscreteMap),
    SignSplit { d: usize },
}

impl GroundTruth {
    pub fn as_semi_discrete(&self) -> Option<&SemiDiscreteMap> {
        match self {
            Self::SemiDiscrete(m) => Some(m),
            Self::SignSplit { .. } => None,
        }
    }
}

impl TransportMap for GroundTruth {
    fn output_dim(&self) -> usize {
        match self {
            Self::SemiDiscrete(m) => m.atoms().dim(),
            Self::SignSplit { d } => *d,
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::SemiDiscrete(m) => out.copy_from_slice(m.eval(x).0),
            Self::SignSplit { .. } => {
                out.copy_from_slice(x);
                // sign(0) = 0, a null event under P.
                out[0] = if x[0] > 0.0 {
                    2.0
                } else if x[0] < 0.0 {
                    -2.0
                } else {
                    0.0
                };
            }
        }
    }
}

/// Slab partition: `y_j = ((j − ½)/J, ½, …, ½)` and `ψ₀_j = (j − 1)j/(2J²)`
/// (1-based `j`), so that cell `j` is `(j − 1)/J < x₁ ≤ j/J`.
pub fn slab_map(d: usize, j_atoms: usize) -> Result<SemiDiscreteMap> {
    let jf = j_atoms as f64;
    let mut data = vec![0.5; j_atoms * d];
    let mut psi = Vec::with_capacity(j_atoms);
    for j in 0..j_atoms {
        data[j * d] = (j as f64 + 0.5) / jf;
        psi.push((j * (j + 1)) as f64 / (2.0 * jf * jf));
    }
    SemiDiscreteMap::new(PointCloud::from_flat(j_atoms, d, data)?, psi)
}

/// Two-atom map onto `∓½e₁` splitting `[−½,½]^d` at `x₁ = ν₀ − ½`.
pub fn lecam_map(d: usize, nu0: f64) -> Result<SemiDiscreteMap> {
    if !(0.0..=1.0).contains(&nu0) {
        return Err(invalid("ν₀ must lie in [0, 1]"));
    }
    let mut data = vec![0.0; 2 * d];
    data[0] = -0.5;
    data[d] = 0.5;
    SemiDiscreteMap::new(PointCloud::from_flat(2, d, data)?, vec![0.0, nu0 - 0.5])
}

/// Random atoms in `[0,1]^d` with `ψ₀_j = ½‖y_j‖² + U_j`, `U_j ~ U[0, 1/J]`.
///
/// The quadratic term makes the unperturbed partition the Voronoi diagram
/// of the atoms. A draw is kept once every cell holds Monte Carlo mass at
/// least `1/(4J)`.
pub fn random_laguerre_map(d: usize, j_atoms: usize, source: &RandomSource) -> Result<SemiDiscreteMap> {
    let mut rng = source.rng();
    let jf = j_atoms as f64;
    for _ in 0..CELL_BUDGET {
        let atoms = sample_uniform_box_with(0.0, 1.0, j_atoms, d, &mut rng)?;
        let psi: Vec<f64> = atoms.iter().map(|y| 0.5 * sq_norm(y) + rng.gen::<f64>() / jf).collect();
        let map = SemiDiscreteMap::new(atoms, psi)?;
        let probe = sample_uniform_box_with(0.0, 1.0, CELL_CHECK_POINTS, d, &mut rng)?;
        let mut counts = vec![0usize; j_atoms];
        for x in probe.iter() {
            counts[map.cell(x)] += 1;
        }
        let floor = CELL_CHECK_POINTS as f64 / (4.0 * jf);
        if counts.iter().all(|&c| c as f64 >= floor) {
            return Ok(map);
        }
    }
    Err(Error::CellBudgetExhausted(CELL_BUDGET))
}

pub fn ground_truth(spec: &ExperimentSpec) -> Result<GroundTruth> {
    spec.validate()?;
    Ok(match spec.kind {
        ExperimentKind::Slab => GroundTruth::SemiDiscrete(slab_map(spec.d, spec.j)?),
        ExperimentKind::RandomLaguerre => GroundTruth::SemiDiscrete(random_laguerre_map(
            spec.d,
            spec.j,
            &RandomSource::new(spec.seed, GROUND_TRUTH_STREAM),
        )?),
        ExperimentKind::SignSplit => GroundTruth::SignSplit { d: spec.d },
        ExperimentKind::LeCam => GroundTruth::SemiDiscrete(lecam_map(spec.d, 0.5 - spec.r)?),
    })
}

/// Draws `X ~ P^n` and `Y_i = T₀(X′_i)` from an independent `X′ ~ P^n`.
pub fn generate_data<R: Rng>(
    spec: &ExperimentSpec,
    truth: &GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<(PointCloud, PointCloud)> {
    let sampler = spec.sampler();
    let xs = sampler.sample(n, rng)?;
    let xs_prime = sampler.sample(n, rng)?;
    Ok((xs, apply_batch(truth, &xs_prime)?))
}

/// Applies `map` to every row of `xs`.
pub fn apply_batch(map: &dyn TransportMap, xs: &PointCloud) -> Result<PointCloud> {
    let dim = map.output_dim();
    let mut out = vec![0.0; xs.len() * dim];
    out.par_chunks_mut(MC_CHUNK * dim).enumerate().for_each(|(c, block)| {
        for (k, o) in block.chunks_exact_mut(dim).enumerate() {
            map.apply_into(xs.point(c * MC_CHUNK + k), o);
        }
    });
    PointCloud::from_flat(xs.len(), dim, out)
}

/// Monte Carlo mean of a squared error with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl MseEstimate {
    /// Mean and standard error of the mean of `values`.
    pub fn from_values(values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = sum_compensated(values.iter().copied()) / m;
        let std_error = if values.len() > 1 {
            let ss = sum_compensated(values.iter().map(|v| (v - mean) * (v - mean)));
            (ss / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error }
    }
}

/// Squared distances `‖a(z) − b(z)‖²` at every row of `points`.
pub fn squared_errors(a: &dyn TransportMap, b: &dyn TransportMap, points: &PointCloud) -> Vec<f64> {
    let dim = a.output_dim();
    let mut out = vec![0.0; points.len()];
    out.par_chunks_mut(MC_CHUNK).enumerate().for_each(|(c, block)| {
        let mut ya = vec![0.0; dim];
        let mut yb = vec![0.0; dim];
        for (k, o) in block.iter_mut().enumerate() {
            let z = points.point(c * MC_CHUNK + k);
            a.apply_into(z, &mut ya);
            b.apply_into(z, &mut yb);
            *o = sq_dist(&ya, &yb);
        }
    });
    out
}

/// Squared distances `‖map(z_k) − reference_k‖²`.
pub fn squared_errors_to(map: &dyn TransportMap, points: &PointCloud, reference: &PointCloud) -> Vec<f64> {
    assert_eq!(points.len(), reference.len());
    let dim = map.output_dim();
    let mut out = vec![0.0; points.len()];
    out.par_chunks_mut(MC_CHUNK).enumerate().for_each(|(c, block)| {
        let mut y = vec![0.0; dim];
        for (k, o) in block.iter_mut().enumerate() {
            let i = c * MC_CHUNK + k;
            map.apply_into(points.point(i), &mut y);
            *o = sq_dist(&y, reference.point(i));
        }
    });
    out
}

/// `‖a − b‖²_{L²(P)}` estimated from `mc_points` fresh draws of `P`.
pub fn mse(
    a: &dyn TransportMap,
    b: &dyn TransportMap,
    sampler: &BoxSampler,
    mc_points: usize,
    source: &RandomSource,
) -> Result<MseEstimate> {
    if mc_points == 0 {
        return Err(invalid("mc-points must be at least 1"));
    }
    if a.output_dim() != b.output_dim() {
        return Err(invalid("maps have different output dimensions"));
    }
    let z = sampler.sample(mc_points, &mut source.rng())?;
    Ok(MseEstimate::from_values(&squared_errors(a, b, &z)))
}

/// `‖T₀^{P→Q₀} − T₀^{P→Q₁}‖²` for `Q₀ = (½, ½)` and `Q₁ = (½ − r, ½ + r)`.
pub fn lecam_distance(d: usize, r: f64, mc_points: usize, source: &RandomSource) -> Result<MseEstimate> {
    let t0 = lecam_map(d, 0.5)?;
    let t1 = lecam_map(d, 0.5 - r)?;
    mse(&t0, &t1, &BoxSampler { lo: -0.5, hi: 0.5, d }, mc_points, source)
}

/// Ordinary least squares of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with fewer than three points.
    pub slope_se: Option<f64>,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (lx.len() > 2).then(|| {
        let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    });
    Some(SlopeFit { slope, intercept, slope_se })
}

pub const ENTROPIC: &str = "entropic";
pub const ENTROPIC_ROUNDED: &str = "entropic-rounded";
pub const ONE_NN: &str = "1nn";
pub const ESTIMATORS: [&str; 3] = [ENTROPIC, ENTROPIC_ROUNDED, ONE_NN];

/// One estimator on one `(n, trial)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: String,
    pub n: usize,
    pub trial: usize,
    pub mse: f64,
    pub mse_se: f64,
    pub eps: f64,
    pub seed: u64,
}

/// A cell whose estimators could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mse_mean: f64,
    /// Sample standard deviation across trials (`0` for a single trial).
    pub mse_std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub rows: Vec<RateRow>,
    pub fit: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub spec: ExperimentSpec,
    pub estimators: Vec<EstimatorSummary>,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    /// Le Cam runs only: Monte Carlo `‖T₀^{P→Q₀} − T₀^{P→Q_r}‖²`.
    pub map_distance: Option<MseEstimate>,
}

/// Stream for one purpose of one cell; independent of the grid layout.
fn cell_stream(n: usize, trial: usize, purpose: u64) -> u64 {
    ((n as u64) << 24) | ((trial as u64) << 1) | purpose
}

fn run_cell(spec: &ExperimentSpec, truth: &GroundTruth, n: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let data_source = RandomSource::new(spec.seed, cell_stream(n, trial, 0));
    let mc_source = RandomSource::new(spec.seed, cell_stream(n, trial, 1));
    let (xs, ys) = generate_data(spec, truth, n, &mut data_source.rng())?;
    let eps = spec.eps_rule.epsilon(n);

    let mu = DiscreteMeasure::empirical(xs.clone());
    let nu = DiscreteMeasure::empirical(ys.clone()).consolidate(0.0)?;
    let (entropic, _) = fit_entropic(&mu, &nu, eps, &spec.sinkhorn_options())?;
    let mut onenn = fit_onenn(&xs, &ys)?;
    onenn = onenn.with_kdtree();

    let z = spec.sampler().sample(spec.mc_points, &mut mc_source.rng())?;
    let reference = apply_batch(truth, &z)?;
    let record = |estimator: &str, map: &dyn TransportMap| {
        let est = MseEstimate::from_values(&squared_errors_to(map, &z, &reference));
        TrialRecord {
            estimator: estimator.to_string(),
            n,
            trial,
            mse: est.mean,
            mse_se: est.std_error,
            eps,
            seed: spec.seed,
        }
    };
    Ok(vec![record(ENTROPIC, &entropic), record(ENTROPIC_ROUNDED, &entropic.rounded()), record(ONE_NN, &onenn)])
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss = sum_compensated(values.iter().map(|v| (v - mean) * (v - mean)));
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Aggregates per-trial records into per-estimator rows and slope fits.
pub fn summarize(records: &[TrialRecord], n_grid: &[usize]) -> Vec<EstimatorSummary> {
    ESTIMATORS
        .iter()
        .map(|&name| {
            let rows: Vec<RateRow> = n_grid
                .iter()
                .filter_map(|&n| {
                    let v: Vec<f64> =
                        records.iter().filter(|r| r.estimator == name && r.n == n).map(|r| r.mse).collect();
                    if v.is_empty() {
                        return None;
                    }
                    let mean = sum_compensated(v.iter().copied()) / v.len() as f64;
                    Some(RateRow { n, mse_mean: mean, mse_std: sample_std(&v, mean), trials: v.len() })
                })
                .collect();
            let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let ms: Vec<f64> = rows.iter().map(|r| r.mse_mean).collect();
            EstimatorSummary { estimator: name.to_string(), fit: fit_loglog(&ns, &ms), rows }
        })
        .collect()
}

/// Runs every `(n, trial)` cell and aggregates.
///
/// Cells run in parallel; results are collected in `(n, trial)` order so the
/// report does not depend on scheduling. A failed cell is recorded and left
/// out of the aggregates.
pub fn run(spec: &ExperimentSpec) -> Result<RateReport> {
    let truth = ground_truth(spec)?;
    let cells: Vec<(usize, usize)> = spec.n_grid.iter().flat_map(|&n| (0..spec.trials).map(move |t| (n, t))).collect();
    let outcomes: Vec<Result<Vec<TrialRecord>>> =
        cells.par_iter().map(|&(n, t)| run_cell(spec, &truth, n, t)).collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(n, trial), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(TrialFailure { n, trial, message: e.to_string() }),
        }
    }
    let map_distance = match spec.kind {
        ExperimentKind::LeCam => Some(lecam_distance(
            spec.d,
            spec.r,
            spec.mc_points,
            &RandomSource::new(spec.seed, GROUND_TRUTH_STREAM - 1),
        )?),
        _ => None,
    };
    Ok(RateReport {
        estimators: summarize(&records, &spec.n_grid),
        spec: spec.clone(),
        records,
        failures,
        map_distance,
    })
}

impl RateReport {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == name)
    }

    /// `estimator,n,trial,mse,eps,seed`
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "estimator,n,trial,mse,eps,seed")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{},{}", r.estimator, r.n, r.trial, fmt_f64(r.mse), fmt_f64(r.eps), r.seed)?;
        }
        Ok(())
    }

    /// `estimator,n,mse_mean,mse_std`
    pub fn write_aggregate_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "estimator,n,mse_mean,mse_std")?;
        for e in &self.estimators {
            for row in &e.rows {
                writeln!(out, "{},{},{},{}", e.estimator, row.n, fmt_f64(row.mse_mean), fmt_f64(row.mse_std))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    /// Whitespace-separated `n mse_mean mse_std` columns for log-log plots.
    pub fn write_gnuplot<W: Write>(&self, estimator: &str, mut out: W) -> Result<()> {
        let e = self.estimator(estimator).ok_or_else(|| invalid(format!("no estimator `{estimator}`")))?;
        writeln!(out, "# {estimator}: n mse_mean mse_std")?;
        for row in &e.rows {
            writeln!(out, "{} {} {}", row.n, fmt_f64(row.mse_mean), fmt_f64(row.mse_std))?;
        }
        Ok(())
    }

    /// Writes `raw.csv`, `aggregate.csv`, `report.json` and one `.dat` file
    /// per estimator into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        self.write_raw_csv(&mut buf)?;
        std::fs::write(dir.join("raw.csv"), &buf)?;
        buf.clear();
        self.write_aggregate_csv(&mut buf)?;
        std::fs::write(dir.join("aggregate.csv"), &buf)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        for name in ESTIMATORS {
            buf.clear();
            self.write_gnuplot(name, &mut buf)?;
            std::fs::write(dir.join(format!("{name}.dat")), &buf)?;
        }
        Ok(())
    }
}
