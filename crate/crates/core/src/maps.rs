//! Transport map objects: the exact semi-discrete Brenier map, the fitted
//! entropic map with out-of-sample evaluation and optional rounding, and
//! the slack diagnostics of a Laguerre partition.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{DiscreteMeasure, PointCloud};
use crate::numeric::{dot, sq_dist};
use crate::serialize::to_json_string;
use crate::sinkhorn::{self, CostConvention, SinkhornOptions, SinkhornReport};

/// Anything that maps points of `R^d` to points of `R^{d'}`.
pub trait TransportMap: Sync {
    fn output_dim(&self) -> usize;

    /// Writes the image of `x` into `out` (length [`Self::output_dim`]).
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out);
        out
    }
}

impl<T: TransportMap + ?Sized> TransportMap for &T {
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

/// Outputs of a map over a batch of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEvaluation {
    pub outputs: Array2<f64>,
    /// Laguerre cell per query (semi-discrete maps).
    pub cells: Option<Vec<usize>>,
    /// Conditional weights per query, `n × J` (entropic maps).
    pub weights: Option<Array2<f64>>,
}

/// `x ↦ y_{j*}` with `j* = argmax_j ⟨x, y_j⟩ − ψ₀_j`, ties to the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteMap {
    atoms: PointCloud,
    psi: Vec<f64>,
}

impl SemiDiscreteMap {
    pub fn new(atoms: PointCloud, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != atoms.len() {
            return Err(invalid(format!("{} dual weights for {} atoms", psi.len(), atoms.len())));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(invalid("dual weights must be finite"));
        }
        Ok(Self { atoms, psi })
    }

    pub fn atoms(&self) -> &PointCloud {
        &self.atoms
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Index of the Laguerre cell containing `x`.
    pub fn cell(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (j, y) in self.atoms.iter().enumerate() {
            let v = dot(x, y) - self.psi[j];
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        best
    }

    /// `φ₀(x) = max_j ⟨x, y_j⟩ − ψ₀_j`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        self.atoms.iter().zip(&self.psi).map(|(y, p)| dot(x, y) - p).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(T₀(x), cell index)`.
    pub fn eval(&self, x: &[f64]) -> (&[f64], usize) {
        let j = self.cell(x);
        (self.atoms.point(j), j)
    }

    /// `Δ_j(x) = 2(φ₀(x) − ⟨x, y_j⟩ + ψ₀_j) ≥ 0`, zero exactly on the
    /// maximising atoms.
    pub fn slack(&self, x: &[f64], j: usize) -> f64 {
        2.0 * (self.potential(x) - (dot(x, self.atoms.point(j)) - self.psi[j]))
    }

    pub fn eval_batch(&self, xs: &PointCloud) -> MapEvaluation {
        let d = self.atoms.dim();
        let mut outputs = Array2::zeros((xs.len(), d));
        let mut cells = Vec::with_capacity(xs.len());
        for (i, x) in xs.iter().enumerate() {
            let (y, j) = self.eval(x);
            outputs.row_mut(i).as_slice_mut().unwrap().copy_from_slice(y);
            cells.push(j);
        }
        MapEvaluation { outputs, cells: Some(cells), weights: None }
    }
}

impl TransportMap for SemiDiscreteMap {
    fn output_dim(&self) -> usize {
        self.atoms.dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.eval(x).0);
    }
}

/// Barycentric projection of an entropic plan onto discrete targets:
/// `T(x) = Σ_j w_j(x) y_j` with `w_j(x) ∝ q_j exp((⟨x, y_j⟩ − ψ_j) / ε)`.
///
/// Only target-side data is stored; the source potential at an arbitrary
/// `x` is the softmax normaliser.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicMapModel {
    atoms: PointCloud,
    weights: Vec<f64>,
    psi: Vec<f64>,
    epsilon: f64,
    log_weights: Vec<f64>,
    rounding: Option<PointCloud>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    epsilon: f64,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    psi: Vec<f64>,
    convention: String,
}

const MODEL_CONVENTION: &str = "inner-product";

impl EntropicMapModel {
    /// `psi` are inner-product (unshifted) potentials on the atoms.
    pub fn new(atoms: PointCloud, weights: Vec<f64>, psi: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if weights.len() != atoms.len() || psi.len() != atoms.len() {
            return Err(invalid("atoms, weights and potentials differ in length"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("model weights must be strictly positive"));
        }
        let total: f64 = crate::numeric::sum_compensated(weights.iter().copied());
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("model weights sum to {total}")));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(invalid("model potentials must be finite"));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { atoms, weights, psi, epsilon, log_weights, rounding: None })
    }

    /// Rounds onto `support` instead of the model atoms.
    pub fn with_rounding_support(mut self, support: PointCloud) -> Result<Self> {
        if support.dim() != self.atoms.dim() {
            return Err(invalid("rounding support has the wrong dimension"));
        }
        self.rounding = Some(support);
        Ok(self)
    }

    pub fn atoms(&self) -> &PointCloud {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rounding_support(&self) -> &PointCloud {
        self.rounding.as_ref().unwrap_or(&self.atoms)
    }

    /// Fills `w` with the conditional weights at `x`; returns `φ_ε(x)`.
    pub fn conditional_weights_into(&self, x: &[f64], w: &mut [f64]) -> f64 {
        let eps = self.epsilon;
        let mut max = f64::NEG_INFINITY;
        for (j, y) in self.atoms.iter().enumerate() {
            let a = eps * self.log_weights[j] + dot(x, y) - self.psi[j];
            w[j] = a;
            max = max.max(a);
        }
        let inv = 1.0 / eps;
        let mut s = 0.0;
        for v in w.iter_mut() {
            *v = ((*v - max) * inv).exp();
            s += *v;
        }
        for v in w.iter_mut() {
            *v /= s;
        }
        max + eps * s.ln()
    }

    pub fn conditional_weights(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.atoms.len()];
        self.conditional_weights_into(x, &mut w);
        w
    }

    /// Out-of-sample source potential `φ_ε(x) = ε log Σ_j q_j exp((⟨x, y_j⟩ − ψ_j)/ε)`.
    pub fn source_potential(&self, x: &[f64]) -> f64 {
        let mut w = vec![0.0; self.atoms.len()];
        self.conditional_weights_into(x, &mut w)
    }

    fn barycenter(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (wj, y) in w.iter().zip(self.atoms.iter()) {
            for (o, v) in out.iter_mut().zip(y) {
                *o += wj * v;
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.atoms.dim()];
        let mut w = vec![0.0; self.atoms.len()];
        self.conditional_weights_into(x, &mut w);
        self.barycenter(&w, &mut out);
        out
    }

    /// Nearest rounding-support atom to `eval(x)`, ties to the lowest index.
    pub fn rounded_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let support = self.rounding_support();
        if support.is_empty() {
            return Err(invalid("empty rounding support"));
        }
        let y = self.eval(x);
        Ok(support.point(nearest_atom(support, &y)).to_vec())
    }

    pub fn eval_batch(&self, xs: &PointCloud, keep_weights: bool) -> MapEvaluation {
        let (n, d, j) = (xs.len(), self.atoms.dim(), self.atoms.len());
        let mut outputs = Array2::zeros((n, d));
        let mut weights = keep_weights.then(|| Array2::zeros((n, j)));
        let mut w = vec![0.0; j];
        for (i, x) in xs.iter().enumerate() {
            self.conditional_weights_into(x, &mut w);
            self.barycenter(&w, outputs.row_mut(i).as_slice_mut().unwrap());
            if let Some(ws) = weights.as_mut() {
                ws.row_mut(i).as_slice_mut().unwrap().copy_from_slice(&w);
            }
        }
        MapEvaluation { outputs, cells: None, weights }
    }

    /// `{epsilon, atoms, weights, psi, convention}` with 17-digit floats.
    pub fn to_json(&self) -> Result<String> {
        let m = ModelJson {
            epsilon: self.epsilon,
            atoms: self.atoms.iter().map(<[f64]>::to_vec).collect(),
            weights: self.weights.clone(),
            psi: self.psi.clone(),
            convention: MODEL_CONVENTION.into(),
        };
        to_json_string(&m)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelJson = serde_json::from_str(text)?;
        if m.convention != MODEL_CONVENTION {
            return Err(invalid(format!("unsupported potential convention `{}`", m.convention)));
        }
        let atoms = PointCloud::from_rows(&m.atoms)?;
        Self::new(atoms, m.weights, m.psi, m.epsilon)
    }

    /// View that rounds every output.
    pub fn rounded(&self) -> RoundedEntropicMap<'_> {
        RoundedEntropicMap(self)
    }
}

impl TransportMap for EntropicMapModel {
    fn output_dim(&self) -> usize {
        self.atoms.dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.atoms.len()];
        self.conditional_weights_into(x, &mut w);
        self.barycenter(&w, out);
    }
}

/// [`EntropicMapModel::rounded_eval`] as a [`TransportMap`].
#[derive(Debug, Clone, Copy)]
pub struct RoundedEntropicMap<'a>(&'a EntropicMapModel);

impl TransportMap for RoundedEntropicMap<'_> {
    fn output_dim(&self) -> usize {
        self.0.atoms.dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let support = self.0.rounding_support();
        let mut y = vec![0.0; out.len()];
        self.0.apply_into(x, &mut y);
        out.copy_from_slice(support.point(nearest_atom(support, &y)));
    }
}

/// Lowest index attaining `min_j ‖y − a_j‖`.
pub fn nearest_atom(atoms: &PointCloud, y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, a) in atoms.iter().enumerate() {
        let d = sq_dist(a, y);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Fits `T_ε^{μ→ν}` by Sinkhorn and keeps the target-side potentials.
///
/// The rounding support defaults to the atoms of `ν`. Non-convergence is an
/// error here, since a model with unbalanced marginals is not the estimator.
pub fn fit_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    epsilon: f64,
    options: &SinkhornOptions,
) -> Result<(EntropicMapModel, SinkhornReport)> {
    let (nu_pos, _) = nu.drop_zero_weights()?;
    let (pot, report) = sinkhorn::solve(mu, &nu_pos, epsilon, options)?;
    if !report.converged {
        return Err(Error::NotConverged { iterations: report.iterations, residual: report.residual });
    }
    debug_assert_eq!(pot.convention, CostConvention::HalfSqdist);
    let (_, psi) = sinkhorn::to_inner_product_potentials(&pot, mu, &nu_pos)?;
    let model = EntropicMapModel::new(nu_pos.atoms().clone(), nu_pos.weights().to_vec(), psi, epsilon)?;
    Ok((model, report))
}
