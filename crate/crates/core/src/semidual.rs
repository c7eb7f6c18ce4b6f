//! Semi-discrete entropic machinery with the source held fixed: the
//! ε-Legendre transform against the counting measure on the target atoms,
//! conditional weights, the semi-dual functional and its gradient, and a
//! gradient-descent solver for its minimiser.
//!
//! Everything here uses inner-product potentials in the *shifted* convention
//! `ψ̃_j = ψ_j − ε log ν_j`. [`to_half_sqdist_target_potential`] converts a
//! solution to the cost convention of [`crate::sinkhorn`].

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::measures::{DiscreteMeasure, PointCloud};
use crate::numeric::{dot, sum_compensated};

const CHUNK: usize = 512;

/// A source measure given by nodes and positive weights summing to one:
/// either a quadrature rule for a density on a box or an empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMeasure {
    nodes: PointCloud,
    weights: Vec<f64>,
}

impl SourceMeasure {
    pub fn new(nodes: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(invalid("quadrature nodes and weights differ in length"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("quadrature weights must be positive"));
        }
        let total = sum_compensated(weights.iter().copied());
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("quadrature weights sum to {total}")));
        }
        Ok(Self { nodes, weights })
    }

    /// Empirical source; zero-weight atoms are dropped.
    pub fn from_measure(m: &DiscreteMeasure) -> Result<Self> {
        let (m, _) = m.drop_zero_weights()?;
        Self::new(m.atoms().clone(), m.weights().to_vec())
    }

    /// Composite midpoint rule on `[lo, hi]` with `n` cells, weighted by
    /// `density` and normalised.
    pub fn midpoint_1d(lo: f64, hi: f64, n: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        if !(lo < hi) || n == 0 {
            return Err(invalid("invalid 1D quadrature"));
        }
        let h = (hi - lo) / n as f64;
        let nodes: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect();
        let raw: Vec<f64> = nodes.iter().map(|&x| density(x)).collect();
        Self::normalised(PointCloud::from_flat(n, 1, nodes)?, raw)
    }

    /// Tensor midpoint rule on `[lo, hi]²` with `n × n` cells.
    pub fn tensor_midpoint_2d(lo: f64, hi: f64, n: usize, density: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !(lo < hi) || n == 0 {
            return Err(invalid("invalid 2D quadrature"));
        }
        let h = (hi - lo) / n as f64;
        let axis: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect();
        let mut data = Vec::with_capacity(2 * n * n);
        let mut raw = Vec::with_capacity(n * n);
        for &a in &axis {
            for &b in &axis {
                data.extend_from_slice(&[a, b]);
                raw.push(density(a, b));
            }
        }
        Self::normalised(PointCloud::from_flat(n * n, 2, data)?, raw)
    }

    fn normalised(nodes: PointCloud, raw: Vec<f64>) -> Result<Self> {
        let total = sum_compensated(raw.iter().copied());
        if !(total > 0.0) {
            return Err(invalid("density integrates to zero"));
        }
        Self::new(nodes, raw.into_iter().map(|w| w / total).collect())
    }

    pub fn nodes(&self) -> &PointCloud {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Potentials on the target atoms, tagged with their convention.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    pub values: Vec<f64>,
    /// `true` when the entries are `ψ̃_j = ψ_j − ε log ν_j`.
    pub shifted: bool,
}

impl PotentialVector {
    pub fn shifted(values: Vec<f64>) -> Self {
        Self { values, shifted: true }
    }

    pub fn unshifted(values: Vec<f64>) -> Self {
        Self { values, shifted: false }
    }

    /// `ψ → ψ̃ = ψ − ε log ν`. Identity on already shifted vectors.
    pub fn to_shifted(&self, nu: &[f64], epsilon: f64) -> Self {
        if self.shifted {
            return self.clone();
        }
        Self::shifted(self.values.iter().zip(nu).map(|(p, w)| p - epsilon * w.ln()).collect())
    }

    /// `ψ̃ → ψ = ψ̃ + ε log ν`. Identity on unshifted vectors.
    pub fn to_unshifted(&self, nu: &[f64], epsilon: f64) -> Self {
        if !self.shifted {
            return self.clone();
        }
        Self::unshifted(self.values.iter().zip(nu).map(|(p, w)| p + epsilon * w.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn require_shifted(psi: &PotentialVector, targets: &PointCloud) -> Result<()> {
    if !psi.shifted {
        return Err(invalid("expected a shifted potential"));
    }
    if psi.len() != targets.len() {
        return Err(invalid(format!("{} potentials for {} atoms", psi.len(), targets.len())));
    }
    Ok(())
}

/// Returns `Φ_ε(ψ)(x)` and leaves the conditional weights in `out`.
///
/// The maximum is subtracted in cost units, so a single atom gives
/// `⟨x, y₁⟩ − ψ₁` with no rounding from the logarithm.
fn transform_and_weights(targets: &PointCloud, psi: &[f64], x: &[f64], epsilon: f64, out: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (j, y) in targets.iter().enumerate() {
        let a = dot(x, y) - psi[j];
        out[j] = a;
        max = max.max(a);
    }
    let inv = 1.0 / epsilon;
    let mut s = 0.0;
    for v in out.iter_mut() {
        *v = ((*v - max) * inv).exp();
        s += *v;
    }
    for v in out.iter_mut() {
        *v /= s;
    }
    max + epsilon * s.ln()
}

/// `Φ_ε(ψ)(x) = ε log Σ_j exp((⟨x, y_j⟩ − ψ_j) / ε)`.
pub fn phi_transform(targets: &PointCloud, psi: &PotentialVector, x: &[f64], epsilon: f64) -> Result<f64> {
    require_shifted(psi, targets)?;
    let mut buf = vec![0.0; targets.len()];
    Ok(transform_and_weights(targets, &psi.values, x, epsilon, &mut buf))
}

/// `π^x_ε[ψ]`: softmax of `(⟨x, y_j⟩ − ψ_j) / ε` over the atoms.
pub fn conditional_weights(targets: &PointCloud, psi: &PotentialVector, x: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    require_shifted(psi, targets)?;
    let mut buf = vec![0.0; targets.len()];
    transform_and_weights(targets, &psi.values, x, epsilon, &mut buf);
    Ok(buf)
}

/// The semi-dual problem `min_ψ F(ψ) = ∫ Φ_ε(ψ) dμ + ⟨ψ, ν⟩`.
#[derive(Debug, Clone)]
pub struct SemiDualProblem {
    pub targets: PointCloud,
    pub target_weights: Vec<f64>,
    pub source: SourceMeasure,
    pub epsilon: f64,
}

impl SemiDualProblem {
    pub fn new(targets: PointCloud, target_weights: Vec<f64>, source: SourceMeasure, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if targets.len() != target_weights.len() {
            return Err(invalid("target atoms and weights differ in length"));
        }
        if target_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("target weights must be strictly positive"));
        }
        if (sum_compensated(target_weights.iter().copied()) - 1.0).abs() > 1e-10 {
            return Err(invalid("target weights must sum to one"));
        }
        if targets.dim() != source.nodes().dim() {
            return Err(invalid("source and target dimensions differ"));
        }
        Ok(Self { targets, target_weights, source, epsilon })
    }

    pub fn from_target_measure(nu: &DiscreteMeasure, source: SourceMeasure, epsilon: f64) -> Result<Self> {
        Self::new(nu.atoms().clone(), nu.weights().to_vec(), source, epsilon)
    }

    pub fn num_atoms(&self) -> usize {
        self.targets.len()
    }

    /// `(F(ψ), ∫ π^x[ψ] dμ)` in one pass; reduction order is fixed so the
    /// result does not depend on the thread count.
    fn integrate(&self, psi: &[f64], want_weights: bool) -> (f64, Vec<f64>) {
        let j = self.num_atoms();
        let d = self.targets.dim();
        let nodes = self.source.nodes().as_slice();
        let weights = self.source.weights();
        let partial: Vec<(f64, Vec<f64>)> = weights
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, ws)| {
                let mut buf = vec![0.0; j];
                let mut acc = vec![0.0; if want_weights { j } else { 0 }];
                let mut vals = Vec::with_capacity(ws.len());
                for (k, w) in ws.iter().enumerate() {
                    let i = c * CHUNK + k;
                    let x = &nodes[i * d..(i + 1) * d];
                    let phi = transform_and_weights(&self.targets, psi, x, self.epsilon, &mut buf);
                    vals.push(w * phi);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += w * b;
                    }
                }
                (sum_compensated(vals), acc)
            })
            .collect();
        let value = sum_compensated(partial.iter().map(|p| p.0));
        let mut pushed = vec![0.0; if want_weights { j } else { 0 }];
        for (_, acc) in &partial {
            for (a, b) in pushed.iter_mut().zip(acc) {
                *a += b;
            }
        }
        (value, pushed)
    }

    fn value_raw(&self, psi: &[f64]) -> f64 {
        let (v, _) = self.integrate(psi, false);
        v + sum_compensated(psi.iter().zip(&self.target_weights).map(|(p, w)| p * w))
    }

    fn value_and_gradient_raw(&self, psi: &[f64]) -> (f64, Vec<f64>) {
        let (v, pushed) = self.integrate(psi, true);
        let value = v + sum_compensated(psi.iter().zip(&self.target_weights).map(|(p, w)| p * w));
        let grad = self.target_weights.iter().zip(&pushed).map(|(b, a)| b - a).collect();
        (value, grad)
    }

    /// `F(ψ)`.
    pub fn value(&self, psi: &PotentialVector) -> Result<f64> {
        require_shifted(psi, &self.targets)?;
        Ok(self.value_raw(&psi.values))
    }

    /// `∇F(ψ) = ν − ∫ π^x[ψ] dμ(x)`, since `∂Φ_ε(ψ)(x)/∂ψ_j = −π^x[ψ]_j`.
    pub fn gradient(&self, psi: &PotentialVector) -> Result<Vec<f64>> {
        require_shifted(psi, &self.targets)?;
        Ok(self.value_and_gradient_raw(&psi.values).1)
    }

    /// `∫ π^x[ψ] dμ(x)`, the target marginal implied by `ψ`.
    pub fn pushed_weights(&self, psi: &PotentialVector) -> Result<Vec<f64>> {
        require_shifted(psi, &self.targets)?;
        Ok(self.integrate(&psi.values, true).1)
    }

    /// Entropic map `x ↦ Σ_j π^x[ψ]_j y_j`.
    pub fn map_at(&self, psi: &PotentialVector, x: &[f64]) -> Result<Vec<f64>> {
        let w = conditional_weights(&self.targets, psi, x, self.epsilon)?;
        let mut out = vec![0.0; self.targets.dim()];
        for (wj, y) in w.iter().zip(self.targets.iter()) {
            for (o, v) in out.iter_mut().zip(y) {
                *o += wj * v;
            }
        }
        Ok(out)
    }
}

pub fn semidual_value(prob: &SemiDualProblem, psi: &PotentialVector) -> Result<f64> {
    prob.value(psi)
}

pub fn semidual_gradient(prob: &SemiDualProblem, psi: &PotentialVector) -> Result<Vec<f64>> {
    prob.gradient(psi)
}

/// Outcome of [`solve_population_with_stats`].
#[derive(Debug, Clone)]
pub struct SemiDualSolution {
    pub psi: PotentialVector,
    pub iterations: usize,
    pub grad_norm: f64,
    pub value: f64,
}

/// Minimises `F` by full-gradient descent with Armijo backtracking
/// (halving), starting from `ψ̃ = 0`, until `‖∇F‖∞ ≤ tol`.
///
/// `F` is `1/(2ε)`-smooth, so any step `t ≤ ε` decreases it; such steps are
/// accepted without the Armijo test, and are also used once the predicted
/// decrease falls below the rounding level of `F`. The result is gauge-fixed to `Σ ν_j ψ̃_j = 0`.
pub fn solve_population_with_stats(prob: &SemiDualProblem, tol: f64, max_iter: usize) -> Result<SemiDualSolution> {
    const ARMIJO: f64 = 1e-4;
    let eps = prob.epsilon;
    let mut psi = vec![0.0; prob.num_atoms()];
    let (mut value, mut grad) = prob.value_and_gradient_raw(&psi);
    let mut step = eps;
    let mut iterations = 0;
    let mut trial = vec![0.0; psi.len()];
    loop {
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::SemiDualNotConverged { iterations, grad_norm });
        }
        iterations += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        // Below this predicted decrease the Armijo test only compares
        // rounding errors of F.
        let noise = 64.0 * f64::EPSILON * value.abs().max(1.0);
        let mut t = 2.0 * step;
        loop {
            let trusted = t * g2 > noise;
            if !trusted {
                t = t.min(eps);
            }
            for ((p, q), g) in trial.iter_mut().zip(&psi).zip(&grad) {
                *p = q - t * g;
            }
            if t <= eps || !trusted || prob.value_raw(&trial) <= value - ARMIJO * t * g2 {
                break;
            }
            t *= 0.5;
        }
        step = t;
        psi.copy_from_slice(&trial);
        (value, grad) = prob.value_and_gradient_raw(&psi);
    }
    let shift = sum_compensated(psi.iter().zip(&prob.target_weights).map(|(p, w)| p * w));
    psi.iter_mut().for_each(|p| *p -= shift);
    let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(SemiDualSolution { psi: PotentialVector::shifted(psi), iterations, grad_norm, value })
}

/// Minimiser `ψ̃` of the semi-dual functional with `‖∇F‖∞ ≤ tol`.
pub fn solve_population(prob: &SemiDualProblem, tol: f64, max_iter: usize) -> Result<PotentialVector> {
    Ok(solve_population_with_stats(prob, tol, max_iter)?.psi)
}

/// Converts a shifted inner-product potential to the cost-convention target
/// potential `g_j = ½‖y_j‖² − ψ_j` of [`crate::sinkhorn`], gauge-fixed to
/// `Σ ν_j g_j = 0`.
pub fn to_half_sqdist_target_potential(prob: &SemiDualProblem, psi: &PotentialVector) -> Result<Vec<f64>> {
    require_shifted(psi, &prob.targets)?;
    let psi = psi.to_unshifted(&prob.target_weights, prob.epsilon);
    let mut g: Vec<f64> = prob.targets.sq_norms().iter().zip(&psi.values).map(|(s, p)| 0.5 * s - p).collect();
    let shift = sum_compensated(g.iter().zip(&prob.target_weights).map(|(v, w)| v * w));
    g.iter_mut().for_each(|v| *v -= shift);
    Ok(g)
}
