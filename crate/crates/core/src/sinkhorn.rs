//! Log-domain Sinkhorn iterations for entropic transport between two
//! finitely supported measures under the cost `c(x, y) = ½‖x − y‖²`.
//!
//! Potentials are stored in the cost convention: the plan is
//! `π(i, j) = μ_i ν_j exp((f_i + g_j − c(x_i, y_j)) / ε)`. The inner-product
//! potentials `φ = ½‖x‖² − f`, `ψ = ½‖y‖² − g` are obtained with
//! [`to_inner_product_potentials`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::DiscreteMeasure;
use crate::numeric::{sq_dist, sum_compensated};

/// Marker for the cost the potentials were computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostConvention {
    /// `c(x, y) = ½‖x − y‖²`.
    HalfSqdist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon: f64,
    pub convention: CostConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornReport {
    pub iterations: usize,
    /// L1 deviation of the plan's column sums from `ν`.
    pub residual: f64,
    pub cost: f64,
    pub converged: bool,
    /// Residual after every iteration, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl SinkhornReport {
    /// Writes the `iter,residual` trace, if one was recorded.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,residual")?;
        for (k, r) in self.trace.iter().flatten().enumerate() {
            writeln!(out, "{},{}", k + 1, crate::measures::fmt_f64(*r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100_000, record_trace: false }
    }
}

/// Dense `½‖x_i − y_j‖²`, row-major `n × m`.
fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.atoms().iter() {
        for y in nu.atoms().iter() {
            c.push(0.5 * sq_dist(x, y));
        }
    }
    c
}

/// `−ε log Σ_k w_k exp((h_k − c_k) / ε)`, fed with `b_k = ε log w_k + h_k − c_k`.
///
/// Working in cost units keeps a one-term sum exact.
#[inline]
fn softmin(eps: f64, terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    let inv = 1.0 / eps;
    let s: f64 = terms.map(|t| ((t - max) * inv).exp()).sum();
    -(max + eps * s.ln())
}

struct Kernel<'a> {
    cost: &'a [f64],
    n: usize,
    m: usize,
    eps: f64,
    eps_log_mu: Vec<f64>,
    eps_log_nu: Vec<f64>,
}

impl Kernel<'_> {
    fn update_f(&self, g: &[f64], f: &mut [f64]) {
        for (i, fi) in f.iter_mut().enumerate() {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            *fi = softmin(self.eps, (0..self.m).map(|j| self.eps_log_nu[j] + g[j] - row[j]));
        }
    }

    fn update_g(&self, f: &[f64], g: &mut [f64]) {
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = softmin(self.eps, (0..self.n).map(|i| self.eps_log_mu[i] + f[i] - self.cost[i * self.m + j]));
        }
    }
}

/// Solves entropic OT from `mu` to `nu` at regularisation `epsilon`.
///
/// Each iteration makes the row sums exact, measures the L1 error of the
/// column sums against `ν`, and then updates `g`. The returned potentials
/// satisfy `Σ ν_j g_j = 0`. Zero-weight atoms are excluded from the
/// iterations; their potentials are filled in with the same soft-min
/// formula, so they stay finite and carry no plan mass.
///
/// Running out of iterations is not an error: the report says
/// `converged: false` and the caller decides.
pub fn solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    epsilon: f64,
    options: &SinkhornOptions,
) -> Result<(DualPotentials, SinkhornReport)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if mu.dim() != nu.dim() {
        return Err(invalid("source and target live in different dimensions"));
    }
    if !(options.tol >= 0.0) {
        return Err(invalid("tolerance must be nonnegative"));
    }
    let (mu_s, keep_mu) = mu.drop_zero_weights()?;
    let (nu_s, keep_nu) = nu.drop_zero_weights()?;
    let cost = cost_matrix(&mu_s, &nu_s);
    let kernel = Kernel {
        cost: &cost,
        n: mu_s.len(),
        m: nu_s.len(),
        eps: epsilon,
        eps_log_mu: mu_s.weights().iter().map(|w| epsilon * w.ln()).collect(),
        eps_log_nu: nu_s.weights().iter().map(|w| epsilon * w.ln()).collect(),
    };

    let mut f = vec![0.0; kernel.n];
    let mut g = vec![0.0; kernel.m];
    let mut g_next = vec![0.0; kernel.m];
    let mut trace = options.record_trace.then(Vec::new);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        kernel.update_f(&g, &mut f);
        kernel.update_g(&f, &mut g_next);
        // Column sum j of the current plan is ν_j exp((g_j − g_next_j)/ε).
        residual = sum_compensated(
            nu_s.weights()
                .iter()
                .zip(g.iter().zip(&g_next))
                .map(|(w, (a, b))| (w * ((a - b) / epsilon).exp() - w).abs()),
        );
        if let Some(t) = trace.as_mut() {
            t.push(residual);
        }
        if residual <= options.tol {
            converged = true;
            break;
        }
        std::mem::swap(&mut g, &mut g_next);
    }
    if !converged && iterations == 0 {
        kernel.update_f(&g, &mut f);
    }

    let shift = sum_compensated(nu_s.weights().iter().zip(&g).map(|(w, v)| w * v));
    g.iter_mut().for_each(|v| *v -= shift);
    f.iter_mut().for_each(|v| *v += shift);

    let (f, g) = reinsert(mu, nu, &mu_s, &nu_s, &keep_mu, &keep_nu, f, g, epsilon);
    let potentials = DualPotentials { f, g, epsilon, convention: CostConvention::HalfSqdist };
    let cost = entropic_cost(&potentials, mu, nu)?;
    let report = SinkhornReport { iterations, residual, cost, converged, trace };
    Ok((potentials, report))
}

#[allow(clippy::too_many_arguments)]
fn reinsert(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    mu_s: &DiscreteMeasure,
    nu_s: &DiscreteMeasure,
    keep_mu: &[usize],
    keep_nu: &[usize],
    f_s: Vec<f64>,
    g_s: Vec<f64>,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    if keep_mu.len() == mu.len() && keep_nu.len() == nu.len() {
        return (f_s, g_s);
    }
    let log_mu: Vec<f64> = mu_s.weights().iter().map(|w| eps * w.ln()).collect();
    let log_nu: Vec<f64> = nu_s.weights().iter().map(|w| eps * w.ln()).collect();
    let mut f = vec![f64::NAN; mu.len()];
    for (k, &i) in keep_mu.iter().enumerate() {
        f[i] = f_s[k];
    }
    for (i, x) in mu.atoms().iter().enumerate() {
        if f[i].is_nan() {
            f[i] = softmin(eps, nu_s.atoms().iter().enumerate().map(|(j, y)| log_nu[j] + g_s[j] - 0.5 * sq_dist(x, y)));
        }
    }
    let mut g = vec![f64::NAN; nu.len()];
    for (k, &j) in keep_nu.iter().enumerate() {
        g[j] = g_s[k];
    }
    for (j, y) in nu.atoms().iter().enumerate() {
        if g[j].is_nan() {
            g[j] = softmin(eps, mu_s.atoms().iter().enumerate().map(|(i, x)| log_mu[i] + f_s[i] - 0.5 * sq_dist(x, y)));
        }
    }
    (f, g)
}

fn check_shapes(pot: &DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if pot.f.len() != mu.len() || pot.g.len() != nu.len() {
        return Err(invalid("potentials do not match the measures"));
    }
    Ok(())
}

/// `π(i, j) = μ_i ν_j exp((f_i + g_j − ½‖x_i − y_j‖²) / ε)`.
pub fn plan_entry(pot: &DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure, i: usize, j: usize) -> f64 {
    let c = 0.5 * sq_dist(mu.atoms().point(i), nu.atoms().point(j));
    mu.weights()[i] * nu.weights()[j] * ((pot.f[i] + pot.g[j] - c) / pot.epsilon).exp()
}

/// Full `n × m` plan, row-major.
pub fn plan(pot: &DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            out.push(plan_entry(pot, mu, nu, i, j));
        }
    }
    out
}

/// Entropic cost through `OT_ε = ½M₂(μ) + ½M₂(ν) − ∫φ dμ − ∫ψ dν`.
pub fn entropic_cost(pot: &DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_shapes(pot, mu, nu)?;
    let (phi, psi) = to_inner_product_potentials(pot, mu, nu)?;
    let int_phi = sum_compensated(mu.weights().iter().zip(&phi).map(|(w, v)| w * v));
    let int_psi = sum_compensated(nu.weights().iter().zip(&psi).map(|(w, v)| w * v));
    Ok(0.5 * mu.second_moment() + 0.5 * nu.second_moment() - int_phi - int_psi)
}

/// `φ_i = ½‖x_i‖² − f_i` and `ψ_j = ½‖y_j‖² − g_j`.
///
/// This is the one place the two potential conventions meet.
pub fn to_inner_product_potentials(
    pot: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shapes(pot, mu, nu)?;
    let phi = mu.atoms().sq_norms().iter().zip(&pot.f).map(|(s, f)| 0.5 * s - f).collect();
    let psi = nu.atoms().sq_norms().iter().zip(&pot.g).map(|(s, g)| 0.5 * s - g).collect();
    Ok((phi, psi))
}

/// Plan entry from inner-product potentials:
/// `μ_i ν_j exp((⟨x_i, y_j⟩ − φ_i − ψ_j) / ε)`.
pub fn plan_entry_inner(
    phi: &[f64],
    psi: &[f64],
    epsilon: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    i: usize,
    j: usize,
) -> f64 {
    let ip = crate::numeric::dot(mu.atoms().point(i), nu.atoms().point(j));
    mu.weights()[i] * nu.weights()[j] * ((ip - phi[i] - psi[j]) / epsilon).exp()
}

/// Row and column sums of the plan.
pub fn marginals(pot: &DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let p = plan(pot, mu, nu);
    let m = nu.len();
    let rows = (0..mu.len()).map(|i| sum_compensated(p[i * m..(i + 1) * m].iter().copied())).collect();
    let cols = (0..m).map(|j| sum_compensated((0..mu.len()).map(|i| p[i * m + j]))).collect();
    (rows, cols)
}
