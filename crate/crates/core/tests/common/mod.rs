//! Independent reference implementations used as test oracles. They share no
//! code with the library beyond the data types.

#![allow(dead_code)]

/// Plain-domain Sinkhorn scaling `π = diag(u) K diag(v)` with
/// `K_ij = μ_i ν_j exp(−c_ij / ε)`, iterated until the column sums match `ν`
/// to `tol` in L1. Row-major `n × m` plan.
pub fn naive_sinkhorn(mu: &[f64], nu: &[f64], cost: &[f64], eps: f64, tol: f64) -> Vec<f64> {
    let (n, m) = (mu.len(), nu.len());
    let k: Vec<f64> = (0..n * m).map(|idx| mu[idx / m] * nu[idx % m] * (-cost[idx] / eps).exp()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    for _ in 0..1_000_000 {
        for i in 0..n {
            let s: f64 = (0..m).map(|j| k[i * m + j] * v[j]).sum();
            u[i] = mu[i] / s;
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| k[i * m + j] * u[i]).sum();
            v[j] = nu[j] / s;
        }
        let mut err = 0.0;
        for i in 0..n {
            let s: f64 = (0..m).map(|j| u[i] * k[i * m + j] * v[j]).sum();
            err += (s - mu[i]).abs();
        }
        if err <= tol {
            break;
        }
    }
    (0..n * m).map(|idx| u[idx / m] * k[idx] * v[idx % m]).collect()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Minimum of `Σ_i cost[i][σ(i)]` over all permutations, by enumeration.
pub fn brute_force_matching(cost: &[Vec<f64>]) -> f64 {
    permutations(cost.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

pub fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ε log Σ_j w_j exp((⟨x, y_j⟩ − ψ_j)/ε)`, evaluated directly with a max shift.
pub fn entropic_transform(x: &[f64], ys: &[Vec<f64>], w: &[f64], psi: &[f64], eps: f64) -> f64 {
    let a: Vec<f64> = ys.iter().zip(psi).map(|(y, p)| inner(x, y) - p).collect();
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + eps * a.iter().zip(w).map(|(v, wj)| wj * ((v - m) / eps).exp()).sum::<f64>().ln()
}

/// Conditional mean `Σ_j π_j y_j`, `π_j ∝ w_j exp((⟨x, y_j⟩ − ψ_j)/ε)`.
pub fn entropic_map(x: &[f64], ys: &[Vec<f64>], w: &[f64], psi: &[f64], eps: f64) -> Vec<f64> {
    let phi = entropic_transform(x, ys, w, psi, eps);
    let mut out = vec![0.0; ys[0].len()];
    for ((y, p), wj) in ys.iter().zip(psi).zip(w) {
        let pj = wj * ((inner(x, y) - p - phi) / eps).exp();
        for (o, v) in out.iter_mut().zip(y) {
            *o += pj * v;
        }
    }
    out
}

/// `Σ p log(p/q)` over entries with `p > 0`.
pub fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Central difference `(f(x + h e_j) − f(x − h e_j)) / 2h` for every `j`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Index of the closest row, ties to the lowest index.
pub fn nearest_scan(rows: &[Vec<f64>], q: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, r) in rows.iter().enumerate() {
        let d = half_sq_dist(r, q);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}
