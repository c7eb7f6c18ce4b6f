//! Point clouds, finitely supported measures, samplers, and the divergence
//! and variance toolbox.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numeric::{sq_dist, sq_norm, sum_compensated};
use crate::random::RandomSource;

/// Tolerance on `Σ w = 1` for a [`DiscreteMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(invalid(format!("point cloud must be non-empty, got {n}x{d}")));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite coordinate in row {}", bad / d)));
        }
        // Row slices are taken everywhere, so force standard layout.
        let points = if points.is_standard_layout() { points } else { points.as_standard_layout().into_owned() };
        Ok(Self { points })
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(invalid(format!("expected {} coordinates, got {}", n * d, data.len())));
        }
        let arr = Array2::from_shape_vec((n, d), data).map_err(|e| invalid(e.to_string()))?;
        Self::new(arr)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("rows have different lengths"));
        }
        Self::from_flat(rows.len(), d, rows.iter().flatten().copied().collect())
    }

    /// Checks that every point lies in the closed ball of radius `radius`.
    pub fn within_radius(self, radius: f64) -> Result<Self> {
        for (i, row) in self.points.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm > radius {
                return Err(invalid(format!("point {i} has norm {norm} > R = {radius}")));
            }
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.as_slice()[i * d..(i + 1) * d]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.as_slice().chunks_exact(self.dim())
    }

    pub fn as_slice(&self) -> &[f64] {
        self.points.as_slice().expect("standard layout")
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn max_norm(&self) -> f64 {
        self.iter().map(sq_norm).fold(0.0, f64::max).sqrt()
    }

    /// Squared norms `‖x_i‖²`.
    pub fn sq_norms(&self) -> Vec<f64> {
        self.iter().map(sq_norm).collect()
    }

    /// Sub-cloud of the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            data.extend_from_slice(self.point(i));
        }
        Self::from_flat(rows.len(), d, data)
    }
}

/// `Σ_j w_j δ_{a_j}` with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: PointCloud,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != atoms.len() {
            return Err(invalid(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        if let Some(j) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid(format!("weight {j} is negative or non-finite: {}", weights[j])));
        }
        let total = sum_compensated(weights.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform weights `1/n`; repeated points stay separate atoms.
    pub fn empirical(points: PointCloud) -> Self {
        let n = points.len();
        Self { weights: vec![1.0 / n as f64; n], atoms: points }
    }

    pub fn atoms(&self) -> &PointCloud {
        &self.atoms
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

    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Asserts every weight is at least `q_min > 0`.
    pub fn require_min_weight(&self, q_min: f64) -> Result<()> {
        if q_min <= 0.0 {
            return Err(invalid("q_min must be positive"));
        }
        match self.weights.iter().position(|&w| w < q_min) {
            Some(j) => Err(invalid(format!("weight {j} = {} below q_min = {q_min}", self.weights[j]))),
            None => Ok(()),
        }
    }

    /// Indices of strictly positive atoms.
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.weights[j] > 0.0).collect()
    }

    /// Barycenter `Σ w_j a_j`.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| sum_compensated(self.atoms.iter().zip(&self.weights).map(|(a, w)| w * a[k]))).collect()
    }

    /// Second moment `Σ w_j ‖a_j‖²`.
    pub fn second_moment(&self) -> f64 {
        sum_compensated(self.atoms.iter().zip(&self.weights).map(|(a, w)| w * sq_norm(a)))
    }

    /// Merges atoms closer than `tol`, summing weights onto the first
    /// occurrence. With `tol == 0` only exactly equal coordinates merge.
    pub fn consolidate(&self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(invalid("consolidation tolerance must be nonnegative"));
        }
        let mut reps: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<f64>> = Vec::new();
        if tol == 0.0 {
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            for (i, a) in self.atoms.iter().enumerate() {
                let slot = *index.entry(coord_key(a)).or_insert_with(|| {
                    reps.push(i);
                    groups.push(Vec::new());
                    reps.len() - 1
                });
                groups[slot].push(self.weights[i]);
            }
        } else {
            let tol2 = tol * tol;
            for (i, a) in self.atoms.iter().enumerate() {
                match reps.iter().position(|&r| sq_dist(self.atoms.point(r), a) <= tol2) {
                    Some(slot) => groups[slot].push(self.weights[i]),
                    None => {
                        reps.push(i);
                        groups.push(vec![self.weights[i]]);
                    }
                }
            }
        }
        let atoms = self.atoms.select(&reps)?;
        let weights = groups.into_iter().map(sum_compensated).collect();
        Ok(Self { atoms, weights })
    }

    /// Drops zero-weight atoms; returns the reduced measure and the kept indices.
    pub fn drop_zero_weights(&self) -> Result<(Self, Vec<usize>)> {
        let keep = self.support_indices();
        if keep.len() == self.len() {
            return Ok((self.clone(), keep));
        }
        let atoms = self.atoms.select(&keep)?;
        let weights = keep.iter().map(|&j| self.weights[j]).collect();
        Ok((Self { atoms, weights }, keep))
    }

    /// Writes `w,x1,...,xd` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("w");
        for k in 1..=self.dim() {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(out, "{header}")?;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            let mut line = fmt_f64(*w);
            for v in a {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Csv { row: 0, message: e.to_string() })?.clone();
        if headers.len() < 2 || &headers[0] != "w" {
            return Err(Error::Csv { row: 0, message: "header must be `w,x1,...,xd`".into() });
        }
        for (k, h) in headers.iter().enumerate().skip(1) {
            if h != format!("x{k}") {
                return Err(Error::Csv { row: 0, message: format!("expected column x{k}, found `{h}`") });
            }
        }
        let d = headers.len() - 1;
        let mut weights = Vec::new();
        let mut coords = Vec::new();
        for (r, rec) in reader.records().enumerate() {
            let row = r + 1;
            let rec = rec.map_err(|e| Error::Csv { row, message: e.to_string() })?;
            if rec.len() != d + 1 {
                return Err(Error::Csv { row, message: format!("expected {} fields, found {}", d + 1, rec.len()) });
            }
            let mut vals = rec.iter().map(|s| {
                s.parse::<f64>().map_err(|_| Error::Csv { row, message: format!("cannot parse `{s}` as a number") })
            });
            weights.push(vals.next().unwrap()?);
            for v in vals {
                coords.push(v?);
            }
        }
        if weights.is_empty() {
            return Err(Error::Csv { row: 1, message: "no atoms".into() });
        }
        let atoms = PointCloud::from_flat(weights.len(), d, coords)?;
        Self::new(atoms, weights)
    }
}

/// 17-significant-digit scientific notation, lossless for `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn coord_key(a: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same point.
    a.iter().map(|v| if *v == 0.0 { 0u64 } else { v.to_bits() }).collect()
}

/// `n` i.i.d. points uniform on `[lo, hi]^d`, drawn from `rng`.
pub fn sample_uniform_box_with<R: Rng>(lo: f64, hi: f64, n: usize, d: usize, rng: &mut R) -> Result<PointCloud> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("invalid box bounds [{lo}, {hi}]")));
    }
    if n == 0 || d == 0 {
        return Err(invalid("sample size and dimension must be positive"));
    }
    let width = hi - lo;
    let data = (0..n * d).map(|_| lo + width * rng.gen::<f64>()).collect();
    PointCloud::from_flat(n, d, data)
}

/// `n` i.i.d. points uniform on `[lo, hi]^d`; a pure function of `source`.
pub fn sample_uniform_box(lo: f64, hi: f64, n: usize, d: usize, source: &RandomSource) -> Result<PointCloud> {
    sample_uniform_box_with(lo, hi, n, d, &mut source.rng())
}

/// Weights of `p` and `q` on the union of their atoms, matched by exact
/// coordinate equality.
fn align(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<Vec<(f64, f64)>> {
    if p.dim() != q.dim() {
        return Err(invalid("measures live in different dimensions"));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (side, m) in [p, q].into_iter().enumerate() {
        for (a, &w) in m.atoms.iter().zip(&m.weights) {
            let slot = *index.entry(coord_key(a)).or_insert_with(|| {
                pairs.push((Vec::new(), Vec::new()));
                pairs.len() - 1
            });
            if side == 0 {
                pairs[slot].0.push(w);
            } else {
                pairs[slot].1.push(w);
            }
        }
    }
    Ok(pairs.into_iter().map(|(a, b)| (sum_compensated(a), sum_compensated(b))).collect())
}

fn check_absolute_continuity(pairs: &[(f64, f64)]) -> Result<()> {
    match pairs.iter().find(|(p, q)| *p > 0.0 && *q <= 0.0) {
        Some(&(mass, _)) => Err(Error::DivergenceUndefined { mass }),
        None => Ok(()),
    }
}

/// `χ²(p‖q) = Σ (p_j − q_j)² / q_j`.
pub fn chi2(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    let pairs = align(p, q)?;
    check_absolute_continuity(&pairs)?;
    Ok(sum_compensated(pairs.iter().filter(|(_, q)| *q > 0.0).map(|(p, q)| (p - q) * (p - q) / q)))
}

/// `KL(p‖q) = Σ p_j log(p_j / q_j)`.
pub fn kl(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    let pairs = align(p, q)?;
    check_absolute_continuity(&pairs)?;
    let v = sum_compensated(pairs.iter().filter(|(p, _)| *p > 0.0).map(|(p, q)| p * (p / q).ln()));
    Ok(v.max(0.0))
}

/// Squared Hellinger distance `Σ (√p_j − √q_j)²` (no factor ½).
pub fn hellinger_sq(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    let pairs = align(p, q)?;
    Ok(sum_compensated(pairs.iter().map(|(p, q)| {
        let t = p.sqrt() - q.sqrt();
        t * t
    })))
}

/// Total variation `½ Σ |p_j − q_j|`.
pub fn tv(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    let pairs = align(p, q)?;
    Ok(0.5 * sum_compensated(pairs.iter().map(|(p, q)| (p - q).abs())))
}

/// `Var_m(v) = Σ m_j (v_j − v̄)²`, `v̄ = Σ m_j v_j`.
pub fn var_weighted(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(invalid("values and weights differ in length"));
    }
    let mean = sum_compensated(values.iter().zip(weights).map(|(v, w)| v * w));
    Ok(sum_compensated(values.iter().zip(weights).map(|(v, w)| w * (v - mean) * (v - mean))))
}

/// `Var_∞(v) = ((max v − min v) / 2)²`.
pub fn var_inf(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let h = 0.5 * (max - min);
    h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        let pc = PointCloud::from_flat(points.len(), 1, points.to_vec()).unwrap();
        DiscreteMeasure::new(pc, weights.to_vec()).unwrap()
    }

    #[test]
    fn uniform_box_range_and_determinism() {
        let src = RandomSource::new(7, 0);
        let a = sample_uniform_box(0.0, 1.0, 3, 2, &src).unwrap();
        assert_eq!((a.len(), a.dim()), (3, 2));
        assert!(a.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a, sample_uniform_box(0.0, 1.0, 3, 2, &src).unwrap());
    }

    #[test]
    fn uniform_box_mean_within_clt_band() {
        // Var = 1/3 on [-1,1]; 4 sigma of the mean at n = 1e4 is 4·sqrt(1/3e4) ≈ 0.0231.
        let a = sample_uniform_box(-1.0, 1.0, 10_000, 1, &RandomSource::new(11, 0)).unwrap();
        let mean = a.as_slice().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn uniform_box_rejects_bad_arguments() {
        let src = RandomSource::new(0, 0);
        assert!(sample_uniform_box(1.0, 1.0, 3, 1, &src).is_err());
        assert!(sample_uniform_box(0.0, 1.0, 0, 1, &src).is_err());
    }

    #[test]
    fn empirical_weights() {
        let m = DiscreteMeasure::empirical(PointCloud::from_flat(1, 2, vec![0.5, 0.5]).unwrap());
        assert_eq!(m.weights(), &[1.0]);
        let m = DiscreteMeasure::empirical(PointCloud::from_flat(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap());
        assert_eq!(m.weights(), &[0.25; 4]);
        let m = DiscreteMeasure::empirical(PointCloud::from_flat(2, 1, vec![3.0, 3.0]).unwrap());
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn point_cloud_invariants() {
        assert!(PointCloud::from_flat(1, 1, vec![f64::NAN]).is_err());
        assert!(PointCloud::from_flat(0, 1, vec![]).is_err());
        let pc = PointCloud::from_flat(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(pc.clone().within_radius(1.5).is_err());
        assert!(pc.within_radius(2.0).is_ok());
    }

    #[test]
    fn measure_rejects_bad_weights() {
        let pc = PointCloud::from_flat(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(DiscreteMeasure::new(pc.clone(), vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(pc.clone(), vec![1.5, -0.5]).is_err());
        let m = DiscreteMeasure::new(pc, vec![0.25, 0.75]).unwrap();
        assert!(m.require_min_weight(0.2).is_ok());
        assert!(m.require_min_weight(0.3).is_err());
    }

    #[test]
    fn consolidate_merges_exact_duplicates() {
        let third = 1.0 / 3.0;
        let m = line(&[2.0, 2.0, 5.0], &[third, third, 1.0 - 2.0 * third]);
        let c = m.consolidate(0.0).unwrap();
        assert_eq!(c.atoms().as_slice(), &[2.0, 5.0]);
        assert!((c.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.weights()[1] - 1.0 / 3.0).abs() < 1e-15);

        let distinct = line(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(distinct.consolidate(0.0).unwrap(), distinct);
    }

    #[test]
    fn consolidate_with_tolerance_uses_first_occurrence() {
        let m = line(&[0.0, 0.05, 1.0, 0.98], &[0.25; 4]);
        let c = m.consolidate(0.1).unwrap();
        assert_eq!(c.atoms().as_slice(), &[0.0, 1.0]);
        assert_eq!(c.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn consolidate_two_atom_pushforward_counts() {
        let mut rng = RandomSource::new(5, 0).rng();
        let raw: Vec<f64> = (0..1000).map(|_| if rng.gen::<f64>() < 0.3 { -1.0 } else { 1.0 }).collect();
        let count_neg = raw.iter().filter(|&&v| v < 0.0).count();
        let m = DiscreteMeasure::empirical(PointCloud::from_flat(1000, 1, raw.clone()).unwrap());
        let c = m.consolidate(0.0).unwrap();
        assert_eq!(c.len(), 2);
        let neg = (0..2).find(|&j| c.atoms().point(j)[0] < 0.0).unwrap();
        assert!((c.weights()[neg] - count_neg as f64 / 1000.0).abs() < 1e-12);
        assert!((c.weights()[1 - neg] - (1000 - count_neg) as f64 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_examples() {
        let p = line(&[0.0, 1.0], &[0.75, 0.25]);
        let q = line(&[0.0, 1.0], &[0.5, 0.5]);
        assert!((chi2(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(chi2(&q, &q).unwrap(), 0.0);
        // Alignment is by coordinates, not by position.
        let q_rev = line(&[1.0, 0.0], &[0.5, 0.5]);
        assert!((chi2(&p, &q_rev).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chi2_and_kl_require_absolute_continuity() {
        let p = line(&[0.0, 1.0], &[0.5, 0.5]);
        let q = line(&[0.0], &[1.0]);
        assert!(matches!(chi2(&p, &q), Err(Error::DivergenceUndefined { .. })));
        assert!(matches!(kl(&p, &q), Err(Error::DivergenceUndefined { .. })));
        // q having extra atoms is fine.
        assert!(kl(&q, &p).is_ok());
        assert!(hellinger_sq(&p, &q).is_ok());
    }

    #[test]
    fn hellinger_two_atom_closed_form() {
        let r: f64 = 0.1;
        let q0 = line(&[-1.0, 1.0], &[0.5, 0.5]);
        let q1 = line(&[-1.0, 1.0], &[0.5 - r, 0.5 + r]);
        let h2 = hellinger_sq(&q0, &q1).unwrap();
        let closed = 2.0 - ((1.0 + 2.0 * r).sqrt() + (1.0 - 2.0 * r).sqrt());
        assert!((h2 - closed).abs() < 1e-15);
        assert!((h2 - 0.0101276).abs() < 1e-6);
        assert!(h2 <= 4.0 * r * r);
        for f in [kl, hellinger_sq, tv] {
            assert_eq!(f(&q0, &q0).unwrap(), 0.0);
        }
    }

    #[test]
    fn variances() {
        assert_eq!(var_weighted(&[3.0, 3.0], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(var_inf(&[3.0, 3.0]), 0.0);
        assert_eq!(var_weighted(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(var_inf(&[0.0, 1.0]), 0.25);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let m = line(&[0.1, 1.0 / 3.0, -2.5e-7], &[0.2, 0.3, 0.5]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("w,x1\n"));
        assert_eq!(DiscreteMeasure::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let bad = "w,x1\n0.5,0\n0.5,abc\n";
        match DiscreteMeasure::read_csv(bad.as_bytes()) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(DiscreteMeasure::read_csv("v,x1\n1,0\n".as_bytes()).is_err());
    }

    fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, len).prop_map(move |v| {
            let s: f64 = v.iter().sum();
            let mut w: Vec<f64> = v.iter().map(|x| x / s).collect();
            let head: f64 = w[..len - 1].iter().sum();
            w[len - 1] = 1.0 - head;
            w
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn divergence_inequalities(p in simplex(4), q in simplex(4)) {
            let pts = [0.0, 1.0, 2.0, 3.0];
            let (pm, qm) = (line(&pts, &p), line(&pts, &q));
            let c = chi2(&pm, &qm).unwrap();
            let k = kl(&pm, &qm).unwrap();
            let h = hellinger_sq(&pm, &qm).unwrap();
            let t = tv(&pm, &qm).unwrap();
            prop_assert!(c >= 0.0 && k >= 0.0 && h >= 0.0 && t >= 0.0);
            prop_assert!(k <= c + 1e-15);
            prop_assert!(t * t <= h + 1e-15);
        }

        #[test]
        fn weighted_variance_dominates_linf(v in prop::collection::vec(-5.0f64..5.0, 5), w in simplex(5)) {
            let nu_min = w.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(var_weighted(&v, &w).unwrap() >= nu_min * var_inf(&v) - 1e-12);
        }

        #[test]
        fn consolidate_preserves_mass_and_barycenter(
            idx in prop::collection::vec(0usize..4, 1..40),
        ) {
            let atoms = [[0.0, 1.0], [0.5, -2.0], [3.0, 3.0], [-1.0, 0.25]];
            let data: Vec<f64> = idx.iter().flat_map(|&i| atoms[i]).collect();
            let m = DiscreteMeasure::empirical(PointCloud::from_flat(idx.len(), 2, data).unwrap());
            let c = m.consolidate(0.0).unwrap();
            prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in m.mean().iter().zip(c.mean()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
