//! Symmetric tridiagonal eigensolvers.
//!
//! Windowed spectra use Sturm-sequence bisection for the eigenvalues and
//! inverse iteration (pivoted tridiagonal LU) for the eigenvectors, which is
//! linear in the matrix size per eigenpair. [`SymTridiag::full_eigen`] is
//! the implicit-shift QL algorithm for the whole spectrum.

use crate::error::{QciError, Result};

const MAX_BISECTIONS: usize = 256;
const INVERSE_STEPS: usize = 4;
/// Cap on the extra steps that resolve exponentially small tails.
const INVERSE_MAX_STEPS: usize = 64;
/// Entries below this fraction of the maximum are not tracked.
const TAIL_FLOOR: f64 = 1e-290;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `sigma` (Sturm count).
    pub fn count_below(&self, sigma: f64) -> usize {
        sturm_count(&self.diag, &self.off, sigma)
    }

    /// The `k`-th smallest eigenvalue (0-based), by bisection inside a
    /// bracket `lo ≤ λ_k ≤ hi`.
    pub fn eigenvalue(&self, k: usize, lo: f64, hi: f64) -> f64 {
        bisect_index(|s| self.count_below(s), k, lo, hi)
    }

    /// Eigenvalues in `[lo, hi)`, ascending.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let (lo, hi) = (lo.max(glo - 1.0), hi.min(ghi + 1.0));
        if !(lo < hi) {
            return Vec::new();
        }
        let (k0, k1) = (self.count_below(lo), self.count_below(hi));
        (k0..k1).map(|k| self.eigenvalue(k, lo, hi)).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `‖(T - λ)v‖∞`.
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(tv, x)| (tv - lambda * x).abs())
            .fold(0.0, f64::max)
    }

    /// Unit eigenvector for an accurate eigenvalue `lambda`, orthogonalized
    /// against `cluster` (unit eigenvectors of nearby eigenvalues).
    pub fn eigenvector(&self, lambda: f64, cluster: &[&[f64]], seed: u64) -> Result<Vec<f64>> {
        let n = self.len();
        let lu = ShiftedLu::factor(&self.diag, &self.off, lambda, self.norm_inf());
        let mut x = start_vector(n, seed);
        for v in cluster {
            orthogonalize(&mut x, v);
        }
        normalize(&mut x);
        // Each step suppresses other modes by roughly the distance to the
        // nearest neighbor, so tails deep in a forbidden region need more
        // than the few steps that settle the bulk. Iterate until every entry
        // above the floor is stable componentwise.
        for step in 0..INVERSE_MAX_STEPS {
            let mut y = lu.solve(&x);
            for v in cluster {
                orthogonalize(&mut y, v);
            }
            let norm = l2(&y);
            if !norm.is_finite() || norm == 0.0 {
                return Err(QciError::SolverDivergence(step + 1));
            }
            y.iter_mut().for_each(|e| *e /= norm);
            let settled = step + 1 >= INVERSE_STEPS && {
                let floor = TAIL_FLOOR * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                x.iter()
                    .zip(&y)
                    .all(|(a, b)| b.abs() < floor || (a.abs() - b.abs()).abs() <= 1e-6 * b.abs())
            };
            x = y;
            if settled {
                break;
            }
        }
        fix_sign(&mut x);
        Ok(x)
    }

    /// Eigenpairs with eigenvalues in `[lo, hi)`.
    pub fn eigenpairs_in(&self, lo: f64, hi: f64) -> Result<Vec<(f64, Vec<f64>)>> {
        let values = self.eigenvalues_in(lo, hi);
        let cluster_tol = 1e-10 * self.norm_inf().max(1.0);
        let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(values.len());
        for (i, &lambda) in values.iter().enumerate() {
            let cluster: Vec<&[f64]> = out
                .iter()
                .filter(|(l, _)| (l - lambda).abs() <= cluster_tol)
                .map(|(_, v)| v.as_slice())
                .collect();
            let v = self.eigenvector(lambda, &cluster, i as u64)?;
            out.push((lambda, v));
        }
        Ok(out)
    }

    /// All eigenpairs by implicit-shift QL. Column `k` of the returned
    /// vectors is the unit eigenvector of the `k`-th (ascending) eigenvalue.
    pub fn full_eigen(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        // z[i] is column i, stored contiguously.
        let mut z: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut c = vec![0.0; n];
                c[i] = 1.0;
                c
            })
            .collect();
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(QciError::SolverDivergence(iter));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let (left, right) = z.split_at_mut(i + 1);
                    let (zi, zi1) = (&mut left[i], &mut right[0]);
                    for k in 0..n {
                        let t = zi1[k];
                        zi1[k] = s * zi[k] + c * t;
                        zi[k] = c * zi[k] - s * t;
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| {
                let mut v = z[i].clone();
                fix_sign(&mut v);
                v
            })
            .collect();
        Ok((values, vectors))
    }
}

pub(crate) fn sturm_count(diag: &[f64], off: &[f64], sigma: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - sigma;
    if q == 0.0 {
        q = -tiny;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        q = diag[i] - sigma - off[i - 1] * off[i - 1] / q;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bisection for the `k`-th eigenvalue given a counting function
/// `count(σ) = #{λ < σ}` and a bracket.
pub(crate) fn bisect_index(count: impl Fn(f64) -> usize, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        if count(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pivoted LU of `T - σI` in the layout of LAPACK `dgtsv`: `U` has two
/// superdiagonals `du`, `du2`.
pub(crate) struct ShiftedLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    pub(crate) fn factor(diag: &[f64], off: &[f64], sigma: f64, scale: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut d: Vec<f64> = diag.iter().map(|x| x - sigma).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                mult[i] = fact;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                mult[i] = fact;
                swapped[i] = true;
            }
            dl[i] = 0.0;
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            d,
            du,
            du2,
            mult,
            swapped,
        }
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.mult[i] * b[i + 1];
            } else {
                b[i + 1] -= self.mult[i] * b[i];
            }
        }
        if n == 0 {
            return b;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        b
    }
}

/// Deterministic, well-spread start vector for inverse iteration.
pub(crate) fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ seed.wrapping_mul(0xD1B5_4A32_D192_ED03);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn normalize(v: &mut [f64]) {
    let n = l2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub(crate) fn orthogonalize(x: &mut [f64], against: &[f64]) {
    let dot: f64 = x.iter().zip(against).map(|(a, b)| a * b).sum();
    x.iter_mut().zip(against).for_each(|(a, b)| *a -= dot * b);
}

/// Sign convention: the entry of largest magnitude is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        let bis = t.eigenvalues_in(-1.0, 5.0);
        let (ql, _) = t.full_eigen().unwrap();
        for k in 0..n {
            assert!((bis[k] - exact[k]).abs() < 1e-13);
            assert!((ql[k] - exact[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_iteration_matches_ql_vectors() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| ((i * i) as f64 * 0.37).sin() * 3.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 1.0 + 0.5 * (i as f64).cos()).collect();
        let t = SymTridiag::new(diag, off);
        let (values, vectors) = t.full_eigen().unwrap();
        let pairs = t.eigenpairs_in(values[10] - 1e-9, values[20] + 1e-9).unwrap();
        assert_eq!(pairs.len(), 11);
        for (idx, (lambda, v)) in pairs.iter().enumerate() {
            assert!((lambda - values[10 + idx]).abs() < 1e-12);
            let dot: f64 = v.iter().zip(&vectors[10 + idx]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10, "{dot}");
            assert!(t.residual(*lambda, v) < 1e-12);
        }
    }

    #[test]
    fn pivoted_solve_is_exact() {
        let t = SymTridiag::new(vec![0.0, 1.0, -2.0, 0.5, 3.0], vec![2.0, -1.0, 0.25, 4.0]);
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.5];
        let b = t.apply(&x);
        let lu = ShiftedLu::factor(&t.diag, &t.off, 0.0, t.norm_inf());
        let y = lu.solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13, "{x:?} {y:?}");
        }
    }

    #[test]
    fn sturm_count_brackets() {
        let t = laplacian(10);
        assert_eq!(t.count_below(-0.1), 0);
        assert_eq!(t.count_below(4.1), 10);
        assert_eq!(t.count_below(2.0 + 1e-12), 5);
    }
}
