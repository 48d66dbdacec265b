//! Second-order finite differences for `-h²∂² + V` on an interval or circle.
//!
//! Periodic problems whose potential is even about the origin split into a
//! Neumann-type (cosine) and a Dirichlet-type (sine) half problem, each of
//! which is a plain symmetric tridiagonal matrix. Other periodic potentials
//! go through a bordered solver: the wraparound node is eliminated by a
//! Schur complement, which gives both the Sturm count and the shifted solves.

use serde::{Deserialize, Serialize};

use super::tridiag::{bisect_index, fix_sign, normalize, orthogonalize, start_vector, ShiftedLu, SymTridiag};
use crate::error::{QciError, Result};

pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `n` nodes including both endpoints.
    Closed,
    /// `n` nodes on `[lo, hi)`, `hi` identified with `lo`.
    Periodic,
    /// `n` cell midpoints of `[lo, hi]`.
    CellCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub kind: GridKind,
}

impl Grid1D {
    fn checked(lo: f64, hi: f64, n: usize, kind: GridKind) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(QciError::InvalidInput(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {n}"
            )));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(QciError::InvalidInput(format!("bad grid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, n, kind })
    }

    pub fn closed(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::checked(lo, hi, n, GridKind::Closed)
    }

    pub fn periodic(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::checked(lo, hi, n, GridKind::Periodic)
    }

    pub fn cell_centered(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::checked(lo, hi, n, GridKind::CellCentered)
    }

    pub fn spacing(&self) -> f64 {
        match self.kind {
            GridKind::Closed => (self.hi - self.lo) / (self.n - 1) as f64,
            GridKind::Periodic | GridKind::CellCentered => (self.hi - self.lo) / self.n as f64,
        }
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        let dx = self.spacing();
        match self.kind {
            GridKind::Closed | GridKind::Periodic => self.lo + i as f64 * dx,
            GridKind::CellCentered => self.lo + (i as f64 + 0.5) * dx,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.point(i))).collect()
    }

    /// Nearest node to `x` (periodic grids wrap).
    pub fn nearest(&self, x: f64) -> usize {
        let dx = self.spacing();
        let t = match self.kind {
            GridKind::Closed | GridKind::Periodic => (x - self.lo) / dx,
            GridKind::CellCentered => (x - self.lo) / dx - 0.5,
        };
        let i = t.round();
        match self.kind {
            GridKind::Periodic => (i as i64).rem_euclid(self.n as i64) as usize,
            _ => i.clamp(0.0, (self.n - 1) as f64) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Periodic,
    /// Smooth continuation through a pole of a surface of revolution.
    Regularity,
}

/// Eigenvalues accepted in `[center - halfWidth·h, center + halfWidth·h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralWindow {
    pub center: f64,
    #[serde(rename = "halfWidth", alias = "half_width")]
    pub half_width: f64,
}

impl SpectralWindow {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !center.is_finite() {
            return Err(QciError::InvalidInput(format!(
                "bad spectral window ({center}, {half_width})"
            )));
        }
        Ok(Self { center, half_width })
    }

    /// The default `5h` window around `E₁ = 1`.
    pub fn unit() -> Self {
        Self {
            center: 1.0,
            half_width: 5.0,
        }
    }

    pub fn bounds(&self, h: f64) -> (f64, f64) {
        (self.center - self.half_width * h, self.center + self.half_width * h)
    }

    pub fn contains(&self, h: f64, e: f64) -> bool {
        let (lo, hi) = self.bounds(h);
        e >= lo && e <= hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution1D {
    pub lambda: f64,
    /// Samples on every node of `grid` (boundary zeros included).
    pub values: Vec<f64>,
    pub grid: Grid1D,
    pub bc: Boundary,
    /// `‖(T - λ)y‖∞ / ‖y‖∞` for the symmetric matrix that was solved.
    pub residual: f64,
    /// Ordinal among the eigenvalues of the solved branch. Split periodic
    /// problems use `j ≥ 0` for even and `-(j + 1)` for odd states.
    pub index: i64,
}

impl EigenSolution1D {
    pub fn max_abs(&self) -> (f64, usize) {
        self.values.iter().enumerate().fold(
            (0.0, 0),
            |(m, k), (i, v)| if v.abs() > m { (v.abs(), i) } else { (m, k) },
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()
    }
}

fn check_potential(potential: &[f64], range: std::ops::Range<usize>) -> Result<()> {
    for i in range {
        if !potential[i].is_finite() {
            return Err(QciError::InvalidInput(format!("potential is not finite at node {i}")));
        }
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(QciError::InvalidInput(format!("h must be positive, got {h}")));
    }
    Ok(())
}

/// Eigenpairs of `t` in `[lo, hi]`, refined by the Rayleigh quotient.
pub(crate) fn windowed_pairs(t: &SymTridiag, lo: f64, hi: f64) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let pairs = t.eigenpairs_in(lo, hi.next_up())?;
    Ok(pairs
        .into_iter()
        .map(|(lambda, y)| {
            let ty = t.apply(&y);
            let rq: f64 = ty.iter().zip(&y).map(|(a, b)| a * b).sum();
            let lambda = if (rq - lambda).abs() <= 1e-8 * (1.0 + lambda.abs()) {
                rq
            } else {
                lambda
            };
            let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let res = ty
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - lambda * b).abs())
                .fold(0.0, f64::max)
                / ymax;
            (lambda, y, res)
        })
        .collect())
}

/// `-h²∂² + V` with zero values at both endpoints of a closed grid.
pub fn solve_sl_dirichlet(
    potential: &[f64],
    h: f64,
    grid: &Grid1D,
    window: SpectralWindow,
) -> Result<Vec<EigenSolution1D>> {
    check_h(h)?;
    if grid.kind != GridKind::Closed || potential.len() != grid.n {
        return Err(QciError::InvalidInput(
            "Dirichlet problems need a closed grid and one potential sample per node".into(),
        ));
    }
    check_potential(potential, 1..grid.n - 1)?;
    let dx = grid.spacing();
    let c = h * h / (dx * dx);
    let m = grid.n - 2;
    let t = SymTridiag::new(
        potential[1..grid.n - 1].iter().map(|v| 2.0 * c + v).collect(),
        vec![-c; m - 1],
    );
    let (lo, hi) = window.bounds(h);
    let k0 = t.count_below(lo) as i64;
    let scale = 1.0 / dx.sqrt();
    windowed_pairs(&t, lo, hi)?
        .into_iter()
        .enumerate()
        .map(|(i, (lambda, y, residual))| {
            let mut values = Vec::with_capacity(grid.n);
            values.push(0.0);
            values.extend(y.iter().map(|v| v * scale));
            values.push(0.0);
            Ok(EigenSolution1D {
                lambda,
                values,
                grid: *grid,
                bc: Boundary::Dirichlet,
                residual,
                index: k0 + i as i64,
            })
        })
        .collect()
}

/// Half-period pieces of a periodic operator with an even potential.
#[derive(Debug, Clone)]
pub(crate) struct EvenPeriodic {
    /// Nodes `0..=n/2`, symmetrized with end weights `1/2`.
    pub even: SymTridiag,
    /// Nodes `1..n/2`.
    pub odd: SymTridiag,
    pub n: usize,
}

impl EvenPeriodic {
    pub(crate) fn is_even(potential: &[f64]) -> bool {
        let n = potential.len();
        if n % 2 != 0 || n < 4 {
            return false;
        }
        let scale = potential.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        (1..n / 2).all(|i| (potential[i] - potential[n - i]).abs() <= 1e-12 * scale)
    }

    /// `c = h²/dx²`; `potential` has one sample per periodic node.
    pub(crate) fn new(potential: &[f64], c: f64) -> Self {
        let n = potential.len();
        let half = n / 2;
        let even_diag: Vec<f64> = (0..=half).map(|i| 2.0 * c + potential[i]).collect();
        let mut even_off = vec![-c; half];
        even_off[0] = -std::f64::consts::SQRT_2 * c;
        even_off[half - 1] = -std::f64::consts::SQRT_2 * c;
        let odd_diag: Vec<f64> = (1..half).map(|i| 2.0 * c + potential[i]).collect();
        let odd_off = vec![-c; half.saturating_sub(2)];
        Self {
            even: SymTridiag::new(even_diag, even_off),
            odd: SymTridiag::new(odd_diag, odd_off),
            n,
        }
    }

    pub(crate) fn branch(&self, odd: bool) -> &SymTridiag {
        if odd {
            &self.odd
        } else {
            &self.even
        }
    }

    /// Periodic samples from a unit branch eigenvector (unit `ℓ²` norm on
    /// the full circle).
    pub(crate) fn unfold(&self, odd: bool, y: &[f64]) -> Vec<f64> {
        let (n, half) = (self.n, self.n / 2);
        let mut u = vec![0.0; n];
        if odd {
            for (k, &v) in y.iter().enumerate() {
                u[k + 1] = v;
                u[n - k - 1] = -v;
            }
        } else {
            let r = std::f64::consts::SQRT_2;
            for (i, &v) in y.iter().enumerate() {
                let w = if i == 0 || i == half { v * r } else { v };
                u[i] = w;
                u[(n - i) % n] = w;
            }
        }
        normalize(&mut u);
        u
    }
}

/// Periodic operator with the wraparound node `n - 1` eliminated.
struct Bordered {
    inner: SymTridiag,
    corner: f64,
    coupling: f64,
    norm: f64,
}

impl Bordered {
    fn new(potential: &[f64], c: f64) -> Self {
        let n = potential.len();
        let inner = SymTridiag::new(
            potential[..n - 1].iter().map(|v| 2.0 * c + v).collect(),
            vec![-c; n - 2],
        );
        let norm = inner.norm_inf() + 2.0 * c;
        Self {
            inner,
            corner: 2.0 * c + potential[n - 1],
            coupling: -c,
            norm,
        }
    }

    fn border(&self) -> Vec<f64> {
        let m = self.inner.len();
        let mut b = vec![0.0; m];
        b[0] = self.coupling;
        b[m - 1] += self.coupling;
        b
    }

    fn count_below(&self, sigma: f64) -> usize {
        let lu = ShiftedLu::factor(&self.inner.diag, &self.inner.off, sigma, self.norm);
        let b = self.border();
        let x = lu.solve(&b);
        let s = self.corner - sigma - b.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
        self.inner.count_below(sigma) + usize::from(s < 0.0)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.inner.len();
        let mut out = self.inner.apply(&v[..m]);
        out[0] += self.coupling * v[m];
        out[m - 1] += self.coupling * v[m];
        out.push(self.corner * v[m] + self.coupling * (v[0] + v[m - 1]));
        out
    }

    fn eigenvector(&self, lambda: f64, cluster: &[&[f64]], seed: u64) -> Result<Vec<f64>> {
        let m = self.inner.len();
        let lu = ShiftedLu::factor(&self.inner.diag, &self.inner.off, lambda, self.norm);
        let b = self.border();
        let z = lu.solve(&b);
        let mut s = self.corner - lambda - b.iter().zip(&z).map(|(p, q)| p * q).sum::<f64>();
        if s == 0.0 {
            s = f64::EPSILON * self.norm;
        }
        let mut x = start_vector(m + 1, seed);
        for _ in 0..5 {
            for v in cluster {
                orthogonalize(&mut x, v);
            }
            normalize(&mut x);
            let y = lu.solve(&x[..m]);
            let last = (x[m] - b.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>()) / s;
            let mut next: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - zi * last).collect();
            next.push(last);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(QciError::SolverDivergence(5));
            }
            x = next;
        }
        for v in cluster {
            orthogonalize(&mut x, v);
        }
        normalize(&mut x);
        fix_sign(&mut x);
        Ok(x)
    }
}

/// `-h²∂² + V` on a circle.
pub fn solve_sl_periodic(
    potential: &[f64],
    h: f64,
    grid: &Grid1D,
    window: SpectralWindow,
) -> Result<Vec<EigenSolution1D>> {
    check_h(h)?;
    if grid.kind != GridKind::Periodic || potential.len() != grid.n {
        return Err(QciError::InvalidInput(
            "periodic problems need a periodic grid and one potential sample per node".into(),
        ));
    }
    check_potential(potential, 0..grid.n)?;
    let dx = grid.spacing();
    let c = h * h / (dx * dx);
    let (lo, hi) = window.bounds(h);
    let scale = 1.0 / dx.sqrt();
    let mut out = Vec::new();
    if EvenPeriodic::is_even(potential) {
        let op = EvenPeriodic::new(potential, c);
        for odd in [false, true] {
            let t = op.branch(odd);
            let k0 = t.count_below(lo) as i64;
            for (i, (lambda, y, residual)) in windowed_pairs(t, lo, hi)?.into_iter().enumerate() {
                let k = k0 + i as i64;
                let values = op.unfold(odd, &y).into_iter().map(|v| v * scale).collect();
                let index = if odd { -(k + 1) } else { k };
                out.push(EigenSolution1D {
                    lambda,
                    values,
                    grid: *grid,
                    bc: Boundary::Periodic,
                    residual,
                    index,
                });
            }
        }
    } else {
        let op = Bordered::new(potential, c);
        let (k0, k1) = (op.count_below(lo), op.count_below(hi.next_up()));
        let cluster_tol = 1e-10 * op.norm.max(1.0);
        let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
        for k in k0..k1 {
            let lambda = bisect_index(|s| op.count_below(s), k, lo, hi.next_up());
            let cluster: Vec<&[f64]> = found
                .iter()
                .filter(|(l, _)| (l - lambda).abs() <= cluster_tol)
                .map(|(_, v)| v.as_slice())
                .collect();
            let y = op.eigenvector(lambda, &cluster, k as u64)?;
            found.push((lambda, y));
        }
        for (i, (lambda, y)) in found.into_iter().enumerate() {
            let ty = op.apply(&y);
            let rq: f64 = ty.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lambda = if (rq - lambda).abs() <= 1e-8 * (1.0 + lambda.abs()) {
                rq
            } else {
                lambda
            };
            let residual = ty
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - lambda * b).abs())
                .fold(0.0, f64::max)
                / ymax;
            let values = y.iter().map(|v| v * scale).collect();
            out.push(EigenSolution1D {
                lambda,
                values,
                grid: *grid,
                bc: Boundary::Periodic,
                residual,
                index: (k0 + i) as i64,
            });
        }
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.index.cmp(&b.index)));
    Ok(out)
}

/// `‖(T - λ)u‖∞` for the periodic three-point operator, in the original
/// (unsymmetrized) variables.
pub fn periodic_residual(potential: &[f64], h: f64, dx: f64, lambda: f64, u: &[f64]) -> f64 {
    let n = u.len();
    let c = h * h / (dx * dx);
    (0..n)
        .map(|i| {
            let (l, r) = (u[(i + n - 1) % n], u[(i + 1) % n]);
            (c * (2.0 * u[i] - l - r) + potential[i] * u[i] - lambda * u[i]).abs()
        })
        .fold(0.0, f64::max)
}
