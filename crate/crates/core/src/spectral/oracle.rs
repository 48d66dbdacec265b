//! Brute-force 2D eigensolver used to check the separated solvers.
//!
//! The full operator `-h² Vol⁻¹ Δ` is discretized on a tensor grid,
//! symmetrized by the volume weights and solved by shift-invert Lanczos.
//! Shifted matrices are factored as banded `LDLᵀ`; the inertia of each
//! factorization counts eigenvalues below the shift, which certifies that no
//! eigenvalue in the window was missed.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::eigenfunction::{JointEigenfunction, Layout, QuantumNumbers};
use super::liouville::{default_lambda_scan, liouville_joint_eigs, LiouvilleOptions, Separation};
use super::revolution::{sor_joint_eigs, SorOptions};
use super::sturm_liouville::SpectralWindow;
use super::tridiag::{start_vector, SymTridiag};
use crate::error::{QciError, Result};
use crate::models::{LiouvilleData, QciModel, RevolutionProfile};

pub const MAX_AXIS_POINTS: usize = 128;
pub const MIN_H: f64 = 1.0 / 40.0;
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;
const LANCZOS_STEPS: usize = 160;
const MAX_REFINEMENTS: usize = 8;
const RESIDUAL_TOL: f64 = 1e-9;
/// Oracle eigenvalues closer than this (relative) are one cluster.
const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleGrid {
    /// Points on the first axis (`x₁` or `r`).
    pub n1: usize,
    /// Points on the second axis (`x₂` or `θ`).
    pub n2: usize,
}

impl OracleGrid {
    pub fn square(n: usize) -> Self {
        Self { n1: n, n2: n }
    }
}

/// Symmetric sparse matrix in CSR form.
struct Csr {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Csr {
    fn n(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `A - σ = L D Lᵀ` with unit lower-banded `L`, no pivoting.
struct BandLdl {
    n: usize,
    b: usize,
    /// Row `i` holds `L[i][i-b..i]`.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdl {
    fn factor(a: &Csr, sigma: f64) -> Result<Self> {
        let n = a.n();
        let b = a.bandwidth();
        let w = b;
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for (i, row) in a.rows.iter().enumerate() {
            for &(j, v) in row {
                if j < i {
                    l[i * w + (j + w - i)] = v;
                } else if j == i {
                    diag[i] = v - sigma;
                }
            }
        }
        let tiny = 1e-14 * (a.norm_inf() + sigma.abs());
        // Row-oriented: row i's multipliers need rows j < i finished.
        let mut t = vec![0.0; w];
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..i {
                // l[i][j] currently holds A_ij; subtract Σ_k L_ik d_k L_jk.
                let k0 = lo.max(j.saturating_sub(w));
                let mut s = l[i * w + (j + w - i)];
                for k in k0..j {
                    s -= t[k - lo] * l[j * w + (k + w - j)];
                }
                t[j - lo] = s;
                l[i * w + (j + w - i)] = s / d[j];
            }
            let mut dd = diag[i];
            for j in lo..i {
                dd -= t[j - lo] * l[i * w + (j + w - i)];
            }
            if !(dd.abs() > tiny) {
                return Err(QciError::LinearSolveFailure(format!(
                    "pivot {dd:e} at row {i} for shift {sigma}"
                )));
            }
            d[i] = dd;
        }
        Ok(Self { n, b, l, d })
    }

    fn negatives(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.b);
        let mut z = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = z[i];
            for j in lo..i {
                s -= self.l[i * w + (j + w - i)] * z[j];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(w);
            let zi = z[i];
            for j in lo..i {
                z[j] -= self.l[i * w + (j + w - i)] * zi;
            }
        }
        z
    }
}

/// Factors with a slightly moved shift when a pivot vanishes.
fn factor_near(a: &Csr, sigma: f64) -> Result<(BandLdl, f64)> {
    let mut s = sigma;
    for k in 0..4 {
        match BandLdl::factor(a, s) {
            Ok(f) => return Ok((f, s)),
            Err(e) if k == 3 => return Err(e),
            Err(_) => s = sigma + (k as f64 + 1.0) * 1e-9 * (1.0 + sigma.abs()),
        }
    }
    unreachable!()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(w, q);
        axpy(w, -c, q);
    }
}

/// Converged eigenpairs of `a` in `[lo, hi]` from one shift-invert Lanczos
/// run at `sigma`, orthogonal to `locked`.
fn lanczos_run(
    a: &Csr,
    ldl: &BandLdl,
    sigma: f64,
    lo: f64,
    hi: f64,
    locked: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = a.n();
    let steps = LANCZOS_STEPS.min(n.saturating_sub(locked.len()));
    if steps == 0 {
        return Ok(Vec::new());
    }
    let mut q = start_vector(n, seed).into_iter().map(|v| v - 1.0).collect::<Vec<_>>();
    project_out(&mut q, locked);
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for j in 0..steps {
        let mut w = ldl.solve(&basis[j]);
        let aj = dot(&w, &basis[j]);
        alpha.push(aj);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            project_out(&mut w, locked);
            project_out(&mut w, &basis);
        }
        let bj = dot(&w, &w).sqrt();
        if j + 1 == steps || !(bj > 1e-12 * aj.abs().max(1e-300)) {
            break;
        }
        beta.push(bj);
        w.iter_mut().for_each(|v| *v /= bj);
        basis.push(w);
    }
    let k = alpha.len();
    let (theta, s) = SymTridiag::new(alpha, beta[..k - 1].to_vec()).full_eigen()?;
    let mut out = Vec::new();
    for (t, col) in theta.iter().zip(&s) {
        if *t == 0.0 {
            continue;
        }
        let lambda = sigma + 1.0 / t;
        if lambda < lo || lambda > hi {
            continue;
        }
        let mut y = vec![0.0; n];
        for (c, qv) in col.iter().zip(&basis) {
            axpy(&mut y, *c, qv);
        }
        let ny = dot(&y, &y).sqrt();
        y.iter_mut().for_each(|v| *v /= ny);
        let ay = a.apply(&y);
        let rq = dot(&ay, &y);
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = ay.iter().zip(&y).map(|(p, v)| (p - rq * v).abs()).fold(0.0, f64::max);
        if res <= RESIDUAL_TOL * (1.0 + rq.abs()) * ymax && rq >= lo && rq <= hi {
            out.push((rq, y));
        }
    }
    Ok(out)
}

/// Eigenvalue count below `x` (or a point within 1e-9 of it), and that point.
fn count_below(a: &Csr, x: f64) -> Result<(usize, f64)> {
    let (f, s) = factor_near(a, x)?;
    Ok((f.negatives(), s))
}

/// Adds Ritz pairs not already spanned by `found`.
fn absorb(found: &mut Vec<(f64, Vec<f64>)>, new: Vec<(f64, Vec<f64>)>) -> usize {
    let mut added = 0;
    for (l, mut v) in new {
        let before = dot(&v, &v);
        for _ in 0..2 {
            for (_, q) in found.iter() {
                let c = dot(&v, q);
                axpy(&mut v, -c, q);
            }
        }
        let after = dot(&v, &v);
        if after > 0.5 * before {
            let nv = after.sqrt();
            v.iter_mut().for_each(|e| *e /= nv);
            found.push((l, v));
            added += 1;
        }
    }
    added
}

/// All eigenpairs of `a` in `[lo, hi)`, certified complete by inertia.
/// Intervals still owed eigenvalues get another Lanczos run at their
/// midpoint, and are bisected when runs stop producing.
fn eigenpairs_in(a: &Csr, lo: f64, hi: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    const PIECES: usize = 4;
    let mut edges = Vec::with_capacity(PIECES + 1);
    for p in 0..=PIECES {
        edges.push(count_below(a, lo + (hi - lo) * p as f64 / PIECES as f64)?);
    }
    let (lo, hi) = (edges[0].1, edges[PIECES].1);
    let expected = edges[PIECES].0 - edges[0].0;
    let mut queue: Vec<((usize, f64), (usize, f64))> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut seed = 0u64;
    let mut splits = 0;
    while let Some(((c_p, p), (c_q, q))) = queue.pop() {
        let owed = c_q - c_p;
        let have = |found: &[(f64, Vec<f64>)]| found.iter().filter(|(l, _)| *l >= p && *l < q).count();
        let mut idle = 0;
        while have(&found) < owed && idle < 2 {
            let (ldl, sigma) = factor_near(a, 0.5 * (p + q))?;
            let locked: Vec<Vec<f64>> = found.iter().map(|(_, v)| v.clone()).collect();
            seed += 1;
            let new = lanczos_run(a, &ldl, sigma, lo, hi, &locked, seed)?;
            if absorb(&mut found, new) == 0 {
                idle += 1;
            }
        }
        let got = have(&found);
        if got > owed {
            return Err(QciError::LinearSolveFailure(format!(
                "found {got} eigenvalues in [{p}, {q}), inertia says {owed}"
            )));
        }
        if got < owed {
            splits += 1;
            if splits > MAX_REFINEMENTS * PIECES {
                return Err(QciError::SolverDivergence(splits));
            }
            let mid = count_below(a, 0.5 * (p + q))?;
            queue.push(((c_p, p), mid));
            queue.push((mid, (c_q, q)));
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    if found.len() != expected {
        return Err(QciError::LinearSolveFailure(format!(
            "found {} eigenvalues, inertia says {expected}",
            found.len()
        )));
    }
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEigenpair {
    pub lambda: f64,
    /// `u` on the grid, first axis slow; `Σ |u|² dVol = 1`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub h: f64,
    pub grid: OracleGrid,
    pub pairs: Vec<OracleEigenpair>,
    /// Resolution warnings; the result is still returned.
    pub warnings: Vec<String>,
}

/// The discretized operator in a banded ordering, with the volume weight of
/// each node in natural (first axis slow) order.
struct Discretization {
    matrix: Csr,
    /// Natural index of matrix row `p`.
    natural: Vec<usize>,
    weight: Vec<f64>,
}

/// `0, n-1, 1, n-2, ...`: periodic neighbors end up at most two apart.
fn folded(n: usize) -> Vec<usize> {
    let mut pos = vec![0; n];
    let (mut a, mut b) = (0usize, n - 1);
    let mut k = 0;
    while a <= b {
        pos[a] = k;
        k += 1;
        if a != b {
            pos[b] = k;
            k += 1;
        }
        a += 1;
        if b == 0 {
            break;
        }
        b -= 1;
    }
    pos
}

fn liouville_operator(data: &LiouvilleData, h: f64, g: OracleGrid) -> Discretization {
    let (n1, n2) = (g.n1, g.n2);
    let (d1, d2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
    let (c1, c2) = (h * h / (d1 * d1), h * h / (d2 * d2));
    let m = |i: usize, j: usize| data.a.value(i as f64 * d1) + data.b.value(j as f64 * d2);
    let fold = folded(n1);
    let pos = |i: usize, j: usize| fold[i] * n2 + j;
    let mut rows = vec![Vec::new(); n1 * n2];
    let mut natural = vec![0; n1 * n2];
    let mut weight = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let p = pos(i, j);
            natural[p] = i * n2 + j;
            let mij = m(i, j);
            weight[i * n2 + j] = mij * d1 * d2;
            let mut row = vec![(p, (2.0 * c1 + 2.0 * c2) / mij)];
            for (ii, jj, c) in [
                ((i + 1) % n1, j, c1),
                ((i + n1 - 1) % n1, j, c1),
                (i, (j + 1) % n2, c2),
                (i, (j + n2 - 1) % n2, c2),
            ] {
                row.push((pos(ii, jj), -c / (mij * m(ii, jj)).sqrt()));
            }
            rows[p] = merge(row);
        }
    }
    Discretization {
        matrix: Csr { rows },
        natural,
        weight,
    }
}

fn revolution_operator(profile: &RevolutionProfile, h: f64, g: OracleGrid) -> Discretization {
    let (nr, nt) = (g.n1, g.n2);
    let dr = 2.0 / nr as f64;
    let dt = 2.0 * PI / nt as f64;
    let f: Vec<f64> = (0..nr).map(|i| profile.f(-1.0 + (i as f64 + 0.5) * dr)).collect();
    let face = |i: usize| {
        if i == 0 || i == nr {
            0.0
        } else {
            profile.f(-1.0 + i as f64 * dr)
        }
    };
    let (cr, ct) = (h * h / (dr * dr), h * h / (dt * dt));
    let mut rows = vec![Vec::new(); nr * nt];
    let mut weight = vec![0.0; nr * nt];
    for i in 0..nr {
        for j in 0..nt {
            let p = i * nt + j;
            weight[p] = f[i] * dr * dt;
            let ang = ct / (f[i] * f[i]);
            let mut row = vec![(p, cr * (face(i) + face(i + 1)) / f[i] + 2.0 * ang)];
            row.push((i * nt + (j + 1) % nt, -ang));
            row.push((i * nt + (j + nt - 1) % nt, -ang));
            if i > 0 {
                row.push(((i - 1) * nt + j, -cr * face(i) / (f[i] * f[i - 1]).sqrt()));
            }
            if i + 1 < nr {
                row.push(((i + 1) * nt + j, -cr * face(i + 1) / (f[i] * f[i + 1]).sqrt()));
            }
            rows[p] = merge(row);
        }
    }
    Discretization {
        matrix: Csr { rows },
        natural: (0..nr * nt).collect(),
        weight,
    }
}

/// Sums duplicate columns (tiny periodic grids) and sorts.
fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

fn check_request(model: &QciModel, h: f64, g: OracleGrid) -> Result<()> {
    if !matches!(model, QciModel::Revolution(_) | QciModel::Liouville(_)) {
        return Err(QciError::Unsupported(format!(
            "the 2D oracle covers sor and liouville, not {}",
            model.name()
        )));
    }
    if !(h >= MIN_H) {
        return Err(QciError::InvalidInput(format!("the oracle needs h ≥ 1/40, got {h}")));
    }
    if g.n1 > MAX_AXIS_POINTS || g.n2 > MAX_AXIS_POINTS || g.n1 < 4 || g.n2 < 4 {
        return Err(QciError::InvalidInput(format!(
            "oracle grid {}×{} outside [4, {MAX_AXIS_POINTS}] per axis",
            g.n1, g.n2
        )));
    }
    if matches!(model, QciModel::Liouville(_)) && (g.n1 % 2 == 1 || g.n2 % 2 == 1) {
        return Err(QciError::InvalidInput(
            "periodic oracle axes need an even point count".into(),
        ));
    }
    Ok(())
}

/// Points per shortest classical wavelength on each axis.
fn resolution(model: &QciModel, h: f64, e_hi: f64, g: OracleGrid) -> [f64; 2] {
    let e = e_hi.max(0.0);
    match model {
        QciModel::Liouville(d) => {
            let xi = (e * (d.a_max + d.b_max)).sqrt().max(1e-300);
            let wl = 2.0 * PI * h / xi;
            [wl * g.n1 as f64, wl * g.n2 as f64]
        }
        QciModel::Revolution(p) => {
            let wl = 2.0 * PI * h / e.sqrt().max(1e-300);
            let wl_theta = 2.0 * PI * h / (e.sqrt() * p.max_value()).max(1e-300);
            [wl / (2.0 / g.n1 as f64), wl_theta / (2.0 * PI / g.n2 as f64)]
        }
        _ => [f64::INFINITY; 2],
    }
}

/// Eigenpairs of the full 2D discretization with eigenvalues in the window.
pub fn oracle_2d(model: &QciModel, h: f64, window: SpectralWindow, grid: OracleGrid) -> Result<OracleResult> {
    check_request(model, h, grid)?;
    let (lo, hi) = window.bounds(h);
    let mut warnings = Vec::new();
    let ppw = resolution(model, h, hi, grid);
    for (axis, p) in ppw.iter().enumerate() {
        if *p < MIN_POINTS_PER_WAVELENGTH {
            let msg = format!(
                "axis {} has {p:.2} points per wavelength (< {MIN_POINTS_PER_WAVELENGTH})",
                axis + 1
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let disc = match model {
        QciModel::Liouville(d) => liouville_operator(d, h, grid),
        QciModel::Revolution(p) => revolution_operator(p, h, grid),
        _ => unreachable!(),
    };
    let pairs = eigenpairs_in(&disc.matrix, lo, hi)?
        .into_iter()
        .map(|(lambda, y)| {
            let mut values = vec![0.0; y.len()];
            for (p, v) in y.iter().enumerate() {
                let k = disc.natural[p];
                values[k] = v / disc.weight[k].sqrt();
            }
            OracleEigenpair { lambda, values }
        })
        .collect();
    Ok(OracleResult {
        h,
        grid,
        pairs,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub h: f64,
    pub qn: QuantumNumbers,
    pub separated: f64,
    pub oracle: f64,
    pub rel_diff: f64,
    pub sup_separated: f64,
    pub sup_oracle: f64,
    pub sup_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub rows: Vec<OracleRow>,
    /// Oracle eigenvalues with no separated partner, and vice versa.
    pub unmatched_oracle: Vec<f64>,
    pub unmatched_separated: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Separated joint eigenfunctions on the oracle's own grid, so both sides
/// share one discretization.
fn separated_on_grid(
    model: &QciModel,
    h: f64,
    window: SpectralWindow,
    g: OracleGrid,
) -> Result<Vec<JointEigenfunction>> {
    match model {
        QciModel::Liouville(d) => {
            if g.n1 != g.n2 {
                return Err(QciError::InvalidInput(
                    "separated comparison needs a square Liouville grid".into(),
                ));
            }
            let opts = LiouvilleOptions {
                grid_points: Some(g.n1),
                separation: Separation::Laplacian,
            };
            liouville_joint_eigs(d, h, window, default_lambda_scan(d), opts)
        }
        QciModel::Revolution(p) => {
            let opts = SorOptions {
                grid_points: Some(g.n1),
                angular_spacing: Some(2.0 * PI / g.n2 as f64),
            };
            let half = (g.n2 / 2) as i64;
            sor_joint_eigs(p, h, Some(-(half - 1 + (g.n2 % 2) as i64)..=half), window, opts)
        }
        _ => unreachable!(),
    }
}

/// `u` at the oracle nodes, complex.
fn sample_separated(u: &JointEigenfunction, g: OracleGrid) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); g.n1 * g.n2];
    match &u.layout {
        Layout::Torus { x1, x2, scale, .. } => {
            for i in 0..g.n1 {
                for j in 0..g.n2 {
                    out[i * g.n2 + j] = Complex64::new(scale * x1.values[i] * x2.values[j], 0.0);
                }
            }
        }
        Layout::Revolution { radial, .. } => {
            let m = u.qn.pair().0 as f64;
            let dt = 2.0 * PI / g.n2 as f64;
            for i in 0..g.n1 {
                for j in 0..g.n2 {
                    out[i * g.n2 + j] = Complex64::from_polar(radial.values[i] / (2.0 * PI).sqrt(), m * j as f64 * dt);
                }
            }
        }
        Layout::Line { .. } => {}
    }
    out
}

fn weights(model: &QciModel, g: OracleGrid) -> Vec<f64> {
    match model {
        QciModel::Liouville(d) => {
            let (d1, d2) = (1.0 / g.n1 as f64, 1.0 / g.n2 as f64);
            (0..g.n1 * g.n2)
                .map(|k| (d.a.value((k / g.n2) as f64 * d1) + d.b.value((k % g.n2) as f64 * d2)) * d1 * d2)
                .collect()
        }
        QciModel::Revolution(p) => {
            let (dr, dt) = (2.0 / g.n1 as f64, 2.0 * PI / g.n2 as f64);
            (0..g.n1 * g.n2)
                .map(|k| p.f(-1.0 + ((k / g.n2) as f64 + 0.5) * dr) * dr * dt)
                .collect()
        }
        _ => unreachable!(),
    }
}

/// Runs the oracle and the separated solver on the same grid, pairs
/// eigenvalues in order and compares sup norms. Near-degenerate oracle
/// eigenvalues form clusters; each separated function is compared with its
/// projection onto the matching oracle cluster.
pub fn compare_with_oracle(
    model: &QciModel,
    h: f64,
    window: SpectralWindow,
    grid: OracleGrid,
) -> Result<OracleComparison> {
    let oracle = oracle_2d(model, h, window, grid)?;
    let (lo, hi) = window.bounds(h);
    let mut sep = separated_on_grid(model, h, window, grid)?;
    sep.retain(|u| u.e1 >= lo && u.e1 <= hi);
    sep.sort_by(|a, b| a.e1.total_cmp(&b.e1).then(a.qn.pair().cmp(&b.qn.pair())));
    let w = weights(model, grid);

    // Clusters of oracle eigenvalues.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, p) in oracle.pairs.iter().enumerate() {
        match clusters.last_mut() {
            Some(c)
                if (p.lambda - oracle.pairs[*c.last().unwrap()].lambda).abs()
                    <= CLUSTER_TOL * (1.0 + p.lambda.abs()) =>
            {
                c.push(k)
            }
            _ => clusters.push(vec![k]),
        }
    }
    let n = oracle.pairs.len().min(sep.len());
    let mut rows = Vec::with_capacity(n);
    for (k, u) in sep.iter().take(n).enumerate() {
        let o = &oracle.pairs[k];
        let cluster = clusters
            .iter()
            .find(|c| c.contains(&k))
            .expect("every pair is in a cluster");
        let us = sample_separated(u, grid);
        let mut proj = vec![Complex64::new(0.0, 0.0); us.len()];
        for &c in cluster {
            let v = &oracle.pairs[c].values;
            let coef: Complex64 = us.iter().zip(v).zip(&w).map(|((a, b), wt)| a * b * wt).sum();
            proj.iter_mut().zip(v).for_each(|(p, b)| *p += coef * b);
        }
        let sup_separated = us.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sup_oracle = proj.iter().map(|z| z.norm()).fold(0.0, f64::max);
        rows.push(OracleRow {
            h,
            qn: u.qn,
            separated: u.e1,
            oracle: o.lambda,
            rel_diff: (u.e1 - o.lambda).abs() / o.lambda.abs(),
            sup_separated,
            sup_oracle,
            sup_rel_diff: (sup_separated - sup_oracle).abs() / sup_oracle,
        });
    }
    Ok(OracleComparison {
        rows,
        unmatched_oracle: oracle.pairs[n..].iter().map(|p| p.lambda).collect(),
        unmatched_separated: sep[n..].iter().map(|u| u.e1).collect(),
        warnings: oracle.warnings,
    })
}
