//! Two-parameter matching for Liouville tori.
//!
//! With `u = v(x₁) w(x₂)` and separation constant `λ` the eigenvalue problem
//! splits into
//!
//! ```text
//! -h² v'' + (V_a - E₁ a) v =  λ v
//! -h² w'' + (V_b - E₁ b) w = -λ w
//! ```
//!
//! (`V_a = V_b = 0` for the Laplacian, `V_a = -a²`, `V_b = b²` for the
//! oscillator). Both branch eigenvalues decrease in `E₁`, so for a fixed pair
//! of branches `F(E₁) = λ_j(E₁) + μ_k(E₁)` is decreasing and has at most one
//! root. `λ` is the eigenvalue of `P₂`.

use rayon::prelude::*;

use super::eigenfunction::{JointEigenfunction, Layout, QuantumNumbers};
use super::sturm_liouville::{Boundary, EigenSolution1D, EvenPeriodic, Grid1D, SpectralWindow};
use super::tridiag::{bisect_index, fix_sign, SymTridiag};
use crate::error::{QciError, Result};
use crate::models::LiouvilleData;

pub const MATCH_TOLERANCE: f64 = 1e-10;
pub const MATCH_MAX_ITER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separation {
    #[default]
    Laplacian,
    Oscillator,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiouvilleOptions {
    /// Nodes per axis (made even); defaults to `max(1024, ⌈24/h⌉)`.
    pub grid_points: Option<usize>,
    pub separation: Separation,
}

pub fn default_grid_points(h: f64) -> usize {
    let n = 1024usize.max((24.0 / h).ceil() as usize);
    n + n % 2
}

/// One parity branch of `-h²∂² + V - E·c`.
struct Branch {
    diag0: Vec<f64>,
    off: Vec<f64>,
    coef: Vec<f64>,
}

impl Branch {
    fn at(&self, e: f64) -> SymTridiag {
        SymTridiag::new(
            self.diag0.iter().zip(&self.coef).map(|(d, c)| d - e * c).collect(),
            self.off.clone(),
        )
    }

    fn bounds(&self, e: f64) -> (f64, f64) {
        let t = self.at(e);
        let (lo, hi) = t.gershgorin();
        (lo - 1.0, hi + 1.0)
    }

    fn eigenvalue(&self, e: f64, k: usize, lo: f64, hi: f64) -> f64 {
        let t = self.at(e);
        bisect_index(|s| t.count_below(s), k, lo, hi)
    }
}

/// Both parity branches of one separated axis.
struct Axis {
    grid: Grid1D,
    op0: EvenPeriodic,
    branches: [Branch; 2],
    potential: Vec<f64>,
    coef_full: Vec<f64>,
}

impl Axis {
    fn new(grid: Grid1D, h: f64, potential: &[f64], coef: &[f64]) -> Result<Self> {
        if !EvenPeriodic::is_even(potential) || !EvenPeriodic::is_even(coef) {
            return Err(QciError::Unsupported(
                "separated factors must be even about the origin".into(),
            ));
        }
        let dx = grid.spacing();
        let op0 = EvenPeriodic::new(potential, h * h / (dx * dx));
        let half = grid.n / 2;
        let even = Branch {
            diag0: op0.even.diag.clone(),
            off: op0.even.off.clone(),
            coef: coef[..=half].to_vec(),
        };
        let odd = Branch {
            diag0: op0.odd.diag.clone(),
            off: op0.odd.off.clone(),
            coef: coef[1..half].to_vec(),
        };
        Ok(Self {
            grid,
            op0,
            branches: [even, odd],
            potential: potential.to_vec(),
            coef_full: coef.to_vec(),
        })
    }

    fn branch(&self, odd: bool) -> &Branch {
        &self.branches[usize::from(odd)]
    }

    /// Unit eigenvector of branch `odd` at energy `e`, unfolded onto the
    /// full circle and scaled to `Σ v² dx = 1`.
    fn factor(&self, e: f64, odd: bool, lambda: f64, index: i64) -> Result<EigenSolution1D> {
        let t = self.branch(odd).at(e);
        let mut y = t.eigenvector(lambda, &[], index.unsigned_abs())?;
        fix_sign(&mut y);
        let ty = t.apply(&y);
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = ty
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / ymax;
        let scale = 1.0 / self.grid.spacing().sqrt();
        let values = self.op0.unfold(odd, &y).into_iter().map(|v| v * scale).collect();
        Ok(EigenSolution1D {
            lambda,
            values,
            grid: self.grid,
            bc: Boundary::Periodic,
            residual,
            index,
        })
    }

    fn potential_min(&self, e: f64) -> f64 {
        self.potential
            .iter()
            .zip(&self.coef_full)
            .map(|(v, c)| v - e * c)
            .fold(f64::INFINITY, f64::min)
    }
}

fn signed(odd: bool, k: usize) -> i64 {
    if odd {
        -(k as i64 + 1)
    } else {
        k as i64
    }
}

fn unsigned(j: i64) -> (bool, usize) {
    if j < 0 {
        (true, (-j - 1) as usize)
    } else {
        (false, j as usize)
    }
}

/// The separated pair of axes for one model and `h`.
pub struct LiouvilleSeparation {
    data: LiouvilleData,
    h: f64,
    a: Axis,
    b: Axis,
}

/// Branch eigenvalue brackets at the ends of the `E₁` interval.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    j: i64,
    k: i64,
    lam: (f64, f64),
    mu: (f64, f64),
}

impl LiouvilleSeparation {
    pub fn new(data: &LiouvilleData, h: f64, opts: LiouvilleOptions) -> Result<Self> {
        if !(h > 0.0) {
            return Err(QciError::InvalidInput(format!("h must be positive, got {h}")));
        }
        let mut n = opts.grid_points.unwrap_or_else(|| default_grid_points(h));
        n += n % 2;
        let grid = Grid1D::periodic(0.0, 1.0, n)?;
        let a = grid.sample(|x| data.a.value(x));
        let b = grid.sample(|x| data.b.value(x));
        let (va, vb): (Vec<f64>, Vec<f64>) = match opts.separation {
            Separation::Laplacian => (vec![0.0; n], vec![0.0; n]),
            Separation::Oscillator => (a.iter().map(|x| -x * x).collect(), b.iter().map(|x| x * x).collect()),
        };
        Ok(Self {
            data: data.clone(),
            h,
            a: Axis::new(grid, h, &va, &a)?,
            b: Axis::new(grid, h, &vb, &b)?,
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.a.grid
    }

    /// `λ_j(E) + μ_k(E)` given brackets for both branch eigenvalues.
    fn mismatch(&self, c: &Candidate, e: f64) -> (f64, f64) {
        let (pa, ia) = unsigned(c.j);
        let (pb, ib) = unsigned(c.k);
        let slack = |(x, y): (f64, f64)| {
            let s = 1e-8 * (1.0 + x.abs().max(y.abs()));
            (x.min(y) - s, x.max(y) + s)
        };
        let (llo, lhi) = slack(c.lam);
        let (mlo, mhi) = slack(c.mu);
        let lam = self.a.branch(pa).eigenvalue(e, ia, llo, lhi);
        let mu = self.b.branch(pb).eigenvalue(e, ib, mlo, mhi);
        (lam + mu, lam)
    }

    fn candidate(&self, j: i64, k: i64, e_lo: f64, e_hi: f64) -> Candidate {
        let (pa, ia) = unsigned(j);
        let (pb, ib) = unsigned(k);
        let eig = |br: &Branch, i: usize, e: f64| {
            let (lo, hi) = br.bounds(e);
            br.eigenvalue(e, i, lo, hi)
        };
        let lam = (eig(self.a.branch(pa), ia, e_lo), eig(self.a.branch(pa), ia, e_hi));
        let mu = (eig(self.b.branch(pb), ib, e_lo), eig(self.b.branch(pb), ib, e_hi));
        Candidate { j, k, lam, mu }
    }

    /// Illinois iteration on `F` over `[e_lo, e_hi]`; returns `(E₁, λ)`.
    fn root(&self, c: &Candidate, e_lo: f64, e_hi: f64) -> Result<(f64, f64)> {
        let f_lo = c.lam.0 + c.mu.0;
        let f_hi = c.lam.1 + c.mu.1;
        if f_lo.abs() <= MATCH_TOLERANCE {
            return Ok((e_lo, c.lam.0));
        }
        if f_hi.abs() <= MATCH_TOLERANCE {
            return Ok((e_hi, c.lam.1));
        }
        if (f_lo > 0.0) == (f_hi > 0.0) {
            return Err(QciError::NoBracket { j: c.j, k: c.k });
        }
        let (mut a, mut fa, mut b, mut fb) = (e_lo, f_lo, e_hi, f_hi);
        for _ in 0..MATCH_MAX_ITER {
            let x = b - fb * (b - a) / (fb - fa);
            let x = if x > a.min(b) && x < a.max(b) { x } else { 0.5 * (a + b) };
            let (fx, lam) = self.mismatch(c, x);
            if fx.abs() <= MATCH_TOLERANCE || (b - a).abs() <= 4.0 * f64::EPSILON * x.abs() {
                return Ok((x, lam));
            }
            if (fx > 0.0) != (fb > 0.0) {
                a = b;
                fa = fb;
            } else {
                fa *= 0.5;
            }
            b = x;
            fb = fx;
        }
        Err(QciError::SolverDivergence(MATCH_MAX_ITER))
    }

    fn assemble(&self, j: i64, k: i64, e1: f64, lambda: f64) -> Result<JointEigenfunction> {
        let (pa, _) = unsigned(j);
        let (pb, _) = unsigned(k);
        let v = self.a.factor(e1, pa, lambda, j)?;
        let w = self.b.factor(e1, pb, -lambda, k)?;
        let dx = self.grid().spacing();
        let moment = |f: &EigenSolution1D, c: &[f64]| f.values.iter().zip(c).map(|(x, y)| x * x * y).sum::<f64>() * dx;
        let norm = moment(&v, &self.a.coef_full) + moment(&w, &self.b.coef_full);
        Ok(JointEigenfunction {
            h: self.h,
            qn: QuantumNumbers::Torus { j, k },
            e1,
            e2: Some(lambda),
            layout: Layout::Torus {
                data: self.data.clone(),
                x1: v,
                x2: w,
                scale: 1.0 / norm.sqrt(),
            },
        })
    }

    /// The joint eigenfunction on branches `(j, k)` with `E₁` in
    /// `[e_lo, e_hi]`.
    pub fn match_branches(&self, j: i64, k: i64, e_lo: f64, e_hi: f64) -> Result<JointEigenfunction> {
        let c = self.candidate(j, k, e_lo, e_hi);
        let (e1, lambda) = self.root(&c, e_lo, e_hi)?;
        self.assemble(j, k, e1, lambda)
    }

    /// All branch pairs whose matching function changes sign on
    /// `[e_lo, e_hi]` and whose separation constant can reach `scan`.
    fn candidates(&self, e_lo: f64, e_hi: f64, scan: (f64, f64)) -> Vec<Candidate> {
        let lam_cap = (-self.b.potential_min(e_hi)).min(scan.1);
        let mut out = Vec::new();
        for pa in [false, true] {
            let br = self.a.branch(pa);
            let (ta_lo, ta_hi) = (br.at(e_lo), br.at(e_hi));
            let (glo, ghi) = br.bounds(e_lo);
            let (hlo, hhi) = br.bounds(e_hi);
            let count = ta_hi.count_below(lam_cap.next_up());
            for ia in 0..count {
                let lam_lo = ta_lo.eigenvalue(ia, glo, ghi);
                let lam_hi = ta_hi.eigenvalue(ia, hlo, hhi);
                if lam_lo < scan.0 {
                    continue;
                }
                for pb in [false, true] {
                    let bb = self.b.branch(pb);
                    let (tb_lo, tb_hi) = (bb.at(e_lo), bb.at(e_hi));
                    let k0 = tb_lo.count_below(-lam_lo);
                    let k1 = tb_hi.count_below((-lam_hi).next_up());
                    let (blo, bhi) = bb.bounds(e_lo);
                    let (clo, chi) = bb.bounds(e_hi);
                    for ib in k0..k1 {
                        let mu = (tb_lo.eigenvalue(ib, blo, bhi), tb_hi.eigenvalue(ib, clo, chi));
                        out.push(Candidate {
                            j: signed(pa, ia),
                            k: signed(pb, ib),
                            lam: (lam_lo, lam_hi),
                            mu,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Separated joint eigenfunctions with `E₁` in the window and `E₂ = λ` in
/// `lambda_scan`, ordered by `(j, k)`.
pub fn liouville_joint_eigs(
    data: &LiouvilleData,
    h: f64,
    window: SpectralWindow,
    lambda_scan: (f64, f64),
    opts: LiouvilleOptions,
) -> Result<Vec<JointEigenfunction>> {
    let mut out = liouville_joint_map(data, h, window, lambda_scan, opts, |u| u)?;
    out.sort_by_key(|u| u.qn.pair());
    Ok(out)
}

/// Applies `f` to every joint eigenfunction as soon as it is assembled, in
/// the deterministic candidate order.
pub fn liouville_joint_map<T, F>(
    data: &LiouvilleData,
    h: f64,
    window: SpectralWindow,
    lambda_scan: (f64, f64),
    opts: LiouvilleOptions,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(JointEigenfunction) -> T + Sync,
{
    if !(lambda_scan.0 <= lambda_scan.1) {
        return Ok(Vec::new());
    }
    let sep = LiouvilleSeparation::new(data, h, opts)?;
    let (e_lo, e_hi) = window.bounds(h);
    let cands = sep.candidates(e_lo, e_hi, lambda_scan);
    let results: Vec<Option<T>> = cands
        .par_iter()
        .map(|c| {
            let (e1, lambda) = sep.root(c, e_lo, e_hi)?;
            if lambda < lambda_scan.0 || lambda > lambda_scan.1 {
                return Ok(None);
            }
            Ok(Some(f(sep.assemble(c.j, c.k, e1, lambda)?)))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// The default separation-constant scan `[-max a - 1, max b + 1]`.
pub fn default_lambda_scan(data: &LiouvilleData) -> (f64, f64) {
    (-data.a_max - 1.0, data.b_max + 1.0)
}

/// `⟨P₂u, u⟩ / ⟨u, u⟩` in `L²(dVol)` for the three-point discretization.
pub fn p2_rayleigh(u: &JointEigenfunction, separation: Separation) -> Option<f64> {
    let Layout::Torus { data, x1, x2, .. } = &u.layout else {
        return None;
    };
    let h = u.h;
    let second = |f: &EigenSolution1D| {
        let n = f.values.len();
        let dx = f.grid.spacing();
        let c = h * h / (dx * dx);
        (0..n)
            .map(|i| c * (2.0 * f.values[i] - f.values[(i + n - 1) % n] - f.values[(i + 1) % n]) * f.values[i])
            .sum::<f64>()
    };
    let weighted = |f: &EigenSolution1D, w: &dyn Fn(f64) -> f64| {
        f.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * v * w(f.grid.point(i)))
            .sum::<f64>()
    };
    let a = |x: f64| data.a.value(x);
    let b = |x: f64| data.b.value(x);
    let (d1, d2) = (second(x1), second(x2));
    let (v1, va) = (weighted(x1, &|_| 1.0), weighted(x1, &a));
    let (w1, wb) = (weighted(x2, &|_| 1.0), weighted(x2, &b));
    // (a+b)P₂ = b D₁ - a D₂ (- ab(a+b) for the oscillator)
    let mut num = d1 * wb - va * d2;
    if separation == Separation::Oscillator {
        let va2 = weighted(x1, &|x| a(x) * a(x));
        let wb2 = weighted(x2, &|x| b(x) * b(x));
        num -= va2 * wb + va * wb2;
    }
    Some(num / (va * w1 + v1 * wb))
}
