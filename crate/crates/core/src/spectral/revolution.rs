//! Separated eigenfunctions of the Laplacian on a surface of revolution
//! `g = dr² + f(r)² dθ²`.
//!
//! For `u = v(r) e^{imθ}` the eigenvalue equation reduces to
//! `-h² f⁻¹ (f v')' + m²h² f⁻² v = E₁ v`, discretized by finite volumes on a
//! cell-centered grid. The face fluxes vanish at `r = ±1` because `f` does,
//! which is the regularity condition at the poles.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::eigenfunction::{JointEigenfunction, Layout, QuantumNumbers};
use super::sturm_liouville::{windowed_pairs, Boundary, EigenSolution1D, Grid1D, SpectralWindow};
use super::tridiag::SymTridiag;
use crate::error::{QciError, Result};
use crate::models::RevolutionProfile;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SorOptions {
    /// Radial cell count; defaults to `max(1024, ⌈24/h⌉)`.
    pub grid_points: Option<usize>,
    /// Replace `m²` by the symbol `4 sin²(m δ/2)/δ²` of a periodic
    /// three-point stencil with spacing `δ`.
    pub angular_spacing: Option<f64>,
}

pub fn default_grid_points(h: f64) -> usize {
    1024usize.max((24.0 / h).ceil() as usize)
}

/// `|m|` beyond which `m²h²/f² > E₁` everywhere in the window.
pub fn max_angular_momentum(profile: &RevolutionProfile, h: f64, window: SpectralWindow) -> i64 {
    let (_, hi) = window.bounds(h);
    (hi.max(0.0).sqrt() * profile.max_value() / h).ceil() as i64 + 1
}

/// Radial operator for one angular momentum.
pub struct RadialOperator {
    pub grid: Grid1D,
    pub matrix: SymTridiag,
    /// `f` at the cell centers.
    pub f: Vec<f64>,
}

impl RadialOperator {
    pub fn new(profile: &RevolutionProfile, h: f64, m: i64, opts: SorOptions) -> Result<Self> {
        if !(h > 0.0) {
            return Err(QciError::InvalidInput(format!("h must be positive, got {h}")));
        }
        let n = opts.grid_points.unwrap_or_else(|| default_grid_points(h));
        let grid = Grid1D::cell_centered(-1.0, 1.0, n)?;
        let dr = grid.spacing();
        let f = grid.sample(|r| profile.f(r));
        let face: Vec<f64> = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.0
                } else {
                    profile.f(-1.0 + i as f64 * dr)
                }
            })
            .collect();
        let m2 = match opts.angular_spacing {
            Some(d) => {
                let s = (m as f64 * d / 2.0).sin();
                4.0 * s * s / (d * d)
            }
            None => (m * m) as f64,
        };
        let c = h * h / (dr * dr);
        let diag = (0..n)
            .map(|i| c * (face[i] + face[i + 1]) / f[i] + m2 * h * h / (f[i] * f[i]))
            .collect();
        let off = (0..n - 1)
            .map(|i| -c * face[i + 1] / (f[i] * f[i + 1]).sqrt())
            .collect();
        Ok(Self {
            grid,
            matrix: SymTridiag::new(diag, off),
            f,
        })
    }

    /// Eigenpairs with `E₁` in `[lo, hi]`; values normalized by `Σ v² f dr = 1`.
    pub fn solve(&self, lo: f64, hi: f64, bc: Boundary) -> Result<Vec<EigenSolution1D>> {
        let dr = self.grid.spacing();
        let k0 = self.matrix.count_below(lo) as i64;
        Ok(windowed_pairs(&self.matrix, lo, hi)?
            .into_iter()
            .enumerate()
            .map(|(i, (lambda, y, residual))| {
                let values = y.iter().zip(&self.f).map(|(yi, fi)| yi / (fi * dr).sqrt()).collect();
                EigenSolution1D {
                    lambda,
                    values,
                    grid: self.grid,
                    bc,
                    residual,
                    index: k0 + i as i64,
                }
            })
            .collect())
    }
}

/// Joint eigenfunctions with angular momentum `m` and `E₁` in the window.
pub fn sor_mode(
    profile: &RevolutionProfile,
    h: f64,
    m: i64,
    window: SpectralWindow,
    opts: SorOptions,
) -> Result<Vec<JointEigenfunction>> {
    let op = RadialOperator::new(profile, h, m, opts)?;
    let (lo, hi) = window.bounds(h);
    let bc = if m == 0 {
        Boundary::Regularity
    } else {
        Boundary::Dirichlet
    };
    Ok(op
        .solve(lo, hi, bc)?
        .into_iter()
        .map(|radial| JointEigenfunction {
            h,
            qn: QuantumNumbers::Revolution {
                m,
                radial: radial.index,
            },
            e1: radial.lambda,
            e2: Some(m as f64 * h),
            layout: Layout::Revolution {
                profile: *profile,
                radial,
            },
        })
        .collect())
}

/// Separated joint eigenfunctions over an angular-momentum range (all
/// momenta that can reach the window when `m_range` is `None`), ordered by
/// `(m, radial)`.
pub fn sor_joint_eigs(
    profile: &RevolutionProfile,
    h: f64,
    m_range: Option<RangeInclusive<i64>>,
    window: SpectralWindow,
    opts: SorOptions,
) -> Result<Vec<JointEigenfunction>> {
    let range = m_range.unwrap_or_else(|| {
        let mmax = max_angular_momentum(profile, h, window);
        -mmax..=mmax
    });
    // Radial problems depend on m² only.
    let (lo, hi) = (*range.start(), *range.end());
    let abs_max = lo.abs().max(hi.abs());
    let abs_min = if lo <= 0 && hi >= 0 { 0 } else { lo.abs().min(hi.abs()) };
    let per_abs: Vec<(i64, Vec<JointEigenfunction>)> = (abs_min..=abs_max)
        .into_par_iter()
        .filter(|&a| range.contains(&a) || range.contains(&-a))
        .map(|a| sor_mode(profile, h, a, window, opts).map(|v| (a, v)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (a, modes) in per_abs {
        for u in modes {
            let signs: &[i64] = if a == 0 { &[0] } else { &[-a, a] };
            for &m in signs {
                if !range.contains(&m) {
                    continue;
                }
                let mut v = u.clone();
                v.qn = QuantumNumbers::Revolution {
                    m,
                    radial: u.qn.pair().1,
                };
                v.e2 = Some(m as f64 * h);
                out.push(v);
            }
        }
    }
    out.sort_by_key(|u| u.qn.pair());
    Ok(out)
}
