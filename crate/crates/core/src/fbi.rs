//! Discrete FBI transform on a circle.
//!
//! `Tu(α) = a ∫ e^{iφ(α,y)/h} χ(d/R) u(y) dy` with
//! `φ = d·α_ξ + i(μ/2) d² ⟨α_ξ/μ⟩` and `d` the signed circle distance from
//! `y` to `α_x`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QciError, Result};
use crate::spectral::sturm_liouville::EigenSolution1D;

pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;
pub const MIN_OFFSHELL_GAP: f64 = 0.3;
pub const VALUE_FLOOR: f64 = 1e-300;
pub const DEFAULT_CUTOFF_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbiGrid {
    /// Circumference of the circle.
    pub period: f64,
    /// Base points `α_x = i·period/n_x`.
    pub n_x: usize,
    /// Covector points spanning `[-xi_max, xi_max]`.
    pub xi_max: f64,
    pub n_xi: usize,
    pub mu: f64,
    pub h: f64,
}

impl FbiGrid {
    pub fn new(period: f64, n_x: usize, xi_max: f64, n_xi: usize, mu: f64, h: f64) -> Result<Self> {
        let g = Self {
            period,
            n_x,
            xi_max,
            n_xi,
            mu,
            h,
        };
        if !(period > 0.0 && xi_max > 0.0 && mu > 0.0 && h > 0.0) {
            return Err(QciError::InvalidInput(format!(
                "FBI grid needs positive period, xi_max, mu and h: {g:?}"
            )));
        }
        if n_x < 1 || n_xi < 2 {
            return Err(QciError::InvalidInput(
                "FBI grid needs at least one x point and two ξ points".into(),
            ));
        }
        Ok(g)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.period / self.n_x as f64
    }

    pub fn xi(&self, k: usize) -> f64 {
        -self.xi_max + 2.0 * self.xi_max * k as f64 / (self.n_xi - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n_x as f64
    }

    pub fn dxi(&self) -> f64 {
        2.0 * self.xi_max / (self.n_xi - 1) as f64
    }

    /// Signed distance from `y` to `x` on the circle, in `(-P/2, P/2]`.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let p = self.period;
        let d = (x - y).rem_euclid(p);
        if d > 0.5 * p {
            d - p
        } else {
            d
        }
    }
}

/// `|Tu|²` on the grid, `x` slow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMass {
    pub grid: FbiGrid,
    pub values: Vec<f64>,
    /// `Σ |Tu|² dα_x dα_ξ`.
    pub total_mass: f64,
}

impl PhaseMass {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.grid.n_xi + k]
    }

    /// ξ index of the maximum at base point `i`.
    pub fn argmax_xi(&self, i: usize) -> usize {
        let row = &self.values[i * self.grid.n_xi..(i + 1) * self.grid.n_xi];
        (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b })
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.values
            .chunks(self.grid.n_xi)
            .map(|r| r.iter().sum::<f64>() * self.grid.dxi())
            .collect()
    }

    pub fn xi_marginal(&self) -> Vec<f64> {
        let n = self.grid.n_xi;
        (0..n)
            .map(|k| (0..self.grid.n_x).map(|i| self.at(i, k)).sum::<f64>() * self.grid.dx())
            .collect()
    }

    /// `√(Σ|Tu|²)`, an `L²` norm on phase space.
    pub fn l2_norm(&self) -> f64 {
        self.total_mass.sqrt()
    }
}

/// Smooth plateau: 1 on `|t| ≤ 1/2`, 0 on `|t| ≥ 1`.
fn cutoff(t: f64) -> f64 {
    let t = t.abs();
    if t <= 0.5 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * (t - 0.5);
    let g = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    g(1.0 - s) / (g(1.0 - s) + g(s))
}

fn japanese(v: f64) -> f64 {
    (1.0 + v * v).sqrt()
}

/// `a = (μ/(4π³h³))^{1/4}`: the plane wave `e^{iξ₀y/h}` then has
/// `‖Tu‖/‖u‖ = ⟨ξ₀/μ⟩^{-1/4}`.
pub fn amplitude(mu: f64, h: f64) -> f64 {
    (mu / (4.0 * PI.powi(3) * h.powi(3))).powf(0.25)
}

/// `|Tu|²` for samples `u(y_j)`, `y_j = j·P/n`, on the grid.
pub fn fbi_transform(u: &[Complex64], grid: &FbiGrid, cutoff_radius: f64) -> Result<PhaseMass> {
    let n = u.len();
    if n == 0 {
        return Err(QciError::InvalidInput("no samples".into()));
    }
    if !(cutoff_radius > 0.0 && cutoff_radius < 0.5 * grid.period) {
        return Err(QciError::InvalidInput(format!(
            "cutoff radius {cutoff_radius} must lie in (0, {})",
            0.5 * grid.period
        )));
    }
    let dy = grid.period / n as f64;
    let limit = 2.0 * PI * grid.h / (MIN_POINTS_PER_WAVELENGTH * grid.xi_max);
    if dy > limit {
        return Err(QciError::UnderResolved { spacing: dy, limit });
    }
    let (h, mu) = (grid.h, grid.mu);
    let a = amplitude(mu, h);
    // Only samples inside the cutoff contribute.
    let reach = (cutoff_radius / dy).ceil() as isize;
    let values: Vec<f64> = (0..grid.n_x * grid.n_xi)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / grid.n_xi, idx % grid.n_xi);
            let (x, xi) = (grid.x(i), grid.xi(k));
            let damp = 0.5 * mu * japanese(xi / mu) / h;
            let j0 = (x / dy).round() as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for o in -reach..=reach {
                let j = (j0 + o).rem_euclid(n as isize) as usize;
                let d = grid.signed_distance(x, j as f64 * dy);
                let chi = cutoff(d / cutoff_radius);
                if chi == 0.0 {
                    continue;
                }
                let w = chi * (-damp * d * d).exp();
                acc += u[j] * Complex64::from_polar(w, d * xi / h);
            }
            (a * acc * dy).norm_sqr()
        })
        .collect();
    let total_mass = values.iter().sum::<f64>() * grid.dx() * grid.dxi();
    if !(total_mass > 0.0) {
        return Err(QciError::InvalidInput("transform vanishes identically".into()));
    }
    Ok(PhaseMass {
        grid: *grid,
        values,
        total_mass,
    })
}

/// Sample points of a level set `{p = E}` in `(x, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    pub points: Vec<[f64; 2]>,
}

impl Shell {
    /// `{ξ = branch(x)}` sampled at `samples` points per period.
    pub fn graph(period: f64, samples: usize, branches: impl Fn(f64) -> Vec<f64>) -> Self {
        let points = (0..samples)
            .flat_map(|i| {
                let x = i as f64 * period / samples as f64;
                branches(x).into_iter().map(move |xi| [x, xi])
            })
            .collect();
        Self { points }
    }

    pub fn horizontal(period: f64, xi: f64) -> Self {
        Self::graph(period, 512, |_| vec![xi])
    }

    /// Euclidean distance in `(x, ξ)`, periodic in `x`.
    pub fn distance(&self, grid: &FbiGrid, x: f64, xi: f64) -> f64 {
        self.points
            .iter()
            .map(|p| grid.signed_distance(x, p[0]).hypot(xi - p[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Fraction of `|Tu|²` within `radius` of the shell.
pub fn tube_mass(pm: &PhaseMass, shell: &Shell, radius: f64) -> f64 {
    let g = &pm.grid;
    // Collected first so the sum order does not depend on the thread count.
    let masked: Vec<f64> = (0..g.n_x * g.n_xi)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / g.n_xi, idx % g.n_xi);
            if shell.distance(g, g.x(i), g.xi(k)) <= radius {
                pm.values[idx]
            } else {
                0.0
            }
        })
        .collect();
    let inside: f64 = masked.iter().sum();
    (inside * g.dx() * g.dxi() / pm.total_mass).clamp(0.0, 1.0)
}

/// `max |Tu|` over grid points at least `gap` from the shell.
pub fn offshell_sup(pm: &PhaseMass, shell: &Shell, gap: f64) -> Option<f64> {
    let g = &pm.grid;
    (0..g.n_x * g.n_xi)
        .into_par_iter()
        .filter(|&idx| shell.distance(g, g.x(idx / g.n_xi), g.xi(idx % g.n_xi)) >= gap)
        .map(|idx| pm.values[idx].sqrt())
        .reduce_with(f64::max)
}

/// One member of an h-family: samples, grid and the shell.
#[derive(Debug, Clone)]
pub struct FbiMember {
    pub u: Vec<Complex64>,
    pub grid: FbiGrid,
    pub shell: Shell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffshellFit {
    /// `c` in `sup |Tu| ≈ C e^{-c/h}`.
    pub rate: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    /// `(h, sup |Tu|)` for the usable members.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares fit of `log sup |Tu|` against `1/h` over the region at
/// least `gap` from the shell.
pub fn offshell_decay_fit(members: &[FbiMember], gap: f64, cutoff_radius: Option<f64>) -> Result<OffshellFit> {
    if !(gap >= MIN_OFFSHELL_GAP) {
        return Err(QciError::InvalidInput(format!(
            "off-shell region must stay {MIN_OFFSHELL_GAP} from the shell, got {gap}"
        )));
    }
    let mut points = Vec::new();
    for m in members {
        let r = cutoff_radius.unwrap_or(DEFAULT_CUTOFF_FRACTION * m.grid.period);
        let pm = fbi_transform(&m.u, &m.grid, r)?;
        let sup = offshell_sup(&pm, &m.shell, gap).ok_or_else(|| {
            QciError::InvalidInput(format!(
                "no grid point is {gap} away from the shell at h = {}",
                m.grid.h
            ))
        })?;
        points.push((m.grid.h, sup));
    }
    decay_rate_fit(points)
}

/// Fits `log sup = b - c/h` to `(h, sup)` pairs above the floor.
pub fn decay_rate_fit(points: Vec<(f64, f64)>) -> Result<OffshellFit> {
    let points: Vec<(f64, f64)> = points.into_iter().filter(|p| p.1 > VALUE_FLOOR).collect();
    if points.len() < 3 {
        return Err(QciError::Floor(points.len()));
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(QciError::DegenerateFit("all h values are equal".into()));
    }
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(OffshellFit {
        rate: -slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
        points,
    })
}

/// `e^{imx}/√(2π)` at `n` points of `[0, 2π)`.
pub fn plane_wave(m: i64, n: usize) -> Vec<Complex64> {
    let norm = 1.0 / (2.0 * PI).sqrt();
    (0..n)
        .map(|j| Complex64::from_polar(norm, m as f64 * 2.0 * PI * j as f64 / n as f64))
        .collect()
}

/// Even extension of a factor on `[lo, hi]` to a circle of length
/// `2(hi - lo)`. Cell-centered and closed grids both reflect cleanly.
pub fn lift_even(f: &EigenSolution1D) -> (Vec<Complex64>, f64) {
    let mut u: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let back: Vec<Complex64> = f.values.iter().rev().map(|&v| Complex64::new(v, 0.0)).collect();
    u.extend(back);
    (u, 2.0 * (f.grid.hi - f.grid.lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(m: i64, mu: f64) -> (PhaseMass, FbiGrid) {
        let h = 1.0 / m as f64;
        let n = 16 * m as usize * 4;
        let g = FbiGrid::new(2.0 * PI, 64, 2.0, 161, mu, h).unwrap();
        (fbi_transform(&plane_wave(m, n), &g, 0.25 * 2.0 * PI).unwrap(), g)
    }

    #[test]
    fn cutoff_is_a_plateau() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(1.2), 0.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-12);
        assert!(cutoff(0.6) > cutoff(0.9));
    }

    #[test]
    fn plane_wave_peaks_on_its_momentum() {
        let (pm, g) = plane(32, 1.0);
        for i in 0..g.n_x {
            assert!((g.xi(pm.argmax_xi(i)) - 1.0).abs() <= g.dxi());
        }
        let (pm10, _) = plane(32, 10.0);
        assert!(pm10.argmax_xi(0).abs_diff(pm.argmax_xi(0)) <= 1);
    }

    #[test]
    fn constant_peaks_at_zero() {
        let h = 1.0 / 16.0;
        let g = FbiGrid::new(2.0 * PI, 16, 2.0, 81, 1.0, h).unwrap();
        let u = plane_wave(0, 1024);
        let pm = fbi_transform(&u, &g, 1.5).unwrap();
        assert!(g.xi(pm.argmax_xi(3)).abs() <= g.dxi());
    }

    #[test]
    fn tube_and_mirror_shell() {
        let (pm, _) = plane(32, 1.0);
        let h: f64 = 1.0 / 32.0;
        assert!(tube_mass(&pm, &Shell::horizontal(2.0 * PI, 1.0), 3.0 * h.sqrt()) >= 0.9);
        assert!(tube_mass(&pm, &Shell::horizontal(2.0 * PI, -1.0), 3.0 * h.sqrt()) <= 0.05);
        assert!((tube_mass(&pm, &Shell::horizontal(2.0 * PI, 1.0), 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_the_plane_wave_formula() {
        let (pm, _) = plane(32, 1.0);
        let ratio = pm.l2_norm();
        assert!((ratio - 2f64.powf(-0.125)).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        let g = FbiGrid::new(2.0 * PI, 8, 2.0, 11, 1.0, 1.0 / 32.0).unwrap();
        assert!(matches!(
            fbi_transform(&plane_wave(32, 128), &g, 1.0),
            Err(QciError::UnderResolved { .. })
        ));
    }

    #[test]
    fn region_near_shell_is_rejected() {
        assert!(offshell_decay_fit(&[], 0.1, None).is_err());
    }
}
