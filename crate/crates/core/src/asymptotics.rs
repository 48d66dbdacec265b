//! h-sweeps, sup-norm scaling fits and decay-rate extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{ho_action, liouville_action, sor_action_at, ActionField, ActionValue};
use crate::classical::{EnergyPair, TorusData};
use crate::error::{QciError, Result};
use crate::models::QciModel;
use crate::spectral::eigenfunction::{sup_norm, JointEigenfunction, Layout, QuantumNumbers, Region, SupNorm};
use crate::spectral::liouville::{default_lambda_scan, liouville_joint_map, LiouvilleOptions, Separation};
use crate::spectral::oscillator::ho_eigs;
use crate::spectral::revolution::{max_angular_momentum, sor_mode, SorOptions};
use crate::spectral::sturm_liouville::SpectralWindow;

pub const UNDERFLOW_FLOOR: f64 = 1e-300;
pub const MIN_SWEEP_POINTS: usize = 6;
pub const MIN_SWEEP_SPAN: f64 = 8.0;
pub const MIN_FIT_POINTS: usize = 4;

/// `h = 1/round(32·2^{k/2})`, `k = 0..=8`.
pub fn default_h_values() -> Vec<f64> {
    (0..=8)
        .map(|k| 1.0 / (32.0 * 2f64.powf(k as f64 / 2.0)).round())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSweep {
    pub h_values: Vec<f64>,
    pub window: SpectralWindow,
}

impl HSweep {
    pub fn new(h_values: Vec<f64>, window: SpectralWindow) -> Result<Self> {
        let s = Self { h_values, window };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.h_values;
        if h.len() < MIN_SWEEP_POINTS {
            return Err(QciError::InvalidInput(format!(
                "a sweep needs at least {MIN_SWEEP_POINTS} h values, got {}",
                h.len()
            )));
        }
        if h.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(QciError::InvalidInput("h values must be positive and finite".into()));
        }
        if h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(QciError::InvalidInput("h values must be strictly decreasing".into()));
        }
        let span = h[0] / h[h.len() - 1];
        if span < MIN_SWEEP_SPAN {
            return Err(QciError::InvalidInput(format!(
                "h values span a factor {span:.3}, need at least {MIN_SWEEP_SPAN}"
            )));
        }
        Ok(())
    }
}

/// Restricts a sweep to part of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    /// Angular momentum (surfaces of revolution only).
    #[serde(default)]
    pub m: Option<i64>,
    /// Closed band for `E₂`.
    #[serde(default)]
    pub e2_band: Option<[f64; 2]>,
}

impl Family {
    fn admits_e2(&self, e2: Option<f64>) -> bool {
        match (self.e2_band, e2) {
            (Some([lo, hi]), Some(e)) => e >= lo && e <= hi,
            (Some(_), None) => false,
            (None, _) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScanOptions {
    pub family: Family,
    pub sor: SorOptions,
    pub liouville_grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRow {
    pub h: f64,
    pub region: String,
    pub max_sup: f64,
    pub qn: QuantumNumbers,
    pub e1: f64,
    pub e2: Option<f64>,
    pub location: [f64; 2],
    /// Eigenfunctions inspected at this `h`.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupScan {
    pub rows: Vec<SupRow>,
    /// Rows that could not be produced, by `h`.
    pub skipped: Vec<(f64, QciError)>,
}

impl SupScan {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.h, r.max_sup)).collect()
    }
}

struct Hit {
    qn: QuantumNumbers,
    e1: f64,
    e2: Option<f64>,
    sup: SupNorm,
}

fn hit(u: &JointEigenfunction, region: &Region) -> Result<Hit> {
    Ok(Hit {
        qn: u.qn,
        e1: u.e1,
        e2: u.e2,
        sup: sup_norm(u, region)?,
    })
}

/// Sup norms of every joint eigenfunction at one `h`. Surfaces of revolution
/// report `m ≥ 0` only; `u_{-m} = conj(u_m)` has the same modulus.
fn scan_one(model: &QciModel, h: f64, window: SpectralWindow, region: &Region, opts: &ScanOptions) -> Result<Vec<Hit>> {
    let fam = opts.family;
    match model {
        QciModel::Revolution(p) => {
            let ms: Vec<i64> = match fam.m {
                Some(m) => vec![m.abs()],
                None => (0..=max_angular_momentum(p, h, window)).collect(),
            };
            let per_m = ms
                .par_iter()
                .map(|&m| {
                    if !fam.admits_e2(Some(m as f64 * h)) {
                        return Ok(Vec::new());
                    }
                    sor_mode(p, h, m, window, opts.sor)?
                        .iter()
                        .map(|u| hit(u, region))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_m.into_iter().flatten().collect())
        }
        QciModel::Liouville(d) | QciModel::LiouvilleOscillator(d) => {
            if fam.m.is_some() {
                return Err(QciError::InvalidInput(
                    "angular-momentum families apply to surfaces of revolution".into(),
                ));
            }
            let separation = if matches!(model, QciModel::Liouville(_)) {
                Separation::Laplacian
            } else {
                Separation::Oscillator
            };
            let scan = match fam.e2_band {
                Some([lo, hi]) => (lo, hi),
                None => default_lambda_scan(d),
            };
            let lopts = LiouvilleOptions {
                grid_points: opts.liouville_grid,
                separation,
            };
            let hits = liouville_joint_map(d, h, window, scan, lopts, |u| hit(&u, region))?;
            let mut hits: Vec<Hit> = hits.into_iter().collect::<Result<_>>()?;
            hits.sort_by_key(|x| x.qn.pair());
            Ok(hits)
        }
        QciModel::HarmonicOscillator(m) => {
            if fam.m.is_some() || fam.e2_band.is_some() {
                return Err(QciError::InvalidInput(
                    "the oscillator has no second quantum number".into(),
                ));
            }
            ho_eigs(m, h, window)?
                .into_iter()
                .map(|f| hit(&JointEigenfunction::line(h, f), region))
                .collect()
        }
    }
}

/// For each `h`, the largest sup norm over the region among joint
/// eigenfunctions with `E₁` in the window. Ties go to the smallest quantum
/// numbers.
pub fn supnorm_scan(model: &QciModel, sweep: &HSweep, region: &Region, opts: &ScanOptions) -> Result<SupScan> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &h in &sweep.h_values {
        let hits = match scan_one(model, h, sweep.window, region, opts) {
            Ok(v) => v,
            Err(e @ QciError::EmptyRegion) => return Err(e),
            Err(e) => {
                log::warn!("h = {h}: {e}");
                skipped.push((h, e));
                continue;
            }
        };
        let best = hits.iter().fold(None::<&Hit>, |b, x| match b {
            Some(b) if b.sup.value >= x.sup.value => Some(b),
            _ => Some(x),
        });
        match best {
            None => skipped.push((h, QciError::EmptySpectrum(h))),
            Some(b) => rows.push(SupRow {
                h,
                region: region.name.clone(),
                max_sup: b.sup.value,
                qn: b.qn,
                e1: b.e1,
                e2: b.e2,
                location: b.sup.location,
                count: hits.len(),
            }),
        }
    }
    Ok(SupScan { rows, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub point_count: usize,
}

/// Least squares on `(log h, log value)`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(QciError::DegenerateFit(format!(
            "{} points, need {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    if points.iter().any(|&(h, v)| !(h > 0.0 && v > 0.0)) {
        return Err(QciError::DegenerateFit("h and values must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(QciError::DegenerateFit("all h values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    Ok(ScalingFit {
        exponent,
        intercept,
        rms_residual: (ss / n).sqrt(),
        point_count: points.len(),
    })
}

/// Fits over the `k` coarsest rows for every admissible `k`, so the effect
/// of adding smaller `h` is visible.
pub fn prefix_fits(points: &[(f64, f64)]) -> Vec<ScalingFit> {
    (MIN_FIT_POINTS..=points.len())
        .filter_map(|k| fit_exponent(&points[..k]).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HormanderCheck {
    pub constant: f64,
    /// `h` values with `maxSup > C h^{-1/2}`.
    pub violations: Vec<f64>,
}

/// `C = 2·max(maxSup·h^{1/2})` over the coarser half of the sweep, then
/// `maxSup ≤ C h^{-1/2}` is checked on every row.
pub fn hormander_ceiling(points: &[(f64, f64)]) -> Result<HormanderCheck> {
    if points.is_empty() {
        return Err(QciError::DegenerateFit("no rows".into()));
    }
    let half = points.len().div_ceil(2);
    let constant = 2.0 * points[..half].iter().map(|&(h, v)| v * h.sqrt()).fold(0.0, f64::max);
    let violations = points
        .iter()
        .filter(|&&(h, v)| v > constant / h.sqrt())
        .map(|p| p.0)
        .collect();
    Ok(HormanderCheck { constant, violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySample {
    pub x: [f64; 2],
    pub s: f64,
    pub log_abs_u: f64,
    pub ratio: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub h: f64,
    pub epsilon: f64,
    pub max_defect: f64,
    pub samples: Vec<DecaySample>,
    /// Fraction of field points where `|u|` fell below the floor.
    pub floored_fraction: f64,
}

impl DecayReport {
    pub fn ratio_band(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.ratio), hi.max(s.ratio))
            })
    }

    /// `max |ratio - 1|`.
    pub fn ratio_deviation(&self) -> f64 {
        self.samples.iter().map(|s| (s.ratio - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Compares `|u|` with `e^{-S/h}` at the field points inside `region`.
pub fn decay_profile(
    u: &JointEigenfunction,
    field: &ActionField,
    epsilon: f64,
    region: &Region,
) -> Result<DecayReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(QciError::InvalidInput(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let h = u.h;
    let pts: Vec<_> = field
        .samples
        .iter()
        .filter(|s| region.contains(s.x) && !s.truncated)
        .collect();
    if pts.is_empty() {
        return Err(QciError::EmptyRegion);
    }
    if let Some(p) = pts.iter().find(|s| !(s.s > 0.0)) {
        return Err(QciError::InvalidInput(format!(
            "S = {} at {:?}: the region meets the allowed region",
            p.s, p.x
        )));
    }
    let mut samples = Vec::with_capacity(pts.len());
    let mut floored = 0usize;
    for p in &pts {
        let a = u.abs_at(p.x);
        if !(a > UNDERFLOW_FLOOR) {
            floored += 1;
            continue;
        }
        let log_abs_u = a.ln();
        samples.push(DecaySample {
            x: p.x,
            s: p.s,
            log_abs_u,
            ratio: -h * log_abs_u / p.s,
            defect: (1.0 - epsilon) * p.s + h * log_abs_u,
        });
    }
    let floored_fraction = floored as f64 / pts.len() as f64;
    if floored_fraction > 0.5 {
        return Err(QciError::UnderflowRegion(floored_fraction));
    }
    let max_defect = samples.iter().map(|s| s.defect).fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayReport {
        h,
        epsilon,
        max_defect,
        samples,
        floored_fraction,
    })
}

/// The action field of `u`'s own energies at the grid nodes of its primary
/// factor inside `region`. Torus functions are sampled along `x₁` through
/// the maximum of the `x₂` factor.
pub fn decay_field(model: &QciModel, u: &JointEigenfunction, region: &Region) -> Result<ActionField> {
    let f = u.primary_factor();
    let second = match &u.layout {
        Layout::Torus { x2, .. } => x2.grid.point(x2.max_abs().1),
        _ => 0.0,
    };
    let points: Vec<[f64; 2]> = f
        .grid
        .points()
        .into_iter()
        .map(|x| [x, second])
        .filter(|&x| region.contains(x))
        .collect();
    if points.is_empty() {
        return Err(QciError::EmptyRegion);
    }
    let energy = EnergyPair::new(u.e1, u.e2.unwrap_or(0.0));
    let action: Box<dyn Fn([f64; 2]) -> Result<ActionValue> + Sync> = match model {
        QciModel::Revolution(p) => Box::new(move |x| sor_action_at(p, energy, x[0])),
        QciModel::HarmonicOscillator(_) => Box::new(move |x| ho_action(energy.e1, x[0])),
        QciModel::Liouville(d) => Box::new(move |x| liouville_action(d, energy, x)),
        QciModel::LiouvilleOscillator(_) => {
            return Err(QciError::Unsupported(
                "action fields for the Liouville oscillator".into(),
            ))
        }
    };
    ActionField::sample(&points, 0, f64::NAN, action)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausticPeak {
    pub axis: usize,
    pub peak: f64,
    /// `+∞` when the axis carries no caustic.
    pub distance: f64,
}

/// Where the factor carrying the caustics peaks, and how far that is from
/// the nearest caustic.
pub fn caustic_peak_locator(u: &JointEigenfunction, tdata: &TorusData) -> CausticPeak {
    let axis = match &u.layout {
        Layout::Torus { .. } if tdata.caustics_on(0).next().is_none() && tdata.caustics_on(1).next().is_some() => 1,
        _ => 0,
    };
    let f = match (&u.layout, axis) {
        (Layout::Torus { x2, .. }, 1) => x2,
        _ => u.primary_factor(),
    };
    let peak = f.grid.point(f.max_abs().1);
    let periodic = matches!(u.layout, Layout::Torus { .. });
    let distance = tdata
        .caustics_on(axis)
        .map(|c| {
            let d = (peak - c.coordinate).abs();
            if periodic {
                d.rem_euclid(1.0).min(1.0 - d.rem_euclid(1.0))
            } else {
                d
            }
        })
        .fold(f64::INFINITY, f64::min);
    CausticPeak { axis, peak, distance }
}

/// The eigenfunction with `E₁` nearest `target`; ties go to the lower `E₁`.
pub fn nearest_level(us: Vec<JointEigenfunction>, target: f64) -> Option<JointEigenfunction> {
    us.into_iter().min_by(|a, b| {
        (a.e1 - target)
            .abs()
            .total_cmp(&(b.e1 - target).abs())
            .then(a.e1.total_cmp(&b.e1))
    })
}
