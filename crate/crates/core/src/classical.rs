//! Classical layer of the integrable systems: Lagrangian torus fibers,
//! caustic loci, fold/graph classification of the base projection and the
//! Morse check of `p₂` restricted to the energy shell over a base point.
//!
//! All models in the catalogue are separable, so each fiber component obeys
//! `ξ_i² = D_i(x_i) / w_i(x)` with an axis discriminant `D_i` that is smooth
//! in its own variable. Caustics are the zeros of the `D_i`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QciError, Result};
use crate::models::{eval_p2, PhasePoint, QciModel};

/// Below this `|D'|` a caustic is not a simple zero.
pub const SIMPLE_ZERO_TOL: f64 = 1e-8;
/// `|D| ≤ FIBER_DEGENERACY_TOL·scale` marks a point on the caustic.
pub const FIBER_DEGENERACY_TOL: f64 = 1e-12;
/// `f(r)/max f` below which the revolution shell collapses onto a pole.
pub const POLE_FLATNESS: f64 = 1e-5;
pub const MORSE_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyPair {
    pub e1: f64,
    pub e2: f64,
}

impl EnergyPair {
    pub fn new(e1: f64, e2: f64) -> Self {
        Self { e1, e2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Empty,
    RegularGraph,
    Fold,
    Degenerate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Empty => "Empty",
            Classification::RegularGraph => "RegularGraph",
            Classification::Fold => "Fold",
            Classification::Degenerate => "Degenerate",
        }
    }
}

/// A caustic curve `{x_axis = coordinate}` in the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausticLocus {
    pub axis: usize,
    pub coordinate: f64,
    /// `D'` at the zero.
    pub slope: f64,
    pub simple: bool,
}

/// Real points of `𝒫⁻¹(E)` over one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPoints {
    pub covectors: Vec<[f64; 2]>,
    /// Some discriminant vanished within tolerance (base point on a caustic).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusData {
    pub model: QciModel,
    pub energy: EnergyPair,
    pub caustics: Vec<CausticLocus>,
    pub classification: Classification,
}

impl TorusData {
    pub fn fiber(&self, x: [f64; 2]) -> Result<FiberPoints> {
        torus_fiber(&self.model, self.energy, x)
    }

    pub fn caustics_on(&self, axis: usize) -> impl Iterator<Item = &CausticLocus> {
        self.caustics.iter().filter(move |c| c.axis == axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub theta: f64,
    pub value: f64,
    pub second_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport {
    pub critical_points: Vec<CriticalPoint>,
    pub is_morse: bool,
    pub min_gap: f64,
    pub tolerance: f64,
}

/// One separated coordinate: `ξ_axis² = D(s)/weight`, with domain metadata.
#[derive(Clone, Copy)]
struct AxisDiscriminant<'a> {
    model: &'a QciModel,
    energy: EnergyPair,
    axis: usize,
}

impl AxisDiscriminant<'_> {
    fn value(&self, s: f64) -> f64 {
        let EnergyPair { e1, e2 } = self.energy;
        match (self.model, self.axis) {
            (QciModel::Revolution(p), _) => {
                let f = p.f(s);
                e1 * f * f - e2 * e2
            }
            (QciModel::Liouville(d), 0) => e2 + e1 * d.a.value(s),
            (QciModel::Liouville(d), _) => e1 * d.b.value(s) - e2,
            (QciModel::LiouvilleOscillator(d), 0) => {
                let t = d.a.value(s) + e1 / 2.0;
                t * t + e2 - e1 * e1 / 4.0
            }
            (QciModel::LiouvilleOscillator(d), _) => {
                let t = d.b.value(s) - e1 / 2.0;
                -t * t + e1 * e1 / 4.0 - e2
            }
            (QciModel::HarmonicOscillator(_), _) => e1 - s * s,
        }
    }

    fn slope(&self, s: f64) -> f64 {
        let EnergyPair { e1, .. } = self.energy;
        match (self.model, self.axis) {
            (QciModel::Revolution(p), _) => 2.0 * e1 * p.f(s) * p.fprime(s),
            (QciModel::Liouville(d), 0) => e1 * d.a.derivative(s, 1),
            (QciModel::Liouville(d), _) => e1 * d.b.derivative(s, 1),
            (QciModel::LiouvilleOscillator(d), 0) => 2.0 * (d.a.value(s) + e1 / 2.0) * d.a.derivative(s, 1),
            (QciModel::LiouvilleOscillator(d), _) => -2.0 * (d.b.value(s) - e1 / 2.0) * d.b.derivative(s, 1),
            (QciModel::HarmonicOscillator(_), _) => -2.0 * s,
        }
    }

    /// Sampling interval; periodic axes use `[0, 1)`.
    fn domain(&self) -> (f64, f64, bool) {
        match self.model {
            QciModel::Revolution(_) => (-1.0, 1.0, false),
            QciModel::Liouville(_) | QciModel::LiouvilleOscillator(_) => (0.0, 1.0, true),
            QciModel::HarmonicOscillator(m) => (-m.truncation, m.truncation, false),
        }
    }

    fn scale(&self) -> f64 {
        let (lo, hi, _) = self.domain();
        let n = 257;
        let s = (0..n)
            .map(|i| self.value(lo + (hi - lo) * i as f64 / (n - 1) as f64).abs())
            .fold(0.0, f64::max);
        s.max(self.energy.e1.abs())
            .max(self.energy.e2.abs())
            .max(f64::MIN_POSITIVE)
    }

    /// Zeros of `D` in the open domain: sign changes (bisection + Newton) and
    /// tangential zeros at critical points of `D`.
    fn zeros(&self) -> Vec<CausticLocus> {
        let (lo, hi, periodic) = self.domain();
        let n = 4096;
        let tol = FIBER_DEGENERACY_TOL * self.scale();
        // Offset keeps samples off the symmetric points where tangential
        // zeros tend to sit.
        let node = |i: usize| lo + (hi - lo) * (i as f64 + 0.4142135623730951) / n as f64;
        let mut out: Vec<CausticLocus> = Vec::new();
        let count = if periodic { n } else { n - 1 };
        for i in 0..count {
            let (s0, s1) = (
                node(i),
                if periodic && i + 1 == n {
                    node(0) + (hi - lo)
                } else {
                    node(i + 1)
                },
            );
            let (d0, d1) = (self.value(s0), self.value(s1));
            if (d0 < 0.0) != (d1 < 0.0) {
                let root = self.polish(s0, s1, |s| self.value(s));
                out.push(self.locus(root, periodic, lo, hi));
            }
            let (g0, g1) = (self.slope(s0), self.slope(s1));
            if (g0 < 0.0) != (g1 < 0.0) {
                let crit = self.polish(s0, s1, |s| self.slope(s));
                if self.value(crit).abs() <= tol {
                    out.push(self.locus(crit, periodic, lo, hi));
                }
            }
        }
        // Endpoints of the revolution chart are poles, not caustics.
        if !periodic {
            out.retain(|c| c.coordinate > lo + 1e-9 && c.coordinate < hi - 1e-9);
        }
        out.sort_by(|a, b| a.coordinate.total_cmp(&b.coordinate));
        out.dedup_by(|a, b| (a.coordinate - b.coordinate).abs() < 1e-9);
        out
    }

    fn locus(&self, s: f64, periodic: bool, lo: f64, hi: f64) -> CausticLocus {
        let coordinate = if periodic { lo + (s - lo).rem_euclid(hi - lo) } else { s };
        let slope = self.slope(coordinate);
        CausticLocus {
            axis: self.axis,
            coordinate,
            slope,
            simple: slope.abs() > SIMPLE_ZERO_TOL,
        }
    }

    fn polish(&self, mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let ga = g(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if (g(m) < 0.0) == (ga < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    fn extrema(&self) -> (f64, f64) {
        let (lo, hi, periodic) = self.domain();
        let n = 4096;
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        let last = if periodic { n - 1 } else { n };
        for i in 0..=last {
            let v = self.value(lo + (hi - lo) * i as f64 / n as f64);
            mn = mn.min(v);
            mx = mx.max(v);
        }
        // Refine at critical points so tangency is exact.
        for i in 0..n {
            let (s0, s1) = (
                lo + (hi - lo) * i as f64 / n as f64,
                lo + (hi - lo) * (i + 1) as f64 / n as f64,
            );
            if (self.slope(s0) < 0.0) != (self.slope(s1) < 0.0) {
                let v = self.value(self.polish(s0, s1, |s| self.slope(s)));
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        (mn, mx)
    }
}

fn axes(model: &QciModel, energy: EnergyPair) -> Vec<AxisDiscriminant<'_>> {
    let n = match model {
        QciModel::Revolution(_) | QciModel::HarmonicOscillator(_) => 1,
        _ => 2,
    };
    (0..n).map(|axis| AxisDiscriminant { model, energy, axis }).collect()
}

/// All real covectors over `x` on the joint level set `𝒫 = E`.
pub fn torus_fiber(model: &QciModel, energy: EnergyPair, x: [f64; 2]) -> Result<FiberPoints> {
    let EnergyPair { e1, e2 } = energy;
    let mut degenerate = false;
    let mut root = |d: f64, weight: f64, scale: f64| -> Option<f64> {
        if d.abs() <= FIBER_DEGENERACY_TOL * scale {
            degenerate = true;
            Some(0.0)
        } else if d > 0.0 {
            Some((d / weight).sqrt())
        } else {
            None
        }
    };
    let signed = |v: f64| if v == 0.0 { vec![0.0] } else { vec![v, -v] };
    let covectors = match model {
        QciModel::Revolution(p) => {
            let r = x[0];
            if !(r.abs() < 1.0) {
                return Err(QciError::OutOfChart(vec![r]));
            }
            let f = p.f(r);
            let d = e1 * f * f - e2 * e2;
            match root(d, f * f, e1.abs().max(e2 * e2)) {
                Some(xr) => signed(xr).into_iter().map(|k| [k, e2]).collect(),
                None => vec![],
            }
        }
        QciModel::Liouville(_) | QciModel::LiouvilleOscillator(_) => {
            let ax = axes(model, energy);
            let scale = e1.abs().max(e2.abs()).max(1.0);
            let k1 = root(ax[0].value(x[0]), 1.0, scale);
            let k2 = root(ax[1].value(x[1]), 1.0, scale);
            match (k1, k2) {
                (Some(a), Some(b)) => {
                    let mut v = Vec::new();
                    for s1 in signed(a) {
                        for s2 in signed(b) {
                            v.push([s1, s2]);
                        }
                    }
                    v
                }
                _ => vec![],
            }
        }
        QciModel::HarmonicOscillator(_) => match root(e1 - x[0] * x[0], 1.0, e1.abs().max(1.0)) {
            Some(k) => signed(k).into_iter().map(|k| [k, 0.0]).collect(),
            None => vec![],
        },
    };
    Ok(FiberPoints { covectors, degenerate })
}

fn check_regular_level(model: &QciModel, e1: f64) -> Result<()> {
    match model {
        QciModel::Revolution(_) | QciModel::Liouville(_) | QciModel::HarmonicOscillator(_) => {
            if e1 == 0.0 {
                return Err(QciError::NotRegularLevel(e1));
            }
        }
        QciModel::LiouvilleOscillator(d) => {
            // dp₁ = 0 only on the zero section over critical points of b - a.
            for xa in d.a.critical_points() {
                for xb in d.b.critical_points() {
                    let v = d.b.value(xb) - d.a.value(xa);
                    if (e1 - v).abs() <= 1e-12 * (1.0 + v.abs()) {
                        return Err(QciError::NotRegularLevel(e1));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Classifies the projection `Λ_ℝ(E) → M` from the root structure of the
/// separated discriminants.
pub fn classify_projection(model: &QciModel, energy: EnergyPair) -> Result<TorusData> {
    check_regular_level(model, energy.e1)?;
    let axes = axes(model, energy);
    let done = |classification, caustics| {
        Ok(TorusData {
            model: model.clone(),
            energy,
            caustics,
            classification,
        })
    };
    if model.is_laplacian() && energy.e1 < 0.0 {
        return done(Classification::Empty, vec![]);
    }

    let mut caustics = Vec::new();
    let mut tangential = false;
    for ax in &axes {
        let (_, max) = ax.extrema();
        let tol = FIBER_DEGENERACY_TOL * ax.scale();
        if max < -tol {
            return done(Classification::Empty, vec![]);
        }
        if max.abs() <= tol {
            // The fiber over this axis collapses to the tangency points.
            tangential = true;
        }
        caustics.extend(ax.zeros());
    }
    let classification = if tangential || caustics.iter().any(|c| !c.simple) {
        Classification::Degenerate
    } else if caustics.is_empty() {
        Classification::RegularGraph
    } else {
        Classification::Fold
    };
    done(classification, caustics)
}

/// Parametrization `θ ↦ ξ(θ)` of `Σ_{x,E₁} = {p₁(x,·) = E₁}` as a circle.
fn shell(model: &QciModel, x: [f64; 2], e1: f64) -> Result<Box<dyn Fn(f64) -> [f64; 2] + Sync + '_>> {
    match model {
        QciModel::Revolution(p) => {
            let r = x[0];
            if !(r.abs() <= 1.0) || p.f(r) <= POLE_FLATNESS * p.max_value() {
                return Err(QciError::PoleSingularity(r));
            }
            if !(e1 > 0.0) {
                return Err(QciError::EmptyShell);
            }
            let f = p.f(r);
            let s = e1.sqrt();
            Ok(Box::new(move |t: f64| [s * t.cos(), s * f * t.sin()]))
        }
        QciModel::Liouville(d) => {
            if !(e1 > 0.0) {
                return Err(QciError::EmptyShell);
            }
            let rad = (e1 * (d.a.value(x[0]) + d.b.value(x[1]))).sqrt();
            Ok(Box::new(move |t: f64| [rad * t.cos(), rad * t.sin()]))
        }
        QciModel::LiouvilleOscillator(d) => {
            let (a, b) = (d.a.value(x[0]), d.b.value(x[1]));
            let r2 = (e1 - b + a) * (a + b);
            if !(r2 > 0.0) {
                return Err(QciError::EmptyShell);
            }
            let rad = r2.sqrt();
            Ok(Box::new(move |t: f64| [rad * t.cos(), rad * t.sin()]))
        }
        QciModel::HarmonicOscillator(_) => Err(QciError::Unsupported("Morse check needs a second integral".into())),
    }
}

/// Critical points of `q(θ) = p₂|_{Σ_{x,E₁}}` and their nondegeneracy.
pub fn morse_check(model: &QciModel, x: [f64; 2], e1: f64) -> Result<MorseReport> {
    let xi = shell(model, x, e1)?;
    let q = |t: f64| -> f64 {
        let k = xi(t);
        eval_p2(model, &PhasePoint::planar(x[0], x[1], k[0], k[1])).unwrap_or(f64::NAN)
    };
    let dq = |t: f64| (q(t + 1e-5) - q(t - 1e-5)) / 2e-5;
    let d2q = |t: f64| (q(t + 1e-4) - 2.0 * q(t) + q(t - 1e-4)) / 1e-8;

    let n = MORSE_SAMPLES;
    // Irrational offset keeps samples off symmetric critical points.
    let theta = |i: usize| 2.0 * PI * (i as f64 + 0.3819660112501051) / n as f64;
    let samples: Vec<f64> = (0..n).map(|i| q(theta(i))).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(QciError::OutOfChart(x.to_vec()));
    }
    let qmax = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-6 * qmax;

    let slopes: Vec<f64> = (0..n).map(|i| dq(theta(i))).collect();
    let mut critical_points = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if (slopes[i] < 0.0) != (slopes[j] < 0.0) {
            let (mut a, mut b) = (theta(i), theta(i) + 2.0 * PI / n as f64);
            let sa = slopes[i] < 0.0;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (dq(m) < 0.0) == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            let mut t = 0.5 * (a + b);
            for _ in 0..2 {
                let curv = d2q(t);
                if curv != 0.0 {
                    let step = dq(t) / curv;
                    if step.abs() < 2.0 * PI / n as f64 {
                        t -= step;
                    }
                }
            }
            let t = t.rem_euclid(2.0 * PI);
            critical_points.push(CriticalPoint {
                theta: t,
                value: q(t),
                second_derivative: d2q(t),
            });
        }
    }
    critical_points.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let min_gap = critical_points
        .iter()
        .map(|c| c.second_derivative.abs())
        .fold(f64::INFINITY, f64::min);
    let is_morse = !critical_points.is_empty() && min_gap > tolerance;
    Ok(MorseReport {
        critical_points,
        is_morse,
        min_gap,
        tolerance,
    })
}

/// `[min, max]` of `p₂` over the sampled shell `p₁ = e1`.
pub fn moment_image_sample(model: &QciModel, e1: f64, n_samples: usize) -> Result<(f64, f64)> {
    if n_samples < 100 {
        return Err(QciError::InvalidInput(format!(
            "moment image needs at least 100 samples, got {n_samples}"
        )));
    }
    let bases: Vec<[f64; 2]> = match model {
        QciModel::HarmonicOscillator(_) => {
            return Err(QciError::Unsupported("the 1D oscillator has no second integral".into()))
        }
        QciModel::Revolution(p) => {
            let mut v: Vec<[f64; 2]> = (1..n_samples)
                .map(|i| [-1.0 + 2.0 * i as f64 / n_samples as f64, 0.0])
                .collect();
            v.push([p.crest(), 0.0]);
            v
        }
        QciModel::Liouville(_) | QciModel::LiouvilleOscillator(_) => (0..n_samples)
            .flat_map(|i| (0..n_samples).map(move |j| [i as f64 / n_samples as f64, j as f64 / n_samples as f64]))
            .collect(),
    };
    let (lo, hi) = bases
        .par_iter()
        .filter_map(|&x| morse_check(model, x, e1).ok())
        .map(|rep| {
            rep.critical_points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.value), hi.max(c.value))
                })
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    if !lo.is_finite() {
        return Err(QciError::EmptyShell);
    }
    Ok((lo, hi))
}
