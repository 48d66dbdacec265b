//! Action functions on the forbidden region of separable models.
//!
//! In every separated coordinate the action is a turning-point integral
//! `S(x) = ∫_α^x √(R(s)) ds` of the (nonnegative) momentum deficit `R`. The
//! substitution `s = α ± t²` turns a root of odd multiplicity `2k + 1` into
//! the smooth integrand `2t·√R(α ± t²) ~ t^{2k+2}`.

pub mod quadrature;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::EnergyPair;
use crate::error::{QciError, Result};
use crate::models::{LiouvilleData, RevolutionProfile};
use quadrature::integrate;

pub const ACTION_REL_TOL: f64 = 1e-10;
/// Deficits below `-NEGATIVE_TOL·scale` mean the path left the forbidden side.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Distance to a pole below which the revolution action is truncated.
pub const POLE_CUTOFF: f64 = 1e-3;
pub const NEAR_POLE_F: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub location: f64,
    /// Odd order of vanishing of the deficit.
    pub multiplicity: u32,
}

/// Momentum deficit `R(s)` with its turning points.
#[derive(Clone)]
pub struct TurningPointData {
    pub roots: Vec<TurningPoint>,
    pub deficit: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Magnitude used by the negativity check.
    pub scale: f64,
}

impl fmt::Debug for TurningPointData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TurningPointData")
            .field("roots", &self.roots)
            .field("scale", &self.scale)
            .finish()
    }
}

impl TurningPointData {
    pub fn new(
        mut roots: Vec<TurningPoint>,
        deficit: impl Fn(f64) -> f64 + Send + Sync + 'static,
        scale: f64,
    ) -> Result<Self> {
        if roots.is_empty() {
            return Err(QciError::InvalidInput(
                "turning-point data needs at least one root".into(),
            ));
        }
        if let Some(r) = roots.iter().find(|r| r.multiplicity % 2 == 0) {
            return Err(QciError::InvalidInput(format!(
                "turning point at {} has even multiplicity",
                r.location
            )));
        }
        roots.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Self {
            roots,
            deficit: Arc::new(deficit),
            scale: scale.abs().max(f64::MIN_POSITIVE),
        })
    }

    pub fn nearest_root(&self, x: f64) -> &TurningPoint {
        self.roots
            .iter()
            .min_by(|a, b| (a.location - x).abs().total_cmp(&(b.location - x).abs()))
            .expect("roots are nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionValue {
    pub value: f64,
    pub error: f64,
    /// Set when the point was too close to a pole and `value` is `+∞`.
    pub truncated: bool,
}

impl ActionValue {
    fn zero() -> Self {
        Self {
            value: 0.0,
            error: 0.0,
            truncated: false,
        }
    }
}

/// `∫ √R` from `root` to `x` along the straight path.
fn turning_integral(
    deficit: &(dyn Fn(f64) -> f64 + Send + Sync),
    scale: f64,
    root: f64,
    x: f64,
    rel_tol: f64,
) -> Result<ActionValue> {
    if x == root {
        return Ok(ActionValue::zero());
    }
    let sigma = (x - root).signum();
    let tmax = (x - root).abs().sqrt();
    let floor = -NEGATIVE_TOL * scale;
    let r = integrate(
        |t| {
            let s = root + sigma * t * t;
            let d = deficit(s);
            if d < floor {
                return Err(QciError::NegativeIntegrand { at: s, value: d });
            }
            Ok(2.0 * t * d.max(0.0).sqrt())
        },
        0.0,
        tmax,
        rel_tol,
        1e-300,
    )?;
    Ok(ActionValue {
        value: r.value,
        error: r.error,
        truncated: false,
    })
}

/// Action at `x` measured from the nearest turning point.
pub fn action_1d(tp: &TurningPointData, x: f64) -> Result<ActionValue> {
    action_1d_tol(tp, x, ACTION_REL_TOL)
}

pub fn action_1d_tol(tp: &TurningPointData, x: f64, rel_tol: f64) -> Result<ActionValue> {
    let root = tp.nearest_root(x).location;
    turning_integral(tp.deficit.as_ref(), tp.scale, root, x, rel_tol)
}

/// `S = ∫_{x₀}^{x} √(s² - E) ds` from the turning point `x₀ = ±√E`.
pub fn oscillator_turning_points(energy: f64) -> Result<TurningPointData> {
    if !(energy > 0.0) {
        return Err(QciError::InvalidInput(format!(
            "oscillator energy must be positive, got {energy}"
        )));
    }
    let x0 = energy.sqrt();
    TurningPointData::new(
        vec![
            TurningPoint {
                location: -x0,
                multiplicity: 1,
            },
            TurningPoint {
                location: x0,
                multiplicity: 1,
            },
        ],
        move |s| s * s - energy,
        energy,
    )
}

pub fn ho_action(energy: f64, x: f64) -> Result<ActionValue> {
    let tp = oscillator_turning_points(energy)?;
    if x * x <= energy {
        return Err(QciError::AllowedRegion(vec![x]));
    }
    action_1d(&tp, x)
}

/// Turning points of the radial problem at `energy`: `f(r_c) = |E₂|/√E₁`.
pub fn sor_turning_points(profile: &RevolutionProfile, energy: EnergyPair) -> Result<TurningPointData> {
    let EnergyPair { e1, e2 } = energy;
    if !(e1 > 0.0) {
        return Err(QciError::InvalidInput(format!("E₁ must be positive, got {e1}")));
    }
    let level = e2.abs() / e1.sqrt();
    if !(level > 0.0 && level < profile.max_value()) {
        return Err(QciError::InvalidInput(format!(
            "|E₂|/√E₁ = {level} must lie in (0, max f)"
        )));
    }
    let left = profile
        .level_crossing(level, -1.0)
        .ok_or(QciError::InvalidInput("no caustic left of the crest".into()))?;
    let right = profile
        .level_crossing(level, 1.0)
        .ok_or(QciError::InvalidInput("no caustic right of the crest".into()))?;
    let p = *profile;
    TurningPointData::new(
        vec![
            TurningPoint {
                location: left,
                multiplicity: 1,
            },
            TurningPoint {
                location: right,
                multiplicity: 1,
            },
        ],
        move |s| {
            let f = p.f(s);
            e2 * e2 / (f * f) - e1
        },
        e1.max(e2 * e2),
    )
}

/// `S(r) = ∫_{r_c}^{r} √(E₂²/f² - E₁) ds` on the polar side of the caustic.
pub fn sor_action_at(profile: &RevolutionProfile, energy: EnergyPair, r: f64) -> Result<ActionValue> {
    if !(r > -1.0 && r < 1.0) {
        return Err(QciError::OutOfChart(vec![r]));
    }
    let f = profile.f(r);
    let scale = energy.e1.abs().max(energy.e2 * energy.e2);
    if energy.e2 * energy.e2 - f * f * energy.e1 < -NEGATIVE_TOL * scale {
        return Err(QciError::AllowedRegion(vec![r]));
    }
    if 1.0 - r.abs() < POLE_CUTOFF {
        log::warn!("r = {r} is within {POLE_CUTOFF} of a pole; action truncated");
        return Ok(ActionValue {
            value: f64::INFINITY,
            error: 0.0,
            truncated: true,
        });
    }
    if f < NEAR_POLE_F {
        log::warn!("f({r}) = {f:e} near a pole; the deficit is large");
    }
    let tp = sor_turning_points(profile, energy)?;
    action_1d(&tp, r)
}

/// The action on the unit level `E₁ = 1`.
pub fn sor_action(profile: &RevolutionProfile, e2: f64, r: f64) -> Result<ActionValue> {
    sor_action_at(profile, EnergyPair::new(1.0, e2), r)
}

/// One periodic separated coordinate with deficit `R(s)`; forbidden where
/// `R > 0`. Returns `min` over the caustics on either side.
fn periodic_axis_action(
    deficit: &(dyn Fn(f64) -> f64 + Send + Sync),
    scale: f64,
    x: f64,
) -> Result<Option<ActionValue>> {
    let dx0 = deficit(x);
    if dx0 < 0.0 {
        return Ok(None);
    }
    if dx0 <= NEGATIVE_TOL * scale {
        return Ok(Some(ActionValue::zero()));
    }
    let n = 4096;
    let dx = 1.0 / n as f64;
    let find = |dir: f64| -> Option<f64> {
        let mut a = x;
        for _ in 0..n {
            let b = a + dir * dx;
            if deficit(b) <= 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if m == lo || m == hi {
                        break;
                    }
                    if deficit(m) > 0.0 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                return Some(if deficit(lo).abs() < deficit(hi).abs() { lo } else { hi });
            }
            a = b;
        }
        None
    };
    let (Some(left), Some(right)) = (find(-1.0), find(1.0)) else {
        return Err(QciError::Unsupported("deficit has no zero on the circle".into()));
    };
    let sl = turning_integral(deficit, scale, left, x, ACTION_REL_TOL)?;
    let sr = turning_integral(deficit, scale, right, x, ACTION_REL_TOL)?;
    Ok(Some(if sl.value <= sr.value { sl } else { sr }))
}

/// `S(x) = S_a(x₁) + S_b(x₂)` with deficits `-(E₂ + E₁a)` and `E₂ - E₁b`.
pub fn liouville_action(data: &LiouvilleData, energy: EnergyPair, x: [f64; 2]) -> Result<ActionValue> {
    let EnergyPair { e1, e2 } = energy;
    let (a, b) = (data.a.clone(), data.b.clone());
    let scale = e1.abs() * data.a_max + e2.abs();
    let da = move |s: f64| -(e2 + e1 * a.value(s));
    let db = move |s: f64| e2 - e1 * b.value(s);
    let sa = periodic_axis_action(&da, scale, x[0].rem_euclid(1.0))?;
    let sb = periodic_axis_action(&db, scale, x[1].rem_euclid(1.0))?;
    match (sa, sb) {
        (None, None) => Err(QciError::AllowedRegion(x.to_vec())),
        (p, q) => {
            let p = p.unwrap_or(ActionValue::zero());
            let q = q.unwrap_or(ActionValue::zero());
            Ok(ActionValue {
                value: p.value + q.value,
                error: p.error + q.error,
                truncated: false,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ActionBranch {
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionSample {
    pub x: [f64; 2],
    pub s: f64,
    pub dist_to_caustic: f64,
    pub err: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionField {
    pub samples: Vec<ActionSample>,
    /// Caustic coordinate on the sampled axis.
    pub caustic: f64,
    pub axis: usize,
    pub branch: ActionBranch,
}

impl ActionField {
    /// Samples `S` at points `x` along `axis`; `action` maps a point to `S`.
    pub fn sample<F>(points: &[[f64; 2]], axis: usize, caustic: f64, action: F) -> Result<Self>
    where
        F: Fn([f64; 2]) -> Result<ActionValue> + Sync,
    {
        let samples = points
            .par_iter()
            .map(|&x| {
                let v = action(x)?;
                Ok(ActionSample {
                    x,
                    s: v.value,
                    dist_to_caustic: (x[axis] - caustic).abs(),
                    err: v.error,
                    truncated: v.truncated,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            caustic,
            axis,
            branch: ActionBranch::Plus,
        })
    }
}

/// Points `caustic + side·d` for `d` log-spaced on `[lo, hi]`.
pub fn log_spaced_offsets(caustic: f64, side: f64, lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    (0..count)
        .map(|i| {
            let d = lo * 10f64.powf(decades * i as f64 / (count - 1) as f64);
            caustic + side * d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldFit {
    /// `(window width, slope, sample count)` for each window `[w/100, w]`.
    pub windows: Vec<(f64, f64, usize)>,
    /// Slope on the smallest window.
    pub exponent: f64,
    /// Linear-in-width extrapolation from the two smallest windows.
    pub extrapolated: f64,
}

pub const FIT_SAMPLES_PER_DECADE: usize = 8;

/// Least-squares slope of `log S` against `log dist` on each window
/// `[w/100, w]` of distance to `caustic`.
pub fn fold_exponent_fit(field: &ActionField, caustic: f64, window_widths: &[f64]) -> Result<FoldFit> {
    if window_widths.is_empty() {
        return Err(QciError::InsufficientSamples("no windows requested".into()));
    }
    let mut widths = window_widths.to_vec();
    widths.sort_by(|a, b| b.total_cmp(a));
    let mut windows = Vec::new();
    for &w in &widths {
        let pts: Vec<(f64, f64)> = field
            .samples
            .iter()
            .map(|s| ((s.x[field.axis] - caustic).abs(), s.s))
            .filter(|&(d, s)| d >= w / 100.0 * (1.0 - 1e-12) && d <= w * (1.0 + 1e-12) && s > 0.0 && s.is_finite())
            .map(|(d, s)| (d.ln(), s.ln()))
            .collect();
        if pts.len() < 2 * FIT_SAMPLES_PER_DECADE {
            return Err(QciError::InsufficientSamples(format!(
                "{} samples in [{:e}, {:e}], need {}",
                pts.len(),
                w / 100.0,
                w,
                2 * FIT_SAMPLES_PER_DECADE
            )));
        }
        windows.push((w, ols_slope(&pts), pts.len()));
    }
    let exponent = windows.last().expect("nonempty").1;
    let extrapolated = if windows.len() >= 2 {
        let (w1, s1, _) = windows[windows.len() - 2];
        let (w2, s2, _) = windows[windows.len() - 1];
        s2 - (s1 - s2) * w2 / (w1 - w2)
    } else {
        exponent
    };
    Ok(FoldFit {
        windows,
        exponent,
        extrapolated,
    })
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_action_closed_form() {
        let s = ho_action(1.0, 2f64.sqrt()).unwrap();
        let x: f64 = 2f64.sqrt();
        let exact = x * (x * x - 1.0).sqrt() / 2.0 - 0.5 * (x + (x * x - 1.0).sqrt()).ln();
        assert!((s.value - exact).abs() < 1e-12 * exact, "{} {exact}", s.value);
        assert!((s.value - 0.26642).abs() < 1e-5);
        assert_eq!(
            action_1d(&oscillator_turning_points(1.0).unwrap(), 1.0).unwrap().value,
            0.0
        );
    }

    #[test]
    fn wrong_side_is_negative_integrand() {
        let tp = oscillator_turning_points(1.0).unwrap();
        assert!(matches!(action_1d(&tp, 0.5), Err(QciError::NegativeIntegrand { .. })));
    }

    #[test]
    fn cubic_root_gives_five_halves() {
        let r = 0.3;
        let tp = TurningPointData::new(
            vec![TurningPoint {
                location: r,
                multiplicity: 3,
            }],
            move |s| (s - r).powi(3),
            1.0,
        )
        .unwrap();
        let xs = log_spaced_offsets(r, 1.0, 1e-4, 1e-2, 16);
        let pts: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let field = ActionField::sample(&pts, 0, r, |x| action_1d(&tp, x[0])).unwrap();
        let fit = fold_exponent_fit(&field, r, &[1e-2]).unwrap();
        assert!((fit.exponent - 2.5).abs() < 1e-6, "{}", fit.exponent);
    }

    #[test]
    fn sor_action_examples() {
        let p = RevolutionProfile::cosine(1.0);
        assert!(sor_action(&p, 0.5, 2.0 / 3.0).unwrap().value.abs() < 1e-10);
        assert!(matches!(sor_action(&p, 0.5, 0.5), Err(QciError::AllowedRegion(_))));
        let s = sor_action(&p, 0.5, 0.8).unwrap().value;
        let s_mirror = sor_action(&p, 0.5, -0.8).unwrap().value;
        assert!((s - s_mirror).abs() < 1e-10);
        assert!(s > 0.0);
        assert!(sor_action(&p, 0.5, 0.9995).unwrap().truncated);
    }

    #[test]
    fn liouville_action_examples() {
        let d = LiouvilleData::new(vec![2.0, 0.3], vec![0.5, 0.2]).unwrap();
        let e = EnergyPair::new(1.0, 0.5);
        assert!(liouville_action(&d, e, [0.0, 0.25]).unwrap().value < 1e-12);
        let s = liouville_action(&d, e, [0.0, 0.5]).unwrap().value;
        assert!(s > 0.0);
        assert!(matches!(
            liouville_action(&d, EnergyPair::new(1.0, 0.0), [0.3, 0.6]),
            Err(QciError::AllowedRegion(_))
        ));
    }
}
