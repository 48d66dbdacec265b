//! Catalogue of two-dimensional quantum completely integrable systems.
//!
//! Every model is closed-form data: a surface of revolution generated by a
//! named profile `f(r)`, a Liouville torus with finite cosine series `a(x₁)`,
//! `b(x₂)`, the Liouville oscillator on the same torus, and the 1D harmonic
//! oscillator. Symbols are evaluated exactly, so classical computations never
//! see numerical-differentiation noise.
//!
//! Chart conventions:
//! - revolution: `(r, θ) ∈ (-1, 1) × [0, 2π)`, covector `(ξ_r, ξ_θ)`;
//! - Liouville: `(x₁, x₂) ∈ [0, 1)²` with periodic identification, covector `(ξ, η)`;
//! - harmonic oscillator: `x ∈ ℝ`, covector `ξ` (second slots unused).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QciError, Result};

/// Sample count used by the hypothesis checks in [`validate_model`].
pub const VALIDATION_SAMPLES: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `f(r) = A cos(πr/2)`
    Cosine,
    /// `f(r) = A (1 - r²)`; violates the even-derivative condition at the poles.
    Parabola,
}

/// Generating curve `{(r, f(r))}` of a surface of revolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevolutionProfile {
    pub kind: ProfileKind,
    pub amplitude: f64,
    /// Highest `k` for which `f^{(2k)}(±1) = 0` is claimed.
    pub even_order: u32,
}

impl RevolutionProfile {
    pub fn cosine(amplitude: f64) -> Self {
        Self {
            kind: ProfileKind::Cosine,
            amplitude,
            even_order: 3,
        }
    }

    pub fn parabola(amplitude: f64) -> Self {
        Self {
            kind: ProfileKind::Parabola,
            amplitude,
            even_order: 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Cosine => "cosine",
            ProfileKind::Parabola => "parabola",
        }
    }

    #[inline]
    pub fn f(&self, r: f64) -> f64 {
        self.derivative(r, 0)
    }

    #[inline]
    pub fn fprime(&self, r: f64) -> f64 {
        self.derivative(r, 1)
    }

    #[inline]
    pub fn fsecond(&self, r: f64) -> f64 {
        self.derivative(r, 2)
    }

    /// Exact derivative of any order.
    pub fn derivative(&self, r: f64, order: u32) -> f64 {
        let a = self.amplitude;
        match self.kind {
            ProfileKind::Cosine => {
                let k = PI / 2.0;
                a * k.powi(order as i32) * (k * r + order as f64 * PI / 2.0).cos()
            }
            ProfileKind::Parabola => match order {
                0 => a * (1.0 - r * r),
                1 => -2.0 * a * r,
                2 => -2.0 * a,
                _ => 0.0,
            },
        }
    }

    /// Location of the unique critical point of `f` (the equator).
    pub fn crest(&self) -> f64 {
        0.0
    }

    pub fn max_value(&self) -> f64 {
        self.f(self.crest())
    }

    /// The root of `f(r) = level` on the side of the crest given by `sign`
    /// (`+1` toward `r = 1`, `-1` toward `r = -1`).
    pub fn level_crossing(&self, level: f64, sign: f64) -> Option<f64> {
        let fmax = self.max_value();
        if !(level > 0.0 && level <= fmax) {
            return None;
        }
        if level == fmax {
            return Some(self.crest());
        }
        // f is monotone on each side of the crest.
        let (mut lo, mut hi) = if sign >= 0.0 {
            (self.crest(), 1.0)
        } else {
            (-1.0, self.crest())
        };
        let decreasing_in_r = sign >= 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let above = self.f(mid) > level;
            if above == decreasing_in_r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.fprime(r);
            if d == 0.0 {
                break;
            }
            let step = (self.f(r) - level) / d;
            if !step.is_finite() || step.abs() > (hi - lo).abs().max(1e-15) {
                break;
            }
            r -= step;
        }
        Some(r)
    }
}

/// `c₀ + Σ_{k≥1} c_k cos(2πk x)`, 1-periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeries {
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    pub fn derivative(&self, x: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k == 0 {
                if order == 0 {
                    acc += c;
                }
                continue;
            }
            let w = 2.0 * PI * k as f64;
            acc += c * w.powi(order as i32) * (w * x + order as f64 * PI / 2.0).cos();
        }
        acc
    }

    /// Critical points in `[0, 1)`, located by sign changes of the derivative
    /// on a fine grid and polished by Newton on `f'`.
    pub fn critical_points(&self) -> Vec<f64> {
        let n = 4096;
        let d = |x: f64| self.derivative(x, 1);
        let mut out = Vec::new();
        let scale = self.coeffs.iter().skip(1).map(|c| c.abs()).sum::<f64>();
        if scale == 0.0 {
            return out;
        }
        for i in 0..n {
            let x0 = i as f64 / n as f64;
            let x1 = (i + 1) as f64 / n as f64;
            let (d0, d1) = (d(x0), d(x1));
            if d0 == 0.0 || (d0 < 0.0) != (d1 < 0.0) && d1 != 0.0 {
                let root = if d0 == 0.0 { x0 } else { bisect(d, x0, x1) };
                out.push(root.rem_euclid(1.0));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }

    /// `(min, max)` over a period, attained at critical points.
    pub fn extrema(&self) -> (f64, f64) {
        let crit = self.critical_points();
        if crit.is_empty() {
            let v = self.value(0.0);
            return (v, v);
        }
        crit.iter()
            .map(|&x| self.value(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (g(mid) < 0.0) == (glo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Liouville metric data `g = (a(x₁) + b(x₂))(dx₁² + dx₂²)` on `ℝ²/ℤ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleData {
    pub a: CosineSeries,
    pub b: CosineSeries,
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl LiouvilleData {
    pub fn new(a_coeffs: Vec<f64>, b_coeffs: Vec<f64>) -> Result<Self> {
        if a_coeffs.is_empty() || b_coeffs.is_empty() {
            return Err(QciError::InvalidInput(
                "Liouville coefficient lists must be nonempty".into(),
            ));
        }
        if a_coeffs.iter().chain(&b_coeffs).any(|c| !c.is_finite()) {
            return Err(QciError::InvalidInput("Liouville coefficients must be finite".into()));
        }
        let a = CosineSeries::new(a_coeffs);
        let b = CosineSeries::new(b_coeffs);
        let (a_min, a_max) = a.extrema();
        let (b_min, b_max) = b.extrema();
        Ok(Self {
            a,
            b,
            a_min,
            a_max,
            b_min,
            b_max,
        })
    }

    /// `a ≡ a0`, `b ≡ b0`.
    pub fn flat(a0: f64, b0: f64) -> Result<Self> {
        Self::new(vec![a0], vec![b0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOscillatorModel {
    /// Classical energy level `E`.
    pub energy: f64,
    /// Dirichlet truncation `[-L, L]`.
    pub truncation: f64,
}

impl HarmonicOscillatorModel {
    pub fn new(energy: f64, truncation: f64) -> Result<Self> {
        let m = Self { energy, truncation };
        m.check()?;
        Ok(m)
    }

    /// Truncation `2√E + 1`.
    pub fn with_default_truncation(energy: f64) -> Result<Self> {
        Self::new(energy, 2.0 * energy.max(0.0).sqrt() + 1.0)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.energy > 0.0) {
            return Err(QciError::InvalidInput(format!(
                "oscillator energy must be positive, got {}",
                self.energy
            )));
        }
        if !(self.truncation > 2.0 * self.energy.sqrt()) {
            return Err(QciError::InvalidInput(format!(
                "truncation L = {} must exceed 2√E = {}",
                self.truncation,
                2.0 * self.energy.sqrt()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QciModel {
    Revolution(RevolutionProfile),
    Liouville(LiouvilleData),
    /// Liouville metric with potentials `b - a` in `P₁` and `-ab` in `P₂`.
    LiouvilleOscillator(LiouvilleData),
    HarmonicOscillator(HarmonicOscillatorModel),
}

impl QciModel {
    pub fn name(&self) -> &'static str {
        match self {
            QciModel::Revolution(_) => "sor",
            QciModel::Liouville(_) => "liouville",
            QciModel::LiouvilleOscillator(_) => "liouville_oscillator",
            QciModel::HarmonicOscillator(_) => "harmonic_oscillator",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            QciModel::HarmonicOscillator(_) => 1,
            _ => 2,
        }
    }

    pub fn is_laplacian(&self) -> bool {
        matches!(self, QciModel::Revolution(_) | QciModel::Liouville(_))
    }
}

/// A point `(x, ξ)` of `T*M` in the model chart. One-dimensional models use
/// only the first slot of each array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub xi: [f64; 2],
}

impl PhasePoint {
    pub fn planar(x1: f64, x2: f64, xi1: f64, xi2: f64) -> Self {
        Self {
            x: [x1, x2],
            xi: [xi1, xi2],
        }
    }

    pub fn line(x: f64, xi: f64) -> Self {
        Self {
            x: [x, 0.0],
            xi: [xi, 0.0],
        }
    }
}

fn revolution_chart(r: f64) -> Result<()> {
    if r.is_finite() && r.abs() < 1.0 {
        Ok(())
    } else {
        Err(QciError::OutOfChart(vec![r]))
    }
}

/// Principal symbol of `P₁`; `|ξ|²_g` for the Laplacian models.
pub fn eval_p1(model: &QciModel, pt: &PhasePoint) -> Result<f64> {
    let [x1, x2] = pt.x;
    let [k1, k2] = pt.xi;
    Ok(match model {
        QciModel::Revolution(p) => {
            revolution_chart(x1)?;
            let f = p.f(x1);
            k1 * k1 + k2 * k2 / (f * f)
        }
        QciModel::Liouville(d) => (k1 * k1 + k2 * k2) / (d.a.value(x1) + d.b.value(x2)),
        QciModel::LiouvilleOscillator(d) => {
            let (a, b) = (d.a.value(x1), d.b.value(x2));
            (k1 * k1 + k2 * k2) / (a + b) + b - a
        }
        QciModel::HarmonicOscillator(_) => k1 * k1 + x1 * x1,
    })
}

/// Principal symbol of the commuting integral `P₂`.
pub fn eval_p2(model: &QciModel, pt: &PhasePoint) -> Result<f64> {
    let [x1, x2] = pt.x;
    let [k1, k2] = pt.xi;
    match model {
        QciModel::Revolution(_) => {
            revolution_chart(x1)?;
            Ok(k2)
        }
        QciModel::Liouville(d) => {
            let (a, b) = (d.a.value(x1), d.b.value(x2));
            Ok((b * k1 * k1 - a * k2 * k2) / (a + b))
        }
        QciModel::LiouvilleOscillator(d) => {
            let (a, b) = (d.a.value(x1), d.b.value(x2));
            Ok((b * k1 * k1 - a * k2 * k2) / (a + b) - a * b)
        }
        QciModel::HarmonicOscillator(_) => {
            Err(QciError::Unsupported("the 1D oscillator has no second integral".into()))
        }
    }
}

/// Riemannian volume density in the chart coordinates.
pub fn volume_density(model: &QciModel, x: [f64; 2]) -> f64 {
    match model {
        QciModel::Revolution(p) => {
            if x[0].abs() >= 1.0 {
                0.0
            } else {
                p.f(x[0]).max(0.0)
            }
        }
        QciModel::Liouville(d) | QciModel::LiouvilleOscillator(d) => d.a.value(x[0]) + d.b.value(x[1]),
        QciModel::HarmonicOscillator(_) => 1.0,
    }
}

/// `{p₁, p₂}` by centered differences with step `step` in every coordinate.
pub fn poisson_bracket(model: &QciModel, pt: &PhasePoint, step: f64) -> Result<f64> {
    let dim = model.dimension();
    let mut acc = 0.0;
    for i in 0..dim {
        let shift = |dx: f64, dxi: f64| {
            let mut q = *pt;
            q.x[i] += dx;
            q.xi[i] += dxi;
            q
        };
        let d = |g: fn(&QciModel, &PhasePoint) -> Result<f64>, dx: f64, dxi: f64| -> Result<f64> {
            Ok((g(model, &shift(dx, dxi))? - g(model, &shift(-dx, -dxi))?) / (2.0 * step))
        };
        let dxi_p1 = d(eval_p1, 0.0, step)?;
        let dx_p1 = d(eval_p1, step, 0.0)?;
        let dxi_p2 = d(eval_p2, 0.0, step)?;
        let dx_p2 = d(eval_p2, step, 0.0)?;
        acc += dxi_p1 * dx_p2 - dx_p1 * dxi_p2;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(HypothesisCheck {
            name,
            passed,
            detail: detail.into(),
        });
    }
}

/// Checks the structural hypotheses of a model on a dense grid. Failures are
/// reported, never raised.
pub fn validate_model(model: &QciModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    match model {
        QciModel::Revolution(p) => validate_profile(p, &mut report),
        QciModel::Liouville(d) | QciModel::LiouvilleOscillator(d) => validate_liouville(d, &mut report),
        QciModel::HarmonicOscillator(m) => {
            report.push("energy_positive", m.energy > 0.0, format!("E = {}", m.energy));
            let ok = m.energy > 0.0 && m.truncation > 2.0 * m.energy.sqrt();
            report.push("truncation_beyond_turning_points", ok, format!("L = {}", m.truncation));
        }
    }
    report
}

fn validate_profile(p: &RevolutionProfile, report: &mut ValidationReport) {
    let n = VALIDATION_SAMPLES;
    let interior: Vec<f64> = (1..n - 1).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let scale = p.max_value().abs().max(f64::MIN_POSITIVE);

    let ends = p.f(1.0).abs().max(p.f(-1.0).abs());
    report.push(
        "endpoints_vanish",
        ends <= 1e-12 * scale,
        format!("max |f(±1)| = {ends:e}"),
    );

    let min_f = interior.iter().map(|&r| p.f(r)).fold(f64::INFINITY, f64::min);
    report.push("positive_interior", min_f > 0.0, format!("min f on (-1,1) = {min_f:e}"));

    let max_f2 = interior.iter().map(|&r| p.fsecond(r)).fold(f64::NEG_INFINITY, f64::max);
    report.push("concave", max_f2 < 0.0, format!("max f'' on (-1,1) = {max_f2:e}"));

    let mut sign_changes = 0;
    for w in interior.windows(2) {
        if (p.fprime(w[0]) > 0.0) != (p.fprime(w[1]) > 0.0) {
            sign_changes += 1;
        }
    }
    let crest_slope = p.fprime(0.0).abs();
    report.push(
        "single_critical_point",
        sign_changes == 1 && crest_slope <= 1e-12 * scale,
        format!("{sign_changes} sign changes of f', |f'(0)| = {crest_slope:e}"),
    );

    let mut worst = 0.0f64;
    let mut worst_k = 0;
    for k in 0..=p.even_order {
        let d = p.derivative(1.0, 2 * k).abs().max(p.derivative(-1.0, 2 * k).abs());
        let rel = d / scale / (PI / 2.0).powi(2 * k as i32);
        if rel > worst {
            worst = rel;
            worst_k = k;
        }
    }
    report.push(
        "even_derivatives_vanish",
        worst <= 1e-10,
        format!(
            "declared order {}, worst f^({})(±1) relative size {worst:e}",
            p.even_order,
            2 * worst_k
        ),
    );
}

fn validate_liouville(d: &LiouvilleData, report: &mut ValidationReport) {
    report.push("a_positive", d.a_min > 0.0, format!("min a = {}", d.a_min));
    report.push("b_positive", d.b_min > 0.0, format!("min b = {}", d.b_min));
    report.push(
        "a_min_exceeds_b_max",
        d.a_min > d.b_max,
        format!("min a = {}, max b = {}", d.a_min, d.b_max),
    );
    let n = VALIDATION_SAMPLES;
    let mut worst = 0.0f64;
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        worst = worst
            .max((d.a.value(x) - d.a.value(x + 1.0)).abs())
            .max((d.b.value(x) - d.b.value(x + 1.0)).abs());
    }
    report.push("periodic", worst <= 1e-10, format!("max |g(x) - g(x+1)| = {worst:e}"));
}

/// JSON model description: `{"type":"sor","profile":"cosine","amplitude":1.0}`,
/// `{"type":"liouville","a":[2.0,0.3],"b":[0.5,0.2]}`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Sor {
        profile: ProfileKind,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    Liouville {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    LiouvilleOscillator {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    HarmonicOscillator {
        energy: f64,
        #[serde(default)]
        truncation: Option<f64>,
    },
}

fn unit() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> Result<QciModel> {
        Ok(match self {
            ModelSpec::Sor { profile, amplitude } => {
                if !(*amplitude > 0.0) {
                    return Err(QciError::InvalidInput(format!(
                        "profile amplitude must be positive, got {amplitude}"
                    )));
                }
                QciModel::Revolution(match profile {
                    ProfileKind::Cosine => RevolutionProfile::cosine(*amplitude),
                    ProfileKind::Parabola => RevolutionProfile::parabola(*amplitude),
                })
            }
            ModelSpec::Liouville { a, b } => QciModel::Liouville(LiouvilleData::new(a.clone(), b.clone())?),
            ModelSpec::LiouvilleOscillator { a, b } => {
                QciModel::LiouvilleOscillator(LiouvilleData::new(a.clone(), b.clone())?)
            }
            ModelSpec::HarmonicOscillator { energy, truncation } => QciModel::HarmonicOscillator(match truncation {
                Some(l) => HarmonicOscillatorModel::new(*energy, *l)?,
                None => HarmonicOscillatorModel::with_default_truncation(*energy)?,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_liouville() -> LiouvilleData {
        LiouvilleData::new(vec![2.0, 0.3], vec![0.5, 0.2]).unwrap()
    }

    #[test]
    fn p1_examples() {
        let sor = QciModel::Revolution(RevolutionProfile::cosine(1.0));
        assert_eq!(eval_p1(&sor, &PhasePoint::planar(0.0, 0.0, 1.0, 0.0)).unwrap(), 1.0);

        let lv = QciModel::Liouville(cosine_liouville());
        let p = eval_p1(&lv, &PhasePoint::planar(0.0, 0.0, 3f64.sqrt(), 0.0)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);

        let ho = QciModel::HarmonicOscillator(HarmonicOscillatorModel::new(1.0, 3.0).unwrap());
        assert_eq!(eval_p1(&ho, &PhasePoint::line(0.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn p2_examples() {
        let sor = QciModel::Revolution(RevolutionProfile::cosine(1.0));
        assert_eq!(eval_p2(&sor, &PhasePoint::planar(0.5, 0.0, 0.0, 0.7)).unwrap(), 0.7);

        let lv = QciModel::Liouville(cosine_liouville());
        let s3 = 3f64.sqrt();
        assert!((eval_p2(&lv, &PhasePoint::planar(0.0, 0.0, s3, 0.0)).unwrap() - 0.7).abs() < 1e-14);
        assert!((eval_p2(&lv, &PhasePoint::planar(0.0, 0.0, 0.0, s3)).unwrap() + 2.3).abs() < 1e-14);

        let ho = QciModel::HarmonicOscillator(HarmonicOscillatorModel::new(1.0, 3.0).unwrap());
        assert!(matches!(
            eval_p2(&ho, &PhasePoint::line(0.0, 1.0)),
            Err(QciError::Unsupported(_))
        ));
    }

    #[test]
    fn poles_are_out_of_chart() {
        let sor = QciModel::Revolution(RevolutionProfile::cosine(1.0));
        for r in [1.0, -1.0] {
            let pt = PhasePoint::planar(r, 0.0, 1.0, 0.0);
            assert!(matches!(eval_p1(&sor, &pt), Err(QciError::OutOfChart(_))));
            assert!(matches!(eval_p2(&sor, &pt), Err(QciError::OutOfChart(_))));
        }
    }

    #[test]
    fn volume_density_examples() {
        let sor = QciModel::Revolution(RevolutionProfile::cosine(1.0));
        assert_eq!(volume_density(&sor, [0.0, 0.0]), 1.0);
        assert_eq!(volume_density(&sor, [1.0, 0.0]), 0.0);
        let lv = QciModel::Liouville(cosine_liouville());
        assert!((volume_density(&lv, [0.0, 0.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn validation_examples() {
        let cosine = validate_model(&QciModel::Revolution(RevolutionProfile::cosine(1.0)));
        assert!(cosine.all_passed(), "{cosine:?}");

        let parabola = validate_model(&QciModel::Revolution(RevolutionProfile::parabola(1.0)));
        assert!(!parabola.check("even_derivatives_vanish").unwrap().passed);
        assert!(parabola.check("concave").unwrap().passed);

        let reversed = LiouvilleData::new(vec![1.0, 0.3], vec![0.9, 0.2]).unwrap();
        let rep = validate_model(&QciModel::Liouville(reversed));
        assert!(!rep.check("a_min_exceeds_b_max").unwrap().passed);
        assert!(rep.check("a_positive").unwrap().passed);

        assert!(validate_model(&QciModel::Liouville(cosine_liouville())).all_passed());
    }

    #[test]
    fn cosine_series_extrema() {
        let d = cosine_liouville();
        assert!((d.a_min - 1.7).abs() < 1e-14 && (d.a_max - 2.3).abs() < 1e-14);
        assert!((d.b_min - 0.3).abs() < 1e-14 && (d.b_max - 0.7).abs() < 1e-14);
        let crit = d.b.critical_points();
        assert_eq!(crit.len(), 2);
        assert!(crit[0].abs() < 1e-12 && (crit[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn level_crossing_inverts_profile() {
        let p = RevolutionProfile::cosine(1.0);
        let r = p.level_crossing(0.5, 1.0).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-14);
        let l = p.level_crossing(0.5, -1.0).unwrap();
        assert!((l + 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(p.level_crossing(1.5, 1.0), None);
    }

    #[test]
    fn spec_json_round_trip() {
        let s: ModelSpec = serde_json::from_str(r#"{"type":"sor","profile":"cosine","amplitude":1.0}"#).unwrap();
        assert!(matches!(s.build().unwrap(), QciModel::Revolution(_)));
        let l: ModelSpec = serde_json::from_str(r#"{"type":"liouville","a":[2.0,0.3],"b":[0.5,0.2]}"#).unwrap();
        assert_eq!(l.build().unwrap(), QciModel::Liouville(cosine_liouville()));
        assert!(serde_json::from_str::<ModelSpec>(r#"{"type":"liouville","a":[2.0],"b":[0.5],"c":1}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn models() -> Vec<QciModel> {
            vec![
                QciModel::Revolution(RevolutionProfile::cosine(1.0)),
                QciModel::Liouville(cosine_liouville()),
                QciModel::LiouvilleOscillator(cosine_liouville()),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn symbols_commute(x1 in -0.95f64..0.95, x2 in 0.0f64..1.0, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
                let pt = PhasePoint::planar(x1, x2, k1, k2);
                for m in models() {
                    let pb = poisson_bracket(&m, &pt, 1e-5).unwrap();
                    let xi2 = k1 * k1 + k2 * k2;
                    prop_assert!(pb.abs() <= 1e-6 * (1.0 + xi2 * xi2), "{} {pb:e}", m.name());
                }
            }

            #[test]
            fn p1_is_nonnegative_quadratic(x1 in -0.95f64..0.95, x2 in 0.0f64..1.0, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
                for m in models().into_iter().filter(QciModel::is_laplacian) {
                    let p = eval_p1(&m, &PhasePoint::planar(x1, x2, k1, k2)).unwrap();
                    let p2 = eval_p1(&m, &PhasePoint::planar(x1, x2, 2.0 * k1, 2.0 * k2)).unwrap();
                    prop_assert!(p >= 0.0);
                    prop_assert!((p2 - 4.0 * p).abs() <= 1e-12 * p2.abs().max(f64::MIN_POSITIVE));
                }
            }

            #[test]
            fn volume_is_positive_on_open_chart(x1 in -0.999f64..0.999, x2 in 0.0f64..1.0) {
                for m in models() {
                    prop_assert!(volume_density(&m, [x1, x2]) > 0.0);
                }
            }
        }
    }
}
