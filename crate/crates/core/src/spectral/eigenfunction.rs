use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::sturm_liouville::EigenSolution1D;
use crate::error::{QciError, Result};
use crate::models::{LiouvilleData, RevolutionProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantumNumbers {
    /// Angular momentum `m` and radial ordinal.
    Revolution {
        m: i64,
        radial: i64,
    },
    /// Signed branch indices of the two separated factors.
    Torus {
        j: i64,
        k: i64,
    },
    Line {
        n: i64,
    },
}

impl QuantumNumbers {
    pub fn pair(&self) -> (i64, i64) {
        match *self {
            QuantumNumbers::Revolution { m, radial } => (m, radial),
            QuantumNumbers::Torus { j, k } => (j, k),
            QuantumNumbers::Line { n } => (n, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// `u(r, θ) = v(r) e^{imθ} / √(2π)` with `Σ v² f dr = 1`.
    Revolution {
        profile: RevolutionProfile,
        radial: EigenSolution1D,
    },
    /// `u = scale · v(x₁) w(x₂)` with unit `v`, `w` in `ℓ²(dx)`.
    Torus {
        data: LiouvilleData,
        x1: EigenSolution1D,
        x2: EigenSolution1D,
        scale: f64,
    },
    Line {
        factor: EigenSolution1D,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEigenfunction {
    pub h: f64,
    pub qn: QuantumNumbers,
    pub e1: f64,
    pub e2: Option<f64>,
    pub layout: Layout,
}

/// Axis-wise interval sets; `None` leaves an axis unrestricted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    #[serde(default)]
    pub x1: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub x2: Option<Vec<[f64; 2]>>,
}

impl Region {
    pub fn global() -> Self {
        Self {
            name: "global".into(),
            x1: None,
            x2: None,
        }
    }

    /// `|r| ≤ 1 - radius`.
    pub fn away_from_poles(radius: f64) -> Self {
        Self {
            name: "awayFromPoles".into(),
            x1: Some(vec![[-1.0 + radius, 1.0 - radius]]),
            x2: None,
        }
    }

    /// `|r| ≥ 1 - radius`.
    pub fn pole_ball(radius: f64) -> Self {
        Self {
            name: "poleBall".into(),
            x1: Some(vec![[-1.0, -1.0 + radius], [1.0 - radius, 1.0]]),
            x2: None,
        }
    }

    pub fn interval(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            x1: Some(vec![[lo, hi]]),
            x2: None,
        }
    }

    /// Built-in names: `global`, `awayFromPoles` (`|r| ≤ 0.9`) and
    /// `poleBall` (`|r| ≥ 0.97`).
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "global" => Some(Self::global()),
            "awayFromPoles" => Some(Self::away_from_poles(0.1)),
            "poleBall" => Some(Self::pole_ball(0.03)),
            _ => None,
        }
    }

    pub fn axis(&self, axis: usize) -> Option<&[[f64; 2]]> {
        if axis == 0 {
            self.x1.as_deref()
        } else {
            self.x2.as_deref()
        }
    }

    pub fn contains_on(&self, axis: usize, s: f64) -> bool {
        match self.axis(axis) {
            None => true,
            Some(iv) => iv.iter().any(|[a, b]| s >= *a && s <= *b),
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.contains_on(0, x[0]) && self.contains_on(1, x[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupNorm {
    pub value: f64,
    pub location: [f64; 2],
}

/// Largest `|values|` on grid nodes accepted by `keep`.
fn masked_max(f: &EigenSolution1D, keep: impl Fn(f64) -> bool) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (i, v) in f.values.iter().enumerate() {
        let x = f.grid.point(i);
        if keep(x) && best.is_none_or(|(m, _)| v.abs() > m) {
            best = Some((v.abs(), x));
        }
    }
    best
}

impl JointEigenfunction {
    pub fn line(h: f64, factor: EigenSolution1D) -> Self {
        Self {
            h,
            qn: QuantumNumbers::Line { n: factor.index },
            e1: factor.lambda,
            e2: None,
            layout: Layout::Line { factor },
        }
    }

    /// `∫|u|² dVol` from the factors.
    pub fn l2_norm_sq(&self) -> f64 {
        match &self.layout {
            Layout::Revolution { profile, radial } => {
                let dr = radial.grid.spacing();
                radial
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * v * profile.f(radial.grid.point(i)))
                    .sum::<f64>()
                    * dr
            }
            Layout::Torus { data, x1, x2, scale } => {
                let (dx1, dx2) = (x1.grid.spacing(), x2.grid.spacing());
                let moment = |f: &EigenSolution1D, w: &dyn Fn(f64) -> f64| {
                    f.values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * v * w(f.grid.point(i)))
                        .sum::<f64>()
                };
                let (va, v1) = (moment(x1, &|x| data.a.value(x)) * dx1, moment(x1, &|_| 1.0) * dx1);
                let (wb, w1) = (moment(x2, &|x| data.b.value(x)) * dx2, moment(x2, &|_| 1.0) * dx2);
                scale * scale * (va * w1 + v1 * wb)
            }
            Layout::Line { factor } => factor.norm_sq(),
        }
    }

    /// `|u|` at the grid node nearest to `x`.
    pub fn abs_at(&self, x: [f64; 2]) -> f64 {
        match &self.layout {
            Layout::Revolution { radial, .. } => radial.values[radial.grid.nearest(x[0])].abs() / (2.0 * PI).sqrt(),
            Layout::Torus { x1, x2, scale, .. } => {
                let v = x1.values[x1.grid.nearest(x[0].rem_euclid(1.0))];
                let w = x2.values[x2.grid.nearest(x[1].rem_euclid(1.0))];
                (scale * v * w).abs()
            }
            Layout::Line { factor } => factor.values[factor.grid.nearest(x[0])].abs(),
        }
    }

    /// The factor that carries the caustic structure: radial for surfaces of
    /// revolution, the whole function on a line. Torus functions return the
    /// `x₁` factor.
    pub fn primary_factor(&self) -> &EigenSolution1D {
        match &self.layout {
            Layout::Revolution { radial, .. } => radial,
            Layout::Torus { x1, .. } => x1,
            Layout::Line { factor } => factor,
        }
    }

    pub fn residual(&self) -> f64 {
        match &self.layout {
            Layout::Revolution { radial, .. } => radial.residual,
            Layout::Torus { x1, x2, .. } => x1.residual.max(x2.residual),
            Layout::Line { factor } => factor.residual,
        }
    }
}

/// `max |u|` over the grid nodes of `region`.
pub fn sup_norm(u: &JointEigenfunction, region: &Region) -> Result<SupNorm> {
    match &u.layout {
        Layout::Revolution { radial, .. } => {
            let theta_ok = region
                .axis(1)
                .is_none_or(|iv| iv.iter().any(|[a, b]| *b >= 0.0 && *a < 2.0 * PI && a <= b));
            let theta = region
                .axis(1)
                .and_then(|iv| iv.first())
                .map_or(0.0, |[a, _]| a.max(0.0));
            match masked_max(radial, |r| region.contains_on(0, r)) {
                Some((m, r)) if theta_ok => Ok(SupNorm {
                    value: m / (2.0 * PI).sqrt(),
                    location: [r, theta],
                }),
                _ => Err(QciError::EmptyRegion),
            }
        }
        Layout::Torus { x1, x2, scale, .. } => {
            let a = masked_max(x1, |x| region.contains_on(0, x));
            let b = masked_max(x2, |x| region.contains_on(1, x));
            match (a, b) {
                (Some((ma, xa)), Some((mb, xb))) => Ok(SupNorm {
                    value: scale * ma * mb,
                    location: [xa, xb],
                }),
                _ => Err(QciError::EmptyRegion),
            }
        }
        Layout::Line { factor } => match masked_max(factor, |x| region.contains_on(0, x)) {
            Some((m, x)) => Ok(SupNorm {
                value: m,
                location: [x, 0.0],
            }),
            None => Err(QciError::EmptyRegion),
        },
    }
}
