//! Randomized invariant checks. Each check draws its inputs from the given
//! generator and returns a short description or the first violation.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use qci_core::action::{action_1d_tol, liouville_action, sor_action, sor_turning_points};
use qci_core::asymptotics::{
    decay_field, decay_profile, default_h_values, hormander_ceiling, nearest_level, prefix_fits, supnorm_scan, Family,
    HSweep, ScanOptions,
};
use qci_core::classical::{classify_projection, morse_check, torus_fiber, Classification, EnergyPair};
use qci_core::fbi::{fbi_transform, lift_even, plane_wave, FbiGrid};
use qci_core::models::{
    eval_p1, eval_p2, poisson_bracket, volume_density, HarmonicOscillatorModel, LiouvilleData, PhasePoint, QciModel,
    RevolutionProfile,
};
use qci_core::spectral::liouville::{default_lambda_scan, p2_rayleigh};
use qci_core::spectral::oracle::{compare_with_oracle, OracleGrid};
use qci_core::spectral::{
    ho_eigs, liouville_joint_eigs, sor_mode, JointEigenfunction, Layout, LiouvilleOptions, Region, Separation,
    SorOptions, SpectralWindow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<String, String>;
pub type Check = fn(&mut ChaCha8Rng) -> Outcome;

/// `(name, check, cases)`; the case counts keep the whole suite near a minute.
pub const ALL: &[(&str, Check, usize)] = &[
    ("commutation", commutation, 64),
    ("p1_homogeneity", p1_homogeneity, 64),
    ("volume_density_positive", volume_density_positive, 64),
    ("fiber_round_trip", fiber_round_trip, 64),
    ("fold_dichotomy", fold_dichotomy, 32),
    ("morse_parity", morse_parity, 32),
    ("liouville_is_morse", liouville_is_morse, 32),
    ("eigen_residuals", eigen_residuals, 8),
    ("normalization", normalization, 8),
    ("grid_convergence", grid_convergence, 6),
    ("separation_identity", separation_identity, 4),
    ("oracle_agreement", oracle_agreement, 1),
    ("p2_consistency", p2_consistency, 6),
    ("action_monotone", action_monotone, 16),
    ("branch_symmetry", branch_symmetry, 32),
    ("quadrature_robustness", quadrature_robustness, 32),
    ("liouville_additivity", liouville_additivity, 16),
    ("monotone_information", monotone_information, 64),
    ("hormander_ceiling", hormander_ceiling_holds, 64),
    ("decay_defect_monotone", decay_defect_monotone, 4),
    ("scan_determinism", scan_determinism, 1),
    ("fbi_norm_stability", fbi_norm_stability, 8),
    ("fbi_peak_covariance", fbi_peak_covariance, 8),
    ("fbi_mu_robustness", fbi_mu_robustness, 8),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `check` on `cases` generators derived from `seed`.
pub fn run_cases(check: Check, seed: u64, cases: usize) -> Outcome {
    let mut last = String::new();
    for i in 0..cases as u64 {
        let case_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i);
        last = check(&mut rng(case_seed)).map_err(|e| format!("case {i} (seed {case_seed}): {e}"))?;
    }
    Ok(last)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: qci_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// `a = a₀ + a₁cos 2πx (+ a₂cos 4πx)`, likewise `b`, with `a > b > 0`.
pub fn random_liouville(rng: &mut ChaCha8Rng, second_harmonic: bool) -> LiouvilleData {
    let a0 = rng.random_range(1.5..3.0);
    let a1 = rng.random_range(0.05..0.5);
    let b0 = rng.random_range(0.3..1.0);
    let b1 = rng.random_range(0.05..0.4 * b0);
    let (mut a, mut b) = (vec![a0, a1], vec![b0, b1]);
    if second_harmonic {
        a.push(rng.random_range(-0.1..0.1));
        b.push(rng.random_range(-0.05..0.05) * b0);
    }
    LiouvilleData::new(a, b).expect("coefficients are admissible")
}

fn random_profile(rng: &mut ChaCha8Rng) -> RevolutionProfile {
    let amp = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        RevolutionProfile::cosine(amp)
    } else {
        RevolutionProfile::parabola(amp)
    }
}

/// A two-dimensional model and an interior chart point.
fn random_planar(rng: &mut ChaCha8Rng) -> (QciModel, [f64; 2]) {
    match rng.random_range(0..3) {
        0 => (
            QciModel::Revolution(random_profile(rng)),
            [rng.random_range(-0.95..0.95), rng.random_range(0.0..2.0 * PI)],
        ),
        1 => (
            QciModel::Liouville(random_liouville(rng, true)),
            [rng.random(), rng.random()],
        ),
        _ => (
            QciModel::LiouvilleOscillator(random_liouville(rng, true)),
            [rng.random(), rng.random()],
        ),
    }
}

// ---- models ----

pub fn commutation(rng: &mut ChaCha8Rng) -> Outcome {
    let (model, x) = random_planar(rng);
    let xi = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
    let pt = PhasePoint::planar(x[0], x[1], xi[0], xi[1]);
    let pb = core(poisson_bracket(&model, &pt, 1e-5))?;
    let k = xi[0].hypot(xi[1]);
    let bound = 1e-6 * (1.0 + k.powi(4));
    ensure(pb.abs() <= bound, || {
        format!("{}: {{p1,p2}} = {pb:e} > {bound:e} at {x:?} {xi:?}", model.name())
    })?;
    Ok(format!("|{{p1,p2}}| = {:e}", pb.abs()))
}

pub fn p1_homogeneity(rng: &mut ChaCha8Rng) -> Outcome {
    let (model, x) = loop {
        let (m, x) = random_planar(rng);
        if m.is_laplacian() {
            break (m, x);
        }
    };
    let xi = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
    let p = core(eval_p1(&model, &PhasePoint::planar(x[0], x[1], xi[0], xi[1])))?;
    let p2 = core(eval_p1(
        &model,
        &PhasePoint::planar(x[0], x[1], 2.0 * xi[0], 2.0 * xi[1]),
    ))?;
    ensure(p >= 0.0, || format!("p1 = {p} < 0"))?;
    ensure((p2 - 4.0 * p).abs() <= 1e-12 * 4.0 * p, || {
        format!("p1(2ξ) = {p2}, 4 p1(ξ) = {}", 4.0 * p)
    })?;
    Ok(format!("p1 = {p:.3}"))
}

pub fn volume_density_positive(rng: &mut ChaCha8Rng) -> Outcome {
    let (model, x) = random_planar(rng);
    let v = volume_density(&model, x);
    ensure(v > 0.0, || format!("{}: density {v} at {x:?}", model.name()))?;
    Ok(format!("density {v:.3}"))
}

// ---- classical ----

pub fn fiber_round_trip(rng: &mut ChaCha8Rng) -> Outcome {
    let choice = rng.random_range(0..4);
    let (model, x, e) = match choice {
        0 => {
            let p = RevolutionProfile::cosine(rng.random_range(0.5..2.0));
            let e1: f64 = rng.random_range(0.5..2.0);
            let e2 = rng.random_range(-1.2..1.2) * e1.sqrt() * p.max_value();
            (
                QciModel::Revolution(p),
                [rng.random_range(-0.95..0.95), rng.random_range(0.0..2.0 * PI)],
                EnergyPair::new(e1, e2),
            )
        }
        1 | 2 => {
            let d = random_liouville(rng, true);
            let e1 = rng.random_range(0.5..2.0);
            let e2 = rng.random_range(-(d.a_max * e1) - 0.5..d.b_max * e1 + 0.5);
            let m = if choice == 1 {
                QciModel::Liouville(d)
            } else {
                QciModel::LiouvilleOscillator(d)
            };
            (m, [rng.random(), rng.random()], EnergyPair::new(e1, e2))
        }
        _ => {
            let e1 = rng.random_range(0.5..2.0);
            let m = QciModel::HarmonicOscillator(HarmonicOscillatorModel::with_default_truncation(e1).unwrap());
            (m, [rng.random_range(-2.0..2.0), 0.0], EnergyPair::new(e1, 0.0))
        }
    };
    let fiber = match torus_fiber(&model, e, x) {
        Ok(f) => f,
        Err(qci_core::QciError::EmptyShell) => return Ok("empty fiber".into()),
        Err(err) => return Err(format!("{}: {err}", model.name())),
    };
    for k in &fiber.covectors {
        let pt = if model.dimension() == 1 {
            PhasePoint::line(x[0], k[0])
        } else {
            PhasePoint::planar(x[0], x[1], k[0], k[1])
        };
        let p1 = core(eval_p1(&model, &pt))?;
        ensure((p1 - e.e1).abs() <= 1e-10 * (1.0 + e.e1.abs()), || {
            format!("{}: p1 = {p1} vs {}", model.name(), e.e1)
        })?;
        if model.dimension() == 2 {
            let p2 = core(eval_p2(&model, &pt))?;
            ensure((p2 - e.e2).abs() <= 1e-10 * (1.0 + e.e2.abs()), || {
                format!("{}: p2 = {p2} vs {}", model.name(), e.e2)
            })?;
        }
    }
    Ok(format!("{} covectors", fiber.covectors.len()))
}

pub fn fold_dichotomy(rng: &mut ChaCha8Rng) -> Outcome {
    let d = random_liouville(rng, false);
    let model = QciModel::Liouville(d.clone());
    let t = rng.random_range(0.01..0.99);
    let fold_e2 = d.b_min + t * (d.b_max - d.b_min);
    let c = core(classify_projection(&model, EnergyPair::new(1.0, fold_e2)))?.classification;
    ensure(c == Classification::Fold, || {
        format!("E2 = {fold_e2} in (min b, max b) gave {c:?}")
    })?;
    let graph_e2 = -d.a_min + t * (d.b_min + d.a_min);
    let c = core(classify_projection(&model, EnergyPair::new(1.0, graph_e2)))?.classification;
    ensure(c == Classification::RegularGraph, || {
        format!("E2 = {graph_e2} in (-min a, min b) gave {c:?}")
    })?;
    Ok("Fold / RegularGraph".into())
}

pub fn morse_parity(rng: &mut ChaCha8Rng) -> Outcome {
    let (model, x) = if rng.random_bool(0.5) {
        (
            QciModel::Revolution(RevolutionProfile::cosine(1.0)),
            [rng.random_range(-0.9..0.9), rng.random_range(0.0..2.0 * PI)],
        )
    } else {
        (
            QciModel::Liouville(random_liouville(rng, true)),
            [rng.random(), rng.random()],
        )
    };
    let rep = core(morse_check(&model, x, rng.random_range(0.5..2.0)))?;
    let n = rep.critical_points.len();
    ensure(n > 0 && n % 2 == 0, || format!("{n} critical points"))?;
    for i in 0..n {
        let (a, b) = (&rep.critical_points[i], &rep.critical_points[(i + 1) % n]);
        ensure(a.second_derivative.signum() != b.second_derivative.signum(), || {
            format!("critical points {i} and {} do not alternate: {a:?} {b:?}", (i + 1) % n)
        })?;
    }
    Ok(format!("{n} critical points"))
}

pub fn liouville_is_morse(rng: &mut ChaCha8Rng) -> Outcome {
    let model = QciModel::Liouville(random_liouville(rng, true));
    let x = [rng.random(), rng.random()];
    let rep = core(morse_check(&model, x, rng.random_range(0.5..2.0)))?;
    ensure(rep.is_morse, || format!("not Morse at {x:?}: {rep:?}"))?;
    Ok(format!("min gap {:e}", rep.min_gap))
}

// ---- spectral ----

/// Joint eigenfunctions of a random model at a coarse random `h`.
fn random_spectrum(rng: &mut ChaCha8Rng) -> Result<(String, Vec<JointEigenfunction>), String> {
    let w = SpectralWindow::unit();
    Ok(match rng.random_range(0..3) {
        0 => {
            let h = 1.0 / rng.random_range(40.0..120.0);
            let m = HarmonicOscillatorModel::with_default_truncation(1.0).unwrap();
            (
                "harmonic_oscillator".into(),
                core(ho_eigs(&m, h, w))?
                    .into_iter()
                    .map(|f| JointEigenfunction::line(h, f))
                    .collect(),
            )
        }
        1 => {
            let h = 1.0 / rng.random_range(16.0..40.0);
            let m = rng.random_range(0..=(0.9 / h) as i64);
            (
                "sor".into(),
                core(sor_mode(
                    &RevolutionProfile::cosine(1.0),
                    h,
                    m,
                    w,
                    SorOptions::default(),
                ))?,
            )
        }
        _ => {
            let h = 1.0 / rng.random_range(10.0..16.0);
            let d = random_liouville(rng, true);
            let scan = default_lambda_scan(&d);
            (
                "liouville".into(),
                core(liouville_joint_eigs(&d, h, w, scan, LiouvilleOptions::default()))?,
            )
        }
    })
}

pub fn eigen_residuals(rng: &mut ChaCha8Rng) -> Outcome {
    let (name, us) = random_spectrum(rng)?;
    let mut worst = 0.0f64;
    for u in &us {
        let factors: Vec<_> = match &u.layout {
            Layout::Torus { x1, x2, .. } => vec![x1, x2],
            Layout::Revolution { radial, .. } => vec![radial],
            Layout::Line { factor } => vec![factor],
        };
        for f in factors {
            let bound = 1e-9 * (1.0 + f.lambda.abs());
            ensure(f.residual <= bound, || {
                format!("{name} {:?}: residual {:e} > {bound:e}", u.qn, f.residual)
            })?;
            worst = worst.max(f.residual);
        }
    }
    Ok(format!("{name}: {} pairs, worst residual {worst:e}", us.len()))
}

pub fn normalization(rng: &mut ChaCha8Rng) -> Outcome {
    let (name, us) = random_spectrum(rng)?;
    for u in &us {
        let n = u.l2_norm_sq();
        ensure((n - 1.0).abs() <= 1e-8, || format!("{name} {:?}: ∫|u|² = {n}", u.qn))?;
    }
    Ok(format!("{name}: {} pairs", us.len()))
}

pub fn grid_convergence(rng: &mut ChaCha8Rng) -> Outcome {
    let p = RevolutionProfile::cosine(1.0);
    let h = 1.0 / rng.random_range(16.0..32.0);
    let m = rng.random_range(0..=(0.5 / h) as i64);
    let n0 = 2 * rng.random_range(128..256);
    let solve = |n: usize| {
        core(sor_mode(
            &p,
            h,
            m,
            SpectralWindow::unit(),
            SorOptions {
                grid_points: Some(n),
                ..Default::default()
            },
        ))
    };
    let (a, b, c) = (solve(n0)?, solve(2 * n0)?, solve(4 * n0)?);
    let mut checked = 0;
    for u in &a {
        let find = |v: &[JointEigenfunction]| v.iter().find(|w| w.qn == u.qn).map(|w| w.e1);
        let (Some(lb), Some(lc)) = (find(&b), find(&c)) else {
            continue;
        };
        let (d1, d2) = (u.e1 - lb, lb - lc);
        let predicted = d1.abs() / 4.0;
        ensure(d2.abs() <= 4.5 * predicted + 1e-13, || {
            format!("m = {m}, {:?}: |Δ₂| = {:e} > 4.5·{predicted:e}", u.qn, d2.abs())
        })?;
        checked += 1;
    }
    ensure(checked > 0, || "no level present on all three grids".into())?;
    Ok(format!("{checked} levels"))
}

/// `max |D₁u + D₂u - E₁(a+b)u| / max |u|` for the three-point periodic
/// Laplacian applied to the product of the factors.
fn product_residual(u: &JointEigenfunction) -> f64 {
    let Layout::Torus { data, x1, x2, .. } = &u.layout else {
        return f64::NAN;
    };
    let h = u.h;
    let (n1, n2) = (x1.values.len(), x2.values.len());
    let (c1, c2) = (h * h / x1.grid.spacing().powi(2), h * h / x2.grid.spacing().powi(2));
    let (v, w) = (&x1.values, &x2.values);
    let mut res = 0.0f64;
    let mut top = 0.0f64;
    for i in 0..n1 {
        let dv = c1 * (2.0 * v[i] - v[(i + n1 - 1) % n1] - v[(i + 1) % n1]);
        let a = data.a.value(x1.grid.point(i));
        for j in 0..n2 {
            let dw = c2 * (2.0 * w[j] - w[(j + n2 - 1) % n2] - w[(j + 1) % n2]);
            let b = data.b.value(x2.grid.point(j));
            let uij = v[i] * w[j];
            res = res.max((dv * w[j] + v[i] * dw - u.e1 * (a + b) * uij).abs());
            top = top.max(uij.abs());
        }
    }
    res / top
}

pub fn separation_identity(rng: &mut ChaCha8Rng) -> Outcome {
    let d = random_liouville(rng, true);
    let h = 1.0 / rng.random_range(10.0..14.0);
    let n = 2 * rng.random_range(256..384);
    let mut constants = Vec::new();
    for grid in [n, 2 * n] {
        let opts = LiouvilleOptions {
            grid_points: Some(grid),
            separation: Separation::Laplacian,
        };
        let us = core(liouville_joint_eigs(
            &d,
            h,
            SpectralWindow::unit(),
            default_lambda_scan(&d),
            opts,
        ))?;
        ensure(!us.is_empty(), || "empty window".into())?;
        let dx = 1.0 / grid as f64;
        let worst = us.iter().take(6).map(product_residual).fold(0.0, f64::max);
        constants.push(worst / (dx * dx));
    }
    let c = constants.iter().cloned().fold(0.0, f64::max);
    ensure(c <= 1.0, || format!("fitted C = {c:e} over grids {n}, {}", 2 * n))?;
    Ok(format!("C = {c:e}"))
}

pub fn oracle_agreement(rng: &mut ChaCha8Rng) -> Outcome {
    let jitter = |rng: &mut ChaCha8Rng, x: f64| x * (1.0 + rng.random_range(-0.05..0.05));
    let d = LiouvilleData::new(
        vec![jitter(rng, 2.0), jitter(rng, 0.3)],
        vec![jitter(rng, 0.5), jitter(rng, 0.2)],
    )
    .unwrap();
    let c = core(compare_with_oracle(
        &QciModel::Liouville(d),
        1.0 / 30.0,
        SpectralWindow::unit(),
        OracleGrid::square(128),
    ))?;
    ensure(!c.rows.is_empty(), || "no matched pairs".into())?;
    ensure(
        c.unmatched_oracle.is_empty() && c.unmatched_separated.is_empty(),
        || {
            format!(
                "unmatched: oracle {:?}, separated {:?}",
                c.unmatched_oracle, c.unmatched_separated
            )
        },
    )?;
    let rel = c.rows.iter().map(|r| r.rel_diff).fold(0.0, f64::max);
    let sup = c.rows.iter().map(|r| r.sup_rel_diff).fold(0.0, f64::max);
    ensure(rel <= 1e-3 && sup <= 0.05, || {
        format!("relDiff {rel:e}, supRelDiff {sup:e}")
    })?;
    Ok(format!("{} pairs, relDiff {rel:e}, supRelDiff {sup:e}", c.rows.len()))
}

pub fn p2_consistency(rng: &mut ChaCha8Rng) -> Outcome {
    if rng.random_bool(0.5) {
        let h = 1.0 / rng.random_range(16.0..40.0);
        let m = rng.random_range(0..=(0.9 / h) as i64);
        let us = core(sor_mode(
            &RevolutionProfile::cosine(1.0),
            h,
            m,
            SpectralWindow::unit(),
            SorOptions::default(),
        ))?;
        for u in &us {
            ensure(u.e2 == Some(m as f64 * h), || {
                format!("e2 = {:?}, mh = {}", u.e2, m as f64 * h)
            })?;
        }
        return Ok(format!("sor: {} pairs", us.len()));
    }
    let d = random_liouville(rng, true);
    let h = 1.0 / rng.random_range(10.0..16.0);
    let us = core(liouville_joint_eigs(
        &d,
        h,
        SpectralWindow::unit(),
        default_lambda_scan(&d),
        LiouvilleOptions::default(),
    ))?;
    for u in &us {
        let q = p2_rayleigh(u, Separation::Laplacian).ok_or("not a torus function")?;
        let e2 = u.e2.unwrap();
        ensure((q - e2).abs() <= 1e-6, || {
            format!("{:?}: Rayleigh {q} vs e2 {e2}", u.qn)
        })?;
    }
    Ok(format!("liouville: {} pairs", us.len()))
}

// ---- action ----

pub fn action_monotone(rng: &mut ChaCha8Rng) -> Outcome {
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    if rng.random_bool(0.5) {
        let p = RevolutionProfile::cosine(1.0);
        let e2 = rng.random_range(0.2..0.9);
        let rc = p.level_crossing(e2, 1.0).unwrap();
        let mut rs: Vec<f64> = (0..24).map(|_| rng.random_range(rc..0.99)).collect();
        rs.sort_by(f64::total_cmp);
        for r in rs {
            let s = core(sor_action(&p, e2, r))?;
            pts.push((r, s.value, s.error));
        }
    } else {
        let d = random_liouville(rng, false);
        let e2 = d.b_min + rng.random_range(0.2..0.8) * (d.b_max - d.b_min);
        let e = EnergyPair::new(1.0, e2);
        let t = core(classify_projection(&QciModel::Liouville(d.clone()), e))?;
        let cs: Vec<f64> = t.caustics_on(1).map(|c| c.coordinate).collect();
        ensure(cs.len() == 2, || format!("expected two caustics, got {cs:?}"))?;
        // The forbidden arc is where E₂ > b, between the two caustics.
        let (c0, c1) = (cs[0], cs[1]);
        let mid_in = 0.5 * (c0 + c1);
        let (start, end) = if e2 > d.b.value(mid_in) {
            (c0, mid_in)
        } else {
            (c1, c1 + 0.5 * (1.0 - (c1 - c0)))
        };
        let mut xs: Vec<f64> = (0..24).map(|_| rng.random_range(start..end)).collect();
        xs.sort_by(f64::total_cmp);
        let x1 = rng.random();
        for x2 in xs {
            let s = core(liouville_action(&d, e, [x1, x2]))?;
            pts.push(((x2 - start).abs(), s.value, s.error));
        }
    }
    for w in pts.windows(2) {
        ensure(w[0].1 >= 0.0, || format!("S = {} < 0", w[0].1))?;
        ensure(w[1].1 >= w[0].1 - (w[0].2 + w[1].2), || {
            format!("S decreases: {:?} -> {:?}", w[0], w[1])
        })?;
    }
    Ok(format!("{} samples", pts.len()))
}

pub fn branch_symmetry(rng: &mut ChaCha8Rng) -> Outcome {
    let p = RevolutionProfile::cosine(1.0);
    let e2 = rng.random_range(0.2..0.9);
    let rc = p.level_crossing(e2, 1.0).unwrap();
    let r = rng.random_range(rc..0.99);
    let (a, b) = (core(sor_action(&p, e2, r))?.value, core(sor_action(&p, e2, -r))?.value);
    ensure((a - b).abs() <= 1e-10 * a.max(1.0), || {
        format!("S({r}) = {a}, S(-r) = {b}")
    })?;
    Ok(format!("S = {a:.6}"))
}

pub fn quadrature_robustness(rng: &mut ChaCha8Rng) -> Outcome {
    let p = RevolutionProfile::cosine(1.0);
    let e2 = rng.random_range(0.2..0.9);
    let tp = core(sor_turning_points(&p, EnergyPair::new(1.0, e2)))?;
    let rc = p.level_crossing(e2, 1.0).unwrap();
    let r = rng.random_range(rc + 1e-3..0.99);
    let tol = 10f64.powf(rng.random_range(-9.0..-5.0));
    let coarse = core(action_1d_tol(&tp, r, tol))?;
    let fine = core(action_1d_tol(&tp, r, tol / 2.0))?;
    let change = (coarse.value - fine.value).abs();
    ensure(change <= coarse.error, || {
        format!("tol {tol:e}: change {change:e} > estimate {:e}", coarse.error)
    })?;
    Ok(format!("change {change:e} ≤ {:e}", coarse.error))
}

pub fn liouville_additivity(rng: &mut ChaCha8Rng) -> Outcome {
    let d = random_liouville(rng, false);
    let model = QciModel::Liouville(d.clone());
    // Forbidden arcs on x₂ (E₂ inside the range of b) or on x₁ (-E₂ inside the range of a).
    let axis = rng.random_range(0..2usize);
    let e2 = if axis == 1 {
        d.b_min + rng.random_range(0.2..0.8) * (d.b_max - d.b_min)
    } else {
        -(d.a_min + rng.random_range(0.2..0.8) * (d.a_max - d.a_min))
    };
    let e = EnergyPair::new(1.0, e2);
    let t = core(classify_projection(&model, e))?;
    let caustic = t.caustics_on(axis).next().ok_or("no caustic")?.coordinate;
    let allowed = |s: f64, ax: usize| {
        if ax == 0 {
            -(e2 + d.a.value(s)) < 0.0
        } else {
            e2 - d.b.value(s) < 0.0
        }
    };
    let find_allowed = |ax: usize| (0..1000).map(|i| i as f64 / 1000.0).find(|&s| allowed(s, ax)).unwrap();
    let x = loop {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        if !allowed(x[axis], axis) {
            break x;
        }
    };
    let s = core(liouville_action(&d, e, x))?.value;
    let sa = core(liouville_action(&d, e, [x[0], find_allowed(1)]))
        .map(|v| v.value)
        .unwrap_or(0.0);
    let sb = core(liouville_action(&d, e, [find_allowed(0), x[1]]))
        .map(|v| v.value)
        .unwrap_or(0.0);
    ensure((s - (sa + sb)).abs() <= 1e-14 * s.max(1.0), || {
        format!("S = {s} vs S_a + S_b = {}", sa + sb)
    })?;
    let mut on = x;
    on[axis] = caustic;
    let s0 = core(liouville_action(&d, e, on)).map(|v| v.value).unwrap_or(0.0);
    ensure(s0.abs() <= 1e-12, || {
        format!("S = {s0:e} on the caustic x{} = {caustic}", axis + 1)
    })?;
    Ok(format!("S = {s:.6}"))
}

// ---- asymptotics ----

pub fn monotone_information(rng: &mut ChaCha8Rng) -> Outcome {
    let alpha = rng.random_range(-0.5..0.0);
    let beta = rng.random_range(-2.0..2.0);
    let c = rng.random_range(0.5..2.0);
    let pts: Vec<(f64, f64)> = default_h_values()
        .into_iter()
        .map(|h| (h, c * h.powf(alpha) * (1.0 + beta * h)))
        .collect();
    let fits = prefix_fits(&pts);
    for w in fits.windows(2) {
        let (d0, d1) = ((w[0].exponent - alpha).abs(), (w[1].exponent - alpha).abs());
        ensure(d1 <= d0 + w[0].rms_residual, || {
            format!("departure grew {d0:e} -> {d1:e} (rms {:e})", w[0].rms_residual)
        })?;
    }
    Ok(format!("{} prefix fits", fits.len()))
}

pub fn hormander_ceiling_holds(rng: &mut ChaCha8Rng) -> Outcome {
    let alpha = rng.random_range(-0.5..0.0);
    let c = rng.random_range(0.5..2.0);
    let pts: Vec<(f64, f64)> = default_h_values()
        .into_iter()
        .map(|h| (h, c * h.powf(alpha) * (1.0 + rng.random_range(-0.1..0.1))))
        .collect();
    let chk = core(hormander_ceiling(&pts))?;
    ensure(chk.violations.is_empty(), || {
        format!("α = {alpha}: violations at {:?}", chk.violations)
    })?;
    Ok(format!("C = {:.4}", chk.constant))
}

pub fn decay_defect_monotone(rng: &mut ChaCha8Rng) -> Outcome {
    let model = HarmonicOscillatorModel::with_default_truncation(1.0).unwrap();
    let h = 1.0 / rng.random_range(150.0..300.0);
    let sols = core(ho_eigs(&model, h, SpectralWindow::unit()))?;
    let u =
        nearest_level(sols.into_iter().map(|f| JointEigenfunction::line(h, f)).collect(), 1.0).ok_or("empty window")?;
    let region = Region::interval("tail", 1.15, 1.6);
    let m = QciModel::HarmonicOscillator(model);
    let field = core(decay_field(&m, &u, &region))?;
    let mut eps = [rng.random_range(0.01..0.3), rng.random_range(0.01..0.3)];
    eps.sort_by(f64::total_cmp);
    let lo = core(decay_profile(&u, &field, eps[0], &region))?.max_defect;
    let hi = core(decay_profile(&u, &field, eps[1], &region))?.max_defect;
    ensure(hi <= lo + 2.0 * u.residual(), || {
        format!("maxDefect {lo} at ε = {} but {hi} at ε = {}", eps[0], eps[1])
    })?;
    Ok(format!("{lo:.4} ≥ {hi:.4}"))
}

pub fn scan_determinism(rng: &mut ChaCha8Rng) -> Outcome {
    let model = QciModel::Revolution(RevolutionProfile::cosine(1.0));
    let hs = vec![
        1.0 / 16.0,
        1.0 / 20.0,
        1.0 / 24.0,
        1.0 / 32.0,
        1.0 / 48.0,
        1.0 / 64.0,
        1.0 / 128.0,
    ];
    let sweep = HSweep::new(hs, SpectralWindow::unit()).unwrap();
    let region = Region::away_from_poles(rng.random_range(0.05..0.2));
    let opts = ScanOptions {
        family: Family::default(),
        ..Default::default()
    };
    let scan = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| supnorm_scan(&model, &sweep, &region, &opts))
            .map(|s| format!("{:?}", s.rows))
    };
    let (a, b, c) = (core(scan(1))?, core(scan(3))?, core(scan(1))?);
    ensure(a == b && a == c, || {
        "scan rows differ across runs or thread counts".into()
    })?;
    Ok(format!("{} bytes of rows", a.len()))
}

// ---- fbi ----

fn l2(u: &[Complex64], period: f64) -> f64 {
    (u.iter().map(|z| z.norm_sqr()).sum::<f64>() * period / u.len() as f64).sqrt()
}

pub fn fbi_norm_stability(rng: &mut ChaCha8Rng) -> Outcome {
    let mu = rng.random_range(1.0..10.0);
    let mut ratios = Vec::new();
    for _ in 0..3 {
        let m = rng.random_range(8..48i64);
        let h = 1.0 / m as f64;
        let g = FbiGrid::new(2.0 * PI, 64, 2.0, 161, mu, h).unwrap();
        let u = plane_wave(m, 64 * m as usize);
        ratios.push(core(fbi_transform(&u, &g, 0.25 * 2.0 * PI))?.l2_norm() / l2(&u, 2.0 * PI));
    }
    let h = 1.0 / rng.random_range(16..40i64) as f64;
    let p = RevolutionProfile::cosine(1.0);
    let m = (rng.random_range(0.1..0.6) / h).round() as i64;
    let us = core(sor_mode(&p, h, m, SpectralWindow::unit(), SorOptions::default()))?;
    if let Some(u) = nearest_level(us, 1.0) {
        let (s, period) = lift_even(u.primary_factor());
        let g = FbiGrid::new(period, 64, 2.0, 161, mu, h).unwrap();
        ratios.push(core(fbi_transform(&s, &g, 0.25 * period))?.l2_norm() / l2(&s, period));
    }
    for r in &ratios {
        ensure((0.5..=2.0).contains(r), || format!("μ = {mu}: ‖Tu‖/‖u‖ = {r}"))?;
    }
    Ok(format!("ratios {ratios:.3?}"))
}

/// Gaussian packet of momentum 1 centred at `x0` on the circle `[0, 2π)`.
fn packet(x0: f64, h: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let y = 2.0 * PI * j as f64 / n as f64;
            let mut d = (y - x0).rem_euclid(2.0 * PI);
            if d > PI {
                d -= 2.0 * PI;
            }
            Complex64::from_polar((-d * d / 0.5).exp(), y / h)
        })
        .collect()
}

pub fn fbi_peak_covariance(rng: &mut ChaCha8Rng) -> Outcome {
    let m = rng.random_range(16..40i64);
    let h = 1.0 / m as f64;
    let g = FbiGrid::new(2.0 * PI, 64, 2.0, 81, rng.random_range(1.0..4.0), h).unwrap();
    let n = 64 * m as usize;
    let shift = rng.random_range(1..64usize);
    let x0 = rng.random_range(0.0..2.0 * PI);
    let argmax = |u: &[Complex64]| -> Result<usize, String> {
        let marg = core(fbi_transform(u, &g, 0.25 * 2.0 * PI))?.x_marginal();
        Ok(marg
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0)
    };
    let a = argmax(&packet(x0, h, n))?;
    let b = argmax(&packet(x0 + shift as f64 * g.dx(), h, n))?;
    let moved = (b + 64 - a) % 64;
    let off = moved.abs_diff(shift).min(64 - moved.abs_diff(shift));
    ensure(off <= 1, || format!("shift {shift} cells moved the peak {moved} cells"))?;
    Ok(format!("shift {shift}, moved {moved}"))
}

pub fn fbi_mu_robustness(rng: &mut ChaCha8Rng) -> Outcome {
    let m = rng.random_range(16..64i64);
    let h = 1.0 / m as f64;
    let u = plane_wave(m, 64 * m as usize);
    let at = |mu: f64| {
        core(FbiGrid::new(2.0 * PI, 16, 2.0, 161, mu, h).and_then(|g| fbi_transform(&u, &g, 0.25 * 2.0 * PI)))
    };
    let base = at(1.0)?;
    let mu = rng.random_range(1.0..10.0);
    let other = at(mu)?;
    for i in 0..16 {
        let (a, b) = (base.argmax_xi(i), other.argmax_xi(i));
        ensure(a.abs_diff(b) <= 1, || {
            format!("μ = {mu}: argmax ξ moved from {a} to {b} at x index {i}")
        })?;
    }
    Ok(format!("μ = {mu:.2}"))
}
