//! Experiment dispatch. Every enumerated item ends up either in
//! `results.csv` or as a row of `errors.csv`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use qci_core::action::{
    fold_exponent_fit, ho_action, liouville_action, log_spaced_offsets, sor_action_at, ActionField, ActionValue,
    FIT_SAMPLES_PER_DECADE,
};
use qci_core::asymptotics::{
    decay_field, decay_profile, default_h_values, fit_exponent, hormander_ceiling, nearest_level, prefix_fits,
    supnorm_scan, HSweep, ScalingFit, ScanOptions,
};
use qci_core::classical::{classify_projection, moment_image_sample, EnergyPair, TorusData};
use qci_core::fbi::{
    decay_rate_fit, fbi_transform, lift_even, offshell_sup, plane_wave, tube_mass, FbiGrid, Shell,
    DEFAULT_CUTOFF_FRACTION,
};
use qci_core::models::QciModel;
use qci_core::spectral::liouville::default_lambda_scan;
use qci_core::spectral::oracle::{compare_with_oracle, OracleGrid};
use qci_core::spectral::{
    ho_eigs, liouville_joint_eigs, liouville_joint_map, sor_joint_eigs, sor_mode, sup_norm, JointEigenfunction,
    LiouvilleOptions, Region, Separation, SorOptions, SpectralWindow,
};
use qci_core::Result as CoreResult;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Experiment, FbiSource, FoldSpec, LineSpec, RegionRef};
use crate::output::{
    content_hash, error_table, json_bytes, num, opt_num, sha256_hex, write_atomic, ErrorRow, RunManifest, Table,
    ERRORS, MANIFEST, RESULTS, SUMMARY,
};
use crate::{RunConfig, RunError};

/// Samples per axis for the Liouville moment image.
const TORUS_IMAGE_SAMPLES: usize = 100;
const LINE_IMAGE_SAMPLES: usize = 1024;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub result_rows: usize,
    pub error_rows: usize,
}

impl RunReport {
    /// 0 on a clean run, 3 when some items failed.
    pub fn exit_code(&self) -> i32 {
        if self.error_rows == 0 {
            0
        } else {
            3
        }
    }
}

struct Outputs {
    results: Table,
    errors: Vec<ErrorRow>,
    summary: Map<String, Value>,
}

impl Outputs {
    fn new(header: &[&'static str]) -> Self {
        Self {
            results: Table::new(header),
            errors: Vec::new(),
            summary: Map::new(),
        }
    }

    fn fail(&mut self, item: impl Into<String>, e: impl Display) {
        self.errors.push(ErrorRow {
            item: item.into(),
            error: e.to_string(),
        });
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }
}

/// Runs `cfg`, writing artifacts into `out_dir`. The manifest is removed
/// first and written last, so an interrupted run leaves none.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }

    let mut stages = BTreeMap::new();
    let t = Instant::now();
    let mut out = dispatch(&model, &cfg.experiment)?;
    stages.insert(cfg.experiment.name().to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let canonical = cfg.canonical_json();
    let config_hash = sha256_hex(canonical.as_bytes());
    out.put("configHash", json!(config_hash));
    out.put("inputHash", json!(content_hash(canonical.as_bytes())));
    out.put("experiment", json!(cfg.experiment.name()));
    out.put("model", json!(model.name()));
    out.put("resultRows", json!(out.results.rows.len()));
    out.put("errorRows", json!(out.errors.len()));

    let files = [
        (RESULTS, out.results.to_bytes()?),
        (ERRORS, error_table(&out.errors).to_bytes()?),
        (SUMMARY, json_bytes(&Value::Object(out.summary))),
    ];
    let mut hashes = BTreeMap::new();
    for (name, bytes) in &files {
        write_atomic(out_dir, name, bytes)?;
        hashes.insert(name.to_string(), sha256_hex(bytes));
    }
    stages.insert("write".into(), t.elapsed().as_secs_f64());

    let manifest = RunManifest {
        config_hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        files: hashes,
        stages,
    };
    write_atomic(
        out_dir,
        MANIFEST,
        &json_bytes(&serde_json::to_value(&manifest).expect("manifest serializes")),
    )?;
    Ok(RunReport {
        out_dir: out_dir.to_path_buf(),
        manifest,
        result_rows: out.results.rows.len(),
        error_rows: out.errors.len(),
    })
}

fn dispatch(model: &QciModel, exp: &Experiment) -> Result<Outputs, RunError> {
    Ok(match exp {
        Experiment::Spectrum {
            h,
            window,
            m_range,
            lambda_scan,
            grid_points,
        } => spectrum(
            model,
            *h,
            window.unwrap_or(SpectralWindow::unit()),
            *m_range,
            *lambda_scan,
            *grid_points,
        ),
        Experiment::SupnormSweep {
            h_values,
            window,
            regions,
            family,
            grid_points,
        } => {
            let sweep = HSweep::new(
                h_values.clone().unwrap_or_else(default_h_values),
                window.unwrap_or(SpectralWindow::unit()),
            )?;
            let opts = ScanOptions {
                family: family.unwrap_or_default(),
                sor: SorOptions {
                    grid_points: *grid_points,
                    ..Default::default()
                },
                liouville_grid: *grid_points,
            };
            supnorm_sweep(model, &sweep, regions, &opts)
        }
        Experiment::Decay {
            h_values,
            window,
            epsilon,
            region,
            e2,
            target_e1,
        } => decay(
            model,
            h_values,
            window.unwrap_or(SpectralWindow::unit()),
            *epsilon,
            &resolve(region),
            *e2,
            *target_e1,
        ),
        Experiment::Action {
            energy,
            points,
            line,
            fold,
        } => action(
            model,
            EnergyPair::new(energy[0], energy[1]),
            points,
            line.as_ref(),
            fold.as_ref(),
        ),
        Experiment::Classify { energies } => classify(model, energies),
        Experiment::Fbi {
            source,
            mu,
            xi_max,
            n_x,
            n_xi,
            cutoff_fraction,
            tube_radius,
            gap,
        } => {
            let p = FbiParams {
                mu: *mu,
                xi_max: *xi_max,
                n_x: *n_x,
                n_xi: *n_xi,
                cutoff_fraction: cutoff_fraction.unwrap_or(DEFAULT_CUTOFF_FRACTION),
                tube_radius: *tube_radius,
                gap: *gap,
            };
            fbi(model, source, &p)
        }
        Experiment::OracleCompare { h, window, grid } => oracle(
            model,
            *h,
            window.unwrap_or(SpectralWindow::unit()),
            OracleGrid {
                n1: grid.n1,
                n2: grid.n2,
            },
        ),
    })
}

fn resolve(r: &RegionRef) -> Region {
    r.resolve().expect("regions are checked during validation")
}

fn h_item(h: f64) -> String {
    format!("h={}", num(h))
}

fn fit_json(f: &ScalingFit) -> Value {
    json!({"exponent": f.exponent, "intercept": f.intercept, "rms": f.rms_residual, "points": f.point_count})
}

fn liouville_opts(model: &QciModel, grid_points: Option<usize>) -> LiouvilleOptions {
    let separation = if matches!(model, QciModel::LiouvilleOscillator(_)) {
        Separation::Oscillator
    } else {
        Separation::Laplacian
    };
    LiouvilleOptions {
        grid_points,
        separation,
    }
}

fn spectrum(
    model: &QciModel,
    h: f64,
    window: SpectralWindow,
    m_range: Option<[i64; 2]>,
    lambda_scan: Option<[f64; 2]>,
    grid_points: Option<usize>,
) -> Outputs {
    let mut out = Outputs::new(&["h", "model", "qn1", "qn2", "e1", "e2", "residual", "supnorm_global"]);
    let us: CoreResult<Vec<JointEigenfunction>> = match model {
        QciModel::Revolution(p) => sor_joint_eigs(
            p,
            h,
            m_range.map(|r| r[0]..=r[1]),
            window,
            SorOptions {
                grid_points,
                ..Default::default()
            },
        ),
        QciModel::Liouville(d) | QciModel::LiouvilleOscillator(d) => liouville_joint_eigs(
            d,
            h,
            window,
            lambda_scan
                .map(|s| (s[0], s[1]))
                .unwrap_or_else(|| default_lambda_scan(d)),
            liouville_opts(model, grid_points),
        ),
        QciModel::HarmonicOscillator(m) => {
            ho_eigs(m, h, window).map(|v| v.into_iter().map(|f| JointEigenfunction::line(h, f)).collect())
        }
    };
    let us = match us {
        Ok(us) => us,
        Err(e) => {
            out.fail(h_item(h), e);
            return out;
        }
    };
    let global = Region::global();
    let sups: Vec<_> = us.par_iter().map(|u| sup_norm(u, &global)).collect();
    for (u, sup) in us.iter().zip(sups) {
        let (q1, q2) = u.qn.pair();
        match sup {
            Ok(s) => out.results.push(vec![
                num(h),
                model.name().into(),
                q1.to_string(),
                q2.to_string(),
                num(u.e1),
                opt_num(u.e2),
                num(u.residual()),
                num(s.value),
            ]),
            Err(e) => out.fail(format!("{} qn=({q1},{q2})", h_item(h)), e),
        }
    }
    out.put("eigenfunctions", json!(us.len()));
    out
}

fn supnorm_sweep(model: &QciModel, sweep: &HSweep, regions: &[RegionRef], opts: &ScanOptions) -> Outputs {
    let mut out = Outputs::new(&["h", "region", "maxSup", "qn1", "qn2", "e1", "e2", "x1", "x2", "count"]);
    let mut per_region = Map::new();
    for r in regions {
        let region = resolve(r);
        let scan = match supnorm_scan(model, sweep, &region, opts) {
            Ok(s) => s,
            Err(e) => {
                for &h in &sweep.h_values {
                    out.fail(format!("region={} {}", region.name, h_item(h)), &e);
                }
                per_region.insert(region.name.clone(), json!({"error": e.to_string()}));
                continue;
            }
        };
        for row in &scan.rows {
            let (q1, q2) = row.qn.pair();
            out.results.push(vec![
                num(row.h),
                row.region.clone(),
                num(row.max_sup),
                q1.to_string(),
                q2.to_string(),
                num(row.e1),
                opt_num(row.e2),
                num(row.location[0]),
                num(row.location[1]),
                row.count.to_string(),
            ]);
        }
        for (h, e) in &scan.skipped {
            out.fail(format!("region={} {}", region.name, h_item(*h)), e);
        }
        let points = scan.points();
        let fit = match fit_exponent(&points) {
            Ok(f) => fit_json(&f),
            Err(e) => json!({"error": e.to_string()}),
        };
        let hormander = match hormander_ceiling(&points) {
            Ok(c) => json!({"constant": c.constant, "violations": c.violations}),
            Err(e) => json!({"error": e.to_string()}),
        };
        let achievers: Vec<Value> = scan
            .rows
            .iter()
            .map(|r| {
                let (q1, q2) = r.qn.pair();
                json!({"h": r.h, "qn": [q1, q2], "e1": r.e1, "e2": r.e2})
            })
            .collect();
        per_region.insert(
            region.name.clone(),
            json!({
                "fit": fit,
                "prefixFits": prefix_fits(&points).iter().map(fit_json).collect::<Vec<_>>(),
                "hormander": hormander,
                "achievers": achievers,
            }),
        );
    }
    out.put("regions", Value::Object(per_region));
    out
}

/// The decay subject at `h`: the level nearest `target_e1`, restricted to
/// `E₂ ≈ e2` where the model has a second quantum number.
fn decay_subject(
    model: &QciModel,
    h: f64,
    window: SpectralWindow,
    e2: Option<f64>,
    target_e1: f64,
) -> CoreResult<JointEigenfunction> {
    let us = match model {
        QciModel::HarmonicOscillator(m) => ho_eigs(m, h, window)?
            .into_iter()
            .map(|f| JointEigenfunction::line(h, f))
            .collect(),
        QciModel::Revolution(p) => {
            let m = (e2.unwrap_or(0.0) / h).round() as i64;
            sor_mode(p, h, m, window, SorOptions::default())?
        }
        QciModel::Liouville(d) | QciModel::LiouvilleOscillator(d) => {
            let e2 = e2.unwrap_or(0.0);
            let us = liouville_joint_map(
                d,
                h,
                window,
                (e2 - 2.0 * h, e2 + 2.0 * h),
                liouville_opts(model, None),
                |u| u,
            )?;
            let best = us
                .iter()
                .map(|u| (u.e2.unwrap_or(f64::NAN) - e2).abs())
                .fold(f64::INFINITY, f64::min);
            us.into_iter()
                .filter(|u| (u.e2.unwrap_or(f64::NAN) - e2).abs() == best)
                .collect()
        }
    };
    nearest_level(us, target_e1).ok_or(qci_core::QciError::EmptySpectrum(h))
}

fn decay(
    model: &QciModel,
    h_values: &[f64],
    window: SpectralWindow,
    epsilon: f64,
    region: &Region,
    e2: Option<f64>,
    target_e1: f64,
) -> Outputs {
    let mut out = Outputs::new(&["h", "x1", "x2", "S", "logAbsU", "ratio", "defect"]);
    let mut reports = Vec::new();
    for &h in h_values {
        let rep = decay_subject(model, h, window, e2, target_e1).and_then(|u| {
            let field = decay_field(model, &u, region)?;
            decay_profile(&u, &field, epsilon, region).map(|r| (u, r))
        });
        match rep {
            Ok((u, r)) => {
                for s in &r.samples {
                    out.results.push(vec![
                        num(h),
                        num(s.x[0]),
                        num(s.x[1]),
                        num(s.s),
                        num(s.log_abs_u),
                        num(s.ratio),
                        num(s.defect),
                    ]);
                }
                let (lo, hi) = r.ratio_band();
                let (q1, q2) = u.qn.pair();
                reports.push(json!({
                    "h": h,
                    "qn": [q1, q2],
                    "e1": u.e1,
                    "e2": u.e2,
                    "ratioBand": [lo, hi],
                    "ratioDeviation": r.ratio_deviation(),
                    "maxDefect": r.max_defect,
                    "flooredFraction": r.floored_fraction,
                    "samples": r.samples.len(),
                }));
            }
            Err(e) => out.fail(h_item(h), e),
        }
    }
    out.put("epsilon", json!(epsilon));
    out.put("region", json!(region.name));
    out.put("reports", Value::Array(reports));
    out
}

type ActionFn<'a> = Box<dyn Fn([f64; 2]) -> CoreResult<ActionValue> + Sync + 'a>;

fn action_fn(model: &QciModel, energy: EnergyPair) -> CoreResult<ActionFn<'_>> {
    Ok(match model {
        QciModel::Revolution(p) => Box::new(move |x| sor_action_at(p, energy, x[0])),
        QciModel::HarmonicOscillator(_) => Box::new(move |x| ho_action(energy.e1, x[0])),
        QciModel::Liouville(d) => Box::new(move |x| liouville_action(d, energy, x)),
        QciModel::LiouvilleOscillator(_) => {
            return Err(qci_core::QciError::Unsupported(
                "action for the Liouville oscillator".into(),
            ))
        }
    })
}

fn caustic_distance(t: &TorusData, x: [f64; 2]) -> f64 {
    let periodic = matches!(t.model, QciModel::Liouville(_) | QciModel::LiouvilleOscillator(_));
    t.caustics
        .iter()
        .map(|c| {
            let d = (x[c.axis] - c.coordinate).abs();
            if periodic {
                d.rem_euclid(1.0).min(1.0 - d.rem_euclid(1.0))
            } else {
                d
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn on_axis(axis: usize, s: f64, at: f64) -> [f64; 2] {
    if axis == 0 {
        [s, at]
    } else {
        [at, s]
    }
}

fn action(
    model: &QciModel,
    energy: EnergyPair,
    points: &[[f64; 2]],
    line: Option<&LineSpec>,
    fold: Option<&FoldSpec>,
) -> Outputs {
    let mut out = Outputs::new(&["source", "x1", "x2", "S", "distToCaustic", "errEstimate"]);
    let f = match action_fn(model, energy) {
        Ok(f) => f,
        Err(e) => {
            out.fail("action", e);
            return out;
        }
    };
    let tdata = classify_projection(model, energy).ok();
    let dist = |x: [f64; 2]| tdata.as_ref().map(|t| caustic_distance(t, x)).unwrap_or(f64::NAN);

    let mut items: Vec<(&str, [f64; 2])> = points.iter().map(|&x| ("point", x)).collect();
    if let Some(l) = line {
        items.extend((0..l.count).map(|i| {
            let s = l.from + (l.to - l.from) * i as f64 / (l.count - 1) as f64;
            ("line", on_axis(l.axis, s, l.at))
        }));
    }
    let values: Vec<_> = items.par_iter().map(|&(_, x)| f(x)).collect();
    for (&(src, x), v) in items.iter().zip(values) {
        match v {
            Ok(v) => out.results.push(vec![
                src.into(),
                num(x[0]),
                num(x[1]),
                num(v.value),
                num(dist(x)),
                num(v.error),
            ]),
            Err(e) => out.fail(format!("{src} ({}, {})", num(x[0]), num(x[1])), e),
        }
    }

    if let Some(fs) = fold {
        let caustic = fs.caustic.or_else(|| {
            tdata
                .as_ref()
                .and_then(|t| t.caustics_on(fs.axis).next())
                .map(|c| c.coordinate)
        });
        let fitted = caustic
            .ok_or_else(|| qci_core::QciError::InvalidInput(format!("no caustic on axis {}", fs.axis)))
            .and_then(|c| {
                let lo = fs.widths.iter().cloned().fold(f64::INFINITY, f64::min) / 100.0;
                let hi = fs.widths.iter().cloned().fold(0.0, f64::max);
                let pts: Vec<[f64; 2]> = log_spaced_offsets(c, fs.side, lo, hi, FIT_SAMPLES_PER_DECADE)
                    .into_iter()
                    .map(|s| on_axis(fs.axis, s, fs.at))
                    .collect();
                let field = ActionField::sample(&pts, fs.axis, c, &f)?;
                let fit = fold_exponent_fit(&field, c, &fs.widths)?;
                Ok((c, field, fit))
            });
        match fitted {
            Ok((c, field, fit)) => {
                for s in &field.samples {
                    out.results.push(vec![
                        "fold".into(),
                        num(s.x[0]),
                        num(s.x[1]),
                        num(s.s),
                        num(s.dist_to_caustic),
                        num(s.err),
                    ]);
                }
                let windows: Vec<Value> = fit
                    .windows
                    .iter()
                    .map(|&(w, slope, n)| json!({"width": w, "slope": slope, "samples": n}))
                    .collect();
                out.put(
                    "fold",
                    json!({"caustic": c, "exponent": fit.exponent, "extrapolated": fit.extrapolated, "windows": windows}),
                );
            }
            Err(e) => out.fail("fold", e),
        }
    }
    out.put("energy", json!([energy.e1, energy.e2]));
    out
}

fn classify(model: &QciModel, energies: &[[f64; 2]]) -> Outputs {
    let mut out = Outputs::new(&["e1", "e2", "classification", "caustics", "e2RangeLo", "e2RangeHi"]);
    let samples = match model {
        QciModel::Liouville(_) | QciModel::LiouvilleOscillator(_) => TORUS_IMAGE_SAMPLES,
        _ => LINE_IMAGE_SAMPLES,
    };
    let mut images: BTreeMap<u64, Option<(f64, f64)>> = BTreeMap::new();
    for e in energies {
        images
            .entry(e[0].to_bits())
            .or_insert_with(|| moment_image_sample(model, e[0], samples).ok());
    }
    let results: Vec<_> = energies
        .par_iter()
        .map(|e| classify_projection(model, EnergyPair::new(e[0], e[1])))
        .collect();
    let mut records = Vec::new();
    for (e, t) in energies.iter().zip(results) {
        let t = match t {
            Ok(t) => t,
            Err(err) => {
                out.fail(format!("e1={} e2={}", num(e[0]), num(e[1])), err);
                continue;
            }
        };
        let range = images[&e[0].to_bits()];
        let caustics: Vec<Value> = t
            .caustics
            .iter()
            .map(|c| json!({"axis": c.axis, "coordinate": c.coordinate, "slope": c.slope, "simple": c.simple}))
            .collect();
        let listed: Vec<String> = t
            .caustics
            .iter()
            .map(|c| format!("{}:{}", c.axis, num(c.coordinate)))
            .collect();
        out.results.push(vec![
            num(e[0]),
            num(e[1]),
            t.classification.as_str().into(),
            listed.join(";"),
            opt_num(range.map(|r| r.0)),
            opt_num(range.map(|r| r.1)),
        ]);
        records.push(json!({
            "model": model.name(),
            "e1": e[0],
            "e2": e[1],
            "classification": t.classification.as_str(),
            "caustics": caustics,
            "e2Range": range.map(|r| [r.0, r.1]),
        }));
    }
    out.put("records", Value::Array(records));
    out
}

struct FbiParams {
    mu: f64,
    xi_max: f64,
    n_x: usize,
    n_xi: usize,
    cutoff_fraction: f64,
    tube_radius: f64,
    gap: f64,
}

/// Samples, circumference and shell for one family member.
fn fbi_member(
    model: &QciModel,
    source: &FbiSource,
    index: usize,
    xi_max: f64,
) -> CoreResult<(f64, Vec<Complex64>, f64, Shell)> {
    match source {
        FbiSource::PlaneWave { m_values } => {
            let m = m_values[index];
            let n = 256usize.max((16.0 * xi_max * m as f64).ceil() as usize);
            let period = 2.0 * PI;
            Ok((1.0 / m as f64, plane_wave(m, n), period, Shell::horizontal(period, 1.0)))
        }
        FbiSource::SorRadial { h_values, e2 } => {
            let QciModel::Revolution(p) = model else {
                return Err(qci_core::QciError::Unsupported(
                    "sorRadial needs a surface of revolution".into(),
                ));
            };
            let h = h_values[index];
            let m = (e2 / h).round() as i64;
            let u = nearest_level(sor_mode(p, h, m, SpectralWindow::unit(), SorOptions::default())?, 1.0)
                .ok_or(qci_core::QciError::EmptySpectrum(h))?;
            let f = u.primary_factor();
            let (lo, hi) = (f.grid.lo, f.grid.hi);
            let (samples, period) = lift_even(f);
            let (e1, mh) = (u.e1, m as f64 * h);
            let profile = *p;
            let shell = Shell::graph(period, 512, move |y| {
                let r = if y <= hi - lo { lo + y } else { hi - (y - (hi - lo)) };
                let fr = profile.f(r);
                let k = e1 - mh * mh / (fr * fr);
                if k >= 0.0 {
                    vec![k.sqrt(), -k.sqrt()]
                } else {
                    vec![]
                }
            });
            Ok((h, samples, period, shell))
        }
    }
}

fn fbi(model: &QciModel, source: &FbiSource, p: &FbiParams) -> Outputs {
    let mut out = Outputs::new(&["h", "x", "xi", "intensity"]);
    let count = match source {
        FbiSource::PlaneWave { m_values } => m_values.len(),
        FbiSource::SorRadial { h_values, .. } => h_values.len(),
    };
    let mut members = Vec::new();
    let mut points = Vec::new();
    for i in 0..count {
        let done = fbi_member(model, source, i, p.xi_max).and_then(|(h, u, period, shell)| {
            let grid = FbiGrid::new(period, p.n_x, p.xi_max, p.n_xi, p.mu, h)?;
            let pm = fbi_transform(&u, &grid, p.cutoff_fraction * period)?;
            let tube = tube_mass(&pm, &shell, p.tube_radius * h.sqrt());
            let off = offshell_sup(&pm, &shell, p.gap);
            Ok((h, pm, tube, off))
        });
        match done {
            Ok((h, pm, tube, off)) => {
                let g = pm.grid;
                for ix in 0..g.n_x {
                    for k in 0..g.n_xi {
                        out.results
                            .push(vec![num(h), num(g.x(ix)), num(g.xi(k)), num(pm.at(ix, k))]);
                    }
                }
                if let Some(s) = off {
                    points.push((h, s));
                }
                members.push(json!({"h": h, "tubeFraction": tube, "offshellSup": off, "l2Norm": pm.l2_norm()}));
            }
            Err(e) => out.fail(format!("member {i}"), e),
        }
    }
    let fit = match decay_rate_fit(points) {
        Ok(f) => json!({"rate": f.rate, "intercept": f.intercept, "rms": f.rms_residual}),
        Err(e) => json!({"error": e.to_string()}),
    };
    out.put("members", Value::Array(members));
    out.put("offshellFit", fit);
    out.put("mu", json!(p.mu));
    out.put("gap", json!(p.gap));
    out
}

fn oracle(model: &QciModel, h: f64, window: SpectralWindow, grid: OracleGrid) -> Outputs {
    let mut out = Outputs::new(&[
        "h",
        "qn1",
        "qn2",
        "separatedEig",
        "oracleEig",
        "relDiff",
        "supSeparated",
        "supOracle",
        "supRelDiff",
    ]);
    let cmp = match compare_with_oracle(model, h, window, grid) {
        Ok(c) => c,
        Err(e) => {
            out.fail(h_item(h), e);
            return out;
        }
    };
    for r in &cmp.rows {
        let (q1, q2) = r.qn.pair();
        out.results.push(vec![
            num(r.h),
            q1.to_string(),
            q2.to_string(),
            num(r.separated),
            num(r.oracle),
            num(r.rel_diff),
            num(r.sup_separated),
            num(r.sup_oracle),
            num(r.sup_rel_diff),
        ]);
    }
    for &l in &cmp.unmatched_oracle {
        out.fail(format!("oracle eigenvalue {}", num(l)), "no separated partner");
    }
    for &l in &cmp.unmatched_separated {
        out.fail(format!("separated eigenvalue {}", num(l)), "no oracle partner");
    }
    let max = |f: fn(&qci_core::spectral::oracle::OracleRow) -> f64| cmp.rows.iter().map(f).fold(0.0, f64::max);
    out.put("matched", json!(cmp.rows.len()));
    out.put("maxRelDiff", json!(max(|r| r.rel_diff)));
    out.put("maxSupRelDiff", json!(max(|r| r.sup_rel_diff)));
    out.put("warnings", json!(cmp.warnings));
    out.put("grid", json!([grid.n1, grid.n2]));
    out
}
