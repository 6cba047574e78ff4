//! The named check suites behind `morrey-lab suite`.
//!
//! Each suite turns a [`SuiteConfig`] into a list of [`CheckRecord`]s in a
//! fixed order. A check whose computation errors is recorded as failed with
//! the error as its note; it does not abort the run.

use std::collections::BTreeMap;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::config::{SuiteConfig, SuiteName};
use super::generate::{generate, rng_for, GeneratorKind};
use super::report::{CheckRecord, InputsHash, Series, SuiteReport};
use crate::duality::{duality_gap, truncation_sequence, SolverParams};
use crate::error::{Error, Result};
use crate::grid::io::{from_bytes, from_csv, to_bytes, to_csv};
use crate::grid::{enumerate_cubes, CubeFamily, FamilyKind, Geometry, GridCube, GridFunction};
use crate::norms::{bmo_norm, mixed_norm, morrey_norm, pairing, ExponentTuple};
use crate::operators::{
    bmo_probe, commutator, frac_integral, maximal, maximal_block_image, sharp_bound_constant, KernelSpec,
    MaximalMethod,
};

/// Validates `cfg` and runs its suite, on a dedicated pool when `threads` is set.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(cfg))
        }
        None => run_inner(cfg),
    }
}

fn run_inner(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut run = Run {
        cfg,
        checks: Vec::new(),
        series: BTreeMap::new(),
    };
    match cfg.suite {
        SuiteName::Chi => chi(&mut run),
        SuiteName::Duality => duality(&mut run),
        SuiteName::Fatou => fatou(&mut run),
        SuiteName::Adjoint => adjoint(&mut run),
        SuiteName::Ialpha => ialpha(&mut run),
        SuiteName::Maximal => maximal_suite(&mut run),
        SuiteName::Holder => holder(&mut run),
        SuiteName::Sharp => sharp(&mut run),
        SuiteName::Commutator => commutator_suite(&mut run),
        SuiteName::Probe => probe(&mut run),
        SuiteName::Io => io(&mut run),
    }
    Ok(SuiteReport::new(cfg.clone(), run.checks, run.series))
}

struct Run<'a> {
    cfg: &'a SuiteConfig,
    checks: Vec<CheckRecord>,
    series: BTreeMap<String, Series>,
}

/// What a check computed: the decisive value and everything else worth keeping.
struct Outcome {
    hash: String,
    measured: Vec<(&'static str, f64)>,
    threshold: f64,
    passed: bool,
    note: Option<String>,
}

impl Outcome {
    fn new(hash: String, threshold: f64, passed: bool) -> Self {
        Self {
            hash,
            measured: Vec::new(),
            threshold,
            passed,
            note: None,
        }
    }

    fn with(mut self, key: &'static str, v: f64) -> Self {
        self.measured.push((key, v));
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = Some(s.into());
        self
    }
}

impl Run<'_> {
    fn check(&mut self, name: impl Into<String>, anchor: &str, body: impl FnOnce(&SuiteConfig) -> Result<Outcome>) {
        let name = name.into();
        let record = match body(self.cfg) {
            Ok(o) => CheckRecord {
                inputs_hash: o.hash,
                measured: o.measured.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                threshold: o.threshold,
                passed: o.passed,
                reproduce: None,
                note: o.note,
                name,
                anchor: anchor.into(),
            },
            Err(e) => CheckRecord {
                inputs_hash: InputsHash::new(&name).text(&hashed_settings(self.cfg)).finish(),
                measured: BTreeMap::new(),
                threshold: f64::NAN,
                passed: false,
                reproduce: None,
                note: Some(e.to_string()),
                name,
                anchor: anchor.into(),
            },
        };
        let mut record = record;
        if !record.passed {
            record.reproduce = Some(self.cfg.command_line());
        }
        self.checks.push(record);
    }
}

/// A reproducible seed for item `i` of stream `tag`.
fn sub_seed(base: u64, tag: &str, i: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(tag.as_bytes());
    h.update((i as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// `(dim, size)` pairs: zipped when the lists have equal length, else every combination.
fn grids(cfg: &SuiteConfig) -> Vec<(usize, usize)> {
    if cfg.dims.len() == cfg.sizes.len() {
        cfg.dims.iter().copied().zip(cfg.sizes.iter().copied()).collect()
    } else {
        cfg.dims
            .iter()
            .flat_map(|&d| cfg.sizes.iter().map(move |&n| (d, n)))
            .collect()
    }
}

fn family(cfg: &SuiteConfig, g: &Geometry) -> Result<CubeFamily> {
    enumerate_cubes(g, cfg.family.unwrap_or_else(|| FamilyKind::default_for(g)))
}

/// Settings that determine the inputs; thread count and output path do not.
fn hashed_settings(cfg: &SuiteConfig) -> String {
    SuiteConfig {
        threads: None,
        out: None,
        ..cfg.clone()
    }
    .to_kv_string()
}

fn hash_with(label: &str, cfg: &SuiteConfig, fs: &[&GridFunction]) -> String {
    fs.iter()
        .fold(InputsHash::new(label).text(&hashed_settings(cfg)), |h, f| h.function(f))
        .finish()
}

fn ratio_spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// `a·χ_{Q1} − c·χ_{Q2}` with `Q1` in the left half and `Q2` in the right half along `x1`.
fn two_indicators(seed: u64, g: &Geometry) -> Result<GridFunction> {
    let mut rng = rng_for(seed);
    let n = g.min_extent();
    let half = (n / 2).max(1);
    let mut f = GridFunction::zeros(g);
    for part in 0..2 {
        let side = rng.gen_range(1..=(half / 2).max(1));
        let mut start: Vec<usize> = g.shape().iter().map(|&m| rng.gen_range(0..=m - side)).collect();
        start[0] = part * half + rng.gen_range(0..=half - side);
        let q = GridCube::new(&start, side);
        let amp: f64 = rng.gen_range(0.5..2.0) * if part == 0 { 1.0 } else { -1.0 };
        f = f.add(&GridFunction::indicator(g, &q)?.scale(amp))?;
    }
    Ok(f)
}

/// The `i`-th signed test function of a sample stream.
fn signed_sample(seed: u64, i: usize, g: &Geometry) -> Result<GridFunction> {
    match i % 3 {
        0 => generate(GeneratorKind::RandomSignCells, seed, g),
        1 => generate(GeneratorKind::SmoothBumpSum, seed, g),
        _ => two_indicators(seed, g),
    }
}

/// The `i`-th nonnegative test function of a sample stream; never zero.
fn positive_sample(seed: u64, i: usize, g: &Geometry) -> Result<GridFunction> {
    let f = match i % 3 {
        0 => generate(GeneratorKind::Indicator, seed, g)?,
        1 => generate(GeneratorKind::SmoothBumpSum, seed, g)?.abs(),
        _ => generate(GeneratorKind::LogLike, seed, g)?.abs(),
    };
    if f.is_zero() {
        Ok(GridFunction::constant(g, 1.0))
    } else {
        Ok(f)
    }
}

fn chi(run: &mut Run) {
    for (dim, n) in grids(run.cfg) {
        let tag = format!("d{dim}-n{n}");
        run.check(format!("chi-morrey-norm-{tag}"), "indicator-norms", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(cfg, &g)?;
            let e = cfg.exponents(dim)?;
            let dy = enumerate_cubes(&g, FamilyKind::Dyadic)?;
            let mut worst: f64 = 0.0;
            for q in dy.cubes() {
                let v = q.volume(g.spacing());
                let m = morrey_norm(&GridFunction::indicator(&g, q)?, &e, &fam)?.value;
                worst = worst.max((m - v.powf(1.0 / e.p0())).abs() / v.powf(1.0 / e.p0()));
            }
            let t = cfg.thresholds.chi_norm;
            Ok(Outcome::new(hash_with("chi-morrey", cfg, &[]), t, worst <= t)
                .with("max_relative_error", worst)
                .with("cubes", dy.len() as f64))
        });
        run.check(format!("chi-block-norm-{tag}"), "indicator-norms", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(cfg, &g)?;
            let e = cfg.exponents(dim)?;
            let dy = enumerate_cubes(&g, FamilyKind::Dyadic)?;
            let (mut gap, mut dev, mut product): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for q in dy.cubes() {
                let v = q.volume(g.spacing());
                let chi = GridFunction::indicator(&g, q)?;
                let rep = duality_gap(&chi, &e, &fam, &cfg.solver())?;
                let target = v.powf(1.0 - 1.0 / e.p0());
                gap = gap.max(rep.relative_gap);
                dev = dev.max((rep.upper - target).abs().max((rep.lower - target).abs()) / target);
                let m = morrey_norm(&chi, &e, &fam)?.value;
                product = product.max((m * rep.upper - v).abs() / v);
            }
            let t = cfg.thresholds.chi_gap;
            let worst = gap.max(dev).max(product);
            Ok(Outcome::new(hash_with("chi-block", cfg, &[]), t, worst <= t)
                .with("max_relative_gap", gap)
                .with("max_relative_deviation", dev)
                .with("max_product_error", product))
        });
    }
}

fn duality(run: &mut Run) {
    let mut worst_trace: Option<(f64, Series)> = None;
    for (dim, n) in grids(run.cfg) {
        let tag = format!("d{dim}-n{n}");
        let mut reports = Vec::new();
        let mut inputs = Vec::new();
        let setup = (|| -> Result<_> {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(run.cfg, &g)?;
            let e = run.cfg.exponents(dim)?;
            Ok((g, fam, e))
        })();
        let (g, fam, e) = match setup {
            Ok(s) => s,
            Err(err) => {
                let msg = err.to_string();
                run.check(format!("duality-setup-{tag}"), "kothe-duality", |_| Err(Error::Validation(msg)));
                continue;
            }
        };
        let mut failure = None;
        for i in 0..run.cfg.samples {
            let res = signed_sample(sub_seed(run.cfg.seed, &format!("duality-{tag}"), i), i, &g)
                .and_then(|f| duality_gap(&f, &e, &fam, &run.cfg.solver()).map(|r| (f, r)));
            match res {
                Ok((f, r)) => {
                    inputs.push(f);
                    reports.push(r);
                }
                Err(err) => {
                    failure = Some(err.to_string());
                    break;
                }
            }
        }
        let hash = hash_with("duality", run.cfg, &inputs.iter().collect::<Vec<_>>());
        if let Some(msg) = failure {
            run.check(format!("duality-{tag}"), "kothe-duality", |_| Err(Error::Validation(msg)));
            continue;
        }
        run.check(format!("weak-duality-{tag}"), "weak-duality", |cfg| {
            let viol = reports
                .iter()
                .map(|r| (r.lower - r.upper) / r.upper.max(1.0))
                .fold(f64::NEG_INFINITY, f64::max);
            let t = cfg.thresholds.weak_duality;
            Ok(Outcome::new(hash.clone(), t, viol <= t).with("max_violation", viol))
        });
        run.check(format!("strong-duality-default-{tag}"), "kothe-duality", |cfg| {
            let worst = reports.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
            let unconverged = reports.iter().filter(|r| !r.converged).count();
            let t = cfg.thresholds.gap_default;
            Ok(Outcome::new(hash.clone(), t, worst <= t)
                .with("max_relative_gap", worst)
                .with("unconverged", unconverged as f64))
        });
        run.check(format!("strong-duality-oracle-{tag}"), "kothe-duality", |cfg| {
            let t = cfg.thresholds.gap_oracle;
            let params = SolverParams::oracle();
            let mut worst: f64 = 0.0;
            for f in &inputs {
                worst = worst.max(duality_gap(f, &e, &fam, &params)?.relative_gap);
            }
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("max_relative_gap", worst))
        });
        run.check(format!("pairing-bound-{tag}"), "kothe-duality", |cfg| {
            // |∫fg| ≤ ‖f‖_block ‖g‖_Morrey with an independent g.
            let mut worst = f64::NEG_INFINITY;
            for (i, (f, r)) in inputs.iter().zip(&reports).enumerate() {
                let gf = generate(GeneratorKind::SmoothBumpSum, sub_seed(cfg.seed, &format!("pair-{tag}"), i), &g)?;
                let m = morrey_norm(&gf, &e, &fam)?.value;
                let lhs = pairing(f, &gf, false)?.abs();
                worst = worst.max((lhs - r.upper * m) / (r.upper * m).max(f64::MIN_POSITIVE));
            }
            let t = cfg.thresholds.weak_duality;
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("max_relative_excess", worst))
        });
        if let Some(r) = reports.iter().max_by(|a, b| a.relative_gap.total_cmp(&b.relative_gap)) {
            if worst_trace.as_ref().is_none_or(|(w, _)| r.relative_gap > *w) {
                let rows = r
                    .trace
                    .iter()
                    .map(|t| vec![t.iteration as f64, t.lower, t.upper])
                    .collect();
                worst_trace = Some((
                    r.relative_gap,
                    Series {
                        columns: vec!["iteration".into(), "lower".into(), "upper".into()],
                        rows,
                    },
                ));
            }
        }
    }
    if let Some((_, s)) = worst_trace {
        run.series.insert("duality-gap".into(), s);
    }
}

fn fatou(run: &mut Run) {
    for (dim, n) in grids(run.cfg) {
        let tag = format!("d{dim}-n{n}");
        // Per function: block norms of the truncations and of f itself.
        let data = (|| -> Result<Vec<(GridFunction, Vec<(f64, f64)>, (f64, f64))>> {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(run.cfg, &g)?;
            let e = run.cfg.exponents(dim)?;
            let params = run.cfg.solver();
            (0..run.cfg.samples)
                .map(|i| {
                    let f = positive_sample(sub_seed(run.cfg.seed, &format!("fatou-{tag}"), i), i, &g)?;
                    let seq = truncation_sequence(&f, run.cfg.steps)?
                        .iter()
                        .map(|fj| duality_gap(fj, &e, &fam, &params).map(|r| (r.lower, r.upper)))
                        .collect::<Result<Vec<_>>>()?;
                    let full = duality_gap(&f, &e, &fam, &params)?;
                    Ok((f, seq, (full.lower, full.upper)))
                })
                .collect()
        })();
        let data = match data {
            Ok(d) => d,
            Err(err) => {
                let msg = err.to_string();
                run.check(format!("fatou-{tag}"), "fatou-property", |_| Err(Error::Validation(msg)));
                continue;
            }
        };
        let hash = hash_with("fatou", run.cfg, &data.iter().map(|d| &d.0).collect::<Vec<_>>());
        run.check(format!("fatou-monotone-{tag}"), "fatou-property", |cfg| {
            let mut worst = f64::NEG_INFINITY;
            for (_, seq, (_, full)) in &data {
                for w in seq.windows(2) {
                    // A drop counts only when certified: lower bound above the next upper bound.
                    worst = worst.max((w[0].0 - w[1].1) / full);
                }
            }
            let t = cfg.thresholds.weak_duality;
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("max_certified_drop", worst))
        });
        run.check(format!("fatou-limit-{tag}"), "fatou-property", |cfg| {
            let worst = data
                .iter()
                .map(|(_, seq, (_, full))| (seq.last().expect("steps ≥ 1").1 - full).abs() / full)
                .fold(0.0, f64::max);
            let t = cfg.thresholds.fatou;
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("max_relative_error", worst))
        });
        run.check(format!("fatou-normalized-{tag}"), "fatou-property", |cfg| {
            // sup_j ‖f_j‖/‖f‖ must be 1 up to the tolerance.
            let mut worst: f64 = 0.0;
            for (_, seq, (lower, upper)) in &data {
                let sup = seq.iter().map(|s| s.1).fold(0.0, f64::max);
                let inf_ok = seq.iter().map(|s| s.0).fold(0.0, f64::max);
                worst = worst.max((sup / lower - 1.0).max(1.0 - inf_ok / upper));
            }
            let t = cfg.thresholds.fatou;
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("max_relative_deviation", worst))
        });
    }
}

fn adjoint(run: &mut Run) {
    for (dim, n) in grids(run.cfg) {
        let tag = format!("d{dim}-n{n}");
        let computed = (|| -> Result<(String, f64, f64)> {
            let cfg = run.cfg;
            let g = Geometry::unit_box(dim, n)?;
            let spec = KernelSpec::direct(cfg.alpha);
            let (mut sym, mut anti): (f64, f64) = (0.0, 0.0);
            let mut inputs = Vec::new();
            for i in 0..cfg.samples {
                let s = |k: &str| sub_seed(cfg.seed, &format!("adjoint-{tag}-{k}"), i);
                let f = generate(GeneratorKind::RandomSignCells, s("f"), &g)?;
                let h = generate(GeneratorKind::SmoothBumpSum, s("g"), &g)?;
                let b = generate(GeneratorKind::TwoLevel, s("b"), &g)?;
                let (ih, if_) = (frac_integral(&h, &spec)?, frac_integral(&f, &spec)?);
                let scale = pairing(&f.abs(), &frac_integral(&h.abs(), &spec)?, false)?;
                sym = sym.max((pairing(&f, &ih, false)? - pairing(&h, &if_, false)?).abs() / scale);
                let cbh = commutator(&b, &h, &spec)?;
                let cbf = commutator(&b, &f, &spec)?;
                let bound = b.abs().mul(&frac_integral(&h.abs(), &spec)?)?.add(&frac_integral(&b.mul(&h)?.abs(), &spec)?)?;
                let cscale = pairing(&f.abs(), &bound, false)?;
                anti = anti.max((pairing(&f, &cbh, false)? + pairing(&h, &cbf, false)?).abs() / cscale);
                inputs.extend([f, h, b]);
            }
            Ok((hash_with("adjoint", cfg, &inputs.iter().collect::<Vec<_>>()), sym, anti))
        })();
        let (hash, sym, anti) = match computed {
            Ok(c) => c,
            Err(err) => {
                let msg = err.to_string();
                run.check(format!("adjoint-{tag}"), "adjoint-identity", |_| Err(Error::Validation(msg)));
                continue;
            }
        };
        run.check(format!("adjoint-symmetry-{tag}"), "adjoint-identity", |cfg| {
            let t = cfg.thresholds.adjoint;
            Ok(Outcome::new(hash.clone(), t, sym <= t).with("max_relative_residual", sym))
        });
        run.check(format!("commutator-antisymmetry-{tag}"), "adjoint-identity", |cfg| {
            let t = cfg.thresholds.adjoint;
            Ok(Outcome::new(hash.clone(), t, anti <= t).with("max_relative_residual", anti))
        });
    }
}

fn ialpha(run: &mut Run) {
    let cfg = run.cfg;
    let alpha = cfg.alpha;
    let mut errors = Vec::new();
    for &n in &cfg.sizes {
        run.check(format!("ialpha-closed-form-n{n}"), "fractional-integral", |cfg| {
            // I_α χ_[0,1](x) = (x^α + (1−x)^α)/α.
            let g = Geometry::unit_box(1, n)?;
            let one = GridFunction::constant(&g, 1.0);
            let got = frac_integral(&one, &KernelSpec::new(alpha))?;
            let worst = (0..n)
                .map(|i| {
                    let x = g.center(i)[0];
                    let exact = (x.powf(alpha) + (1.0 - x).powf(alpha)) / alpha;
                    (got.values()[i] - exact).abs() / exact
                })
                .fold(0.0, f64::max);
            errors.push(worst);
            let t = cfg.thresholds.frac_error;
            Ok(Outcome::new(hash_with("ialpha-closed", cfg, &[&one]), t, worst <= t).with("max_relative_error", worst))
        });
    }
    run.check("ialpha-error-monotone", "fractional-integral", |cfg| {
        let increases = errors.windows(2).filter(|w| w[1] > w[0]).count();
        let mut o = Outcome::new(hash_with("ialpha-monotone", cfg, &[]), 0.0, increases == 0 && errors.len() == cfg.sizes.len())
            .with("increases", increases as f64);
        for (k, e) in errors.iter().enumerate() {
            o = o.with(["error_0", "error_1", "error_2", "error_3", "error_4", "error_5"][k.min(5)], *e);
        }
        Ok(o)
    });
    let n1 = cfg.sizes[0].min(256);
    for (dim, n) in [(1, n1), (2, 16), (3, 8)] {
        run.check(format!("ialpha-direct-fft-d{dim}-n{n}"), "fractional-integral", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let f = generate(GeneratorKind::RandomSignCells, sub_seed(cfg.seed, "ialpha-fft", dim), &g)?;
            let a = frac_integral(&f, &KernelSpec::direct(alpha))?;
            let b = frac_integral(&f, &KernelSpec::new(alpha))?;
            let err = a.sub(&b)?.max_abs() / a.max_abs();
            let t = cfg.thresholds.fft_agreement;
            Ok(Outcome::new(hash_with("ialpha-fft", cfg, &[&f]), t, err <= t).with("max_relative_difference", err))
        });
    }
}

/// A block on a cube of side `N/8` with `8^d` constant sign sub-cubes, scaled
/// to the block bound. The geometry is drawn in units of `N/16`, so one seed
/// gives the same continuum block at every resolution divisible by 64.
fn random_block(seed: u64, g: &Geometry, e: &ExponentTuple) -> Result<(GridFunction, GridCube)> {
    let mut rng = rng_for(seed);
    let n = g.min_extent();
    let side = (n / 8).max(1);
    let unit = (n / 16).max(1);
    let start: Vec<usize> = (0..g.dim()).map(|_| (rng.gen_range(2..=12) * unit).min(n - side)).collect();
    let q = GridCube::new(&start, side);
    let sub = (side / 8).max(1);
    let per_axis = side.div_ceil(sub);
    let levels: Vec<f64> = (0..per_axis.pow(g.dim() as u32))
        .map(|_| rng.gen_range(0.25..=1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let mut b = GridFunction::zeros(g);
    for i in q.cells(g) {
        let c = g.coords(i);
        let l = (0..g.dim()).rev().fold(0, |acc, k| acc * per_axis + (c[k] - start[k]) / sub);
        b.values_mut()[i] = levels[l];
    }
    let norm = mixed_norm(&b, e.conjugate().p())?;
    let bound = e.kappa(q.volume(g.spacing()));
    Ok((b.scale(bound / norm * (1.0 - 1e-12)), q))
}

fn maximal_suite(run: &mut Run) {
    let cfg = run.cfg;
    for (dim, n) in [(1, 64), (2, 16), (3, 8)] {
        run.check(format!("maximal-methods-d{dim}-n{n}"), "maximal-operator", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let all = enumerate_cubes(&g, FamilyKind::All)?;
            let f = generate(GeneratorKind::RandomSignCells, sub_seed(cfg.seed, "maximal-methods", dim), &g)?;
            let brute = maximal(&f, &all, MaximalMethod::Brute)?;
            let sat = maximal(&f, &all, MaximalMethod::SummedArea)?;
            let dyadic = maximal(&f, &all, MaximalMethod::Dyadic)?;
            let agree = brute.sub(&sat)?.max_abs() / brute.max_abs();
            let excess = dyadic
                .values()
                .iter()
                .zip(sat.values())
                .map(|(d, a)| d - a)
                .fold(f64::NEG_INFINITY, f64::max)
                / brute.max_abs();
            let t = cfg.thresholds.method_agreement;
            Ok(Outcome::new(hash_with("maximal-methods", cfg, &[&f]), t, agree <= t && excess <= t)
                .with("brute_vs_summed_area", agree)
                .with("dyadic_excess", excess))
        });
    }
    let dim = cfg.dims[0];
    let mut constants = Vec::new();
    let mut decay: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let largest = *cfg.sizes.iter().max().expect("validated");
    for &n in &cfg.sizes {
        let tag = format!("d{dim}-n{n}");
        let mut blocks = Vec::new();
        let mut worst: f64 = 0.0;
        let mut c_emp: f64 = 0.0;
        let res = (|| -> Result<()> {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(cfg, &g)?;
            let dy = enumerate_cubes(&g, FamilyKind::Dyadic)?;
            let e = cfg.exponents(dim)?;
            for i in 0..cfg.samples {
                let (b, q) = random_block(sub_seed(cfg.seed, "maximal-block", i), &g, &e)?;
                let dec = maximal_block_image(&b, &q, &e, &fam)?;
                worst = worst.max(dec.worst_ratio());
                if n == largest {
                    for p in &dec.pieces {
                        let slot = decay.entry(p.k).or_insert((0.0, p.reference));
                        slot.0 = slot.0.max(p.normalized);
                    }
                }
                c_emp = c_emp.max(duality_gap(&dec.maximal, &e, &dy, &cfg.solver())?.upper);
                blocks.push(b);
            }
            Ok(())
        })();
        let hash = hash_with("maximal-blocks", cfg, &blocks.iter().collect::<Vec<_>>());
        let failure = res.err().map(|e| e.to_string());
        run.check(format!("annular-decay-{tag}"), "maximal-annular-decay", |cfg| {
            if let Some(m) = &failure {
                return Err(Error::Validation(m.clone()));
            }
            let t = cfg.thresholds.annular_factor;
            Ok(Outcome::new(hash.clone(), t, worst <= t).with("worst_ratio", worst))
        });
        if failure.is_none() {
            constants.push(c_emp);
        }
    }
    run.check("maximal-block-bound-stability", "maximal-block-bound", |cfg| {
        if constants.len() != cfg.sizes.len() {
            return Err(Error::Validation("a grid size failed to produce a constant".into()));
        }
        let spread = ratio_spread(&constants);
        let t = cfg.thresholds.stability;
        let mut o = Outcome::new(hash_with("maximal-stability", cfg, &[]), t, spread <= t).with("spread", spread);
        for (k, c) in constants.iter().enumerate() {
            o = o.with(["constant_0", "constant_1", "constant_2", "constant_3"][k.min(3)], *c);
        }
        Ok(o)
    });
    run.series.insert(
        "annular-decay".into(),
        Series {
            columns: vec!["k".into(), "normalized_norm".into(), "reference".into()],
            rows: decay.into_iter().map(|(k, (v, r))| vec![k as f64, v, r]).collect(),
        },
    );
}

/// Fixed `p̄` tuples, one per (dimension, size) slot.
const HOLDER_TUPLES: [&[f64]; 5] = [&[1.5], &[3.0], &[2.0, 4.0], &[1.25, 6.0], &[1.5, 2.5, 5.0]];

fn holder(run: &mut Run) {
    let cfg = run.cfg;
    let size_for = |d: usize| {
        cfg.dims
            .iter()
            .position(|&x| x == d)
            .and_then(|i| cfg.sizes.get(i).copied())
            .unwrap_or(cfg.sizes[0])
    };
    let per = cfg.samples.div_ceil(HOLDER_TUPLES.len());
    for (t_idx, p) in HOLDER_TUPLES.iter().enumerate() {
        let dim = p.len();
        if !cfg.dims.contains(&dim) {
            continue;
        }
        let n = size_for(dim);
        let name = format!("holder-{}", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-"));
        run.check(name, "mixed-holder", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let pc: Vec<f64> = p.iter().map(|&x| x / (x - 1.0)).collect();
            let mut worst = f64::NEG_INFINITY;
            let mut hash = InputsHash::new("holder").text(&hashed_settings(cfg));
            for i in 0..per {
                let s = |k: &str| sub_seed(cfg.seed, &format!("holder-{t_idx}-{k}"), i);
                let f = signed_sample(s("f"), i, &g)?;
                let h = match i % 2 {
                    0 => generate(GeneratorKind::LogLike, s("g"), &g)?,
                    _ => generate(GeneratorKind::RandomSignCells, s("g"), &g)?,
                };
                let lhs = pairing(&f, &h, false)?.abs();
                let rhs = mixed_norm(&f, p)? * mixed_norm(&h, &pc)?;
                worst = worst.max((lhs - rhs) / rhs);
                hash = hash.function(&f).function(&h);
            }
            let t = cfg.thresholds.holder_slack;
            Ok(Outcome::new(hash.finish(), t, worst <= t)
                .with("max_relative_excess", worst)
                .with("pairs", per as f64))
        });
    }
}

fn sharp(run: &mut Run) {
    let cfg = run.cfg;
    let dim = cfg.dims[0];
    let mut constants = Vec::new();
    for &n in &cfg.sizes {
        run.check(format!("sharp-constant-d{dim}-n{n}"), "sharp-maximal-bound", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(cfg, &g)?;
            let spec = KernelSpec::new(cfg.alpha);
            let mut c: f64 = 0.0;
            let mut hash = InputsHash::new("sharp").text(&hashed_settings(cfg));
            for i in 0..cfg.samples {
                let b = generate(GeneratorKind::TwoLevel, sub_seed(cfg.seed, "sharp-b", i), &g)?;
                let f = generate(GeneratorKind::SmoothBumpSum, sub_seed(cfg.seed, "sharp-f", i), &g)?;
                c = c.max(sharp_bound_constant(&b, &f, &spec, cfg.r, &fam)?);
                hash = hash.function(&b).function(&f);
            }
            constants.push(c);
            Ok(Outcome::new(hash.finish(), 0.0, c.is_finite() && c > 0.0).with("constant", c))
        });
    }
    run.check("sharp-constant-stability", "sharp-maximal-bound", |cfg| {
        if constants.len() != cfg.sizes.len() {
            return Err(Error::Validation("a grid size failed to produce a constant".into()));
        }
        let spread = ratio_spread(&constants);
        let t = cfg.thresholds.stability;
        Ok(Outcome::new(hash_with("sharp-stability", cfg, &[]), t, spread <= t).with("spread", spread))
    });
}

/// `f` generated on a grid `2^j` times coarser and placed at the center of `g`:
/// the same continuum function compressed by `2^j`.
fn dilated(seed: u64, i: usize, g: &Geometry, j: usize) -> Result<GridFunction> {
    let n = g.min_extent();
    let m = n >> j;
    let small = Geometry::unit_box(g.dim(), m)?;
    let f = positive_sample(seed, i, &small)?;
    let off = (n - m) / 2;
    let mut out = GridFunction::zeros(g);
    for l in 0..small.len() {
        let c = small.coords(l);
        let coords: Vec<usize> = (0..g.dim()).map(|k| c[k] + off).collect();
        out.values_mut()[g.index(&coords)] = f.values()[l];
    }
    Ok(out)
}

const DILATIONS: usize = 3;

fn commutator_suite(run: &mut Run) {
    let cfg = run.cfg;
    let dim = cfg.dims[0];
    let mut constants = Vec::new();
    let mut adams = Vec::new();
    for &n in &cfg.sizes {
        run.check(format!("commutator-ratio-d{dim}-n{n}"), "commutator-bound", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let fam = family(cfg, &g)?;
            let (p, q) = (cfg.exponents(dim)?, cfg.target_exponents(dim)?);
            let spec = KernelSpec::new(cfg.alpha);
            let mut c: f64 = 0.0;
            let mut hash = InputsHash::new("commutator").text(&hashed_settings(cfg));
            for i in 0..cfg.samples {
                let b = generate(GeneratorKind::TwoLevel, sub_seed(cfg.seed, "commutator-b", i), &g)?;
                let bmo = bmo_norm(&b, &fam)?.value;
                hash = hash.function(&b);
                for j in 0..DILATIONS {
                    let f = dilated(sub_seed(cfg.seed, "commutator-f", i), i, &g, j)?;
                    let mf = morrey_norm(&f, &p, &fam)?.value;
                    let out = morrey_norm(&commutator(&b, &f, &spec)?, &q, &fam)?.value;
                    c = c.max(out / (bmo * mf));
                    adams.push(morrey_norm(&frac_integral(&f, &spec)?, &q, &fam)?.value / mf);
                    hash = hash.function(&f);
                }
            }
            constants.push(c);
            Ok(Outcome::new(hash.finish(), 0.0, c.is_finite() && c > 0.0).with("constant", c))
        });
    }
    run.check("commutator-stability", "commutator-bound", |cfg| {
        if constants.len() != cfg.sizes.len() {
            return Err(Error::Validation("a grid size failed to produce a constant".into()));
        }
        let spread = ratio_spread(&constants);
        let t = cfg.thresholds.stability;
        Ok(Outcome::new(hash_with("commutator-stability", cfg, &[]), t, spread <= t).with("spread", spread))
    });
    run.check("adams-ratio-spread", "fractional-morrey-bound", |cfg| {
        if adams.is_empty() {
            return Err(Error::Validation("no ratios were computed".into()));
        }
        let spread = ratio_spread(&adams);
        let t = cfg.thresholds.adams_spread;
        Ok(Outcome::new(hash_with("adams", cfg, &[]), t, spread <= t)
            .with("spread", spread)
            .with("min", adams.iter().copied().fold(f64::INFINITY, f64::min))
            .with("max", adams.iter().copied().fold(0.0, f64::max)))
    });
}

/// Cube of side `N/16` straddling the first jump of `b`, and an offset of
/// three sides that keeps the shifted cube inside the grid.
fn probe_setup(b: &GridFunction) -> (GridCube, Vec<i64>) {
    let g = b.geometry();
    let n = g.shape()[0];
    let s = (n / 16).max(1);
    let jump = (1..n)
        .find(|&i| b.values()[g.index(&[i][..]).min(g.len() - 1)] != b.values()[0])
        .unwrap_or(n / 2);
    let start = jump.saturating_sub(s / 2).min(n - s);
    let z = if start + 4 * s <= n { 3 } else { -3 };
    let mut z0 = vec![0; g.dim()];
    z0[0] = z;
    (GridCube::new(&vec![start; g.dim()], s), z0)
}

/// `max_m ‖[b,I_α]e_mχ‖_Morrey(q) / ‖e_mχ‖_Morrey(p)` over the probe's modes.
fn probe_operator_constant(
    b: &GridFunction,
    shifted: &GridCube,
    modes: usize,
    spec: &KernelSpec,
    p: &ExponentTuple,
    q: &ExponentTuple,
    fam: &CubeFamily,
) -> Result<f64> {
    let g = b.geometry();
    let t = shifted.side() as f64 * g.spacing();
    let omega = 2.0 * std::f64::consts::PI / (4.0 * t);
    let chi = GridFunction::indicator(g, shifted)?;
    let denom = morrey_norm(&chi, p, fam)?.value;
    let mut worst: f64 = 0.0;
    for m in -(modes as i64)..=modes as i64 {
        let mut re = GridFunction::zeros(g);
        let mut im = GridFunction::zeros(g);
        for i in shifted.cells(g) {
            let x = (g.coords(i)[0] as f64 + 0.5) * g.spacing();
            let (sn, cs) = (m as f64 * omega * x).sin_cos();
            re.values_mut()[i] = cs;
            im.values_mut()[i] = sn;
        }
        let modulus = commutator(b, &re, spec)?.zip_with(&commutator(b, &im, spec)?, f64::hypot)?;
        worst = worst.max(morrey_norm(&modulus, q, fam)?.value / denom);
    }
    Ok(worst)
}

fn probe(run: &mut Run) {
    let cfg = run.cfg;
    let n = cfg.sizes[0];
    let mut results = Vec::new();
    let mut inputs = Vec::new();
    let computed = (|| -> Result<()> {
        let g = Geometry::unit_box(1, n)?;
        let fam = family(cfg, &g)?;
        let spec = KernelSpec::new(cfg.alpha);
        let (p, q) = (cfg.exponents(1)?, cfg.target_exponents(1)?);
        for i in 0..cfg.samples {
            let b = generate(GeneratorKind::TwoLevel, sub_seed(cfg.seed, "probe-b", i), &g)?;
            let (cube, z0) = probe_setup(&b);
            let r = bmo_probe(&b, &cube, &z0, cfg.modes, &spec)?;
            let c_op = probe_operator_constant(&b, &r.shifted_cube, cfg.modes, &spec, &p, &q, &fam)?;
            results.push((r, c_op));
            inputs.push(b);
        }
        Ok(())
    })();
    let hash = hash_with("probe", cfg, &inputs.iter().collect::<Vec<_>>());
    let failure = computed.err().map(|e| e.to_string());
    let fail = |m: &Option<String>| -> Result<()> {
        match m {
            Some(m) => Err(Error::Validation(m.clone())),
            None => Ok(()),
        }
    };
    run.check("probe-reconstruction", "bmo-probe", |_| {
        fail(&failure)?;
        let excess = results
            .iter()
            .map(|(r, _)| (r.lower - r.direct_oscillation).abs() - r.truncation_residual)
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_err = results
            .iter()
            .map(|(r, _)| (r.lower - r.direct_oscillation).abs())
            .fold(0.0, f64::max);
        Ok(Outcome::new(hash.clone(), 0.0, excess <= 0.0)
            .with("max_excess_over_residual", excess)
            .with("max_reconstruction_error", worst_err))
    });
    run.check("probe-bridge", "bmo-probe", |_| {
        fail(&failure)?;
        let worst = results
            .iter()
            .map(|(r, _)| r.mean_oscillation - 2.0 * r.direct_oscillation * (1.0 + 1e-12))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Outcome::new(hash.clone(), 0.0, worst <= 0.0).with("max_excess", worst))
    });
    run.check("probe-operator-bound", "bmo-probe", |_| {
        fail(&failure)?;
        let worst = results
            .iter()
            .map(|(r, c)| r.lower.abs() - (r.coefficient_l1 * c * (1.0 + 1e-9) + r.truncation_residual))
            .fold(f64::NEG_INFINITY, f64::max);
        let c_max = results.iter().map(|(_, c)| *c).fold(0.0, f64::max);
        Ok(Outcome::new(hash.clone(), 0.0, worst <= 0.0)
            .with("max_excess", worst)
            .with("max_operator_constant", c_max))
    });
    run.check("probe-constant-symbol", "bmo-probe", |cfg| {
        let g = Geometry::unit_box(1, n)?;
        let b = GridFunction::constant(&g, 1.5);
        let s = (n / 16).max(1);
        let r = bmo_probe(&b, &GridCube::new(&[0], s), &[3], cfg.modes, &KernelSpec::new(cfg.alpha))?;
        let ok = r.lower.abs() <= r.truncation_residual.max(1e-12);
        Ok(Outcome::new(hash_with("probe-constant", cfg, &[&b]), 0.0, ok).with("lower", r.lower))
    });
}

fn io(run: &mut Run) {
    let cfg = run.cfg;
    let n = cfg.sizes[0];
    for dim in 1..=3 {
        run.check(format!("gfn1-round-trip-d{dim}"), "plumbing", |cfg| {
            let g = Geometry::unit_box(dim, n)?;
            let mut hash = InputsHash::new("io").text(&hashed_settings(cfg));
            let mut mismatches = 0;
            for kind in GeneratorKind::ALL {
                let f = generate(kind, sub_seed(cfg.seed, "io", dim), &g)?;
                if from_bytes(&to_bytes(&f))? != f {
                    mismatches += 1;
                }
                if from_csv(to_csv(&f).as_bytes())? != f {
                    mismatches += 1;
                }
                hash = hash.function(&f);
            }
            Ok(Outcome::new(hash.finish(), 0.0, mismatches == 0).with("mismatches", mismatches as f64))
        });
    }
    run.check("config-round-trip", "plumbing", |cfg| {
        let back = SuiteConfig::from_kv_str(&cfg.to_kv_string())?;
        Ok(Outcome::new(hash_with("config", cfg, &[]), 0.0, &back == cfg))
    });
    run.check("report-determinism", "plumbing", |cfg| {
        let mut small = SuiteConfig::defaults(SuiteName::Holder);
        small.seed = cfg.seed;
        small.samples = cfg.samples.max(1) * 5;
        let a = run_inner(&small)?.to_json()?;
        let b = run_inner(&small)?.to_json()?;
        Ok(Outcome::new(hash_with("determinism", cfg, &[]), 0.0, a == b)
            .with("bytes", a.len() as f64)
            .note(format!("holder suite, {} pairs, run twice", small.samples)))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_differ_by_tag_and_index() {
        assert_ne!(sub_seed(1, "a", 0), sub_seed(1, "b", 0));
        assert_ne!(sub_seed(1, "a", 0), sub_seed(1, "a", 1));
        assert_eq!(sub_seed(1, "a", 3), sub_seed(1, "a", 3));
    }

    #[test]
    fn random_block_is_a_block() {
        let g = Geometry::unit_box(1, 64).unwrap();
        let e = ExponentTuple::new(4.0, vec![2.0]).unwrap();
        let (b, q) = random_block(3, &g, &e).unwrap();
        crate::operators::check_block(&b, &q, &e).unwrap();
        assert_eq!(q.side(), 8);
    }

    #[test]
    fn dilation_compresses_support() {
        let g = Geometry::unit_box(1, 64).unwrap();
        let f = dilated(5, 0, &g, 2).unwrap();
        let support = f.values().iter().filter(|v| **v != 0.0).count();
        assert!(support <= 16);
    }

    #[test]
    fn failing_checks_carry_a_reproduction_line() {
        let mut cfg = SuiteConfig::defaults(SuiteName::Ialpha);
        cfg.sizes = vec![8];
        cfg.thresholds.frac_error = 1e-15;
        let r = run_suite(&cfg).unwrap();
        assert!(!r.passed);
        let f = r.failures().next().unwrap();
        assert!(f.reproduce.as_deref().unwrap().starts_with("morrey-lab suite ialpha"));
    }

    #[test]
    fn io_suite_passes() {
        let r = run_suite(&SuiteConfig::defaults(SuiteName::Io)).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }
}
