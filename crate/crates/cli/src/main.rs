//! `morrey-lab`: norms, operators, duality certificates and check suites from
//! the command line.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 on usage or IO errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use morrey::duality::{block_norm_upper, dual_norm_lower, duality_gap, AscentParams, SolverParams};
use morrey::grid::io::{load, save, to_csv};
use morrey::grid::{enumerate_cubes, CubeFamily, FamilyKind, GridCube, GridFunction};
use morrey::lab::{emit_plotdata, generate_with, parse_kv, run_suite, GeneratorKind, SuiteConfig, SuiteName, SuiteReport};
use morrey::norms::{
    bmo_norm, convexified_norm, mixed_norm, morrey_norm, weighted_lp_norm, ExponentRecord, ExponentTuple,
    NormDescriptor, NormReport, Weight,
};
use morrey::operators::{
    bmo_probe, commutator, frac_integral, maximal, sharp_maximal, KernelMethod, KernelSpec, MaximalMethod,
};

#[derive(Parser, Debug)]
#[command(name = "morrey-lab", version, about, args_override_self = true)]
struct Cli {
    /// Seed for generated inputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` file whose entries act as flags given before the command line's own.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Evaluate one norm of a grid function.
    Norm(NormArgs),
    /// Apply an operator.
    Op(OpArgs),
    /// Block norm bounds and the duality certificate.
    Dual(DualArgs),
    /// Run a named check suite.
    Suite(SuiteArgs),
    /// Write a seeded test function.
    Gen(GenArgs),
    /// Extract a plot series from a suite report as CSV.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Space {
    Mixed,
    Morrey,
    Bmo,
    Wlp,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct NormArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    space: Space,
    #[arg(long)]
    p0: Option<f64>,
    /// Comma-separated; one value is repeated on every axis.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    family: Option<String>,
    /// Weight function for `wlp`.
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Evaluate the `r`-convexification instead.
    #[arg(long)]
    convexify: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Operator {
    Maximal,
    Sharp,
    Ialpha,
    Commutator,
    Probe,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OpArgs {
    #[arg(value_enum)]
    operator: Operator,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Symbol `b` for `commutator` and `probe`.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// `direct|fft` for kernels, `brute|summed-area|dyadic` for `maximal`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// Probe cube as `start1,...,startd,side`.
    #[arg(long, value_delimiter = ',')]
    cube: Vec<usize>,
    /// Probe offset in cube sides.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z0: Vec<i64>,
    #[arg(long, default_value_t = 16)]
    modes: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DualMode {
    Gap,
    Block,
    Lower,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct DualArgs {
    #[arg(value_enum)]
    mode: DualMode,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p0: f64,
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Long-run reference budgets.
    #[arg(long)]
    oracle: bool,
    /// Also write the dual witness `g` here.
    #[arg(long)]
    witness: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Suite name; may come from the config file's `suite` key instead.
    name: Option<String>,
    /// Override one setting, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct GenArgs {
    kind: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Indicator cube as `start1,...,startd,side`.
    #[arg(long, value_delimiter = ',')]
    cube: Vec<usize>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PlotArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    series: String,
}

/// Errors that end the run with status 2.
#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

const GLOBAL_KEYS: [&str; 3] = ["seed", "threads", "out"];

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match with_config(raw) {
        Ok(a) => a,
        Err(Failure(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

/// Index of the verb in `args`, skipping global flags and their values.
fn verb_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if ["--seed", "--threads", "--out", "--config"].contains(&a) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(args: &[String]) -> Option<String> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// Splices config entries into the argument list ahead of the user's flags,
/// which therefore win. Suite settings become `--set` pairs.
fn with_config(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure(format!("{path}: {e}")))?;
    let pairs = parse_kv(&text)?;
    let Some(v) = verb_position(&args) else {
        return Ok(args);
    };
    let is_suite = args[v] == "suite";
    let mut global = Vec::new();
    let mut local = Vec::new();
    for (k, val) in pairs {
        if GLOBAL_KEYS.contains(&k.as_str()) {
            global.push(format!("--{k}={val}"));
        } else if is_suite {
            local.push(format!("--set={k}={val}"));
        } else {
            local.push(format!("--{k}={val}"));
        }
    }
    let mut out = Vec::with_capacity(args.len() + global.len() + local.len());
    out.push(args[0].clone());
    out.extend(global);
    out.extend(args[1..=v].iter().cloned());
    out.extend(local);
    out.extend(args[v + 1..].iter().cloned());
    Ok(out)
}

fn run(cli: Cli) -> Outcome {
    let out = cli.out.clone();
    if let Verb::Suite(a) = &cli.verb {
        return suite(a, &cli);
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.verb {
        Verb::Norm(a) => norm(a, out.as_deref()),
        Verb::Op(a) => op(a, out.as_deref()),
        Verb::Dual(a) => dual(a, out.as_deref()),
        Verb::Gen(a) => gen(a, cli.seed.unwrap_or(7), out.as_deref()),
        Verb::Plotdata(a) => plotdata(a, out.as_deref()),
        Verb::Suite(_) => unreachable!(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                // A closed pipe (`| head`) is not an error worth reporting.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|e| Failure(format!("stdout: {e}"))),
            }
        }
    }
}

fn emit_json(v: &impl serde::Serialize, out: Option<&Path>) -> Result<(), Failure> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"), out)
}

fn read(path: &Path) -> Result<GridFunction, Failure> {
    load(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn family_for(name: Option<&str>, f: &GridFunction) -> Result<CubeFamily, Failure> {
    let kind = match name {
        Some(n) => FamilyKind::parse(n)?,
        None => FamilyKind::default_for(f.geometry()),
    };
    Ok(enumerate_cubes(f.geometry(), kind)?)
}

fn exponents(p0: f64, p: &[f64], dim: usize) -> Result<ExponentTuple, Failure> {
    let p = match p.len() {
        0 => return Err(Failure("--p is required".into())),
        1 => vec![p[0]; dim],
        _ => p.to_vec(),
    };
    Ok(ExponentTuple::new(p0, p)?)
}

fn parse_cube(v: &[usize], dim: usize) -> Result<GridCube, Failure> {
    if v.len() != dim + 1 {
        return Err(Failure(format!("--cube needs {dim} start entries and a side")));
    }
    Ok(GridCube::new(&v[..dim], v[dim]))
}

fn norm(a: NormArgs, out: Option<&Path>) -> Outcome {
    let f = read(&a.input)?;
    let dim = f.dim();
    let p_full = |p: &[f64]| match p.len() {
        1 => vec![p[0]; dim],
        _ => p.to_vec(),
    };
    let (value, argmax, family, record) = match a.space {
        Space::Mixed => {
            let p = p_full(&a.p);
            let v = match a.convexify {
                Some(r) => convexified_norm(&f, &NormDescriptor::Mixed { p: p.clone() }, r)?,
                None => mixed_norm(&f, &p)?,
            };
            (v, None, None, ExponentRecord { p0: None, p })
        }
        Space::Morrey => {
            let p0 = a.p0.ok_or_else(|| Failure("--p0 is required for morrey".into()))?;
            let e = exponents(p0, &a.p, dim)?;
            let fam = family_for(a.family.as_deref(), &f)?;
            let (v, cube) = match a.convexify {
                Some(r) => {
                    let d = NormDescriptor::Morrey {
                        exponents: e.clone(),
                        family: fam.kind(),
                    };
                    (convexified_norm(&f, &d, r)?, None)
                }
                None => {
                    let m = morrey_norm(&f, &e, &fam)?;
                    (m.value, Some(m.argmax))
                }
            };
            let rec = ExponentRecord {
                p0: Some(p0),
                p: e.p().to_vec(),
            };
            (v, cube, Some(fam.kind()), rec)
        }
        Space::Bmo => {
            let fam = family_for(a.family.as_deref(), &f)?;
            let m = bmo_norm(&f, &fam)?;
            (m.value, Some(m.argmax), Some(fam.kind()), ExponentRecord::default())
        }
        Space::Wlp => {
            let w = Weight::new(read(a.weight.as_deref().ok_or_else(|| Failure("--weight is required for wlp".into()))?)?)?;
            let p = *a.p.first().ok_or_else(|| Failure("--p is required".into()))?;
            let v = match a.convexify {
                Some(r) => convexified_norm(&f, &NormDescriptor::WeightedLp { p, weight: w }, r)?,
                None => weighted_lp_norm(&f, p, &w)?,
            };
            (v, None, None, ExponentRecord { p0: None, p: vec![p] })
        }
    };
    let report = NormReport {
        space: format!("{:?}", a.space).to_lowercase(),
        value,
        argmax_cube: argmax,
        family,
        exponents: record,
    };
    emit_json(&report, out)?;
    Ok(true)
}

fn kernel(alpha: f64, method: Option<&str>) -> Result<KernelSpec, Failure> {
    let mut spec = KernelSpec::new(alpha);
    if let Some(m) = method {
        spec.method = KernelMethod::parse(m)?;
    }
    Ok(spec)
}

fn op(a: OpArgs, out: Option<&Path>) -> Outcome {
    let need = |p: &Option<PathBuf>, flag: &str| -> Result<GridFunction, Failure> {
        read(p.as_deref().ok_or_else(|| Failure(format!("--{flag} is required")))?)
    };
    if let Operator::Probe = a.operator {
        let b = need(&a.b, "b")?;
        let cube = parse_cube(&a.cube, b.dim())?;
        let r = bmo_probe(&b, &cube, &a.z0, a.modes, &kernel(a.alpha, a.method.as_deref())?)?;
        let ok = (r.lower - r.direct_oscillation).abs() <= r.truncation_residual;
        emit_json(&r, out)?;
        return Ok(ok);
    }
    let f = need(&a.input, "input")?;
    let result = match a.operator {
        Operator::Maximal => {
            let fam = family_for(a.family.as_deref(), &f)?;
            let method = match a.method.as_deref() {
                Some(m) => MaximalMethod::parse(m)?,
                None => MaximalMethod::SummedArea,
            };
            maximal(&f, &fam, method)?
        }
        Operator::Sharp => sharp_maximal(&f, &family_for(a.family.as_deref(), &f)?)?,
        Operator::Ialpha => frac_integral(&f, &kernel(a.alpha, a.method.as_deref())?)?,
        Operator::Commutator => commutator(&need(&a.b, "b")?, &f, &kernel(a.alpha, a.method.as_deref())?)?,
        Operator::Probe => unreachable!(),
    };
    let stats = json!({
        "operator": format!("{:?}", a.operator).to_lowercase(),
        "cells": result.values().len(),
        "max_abs": result.max_abs(),
        "l1": result.values().iter().map(|v| v.abs()).sum::<f64>() * result.geometry().cell_volume(),
    });
    match out {
        Some(p) => {
            save(&result, p)?;
            emit(&(serde_json::to_string_pretty(&stats)? + "\n"), None)?;
        }
        None => emit(&to_csv(&result), None)?,
    }
    Ok(true)
}

fn dual(a: DualArgs, out: Option<&Path>) -> Outcome {
    let f = read(&a.input)?;
    let e = exponents(a.p0, &a.p, f.dim())?;
    let kind = match a.family.as_deref() {
        Some(n) => FamilyKind::parse(n)?,
        None if f.geometry().is_dyadic() => FamilyKind::Dyadic,
        None => FamilyKind::default_for(f.geometry()),
    };
    let fam = enumerate_cubes(f.geometry(), kind)?;
    let mut params = if a.oracle { SolverParams::oracle() } else { SolverParams::default() };
    if let Some(m) = a.max_iters {
        params.max_iters = m;
    }
    if let Some(t) = a.tol {
        params.tol = t;
    }
    if let Some(t) = a.gap_tol {
        params.gap_tol = t;
    }
    match a.mode {
        DualMode::Gap => {
            let r = duality_gap(&f, &e, &fam, &params)?;
            if let Some(w) = &a.witness {
                save(&r.witness_g, w)?;
            }
            emit_json(&r, out)?;
            Ok(r.weak_duality_holds)
        }
        DualMode::Block => {
            let (upper, d) = block_norm_upper(&f, &e, &fam, &params)?;
            let check = d.verify(&f, &e)?;
            let terms: Vec<_> = d
                .terms
                .iter()
                .map(|t| json!({"cube": t.cube, "dilation": t.dilation, "lambda": t.lambda}))
                .collect();
            emit_json(
                &json!({
                    "upper": upper,
                    "reconstruction_residual": check.reconstruction_residual,
                    "max_block_ratio": check.max_block_ratio,
                    "terms": terms,
                }),
                out,
            )?;
            Ok(true)
        }
        DualMode::Lower => {
            let (lower, g) = dual_norm_lower(&f, &e, &fam, &AscentParams::default())?;
            if let Some(w) = &a.witness {
                save(&g, w)?;
            }
            emit_json(&json!({"lower": lower, "family": fam.kind()}), out)?;
            Ok(true)
        }
    }
}

fn suite(a: &SuiteArgs, cli: &Cli) -> Outcome {
    let mut settings: Vec<(String, String)> = Vec::new();
    for s in &a.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure(format!("--set {s}: expected key=value")))?;
        settings.push((k.trim().to_string(), v.trim().to_string()));
    }
    let name = match &a.name {
        Some(n) => n.clone(),
        None => settings
            .iter()
            .rev()
            .find(|(k, _)| k == "suite")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Failure("no suite named; give one or set `suite` in the config".into()))?,
    };
    let mut cfg = SuiteConfig::defaults(SuiteName::parse(&name)?);
    for (k, v) in &settings {
        if k != "suite" {
            cfg.set(k, v)?;
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    let report = run_suite(&cfg)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {}", c.name);
        if let Some(r) = &c.reproduce {
            eprintln!("  reproduce: {r}");
        }
        if let Some(n) = c.note.as_ref().filter(|_| !c.passed) {
            eprintln!("  note: {n}");
        }
    }
    emit(&report.to_json()?, cli.out.as_deref())?;
    Ok(report.passed)
}

fn gen(a: GenArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let kind = GeneratorKind::parse(&a.kind)?;
    let g = morrey::grid::Geometry::unit_box(a.dim, a.n)?;
    let cube = if a.cube.is_empty() {
        None
    } else {
        Some(parse_cube(&a.cube, a.dim)?)
    };
    let f = generate_with(kind, seed, &g, cube.as_ref())?;
    match out {
        Some(p) => save(&f, p)?,
        None => emit(&to_csv(&f), None)?,
    }
    Ok(true)
}

fn plotdata(a: PlotArgs, out: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(&a.report).map_err(|e| Failure(format!("{}: {e}", a.report.display())))?;
    let report = SuiteReport::from_json(&text)?;
    emit(&emit_plotdata(&report, &a.series)?, out)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn verb_found_after_global_flags() {
        assert_eq!(verb_position(&argv("lab --seed 3 --out x suite chi")), Some(5));
        assert_eq!(verb_position(&argv("lab --seed=3 norm")), Some(2));
    }

    #[test]
    fn config_entries_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.kv");
        fs::write(&path, "seed = 4\nsamples = 2\n").unwrap();
        let args = with_config(argv(&format!("lab --config {} suite holder --set samples=5", path.display()))).unwrap();
        assert_eq!(
            &args[1..],
            &argv(&format!("--seed=4 --config {} suite --set=samples=2 holder --set samples=5", path.display()))[..]
        );
    }
}
