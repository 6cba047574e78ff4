//! Suite configuration: defaults per suite, `key = value` files and flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::duality::SolverParams;
use crate::error::{Error, Result};
use crate::grid::FamilyKind;
use crate::norms::{check_fractional_relation, ExponentTuple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Chi,
    Duality,
    Fatou,
    Adjoint,
    Ialpha,
    Maximal,
    Holder,
    Sharp,
    Commutator,
    Probe,
    Io,
}

impl SuiteName {
    pub const ALL: [SuiteName; 11] = [
        Self::Chi,
        Self::Duality,
        Self::Fatou,
        Self::Adjoint,
        Self::Ialpha,
        Self::Maximal,
        Self::Holder,
        Self::Sharp,
        Self::Commutator,
        Self::Probe,
        Self::Io,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Chi => "chi",
            Self::Duality => "duality",
            Self::Fatou => "fatou",
            Self::Adjoint => "adjoint",
            Self::Ialpha => "ialpha",
            Self::Maximal => "maximal",
            Self::Holder => "holder",
            Self::Sharp => "sharp",
            Self::Commutator => "commutator",
            Self::Probe => "probe",
            Self::Io => "io",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "suite",
                name: s.into(),
            })
    }

    /// Whether the suite needs the fractional exponent relation.
    pub fn uses_fractional(&self) -> bool {
        matches!(self, Self::Commutator | Self::Probe)
    }
}

/// Pass/fail thresholds. Defaults are the acceptance levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// χ_Q identities (Morrey norm).
    pub chi_norm: f64,
    /// χ_Q duality gap and product identity.
    pub chi_gap: f64,
    /// Relative duality gap at default budgets.
    pub gap_default: f64,
    /// Relative duality gap at long-run budgets.
    pub gap_oracle: f64,
    /// Weak-duality slack, relative to `max(1, upper)`.
    pub weak_duality: f64,
    /// Fatou: final value against the untruncated norm.
    pub fatou: f64,
    /// Adjoint identity and antisymmetry residuals.
    pub adjoint: f64,
    /// Fractional-integral closed-form error at the finest size.
    pub frac_error: f64,
    /// Direct against FFT application.
    pub fft_agreement: f64,
    /// Brute against summed-area maximal function.
    pub method_agreement: f64,
    /// Annular pieces: `normalized_k ≤ factor·2^{−nk/p0}`.
    pub annular_factor: f64,
    /// Allowed ratio between empirical constants on different grids.
    pub stability: f64,
    /// Allowed spread `c2/c1` of the fractional-integral ratio.
    pub adams_spread: f64,
    /// Relative slack in Hölder's inequality.
    pub holder_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            chi_norm: 1e-12,
            chi_gap: 1e-6,
            gap_default: 0.02,
            gap_oracle: 1e-3,
            weak_duality: 1e-9,
            fatou: 0.01,
            adjoint: 1e-10,
            frac_error: 0.02,
            fft_agreement: 1e-8,
            method_agreement: 1e-12,
            annular_factor: 4.0,
            stability: 2.0,
            adams_spread: 10.0,
            holder_slack: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    pub dims: Vec<usize>,
    /// Grid sizes (cells per axis), tried in order.
    pub sizes: Vec<usize>,
    pub p0: f64,
    pub p: Vec<f64>,
    pub q0: f64,
    pub q: Vec<f64>,
    pub alpha: f64,
    pub r: f64,
    pub family: Option<FamilyKind>,
    pub seed: u64,
    /// Random inputs per size.
    pub samples: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub gap_tol: f64,
    pub modes: usize,
    pub steps: usize,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub thresholds: Thresholds,
}

impl SuiteConfig {
    /// The desk-scale defaults of a suite.
    pub fn defaults(suite: SuiteName) -> Self {
        let solver = SolverParams::default();
        let mut c = Self {
            suite,
            dims: vec![1],
            sizes: vec![16],
            p0: 3.0,
            p: vec![2.0],
            q0: 4.0,
            q: vec![2.4],
            alpha: 0.25,
            r: 2.0,
            family: None,
            seed: 7,
            samples: 10,
            max_iters: solver.max_iters,
            tol: solver.tol,
            gap_tol: solver.gap_tol,
            modes: 16,
            steps: 8,
            threads: None,
            out: None,
            thresholds: Thresholds::default(),
        };
        match suite {
            SuiteName::Chi => {
                c.dims = vec![1, 2];
                c.sizes = vec![32, 16];
                c.family = Some(FamilyKind::Dyadic);
            }
            SuiteName::Duality => {
                c.sizes = vec![8, 16];
                c.samples = 50;
                c.family = Some(FamilyKind::Dyadic);
            }
            SuiteName::Fatou => {
                c.sizes = vec![16];
                c.samples = 10;
                c.family = Some(FamilyKind::Dyadic);
            }
            SuiteName::Adjoint => {
                c.dims = vec![1, 2];
                c.sizes = vec![256, 32];
                c.samples = 20;
                c.alpha = 0.5;
            }
            SuiteName::Ialpha => {
                c.sizes = vec![128, 256, 512, 1024];
                c.alpha = 0.5;
            }
            SuiteName::Maximal => {
                c.sizes = vec![64, 128];
                c.p0 = 4.0;
                c.family = Some(FamilyKind::All);
            }
            SuiteName::Holder => {
                c.dims = vec![1, 2, 3];
                c.sizes = vec![16, 8, 4];
                c.samples = 1000;
            }
            SuiteName::Sharp => {
                c.sizes = vec![64, 128, 256];
                c.family = Some(FamilyKind::All);
            }
            SuiteName::Commutator => {
                c.sizes = vec![64, 128];
                c.p0 = 2.0;
                c.p = vec![1.5];
                c.samples = 50;
                c.family = Some(FamilyKind::All);
            }
            SuiteName::Probe => {
                c.sizes = vec![128];
                c.p0 = 2.0;
                c.p = vec![1.5];
                c.samples = 5;
                c.family = Some(FamilyKind::All);
            }
            SuiteName::Io => {
                c.sizes = vec![8];
                c.samples = 3;
            }
        }
        c
    }

    pub fn solver(&self) -> SolverParams {
        SolverParams {
            max_iters: self.max_iters,
            tol: self.tol,
            gap_tol: self.gap_tol,
            ..SolverParams::default()
        }
    }

    /// The `(p0; p̄)` tuple in dimension `dim`: a one-entry `p` is repeated.
    pub fn exponents(&self, dim: usize) -> Result<ExponentTuple> {
        ExponentTuple::new(self.p0, expand(&self.p, dim)?)
    }

    pub fn target_exponents(&self, dim: usize) -> Result<ExponentTuple> {
        ExponentTuple::new(self.q0, expand(&self.q, dim)?)
    }

    /// Validates everything a run depends on, before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sizes.is_empty() {
            return Err(Error::Validation("dims and sizes must be nonempty".into()));
        }
        if let Some(d) = self.dims.iter().find(|&&d| !(1..=3).contains(&d)) {
            return Err(Error::UnsupportedDimension(*d));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(Error::Validation(format!("grid size {n} is below 2")));
        }
        if self.threads == Some(0) {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        for &d in &self.dims {
            let e = self.exponents(d)?;
            e.check_admissible()?;
            if self.suite.uses_fractional() {
                let q = self.target_exponents(d)?;
                check_fractional_relation(&e, &q, self.alpha)?;
            }
        }
        if self.suite == SuiteName::Sharp && !(self.r > 1.0 && self.r * self.alpha < *self.dims.iter().min().unwrap() as f64) {
            return Err(Error::Validation(format!(
                "rα < n fails: r = {}, α = {}",
                self.r, self.alpha
            )));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Parse(format!("{key} = {value}: {what}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let int = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("expected an integer"));
        let list = |v: &str| -> Result<Vec<f64>> { v.split(',').map(num).collect() };
        let ilist = |v: &str| -> Result<Vec<usize>> { v.split(',').map(int).collect() };
        let t = &mut self.thresholds;
        match key {
            "suite" => self.suite = SuiteName::parse(value)?,
            "dims" | "dim" => self.dims = ilist(value)?,
            "sizes" | "n" => self.sizes = ilist(value)?,
            "p0" => self.p0 = num(value)?,
            "p" => self.p = list(value)?,
            "q0" => self.q0 = num(value)?,
            "q" => self.q = list(value)?,
            "alpha" => self.alpha = num(value)?,
            "r" => self.r = num(value)?,
            "family" => self.family = Some(FamilyKind::parse(value)?),
            "seed" => self.seed = value.trim().parse().map_err(|_| bad("expected an integer"))?,
            "samples" => self.samples = int(value)?,
            "max-iters" => self.max_iters = int(value)?,
            "tol" => self.tol = num(value)?,
            "gap-tol" => self.gap_tol = num(value)?,
            "modes" => self.modes = int(value)?,
            "steps" => self.steps = int(value)?,
            "threads" => self.threads = Some(int(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "chi-norm" => t.chi_norm = num(value)?,
            "chi-gap" => t.chi_gap = num(value)?,
            "gap-default" => t.gap_default = num(value)?,
            "gap-oracle" => t.gap_oracle = num(value)?,
            "weak-duality" => t.weak_duality = num(value)?,
            "fatou" => t.fatou = num(value)?,
            "adjoint" => t.adjoint = num(value)?,
            "frac-error" => t.frac_error = num(value)?,
            "fft-agreement" => t.fft_agreement = num(value)?,
            "method-agreement" => t.method_agreement = num(value)?,
            "annular-factor" => t.annular_factor = num(value)?,
            "stability" => t.stability = num(value)?,
            "adams-spread" => t.adams_spread = num(value)?,
            "holder-slack" => t.holder_slack = num(value)?,
            _ => {
                return Err(Error::Unknown {
                    kind: "config key",
                    name: key.into(),
                })
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines (`#` comments, blank lines ignored). A
    /// `suite` key, if present, selects the defaults the other keys override.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = parse_kv(text)?;
        let suite = match pairs.iter().find(|(k, _)| k == "suite") {
            Some((_, v)) => SuiteName::parse(v)?,
            None => return Err(Error::Parse("missing `suite` key".into())),
        };
        let mut cfg = Self::defaults(suite);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Every setting as `key = value` lines, in a fixed order.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Command line that reruns this configuration.
    pub fn command_line(&self) -> String {
        let mut s = format!("morrey-lab suite {}", self.suite.name());
        let defaults = Self::defaults(self.suite);
        let base: BTreeMap<_, _> = defaults.entries().into_iter().collect();
        for (k, v) in self.entries() {
            if k == "suite" || k == "out" || base.get(k) == Some(&v) {
                continue;
            }
            let _ = write!(s, " --set {k}={v}");
        }
        let _ = write!(s, " --seed {}", self.seed);
        if let Some(t) = self.threads {
            let _ = write!(s, " --threads {t}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let ijoin = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let t = &self.thresholds;
        let mut out = vec![
            ("suite", self.suite.name().to_string()),
            ("dims", ijoin(&self.dims)),
            ("sizes", ijoin(&self.sizes)),
            ("p0", self.p0.to_string()),
            ("p", join(&self.p)),
            ("q0", self.q0.to_string()),
            ("q", join(&self.q)),
            ("alpha", self.alpha.to_string()),
            ("r", self.r.to_string()),
        ];
        if let Some(f) = self.family {
            out.push(("family", f.name().to_string()));
        }
        out.extend([
            ("seed", self.seed.to_string()),
            ("samples", self.samples.to_string()),
            ("max-iters", self.max_iters.to_string()),
            ("tol", self.tol.to_string()),
            ("gap-tol", self.gap_tol.to_string()),
            ("modes", self.modes.to_string()),
            ("steps", self.steps.to_string()),
        ]);
        if let Some(th) = self.threads {
            out.push(("threads", th.to_string()));
        }
        if let Some(o) = &self.out {
            out.push(("out", o.display().to_string()));
        }
        out.extend([
            ("chi-norm", t.chi_norm.to_string()),
            ("chi-gap", t.chi_gap.to_string()),
            ("gap-default", t.gap_default.to_string()),
            ("gap-oracle", t.gap_oracle.to_string()),
            ("weak-duality", t.weak_duality.to_string()),
            ("fatou", t.fatou.to_string()),
            ("adjoint", t.adjoint.to_string()),
            ("frac-error", t.frac_error.to_string()),
            ("fft-agreement", t.fft_agreement.to_string()),
            ("method-agreement", t.method_agreement.to_string()),
            ("annular-factor", t.annular_factor.to_string()),
            ("stability", t.stability.to_string()),
            ("adams-spread", t.adams_spread.to_string()),
            ("holder-slack", t.holder_slack.to_string()),
        ]);
        out
    }
}

fn expand(p: &[f64], dim: usize) -> Result<Vec<f64>> {
    match p.len() {
        1 => Ok(vec![p[0]; dim]),
        n if n == dim => Ok(p.to_vec()),
        n => Err(Error::InvalidExponent(format!("{n} exponents for dimension {dim}"))),
    }
}

/// Splits `key = value` lines; keys are trimmed, `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
