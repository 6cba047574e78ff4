use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing exponent relations that are stated as equalities.
pub const RELATION_TOL: f64 = 1e-9;

/// Morrey exponents `(p0; p1, ..., pn)`, all in `(1, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    p0: f64,
    p: Vec<f64>,
}

fn check_open(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("{name} = {v} is not in (1, ∞)")))
    }
}

impl ExponentTuple {
    /// Validates the range of every exponent. Admissibility is a separate check.
    pub fn new(p0: f64, p: Vec<f64>) -> Result<Self> {
        check_open("p0", p0)?;
        if p.is_empty() || p.len() > crate::grid::MAX_DIM {
            return Err(Error::UnsupportedDimension(p.len()));
        }
        for (i, &pi) in p.iter().enumerate() {
            check_open(&format!("p{}", i + 1), pi)?;
        }
        Ok(Self { p0, p })
    }

    /// Equal inner exponents `p` on every axis.
    pub fn uniform(p0: f64, p: f64, dim: usize) -> Result<Self> {
        Self::new(p0, vec![p; dim])
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn inverse_sum(&self) -> f64 {
        self.p.iter().map(|p| 1.0 / p).sum()
    }

    /// `e = 1/p0 − (1/n)·Σ 1/p_i`, the power of `|Q|` in the Morrey norm.
    pub fn morrey_exponent(&self) -> f64 {
        let e = 1.0 / self.p0 - self.inverse_sum() / self.dim() as f64;
        // The Lebesgue case must come out as an exact zero.
        if e.abs() < 1e-15 {
            0.0
        } else {
            e
        }
    }

    /// `|Q|^e` for a cube of the given volume.
    pub fn kappa(&self, volume: f64) -> f64 {
        volume.powf(self.morrey_exponent())
    }

    /// `n/p0 ≤ Σ 1/p_i`.
    pub fn is_admissible(&self) -> bool {
        self.morrey_exponent() <= 0.0
    }

    pub fn check_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(Error::NotAdmissible(format!(
                "n/p0 = {} exceeds Σ1/p_i = {}",
                self.dim() as f64 / self.p0,
                self.inverse_sum()
            )))
        }
    }

    /// `n/p0 < Σ 1/p_i`, required for block spaces.
    pub fn check_strict(&self) -> Result<()> {
        self.check_admissible()?;
        if self.morrey_exponent() < 0.0 {
            Ok(())
        } else {
            Err(Error::NotAdmissible(format!(
                "block spaces need n/p0 < Σ1/p_i, got equality at {}",
                self.inverse_sum()
            )))
        }
    }

    /// Hölder conjugates of every exponent.
    pub fn conjugate(&self) -> Self {
        let c = |p: f64| p / (p - 1.0);
        Self {
            p0: c(self.p0),
            p: self.p.iter().map(|&p| c(p)).collect(),
        }
    }

    pub fn describe(&self) -> String {
        let p: Vec<String> = self.p.iter().map(|v| v.to_string()).collect();
        format!("p0={} p={}", self.p0, p.join(","))
    }
}

/// Checks the hypotheses linking source exponents `p`, target exponents `q`
/// and the order `α` of a fractional integral:
/// `1 < p̄ ≤ q̄ < ∞`, admissibility of both, and
/// `α = n/p0 − n/q0 = Σ1/p_i − Σ1/q_i`.
pub fn check_fractional_relation(p: &ExponentTuple, q: &ExponentTuple, alpha: f64) -> Result<()> {
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::Validation(format!(
            "p has {} components, q has {}",
            n,
            q.dim()
        )));
    }
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(Error::Validation(format!("α = {alpha} must lie in (0, {n})")));
    }
    for (i, (&pi, &qi)) in p.p().iter().zip(q.p()).enumerate() {
        if pi > qi {
            return Err(Error::Validation(format!(
                "p̄ ≤ q̄ fails on axis {}: {pi} > {qi}",
                i + 1
            )));
        }
    }
    p.check_admissible()
        .map_err(|e| Error::Validation(format!("source exponents: {e}")))?;
    q.check_admissible()
        .map_err(|e| Error::Validation(format!("target exponents: {e}")))?;
    let outer = n as f64 / p.p0() - n as f64 / q.p0();
    if (outer - alpha).abs() > RELATION_TOL {
        return Err(Error::Validation(format!(
            "α = n/p0 − n/q0 fails: {alpha} vs {outer}"
        )));
    }
    let inner = p.inverse_sum() - q.inverse_sum();
    if (inner - alpha).abs() > RELATION_TOL {
        return Err(Error::Validation(format!(
            "α = Σ1/p_i − Σ1/q_i fails: {alpha} vs {inner}"
        )));
    }
    Ok(())
}
