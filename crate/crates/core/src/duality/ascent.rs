//! Lower bounds for the block norm: maximize `R(g) = ∫|f g| / ‖g‖_Morrey`.
//!
//! Any `g` gives a valid bound, so the search is free to be heuristic:
//! multi-start from localized copies of `f`, then projected gradient ascent on
//! a softmax-smoothed Morrey norm with an annealed temperature. Only the exact
//! ratio of the best iterate is reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::error::Result;
use crate::grid::{CubeFamily, GridFunction};
use crate::norms::{morrey_norm, pairing, ExponentTuple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentParams {
    /// Gradient steps per start.
    pub iterations: usize,
    /// Localized starting points kept after screening.
    pub starts: usize,
    /// Softmax sharpness at the first and last step (relative to a unit norm).
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for AscentParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            starts: 4,
            beta_start: 20.0,
            beta_end: 2000.0,
        }
    }
}

/// Largest number of cubes screened as starting points.
const SCREEN_CAP: usize = 64;

/// Lower bound on the block norm with a witness of Morrey norm 1.
pub fn dual_norm_lower(
    f: &GridFunction,
    e: &ExponentTuple,
    family: &CubeFamily,
    params: &AscentParams,
) -> Result<(f64, GridFunction)> {
    dual_norm_lower_with_starts(f, e, family, params, &[])
}

/// As [`dual_norm_lower`], with additional starting points (for instance the
/// dual iterate of the splitting solver).
pub fn dual_norm_lower_with_starts(
    f: &GridFunction,
    e: &ExponentTuple,
    family: &CubeFamily,
    params: &AscentParams,
    extra: &[GridFunction],
) -> Result<(f64, GridFunction)> {
    let prob = Problem::new(f, e, family)?;
    if f.is_zero() {
        return Ok((0.0, GridFunction::zeros(f.geometry())));
    }
    let mut starts: Vec<Vec<f64>> = candidates(&prob, params.starts)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    for x in extra {
        f.geometry().ensure_same(x.geometry())?;
        starts.push(x.values().to_vec());
    }
    let (_, g) = improve(&prob, &starts, params)?;
    let g = GridFunction::new(f.geometry().clone(), g)?;
    if g.is_zero() {
        return Ok((0.0, g));
    }
    // Final normalization through the public norm, independent of the solver.
    let m = morrey_norm(&g, e, family)?.value;
    let g = g.scale(1.0 / m);
    Ok((pairing(f, &g, true)?, g))
}

/// Screens localized starts `|f|χ_Q` and `J(|f|χ_Q)`, best first.
pub(crate) fn candidates(prob: &Problem<'_>, keep: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let ncell = prob.fabs.len();
    // ‖fχ_Q‖_{p̄′}/κ_Q bounds the ratio of both starts built on Q.
    let scores: Vec<f64> = (0..prob.len())
        .into_par_iter()
        .map(|q| {
            let local: Vec<f64> = prob.cells[q].iter().map(|&c| prob.fabs[c]).collect();
            prob.conj_norm(q).eval(&local) / prob.kappa[q]
        })
        .collect();
    let mut order: Vec<usize> = (0..prob.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut best = 0.0f64;
    for &q in order.iter().take(SCREEN_CAP) {
        if scores[q] <= best || scores[q] == 0.0 {
            break;
        }
        let local: Vec<f64> = prob.cells[q].iter().map(|&c| prob.fabs[c]).collect();
        let mut j = vec![0.0; local.len()];
        prob.conj_norm(q).duality_map(&local, &mut j);
        for vals in [local, j] {
            let mut g = vec![0.0; ncell];
            for (&c, &v) in prob.cells[q].iter().zip(&vals) {
                g[c] = v;
            }
            let (value, normalized) = prob.lower_bound(&g)?;
            best = best.max(value);
            found.push((value, normalized));
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    found.truncate(keep.max(1));
    Ok(found)
}

/// Runs the ascent from every start; returns the best exact ratio found.
pub(crate) fn improve(prob: &Problem<'_>, starts: &[Vec<f64>], params: &AscentParams) -> Result<(f64, Vec<f64>)> {
    let runs: Vec<Result<(f64, Vec<f64>)>> = starts.par_iter().map(|s| ascend(prob, s, params)).collect();
    let mut best = (0.0, vec![0.0; prob.fabs.len()]);
    for r in runs {
        let (v, g) = r?;
        if v > best.0 {
            best = (v, g);
        }
    }
    Ok(best)
}

struct Smoothed {
    phi: f64,
    exact: f64,
    top: f64,
    m: Vec<f64>,
    pair: f64,
}

fn smoothed(prob: &Problem<'_>, g: &[f64], beta: f64) -> Smoothed {
    let m = prob.weighted_norms(g);
    let top = m.iter().copied().fold(0.0f64, f64::max);
    let pair = prob.hd * prob.fabs.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    if top == 0.0 || pair == 0.0 {
        return Smoothed {
            phi: f64::NEG_INFINITY,
            exact: 0.0,
            top,
            m,
            pair,
        };
    }
    let z: f64 = m.iter().map(|&v| (beta * (v - top) / top).exp()).sum();
    let l = top * (1.0 + z.ln() / beta);
    Smoothed {
        phi: pair.ln() - l.ln(),
        exact: pair / top,
        top,
        m,
        pair,
    }
}

fn ascend(prob: &Problem<'_>, start: &[f64], params: &AscentParams) -> Result<(f64, Vec<f64>)> {
    let ncell = prob.fabs.len();
    let mut g: Vec<f64> = start
        .iter()
        .zip(&prob.fabs)
        .map(|(s, f)| if *f > 0.0 { s.abs() } else { 0.0 })
        .collect();
    let (mut best_value, first) = prob.lower_bound(&g)?;
    if best_value == 0.0 {
        return Ok((0.0, vec![0.0; ncell]));
    }
    g = first;
    let mut best_g = g.clone();
    let iters = params.iterations.max(1);
    let mut step = 0.1;
    for it in 0..params.iterations {
        let frac = if iters > 1 { it as f64 / (iters - 1) as f64 } else { 1.0 };
        let beta = params.beta_start * (params.beta_end / params.beta_start).powf(frac);
        let cur = smoothed(prob, &g, beta);
        if !cur.phi.is_finite() {
            break;
        }
        // ∇Φ = h^d (|f|/P − Σ π_Q κ_Q J(gχ_Q)/L) with softmax weights π.
        let weights: Vec<f64> = cur.m.iter().map(|&v| (beta * (v - cur.top) / cur.top).exp()).collect();
        let z: f64 = weights.iter().sum();
        let l = cur.top * (1.0 + z.ln() / beta);
        let mut grad: Vec<f64> = prob.fabs.iter().map(|f| prob.hd * f / cur.pair).collect();
        for (q, &w) in weights.iter().enumerate() {
            let pi = w / z;
            if pi < 1e-12 {
                continue;
            }
            let local: Vec<f64> = prob.cells[q].iter().map(|&c| g[c]).collect();
            let mut j = vec![0.0; local.len()];
            prob.primal_norm(q).duality_map(&local, &mut j);
            let coef = pi * prob.kappa[q] * prob.hd / l;
            for (&c, &v) in prob.cells[q].iter().zip(&j) {
                grad[c] -= coef * v;
            }
        }
        for (gr, f) in grad.iter_mut().zip(&prob.fabs) {
            if *f == 0.0 {
                *gr = 0.0;
            }
        }
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 || xnorm == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..30 {
            let scale = step * xnorm / gnorm;
            let cand: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| (x + scale * d).max(0.0)).collect();
            let next = smoothed(prob, &cand, beta);
            if next.phi > cur.phi {
                accepted = Some((cand, next));
                step = (step * 1.5).min(1.0);
                break;
            }
            step *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            if step < 1e-12 {
                break;
            }
            continue;
        };
        g = cand.iter().map(|v| v / next.top).collect();
        if next.exact > best_value {
            best_value = next.exact;
            best_g = g.clone();
        }
    }
    // Recompute the reported ratio exactly from the kept iterate.
    prob.lower_bound(&best_g)
}
