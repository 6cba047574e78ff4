//! Consensus ADMM for the block norm.
//!
//! Every cube `Q` owns a copy `u_Q` of its piece; the consensus variable `z`
//! lives in the affine set `{Σ_Q z_Q = f}`. The scaled dual variable is the
//! same for every cube containing a cell, so it is stored once per cell, and
//! `−ρ·y/h^d` is a dual witness `g` for the Morrey side at every iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ascent::{self, AscentParams};
use super::polish::polish;
use super::{BlockDecomposition, Problem, TracePoint, DEFAULT_TOLERANCE};
use crate::error::Result;
use crate::grid::{CubeFamily, GridFunction};
use crate::norms::ExponentTuple;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iters: usize,
    /// Relative primal residual and per-iteration objective change at which
    /// the splitting iteration counts as converged.
    pub tol: f64,
    /// Stop as soon as the certified relative gap falls below this.
    pub gap_tol: f64,
    /// Iterations between certification checkpoints.
    pub check_every: usize,
    /// Rebuild the primal from the best witness's active cubes at checkpoints.
    pub polish: bool,
    pub ascent: AscentParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iters: 3000,
            tol: DEFAULT_TOLERANCE,
            gap_tol: 1e-6,
            check_every: 25,
            polish: true,
            ascent: AscentParams::default(),
        }
    }
}

impl SolverParams {
    /// Long-run settings used as a reference solution.
    pub fn oracle() -> Self {
        Self {
            max_iters: 50_000,
            tol: 1e-10,
            gap_tol: 1e-9,
            check_every: 25,
            polish: true,
            ascent: AscentParams {
                iterations: 600,
                ..AscentParams::default()
            },
        }
    }
}

/// Certified result of a block-norm solve.
#[derive(Clone, Debug)]
pub struct BlockSolution {
    /// Value of an exactly feasible decomposition.
    pub upper: f64,
    /// `∫|f g|` for the witness, which has Morrey norm 1.
    pub lower: f64,
    pub decomposition: BlockDecomposition,
    pub witness: GridFunction,
    pub iterations: usize,
    /// Relative consensus residual of the last splitting iterate.
    pub primal_residual: f64,
    /// Whether the splitting iteration met its stopping rule (the bounds are
    /// certified either way).
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Upper bound on the block norm with its decomposition.
pub fn block_norm_upper(
    f: &GridFunction,
    e: &ExponentTuple,
    family: &CubeFamily,
    params: &SolverParams,
) -> Result<(f64, BlockDecomposition)> {
    let sol = solve_block_norm(f, e, family, params)?;
    Ok((sol.upper, sol.decomposition))
}

struct Best {
    upper: f64,
    u: Vec<Vec<f64>>,
    lower: f64,
    witness: Vec<f64>,
}

impl Best {
    fn offer_upper(&mut self, value: f64, u: Vec<Vec<f64>>) {
        if value < self.upper {
            self.upper = value;
            self.u = u;
        }
    }

    fn offer_lower(&mut self, value: f64, witness: Vec<f64>) -> bool {
        if value > self.lower {
            self.lower = value;
            self.witness = witness;
            true
        } else {
            false
        }
    }

    fn relative_gap(&self) -> f64 {
        if self.upper > 0.0 {
            (self.upper - self.lower) / self.upper
        } else {
            0.0
        }
    }
}

/// Full solve: splitting iterations, witness ascent and polishing.
pub fn solve_block_norm(
    f: &GridFunction,
    e: &ExponentTuple,
    family: &CubeFamily,
    params: &SolverParams,
) -> Result<BlockSolution> {
    e.check_strict()?;
    let prob = Problem::new(f, e, family)?;
    if f.is_zero() {
        return Ok(BlockSolution {
            upper: 0.0,
            lower: 0.0,
            decomposition: BlockDecomposition::empty(),
            witness: GridFunction::zeros(f.geometry()),
            iterations: 0,
            primal_residual: 0.0,
            converged: true,
            trace: Vec::new(),
        });
    }
    let ncell = f.values().len();
    let nq = prob.len();

    // Start: f shared equally among the cubes containing each cell.
    let mut u: Vec<Vec<f64>> = prob
        .cells
        .iter()
        .map(|cs| {
            cs.iter()
                .map(|&c| if prob.count[c] > 0.0 { f.values()[c] / prob.count[c] } else { 0.0 })
                .collect()
        })
        .collect();
    let mut best = Best {
        upper: f64::INFINITY,
        u: u.clone(),
        lower: 0.0,
        witness: vec![0.0; ncell],
    };
    let mut repaired = u.clone();
    let v0 = prob.repair(&mut repaired);
    best.offer_upper(v0, repaired);

    for (value, g) in ascent::candidates(&prob, params.ascent.starts)? {
        best.offer_lower(value, g);
    }
    let mut trace = Vec::new();
    if params.polish {
        if let Some((value, up)) = polish(&prob, &best.witness) {
            best.offer_upper(value, up);
        }
    }
    trace.push(TracePoint {
        iteration: 0,
        lower: best.lower,
        upper: best.upper,
    });

    let fnorm2: f64 = f.values().iter().map(|v| v * v).sum();
    let copies2: f64 = u.iter().flatten().map(|v| v * v).sum();
    let mut rho = (prob.objective(&u) / copies2.max(f64::MIN_POSITIVE)).max(f64::MIN_POSITIVE);
    let mut z = u.clone();
    let mut y = vec![0.0; ncell];
    let mut obj_prev = f64::INFINITY;
    let mut iterations = 0;
    let mut primal_residual = f64::INFINITY;
    let mut converged = best.relative_gap() <= params.gap_tol;
    let check_every = params.check_every.max(1);

    let mut it = 0;
    while !converged && it < params.max_iters {
        it += 1;
        // u-step: independent proxes, one per cube.
        u.par_iter_mut().enumerate().for_each(|(q, uq)| {
            let v: Vec<f64> = prob.cells[q]
                .iter()
                .zip(&z[q])
                .map(|(&c, &zq)| zq - y[c])
                .collect();
            prob.conj_norm(q).prox_conjugate(&v, uq, 1.0 / (prob.kappa[q] * rho));
        });
        // z-step: project u + y onto Σ z_Q = f; y becomes the uniform correction.
        let mut sum = vec![0.0; ncell];
        for (cs, uq) in prob.cells.iter().zip(&u) {
            for (&c, &v) in cs.iter().zip(uq) {
                sum[c] += v;
            }
        }
        let mut y_new = vec![0.0; ncell];
        let mut r2 = 0.0;
        for c in 0..ncell {
            if prob.count[c] > 0.0 {
                let delta = (f.values()[c] - sum[c] - prob.count[c] * y[c]) / prob.count[c];
                y_new[c] = -delta;
                r2 += prob.count[c] * (y_new[c] - y[c]).powi(2);
            }
        }
        let mut s2 = 0.0;
        for q in 0..nq {
            for ((&c, zq), &uq) in prob.cells[q].iter().zip(z[q].iter_mut()).zip(&u[q]) {
                let next = uq + y[c] - y_new[c];
                s2 += (next - *zq).powi(2);
                *zq = next;
            }
        }
        y = y_new;
        iterations = it;
        primal_residual = (r2 / fnorm2).sqrt();
        let obj = prob.objective(&u);
        let settled = primal_residual <= params.tol && (obj_prev - obj).abs() <= params.tol * obj;
        obj_prev = obj;

        // Residual balancing keeps ρ·y, the unscaled multiplier, fixed.
        if it % 10 == 0 {
            let r = r2.sqrt();
            let s = rho * s2.sqrt();
            let factor = if r > 10.0 * s {
                2.0
            } else if s > 10.0 * r {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                y.iter_mut().for_each(|v| *v /= factor);
            }
        }

        if it % check_every == 0 || settled || it == params.max_iters {
            let mut cand = u.clone();
            let value = prob.repair(&mut cand);
            best.offer_upper(value, cand);
            let g: Vec<f64> = y.iter().map(|v| -rho * v / prob.hd).collect();
            let (lower, witness) = prob.lower_bound(&g)?;
            let improved = best.offer_lower(lower, witness);
            if params.polish && improved {
                if let Some((value, up)) = polish(&prob, &best.witness) {
                    best.offer_upper(value, up);
                }
            }
            trace.push(TracePoint {
                iteration: it,
                lower: best.lower,
                upper: best.upper,
            });
            if settled || best.relative_gap() <= params.gap_tol {
                converged = true;
            }
        }
    }

    // Final ascent from the best witnesses, then one more polish.
    if best.relative_gap() > params.gap_tol {
        let dual: Vec<f64> = y.iter().map(|v| -rho * v / prob.hd).collect();
        let (lower, witness) = ascent::improve(&prob, &[best.witness.clone(), dual], &params.ascent)?;
        if best.offer_lower(lower, witness) && params.polish {
            if let Some((value, up)) = polish(&prob, &best.witness) {
                best.offer_upper(value, up);
            }
        }
        trace.push(TracePoint {
            iteration: iterations,
            lower: best.lower,
            upper: best.upper,
        });
        if best.relative_gap() <= params.gap_tol {
            converged = true;
        }
    }

    let decomposition = prob.decomposition(&best.u, DEFAULT_TOLERANCE.max(params.tol));
    let witness = GridFunction::new(f.geometry().clone(), best.witness)?;
    Ok(BlockSolution {
        upper: decomposition.total_coefficient,
        lower: best.lower,
        decomposition,
        witness,
        iterations,
        primal_residual: if iterations == 0 { 0.0 } else { primal_residual },
        converged,
        trace,
    })
}
