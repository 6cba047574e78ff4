//! Block norms as convex decompositions, the Köthe dual norm of the Morrey
//! norm as a pairing ascent, and certificates tying the two together.
//!
//! On a grid with a fixed cube family `F` the block norm is the finite convex
//! program
//!
//! ```text
//! min Σ_Q |Q|^{-e} ‖f_Q‖_{p̄′}   subject to  Σ_Q f_Q = f,  supp f_Q ⊂ Q ∈ F
//! ```
//!
//! whose Lagrange dual is `max ∫ f g` over `‖g‖_Morrey ≤ 1` with the Morrey
//! supremum over the same family. Every upper bound reported here comes from
//! an explicit feasible decomposition and every lower bound from an explicit
//! witness `g`, both re-evaluated from scratch.

mod admm;
mod ascent;
mod canonical;
mod nnls;
mod polish;

pub use admm::{block_norm_upper, solve_block_norm, BlockSolution, SolverParams};
pub use ascent::{dual_norm_lower, dual_norm_lower_with_starts, AscentParams};
pub use canonical::canonicalize_decomposition;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CubeFamily, FamilyKind, GridCube, GridFunction};
use crate::norms::iterated::MixedNorm;
use crate::norms::{mixed_norm, pairing, weighted_cube_norms, ExponentTuple};

/// One term `λ·b` of a block decomposition. The block `b` is supported in the
/// cube `dilation·Q` (same center) intersected with the grid box.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTerm {
    pub cube: GridCube,
    pub dilation: usize,
    pub lambda: f64,
    pub block: GridFunction,
}

impl BlockTerm {
    /// Volume of the support cube `dilation·Q`, unclipped.
    pub fn support_volume(&self, spacing: f64) -> f64 {
        let side = (self.dilation * self.cube.side()) as f64 * spacing;
        side.powi(self.cube.dim() as i32)
    }

    /// Whether a cell lies in `dilation·Q`.
    pub fn support_contains(&self, coords: &[usize]) -> bool {
        let s = self.cube.side() as isize;
        let pad = (self.dilation as isize - 1) / 2 * s;
        self.cube.start().iter().zip(coords).all(|(&a, &c)| {
            let (a, c) = (a as isize, c as isize);
            c >= a - pad && c < a + s + pad
        })
    }
}

/// `f = Σ λ_i b_i` with `λ_i ≥ 0` and each `b_i` a block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub terms: Vec<BlockTerm>,
    pub total_coefficient: f64,
    /// Relative slack accepted by [`BlockDecomposition::verify`].
    pub tolerance: f64,
}

/// Outcome of re-checking a decomposition against its function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    /// Largest `‖b‖_{p̄′} / |dilation·Q|^e` over the terms (at most `1 + τ`).
    pub max_block_ratio: f64,
    /// `‖f − Σλb‖_{p̄′} / ‖f‖_{p̄′}`.
    pub reconstruction_residual: f64,
    pub total_coefficient: f64,
}

/// Default relative feasibility tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

impl BlockDecomposition {
    pub fn new(terms: Vec<BlockTerm>, tolerance: f64) -> Self {
        let total_coefficient = terms.iter().map(|t| t.lambda).sum();
        Self {
            terms,
            total_coefficient,
            tolerance,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), DEFAULT_TOLERANCE)
    }

    /// `Σ λ_i b_i` on the grid of `like`.
    pub fn reconstruct(&self, like: &GridFunction) -> GridFunction {
        let mut out = GridFunction::zeros(like.geometry());
        for t in &self.terms {
            for (o, b) in out.values_mut().iter_mut().zip(t.block.values()) {
                *o += t.lambda * b;
            }
        }
        out
    }

    /// Re-checks supports, block bounds and reconstruction from scratch.
    pub fn verify(&self, f: &GridFunction, e: &ExponentTuple) -> Result<DecompositionCheck> {
        let g = f.geometry();
        let pc = e.conjugate();
        let mut max_ratio: f64 = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            g.ensure_same(t.block.geometry())?;
            if !(t.lambda >= 0.0) {
                return Err(Error::Infeasible(format!("term {k} has λ = {}", t.lambda)));
            }
            if let Some(i) = (0..g.len())
                .find(|&i| t.block.values()[i] != 0.0 && !t.support_contains(&g.coords(i)[..g.dim()]))
            {
                return Err(Error::Infeasible(format!(
                    "term {k} is nonzero at cell {:?} outside {:?}",
                    &g.coords(i)[..g.dim()],
                    t.cube
                )));
            }
            let bound = e.kappa(t.support_volume(g.spacing()));
            let ratio = mixed_norm(&t.block, pc.p())? / bound;
            if ratio > 1.0 + self.tolerance {
                return Err(Error::Infeasible(format!(
                    "term {k} on {:?} violates the block bound by a factor {ratio}",
                    t.cube
                )));
            }
            max_ratio = max_ratio.max(ratio);
        }
        let fnorm = mixed_norm(f, pc.p())?;
        let resid = mixed_norm(&f.sub(&self.reconstruct(f))?, pc.p())?;
        let rel = if fnorm > 0.0 { resid / fnorm } else { resid };
        if rel > self.tolerance {
            return Err(Error::Infeasible(format!(
                "reconstruction residual {rel:.3e} exceeds {:.3e}",
                self.tolerance
            )));
        }
        Ok(DecompositionCheck {
            max_block_ratio: max_ratio,
            reconstruction_residual: rel,
            total_coefficient: self.total_coefficient,
        })
    }
}

/// One checkpoint of the solver: best certified bounds so far.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Both sides of the duality with their witnesses and diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub weak_duality_holds: bool,
    pub family: FamilyKind,
    pub exponents: ExponentTuple,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub reconstruction_residual: f64,
    pub max_block_ratio: f64,
    pub witness_morrey_norm: f64,
    pub terms: Vec<TermSummary>,
    pub trace: Vec<TracePoint>,
    #[serde(skip)]
    pub witness_g: GridFunction,
    #[serde(skip)]
    pub decomposition: BlockDecomposition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub cube: GridCube,
    pub dilation: usize,
    pub lambda: f64,
}

/// Solves both sides and certifies them against each other.
pub fn duality_gap(
    f: &GridFunction,
    e: &ExponentTuple,
    family: &CubeFamily,
    params: &SolverParams,
) -> Result<DualityReport> {
    let sol = solve_block_norm(f, e, family, params)?;
    let check = sol.decomposition.verify(f, e)?;
    let witness_morrey = if sol.witness.is_zero() {
        0.0
    } else {
        crate::norms::morrey_norm(&sol.witness, e, family)?.value
    };
    let lower = sol.lower;
    let upper = check.total_coefficient;
    let gap = upper - lower;
    let scale = upper.abs().max(lower.abs());
    Ok(DualityReport {
        lower,
        upper,
        gap,
        relative_gap: if scale > 0.0 { gap / scale } else { 0.0 },
        weak_duality_holds: lower <= upper + 1e-9 * upper.max(1.0),
        family: family.kind(),
        exponents: e.clone(),
        iterations: sol.iterations,
        converged: sol.converged,
        primal_residual: sol.primal_residual,
        reconstruction_residual: check.reconstruction_residual,
        max_block_ratio: check.max_block_ratio,
        witness_morrey_norm: witness_morrey,
        terms: sol
            .decomposition
            .terms
            .iter()
            .map(|t| TermSummary {
                cube: t.cube,
                dilation: t.dilation,
                lambda: t.lambda,
            })
            .collect(),
        trace: sol.trace,
        witness_g: sol.witness,
        decomposition: sol.decomposition,
    })
}

/// `min(f, k)·χ_{Q_k}` for `f ≥ 0`.
pub fn truncate(f: &GridFunction, k: f64, cube: &GridCube) -> Result<GridFunction> {
    if !(k >= 0.0) {
        return Err(Error::invalid(format!("truncation level must be ≥ 0, got {k}")));
    }
    if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
        return Err(Error::invalid(format!("negative f at cell {i}")));
    }
    let masked = crate::grid::restrict(f, cube)?;
    Ok(masked.map(|v| v.min(k)))
}

/// `K` truncations `f_j = min(f, j·max f/K)·χ_{Q_j}` with centered nested
/// cubes `Q_j` of side `⌈N·j/K⌉`; the last one is `f` itself.
pub fn truncation_sequence(f: &GridFunction, steps: usize) -> Result<Vec<GridFunction>> {
    let g = f.geometry();
    let whole = g
        .whole_cube()
        .ok_or_else(|| Error::invalid("truncation sequences need a cubic grid box"))?;
    if steps == 0 {
        return Err(Error::invalid("need at least one truncation step"));
    }
    let n = whole.side();
    let top = f.max_abs();
    (1..=steps)
        .map(|j| {
            let side = (n * j).div_ceil(steps).max(1);
            let start = (n - side) / 2;
            let cube = GridCube::new(&vec![start; g.dim()], side);
            truncate(f, top * j as f64 / steps as f64, &cube)
        })
        .collect()
}

/// Precomputed per-cube data shared by the solvers.
pub(crate) struct Problem<'a> {
    pub f: &'a GridFunction,
    pub e: &'a ExponentTuple,
    pub family: &'a CubeFamily,
    pub p: Vec<f64>,
    pub pc: Vec<f64>,
    pub h: f64,
    pub hd: f64,
    /// Global cell indices of each cube, axis `x1` fastest.
    pub cells: Vec<Vec<usize>>,
    pub ext: Vec<Vec<usize>>,
    pub kappa: Vec<f64>,
    /// Number of family members containing each cell.
    pub count: Vec<f64>,
    /// Smallest member containing each cell, with the cell's local index.
    pub home: Vec<Option<(usize, usize)>>,
    pub fabs: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(f: &'a GridFunction, e: &'a ExponentTuple, family: &'a CubeFamily) -> Result<Self> {
        if e.dim() != f.dim() {
            return Err(Error::InvalidExponent(format!(
                "{} exponents for a {}-dimensional grid",
                e.dim(),
                f.dim()
            )));
        }
        e.check_admissible()?;
        if family.is_empty() {
            return Err(Error::FamilyCoverage("anything: the family is empty".into()));
        }
        let g = f.geometry();
        for q in family.cubes() {
            q.check_inside(g)?;
        }
        family.check_covers(g, |i| f.values()[i] != 0.0)?;
        let h = g.spacing();
        let cells: Vec<Vec<usize>> = family.cubes().iter().map(|q| q.local_order(g)).collect();
        let ext = family.cubes().iter().map(|q| vec![q.side(); q.dim()]).collect();
        let kappa = family.cubes().iter().map(|q| e.kappa(q.volume(h))).collect();
        let mut count = vec![0.0; g.len()];
        let mut home = vec![None; g.len()];
        for (qi, cs) in cells.iter().enumerate() {
            for (l, &c) in cs.iter().enumerate() {
                count[c] += 1.0;
                if home[c].is_none() {
                    home[c] = Some((qi, l));
                }
            }
        }
        Ok(Self {
            f,
            e,
            family,
            p: e.p().to_vec(),
            pc: e.conjugate().p().to_vec(),
            h,
            hd: g.cell_volume(),
            cells,
            ext,
            kappa,
            count,
            home,
            fabs: f.values().iter().map(|v| v.abs()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn primal_norm(&self, q: usize) -> MixedNorm<'_> {
        MixedNorm {
            ext: &self.ext[q],
            p: &self.p,
            h: self.h,
        }
    }

    pub fn conj_norm(&self, q: usize) -> MixedNorm<'_> {
        MixedNorm {
            ext: &self.ext[q],
            p: &self.pc,
            h: self.h,
        }
    }

    /// `Σ_Q κ_Q^{-1}‖u_Q‖_{p̄′}`.
    pub fn objective(&self, u: &[Vec<f64>]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(q, uq)| {
                if uq.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    self.conj_norm(q).eval(uq) / self.kappa[q]
                }
            })
            .sum()
    }

    /// Moves the reconstruction residual `f − Σ u_Q` into the smallest cube
    /// containing each cell, making `u` exactly feasible, and returns the
    /// objective of the repaired point.
    pub fn repair(&self, u: &mut [Vec<f64>]) -> f64 {
        let mut sum = vec![0.0; self.f.values().len()];
        for (cs, uq) in self.cells.iter().zip(u.iter()) {
            for (&c, &v) in cs.iter().zip(uq) {
                sum[c] += v;
            }
        }
        for (c, (&fc, &s)) in self.f.values().iter().zip(&sum).enumerate() {
            let r = fc - s;
            if r != 0.0 {
                if let Some((q, l)) = self.home[c] {
                    u[q][l] += r;
                }
            }
        }
        self.objective(u)
    }

    /// Exact lower bound `∫|f g| / ‖g‖_Morrey` and the normalized witness.
    pub fn lower_bound(&self, g: &[f64]) -> Result<(f64, Vec<f64>)> {
        let gf = GridFunction::new(self.f.geometry().clone(), g.to_vec())?;
        let m = weighted_cube_norms(&gf, self.e, self.family)?
            .into_iter()
            .fold(0.0f64, f64::max);
        if m == 0.0 {
            return Ok((0.0, vec![0.0; g.len()]));
        }
        let normalized = gf.scale(1.0 / m);
        let value = pairing(self.f, &normalized, true)?;
        Ok((value, normalized.into_values()))
    }

    /// `κ_Q‖g χ_Q‖_{p̄}` for every member, from a cell vector.
    pub fn weighted_norms(&self, g: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|q| {
                let buf: Vec<f64> = self.cells[q].iter().map(|&c| g[c]).collect();
                self.kappa[q] * self.primal_norm(q).eval(&buf)
            })
            .collect()
    }

    /// Turns per-cube pieces into a decomposition: `λ = κ^{-1}‖u_Q‖`, `b = u_Q/λ`.
    pub fn decomposition(&self, u: &[Vec<f64>], tolerance: f64) -> BlockDecomposition {
        let g = self.f.geometry();
        let mut terms = Vec::new();
        for (q, uq) in u.iter().enumerate() {
            if uq.iter().all(|&v| v == 0.0) {
                continue;
            }
            let lambda = self.conj_norm(q).eval(uq) / self.kappa[q];
            let mut block = GridFunction::zeros(g);
            for (&c, &v) in self.cells[q].iter().zip(uq) {
                block.values_mut()[c] = v / lambda;
            }
            terms.push(BlockTerm {
                cube: self.family.cubes()[q],
                dilation: 1,
                lambda,
                block,
            });
        }
        BlockDecomposition::new(terms, tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{enumerate_cubes, Geometry};

    #[test]
    fn truncation_basics() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0] * 3.0).unwrap();
        let whole = g.whole_cube().unwrap();
        assert_eq!(truncate(&f, 10.0, &whole).unwrap(), f);
        assert!(truncate(&f, 0.0, &whole).unwrap().is_zero());
        assert!(truncate(&f.scale(-1.0), 1.0, &whole).is_err());
        let seq = truncation_sequence(&f, 4).unwrap();
        assert_eq!(seq.last().unwrap(), &f);
        for w in seq.windows(2) {
            assert!(w[0].values().iter().zip(w[1].values()).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn support_of_dilated_cube() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let t = BlockTerm {
            cube: GridCube::new(&[4], 4),
            dilation: 3,
            lambda: 1.0,
            block: GridFunction::zeros(&g),
        };
        assert!(t.support_contains(&[0]));
        assert!(t.support_contains(&[11]));
        assert!(!t.support_contains(&[12]));
    }

    #[test]
    fn repair_makes_pieces_feasible() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| (5.0 * x[0]).cos()).unwrap();
        let e = ExponentTuple::new(3.0, vec![2.0]).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::Dyadic).unwrap();
        let prob = Problem::new(&f, &e, &fam).unwrap();
        let mut u: Vec<Vec<f64>> = prob.cells.iter().map(|c| vec![0.0; c.len()]).collect();
        let value = prob.repair(&mut u);
        let d = prob.decomposition(&u, 1e-12);
        assert!((d.total_coefficient - value).abs() < 1e-12);
        let check = d.verify(&f, &e).unwrap();
        assert!(check.reconstruction_residual < 1e-14);
        assert!(check.max_block_ratio <= 1.0 + 1e-12);
    }
}
