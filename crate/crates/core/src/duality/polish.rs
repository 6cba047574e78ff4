//! Primal recovery from a dual witness.
//!
//! At an optimal pair `(u, g)` every nonzero piece sits on a cube where the
//! witness attains its Morrey norm, and points along the duality map of `g`
//! there. Given a (near-)optimal `g` the primal is therefore a non-negative
//! combination of the atoms `κ_Q·J(g χ_Q)` over the active cubes, found by
//! non-negative least squares and made exactly feasible by the usual repair.

use std::collections::BTreeMap;

use super::nnls::nnls;
use super::Problem;

const ACTIVE_SLACK: [f64; 4] = [1e-6, 1e-4, 1e-3, 1e-2];

/// Best certified value over a few active-set thresholds, with its pieces.
pub(crate) fn polish(prob: &Problem<'_>, witness: &[f64]) -> Option<(f64, Vec<Vec<f64>>)> {
    // Align the witness with the sign of f: only |g| matters for the bound.
    let g: Vec<f64> = witness
        .iter()
        .zip(prob.f.values())
        .map(|(w, f)| if *f < 0.0 { -w.abs() } else { w.abs() })
        .collect();
    let m = prob.weighted_norms(&g);
    let top = m.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return None;
    }
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut last_count = 0;
    for slack in ACTIVE_SLACK {
        let active: Vec<usize> = (0..prob.len()).filter(|&q| m[q] >= (1.0 - slack) * top).collect();
        if active.len() == last_count {
            continue;
        }
        last_count = active.len();
        // Rows: cells covered by some active cube.
        let mut rows = BTreeMap::new();
        for &q in &active {
            for &c in &prob.cells[q] {
                let n = rows.len();
                rows.entry(c).or_insert(n);
            }
        }
        let mut atoms = Vec::with_capacity(active.len());
        let mut columns = Vec::with_capacity(active.len());
        for &q in &active {
            let local: Vec<f64> = prob.cells[q].iter().map(|&c| g[c]).collect();
            let mut j = vec![0.0; local.len()];
            prob.primal_norm(q).duality_map(&local, &mut j);
            j.iter_mut().for_each(|v| *v *= prob.kappa[q]);
            let mut col = vec![0.0; rows.len()];
            for (&c, &v) in prob.cells[q].iter().zip(&j) {
                col[rows[&c]] = v;
            }
            columns.push(col);
            atoms.push(j);
        }
        let mut rhs = vec![0.0; rows.len()];
        for (&c, &r) in &rows {
            rhs[r] = prob.f.values()[c];
        }
        let lambda = nnls(&columns, &rhs);
        let mut u: Vec<Vec<f64>> = prob.cells.iter().map(|c| vec![0.0; c.len()]).collect();
        for ((&q, atom), &l) in active.iter().zip(&atoms).zip(&lambda) {
            if l > 0.0 {
                u[q] = atom.iter().map(|v| l * v).collect();
            }
        }
        let value = prob.repair(&mut u);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, u));
        }
    }
    best
}
