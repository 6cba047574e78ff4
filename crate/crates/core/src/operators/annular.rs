//! Slicing the maximal function of a block over dyadic annuli around its cube.

use serde::{Deserialize, Serialize};

use super::maximal::{maximal, MaximalMethod};
use crate::error::{Error, Result};
use crate::grid::{CubeFamily, GridCube, GridFunction};
use crate::norms::{mixed_norm, ExponentTuple};

/// One annulus `Q_{k+1} ∖ Q_k` (or `Q_1` for `k = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnularPiece {
    pub k: usize,
    /// Clipped extent of `Q_{k+1}`: `[lo, hi)` cells per axis.
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    /// `‖m_k‖_{L^p̄′}`.
    pub norm: f64,
    /// `‖m_k‖_{L^p̄′}·|Q_{k+1}|^{−e}` with the unclipped volume.
    pub normalized: f64,
    /// The decay profile `2^{−nk/p0}`.
    pub reference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnularDecomposition {
    pub base: GridCube,
    pub pieces: Vec<AnnularPiece>,
    /// Least-squares slope of `log2(normalized)` against `k ≥ 1`, when defined.
    pub decay_exponent: Option<f64>,
    /// `−n/p0`, the slope the normalized tail must at least match.
    pub reference_exponent: f64,
    #[serde(skip)]
    pub maximal: GridFunction,
    #[serde(skip)]
    pub parts: Vec<GridFunction>,
}

impl AnnularDecomposition {
    /// Largest `normalized_k / 2^{−nk/p0}`.
    pub fn worst_ratio(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.normalized / p.reference)
            .fold(0.0, f64::max)
    }

    /// `Σ_k m_k`, which reproduces the maximal function.
    pub fn reassemble(&self) -> GridFunction {
        let mut out = GridFunction::zeros(self.maximal.geometry());
        for p in &self.parts {
            for (o, v) in out.values_mut().iter_mut().zip(p.values()) {
                *o += v;
            }
        }
        out
    }
}

/// `[lo, hi)` per axis of the cube with the same center as `q` and `scale`
/// times its side, clipped to the box.
fn dilated_extent(q: &GridCube, scale: usize, shape: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let s = q.side();
    let pad = ((scale - 1) * s / 2) as isize;
    let side = (scale * s) as isize;
    q.start()
        .iter()
        .zip(shape)
        .map(|(&a, &n)| {
            let lo = a as isize - pad;
            let hi = lo + side;
            (lo.max(0) as usize, hi.min(n as isize) as usize)
        })
        .unzip()
}

/// Checks that `b` is a block on `q` for the conjugate of `e`.
pub fn check_block(b: &GridFunction, q: &GridCube, e: &ExponentTuple) -> Result<()> {
    let g = b.geometry();
    q.check_inside(g)?;
    if let Some(i) = (0..g.len()).find(|&i| b.values()[i] != 0.0 && !q.contains_coords(&g.coords(i)[..g.dim()])) {
        return Err(Error::NotABlock(format!(
            "nonzero at cell {:?} outside {:?}",
            &g.coords(i)[..g.dim()],
            q
        )));
    }
    let bound = e.kappa(q.volume(g.spacing()));
    let norm = mixed_norm(b, e.conjugate().p())?;
    if norm > bound * (1.0 + 1e-9) {
        return Err(Error::NotABlock(format!(
            "‖b‖ = {norm} exceeds |Q|^e = {bound}"
        )));
    }
    Ok(())
}

/// `Mb = Σ_k m_k` with `m_0 = χ_{Q_1}Mb` and `m_k = χ_{Q_{k+1}∖Q_k}Mb`,
/// `Q_k` the cube of side `2^k` times that of `q`, same center.
pub fn maximal_block_image(
    b: &GridFunction,
    q: &GridCube,
    e: &ExponentTuple,
    family: &CubeFamily,
) -> Result<AnnularDecomposition> {
    check_block(b, q, e)?;
    let g = b.geometry();
    let dim = g.dim();
    let mb = maximal(b, family, MaximalMethod::SummedArea)?;
    let pc = e.conjugate();
    let expo = e.morrey_exponent();
    let mut pieces = Vec::new();
    let mut parts = Vec::new();
    let mut inner: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut k = 0;
    loop {
        let (lo, hi) = dilated_extent(q, 1 << (k + 1), g.shape());
        let covered = lo.iter().all(|&l| l == 0) && hi.iter().zip(g.shape()).all(|(h, n)| h == n);
        let mut part = GridFunction::zeros(g);
        for i in 0..g.len() {
            let c = g.coords(i);
            let in_outer = (0..dim).all(|k| c[k] >= lo[k] && c[k] < hi[k]);
            let in_inner = inner
                .as_ref()
                .is_some_and(|(l, h)| (0..dim).all(|k| c[k] >= l[k] && c[k] < h[k]));
            if in_outer && !in_inner {
                part.values_mut()[i] = mb.values()[i];
            }
        }
        let norm = mixed_norm(&part, pc.p())?;
        let side = (q.side() << (k + 1)) as f64 * g.spacing();
        let volume = side.powi(dim as i32);
        pieces.push(AnnularPiece {
            k,
            lo: lo.clone(),
            hi: hi.clone(),
            norm,
            normalized: norm * volume.powf(-expo),
            reference: 2f64.powf(-(dim as f64) * k as f64 / e.p0()),
        });
        parts.push(part);
        if covered {
            break;
        }
        inner = Some((lo, hi));
        k += 1;
    }
    let tail: Vec<(f64, f64)> = pieces
        .iter()
        .filter(|p| p.k >= 1 && p.normalized > 0.0)
        .map(|p| (p.k as f64, p.normalized.log2()))
        .collect();
    let decay_exponent = (tail.len() >= 2).then(|| {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|t| t.0).sum::<f64>() / n;
        let my = tail.iter().map(|t| t.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|t| (t.0 - mx) * (t.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|t| (t.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(AnnularDecomposition {
        base: *q,
        pieces,
        decay_exponent,
        reference_exponent: -(dim as f64) / e.p0(),
        maximal: mb,
        parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{enumerate_cubes, FamilyKind, Geometry};

    #[test]
    fn annuli_partition_the_maximal_function() {
        let g = Geometry::unit_box(1, 64).unwrap();
        let e = ExponentTuple::new(4.0, vec![2.0]).unwrap();
        let q = GridCube::new(&[20], 4);
        let kappa = e.kappa(q.volume(g.spacing()));
        let chi = GridFunction::indicator(&g, &q).unwrap();
        let b = chi.scale(kappa / mixed_norm(&chi, e.conjugate().p()).unwrap());
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        let d = maximal_block_image(&b, &q, &e, &fam).unwrap();
        assert_eq!(d.reassemble().values(), d.maximal.values());
        assert!(d.pieces.len() >= 4);
    }

    #[test]
    fn oversized_function_is_not_a_block() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let e = ExponentTuple::new(4.0, vec![2.0]).unwrap();
        let q = GridCube::new(&[0], 4);
        let b = GridFunction::indicator(&g, &q).unwrap().scale(100.0);
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        assert!(matches!(maximal_block_image(&b, &q, &e, &fam), Err(Error::NotABlock(_))));
    }
}
