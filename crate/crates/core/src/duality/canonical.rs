//! Regrouping a block decomposition onto dyadic cubes.
//!
//! A block on an arbitrary cube `Q′` of side `s′` is assigned to a dyadic cube
//! `Q` of side `σ`, the largest power of two not above `s′`, chosen so that
//! `3Q ⊇ Q′`. Blocks sharing a dyadic cube are merged:
//! `λ_Q = 3^n Σλ_i` and `b_Q = Σλ_i b_i / λ_Q`. Because `|Q′| ≥ |Q|` and the
//! Morrey exponent is in `(−1, 0]`, each merged block satisfies the block
//! bound on `3Q`.

use std::collections::BTreeMap;

use super::{BlockDecomposition, BlockTerm};
use crate::error::{Error, Result};
use crate::grid::{GridCube, GridFunction};
use crate::norms::ExponentTuple;

/// Dyadic cube `Q` with `3Q ⊇ cube` and side the largest power of two `≤ side(cube)`.
pub(crate) fn dyadic_parent(cube: &GridCube, shape: &[usize]) -> GridCube {
    let s = cube.side();
    let sigma = 1usize << (usize::BITS - 1 - s.leading_zeros());
    let start: Vec<usize> = cube
        .start()
        .iter()
        .zip(shape)
        .map(|(&b, &n)| {
            let a = sigma * (b / sigma);
            // [a − σ, a + 2σ) misses the top of Q′ only when b + s′ > a + 2σ,
            // and then a + 2σ < n, so the next dyadic cube fits in the box.
            if b + s <= a + 2 * sigma {
                a
            } else {
                debug_assert!(a + 2 * sigma <= n);
                a + sigma
            }
        })
        .collect();
    GridCube::new(&start, sigma)
}

/// Regroups `d` onto dyadic cubes with blocks supported in `3Q`.
pub fn canonicalize_decomposition(
    d: &BlockDecomposition,
    f: &GridFunction,
    e: &ExponentTuple,
) -> Result<BlockDecomposition> {
    d.verify(f, e)?;
    let g = f.geometry();
    if !g.is_dyadic() {
        return Err(Error::NotPowerOfTwo(g.shape().to_vec()));
    }
    if d.terms.iter().any(|t| t.dilation != 1) {
        return Err(Error::invalid("input blocks must be supported in their own cubes"));
    }
    let three_n = 3f64.powi(g.dim() as i32);
    let mut groups: BTreeMap<GridCube, Vec<&BlockTerm>> = BTreeMap::new();
    for t in &d.terms {
        groups.entry(dyadic_parent(&t.cube, g.shape())).or_default().push(t);
    }
    let terms = groups
        .into_iter()
        .map(|(cube, members)| {
            let mass: f64 = members.iter().map(|t| t.lambda).sum();
            let lambda = three_n * mass;
            let mut block = GridFunction::zeros(g);
            for t in &members {
                for (b, v) in block.values_mut().iter_mut().zip(t.block.values()) {
                    *b += t.lambda * v / lambda;
                }
            }
            BlockTerm {
                cube,
                dilation: 3,
                lambda,
                block,
            }
        })
        .collect();
    Ok(BlockDecomposition::new(terms, d.tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    #[test]
    fn parent_contains_cube_in_its_triple() {
        let n = 32;
        for side in 1..=n {
            for b in 0..=n - side {
                let q = GridCube::new(&[b], side);
                let p = dyadic_parent(&q, &[n]);
                let s = p.side();
                let a = p.start()[0];
                assert!(s <= side && 2 * s > side);
                assert_eq!(a % s, 0);
                assert!(a + s <= n);
                assert!(b + s >= a && b + side <= a + 2 * s, "{q:?} -> {p:?}");
            }
        }
    }

    #[test]
    fn single_dyadic_block_is_a_fixed_point_up_to_three_n() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let e = ExponentTuple::new(4.0, vec![2.0]).unwrap();
        let q = GridCube::new(&[4], 4);
        let vol = q.volume(g.spacing());
        let f = GridFunction::indicator(&g, &q).unwrap();
        let lambda = vol.powf(1.0 - 1.0 / 4.0);
        let d = BlockDecomposition::new(
            vec![BlockTerm {
                cube: q,
                dilation: 1,
                lambda,
                block: f.scale(1.0 / lambda),
            }],
            1e-12,
        );
        let c = canonicalize_decomposition(&d, &f, &e).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert_eq!(c.terms[0].cube, q);
        assert!((c.total_coefficient - 3.0 * lambda).abs() < 1e-12);
        c.verify(&f, &e).unwrap();
    }
}
