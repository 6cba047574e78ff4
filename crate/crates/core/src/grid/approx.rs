use serde::{Deserialize, Serialize};

use super::{enumerate_cubes, FamilyKind, GridCube, GridFunction};
use crate::error::{Error, Result};
use crate::norms::mixed_norm;

/// Significant decimal digits kept in each coefficient.
pub const COEFFICIENT_DIGITS: usize = 12;

/// `Σ c_i χ_{Q_i}` over dyadic cubes of a single side, with decimal-rounded
/// coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleApproximation {
    pub terms: Vec<(f64, GridCube)>,
    /// Side (in cells) of the dyadic level used.
    pub side: usize,
    /// `‖f − Σ c_i χ_{Q_i}‖` in the requested mixed norm.
    pub error: f64,
}

impl SimpleApproximation {
    pub fn to_function(&self, like: &GridFunction) -> GridFunction {
        let g = like.geometry();
        let mut out = GridFunction::zeros(g);
        for (c, q) in &self.terms {
            for i in q.cells(g) {
                out.values_mut()[i] = *c;
            }
        }
        out
    }
}

fn round_significant(v: f64) -> f64 {
    format!("{:.*e}", COEFFICIENT_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Approximates `f` by a dyadic step function, trying levels from the coarsest
/// down and stopping at the first whose mixed-norm error is below `eps`.
///
/// With `eps = 0` the unit-cell level is returned as long as its error is pure
/// coefficient rounding.
pub fn simple_approximate(f: &GridFunction, eps: f64, p: &[f64]) -> Result<SimpleApproximation> {
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be non-negative, got {eps}")));
    }
    let g = f.geometry();
    let family = enumerate_cubes(g, FamilyKind::Dyadic)?;
    let floor = 1e-10 * mixed_norm(f, p)?;
    let mut sides: Vec<usize> = family.cubes().iter().map(|q| q.side()).collect();
    sides.dedup();
    sides.reverse();
    let mut last = None;
    for side in sides {
        let terms: Vec<(f64, GridCube)> = family
            .cubes()
            .iter()
            .filter(|q| q.side() == side)
            .map(|q| (round_significant(f.mean_over(q)), *q))
            .filter(|(c, _)| *c != 0.0)
            .collect();
        let mut approx = SimpleApproximation {
            terms,
            side,
            error: 0.0,
        };
        approx.error = mixed_norm(&f.sub(&approx.to_function(f))?, p)?;
        if approx.error < eps {
            return Ok(approx);
        }
        last = Some(approx);
    }
    match last {
        Some(a) if a.error <= floor => Ok(a),
        Some(a) => Err(Error::Unachievable(format!(
            "unit-cell error {:.3e} is above both the tolerance {eps:.3e} and the rounding floor",
            a.error
        ))),
        None => Err(Error::invalid("empty dyadic family")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_function_is_a_fixed_point() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let f = GridFunction::from_fn(&g, |x| ((x[0] * 8.0).floor() - 3.0) * 0.25).unwrap();
        let a = simple_approximate(&f, 1e-3, &[2.0]).unwrap();
        assert_eq!(a.error, 0.0);
        assert!(a.side >= 2);
        assert_eq!(a.to_function(&f), f);
    }

    #[test]
    fn zero_tolerance_gives_unit_cells() {
        let g = Geometry::unit_box(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = GridFunction::new(g.clone(), (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let a = simple_approximate(&f, 0.0, &[1.5, 3.0]).unwrap();
        assert_eq!(a.side, 1);
        assert!(a.error <= 1e-11 * mixed_norm(&f, &[1.5, 3.0]).unwrap());
    }

    #[test]
    fn error_below_tolerance() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = GridFunction::new(g.clone(), (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let eps = 0.1 * mixed_norm(&f, &[2.0]).unwrap();
        let a = simple_approximate(&f, eps, &[2.0]).unwrap();
        let recomputed = mixed_norm(&f.sub(&a.to_function(&f)).unwrap(), &[2.0]).unwrap();
        assert_eq!(recomputed, a.error);
        assert!(recomputed < eps);
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_significant(-2.5e-7), -2.5e-7);
    }
}
