//! Seeded test functions.
//!
//! Random draws are made in physical coordinates of the unit box wherever
//! possible, so that one seed describes the same continuum function on grids
//! of different resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridCube, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// `χ_Q` for a given or random cube.
    Indicator,
    /// Two constants separated by a hyperplane `x1 = c`.
    TwoLevel,
    /// Up to five Gaussians sampled on the box.
    SmoothBumpSum,
    /// Independent random signs times magnitudes in `[1/4, 1]`.
    RandomSignCells,
    /// `log(L/|x − x₀|)` capped at the cell scale.
    LogLike,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        Self::Indicator,
        Self::TwoLevel,
        Self::SmoothBumpSum,
        Self::RandomSignCells,
        Self::LogLike,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Indicator => "indicator",
            Self::TwoLevel => "two-level",
            Self::SmoothBumpSum => "smooth-bump-sum",
            Self::RandomSignCells => "random-sign-cells",
            Self::LogLike => "log-like",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "generator",
                name: s.into(),
            })
    }
}

/// Deterministic generator for `seed`.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A function of the given kind; the indicator's cube is drawn from the seed.
pub fn generate(kind: GeneratorKind, seed: u64, geometry: &Geometry) -> Result<GridFunction> {
    generate_with(kind, seed, geometry, None)
}

/// As [`generate`], with an explicit cube for the indicator kind.
pub fn generate_with(
    kind: GeneratorKind,
    seed: u64,
    geometry: &Geometry,
    cube: Option<&GridCube>,
) -> Result<GridFunction> {
    let mut rng = rng_for(seed);
    let g = geometry;
    let dim = g.dim();
    let len: Vec<f64> = g.shape().iter().map(|&n| n as f64 * g.spacing()).collect();
    let rel = |x: &[f64], k: usize| (x[k] - g.origin()[k]) / len[k];
    match kind {
        GeneratorKind::Indicator => {
            let q = match cube {
                Some(q) => *q,
                None => {
                    let n = g.min_extent();
                    let side = rng.gen_range(1..=(n / 2).max(1));
                    let start: Vec<usize> = g.shape().iter().map(|&m| rng.gen_range(0..=m - side)).collect();
                    GridCube::new(&start, side)
                }
            };
            GridFunction::indicator(g, &q)
        }
        GeneratorKind::TwoLevel => {
            // Split on a 1/64 lattice so coarser and finer grids agree.
            let cut = rng.gen_range(1..64) as f64 / 64.0;
            let a: f64 = rng.gen_range(-2.0..2.0);
            let mut c: f64 = rng.gen_range(-2.0..2.0);
            if (a - c).abs() < 0.25 {
                c = a + 1.0;
            }
            GridFunction::from_fn(g, |x| if rel(x, 0) < cut { a } else { c })
        }
        GeneratorKind::SmoothBumpSum => {
            let count = rng.gen_range(1..=5);
            let bumps: Vec<(Vec<f64>, f64, f64)> = (0..count)
                .map(|_| {
                    let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..0.9)).collect();
                    let width = rng.gen_range(0.03..0.2);
                    let amp = rng.gen_range(-1.0..1.0);
                    (center, width, amp)
                })
                .collect();
            GridFunction::from_fn(g, |x| {
                bumps
                    .iter()
                    .map(|(c, w, a)| {
                        let r2: f64 = (0..dim).map(|k| (rel(x, k) - c[k]).powi(2)).sum();
                        a * (-r2 / (2.0 * w * w)).exp()
                    })
                    .sum()
            })
        }
        GeneratorKind::RandomSignCells => {
            let values = (0..g.len())
                .map(|_| {
                    let m: f64 = rng.gen_range(0.25..=1.0);
                    if rng.gen_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            GridFunction::new(g.clone(), values)
        }
        GeneratorKind::LogLike => {
            let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..0.8)).collect();
            let floor = 0.5 / g.max_extent() as f64;
            GridFunction::from_fn(g, |x| {
                let r = (0..dim).map(|k| (rel(x, k) - x0[k]).powi(2)).sum::<f64>().sqrt();
                -(r.max(floor)).ln()
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bits() {
        let g = Geometry::unit_box(2, 16).unwrap();
        for kind in GeneratorKind::ALL {
            let a = generate(kind, 11, &g).unwrap();
            let b = generate(kind, 11, &g).unwrap();
            assert_eq!(a, b, "{}", kind.name());
            assert_eq!(GeneratorKind::parse(kind.name()).unwrap(), kind);
        }
    }

    #[test]
    fn explicit_indicator() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let q = GridCube::new(&[2], 3);
        let f = generate_with(GeneratorKind::Indicator, 0, &g, Some(&q)).unwrap();
        assert_eq!(f.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(GeneratorKind::parse("noise"), Err(Error::Unknown { .. })));
    }
}
