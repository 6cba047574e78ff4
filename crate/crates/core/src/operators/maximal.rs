//! Uncentered maximal functions over a cube family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CubeFamily, GridCube, GridFunction, PrefixSums};
use crate::norms::cube_oscillations;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalMethod {
    /// Every cube average summed cell by cell.
    Brute,
    /// Cube averages from a summed-area table.
    SummedArea,
    /// Only the dyadic members of the family, averaged level by level.
    Dyadic,
}

impl MaximalMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Self::Brute),
            "summed-area" | "sat" => Ok(Self::SummedArea),
            "dyadic" => Ok(Self::Dyadic),
            _ => Err(Error::Unknown {
                kind: "maximal method",
                name: s.into(),
            }),
        }
    }
}

fn is_dyadic_cube(c: &GridCube) -> bool {
    c.side().is_power_of_two() && c.start().iter().all(|a| a % c.side() == 0)
}

/// `out(x) = max over listed cubes Q ∋ x of value(Q)`.
fn scatter_max(f: &GridFunction, cubes: &[GridCube], values: &[f64]) -> GridFunction {
    let g = f.geometry();
    let mut out = vec![0.0f64; g.len()];
    for (c, &v) in cubes.iter().zip(values) {
        for i in c.cells(g) {
            if v > out[i] {
                out[i] = v;
            }
        }
    }
    GridFunction::new(g.clone(), out).expect("maxima of finite averages are finite")
}

fn check_cover(f: &GridFunction, family: &CubeFamily) -> Result<()> {
    if let Some(q) = family.cubes().first() {
        if q.dim() != f.dim() {
            return Err(Error::GeometryMismatch);
        }
    }
    family.check_covers(f.geometry(), |_| true)
}

/// `Mf(x) = sup_{Q ∋ x, Q ∈ F} (1/|Q|)∫_Q |f|`.
pub fn maximal(f: &GridFunction, family: &CubeFamily, method: MaximalMethod) -> Result<GridFunction> {
    check_cover(f, family)?;
    let g = f.geometry();
    let a = f.abs();
    match method {
        MaximalMethod::Brute => {
            let avg: Vec<f64> = family
                .cubes()
                .iter()
                .map(|c| c.cells(g).map(|i| a.values()[i]).sum::<f64>() / c.cell_count() as f64)
                .collect();
            Ok(scatter_max(f, family.cubes(), &avg))
        }
        MaximalMethod::SummedArea => {
            let table = PrefixSums::new(g, a.values());
            let avg: Vec<f64> = family
                .cubes()
                .iter()
                .map(|c| (table.cube_sum(c) / c.cell_count() as f64).max(0.0))
                .collect();
            Ok(scatter_max(f, family.cubes(), &avg))
        }
        MaximalMethod::Dyadic => {
            if !g.is_dyadic() {
                return Err(Error::NotPowerOfTwo(g.shape().to_vec()));
            }
            let cubes: Vec<GridCube> = family.cubes().iter().copied().filter(is_dyadic_cube).collect();
            if cubes.is_empty() {
                return Err(Error::FamilyCoverage("anything: no dyadic members".into()));
            }
            let levels = dyadic_sums(&a);
            let avg: Vec<f64> = cubes
                .iter()
                .map(|c| {
                    let k = c.side().trailing_zeros() as usize;
                    let (ext, sums) = &levels[k];
                    let mut j = 0;
                    for (a, n) in c.start().iter().zip(ext) {
                        j = j * n + a / c.side();
                    }
                    sums[j] / c.cell_count() as f64
                })
                .collect();
            Ok(scatter_max(f, &cubes, &avg))
        }
    }
}

/// Sums over the dyadic cubes of side `2^k`, one row-major table per level.
fn dyadic_sums(a: &GridFunction) -> Vec<(Vec<usize>, Vec<f64>)> {
    let g = a.geometry();
    let dim = g.dim();
    let mut levels = vec![(g.shape().to_vec(), a.values().to_vec())];
    loop {
        let (ext, sums) = levels.last().unwrap();
        if ext.iter().any(|&n| n < 2) {
            break;
        }
        let next: Vec<usize> = ext.iter().map(|n| n / 2).collect();
        let len: usize = next.iter().product();
        let mut out = vec![0.0; len];
        for (l, &v) in sums.iter().enumerate() {
            let mut rem = l;
            let mut c = [0usize; 3];
            for k in (0..dim).rev() {
                c[k] = rem % ext[k];
                rem /= ext[k];
            }
            let mut j = 0;
            for k in 0..dim {
                j = j * next[k] + c[k] / 2;
            }
            out[j] += v;
        }
        levels.push((next, out));
    }
    levels
}

/// `M♯f(x) = sup_{Q ∋ x, Q ∈ F} (1/|Q|)∫_Q |f − f_Q|`.
pub fn sharp_maximal(f: &GridFunction, family: &CubeFamily) -> Result<GridFunction> {
    check_cover(f, family)?;
    let osc = cube_oscillations(f, family);
    Ok(scatter_max(f, family.cubes(), &osc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{enumerate_cubes, FamilyKind, Geometry};

    fn sample(dim: usize, n: usize) -> GridFunction {
        let g = Geometry::unit_box(dim, n).unwrap();
        let v = (0..g.len()).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
        GridFunction::new(g, v).unwrap()
    }

    #[test]
    fn indicator_is_one_on_its_cube() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let q = GridCube::new(&[3], 5);
        let f = GridFunction::indicator(&g, &q).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        let m = maximal(&f, &fam, MaximalMethod::SummedArea).unwrap();
        for i in q.cells(&g) {
            assert_eq!(m.values()[i], 1.0);
        }
    }

    #[test]
    fn dyadic_method_matches_brute_on_dyadic_family() {
        for dim in 1..=3 {
            let f = sample(dim, 8);
            let fam = enumerate_cubes(f.geometry(), FamilyKind::Dyadic).unwrap();
            let a = maximal(&f, &fam, MaximalMethod::Brute).unwrap();
            let b = maximal(&f, &fam, MaximalMethod::Dyadic).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sharp_is_zero_for_constants() {
        let g = Geometry::unit_box(2, 8).unwrap();
        let f = GridFunction::constant(&g, 3.7);
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        assert!(sharp_maximal(&f, &fam).unwrap().is_zero());
    }
}
