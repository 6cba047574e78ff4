//! Mixed Lebesgue, mixed Morrey, BMO and weighted norms, `A_p` constants and
//! the duality pairing, all evaluated on piecewise-constant grid functions.

mod exponents;
pub(crate) mod iterated;

pub use exponents::{check_fractional_relation, ExponentTuple, RELATION_TOL};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{enumerate_cubes, CubeFamily, FamilyKind, GridCube, GridFunction, PrefixSums};
use iterated::norm;

/// Relative slack under which two cube values count as tied. Ties go to the
/// earlier cube in family order: smaller side, then lexicographic start.
pub const TIE_TOL: f64 = 1e-13;

/// A maximum over a cube family together with the cube attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeMax {
    pub value: f64,
    pub argmax: GridCube,
}

fn check_lebesgue_exponents(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(Error::InvalidExponent(format!(
            "{} exponents for a {dim}-dimensional grid",
            p.len()
        )));
    }
    if let Some(q) = p.iter().find(|&&q| !(q >= 1.0)) {
        return Err(Error::InvalidExponent(format!("p = {q} is below 1")));
    }
    Ok(())
}

/// Values of `f` on a cube, axis `x1` fastest.
pub(crate) fn gather(f: &GridFunction, cube: &GridCube) -> Vec<f64> {
    cube.local_order(f.geometry())
        .into_iter()
        .map(|i| f.values()[i])
        .collect()
}

/// All values of `f`, axis `x1` fastest.
pub(crate) fn gather_all(f: &GridFunction) -> Vec<f64> {
    let g = f.geometry();
    let dim = g.dim();
    let shape = g.shape();
    let strides = g.strides();
    (0..g.len())
        .map(|mut l| {
            let mut idx = 0;
            for k in 0..dim {
                idx += (l % shape[k]) * strides[k];
                l /= shape[k];
            }
            f.values()[idx]
        })
        .collect()
}

/// Iterated norm `‖f‖_{L^p̄}`, folding `x1` first. Entries may be `∞`.
pub fn mixed_norm(f: &GridFunction, p: &[f64]) -> Result<f64> {
    check_lebesgue_exponents(p, f.dim())?;
    if f.is_zero() {
        return Ok(0.0);
    }
    Ok(norm(&gather_all(f), f.geometry().shape(), p, f.geometry().spacing()))
}

/// `‖f χ_Q‖_{L^p̄}` for every member of the family, in family order.
pub fn cube_norms(f: &GridFunction, p: &[f64], family: &CubeFamily) -> Result<Vec<f64>> {
    check_lebesgue_exponents(p, f.dim())?;
    let g = f.geometry();
    let h = g.spacing();
    let m = f.max_abs();
    if m == 0.0 {
        return Ok(vec![0.0; family.len()]);
    }
    let equal = p.iter().all(|&q| q == p[0]) && p[0].is_finite();
    if equal {
        // Equal exponents: one power sum per cube from a summed-area table.
        let q = p[0];
        let powered: Vec<f64> = f.values().iter().map(|v| (v.abs() / m).powf(q)).collect();
        let table = PrefixSums::new(g, &powered);
        let hd = g.cell_volume();
        Ok(family
            .cubes()
            .par_iter()
            .map(|c| m * (hd * table.cube_sum(c).max(0.0)).powf(1.0 / q))
            .collect())
    } else {
        Ok(family
            .cubes()
            .par_iter()
            .map(|c| {
                let ext = vec![c.side(); c.dim()];
                norm(&gather(f, c), &ext, p, h)
            })
            .collect())
    }
}

/// Index of the largest value, ties (within [`TIE_TOL`]) to the earliest.
pub(crate) fn scan_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] * (1.0 + TIE_TOL) && v > values[best] {
            best = i;
        }
    }
    best
}

fn check_family(f: &GridFunction, family: &CubeFamily) -> Result<()> {
    if family.is_empty() {
        return Err(Error::FamilyCoverage("anything: the family is empty".into()));
    }
    if let Some(q) = family.cubes().first() {
        q.check_inside(f.geometry())?;
        if q.dim() != f.dim() {
            return Err(Error::GeometryMismatch);
        }
    }
    Ok(())
}

/// `κ_Q·‖fχ_Q‖_{L^p̄}` for every member, with `κ_Q = |Q|^e`.
pub fn weighted_cube_norms(f: &GridFunction, e: &ExponentTuple, family: &CubeFamily) -> Result<Vec<f64>> {
    let h = f.geometry().spacing();
    let mut v = cube_norms(f, e.p(), family)?;
    for (x, c) in v.iter_mut().zip(family.cubes()) {
        *x *= e.kappa(c.volume(h));
    }
    Ok(v)
}

/// `sup_Q |Q|^{1/p0 − (1/n)Σ1/p_i}·‖fχ_Q‖_{L^p̄}` over the family.
pub fn morrey_norm(f: &GridFunction, e: &ExponentTuple, family: &CubeFamily) -> Result<CubeMax> {
    if e.dim() != f.dim() {
        return Err(Error::InvalidExponent(format!(
            "{} exponents for a {}-dimensional grid",
            e.dim(),
            f.dim()
        )));
    }
    e.check_admissible()?;
    check_family(f, family)?;
    family.check_covers(f.geometry(), |i| f.values()[i] != 0.0)?;
    let v = weighted_cube_norms(f, e, family)?;
    let i = scan_max(&v);
    Ok(CubeMax {
        value: v[i],
        argmax: family.cubes()[i],
    })
}

/// Mean oscillation `(1/|Q|)∫_Q |b − b_Q|` of every member.
pub fn cube_oscillations(b: &GridFunction, family: &CubeFamily) -> Vec<f64> {
    let g = b.geometry();
    family
        .cubes()
        .par_iter()
        .map(|c| {
            // Shift by one cube value first so that constants give exact zeros.
            let cells: Vec<usize> = c.cells(g).collect();
            let shift = b.values()[cells[0]];
            let n = cells.len() as f64;
            let mean = cells.iter().map(|&i| b.values()[i] - shift).sum::<f64>() / n;
            cells
                .iter()
                .map(|&i| (b.values()[i] - shift - mean).abs())
                .sum::<f64>()
                / n
        })
        .collect()
}

/// `sup_Q (1/|Q|)∫_Q |b − b_Q|` over the family.
pub fn bmo_norm(b: &GridFunction, family: &CubeFamily) -> Result<CubeMax> {
    check_family(b, family)?;
    family.check_covers(b.geometry(), |_| true)?;
    let v = cube_oscillations(b, family);
    let i = scan_max(&v);
    Ok(CubeMax {
        value: v[i],
        argmax: family.cubes()[i],
    })
}

/// A strictly positive weight function.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight(GridFunction);

impl Weight {
    pub fn new(w: GridFunction) -> Result<Self> {
        match w.values().iter().position(|&v| !(v > 0.0)) {
            None => Ok(Self(w)),
            Some(i) => Err(Error::invalid(format!(
                "non-positive weight {} at cell {i}",
                w.values()[i]
            ))),
        }
    }

    pub fn function(&self) -> &GridFunction {
        &self.0
    }
}

/// `(∫ |f|^p ω)^{1/p}`.
pub fn weighted_lp_norm(f: &GridFunction, p: f64, w: &Weight) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(format!("p = {p} is not in (0, ∞)")));
    }
    f.geometry().ensure_same(w.0.geometry())?;
    let s: f64 = f
        .values()
        .iter()
        .zip(w.0.values())
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    Ok((f.geometry().cell_volume() * s).powf(1.0 / p))
}

/// Muckenhoupt constant `sup_Q ⟨ω⟩_Q ⟨ω^{1/(1−p)}⟩_Q^{p−1}`; for `p = 1` the
/// second factor is the global `‖ω^{-1}‖_∞`.
pub fn ap_constant(w: &Weight, p: f64, family: &CubeFamily) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(format!("A_p needs 1 ≤ p < ∞, got {p}")));
    }
    let f = &w.0;
    check_family(f, family)?;
    let g = f.geometry();
    let sum_w = PrefixSums::new(g, f.values());
    let avg = |t: &PrefixSums, c: &GridCube| t.cube_sum(c) / c.cell_count() as f64;
    let values: Vec<f64> = if p == 1.0 {
        let inv_sup = f.values().iter().fold(0.0f64, |m, v| m.max(1.0 / v));
        family.cubes().par_iter().map(|c| avg(&sum_w, c) * inv_sup).collect()
    } else {
        let dual: Vec<f64> = f.values().iter().map(|v| v.powf(1.0 / (1.0 - p))).collect();
        let sum_d = PrefixSums::new(g, &dual);
        family
            .cubes()
            .par_iter()
            .map(|c| avg(&sum_w, c) * avg(&sum_d, c).powf(p - 1.0))
            .collect()
    };
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `∫ f g` (or `∫ |f g|`), summed in cell order.
pub fn pairing(f: &GridFunction, g: &GridFunction, absolute: bool) -> Result<f64> {
    f.geometry().ensure_same(g.geometry())?;
    let s: f64 = if absolute {
        f.values().iter().zip(g.values()).map(|(a, b)| (a * b).abs()).sum()
    } else {
        f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum()
    };
    Ok(f.geometry().cell_volume() * s)
}

/// A norm that can be convexified: `‖f‖_{X^p} = ‖|f|^p‖_X^{1/p}`.
#[derive(Clone, Debug)]
pub enum NormDescriptor {
    Mixed { p: Vec<f64> },
    Morrey { exponents: ExponentTuple, family: FamilyKind },
    WeightedLp { p: f64, weight: Weight },
}

impl NormDescriptor {
    pub fn evaluate(&self, f: &GridFunction) -> Result<f64> {
        match self {
            NormDescriptor::Mixed { p } => mixed_norm(f, p),
            NormDescriptor::Morrey { exponents, family } => {
                let fam = enumerate_cubes(f.geometry(), *family)?;
                Ok(morrey_norm(f, exponents, &fam)?.value)
            }
            NormDescriptor::WeightedLp { p, weight } => weighted_lp_norm(f, *p, weight),
        }
    }
}

/// `‖ |f|^p ‖^{1/p}` in the base norm.
pub fn convexified_norm(f: &GridFunction, base: &NormDescriptor, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "convexification power must be positive, got {p}"
        )));
    }
    if p == 1.0 {
        return base.evaluate(&f.abs());
    }
    Ok(base.evaluate(&f.map(|v| v.abs().powf(p)))?.powf(1.0 / p))
}

/// JSON record of one norm evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub space: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_cube: Option<GridCube>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
    pub exponents: ExponentRecord,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExponentRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    pub p: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(g: &Geometry, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridFunction::new(g.clone(), v).unwrap()
    }

    #[test]
    fn equal_exponents_give_classical_lp() {
        let g = Geometry::unit_box(2, 8).unwrap();
        let f = random_fn(&g, 1);
        let direct = (g.cell_volume() * f.values().iter().map(|v| v.abs().powf(3.0)).sum::<f64>()).powf(1.0 / 3.0);
        let got = mixed_norm(&f, &[3.0, 3.0]).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn indicator_mixed_norm() {
        let g = Geometry::unit_box(2, 16).unwrap();
        let q = GridCube::new(&[3, 5], 4);
        let chi = GridFunction::indicator(&g, &q).unwrap();
        let l: f64 = 4.0 / 16.0;
        let want: f64 = l.powf(1.0 / 1.5 + 1.0 / 3.0);
        let got = mixed_norm(&chi, &[1.5, 3.0]).unwrap();
        assert!((got - want).abs() <= 1e-13 * want);
        assert_eq!(mixed_norm(&GridFunction::zeros(&g), &[2.0, 2.0]).unwrap(), 0.0);
        assert!(mixed_norm(&chi, &[0.5, 2.0]).is_err());
    }

    #[test]
    fn axis_order_matters() {
        // |f(x1, x2)| = a(x1): folding x1 first gives ‖a‖_{p1}·|box|^{1/p2}.
        let g = Geometry::unit_box(2, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| 1.0 + 3.0 * x[0]).unwrap();
        let a: Vec<f64> = (0..8).map(|i| 1.0 + 3.0 * (i as f64 + 0.5) / 8.0).collect();
        let want = iterated::lp(&a, 1.5, 0.125);
        let got = mixed_norm(&f, &[1.5, 4.0]).unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn morrey_of_indicator() {
        let g = Geometry::unit_box(2, 16).unwrap();
        let e = ExponentTuple::new(3.0, vec![2.0, 2.5]).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::Dyadic).unwrap();
        for q in fam.cubes().iter().step_by(7) {
            let chi = GridFunction::indicator(&g, q).unwrap();
            let m = morrey_norm(&chi, &e, &fam).unwrap();
            let want = q.volume(g.spacing()).powf(1.0 / 3.0);
            assert!((m.value - want).abs() <= 1e-12 * want);
            assert_eq!(m.argmax, *q);
        }
    }

    #[test]
    fn morrey_equals_lebesgue_in_the_critical_case() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let f = random_fn(&g, 2);
        let e = ExponentTuple::new(2.5, vec![2.5]).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        let m = morrey_norm(&f, &e, &fam).unwrap().value;
        let l = mixed_norm(&f, &[2.5]).unwrap();
        assert!((m - l).abs() <= 1e-12 * l);
    }

    #[test]
    fn morrey_requires_coverage() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let f = GridFunction::constant(&g, 1.0);
        let fam = CubeFamily::from_cubes(FamilyKind::All, &g, vec![GridCube::new(&[0], 4)]).unwrap();
        let e = ExponentTuple::new(4.0, vec![2.0]).unwrap();
        assert!(matches!(morrey_norm(&f, &e, &fam), Err(Error::FamilyCoverage(_))));
    }

    #[test]
    fn bmo_of_two_level_function() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let b = GridFunction::from_fn(&g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        // Brute force: every cube [a, a+s) with k ones has oscillation 2k(s−k)/s².
        let mut oracle: f64 = 0.0;
        for s in 1..=16usize {
            for a in 0..=16 - s {
                let k = (a..a + s).filter(|&i| i < 8).count() as f64;
                oracle = oracle.max(2.0 * k * (s as f64 - k) / (s * s) as f64);
            }
        }
        let m = bmo_norm(&b, &fam).unwrap();
        assert_eq!(m.value, 0.5);
        assert_eq!(m.value, oracle);
        // The smallest maximiser is a side-2 cube straddling the jump.
        assert_eq!(m.argmax, GridCube::new(&[7], 2));
        let shifted = b.map(|v| v + 3.25);
        assert!((bmo_norm(&shifted, &fam).unwrap().value - 0.5).abs() < 1e-15);
        assert_eq!(bmo_norm(&GridFunction::constant(&g, 0.7), &fam).unwrap().value, 0.0);
    }

    #[test]
    fn ap_constants() {
        let g = Geometry::unit_box(1, 16).unwrap();
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        let w = Weight::new(GridFunction::constant(&g, 3.0)).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((ap_constant(&w, p, &fam).unwrap() - 1.0).abs() < 1e-12);
        }
        let two = Weight::new(GridFunction::from_fn(&g, |x| if x[0] < 0.5 { 1.0 } else { 4.0 }).unwrap()).unwrap();
        // Brute force over cubes: (avg ω)(avg 1/ω).
        let mut oracle: f64 = 0.0;
        for s in 1..=16usize {
            for a in 0..=16 - s {
                let k = (a..a + s).filter(|&i| i < 8).count() as f64;
                let m = s as f64 - k;
                oracle = oracle.max((k + 4.0 * m) / s as f64 * (k + 0.25 * m) / s as f64);
            }
        }
        let got = ap_constant(&two, 2.0, &fam).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!(got >= 25.0 / 16.0);
        assert!(ap_constant(&two, 0.5, &fam).is_err());
        assert!(Weight::new(GridFunction::zeros(&g)).is_err());
    }

    #[test]
    fn weighted_norm_of_indicator() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let w = Weight::new(GridFunction::from_fn(&g, |x| 1.0 + x[0]).unwrap()).unwrap();
        let q = GridCube::new(&[2], 3);
        let chi = GridFunction::indicator(&g, &q).unwrap();
        let measure: f64 = q.cells(&g).map(|i| w.function().values()[i]).sum::<f64>() * g.spacing();
        let got = weighted_lp_norm(&chi, 2.0, &w).unwrap();
        assert!((got - measure.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn convexification() {
        let g = Geometry::unit_box(2, 8).unwrap();
        let f = random_fn(&g, 3);
        let base = NormDescriptor::Mixed { p: vec![2.0, 2.0] };
        let direct = mixed_norm(&f, &[2.0, 2.0]).unwrap();
        assert_eq!(convexified_norm(&f, &base, 1.0).unwrap(), direct);
        let conv = convexified_norm(&f, &base, 1.5).unwrap();
        let l3 = mixed_norm(&f, &[3.0, 3.0]).unwrap();
        assert!((conv - l3).abs() <= 1e-12 * l3);
        assert!(convexified_norm(&f, &base, 0.0).is_err());
    }

    #[test]
    fn pairing_basics() {
        let g = Geometry::unit_box(2, 4).unwrap();
        let q = GridCube::new(&[1, 1], 2);
        let chi = GridFunction::indicator(&g, &q).unwrap();
        assert_eq!(pairing(&chi, &chi, false).unwrap(), q.volume(g.spacing()));
        let f = random_fn(&g, 5);
        assert_eq!(pairing(&f, &GridFunction::zeros(&g), false).unwrap(), 0.0);
        let h = random_fn(&g, 6);
        assert!(pairing(&f, &h, false).unwrap().abs() <= pairing(&f, &h, true).unwrap());
        let other = Geometry::unit_box(2, 8).unwrap();
        assert!(pairing(&f, &GridFunction::zeros(&other), false).is_err());
    }
}
