use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Geometry, MAX_DIM};
use crate::error::{Error, Result};

/// Axis-aligned, cell-aligned cube: `side` cells along every axis starting at `start`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "CubeRepr", into = "CubeRepr")]
pub struct GridCube {
    dim: usize,
    start: [usize; MAX_DIM],
    side: usize,
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    start: Vec<usize>,
    side: usize,
}

impl From<CubeRepr> for GridCube {
    fn from(r: CubeRepr) -> Self {
        GridCube::new(&r.start, r.side)
    }
}

impl From<GridCube> for CubeRepr {
    fn from(c: GridCube) -> Self {
        CubeRepr {
            start: c.start().to_vec(),
            side: c.side,
        }
    }
}

impl fmt::Debug for GridCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{:?}+{}", self.start(), self.side)
    }
}

impl GridCube {
    /// # Panics
    /// If `start` has more than three coordinates or `side` is zero.
    pub fn new(start: &[usize], side: usize) -> Self {
        assert!(!start.is_empty() && start.len() <= MAX_DIM, "cube dimension out of range");
        assert!(side >= 1, "cube side must be at least one cell");
        let mut s = [0; MAX_DIM];
        s[..start.len()].copy_from_slice(start);
        Self {
            dim: start.len(),
            start: s,
            side,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> &[usize] {
        &self.start[..self.dim]
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cell_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// `|Q| = (side · h)^dim`.
    pub fn volume(&self, spacing: f64) -> f64 {
        (self.side as f64 * spacing).powi(self.dim as i32)
    }

    pub fn is_inside(&self, geometry: &Geometry) -> bool {
        self.dim == geometry.dim()
            && self
                .start()
                .iter()
                .zip(geometry.shape())
                .all(|(&a, &n)| a + self.side <= n)
    }

    pub(crate) fn check_inside(&self, geometry: &Geometry) -> Result<()> {
        if self.is_inside(geometry) {
            Ok(())
        } else {
            Err(Error::CubeOutOfBounds(format!(
                "{self:?} on grid {:?}",
                geometry.shape()
            )))
        }
    }

    pub fn contains_coords(&self, coords: &[usize]) -> bool {
        self.start()
            .iter()
            .zip(coords)
            .all(|(&a, &c)| c >= a && c < a + self.side)
    }

    pub fn contains_cube(&self, other: &GridCube) -> bool {
        self.start()
            .iter()
            .zip(other.start())
            .all(|(&a, &b)| b >= a && b + other.side <= a + self.side)
    }

    /// Global cell indices in row-major order.
    pub fn cells<'a>(&'a self, geometry: &'a Geometry) -> impl Iterator<Item = usize> + 'a {
        let strides = geometry.strides();
        let dim = self.dim;
        let s = self.side;
        (0..self.cell_count()).map(move |mut l| {
            let mut idx = 0;
            for k in (0..dim).rev() {
                idx += (self.start[k] + l % s) * strides[k];
                l /= s;
            }
            idx
        })
    }

    /// Global cell indices ordered with axis `x1` fastest, the layout the
    /// iterated-norm kernels expect.
    pub(crate) fn local_order(&self, geometry: &Geometry) -> Vec<usize> {
        let strides = geometry.strides();
        let s = self.side;
        (0..self.cell_count())
            .map(|mut l| {
                let mut idx = 0;
                for k in 0..self.dim {
                    idx += (self.start[k] + l % s) * strides[k];
                    l /= s;
                }
                idx
            })
            .collect()
    }

    fn order_key(&self) -> (usize, [usize; MAX_DIM]) {
        (self.side, self.start)
    }
}

impl PartialOrd for GridCube {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Side first, then lexicographic start: the tie-break order used by every argmax.
impl Ord for GridCube {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Cubes `[a, a + s)` with `s` a power of two and `a` a multiple of `s`.
    Dyadic,
    /// Dyadic cubes plus translates by `⌊s/3⌋` and `⌊2s/3⌋` cells on each axis.
    ShiftedDyadic,
    /// Every cell-aligned cube inside the box.
    All,
    /// Single cells.
    UnitCells,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Dyadic => "dyadic",
            FamilyKind::ShiftedDyadic => "shifted",
            FamilyKind::All => "all",
            FamilyKind::UnitCells => "unit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dyadic" => Ok(FamilyKind::Dyadic),
            "shifted" | "shifted-dyadic" => Ok(FamilyKind::ShiftedDyadic),
            "all" => Ok(FamilyKind::All),
            "unit" | "unit-cells" => Ok(FamilyKind::UnitCells),
            _ => Err(Error::Unknown {
                kind: "cube family",
                name: s.to_string(),
            }),
        }
    }

    /// `all` while `N^(2·dim)` stays within `1e8`, `shifted` beyond that.
    pub fn default_for(geometry: &Geometry) -> Self {
        let n = geometry.max_extent() as f64;
        if n.powi(2 * geometry.dim() as i32) <= 1e8 {
            FamilyKind::All
        } else {
            FamilyKind::ShiftedDyadic
        }
    }
}

/// A deduplicated, sorted list of cubes inside one grid box.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeFamily {
    kind: FamilyKind,
    cubes: Vec<GridCube>,
}

impl CubeFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn cubes(&self) -> &[GridCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, cube: &GridCube) -> bool {
        self.cubes.binary_search(cube).is_ok()
    }

    /// Number of family members containing each cell.
    pub fn coverage(&self, geometry: &Geometry) -> Vec<u32> {
        let mut count = vec![0u32; geometry.len()];
        for q in &self.cubes {
            for i in q.cells(geometry) {
                count[i] += 1;
            }
        }
        count
    }

    pub fn covers_box(&self, geometry: &Geometry) -> bool {
        self.coverage(geometry).iter().all(|&c| c > 0)
    }

    /// Ensures every cell where `mask` is true lies in some member.
    pub(crate) fn check_covers(&self, geometry: &Geometry, mask: impl Fn(usize) -> bool) -> Result<()> {
        let cov = self.coverage(geometry);
        match (0..geometry.len()).find(|&i| mask(i) && cov[i] == 0) {
            None => Ok(()),
            Some(i) => Err(Error::FamilyCoverage(format!(
                "cell {:?} ({} family)",
                &geometry.coords(i)[..geometry.dim()],
                self.kind.name()
            ))),
        }
    }

    /// Builds a family from an explicit cube list (sorted and deduplicated).
    pub fn from_cubes(kind: FamilyKind, geometry: &Geometry, mut cubes: Vec<GridCube>) -> Result<Self> {
        for q in &cubes {
            q.check_inside(geometry)?;
        }
        cubes.sort();
        cubes.dedup();
        Ok(Self { kind, cubes })
    }
}

/// Enumerates the cubes of `kind` inside the grid box.
pub fn enumerate_cubes(geometry: &Geometry, kind: FamilyKind) -> Result<CubeFamily> {
    let dim = geometry.dim();
    let shape = geometry.shape();
    if matches!(kind, FamilyKind::Dyadic | FamilyKind::ShiftedDyadic) && !geometry.is_dyadic() {
        return Err(Error::NotPowerOfTwo(shape.to_vec()));
    }
    let max_side = geometry.min_extent();
    let mut cubes = Vec::new();
    match kind {
        FamilyKind::UnitCells => push_lattice(&mut cubes, shape, 1, 1, &[0; MAX_DIM][..dim]),
        FamilyKind::All => {
            for s in 1..=max_side {
                push_lattice(&mut cubes, shape, s, 1, &[0; MAX_DIM][..dim]);
            }
        }
        FamilyKind::Dyadic => {
            let mut s = 1;
            while s <= max_side {
                push_lattice(&mut cubes, shape, s, s, &[0; MAX_DIM][..dim]);
                s *= 2;
            }
        }
        FamilyKind::ShiftedDyadic => {
            let mut s = 1;
            while s <= max_side {
                let shifts = [0, s / 3, 2 * s / 3];
                let combos = 3usize.pow(dim as u32);
                for mut c in 0..combos {
                    let mut offset = [0; MAX_DIM];
                    for o in offset.iter_mut().take(dim) {
                        *o = shifts[c % 3];
                        c /= 3;
                    }
                    push_lattice(&mut cubes, shape, s, s, &offset[..dim]);
                }
                s *= 2;
            }
        }
    }
    cubes.sort();
    cubes.dedup();
    Ok(CubeFamily { kind, cubes })
}

/// Pushes every cube of side `s` whose start is `offset + step·m` and which fits in the box.
fn push_lattice(out: &mut Vec<GridCube>, shape: &[usize], s: usize, step: usize, offset: &[usize]) {
    let dim = shape.len();
    let counts: Vec<usize> = (0..dim)
        .map(|k| {
            if offset[k] + s > shape[k] {
                0
            } else {
                (shape[k] - s - offset[k]) / step + 1
            }
        })
        .collect();
    let total: usize = counts.iter().product();
    for mut l in 0..total {
        let mut start = [0; MAX_DIM];
        for k in (0..dim).rev() {
            start[k] = offset[k] + (l % counts[k]) * step;
            l /= counts[k];
        }
        out.push(GridCube::new(&start[..dim], s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(dim: usize, n: usize) -> Geometry {
        Geometry::unit_box(dim, n).unwrap()
    }

    #[test]
    fn dyadic_in_one_dimension() {
        let fam = enumerate_cubes(&geom(1, 4), FamilyKind::Dyadic).unwrap();
        let got: Vec<(usize, usize)> = fam.cubes().iter().map(|q| (q.start()[0], q.side())).collect();
        assert_eq!(got, vec![(0, 1), (1, 1), (2, 1), (3, 1), (0, 2), (2, 2), (0, 4)]);
    }

    #[test]
    fn all_family_count() {
        assert_eq!(enumerate_cubes(&geom(1, 4), FamilyKind::All).unwrap().len(), 10);
    }

    #[test]
    fn dyadic_count_matches_enumeration_oracle() {
        // Brute force: every (start, side) pair with side a power of two and
        // start a multiple of side.
        let n = 8usize;
        let mut oracle = 0;
        for s in 1..=n {
            if !s.is_power_of_two() {
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    if a % s == 0 && b % s == 0 && a + s <= n && b + s <= n {
                        oracle += 1;
                    }
                }
            }
        }
        let fam = enumerate_cubes(&geom(2, n), FamilyKind::Dyadic).unwrap();
        assert_eq!(fam.len(), oracle);
        assert_eq!(fam.len(), 85);
    }

    #[test]
    fn non_power_of_two_rejected_for_dyadic() {
        let g = Geometry::new(vec![6], vec![0.0], 1.0).unwrap();
        assert!(matches!(
            enumerate_cubes(&g, FamilyKind::Dyadic),
            Err(Error::NotPowerOfTwo(_))
        ));
        assert!(enumerate_cubes(&g, FamilyKind::All).is_ok());
    }

    #[test]
    fn families_nest() {
        for (dim, n) in [(1, 16), (2, 8), (3, 4)] {
            let g = geom(dim, n);
            let unit = enumerate_cubes(&g, FamilyKind::UnitCells).unwrap();
            let dy = enumerate_cubes(&g, FamilyKind::Dyadic).unwrap();
            let sh = enumerate_cubes(&g, FamilyKind::ShiftedDyadic).unwrap();
            let all = enumerate_cubes(&g, FamilyKind::All).unwrap();
            assert!(unit.cubes().iter().all(|q| dy.contains(q)));
            assert!(dy.cubes().iter().all(|q| sh.contains(q)));
            assert!(sh.cubes().iter().all(|q| all.contains(q)));
            assert!(sh.len() > dy.len());
        }
    }

    #[test]
    fn dyadic_cover_property() {
        let g = geom(2, 8);
        let dy = enumerate_cubes(&g, FamilyKind::Dyadic).unwrap();
        let mut s = 1;
        while s <= 8 {
            for i in 0..g.len() {
                let c = g.coords(i);
                let n = dy
                    .cubes()
                    .iter()
                    .filter(|q| q.side() == s && q.contains_coords(&c[..2]))
                    .count();
                assert_eq!(n, 1);
            }
            s *= 2;
        }
    }

    #[test]
    fn order_is_side_then_start() {
        let fam = enumerate_cubes(&geom(2, 4), FamilyKind::All).unwrap();
        assert!(fam.cubes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(fam.cubes()[0], GridCube::new(&[0, 0], 1));
    }

    #[test]
    fn local_order_is_x1_fastest() {
        let g = geom(2, 4);
        let q = GridCube::new(&[1, 2], 2);
        // row-major: index = x1 * 4 + x2
        assert_eq!(q.local_order(&g), vec![6, 10, 7, 11]);
        let mut rm: Vec<usize> = q.cells(&g).collect();
        rm.sort();
        assert_eq!(rm, vec![6, 7, 10, 11]);
    }

    #[test]
    fn serde_shape() {
        let q = GridCube::new(&[1, 2], 4);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"start":[1,2],"side":4}"#);
        let back: GridCube = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }
}
