//! Piecewise-constant functions on uniform grids and the cubes that live on them.
//!
//! A [`GridFunction`] stores one value per cell. Values are cell averages, so
//! the function is constant on every cell and vanishes outside the grid box.
//! Integrals are therefore exact Riemann sums, and every norm in this crate
//! is evaluated on the same piecewise-constant representative.
//!
//! Cells are stored row-major: axis `x1` is the slowest index and the last
//! axis is the fastest. All axes share a single spacing `h`, which keeps
//! geometric cubes cell-aligned.

mod approx;
mod cube;
pub mod io;
mod prefix;

pub use approx::{simple_approximate, SimpleApproximation};
pub use cube::{enumerate_cubes, CubeFamily, FamilyKind, GridCube};
pub use prefix::PrefixSums;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Default upper bound on the number of cells a function may hold.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 24;

/// Shape, placement and spacing of a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: f64,
}

impl Geometry {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: f64) -> Result<Self> {
        Self::with_budget(shape, origin, spacing, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(
        shape: Vec<usize>,
        origin: Vec<f64>,
        spacing: f64,
        cell_budget: usize,
    ) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        if origin.len() != dim {
            return Err(Error::invalid(format!(
                "origin has {} coordinates, shape has {dim}",
                origin.len()
            )));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(format!("axis with {n} cells (need at least 2)")));
        }
        let cells = shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::ShapeOverflow(format!("{shape:?}")))?;
        if cells > cell_budget {
            return Err(Error::ShapeOverflow(format!(
                "{cells} cells exceed the budget of {cell_budget}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        Ok(Self { shape, origin, spacing })
    }

    /// `dim`-dimensional grid with `n` cells per axis covering `[0, 1)^dim`.
    pub fn unit_box(dim: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; dim], vec![0.0; dim], 1.0 / n as f64)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^dim`, the measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Largest per-axis cell count.
    pub fn max_extent(&self) -> usize {
        self.shape.iter().copied().max().unwrap_or(0)
    }

    /// Smallest per-axis cell count; no cube is larger than this.
    pub fn min_extent(&self) -> usize {
        self.shape.iter().copied().min().unwrap_or(0)
    }

    pub fn is_dyadic(&self) -> bool {
        self.shape.iter().all(|n| n.is_power_of_two())
    }

    pub(crate) fn strides(&self) -> [usize; MAX_DIM] {
        let mut strides = [0; MAX_DIM];
        let mut acc = 1;
        for k in (0..self.dim()).rev() {
            strides[k] = acc;
            acc *= self.shape[k];
        }
        strides
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let strides = self.strides();
        coords.iter().zip(strides.iter()).map(|(c, s)| c * s).sum()
    }

    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            out[k] = index % self.shape[k];
            index /= self.shape[k];
        }
        out
    }

    /// Physical coordinates of the center of a cell.
    pub fn center(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.coords(index);
        let mut out = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            out[k] = self.origin[k] + (c[k] as f64 + 0.5) * self.spacing;
        }
        out
    }

    /// The cube covering the whole box, when the box is a cube.
    pub fn whole_cube(&self) -> Option<GridCube> {
        let n = self.shape[0];
        self.shape
            .iter()
            .all(|&m| m == n)
            .then(|| GridCube::new(&vec![0; self.dim()], n))
    }

    pub(crate) fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }
}

/// Real-valued function sampled as cell averages on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    geometry: Geometry,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid(format!(
                "{} values for {} cells",
                values.len(),
                geometry.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: &Geometry) -> Self {
        Self {
            values: vec![0.0; geometry.len()],
            geometry: geometry.clone(),
        }
    }

    pub fn constant(geometry: &Geometry, c: f64) -> Self {
        Self {
            values: vec![c; geometry.len()],
            geometry: geometry.clone(),
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(geometry: &Geometry, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = geometry.dim();
        let values = (0..geometry.len())
            .map(|i| f(&geometry.center(i)[..dim]))
            .collect();
        Self::new(geometry.clone(), values)
    }

    /// Indicator of a cube.
    pub fn indicator(geometry: &Geometry, cube: &GridCube) -> Result<Self> {
        cube.check_inside(geometry)?;
        let mut out = Self::zeros(geometry);
        for i in cube.cells(geometry) {
            out.values[i] = 1.0;
        }
        Ok(out)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.geometry.ensure_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Mean of the cell values over a cube (the exact average of the function).
    pub fn mean_over(&self, cube: &GridCube) -> f64 {
        let cells = cube.cell_count();
        cube.cells(&self.geometry).map(|i| self.values[i]).sum::<f64>() / cells as f64
    }
}

/// `∫ f = h^dim · Σ values`, exact for cell-average data.
pub fn integrate(f: &GridFunction) -> f64 {
    f.geometry.cell_volume() * f.values.iter().sum::<f64>()
}

/// `f · χ_Q` on the same grid.
pub fn restrict(f: &GridFunction, cube: &GridCube) -> Result<GridFunction> {
    cube.check_inside(&f.geometry)?;
    let mut out = GridFunction::zeros(&f.geometry);
    for i in cube.cells(&f.geometry) {
        out.values[i] = f.values[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrate_zero_and_constants() {
        let g = Geometry::unit_box(2, 8).unwrap();
        assert_eq!(integrate(&GridFunction::zeros(&g)), 0.0);
        assert!((integrate(&GridFunction::constant(&g, 1.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_indicator_in_one_dimension() {
        let g = Geometry::unit_box(1, 8).unwrap();
        let q = GridCube::new(&[2], 4);
        let chi = GridFunction::indicator(&g, &q).unwrap();
        assert_eq!(integrate(&chi), 0.5);
    }

    #[test]
    fn restrict_matches_masked_sum() {
        let g = Geometry::unit_box(2, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        let q = GridCube::new(&[1, 3], 4);
        let direct: f64 = (0..g.len())
            .filter(|&i| {
                let c = g.coords(i);
                (1..5).contains(&c[0]) && (3..7).contains(&c[1])
            })
            .map(|i| f.values()[i])
            .sum::<f64>()
            * g.cell_volume();
        let r = restrict(&f, &q).unwrap();
        assert!((integrate(&r) - direct).abs() < 1e-14);
        assert_eq!(restrict(&r, &q).unwrap(), r);
        let whole = g.whole_cube().unwrap();
        assert_eq!(restrict(&f, &whole).unwrap(), f);
    }

    #[test]
    fn restrict_rejects_cubes_outside() {
        let g = Geometry::unit_box(1, 8).unwrap();
        assert!(matches!(
            restrict(&GridFunction::zeros(&g), &GridCube::new(&[6], 4)),
            Err(Error::CubeOutOfBounds(_))
        ));
    }

    #[test]
    fn geometry_validation() {
        assert!(matches!(
            Geometry::unit_box(4, 4),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(Geometry::new(vec![1], vec![0.0], 1.0).is_err());
        assert!(Geometry::new(vec![4], vec![0.0], -1.0).is_err());
        assert!(matches!(
            Geometry::with_budget(vec![64, 64], vec![0.0; 2], 1.0, 100),
            Err(Error::ShapeOverflow(_))
        ));
        assert!(matches!(
            GridFunction::new(Geometry::unit_box(1, 2).unwrap(), vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn coords_round_trip() {
        let g = Geometry::new(vec![4, 2, 8], vec![0.0; 3], 0.5).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(&g.coords(i)[..3]), i);
        }
        assert_eq!(g.coords(1), [0, 0, 1]);
    }
}
