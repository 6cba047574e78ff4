use super::{Geometry, GridCube, MAX_DIM};

/// Summed-area table: the sum of cell values over any cube in `O(2^dim)`.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    dim: usize,
    strides: [usize; MAX_DIM],
    table: Vec<f64>,
}

impl PrefixSums {
    pub fn new(geometry: &Geometry, values: &[f64]) -> Self {
        let dim = geometry.dim();
        // Padded shape, n_k + 1 per axis, row-major like the grid.
        let mut ext = [1; MAX_DIM];
        for k in 0..dim {
            ext[k] = geometry.shape()[k] + 1;
        }
        let mut strides = [0; MAX_DIM];
        let mut acc = 1;
        for k in (0..dim).rev() {
            strides[k] = acc;
            acc *= ext[k];
        }
        let mut table = vec![0.0; acc];
        for (i, &v) in values.iter().enumerate() {
            let c = geometry.coords(i);
            let mut j = 0;
            for k in 0..dim {
                j += (c[k] + 1) * strides[k];
            }
            table[j] = v;
        }
        // Running sums along each axis in turn.
        for k in 0..dim {
            let s = strides[k];
            for j in 0..table.len() {
                let ck = (j / s) % ext[k];
                if ck > 0 {
                    table[j] += table[j - s];
                }
            }
        }
        Self {
            dim,
            strides,
            table,
        }
    }

    /// `Σ_{cells in Q} values` by inclusion-exclusion over the `2^dim` corners.
    pub fn cube_sum(&self, cube: &GridCube) -> f64 {
        let a = cube.start();
        let s = cube.side();
        let mut total = 0.0;
        for mask in 0..(1usize << self.dim) {
            let mut j = 0;
            let mut sign = 1.0;
            for k in 0..self.dim {
                if mask & (1 << k) != 0 {
                    j += (a[k] + s) * self.strides[k];
                } else {
                    j += a[k] * self.strides[k];
                    sign = -sign;
                }
            }
            total += sign * self.table[j];
        }
        total
    }
}
