//! The discrete Riesz kernel and the two ways of applying it.
//!
//! Off the diagonal a cell pair contributes `h^n |x − y|^{α−n}` with `x, y`
//! the cell centers. On the diagonal the singular kernel is replaced by its
//! exact integral over a centered cell, `h^α C_{n,α}`, or by zero.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridFunction, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    Direct,
    Fft,
}

impl KernelMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "fft" => Ok(Self::Fft),
            _ => Err(Error::Unknown {
                kind: "kernel method",
                name: s.into(),
            }),
        }
    }
}

/// Value used on the diagonal cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalRule {
    /// `∫_{cell} |z|^{α−n} dz`: closed form in one dimension, Gauss–Legendre
    /// quadrature on the face pyramids otherwise.
    CellAverage,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
    pub method: KernelMethod,
    pub diagonal: DiagonalRule,
}

impl KernelSpec {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            method: KernelMethod::Fft,
            diagonal: DiagonalRule::CellAverage,
        }
    }

    pub fn direct(alpha: f64) -> Self {
        Self {
            method: KernelMethod::Direct,
            ..Self::new(alpha)
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < dim as f64) {
            return Err(Error::invalid(format!(
                "α = {} must lie in (0, {dim})",
                self.alpha
            )));
        }
        Ok(())
    }
}

const QUADRATURE_ORDER: usize = 24;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_{[-1/2,1/2]^n} |z|^{α−n} dz`.
pub fn cell_singular_integral(dim: usize, alpha: f64) -> f64 {
    let radial = 0.5f64.powf(alpha) / alpha;
    if dim == 1 {
        return 2.0 * radial;
    }
    // Each of the 2n face pyramids: z = ρ(1, u), u ∈ [-1,1]^{n−1}.
    let (x, w) = gauss_legendre(QUADRATURE_ORDER);
    let ex = (alpha - dim as f64) / 2.0;
    let mut face = 0.0;
    if dim == 2 {
        for (u, wu) in x.iter().zip(&w) {
            face += wu * (1.0 + u * u).powf(ex);
        }
    } else {
        for (u, wu) in x.iter().zip(&w) {
            for (v, wv) in x.iter().zip(&w) {
                face += wu * wv * (1.0 + u * u + v * v).powf(ex);
            }
        }
    }
    2.0 * dim as f64 * radial * face
}

/// Kernel weights indexed by absolute per-axis offsets `|i − j|`.
pub(crate) struct KernelTable {
    strides: [usize; MAX_DIM],
    values: Vec<f64>,
}

impl KernelTable {
    pub(crate) fn new(geometry: &Geometry, spec: &KernelSpec) -> Self {
        let dim = geometry.dim();
        let ext = geometry.shape().to_vec();
        let mut strides = [0; MAX_DIM];
        let mut acc = 1;
        for k in (0..dim).rev() {
            strides[k] = acc;
            acc *= ext[k];
        }
        let h = geometry.spacing();
        let scale = h.powf(spec.alpha);
        let ex = (spec.alpha - dim as f64) / 2.0;
        let values = (0..acc)
            .map(|mut l| {
                let mut r2 = 0.0;
                for k in (0..dim).rev() {
                    let d = (l % ext[k]) as f64;
                    r2 += d * d;
                    l /= ext[k];
                }
                if r2 == 0.0 {
                    match spec.diagonal {
                        DiagonalRule::CellAverage => scale * cell_singular_integral(dim, spec.alpha),
                        DiagonalRule::Zero => 0.0,
                    }
                } else {
                    scale * r2.powf(ex)
                }
            })
            .collect();
        Self { strides, values }
    }

    pub(crate) fn at(&self, offsets: &[usize]) -> f64 {
        let j: usize = offsets.iter().zip(&self.strides).map(|(o, s)| o * s).sum();
        self.values[j]
    }
}

/// Explicit kernel matrix `K[x][y]`, row-major over cells (small grids only).
pub fn kernel_matrix(geometry: &Geometry, spec: &KernelSpec) -> Result<Vec<Vec<f64>>> {
    spec.check(geometry.dim())?;
    if geometry.len() > 4096 {
        return Err(Error::invalid(format!(
            "kernel matrix of {} cells is too large to materialize",
            geometry.len()
        )));
    }
    let table = KernelTable::new(geometry, spec);
    let dim = geometry.dim();
    let coords: Vec<[usize; MAX_DIM]> = (0..geometry.len()).map(|i| geometry.coords(i)).collect();
    Ok(coords
        .iter()
        .map(|cx| {
            coords
                .iter()
                .map(|cy| {
                    let off: Vec<usize> = (0..dim).map(|k| cx[k].abs_diff(cy[k])).collect();
                    table.at(&off)
                })
                .collect()
        })
        .collect())
}

pub(crate) fn apply_direct(f: &GridFunction, spec: &KernelSpec) -> Vec<f64> {
    let g = f.geometry();
    let table = KernelTable::new(g, spec);
    let dim = g.dim();
    let coords: Vec<[usize; MAX_DIM]> = (0..g.len()).map(|i| g.coords(i)).collect();
    let support: Vec<usize> = (0..g.len()).filter(|&i| f.values()[i] != 0.0).collect();
    coords
        .par_iter()
        .map(|cx| {
            let mut acc = 0.0;
            for &j in &support {
                let cy = &coords[j];
                let mut t = 0;
                for k in 0..dim {
                    t += cx[k].abs_diff(cy[k]) * table.strides[k];
                }
                acc += table.values[t] * f.values()[j];
            }
            acc
        })
        .collect()
}

/// In-place multidimensional FFT over a row-major array of shape `ext`.
fn fft_nd(data: &mut [Complex<f64>], ext: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let total = data.len();
    let mut stride = total;
    for (k, &n) in ext.iter().enumerate() {
        stride /= n;
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); plans[k].get_inplace_scratch_len()];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                plans[k].process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

/// Free-space convolution: zero padding to twice the shape on every axis.
pub(crate) fn apply_fft(f: &GridFunction, spec: &KernelSpec) -> Vec<f64> {
    let g = f.geometry();
    let dim = g.dim();
    let shape = g.shape();
    let table = KernelTable::new(g, spec);
    let ext: Vec<usize> = shape.iter().map(|n| 2 * n).collect();
    let total: usize = ext.iter().product();
    let mut planner = FftPlanner::new();
    let forward: Vec<_> = ext.iter().map(|&n| planner.plan_fft_forward(n)).collect();
    let inverse: Vec<_> = ext.iter().map(|&n| planner.plan_fft_inverse(n)).collect();

    let unravel = |mut l: usize| {
        let mut c = [0usize; MAX_DIM];
        for k in (0..dim).rev() {
            c[k] = l % ext[k];
            l /= ext[k];
        }
        c
    };
    let mut kern = vec![Complex::new(0.0, 0.0); total];
    let mut sig = vec![Complex::new(0.0, 0.0); total];
    for (l, (kv, sv)) in kern.iter_mut().zip(sig.iter_mut()).enumerate() {
        let c = unravel(l);
        let mut off = [0usize; MAX_DIM];
        let mut inside_kernel = true;
        let mut inside_signal = true;
        for k in 0..dim {
            let n = shape[k];
            // Padded index j stands for the offset j (j < n) or j − 2n (j > n).
            off[k] = if c[k] < n { c[k] } else { 2 * n - c[k] };
            if c[k] == n {
                inside_kernel = false;
            }
            if c[k] >= n {
                inside_signal = false;
            }
        }
        if inside_kernel {
            *kv = Complex::new(table.at(&off[..dim]), 0.0);
        }
        if inside_signal {
            *sv = Complex::new(f.values()[g.index(&c[..dim])], 0.0);
        }
    }
    fft_nd(&mut kern, &ext, &forward);
    fft_nd(&mut sig, &ext, &forward);
    for (s, k) in sig.iter_mut().zip(&kern) {
        *s *= k;
    }
    fft_nd(&mut sig, &ext, &inverse);
    let norm = 1.0 / total as f64;
    (0..g.len())
        .map(|i| {
            let c = g.coords(i);
            let mut l = 0;
            for k in 0..dim {
                l = l * ext[k] + c[k];
            }
            sig[l].re * norm
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        for deg in 0..32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn cell_integral_matches_radial_closed_form_in_one_dimension() {
        let a: f64 = 0.5;
        assert!((cell_singular_integral(1, a) - 2.0 * 0.5f64.sqrt() / a).abs() < 1e-14);
    }

    #[test]
    fn cell_integral_in_two_dimensions_matches_polar_oracle() {
        // α = 2 − 1 = 1: ∫_{[-1/2,1/2]^2} dz/|z| = 4 ln(1 + √2).
        let v = cell_singular_integral(2, 1.0);
        let exact = 4.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn cell_integral_in_three_dimensions_matches_brute_midpoint_sum() {
        let alpha = 2.0;
        let m = 60;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let c = |t: usize| (t as f64 + 0.5) / m as f64 - 0.5;
                    let r = (c(i).powi(2) + c(j).powi(2) + c(k).powi(2)).sqrt();
                    s += r.powf(alpha - 3.0);
                }
            }
        }
        s /= (m * m * m) as f64;
        let v = cell_singular_integral(3, alpha);
        assert!((v - s).abs() / v < 2e-3, "{v} vs {s}");
    }
}
