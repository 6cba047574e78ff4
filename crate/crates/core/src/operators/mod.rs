//! Maximal and sharp maximal operators, the fractional integral `I_α`, the
//! commutator `[b, I_α]`, and diagnostics built from them.

mod annular;
mod kernel;
mod maximal;
mod probe;

pub use annular::{check_block, maximal_block_image, AnnularDecomposition, AnnularPiece};
pub use kernel::{cell_singular_integral, kernel_matrix, DiagonalRule, KernelMethod, KernelSpec};
pub use maximal::{maximal, sharp_maximal, MaximalMethod};
pub use probe::{bmo_probe, ProbeResult};

use crate::error::{Error, Result};
use crate::grid::{CubeFamily, GridFunction};
use crate::norms::bmo_norm;

/// `I_α f(x) = ∫ f(y) |x − y|^{α−n} dy` with zero extension outside the box.
pub fn frac_integral(f: &GridFunction, spec: &KernelSpec) -> Result<GridFunction> {
    spec.check(f.dim())?;
    if f.is_zero() {
        return Ok(GridFunction::zeros(f.geometry()));
    }
    let values = match spec.method {
        KernelMethod::Direct => kernel::apply_direct(f, spec),
        KernelMethod::Fft => kernel::apply_fft(f, spec),
    };
    GridFunction::new(f.geometry().clone(), values)
}

/// `[b, I_α]f = b·I_α f − I_α(b f)`.
pub fn commutator(b: &GridFunction, f: &GridFunction, spec: &KernelSpec) -> Result<GridFunction> {
    let bf = b.mul(f)?;
    let left = b.mul(&frac_integral(f, spec)?)?;
    left.sub(&frac_integral(&bf, spec)?)
}

/// Relative floor under which a denominator cell is skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Smallest `C` with `M♯([b,I_α]f) ≤ C‖b‖_BMO (I_α|f| + I_{rα}(|f|^r)^{1/r})` at
/// every cell whose right-hand factor exceeds [`DENOMINATOR_FLOOR`] times its maximum.
pub fn sharp_bound_constant(
    b: &GridFunction,
    f: &GridFunction,
    spec: &KernelSpec,
    r: f64,
    family: &CubeFamily,
) -> Result<f64> {
    let dim = f.dim() as f64;
    spec.check(f.dim())?;
    if !(r > 1.0) || r * spec.alpha >= dim {
        return Err(Error::invalid(format!(
            "need r > 1 and rα < {dim}, got r = {r}, α = {}",
            spec.alpha
        )));
    }
    let bmo = bmo_norm(b, family)?.value;
    if bmo == 0.0 {
        return Ok(0.0);
    }
    let num = sharp_maximal(&commutator(b, f, spec)?, family)?;
    let fa = f.abs();
    let first = frac_integral(&fa, spec)?;
    let second = frac_integral(&fa.map(|v| v.powf(r)), &spec.with_alpha(r * spec.alpha))?;
    let den: Vec<f64> = first
        .values()
        .iter()
        .zip(second.values())
        .map(|(a, c)| bmo * (a + c.max(0.0).powf(1.0 / r)))
        .collect();
    let top = den.iter().copied().fold(0.0, f64::max);
    Ok(num
        .values()
        .iter()
        .zip(&den)
        .filter(|(_, &d)| d > DENOMINATOR_FLOOR * top)
        .map(|(n, d)| n / d)
        .fold(0.0, f64::max))
}
