//! Lawson–Hanson non-negative least squares, `min ‖Ax − b‖₂` over `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

/// `a` is column-major: `a[j]` is column `j`, every column has `b.len()` rows.
pub(crate) fn nnls(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let n = a.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let scale = a
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * scale * m as f64;
    let mut passive = vec![false; n];
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (j, col) in a.iter().enumerate() {
            if x[j] != 0.0 {
                for (ri, ci) in r.iter_mut().zip(col) {
                    *ri -= x[j] * ci;
                }
            }
        }
        r
    };
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    for _outer in 0..3 * n + 10 {
        let r = residual(&x);
        let w: Vec<f64> = a.iter().map(|c| dot(c, &r)).collect();
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;
        for _inner in 0..3 * n + 10 {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = least_squares(a, b, &idx);
            if idx.iter().zip(&z).all(|(_, &zj)| zj > 0.0) {
                for (&j, &zj) in idx.iter().zip(&z) {
                    x[j] = zj;
                }
                break;
            }
            // Step back towards x until the first passive coordinate hits zero.
            let mut alpha = f64::INFINITY;
            for (&j, &zj) in idx.iter().zip(&z) {
                if zj <= 0.0 {
                    let d = x[j] - zj;
                    if d > 0.0 {
                        alpha = alpha.min(x[j] / d);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (&j, &zj) in idx.iter().zip(&z) {
                x[j] += alpha * (zj - x[j]);
                if x[j] <= 1e-15 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

fn least_squares(a: &[Vec<f64>], b: &[f64], idx: &[usize]) -> Vec<f64> {
    let m = b.len();
    let mat = DMatrix::from_fn(m, idx.len(), |r, c| a[idx[c]][r]);
    let rhs = DVector::from_column_slice(b);
    let svd = mat.svd(true, true);
    match svd.solve(&rhs, 1e-13) {
        Ok(sol) => sol.iter().copied().collect(),
        Err(_) => vec![0.0; idx.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_nonnegative_solution() {
        let a = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        let x = nnls(&a, &[2.0, 3.0, 5.0]);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_directions() {
        // Unconstrained optimum is (−2, 1); the constrained one is the origin.
        let a = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let x = nnls(&a, &[-1.0, 1.0]);
        assert_eq!(x, vec![0.0, 0.0]);
    }
}
