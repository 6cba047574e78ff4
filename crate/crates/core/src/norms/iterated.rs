//! Iterated norms on flat buffers laid out with axis `x1` fastest.
//!
//! A buffer with extents `ext = [n1, ..., nk]` is read as `nk` contiguous
//! slices, each a buffer with extents `[n1, ..., n(k-1)]`. Level `k` of the
//! iterated norm folds the slice norms with exponent `p[k-1]`:
//!
//! ```text
//! ρ_0(y) = |y|,    ρ_k(y) = (h Σ_j ρ_{k-1}(y_j)^{p_k})^{1/p_k}
//! ```
//!
//! Besides evaluation this module provides the duality map of `ρ` and the
//! proximal maps the block-norm solver needs. None of them has a closed form
//! for unequal exponents, so they are computed by nested monotone root finding.

/// `(h Σ|v|^p)^{1/p}`, or `max|v|` for `p = ∞`. Scaled by the max to avoid
/// overflow and underflow.
pub(crate) fn lp(v: &[f64], p: f64, h: f64) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || p.is_infinite() {
        return m;
    }
    if p == 1.0 {
        return h * v.iter().map(|x| x.abs()).sum::<f64>();
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / m) * (x / m)).sum();
        return m * (h * s).sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * (h * s).powf(1.0 / p)
}

/// Iterated norm of a whole buffer. `ext` and `p` have one entry per axis.
pub(crate) fn norm(buf: &[f64], ext: &[usize], p: &[f64], h: f64) -> f64 {
    debug_assert_eq!(buf.len(), ext.iter().product::<usize>());
    let mut level: Vec<f64> = buf.chunks(ext[0]).map(|c| lp(c, p[0], h)).collect();
    for k in 1..ext.len() {
        level = level.chunks(ext[k]).map(|c| lp(c, p[k], h)).collect();
    }
    level[0]
}

/// Extents, exponents and spacing of a mixed norm on one buffer shape.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MixedNorm<'a> {
    pub ext: &'a [usize],
    pub p: &'a [f64],
    pub h: f64,
}

/// Root finder tolerance (relative, in the log variable).
const ROOT_TOL: f64 = 1e-14;
const ROOT_ITERS: usize = 200;

impl MixedNorm<'_> {
    fn slice_len(&self, k: usize) -> usize {
        self.ext[..k - 1].iter().product()
    }

    /// `ρ_k` of a level-`k` buffer.
    fn rho(&self, y: &[f64], k: usize) -> f64 {
        if k == 0 {
            y[0].abs()
        } else {
            norm(y, &self.ext[..k], &self.p[..k], self.h)
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.rho(y, self.ext.len())
    }

    /// Duality map: `J(y)` has conjugate norm 1 and `h^d Σ J(y)·y = ρ(y)`.
    pub fn duality_map(&self, y: &[f64], out: &mut [f64]) {
        self.dmap(y, out, self.ext.len());
    }

    fn dmap(&self, y: &[f64], out: &mut [f64], k: usize) {
        if k == 0 {
            out[0] = if y[0] > 0.0 {
                1.0
            } else if y[0] < 0.0 {
                -1.0
            } else {
                0.0
            };
            return;
        }
        let r = self.rho(y, k);
        if r == 0.0 {
            out.fill(0.0);
            return;
        }
        let pk = self.p[k - 1];
        let len = self.slice_len(k);
        for (yj, oj) in y.chunks(len).zip(out.chunks_mut(len)) {
            let rj = self.rho(yj, k - 1);
            if rj == 0.0 {
                oj.fill(0.0);
                continue;
            }
            self.dmap(yj, oj, k - 1);
            let w = (rj / r).powf(pk - 1.0);
            oj.iter_mut().for_each(|x| *x *= w);
        }
    }

    /// `argmin_y ½‖y − v‖² + c·ρ_k(y)^e` for `e > 1` (Euclidean norm, no `h`).
    fn prox_pow(&self, v: &[f64], out: &mut [f64], k: usize, c: f64, e: f64) {
        if c == 0.0 {
            out.copy_from_slice(v);
            return;
        }
        if k == 0 {
            out[0] = scalar_prox(v[0], c, e);
            return;
        }
        let pk = self.p[k - 1];
        let len = self.slice_len(k);
        let h = self.h;
        if e == pk {
            for (vj, oj) in v.chunks(len).zip(out.chunks_mut(len)) {
                self.prox_pow(vj, oj, k - 1, c * h, pk);
            }
            return;
        }
        let r = self.rho(v, k);
        if r == 0.0 {
            out.fill(0.0);
            return;
        }
        // The minimiser is the separable prox with weight c·(e/p)·s^(e−p)·h at
        // the unique s with ρ_k(y(s)) = s.
        let eval = |s: f64, out: &mut [f64]| -> f64 {
            let ck = c * (e / pk) * s.powf(e - pk) * h;
            for (vj, oj) in v.chunks(len).zip(out.chunks_mut(len)) {
                self.prox_pow(vj, oj, k - 1, ck, pk);
            }
            self.rho(out, k) - s
        };
        let s = find_root_log(r, |s| eval(s, out));
        eval(s, out);
    }

    /// Euclidean projection onto `{ρ(y) ≤ radius}`.
    pub fn project_ball(&self, v: &[f64], out: &mut [f64], radius: f64) {
        let d = self.ext.len();
        let r = self.eval(v);
        if r <= radius {
            out.copy_from_slice(v);
            return;
        }
        if radius <= 0.0 {
            out.fill(0.0);
            return;
        }
        let pd = self.p[d - 1];
        // ρ(P(v, μ, p_d)) decreases from ρ(v) to 0 as μ grows.
        let eval = |log_mu: f64, out: &mut [f64]| -> f64 {
            self.prox_pow(v, out, d, log_mu.exp(), pd);
            self.eval(out) / radius - 1.0
        };
        let guess = ((r / radius).powf(pd) / pd).ln();
        let t = bracket_and_solve(guess, |t| eval(t, out));
        eval(t, out);
    }

    /// `argmin_u ½‖u − v‖² + λ·ρ*(u)` where `ρ*` is the conjugate-exponent
    /// norm, via Moreau: the Euclidean dual of `ρ*` is `h^{-d}·ρ`.
    pub fn prox_conjugate(&self, v: &[f64], out: &mut [f64], lambda: f64) {
        let hd = self.h.powi(self.ext.len() as i32);
        self.project_ball(v, out, lambda * hd);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = x - *o;
        }
    }
}

/// `sign(v)·τ` with `τ + c·e·τ^{e−1} = |v|`, the scalar prox of `c|·|^e`.
pub(crate) fn scalar_prox(v: f64, c: f64, e: f64) -> f64 {
    let a = v.abs();
    if a == 0.0 {
        return 0.0;
    }
    let tau = if e == 1.0 {
        (a - c).max(0.0)
    } else if e == 2.0 {
        a / (1.0 + 2.0 * c)
    } else {
        let g = |t: f64| t + c * e * t.powf(e - 1.0) - a;
        let dg = |t: f64| 1.0 + c * e * (e - 1.0) * t.powf(e - 2.0);
        let (mut lo, mut hi) = (0.0, a);
        let mut t = (a / (c * e)).powf(1.0 / (e - 1.0)).min(a);
        if !(t > 0.0) {
            t = 0.5 * a;
        }
        for _ in 0..100 {
            let gt = g(t);
            if gt == 0.0 {
                break;
            }
            if gt < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - gt / dg(t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi;
            t = next;
            if done {
                break;
            }
        }
        t
    };
    tau.copysign(v)
}

/// Root of a function of `s ∈ (0, hi]` that is positive near 0 and `≤ 0` at
/// `hi`, solved in `ln s`.
fn find_root_log(hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let f_hi = f(hi);
    if f_hi >= 0.0 {
        return hi;
    }
    let mut b = hi.ln();
    let mut fb = f_hi;
    let mut a = b - std::f64::consts::LN_2;
    let mut fa = f(a.exp());
    let mut n = 0;
    while fa <= 0.0 {
        if fa == 0.0 {
            return a.exp();
        }
        b = a;
        fb = fa;
        a -= 2.0 * std::f64::consts::LN_2 * (1 + n / 4) as f64;
        fa = f(a.exp());
        n += 1;
        if n > ROOT_ITERS {
            return a.exp();
        }
    }
    illinois(a, fa, b, fb, |t| f(t.exp())).exp()
}

/// Root of a decreasing function of `t`, starting from a guess.
fn bracket_and_solve(guess: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut a = guess;
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    let mut step = 1.0;
    let mut b = a + if fa > 0.0 { step } else { -step };
    let mut fb = f(b);
    let mut n = 0;
    while fa.signum() == fb.signum() && fb != 0.0 {
        a = b;
        fa = fb;
        step *= 2.0;
        b = a + if fa > 0.0 { step } else { -step };
        fb = f(b);
        n += 1;
        if n > ROOT_ITERS {
            return b;
        }
    }
    if fb == 0.0 {
        return b;
    }
    illinois(a, fa, b, fb, f)
}

/// Illinois variant of regula falsi on a sign-changing bracket.
fn illinois(mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..ROOT_ITERS {
        let scale = a.abs().max(b.abs()).max(1.0);
        if (b - a).abs() <= ROOT_TOL * scale {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}
