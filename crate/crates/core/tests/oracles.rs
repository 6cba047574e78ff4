//! Library values against independent brute-force oracles written here.

use morrey::duality::{duality_gap, SolverParams};
use morrey::grid::{enumerate_cubes, simple_approximate, FamilyKind, Geometry, GridCube, GridFunction};
use morrey::lab::{generate, GeneratorKind};
use morrey::norms::{
    ap_constant, bmo_norm, convexified_norm, mixed_norm, morrey_norm, weighted_lp_norm, ExponentTuple,
    NormDescriptor, Weight,
};
use morrey::operators::{frac_integral, maximal, KernelSpec, MaximalMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(g: &Geometry, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(g.clone(), v).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Iterated norm straight from the definition: integrate `x1` innermost.
fn iterated(f: &GridFunction, cells: &[Vec<usize>], p: &[f64]) -> f64 {
    let g = f.geometry();
    let h = g.spacing();
    let dim = g.dim();
    // Group by the outer coordinates recursively.
    fn fold(f: &GridFunction, cells: &[Vec<usize>], p: &[f64], axis: usize, h: f64) -> f64 {
        let g = f.geometry();
        if axis == usize::MAX {
            return f.values()[g.index(&cells[0])].abs();
        }
        let mut keys: Vec<usize> = cells.iter().map(|c| c[axis]).collect();
        keys.sort();
        keys.dedup();
        let inner: Vec<f64> = keys
            .iter()
            .map(|&k| {
                let sub: Vec<Vec<usize>> = cells.iter().filter(|c| c[axis] == k).cloned().collect();
                fold(f, &sub, p, axis.wrapping_sub(1), h)
            })
            .collect();
        let q = p[axis];
        if q.is_infinite() {
            inner.into_iter().fold(0.0, f64::max)
        } else {
            (inner.iter().map(|v| h * v.powf(q)).sum::<f64>()).powf(1.0 / q)
        }
    }
    fold(f, cells, p, dim - 1, h)
}

fn all_cells(g: &Geometry) -> Vec<Vec<usize>> {
    (0..g.len()).map(|i| g.coords(i)[..g.dim()].to_vec()).collect()
}

fn cube_cells(g: &Geometry, q: &GridCube) -> Vec<Vec<usize>> {
    all_cells(g).into_iter().filter(|c| q.contains_coords(c)).collect()
}

/// Every cube inside the box, enumerated here rather than by the library.
fn every_cube(g: &Geometry) -> Vec<GridCube> {
    let n = g.min_extent();
    let mut out = Vec::new();
    for s in 1..=n {
        let m = n - s + 1;
        for l in 0..m.pow(g.dim() as u32) {
            let mut rem = l;
            let start: Vec<usize> = (0..g.dim())
                .map(|_| {
                    let v = rem % m;
                    rem /= m;
                    v
                })
                .collect();
            out.push(GridCube::new(&start, s));
        }
    }
    out
}

#[test]
fn mixed_norm_matches_the_iterated_definition() {
    for (dim, n, p) in [(1, 16, vec![2.5]), (2, 6, vec![1.5, 3.0]), (3, 4, vec![2.0, 1.25, 4.0]), (2, 5, vec![3.0, f64::INFINITY])] {
        let g = Geometry::unit_box(dim, n).unwrap();
        let f = random(&g, dim as u64);
        let want = iterated(&f, &all_cells(&g), &p);
        assert!(rel(mixed_norm(&f, &p).unwrap(), want) < 1e-12, "dim {dim} p {p:?}");
    }
}

#[test]
fn morrey_norm_matches_brute_force_sup() {
    for (dim, n, p0, p) in [(1, 12, 3.0, vec![2.0]), (2, 5, 4.0, vec![1.5, 3.0])] {
        let g = Geometry::unit_box(dim, n).unwrap();
        let f = random(&g, 10 + dim as u64);
        let e = ExponentTuple::new(p0, p.clone()).unwrap();
        let expo = 1.0 / p0 - p.iter().map(|q| 1.0 / q).sum::<f64>() / dim as f64;
        let want = every_cube(&g)
            .iter()
            .map(|q| q.volume(g.spacing()).powf(expo) * iterated(&f, &cube_cells(&g, q), &p))
            .fold(0.0, f64::max);
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        assert!(rel(morrey_norm(&f, &e, &fam).unwrap().value, want) < 1e-12);
    }
}

#[test]
fn morrey_reduces_to_lebesgue_at_the_critical_exponent() {
    let g = Geometry::unit_box(2, 8).unwrap();
    let f = random(&g, 3);
    // 1/p0 = (1/2)(1/2 + 1/4)
    let e = ExponentTuple::new(8.0 / 3.0, vec![2.0, 4.0]).unwrap();
    let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
    let m = morrey_norm(&f, &e, &fam).unwrap().value;
    assert!(rel(m, mixed_norm(&f, &[2.0, 4.0]).unwrap()) < 1e-12);
}

#[test]
fn two_level_bmo_matches_closed_form() {
    // A cube with a fraction θ at level a and 1 − θ at level c oscillates by 2θ(1 − θ)|a − c|.
    let g = Geometry::unit_box(1, 64).unwrap();
    for seed in 0..5 {
        let b = generate(GeneratorKind::TwoLevel, seed, &g).unwrap();
        let v = b.values();
        let want = every_cube(&g)
            .iter()
            .map(|q| {
                let s = q.side();
                let a = v[q.start()[0]];
                let k = (0..s).filter(|&i| v[q.start()[0] + i] == a).count();
                let c = v[q.start()[0] + s - 1];
                let theta = k as f64 / s as f64;
                2.0 * theta * (1.0 - theta) * (a - c).abs()
            })
            .fold(0.0, f64::max);
        let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
        assert!(rel(bmo_norm(&b, &fam).unwrap().value, want) < 1e-12, "seed {seed}");
    }
}

#[test]
fn maximal_matches_brute_force_loop() {
    let g = Geometry::unit_box(2, 6).unwrap();
    let f = random(&g, 5);
    let cubes = every_cube(&g);
    let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
    for method in [MaximalMethod::Brute, MaximalMethod::SummedArea] {
        let m = maximal(&f, &fam, method).unwrap();
        for i in 0..g.len() {
            let c = g.coords(i);
            let want = cubes
                .iter()
                .filter(|q| q.contains_coords(&c[..2]))
                .map(|q| {
                    let cells = cube_cells(&g, q);
                    cells.iter().map(|c| f.values()[g.index(c)].abs()).sum::<f64>() / cells.len() as f64
                })
                .fold(0.0, f64::max);
            assert!(rel(m.values()[i], want) < 1e-12);
        }
    }
}

#[test]
fn fractional_integral_matches_direct_double_sum() {
    // 1D: diagonal cell integral ∫_{−h/2}^{h/2} |t|^{α−1} dt = 2(h/2)^α/α.
    let g = Geometry::unit_box(1, 40).unwrap();
    let f = random(&g, 8);
    let h = g.spacing();
    for alpha in [0.25, 0.5, 0.75] {
        let got = frac_integral(&f, &KernelSpec::new(alpha)).unwrap();
        for i in 0..40 {
            let mut want = f.values()[i] * 2.0 * (h / 2.0).powf(alpha) / alpha;
            for j in 0..40 {
                if j != i {
                    want += h * f.values()[j] * ((i as f64 - j as f64).abs() * h).powf(alpha - 1.0);
                }
            }
            assert!((got.values()[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }
    // 2D, α = 1: the unit cell integral of 1/|x| is 4 ln(1 + √2).
    let g = Geometry::unit_box(2, 6).unwrap();
    let f = random(&g, 9);
    let h = g.spacing();
    let got = frac_integral(&f, &KernelSpec::direct(1.0)).unwrap();
    let diag = h * 4.0 * (1.0 + 2f64.sqrt()).ln();
    for i in 0..g.len() {
        let ci = g.coords(i);
        let mut want = f.values()[i] * diag;
        for j in 0..g.len() {
            if j != i {
                let cj = g.coords(j);
                let r = ((ci[0] as f64 - cj[0] as f64).powi(2) + (ci[1] as f64 - cj[1] as f64).powi(2)).sqrt() * h;
                want += h * h * f.values()[j] / r;
            }
        }
        assert!((got.values()[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
    }
}

#[test]
fn unit_weight_gives_classical_lp_and_unit_ap_constant() {
    let g = Geometry::unit_box(2, 8).unwrap();
    let f = random(&g, 2);
    let w = Weight::new(GridFunction::constant(&g, 1.0)).unwrap();
    let want = (g.cell_volume() * f.values().iter().map(|v| v.abs().powf(3.0)).sum::<f64>()).powf(1.0 / 3.0);
    assert!(rel(weighted_lp_norm(&f, 3.0, &w).unwrap(), want) < 1e-12);
    let fam = enumerate_cubes(&g, FamilyKind::Dyadic).unwrap();
    assert!(rel(ap_constant(&w, 2.0, &fam).unwrap(), 1.0) < 1e-12);
}

#[test]
fn convexified_lebesgue_norm_is_the_product_exponent() {
    let g = Geometry::unit_box(1, 32).unwrap();
    let f = random(&g, 4);
    let base = NormDescriptor::Mixed { p: vec![1.5] };
    let got = convexified_norm(&f, &base, 2.0).unwrap();
    assert!(rel(got, mixed_norm(&f, &[3.0]).unwrap()) < 1e-12);
}

#[test]
fn simple_approximation_error_is_below_epsilon() {
    let g = Geometry::unit_box(1, 16).unwrap();
    let f = random(&g, 6);
    let eps = 0.1 * mixed_norm(&f, &[2.0]).unwrap();
    let s = simple_approximate(&f, eps, &[2.0]).unwrap();
    let err = mixed_norm(&f.sub(&s.to_function(&f)).unwrap(), &[2.0]).unwrap();
    assert!(err < eps);
}

#[test]
fn indicator_block_norm_is_volume_power_on_every_cube() {
    let g = Geometry::unit_box(1, 8).unwrap();
    let e = ExponentTuple::new(3.0, vec![2.0]).unwrap();
    let fam = enumerate_cubes(&g, FamilyKind::All).unwrap();
    for q in every_cube(&g) {
        let chi = GridFunction::indicator(&g, &q).unwrap();
        let r = duality_gap(&chi, &e, &fam, &SolverParams::default()).unwrap();
        let want = q.volume(g.spacing()).powf(1.0 - 1.0 / 3.0);
        assert!(r.lower <= r.upper * (1.0 + 1e-12));
        assert!(rel(r.upper, want) < 1e-6 && rel(r.lower, want) < 1e-6, "{q:?}: {} {}", r.lower, r.upper);
    }
}
