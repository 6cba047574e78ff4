//! Structural invariants as property tests.

use morrey::duality::{duality_gap, SolverParams};
use morrey::grid::io::{from_bytes, from_csv, to_bytes, to_csv};
use morrey::grid::{enumerate_cubes, integrate, FamilyKind, Geometry, GridFunction};
use morrey::norms::{bmo_norm, mixed_norm, morrey_norm, pairing, ExponentTuple};
use morrey::operators::{commutator, frac_integral, maximal, sharp_maximal, KernelSpec, MaximalMethod};
use proptest::prelude::*;

fn grid_fn(dim: usize, n: usize) -> impl Strategy<Value = GridFunction> {
    let g = Geometry::unit_box(dim, n).unwrap();
    prop::collection::vec(-10.0f64..10.0, g.len()).prop_map(move |v| GridFunction::new(g.clone(), v).unwrap())
}

fn pair(dim: usize, n: usize) -> impl Strategy<Value = (GridFunction, GridFunction)> {
    (grid_fn(dim, n), grid_fn(dim, n))
}

fn exps() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (1.1f64..6.0, 1.1f64..6.0).prop_map(|(a, b)| {
        // p0 ≥ n/Σ(1/p_i) keeps the tuple admissible in dimension 2.
        let p = vec![a, b];
        let crit = 2.0 / (1.0 / a + 1.0 / b);
        (crit * 1.5, p)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixed_norm_is_a_norm((f, g) in pair(2, 6), c in -5.0f64..5.0, (_, p) in exps()) {
        let nf = mixed_norm(&f, &p).unwrap();
        prop_assert!(close(mixed_norm(&f.scale(c), &p).unwrap(), c.abs() * nf, 1e-12));
        let sum = mixed_norm(&f.add(&g).unwrap(), &p).unwrap();
        prop_assert!(sum <= (nf + mixed_norm(&g, &p).unwrap()) * (1.0 + 1e-10));
    }

    #[test]
    fn morrey_norm_is_a_lattice_norm((f, g) in pair(2, 5), (p0, p) in exps(), t in 0.0f64..1.0) {
        let e = ExponentTuple::new(p0, p).unwrap();
        let fam = enumerate_cubes(f.geometry(), FamilyKind::All).unwrap();
        let m = |h: &GridFunction| morrey_norm(h, &e, &fam).unwrap().value;
        let sum = m(&f.add(&g).unwrap());
        prop_assert!(sum <= (m(&f) + m(&g)) * (1.0 + 1e-10));
        // |h| ≤ |f| pointwise ⇒ ‖h‖ ≤ ‖f‖.
        let h = f.map(|v| v * t);
        prop_assert!(m(&h) <= m(&f) * (1.0 + 1e-12));
        prop_assert!(close(m(&f.abs()), m(&f), 1e-14));
    }

    #[test]
    fn mixed_holder((f, g) in pair(2, 6), (_, p) in exps()) {
        let pc: Vec<f64> = p.iter().map(|&q| q / (q - 1.0)).collect();
        let lhs = pairing(&f, &g, true).unwrap();
        prop_assert!(lhs <= mixed_norm(&f, &p).unwrap() * mixed_norm(&g, &pc).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn morrey_dominated_by_lebesgue_on_the_box(f in grid_fn(1, 16), p in 1.1f64..5.0, k in 1.05f64..3.0) {
        // p0 = k·p > p: on a unit box, ‖f‖_{M^{p0}_p} ≤ ‖f‖_{L^{p0}}.
        let e = ExponentTuple::new(k * p, vec![p]).unwrap();
        let fam = enumerate_cubes(f.geometry(), FamilyKind::All).unwrap();
        let m = morrey_norm(&f, &e, &fam).unwrap().value;
        prop_assert!(m <= mixed_norm(&f, &[k * p]).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn maximal_is_sublinear_and_dominates((f, g) in pair(2, 6)) {
        let fam = enumerate_cubes(f.geometry(), FamilyKind::All).unwrap();
        let m = |h: &GridFunction| maximal(h, &fam, MaximalMethod::SummedArea).unwrap();
        let (mf, mg, ms) = (m(&f), m(&g), m(&f.add(&g).unwrap()));
        for i in 0..f.values().len() {
            prop_assert!(ms.values()[i] <= (mf.values()[i] + mg.values()[i]) * (1.0 + 1e-12) + 1e-12);
            prop_assert!(mf.values()[i] >= f.values()[i].abs() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn bmo_ignores_constants_and_scales(b in grid_fn(1, 24), c in -5.0f64..5.0, s in -3.0f64..3.0) {
        let fam = enumerate_cubes(b.geometry(), FamilyKind::All).unwrap();
        let base = bmo_norm(&b, &fam).unwrap().value;
        prop_assert!(close(bmo_norm(&b.map(|v| v + c), &fam).unwrap().value, base, 1e-10));
        prop_assert!(close(bmo_norm(&b.scale(s), &fam).unwrap().value, s.abs() * base, 1e-12));
        let sharp = sharp_maximal(&b, &fam).unwrap();
        prop_assert!(sharp.max_abs() <= base * (1.0 + 1e-12));
    }

    #[test]
    fn fractional_integral_is_positive_and_linear((f, g) in pair(1, 32), alpha in 0.1f64..0.9, c in -3.0f64..3.0) {
        let spec = KernelSpec::new(alpha);
        let i = |h: &GridFunction| frac_integral(h, &spec).unwrap();
        let lin = i(&f.add(&g.scale(c)).unwrap());
        let parts = i(&f).add(&i(&g).scale(c)).unwrap();
        prop_assert!(lin.sub(&parts).unwrap().max_abs() <= 1e-10 * (1.0 + parts.max_abs()));
        prop_assert!(i(&f.abs()).values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn commutator_is_antisymmetric_in_pairing((f, g) in pair(1, 32), b in grid_fn(1, 32)) {
        let spec = KernelSpec::direct(0.5);
        let a = pairing(&f, &commutator(&b, &g, &spec).unwrap(), false).unwrap();
        let c = pairing(&g, &commutator(&b, &f, &spec).unwrap(), false).unwrap();
        prop_assert!((a + c).abs() <= 1e-10 * (1.0 + a.abs() + c.abs()));
    }

    #[test]
    fn gfn1_and_csv_round_trip_bit_exact(f in grid_fn(3, 4)) {
        prop_assert_eq!(&from_bytes(&to_bytes(&f)).unwrap(), &f);
        prop_assert_eq!(&from_csv(to_csv(&f).as_bytes()).unwrap(), &f);
    }

    #[test]
    fn integrate_is_cell_weighted_sum(f in grid_fn(2, 8)) {
        let want: f64 = f.values().iter().sum::<f64>() / 64.0;
        prop_assert!((integrate(&f) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_duality_and_pairing_bound(f in grid_fn(1, 8), g in grid_fn(1, 8)) {
        prop_assume!(!f.is_zero());
        let e = ExponentTuple::new(3.0, vec![2.0]).unwrap();
        let fam = enumerate_cubes(f.geometry(), FamilyKind::Dyadic).unwrap();
        let r = duality_gap(&f, &e, &fam, &SolverParams::default()).unwrap();
        prop_assert!(r.lower <= r.upper + 1e-9 * r.upper.max(1.0));
        prop_assert!(r.reconstruction_residual <= 1e-9);
        prop_assert!(r.witness_morrey_norm <= 1.0 + 1e-9);
        let m = morrey_norm(&g, &e, &fam).unwrap().value;
        prop_assert!(pairing(&f, &g, true).unwrap() <= r.upper * m * (1.0 + 1e-9));
    }

    #[test]
    fn block_norm_is_homogeneous(f in grid_fn(1, 8), c in 0.1f64..10.0) {
        prop_assume!(!f.is_zero());
        let e = ExponentTuple::new(3.0, vec![2.0]).unwrap();
        let fam = enumerate_cubes(f.geometry(), FamilyKind::Dyadic).unwrap();
        let a = duality_gap(&f, &e, &fam, &SolverParams::default()).unwrap();
        let b = duality_gap(&f.scale(c), &e, &fam, &SolverParams::default()).unwrap();
        // Certified intervals for ‖cf‖ and c‖f‖ must overlap.
        prop_assert!(b.lower <= c * a.upper * (1.0 + 1e-9));
        prop_assert!(c * a.lower <= b.upper * (1.0 + 1e-9));
    }
}
