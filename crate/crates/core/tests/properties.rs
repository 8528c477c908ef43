use std::path::Path;

use proptest::prelude::*;

use euler_stat::field_io::{decode_field, encode_field};
use euler_stat::leray::{divergence_norm, PoissonSolver};
use euler_stat::mesh::{div_h, grad_h, l2_inner, l2_norm, prolong, restrict, GridSpec, ScalarField, VectorField};
use euler_stat::rng::SeededRng;
use euler_stat::stats::{draw_tuples, moments, structure_function, wasserstein_on_tuples};

fn grid() -> impl Strategy<Value = GridSpec> {
    (2usize..6, 2usize..6).prop_map(|(a, b)| GridSpec::new(2 * a, 2 * b).unwrap())
}

fn field(g: GridSpec, seed: u64, scale: f64) -> VectorField {
    let mut rng = SeededRng::new(seed, 0);
    VectorField::from_fn(g, |_, _| (scale * rng.symmetric(), scale * rng.symmetric()))
}

fn ensemble(g: GridSpec, m: usize, seed: u64) -> Vec<VectorField> {
    (0..m as u64).map(|i| field(g, seed.wrapping_mul(1000).wrapping_add(i), 1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_file_round_trip(g in grid(), seed in any::<u64>(), t in -1e3f64..1e3) {
        let f = field(g, seed, 1e3);
        let (back, time) = decode_field(&encode_field(&f, t), Path::new("mem")).unwrap();
        prop_assert_eq!(back, f);
        prop_assert_eq!(time.to_bits(), t.to_bits());
    }

    #[test]
    fn truncated_files_are_rejected(g in grid(), cut in 1usize..64) {
        let bytes = encode_field(&field(g, 1, 1.0), 0.0);
        let cut = cut.min(bytes.len());
        prop_assert!(decode_field(&bytes[..bytes.len() - cut], Path::new("mem")).is_err());
    }

    #[test]
    fn gradient_is_minus_adjoint_of_divergence(g in grid(), seed in any::<u64>()) {
        let w = field(g, seed, 1.0);
        let mut rng = SeededRng::new(seed, 1);
        let psi = ScalarField::from_fn(g, |_, _| rng.symmetric());
        let a = l2_inner(&w, &grad_h(&psi)).unwrap();
        let d = div_h(&w);
        let b: f64 = psi.values().iter().zip(d.values()).map(|(x, y)| x * y).sum::<f64>() * g.cell_area();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
    }

    #[test]
    fn projection_is_an_orthogonal_projection(n in 2usize..5, seed in any::<u64>()) {
        let g = GridSpec::square(4 * n).unwrap();
        let solver = PoissonSolver::new(g).unwrap();
        let w = field(g, seed, 2.0);
        let pw = solver.project(&w).unwrap();
        let nw = l2_norm(&w);
        prop_assert!(l2_norm(&pw) <= nw);
        prop_assert!(l2_norm(&solver.project(&pw).unwrap().sub(&pw)) <= 1e-11 * nw);
        prop_assert!(l2_inner(&pw, &w.sub(&pw)).unwrap().abs() <= 1e-11 * nw * nw);
        prop_assert!(divergence_norm(&pw) <= 1e-10 * nw / g.h());
    }

    #[test]
    fn restriction_undoes_prolongation(g in grid(), seed in any::<u64>(), factor in 1usize..4) {
        let f = field(g, seed, 1.0);
        let back = restrict(&prolong(&f, factor).unwrap(), factor).unwrap();
        prop_assert_eq!(back.grid(), g);
        prop_assert!(l2_norm(&back.sub(&f)) <= 1e-15 * l2_norm(&f));
    }

    #[test]
    fn constant_ensemble_has_zero_variance(g in grid(), seed in any::<u64>(), m in 1usize..6) {
        let f = field(g, seed, 1.0);
        let mo = moments(&vec![f.clone(); m]).unwrap();
        prop_assert_eq!(mo.mean, f);
        prop_assert_eq!(l2_norm(&mo.variance), 0.0);
    }

    #[test]
    fn structure_function_ignores_constant_shifts(seed in any::<u64>(), c in -3.0f64..3.0, p in 1.0f64..3.0) {
        let g = GridSpec::square(8).unwrap();
        let a = ensemble(g, 3, seed);
        let shifted: Vec<VectorField> = a.iter().map(|f| f.add(&VectorField::constant(g, c, -c))).collect();
        let scaled: Vec<VectorField> = a.iter().map(|f| f.scaled(2.0)).collect();
        let s = structure_function(&a, p, 3, 0.0).unwrap();
        let s_shift = structure_function(&shifted, p, 3, 0.0).unwrap();
        let s_scale = structure_function(&scaled, p, 3, 0.0).unwrap();
        for l in 0..3 {
            prop_assert!((s.values[l] - s_shift.values[l]).abs() <= 1e-12 * s.values[l]);
            prop_assert!((2.0 * s.values[l] - s_scale.values[l]).abs() <= 1e-12 * s.values[l]);
        }
    }

    #[test]
    fn w1_of_a_translate_is_the_shift_length(
        seed in any::<u64>(), m in 1usize..6, k in 1usize..4, cu in -2.0f64..2.0, cv in -2.0f64..2.0,
    ) {
        let g = GridSpec::square(4).unwrap();
        let a = ensemble(g, m, seed);
        let b: Vec<VectorField> = a.iter().map(|f| f.add(&VectorField::constant(g, cu, cv))).collect();
        let tuples = draw_tuples(g, k, 5, seed).unwrap();
        let w = wasserstein_on_tuples(&a, &b, &tuples).unwrap();
        let want = (k as f64).sqrt() * (cu * cu + cv * cv).sqrt();
        prop_assert!((w - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn w1_is_homogeneous_and_translation_invariant(
        seed in any::<u64>(), m in 1usize..6, k in 1usize..4, s in 0.1f64..4.0, c in -2.0f64..2.0,
    ) {
        let g = GridSpec::square(4).unwrap();
        let a = ensemble(g, m, seed);
        let b = ensemble(g, m, seed.wrapping_add(1));
        let tuples = draw_tuples(g, k, 5, seed).unwrap();
        let w = wasserstein_on_tuples(&a, &b, &tuples).unwrap();
        let map = |e: &[VectorField], f: &dyn Fn(&VectorField) -> VectorField| -> Vec<VectorField> {
            e.iter().map(f).collect()
        };
        let scale = |f: &VectorField| f.scaled(s);
        let shift = |f: &VectorField| f.add(&VectorField::constant(g, c, 2.0 * c));
        let ws = wasserstein_on_tuples(&map(&a, &scale), &map(&b, &scale), &tuples).unwrap();
        let wt = wasserstein_on_tuples(&map(&a, &shift), &map(&b, &shift), &tuples).unwrap();
        prop_assert!((ws - s * w).abs() <= 1e-12 * (s * w).max(1.0));
        prop_assert!((wt - w).abs() <= 1e-12 * w.max(1.0));
        let wba = wasserstein_on_tuples(&b, &a, &tuples).unwrap();
        prop_assert!((w - wba).abs() <= 1e-12 * w.max(1.0));
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = SeededRng::new(seed, stream);
        let mut b = SeededRng::new(seed, stream);
        let mut c = SeededRng::new(seed, stream.wrapping_add(1));
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        prop_assert_eq!(&xs, &ys);
        prop_assert_ne!(xs, zs);
    }
}
