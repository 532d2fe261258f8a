use proptest::prelude::*;

use stochlie::fields::{check_involutive, lie_closure, PolyVectorField};
use stochlie::noise::{sample_brownian, IteratedIntegralTable, MultiIndex, TimeGrid};

/// Fields on R^2 with at most four integer-coefficient terms of degree <= 3.
fn integer_field() -> impl Strategy<Value = PolyVectorField> {
    prop::collection::vec((0usize..2, -3i32..=3, 0u32..=3, 0u32..=3), 0..=4).prop_map(|terms| {
        let terms: Vec<(usize, f64, Vec<u32>)> = terms
            .into_iter()
            .filter(|&(_, _, a, b)| a + b <= 3)
            .map(|(c, k, a, b)| (c, f64::from(k), vec![a, b]))
            .collect();
        PolyVectorField::from_terms(2, terms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bracket_is_antisymmetric(x in integer_field(), y in integer_field()) {
        let s = x.bracket(&y).unwrap().add(&y.bracket(&x).unwrap()).unwrap();
        prop_assert!(s.is_zero());
        prop_assert!(x.bracket(&x).unwrap().is_zero());
    }

    #[test]
    fn jacobi_identity(x in integer_field(), y in integer_field(), z in integer_field()) {
        let a = x.bracket(&y.bracket(&z).unwrap()).unwrap();
        let b = y.bracket(&z.bracket(&x).unwrap()).unwrap();
        let c = z.bracket(&x.bracket(&y).unwrap()).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }

    #[test]
    fn diagonal_extension_is_a_homomorphism(x in integer_field(), y in integer_field(), copies in 1usize..=3) {
        let lhs = x.bracket(&y).unwrap().diagonal_extend(copies).unwrap();
        let rhs = x.diagonal_extend(copies).unwrap().bracket(&y.diagonal_extend(copies).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn discrete_shuffle_identity(seed in 0u64..1000, steps in 1usize..200) {
        let path = sample_brownian(TimeGrid::new(1.0, steps).unwrap(), 2, seed, 0).unwrap().with_time_component();
        let mut table = IteratedIntegralTable::new(&path);
        for (i, j) in [(0, 1), (1, 2), (0, 2), (1, 1)] {
            let ij = table.get(&MultiIndex::new(vec![i, j]).unwrap()).unwrap().to_vec();
            let ji = table.get(&MultiIndex::new(vec![j, i]).unwrap()).unwrap().to_vec();
            for k in 0..path.grid().len() {
                let prod = path.value(k, i) * path.value(k, j);
                prop_assert!((ij[k] + ji[k] - prod).abs() <= 1e-12 * (1.0 + prod.abs()));
            }
        }
    }

    #[test]
    fn involutivity_is_invariant_under_recombination(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
        px in -1.5f64..1.5, py in -1.5f64..1.5, pz in -1.5f64..1.5,
    ) {
        prop_assume!((a * d - b * c).abs() > 0.25);
        let contact = [
            PolyVectorField::partial(3, 0),
            PolyVectorField::from_terms(3, [(1, 1.0, vec![0, 0, 0]), (2, 1.0, vec![1, 0, 0])]).unwrap(),
        ];
        let affine = [
            PolyVectorField::partial(2, 0),
            PolyVectorField::linear(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
        ];
        let mix = |f: &[PolyVectorField; 2]| {
            vec![
                f[0].scale(a).axpy(b, &f[1]).unwrap(),
                f[0].scale(c).axpy(d, &f[1]).unwrap(),
            ]
        };
        let p3 = vec![vec![px, py, pz]];
        let p2 = vec![vec![px, py]];
        prop_assert!(!check_involutive(&mix(&contact), &p3, 1e-8).unwrap().involutive);
        prop_assert!(check_involutive(&mix(&affine), &p2, 1e-8).unwrap().involutive);
    }

    #[test]
    fn closure_is_idempotent(x in integer_field(), y in integer_field()) {
        let first = lie_closure(&[x, y], 8, 1e-9).unwrap();
        prop_assume!(first.closed && first.dimension > 0);
        let again = lie_closure(&first.basis, 8, 1e-9).unwrap();
        prop_assert!(again.closed);
        prop_assert_eq!(again.dimension, first.dimension);
    }
}
