use num_complex::Complex64;
use proptest::prelude::*;

use semidim_core::pressure::PartitionLevel;
use semidim_core::render::{backward_cloud, classify_point, PixelClass};
use semidim_core::semigroup::{word_inverse_images, BackwardTree, GeneratorSystem, TreeOptions, Word};
use semidim_core::{MapExpr, RootOptions, SpherePoint};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Horner value and derivative, kept separate from the library's evaluator.
fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for a in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn coeff_strategy() -> impl Strategy<Value = Vec<Complex64>> {
    (1usize..=3).prop_flat_map(|d| {
        (
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d),
            (0.5f64..2.0, -1.0f64..1.0),
        )
            .prop_map(|(low, (lr, li))| {
                let mut v: Vec<Complex64> = low.into_iter().map(|(a, b)| c(a, b)).collect();
                v.push(c(lr, li));
                v
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_rule_matches_dual_number_product(
        polys in prop::collection::vec(coeff_strategy(), 1..=3),
        word in prop::collection::vec(0usize..3, 1..=6),
        (zr, zi) in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let maps: Vec<MapExpr> = polys.iter().map(|p| MapExpr::poly(p.clone()).unwrap()).collect();
        let word: Vec<usize> = word.into_iter().map(|i| i % maps.len()).collect();
        let composed = MapExpr::compose(word.iter().map(|&i| maps[i].clone()).collect()).unwrap();
        let z0 = c(zr, zi);
        let mut z = z0;
        let mut d = c(1.0, 0.0);
        for &i in &word {
            let (p, dp) = horner(&polys[i], z);
            d *= dp;
            z = p;
        }
        prop_assume!(z.norm() < 1e12 && d.norm() > 1e-200);
        let oracle = d.norm() * (1.0 + z0.norm_sqr()) / (1.0 + z.norm_sqr());
        let got = composed.sph_deriv_norm(SpherePoint::Finite(z0)).unwrap();
        prop_assert!(((got - oracle) / oracle).abs() <= 1e-10, "got {got}, oracle {oracle}");
    }

    #[test]
    fn preimage_multiplicities_sum_to_degree(
        p in coeff_strategy(),
        power in 1u32..=2,
        (xr, xi) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        prop_assume!(p.len() >= 3 || power == 1);
        let f = MapExpr::iterate(MapExpr::poly(p).unwrap(), power).unwrap();
        let pre = f.inverse_images(SpherePoint::new(xr, xi), &RootOptions::default()).unwrap();
        prop_assert_eq!(pre.iter().map(|(_, m)| m).sum::<u64>(), f.degree());
    }

    #[test]
    fn derivative_agrees_across_charts(p in coeff_strategy(), (zr, zi) in (-3.0f64..3.0, -3.0f64..3.0)) {
        let f = MapExpr::poly(p).unwrap();
        let z = SpherePoint::new(zr, zi);
        prop_assume!(zr.abs() + zi.abs() > 0.05);
        let a = f.sph_deriv_norm(z).unwrap();
        let b = f.sph_deriv_norm_inverted_chart(z).unwrap();
        prop_assume!(a > 1e-12);
        prop_assert!(((a - b) / a).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn rotation_invariance_on_the_circle(d in 2usize..=3, theta in 0.0f64..std::f64::consts::TAU, t in 0.0f64..2.0) {
        let mut coeffs = vec![c(0.0, 0.0); d + 1];
        coeffs[d] = c(1.0, 0.0);
        let sys = GeneratorSystem::new(vec![MapExpr::poly(coeffs).unwrap()]).unwrap();
        let at = |x: SpherePoint| {
            let tree = BackwardTree::build(&sys, x, 4, TreeOptions::default()).unwrap();
            PartitionLevel::from_tree(&tree, 4).unwrap().log_z(t)
        };
        let a = at(SpherePoint::real(1.0));
        let b = at(SpherePoint::Finite(Complex64::from_polar(1.0, theta)));
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn escape_class_is_monotone_in_depth((zr, zi) in (-1.5f64..1.5, -1.5f64..1.5), n in 1usize..12) {
        let gens = [MapExpr::poly_real(&[0.0, 0.0, 1.0]).unwrap(), MapExpr::poly_real(&[0.0, 0.0, 0.0, 0.01]).unwrap()];
        let z = c(zr, zi);
        let a = classify_point(&gens, z, n, 20.0, 1_000_000).unwrap();
        let b = classify_point(&gens, z, n + 1, 20.0, 1_000_000).unwrap();
        if a == PixelClass::AllEscape {
            prop_assert_eq!(b, PixelClass::AllEscape);
        }
    }
}

fn pair() -> GeneratorSystem {
    GeneratorSystem::new(vec![
        MapExpr::poly_real(&[0.0, 0.0, 1.0]).unwrap(),
        MapExpr::poly_real(&[0.0, 0.0, 0.0, 0.01]).unwrap(),
    ])
    .unwrap()
}

#[test]
fn tree_leaves_match_word_preimages() {
    let sys = pair();
    let x = SpherePoint::new(0.7, 0.9);
    let tree = BackwardTree::build(&sys, x, 2, TreeOptions::default()).unwrap();
    let mut from_tree: Vec<(Vec<usize>, f64)> = (0..tree.level(2).unwrap().len())
        .map(|i| (tree.word_of(2, i).unwrap().0, tree.level(2).unwrap()[i].log_deriv_sum))
        .collect();
    let mut from_words = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let w = Word(vec![a, b]);
            for leaf in word_inverse_images(&sys, &w, x, &RootOptions::default()).unwrap() {
                from_words.push((w.0.clone(), leaf.log_deriv_sum));
            }
        }
    }
    let key = |v: &(Vec<usize>, f64)| (v.0.clone(), (v.1 * 1e6).round() as i64);
    from_tree.sort_by_key(key);
    from_words.sort_by_key(key);
    assert_eq!(from_tree.len(), from_words.len());
    for (a, b) in from_tree.iter().zip(&from_words) {
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() < 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn log_partition_is_decreasing_and_convex_in_t() {
    let sys = pair();
    let tree = BackwardTree::build(&sys, SpherePoint::real(1.0), 5, TreeOptions::default()).unwrap();
    let level = PartitionLevel::from_tree(&tree, 5).unwrap();
    let ts: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
    let z: Vec<f64> = ts.iter().map(|&t| level.log_z(t)).collect();
    for w in z.windows(2) {
        assert!(w[1] < w[0]);
    }
    for w in z.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
    }
}

#[test]
fn seeded_clouds_are_reproducible() {
    let sys = pair();
    let opts = RootOptions::default();
    let a = backward_cloud(&sys, SpherePoint::real(1.0), 2000, 20, 42, &opts).unwrap();
    let b = backward_cloud(&sys, SpherePoint::real(1.0), 2000, 20, 42, &opts).unwrap();
    let c = backward_cloud(&sys, SpherePoint::real(1.0), 2000, 20, 43, &opts).unwrap();
    assert_eq!(a.points, b.points);
    assert_ne!(a.points, c.points);
}
