use kernelspect_core::modes::{scores, CompressionMode};
use kernelspect_core::spectra::{
    characteristic_coeffs, determinant, eigenvalues, gram_eigenvalues, oracle_roots, spectral_norm, summarize,
    ComplexValue, Kernel,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    (1usize..=3, -12i32..=2, prop::collection::vec(-1.0f64..1.0, 9)).prop_map(|(n, e, w)| {
        let s = 10f64.powi(e);
        Kernel::new(n, &w[..n * n].iter().map(|v| v * s).collect::<Vec<_>>()).unwrap()
    })
}

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

fn exact_coeffs(k: &Kernel) -> (BigRational, BigRational, BigRational) {
    let n = k.n();
    let m: Vec<BigRational> = k.entries().iter().map(|&v| q(v)).collect();
    let a = |i: usize, j: usize| &m[n * i + j];
    match n {
        1 => (a(0, 0).clone(), BigRational::zero(), a(0, 0).clone()),
        2 => {
            let d = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
            (a(0, 0) + a(1, 1), d.clone(), d)
        }
        _ => {
            let minor = |i: usize, j: usize| a(i, i) * a(j, j) - a(i, j) * a(j, i);
            let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
            (a(0, 0) + a(1, 1) + a(2, 2), minor(0, 1) + minor(0, 2) + minor(1, 2), det)
        }
    }
}

fn close(x: f64, exact: &BigRational, scale: f64) -> bool {
    let err = (q(x) - exact).abs().to_f64().unwrap();
    err <= 8.0 * f64::EPSILON * scale
}

fn multiset_distance(a: &[ComplexValue], b: &[ComplexValue]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, r| p.1.total_cmp(&r.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn summary_invariants(k in kernel_strategy()) {
        let s = summarize(&k);
        prop_assert!(s.check_invariants(&k).is_ok(), "{:?}", s.check_invariants(&k));
        let sc = scores(&s, &k);
        prop_assert!(sc.iter().all(|v| v.is_finite() && *v >= 0.0));
        let g = gram_eigenvalues(&k);
        prop_assert!(g.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(g.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn power_of_two_scaling_is_exact(k in kernel_strategy(), e in -20i32..20) {
        let c = 2f64.powi(e);
        let scaled = Kernel::new(k.n(), &k.entries().iter().map(|v| v * c).collect::<Vec<_>>()).unwrap();
        let (a, b) = (eigenvalues(&k), eigenvalues(&scaled));
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x * c, *y);
        }
        prop_assert_eq!(spectral_norm(&k) * c, spectral_norm(&scaled));
    }

    #[test]
    fn coefficients_match_rational_oracle(k in kernel_strategy()) {
        let s = k.max_abs().max(1e-300);
        let cp = characteristic_coeffs(&k);
        let (tr, minors, det) = exact_coeffs(&k);
        prop_assert!(close(cp.trace, &tr, s));
        prop_assert!(close(cp.minor_sum, &minors, s * s));
        prop_assert!(close(cp.det, &det, s.powi(k.n() as i32)));
        prop_assert_eq!(cp.det, determinant(&k));
    }

    #[test]
    fn transpose_and_permutation_preserve_spectrum(k in kernel_strategy()) {
        let n = k.n();
        let t: Vec<f64> = (0..n * n).map(|i| k.get(i % n, i / n)).collect();
        let kt = Kernel::new(n, &t).unwrap();
        let s = k.max_abs().max(1e-300);
        prop_assert!(multiset_distance(&eigenvalues(&k), &eigenvalues(&kt)) <= 1e-7 * s);
        prop_assert!((spectral_norm(&k) - spectral_norm(&kt)).abs() <= 1e-12 * s);
        // reversing the index order is a permutation similarity
        let p: Vec<f64> = (0..n * n).map(|i| k.get(n - 1 - i / n, n - 1 - i % n)).collect();
        let kp = Kernel::new(n, &p).unwrap();
        prop_assert!(multiset_distance(&eigenvalues(&k), &eigenvalues(&kp)) <= 1e-7 * s);
    }

    #[test]
    fn roots_agree_with_durand_kerner(k in kernel_strategy()) {
        let s = k.max_abs();
        prop_assume!(s > 0.0);
        let unit = Kernel::new(k.n(), &k.entries().iter().map(|v| v / s).collect::<Vec<_>>()).unwrap();
        let dk = oracle_roots(&characteristic_coeffs(&unit).coefficients(k.n())).unwrap();
        let ev: Vec<ComplexValue> = eigenvalues(&k).iter().map(|z| z / s).collect();
        prop_assert!(multiset_distance(&ev, &dk) <= 1e-6);
    }
}

/// S·diag(d)·S⁻¹ with S = [[1,1,0],[0,1,1],[1,0,1]] (det 2), computed exactly in rationals first.
fn similar_to_diagonal(d: [f64; 3]) -> Kernel {
    let s = [[1, 1, 0], [0, 1, 1], [1, 0, 1]];
    let inv2 = [[1, -1, 1], [1, 1, -1], [-1, 1, 1]];
    let mut w = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = BigRational::zero();
            for (l, dl) in d.iter().enumerate() {
                acc += q(*dl) * BigRational::from_integer(BigInt::from(s[i][l] * inv2[l][j]));
            }
            w[3 * i + j] = (acc / BigRational::from_integer(BigInt::from(2))).to_f64().unwrap();
        }
    }
    Kernel::new(3, &w).unwrap()
}

#[test]
fn near_repeated_real_roots() {
    for gap in [0.0, 1e-15, 1e-12, 1e-9, 1e-6, 1e-3] {
        let k = similar_to_diagonal([1.0, 1.0 + gap, -0.5]);
        let ev = eigenvalues(&k);
        let want = [ComplexValue::new(1.0 + gap, 0.0), ComplexValue::new(1.0, 0.0), ComplexValue::new(-0.5, 0.0)];
        // a double root is only determined to about sqrt(eps)
        let d = multiset_distance(&ev, &want);
        assert!(d < 1e-7, "gap {gap:e}: {ev:?}");
        assert!(summarize(&k).check_invariants(&k).is_ok(), "gap {gap:e}");
    }
}

#[test]
fn triple_root_with_jordan_block() {
    let k = Kernel::from_rows([[2.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 2.0]]).unwrap();
    for z in eigenvalues(&k) {
        // a 3-block perturbs by about eps^(1/3)
        assert!((z - ComplexValue::new(2.0, 0.0)).norm() < 1e-4, "{z}");
    }
    assert_eq!(determinant(&k), 8.0);
}

#[test]
fn complex_pair_merging_into_real_axis() {
    for b in [1e-2, 1e-5, 1e-8] {
        // eigenvalues 1 ± i·b and 3
        let k = Kernel::from_rows([[1.0, -b, 0.0], [b, 1.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        let ev = eigenvalues(&k);
        let want = [ComplexValue::new(3.0, 0.0), ComplexValue::new(1.0, b), ComplexValue::new(1.0, -b)];
        assert!(multiset_distance(&ev, &want) < 1e-7, "b {b:e}: {ev:?}");
    }
}

#[test]
fn tiny_and_huge_scales() {
    for s in [1e-150, 1e-30, 1e30, 1e150] {
        let k = Kernel::from_rows([[0.0, -s, 0.0], [s, 0.0, 0.0], [0.0, 0.0, 0.5 * s]]).unwrap();
        let sm = summarize(&k);
        assert!((sm.spectral_radius() - s).abs() <= 1e-14 * s);
        assert!((sm.spectral_norm - s).abs() <= 1e-14 * s);
        assert!(sm.check_invariants(&k).is_ok());
        assert_eq!(sm.complex_count(), 2);
    }
}

#[test]
fn real_variant_scores_never_exceed() {
    let k = Kernel::from_rows([[0.0, -1e-3, 0.0], [1e-3, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let s = summarize(&k);
    let sc = scores(&s, &k);
    assert!(sc[CompressionMode::MinEigReal.index()] < 1e-15);
    assert!(sc[CompressionMode::MinEig.index()] > 9e-4);
    assert!(sc[CompressionMode::SpectralRadiusReal.index()] <= sc[CompressionMode::SpectralRadius.index()]);
}
