use proptest::prelude::*;
use wigner_fluct::ensembles::{sample_wigner, EnsembleSpec, Marginal, SeedDerivation};
use wigner_fluct::functions::Builtin;
use wigner_fluct::matrixfn::{
    apply_function_entries, apply_polynomial_entries, schur_field, schur_identity_residual, upsilon_error,
    ResolventMethod,
};
use wigner_fluct::semicircle::SpectralPoint;

fn ensembles() -> [EnsembleSpec; 3] {
    [EnsembleSpec::goe(1.0), EnsembleSpec::gue(1.0), EnsembleSpec::real_iid(Marginal::rademacher())]
}

#[test]
fn schur_corner_matches_dense_resolvent() {
    for (k, spec) in ensembles().iter().enumerate() {
        let x = sample_wigner(spec, 150, &SeedDerivation::new(11, k as u64, "schur")).unwrap();
        for z in [SpectralPoint::real(2.5), SpectralPoint::new(0.3, 1.0), SpectralPoint::new(-1.0, 0.05)] {
            let r = schur_identity_residual(&x, z, 3, &spec.params()).unwrap();
            assert!(r <= 1e-8, "{k}: residual {r:e} at {z:?}");
        }
    }
}

// The Schur expansion √N(R⁽ᵐ⁾ − g) = g²(W⁽ᵐ⁾ + Y) + O(N^{-1/2}): quadrupling N should
// roughly halve the remainder.
#[test]
fn upsilon_remainder_shrinks_like_inverse_root_n() {
    let spec = EnsembleSpec::goe(1.0);
    let p = spec.params();
    let z = [SpectralPoint::new(0.0, 2.0)];
    let mean_err = |n: usize| {
        let reps = 24;
        (0..reps)
            .map(|r| {
                let x = sample_wigner(&spec, n, &SeedDerivation::new(5, r, "upsilon")).unwrap();
                let f = schur_field(&x, &z, 2, &p, ResolventMethod::Dense).unwrap();
                upsilon_error(&x, &f, &p).unwrap()
            })
            .sum::<f64>()
            / reps as f64
    };
    let (small, large) = (mean_err(100), mean_err(400));
    let ratio = small / large;
    assert!((1.5..2.7).contains(&ratio), "ratio {ratio}: {small} vs {large}");
}

#[test]
fn spectral_and_polynomial_paths_agree() {
    for (k, spec) in ensembles().iter().enumerate() {
        let x = sample_wigner(spec, 120, &SeedDerivation::new(2, k as u64, "paths")).unwrap();
        let coeffs = [0.5, -1.0, 0.0, 2.0];
        let a = apply_function_entries(&x, &Builtin::Polynomial { coeffs: coeffs.to_vec() }, 4).unwrap();
        let b = apply_polynomial_entries(&x, &coeffs, 4).unwrap();
        let dev = (&a - &b).norm_max();
        assert!(dev <= 1e-11, "{k}: {dev:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn samples_are_self_adjoint_and_reproducible(seed in any::<u64>(), n in 2usize..40, which in 0usize..3) {
        let spec = ensembles()[which];
        let s = SeedDerivation::new(seed, 0, "prop");
        let a = sample_wigner(&spec, n, &s).unwrap();
        let b = sample_wigner(&spec, n, &s).unwrap();
        prop_assert!(a.is_exactly_self_adjoint());
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a.entry(i, j), b.entry(i, j));
            }
        }
    }
}
