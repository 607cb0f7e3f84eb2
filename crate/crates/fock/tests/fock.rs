use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

use pmqkd::model::poisson_pmf;
use pmqkd_fock::report::odd_state_fidelity_closed_form;
use pmqkd_fock::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn coherent_pair_has_poisson_photon_numbers() {
    let v = coherent_pair(c(0.5), c(0.5), 20);
    let dist = v.photon_number_distribution();
    for (k, p) in dist.iter().enumerate() {
        assert!(
            (p - poisson_pmf(0.5, k as u64)).abs() < 1e-15 + v.leakage(),
            "k = {k}"
        );
    }
    let big = coherent_pair(c(0.7), Complex64::from_polar(0.7, 1.1), 40);
    assert!((big.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn parity_weights_of_a_coherent_pair() {
    // Total intensity 0.5: p_even - p_odd = sum (-1)^k P(k) = e^{-1}.
    let parts = parity_decompose(&coherent_pair(c(0.5), c(0.5), 40)).unwrap();
    assert!((parts.p_even - parts.p_odd - 0.36787944117144233).abs() < 1e-14);
    assert!((parts.p_even + parts.p_odd - 1.0).abs() < 1e-10);

    let single = FockVector::basis(0, 1, 4).unwrap();
    let parts = parity_decompose(&single).unwrap();
    assert_eq!(parts.odd, single);
    assert_eq!(parts.even.norm_sqr(), 0.0);
    assert_eq!((parts.p_odd, parts.p_even), (1.0, 0.0));
}

#[test]
fn pseudo_fock_fidelity_with_two_slices() {
    // F^2 = 1 / (1 + 1/3! + 1/5! + ...) = 1 / sinh(1).
    let lambda = discrete_pseudo_fock(1.0, 2, 1, 0.0, 40).unwrap();
    let single = k_photon_component(0.0, 1, 40).unwrap();
    let f = fidelity_pure(&lambda, &single).unwrap();
    assert!((f * f - 0.8509181282393215).abs() < 1e-14);
}

#[test]
fn pseudo_fock_infidelity_oracles() {
    let single = k_photon_component(0.0, 1, 40).unwrap();
    for (mu, d, want) in [
        (0.5, 8, 1.0764577706036254e-8),
        (1.0, 16, 2.8114572543455129e-15),
        (1.0, 8, 2.7557243311725298e-6),
    ] {
        let lambda = discrete_pseudo_fock(mu, d, 1, 0.0, 40).unwrap();
        let got = pure_infidelity(&lambda, &single).unwrap();
        assert!(
            (got - want).abs() < 1e-12 * want,
            "mu = {mu}, D = {d}: {got:e}"
        );
    }
}

#[test]
fn many_slices_recover_the_fock_state() {
    // mu^D / (D + 1)! < 1e-20 for D = 24 and mu = 0.5.
    for k in 0..3 {
        let lambda = discrete_pseudo_fock(0.5, 24, k, 0.4, 40).unwrap();
        let fock = k_photon_component(0.4, k as usize, 40).unwrap();
        assert!(lambda.sub(&fock).unwrap().norm_sqr().sqrt() < 1e-9);
    }
}

#[test]
fn pseudo_fock_mixture_equals_discrete_phase_average() {
    let (mu, d, k) = (0.6, 4, 14);
    let averaged = phase_averaged_pair(mu, 0.3, d as usize, k).unwrap();
    let mixture = pseudo_fock_mixture(mu, d, 0.3, k).unwrap();
    // The truncated pseudo-Fock states lose their tails, so compare on the kept space.
    assert!(averaged.distance(&mixture).unwrap() < 1e-9);
}

#[test]
fn odd_state_fidelity_matches_closed_form() {
    let a = parity_mixture(0.5, true, 16).unwrap();
    let b = parity_mixture(0.1, true, 16).unwrap();
    let f = fidelity(&a, &b).unwrap();
    assert!((f - 0.9869104287630038).abs() < 1e-12);
    assert!((odd_state_fidelity_closed_form(0.5, 0.1) - 0.9869104287630038).abs() < 1e-15);
    let bound = yield_deviation_bound(f).unwrap();
    assert!((bound - (1.0 - f * f).sqrt()).abs() < 1e-15);
}

#[test]
fn single_photon_mixture_is_phase_independent() {
    let target = DensityMatrix::mixture(
        3,
        &[
            (0.5, &FockVector::basis(1, 0, 3).unwrap()),
            (0.5, &FockVector::basis(0, 1, 3).unwrap()),
        ],
    )
    .unwrap();
    for delta in [0.0, 0.3, PI / 2.0] {
        assert!(
            key_mixed_k_photon(delta, 1, 3)
                .unwrap()
                .distance(&target)
                .unwrap()
                < 1e-12
        );
    }
    // Two photons keep a phase dependence.
    let a = key_mixed_k_photon(0.0, 2, 3).unwrap();
    let b = key_mixed_k_photon(0.3, 2, 3).unwrap();
    assert!(a.distance(&b).unwrap() > 0.01);
}

#[test]
fn continuous_phase_average_is_the_fock_mixture() {
    let sampled = phase_averaged_pair(0.8, 0.7, 1 << 10, 12).unwrap();
    let exact = fock_mixture(0.8, 0.7, 12).unwrap();
    assert!(sampled.distance(&exact).unwrap() < 1e-8);
}

#[test]
fn verification_report_passes() {
    let report = verify_symmetry(&VerifyOptions::default()).unwrap();
    let failed: Vec<_> = report.rows.iter().filter(|r| !r.pass).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(report.rows_for("discrete_infidelity").count(), 20);
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("check,mu,nu,slices,delta,value,bound,leakage,pass\n"));
    assert_eq!(text.lines().count(), report.rows.len() + 1);
}

fn random_state(k_max: usize) -> impl Strategy<Value = FockVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dimension(k_max)).prop_map(move |raw| {
        let amps = raw
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect::<Vec<_>>();
        FockVector::from_amplitudes(k_max, nalgebra::DVector::from_vec(amps))
            .unwrap()
            .normalized()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parity_projections_are_u_eigenvectors(psi in random_state(8)) {
        let u = FockOperator::encoding_u(8);
        let parts = parity_decompose(&psi).unwrap();
        prop_assert!((parts.p_odd + parts.p_even - psi.norm_sqr()).abs() < 1e-10);
        let o = FockOperator::parity_odd(8).apply(&psi).unwrap();
        let e = FockOperator::parity_even(8).apply(&psi).unwrap();
        prop_assert!(u.apply(&o).unwrap().add(&o).unwrap().norm_sqr().sqrt() < 1e-10);
        prop_assert!(u.apply(&e).unwrap().sub(&e).unwrap().norm_sqr().sqrt() < 1e-10);
    }

    #[test]
    fn parity_mixtures_are_u_invariant(a in random_state(6), b in random_state(6), w in 0.0..1.0f64) {
        let u = FockOperator::encoding_u(6);
        let odd = FockOperator::parity_odd(6).apply(&a).unwrap().normalized();
        let even = FockOperator::parity_even(6).apply(&b).unwrap().normalized();
        let rho = DensityMatrix::mixture(6, &[(w, &odd), (1.0 - w, &even)]).unwrap();
        prop_assert!(u.conjugate(&rho).unwrap().distance(&rho).unwrap() < 1e-10);
        // The raw state carries cross-parity coherence unless one parity vanishes.
        let raw = a.projector();
        let p = parity_decompose(&a).unwrap();
        if p.p_odd > 1e-6 && p.p_even > 1e-6 {
            prop_assert!(u.conjugate(&raw).unwrap().distance(&raw).unwrap() > 0.0);
        }
        // Twirling removes the coherence.
        let t = raw.twirl().unwrap();
        prop_assert!(u.conjugate(&t).unwrap().distance(&t).unwrap() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in random_state(3), b in random_state(3)) {
        let f = fidelity_pure(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity_pure(&b, &a).unwrap()).abs() < 1e-14);
        prop_assert!((pure_infidelity(&a, &b).unwrap() - (1.0 - f * f)).abs() < 1e-12);
        let g = fidelity(&a.projector(), &b.projector()).unwrap();
        prop_assert!((g - f).abs() < 1e-7);
    }
}
