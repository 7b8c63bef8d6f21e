use approx::assert_abs_diff_eq;
use mipt_shadows::circuit::*;
use mipt_shadows::dense::DenseState;
use mipt_shadows::infopower::*;
use mipt_shadows::seed::rng_from;
use mipt_shadows::settings::EULER_GAMMA;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

/// Explicit formula for non-degenerate spectra.
fn subentropy_explicit(l: &[f64]) -> f64 {
    let mut q = 0.0;
    for (j, &lj) in l.iter().enumerate() {
        let mut den = 1.0;
        for (k, &lk) in l.iter().enumerate() {
            if k != j {
                den *= 1.0 - lk / lj;
            }
        }
        q -= lj * lj.ln() / den;
    }
    q
}

#[test]
fn delta_h_values() {
    assert_abs_diff_eq!(delta_h(1.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-15);
    assert_abs_diff_eq!(delta_h(2.0).unwrap(), 1.5 - 2f64.ln() - EULER_GAMMA, epsilon = 1e-15);
    assert_abs_diff_eq!(delta_h(1e6).unwrap() * 2e6, 1.0, epsilon = 1e-5);
    assert!(delta_h(0.0).is_err());
    // the two branches agree where they meet
    let direct: f64 = (1..=65).map(|j| 1.0 / j as f64).sum::<f64>() - 65f64.ln() - EULER_GAMMA;
    assert_abs_diff_eq!(delta_h(65.0).unwrap(), direct, epsilon = 1e-14);
    for x in 1..200 {
        assert!(delta_h(x as f64).unwrap() > delta_h(x as f64 + 1.0).unwrap());
    }
}

#[test]
fn subentropy_known_values() {
    assert_eq!(subentropy_spectrum(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
    assert_abs_diff_eq!(subentropy_spectrum(&[0.5, 0.5]).unwrap(), 2f64.ln() - 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(subentropy_spectrum(&[0.7, 0.3]).unwrap(), subentropy_explicit(&[0.7, 0.3]), epsilon = 1e-10);
    assert!(subentropy_spectrum(&[0.5, 0.4]).is_err());
}

#[test]
fn flat_spectra_match_stabilizer_form() {
    for s in 0..=6u32 {
        let r = 1usize << s;
        let spec = vec![1.0 / r as f64; r];
        let a = subentropy_spectrum(&spec).unwrap();
        let b = subentropy_stabilizer(s as f64, 2.0, 6).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(subentropy_stabilizer(40.0, 2.0, 40).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-11);
}

proptest! {
    #[test]
    fn subentropy_matches_explicit_formula(raw in prop::collection::vec(0.05f64..1.0, 2..6)) {
        let t: f64 = raw.iter().sum();
        let l: Vec<f64> = raw.iter().map(|x| x / t).collect();
        let mut sorted = l.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 0.02));
        let q = subentropy_spectrum(&l).unwrap();
        prop_assert!((q - subentropy_explicit(&l)).abs() < 1e-8);
        prop_assert!(q >= 0.0 && q < 1.0 - EULER_GAMMA);
    }
}

#[test]
fn renyi2_values() {
    assert_abs_diff_eq!(infopower_renyi2(0.25, 4.0).unwrap(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(infopower_renyi2(0.5, 4.0).unwrap(), 1.2f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!(infopower_renyi2(1.0, 1e12).unwrap(), 2f64.ln(), epsilon = 1e-11);
    assert!(infopower_renyi2(0.1, 4.0).is_err());
}

#[test]
fn clifford_infopower_limits() {
    let w = infopower_clifford(&[4.0; 10], 2.0, 4).unwrap();
    assert_eq!(w.value, 0.0);
    let w = infopower_clifford(&[0.0; 10], 2.0, 30).unwrap();
    assert_abs_diff_eq!(w.value, 1.0 - EULER_GAMMA, epsilon = 1e-9);
}

#[test]
fn mutual_information_limits() {
    let d = 4;
    let states: Vec<DMatrix<C64>> = (0..d).map(|x| DenseState::basis_state(2, x).unwrap().matrix()).collect();
    let priors = vec![0.25; d];
    let id = vec![DMatrix::<C64>::identity(d, d)];
    assert_abs_diff_eq!(mutual_information_exhaustive(&priors, &states, &id).unwrap(), 0.0, epsilon = 1e-15);
    let z: Vec<DMatrix<C64>> = states.clone();
    assert_abs_diff_eq!(mutual_information_exhaustive(&priors, &states, &z).unwrap(), 4f64.ln(), epsilon = 1e-12);
}

#[test]
fn monitored_povm_information_is_bounded() {
    let spec = MonitoredCircuitSpec::new(2, 1, 0.7, GateEnsemble::Haar).with_prescramble(Prescramble::GlobalHaar);
    let real = realize(&spec, 3).unwrap();
    let povm = povm_from_realization(&real).unwrap();
    let d = 4.0;
    let mut rng = rng_from(1);
    let states: Vec<DMatrix<C64>> = (0..200)
        .map(|_| {
            let v = mipt_shadows::haar::haar_state(4, &mut rng);
            &v * v.adjoint()
        })
        .collect();
    let priors = vec![1.0 / 200.0; 200];
    let info = mutual_information_exhaustive(&priors, &states, &povm).unwrap();
    // informational power of the POVM from its dual ensemble
    let mut w = -delta_h(d).unwrap();
    for e in &povm {
        let pi = e.trace().re / d;
        if pi <= 0.0 {
            continue;
        }
        let sigma = DenseState::from_matrix(2, e).unwrap();
        let q = subentropy_spectrum(&sigma.spectrum().unwrap()).unwrap();
        w += pi * (1.0 - EULER_GAMMA - q);
    }
    assert!(info >= 0.0);
    assert!(info <= w + 1e-9, "{info} > {w}");
}
