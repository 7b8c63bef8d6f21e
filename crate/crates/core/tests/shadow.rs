use approx::assert_abs_diff_eq;
use mipt_shadows::circuit::*;
use mipt_shadows::dense::{pauli_matrix, DenseState};
use mipt_shadows::engine::Engine;
use mipt_shadows::ensemble::{moments_run, EntanglementFeature};
use mipt_shadows::error::Error;
use mipt_shadows::pauli::PauliString;
use mipt_shadows::seed::rng_from;
use mipt_shadows::shadow::*;
use mipt_shadows::stab::StabilizerMixedState;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn random_herm(d: usize, seed: u64) -> DMatrix<C64> {
    use rand::Rng;
    let mut rng = rng_from(seed);
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a + a.adjoint()
}

proptest! {
    #[test]
    fn feature_lambda_round_trip(p in prop::collection::vec(0.05f64..1.0, 8)) {
        let mut p = p;
        p[0] = 1.0;
        let f = EntanglementFeature::exact(3, &p).unwrap();
        let l = lambdas_from_feature(&f).unwrap();
        for (a, b) in l.purities().iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_mean_is_dimension_over_purity(p in prop::collection::vec(0.1f64..1.0, 16)) {
        let mut p = p;
        p[0] = 1.0;
        let l = ShadowEigenvalues::from_purities(4, &p).unwrap();
        let m = shadow_norm_means(&l).unwrap();
        prop_assert!((m.harmonic - 16.0 / p[15]).abs() < 1e-12 * m.harmonic);
    }
}

#[test]
fn single_qubit_limits() {
    let l = ShadowEigenvalues::from_purities(1, &[1.0, 0.5]).unwrap();
    assert_abs_diff_eq!(l.get(1), 0.0, epsilon = 1e-15);
    let l = ShadowEigenvalues::from_purities(1, &[1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(l.get(1), 1.0 / 3.0, epsilon = 1e-15);
    let m = shadow_norm_means(&l).unwrap();
    assert_abs_diff_eq!(m.harmonic, 2.0, epsilon = 1e-12);
}

#[test]
fn erasure_is_unlearnable() {
    let p: Vec<f64> = (0..8u32).map(|a| 0.5f64.powi(a.count_ones() as i32)).collect();
    let l = ShadowEigenvalues::from_purities(3, &p).unwrap();
    assert!(matches!(shadow_norm_means(&l), Err(Error::Unlearnable(_))));
}

#[test]
fn projective_limit_arithmetic_mean() {
    for n in 1..=6usize {
        let lambdas: Vec<f64> = (0..1u32 << n).map(|a| 3f64.powi(-(a.count_ones() as i32))).collect();
        let l = ShadowEigenvalues { n_qubits: n, q: 2.0, lambdas };
        let m = shadow_norm_means(&l).unwrap();
        assert_abs_diff_eq!(m.arithmetic / 2.5f64.powi(n as i32), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn prescrambled_channel_limits() {
    let d = 4usize;
    let x = random_herm(d, 3);
    let ident = DMatrix::<C64>::identity(d, d);
    let pure = PrescrambledChannel::new(4.0, 1.0);
    let want = (ident.clone() * x.trace() + &x) / C64::from(5.0);
    assert!((pure.apply(&x) - want).norm() < 1e-12);
    let erased = PrescrambledChannel::new(4.0, 0.25);
    assert!((erased.apply(&x) - ident.clone() * x.trace() / C64::from(4.0)).norm() < 1e-12);
    assert!(matches!(erased.invert(&x), Err(Error::NonInvertible { .. })));
    for ch in [PrescrambledChannel::new(4.0, 0.6), PrescrambledChannel::with_scale(4.0, 0.6, 0.3)] {
        assert!((ch.invert(&ch.apply(&x)).unwrap() - &x).norm() < 1e-12);
    }
}

/// Exact expectation of the estimator, averaged over the global scrambler
/// with the two-design twirl, for one fixed realization of the local circuit.
fn twirled_expectation(real: &CircuitRealization, rho: &DMatrix<C64>, o: &DMatrix<C64>, pr: Prescription) -> f64 {
    let d = rho.nrows() as f64;
    let mut rng = rng_from(0);
    let recs = enumerate_records(real, "x").unwrap();
    let mut snaps = Vec::new();
    for r in &recs {
        match make_snapshot::<DenseState>(pr, real, r, &mut rng) {
            Ok(s) => snaps.push((eavesdropper_snapshot::<DenseState>(real, r).unwrap().0, s)),
            Err(Error::ImpossibleRecord { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    // channel constants of this realization
    let (mut p, mut einf, mut z, mut pt) = (0.0, 0.0, 0.0, 0.0);
    for (sigma, s) in &snaps {
        let pi = s.log_pi.exp();
        let sm = sigma.spectral_moments().unwrap();
        p += pi * sm.purity;
        einf += pi * sm.max_eigenvalue;
        z += pi * pi;
        pt += pi * pi * sm.purity;
    }
    let ch = match pr {
        Prescription::Petz => PrescrambledChannel::new(d, p),
        Prescription::MaxFidelity => PrescrambledChannel::new(d, einf),
        Prescription::LeastSquares => PrescrambledChannel::with_scale(d, pt / z, d * z),
    };
    let (a, k) = ch.inverse_coefficients().unwrap();
    let (tr_rho_o, tr_o) = ((rho * o).trace().re, o.trace().re);
    let mut total = 0.0;
    for (sigma, s) in &snaps {
        let e = sigma.matrix() * C64::from(d * s.log_pi.exp());
        let eta = s.state.matrix();
        let (ta, tb, tab) = (e.trace().re, eta.trace().re, (&e * &eta).trace().re);
        let c1 = (d * ta * tb - tab) / (d * (d * d - 1.0));
        let c2 = (d * tab - ta * tb) / (d * (d * d - 1.0));
        total += s.weight * (a * (c1 * tr_o + c2 * tr_rho_o) - k * tr_o * ta / d);
    }
    total
}

#[test]
fn prescrambled_estimators_are_unbiased_exactly() {
    let spec = MonitoredCircuitSpec::new(3, 3, 0.3, GateEnsemble::Haar);
    let rho = DenseState::from_matrix(3, &{
        let h = random_herm(8, 11);
        &h * &h
    })
    .unwrap()
    .matrix();
    let obs = [pauli_matrix(&"XZY".parse().unwrap()), pauli_matrix(&"IIZ".parse().unwrap()), random_herm(8, 5)];
    for seed in 0..5 {
        let real = realize(&spec, seed).unwrap();
        for pr in [Prescription::Petz, Prescription::LeastSquares, Prescription::MaxFidelity] {
            for o in &obs {
                let got = twirled_expectation(&real, &rho, o, pr);
                let want = (&rho * o).trace().re;
                assert!((got - want).abs() < 1e-8, "{pr:?} seed {seed}: {got} vs {want}");
            }
        }
    }
}

/// The 24 single-qubit Cliffords modulo phase.
fn one_qubit_cliffords() -> Vec<nalgebra::Matrix2<C64>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = nalgebra::Matrix2::new(C64::from(r), C64::from(r), C64::from(r), C64::from(-r));
    let s = nalgebra::Matrix2::new(C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::i());
    let norm = |m: nalgebra::Matrix2<C64>| {
        let k = if m[(0, 0)].norm() > 1e-9 { m[(0, 0)] } else { m[(0, 1)] };
        m * (k.conj() / k.norm())
    };
    let mut group = vec![nalgebra::Matrix2::identity()];
    let mut i = 0;
    while i < group.len() {
        for g in [h, s] {
            let c = norm(g * group[i]);
            if !group.iter().any(|x| (x - c).norm() < 1e-9) {
                group.push(c);
            }
        }
        i += 1;
    }
    group
}

#[test]
fn pauli_mode_estimator_is_unbiased_over_local_frames() {
    // Averaging over local Clifford frames in front of a fixed realization
    // makes the channel support-diagonal, with eigenvalues from that
    // realization's feature.
    let n = 2;
    let spec = MonitoredCircuitSpec::new(n, 2, 0.5, GateEnsemble::Haar);
    let real = realize(&spec, 4).unwrap();
    let recs = enumerate_records(&real, "x").unwrap();
    let mut data = Vec::new();
    let mut feat = vec![0.0; 1 << n];
    for r in &recs {
        let Ok((sigma, lp)) = eavesdropper_snapshot::<DenseState>(&real, r) else { continue };
        for (f, v) in feat.iter_mut().zip(sigma.all_subsystem_purities()) {
            *f += lp.exp() * v;
        }
        data.push((sigma, lp));
    }
    let l = ShadowEigenvalues::from_purities(n, &feat).unwrap();
    let rho = DenseState::from_matrix(n, &{
        let h = random_herm(4, 2);
        &h * &h
    })
    .unwrap()
    .matrix();
    let d = 4.0;
    let cl = one_qubit_cliffords();
    assert_eq!(cl.len(), 24);
    let weight = 1.0 / (cl.len() * cl.len()) as f64;
    for o in ["ZI", "XY", "IZ", "ZZ"] {
        let p: PauliString = o.parse().unwrap();
        let mut total = 0.0;
        for a in &cl {
            for b in &cl {
                // qubit k is bit k, so the tensor factor of qubit 1 goes first
                let f = DMatrix::from_fn(4, 4, |r, c| b[(r >> 1, c >> 1)] * a[(r & 1, c & 1)]);
                for (sigma, lp) in &data {
                    let s = f.adjoint() * sigma.matrix() * &f;
                    let e = &s * C64::from(d * lp.exp());
                    let snap = Snapshot { prescription: Prescription::Petz, state: DenseState::from_matrix(n, &s).unwrap(), log_pi: *lp, weight: 1.0 };
                    let v = shot_value(&snap, &Observable::Pauli(p.clone()), &ChannelInverse::PauliModes(l.clone())).unwrap();
                    total += (&e * &rho).trace().re * v * weight;
                }
            }
        }
        let want = (&rho * pauli_matrix(&p)).trace().re;
        assert!((total - want).abs() < 1e-8, "{o}: {total} vs {want}");
    }
}

#[test]
fn identity_estimate_is_one_per_shot() {
    let spec = MonitoredCircuitSpec::new(3, 3, 0.3, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    let real = realize(&spec, 1).unwrap();
    let mut rng = rng_from(2);
    let (_, rec) = sample_dual::<StabilizerMixedState>(&real, &mut rng).unwrap();
    let snap = make_snapshot::<StabilizerMixedState>(Prescription::Petz, &real, &rec, &mut rng).unwrap();
    let ch = ChannelInverse::Prescrambled(PrescrambledChannel::new(8.0, 0.4));
    let v = shot_value(&snap, &Observable::Identity, &ch).unwrap();
    assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
}

#[test]
fn no_measurement_petz_snapshot_is_fully_mixed() {
    let spec = MonitoredCircuitSpec::new(3, 3, 0.0, GateEnsemble::Haar).with_prescramble(Prescramble::GlobalHaar);
    let real = realize(&spec, 1).unwrap();
    let rec = enumerate_records(&real, "x").unwrap().remove(0);
    let snap = make_snapshot::<DenseState>(Prescription::Petz, &real, &rec, &mut rng_from(0)).unwrap();
    assert!((snap.state.matrix() - DMatrix::identity(8, 8) / C64::from(8.0)).norm() < 1e-12);
}

#[test]
fn projective_limit_prescriptions_coincide() {
    let spec = MonitoredCircuitSpec::new(4, 8, 1.0, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    let mut rng = rng_from(9);
    let z: PauliString = "ZIII".parse().unwrap();
    let petz = ChannelInverse::Prescrambled(PrescrambledChannel::new(16.0, 1.0));
    let ls = ChannelInverse::Prescrambled(PrescrambledChannel::with_scale(16.0, 1.0, 16.0 / 16.0));
    for seed in 0..10 {
        let real = realize(&spec, seed).unwrap();
        let (_, rec) = sample_dual::<StabilizerMixedState>(&real, &mut rng).unwrap();
        let a = make_snapshot::<StabilizerMixedState>(Prescription::Petz, &real, &rec, &mut rng).unwrap();
        let b = make_snapshot::<StabilizerMixedState>(Prescription::LeastSquares, &real, &rec, &mut rng).unwrap();
        let c = make_snapshot::<StabilizerMixedState>(Prescription::MaxFidelity, &real, &rec, &mut rng).unwrap();
        let obs = Observable::Pauli(z.clone());
        let va = shot_value(&a, &obs, &petz).unwrap();
        assert_abs_diff_eq!(va, shot_value(&b, &obs, &ls).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(va, shot_value(&c, &obs, &petz).unwrap(), epsilon = 1e-10);
    }
}

#[test]
fn max_fidelity_state_lies_in_support() {
    let sigma = StabilizerMixedState::from_generators(2, vec![mipt_shadows::stab::Pauli::z(0)]).unwrap();
    let mut rng = rng_from(1);
    for _ in 0..10 {
        let psi = sigma.leading_state(&mut rng).unwrap();
        assert_eq!(psi.rank(), 2);
        assert_abs_diff_eq!(psi.overlap(&sigma).unwrap(), 0.5, epsilon = 1e-12);
    }
}

#[test]
fn pauli_estimate_is_unbiased_monte_carlo() {
    let n = 4;
    let spec = MonitoredCircuitSpec::new(n, 4, 0.3, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    let m = moments_run::<StabilizerMixedState>(&spec, 40_000, 1).unwrap();
    let input = StabilizerMixedState::zero_state(n).unwrap();
    let shots = collect_shots(&spec, &input, 10_000, 2).unwrap();
    let z: PauliString = "ZIII".parse().unwrap();
    for pr in [Prescription::Petz, Prescription::LeastSquares, Prescription::MaxFidelity] {
        let ch = ChannelInverse::Prescrambled(PrescrambledChannel::for_prescription(pr, &m));
        let v = shot_values(&spec, &shots, &Observable::<StabilizerMixedState>::Pauli(z.clone()), pr, &ch, 2).unwrap();
        let s = summarize(&v);
        assert!((s.estimate - 1.0).abs() < 3.5 * s.stderr, "{pr:?}: {} +- {}", s.estimate, s.stderr);
        let id = shot_values(&spec, &shots, &Observable::<StabilizerMixedState>::Identity, pr, &ch, 2).unwrap();
        let s = summarize(&id);
        assert!((s.estimate - 1.0).abs() < 3.5 * s.stderr.max(1e-12), "{pr:?} identity");
    }
}

#[test]
fn variance_needs_thirty_shots() {
    assert!(estimator_variance(&[1.0; 29]).is_err());
    let v = estimator_variance(&[1.0; 30]).unwrap();
    assert_eq!(v.variance, 0.0);
}
