use approx::assert_abs_diff_eq;
use mipt_shadows::circuit::*;
use mipt_shadows::dense::DenseState;
use mipt_shadows::engine::Engine;
use mipt_shadows::infopower::povm_from_realization;
use mipt_shadows::seed::rng_from;
use mipt_shadows::stab::StabilizerMixedState;
use mipt_shadows::u1::ChargeBlockState;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn stabilizer_matches_dense_forward() {
    let spec = MonitoredCircuitSpec::new(4, 5, 0.3, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    for seed in 0..20 {
        let real = realize(&spec, seed).unwrap();
        let mut rng = rng_from(seed + 100);
        let (st, rec) = run_trajectory(&real, StabilizerMixedState::fully_mixed(4).unwrap(), RecordMode::Sample(&mut rng), "mixed").unwrap();
        let (de, rec2) = run_trajectory(&real, DenseState::fully_mixed(4).unwrap(), RecordMode::Forced(&rec), "mixed").unwrap();
        assert_abs_diff_eq!(rec.log_prob, rec2.log_prob, epsilon = 1e-10);
        assert!(max_diff(&st.to_dense().unwrap().matrix(), &de.matrix()) < 1e-10);
        let a = st.all_subsystem_purities().unwrap();
        let b = de.all_subsystem_purities();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }
}

#[test]
fn stabilizer_matches_dense_snapshot() {
    let spec = MonitoredCircuitSpec::new(3, 4, 0.4, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    for seed in 0..20 {
        let real = realize(&spec, seed).unwrap();
        let mut rng = rng_from(seed);
        let (st, rec) = sample_dual::<StabilizerMixedState>(&real, &mut rng).unwrap();
        let (de, lp) = eavesdropper_snapshot::<DenseState>(&real, &rec).unwrap();
        assert_abs_diff_eq!(rec.log_prob, lp, epsilon = 1e-10);
        assert!(max_diff(&st.to_dense().unwrap().matrix(), &de.matrix()) < 1e-10);
    }
}

#[test]
fn effects_resolve_identity_and_match_forward_probabilities() {
    let spec = MonitoredCircuitSpec::new(3, 3, 0.5, GateEnsemble::Haar).with_prescramble(Prescramble::GlobalHaar);
    let real = realize(&spec, 7).unwrap();
    let povm = povm_from_realization(&real).unwrap();
    let mut sum = DMatrix::zeros(8, 8);
    for e in &povm {
        sum += e;
    }
    assert!(max_diff(&sum, &DMatrix::identity(8, 8)) < 1e-10);
    let input = DenseState::basis_state(3, 5).unwrap();
    for (r, e) in enumerate_records(&real, "x").unwrap().iter().zip(&povm) {
        let p = (e * input.matrix()).trace().re;
        match run_trajectory(&real, input.clone(), RecordMode::Forced(r), "x") {
            Ok((_, rr)) => assert_abs_diff_eq!(rr.log_prob.exp(), p, epsilon = 1e-10),
            Err(_) => assert!(p < 1e-12),
        }
    }
}

#[test]
fn charge_blocks_match_dense() {
    let spec = MonitoredCircuitSpec::new(4, 6, 0.3, GateEnsemble::U1Haar);
    for seed in 0..10 {
        let real = realize(&spec, seed).unwrap();
        let mut rng = rng_from(seed);
        let (cb, rec) = run_trajectory(&real, ChargeBlockState::fully_mixed(4).unwrap(), RecordMode::Sample(&mut rng), "m").unwrap();
        let (de, rec2) = run_trajectory(&real, DenseState::fully_mixed(4).unwrap(), RecordMode::Forced(&rec), "m").unwrap();
        assert_abs_diff_eq!(rec.log_prob, rec2.log_prob, epsilon = 1e-10);
        assert!(max_diff(&cb.to_dense().unwrap().matrix(), &de.matrix()) < 1e-10);
        let (a1, a2) = cb.charge_moments().unwrap();
        let (b1, b2) = de.charge_moments().unwrap();
        assert_abs_diff_eq!(a1, b1, epsilon = 1e-10);
        assert_abs_diff_eq!(a2, b2, epsilon = 1e-10);
        assert_abs_diff_eq!(Engine::purity(&cb), de.purity(), epsilon = 1e-10);
        assert!(de.off_block_norm(&(0..16).map(|x: i64| x.count_ones() as i64).collect::<Vec<_>>()) < 1e-10);
    }
}
