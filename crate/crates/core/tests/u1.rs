use approx::assert_abs_diff_eq;
use mipt_shadows::circuit::*;
use mipt_shadows::dense::DenseState;
use mipt_shadows::error::Error;
use mipt_shadows::seed::rng_from;
use mipt_shadows::u1::*;

#[test]
fn gates_conserve_charge() {
    let mut rng = rng_from(1);
    let mut m01 = 0.0;
    let mut m11 = 0.0;
    let n = 20_000;
    for _ in 0..n {
        let g = u1_haar_gate((0, 1), &mut rng).unwrap();
        assert!(is_charge_conserving(g.matrix(), 1e-12));
        m01 += g.matrix()[(1, 2)].norm_sqr();
        m11 += g.matrix()[(1, 1)].norm_sqr().powi(2);
    }
    // Haar U(2): E|u|^2 = 1/2, E|u|^4 = 1/3
    assert!((m01 / n as f64 - 0.5).abs() < 0.01);
    assert!((m11 / n as f64 - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn sectors_are_complete() {
    for n in 1..=6 {
        let s = sector_projectors(n);
        let mut total = 0;
        for (w, sec) in s.iter().enumerate() {
            let binom = (0..w).fold(1usize, |b, k| b * (n - k) / (k + 1));
            assert_eq!(sec.rank(), binom);
            assert_eq!(sec.charge, n as f64 / 2.0 - w as f64);
            total += sec.rank();
        }
        assert_eq!(total, 1 << n);
        let q = charge_operator(n);
        assert_abs_diff_eq!(q.iter().map(|x| x * x).sum::<f64>() / (1 << n) as f64, n as f64 / 4.0, epsilon = 1e-12);
    }
}

#[test]
fn bound_values() {
    assert_eq!(charge_shadow_bound(0.0, 2.0).unwrap(), 2.0);
    let n = 8.0;
    assert_abs_diff_eq!(charge_shadow_bound((1.0 - 1.0 / n) * n / 4.0, n / 4.0).unwrap(), n * n / 4.0, epsilon = 1e-9);
    assert!(matches!(charge_shadow_bound(2.0, 2.0), Err(Error::Unlearnable(_))));
}

#[test]
fn curve_limits_and_sum_rule() {
    let spec = MonitoredCircuitSpec::new(6, 4, 0.2, GateEnsemble::U1Haar);
    let c = sharpening_curve::<ChargeBlockState>(&spec, &[0, 1, 2, 4], 400, 3).unwrap();
    assert_abs_diff_eq!(c.delta_q[0], 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(c.var_q[0], 0.0, epsilon = 1e-12);
    for j in 0..4 {
        let tot = c.delta_q[j] + c.var_q[j];
        assert!((tot - 1.5).abs() < 3.5 * (c.delta_q_stderr[j] + c.var_q_stderr[j]) + 1e-12, "{j}: {tot}");
    }
    let full = MonitoredCircuitSpec::new(6, 1, 1.0, GateEnsemble::U1Haar);
    let c = sharpening_curve::<ChargeBlockState>(&full, &[0, 1], 50, 3).unwrap();
    assert_abs_diff_eq!(c.delta_q[1], 0.0, epsilon = 1e-12);
    assert!(sharpening_time(&c, 0.1).unwrap() <= 1.0);
}

#[test]
fn sharpening_time_interpolates() {
    let c = ChargeStats {
        n_qubits: 4,
        times: vec![0, 2, 4],
        delta_q: vec![1.0, 0.5, 0.0],
        delta_q_stderr: vec![0.0; 3],
        var_q: vec![0.0; 3],
        var_q_stderr: vec![0.0; 3],
        delta_q0: 1.0,
        n_traj: 1,
    };
    assert_abs_diff_eq!(sharpening_time(&c, 0.25).unwrap(), 3.0, epsilon = 1e-12);
    let mut c2 = c.clone();
    c2.delta_q = vec![1.0, 0.9, 0.8];
    assert!(matches!(sharpening_time(&c2, 0.1), Err(Error::NoCrossing)));
}

#[test]
fn posterior_limits() {
    let n = 4;
    let prior = vec![0.2; 5];
    let none = MonitoredCircuitSpec::new(n, 3, 0.0, GateEnsemble::U1Haar);
    let real = realize(&none, 1).unwrap();
    let rec = enumerate_records(&real, "x").unwrap().remove(0);
    let post = charge_posterior(&real, &rec, &prior).unwrap();
    for (a, b) in post.iter().zip(&prior) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
    let all = MonitoredCircuitSpec::new(n, 1, 1.0, GateEnsemble::U1Haar);
    let real = realize(&all, 2).unwrap();
    let mut rng = rng_from(3);
    let (_, rec) = run_trajectory(&real, DenseState::fully_mixed(n).unwrap(), RecordMode::Sample(&mut rng), "x").unwrap();
    let ones = rec.events.iter().filter(|e| e.outcome == 1).count();
    let post = charge_posterior(&real, &rec, &prior).unwrap();
    assert_abs_diff_eq!(post[ones], 1.0, epsilon = 1e-12);
}

#[test]
fn posterior_matches_dense_replay() {
    let n = 3;
    let spec = MonitoredCircuitSpec::new(n, 3, 0.4, GateEnsemble::U1Haar);
    let real = realize(&spec, 5).unwrap();
    let prior = vec![0.1, 0.2, 0.3, 0.4];
    let sectors = sector_projectors(n);
    for rec in enumerate_records(&real, "x").unwrap() {
        let Ok(post) = charge_posterior(&real, &rec, &prior) else { continue };
        let mut want = Vec::new();
        for (w, s) in sectors.iter().enumerate() {
            let input = DenseState::from_matrix(n, &s.projector(n)).unwrap();
            let p = match run_trajectory(&real, input, RecordMode::Forced(&rec), "x") {
                Ok((_, r)) => r.log_prob.exp(),
                Err(_) => 0.0,
            };
            want.push(prior[w] * p);
        }
        let z: f64 = want.iter().sum();
        for (a, b) in post.iter().zip(&want) {
            assert_abs_diff_eq!(*a, b / z, epsilon = 1e-10);
        }
    }
}

#[test]
fn sharp_phase_posterior_recovers_charge() {
    let n = 8;
    let spec = MonitoredCircuitSpec::new(n, 2 * n, 0.4, GateEnsemble::U1Haar);
    let sectors = sector_projectors(n);
    let prior: Vec<f64> = sectors.iter().map(|s| s.rank() as f64 / 256.0).collect();
    let mut hits = 0;
    let trials = 60;
    for i in 0..trials {
        let w = 1 + i % (n - 1);
        let real = realize(&spec, 100 + i as u64).unwrap();
        let mut rng = rng_from(i as u64);
        let input = ChargeBlockState::sector_mixed(n, w).unwrap();
        let (_, rec) = run_trajectory(&real, input, RecordMode::Sample(&mut rng), "sector").unwrap();
        let post = charge_posterior(&real, &rec, &prior).unwrap();
        let best = (0..=n).max_by(|&a, &b| post[a].partial_cmp(&post[b]).unwrap()).unwrap();
        hits += (best == w) as usize;
    }
    assert!(hits as f64 / trials as f64 > 0.9, "{hits}/{trials}");
}
