use approx::assert_abs_diff_eq;
use mipt_shadows::circuit::*;
use mipt_shadows::error::Error;
use mipt_shadows::shadow::collect_shots;
use mipt_shadows::stab::StabilizerMixedState;
use mipt_shadows::xeb::*;

#[test]
fn weingarten_at_four() {
    let (e, t, c) = weingarten3(4).unwrap();
    assert_eq!(e, 14.0 / 720.0);
    assert_eq!(t, -4.0 / 720.0);
    assert_eq!(c, 2.0 / 720.0);
    assert!(matches!(weingarten3(2), Err(Error::DegenerateWeingarten(2))));
}

#[test]
fn weingarten_inverts_the_gram_matrix() {
    for d in [3usize, 4, 7] {
        let wg = weingarten3(d).unwrap();
        let wgc = [wg.0, wg.1, wg.2];
        for mu in S3 {
            for rho in S3 {
                let s: f64 = S3
                    .iter()
                    .map(|&nu| wgc[perm_class(compose_inv(mu, nu))] * (d as f64).powi(cycles(compose_inv(nu, rho)) as i32))
                    .sum();
                assert_abs_diff_eq!(s, if mu == rho { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn coefficients_recover_moments() {
    for (p, p3) in [(1.0, 1.0), (0.3, 0.12), (0.25, 0.0625)] {
        let c = third_moment_coeffs(p, p3, 4).unwrap();
        let (a, b, x) = c.contract();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, p, epsilon = 1e-12);
        assert_abs_diff_eq!(x, p3, epsilon = 1e-12);
    }
    let d = 6.0;
    let c = third_moment_coeffs(1.0, 1.0, 6).unwrap();
    let haar = 1.0 / (d * (d + 1.0) * (d + 2.0));
    for v in [c.c_e, c.c_tau, c.c_chi] {
        assert_abs_diff_eq!(v, haar, epsilon = 1e-15);
    }
    let c = third_moment_coeffs(1.0 / d, 1.0 / (d * d), 6).unwrap();
    assert_abs_diff_eq!(c.c_e, 1.0 / (d * d * d), epsilon = 1e-15);
    assert_abs_diff_eq!(c.c_tau, 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(c.c_chi, 0.0, epsilon = 1e-15);
    let d: f64 = 64.0;
    let c = third_moment_coeffs(0.4, 0.2, 64).unwrap();
    assert!(((c.c_e + c.c_tau) * d.powi(3) / 1.4 - 1.0).abs() < 3.0 / d);
}

#[test]
fn gamma_orders() {
    assert_abs_diff_eq!(gamma(1.0 / 8.0, 1.0 / 64.0, 0.0, 8, Order::Exact).unwrap(), 1.0 / 512.0, epsilon = 1e-16);
    let d = 1024usize;
    let (e, l) = (gamma(0.3, 0.1, 0.7, d, Order::Exact).unwrap(), gamma(0.3, 0.1, 0.7, d, Order::Leading).unwrap());
    assert!((e / l - 1.0).abs() < 10.0 / d as f64);
}

#[test]
fn fidelity_shadow_norm_limits() {
    assert_abs_diff_eq!(fidelity_shadow_norm(1.0, 1.0, 0.0, 1 << 20, Order::Leading).unwrap(), 1.0, epsilon = 1e-12);
    assert!((fidelity_shadow_norm(1.0, 1.0, 0.0, 1 << 12, Order::Exact).unwrap() - 1.0).abs() < 1e-2);
    for s in [0.3, 0.6] {
        let d = 1usize << 12;
        let p = (d as f64).powf(-s);
        let v = fidelity_shadow_norm(p, p * p, 0.5, d, Order::Exact).unwrap();
        assert!((v / (d as f64).powf(s)).ln().abs() < 1.0);
    }
    // exact and corrected leading order agree at large D
    let d = 1usize << 14;
    for f in [0.0, 0.5, 1.0] {
        let e = fidelity_shadow_norm(0.2, 0.05, f, d, Order::Exact).unwrap();
        let l = fidelity_shadow_norm(0.2, 0.05, f, d, Order::Leading).unwrap();
        assert!((e / l - 1.0).abs() < 1e-2, "{f}: {e} vs {l}");
    }
    assert!(matches!(fidelity_shadow_norm(0.1, 0.01, 0.0, 8, Order::Exact), Err(Error::NonInvertible { .. })));
}

#[test]
fn xeb_prime_mean_values() {
    let d = 16.0;
    assert_abs_diff_eq!(xeb_prime_mean(1.0, 1.0, d), 2.0 * d / (d + 1.0), epsilon = 1e-12);
    assert_abs_diff_eq!(xeb_prime_mean(1.0 / d, 0.3, d), 1.0, epsilon = 1e-12);
}

#[test]
fn xeb_prime_without_measurements_is_one() {
    let spec = MonitoredCircuitSpec::new(3, 2, 0.0, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    let input = StabilizerMixedState::zero_state(3).unwrap();
    let shots = collect_shots(&spec, &input, 40, 1).unwrap();
    let v = xeb_prime_values(&spec, &shots, &input).unwrap();
    let x = xeb_prime(&v);
    assert_abs_diff_eq!(x.mean, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(x.std, 0.0, epsilon = 1e-12);
    assert!(xeb_run(&spec, &shots, &input, 100, 2).is_err());
}

#[test]
fn xeb_of_model_against_itself_is_one() {
    let spec = MonitoredCircuitSpec::new(4, 4, 0.4, GateEnsemble::Clifford2q).with_prescramble(Prescramble::GlobalClifford);
    let input = StabilizerMixedState::zero_state(4).unwrap();
    let shots = collect_shots(&spec, &input, 4000, 1).unwrap();
    let x = xeb_run(&spec, &shots, &input, 4000, 2).unwrap();
    assert!((x.value - 1.0).abs() < 3.5 * x.stderr, "{x:?}");
}
