//! Informational power and subentropy.

use crate::circuit::{enumerate_records, eavesdropper_snapshot, CircuitRealization, MonitoredCircuitSpec};
use crate::dense::DenseState;
use crate::ensemble::{ensemble_draw, fold_indices, Estimate};
use crate::error::{Error, Result};
use crate::haar::haar_state;
use crate::settings::EULER_GAMMA;
use crate::stab::StabilizerMixedState;
use crate::stats::RunningStats;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

/// delta_H(x) = H_x - ln x - gamma for integer x >= 1.
pub fn delta_h(x: f64) -> Result<f64> {
    if !(x >= 1.0) || x.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!("delta_H needs a positive integer, got {x}")));
    }
    if x <= 64.0 {
        let h: f64 = (1..=x as u64).map(|j| 1.0 / j as f64).sum();
        return Ok(h - x.ln() - EULER_GAMMA);
    }
    let y = 1.0 / (x * x);
    Ok(1.0 / (2.0 * x) - y * (1.0 / 12.0 - y * (1.0 / 120.0 - y * (1.0 / 252.0 - y / 240.0))))
}

/// delta_H(q^s).
pub fn delta_h_pow(q: f64, s: f64) -> Result<f64> {
    delta_h(q.powf(s).round())
}

/// Subentropy Q of a spectrum, evaluated from
/// `Q = int_0^inf [s/(1+s) - prod_i (1 + lambda_i/s)^{-1}] ds`,
/// which stays finite for degenerate spectra.
pub fn subentropy_spectrum(spectrum: &[f64]) -> Result<f64> {
    let total: f64 = spectrum.iter().sum();
    if (total - 1.0).abs() > 1e-8 || spectrum.iter().any(|&l| l < -1e-12) {
        return Err(Error::NotNormalized(total));
    }
    let lam: Vec<f64> = spectrum.iter().copied().filter(|&l| l > 1e-300).collect();
    if lam.len() <= 1 {
        return Ok(0.0);
    }
    let lmin = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    let (u0, u1, h) = (lmin.ln() - 20.0, 40.0, 0.05);
    let steps = ((u1 - u0) / h).ceil() as usize;
    let h = (u1 - u0) / steps as f64;
    let f = |u: f64| {
        let s = u.exp();
        // exp(a) - exp(b) = exp(b) expm1(a - b), with a = -ln(1 + 1/s)
        // and b = -sum ln(1 + lambda/s)
        let lp: f64 = lam.iter().map(|l| (l / s).ln_1p()).sum();
        let a = -(1.0 / s).ln_1p();
        let diff = if a + lp > 1.0 { a.exp() - (-lp).exp() } else { (-lp).exp() * (a + lp).exp_m1() };
        diff * s
    };
    let mut acc = 0.5 * (f(u0) + f(u1));
    for k in 1..steps {
        acc += f(u0 + k as f64 * h);
    }
    Ok(acc * h)
}

/// Subentropy of a flat spectrum of rank q^S: 1 - gamma - delta_H(q^S).
pub fn subentropy_stabilizer(s: f64, q: f64, n: usize) -> Result<f64> {
    if !(0.0..=n as f64).contains(&s) {
        return Err(Error::InvalidArgument(format!("entropy {s} outside [0, {n}]")));
    }
    Ok(1.0 - EULER_GAMMA - delta_h_pow(q, s)?)
}

/// W = E_m[delta_H(q^{S_m})] - delta_H(q^N) from entropies sampled under pi.
pub fn infopower_clifford(entropies: &[f64], q: f64, n: usize) -> Result<Estimate> {
    let s = entropies.iter().map(|&e| delta_h_pow(q, e)).collect::<Result<RunningStats>>()?;
    Ok(Estimate { value: s.mean() - delta_h_pow(q, n as f64)?, stderr: s.stderr() })
}

/// Entropies (in bits) of `n_traj` stabilizer dual-ensemble draws.
pub fn clifford_entropies(spec: &MonitoredCircuitSpec, n_traj: usize, master: u64) -> Result<Vec<f64>> {
    fold_indices(
        n_traj,
        Vec::new,
        |acc: &mut Vec<f64>, i| {
            let d = ensemble_draw::<StabilizerMixedState>(spec, master, i)?;
            acc.push(d.state.entropy() as f64);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

/// W_2 = ln[(1 + P~)/(1 + 1/D)].
pub fn infopower_renyi2(purity_modified: f64, dim: f64) -> Result<f64> {
    let tol = 1e-12;
    if !(purity_modified >= 1.0 / dim - tol && purity_modified <= 1.0 + tol) {
        return Err(Error::InvalidArgument(format!("modified purity {purity_modified} outside [1/D, 1]")));
    }
    Ok(((1.0 + purity_modified) / (1.0 + 1.0 / dim)).ln())
}

/// Monte Carlo of G(sigma) = E_phi[x ln x], x = D <phi|sigma|phi>, over Haar
/// random pure states.
pub fn haar_g_mc<R: Rng + ?Sized>(sigma: &DenseState, n_samples: usize, rng: &mut R) -> Result<Estimate> {
    let d = sigma.dim();
    if d > 64 {
        return Err(Error::TooManyQubits { n: sigma.n_qubits(), limit: 6, engine: "haar_g_mc" });
    }
    let m = sigma.matrix();
    let mut s = RunningStats::new();
    for _ in 0..n_samples {
        let phi = haar_state(d, rng);
        let x = d as f64 * (phi.adjoint() * &m * &phi)[(0, 0)].re;
        s.push(if x > 0.0 { x * x.ln() } else { 0.0 });
    }
    Ok(Estimate { value: s.mean(), stderr: s.stderr() })
}

/// Mutual information between an ensemble {p_i, rho_i} and POVM outcomes.
pub fn mutual_information_exhaustive(priors: &[f64], states: &[DMatrix<C64>], povm: &[DMatrix<C64>]) -> Result<f64> {
    if priors.len() != states.len() {
        return Err(Error::LengthMismatch { expected: priors.len(), found: states.len() });
    }
    let joint: Vec<Vec<f64>> = priors
        .iter()
        .zip(states)
        .map(|(p, rho)| povm.iter().map(|e| p * (rho * e).trace().re.max(0.0)).collect())
        .collect();
    let pm: Vec<f64> = (0..povm.len()).map(|m| joint.iter().map(|r| r[m]).sum()).collect();
    let mut info = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (m, &pj) in row.iter().enumerate() {
            if pj > 0.0 {
                info += pj * (pj / (priors[i] * pm[m])).ln();
            }
        }
    }
    Ok(info.max(0.0))
}

/// Effects E_m = D pi_m sigma_m of every record of a realization.
pub fn povm_from_realization(real: &CircuitRealization) -> Result<Vec<DMatrix<C64>>> {
    let d = (1usize << real.n_qubits) as f64;
    enumerate_records(real, "dual")?
        .iter()
        .map(|r| match eavesdropper_snapshot::<DenseState>(real, r) {
            Ok((s, log_pi)) => Ok(s.matrix() * C64::from(d * log_pi.exp())),
            Err(Error::ImpossibleRecord { .. }) => Ok(DMatrix::zeros(d as usize, d as usize)),
            Err(e) => Err(e),
        })
        .collect()
}

/// W = E_pi[Q(I/D) - Q(sigma_m)] from dense dual-ensemble draws.
pub fn infopower_spectral(spec: &MonitoredCircuitSpec, n_traj: usize, master: u64) -> Result<Estimate> {
    let d = 2f64.powi(spec.n_qubits as i32);
    let q_mixed = 1.0 - EULER_GAMMA - delta_h(d)?;
    let s = fold_indices(
        n_traj,
        RunningStats::new,
        |acc, i| {
            let draw = ensemble_draw::<DenseState>(spec, master, i)?;
            acc.push(q_mixed - subentropy_spectrum(&draw.state.spectrum()?)?);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;
    Ok(Estimate { value: s.mean(), stderr: s.stderr() })
}
