//! Cross-entropy diagnostics, third-moment Weingarten calculus and the
//! fidelity shadow norm.

use crate::circuit::{realize, run_trajectory, MonitoredCircuitSpec, RecordMode};
use crate::engine::Engine;
use crate::ensemble::{fold_indices, BATCHES};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, stream};
use crate::shadow::Shot;
use crate::stats::{jackknife, log_sum_exp, RunningStats};
use serde::{Deserialize, Serialize};

/// Weingarten functions (Wg(e), Wg(tau), Wg(chi)) of U(D) on three replicas.
pub fn weingarten3(d: usize) -> Result<(f64, f64, f64)> {
    if d <= 2 {
        return Err(Error::DegenerateWeingarten(d));
    }
    let d = d as f64;
    let g = d * (d * d - 1.0) * (d * d - 4.0);
    Ok(((d * d - 2.0) / g, -d / g, 2.0 / g))
}

/// The six permutations of three replicas as images of (0, 1, 2).
pub const S3: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]];

/// Number of cycles of a permutation of three elements.
pub fn cycles(p: [usize; 3]) -> u32 {
    let mut seen = [false; 3];
    let mut c = 0;
    for s in 0..3 {
        if !seen[s] {
            c += 1;
            let mut k = s;
            while !seen[k] {
                seen[k] = true;
                k = p[k];
            }
        }
    }
    c
}

/// Composition `a . b^{-1}`.
pub fn compose_inv(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    let mut binv = [0; 3];
    for i in 0..3 {
        binv[b[i]] = i;
    }
    [a[binv[0]], a[binv[1]], a[binv[2]]]
}

/// Class of a permutation: 0 identity, 1 transposition, 2 three-cycle.
pub fn perm_class(p: [usize; 3]) -> usize {
    match cycles(p) {
        3 => 0,
        2 => 1,
        _ => 2,
    }
}

/// Expansion of an averaged, globally scrambled sigma^{(3)} over replica
/// permutations: `c_e e + c_tau sum(tau) + c_chi sum(chi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeingartenTriple {
    pub dim: f64,
    pub c_e: f64,
    pub c_tau: f64,
    pub c_chi: f64,
}

impl WeingartenTriple {
    fn coeff(&self, class: usize) -> f64 {
        [self.c_e, self.c_tau, self.c_chi][class]
    }

    /// Traces against (e, tau, chi); these give back (1, P, P3).
    pub fn contract(&self) -> (f64, f64, f64) {
        let t = |mu: [usize; 3]| -> f64 {
            S3.iter()
                .map(|&nu| self.coeff(perm_class(nu)) * self.dim.powi(cycles(compose_inv(nu, mu)) as i32))
                .sum()
        };
        (t(S3[0]), t(S3[1]), t(S3[4]))
    }
}

pub fn third_moment_coeffs(purity: f64, purity3: f64, d: usize) -> Result<WeingartenTriple> {
    weingarten3(d)?;
    let df = d as f64;
    let g = df * (df * df - 1.0) * (df * df - 4.0);
    let v = [1.0, purity, purity3];
    let rows = [[df * df - 2.0, -3.0 * df, 4.0], [-df, df * df + 2.0, -2.0 * df], [2.0, -3.0 * df, df * df]];
    let c: Vec<f64> = rows.iter().map(|r| (r[0] * v[0] + r[1] * v[1] + r[2] * v[2]) / g).collect();
    Ok(WeingartenTriple { dim: df, c_e: c[0], c_tau: c[1], c_chi: c[2] })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Exact,
    /// Leading order in 1/D.
    Leading,
}

/// Gamma = Tr(rho x rho0 x rho0 sigma^{(3)}) for pure rho0 with fidelity F.
pub fn gamma(purity: f64, purity3: f64, fidelity: f64, d: usize, order: Order) -> Result<f64> {
    match order {
        Order::Exact => {
            let c = third_moment_coeffs(purity, purity3, d)?;
            Ok(c.c_e + c.c_tau + 2.0 * (c.c_tau + c.c_chi) * fidelity)
        }
        Order::Leading => {
            let df = d as f64;
            Ok((1.0 + purity + 2.0 * fidelity * (purity + purity3)) / (df * df * df))
        }
    }
}

/// Squared shadow norm of a pure projector |psi><psi| under the scrambled
/// channel, for inputs with fidelity F to psi.
///
/// The leading-order form is `1/P + 2 F P3 / P^2`.
pub fn fidelity_shadow_norm(purity: f64, purity3: f64, fidelity: f64, d: usize, order: Order) -> Result<f64> {
    let df = d as f64;
    let threshold = 1.0 / df;
    if !(purity > threshold) {
        return Err(Error::NonInvertible { purity, threshold });
    }
    match order {
        Order::Leading => Ok(1.0 / purity + 2.0 * fidelity * purity3 / (purity * purity)),
        Order::Exact => {
            let lam = (df * purity - 1.0) / (df * df - 1.0);
            let mu = (df - purity) / (df * df - 1.0);
            let c = mu / lam;
            let t2 = ((1.0 - purity / df) + (purity - 1.0 / df) * fidelity) / (df * df - 1.0);
            let g = gamma(purity, purity3, fidelity, d, Order::Exact)?;
            Ok(df * (c * c / df - 2.0 * c * t2 / lam + g / (lam * lam)))
        }
    }
}

/// Large-sample mean of XEB' = D Tr(rho0 M(rho)) for the scrambled channel.
pub fn xeb_prime_mean(purity: f64, fidelity: f64, d: f64) -> f64 {
    (d - purity + (d * purity - 1.0) * fidelity) / (d - 1.0 / d)
}

/// Large-sample XEB for the scrambled channel, written with the modified
/// purity (weights proportional to pi^2).
pub fn xeb_mean(purity_modified: f64, fidelity: f64, d: f64) -> f64 {
    (d - purity_modified + (d * purity_modified - 1.0) * fidelity) / ((d - 1.0) * (1.0 + purity_modified))
}

/// Per-shot values D Tr(rho0 sigma_m).
pub fn xeb_prime_values<S: Engine>(spec: &MonitoredCircuitSpec, shots: &[Shot], rho0: &S) -> Result<Vec<f64>> {
    let d = 2f64.powi(spec.n_qubits as i32);
    fold_indices(
        shots.len(),
        Vec::new,
        |acc: &mut Vec<f64>, i| {
            let real = realize(spec, shots[i].realization_seed)?;
            let (sigma, _) = crate::circuit::eavesdropper_snapshot::<S>(&real, &shots[i].record)?;
            acc.push(d * sigma.overlap(rho0)?);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XebPrime {
    pub mean: f64,
    /// Shot-to-shot standard deviation (delta XEB').
    pub std: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn xeb_prime(values: &[f64]) -> XebPrime {
    let s: RunningStats = values.iter().copied().collect();
    XebPrime { mean: s.mean(), std: s.std_dev(), stderr: s.stderr(), n: values.len() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Xeb {
    pub value: f64,
    pub stderr: f64,
    pub ess: f64,
    pub n_records: usize,
    pub n_model: usize,
}

/// log p(m | rho0) of each experimental record under the model input.
pub fn model_log_probs<S: Engine>(spec: &MonitoredCircuitSpec, shots: &[Shot], rho0: &S) -> Result<Vec<f64>> {
    fold_indices(
        shots.len(),
        Vec::new,
        |acc: &mut Vec<f64>, i| {
            let real = realize(spec, shots[i].realization_seed)?;
            let lp = match run_trajectory(&real, rho0.clone(), RecordMode::Forced(&shots[i].record), "model") {
                Ok((_, r)) => r.log_prob,
                Err(Error::ImpossibleRecord { .. }) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            acc.push(lp);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

/// log p(m' | rho0) for fresh model samples m' ~ p(. | rho0), each on a fresh
/// realization drawn from a stream the experiment never uses.
pub fn model_self_log_probs<S: Engine>(spec: &MonitoredCircuitSpec, rho0: &S, n: usize, master: u64) -> Result<Vec<f64>> {
    fold_indices(
        n,
        Vec::new,
        |acc: &mut Vec<f64>, i| {
            let real = realize(spec, derive_seed(master, &[stream::MODEL, i as u64, 0]))?;
            let mut rng = rng_for(master, &[stream::MODEL, i as u64, 1]);
            let (_, r) = run_trajectory(&real, rho0.clone(), RecordMode::Sample(&mut rng), "model")?;
            acc.push(r.log_prob);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

/// Linear XEB = E[p(m|rho0)]_{m ~ rho} / E[p(m'|rho0)]_{m' ~ rho0}, with a
/// delete-one-batch jackknife error.
pub fn xeb_linear(numerator_log_p: &[f64], denominator_log_p: &[f64]) -> Result<Xeb> {
    if numerator_log_p.is_empty() || denominator_log_p.is_empty() {
        return Err(Error::InvalidArgument("XEB needs records".into()));
    }
    let w: Vec<f64> = denominator_log_p.iter().map(|l| l.exp()).collect();
    let ess = {
        let s: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        if s2 > 0.0 { s * s / s2 } else { 0.0 }
    };
    if ess < 10.0 {
        return Err(Error::LowEss(ess));
    }
    let ratio = |num: &[f64], den: &[f64]| {
        (log_sum_exp(num) - (num.len() as f64).ln() - log_sum_exp(den) + (den.len() as f64).ln()).exp()
    };
    let groups: Vec<(Vec<f64>, Vec<f64>)> = (0..BATCHES)
        .map(|b| {
            let pick = |v: &[f64]| v.iter().enumerate().filter(|(i, _)| i % BATCHES == b).map(|(_, x)| *x).collect::<Vec<_>>();
            (pick(numerator_log_p), pick(denominator_log_p))
        })
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .collect();
    let (_, stderr) = jackknife(&groups, |gs| {
        let num: Vec<f64> = gs.iter().flat_map(|g| g.0.iter().copied()).collect();
        let den: Vec<f64> = gs.iter().flat_map(|g| g.1.iter().copied()).collect();
        ratio(&num, &den)
    });
    Ok(Xeb {
        value: ratio(numerator_log_p, denominator_log_p),
        stderr,
        ess,
        n_records: numerator_log_p.len(),
        n_model: denominator_log_p.len(),
    })
}

/// Full XEB run for recorded shots; errors if the circuit makes no
/// measurements.
pub fn xeb_run<S: Engine>(spec: &MonitoredCircuitSpec, shots: &[Shot], rho0: &S, n_model: usize, master: u64) -> Result<Xeb> {
    if shots.iter().all(|s| s.record.events.is_empty()) {
        return Err(Error::InvalidArgument("XEB is undefined without measurement records".into()));
    }
    let num = model_log_probs(spec, shots, rho0)?;
    let den = model_self_log_probs(spec, rho0, n_model, master)?;
    xeb_linear(&num, &den)
}
