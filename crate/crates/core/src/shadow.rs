//! Classical shadows built from eavesdropped measurement records.
//!
//! An experiment runs the monitored circuit on an unknown input and keeps
//! the record m. The snapshot is built classically from (realization, m) and
//! de-noised with the inverse of the averaged measure-and-prepare channel.

use crate::circuit::{eavesdropper_snapshot, realize, run_trajectory, CircuitRealization, MonitoredCircuitSpec, RecordMode, TrajectoryRecord};
use crate::engine::Engine;
use crate::ensemble::{fold_indices, EnsembleMoments, Estimate, FeatureAccumulator};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::seed::{derive_seed, rng_for, stream, SimRng};
use crate::settings::DEFAULT;
use crate::stats::RunningStats;
use crate::subset::{lambdas_from_purities, purities_from_lambdas};
use crate::ensemble::EntanglementFeature;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Support-resolved channel eigenvalues lambda_A, indexed by subset mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowEigenvalues {
    pub n_qubits: usize,
    pub q: f64,
    pub lambdas: Vec<f64>,
}

impl ShadowEigenvalues {
    pub fn from_purities(n_qubits: usize, purities: &[f64]) -> Result<Self> {
        if purities.len() != 1 << n_qubits {
            return Err(Error::LengthMismatch { expected: 1 << n_qubits, found: purities.len() });
        }
        let mut lambdas = lambdas_from_purities(purities, 2.0);
        lambdas[0] = 1.0;
        Ok(ShadowEigenvalues { n_qubits, q: 2.0, lambdas })
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.lambdas[mask as usize]
    }

    /// Eigenvalue of the channel on a Pauli string.
    pub fn pauli(&self, p: &PauliString) -> f64 {
        self.get(p.support_mask())
    }

    /// Inverts back to subsystem purities.
    pub fn purities(&self) -> Vec<f64> {
        purities_from_lambdas(&self.lambdas, self.q)
    }

    fn is_learnable(&self, mask: usize) -> bool {
        self.lambdas[mask] > DEFAULT.unlearnable_tol
    }
}

/// Channel eigenvalues of an averaged entanglement feature.
pub fn lambdas_from_feature(feature: &EntanglementFeature) -> Result<ShadowEigenvalues> {
    ShadowEigenvalues::from_purities(feature.n_qubits, &feature.table()?)
}

/// Means of the squared shadow norm 1/lambda_P over all Pauli strings P.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowNormMeans {
    pub harmonic: f64,
    pub arithmetic: f64,
    pub geometric: f64,
    /// Pauli strings whose eigenvalue vanishes; left out of the arithmetic
    /// and geometric means.
    pub unlearnable: u64,
}

pub fn shadow_norm_means(l: &ShadowEigenvalues) -> Result<ShadowNormMeans> {
    let w = l.q * l.q - 1.0;
    let d2 = l.q.powi(2 * l.n_qubits as i32);
    let mut harm = 0.0;
    let mut arith = 0.0;
    let mut geo = 0.0;
    let mut included = 0.0;
    let mut unlearnable = 0.0;
    for (a, &lam) in l.lambdas.iter().enumerate() {
        let count = w.powi(a.count_ones() as i32);
        harm += count * lam;
        if l.is_learnable(a) {
            arith += count / lam;
            geo += -count * lam.ln();
            included += count;
        } else {
            unlearnable += count;
        }
    }
    if included <= 1.0 && l.lambdas.len() > 1 {
        return Err(Error::Unlearnable("every non-identity Pauli has a vanishing channel eigenvalue".into()));
    }
    Ok(ShadowNormMeans {
        harmonic: d2 / harm,
        arithmetic: arith / included,
        geometric: (geo / included).exp(),
        unlearnable: unlearnable.round() as u64,
    })
}

/// Shadow-norm means with delete-one-batch jackknife errors.
pub fn shadow_norm_means_jackknife(acc: &FeatureAccumulator) -> Result<(ShadowNormMeans, ShadowNormMeans)> {
    let feature = acc.feature();
    let full = shadow_norm_means(&lambdas_from_feature(&feature)?)?;
    let batches = acc.batches();
    let g = batches.len();
    let mut err = ShadowNormMeans { harmonic: f64::NAN, arithmetic: f64::NAN, geometric: f64::NAN, unlearnable: full.unlearnable };
    if g < 2 {
        return Ok((full, err));
    }
    let subs = batches
        .iter()
        .map(|&b| shadow_norm_means(&ShadowEigenvalues::from_purities(feature.n_qubits, &acc.leave_one_out(b))?))
        .collect::<Result<Vec<_>>>()?;
    let jk = |f: &dyn Fn(&ShadowNormMeans) -> f64| {
        let m = subs.iter().map(f).sum::<f64>() / g as f64;
        (subs.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64).sqrt()
    };
    err.harmonic = jk(&|s| s.harmonic);
    err.arithmetic = jk(&|s| s.arithmetic);
    err.geometric = jk(&|s| s.geometric);
    Ok((full, err))
}

/// Averaged channel of a globally scrambled circuit,
/// `M(X) = lambda X + mu Tr(X) I`, with lambda = s (D P - 1)/(D^2 - 1),
/// mu = s (D - P)/(D^2 - 1) and trace scale s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrescrambledChannel {
    pub dim: f64,
    pub purity: f64,
    pub scale: f64,
}

impl PrescrambledChannel {
    pub fn new(dim: f64, purity: f64) -> Self {
        PrescrambledChannel { dim, purity, scale: 1.0 }
    }

    pub fn with_scale(dim: f64, purity: f64, scale: f64) -> Self {
        PrescrambledChannel { dim, purity, scale }
    }

    /// The channel matching a snapshot prescription, from ensemble moments.
    pub fn for_prescription(p: Prescription, m: &EnsembleMoments) -> Self {
        match p {
            Prescription::Petz => Self::new(m.dim, m.purity.value),
            Prescription::MaxFidelity => Self::new(m.dim, m.einf.value),
            Prescription::LeastSquares => Self::with_scale(m.dim, m.purity_modified.value, m.dim * m.log_mean_pi.exp()),
        }
    }

    pub fn lambda(&self) -> f64 {
        let d = self.dim;
        self.scale * (d * self.purity - 1.0) / (d * d - 1.0)
    }

    pub fn mu(&self) -> f64 {
        let d = self.dim;
        self.scale * (d - self.purity) / (d * d - 1.0)
    }

    pub fn check_invertible(&self) -> Result<()> {
        let threshold = 1.0 / self.dim + DEFAULT.unlearnable_tol;
        if !(self.purity > threshold) || !(self.scale > 0.0) {
            return Err(Error::NonInvertible { purity: self.purity, threshold });
        }
        Ok(())
    }

    /// (a, kappa) with `M^{-1}(Y) = a Y - kappa Tr(Y) I`.
    pub fn inverse_coefficients(&self) -> Result<(f64, f64)> {
        self.check_invertible()?;
        let l = self.lambda();
        Ok((1.0 / l, self.mu() / (l * self.scale)))
    }

    pub fn apply(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let tr = x.trace();
        let mut y = x * C64::from(self.lambda());
        for i in 0..y.nrows() {
            y[(i, i)] += tr * self.mu();
        }
        y
    }

    pub fn invert(&self, y: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let (a, k) = self.inverse_coefficients()?;
        let tr = y.trace();
        let mut x = y * C64::from(a);
        for i in 0..x.nrows() {
            x[(i, i)] -= tr * k;
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prescription {
    /// eta_m = sigma_m.
    Petz,
    /// eta_m = E_m = D pi_m sigma_m.
    LeastSquares,
    /// eta_m = leading eigenvector of sigma_m.
    MaxFidelity,
}

impl std::str::FromStr for Prescription {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "petz" => Ok(Prescription::Petz),
            "least_squares" | "least-squares" => Ok(Prescription::LeastSquares),
            "max_fidelity" | "max-fidelity" => Ok(Prescription::MaxFidelity),
            _ => Err(Error::Parse(format!("unknown prescription '{s}'"))),
        }
    }
}

/// eta_m = weight * state.
#[derive(Clone, Debug)]
pub struct Snapshot<S> {
    pub prescription: Prescription,
    pub state: S,
    pub log_pi: f64,
    pub weight: f64,
}

/// Builds the snapshot for a record. `rng` only breaks ties among degenerate
/// leading eigenvectors.
pub fn make_snapshot<S: Engine>(
    prescription: Prescription,
    real: &CircuitRealization,
    record: &TrajectoryRecord,
    rng: &mut SimRng,
) -> Result<Snapshot<S>> {
    let (sigma, log_pi) = eavesdropper_snapshot::<S>(real, record)?;
    let d = 2f64.powi(real.n_qubits as i32);
    let (state, weight) = match prescription {
        Prescription::Petz => (sigma, 1.0),
        Prescription::LeastSquares => (sigma, d * log_pi.exp()),
        Prescription::MaxFidelity => (sigma.leading_state(rng)?, 1.0),
    };
    Ok(Snapshot { prescription, state, log_pi, weight })
}

pub enum Observable<S> {
    Identity,
    Pauli(PauliString),
    /// |psi><psi| for a pure state psi.
    Projector(S),
}

impl<S: Engine> Observable<S> {
    pub fn trace(&self, dim: f64) -> f64 {
        match self {
            Observable::Identity => dim,
            Observable::Pauli(p) if p.is_identity() => dim,
            Observable::Pauli(_) => 0.0,
            Observable::Projector(_) => 1.0,
        }
    }

    /// Tr(state O) for a unit-trace state.
    pub fn expect(&self, state: &S) -> Result<f64> {
        match self {
            Observable::Identity => Ok(1.0),
            Observable::Pauli(p) => state.pauli_expect(p),
            Observable::Projector(psi) => state.overlap(psi),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Observable::Identity => "I".into(),
            Observable::Pauli(p) => p.to_string(),
            Observable::Projector(_) => "projector".into(),
        }
    }
}

/// How a snapshot is de-noised.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelInverse {
    Prescrambled(PrescrambledChannel),
    /// Pauli-diagonal channel of a Pauli-invariant ensemble (no scrambling).
    PauliModes(ShadowEigenvalues),
}

/// Single-shot estimate Tr(M^{-1}(eta_m) O).
pub fn shot_value<S: Engine>(snap: &Snapshot<S>, obs: &Observable<S>, inverse: &ChannelInverse) -> Result<f64> {
    let dim = 2f64.powi(snap.state.n_qubits() as i32);
    match inverse {
        ChannelInverse::Prescrambled(ch) => {
            let (a, k) = ch.inverse_coefficients()?;
            Ok(snap.weight * (a * obs.expect(&snap.state)? - k * obs.trace(dim)))
        }
        ChannelInverse::PauliModes(l) => {
            if snap.prescription != Prescription::Petz {
                return Err(Error::Unsupported("Pauli-mode inversion is defined for the petz prescription".into()));
            }
            match obs {
                Observable::Identity => Ok(1.0),
                Observable::Pauli(p) => {
                    let lam = l.pauli(p);
                    if lam.abs() <= DEFAULT.unlearnable_tol {
                        return Err(Error::Unlearnable(format!("channel eigenvalue of {p} vanishes")));
                    }
                    Ok(snap.state.pauli_expect(p)? / lam)
                }
                Observable::Projector(_) => Err(Error::Unsupported("Pauli-mode inversion of a projector".into())),
            }
        }
    }
}

/// One experimental shot: the realization seed and the observed record.
#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub index: usize,
    pub realization_seed: u64,
    pub record: TrajectoryRecord,
}

pub fn shot_realization_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[stream::SHOT, index as u64, 0])
}

fn shot_rng(master: u64, index: usize, sub: u64) -> SimRng {
    rng_for(master, &[stream::SHOT, index as u64, sub])
}

/// Runs shot `index` of the experiment on `input`.
pub fn run_shot<S: Engine>(spec: &MonitoredCircuitSpec, input: &S, master: u64, index: usize, input_tag: &str) -> Result<(CircuitRealization, Shot)> {
    let seed = shot_realization_seed(master, index);
    let real = realize(spec, seed)?;
    let mut rng = shot_rng(master, index, 1);
    let (_, record) = run_trajectory(&real, input.clone(), RecordMode::Sample(&mut rng), input_tag)?;
    Ok((real, Shot { index, realization_seed: seed, record }))
}

/// Collects `n_shots` experimental records. Realizations use the shot
/// stream, disjoint from the calibration draws of the same master seed.
pub fn collect_shots<S: Engine>(spec: &MonitoredCircuitSpec, input: &S, n_shots: usize, master: u64) -> Result<Vec<Shot>> {
    fold_indices(
        n_shots,
        Vec::new,
        |acc: &mut Vec<Shot>, i| {
            acc.push(run_shot(spec, input, master, i, "input")?.1);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

/// Per-shot estimator values for a set of recorded shots.
pub fn shot_values<S: Engine>(
    spec: &MonitoredCircuitSpec,
    shots: &[Shot],
    obs: &Observable<S>,
    prescription: Prescription,
    inverse: &ChannelInverse,
    master: u64,
) -> Result<Vec<f64>>
where
    Observable<S>: Sync,
{
    fold_indices(
        shots.len(),
        Vec::new,
        |acc: &mut Vec<f64>, i| {
            let shot = &shots[i];
            let real = realize(spec, shot.realization_seed)?;
            let mut rng = shot_rng(master, shot.index, 2);
            let snap = make_snapshot::<S>(prescription, &real, &shot.record, &mut rng)?;
            acc.push(shot_value(&snap, obs, inverse)?);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub n_shots: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub variance: f64,
}

pub fn summarize(values: &[f64]) -> EstimatorSummary {
    let s: RunningStats = values.iter().copied().collect();
    EstimatorSummary { n_shots: values.len(), estimate: s.mean(), stderr: s.stderr(), variance: s.variance() }
}

/// Mean and standard error of Tr(M^{-1}(eta) P) over snapshots.
pub fn estimate_pauli<S: Engine>(snapshots: &[Snapshot<S>], p: &PauliString, inverse: &ChannelInverse) -> Result<EstimatorSummary> {
    let obs = Observable::<S>::Pauli(p.clone());
    let v = snapshots.iter().map(|s| shot_value(s, &obs, inverse)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(&v))
}

/// Fidelity estimate with a pure target state psi.
pub fn estimate_fidelity<S: Engine>(snapshots: &[Snapshot<S>], psi: &S, inverse: &ChannelInverse) -> Result<EstimatorSummary> {
    let obs = Observable::Projector(psi.clone());
    let v = snapshots.iter().map(|s| shot_value(s, &obs, inverse)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(&v))
}

/// Sample variance with an approximate 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

/// Empirical variance of the per-shot estimator. The interval uses the
/// fourth central moment, so it stays honest for heavy-tailed estimators.
pub fn estimator_variance(values: &[f64]) -> Result<VarianceEstimate> {
    let n = values.len();
    if n < 30 {
        return Err(Error::InvalidArgument(format!("need at least 30 shots for a variance, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let var = m2 * nf / (nf - 1.0);
    let se = ((m4 - m2 * m2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0).sqrt();
    Ok(VarianceEstimate { variance: var, lower: (var - 1.96 * se).max(0.0), upper: var + 1.96 * se, n })
}

/// Monte Carlo E[(Tr M^{-1}(eta_m) O)^2] for m drawn from `input`.
#[allow(clippy::too_many_arguments)]
pub fn shadow_norm_mc<S: Engine>(
    spec: &MonitoredCircuitSpec,
    obs: &Observable<S>,
    input: &S,
    prescription: Prescription,
    inverse: &ChannelInverse,
    n: usize,
    master: u64,
) -> Result<Estimate>
where
    Observable<S>: Sync,
{
    let shots = collect_shots(spec, input, n, master)?;
    let v = shot_values(spec, &shots, obs, prescription, inverse, master)?;
    let s: RunningStats = v.iter().map(|x| x * x).collect();
    Ok(Estimate { value: s.mean(), stderr: s.stderr() })
}

/// JSON summary of one estimation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub observable: String,
    pub prescription: Prescription,
    pub n_shots: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub variance: f64,
    /// Channel eigenvalue used for the inversion, or the calibrated purity.
    pub lambda_or_p: f64,
    pub calibration_meta: serde_json::Value,
}
