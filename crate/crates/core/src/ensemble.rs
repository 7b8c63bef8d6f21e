//! Monte Carlo over the dual trajectory ensemble {(pi_m, sigma_m)}.
//!
//! Every trajectory uses a fresh circuit realization. Seeds are derived from
//! (master seed, stream, index) and per-chunk partial results are merged in
//! index order, so results do not depend on the worker count.

use crate::circuit::{realize, run_trajectory_checkpointed, sample_dual, CircuitRealization, MonitoredCircuitSpec, RecordMode, TrajectoryRecord};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, stream, SimRng};
use crate::stats::{log_sum_exp, weighted_mean, RunningStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Trajectories folded sequentially inside one parallel task.
pub const CHUNK: usize = 16;
/// Batches kept for jackknife error bars.
pub const BATCHES: usize = 20;

pub fn realization_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[stream::REALIZATION, index as u64])
}

pub fn trajectory_rng(master: u64, index: usize) -> SimRng {
    rng_for(master, &[stream::TRAJECTORY, index as u64])
}

/// Folds `step` over trajectory indices `0..n` in parallel chunks and merges
/// the chunk accumulators in index order.
pub fn fold_indices<A, I, F, M>(n: usize, init: I, step: F, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<A>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                step(&mut acc, i)?;
            }
            Ok(acc)
        })
        .collect();
    let mut out = init();
    for p in parts {
        merge(&mut out, p?);
    }
    Ok(out)
}

/// One draw from the dual ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleSample<S> {
    pub index: usize,
    pub state: S,
    pub log_pi: f64,
    pub record: TrajectoryRecord,
    pub realization: CircuitRealization,
}

/// Draw `index` of the ensemble for (spec, master seed).
pub fn ensemble_draw<S: Engine>(spec: &MonitoredCircuitSpec, master: u64, index: usize) -> Result<EnsembleSample<S>> {
    let real = realize(spec, realization_seed(master, index))?;
    let mut rng = trajectory_rng(master, index);
    let (state, record) = sample_dual::<S>(&real, &mut rng)?;
    Ok(EnsembleSample { index, state, log_pi: record.log_prob, record, realization: real })
}

/// Lazy stream of `n_traj` ensemble draws.
pub fn sample_ensemble<S: Engine>(
    spec: &MonitoredCircuitSpec,
    n_traj: usize,
    master: u64,
) -> impl Iterator<Item = Result<EnsembleSample<S>>> + '_ {
    (0..n_traj).map(move |i| ensemble_draw::<S>(spec, master, i))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub mask: u64,
    pub purity: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Averaged subsystem purities, indexed by subset mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementFeature {
    pub n_qubits: usize,
    pub entries: Vec<FeatureEntry>,
}

impl EntanglementFeature {
    /// Exact feature from explicit purities (no statistical error).
    pub fn exact(n_qubits: usize, purities: &[f64]) -> Result<Self> {
        if purities.len() != 1 << n_qubits {
            return Err(Error::LengthMismatch { expected: 1 << n_qubits, found: purities.len() });
        }
        let entries = purities
            .iter()
            .enumerate()
            .map(|(m, &p)| FeatureEntry { mask: m as u64, purity: if m == 0 { 1.0 } else { p }, stderr: 0.0, n: 0 })
            .collect();
        Ok(EntanglementFeature { n_qubits, entries })
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == 1 << self.n_qubits && self.entries.iter().enumerate().all(|(i, e)| e.mask == i as u64)
    }

    /// Purity table over all subsets.
    pub fn table(&self) -> Result<Vec<f64>> {
        if !self.is_complete() {
            return Err(Error::InvalidArgument("feature does not cover every subset".into()));
        }
        Ok(self.entries.iter().map(|e| e.purity).collect())
    }

    pub fn get(&self, mask: u64) -> Option<&FeatureEntry> {
        self.entries.iter().find(|e| e.mask == mask)
    }

    /// CSV with columns `subset_mask,purity,stderr,n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subset_mask,purity,stderr,n\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{},{}", e.mask, e.purity, e.stderr, e.n);
        }
        s
    }

    pub fn from_csv(n_qubits: usize, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", i + 1)));
            }
            let perr = |e: String| Error::Parse(format!("line {}: {e}", i + 1));
            entries.push(FeatureEntry {
                mask: f[0].trim().parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?,
                purity: f[1].trim().parse().map_err(|e: std::num::ParseFloatError| perr(e.to_string()))?,
                stderr: f[2].trim().parse().map_err(|e: std::num::ParseFloatError| perr(e.to_string()))?,
                n: f[3].trim().parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?,
            });
        }
        Ok(EntanglementFeature { n_qubits, entries })
    }
}

/// Which subsets to tabulate.
#[derive(Clone, Debug, PartialEq)]
pub enum Subsets {
    All,
    List(Vec<u64>),
}

/// Streaming accumulator for features, with batch sums for jackknife.
#[derive(Clone, Debug)]
pub struct FeatureAccumulator {
    pub n_qubits: usize,
    pub masks: Vec<u64>,
    pub stats: Vec<RunningStats>,
    pub batch_sums: Vec<Vec<f64>>,
    pub batch_counts: Vec<u64>,
}

impl FeatureAccumulator {
    pub fn new(n_qubits: usize, subsets: &Subsets) -> Self {
        let masks: Vec<u64> = match subsets {
            Subsets::All => (0..1u64 << n_qubits).collect(),
            Subsets::List(v) => v.clone(),
        };
        let m = masks.len();
        FeatureAccumulator {
            n_qubits,
            masks,
            stats: vec![RunningStats::new(); m],
            batch_sums: vec![vec![0.0; m]; BATCHES],
            batch_counts: vec![0; BATCHES],
        }
    }

    pub fn push<S: Engine>(&mut self, index: usize, state: &S) -> Result<()> {
        let all;
        let values: Vec<f64> = if self.masks.len() == 1 << self.n_qubits {
            all = state.all_subsystem_purities()?;
            all
        } else {
            let full = state.all_subsystem_purities()?;
            self.masks.iter().map(|&m| full[m as usize]).collect()
        };
        let b = index % BATCHES;
        for (i, v) in values.iter().enumerate() {
            let v = if self.masks[i] == 0 { 1.0 } else { *v };
            self.stats[i].push(v);
            self.batch_sums[b][i] += v;
        }
        self.batch_counts[b] += 1;
        Ok(())
    }

    pub fn merge(&mut self, o: FeatureAccumulator) {
        for (a, b) in self.stats.iter_mut().zip(&o.stats) {
            a.merge(b);
        }
        for (a, b) in self.batch_sums.iter_mut().zip(&o.batch_sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.batch_counts.iter_mut().zip(&o.batch_counts) {
            *a += b;
        }
    }

    pub fn feature(&self) -> EntanglementFeature {
        let entries = self
            .masks
            .iter()
            .zip(&self.stats)
            .map(|(&mask, s)| FeatureEntry {
                mask,
                purity: if mask == 0 { 1.0 } else { s.mean() },
                stderr: if mask == 0 { 0.0 } else { s.stderr() },
                n: s.count(),
            })
            .collect();
        EntanglementFeature { n_qubits: self.n_qubits, entries }
    }

    /// Features with batch `skip` removed, for delete-one-batch jackknife.
    pub fn leave_one_out(&self, skip: usize) -> Vec<f64> {
        let m = self.masks.len();
        let mut sum = vec![0.0; m];
        let mut count = 0u64;
        for b in 0..BATCHES {
            if b == skip {
                continue;
            }
            for i in 0..m {
                sum[i] += self.batch_sums[b][i];
            }
            count += self.batch_counts[b];
        }
        sum.iter().zip(&self.masks).map(|(s, &mk)| if mk == 0 { 1.0 } else { s / count as f64 }).collect()
    }

    /// Non-empty batch indices.
    pub fn batches(&self) -> Vec<usize> {
        (0..BATCHES).filter(|&b| self.batch_counts[b] > 0).collect()
    }
}

/// Feature from any stream of states.
pub fn entanglement_feature<S: Engine>(
    stream: impl IntoIterator<Item = Result<EnsembleSample<S>>>,
    n_qubits: usize,
    subsets: &Subsets,
) -> Result<EntanglementFeature> {
    let mut acc = FeatureAccumulator::new(n_qubits, subsets);
    for s in stream {
        let s = s?;
        acc.push(s.index, &s.state)?;
    }
    Ok(acc.feature())
}

/// Parallel feature run over `n_traj` ensemble draws.
pub fn feature_run<S: Engine>(spec: &MonitoredCircuitSpec, n_traj: usize, master: u64, subsets: &Subsets) -> Result<FeatureAccumulator> {
    let n = spec.n_qubits;
    fold_indices(
        n_traj,
        || FeatureAccumulator::new(n, subsets),
        |acc, i| {
            let d = ensemble_draw::<S>(spec, master, i)?;
            acc.push(i, &d.state)
        },
        |a, b| a.merge(b),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Purity moments of the dual ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    pub n: usize,
    pub dim: f64,
    /// E_pi[Tr sigma^2].
    pub purity: Estimate,
    /// E_pi[Tr sigma^3].
    pub purity3: Estimate,
    /// Purity under the modified weights pi_tilde proportional to pi^2.
    pub purity_modified: Estimate,
    /// E_pi[largest eigenvalue].
    pub einf: Estimate,
    /// log E_pi[pi_m], the log of the realization-averaged sum of pi_m^2.
    pub log_mean_pi: f64,
    pub ess: f64,
    pub low_ess: bool,
}

/// Per-trajectory moment inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSample {
    pub log_pi: f64,
    pub purity: f64,
    pub purity3: f64,
    pub max_eigenvalue: f64,
}

impl MomentSample {
    pub fn of<S: Engine>(state: &S, log_pi: f64) -> Result<Self> {
        let m = state.spectral_moments()?;
        Ok(MomentSample { log_pi, purity: m.purity, purity3: m.purity3, max_eigenvalue: m.max_eigenvalue })
    }
}

pub fn moments_from_samples(n_qubits: usize, samples: &[MomentSample]) -> Result<EnsembleMoments> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty stream".into()));
    }
    let est = |f: &dyn Fn(&MomentSample) -> f64| {
        let s: RunningStats = samples.iter().map(f).collect();
        Estimate { value: s.mean(), stderr: s.stderr() }
    };
    let log_w: Vec<f64> = samples.iter().map(|s| s.log_pi).collect();
    let vals: Vec<f64> = samples.iter().map(|s| s.purity).collect();
    let wm = weighted_mean(&vals, &log_w);
    Ok(EnsembleMoments {
        n: samples.len(),
        dim: 2f64.powi(n_qubits as i32),
        purity: est(&|s| s.purity),
        purity3: est(&|s| s.purity3),
        purity_modified: Estimate { value: wm.mean, stderr: wm.stderr },
        einf: est(&|s| s.max_eigenvalue),
        log_mean_pi: log_sum_exp(&log_w) - (samples.len() as f64).ln(),
        ess: wm.ess,
        low_ess: wm.ess < 10.0,
    })
}

pub fn moments<S: Engine>(stream: impl IntoIterator<Item = Result<EnsembleSample<S>>>, n_qubits: usize) -> Result<EnsembleMoments> {
    let samples = stream
        .into_iter()
        .map(|s| s.and_then(|s| MomentSample::of(&s.state, s.log_pi)))
        .collect::<Result<Vec<_>>>()?;
    moments_from_samples(n_qubits, &samples)
}

/// Parallel moment run over `n_traj` ensemble draws.
pub fn moments_run<S: Engine>(spec: &MonitoredCircuitSpec, n_traj: usize, master: u64) -> Result<EnsembleMoments> {
    let samples = fold_indices(
        n_traj,
        Vec::new,
        |acc: &mut Vec<MomentSample>, i| {
            let d = ensemble_draw::<S>(spec, master, i)?;
            acc.push(MomentSample::of(&d.state, d.log_pi)?);
            Ok(())
        },
        |a, b| a.extend(b),
    )?;
    moments_from_samples(spec.n_qubits, &samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    /// Mean Renyi-2 entropy density E[S_2]/N.
    pub s: f64,
    pub stderr: f64,
    /// Mean purity at this checkpoint.
    pub purity: f64,
    pub purity_stderr: f64,
    pub n: u64,
}

/// Entropy density s(t) of the fully-mixed-input trajectories at the given
/// checkpoints (completed layers). The circuit depth is `max(times)`.
pub fn purification_curve<S: Engine>(spec: &MonitoredCircuitSpec, times: &[usize], n_traj: usize, master: u64) -> Result<Vec<CurvePoint>> {
    let tmax = times.iter().copied().max().unwrap_or(0);
    let mut spec = spec.clone();
    spec.depth = tmax;
    let n = spec.n_qubits;
    let k = times.len();
    let acc = fold_indices(
        n_traj,
        || (vec![RunningStats::new(); k], vec![RunningStats::new(); k]),
        |acc, i| {
            let real = realize(&spec, realization_seed(master, i))?;
            let mut rng = trajectory_rng(master, i);
            let input = S::fully_mixed(n)?;
            run_trajectory_checkpointed(&real, input, RecordMode::Sample(&mut rng), "fully_mixed", |l, st, _| {
                for (j, &t) in times.iter().enumerate() {
                    if t == l {
                        acc.0[j].push(st.renyi2_bits() / n as f64);
                        acc.1[j].push(st.purity());
                    }
                }
                Ok(())
            })?;
            Ok(())
        },
        |a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                x.merge(y);
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                x.merge(y);
            }
        },
    )?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| CurvePoint {
            t,
            s: acc.0[j].mean(),
            stderr: acc.0[j].stderr(),
            purity: acc.1[j].mean(),
            purity_stderr: acc.1[j].stderr(),
            n: acc.0[j].count(),
        })
        .collect())
}
