//! U(1)-symmetric monitored dynamics and charge learnability.
//!
//! [`ChargeBlockState`] stores a factor K of the trajectory operator
//! `sigma = K K^dag / Tr`, block diagonal in the charge sectors. Columns are
//! input basis states, so forced replays give p(m | Q) for every sector at once.

use crate::circuit::{realize, run_trajectory, run_trajectory_checkpointed, CircuitGate, CircuitRealization, MonitoredCircuitSpec, Prescrambler, RecordMode, TrajectoryRecord};
use crate::dense::{DenseState, SpectralMoments, TwoQubitGate};
use crate::engine::{Engine, MeasureOutcome};
use crate::ensemble::{fold_indices, realization_seed, trajectory_rng};
use crate::error::{Error, Result};
use crate::haar::{haar_unitary, random_phase};
use crate::pauli::PauliString;
use crate::seed::SimRng;
use crate::stats::{linear_fit, LinearFit, RunningStats};
use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Random U(1)-symmetric gate diag(e^{i a}, U_2, e^{i b}) in the basis
/// 00, 01, 10, 11, with U_2 Haar on the single-excitation block.
pub fn u1_haar_gate<R: Rng + ?Sized>(sites: (usize, usize), rng: &mut R) -> Result<TwoQubitGate> {
    let u2 = haar_unitary(2, rng);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = random_phase(rng);
    m[(1, 1)] = u2[(0, 0)];
    m[(1, 2)] = u2[(0, 1)];
    m[(2, 1)] = u2[(1, 0)];
    m[(2, 2)] = u2[(1, 1)];
    m[(3, 3)] = random_phase(rng);
    TwoQubitGate::new(m, sites)
}

/// Whether a two-qubit gate commutes with Z_a + Z_b.
pub fn is_charge_conserving(m: &Matrix4<C64>, tol: f64) -> bool {
    let block = [0, 1, 1, 2];
    (0..4).all(|r| (0..4).all(|c| block[r] == block[c] || m[(r, c)].norm() <= tol))
}

/// Eigenvalue of Q = (1/2) sum Z_i on basis state x.
pub fn charge_of(n: usize, x: usize) -> f64 {
    n as f64 / 2.0 - x.count_ones() as f64
}

/// Diagonal of Q.
pub fn charge_operator(n: usize) -> Vec<f64> {
    (0..1usize << n).map(|x| charge_of(n, x)).collect()
}

/// A charge sector: eigenvalue and the basis states spanning it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    pub charge: f64,
    pub basis: Vec<usize>,
}

impl Sector {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn projector(&self, n: usize) -> DMatrix<C64> {
        let d = 1usize << n;
        let mut m = DMatrix::zeros(d, d);
        for &x in &self.basis {
            m[(x, x)] = C64::new(1.0, 0.0);
        }
        m
    }
}

/// Sectors ordered by number of excitations w = 0..N (charge N/2 - w).
pub fn sector_projectors(n: usize) -> Vec<Sector> {
    let mut s: Vec<Sector> = (0..=n).map(|w| Sector { charge: n as f64 / 2.0 - w as f64, basis: Vec::new() }).collect();
    for x in 0..1usize << n {
        s[x.count_ones() as usize].basis.push(x);
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeBlockState {
    n: usize,
    /// Per sector: basis states in that sector.
    basis: Vec<Vec<usize>>,
    /// Position of each basis state inside its sector.
    pos: Vec<usize>,
    /// Row-major d_w x d_w blocks of K.
    blocks: Vec<Vec<C64>>,
    log_weight: f64,
}

impl ChargeBlockState {
    fn empty(n: usize) -> Result<Self> {
        if n > 20 {
            return Err(Error::TooManyQubits { n, limit: 20, engine: "charge-block" });
        }
        let sectors = sector_projectors(n);
        let mut pos = vec![0; 1 << n];
        for s in &sectors {
            for (i, &x) in s.basis.iter().enumerate() {
                pos[x] = i;
            }
        }
        let blocks = sectors.iter().map(|s| vec![ZERO; s.rank() * s.rank()]).collect();
        Ok(ChargeBlockState { n, basis: sectors.into_iter().map(|s| s.basis).collect(), pos, blocks, log_weight: 0.0 })
    }

    /// K = I / sqrt(D), i.e. the fully mixed state.
    pub fn fully_mixed(n: usize) -> Result<Self> {
        let mut s = Self::empty(n)?;
        let amp = (1.0 / (1u64 << n) as f64).sqrt();
        for (w, b) in s.blocks.iter_mut().enumerate() {
            let d = s.basis[w].len();
            for i in 0..d {
                b[i * d + i] = C64::new(amp, 0.0);
            }
        }
        Ok(s)
    }

    /// Pi_Q / rank for the sector with `w` excitations.
    pub fn sector_mixed(n: usize, w: usize) -> Result<Self> {
        let mut s = Self::empty(n)?;
        if w > n {
            return Err(Error::InvalidArgument(format!("sector {w} does not exist for {n} qubits")));
        }
        let d = s.basis[w].len();
        let amp = (1.0 / d as f64).sqrt();
        for i in 0..d {
            s.blocks[w][i * d + i] = C64::new(amp, 0.0);
        }
        Ok(s)
    }

    pub fn basis_state(n: usize, bits: u64) -> Result<Self> {
        let mut s = Self::empty(n)?;
        let x = bits as usize;
        if x >> n != 0 {
            return Err(Error::InvalidArgument(format!("basis index {x} out of range")));
        }
        let w = x.count_ones() as usize;
        let d = s.basis[w].len();
        let i = s.pos[x];
        s.blocks[w][i * d + i] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Sector weights Tr(Pi_w sigma), w = number of excitations.
    pub fn sector_weights(&self) -> Vec<f64> {
        let total: f64 = self.blocks.iter().flatten().map(|z| z.norm_sqr()).sum();
        self.blocks.iter().map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>() / total).collect()
    }

    /// Tr(K Pi_w K^dag) / rank(Pi_w) per input sector, relative to the total.
    pub fn input_sector_likelihoods(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .zip(&self.basis)
            .map(|(b, basis)| b.iter().map(|z| z.norm_sqr()).sum::<f64>() / basis.len() as f64)
            .collect()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            Err(Error::SiteOutOfRange { site, n_qubits: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, gate: &TwoQubitGate) -> Result<()> {
        let u = gate.matrix();
        if !is_charge_conserving(u, 1e-12) {
            return Err(Error::Unsupported("gate does not conserve charge".into()));
        }
        let (a, b) = gate.sites();
        self.check_site(a)?;
        self.check_site(b)?;
        let (ma, mb) = (1usize << a, 1usize << b);
        for w in 0..self.blocks.len() {
            let d = self.basis[w].len();
            for i in 0..d {
                let x = self.basis[w][i];
                let (ba, bb) = (x & ma != 0, x & mb != 0);
                match (ba, bb) {
                    (false, false) => scale_row(&mut self.blocks[w], d, i, u[(0, 0)]),
                    (true, true) => scale_row(&mut self.blocks[w], d, i, u[(3, 3)]),
                    (false, true) => {
                        let j = self.pos[x ^ ma ^ mb];
                        let blk = &mut self.blocks[w];
                        for c in 0..d {
                            let r01 = blk[i * d + c];
                            let r10 = blk[j * d + c];
                            blk[i * d + c] = u[(1, 1)] * r01 + u[(1, 2)] * r10;
                            blk[j * d + c] = u[(2, 1)] * r01 + u[(2, 2)] * r10;
                        }
                    }
                    (true, false) => {}
                }
            }
        }
        Ok(())
    }

    fn split(&self, site: usize, outcome: u8) -> (f64, f64) {
        let m = 1usize << site;
        let want = if outcome == 0 { 0 } else { m };
        let mut kept = 0.0;
        let mut total = 0.0;
        for (w, blk) in self.blocks.iter().enumerate() {
            let d = self.basis[w].len();
            for i in 0..d {
                let r: f64 = blk[i * d..(i + 1) * d].iter().map(|z| z.norm_sqr()).sum();
                total += r;
                if self.basis[w][i] & m == want {
                    kept += r;
                }
            }
        }
        (kept, total)
    }

    fn project(&mut self, site: usize, outcome: u8, kept: f64) {
        let m = 1usize << site;
        let want = if outcome == 0 { 0 } else { m };
        let f = 1.0 / kept.sqrt();
        for (w, blk) in self.blocks.iter_mut().enumerate() {
            let d = self.basis[w].len();
            for i in 0..d {
                let keep = self.basis[w][i] & m == want;
                for z in &mut blk[i * d..(i + 1) * d] {
                    *z = if keep { *z * f } else { ZERO };
                }
            }
        }
    }

    pub fn measure_z_sample<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        let (k0, total) = self.split(site, 0);
        let outcome = if rng.random::<f64>() < k0 / total { 0 } else { 1 };
        let (kept, _) = self.split(site, outcome);
        self.project(site, outcome, kept);
        Ok(MeasureOutcome { outcome, probability: kept / total })
    }

    pub fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        let (kept, total) = self.split(site, outcome);
        let p = kept / total;
        if !(p > crate::settings::DEFAULT.zero_probability) {
            return Err(Error::ImpossibleRecord { site, outcome });
        }
        self.project(site, outcome, kept);
        self.log_weight += p.ln();
        Ok(MeasureOutcome { outcome, probability: p })
    }

    fn gram_blocks(&self) -> Vec<DMatrix<C64>> {
        self.blocks
            .iter()
            .zip(&self.basis)
            .map(|(b, basis)| {
                let d = basis.len();
                let k = DMatrix::from_row_slice(d, d, b);
                &k * k.adjoint()
            })
            .collect()
    }

    /// Dense sigma (small N only).
    pub fn to_dense(&self) -> Result<DenseState> {
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for (g, basis) in self.gram_blocks().iter().zip(&self.basis) {
            for (i, &x) in basis.iter().enumerate() {
                for (j, &y) in basis.iter().enumerate() {
                    m[(x, y)] = g[(i, j)];
                }
            }
        }
        let mut s = DenseState::from_matrix(self.n, &m)?;
        s.set_log_weight(self.log_weight);
        Ok(s)
    }
}

fn scale_row(blk: &mut [C64], d: usize, i: usize, f: C64) {
    for z in &mut blk[i * d..(i + 1) * d] {
        *z *= f;
    }
}

impl Engine for ChargeBlockState {
    const NAME: &'static str = "charge-block";

    fn fully_mixed(n_qubits: usize) -> Result<Self> {
        ChargeBlockState::fully_mixed(n_qubits)
    }

    fn basis_state(n_qubits: usize, bits: u64) -> Result<Self> {
        ChargeBlockState::basis_state(n_qubits, bits)
    }

    fn n_qubits(&self) -> usize {
        self.n
    }

    fn apply_circuit_gate(&mut self, gate: &CircuitGate, adjoint: bool) -> Result<()> {
        if adjoint {
            self.apply_gate(&gate.gate.adjoint())
        } else {
            self.apply_gate(&gate.gate)
        }
    }

    fn apply_prescrambler(&mut self, _p: &Prescrambler, _adjoint: bool) -> Result<()> {
        Err(Error::Unsupported("global prescramblers break charge conservation".into()))
    }

    fn measure_z_sample(&mut self, site: usize, rng: &mut SimRng) -> Result<MeasureOutcome> {
        ChargeBlockState::measure_z_sample(self, site, rng)
    }

    fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        ChargeBlockState::measure_z_forced(self, site, outcome)
    }

    fn log_weight(&self) -> f64 {
        self.log_weight
    }

    fn set_log_weight(&mut self, w: f64) {
        self.log_weight = w;
    }

    fn purity(&self) -> f64 {
        self.gram_blocks().iter().map(|g| g.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    fn all_subsystem_purities(&self) -> Result<Vec<f64>> {
        self.to_dense().map(|d| d.all_subsystem_purities())
    }

    fn spectral_moments(&self) -> Result<SpectralMoments> {
        let mut ev = Vec::new();
        for g in self.gram_blocks() {
            ev.extend(g.symmetric_eigen().eigenvalues.iter().map(|x| x.max(0.0)));
        }
        Ok(SpectralMoments {
            purity: ev.iter().map(|x| x * x).sum(),
            purity3: ev.iter().map(|x| x * x * x).sum(),
            max_eigenvalue: ev.iter().cloned().fold(0.0, f64::max),
        })
    }

    fn pauli_expect(&self, p: &PauliString) -> Result<f64> {
        if p.x_mask() != 0 {
            return self.to_dense()?.pauli_expect(p);
        }
        let z = p.z_mask() as usize;
        let mut s = 0.0;
        for (w, blk) in self.blocks.iter().enumerate() {
            let d = self.basis[w].len();
            for i in 0..d {
                let r: f64 = blk[i * d..(i + 1) * d].iter().map(|v| v.norm_sqr()).sum();
                s += if (self.basis[w][i] & z).count_ones() % 2 == 0 { r } else { -r };
            }
        }
        Ok(s)
    }

    fn overlap(&self, other: &Self) -> Result<f64> {
        self.to_dense()?.overlap(&other.to_dense()?)
    }

    fn leading_state(&self, rng: &mut SimRng) -> Result<Self> {
        let _ = rng;
        Err(Error::Unsupported("leading eigenvector in the charge-block engine".into()))
    }

    fn charge_moments(&self) -> Result<(f64, f64)> {
        let w = self.sector_weights();
        let q: Vec<f64> = (0..=self.n).map(|k| self.n as f64 / 2.0 - k as f64).collect();
        Ok((w.iter().zip(&q).map(|(a, b)| a * b).sum(), w.iter().zip(&q).map(|(a, b)| a * b * b).sum()))
    }
}

/// Charge fluctuation statistics at checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeStats {
    pub n_qubits: usize,
    pub times: Vec<usize>,
    /// Trajectory average of <Q^2> - <Q>^2.
    pub delta_q: Vec<f64>,
    pub delta_q_stderr: Vec<f64>,
    /// Variance across trajectories of <Q>.
    pub var_q: Vec<f64>,
    pub var_q_stderr: Vec<f64>,
    pub delta_q0: f64,
    pub n_traj: usize,
}

impl ChargeStats {
    /// CSV `t,deltaQ,stderr,varQ,bound`; the bound is `inf` before any
    /// charge information has been gathered.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,deltaQ,stderr,varQ,bound\n");
        for i in 0..self.times.len() {
            let b = charge_shadow_bound(self.delta_q[i], self.delta_q0).unwrap_or(f64::INFINITY);
            let _ = writeln!(s, "{},{},{},{},{}", self.times[i], self.delta_q[i], self.delta_q_stderr[i], self.var_q[i], b);
        }
        s
    }
}

/// Charge statistics of fully-mixed-input trajectories at each checkpoint.
pub fn sharpening_curve<S: Engine>(spec: &MonitoredCircuitSpec, times: &[usize], n_traj: usize, master: u64) -> Result<ChargeStats> {
    let tmax = times.iter().copied().max().unwrap_or(0);
    let mut spec = spec.clone();
    spec.depth = tmax;
    let n = spec.n_qubits;
    let k = times.len();
    // per checkpoint: stats of delta, of <Q>, of <Q>^2
    let acc = fold_indices(
        n_traj,
        || vec![[RunningStats::new(); 3]; k],
        |acc, i| {
            let real = realize(&spec, realization_seed(master, i))?;
            let mut rng = trajectory_rng(master, i);
            let input = S::fully_mixed(n)?;
            run_trajectory_checkpointed(&real, input, RecordMode::Sample(&mut rng), "fully_mixed", |l, st, _| {
                for (j, &t) in times.iter().enumerate() {
                    if t == l {
                        let (q1, q2) = st.charge_moments()?;
                        acc[j][0].push(q2 - q1 * q1);
                        acc[j][1].push(q1);
                        acc[j][2].push(q1 * q1);
                    }
                }
                Ok(())
            })?;
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                for c in 0..3 {
                    x[c].merge(&y[c]);
                }
            }
        },
    )?;
    Ok(ChargeStats {
        n_qubits: n,
        times: times.to_vec(),
        delta_q: acc.iter().map(|a| a[0].mean()).collect(),
        delta_q_stderr: acc.iter().map(|a| a[0].stderr()).collect(),
        var_q: acc.iter().map(|a| a[2].mean() - a[1].mean() * a[1].mean()).collect(),
        var_q_stderr: acc.iter().map(|a| a[2].stderr()).collect(),
        delta_q0: n as f64 / 4.0,
        n_traj,
    })
}

/// Lower bound on the averaged squared shadow norm of Q.
pub fn charge_shadow_bound(delta_q: f64, delta_q0: f64) -> Result<f64> {
    if !(delta_q < delta_q0) {
        return Err(Error::Unlearnable("no charge information in the records yet".into()));
    }
    Ok(delta_q0 / (1.0 - delta_q / delta_q0))
}

/// First time delta_Q drops to `eps * delta_Q0`, interpolated linearly.
pub fn sharpening_time(curve: &ChargeStats, eps: f64) -> Result<f64> {
    let thr = eps * curve.delta_q0;
    for j in 0..curve.times.len() {
        if curve.delta_q[j] <= thr {
            if j == 0 {
                return Ok(curve.times[0] as f64);
            }
            let (t0, t1) = (curve.times[j - 1] as f64, curve.times[j] as f64);
            let (d0, d1) = (curve.delta_q[j - 1], curve.delta_q[j]);
            return Ok(t0 + (d0 - thr) / (d0 - d1) * (t1 - t0));
        }
    }
    Err(Error::NoCrossing)
}

/// Fits delta_Q = delta_Q0 exp(-c t / N) over checkpoints with `t >= t_min`
/// and positive delta_Q; returns c and the underlying fit.
pub fn fit_sharpening_rate(curve: &ChargeStats, t_min: usize) -> Result<(f64, LinearFit)> {
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.delta_q)
        .filter(|(t, d)| **t >= t_min && **d > 0.0)
        .map(|(t, d)| (*t as f64, (d / curve.delta_q0).ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::InvalidArgument("not enough checkpoints to fit".into()));
    }
    let f = linear_fit(&x, &y);
    Ok((-f.slope * curve.n_qubits as f64, f))
}

/// Posterior p(Q | m) for the records of a realization, given a prior over
/// sectors w = 0..N (charge N/2 - w).
pub fn charge_posterior(real: &CircuitRealization, record: &TrajectoryRecord, prior: &[f64]) -> Result<Vec<f64>> {
    let n = real.n_qubits;
    if prior.len() != n + 1 {
        return Err(Error::LengthMismatch { expected: n + 1, found: prior.len() });
    }
    let z: f64 = prior.iter().sum();
    if (z - 1.0).abs() > 1e-8 || prior.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidArgument("prior must be a probability vector".into()));
    }
    let (state, _) = run_trajectory(real, ChargeBlockState::fully_mixed(n)?, RecordMode::Forced(record), "fully_mixed")?;
    let like = state.input_sector_likelihoods();
    let post: Vec<f64> = prior.iter().zip(&like).map(|(p, l)| p * l).collect();
    let s: f64 = post.iter().sum();
    if !(s > 0.0) {
        return Err(Error::ImpossibleRecord { site: 0, outcome: 0 });
    }
    Ok(post.into_iter().map(|p| p / s).collect())
}
