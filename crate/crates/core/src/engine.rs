//! The interface shared by the simulation engines.

use crate::circuit::{CircuitGate, Prescrambler};
use crate::dense::{DenseState, SpectralMoments};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::seed::SimRng;
use crate::stab::StabilizerMixedState;

/// Result of a single projective measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureOutcome {
    pub outcome: u8,
    pub probability: f64,
}

/// A trajectory state: normalized operator plus an accumulated log weight.
pub trait Engine: Clone + Send + Sync + Sized {
    const NAME: &'static str;

    fn fully_mixed(n_qubits: usize) -> Result<Self>;
    /// |x><x| with qubit k in state bit k of `bits`.
    fn basis_state(n_qubits: usize, bits: u64) -> Result<Self>;
    fn n_qubits(&self) -> usize;
    fn apply_circuit_gate(&mut self, gate: &CircuitGate, adjoint: bool) -> Result<()>;
    fn apply_prescrambler(&mut self, p: &Prescrambler, adjoint: bool) -> Result<()>;
    fn measure_z_sample(&mut self, site: usize, rng: &mut SimRng) -> Result<MeasureOutcome>;
    fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome>;
    fn log_weight(&self) -> f64;
    fn set_log_weight(&mut self, w: f64);
    fn purity(&self) -> f64;
    fn all_subsystem_purities(&self) -> Result<Vec<f64>>;
    fn spectral_moments(&self) -> Result<SpectralMoments>;
    fn pauli_expect(&self, p: &PauliString) -> Result<f64>;
    /// Tr(self * other).
    fn overlap(&self, other: &Self) -> Result<f64>;
    /// A pure state maximizing the overlap with self (random among ties for
    /// flat spectra).
    fn leading_state(&self, rng: &mut SimRng) -> Result<Self>;
    /// (<Q>, <Q^2>) for Q = (1/2) sum_i Z_i.
    fn charge_moments(&self) -> Result<(f64, f64)>;
    /// Renyi-2 entropy in bits.
    fn renyi2_bits(&self) -> f64 {
        -self.purity().log2()
    }
}

pub fn charge_diagonal(n: usize) -> Vec<f64> {
    (0..1usize << n).map(|x| n as f64 / 2.0 - x.count_ones() as f64).collect()
}

impl Engine for DenseState {
    const NAME: &'static str = "dense";

    fn fully_mixed(n_qubits: usize) -> Result<Self> {
        DenseState::fully_mixed(n_qubits)
    }

    fn basis_state(n_qubits: usize, bits: u64) -> Result<Self> {
        DenseState::basis_state(n_qubits, bits as usize)
    }

    fn n_qubits(&self) -> usize {
        DenseState::n_qubits(self)
    }

    fn apply_circuit_gate(&mut self, gate: &CircuitGate, adjoint: bool) -> Result<()> {
        if adjoint {
            self.apply_gate(&gate.gate.adjoint())
        } else {
            self.apply_gate(&gate.gate)
        }
    }

    fn apply_prescrambler(&mut self, p: &Prescrambler, adjoint: bool) -> Result<()> {
        let u = p.dense_unitary()?;
        if adjoint {
            self.apply_unitary(&u.adjoint())
        } else {
            self.apply_unitary(u)
        }
    }

    fn measure_z_sample(&mut self, site: usize, rng: &mut SimRng) -> Result<MeasureOutcome> {
        DenseState::measure_z_sample(self, site, rng)
    }

    fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        DenseState::measure_z_forced(self, site, outcome)
    }

    fn log_weight(&self) -> f64 {
        DenseState::log_weight(self)
    }

    fn set_log_weight(&mut self, w: f64) {
        DenseState::set_log_weight(self, w)
    }

    fn purity(&self) -> f64 {
        DenseState::purity(self)
    }

    fn all_subsystem_purities(&self) -> Result<Vec<f64>> {
        Ok(DenseState::all_subsystem_purities(self))
    }

    fn spectral_moments(&self) -> Result<SpectralMoments> {
        DenseState::spectral_moments(self)
    }

    fn pauli_expect(&self, p: &PauliString) -> Result<f64> {
        DenseState::pauli_expect(self, p)
    }

    fn overlap(&self, other: &Self) -> Result<f64> {
        DenseState::overlap(self, other)
    }

    fn leading_state(&self, _rng: &mut SimRng) -> Result<Self> {
        let v = self.leading_eigenvector()?;
        DenseState::from_pure(self.n_qubits(), &v)
    }

    fn charge_moments(&self) -> Result<(f64, f64)> {
        let q = charge_diagonal(self.n_qubits());
        let q2: Vec<f64> = q.iter().map(|v| v * v).collect();
        Ok((self.diagonal_expect(&q), self.diagonal_expect(&q2)))
    }
}

impl Engine for StabilizerMixedState {
    const NAME: &'static str = "stabilizer";

    fn fully_mixed(n_qubits: usize) -> Result<Self> {
        StabilizerMixedState::fully_mixed(n_qubits)
    }

    fn basis_state(n_qubits: usize, bits: u64) -> Result<Self> {
        StabilizerMixedState::basis_state(n_qubits, bits)
    }

    fn n_qubits(&self) -> usize {
        StabilizerMixedState::n_qubits(self)
    }

    fn apply_circuit_gate(&mut self, gate: &CircuitGate, adjoint: bool) -> Result<()> {
        let Some(c) = &gate.clifford else {
            return Err(Error::Unsupported("the stabilizer engine needs Clifford gates".into()));
        };
        let (a, b) = gate.gate.sites();
        let t = if adjoint { &c.inverse } else { &c.tableau };
        self.apply_local(t, &[a, b])
    }

    fn apply_prescrambler(&mut self, p: &Prescrambler, adjoint: bool) -> Result<()> {
        match p {
            Prescrambler::Clifford { tableau, inverse, .. } => self.apply_tableau(if adjoint { inverse } else { tableau }),
            Prescrambler::Haar(_) => Err(Error::Unsupported("the stabilizer engine needs a Clifford prescrambler".into())),
        }
    }

    fn measure_z_sample(&mut self, site: usize, rng: &mut SimRng) -> Result<MeasureOutcome> {
        StabilizerMixedState::measure_z_sample(self, site, rng)
    }

    fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        StabilizerMixedState::measure_z_forced(self, site, outcome)
    }

    fn log_weight(&self) -> f64 {
        StabilizerMixedState::log_weight(self)
    }

    fn set_log_weight(&mut self, w: f64) {
        StabilizerMixedState::set_log_weight(self, w)
    }

    fn purity(&self) -> f64 {
        StabilizerMixedState::purity(self)
    }

    fn all_subsystem_purities(&self) -> Result<Vec<f64>> {
        StabilizerMixedState::all_subsystem_purities(self)
    }

    fn spectral_moments(&self) -> Result<SpectralMoments> {
        let p = self.purity();
        Ok(SpectralMoments { purity: p, purity3: p * p, max_eigenvalue: p })
    }

    fn pauli_expect(&self, p: &PauliString) -> Result<f64> {
        StabilizerMixedState::pauli_expect(self, p)
    }

    fn overlap(&self, other: &Self) -> Result<f64> {
        StabilizerMixedState::overlap(self, other)
    }

    fn leading_state(&self, rng: &mut SimRng) -> Result<Self> {
        self.random_support_state(rng)
    }

    fn charge_moments(&self) -> Result<(f64, f64)> {
        StabilizerMixedState::charge_moments(self)
    }

    fn renyi2_bits(&self) -> f64 {
        self.entropy() as f64
    }
}
