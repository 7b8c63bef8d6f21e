//! Monitored brickwork circuits: specification, realization, trajectories and
//! eavesdropper snapshots.

use crate::dense::{haar_2q_gate, TwoQubitGate};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::haar::haar_unitary;
use crate::seed::{rng_from, SimRng};
use crate::stab::CliffordTableau;
use crate::u1::u1_haar_gate;
use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateEnsemble {
    Haar,
    Clifford2q,
    U1Haar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prescramble {
    None,
    GlobalClifford,
    GlobalHaar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitoredCircuitSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub measurement_rate: f64,
    pub gate_ensemble: GateEnsemble,
    pub prescramble: Prescramble,
    #[serde(default)]
    pub boundary: Boundary,
    pub seed: u64,
}

impl MonitoredCircuitSpec {
    pub fn new(n_qubits: usize, depth: usize, measurement_rate: f64, gate_ensemble: GateEnsemble) -> Self {
        MonitoredCircuitSpec {
            n_qubits,
            depth,
            measurement_rate,
            gate_ensemble,
            prescramble: Prescramble::None,
            boundary: Boundary::Open,
            seed: 0,
        }
    }

    pub fn with_prescramble(mut self, p: Prescramble) -> Self {
        self.prescramble = p;
        self
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.measurement_rate) {
            return Err(Error::InvalidArgument(format!("measurement rate {} outside [0, 1]", self.measurement_rate)));
        }
        if self.n_qubits == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        if self.n_qubits > crate::stab::MAX_QUBITS {
            return Err(Error::TooManyQubits { n: self.n_qubits, limit: crate::stab::MAX_QUBITS, engine: "circuit" });
        }
        Ok(())
    }

    /// Whether the stabilizer engine can run realizations of this spec.
    pub fn is_clifford(&self) -> bool {
        self.gate_ensemble == GateEnsemble::Clifford2q && self.prescramble != Prescramble::GlobalHaar
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

/// Tableau pair attached to Clifford gates.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordPayload {
    pub tableau: CliffordTableau,
    pub inverse: CliffordTableau,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitGate {
    pub gate: TwoQubitGate,
    pub clifford: Option<CliffordPayload>,
}

impl CircuitGate {
    /// Gate from a two-qubit tableau; local qubit 0 is `sites.0`.
    pub fn from_clifford(tableau: CliffordTableau, sites: (usize, usize)) -> Result<Self> {
        if tableau.n_qubits() != 2 {
            return Err(Error::InvalidArgument("two-qubit tableau expected".into()));
        }
        let u = tableau.to_unitary()?;
        // tableau index b0 + 2 b1 -> gate index 2 b0 + b1
        let perm = [0usize, 2, 1, 3];
        let m = Matrix4::from_fn(|r, c| u[(perm[r], perm[c])]);
        let inverse = tableau.inverse();
        Ok(CircuitGate { gate: TwoQubitGate::new(m, sites)?, clifford: Some(CliffordPayload { tableau, inverse }) })
    }
}

#[derive(Debug)]
pub enum Prescrambler {
    Clifford { tableau: CliffordTableau, inverse: CliffordTableau, unitary: OnceLock<DMatrix<C64>> },
    Haar(DMatrix<C64>),
}

impl Clone for Prescrambler {
    fn clone(&self) -> Self {
        match self {
            Prescrambler::Clifford { tableau, inverse, .. } => {
                Prescrambler::Clifford { tableau: tableau.clone(), inverse: inverse.clone(), unitary: OnceLock::new() }
            }
            Prescrambler::Haar(u) => Prescrambler::Haar(u.clone()),
        }
    }
}

impl Prescrambler {
    pub fn clifford(tableau: CliffordTableau) -> Self {
        let inverse = tableau.inverse();
        Prescrambler::Clifford { tableau, inverse, unitary: OnceLock::new() }
    }

    pub fn dense_unitary(&self) -> Result<&DMatrix<C64>> {
        match self {
            Prescrambler::Haar(u) => Ok(u),
            Prescrambler::Clifford { tableau, unitary, .. } => {
                if let Some(u) = unitary.get() {
                    return Ok(u);
                }
                let u = tableau.to_unitary()?;
                Ok(unitary.get_or_init(|| u))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub gates: Vec<CircuitGate>,
    /// Measured sites, ascending.
    pub measured: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CircuitRealization {
    pub n_qubits: usize,
    pub layers: Vec<Layer>,
    pub prescrambler: Option<Prescrambler>,
    pub spec_hash: String,
    pub seed: u64,
}

/// Bonds of brickwork layer `layer`: (i, i+1) with i of the layer's parity.
pub fn bonds(n: usize, layer: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = layer % 2;
    while i + 1 < n {
        out.push((i, i + 1));
        i += 2;
    }
    if boundary == Boundary::Periodic && n > 2 && n % 2 == 0 && (n - 1) % 2 == layer % 2 {
        out.push((n - 1, 0));
    }
    out
}

/// Realization of `spec` for the given realization seed.
pub fn realize(spec: &MonitoredCircuitSpec, realization_seed: u64) -> Result<CircuitRealization> {
    let mut rng = rng_from(realization_seed);
    let mut r = realize_with(spec, &mut rng)?;
    r.seed = realization_seed;
    Ok(r)
}

/// Draw order: prescrambler, then per layer the gates in bond order followed
/// by one uniform per site for measurement placement.
pub fn realize_with<R: Rng + ?Sized>(spec: &MonitoredCircuitSpec, rng: &mut R) -> Result<CircuitRealization> {
    spec.validate()?;
    let n = spec.n_qubits;
    let prescrambler = match spec.prescramble {
        Prescramble::None => None,
        Prescramble::GlobalClifford => Some(Prescrambler::clifford(CliffordTableau::random(n, rng))),
        Prescramble::GlobalHaar => {
            if n > 13 {
                return Err(Error::TooManyQubits { n, limit: 13, engine: "dense" });
            }
            Some(Prescrambler::Haar(haar_unitary(1 << n, rng)))
        }
    };
    let mut layers = Vec::with_capacity(spec.depth);
    for l in 0..spec.depth {
        let mut gates = Vec::new();
        for sites in bonds(n, l, spec.boundary) {
            let g = match spec.gate_ensemble {
                GateEnsemble::Haar => CircuitGate { gate: haar_2q_gate(sites, rng)?, clifford: None },
                GateEnsemble::U1Haar => CircuitGate { gate: u1_haar_gate(sites, rng)?, clifford: None },
                GateEnsemble::Clifford2q => CircuitGate::from_clifford(CliffordTableau::random(2, rng), sites)?,
            };
            gates.push(g);
        }
        let measured = (0..n).filter(|_| rng.random::<f64>() < spec.measurement_rate).collect();
        layers.push(Layer { gates, measured });
    }
    Ok(CircuitRealization { n_qubits: n, layers, prescrambler, spec_hash: spec.hash(), seed: 0 })
}

impl CircuitRealization {
    pub fn n_events(&self) -> usize {
        self.layers.iter().map(|l| l.measured.len()).sum()
    }

    /// (layer, site) of every measurement event in execution order.
    pub fn event_positions(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.measured.iter().map(move |&s| (l, s)))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub layer: usize,
    pub site: usize,
    pub outcome: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Events in execution order (layer ascending, then site ascending).
    pub events: Vec<MeasurementEvent>,
    /// log p(m | input) for forward runs; log pi_m for dual (fully mixed) runs.
    pub log_prob: f64,
    pub input_tag: String,
}

impl TrajectoryRecord {
    /// A record with the given outcomes at the realization's event positions.
    pub fn from_outcomes(real: &CircuitRealization, outcomes: &[u8], input_tag: &str) -> Result<Self> {
        let pos = real.event_positions();
        if pos.len() != outcomes.len() {
            return Err(Error::LengthMismatch { expected: pos.len(), found: outcomes.len() });
        }
        let events = pos
            .into_iter()
            .zip(outcomes)
            .map(|((layer, site), &outcome)| MeasurementEvent { layer, site, outcome })
            .collect();
        Ok(TrajectoryRecord { events, log_prob: f64::NAN, input_tag: input_tag.to_string() })
    }

    pub fn outcomes(&self) -> Vec<u8> {
        self.events.iter().map(|e| e.outcome).collect()
    }

    pub fn check_against(&self, real: &CircuitRealization) -> Result<()> {
        let pos = real.event_positions();
        if pos.len() != self.events.len() {
            return Err(Error::RecordMismatch(format!("{} events, realization has {}", self.events.len(), pos.len())));
        }
        for (e, (l, s)) in self.events.iter().zip(pos) {
            if e.layer != l || e.site != s {
                return Err(Error::RecordMismatch(format!("event ({}, {}) where ({l}, {s}) expected", e.layer, e.site)));
            }
            if e.outcome > 1 {
                return Err(Error::RecordMismatch(format!("outcome {} is not a bit", e.outcome)));
            }
        }
        Ok(())
    }

    /// `layer,site,outcome` triples joined by `;`.
    pub fn triples(&self) -> String {
        self.events.iter().map(|e| format!("{},{},{}", e.layer, e.site, e.outcome)).collect::<Vec<_>>().join(";")
    }

    pub fn parse_triples(s: &str) -> Result<Vec<MeasurementEvent>> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.trim()
            .split(';')
            .map(|t| {
                let f: Vec<&str> = t.split(',').collect();
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad triple {t:?}")));
                }
                let p = |x: &str| x.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{t:?}: {e}")));
                let outcome = p(f[2])?;
                if outcome > 1 {
                    return Err(Error::Parse(format!("outcome in {t:?} is not a bit")));
                }
                Ok(MeasurementEvent { layer: p(f[0])?, site: p(f[1])?, outcome: outcome as u8 })
            })
            .collect()
    }
}

pub enum RecordMode<'a> {
    Sample(&'a mut SimRng),
    Forced(&'a TrajectoryRecord),
}

/// Runs the circuit on `input`: prescrambler, then each layer's gates followed
/// by its measurements. Returns the normalized final state and the record.
pub fn run_trajectory<S: Engine>(
    real: &CircuitRealization,
    input: S,
    mode: RecordMode<'_>,
    input_tag: &str,
) -> Result<(S, TrajectoryRecord)> {
    run_trajectory_checkpointed(real, input, mode, input_tag, |_, _, _| Ok(()))
}

/// As [`run_trajectory`], calling `checkpoint(layers_done, state, log_prob)`
/// after every completed layer (and once with 0 before the first layer).
pub fn run_trajectory_checkpointed<S, F>(
    real: &CircuitRealization,
    mut state: S,
    mut mode: RecordMode<'_>,
    input_tag: &str,
    mut checkpoint: F,
) -> Result<(S, TrajectoryRecord)>
where
    S: Engine,
    F: FnMut(usize, &S, f64) -> Result<()>,
{
    if state.n_qubits() != real.n_qubits {
        return Err(Error::LengthMismatch { expected: real.n_qubits, found: state.n_qubits() });
    }
    if let RecordMode::Forced(r) = &mode {
        r.check_against(real)?;
    }
    if let Some(p) = &real.prescrambler {
        state.apply_prescrambler(p, false)?;
    }
    let mut events = Vec::with_capacity(real.n_events());
    let mut log_prob = 0.0;
    checkpoint(0, &state, 0.0)?;
    let mut idx = 0;
    for (l, layer) in real.layers.iter().enumerate() {
        for g in &layer.gates {
            state.apply_circuit_gate(g, false)?;
        }
        for &site in &layer.measured {
            let m = match &mut mode {
                RecordMode::Sample(rng) => state.measure_z_sample(site, rng)?,
                RecordMode::Forced(r) => state.measure_z_forced(site, r.events[idx].outcome)?,
            };
            idx += 1;
            log_prob += m.probability.ln();
            events.push(MeasurementEvent { layer: l, site, outcome: m.outcome });
        }
        checkpoint(l + 1, &state, log_prob)?;
    }
    Ok((state, TrajectoryRecord { events, log_prob, input_tag: input_tag.to_string() }))
}

/// Runs the adjoint program K^dag on the fully mixed state: layers in reverse
/// order, measurements before the inverse gates, prescrambler inverse last.
/// The output is E_m / Tr E_m and the accumulated log probability is log pi_m.
fn run_adjoint<S: Engine>(real: &CircuitRealization, mut mode: RecordMode<'_>) -> Result<(S, TrajectoryRecord)> {
    if let RecordMode::Forced(r) = &mode {
        r.check_against(real)?;
    }
    let mut state = S::fully_mixed(real.n_qubits)?;
    let mut per_layer: Vec<Vec<MeasurementEvent>> = vec![Vec::new(); real.layers.len()];
    let mut offsets = Vec::with_capacity(real.layers.len());
    let mut acc = 0;
    for layer in &real.layers {
        offsets.push(acc);
        acc += layer.measured.len();
    }
    let mut log_prob = 0.0;
    for (l, layer) in real.layers.iter().enumerate().rev() {
        for (j, &site) in layer.measured.iter().enumerate() {
            let m = match &mut mode {
                RecordMode::Sample(rng) => state.measure_z_sample(site, rng)?,
                RecordMode::Forced(r) => state.measure_z_forced(site, r.events[offsets[l] + j].outcome)?,
            };
            log_prob += m.probability.ln();
            per_layer[l].push(MeasurementEvent { layer: l, site, outcome: m.outcome });
        }
        for g in layer.gates.iter().rev() {
            state.apply_circuit_gate(g, true)?;
        }
    }
    if let Some(p) = &real.prescrambler {
        state.apply_prescrambler(p, true)?;
    }
    let events = per_layer.into_iter().flatten().collect();
    state.set_log_weight(log_prob);
    Ok((state, TrajectoryRecord { events, log_prob, input_tag: "dual".into() }))
}

/// sigma_m = E_m / Tr E_m (prescrambler conjugation included) and log pi_m.
pub fn eavesdropper_snapshot<S: Engine>(real: &CircuitRealization, record: &TrajectoryRecord) -> Result<(S, f64)> {
    let (s, r) = run_adjoint::<S>(real, RecordMode::Forced(record))?;
    Ok((s, r.log_prob))
}

/// Draws m with probability pi_m and returns (sigma_m, record with log pi_m).
pub fn sample_dual<S: Engine>(real: &CircuitRealization, rng: &mut SimRng) -> Result<(S, TrajectoryRecord)> {
    run_adjoint::<S>(real, RecordMode::Sample(rng))
}

/// Every outcome string of the realization (2^M records, M small).
pub fn enumerate_records(real: &CircuitRealization, input_tag: &str) -> Result<Vec<TrajectoryRecord>> {
    let m = real.n_events();
    if m > 20 {
        return Err(Error::TooManyQubits { n: m, limit: 20, engine: "record enumeration" });
    }
    (0..1u32 << m)
        .map(|bits| {
            let outcomes: Vec<u8> = (0..m).map(|i| (bits >> i & 1) as u8).collect();
            TrajectoryRecord::from_outcomes(real, &outcomes, input_tag)
        })
        .collect()
}
