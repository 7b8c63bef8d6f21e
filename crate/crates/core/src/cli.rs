//! Experiment configuration and the command-line front end.

use crate::circuit::{Boundary, GateEnsemble, MonitoredCircuitSpec, Prescramble};
use crate::dense::DenseState;
use crate::engine::Engine;
use crate::ensemble::{feature_run, moments_run, purification_curve, Subsets};
use crate::error::{Error, ErrorClass, Result};
use crate::infopower::{clifford_entropies, infopower_clifford, infopower_renyi2, infopower_spectral};
use crate::pauli::PauliString;
use crate::records::{format_records, parse_records, verify_shots};
use crate::seed::derive_seed;
use crate::settings::DEFAULT;
use crate::shadow::{
    collect_shots, estimator_variance, lambdas_from_feature, shadow_norm_means_jackknife, shot_values, summarize, ChannelInverse,
    EstimatorReport, Observable, PrescrambledChannel, Prescription, Shot,
};
use crate::stab::StabilizerMixedState;
use crate::u1::{fit_sharpening_rate, sharpening_curve, sharpening_time, ChargeBlockState};
use crate::xeb::{xeb_prime, xeb_prime_values, xeb_run};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "MIPT_SHADOWS_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ShadowNorms,
    Purify,
    InfoPower,
    Xeb,
    Charge,
    Estimate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ShadowNorms => "shadow-norms",
            Experiment::Purify => "purify",
            Experiment::InfoPower => "info-power",
            Experiment::Xeb => "xeb",
            Experiment::Charge => "charge",
            Experiment::Estimate => "estimate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Dense,
    Stabilizer,
    ChargeBlock,
}

fn default_depth_per_qubit() -> f64 {
    2.0
}
fn default_prescription() -> Prescription {
    Prescription::Petz
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_input() -> String {
    "zero".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub engine: Option<EngineKind>,
    pub n_qubits: Vec<usize>,
    pub p_grid: Vec<f64>,
    /// Fixed depth; when absent the depth is `depth_per_qubit * N`.
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default = "default_depth_per_qubit")]
    pub depth_per_qubit: f64,
    pub gate_ensemble: GateEnsemble,
    pub prescramble: Prescramble,
    #[serde(default)]
    pub boundary: Boundary,
    pub n_traj: usize,
    #[serde(default)]
    pub n_shots: usize,
    #[serde(default = "default_prescription")]
    pub prescription: Prescription,
    /// Pauli string, or `fidelity` for the projector on the zero state.
    #[serde(default)]
    pub observable: Option<String>,
    /// Input state: `zero`, `ones` or a bit string (character k is qubit k).
    #[serde(default = "default_input")]
    pub input: String,
    #[serde(default)]
    pub times: Option<Vec<usize>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub output: PathBuf,
    pub master_seed: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(64);
    for b in Sha256::digest(bytes) {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn engine(&self) -> EngineKind {
        self.engine.unwrap_or(match (self.gate_ensemble, self.experiment) {
            (GateEnsemble::U1Haar, Experiment::Charge) => EngineKind::ChargeBlock,
            (GateEnsemble::Clifford2q, _) if self.prescramble != Prescramble::GlobalHaar => EngineKind::Stabilizer,
            _ => EngineKind::Dense,
        })
    }

    pub fn depth_for(&self, n: usize) -> usize {
        self.depth.unwrap_or((self.depth_per_qubit * n as f64).round() as usize)
    }

    pub fn spec(&self, n: usize, p: f64) -> MonitoredCircuitSpec {
        MonitoredCircuitSpec::new(n, self.depth_for(n), p, self.gate_ensemble)
            .with_prescramble(self.prescramble)
            .with_boundary(self.boundary)
            .with_seed(self.master_seed)
    }

    /// Master seed of grid point (N, p index).
    pub fn point_seed(&self, n: usize, p_index: usize) -> u64 {
        derive_seed(self.master_seed, &[n as u64, p_index as u64])
    }

    pub fn input_bits(&self, n: usize) -> Result<u64> {
        match self.input.as_str() {
            "zero" => Ok(0),
            "ones" => Ok(if n == 64 { u64::MAX } else { (1u64 << n) - 1 }),
            s if s.len() == n && s.chars().all(|c| c == '0' || c == '1') => {
                Ok(s.chars().enumerate().filter(|(_, c)| *c == '1').map(|(k, _)| 1u64 << k).sum())
            }
            s => Err(Error::InvalidArgument(format!("input '{s}' is not zero, ones or a {n}-bit string"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits.is_empty() || self.p_grid.is_empty() {
            return Err(Error::InvalidArgument("N list and p grid must be nonempty".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument("epsilon must lie in (0, 1)".into()));
        }
        let engine = self.engine();
        for &n in &self.n_qubits {
            for &p in &self.p_grid {
                self.spec(n, p).validate()?;
            }
            self.input_bits(n)?;
            match engine {
                EngineKind::Dense if n > DEFAULT.dense_qubit_limit => {
                    return Err(Error::TooManyQubits { n, limit: DEFAULT.dense_qubit_limit, engine: "dense" })
                }
                EngineKind::ChargeBlock if n > 16 => return Err(Error::TooManyQubits { n, limit: 16, engine: "charge-block" }),
                _ => {}
            }
        }
        match engine {
            EngineKind::Stabilizer if !(self.gate_ensemble == GateEnsemble::Clifford2q && self.prescramble != Prescramble::GlobalHaar) => {
                return Err(Error::InvalidArgument("the stabilizer engine needs Clifford gates and no Haar prescrambler".into()))
            }
            EngineKind::ChargeBlock if self.gate_ensemble != GateEnsemble::U1Haar || self.prescramble != Prescramble::None => {
                return Err(Error::InvalidArgument("the charge-block engine needs u1_haar gates without prescrambling".into()))
            }
            _ => {}
        }
        match self.experiment {
            Experiment::Estimate => {
                if self.n_qubits.len() != 1 || self.p_grid.len() != 1 {
                    return Err(Error::InvalidArgument("estimate runs a single (N, p) point".into()));
                }
                if self.n_shots == 0 {
                    return Err(Error::InvalidArgument("estimate needs n_shots >= 1".into()));
                }
                self.observable_parsed(self.n_qubits[0])?;
            }
            Experiment::Xeb if self.n_shots == 0 => return Err(Error::InvalidArgument("xeb needs n_shots >= 1".into())),
            Experiment::ShadowNorms if self.n_qubits.iter().any(|&n| n > 20) => {
                return Err(Error::TooManyQubits { n: *self.n_qubits.iter().max().unwrap(), limit: 20, engine: "entanglement feature" })
            }
            _ => {}
        }
        Ok(())
    }

    fn observable_parsed(&self, n: usize) -> Result<ObservableSpec> {
        match self.observable.as_deref() {
            None => Err(Error::InvalidArgument("estimate needs an observable".into())),
            Some("fidelity") => Ok(ObservableSpec::Fidelity),
            Some(s) => {
                let p: PauliString = s.parse()?;
                if p.n_qubits() != n {
                    return Err(Error::LengthMismatch { expected: n, found: p.n_qubits() });
                }
                Ok(ObservableSpec::Pauli(p))
            }
        }
    }
}

enum ObservableSpec {
    Pauli(PauliString),
    Fidelity,
}

impl ObservableSpec {
    fn build<S: Engine>(&self, n: usize) -> Result<Observable<S>> {
        Ok(match self {
            ObservableSpec::Pauli(p) => Observable::Pauli(p.clone()),
            ObservableSpec::Fidelity => Observable::Projector(S::basis_state(n, 0)?),
        })
    }
}

/// Parses `8,10,12` or `lo:hi:step` (inclusive).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("bad grid '{s}'"));
    if s.contains(':') {
        let v: Vec<f64> = s.split(':').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        if v.len() != 3 || !(v[2] > 0.0) || v[1] < v[0] {
            return Err(bad());
        }
        let k = ((v[1] - v[0]) / v[2] + 1e-9).floor() as usize;
        Ok((0..=k).map(|i| ((v[0] + i as f64 * v[2]) * 1e12).round() / 1e12).collect())
    } else {
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad list '{s}'")))).collect()
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| Error::Parse(format!("unknown value '{s}'")))
}

/// Output of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    config: &'a ExperimentConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.config.output)?;
        let path = self.config.output.join(name);
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &str) -> Result<()> {
        let body = format!("# config_hash={}\n# config={}\n{header}\n{rows}", self.config.hash(), self.config.to_json());
        self.write(name, &body)
    }

    fn json(&mut self, name: &str, results: serde_json::Value) -> Result<()> {
        let v = json!({ "config_hash": self.config.hash(), "config": self.config, "results": results });
        self.write(name, &(serde_json::to_string_pretty(&v)? + "\n"))
    }
}

/// Runs an experiment and writes its CSV/JSON outputs plus `manifest.json`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let mut w = Writer { config, files: Vec::new() };
    match config.engine() {
        EngineKind::Dense => dispatch::<DenseState>(config, &mut w)?,
        EngineKind::Stabilizer => dispatch::<StabilizerMixedState>(config, &mut w)?,
        EngineKind::ChargeBlock => dispatch::<ChargeBlockState>(config, &mut w)?,
    }
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment.name(),
        "engine": config.engine(),
        "config_hash": config.hash(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "files": w.files.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    let mut files = w.files.clone();
    let path = config.output.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    files.push(path);
    Ok(RunOutput { files })
}

fn grid(config: &ExperimentConfig) -> Vec<(usize, usize, f64)> {
    let mut v = Vec::new();
    for &n in &config.n_qubits {
        for (i, &p) in config.p_grid.iter().enumerate() {
            v.push((n, i, p));
        }
    }
    v
}

fn times_for(config: &ExperimentConfig, n: usize) -> Vec<usize> {
    config.times.clone().unwrap_or_else(|| (0..=config.depth_for(n)).collect())
}

fn dispatch<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    match config.experiment {
        Experiment::ShadowNorms => shadow_norms::<S>(config, w),
        Experiment::Purify => purify::<S>(config, w),
        Experiment::InfoPower => info_power::<S>(config, w),
        Experiment::Xeb => xeb::<S>(config, w),
        Experiment::Charge => charge::<S>(config, w),
        Experiment::Estimate => estimate::<S>(config, w).map(|_| ()),
    }
}

fn shadow_norms<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let mut rows = String::new();
    for (n, i, p) in grid(config) {
        let acc = feature_run::<S>(&config.spec(n, p), config.n_traj, config.point_seed(n, i), &Subsets::All)?;
        let (m, e) = shadow_norm_means_jackknife(&acc)?;
        let _ = writeln!(
            rows,
            "{n},{p},{},{},{},{},{},{},{}",
            m.harmonic, m.arithmetic, m.geometric, e.harmonic, e.arithmetic, e.geometric, m.unlearnable
        );
    }
    w.csv(
        "shadow-norms.csv",
        "N,p,harmonic,arithmetic,geometric,stderr_harmonic,stderr_arithmetic,stderr_geometric,unlearnable",
        &rows,
    )
}

fn purify<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let mut rows = String::new();
    for (n, i, p) in grid(config) {
        let curve = purification_curve::<S>(&config.spec(n, p), &times_for(config, n), config.n_traj, config.point_seed(n, i))?;
        for c in curve {
            let _ = writeln!(rows, "{n},{p},{},{},{},{},{}", c.t, c.s, c.stderr, c.purity, c.purity_stderr);
        }
    }
    w.csv("purify.csv", "N,p,t,s,stderr,purity,purity_stderr", &rows)
}

fn info_power<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let mut rows = String::new();
    for (n, i, p) in grid(config) {
        let spec = config.spec(n, p);
        let seed = config.point_seed(n, i);
        let wp = if S::NAME == StabilizerMixedState::NAME {
            infopower_clifford(&clifford_entropies(&spec, config.n_traj, seed)?, 2.0, n)?
        } else {
            infopower_spectral(&spec, config.n_traj, seed)?
        };
        let m = moments_run::<S>(&spec, config.n_traj, seed)?;
        let w2 = infopower_renyi2(m.purity_modified.value.clamp(1.0 / m.dim, 1.0), m.dim)?;
        let _ = writeln!(
            rows,
            "{n},{p},{},{},{},{},{},{}",
            wp.value, wp.stderr, w2, m.purity.value, m.purity.stderr, m.purity_modified.value
        );
    }
    w.csv("info-power.csv", "N,p,W,stderr,W2,purity,purity_stderr,purity_modified", &rows)
}

fn xeb<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let mut rows = String::new();
    let mut shots_csv = String::new();
    let mut summaries = Vec::new();
    for (n, i, p) in grid(config) {
        let spec = config.spec(n, p);
        let seed = config.point_seed(n, i);
        let rho0 = S::basis_state(n, 0)?;
        let input = S::basis_state(n, config.input_bits(n)?)?;
        let shots = collect_shots(&spec, &input, config.n_shots, seed)?;
        let values = xeb_prime_values(&spec, &shots, &rho0)?;
        let xp = xeb_prime(&values);
        // XEB' stays valid when the model-probability average is too heavy-tailed for XEB
        let (x, x_se, ess) = match xeb_run(&spec, &shots, &rho0, config.n_traj, seed) {
            Ok(x) => (x.value, x.stderr, x.ess),
            Err(Error::LowEss(ess)) => {
                eprintln!("warning: N={n} p={p}: XEB effective sample size {ess:.2} is below 10; xeb reported as NaN");
                (f64::NAN, f64::NAN, ess)
            }
            Err(e) => return Err(e),
        };
        let m = moments_run::<S>(&spec, config.n_traj, seed)?;
        for (k, v) in values.iter().enumerate() {
            let _ = writeln!(shots_csv, "{n},{p},{k},{v}");
        }
        let _ = writeln!(
            rows,
            "{n},{p},{x},{x_se},{ess},{},{},{},{},{},{}",
            xp.mean, xp.std, xp.stderr, xp.n, m.purity.value, m.purity3.value
        );
        let finite = |v: f64| if v.is_finite() { json!(v) } else { serde_json::Value::Null };
        summaries.push(json!({
            "N": n, "p": p, "xeb": finite(x), "xeb_stderr": finite(x_se), "xeb_ess": ess, "xeb_prime": xp.mean,
            "std": xp.std, "n": xp.n, "P": m.purity.value, "P3": m.purity3.value,
        }));
    }
    w.csv("xeb.csv", "N,p,xeb,xeb_stderr,xeb_ess,xeb_prime,xeb_prime_std,xeb_prime_stderr,n,P,P3", &rows)?;
    w.csv("xeb-shots.csv", "N,p,shot,xeb_prime", &shots_csv)?;
    w.json("xeb.json", serde_json::Value::Array(summaries))
}

fn charge<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let mut rows = String::new();
    let mut summaries = Vec::new();
    for (n, i, p) in grid(config) {
        let c = sharpening_curve::<S>(&config.spec(n, p), &times_for(config, n), config.n_traj, config.point_seed(n, i))?;
        for line in c.to_csv().lines().skip(1) {
            let _ = writeln!(rows, "{n},{p},{line}");
        }
        let t_sharp = match sharpening_time(&c, config.epsilon) {
            Ok(t) => Some(t),
            Err(Error::NoCrossing) => None,
            Err(e) => return Err(e),
        };
        let rate = fit_sharpening_rate(&c, 1).ok().map(|(r, _)| r);
        summaries.push(json!({ "N": n, "p": p, "epsilon": config.epsilon, "t_sharp": t_sharp, "c": rate, "delta_q0": c.delta_q0 }));
    }
    w.csv("charge.csv", "N,p,t,deltaQ,stderr,varQ,bound", &rows)?;
    w.json("charge.json", serde_json::Value::Array(summaries))
}

/// Channel inverse calibrated on the dual ensemble of `spec`.
fn calibrate<S: Engine>(config: &ExperimentConfig, spec: &MonitoredCircuitSpec, seed: u64) -> Result<(ChannelInverse, f64, serde_json::Value)> {
    if spec.prescramble == Prescramble::None {
        if config.prescription != Prescription::Petz {
            return Err(Error::Unsupported("without prescrambling only the petz prescription is inverted".into()));
        }
        let acc = feature_run::<S>(spec, config.n_traj, seed, &Subsets::All)?;
        let l = lambdas_from_feature(&acc.feature())?;
        let meta = json!({ "kind": "pauli_modes", "n_traj": config.n_traj });
        return Ok((ChannelInverse::PauliModes(l), f64::NAN, meta));
    }
    let m = moments_run::<S>(spec, config.n_traj, seed)?;
    let ch = PrescrambledChannel::for_prescription(config.prescription, &m);
    let meta = json!({ "kind": "prescrambled", "n_traj": config.n_traj, "moments": m, "channel": ch });
    Ok((ChannelInverse::Prescrambled(ch), ch.purity, meta))
}

fn estimate_from_shots<S: Engine>(config: &ExperimentConfig, shots: &[Shot]) -> Result<EstimatorReport> {
    let n = config.n_qubits[0];
    let spec = config.spec(n, config.p_grid[0]);
    let seed = config.point_seed(n, 0);
    let obs_spec = config.observable_parsed(n)?;
    let obs = obs_spec.build::<S>(n)?;
    let (inverse, p, meta) = calibrate::<S>(config, &spec, seed)?;
    let lambda_or_p = match (&inverse, &obs_spec) {
        (ChannelInverse::PauliModes(l), ObservableSpec::Pauli(p)) => l.pauli(p),
        _ => p,
    };
    let values = shot_values(&spec, shots, &obs, config.prescription, &inverse, seed)?;
    let s = summarize(&values);
    let variance = if values.len() >= 30 { estimator_variance(&values)?.variance } else { s.variance };
    Ok(EstimatorReport {
        observable: obs.label(),
        prescription: config.prescription,
        n_shots: s.n_shots,
        estimate: s.estimate,
        stderr: s.stderr,
        variance,
        lambda_or_p,
        calibration_meta: meta,
    })
}

fn estimate<S: Engine>(config: &ExperimentConfig, w: &mut Writer<'_>) -> Result<EstimatorReport> {
    let n = config.n_qubits[0];
    let spec = config.spec(n, config.p_grid[0]);
    let input = S::basis_state(n, config.input_bits(n)?)?;
    let shots = collect_shots(&spec, &input, config.n_shots, config.point_seed(n, 0))?;
    w.write("records.tsv", &format_records(&spec.hash(), &shots))?;
    let report = estimate_from_shots::<S>(config, &shots)?;
    w.json("estimate.json", serde_json::to_value(&report)?)?;
    Ok(report)
}

/// Re-estimates from a record file without new sampling. The records are
/// first replayed in forced mode against the configured input.
pub fn replay(config: &ExperimentConfig, records: &Path) -> Result<EstimatorReport> {
    config.validate()?;
    if config.experiment != Experiment::Estimate {
        return Err(Error::InvalidArgument("replay needs an estimate config".into()));
    }
    match config.engine() {
        EngineKind::Dense => replay_with::<DenseState>(config, records),
        EngineKind::Stabilizer => replay_with::<StabilizerMixedState>(config, records),
        EngineKind::ChargeBlock => replay_with::<ChargeBlockState>(config, records),
    }
}

fn replay_with<S: Engine>(config: &ExperimentConfig, records: &Path) -> Result<EstimatorReport> {
    let n = config.n_qubits[0];
    let spec = config.spec(n, config.p_grid[0]);
    let shots = parse_records(std::fs::File::open(records)?, &spec.hash())?;
    verify_shots(&spec, &S::basis_state(n, config.input_bits(n)?)?, &shots)?;
    estimate_from_shots::<S>(config, &shots)
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Resource => 3,
        ErrorClass::Numerical => 4,
        ErrorClass::Io => 1,
    }
}

#[derive(Parser, Debug)]
#[command(name = "mipt-shadows", version, about = "Classical shadows from monitored quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Shadow-norm means from the entanglement feature.
    ShadowNorms(GridArgs),
    /// Purification curves s(t).
    Purify(GridArgs),
    /// Informational power W and W_2.
    InfoPower(GridArgs),
    /// XEB and XEB' diagnostics.
    Xeb(GridArgs),
    /// Charge sharpening curves.
    Charge(GridArgs),
    /// Shadow estimate of one observable; writes the measurement records.
    Estimate(GridArgs),
    /// Run an experiment from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-estimate from a record file.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Observable replacing the one in the config.
        #[arg(long)]
        observable: Option<String>,
    },
    /// Print the JSON config a subcommand would run, without running it.
    Config {
        #[arg(value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        args: GridArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Qubit counts, e.g. `8,10`.
    #[arg(long = "N", alias = "n", default_value = "6")]
    pub n: String,
    /// Measurement rates: `0.1,0.2` or `lo:hi:step`.
    #[arg(long, default_value = "0.1:0.5:0.1")]
    pub p: String,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub depth_per_qubit: f64,
    #[arg(long, default_value_t = 1000)]
    pub ntraj: usize,
    #[arg(long, default_value_t = 1000)]
    pub nshots: usize,
    #[arg(long, value_enum)]
    pub engine: Option<EngineKind>,
    /// haar, clifford2q or u1-haar.
    #[arg(long)]
    pub gates: Option<String>,
    /// none, global-clifford or global-haar.
    #[arg(long)]
    pub prescramble: Option<String>,
    /// open or periodic.
    #[arg(long, default_value = "open")]
    pub boundary: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// petz, least-squares or max-fidelity.
    #[arg(long, default_value = "petz")]
    pub prescription: String,
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long, default_value = "zero")]
    pub input: String,
    /// Checkpoints, e.g. `0,2,4,8`.
    #[arg(long)]
    pub times: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

impl GridArgs {
    pub fn to_config(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let gates = match &self.gates {
            Some(g) => parse_enum(g)?,
            None => match experiment {
                Experiment::Charge => GateEnsemble::U1Haar,
                Experiment::InfoPower | Experiment::Xeb | Experiment::Estimate => GateEnsemble::Clifford2q,
                _ => GateEnsemble::Haar,
            },
        };
        let prescramble = match &self.prescramble {
            Some(p) => parse_enum(p)?,
            None => match experiment {
                Experiment::InfoPower | Experiment::Xeb | Experiment::Estimate if gates == GateEnsemble::Clifford2q => Prescramble::GlobalClifford,
                Experiment::InfoPower | Experiment::Xeb | Experiment::Estimate => Prescramble::GlobalHaar,
                _ => Prescramble::None,
            },
        };
        let c = ExperimentConfig {
            experiment,
            engine: self.engine,
            n_qubits: parse_list(&self.n)?,
            p_grid: parse_grid(&self.p)?,
            depth: self.depth,
            depth_per_qubit: self.depth_per_qubit,
            gate_ensemble: gates,
            prescramble,
            boundary: parse_enum(&self.boundary)?,
            n_traj: self.ntraj,
            n_shots: self.nshots,
            prescription: self.prescription.parse()?,
            observable: self.observable.clone(),
            input: self.input.clone(),
            times: self.times.as_deref().map(parse_list).transpose()?,
            epsilon: self.epsilon,
            output: self.out.clone(),
            master_seed: self.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().map_err(|_| Error::InvalidArgument(format!("{WORKERS_ENV} must be a positive integer")))?;
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{WORKERS_ENV} must be a positive integer")));
        }
        // a pool that was already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Executes a parsed command and prints a short summary to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    configure_workers()?;
    let (config, replay_args) = match cli.command {
        Command::ShadowNorms(a) => (a.to_config(Experiment::ShadowNorms)?, None),
        Command::Purify(a) => (a.to_config(Experiment::Purify)?, None),
        Command::InfoPower(a) => (a.to_config(Experiment::InfoPower)?, None),
        Command::Xeb(a) => (a.to_config(Experiment::Xeb)?, None),
        Command::Charge(a) => (a.to_config(Experiment::Charge)?, None),
        Command::Estimate(a) => (a.to_config(Experiment::Estimate)?, None),
        Command::Run { config } => (ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?, None),
        Command::Replay { config, records, observable } => {
            let mut c = ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?;
            if observable.is_some() {
                c.observable = observable;
            }
            (c, Some(records))
        }
        Command::Config { experiment, args } => {
            println!("{}", serde_json::to_string_pretty(&args.to_config(experiment)?)?);
            return Ok(());
        }
    };
    if let Some(records) = replay_args {
        let report = replay(&config, &records)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let out = run(&config)?;
    for f in out.files {
        println!("{}", f.display());
    }
    Ok(())
}
