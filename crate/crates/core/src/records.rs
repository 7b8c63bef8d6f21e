//! Measurement-record files.
//!
//! ```text
//! # spec_hash=<hex>
//! <index>\t<realization_seed>\t<log_prob>\t<input_tag>\t<layer,site,outcome;...>
//! ```

use crate::circuit::{realize, run_trajectory, MonitoredCircuitSpec, RecordMode, TrajectoryRecord};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::shadow::Shot;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

pub fn format_records(spec_hash: &str, shots: &[Shot]) -> String {
    let mut s = format!("# spec_hash={spec_hash}\n");
    for shot in shots {
        let r = &shot.record;
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", shot.index, shot.realization_seed, r.log_prob, r.input_tag, r.triples());
    }
    s
}

/// Parses a record file and checks its hash against `spec_hash`.
pub fn parse_records<R: Read>(reader: R, spec_hash: &str) -> Result<Vec<Shot>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty record file".into()))??;
    let found = header
        .strip_prefix("# spec_hash=")
        .ok_or_else(|| Error::Parse("missing spec_hash header".into()))?
        .trim()
        .to_string();
    if found != spec_hash {
        return Err(Error::HashMismatch { expected: spec_hash.to_string(), found });
    }
    let mut shots = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::Parse(format!("line {}: expected 5 fields, found {}", n + 2, f.len())));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", n + 2));
        shots.push(Shot {
            index: f[0].parse().map_err(|_| bad("index"))?,
            realization_seed: f[1].parse().map_err(|_| bad("realization seed"))?,
            record: TrajectoryRecord {
                log_prob: f[2].parse().map_err(|_| bad("log probability"))?,
                input_tag: f[3].to_string(),
                events: TrajectoryRecord::parse_triples(f[4])?,
            },
        });
    }
    Ok(shots)
}

/// Replays each shot on `input` in forced mode and checks that the stored
/// log probability is reproduced exactly.
pub fn verify_shots<S: Engine>(spec: &MonitoredCircuitSpec, input: &S, shots: &[Shot]) -> Result<()> {
    for shot in shots {
        let real = realize(spec, shot.realization_seed)?;
        let (_, r) = run_trajectory(&real, input.clone(), RecordMode::Forced(&shot.record), &shot.record.input_tag)?;
        if r.log_prob != shot.record.log_prob {
            return Err(Error::RecordMismatch(format!(
                "shot {}: replayed log probability {} differs from stored {}",
                shot.index, r.log_prob, shot.record.log_prob
            )));
        }
    }
    Ok(())
}
