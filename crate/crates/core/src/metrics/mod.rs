//! Evaluation and reward metrics over molecule sets.
//!
//! Every aggregate sums sorted terms, so results do not depend on the order
//! of the input batch.

mod external;
mod patterns;

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{morgan_fingerprint, parse_smiles, tanimoto_distance, valence, Fingerprint, MolGraph};

pub use external::{external_metric, ExternalScores, DEFAULT_TIMEOUT};
pub use patterns::{active_hydrogen_groups, MembershipPattern, PATTERN_IDS};

/// Fingerprint settings used by diversity and chamfer.
pub const FP_RADIUS: u32 = 2;
pub const FP_BITS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least two molecules")]
    TooFew,
    #[error("unknown membership pattern `{id}` (available: {})", available.join(", "))]
    UnknownPattern { id: String, available: Vec<String> },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("external scorer failed: {0}")]
    ProcessFailure(String),
    #[error("external scorer protocol error: {0}")]
    ProtocolError(String),
    #[error("external scorer timed out after {0:?}")]
    Timeout(Duration),
}

pub type Result<T> = std::result::Result<T, MetricError>;

pub fn fingerprint(m: &MolGraph) -> Fingerprint {
    morgan_fingerprint(m, FP_RADIUS, FP_BITS)
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Independent validity re-check: the valence model holds and the written
/// SMILES parses back to the same molecule.
pub fn is_valid(m: &MolGraph) -> bool {
    if valence::check(m).is_err() {
        return false;
    }
    let smiles = m.canonical_smiles();
    match parse_smiles(&smiles) {
        Ok(back) => valence::check(&back).is_ok() && back.canonical_smiles() == smiles,
        Err(_) => false,
    }
}

/// Fraction of candidates that exist and pass [`is_valid`].
pub fn validity(candidates: &[Option<&MolGraph>]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let valid = candidates
        .par_iter()
        .filter(|c| c.is_some_and(is_valid))
        .count();
    Ok(valid as f64 / candidates.len() as f64)
}

pub fn uniqueness(mols: &[MolGraph]) -> Result<f64> {
    if mols.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let mut keys: Vec<String> = mols.par_iter().map(MolGraph::canonical_key).collect();
    keys.sort();
    keys.dedup();
    Ok(keys.len() as f64 / mols.len() as f64)
}

pub fn novelty(mols: &[MolGraph], train: &[MolGraph]) -> Result<f64> {
    if mols.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let known: std::collections::HashSet<String> =
        train.iter().map(MolGraph::canonical_key).collect();
    let novel = mols
        .par_iter()
        .filter(|m| !known.contains(&m.canonical_key()))
        .count();
    Ok(novel as f64 / mols.len() as f64)
}

/// Mean Tanimoto distance over the full n x n matrix of fingerprint pairs
/// (self-pairs included, contributing zero).
pub fn diversity(mols: &[MolGraph]) -> Result<f64> {
    let fps: Vec<Fingerprint> = mols.par_iter().map(fingerprint).collect();
    diversity_of(&fps)
}

pub fn diversity_of(fps: &[Fingerprint]) -> Result<f64> {
    let n = fps.len();
    if n < 2 {
        return Err(MetricError::TooFew);
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| tanimoto_distance(&fps[i], &fps[j]).expect("same settings"))
                .collect();
            sorted_sum(d)
        })
        .collect();
    Ok(sorted_sum(rows) / (n * n) as f64)
}

/// Symmetric chamfer distance under Tanimoto distance.
pub fn chamfer(a: &[MolGraph], b: &[MolGraph]) -> Result<f64> {
    let fa: Vec<Fingerprint> = a.par_iter().map(fingerprint).collect();
    let fb: Vec<Fingerprint> = b.par_iter().map(fingerprint).collect();
    chamfer_of(&fa, &fb)
}

pub fn chamfer_of(a: &[Fingerprint], b: &[Fingerprint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let one_side = |x: &[Fingerprint], y: &[Fingerprint]| -> f64 {
        let mins: Vec<f64> = x
            .par_iter()
            .map(|p| {
                y.iter()
                    .map(|q| tanimoto_distance(p, q).expect("same settings"))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        sorted_sum(mins) / x.len() as f64
    };
    Ok(one_side(a, b) + one_side(b, a))
}

pub fn membership(mols: &[MolGraph], pattern: &MembershipPattern) -> Result<f64> {
    if mols.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let hits = mols.par_iter().filter(|m| pattern.matches(m)).count();
    Ok(hits as f64 / mols.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolWeightStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn mol_weight_stats(mols: &[MolGraph]) -> Result<MolWeightStats> {
    if mols.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let w: Vec<f64> = mols.iter().map(MolGraph::molecular_weight).collect();
    Ok(MolWeightStats {
        mean: sorted_sum(w.clone()) / w.len() as f64,
        min: w.iter().copied().fold(f64::INFINITY, f64::min),
        max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// A metric usable as a training reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Validity,
    Uniqueness,
    Novelty,
    Diversity,
    Chamfer,
    Membership { pattern: String },
    MolWeight,
    External { command: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub kind: MetricKind,
}

impl MetricSpec {
    /// Resolves a metric name. `membership` needs the class pattern id;
    /// `external:<command>` runs a scorer.
    pub fn parse(name: &str, membership_pattern: Option<&str>) -> Result<MetricSpec> {
        let kind = match name {
            "validity" => MetricKind::Validity,
            "uniqueness" => MetricKind::Uniqueness,
            "novelty" => MetricKind::Novelty,
            "diversity" => MetricKind::Diversity,
            "chamfer" => MetricKind::Chamfer,
            "mol_weight" => MetricKind::MolWeight,
            "membership" => {
                let id = membership_pattern.ok_or_else(|| MetricError::UnknownPattern {
                    id: String::new(),
                    available: PATTERN_IDS.iter().map(|s| s.to_string()).collect(),
                })?;
                MembershipPattern::builtin(id)?;
                MetricKind::Membership {
                    pattern: id.to_string(),
                }
            }
            other => match other.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => MetricKind::External {
                    command: cmd.to_string(),
                },
                _ => return Err(MetricError::UnknownMetric(other.to_string())),
            },
        };
        Ok(MetricSpec {
            name: name.split(':').next().unwrap().to_string(),
            kind,
        })
    }
}

/// Evaluates one metric on generated molecules against the training set.
pub fn evaluate(
    spec: &MetricSpec,
    generated: &[MolGraph],
    train: &[MolGraph],
    train_fps: &[Fingerprint],
) -> Result<f64> {
    match &spec.kind {
        MetricKind::Validity => {
            let refs: Vec<Option<&MolGraph>> = generated.iter().map(Some).collect();
            validity(&refs)
        }
        MetricKind::Uniqueness => uniqueness(generated),
        MetricKind::Novelty => novelty(generated, train),
        MetricKind::Diversity => diversity(generated),
        MetricKind::Chamfer => {
            let fps: Vec<Fingerprint> = generated.par_iter().map(fingerprint).collect();
            chamfer_of(&fps, train_fps)
        }
        MetricKind::Membership { pattern } => {
            membership(generated, &MembershipPattern::builtin(pattern)?)
        }
        MetricKind::MolWeight => mol_weight_stats(generated).map(|s| s.mean),
        MetricKind::External { command } => {
            let smiles: Vec<String> = generated.iter().map(MolGraph::canonical_smiles).collect();
            external_metric(&smiles, command, DEFAULT_TIMEOUT).map(|s| s.mean)
        }
    }
}
