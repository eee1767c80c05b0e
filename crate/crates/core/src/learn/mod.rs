//! Learning a grammar: edge features, the potential net, episode sampling
//! and the score-function training loop.

mod episode;
mod features;
mod net;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{generate_batch, GenerationConfig, Grammar, GrammarError};
use crate::metrics::{self, fingerprint, MetricError, MetricSpec};
use crate::molgraph::{Dataset, Fingerprint, MolGraph};

pub use episode::{
    accumulate_log_prob_gradient, draw_log_prob, log_prob_at, sample_episode, Draw, Episode,
    Trajectory, MAX_RESAMPLES,
};
pub use features::{featurize, featurize_all, FEATURE_DIM, RAW_DIM};
pub use net::{edge_probability, sigmoid, Adam, PotentialNet, Trace, HIDDEN};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("unknown hyperedge {0}")]
    UnknownEdge(usize),
    #[error("feature width {found} does not match the net input width {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("metric failure: {0}")]
    Metric(#[from] MetricError),
    #[error("every episode of epoch {0} failed its metrics")]
    AllEpisodesFailed(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

impl From<crate::hypergraph::HypergraphError> for LearnError {
    fn from(e: crate::hypergraph::HypergraphError) -> Self {
        LearnError::Grammar(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Episodes per gradient step.
    pub mc_samples: usize,
    /// Gradient steps.
    pub epochs: usize,
    pub learning_rate: f64,
    /// Metric name to weight. Names are those accepted by [`MetricSpec::parse`].
    pub lambda: BTreeMap<String, f64>,
    /// Molecules generated per episode grammar to score it.
    pub eval_generations: usize,
    pub seed: u64,
    pub feature_dim: usize,
    /// Pattern for the `membership` metric.
    pub membership_pattern: Option<String>,
    /// Sampler settings used when scoring episode grammars; its seed is
    /// replaced per episode.
    pub generation: GenerationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mc_samples: 5,
            epochs: 20,
            learning_rate: 0.01,
            lambda: BTreeMap::from([("diversity".into(), 1.0), ("membership".into(), 2.0)]),
            eval_generations: 200,
            seed: 0,
            feature_dim: FEATURE_DIM,
            membership_pattern: None,
            generation: GenerationConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.into()));
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1");
        }
        if self.eval_generations < 2 {
            return bad("eval_generations must be at least 2");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.lambda.is_empty() {
            return bad("no metrics to optimize");
        }
        if self.lambda.values().any(|w| !w.is_finite()) {
            return bad("metric weights must be finite");
        }
        Ok(())
    }

    /// Resolves the weighted metric set.
    pub fn metrics(&self) -> Result<Vec<WeightedMetric>, LearnError> {
        self.lambda
            .iter()
            .map(|(name, &weight)| {
                Ok(WeightedMetric {
                    name: name.clone(),
                    spec: MetricSpec::parse(name, self.membership_pattern.as_deref())?,
                    weight,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMetric {
    pub name: String,
    pub spec: MetricSpec,
    pub weight: f64,
}

/// One scored episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub grammar: Grammar,
    pub trajectory: Trajectory,
    /// Raw metric values in the order of the metric set.
    pub metrics: Vec<f64>,
    /// `sum_i lambda_i M_i`.
    pub score: f64,
    pub generated: usize,
    pub generation_failures: usize,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub episodes: Vec<EpisodeOutcome>,
    /// Episodes discarded after a metric failure.
    pub dropped: usize,
    pub grad_norm: f64,
}

/// Training molecules with their precomputed fingerprints.
pub struct TrainingSet {
    molecules: Vec<(Option<String>, MolGraph)>,
    mols: Vec<MolGraph>,
    fingerprints: Vec<Fingerprint>,
}

impl TrainingSet {
    pub fn new(molecules: Vec<(Option<String>, MolGraph)>) -> Result<Self, LearnError> {
        if molecules.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let mols: Vec<MolGraph> = molecules.iter().map(|(_, m)| m.clone()).collect();
        let fingerprints = mols.iter().map(fingerprint).collect();
        Ok(TrainingSet {
            molecules,
            mols,
            fingerprints,
        })
    }

    pub fn from_dataset(d: &Dataset) -> Result<Self, LearnError> {
        Self::new(d.records.iter().map(|r| (r.name.clone(), r.mol.clone())).collect())
    }

    pub fn molecules(&self) -> &[MolGraph] {
        &self.mols
    }
}

/// Stateless 64-bit mixer for deriving independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn episode_seed(seed: u64, epoch: usize, n: usize) -> u64 {
    mix_seed(mix_seed(seed, epoch as u64 + 1), n as u64 + 1)
}

/// Samples and scores one episode. `Ok(None)` means a metric failed.
fn run_episode(
    net: &PotentialNet,
    data: &TrainingSet,
    metrics: &[WeightedMetric],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Option<EpisodeOutcome>, LearnError> {
    let ep = sample_episode(net, &data.molecules, seed)?;
    let gen_cfg = GenerationConfig {
        seed: mix_seed(seed, 0),
        ..cfg.generation.clone()
    };
    let out = generate_batch(&ep.grammar, &gen_cfg, cfg.eval_generations)?;
    let mut values = Vec::with_capacity(metrics.len());
    for m in metrics {
        match metrics::evaluate(&m.spec, &out.molecules, &data.mols, &data.fingerprints) {
            Ok(v) => values.push(v),
            Err(e) => {
                log::warn!("episode {seed:#x}: metric {} failed: {e}", m.name);
                return Ok(None);
            }
        }
    }
    let score = metrics.iter().zip(&values).map(|(m, v)| m.weight * v).sum();
    Ok(Some(EpisodeOutcome {
        seed,
        grammar: ep.grammar,
        trajectory: ep.trajectory,
        metrics: values,
        score,
        generated: out.molecules.len(),
        generation_failures: out.failures,
    }))
}

/// Draws and scores `cfg.mc_samples` episodes in parallel.
pub fn sample_batch(
    net: &PotentialNet,
    data: &TrainingSet,
    metrics: &[WeightedMetric],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(Vec<EpisodeOutcome>, usize), LearnError> {
    let results: Vec<Option<EpisodeOutcome>> = (0..cfg.mc_samples)
        .into_par_iter()
        .map(|n| run_episode(net, data, metrics, cfg, episode_seed(cfg.seed, epoch, n)))
        .collect::<Result<_, _>>()?;
    let dropped = results.iter().filter(|r| r.is_none()).count();
    let episodes: Vec<EpisodeOutcome> = results.into_iter().flatten().collect();
    if episodes.is_empty() {
        return Err(LearnError::AllEpisodesFailed(epoch));
    }
    Ok((episodes, dropped))
}

/// Subtracts each metric's batch mean. `raw[n][i]` is metric `i` of episode `n`.
pub fn normalize_rewards(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(width) = raw.first().map(Vec::len) else {
        return Vec::new();
    };
    let means: Vec<f64> = (0..width)
        .map(|i| raw.iter().map(|r| r[i]).sum::<f64>() / raw.len() as f64)
        .collect();
    raw.iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect())
        .collect()
}

/// The score-function estimate
/// `(1/N) sum_n (sum_i lambda_i Mtilde_i,n) d ln p(X_n) / d theta`.
pub fn policy_gradient(
    net: &PotentialNet,
    episodes: &[EpisodeOutcome],
    metrics: &[WeightedMetric],
) -> Result<Vec<f64>, LearnError> {
    let raw: Vec<Vec<f64>> = episodes.iter().map(|e| e.metrics.clone()).collect();
    let weights: Vec<f64> = normalize_rewards(&raw)
        .iter()
        .map(|r| r.iter().zip(metrics).map(|(v, m)| m.weight * v).sum())
        .collect();
    let n = episodes.len() as f64;
    let parts: Vec<Option<Vec<f64>>> = episodes
        .par_iter()
        .zip(&weights)
        .map(|(ep, &w)| {
            if w == 0.0 {
                return Ok(None);
            }
            let mut g = vec![0.0; net.param_count()];
            accumulate_log_prob_gradient(net, &ep.trajectory, w / n, &mut g)?;
            Ok(Some(g))
        })
        .collect::<Result<_, LearnError>>()?;
    let mut grad = vec![0.0; net.param_count()];
    for part in parts.into_iter().flatten() {
        for (g, p) in grad.iter_mut().zip(part) {
            *g += p;
        }
    }
    Ok(grad)
}

/// Samples one batch, then takes one Adam ascent step on the estimate.
pub fn reinforce_step(
    net: &mut PotentialNet,
    adam: &mut Adam,
    data: &TrainingSet,
    metrics: &[WeightedMetric],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<StepReport, LearnError> {
    let (episodes, dropped) = sample_batch(net, data, metrics, cfg, epoch)?;
    let grad = policy_gradient(net, &episodes, metrics)?;
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    adam.ascend(net.params_mut(), &grad);
    Ok(StepReport {
        episodes,
        dropped,
        grad_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64>) -> Summary {
        let v: Vec<f64> = values.collect();
        Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// One line of the training log. Epoch `k` describes the batch sampled with
/// the parameters after `k` updates; the last record has no update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub metrics: BTreeMap<String, Summary>,
    pub score: Summary,
    pub episodes: usize,
    pub dropped: usize,
    pub grad_norm: Option<f64>,
    pub wall_ms: u64,
}

impl EpochRecord {
    fn new(
        epoch: usize,
        metrics: &[WeightedMetric],
        episodes: &[EpisodeOutcome],
        dropped: usize,
        grad_norm: Option<f64>,
        wall_ms: u64,
    ) -> Self {
        EpochRecord {
            epoch,
            metrics: metrics
                .iter()
                .enumerate()
                .map(|(i, m)| (m.name.clone(), Summary::of(episodes.iter().map(|e| e.metrics[i]))))
                .collect(),
            score: Summary::of(episodes.iter().map(|e| e.score)),
            episodes: episodes.len(),
            dropped,
            grad_norm,
            wall_ms,
        }
    }
}

pub struct TrainOutcome {
    /// Highest-scoring grammar of the final batch.
    pub grammar: Grammar,
    pub best_score: f64,
    pub best_metrics: Vec<f64>,
    pub net: PotentialNet,
    pub log: Vec<EpochRecord>,
}

/// Runs `cfg.epochs` updates followed by a final scoring batch.
pub fn train(data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome, LearnError> {
    train_with_observer(data, cfg, |_, _| {})
}

/// [`train`], calling `observer(epoch, episodes)` for every batch.
pub fn train_with_observer(
    data: &TrainingSet,
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &[EpisodeOutcome]),
) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    let metrics = cfg.metrics()?;
    let mut net = PotentialNet::new(cfg.feature_dim, mix_seed(cfg.seed, 0));
    let mut adam = Adam::new(net.param_count(), cfg.learning_rate);
    let mut log = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let report = reinforce_step(&mut net, &mut adam, data, &metrics, cfg, epoch)?;
        observer(epoch, &report.episodes);
        let rec = EpochRecord::new(
            epoch,
            &metrics,
            &report.episodes,
            report.dropped,
            Some(report.grad_norm),
            start.elapsed().as_millis() as u64,
        );
        log::info!("epoch {epoch}: score {:.4} grad {:.3e}", rec.score.mean, report.grad_norm);
        log.push(rec);
    }
    let start = Instant::now();
    let (episodes, dropped) = sample_batch(&net, data, &metrics, cfg, cfg.epochs)?;
    observer(cfg.epochs, &episodes);
    log.push(EpochRecord::new(
        cfg.epochs,
        &metrics,
        &episodes,
        dropped,
        None,
        start.elapsed().as_millis() as u64,
    ));
    let best = episodes
        .into_iter()
        .reduce(|a, b| if b.score > a.score { b } else { a })
        .unwrap();
    Ok(TrainOutcome {
        grammar: best.grammar,
        best_score: best.score,
        best_metrics: best.metrics,
        net,
        log,
    })
}
