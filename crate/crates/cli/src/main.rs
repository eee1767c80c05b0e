//! `grammol` command-line front end.

mod config;
mod report;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use grammol::grammar::{generate_batch, rule_text, GenerationConfig, Grammar};
use grammol::hypergraph::build_hypergraph;
use grammol::learn::{train, LearnError, TrainConfig, TrainingSet};
use grammol::metrics::{
    self, external_metric, MembershipPattern, MetricError, DEFAULT_TIMEOUT, PATTERN_IDS,
};
use grammol::molgraph::{
    builtin_dataset, builtin_text, parse_dataset, parse_smiles, Dataset, MolGraph, BUILTIN_DATASETS,
};

use config::ConfigFile;
use report::{Cell, InputRef, Provenance, Report};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "grammol", version, about = "Learn molecular graph grammars from small datasets")]
struct Cli {
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value file with defaults for any long flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a grammar; writes grammar.json, checkpoint.json and train_log.jsonl.
    Train {
        /// SMILES file or builtin:<id>.
        #[arg(long)]
        dataset: Option<String>,
        /// Weighted metrics, e.g. diversity:1,membership:2.
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        eval_generations: Option<usize>,
        #[arg(long)]
        feature_dim: Option<usize>,
        /// Membership pattern id (inferred for builtin datasets).
        #[arg(long)]
        membership: Option<String>,
    },
    /// Sample molecules from a grammar.
    Generate {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(short = 'n', long = "count")]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Output file (default: <out>/generated.smi).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score generated molecules against a training set.
    Evaluate {
        #[arg(long)]
        generated: String,
        #[arg(long)]
        train: String,
        #[arg(long)]
        membership: Option<String>,
        /// External scorer as name=command (repeatable).
        #[arg(long)]
        external: Vec<String>,
        /// Report file (default: <out>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the rules of a grammar.
    Rules {
        #[arg(long)]
        grammar: PathBuf,
        /// Only rules used by every training molecule.
        #[arg(long)]
        shared: bool,
    },
    /// Dump the hypergraph of a molecule.
    Hgraph {
        #[arg(long)]
        smiles: String,
    },
    /// List the bundled datasets, or print one.
    Datasets {
        #[arg(long)]
        show: Option<String>,
    },
}

/// A broken internal invariant (exit code 2).
#[derive(Debug)]
struct Internal(String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for Internal {}

struct Globals {
    seed: u64,
    out: PathBuf,
    config: ConfigFile,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Internal>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let threads: Option<usize> = config.pick(cli.threads, "threads")?;
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("cannot size thread pool: {e}"))?;
    }
    let g = Globals {
        seed: config.or(cli.seed, "seed", DEFAULT_SEED)?,
        out: config.or(cli.out.clone(), "out", PathBuf::from("."))?,
        config,
    };
    match cli.command {
        Command::Train {
            dataset,
            metrics,
            epochs,
            mc_samples,
            learning_rate,
            eval_generations,
            feature_dim,
            membership,
        } => {
            let defaults = TrainConfig::default();
            let c = &g.config;
            let dataset: String = c
                .pick(dataset, "dataset")?
                .ok_or_else(|| anyhow!("--dataset is required"))?;
            let mut cfg = TrainConfig {
                epochs: c.or(epochs, "epochs", defaults.epochs)?,
                mc_samples: c.or(mc_samples, "mc-samples", defaults.mc_samples)?,
                learning_rate: c.or(learning_rate, "learning-rate", defaults.learning_rate)?,
                eval_generations: c.or(eval_generations, "eval-generations", defaults.eval_generations)?,
                feature_dim: c.or(feature_dim, "feature-dim", defaults.feature_dim)?,
                seed: g.seed,
                ..defaults
            };
            if let Some(m) = c.pick::<String>(metrics, "metrics")? {
                cfg.lambda = parse_weights(&m)?;
            }
            cmd_train(&g, &dataset, cfg, c.pick(membership, "membership")?)
        }
        Command::Generate {
            grammar,
            n,
            alpha,
            max_iterations,
            output,
        } => {
            let c = &g.config;
            let defaults = GenerationConfig::default();
            let cfg = GenerationConfig {
                alpha: c.or(alpha, "alpha", defaults.alpha)?,
                max_iterations: c.or(max_iterations, "max-iterations", defaults.max_iterations)?,
                seed: g.seed,
            };
            let n: usize = c.pick(n, "count")?.ok_or_else(|| anyhow!("-n <count> is required"))?;
            let output = output.unwrap_or_else(|| g.out.join("generated.smi"));
            cmd_generate(&grammar, n, &cfg, &output)
        }
        Command::Evaluate {
            generated,
            train,
            membership,
            external,
            report,
        } => {
            let report = report.unwrap_or_else(|| g.out.join("report.json"));
            let membership = g.config.pick(membership, "membership")?;
            cmd_evaluate(&g, &generated, &train, membership, &external, &report)
        }
        Command::Rules { grammar, shared } => {
            print!("{}", cmd_rules(&grammar, shared)?);
            Ok(())
        }
        Command::Hgraph { smiles } => {
            let mol = parse_smiles(&smiles).with_context(|| format!("cannot parse `{smiles}`"))?;
            print!("{}", build_hypergraph(&mol).dump());
            Ok(())
        }
        Command::Datasets { show } => {
            match show {
                Some(id) => print!(
                    "{}",
                    builtin_text(&id).ok_or_else(|| unknown_dataset(&id))?
                ),
                None => {
                    for id in BUILTIN_DATASETS {
                        println!("builtin:{id}\t{}", builtin_dataset(id).unwrap().len());
                    }
                }
            }
            Ok(())
        }
    }
}

fn unknown_dataset(id: &str) -> anyhow::Error {
    anyhow!(
        "unknown builtin dataset `{id}` (available: {})",
        BUILTIN_DATASETS.join(", ")
    )
}

/// A dataset with its raw bytes and builtin id, if any.
struct Loaded {
    dataset: Dataset,
    input: InputRef,
    builtin: Option<&'static str>,
}

fn load_dataset(spec: &str) -> Result<Loaded> {
    if let Some(id) = spec.strip_prefix("builtin:") {
        let id = BUILTIN_DATASETS
            .iter()
            .copied()
            .find(|&b| b == id)
            .ok_or_else(|| unknown_dataset(id))?;
        let text = builtin_text(id).unwrap();
        return Ok(Loaded {
            dataset: builtin_dataset(id).unwrap(),
            input: InputRef::new(spec, text.as_bytes()),
            builtin: Some(id),
        });
    }
    let text = fs::read_to_string(spec).with_context(|| format!("cannot read dataset {spec}"))?;
    let dataset = parse_dataset(spec, &text).with_context(|| format!("in dataset {spec}"))?;
    Ok(Loaded {
        dataset,
        input: InputRef::new(spec, text.as_bytes()),
        builtin: None,
    })
}

/// Parses `name:weight,...`; an external scorer is written `external=<command>:weight`.
fn parse_weights(text: &str) -> Result<std::collections::BTreeMap<String, f64>> {
    let mut out = std::collections::BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, w) = item
            .rsplit_once(':')
            .ok_or_else(|| anyhow!("metric `{item}` needs a weight, as in diversity:1"))?;
        let weight: f64 = w.parse().map_err(|_| anyhow!("bad weight `{w}` for `{name}`"))?;
        let name = match name.strip_prefix("external=") {
            Some(cmd) => format!("external:{cmd}"),
            None => name.to_string(),
        };
        if out.insert(name.clone(), weight).is_some() {
            bail!("metric `{name}` listed twice");
        }
    }
    if out.is_empty() {
        bail!("no metrics given");
    }
    Ok(out)
}

fn pattern_for(explicit: Option<String>, builtin: Option<&str>) -> Result<Option<String>> {
    match explicit {
        Some(id) => {
            MembershipPattern::builtin(&id)?;
            Ok(Some(id))
        }
        None => Ok(builtin
            .and_then(MembershipPattern::for_dataset)
            .map(|p| p.id.to_string())),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_train(g: &Globals, dataset: &str, mut cfg: TrainConfig, membership: Option<String>) -> Result<()> {
    let loaded = load_dataset(dataset)?;
    if loaded.dataset.is_empty() {
        return Err(LearnError::EmptyDataset).context(format!("dataset {dataset}"));
    }
    cfg.membership_pattern = pattern_for(membership, loaded.builtin)?;
    if cfg.lambda.contains_key("membership") && cfg.membership_pattern.is_none() {
        bail!(
            "metric `membership` needs --membership <id> (available: {})",
            PATTERN_IDS.join(", ")
        );
    }
    cfg.validate()?;
    let data = TrainingSet::from_dataset(&loaded.dataset)?;
    let outcome = train(&data, &cfg).map_err(|e| match e {
        LearnError::Grammar(inner) => anyhow::Error::new(Internal(inner.to_string())),
        other => other.into(),
    })?;
    for (d, record) in outcome.grammar.provenance().iter().zip(&loaded.dataset.records) {
        let back = outcome
            .grammar
            .replay(d)
            .map_err(|e| Internal(format!("replay failed: {e}")))?;
        if back.canonical_key() != record.mol.canonical_key() {
            return Err(Internal(format!("grammar does not reproduce {}", record.smiles)).into());
        }
    }

    write_file(&g.out.join("grammar.json"), &(outcome.grammar.to_json() + "\n"))?;
    write_file(&g.out.join("checkpoint.json"), &(outcome.net.to_checkpoint() + "\n"))?;
    let mut log = String::new();
    for rec in &outcome.log {
        log.push_str(&serde_json::to_string(rec)?);
        log.push('\n');
    }
    write_file(&g.out.join("train_log.jsonl"), &log)?;

    let last = outcome.log.last().unwrap();
    let metrics = cfg.metrics()?;
    println!(
        "trained {} epochs on {} molecules: {} rules",
        cfg.epochs,
        loaded.dataset.len(),
        outcome.grammar.len()
    );
    println!("{:<24}  {:>8}  {:>8}", "metric", "batch", "best");
    for (m, v) in metrics.iter().zip(&outcome.best_metrics) {
        println!("{:<24}  {:>8.4}  {:>8.4}", m.name, last.metrics[&m.name].mean, v);
    }
    println!("{:<24}  {:>8.4}  {:>8.4}", "score", last.score.mean, outcome.best_score);
    Ok(())
}

fn read_grammar(path: &Path) -> Result<Grammar> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read grammar {}", path.display()))?;
    Grammar::from_json(&text).with_context(|| format!("in grammar {}", path.display()))
}

fn cmd_generate(grammar: &Path, n: usize, cfg: &GenerationConfig, output: &Path) -> Result<()> {
    let g = read_grammar(grammar)?;
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) || cfg.max_iterations == 0 {
        bail!("--alpha must be >= 0 and --max-iterations >= 1");
    }
    let out = generate_batch(&g, cfg, n)?;
    let mut text = String::new();
    for m in &out.molecules {
        if !metrics::is_valid(m) {
            return Err(Internal(format!("generated an invalid molecule {}", m.canonical_smiles())).into());
        }
        text.push_str(&m.canonical_smiles());
        text.push('\n');
    }
    write_file(output, &text)?;
    eprintln!(
        "wrote {} molecules to {} ({} failed derivations skipped)",
        out.molecules.len(),
        output.display(),
        out.failures
    );
    if out.molecules.len() < n {
        bail!("gave up after {} failed derivations", out.failures);
    }
    Ok(())
}

fn cmd_evaluate(
    g: &Globals,
    generated: &str,
    train: &str,
    membership: Option<String>,
    external: &[String],
    report_path: &Path,
) -> Result<()> {
    let gen_text = match generated.strip_prefix("builtin:") {
        Some(id) => builtin_text(id).ok_or_else(|| unknown_dataset(id))?.to_string(),
        None => fs::read_to_string(generated).with_context(|| format!("cannot read {generated}"))?,
    };
    let candidates: Vec<Option<MolGraph>> = gen_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_smiles(l.rsplit('\t').next().unwrap()).ok())
        .collect();
    let loaded = load_dataset(train)?;
    let pattern = pattern_for(membership, loaded.builtin)?;
    let externals: Vec<(String, String)> = external
        .iter()
        .map(|e| {
            e.split_once('=')
                .map(|(n, c)| (n.trim().to_string(), c.to_string()))
                .filter(|(n, c)| !n.is_empty() && !c.trim().is_empty())
                .ok_or_else(|| anyhow!("--external expects name=command, got `{e}`"))
        })
        .collect::<Result<_>>()?;

    let valid: Vec<MolGraph> = candidates.iter().flatten().filter(|m| metrics::is_valid(m)).cloned().collect();
    let train_mols = loaded.dataset.molecules();
    let cell = |r: Result<f64, MetricError>| match r {
        Ok(v) => Cell::Value(v),
        Err(e) => Cell::Error(e.to_string()),
    };
    let refs: Vec<Option<&MolGraph>> = candidates.iter().map(Option::as_ref).collect();
    let mut rows = vec![
        ("validity".to_string(), cell(metrics::validity(&refs))),
        ("uniqueness".into(), cell(metrics::uniqueness(&valid))),
        ("novelty".into(), cell(metrics::novelty(&valid, &train_mols))),
        ("diversity".into(), cell(metrics::diversity(&valid))),
        ("chamfer".into(), cell(metrics::chamfer(&valid, &train_mols))),
    ];
    rows.push((
        "membership".into(),
        match &pattern {
            Some(id) => cell(metrics::membership(&valid, &MembershipPattern::builtin(id)?)),
            None => Cell::Missing("no membership pattern"),
        },
    ));
    match metrics::mol_weight_stats(&valid) {
        Ok(s) => rows.extend([
            ("mw_mean".into(), Cell::Value(s.mean)),
            ("mw_min".into(), Cell::Value(s.min)),
            ("mw_max".into(), Cell::Value(s.max)),
        ]),
        Err(e) => rows.push(("mw_mean".into(), Cell::Error(e.to_string()))),
    }
    let smiles: Vec<String> = valid.iter().map(MolGraph::canonical_smiles).collect();
    for (name, command) in &externals {
        let value = external_metric(&smiles, command, DEFAULT_TIMEOUT).map(|s| s.mean);
        if let Err(e) = &value {
            log::warn!("external scorer {name}: {e}");
        }
        rows.push((format!("external:{name}"), cell(value)));
    }

    let mut prov = Provenance::new("evaluate", g.seed);
    prov.inputs.push(InputRef::new(generated, gen_text.as_bytes()));
    prov.inputs.push(loaded.input);
    let mut config = Map::new();
    config.insert("molecules".into(), json!(candidates.len()));
    config.insert("valid_molecules".into(), json!(valid.len()));
    config.insert("membership_pattern".into(), json!(pattern));
    config.insert("fingerprint".into(), json!({"radius": metrics::FP_RADIUS, "bits": metrics::FP_BITS}));
    config.insert(
        "external".into(),
        Value::Object(externals.iter().map(|(n, c)| (n.clone(), json!(c))).collect()),
    );
    config.insert(
        "external_timeout_s".into(),
        json!(Duration::as_secs(&DEFAULT_TIMEOUT)),
    );
    for (k, v) in g.config.entries() {
        config.insert(format!("config:{k}"), json!(v));
    }
    prov.config = config;
    let report = Report { provenance: prov, rows };
    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    report.write(report_path)?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", report.table())?;
    Ok(())
}

fn cmd_rules(path: &Path, shared: bool) -> Result<String> {
    let g = read_grammar(path)?;
    let ids: Vec<usize> = if shared {
        g.shared_rules()
    } else {
        (0..g.len()).collect()
    };
    let mut out = format!(
        "# {} of {} rules, {} contractions, {} derivations\n",
        ids.len(),
        g.len(),
        g.total_count(),
        g.provenance().len()
    );
    for id in ids {
        let r = g.rule(id).unwrap();
        let kind = if r.initial { "init" } else { "    " };
        out.push_str(&format!("{id:>4}  {:>4}  {kind}  {}\n", r.count, rule_text(r)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_parse() {
        let w = parse_weights("diversity:1, membership:2").unwrap();
        assert_eq!(w["diversity"], 1.0);
        assert_eq!(w["membership"], 2.0);
        let w = parse_weights("external=python3 rs.py --fast:0.5").unwrap();
        assert_eq!(w["external:python3 rs.py --fast"], 0.5);
        assert!(parse_weights("diversity").is_err());
        assert!(parse_weights("diversity:x").is_err());
        assert!(parse_weights("diversity:1,diversity:2").is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
