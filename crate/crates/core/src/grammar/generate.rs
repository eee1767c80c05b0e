//! Sampling molecules from a grammar.
//!
//! At iteration `t` (counting rule applications from zero) a rule is drawn
//! among the applicable ones with weight `exp(alpha * t * x_r)`, where
//! `x_r = 1` for rules that introduce no non-terminal. A match site of the
//! chosen rule is then drawn uniformly.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matching::{lhs_signature, site_signature, sites_at, splice, LhsSignature, Match};
use super::rule::{LhsEdge, NodeSig};
use super::{Grammar, GrammarError};
use crate::hypergraph::MolHypergraph;
use crate::molgraph::MolGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            alpha: 0.5,
            max_iterations: 100,
            seed: 0,
        }
    }
}

/// Draws an index with probability proportional to
/// `exp(alpha * t * terminal_only[i])`.
pub fn select_rule<R: Rng + ?Sized>(terminal_only: &[bool], t: usize, alpha: f64, rng: &mut R) -> usize {
    assert!(!terminal_only.is_empty());
    let boost = (alpha * t as f64).exp();
    let weights: Vec<f64> = terminal_only
        .iter()
        .map(|&x| if x { boost } else { 1.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct IndexedRule {
    lhs: Vec<LhsEdge>,
    anchors: Vec<NodeSig>,
    terminal_only: bool,
}

/// Per-grammar lookup tables: rules bucketed by left-hand-side signature.
pub(crate) struct RuleIndex {
    rules: Vec<IndexedRule>,
    initial: Vec<usize>,
    by_signature: HashMap<LhsSignature, Vec<usize>>,
}

impl RuleIndex {
    pub(crate) fn new(g: &Grammar) -> Self {
        let mut by_signature: HashMap<LhsSignature, Vec<usize>> = HashMap::new();
        let mut initial = Vec::new();
        let rules = g
            .rules()
            .iter()
            .enumerate()
            .map(|(id, r)| {
                if r.initial {
                    initial.push(id);
                } else {
                    by_signature.entry(lhs_signature(r)).or_default().push(id);
                }
                IndexedRule {
                    lhs: r.lhs_edges(),
                    anchors: r.anchors(),
                    terminal_only: r.terminal_only(),
                }
            })
            .collect();
        RuleIndex {
            rules,
            initial,
            by_signature,
        }
    }

    /// Applicable rules with their match sites, ascending rule id.
    fn applicable(&self, h: &MolHypergraph) -> BTreeMap<usize, Vec<Match>> {
        let mut out: BTreeMap<usize, Vec<Match>> = BTreeMap::new();
        for nt in h.nonterminals() {
            if h.incident_edges(nt).is_empty() {
                for &id in &self.initial {
                    out.entry(id).or_default().push(Match { nt, slots: vec![] });
                }
                continue;
            }
            let Some(candidates) = self.by_signature.get(&site_signature(h, nt)) else {
                continue;
            };
            for &id in candidates {
                let r = &self.rules[id];
                let sites = sites_at(h, false, &r.lhs, &r.anchors, nt);
                if !sites.is_empty() {
                    out.entry(id).or_default().extend(sites);
                }
            }
        }
        out
    }
}

pub(crate) fn derive<R: Rng + ?Sized>(
    g: &Grammar,
    index: &RuleIndex,
    alpha: f64,
    max_iterations: usize,
    rng: &mut R,
) -> Result<MolGraph, GrammarError> {
    let (mut h, _) = MolHypergraph::start_symbol();
    for t in 0..max_iterations {
        let applicable = index.applicable(&h);
        if applicable.is_empty() {
            return Err(GrammarError::DeadEnd(t));
        }
        let ids: Vec<usize> = applicable.keys().copied().collect();
        let flags: Vec<bool> = ids.iter().map(|&id| index.rules[id].terminal_only).collect();
        let id = ids[select_rule(&flags, t, alpha, rng)];
        let sites = &applicable[&id];
        let site = &sites[rng.gen_range(0..sites.len())];
        h = splice(&h, &g.rules()[id], site).0;
        if h.is_terminal_only() {
            return Ok(h.to_molecule()?);
        }
    }
    Err(GrammarError::BudgetExceeded(max_iterations))
}

/// Generates one molecule with a generator seeded from `cfg.seed`.
pub fn generate(g: &Grammar, cfg: &GenerationConfig) -> Result<MolGraph, GrammarError> {
    if !g.has_initial_rule() {
        return Err(GrammarError::NoInitialRule);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    derive(g, &RuleIndex::new(g), cfg.alpha, cfg.max_iterations, &mut rng)
}

#[derive(Debug, Clone, Default)]
pub struct GenerationOutcome {
    pub molecules: Vec<MolGraph>,
    /// Derivations discarded (budget exceeded or dead end).
    pub failures: usize,
}

/// Generates `n` molecules from one seeded stream, re-drawing failed
/// derivations. Gives up after `20 * n` failures, so fewer than `n`
/// molecules may come back.
pub fn generate_batch(
    g: &Grammar,
    cfg: &GenerationConfig,
    n: usize,
) -> Result<GenerationOutcome, GrammarError> {
    if !g.has_initial_rule() {
        return Err(GrammarError::NoInitialRule);
    }
    let index = RuleIndex::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = GenerationOutcome::default();
    while out.molecules.len() < n && out.failures < 20 * n {
        match derive(g, &index, cfg.alpha, cfg.max_iterations, &mut rng) {
            Ok(m) => out.molecules.push(m),
            Err(GrammarError::BudgetExceeded(_) | GrammarError::DeadEnd(_)) => out.failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
