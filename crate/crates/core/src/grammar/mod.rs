//! Production rules, grammars with derivation provenance, and stochastic
//! generation.

mod builder;
mod generate;
mod matching;
mod rule;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{EdgeLabel, HypergraphError, MolHypergraph};
use crate::molgraph::{write_smiles_tokens, BondOrder, MolGraph};

pub use builder::GrammarBuilder;
pub use generate::{generate, generate_batch, select_rule, GenerationConfig, GenerationOutcome};
pub use matching::{apply_rule, apply_rule_with_ids, match_sites, Match};
pub use rule::{
    canonical_form, make_rule, rule_key, LhsEdge, NodeSig, ProductionRule, RuleEdge,
    RuleEmbedding, RuleNode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error("match is no longer valid for this hypergraph")]
    StaleMatch,
    #[error("derivation still has non-terminals after {0} rule applications")]
    BudgetExceeded(usize),
    #[error("no rule applies at iteration {0}")]
    DeadEnd(usize),
    #[error("grammar has no initial rule")]
    NoInitialRule,
    #[error("unknown rule id {0}")]
    UnknownRule(usize),
    #[error("corrupt grammar: {0}")]
    Corrupt(String),
}

/// One rewrite in a derivation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub rule: usize,
    pub site: Match,
}

/// How a training molecule is derived from the start symbol. Node ids in the
/// sites refer to the hypergraph being rebuilt, which starts as the single
/// start-symbol node 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Canonical key of the molecule the derivation must reproduce.
    pub molecule: String,
    pub steps: Vec<Step>,
}

/// Deduplicated rules plus one derivation per training molecule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grammar {
    rules: Vec<ProductionRule>,
    provenance: Vec<Derivation>,
    keys: HashMap<String, usize>,
}

const FORMAT: &str = "grammol-grammar";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GrammarFile {
    format: String,
    version: u32,
    rules: Vec<RuleRecord>,
    provenance: Vec<DerivationRecord>,
}

/// On-disk rule. `rhs.nodes` lists the anchors first, so edge indices are
/// the same as in memory; `anchors` repeats their signatures for readers.
#[derive(Serialize, Deserialize)]
struct RuleRecord {
    key: String,
    is_initial: bool,
    count: usize,
    anchors: Vec<NodeSig>,
    rhs: RhsRecord,
}

#[derive(Serialize, Deserialize)]
struct RhsRecord {
    nodes: Vec<RuleNode>,
    edges: Vec<RuleEdge>,
}

#[derive(Serialize, Deserialize)]
struct DerivationRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    molecule_key: String,
    rules: Vec<usize>,
    sites: Vec<Match>,
}

impl Grammar {
    pub fn new() -> Self {
        Grammar::default()
    }

    pub fn rules(&self) -> &[ProductionRule] {
        &self.rules
    }

    pub fn rule(&self, id: usize) -> Option<&ProductionRule> {
        self.rules.get(id)
    }

    pub fn provenance(&self) -> &[Derivation] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Adds one observation of `rule`, merging with an isomorphic rule if
    /// present, and returns the rule id. New rules are stored in canonical
    /// form.
    pub fn add_rule(&mut self, rule: &ProductionRule) -> usize {
        let key = rule_key(rule);
        if let Some(&id) = self.keys.get(&key) {
            self.rules[id].count += 1;
            return id;
        }
        let (mut canon, _) = canonical_form(rule);
        canon.count = 1;
        let id = self.rules.len();
        self.rules.push(canon);
        self.keys.insert(key, id);
        id
    }

    pub(crate) fn push_derivation(&mut self, d: Derivation) {
        self.provenance.push(d);
    }

    pub fn has_initial_rule(&self) -> bool {
        self.rules.iter().any(|r| r.initial)
    }

    /// Sum of rule counts; equals the number of contraction steps recorded.
    pub fn total_count(&self) -> usize {
        self.rules.iter().map(|r| r.count).sum()
    }

    /// Rebuilds the molecule of `derivation` by applying its steps.
    pub fn replay(&self, derivation: &Derivation) -> Result<MolGraph, GrammarError> {
        let (mut h, _) = MolHypergraph::start_symbol();
        for step in &derivation.steps {
            let rule = self
                .rules
                .get(step.rule)
                .ok_or(GrammarError::UnknownRule(step.rule))?;
            h = apply_rule(&h, rule, &step.site)?;
        }
        Ok(h.to_molecule()?)
    }

    /// Rules used by every training molecule's derivation, ascending id.
    pub fn shared_rules(&self) -> Vec<usize> {
        let mut iter = self.provenance.iter().map(|d| {
            d.steps.iter().map(|s| s.rule).collect::<BTreeSet<usize>>()
        });
        let Some(first) = iter.next() else {
            return Vec::new();
        };
        iter.fold(first, |acc, s| acc.intersection(&s).copied().collect())
            .into_iter()
            .collect()
    }

    pub fn to_json(&self) -> String {
        let rules = self
            .rules
            .iter()
            .map(|r| RuleRecord {
                key: rule_key(r),
                is_initial: r.initial,
                count: r.count,
                anchors: r.anchors(),
                rhs: RhsRecord {
                    nodes: r.nodes.clone(),
                    edges: r.edges.clone(),
                },
            })
            .collect();
        let provenance = self
            .provenance
            .iter()
            .map(|d| DerivationRecord {
                name: d.name.clone(),
                molecule_key: d.molecule.clone(),
                rules: d.steps.iter().map(|s| s.rule).collect(),
                sites: d.steps.iter().map(|s| s.site.clone()).collect(),
            })
            .collect();
        let file = GrammarFile {
            format: FORMAT.to_string(),
            version: VERSION,
            rules,
            provenance,
        };
        serde_json::to_string_pretty(&file).expect("grammar serializes")
    }

    pub fn from_json(text: &str) -> Result<Grammar, GrammarError> {
        let file: GrammarFile =
            serde_json::from_str(text).map_err(|e| GrammarError::Corrupt(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(GrammarError::Corrupt(format!(
                "expected {FORMAT} version {VERSION}, found {} version {}",
                file.format, file.version
            )));
        }
        if file.rules.is_empty() {
            return Err(GrammarError::Corrupt("grammar has no rules".into()));
        }
        let mut grammar = Grammar::new();
        for (id, record) in file.rules.into_iter().enumerate() {
            let rule = ProductionRule {
                initial: record.is_initial,
                nodes: record.rhs.nodes,
                edges: record.rhs.edges,
                count: record.count,
            };
            rule.validate()?;
            if rule.anchors() != record.anchors {
                return Err(GrammarError::Corrupt(format!(
                    "rule {id}: anchors do not match the right-hand side"
                )));
            }
            let key = rule_key(&rule);
            if key != record.key {
                return Err(GrammarError::Corrupt(format!(
                    "rule {id}: key does not match its content"
                )));
            }
            if grammar.keys.insert(key, id).is_some() {
                return Err(GrammarError::Corrupt(format!("rule {id} is a duplicate")));
            }
            grammar.rules.push(rule);
        }
        for d in file.provenance {
            if d.rules.len() != d.sites.len() {
                return Err(GrammarError::Corrupt(format!(
                    "derivation of {}: {} rules but {} sites",
                    d.molecule_key,
                    d.rules.len(),
                    d.sites.len()
                )));
            }
            if let Some(&r) = d.rules.iter().find(|&&r| r >= grammar.rules.len()) {
                return Err(GrammarError::UnknownRule(r));
            }
            grammar.provenance.push(Derivation {
                name: d.name,
                molecule: d.molecule_key,
                steps: d
                    .rules
                    .into_iter()
                    .zip(d.sites)
                    .map(|(rule, site)| Step { rule, site })
                    .collect(),
            });
        }
        Ok(grammar)
    }
}

/// SMILES-like text for a rule's right-hand side: anchors are written as
/// numbered bracket atoms `[C:1]`, non-terminals as `*`.
pub fn rule_text(rule: &ProductionRule) -> String {
    let k = rule.anchor_count();
    let tokens: Vec<String> = rule
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| match n {
            RuleNode::Anchor { sig } => match sig {
                NodeSig::Terminal { element, charge } => {
                    let charge = match charge {
                        0 => String::new(),
                        1 => "+".into(),
                        -1 => "-".into(),
                        c => format!("{c:+}"),
                    };
                    format!("[{element}{charge}:{}]", i + 1)
                }
                NodeSig::NonTerminal => format!("[*:{}]", i + 1),
            },
            RuleNode::NonTerminal => "*".to_string(),
            RuleNode::Atom(a) => {
                let mut s = if a.aromatic {
                    a.element.symbol().to_lowercase()
                } else {
                    a.element.symbol().to_string()
                };
                if a.charge != 0 || a.explicit_h.is_some() || !a.element.is_organic_subset() {
                    let h = match a.explicit_h {
                        None | Some(0) => String::new(),
                        Some(1) => "H".into(),
                        Some(n) => format!("H{n}"),
                    };
                    let c = match a.charge {
                        0 => String::new(),
                        1 => "+".into(),
                        -1 => "-".into(),
                        c => format!("{c:+}"),
                    };
                    s = format!("[{s}{h}{c}]");
                }
                s
            }
        })
        .collect();
    let mut pairs: Vec<(usize, usize, BondOrder)> = Vec::new();
    for e in &rule.edges {
        let k = e.nodes.len();
        let mut push = |a: usize, b: usize, o: BondOrder| {
            if a != b && !pairs.iter().any(|&(x, y, _)| (x, y) == (a.min(b), a.max(b))) {
                pairs.push((a.min(b), a.max(b), o));
            }
        };
        match &e.label {
            EdgeLabel::Bond(o) => push(e.nodes[0], e.nodes[1], *o),
            EdgeLabel::Ring { orders, .. } => {
                for (j, &o) in orders.iter().enumerate() {
                    push(e.nodes[j], e.nodes[(j + 1) % k], o);
                }
            }
        }
    }
    let bonds: Vec<(usize, usize, &str)> = pairs
        .iter()
        .map(|&(a, b, o)| {
            let sym = match o {
                BondOrder::Single => "",
                BondOrder::Double => "=",
                BondOrder::Triple => "#",
                BondOrder::Aromatic => ":",
            };
            (a, b, sym)
        })
        .collect();
    // Start from a least-connected internal node so chains read end to end
    // and anchors appear as substituents.
    let mut degree = vec![0usize; rule.nodes.len()];
    for &(a, b, _) in &pairs {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut order: Vec<usize> = (0..rule.nodes.len()).collect();
    order.sort_by_key(|&i| (i < k, degree[i], i));
    let mut ranks = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    write_smiles_tokens(&tokens, &bonds, &ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;
    use crate::molgraph::parse_smiles;

    fn grammar_for(smiles: &[&str]) -> Grammar {
        // Contract every molecule in one step.
        let mut b = GrammarBuilder::new();
        for s in smiles {
            let g = parse_smiles(s).unwrap();
            let h = build_hypergraph(&g);
            let m = b.start_molecule(None, &g);
            let all = h.node_ids().into_iter().collect();
            b.contract(m, &h, &all).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn duplicates_merge_with_counts() {
        let g = grammar_for(&["OCCO", "C(O)CO", "CCO"]);
        assert_eq!(g.len(), 2);
        assert_eq!(g.rules()[0].count, 2);
        assert_eq!(g.total_count(), 3);
    }

    #[test]
    fn json_round_trip() {
        let g = grammar_for(&["OCCO", "c1ccccc1N"]);
        let back = Grammar::from_json(&g.to_json()).unwrap();
        assert_eq!(back.rules(), g.rules());
        assert_eq!(back.provenance(), g.provenance());
        for d in back.provenance() {
            assert_eq!(back.replay(d).unwrap().canonical_key(), d.molecule);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        assert!(Grammar::from_json("").is_err());
        assert!(Grammar::from_json("{}").is_err());
        let empty = r#"{"format":"grammol-grammar","version":1,"rules":[],"provenance":[]}"#;
        assert!(matches!(Grammar::from_json(empty), Err(GrammarError::Corrupt(_))));
    }

    #[test]
    fn shared_rules_intersect_derivations() {
        let g = grammar_for(&["OCCO", "OCCO"]);
        assert_eq!(g.shared_rules(), vec![0]);
        let g = grammar_for(&["OCCO", "CCN"]);
        assert!(g.shared_rules().is_empty());
    }

    #[test]
    fn rule_text_marks_anchors() {
        let h = build_hypergraph(&parse_smiles("OCCO").unwrap());
        let (rule, _) = make_rule(&h, &BTreeSet::from([1, 2])).unwrap();
        let text = rule_text(&rule);
        assert!(text.contains("[O:1]") && text.contains("[O:2]"), "{text}");
        let h = build_hypergraph(&parse_smiles("O=C=NC").unwrap());
        let (rule, _) = make_rule(&h, &BTreeSet::from([0, 1, 2])).unwrap();
        let text = rule_text(&rule);
        assert!(text.contains("N=C=O") || text.contains("O=C=N"), "{text}");
    }
}
