//! Recording contraction steps into a grammar with per-molecule derivations.

use std::collections::{BTreeMap, BTreeSet};

use super::matching::{apply_rule_with_ids, Match};
use super::rule::make_rule;
use super::{Derivation, Grammar, GrammarError, Step};
use crate::hypergraph::{MolHypergraph, NodeId};
use crate::molgraph::MolGraph;

struct Contraction {
    rule: usize,
    initial: bool,
    /// The non-terminal that replaced the component.
    nt: NodeId,
    anchors: Vec<NodeId>,
    internals: Vec<NodeId>,
}

struct MoleculeLog {
    name: Option<String>,
    key: String,
    steps: Vec<Contraction>,
}

/// Accumulates rules while molecules are contracted, then turns each
/// molecule's contraction sequence into a derivation from the start symbol.
#[derive(Default)]
pub struct GrammarBuilder {
    grammar: Grammar,
    molecules: Vec<MoleculeLog>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        GrammarBuilder::default()
    }

    /// Registers a training molecule; returns its index for [`Self::contract`].
    pub fn start_molecule(&mut self, name: Option<String>, mol: &MolGraph) -> usize {
        self.molecules.push(MoleculeLog {
            name,
            key: mol.canonical_key(),
            steps: Vec::new(),
        });
        self.molecules.len() - 1
    }

    /// Extracts the rule for `component`, records it, and returns the
    /// contracted hypergraph with the new non-terminal's id.
    pub fn contract(
        &mut self,
        molecule: usize,
        h: &MolHypergraph,
        component: &BTreeSet<NodeId>,
    ) -> Result<(MolHypergraph, NodeId), GrammarError> {
        let (rule, embedding) = make_rule(h, component)?;
        let (contracted, nt) = h.contract(component)?;
        let id = self.grammar.add_rule(&rule);
        let k = rule.anchor_count();
        self.molecules[molecule].steps.push(Contraction {
            rule: id,
            initial: rule.initial,
            nt,
            anchors: embedding.node_ids[..k].to_vec(),
            internals: embedding.node_ids[k..].to_vec(),
        });
        Ok((contracted, nt))
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Builds derivations by replaying each molecule's contractions in
    /// reverse, tracking where every contracted node reappears.
    pub fn finish(self) -> Result<Grammar, GrammarError> {
        let mut grammar = self.grammar;
        for log in self.molecules {
            let (mut h, start) = MolHypergraph::start_symbol();
            let mut replay_id: BTreeMap<NodeId, NodeId> = BTreeMap::new();
            let mut steps = Vec::with_capacity(log.steps.len());
            for c in log.steps.iter().rev() {
                let nt = if c.initial { start } else { replay_id[&c.nt] };
                let site = Match {
                    nt,
                    slots: c.anchors.iter().map(|a| replay_id[a]).collect(),
                };
                let rule = &grammar.rules()[c.rule];
                let (next, fresh) = apply_rule_with_ids(&h, rule, &site)?;
                for (&old, &new) in c.internals.iter().zip(&fresh) {
                    replay_id.insert(old, new);
                }
                h = next;
                steps.push(Step { rule: c.rule, site });
            }
            grammar.push_derivation(Derivation {
                name: log.name,
                molecule: log.key,
                steps,
            });
        }
        Ok(grammar)
    }
}
