//! Finding where a rule applies and rewriting a non-terminal with it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::rule::{LhsEdge, NodeSig, ProductionRule, RuleNode};
use super::GrammarError;
use crate::hypergraph::{EdgeLabel, HGNode, Hyperedge, MolHypergraph, NodeId};
use crate::molgraph::BondOrder;

/// A place to apply a rule: the non-terminal to rewrite and the node bound
/// to each anchor slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Match {
    pub nt: NodeId,
    pub slots: Vec<NodeId>,
}

/// Every match of `rule` in `partial`.
pub fn match_sites(partial: &MolHypergraph, rule: &ProductionRule) -> Vec<Match> {
    let lhs = rule.lhs_edges();
    let anchors = rule.anchors();
    partial
        .nonterminals()
        .into_iter()
        .flat_map(|nt| sites_at(partial, rule.initial, &lhs, &anchors, nt))
        .collect()
}

/// Matches of a rule's left-hand side rooted at non-terminal `nt`.
pub(crate) fn sites_at(
    partial: &MolHypergraph,
    initial: bool,
    lhs: &[LhsEdge],
    anchors: &[NodeSig],
    nt: NodeId,
) -> Vec<Match> {
    let incident: Vec<&Hyperedge> = partial
        .incident_edges(nt)
        .into_iter()
        .map(|e| partial.edge(e).unwrap())
        .collect();
    if initial {
        return if incident.is_empty() {
            vec![Match { nt, slots: vec![] }]
        } else {
            vec![]
        };
    }
    if incident.len() != lhs.len() || lhs.is_empty() {
        return vec![];
    }
    let mut search = SiteSearch {
        partial,
        nt,
        lhs,
        anchors,
        incident: &incident,
        used: vec![false; incident.len()],
        slots: vec![None; anchors.len()],
        found: BTreeSet::new(),
    };
    search.extend(0);
    search
        .found
        .into_iter()
        .map(|slots| Match { nt, slots })
        .collect()
}

struct SiteSearch<'a> {
    partial: &'a MolHypergraph,
    nt: NodeId,
    lhs: &'a [LhsEdge],
    anchors: &'a [NodeSig],
    incident: &'a [&'a Hyperedge],
    used: Vec<bool>,
    slots: Vec<Option<NodeId>>,
    found: BTreeSet<Vec<NodeId>>,
}

impl SiteSearch<'_> {
    fn extend(&mut self, depth: usize) {
        if depth == self.lhs.len() {
            let slots: Vec<NodeId> = self.slots.iter().map(|s| s.unwrap()).collect();
            self.found.insert(slots);
            return;
        }
        let pattern = &self.lhs[depth];
        for i in 0..self.incident.len() {
            if self.used[i] {
                continue;
            }
            let edge = self.incident[i];
            for view in orientations(edge, &pattern.label) {
                let saved = self.slots.clone();
                if self.bind(pattern, &view) {
                    self.used[i] = true;
                    self.extend(depth + 1);
                    self.used[i] = false;
                }
                self.slots = saved;
            }
        }
    }

    /// Binds anchor slots along one orientation of a partial edge.
    fn bind(&mut self, pattern: &LhsEdge, nodes: &[NodeId]) -> bool {
        for (pos, &node) in pattern.positions.iter().zip(nodes) {
            match pos {
                None => {
                    if node != self.nt {
                        return false;
                    }
                }
                Some(a) => {
                    if node == self.nt {
                        return false;
                    }
                    match self.slots[*a] {
                        Some(bound) if bound != node => return false,
                        Some(_) => {}
                        None => {
                            if self.slots.contains(&Some(node))
                                || NodeSig::of(self.partial.node(node).unwrap()) != self.anchors[*a]
                            {
                                return false;
                            }
                            self.slots[*a] = Some(node);
                        }
                    }
                }
            }
        }
        true
    }
}

/// Position orders of `edge` under which its label equals `target`: both
/// directions for bonds, all rotations and reflections for rings.
fn orientations(edge: &Hyperedge, target: &EdgeLabel) -> Vec<Vec<NodeId>> {
    match (&edge.label, target) {
        (EdgeLabel::Bond(a), EdgeLabel::Bond(b)) if a == b => {
            vec![edge.nodes.clone(), vec![edge.nodes[1], edge.nodes[0]]]
        }
        (
            EdgeLabel::Ring { orders, aromatic },
            EdgeLabel::Ring {
                orders: want,
                aromatic: want_aromatic,
            },
        ) if aromatic == want_aromatic && orders.len() == want.len() => {
            let k = orders.len();
            let mut out = Vec::new();
            for r in 0..k {
                for reflect in [false, true] {
                    let (idx, ord): (Vec<usize>, Vec<BondOrder>) = (0..k)
                        .map(|j| dihedral(orders, r, j, reflect))
                        .unzip();
                    if &ord == want {
                        out.push(idx.iter().map(|&i| edge.nodes[i]).collect());
                    }
                }
            }
            out
        }
        _ => vec![],
    }
}

/// Position and outgoing bond order of step `j` when walking a ring from
/// position `r`, forward or reflected.
fn dihedral(orders: &[BondOrder], r: usize, j: usize, reflect: bool) -> (usize, BondOrder) {
    let k = orders.len();
    if reflect {
        ((r + k - j) % k, orders[(r + 2 * k - j - 1) % k])
    } else {
        ((r + j) % k, orders[(r + j) % k])
    }
}

/// Applies `rule` at `m`. Fails with `StaleMatch` unless `m` is a current
/// match of the rule.
pub fn apply_rule(
    partial: &MolHypergraph,
    rule: &ProductionRule,
    m: &Match,
) -> Result<MolHypergraph, GrammarError> {
    apply_rule_with_ids(partial, rule, m).map(|(h, _)| h)
}

/// As [`apply_rule`], also returning the ids given to the rule's internal
/// nodes, in rule order.
pub fn apply_rule_with_ids(
    partial: &MolHypergraph,
    rule: &ProductionRule,
    m: &Match,
) -> Result<(MolHypergraph, Vec<NodeId>), GrammarError> {
    let valid = matches!(partial.node(m.nt), Some(HGNode::NonTerminal))
        && sites_at(partial, rule.initial, &rule.lhs_edges(), &rule.anchors(), m.nt)
            .contains(m);
    if !valid {
        return Err(GrammarError::StaleMatch);
    }
    Ok(splice(partial, rule, m))
}

/// Rewrites without re-checking the match.
pub(crate) fn splice(
    partial: &MolHypergraph,
    rule: &ProductionRule,
    m: &Match,
) -> (MolHypergraph, Vec<NodeId>) {
    let mut h = partial.clone();
    for e in partial.incident_edges(m.nt) {
        h.remove_edge(e);
    }
    h.remove_node(m.nt);
    let k = rule.anchor_count();
    let mut ids: Vec<NodeId> = m.slots.clone();
    let mut fresh = Vec::with_capacity(rule.nodes.len() - k);
    for node in &rule.nodes[k..] {
        let id = match node {
            RuleNode::Atom(atom) => h.add_node(HGNode::Terminal(*atom)),
            RuleNode::NonTerminal => h.add_node(HGNode::NonTerminal),
            RuleNode::Anchor { .. } => unreachable!("anchors precede internals"),
        };
        ids.push(id);
        fresh.push(id);
    }
    for e in &rule.edges {
        h.add_edge(Hyperedge {
            nodes: e.nodes.iter().map(|&i| ids[i]).collect(),
            label: e.label.clone(),
        });
    }
    (h, fresh)
}

/// An orientation-free summary of a left-hand side, used to skip rules that
/// cannot match a non-terminal without running the search.
pub(crate) type LhsSignature = Vec<(u8, bool, Vec<(Option<NodeSig>, BondOrder)>)>;

fn describe(label: &EdgeLabel, kinds: &[Option<NodeSig>]) -> (u8, bool, Vec<(Option<NodeSig>, BondOrder)>) {
    match label {
        EdgeLabel::Bond(o) => {
            let mut seq = vec![(kinds[0], *o), (kinds[1], *o)];
            seq.sort();
            (0, false, seq)
        }
        EdgeLabel::Ring { orders, aromatic } => {
            let k = orders.len();
            let best = (0..k)
                .flat_map(|r| [false, true].map(|f| (r, f)))
                .map(|(r, f)| {
                    (0..k)
                        .map(|j| {
                            let (i, o) = dihedral(orders, r, j, f);
                            (kinds[i], o)
                        })
                        .collect::<Vec<_>>()
                })
                .min()
                .unwrap();
            (1, *aromatic, best)
        }
    }
}

pub(crate) fn lhs_signature(rule: &ProductionRule) -> LhsSignature {
    let anchors = rule.anchors();
    let mut sig: LhsSignature = rule
        .lhs_edges()
        .iter()
        .map(|e| {
            let kinds: Vec<Option<NodeSig>> =
                e.positions.iter().map(|p| p.map(|a| anchors[a])).collect();
            describe(&e.label, &kinds)
        })
        .collect();
    sig.sort();
    sig
}

pub(crate) fn site_signature(partial: &MolHypergraph, nt: NodeId) -> LhsSignature {
    let mut sig: LhsSignature = partial
        .incident_edges(nt)
        .into_iter()
        .map(|e| {
            let edge = partial.edge(e).unwrap();
            let kinds: Vec<Option<NodeSig>> = edge
                .nodes
                .iter()
                .map(|&n| (n != nt).then(|| NodeSig::of(partial.node(n).unwrap())))
                .collect();
            describe(&edge.label, &kinds)
        })
        .collect();
    sig.sort();
    sig
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::rule::make_rule;
    use crate::hypergraph::build_hypergraph;
    use crate::molgraph::{parse_smiles, Atom, Element};

    fn hg(s: &str) -> MolHypergraph {
        build_hypergraph(&parse_smiles(s).unwrap())
    }

    #[test]
    fn initial_rule_on_start_symbol() {
        let h = hg("OCCO");
        let all = h.node_ids().into_iter().collect();
        let (rule, _) = make_rule(&h, &all).unwrap();
        let (start, nt) = MolHypergraph::start_symbol();
        let sites = match_sites(&start, &rule);
        assert_eq!(sites, vec![Match { nt, slots: vec![] }]);
        let out = apply_rule(&start, &rule, &sites[0]).unwrap();
        let mol = out.to_molecule().unwrap();
        assert_eq!(mol.canonical_key(), parse_smiles("OCCO").unwrap().canonical_key());
    }

    #[test]
    fn two_sites_by_anchor_symmetry() {
        let h = hg("OCCO");
        let comp = BTreeSet::from([1, 2]);
        let (rule, _) = make_rule(&h, &comp).unwrap();
        let (partial, _) = h.contract(&comp).unwrap();
        let sites = match_sites(&partial, &rule);
        assert_eq!(sites.len(), 2);
        for m in &sites {
            let out = apply_rule(&partial, &rule, m).unwrap();
            assert_eq!(
                out.to_molecule().unwrap().canonical_key(),
                parse_smiles("OCCO").unwrap().canonical_key()
            );
        }
    }

    #[test]
    fn label_mismatch_gives_no_sites() {
        let h = hg("NCCN");
        let comp = BTreeSet::from([1, 2]);
        let (rule, _) = make_rule(&h, &comp).unwrap();
        let (partial, _) = hg("OCCO").contract(&comp).unwrap();
        assert!(match_sites(&partial, &rule).is_empty());
    }

    #[test]
    fn stale_match_rejected() {
        let h = hg("OCCO");
        let comp = BTreeSet::from([1, 2]);
        let (rule, _) = make_rule(&h, &comp).unwrap();
        let (partial, nt) = h.contract(&comp).unwrap();
        let bad = Match { nt, slots: vec![0, 0] };
        assert!(matches!(apply_rule(&partial, &rule, &bad), Err(GrammarError::StaleMatch)));
        let gone = Match { nt: 99, slots: vec![0, 3] };
        assert!(matches!(apply_rule(&partial, &rule, &gone), Err(GrammarError::StaleMatch)));
    }

    #[test]
    fn straddling_ring_round_trip() {
        let h = hg("c1ccc2ccccc2c1");
        let first = h.edge_ids()[0];
        let ring: BTreeSet<NodeId> = h.edge(first).unwrap().nodes.iter().copied().collect();
        let (rule, _) = make_rule(&h, &ring).unwrap();
        let (partial, _) = h.contract(&ring).unwrap();
        let sites = match_sites(&partial, &rule);
        assert!(!sites.is_empty());
        let key = parse_smiles("c1ccc2ccccc2c1").unwrap().canonical_key();
        for m in &sites {
            let out = apply_rule(&partial, &rule, m).unwrap();
            assert_eq!(out.to_molecule().unwrap().canonical_key(), key);
        }
    }

    #[test]
    fn half_rings_close_a_cycle_of_bonds() {
        // The inner four carbons of hexane give a rule that inserts a chain
        // between two carbon anchors. Applied where the anchors are already
        // bonded to each other, it closes a six-ring made of bond edges.
        let chain = hg("CCCCCC");
        let comp = BTreeSet::from([1, 2, 3, 4]);
        let (rule, _) = make_rule(&chain, &comp).unwrap();
        let mut p = MolHypergraph::new();
        let a = p.add_node(HGNode::Terminal(Atom::new(Element::C)));
        let b = p.add_node(HGNode::Terminal(Atom::new(Element::C)));
        let nt = p.add_node(HGNode::NonTerminal);
        p.add_edge(Hyperedge { nodes: vec![a, b], label: EdgeLabel::Bond(BondOrder::Single) });
        p.add_edge(Hyperedge { nodes: vec![a, nt], label: EdgeLabel::Bond(BondOrder::Single) });
        p.add_edge(Hyperedge { nodes: vec![nt, b], label: EdgeLabel::Bond(BondOrder::Single) });
        let sites = match_sites(&p, &rule);
        assert!(!sites.is_empty());
        let out = apply_rule(&p, &rule, &sites[0]).unwrap();
        let mol = out.to_molecule().unwrap();
        assert_eq!(mol.canonical_key(), parse_smiles("C1CCCCC1").unwrap().canonical_key());
        assert!(out.edges().all(|(_, e)| matches!(e.label, EdgeLabel::Bond(_))));
    }

    #[test]
    fn signatures_agree_for_matching_sites() {
        let h = hg("c1ccc2ccccc2c1");
        let first = h.edge_ids()[0];
        let ring: BTreeSet<NodeId> = h.edge(first).unwrap().nodes.iter().copied().collect();
        let (rule, _) = make_rule(&h, &ring).unwrap();
        let (partial, nt) = h.contract(&ring).unwrap();
        assert_eq!(lhs_signature(&rule), site_signature(&partial, nt));
    }
}
