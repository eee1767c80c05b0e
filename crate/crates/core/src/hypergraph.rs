//! Ring-aware molecular hypergraphs and component contraction.
//!
//! Each non-ring bond is an arity-2 hyperedge and each SSSR ring is a single
//! hyperedge listing its atoms in ring order. Contracting a connected node
//! set replaces it with one non-terminal node. Edges that only partly overlap
//! the set are kept and re-anchored: every position that held a contracted
//! node now holds the non-terminal, so a ring edge may list the same
//! non-terminal at several positions. Those repeated positions record which
//! part of the ring was internalized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{sssr, Atom, Bond, BondOrder, MolError, MolGraph};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypergraphError {
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error("hypergraph still contains non-terminal nodes")]
    NonTerminalPresent,
    #[error("unknown hyperedge {0}")]
    UnknownEdge(EdgeId),
    #[error(transparent)]
    Molecule(#[from] MolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HGNode {
    Terminal(Atom),
    NonTerminal,
}

impl HGNode {
    pub fn is_terminal(&self) -> bool {
        matches!(self, HGNode::Terminal(_))
    }

    pub fn atom(&self) -> Option<&Atom> {
        match self {
            HGNode::Terminal(a) => Some(a),
            HGNode::NonTerminal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Bond(BondOrder),
    /// `orders[k]` joins positions `k` and `k + 1` (cyclically).
    Ring { orders: Vec<BondOrder>, aromatic: bool },
}

impl EdgeLabel {
    pub fn ring(orders: Vec<BondOrder>) -> EdgeLabel {
        let aromatic = orders.iter().all(|&o| o == BondOrder::Aromatic);
        EdgeLabel::Ring { orders, aromatic }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub nodes: Vec<NodeId>,
    pub label: EdgeLabel,
}

impl Hyperedge {
    pub fn arity(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids without repetition, ascending.
    pub fn distinct_nodes(&self) -> Vec<NodeId> {
        let mut out = self.nodes.clone();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolHypergraph {
    nodes: BTreeMap<NodeId, HGNode>,
    edges: BTreeMap<EdgeId, Hyperedge>,
    next_node: NodeId,
    next_edge: EdgeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl Default for MolHypergraph {
    fn default() -> Self {
        MolHypergraph::new()
    }
}

/// Lifts a molecule: one node per atom (ids follow atom indices), one ring
/// hyperedge per SSSR ring and one bond hyperedge per non-ring bond.
pub fn build_hypergraph(g: &MolGraph) -> MolHypergraph {
    let mut h = MolHypergraph::new();
    for atom in g.atoms() {
        h.add_node(HGNode::Terminal(*atom));
    }
    let rings = sssr(g);
    let mut in_ring = vec![false; g.bond_count()];
    let mut ring_edges = Vec::new();
    for ring in &rings {
        let orders: Vec<BondOrder> = (0..ring.len())
            .map(|k| {
                let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
                let (bi, bond) = g
                    .neighbors(a)
                    .iter()
                    .find(|&&(n, _)| n == b)
                    .map(|&(_, bi)| (bi, g.bonds()[bi]))
                    .expect("ring atoms are bonded");
                in_ring[bi] = true;
                bond.order
            })
            .collect();
        ring_edges.push(Hyperedge {
            nodes: ring.clone(),
            label: EdgeLabel::ring(orders),
        });
    }
    for (bi, bond) in g.bonds().iter().enumerate() {
        if !in_ring[bi] {
            h.add_edge(Hyperedge {
                nodes: vec![bond.a, bond.b],
                label: EdgeLabel::Bond(bond.order),
            });
        }
    }
    for e in ring_edges {
        h.add_edge(e);
    }
    h
}

impl MolHypergraph {
    pub fn new() -> Self {
        MolHypergraph {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            next_node: 0,
            next_edge: 0,
            origin: None,
        }
    }

    /// A hypergraph holding one non-terminal node: the start symbol.
    pub fn start_symbol() -> (Self, NodeId) {
        let mut h = MolHypergraph::new();
        let id = h.add_node(HGNode::NonTerminal);
        (h, id)
    }

    pub fn add_node(&mut self, node: HGNode) -> NodeId {
        let id = self.next_node;
        self.next_node += 1;
        self.nodes.insert(id, node);
        id
    }

    pub fn add_edge(&mut self, edge: Hyperedge) -> EdgeId {
        debug_assert!(edge.nodes.iter().all(|n| self.nodes.contains_key(n)));
        let id = self.next_edge;
        self.next_edge += 1;
        self.edges.insert(id, edge);
        id
    }

    pub(crate) fn remove_node(&mut self, id: NodeId) -> Option<HGNode> {
        self.nodes.remove(&id)
    }

    pub(crate) fn remove_edge(&mut self, id: EdgeId) -> Option<Hyperedge> {
        self.edges.remove(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&HGNode> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Hyperedge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &HGNode)> {
        self.nodes.iter().map(|(&id, n)| (id, n))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Hyperedge)> {
        self.edges.iter().map(|(&id, e)| (id, e))
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn edge_ids(&self) -> Vec<EdgeId> {
        self.edges.keys().copied().collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Ids of edges touching `node`, ascending.
    pub fn incident_edges(&self, node: NodeId) -> Vec<EdgeId> {
        self.edges
            .iter()
            .filter(|(_, e)| e.contains(node))
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn nonterminals(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, n)| !n.is_terminal())
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn is_terminal_only(&self) -> bool {
        self.nodes.values().all(HGNode::is_terminal)
    }

    pub fn is_connected(&self) -> bool {
        let Some(&first) = self.nodes.keys().next() else {
            return true;
        };
        self.reachable(first, &self.node_ids().into_iter().collect(), &self.edge_ids())
            .len()
            == self.nodes.len()
    }

    /// Nodes reachable from `start` inside `within`, following the given edges
    /// restricted to `within`.
    fn reachable(
        &self,
        start: NodeId,
        within: &BTreeSet<NodeId>,
        edges: &[EdgeId],
    ) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &e in edges {
                let edge = &self.edges[&e];
                if !edge.contains(v) {
                    continue;
                }
                for &w in &edge.nodes {
                    if within.contains(&w) && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        seen
    }

    /// Edges whose every position lies in `component`.
    pub fn internal_edges(&self, component: &BTreeSet<NodeId>) -> Vec<EdgeId> {
        self.edges
            .iter()
            .filter(|(_, e)| e.nodes.iter().all(|n| component.contains(n)))
            .map(|(&id, _)| id)
            .collect()
    }

    /// Edges with some but not all positions in `component`.
    pub fn straddling_edges(&self, component: &BTreeSet<NodeId>) -> Vec<EdgeId> {
        self.edges
            .iter()
            .filter(|(_, e)| {
                let inside = e.nodes.iter().filter(|n| component.contains(n)).count();
                inside > 0 && inside < e.nodes.len()
            })
            .map(|(&id, _)| id)
            .collect()
    }

    /// Checks that `component` can be contracted: non-empty, existing nodes,
    /// connected through its internal edges, and a single node only when it
    /// is the whole hypergraph.
    pub fn validate_component(&self, component: &BTreeSet<NodeId>) -> Result<(), HypergraphError> {
        let Some(&first) = component.iter().next() else {
            return Err(HypergraphError::InvalidComponent("empty node set".into()));
        };
        if let Some(n) = component.iter().find(|n| !self.nodes.contains_key(n)) {
            return Err(HypergraphError::InvalidComponent(format!("unknown node {n}")));
        }
        if component.len() == 1 && self.nodes.len() > 1 {
            return Err(HypergraphError::InvalidComponent(
                "a single node can only be contracted when it is the whole graph".into(),
            ));
        }
        let internal = self.internal_edges(component);
        if self.reachable(first, component, &internal).len() != component.len() {
            return Err(HypergraphError::InvalidComponent(
                "node set is not connected by its internal edges".into(),
            ));
        }
        Ok(())
    }

    /// Replaces `component` by a fresh non-terminal. Internal edges are
    /// dropped; straddling edges keep their ids and position order with the
    /// non-terminal substituted at every contracted position.
    pub fn contract(
        &self,
        component: &BTreeSet<NodeId>,
    ) -> Result<(MolHypergraph, NodeId), HypergraphError> {
        self.validate_component(component)?;
        let mut h = self.clone();
        for e in self.internal_edges(component) {
            h.edges.remove(&e);
        }
        for n in component {
            h.nodes.remove(n);
        }
        let nt = h.add_node(HGNode::NonTerminal);
        for e in self.straddling_edges(component) {
            let edge = h.edges.get_mut(&e).unwrap();
            for n in edge.nodes.iter_mut() {
                if component.contains(n) {
                    *n = nt;
                }
            }
        }
        Ok((h, nt))
    }

    /// Expands ring edges into bonds and returns the molecule. Atoms follow
    /// ascending node id.
    pub fn to_molecule(&self) -> Result<MolGraph, HypergraphError> {
        if !self.is_terminal_only() {
            return Err(HypergraphError::NonTerminalPresent);
        }
        let index: BTreeMap<NodeId, usize> =
            self.nodes.keys().enumerate().map(|(i, &id)| (id, i)).collect();
        let atoms: Vec<Atom> = self.nodes.values().map(|n| *n.atom().unwrap()).collect();
        let mut bonds: BTreeMap<(usize, usize), BondOrder> = BTreeMap::new();
        let mut add = |a: NodeId, b: NodeId, order: BondOrder| -> Result<(), HypergraphError> {
            let (x, y) = (index[&a], index[&b]);
            if x == y {
                return Err(MolError::InvalidGraph(format!("self-bond at node {a}")).into());
            }
            let key = (x.min(y), x.max(y));
            match bonds.insert(key, order) {
                Some(prev) if prev != order => Err(MolError::InvalidGraph(format!(
                    "conflicting bond orders between nodes {a} and {b}"
                ))
                .into()),
                _ => Ok(()),
            }
        };
        for edge in self.edges.values() {
            match &edge.label {
                EdgeLabel::Bond(order) => add(edge.nodes[0], edge.nodes[1], *order)?,
                EdgeLabel::Ring { orders, .. } => {
                    let k = edge.nodes.len();
                    for (i, &order) in orders.iter().enumerate() {
                        add(edge.nodes[i], edge.nodes[(i + 1) % k], order)?;
                    }
                }
            }
        }
        let bonds = bonds
            .into_iter()
            .map(|((a, b), order)| Bond::new(a, b, order))
            .collect();
        Ok(MolGraph::new(atoms, bonds)?)
    }

    /// A copy with node ids renamed through `map`; edge ids are unchanged.
    pub fn relabeled(&self, map: &BTreeMap<NodeId, NodeId>) -> MolHypergraph {
        let nodes: BTreeMap<NodeId, HGNode> =
            self.nodes.iter().map(|(id, n)| (map[id], *n)).collect();
        let edges = self
            .edges
            .iter()
            .map(|(&id, e)| {
                (
                    id,
                    Hyperedge {
                        nodes: e.nodes.iter().map(|n| map[n]).collect(),
                        label: e.label.clone(),
                    },
                )
            })
            .collect();
        MolHypergraph {
            next_node: nodes.keys().max().map_or(0, |m| m + 1),
            nodes,
            edges,
            next_edge: self.next_edge,
            origin: self.origin.clone(),
        }
    }

    /// Text dump: one `id kind label` line per node, then one
    /// `id arity label node-list` line per edge.
    pub fn dump(&self) -> String {
        let mut out = format!("# {} nodes, {} edges\n", self.nodes.len(), self.edges.len());
        for (id, node) in &self.nodes {
            match node {
                HGNode::Terminal(a) => {
                    let mut label = if a.aromatic {
                        a.element.symbol().to_lowercase()
                    } else {
                        a.element.symbol().to_string()
                    };
                    if a.charge != 0 {
                        let _ = write!(label, "{:+}", a.charge);
                    }
                    if let Some(h) = a.explicit_h {
                        let _ = write!(label, " H{h}");
                    }
                    let _ = writeln!(out, "node {id} terminal {label}");
                }
                HGNode::NonTerminal => {
                    let _ = writeln!(out, "node {id} nonterminal R*");
                }
            }
        }
        for (id, edge) in &self.edges {
            let nodes: Vec<String> = edge.nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                out,
                "edge {id} {} {} {}",
                edge.arity(),
                label_text(&edge.label),
                nodes.join(",")
            );
        }
        out
    }
}

/// Compact label text: `bond:=`, `ring6:-=-=-=` or `ring6:aromatic`.
pub fn label_text(label: &EdgeLabel) -> String {
    match label {
        EdgeLabel::Bond(o) => format!("bond:{}", o.smiles_symbol()),
        EdgeLabel::Ring { orders, aromatic } => {
            if *aromatic {
                format!("ring{}:aromatic", orders.len())
            } else {
                let s: String = orders.iter().map(|o| o.smiles_symbol()).collect();
                format!("ring{}:{s}", orders.len())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn hg(s: &str) -> MolHypergraph {
        build_hypergraph(&parse_smiles(s).unwrap())
    }

    #[test]
    fn benzene_is_one_ring_edge() {
        let h = hg("c1ccccc1");
        assert_eq!(h.node_count(), 6);
        assert_eq!(h.edge_count(), 1);
        let (_, e) = h.edges().next().unwrap();
        assert_eq!(e.arity(), 6);
        assert!(matches!(e.label, EdgeLabel::Ring { aromatic: true, .. }));
    }

    #[test]
    fn naphthalene_two_rings_share_two_nodes() {
        let h = hg("c1ccc2ccccc2c1");
        assert_eq!(h.node_count(), 10);
        let edges: Vec<&Hyperedge> = h.edges().map(|(_, e)| e).collect();
        assert_eq!(edges.len(), 2);
        assert!(edges.iter().all(|e| e.arity() == 6));
        let shared = edges[0].nodes.iter().filter(|n| edges[1].contains(**n)).count();
        assert_eq!(shared, 2);
    }

    #[test]
    fn contract_middle_of_ethylene_glycol() {
        let h = hg("OCCO");
        let (c, nt) = h.contract(&BTreeSet::from([1, 2])).unwrap();
        assert_eq!(c.node_count(), 3);
        assert_eq!(c.edge_count(), 2);
        assert!(c.edges().all(|(_, e)| e.contains(nt) && e.arity() == 2));
        let (all, _) = h.contract(&BTreeSet::from([0, 1, 2, 3])).unwrap();
        assert_eq!(all.node_count(), 1);
        assert_eq!(all.edge_count(), 0);
    }

    #[test]
    fn contract_one_naphthalene_ring() {
        let h = hg("c1ccc2ccccc2c1");
        let (first, _) = h.edges().next().unwrap();
        let ring: BTreeSet<NodeId> = h.edge(first).unwrap().nodes.iter().copied().collect();
        let (c, nt) = h.contract(&ring).unwrap();
        assert_eq!(c.node_count(), 5);
        assert_eq!(c.edge_count(), 1);
        let (_, e) = c.edges().next().unwrap();
        assert_eq!(e.arity(), 6);
        assert_eq!(e.distinct_nodes().len(), 5);
        assert_eq!(e.nodes.iter().filter(|&&n| n == nt).count(), 2);
    }

    #[test]
    fn invalid_components() {
        let h = hg("OCCO");
        assert!(h.contract(&BTreeSet::new()).is_err());
        assert!(h.contract(&BTreeSet::from([0, 3])).is_err());
        assert!(h.contract(&BTreeSet::from([1])).is_err());
        assert!(h.contract(&BTreeSet::from([9, 1])).is_err());
    }

    #[test]
    fn to_molecule_round_trips_and_rejects_nonterminals() {
        for s in ["OCCO", "c1ccc2ccccc2c1", "C1CC2CCC1C2", "O=C=NC1=CC=CC=C1"] {
            let g = parse_smiles(s).unwrap();
            let back = build_hypergraph(&g).to_molecule().unwrap();
            assert_eq!(back.canonical_key(), g.canonical_key(), "{s}");
        }
        let (h, _) = MolHypergraph::start_symbol();
        assert_eq!(h.to_molecule().unwrap_err(), HypergraphError::NonTerminalPresent);
        let mut m = MolHypergraph::new();
        m.add_node(HGNode::Terminal(Atom::new(crate::molgraph::Element::C)));
        assert_eq!(m.to_molecule().unwrap().hydrogens(0), 4);
    }

    #[test]
    fn dump_format() {
        let d = hg("OCCO").dump();
        assert!(d.starts_with("# 3 nodes, 3 edges\n") || d.starts_with("# 4 nodes, 3 edges\n"));
        assert_eq!(d.lines().filter(|l| l.starts_with("edge")).count(), 3);
        assert!(d.contains("edge 0 2 bond:- 0,1"));
    }
}
