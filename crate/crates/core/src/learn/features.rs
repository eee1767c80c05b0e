//! Hand-crafted hyperedge features.
//!
//! Layout before padding or clipping to the requested width:
//!
//! | block | width |
//! |---|---|
//! | node features summed over the edge's distinct nodes | 16 |
//! | edge label: order fractions, ring flag, arity, ring size bucket | 11 |
//! | element counts within two hops, `ln(1 + n)` | 13 |
//! | non-terminal count, internalized ring positions | 2 |
//! | labels of edges sharing a node | 5 |
//!
//! The vector is scaled to unit length after padding or clipping.

use std::collections::{BTreeMap, BTreeSet};

use super::LearnError;
use crate::hypergraph::{EdgeId, EdgeLabel, HGNode, MolHypergraph, NodeId};
use crate::molgraph::{BondOrder, Element};

/// Default feature width.
pub const FEATURE_DIM: usize = 64;

/// Width of the unpadded layout.
pub const RAW_DIM: usize = 47;

const KINDS: usize = 13;

fn kind(node: &HGNode) -> usize {
    match node {
        // Element::ALL has 12 entries; slot 12 is the non-terminal.
        HGNode::Terminal(a) => Element::ALL.iter().position(|&e| e == a.element).unwrap(),
        HGNode::NonTerminal => KINDS - 1,
    }
}

fn order_slot(o: BondOrder) -> usize {
    match o {
        BondOrder::Single => 0,
        BondOrder::Double => 1,
        BondOrder::Triple => 2,
        BondOrder::Aromatic => 3,
    }
}

/// Distinct neighbours of each node through any hyperedge.
fn adjacency(h: &MolHypergraph) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = h.node_ids().into_iter().map(|n| (n, BTreeSet::new())).collect();
    for (_, e) in h.edges() {
        let nodes = e.distinct_nodes();
        for &a in &nodes {
            for &b in &nodes {
                if a != b {
                    adj.get_mut(&a).unwrap().insert(b);
                }
            }
        }
    }
    adj
}

/// Features of every edge, keyed by edge id.
pub fn featurize_all(h: &MolHypergraph, dim: usize) -> BTreeMap<EdgeId, Vec<f64>> {
    let adj = adjacency(h);
    let in_ring: BTreeSet<NodeId> = h
        .edges()
        .filter(|(_, e)| matches!(e.label, EdgeLabel::Ring { .. }))
        .flat_map(|(_, e)| e.nodes.iter().copied())
        .collect();
    let incident: BTreeMap<NodeId, Vec<EdgeId>> = h
        .node_ids()
        .into_iter()
        .map(|n| (n, h.incident_edges(n)))
        .collect();
    h.edge_ids()
        .into_iter()
        .map(|id| (id, edge_features(h, id, &adj, &in_ring, &incident, dim)))
        .collect()
}

/// Features of one edge.
pub fn featurize(h: &MolHypergraph, e: EdgeId, dim: usize) -> Result<Vec<f64>, LearnError> {
    featurize_all(h, dim)
        .remove(&e)
        .ok_or(LearnError::UnknownEdge(e))
}

fn edge_features(
    h: &MolHypergraph,
    id: EdgeId,
    adj: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    in_ring: &BTreeSet<NodeId>,
    incident: &BTreeMap<NodeId, Vec<EdgeId>>,
    dim: usize,
) -> Vec<f64> {
    let edge = h.edge(id).unwrap();
    let nodes = edge.distinct_nodes();
    let mut f = Vec::with_capacity(RAW_DIM.max(dim));

    let mut node_block = [0.0; 16];
    for &n in &nodes {
        let node = h.node(n).unwrap();
        node_block[kind(node)] += 1.0;
        node_block[13] += adj[&n].len() as f64;
        node_block[14] += f64::from(u8::from(node.atom().is_some_and(|a| a.aromatic)));
        node_block[15] += f64::from(u8::from(in_ring.contains(&n)));
    }
    f.extend_from_slice(&node_block);

    let mut label_block = [0.0; 11];
    match &edge.label {
        EdgeLabel::Bond(o) => label_block[order_slot(*o)] = 1.0,
        EdgeLabel::Ring { orders, .. } => {
            let mut counts = [0usize; 4];
            for &o in orders {
                counts[order_slot(o)] += 1;
            }
            for (slot, c) in counts.iter().enumerate() {
                label_block[slot] = *c as f64 / orders.len() as f64;
            }
            label_block[4] = 1.0;
            label_block[6 + (orders.len().clamp(3, 7) - 3)] = 1.0;
        }
    }
    label_block[5] = edge.arity() as f64;
    f.extend_from_slice(&label_block);

    let mut seen: BTreeSet<NodeId> = nodes.iter().copied().collect();
    let mut frontier = seen.clone();
    let mut counts = [0usize; KINDS];
    for _ in 0..2 {
        let mut next = BTreeSet::new();
        for n in &frontier {
            for &m in &adj[n] {
                if seen.insert(m) {
                    next.insert(m);
                    counts[kind(h.node(m).unwrap())] += 1;
                }
            }
        }
        frontier = next;
    }
    f.extend(counts.iter().map(|&c| (c as f64).ln_1p()));

    let nts = nodes.iter().filter(|&&n| !h.node(n).unwrap().is_terminal()).count();
    f.push(nts as f64);
    f.push((edge.arity() - nodes.len()) as f64);

    let mut around = [0.0; 5];
    let neighbours: BTreeSet<EdgeId> = nodes
        .iter()
        .flat_map(|n| incident[n].iter().copied())
        .filter(|&other| other != id)
        .collect();
    for other in neighbours {
        match &h.edge(other).unwrap().label {
            EdgeLabel::Bond(o) => around[order_slot(*o)] += 1.0,
            EdgeLabel::Ring { .. } => around[4] += 1.0,
        }
    }
    f.extend_from_slice(&around);

    debug_assert_eq!(f.len(), RAW_DIM);
    f.resize(dim, 0.0);
    // Unit length keeps the potential's response to one optimizer step
    // small regardless of molecule size.
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        f.iter_mut().for_each(|x| *x /= norm);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;
    use crate::molgraph::parse_smiles;

    #[test]
    fn symmetric_edges_match() {
        let h = build_hypergraph(&parse_smiles("OCCO").unwrap());
        let f = featurize_all(&h, FEATURE_DIM);
        let co: Vec<EdgeId> = h
            .edge_ids()
            .into_iter()
            .filter(|&e| {
                h.edge(e).unwrap().nodes.iter().any(|&n| {
                    h.node(n).unwrap().atom().unwrap().element == Element::O
                })
            })
            .collect();
        assert_eq!(co.len(), 2);
        assert_eq!(f[&co[0]], f[&co[1]]);
        let cc = h.edge_ids().into_iter().find(|e| !co.contains(e)).unwrap();
        assert_ne!(f[&cc], f[&co[0]]);
        assert!(f.values().all(|v| v.len() == FEATURE_DIM));
    }

    #[test]
    fn ring_edge_and_width() {
        let h = build_hypergraph(&parse_smiles("c1ccccc1").unwrap());
        let f = featurize(&h, 0, 8).unwrap();
        assert_eq!(f.len(), 8);
        assert!((f.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let full = featurize(&h, 0, RAW_DIM).unwrap();
        let c = Element::ALL.iter().position(|&e| e == Element::C).unwrap();
        let unit = full[c] / 6.0;
        assert!((full[16 + 3] - unit).abs() < 1e-15); // all aromatic
        assert!((full[16 + 4] - unit).abs() < 1e-15); // ring flag
        assert!((full[16 + 5] - 6.0 * unit).abs() < 1e-15); // arity
        assert!((full[16 + 9] - unit).abs() < 1e-15); // six-membered
        assert!(matches!(featurize(&h, 5, 8), Err(LearnError::UnknownEdge(5))));
    }
}
