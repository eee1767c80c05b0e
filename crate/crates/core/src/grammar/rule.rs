//! Production rules extracted from contraction steps, in canonical form.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GrammarError;
use crate::canon::canonicalize;
use crate::hypergraph::{EdgeLabel, HGNode, MolHypergraph, NodeId};
use crate::molgraph::{Atom, BondOrder, Element};

/// What an anchor slot requires of the node it binds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeSig {
    Terminal { element: Element, charge: i8 },
    NonTerminal,
}

impl NodeSig {
    pub fn of(node: &HGNode) -> NodeSig {
        match node {
            HGNode::Terminal(a) => NodeSig::Terminal {
                element: a.element,
                charge: a.charge,
            },
            HGNode::NonTerminal => NodeSig::NonTerminal,
        }
    }
}

/// A node on the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleNode {
    /// Shared with the left-hand side; kept as is when the rule is applied.
    Anchor { sig: NodeSig },
    /// A new terminal atom.
    Atom(Atom),
    /// A new non-terminal.
    NonTerminal,
}

impl RuleNode {
    pub fn is_anchor(&self) -> bool {
        matches!(self, RuleNode::Anchor { .. })
    }
}

/// A right-hand-side hyperedge; `nodes` index into the rule's node list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleEdge {
    pub nodes: Vec<usize>,
    pub label: EdgeLabel,
}

/// A left-hand-side edge: each position is either the non-terminal being
/// rewritten (`None`) or an anchor slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LhsEdge {
    pub positions: Vec<Option<usize>>,
    pub label: EdgeLabel,
}

/// `LHS -> RHS`. The first `anchor_count()` nodes are anchors; the rest are
/// internal. The left-hand side is implied: the non-terminal plus anchors,
/// joined by every right-hand-side edge that touches an anchor, with internal
/// positions collapsed onto the non-terminal. Initial rules have no anchors
/// and rewrite the start symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionRule {
    pub initial: bool,
    pub nodes: Vec<RuleNode>,
    pub edges: Vec<RuleEdge>,
    #[serde(default)]
    pub count: usize,
}

/// Where a rule's nodes sat in the hypergraph it was extracted from; indexed
/// like `ProductionRule::nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleEmbedding {
    pub node_ids: Vec<NodeId>,
}

impl ProductionRule {
    pub fn anchor_count(&self) -> usize {
        self.nodes.iter().take_while(|n| n.is_anchor()).count()
    }

    pub fn anchors(&self) -> Vec<NodeSig> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                RuleNode::Anchor { sig } => Some(*sig),
                _ => None,
            })
            .collect()
    }

    /// Internal nodes in rule order.
    pub fn internals(&self) -> &[RuleNode] {
        &self.nodes[self.anchor_count()..]
    }

    /// True when the right-hand side introduces no non-terminal.
    pub fn terminal_only(&self) -> bool {
        !self.internals().iter().any(|n| matches!(n, RuleNode::NonTerminal))
    }

    /// The left-hand-side edges, in right-hand-side edge order.
    pub fn lhs_edges(&self) -> Vec<LhsEdge> {
        let k = self.anchor_count();
        self.edges
            .iter()
            .filter(|e| e.nodes.iter().any(|&n| n < k))
            .map(|e| LhsEdge {
                positions: e.nodes.iter().map(|&n| (n < k).then_some(n)).collect(),
                label: e.label.clone(),
            })
            .collect()
    }

    /// Structural checks for rules read from files.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let k = self.anchor_count();
        let corrupt = |msg: String| Err(GrammarError::Corrupt(msg));
        if self.nodes[k..].iter().any(RuleNode::is_anchor) {
            return corrupt("anchors must precede internal nodes".into());
        }
        if self.nodes.len() == k {
            return corrupt("rule has no internal nodes".into());
        }
        if self.initial && k > 0 {
            return corrupt("initial rule with anchors".into());
        }
        if !self.initial && k == 0 {
            return corrupt("non-initial rule without anchors".into());
        }
        let mut touched = vec![false; self.nodes.len()];
        for e in &self.edges {
            if e.nodes.iter().any(|&n| n >= self.nodes.len()) {
                return corrupt("edge references a missing node".into());
            }
            match &e.label {
                EdgeLabel::Bond(_) if e.nodes.len() != 2 || e.nodes[0] == e.nodes[1] => {
                    return corrupt("bond edge must join two distinct nodes".into());
                }
                EdgeLabel::Ring { orders, .. } if orders.len() != e.nodes.len() || orders.len() < 3 => {
                    return corrupt("ring label length must equal its arity".into());
                }
                _ => {}
            }
            if e.nodes.iter().all(|&n| n < k) {
                return corrupt("edge joins anchors only".into());
            }
            for &n in &e.nodes {
                touched[n] = true;
            }
        }
        if k > 0 && touched[..k].iter().any(|t| !t) {
            return corrupt("anchor without a connecting edge".into());
        }
        Ok(())
    }
}

/// Builds the rule for contracting `component` in `h`, plus where each rule
/// node came from. The component must pass
/// [`MolHypergraph::validate_component`]; the rule is initial exactly when
/// the component is the whole hypergraph.
pub fn make_rule(
    h: &MolHypergraph,
    component: &BTreeSet<NodeId>,
) -> Result<(ProductionRule, RuleEmbedding), GrammarError> {
    h.validate_component(component)?;
    let internal = h.internal_edges(component);
    let straddling = h.straddling_edges(component);
    let anchors: BTreeSet<NodeId> = straddling
        .iter()
        .flat_map(|&e| h.edge(e).unwrap().nodes.iter().copied())
        .filter(|n| !component.contains(n))
        .collect();

    let mut node_ids: Vec<NodeId> = anchors.iter().copied().collect();
    node_ids.extend(component.iter().copied());
    let mut nodes: Vec<RuleNode> = anchors
        .iter()
        .map(|&a| RuleNode::Anchor {
            sig: NodeSig::of(h.node(a).unwrap()),
        })
        .collect();
    for &c in component {
        nodes.push(match h.node(c).unwrap() {
            HGNode::Terminal(atom) => RuleNode::Atom(*atom),
            HGNode::NonTerminal => RuleNode::NonTerminal,
        });
    }
    let index = |id: NodeId| node_ids.iter().position(|&n| n == id).unwrap();
    let mut edge_ids = internal;
    edge_ids.extend(straddling);
    edge_ids.sort_unstable();
    let edges: Vec<RuleEdge> = edge_ids
        .iter()
        .map(|&e| {
            let edge = h.edge(e).unwrap();
            RuleEdge {
                nodes: edge.nodes.iter().map(|&n| index(n)).collect(),
                label: edge.label.clone(),
            }
        })
        .collect();
    let raw = ProductionRule {
        initial: component.len() == h.node_count(),
        nodes,
        edges,
        count: 0,
    };
    let (rule, order) = canonical_form(&raw);
    let node_ids = order.iter().map(|&old| node_ids[old]).collect();
    Ok((rule, RuleEmbedding { node_ids }))
}

/// Canonical key: equal exactly when two rules are isomorphic as anchored
/// graphs (same initial flag, anchor signatures, internal labels and edges).
pub fn rule_key(rule: &ProductionRule) -> String {
    let (canon, _) = canonical_form(rule);
    serde_json::to_string(&(canon.initial, &canon.nodes, &canon.edges))
        .expect("rules serialize")
}

fn node_label(node: &RuleNode) -> String {
    match node {
        RuleNode::Anchor { sig } => match sig {
            NodeSig::Terminal { element, charge } => {
                format!("A:T:{:03}:{charge}", element.atomic_number())
            }
            NodeSig::NonTerminal => "A:N".to_string(),
        },
        RuleNode::NonTerminal => "N".to_string(),
        RuleNode::Atom(a) => format!(
            "T:{:03}:{}:{}:{}",
            a.element.atomic_number(),
            a.charge,
            a.aromatic as u8,
            a.explicit_h.map_or(-1, i32::from)
        ),
    }
}

const MEMBER: u32 = 10;
const CENTER: u32 = 11;
const RING_BOND: u32 = 20;

/// Returns the canonically ordered rule and, for each new node index, the
/// old index it came from. Ring edges are rotated and reflected into a
/// canonical orientation and edges are sorted, so isomorphic rules come out
/// identical.
pub fn canonical_form(rule: &ProductionRule) -> (ProductionRule, Vec<usize>) {
    let n = rule.nodes.len();
    let mut labels: Vec<String> = rule.nodes.iter().map(node_label).collect();
    let mut edges: Vec<(usize, usize, u32)> = Vec::new();
    // Position vertices of each ring edge, for orientation afterwards.
    let mut ring_positions: Vec<Vec<usize>> = Vec::new();
    for e in &rule.edges {
        match &e.label {
            EdgeLabel::Bond(order) => {
                edges.push((e.nodes[0], e.nodes[1], order.code() as u32));
                ring_positions.push(Vec::new());
            }
            EdgeLabel::Ring { orders, aromatic } => {
                let k = e.nodes.len();
                let center = labels.len();
                labels.push(format!("R:{k}:{}", *aromatic as u8));
                let first = labels.len();
                let positions: Vec<usize> = (first..first + k).collect();
                for (j, &node) in e.nodes.iter().enumerate() {
                    labels.push("P".to_string());
                    edges.push((positions[j], node, MEMBER));
                    edges.push((positions[j], center, CENTER));
                    edges.push((
                        positions[j],
                        positions[(j + 1) % k],
                        RING_BOND + orders[j].code() as u32,
                    ));
                }
                ring_positions.push(positions);
            }
        }
    }
    let ranks = canonicalize(&labels, &edges).ranks();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);
    let mut new_index = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let nodes = order.iter().map(|&old| rule.nodes[old]).collect();
    let mut new_edges: Vec<RuleEdge> = rule
        .edges
        .iter()
        .zip(&ring_positions)
        .map(|(e, positions)| match &e.label {
            EdgeLabel::Bond(o) => {
                let (a, b) = (new_index[e.nodes[0]], new_index[e.nodes[1]]);
                RuleEdge {
                    nodes: vec![a.min(b), a.max(b)],
                    label: EdgeLabel::Bond(*o),
                }
            }
            EdgeLabel::Ring { orders, aromatic } => {
                let k = positions.len();
                let s = (0..k).min_by_key(|&j| ranks[positions[j]]).unwrap();
                let forward =
                    ranks[positions[(s + 1) % k]] < ranks[positions[(s + k - 1) % k]];
                let (idx, ord): (Vec<usize>, Vec<BondOrder>) = (0..k)
                    .map(|j| {
                        if forward {
                            ((s + j) % k, orders[(s + j) % k])
                        } else {
                            ((s + k - j) % k, orders[(s + 2 * k - j - 1) % k])
                        }
                    })
                    .unzip();
                RuleEdge {
                    nodes: idx.iter().map(|&i| new_index[e.nodes[i]]).collect(),
                    label: EdgeLabel::Ring {
                        orders: ord,
                        aromatic: *aromatic,
                    },
                }
            }
        })
        .collect();
    new_edges.sort();
    (
        ProductionRule {
            initial: rule.initial,
            nodes,
            edges: new_edges,
            count: rule.count,
        },
        order,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;
    use crate::molgraph::parse_smiles;

    fn hg(s: &str) -> MolHypergraph {
        build_hypergraph(&parse_smiles(s).unwrap())
    }

    #[test]
    fn middle_of_ethylene_glycol() {
        let h = hg("OCCO");
        let (rule, emb) = make_rule(&h, &BTreeSet::from([1, 2])).unwrap();
        assert!(!rule.initial);
        assert_eq!(rule.anchor_count(), 2);
        let o = NodeSig::Terminal {
            element: Element::O,
            charge: 0,
        };
        assert_eq!(rule.anchors(), vec![o, o]);
        assert_eq!(rule.edges.len(), 3);
        assert_eq!(rule.lhs_edges().len(), 2);
        assert!(rule.terminal_only());
        let mut anchors = emb.node_ids[..2].to_vec();
        anchors.sort();
        assert_eq!(anchors, vec![0, 3]);
        rule.validate().unwrap();
    }

    #[test]
    fn full_contraction_is_initial() {
        let h = hg("OCCO");
        let (rule, _) = make_rule(&h, &BTreeSet::from([0, 1, 2, 3])).unwrap();
        assert!(rule.initial);
        assert_eq!(rule.anchor_count(), 0);
        assert!(rule.lhs_edges().is_empty());

        let h = hg("C1CCCCC1");
        let (rule, _) = make_rule(&h, &h.node_ids().into_iter().collect()).unwrap();
        assert!(rule.initial);
        assert_eq!(rule.edges.len(), 1);
        assert_eq!(rule.edges[0].nodes.len(), 6);
    }

    #[test]
    fn keys_ignore_node_numbering() {
        let a = hg("OCCO");
        let (ra, _) = make_rule(&a, &BTreeSet::from([1, 2])).unwrap();
        let b = hg("C(O)CO");
        // C(O)CO numbers atoms C0 O1 C2 O3; the carbons are 0 and 2.
        let (rb, _) = make_rule(&b, &BTreeSet::from([0, 2])).unwrap();
        assert_eq!(rule_key(&ra), rule_key(&rb));
        assert_eq!(ra, rb);
    }

    #[test]
    fn bond_order_changes_key() {
        let a = hg("CCCC");
        let b = hg("CC=CC");
        let (ra, _) = make_rule(&a, &BTreeSet::from([1, 2])).unwrap();
        let (rb, _) = make_rule(&b, &BTreeSet::from([1, 2])).unwrap();
        assert_ne!(rule_key(&ra), rule_key(&rb));
    }

    #[test]
    fn ring_orientation_is_canonical() {
        let a = hg("C1=CC=CC=C1N");
        let b = hg("NC1C=CC=CC=1");
        let all = |h: &MolHypergraph| h.node_ids().into_iter().collect::<BTreeSet<_>>();
        let (ra, _) = make_rule(&a, &all(&a)).unwrap();
        let (rb, _) = make_rule(&b, &all(&b)).unwrap();
        assert_eq!(ra, rb);
        // The canonical form is a fixed point.
        assert_eq!(canonical_form(&ra).0, ra);
    }

    #[test]
    fn straddling_ring_rule() {
        let h = hg("c1ccc2ccccc2c1");
        let (first, _) = h.edges().next().unwrap();
        let ring: BTreeSet<NodeId> = h.edge(first).unwrap().nodes.iter().copied().collect();
        let (rule, _) = make_rule(&h, &ring).unwrap();
        assert_eq!(rule.anchor_count(), 4);
        let lhs = rule.lhs_edges();
        assert_eq!(lhs.len(), 1);
        assert_eq!(lhs[0].positions.iter().filter(|p| p.is_none()).count(), 2);
    }
}
