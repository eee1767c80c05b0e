//! Monomer-class membership patterns.

use std::sync::OnceLock;

use crate::molgraph::{
    builtin_dataset, BondOrder, Element, MolGraph, QueryAtom, QueryBond, QueryGraph,
};

use super::MetricError;

/// Ids accepted by [`MembershipPattern::builtin`].
pub const PATTERN_IDS: [&str; 3] = ["isocyanate", "acrylate", "chain_extender"];

#[derive(Debug, Clone, PartialEq)]
enum Test {
    Contains(QueryGraph),
    ChainExtender,
}

/// A class test: contains a motif, or a predicate over counted groups.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipPattern {
    pub id: String,
    test: Test,
}

fn isocyanate() -> QueryGraph {
    QueryGraph::from_smiles("N=C=O").expect("valid query")
}

/// C=C-C(=O)-O, the ester oxygen carrying anything.
fn acrylate() -> QueryGraph {
    QueryGraph::from_smiles("C=CC(=O)O").expect("valid query")
}

fn is_carbonyl_carbon(g: &MolGraph, i: usize) -> bool {
    g.atom(i).element == Element::C
        && g.neighbors(i).iter().any(|&(n, b)| {
            g.atom(n).element == Element::O && g.bonds()[b].order == BondOrder::Double
        })
}

/// Hydroxyl and amine groups with a reactive hydrogen: an O-H on a single
/// heavy neighbor, or a non-aromatic N-H, in both cases not attached to a
/// carbonyl carbon (acids, amides and ureas do not count).
pub fn active_hydrogen_groups(g: &MolGraph) -> usize {
    let hydroxyl = QueryGraph {
        atoms: vec![
            QueryAtom {
                min_h: 1,
                degree: Some(1),
                ..QueryAtom::element(Element::O)
            },
            QueryAtom::default(),
        ],
        bonds: vec![QueryBond {
            a: 0,
            b: 1,
            order: Some(BondOrder::Single),
        }],
    };
    let mut count = 0;
    for m in hydroxyl.find_all(g) {
        if !is_carbonyl_carbon(g, m[1]) {
            count += 1;
        }
    }
    for i in 0..g.atom_count() {
        let atom = g.atom(i);
        if atom.element == Element::N
            && !atom.aromatic
            && g.hydrogens(i) >= 1
            && !g.neighbors(i).iter().any(|&(n, _)| is_carbonyl_carbon(g, n))
        {
            count += 1;
        }
    }
    count
}

impl MembershipPattern {
    /// A bundled pattern. The first call checks every bundled pattern
    /// against its full class dataset.
    pub fn builtin(id: &str) -> Result<MembershipPattern, MetricError> {
        if !PATTERN_IDS.contains(&id) {
            return Err(MetricError::UnknownPattern {
                id: id.to_string(),
                available: PATTERN_IDS.iter().map(|s| s.to_string()).collect(),
            });
        }
        static CHECKED: OnceLock<()> = OnceLock::new();
        CHECKED.get_or_init(|| {
            for (pid, did) in PATTERN_IDS.iter().zip(["isocyanates", "acrylates", "chain_extenders"]) {
                let p = MembershipPattern::unchecked(pid);
                let d = builtin_dataset(did).expect("bundled dataset");
                assert!(
                    d.records.iter().all(|r| p.matches(&r.mol)),
                    "pattern {pid} must match all of {did}"
                );
            }
        });
        Ok(MembershipPattern::unchecked(id))
    }

    fn unchecked(id: &str) -> MembershipPattern {
        let test = match id {
            "isocyanate" => Test::Contains(isocyanate()),
            "acrylate" => Test::Contains(acrylate()),
            _ => Test::ChainExtender,
        };
        MembershipPattern {
            id: id.to_string(),
            test,
        }
    }

    /// The pattern for a bundled dataset id (`isocyanates` -> `isocyanate`).
    pub fn for_dataset(dataset: &str) -> Option<MembershipPattern> {
        let id = match dataset {
            "isocyanates" => "isocyanate",
            "acrylates" => "acrylate",
            "chain_extenders" => "chain_extender",
            _ => return None,
        };
        MembershipPattern::builtin(id).ok()
    }

    pub fn matches(&self, g: &MolGraph) -> bool {
        match &self.test {
            Test::Contains(q) => q.is_match(g),
            Test::ChainExtender => {
                active_hydrogen_groups(g) == 2 && !isocyanate().is_match(g) && !acrylate().is_match(g)
            }
        }
    }
}
