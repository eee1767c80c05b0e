//! Substructure queries: small labeled patterns matched by backtracking.

use super::{parse_smiles, BondOrder, Element, MolGraph, Result};

/// Constraints on a single matched atom. `None` fields are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryAtom {
    pub element: Option<Element>,
    pub aromatic: Option<bool>,
    pub charge: Option<i8>,
    pub min_h: u8,
    pub max_h: Option<u8>,
    /// Exact heavy-atom degree.
    pub degree: Option<usize>,
}

impl QueryAtom {
    pub fn element(element: Element) -> Self {
        QueryAtom {
            element: Some(element),
            ..QueryAtom::default()
        }
    }

    fn accepts(&self, g: &MolGraph, i: usize) -> bool {
        let atom = g.atom(i);
        let h = g.hydrogens(i);
        self.element.is_none_or(|e| e == atom.element)
            && self.aromatic.is_none_or(|a| a == atom.aromatic)
            && self.charge.is_none_or(|c| c == atom.charge)
            && h >= self.min_h
            && self.max_h.is_none_or(|m| h <= m)
            && self.degree.is_none_or(|d| d == g.degree(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryBond {
    pub a: usize,
    pub b: usize,
    /// Required bond order; `None` matches any.
    pub order: Option<BondOrder>,
}

/// A connected pattern graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryGraph {
    pub atoms: Vec<QueryAtom>,
    pub bonds: Vec<QueryBond>,
}

impl QueryGraph {
    /// A query requiring the elements, aromaticity and bond orders written in
    /// `smiles`; hydrogen counts and charges are left open.
    pub fn from_smiles(smiles: &str) -> Result<QueryGraph> {
        let g = parse_smiles(smiles)?;
        let atoms = g
            .atoms()
            .iter()
            .map(|a| QueryAtom {
                element: Some(a.element),
                aromatic: Some(a.aromatic),
                ..QueryAtom::default()
            })
            .collect();
        let bonds = g
            .bonds()
            .iter()
            .map(|b| QueryBond {
                a: b.a,
                b: b.b,
                order: Some(b.order),
            })
            .collect();
        Ok(QueryGraph { atoms, bonds })
    }

    pub fn is_match(&self, g: &MolGraph) -> bool {
        let mut found = false;
        self.search(g, &mut |_| {
            found = true;
            false
        });
        found
    }

    /// Every embedding, as target atom indices per query atom.
    pub fn find_all(&self, g: &MolGraph) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.search(g, &mut |m| {
            out.push(m.to_vec());
            true
        });
        out
    }

    /// Calls `visit` per embedding until it returns false.
    fn search(&self, g: &MolGraph, visit: &mut dyn FnMut(&[usize]) -> bool) {
        if self.atoms.is_empty() {
            return;
        }
        let order = self.atom_order();
        let mut mapping = vec![usize::MAX; self.atoms.len()];
        let mut used = vec![false; g.atom_count()];
        self.extend(g, &order, 0, &mut mapping, &mut used, visit);
    }

    /// Query atoms in BFS order so each atom after the first has an already
    /// placed neighbor whenever the query is connected.
    fn atom_order(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            let start = (0..n).find(|&i| !placed[i]).unwrap();
            placed[start] = true;
            order.push(start);
            let mut k = order.len() - 1;
            while k < order.len() {
                let v = order[k];
                for bond in &self.bonds {
                    let w = if bond.a == v {
                        bond.b
                    } else if bond.b == v {
                        bond.a
                    } else {
                        continue;
                    };
                    if !placed[w] {
                        placed[w] = true;
                        order.push(w);
                    }
                }
                k += 1;
            }
        }
        order
    }

    fn extend(
        &self,
        g: &MolGraph,
        order: &[usize],
        depth: usize,
        mapping: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if depth == order.len() {
            return visit(mapping);
        }
        let q = order[depth];
        // Candidates: neighbors of an already mapped query neighbor, else all.
        let anchor = self.bonds.iter().find_map(|b| {
            if b.a == q && mapping[b.b] != usize::MAX {
                Some(mapping[b.b])
            } else if b.b == q && mapping[b.a] != usize::MAX {
                Some(mapping[b.a])
            } else {
                None
            }
        });
        let candidates: Vec<usize> = match anchor {
            Some(t) => g.neighbors(t).iter().map(|&(n, _)| n).collect(),
            None => (0..g.atom_count()).collect(),
        };
        for t in candidates {
            if used[t] || !self.atoms[q].accepts(g, t) {
                continue;
            }
            let consistent = self.bonds.iter().all(|b| {
                let other = if b.a == q {
                    b.b
                } else if b.b == q {
                    b.a
                } else {
                    return true;
                };
                if mapping[other] == usize::MAX {
                    return true;
                }
                match g.bond_between(t, mapping[other]) {
                    Some(bond) => b.order.is_none_or(|o| o == bond.order),
                    None => false,
                }
            });
            if !consistent {
                continue;
            }
            mapping[q] = t;
            used[t] = true;
            let go_on = self.extend(g, order, depth + 1, mapping, used, visit);
            mapping[q] = usize::MAX;
            used[t] = false;
            if !go_on {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isocyanate_motif() {
        let q = QueryGraph::from_smiles("N=C=O").unwrap();
        assert!(q.is_match(&parse_smiles("O=C=NCCCCCCN=C=O").unwrap()));
        assert_eq!(q.find_all(&parse_smiles("O=C=NCCCCCCN=C=O").unwrap()).len(), 2);
        assert!(!q.is_match(&parse_smiles("OCCO").unwrap()));
        assert!(!q.is_match(&parse_smiles("O=CNC").unwrap()));
    }

    #[test]
    fn aromatic_bonds_do_not_match_kekule_queries() {
        let q = QueryGraph::from_smiles("C=C").unwrap();
        assert!(!q.is_match(&parse_smiles("c1ccccc1").unwrap()));
        assert!(q.is_match(&parse_smiles("C1=CC=CC=C1").unwrap()));
    }

    #[test]
    fn hydrogen_and_degree_constraints() {
        let hydroxyl = QueryGraph {
            atoms: vec![
                QueryAtom {
                    min_h: 1,
                    degree: Some(1),
                    ..QueryAtom::element(Element::O)
                },
                QueryAtom::element(Element::C),
            ],
            bonds: vec![QueryBond {
                a: 0,
                b: 1,
                order: Some(BondOrder::Single),
            }],
        };
        assert_eq!(hydroxyl.find_all(&parse_smiles("OCCO").unwrap()).len(), 2);
        assert!(!hydroxyl.is_match(&parse_smiles("COC").unwrap()));
    }

    #[test]
    fn ring_closure_in_query() {
        let q = QueryGraph::from_smiles("C1CC1").unwrap();
        assert!(q.is_match(&parse_smiles("CC1CC1").unwrap()));
        assert!(!q.is_match(&parse_smiles("C1CCC1").unwrap()));
        // Each triangle embeds in 6 orientations.
        assert_eq!(q.find_all(&parse_smiles("C1CC1").unwrap()).len(), 6);
    }
}
