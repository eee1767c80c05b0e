//! Kekulization, hydrogen assignment and an independent valence check.

use super::{Atom, Bond, BondOrder, MolError, MolGraph, Result};

/// Whether an aromatic atom must receive one double bond from its aromatic
/// system, given its non-aromatic bonds and any bracket hydrogens.
fn needs_double(atom: &Atom, base: u8) -> Result<bool> {
    let allowed = atom.allowed_valences();
    match atom.explicit_h {
        Some(h) => {
            let total = base + h;
            if allowed.contains(&total) {
                Ok(false)
            } else if allowed.contains(&(total + 1)) {
                Ok(true)
            } else {
                Err(MolError::Valence(format!(
                    "aromatic {} cannot reach an allowed valence",
                    atom.element
                )))
            }
        }
        None => match allowed.iter().copied().find(|&v| v >= base) {
            Some(v) => Ok(v > base),
            None => Err(MolError::Valence(format!(
                "aromatic {} exceeds every allowed valence",
                atom.element
            ))),
        },
    }
}

/// Assigns Kekulé orders (1..=3) to every bond. Aromatic bonds become double
/// exactly where a perfect matching over the atoms that need a double bond
/// places them.
pub(crate) fn kekulize(
    atoms: &[Atom],
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> Result<Vec<u8>> {
    let mut orders: Vec<u8> = bonds
        .iter()
        .map(|b| match b.order {
            BondOrder::Aromatic => 1,
            o => o.base_valence(),
        })
        .collect();
    if !bonds.iter().any(|b| b.order == BondOrder::Aromatic) {
        return Ok(orders);
    }

    let mut needy = vec![false; atoms.len()];
    for (i, atom) in atoms.iter().enumerate() {
        let aromatic_bonds = adjacency[i]
            .iter()
            .filter(|&&(_, b)| bonds[b].order == BondOrder::Aromatic)
            .count();
        if aromatic_bonds == 0 {
            continue;
        }
        let base: u8 = adjacency[i]
            .iter()
            .map(|&(_, b)| bonds[b].order.base_valence())
            .sum();
        needy[i] = needs_double(atom, base)?;
    }

    let mut matched: Vec<Option<usize>> = vec![None; atoms.len()];
    if !match_remaining(&needy, bonds, adjacency, &mut matched) {
        return Err(MolError::Valence(
            "aromatic system cannot be kekulized".into(),
        ));
    }
    for (i, m) in matched.iter().enumerate() {
        if let Some(b) = *m {
            if bonds[b].a == i {
                orders[b] = 2;
            }
        }
    }
    Ok(orders)
}

/// Backtracking perfect matching of needy atoms along aromatic bonds. Picks
/// the unmatched atom with the fewest options first.
fn match_remaining(
    needy: &[bool],
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
    matched: &mut Vec<Option<usize>>,
) -> bool {
    let options = |i: usize, matched: &Vec<Option<usize>>| -> Vec<(usize, usize)> {
        adjacency[i]
            .iter()
            .copied()
            .filter(|&(n, b)| {
                bonds[b].order == BondOrder::Aromatic && needy[n] && matched[n].is_none()
            })
            .collect()
    };
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    for i in 0..needy.len() {
        if !needy[i] || matched[i].is_some() {
            continue;
        }
        let opts = options(i, matched);
        if opts.is_empty() {
            return false;
        }
        if best.as_ref().is_none_or(|(_, o)| opts.len() < o.len()) {
            best = Some((i, opts));
        }
    }
    let Some((atom, opts)) = best else {
        return true;
    };
    for (n, b) in opts {
        matched[atom] = Some(b);
        matched[n] = Some(b);
        if match_remaining(needy, bonds, adjacency, matched) {
            return true;
        }
        matched[atom] = None;
        matched[n] = None;
    }
    false
}

pub(crate) fn assign_hydrogens(
    atoms: &[Atom],
    kekule: &[u8],
    adjacency: &[Vec<(usize, usize)>],
) -> Result<Vec<u8>> {
    atoms
        .iter()
        .enumerate()
        .map(|(i, atom)| {
            let sum: u8 = adjacency[i].iter().map(|&(_, b)| kekule[b]).sum();
            let allowed = atom.allowed_valences();
            match atom.explicit_h {
                Some(h) if allowed.contains(&(sum + h)) => Ok(h),
                Some(h) => Err(MolError::Valence(format!(
                    "{} with {h} H and bond order {sum} has no allowed valence",
                    atom.element
                ))),
                None => allowed
                    .iter()
                    .copied()
                    .find(|&v| v >= sum)
                    .map(|v| v - sum)
                    .ok_or_else(|| {
                        MolError::Valence(format!(
                            "{} (atom {i}) has bond order sum {sum}",
                            atom.element
                        ))
                    }),
            }
        })
        .collect()
}

/// Hydrogen count a bare (unbracketed) organic-subset atom would receive in
/// this bonding environment. Used by the writer to decide on brackets.
pub(crate) fn bare_hydrogens(g: &MolGraph, i: usize) -> Option<u8> {
    let atom = g.atom(i);
    if atom.charge != 0 || !atom.element.is_organic_subset() {
        return None;
    }
    let bare = Atom {
        explicit_h: None,
        ..*atom
    };
    let allowed = bare.allowed_valences();
    let has_aromatic = g
        .neighbors(i)
        .iter()
        .any(|&(_, b)| g.bonds()[b].order == BondOrder::Aromatic);
    if has_aromatic {
        let base: u8 = g
            .neighbors(i)
            .iter()
            .map(|&(_, b)| g.bonds()[b].order.base_valence())
            .sum();
        let v = allowed.iter().copied().find(|&v| v >= base)?;
        let double = u8::from(v > base);
        Some(v - base - double)
    } else {
        let sum = g.bond_order_sum(i);
        allowed.iter().copied().find(|&v| v >= sum).map(|v| v - sum)
    }
}

/// Re-derives every atom's valence from Kekulé orders and hydrogen counts and
/// checks it against the allowed set. Independent of the construction path.
pub fn check(g: &MolGraph) -> Result<()> {
    for i in 0..g.atom_count() {
        let atom = g.atom(i);
        let mut sum = 0u32;
        let mut aromatic_doubles = 0;
        for &(n, b) in g.neighbors(i) {
            let bond = &g.bonds()[b];
            let k = g.kekule_order(b);
            match bond.order {
                BondOrder::Aromatic => {
                    if !(atom.aromatic && g.atom(n).aromatic) {
                        return Err(MolError::Valence(format!(
                            "aromatic bond at non-aromatic atom {i}"
                        )));
                    }
                    if k == 2 {
                        aromatic_doubles += 1;
                    } else if k != 1 {
                        return Err(MolError::Valence(format!(
                            "aromatic bond {b} has Kekulé order {k}"
                        )));
                    }
                }
                o if o.base_valence() != k => {
                    return Err(MolError::Valence(format!(
                        "bond {b} Kekulé order disagrees with its label"
                    )));
                }
                _ => {}
            }
            sum += k as u32;
        }
        if aromatic_doubles > 1 {
            return Err(MolError::Valence(format!(
                "atom {i} carries {aromatic_doubles} aromatic double bonds"
            )));
        }
        let total = sum + g.hydrogens(i) as u32;
        if !atom.allowed_valences().iter().any(|&v| v as u32 == total) {
            return Err(MolError::Valence(format!(
                "atom {i} ({}) has total valence {total}",
                atom.element
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn benzene_kekulizes_to_alternating_bonds() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let doubles = (0..6).filter(|&b| g.kekule_order(b) == 2).count();
        assert_eq!(doubles, 3);
        for i in 0..6 {
            assert_eq!(g.hydrogens(i), 1);
            assert_eq!(g.bond_order_sum(i), 3);
        }
        check(&g).unwrap();
    }

    #[test]
    fn pyrrole_needs_bracket_hydrogen() {
        assert!(parse_smiles("c1cc[nH]c1").is_ok());
        assert!(matches!(parse_smiles("c1ccnc1"), Err(MolError::Valence(_))));
    }

    #[test]
    fn pyridine_and_furan() {
        let g = parse_smiles("c1ccncc1").unwrap();
        let n = (0..6).find(|&i| g.atom(i).element == super::super::Element::N).unwrap();
        assert_eq!(g.hydrogens(n), 0);
        assert!(parse_smiles("c1ccoc1").is_ok());
    }

    #[test]
    fn odd_aromatic_ring_fails() {
        assert!(matches!(parse_smiles("c1cccc1"), Err(MolError::Valence(_))));
    }

    #[test]
    fn bare_hydrogens_match_parse() {
        for s in ["OCCO", "c1ccccc1O", "O=C=NCC", "CC(=O)[O-]", "c1ccc2ccccc2c1"] {
            let g = parse_smiles(s).unwrap();
            for i in 0..g.atom_count() {
                if g.atom(i).explicit_h.is_none() && g.atom(i).charge == 0 {
                    assert_eq!(bare_hydrogens(&g, i), Some(g.hydrogens(i)), "{s} atom {i}");
                }
            }
        }
    }
}
