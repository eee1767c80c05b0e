//! SMILES reader for the supported subset: organic-subset and bracket atoms
//! (hydrogen count and charge), bonds `- = # :`, branches, ring closures
//! (`1`..`9`, `%nn`) and lowercase aromatic atoms.

use std::collections::BTreeMap;

use super::{Atom, Bond, BondOrder, Element, MolError, MolGraph, Result};

pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    let (atoms, bonds) = Parser::new(text).parse()?;
    MolGraph::new(atoms, bonds)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    open_rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            open_rings: BTreeMap::new(),
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> MolError {
        MolError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<(Vec<Atom>, Vec<Bond>)> {
        if self.bytes.is_empty() {
            return Err(self.syntax("empty SMILES"));
        }
        let mut current: Option<usize> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<usize> = Vec::new();

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(atom) = current else {
                        return Err(self.syntax("branch before any atom"));
                    };
                    if pending.is_some() {
                        return Err(self.syntax("bond before branch"));
                    }
                    branches.push(atom);
                    self.pos += 1;
                    if self.peek() == Some(b')') {
                        return Err(self.syntax("empty branch"));
                    }
                }
                b')' => {
                    if pending.is_some() {
                        return Err(self.syntax("dangling bond at branch end"));
                    }
                    current = Some(
                        branches
                            .pop()
                            .ok_or_else(|| self.syntax("unmatched ')'"))?,
                    );
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if current.is_none() {
                        return Err(self.syntax("bond before any atom"));
                    }
                    if pending.is_some() {
                        return Err(self.syntax("two consecutive bonds"));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    pending = Some((order, self.pos));
                    self.pos += 1;
                }
                b'/' | b'\\' => {
                    return Err(MolError::Unsupported(format!(
                        "directional bond '{}' at position {}",
                        c as char, self.pos
                    )))
                }
                b'$' => {
                    return Err(MolError::Unsupported(format!(
                        "quadruple bond at position {}",
                        self.pos
                    )))
                }
                b'.' => {
                    return Err(MolError::Unsupported(format!(
                        "multi-fragment SMILES ('.' at position {})",
                        self.pos
                    )))
                }
                b'*' => {
                    return Err(MolError::Unsupported(format!(
                        "wildcard atom at position {}",
                        self.pos
                    )))
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = current else {
                        return Err(self.syntax("ring closure before any atom"));
                    };
                    let start = self.pos;
                    let label = self.ring_label()?;
                    let bond = pending.take().map(|(o, _)| o);
                    self.ring_closure(atom, label, bond, start)?;
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(prev) = current {
                        let order = match pending.take() {
                            Some((o, _)) => o,
                            None => self.implied_order(prev, idx),
                        };
                        self.add_bond(prev, idx, order)?;
                    }
                    current = Some(idx);
                }
            }
        }
        if let Some((_, p)) = pending {
            self.pos = p;
            return Err(self.syntax("bond without a following atom"));
        }
        if !branches.is_empty() {
            return Err(self.syntax("unclosed branch"));
        }
        if let Some((label, &(_, _, p))) = self.open_rings.iter().next() {
            let label = *label;
            self.pos = p;
            return Err(self.syntax(format!("unclosed ring {label}")));
        }
        for (i, bond) in self.bonds.iter().enumerate() {
            let both = self.atoms[bond.a].aromatic && self.atoms[bond.b].aromatic;
            if bond.order == BondOrder::Aromatic && !both {
                return Err(MolError::Valence(format!(
                    "aromatic bond {i} joins a non-aromatic atom"
                )));
            }
        }
        Ok((self.atoms, self.bonds))
    }

    fn implied_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<()> {
        if a == b {
            return Err(self.syntax("atom bonded to itself"));
        }
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(self.syntax(format!("duplicate bond between atoms {a} and {b}")));
        }
        self.bonds.push(Bond::new(a, b, order));
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32> {
        let c = self.peek().unwrap();
        if c == b'%' {
            self.pos += 1;
            let digits = self
                .bytes
                .get(self.pos..self.pos + 2)
                .filter(|d| d.iter().all(u8::is_ascii_digit))
                .ok_or_else(|| self.syntax("'%' must be followed by two digits"))?;
            let label = (digits[0] - b'0') as u32 * 10 + (digits[1] - b'0') as u32;
            self.pos += 2;
            Ok(label)
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        label: u32,
        bond: Option<BondOrder>,
        start: usize,
    ) -> Result<()> {
        match self.open_rings.remove(&label) {
            None => {
                self.open_rings.insert(label, (atom, bond, start));
                Ok(())
            }
            Some((other, first, _)) => {
                let order = match (first, bond) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(self.syntax(format!(
                            "ring {label} closed with conflicting bond orders"
                        )))
                    }
                    (Some(x), _) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                };
                let order = order.unwrap_or_else(|| self.implied_order(other, atom));
                self.add_bond(other, atom, order)
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let c = self.peek().unwrap();
        if c == b'[' {
            return self.bracket_atom();
        }
        let two = self.bytes.get(self.pos..self.pos + 2);
        let (element, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => (Element::Cl, false, 2),
            (b'B', Some(b"Br")) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ if c.is_ascii_alphabetic() => {
                return Err(MolError::Unsupported(format!(
                    "element '{}' outside brackets at position {}",
                    c as char, self.pos
                )))
            }
            _ => return Err(self.syntax(format!("unexpected character '{}'", c as char))),
        };
        self.pos += len;
        Ok(Atom {
            element,
            charge: 0,
            aromatic,
            explicit_h: None,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(MolError::Unsupported(format!(
                "isotope label at position {}",
                self.pos
            )));
        }
        let rest = &self.bytes[self.pos..];
        let (element, aromatic, len) = if rest.starts_with(b"Cl") {
            (Element::Cl, false, 2)
        } else if rest.starts_with(b"Br") {
            (Element::Br, false, 2)
        } else if rest.starts_with(b"Si") {
            (Element::Si, false, 2)
        } else {
            match rest.first() {
                Some(&c) if c.is_ascii_lowercase() => {
                    let upper = (c.to_ascii_uppercase() as char).to_string();
                    match Element::from_symbol(&upper).filter(|e| e.can_be_aromatic()) {
                        Some(e) => (e, true, 1),
                        None => {
                            return Err(MolError::Unsupported(format!(
                                "aromatic symbol '{}' at position {}",
                                c as char, self.pos
                            )))
                        }
                    }
                }
                Some(&c) if c.is_ascii_uppercase() => {
                    if let Some(&n) = rest.get(1).filter(|n| n.is_ascii_lowercase()) {
                        return Err(MolError::Unsupported(format!(
                            "element '{}{}' at position {}",
                            c as char, n as char, self.pos
                        )));
                    }
                    match Element::from_symbol(&(c as char).to_string()) {
                        Some(e) => (e, false, 1),
                        None => {
                            return Err(MolError::Unsupported(format!(
                                "element '{}' at position {}",
                                c as char, self.pos
                            )))
                        }
                    }
                }
                Some(&b'*') => {
                    return Err(MolError::Unsupported(format!(
                        "wildcard atom at position {}",
                        self.pos
                    )))
                }
                _ => return Err(self.syntax("missing element symbol in bracket atom")),
            }
        };
        self.pos += len;

        if self.peek() == Some(b'@') {
            return Err(MolError::Unsupported(format!(
                "chirality marker at position {}",
                self.pos
            )));
        }
        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                explicit_h = d - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i8 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            charge = unit;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                charge = unit * (d - b'0') as i8;
                self.pos += 1;
            } else {
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => {
                return Err(MolError::Unsupported(format!(
                    "atom class at position {}",
                    self.pos
                )))
            }
            Some(b'@') => {
                return Err(MolError::Unsupported(format!(
                    "chirality marker at position {}",
                    self.pos
                )))
            }
            _ => {
                self.pos = open;
                return Err(self.syntax("unterminated bracket atom"));
            }
        }
        Ok(Atom {
            element,
            charge,
            aromatic,
            explicit_h: Some(explicit_h),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(g: &MolGraph) -> Vec<u8> {
        (0..g.atom_count()).map(|i| g.hydrogens(i)).collect()
    }

    #[test]
    fn ethylene_glycol() {
        let g = parse_smiles("OCCO").unwrap();
        let elements: Vec<_> = g.atoms().iter().map(|a| a.element).collect();
        assert_eq!(elements, vec![Element::O, Element::C, Element::C, Element::O]);
        assert_eq!(g.bond_count(), 3);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(hs(&g), vec![1, 2, 2, 1]);
    }

    #[test]
    fn empty_is_syntax_error() {
        assert!(matches!(parse_smiles(""), Err(MolError::Syntax { .. })));
    }

    #[test]
    fn hdi_isocyanate() {
        let g = parse_smiles("O=C=NCCCCCCN=C=O").unwrap();
        assert_eq!(g.atom_count(), 12);
        let doubles = g
            .bonds()
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .count();
        assert_eq!(doubles, 4);
        // Isocyanate carbons carry no hydrogens, nitrogens none either.
        assert_eq!(g.hydrogens(1), 0);
        assert_eq!(g.hydrogens(2), 0);
        super::super::valence::check(&g).unwrap();
    }

    #[test]
    fn cyclopropane() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 3);
        assert_eq!(super::super::sssr(&g), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn syntax_errors() {
        for s in ["C1CC", "C(C", "CC)", "C=", "(C)", "C()C", "[CH4", "C%1", "=C"] {
            assert!(
                matches!(parse_smiles(s), Err(MolError::Syntax { .. })),
                "{s} should be a syntax error"
            );
        }
    }

    #[test]
    fn unsupported_features() {
        for s in ["C.C", "[13CH4]", "C[C@H](O)N", "F/C=C/F", "C*", "[Se]", "[CH3:1]C"] {
            assert!(
                matches!(parse_smiles(s), Err(MolError::Unsupported(_))),
                "{s} should be unsupported"
            );
        }
    }

    #[test]
    fn bracket_atoms_and_charges() {
        let g = parse_smiles("C[N+](C)(C)C").unwrap();
        assert_eq!(g.atom(1).charge, 1);
        assert_eq!(g.hydrogens(1), 0);
        let g = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(g.atom(3).charge, -1);
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.hydrogens(0), 4);
        let g = parse_smiles("[Si](C)(C)(C)C").unwrap();
        assert_eq!(g.hydrogens(0), 0);
        assert!(matches!(parse_smiles("[CH5]"), Err(MolError::Valence(_))));
    }

    #[test]
    fn ring_closure_bonds() {
        let g = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(g.bond_between(0, 5).unwrap().order, BondOrder::Double);
        let g = parse_smiles("C%12CCC%12").unwrap();
        assert_eq!(g.bond_count(), 4);
        assert!(parse_smiles("C=1CC-1").is_err());
    }

    #[test]
    fn halogens_and_sulfur() {
        let g = parse_smiles("ClCBr").unwrap();
        assert_eq!(g.atom(0).element, Element::Cl);
        assert_eq!(g.atom(2).element, Element::Br);
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.hydrogens(1), 0);
        let g = parse_smiles("Nc1ccc(cc1)SSc2ccc(cc2)N").unwrap();
        assert_eq!(g.atom_count(), 16);
    }
}
