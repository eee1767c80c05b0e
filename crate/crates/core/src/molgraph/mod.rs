//! Molecular graphs with implicit hydrogens.
//!
//! A [`MolGraph`] is the terminal-level representation used throughout the
//! crate. Construction always goes through [`MolGraph::new`], which checks
//! connectivity, kekulizes aromatic systems and assigns hydrogen counts, so
//! every value of this type satisfies the valence model.

mod dataset;
mod fingerprint;
mod rings;
mod smiles;
mod substructure;
pub mod valence;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{
    builtin_dataset, builtin_text, parse_dataset, Dataset, DatasetError, Record, BUILTIN_DATASETS,
};
pub use fingerprint::{morgan_fingerprint, tanimoto_distance, Fingerprint};
pub use rings::{ring_bonds, sssr};
pub use smiles::parse_smiles;
pub use substructure::{QueryAtom, QueryBond, QueryGraph};
pub use writer::{write_smiles, write_smiles_tokens};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MolError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("valence error: {0}")]
    Valence(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, MolError>;

/// Supported chemical elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 12] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::Si => 14,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// Standard atomic weight in g/mol.
    pub fn atomic_mass(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::B => 10.81,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::Si => 28.085,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    /// Neutral-atom valences, lowest first.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::Si => &[4],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
        }
    }

    /// Whether the element may be written without brackets in SMILES.
    pub fn is_organic_subset(self) -> bool {
        !matches!(self, Element::H | Element::Si)
    }

    /// Whether a lowercase aromatic form exists in the supported subset.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub charge: i8,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub aromatic: bool,
    /// Bracket-atom hydrogen count; disables implicit-H inference when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_h: Option<u8>,
}

fn is_zero(v: &i8) -> bool {
    *v == 0
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic: false,
            explicit_h: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }

    /// Allowed total valences (bond orders plus hydrogens) for this atom's
    /// element and formal charge.
    pub fn allowed_valences(&self) -> Vec<u8> {
        let shift: i16 = match self.element {
            Element::N | Element::O | Element::P | Element::S => self.charge as i16,
            Element::B => -(self.charge as i16),
            _ => -(self.charge as i16).abs(),
        };
        self.element
            .valences()
            .iter()
            .filter_map(|&v| u8::try_from(v as i16 + shift).ok())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence contribution before kekulization (aromatic counted as 1).
    pub fn base_valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn smiles_symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "-",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic => ":",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { a, b, order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A connected, valence-checked molecular graph.
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    hydrogens: Vec<u8>,
    kekule: Vec<u8>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    /// Builds a graph, kekulizing aromatic bonds and assigning hydrogens.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph> {
        if atoms.is_empty() {
            return Err(MolError::InvalidGraph("no atoms".into()));
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(MolError::InvalidGraph(format!(
                    "bond {i} references a missing atom"
                )));
            }
            if bond.a == bond.b {
                return Err(MolError::InvalidGraph(format!("bond {i} is a self-loop")));
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(MolError::InvalidGraph(format!(
                    "duplicate bond between atoms {} and {}",
                    bond.a, bond.b
                )));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        if !is_connected(&adjacency) {
            return Err(MolError::InvalidGraph("graph is disconnected".into()));
        }
        for (i, bond) in bonds.iter().enumerate() {
            if bond.order == BondOrder::Aromatic
                && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return Err(MolError::Valence(format!(
                    "aromatic bond {i} joins a non-aromatic atom"
                )));
            }
        }
        let kekule = valence::kekulize(&atoms, &bonds, &adjacency)?;
        let hydrogens = valence::assign_hydrogens(&atoms, &kekule, &adjacency)?;
        Ok(MolGraph {
            atoms,
            bonds,
            hydrogens,
            kekule,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Total hydrogen count (implicit or explicit) on atom `i`.
    pub fn hydrogens(&self, i: usize) -> u8 {
        self.hydrogens[i]
    }

    /// Kekulé bond order (1, 2 or 3) of bond `i`.
    pub fn kekule_order(&self, i: usize) -> u8 {
        self.kekule[i]
    }

    /// `(neighbor, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of Kekulé bond orders at atom `i`.
    pub fn bond_order_sum(&self, i: usize) -> u8 {
        self.adjacency[i].iter().map(|&(_, b)| self.kekule[b]).sum()
    }

    /// Canonical string key; equal iff the graphs are label-preserving
    /// isomorphic. The key is the canonical SMILES.
    pub fn canonical_key(&self) -> String {
        self.canonical_smiles()
    }

    pub fn canonical_smiles(&self) -> String {
        let ranks = self.canonical_ranks();
        writer::write_with_ranks(self, &ranks)
    }

    /// Canonical rank of every atom.
    pub fn canonical_ranks(&self) -> Vec<usize> {
        let labels: Vec<(u8, i8, bool, u8)> = (0..self.atom_count())
            .map(|i| {
                let a = &self.atoms[i];
                (a.element.atomic_number(), a.charge, a.aromatic, self.hydrogens[i])
            })
            .collect();
        let edges: Vec<(usize, usize, u32)> = self
            .bonds
            .iter()
            .map(|b| (b.a, b.b, b.order.code() as u32))
            .collect();
        let canon = crate::canon::canonicalize(&labels, &edges);
        canon.ranks()
    }

    /// Molecular weight including hydrogens.
    pub fn molecular_weight(&self) -> f64 {
        let h = Element::H.atomic_mass();
        self.atoms
            .iter()
            .zip(&self.hydrogens)
            .map(|(a, &nh)| a.element.atomic_mass() + h * nh as f64)
            .sum()
    }

    /// A copy with atoms reordered so that old atom `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atom_count());
        let mut atoms = vec![self.atoms[0]; self.atom_count()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.a], perm[b.b], b.order))
            .collect();
        MolGraph::new(atoms, bonds).expect("permutation preserves validity")
    }
}

impl fmt::Display for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_smiles())
    }
}

fn is_connected(adjacency: &[Vec<(usize, usize)>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &(n, _) in &adjacency[v] {
            if !seen[n] {
                seen[n] = true;
                count += 1;
                stack.push(n);
            }
        }
    }
    count == adjacency.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charged_valences_shift() {
        let mut n = Atom::new(Element::N);
        n.charge = 1;
        assert_eq!(n.allowed_valences(), vec![4]);
        let mut o = Atom::new(Element::O);
        o.charge = -1;
        assert_eq!(o.allowed_valences(), vec![1]);
        let mut c = Atom::new(Element::C);
        c.charge = -1;
        assert_eq!(c.allowed_valences(), vec![3]);
    }

    #[test]
    fn rejects_disconnected_and_duplicate_bonds() {
        let atoms = vec![Atom::new(Element::C); 3];
        let err = MolGraph::new(atoms.clone(), vec![Bond::new(0, 1, BondOrder::Single)]);
        assert!(matches!(err, Err(MolError::InvalidGraph(_))));
        let err = MolGraph::new(
            atoms[..2].to_vec(),
            vec![
                Bond::new(0, 1, BondOrder::Single),
                Bond::new(1, 0, BondOrder::Single),
            ],
        );
        assert!(matches!(err, Err(MolError::InvalidGraph(_))));
    }

    #[test]
    fn methane_weight() {
        let g = MolGraph::new(vec![Atom::new(Element::C)], vec![]).unwrap();
        assert_eq!(g.hydrogens(0), 4);
        assert!((g.molecular_weight() - 16.043).abs() < 1e-9);
    }

    #[test]
    fn overvalent_carbon_rejected() {
        let atoms = vec![Atom::new(Element::C), Atom::new(Element::C)];
        let bonds = vec![Bond::new(0, 1, BondOrder::Triple)];
        assert!(MolGraph::new(atoms.clone(), bonds).is_ok());
        let mut five = vec![Atom::new(Element::C)];
        let mut bonds = Vec::new();
        for i in 1..=5 {
            five.push(Atom::new(Element::F));
            bonds.push(Bond::new(0, i, BondOrder::Single));
        }
        assert!(matches!(MolGraph::new(five, bonds), Err(MolError::Valence(_))));
    }
}
