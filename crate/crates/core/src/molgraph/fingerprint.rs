//! Circular (Morgan) fingerprints and Tanimoto distance.

use super::{rings, MolError, MolGraph, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn new(nbits: usize, radius: u32) -> Self {
        Fingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        }
    }

    /// Builds a fingerprint from explicit bit positions.
    pub fn from_bits(nbits: usize, radius: u32, bits: &[usize]) -> Self {
        let mut fp = Fingerprint::new(nbits, radius);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.nbits, "bit {bit} out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Positions of set bits, ascending.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&b| self.get(b)).collect()
    }
}

/// Tanimoto distance `1 - |a & b| / |a | b|`; zero when both are empty.
pub fn tanimoto_distance(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.nbits != b.nbits || a.radius != b.radius {
        return Err(MolError::DimensionMismatch(format!(
            "fingerprints ({} bits, radius {}) and ({} bits, radius {})",
            a.nbits, a.radius, b.nbits, b.radius
        )));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - both as f64 / either as f64)
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_words(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &w in words {
        h = (h ^ splitmix(w)).wrapping_mul(FNV_PRIME);
    }
    splitmix(h)
}

/// Morgan fingerprint with the given radius and bit width (a power of two).
///
/// Initial atom invariants combine element, heavy-atom degree, hydrogen
/// count, formal charge, ring membership and aromaticity. Each layer hashes
/// an atom's invariant with the sorted (bond order, neighbor invariant)
/// pairs. An environment whose bond set was already seen is not added again.
pub fn morgan_fingerprint(g: &MolGraph, radius: u32, nbits: usize) -> Fingerprint {
    assert!(nbits.is_power_of_two(), "nbits must be a power of two");
    let n = g.atom_count();
    let ring = rings::ring_bonds(g);
    let in_ring: Vec<bool> = (0..n)
        .map(|i| g.neighbors(i).iter().any(|&(_, b)| ring[b]))
        .collect();

    let mut fp = Fingerprint::new(nbits, radius);
    let fold = |h: u64| (h % nbits as u64) as usize;

    let mut invariants: Vec<u64> = (0..n)
        .map(|i| {
            let atom = g.atom(i);
            hash_words(&[
                atom.element.atomic_number() as u64,
                g.degree(i) as u64,
                g.hydrogens(i) as u64,
                atom.charge as i64 as u64,
                in_ring[i] as u64,
                atom.aromatic as u64,
            ])
        })
        .collect();
    for &inv in &invariants {
        fp.set(fold(inv));
    }

    let words = g.bond_count().div_ceil(64).max(1);
    let mut envs: Vec<Vec<u64>> = vec![vec![0; words]; n];
    let mut seen: Vec<Vec<u64>> = Vec::new();
    for layer in 1..=radius {
        let mut next_inv = Vec::with_capacity(n);
        let mut next_env = Vec::with_capacity(n);
        for i in 0..n {
            let mut pairs: Vec<(u64, u64)> = g
                .neighbors(i)
                .iter()
                .map(|&(nbr, b)| (g.bonds()[b].order.code() as u64, invariants[nbr]))
                .collect();
            pairs.sort_unstable();
            let mut words_in = vec![layer as u64, invariants[i]];
            for (o, inv) in pairs {
                words_in.push(o);
                words_in.push(inv);
            }
            next_inv.push(hash_words(&words_in));

            let mut env = envs[i].clone();
            for &(nbr, b) in g.neighbors(i) {
                env[b / 64] |= 1 << (b % 64);
                for (e, x) in env.iter_mut().zip(&envs[nbr]) {
                    *e |= x;
                }
            }
            next_env.push(env);
        }

        // Same-layer duplicates keep the smallest invariant.
        let mut candidates: Vec<(Vec<u64>, u64)> = next_env
            .iter()
            .cloned()
            .zip(next_inv.iter().copied())
            .collect();
        candidates.sort();
        let mut last: Option<&Vec<u64>> = None;
        let mut added = Vec::new();
        for (env, inv) in &candidates {
            if last == Some(env) {
                continue;
            }
            last = Some(env);
            if seen.contains(env) {
                continue;
            }
            fp.set(fold(*inv));
            added.push(env.clone());
        }
        seen.extend(added);
        invariants = next_inv;
        envs = next_env;
    }
    fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn tanimoto_set_arithmetic() {
        let a = Fingerprint::from_bits(4, 0, &[2, 3]);
        let b = Fingerprint::from_bits(4, 0, &[1, 2]);
        assert!((tanimoto_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(tanimoto_distance(&a, &a).unwrap(), 0.0);
        let c = Fingerprint::from_bits(4, 0, &[0]);
        assert_eq!(tanimoto_distance(&a, &c).unwrap(), 1.0);
        let z = Fingerprint::new(4, 0);
        assert_eq!(tanimoto_distance(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_widths_rejected() {
        let a = Fingerprint::new(64, 2);
        let b = Fingerprint::new(128, 2);
        assert!(matches!(
            tanimoto_distance(&a, &b),
            Err(MolError::DimensionMismatch(_))
        ));
        let c = Fingerprint::new(64, 1);
        assert!(tanimoto_distance(&a, &c).is_err());
    }

    #[test]
    fn radius_zero_counts_atom_environments() {
        // CCO has three distinct atom environments: CH3 (degree 1), CH2
        // (degree 2) and OH.
        let g = parse_smiles("CCO").unwrap();
        let fp = morgan_fingerprint(&g, 0, 2048);
        assert!(fp.count_ones() <= 3);
        assert!(fp.count_ones() >= 2);
    }

    #[test]
    fn reordered_ethanol_matches() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 2, 2048);
        let b = morgan_fingerprint(&parse_smiles("OCC").unwrap(), 2, 2048);
        assert_eq!(a, b);
    }

    #[test]
    fn different_molecules_differ() {
        let a = morgan_fingerprint(&parse_smiles("OCCO").unwrap(), 2, 2048);
        let b = morgan_fingerprint(&parse_smiles("O=C=NCCCCCCN=C=O").unwrap(), 2, 2048);
        assert_ne!(a, b);
    }
}
