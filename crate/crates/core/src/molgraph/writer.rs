//! SMILES writer. Traversal order follows caller-supplied atom ranks, so a
//! canonical ranking yields canonical SMILES.

use super::{valence, BondOrder, MolGraph};

/// Canonical SMILES for `g`.
pub fn write_smiles(g: &MolGraph) -> String {
    g.canonical_smiles()
}

pub(crate) fn write_with_ranks(g: &MolGraph, ranks: &[usize]) -> String {
    let tokens: Vec<String> = (0..g.atom_count()).map(|i| atom_token(g, i)).collect();
    let bonds: Vec<(usize, usize, &'static str)> = g
        .bonds()
        .iter()
        .map(|b| {
            let symbol = match b.order {
                BondOrder::Single if g.atom(b.a).aromatic && g.atom(b.b).aromatic => "-",
                BondOrder::Single | BondOrder::Aromatic => "",
                BondOrder::Double => "=",
                BondOrder::Triple => "#",
            };
            (b.a, b.b, symbol)
        })
        .collect();
    write_smiles_tokens(&tokens, &bonds, ranks)
}

fn atom_token(g: &MolGraph, i: usize) -> String {
    let atom = g.atom(i);
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let h = g.hydrogens(i);
    if valence::bare_hydrogens(g, i) == Some(h) {
        return symbol;
    }
    let mut token = format!("[{symbol}");
    match h {
        0 => {}
        1 => token.push('H'),
        n => token.push_str(&format!("H{n}")),
    }
    match atom.charge {
        0 => {}
        1 => token.push('+'),
        -1 => token.push('-'),
        c if c > 0 => token.push_str(&format!("+{c}")),
        c => token.push_str(&format!("-{}", -c)),
    }
    token.push(']');
    token
}

/// Writes a SMILES-like string from atom tokens and `(a, b, bond symbol)`
/// triples. Disconnected pieces are joined with `.`.
pub fn write_smiles_tokens(
    tokens: &[String],
    bonds: &[(usize, usize, &str)],
    ranks: &[usize],
) -> String {
    let n = tokens.len();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, &(a, b, _)) in bonds.iter().enumerate() {
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(nbr, _)| ranks[nbr]);
    }

    let mut state = Traversal {
        adjacency: &adjacency,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        rings: vec![Vec::new(); n],
        closure: vec![false; bonds.len()],
    };
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| ranks[i]);
    let mut roots = Vec::new();
    for &s in &starts {
        if !state.visited[s] {
            state.visit(s, None);
            roots.push(s);
        }
    }

    let mut out = String::new();
    let mut open: Vec<Option<usize>> = Vec::new();
    let mut digit_of = vec![None; bonds.len()];
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(
            root,
            tokens,
            bonds,
            &state,
            &mut out,
            &mut open,
            &mut digit_of,
        );
    }
    out
}

struct Traversal<'a> {
    adjacency: &'a [Vec<(usize, usize)>],
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    rings: Vec<Vec<usize>>,
    closure: Vec<bool>,
}

impl Traversal<'_> {
    fn visit(&mut self, v: usize, parent_bond: Option<usize>) {
        self.visited[v] = true;
        for &(nbr, bond) in self.adjacency[v].iter() {
            if Some(bond) == parent_bond {
                continue;
            }
            if self.visited[nbr] {
                if !self.closure[bond] {
                    self.closure[bond] = true;
                    self.rings[nbr].push(bond);
                    self.rings[v].push(bond);
                }
            } else {
                self.children[v].push((nbr, bond));
                self.visit(nbr, Some(bond));
            }
        }
    }
}

fn emit(
    v: usize,
    tokens: &[String],
    bonds: &[(usize, usize, &str)],
    state: &Traversal<'_>,
    out: &mut String,
    open: &mut Vec<Option<usize>>,
    digit_of: &mut Vec<Option<usize>>,
) {
    out.push_str(&tokens[v]);
    for &bond in &state.rings[v] {
        match digit_of[bond] {
            Some(d) => {
                push_ring_digit(out, d);
                open[d] = None;
            }
            None => {
                let d = match open.iter().position(Option::is_none) {
                    Some(d) => d,
                    None => {
                        open.push(None);
                        open.len() - 1
                    }
                };
                open[d] = Some(bond);
                digit_of[bond] = Some(d);
                out.push_str(bonds[bond].2);
                push_ring_digit(out, d);
            }
        }
    }
    let children = &state.children[v];
    for (k, &(child, bond)) in children.iter().enumerate() {
        let last = k + 1 == children.len();
        if !last {
            out.push('(');
        }
        out.push_str(bonds[bond].2);
        emit(child, tokens, bonds, state, out, open, digit_of);
        if !last {
            out.push(')');
        }
    }
}

fn push_ring_digit(out: &mut String, d: usize) {
    let label = d + 1;
    if label < 10 {
        out.push_str(&label.to_string());
    } else {
        out.push_str(&format!("%{label:02}"));
    }
}

#[cfg(test)]
mod tests {
    use crate::molgraph::parse_smiles;

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(super::write_smiles(&g), "C");
    }

    #[test]
    fn benzene_round_trip_stays_aromatic() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let s = super::write_smiles(&g);
        let h = parse_smiles(&s).unwrap();
        assert_eq!(h.atom_count(), 6);
        assert!(h.atoms().iter().all(|a| a.aromatic));
        assert_eq!(h.canonical_key(), g.canonical_key());
    }

    #[test]
    fn brackets_only_when_needed() {
        let g = parse_smiles("[CH3][CH2][OH]").unwrap();
        assert_eq!(super::write_smiles(&g), parse_smiles("CCO").unwrap().canonical_smiles());
        let s = super::write_smiles(&parse_smiles("c1cc[nH]c1").unwrap());
        assert!(s.contains("[nH]"), "{s}");
        let s = super::write_smiles(&parse_smiles("C[N+](C)(C)C").unwrap());
        assert!(s.contains("[N+]"), "{s}");
    }

    #[test]
    fn many_ring_closures_use_percent_labels() {
        // Atom 0 bonded to every atom of an 11-chain opens ten ring bonds at once.
        let tokens: Vec<String> = (0..12).map(|_| "C".to_string()).collect();
        let mut bonds = Vec::new();
        for i in 0..12 {
            for j in (i + 1)..12 {
                if j - i <= 1 || (i == 0) {
                    bonds.push((i, j, ""));
                }
            }
        }
        let ranks: Vec<usize> = (0..12).collect();
        let s = super::write_smiles_tokens(&tokens, &bonds, &ranks);
        assert!(s.contains('%'), "{s}");
    }
}
