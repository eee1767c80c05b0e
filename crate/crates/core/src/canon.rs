//! Exact canonical labeling of small vertex- and edge-labeled graphs.
//!
//! Color refinement splits vertices by their labeled neighborhoods until the
//! partition is equitable; ties are broken by individualizing each vertex of
//! the first non-singleton cell in turn. Every discrete leaf yields a
//! certificate (the relabeled edge list) and the smallest certificate wins.
//! Leaves with equal certificates give automorphisms, which prune branches
//! that lie in the same orbit as an already explored one.

use std::collections::BTreeMap;

/// Result of canonical labeling.
#[derive(Debug, Clone)]
pub struct Canonical {
    ranks: Vec<usize>,
    certificate: Vec<(usize, usize, u32)>,
}

impl Canonical {
    /// Canonical position of every vertex.
    pub fn ranks(&self) -> Vec<usize> {
        self.ranks.clone()
    }

    /// Edges relabeled by rank, `(low, high, label)`, sorted.
    pub fn certificate(&self) -> &[(usize, usize, u32)] {
        &self.certificate
    }

    /// Vertices listed in canonical order.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (v, &r) in self.ranks.iter().enumerate() {
            order[r] = v;
        }
        order
    }
}

/// Canonically labels the graph with vertex labels `labels` and undirected
/// edges `(a, b, label)`. Isomorphic inputs (label-preserving) produce equal
/// label sequences in canonical order and equal certificates.
pub fn canonicalize<L: Ord>(labels: &[L], edges: &[(usize, usize, u32)]) -> Canonical {
    let n = labels.len();
    let mut adjacency: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for &(a, b, l) in edges {
        adjacency[a].push((b, l));
        adjacency[b].push((a, l));
    }

    // Initial coloring by label; a color is the index of its cell's first
    // position, so colors are ordered like the cells.
    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by(|&x, &y| labels[x].cmp(&labels[y]));
    let mut colors = vec![0; n];
    for k in 1..n {
        let (prev, cur) = (by_label[k - 1], by_label[k]);
        colors[cur] = if labels[prev] == labels[cur] {
            colors[prev]
        } else {
            k
        };
    }

    let mut search = Search {
        adjacency: &adjacency,
        edges,
        best: None,
        automorphisms: Vec::new(),
    };
    let colors = refine(&adjacency, colors);
    search.explore(colors, &mut Vec::new());
    let (ranks, certificate) = search.best.expect("search visits at least one leaf");
    Canonical { ranks, certificate }
}

fn refine(adjacency: &[Vec<(usize, u32)>], mut colors: Vec<usize>) -> Vec<usize> {
    let n = colors.len();
    let mut cells = count_cells(&colors);
    loop {
        let keys: Vec<(usize, Vec<(usize, u32)>)> = (0..n)
            .map(|v| {
                let mut nbrs: Vec<(usize, u32)> =
                    adjacency[v].iter().map(|&(w, l)| (colors[w], l)).collect();
                nbrs.sort_unstable();
                (colors[v], nbrs)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| keys[x].cmp(&keys[y]));
        let mut next = vec![0; n];
        for k in 1..n {
            let (prev, cur) = (order[k - 1], order[k]);
            next[cur] = if keys[prev] == keys[cur] { next[prev] } else { k };
        }
        let next_cells = count_cells(&next);
        colors = next;
        if next_cells == cells {
            return colors;
        }
        cells = next_cells;
    }
}

fn count_cells(colors: &[usize]) -> usize {
    let mut seen: Vec<usize> = colors.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

type Leaf = (Vec<usize>, Vec<(usize, usize, u32)>);

struct Search<'a> {
    adjacency: &'a [Vec<(usize, u32)>],
    edges: &'a [(usize, usize, u32)],
    best: Option<Leaf>,
    /// Automorphisms as vertex maps.
    automorphisms: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn explore(&mut self, colors: Vec<usize>, path: &mut Vec<usize>) {
        let n = colors.len();
        // Target cell: the smallest color shared by more than one vertex.
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &colors {
            *counts.entry(c).or_default() += 1;
        }
        let Some((&target, _)) = counts.iter().find(|(_, &k)| k > 1) else {
            self.leaf(colors);
            return;
        };
        let cell: Vec<usize> = (0..n).filter(|&v| colors[v] == target).collect();
        let mut explored: Vec<usize> = Vec::new();
        for &v in &cell {
            if !explored.is_empty() && self.same_orbit(path, &explored, v) {
                continue;
            }
            let mut child = colors.clone();
            for &w in &cell {
                if w != v {
                    child[w] = target + 1;
                }
            }
            let child = refine(self.adjacency, child);
            path.push(v);
            self.explore(child, path);
            path.pop();
            explored.push(v);
        }
    }

    /// Whether `v` is in the orbit of an explored vertex under the group
    /// generated by known automorphisms that fix `path` pointwise.
    fn same_orbit(&self, path: &[usize], explored: &[usize], v: usize) -> bool {
        let n = self.adjacency.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let next = parent[y];
                parent[y] = r;
                y = next;
            }
            r
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if path.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for x in 0..n {
                let (a, b) = (find(&mut parent, x), find(&mut parent, gamma[x]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        if !any {
            return false;
        }
        let root = find(&mut parent, v);
        explored.iter().any(|&u| find(&mut parent, u) == root)
    }

    fn leaf(&mut self, ranks: Vec<usize>) {
        let mut certificate: Vec<(usize, usize, u32)> = self
            .edges
            .iter()
            .map(|&(a, b, l)| {
                let (x, y) = (ranks[a], ranks[b]);
                (x.min(y), x.max(y), l)
            })
            .collect();
        certificate.sort_unstable();
        match &self.best {
            None => self.best = Some((ranks, certificate)),
            Some((best_ranks, best_cert)) => match certificate.cmp(best_cert) {
                std::cmp::Ordering::Less => self.best = Some((ranks, certificate)),
                std::cmp::Ordering::Equal => {
                    // gamma maps each vertex to the vertex holding its rank
                    // in the best leaf.
                    let mut at_rank = vec![0; ranks.len()];
                    for (v, &r) in best_ranks.iter().enumerate() {
                        at_rank[r] = v;
                    }
                    let gamma: Vec<usize> = ranks.iter().map(|&r| at_rank[r]).collect();
                    if gamma.iter().enumerate().any(|(v, &g)| v != g) {
                        self.automorphisms.push(gamma);
                    }
                }
                std::cmp::Ordering::Greater => {}
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Vec<(usize, usize, u32)> {
        (0..n).map(|i| (i, (i + 1) % n, 1)).collect()
    }

    #[test]
    fn relabeled_cycles_agree() {
        let labels = vec![0u8; 6];
        let a = canonicalize(&labels, &cycle(6));
        let perm = [3, 5, 1, 0, 4, 2];
        let edges: Vec<_> = cycle(6)
            .into_iter()
            .map(|(x, y, l)| (perm[x], perm[y], l))
            .collect();
        let b = canonicalize(&labels, &edges);
        assert_eq!(a.certificate(), b.certificate());
    }

    #[test]
    fn distinguishes_non_isomorphic_regular_graphs() {
        // Two triangles versus a hexagon: both 2-regular, refinement alone
        // cannot tell them apart.
        let labels = vec![0u8; 6];
        let triangles = vec![(0, 1, 1), (1, 2, 1), (2, 0, 1), (3, 4, 1), (4, 5, 1), (5, 3, 1)];
        let a = canonicalize(&labels, &triangles);
        let b = canonicalize(&labels, &cycle(6));
        assert_ne!(a.certificate(), b.certificate());
    }

    #[test]
    fn edge_labels_matter() {
        let labels = vec![0u8; 3];
        let a = canonicalize(&labels, &[(0, 1, 1), (1, 2, 2)]);
        let b = canonicalize(&labels, &[(0, 1, 1), (1, 2, 1)]);
        assert_ne!(a.certificate(), b.certificate());
    }

    #[test]
    fn ranks_are_a_permutation() {
        let labels = vec![1u8, 0, 1, 0, 2];
        let c = canonicalize(&labels, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)]);
        let mut r = c.ranks();
        r.sort();
        assert_eq!(r, vec![0, 1, 2, 3, 4]);
        let order = c.order();
        // Cells follow label order.
        assert!(order.windows(2).all(|w| labels[w[0]] <= labels[w[1]]));
    }

    #[test]
    fn petersen_graph_is_handled() {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5, 1));
            edges.push((i, i + 5, 1));
            edges.push((i + 5, (i + 2) % 5 + 5, 1));
        }
        let labels = vec![0u8; 10];
        let a = canonicalize(&labels, &edges);
        let perm = [7, 2, 9, 0, 5, 1, 8, 3, 6, 4];
        let moved: Vec<_> = edges.iter().map(|&(x, y, l)| (perm[x], perm[y], l)).collect();
        let b = canonicalize(&labels, &moved);
        assert_eq!(a.certificate(), b.certificate());
    }
}
