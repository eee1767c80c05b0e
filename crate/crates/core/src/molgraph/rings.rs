//! Ring perception: ring-bond flags and the smallest set of smallest rings.
//!
//! The SSSR is computed as a minimum cycle basis: candidate cycles are built
//! from shortest-path trees rooted at every atom (Horton's construction),
//! sorted by length, and accepted greedily when independent over GF(2).

use std::collections::VecDeque;

use super::MolGraph;

/// Per-bond flag: true if the bond lies on a cycle.
pub fn ring_bonds(g: &MolGraph) -> Vec<bool> {
    let edges: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.a, b.b)).collect();
    cycle_edges(g.atom_count(), &edges)
}

/// Rings of the SSSR, each as atom indices in traversal order starting from
/// the lowest index and continuing toward its lower-indexed ring neighbor.
pub fn sssr(g: &MolGraph) -> Vec<Vec<usize>> {
    let edges: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.a, b.b)).collect();
    minimum_cycle_basis(g.atom_count(), &edges)
}

pub(crate) fn cycle_edges(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut adjacency = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
    }
    // Iterative bridge finding (Tarjan low-link).
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_cycle = vec![true; edges.len()];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (v, parent, ref mut next)) = stack.last_mut() {
            if *next < adjacency[v].len() {
                let (w, e) = adjacency[v][*next];
                *next += 1;
                if Some(e) == parent {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, Some(e), 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let (Some(&(u, _, _)), Some(e)) = (stack.last(), parent) {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        on_cycle[e] = false;
                    }
                }
            }
        }
    }
    on_cycle
}

type BitSet = Vec<u64>;

fn bit_set(bits: &mut BitSet, i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn bit_get(bits: &BitSet, i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

pub(crate) fn minimum_cycle_basis(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
    }
    for list in &mut adjacency {
        list.sort();
    }
    let components = count_components(&adjacency);
    let rank = (edges.len() + components).saturating_sub(n);
    if rank == 0 {
        return Vec::new();
    }
    let words = edges.len().div_ceil(64);

    let mut candidates: Vec<(usize, BitSet)> = Vec::new();
    for root in 0..n {
        let (dist, parent) = bfs(&adjacency, root);
        for (e, &(x, y)) in edges.iter().enumerate() {
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].map(|p| p.1) == Some(e) || parent[y].map(|p| p.1) == Some(e) {
                continue;
            }
            let px = path_to_root(&parent, x);
            let py = path_to_root(&parent, y);
            // Paths must only share the root.
            let mut seen = vec![false; n];
            for &(v, _) in &px {
                seen[v] = true;
            }
            if py.iter().any(|&(v, _)| v != root && seen[v]) {
                continue;
            }
            let mut bits = vec![0u64; words];
            for &(_, pe) in px.iter().chain(py.iter()) {
                if let Some(pe) = pe {
                    bit_set(&mut bits, pe);
                }
            }
            bit_set(&mut bits, e);
            let len = dist[x] + dist[y] + 1;
            candidates.push((len, bits));
        }
    }
    candidates.sort();
    candidates.dedup();

    let mut basis: Vec<(usize, BitSet)> = Vec::new();
    let mut chosen: Vec<BitSet> = Vec::new();
    for (_, bits) in candidates {
        let mut reduced = bits.clone();
        for (pivot, row) in &basis {
            if bit_get(&reduced, *pivot) {
                for (r, b) in reduced.iter_mut().zip(row) {
                    *r ^= b;
                }
            }
        }
        if let Some(pivot) = (0..edges.len()).find(|&i| bit_get(&reduced, i)) {
            // Keep rows reduced against the new pivot for later candidates.
            for (_, row) in basis.iter_mut() {
                if bit_get(row, pivot) {
                    for (r, b) in row.iter_mut().zip(&reduced) {
                        *r ^= b;
                    }
                }
            }
            basis.push((pivot, reduced));
            chosen.push(bits);
            if chosen.len() == rank {
                break;
            }
        }
    }

    let mut rings: Vec<Vec<usize>> = chosen
        .iter()
        .map(|bits| order_cycle(edges, bits))
        .collect();
    rings.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    rings
}

fn count_components(adjacency: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; adjacency.len()];
    let mut count = 0;
    for s in 0..adjacency.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(w, _) in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

#[allow(clippy::type_complexity)]
fn bfs(
    adjacency: &[Vec<(usize, usize)>],
    root: usize,
) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = adjacency.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(w, e) in &adjacency[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

/// Nodes from `v` up to the root, each with the edge leading to its parent.
fn path_to_root(parent: &[Option<(usize, usize)>], v: usize) -> Vec<(usize, Option<usize>)> {
    let mut path = Vec::new();
    let mut cur = v;
    loop {
        match parent[cur] {
            Some((p, e)) => {
                path.push((cur, Some(e)));
                cur = p;
            }
            None => {
                path.push((cur, None));
                return path;
            }
        }
    }
}

fn order_cycle(edges: &[(usize, usize)], bits: &BitSet) -> Vec<usize> {
    let members: Vec<(usize, usize)> = (0..edges.len())
        .filter(|&i| bit_get(bits, i))
        .map(|i| edges[i])
        .collect();
    let neighbors = |v: usize| -> Vec<usize> {
        let mut out: Vec<usize> = members
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    };
    let start = members.iter().map(|&(a, b)| a.min(b)).min().unwrap();
    let mut ring = vec![start];
    let mut prev = start;
    let mut cur = neighbors(start)[0];
    while cur != start {
        ring.push(cur);
        let next = neighbors(cur).into_iter().find(|&w| w != prev).unwrap();
        prev = cur;
        cur = next;
    }
    ring
}
