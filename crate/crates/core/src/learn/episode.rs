//! One grammar-construction episode: Bernoulli edge draws, contraction of
//! the selected components, and the likelihood of the draws.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::featurize_all;
use super::net::{sigmoid, PotentialNet};
use super::LearnError;
use crate::grammar::{Grammar, GrammarBuilder};
use crate::hypergraph::{build_hypergraph, EdgeId, MolHypergraph, NodeId};
use crate::molgraph::MolGraph;

/// Redraws allowed when a molecule's iteration selects nothing.
pub const MAX_RESAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub molecule: usize,
    pub edge: EdgeId,
    /// 0 for the first draw of the iteration, then one per redraw.
    pub attempt: usize,
    pub features: Vec<f64>,
    pub potential: f64,
    pub phi: f64,
    pub x: bool,
    /// Selected by the fallback rather than drawn; not part of `log_prob`.
    pub forced: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    /// `steps[t]` holds every draw made at iteration `t`.
    pub steps: Vec<Vec<Draw>>,
    pub log_prob: f64,
    /// `(iteration, index)` of forced selections.
    pub forced_steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn draws(&self) -> impl Iterator<Item = &Draw> {
        self.steps.iter().flatten()
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub grammar: Grammar,
    pub trajectory: Trajectory,
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln P(X = x)` for an edge with potential `f`, where `P(X = 1) = sigmoid(-f)`.
pub fn draw_log_prob(f: f64, x: bool) -> f64 {
    if x {
        -softplus(f)
    } else {
        -softplus(-f)
    }
}

/// Connected components of the nodes touched by `edges`, each sorted, in
/// order of their smallest node.
fn components(h: &MolHypergraph, edges: &[EdgeId]) -> Vec<BTreeSet<NodeId>> {
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<NodeId, NodeId>, x: NodeId) -> NodeId {
        let p = parent[&x];
        if p == x {
            return x;
        }
        let r = find(parent, p);
        parent.insert(x, r);
        r
    }
    for &e in edges {
        let nodes = h.edge(e).unwrap().distinct_nodes();
        for &n in &nodes {
            parent.entry(n).or_insert(n);
        }
        for w in nodes.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent.insert(a.max(b), a.min(b));
            }
        }
    }
    let mut groups: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let nodes: Vec<NodeId> = parent.keys().copied().collect();
    for n in nodes {
        let r = find(&mut parent, n);
        groups.entry(r).or_default().insert(n);
    }
    let mut out: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
    out.sort_by_key(|c| *c.iter().next().unwrap());
    out
}

/// Builds a grammar from all molecules at once. Every iteration draws
/// `X ~ Bernoulli(phi)` for each remaining edge of each unfinished molecule,
/// contracts the connected components of the selected edges, and repeats
/// until each molecule is a single non-terminal.
pub fn sample_episode(
    net: &PotentialNet,
    molecules: &[(Option<String>, MolGraph)],
    seed: u64,
) -> Result<Episode, LearnError> {
    if molecules.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let mut builder = GrammarBuilder::new();
    let mut state: Vec<(usize, MolHypergraph)> = Vec::with_capacity(molecules.len());
    for (name, mol) in molecules {
        state.push((builder.start_molecule(name.clone(), mol), build_hypergraph(mol)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = vec![true; molecules.len()];
    let mut traj = Trajectory::default();

    while active.iter().any(|&a| a) {
        let t = traj.steps.len();
        let mut draws: Vec<Draw> = Vec::new();
        for m in 0..molecules.len() {
            if !active[m] {
                continue;
            }
            let (idx, h) = &state[m];
            let idx = *idx;
            if h.edge_count() == 0 {
                let whole: BTreeSet<NodeId> = h.node_ids().into_iter().collect();
                let (next, _) = builder.contract(idx, h, &whole)?;
                state[m].1 = next;
                active[m] = false;
                continue;
            }
            let scored: Vec<(EdgeId, Vec<f64>, f64)> = featurize_all(h, net.input_dim())
                .into_iter()
                .map(|(e, f)| {
                    let pot = net.potential(&f)?;
                    Ok((e, f, pot))
                })
                .collect::<Result<_, LearnError>>()?;
            let mut selected: Vec<EdgeId> = Vec::new();
            for attempt in 0..=MAX_RESAMPLES {
                for (e, f, pot) in &scored {
                    let phi = sigmoid(-pot);
                    let x = rng.gen::<f64>() < phi;
                    traj.log_prob += draw_log_prob(*pot, x);
                    if x {
                        selected.push(*e);
                    }
                    draws.push(Draw {
                        molecule: m,
                        edge: *e,
                        attempt,
                        features: f.clone(),
                        potential: *pot,
                        phi,
                        x,
                        forced: false,
                    });
                }
                if !selected.is_empty() {
                    break;
                }
            }
            if selected.is_empty() {
                // Highest phi is lowest potential; ties go to the lower id.
                let (e, f, pot) = scored
                    .iter()
                    .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
                    .unwrap();
                traj.forced_steps.push((t, draws.len()));
                draws.push(Draw {
                    molecule: m,
                    edge: *e,
                    attempt: MAX_RESAMPLES + 1,
                    features: f.clone(),
                    potential: *pot,
                    phi: sigmoid(-pot),
                    x: true,
                    forced: true,
                });
                selected.push(*e);
            }
            let mut h = state[m].1.clone();
            for component in components(&h, &selected) {
                h = builder.contract(idx, &h, &component)?.0;
            }
            if h.node_count() == 1 && h.edge_count() == 0 && !h.is_terminal_only() {
                active[m] = false;
            }
            state[m].1 = h;
        }
        traj.steps.push(draws);
    }
    Ok(Episode {
        grammar: builder.finish()?,
        trajectory: traj,
    })
}

/// `ln p(X)` of the recorded draws re-scored under `net`.
pub fn log_prob_at(net: &PotentialNet, traj: &Trajectory) -> Result<f64, LearnError> {
    let mut total = 0.0;
    for d in traj.draws().filter(|d| !d.forced) {
        total += draw_log_prob(net.potential(&d.features)?, d.x);
    }
    Ok(total)
}

/// `d ln p(X) / d theta` at the recorded draws, scaled by `scale` and added
/// to `grad`. Each draw contributes `(phi - x) dF/dtheta`.
pub fn accumulate_log_prob_gradient(
    net: &PotentialNet,
    traj: &Trajectory,
    scale: f64,
    grad: &mut [f64],
) -> Result<(), LearnError> {
    for d in traj.draws().filter(|d| !d.forced) {
        let (pot, trace) = net.forward(&d.features)?;
        let phi = sigmoid(-pot);
        let x = if d.x { 1.0 } else { 0.0 };
        net.accumulate_gradient(&trace, scale * (phi - x), grad);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn data(smiles: &[&str]) -> Vec<(Option<String>, MolGraph)> {
        smiles.iter().map(|s| (Some(s.to_string()), parse_smiles(s).unwrap())).collect()
    }

    /// A net whose potential is the constant `c`.
    fn constant_net(dim: usize, c: f64) -> PotentialNet {
        let mut net = PotentialNet::with_hidden(dim, [4, 3], 0);
        let n = net.param_count();
        let p = net.params_mut();
        p[n - 4..n - 1].iter_mut().for_each(|w| *w = 0.0);
        p[n - 1] = c;
        net
    }

    #[test]
    fn always_select_contracts_in_one_iteration() {
        let d = data(&["OCCO", "O=C=NCCCCCCN=C=O", "OCCO", "C"]);
        let ep = sample_episode(&constant_net(64, -60.0), &d, 1).unwrap();
        assert_eq!(ep.trajectory.steps.len(), 1);
        // One initial rule per distinct molecule.
        assert_eq!(ep.grammar.len(), 3);
        assert!(ep.grammar.rules().iter().all(|r| r.initial));
        for (der, (_, mol)) in ep.grammar.provenance().iter().zip(&d) {
            assert_eq!(ep.grammar.replay(der).unwrap().canonical_key(), mol.canonical_key());
        }
    }

    #[test]
    fn never_select_falls_back_and_terminates() {
        let d = data(&["OCCO", "c1ccccc1CC(=O)O"]);
        let ep = sample_episode(&constant_net(64, 60.0), &d, 1).unwrap();
        assert!(!ep.trajectory.forced_steps.is_empty());
        let edges: usize = d.iter().map(|(_, m)| build_hypergraph(m).edge_count()).sum();
        assert!(ep.trajectory.steps.len() <= edges);
        for (der, (_, mol)) in ep.grammar.provenance().iter().zip(&d) {
            assert_eq!(ep.grammar.replay(der).unwrap().canonical_key(), mol.canonical_key());
        }
        for &(t, i) in &ep.trajectory.forced_steps {
            assert!(ep.trajectory.steps[t][i].forced);
        }
    }

    #[test]
    fn log_prob_matches_product_formula() {
        let net = PotentialNet::with_hidden(64, [16, 8], 5);
        let ep = sample_episode(&net, &data(&["OCCO"]), 11).unwrap();
        let oracle: f64 = ep
            .trajectory
            .draws()
            .filter(|d| !d.forced)
            .map(|d| if d.x { d.phi.ln() } else { (1.0 - d.phi).ln() })
            .sum();
        assert!((ep.trajectory.log_prob - oracle).abs() < 1e-12);
        assert!((log_prob_at(&net, &ep.trajectory).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_input() {
        let net = constant_net(64, 0.0);
        assert!(matches!(sample_episode(&net, &[], 0), Err(LearnError::EmptyDataset)));
    }
}
