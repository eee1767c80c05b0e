//! Property tests over the bundled monomers and random relabellings.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grammol::grammar::{generate_batch, select_rule, GenerationConfig, Grammar};
use grammol::hypergraph::build_hypergraph;
use grammol::learn::{featurize_all, log_prob_at, normalize_rewards, sample_episode, PotentialNet};
use grammol::metrics::{self, fingerprint};
use grammol::molgraph::{builtin_dataset, parse_smiles, tanimoto_distance, MolGraph, BUILTIN_DATASETS};

fn pool() -> Vec<MolGraph> {
    BUILTIN_DATASETS
        .iter()
        .flat_map(|id| builtin_dataset(id).unwrap().molecules())
        .collect()
}

fn molecule() -> impl Strategy<Value = MolGraph> {
    prop::sample::select(pool())
}

/// A molecule together with a permutation of its atom indices.
fn relabelled() -> impl Strategy<Value = (MolGraph, Vec<usize>)> {
    molecule().prop_flat_map(|m| {
        let perm = Just((0..m.atom_count()).collect::<Vec<_>>()).prop_shuffle();
        (Just(m), perm)
    })
}

fn sorted_features(m: &MolGraph) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = featurize_all(&build_hypergraph(m), 64)
        .values()
        .map(|f| f.iter().map(|x| (x * 1e9).round() as i64 as u64).collect())
        .collect();
    rows.sort();
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_smiles_round_trips((m, perm) in relabelled()) {
        let p = m.permuted(&perm);
        prop_assert_eq!(p.canonical_smiles(), m.canonical_smiles());
        let back = parse_smiles(&m.canonical_smiles()).unwrap();
        prop_assert_eq!(back.canonical_key(), m.canonical_key());
        prop_assert!(metrics::is_valid(&p));
    }

    #[test]
    fn fingerprint_ignores_atom_order((m, perm) in relabelled()) {
        prop_assert_eq!(fingerprint(&m), fingerprint(&m.permuted(&perm)));
    }

    #[test]
    fn tanimoto_is_a_bounded_symmetric_semimetric(a in molecule(), b in molecule()) {
        let (fa, fb) = (fingerprint(&a), fingerprint(&b));
        let d = tanimoto_distance(&fa, &fb).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, tanimoto_distance(&fb, &fa).unwrap());
        prop_assert_eq!(tanimoto_distance(&fa, &fa).unwrap(), 0.0);
    }

    #[test]
    fn hypergraph_lifts_losslessly((m, perm) in relabelled()) {
        let p = m.permuted(&perm);
        let h = build_hypergraph(&p);
        prop_assert_eq!(h.node_count(), p.atom_count());
        prop_assert_eq!(h.to_molecule().unwrap().canonical_key(), m.canonical_key());
    }

    #[test]
    fn edge_features_do_not_depend_on_atom_order((m, perm) in relabelled()) {
        prop_assert_eq!(sorted_features(&m), sorted_features(&m.permuted(&perm)));
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_itself(
        a in prop::collection::vec(molecule(), 1..6),
        b in prop::collection::vec(molecule(), 1..6),
    ) {
        prop_assert_eq!(metrics::chamfer(&a, &a).unwrap(), 0.0);
        let ab = metrics::chamfer(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - metrics::chamfer(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn normalized_rewards_have_zero_mean(
        raw in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..12),
    ) {
        for col in 0..3 {
            let s: f64 = normalize_rewards(&raw).iter().map(|r| r[col]).sum();
            prop_assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_returns_a_candidate(
        flags in prop::collection::vec(any::<bool>(), 1..20),
        t in 0usize..100,
        alpha in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(select_rule(&flags, t, alpha, &mut rng) < flags.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episodes_terminate_and_reproduce_their_inputs(
        mols in prop::collection::vec(molecule(), 1..5),
        net_seed in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let data: Vec<_> = mols.iter().map(|m| (None, m.clone())).collect();
        let net = PotentialNet::new(64, net_seed);
        let ep = sample_episode(&net, &data, seed).unwrap();
        let g = &ep.grammar;

        prop_assert_eq!(g.provenance().len(), mols.len());
        for (d, m) in g.provenance().iter().zip(&mols) {
            prop_assert_eq!(g.replay(d).unwrap().canonical_key(), m.canonical_key());
        }
        let steps: usize = g.provenance().iter().map(|d| d.steps.len()).sum();
        prop_assert_eq!(g.total_count(), steps);
        prop_assert!(g.has_initial_rule());

        let replayed = log_prob_at(&net, &ep.trajectory).unwrap();
        prop_assert!((replayed - ep.trajectory.log_prob).abs() < 1e-9);

        let back = Grammar::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), g.to_json());
    }

    #[test]
    fn generated_molecules_are_valid(
        mols in prop::collection::vec(molecule(), 1..5),
        seed in any::<u64>(),
        gen_seed in any::<u64>(),
    ) {
        let data: Vec<_> = mols.iter().map(|m| (None, m.clone())).collect();
        let g = sample_episode(&PotentialNet::new(64, 1), &data, seed).unwrap().grammar;
        let cfg = GenerationConfig { seed: gen_seed, ..GenerationConfig::default() };
        let out = generate_batch(&g, &cfg, 20).unwrap();
        prop_assert!(!out.molecules.is_empty());
        for m in &out.molecules {
            prop_assert!(metrics::is_valid(m), "{}", m.canonical_smiles());
        }
    }
}
