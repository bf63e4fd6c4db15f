mod common;

use common::*;
use lipidgen::blocks::BuildingBlockPool;
use lipidgen::dag::{deserialize, serialize, ProductSource, SynthesisDag};
use lipidgen::datagen::{split_dataset, stream_rng, SynthesisDataset, TailWeights};
use lipidgen::generator::{Constraints, PoolView};
use lipidgen::molgraph::{ecfp_fingerprint, graph_edit_distance, tanimoto, Molecule};
use lipidgen::properties::{net_charge, PkaProfile, PkaSite, SiteRole};
use lipidgen::reactions::TemplateEngine;
use lipidgen::{canonical_smiles, parse_smiles};
use proptest::prelude::*;
use rand::seq::SliceRandom;

/// Random acyclic SMILES over C, N, O with a few ring and acid leaves.
fn tree_smiles(max_atoms: usize) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("C".to_string()),
        Just("O".to_string()),
        Just("N".to_string()),
        Just("C(=O)O".to_string()),
        Just("C1CC1".to_string()),
        Just("c1ccccc1".to_string()),
        Just("[NH3+]".to_string()),
    ];
    leaf.prop_recursive(4, max_atoms as u32, 3, |inner| {
        (prop::sample::select(vec!["C", "N", "CC"]), prop::collection::vec(inner, 1..3)).prop_map(|(center, kids)| {
            // N takes at most two substituents here, C three
            let cap = if center == "N" { 2 } else { 3 };
            let kids = &kids[..kids.len().min(cap)];
            let mut s = center.to_string();
            for (i, k) in kids.iter().enumerate() {
                if i + 1 < kids.len() {
                    s.push_str(&format!("({k})"));
                } else {
                    s.push_str(k);
                }
            }
            s
        })
    })
}

fn small_pool() -> BuildingBlockPool {
    BuildingBlockPool::from_smiles(
        &["OCCN(CCO)CCO", "NCCO", "OCCCN(C)C"],
        &["CCCCCCCCCC(=O)O", "CCCCCCCCCCCC(=O)O", "CCCCCCCCO", "CCCCCCCCCN"],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_ignores_atom_order(smiles in tree_smiles(12), seed in any::<u64>()) {
        let m = parse_smiles(&smiles).unwrap();
        let canon = canonical_smiles(&m);
        let mut order: Vec<usize> = (0..m.atom_count()).collect();
        order.shuffle(&mut stream_rng(seed, 0));
        prop_assert_eq!(canonical_smiles(&m.permuted(&order)), canon.clone());
        let back = parse_smiles(&canon).unwrap();
        prop_assert!(isomorphic(&to_petgraph(&m), &to_petgraph(&back)));
        prop_assert_eq!(canonical_smiles(&back), canon);
    }

    #[test]
    fn tanimoto_is_a_similarity(a in tree_smiles(10), b in tree_smiles(10)) {
        let fa = ecfp_fingerprint(&parse_smiles(&a).unwrap(), 2, 1024);
        let fb = ecfp_fingerprint(&parse_smiles(&b).unwrap(), 2, 1024);
        let ab = tanimoto(&fa, &fb).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, tanimoto(&fb, &fa).unwrap());
        prop_assert_eq!(tanimoto(&fa, &fa).unwrap(), 1.0);
    }

    #[test]
    fn edit_distance_is_a_metric(a in tree_smiles(3), b in tree_smiles(3), c in tree_smiles(3)) {
        let [a, b, c]: [Molecule; 3] = [a, b, c].map(|s| parse_smiles(&s).unwrap());
        let d = |x: &Molecule, y: &Molecule| graph_edit_distance(x, y, 1000).unwrap().value().unwrap();
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn net_charge_falls_with_ph(
        sites in prop::collection::vec((-5.0f64..20.0, any::<bool>()), 0..6),
        ph in 0.0f64..14.0,
        step in 0.0f64..3.0,
    ) {
        let profile = PkaProfile::new(
            sites.iter().enumerate().map(|(atom, &(pka, base))| PkaSite {
                atom,
                pka,
                role: if base { SiteRole::Base } else { SiteRole::Acid },
            }).collect(),
        ).unwrap();
        let bases = profile.bases().count() as f64;
        let acids = profile.acids().count() as f64;
        let q = net_charge(&profile, ph);
        prop_assert!(q <= bases && q >= -acids);
        prop_assert!(net_charge(&profile, ph + step) <= q + 1e-12);
    }

    #[test]
    fn random_dags_round_trip(seed in any::<u64>(), max_tails in 1usize..4) {
        let pool = small_pool();
        let view = PoolView::new(&pool, 64);
        let c = Constraints { max_tails, ..Constraints::default() };
        let seq = random_actions(&mut stream_rng(seed, 0), &view, &c);
        let dag = deserialize(&seq, &pool, ProductSource::Predictor(&ChainPredictor)).unwrap();
        prop_assert!(dag.is_valid());
        prop_assert_eq!(serialize(&dag).unwrap(), seq.clone());
        let products = product_smiles(&dag);
        prop_assert_eq!(&deserialize(&seq, &pool, ProductSource::Transcript(&products)).unwrap(), &dag);
        prop_assert_eq!(&SynthesisDag::from_json_line(&dag.to_json_line()).unwrap(), &dag);
    }

    #[test]
    fn reactions_conserve_atoms(h in 0usize..3, t in 0usize..4) {
        let pool = small_pool();
        let head = pool.heads().nth(h).unwrap();
        let tail = pool.tails().nth(t).unwrap();
        let o = TemplateEngine::default().react(&head.molecule, &tail.molecule);
        prop_assume!(o.is_ok());
        let outs: Vec<&Molecule> = o.products.iter().chain(&o.by_products).collect();
        let atoms: usize = outs.iter().map(|m| m.atom_count()).sum();
        let hs: usize = outs.iter().map(|m| m.hydrogen_count()).sum();
        prop_assert_eq!(atoms, head.molecule.atom_count() + tail.molecule.atom_count());
        prop_assert_eq!(hs, head.molecule.hydrogen_count() + tail.molecule.hydrogen_count());
    }

    #[test]
    fn tail_weights_text_round_trip(w in prop::array::uniform3(0.0f64..50.0)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let tw = TailWeights(w);
        prop_assert_eq!(tw.to_string().parse::<TailWeights>().unwrap(), tw);
    }

    #[test]
    fn splits_partition_the_dataset(n in 1usize..60, seed in any::<u64>()) {
        let pool = small_pool();
        let view = PoolView::new(&pool, 64);
        let dags: Vec<SynthesisDag> = (0..n as u64)
            .map(|i| {
                let seq = random_actions(&mut stream_rng(i, 1), &view, &Constraints::default());
                deserialize(&seq, &pool, ProductSource::Predictor(&ChainPredictor)).unwrap()
            })
            .collect();
        let ds = SynthesisDataset::new(dags.clone());
        let parts = split_dataset(&ds, [0.8, 0.1, 0.1], seed).unwrap();
        let mut all: Vec<String> = parts.iter().flat_map(|p| p.dags.iter().map(|d| d.to_json_line())).collect();
        let mut want: Vec<String> = dags.iter().map(|d| d.to_json_line()).collect();
        all.sort();
        want.sort();
        prop_assert_eq!(all, want);
    }
}
