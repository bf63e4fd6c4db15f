#![allow(dead_code)]

use std::path::PathBuf;

use lipidgen::blocks::BuildingBlockPool;
use lipidgen::dag::{Action, SynthesisDag};
use lipidgen::generator::{Constraints, GrammarState, PoolView};
use lipidgen::molgraph::{Atom, BondOrder, Molecule};
use lipidgen::parse_smiles;
use lipidgen::reactions::{ReactionOutcome, ReactionPredictor};
use petgraph::graph::UnGraph;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn bundled_pool() -> BuildingBlockPool {
    let read = |name: &str| std::fs::read_to_string(data_dir().join(name)).unwrap();
    let heads = read("heads.smi");
    let tails = read("tails.smi");
    let h: Vec<&str> = heads.lines().filter(|l| !l.trim().is_empty()).collect();
    let t: Vec<&str> = tails.lines().filter(|l| !l.trim().is_empty()).collect();
    BuildingBlockPool::from_smiles(&h, &t).unwrap()
}

/// Always succeeds: the product is a chain with one carbon per reactant atom.
/// Lets grammar-level tests ignore chemistry.
pub struct ChainPredictor;

impl ReactionPredictor for ChainPredictor {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome {
        let n: usize = reactants.iter().map(|m| m.atom_count()).sum();
        let mut o = ReactionOutcome::no_reaction();
        o.status = lipidgen::reactions::OutcomeStatus::Ok;
        o.products = vec![parse_smiles(&"C".repeat(n.clamp(1, 60))).unwrap()];
        o
    }
}

/// Random walk through the action grammar, uniform over valid choices.
pub fn random_actions<R: Rng>(rng: &mut R, view: &PoolView, c: &Constraints) -> Vec<Action> {
    let mut g = GrammarState::new();
    let mut seq = Vec::new();
    while let Some(d) = g.decision(c, view) {
        let valid: Vec<usize> = d.valid().iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| i).collect();
        let idx = valid[rng.gen_range(0..valid.len())];
        seq.push(d.action_at(idx));
        g.apply_index(&d, idx);
    }
    seq
}

pub fn product_smiles(dag: &SynthesisDag) -> Vec<String> {
    dag.products().map(|n| n.smiles.clone()).collect()
}

pub type Labelled = UnGraph<(u8, i8, bool, u8), BondOrder>;

pub fn to_petgraph(m: &Molecule) -> Labelled {
    let mut g = UnGraph::with_capacity(m.atom_count(), m.bond_count());
    let idx: Vec<_> = m.atoms().iter().map(|a| g.add_node(label(a))).collect();
    for b in m.bonds() {
        g.add_edge(idx[b.a], idx[b.b], b.order);
    }
    g
}

fn label(a: &Atom) -> (u8, i8, bool, u8) {
    (a.element.atomic_number(), a.charge, a.aromatic, a.hydrogens)
}

pub fn isomorphic(a: &Labelled, b: &Labelled) -> bool {
    petgraph::algo::is_isomorphic_matching(a, b, |x, y| x == y, |x, y| x == y)
}

/// Unit-cost edit distance by trying every partial injection of `a`'s atoms
/// into `b`'s.
pub fn brute_force_ged(a: &Molecule, b: &Molecule) -> usize {
    let la: Vec<_> = a.atoms().iter().map(|x| (x.element, x.charge, x.aromatic)).collect();
    let lb: Vec<_> = b.atoms().iter().map(|x| (x.element, x.charge, x.aromatic)).collect();
    let bond = |m: &Molecule, i: usize, j: usize| m.bond_between(i, j).map(|x| x.order);
    let mut best = usize::MAX;
    let mut map: Vec<Option<usize>> = vec![None; la.len()];
    let mut used = vec![false; lb.len()];
    fn rec(
        i: usize,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut usize,
        cost: &dyn Fn(&[Option<usize>], &[bool]) -> usize,
    ) {
        if i == map.len() {
            *best = (*best).min(cost(map, used));
            return;
        }
        map[i] = None;
        rec(i + 1, map, used, best, cost);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                map[i] = Some(j);
                rec(i + 1, map, used, best, cost);
                map[i] = None;
                used[j] = false;
            }
        }
    }
    let cost = |map: &[Option<usize>], used: &[bool]| {
        let mut c = 0;
        for (i, m) in map.iter().enumerate() {
            match m {
                None => c += 1,
                Some(j) if la[i] != lb[*j] => c += 1,
                _ => {}
            }
        }
        c += used.iter().filter(|u| !**u).count();
        for i in 0..la.len() {
            for k in i + 1..la.len() {
                let ea = bond(a, i, k);
                let eb = match (map[i], map[k]) {
                    (Some(x), Some(y)) => bond(b, x, y),
                    _ => None,
                };
                if ea != eb {
                    c += 1;
                }
            }
        }
        // edges of b between atoms that nothing maps onto, or with one such end
        let mut inverse = vec![false; lb.len()];
        for j in map.iter().flatten() {
            inverse[*j] = true;
        }
        for e in b.bonds() {
            if !inverse[e.a] || !inverse[e.b] {
                c += 1;
            }
        }
        c
    };
    rec(0, &mut map, &mut used, &mut best, &cost);
    best
}
