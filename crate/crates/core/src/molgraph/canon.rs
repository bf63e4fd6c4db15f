//! Canonical atom ranking and canonical SMILES output.
//!
//! Ranks start from per-atom invariants (element, degree, charge, hydrogen
//! count, aromaticity) and are refined by sorted neighbour ranks until stable.
//! Remaining ties are broken by individualizing each member of the first tied
//! class in turn; the branch whose SMILES is lexicographically smallest wins.
//! Automorphisms discovered along the way prune equivalent branches.

use std::fmt::Write as _;

use super::mol::{default_hydrogens, BondOrder, Molecule};

/// Canonical SMILES of a molecule. Identical for every atom ordering of the same graph.
pub fn canonical_smiles(mol: &Molecule) -> String {
    canonicalize(mol).smiles
}

/// Canonical rank per atom (a permutation of `0..n`).
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    canonicalize(mol).ranks
}

#[derive(Debug, Clone)]
pub struct Canonical {
    pub smiles: String,
    pub ranks: Vec<usize>,
}

pub fn canonicalize(mol: &Molecule) -> Canonical {
    let mut ranks = initial_ranks(mol);
    refine(mol, &mut ranks);
    let mut search = Search {
        mol,
        best: None,
        automorphisms: Vec::new(),
    };
    let mut path = Vec::new();
    search.descend(ranks, &mut path);
    let (smiles, ranks, _) = search.best.expect("search visits at least one leaf");
    Canonical {
        smiles,
        ranks: ranks.into_iter().map(|r| r as usize).collect(),
    }
}

fn initial_ranks(mol: &Molecule) -> Vec<u32> {
    let keys: Vec<(u8, usize, i8, u8, bool)> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            (
                a.element.atomic_number(),
                mol.degree(i),
                a.charge,
                a.hydrogens,
                a.aromatic,
            )
        })
        .collect();
    ranks_from_keys(&keys)
}

/// Rank = number of atoms with a strictly smaller key.
fn ranks_from_keys<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0u32; keys.len()];
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && keys[order[pos - 1]] == keys[i] {
            ranks[i] = ranks[order[pos - 1]];
        } else {
            ranks[i] = pos as u32;
        }
    }
    ranks
}

fn class_count(ranks: &[u32]) -> usize {
    let mut seen: Vec<u32> = ranks.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn refine(mol: &Molecule, ranks: &mut Vec<u32>) {
    let mut classes = class_count(ranks);
    loop {
        let keys: Vec<(u32, Vec<(u32, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(u32, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (ranks[j], mol.bonds()[bi].order.code()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = ranks_from_keys(&keys);
        let next_classes = class_count(&next);
        *ranks = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
}

struct Search<'a> {
    mol: &'a Molecule,
    /// (smiles, ranks, emission order)
    best: Option<(String, Vec<u32>, Vec<usize>)>,
    /// automorphisms as atom -> image maps
    automorphisms: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn descend(&mut self, ranks: Vec<u32>, path: &mut Vec<usize>) {
        let n = ranks.len();
        // first tied class: smallest rank value shared by more than one atom
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r as usize] += 1;
        }
        let Some(target) = (0..n).find(|&r| counts[r] > 1) else {
            let (smiles, order) = write_with_ranks(self.mol, &ranks);
            match &self.best {
                Some((best, _, best_order)) if *best == smiles => {
                    let mut gamma = vec![0usize; n];
                    for (k, &a) in best_order.iter().enumerate() {
                        gamma[a] = order[k];
                    }
                    self.automorphisms.push(gamma);
                }
                Some((best, _, _)) if *best < smiles => {}
                _ => self.best = Some((smiles, ranks, order)),
            }
            return;
        };
        let members: Vec<usize> = (0..n).filter(|&i| ranks[i] as usize == target).collect();
        let mut tried: Vec<usize> = Vec::new();
        for &x in &members {
            if self.equivalent_to_tried(x, &tried, path) {
                continue;
            }
            let mut child = ranks.clone();
            for &y in &members {
                if y != x {
                    child[y] = target as u32 + 1;
                }
            }
            refine(self.mol, &mut child);
            path.push(x);
            self.descend(child, path);
            path.pop();
            tried.push(x);
        }
    }

    /// Whether `x` lies in the orbit of an already explored atom under the
    /// known automorphisms that fix every individualized atom on `path`.
    fn equivalent_to_tried(&self, x: usize, tried: &[usize], path: &[usize]) -> bool {
        if tried.is_empty() {
            return false;
        }
        let gens: Vec<&Vec<usize>> = self
            .automorphisms
            .iter()
            .filter(|g| path.iter().all(|&p| g[p] == p))
            .collect();
        if gens.is_empty() {
            return false;
        }
        // orbit of x by closure under the generators
        let mut orbit = vec![x];
        let mut k = 0;
        while k < orbit.len() {
            let a = orbit[k];
            for g in &gens {
                let b = g[a];
                if !orbit.contains(&b) {
                    orbit.push(b);
                }
            }
            k += 1;
        }
        orbit.iter().any(|a| tried.contains(a))
    }
}

/// Writes SMILES using a total atom order. Returns the string and the order in
/// which atoms were emitted.
fn write_with_ranks(mol: &Molecule, ranks: &[u32]) -> (String, Vec<usize>) {
    let n = mol.atom_count();
    let mut visited = vec![false; n];
    let mut parts: Vec<(u32, String, Vec<usize>)> = Vec::new();
    let mut roots: Vec<usize> = (0..n).collect();
    roots.sort_by_key(|&i| ranks[i]);
    for root in roots {
        if visited[root] {
            continue;
        }
        let mut writer = Writer::new(mol, ranks);
        writer.plan(root, &mut visited);
        let (s, order) = writer.emit(root);
        parts.push((ranks[root], s, order));
    }
    let mut out = String::new();
    let mut order = Vec::with_capacity(n);
    for (k, (_, s, o)) in parts.into_iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        out.push_str(&s);
        order.extend(o);
    }
    (out, order)
}

struct Writer<'a> {
    mol: &'a Molecule,
    ranks: &'a [u32],
    /// DFS tree children per atom in emission order
    children: Vec<Vec<usize>>,
    /// ring-closure partners per atom
    closures: Vec<Vec<usize>>,
}

impl<'a> Writer<'a> {
    fn new(mol: &'a Molecule, ranks: &'a [u32]) -> Self {
        let n = mol.atom_count();
        Writer {
            mol,
            ranks,
            children: vec![Vec::new(); n],
            closures: vec![Vec::new(); n],
        }
    }

    fn sorted_neighbors(&self, u: usize) -> Vec<usize> {
        let mut nb: Vec<usize> = self.mol.neighbors(u).iter().map(|&(v, _)| v).collect();
        nb.sort_by_key(|&v| self.ranks[v]);
        nb
    }

    fn plan(&mut self, root: usize, visited: &mut [bool]) {
        let n = self.mol.atom_count();
        let mut on_tree_edge = vec![usize::MAX; n];
        let mut stack = vec![(root, usize::MAX)];
        while let Some((u, parent)) = stack.pop() {
            if visited[u] {
                // reached twice: the edge parent-u closes a ring
                if parent != usize::MAX && on_tree_edge[u] != parent {
                    self.closures[u].push(parent);
                    self.closures[parent].push(u);
                }
                continue;
            }
            visited[u] = true;
            on_tree_edge[u] = parent;
            if parent != usize::MAX {
                self.children[parent].push(u);
            }
            let nb = self.sorted_neighbors(u);
            // push in reverse so the lowest-ranked neighbour is explored first
            for &v in nb.iter().rev() {
                if v == parent {
                    continue;
                }
                if visited[v] {
                    // back edge to an ancestor already emitted
                    if !self.closures[u].contains(&v) && on_tree_edge[u] != v {
                        self.closures[u].push(v);
                        self.closures[v].push(u);
                    }
                    continue;
                }
                stack.push((v, u));
            }
        }
        // drop duplicate closure records created by the two detection paths
        for c in &mut self.closures {
            c.sort_unstable();
            c.dedup();
        }
    }

    fn emit(&self, root: usize) -> (String, Vec<usize>) {
        let n = self.mol.atom_count();
        let mut out = String::new();
        let mut order = Vec::new();
        let mut emitted = vec![false; n];
        // open ring digits: (digit, from atom, to atom)
        let mut open: Vec<(usize, usize, usize)> = Vec::new();
        self.emit_atom(root, None, &mut out, &mut order, &mut emitted, &mut open);
        (out, order)
    }

    fn emit_atom(
        &self,
        u: usize,
        from: Option<usize>,
        out: &mut String,
        order: &mut Vec<usize>,
        emitted: &mut [bool],
        open: &mut Vec<(usize, usize, usize)>,
    ) {
        if let Some(p) = from {
            out.push_str(&self.bond_text(p, u));
        }
        out.push_str(&atom_text(self.mol, u));
        emitted[u] = true;
        order.push(u);

        let mut partners = self.closures[u].clone();
        partners.sort_by_key(|&v| self.ranks[v]);
        for v in partners {
            if emitted[v] {
                // close a ring opened at v
                let pos = open
                    .iter()
                    .position(|&(_, a, b)| a == v && b == u)
                    .expect("ring closure opened earlier");
                let (digit, _, _) = open.remove(pos);
                push_ring_digit(out, digit);
            } else {
                let digit = (1..).find(|d| !open.iter().any(|&(x, _, _)| x == *d)).unwrap();
                out.push_str(&self.bond_text(u, v));
                push_ring_digit(out, digit);
                open.push((digit, u, v));
            }
        }

        let kids = &self.children[u];
        for (k, &c) in kids.iter().enumerate() {
            let last = k + 1 == kids.len();
            if !last {
                out.push('(');
            }
            self.emit_atom(c, Some(u), out, order, emitted, open);
            if !last {
                out.push(')');
            }
        }
    }

    fn bond_text(&self, a: usize, b: usize) -> String {
        let bond = self.mol.bond_between(a, b).expect("bonded atoms");
        let both_aromatic = self.mol.atom(a).aromatic && self.mol.atom(b).aromatic;
        match bond.order {
            BondOrder::Single if both_aromatic => "-".into(),
            BondOrder::Single => String::new(),
            BondOrder::Aromatic if both_aromatic => String::new(),
            other => other.symbol().to_string(),
        }
    }
}

fn push_ring_digit(out: &mut String, digit: usize) {
    if digit < 10 {
        out.push(char::from(b'0' + digit as u8));
    } else {
        let _ = write!(out, "%{digit:02}");
    }
}

/// SMILES text for one atom; bracketed unless the reader would reconstruct it exactly.
pub(crate) fn atom_text(mol: &Molecule, i: usize) -> String {
    let atom = mol.atom(i);
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let implied = default_hydrogens(atom.element, atom.aromatic, mol.bonded_valence(i));
    if atom.element.is_organic_subset() && atom.charge == 0 && implied == Some(atom.hydrogens) {
        return symbol;
    }
    let mut s = String::from("[");
    s.push_str(&symbol);
    match atom.hydrogens {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "+{c}");
        }
        c => {
            let _ = write!(s, "-{}", -c);
        }
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn canon(s: &str) -> String {
        canonical_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn single_atom() {
        assert_eq!(canon("C"), "C");
    }

    #[test]
    fn permutation_invariant_simple() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C(C)(C)O"), canon("CC(O)C"));
        assert_eq!(canon("c1ccccc1O"), canon("Oc1ccccc1"));
    }

    #[test]
    fn round_trip_keeps_charges_and_hydrogens() {
        for s in [
            "C[NH3+]",
            "CC(=O)[O-]",
            "c1cc[nH]c1",
            "c1ccncc1",
            "C1CC2CCC1C2",
            "CS(=O)(=O)C",
            "c1ccccc1-c1ccccc1",
            "C=1CCC1",
            "C#N",
            "[Na+]",
        ] {
            let c = canon(s);
            let back = parse_smiles(&c).unwrap_or_else(|e| panic!("{s} -> {c}: {e}"));
            assert_eq!(canonical_smiles(&back), c, "{s}");
            let orig = parse_smiles(s).unwrap();
            assert_eq!(back.atom_count(), orig.atom_count());
            assert_eq!(back.bond_count(), orig.bond_count());
            assert_eq!(back.hydrogen_count(), orig.hydrogen_count(), "{s} -> {c}");
        }
    }

    #[test]
    fn symmetric_molecules_are_stable() {
        let a = canon("N(CCOC(=O)CCCCCCC)(CCOC(=O)CCCCCCC)CCOC(=O)CCCCCCC");
        let b = canon("CCCCCCCC(=O)OCCN(CCOC(=O)CCCCCCC)CCOC(=O)CCCCCCC");
        assert_eq!(a, b);
        // cubane: highly symmetric cage
        let cubane = "C12C3C4C1C5C2C3C45";
        let c = canon(cubane);
        let m = parse_smiles(cubane).unwrap();
        let rev: Vec<usize> = (0..m.atom_count()).rev().collect();
        assert_eq!(canonical_smiles(&m.permuted(&rev)), c);
    }

    #[test]
    fn ranks_are_a_permutation() {
        let m = parse_smiles("CC(C)CCN(C)C").unwrap();
        let mut r = canonical_ranks(&m);
        r.sort_unstable();
        assert_eq!(r, (0..m.atom_count()).collect::<Vec<_>>());
    }
}
