use std::collections::VecDeque;

use thiserror::Error;

use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer bond order; aromatic bonds count as one here and receive their
    /// extra electron through the per-atom aromatic correction.
    pub fn valence_contribution(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Total attached hydrogens (explicit bracket count or derived implicit count).
    pub hydrogens: u8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            hydrogens: 0,
            aromatic: false,
        }
    }

    pub fn with_hydrogens(mut self, h: u8) -> Self {
        self.hydrogens = h;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MolError {
    #[error("bond references atom {0} which does not exist")]
    AtomIndex(usize),
    #[error("bond joins atom {0} to itself")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("formal charge {charge} on atom {atom} outside [-4, 4]")]
    ChargeOutOfRange { atom: usize, charge: i8 },
    #[error("valence violation at atom {atom} ({element}): {used} exceeds {max}")]
    Valence {
        atom: usize,
        element: Element,
        used: u8,
        max: u8,
    },
    #[error("aromatic flag on element {element} at atom {atom}")]
    AromaticElement { atom: usize, element: Element },
    #[error("molecule has no atoms")]
    Empty,
}

/// Attributed molecular graph with hydrogens stored as per-atom counts.
#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    source_smiles: Option<String>,
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.bonds == other.bonds
    }
}

impl Molecule {
    /// Builds a molecule and checks structural and valence invariants.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, MolError> {
        let mol = Self::from_parts(atoms, bonds)?;
        mol.check_valence()?;
        Ok(mol)
    }

    /// Builds a molecule checking only graph structure (no valence check).
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, MolError> {
        if atoms.is_empty() {
            return Err(MolError::Empty);
        }
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= n {
                return Err(MolError::AtomIndex(bond.a));
            }
            if bond.b >= n {
                return Err(MolError::AtomIndex(bond.b));
            }
            if bond.a == bond.b {
                return Err(MolError::SelfBond(bond.a));
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(MolError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        for (i, atom) in atoms.iter().enumerate() {
            if !(-4..=4).contains(&atom.charge) {
                return Err(MolError::ChargeOutOfRange {
                    atom: i,
                    charge: atom.charge,
                });
            }
            if atom.aromatic && !atom.element.can_be_aromatic() {
                return Err(MolError::AromaticElement {
                    atom: i,
                    element: atom.element,
                });
            }
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            source_smiles: None,
        })
    }

    pub fn with_source(mut self, smiles: impl Into<String>) -> Self {
        self.source_smiles = Some(smiles.into());
        self
    }

    pub fn source_smiles(&self) -> Option<&str> {
        self.source_smiles.as_deref()
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

    pub fn hydrogen_count(&self) -> usize {
        self.atoms.iter().map(|a| a.hydrogens as usize).sum()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    pub fn count_element(&self, e: Element) -> usize {
        self.atoms.iter().filter(|a| a.element == e).count()
    }

    /// Bond-order sum including the aromatic correction, excluding hydrogens.
    pub fn bonded_valence(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        let mut sum = 0u8;
        let mut n_arom = 0u8;
        for &(_, bi) in &self.adjacency[i] {
            let order = self.bonds[bi].order;
            if order == BondOrder::Aromatic {
                n_arom += 1;
            }
            sum += order.valence_contribution();
        }
        if atom.aromatic && atom.element == Element::C && n_arom > 0 {
            sum += 1;
        }
        sum
    }

    pub fn check_valence(&self) -> Result<(), MolError> {
        for (i, atom) in self.atoms.iter().enumerate() {
            let used = self.bonded_valence(i) + atom.hydrogens;
            let max = atom.element.max_valence(atom.charge);
            if used > max {
                return Err(MolError::Valence {
                    atom: i,
                    element: atom.element,
                    used,
                    max,
                });
            }
        }
        Ok(())
    }

    pub fn is_valence_valid(&self) -> bool {
        self.check_valence().is_ok()
    }

    /// Implicit hydrogen count the SMILES reader assigns to an unbracketed atom
    /// with this element, aromaticity and bond environment. `None` when the
    /// bonds alone already exceed every allowed valence.
    pub fn implicit_hydrogens(&self, i: usize) -> Option<u8> {
        let atom = &self.atoms[i];
        let used = self.bonded_valence(i);
        default_hydrogens(atom.element, atom.aromatic, used)
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Connected components as sorted atom index lists, ordered by smallest index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on `keep` (in the given order) plus the old→new index map.
    pub fn subgraph(&self, keep: &[usize]) -> (Molecule, Vec<Option<usize>>) {
        let mut map = vec![None; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = Some(new);
        }
        let atoms = keep.iter().map(|&i| self.atoms[i]).collect();
        let bonds = self
            .bonds
            .iter()
            .filter_map(|b| match (map[b.a], map[b.b]) {
                (Some(a), Some(b2)) => Some(Bond::new(a, b2, b.order)),
                _ => None,
            })
            .collect();
        let mol = Molecule::from_parts(atoms, bonds).expect("induced subgraph of a valid graph");
        (mol, map)
    }

    /// Splits into connected fragments; each fragment keeps its atoms in original order.
    pub fn fragments(&self) -> Vec<(Molecule, Vec<usize>)> {
        self.components()
            .into_iter()
            .map(|comp| {
                let (mol, _) = self.subgraph(&comp);
                (mol, comp)
            })
            .collect()
    }

    /// Reorders atoms: new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule {
        assert_eq!(order.len(), self.atoms.len());
        let (mol, _) = self.subgraph(order);
        mol
    }

    /// Unweighted shortest-path distances from `start`; `usize::MAX` when unreachable.
    pub fn distances_from(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.atoms.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Per-bond flag: true when the bond lies on a cycle (is not a bridge).
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut is_ring = vec![true; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        // iterative Tarjan bridge finding; stack holds (vertex, parent bond, next neighbor slot)
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, parent_bond, ref mut slot)) = stack.last_mut() {
                if *slot < self.adjacency[u].len() {
                    let (v, bi) = self.adjacency[u][*slot];
                    *slot += 1;
                    if bi == parent_bond {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bi, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            is_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        is_ring
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring_bonds = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (b, &r) in self.bonds.iter().zip(&ring_bonds) {
            if r {
                out[b.a] = true;
                out[b.b] = true;
            }
        }
        out
    }

    /// Cyclomatic number (number of independent rings).
    pub fn ring_count(&self) -> usize {
        self.bonds.len() + self.components().len() - self.atoms.len()
    }

    /// Smallest cycle through each ring bond, deduplicated, as sorted atom lists.
    pub fn smallest_rings(&self) -> Vec<Vec<usize>> {
        let ring_bonds = self.ring_bonds();
        let mut rings: Vec<Vec<usize>> = Vec::new();
        for (bi, bond) in self.bonds.iter().enumerate() {
            if !ring_bonds[bi] {
                continue;
            }
            // shortest path from b to a avoiding this bond
            let n = self.atoms.len();
            let mut prev = vec![usize::MAX; n];
            let mut seen = vec![false; n];
            seen[bond.b] = true;
            let mut queue = VecDeque::from([bond.b]);
            while let Some(u) = queue.pop_front() {
                if u == bond.a {
                    break;
                }
                for &(v, bj) in &self.adjacency[u] {
                    if bj == bi || seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
            let mut cycle = vec![bond.a];
            let mut cur = bond.a;
            while cur != bond.b {
                cur = prev[cur];
                cycle.push(cur);
            }
            cycle.sort_unstable();
            if !rings.contains(&cycle) {
                rings.push(cycle);
            }
        }
        rings.sort();
        rings
    }

    /// Disjoint union; atoms of `other` are appended after those of `self`.
    pub fn disjoint_union(&self, other: &Molecule) -> Molecule {
        let offset = self.atoms.len();
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut bonds = self.bonds.clone();
        bonds.extend(
            other
                .bonds
                .iter()
                .map(|b| Bond::new(b.a + offset, b.b + offset, b.order)),
        );
        Molecule::from_parts(atoms, bonds).expect("union of valid graphs")
    }
}

/// Hydrogen count implied for an unbracketed atom given its bonded valence.
pub(crate) fn default_hydrogens(element: Element, aromatic: bool, used: u8) -> Option<u8> {
    if aromatic {
        let max = element.max_valence(0);
        if used > max {
            return None;
        }
        // only aromatic carbon fills up with implicit hydrogens; n/o/s need [nH]
        return Some(if element == Element::C { max - used } else { 0 });
    }
    element
        .valences(0)
        .into_iter()
        .find(|&v| v >= used)
        .map(|v| v - used)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Molecule {
        let atoms = (0..n).map(|_| Atom::new(Element::C)).collect();
        let bonds = (1..n).map(|i| Bond::new(i - 1, i, BondOrder::Single)).collect();
        Molecule::new(atoms, bonds).unwrap()
    }

    #[test]
    fn rejects_duplicate_and_self_bonds() {
        let atoms = vec![Atom::new(Element::C), Atom::new(Element::C)];
        let dup = vec![
            Bond::new(0, 1, BondOrder::Single),
            Bond::new(1, 0, BondOrder::Single),
        ];
        assert_eq!(
            Molecule::new(atoms.clone(), dup).unwrap_err(),
            MolError::DuplicateBond(1, 0)
        );
        let selfb = vec![Bond::new(0, 0, BondOrder::Single)];
        assert_eq!(Molecule::new(atoms, selfb).unwrap_err(), MolError::SelfBond(0));
    }

    #[test]
    fn valence_violation_detected() {
        let atoms = vec![Atom::new(Element::O).with_hydrogens(1), Atom::new(Element::C)];
        let bonds = vec![Bond::new(0, 1, BondOrder::Double)];
        assert!(matches!(
            Molecule::new(atoms, bonds),
            Err(MolError::Valence { atom: 0, .. })
        ));
    }

    #[test]
    fn bridges_in_chain_and_ring() {
        let c = chain(4);
        assert!(c.ring_bonds().iter().all(|&r| !r));
        assert_eq!(c.ring_count(), 0);

        let atoms = (0..4).map(|_| Atom::new(Element::C)).collect();
        let bonds = vec![
            Bond::new(0, 1, BondOrder::Single),
            Bond::new(1, 2, BondOrder::Single),
            Bond::new(2, 0, BondOrder::Single),
            Bond::new(2, 3, BondOrder::Single),
        ];
        let m = Molecule::from_parts(atoms, bonds).unwrap();
        assert_eq!(m.ring_bonds(), vec![true, true, true, false]);
        assert_eq!(m.ring_atoms(), vec![true, true, true, false]);
        assert_eq!(m.ring_count(), 1);
        assert_eq!(m.smallest_rings(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn fragments_split_components() {
        let a = chain(3);
        let b = chain(2);
        let u = a.disjoint_union(&b);
        let frags = u.fragments();
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0].1, vec![0, 1, 2]);
        assert_eq!(frags[1].1, vec![3, 4]);
    }
}
