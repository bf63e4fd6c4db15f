use std::collections::VecDeque;

use super::element::Element;
use super::mol::Molecule;

/// Sum of standard atomic masses, implicit hydrogens included.
pub fn molecular_weight(mol: &Molecule) -> f64 {
    mol.atoms()
        .iter()
        .map(|a| a.element.mass() + a.hydrogens as f64 * Element::H.mass())
        .sum()
}

/// Per-atom coefficients of the additive partition estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogpTable {
    pub aliphatic_carbon: f64,
    pub aromatic_carbon: f64,
    pub nitrogen: f64,
    pub oxygen: f64,
    pub sulfur: f64,
    pub phosphorus: f64,
    pub halogen: f64,
    pub hydrogen: f64,
}

impl Default for LogpTable {
    fn default() -> Self {
        LogpTable {
            aliphatic_carbon: 0.36,
            aromatic_carbon: 0.30,
            nitrogen: -1.00,
            oxygen: -0.40,
            sulfur: 0.30,
            phosphorus: -0.50,
            halogen: 0.60,
            hydrogen: 0.0,
        }
    }
}

impl LogpTable {
    fn contribution(&self, element: Element, aromatic: bool) -> f64 {
        match element {
            Element::C if aromatic => self.aromatic_carbon,
            Element::C => self.aliphatic_carbon,
            Element::N => self.nitrogen,
            Element::O => self.oxygen,
            Element::S => self.sulfur,
            Element::P => self.phosphorus,
            e if e.is_halogen() => self.halogen,
            Element::H => self.hydrogen,
            _ => 0.0,
        }
    }
}

pub fn estimate_logp(mol: &Molecule) -> f64 {
    estimate_logp_with(mol, &LogpTable::default())
}

pub fn estimate_logp_with(mol: &Molecule, table: &LogpTable) -> f64 {
    mol.atoms()
        .iter()
        .map(|a| {
            table.contribution(a.element, a.aromatic) + a.hydrogens as f64 * table.hydrogen
        })
        .sum()
}

/// Non-aromatic carbons outside every ring.
pub fn aliphatic_chain_atoms(mol: &Molecule) -> Vec<bool> {
    let ring = mol.ring_atoms();
    mol.atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| a.element == Element::C && !a.aromatic && !ring[i])
        .collect()
}

/// Farthest atom from `start` moving only through `allowed` atoms, with the
/// path length counted in atoms (start included).
pub(crate) fn farthest_within(mol: &Molecule, start: usize, allowed: &[bool]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; mol.atom_count()];
    dist[start] = 1;
    let mut best = (start, 1);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in mol.neighbors(u) {
            if allowed[v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                if dist[v] > best.1 {
                    best = (v, dist[v]);
                }
                queue.push_back(v);
            }
        }
    }
    best
}

/// Number of carbons on the longest simple path of non-aromatic, non-ring carbons.
pub fn longest_aliphatic_chain(mol: &Molecule) -> usize {
    let allowed = aliphatic_chain_atoms(mol);
    let mut seen = vec![false; mol.atom_count()];
    let mut longest = 0;
    for start in 0..mol.atom_count() {
        if !allowed[start] || seen[start] {
            continue;
        }
        // the allowed atoms induce a forest: double sweep gives each tree's diameter
        let (far, _) = farthest_within(mol, start, &allowed);
        let (_, len) = farthest_within(mol, far, &allowed);
        longest = longest.max(len);
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in mol.neighbors(u) {
                if allowed[v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    longest
}

/// Counts of N, O and S atoms.
pub fn heteroatom_counts(mol: &Molecule) -> (usize, usize, usize) {
    (
        mol.count_element(Element::N),
        mol.count_element(Element::O),
        mol.count_element(Element::S),
    )
}
