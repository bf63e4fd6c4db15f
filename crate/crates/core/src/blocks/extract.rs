use std::collections::HashSet;

use crate::molgraph::{
    canonical_smiles, find_functional_groups, longest_aliphatic_chain, parse_smiles, Atom, Bond,
    BondOrder, Element, GroupKind, Molecule,
};

use super::Candidate;

/// Cuts every ester and amide linkage. The acyl side is capped as a
/// carboxylic acid, the oxygen side as a hydroxyl and the nitrogen side as
/// an amine.
pub fn cleave_linkages(mol: &Molecule) -> Vec<Molecule> {
    let cuts: Vec<(usize, usize)> = find_functional_groups(mol)
        .into_iter()
        .filter_map(|h| match h.kind {
            GroupKind::Ester => Some((h.atoms[0], h.atoms[2])),
            GroupKind::Amide => Some((h.atoms[0], h.atoms[2])),
            _ => None,
        })
        .collect();
    if cuts.is_empty() {
        return Vec::new();
    }
    let mut atoms = mol.atoms().to_vec();
    let mut bonds: Vec<Bond> = mol
        .bonds()
        .iter()
        .filter(|b| !cuts.iter().any(|&(c, x)| (b.a == c && b.b == x) || (b.a == x && b.b == c)))
        .copied()
        .collect();
    for &(c, x) in &cuts {
        atoms[x].hydrogens += 1;
        atoms.push(Atom::new(Element::O).with_hydrogens(1));
        bonds.push(Bond::new(c, atoms.len() - 1, BondOrder::Single));
    }
    let capped = Molecule::new(atoms, bonds).expect("capping keeps valences");
    capped.fragments().into_iter().map(|(m, _)| m).collect()
}

#[derive(Debug, Clone, Default)]
pub struct TailExtraction {
    /// Unique tails in first-seen order.
    pub tails: Vec<Molecule>,
    pub lipids_read: usize,
    pub lipids_without_linkage: usize,
    pub short_fragments: usize,
    pub duplicates: usize,
    pub malformed: Vec<(usize, String)>,
}

pub fn extract_tails(lipids: &[Candidate], min_chain: usize) -> TailExtraction {
    let mut out = TailExtraction::default();
    let mut seen = HashSet::new();
    for c in lipids {
        let mol = match parse_smiles(&c.smiles) {
            Ok(m) => m,
            Err(e) => {
                out.malformed.push((c.line, e.to_string()));
                continue;
            }
        };
        out.lipids_read += 1;
        let fragments = cleave_linkages(&mol);
        if fragments.is_empty() {
            out.lipids_without_linkage += 1;
        }
        for f in fragments {
            if longest_aliphatic_chain(&f) < min_chain {
                out.short_fragments += 1;
            } else if seen.insert(canonical_smiles(&f)) {
                out.tails.push(f);
            } else {
                out.duplicates += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::read_candidates;

    fn tails(text: &str) -> Vec<String> {
        extract_tails(&read_candidates(text.as_bytes()).unwrap(), 6)
            .tails
            .iter()
            .map(canonical_smiles)
            .collect()
    }

    fn canon(s: &str) -> String {
        canonical_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn ester_cleaved_to_acid() {
        assert_eq!(tails("CCCCCCCC(=O)OCC"), vec![canon("CCCCCCCC(=O)O")]);
    }

    #[test]
    fn no_linkage_no_tails() {
        let out = extract_tails(&read_candidates("CCCCCCCCCCN".as_bytes()).unwrap(), 6);
        assert!(out.tails.is_empty());
        assert_eq!(out.lipids_without_linkage, 1);
    }

    #[test]
    fn duplicates_collapse() {
        let t = tails("CCCCCCCC(=O)OCC\nCCCCCCCC(=O)OCCN(C)C\n");
        assert_eq!(t, vec![canon("CCCCCCCC(=O)O")]);
    }

    #[test]
    fn both_sides_capped() {
        let t = tails("CCCCCCCC(=O)OCCCCCCCCC\nCCCCCCCCCC(=O)NCCCCCCC");
        assert_eq!(
            t,
            vec![
                canon("CCCCCCCC(=O)O"),
                canon("OCCCCCCCCC"),
                canon("CCCCCCCCCC(=O)O"),
                canon("NCCCCCCC")
            ]
        );
    }
}
