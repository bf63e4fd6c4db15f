//! Hand-coded functional-group patterns.
//!
//! Matching runs in priority order (amide, ester, carboxylic acid, amines,
//! hydroxyl) and an atom claimed by an earlier match cannot anchor a later
//! one, so an ester oxygen is never reported as a hydroxyl and an amide
//! nitrogen never as an amine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::element::Element;
use super::mol::{BondOrder, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    AminePrimary,
    AmineSecondary,
    AmineTertiary,
    AmineAromatic,
    CarboxylicAcid,
    Hydroxyl,
    Ester,
    Amide,
}

impl GroupKind {
    pub const ALL: [GroupKind; 8] = [
        GroupKind::AminePrimary,
        GroupKind::AmineSecondary,
        GroupKind::AmineTertiary,
        GroupKind::AmineAromatic,
        GroupKind::CarboxylicAcid,
        GroupKind::Hydroxyl,
        GroupKind::Ester,
        GroupKind::Amide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::AminePrimary => "amine_primary",
            GroupKind::AmineSecondary => "amine_secondary",
            GroupKind::AmineTertiary => "amine_tertiary",
            GroupKind::AmineAromatic => "amine_aromatic",
            GroupKind::CarboxylicAcid => "carboxylic_acid",
            GroupKind::Hydroxyl => "hydroxyl",
            GroupKind::Ester => "ester",
            GroupKind::Amide => "amide",
        }
    }

    pub fn is_amine(self) -> bool {
        matches!(
            self,
            GroupKind::AminePrimary
                | GroupKind::AmineSecondary
                | GroupKind::AmineTertiary
                | GroupKind::AmineAromatic
        )
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown functional group '{s}'"))
    }
}

/// One matched group. `atoms[0]` is the group's centre: the carbonyl carbon
/// for acyl groups, the nitrogen for amines, the oxygen for hydroxyls.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionalGroupHit {
    pub kind: GroupKind,
    pub atoms: Vec<usize>,
}

impl FunctionalGroupHit {
    pub fn center(&self) -> usize {
        self.atoms[0]
    }
}

/// Carbonyl oxygen double-bonded to a non-aromatic carbon.
fn carbonyl_oxygen(mol: &Molecule, c: usize) -> Option<usize> {
    let atom = mol.atom(c);
    if atom.element != Element::C || atom.aromatic {
        return None;
    }
    mol.neighbors(c).iter().find_map(|&(o, bi)| {
        let oa = mol.atom(o);
        (oa.element == Element::O
            && !oa.aromatic
            && oa.charge == 0
            && mol.bonds()[bi].order == BondOrder::Double)
            .then_some(o)
    })
}

pub(crate) fn is_acyl_carbon(mol: &Molecule, c: usize) -> bool {
    carbonyl_oxygen(mol, c).is_some()
}

fn single_neighbors(mol: &Molecule, i: usize) -> impl Iterator<Item = usize> + '_ {
    mol.neighbors(i)
        .iter()
        .filter(|&&(_, bi)| mol.bonds()[bi].order == BondOrder::Single)
        .map(|&(j, _)| j)
}

/// Classifies an uncharged, saturated nitrogen bonded only to carbons.
pub(crate) fn amine_kind(mol: &Molecule, n: usize) -> Option<GroupKind> {
    let atom = mol.atom(n);
    if atom.element != Element::N || atom.aromatic || atom.charge != 0 {
        return None;
    }
    let nbs = mol.neighbors(n);
    if nbs.is_empty() {
        return None;
    }
    for &(j, bi) in nbs {
        if mol.bonds()[bi].order != BondOrder::Single || mol.atom(j).element != Element::C {
            return None;
        }
        if is_acyl_carbon(mol, j) {
            return None;
        }
    }
    if nbs.iter().any(|&(j, _)| mol.atom(j).aromatic) {
        return Some(GroupKind::AmineAromatic);
    }
    match atom.hydrogens {
        2 => Some(GroupKind::AminePrimary),
        1 => Some(GroupKind::AmineSecondary),
        0 if nbs.len() == 3 => Some(GroupKind::AmineTertiary),
        _ => None,
    }
}

pub fn find_functional_groups(mol: &Molecule) -> Vec<FunctionalGroupHit> {
    let n = mol.atom_count();
    let mut claimed = vec![false; n];
    let mut hits = Vec::new();
    let mut claim = |hit: FunctionalGroupHit, claimed: &mut Vec<bool>| {
        for &a in &hit.atoms {
            claimed[a] = true;
        }
        hits.push(hit);
    };

    // amides: C(=O)-N
    for c in 0..n {
        if claimed[c] {
            continue;
        }
        let Some(o) = carbonyl_oxygen(mol, c) else { continue };
        let nitrogen = single_neighbors(mol, c).find(|&j| {
            let a = mol.atom(j);
            a.element == Element::N && !a.aromatic && !claimed[j]
        });
        if let Some(nn) = nitrogen {
            claim(
                FunctionalGroupHit {
                    kind: GroupKind::Amide,
                    atoms: vec![c, o, nn],
                },
                &mut claimed,
            );
        }
    }

    // esters: C(=O)-O-C
    for c in 0..n {
        if claimed[c] {
            continue;
        }
        let Some(o) = carbonyl_oxygen(mol, c) else { continue };
        let link = single_neighbors(mol, c).find_map(|j| {
            let a = mol.atom(j);
            if a.element != Element::O || a.aromatic || a.charge != 0 || claimed[j] || mol.degree(j) != 2 {
                return None;
            }
            let other = mol.neighbors(j).iter().map(|&(k, _)| k).find(|&k| k != c)?;
            (mol.atom(other).element == Element::C).then_some((j, other))
        });
        if let Some((oe, alkyl)) = link {
            claim(
                FunctionalGroupHit {
                    kind: GroupKind::Ester,
                    atoms: vec![c, o, oe, alkyl],
                },
                &mut claimed,
            );
        }
    }

    // carboxylic acids: C(=O)-[OH]
    for c in 0..n {
        if claimed[c] {
            continue;
        }
        let Some(o) = carbonyl_oxygen(mol, c) else { continue };
        let hydroxy = single_neighbors(mol, c).find(|&j| {
            let a = mol.atom(j);
            a.element == Element::O
                && !a.aromatic
                && a.charge == 0
                && a.hydrogens == 1
                && mol.degree(j) == 1
                && !claimed[j]
        });
        if let Some(oh) = hydroxy {
            claim(
                FunctionalGroupHit {
                    kind: GroupKind::CarboxylicAcid,
                    atoms: vec![c, o, oh],
                },
                &mut claimed,
            );
        }
    }

    // amines
    for i in 0..n {
        if claimed[i] {
            continue;
        }
        if let Some(kind) = amine_kind(mol, i) {
            claim(
                FunctionalGroupHit {
                    kind,
                    atoms: vec![i],
                },
                &mut claimed,
            );
        }
    }

    // hydroxyls: C-[OH]
    for i in 0..n {
        if claimed[i] {
            continue;
        }
        let a = mol.atom(i);
        if a.element != Element::O || a.aromatic || a.charge != 0 || a.hydrogens != 1 || mol.degree(i) != 1 {
            continue;
        }
        let (c, bi) = mol.neighbors(i)[0];
        if mol.atom(c).element == Element::C && mol.bonds()[bi].order == BondOrder::Single {
            claim(
                FunctionalGroupHit {
                    kind: GroupKind::Hydroxyl,
                    atoms: vec![i, c],
                },
                &mut claimed,
            );
        }
    }

    hits
}

pub fn count_kind(hits: &[FunctionalGroupHit], kind: GroupKind) -> usize {
    hits.iter().filter(|h| h.kind == kind).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn kinds(s: &str) -> Vec<GroupKind> {
        let mut k: Vec<GroupKind> = find_functional_groups(&parse_smiles(s).unwrap())
            .into_iter()
            .map(|h| h.kind)
            .collect();
        k.sort();
        k
    }

    #[test]
    fn acid() {
        assert_eq!(kinds("CC(=O)O"), vec![GroupKind::CarboxylicAcid]);
    }

    #[test]
    fn tertiary_amine() {
        assert_eq!(kinds("CCN(CC)CC"), vec![GroupKind::AmineTertiary]);
    }

    #[test]
    fn ester_suppresses_hydroxyl_and_acid() {
        assert_eq!(kinds("CCOC(C)=O"), vec![GroupKind::Ester]);
    }

    #[test]
    fn amine_classes() {
        assert_eq!(kinds("CCN"), vec![GroupKind::AminePrimary]);
        assert_eq!(kinds("CNC"), vec![GroupKind::AmineSecondary]);
        assert_eq!(kinds("Nc1ccccc1"), vec![GroupKind::AmineAromatic]);
        // pyridine nitrogen and ammonia are not amines
        assert!(kinds("c1ccncc1").is_empty());
        assert!(kinds("N").is_empty());
        assert!(kinds("C[N+](C)(C)C").is_empty());
    }

    #[test]
    fn amide_suppresses_amine() {
        assert_eq!(kinds("CC(=O)NCC"), vec![GroupKind::Amide]);
        assert_eq!(
            kinds("CC(=O)NCCN"),
            vec![GroupKind::AminePrimary, GroupKind::Amide]
        );
    }

    #[test]
    fn amino_alcohol_and_head_like() {
        assert_eq!(kinds("NCCO"), vec![GroupKind::AminePrimary, GroupKind::Hydroxyl]);
        assert_eq!(
            kinds("CN(CCO)CCO"),
            vec![GroupKind::AmineTertiary, GroupKind::Hydroxyl, GroupKind::Hydroxyl]
        );
        assert_eq!(
            kinds("CCOC(=O)CN(C)C"),
            vec![GroupKind::AmineTertiary, GroupKind::Ester]
        );
    }

    #[test]
    fn hit_atoms() {
        let m = parse_smiles("CC(=O)O").unwrap();
        let hits = find_functional_groups(&m);
        assert_eq!(hits[0].atoms, vec![1, 2, 3]);
        assert_eq!(hits[0].center(), 1);
    }

    #[test]
    fn names_round_trip() {
        for k in GroupKind::ALL {
            assert_eq!(k.name().parse::<GroupKind>().unwrap(), k);
        }
    }
}
