use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{find_functional_groups, Element, GroupKind, Molecule};

pub const PKA_MIN: f64 = -5.0;
pub const PKA_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteRole {
    Acid,
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkaSite {
    pub atom: usize,
    pub pka: f64,
    pub role: SiteRole,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("pKa {pka} at atom {atom} outside [-5, 20]")]
    OutOfRange { atom: usize, pka: f64 },
    #[error("atom {0} listed more than once")]
    DuplicateAtom(usize),
    #[error("atom {atom} does not exist (molecule has {atoms} atoms)")]
    UnknownAtom { atom: usize, atoms: usize },
    #[error("basic site on atom {0}, which is not nitrogen")]
    BaseNotNitrogen(usize),
    #[error("acidic site on atom {0}, which is neither oxygen nor nitrogen")]
    AcidNotHeteroatom(usize),
}

/// Ionizable sites of one molecule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PkaProfile {
    sites: Vec<PkaSite>,
}

impl PkaProfile {
    pub fn new(sites: Vec<PkaSite>) -> Result<Self, ProfileError> {
        let mut seen = std::collections::HashSet::new();
        for s in &sites {
            if !(PKA_MIN..=PKA_MAX).contains(&s.pka) || !s.pka.is_finite() {
                return Err(ProfileError::OutOfRange {
                    atom: s.atom,
                    pka: s.pka,
                });
            }
            if !seen.insert(s.atom) {
                return Err(ProfileError::DuplicateAtom(s.atom));
            }
        }
        Ok(PkaProfile { sites })
    }

    pub fn empty() -> Self {
        PkaProfile::default()
    }

    /// Checks the element-level invariants against the molecule the sites
    /// are supposed to describe.
    pub fn check_against(&self, mol: &Molecule) -> Result<(), ProfileError> {
        for s in &self.sites {
            if s.atom >= mol.atom_count() {
                return Err(ProfileError::UnknownAtom {
                    atom: s.atom,
                    atoms: mol.atom_count(),
                });
            }
            let e = mol.atom(s.atom).element;
            match s.role {
                SiteRole::Base if e != Element::N => return Err(ProfileError::BaseNotNitrogen(s.atom)),
                SiteRole::Acid if e != Element::O && e != Element::N => {
                    return Err(ProfileError::AcidNotHeteroatom(s.atom))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> &[PkaSite] {
        &self.sites
    }

    pub fn bases(&self) -> impl Iterator<Item = &PkaSite> {
        self.sites.iter().filter(|s| s.role == SiteRole::Base)
    }

    pub fn acids(&self) -> impl Iterator<Item = &PkaSite> {
        self.sites.iter().filter(|s| s.role == SiteRole::Acid)
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// Base pKa values per amine class and the electron-withdrawing correction.
#[derive(Debug, Clone, PartialEq)]
pub struct PkaTable {
    pub primary_amine: f64,
    pub secondary_amine: f64,
    pub tertiary_amine: f64,
    pub aromatic_amine: f64,
    pub carboxylic_acid: f64,
    /// Subtracted once per ester, amide or hydroxyl group near the nitrogen.
    pub withdrawing_shift: f64,
    /// A group counts when any of its atoms is at most this many bonds away.
    pub withdrawing_radius: usize,
    pub floor: f64,
}

impl Default for PkaTable {
    fn default() -> Self {
        PkaTable {
            primary_amine: 10.6,
            secondary_amine: 10.7,
            tertiary_amine: 9.8,
            aromatic_amine: 4.6,
            carboxylic_acid: 4.8,
            withdrawing_shift: 1.0,
            withdrawing_radius: 2,
            floor: 2.0,
        }
    }
}

pub fn assign_pka(mol: &Molecule) -> PkaProfile {
    assign_pka_with(mol, &PkaTable::default())
}

pub fn assign_pka_with(mol: &Molecule, table: &PkaTable) -> PkaProfile {
    let hits = find_functional_groups(mol);
    let withdrawing: Vec<&[usize]> = hits
        .iter()
        .filter(|h| matches!(h.kind, GroupKind::Ester | GroupKind::Amide | GroupKind::Hydroxyl))
        .map(|h| h.atoms.as_slice())
        .collect();
    let mut sites = Vec::new();
    for hit in &hits {
        let base = match hit.kind {
            GroupKind::AminePrimary => table.primary_amine,
            GroupKind::AmineSecondary => table.secondary_amine,
            GroupKind::AmineTertiary => table.tertiary_amine,
            GroupKind::AmineAromatic => table.aromatic_amine,
            GroupKind::CarboxylicAcid => {
                sites.push(PkaSite {
                    atom: hit.atoms[2],
                    pka: table.carboxylic_acid,
                    role: SiteRole::Acid,
                });
                continue;
            }
            _ => continue,
        };
        let n = hit.center();
        let dist = mol.distances_from(n);
        let near = withdrawing
            .iter()
            .filter(|atoms| atoms.iter().any(|&a| dist[a] <= table.withdrawing_radius))
            .count();
        let pka = (base - table.withdrawing_shift * near as f64).max(table.floor);
        sites.push(PkaSite {
            atom: n,
            pka,
            role: SiteRole::Base,
        });
    }
    sites.sort_by_key(|s| s.atom);
    PkaProfile { sites }
}

/// Net charge from the Henderson-Hasselbalch protonation fractions.
pub fn net_charge(profile: &PkaProfile, ph: f64) -> f64 {
    let positive: f64 = profile
        .bases()
        .map(|s| 1.0 / (1.0 + 10f64.powf(ph - s.pka)))
        .sum();
    let negative: f64 = profile
        .acids()
        .map(|s| 1.0 / (1.0 + 10f64.powf(s.pka - ph)))
        .sum();
    positive - negative
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use approx::assert_abs_diff_eq;

    fn profile(s: &str) -> PkaProfile {
        assign_pka(&parse_smiles(s).unwrap())
    }

    fn base(pka: f64) -> PkaSite {
        PkaSite {
            atom: 0,
            pka,
            role: SiteRole::Base,
        }
    }

    #[test]
    fn table_lookups() {
        let p = profile("CCN(CC)CC");
        assert_eq!(p.sites().len(), 1);
        assert_eq!(p.sites()[0].pka, 9.8);
        assert_eq!(p.sites()[0].role, SiteRole::Base);

        let p = profile("CCOC(=O)CN(C)C");
        assert_eq!(p.sites().len(), 1);
        assert_abs_diff_eq!(p.sites()[0].pka, 8.8, epsilon = 1e-12);

        let p = profile("CC(=O)O");
        assert_eq!(p.sites().len(), 1);
        assert_eq!(p.sites()[0].pka, 4.8);
        assert_eq!(p.sites()[0].role, SiteRole::Acid);
    }

    #[test]
    fn amide_nitrogen_is_not_basic() {
        assert!(profile("CC(=O)NC").is_empty());
    }

    #[test]
    fn correction_floors() {
        // three esters hang off the carbons next to the nitrogen
        let p = profile("CCCC(=O)OCCN(CCOC(=O)CCC)CCOC(=O)CCC");
        assert_abs_diff_eq!(p.sites()[0].pka, 6.8, epsilon = 1e-12);
        let t = PkaTable {
            withdrawing_shift: 5.0,
            ..PkaTable::default()
        };
        let p = assign_pka_with(&parse_smiles("CCOC(=O)CN(C)C").unwrap(), &t);
        assert_abs_diff_eq!(p.sites()[0].pka, 4.8, epsilon = 1e-12);
        let p = assign_pka_with(&parse_smiles("CCOC(=O)CN(CC(=O)OC)C").unwrap(), &t);
        assert_eq!(p.sites()[0].pka, 2.0);
    }

    #[test]
    fn charge_examples() {
        let p = PkaProfile::new(vec![base(7.4)]).unwrap();
        assert_abs_diff_eq!(net_charge(&p, 7.4), 0.5, epsilon = 1e-15);
        let p = PkaProfile::new(vec![base(9.0)]).unwrap();
        assert_abs_diff_eq!(net_charge(&p, 5.0), 0.99990, epsilon = 1e-5);
        let p = PkaProfile::new(vec![
            base(9.0),
            PkaSite {
                atom: 1,
                pka: 4.8,
                role: SiteRole::Acid,
            },
        ])
        .unwrap();
        assert_abs_diff_eq!(net_charge(&p, 7.4), -0.0220, epsilon = 1e-4);
        assert_eq!(net_charge(&PkaProfile::empty(), 3.0), 0.0);
    }

    #[test]
    fn profile_invariants() {
        assert!(matches!(
            PkaProfile::new(vec![base(25.0)]),
            Err(ProfileError::OutOfRange { .. })
        ));
        assert_eq!(
            PkaProfile::new(vec![base(9.0), base(8.0)]),
            Err(ProfileError::DuplicateAtom(0))
        );
        let m = parse_smiles("CN").unwrap();
        let p = PkaProfile::new(vec![base(9.0)]).unwrap();
        assert_eq!(p.check_against(&m), Err(ProfileError::BaseNotNitrogen(0)));
        assert!(profile("CN").check_against(&m).is_ok());
    }
}
