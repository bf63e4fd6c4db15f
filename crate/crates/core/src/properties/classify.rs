use serde::Serialize;

use super::pka::{assign_pka, net_charge, PkaProfile};
use crate::molgraph::{longest_aliphatic_chain, molecular_weight, Element, Molecule};

#[derive(Debug, Clone, PartialEq)]
pub struct LipidRules {
    pub min_chain: usize,
    /// Two oxygens closer than this (in bonds) count as a polar head.
    pub polar_radius: usize,
    pub min_weight: f64,
    pub max_weight: f64,
}

impl Default for LipidRules {
    fn default() -> Self {
        LipidRules {
            min_chain: 8,
            polar_radius: 4,
            min_weight: 200.0,
            max_weight: 1500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: &'static str,
    pub satisfied: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipidVerdict {
    pub is_lipid: bool,
    pub reasons: Vec<Criterion>,
}

pub fn has_polar_head(mol: &Molecule, radius: usize) -> bool {
    if mol.count_element(Element::N) > 0 {
        return true;
    }
    let oxygens: Vec<usize> = (0..mol.atom_count())
        .filter(|&i| mol.atom(i).element == Element::O)
        .collect();
    oxygens.iter().enumerate().any(|(k, &o)| {
        let d = mol.distances_from(o);
        oxygens[k + 1..].iter().any(|&p| d[p] <= radius)
    })
}

pub fn is_lipid_like(mol: &Molecule) -> LipidVerdict {
    is_lipid_like_with(mol, &LipidRules::default())
}

pub fn is_lipid_like_with(mol: &Molecule, rules: &LipidRules) -> LipidVerdict {
    let chain = longest_aliphatic_chain(mol);
    let polar = has_polar_head(mol, rules.polar_radius);
    let mw = molecular_weight(mol);
    let reasons = vec![
        Criterion {
            name: "chain",
            satisfied: chain >= rules.min_chain,
            detail: format!("longest aliphatic chain {chain} (need >= {})", rules.min_chain),
        },
        Criterion {
            name: "polar_head",
            satisfied: polar,
            detail: if polar {
                "polar head present".to_string()
            } else {
                "no nitrogen and no close oxygen pair".to_string()
            },
        },
        Criterion {
            name: "weight",
            satisfied: (rules.min_weight..=rules.max_weight).contains(&mw),
            detail: format!(
                "molecular weight {mw:.2} (need {}..={})",
                rules.min_weight, rules.max_weight
            ),
        },
    ];
    LipidVerdict {
        is_lipid: reasons.iter().all(|c| c.satisfied),
        reasons,
    }
}

pub const ACIDIC_PH: f64 = 5.0;
pub const PHYSIOLOGICAL_PH: f64 = 7.4;

#[derive(Debug, Clone, PartialEq)]
pub struct IonizableRules {
    pub min_charge_acidic: f64,
    pub max_charge_physiological: f64,
}

impl Default for IonizableRules {
    fn default() -> Self {
        IonizableRules {
            min_charge_acidic: 0.5,
            max_charge_physiological: 0.5,
        }
    }
}

impl IonizableRules {
    pub fn charge_window_ok(&self, profile: &PkaProfile) -> bool {
        net_charge(profile, ACIDIC_PH) >= self.min_charge_acidic
            && net_charge(profile, PHYSIOLOGICAL_PH) <= self.max_charge_physiological
    }
}

pub fn is_ionizable_lipid(mol: &Molecule) -> bool {
    is_lipid_like(mol).is_lipid && IonizableRules::default().charge_window_ok(&assign_pka(mol))
}
