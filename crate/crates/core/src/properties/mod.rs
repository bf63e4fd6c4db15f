//! Lipid-likeness and ionizability: a rule-based pKa table, the
//! Henderson-Hasselbalch net charge and the two classifiers built on them.

mod classify;
mod pka;
mod validation;

use std::sync::Arc;

pub use classify::{
    has_polar_head, is_ionizable_lipid, is_lipid_like, is_lipid_like_with, Criterion,
    IonizableRules, LipidRules, LipidVerdict, ACIDIC_PH, PHYSIOLOGICAL_PH,
};
pub use pka::{
    assign_pka, assign_pka_with, net_charge, PkaProfile, PkaSite, PkaTable, ProfileError,
    SiteRole, PKA_MAX, PKA_MIN,
};
pub use validation::{score_corpus, CorpusScore};

use crate::molgraph::{canonical_smiles, Molecule};
use crate::reactions::{PkaRequest, PkaResponse};
use crate::transport::{JsonClient, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum PkaModelError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("invalid profile from remote model: {0}")]
    Profile(#[from] ProfileError),
}

/// Anything that can assign pKa sites to a molecule.
pub trait PkaModel: Send + Sync {
    fn profile(&self, mol: &Molecule) -> Result<PkaProfile, PkaModelError>;
}

#[derive(Debug, Clone, Default)]
pub struct RulePka {
    pub table: PkaTable,
}

impl PkaModel for RulePka {
    fn profile(&self, mol: &Molecule) -> Result<PkaProfile, PkaModelError> {
        Ok(assign_pka_with(mol, &self.table))
    }
}

/// Client for `POST /api/v1/pka`. Atom indices in the reply refer to the
/// canonical SMILES that was sent, so the molecule is re-parsed from it
/// before the profile is checked.
#[derive(Debug, Clone)]
pub struct RemotePka {
    client: JsonClient,
}

impl RemotePka {
    pub fn new(client: JsonClient) -> Self {
        RemotePka { client }
    }

    /// Profile for the canonical form of `mol`, plus that canonical molecule.
    pub fn profile_canonical(&self, mol: &Molecule) -> Result<(Molecule, PkaProfile), PkaModelError> {
        let smiles = canonical_smiles(mol);
        let canon = crate::molgraph::parse_smiles(&smiles).expect("canonical SMILES re-parses");
        let resp: PkaResponse = self.client.post(
            "/api/v1/pka",
            &PkaRequest {
                smiles: smiles.clone(),
            },
        )?;
        let profile = PkaProfile::new(
            resp.sites
                .into_iter()
                .map(|s| PkaSite {
                    atom: s.atom,
                    pka: s.pka,
                    role: s.role,
                })
                .collect(),
        )?;
        profile.check_against(&canon)?;
        Ok((canon, profile))
    }
}

impl PkaModel for RemotePka {
    fn profile(&self, mol: &Molecule) -> Result<PkaProfile, PkaModelError> {
        self.profile_canonical(mol).map(|(_, p)| p)
    }
}

/// The two-stage classifier used when filtering generated lipids: lipid
/// rules first, then the charge window over the pKa model's profile.
#[derive(Clone)]
pub struct PropertyModel {
    pub lipid: LipidRules,
    pub ionizable: IonizableRules,
    pub pka: Arc<dyn PkaModel>,
}

impl Default for PropertyModel {
    fn default() -> Self {
        PropertyModel {
            lipid: LipidRules::default(),
            ionizable: IonizableRules::default(),
            pka: Arc::new(RulePka::default()),
        }
    }
}

impl std::fmt::Debug for PropertyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PropertyModel")
            .field("lipid", &self.lipid)
            .field("ionizable", &self.ionizable)
            .finish_non_exhaustive()
    }
}

impl PropertyModel {
    pub fn is_lipid_like(&self, mol: &Molecule) -> bool {
        is_lipid_like_with(mol, &self.lipid).is_lipid
    }

    /// Ionizability of a molecule already known to be lipid-like. A pKa
    /// model failure counts as not ionizable.
    pub fn charge_window_ok(&self, mol: &Molecule) -> bool {
        match self.pka.profile(mol) {
            Ok(p) => self.ionizable.charge_window_ok(&p),
            Err(e) => {
                log::warn!("pKa model failed: {e}");
                false
            }
        }
    }

    pub fn is_ionizable_lipid(&self, mol: &Molecule) -> bool {
        self.is_lipid_like(mol) && self.charge_window_ok(mol)
    }

    pub fn net_charges(&self, mol: &Molecule) -> Option<(f64, f64)> {
        let p = self.pka.profile(mol).ok()?;
        Some((net_charge(&p, ACIDIC_PH), net_charge(&p, PHYSIOLOGICAL_PH)))
    }
}
