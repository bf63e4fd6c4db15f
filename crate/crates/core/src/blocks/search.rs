use rayon::prelude::*;

use super::BuildingBlock;
use crate::molgraph::{
    ecfp_fingerprint, graph_edit_distance_capped, tanimoto, Molecule, DEFAULT_RADIUS,
    DEFAULT_SIZE_CAP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCriteria {
    /// Passes when Tanimoto is strictly above this.
    pub min_tanimoto: f64,
    /// ...or when the edit distance is at most this.
    pub max_ged: usize,
    pub size_cap: usize,
}

impl Default for SimilarityCriteria {
    fn default() -> Self {
        SimilarityCriteria {
            min_tanimoto: 0.5,
            max_ged: 6,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailMatch {
    pub pool_index: usize,
    pub smiles: String,
    /// `None` when the distance exceeds the limit or a molecule is too big.
    pub ged: Option<usize>,
    pub tanimoto: f64,
}

/// Catalogue entries similar to `query`, best first: ascending edit
/// distance, then descending Tanimoto, then SMILES.
pub fn find_similar_tails(
    query: &Molecule,
    catalog: &[BuildingBlock],
    k: usize,
    criteria: &SimilarityCriteria,
) -> Vec<TailMatch> {
    let Some(first) = catalog.first() else {
        return Vec::new();
    };
    let qfp = ecfp_fingerprint(query, DEFAULT_RADIUS, first.fingerprint.width());
    let mut hits: Vec<TailMatch> = catalog
        .par_iter()
        .filter_map(|b| {
            let t = tanimoto(&qfp, &b.fingerprint).ok()?;
            let ged = graph_edit_distance_capped(query, &b.molecule, criteria.max_ged, criteria.size_cap)
                .ok()
                .and_then(|d| d.value());
            let pass = t > criteria.min_tanimoto || ged.is_some_and(|g| g <= criteria.max_ged);
            pass.then(|| TailMatch {
                pool_index: b.pool_index,
                smiles: b.smiles.clone(),
                ged,
                tanimoto: t,
            })
        })
        .collect();
    hits.sort_by(|a, b| {
        a.ged
            .unwrap_or(usize::MAX)
            .cmp(&b.ged.unwrap_or(usize::MAX))
            .then(b.tanimoto.total_cmp(&a.tanimoto))
            .then_with(|| a.smiles.cmp(&b.smiles))
    });
    hits.truncate(k);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{BuildingBlockPool, Role};
    use crate::molgraph::parse_smiles;

    fn catalog() -> Vec<BuildingBlock> {
        BuildingBlockPool::from_smiles(
            &[],
            &[
                "CCCCCCCCC(=O)O",
                "CCCCCCCC(=O)O",
                "CCCCCCCCCCCCCCCCCC(=O)O",
                "CCCCCCCCCCCCCCCCO",
            ],
        )
        .unwrap()
        .with_role(Role::Tail)
        .cloned()
        .collect()
    }

    #[test]
    fn self_match_first() {
        let q = parse_smiles("CCCCCCCC(=O)O").unwrap();
        let hits = find_similar_tails(&q, &catalog(), 10, &SimilarityCriteria::default());
        assert_eq!(hits[0].ged, Some(0));
        assert_eq!(hits[0].tanimoto, 1.0);
        assert_eq!(hits[1].ged, Some(2));
        for h in &hits {
            assert!(h.tanimoto > 0.5 || h.ged.is_some_and(|g| g <= 6));
        }
    }

    #[test]
    fn methane_matches_nothing() {
        let q = parse_smiles("C").unwrap();
        assert!(find_similar_tails(&q, &catalog(), 10, &SimilarityCriteria::default()).is_empty());
    }

    #[test]
    fn top_k() {
        let q = parse_smiles("CCCCCCCC(=O)O").unwrap();
        assert_eq!(find_similar_tails(&q, &catalog(), 1, &SimilarityCriteria::default()).len(), 1);
    }
}
