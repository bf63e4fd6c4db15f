//! Building-block pools: head and tail filters, tail extraction from lipid
//! corpora and similarity search over tail catalogues.

mod extract;
mod filters;
mod search;

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::{cleave_linkages, extract_tails, TailExtraction};
pub use filters::{
    filter_heads, filter_tails, head_failures, reactive_group_count, tail_failures, FilterOutcome,
    HeadCriteria, TailCriteria,
};
pub use search::{find_similar_tails, SimilarityCriteria, TailMatch};

use crate::molgraph::{
    canonical_smiles, ecfp_fingerprint, find_functional_groups, longest_aliphatic_chain,
    parse_smiles, Fingerprint, FunctionalGroupHit, Molecule, SmilesError, DEFAULT_RADIUS,
    DEFAULT_WIDTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Head,
    Tail,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Head => "head",
            Role::Tail => "tail",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(Role::Head),
            "tail" => Ok(Role::Tail),
            _ => Err(format!("unknown role '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildingBlock {
    pub pool_index: usize,
    pub role: Role,
    pub smiles: String,
    pub molecule: Molecule,
    pub functional_groups: Vec<FunctionalGroupHit>,
    pub fingerprint: Fingerprint,
    pub chain: usize,
}

impl BuildingBlock {
    pub fn new(pool_index: usize, role: Role, molecule: &Molecule) -> Self {
        let smiles = canonical_smiles(molecule);
        // re-parse so atom order follows the canonical text
        let molecule = parse_smiles(&smiles).expect("canonical SMILES re-parses");
        BuildingBlock {
            pool_index,
            role,
            functional_groups: find_functional_groups(&molecule),
            fingerprint: ecfp_fingerprint(&molecule, DEFAULT_RADIUS, DEFAULT_WIDTH),
            chain: longest_aliphatic_chain(&molecule),
            smiles,
            molecule,
        }
    }

    pub fn group_names(&self) -> Vec<&'static str> {
        self.functional_groups.iter().map(|h| h.kind.name()).collect()
    }
}

/// One line of a pool file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub idx: usize,
    pub role: Role,
    pub smiles: String,
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub parameters: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: invalid SMILES: {source}")]
    Smiles {
        line: usize,
        #[source]
        source: SmilesError,
    },
    #[error("line {line}: index {found} breaks the dense numbering (expected {expected})")]
    Index { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate molecule {smiles}")]
    Duplicate { line: usize, smiles: String },
    #[error("line {line}: stored groups {stored:?} differ from detected {detected:?}")]
    Groups {
        line: usize,
        stored: Vec<String>,
        detected: Vec<String>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Indexed, role-tagged building blocks with dense indices from 0.
#[derive(Debug, Clone, Default)]
pub struct BuildingBlockPool {
    blocks: Vec<BuildingBlock>,
    pub provenance: Provenance,
}

impl BuildingBlockPool {
    /// Heads first, then tails; later duplicates of a canonical form are dropped.
    pub fn from_molecules(heads: &[Molecule], tails: &[Molecule], provenance: Provenance) -> Self {
        let mut pool = BuildingBlockPool {
            blocks: Vec::new(),
            provenance,
        };
        let mut seen = HashSet::new();
        for (role, mols) in [(Role::Head, heads), (Role::Tail, tails)] {
            for m in mols {
                let block = BuildingBlock::new(pool.blocks.len(), role, m);
                if seen.insert(block.smiles.clone()) {
                    pool.blocks.push(block);
                }
            }
        }
        pool
    }

    pub fn from_smiles(heads: &[&str], tails: &[&str]) -> Result<Self, SmilesError> {
        let parse = |xs: &[&str]| xs.iter().map(|s| parse_smiles(s)).collect::<Result<Vec<_>, _>>();
        Ok(BuildingBlockPool::from_molecules(
            &parse(heads)?,
            &parse(tails)?,
            Provenance::default(),
        ))
    }

    pub fn blocks(&self) -> &[BuildingBlock] {
        &self.blocks
    }

    pub fn get(&self, idx: usize) -> Option<&BuildingBlock> {
        self.blocks.get(idx)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &BuildingBlock> {
        self.blocks.iter().filter(move |b| b.role == role)
    }

    pub fn heads(&self) -> impl Iterator<Item = &BuildingBlock> {
        self.with_role(Role::Head)
    }

    pub fn tails(&self) -> impl Iterator<Item = &BuildingBlock> {
        self.with_role(Role::Tail)
    }

    pub fn index_of(&self, smiles: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.smiles == smiles)
    }

    pub fn records(&self) -> Vec<PoolRecord> {
        self.blocks
            .iter()
            .map(|b| PoolRecord {
                idx: b.pool_index,
                role: b.role,
                smiles: b.smiles.clone(),
                groups: b.group_names().into_iter().map(String::from).collect(),
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// SHA-256 of the pool file contents, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, PoolError> {
        let mut pool = BuildingBlockPool::default();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PoolRecord = serde_json::from_str(&line).map_err(|e| PoolError::Format {
                line: line_no,
                message: e.to_string(),
            })?;
            if rec.idx != pool.blocks.len() {
                return Err(PoolError::Index {
                    line: line_no,
                    expected: pool.blocks.len(),
                    found: rec.idx,
                });
            }
            let mol = parse_smiles(&rec.smiles).map_err(|source| PoolError::Smiles {
                line: line_no,
                source,
            })?;
            let block = BuildingBlock::new(rec.idx, rec.role, &mol);
            if !seen.insert(block.smiles.clone()) {
                return Err(PoolError::Duplicate {
                    line: line_no,
                    smiles: block.smiles,
                });
            }
            let detected: Vec<String> = block.group_names().into_iter().map(String::from).collect();
            if detected != rec.groups {
                return Err(PoolError::Groups {
                    line: line_no,
                    stored: rec.groups,
                    detected,
                });
            }
            pool.blocks.push(block);
        }
        Ok(pool)
    }
}

/// One input line: SMILES, optionally followed by a tab and an identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub line: usize,
    pub smiles: String,
    pub id: Option<String>,
}

pub fn read_candidates<R: BufRead>(reader: R) -> io::Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cols = trimmed.splitn(2, '\t');
        let smiles = cols.next().unwrap_or_default().trim().to_string();
        let id = cols.next().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        out.push(Candidate {
            line: i + 1,
            smiles,
            id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_round_trip() {
        let pool = BuildingBlockPool::from_smiles(
            &["OCCN(C)CCO", "NCCO", "OCCN(CCO)C"],
            &["CCCCCCCCCC(=O)O", "CCCCCCCCCCO"],
        )
        .unwrap();
        // the third head is a duplicate of the first
        assert_eq!(pool.len(), 4);
        assert_eq!(pool.heads().count(), 2);
        assert_eq!(pool.tails().map(|b| b.pool_index).collect::<Vec<_>>(), vec![2, 3]);
        let text = pool.to_jsonl();
        assert!(text.starts_with(r#"{"idx":0,"role":"head","smiles":"#));
        let back = BuildingBlockPool::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.content_hash(), pool.content_hash());
        assert_eq!(pool.content_hash().len(), 64);
    }

    #[test]
    fn pool_file_errors() {
        let bad_idx = r#"{"idx":1,"role":"head","smiles":"NCCO","groups":["amine_primary","hydroxyl"]}"#;
        assert!(matches!(
            BuildingBlockPool::read_jsonl(bad_idx.as_bytes()),
            Err(PoolError::Index { line: 1, .. })
        ));
        let bad_groups = r#"{"idx":0,"role":"head","smiles":"NCCO","groups":[]}"#;
        assert!(matches!(
            BuildingBlockPool::read_jsonl(bad_groups.as_bytes()),
            Err(PoolError::Groups { .. })
        ));
        assert!(matches!(
            BuildingBlockPool::read_jsonl("{".as_bytes()),
            Err(PoolError::Format { .. })
        ));
    }

    #[test]
    fn candidates() {
        let c = read_candidates("# header\nCCO\tZINC1\n\nNCCO\n".as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].id.as_deref(), Some("ZINC1"));
        assert_eq!(c[1].line, 4);
    }
}
