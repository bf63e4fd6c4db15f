use std::io::BufRead;

use serde::Serialize;

use crate::molgraph::{parse_smiles, Molecule};

/// Confusion counts of a classifier against a labelled corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusScore {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    /// Lines whose SMILES or label could not be read.
    pub malformed: usize,
}

impl CorpusScore {
    pub fn scored(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.scored();
        (n > 0).then(|| (self.true_positive + self.true_negative) as f64 / n as f64)
    }
}

/// Scores `predicate` on tab-separated `SMILES<TAB>0|1` lines. Blank lines
/// and lines starting with '#' are skipped.
pub fn score_corpus<R: BufRead>(
    reader: R,
    predicate: impl Fn(&Molecule) -> bool,
) -> std::io::Result<CorpusScore> {
    let mut score = CorpusScore::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let smiles = cols.next().unwrap_or_default();
        let label = match cols.next().map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            _ => {
                score.malformed += 1;
                continue;
            }
        };
        let Ok(mol) = parse_smiles(smiles) else {
            score.malformed += 1;
            continue;
        };
        match (predicate(&mol), label) {
            (true, true) => score.true_positive += 1,
            (true, false) => score.false_positive += 1,
            (false, false) => score.true_negative += 1,
            (false, true) => score.false_negative += 1,
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::is_lipid_like;

    #[test]
    fn confusion_counts() {
        let text = "# smiles\tlabel\nCCCCCCCCCC(=O)OCCN(C)C\t1\nCCO\t0\nCCCCCCCCCCCCCCCC\t1\nC1CC\t1\nCC\tx\n";
        let s = score_corpus(text.as_bytes(), |m| is_lipid_like(m).is_lipid).unwrap();
        assert_eq!(s.true_positive, 1);
        assert_eq!(s.true_negative, 1);
        assert_eq!(s.false_negative, 1);
        assert_eq!(s.malformed, 2);
        assert_eq!(s.accuracy(), Some(2.0 / 3.0));
    }
}
