//! Evaluation of generated molecule sets.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::molgraph::{
    canonical_smiles, ecfp_fingerprint, ecfp_identifiers, estimate_logp, heteroatom_counts,
    longest_aliphatic_chain, molecular_weight, parse_smiles, Molecule, DEFAULT_RADIUS,
    DEFAULT_WIDTH,
};
use crate::properties::PropertyModel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("set too small: need at least {needed} molecules, got {got}")]
    Undersized { needed: usize, got: usize },
    #[error("descriptor length mismatch ({0} vs {1})")]
    Width(usize, usize),
}

/// Fraction of strings that parse into valence-valid molecules.
pub fn validity<S: AsRef<str> + Sync>(smiles: &[S]) -> Result<f64, MetricsError> {
    if smiles.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ok = smiles
        .par_iter()
        .filter(|s| parse_smiles(s.as_ref()).is_ok_and(|m| m.is_valence_valid()))
        .count();
    Ok(ok as f64 / smiles.len() as f64)
}

/// Distinct keys over total. Keys are expected to be canonical SMILES.
pub fn uniqueness<S: AsRef<str>>(keys: &[S]) -> Result<f64, MetricsError> {
    if keys.is_empty() {
        return Err(MetricsError::Empty);
    }
    let distinct: HashSet<&str> = keys.iter().map(|s| s.as_ref()).collect();
    Ok(distinct.len() as f64 / keys.len() as f64)
}

/// Fraction of generated keys absent from the training keys.
pub fn novelty<S: AsRef<str>, T: AsRef<str>>(generated: &[S], training: &[T]) -> Result<f64, MetricsError> {
    if generated.is_empty() {
        return Err(MetricsError::Empty);
    }
    let train: HashSet<&str> = training.iter().map(|s| s.as_ref()).collect();
    let novel = generated.iter().filter(|s| !train.contains(s.as_ref())).count();
    Ok(novel as f64 / generated.len() as f64)
}

pub const FP_BUCKETS: usize = 16;
pub const DESCRIPTOR_LEN: usize = 7 + FP_BUCKETS;

/// MW, logP, chain length, N, O, S, rings, then the fingerprint folded into
/// 16 contiguous blocks, each the mean of its bits.
pub fn descriptor(mol: &Molecule) -> Vec<f64> {
    let (n, o, s) = heteroatom_counts(mol);
    let mut v = vec![
        molecular_weight(mol),
        estimate_logp(mol),
        longest_aliphatic_chain(mol) as f64,
        n as f64,
        o as f64,
        s as f64,
        mol.ring_count() as f64,
    ];
    let fp = ecfp_fingerprint(mol, DEFAULT_RADIUS, DEFAULT_WIDTH);
    let block = DEFAULT_WIDTH / FP_BUCKETS;
    let mut counts = [0usize; FP_BUCKETS];
    for bit in fp.ones() {
        counts[bit / block] += 1;
    }
    v.extend(counts.iter().map(|&c| c as f64 / block as f64));
    v
}

pub fn descriptors(mols: &[Molecule]) -> Vec<Vec<f64>> {
    mols.par_iter().map(descriptor).collect()
}

/// Per-dimension mean and sample standard deviation.
fn moments(set: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    if set.len() < 2 {
        return Err(MetricsError::Undersized { needed: 2, got: set.len() });
    }
    let w = set[0].len();
    if let Some(r) = set.iter().find(|r| r.len() != w) {
        return Err(MetricsError::Width(w, r.len()));
    }
    let n = set.len() as f64;
    let mut mu = vec![0.0; w];
    for r in set {
        for (m, x) in mu.iter_mut().zip(r) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; w];
    for r in set {
        for i in 0..w {
            var[i] += (r[i] - mu[i]).powi(2);
        }
    }
    let sd = var.into_iter().map(|v| (v / (n - 1.0)).sqrt()).collect();
    Ok((mu, sd))
}

/// Fréchet distance between two descriptor sets under diagonal covariances.
pub fn ffd_descriptors(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    let (ma, sa) = moments(a)?;
    let (mb, sb) = moments(b)?;
    if ma.len() != mb.len() {
        return Err(MetricsError::Width(ma.len(), mb.len()));
    }
    let mut d2 = 0.0;
    for i in 0..ma.len() {
        d2 += (ma[i] - mb[i]).powi(2) + (sa[i] - sb[i]).powi(2);
    }
    Ok(d2.sqrt())
}

pub fn ffd(a: &[Molecule], b: &[Molecule]) -> Result<f64, MetricsError> {
    ffd_descriptors(&descriptors(a), &descriptors(b))
}

/// Fragment-frequency synthetic accessibility score. Environment identifiers
/// common in the reference corpus are cheap; rare or unseen ones, rings,
/// macrocycles and size add cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SaModel {
    counts: HashMap<u64, u32>,
    corpus_size: usize,
    pub ring_penalty: f64,
    pub macrocycle_penalty: f64,
    pub macrocycle_size: usize,
}

impl SaModel {
    pub fn from_molecules<'a>(corpus: impl IntoIterator<Item = &'a Molecule>) -> Self {
        let mut counts: HashMap<u64, u32> = HashMap::new();
        let mut n = 0;
        for m in corpus {
            n += 1;
            let ids: HashSet<u64> = ecfp_identifiers(m, 2).into_iter().collect();
            for id in ids {
                *counts.entry(id).or_default() += 1;
            }
        }
        SaModel {
            counts,
            corpus_size: n,
            ring_penalty: 0.5,
            macrocycle_penalty: 1.0,
            macrocycle_size: 8,
        }
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    /// Mean negative log frequency of the molecule's environments.
    pub fn fragment_term(&self, mol: &Molecule) -> f64 {
        let ids = ecfp_identifiers(mol, 2);
        if ids.is_empty() {
            return 0.0;
        }
        let total = (self.corpus_size + 1) as f64;
        let sum: f64 = ids
            .iter()
            .map(|id| {
                let c = self.counts.get(id).copied().unwrap_or(0) as f64;
                -((c + 1.0) / total).ln()
            })
            .sum();
        sum / ids.len() as f64
    }

    pub fn complexity_term(&self, mol: &Molecule) -> f64 {
        let rings = mol.smallest_rings();
        let n = mol.atom_count() as f64;
        let size = n.powf(1.005) - n;
        let macro_ = rings.iter().any(|r| r.len() > self.macrocycle_size);
        self.ring_penalty * rings.len() as f64 + if macro_ { self.macrocycle_penalty } else { 0.0 } + size
    }

    /// Score in [1, 10]; lower is easier.
    pub fn score(&self, mol: &Molecule) -> f64 {
        (1.0 + self.fragment_term(mol) + self.complexity_term(mol)).clamp(1.0, 10.0)
    }

    pub fn scores(&self, mols: &[Molecule]) -> Vec<f64> {
        mols.par_iter().map(|m| self.score(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub generated: usize,
    pub valid: usize,
    pub unique: usize,
    pub novel: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    /// Against the training split; absent when either set has fewer than
    /// two valid molecules.
    pub ffd: Option<f64>,
    pub sa_mean: f64,
    #[serde(skip)]
    pub sa_scores: Vec<f64>,
}

pub const CSV_HEADER: &str = "generated,valid,unique,novel,validity,uniqueness,novelty,ffd,sa_mean";

impl EvalReport {
    pub fn report(&self) -> String {
        let mut s = String::from("# ffd reference: training split\n");
        let _ = writeln!(s, "generated: {}", self.generated);
        let _ = writeln!(s, "valid: {}", self.valid);
        let _ = writeln!(s, "unique: {}", self.unique);
        let _ = writeln!(s, "novel: {}", self.novel);
        let _ = writeln!(s, "validity: {:.4}", self.validity);
        let _ = writeln!(s, "uniqueness: {:.4}", self.uniqueness);
        let _ = writeln!(s, "novelty: {:.4}", self.novelty);
        let _ = writeln!(s, "ffd: {}", self.ffd.map_or("NA".to_string(), |d| format!("{d:.4}")));
        let _ = writeln!(s, "sa_mean: {:.4}", self.sa_mean);
        s
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{:.6}",
            self.generated,
            self.valid,
            self.unique,
            self.novel,
            self.validity,
            self.uniqueness,
            self.novelty,
            self.ffd.map_or("NA".to_string(), |d| format!("{d:.6}")),
            self.sa_mean
        )
    }
}

/// Validity over all generated strings; uniqueness, novelty, FFD and SA over
/// the valid ones.
pub fn evaluate<S: AsRef<str> + Sync, T: AsRef<str> + Sync>(
    generated: &[S],
    training: &[T],
    sa: &SaModel,
) -> Result<EvalReport, MetricsError> {
    if generated.is_empty() {
        return Err(MetricsError::Empty);
    }
    let parse = |s: &str| parse_smiles(s).ok().filter(|m| m.is_valence_valid());
    let gen: Vec<Molecule> = generated.par_iter().filter_map(|s| parse(s.as_ref())).collect();
    let train: Vec<Molecule> = training.par_iter().filter_map(|s| parse(s.as_ref())).collect();
    let gen_keys: Vec<String> = gen.par_iter().map(canonical_smiles).collect();
    let train_keys: Vec<String> = train.par_iter().map(canonical_smiles).collect();
    let valid = gen.len();
    let validity = valid as f64 / generated.len() as f64;
    let (uniq, nov) = if valid == 0 {
        (0.0, 0.0)
    } else {
        (uniqueness(&gen_keys)?, novelty(&gen_keys, &train_keys)?)
    };
    let ffd = match ffd(&gen, &train) {
        Ok(d) => Some(d),
        Err(MetricsError::Undersized { .. }) => None,
        Err(e) => return Err(e),
    };
    let sa_scores = sa.scores(&gen);
    let sa_mean = if sa_scores.is_empty() {
        0.0
    } else {
        sa_scores.iter().sum::<f64>() / sa_scores.len() as f64
    };
    Ok(EvalReport {
        generated: generated.len(),
        valid,
        unique: (uniq * valid as f64).round() as usize,
        novel: (nov * valid as f64).round() as usize,
        validity,
        uniqueness: uniq,
        novelty: nov,
        ffd,
        sa_mean,
        sa_scores,
    })
}

/// Fractions of molecules classified lipid-like and ionizable lipid.
pub fn property_rates(mols: &[Molecule], model: &PropertyModel) -> Result<(f64, f64), MetricsError> {
    if mols.is_empty() {
        return Err(MetricsError::Empty);
    }
    let flags: Vec<(bool, bool)> = mols
        .par_iter()
        .map(|m| {
            let lipid = model.is_lipid_like(m);
            (lipid, lipid && model.charge_window_ok(m))
        })
        .collect();
    let n = mols.len() as f64;
    let lipid = flags.iter().filter(|f| f.0).count() as f64 / n;
    let ion = flags.iter().filter(|f| f.1).count() as f64 / n;
    Ok((lipid, ion))
}

/// Counts per bin of width `width` starting at `lo`, as `bin_lo,bin_hi,count`.
/// Values outside the range go to the nearest end bin.
pub fn histogram_csv(values: &[f64], lo: f64, hi: f64, width: f64) -> String {
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = ((v - lo) / width).floor();
        counts[(i.max(0.0) as usize).min(bins - 1)] += 1;
    }
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let _ = writeln!(s, "{a:.2},{:.2},{c}", a + width);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mols(xs: &[&str]) -> Vec<Molecule> {
        xs.iter().map(|s| parse_smiles(s).unwrap()).collect()
    }

    #[test]
    fn set_fractions() {
        assert_eq!(validity(&["CCO", "C1CC"]).unwrap(), 0.5);
        assert_eq!(validity::<&str>(&[]), Err(MetricsError::Empty));
        assert!((uniqueness(&["A", "A", "B"]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(novelty(&["A", "B"], &["A"]).unwrap(), 0.5);
        assert_eq!(novelty(&["A", "B"], &["C"]).unwrap(), 1.0);
        assert_eq!(uniqueness::<&str>(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn ffd_of_shifted_means() {
        let a = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        let b = vec![vec![4.0, 5.0], vec![2.0, 3.0]];
        assert!((ffd_descriptors(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(ffd_descriptors(&a, &a).unwrap(), 0.0);
        assert!(matches!(ffd_descriptors(&a[..1], &b), Err(MetricsError::Undersized { .. })));
    }

    #[test]
    fn ffd_on_molecules_is_symmetric() {
        let a = mols(&["CCCCCCCCCC(=O)O", "CCCCCCCCO", "OCCN(CCO)CCO"]);
        let b = mols(&["c1ccccc1", "CCN", "CC(=O)OC", "C1CCCCC1"]);
        assert_eq!(ffd(&a, &a).unwrap(), 0.0);
        let d = ffd(&a, &b).unwrap();
        assert!(d > 0.0);
        assert_eq!(d, ffd(&b, &a).unwrap());
        assert_eq!(descriptor(&a[0]).len(), DESCRIPTOR_LEN);
    }

    #[test]
    fn sa_prefers_chains_over_fused_rings() {
        let corpus = mols(&["CCCCCCCCCC(=O)O", "CCCCCCCCCCCC(=O)O", "OCCN(CCO)CCO", "CCCCCCCCO"]);
        let sa = SaModel::from_molecules(&corpus);
        // 14 heavy atoms each
        let chain = parse_smiles("CCCCCCCCCCC(=O)OC").unwrap();
        let fused = parse_smiles("C1CC2CC3CCCCC3CC2CC1").unwrap();
        assert_eq!(chain.atom_count(), fused.atom_count());
        let (a, b) = (sa.score(&chain), sa.score(&fused));
        assert!(a < b, "{a} {b}");
        for s in [a, b] {
            assert!((1.0..=10.0).contains(&s));
        }
        assert_eq!(a, sa.score(&chain));
    }

    #[test]
    fn evaluation_report() {
        let sa = SaModel::from_molecules(&mols(&["CCCCCCCCCC(=O)O", "OCCN(CCO)CCO"]));
        let r = evaluate(
            &["CCCCCCCCCC(=O)O", "OC(=O)CCCCCCCCC", "CCCCCCCCO", "C1CC"],
            &["CCCCCCCCCC(=O)O", "OCCN(CCO)CCO"],
            &sa,
        )
        .unwrap();
        assert_eq!((r.generated, r.valid, r.unique, r.novel), (4, 3, 2, 1));
        assert_eq!(r.validity, 0.75);
        assert!(r.ffd.unwrap() > 0.0);
        assert!(r.report().contains("validity: 0.7500"));
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn classification_rates() {
        let m = mols(&["CCCCCCCCCC(=O)OCCN(CCOC(=O)CCCCCCCCC)CCOC(=O)CCCCCCCCC", "CCO"]);
        let (lipid, ion) = property_rates(&m, &PropertyModel::default()).unwrap();
        assert_eq!(lipid, 0.5);
        assert!(ion <= lipid);
        assert!(property_rates(&[], &PropertyModel::default()).is_err());
    }

    #[test]
    fn histogram_bins() {
        let csv = histogram_csv(&[1.0, 1.2, 9.9, 12.0], 1.0, 10.0, 1.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1], "1.00,2.00,2");
        assert_eq!(lines[9], "9.00,10.00,2");
    }
}
