//! Extended-connectivity fingerprints and Tanimoto similarity.

use thiserror::Error;

use super::mol::Molecule;

pub const DEFAULT_WIDTH: usize = 1024;
pub const DEFAULT_RADIUS: usize = 2;

/// Fixed-width bit vector plus the neighbourhood radius that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fingerprint widths differ: {0} vs {1}")]
pub struct WidthMismatch(pub usize, pub usize);

impl Fingerprint {
    pub fn empty(width: usize, radius: usize) -> Self {
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        }
    }

    pub fn from_bits(width: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Fingerprint::empty(width, 0);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit % self.width;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            (0..64)
                .filter(move |b| w >> b & 1 == 1)
                .map(move |b| k * 64 + b)
        })
    }

    pub fn intersection_count(&self, other: &Fingerprint) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn union_count(&self, other: &Fingerprint) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_mix(mut h: u64, value: u64) -> u64 {
    for byte in value.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// All environment identifiers for radii `0..=radius` (one per atom per
/// round, duplicates kept).
pub fn ecfp_identifiers(mol: &Molecule, radius: usize) -> Vec<u64> {
    let n = mol.atom_count();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            let mut h = FNV_OFFSET;
            h = fnv_mix(h, a.element.atomic_number() as u64);
            h = fnv_mix(h, mol.degree(i) as u64);
            h = fnv_mix(h, a.charge as i64 as u64);
            h = fnv_mix(h, a.aromatic as u64);
            h = fnv_mix(h, a.hydrogens as u64);
            h
        })
        .collect();
    let mut all = ids.clone();
    for round in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u8, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (mol.bonds()[bi].order.code(), ids[j]))
                    .collect();
                nb.sort_unstable();
                let mut h = fnv_mix(FNV_OFFSET, round as u64);
                h = fnv_mix(h, ids[i]);
                for (order, id) in nb {
                    h = fnv_mix(h, order as u64);
                    h = fnv_mix(h, id);
                }
                h
            })
            .collect();
        all.extend_from_slice(&next);
        ids = next;
    }
    all
}

/// Folds the neighbourhood identifiers of every atom into a `width`-bit vector.
pub fn ecfp_fingerprint(mol: &Molecule, radius: usize, width: usize) -> Fingerprint {
    assert!(width.is_power_of_two(), "fingerprint width must be a power of two");
    let mut fp = Fingerprint::empty(width, radius);
    for id in ecfp_identifiers(mol, radius) {
        fp.set((id % width as u64) as usize);
    }
    fp
}

/// |a ∧ b| / |a ∨ b|, or 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, WidthMismatch> {
    if a.width != b.width {
        return Err(WidthMismatch(a.width, b.width));
    }
    let union = a.union_count(b);
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}
