//! SMILES reader.
//!
//! Supported: organic-subset atoms, aromatic lowercase atoms, bracket atoms
//! with hydrogen count and charge, bonds `- = # :`, branches, ring closures
//! (`1`..`9` and `%nn`). Stereo markers (`/`, `\`, `@`) are read and dropped.
//! Isotopes and multi-fragment input (`.`) are rejected.

use std::collections::BTreeMap;

use thiserror::Error;

use super::element::Element;
use super::mol::{default_hydrogens, Atom, Bond, BondOrder, MolError, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unclosed ring index {0}")]
    UnclosedRing(u32),
    #[error("unbalanced parentheses at position {0}")]
    UnbalancedParentheses(usize),
    #[error("unknown element '{symbol}' at position {position}")]
    UnknownElement { symbol: String, position: usize },
    #[error("valence violation at atom {atom} ({element})")]
    Valence { atom: usize, element: Element },
    #[error("multiple fragments ('.') are not accepted")]
    MultipleFragments,
    #[error("isotope labels are not supported (position {0})")]
    Isotope(usize),
    #[error("unexpected character '{ch}' at position {position}")]
    UnexpectedCharacter { ch: char, position: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("conflicting bond symbols on ring closure {0}")]
    RingBondConflict(u32),
    #[error("invalid molecular graph: {0}")]
    Graph(MolError),
}

impl From<MolError> for SmilesError {
    fn from(e: MolError) -> Self {
        match e {
            MolError::Valence { atom, element, .. } => SmilesError::Valence { atom, element },
            other => SmilesError::Graph(other),
        }
    }
}

struct PendingAtom {
    atom: Atom,
    /// Bracket atoms carry their own hydrogen count.
    bracket: bool,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<Bond>,
    /// ring number -> (atom, optional bond symbol written at the opening)
    open_rings: BTreeMap<u32, (usize, Option<BondOrder>)>,
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut parser = Parser {
        text: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        open_rings: BTreeMap::new(),
    };
    parser.parse()?;
    parser.finish(trimmed)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn unexpected(&self) -> SmilesError {
        match self.peek() {
            Some(c) => SmilesError::UnexpectedCharacter {
                ch: c as char,
                position: self.pos,
            },
            None => SmilesError::UnexpectedEnd,
        }
    }

    fn parse(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut branch_stack: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending_bond: Option<BondOrder> = None;

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if prev.is_none() || pending_bond.is_some() {
                        return Err(SmilesError::UnbalancedParentheses(self.pos));
                    }
                    branch_stack.push((prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branch_stack.pop() else {
                        return Err(SmilesError::UnbalancedParentheses(self.pos));
                    };
                    if pending_bond.is_some() {
                        return Err(self.unexpected());
                    }
                    prev = p;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending_bond.is_some() || prev.is_none() {
                        return Err(self.unexpected());
                    }
                    pending_bond = Some(match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    });
                    self.pos += 1;
                }
                b'.' => return Err(SmilesError::MultipleFragments),
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(self.unexpected());
                    };
                    let ring = self.ring_number()?;
                    self.ring_closure(p, ring, pending_bond.take())?;
                }
                _ => {
                    let idx = self.atom()?;
                    if let Some(p) = prev {
                        let order = pending_bond.take().unwrap_or_else(|| self.implicit_order(p, idx));
                        self.bonds.push(Bond::new(p, idx, order));
                    } else if pending_bond.is_some() {
                        return Err(self.unexpected());
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, pos)) = branch_stack.pop() {
            return Err(SmilesError::UnbalancedParentheses(pos));
        }
        if pending_bond.is_some() {
            return Err(SmilesError::UnexpectedEnd);
        }
        if let Some((&ring, _)) = self.open_rings.iter().next() {
            return Err(SmilesError::UnclosedRing(ring));
        }
        Ok(())
    }

    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_number(&mut self) -> Result<u32, SmilesError> {
        let c = self.peek().ok_or(SmilesError::UnexpectedEnd)?;
        if c == b'%' {
            self.pos += 1;
            let digits = self
                .text
                .get(self.pos..self.pos + 2)
                .ok_or(SmilesError::UnexpectedEnd)?;
            if !digits.iter().all(u8::is_ascii_digit) {
                return Err(self.unexpected());
            }
            self.pos += 2;
            Ok(((digits[0] - b'0') * 10 + (digits[1] - b'0')) as u32)
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        ring: u32,
        bond: Option<BondOrder>,
    ) -> Result<(), SmilesError> {
        match self.open_rings.remove(&ring) {
            None => {
                self.open_rings.insert(ring, (atom, bond));
            }
            Some((other, open_bond)) => {
                let order = match (open_bond, bond) {
                    (Some(x), Some(y)) if x != y => return Err(SmilesError::RingBondConflict(ring)),
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.implicit_order(other, atom),
                };
                if other == atom {
                    return Err(SmilesError::Graph(MolError::SelfBond(atom)));
                }
                self.bonds.push(Bond::new(other, atom, order));
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<usize, SmilesError> {
        let start = self.pos;
        let c = self.peek().ok_or(SmilesError::UnexpectedEnd)?;
        let pending = if c == b'[' {
            self.bracket_atom()?
        } else if c.is_ascii_alphabetic() {
            let (element, aromatic) = self.organic_symbol()?;
            PendingAtom {
                atom: Atom {
                    element,
                    charge: 0,
                    hydrogens: 0,
                    aromatic,
                },
                bracket: false,
            }
        } else {
            return Err(SmilesError::UnexpectedCharacter {
                ch: c as char,
                position: start,
            });
        };
        self.atoms.push(pending);
        Ok(self.atoms.len() - 1)
    }

    fn organic_symbol(&mut self) -> Result<(Element, bool), SmilesError> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        let two = rest.get(..2);
        if two == Some(b"Cl") {
            self.pos += 2;
            return Ok((Element::Cl, false));
        }
        if two == Some(b"Br") {
            self.pos += 2;
            return Ok((Element::Br, false));
        }
        let c = rest[0];
        self.pos += 1;
        let found = match c {
            b'B' => (Element::B, false),
            b'C' => (Element::C, false),
            b'N' => (Element::N, false),
            b'O' => (Element::O, false),
            b'P' => (Element::P, false),
            b'S' => (Element::S, false),
            b'F' => (Element::F, false),
            b'I' => (Element::I, false),
            b'b' => (Element::B, true),
            b'c' => (Element::C, true),
            b'n' => (Element::N, true),
            b'o' => (Element::O, true),
            b'p' => (Element::P, true),
            b's' => (Element::S, true),
            _ => {
                let mut end = self.pos;
                while end < self.text.len() && self.text[end].is_ascii_lowercase() {
                    end += 1;
                }
                return Err(SmilesError::UnknownElement {
                    symbol: String::from_utf8_lossy(&self.text[start..end]).into_owned(),
                    position: start,
                });
            }
        };
        Ok(found)
    }

    fn bracket_atom(&mut self) -> Result<PendingAtom, SmilesError> {
        self.pos += 1; // '['
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(SmilesError::Isotope(self.pos));
        }
        let sym_start = self.pos;
        let first = self.peek().ok_or(SmilesError::UnexpectedEnd)?;
        if !first.is_ascii_alphabetic() {
            return Err(self.unexpected());
        }
        let (element, aromatic) = if first.is_ascii_uppercase() {
            // greedy two-letter match when the pair names a known element
            let two = self.text.get(self.pos..self.pos + 2).and_then(|s| {
                std::str::from_utf8(s).ok().and_then(|s| s.parse::<Element>().ok())
            });
            if let Some(e) = two.filter(|_| self.text[self.pos + 1].is_ascii_lowercase()) {
                self.pos += 2;
                (e, false)
            } else {
                let sym = (first as char).to_string();
                self.pos += 1;
                let e = sym.parse::<Element>().map_err(|_| SmilesError::UnknownElement {
                    symbol: sym.clone(),
                    position: sym_start,
                })?;
                (e, false)
            }
        } else if self.text.get(self.pos..self.pos + 2) == Some(b"se") {
            self.pos += 2;
            (Element::Se, true)
        } else {
            let e = match first {
                b'b' => Element::B,
                b'c' => Element::C,
                b'n' => Element::N,
                b'o' => Element::O,
                b'p' => Element::P,
                b's' => Element::S,
                _ => {
                    return Err(SmilesError::UnknownElement {
                        symbol: (first as char).to_string(),
                        position: sym_start,
                    })
                }
            };
            self.pos += 1;
            (e, true)
        };

        // chirality
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                hydrogens = d - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                charge = unit * (d - b'0') as i32;
                self.pos += 1;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        if self.peek() == Some(b':') {
            // atom class, discarded
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            None => return Err(SmilesError::UnexpectedEnd),
            Some(_) => return Err(self.unexpected()),
        }
        if !(-4..=4).contains(&charge) {
            return Err(SmilesError::Graph(MolError::ChargeOutOfRange {
                atom: self.atoms.len(),
                charge: charge.clamp(-128, 127) as i8,
            }));
        }
        Ok(PendingAtom {
            atom: Atom {
                element,
                charge: charge as i8,
                hydrogens,
                aromatic,
            },
            bracket: true,
        })
    }

    fn finish(self, source: &str) -> Result<Molecule, SmilesError> {
        let bracket: Vec<bool> = self.atoms.iter().map(|p| p.bracket).collect();
        let atoms: Vec<Atom> = self.atoms.into_iter().map(|p| p.atom).collect();
        let mut mol = Molecule::from_parts(atoms, self.bonds)?;
        let mut atoms = mol.atoms().to_vec();
        for (i, atom) in atoms.iter_mut().enumerate() {
            if bracket[i] {
                continue;
            }
            let used = mol.bonded_valence(i);
            atom.hydrogens = default_hydrogens(atom.element, atom.aromatic, used).ok_or(
                SmilesError::Valence {
                    atom: i,
                    element: atom.element,
                },
            )?;
        }
        mol = Molecule::new(atoms, mol.bonds().to_vec())?;
        Ok(mol.with_source(source))
    }
}
