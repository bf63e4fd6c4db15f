use std::fmt;
use std::str::FromStr;

/// Chemical elements accepted by the SMILES reader.
///
/// The organic subset (B, C, N, O, P, S, F, Cl, Br, I) may be written without
/// brackets; the remaining symbols are only legal inside bracket atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    H,
    Li,
    B,
    C,
    N,
    O,
    F,
    Na,
    Si,
    P,
    S,
    Cl,
    K,
    Se,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 16] = [
        Element::H,
        Element::Li,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Na,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::K,
        Element::Se,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::Li => "Li",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Na => "Na",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::K => "K",
            Element::Se => "Se",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::Li => 3,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::Na => 11,
            Element::Si => 14,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::K => 19,
            Element::Se => 34,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// Standard atomic weight in g/mol.
    pub fn mass(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::Li => 6.94,
            Element::B => 10.81,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::Na => 22.990,
            Element::Si => 28.085,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::K => 39.098,
            Element::Se => 78.971,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn is_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// Elements that may carry the aromatic (lowercase) flag.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S | Element::Se
        )
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Allowed valences of the neutral element, ascending.
    fn neutral_valences(self) -> &'static [u8] {
        match self {
            Element::H | Element::Li | Element::Na | Element::K => &[1],
            Element::B => &[3],
            Element::C | Element::Si => &[4],
            Element::N => &[3],
            Element::O | Element::Se => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Allowed valences for the given formal charge, ascending.
    ///
    /// Charged atoms follow the isoelectronic shift: a cationic N behaves like
    /// C (valence 4), an anionic O like F (valence 1), a carbanion like N.
    pub fn valences(self, charge: i8) -> Vec<u8> {
        if charge == 0 {
            return self.neutral_valences().to_vec();
        }
        let shift: i16 = match self {
            // group 13/14 lose one bond per unit of charge either way, except
            // boron anions which become tetravalent
            Element::B => -(charge as i16),
            Element::C | Element::Si => -(charge.unsigned_abs() as i16),
            Element::N | Element::O | Element::P | Element::S | Element::Se => charge as i16,
            Element::F | Element::Cl | Element::Br | Element::I => charge as i16,
            Element::H | Element::Li | Element::Na | Element::K => -(charge.unsigned_abs() as i16),
        };
        let mut out: Vec<u8> = self
            .neutral_valences()
            .iter()
            .map(|&v| v as i16 + shift)
            .filter(|&v| v >= 0)
            .map(|v| v as u8)
            .collect();
        if out.is_empty() {
            out.push(0);
        }
        out
    }

    pub fn max_valence(self, charge: i8) -> u8 {
        *self.valences(charge).last().expect("valence list is never empty")
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or(())
    }
}
