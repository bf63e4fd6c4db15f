//! Reaction templates: two reactive-site patterns plus a graph rewrite.
//!
//! A template file holds one template per line, tab-separated:
//!
//! ```text
//! amidation	carboxylic_acid	amine_nh	break a.c-a.oh; form a.c-b.n; hmove b.n>a.oh
//! ```
//!
//! Lines are in priority order (first line wins). `a.` and `b.` address the
//! atoms of the site matched by the first and second pattern. Rewrite steps:
//! `break x-y` removes a bond, `form x-y` (or `x=y`, `x#y`) adds one, and
//! `hmove x>y` moves one hydrogen (`hmove x>y:2` moves two).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::molgraph::{
    canonical_ranks, find_functional_groups, BondOrder, Element, GroupKind, Molecule,
};

/// Reactive site shapes a template can ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteKind {
    /// atoms: c (carbonyl carbon), o (carbonyl oxygen), oh (hydroxy oxygen)
    CarboxylicAcid,
    /// atoms: o, c
    Hydroxyl,
    /// atoms: n; any non-amide amine still carrying a hydrogen
    AmineNh,
    /// atoms: c, o, oe (ether oxygen), r (alkoxy carbon)
    Ester,
    /// atoms: c, x; Cl, Br or I on a non-aromatic carbon
    AlkylHalide,
}

impl SiteKind {
    pub const ALL: [SiteKind; 5] = [
        SiteKind::CarboxylicAcid,
        SiteKind::Hydroxyl,
        SiteKind::AmineNh,
        SiteKind::Ester,
        SiteKind::AlkylHalide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SiteKind::CarboxylicAcid => "carboxylic_acid",
            SiteKind::Hydroxyl => "hydroxyl",
            SiteKind::AmineNh => "amine_nh",
            SiteKind::Ester => "ester",
            SiteKind::AlkylHalide => "alkyl_halide",
        }
    }

    pub fn atom_names(self) -> &'static [&'static str] {
        match self {
            SiteKind::CarboxylicAcid => &["c", "o", "oh"],
            SiteKind::Hydroxyl => &["o", "c"],
            SiteKind::AmineNh => &["n"],
            SiteKind::Ester => &["c", "o", "oe", "r"],
            SiteKind::AlkylHalide => &["c", "x"],
        }
    }

    /// All sites of this kind, ordered by the canonical rank of their first atom.
    pub fn find(self, mol: &Molecule) -> Vec<Vec<usize>> {
        let mut sites: Vec<Vec<usize>> = match self {
            SiteKind::AlkylHalide => mol
                .bonds()
                .iter()
                .filter_map(|b| {
                    let (c, x) = if mol.atom(b.a).element.is_halogen() {
                        (b.b, b.a)
                    } else {
                        (b.a, b.b)
                    };
                    let xe = mol.atom(x).element;
                    let ca = mol.atom(c);
                    (b.order == BondOrder::Single
                        && matches!(xe, Element::Cl | Element::Br | Element::I)
                        && ca.element == Element::C
                        && !ca.aromatic)
                        .then(|| vec![c, x])
                })
                .collect(),
            _ => find_functional_groups(mol)
                .into_iter()
                .filter(|h| match self {
                    SiteKind::CarboxylicAcid => h.kind == GroupKind::CarboxylicAcid,
                    SiteKind::Hydroxyl => h.kind == GroupKind::Hydroxyl,
                    SiteKind::Ester => h.kind == GroupKind::Ester,
                    SiteKind::AmineNh => h.kind.is_amine() && mol.atom(h.center()).hydrogens > 0,
                    SiteKind::AlkylHalide => unreachable!(),
                })
                .map(|h| h.atoms)
                .collect(),
        };
        if sites.len() > 1 {
            let ranks = canonical_ranks(mol);
            sites.sort_by_key(|s| (ranks[s[0]], s.get(1).map(|&a| ranks[a])));
        }
        sites
    }
}

impl fmt::Display for SiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SiteKind {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SiteKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TemplateError::UnknownPattern(s.to_string()))
    }
}

/// An atom of the matched site on reactant `role` (0 = a, 1 = b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtomRef {
    pub role: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteOp {
    Break(AtomRef, AtomRef),
    Form(AtomRef, AtomRef, BondOrder),
    MoveHydrogen { from: AtomRef, to: AtomRef, count: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionTemplate {
    pub name: String,
    pub patterns: [SiteKind; 2],
    pub ops: Vec<RewriteOp>,
    /// Lower value is tried first.
    pub priority: usize,
    pub(crate) source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("unknown reactant pattern '{0}'")]
    UnknownPattern(String),
    #[error("line {line}: {message}")]
    Rewrite { line: usize, message: String },
    #[error("line {line}: duplicate template name '{name}'")]
    DuplicateName { line: usize, name: String },
    #[error("template file defines no templates")]
    Empty,
}

fn parse_atom(token: &str, patterns: &[SiteKind; 2]) -> Result<AtomRef, String> {
    let (role, name) = token
        .trim()
        .split_once('.')
        .ok_or_else(|| format!("atom reference '{token}' lacks a role prefix"))?;
    let role = match role {
        "a" => 0,
        "b" => 1,
        other => return Err(format!("unknown role '{other}' (use a or b)")),
    };
    let slot = patterns[role]
        .atom_names()
        .iter()
        .position(|&n| n == name)
        .ok_or_else(|| format!("pattern {} has no atom named '{name}'", patterns[role]))?;
    Ok(AtomRef { role, slot })
}

fn parse_op(text: &str, patterns: &[SiteKind; 2]) -> Result<RewriteOp, String> {
    let (verb, args) = text
        .trim()
        .split_once(char::is_whitespace)
        .ok_or_else(|| format!("cannot read rewrite step '{text}'"))?;
    let args = args.trim();
    match verb {
        "break" => {
            let (x, y) = args
                .split_once('-')
                .ok_or_else(|| format!("break needs x-y, got '{args}'"))?;
            Ok(RewriteOp::Break(parse_atom(x, patterns)?, parse_atom(y, patterns)?))
        }
        "form" => {
            let (pos, order) = args
                .char_indices()
                .find_map(|(i, c)| match c {
                    '-' => Some((i, BondOrder::Single)),
                    '=' => Some((i, BondOrder::Double)),
                    '#' => Some((i, BondOrder::Triple)),
                    _ => None,
                })
                .ok_or_else(|| format!("form needs x-y, x=y or x#y, got '{args}'"))?;
            Ok(RewriteOp::Form(
                parse_atom(&args[..pos], patterns)?,
                parse_atom(&args[pos + 1..], patterns)?,
                order,
            ))
        }
        "hmove" => {
            let (pair, count) = match args.split_once(':') {
                Some((p, c)) => (p, c.trim().parse::<u8>().map_err(|_| format!("bad hydrogen count '{c}'"))?),
                None => (args, 1),
            };
            let (x, y) = pair
                .split_once('>')
                .ok_or_else(|| format!("hmove needs x>y, got '{pair}'"))?;
            Ok(RewriteOp::MoveHydrogen {
                from: parse_atom(x, patterns)?,
                to: parse_atom(y, patterns)?,
                count,
            })
        }
        other => Err(format!("unknown rewrite step '{other}'")),
    }
}

impl ReactionTemplate {
    pub fn parse_line(line: &str, line_no: usize, priority: usize) -> Result<Self, TemplateError> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(TemplateError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let patterns = [fields[1].trim().parse()?, fields[2].trim().parse()?];
        let ops = fields[3]
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_op(s, &patterns))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| TemplateError::Rewrite {
                line: line_no,
                message,
            })?;
        if ops.is_empty() {
            return Err(TemplateError::Rewrite {
                line: line_no,
                message: "empty rewrite".to_string(),
            });
        }
        Ok(ReactionTemplate {
            name: fields[0].trim().to_string(),
            patterns,
            ops,
            priority,
            source: line.to_string(),
        })
    }

    /// Every atom the rewrite names, as (role, slot).
    pub fn touched(&self) -> Vec<AtomRef> {
        let mut out = Vec::new();
        for op in &self.ops {
            let (x, y) = match *op {
                RewriteOp::Break(x, y) | RewriteOp::Form(x, y, _) => (x, y),
                RewriteOp::MoveHydrogen { from, to, .. } => (from, to),
            };
            for r in [x, y] {
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
        out
    }

    /// The line this template was parsed from.
    pub fn source_line(&self) -> &str {
        &self.source
    }
}

/// Parses a whole template file; blank lines and `#` comments are skipped.
pub fn parse_templates(text: &str) -> Result<Vec<ReactionTemplate>, TemplateError> {
    let mut out: Vec<ReactionTemplate> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let t = ReactionTemplate::parse_line(line, i + 1, out.len())?;
        if out.iter().any(|o| o.name == t.name) {
            return Err(TemplateError::DuplicateName {
                line: i + 1,
                name: t.name,
            });
        }
        out.push(t);
    }
    if out.is_empty() {
        return Err(TemplateError::Empty);
    }
    Ok(out)
}

pub const DEFAULT_TEMPLATES: &str = include_str!("default_templates.tsv");

pub fn default_templates() -> Vec<ReactionTemplate> {
    parse_templates(DEFAULT_TEMPLATES).expect("bundled templates parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn bundled_templates_in_priority_order() {
        let names: Vec<String> = default_templates().into_iter().map(|t| t.name).collect();
        assert_eq!(
            names,
            ["amidation", "esterification", "ester_aminolysis", "n_alkylation"]
        );
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_templates("x\tcarboxylic_acid\tamine_nh"),
            Err(TemplateError::FieldCount { line: 1, found: 3 })
        );
        assert_eq!(
            parse_templates("x\tketone\tamine_nh\tbreak a.c-a.o"),
            Err(TemplateError::UnknownPattern("ketone".into()))
        );
        assert!(matches!(
            parse_templates("x\tcarboxylic_acid\tamine_nh\tbreak a.c-b.q"),
            Err(TemplateError::Rewrite { line: 1, .. })
        ));
        assert!(matches!(
            parse_templates("# nothing\n\n"),
            Err(TemplateError::Empty)
        ));
        let dup = "x\tcarboxylic_acid\tamine_nh\tform a.c-b.n\nx\tcarboxylic_acid\tamine_nh\tform a.c-b.n";
        assert!(matches!(
            parse_templates(dup),
            Err(TemplateError::DuplicateName { line: 2, .. })
        ));
    }

    #[test]
    fn rewrite_steps() {
        let t = ReactionTemplate::parse_line(
            "t\tcarboxylic_acid\tamine_nh\tbreak a.c-a.oh; form a.c=b.n; hmove b.n>a.oh:2",
            1,
            0,
        )
        .unwrap();
        assert_eq!(
            t.ops,
            vec![
                RewriteOp::Break(AtomRef { role: 0, slot: 0 }, AtomRef { role: 0, slot: 2 }),
                RewriteOp::Form(
                    AtomRef { role: 0, slot: 0 },
                    AtomRef { role: 1, slot: 0 },
                    BondOrder::Double
                ),
                RewriteOp::MoveHydrogen {
                    from: AtomRef { role: 1, slot: 0 },
                    to: AtomRef { role: 0, slot: 2 },
                    count: 2
                },
            ]
        );
        assert_eq!(t.touched().len(), 3);
    }

    #[test]
    fn site_finding() {
        let m = parse_smiles("OCC(CO)N").unwrap();
        assert_eq!(SiteKind::Hydroxyl.find(&m).len(), 2);
        assert_eq!(SiteKind::AmineNh.find(&m).len(), 1);
        let m = parse_smiles("CCCCBr").unwrap();
        assert_eq!(SiteKind::AlkylHalide.find(&m), vec![vec![3, 4]]);
        let m = parse_smiles("CCN(CC)CC").unwrap();
        assert!(SiteKind::AmineNh.find(&m).is_empty());
    }
}
