use crate::molgraph::{canonical_smiles, Bond, Molecule};

use super::template::{default_templates, AtomRef, ReactionTemplate, RewriteOp};
use super::{OutcomeStatus, ReactionOutcome, ReactionPredictor, RewriteTrace};

/// Where every atom of the combined reactant graph came from.
fn origin_of(a_len: usize, combined: usize) -> (usize, usize) {
    if combined < a_len {
        (0, combined)
    } else {
        (1, combined - a_len)
    }
}

/// Applies `template` with `first` in role a and `second` in role b, at the
/// first pair of sites in canonical order. `None` means no site pair exists.
fn apply_oriented(
    t: &ReactionTemplate,
    first: &Molecule,
    second: &Molecule,
    swapped: bool,
) -> Option<ReactionOutcome> {
    let sites_a = t.patterns[0].find(first);
    if sites_a.is_empty() {
        return None;
    }
    let sites_b = t.patterns[1].find(second);
    let site_b = sites_b.first()?;
    let site_a = &sites_a[0];
    let offset = first.atom_count();
    let resolve = |r: AtomRef| -> usize {
        if r.role == 0 {
            site_a[r.slot]
        } else {
            offset + site_b[r.slot]
        }
    };
    let combined = first.disjoint_union(second);
    let mut atoms = combined.atoms().to_vec();
    let mut bonds: Vec<Bond> = combined.bonds().to_vec();
    let fail = |message: String| {
        Some(ReactionOutcome::error(message).with_template(&t.name))
    };
    for op in &t.ops {
        match *op {
            RewriteOp::Break(x, y) => {
                let (x, y) = (resolve(x), resolve(y));
                match bonds.iter().position(|b| (b.a == x && b.b == y) || (b.a == y && b.b == x)) {
                    Some(i) => {
                        bonds.remove(i);
                    }
                    None => return fail(format!("{}: no bond {x}-{y} to break", t.name)),
                }
            }
            RewriteOp::Form(x, y, order) => {
                let (x, y) = (resolve(x), resolve(y));
                if x == y || bonds.iter().any(|b| (b.a == x && b.b == y) || (b.a == y && b.b == x)) {
                    return fail(format!("{}: cannot form bond {x}-{y}", t.name));
                }
                bonds.push(Bond::new(x, y, order));
            }
            RewriteOp::MoveHydrogen { from, to, count } => {
                let (x, y) = (resolve(from), resolve(to));
                if atoms[x].hydrogens < count {
                    return fail(format!("{}: atom {x} has too few hydrogens", t.name));
                }
                atoms[x].hydrogens -= count;
                atoms[y].hydrogens += count;
            }
        }
    }
    let rewritten = match Molecule::new(atoms, bonds) {
        Ok(m) => m,
        Err(e) => return fail(format!("{}: rewrite breaks valence: {e}", t.name)),
    };

    let mut fragments: Vec<(Molecule, Vec<usize>, String)> = rewritten
        .fragments()
        .into_iter()
        .map(|(m, map)| {
            let key = canonical_smiles(&m);
            (m, map, key)
        })
        .collect();
    // largest fragment first; ties broken by canonical text
    fragments.sort_by(|x, y| {
        y.0.atom_count()
            .cmp(&x.0.atom_count())
            .then_with(|| x.2.cmp(&y.2))
    });

    let unswap = |(role, idx): (usize, usize)| if swapped { (1 - role, idx) } else { (role, idx) };
    let touched = t
        .touched()
        .into_iter()
        .map(|r| unswap(origin_of(offset, resolve(r))))
        .collect();
    let provenance = fragments
        .iter()
        .map(|(_, map, _)| map.iter().map(|&c| unswap(origin_of(offset, c))).collect())
        .collect();
    let mut frags = fragments.into_iter().map(|(m, _, _)| m);
    let main = frags.next().expect("rewrite keeps at least one fragment");
    Some(ReactionOutcome {
        status: OutcomeStatus::Ok,
        products: vec![main],
        by_products: frags.collect(),
        template: Some(t.name.clone()),
        message: None,
        trace: Some(RewriteTrace { touched, provenance }),
    })
}

/// Tries both assignments of the reactants to the template's two roles.
pub fn apply_template(t: &ReactionTemplate, a: &Molecule, b: &Molecule) -> ReactionOutcome {
    apply_oriented(t, a, b, false)
        .or_else(|| apply_oriented(t, b, a, true))
        .unwrap_or_else(ReactionOutcome::no_reaction)
}

/// Deterministic template engine; templates are tried in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateEngine {
    templates: Vec<ReactionTemplate>,
}

impl Default for TemplateEngine {
    fn default() -> Self {
        TemplateEngine::new(default_templates())
    }
}

impl TemplateEngine {
    pub fn new(mut templates: Vec<ReactionTemplate>) -> Self {
        templates.sort_by_key(|t| t.priority);
        TemplateEngine { templates }
    }

    pub fn templates(&self) -> &[ReactionTemplate] {
        &self.templates
    }

    pub fn react(&self, a: &Molecule, b: &Molecule) -> ReactionOutcome {
        for t in &self.templates {
            let out = apply_template(t, a, b);
            if out.status != OutcomeStatus::NoReaction {
                return out;
            }
        }
        ReactionOutcome::no_reaction()
    }
}

impl ReactionPredictor for TemplateEngine {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome {
        match reactants {
            [a, b] => self.react(a, b),
            _ => ReactionOutcome::error(format!(
                "expected 2 reactants, got {}",
                reactants.len()
            )),
        }
    }
}
