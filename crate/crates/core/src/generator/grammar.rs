use crate::blocks::{BuildingBlockPool, Role};
use crate::dag::Action;
use crate::molgraph::{ecfp_fingerprint, Molecule, DEFAULT_RADIUS};

/// Limits applied on top of the action grammar while training and sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraints {
    pub min_tails: usize,
    pub max_tails: usize,
    /// Tails must have at least this longest chain.
    pub min_tail_chain: Option<usize>,
    /// Every product joins exactly two nodes.
    pub exact_two_connects: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            min_tails: 1,
            max_tails: 3,
            min_tail_chain: None,
            exact_two_connects: true,
        }
    }
}

impl Constraints {
    pub fn two_tails(min_tail_chain: Option<usize>) -> Self {
        Constraints {
            min_tails: 2,
            max_tails: 2,
            min_tail_chain,
            ..Constraints::default()
        }
    }
}

/// The parts of a pool the model reads: fingerprint bits, roles, chains.
#[derive(Debug, Clone)]
pub struct PoolView {
    pub bits: Vec<Vec<u32>>,
    pub roles: Vec<Role>,
    pub chains: Vec<usize>,
    pub fp_width: usize,
}

pub fn fingerprint_bits(mol: &Molecule, width: usize) -> Vec<u32> {
    ecfp_fingerprint(mol, DEFAULT_RADIUS, width).ones().map(|b| b as u32).collect()
}

impl PoolView {
    pub fn new(pool: &BuildingBlockPool, fp_width: usize) -> Self {
        let blocks = pool.blocks();
        PoolView {
            bits: blocks
                .iter()
                .map(|b| {
                    if b.fingerprint.width() == fp_width {
                        b.fingerprint.ones().map(|x| x as u32).collect()
                    } else {
                        fingerprint_bits(&b.molecule, fp_width)
                    }
                })
                .collect(),
            roles: blocks.iter().map(|b| b.role).collect(),
            chains: blocks.iter().map(|b| b.chain).collect(),
            fp_width,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Entries allowed as the first block (heads) or as a later one (tails).
    pub fn allowed(&self, first: bool, c: &Constraints) -> Vec<bool> {
        (0..self.len())
            .map(|j| {
                if first {
                    self.roles[j] == Role::Head
                } else {
                    self.roles[j] == Role::Tail && c.min_tail_chain.is_none_or(|m| self.chains[j] >= m)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// Index 0 adds a block, 1 a product.
    NodeAdd([bool; 2]),
    /// Pool entries.
    Identity(Vec<bool>),
    /// Existing nodes, then continue, then stop.
    Connect(Vec<bool>),
}

impl Decision {
    pub fn valid(&self) -> &[bool] {
        match self {
            Decision::NodeAdd(v) => v,
            Decision::Identity(v) | Decision::Connect(v) => v,
        }
    }

    pub fn options(&self) -> usize {
        self.valid().iter().filter(|&&v| v).count()
    }

    /// Candidate index of `a`, if it belongs to this decision.
    pub fn index_of(&self, a: Action) -> Option<usize> {
        let n = self.valid().len();
        match (self, a) {
            (Decision::NodeAdd(_), Action::NodeAddBlock) => Some(0),
            (Decision::NodeAdd(_), Action::NodeAddProduct) => Some(1),
            (Decision::Identity(_), Action::Identity(j)) => Some(j),
            (Decision::Connect(_), Action::Connect(k)) if k + 2 < n => Some(k),
            (Decision::Connect(_), Action::Continue) => Some(n - 2),
            (Decision::Connect(_), Action::Stop) => Some(n - 1),
            _ => None,
        }
    }

    pub fn action_at(&self, idx: usize) -> Action {
        let n = self.valid().len();
        match self {
            Decision::NodeAdd(_) if idx == 0 => Action::NodeAddBlock,
            Decision::NodeAdd(_) => Action::NodeAddProduct,
            Decision::Identity(_) => Action::Identity(idx),
            Decision::Connect(_) if idx + 2 == n => Action::Continue,
            Decision::Connect(_) if idx + 1 == n => Action::Stop,
            Decision::Connect(_) => Action::Connect(idx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    NodeAdd,
    Identity,
    Connect { product: usize, chosen: Vec<usize> },
    Done,
}

/// Tracks which actions are legal after a prefix of a route.
#[derive(Debug, Clone)]
pub struct GrammarState {
    /// Per node: not yet consumed by a product.
    open: Vec<bool>,
    tails: usize,
    phase: Phase,
}

/// What an accepted action did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    None,
    /// A block node was created from this pool entry.
    Block(usize),
    /// The product node was closed; reactants ascending.
    Closed {
        product: usize,
        reactants: Vec<usize>,
        last: bool,
    },
}

impl Default for GrammarState {
    fn default() -> Self {
        GrammarState::new()
    }
}

impl GrammarState {
    pub fn new() -> Self {
        GrammarState {
            open: Vec::new(),
            tails: 0,
            phase: Phase::NodeAdd,
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn node_count(&self) -> usize {
        self.open.len()
    }

    pub fn tails(&self) -> usize {
        self.tails
    }

    fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn reactants(&self) -> Option<&[usize]> {
        match &self.phase {
            Phase::Connect { chosen, .. } => Some(chosen),
            _ => None,
        }
    }

    pub fn decision(&self, c: &Constraints, pool: &PoolView) -> Option<Decision> {
        match &self.phase {
            Phase::Done => None,
            Phase::NodeAdd => {
                if self.open.is_empty() {
                    return Some(Decision::NodeAdd([true, false]));
                }
                Some(Decision::NodeAdd([self.tails < c.max_tails, self.open_count() >= 2]))
            }
            Phase::Identity => Some(Decision::Identity(pool.allowed(self.open.is_empty(), c))),
            Phase::Connect { product, chosen } => {
                let n = self.open.len();
                let last = chosen.last().copied();
                let candidates: Vec<usize> = (0..n)
                    .filter(|&i| i != *product && self.open[i] && last.is_none_or(|l| i > l))
                    .collect();
                // connects still owed after this one
                let owed = 2usize.saturating_sub(chosen.len() + 1);
                let mut valid = vec![false; n + 2];
                let may_connect = !(c.exact_two_connects && chosen.len() >= 2);
                if may_connect {
                    for (k, &i) in candidates.iter().enumerate() {
                        if candidates.len() - k - 1 >= owed {
                            valid[i] = true;
                        }
                    }
                }
                if chosen.len() >= 2 {
                    let open_after = self.open_count() + 1;
                    valid[n] = open_after >= 2 || self.tails < c.max_tails;
                    valid[n + 1] = open_after == 1 && self.tails >= c.min_tails;
                }
                Some(Decision::Connect(valid))
            }
        }
    }

    /// Applies `a` if the current decision allows it.
    pub fn apply(&mut self, a: Action, c: &Constraints, pool: &PoolView) -> Result<Effect, String> {
        let d = self.decision(c, pool).ok_or("action after stop")?;
        let idx = d
            .index_of(a)
            .filter(|&i| d.valid().get(i).copied().unwrap_or(false))
            .ok_or_else(|| format!("{a} is masked here"))?;
        Ok(self.apply_index(&d, idx))
    }

    /// Applies candidate `idx` of decision `d`, which must be valid.
    pub fn apply_index(&mut self, d: &Decision, idx: usize) -> Effect {
        match d.action_at(idx) {
            Action::NodeAddBlock => {
                self.phase = Phase::Identity;
                Effect::None
            }
            Action::NodeAddProduct => {
                self.phase = Phase::Connect {
                    product: self.open.len(),
                    chosen: Vec::new(),
                };
                self.open.push(false);
                Effect::None
            }
            Action::Identity(j) => {
                if !self.open.is_empty() {
                    self.tails += 1;
                }
                self.open.push(true);
                self.phase = Phase::NodeAdd;
                Effect::Block(j)
            }
            Action::Connect(k) => {
                self.open[k] = false;
                if let Phase::Connect { chosen, .. } = &mut self.phase {
                    chosen.push(k);
                }
                Effect::None
            }
            a @ (Action::Continue | Action::Stop) => {
                let last = a == Action::Stop;
                let next = if last { Phase::Done } else { Phase::NodeAdd };
                let Phase::Connect { product, chosen } = std::mem::replace(&mut self.phase, next) else {
                    unreachable!("terminal actions only follow connects")
                };
                self.open[product] = true;
                Effect::Closed {
                    product,
                    reactants: chosen,
                    last,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    fn pool() -> PoolView {
        PoolView {
            bits: vec![vec![0], vec![1], vec![2]],
            roles: vec![Role::Head, Role::Tail, Role::Tail],
            chains: vec![2, 12, 8],
            fp_width: 8,
        }
    }

    fn run(seq: &[Action], c: &Constraints) -> Result<GrammarState, String> {
        let p = pool();
        let mut g = GrammarState::new();
        for &a in seq {
            g.apply(a, c, &p)?;
        }
        Ok(g)
    }

    #[test]
    fn pipeline_route_accepted() {
        let seq = [
            NodeAddBlock, Identity(0), NodeAddBlock, Identity(1), NodeAddProduct, Connect(0),
            Connect(1), Continue, NodeAddBlock, Identity(2), NodeAddProduct, Connect(2),
            Connect(3), Stop,
        ];
        assert!(run(&seq, &Constraints::default()).unwrap().is_done());
        assert!(run(&seq, &Constraints::two_tails(None)).unwrap().is_done());
        // tail 2 has chain 8
        assert!(run(&seq, &Constraints::two_tails(Some(10))).is_err());
    }

    #[test]
    fn masks() {
        let c = Constraints::default();
        let p = pool();
        let g = GrammarState::new();
        assert_eq!(g.decision(&c, &p), Some(Decision::NodeAdd([true, false])));
        let g = run(&[NodeAddBlock], &c).unwrap();
        assert_eq!(g.decision(&c, &p), Some(Decision::Identity(vec![true, false, false])));
        let g = run(&[NodeAddBlock, Identity(0), NodeAddBlock], &c).unwrap();
        assert_eq!(g.decision(&c, &p), Some(Decision::Identity(vec![false, true, true])));
        let g = run(&[NodeAddBlock, Identity(0), NodeAddBlock, Identity(1)], &c).unwrap();
        assert_eq!(g.decision(&c, &p), Some(Decision::NodeAdd([true, true])));
        // first connect must leave a larger partner
        let g = run(&[NodeAddBlock, Identity(0), NodeAddBlock, Identity(1), NodeAddProduct], &c).unwrap();
        assert_eq!(g.decision(&c, &p), Some(Decision::Connect(vec![true, false, false, false, false])));
        let g = run(
            &[NodeAddBlock, Identity(0), NodeAddBlock, Identity(1), NodeAddProduct, Connect(0), Connect(1)],
            &c,
        )
        .unwrap();
        assert_eq!(g.decision(&c, &p), Some(Decision::Connect(vec![false, false, false, true, true])));
        assert!(run(&[NodeAddProduct], &c).is_err());
        assert!(run(&[NodeAddBlock, Identity(1)], &c).is_err());
    }

    #[test]
    fn two_tail_forbids_early_stop() {
        let c = Constraints::two_tails(None);
        let g = run(
            &[NodeAddBlock, Identity(0), NodeAddBlock, Identity(1), NodeAddProduct, Connect(0), Connect(1)],
            &c,
        )
        .unwrap();
        assert_eq!(
            g.decision(&c, &pool()),
            Some(Decision::Connect(vec![false, false, false, true, false]))
        );
    }
}
