//! Exact unit-cost graph edit distance by depth-first branch and bound.
//!
//! Nodes are labelled by (element, charge, aromaticity) and edges by bond
//! order. Every node/edge insertion, deletion or relabelling costs 1. A search
//! state maps a prefix of the first graph's atoms onto distinct atoms of the
//! second graph or onto deletion; the bound adds label-multiset lower bounds
//! for the unmapped nodes and edges.

use std::collections::HashMap;

use thiserror::Error;

use super::element::Element;
use super::mol::{BondOrder, Molecule};

pub const DEFAULT_SIZE_CAP: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditDistance {
    Within(usize),
    /// The optimum exceeds the requested limit.
    Exceeded,
}

impl EditDistance {
    pub fn value(self) -> Option<usize> {
        match self {
            EditDistance::Within(v) => Some(v),
            EditDistance::Exceeded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("molecule with {atoms} atoms exceeds the exact-search cap of {cap}")]
pub struct SizeCapExceeded {
    pub atoms: usize,
    pub cap: usize,
}

pub type NodeLabel = (Element, i8, bool);

pub(crate) fn node_label(mol: &Molecule, i: usize) -> NodeLabel {
    let a = mol.atom(i);
    (a.element, a.charge, a.aromatic)
}

struct Graph {
    labels: Vec<NodeLabel>,
    adj: Vec<Vec<Option<BondOrder>>>,
    edges: Vec<(usize, usize, BondOrder)>,
}

impl Graph {
    fn new(mol: &Molecule) -> Self {
        let n = mol.atom_count();
        let mut adj = vec![vec![None; n]; n];
        let mut edges = Vec::with_capacity(mol.bond_count());
        for b in mol.bonds() {
            adj[b.a][b.b] = Some(b.order);
            adj[b.b][b.a] = Some(b.order);
            edges.push((b.a, b.b, b.order));
        }
        Graph {
            labels: (0..n).map(|i| node_label(mol, i)).collect(),
            adj,
            edges,
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

/// Exact edit distance between `a` and `b`, or `Exceeded` when it is above `limit`.
pub fn graph_edit_distance(
    a: &Molecule,
    b: &Molecule,
    limit: usize,
) -> Result<EditDistance, SizeCapExceeded> {
    graph_edit_distance_capped(a, b, limit, DEFAULT_SIZE_CAP)
}

pub fn graph_edit_distance_capped(
    a: &Molecule,
    b: &Molecule,
    limit: usize,
    size_cap: usize,
) -> Result<EditDistance, SizeCapExceeded> {
    for m in [a, b] {
        if m.atom_count() > size_cap {
            return Err(SizeCapExceeded {
                atoms: m.atom_count(),
                cap: size_cap,
            });
        }
    }
    let ga = Graph::new(a);
    let gb = Graph::new(b);
    let trivial = ga.len() + ga.edges.len() + gb.len() + gb.edges.len();
    let mut search = Search {
        order: visit_order(&ga),
        ga: &ga,
        gb: &gb,
        image: vec![None; ga.len()],
        used: vec![false; gb.len()],
        best: trivial.min(limit.saturating_add(1)),
    };
    search.run(0, 0);
    Ok(if search.best <= limit {
        EditDistance::Within(search.best)
    } else {
        EditDistance::Exceeded
    })
}

/// Breadth-first order starting from the highest-degree atom so that edge
/// costs appear early in the search.
fn visit_order(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let degree = |i: usize| g.adj[i].iter().filter(|e| e.is_some()).count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !seen[i])
            .max_by_key(|&i| (degree(i), std::cmp::Reverse(i)))
            .unwrap();
        seen[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nb: Vec<usize> = (0..n).filter(|&v| g.adj[u][v].is_some() && !seen[v]).collect();
            nb.sort_by_key(|&v| std::cmp::Reverse(degree(v)));
            for v in nb {
                seen[v] = true;
                order.push(v);
            }
        }
    }
    order
}

struct Search<'a> {
    order: Vec<usize>,
    ga: &'a Graph,
    gb: &'a Graph,
    /// image[a] for processed atoms of the first graph (None = deleted)
    image: Vec<Option<usize>>,
    used: Vec<bool>,
    best: usize,
}

impl Search<'_> {
    fn step_cost(&self, depth: usize, target: Option<usize>) -> usize {
        let u = self.order[depth];
        let mut cost = match target {
            None => 1,
            Some(v) => (self.ga.labels[u] != self.gb.labels[v]) as usize,
        };
        for &w in &self.order[..depth] {
            let ea = self.ga.adj[u][w];
            let eb = match (target, self.image[w]) {
                (Some(v), Some(vw)) => self.gb.adj[v][vw],
                _ => None,
            };
            if ea != eb {
                cost += 1;
            }
        }
        cost
    }

    fn completion_cost(&self) -> usize {
        let free_nodes = self.used.iter().filter(|&&u| !u).count();
        let free_edges = self
            .gb
            .edges
            .iter()
            .filter(|&&(x, y, _)| !self.used[x] || !self.used[y])
            .count();
        free_nodes + free_edges
    }

    fn lower_bound(&self, depth: usize) -> usize {
        let remaining_a = &self.order[depth..];
        let mut node_counts: HashMap<NodeLabel, (usize, usize)> = HashMap::new();
        for &u in remaining_a {
            node_counts.entry(self.ga.labels[u]).or_default().0 += 1;
        }
        let mut free_b = 0;
        for (v, &used) in self.used.iter().enumerate() {
            if !used {
                free_b += 1;
                node_counts.entry(self.gb.labels[v]).or_default().1 += 1;
            }
        }
        let shared: usize = node_counts.values().map(|&(x, y)| x.min(y)).sum();
        let node_lb = remaining_a.len().max(free_b) - shared;

        let mut pending_a = vec![false; self.ga.len()];
        for &u in remaining_a {
            pending_a[u] = true;
        }
        let mut edge_counts = [(0usize, 0usize); 5];
        let (mut ea, mut eb) = (0, 0);
        for &(x, y, o) in &self.ga.edges {
            if pending_a[x] || pending_a[y] {
                ea += 1;
                edge_counts[o.code() as usize].0 += 1;
            }
        }
        for &(x, y, o) in &self.gb.edges {
            if !self.used[x] || !self.used[y] {
                eb += 1;
                edge_counts[o.code() as usize].1 += 1;
            }
        }
        let shared_e: usize = edge_counts.iter().map(|&(x, y)| x.min(y)).sum();
        node_lb + ea.max(eb) - shared_e
    }

    fn run(&mut self, depth: usize, cost: usize) {
        if depth == self.order.len() {
            let total = cost + self.completion_cost();
            if total < self.best {
                self.best = total;
            }
            return;
        }
        if cost + self.lower_bound(depth) >= self.best {
            return;
        }
        let mut options: Vec<(usize, Option<usize>)> = (0..self.gb.len())
            .filter(|&v| !self.used[v])
            .map(|v| (self.step_cost(depth, Some(v)), Some(v)))
            .collect();
        options.push((self.step_cost(depth, None), None));
        options.sort_by_key(|&(c, t)| (c, t.is_none(), t));
        let u = self.order[depth];
        for (step, target) in options {
            if cost + step >= self.best {
                // options are sorted by step cost
                break;
            }
            self.image[u] = target;
            if let Some(v) = target {
                self.used[v] = true;
            }
            self.run(depth + 1, cost + step);
            if let Some(v) = target {
                self.used[v] = false;
            }
            self.image[u] = None;
        }
    }
}
