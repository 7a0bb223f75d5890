//! Seeded random graphs, models and policies for sweeps and property tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::is_soluble;
use crate::graph::{IdGraph, NodeId, NodeKind};
use crate::model::{Dist, Domain, IdModel, Policy};
use crate::rational::Rational;

/// The generator used throughout; reproducible across platforms.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub nodes: usize,
    pub decisions: usize,
    pub utilities: usize,
    /// Probability of each forward edge in a random topological order.
    pub edge_prob: f64,
}

impl GraphSpec {
    /// Node counts drawn for a graph of at most `max_nodes` nodes (at least 3).
    pub fn sample<R: Rng>(r: &mut R, max_nodes: usize) -> Self {
        let nodes = r.gen_range(3..=max_nodes.max(3));
        let decisions = r.gen_range(1..=(nodes / 3).max(1));
        let utilities = r.gen_range(1..=(nodes - decisions - 1).clamp(1, 2));
        GraphSpec { nodes, decisions, utilities, edge_prob: r.gen_range(0.25..0.6) }
    }
}

/// A random influence diagram: chance nodes `C<i>`, decisions `D<i>`,
/// utilities `U<i>`, edges only forward in a random order and never out of a
/// utility. Every decision gets a utility descendant when one is reachable.
pub fn random_graph<R: Rng>(r: &mut R, spec: &GraphSpec) -> IdGraph {
    let chance = spec.nodes.saturating_sub(spec.decisions + spec.utilities);
    let mut order: Vec<(NodeId, NodeKind)> = (0..chance)
        .map(|i| (format!("C{i}"), NodeKind::Chance))
        .chain((0..spec.decisions).map(|i| (format!("D{i}"), NodeKind::Decision)))
        .collect();
    order.shuffle(r);
    order.extend((0..spec.utilities).map(|i| (format!("U{i}"), NodeKind::Utility)));
    let mut edges = vec![];
    for j in 0..order.len() {
        for i in 0..j.min(order.len() - spec.utilities) {
            if r.gen_bool(spec.edge_prob) {
                edges.push((order[i].0.clone(), order[j].0.clone()));
            }
        }
    }
    // Decisions without a utility child would be inert; link each to one.
    for (n, k) in &order {
        if *k == NodeKind::Decision && !edges.iter().any(|(a, b)| a == n && b.starts_with('U')) {
            edges.push((n.clone(), format!("U{}", r.gen_range(0..spec.utilities))));
        }
    }
    IdGraph::new(order, edges).expect("forward edges form a valid diagram")
}

/// A random soluble graph of at most `max_nodes` nodes.
pub fn random_soluble_graph<R: Rng>(r: &mut R, max_nodes: usize) -> IdGraph {
    loop {
        let spec = GraphSpec::sample(r, max_nodes);
        let g = random_graph(r, &spec);
        if is_soluble(&g).soluble {
            return g;
        }
    }
}

/// A random distribution over `n` values with small integer weights.
pub fn random_dist<R: Rng>(r: &mut R, n: usize) -> Dist {
    loop {
        let w: Vec<i64> = (0..n).map(|_| r.gen_range(0..=4)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.iter().enumerate().filter(|(_, x)| **x > 0).map(|(i, x)| (i, Rational::new(*x, total))).collect();
        }
    }
}

/// A random model on `g`: domain sizes in `2..=max_domain`, random
/// rational CPDs, integer utilities in `[-3, 5]`. Gives up with `None` when
/// the joint space exceeds `2^max_bits` assignments.
pub fn random_model<R: Rng>(r: &mut R, g: &IdGraph, max_domain: usize, max_bits: u32) -> Option<IdModel> {
    let domains: BTreeMap<NodeId, Domain> =
        g.nodes().filter(|n| !g.is_utility(n)).map(|n| (n.clone(), Domain::range(r.gen_range(2..=max_domain.max(2))))).collect();
    let joint: u128 = domains.values().map(|d| d.len() as u128).product();
    if joint > 1u128 << max_bits {
        return None;
    }
    let ctx = |n: &NodeId| g.parents(n).iter().map(|p| domains[p].len()).product::<usize>();
    let cpds = g.nodes().filter(|n| g.is_chance(n)).map(|n| (n.clone(), (0..ctx(n)).map(|_| random_dist(r, domains[n].len())).collect())).collect();
    let utilities =
        g.utilities().into_iter().map(|u| (u.clone(), (0..ctx(&u)).map(|_| Rational::from_int(r.gen_range(-3..=5))).collect())).collect();
    Some(IdModel::new(g.clone(), domains, cpds, utilities).expect("generated model is valid"))
}

/// A random stochastic policy for `m`.
pub fn random_policy<R: Rng>(r: &mut R, m: &IdModel) -> Policy {
    let rules = m
        .graph
        .decisions()
        .into_iter()
        .map(|d| {
            let rows = (0..m.context_count(&d)).map(|_| random_dist(r, m.domains[&d].len())).collect();
            (d, rows)
        })
        .collect();
    Policy { rules }
}
