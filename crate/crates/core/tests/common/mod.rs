//! Brute-force oracles written against the definitions, sharing no evaluation
//! code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use idvoi::graph::{IdGraph, NodeId};
use idvoi::model::{Dist, IdModel, Policy};
use idvoi::rational::Rational;

/// Mixed-radix index of the parent values of `n`, parents in name order,
/// first parent most significant.
pub fn context(m: &IdModel, n: &str, a: &BTreeMap<NodeId, usize>) -> usize {
    m.graph.parents(n).iter().fold(0, |acc, p| acc * m.domains[p].len() + a[p])
}

fn topo(g: &IdGraph) -> Vec<NodeId> {
    let mut order = vec![];
    let mut placed = BTreeSet::new();
    let nodes: Vec<NodeId> = g.nodes().cloned().collect();
    while order.len() < nodes.len() {
        for n in &nodes {
            if !placed.contains(n) && g.parents(n).iter().all(|p| placed.contains(p)) {
                placed.insert(n.clone());
                order.push(n.clone());
            }
        }
    }
    order
}

/// Expected total utility under a (possibly stochastic) policy, by summing
/// over every assignment of the non-utility nodes.
pub fn eu(m: &IdModel, pi: &Policy) -> Rational {
    let order: Vec<NodeId> = topo(&m.graph).into_iter().filter(|n| !m.graph.is_utility(n)).collect();
    let mut total = Rational::zero();
    let mut a = BTreeMap::new();
    walk(m, pi, &order, 0, Rational::one(), &mut a, &mut total);
    total
}

fn walk(
    m: &IdModel,
    pi: &Policy,
    order: &[NodeId],
    i: usize,
    p: Rational,
    a: &mut BTreeMap<NodeId, usize>,
    total: &mut Rational,
) {
    if p.is_zero() {
        return;
    }
    let Some(n) = order.get(i) else {
        for u in m.graph.utilities() {
            *total += &p * &m.utilities[&u][context(m, &u, a)];
        }
        return;
    };
    let row: &Dist = if m.graph.is_decision(n) { &pi.rules[n][context(m, n, a)] } else { &m.cpds[n][context(m, n, a)] };
    for (v, q) in row {
        a.insert(n.clone(), *v);
        walk(m, pi, order, i + 1, &p * q, a, total);
    }
    a.remove(n);
}

/// Every deterministic policy of `m`, in odometer order.
pub fn deterministic_policies(m: &IdModel) -> Vec<Policy> {
    let slots: Vec<(NodeId, usize, usize)> = m
        .graph
        .decisions()
        .into_iter()
        .flat_map(|d| {
            let ctx: usize = m.graph.parents(&d).iter().map(|p| m.domains[p].len()).product();
            let k = m.domains[&d].len();
            (0..ctx).map(move |c| (d.clone(), c, k))
        })
        .collect();
    let mut digits = vec![0usize; slots.len()];
    let mut out = vec![];
    loop {
        let mut rules: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for ((d, _, _), v) in slots.iter().zip(&digits) {
            rules.entry(d.clone()).or_default().push(*v);
        }
        for d in m.graph.decisions() {
            rules.entry(d).or_default();
        }
        out.push(Policy::deterministic(rules));
        let mut i = 0;
        loop {
            if i == slots.len() {
                return out;
            }
            digits[i] += 1;
            if digits[i] < slots[i].2 {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Number of deterministic policies, saturating.
pub fn policy_count(m: &IdModel) -> u128 {
    m.graph.decisions().iter().fold(1u128, |acc, d| {
        let ctx: u32 = m.graph.parents(d).iter().map(|p| m.domains[p].len() as u32).product();
        acc.saturating_mul((m.domains[d].len() as u128).saturating_pow(ctx))
    })
}

/// Maximum expected utility over deterministic policies.
pub fn optimum(m: &IdModel) -> Rational {
    deterministic_policies(m).iter().map(|pi| eu(m, pi)).max().expect("at least one policy")
}

/// The model with the link `x -> d` removed, rules no longer reading `x`.
pub fn without_link(m: &IdModel, x: &str, d: &str) -> IdModel {
    let g = m.graph.without_edge(x, d);
    IdModel::new(g, m.domains.clone(), m.cpds.clone(), m.utilities.clone()).expect("dropping a decision parent keeps the model valid")
}

pub fn voi(m: &IdModel, x: &str, d: &str) -> Rational {
    optimum(m) - optimum(&without_link(m, x, d))
}

/// Best optimum over every deterministic mechanism for `x`; with
/// `reads_parents` false only constants are tried.
pub fn voc(m: &IdModel, x: &str, reads_parents: bool) -> Rational {
    let ctx: usize = m.graph.parents(x).iter().map(|p| m.domains[p].len()).product();
    let k = m.domains[x].len();
    let free = if reads_parents { ctx } else { 1 };
    let mut digits = vec![0usize; free];
    let mut best: Option<Rational> = None;
    loop {
        let mut mm = m.clone();
        let rows = (0..ctx).map(|c| vec![(digits[if reads_parents { c } else { 0 }], Rational::one())]).collect();
        mm.cpds.insert(x.to_string(), rows);
        let v = optimum(&mm);
        if best.as_ref().is_none_or(|b| v > *b) {
            best = Some(v);
        }
        let mut i = 0;
        loop {
            if i == free {
                return best.expect("one mechanism") - optimum(m);
            }
            digits[i] += 1;
            if digits[i] < k {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// All simple paths between `a` and `b` in the skeleton.
pub fn simple_paths(g: &IdGraph, a: &str, b: &str) -> Vec<Vec<NodeId>> {
    fn go(g: &IdGraph, b: &str, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let last = path.last().unwrap().clone();
        if last == b {
            out.push(path.clone());
            return;
        }
        let nbrs: BTreeSet<NodeId> = g.parents(&last).iter().chain(g.children(&last)).cloned().collect();
        for n in nbrs {
            if !path.contains(&n) {
                path.push(n);
                go(g, b, path, out);
                path.pop();
            }
        }
    }
    let mut out = vec![];
    go(g, b, &mut vec![a.to_string()], &mut out);
    out
}

fn descendants_or_self(g: &IdGraph, n: &str) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([n.to_string()]);
    let mut stack = vec![n.to_string()];
    while let Some(v) = stack.pop() {
        for c in g.children(&v) {
            if seen.insert(c.clone()) {
                stack.push(c.clone());
            }
        }
    }
    seen
}

/// A path is active given `z` when every collider has itself or a descendant
/// in `z` and every other interior node is outside `z`.
pub fn path_active(g: &IdGraph, p: &[NodeId], z: &BTreeSet<NodeId>) -> bool {
    (1..p.len().saturating_sub(1)).all(|i| {
        let collider = g.has_edge(&p[i - 1], &p[i]) && g.has_edge(&p[i + 1], &p[i]);
        if collider {
            descendants_or_self(g, &p[i]).iter().any(|d| z.contains(d))
        } else {
            !z.contains(&p[i])
        }
    })
}

/// `a ⫫ b | z` for `a, b` outside `z`, by path enumeration.
pub fn d_separated(g: &IdGraph, a: &str, b: &str, z: &BTreeSet<NodeId>) -> bool {
    a != b && !simple_paths(g, a, b).iter().any(|p| path_active(g, p, z))
}
