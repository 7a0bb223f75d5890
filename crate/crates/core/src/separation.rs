//! Paths, walks and d-separation.
//!
//! A path is active given `Z` when every collider on it is in `Z` or has a
//! descendant in `Z`, and every other interior node is outside `Z`. Endpoints
//! are not constrained. [`d_separated`] uses reachability over
//! `(node, direction)` states rather than path enumeration.

use std::collections::{BTreeSet, HashSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{GraphError, SeparationError};
use crate::graph::{IdGraph, NodeId};

/// Orientation of one step along a path or walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// Along the edge: `nodes[i] -> nodes[i+1]`.
    Forward,
    /// Against the edge: `nodes[i] <- nodes[i+1]`.
    Backward,
    /// Stay at the same node (walks only).
    Stay,
}

/// Role of an interior node on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// `→ N ←`
    Collider,
    /// `← N →`
    Fork,
    /// `→ N →` or `← N ←`
    Chain,
}

/// A simple path together with the orientation of each of its edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TracedPath {
    pub nodes: Vec<NodeId>,
    pub steps: Vec<Step>,
}

impl TracedPath {
    /// Reads the orientation of each consecutive pair from `g`.
    pub fn from_nodes(g: &IdGraph, nodes: Vec<NodeId>) -> Result<Self, SeparationError> {
        if nodes.is_empty() {
            return Err(SeparationError::InvalidPath("empty path".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &nodes {
            g.require(n)?;
            if !seen.insert(n) {
                return Err(SeparationError::InvalidPath(format!("node {n} repeats")));
            }
        }
        let steps = nodes
            .windows(2)
            .map(|w| {
                if g.has_edge(&w[0], &w[1]) {
                    Ok(Step::Forward)
                } else if g.has_edge(&w[1], &w[0]) {
                    Ok(Step::Backward)
                } else {
                    Err(SeparationError::InvalidPath(format!("{} and {} are not adjacent", w[0], w[1])))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TracedPath { nodes, steps })
    }

    pub fn from_strs(g: &IdGraph, nodes: &[&str]) -> Result<Self, SeparationError> {
        TracedPath::from_nodes(g, nodes.iter().map(|s| s.to_string()).collect())
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn start(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn end(&self) -> &NodeId {
        self.nodes.last().expect("paths are non-empty")
    }

    /// Every edge points away from the start.
    pub fn is_directed(&self) -> bool {
        self.steps.iter().all(|s| *s == Step::Forward)
    }

    /// Role of the interior node at `i` (`0 < i < nodes.len() - 1`).
    pub fn role(&self, i: usize) -> Role {
        role_of(self.steps[i - 1], self.steps[i])
    }

    /// Interior positions that are colliders, in path order.
    pub fn collider_positions(&self) -> Vec<usize> {
        (1..self.nodes.len().saturating_sub(1)).filter(|&i| self.role(i) == Role::Collider).collect()
    }

    /// Interior positions that are forks, in path order.
    pub fn fork_positions(&self) -> Vec<usize> {
        (1..self.nodes.len().saturating_sub(1)).filter(|&i| self.role(i) == Role::Fork).collect()
    }

    pub fn position(&self, n: &str) -> Option<usize> {
        self.nodes.iter().position(|m| m == n)
    }

    /// Directed edges `(tail, head)` traversed by the path.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .windows(2)
            .zip(&self.steps)
            .map(|(w, s)| match s {
                Step::Forward => (w[0].clone(), w[1].clone()),
                _ => (w[1].clone(), w[0].clone()),
            })
            .collect()
    }

    /// Checks that the recorded orientation matches `g`.
    pub fn check_in(&self, g: &IdGraph) -> Result<(), SeparationError> {
        let fresh = TracedPath::from_nodes(g, self.nodes.clone())?;
        if fresh.steps != self.steps {
            return Err(SeparationError::InvalidPath("edge orientation does not match the graph".into()));
        }
        Ok(())
    }
}

fn role_of(into: Step, out: Step) -> Role {
    match (into, out) {
        (Step::Forward, Step::Backward) => Role::Collider,
        (Step::Backward, Step::Forward) => Role::Fork,
        _ => Role::Chain,
    }
}

fn require_all<'a, I: IntoIterator<Item = &'a NodeId>>(g: &IdGraph, it: I) -> Result<(), GraphError> {
    for n in it {
        g.require(n)?;
    }
    Ok(())
}

/// Whether an interior node with the given role passes given `z`, where
/// `anc_z` is `z` together with its ancestors.
fn passes(role: Role, n: &str, z: &BTreeSet<NodeId>, anc_z: &BTreeSet<NodeId>) -> bool {
    match role {
        Role::Collider => anc_z.contains(n),
        _ => !z.contains(n),
    }
}

/// Whether `p` is active given `z` in `g`.
pub fn is_active_path(g: &IdGraph, p: &TracedPath, z: &BTreeSet<NodeId>) -> Result<bool, SeparationError> {
    p.check_in(g)?;
    require_all(g, z)?;
    let anc_z = g.ancestors_of_set(z);
    Ok((1..p.nodes.len().saturating_sub(1)).all(|i| passes(p.role(i), &p.nodes[i], z, &anc_z)))
}

/// Nodes reachable from `sources` along some active trail given `z`.
/// Sources in `z` are ignored; the result never contains nodes of `z`.
pub fn reachable(g: &IdGraph, sources: &BTreeSet<NodeId>, z: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let anc_z = g.ancestors_of_set(z);
    // `up == true`: the trail arrived from a child.
    let mut visited: HashSet<(NodeId, bool)> = HashSet::new();
    let mut stack: Vec<(NodeId, bool)> = sources.iter().filter(|s| !z.contains(*s)).map(|s| (s.clone(), true)).collect();
    let mut out = BTreeSet::new();
    while let Some((y, up)) = stack.pop() {
        if !visited.insert((y.clone(), up)) {
            continue;
        }
        let in_z = z.contains(&y);
        if !in_z {
            out.insert(y.clone());
        }
        if up {
            if !in_z {
                stack.extend(g.parents(&y).iter().map(|p| (p.clone(), true)));
                stack.extend(g.children(&y).iter().map(|c| (c.clone(), false)));
            }
        } else {
            if !in_z {
                stack.extend(g.children(&y).iter().map(|c| (c.clone(), false)));
            }
            if anc_z.contains(&y) {
                stack.extend(g.parents(&y).iter().map(|p| (p.clone(), true)));
            }
        }
    }
    out
}

/// `A ⫫ B | Z`. Members of `A` or `B` that lie in `Z` are dropped first; sets
/// that still share a node are never separated.
pub fn d_separated(
    g: &IdGraph,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    z: &BTreeSet<NodeId>,
) -> Result<bool, SeparationError> {
    require_all(g, a.iter().chain(b).chain(z))?;
    let a: BTreeSet<NodeId> = a.difference(z).cloned().collect();
    let b: BTreeSet<NodeId> = b.difference(z).cloned().collect();
    if a.intersection(&b).next().is_some() {
        return Ok(false);
    }
    let r = reachable(g, &a, z);
    Ok(r.intersection(&b).next().is_none())
}

/// Single-node convenience form of [`d_separated`].
pub fn d_separated_nodes(g: &IdGraph, a: &str, b: &str, z: &BTreeSet<NodeId>) -> Result<bool, SeparationError> {
    d_separated(g, &BTreeSet::from([a.to_string()]), &BTreeSet::from([b.to_string()]), z)
}

/// Visits active simple paths from `start` to any node of `targets` in order of
/// increasing length, lexicographic within a length. Paths never pass through
/// a target. `allow` filters interior nodes and endpoints other than `start`.
pub fn visit_active_paths<F, A>(
    g: &IdGraph,
    start: &str,
    targets: &BTreeSet<NodeId>,
    z: &BTreeSet<NodeId>,
    allow: A,
    mut visit: F,
) where
    F: FnMut(&TracedPath) -> ControlFlow<()>,
    A: Fn(&str) -> bool,
{
    let anc_z = g.ancestors_of_set(z);
    let reach = reachable(g, &BTreeSet::from([start.to_string()]), z);
    if !targets.iter().any(|t| reach.contains(t)) {
        return;
    }
    struct Ctx<'a, F, A> {
        g: &'a IdGraph,
        targets: &'a BTreeSet<NodeId>,
        z: &'a BTreeSet<NodeId>,
        anc_z: &'a BTreeSet<NodeId>,
        reach: &'a BTreeSet<NodeId>,
        allow: A,
        visit: F,
        nodes: Vec<NodeId>,
        steps: Vec<Step>,
        on_path: BTreeSet<NodeId>,
        found_any_longer: bool,
    }
    fn dfs<F: FnMut(&TracedPath) -> ControlFlow<()>, A: Fn(&str) -> bool>(
        c: &mut Ctx<'_, F, A>,
        depth_left: usize,
    ) -> ControlFlow<()> {
        let last = c.nodes.last().unwrap().clone();
        let mut nbrs: Vec<(NodeId, Step)> = c
            .g
            .children(&last)
            .iter()
            .map(|n| (n.clone(), Step::Forward))
            .chain(c.g.parents(&last).iter().map(|n| (n.clone(), Step::Backward)))
            .collect();
        nbrs.sort();
        for (n, step) in nbrs {
            if c.on_path.contains(&n) || !(c.reach.contains(&n) || c.z.contains(&n)) || !(c.allow)(&n) {
                continue;
            }
            if c.nodes.len() >= 2 {
                let role = role_of(*c.steps.last().unwrap(), step);
                if !passes(role, &last, c.z, c.anc_z) {
                    continue;
                }
            }
            let is_target = c.targets.contains(&n);
            if depth_left == 1 {
                if is_target {
                    c.nodes.push(n.clone());
                    c.steps.push(step);
                    let p = TracedPath { nodes: c.nodes.clone(), steps: c.steps.clone() };
                    c.nodes.pop();
                    c.steps.pop();
                    (c.visit)(&p)?;
                } else {
                    c.found_any_longer = true;
                }
                continue;
            }
            if is_target {
                continue;
            }
            c.nodes.push(n.clone());
            c.steps.push(step);
            c.on_path.insert(n.clone());
            let r = dfs(c, depth_left - 1);
            c.on_path.remove(&n);
            c.nodes.pop();
            c.steps.pop();
            r?;
        }
        ControlFlow::Continue(())
    }
    let mut ctx = Ctx {
        g,
        targets,
        z,
        anc_z: &anc_z,
        reach: &reach,
        allow,
        visit: &mut visit,
        nodes: vec![start.to_string()],
        steps: vec![],
        on_path: BTreeSet::from([start.to_string()]),
        found_any_longer: false,
    };
    for len in 1..g.len().max(1) {
        ctx.found_any_longer = false;
        if dfs(&mut ctx, len).is_break() {
            return;
        }
        if !ctx.found_any_longer {
            return;
        }
    }
}

/// Shortest active path from `a` to `b` given `z`, lexicographically least
/// among the shortest.
pub fn find_active_path(g: &IdGraph, a: &str, b: &str, z: &BTreeSet<NodeId>) -> Result<Option<TracedPath>, SeparationError> {
    g.require(a)?;
    g.require(b)?;
    require_all(g, z)?;
    if a == b {
        return Ok(Some(TracedPath { nodes: vec![a.to_string()], steps: vec![] }));
    }
    let mut found = None;
    visit_active_paths(g, a, &BTreeSet::from([b.to_string()]), z, |_| true, |p| {
        found = Some(p.clone());
        ControlFlow::Break(())
    });
    Ok(found)
}

/// A walk: consecutive nodes are adjacent or equal, and nodes may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
    pub steps: Vec<Step>,
}

impl Walk {
    /// Reads step orientations from `g`; equal consecutive nodes become `Stay`.
    pub fn from_nodes(g: &IdGraph, nodes: Vec<NodeId>) -> Result<Self, SeparationError> {
        if nodes.is_empty() {
            return Err(SeparationError::InvalidPath("empty walk".into()));
        }
        require_all(g, &nodes)?;
        let steps = nodes
            .windows(2)
            .map(|w| {
                if w[0] == w[1] {
                    Ok(Step::Stay)
                } else if g.has_edge(&w[0], &w[1]) {
                    Ok(Step::Forward)
                } else if g.has_edge(&w[1], &w[0]) {
                    Ok(Step::Backward)
                } else {
                    Err(SeparationError::InvalidPath(format!("{} and {} are not adjacent", w[0], w[1])))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Walk { nodes, steps })
    }

    pub fn from_strs(g: &IdGraph, nodes: &[&str]) -> Result<Self, SeparationError> {
        Walk::from_nodes(g, nodes.iter().map(|s| s.to_string()).collect())
    }

    fn check_in(&self, g: &IdGraph) -> Result<(), SeparationError> {
        if Walk::from_nodes(g, self.nodes.clone())?.steps != self.steps {
            return Err(SeparationError::InvalidPath("walk orientation does not match the graph".into()));
        }
        Ok(())
    }
}

/// Turns a walk whose every interior occurrence passes given `z` into an
/// active path between the same endpoints, by cutting each `N ⤳ N` loop down
/// to `N`.
pub fn walk_to_active_path(g: &IdGraph, w: &Walk, z: &BTreeSet<NodeId>) -> Result<TracedPath, SeparationError> {
    w.check_in(g)?;
    require_all(g, z)?;
    let mut nodes = vec![w.nodes[0].clone()];
    let mut steps = vec![];
    for (n, s) in w.nodes[1..].iter().zip(&w.steps) {
        if *s != Step::Stay {
            nodes.push(n.clone());
            steps.push(*s);
        }
    }
    let anc_z = g.ancestors_of_set(z);
    for i in 1..nodes.len().saturating_sub(1) {
        let role = role_of(steps[i - 1], steps[i]);
        if !passes(role, &nodes[i], z, &anc_z) {
            return Err(SeparationError::HypothesisViolated(format!(
                "occurrence {} of {} is a blocked {:?}",
                i, nodes[i], role
            )));
        }
    }
    let mut out_nodes = vec![];
    let mut out_steps = vec![];
    let mut i = 0;
    loop {
        let j = nodes.iter().rposition(|n| *n == nodes[i]).expect("node occurs");
        out_nodes.push(nodes[j].clone());
        if j + 1 >= nodes.len() {
            break;
        }
        out_steps.push(steps[j]);
        i = j + 1;
    }
    let p = TracedPath { nodes: out_nodes, steps: out_steps };
    if !is_active_path(g, &p, z)? {
        return Err(SeparationError::HypothesisViolated("excised path is blocked".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind::*;

    fn set(xs: &[&str]) -> BTreeSet<NodeId> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn collider() -> IdGraph {
        IdGraph::from_slices(
            &[("A", Chance), ("B", Chance), ("C", Chance), ("E", Chance)],
            &[("A", "C"), ("B", "C"), ("C", "E")],
        )
        .unwrap()
    }

    #[test]
    fn collider_opens_on_descendant() {
        let g = collider();
        assert!(d_separated(&g, &set(&["A"]), &set(&["B"]), &set(&[])).unwrap());
        assert!(!d_separated(&g, &set(&["A"]), &set(&["B"]), &set(&["C"])).unwrap());
        assert!(!d_separated(&g, &set(&["A"]), &set(&["B"]), &set(&["E"])).unwrap());
    }

    #[test]
    fn chain_blocks_when_observed() {
        let g = IdGraph::from_slices(&[("A", Chance), ("B", Chance), ("C", Chance)], &[("A", "B"), ("B", "C")]).unwrap();
        assert!(!d_separated(&g, &set(&["A"]), &set(&["C"]), &set(&[])).unwrap());
        assert!(d_separated(&g, &set(&["A"]), &set(&["C"]), &set(&["B"])).unwrap());
    }

    #[test]
    fn overlapping_sets_are_dependent() {
        let g = collider();
        assert!(!d_separated(&g, &set(&["A", "E"]), &set(&["E"]), &set(&[])).unwrap());
        assert!(d_separated(&g, &set(&["A"]), &set(&["A"]), &set(&["A"])).unwrap());
    }

    #[test]
    fn find_active_path_is_shortest_then_lexicographic() {
        let g = IdGraph::from_slices(
            &[("X", Chance), ("A", Chance), ("B", Chance), ("U", Utility)],
            &[("X", "B"), ("X", "A"), ("A", "U"), ("B", "U")],
        )
        .unwrap();
        let p = find_active_path(&g, "X", "U", &set(&[])).unwrap().unwrap();
        assert_eq!(p.nodes, vec!["X", "A", "U"]);
        assert!(find_active_path(&g, "X", "U", &set(&["A", "B"])).unwrap().is_none());
    }

    #[test]
    fn active_path_roles() {
        let g = collider();
        let p = TracedPath::from_strs(&g, &["A", "C", "B"]).unwrap();
        assert_eq!(p.role(1), Role::Collider);
        assert!(!is_active_path(&g, &p, &set(&[])).unwrap());
        assert!(is_active_path(&g, &p, &set(&["E"])).unwrap());
        assert!(TracedPath::from_strs(&g, &["A", "B"]).is_err());
    }

    #[test]
    fn walk_loop_is_excised() {
        let g = collider();
        let w = Walk::from_strs(&g, &["A", "C", "E", "C", "B"]).unwrap();
        let z = set(&["E"]);
        let p = walk_to_active_path(&g, &w, &z).unwrap();
        assert_eq!(p.nodes, vec!["A", "C", "B"]);
    }

    #[test]
    fn walk_with_blocked_occurrence_is_rejected() {
        let g = collider();
        let w = Walk::from_strs(&g, &["A", "C", "B"]).unwrap();
        assert!(matches!(walk_to_active_path(&g, &w, &set(&[])), Err(SeparationError::HypothesisViolated(_))));
    }

    #[test]
    fn stays_are_dropped() {
        let g = collider();
        let w = Walk::from_strs(&g, &["A", "A", "C", "C", "E"]).unwrap();
        let p = walk_to_active_path(&g, &w, &set(&[])).unwrap();
        assert_eq!(p.nodes, vec!["A", "C", "E"]);
    }
}
