//! Influence-diagram graphs.
//!
//! An [`IdGraph`] is a DAG whose nodes are chance, decision or utility nodes.
//! Utility nodes have no children. Every iteration order exposed by this module
//! is lexicographic in node names, so all downstream algorithms are
//! deterministic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Node names are plain strings; ordering is lexicographic.
pub type NodeId = String;

/// The three kinds of influence-diagram node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// A random variable with a fixed conditional distribution.
    Chance,
    /// A variable whose rule is chosen by the agent.
    Decision,
    /// A real-valued payoff, deterministic in its parents.
    Utility,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Utility => "utility",
        }
    }
}

/// A validated influence-diagram graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdGraph {
    kinds: BTreeMap<NodeId, NodeKind>,
    parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
    children: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// On-disk form: `{"nodes":[{"id":"X","kind":"chance"}],"edges":[["X","D"]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl IdGraph {
    /// Builds and validates a graph.
    pub fn new<N, E>(nodes: N, edges: E) -> Result<Self, GraphError>
    where
        N: IntoIterator<Item = (NodeId, NodeKind)>,
        E: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = IdGraph::default();
        for (id, kind) in nodes {
            if g.kinds.contains_key(&id) {
                return Err(GraphError::DuplicateNode(id));
            }
            g.insert_node(id, kind);
        }
        for (a, b) in edges {
            if !g.contains(&a) || !g.contains(&b) {
                return Err(GraphError::DanglingEdge(a, b));
            }
            g.insert_edge(&a, &b);
        }
        g.validate()?;
        Ok(g)
    }

    /// Convenience constructor from string slices.
    pub fn from_slices(nodes: &[(&str, NodeKind)], edges: &[(&str, &str)]) -> Result<Self, GraphError> {
        IdGraph::new(
            nodes.iter().map(|(n, k)| (n.to_string(), *k)),
            edges.iter().map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }

    /// Checks acyclicity and that utility nodes are sinks.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (a, cs) in &self.children {
            for b in cs {
                if !self.kinds.contains_key(b) {
                    return Err(GraphError::DanglingEdge(a.clone(), b.clone()));
                }
            }
            if self.kinds[a] == NodeKind::Utility && !cs.is_empty() {
                return Err(GraphError::UtilityHasChild(a.clone()));
            }
        }
        if let Some(n) = self.find_cycle_node() {
            return Err(GraphError::CycleDetected(n));
        }
        Ok(())
    }

    fn find_cycle_node(&self) -> Option<NodeId> {
        let order = self.kahn();
        if order.len() == self.kinds.len() {
            return None;
        }
        let seen: BTreeSet<&NodeId> = order.iter().collect();
        self.kinds.keys().find(|n| !seen.contains(n)).cloned()
    }

    fn kahn(&self) -> Vec<NodeId> {
        let mut indeg: BTreeMap<&NodeId, usize> = self.kinds.keys().map(|n| (n, self.parents[n].len())).collect();
        let mut ready: BTreeSet<&NodeId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut out = Vec::with_capacity(self.kinds.len());
        while let Some(n) = ready.pop_first() {
            out.push(n.clone());
            for c in &self.children[n] {
                let d = indeg.get_mut(c).expect("child is a node");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        out
    }

    /// Inserts a node without validation; an existing node keeps its edges.
    pub fn insert_node(&mut self, id: NodeId, kind: NodeKind) {
        self.parents.entry(id.clone()).or_default();
        self.children.entry(id.clone()).or_default();
        self.kinds.insert(id, kind);
    }

    /// Inserts an edge without validation. Both endpoints must exist.
    pub fn insert_edge(&mut self, a: &str, b: &str) {
        self.children.get_mut(a).expect("edge tail exists").insert(b.to_string());
        self.parents.get_mut(b).expect("edge head exists").insert(a.to_string());
    }

    /// Removes an edge if present; returns whether it existed.
    pub fn remove_edge(&mut self, a: &str, b: &str) -> bool {
        let had = self.children.get_mut(a).map(|c| c.remove(b)).unwrap_or(false);
        if had {
            self.parents.get_mut(b).expect("edge head exists").remove(a);
        }
        had
    }

    /// Removes a node and all incident edges.
    pub fn remove_node(&mut self, n: &str) {
        if self.kinds.remove(n).is_none() {
            return;
        }
        for p in self.parents.remove(n).unwrap_or_default() {
            self.children.get_mut(&p).unwrap().remove(n);
        }
        for c in self.children.remove(n).unwrap_or_default() {
            self.parents.get_mut(&c).unwrap().remove(n);
        }
    }

    /// Changes the kind of an existing node without validation.
    pub fn set_kind(&mut self, n: &str, kind: NodeKind) {
        if let Some(k) = self.kinds.get_mut(n) {
            *k = kind;
        }
    }

    pub fn contains(&self, n: &str) -> bool {
        self.kinds.contains_key(n)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(BTreeSet::len).sum()
    }

    /// Nodes in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.kinds.keys()
    }

    pub fn kind(&self, n: &str) -> Option<NodeKind> {
        self.kinds.get(n).copied()
    }

    /// Kind of a node known to exist.
    pub fn kind_of(&self, n: &str) -> NodeKind {
        self.kinds[n]
    }

    pub fn is_decision(&self, n: &str) -> bool {
        self.kind(n) == Some(NodeKind::Decision)
    }

    pub fn is_utility(&self, n: &str) -> bool {
        self.kind(n) == Some(NodeKind::Utility)
    }

    pub fn is_chance(&self, n: &str) -> bool {
        self.kind(n) == Some(NodeKind::Chance)
    }

    pub fn require(&self, n: &str) -> Result<(), GraphError> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(n.to_string()))
        }
    }

    pub fn require_decision(&self, n: &str) -> Result<(), GraphError> {
        self.require(n)?;
        if self.is_decision(n) {
            Ok(())
        } else {
            Err(GraphError::NotADecision(n.to_string()))
        }
    }

    /// Parents in lexicographic order.
    pub fn parents(&self, n: &str) -> &BTreeSet<NodeId> {
        &self.parents[n]
    }

    /// Children in lexicographic order.
    pub fn children(&self, n: &str) -> &BTreeSet<NodeId> {
        &self.children[n]
    }

    /// `Fa(n)`: the parents of `n` together with `n`.
    pub fn family(&self, n: &str) -> BTreeSet<NodeId> {
        let mut f = self.parents(n).clone();
        f.insert(n.to_string());
        f
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.children.get(a).is_some_and(|c| c.contains(b))
    }

    /// An edge into a decision node.
    pub fn is_infolink(&self, a: &str, b: &str) -> bool {
        self.has_edge(a, b) && self.is_decision(b)
    }

    /// Edges sorted by (tail, head).
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.children
            .iter()
            .flat_map(|(a, cs)| cs.iter().map(move |b| (a.clone(), b.clone())))
            .collect()
    }

    /// Information links sorted by (tail, head).
    pub fn infolinks(&self) -> Vec<(NodeId, NodeId)> {
        self.edges().into_iter().filter(|(_, b)| self.is_decision(b)).collect()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.kinds.iter().filter(|(_, k)| **k == kind).map(|(n, _)| n.clone()).collect()
    }

    pub fn decisions(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Decision)
    }

    pub fn utilities(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Utility)
    }

    /// A topological order, breaking ties lexicographically.
    pub fn topological_order(&self) -> Vec<NodeId> {
        self.kahn()
    }

    /// Strict descendants of `n`.
    pub fn descendants(&self, n: &str) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<&NodeId> = self.children(n).iter().collect();
        while let Some(c) = stack.pop() {
            if out.insert(c.clone()) {
                stack.extend(self.children(c).iter());
            }
        }
        out
    }

    /// Ancestors of the given set, including the set itself.
    pub fn ancestors_of_set<'a, I: IntoIterator<Item = &'a NodeId>>(&self, set: I) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<NodeId> = set.into_iter().cloned().collect();
        while let Some(c) = stack.pop() {
            if out.insert(c.clone()) {
                stack.extend(self.parents(&c).iter().cloned());
            }
        }
        out
    }

    /// Whether a directed path `a ⤳ b` of length at least one exists.
    pub fn has_directed_path(&self, a: &str, b: &str) -> bool {
        self.descendants(a).contains(b)
    }

    /// Utility descendants of a decision, written `U(D)`.
    pub fn utility_descendants(&self, d: &str) -> BTreeSet<NodeId> {
        self.descendants(d).into_iter().filter(|n| self.is_utility(n)).collect()
    }

    /// Shortest directed path from `a` to any node satisfying `target`,
    /// preferring lexicographically smaller successors; excludes nodes in `avoid`.
    pub fn shortest_directed_path<F: Fn(&str) -> bool>(
        &self,
        a: &str,
        target: F,
        avoid: &BTreeSet<NodeId>,
    ) -> Option<Vec<NodeId>> {
        let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut seen: BTreeSet<NodeId> = BTreeSet::from([a.to_string()]);
        let mut queue = VecDeque::from([a.to_string()]);
        while let Some(n) = queue.pop_front() {
            for c in self.children(&n) {
                if avoid.contains(c) || seen.contains(c) {
                    continue;
                }
                seen.insert(c.clone());
                prev.insert(c.clone(), n.clone());
                if target(c) {
                    let mut path = vec![c.clone()];
                    let mut cur = c.clone();
                    while let Some(p) = prev.get(&cur) {
                        path.push(p.clone());
                        cur = p.clone();
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(c.clone());
            }
        }
        None
    }

    /// Returns `<base>__<tag>`, adding a numeric suffix until it is unused.
    pub fn fresh_name(&self, base: &str, tag: &str) -> NodeId {
        let stem = format!("{base}__{tag}");
        if !self.contains(&stem) {
            return stem;
        }
        (2..).map(|i| format!("{stem}{i}")).find(|c| !self.contains(c)).expect("unbounded search")
    }

    /// The subgraph induced by `keep`; unknown names are ignored.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> IdGraph {
        let mut g = IdGraph::default();
        for n in keep {
            if let Some(k) = self.kinds.get(n) {
                g.insert_node(n.clone(), *k);
            }
        }
        for (a, b) in self.edges() {
            if g.contains(&a) && g.contains(&b) {
                g.insert_edge(&a, &b);
            }
        }
        g
    }

    /// The graph with one edge removed.
    pub fn without_edge(&self, a: &str, b: &str) -> IdGraph {
        let mut g = self.clone();
        g.remove_edge(a, b);
        g
    }

    /// Adds the edge if the result is still a valid influence diagram.
    pub fn with_edge(&self, a: &str, b: &str) -> Result<IdGraph, GraphError> {
        self.require(a)?;
        self.require(b)?;
        let mut g = self.clone();
        g.insert_edge(a, b);
        g.validate()?;
        Ok(g)
    }

    /// The mapping extension: one fresh chance parent `Pi__<D>` per decision.
    pub fn mapping_extension(&self) -> (IdGraph, BTreeMap<NodeId, NodeId>) {
        let mut g = self.clone();
        let mut map = BTreeMap::new();
        for d in self.decisions() {
            let pi = g.fresh_name("Pi", &d);
            g.insert_node(pi.clone(), NodeKind::Chance);
            g.insert_edge(&pi, &d);
            map.insert(d, pi);
        }
        (g, map)
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            nodes: self.kinds.iter().map(|(id, kind)| NodeDoc { id: id.clone(), kind: *kind }).collect(),
            edges: self.edges(),
        }
    }

    pub fn from_doc(doc: &GraphDoc) -> Result<Self, GraphError> {
        IdGraph::new(doc.nodes.iter().map(|n| (n.id.clone(), n.kind)), doc.edges.iter().cloned())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc = serde_json::from_str(s).map_err(|e| GraphError::Malformed(e.to_string()))?;
        IdGraph::from_doc(&doc)
    }

    /// Graphviz rendering with default styling.
    pub fn to_dot(&self) -> String {
        self.to_dot_styled(&DotStyle::default())
    }

    /// Graphviz rendering. Removed links are drawn dashed; coloured paths are
    /// drawn in their colour.
    pub fn to_dot_styled(&self, style: &DotStyle) -> String {
        let mut out = String::from("digraph G {\n  rankdir=LR;\n");
        for (n, k) in &self.kinds {
            let shape = match k {
                NodeKind::Chance => "ellipse",
                NodeKind::Decision => "box",
                NodeKind::Utility => "diamond",
            };
            let _ = writeln!(out, "  \"{}\" [shape={shape}];", escape(n));
        }
        let mut colours: BTreeMap<(NodeId, NodeId), &str> = BTreeMap::new();
        for (colour, path) in &style.paths {
            for w in path.windows(2) {
                let key = if self.has_edge(&w[0], &w[1]) { (w[0].clone(), w[1].clone()) } else { (w[1].clone(), w[0].clone()) };
                colours.entry(key).or_insert(colour.as_str());
            }
        }
        for (a, b) in self.edges() {
            match colours.get(&(a.clone(), b.clone())) {
                Some(c) => {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\" [color={c}];", escape(&a), escape(&b));
                }
                None => {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(&a), escape(&b));
                }
            }
        }
        for (a, b) in &style.removed {
            let _ = writeln!(out, "  \"{}\" -> \"{}\" [style=dashed];", escape(a), escape(b));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Extra styling for DOT export.
#[derive(Debug, Clone, Default)]
pub struct DotStyle {
    /// Links absent from the graph, drawn dashed.
    pub removed: Vec<(NodeId, NodeId)>,
    /// `(colour, node sequence)`; consecutive nodes must be adjacent.
    pub paths: Vec<(String, Vec<NodeId>)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeKind::*;

    fn f1() -> IdGraph {
        IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("X", "U"), ("D", "U")]).unwrap()
    }

    #[test]
    fn validation_rejects_bad_graphs() {
        assert_eq!(
            IdGraph::from_slices(&[("A", Chance), ("B", Chance)], &[("A", "B"), ("B", "A")]).unwrap_err(),
            GraphError::CycleDetected("A".into())
        );
        assert_eq!(
            IdGraph::from_slices(&[("U", Utility), ("A", Chance)], &[("U", "A")]).unwrap_err(),
            GraphError::UtilityHasChild("U".into())
        );
        assert_eq!(
            IdGraph::from_slices(&[("A", Chance)], &[("A", "B")]).unwrap_err(),
            GraphError::DanglingEdge("A".into(), "B".into())
        );
        assert_eq!(
            IdGraph::from_slices(&[("A", Chance), ("A", Decision)], &[]).unwrap_err(),
            GraphError::DuplicateNode("A".into())
        );
    }

    #[test]
    fn accessors_are_lexicographic() {
        let g = f1();
        assert_eq!(g.nodes().cloned().collect::<Vec<_>>(), vec!["D", "U", "X"]);
        assert_eq!(g.topological_order(), vec!["X", "D", "U"]);
        assert_eq!(g.infolinks(), vec![("X".to_string(), "D".to_string())]);
        assert_eq!(g.family("D"), BTreeSet::from(["D".to_string(), "X".to_string()]));
        assert_eq!(g.utility_descendants("D"), BTreeSet::from(["U".to_string()]));
    }

    #[test]
    fn mapping_extension_adds_one_parent_per_decision() {
        let (m, map) = f1().mapping_extension();
        assert_eq!(map["D"], "Pi__D");
        assert!(m.has_edge("Pi__D", "D"));
        assert_eq!(m.len(), 4);
        assert!(m.parents("Pi__D").is_empty());
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let mut g = f1();
        assert_eq!(g.fresh_name("X", "copy"), "X__copy");
        g.insert_node("X__copy".into(), Chance);
        assert_eq!(g.fresh_name("X", "copy"), "X__copy2");
    }

    #[test]
    fn json_round_trip() {
        let g = f1();
        assert_eq!(IdGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn dot_uses_kind_shapes() {
        let dot = f1().to_dot_styled(&DotStyle { removed: vec![("X".into(), "U".into())], paths: vec![] });
        assert!(dot.contains("\"D\" [shape=box]"));
        assert!(dot.contains("\"U\" [shape=diamond]"));
        assert!(dot.contains("[style=dashed]"));
    }

    #[test]
    fn shortest_directed_path_prefers_lexicographic() {
        let g = IdGraph::from_slices(
            &[("A", Chance), ("B", Chance), ("C", Chance), ("Z", Utility)],
            &[("A", "C"), ("A", "B"), ("B", "Z"), ("C", "Z")],
        )
        .unwrap();
        let p = g.shortest_directed_path("A", |n| n == "Z", &BTreeSet::new()).unwrap();
        assert_eq!(p, vec!["A", "B", "Z"]);
    }
}
