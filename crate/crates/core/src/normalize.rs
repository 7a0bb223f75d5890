//! Homomorphic transformations that bring a tree of systems into normal form.
//!
//! The pipeline runs on the minimal d-reduction `G*`:
//!
//! 1. [`transform1_split`] copies every tree node once per position it
//!    occupies, giving position uniqueness;
//! 2. [`transform2_frontdoor`] inserts a collider copy of `X^s` in front of
//!    every backdoor info path;
//! 3. [`transform3_prune`] drops every edge that the normal form forbids.
//!
//! [`transform4_split_root`] moves the extra boolean of a non-directed root
//! decision into a separate decision; it is used by Taskify.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{is_soluble, minimal_d_reduction, ReductionTrace};
use crate::error::{GraphError, NormalizeError, SystemError};
use crate::graph::{IdGraph, NodeId};
use crate::hom::{copy_delete_transform, prune_links, IdHom};
use crate::separation::{Step, TracedPath};
use crate::systems::{base_nodes, build_full_tree, normal_form_check, position, PathRef, Position, System, SystemTree};

/// Where a node of a transformed graph came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Node of the untransformed graph it maps to.
    pub original: NodeId,
    /// System whose position created the copy.
    pub system: Option<usize>,
    /// `info`, `control`, `obs:C`, `info+control` or `copy`.
    pub path: Option<String>,
}

impl Provenance {
    fn same(n: &str) -> Self {
        Provenance { original: n.to_string(), system: None, path: None }
    }
}

/// Output of one transformation stage, or of a composed pipeline.
#[derive(Debug, Clone)]
pub struct TransformResult {
    pub graph: IdGraph,
    pub tree: SystemTree,
    /// From `graph` to the stage input (or the pipeline input).
    pub hom: IdHom,
    pub provenance: BTreeMap<NodeId, Provenance>,
}

impl TransformResult {
    /// Follows `self` by `next`, composing homs and provenance.
    pub fn then(&self, next: TransformResult) -> Result<TransformResult, NormalizeError> {
        let hom = IdHom::compose(&self.hom, &next.hom)?;
        let provenance = next
            .provenance
            .into_iter()
            .map(|(n, p)| {
                let prev = &self.provenance[&p.original];
                let merged = if p.system.is_some() {
                    Provenance { original: prev.original.clone(), system: p.system, path: p.path }
                } else {
                    prev.clone()
                };
                (n, merged)
            })
            .collect();
        Ok(TransformResult { graph: next.graph, tree: next.tree, hom, provenance })
    }

    /// Identity stage on `(g, t)`.
    pub fn identity(g: &IdGraph, t: &SystemTree) -> Self {
        TransformResult {
            graph: g.clone(),
            tree: t.clone(),
            hom: IdHom::identity(g),
            provenance: g.nodes().map(|n| (n.clone(), Provenance::same(n))).collect(),
        }
    }
}

fn copy_name(node: &str, pos: &Position) -> Option<(NodeId, usize, String)> {
    match pos {
        Position::Root(_) => None,
        Position::Utility(k) => Some((format!("{node}__s{k}__pic"), *k, "info+control".into())),
        Position::OnPath(k, PathRef::Info) => Some((format!("{node}__s{k}__pi"), *k, "info".into())),
        Position::OnPath(k, PathRef::Control) => Some((format!("{node}__s{k}__pc"), *k, "control".into())),
        Position::OnPath(k, PathRef::Obs(c)) => Some((format!("{node}__s{k}__po_{c}"), *k, format!("obs:{c}"))),
    }
}

fn rebuild_tree(
    g: &IdGraph,
    t: &SystemTree,
    mut rename: impl FnMut(usize, &PathRef, &str) -> NodeId,
) -> Result<SystemTree, NormalizeError> {
    let mut systems = vec![];
    for (k, s) in t.systems.iter().enumerate() {
        let mut map_path = |r: &PathRef, p: &TracedPath| -> Result<TracedPath, NormalizeError> {
            let nodes = p.nodes.iter().map(|n| rename(k, r, n)).collect();
            TracedPath::from_nodes(g, nodes).map_err(|e| SystemError::from(e).into())
        };
        let info = map_path(&PathRef::Info, &s.info)?;
        let control = map_path(&PathRef::Control, &s.control)?;
        let mut obs = BTreeMap::new();
        for (c, p) in &s.obs {
            let p = map_path(&PathRef::Obs(c.clone()), p)?;
            obs.insert(p.start().clone(), p);
        }
        systems.push(System {
            decision: control.start().clone(),
            utility: control.end().clone(),
            info_node: info.start().clone(),
            info,
            control,
            obs,
        });
    }
    Ok(remap_pred(systems, t))
}

/// Predecessor links of `t` with observation-path references renamed to the
/// corresponding colliders of `systems`.
fn remap_pred(systems: Vec<System>, t: &SystemTree) -> SystemTree {
    let mut pred = BTreeMap::new();
    for (k, (p, r)) in &t.pred {
        let r = match r {
            PathRef::Obs(c) => {
                let i = t.systems[*p].colliders().iter().position(|x| x == c).expect("obs path of a collider");
                PathRef::Obs(systems[*p].colliders()[i].clone())
            }
            other => other.clone(),
        };
        pred.insert(*k, (*p, r));
    }
    SystemTree { systems, pred }
}

fn require_valid(g: &IdGraph, t: &SystemTree) -> Result<(), NormalizeError> {
    let v = t.validate(g);
    if v.is_empty() {
        Ok(())
    } else {
        Err(SystemError::InvalidTree(v.join("; ")).into())
    }
}

/// Transformation 1: one copy per tree position.
///
/// Copies are named `<node>__s<k>__p<tag>` with tag `i`, `c`, `o_<C>` or
/// `ic` (utilities). Originals stay in the graph; copies of one node are
/// ordered by first occurrence in tree preorder.
pub fn transform1_split(g: &IdGraph, t: &SystemTree) -> Result<TransformResult, NormalizeError> {
    require_valid(g, t)?;
    let mut copies: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut provenance: BTreeMap<NodeId, Provenance> = g.nodes().map(|n| (n.clone(), Provenance::same(n))).collect();
    let mut renamed: BTreeMap<(usize, PathRef, NodeId), NodeId> = BTreeMap::new();
    for k in t.preorder() {
        let s = &t.systems[k];
        for (r, p) in s.paths() {
            for n in &p.nodes {
                let pos = position(t, k, &r, n)?;
                let new = match copy_name(n, &pos) {
                    None => n.clone(),
                    Some((name, sys, tag)) => {
                        let list = copies.entry(n.clone()).or_insert_with(|| vec![n.clone()]);
                        if !list.contains(&name) {
                            if g.contains(&name) {
                                return Err(GraphError::NameCollision(name).into());
                            }
                            list.push(name.clone());
                            provenance.insert(name.clone(), Provenance { original: n.clone(), system: Some(sys), path: Some(tag) });
                        }
                        name
                    }
                };
                renamed.insert((k, r.clone(), n.clone()), new);
            }
        }
    }
    let (g1, hom) = copy_delete_transform(g, &copies)?;
    let tree = rebuild_tree(&g1, t, |k, r, n| renamed[&(k, r.clone(), n.to_string())].clone())?;
    Ok(TransformResult { graph: g1, tree, hom, provenance })
}

/// Transformation 2: every backdoor info path `X^s <- N ...` becomes
/// `X^s -> X^s__copy__s<k> <- N ...`, with the copy observed directly by `D^s`.
pub fn transform2_frontdoor(g: &IdGraph, t: &SystemTree) -> Result<TransformResult, NormalizeError> {
    require_valid(g, t)?;
    let nf = normal_form_check(g, t);
    if !nf.a_position_uniqueness {
        return Err(NormalizeError::PropertyAMissing(nf.witnesses.join("; ")));
    }
    let mut copies: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut provenance: BTreeMap<NodeId, Provenance> = g.nodes().map(|n| (n.clone(), Provenance::same(n))).collect();
    let mut inserted: BTreeMap<usize, NodeId> = BTreeMap::new();
    for k in t.preorder() {
        let s = &t.systems[k];
        if s.info.steps.first() != Some(&Step::Backward) {
            continue;
        }
        let name = format!("{}__copy__s{k}", s.info_node);
        if g.contains(&name) {
            return Err(GraphError::NameCollision(name).into());
        }
        copies.entry(s.info_node.clone()).or_insert_with(|| vec![s.info_node.clone()]).push(name.clone());
        provenance.insert(name.clone(), Provenance { original: s.info_node.clone(), system: Some(k), path: Some("copy".into()) });
        inserted.insert(k, name);
    }
    if inserted.is_empty() {
        return Ok(TransformResult::identity(g, t));
    }
    let (g2, hom) = copy_delete_transform(g, &copies)?;
    let mut systems = vec![];
    for (k, s) in t.systems.iter().enumerate() {
        let mut s2 = s.clone();
        let conv = |p: &TracedPath| TracedPath::from_nodes(&g2, p.nodes.clone()).map_err(SystemError::from);
        s2.info = conv(&s.info)?;
        s2.control = conv(&s.control)?;
        for p in s2.obs.values_mut() {
            *p = conv(p)?;
        }
        if let Some(c) = inserted.get(&k) {
            let mut nodes = s.info.nodes.clone();
            nodes.insert(1, c.clone());
            s2.info = conv(&TracedPath { nodes, steps: vec![] })?;
            s2.obs.insert(c.clone(), conv(&TracedPath { nodes: vec![c.clone(), s.decision.clone()], steps: vec![] })?);
        }
        systems.push(s2);
    }
    let tree = SystemTree { systems, pred: t.pred.clone() };
    Ok(TransformResult { graph: g2, tree, hom, provenance })
}

/// Transformation 3: removes every edge that is neither a within-tree link,
/// nor into a decision, nor between two base nodes.
pub fn transform3_prune(g: &IdGraph, t: &SystemTree) -> Result<TransformResult, NormalizeError> {
    require_valid(g, t)?;
    let nf = normal_form_check(g, t);
    if !(nf.a_position_uniqueness && nf.b_no_backdoor) {
        return Err(NormalizeError::PropertyABMissing(nf.witnesses.join("; ")));
    }
    let within = t.within_links();
    let base = base_nodes(g, t);
    let keep: BTreeSet<(NodeId, NodeId)> = g
        .edges()
        .into_iter()
        .filter(|(a, b)| within.contains(&(a.clone(), b.clone())) || g.is_decision(b) || (base.contains(a) && base.contains(b)))
        .collect();
    let (g3, hom) = prune_links(g, &keep)?;
    let tree = SystemTree::from_doc(&g3, &t.to_doc())?;
    let provenance = g3.nodes().map(|n| (n.clone(), Provenance::same(n))).collect();
    Ok(TransformResult { graph: g3, tree, hom, provenance })
}

/// Transformation 4: if the root info path is not directed, adds a decision
/// `D__copy` copying the root decision; otherwise the identity.
pub fn transform4_split_root(g: &IdGraph, t: &SystemTree) -> Result<TransformResult, NormalizeError> {
    let nf = normal_form_check(g, t);
    if !nf.holds() || !t.validate(g).is_empty() {
        return Err(NormalizeError::NotNormalForm(nf.witnesses.join("; ")));
    }
    let root = t.root();
    if root.is_directed_info() {
        return Ok(TransformResult::identity(g, t));
    }
    let d = &root.decision;
    let name = format!("{d}__copy");
    if g.contains(&name) {
        return Err(GraphError::NameCollision(name).into());
    }
    let copies = BTreeMap::from([(d.clone(), vec![d.clone(), name.clone()])]);
    let (g4, hom) = copy_delete_transform(g, &copies)?;
    let tree = SystemTree::from_doc(&g4, &t.to_doc())?;
    let mut provenance: BTreeMap<NodeId, Provenance> = g.nodes().map(|n| (n.clone(), Provenance::same(n))).collect();
    provenance.insert(name, Provenance { original: d.clone(), system: None, path: Some("copy".into()) });
    Ok(TransformResult { graph: g4, tree, hom, provenance })
}

/// Every stage of the normal-form pipeline for `x -> d`.
#[derive(Debug, Clone)]
pub struct NormalFormStages {
    /// The minimal d-reduction the pipeline runs on.
    pub reduced: IdGraph,
    pub reduction: ReductionTrace,
    /// The full tree on `reduced`.
    pub tree: SystemTree,
    pub split: TransformResult,
    pub frontdoor: TransformResult,
    pub pruned: TransformResult,
    /// Composition of the three stages; its hom targets `reduced`.
    pub result: TransformResult,
}

/// Runs the pipeline and keeps every stage.
pub fn normal_form_stages(g: &IdGraph, x: &str, d: &str) -> Result<NormalFormStages, NormalizeError> {
    g.require(x)?;
    g.require_decision(d)?;
    if !is_soluble(g).soluble {
        return Err(NormalizeError::Insoluble);
    }
    let (reduced, reduction) = minimal_d_reduction(g);
    if !reduced.has_edge(x, d) {
        return Err(NormalizeError::CriterionFails(x.into(), d.into()));
    }
    let tree = build_full_tree(&reduced, x, d)?;
    let split = transform1_split(&reduced, &tree)?;
    let frontdoor = transform2_frontdoor(&split.graph, &split.tree)?;
    let pruned = transform3_prune(&frontdoor.graph, &frontdoor.tree)?;
    let result = split.then(frontdoor.clone())?.then(pruned.clone())?;
    Ok(NormalFormStages { reduced, reduction, tree, split, frontdoor, pruned, result })
}

/// A graph with a normal-form tree rooted at `x -> d`, and a verified
/// homomorphism onto the minimal d-reduction of `g`.
///
/// The hom targets `G*` rather than `g`: `g`'s nonrequisite links into a
/// decision have no counterpart in the output.
pub fn to_normal_form(g: &IdGraph, x: &str, d: &str) -> Result<TransformResult, NormalizeError> {
    Ok(normal_form_stages(g, x, d)?.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::is_soluble;
    use crate::graph::NodeKind::*;

    fn f1() -> IdGraph {
        IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("X", "U"), ("D", "U")]).unwrap()
    }

    fn backdoor() -> IdGraph {
        IdGraph::from_slices(
            &[("Q", Chance), ("X", Chance), ("D", Decision), ("U", Utility)],
            &[("Q", "X"), ("Q", "U"), ("X", "D"), ("D", "U")],
        )
        .unwrap()
    }

    fn check_result(orig: &IdGraph, r: &TransformResult, x: &str, d: &str) {
        assert!(r.hom.is_verified());
        assert!(r.tree.validate(&r.graph).is_empty(), "{:?}", r.tree.validate(&r.graph));
        let nf = normal_form_check(&r.graph, &r.tree);
        assert!(nf.holds(), "{:?}", nf.witnesses);
        assert_eq!(r.hom.image(&r.tree.root().info_node), x);
        assert_eq!(r.hom.image(&r.tree.root().decision), d);
        assert!(is_soluble(&r.graph).soluble);
        for n in orig.nodes() {
            assert!(r.graph.contains(n));
        }
        let tree_nodes = r.tree.nodes();
        let originals: BTreeSet<_> = orig.nodes().filter(|n| tree_nodes.contains(*n)).cloned().collect();
        assert_eq!(originals, BTreeSet::from([x.to_string(), d.to_string()]));
    }

    #[test]
    fn f1_pipeline_keeps_tree_shape() {
        let g = f1();
        let r = to_normal_form(&g, "X", "D").unwrap();
        check_result(&g, &r, "X", "D");
        assert_eq!(r.tree.systems.len(), 1);
        assert_eq!(r.tree.root().info.nodes, vec!["X", "U__s0__pic"]);
        assert_eq!(r.tree.root().control.nodes, vec!["D", "U__s0__pic"]);
    }

    #[test]
    fn backdoor_gets_front_door_copy() {
        let g = backdoor();
        let st = normal_form_stages(&g, "X", "D").unwrap();
        assert!(!normal_form_check(&st.split.graph, &st.split.tree).b_no_backdoor);
        let s = st.frontdoor.tree.root();
        assert_eq!(s.info.nodes, vec!["X", "X__copy__s0", "Q__s0__pi", "U__s0__pic"]);
        assert_eq!(s.obs["X__copy__s0"].nodes, vec!["X__copy__s0", "D"]);
        assert_eq!(st.frontdoor.hom.image("X__copy__s0"), "X");
        check_result(&g, &st.result, "X", "D");
        assert_eq!(st.result.provenance["Q__s0__pi"].original, "Q");
    }

    #[test]
    fn nonrequisite_link_fails_criterion() {
        let g = IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("D", "U")]).unwrap();
        assert_eq!(to_normal_form(&g, "X", "D").unwrap_err(), NormalizeError::CriterionFails("X".into(), "D".into()));
    }

    #[test]
    fn insoluble_graph_is_refused() {
        let g = IdGraph::from_slices(&[("D1", Decision), ("D2", Decision), ("U", Utility)], &[("D1", "U"), ("D2", "U")]).unwrap();
        assert!(matches!(to_normal_form(&g, "D1", "D2"), Err(NormalizeError::Insoluble) | Err(NormalizeError::Graph(_))));
    }

    #[test]
    fn prune_removes_stray_edge_but_keeps_infolinks() {
        // W -> U__s0__pic is neither within the tree nor between base nodes.
        let g = IdGraph::from_slices(
            &[("X", Chance), ("W", Chance), ("D", Decision), ("U", Utility)],
            &[("X", "D"), ("X", "U"), ("D", "U"), ("W", "U"), ("W", "D")],
        )
        .unwrap();
        let st = normal_form_stages(&g, "X", "D").unwrap();
        assert!(st.frontdoor.graph.has_edge("W", "U__s0__pic"));
        assert!(!st.pruned.graph.has_edge("W", "U__s0__pic"));
        assert!(st.pruned.graph.has_edge("W", "D"));
        assert!(st.pruned.graph.has_edge("W", "U"));
    }

    #[test]
    fn root_split_only_for_non_directed_root() {
        let g = f1();
        let r = to_normal_form(&g, "X", "D").unwrap();
        let t4 = transform4_split_root(&r.graph, &r.tree).unwrap();
        assert_eq!(t4.graph, r.graph);
        let g = backdoor();
        let r = to_normal_form(&g, "X", "D").unwrap();
        let t4 = transform4_split_root(&r.graph, &r.tree).unwrap();
        assert!(t4.graph.is_decision("D__copy"));
        assert_eq!(t4.hom.image("D__copy"), "D");
        assert!(IdHom::compose(&r.hom, &t4.hom).unwrap().is_verified());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let g = backdoor();
        let a = to_normal_form(&g, "X", "D").unwrap();
        let b = to_normal_form(&g, "X", "D").unwrap();
        assert_eq!(a.graph.to_json(), b.graph.to_json());
        assert_eq!(a.tree.to_json(), b.tree.to_json());
    }
}
