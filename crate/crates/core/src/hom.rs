//! Influence-diagram homomorphisms.
//!
//! A map `h: G' -> G` on nodes is a homomorphism when it
//!
//! * (a) preserves node kinds,
//! * (b) sends every edge `A -> B` to an edge `h(A) -> h(B)` or collapses it,
//! * (c) covers information links: for a decision `D` of `G'`, if
//!   `h(N) -> h(D)` in `G` then `N -> D` in `G'`,
//! * (d) identifies two distinct decisions only if they are adjacent.
//!
//! Homomorphisms preserve solubility, and models can be transported along them
//! without changing expected utilities (see [`crate::model::transport`]).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::HomError;
use crate::graph::{GraphDoc, IdGraph, NodeId, NodeKind};

/// A node map between two graphs, with a cached verification flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdHom {
    pub source: IdGraph,
    pub target: IdGraph,
    pub map: BTreeMap<NodeId, NodeId>,
    verified: bool,
}

/// One failed homomorphism condition with the nodes that witness it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: char,
    pub nodes: Vec<NodeId>,
}

/// On-disk form: `{"source": g', "target": g, "map": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomDoc {
    pub source: GraphDoc,
    pub target: GraphDoc,
    pub map: BTreeMap<NodeId, NodeId>,
}

impl IdHom {
    /// Builds an unverified map; it must be total and land in `target`.
    pub fn new(source: IdGraph, target: IdGraph, map: BTreeMap<NodeId, NodeId>) -> Result<Self, HomError> {
        for n in source.nodes() {
            match map.get(n) {
                None => return Err(HomError::PartialMap(n.clone())),
                Some(t) => target.require(t)?,
            }
        }
        for k in map.keys() {
            source.require(k)?;
        }
        Ok(IdHom { source, target, map, verified: false })
    }

    /// Builds the map and checks the four conditions.
    pub fn checked(source: IdGraph, target: IdGraph, map: BTreeMap<NodeId, NodeId>) -> Result<Self, HomError> {
        let mut h = IdHom::new(source, target, map)?;
        h.verify()?;
        Ok(h)
    }

    pub fn identity(g: &IdGraph) -> Self {
        let map = g.nodes().map(|n| (n.clone(), n.clone())).collect();
        IdHom { source: g.clone(), target: g.clone(), map, verified: true }
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn image(&self, n: &str) -> &NodeId {
        &self.map[n]
    }

    /// Source nodes mapped to `n`, sorted.
    pub fn preimage(&self, n: &str) -> Vec<NodeId> {
        self.map.iter().filter(|(_, t)| *t == n).map(|(s, _)| s.clone()).collect()
    }

    /// Every violated condition, each with a witness.
    pub fn violations(&self) -> Vec<Violation> {
        let (src, tgt, h) = (&self.source, &self.target, &self.map);
        let mut out = vec![];
        for n in src.nodes() {
            if src.kind(n) != tgt.kind(&h[n]) {
                out.push(Violation { condition: 'a', nodes: vec![n.clone(), h[n].clone()] });
            }
        }
        for (a, b) in src.edges() {
            if h[&a] != h[&b] && !tgt.has_edge(&h[&a], &h[&b]) {
                out.push(Violation { condition: 'b', nodes: vec![a, b] });
            }
        }
        let mut pre: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for (s, t) in h {
            pre.entry(t).or_default().push(s);
        }
        for d in src.decisions() {
            for p in tgt.parents(&h[&d]) {
                for n in pre.get(p).into_iter().flatten() {
                    if !src.has_edge(n, &d) {
                        out.push(Violation { condition: 'c', nodes: vec![(*n).clone(), d.clone()] });
                    }
                }
            }
        }
        let ds = src.decisions();
        for (i, d1) in ds.iter().enumerate() {
            for d2 in &ds[i + 1..] {
                if h[d1] == h[d2] && !src.has_edge(d1, d2) && !src.has_edge(d2, d1) {
                    out.push(Violation { condition: 'd', nodes: vec![d1.clone(), d2.clone()] });
                }
            }
        }
        out
    }

    /// Checks all conditions and records the result.
    pub fn verify(&mut self) -> Result<(), HomError> {
        let v = self.violations();
        self.verified = v.is_empty();
        match v.into_iter().next() {
            None => Ok(()),
            Some(first) => Err(HomError::ConditionFails { condition: first.condition, detail: first.nodes.join(", ") }),
        }
    }

    /// `outer ∘ inner`, from `inner.source` to `outer.target`.
    pub fn compose(outer: &IdHom, inner: &IdHom) -> Result<IdHom, HomError> {
        if inner.target != outer.source {
            return Err(HomError::DomainMismatch("inner target differs from outer source".into()));
        }
        let map = inner.map.iter().map(|(s, m)| (s.clone(), outer.map[m].clone())).collect();
        IdHom::checked(inner.source.clone(), outer.target.clone(), map)
    }

    /// Composes a chain `[h_k, ..., h_1]` applied right to left.
    pub fn compose_all(chain: &[&IdHom]) -> Result<IdHom, HomError> {
        let (last, rest) = chain.split_last().ok_or_else(|| HomError::DomainMismatch("empty chain".into()))?;
        let mut acc = (*last).clone();
        for h in rest.iter().rev() {
            acc = IdHom::compose(h, &acc)?;
        }
        Ok(acc)
    }

    pub fn to_doc(&self) -> HomDoc {
        HomDoc { source: self.source.to_doc(), target: self.target.to_doc(), map: self.map.clone() }
    }

    pub fn from_doc(doc: &HomDoc) -> Result<Self, HomError> {
        IdHom::new(IdGraph::from_doc(&doc.source)?, IdGraph::from_doc(&doc.target)?, doc.map.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("hom serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, HomError> {
        let doc: HomDoc =
            serde_json::from_str(s).map_err(|e| HomError::Graph(crate::error::GraphError::Malformed(e.to_string())))?;
        IdHom::from_doc(&doc)
    }
}

/// Deletes and copies nodes.
///
/// `copies[N]` lists the copies of `N` in order; an empty list deletes
/// `N`, and nodes absent from `copies` are kept as themselves. Every edge
/// `A -> B` becomes `a -> b` for every copy `a` of `A` and `b` of `B`, and the
/// copies of each non-utility node are totally ordered by list position, so
/// copies of one decision are pairwise adjacent. The returned
/// homomorphism maps every copy to its original.
pub fn copy_delete_transform(
    g: &IdGraph,
    copies: &BTreeMap<NodeId, Vec<NodeId>>,
) -> Result<(IdGraph, IdHom), HomError> {
    for n in copies.keys() {
        g.require(n)?;
    }
    let sets: BTreeMap<&NodeId, Vec<NodeId>> =
        g.nodes().map(|n| (n, copies.get(n).cloned().unwrap_or_else(|| vec![n.clone()]))).collect();
    let mut owner: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
    for (n, cs) in &sets {
        for c in cs {
            if owner.insert(c, n).is_some() {
                return Err(HomError::OverlappingCopySets(c.clone()));
            }
        }
    }
    let mut out = IdGraph::default();
    for (n, cs) in &sets {
        for c in cs {
            out.insert_node(c.clone(), g.kind_of(n));
        }
    }
    for (a, b) in g.edges() {
        for ca in &sets[&a] {
            for cb in &sets[&b] {
                out.insert_edge(ca, cb);
            }
        }
    }
    for (n, cs) in &sets {
        if g.kind_of(n) != NodeKind::Utility {
            for (i, a) in cs.iter().enumerate() {
                for b in &cs[i + 1..] {
                    out.insert_edge(a, b);
                }
            }
        }
    }
    out.validate()?;
    let map = owner.into_iter().map(|(c, n)| (c.clone(), n.clone())).collect();
    let h = IdHom::checked(out.clone(), g.clone(), map)?;
    Ok((out, h))
}

/// Keeps only the edges in `keep`, which must contain every edge into a decision.
pub fn prune_links(g: &IdGraph, keep: &BTreeSet<(NodeId, NodeId)>) -> Result<(IdGraph, IdHom), HomError> {
    for (a, b) in g.edges() {
        if g.is_decision(&b) && !keep.contains(&(a.clone(), b.clone())) {
            return Err(HomError::DroppedInfolink(a, b));
        }
    }
    let mut out = g.clone();
    for (a, b) in g.edges() {
        if !keep.contains(&(a.clone(), b.clone())) {
            out.remove_edge(&a, &b);
        }
    }
    let map = g.nodes().map(|n| (n.clone(), n.clone())).collect();
    let h = IdHom::checked(out.clone(), g.clone(), map)?;
    Ok((out, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::is_soluble;
    use NodeKind::*;

    fn fig1_g() -> IdGraph {
        IdGraph::from_slices(&[("Y", Chance), ("D", Decision), ("U", Utility)], &[("Y", "D"), ("Y", "U"), ("D", "U")]).unwrap()
    }

    fn s(xs: &[&str]) -> Vec<NodeId> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn fig1_chain_of_transformations() {
        let g = fig1_g();
        let (g1, blue) = copy_delete_transform(&g, &BTreeMap::from([("Y".to_string(), vec![])])).unwrap();
        assert_eq!(g1.edges(), vec![("D".to_string(), "U".to_string())]);
        let (g2, green) = copy_delete_transform(&g1, &BTreeMap::from([("D".to_string(), s(&["D", "D'"]))])).unwrap();
        assert!(g2.has_edge("D", "D'") && g2.has_edge("D'", "U") && g2.has_edge("D", "U"));
        let keep: BTreeSet<_> = [("D".to_string(), "D'".to_string()), ("D".to_string(), "U".to_string())].into();
        let (g3, red) = prune_links(&g2, &keep).unwrap();
        let total = IdHom::compose_all(&[&blue, &green, &red]).unwrap();
        assert!(total.is_verified());
        assert_eq!(total.source, g3);
        assert!(is_soluble(&g3).soluble);
    }

    #[test]
    fn unlinked_decisions_violate_d() {
        let g1 = IdGraph::from_slices(&[("D", Decision), ("U", Utility)], &[("D", "U")]).unwrap();
        let g2 = IdGraph::from_slices(&[("D", Decision), ("D'", Decision), ("U", Utility)], &[("D", "U"), ("D'", "U")]).unwrap();
        let map = BTreeMap::from([("D".into(), "D".into()), ("D'".into(), "D".into()), ("U".into(), "U".into())]);
        let h = IdHom::new(g2, g1, map).unwrap();
        assert_eq!(h.violations(), vec![Violation { condition: 'd', nodes: s(&["D", "D'"]) }]);
    }

    #[test]
    fn kind_and_link_violations_are_reported() {
        let g = fig1_g();
        let src = IdGraph::from_slices(&[("A", Chance), ("B", Chance)], &[("A", "B")]).unwrap();
        let map = BTreeMap::from([("A".into(), "U".into()), ("B".into(), "Y".into())]);
        let v = IdHom::new(src, g, map).unwrap().violations();
        assert!(v.iter().any(|x| x.condition == 'a'));
        assert!(v.iter().any(|x| x.condition == 'b'));
    }

    #[test]
    fn uncovered_infolink_violates_c() {
        let g = fig1_g();
        let src = IdGraph::from_slices(&[("Y", Chance), ("D", Decision), ("U", Utility)], &[("Y", "U"), ("D", "U")]).unwrap();
        let v = IdHom::new(src, g, BTreeMap::from([("Y".into(), "Y".into()), ("D".into(), "D".into()), ("U".into(), "U".into())]))
            .unwrap()
            .violations();
        assert_eq!(v, vec![Violation { condition: 'c', nodes: s(&["Y", "D"]) }]);
    }

    #[test]
    fn partial_maps_and_overlaps_are_errors() {
        let g = fig1_g();
        assert_eq!(IdHom::new(g.clone(), g.clone(), BTreeMap::new()).unwrap_err(), HomError::PartialMap("D".into()));
        let copies = BTreeMap::from([("D".to_string(), s(&["A"])), ("Y".to_string(), s(&["A"]))]);
        assert_eq!(copy_delete_transform(&g, &copies).unwrap_err(), HomError::OverlappingCopySets("A".into()));
    }

    #[test]
    fn prune_refuses_to_drop_infolinks() {
        let g = fig1_g();
        let keep: BTreeSet<_> = [("Y".to_string(), "U".to_string())].into();
        assert_eq!(prune_links(&g, &keep).unwrap_err(), HomError::DroppedInfolink("Y".into(), "D".into()));
    }

    #[test]
    fn identity_composition() {
        let g = fig1_g();
        let (g1, blue) = copy_delete_transform(&g, &BTreeMap::from([("Y".to_string(), vec![])])).unwrap();
        let id = IdHom::identity(&g1);
        assert_eq!(IdHom::compose(&blue, &id).unwrap().map, blue.map);
    }
}
