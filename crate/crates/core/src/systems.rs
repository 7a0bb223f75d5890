//! Systems and trees of systems.
//!
//! A system for the information link `X -> D` bundles
//!
//! * an *info path* from `X` to a utility `U` below `D`, active given
//!   `Fa(D) \ {X}`,
//! * a *control path*, directed from `D` to the same `U`,
//! * one *observation path* per collider on the info path: a shortest directed
//!   path from the collider to `D`.
//!
//! A tree of systems hangs a child system off every information link that a
//! path of its parent traverses. Trees in *normal form* are the input to the
//! witness-model construction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::requisite;
use crate::error::{SeparationError, SystemError};
use crate::graph::{IdGraph, NodeId};
use crate::separation::{d_separated, is_active_path, visit_active_paths, Step, TracedPath};

/// Names one path of a system.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathRef {
    Info,
    Control,
    /// The observation path headed by the given collider.
    Obs(NodeId),
}

impl fmt::Display for PathRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathRef::Info => write!(f, "info"),
            PathRef::Control => write!(f, "control"),
            PathRef::Obs(c) => write!(f, "obs:{c}"),
        }
    }
}

impl FromStr for PathRef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "info" => Ok(PathRef::Info),
            "control" => Ok(PathRef::Control),
            _ => s.strip_prefix("obs:").map(|c| PathRef::Obs(c.to_string())).ok_or_else(|| format!("bad path name {s:?}")),
        }
    }
}

impl Serialize for PathRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PathRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A system for the information link `info_node -> decision`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    pub decision: NodeId,
    pub utility: NodeId,
    pub info_node: NodeId,
    pub info: TracedPath,
    pub control: TracedPath,
    /// Keyed by collider.
    pub obs: BTreeMap<NodeId, TracedPath>,
}

impl System {
    pub fn path(&self, r: &PathRef) -> Option<&TracedPath> {
        match r {
            PathRef::Info => Some(&self.info),
            PathRef::Control => Some(&self.control),
            PathRef::Obs(c) => self.obs.get(c),
        }
    }

    /// Info, control, then observation paths in info-path order of colliders.
    pub fn paths(&self) -> Vec<(PathRef, &TracedPath)> {
        let mut out = vec![(PathRef::Info, &self.info), (PathRef::Control, &self.control)];
        for c in self.colliders() {
            if let Some(p) = self.obs.get(&c) {
                out.push((PathRef::Obs(c), p));
            }
        }
        out
    }

    /// Colliders of the info path, in path order.
    pub fn colliders(&self) -> Vec<NodeId> {
        self.info.collider_positions().into_iter().map(|i| self.info.nodes[i].clone()).collect()
    }

    /// All nodes on any path of the system.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.paths().into_iter().flat_map(|(_, p)| p.nodes.iter().cloned()).collect()
    }

    /// Edges on the paths plus the system's own information link.
    pub fn within_links(&self) -> BTreeSet<(NodeId, NodeId)> {
        let mut out: BTreeSet<_> = self.paths().into_iter().flat_map(|(_, p)| p.edges()).collect();
        out.insert((self.info_node.clone(), self.decision.clone()));
        out
    }

    /// The info path has no fork (and therefore no collider).
    pub fn is_directed_info(&self) -> bool {
        self.info.is_directed()
    }

    /// Information links traversed by the paths, other than those into `D^s`,
    /// with the path that traverses them.
    pub fn traversed_infolinks(&self, g: &IdGraph) -> Vec<(PathRef, NodeId, NodeId)> {
        let mut out = vec![];
        for (r, p) in self.paths() {
            for (a, b) in p.edges() {
                if g.is_decision(&b) && b != self.decision {
                    out.push((r.clone(), a, b));
                }
            }
        }
        out
    }

    /// Question node, obs nodes and the back/front split.
    pub fn elements(&self) -> SystemElements {
        let obs_nodes = self
            .obs
            .iter()
            .map(|(c, p)| (c.clone(), p.nodes[p.nodes.len().saturating_sub(2)].clone()))
            .collect();
        let q_pos = self.info.fork_positions().last().copied();
        let mut back = BTreeSet::new();
        if let Some(q) = q_pos {
            back.extend(self.info.nodes[..=q].iter().cloned());
            for p in self.obs.values() {
                back.extend(p.nodes[..p.nodes.len() - 1].iter().cloned());
            }
        }
        let front = self.nodes().difference(&back).cloned().collect();
        SystemElements { obs_nodes, question: q_pos.map(|q| self.info.nodes[q].clone()), back, front }
    }
}

/// Derived structure of a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemElements {
    /// Collider to the penultimate node of its observation path.
    pub obs_nodes: BTreeMap<NodeId, NodeId>,
    /// The fork on the info path closest to the utility.
    pub question: Option<NodeId>,
    pub back: BTreeSet<NodeId>,
    pub front: BTreeSet<NodeId>,
}

/// Checks every defining property of a system against `g`; returns violations.
pub fn validate_system(g: &IdGraph, s: &System) -> Vec<String> {
    let mut v = vec![];
    for n in [&s.decision, &s.utility, &s.info_node] {
        if !g.contains(n) {
            v.push(format!("unknown node {n}"));
        }
    }
    if !v.is_empty() {
        return v;
    }
    if !g.is_decision(&s.decision) {
        v.push(format!("{} is not a decision", s.decision));
    }
    if !g.is_utility(&s.utility) {
        v.push(format!("{} is not a utility", s.utility));
    }
    if !g.has_edge(&s.info_node, &s.decision) {
        v.push(format!("no information link {} -> {}", s.info_node, s.decision));
    }
    for (r, p) in s.paths() {
        if let Err(e) = p.check_in(g) {
            v.push(format!("{r} path: {e}"));
        }
    }
    for (c, p) in &s.obs {
        if let Err(e) = p.check_in(g) {
            v.push(format!("obs:{c} path: {e}"));
        }
    }
    if !v.is_empty() {
        return v;
    }
    if s.control.start() != &s.decision || s.control.end() != &s.utility || !s.control.is_directed() {
        v.push("control path is not directed from the decision to the utility".into());
    }
    if s.info.start() != &s.info_node || s.info.end() != &s.utility {
        v.push("info path does not run from the info node to the utility".into());
    }
    let mut z = g.family(&s.decision);
    z.remove(&s.info_node);
    if !is_active_path(g, &s.info, &z).unwrap_or(false) {
        v.push("info path is not active given Fa(D) \\ {X}".into());
    }
    let colliders: BTreeSet<NodeId> = s.colliders().into_iter().collect();
    let keys: BTreeSet<NodeId> = s.obs.keys().cloned().collect();
    if colliders != keys {
        v.push(format!("obs paths {:?} do not match colliders {:?}", keys, colliders));
    }
    for (c, p) in &s.obs {
        if p.start() != c || p.end() != &s.decision || !p.is_directed() {
            v.push(format!("obs path of {c} is not directed from {c} to the decision"));
            continue;
        }
        match g.shortest_directed_path(c, |n| n == s.decision, &BTreeSet::new()) {
            Some(sp) if sp.len() - 1 == p.len() => {}
            _ => v.push(format!("obs path of {c} is not of minimal length")),
        }
    }
    v
}

/// Constructs the system for `x -> d` in `gstar`: the shortest, then
/// lexicographically least, info path, preferring info paths whose
/// observation paths can avoid `x`; shortest lexicographic control and
/// observation paths.
pub fn construct_system(gstar: &IdGraph, x: &str, d: &str) -> Result<System, SystemError> {
    gstar.require(x)?;
    gstar.require_decision(d)?;
    if !gstar.has_edge(x, d) {
        return Err(SystemError::NoSuchInfolink(x.into(), d.into()));
    }
    if !requisite(gstar, x, d).map_err(|e| SystemError::InvalidSystem(e.to_string()))? {
        return Err(SystemError::NotRequisite(x.into(), d.into()));
    }
    let mut z = gstar.family(d);
    z.remove(x);
    let targets = gstar.utility_descendants(d);
    let avoid_x = BTreeSet::from([x.to_string()]);
    let mut first: Option<TracedPath> = None;
    let mut chosen: Option<(TracedPath, BTreeMap<NodeId, TracedPath>)> = None;
    let mut budget = 5000usize;
    visit_active_paths(gstar, x, &targets, &z, |_| true, |p| {
        if first.is_none() {
            first = Some(p.clone());
        }
        if let Some(obs) = obs_paths(gstar, p, d, &avoid_x) {
            chosen = Some((p.clone(), obs));
            return ControlFlow::Break(());
        }
        budget -= 1;
        if budget == 0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let (info, obs) = match chosen {
        Some(c) => c,
        None => {
            let p = first.ok_or_else(|| SystemError::NotRequisite(x.into(), d.into()))?;
            let obs = obs_paths(gstar, &p, d, &BTreeSet::new())
                .ok_or_else(|| SystemError::InvalidSystem("collider without a directed path to the decision".into()))?;
            (p, obs)
        }
    };
    let u = info.end().clone();
    let control_nodes = gstar
        .shortest_directed_path(d, |n| n == u, &BTreeSet::new())
        .ok_or_else(|| SystemError::InvalidSystem(format!("no directed path {d} to {u}")))?;
    let control = TracedPath::from_nodes(gstar, control_nodes)?;
    Ok(System { decision: d.into(), utility: u, info_node: x.into(), info, control, obs })
}

/// Minimal-length observation paths for every collider of `p`, each avoiding
/// `avoid` while still being of globally minimal length.
fn obs_paths(g: &IdGraph, p: &TracedPath, d: &str, avoid: &BTreeSet<NodeId>) -> Option<BTreeMap<NodeId, TracedPath>> {
    let mut out = BTreeMap::new();
    for i in p.collider_positions() {
        let c = &p.nodes[i];
        let best = g.shortest_directed_path(c, |n| n == d, &BTreeSet::new())?;
        let path = g.shortest_directed_path(c, |n| n == d, avoid)?;
        if path.len() != best.len() {
            return None;
        }
        out.insert(c.clone(), TracedPath::from_nodes(g, path).ok()?);
    }
    Some(out)
}

/// A tree of systems. System `0` is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemTree {
    pub systems: Vec<System>,
    /// Non-root system to (predecessor system, predecessor path).
    pub pred: BTreeMap<usize, (usize, PathRef)>,
}

impl SystemTree {
    pub const ROOT: usize = 0;

    pub fn root(&self) -> &System {
        &self.systems[Self::ROOT]
    }

    /// Child systems of `k`, in index order.
    pub fn children(&self, k: usize) -> Vec<usize> {
        self.pred.iter().filter(|(_, (p, _))| *p == k).map(|(c, _)| *c).collect()
    }

    /// Systems in preorder from the root.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = vec![];
        let mut stack = vec![Self::ROOT];
        while let Some(k) = stack.pop() {
            out.push(k);
            let mut ch = self.children(k);
            ch.reverse();
            stack.extend(ch);
        }
        out
    }

    /// Strict descendants of system `k`.
    pub fn descendants(&self, k: usize) -> Vec<usize> {
        let mut out = vec![];
        let mut queue = VecDeque::from(self.children(k));
        while let Some(c) = queue.pop_front() {
            out.push(c);
            queue.extend(self.children(c));
        }
        out
    }

    /// Strict ancestors of system `k`, nearest first.
    pub fn ancestors(&self, k: usize) -> Vec<usize> {
        let mut out = vec![];
        let mut cur = k;
        while let Some((p, _)) = self.pred.get(&cur) {
            out.push(*p);
            cur = *p;
            if out.len() > self.systems.len() {
                break;
            }
        }
        out
    }

    /// Every node on any path of any system.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.systems.iter().flat_map(System::nodes).collect()
    }

    /// Union of the within-system links.
    pub fn within_links(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.systems.iter().flat_map(System::within_links).collect()
    }

    /// Checks every system and the predecessor structure.
    pub fn validate(&self, g: &IdGraph) -> Vec<String> {
        let mut v = vec![];
        if self.systems.is_empty() {
            return vec!["tree has no systems".into()];
        }
        for (k, s) in self.systems.iter().enumerate() {
            for e in validate_system(g, s) {
                v.push(format!("system {k}: {e}"));
            }
        }
        if self.pred.contains_key(&Self::ROOT) {
            v.push("root has a predecessor".into());
        }
        for k in 1..self.systems.len() {
            match self.pred.get(&k) {
                None => v.push(format!("system {k} has no predecessor")),
                Some((p, r)) => {
                    if *p >= self.systems.len() {
                        v.push(format!("system {k}: predecessor {p} out of range"));
                        continue;
                    }
                    let s = &self.systems[k];
                    let on_path = self.systems[*p]
                        .path(r)
                        .map(|path| path.edges().contains(&(s.info_node.clone(), s.decision.clone())))
                        .unwrap_or(false);
                    if !on_path {
                        v.push(format!("system {k}: link {} -> {} is not on {r} of system {p}", s.info_node, s.decision));
                    }
                    if self.ancestors(k).len() >= self.systems.len() {
                        v.push(format!("system {k} does not reach the root"));
                    }
                }
            }
        }
        v
    }

    /// Whether every traversed information link has its own child system.
    pub fn is_full(&self, g: &IdGraph) -> bool {
        self.systems.iter().enumerate().all(|(k, s)| {
            s.traversed_infolinks(g).into_iter().all(|(r, a, b)| {
                self.children(k).into_iter().any(|c| {
                    self.pred[&c].1 == r && self.systems[c].info_node == a && self.systems[c].decision == b
                })
            })
        })
    }

    pub fn to_doc(&self) -> TreeDoc {
        TreeDoc {
            root: Self::ROOT,
            systems: self
                .systems
                .iter()
                .map(|s| SystemDoc {
                    decision: s.decision.clone(),
                    utility: s.utility.clone(),
                    info_node: s.info_node.clone(),
                    info_path: s.info.nodes.clone(),
                    control_path: s.control.nodes.clone(),
                    obs_paths: s.obs.iter().map(|(c, p)| (c.clone(), p.nodes.clone())).collect(),
                })
                .collect(),
            pred: self.pred.iter().map(|(k, (p, r))| (k.to_string(), PredDoc { system: *p, path: r.clone() })).collect(),
        }
    }

    pub fn from_doc(g: &IdGraph, doc: &TreeDoc) -> Result<Self, SystemError> {
        if doc.root != Self::ROOT {
            return Err(SystemError::Malformed("root must be system 0".into()));
        }
        let systems = doc
            .systems
            .iter()
            .map(|s| {
                Ok(System {
                    decision: s.decision.clone(),
                    utility: s.utility.clone(),
                    info_node: s.info_node.clone(),
                    info: TracedPath::from_nodes(g, s.info_path.clone())?,
                    control: TracedPath::from_nodes(g, s.control_path.clone())?,
                    obs: s
                        .obs_paths
                        .iter()
                        .map(|(c, p)| Ok((c.clone(), TracedPath::from_nodes(g, p.clone())?)))
                        .collect::<Result<_, SeparationError>>()?,
                })
            })
            .collect::<Result<Vec<_>, SeparationError>>()?;
        let pred = doc
            .pred
            .iter()
            .map(|(k, p)| {
                let k: usize = k.parse().map_err(|_| SystemError::Malformed(format!("bad system index {k}")))?;
                Ok((k, (p.system, p.path.clone())))
            })
            .collect::<Result<_, SystemError>>()?;
        Ok(SystemTree { systems, pred })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("tree serializes")
    }

    pub fn from_json(g: &IdGraph, s: &str) -> Result<Self, SystemError> {
        let doc: TreeDoc = serde_json::from_str(s).map_err(|e| SystemError::Malformed(e.to_string()))?;
        SystemTree::from_doc(g, &doc)
    }
}

/// On-disk tree form with explicit node sequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDoc {
    pub root: usize,
    pub systems: Vec<SystemDoc>,
    pub pred: BTreeMap<String, PredDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDoc {
    pub decision: NodeId,
    pub utility: NodeId,
    pub info_node: NodeId,
    pub info_path: Vec<NodeId>,
    pub control_path: Vec<NodeId>,
    pub obs_paths: BTreeMap<NodeId, Vec<NodeId>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredDoc {
    pub system: usize,
    pub path: PathRef,
}

/// Upper bound on tree size; construction beyond it is refused.
pub const MAX_SYSTEMS: usize = 256;

/// Builds a full tree rooted at the system for `x -> d`.
pub fn build_full_tree(gstar: &IdGraph, x: &str, d: &str) -> Result<SystemTree, SystemError> {
    let mut tree = SystemTree { systems: vec![construct_system(gstar, x, d)?], pred: BTreeMap::new() };
    let mut k = 0;
    while k < tree.systems.len() {
        for (r, a, b) in tree.systems[k].traversed_infolinks(gstar) {
            if tree.systems.len() >= MAX_SYSTEMS {
                return Err(SystemError::InvalidTree(format!("more than {MAX_SYSTEMS} systems")));
            }
            let child = construct_system(gstar, &a, &b)?;
            tree.pred.insert(tree.systems.len(), (k, r));
            tree.systems.push(child);
        }
        k += 1;
    }
    Ok(tree)
}

/// Where a tree node sits, after merging the positions the normal form shares.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    /// The root's info node or decision, kept as itself.
    Root(NodeId),
    /// The utility of a system, shared by its info and control paths.
    Utility(usize),
    /// A node on a path; collider heads of observation paths count as info.
    OnPath(usize, PathRef),
}

/// Position of `node` when it occurs on path `r` of system `k`.
pub fn position(t: &SystemTree, k: usize, r: &PathRef, node: &str) -> Result<Position, SystemError> {
    let mut k = k;
    let mut r = r.clone();
    for _ in 0..=t.systems.len() {
        let s = &t.systems[k];
        if node == s.info_node || node == s.decision {
            match t.pred.get(&k) {
                None => return Ok(Position::Root(node.to_string())),
                Some((p, pr)) => {
                    let on = t.systems[*p].path(pr).is_some_and(|path| path.position(node).is_some());
                    if !on {
                        return Err(SystemError::InvalidTree(format!("{node} of system {k} is not on its predecessor path")));
                    }
                    k = *p;
                    r = pr.clone();
                    continue;
                }
            }
        }
        if node == s.utility {
            return Ok(Position::Utility(k));
        }
        if r == PathRef::Obs(node.to_string()) {
            return Ok(Position::OnPath(k, PathRef::Info));
        }
        return Ok(Position::OnPath(k, r));
    }
    Err(SystemError::InvalidTree("predecessor chain does not reach the root".into()))
}

/// Result of the normal-form test with one witness per failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalFormVerdict {
    pub a_position_uniqueness: bool,
    pub b_no_backdoor: bool,
    pub c_no_redundant_links: bool,
    pub witnesses: Vec<String>,
}

impl NormalFormVerdict {
    pub fn holds(&self) -> bool {
        self.a_position_uniqueness && self.b_no_backdoor && self.c_no_redundant_links
    }
}

/// Tree nodes that are also nodes of the untransformed diagram: everything
/// outside the tree plus the root's info node and decision.
pub fn base_nodes(g: &IdGraph, t: &SystemTree) -> BTreeSet<NodeId> {
    let tree = t.nodes();
    let mut out: BTreeSet<NodeId> = g.nodes().filter(|n| !tree.contains(*n)).cloned().collect();
    out.insert(t.root().info_node.clone());
    out.insert(t.root().decision.clone());
    out
}

/// Tests the three normal-form properties.
///
/// (c) allows, besides within-tree links, every edge into a decision and every
/// edge between two base nodes ([`base_nodes`]).
pub fn normal_form_check(g: &IdGraph, t: &SystemTree) -> NormalFormVerdict {
    let mut w = vec![];
    let mut seen: BTreeMap<NodeId, BTreeSet<Position>> = BTreeMap::new();
    let mut a = true;
    for (k, s) in t.systems.iter().enumerate() {
        for (r, p) in s.paths() {
            for n in &p.nodes {
                match position(t, k, &r, n) {
                    Ok(pos) => {
                        seen.entry(n.clone()).or_default().insert(pos);
                    }
                    Err(e) => {
                        a = false;
                        w.push(format!("(a) {e}"));
                    }
                }
            }
        }
    }
    for (n, ps) in &seen {
        if ps.len() > 1 {
            a = false;
            w.push(format!("(a) {n} occupies {} positions", ps.len()));
        }
    }
    let mut b = true;
    for (k, s) in t.systems.iter().enumerate() {
        if s.info.steps.first() != Some(&Step::Forward) {
            b = false;
            w.push(format!("(b) info path of system {k} leaves {} against an edge", s.info_node));
        }
    }
    let within = t.within_links();
    let base = base_nodes(g, t);
    let mut c = true;
    for (x, y) in g.edges() {
        let ok = within.contains(&(x.clone(), y.clone())) || g.is_decision(&y) || (base.contains(&x) && base.contains(&y));
        if !ok {
            c = false;
            w.push(format!("(c) redundant link {x} -> {y}"));
        }
    }
    NormalFormVerdict { a_position_uniqueness: a, b_no_backdoor: b, c_no_redundant_links: c, witnesses: w }
}

/// Observation nodes of system `k` and of all its descendant systems.
pub fn obs_desc(t: &SystemTree, k: usize) -> BTreeSet<NodeId> {
    std::iter::once(k)
        .chain(t.descendants(k))
        .flat_map(|j| t.systems[j].elements().obs_nodes.into_values())
        .collect()
}

/// `Back^s ⫫ Pa(D^s) \ (V^s ∪ ObsDesc^s) | (Pa(D^s) ∩ V^s) ∪ ObsDesc^s`.
pub fn knowledge_separation_check(g: &IdGraph, t: &SystemTree, k: usize) -> Result<bool, SystemError> {
    let s = &t.systems[k];
    let back = s.elements().back;
    let vs = s.nodes();
    let od = obs_desc(t, k);
    let pa = g.parents(&s.decision);
    let outside: BTreeSet<NodeId> = pa.iter().filter(|n| !vs.contains(*n) && !od.contains(*n)).cloned().collect();
    let mut given: BTreeSet<NodeId> = pa.iter().filter(|n| vs.contains(*n)).cloned().collect();
    given.extend(od);
    Ok(d_separated(g, &back, &outside, &given)?)
}

/// Structural lemmas that hold for trees built on soluble minimal d-reductions.
/// Returns human-readable violations.
pub fn tree_lemma_violations(g: &IdGraph, t: &SystemTree) -> Vec<String> {
    let mut v = vec![];
    for (k, s) in t.systems.iter().enumerate() {
        let el = s.elements();
        for n in &el.back {
            if g.is_decision(n) && !(n == &s.info_node && s.info.steps.first() == Some(&Step::Forward)) {
                v.push(format!("system {k}: decision {n} in back section"));
            }
        }
        for p in s.obs.values() {
            for n in &p.nodes[..p.nodes.len() - 1] {
                if g.is_decision(n) {
                    v.push(format!("system {k}: decision {n} on an observation path"));
                }
            }
        }
        let below = g.descendants(&s.decision);
        for (_, _, b) in s.traversed_infolinks(g) {
            if !below.contains(&b) {
                v.push(format!("system {k}: traversed decision {b} is not below {}", s.decision));
            }
        }
        for j in t.ancestors(k) {
            let dj = &t.systems[j].decision;
            if !below.contains(dj) && !g.descendants(dj).contains(&s.decision) {
                v.push(format!("system {k}: ancestor decision {dj} is not above {}", s.decision));
            }
            for p in g.parents(dj) {
                if !g.family(&s.decision).contains(p) {
                    v.push(format!("system {k}: parent {p} of ancestor decision {dj} is not in Fa({})", s.decision));
                }
            }
            for n in s.nodes() {
                if n == s.info_node || n == s.decision || !g.has_edge(&n, dj) {
                    continue;
                }
                if !el.obs_nodes.values().any(|o| *o == n) {
                    v.push(format!("system {k}: {n} -> {dj} links into an ancestor decision from a non-observation node"));
                }
            }
        }
    }
    v
}

/// Within-tree links between different systems only pass through the shared
/// nodes `X^s`, `D^s`.
pub fn cross_system_link_violations(t: &SystemTree) -> Vec<String> {
    let mut v = vec![];
    let mut owners: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
    for (k, s) in t.systems.iter().enumerate() {
        for n in s.nodes() {
            owners.entry(n).or_default().insert(k);
        }
    }
    for (n, ks) in &owners {
        let sharing: Vec<usize> =
            ks.iter().copied().filter(|k| &t.systems[*k].info_node != n && &t.systems[*k].decision != n).collect();
        if ks.len() > 1 && sharing.len() > 1 {
            v.push(format!("{n} is an interior node of systems {sharing:?}"));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind::*;

    fn f1() -> IdGraph {
        IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("X", "U"), ("D", "U")]).unwrap()
    }

    #[test]
    fn f1_system() {
        let g = f1();
        let s = construct_system(&g, "X", "D").unwrap();
        assert_eq!(s.info.nodes, vec!["X", "U"]);
        assert_eq!(s.control.nodes, vec!["D", "U"]);
        assert!(validate_system(&g, &s).is_empty());
        let el = s.elements();
        assert!(el.question.is_none() && el.back.is_empty());
        let t = build_full_tree(&g, "X", "D").unwrap();
        assert_eq!(t.systems.len(), 1);
        assert!(normal_form_check(&g, &t).holds());
        assert!(knowledge_separation_check(&g, &t, 0).unwrap());
    }

    #[test]
    fn blocked_info_path_is_rejected() {
        let g = f1();
        let mut s = construct_system(&g, "X", "D").unwrap();
        s.info = TracedPath::from_strs(&g, &["X", "D", "U"]).unwrap();
        assert!(validate_system(&g, &s).iter().any(|e| e.contains("not active")));
    }

    #[test]
    fn nonrequisite_link_has_no_system() {
        let g = IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("D", "U")]).unwrap();
        assert_eq!(construct_system(&g, "X", "D").unwrap_err(), SystemError::NotRequisite("X".into(), "D".into()));
    }

    #[test]
    fn backdoor_info_path_elements() {
        // X <- Q -> U with D observing X.
        let g = IdGraph::from_slices(
            &[("Q", Chance), ("X", Chance), ("D", Decision), ("U", Utility)],
            &[("Q", "X"), ("Q", "U"), ("X", "D"), ("D", "U")],
        )
        .unwrap();
        let t = build_full_tree(&g, "X", "D").unwrap();
        let s = t.root();
        assert_eq!(s.info.nodes, vec!["X", "Q", "U"]);
        let el = s.elements();
        assert_eq!(el.question.as_deref(), Some("Q"));
        assert_eq!(el.back, BTreeSet::from(["Q".to_string(), "X".to_string()]));
        let nf = normal_form_check(&g, &t);
        assert!(nf.a_position_uniqueness && !nf.b_no_backdoor);
    }

    #[test]
    fn tree_json_round_trip() {
        let g = f1();
        let t = build_full_tree(&g, "X", "D").unwrap();
        assert_eq!(SystemTree::from_json(&g, &t.to_json()).unwrap(), t);
    }

    #[test]
    fn path_ref_parsing() {
        for r in [PathRef::Info, PathRef::Control, PathRef::Obs("C".into())] {
            assert_eq!(r.to_string().parse::<PathRef>().unwrap(), r);
        }
    }
}
