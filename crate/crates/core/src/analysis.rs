//! Solubility, requisite observations, d-reduction and the graphical criteria
//! for value of information and value of control.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, GraphError};
use crate::graph::{IdGraph, NodeId};
use crate::separation::{d_separated, find_active_path, TracedPath};

/// Outcome of the solubility test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolubilityResult {
    pub soluble: bool,
    /// A witnessing decision ordering, earliest first.
    pub ordering: Option<Vec<NodeId>>,
    /// When insoluble: `(Pi node, decision, active path)` for one violated pair.
    pub failing_pair: Option<(NodeId, NodeId, TracedPath)>,
}

/// `R[(j, i)]`: the mapping node of decision `j` is d-separated from the
/// utility descendants of decision `i` given `Fa(i)`, in the mapping extension.
pub fn separation_relation(g: &IdGraph) -> BTreeMap<(NodeId, NodeId), bool> {
    let (ext, pi) = g.mapping_extension();
    let decisions = g.decisions();
    let mut r = BTreeMap::new();
    for i in &decisions {
        let targets = g.utility_descendants(i);
        let fam = ext.family(i);
        for j in &decisions {
            if i == j {
                continue;
            }
            let sep = d_separated(&ext, &BTreeSet::from([pi[j].clone()]), &targets, &fam).expect("nodes exist");
            r.insert((j.clone(), i.clone()), sep);
        }
    }
    r
}

/// Whether `ordering` (earliest first) satisfies the solubility condition.
pub fn ordering_is_valid(g: &IdGraph, ordering: &[NodeId]) -> bool {
    let ds: BTreeSet<NodeId> = g.decisions().into_iter().collect();
    let given: BTreeSet<&NodeId> = ordering.iter().collect();
    if given.len() != ordering.len() || ordering.len() != ds.len() || ordering.iter().any(|d| !ds.contains(d)) {
        return false;
    }
    let r = separation_relation(g);
    ordering.iter().enumerate().all(|(ii, i)| ordering[..ii].iter().all(|j| r[&(j.clone(), i.clone())]))
}

/// Decides solubility.
///
/// Every pair of decisions placed `j` before `i` needs `R(j, i)`. So whenever
/// `R(j, i)` fails, `i` is forced before `j`, and an ordering exists exactly
/// when these forced precedences are acyclic. The ordering returned is the
/// lexicographically least topological order of the forced precedences.
pub fn is_soluble(g: &IdGraph) -> SolubilityResult {
    let decisions = g.decisions();
    let r = separation_relation(g);
    // before[i] = decisions that must come before i.
    let mut before: BTreeMap<&NodeId, BTreeSet<&NodeId>> = decisions.iter().map(|d| (d, BTreeSet::new())).collect();
    for ((j, i), sep) in &r {
        if !sep {
            before.get_mut(j).unwrap().insert(i);
        }
    }
    let mut placed: Vec<NodeId> = vec![];
    let mut remaining: BTreeSet<&NodeId> = decisions.iter().collect();
    while !remaining.is_empty() {
        let next = remaining.iter().find(|d| before[*d].iter().all(|p| !remaining.contains(p))).copied();
        match next {
            Some(d) => {
                remaining.remove(d);
                placed.push(d.clone());
            }
            None => {
                let failing = failing_pair(g, &r, &remaining);
                return SolubilityResult { soluble: false, ordering: None, failing_pair: failing };
            }
        }
    }
    SolubilityResult { soluble: true, ordering: Some(placed), failing_pair: None }
}

fn failing_pair(
    g: &IdGraph,
    r: &BTreeMap<(NodeId, NodeId), bool>,
    remaining: &BTreeSet<&NodeId>,
) -> Option<(NodeId, NodeId, TracedPath)> {
    let (ext, pi) = g.mapping_extension();
    for ((j, i), sep) in r {
        if *sep || !remaining.contains(j) || !remaining.contains(i) {
            continue;
        }
        let fam = ext.family(i);
        for u in g.utility_descendants(i) {
            if let Ok(Some(p)) = find_active_path(&ext, &pi[j], &u, &fam) {
                return Some((pi[j].clone(), i.clone(), p));
            }
        }
    }
    None
}

/// Whether the observation `x -> d` is requisite:
/// `x` is d-connected to `U(d)` given `Fa(d) \ {x}`.
pub fn requisite(g: &IdGraph, x: &str, d: &str) -> Result<bool, AnalysisError> {
    g.require(x)?;
    g.require_decision(d)?;
    if !g.has_edge(x, d) {
        return Err(AnalysisError::NoSuchInfolink(x.into(), d.into()));
    }
    Ok(!nonrequisite_unchecked(g, x, d))
}

fn nonrequisite_unchecked(g: &IdGraph, x: &str, d: &str) -> bool {
    let mut z = g.family(d);
    z.remove(x);
    d_separated(g, &BTreeSet::from([x.to_string()]), &g.utility_descendants(d), &z).expect("nodes exist")
}

/// One removal step of a d-reduction, with its separation certificate
/// `{x} ⫫ targets | given`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub link: (NodeId, NodeId),
    pub targets: BTreeSet<NodeId>,
    pub given: BTreeSet<NodeId>,
}

/// The removals performed by a d-reduction, in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub removed: Vec<Removal>,
}

impl ReductionTrace {
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        self.removed.iter().map(|r| r.link.clone()).collect()
    }
}

/// Nonrequisite information links of `g`, sorted.
pub fn nonrequisite_links(g: &IdGraph) -> Vec<(NodeId, NodeId)> {
    g.infolinks().into_iter().filter(|(x, d)| nonrequisite_unchecked(g, x, d)).collect()
}

/// Repeatedly removes the nonrequisite link chosen by `pick` (an index into
/// the sorted list of currently nonrequisite links) until none remain.
pub fn reduce_with<F: FnMut(&[(NodeId, NodeId)]) -> usize>(g: &IdGraph, mut pick: F) -> (IdGraph, ReductionTrace) {
    let mut cur = g.clone();
    let mut trace = ReductionTrace::default();
    loop {
        let cands = nonrequisite_links(&cur);
        if cands.is_empty() {
            return (cur, trace);
        }
        let (x, d) = cands[pick(&cands) % cands.len()].clone();
        let mut given = cur.family(&d);
        given.remove(&x);
        trace.removed.push(Removal { link: (x.clone(), d.clone()), targets: cur.utility_descendants(&d), given });
        cur.remove_edge(&x, &d);
    }
}

/// The minimal d-reduction `G*`, removing the lexicographically first
/// nonrequisite link at each step.
pub fn minimal_d_reduction(g: &IdGraph) -> (IdGraph, ReductionTrace) {
    reduce_with(g, |_| 0)
}

/// Three-valued verdict of a graphical criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Zero,
    NotApplicable(String),
}

impl Verdict {
    pub fn label(&self) -> String {
        match self {
            Verdict::Positive => "positive".into(),
            Verdict::Zero => "zero".into(),
            Verdict::NotApplicable(r) => format!("not_applicable: {r}"),
        }
    }
}

/// Whether some model on `g` gives `x` positive value of information for `d`.
pub fn voi_criterion(g: &IdGraph, x: &str, d: &str) -> Result<Verdict, AnalysisError> {
    g.require(x)?;
    g.require_decision(d)?;
    if g.is_decision(x) {
        return Ok(Verdict::NotApplicable("decision parent".into()));
    }
    if !g.is_chance(x) {
        return Ok(Verdict::NotApplicable(format!("{x} is not a chance node")));
    }
    let aug = if g.has_edge(x, d) {
        g.clone()
    } else {
        match g.with_edge(x, d) {
            Ok(a) => a,
            Err(GraphError::CycleDetected(_)) => return Ok(Verdict::NotApplicable(format!("{x} is a descendant of {d}"))),
            Err(e) => return Err(e.into()),
        }
    };
    if !is_soluble(&aug).soluble {
        return Ok(Verdict::NotApplicable("insoluble".into()));
    }
    let (star, _) = minimal_d_reduction(&aug);
    Ok(if star.has_edge(x, d) { Verdict::Positive } else { Verdict::Zero })
}

/// Whether some model on `g` gives the chance node `x` positive value of control.
pub fn voc_criterion(g: &IdGraph, x: &str) -> Result<Verdict, AnalysisError> {
    g.require(x)?;
    if !g.is_chance(x) {
        return Err(AnalysisError::NotAChanceNode(x.into()));
    }
    if !is_soluble(g).soluble {
        return Ok(Verdict::NotApplicable("insoluble".into()));
    }
    let (star, _) = minimal_d_reduction(g);
    let reaches = star.descendants(x).iter().any(|n| star.is_utility(n));
    Ok(if reaches { Verdict::Positive } else { Verdict::Zero })
}

/// Summary of all criteria on a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub soluble: bool,
    pub ordering: Option<Vec<NodeId>>,
    pub removed_links: Vec<(NodeId, NodeId)>,
    /// Keyed `"X→D"` for every existing information link from a chance node.
    pub voi: BTreeMap<String, String>,
    /// Keyed by chance node.
    pub voc: BTreeMap<String, String>,
}

pub fn analyze(g: &IdGraph) -> AnalysisReport {
    let sol = is_soluble(g);
    let (_, trace) = minimal_d_reduction(g);
    let mut voi = BTreeMap::new();
    for (x, d) in g.infolinks() {
        let v = voi_criterion(g, &x, &d).expect("infolink endpoints exist");
        voi.insert(format!("{x}→{d}"), v.label());
    }
    let mut voc = BTreeMap::new();
    for x in g.nodes().filter(|n| g.is_chance(n)) {
        voc.insert(x.clone(), voc_criterion(g, x).expect("chance node").label());
    }
    AnalysisReport { soluble: sol.soluble, ordering: sol.ordering, removed_links: trace.links(), voi, voc }
}
