//! Witness models for positive value of information and value of control.
//!
//! [`parameterize_tree`] turns a normal-form tree into a model in which every
//! system's utility pays [`Parameterized::umax`] exactly when its decision
//! performs a task on its info node. When the info path is not directed the
//! decision must also report one bit of a random question string that it can
//! recover only by combining its observations.
//!
//! [`voi_witness`] and [`voc_witness`] build such models for a graph and
//! certify the claimed value with the exact solver at three levels: the
//! transformed graph, the minimal d-reduction and the input graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::analysis::{is_soluble, minimal_d_reduction, voc_criterion, voi_criterion, Verdict};
use crate::error::{ModelError, NormalizeError, WitnessError};
use crate::graph::{IdGraph, NodeId};
use crate::hom::IdHom;
use crate::model::{all_deterministic, point, transport_model, uniform, CompiledModel, Dist, Domain, IdModel, Policy, Value};
use crate::normalize::{normal_form_stages, transform4_split_root};
use crate::rational::Rational;
use crate::separation::{Role, Step};
use crate::solver::{optimal_policies, voc_certificate, voi_certificate, InterventionMode, SolverConfig};
use crate::systems::{base_nodes, normal_form_check, position, PathRef, Position, SystemTree};

/// Default longest bitstring domain.
pub const DEFAULT_BIT_CAP: usize = 8;

/// How the tree utilities' payoff `umax` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UmaxRule {
    /// `1 + R`, where `R` sums the ranges of the base model's utilities.
    #[default]
    RangeSum,
    /// `1 + 2R` when some info path is not directed, else `1 + R`.
    ///
    /// A non-directed decision that names a wrong index still matches the
    /// question bit with probability 1/2, so deviating costs only `umax / 2`
    /// in expectation; under `RangeSum` such a deviation can tie with
    /// performing the task.
    DoubledForGuesses,
}

/// Limits and constants of witness construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessConfig {
    /// Longest bitstring domain allowed on info and observation paths.
    pub bit_cap: usize,
    pub solver: SolverConfig,
    /// `P(x = 1)` in value-of-control witnesses.
    pub epsilon: Rational,
    pub intervention: InterventionMode,
    pub umax: UmaxRule,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            bit_cap: DEFAULT_BIT_CAP,
            solver: SolverConfig::default(),
            epsilon: Rational::new(1, 4),
            intervention: InterventionMode::default(),
            umax: UmaxRule::default(),
        }
    }
}

/// A deterministic rule for `decision` that reads only `parent`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Task {
    pub decision: NodeId,
    pub parent: NodeId,
    /// Value index of `parent` to value index of the base domain of `decision`.
    pub map: Vec<usize>,
}

impl Task {
    pub fn new(parent: &str, decision: &str, map: Vec<usize>) -> Self {
        Task { decision: decision.into(), parent: parent.into(), map }
    }

    /// Copies values from `from` into the equal-valued domain `to`.
    pub fn identity(parent: &str, decision: &str, from: &Domain, to: &Domain) -> Result<Task, WitnessError> {
        let map = from
            .values()
            .iter()
            .map(|v| to.index_of(v).ok_or_else(|| WitnessError::InvalidTask(format!("value {v} of {parent} is not a value of {decision}"))))
            .collect::<Result<_, _>>()?;
        Ok(Task::new(parent, decision, map))
    }

    fn check(&self, from: &Domain, to: &Domain) -> Result<(), WitnessError> {
        if self.map.len() != from.len() {
            return Err(WitnessError::InvalidTask(format!(
                "task for {} has {} entries but {} has {} values",
                self.decision,
                self.map.len(),
                self.parent,
                from.len()
            )));
        }
        if let Some(v) = self.map.iter().find(|v| **v >= to.len()) {
            return Err(WitnessError::InvalidTask(format!("task for {} maps to index {v} outside its domain", self.decision)));
        }
        Ok(())
    }
}

/// Per-system data fixed by the parameterization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemPlan {
    pub directed: bool,
    /// Domain of the value `X^s` carries into the system.
    pub info_domain: Domain,
    /// Task part of the domain of `D^s`.
    pub base_domain: Domain,
    /// The task of `D^s`, from `info_domain` to `base_domain` indices.
    pub task: Vec<usize>,
    /// Penultimate nodes of the observation paths, colliders in info-path order.
    pub obs_nodes: Vec<NodeId>,
    pub question: Option<NodeId>,
}

/// A parameterized normal-form tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameterized {
    pub model: IdModel,
    pub tree: SystemTree,
    /// Nodes shared with the untransformed diagram.
    pub base: BTreeSet<NodeId>,
    pub plans: Vec<SystemPlan>,
    /// Decisions of non-directed systems; their domain is `base x {0,1}`.
    pub extra_bit: BTreeSet<NodeId>,
    /// Domain without the extra bit, for every non-utility node.
    pub base_domains: BTreeMap<NodeId, Domain>,
    pub umax: Rational,
}

fn bit(b: bool) -> Value {
    Value::Atom(if b { "1" } else { "0" }.into())
}

fn base_part(v: &Value) -> Value {
    match v {
        Value::Tuple(xs) if xs.len() == 2 => xs[0].clone(),
        other => other.clone(),
    }
}

fn bits_of(v: &Value) -> Result<&[bool], WitnessError> {
    match v {
        Value::Bits(b) => Ok(b),
        other => Err(WitnessError::Inconsistent(format!("expected a bitstring, found {other}"))),
    }
}

fn xor(a: &Value, b: &Value) -> Result<Value, WitnessError> {
    let (a, b) = (bits_of(a)?, bits_of(b)?);
    if a.len() != b.len() {
        return Err(WitnessError::Inconsistent("bitstrings of different lengths".into()));
    }
    Ok(Value::Bits(a.iter().zip(b).map(|(x, y)| x ^ y).collect()))
}

fn index(d: &Domain, v: &Value, what: &str) -> Result<usize, WitnessError> {
    d.index_of(v).ok_or_else(|| WitnessError::Inconsistent(format!("value {v} of {what} is outside its domain")))
}

/// Evaluates `f` on every parent context of `n`, first parent most significant.
fn rows<T>(
    g: &IdGraph,
    dom: &BTreeMap<NodeId, Domain>,
    n: &str,
    cap: u64,
    mut f: impl FnMut(&BTreeMap<&str, &Value>) -> Result<T, WitnessError>,
) -> Result<Vec<T>, WitnessError> {
    let ps: Vec<&NodeId> = g.parents(n).iter().collect();
    let sizes: Vec<usize> = ps.iter().map(|p| dom[*p].len()).collect();
    let total = sizes.iter().try_fold(1u64, |acc, s| acc.checked_mul(*s as u64));
    let total = match total {
        Some(t) if t <= cap => t as usize,
        t => {
            return Err(ModelError::TooLarge {
                what: format!("contexts of {n}"),
                size: t.map(|t| t.to_string()).unwrap_or_else(|| "> 2^64".into()),
                cap,
            }
            .into())
        }
    };
    let mut digits = vec![0usize; ps.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let vals = ps.iter().zip(&digits).map(|(p, i)| (p.as_str(), dom[*p].value(*i))).collect();
        out.push(f(&vals)?);
        for j in (0..digits.len()).rev() {
            digits[j] += 1;
            if digits[j] < sizes[j] {
                break;
            }
            digits[j] = 0;
        }
    }
    Ok(out)
}

/// Parameterizes the normal-form tree `t3` on `g3`.
///
/// `m0` is a model on the subgraph induced by the base nodes; it supplies the
/// tables of every node outside the tree. `task` is the root decision's task.
pub fn parameterize_tree(g3: &IdGraph, t3: &SystemTree, m0: &IdModel, task: &Task, cfg: &WitnessConfig) -> Result<Parameterized, WitnessError> {
    let nf = normal_form_check(g3, t3);
    if !nf.holds() {
        return Err(NormalizeError::NotNormalForm(nf.witnesses.join("; ")).into());
    }
    let invalid = t3.validate(g3);
    if !invalid.is_empty() {
        return Err(NormalizeError::NotNormalForm(invalid.join("; ")).into());
    }
    let base = base_nodes(g3, t3);
    if m0.graph != g3.induced(&base) {
        return Err(ModelError::Invalid("base model must live on the subgraph induced by the base nodes".into()).into());
    }
    let root = root_index(t3);
    let (rx, rd) = (&t3.systems[root].info_node, &t3.systems[root].decision);
    if task.parent != *rx || task.decision != *rd {
        return Err(WitnessError::InvalidTask(format!("root task must be {rx} -> {rd}, got {} -> {}", task.parent, task.decision)));
    }
    let extra_bit: BTreeSet<NodeId> = t3.systems.iter().filter(|s| !s.is_directed_info()).map(|s| s.decision.clone()).collect();
    let mut p = Parameterized {
        model: IdModel { graph: g3.clone(), domains: BTreeMap::new(), cpds: BTreeMap::new(), utilities: BTreeMap::new() },
        tree: t3.clone(),
        base: base.clone(),
        plans: vec![],
        extra_bit,
        base_domains: BTreeMap::new(),
        umax: Rational::one(),
    };
    for n in &base {
        if let Some(d) = m0.domains.get(n) {
            p.set_domain(n, d.clone());
        }
    }
    let mut occurrence: BTreeMap<NodeId, (usize, PathRef, usize)> = BTreeMap::new();
    let mut plans: BTreeMap<usize, SystemPlan> = BTreeMap::new();
    for k in t3.preorder() {
        let s = &t3.systems[k];
        let directed = s.is_directed_info();
        let bx = p.carried_domain(k, &PathRef::Info, &s.info_node)?;
        let bd = p.base_domains.get(&s.decision).cloned().ok_or_else(|| WitnessError::Inconsistent(format!("{} has no domain", s.decision)))?;
        let dd = p.model.domains[&s.decision].clone();
        let task_map = if k == root {
            task.check(&bx, &bd)?;
            task.map.clone()
        } else {
            Task::identity(&s.info_node, &s.decision, &bx, &bd)?.map
        };
        let colliders = s.info.collider_positions();
        let first = colliders.first().copied();
        let bits = || {
            if bd.len() > cfg.bit_cap {
                Err(WitnessError::DomainBlowup { len: bd.len(), cap: cfg.bit_cap })
            } else {
                Ok(Domain::bits(bd.len()))
            }
        };
        for (r, path) in s.paths() {
            for i in 1..path.nodes.len().saturating_sub(1) {
                let n = &path.nodes[i];
                if position(t3, k, &r, n).map_err(NormalizeError::from)? != Position::OnPath(k, r.clone()) {
                    continue;
                }
                let d = match &r {
                    PathRef::Control => dd.clone(),
                    PathRef::Info if directed || first.is_some_and(|c| i < c) => bx.clone(),
                    PathRef::Info if Some(i) == first => Domain::boolean(),
                    PathRef::Info => bits()?,
                    PathRef::Obs(c) if first.is_some_and(|f| s.info.nodes[f] == *c) => Domain::boolean(),
                    PathRef::Obs(_) => bits()?,
                };
                p.set_domain(n, d);
                occurrence.insert(n.clone(), (k, r.clone(), i));
            }
        }
        let el = s.elements();
        plans.insert(
            k,
            SystemPlan {
                directed,
                info_domain: bx,
                base_domain: bd,
                task: task_map,
                obs_nodes: colliders.iter().map(|c| el.obs_nodes[&s.info.nodes[*c]].clone()).collect(),
                question: el.question,
            },
        );
    }
    p.plans = plans.into_values().collect();
    if let Some(n) = g3.nodes().find(|n| !g3.is_utility(n) && !p.model.domains.contains_key(*n)) {
        return Err(WitnessError::Inconsistent(format!("{n} received no domain")));
    }
    let range: Rational = m0
        .utilities
        .values()
        .map(|t| {
            let hi = t.iter().max().cloned().unwrap_or_default();
            let lo = t.iter().min().cloned().unwrap_or_default();
            &hi - &lo
        })
        .sum();
    let factor = match cfg.umax {
        UmaxRule::DoubledForGuesses if !p.extra_bit.is_empty() => Rational::from_int(2),
        _ => Rational::one(),
    };
    p.umax = Rational::one() + &factor * &range;

    let cap = cfg.solver.policy_cap;
    let mut cpds: BTreeMap<NodeId, Vec<Dist>> = BTreeMap::new();
    let mut utilities: BTreeMap<NodeId, Vec<Rational>> = BTreeMap::new();
    for n in g3.nodes() {
        if g3.is_decision(n) {
            continue;
        }
        if base.contains(n) {
            if g3.is_utility(n) {
                let t = rows(g3, &p.model.domains, n, cap, |vals| Ok(m0.utilities[n][p.base_context(m0, n, vals)?].clone()))?;
                utilities.insert(n.clone(), t);
            } else {
                let t = rows(g3, &p.model.domains, n, cap, |vals| Ok(m0.cpds[n][p.base_context(m0, n, vals)?].clone()))?;
                cpds.insert(n.clone(), t);
            }
        } else if g3.is_utility(n) {
            let k = t3
                .systems
                .iter()
                .position(|s| s.utility == *n)
                .ok_or_else(|| WitnessError::Inconsistent(format!("utility {n} belongs to no system")))?;
            let t = rows(g3, &p.model.domains, n, cap, |vals| p.utility_value(k, vals))?;
            utilities.insert(n.clone(), t);
        } else {
            let (k, r, i) = occurrence.get(n).cloned().ok_or_else(|| WitnessError::Inconsistent(format!("{n} has no base occurrence")))?;
            let t = rows(g3, &p.model.domains, n, cap, |vals| p.mechanism(n, k, &r, i, vals))?;
            cpds.insert(n.clone(), t);
        }
    }
    p.model = IdModel::new(g3.clone(), p.model.domains.clone(), cpds, utilities)?;
    Ok(p)
}

fn root_index(t: &SystemTree) -> usize {
    (0..t.systems.len()).find(|k| !t.pred.contains_key(k)).expect("a tree has a root")
}

impl Parameterized {
    fn set_domain(&mut self, n: &str, base: Domain) {
        let full = if self.extra_bit.contains(n) { Domain::product(&[&base, &Domain::boolean()]) } else { base.clone() };
        self.base_domains.insert(n.to_string(), base);
        self.model.domains.insert(n.to_string(), full);
    }

    pub fn root(&self) -> usize {
        root_index(&self.tree)
    }

    /// Whether `n` passes its whole value, extra bit included, along path `r`
    /// of system `k`: only a system's own decision on its control path, and
    /// info nodes inheriting that status from their predecessor path.
    fn carries_full(&self, k: usize, r: &PathRef, n: &str) -> bool {
        let (mut k, mut r) = (k, r.clone());
        loop {
            let s = &self.tree.systems[k];
            if n == s.decision && r == PathRef::Control {
                return true;
            }
            if n == s.info_node && r == PathRef::Info {
                match self.tree.pred.get(&k) {
                    None => return true,
                    Some((pk, pr)) => {
                        k = *pk;
                        r = pr.clone();
                        continue;
                    }
                }
            }
            return false;
        }
    }

    /// The value `n` passes on along path `r` of system `k` when it holds `v`.
    pub fn carried(&self, k: usize, r: &PathRef, n: &str, v: &Value) -> Value {
        if self.extra_bit.contains(n) && !self.carries_full(k, r, n) {
            base_part(v)
        } else {
            v.clone()
        }
    }

    fn carried_domain(&self, k: usize, r: &PathRef, n: &str) -> Result<Domain, WitnessError> {
        let table = if self.extra_bit.contains(n) && !self.carries_full(k, r, n) { &self.base_domains } else { &self.model.domains };
        table.get(n).cloned().ok_or_else(|| WitnessError::Inconsistent(format!("{n} is used before it has a domain")))
    }

    /// Context of base node `n` in `m0`.
    fn base_context(&self, m0: &IdModel, n: &str, vals: &BTreeMap<&str, &Value>) -> Result<usize, WitnessError> {
        m0.graph.parents(n).iter().try_fold(0, |acc, q| {
            let v = if self.extra_bit.contains(q) { base_part(vals[q.as_str()]) } else { vals[q.as_str()].clone() };
            Ok(acc * m0.domains[q].len() + index(&m0.domains[q], &v, q)?)
        })
    }

    fn mechanism(&self, n: &str, k: usize, r: &PathRef, i: usize, vals: &BTreeMap<&str, &Value>) -> Result<Dist, WitnessError> {
        let s = &self.tree.systems[k];
        let plan = &self.plans[k];
        let path = s.path(r).expect("occurrence on an existing path");
        let c = |m: &NodeId| self.carried(k, r, m, vals[m.as_str()]);
        let out = match r {
            PathRef::Info => match path.role(i) {
                Role::Chain => c(if path.steps[i - 1] == Step::Forward { &path.nodes[i - 1] } else { &path.nodes[i + 1] }),
                Role::Fork => return Ok(uniform(self.model.domains[n].len())),
                Role::Collider if path.collider_positions().first() == Some(&i) => {
                    let x = c(&path.nodes[i - 1]);
                    let y = plan.task[index(&plan.info_domain, &x, &path.nodes[i - 1])?];
                    bit(bits_of(&c(&path.nodes[i + 1]))?[y])
                }
                Role::Collider => xor(&c(&path.nodes[i - 1]), &c(&path.nodes[i + 1]))?,
            },
            _ => c(&path.nodes[i - 1]),
        };
        Ok(point(index(&self.model.domains[n], &out, n)?))
    }

    fn utility_value(&self, k: usize, vals: &BTreeMap<&str, &Value>) -> Result<Rational, WitnessError> {
        let s = &self.tree.systems[k];
        let plan = &self.plans[k];
        let ip = &s.info.nodes[s.info.nodes.len() - 2];
        let cp = &s.control.nodes[s.control.nodes.len() - 2];
        let i = self.carried(k, &PathRef::Info, ip, vals[ip.as_str()]);
        let c = self.carried(k, &PathRef::Control, cp, vals[cp.as_str()]);
        let pays = if plan.directed {
            let y = plan.task[index(&plan.info_domain, &i, ip)?];
            plan.base_domain.index_of(&c) == Some(y)
        } else {
            match &c {
                Value::Tuple(tr) if tr.len() == 2 => {
                    let y = index(&plan.base_domain, &tr[0], cp)?;
                    tr[1].as_bit() == Some(bits_of(&i)?[y])
                }
                other => return Err(WitnessError::Inconsistent(format!("{cp} carries {other}, not a pair"))),
            }
        };
        Ok(if pays { self.umax.clone() } else { Rational::zero() })
    }

    /// The action index of `D^k` that performs its task, as a table indexed by
    /// the value of `X^k` and, for non-directed systems, the question node.
    fn expectation(&self, k: usize) -> Result<Vec<Vec<usize>>, WitnessError> {
        let s = &self.tree.systems[k];
        let plan = &self.plans[k];
        let dx = &self.model.domains[&s.info_node];
        let dd = &self.model.domains[&s.decision];
        let qd = plan.question.as_ref().map(|q| &self.model.domains[q]);
        dx.values()
            .iter()
            .map(|xv| {
                let x = self.carried(k, &PathRef::Info, &s.info_node, xv);
                let y = plan.task[index(&plan.info_domain, &x, &s.info_node)?];
                let target = plan.base_domain.value(y);
                match (plan.directed, qd) {
                    (true, _) => Ok(vec![index(dd, target, &s.decision)?]),
                    (false, Some(qd)) => qd
                        .values()
                        .iter()
                        .map(|qv| index(dd, &Value::Tuple(vec![target.clone(), bit(bits_of(qv)?[y])]), &s.decision))
                        .collect(),
                    (false, None) => Err(WitnessError::Inconsistent(format!("system {k} has no question node"))),
                }
            })
            .collect()
    }

    /// The task rule of `D^k` over its parent contexts. Non-directed systems
    /// recover the question bit as `O^1 xor O^2[y] xor ... xor O^m[y]`.
    pub fn task_rule(&self, k: usize) -> Result<Vec<usize>, WitnessError> {
        let s = &self.tree.systems[k];
        let plan = &self.plans[k];
        let dd = &self.model.domains[&s.decision];
        rows(&self.model.graph, &self.model.domains, &s.decision, u64::MAX, |vals| {
            let x = self.carried(k, &PathRef::Info, &s.info_node, vals[s.info_node.as_str()]);
            let y = plan.task[index(&plan.info_domain, &x, &s.info_node)?];
            let target = plan.base_domain.value(y).clone();
            if plan.directed {
                return index(dd, &target, &s.decision);
            }
            let mut r = false;
            for (j, (o, c)) in plan.obs_nodes.iter().zip(s.info.collider_positions()).enumerate() {
                let head = PathRef::Obs(s.info.nodes[c].clone());
                let v = self.carried(k, &head, o, vals[o.as_str()]);
                r ^= if j == 0 {
                    v.as_bit().ok_or_else(|| WitnessError::Inconsistent(format!("{o} does not carry a bit")))?
                } else {
                    bits_of(&v)?[y]
                };
            }
            index(dd, &Value::Tuple(vec![target, bit(r)]), &s.decision)
        })
    }

    /// Every tree decision follows its task rule; other decisions take their
    /// first action.
    pub fn task_policy(&self) -> Result<Policy, WitnessError> {
        let mut rules: BTreeMap<NodeId, Vec<usize>> =
            self.model.graph.decisions().into_iter().map(|d| (d.clone(), vec![0; self.model.context_count(&d)])).collect();
        for k in 0..self.tree.systems.len() {
            rules.insert(self.tree.systems[k].decision.clone(), self.task_rule(k)?);
        }
        Ok(Policy::deterministic(rules))
    }

    /// Whether `D^k` performs its task in every positive-probability outcome
    /// under `pi`.
    pub fn performs_task(&self, pi: &Policy, k: usize) -> Result<bool, WitnessError> {
        self.model.check_policy(pi)?;
        let c = CompiledModel::new(&self.model);
        let probe = self.probe(&c, k)?;
        let mut ok = true;
        c.for_each_outcome(&c.rules_of(pi), |a, _| ok &= probe.holds(a));
        Ok(ok)
    }

    /// Whether every tree decision performs its task under `pi`.
    pub fn performs_all_tasks(&self, pi: &Policy) -> Result<bool, WitnessError> {
        (0..self.tree.systems.len()).try_fold(true, |acc, k| Ok(acc && self.performs_task(pi, k)?))
    }

    fn probe(&self, c: &CompiledModel, k: usize) -> Result<Probe, WitnessError> {
        let s = &self.tree.systems[k];
        Ok(Probe {
            x: c.pos[&s.info_node],
            q: self.plans[k].question.as_ref().map(|q| c.pos[q]),
            d: c.pos[&s.decision],
            table: self.expectation(k)?,
        })
    }

    /// Enumerates every deterministic policy and compares the optimal ones with
    /// those under which all tree decisions perform their tasks.
    pub fn task_optimality(&self, cap: u64) -> Result<TaskOptimality, WitnessError> {
        let count = self.model.deterministic_policy_count();
        if count.map_or(true, |n| n > cap as u128) {
            return Err(ModelError::TooLarge {
                what: "deterministic policies".into(),
                size: count.map(|n| n.to_string()).unwrap_or_else(|| "> 2^128".into()),
                cap,
            }
            .into());
        }
        let c = CompiledModel::new(&self.model);
        let probes = (0..self.tree.systems.len()).map(|k| self.probe(&c, k)).collect::<Result<Vec<_>, _>>()?;
        let tree_utils: Vec<usize> =
            self.tree.systems.iter().map(|s| c.util_names.iter().position(|u| *u == s.utility).expect("tree utility in model")).collect();
        let mut seen: Vec<(Rational, bool, bool)> = vec![];
        for pi in all_deterministic(&self.model) {
            let mut eu = Rational::zero();
            let mut each = vec![Rational::zero(); tree_utils.len()];
            let mut performs = true;
            c.for_each_outcome(&c.rules_of(&pi), |a, w| {
                eu += &(w * &c.utility_sum(a));
                for (e, j) in each.iter_mut().zip(&tree_utils) {
                    let u = &c.utils[*j];
                    *e += &(w * &u.table[c.ctx(&u.parents, &u.strides, a)]);
                }
                performs &= probes.iter().all(|p| p.holds(a));
            });
            seen.push((eu, performs, each.iter().all(|e| *e == self.umax)));
        }
        let optimum = seen.iter().map(|s| s.0.clone()).max().expect("at least one policy");
        let optimal = seen.iter().filter(|s| s.0 == optimum).count() as u128;
        let performing = seen.iter().filter(|s| s.1).count() as u128;
        Ok(TaskOptimality {
            policies: seen.len() as u128,
            optimal,
            performing,
            sets_equal: seen.iter().all(|s| (s.0 == optimum) == s.1),
            umax_attained: seen.iter().filter(|s| s.0 == optimum).all(|s| s.2),
            optimum,
        })
    }

    /// Checks, under the task policy, that `D^k`'s parents determine the right
    /// question bit and leave every other bit uniform. `None` for directed
    /// systems, which have no question.
    pub fn knowledge_check(&self, k: usize) -> Result<Option<KnowledgeReport>, WitnessError> {
        let s = &self.tree.systems[k];
        let plan = &self.plans[k];
        let Some(q) = &plan.question else { return Ok(None) };
        let c = CompiledModel::new(&self.model);
        let (xi, qi, di) = (c.pos[&s.info_node], c.pos[q], c.pos[&s.decision]);
        let dx = &self.model.domains[&s.info_node];
        let ys: Vec<usize> = dx
            .values()
            .iter()
            .map(|v| {
                let x = self.carried(k, &PathRef::Info, &s.info_node, v);
                Ok(plan.task[index(&plan.info_domain, &x, &s.info_node)?])
            })
            .collect::<Result<_, WitnessError>>()?;
        let qd = &self.model.domains[q];
        let width = plan.base_domain.len();
        // context -> (mass, mass with each bit set, the question's index, values of the right bit)
        let mut acc: BTreeMap<usize, (Rational, Vec<Rational>, usize, BTreeSet<bool>)> = BTreeMap::new();
        let mut failure = None;
        c.for_each_outcome(&c.rules_of(&self.task_policy()?), |a, w| {
            let y = ys[a[xi]];
            let bits = match bits_of(qd.value(a[qi])) {
                Ok(b) => b,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let e = acc.entry(c.context(di, a)).or_insert_with(|| (Rational::zero(), vec![Rational::zero(); width], y, BTreeSet::new()));
            e.0 += w;
            for (j, b) in bits.iter().enumerate() {
                if *b {
                    e.1[j] += w;
                }
            }
            if e.2 != y {
                e.2 = usize::MAX;
            }
            e.3.insert(bits[y]);
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let half = Rational::new(1, 2);
        let wrong_bits_uniform = acc.values().all(|(p, set, y, _)| set.iter().enumerate().all(|(j, m)| j == *y || *m == &half * p));
        let right_bit_determined = acc.values().all(|(_, _, y, vals)| *y != usize::MAX && vals.len() == 1);
        Ok(Some(KnowledgeReport { system: k, contexts: acc.len(), wrong_bits_uniform, right_bit_determined }))
    }
}

struct Probe {
    x: usize,
    q: Option<usize>,
    d: usize,
    table: Vec<Vec<usize>>,
}

impl Probe {
    fn holds(&self, a: &[usize]) -> bool {
        a[self.d] == self.table[a[self.x]][self.q.map_or(0, |q| a[q])]
    }
}

/// Optimal policies versus task-performing policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskOptimality {
    pub policies: u128,
    pub optimal: u128,
    pub performing: u128,
    /// A policy is optimal iff all tree decisions perform their tasks.
    pub sets_equal: bool,
    /// Every optimal policy earns `umax` in expectation on each tree utility.
    pub umax_attained: bool,
    pub optimum: Rational,
}

impl TaskOptimality {
    pub fn holds(&self) -> bool {
        self.sets_equal && self.umax_attained && self.optimal > 0
    }
}

/// What a non-directed decision knows about its question under the task policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnowledgeReport {
    pub system: usize,
    /// Positive-probability parent contexts examined.
    pub contexts: usize,
    pub wrong_bits_uniform: bool,
    pub right_bit_determined: bool,
}

impl KnowledgeReport {
    pub fn holds(&self) -> bool {
        self.wrong_bits_uniform && self.right_bit_determined
    }
}

/// Whether, without the link `x -> d` and under uniform play, `x` is
/// independent of the remaining parents of `d`.
pub fn materiality_identity(m: &IdModel, x: &str, d: &str) -> Result<bool, WitnessError> {
    let no = m.remove_infolink(x, d)?;
    let joint = no.joint(&no.uniform_policy())?;
    let rest: Vec<NodeId> = no.parents(d);
    let mut with = rest.clone();
    with.push(x.to_string());
    let prior = joint.marginal(&[x.to_string()]);
    let ctx = joint.marginal(&rest);
    let both = joint.marginal(&with);
    Ok(both.iter().all(|(key, p)| {
        let (c, xv) = key.split_at(rest.len());
        *p == &ctx[c] * &prior[xv]
    }))
}

/// The VoI base model: `x` uniform over `{0,1}`, `d` boolean, every other
/// node on the unit domain, every utility zero.
pub fn trivial_base_model(g: &IdGraph, x: &str, d: &str) -> Result<IdModel, WitnessError> {
    let mut domains = BTreeMap::new();
    let mut cpds = BTreeMap::new();
    let mut utilities = BTreeMap::new();
    for n in g.nodes() {
        let ctxs = || g.parents(n).iter().map(|p| if p == x || p == d { 2 } else { 1 }).product::<usize>();
        if g.is_utility(n) {
            utilities.insert(n.clone(), vec![Rational::zero(); ctxs()]);
            continue;
        }
        let boolean = n == x || n == d;
        domains.insert(n.clone(), if boolean { Domain::boolean() } else { Domain::unit() });
        if g.is_chance(n) {
            cpds.insert(n.clone(), vec![if boolean { uniform(2) } else { point(0) }; ctxs()]);
        }
    }
    Ok(IdModel::new(g.clone(), domains, cpds, utilities)?)
}

/// `m` restricted to the nodes of `sub`, which must keep the parents of every
/// chance and utility node.
fn restrict(m: &IdModel, sub: &IdGraph) -> Result<IdModel, WitnessError> {
    let keep = |n: &NodeId| sub.contains(n);
    let model = IdModel::new(
        sub.clone(),
        m.domains.iter().filter(|(n, _)| keep(n)).map(|(n, d)| (n.clone(), d.clone())).collect(),
        m.cpds.iter().filter(|(n, _)| keep(n)).map(|(n, r)| (n.clone(), r.clone())).collect(),
        m.utilities.iter().filter(|(n, _)| keep(n)).map(|(n, t)| (n.clone(), t.clone())).collect(),
    )?;
    Ok(model)
}

/// Which graph a certificate was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// The transformed graph carrying the parameterized model.
    Transformed,
    /// The minimal d-reduction, with the transported model.
    Reduced,
    /// The input graph, with the transported model extended over its extra links.
    Original,
}

/// An exact solver certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Voi { level: Level, with_link: Rational, without_link: Rational, value: Rational },
    Voc { level: Level, baseline: Rational, controlled: Rational, intervention: Vec<String>, value: Rational },
}

impl Certificate {
    pub fn level(&self) -> Level {
        match self {
            Certificate::Voi { level, .. } | Certificate::Voc { level, .. } => *level,
        }
    }

    pub fn value(&self) -> &Rational {
        match self {
            Certificate::Voi { value, .. } | Certificate::Voc { value, .. } => value,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Certificate::Voi { level, with_link, without_link, value } => json!({
                "level": level,
                "eu_with_link": with_link.to_string(),
                "eu_without_link": without_link.to_string(),
                "voi": value.to_string(),
            }),
            Certificate::Voc { level, baseline, controlled, intervention, value } => json!({
                "level": level,
                "eu_baseline": baseline.to_string(),
                "eu_controlled": controlled.to_string(),
                "intervention": intervention,
                "voc": value.to_string(),
            }),
        }
    }
}

fn certify_voi(level: Level, m: &IdModel, x: &str, d: &str, cfg: &WitnessConfig) -> Result<Certificate, WitnessError> {
    let c = voi_certificate(m, x, d, &cfg.solver)?;
    Ok(Certificate::Voi { level, with_link: c.with_link.eu, without_link: c.without_link.eu, value: c.value })
}

fn certify_voc(level: Level, m: &IdModel, x: &str, cfg: &WitnessConfig) -> Result<Certificate, WitnessError> {
    let c = voc_certificate(m, x, cfg.intervention, &cfg.solver)?;
    let intervention = c.intervention.iter().map(|i| m.domains[x].value(*i).to_string()).collect();
    Ok(Certificate::Voc { level, baseline: c.baseline, controlled: c.controlled, intervention, value: c.value })
}

/// What a witness certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    Voi,
    Voc,
}

/// A transformed graph with a model on it, the model carried back to the
/// input graph, and exact certificates at every level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReport {
    pub kind: WitnessKind,
    pub node: NodeId,
    pub decision: Option<NodeId>,
    pub epsilon: Option<Rational>,
    /// The input graph; for VoI it includes the link `node -> decision`.
    pub graph: IdGraph,
    pub reduced: IdGraph,
    pub transformed: IdGraph,
    /// The normal-form trees used, one per parameterization.
    pub trees: Vec<SystemTree>,
    /// From `transformed` onto `reduced`.
    pub hom: IdHom,
    /// The witness model on `transformed`.
    pub model: IdModel,
    /// `model` pushed along `hom`.
    pub transported: IdModel,
    /// `transported` extended to `graph`.
    pub lifted: IdModel,
    pub umax: Vec<Rational>,
    pub certificates: Vec<Certificate>,
}

impl WitnessReport {
    fn certify(&self, cfg: &WitnessConfig) -> Result<Vec<Certificate>, WitnessError> {
        let levels = [(Level::Transformed, &self.model), (Level::Reduced, &self.transported), (Level::Original, &self.lifted)];
        levels
            .into_iter()
            .map(|(level, m)| match (&self.kind, &self.decision) {
                (WitnessKind::Voi, Some(d)) => certify_voi(level, m, &self.node, d, cfg),
                (WitnessKind::Voi, None) => Err(WitnessError::CertificateFailed("VoI report without a decision".into())),
                (WitnessKind::Voc, _) => certify_voc(level, m, &self.node, cfg),
            })
            .collect()
    }

    /// Recomputes everything that can be recomputed: the hom conditions, the
    /// transport, the extension and every certificate.
    pub fn recheck(&self, cfg: &WitnessConfig) -> Result<bool, WitnessError> {
        let mut h = self.hom.clone();
        if h.verify().is_err() {
            return Ok(false);
        }
        if transport_model(&h, &self.model)? != self.transported || self.transported.extend_to(&self.graph)? != self.lifted {
            return Ok(false);
        }
        Ok(self.certify(cfg)? == self.certificates)
    }

    /// Every certificate is strictly positive.
    pub fn positive(&self) -> bool {
        self.certificates.len() == 3 && self.certificates.iter().all(|c| c.value().is_positive())
    }

    pub fn to_json(&self) -> Json {
        let doc = |v: Result<Json, serde_json::Error>| v.expect("documents serialize");
        json!({
            "kind": self.kind,
            "node": self.node,
            "decision": self.decision,
            "epsilon": self.epsilon.as_ref().map(|e| e.to_string()),
            "graph": doc(serde_json::to_value(self.graph.to_doc())),
            "reduced": doc(serde_json::to_value(self.reduced.to_doc())),
            "transformed": doc(serde_json::to_value(self.transformed.to_doc())),
            "trees": self.trees.iter().map(|t| doc(serde_json::to_value(t.to_doc()))).collect::<Vec<_>>(),
            "hom": doc(serde_json::to_value(self.hom.to_doc())),
            "model": doc(serde_json::to_value(self.model.to_doc())),
            "transported": doc(serde_json::to_value(self.transported.to_doc())),
            "lifted": doc(serde_json::to_value(self.lifted.to_doc())),
            "umax": self.umax.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
            "certificates": self.certificates.iter().map(Certificate::to_json).collect::<Vec<_>>(),
        })
    }
}

/// A VoI witness together with the intermediate parameterization.
#[derive(Debug, Clone)]
pub struct VoiWitness {
    pub report: WitnessReport,
    pub parameterized: Parameterized,
}

/// Builds and certifies a model on `g` in which `x` has positive value of
/// information for `d`. If `g` lacks the link it is added first.
pub fn voi_witness(g: &IdGraph, x: &str, d: &str, cfg: &WitnessConfig) -> Result<VoiWitness, WitnessError> {
    match voi_criterion(g, x, d)? {
        Verdict::Positive => {}
        v => return Err(WitnessError::CriterionFails(format!("VoI criterion for {x} -> {d} is {}", v.label()))),
    }
    let g1 = if g.has_edge(x, d) { g.clone() } else { g.with_edge(x, d)? };
    let stages = normal_form_stages(&g1, x, d)?;
    let nf = &stages.result;
    let base = base_nodes(&nf.graph, &nf.tree);
    let m0 = trivial_base_model(&nf.graph.induced(&base), x, d)?;
    let task = Task::identity(x, d, &Domain::boolean(), &Domain::boolean())?;
    let p = parameterize_tree(&nf.graph, &nf.tree, &m0, &task, cfg)?;
    let transported = transport_model(&nf.hom, &p.model)?;
    let lifted = transported.extend_to(&g1)?;
    let mut report = WitnessReport {
        kind: WitnessKind::Voi,
        node: x.into(),
        decision: Some(d.into()),
        epsilon: None,
        graph: g1,
        reduced: stages.reduced.clone(),
        transformed: nf.graph.clone(),
        trees: vec![nf.tree.clone()],
        hom: nf.hom.clone(),
        model: p.model.clone(),
        transported,
        lifted,
        umax: vec![p.umax.clone()],
        certificates: vec![],
    };
    report.certificates = report.certify(cfg)?;
    if !report.positive() {
        return Err(WitnessError::CertificateFailed(format!(
            "VoI of {x} for {d} is not positive at every level: [{}]",
            report.certificates.iter().map(|c| c.value().to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(VoiWitness { report, parameterized: p })
}

/// One TaskifySingle step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskifyStage {
    pub task: Task,
    /// The parameterized tree before the root split.
    pub parameterized: Parameterized,
    /// Whether the root decision was split off into `<D>__copy`.
    pub split_root: bool,
}

/// The result of [`taskify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taskified {
    pub graph: IdGraph,
    pub model: IdModel,
    /// From `graph` onto the minimal d-reduction of the input graph, or the
    /// identity on the input graph when there were no tasks.
    pub hom: IdHom,
    pub stages: Vec<TaskifyStage>,
    pub added_utilities: BTreeSet<NodeId>,
}

/// Re-reads the tables of the root decision's children after transformation 4:
/// the decision keeps its base value and `<D>__copy` holds the extra bit.
fn split_root_model(p: &Parameterized, g4: &IdGraph, copy: &str, cap: u64) -> Result<IdModel, WitnessError> {
    let m3 = &p.model;
    let d = &p.tree.systems[p.root()].decision;
    let mut domains = m3.domains.clone();
    domains.insert(d.clone(), p.base_domains[d].clone());
    domains.insert(copy.to_string(), Domain::boolean());
    let lookup = |n: &str, vals: &BTreeMap<&str, &Value>| -> Result<usize, WitnessError> {
        m3.graph.parents(n).iter().try_fold(0, |acc, q| {
            let v = if q == d { Value::Tuple(vec![vals[d.as_str()].clone(), vals[copy].clone()]) } else { vals[q.as_str()].clone() };
            Ok(acc * m3.domains[q].len() + index(&m3.domains[q], &v, q)?)
        })
    };
    let mut cpds = BTreeMap::new();
    let mut utilities = BTreeMap::new();
    for n in g4.nodes() {
        if g4.is_decision(n) {
            continue;
        }
        if g4.is_utility(n) {
            utilities.insert(n.clone(), rows(g4, &domains, n, cap, |vals| Ok(m3.utilities[n][lookup(n, vals)?].clone()))?);
        } else {
            cpds.insert(n.clone(), rows(g4, &domains, n, cap, |vals| Ok(m3.cpds[n][lookup(n, vals)?].clone()))?);
        }
    }
    Ok(IdModel::new(g4.clone(), domains, cpds, utilities)?)
}

/// One TaskifySingle step: a homomorphic extension of `m` in which the task's
/// decision performs its task under every optimal policy. The returned hom
/// maps onto the minimal d-reduction of `m.graph`.
pub fn taskify_single(m: &IdModel, task: &Task, cfg: &WitnessConfig) -> Result<(IdModel, IdHom, TaskifyStage), WitnessError> {
    let g = &m.graph;
    g.require(&task.parent)?;
    g.require_decision(&task.decision)?;
    if !is_soluble(g).soluble {
        return Err(WitnessError::Insoluble);
    }
    let stages = normal_form_stages(g, &task.parent, &task.decision).map_err(|e| match e {
        NormalizeError::CriterionFails(a, b) => WitnessError::TaskNotInReduction(a, b),
        e => e.into(),
    })?;
    let nf = &stages.result;
    let base = base_nodes(&nf.graph, &nf.tree);
    let m0 = restrict(m, &nf.graph.induced(&base))?;
    let p = parameterize_tree(&nf.graph, &nf.tree, &m0, task, cfg)?;
    let r4 = transform4_split_root(&nf.graph, &nf.tree)?;
    let split_root = r4.graph != nf.graph;
    let (model, hom) = if split_root {
        let copy = format!("{}__copy", task.decision);
        (split_root_model(&p, &r4.graph, &copy, cfg.solver.policy_cap)?, IdHom::compose(&nf.hom, &r4.hom)?)
    } else {
        (p.model.clone(), nf.hom.clone())
    };
    Ok((model, hom, TaskifyStage { task: task.clone(), parameterized: p, split_root }))
}

/// Applies [`taskify_single`] to each task, latest decision first.
pub fn taskify(m: &IdModel, tasks: &[Task], cfg: &WitnessConfig) -> Result<Taskified, WitnessError> {
    let g = &m.graph;
    if tasks.is_empty() {
        return Ok(Taskified { graph: g.clone(), model: m.clone(), hom: IdHom::identity(g), stages: vec![], added_utilities: BTreeSet::new() });
    }
    let ordering = is_soluble(g).ordering.ok_or(WitnessError::Insoluble)?;
    let (gstar, _) = minimal_d_reduction(g);
    let mut seen = BTreeSet::new();
    for t in tasks {
        if !seen.insert(&t.decision) {
            return Err(WitnessError::InvalidTask(format!("two tasks for {}", t.decision)));
        }
        g.require(&t.parent)?;
        g.require_decision(&t.decision)?;
        if !gstar.has_edge(&t.parent, &t.decision) {
            return Err(WitnessError::TaskNotInReduction(t.parent.clone(), t.decision.clone()));
        }
        t.check(&m.domains[&t.parent], &m.domains[&t.decision])?;
    }
    let rank = |d: &NodeId| ordering.iter().position(|o| o == d).expect("decision in ordering");
    let mut order: Vec<&Task> = tasks.iter().collect();
    order.sort_by_key(|t| std::cmp::Reverse(rank(&t.decision)));
    let mut cur = m.clone();
    let mut hom: Option<IdHom> = None;
    let mut stages = vec![];
    for t in order {
        let (next, h, stage) = taskify_single(&cur, t, cfg)?;
        let map = h.map.iter().map(|(a, b)| (a.clone(), hom.as_ref().map_or(b.clone(), |prev| prev.map[b].clone()))).collect();
        hom = Some(IdHom::checked(next.graph.clone(), gstar.clone(), map)?);
        cur = next;
        stages.push(stage);
    }
    let added_utilities = cur.graph.utilities().into_iter().filter(|u| !g.contains(u)).collect();
    Ok(Taskified { graph: cur.graph.clone(), model: cur, hom: hom.expect("at least one task"), stages, added_utilities })
}

/// Properties of a taskified model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskifyCheck {
    /// The extension agrees with the input model on the input graph's nodes.
    pub extends_input: bool,
    /// Every optimal deterministic policy performs every task.
    pub tasks_performed: bool,
    /// Every added utility is almost surely constant under every optimal policy.
    pub added_constant: bool,
    pub optimal_policies: usize,
}

impl TaskifyCheck {
    pub fn holds(&self) -> bool {
        self.extends_input && self.tasks_performed && self.added_constant
    }
}

/// Checks a [`taskify`] result against its input by enumerating optimal policies.
pub fn check_taskified(t: &Taskified, m: &IdModel, tasks: &[Task], cfg: &WitnessConfig) -> Result<TaskifyCheck, WitnessError> {
    let extends_input = t.model.agrees_with(&restrict(m, &m.graph)?);
    let optimal = optimal_policies(&t.model, &cfg.solver)?;
    let c = CompiledModel::new(&t.model);
    let added: Vec<usize> = c.util_names.iter().enumerate().filter(|(_, u)| t.added_utilities.contains(*u)).map(|(j, _)| j).collect();
    let mut tasks_performed = true;
    let mut added_constant = true;
    for pi in &optimal {
        let mut values: Vec<BTreeSet<Rational>> = vec![BTreeSet::new(); added.len()];
        c.for_each_outcome(&c.rules_of(pi), |a, _| {
            for task in tasks {
                tasks_performed &= a[c.pos[&task.decision]] == task.map[a[c.pos[&task.parent]]];
            }
            for (set, j) in values.iter_mut().zip(&added) {
                let u = &c.utils[*j];
                set.insert(u.table[c.ctx(&u.parents, &u.strides, a)].clone());
            }
        });
        added_constant &= values.iter().all(|s| s.len() <= 1);
    }
    Ok(TaskifyCheck { extends_input, tasks_performed, added_constant, optimal_policies: optimal.len() })
}

/// The VoC base model on `g`: `x ~ Bernoulli(epsilon)`, a boolean copy chain
/// along `path` ending in a utility that pays its predecessor's value, and
/// unit domains and zero utilities elsewhere. Decisions on the path get the
/// identity task on their predecessor.
pub fn voc_base_model(g: &IdGraph, path: &[NodeId], epsilon: &Rational) -> Result<(IdModel, Vec<Task>), WitnessError> {
    let on: BTreeMap<&NodeId, usize> = path.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let dom = |n: &NodeId| if on.contains_key(n) { Domain::boolean() } else { Domain::unit() };
    let domains: BTreeMap<NodeId, Domain> = g.nodes().filter(|n| !g.is_utility(n)).map(|n| (n.clone(), dom(n))).collect();
    let cap = u64::MAX;
    let mut cpds = BTreeMap::new();
    let mut utilities = BTreeMap::new();
    let mut tasks = vec![];
    let one = Rational::one();
    for n in g.nodes() {
        let pred = on.get(n).and_then(|i| i.checked_sub(1)).map(|i| &path[i]);
        if g.is_decision(n) {
            if let Some(p) = pred {
                tasks.push(Task::identity(p, n, &Domain::boolean(), &Domain::boolean())?);
            }
        } else if g.is_utility(n) {
            let t = rows(g, &domains, n, cap, |vals| {
                Ok(match pred {
                    Some(p) if vals[p.as_str()].as_bit() == Some(true) => one.clone(),
                    _ => Rational::zero(),
                })
            })?;
            utilities.insert(n.clone(), t);
        } else {
            let t = rows(g, &domains, n, cap, |vals| {
                Ok(match pred {
                    _ if Some(&n) == path.first().as_ref() => vec![(0, &one - epsilon), (1, epsilon.clone())],
                    Some(p) => point(usize::from(vals[p.as_str()].as_bit() == Some(true))),
                    None => point(0),
                })
            })?;
            cpds.insert(n.clone(), t);
        }
    }
    Ok((IdModel::new(g.clone(), domains, cpds, utilities)?, tasks))
}

/// A VoC witness together with its taskification.
#[derive(Debug, Clone)]
pub struct VocWitness {
    pub report: WitnessReport,
    pub taskified: Taskified,
    pub tasks: Vec<Task>,
    pub base_model: IdModel,
    pub path: Vec<NodeId>,
}

/// Builds and certifies a model on `g` in which the chance node `x` has
/// positive value of control. `path`, if given, is a directed path in the
/// minimal d-reduction from `x` to a utility; by default the shortest one.
pub fn voc_witness(g: &IdGraph, x: &str, path: Option<&[NodeId]>, cfg: &WitnessConfig) -> Result<VocWitness, WitnessError> {
    match voc_criterion(g, x)? {
        Verdict::Positive => {}
        v => return Err(WitnessError::CriterionFails(format!("VoC criterion for {x} is {}", v.label()))),
    }
    let (gstar, _) = minimal_d_reduction(g);
    let path: Vec<NodeId> = match path {
        Some(p) => {
            let ok = p.first().map(String::as_str) == Some(x)
                && p.last().is_some_and(|u| gstar.is_utility(u))
                && p.windows(2).all(|w| gstar.has_edge(&w[0], &w[1]));
            if !ok {
                return Err(WitnessError::CriterionFails(format!("[{}] is not a directed path from {x} to a utility in the reduction", p.join(", "))));
            }
            p.to_vec()
        }
        None => gstar
            .shortest_directed_path(x, |n| gstar.is_utility(n), &BTreeSet::new())
            .ok_or_else(|| WitnessError::CriterionFails(format!("no directed path from {x} to a utility")))?,
    };
    let (base_model, tasks) = voc_base_model(&gstar, &path, &cfg.epsilon)?;
    let t = taskify(&base_model, &tasks, cfg)?;
    let transported = transport_model(&t.hom, &t.model)?;
    let lifted = transported.extend_to(g)?;
    let mut report = WitnessReport {
        kind: WitnessKind::Voc,
        node: x.into(),
        decision: None,
        epsilon: Some(cfg.epsilon.clone()),
        graph: g.clone(),
        reduced: gstar,
        transformed: t.graph.clone(),
        trees: t.stages.iter().map(|s| s.parameterized.tree.clone()).collect(),
        hom: t.hom.clone(),
        model: t.model.clone(),
        transported,
        lifted,
        umax: t.stages.iter().map(|s| s.parameterized.umax.clone()).collect(),
        certificates: vec![],
    };
    report.certificates = report.certify(cfg)?;
    if !report.positive() {
        return Err(WitnessError::CertificateFailed(format!(
            "VoC of {x} is not positive at every level: [{}]",
            report.certificates.iter().map(|c| c.value().to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(VocWitness { report, taskified: t, tasks, base_model, path })
}
