//! Exact policy optimization.
//!
//! Expected utility is multilinear in the decision rules, so over a product of
//! simplices it attains its maximum at a vertex: some deterministic policy is
//! optimal. Both solvers therefore search deterministic policies only.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::analysis::{is_soluble, ordering_is_valid};
use crate::error::{ModelError, SolverError};
use crate::graph::NodeId;
use crate::model::{uniform, CompiledModel, CompiledRule, IdModel, Policy};
use crate::rational::Rational;

/// Default cap on the number of deterministic policies enumerated.
pub const DEFAULT_POLICY_CAP: u64 = 1 << 24;

/// How a solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Enumeration,
    BackwardInduction,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Enumeration => "enumeration",
            Method::BackwardInduction => "backward-induction",
        })
    }
}

/// An optimal deterministic policy and its expected utility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub eu: Rational,
    pub policy: Policy,
    /// Number of optimal deterministic policies; known only after enumeration.
    pub optimal_count: Option<u128>,
    pub method: Method,
}

impl Solution {
    pub fn to_json(&self, m: &IdModel) -> Json {
        json!({
            "eu": self.eu.to_string(),
            "eu_decimal": self.eu.to_f64(),
            "policy": m.policy_to_json(&self.policy),
            "optimal_count": self.optimal_count.map(|c| c.to_string()),
            "method": self.method.to_string(),
        })
    }
}

/// Solver limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Largest deterministic-policy space enumerated.
    pub policy_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { policy_cap: DEFAULT_POLICY_CAP }
    }
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("IDVOI_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|n| *n > 0) {
            b = b.num_threads(n);
        }
        b.build().expect("thread pool")
    })
}

/// One entry per (decision, context) pair, decisions in compiled order.
struct Slots {
    /// `(decision index, context)` per slot.
    slots: Vec<(usize, usize)>,
    radix: Vec<usize>,
}

impl Slots {
    fn new(c: &CompiledModel) -> Self {
        let mut slots = vec![];
        let mut radix = vec![];
        // Decisions by name so that slot order is lexicographic in policies.
        let mut by_name: Vec<(usize, &NodeId)> = c.decisions.iter().enumerate().map(|(k, i)| (k, &c.order[*i])).collect();
        by_name.sort_by(|a, b| a.1.cmp(b.1));
        for (k, _) in by_name {
            let i = c.decisions[k];
            for ctx in 0..c.context_count(i) {
                slots.push((k, ctx));
                radix.push(c.sizes[i]);
            }
        }
        Slots { slots, radix }
    }

    fn count(&self) -> Option<u128> {
        self.radix.iter().try_fold(1u128, |acc, r| acc.checked_mul(*r as u128))
    }

    fn digits(&self, mut idx: u128) -> Vec<usize> {
        let mut d = vec![0; self.radix.len()];
        for i in (0..self.radix.len()).rev() {
            d[i] = (idx % self.radix[i] as u128) as usize;
            idx /= self.radix[i] as u128;
        }
        d
    }

    /// Advances the odometer; `false` on wrap-around.
    fn increment(&self, d: &mut [usize]) -> bool {
        for i in (0..d.len()).rev() {
            d[i] += 1;
            if d[i] < self.radix[i] {
                return true;
            }
            d[i] = 0;
        }
        false
    }

    fn write(&self, d: &[usize], rules: &mut [Vec<usize>]) {
        for ((k, ctx), v) in self.slots.iter().zip(d) {
            rules[*k][*ctx] = *v;
        }
    }
}

fn policy_from(c: &CompiledModel, rules: &[Vec<usize>]) -> Policy {
    Policy::deterministic(c.decisions.iter().zip(rules).map(|(i, r)| (c.order[*i].clone(), r.clone())).collect())
}

/// Best `(eu, first index, count)` of a policy-index range.
type Best = (Rational, u128, u128);

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(match a.0.cmp(&b.0) {
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Equal => (a.0, a.1.min(b.1), a.2 + b.2),
        }),
    }
}

/// Exhaustive maximization over deterministic policies. Returns the
/// lexicographically least optimal policy (decisions by name, contexts in
/// order) and the number of optimal policies.
pub fn enumerate_optimal(m: &IdModel, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    let c = CompiledModel::new(m);
    let slots = Slots::new(&c);
    let total = match slots.count() {
        Some(n) if n <= cfg.policy_cap as u128 => n,
        n => {
            return Err(ModelError::TooLarge {
                what: "deterministic policies".into(),
                size: n.map(|n| n.to_string()).unwrap_or_else(|| "> 2^128".into()),
                cap: cfg.policy_cap,
            }
            .into())
        }
    };
    const CHUNK: u128 = 1024;
    let chunks = total.div_ceil(CHUNK);
    let template: Vec<Vec<usize>> = c.decisions.iter().map(|i| vec![0; c.context_count(*i)]).collect();
    let best = pool().install(|| {
        (0..chunks as u64)
            .into_par_iter()
            .map(|ch| {
                let start = ch as u128 * CHUNK;
                let end = (start + CHUNK).min(total);
                let mut d = slots.digits(start);
                let mut rules = template.clone();
                let mut best: Option<Best> = None;
                for idx in start..end {
                    slots.write(&d, &mut rules);
                    let compiled: Vec<CompiledRule> = rules.iter().map(|r| CompiledRule::Det(r.clone())).collect();
                    let eu = c.expected_utility(&compiled);
                    best = merge(best, Some((eu, idx, 1)));
                    slots.increment(&mut d);
                }
                best
            })
            .reduce(|| None, merge)
    });
    let (eu, idx, count) = best.expect("at least one policy");
    let mut rules = template;
    slots.write(&slots.digits(idx), &mut rules);
    Ok(Solution { eu, policy: policy_from(&c, &rules), optimal_count: Some(count), method: Method::Enumeration })
}

/// Per-context, per-action values of decision `focus` (position in
/// `c.decisions`): the probability of the context times the expected utility
/// given the context and the action.
pub fn q_values(c: &CompiledModel, rules: &[CompiledRule], focus: usize) -> Vec<Vec<Rational>> {
    let i = c.decisions[focus];
    let mut q = vec![vec![Rational::zero(); c.sizes[i]]; c.context_count(i)];
    let mut rules = rules.to_vec();
    rules[focus] = CompiledRule::All;
    c.for_each_outcome(&rules, |a, w| {
        let u = c.utility_sum(a);
        if !u.is_zero() {
            q[c.context(i, a)][a[i]] += &(w * &u);
        }
    });
    q
}

/// Solves decisions from the last of `ordering` (earliest first) to the first,
/// choosing in each context the lowest-index action of maximal value. Earlier
/// decisions play uniformly while a later one is solved; solubility makes the
/// choice independent of their rules.
pub fn backward_induction(m: &IdModel, ordering: &[NodeId]) -> Result<Solution, SolverError> {
    if !ordering_is_valid(&m.graph, ordering) {
        return Err(SolverError::OrderingInvalid(format!("[{}] does not witness solubility", ordering.join(", "))));
    }
    let c = CompiledModel::new(m);
    let k_of = |d: &NodeId| c.decisions.iter().position(|i| c.order[*i] == *d).expect("decision in model");
    let mut rules: Vec<CompiledRule> =
        c.decisions.iter().map(|i| CompiledRule::Stoch(vec![uniform(c.sizes[*i]); c.context_count(*i)])).collect();
    for d in ordering.iter().rev() {
        let k = k_of(d);
        let q = pool().install(|| q_values(&c, &rules, k));
        let rule = q
            .iter()
            .map(|row| {
                let best = row.iter().max().expect("nonempty domain");
                row.iter().position(|v| v == best).unwrap()
            })
            .collect();
        rules[k] = CompiledRule::Det(rule);
    }
    let det: Vec<Vec<usize>> = rules
        .iter()
        .map(|r| match r {
            CompiledRule::Det(v) => v.clone(),
            _ => unreachable!("every decision solved"),
        })
        .collect();
    let eu = c.expected_utility(&rules);
    Ok(Solution { eu, policy: policy_from(&c, &det), optimal_count: None, method: Method::BackwardInduction })
}

/// Enumeration when the policy space fits the cap, otherwise backward
/// induction along the solubility ordering.
pub fn solve(m: &IdModel, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    match enumerate_optimal(m, cfg) {
        Err(SolverError::Model(ModelError::TooLarge { what, size, cap })) => match is_soluble(&m.graph).ordering {
            Some(o) => backward_induction(m, &o),
            None => Err(ModelError::TooLarge { what, size, cap }.into()),
        },
        r => r,
    }
}

/// Optimal expected utility.
pub fn optimal_eu(m: &IdModel, cfg: &SolverConfig) -> Result<Rational, SolverError> {
    Ok(solve(m, cfg)?.eu)
}

/// Both sides of a value-of-information computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoiCertificate {
    pub with_link: Solution,
    pub without_link: Solution,
    pub value: Rational,
}

/// `EU*(m) - EU*(m without x -> d)`.
pub fn voi_certificate(m: &IdModel, x: &str, d: &str, cfg: &SolverConfig) -> Result<VoiCertificate, SolverError> {
    if !m.graph.has_edge(x, d) || !m.graph.is_decision(d) {
        return Err(SolverError::NoSuchInfolink(x.into(), d.into()));
    }
    let with_link = solve(m, cfg)?;
    let without_link = solve(&m.remove_infolink(x, d)?, cfg)?;
    let value = &with_link.eu - &without_link.eu;
    Ok(VoiCertificate { with_link, without_link, value })
}

/// Value of information of `x` for `d`.
pub fn voi(m: &IdModel, x: &str, d: &str, cfg: &SolverConfig) -> Result<Rational, SolverError> {
    Ok(voi_certificate(m, x, d, cfg)?.value)
}

/// Whether a value-of-control intervention may read the parents of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterventionMode {
    #[default]
    ReadsParents,
    Constant,
}

/// The best intervention found by [`voc_certificate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocCertificate {
    pub baseline: Rational,
    pub controlled: Rational,
    /// Value index of `x` per parent context under the best intervention.
    pub intervention: Vec<usize>,
    pub mode: InterventionMode,
    pub value: Rational,
}

/// Maximizes expected utility over deterministic mechanisms for `x`, jointly
/// with the policy, and subtracts the optimal expected utility of `m`.
/// Among equally good mechanisms the lexicographically least is reported.
pub fn voc_certificate(m: &IdModel, x: &str, mode: InterventionMode, cfg: &SolverConfig) -> Result<VocCertificate, SolverError> {
    if !m.graph.is_chance(x) {
        return Err(SolverError::NotAChanceNode(x.into()));
    }
    let baseline = optimal_eu(m, cfg)?;
    let vals = m.domains[x].len();
    let ctxs = m.context_count(x);
    let free = if mode == InterventionMode::ReadsParents { ctxs } else { 1 };
    let count = (0..free).try_fold(1u128, |acc, _| acc.checked_mul(vals as u128));
    if count.map_or(true, |n| n > cfg.policy_cap as u128) {
        return Err(ModelError::TooLarge {
            what: format!("interventions on {x}"),
            size: count.map(|n| n.to_string()).unwrap_or_else(|| "> 2^128".into()),
            cap: cfg.policy_cap,
        }
        .into());
    }
    let mut digits = vec![0usize; free];
    let mut best: Option<(Rational, Vec<usize>)> = None;
    loop {
        let g: Vec<usize> = (0..ctxs).map(|c| digits[if free == 1 { 0 } else { c }]).collect();
        let eu = optimal_eu(&m.intervene(x, &g), cfg)?;
        if best.as_ref().map_or(true, |(b, _)| eu > *b) {
            best = Some((eu, g));
        }
        let mut i = free;
        loop {
            if i == 0 {
                let (controlled, intervention) = best.expect("at least one intervention");
                let value = &controlled - &baseline;
                return Ok(VocCertificate { baseline, controlled, intervention, mode, value });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < vals {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Value of control of `x`.
pub fn voc(m: &IdModel, x: &str, mode: InterventionMode, cfg: &SolverConfig) -> Result<Rational, SolverError> {
    Ok(voc_certificate(m, x, mode, cfg)?.value)
}

/// All optimal deterministic policies, in enumeration order.
pub fn optimal_policies(m: &IdModel, cfg: &SolverConfig) -> Result<Vec<Policy>, SolverError> {
    let best = enumerate_optimal(m, cfg)?.eu;
    let c = CompiledModel::new(m);
    let slots = Slots::new(&c);
    let total = slots.count().expect("checked by enumerate_optimal");
    let mut rules: Vec<Vec<usize>> = c.decisions.iter().map(|i| vec![0; c.context_count(*i)]).collect();
    let mut d = slots.digits(0);
    let mut out = vec![];
    for _ in 0..total {
        slots.write(&d, &mut rules);
        let compiled: Vec<CompiledRule> = rules.iter().map(|r| CompiledRule::Det(r.clone())).collect();
        if c.expected_utility(&compiled) == best {
            out.push(policy_from(&c, &rules));
        }
        slots.increment(&mut d);
    }
    Ok(out)
}

/// Expected utility per decision rule assignment, as a map from policy to EU;
/// intended for small models in tests.
pub fn policy_values(m: &IdModel, cfg: &SolverConfig) -> Result<BTreeMap<Vec<(NodeId, Vec<usize>)>, Rational>, SolverError> {
    let n = m.deterministic_policy_count();
    if n.map_or(true, |n| n > cfg.policy_cap as u128) {
        return Err(ModelError::TooLarge {
            what: "deterministic policies".into(),
            size: n.map(|n| n.to_string()).unwrap_or_else(|| "> 2^128".into()),
            cap: cfg.policy_cap,
        }
        .into());
    }
    crate::model::all_deterministic(m)
        .map(|p| {
            let eu = m.expected_utility(&p)?;
            Ok((p.as_deterministic().expect("deterministic").into_iter().collect(), eu))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Domain;
    use std::collections::BTreeMap;

    fn f1(u_const: bool) -> IdModel {
        let g = fixtures::graph("F1").unwrap();
        let domains = BTreeMap::from([("X".to_string(), Domain::boolean()), ("D".to_string(), Domain::boolean())]);
        let cpds = BTreeMap::from([("X".to_string(), vec![uniform(2)])]);
        let u = if u_const { vec![Rational::one(); 4] } else { vec![Rational::one(), Rational::zero(), Rational::zero(), Rational::one()] };
        IdModel::new(g, domains, cpds, BTreeMap::from([("U".to_string(), u)])).unwrap()
    }

    #[test]
    fn f1_enumeration() {
        let cfg = SolverConfig::default();
        let s = enumerate_optimal(&f1(false), &cfg).unwrap();
        assert_eq!(s.eu, Rational::one());
        assert_eq!(s.optimal_count, Some(1));
        assert_eq!(s.policy.as_deterministic().unwrap()["D"], vec![0, 1]);
        let r = f1(false).remove_infolink("X", "D").unwrap();
        assert_eq!(enumerate_optimal(&r, &cfg).unwrap().eu, Rational::new(1, 2));
        assert_eq!(voi(&f1(false), "X", "D", &cfg).unwrap(), Rational::new(1, 2));
        assert_eq!(voi(&f1(true), "X", "D", &cfg).unwrap(), Rational::zero());
    }

    #[test]
    fn f1_backward_induction_matches() {
        let m = f1(false);
        let e = enumerate_optimal(&m, &SolverConfig::default()).unwrap();
        let b = backward_induction(&m, &["D".to_string()]).unwrap();
        assert_eq!((e.eu, e.policy), (b.eu, b.policy));
    }

    #[test]
    fn insoluble_orderings_are_rejected() {
        let g = fixtures::graph("F6").unwrap();
        let domains = BTreeMap::from([("D1".to_string(), Domain::boolean()), ("D2".to_string(), Domain::boolean())]);
        let m = IdModel::new(g, domains, BTreeMap::new(), BTreeMap::from([("U".to_string(), vec![Rational::zero(); 4])])).unwrap();
        for o in [["D1", "D2"], ["D2", "D1"]] {
            let o: Vec<NodeId> = o.iter().map(|s| s.to_string()).collect();
            assert!(matches!(backward_induction(&m, &o), Err(SolverError::OrderingInvalid(_))));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = SolverConfig { policy_cap: 3 };
        assert!(matches!(enumerate_optimal(&f1(false), &cfg), Err(SolverError::Model(ModelError::TooLarge { .. }))));
        assert_eq!(solve(&f1(false), &cfg).unwrap().method, Method::BackwardInduction);
    }

    #[test]
    fn voc_of_bernoulli_quarter() {
        let g = crate::graph::IdGraph::from_slices(&[("X", crate::graph::NodeKind::Chance), ("U", crate::graph::NodeKind::Utility)], &[("X", "U")])
            .unwrap();
        let cpds = BTreeMap::from([("X".to_string(), vec![vec![(0, Rational::new(3, 4)), (1, Rational::new(1, 4))]])]);
        let m = IdModel::new(
            g,
            BTreeMap::from([("X".to_string(), Domain::boolean())]),
            cpds,
            BTreeMap::from([("U".to_string(), vec![Rational::zero(), Rational::one()])]),
        )
        .unwrap();
        let cfg = SolverConfig::default();
        assert_eq!(voc(&m, "X", InterventionMode::ReadsParents, &cfg).unwrap(), Rational::new(3, 4));
        assert_eq!(voc(&m, "X", InterventionMode::Constant, &cfg).unwrap(), Rational::new(3, 4));
        let c = voc_certificate(&m, "X", InterventionMode::default(), &cfg).unwrap();
        assert_eq!(c.intervention, vec![1]);
        assert!(matches!(voc(&m, "U", InterventionMode::default(), &cfg), Err(SolverError::NotAChanceNode(_))));
    }

    #[test]
    fn optimal_policy_listing() {
        let m = f1(true);
        let cfg = SolverConfig::default();
        assert_eq!(optimal_policies(&m, &cfg).unwrap().len(), 4);
        assert_eq!(enumerate_optimal(&m, &cfg).unwrap().optimal_count, Some(4));
        assert_eq!(policy_values(&m, &cfg).unwrap().len(), 4);
    }
}
