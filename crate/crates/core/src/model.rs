//! Quantitative influence diagrams with exact rational parameters.
//!
//! Values are stored as indices into a node's [`Domain`]. A parent context is
//! the mixed-radix index of the parents' values, parents taken in
//! lexicographic order with the first parent most significant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::error::ModelError;
use crate::graph::{GraphDoc, IdGraph, NodeId, NodeKind};
use crate::hom::IdHom;
use crate::rational::Rational;

/// A domain value. Labels: atoms verbatim, bitstrings `#0110`, tuples `(a,b)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Atom(String),
    Bits(Vec<bool>),
    Tuple(Vec<Value>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(s) => write!(f, "{s}"),
            Value::Bits(b) => {
                write!(f, "#")?;
                b.iter().try_for_each(|x| write!(f, "{}", u8::from(*x)))
            }
            Value::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Value {
    /// Parses a label produced by `Display`.
    pub fn parse(s: &str) -> Result<Value, ModelError> {
        if let Some(bits) = s.strip_prefix('#') {
            return bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(ModelError::Malformed(format!("bad bitstring {s:?}"))),
                })
                .collect::<Result<_, _>>()
                .map(Value::Bits);
        }
        if let Some(inner) = s.strip_prefix('(') {
            let inner = inner.strip_suffix(')').ok_or_else(|| ModelError::Malformed(format!("bad tuple {s:?}")))?;
            if inner.is_empty() {
                return Ok(Value::Tuple(vec![]));
            }
            let mut parts = vec![];
            let (mut depth, mut start) = (0usize, 0usize);
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.saturating_sub(1),
                    ',' if depth == 0 => {
                        parts.push(Value::parse(&inner[start..i])?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            parts.push(Value::parse(&inner[start..])?);
            return Ok(Value::Tuple(parts));
        }
        if s.is_empty() || s.contains([',', '(', ')']) {
            return Err(ModelError::Malformed(format!("bad atom {s:?}")));
        }
        Ok(Value::Atom(s.to_string()))
    }

    /// `0`/`1` atoms as booleans.
    pub fn as_bit(&self) -> Option<bool> {
        match self {
            Value::Atom(s) if s == "0" => Some(false),
            Value::Atom(s) if s == "1" => Some(true),
            _ => None,
        }
    }
}

/// A finite, ordered, duplicate-free list of values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    values: Vec<Value>,
}

impl Domain {
    pub fn new(values: Vec<Value>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::Invalid("empty domain".into()));
        }
        let labels: BTreeSet<String> = values.iter().map(Value::to_string).collect();
        if labels.len() != values.len() {
            return Err(ModelError::Invalid("duplicate domain labels".into()));
        }
        Ok(Domain { values })
    }

    /// `{0, 1}`.
    pub fn boolean() -> Self {
        Domain { values: vec![Value::Atom("0".into()), Value::Atom("1".into())] }
    }

    /// The single empty tuple.
    pub fn unit() -> Self {
        Domain { values: vec![Value::Tuple(vec![])] }
    }

    /// Atoms `0..n`.
    pub fn range(n: usize) -> Self {
        assert!(n > 0, "empty range domain");
        Domain { values: (0..n).map(|i| Value::Atom(i.to_string())).collect() }
    }

    /// All bitstrings of length `n`, counting with the first bit most significant.
    pub fn bits(n: usize) -> Self {
        let values = (0..1usize << n).map(|k| Value::Bits((0..n).map(|i| (k >> (n - 1 - i)) & 1 == 1).collect())).collect();
        Domain { values }
    }

    /// Cartesian product, first factor most significant.
    pub fn product(factors: &[&Domain]) -> Self {
        let mut values = vec![vec![]];
        for f in factors {
            values = values
                .into_iter()
                .flat_map(|prefix: Vec<Value>| {
                    f.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        Domain { values: values.into_iter().map(Value::Tuple).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &Value {
        &self.values[i]
    }

    pub fn index_of(&self, v: &Value) -> Option<usize> {
        self.values.iter().position(|x| x == v)
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|x| x.to_string() == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.values.iter().map(Value::to_string).collect()
    }
}

/// Sparse distribution over domain indices: sorted, positive, summing to one.
pub type Dist = Vec<(usize, Rational)>;

/// Point mass on `i`.
pub fn point(i: usize) -> Dist {
    vec![(i, Rational::one())]
}

/// Uniform over `0..n`.
pub fn uniform(n: usize) -> Dist {
    (0..n).map(|i| (i, Rational::new(1, n as i64))).collect()
}

fn normalize_dist(mut d: Dist) -> Dist {
    d.retain(|(_, p)| !p.is_zero());
    d.sort_by_key(|(i, _)| *i);
    let mut out: Dist = vec![];
    for (i, p) in d {
        match out.last_mut() {
            Some((j, q)) if *j == i => *q += &p,
            _ => out.push((i, p)),
        }
    }
    out
}

/// A decision rule: one distribution per parent context.
pub type Rule = Vec<Dist>;

/// One rule per decision.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Policy {
    pub rules: BTreeMap<NodeId, Rule>,
}

impl Policy {
    /// From deterministic rules (one action index per context).
    pub fn deterministic(rules: BTreeMap<NodeId, Vec<usize>>) -> Self {
        Policy { rules: rules.into_iter().map(|(d, r)| (d, r.into_iter().map(point).collect())).collect() }
    }

    pub fn is_deterministic(&self) -> bool {
        self.rules.values().all(|r| r.iter().all(|row| row.len() == 1))
    }

    /// Action index per context, if every row is a point mass.
    pub fn as_deterministic(&self) -> Option<BTreeMap<NodeId, Vec<usize>>> {
        self.rules
            .iter()
            .map(|(d, r)| Some((d.clone(), r.iter().map(|row| (row.len() == 1).then(|| row[0].0)).collect::<Option<Vec<_>>>()?)))
            .collect()
    }
}

/// A quantitative influence diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdModel {
    pub graph: IdGraph,
    /// Chance and decision nodes.
    pub domains: BTreeMap<NodeId, Domain>,
    /// Chance nodes: one distribution per parent context.
    pub cpds: BTreeMap<NodeId, Vec<Dist>>,
    /// Utility nodes: one value per parent context.
    pub utilities: BTreeMap<NodeId, Vec<Rational>>,
}

impl IdModel {
    /// Builds and validates a model.
    pub fn new(
        graph: IdGraph,
        domains: BTreeMap<NodeId, Domain>,
        cpds: BTreeMap<NodeId, Vec<Dist>>,
        utilities: BTreeMap<NodeId, Vec<Rational>>,
    ) -> Result<Self, ModelError> {
        let cpds = cpds.into_iter().map(|(n, rows)| (n, rows.into_iter().map(normalize_dist).collect())).collect();
        let m = IdModel { graph, domains, cpds, utilities };
        let v = m.validate();
        if v.is_empty() {
            Ok(m)
        } else {
            Err(ModelError::Invalid(v.join("; ")))
        }
    }

    /// Every structural or numeric inconsistency.
    pub fn validate(&self) -> Vec<String> {
        let mut v = vec![];
        for n in self.graph.nodes() {
            let kind = self.graph.kind_of(n);
            if kind != NodeKind::Utility && !self.domains.contains_key(n) {
                v.push(format!("{n} has no domain"));
            }
        }
        if !v.is_empty() {
            return v;
        }
        for n in self.domains.keys() {
            if !self.graph.contains(n) || self.graph.is_utility(n) {
                v.push(format!("domain for {n}, which is not a chance or decision node"));
            }
        }
        for n in self.graph.nodes() {
            let size = self.context_count(n);
            match self.graph.kind_of(n) {
                NodeKind::Chance => match self.cpds.get(n) {
                    None => v.push(format!("{n} has no distribution")),
                    Some(rows) if rows.len() != size => v.push(format!("{n} has {} rows, expected {size}", rows.len())),
                    Some(rows) => {
                        let dom = self.domains[n].len();
                        for (c, row) in rows.iter().enumerate() {
                            if row.iter().any(|(i, p)| *i >= dom || p.is_negative()) {
                                v.push(format!("{n} row {} has an invalid entry", self.context_label(n, c)));
                            }
                            let s: Rational = row.iter().map(|(_, p)| p).sum();
                            if s != Rational::one() {
                                v.push(format!("{n} row {} sums to {s}", self.context_label(n, c)));
                            }
                        }
                    }
                },
                NodeKind::Utility => match self.utilities.get(n) {
                    None => v.push(format!("{n} has no utility table")),
                    Some(rows) if rows.len() != size => v.push(format!("{n} has {} rows, expected {size}", rows.len())),
                    _ => {}
                },
                NodeKind::Decision => {
                    if self.cpds.contains_key(n) || self.utilities.contains_key(n) {
                        v.push(format!("decision {n} has a table"));
                    }
                }
            }
        }
        for n in self.cpds.keys() {
            if !self.graph.is_chance(n) {
                v.push(format!("distribution for non-chance node {n}"));
            }
        }
        for n in self.utilities.keys() {
            if !self.graph.is_utility(n) {
                v.push(format!("utility table for non-utility node {n}"));
            }
        }
        v
    }

    pub fn domain(&self, n: &str) -> &Domain {
        &self.domains[n]
    }

    /// Parents in context order.
    pub fn parents(&self, n: &str) -> Vec<NodeId> {
        self.graph.parents(n).iter().cloned().collect()
    }

    pub fn context_count(&self, n: &str) -> usize {
        self.graph.parents(n).iter().map(|p| self.domains[p].len()).product()
    }

    /// Parent value indices of context `c`.
    pub fn decode_context(&self, n: &str, mut c: usize) -> Vec<usize> {
        let sizes: Vec<usize> = self.graph.parents(n).iter().map(|p| self.domains[p].len()).collect();
        let mut out = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            out[i] = c % sizes[i];
            c /= sizes[i];
        }
        out
    }

    pub fn encode_context(&self, n: &str, vals: &[usize]) -> usize {
        self.graph.parents(n).iter().zip(vals).fold(0, |acc, (p, v)| acc * self.domains[p].len() + v)
    }

    /// Context of `n` under a full assignment.
    pub fn context_of(&self, n: &str, assignment: &BTreeMap<NodeId, usize>) -> usize {
        let vals: Vec<usize> = self.graph.parents(n).iter().map(|p| assignment[p]).collect();
        self.encode_context(n, &vals)
    }

    /// `v1,v2,...` or `()` without parents.
    pub fn context_label(&self, n: &str, c: usize) -> String {
        let parents = self.parents(n);
        if parents.is_empty() {
            return "()".into();
        }
        let vals = self.decode_context(n, c);
        parents.iter().zip(vals).map(|(p, v)| self.domains[p].value(v).to_string()).collect::<Vec<_>>().join(",")
    }

    fn context_lookup(&self, n: &str) -> HashMap<String, usize> {
        (0..self.context_count(n)).map(|c| (self.context_label(n, c), c)).collect()
    }

    /// The stochastic policy that is uniform everywhere.
    pub fn uniform_policy(&self) -> Policy {
        Policy {
            rules: self
                .graph
                .decisions()
                .into_iter()
                .map(|d| {
                    let row = uniform(self.domains[&d].len());
                    (d.clone(), vec![row; self.context_count(&d)])
                })
                .collect(),
        }
    }

    /// Number of deterministic policies, or `None` beyond `u128`.
    pub fn deterministic_policy_count(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for d in self.graph.decisions() {
            let a = self.domains[&d].len() as u128;
            for _ in 0..self.context_count(&d) {
                total = total.checked_mul(a)?;
            }
        }
        Some(total)
    }

    /// Checks that `pi` has a well-formed rule for every decision.
    pub fn check_policy(&self, pi: &Policy) -> Result<(), ModelError> {
        for d in self.graph.decisions() {
            let rule = pi.rules.get(&d).ok_or_else(|| ModelError::PolicyIncomplete(format!("no rule for {d}")))?;
            if rule.len() != self.context_count(&d) {
                return Err(ModelError::PolicyIncomplete(format!("rule for {d} has {} rows", rule.len())));
            }
            let n = self.domains[&d].len();
            for row in rule {
                let s: Rational = row.iter().map(|(_, p)| p).sum();
                if s != Rational::one() || row.iter().any(|(i, p)| *i >= n || p.is_negative()) {
                    return Err(ModelError::PolicyIncomplete(format!("rule for {d} has an invalid row")));
                }
            }
        }
        for d in pi.rules.keys() {
            if !self.graph.is_decision(d) {
                return Err(ModelError::PolicyIncomplete(format!("rule for non-decision {d}")));
            }
        }
        Ok(())
    }

    /// Expected total utility of `pi`.
    pub fn expected_utility(&self, pi: &Policy) -> Result<Rational, ModelError> {
        self.check_policy(pi)?;
        let c = CompiledModel::new(self);
        Ok(c.expected_utility(&c.rules_of(pi)))
    }

    /// Expected value of each utility node under `pi`.
    pub fn expected_utilities(&self, pi: &Policy) -> Result<BTreeMap<NodeId, Rational>, ModelError> {
        self.check_policy(pi)?;
        let c = CompiledModel::new(self);
        let rules = c.rules_of(pi);
        let mut out: BTreeMap<NodeId, Rational> = self.graph.utilities().into_iter().map(|u| (u, Rational::zero())).collect();
        c.for_each_outcome(&rules, |assign, w| {
            for (k, u) in c.utils.iter().enumerate() {
                let v = &u.table[c.ctx(&u.parents, &u.strides, assign)];
                *out.get_mut(&c.util_names[k]).unwrap() += &(w * v);
            }
        });
        Ok(out)
    }

    /// Joint distribution over chance and decision nodes under `pi`.
    pub fn joint(&self, pi: &Policy) -> Result<Joint, ModelError> {
        self.check_policy(pi)?;
        let c = CompiledModel::new(self);
        let rules = c.rules_of(pi);
        let mut entries = vec![];
        c.for_each_outcome(&rules, |assign, w| entries.push((assign.to_vec(), w.clone())));
        let utilities = c
            .utils
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let vals = entries.iter().map(|(a, _)| u.table[c.ctx(&u.parents, &u.strides, a)].clone()).collect();
                (c.util_names[k].clone(), vals)
            })
            .collect();
        Ok(Joint { nodes: c.order.clone(), entries, utilities })
    }

    /// The model on `graph` minus `x -> d`; tables are unchanged.
    pub fn remove_infolink(&self, x: &str, d: &str) -> Result<IdModel, ModelError> {
        if !self.graph.has_edge(x, d) {
            return Err(ModelError::NoSuchEdge(x.into(), d.into()));
        }
        if !self.graph.is_decision(d) {
            return Err(ModelError::NotAnInfolink(x.into(), d.into()));
        }
        Ok(IdModel { graph: self.graph.without_edge(x, d), ..self.clone() })
    }

    /// Lifts a policy of `self.remove_infolink(x, d)` to `self`, ignoring `x`.
    pub fn lift_policy(&self, reduced: &Policy, x: &str, d: &str) -> Policy {
        let mut out = reduced.clone();
        let reduced_graph = self.graph.without_edge(x, d);
        let sizes: BTreeMap<&NodeId, usize> = self.domains.iter().map(|(n, dm)| (n, dm.len())).collect();
        let rule = (0..self.context_count(d))
            .map(|c| {
                let vals = self.decode_context(d, c);
                let rc = self
                    .graph
                    .parents(d)
                    .iter()
                    .zip(vals)
                    .filter(|(p, _)| reduced_graph.has_edge(p, d))
                    .fold(0, |acc, (p, v)| acc * sizes[p] + v);
                reduced.rules[d][rc].clone()
            })
            .collect();
        out.rules.insert(d.to_string(), rule);
        out
    }

    /// Replaces the distribution of chance node `x` by the deterministic
    /// mechanism `g` (one value index per context).
    pub fn intervene(&self, x: &str, g: &[usize]) -> IdModel {
        let mut m = self.clone();
        m.cpds.insert(x.to_string(), g.iter().map(|v| point(*v)).collect());
        m
    }

    /// Context of `n` in `self` seen from context `c` of `n` in `sup`, a model
    /// whose parents of `n` include those of `self`.
    fn project_context(&self, sup: &IdModel, n: &str, c: usize) -> usize {
        let vals = sup.decode_context(n, c);
        let at: BTreeMap<&NodeId, usize> = sup.graph.parents(n).iter().zip(vals).collect();
        self.graph.parents(n).iter().fold(0, |acc, p| acc * self.domains[p].len() + at[p])
    }

    /// The same model on `g`, a graph with the same nodes and kinds whose
    /// parent sets contain those of `self.graph`. Tables ignore added parents.
    pub fn extend_to(&self, g: &IdGraph) -> Result<IdModel, ModelError> {
        let same_nodes = g.nodes().eq(self.graph.nodes()) && g.nodes().all(|n| g.kind_of(n) == self.graph.kind_of(n));
        if !same_nodes {
            return Err(ModelError::Invalid("extension graph has different nodes".into()));
        }
        if let Some(n) = g.nodes().find(|n| !self.graph.parents(n).is_subset(g.parents(n))) {
            return Err(ModelError::Invalid(format!("extension graph drops a parent of {n}")));
        }
        let mut ext = IdModel { graph: g.clone(), domains: self.domains.clone(), cpds: BTreeMap::new(), utilities: BTreeMap::new() };
        let cpds = self
            .cpds
            .iter()
            .map(|(n, rows)| (n.clone(), (0..ext.context_count(n)).map(|c| rows[self.project_context(&ext, n, c)].clone()).collect()))
            .collect();
        let utilities = self
            .utilities
            .iter()
            .map(|(n, t)| (n.clone(), (0..ext.context_count(n)).map(|c| t[self.project_context(&ext, n, c)].clone()).collect()))
            .collect();
        ext.cpds = cpds;
        ext.utilities = utilities;
        let v = ext.validate();
        if v.is_empty() {
            Ok(ext)
        } else {
            Err(ModelError::Invalid(v.join("; ")))
        }
    }

    /// Whether `self` agrees with `sub` on every node of `sub`: same kinds and
    /// domains, and the same tables once parents outside `sub` are ignored.
    pub fn agrees_with(&self, sub: &IdModel) -> bool {
        sub.graph.nodes().all(|n| {
            if !self.graph.contains(n) || self.graph.kind_of(n) != sub.graph.kind_of(n) {
                return false;
            }
            if self.domains.get(n) != sub.domains.get(n) {
                return false;
            }
            if self.graph.is_decision(n) {
                return true;
            }
            if !sub.graph.parents(n).is_subset(self.graph.parents(n)) {
                return false;
            }
            let mine = self.cpds.get(n).map(|r| r.len()).or(self.utilities.get(n).map(|t| t.len())).unwrap_or(0);
            (0..mine).all(|c| {
                let sc = sub.project_context(self, n, c);
                match sub.graph.kind_of(n) {
                    NodeKind::Utility => self.utilities[n][c] == sub.utilities[n][sc],
                    _ => self.cpds[n][c] == sub.cpds[n][sc],
                }
            })
        })
    }

    pub fn to_doc(&self) -> ModelDoc {
        let mut cpds = Map::new();
        for (n, rows) in &self.cpds {
            let mut table = Map::new();
            for (c, row) in rows.iter().enumerate() {
                let mut dist = Map::new();
                for (i, p) in row {
                    dist.insert(self.domains[n].value(*i).to_string(), Json::String(p.to_string()));
                }
                table.insert(self.context_label(n, c), Json::Object(dist));
            }
            cpds.insert(n.clone(), Json::Object(table));
        }
        let mut utilities = Map::new();
        for (n, rows) in &self.utilities {
            let table: Map<String, Json> =
                rows.iter().enumerate().map(|(c, v)| (self.context_label(n, c), Json::String(v.to_string()))).collect();
            utilities.insert(n.clone(), Json::Object(table));
        }
        ModelDoc {
            graph: self.graph.to_doc(),
            domains: self.domains.iter().map(|(n, d)| (n.clone(), d.labels())).collect(),
            cpds: Json::Object(cpds),
            utilities: Json::Object(utilities),
        }
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Self, ModelError> {
        let graph = IdGraph::from_doc(&doc.graph)?;
        let domains = doc
            .domains
            .iter()
            .map(|(n, labels)| Ok((n.clone(), Domain::new(labels.iter().map(|l| Value::parse(l)).collect::<Result<_, _>>()?)?)))
            .collect::<Result<BTreeMap<_, _>, ModelError>>()?;
        let shell = IdModel { graph: graph.clone(), domains: domains.clone(), cpds: BTreeMap::new(), utilities: BTreeMap::new() };
        for n in graph.nodes() {
            if !graph.is_utility(n) && !domains.contains_key(n) {
                return Err(ModelError::Malformed(format!("{n} has no domain")));
            }
        }
        let obj = |j: &Json, what: &str| -> Result<Map<String, Json>, ModelError> {
            j.as_object().cloned().ok_or_else(|| ModelError::Malformed(format!("{what} must be an object")))
        };
        let rat = |j: &Json| -> Result<Rational, ModelError> {
            match j {
                Json::String(s) => s.parse().map_err(|e: crate::rational::ParseRationalError| ModelError::Malformed(e.to_string())),
                Json::Number(x) => x.to_string().parse().map_err(|e: crate::rational::ParseRationalError| ModelError::Malformed(e.to_string())),
                _ => Err(ModelError::Malformed("numbers must be strings like \"1/2\"".into())),
            }
        };
        let mut cpds = BTreeMap::new();
        for (n, table) in obj(&doc.cpds, "cpds")? {
            if !domains.contains_key(&n) {
                return Err(ModelError::Malformed(format!("distribution for unknown node {n}")));
            }
            let lookup = shell.context_lookup(&n);
            let mut rows: Vec<Option<Dist>> = vec![None; lookup.len()];
            for (key, dist) in obj(&table, &n)? {
                let c = *lookup.get(&key).ok_or_else(|| ModelError::Malformed(format!("{n}: unknown context {key:?}")))?;
                let mut row = vec![];
                for (label, p) in obj(&dist, &n)? {
                    let i = domains[&n]
                        .index_of_label(&label)
                        .ok_or_else(|| ModelError::Malformed(format!("{n}: unknown value {label:?}")))?;
                    row.push((i, rat(&p)?));
                }
                rows[c] = Some(row);
            }
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(c, r)| r.ok_or_else(|| ModelError::Malformed(format!("{n}: missing context {}", shell.context_label(&n, c)))))
                .collect::<Result<_, _>>()?;
            cpds.insert(n, rows);
        }
        let mut utilities = BTreeMap::new();
        for (n, table) in obj(&doc.utilities, "utilities")? {
            if !graph.is_utility(&n) {
                return Err(ModelError::Malformed(format!("utility table for {n}")));
            }
            let lookup = shell.context_lookup(&n);
            let mut rows: Vec<Option<Rational>> = vec![None; lookup.len()];
            for (key, v) in obj(&table, &n)? {
                let c = *lookup.get(&key).ok_or_else(|| ModelError::Malformed(format!("{n}: unknown context {key:?}")))?;
                rows[c] = Some(rat(&v)?);
            }
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(c, r)| r.ok_or_else(|| ModelError::Malformed(format!("{n}: missing context {}", shell.context_label(&n, c)))))
                .collect::<Result<_, _>>()?;
            utilities.insert(n, rows);
        }
        IdModel::new(graph, domains, cpds, utilities)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(s).map_err(|e| ModelError::Malformed(e.to_string()))?;
        IdModel::from_doc(&doc)
    }

    /// `{"D": {"<context>": {"<value>": "p"}}}`.
    pub fn policy_to_json(&self, pi: &Policy) -> Json {
        let mut out = Map::new();
        for (d, rule) in &pi.rules {
            let mut table = Map::new();
            for (c, row) in rule.iter().enumerate() {
                let dist: Map<String, Json> =
                    row.iter().map(|(i, p)| (self.domains[d].value(*i).to_string(), Json::String(p.to_string()))).collect();
                table.insert(self.context_label(d, c), Json::Object(dist));
            }
            out.insert(d.clone(), Json::Object(table));
        }
        Json::Object(out)
    }

    pub fn policy_from_json(&self, j: &Json) -> Result<Policy, ModelError> {
        let obj = j.as_object().ok_or_else(|| ModelError::Malformed("policy must be an object".into()))?;
        let mut rules = BTreeMap::new();
        for (d, table) in obj {
            if !self.graph.is_decision(d) {
                return Err(ModelError::Malformed(format!("rule for non-decision {d}")));
            }
            let lookup = self.context_lookup(d);
            let mut rows: Vec<Option<Dist>> = vec![None; lookup.len()];
            let table = table.as_object().ok_or_else(|| ModelError::Malformed(format!("rule for {d} must be an object")))?;
            for (key, dist) in table {
                let c = *lookup.get(key).ok_or_else(|| ModelError::Malformed(format!("{d}: unknown context {key:?}")))?;
                let dist = dist.as_object().ok_or_else(|| ModelError::Malformed(format!("{d}: row must be an object")))?;
                let mut row = vec![];
                for (label, p) in dist {
                    let i = self.domains[d]
                        .index_of_label(label)
                        .ok_or_else(|| ModelError::Malformed(format!("{d}: unknown value {label:?}")))?;
                    let p: Rational = match p {
                        Json::String(s) => s.parse().map_err(|e: crate::rational::ParseRationalError| ModelError::Malformed(e.to_string()))?,
                        other => other.to_string().parse().map_err(|e: crate::rational::ParseRationalError| ModelError::Malformed(e.to_string()))?,
                    };
                    row.push((i, p));
                }
                rows[c] = Some(normalize_dist(row));
            }
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(c, r)| r.ok_or_else(|| ModelError::PolicyIncomplete(format!("{d}: missing context {}", self.context_label(d, c)))))
                .collect::<Result<_, _>>()?;
            rules.insert(d.clone(), rows);
        }
        let pi = Policy { rules };
        self.check_policy(&pi)?;
        Ok(pi)
    }
}

/// On-disk model form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub graph: GraphDoc,
    pub domains: BTreeMap<NodeId, Vec<String>>,
    pub cpds: Json,
    pub utilities: Json,
}

/// Positive-probability outcomes with utility values per outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Joint {
    /// Chance and decision nodes, in topological order.
    pub nodes: Vec<NodeId>,
    pub entries: Vec<(Vec<usize>, Rational)>,
    /// Per utility node, its value in each entry.
    pub utilities: BTreeMap<NodeId, Vec<Rational>>,
}

impl Joint {
    pub fn total(&self) -> Rational {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Marginal over `nodes` (value indices in the given order).
    pub fn marginal(&self, nodes: &[NodeId]) -> BTreeMap<Vec<usize>, Rational> {
        let pos: Vec<usize> = nodes.iter().map(|n| self.nodes.iter().position(|m| m == n).expect("node in joint")).collect();
        let mut out: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
        for (a, p) in &self.entries {
            *out.entry(pos.iter().map(|i| a[*i]).collect()).or_default() += p;
        }
        out
    }
}

/// A decision rule in compiled form.
#[derive(Debug, Clone)]
pub enum CompiledRule {
    Det(Vec<usize>),
    Stoch(Vec<Dist>),
    /// Every action with weight one; used to collect per-action values.
    All,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledUtility {
    pub parents: Vec<usize>,
    pub strides: Vec<usize>,
    pub table: Vec<Rational>,
}

/// Index-based form of a model for fast exact evaluation.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    /// Chance and decision nodes in topological order.
    pub order: Vec<NodeId>,
    pub pos: BTreeMap<NodeId, usize>,
    pub sizes: Vec<usize>,
    pub is_decision: Vec<bool>,
    pub parents: Vec<Vec<usize>>,
    pub strides: Vec<Vec<usize>>,
    pub cpds: Vec<Vec<Dist>>,
    /// Position of each decision in `order`, in `order`.
    pub decisions: Vec<usize>,
    pub(crate) utils: Vec<CompiledUtility>,
    pub util_names: Vec<NodeId>,
}

impl CompiledModel {
    pub fn new(m: &IdModel) -> Self {
        let order: Vec<NodeId> = m.graph.topological_order().into_iter().filter(|n| !m.graph.is_utility(n)).collect();
        let pos: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let sizes: Vec<usize> = order.iter().map(|n| m.domains[n].len()).collect();
        let layout = |n: &str| -> (Vec<usize>, Vec<usize>) {
            let ps: Vec<usize> = m.graph.parents(n).iter().map(|p| pos[p]).collect();
            let mut strides = vec![1; ps.len()];
            for i in (0..ps.len().saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * sizes[ps[i + 1]];
            }
            (ps, strides)
        };
        let mut parents = vec![];
        let mut strides = vec![];
        let mut cpds = vec![];
        let mut is_decision = vec![];
        for n in &order {
            let (p, s) = layout(n);
            parents.push(p);
            strides.push(s);
            is_decision.push(m.graph.is_decision(n));
            cpds.push(m.cpds.get(n).cloned().unwrap_or_default());
        }
        let util_names = m.graph.utilities();
        let utils = util_names
            .iter()
            .map(|u| {
                let (parents, strides) = layout(u);
                CompiledUtility { parents, strides, table: m.utilities[u].clone() }
            })
            .collect();
        let decisions = (0..order.len()).filter(|i| is_decision[*i]).collect();
        CompiledModel { order, pos, sizes, is_decision, parents, strides, cpds, decisions, utils, util_names }
    }

    #[inline]
    pub(crate) fn ctx(&self, parents: &[usize], strides: &[usize], assign: &[usize]) -> usize {
        parents.iter().zip(strides).map(|(p, s)| assign[*p] * s).sum()
    }

    /// Context index of the node at position `i`.
    #[inline]
    pub fn context(&self, i: usize, assign: &[usize]) -> usize {
        self.ctx(&self.parents[i], &self.strides[i], assign)
    }

    pub fn context_count(&self, i: usize) -> usize {
        self.parents[i].iter().map(|p| self.sizes[*p]).product()
    }

    /// Compiled rules, indexed like `decisions`.
    pub fn rules_of(&self, pi: &Policy) -> Vec<CompiledRule> {
        self.decisions
            .iter()
            .map(|i| {
                let rule = &pi.rules[&self.order[*i]];
                if rule.iter().all(|r| r.len() == 1) {
                    CompiledRule::Det(rule.iter().map(|r| r[0].0).collect())
                } else {
                    CompiledRule::Stoch(rule.clone())
                }
            })
            .collect()
    }

    /// Total utility of a full assignment.
    #[inline]
    pub fn utility_sum(&self, assign: &[usize]) -> Rational {
        let mut s = Rational::zero();
        for u in &self.utils {
            s += &u.table[self.ctx(&u.parents, &u.strides, assign)];
        }
        s
    }

    /// Calls `f(assignment, probability)` for every positive-probability outcome.
    pub fn for_each_outcome<F: FnMut(&[usize], &Rational)>(&self, rules: &[CompiledRule], mut f: F) {
        let dec_index: Vec<usize> = {
            let mut v = vec![usize::MAX; self.order.len()];
            for (k, i) in self.decisions.iter().enumerate() {
                v[*i] = k;
            }
            v
        };
        let mut assign = vec![0; self.order.len()];
        self.walk(0, &mut assign, &Rational::one(), rules, &dec_index, &mut f);
    }

    fn walk<F: FnMut(&[usize], &Rational)>(
        &self,
        i: usize,
        assign: &mut Vec<usize>,
        w: &Rational,
        rules: &[CompiledRule],
        dec_index: &[usize],
        f: &mut F,
    ) {
        if i == self.order.len() {
            f(assign, w);
            return;
        }
        let c = self.context(i, assign);
        if self.is_decision[i] {
            match &rules[dec_index[i]] {
                CompiledRule::Det(r) => {
                    assign[i] = r[c];
                    self.walk(i + 1, assign, w, rules, dec_index, f);
                }
                CompiledRule::Stoch(r) => {
                    for (v, p) in &r[c] {
                        assign[i] = *v;
                        self.walk(i + 1, assign, &(w * p), rules, dec_index, f);
                    }
                }
                CompiledRule::All => {
                    for v in 0..self.sizes[i] {
                        assign[i] = v;
                        self.walk(i + 1, assign, w, rules, dec_index, f);
                    }
                }
            }
        } else {
            for (v, p) in &self.cpds[i][c] {
                assign[i] = *v;
                self.walk(i + 1, assign, &(w * p), rules, dec_index, f);
            }
        }
    }

    pub fn expected_utility(&self, rules: &[CompiledRule]) -> Rational {
        let mut total = Rational::zero();
        self.for_each_outcome(rules, |a, w| {
            let u = self.utility_sum(a);
            if !u.is_zero() {
                total += &(w * &u);
            }
        });
        total
    }
}

/// A model and policy ported along a homomorphism.
#[derive(Debug, Clone)]
pub struct Transported {
    pub model: IdModel,
    pub policy: Option<Policy>,
}

/// Where each source node's value sits inside target values.
struct PortLayout {
    /// Target node to its preimage, sorted.
    pre: BTreeMap<NodeId, Vec<NodeId>>,
    /// Source node to (target node, component index).
    slot: BTreeMap<NodeId, (NodeId, usize)>,
}

impl PortLayout {
    fn new(h: &IdHom) -> Self {
        let mut pre: BTreeMap<NodeId, Vec<NodeId>> = h.target.nodes().map(|n| (n.clone(), vec![])).collect();
        for (s, t) in &h.map {
            pre.get_mut(t).expect("image in target").push(s.clone());
        }
        let mut slot = BTreeMap::new();
        for (t, ss) in &pre {
            for (i, s) in ss.iter().enumerate() {
                slot.insert(s.clone(), (t.clone(), i));
            }
        }
        PortLayout { pre, slot }
    }
}

/// Ports a model along `h` (from `h.source` to `h.target`): non-utility
/// domains become products over preimages, utilities are summed.
pub fn transport_model(h: &IdHom, m_src: &IdModel) -> Result<IdModel, ModelError> {
    if !h.is_verified() {
        return Err(ModelError::UnverifiedHom("transport needs a verified homomorphism".into()));
    }
    if m_src.graph != h.source {
        return Err(ModelError::Invalid("model is not on the homomorphism's source".into()));
    }
    let lay = PortLayout::new(h);
    let tg = &h.target;
    let mut domains = BTreeMap::new();
    for (t, ss) in &lay.pre {
        if !tg.is_utility(t) {
            let factors: Vec<&Domain> = ss.iter().map(|s| &m_src.domains[s]).collect();
            domains.insert(t.clone(), Domain::product(&factors));
        }
    }
    let shell = IdModel { graph: tg.clone(), domains: domains.clone(), cpds: BTreeMap::new(), utilities: BTreeMap::new() };
    let mut cpds = BTreeMap::new();
    let mut utilities = BTreeMap::new();
    for t in tg.nodes() {
        let ss = &lay.pre[t];
        match tg.kind_of(t) {
            NodeKind::Decision => {}
            NodeKind::Chance => {
                let rows = (0..shell.context_count(t))
                    .map(|c| {
                        let env = target_env(&shell, t, c);
                        joint_of_copies(m_src, &lay, t, ss, &env, &domains[t], |s, sc| m_src.cpds[s][sc].clone())
                    })
                    .collect();
                cpds.insert(t.clone(), rows);
            }
            NodeKind::Utility => {
                let rows = (0..shell.context_count(t))
                    .map(|c| {
                        let env = target_env(&shell, t, c);
                        ss.iter()
                            .map(|s| {
                                let sc = source_context(m_src, &lay, s, &env, &[]);
                                m_src.utilities[s][sc].clone()
                            })
                            .sum()
                    })
                    .collect();
                utilities.insert(t.clone(), rows);
            }
        }
    }
    IdModel::new(tg.clone(), domains, cpds, utilities)
}

/// Ports a policy along `h`, given the source model and the ported model.
pub fn transport_policy(h: &IdHom, m_src: &IdModel, m_tgt: &IdModel, pi: &Policy) -> Result<Policy, ModelError> {
    m_src.check_policy(pi)?;
    let lay = PortLayout::new(h);
    let mut rules = BTreeMap::new();
    for t in h.target.decisions() {
        let ss = &lay.pre[&t];
        let rule = (0..m_tgt.context_count(&t))
            .map(|c| {
                let env = target_env(m_tgt, &t, c);
                joint_of_copies(m_src, &lay, &t, ss, &env, &m_tgt.domains[&t], |s, sc| pi.rules[s][sc].clone())
            })
            .collect();
        rules.insert(t, rule);
    }
    Ok(Policy { rules })
}

/// Ports a model and, optionally, a policy.
pub fn transport(h: &IdHom, m_src: &IdModel, pi: Option<&Policy>) -> Result<Transported, ModelError> {
    let model = transport_model(h, m_src)?;
    let policy = pi.map(|p| transport_policy(h, m_src, &model, p)).transpose()?;
    Ok(Transported { model, policy })
}

/// Target parent values of context `c`, as tuples.
fn target_env(m_tgt: &IdModel, t: &str, c: usize) -> BTreeMap<NodeId, Vec<Value>> {
    let vals = m_tgt.decode_context(t, c);
    m_tgt
        .parents(t)
        .into_iter()
        .zip(vals)
        .map(|(p, v)| {
            let comps = match m_tgt.domains[&p].value(v) {
                Value::Tuple(xs) => xs.clone(),
                other => vec![other.clone()],
            };
            (p, comps)
        })
        .collect()
}

/// Source context of `s`, reading parents that are copies of the same target
/// node from `own` (values chosen so far for the copies, in preimage order).
fn source_context(m_src: &IdModel, lay: &PortLayout, s: &str, env: &BTreeMap<NodeId, Vec<Value>>, own: &[Option<usize>]) -> usize {
    let (self_t, _) = &lay.slot[s];
    let vals: Vec<usize> = m_src
        .graph
        .parents(s)
        .iter()
        .map(|p| {
            let (t, i) = &lay.slot[p];
            if t == self_t {
                own[*i].expect("copy parents are assigned first")
            } else {
                m_src.domains[p].index_of(&env[t][*i]).expect("component in source domain")
            }
        })
        .collect();
    m_src.encode_context(s, &vals)
}

/// Joint distribution of the copies `ss` of target node `t`, as a
/// distribution over `t`'s product domain.
fn joint_of_copies(
    m_src: &IdModel,
    lay: &PortLayout,
    t: &str,
    ss: &[NodeId],
    env: &BTreeMap<NodeId, Vec<Value>>,
    dom_t: &Domain,
    row: impl Fn(&str, usize) -> Dist,
) -> Dist {
    let order: Vec<usize> = {
        let topo = m_src.graph.topological_order();
        let mut idx: Vec<usize> = (0..ss.len()).collect();
        idx.sort_by_key(|i| topo.iter().position(|n| *n == ss[*i]));
        idx
    };
    let mut out: Dist = vec![];
    let mut own: Vec<Option<usize>> = vec![None; ss.len()];
    fn rec(
        k: usize,
        order: &[usize],
        ss: &[NodeId],
        own: &mut Vec<Option<usize>>,
        w: Rational,
        ctx: &dyn Fn(&str, &[Option<usize>]) -> usize,
        row: &dyn Fn(&str, usize) -> Dist,
        emit: &mut dyn FnMut(&[Option<usize>], Rational),
    ) {
        if k == order.len() {
            emit(own, w);
            return;
        }
        let i = order[k];
        let c = ctx(&ss[i], own);
        for (v, p) in row(&ss[i], c) {
            own[i] = Some(v);
            rec(k + 1, order, ss, own, &w * &p, ctx, row, emit);
        }
        own[i] = None;
    }
    let ctx = |s: &str, own: &[Option<usize>]| source_context(m_src, lay, s, env, own);
    let mut emit = |own: &[Option<usize>], w: Rational| {
        let tuple = Value::Tuple(own.iter().zip(ss).map(|(v, s)| m_src.domains[s].value(v.unwrap()).clone()).collect());
        let idx = dom_t.index_of(&tuple).unwrap_or_else(|| panic!("value of {t} in product domain"));
        out.push((idx, w));
    };
    rec(0, &order, ss, &mut own, Rational::one(), &ctx, &row, &mut emit);
    normalize_dist(out)
}

/// Exact check of the equivalence of `(m_src, pi_src)` and `(m, pi)` along `h`:
/// the joint of the target's non-utility nodes equals the pushed-forward
/// source joint, and each target utility is distributed as the sum of its
/// preimage utilities.
pub fn equivalent(m: &IdModel, pi: &Policy, m_src: &IdModel, pi_src: &Policy, h: &IdHom) -> Result<bool, ModelError> {
    let lay = PortLayout::new(h);
    let js = m_src.joint(pi_src)?;
    let jt = m.joint(pi)?;
    let src_pos: BTreeMap<&NodeId, usize> = js.nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    type Key = (Vec<usize>, Vec<Rational>);
    let mut pushed: BTreeMap<Key, Rational> = BTreeMap::new();
    for (e, (a, p)) in js.entries.iter().enumerate() {
        let vals: Option<Vec<usize>> = jt
            .nodes
            .iter()
            .map(|t| {
                let tuple = Value::Tuple(lay.pre[t].iter().map(|s| m_src.domains[s].value(a[src_pos[s]]).clone()).collect());
                m.domains[t].index_of(&tuple)
            })
            .collect();
        let Some(vals) = vals else { return Ok(false) };
        let utils: Vec<Rational> = h
            .target
            .utilities()
            .iter()
            .map(|u| lay.pre[u].iter().map(|s| js.utilities[s][e].clone()).sum())
            .collect();
        *pushed.entry((vals, utils)).or_default() += p;
    }
    let mut target: BTreeMap<Key, Rational> = BTreeMap::new();
    for (e, (a, p)) in jt.entries.iter().enumerate() {
        let utils: Vec<Rational> = h.target.utilities().iter().map(|u| jt.utilities[u][e].clone()).collect();
        *target.entry((a.clone(), utils)).or_default() += p;
    }
    Ok(pushed == target)
}

/// Outcome of [`policy_bijection_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BijectionReport {
    pub source_policies: u128,
    pub target_policies: u128,
    /// Distinct target policies reached by transporting source policies.
    pub images: u128,
    /// Every source policy keeps its expected utility.
    pub eu_preserved: bool,
    /// Optimal source policies map exactly onto the optimal target policies.
    pub optimality_preserved: bool,
    pub optimum: String,
}

impl BijectionReport {
    /// Transport is onto the target's deterministic policies and respects
    /// expected utility and optimality.
    pub fn holds(&self) -> bool {
        self.images == self.target_policies && self.eu_preserved && self.optimality_preserved
    }
}

/// Enumerates deterministic policies on both sides and checks that transport
/// maps the source policies onto the target policies, keeping expected utility
/// and optimality. Sources with decisions that see their own copies have more
/// policies than the target, so the map is onto rather than one-to-one.
pub fn policy_bijection_check(h: &IdHom, m_src: &IdModel, cap: u64) -> Result<BijectionReport, ModelError> {
    let m_tgt = transport_model(h, m_src)?;
    let too_large = |what: &str, n: Option<u128>| -> Result<u128, ModelError> {
        match n {
            Some(n) if n <= cap as u128 => Ok(n),
            _ => Err(ModelError::TooLarge {
                what: what.into(),
                size: n.map(|n| n.to_string()).unwrap_or_else(|| "> 2^128".into()),
                cap,
            }),
        }
    };
    let ns = too_large("source policies", m_src.deterministic_policy_count())?;
    let nt = too_large("target policies", m_tgt.deterministic_policy_count())?;
    let tgt_eu: Vec<Rational> = all_deterministic(&m_tgt).map(|p| m_tgt.expected_utility(&p).expect("valid policy")).collect();
    let best_t = tgt_eu.iter().max().cloned().unwrap_or_default();
    let mut images: BTreeSet<Vec<(NodeId, Vec<usize>)>> = BTreeSet::new();
    let mut optimal_images: BTreeSet<Vec<(NodeId, Vec<usize>)>> = BTreeSet::new();
    let mut eu_preserved = true;
    let mut src_eus = vec![];
    for p in all_deterministic(m_src) {
        let eu_s = m_src.expected_utility(&p)?;
        let q = transport_policy(h, m_src, &m_tgt, &p)?;
        let det = q.as_deterministic().ok_or_else(|| ModelError::Invalid("transported policy is not deterministic".into()))?;
        let key: Vec<(NodeId, Vec<usize>)> = det.into_iter().collect();
        if m_tgt.expected_utility(&q)? != eu_s {
            eu_preserved = false;
        }
        images.insert(key.clone());
        src_eus.push((eu_s, key));
    }
    let best_s = src_eus.iter().map(|(e, _)| e.clone()).max().unwrap_or_default();
    for (e, k) in &src_eus {
        if *e == best_s {
            optimal_images.insert(k.clone());
        }
    }
    let target_optimal: BTreeSet<Vec<(NodeId, Vec<usize>)>> = all_deterministic(&m_tgt)
        .zip(&tgt_eu)
        .filter(|(_, e)| **e == best_t)
        .map(|(p, _)| p.as_deterministic().unwrap().into_iter().collect())
        .collect();
    Ok(BijectionReport {
        source_policies: ns,
        target_policies: nt,
        images: images.len() as u128,
        eu_preserved,
        optimality_preserved: best_s == best_t && optimal_images == target_optimal,
        optimum: best_t.to_string(),
    })
}

/// Iterates all deterministic policies in odometer order (last context of the
/// last decision varies fastest).
pub fn all_deterministic(m: &IdModel) -> impl Iterator<Item = Policy> + '_ {
    let slots: Vec<(NodeId, usize, usize)> = m
        .graph
        .decisions()
        .into_iter()
        .flat_map(|d| {
            let a = m.domains[&d].len();
            (0..m.context_count(&d)).map(move |c| (d.clone(), c, a))
        })
        .collect();
    let mut digits = vec![0usize; slots.len()];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mut rules: BTreeMap<NodeId, Vec<usize>> =
            m.graph.decisions().into_iter().map(|d| (d.clone(), vec![0; m.context_count(&d)])).collect();
        for ((d, c, _), v) in slots.iter().zip(&digits) {
            rules.get_mut(d).unwrap()[*c] = *v;
        }
        let mut i = slots.len();
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < slots[i].2 {
                break;
            }
            digits[i] = 0;
        }
        Some(Policy::deterministic(rules))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    /// `X` uniform, `U = 1` iff `D = X`.
    pub(crate) fn f1_model() -> IdModel {
        let g = fixtures::graph("F1").unwrap();
        let domains = BTreeMap::from([("X".to_string(), Domain::boolean()), ("D".to_string(), Domain::boolean())]);
        let cpds = BTreeMap::from([("X".to_string(), vec![uniform(2)])]);
        // Parents of U in order (D, X).
        let u = vec![Rational::one(), Rational::zero(), Rational::zero(), Rational::one()];
        IdModel::new(g, domains, cpds, BTreeMap::from([("U".to_string(), u)])).unwrap()
    }

    fn det(pairs: &[(&str, &[usize])]) -> Policy {
        Policy::deterministic(pairs.iter().map(|(d, r)| (d.to_string(), r.to_vec())).collect())
    }

    #[test]
    fn f1_expected_utilities() {
        let m = f1_model();
        assert!(m.validate().is_empty());
        assert_eq!(m.expected_utility(&det(&[("D", &[0, 1])])).unwrap(), Rational::one());
        assert_eq!(m.expected_utility(&det(&[("D", &[0, 0])])).unwrap(), Rational::new(1, 2));
        assert_eq!(m.joint(&m.uniform_policy()).unwrap().total(), Rational::one());
    }

    #[test]
    fn invalid_rows_are_reported() {
        let mut m = f1_model();
        m.cpds.insert("X".into(), vec![vec![(0, Rational::new(3, 4))]]);
        assert!(m.validate().iter().any(|e| e.contains("sums to 3/4")));
        let mut m = f1_model();
        m.utilities.insert("U".into(), vec![Rational::one()]);
        assert!(m.validate().iter().any(|e| e.contains("rows")));
    }

    #[test]
    fn json_round_trip() {
        let m = f1_model();
        let back = IdModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let pi = det(&[("D", &[1, 0])]);
        assert_eq!(m.policy_from_json(&m.policy_to_json(&pi)).unwrap(), pi);
    }

    #[test]
    fn value_labels_round_trip() {
        let v = Value::Tuple(vec![Value::Bits(vec![true, false]), Value::Tuple(vec![Value::Atom("a".into()), Value::Tuple(vec![])])]);
        assert_eq!(v.to_string(), "(#10,(a,()))");
        assert_eq!(Value::parse(&v.to_string()).unwrap(), v);
        assert_eq!(Domain::bits(2).labels(), vec!["#00", "#01", "#10", "#11"]);
    }

    #[test]
    fn remove_and_lift() {
        let m = f1_model();
        assert_eq!(m.remove_infolink("X", "U").unwrap_err(), ModelError::NotAnInfolink("X".into(), "U".into()));
        assert_eq!(m.remove_infolink("D", "X").unwrap_err(), ModelError::NoSuchEdge("D".into(), "X".into()));
        let r = m.remove_infolink("X", "D").unwrap();
        assert!(r.graph.parents("D").is_empty());
        let pi = det(&[("D", &[1])]);
        let lifted = m.lift_policy(&pi, "X", "D");
        assert_eq!(m.expected_utility(&lifted).unwrap(), r.expected_utility(&pi).unwrap());
    }

    #[test]
    fn identity_transport_is_identity() {
        let m = f1_model();
        let h = IdHom::identity(&m.graph);
        let pi = det(&[("D", &[0, 1])]);
        let t = transport(&h, &m, Some(&pi)).unwrap();
        assert!(equivalent(&t.model, t.policy.as_ref().unwrap(), &m, &pi, &h).unwrap());
        assert_eq!(t.model.expected_utility(t.policy.as_ref().unwrap()).unwrap(), Rational::one());
    }

    #[test]
    fn green_hom_products_and_onto_policies() {
        let chain = fixtures::fig1_chain();
        let green = &chain[1];
        let g = &green.source;
        let domains = BTreeMap::from([("D".to_string(), Domain::boolean()), ("D'".to_string(), Domain::boolean())]);
        // U parents (D, D'): pays 1 iff they differ.
        let u = vec![Rational::zero(), Rational::one(), Rational::one(), Rational::zero()];
        let m = IdModel::new(g.clone(), domains, BTreeMap::new(), BTreeMap::from([("U".to_string(), u)])).unwrap();
        let t = transport_model(green, &m).unwrap();
        assert_eq!(t.domains["D"].len(), 4);
        let rep = policy_bijection_check(green, &m, 1 << 20).unwrap();
        assert_eq!((rep.source_policies, rep.target_policies, rep.images), (8, 4, 4));
        assert!(rep.holds(), "{rep:?}");
        let pi = det(&[("D", &[1]), ("D'", &[1, 0])]);
        let tp = transport_policy(green, &m, &t, &pi).unwrap();
        assert!(equivalent(&t, &tp, &m, &pi, green).unwrap());
        let mut off = t.clone();
        off.utilities.get_mut("U").unwrap()[0] = Rational::new(1, 1000);
        let uniform_t = t.uniform_policy();
        let uniform_s = m.uniform_policy();
        assert!(!equivalent(&off, &transport_policy(green, &m, &t, &uniform_s).unwrap(), &m, &uniform_s, green).unwrap());
        assert!(!uniform_t.is_deterministic());
    }

    #[test]
    fn unverified_hom_is_refused() {
        let m = f1_model();
        let h = IdHom::new(m.graph.clone(), m.graph.clone(), m.graph.nodes().map(|n| (n.clone(), n.clone())).collect()).unwrap();
        assert!(matches!(transport_model(&h, &m), Err(ModelError::UnverifiedHom(_))));
    }

    #[test]
    fn odometer_enumerates_every_policy_once() {
        let m = f1_model();
        let all: Vec<_> = all_deterministic(&m).map(|p| p.as_deterministic().unwrap()).collect();
        assert_eq!(all.len(), 4);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 4);
    }
}
