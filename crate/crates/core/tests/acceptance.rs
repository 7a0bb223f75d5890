//! The twelve acceptance criteria. Runs without the libtest harness so that
//! each criterion prints exactly one `PASS` or `FAIL` line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use idvoi::analysis::{is_soluble, minimal_d_reduction, reduce_with, voi_criterion, Verdict};
use idvoi::fixtures;
use idvoi::graph::{IdGraph, NodeId};
use idvoi::hom::IdHom;
use idvoi::model::{equivalent, policy_bijection_check, transport};
use idvoi::normalize::{normal_form_stages, to_normal_form};
use idvoi::random::{random_model, random_policy, random_soluble_graph, rng};
use idvoi::rational::Rational;
use idvoi::solver::{backward_induction, enumerate_optimal, voi, SolverConfig};
use idvoi::systems::normal_form_check;
use idvoi::witness::{check_taskified, voc_witness, voi_witness, Certificate, Level, WitnessConfig};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    ensure(e < limit, || format!("took {e:.2?}, limit {limit:?}"))?;
    Ok(e)
}

fn fixture(name: &str) -> IdGraph {
    fixtures::graph(name).expect("known fixture")
}

/// Chance-to-decision links of the minimal d-reduction.
fn reduced_links(g: &IdGraph) -> Vec<(NodeId, NodeId)> {
    let (gstar, _) = minimal_d_reduction(g);
    gstar.infolinks().into_iter().filter(|(x, _)| gstar.is_chance(x)).collect()
}

fn soluble_fixtures() -> Vec<&'static str> {
    fixtures::NAMES.into_iter().filter(|n| is_soluble(&fixture(n)).soluble).collect()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let w = voi_witness(&fixture("F1"), "X", "D", &WitnessConfig::default()).map_err(|e| e.to_string())?;
    for c in &w.report.certificates {
        ensure(*c.value() == Rational::new(1, 2), || format!("{:?} level gives {}", c.level(), c.value()))?;
    }
    let m = fixtures::model("F1").unwrap().unwrap();
    let direct = voi(&m, "X", "D", &SolverConfig::default()).map_err(|e| e.to_string())?;
    ensure(direct == Rational::new(1, 2), || format!("fixture model gives {direct}"))?;
    let e = within(t, Duration::from_secs(1))?;
    Ok(format!("VoI(X, D) = 1/2 at every level in {e:.2?}"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let w = voi_witness(&fixture("F3"), "X", "D", &WitnessConfig::default()).map_err(|e| e.to_string())?;
    ensure(w.parameterized.tree.systems.len() == 2, || "expected two systems".into())?;
    for c in &w.report.certificates {
        let Certificate::Voi { level, with_link, without_link, value } = c else { return Err("not a VoI certificate".into()) };
        ensure(*with_link == Rational::from_int(2), || format!("{level:?}: EU with link {with_link}"))?;
        ensure(*without_link < Rational::from_int(2), || format!("{level:?}: EU without link {without_link}"))?;
        ensure(value.is_positive(), || format!("{level:?}: VoI {value}"))?;
    }
    let e = within(t, Duration::from_secs(10))?;
    let Certificate::Voi { without_link, .. } = &w.report.certificates[0] else { unreachable!() };
    Ok(format!("EU* = 2 with the link, {without_link} without, in {e:.2?}"))
}

/// Smallest policy space any model on `g` can have.
fn binary_policy_count(g: &IdGraph) -> u128 {
    g.decisions().iter().fold(1u128, |acc, d| acc.saturating_mul(1u128.checked_shl(1 << g.parents(d).len()).unwrap_or(u128::MAX)))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let cfg = SolverConfig::default();
    let mut r = rng(3);
    let mut graphs = 0;
    let mut checks = 0;
    while graphs < 10 {
        let g = random_soluble_graph(&mut r, 8);
        let zero: Vec<(NodeId, NodeId)> = g
            .infolinks()
            .into_iter()
            .filter(|(x, d)| g.is_chance(x) && voi_criterion(&g, x, d) == Ok(Verdict::Zero))
            .collect();
        if zero.is_empty() || binary_policy_count(&g) > 1 << 16 {
            continue;
        }
        let mut models = 0;
        let mut attempts = 0;
        while models < 50 {
            attempts += 1;
            ensure(attempts < 10_000, || format!("cannot sample enumerable models on {}", g.to_json()))?;
            let Some(m) = random_model(&mut r, &g, 3, 12) else { continue };
            if common::policy_count(&m) > 1 << 16 {
                continue;
            }
            models += 1;
            for (x, d) in &zero {
                let v = voi(&m, x, d, &cfg).map_err(|e| e.to_string())?;
                ensure(v.is_zero(), || format!("VoI({x}, {d}) = {v} on {}", m.to_json()))?;
                checks += 1;
            }
        }
        graphs += 1;
    }
    let e = within(t, Duration::from_secs(120))?;
    Ok(format!("{checks} zero-verdict links on 10 graphs x 50 models all have VoI 0, in {e:.2?}"))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let cfg = WitnessConfig::default();
    let mut cases: Vec<(String, IdGraph)> = soluble_fixtures().into_iter().map(|n| (n.to_string(), fixture(n))).collect();
    let mut r = rng(4);
    let mut random = 0;
    while random < 10 {
        let g = random_soluble_graph(&mut r, 8);
        if !reduced_links(&g).is_empty() {
            random += 1;
            cases.push((format!("random {random}"), g));
        }
    }
    let mut witnesses = 0;
    for (name, g) in &cases {
        for (x, d) in reduced_links(g) {
            let w = voi_witness(g, &x, &d, &cfg).map_err(|e| format!("{name}: {x} -> {d}: {e}"))?;
            ensure(w.report.positive(), || format!("{name}: {x} -> {d} not positive"))?;
            witnesses += 1;
        }
    }
    let e = within(t, Duration::from_secs(300))?;
    Ok(format!("{witnesses} witnesses with VoI > 0 over {} graphs, in {e:.2?}", cases.len()))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut removals = 0;
    let mut i = 0;
    while i < 25 {
        let g = random_soluble_graph(&mut r, 8);
        let (gstar, trace) = minimal_d_reduction(&g);
        if trace.removed.len() < 2 {
            continue;
        }
        i += 1;
        removals += trace.removed.len();
        for _ in 0..20 {
            let (other, _) = reduce_with(&g, |c| rand::Rng::gen_range(&mut r, 0..c.len()));
            ensure(other == gstar, || format!("graph {i}: two removal orders disagree on {}", g.to_json()))?;
        }
    }
    Ok(format!("25 graphs x 20 orders agree ({removals} removals in total, at least 2 per graph)"))
}

fn pipeline_cases() -> Vec<(String, IdGraph, NodeId, NodeId)> {
    let mut out = vec![];
    for n in soluble_fixtures() {
        let g = fixture(n);
        for (x, d) in reduced_links(&g) {
            out.push((n.to_string(), g.clone(), x, d));
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut stages = 0;
    for (name, g, x, d) in pipeline_cases() {
        let st = normal_form_stages(&g, &x, &d).map_err(|e| format!("{name} {x} -> {d}: {e}"))?;
        ensure(is_soluble(&st.reduced).soluble, || format!("{name}: reduction is insoluble"))?;
        for (label, s) in [("split", &st.split), ("frontdoor", &st.frontdoor), ("pruned", &st.pruned), ("result", &st.result)] {
            let mut h = s.hom.clone();
            h.verify().map_err(|e| format!("{name} {x} -> {d} {label}: {e}"))?;
            ensure(is_soluble(&s.graph).soluble, || format!("{name} {x} -> {d} {label}: insoluble"))?;
            stages += 1;
        }
        let composed = IdHom::compose_all(&[&st.split.hom, &st.frontdoor.hom, &st.pruned.hom]).map_err(|e| e.to_string())?;
        ensure(composed.is_verified() && composed.map == st.result.hom.map, || format!("{name}: composition differs"))?;
    }
    let chain = fixtures::fig1_chain();
    let refs: Vec<&IdHom> = chain.iter().collect();
    let composed = IdHom::compose_all(&refs).map_err(|e| format!("FIG1 chain: {e}"))?;
    ensure(composed.is_verified(), || "FIG1 chain does not verify".into())?;
    ensure(chain.iter().all(|h| is_soluble(&h.source).soluble), || "FIG1 chain leaves solubility".into())?;
    Ok(format!("{stages} stage homs and all compositions verify; every stage is soluble"))
}

fn criterion_7() -> Outcome {
    let cases: Vec<(String, IdHom)> = pipeline_cases()
        .into_iter()
        .map(|(n, g, x, d)| (format!("{n} {x} -> {d}"), to_normal_form(&g, &x, &d).unwrap().hom))
        .chain(fixtures::fig1_chain().into_iter().enumerate().map(|(i, h)| (format!("FIG1 step {i}"), h)))
        .collect();
    let mut r = rng(7);
    let mut triples = 0;
    let mut attempts = 0;
    while triples < 100 {
        attempts += 1;
        ensure(attempts < 10_000, || "cannot sample models on the fixture homs".into())?;
        let (name, h) = &cases[attempts % cases.len()];
        let Some(m) = random_model(&mut r, &h.source, 2, 14) else { continue };
        let pi = random_policy(&mut r, &m);
        let t = transport(h, &m, Some(&pi)).map_err(|e| format!("{name}: {e}"))?;
        let ok = equivalent(&t.model, t.policy.as_ref().unwrap(), &m, &pi, h).map_err(|e| e.to_string())?;
        ensure(ok, || format!("{name}: transported joint differs"))?;
        triples += 1;
    }
    let mut bijections = 0;
    for (name, h) in &cases {
        let Some(m) = random_model(&mut r, &h.source, 2, 12) else { continue };
        if common::policy_count(&m) > 1 << 14 {
            continue;
        }
        let b = policy_bijection_check(h, &m, 1 << 14).map_err(|e| format!("{name}: {e}"))?;
        ensure(b.holds(), || format!("{name}: {b:?}"))?;
        bijections += 1;
    }
    ensure(bijections > 0, || "no enumerable fixture".into())?;
    Ok(format!("{triples} triples equivalent; policy transport onto and optimality-preserving on {bijections} homs"))
}

fn criterion_8() -> Outcome {
    let mut n = 0;
    for (name, g, x, d) in pipeline_cases() {
        let nf = to_normal_form(&g, &x, &d).map_err(|e| format!("{name}: {e}"))?;
        let v = normal_form_check(&nf.graph, &nf.tree);
        ensure(v.holds(), || format!("{name} {x} -> {d}: {:?}", v.witnesses))?;
        let root = nf.tree.root();
        ensure(nf.hom.image(&root.info_node) == &x && nf.hom.image(&root.decision) == &d, || {
            format!("{name}: root maps to {} -> {}", nf.hom.image(&root.info_node), nf.hom.image(&root.decision))
        })?;
        n += 1;
    }
    Ok(format!("{n} fixture links normalize with (a), (b), (c) and the root link preserved"))
}

fn criterion_9() -> Outcome {
    let cfg = SolverConfig::default();
    let mut r = rng(9);
    let mut n = 0;
    while n < 100 {
        let g = random_soluble_graph(&mut r, 8);
        let Some(m) = random_model(&mut r, &g, 3, 14) else { continue };
        if common::policy_count(&m) > 1 << 16 {
            continue;
        }
        let ordering = is_soluble(&g).ordering.unwrap();
        let bi = backward_induction(&m, &ordering).map_err(|e| e.to_string())?.eu;
        let en = enumerate_optimal(&m, &cfg).map_err(|e| e.to_string())?.eu;
        ensure(bi == en, || format!("BI {bi} vs enumeration {en} on {}", m.to_json()))?;
        n += 1;
    }
    Ok("backward induction equals enumeration on 100 models".into())
}

fn criterion_10() -> Outcome {
    let mut parts = vec![];
    for name in ["F1", "F3"] {
        let w = voi_witness(&fixture(name), "X", "D", &WitnessConfig::default()).map_err(|e| e.to_string())?;
        let o = w.parameterized.task_optimality(1 << 20).map_err(|e| e.to_string())?;
        ensure(o.holds(), || format!("{name}: {o:?}"))?;
        parts.push(format!("{name}: {} optimal = {} performing of {}", o.optimal, o.performing, o.policies));
    }
    Ok(parts.join("; "))
}

fn criterion_11() -> Outcome {
    let w = voi_witness(&fixture("F3"), "X", "D", &WitnessConfig::default()).map_err(|e| e.to_string())?;
    let p = &w.parameterized;
    let mut reports = vec![];
    for k in 0..p.tree.systems.len() {
        if let Some(rep) = p.knowledge_check(k).map_err(|e| e.to_string())? {
            ensure(rep.holds(), || format!("{rep:?}"))?;
            reports.push(rep);
        }
    }
    ensure(!reports.is_empty(), || "F3 has no non-directed system".into())?;
    let contexts: usize = reports.iter().map(|r| r.contexts).sum();
    Ok(format!("wrong question bits are 1/2 given the parents in {contexts} contexts of {} system(s)", reports.len()))
}

fn criterion_12() -> Outcome {
    let cfg = WitnessConfig { epsilon: Rational::new(1, 4), ..WitnessConfig::default() };
    let w = voc_witness(&fixture("F7"), "X", None, &cfg).map_err(|e| e.to_string())?;
    for c in &w.report.certificates {
        ensure(*c.value() == Rational::new(3, 4), || format!("{:?} level gives {}", c.level(), c.value()))?;
    }
    ensure(w.report.certificates.iter().any(|c| c.level() == Level::Original), || "no certificate on the input graph".into())?;
    let chk = check_taskified(&w.taskified, &w.base_model, &w.tasks, &cfg).map_err(|e| e.to_string())?;
    ensure(chk.holds(), || format!("{chk:?}"))?;
    Ok(format!(
        "VoC(X) = 3/4 at every level; {} optimal policies all perform tasks with constant added utilities",
        chk.optimal_policies
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("trivial-graph VoI", criterion_1),
        ("two-system example", criterion_2),
        ("soundness sweep", criterion_3),
        ("completeness sweep", criterion_4),
        ("d-reduction uniqueness", criterion_5),
        ("homomorphism suite", criterion_6),
        ("equivalence and transport", criterion_7),
        ("normal-form pipeline", criterion_8),
        ("solver oracle equality", criterion_9),
        ("optimal iff task", criterion_10),
        ("knowledge numerics", criterion_11),
        ("value of control", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
