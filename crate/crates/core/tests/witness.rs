//! Witness construction on random graphs, and the payoff rule for guesses.

use idvoi::analysis::{voc_criterion, voi_criterion, Verdict};
use idvoi::graph::{IdGraph, NodeKind::*};
use idvoi::random::{random_soluble_graph, rng};
use idvoi::rational::Rational;
use idvoi::witness::{check_taskified, voc_witness, voi_witness, UmaxRule, WitnessConfig};

fn doubled() -> WitnessConfig {
    WitnessConfig { umax: UmaxRule::DoubledForGuesses, ..WitnessConfig::default() }
}

#[test]
fn every_positive_verdict_gets_a_certified_witness() {
    let cfg = doubled();
    let mut r = rng(21);
    let (mut voi_count, mut voc_count) = (0, 0);
    for _ in 0..60 {
        let g = random_soluble_graph(&mut r, 8);
        let nodes: Vec<String> = g.nodes().cloned().collect();
        for d in g.decisions() {
            for x in &nodes {
                if voi_criterion(&g, x, &d) != Ok(Verdict::Positive) {
                    continue;
                }
                let w = voi_witness(&g, x, &d, &cfg).unwrap_or_else(|e| panic!("{x} -> {d}: {e} on {}", g.to_json()));
                assert!(w.report.positive());
                let o = w.parameterized.task_optimality(1 << 18);
                if let Ok(o) = o {
                    assert!(o.holds(), "{x} -> {d}: {o:?} on {}", g.to_json());
                }
                voi_count += 1;
            }
        }
        for x in nodes.iter().filter(|n| g.is_chance(n)) {
            if voc_criterion(&g, x) != Ok(Verdict::Positive) {
                continue;
            }
            let w = voc_witness(&g, x, None, &cfg).unwrap_or_else(|e| panic!("{x}: {e} on {}", g.to_json()));
            assert!(w.report.positive());
            let c = check_taskified(&w.taskified, &w.base_model, &w.tasks, &cfg).unwrap();
            assert!(c.holds(), "{x}: {c:?} on {}", g.to_json());
            voc_count += 1;
        }
    }
    assert!(voi_count > 20 && voc_count > 20, "{voi_count} {voc_count}");
}

#[test]
fn witness_reports_recheck() {
    let cfg = WitnessConfig::default();
    let mut r = rng(22);
    let mut n = 0;
    while n < 10 {
        let g = random_soluble_graph(&mut r, 7);
        let Some((x, d)) = g.infolinks().into_iter().find(|(x, d)| voi_criterion(&g, x, d) == Ok(Verdict::Positive)) else {
            continue;
        };
        let w = voi_witness(&g, &x, &d, &cfg).unwrap();
        assert!(w.report.recheck(&cfg).unwrap());
        let mut tampered = w.report.clone();
        let u = tampered.model.utilities.keys().next().unwrap().clone();
        tampered.model.utilities.get_mut(&u).unwrap()[0] += Rational::one();
        assert!(!tampered.recheck(&cfg).unwrap());
        n += 1;
    }
}

/// A non-directed system whose decision can name a wrong index and still
/// match the question bit half the time.
fn guessing_graph() -> IdGraph {
    let nodes = [
        ("C0", Chance),
        ("C1", Chance),
        ("C2", Chance),
        ("C3", Chance),
        ("C4", Chance),
        ("C5", Chance),
        ("D0", Decision),
        ("U0", Utility),
    ];
    let edges = [
        ("C0", "C1"),
        ("C0", "C4"),
        ("C0", "D0"),
        ("C1", "D0"),
        ("C1", "U0"),
        ("C2", "D0"),
        ("C3", "C0"),
        ("C3", "C1"),
        ("C3", "C2"),
        ("C3", "C4"),
        ("C3", "D0"),
        ("C3", "U0"),
        ("C4", "D0"),
        ("C4", "U0"),
        ("C5", "C1"),
        ("C5", "C2"),
        ("C5", "C3"),
        ("C5", "C4"),
        ("C5", "U0"),
        ("D0", "U0"),
    ];
    IdGraph::from_slices(&nodes, &edges).unwrap()
}

#[test]
fn range_sum_payoff_ties_on_guesses_and_doubling_breaks_the_tie() {
    let g = guessing_graph();
    let base = WitnessConfig::default();
    assert_eq!(base.umax, UmaxRule::RangeSum);
    let w = voc_witness(&g, "C2", None, &base).unwrap();
    assert!(w.report.certificates.iter().all(|c| *c.value() == Rational::new(3, 4)));
    let c = check_taskified(&w.taskified, &w.base_model, &w.tasks, &base).unwrap();
    assert!(c.extends_input);
    assert!(!c.tasks_performed, "{c:?}");

    let cfg = doubled();
    let w = voc_witness(&g, "C2", None, &cfg).unwrap();
    assert!(w.report.certificates.iter().all(|c| *c.value() == Rational::new(3, 4)));
    let c = check_taskified(&w.taskified, &w.base_model, &w.tasks, &cfg).unwrap();
    assert!(c.holds(), "{c:?}");
}
