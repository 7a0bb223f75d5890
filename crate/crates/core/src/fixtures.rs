//! Named example diagrams.
//!
//! | name | content |
//! |------|---------|
//! | `F1` | `X -> D`, `X -> U`, `D -> U` |
//! | `F2` | `D -> D'`, `D' -> U`, `D -> U` |
//! | `F3` | two-decision graph whose second decision sees a bit of `Q'` picked by `D` |
//! | `F5` | two-step supervision POMDP |
//! | `F5-CIRL` | `F5` with the human's first action influencing the next state |
//! | `F6` | `D1 -> U`, `D2 -> U` (insoluble) |
//! | `F7` | chain `X -> D -> Y -> U` with a side path `X -> W -> U` |
//! | `FIG1` | `Y -> D`, `Y -> U`, `D -> U` |
//!
//! `F3` lets `D'` recall `D` and `X`; without those links the graph is not
//! soluble.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::FixtureError;
use crate::graph::{IdGraph, NodeId, NodeKind::*};
use crate::hom::{copy_delete_transform, prune_links, IdHom};
use crate::model::{uniform, Domain, IdModel};
use crate::rational::Rational;

/// All fixture names.
pub const NAMES: [&str; 8] = ["F1", "F2", "F3", "F5", "F5-CIRL", "F6", "F7", "FIG1"];

/// The fixture graph called `name` (case-insensitive).
pub fn graph(name: &str) -> Result<IdGraph, FixtureError> {
    let g = match name.to_ascii_uppercase().as_str() {
        "F1" => IdGraph::from_slices(&[("X", Chance), ("D", Decision), ("U", Utility)], &[("X", "D"), ("X", "U"), ("D", "U")]),
        "F2" => IdGraph::from_slices(
            &[("D", Decision), ("D'", Decision), ("U", Utility)],
            &[("D", "D'"), ("D'", "U"), ("D", "U")],
        ),
        "F3" => IdGraph::from_slices(
            &[("X", Chance), ("D", Decision), ("V", Chance), ("Q'", Chance), ("X'", Chance), ("D'", Decision), ("U", Utility)],
            &[
                ("X", "D"),
                ("D", "V"),
                ("Q'", "X'"),
                ("V", "X'"),
                ("X'", "D'"),
                ("D'", "U"),
                ("Q'", "U"),
                ("X", "U"),
                ("D", "D'"),
                ("X", "D'"),
            ],
        ),
        "F5" => supervision_pomdp(false),
        "F5-CIRL" => supervision_pomdp(true),
        "F6" => IdGraph::from_slices(&[("D1", Decision), ("D2", Decision), ("U", Utility)], &[("D1", "U"), ("D2", "U")]),
        "F7" => IdGraph::from_slices(
            &[("X", Chance), ("D", Decision), ("Y", Chance), ("W", Chance), ("U", Utility)],
            &[("X", "D"), ("D", "Y"), ("Y", "U"), ("X", "W"), ("W", "U")],
        ),
        "FIG1" => IdGraph::from_slices(&[("Y", Chance), ("D", Decision), ("U", Utility)], &[("Y", "D"), ("Y", "U"), ("D", "U")]),
        _ => return Err(FixtureError::UnknownFixture(name.to_string())),
    };
    Ok(g.expect("fixture graphs are valid"))
}

/// Two steps: a hidden reward parameter `Theta`, states `S1 -> S2`, human
/// suggestions `AH_i` seen by the agent's actions `A_i`, rewards `R2`, `R3`.
fn supervision_pomdp(cirl: bool) -> Result<IdGraph, crate::error::GraphError> {
    let mut edges = vec![
        ("Theta", "AH1"),
        ("Theta", "AH2"),
        ("Theta", "R2"),
        ("Theta", "R3"),
        ("S1", "AH1"),
        ("S1", "S2"),
        ("S1", "R2"),
        ("S2", "AH2"),
        ("S2", "R3"),
        ("AH1", "A1"),
        ("AH2", "A2"),
        ("A1", "R2"),
        ("A2", "R3"),
    ];
    if cirl {
        edges.push(("AH1", "S2"));
    }
    IdGraph::from_slices(
        &[
            ("Theta", Chance),
            ("S1", Chance),
            ("S2", Chance),
            ("AH1", Chance),
            ("AH2", Chance),
            ("A1", Decision),
            ("A2", Decision),
            ("R2", Utility),
            ("R3", Utility),
        ],
        &edges,
    )
}

/// The quantitative model shipped with a fixture, if it has one.
///
/// `F1`: `X` uniform over `{0,1}`, `D` boolean, `U = 1` iff `D = X`.
pub fn model(name: &str) -> Result<Option<IdModel>, FixtureError> {
    let g = graph(name)?;
    Ok(match name.to_ascii_uppercase().as_str() {
        "F1" => {
            let domains = BTreeMap::from([("X".to_string(), Domain::boolean()), ("D".to_string(), Domain::boolean())]);
            let cpds = BTreeMap::from([("X".to_string(), vec![uniform(2)])]);
            // U's parents are (D, X).
            let u = [1, 0, 0, 1].map(Rational::from_int).to_vec();
            Some(IdModel::new(g, domains, cpds, BTreeMap::from([("U".to_string(), u)])).expect("valid fixture model"))
        }
        _ => None,
    })
}

/// The three homomorphisms of the worked transformation sequence on `FIG1`:
/// delete `Y`, copy `D` into `D, D'`, prune `D' -> U`. Returned outermost
/// first, ready for [`IdHom::compose_all`].
pub fn fig1_chain() -> Vec<IdHom> {
    let g = graph("FIG1").expect("known fixture");
    let (g1, blue) = copy_delete_transform(&g, &BTreeMap::from([("Y".to_string(), vec![])])).expect("deletion is homomorphic");
    let copies: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::from([("D".into(), vec!["D".into(), "D'".into()])]);
    let (g2, green) = copy_delete_transform(&g1, &copies).expect("copying is homomorphic");
    let keep: BTreeSet<(NodeId, NodeId)> = [("D".into(), "D'".into()), ("D".into(), "U".into())].into();
    let (_, red) = prune_links(&g2, &keep).expect("pruning keeps infolinks");
    vec![blue, green, red]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{is_soluble, minimal_d_reduction};

    #[test]
    fn every_fixture_builds() {
        for n in NAMES {
            assert!(graph(n).is_ok(), "{n}");
        }
        assert!(graph("nope").is_err());
    }

    #[test]
    fn f1_model_is_valid() {
        let m = model("F1").unwrap().unwrap();
        assert!(m.validate().is_empty());
        assert!(model("F2").unwrap().is_none());
    }

    #[test]
    fn solubility_of_fixtures() {
        for n in ["F1", "F2", "F3", "F5", "F5-CIRL", "F7", "FIG1"] {
            assert!(is_soluble(&graph(n).unwrap()).soluble, "{n}");
        }
        assert!(!is_soluble(&graph("F6").unwrap()).soluble);
    }

    #[test]
    fn f3_and_f5_are_their_own_reductions() {
        for n in ["F3", "F5"] {
            let g = graph(n).unwrap();
            assert_eq!(minimal_d_reduction(&g).0, g, "{n}");
        }
    }

    #[test]
    fn fig1_chain_composes() {
        let chain = fig1_chain();
        let refs: Vec<&IdHom> = chain.iter().collect();
        assert!(IdHom::compose_all(&refs).unwrap().is_verified());
    }
}
