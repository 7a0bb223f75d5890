use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;
use tempfile::TempDir;

fn idvoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idvoi")).args(args).output().expect("binary runs")
}

/// `X -> D -> U`: both VoI and VoC verdicts for `X` are zero.
const ZERO_GRAPH: &str = r#"{"nodes":[{"id":"X","kind":"chance"},{"id":"D","kind":"decision"},{"id":"U","kind":"utility"}],"edges":[["X","D"],["D","U"]]}"#;

fn stdout_json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn validate(j: &Json, def: &str) {
    let mut schema: Json = serde_json::from_str(include_str!("../schemas/idvoi.schema.json")).unwrap();
    schema["$ref"] = Json::String(format!("#/definitions/{def}"));
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(j) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("output does not match {def}: {msgs:?}");
}

struct Fixtures {
    dir: TempDir,
}

impl Fixtures {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let o = idvoi(&["fixtures", "--all", "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        validate(&stdout_json(&o), "fixtures");
        Fixtures { dir }
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.path().join(file)
    }

    fn arg(&self, file: &str) -> String {
        self.path(file).to_str().unwrap().to_string()
    }
}

#[test]
fn fixtures_write_graphs_and_f1_model() {
    let f = Fixtures::new();
    for n in idvoi::fixtures::NAMES {
        assert!(f.path(&format!("{n}.json")).exists(), "{n}");
    }
    assert!(f.path("F1.model.json").exists());
    assert!(!f.path("F3.model.json").exists());
    let o = idvoi(&["fixtures", "NOPE", "--out", f.dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_reports_ordering_and_insolubility() {
    let f = Fixtures::new();
    let o = idvoi(&["check", "--graph", &f.arg("F1.json")]);
    assert!(o.status.success());
    let j = stdout_json(&o);
    validate(&j, "check");
    assert_eq!(j["verdict"], "soluble");
    assert_eq!(j["ordering"], serde_json::json!(["D"]));

    let o = idvoi(&["check", "--graph", &f.arg("F6.json")]);
    assert!(o.status.success());
    let j = stdout_json(&o);
    validate(&j, "check");
    assert_eq!(j["verdict"], "insoluble");
    assert!(j["failing_pair"].is_array());
    assert!(String::from_utf8_lossy(&o.stderr).contains("insoluble"));
}

#[test]
fn dsep_prints_verdict_and_path() {
    let f = Fixtures::new();
    let o = idvoi(&["dsep", "--graph", &f.arg("F1.json"), "--a", "X", "--b", "U", "--given", "D"]);
    let j = stdout_json(&o);
    validate(&j, "dsep");
    assert_eq!(j["verdict"], "connected");
    assert_eq!(j["path"], serde_json::json!(["X", "U"]));

    let o = idvoi(&["dsep", "--graph", &f.arg("F1.json"), "--a", "X", "--b", "Q"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_f1_reports_positive_voi() {
    let f = Fixtures::new();
    let dot = f.path("F1.dot");
    let o = idvoi(&["analyze", "--graph", &f.arg("F1.json"), "--sweep", "3", "--seed", "9", "--dot", dot.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "analyze");
    assert_eq!(j["voi"]["X→D"], "positive");
    assert_eq!(j["seed"], 9);
    assert!(std::fs::read_to_string(dot).unwrap().starts_with("digraph"));
}

#[test]
fn analyze_sweep_checks_zero_verdicts() {
    let f = Fixtures::new();
    let g = f.path("zero.json");
    std::fs::write(&g, ZERO_GRAPH).unwrap();
    let o = idvoi(&["analyze", "--graph", g.to_str().unwrap(), "--sweep", "4", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "analyze");
    assert_eq!(j["sweep"]["checked"], 2);
    assert_eq!(j["sweep"]["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn witness_voi_on_f1_certifies_one_half() {
    let f = Fixtures::new();
    let out = f.path("w.json");
    let o = idvoi(&["witness", "voi", "--graph", &f.arg("F1.json"), "--node", "X", "--decision", "D", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: Json = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    validate(&j, "witness");
    for c in j["certificates"].as_array().unwrap() {
        assert_eq!(c["voi"], "1/2");
    }
}

#[test]
fn witness_voc_on_f7_certifies_three_quarters() {
    let f = Fixtures::new();
    let o = idvoi(&["witness", "voc", "--graph", &f.arg("F7.json"), "--node", "X", "--epsilon", "1/4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "witness");
    assert_eq!(j["epsilon"], "1/4");
    for c in j["certificates"].as_array().unwrap() {
        assert_eq!(c["voc"], "3/4");
    }
}

#[test]
fn witness_refuses_zero_criterion_with_exit_2() {
    let f = Fixtures::new();
    let g = f.path("zero.json");
    std::fs::write(&g, ZERO_GRAPH).unwrap();
    let o = idvoi(&["witness", "voi", "--graph", g.to_str().unwrap(), "--node", "X", "--decision", "D"]);
    assert_eq!(o.status.code(), Some(2));
    let o = idvoi(&["witness", "voc", "--graph", &f.arg("F1.json"), "--node", "X", "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn caps_map_to_exit_3() {
    let f = Fixtures::new();
    let o = idvoi(&["witness", "voi", "--graph", &f.arg("F3.json"), "--node", "X", "--decision", "D", "--bit-cap", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = idvoi(&["solve", "--model", &f.arg("F1.model.json"), "--method", "enum", "--policy-cap", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = idvoi(&["solve", "--model", &f.arg("F1.model.json"), "--policy-cap", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_voi_voc_on_f1_model() {
    let f = Fixtures::new();
    let m = f.arg("F1.model.json");
    for method in ["auto", "enum", "bi"] {
        let o = idvoi(&["solve", "--model", &m, "--method", method]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let j = stdout_json(&o);
        validate(&j, "solve");
        assert_eq!(j["eu"], "1");
    }
    let j = stdout_json(&idvoi(&["voi", "--model", &m, "--link", "X", "D"]));
    validate(&j, "voi");
    assert_eq!(j["voi"], "1/2");
    assert_eq!(j["without_link"]["eu"], "1/2");
    let j = stdout_json(&idvoi(&["voc", "--model", &m, "--node", "X"]));
    validate(&j, "voc");
    assert_eq!(j["voc"], "0");
    let o = idvoi(&["voi", "--model", &m, "--link", "D", "U"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn normalize_writes_stages_that_verify() {
    let f = Fixtures::new();
    let dir = f.path("nf");
    let o = idvoi(&["normalize", "--graph", &f.arg("F3.json"), "--infolink", "X", "D", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "normalize");
    for s in j["stages"].as_array().unwrap() {
        assert_eq!(s["hom_verified"], true, "{}", s["stage"]);
        assert_eq!(s["soluble"], true, "{}", s["stage"]);
    }
    for stage in ["split", "frontdoor", "pruned", "result"] {
        let o = idvoi(&["hom", "verify", "--hom", dir.join(format!("{stage}.hom.json")).to_str().unwrap()]);
        assert!(o.status.success(), "{stage}");
        validate(&stdout_json(&o), "hom_verify");
    }
    let o = idvoi(&[
        "tree",
        "check",
        "--graph",
        dir.join("result.graph.json").to_str().unwrap(),
        "--tree",
        dir.join("result.tree.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "tree_check");
    assert_eq!(j["normal_form"]["a_position_uniqueness"], true);
    assert_eq!(j["normal_form"]["b_no_backdoor"], true);
    assert_eq!(j["normal_form"]["c_no_redundant_links"], true);
}

#[test]
fn hom_compose_matches_pipeline_result() {
    let f = Fixtures::new();
    let dir = f.path("nf");
    let o = idvoi(&["normalize", "--graph", &f.arg("F3.json"), "--infolink", "X", "D", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let h = |s: &str| dir.join(format!("{s}.hom.json")).to_str().unwrap().to_string();
    let o = idvoi(&["hom", "compose", "--hom", &h("split"), "--hom", &h("frontdoor"), "--hom", &h("pruned")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let composed = stdout_json(&o);
    validate(&composed, "hom");
    let result: Json = serde_json::from_str(&std::fs::read_to_string(h("result")).unwrap()).unwrap();
    assert_eq!(composed["map"], result["map"]);

    let o = idvoi(&["hom", "compose", "--hom", &h("pruned"), "--hom", &h("split")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tree_build_then_check() {
    let f = Fixtures::new();
    let t = f.path("tree.json");
    let o = idvoi(&["tree", "build", "--graph", &f.arg("F3.json"), "--infolink", "X", "D", "--out", t.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tree: Json = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    validate(&tree, "tree");
    assert_eq!(tree["systems"].as_array().unwrap().len(), 2);
    let o = idvoi(&["tree", "check", "--graph", &f.arg("F3.json"), "--tree", t.to_str().unwrap(), "--reduce"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["full"], true);
    let g = f.path("insoluble.json");
    std::fs::write(
        &g,
        r#"{"nodes":[{"id":"X","kind":"chance"},{"id":"D1","kind":"decision"},{"id":"D2","kind":"decision"},{"id":"U","kind":"utility"}],
            "edges":[["X","D1"],["X","U"],["D1","U"],["D2","U"]]}"#,
    )
    .unwrap();
    let o = idvoi(&["tree", "build", "--graph", g.to_str().unwrap(), "--infolink", "X", "D1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn taskify_with_check() {
    let f = Fixtures::new();
    let o = idvoi(&["taskify", "--model", &f.arg("F1.model.json"), "--task", "X:D", "--check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = stdout_json(&o);
    validate(&j, "taskify");
    assert_eq!(j["check"]["tasks_performed"], true);
    assert_eq!(j["check"]["added_constant"], true);
    let o = idvoi(&["taskify", "--model", &f.arg("F1.model.json"), "--task", "X:D=0,1,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let f = Fixtures::new();
    let args = ["witness", "voc", "--graph", &f.arg("F7.json"), "--node", "X"];
    assert_eq!(idvoi(&args).stdout, idvoi(&args).stdout);
    let args = ["analyze", "--graph", &f.arg("F3.json"), "--sweep", "2", "--seed", "5"];
    assert_eq!(idvoi(&args).stdout, idvoi(&args).stdout);
}

#[test]
fn malformed_input_is_a_validation_error() {
    let f = Fixtures::new();
    let bad = f.path("bad.json");
    std::fs::write(&bad, "{\"nodes\": 3}").unwrap();
    assert_eq!(idvoi(&["check", "--graph", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(idvoi(&["check", "--graph", Path::new("/nonexistent/g.json").to_str().unwrap()]).status.code(), Some(1));
}
