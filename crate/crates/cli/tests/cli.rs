use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kbenrich(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbenrich"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 24 entities in two classes with class-specific properties; the
/// director values point at person entities.
fn write_kb(path: &Path) {
    let mut out = String::new();
    for i in 0..12 {
        let e = format!("film{i:02}");
        out += &format!("{e}\ttype\tFilm\tclass\n{e}\ttitle\tTitle {i}\tliteral\n");
        out += &format!("{e}\tdirector\tperson{:02}\tentity\n", i % 6);
        if i % 2 == 0 {
            out += &format!("{e}\tyear\t{}\tliteral\n", 1990 + i);
        }
        if i % 3 != 0 {
            out += &format!("{e}\tgenre\tgenre{}\tliteral\n", i % 4);
        }
        if i % 4 != 1 {
            out += &format!("{e}\truntime\t{}\tliteral\n", 90 + i);
        }
    }
    for i in 0..12 {
        let e = format!("person{i:02}");
        out += &format!("{e}\ttype\tPerson\tclass\n{e}\tname\tName {i}\tliteral\n");
        if i % 2 == 1 {
            out += &format!("{e}\tborn\t{}\tliteral\n", 1950 + i);
        }
    }
    // A sparse film: only its type and title.
    out += "film99\ttype\tFilm\tclass\nfilm99\ttitle\tLost\tliteral\n";
    fs::write(path, out).unwrap();
}

const CONFIG: &str = r#"
seed = 7
m = 4

[paths]
kb = "kb.tsv"
checkpoint = "model.json"
output = "out"

[ranges]
director = "Person"

[gnn]
dim = 8
attention_dim = 8
epochs = 15
batch_size = 64
"#;

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_kb(&dir.path().join("kb.tsv"));
    fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn kb_stats_counts_the_fixture() {
    let dir = workspace();
    let o = kbenrich(dir.path(), &["--config", "config.toml", "kb", "stats"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("entities\t25\n"), "{text}");
    assert!(text.contains("classes\t2\n"), "{text}");
}

#[test]
fn exit_codes_distinguish_usage_data_and_convergence() {
    let dir = workspace();
    let d = dir.path();
    // No KB anywhere: usage error.
    assert_eq!(code(&kbenrich(d, &["kb", "stats"])), 1);
    // Broken config: config error.
    fs::write(d.join("bad.toml"), "m = \"ten\"").unwrap();
    assert_eq!(code(&kbenrich(d, &["--config", "bad.toml", "kb", "stats"])), 1);
    // Output directory whose parent is missing: config error at startup.
    fs::write(d.join("nowhere.toml"), "[paths]\noutput = \"missing/deeper/out\"").unwrap();
    assert_eq!(code(&kbenrich(d, &["--config", "nowhere.toml", "kb", "stats", "--kb", "kb.tsv"])), 1);
    // Missing and malformed data files: data errors.
    assert_eq!(code(&kbenrich(d, &["kb", "stats", "--kb", "absent.tsv"])), 2);
    fs::write(d.join("claims.jsonl"), "{not json}\n").unwrap();
    assert_eq!(code(&kbenrich(d, &["verify", "--claims", "claims.jsonl", "--out", "v"])), 2);
    // Unknown entity: data error.
    assert_eq!(code(&kbenrich(d, &["sim", "topk", "--kb", "kb.tsv", "--entity", "ghost"])), 2);

    // An iteration budget of one cannot converge.
    assert_eq!(code(&kbenrich(d, &["world", "generate", "--out", "w", "--n-facts", "60", "--n-sources", "20"])), 0);
    fs::write(d.join("short.toml"), "[truth]\nmax_iterations = 1").unwrap();
    let o = kbenrich(d, &["--config", "short.toml", "verify", "--claims", "w/claims.jsonl", "--out", "v"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("v/verified_facts.tsv").exists());
}

#[test]
fn verify_is_deterministic() {
    let dir = workspace();
    let d = dir.path();
    let gen = ["--seed", "3", "world", "generate", "--out", "w", "--n-facts", "120", "--n-sources", "30"];
    assert_eq!(code(&kbenrich(d, &gen)), 0);
    let claims = fs::read(d.join("w/claims.jsonl")).unwrap();
    assert_eq!(code(&kbenrich(d, &gen)), 0);
    assert_eq!(fs::read(d.join("w/claims.jsonl")).unwrap(), claims);
    for f in ["claims.jsonl", "truths.jsonl", "prior.jsonl", "sources.tsv"] {
        assert!(d.join("w").join(f).exists(), "{f}");
    }

    let run = |out: &str| {
        let o = kbenrich(d, &["verify", "--claims", "w/claims.jsonl", "--prior", "w/prior.jsonl", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("v1");
    run("v2");
    for f in ["verified_facts.tsv", "source_reliability.tsv"] {
        assert_eq!(fs::read(d.join("v1").join(f)).unwrap(), fs::read(d.join("v2").join(f)).unwrap());
    }
    let facts = fs::read_to_string(d.join("v1/verified_facts.tsv")).unwrap();
    assert!(facts.starts_with("entity\tproperty\tvalue\tkind\tz\tlabel\n"));
    assert_eq!(facts.lines().count(), 121);
}

#[test]
fn graph_train_rank_and_enrich() {
    let dir = workspace();
    let d = dir.path();
    let cfg = ["--config", "config.toml"];
    let with = |args: &[&str]| -> Output { kbenrich(d, &[&cfg[..], args].concat()) };

    let o = with(&["sim", "topk", "--entity", "film00", "--k", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 3);

    assert_eq!(code(&with(&["graph", "build", "--out", "graph.json", "--k", "4"])), 0);
    let graph = fs::read(d.join("graph.json")).unwrap();
    assert_eq!(code(&with(&["graph", "build", "--out", "graph.json", "--k", "4"])), 0);
    assert_eq!(fs::read(d.join("graph.json")).unwrap(), graph);

    let o = with(&["gnn", "train", "--graph", "graph.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("model.json").exists());

    let o = with(&["gnn", "rank", "--graph", "graph.json", "--entity", "film99", "--m", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);

    // Claims about the sparse film's director and year, one new person.
    let claims = [
        ("director", "person03", "entity", "s1", 0.95),
        ("director", "person03", "entity", "s2", 0.9),
        ("director", "Name 4", "entity", "s3", 0.1),
        ("director", "newcomer", "entity", "s4", 0.9),
        ("director", "newcomer", "entity", "s1", 0.85),
        ("year", "1999", "literal", "s2", 0.9),
        ("year", "1999", "literal", "s5", 0.95),
    ];
    let mut text = String::new();
    for (p, v, k, s, o) in claims {
        text += &format!(
            "{{\"entity\":\"film99\",\"property\":\"{p}\",\"value\":\"{v}\",\"kind\":\"{k}\",\"source\":\"{s}\",\"observation\":{o}}}\n"
        );
    }
    fs::write(d.join("claims.jsonl"), text).unwrap();
    let o = with(&["enrich", "--graph", "graph.json", "--entity", "film99", "--claims", "claims.jsonl", "--write-back"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("film99\t"));
    for f in ["enrichment.json", "verified_facts.tsv", "kb.tsv", "audit.jsonl"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    let enrichment: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/enrichment.json")).unwrap()).unwrap();
    assert_eq!(enrichment["properties"].as_array().unwrap().len(), 4);

    let first = fs::read(d.join("out/enrichment.json")).unwrap();
    let o = with(&["enrich", "--graph", "graph.json", "--entity", "film99", "--claims", "claims.jsonl"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(d.join("out/enrichment.json")).unwrap(), first);

    // No claims at all: empty enrichment, still success.
    fs::write(d.join("none.jsonl"), "").unwrap();
    let o = with(&["enrich", "--graph", "graph.json", "--entity", "film99", "--claims", "none.jsonl", "--out", "empty"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0 candidate facts"));
}

#[test]
fn holdout_and_generate_write_files() {
    let dir = workspace();
    let d = dir.path();
    let o = kbenrich(d, &["--seed", "1", "kb", "generate", "--out", "syn.tsv"]);
    assert_eq!(code(&o), 0);
    let o = kbenrich(d, &[
        "kb", "holdout", "--kb", "kb.tsv", "--entity", "film00", "--keep", "1", "--out-kb", "small.tsv", "--out-facts",
        "hidden.jsonl",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hidden = fs::read_to_string(d.join("hidden.jsonl")).unwrap();
    assert!(hidden.lines().count() >= 2);
    let small = fs::read_to_string(d.join("small.tsv")).unwrap();
    let kept = small.lines().filter(|l| l.starts_with("film00\t")).count();
    assert_eq!(kept, 2, "type plus one kept property:\n{small}");
}

#[test]
fn eval_run_writes_identical_reports() {
    let dir = workspace();
    let d = dir.path();
    let config = r#"
seed = 11
train = 10
validation = 3
test = 3
[synthetic]
classes = 2
entities_per_class = 20
properties_per_class = 12
signature_properties = 5
min_properties = 6
[gnn]
dim = 8
attention_dim = 8
epochs = 3
"#;
    fs::write(d.join("eval.toml"), config).unwrap();
    for out in ["r1.json", "r2.json"] {
        let o = kbenrich(d, &["--config", "eval.toml", "eval", "run", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let r1 = fs::read(d.join("r1.json")).unwrap();
    assert_eq!(r1, fs::read(d.join("r2.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    assert_eq!(report["classes"].as_array().unwrap().len(), 2);
    assert_eq!(report["seed"], 11);
}
