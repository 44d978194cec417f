use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sentcompare::checkpoint::Checkpoint;
use sentcompare::cli::{RunManifest, SUMMARY_FILE};
use sentcompare::corpus::{sts_to_tsv, StsPair};
use sentcompare::encoder::{EmbeddingProvider, EmbeddingStore};
use sentcompare::numstat::Rng;
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};
use tempfile::TempDir;

fn sentcompare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sentcompare"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sentcompare(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            concepts: 20,
            synonyms: 3,
            sts_pairs: 100,
            nli_examples: 200,
            probe_examples: 60,
            ..Default::default()
        };
        SyntheticCorpus::generate(&spec, 4).write_to(&dir.path().join("data")).unwrap();
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn p(&self, rel: &str) -> String {
        self.path(rel).display().to_string()
    }

    fn train(&self, method: &str, seeds: &str, out: &str) -> Vec<String> {
        ok(&[
            "train", "--method", method, "--seeds", seeds, "--dim", "8", "--epochs", "1",
            "--nli", &self.p("data/nli.tsv"), "--definitions", &self.p("data/definitions.tsv"),
            "--sts", &self.p("data/sts.tsv"), "--out", &self.p(out),
        ]);
        seeds.split(',').map(|s| self.p(&format!("{out}/checkpoint-seed{s}.json"))).collect()
    }
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn partition_by_dice_writes_equal_files_and_is_repeatable() {
    let f = Fixture::new();
    let args = |out: &str| {
        vec!["partition".to_string(), "--sts".into(), f.p("data/sts.tsv"), "--scheme".into(), "dice".into(), "--k".into(), "5".into(), "--out".into(), f.p(out)]
    };
    let a: Vec<String> = args("p1");
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let b: Vec<String> = args("p2");
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    let summary: serde_json::Value = serde_json::from_slice(&read(f.path("p1").join(SUMMARY_FILE))).unwrap();
    let subsets = summary["subsets"].as_array().unwrap();
    assert_eq!(subsets.len(), 5);
    for s in subsets {
        assert_eq!(s["n"], 20);
        assert!(s["min_dice"].as_f64().unwrap() <= s["max_dice"].as_f64().unwrap());
        let file = s["file"].as_str().unwrap();
        assert_eq!(read(f.path("p1").join(file)), read(f.path("p2").join(file)));
    }
    assert_eq!(read(f.path("p1/summary.json")), read(f.path("p2/summary.json")));
    let manifest = RunManifest::load(f.path("p1/manifest.json")).unwrap();
    assert_eq!(manifest.command, "partition");
    assert_eq!(manifest.artifacts.len(), 5);
}

#[test]
fn partition_by_source_keeps_file_order_and_sizes() {
    let f = Fixture::new();
    let sizes = [("MSRpar", 750), ("MSRvid", 750), ("SMTeuroparl", 459), ("OnWN", 750), ("SMTnews", 399)];
    let mut rng = Rng::new(0);
    let mut pairs = Vec::new();
    for (src, n) in sizes {
        for i in 0..n {
            let g = rng.uniform(0.0, 5.0);
            pairs.push(StsPair::new(src, g, format!("first {i} {src}"), format!("second {i}")).unwrap());
        }
    }
    fs::write(f.path("sts12.tsv"), sts_to_tsv(&pairs)).unwrap();
    let out = ok(&["partition", "--sts", &f.p("sts12.tsv"), "--out", &f.p("parts")]);
    let summary: serde_json::Value = serde_json::from_slice(&read(f.path("parts/summary.json"))).unwrap();
    let got: Vec<(String, u64)> = summary["subsets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["label"].as_str().unwrap().to_string(), s["n"].as_u64().unwrap()))
        .collect();
    let want: Vec<(String, u64)> = sizes.iter().map(|(s, n)| (s.to_string(), *n as u64)).collect();
    assert_eq!(got, want);
    assert!(f.path("parts/02_smteuroparl.tsv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("| SMTeuroparl | 02_smteuroparl.tsv | 459 |"));
}

#[test]
fn parse_errors_name_the_line_and_leave_no_output() {
    let f = Fixture::new();
    fs::write(f.path("bad.tsv"), "a\t1\tx y\tz w\nb\t2\tx\tz\nc\tnot-a-number\tx\ty\n").unwrap();
    let out = sentcompare(&["partition", "--sts", &f.p("bad.tsv"), "--out", &f.p("never")]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.tsv:3"), "{err}");
    assert!(!f.path("never").exists());
}

#[test]
fn train_writes_loadable_checkpoints_and_stage_records() {
    let f = Fixture::new();
    let cks = f.train("s+d", "0,1", "sd");
    for (seed, path) in cks.iter().enumerate() {
        let ck = Checkpoint::load(path).unwrap();
        assert_eq!(ck.seed, seed as u64);
        let enc = ck.provider().unwrap();
        let s = "c1v0 c2v1 c3v2.";
        assert_eq!(enc.embed(s).unwrap(), enc.embed(s).unwrap());
    }
    let manifest = RunManifest::load(f.path("sd/manifest.json")).unwrap();
    assert_eq!(manifest.seeds, [0, 1]);
    let stages: Vec<String> = manifest.artifacts[0].stages.iter().map(|s| s.stage.to_string()).collect();
    assert_eq!(stages, ["sbert", "defsent"]);
    assert!(manifest.inputs.iter().any(|i| i.path.ends_with("nli.tsv") && i.bytes > 0));
}

#[test]
fn multi_manifest_shows_cycles() {
    let f = Fixture::new();
    f.train("multi", "0", "multi");
    let manifest = RunManifest::load(f.path("multi/manifest.json")).unwrap();
    let rec = &manifest.artifacts[0].stages[0];
    assert_eq!(rec.steps % 20, 0);
    assert!(rec.steps > 0);
    assert_eq!(rec.pattern, vec!["19×nli 1×def"; rec.steps / 20].join(" "));
}

#[test]
fn training_needs_its_data() {
    let f = Fixture::new();
    let out = sentcompare(&["train", "--method", "defsent", "--nli", &f.p("data/nli.tsv"), "--out", &f.p("x")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs definition data"));
    assert!(!f.path("x").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let f = Fixture::new();
    let a = f.train("multi", "3", "a");
    let b = f.train("multi", "3", "b");
    assert_eq!(read(&a[0]), read(&b[0]));
    for out in ["ea", "eb"] {
        ok(&["eval", "--provider", &a[0], "--sts", &f.p("data/sts.tsv"), "--probe", &f.p("data/probe.tsv"), "--out", &f.p(out)]);
    }
    assert_eq!(read(f.path("ea/report.json")), read(f.path("eb/report.json")));
    assert_eq!(read(f.path("ea/report.md")), read(f.path("eb/report.md")));
}

#[test]
fn embed_writes_one_row_per_distinct_sentence() {
    let f = Fixture::new();
    let ck = f.train("sbert", "0", "m");
    fs::write(f.path("three.txt"), "c0v0 c1v1.\nc2v2 c3v0.\nc0v0 c1v1.\nc4v1 c5v2.\n").unwrap();
    ok(&["embed", "--provider", &ck[0], "--sentences", &f.p("three.txt"), "--out", &f.p("emb")]);
    let text = fs::read_to_string(f.path("emb/embeddings-00.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dim=8");
    assert_eq!(lines.len(), 4);
}

#[test]
fn embed_average_of_two_dumps_is_componentwise_mean() {
    let f = Fixture::new();
    fs::write(f.path("a.txt"), "dim=2\nhello world\t1 2\nbye\t0.5 -1\n").unwrap();
    fs::write(f.path("b.txt"), "dim=2\nhello world\t3 4\nbye\t1.5 1\n").unwrap();
    fs::write(f.path("s.txt"), "hello world\nbye\n").unwrap();
    ok(&["embed", "--method", "average", "--provider", &f.p("a.txt"), "--provider", &f.p("b.txt"), "--sentences", &f.p("s.txt"), "--out", &f.p("avg")]);
    let store = EmbeddingStore::load_dump(f.path("avg/embeddings-00.txt")).unwrap();
    assert_eq!(store.get("hello world").unwrap().as_slice(), &[2.0, 3.0]);
    assert_eq!(store.get("bye").unwrap().as_slice(), &[1.0, 0.0]);
}

#[test]
fn eval_over_partition_dir_and_many_seeds() {
    let f = Fixture::new();
    ok(&["partition", "--sts", &f.p("data/sts.tsv"), "--scheme", "dice", "--out", &f.p("parts")]);
    let seeds = "0,1,2,3,4,5,6,7,8,9";
    let cks = f.train("none", seeds, "ten");
    let mut args = vec!["eval", "--partition-dir"];
    let parts = f.p("parts");
    args.push(&parts);
    for ck in &cks {
        args.push("--provider");
        args.push(ck);
    }
    let out = f.p("ev");
    args.extend(["--out", &out]);
    let stdout = String::from_utf8(ok(&args).stdout).unwrap();
    assert!(stdout.contains("mean of 10 run(s)"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&read(f.path("ev/report.json"))).unwrap();
    assert_eq!(report["runs"], 10);
    assert_eq!(report["sts"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(report["sts"]["all"]["label"], "ALL");
    assert_eq!(report["sts"]["seeds"].as_array().unwrap().len(), 10);
}

#[test]
fn average_of_a_provider_with_itself_matches_it() {
    let f = Fixture::new();
    let ck = f.train("sbert", "0", "m");
    ok(&["eval", "--provider", &ck[0], "--sts", &f.p("data/sts.tsv"), "--out", &f.p("single")]);
    ok(&["eval", "--method", "average", "--provider", &ck[0], "--provider", &ck[0], "--sts", &f.p("data/sts.tsv"), "--out", &f.p("avg")]);
    let rows = |p: &str| {
        let v: serde_json::Value = serde_json::from_slice(&read(f.path(p))).unwrap();
        (v["sts"]["rows"].clone(), v["sts"]["all"].clone())
    };
    assert_eq!(rows("single/report.json"), rows("avg/report.json"));
}

#[test]
fn combine_eval_lists_components_and_combinations() {
    let f = Fixture::new();
    let a = f.train("sbert", "0", "a");
    let b = f.train("defsent", "0", "b");
    let stdout = String::from_utf8(
        ok(&["combine-eval", "--provider", &a[0], "--provider", &b[0], "--sts", &f.p("data/sts.tsv"), "--probe", &f.p("data/probe.tsv"), "--out", &f.p("ce")]).stdout,
    )
    .unwrap();
    for row in ["| A |", "| B |", "| average |", "| concat |"] {
        assert_eq!(stdout.matches(row).count(), 2, "{row} in\n{stdout}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let f = Fixture::new();
    fs::write(
        f.path("exp.toml"),
        "method = \"sbert\"\nseeds = [5]\ndim = 4\nout = \"from-config\"\n\n[data]\nnli = \"data/nli.tsv\"\n\n[train]\nepochs = 1\n",
    )
    .unwrap();
    ok(&["train", "--config", &f.p("exp.toml"), "--dim", "6"]);
    let ck = Checkpoint::load(f.path("from-config/checkpoint-seed5.json")).unwrap();
    assert_eq!(ck.models()[0].encoder.dim(), 6);
    let manifest = RunManifest::load(f.path("from-config/manifest.json")).unwrap();
    assert_eq!(manifest.config.dim, 6);

    fs::write(f.path("typo.toml"), "metod = \"sbert\"\n").unwrap();
    assert!(!sentcompare(&["train", "--config", &f.p("typo.toml")]).status.success());
}

#[test]
fn missing_provider_fails() {
    let f = Fixture::new();
    let out = sentcompare(&["eval", "--provider", &f.p("nope.json"), "--sts", &f.p("data/sts.tsv"), "--out", &f.p("e")]);
    assert!(!out.status.success());
    assert!(!f.path("e").exists());
}
