use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maxent_debias::commands::{self, EvaluateArgs};
use maxent_debias::formats::model::ModelFile;
use maxent_debias::formats::schema::parse_schema;
use maxent_debias_core::solver::MaxEntModel;
use maxent_debias_core::{mix_prior, reweight};
use serde_json::Value;

const SCHEMA: &str = r#"{
  "blocks": [
    {"name": "sex", "kind": "bit", "categories": ["F", "M"], "role": "protected"},
    {"name": "age", "kind": "categorical", "categories": ["young", "mid", "old"]},
    {"name": "hired", "kind": "bit", "categories": ["no", "yes"], "role": "label"}
  ]
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxent-debias"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small dataset with every (sex, label) cell present.
fn raw_rows() -> String {
    let mut s = String::from("sex,age,hired\n");
    let rows = [
        ("M", "young", "yes", 9),
        ("M", "mid", "yes", 12),
        ("M", "old", "no", 6),
        ("M", "young", "no", 4),
        ("F", "young", "yes", 3),
        ("F", "mid", "no", 7),
        ("F", "old", "no", 5),
        ("F", "old", "yes", 2),
    ];
    for (sex, age, hired, n) in rows {
        for _ in 0..n {
            s.push_str(&format!("{sex},{age},{hired}\n"));
        }
    }
    s
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("schema.json"), SCHEMA).unwrap();
        fs::write(dir.path().join("data.csv"), raw_rows()).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, extra: &str, out: &str) -> PathBuf {
        let path = self.path(name);
        fs::write(
            &path,
            format!("schema_path = \"schema.json\"\ndata_path = \"data.csv\"\noutput_dir = \"{out}\"\nlabel_value = \"yes\"\n{extra}"),
        )
        .unwrap();
        path
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn encode_merges_duplicates() {
    let f = Fixture::new();
    fs::write(f.path("three.csv"), "sex,age,hired\nM,young,yes\nM,young,yes\nF,old,no\n").unwrap();
    let out = f.path("enc");
    let o = run(&["encode", "--schema", p(&f.path("schema.json")), "--input", p(&f.path("three.csv")), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("encoded.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sex,age=young,age=mid,age=old,hired,freq");
    assert_eq!(lines.len(), 3);
    assert!(lines.contains(&"1,1,0,0,1,2"));
    assert!(lines.contains(&"0,0,0,1,0,1"));
    let summary = json(&out.join("encode_summary.json"));
    assert_eq!(summary["rows"], 3);
    assert_eq!(summary["distinct_points"], 2);
    assert_eq!(summary["dimension"], 5);
}

#[test]
fn unknown_category_is_a_data_error() {
    let f = Fixture::new();
    fs::write(f.path("bad.csv"), "sex,age,hired\nM,young,yes\nM,ancient,no\n").unwrap();
    let out = f.path("enc");
    let o = run(&["encode", "--schema", p(&f.path("schema.json")), "--input", p(&f.path("bad.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("age") && err.contains("ancient"), "{err}");
    assert!(!out.join("encoded.csv").exists());

    let o = run(&[
        "encode", "--schema", p(&f.path("schema.json")), "--input", p(&f.path("bad.csv")),
        "--out", p(&out), "--skip-bad-rows",
    ]);
    assert!(o.status.success());
    assert_eq!(json(&out.join("encode_summary.json"))["skipped_rows"], 1);
}

#[test]
fn train_is_deterministic() {
    let f = Fixture::new();
    for out in ["a", "b"] {
        let cfg = f.config(&format!("{out}.toml"), "", out);
        let o = run(&["train", "--config", p(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(f.path("a/model.json")).unwrap();
    let b = fs::read(f.path("b/model.json")).unwrap();
    assert_eq!(a, b);
    let report = json(&f.path("a/train_report.json"));
    assert_eq!(report["converged"], true);
    for key in ["iterations", "dual_value", "final_gradient_norm", "bounding_radius", "wall_clock_seconds"] {
        assert!(report.get(key).is_some(), "{key}");
    }
}

#[test]
fn invalid_config_exits_with_one() {
    let f = Fixture::new();
    let cfg = f.config("c0.toml", "c = 0.0\n", "out");
    assert_eq!(run(&["train", "--config", p(&cfg)]).status.code(), Some(1));
    assert!(!f.path("out/model.json").exists());
    let cfg = f.config("tau.toml", "tau = 1.5\n", "out");
    assert_eq!(run(&["train", "--config", p(&cfg)]).status.code(), Some(1));
    assert_eq!(run(&["train"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_exits_with_two() {
    let f = Fixture::new();
    fs::remove_file(f.path("data.csv")).unwrap();
    let cfg = f.config("run.toml", "", "out");
    assert_eq!(run(&["train", "--config", p(&cfg)]).status.code(), Some(2));
}

#[test]
fn sampling_is_reproducible() {
    let f = Fixture::new();
    let cfg = f.config("run.toml", "", "out");
    assert!(run(&["train", "--config", p(&cfg)]).status.success());
    let model = f.path("out/model.json");
    for dir in ["s1", "s2"] {
        let o = run(&["sample", "--model", p(&model), "--count", "10000", "--seed", "7", "--out", p(&f.path(dir))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read_to_string(f.path("s1/samples.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(f.path("s2/samples.csv")).unwrap());
    assert_eq!(a.lines().count(), 10_001);
    assert_eq!(a.lines().next(), Some("sex,age,hired"));
    let meta = json(&f.path("s1/samples.meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["count"], 10000);

    let o = run(&["sample", "--model", p(&model), "--count", "100", "--seed", "8", "--out", p(&f.path("s3"))]);
    assert!(o.status.success());
    let c = fs::read_to_string(f.path("s3/samples.csv")).unwrap();
    assert_ne!(c, a.lines().take(101).map(|l| format!("{l}\n")).collect::<String>());
}

#[test]
fn zero_count_is_a_usage_error() {
    let f = Fixture::new();
    let cfg = f.config("run.toml", "", "out");
    assert!(run(&["train", "--config", p(&cfg)]).status.success());
    let o = run(&["sample", "--model", p(&f.path("out/model.json")), "--count", "0", "--out", p(&f.path("s"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!f.path("s/samples.csv").exists());
}

#[test]
fn corrupt_model_exits_with_two() {
    let f = Fixture::new();
    let cfg = f.config("run.toml", "", "out");
    assert!(run(&["train", "--config", p(&cfg)]).status.success());
    let model = f.path("out/model.json");
    let text = fs::read_to_string(&model).unwrap();
    fs::write(&model, &text[..text.len() / 2]).unwrap();
    let o = run(&["sample", "--model", p(&model), "--count", "5", "--out", p(&f.path("s"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn samples_agree_with_exact_model() {
    let f = Fixture::new();
    let cfg = f.config("run.toml", "sample_count = 10000\nseed = 3\n", "out");
    let o = run(&["pipeline", "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Data SR") && table.contains("KL vs raw"), "{table}");
    let report = json(&f.path("out/report.json"));
    let col = |name: &str| {
        report["columns"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap().clone()
    };
    let model = col("model");
    assert!(col("samples")["statistical_rate"].is_f64());

    // A single 10^4 draw puts RR = min/max of two near-equal masses about
    // 0.02 from its exact value at one standard deviation, so compare the
    // mean discrepancy over several seeds.
    let mut sum = [0.0; 2];
    let seeds = 40;
    for seed in 0..seeds {
        let dir = f.path(&format!("seed{seed}"));
        fs::create_dir_all(&dir).unwrap();
        let s = commands::sample(&f.path("out/model.json"), 10_000, seed, &dir).unwrap();
        let mut args = EvaluateArgs::new(f.path("data.csv"));
        args.samples = Some(s.samples);
        args.schema = Some(f.path("schema.json"));
        args.label_value = Some("yes".into());
        let r = commands::evaluate(&args).unwrap();
        let c = r.column("samples").unwrap();
        sum[0] += (c.statistical_rate - model["statistical_rate"].as_f64().unwrap()).abs();
        sum[1] += (c.representation_rate - model["representation_rate"].as_f64().unwrap()).abs();
    }
    for (key, s) in ["statistical_rate", "representation_rate"].iter().zip(sum) {
        let mean = s / seeds as f64;
        assert!(mean <= 0.02, "{key}: mean discrepancy {mean}");
    }
    let manifest = json(&f.path("out/manifest.json"));
    assert_eq!(manifest["model"], "model.json");
    assert_eq!(manifest["config"]["seed"], 3);

    let first = fs::read(f.path("out/samples.csv")).unwrap();
    let o = run(&["pipeline", "--config", p(&cfg), "--out", p(&f.path("again"))]);
    assert!(o.status.success());
    assert_eq!(first, fs::read(f.path("again/samples.csv")).unwrap());
    assert_eq!(fs::read(f.path("out/model.json")).unwrap(), fs::read(f.path("again/model.json")).unwrap());
}

#[test]
fn model_equal_to_prior_has_zero_delta() {
    let f = Fixture::new();
    let schema = parse_schema(SCHEMA).unwrap();
    let ds = maxent_debias::formats::dataset::read_dataset(&schema, &f.path("data.csv"), false).unwrap();
    let q = mix_prior(&schema, 0.5, reweight(&ds, &schema, 0.8).unwrap()).unwrap();
    let mut theta = vec![0.0; schema.dim()];
    let zero = vec![0.0; schema.dim()];
    let flat = MaxEntModel::new(q.clone(), theta.clone(), zero.clone()).unwrap();
    for values in schema.enumerate(1e6).unwrap() {
        let p = schema.point_from_values(&values).unwrap();
        let m = flat.prob(&p).unwrap();
        for i in p.active() {
            theta[i] += m;
        }
    }
    let model = MaxEntModel::new(q, theta, zero).unwrap();
    let file = f.path("prior_model.json");
    fs::write(&file, ModelFile::from_model(&model, None).to_json()).unwrap();

    let out = f.path("eval");
    let o = run(&[
        "evaluate", "--model", p(&file), "--reference", p(&f.path("data.csv")),
        "--label-value", "yes", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    let bound = &report["fairness_bound"];
    assert_eq!(bound["delta"].as_f64().unwrap(), 0.0);
    assert_eq!(bound["tau_prime"].as_f64().unwrap(), 0.8);
    assert!(report["columns"][2]["statistical_rate"].as_f64().unwrap() >= 0.8 - 1e-10);
}

#[test]
fn evaluate_samples_without_model() {
    let f = Fixture::new();
    let out = f.path("eval");
    let o = run(&[
        "evaluate", "--samples", p(&f.path("data.csv")), "--schema", p(&f.path("schema.json")),
        "--reference", p(&f.path("data.csv")), "--label-value", "yes", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    let raw = &report["columns"][0];
    let same = &report["columns"][1];
    assert_eq!(raw["statistical_rate"], same["statistical_rate"]);
    assert!(same["closeness_to_raw"].as_f64().unwrap() < 1e-5);

    let o = run(&["evaluate", "--reference", p(&f.path("data.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn large_domain_switches_to_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let mut blocks = vec![
        r#"{"name": "z", "kind": "bit", "role": "protected"}"#.to_string(),
        r#"{"name": "y", "kind": "bit", "role": "label"}"#.to_string(),
    ];
    for i in 0..22 {
        blocks.push(format!(r#"{{"name": "f{i}", "kind": "bit"}}"#));
    }
    let schema_text = format!(r#"{{"blocks": [{}]}}"#, blocks.join(","));
    fs::write(dir.path().join("schema.json"), &schema_text).unwrap();
    let schema = parse_schema(&schema_text).unwrap();
    let mut csv = String::new();
    csv.push_str(&(0..24).map(|i| schema.blocks()[i].name.clone()).collect::<Vec<_>>().join(","));
    csv.push('\n');
    for r in 0..400u64 {
        let row: Vec<String> = (0..24).map(|i| (((r * 2654435761) >> (i % 17)) & 1).to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    fs::write(dir.path().join("data.csv"), csv).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "schema_path = \"schema.json\"\ndata_path = \"data.csv\"\noutput_dir = \"out\"\nsample_count = 2000\n",
    )
    .unwrap();
    let o = run(&["pipeline", "--config", p(&dir.path().join("run.toml"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(report["closeness"], "covariance");
    assert!(!report["notices"].as_array().unwrap().is_empty());
    let model = report["columns"].as_array().unwrap().iter().find(|c| c["name"] == "model").unwrap();
    assert!(model["closeness_to_raw"].as_f64().unwrap().is_finite());
}
