use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_perspectra");

const CONFIG: &str = r#"
seed = 3
out_dir = "out"

[dataset]
path = "humans.jsonl"

[personas]
path = "bundled:hs_brexit_strong"
template = "bundled:hs_brexit_strong"

[generation]
temperatures = [0.0, 0.1, 0.5]

[backend]
kind = "mock"

[embedding]
kind = "hashing"

[[techniques]]
technique = "text_only"
epochs = 5

[[techniques]]
technique = "multi_task"
epochs = 5

[align]
sample_sizes = [5, 10, 50]
resamples = 5
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn stage(dir: &Path, name: &str) -> Output {
    run(dir, &[name, "--config", "config.toml"])
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["benchmark", "--name", "planted_rule", "--size", "120", "--seed", "4", "--out", "humans.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(dir.path().join("config.toml"), config).unwrap();
    dir
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn full_pipeline_emits_the_documented_layout() {
    let dir = setup(CONFIG);
    for name in ["annotate", "stats", "train", "align", "report"] {
        let out = stage(dir.path(), name);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = dir.path().join("out");
    assert_eq!(header(&out.join("manifest.csv")), "path,sha256,stage");
    assert_eq!(header(&out.join("annotate/sweep_report.csv")), "temperature,requests,cache_hits,parse_failures,alpha");
    assert_eq!(
        header(&out.join("stats/stats.csv")),
        "dataset,num_annotators,num_instances,n_mean,n_std,ai_mean,ai_std,alpha"
    );
    assert_eq!(header(&out.join("stats/pdf_human.csv")), "x,density");
    assert_eq!(std::fs::read_to_string(out.join("stats/pdf_human.csv")).unwrap().lines().count(), 202);
    assert_eq!(
        header(&out.join("align/alignment.csv")),
        "human_id,persona_id,sample_size,mean_cos,std_cos,shared_instances"
    );
    assert_eq!(header(&out.join("align/swap_report.csv")), "human_id,persona_id,swapped,skipped");
    assert!(out.join("align/mapping.json").exists());
    assert!(out.join("report/index.csv").exists());
    for t in ["0.00", "0.10", "0.50"] {
        assert!(out.join(format!("annotate/llm_t{t}.jsonl")).exists());
    }
    assert!(out.join("train/summary.csv").exists());
    let f1 = std::fs::read_to_string(out.join("train/f1/human/multi_task_test.csv")).unwrap();
    assert!(f1.starts_with("scope,annotator_id,f1"));

    // every manifest entry exists with the recorded digest
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.lines().count() > 20);
    for line in manifest.lines().skip(1) {
        let path = line.split(',').next().unwrap();
        assert!(out.join(path).exists(), "{path}");
    }
}

#[test]
fn warm_annotate_is_identical_and_offline() {
    let dir = setup(CONFIG);
    assert!(stage(dir.path(), "annotate").status.success());
    let out = dir.path().join("out");
    let cache_before = files(&out.join("cache"));
    let first = files(&out.join("annotate"));
    let again = stage(dir.path(), "annotate");
    assert!(again.status.success());
    assert_eq!(files(&out.join("cache")), cache_before);
    let second = files(&out.join("annotate"));
    for (path, bytes) in &first {
        if path.starts_with("llm_t") {
            assert_eq!(&second[path], bytes, "{path}");
        }
    }
    let report = String::from_utf8(second["sweep_report.csv"].clone()).unwrap();
    for row in report.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[1], cols[2], "every request served from cache: {row}");
    }
}

#[test]
fn seed_and_out_overrides() {
    let dir = setup(CONFIG);
    let a = run(dir.path(), &["annotate", "--config", "config.toml", "--seed", "9", "--out", "a"]);
    let b = run(dir.path(), &["annotate", "--config", "config.toml", "--seed", "9", "--out", "b"]);
    assert!(a.status.success() && b.status.success());
    let (fa, fb) = (files(&dir.path().join("a/annotate")), files(&dir.path().join("b/annotate")));
    assert_eq!(fa, fb);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = setup(&CONFIG.replace("[[techniques]]\ntechnique = \"text_only\"\nepochs = 5\n\n[[techniques]]\ntechnique = \"multi_task\"\nepochs = 5\n", "").replace("seed = 3", "seed = 3\ntechniques = []"));
    let out = stage(dir.path(), "train");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("techniques"), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = setup(&CONFIG.replace("[0.0, 0.1, 0.5]", "[0.5, 0.1]"));
    let out = stage(dir.path(), "annotate");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generation.temperatures"));

    let dir = setup(&CONFIG.replace("humans.jsonl", "missing.jsonl"));
    let out = stage(dir.path(), "stats");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset.path"));

    let dir = setup(&CONFIG.replace("kind = \"mock\"", "kind = \"mock\"\nbogus = 1"));
    assert_eq!(stage(dir.path(), "annotate").status.code(), Some(2));

    let out = run(dir.path(), &["stats", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["benchmark", "--name", "nonexistent", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_data_exits_4() {
    let dir = setup(CONFIG);
    std::fs::write(dir.path().join("humans.jsonl"), "{\"instance_id\":\"a\",\"text\":\"t\",\"annotations\":{\"x\":2}}\n").unwrap();
    let out = stage(dir.path(), "stats");
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn tampered_artifacts_fail_the_report() {
    let dir = setup(CONFIG);
    assert!(stage(dir.path(), "annotate").status.success());
    assert!(stage(dir.path(), "stats").status.success());
    assert!(stage(dir.path(), "report").status.success());
    std::fs::write(dir.path().join("out/stats/stats.csv"), "tampered\n").unwrap();
    let out = stage(dir.path(), "report");
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stats/stats.csv"));
}

#[test]
fn benchmark_writes_standard_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["planted_rule", "identical_annotator", "random_humans"] {
        let file = format!("{name}.jsonl");
        let out = run(dir.path(), &["benchmark", "--name", name, "--size", "50", "--out", &file]);
        assert!(out.status.success());
        let bundle = perspectra::corpus::load_dataset(dir.path().join(&file), perspectra::corpus::Format::Jsonl).unwrap();
        assert_eq!(bundle.instances().len(), 50);
    }
    let a = std::fs::read(dir.path().join("planted_rule.jsonl")).unwrap();
    run(dir.path(), &["benchmark", "--size", "50", "--out", "again.jsonl"]);
    assert_eq!(a, std::fs::read(dir.path().join("again.jsonl")).unwrap());
}
