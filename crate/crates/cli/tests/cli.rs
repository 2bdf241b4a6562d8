use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn attrib(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrib"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Two classes: short choppy sentences vs long hedged ones.
fn write_corpus(path: &Path, n: usize, offset: usize) {
    let words = [
        "lorem", "ipsum", "dolor", "amet", "sed", "tempor", "magna", "velit", "nulla", "porta",
    ];
    let mut out = String::new();
    for i in offset..offset + n {
        let human = i % 2 == 0;
        let mut text = String::new();
        for s in 0..6 {
            let len = if human {
                4 + (i + s) % 3
            } else {
                14 + (i + s) % 5
            };
            for w in 0..len {
                if w > 0 {
                    text.push(' ');
                }
                if !human && w == 3 {
                    text.push_str("perhaps ");
                }
                text.push_str(words[(i * 7 + s * 3 + w) % words.len()]);
            }
            text.push_str(". ");
        }
        let label = if human { "human" } else { "generated" };
        out.push_str(&format!(
            "{{\"id\":\"d{i:03}\",\"text\":\"{}\",\"lang\":\"en\",\"label\":\"{label}\"}}\n",
            text.trim_end()
        ));
    }
    fs::write(path, out).unwrap();
}

#[test]
fn version_reports_model_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = attrib(&["--version"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.contains(env!("CARGO_PKG_VERSION")) && text.contains("model format 1"),
        "{text}"
    );
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = attrib(&["extract", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(attrib(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(attrib(&["extract"], dir.path()).status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = attrib(&["extract", "--input", "missing.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.jsonl"));

    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"id\":\"a\",\"text\":\"x\"}\n{oops\n",
    )
    .unwrap();
    let o = attrib(&["extract", "--input", "bad.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn extract_writes_27_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus.jsonl"), 6, 0);
    let o = attrib(
        &[
            "extract",
            "--input",
            "corpus.jsonl",
            "--lang",
            "en",
            "--output",
            "feats.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("feats.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    for line in &lines {
        assert_eq!(line.split(',').count(), 27);
    }
    assert!(lines[0].starts_with("doc_id,ttr,root_ttr,log_ttr"));

    // stdout when no --output
    let o = attrib(&["extract", "--input", "corpus.jsonl"], dir.path());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), csv);
}

#[test]
fn aggregate_channels() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ch.jsonl"),
        "{\"doc_id\":\"b\",\"channels\":[\"logp_obs\",\"entropy\"],\"values\":[[-1.0,2.0],[-3.0,4.0],[null,null]],\"mask\":[true,true,false]}\n\
         {\"doc_id\":\"a\",\"channels\":[\"logp_obs\",\"entropy\"],\"values\":[[-2.0,1.0]],\"mask\":[true]}\n",
    )
    .unwrap();
    let o = attrib(&["aggregate", "--channels", "ch.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "doc_id,logp_obs_mean,logp_obs_max,logp_obs_min,logp_obs_std,entropy_mean,entropy_max,entropy_min,entropy_std"
    );
    assert!(lines[1].starts_with("a,"));
    let b: Vec<f64> = lines[2]
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(b, [-2.0, -1.0, -3.0, 1.0, 3.0, 4.0, 2.0, 1.0]);
}

#[test]
fn train_predict_explain_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_corpus(&p.join("train.jsonl"), 40, 0);
    write_corpus(&p.join("test.jsonl"), 10, 100);

    let o = attrib(
        &[
            "train",
            "--input",
            "train.jsonl",
            "--trees",
            "20",
            "--seed",
            "3",
            "--output",
            "model.json",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let model = fs::read(p.join("model.json")).unwrap();
    let o = attrib(
        &[
            "--threads",
            "1",
            "train",
            "--input",
            "train.jsonl",
            "--trees",
            "20",
            "--seed",
            "3",
            "--output",
            "model2.json",
        ],
        p,
    );
    assert!(o.status.success());
    assert_eq!(fs::read(p.join("model2.json")).unwrap(), model);

    let o = attrib(
        &["predict", "--model", "model.json", "--input", "test.jsonl"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = String::from_utf8(o.stdout).unwrap();
    assert!(preds.starts_with("doc_id,predicted,prob_generated,prob_human\n"));
    assert_eq!(preds.lines().count(), 11);

    let o = attrib(
        &[
            "explain",
            "--model",
            "model.json",
            "--input",
            "test.jsonl",
            "--top-k",
            "3",
            "--output",
            "shap.csv",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("class __all__"));
    let shap = fs::read_to_string(p.join("shap.csv")).unwrap();
    assert!(shap.starts_with("class,feature,mean_abs_shap\n"));
    assert_eq!(shap.lines().count(), 1 + 3 * 26);

    let o = attrib(
        &[
            "evaluate",
            "--model",
            "model.json",
            "--input",
            "test.jsonl",
            "--output",
            "report.json",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(p.join("report.json")).unwrap();
    assert!(report.contains("\"macro_f1\": 1.0"), "{report}");

    // feature columns must match the model
    fs::write(p.join("ext.csv"), "doc_id,x\n").unwrap();
    let o = attrib(
        &[
            "predict",
            "--model",
            "model.json",
            "--input",
            "test.jsonl",
            "--ext-columns",
            "ext.csv",
        ],
        p,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_corpus(&p.join("train.jsonl"), 40, 0);
    write_corpus(&p.join("test.jsonl"), 10, 100);
    fs::write(
        p.join("exp.toml"),
        "[data]\ntrain = \"train.jsonl\"\ntest = \"test.jsonl\"\n[model]\ntrees = 500\n[eval]\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let o = attrib(
        &[
            "run", "--config", "exp.toml", "--trees", "15", "--output", "out2",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for name in [
        "model.json",
        "report.json",
        "shap.csv",
        "report.txt",
        "shap.txt",
    ] {
        assert!(p.join("out2").join(name).exists(), "{name} missing");
    }
    assert!(!p.join("out").exists());
    let model = fs::read_to_string(p.join("out2/model.json")).unwrap();
    assert!(model.contains("\"n_trees\":15"));

    fs::write(p.join("bad.toml"), "[data]\n").unwrap();
    assert_eq!(
        attrib(&["run", "--config", "bad.toml"], p).status.code(),
        Some(2)
    );
}
