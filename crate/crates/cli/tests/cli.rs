use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plurvec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plurvec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen_classes(dir: &Path) {
    let out = plurvec(&[
        "synth", "gen", "--kind", "classes", "--classes", "4", "--lexemes", "8", "--dim", "12", "--seed", "3",
        "--out", p(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analogy_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_classes(&data);
    let emb = data.join("embeddings.txt");
    let pairs = data.join("pairs.tsv");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let out = plurvec(&[
            "analogy", "evaluate", "--embeddings", p(&emb), "--pairs", p(&pairs), "--method", "all",
            "--prime", "c000w0000,c000w0000s", "--topn", "1,5", "--out", p(&out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.starts_with("method,metric,candidates,failures,top1,top5"));
        assert_eq!(stdout.lines().count(), 5);
        reports.push(fs::read(out_dir.join("topn.csv")).unwrap());
        for f in ["ranks_3cosadd.csv", "classes.csv", "report.json"] {
            assert!(out_dir.join(f).exists(), "{f}");
        }
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].clone()).unwrap();
    assert!(text.lines().next().unwrap().starts_with('#'));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    gen_classes(tmp.path());
    let emb = tmp.path().join("embeddings.txt");
    let pairs = tmp.path().join("pairs.tsv");
    let out_dir = tmp.path().join("out");
    assert_eq!(plurvec(&["analogy", "evaluate"]).status.code(), Some(2));
    assert_eq!(plurvec(&["frobnicate"]).status.code(), Some(2));
    let no_prime = plurvec(&[
        "analogy", "evaluate", "--embeddings", p(&emb), "--pairs", p(&pairs), "--method", "3cosadd", "--out",
        p(&out_dir),
    ]);
    assert_eq!(no_prime.status.code(), Some(2));
    let bad_metric = plurvec(&[
        "analogy", "evaluate", "--embeddings", p(&emb), "--pairs", p(&pairs), "--metric", "manhattan", "--out",
        p(&out_dir),
    ]);
    assert_eq!(bad_metric.status.code(), Some(2));
    let empty = tmp.path().join("empty.tsv");
    fs::write(&empty, "# nothing\n").unwrap();
    let out = plurvec(&["analogy", "evaluate", "--embeddings", p(&emb), "--pairs", p(&empty), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    gen_classes(tmp.path());
    let emb = tmp.path().join("embeddings.txt");
    let out_dir = tmp.path().join("out");

    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "2 3\nfoo 1 2 3\nbar 1 x 3\n").unwrap();
    assert_eq!(plurvec(&["embed", "load", "--embeddings", p(&bad)]).status.code(), Some(3));

    let pairs = tmp.path().join("missing.tsv");
    fs::write(&pairs, "c000w0000\tc000w0000s\tclass000\nghost\tghosts\tclass000\n").unwrap();
    let strict = plurvec(&["shifts", "stats", "--embeddings", p(&emb), "--pairs", p(&pairs), "--out", p(&out_dir)]);
    assert_eq!(strict.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("ghost"));
    let lenient = plurvec(&[
        "shifts", "classavg", "--embeddings", p(&emb), "--pairs", p(&pairs), "--skip-missing", "--min-class-size",
        "1", "--out", p(&out_dir),
    ]);
    assert!(lenient.status.success(), "{}", String::from_utf8_lossy(&lenient.stderr));
}

#[test]
fn fracss_fit_profile_and_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("lin");
    let out = plurvec(&["synth", "gen", "--kind", "linear", "--rows", "400", "--dim", "10", "--out", p(&data)]);
    assert!(out.status.success());
    let emb = data.join("embeddings.txt");
    let pairs = data.join("pairs.tsv");
    let map = tmp.path().join("map.txt");
    let out = plurvec(&["fracss", "fit", "--embeddings", p(&emb), "--pairs", p(&pairs), "--out", p(&map)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = plurvec(&["fracss", "profile", "--map", p(&map)]);
    let prof: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let diag = prof["diag_mean"].as_f64().unwrap();
    assert!((diag - 0.57).abs() < 0.05, "{diag}");

    let mapped = tmp.path().join("mapped.txt");
    let out = plurvec(&[
        "fracss", "apply", "--map", p(&map), "--embeddings", p(&emb), "--words", "s00000,s00001", "--neighbors",
        "2", "--out", p(&mapped),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    // a contracting map keeps the direction of its input, so the source word
    // ranks first and its partner second
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("s00000,1,s00000,"));
    assert!(lines[2].starts_with("s00000,2,p00000,"));
    assert!(fs::read_to_string(&mapped).unwrap().starts_with("2 10\n"));

    let eval_dir = tmp.path().join("eval");
    let out = plurvec(&[
        "fracss", "evaluate", "--embeddings", p(&emb), "--pairs", p(&pairs), "--seed", "1", "--out", p(&eval_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval_dir.join("diagonal.csv").exists());
}

#[test]
fn stats_print_json() {
    let tmp = tempfile::tempdir().unwrap();
    let two = tmp.path().join("paired.csv");
    fs::write(&two, "before,after\n3,1\n5,2\n4,4.5\n6,2\n7,3\n").unwrap();
    let out = plurvec(&["stats", "wilcoxon", "--input", p(&two), "--alternative", "greater"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // ranks of |d| = 2, 3, 0.5, 4, 4 → W+ = 2 + 3 + 4.5 + 4.5
    assert_eq!(v["statistic"].as_f64(), Some(14.0));
    assert_eq!(v["method"], "wilcoxon-exact");

    let grid = tmp.path().join("grid.txt");
    fs::write(&grid, "1 2 3\n1 2 3\n").unwrap();
    let out = plurvec(&["stats", "friedman", "--input", p(&grid)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["statistic"].as_f64(), Some(4.0));
}

#[test]
fn classify_lda_writes_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("vectors.tsv");
    let mut text = String::new();
    for i in 0..30 {
        let (label, base) = if i % 2 == 0 { ("even", 0.0) } else { ("odd", 5.0) };
        text.push_str(&format!("id{i}\t{label}\t{}\t{}\n", base + (i % 5) as f64 * 0.1, base - (i % 3) as f64 * 0.2));
    }
    fs::write(&input, text).unwrap();
    let out_dir = tmp.path().join("lda");
    let out = plurvec(&["classify", "lda", "--vectors", p(&input), "--seed", "2", "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["cv"]["test_accuracy"]["mean"].as_f64(), Some(1.0));
    assert_eq!(fs::read_to_string(out_dir.join("folds.csv")).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn dl_evaluate_on_synthetic_lexicon() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("lex");
    let out = plurvec(&["synth", "gen", "--kind", "lexicon", "--seed", "1", "--out", p(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let args = |sub: &str, out_dir: &Path| -> Vec<String> {
        let mut a: Vec<String> = ["dl", sub, "--lexicon"].iter().map(|s| s.to_string()).collect();
        for (flag, path) in [
            ("", data.join("lexicon.tsv")),
            ("--pair-info", data.join("pair_info.tsv")),
            ("--embeddings", data.join("embeddings.txt")),
            ("--pairs", data.join("pairs.tsv")),
            ("--out", out_dir.to_path_buf()),
        ] {
            if !flag.is_empty() {
                a.push(flag.into());
            }
            a.push(p(&path).into());
        }
        a
    };
    let eval = tmp.path().join("eval");
    let a = args("evaluate", &eval);
    let out = plurvec(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(eval.join("errors_cosclassavg_test.csv").exists());

    let fit = tmp.path().join("fit");
    let mut a = args("fit", &fit);
    a.extend(["--source".into(), "cosclassavg".into()]);
    let out = plurvec(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(eval.join("split.tsv")).unwrap(),
        fs::read_to_string(fit.join("split.tsv")).unwrap()
    );
}
