use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use taxozsl::data::Dataset;
use taxozsl::eval::{classify_all, synthesize_bank, top1_per_class};
use taxozsl::gan::Checkpoint;
use taxozsl::numerics::derive_seed;
use taxozsl::taxonomy::{Split, Taxonomy};

fn taxozsl(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxozsl"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = taxozsl(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn fails(out: &Path, args: &[&str]) -> String {
    let o = taxozsl(out, args);
    assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(o.stderr).unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_string).collect()
}

/// `key = value` pairs of the eval report.
fn report(dir: &Path) -> BTreeMap<String, String> {
    lines(&dir.join("report.txt"))
        .iter()
        .map(|l| {
            let (k, v) = l.split_once(" = ").expect("key = value");
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn synth_data_counts_and_reproducibility() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let stdout = ok(a.path(), &["synth-data", "--set", "synth.per_class=7"]);
    assert!(stdout.contains("12 classes, 84 samples"), "{stdout}");
    ok(b.path(), &["synth-data", "--set", "synth.per_class=7"]);
    for f in ["taxonomy.csv", "visual.csv", "semantic.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(lines(&a.path().join("visual.csv")).len(), 1 + 84);
    assert_eq!(lines(&a.path().join("semantic.csv")).len(), 1 + 12);

    let other = tempfile::tempdir().unwrap();
    ok(other.path(), &["synth-data", "--set", "synth.per_class=7", "--seed", "1"]);
    assert_ne!(
        fs::read(a.path().join("visual.csv")).unwrap(),
        fs::read(other.path().join("visual.csv")).unwrap()
    );
}

#[test]
fn zero_noise_gives_identical_rows_per_class() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth-data", "--set", "synth.noise_scale=0", "--set", "synth.per_class=3"]);
    let mut by_class: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for l in lines(&d.path().join("visual.csv")).iter().skip(1) {
        let (label, rest) = l.split_once(',').unwrap();
        by_class.entry(label.to_string()).or_default().push(rest.to_string());
    }
    assert_eq!(by_class.len(), 12);
    for rows in by_class.values() {
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r == &rows[0]));
    }
}

#[test]
fn featurize_examples() {
    let d = tempfile::tempdir().unwrap();
    let corpus = d.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("0.txt"), "a a b").unwrap();
    fs::write(corpus.join("1.txt"), "B c").unwrap();
    let out = d.path().join("out");
    ok(&out, &["featurize", "--corpus", corpus.to_str().unwrap()]);
    let rows = lines(&out.join("semantic.csv"));
    assert_eq!(rows.len(), 3);
    // vocabulary by document frequency: b, a, c
    let idf_rare = 1.5f64.ln() + 1.0;
    let norm = |v: [f64; 3]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    };
    let want = [
        norm([1.0 / 3.0, 2.0 / 3.0 * idf_rare, 0.0]),
        norm([0.5, 0.0, 0.5 * idf_rare]),
    ];
    for (row, w) in rows[1..].iter().zip(want) {
        let got: Vec<f64> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        for (g, e) in got.iter().zip(w) {
            assert!((g - e).abs() < 1e-12, "{row}");
        }
    }

    // one document, and two identical ones
    fs::remove_file(corpus.join("1.txt")).unwrap();
    ok(&out, &["featurize", "--corpus", corpus.to_str().unwrap()]);
    assert_eq!(lines(&out.join("semantic.csv")).len(), 2);
    fs::write(corpus.join("1.txt"), "a a b").unwrap();
    ok(&out, &["featurize", "--corpus", corpus.to_str().unwrap()]);
    let rows = lines(&out.join("semantic.csv"));
    assert_eq!(rows[1].split_once(',').unwrap().1, rows[2].split_once(',').unwrap().1);
}

#[test]
fn bad_configs_exit_nonzero_and_say_why() {
    let d = tempfile::tempdir().unwrap();
    let err = fails(d.path(), &["train", "--set", "train.tr_weights.species=0.7"]);
    assert!(err.contains("weight constraint violated"), "{err}");

    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n\n[eval]\nneighbours = 5\n").unwrap();
    let err = fails(d.path(), &["eval", "--config", cfg.to_str().unwrap()]);
    assert!(err.contains("run.toml") && err.contains("neighbours") && err.contains("line 4"), "{err}");

    let err = fails(d.path(), &["train"]);
    assert!(err.contains("taxonomy.csv") && err.contains("does not exist"), "{err}");

    ok(d.path(), &["synth-data"]);
    let vis = d.path().join("visual.csv");
    let mut text = fs::read_to_string(&vis).unwrap();
    text.push_str("99,0,0,0,0,0,0,0,0\n");
    fs::write(&vis, text).unwrap();
    let err = fails(d.path(), &["train"]);
    assert!(err.contains("visual.csv:482") && err.contains("99"), "{err}");

    let o = Command::new(env!("CARGO_BIN_EXE_taxozsl"))
        .env("TAXOZSL_THREADS", "zero")
        .args(["gradcheck", "--cases", "1"])
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("TAXOZSL_THREADS"));
}

#[test]
fn zero_iterations_checkpoint_holds_the_initial_parameters() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth-data"]);
    ok(d.path(), &["train", "--set", "train.iterations=0"]);
    let first = fs::read(d.path().join("checkpoint.json")).unwrap();
    let ck = Checkpoint::load(&d.path().join("checkpoint.json")).unwrap();
    assert_eq!(ck.iterations, 0);
    assert_eq!(lines(&d.path().join("train_log.csv")).len(), 1);
    ok(d.path(), &["train", "--set", "train.iterations=0"]);
    assert_eq!(first, fs::read(d.path().join("checkpoint.json")).unwrap());
}

#[test]
fn eval_and_retrieve_agree_with_the_library() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(dir, &["synth-data", "--seed", "4"]);
    ok(dir, &["train", "--seed", "4", "--set", "train.iterations=300"]);
    ok(dir, &["eval", "--seed", "4"]);
    let r = report(dir);
    for key in ["zsl_top1", "gzsl_seen", "gzsl_unseen", "h", "ausuc"] {
        let v: f64 = r[key].parse().unwrap_or_else(|_| panic!("{key} = {}", r[key]));
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    let suc = lines(&dir.join("suc.csv"));
    assert_eq!(suc[0], "offset,seen,unseen");
    assert!(suc[1].starts_with("-inf,") && suc.last().unwrap().starts_with("inf,"));
    let emb = lines(&dir.join("embedding.csv"));
    assert_eq!(emb[0], "label,kind,pc1,pc2");

    // top-1 recomputed from the written files
    let tax = Taxonomy::read(&dir.join("taxonomy.csv")).unwrap();
    let data = Dataset::load(&dir.join("visual.csv"), &dir.join("semantic.csv"), &tax).unwrap();
    let split = Split::read(&dir.join("split.csv")).unwrap();
    let g = Checkpoint::load(&dir.join("checkpoint.json")).unwrap().generator().unwrap();
    let sem = split.unseen.iter().map(|&c| (c, data.semantic(c).unwrap().to_vec())).collect();
    let bank = synthesize_bank(&g, &sem, 60, derive_seed(4, "eval")).unwrap();
    let unseen = data.restrict(&split.unseen);
    let preds = classify_all(&bank, unseen.visual(), 1).unwrap();
    let pairs: Vec<_> = unseen.labels().iter().zip(&preds).map(|(&y, p)| (y, p.label)).collect();
    let top1 = top1_per_class(&pairs, &split.unseen).unwrap();
    assert_eq!(r["zsl_top1"].parse::<f64>().unwrap(), top1);

    let stdout = ok(dir, &["retrieve", "--seed", "4"]);
    assert_eq!(stdout.lines().count(), 3);
    let map = lines(&dir.join("map.csv"));
    assert_eq!(map[0], "fraction,map");
    let fractions: Vec<&str> = map[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(fractions, ["0.25", "0.5", "1.0"]);
    for f in ["retrieval_25.csv", "retrieval_50.csv", "retrieval_100.csv"] {
        assert_eq!(lines(&dir.join(f)).len(), 1 + split.unseen.len(), "{f}");
    }

    // the real seen bank is selectable by name
    ok(dir, &["eval", "--seed", "4", "--set", "eval.seen_bank=real"]);
    assert_eq!(report(dir)["seen_bank"], "real");
}

#[test]
fn single_unseen_class_retrieves_perfectly() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let shape = [
        "--set", "taxonomy.families=1",
        "--set", "taxonomy.genera_per_family=1",
        "--set", "taxonomy.species_per_genus=3",
        "--set", "split.unseen_fraction=0.2",
    ];
    let with = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd];
        a.extend_from_slice(&shape);
        a.extend_from_slice(extra);
        a.into_iter().map(str::to_string).collect::<Vec<_>>()
    };
    let run = |args: Vec<String>| ok(dir, &args.iter().map(String::as_str).collect::<Vec<_>>());
    run(with("synth-data", &[]));
    run(with("train", &["--set", "train.iterations=20"]));
    run(with("retrieve", &[]));
    for l in &lines(&dir.join("map.csv"))[1..] {
        assert!(l.ends_with(",1.0"), "{l}");
    }
}

#[test]
fn gradcheck_reports_every_term_and_catches_corruption() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gradcheck", "--cases", "3"]);
    let rows = lines(&d.path().join("gradcheck.csv"));
    let names: Vec<&str> = rows[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    for term in [
        "tr_species", "tr_genus", "tr_family", "tr_total",
        "generator_wasserstein", "generator_classification", "generator_total",
        "discriminator_wasserstein", "gradient_penalty", "discriminator_classification",
        "discriminator_total",
    ] {
        assert!(names.contains(&term), "{term} missing");
    }
    assert!(rows[1..].iter().all(|l| l.ends_with(",pass")));

    let err = fails(d.path(), &["gradcheck", "--cases", "3", "--set", "gradcheck.corrupt=tr_genus"]);
    assert!(err.contains("tr_genus"), "{err}");
    let rows = lines(&d.path().join("gradcheck.csv"));
    let failed: Vec<&String> = rows.iter().filter(|l| l.ends_with(",FAIL")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].starts_with("tr_genus,"));
}
