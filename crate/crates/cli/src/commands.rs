//! One function per subcommand. Each reads only the config and the files it
//! names, and writes only under `paths.out` (or the configured output paths).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use taxozsl::data::{read_corpus, synth_dataset, tfidf_featurize, write_semantics, Dataset};
use taxozsl::eval::{
    ausuc, classify_all, export_embedding, mean_average_precision, per_class_accuracy,
    synthesize_bank, write_embedding, ClassAccuracy, FeatureKind, SynthesizedBank,
};
use taxozsl::experiment::balanced_taxonomy;
use taxozsl::gan::{train, write_log, Checkpoint, Generator, TrainConfig};
use taxozsl::gradcheck::{run_gradcheck, write_report, GradcheckOptions, ProbeReport};
use taxozsl::numerics::{derive_seed, SeededRng, Tensor};
use taxozsl::table::write_table;
use taxozsl::taxonomy::{make_split, SpeciesId, Split, SplitSpec, Taxonomy};

use crate::config::RunConfig;
use crate::seen_bank::{seen_banks, SeenBankInput};

/// Stage tags for seed derivation.
pub const DATA: &str = "data";
pub const SPLIT: &str = "split";
pub const TRAIN: &str = "train";
pub const EVAL: &str = "eval";

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} file {} does not exist", path.display());
    }
    Ok(())
}

fn load_inputs(cfg: &RunConfig) -> Result<(Taxonomy, Dataset)> {
    let p = &cfg.paths;
    let (tp, vp, sp) = (p.taxonomy(), p.visual(), p.semantic());
    require(&tp, "taxonomy")?;
    require(&vp, "visual feature")?;
    require(&sp, "semantic feature")?;
    let tax = Taxonomy::read(&tp)?;
    let data = Dataset::load(&vp, &sp, &tax)?;
    Ok((tax, data))
}

/// The species split and the per-class seen holdout, both drawn from the
/// `split` stage seed so train, eval and retrieve agree.
struct Partition {
    split: Split,
    seen_train: Dataset,
    seen_test: Dataset,
    unseen: Dataset,
    /// Rows of the full dataset that make up `unseen`, in order.
    unseen_rows: Vec<usize>,
}

fn partition(cfg: &RunConfig, tax: &Taxonomy, data: &Dataset) -> Result<Partition> {
    let seed = derive_seed(cfg.seed, SPLIT);
    let split = make_split(
        tax,
        &SplitSpec {
            mode: cfg.split.mode,
            unseen_fraction: cfg.split.unseen_fraction,
            seed,
        },
    )?;
    for &c in &split.seen {
        if data.indices_of(c).is_empty() {
            bail!("seen class {c} has no samples in {}", cfg.paths.visual().display());
        }
    }
    let mut rng = SeededRng::new(seed).substream("holdout");
    let (seen_train, seen_test) = data
        .restrict(&split.seen)
        .holdout_per_class(cfg.split.seen_test_fraction, &mut rng);
    let unseen_rows: Vec<usize> = (0..data.len())
        .filter(|&i| split.is_unseen(data.label(i)))
        .collect();
    Ok(Partition {
        unseen: data.subset(&unseen_rows),
        unseen_rows,
        split,
        seen_train,
        seen_test,
    })
}

fn load_checkpoint(cfg: &RunConfig, part: &Partition) -> Result<Generator> {
    let path = cfg.paths.checkpoint();
    require(&path, "checkpoint")?;
    let ck = Checkpoint::load(&path)?;
    if ck.classes != part.split.seen {
        bail!(
            "checkpoint {} was trained on classes {:?} but this config's split has seen classes {:?}",
            path.display(),
            ck.classes,
            part.split.seen
        );
    }
    Ok(ck.generator()?)
}

fn semantics_of(data: &Dataset, classes: &[SpeciesId]) -> Result<BTreeMap<SpeciesId, Vec<f64>>> {
    classes
        .iter()
        .map(|&c| match data.semantic(c) {
            Some(t) => Ok((c, t.to_vec())),
            None => bail!("class {c} has no semantic vector"),
        })
        .collect()
}

fn unseen_bank(cfg: &RunConfig, g: &Generator, data: &Dataset, split: &Split) -> Result<SynthesizedBank> {
    let sem = semantics_of(data, &split.unseen)?;
    Ok(synthesize_bank(g, &sem, cfg.eval.n, derive_seed(cfg.seed, EVAL))?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub classes: usize,
    pub samples: usize,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub files: Vec<PathBuf>,
}

/// Writes `taxonomy.csv`, `visual.csv` and `semantic.csv` under `out`. Uses
/// `paths.taxonomy` when set, otherwise a balanced tree of `[taxonomy]` shape.
pub fn cmd_synth_data(cfg: &RunConfig) -> Result<SynthSummary> {
    let tax = match &cfg.paths.taxonomy {
        Some(p) => {
            require(p, "taxonomy")?;
            Taxonomy::read(p)?
        }
        None => {
            let t = &cfg.taxonomy;
            balanced_taxonomy(t.families, t.genera_per_family, t.species_per_genus)?
        }
    };
    let data = synth_dataset(&tax, &cfg.synth, derive_seed(cfg.seed, DATA))?;
    let out = &cfg.paths;
    let files = vec![
        out.output("taxonomy.csv"),
        out.output("visual.csv"),
        out.output("semantic.csv"),
    ];
    tax.write(&files[0])?;
    data.write(&files[1], &files[2])?;
    Ok(SynthSummary {
        classes: tax.num_species(),
        samples: data.len(),
        visual_dim: data.visual_dim(),
        semantic_dim: data.semantic_dim(),
        files,
    })
}

/// TF-IDF vectors for the documents in `paths.corpus`, written to
/// `paths.semantic`. Returns the output path and the number of documents.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<(PathBuf, usize)> {
    let Some(dir) = &cfg.paths.corpus else {
        bail!("[paths] corpus: featurize needs a corpus directory");
    };
    if !dir.is_dir() {
        bail!("corpus directory {} does not exist", dir.display());
    }
    let corpus = read_corpus(dir)?;
    let tfidf = tfidf_featurize(&corpus, cfg.featurize.vocab_limit)?;
    let path = cfg.paths.semantic();
    write_semantics(&path, &tfidf.vectors)?;
    Ok((path, tfidf.vectors.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub seen: Vec<SpeciesId>,
    pub unseen: Vec<SpeciesId>,
    pub samples: usize,
    pub iterations: usize,
    pub checkpoint: PathBuf,
}

/// Splits, trains on the seen-train samples, and writes `split.csv`, the
/// checkpoint and `train_log.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let (tax, data) = load_inputs(cfg)?;
    let part = partition(cfg, &tax, &data)?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, TRAIN),
        ..cfg.train.clone()
    };
    let outcome = train(&part.seen_train, &tax, &train_cfg)?;
    part.split.write(&cfg.paths.output("split.csv"), &tax)?;
    let checkpoint = cfg.paths.checkpoint();
    Checkpoint::from_outcome(&outcome, &train_cfg).save(&checkpoint)?;
    write_log(&cfg.paths.output("train_log.csv"), &outcome.log)?;
    Ok(TrainSummary {
        seen: part.split.seen.clone(),
        unseen: part.split.unseen.clone(),
        samples: part.seen_train.len(),
        iterations: outcome.log.len(),
        checkpoint,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub zsl_top1: f64,
    pub gzsl_seen: f64,
    pub gzsl_unseen: f64,
    /// `None` when both GZSL accuracies are zero.
    pub harmonic: Option<f64>,
    pub ausuc: f64,
    pub zsl_classes: Vec<ClassAccuracy>,
    pub gzsl_seen_classes: Vec<ClassAccuracy>,
    pub gzsl_unseen_classes: Vec<ClassAccuracy>,
}

fn mean_accuracy(t: &[ClassAccuracy]) -> f64 {
    t.iter().map(ClassAccuracy::accuracy).sum::<f64>() / t.len() as f64
}

fn labelled(labels: &[SpeciesId], preds: &[taxozsl::eval::Prediction]) -> Vec<(SpeciesId, SpeciesId)> {
    labels.iter().zip(preds).map(|(&y, p)| (y, p.label)).collect()
}

/// Zero-shot top-1 on the unseen samples against the unseen bank, and the
/// generalized numbers (seen-test and unseen queries against the merged
/// bank). Writes `report.txt`, `suc.csv`, `per_class.csv` and `embedding.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let (tax, data) = load_inputs(cfg)?;
    let part = partition(cfg, &tax, &data)?;
    if part.seen_test.is_empty() {
        bail!("[split] seen_test_fraction: no seen samples are held out for generalized evaluation");
    }
    let g = load_checkpoint(cfg, &part)?;
    let e = &cfg.eval;
    let unseen = unseen_bank(cfg, &g, &data, &part.split)?;

    let zsl = classify_all(&unseen, part.unseen.visual(), e.k)?;
    let zsl_classes = per_class_accuracy(&labelled(part.unseen.labels(), &zsl), &part.split.unseen)?;

    let source = seen_banks().get(&e.seen_bank)?;
    let seen_sem = semantics_of(&data, &part.split.seen)?;
    let seen = source.build(&SeenBankInput {
        generator: &g,
        semantics: &seen_sem,
        seen_train: &part.seen_train,
        n: e.n,
        seed: derive_seed(cfg.seed, EVAL),
    })?;
    let bank = seen.merge(&unseen)?;
    let gs = classify_all(&bank, part.seen_test.visual(), e.k)?;
    let gu = classify_all(&bank, part.unseen.visual(), e.k)?;
    let gzsl_seen_classes = per_class_accuracy(&labelled(part.seen_test.labels(), &gs), &part.split.seen)?;
    let gzsl_unseen_classes = per_class_accuracy(&labelled(part.unseen.labels(), &gu), &part.split.unseen)?;
    let (gzsl_seen, gzsl_unseen) = (mean_accuracy(&gzsl_seen_classes), mean_accuracy(&gzsl_unseen_classes));
    let curve = ausuc(
        &bank,
        (part.seen_test.visual(), part.seen_test.labels()),
        (part.unseen.visual(), part.unseen.labels()),
        None,
        e.grid_points,
    )?;
    let report = EvalReport {
        zsl_top1: mean_accuracy(&zsl_classes),
        gzsl_seen,
        gzsl_unseen,
        harmonic: taxozsl::eval::harmonic_mean(gzsl_unseen, gzsl_seen).ok(),
        ausuc: curve.area,
        zsl_classes,
        gzsl_seen_classes,
        gzsl_unseen_classes,
    };

    let out = &cfg.paths;
    let mut kv = String::new();
    let h = report.harmonic.map_or("undefined".to_string(), |h| h.to_string());
    for (k, v) in [
        ("seed", cfg.seed.to_string()),
        ("checkpoint", out.checkpoint().display().to_string()),
        ("seen_bank", e.seen_bank.clone()),
        ("n", e.n.to_string()),
        ("k", e.k.to_string()),
        ("grid_points", e.grid_points.to_string()),
        ("seen_classes", part.split.seen.len().to_string()),
        ("unseen_classes", part.split.unseen.len().to_string()),
        ("zsl_top1", report.zsl_top1.to_string()),
        ("gzsl_seen", gzsl_seen.to_string()),
        ("gzsl_unseen", gzsl_unseen.to_string()),
        ("h", h),
        ("ausuc", report.ausuc.to_string()),
    ] {
        writeln!(kv, "{k} = {v}").expect("string write");
    }
    write_text(&out.output("report.txt"), &kv)?;
    write_table(
        &out.output("suc.csv"),
        "offset,seen,unseen",
        curve
            .points
            .iter()
            .map(|p| format!("{:?},{:?},{:?}", p.offset, p.seen, p.unseen)),
    )?;
    let rows = [
        ("zsl", &report.zsl_classes),
        ("gzsl_seen", &report.gzsl_seen_classes),
        ("gzsl_unseen", &report.gzsl_unseen_classes),
    ]
    .into_iter()
    .flat_map(|(setting, table)| {
        table.iter().map(move |a| {
            format!("{setting},{},{},{},{:?}", a.class, a.correct, a.total, a.accuracy())
        })
    });
    write_table(&out.output("per_class.csv"), "setting,class,correct,total,accuracy", rows)?;

    let mut rows: Vec<Vec<f64>> = part.unseen.visual().row_iter().map(<[f64]>::to_vec).collect();
    rows.extend(unseen.features().row_iter().map(<[f64]>::to_vec));
    let mut labels = part.unseen.labels().to_vec();
    labels.extend_from_slice(unseen.labels());
    let mut kinds = vec![FeatureKind::Real; part.unseen.len()];
    kinds.extend(std::iter::repeat_n(FeatureKind::Synth, unseen.len()));
    let emb = export_embedding(&Tensor::from_rows(&rows)?, &labels, &kinds, e.embedding_dims)?;
    write_embedding(&out.output("embedding.csv"), &emb)?;
    Ok(report)
}

/// mAP per fraction, in config order.
pub fn cmd_retrieve(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let (tax, data) = load_inputs(cfg)?;
    let part = partition(cfg, &tax, &data)?;
    let g = load_checkpoint(cfg, &part)?;
    let bank = unseen_bank(cfg, &g, &data, &part.split)?;
    let mut maps = Vec::new();
    for &f in &cfg.retrieve.fractions {
        let (map, runs) = mean_average_precision(&bank, &part.split.unseen, &part.unseen, f)?;
        let rows = runs.iter().map(|r| {
            let ranked: Vec<String> = r.ranked.iter().map(|&i| part.unseen_rows[i].to_string()).collect();
            format!("{},{:?},{}", r.class, r.average_precision, ranked.join(" "))
        });
        let name = format!("retrieval_{}.csv", (f * 100.0).round());
        write_table(&cfg.paths.output(&name), "class,average_precision,ranked_rows", rows)?;
        maps.push((f, map));
    }
    write_table(
        &cfg.paths.output("map.csv"),
        "fraction,map",
        maps.iter().map(|(f, m)| format!("{f:?},{m:?}")),
    )?;
    Ok(maps)
}

/// Runs every gradient probe and writes `gradcheck.csv`. Fails when any
/// probe exceeds the tolerance, after writing the report.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Vec<ProbeReport>> {
    let g = &cfg.gradcheck;
    let reports = run_gradcheck(&GradcheckOptions {
        cases: g.cases,
        seed: cfg.seed,
        eps: g.eps,
        tolerance: g.tolerance,
        corrupt: g.corrupt.clone(),
    })?;
    let path = cfg.paths.output("gradcheck.csv");
    write_report(&path, &reports)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if !failed.is_empty() {
        bail!(
            "gradient check failed for {} (see {})",
            failed.join(", "),
            path.display()
        );
    }
    Ok(reports)
}
