//! The run configuration: one TOML file, patched by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use taxozsl::data::SynthSpec;
use taxozsl::eval::{DEFAULT_GRID_POINTS, DEFAULT_SYNTH_PER_CLASS, FRACTIONS};
use taxozsl::gan::TrainConfig;
use taxozsl::gradcheck::{EPS, TOLERANCE};
use taxozsl::taxonomy::SplitMode;

use crate::seen_bank::seen_banks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own from this and a stage tag.
    pub seed: u64,
    pub paths: Paths,
    pub taxonomy: TreeShape,
    pub synth: SynthSpec,
    pub split: SplitSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub retrieve: RetrieveSection,
    pub featurize: FeaturizeSection,
    pub gradcheck: GradcheckSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            taxonomy: TreeShape::default(),
            synth: SynthSpec::default(),
            split: SplitSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            retrieve: RetrieveSection::default(),
            featurize: FeaturizeSection::default(),
            gradcheck: GradcheckSection::default(),
        }
    }
}

/// Inputs left unset fall back to the files `synth-data` and `train` write
/// into `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: PathBuf,
    pub taxonomy: Option<PathBuf>,
    pub visual: Option<PathBuf>,
    pub semantic: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            taxonomy: None,
            visual: None,
            semantic: None,
            checkpoint: None,
            corpus: None,
        }
    }
}

impl Paths {
    fn or_out(&self, p: &Option<PathBuf>, name: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.out.join(name))
    }

    pub fn taxonomy(&self) -> PathBuf {
        self.or_out(&self.taxonomy, "taxonomy.csv")
    }

    pub fn visual(&self) -> PathBuf {
        self.or_out(&self.visual, "visual.csv")
    }

    pub fn semantic(&self) -> PathBuf {
        self.or_out(&self.semantic, "semantic.csv")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.or_out(&self.checkpoint, "checkpoint.json")
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Shape of the balanced tree `synth-data` builds when no taxonomy file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeShape {
    pub families: usize,
    pub genera_per_family: usize,
    pub species_per_genus: usize,
}

impl Default for TreeShape {
    fn default() -> Self {
        Self {
            families: 3,
            genera_per_family: 2,
            species_per_genus: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub mode: SplitMode,
    pub unseen_fraction: f64,
    /// Share of each seen class held out from training as GZSL seen queries.
    pub seen_test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            mode: SplitMode::Easy,
            unseen_fraction: 1.0 / 3.0,
            seen_test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Synthesized features per class.
    pub n: usize,
    pub k: usize,
    pub grid_points: usize,
    /// Name of the seen-class bank source used for GZSL.
    pub seen_bank: String,
    pub embedding_dims: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n: DEFAULT_SYNTH_PER_CLASS,
            k: 1,
            grid_points: DEFAULT_GRID_POINTS,
            seen_bank: "synthesized".into(),
            embedding_dims: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieveSection {
    pub fractions: Vec<f64>,
}

impl Default for RetrieveSection {
    fn default() -> Self {
        Self {
            fractions: FRACTIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeSection {
    pub vocab_limit: usize,
}

impl Default for FeaturizeSection {
    fn default() -> Self {
        Self { vocab_limit: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub cases: usize,
    pub eps: f64,
    pub tolerance: f64,
    /// Test hook: perturb this probe's analytic gradient.
    pub corrupt: Option<String>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            cases: 20,
            eps: EPS,
            tolerance: TOLERANCE,
            corrupt: None,
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `section.key=value`
    /// overrides in order, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (text, origin) = match path {
            Some(p) => (
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
                p.display().to_string(),
            ),
            None => (String::new(), "<defaults>".to_string()),
        };
        // the file alone first, so its own mistakes are reported with a line number
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| anyhow!("config {origin}: {e}"))?;
        let cfg = if overrides.is_empty() {
            cfg
        } else {
            let mut table: toml::Table =
                toml::from_str(&text).map_err(|e| anyhow!("config {origin}: {e}"))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            table
                .try_into()
                .map_err(|e| anyhow!("config {origin} with --set overrides: {e}"))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().context("[train]")?;
        if self.train.seed != 0 {
            bail!("[train] seed: the training seed is derived from the root `seed`; set that instead");
        }
        self.synth.validate().context("[synth]")?;
        let t = &self.taxonomy;
        if t.families == 0 || t.genera_per_family == 0 || t.species_per_genus == 0 {
            bail!("[taxonomy]: families, genera_per_family and species_per_genus must be at least 1");
        }
        let s = &self.split;
        if !(s.unseen_fraction > 0.0 && s.unseen_fraction < 1.0) {
            bail!("[split] unseen_fraction: {} is outside (0, 1)", s.unseen_fraction);
        }
        if !(0.0..1.0).contains(&s.seen_test_fraction) {
            bail!("[split] seen_test_fraction: {} is outside [0, 1)", s.seen_test_fraction);
        }
        let e = &self.eval;
        if e.n == 0 {
            bail!("[eval] n: at least one synthesized feature per class is needed");
        }
        if e.k == 0 {
            bail!("[eval] k: must be at least 1");
        }
        if e.grid_points == 0 {
            bail!("[eval] grid_points: must be at least 1");
        }
        if e.embedding_dims == 0 {
            bail!("[eval] embedding_dims: must be at least 1");
        }
        seen_banks().get(&e.seen_bank).context("[eval] seen_bank")?;
        if self.retrieve.fractions.is_empty() {
            bail!("[retrieve] fractions: list is empty");
        }
        if let Some(f) = self.retrieve.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            bail!("[retrieve] fractions: {f} is outside (0, 1]");
        }
        if self.featurize.vocab_limit == 0 {
            bail!("[featurize] vocab_limit: must be at least 1");
        }
        let g = &self.gradcheck;
        if g.cases == 0 || !(g.eps > 0.0) || !(g.tolerance > 0.0) {
            bail!("[gradcheck]: cases, eps and tolerance must be positive");
        }
        Ok(())
    }
}

/// `section.key=value` or `key=value`. The value is read as a TOML value and
/// falls back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("--set {spec}: expected key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("--set {spec}: malformed key `{key}`");
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, sections) = parts.split_last().expect("non-empty");
    let mut node = table;
    for s in sections {
        node = node
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set {spec}: `{s}` is not a section"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::load(None, &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let cfg = RunConfig::load(
            None,
            &[
                "seed=7".into(),
                "train.iterations=3".into(),
                "train.tr_weights.species=1.0".into(),
                "train.tr_weights.genus=0.0".into(),
                "train.tr_weights.family=0.0".into(),
                "split.mode=hard".into(),
                "paths.out=elsewhere".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.iterations, 3);
        assert_eq!(cfg.split.mode, SplitMode::Hard);
        assert_eq!(cfg.paths.checkpoint(), PathBuf::from("elsewhere/checkpoint.json"));
    }

    #[test]
    fn rejections_name_the_field() {
        let err = |sets: &[&str]| {
            let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
            format!("{:#}", RunConfig::load(None, &sets).unwrap_err())
        };
        assert!(err(&["train.tr_weights.species=0.9"]).contains("TR weights"));
        assert!(err(&["train.bogus=1"]).contains("bogus"));
        assert!(err(&["eval.seen_bank=nope"]).contains("seen_bank"));
        assert!(err(&["split.unseen_fraction=1.5"]).contains("unseen_fraction"));
        assert!(err(&["train.seed=3"]).contains("root `seed`"));
        assert!(err(&["novalue"]).contains("key=value"));
    }

    #[test]
    fn file_errors_name_the_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "seed = 1\n[train]\niterations = \"many\"\n").unwrap();
        let msg = format!("{:#}", RunConfig::load(Some(&p), &[]).unwrap_err());
        assert!(msg.contains("run.toml"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }
}
