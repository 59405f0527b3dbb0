//! Family → Genus → Species hierarchy, similarity queries and seen/unseen
//! splits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::table::{write_table, Table};

/// Class label; species ids are dense `0..C`.
pub type SpeciesId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Species,
    Genus,
    Family,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Species, Level::Genus, Level::Family];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Species => "species",
            Level::Genus => "genus",
            Level::Family => "family",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "species" => Ok(Level::Species),
            "genus" => Ok(Level::Genus),
            "family" => Ok(Level::Family),
            other => Err(Error::InvalidConfig(format!("unknown taxonomy level `{other}`"))),
        }
    }
}

/// One input row: `(species, genus, family)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxonRecord {
    pub species: SpeciesId,
    pub genus: usize,
    pub family: usize,
}

impl From<(usize, usize, usize)> for TaxonRecord {
    fn from((species, genus, family): (usize, usize, usize)) -> Self {
        Self {
            species,
            genus,
            family,
        }
    }
}

/// Immutable three-level tree. Genus and family ids are arbitrary integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    species_ids: Vec<SpeciesId>,
    genus_of: Vec<usize>,
    family_of_genus: BTreeMap<usize, usize>,
    species_by_genus: BTreeMap<usize, Vec<SpeciesId>>,
    species_by_family: BTreeMap<usize, Vec<SpeciesId>>,
    names: BTreeMap<SpeciesId, String>,
}

impl Taxonomy {
    pub fn build<R: Into<TaxonRecord> + Copy>(records: &[R]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("taxonomy records"));
        }
        let mut genus_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut family_of_genus: BTreeMap<usize, usize> = BTreeMap::new();
        for r in records.iter().map(|&r| r.into()) {
            if let Some(&g) = genus_of.get(&r.species) {
                if g != r.genus {
                    return Err(Error::InconsistentParent {
                        kind: "species",
                        id: r.species,
                        first: g,
                        second: r.genus,
                    });
                }
                return Err(Error::DuplicateSpecies(r.species));
            }
            genus_of.insert(r.species, r.genus);
            match family_of_genus.get(&r.genus) {
                Some(&f) if f != r.family => {
                    return Err(Error::InconsistentParent {
                        kind: "genus",
                        id: r.genus,
                        first: f,
                        second: r.family,
                    })
                }
                _ => {
                    family_of_genus.insert(r.genus, r.family);
                }
            }
        }
        let count = genus_of.len();
        if let Some(missing) = (0..count).find(|s| !genus_of.contains_key(s)) {
            return Err(Error::NonDenseSpecies { count, missing });
        }
        let genus_of: Vec<usize> = genus_of.into_values().collect();
        let mut species_by_genus: BTreeMap<usize, Vec<SpeciesId>> = BTreeMap::new();
        let mut species_by_family: BTreeMap<usize, Vec<SpeciesId>> = BTreeMap::new();
        for (s, &g) in genus_of.iter().enumerate() {
            species_by_genus.entry(g).or_default().push(s);
            species_by_family
                .entry(family_of_genus[&g])
                .or_default()
                .push(s);
        }
        Ok(Self {
            species_ids: (0..count).collect(),
            genus_of,
            family_of_genus,
            species_by_genus,
            species_by_family,
            names: BTreeMap::new(),
        })
    }

    pub fn with_names(mut self, names: BTreeMap<SpeciesId, String>) -> Self {
        self.names = names;
        self
    }

    pub fn num_species(&self) -> usize {
        self.genus_of.len()
    }

    pub fn species(&self) -> impl Iterator<Item = SpeciesId> {
        0..self.genus_of.len()
    }

    pub fn genera(&self) -> impl Iterator<Item = usize> + '_ {
        self.species_by_genus.keys().copied()
    }

    pub fn families(&self) -> impl Iterator<Item = usize> + '_ {
        self.species_by_family.keys().copied()
    }

    pub fn num_genera(&self) -> usize {
        self.species_by_genus.len()
    }

    pub fn num_families(&self) -> usize {
        self.species_by_family.len()
    }

    pub fn name(&self, s: SpeciesId) -> Option<&str> {
        self.names.get(&s).map(String::as_str)
    }

    pub fn contains(&self, s: SpeciesId) -> bool {
        s < self.genus_of.len()
    }

    pub fn genus_of(&self, s: SpeciesId) -> Result<usize> {
        self.genus_of
            .get(s)
            .copied()
            .ok_or(Error::UnknownSpecies(s))
    }

    pub fn family_of(&self, s: SpeciesId) -> Result<usize> {
        Ok(self.family_of_genus[&self.genus_of(s)?])
    }

    /// The taxonomy node containing `s` at `level` (the species itself, its
    /// genus, or its family).
    pub fn node_of(&self, s: SpeciesId, level: Level) -> Result<usize> {
        match level {
            Level::Species => self.genus_of(s).map(|_| s),
            Level::Genus => self.genus_of(s),
            Level::Family => self.family_of(s),
        }
    }

    pub fn species_in_genus(&self, genus: usize) -> &[SpeciesId] {
        self.species_by_genus
            .get(&genus)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn species_in_family(&self, family: usize) -> &[SpeciesId] {
        self.species_by_family
            .get(&family)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Species sharing `y`'s node at `level`, `y` included, in ascending order.
    pub fn similar_classes(&self, y: SpeciesId, level: Level) -> Result<&[SpeciesId]> {
        let node = self.node_of(y, level)?;
        Ok(match level {
            Level::Species => &self.species_ids[y..=y],
            Level::Genus => self.species_in_genus(node),
            Level::Family => self.species_in_family(node),
        })
    }

    pub fn records(&self) -> Vec<TaxonRecord> {
        self.genus_of
            .iter()
            .enumerate()
            .map(|(s, &g)| TaxonRecord {
                species: s,
                genus: g,
                family: self.family_of_genus[&g],
            })
            .collect()
    }

    /// Reads `species_id,genus_id,family_id[,name]`.
    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        let mut records = Vec::with_capacity(table.rows.len());
        let mut names = BTreeMap::new();
        for row in &table.rows {
            if row.fields.len() < 3 {
                return Err(table.parse_error(row.line, "expected species_id,genus_id,family_id"));
            }
            let rec = TaxonRecord {
                species: table.usize_field(row, 0)?,
                genus: table.usize_field(row, 1)?,
                family: table.usize_field(row, 2)?,
            };
            if row.fields.len() > 3 {
                let name = row.fields[3..].join(",");
                if !name.is_empty() {
                    names.insert(rec.species, name);
                }
            }
            records.push(rec);
        }
        Ok(Self::build(&records)?.with_names(names))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let with_names = !self.names.is_empty();
        let header = if with_names {
            "species_id,genus_id,family_id,name"
        } else {
            "species_id,genus_id,family_id"
        };
        let rows = self.records().into_iter().map(|r| {
            let base = format!("{},{},{}", r.species, r.genus, r.family);
            match self.names.get(&r.species) {
                Some(n) => format!("{base},{n}"),
                None if with_names => format!("{base},"),
                None => base,
            }
        });
        write_table(path, header, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Unseen species share their genus with at least one seen species.
    Easy,
    /// Whole genera are assigned to one side.
    Hard,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(SplitMode::Easy),
            "hard" => Ok(SplitMode::Hard),
            other => Err(Error::InvalidConfig(format!("unknown split mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub unseen_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Ascending.
    pub seen: Vec<SpeciesId>,
    /// Ascending.
    pub unseen: Vec<SpeciesId>,
}

impl Split {
    pub fn is_unseen(&self, s: SpeciesId) -> bool {
        self.unseen.binary_search(&s).is_ok()
    }

    pub fn write(&self, path: &Path, tax: &Taxonomy) -> Result<()> {
        let rows = tax.species().map(|s| {
            let side = if self.is_unseen(s) { "unseen" } else { "seen" };
            format!("{s},{side}")
        });
        write_table(path, "species_id,split", rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        let mut seen = Vec::new();
        let mut unseen = Vec::new();
        for row in &table.rows {
            let s = table.usize_field(row, 0)?;
            match row.fields.get(1).map(String::as_str) {
                Some("seen") => seen.push(s),
                Some("unseen") => unseen.push(s),
                _ => return Err(table.parse_error(row.line, "split must be `seen` or `unseen`")),
            }
        }
        seen.sort_unstable();
        unseen.sort_unstable();
        Ok(Self { seen, unseen })
    }
}

/// Number of unseen classes: `floor(fraction * C)` with a minimum of one.
pub fn unseen_count(num_species: usize, fraction: f64) -> usize {
    // small slack so that e.g. 1/3 of 12 gives 4
    ((fraction * num_species as f64 + 1e-9).floor() as usize).max(1)
}

pub fn make_split(tax: &Taxonomy, spec: &SplitSpec) -> Result<Split> {
    if !(spec.unseen_fraction > 0.0 && spec.unseen_fraction < 1.0) {
        return Err(Error::InfeasibleSplit(format!(
            "unseen fraction {} is outside (0, 1)",
            spec.unseen_fraction
        )));
    }
    let total = tax.num_species();
    let k = unseen_count(total, spec.unseen_fraction);
    if k >= total {
        return Err(Error::InfeasibleSplit(format!(
            "{k} unseen of {total} classes leaves no seen class"
        )));
    }
    let mut rng = SeededRng::new(spec.seed);
    let mut unseen = match spec.mode {
        SplitMode::Easy => easy_unseen(tax, k, &mut rng),
        SplitMode::Hard => hard_unseen(tax, k, &mut rng)?,
    };
    unseen.sort_unstable();
    let seen = tax
        .species()
        .filter(|s| unseen.binary_search(s).is_err())
        .collect();
    Ok(Split { seen, unseen })
}

fn easy_unseen(tax: &Taxonomy, k: usize, rng: &mut SeededRng) -> Vec<SpeciesId> {
    let mut genera: Vec<usize> = tax.genera().collect();
    rng.shuffle(&mut genera);
    // Each genus of size m >= 2 offers m - 1 candidates so that one species stays seen.
    let mut queues: Vec<Vec<SpeciesId>> = Vec::new();
    let mut singletons = Vec::new();
    for g in genera {
        let mut members = tax.species_in_genus(g).to_vec();
        rng.shuffle(&mut members);
        if members.len() >= 2 {
            members.pop();
            queues.push(members);
        } else {
            singletons.extend(members);
        }
    }
    let mut picked = Vec::with_capacity(k);
    let mut round = 0;
    while picked.len() < k && queues.iter().any(|q| q.len() > round) {
        for q in &queues {
            if picked.len() == k {
                break;
            }
            if let Some(&s) = q.get(round) {
                picked.push(s);
            }
        }
        round += 1;
    }
    // Out of shared-genus candidates: fall back to singleton genera, then to
    // the species held back as each genus's last seen member.
    let mut rest: Vec<SpeciesId> = singletons;
    rng.shuffle(&mut rest);
    let mut held: Vec<SpeciesId> = tax
        .species()
        .filter(|s| !picked.contains(s) && !rest.contains(s))
        .collect();
    rng.shuffle(&mut held);
    for s in rest.into_iter().chain(held) {
        if picked.len() == k {
            break;
        }
        picked.push(s);
    }
    picked
}

fn hard_unseen(tax: &Taxonomy, k: usize, rng: &mut SeededRng) -> Result<Vec<SpeciesId>> {
    if tax.num_genera() < 2 {
        return Err(Error::InfeasibleSplit(
            "hard split needs at least two genera".into(),
        ));
    }
    let mut genera: Vec<usize> = tax.genera().collect();
    rng.shuffle(&mut genera);
    let mut chosen = Vec::new();
    let mut count = 0;
    for &g in &genera {
        let n = tax.species_in_genus(g).len();
        if count + n <= k {
            chosen.push(g);
            count += n;
        }
    }
    if chosen.is_empty() {
        let g = *genera
            .iter()
            .min_by_key(|&&g| tax.species_in_genus(g).len())
            .expect("at least two genera");
        chosen.push(g);
    }
    if chosen.len() == genera.len() {
        return Err(Error::InfeasibleSplit(
            "hard split would leave no seen genus".into(),
        ));
    }
    Ok(chosen
        .into_iter()
        .flat_map(|g| tax.species_in_genus(g).iter().copied())
        .collect())
}
