//! TF-IDF featurisation of per-class text.
//!
//! `tf = count / document length`, `idf = ln((1 + D) / (1 + df)) + 1`, and
//! every vector is L2-normalised. The vocabulary is ordered by descending
//! document frequency, then lexicographically, and truncated to the limit.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::table::{join_reals, write_table};
use crate::taxonomy::SpeciesId;

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdf {
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub vectors: BTreeMap<SpeciesId, Vec<f64>>,
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn tfidf_featurize(
    corpus: &BTreeMap<SpeciesId, Vec<String>>,
    vocab_limit: usize,
) -> Result<TfIdf> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    if vocab_limit == 0 {
        return Err(Error::InvalidConfig("vocabulary limit must be positive".into()));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut counts: BTreeMap<SpeciesId, HashMap<&str, usize>> = BTreeMap::new();
    for (&id, tokens) in corpus {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument(id));
        }
        let c = counts.entry(id).or_default();
        for t in tokens {
            *c.entry(t.as_str()).or_default() += 1;
        }
        for t in c.keys() {
            *df.entry(t).or_default() += 1;
        }
    }

    let mut vocab: Vec<(&str, usize)> = df.into_iter().collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    vocab.truncate(vocab_limit);

    let docs = corpus.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|&(_, d)| ((1.0 + docs) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let vectors = counts
        .iter()
        .map(|(&id, c)| {
            let len = corpus[&id].len() as f64;
            let mut v: Vec<f64> = vocab
                .iter()
                .zip(&idf)
                .map(|(&(term, _), w)| c.get(term).copied().unwrap_or(0) as f64 / len * w)
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            (id, v)
        })
        .collect();

    Ok(TfIdf {
        vocabulary: vocab.into_iter().map(|(t, _)| t.to_string()).collect(),
        idf,
        vectors,
    })
}

/// One document per species: files named `<id>` or `<id>.<ext>` in `dir`.
/// Other files are ignored.
pub fn read_corpus(dir: &Path) -> Result<BTreeMap<SpeciesId, Vec<String>>> {
    let mut corpus = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(id) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<SpeciesId>().ok())
        else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if corpus.insert(id, tokenize(&text)).is_some() {
            return Err(Error::InvalidConfig(format!(
                "corpus has two documents for species {id}"
            )));
        }
    }
    Ok(corpus)
}

/// Writes `species_id,s_0,...`.
pub fn write_semantics(path: &Path, vectors: &BTreeMap<SpeciesId, Vec<f64>>) -> Result<()> {
    let dim = vectors.values().next().map(Vec::len).unwrap_or(0);
    let header = std::iter::once("species_id".to_string())
        .chain((0..dim).map(|i| format!("s_{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = vectors.iter().map(|(id, v)| format!("{id},{}", join_reals(v)));
    write_table(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[&str]) -> BTreeMap<SpeciesId, Vec<String>> {
        docs.iter().enumerate().map(|(i, d)| (i, tokenize(d))).collect()
    }

    #[test]
    fn three_term_corpus_by_hand() {
        // D = 2; df(a) = 2, df(b) = df(c) = 1.
        // idf(a) = ln(3/3) + 1 = 1, idf(b) = idf(c) = ln(3/2) + 1.
        let out = tfidf_featurize(&corpus(&["a a b", "a c"]), 10).unwrap();
        assert_eq!(out.vocabulary, vec!["a", "b", "c"]);
        assert_eq!(out.idf[0], 1.0);
        let w = 1.5f64.ln() + 1.0;
        let d0 = [2.0 / 3.0, w / 3.0, 0.0];
        let d1 = [0.5, 0.0, w / 2.0];
        for (raw, got) in [(d0, &out.vectors[&0]), (d1, &out.vectors[&1])] {
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (r, g) in raw.iter().zip(got) {
                assert!((r / n - g).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_document_single_term() {
        let out = tfidf_featurize(&corpus(&["x"]), 5).unwrap();
        assert_eq!(out.vectors[&0], vec![1.0]);
    }

    #[test]
    fn identical_documents_identical_vectors() {
        let out = tfidf_featurize(&corpus(&["the red bird", "the red bird"]), 5).unwrap();
        assert_eq!(out.vectors[&0], out.vectors[&1]);
    }

    #[test]
    fn token_order_does_not_matter() {
        let a = tfidf_featurize(&corpus(&["a b c c", "b d"]), 10).unwrap();
        let b = tfidf_featurize(&corpus(&["c b c a", "d b"]), 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vocabulary_limit_and_ordering() {
        let out = tfidf_featurize(&corpus(&["z y x", "z y", "z"]), 2).unwrap();
        assert_eq!(out.vocabulary, vec!["z", "y"]);
        assert!(out.vectors.values().all(|v| v.len() == 2));
    }

    #[test]
    fn empty_document_is_rejected() {
        assert!(matches!(
            tfidf_featurize(&corpus(&["a", " ,. "]), 3),
            Err(Error::EmptyDocument(1))
        ));
        assert!(matches!(
            tfidf_featurize(&BTreeMap::new(), 3),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn reads_corpus_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("0.txt"), "Red wings, RED tail").unwrap();
        fs::write(dir.path().join("1"), "blue").unwrap();
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let c = read_corpus(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[&0], vec!["red", "wings", "red", "tail"]);
    }
}
