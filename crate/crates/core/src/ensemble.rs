//! Voting ensembles over prediction files.
//!
//! Each model contributes a [`PredictionSet`]: one leaf label per test
//! instance, in test-file order. Models can be ranked by how often they
//! agree with a reference set (ground truth, or the best submission so
//! far), the top fraction kept, and the survivors combined by weighted
//! voting.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use rayon::prelude::*;

use crate::corpus::LeafLabel;

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("no prediction sets to combine")]
    Empty,
    #[error("{model_id} has {found} predictions, expected {expected}")]
    LengthMismatch {
        model_id: String,
        expected: usize,
        found: usize,
    },
    #[error("{model_id} lists instance {found:?} at position {position}, expected {expected:?}")]
    InstanceMismatch {
        model_id: String,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("model id {0:?} appears twice")]
    DuplicateModel(String),
    #[error("weight of {model_id} must be positive and finite, got {weight}")]
    BadWeight { model_id: String, weight: f64 },
    #[error("fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Predictions of one model, aligned with the instance ids of the test file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_id: String,
    pub ids: Vec<String>,
    pub labels: Vec<LeafLabel>,
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>, ids: Vec<String>, labels: Vec<LeafLabel>) -> Self {
        assert_eq!(ids.len(), labels.len(), "one id per prediction");
        PredictionSet {
            model_id: model_id.into(),
            ids,
            labels,
        }
    }

    /// Instances numbered from 1, for sets built in memory.
    pub fn from_labels<I, L>(model_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<LeafLabel>,
    {
        let labels: Vec<LeafLabel> = labels.into_iter().map(Into::into).collect();
        let ids = (1..=labels.len()).map(|i| i.to_string()).collect();
        PredictionSet::new(model_id, ids, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Rule applied when several labels share the top weight sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Label of the heaviest voter among the tied labels, then the
    /// lexicographically smallest label.
    #[default]
    HeaviestVoter,
    /// Lexicographically smallest tied label.
    Lexicographic,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VoteConfig {
    /// Per-model weights; models not listed weigh 1.0.
    pub weights: BTreeMap<String, f64>,
    pub tie_break: TieBreak,
}

impl VoteConfig {
    pub fn with_weights(weights: BTreeMap<String, f64>) -> Self {
        VoteConfig {
            weights,
            tie_break: TieBreak::default(),
        }
    }

    pub fn weight(&self, model_id: &str) -> f64 {
        self.weights.get(model_id).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        for (id, &w) in &self.weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(EnsembleError::BadWeight {
                    model_id: id.clone(),
                    weight: w,
                });
            }
        }
        Ok(())
    }
}

/// Checks that every set covers the same instances as the first one.
pub fn check_aligned(sets: &[PredictionSet]) -> Result<(), EnsembleError> {
    let first = sets.first().ok_or(EnsembleError::Empty)?;
    for set in &sets[1..] {
        check_pair(first, set)?;
    }
    Ok(())
}

/// Checks that `b` covers the same instances as `a`.
pub fn check_pair(a: &PredictionSet, b: &PredictionSet) -> Result<(), EnsembleError> {
    if a.len() != b.len() {
        return Err(EnsembleError::LengthMismatch {
            model_id: b.model_id.clone(),
            expected: a.len(),
            found: b.len(),
        });
    }
    if let Some(position) = a.ids.iter().zip(&b.ids).position(|(x, y)| x != y) {
        return Err(EnsembleError::InstanceMismatch {
            model_id: b.model_id.clone(),
            position,
            expected: a.ids[position].clone(),
            found: b.ids[position].clone(),
        });
    }
    Ok(())
}

fn check_unique_ids(sets: &[PredictionSet]) -> Result<(), EnsembleError> {
    let mut seen = HashMap::new();
    for s in sets {
        if seen.insert(s.model_id.as_str(), ()).is_some() {
            return Err(EnsembleError::DuplicateModel(s.model_id.clone()));
        }
    }
    Ok(())
}

/// Per instance, every model adds its weight to its predicted label and
/// the label with the largest sum wins.
///
/// Sums accumulate in input order, so the result does not depend on the
/// number of threads.
pub fn weighted_vote(sets: &[PredictionSet], config: &VoteConfig) -> Result<PredictionSet, EnsembleError> {
    check_aligned(sets)?;
    check_unique_ids(sets)?;
    config.validate()?;
    let weights: Vec<f64> = sets.iter().map(|s| config.weight(&s.model_id)).collect();
    let n = sets[0].len();
    let labels: Vec<LeafLabel> = (0..n)
        .into_par_iter()
        .map(|i| vote_one(sets, &weights, i, config.tie_break).clone())
        .collect();
    let model_id = sets.iter().map(|s| s.model_id.as_str()).collect::<Vec<_>>().join("+");
    Ok(PredictionSet::new(model_id, sets[0].ids.clone(), labels))
}

fn vote_one<'a>(sets: &'a [PredictionSet], weights: &[f64], i: usize, tie_break: TieBreak) -> &'a LeafLabel {
    // (label, weight sum, heaviest voter weight); few voters, linear scan
    let mut tally: Vec<(&LeafLabel, f64, f64)> = Vec::with_capacity(sets.len());
    for (set, &w) in sets.iter().zip(weights) {
        let label = &set.labels[i];
        match tally.iter_mut().find(|(l, _, _)| *l == label) {
            Some(entry) => {
                entry.1 += w;
                entry.2 = entry.2.max(w);
            }
            None => tally.push((label, w, w)),
        }
    }
    let best = tally.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let tied = tally.iter().filter(|t| t.1 == best);
    let winner = match tie_break {
        TieBreak::HeaviestVoter => tied.min_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(b.0))),
        TieBreak::Lexicographic => tied.min_by(|a, b| a.0.cmp(b.0)),
    };
    winner.expect("at least one voter").0
}

/// Fraction of instances on which both sets predict the same label.
/// Two empty sets agree with fraction 0.
pub fn agreement(a: &PredictionSet, b: &PredictionSet) -> Result<f64, EnsembleError> {
    check_pair(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let same = a.labels.iter().zip(&b.labels).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Model ids by descending agreement with `reference`, ties by id.
pub fn order_by_agreement(sets: &[PredictionSet], reference: &PredictionSet) -> Result<Vec<String>, EnsembleError> {
    check_unique_ids(sets)?;
    // integer match counts keep the ordering exact
    let mut scored = Vec::with_capacity(sets.len());
    for s in sets {
        check_pair(reference, s)?;
        let same = s.labels.iter().zip(&reference.labels).filter(|(x, y)| x == y).count();
        scored.push((same, s.model_id.clone()));
    }
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, id)| id).collect())
}

/// The first ⌈fraction·N⌉ ids, at least one.
pub fn select_top_fraction(ordered: &[String], fraction: f64) -> Result<Vec<String>, EnsembleError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EnsembleError::BadFraction(fraction));
    }
    if ordered.is_empty() {
        return Err(EnsembleError::Empty);
    }
    // 0.3 * 10 is 3.0000000000000004 in binary; do not round that up to 4
    let raw = fraction * ordered.len() as f64;
    let k = ((raw - 1e-9 * raw.max(1.0)).ceil() as usize).clamp(1, ordered.len());
    Ok(ordered[..k].to_vec())
}

/// Weight `factor` for the first two models of `ordered`, 1.0 for the rest.
pub fn top2_boost(ordered: &[String], factor: f64) -> Result<BTreeMap<String, f64>, EnsembleError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(EnsembleError::BadWeight {
            model_id: "top2_boost".into(),
            weight: factor,
        });
    }
    Ok(ordered
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), if i < 2 { factor } else { 1.0 }))
        .collect())
}

/// Reads an `id;label` prediction file (header required).
pub fn read_predictions<R: Read>(reader: R, delimiter: u8, model_id: &str) -> Result<PredictionSet, EnsembleError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["id", "label"] {
        return Err(EnsembleError::Format {
            line: 1,
            message: format!("expected header id{}label, found {:?}", delimiter as char, header),
        });
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 2 {
            let line = row.position().map_or(0, |p| p.line() as usize);
            return Err(EnsembleError::Format {
                line,
                message: format!("expected 2 fields, found {}", row.len()),
            });
        }
        ids.push(row[0].to_string());
        labels.push(LeafLabel::new(&row[1]));
    }
    Ok(PredictionSet::new(model_id, ids, labels))
}

pub fn write_predictions<W: Write>(writer: W, set: &PredictionSet, delimiter: u8) -> Result<(), EnsembleError> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    wtr.write_record(["id", "label"])?;
    for (id, label) in set.ids.iter().zip(&set.labels) {
        wtr.write_record([id.as_str(), label.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `model_id<TAB>weight` lines. Blank lines and `#` comments are
/// ignored.
pub fn read_weights<R: BufRead>(reader: R) -> Result<BTreeMap<String, f64>, EnsembleError> {
    let mut weights = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |message: String| EnsembleError::Format { line: n + 1, message };
        let (id, w) = trimmed
            .split_once('\t')
            .ok_or_else(|| bad("expected model_id<TAB>weight".into()))?;
        let weight: f64 = w.trim().parse().map_err(|_| bad(format!("bad weight {w:?}")))?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(EnsembleError::BadWeight {
                model_id: id.to_string(),
                weight,
            });
        }
        if weights.insert(id.to_string(), weight).is_some() {
            return Err(bad(format!("model {id:?} listed twice")));
        }
    }
    Ok(weights)
}

pub fn write_weights<W: Write>(mut writer: W, weights: &BTreeMap<String, f64>) -> std::io::Result<()> {
    for (id, w) in weights {
        writeln!(writer, "{id}\t{w}")?;
    }
    Ok(())
}
