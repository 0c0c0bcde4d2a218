//! Accuracy, coverage and per-class tallies.
//!
//! Coverage counts the distinct labels a model *predicts*, whether or not
//! they are correct: a model that collapses onto the frequent classes has
//! low coverage even when its accuracy looks fine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::{LeafLabel, Taxonomy};
use crate::ensemble::{check_pair, EnsembleError, PredictionSet};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Mismatch(#[from] EnsembleError),
    #[error("label {0:?} is not a leaf of the taxonomy")]
    UnknownLabel(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassTally {
    /// Instances whose true label is this class.
    pub support: usize,
    /// Of those, how many were predicted correctly.
    pub correct: usize,
    /// Instances predicted as this class.
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub coverage: usize,
    /// Every label seen in the truth or the predictions.
    pub per_class: BTreeMap<LeafLabel, ClassTally>,
    pub n_instances: usize,
}

/// Compares predictions with the truth, instance by instance. An empty
/// test set has accuracy 0.
pub fn evaluate(predicted: &PredictionSet, truth: &PredictionSet) -> Result<EvalReport, EvalError> {
    check_pair(truth, predicted)?;
    let mut per_class: BTreeMap<LeafLabel, ClassTally> = BTreeMap::new();
    let mut correct = 0;
    for (p, t) in predicted.labels.iter().zip(&truth.labels) {
        let tally = per_class.entry(t.clone()).or_default();
        tally.support += 1;
        if p == t {
            tally.correct += 1;
            correct += 1;
        }
        per_class.entry(p.clone()).or_default().predicted += 1;
    }
    let n = truth.len();
    Ok(EvalReport {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        coverage: per_class.values().filter(|t| t.predicted > 0).count(),
        per_class,
        n_instances: n,
    })
}

/// Accuracy at every taxonomy level (index 0 is level 1, the last entry
/// is leaf accuracy), after mapping both labels to their ancestors.
pub fn level_rollup(
    predicted: &PredictionSet,
    truth: &PredictionSet,
    taxonomy: &Taxonomy,
) -> Result<Vec<f64>, EvalError> {
    check_pair(truth, predicted)?;
    let resolve = |l: &LeafLabel| taxonomy.leaf(l).ok_or_else(|| EvalError::UnknownLabel(l.to_string()));
    let mut hits = vec![0usize; taxonomy.depth()];
    for (p, t) in predicted.labels.iter().zip(&truth.labels) {
        let (p, t) = (resolve(p)?, resolve(t)?);
        for (level, h) in (1..=taxonomy.depth() as u8).zip(hits.iter_mut()) {
            if taxonomy.ancestor_at(p, level) == taxonomy.ancestor_at(t, level) {
                *h += 1;
            }
        }
    }
    let n = truth.len();
    Ok(hits
        .into_iter()
        .map(|h| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect())
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        self.per_class.values().map(|t| t.correct).sum()
    }

    /// Distinct labels in the truth.
    pub fn true_classes(&self) -> usize {
        self.per_class.values().filter(|t| t.support > 0).count()
    }

    /// Labels that were predicted but never occur in the truth.
    pub fn spurious_classes(&self) -> BTreeSet<&LeafLabel> {
        self.per_class
            .iter()
            .filter(|(_, t)| t.support == 0)
            .map(|(l, _)| l)
            .collect()
    }

    /// `key=value` lines. Level accuracies, when given, follow as
    /// `level<k>_accuracy`.
    pub fn to_key_values(&self, levels: Option<&[f64]>, per_class: bool) -> String {
        let mut out = String::new();
        writeln!(out, "n_instances={}", self.n_instances).unwrap();
        writeln!(out, "correct={}", self.correct()).unwrap();
        writeln!(out, "accuracy={:.6}", self.accuracy).unwrap();
        writeln!(out, "coverage={}", self.coverage).unwrap();
        writeln!(out, "true_classes={}", self.true_classes()).unwrap();
        for (k, acc) in levels.unwrap_or_default().iter().enumerate() {
            writeln!(out, "level{}_accuracy={acc:.6}", k + 1).unwrap();
        }
        if per_class {
            for (label, t) in &self.per_class {
                writeln!(
                    out,
                    "class.{label}=support:{},correct:{},predicted:{}",
                    t.support, t.correct, t.predicted
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_table(&self, levels: Option<&[f64]>, per_class: bool) -> String {
        let mut out = String::new();
        writeln!(out, "instances   {:>10}", self.n_instances).unwrap();
        writeln!(out, "accuracy    {:>9.2}%", 100.0 * self.accuracy).unwrap();
        writeln!(
            out,
            "coverage    {:>10}  (of {} true classes)",
            self.coverage,
            self.true_classes()
        )
        .unwrap();
        for (k, acc) in levels.unwrap_or_default().iter().enumerate() {
            writeln!(out, "level {}     {:>9.2}%", k + 1, 100.0 * acc).unwrap();
        }
        if per_class {
            let width = self
                .per_class
                .keys()
                .map(|l| l.as_str().len())
                .max()
                .unwrap_or(5)
                .max(5);
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:<width$}  {:>8}  {:>8}  {:>9}  {:>7}",
                "class", "support", "correct", "predicted", "recall"
            )
            .unwrap();
            for (label, t) in &self.per_class {
                let recall = if t.support == 0 {
                    "-".to_string()
                } else {
                    format!("{:.3}", t.correct as f64 / t.support as f64)
                };
                writeln!(
                    out,
                    "{:<width$}  {:>8}  {:>8}  {:>9}  {:>7}",
                    label.as_str(),
                    t.support,
                    t.correct,
                    t.predicted,
                    recall
                )
                .unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(labels: &[&str]) -> PredictionSet {
        PredictionSet::from_labels("m", labels.iter().copied())
    }

    #[test]
    fn basic_counts() {
        let r = evaluate(&set(&["A", "B", "A"]), &set(&["A", "B", "B"])).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.coverage, 2);
        assert_eq!(
            r.per_class[&LeafLabel::from("B")],
            ClassTally {
                support: 2,
                correct: 1,
                predicted: 1
            }
        );
        assert_eq!(r.correct(), 2);
    }

    #[test]
    fn perfect_prediction() {
        let truth = set(&["x", "y", "y", "z"]);
        let r = evaluate(&truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.coverage, 3);
        assert!(r.spurious_classes().is_empty());
    }

    #[test]
    fn spurious_labels_count_towards_coverage() {
        let r = evaluate(&set(&["q", "q"]), &set(&["a", "b"])).unwrap();
        assert_eq!(r.coverage, 1);
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.spurious_classes().len(), 1);
    }

    #[test]
    fn empty_and_mismatched() {
        let r = evaluate(&set(&[]), &set(&[])).unwrap();
        assert_eq!((r.accuracy, r.coverage, r.n_instances), (0.0, 0, 0));
        assert!(evaluate(&set(&["a"]), &set(&["a", "b"])).is_err());
    }

    fn tax248() -> Taxonomy {
        Taxonomy::from_triples((0..8).map(|i| [format!("A{}", i / 4), format!("B{}", i / 2), format!("C{i}")])).unwrap()
    }

    #[test]
    fn rollup_examples() {
        let tax = tax248();
        let levels = level_rollup(&set(&["C0"]), &set(&["C0"]), &tax).unwrap();
        assert_eq!(levels, [1.0, 1.0, 1.0]);
        // C1 shares C0's level-2 parent B0
        let levels = level_rollup(&set(&["C1"]), &set(&["C0"]), &tax).unwrap();
        assert_eq!(levels, [1.0, 1.0, 0.0]);
        let levels = level_rollup(&set(&["C7"]), &set(&["C0"]), &tax).unwrap();
        assert_eq!(levels, [0.0, 0.0, 0.0]);
        assert!(matches!(
            level_rollup(&set(&["nope"]), &set(&["C0"]), &tax),
            Err(EvalError::UnknownLabel(_))
        ));
    }

    #[test]
    fn random_predictions_roll_up_to_one_half() {
        let tax = tax248();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let draw = |rng: &mut ChaCha8Rng| format!("C{}", rng.gen_range(0..8));
        let p: Vec<String> = (0..n).map(|_| draw(&mut rng)).collect();
        let t: Vec<String> = (0..n).map(|_| draw(&mut rng)).collect();
        let levels = level_rollup(
            &PredictionSet::from_labels("p", p.iter().map(String::as_str)),
            &PredictionSet::from_labels("t", t.iter().map(String::as_str)),
            &tax,
        )
        .unwrap();
        // standard error is about 0.0035 at n = 20000
        assert!((levels[0] - 0.5).abs() < 0.02, "{levels:?}");
        assert!((levels[1] - 0.25).abs() < 0.02);
        assert!((levels[2] - 0.125).abs() < 0.02);
    }

    #[test]
    fn reports_render() {
        let r = evaluate(&set(&["A", "B", "A"]), &set(&["A", "B", "B"])).unwrap();
        let kv = r.to_key_values(Some(&[1.0, 0.5]), true);
        assert!(kv.contains("accuracy=0.666667\n"));
        assert!(kv.contains("coverage=2\n"));
        assert!(kv.contains("level2_accuracy=0.500000\n"));
        assert!(kv.contains("class.B=support:2,correct:1,predicted:1\n"));
        let table = r.to_table(None, true);
        assert!(table.contains("66.67%"));
        assert!(table.lines().any(|l| l.starts_with("B ")));
    }

    proptest! {
        #[test]
        fn coverage_bounds_and_permutation(
            pairs in prop::collection::vec((0u8..12, 0u8..12), 0..60),
            seed in any::<u64>(),
        ) {
            let p: Vec<String> = pairs.iter().map(|(a, _)| format!("c{a}")).collect();
            let t: Vec<String> = pairs.iter().map(|(_, b)| format!("c{b}")).collect();
            let ps = PredictionSet::from_labels("p", p.iter().map(String::as_str));
            let ts = PredictionSet::from_labels("t", t.iter().map(String::as_str));
            let r = evaluate(&ps, &ts).unwrap();
            let distinct: BTreeSet<&String> = p.iter().collect();
            prop_assert_eq!(r.coverage, distinct.len());
            prop_assert!(r.coverage <= 12.min(pairs.len()));
            if !pairs.is_empty() {
                prop_assert!((r.correct() as f64 / r.n_instances as f64 - r.accuracy).abs() < 1e-15);
            }

            let mut order: Vec<usize> = (0..pairs.len()).collect();
            use rand::seq::SliceRandom;
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let pp = PredictionSet::from_labels("p", order.iter().map(|&i| p[i].as_str()));
            let tp = PredictionSet::from_labels("t", order.iter().map(|&i| t[i].as_str()));
            let r2 = evaluate(&pp, &tp).unwrap();
            prop_assert_eq!(r2.coverage, r.coverage);
            prop_assert_eq!(r2.per_class, r.per_class);
        }

        #[test]
        fn rollup_never_below_leaf_accuracy(pairs in prop::collection::vec((0u8..8, 0u8..8), 1..60)) {
            let tax = tax248();
            let p: Vec<String> = pairs.iter().map(|(a, _)| format!("C{a}")).collect();
            let t: Vec<String> = pairs.iter().map(|(_, b)| format!("C{b}")).collect();
            let ps = PredictionSet::from_labels("p", p.iter().map(String::as_str));
            let ts = PredictionSet::from_labels("t", t.iter().map(String::as_str));
            let levels = level_rollup(&ps, &ts, &tax).unwrap();
            let leaf = evaluate(&ps, &ts).unwrap().accuracy;
            prop_assert!((levels[2] - leaf).abs() < 1e-15);
            prop_assert!(levels[0] >= levels[1] && levels[1] >= levels[2]);
        }
    }
}
