use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::solver::{solve, Problem, TrainReport};
use super::{BinaryLinearModel, LinearError, TrainConfig};
use crate::corpus::LeafLabel;
use crate::features::SparseVector;
use crate::textfmt::{check_name, LineReader};

const MAGIC: &str = "prodcat-ova";
const VERSION: &str = "v1";

/// One binary SVM per class; classes are kept in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct OvaModel {
    classes: Vec<LeafLabel>,
    models: Vec<BinaryLinearModel>,
    dim: usize,
    config: TrainConfig,
    vocab_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvaPrediction {
    pub label: LeafLabel,
    /// Decision value of every class, in the model's class order.
    pub margins: Vec<f64>,
}

/// Trains one class-versus-rest SVM per class, in parallel.
///
/// `x` holds vectors that are not bias-augmented; the bias from `config`
/// is added by the solver. Classes absent from `labels` still get a model
/// (trained on all-negative data).
pub fn train_ova(
    x: &[SparseVector],
    labels: &[LeafLabel],
    classes: &[LeafLabel],
    dim: usize,
    config: &TrainConfig,
    vocab_fingerprint: &str,
) -> Result<(OvaModel, Vec<TrainReport>), LinearError> {
    let problem = Problem::new(x, dim, config.bias)?;
    train_ova_on(&problem, labels, classes, config, vocab_fingerprint)
}

pub(crate) fn train_ova_on(
    problem: &Problem<'_>,
    labels: &[LeafLabel],
    classes: &[LeafLabel],
    config: &TrainConfig,
    vocab_fingerprint: &str,
) -> Result<(OvaModel, Vec<TrainReport>), LinearError> {
    config.validate()?;
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return Err(LinearError::NoClasses);
    }
    if labels.len() != problem.len() {
        return Err(LinearError::LengthMismatch {
            expected: problem.len(),
            found: labels.len(),
        });
    }
    let position: HashMap<&LeafLabel, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let label_ids = labels
        .iter()
        .map(|l| {
            position
                .get(l)
                .copied()
                .ok_or_else(|| LinearError::UnknownLabel(l.as_str().to_string()))
        })
        .collect::<Result<Vec<usize>, _>>()?;

    let trained = (0..classes.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<i8> = label_ids.iter().map(|&id| if id == k { 1 } else { -1 }).collect();
            solve(problem, &y, config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (models, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    let model = OvaModel {
        classes,
        models,
        dim: problem.dim(),
        config: config.clone(),
        vocab_fingerprint: vocab_fingerprint.to_string(),
    };
    Ok((model, reports))
}

/// Argmax over the class decision values; ties go to the earliest class.
pub fn predict_ova(model: &OvaModel, v: &SparseVector, vocab_fingerprint: &str) -> Result<OvaPrediction, LinearError> {
    model.check_fingerprint(vocab_fingerprint)?;
    let margins = model.decision_values(v)?;
    let best = argmax_first(&margins);
    Ok(OvaPrediction {
        label: model.classes[best].clone(),
        margins,
    })
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in values.iter().enumerate().skip(1) {
        if m > values[best] {
            best = i;
        }
    }
    best
}

impl OvaModel {
    pub fn classes(&self) -> &[LeafLabel] {
        &self.classes
    }

    pub fn models(&self) -> &[BinaryLinearModel] {
        &self.models
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.vocab_fingerprint
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<(), LinearError> {
        if fingerprint != self.vocab_fingerprint {
            return Err(LinearError::FingerprintMismatch {
                expected: self.vocab_fingerprint.clone(),
                found: fingerprint.to_string(),
            });
        }
        Ok(())
    }

    /// Per-class decision values for a vector without the bias feature.
    pub fn decision_values(&self, v: &SparseVector) -> Result<Vec<f64>, LinearError> {
        self.models.iter().map(|m| m.decision_value(v)).collect()
    }

    /// Index of the best class, without the fingerprint check.
    pub(crate) fn best_class(&self, v: &SparseVector) -> Result<usize, LinearError> {
        Ok(argmax_first(&self.decision_values(v)?))
    }

    /// Writes the text form:
    ///
    /// ```text
    /// prodcat-ova<TAB>v1
    /// classes<TAB>K<TAB>dim<TAB>D<TAB>bias<TAB>B<TAB>C<TAB>c<TAB>tolerance<TAB>t<TAB>max_iterations<TAB>n<TAB>seed<TAB>s<TAB>vocab<TAB>fingerprint
    /// class<TAB>label                                 (K lines)
    /// weights<TAB>k<TAB>nnz                           (then one line of index:value pairs, per class)
    /// ```
    ///
    /// Values use the shortest decimal form that parses back to the same
    /// bits; only non-zero weights are stored.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LinearError> {
        for c in &self.classes {
            check_name(c.as_str()).map_err(LinearError::Config)?;
        }
        let io = |e: std::io::Error| LinearError::Config(format!("write failed: {e}"));
        let cfg = &self.config;
        writeln!(w, "{MAGIC}\t{VERSION}").map_err(io)?;
        writeln!(
            w,
            "classes\t{}\tdim\t{}\tbias\t{}\tC\t{}\ttolerance\t{}\tmax_iterations\t{}\tseed\t{}\tvocab\t{}",
            self.classes.len(),
            self.dim,
            cfg.bias,
            cfg.c,
            cfg.tolerance,
            cfg.max_iterations,
            cfg.seed,
            self.vocab_fingerprint
        )
        .map_err(io)?;
        for c in &self.classes {
            writeln!(w, "class\t{c}").map_err(io)?;
        }
        for (k, m) in self.models.iter().enumerate() {
            let nnz = m.weights.iter().filter(|&&x| x != 0.0).count();
            writeln!(w, "weights\t{k}\t{nnz}").map_err(io)?;
            let mut line = String::new();
            for (j, &x) in m.weights.iter().enumerate().filter(|(_, &x)| x != 0.0) {
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&format!("{j}:{x}"));
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, LinearError> {
        let mut lines = LineReader::new(r);
        let model = Self::read_block(&mut lines)?;
        if !lines.at_end()? {
            return Err(lines.error("trailing data after model").into());
        }
        Ok(model)
    }

    pub(crate) fn read_block<R: BufRead>(lines: &mut LineReader<R>) -> Result<Self, LinearError> {
        let magic = lines.next_line("magic line")?;
        if magic != format!("{MAGIC}\t{VERSION}") {
            return Err(lines.error(format!("not a one-versus-all model: {magic:?}")).into());
        }
        let h = lines.key_values(&[
            "classes",
            "dim",
            "bias",
            "C",
            "tolerance",
            "max_iterations",
            "seed",
            "vocab",
        ])?;
        let n_classes: usize = lines.parse(&h[0], "class count")?;
        let dim: usize = lines.parse(&h[1], "dim")?;
        let config = TrainConfig {
            bias: lines.parse(&h[2], "bias")?,
            c: lines.parse(&h[3], "C")?,
            tolerance: lines.parse(&h[4], "tolerance")?,
            max_iterations: lines.parse(&h[5], "max_iterations")?,
            seed: lines.parse(&h[6], "seed")?,
            ..TrainConfig::default()
        };
        config.validate()?;
        let fingerprint = h[7].clone();

        let mut classes = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let f = lines.tagged("class")?;
            if f.len() != 1 {
                return Err(lines.error("class line needs exactly one label").into());
            }
            classes.push(LeafLabel::new(f[0].clone()));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(lines.error("classes must be sorted and distinct").into());
        }
        let len = if config.bias > 0.0 { dim + 1 } else { dim };
        let mut models = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let f = lines.tagged("weights")?;
            if f.len() != 2 || lines.parse::<usize>(&f[0], "class index")? != k {
                return Err(lines.error(format!("expected weights header for class {k}")).into());
            }
            let nnz: usize = lines.parse(&f[1], "non-zero count")?;
            let body = lines.next_line("weights")?;
            let weights = parse_weights(&body, len, nnz).map_err(|m| lines.error(m))?;
            models.push(BinaryLinearModel {
                weights,
                dim,
                bias: config.bias,
            });
        }
        Ok(OvaModel {
            classes,
            models,
            dim,
            config,
            vocab_fingerprint: fingerprint,
        })
    }
}

fn parse_weights(body: &str, len: usize, nnz: usize) -> Result<Vec<f64>, String> {
    let mut weights = vec![0.0; len];
    let mut count = 0;
    let mut last: Option<usize> = None;
    for pair in body.split(' ').filter(|p| !p.is_empty()) {
        let (j, x) = pair.split_once(':').ok_or_else(|| format!("bad weight {pair:?}"))?;
        let j: usize = j.parse().map_err(|_| format!("bad weight index {j:?}"))?;
        let x: f64 = x.parse().map_err(|_| format!("bad weight value {x:?}"))?;
        if j >= len || last.is_some_and(|l| l >= j) || !x.is_finite() {
            return Err(format!("weight {pair:?} out of range or out of order"));
        }
        weights[j] = x;
        last = Some(j);
        count += 1;
    }
    if count != nnz {
        return Err(format!("expected {nnz} weights, found {count}"));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::TrainConfig;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(i: u32) -> SparseVector {
        SparseVector::new(vec![i], vec![1.0]).unwrap()
    }

    fn labels(v: &[&str]) -> Vec<LeafLabel> {
        v.iter().map(|&s| s.into()).collect()
    }

    fn toy() -> (Vec<SparseVector>, Vec<LeafLabel>) {
        let x = vec![one_hot(0), one_hot(0), one_hot(1), one_hot(1)];
        (x, labels(&["a", "a", "b", "b"]))
    }

    #[test]
    fn separable_two_class() {
        let (x, y) = toy();
        let (model, reports) = train_ova(&x, &y, &labels(&["b", "a"]), 2, &TrainConfig::default(), "fp").unwrap();
        assert_eq!(model.classes(), labels(&["a", "b"]).as_slice());
        assert_eq!(model.models().len(), 2);
        assert_eq!(reports.len(), 2);
        for (v, l) in x.iter().zip(&y) {
            assert_eq!(&predict_ova(&model, v, "fp").unwrap().label, l);
            // each binary model separates its own class
            let m = model.decision_values(v).unwrap();
            let k = model.classes().iter().position(|c| c == l).unwrap();
            assert!(m[k] > 0.0 && m[1 - k] < 0.0);
        }
    }

    #[test]
    fn k_models_and_unseen_class() {
        let (x, y) = toy();
        let (model, _) = train_ova(&x, &y, &labels(&["a", "b", "c"]), 2, &TrainConfig::default(), "fp").unwrap();
        assert_eq!(model.models().len(), 3);
        for v in &x {
            assert!(model.decision_values(v).unwrap()[2] < 0.0);
        }
    }

    #[test]
    fn errors() {
        let (x, y) = toy();
        assert_eq!(
            train_ova(&x, &y, &[], 2, &TrainConfig::default(), "fp").unwrap_err(),
            LinearError::NoClasses
        );
        assert!(matches!(
            train_ova(&x, &y, &labels(&["a"]), 2, &TrainConfig::default(), "fp"),
            Err(LinearError::UnknownLabel(_))
        ));
        let (model, _) = train_ova(&x, &y, &labels(&["a", "b"]), 2, &TrainConfig::default(), "fp").unwrap();
        assert!(matches!(
            predict_ova(&model, &x[0], "other"),
            Err(LinearError::FingerprintMismatch { .. })
        ));
        assert!(matches!(
            predict_ova(&model, &one_hot(7), "fp"),
            Err(LinearError::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn argmax_ties_go_first() {
        assert_eq!(argmax_first(&[0.5, -0.2]), 0);
        assert_eq!(argmax_first(&[0.3, 0.3]), 0);
        assert_eq!(argmax_first(&[-1.0, 0.3, 0.3]), 1);
    }

    #[test]
    fn empty_vector_uses_bias_weights() {
        let (x, y) = toy();
        let x: Vec<SparseVector> = x.into_iter().chain([one_hot(1)]).collect();
        let y: Vec<LeafLabel> = y.into_iter().chain(labels(&["b"])).collect();
        let (model, _) = train_ova(&x, &y, &labels(&["a", "b"]), 2, &TrainConfig::default(), "fp").unwrap();
        let p = predict_ova(&model, &SparseVector::empty(), "fp").unwrap();
        let bias_only: Vec<f64> = model.models().iter().map(|m| m.bias() * m.bias_weight()).collect();
        assert_eq!(p.margins, bias_only);
        assert_eq!(p.label, model.classes()[argmax_first(&bias_only)]);
    }

    #[test]
    fn training_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows: Vec<(SparseVector, LeafLabel)> = (0..40)
            .map(|i| {
                let v = SparseVector::from_pairs([(i % 5, 1.0), ((i * 7) % 5 + 5, 0.5)]).unwrap();
                (v, LeafLabel::new(format!("c{}", i % 3)))
            })
            .collect();
        let cfg = TrainConfig {
            tolerance: 1e-9,
            max_iterations: 100_000,
            ..TrainConfig::default()
        };
        let classes = labels(&["c0", "c1", "c2"]);
        let fit = |rows: &[(SparseVector, LeafLabel)]| {
            let (x, y): (Vec<_>, Vec<_>) = rows.iter().cloned().unzip();
            train_ova(&x, &y, &classes, 10, &cfg, "fp").unwrap().0
        };
        let a = fit(&rows);
        rows.shuffle(&mut rng);
        let b = fit(&rows);
        for (ma, mb) in a.models().iter().zip(b.models()) {
            for (wa, wb) in ma.weights().iter().zip(mb.weights()) {
                assert!((wa - wb).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn scaling_invariance_only_without_bias() {
        let (x, y) = toy();
        let x: Vec<SparseVector> = x
            .iter()
            .zip([0.9, 0.4, 0.7, 0.2])
            .map(|(v, s)| v.scaled(s))
            .chain([SparseVector::from_pairs([(0, 0.3), (1, 0.2)]).unwrap()])
            .collect();
        let y: Vec<LeafLabel> = y.into_iter().chain(labels(&["b"])).collect();
        let classes = labels(&["a", "b"]);
        let v = SparseVector::from_pairs([(0, 0.5), (1, 0.45)]).unwrap();

        let no_bias = TrainConfig {
            bias: 0.0,
            ..TrainConfig::default()
        };
        let (m0, _) = train_ova(&x, &y, &classes, 2, &no_bias, "fp").unwrap();
        for s in [0.01, 0.5, 3.0, 100.0] {
            assert_eq!(
                predict_ova(&m0, &v.scaled(s), "fp").unwrap().label,
                predict_ova(&m0, &v, "fp").unwrap().label
            );
        }

        // with a bias the decision values are affine, not linear, in the input
        let (m1, _) = train_ova(&x, &y, &classes, 2, &TrainConfig::default(), "fp").unwrap();
        let d1 = m1.decision_values(&v).unwrap();
        let d2 = m1.decision_values(&v.scaled(2.0)).unwrap();
        let offsets: Vec<f64> = m1.models().iter().map(|m| m.bias() * m.bias_weight()).collect();
        for k in 0..2 {
            assert!((d2[k] - offsets[k] - 2.0 * (d1[k] - offsets[k])).abs() < 1e-12);
            assert!((d2[k] - 2.0 * d1[k]).abs() > 1e-6);
        }
        let tiny = m1.decision_values(&v.scaled(1e-9)).unwrap();
        assert_eq!(argmax_first(&tiny), argmax_first(&offsets));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let (x, y) = toy();
        let cfg = TrainConfig {
            c: 0.7,
            seed: 9,
            ..TrainConfig::default()
        };
        let (model, _) = train_ova(&x, &y, &labels(&["a", "b", "zz"]), 2, &cfg, "abc123").unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = OvaModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.models().iter().zip(model.models()) {
            let bits_a: Vec<u64> = a.weights().iter().map(|w| w.to_bits()).collect();
            let bits_b: Vec<u64> = b.weights().iter().map(|w| w.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_unstorable_labels_and_corrupt_files() {
        let (x, _) = toy();
        let y = labels(&["a\tb", "a\tb", "c", "c"]);
        let (model, _) = train_ova(&x, &y, &labels(&["a\tb", "c"]), 2, &TrainConfig::default(), "fp").unwrap();
        assert!(model.write_to(Vec::new()).is_err());
        assert!(OvaModel::read_from("garbage\n".as_bytes()).is_err());
    }
}
