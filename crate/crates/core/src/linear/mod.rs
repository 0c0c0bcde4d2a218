//! Binary L2-regularized L2-loss linear SVMs and flat one-versus-all
//! multiclass classification built on them.

mod ova;
mod solver;

pub(crate) use ova::train_ova_on;
pub use ova::{predict_ova, train_ova, OvaModel, OvaPrediction};
pub use solver::{solve, Problem, TrainReport};

use crate::features::SparseVector;
use crate::textfmt::FormatError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("expected {expected} labels, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {value} at position {position} is not ±1")]
    BadLabel { position: usize, value: i8 },
    #[error("feature index {index} does not fit a model of dimension {dim}")]
    DimensionOverflow { index: usize, dim: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("one-versus-all needs at least one class")]
    NoClasses,
    #[error("training label {0:?} is not in the class list")]
    UnknownLabel(String),
    #[error("vector built with vocabulary {found}, model expects {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Loss weight C.
    pub c: f64,
    /// Value of the constant bias feature; 0 disables the bias.
    pub bias: f64,
    /// Stopping threshold on the projected-gradient spread.
    pub tolerance: f64,
    /// Cap on outer passes.
    pub max_iterations: usize,
    /// Seed of the coordinate shuffling.
    pub seed: u64,
    pub shrinking: bool,
    /// Record the objectives after every pass (testing aid).
    pub record_trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            bias: 1.0,
            tolerance: 0.1,
            max_iterations: 1000,
            seed: 0,
            shrinking: true,
            record_trace: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LinearError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(LinearError::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.bias >= 0.0 && self.bias.is_finite()) {
            return Err(LinearError::Config(format!(
                "bias must be non-negative, got {}",
                self.bias
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(LinearError::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(LinearError::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Weight vector of one binary SVM. With a bias the last weight belongs
/// to the constant feature at index `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryLinearModel {
    weights: Vec<f64>,
    dim: usize,
    bias: f64,
}

impl BinaryLinearModel {
    pub fn from_weights(weights: Vec<f64>, dim: usize, bias: f64) -> Result<Self, LinearError> {
        let expected = if bias > 0.0 { dim + 1 } else { dim };
        if weights.len() != expected {
            return Err(LinearError::LengthMismatch {
                expected,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LinearError::Config("weights must be finite".into()));
        }
        Ok(BinaryLinearModel { weights, dim, bias })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Weight of the bias feature, 0 without a bias.
    pub fn bias_weight(&self) -> f64 {
        if self.bias > 0.0 {
            self.weights[self.dim]
        } else {
            0.0
        }
    }

    /// Decision value for a vector that is not bias-augmented.
    pub fn decision_value(&self, v: &SparseVector) -> Result<f64, LinearError> {
        if v.min_dim() > self.dim {
            return Err(LinearError::DimensionOverflow {
                index: v.min_dim() - 1,
                dim: self.dim,
            });
        }
        let dot: f64 = v.iter().map(|(i, x)| self.weights[i as usize] * x).sum();
        Ok(dot + self.bias * self.bias_weight())
    }
}

/// Appends the constant bias feature at index `dim`; identity when `bias`
/// is 0. Apply after all normalization.
pub fn augment_bias(v: &SparseVector, bias: f64, dim: usize) -> SparseVector {
    let mut out = v.clone();
    if bias > 0.0 {
        debug_assert!(v.min_dim() <= dim);
        out.push(dim as u32, bias);
    }
    out
}

/// Exact sparse dot product `w·v` for a bias-augmented vector.
pub fn margin(model: &BinaryLinearModel, v: &SparseVector) -> Result<f64, LinearError> {
    v.dot_dense(&model.weights).ok_or(LinearError::DimensionOverflow {
        index: v.min_dim().saturating_sub(1),
        dim: model.weights.len(),
    })
}

/// Trains one binary SVM on `x` (not bias-augmented) with ±1 labels.
pub fn train_binary(
    x: &[SparseVector],
    y: &[i8],
    dim: usize,
    config: &TrainConfig,
) -> Result<(BinaryLinearModel, TrainReport), LinearError> {
    let problem = Problem::new(x, dim, config.bias)?;
    solve(&problem, y, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn tight(c: f64, bias: f64) -> TrainConfig {
        TrainConfig {
            c,
            bias,
            tolerance: 1e-10,
            max_iterations: 100_000,
            ..TrainConfig::default()
        }
    }

    /// Accelerated gradient descent on the (smooth, 1-strongly convex)
    /// primal with step 1/L, independent of the dual solver. Stops when the
    /// gradient norm drops below 1e-10.
    fn primal_oracle(x: &[SparseVector], y: &[i8], dim: usize, c: f64, bias: f64) -> Vec<f64> {
        let aug: Vec<SparseVector> = x.iter().map(|v| augment_bias(v, bias, dim)).collect();
        let len = if bias > 0.0 { dim + 1 } else { dim };
        let lipschitz = 1.0 + 2.0 * c * aug.iter().map(SparseVector::squared_norm).sum::<f64>();
        let root_kappa = lipschitz.sqrt();
        let momentum = (root_kappa - 1.0) / (root_kappa + 1.0);
        let gradient = |w: &[f64]| {
            let mut g = w.to_vec();
            for (v, &yi) in aug.iter().zip(y) {
                let yi = f64::from(yi);
                let m = 1.0 - yi * v.dot_dense(w).unwrap();
                if m > 0.0 {
                    for (j, xv) in v.iter() {
                        g[j as usize] -= 2.0 * c * m * yi * xv;
                    }
                }
            }
            g
        };
        let mut w = vec![0.0; len];
        let mut prev = w.clone();
        for _ in 0..2_000_000 {
            let z: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + momentum * (a - b)).collect();
            let g = gradient(&z);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10 {
                return z;
            }
            prev = w;
            w = z.iter().zip(&g).map(|(zj, gj)| zj - gj / lipschitz).collect();
        }
        w
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let x = [sv(&[(0, 1.0)]), sv(&[(0, -1.0)])];
        let (m, report) = train_binary(&x, &[1, -1], 1, &tight(1.0, 0.0)).unwrap();
        // minimize w²/2 + 2C(1 − w)²  ⇒  w = 4C / (1 + 4C)
        assert!((m.weights()[0] - 0.8).abs() < 1e-4);
        assert!(report.converged);
        assert_eq!(margin(&m, &sv(&[(0, 1.0)])).unwrap(), m.weights()[0]);
    }

    #[test]
    fn tiny_c_gives_near_zero_weights() {
        let x = [sv(&[(0, 1.0), (1, 0.5)]), sv(&[(1, -1.0)]), sv(&[(0, 0.3)])];
        let (m, _) = train_binary(&x, &[1, -1, 1], 2, &tight(1e-9, 1.0)).unwrap();
        let norm: f64 = m.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm <= 1e-6, "norm {norm}");
    }

    #[test]
    fn single_class_input_is_allowed() {
        let x = [sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let (m, _) = train_binary(&x, &[1, 1], 2, &tight(1.0, 1.0)).unwrap();
        for v in &x {
            assert!(m.decision_value(v).unwrap() > 0.0);
        }
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            train_binary(&[], &[], 3, &TrainConfig::default()).unwrap_err(),
            LinearError::EmptyTrainingSet
        );
        let x = [sv(&[(0, 1.0)])];
        assert!(matches!(
            train_binary(&x, &[1, 1], 1, &TrainConfig::default()),
            Err(LinearError::LengthMismatch { .. })
        ));
        assert!(matches!(
            train_binary(&x, &[0], 1, &TrainConfig::default()),
            Err(LinearError::BadLabel { .. })
        ));
        assert!(matches!(
            train_binary(&x, &[1], 0, &TrainConfig::default()),
            Err(LinearError::DimensionOverflow { .. })
        ));
        let bad = TrainConfig {
            c: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train_binary(&x, &[1], 1, &bad), Err(LinearError::Config(_))));
    }

    #[test]
    fn augment_and_margin() {
        let v = sv(&[(0, 1.0)]);
        assert_eq!(augment_bias(&v, 0.0, 4), v);
        let a = augment_bias(&v, 1.0, 4);
        assert_eq!(a.indices(), &[0, 4]);
        assert!((a.norm() - (v.squared_norm() + 1.0).sqrt()).abs() < 1e-15);

        let m = BinaryLinearModel::from_weights(vec![0.8], 1, 0.0).unwrap();
        assert_eq!(margin(&m, &SparseVector::empty()).unwrap(), 0.0);
        assert_eq!(margin(&m, &sv(&[(0, 1.0)])).unwrap(), 0.8);
        assert!(matches!(
            margin(&m, &sv(&[(3, 1.0)])),
            Err(LinearError::DimensionOverflow { .. })
        ));
        let x = sv(&[(0, 2.0)]);
        assert_eq!(margin(&m, &x.scaled(-3.0)).unwrap(), -3.0 * margin(&m, &x).unwrap());
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<SparseVector>, Vec<i8>, usize) {
        let n = rng.gen_range(1..=50);
        let d = rng.gen_range(1..=10);
        let separable = rng.gen_bool(0.5);
        let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let mut pairs = Vec::new();
            for j in 0..d as u32 {
                if rng.gen_bool(0.6) {
                    pairs.push((j, rng.gen_range(-2.0..2.0)));
                }
            }
            let v = SparseVector::from_pairs(pairs).unwrap();
            let score = v.dot_dense(&truth).unwrap();
            let label = if separable || rng.gen_bool(0.8) {
                if score >= 0.0 {
                    1
                } else {
                    -1
                }
            } else if score >= 0.0 {
                -1
            } else {
                1
            };
            x.push(v);
            y.push(label);
        }
        (x, y, d)
    }

    #[test]
    fn matches_primal_oracle_on_small_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..15 {
            let (x, y, d) = random_problem(&mut rng);
            let c = [0.1, 1.0, 10.0][case % 3];
            let bias = [0.0, 1.0][case % 2];
            let problem = Problem::new(&x, d, bias).unwrap();
            let oracle = primal_oracle(&x, &y, d, c, bias);
            let (m, report) = solve(&problem, &y, &tight(c, bias)).unwrap();
            let want = problem.primal_objective(&oracle, &y, c);
            let got = report.primal_objective;
            assert!(
                (got - want).abs() <= 1e-6 * want.abs().max(1e-12),
                "case {case}: got {got}, oracle {want}"
            );
            assert_eq!(got, problem.primal_objective(m.weights(), &y, c));
            assert!(report.duality_gap() <= 10.0 * 1e-6 * want.max(1.0));
        }
    }

    #[test]
    fn dual_objective_decreases_and_gap_closes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (x, y, d) = random_problem(&mut rng);
            let cfg = TrainConfig {
                tolerance: 1e-6,
                record_trace: true,
                ..tight(1.0, 1.0)
            };
            let (_, report) = train_binary(&x, &y, d, &cfg).unwrap();
            for w in report.dual_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
            }
            assert!(report.converged);
            assert!(report.duality_gap() >= -1e-12);
            assert!(report.duality_gap() <= 10.0 * 1e-6 * report.primal_objective.max(1.0));
        }
    }

    #[test]
    fn duplicated_data_with_half_c_has_same_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let (x, y, d) = random_problem(&mut rng);
            let (m1, _) = train_binary(&x, &y, d, &tight(1.0, 1.0)).unwrap();
            let x2: Vec<SparseVector> = x.iter().chain(&x).cloned().collect();
            let y2: Vec<i8> = y.iter().chain(&y).copied().collect();
            let (m2, _) = train_binary(&x2, &y2, d, &tight(0.5, 1.0)).unwrap();
            for (a, b) in m1.weights().iter().zip(m2.weights()) {
                assert!((a - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y, d) = random_problem(&mut rng);
        let cfg = TrainConfig::default();
        assert_eq!(
            train_binary(&x, &y, d, &cfg).unwrap(),
            train_binary(&x, &y, d, &cfg).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dual_variables_stay_feasible_and_weights_finite(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, d) = random_problem(&mut rng);
            let (m, report) = train_binary(&x, &y, d, &TrainConfig { seed, ..TrainConfig::default() }).unwrap();
            prop_assert!(m.weights().iter().all(|w| w.is_finite()));
            // a negative dual variable would make the gap negative
            prop_assert!(report.duality_gap() >= -1e-9);
        }
    }
}
