//! Dual coordinate descent for the L2-regularized L2-loss (squared hinge)
//! linear SVM:
//!
//! ```text
//! min_w  ½‖w‖² + C Σᵢ max(0, 1 − yᵢ w·xᵢ)²
//! ```
//!
//! solved through its dual
//!
//! ```text
//! min_α  ½ αᵀ(Q + D)α − eᵀα,   αᵢ ≥ 0,   Qᵢⱼ = yᵢyⱼ xᵢ·xⱼ,   Dᵢᵢ = 1/(2C)
//! ```
//!
//! one coordinate at a time with a closed-form clipped Newton step, a
//! random coordinate order per pass and shrinking of coordinates stuck at
//! the lower bound. The bias is an extra feature of constant value `B`
//! that is regularized like every other weight.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BinaryLinearModel, LinearError, TrainConfig};
use crate::features::SparseVector;

/// Training rows with their squared norms, shared across the binary
/// problems of a one-versus-all run.
pub struct Problem<'a> {
    rows: Vec<&'a SparseVector>,
    sq_norms: Vec<f64>,
    dim: usize,
    bias: f64,
}

impl<'a> Problem<'a> {
    pub fn new<I>(rows: I, dim: usize, bias: f64) -> Result<Self, LinearError>
    where
        I: IntoIterator<Item = &'a SparseVector>,
    {
        if !(bias >= 0.0 && bias.is_finite()) {
            return Err(LinearError::Config(format!("bias must be non-negative, got {bias}")));
        }
        let rows: Vec<&SparseVector> = rows.into_iter().collect();
        if let Some(r) = rows.iter().find(|r| r.min_dim() > dim) {
            return Err(LinearError::DimensionOverflow {
                index: r.min_dim() - 1,
                dim,
            });
        }
        let sq_norms = rows.iter().map(|r| r.squared_norm() + bias * bias).collect();
        Ok(Problem {
            rows,
            sq_norms,
            dim,
            bias,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn weight_len(&self) -> usize {
        if self.bias > 0.0 {
            self.dim + 1
        } else {
            self.dim
        }
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        let r = self.rows[i];
        let mut s: f64 = r.iter().map(|(j, v)| w[j as usize] * v).sum();
        if self.bias > 0.0 {
            s += self.bias * w[self.dim];
        }
        s
    }

    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for (j, v) in self.rows[i].iter() {
            w[j as usize] += a * v;
        }
        if self.bias > 0.0 {
            w[self.dim] += a * self.bias;
        }
    }

    /// ½‖w‖² + C Σ max(0, 1 − yᵢ w·xᵢ)².
    pub fn primal_objective(&self, w: &[f64], y: &[i8], c: f64) -> f64 {
        let reg: f64 = w.iter().map(|x| x * x).sum::<f64>() * 0.5;
        let loss: f64 = (0..self.len())
            .map(|i| {
                let m = 1.0 - f64::from(y[i]) * self.dot(i, w);
                if m > 0.0 {
                    m * m
                } else {
                    0.0
                }
            })
            .sum();
        reg + c * loss
    }
}

/// Outcome details of one binary training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Outer passes over the (active) coordinates.
    pub iterations: usize,
    /// The projected-gradient spread reached the tolerance.
    pub converged: bool,
    /// Final max minus min projected gradient over all coordinates.
    pub pg_spread: f64,
    pub primal_objective: f64,
    /// Dual objective in minimization form; `primal + dual` is the gap.
    pub dual_objective: f64,
    /// Primal objective after every outer pass, when requested.
    pub primal_trace: Vec<f64>,
    /// Dual objective after every outer pass, when requested.
    pub dual_trace: Vec<f64>,
}

impl TrainReport {
    pub fn duality_gap(&self) -> f64 {
        self.primal_objective + self.dual_objective
    }
}

fn dual_objective(w: &[f64], alpha: &[f64], diag: f64) -> f64 {
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let aa: f64 = alpha.iter().map(|a| a * a).sum();
    let sa: f64 = alpha.iter().sum();
    0.5 * ww + 0.5 * diag * aa - sa
}

/// Projected-gradient spread over every coordinate at the current point.
fn full_pg_spread(problem: &Problem<'_>, y: &[i8], w: &[f64], alpha: &[f64], diag: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for i in 0..problem.len() {
        let g = f64::from(y[i]) * problem.dot(i, w) - 1.0 + diag * alpha[i];
        let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
        max = max.max(pg);
        min = min.min(pg);
    }
    if problem.is_empty() {
        0.0
    } else {
        max - min
    }
}

pub fn solve(
    problem: &Problem<'_>,
    y: &[i8],
    config: &TrainConfig,
) -> Result<(BinaryLinearModel, TrainReport), LinearError> {
    config.validate()?;
    if problem.is_empty() {
        return Err(LinearError::EmptyTrainingSet);
    }
    if y.len() != problem.len() {
        return Err(LinearError::LengthMismatch {
            expected: problem.len(),
            found: y.len(),
        });
    }
    if let Some(pos) = y.iter().position(|&l| l != 1 && l != -1) {
        return Err(LinearError::BadLabel {
            position: pos,
            value: y[pos],
        });
    }

    let n = problem.len();
    let diag = 0.5 / config.c;
    let qd: Vec<f64> = problem.sq_norms.iter().map(|s| s + diag).collect();
    let mut w = vec![0.0; problem.weight_len()];
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pg_max_old = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut primal_trace = Vec::new();
    let mut dual_trace = Vec::new();

    while iterations < config.max_iterations {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        order[..active].shuffle(&mut rng);

        let mut s = 0;
        while s < active {
            let i = order[s];
            let yi = f64::from(y[i]);
            let g = yi * problem.dot(i, &w) - 1.0 + diag * alpha[i];
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if config.shrinking && g > pg_max_old {
                    active -= 1;
                    order.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).max(0.0);
                let step = (alpha[i] - old) * yi;
                problem.axpy(i, step, &mut w);
            }
            s += 1;
        }
        iterations += 1;
        if config.record_trace {
            primal_trace.push(problem.primal_objective(&w, y, config.c));
            dual_trace.push(dual_objective(&w, &alpha, diag));
        }

        if pg_max - pg_min <= config.tolerance {
            if active == n {
                converged = true;
                break;
            }
            // re-check every coordinate before declaring convergence
            active = n;
            pg_max_old = f64::INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
    }

    if !converged {
        log::debug!(
            "dual coordinate descent stopped at the iteration limit ({})",
            config.max_iterations
        );
    }
    let report = TrainReport {
        iterations,
        converged,
        pg_spread: full_pg_spread(problem, y, &w, &alpha, diag),
        primal_objective: problem.primal_objective(&w, y, config.c),
        dual_objective: dual_objective(&w, &alpha, diag),
        primal_trace,
        dual_trace,
    };
    let model = BinaryLinearModel {
        weights: w,
        dim: problem.dim,
        bias: problem.bias,
    };
    Ok((model, report))
}
