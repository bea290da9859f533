//! Exact inference: scaled forward/backward lattices and Viterbi decoding.
//!
//! The forward recursion normalizes each time step by the row sum and records
//! the applied multiplier `c_t`, so `log_likelihood = -sum_t ln(c_t)`. Raw
//! probabilities underflow already for sequences a few hundred symbols long,
//! which the benchmark datasets exceed.
//!
//! Scaling convention: `alpha_hat[t]` sums to one, and `beta_hat[t]` carries
//! the scale factors of steps `t+1..T` so that
//! `sum_i alpha_hat[t][i] * beta_hat[t][i] = 1` at every step and the
//! elementwise product is exactly the state posterior.

use ndarray::Array2;

use crate::model::{HmmModel, ObservationSequence, StatePath};

/// Scaled lattices from one forward (and optionally backward) pass.
///
/// `scale[t]` is the multiplier `c_t` applied at step `t`; the sequence
/// likelihood is `exp(log_likelihood)` with `log_likelihood = -sum ln(c_t)`.
/// A sequence that is impossible under the model yields
/// `log_likelihood = -inf` and unspecified lattice contents from the failing
/// step on; it is a sentinel, never a panic or NaN.
#[derive(Debug, Clone)]
pub struct ForwardBackwardResult {
    /// `T x N`, each row normalized to sum 1.
    pub alpha_hat: Array2<f64>,
    /// `T x N`; empty (`0 x N`) when only the forward pass was requested.
    pub beta_hat: Array2<f64>,
    /// Per-step normalizers `c_t`.
    pub scale: Vec<f64>,
    /// Natural-log likelihood of the sequence.
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceError {
    EmptySequence,
    /// Discrete model fed vectors or vice versa.
    KindMismatch,
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        n_symbols: usize,
    },
    DimensionMismatch {
        position: usize,
        got: usize,
        expected: usize,
    },
}

impl std::fmt::Display for InferenceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InferenceError::EmptySequence => write!(f, "observation sequence is empty"),
            InferenceError::KindMismatch => {
                write!(f, "observation kind does not match the emission model")
            }
            InferenceError::SymbolOutOfRange {
                position,
                symbol,
                n_symbols,
            } => write!(
                f,
                "observation[{position}] = {symbol} is outside the alphabet of size {n_symbols}"
            ),
            InferenceError::DimensionMismatch {
                position,
                got,
                expected,
            } => write!(
                f,
                "observation[{position}] has dimension {got}, expected {expected}"
            ),
        }
    }
}

impl std::error::Error for InferenceError {}

/// Check that the observation kind, symbol range, and vector dimension match
/// the model before running any recursion.
fn check_compatible(model: &HmmModel, obs: &ObservationSequence) -> Result<(), InferenceError> {
    if obs.is_empty() {
        return Err(InferenceError::EmptySequence);
    }
    match (&model.emission, obs) {
        (crate::model::EmissionModel::Discrete { table }, ObservationSequence::Symbols(s)) => {
            let k = table.ncols();
            for (t, &o) in s.iter().enumerate() {
                if o >= k {
                    return Err(InferenceError::SymbolOutOfRange {
                        position: t,
                        symbol: o,
                        n_symbols: k,
                    });
                }
            }
            Ok(())
        }
        (crate::model::EmissionModel::GaussianMixture { states }, ObservationSequence::Vectors(v)) => {
            let d = states
                .first()
                .and_then(|c| c.first())
                .map(|c| c.mean.len())
                .unwrap_or(0);
            for (t, x) in v.iter().enumerate() {
                if x.len() != d {
                    return Err(InferenceError::DimensionMismatch {
                        position: t,
                        got: x.len(),
                        expected: d,
                    });
                }
            }
            Ok(())
        }
        _ => Err(InferenceError::KindMismatch),
    }
}

/// Emission probabilities for every (time, state) pair.
pub(crate) fn emission_lattice(model: &HmmModel, obs: &ObservationSequence) -> Array2<f64> {
    let t_len = obs.len();
    let n = model.n_states();
    let mut emit = Array2::zeros((t_len, n));
    for t in 0..t_len {
        let item = obs.item(t);
        for j in 0..n {
            emit[[t, j]] = model.emission_prob(j, item);
        }
    }
    emit
}

fn forward_pass(
    model: &HmmModel,
    emit: &Array2<f64>,
) -> (Array2<f64>, Vec<f64>, f64) {
    let (t_len, n) = emit.dim();
    let mut alpha = Array2::zeros((t_len, n));
    let mut scale = vec![1.0; t_len];
    let mut log_likelihood = 0.0;
    for t in 0..t_len {
        let mut row_sum = 0.0;
        for j in 0..n {
            let unscaled = if t == 0 {
                model.initial[j] * emit[[0, j]]
            } else {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += alpha[[t - 1, i]] * model.transition[[i, j]];
                }
                acc * emit[[t, j]]
            };
            alpha[[t, j]] = unscaled;
            row_sum += unscaled;
        }
        if row_sum <= 0.0 {
            return (alpha, scale, f64::NEG_INFINITY);
        }
        let c = 1.0 / row_sum;
        for j in 0..n {
            alpha[[t, j]] *= c;
        }
        scale[t] = c;
        log_likelihood -= c.ln();
    }
    (alpha, scale, log_likelihood)
}

fn backward_pass(model: &HmmModel, emit: &Array2<f64>, scale: &[f64]) -> Array2<f64> {
    let (t_len, n) = emit.dim();
    let mut beta = Array2::zeros((t_len, n));
    for i in 0..n {
        beta[[t_len - 1, i]] = 1.0;
    }
    for t in (0..t_len - 1).rev() {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += model.transition[[i, j]] * emit[[t + 1, j]] * beta[[t + 1, j]];
            }
            beta[[t, i]] = scale[t + 1] * acc;
        }
    }
    beta
}

/// Forward pass only: scaled alpha lattice, scale factors, log-likelihood.
///
/// `beta_hat` in the result is left empty.
pub fn forward(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<ForwardBackwardResult, InferenceError> {
    check_compatible(model, obs)?;
    let emit = emission_lattice(model, obs);
    let (alpha_hat, scale, log_likelihood) = forward_pass(model, &emit);
    Ok(ForwardBackwardResult {
        alpha_hat,
        beta_hat: Array2::zeros((0, model.n_states())),
        scale,
        log_likelihood,
    })
}

/// Both lattices with shared scale factors.
pub fn forward_backward(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<ForwardBackwardResult, InferenceError> {
    check_compatible(model, obs)?;
    let emit = emission_lattice(model, obs);
    let (alpha_hat, scale, log_likelihood) = forward_pass(model, &emit);
    if log_likelihood == f64::NEG_INFINITY {
        return Ok(ForwardBackwardResult {
            alpha_hat,
            beta_hat: Array2::zeros((obs.len(), model.n_states())),
            scale,
            log_likelihood,
        });
    }
    let beta_hat = backward_pass(model, &emit, &scale);
    Ok(ForwardBackwardResult {
        alpha_hat,
        beta_hat,
        scale,
        log_likelihood,
    })
}

/// Backward lattice (forward is run internally to obtain the shared scale).
pub fn backward(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<ForwardBackwardResult, InferenceError> {
    forward_backward(model, obs)
}

/// Sequence log-likelihood, forward pass only.
pub fn log_likelihood(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<f64, InferenceError> {
    forward(model, obs).map(|r| r.log_likelihood)
}

/// Most probable state path and its joint log-probability `ln P[O, Q]`.
///
/// Ties are broken toward the lowest state index at the final step and at
/// every backtrack step, which makes decoding deterministic. An impossible
/// sequence yields `-inf` with an arbitrary (all-zero backtrack) path.
pub fn viterbi(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<(StatePath, f64), InferenceError> {
    check_compatible(model, obs)?;
    let emit = emission_lattice(model, obs);
    let t_len = obs.len();
    let n = model.n_states();

    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    let mut delta = vec![0.0f64; n];
    let mut psi = Array2::<usize>::zeros((t_len, n));
    for j in 0..n {
        delta[j] = ln(model.initial[j]) + ln(emit[[0, j]]);
    }
    let mut next = vec![0.0f64; n];
    for t in 1..t_len {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..n {
                let v = delta[i] + ln(model.transition[[i, j]]);
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + ln(emit[[t, j]]);
            psi[[t, j]] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut last = 0;
    let mut best = f64::NEG_INFINITY;
    for (j, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            last = j;
        }
    }
    let mut states = vec![0usize; t_len];
    states[t_len - 1] = last;
    for t in (1..t_len).rev() {
        states[t - 1] = psi[[t, states[t]]];
    }
    Ok((StatePath { states }, best))
}
