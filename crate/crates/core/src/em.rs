//! Baum-Welch re-estimation for discrete and Gaussian-mixture emissions.
//!
//! One step accumulates expected counts over every sequence of the dataset
//! (numerators and denominators are summed across sequences before dividing)
//! and then normalizes, so multi-sequence training is a single reduction.
//!
//! The transition update is the usual xi/gamma ratio over the scaled
//! lattices: `a[i][j] = sum_t xi_t(i,j) / sum_t gamma_t(i)` with the sums
//! running over `t = 1..T-1`. Mixture weights, means, and variances use the
//! per-component responsibilities; variances are taken around the
//! re-estimated mean (the form that cannot decrease the likelihood) and kept
//! above [`VARIANCE_FLOOR`]. After every maximization step each stochastic
//! row is floored at `min_row_mass` and renormalized so that no probability
//! becomes an absorbing zero.

use ndarray::{Array2, Array3};

use crate::inference::{emission_lattice, forward, forward_backward, InferenceError};
use crate::model::{
    diag_normal_density, EmissionModel, HmmModel, MixtureComponent, ObservationSequence,
    VARIANCE_FLOOR,
};

/// Iteration control for [`train_bw`] and smoothing for [`bw_step`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_iterations: usize,
    /// Stop once the per-iteration improvement falls below this value.
    pub loglik_tolerance: f64,
    /// Every probability is floored at this mass after each step, then the
    /// row is renormalized. Zero disables smoothing.
    pub min_row_mass: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iterations: 100,
            loglik_tolerance: 1e-6,
            min_row_mass: 1e-6,
        }
    }
}

/// One re-estimation step: the updated model and the dataset log-likelihood
/// under the input and output models.
#[derive(Debug, Clone)]
pub struct ReestimateOutput {
    pub model: HmmModel,
    pub old_loglik: f64,
    pub new_loglik: f64,
}

#[derive(Debug)]
pub enum TrainError {
    EmptyDataset,
    /// A dataset sequence has probability zero under the current model.
    ImpossibleSequence { index: usize },
    RequiresMixtureEmissions,
    Inference(InferenceError),
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "training dataset is empty"),
            TrainError::ImpossibleSequence { index } => {
                write!(f, "sequence {index} is impossible under the model")
            }
            TrainError::RequiresMixtureEmissions => {
                write!(f, "operation requires Gaussian-mixture emissions")
            }
            TrainError::Inference(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<InferenceError> for TrainError {
    fn from(e: InferenceError) -> Self {
        TrainError::Inference(e)
    }
}

/// Floor every entry at `floor` and renormalize to a stochastic row.
fn floor_and_renormalize(row: &mut [f64], floor: f64) {
    for v in row.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for v in row.iter_mut() {
            *v /= sum;
        }
    } else {
        let u = 1.0 / row.len() as f64;
        row.fill(u);
    }
}

/// State posteriors `gamma_t(i)` from the scaled lattices. With the scaling
/// convention used here this is just the elementwise product.
fn state_posteriors(alpha_hat: &Array2<f64>, beta_hat: &Array2<f64>) -> Array2<f64> {
    alpha_hat * beta_hat
}

/// Per-component responsibilities `gamma_t(j,k)`: the state posterior split
/// across mixture components in proportion to their weighted densities at
/// the observation.
///
/// Every time slice sums to one. Errors if the sequence is impossible under
/// the model or the model is not a mixture model.
pub fn mixture_responsibility(
    model: &HmmModel,
    obs: &ObservationSequence,
) -> Result<Array3<f64>, TrainError> {
    let comps = match &model.emission {
        EmissionModel::GaussianMixture { states } => states,
        EmissionModel::Discrete { .. } => return Err(TrainError::RequiresMixtureEmissions),
    };
    let fb = forward_backward(model, obs)?;
    if fb.log_likelihood == f64::NEG_INFINITY {
        return Err(TrainError::ImpossibleSequence { index: 0 });
    }
    let gamma = state_posteriors(&fb.alpha_hat, &fb.beta_hat);
    let t_len = obs.len();
    let n = model.n_states();
    let m = comps[0].len();
    let mut out = Array3::zeros((t_len, n, m));
    for t in 0..t_len {
        let x = match obs.item(t) {
            crate::model::ObsItem::Vector(x) => x,
            crate::model::ObsItem::Symbol(_) => unreachable!("kind checked by forward_backward"),
        };
        for j in 0..n {
            let weighted: Vec<f64> = comps[j]
                .iter()
                .map(|c| c.weight * diag_normal_density(&c.mean, &c.variance, x))
                .collect();
            let denom: f64 = weighted.iter().sum();
            if denom > 0.0 {
                for k in 0..m {
                    out[[t, j, k]] = gamma[[t, j]] * weighted[k] / denom;
                }
            }
        }
    }
    Ok(out)
}

struct DiscreteAcc {
    emit_num: Array2<f64>,
    emit_den: Vec<f64>,
}

struct MixtureAcc {
    /// `sum_t gamma_t(j,k)` per state and component.
    weight_num: Array2<f64>,
    /// `sum_t gamma_t(j)` per state.
    state_den: Vec<f64>,
    /// `sum_t gamma_t(j,k) o_t`, indexed `[j][k][dim]`.
    mean_num: Vec<Vec<Vec<f64>>>,
    /// Cached per-sequence responsibilities for the variance pass.
    responsibilities: Vec<Array3<f64>>,
}

/// One Baum-Welch step over the whole dataset.
pub fn bw_step(
    model: &HmmModel,
    dataset: &[ObservationSequence],
    config: &TrainConfig,
) -> Result<ReestimateOutput, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n = model.n_states();
    let mut old_loglik = 0.0;
    let mut pi_acc = vec![0.0; n];
    let mut trans_num = Array2::<f64>::zeros((n, n));
    let mut trans_den = vec![0.0; n];

    let mut discrete_acc = match &model.emission {
        EmissionModel::Discrete { table } => Some(DiscreteAcc {
            emit_num: Array2::zeros((n, table.ncols())),
            emit_den: vec![0.0; n],
        }),
        EmissionModel::GaussianMixture { .. } => None,
    };
    let mut mixture_acc = match &model.emission {
        EmissionModel::GaussianMixture { states } => {
            let m = states[0].len();
            let d = states[0][0].mean.len();
            Some(MixtureAcc {
                weight_num: Array2::zeros((n, m)),
                state_den: vec![0.0; n],
                mean_num: vec![vec![vec![0.0; d]; m]; n],
                responsibilities: Vec::with_capacity(dataset.len()),
            })
        }
        EmissionModel::Discrete { .. } => None,
    };

    for (s, obs) in dataset.iter().enumerate() {
        let fb = forward_backward(model, obs)?;
        if fb.log_likelihood == f64::NEG_INFINITY {
            return Err(TrainError::ImpossibleSequence { index: s });
        }
        old_loglik += fb.log_likelihood;
        let gamma = state_posteriors(&fb.alpha_hat, &fb.beta_hat);
        let emit = emission_lattice(model, obs);
        let t_len = obs.len();

        for i in 0..n {
            pi_acc[i] += gamma[[0, i]];
        }
        for t in 0..t_len - 1 {
            for i in 0..n {
                trans_den[i] += gamma[[t, i]];
                for j in 0..n {
                    trans_num[[i, j]] += fb.alpha_hat[[t, i]]
                        * model.transition[[i, j]]
                        * emit[[t + 1, j]]
                        * fb.beta_hat[[t + 1, j]]
                        * fb.scale[t + 1];
                }
            }
        }

        if let Some(acc) = discrete_acc.as_mut() {
            let symbols = match obs {
                ObservationSequence::Symbols(sym) => sym,
                ObservationSequence::Vectors(_) => unreachable!("kind checked by forward_backward"),
            };
            for t in 0..t_len {
                for j in 0..n {
                    acc.emit_num[[j, symbols[t]]] += gamma[[t, j]];
                    acc.emit_den[j] += gamma[[t, j]];
                }
            }
        }
        if let Some(acc) = mixture_acc.as_mut() {
            let resp = mixture_responsibility(model, obs).map_err(|e| match e {
                TrainError::ImpossibleSequence { .. } => TrainError::ImpossibleSequence { index: s },
                other => other,
            })?;
            let m = resp.dim().2;
            for t in 0..t_len {
                let x = match obs.item(t) {
                    crate::model::ObsItem::Vector(x) => x,
                    _ => unreachable!(),
                };
                for j in 0..n {
                    acc.state_den[j] += gamma[[t, j]];
                    for k in 0..m {
                        let r = resp[[t, j, k]];
                        acc.weight_num[[j, k]] += r;
                        for (dd, &xd) in x.iter().enumerate() {
                            acc.mean_num[j][k][dd] += r * xd;
                        }
                    }
                }
            }
            acc.responsibilities.push(resp);
        }
    }

    // maximization
    let mut initial: Vec<f64> = pi_acc.iter().map(|v| v / dataset.len() as f64).collect();
    floor_and_renormalize(&mut initial, config.min_row_mass);

    let mut transition = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut row: Vec<f64> = if trans_den[i] > 0.0 {
            (0..n).map(|j| trans_num[[i, j]] / trans_den[i]).collect()
        } else {
            model.transition.row(i).to_vec()
        };
        floor_and_renormalize(&mut row, config.min_row_mass);
        for j in 0..n {
            transition[[i, j]] = row[j];
        }
    }

    let emission = match (&model.emission, discrete_acc, mixture_acc) {
        (EmissionModel::Discrete { table }, Some(acc), _) => {
            let k = table.ncols();
            let mut new_table = Array2::<f64>::zeros((n, k));
            for j in 0..n {
                let mut row: Vec<f64> = if acc.emit_den[j] > 0.0 {
                    (0..k).map(|v| acc.emit_num[[j, v]] / acc.emit_den[j]).collect()
                } else {
                    table.row(j).to_vec()
                };
                floor_and_renormalize(&mut row, config.min_row_mass);
                for v in 0..k {
                    new_table[[j, v]] = row[v];
                }
            }
            EmissionModel::Discrete { table: new_table }
        }
        (EmissionModel::GaussianMixture { states }, _, Some(acc)) => {
            let m = states[0].len();
            let d = states[0][0].mean.len();
            // means first, then variances around the new means
            let mut means = vec![vec![vec![0.0; d]; m]; n];
            for j in 0..n {
                for k in 0..m {
                    let den = acc.weight_num[[j, k]];
                    for dd in 0..d {
                        means[j][k][dd] = if den > 0.0 {
                            acc.mean_num[j][k][dd] / den
                        } else {
                            states[j][k].mean[dd]
                        };
                    }
                }
            }
            let mut var_num = vec![vec![vec![0.0; d]; m]; n];
            for (obs, resp) in dataset.iter().zip(&acc.responsibilities) {
                for t in 0..obs.len() {
                    let x = match obs.item(t) {
                        crate::model::ObsItem::Vector(x) => x,
                        _ => unreachable!(),
                    };
                    for j in 0..n {
                        for k in 0..m {
                            let r = resp[[t, j, k]];
                            for dd in 0..d {
                                let delta = x[dd] - means[j][k][dd];
                                var_num[j][k][dd] += r * delta * delta;
                            }
                        }
                    }
                }
            }
            let new_states: Vec<Vec<MixtureComponent>> = (0..n)
                .map(|j| {
                    let mut weights: Vec<f64> = if acc.state_den[j] > 0.0 {
                        (0..m).map(|k| acc.weight_num[[j, k]] / acc.state_den[j]).collect()
                    } else {
                        states[j].iter().map(|c| c.weight).collect()
                    };
                    floor_and_renormalize(&mut weights, config.min_row_mass);
                    (0..m)
                        .map(|k| {
                            let den = acc.weight_num[[j, k]];
                            let variance: Vec<f64> = (0..d)
                                .map(|dd| {
                                    let v = if den > 0.0 {
                                        var_num[j][k][dd] / den
                                    } else {
                                        states[j][k].variance[dd]
                                    };
                                    v.max(VARIANCE_FLOOR)
                                })
                                .collect();
                            MixtureComponent {
                                weight: weights[k],
                                mean: means[j][k].clone(),
                                variance,
                            }
                        })
                        .collect()
                })
                .collect();
            EmissionModel::GaussianMixture { states: new_states }
        }
        _ => unreachable!("accumulator matches emission kind"),
    };

    let new_model = HmmModel {
        initial,
        transition,
        emission,
    };
    let mut new_loglik = 0.0;
    for (s, obs) in dataset.iter().enumerate() {
        let ll = forward(&new_model, obs)?.log_likelihood;
        if ll == f64::NEG_INFINITY {
            return Err(TrainError::ImpossibleSequence { index: s });
        }
        new_loglik += ll;
    }
    Ok(ReestimateOutput {
        model: new_model,
        old_loglik,
        new_loglik,
    })
}

/// Iterate [`bw_step`] until the improvement drops below the tolerance or the
/// iteration budget is exhausted. Returns the trained model and the total
/// log-likelihood history (initial value first, then one entry per step).
pub fn train_bw(
    model: &HmmModel,
    dataset: &[ObservationSequence],
    config: &TrainConfig,
) -> Result<(HmmModel, Vec<f64>), TrainError> {
    assert!(config.max_iterations >= 1, "max_iterations must be at least 1");
    assert!(config.loglik_tolerance >= 0.0, "tolerance must be non-negative");
    let mut current = model.clone();
    let mut history = Vec::with_capacity(config.max_iterations + 1);
    for _ in 0..config.max_iterations {
        let step = bw_step(&current, dataset, config)?;
        if history.is_empty() {
            history.push(step.old_loglik);
        }
        history.push(step.new_loglik);
        let improvement = step.new_loglik - step.old_loglik;
        current = step.model;
        if improvement < config.loglik_tolerance {
            break;
        }
    }
    Ok((current, history))
}

/// Render a likelihood history as `iteration,total_loglik,delta` CSV.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,total_loglik,delta\n");
    for (i, &ll) in history.iter().enumerate() {
        let delta = if i == 0 { 0.0 } else { ll - history[i - 1] };
        out.push_str(&format!("{i},{ll:.6},{delta:.6}\n"));
    }
    out
}
