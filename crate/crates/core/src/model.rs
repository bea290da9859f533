//! Model representation: transition/initial distributions plus discrete or
//! Gaussian-mixture emissions, with validation of the stochastic constraints.

use ndarray::Array2;

/// Tolerance used when checking that a probability row sums to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Smallest admissible diagonal covariance entry. Re-estimation and random
/// model construction clamp variances to this floor so no Gaussian component
/// can collapse to a point mass.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// One Gaussian component of a mixture emission: weight, mean vector, and
/// diagonal covariance vector (same dimension as the mean).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Emission distributions, one per hidden state.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissionModel {
    /// Row-major `n_states x n_symbols` table; entry `[j, o]` is the
    /// probability of emitting symbol `o` in state `j`.
    Discrete { table: Array2<f64> },
    /// `states[j]` lists the mixture components of state `j`. Every state
    /// must have the same number of components and the same dimension.
    GaussianMixture { states: Vec<Vec<MixtureComponent>> },
}

impl EmissionModel {
    pub fn n_states(&self) -> usize {
        match self {
            EmissionModel::Discrete { table } => table.nrows(),
            EmissionModel::GaussianMixture { states } => states.len(),
        }
    }

    /// Alphabet size for discrete emissions.
    pub fn n_symbols(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { table } => Some(table.ncols()),
            EmissionModel::GaussianMixture { .. } => None,
        }
    }

    /// Components per state for mixture emissions.
    pub fn n_components(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { .. } => None,
            EmissionModel::GaussianMixture { states } => states.first().map(Vec::len),
        }
    }

    /// Observation dimension for mixture emissions.
    pub fn dim(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { .. } => None,
            EmissionModel::GaussianMixture { states } => states
                .first()
                .and_then(|c| c.first())
                .map(|c| c.mean.len()),
        }
    }
}

/// A hidden Markov model.
///
/// Fields are public so that invalid candidates can be constructed and then
/// checked with [`HmmModel::validate`]; inference routines assume a model
/// that validates cleanly.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    /// Initial state distribution, length `n_states`.
    pub initial: Vec<f64>,
    /// Row-stochastic `n_states x n_states` transition matrix.
    pub transition: Array2<f64>,
    pub emission: EmissionModel,
}

/// One observation sequence: either symbol indices into a discrete alphabet
/// or real vectors of a fixed dimension. All items share one kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSequence {
    Symbols(Vec<usize>),
    Vectors(Vec<Vec<f64>>),
}

/// Borrowed view of a single observation.
#[derive(Debug, Clone, Copy)]
pub enum ObsItem<'a> {
    Symbol(usize),
    Vector(&'a [f64]),
}

impl ObservationSequence {
    pub fn len(&self) -> usize {
        match self {
            ObservationSequence::Symbols(s) => s.len(),
            ObservationSequence::Vectors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn item(&self, t: usize) -> ObsItem<'_> {
        match self {
            ObservationSequence::Symbols(s) => ObsItem::Symbol(s[t]),
            ObservationSequence::Vectors(v) => ObsItem::Vector(&v[t]),
        }
    }
}

/// A state assignment for one observation sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    pub states: Vec<usize>,
}

/// Outcome of [`HmmModel::validate`]: empty means the model satisfies every
/// stochastic constraint.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            write!(f, "ok")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

fn check_row(violations: &mut Vec<String>, what: &str, row: &[f64]) {
    for (k, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            violations.push(format!("{what} entry {k} = {p} is not a probability"));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        violations.push(format!("{what} sums to {sum}, expected 1"));
    }
}

impl HmmModel {
    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    /// Check every stochastic constraint and dimension, returning a verdict
    /// rather than an error so that all violations can be reported at once.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n_states();
        if n == 0 {
            violations.push("model has no states".to_string());
            return ValidationReport { violations };
        }
        if self.transition.nrows() != n || self.transition.ncols() != n {
            violations.push(format!(
                "transition matrix is {}x{}, expected {n}x{n}",
                self.transition.nrows(),
                self.transition.ncols()
            ));
            return ValidationReport { violations };
        }
        check_row(&mut violations, "initial distribution", &self.initial);
        for i in 0..n {
            let row: Vec<f64> = self.transition.row(i).to_vec();
            check_row(&mut violations, &format!("transition row {i}"), &row);
        }
        match &self.emission {
            EmissionModel::Discrete { table } => {
                if table.nrows() != n {
                    violations.push(format!(
                        "emission table has {} rows, expected {n}",
                        table.nrows()
                    ));
                } else if table.ncols() == 0 {
                    violations.push("emission table has no symbols".to_string());
                } else {
                    for j in 0..n {
                        let row: Vec<f64> = table.row(j).to_vec();
                        check_row(&mut violations, &format!("emission row {j}"), &row);
                    }
                }
            }
            EmissionModel::GaussianMixture { states } => {
                if states.len() != n {
                    violations.push(format!(
                        "mixture emissions cover {} states, expected {n}",
                        states.len()
                    ));
                    return ValidationReport { violations };
                }
                let m = states[0].len();
                let d = states[0].first().map(|c| c.mean.len()).unwrap_or(0);
                if m == 0 {
                    violations.push("state 0 has no mixture components".to_string());
                }
                if d == 0 {
                    violations.push("mixture components have dimension 0".to_string());
                }
                for (j, comps) in states.iter().enumerate() {
                    if comps.len() != m {
                        violations.push(format!(
                            "state {j} has {} mixture components, expected {m}",
                            comps.len()
                        ));
                        continue;
                    }
                    let weights: Vec<f64> = comps.iter().map(|c| c.weight).collect();
                    check_row(&mut violations, &format!("state {j} mixture weights"), &weights);
                    for (k, comp) in comps.iter().enumerate() {
                        if comp.mean.len() != d || comp.variance.len() != d {
                            violations.push(format!(
                                "state {j} component {k} has dimension {}/{}, expected {d}",
                                comp.mean.len(),
                                comp.variance.len()
                            ));
                            continue;
                        }
                        for (dd, &v) in comp.variance.iter().enumerate() {
                            if !(v >= VARIANCE_FLOOR) {
                                violations.push(format!(
                                    "state {j} component {k} variance[{dd}] = {v} is below the floor {VARIANCE_FLOOR}"
                                ));
                            }
                        }
                        for (dd, &mu) in comp.mean.iter().enumerate() {
                            if !mu.is_finite() {
                                violations.push(format!(
                                    "state {j} component {k} mean[{dd}] = {mu} is not finite"
                                ));
                            }
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Emission probability (density for mixtures) of one observation in the
    /// given state. The observation kind must match the emission variant;
    /// inference entry points check this once up front.
    pub(crate) fn emission_prob(&self, state: usize, item: ObsItem<'_>) -> f64 {
        match (&self.emission, item) {
            (EmissionModel::Discrete { table }, ObsItem::Symbol(o)) => table[[state, o]],
            (EmissionModel::GaussianMixture { states }, ObsItem::Vector(x)) => states[state]
                .iter()
                .map(|c| c.weight * diag_normal_density(&c.mean, &c.variance, x))
                .sum(),
            _ => panic!("observation kind does not match the emission model"),
        }
    }
}

impl HmmModel {
    /// Random discrete model: every stochastic row is drawn uniformly and
    /// renormalized.
    pub fn random_discrete<R: rand::Rng + ?Sized>(
        n_states: usize,
        n_symbols: usize,
        rng: &mut R,
    ) -> HmmModel {
        let row = |len: usize, rng: &mut R| -> Vec<f64> {
            let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                for e in &mut v {
                    *e /= s;
                }
            } else {
                v = vec![1.0 / len as f64; len];
            }
            v
        };
        let initial = row(n_states, rng);
        let mut trans = Vec::with_capacity(n_states * n_states);
        for _ in 0..n_states {
            trans.extend(row(n_states, rng));
        }
        let mut table = Vec::with_capacity(n_states * n_symbols);
        for _ in 0..n_states {
            table.extend(row(n_symbols, rng));
        }
        HmmModel {
            initial,
            transition: Array2::from_shape_vec((n_states, n_states), trans).expect("shape"),
            emission: EmissionModel::Discrete {
                table: Array2::from_shape_vec((n_states, n_symbols), table).expect("shape"),
            },
        }
    }

    /// Random diagonal-covariance mixture model with means in `[-2, 2]` and
    /// variances in `[0.25, 2.25]`.
    pub fn random_mixture<R: rand::Rng + ?Sized>(
        n_states: usize,
        n_components: usize,
        dim: usize,
        rng: &mut R,
    ) -> HmmModel {
        let row = |len: usize, rng: &mut R| -> Vec<f64> {
            let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let s: f64 = v.iter().sum();
            for e in &mut v {
                *e /= s;
            }
            v
        };
        let initial = row(n_states, rng);
        let mut trans = Vec::with_capacity(n_states * n_states);
        for _ in 0..n_states {
            trans.extend(row(n_states, rng));
        }
        let states = (0..n_states)
            .map(|_| {
                let weights = row(n_components, rng);
                weights
                    .into_iter()
                    .map(|weight| MixtureComponent {
                        weight,
                        mean: (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
                        variance: (0..dim).map(|_| 0.25 + 2.0 * rng.random::<f64>()).collect(),
                    })
                    .collect()
            })
            .collect();
        HmmModel {
            initial,
            transition: Array2::from_shape_vec((n_states, n_states), trans).expect("shape"),
            emission: EmissionModel::GaussianMixture { states },
        }
    }
}

/// Density of a diagonal-covariance Gaussian at `x`.
pub(crate) fn diag_normal_density(mean: &[f64], variance: &[f64], x: &[f64]) -> f64 {
    let mut log_density = 0.0;
    for ((&m, &v), &xi) in mean.iter().zip(variance).zip(x) {
        let d = xi - m;
        log_density -= 0.5 * (d * d / v + (std::f64::consts::TAU * v).ln());
    }
    log_density.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn one_state() -> HmmModel {
        HmmModel {
            initial: vec![1.0],
            transition: arr2(&[[1.0]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[0.5, 0.5]]),
            },
        }
    }

    #[test]
    fn identity_model_validates() {
        assert!(one_state().validate().is_ok());
    }

    #[test]
    fn short_transition_row_is_reported() {
        let model = HmmModel {
            initial: vec![0.5, 0.5],
            transition: arr2(&[[0.7, 0.2], [0.4, 0.6]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[0.5, 0.5], [0.5, 0.5]]),
            },
        };
        let report = model.validate();
        assert!(!report.is_ok());
        assert!(
            report.violations.iter().any(|v| v.contains("transition row 0")),
            "violations: {:?}",
            report.violations
        );
    }

    #[test]
    fn bad_mixture_weights_are_reported() {
        let comp = |w: f64| MixtureComponent {
            weight: w,
            mean: vec![0.0],
            variance: vec![1.0],
        };
        let model = HmmModel {
            initial: vec![1.0],
            transition: arr2(&[[1.0]]),
            emission: EmissionModel::GaussianMixture {
                states: vec![vec![comp(0.6), comp(0.6)]],
            },
        };
        let report = model.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("state 0 mixture weights")));
    }

    #[test]
    fn variance_below_floor_is_reported() {
        let model = HmmModel {
            initial: vec![1.0],
            transition: arr2(&[[1.0]]),
            emission: EmissionModel::GaussianMixture {
                states: vec![vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![0.0],
                    variance: vec![1e-9],
                }]],
            },
        };
        assert!(model
            .validate()
            .violations
            .iter()
            .any(|v| v.contains("below the floor")));
    }

    #[test]
    fn negative_probability_is_reported() {
        let model = HmmModel {
            initial: vec![1.2, -0.2],
            transition: arr2(&[[0.5, 0.5], [0.5, 0.5]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            },
        };
        let report = model.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("initial distribution") && v.contains("-0.2")));
    }

    #[test]
    fn emission_dimension_mismatch_is_reported() {
        let model = HmmModel {
            initial: vec![0.5, 0.5],
            transition: arr2(&[[0.5, 0.5], [0.5, 0.5]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[0.5, 0.5]]),
            },
        };
        assert!(!model.validate().is_ok());
    }

    #[test]
    fn gaussian_density_matches_closed_form() {
        // standard normal at 0
        let p = diag_normal_density(&[0.0], &[1.0], &[0.0]);
        assert!((p - 1.0 / (std::f64::consts::TAU).sqrt()).abs() < 1e-15);
        // product over independent dimensions
        let p2 = diag_normal_density(&[0.0, 1.0], &[1.0, 4.0], &[0.5, 0.0]);
        let want = (1.0 / std::f64::consts::TAU.sqrt()) * (-0.125f64).exp()
            * (1.0 / (std::f64::consts::TAU * 4.0).sqrt())
            * (-0.125f64).exp();
        assert!((p2 - want).abs() < 1e-15);
    }
}
