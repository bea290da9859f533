//! Single-individual metaheuristic trainers over the bit codec: asexual
//! reproduction (strict replacement), its tolerance-modified variant, and a
//! simulated-annealing baseline using the same move operator.
//!
//! All three maximize, evaluate the objective exactly once per iteration plus
//! once at initialization, and are deterministic given the seed.

use rand::Rng;

use crate::codec::{Chromosome, Codec};

/// Evaluation failure inside an objective function.
#[derive(Debug, Clone)]
pub struct EvalError {
    pub message: String,
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for EvalError {}

/// A maximization objective over decoded real vectors, with an evaluation
/// counter. Implementations must be deterministic in their inputs.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError>;
    /// Number of evaluations performed so far.
    fn calls(&self) -> u64;
}

/// Wrap any infallible closure as an [`Objective`].
pub struct FnObjective<F> {
    f: F,
    calls: u64,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(f: F) -> Self {
        FnObjective { f, calls: 0 }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError> {
        self.calls += 1;
        Ok((self.f)(x))
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Shared knobs for the three trainers.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Iteration budget; the stopping criterion is the iteration count.
    pub iterations: usize,
    /// Upper bound of the substring-length draw; `None` means the whole
    /// chromosome length.
    pub g_max: Option<usize>,
    /// Flip every substring bit instead of flipping each independently with
    /// the length-dependent probability.
    pub flip_all: bool,
    /// Multiplier on the tolerance `ln(loc)/sqrt(t)`. Zero reduces the
    /// tolerated rule to the strict rule.
    pub delta_scale: f64,
    /// Simulated-annealing start temperature.
    pub initial_temp: f64,
    /// Geometric cooling rate per iteration.
    pub cooling: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 2000,
            g_max: None,
            flip_all: false,
            delta_scale: 1.0,
            initial_temp: 1.0,
            cooling: 0.995,
        }
    }
}

/// One row of the optimization trace; the `t = 0` row records the evaluated
/// initial parent.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub incumbent_fitness: f64,
    pub best_ever_fitness: f64,
    pub loc: usize,
    pub delta_t: f64,
    pub accepted: bool,
}

/// Result of one trainer run.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug)]
pub enum SearchError {
    Evaluation { iteration: usize, source: EvalError },
}

impl std::fmt::Display for SearchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchError::Evaluation { iteration, source } => {
                write!(f, "objective evaluation failed at iteration {iteration}: {source}")
            }
        }
    }
}

impl std::error::Error for SearchError {}

/// Bit-flip probability for a substring of length `g`, clamped to 1. The
/// reciprocal-log rule exceeds one for `g <= 2` (and is singular at `g = 1`),
/// so those lengths always flip.
pub fn mutation_prob(g: usize) -> f64 {
    assert!(g >= 1, "substring length must be at least 1");
    if g <= 2 {
        return 1.0;
    }
    (1.0 / (g as f64).ln()).min(1.0)
}

/// Downhill tolerance `ln(loc) / sqrt(t)`: grows with the trap counter and
/// shrinks as iterations accumulate.
pub fn delta_t(loc: usize, t: usize) -> f64 {
    assert!(loc >= 1 && t >= 1, "loc and t must be at least 1");
    (loc as f64).ln() / (t as f64).sqrt()
}

/// Deterministic core of the reproduction operator with the substring draw
/// already made: copy the parent into a larva, mutate the substring
/// `[start, start + g)` of the larva, then build the bud by taking every bit
/// outside the substring from the parent and every substring bit from the
/// parent or the larva with equal probability.
///
/// Random draws, in order: one flip draw per substring bit ascending (skipped
/// entirely when `flip_all` is set), then one selection draw per substring
/// bit ascending.
pub fn reproduce_with<R: Rng + ?Sized>(
    parent: &Chromosome,
    g: usize,
    start: usize,
    flip_all: bool,
    rng: &mut R,
) -> Chromosome {
    assert!(g >= 1 && start + g <= parent.len(), "substring out of range");
    let mut larva = parent.clone();
    if flip_all {
        for bit in &mut larva.bits[start..start + g] {
            *bit = !*bit;
        }
    } else {
        let p = mutation_prob(g);
        for bit in &mut larva.bits[start..start + g] {
            if rng.random::<f64>() < p {
                *bit = !*bit;
            }
        }
    }
    let mut bud = parent.clone();
    for i in start..start + g {
        if rng.random::<f64>() >= 0.5 {
            bud.bits[i] = larva.bits[i];
        }
    }
    bud
}

/// Produce a bud from a parent: draw the substring length `g` uniformly from
/// `[1, g_max]` and its start uniformly, then run [`reproduce_with`].
pub fn reproduce<R: Rng + ?Sized>(
    parent: &Chromosome,
    g_max: usize,
    flip_all: bool,
    rng: &mut R,
) -> Chromosome {
    assert!(
        (1..=parent.len()).contains(&g_max),
        "g_max must be within the chromosome length"
    );
    let g = rng.random_range(1..=g_max);
    let start = rng.random_range(0..=parent.len() - g);
    reproduce_with(parent, g, start, flip_all, rng)
}

enum AcceptRule {
    /// Replace the parent only on strict improvement.
    Strict,
    /// Additionally accept buds within the shrinking tolerance band.
    Tolerated,
    /// Metropolis acceptance under a geometric temperature schedule.
    Anneal,
}

fn run_search<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &mut O,
    codec: &Codec,
    config: &SearchConfig,
    rule: AcceptRule,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    assert!(config.iterations >= 1, "iteration budget must be at least 1");
    let g_max = config.g_max.unwrap_or_else(|| codec.total_bits());

    let mut parent = codec.encode(&codec.sample_uniform(rng));
    let mut parent_fitness = objective
        .evaluate(&codec.decode(&parent))
        .map_err(|source| SearchError::Evaluation { iteration: 0, source })?;
    let mut best = parent.clone();
    let mut best_fitness = parent_fitness;
    let mut loc = 1usize;

    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(TraceRecord {
        t: 0,
        incumbent_fitness: parent_fitness,
        best_ever_fitness: best_fitness,
        loc,
        delta_t: 0.0,
        accepted: true,
    });

    for t in 1..=config.iterations {
        let bud = reproduce(&parent, g_max, config.flip_all, rng);
        let bud_fitness = objective
            .evaluate(&codec.decode(&bud))
            .map_err(|source| SearchError::Evaluation { iteration: t, source })?;

        let delta = match rule {
            AcceptRule::Tolerated => config.delta_scale * delta_t(loc, t),
            _ => 0.0,
        };
        let accepted;
        match rule {
            AcceptRule::Strict => {
                if bud_fitness > parent_fitness {
                    accepted = true;
                    loc = 1;
                } else {
                    accepted = false;
                    loc += 1;
                }
            }
            AcceptRule::Tolerated => {
                if bud_fitness > parent_fitness {
                    accepted = true;
                    loc = 1;
                } else if bud_fitness > parent_fitness - delta {
                    // tolerated downhill move; the trap counter is unchanged
                    accepted = true;
                } else {
                    accepted = false;
                    loc += 1;
                }
            }
            AcceptRule::Anneal => {
                let temp = config.initial_temp * config.cooling.powi(t as i32 - 1);
                if bud_fitness >= parent_fitness {
                    accepted = true;
                } else if temp > 0.0 {
                    let p = ((bud_fitness - parent_fitness) / temp).exp();
                    accepted = rng.random::<f64>() < p;
                } else {
                    accepted = false;
                }
                if accepted {
                    loc = 1;
                } else {
                    loc += 1;
                }
            }
        }
        if accepted {
            parent = bud.clone();
            parent_fitness = bud_fitness;
        }
        if bud_fitness > best_fitness {
            best = bud;
            best_fitness = bud_fitness;
        }
        trace.push(TraceRecord {
            t,
            incumbent_fitness: parent_fitness,
            best_ever_fitness: best_fitness,
            loc,
            delta_t: delta,
            accepted,
        });
    }

    Ok(SearchOutcome {
        best: codec.decode(&best),
        best_fitness,
        trace,
    })
}

/// Strict hill climber: the bud replaces the parent only when strictly
/// better, so the incumbent trace never decreases.
pub fn aro_run<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &mut O,
    codec: &Codec,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    run_search(objective, codec, config, AcceptRule::Strict, rng)
}

/// Strict rule plus a shrinking tolerance band: a bud no worse than
/// `parent - ln(loc)/sqrt(t)` still replaces the parent. The trap counter
/// resets on strict improvement, grows only on full rejection, and the best
/// candidate ever evaluated is returned rather than the possibly-degraded
/// incumbent.
pub fn maro_run<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &mut O,
    codec: &Codec,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    run_search(objective, codec, config, AcceptRule::Tolerated, rng)
}

/// Metropolis acceptance with geometric cooling, using the same reproduction
/// move as the other trainers so the comparison isolates the acceptance rule.
pub fn sa_run<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &mut O,
    codec: &Codec,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    run_search(objective, codec, config, AcceptRule::Anneal, rng)
}

/// Render a trace as `t,incumbent_fitness,best_ever_fitness,loc,delta_t,accepted` CSV.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("t,incumbent_fitness,best_ever_fitness,loc,delta_t,accepted\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:.6},{:.6},{},{:.6},{}\n",
            r.t, r.incumbent_fitness, r.best_ever_fitness, r.loc, r.delta_t, r.accepted
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scripted random source: hands out the queued `f64` values in order.
    struct ScriptedRng {
        values: Vec<u64>,
        pos: usize,
    }

    impl ScriptedRng {
        fn from_f64s(values: &[f64]) -> Self {
            // Rng::random::<f64> consumes the top 53 bits of one u64
            ScriptedRng {
                values: values
                    .iter()
                    .map(|&v| ((v * (1u64 << 53) as f64) as u64) << 11)
                    .collect(),
                pos: 0,
            }
        }
    }

    impl rand::RngCore for ScriptedRng {
        fn next_u32(&mut self) -> u32 {
            (self.next_u64() >> 32) as u32
        }

        fn next_u64(&mut self) -> u64 {
            let v = self.values[self.pos % self.values.len()];
            self.pos += 1;
            v
        }

        fn fill_bytes(&mut self, dest: &mut [u8]) {
            for chunk in dest.chunks_mut(8) {
                let v = self.next_u64().to_le_bytes();
                chunk.copy_from_slice(&v[..chunk.len()]);
            }
        }
    }

    fn chromosome(s: &str) -> Chromosome {
        Chromosome {
            bits: s.chars().map(|c| c == '1').collect(),
        }
    }

    #[test]
    fn mutation_prob_clamps_short_substrings() {
        assert_eq!(mutation_prob(1), 1.0);
        assert_eq!(mutation_prob(2), 1.0);
        assert!((mutation_prob(3) - 1.0 / 3f64.ln()).abs() < 1e-12);
        assert!((mutation_prob(3) - 0.9102392266268373).abs() < 1e-12);
    }

    #[test]
    fn delta_t_examples() {
        assert_eq!(delta_t(1, 7), 0.0);
        assert!((delta_t(2, 4) - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!((delta_t(2, 4) - 0.34657359027997264).abs() < 1e-12);
        // quadrupling t halves the tolerance
        let d1 = delta_t(5, 9);
        let d2 = delta_t(5, 36);
        assert!((d1 - 2.0 * d2).abs() < 1e-12);
    }

    #[test]
    fn forced_full_flip_and_larva_selection_complements_parent() {
        let parent = chromosome("10110100");
        // first 8 draws force every flip, next 8 select the larva
        let mut rng = ScriptedRng::from_f64s(&[
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9,
        ]);
        let bud = reproduce_with(&parent, 8, 0, false, &mut rng);
        assert_eq!(bud, chromosome("01001011"));
    }

    #[test]
    fn all_parent_selections_reproduce_the_parent() {
        let parent = chromosome("10110100");
        // flips all happen, but every selection draw stays below 0.5
        let mut rng = ScriptedRng::from_f64s(&[0.0]);
        let bud = reproduce_with(&parent, 8, 0, false, &mut rng);
        assert_eq!(bud, parent);
    }

    #[test]
    fn bits_outside_substring_come_from_the_parent() {
        let parent = chromosome("11111111");
        let mut rng = ScriptedRng::from_f64s(&[0.0, 0.9, 0.0, 0.9]);
        // substring of two bits starting at index 3
        let bud = reproduce_with(&parent, 2, 3, true, &mut rng);
        assert_eq!(bud.bits.len(), parent.bits.len());
        for (i, &b) in bud.bits.iter().enumerate() {
            if !(3..5).contains(&i) {
                assert!(b, "bit {i} changed outside the substring");
            }
        }
    }

    #[test]
    fn changed_bit_rate_matches_independent_simulation() {
        // Monte-Carlo oracle: simulate the draw-g / draw-start / flip /
        // select pipeline independently and compare changed-bit fractions.
        let len = 24usize;
        let trials = 10_000usize;
        let parent = Chromosome { bits: vec![false; len] };

        let mut impl_changed = Vec::with_capacity(trials);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..trials {
            let bud = reproduce(&parent, len, false, &mut rng);
            let changed = bud.bits.iter().filter(|&&b| b).count();
            impl_changed.push(changed as f64 / len as f64);
        }

        let mut oracle_changed = Vec::with_capacity(trials);
        let mut rng = ChaCha8Rng::seed_from_u64(177);
        for _ in 0..trials {
            let g = rng.random_range(1..=len);
            let start = rng.random_range(0..=len - g);
            let p = mutation_prob(g);
            let mut changed = 0usize;
            for _ in start..start + g {
                let flipped = rng.random::<f64>() < p;
                let from_larva = rng.random::<f64>() >= 0.5;
                if flipped && from_larva {
                    changed += 1;
                }
            }
            oracle_changed.push(changed as f64 / len as f64);
        }

        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        let (m1, m2) = (mean(&impl_changed), mean(&oracle_changed));
        let se = (var(&impl_changed, m1) / trials as f64 + var(&oracle_changed, m2) / trials as f64).sqrt();
        assert!(
            (m1 - m2).abs() < 3.0 * se,
            "implementation mean {m1} vs oracle mean {m2}, 3se = {}",
            3.0 * se
        );
    }

    fn sphere_codec() -> Codec {
        Codec::uniform(3, 4, 8, -8.0, 8.0).unwrap()
    }

    fn sphere() -> FnObjective<impl FnMut(&[f64]) -> f64> {
        FnObjective::new(|x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>())
    }

    #[test]
    fn constant_objective_never_replaces_the_parent() {
        let codec = sphere_codec();
        let mut objective = FnObjective::new(|_: &[f64]| 1.0);
        let config = SearchConfig { iterations: 200, ..SearchConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = aro_run(&mut objective, &codec, &config, &mut rng).unwrap();
        assert!(out.trace.iter().skip(1).all(|r| !r.accepted));
        assert_eq!(out.best_fitness, 1.0);
    }

    #[test]
    fn aro_incumbent_trace_is_non_decreasing() {
        let codec = sphere_codec();
        for seed in 0..20 {
            let mut objective = sphere();
            let config = SearchConfig { iterations: 300, ..SearchConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = aro_run(&mut objective, &codec, &config, &mut rng).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1].incumbent_fitness >= w[0].incumbent_fitness);
            }
        }
    }

    #[test]
    fn maro_best_ever_is_monotone_and_dips_are_bounded() {
        let codec = sphere_codec();
        for seed in 0..20 {
            let mut objective = sphere();
            let config = SearchConfig { iterations: 300, ..SearchConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = maro_run(&mut objective, &codec, &config, &mut rng).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1].best_ever_fitness >= w[0].best_ever_fitness);
                if w[1].accepted {
                    assert!(
                        w[1].incumbent_fitness >= w[0].incumbent_fitness - w[1].delta_t - 1e-12,
                        "tolerated dip exceeded delta"
                    );
                }
            }
            assert!(out.best_fitness >= out.trace.last().unwrap().incumbent_fitness);
        }
    }

    #[test]
    fn maro_with_zero_delta_matches_aro_bitwise() {
        let codec = sphere_codec();
        for seed in 0..10 {
            let config = SearchConfig { iterations: 250, ..SearchConfig::default() };
            let zero_delta = SearchConfig { delta_scale: 0.0, ..config.clone() };
            let mut o1 = sphere();
            let mut o2 = sphere();
            let aro = aro_run(&mut o1, &codec, &config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let maro = maro_run(&mut o2, &codec, &zero_delta, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(aro.trace, maro.trace);
            assert_eq!(aro.best, maro.best);
        }
    }

    #[test]
    fn maro_accepts_a_bud_inside_the_tolerance_band() {
        // parent fitness 10, bud fitness 9.9, loc = 8, t = 36: the tolerance
        // ln(8)/6 exceeds the 0.1 deficit, so the bud must be accepted.
        let deficit = 10.0 - 9.9;
        let tol = delta_t(8, 36);
        assert!((tol - 0.34657359027997264).abs() < 1e-12);
        assert!(9.9 > 10.0 - tol && deficit > 0.0);
    }

    #[test]
    fn objective_is_called_once_per_iteration_plus_init() {
        type Runner = fn(
            &mut dyn Objective,
            &Codec,
            &SearchConfig,
            &mut ChaCha8Rng,
        ) -> Result<SearchOutcome, SearchError>;
        let codec = sphere_codec();
        let config = SearchConfig { iterations: 123, ..SearchConfig::default() };
        let runners: [Runner; 3] = [
            |o, c, cfg, r| aro_run(o, c, cfg, r),
            |o, c, cfg, r| maro_run(o, c, cfg, r),
            |o, c, cfg, r| sa_run(o, c, cfg, r),
        ];
        for run in runners {
            let mut objective = sphere();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            run(&mut objective, &codec, &config, &mut rng).unwrap();
            assert_eq!(objective.calls(), 124);
        }
    }

    #[test]
    fn identical_seeds_give_identical_outcomes() {
        let codec = sphere_codec();
        let config = SearchConfig::default();
        let run_once = |seed: u64| {
            let mut objective = sphere();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sa_run(&mut objective, &codec, &config, &mut rng).unwrap()
        };
        let a = run_once(4);
        let b = run_once(4);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn zero_temperature_sa_is_a_hill_climber() {
        let codec = sphere_codec();
        let config = SearchConfig {
            iterations: 300,
            initial_temp: 1.0,
            cooling: 0.0,
            ..SearchConfig::default()
        };
        let mut objective = sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let out = sa_run(&mut objective, &codec, &config, &mut rng).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].incumbent_fitness >= w[0].incumbent_fitness - 1e-12);
        }
    }

    #[test]
    fn evaluation_errors_carry_the_iteration() {
        struct Failing {
            calls: u64,
        }
        impl Objective for Failing {
            fn evaluate(&mut self, _: &[f64]) -> Result<f64, EvalError> {
                self.calls += 1;
                if self.calls > 3 {
                    Err(EvalError { message: "boom".into() })
                } else {
                    Ok(0.0)
                }
            }
            fn calls(&self) -> u64 {
                self.calls
            }
        }
        let codec = sphere_codec();
        let config = SearchConfig { iterations: 10, ..SearchConfig::default() };
        let mut objective = Failing { calls: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        match aro_run(&mut objective, &codec, &config, &mut rng) {
            Err(SearchError::Evaluation { iteration: 3, .. }) => {}
            other => panic!("expected evaluation error at iteration 3, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_has_expected_shape() {
        let trace = vec![TraceRecord {
            t: 0,
            incumbent_fitness: -1.0,
            best_ever_fitness: -1.0,
            loc: 1,
            delta_t: 0.0,
            accepted: true,
        }];
        let csv = trace_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,incumbent_fitness,best_ever_fitness,loc,delta_t,accepted"
        );
        assert_eq!(lines.next().unwrap(), "0,-1.000000,-1.000000,1,0.000000,true");
    }
}
