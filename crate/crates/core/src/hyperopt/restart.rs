//! Restart strategies for local search: convergence probability under random
//! restarts and a random-versus-adaptive benchmark.
//!
//! The shared local searcher is a deterministic one-dimensional hill climber
//! that probes x +- step, keeps strict improvements, and halves the step
//! otherwise.  The adaptive policy watches relative improvement per round and
//! abandons a basin early once it stalls; the random policy always lets the
//! climber run to full convergence before restarting from a fresh uniform
//! start.

use std::cell::Cell;

use rand::Rng;

use crate::error::MedleyError;
use crate::Result;
use crate::rng::{derive_seed_indexed, rng_from_seed};
use crate::stats::{self, WelchTest};

/// The hill climber terminates once its step halves below this.
pub const MIN_CLIMB_STEP: f64 = 1e-6;
/// Initial probe step, as a fraction of a unit-length domain.
const INITIAL_CLIMB_STEP: f64 = 0.25;

/// Restart strategy for iterated local search and for the optimization loop.
#[derive(Debug, Clone, PartialEq)]
pub enum RestartPolicy {
    /// Memoryless: restart only when the local search has fully converged.
    Random,
    /// Abandon the current search once the incumbent improves by less than
    /// `threshold` (relative) for `window` consecutive rounds.
    Adaptive { window: usize, threshold: f64 },
}

impl RestartPolicy {
    /// Adaptive policy with the default stall window and threshold.
    pub fn adaptive_default() -> Self {
        RestartPolicy::Adaptive {
            window: 5,
            threshold: 1e-3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RestartPolicy::Random => "random",
            RestartPolicy::Adaptive { .. } => "adaptive",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let RestartPolicy::Adaptive { window, threshold } = self {
            if *window < 1 {
                return Err(MedleyError::InvalidInput(
                    "adaptive restart window must be at least 1".into(),
                ));
            }
            if !(*threshold > 0.0) {
                return Err(MedleyError::InvalidInput(
                    "adaptive restart threshold must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn stall(&self) -> Option<(usize, f64)> {
        match self {
            RestartPolicy::Random => None,
            RestartPolicy::Adaptive { window, threshold } => Some((*window, *threshold)),
        }
    }
}

/// Terminal state of one hill-climb run.
#[derive(Debug, Clone, Copy)]
pub struct ClimbOutcome {
    pub x: f64,
    pub f: f64,
    /// Objective evaluations spent, including the start point.
    pub evaluations: usize,
    /// True when an adaptive stall rule ended the climb before the step
    /// shrank below [`MIN_CLIMB_STEP`].
    pub stalled: bool,
}

/// Deterministic coordinate hill climber on a one-dimensional interval.
///
/// Starting from `start`, each round probes `x - step` and `x + step`
/// (clamped to `bounds`), moves to the best strict improvement, and halves
/// the step when neither probe improves.  With `stall = Some((window,
/// threshold))`, the climb instead ends early once the relative improvement
/// stays below `threshold` for `window` consecutive rounds.
pub fn hill_climb(
    objective: &mut dyn FnMut(f64) -> f64,
    start: f64,
    bounds: (f64, f64),
    stall: Option<(usize, f64)>,
) -> ClimbOutcome {
    let (lo, hi) = bounds;
    let scale = hi - lo;
    let mut x = start.clamp(lo, hi);
    let mut f = objective(x);
    let mut evaluations = 1usize;
    let mut step = INITIAL_CLIMB_STEP * scale;
    let mut stall_run = 0usize;
    let mut stalled = false;

    while step >= MIN_CLIMB_STEP * scale {
        let mut best_candidate: Option<(f64, f64)> = None;
        for dir in [-1.0, 1.0] {
            let candidate = (x + dir * step).clamp(lo, hi);
            if candidate == x {
                continue;
            }
            let fc = objective(candidate);
            evaluations += 1;
            if fc < f && best_candidate.map_or(true, |(_, bf)| fc < bf) {
                best_candidate = Some((candidate, fc));
            }
        }
        let improvement = match best_candidate {
            Some((cx, cf)) => {
                let gain = f - cf;
                x = cx;
                f = cf;
                gain
            }
            None => {
                step *= 0.5;
                0.0
            }
        };
        if let Some((window, threshold)) = stall {
            let relative = improvement / f.abs().max(1e-12);
            if relative < threshold {
                stall_run += 1;
                if stall_run >= window {
                    stalled = true;
                    break;
                }
            } else {
                stall_run = 0;
            }
        }
    }

    ClimbOutcome {
        x,
        f,
        evaluations,
        stalled,
    }
}

/// Fraction of evenly spaced starts from which the hill climber reaches a
/// value within `tolerance` of `global_min`.  This is the deterministic
/// oracle for the per-restart success probability q of a uniform start.
pub fn basin_success_probability(
    objective: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    global_min: f64,
    tolerance: f64,
    grid_points: usize,
) -> f64 {
    assert!(grid_points > 0, "need at least one grid start");
    let (lo, hi) = bounds;
    let mut hits = 0usize;
    for i in 0..grid_points {
        let start = lo + (i as f64 + 0.5) / grid_points as f64 * (hi - lo);
        let outcome = hill_climb(&mut |x| objective(x), start, bounds, None);
        if outcome.f <= global_min + tolerance {
            hits += 1;
        }
    }
    hits as f64 / grid_points as f64
}

/// Monte-Carlo failure probability of random restarts: the fraction of
/// `trials` in which the best value after `restarts` independent uniform-start
/// climbs stays above `global_min + tolerance`.
///
/// Restart streams depend only on (trial, restart index), so for a fixed seed
/// the estimate is exactly nonincreasing in the restart count.
pub fn mc_convergence_probability(
    objective: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    global_min: f64,
    tolerance: f64,
    restarts: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 30 {
        return Err(MedleyError::InvalidInput(format!(
            "convergence estimate needs at least 30 trials, got {trials}"
        )));
    }
    if restarts < 1 {
        return Err(MedleyError::InvalidInput(
            "convergence estimate needs at least 1 restart".into(),
        ));
    }
    let (lo, hi) = bounds;
    let mut failures = 0usize;
    for trial in 0..trials {
        let mut best = f64::INFINITY;
        for attempt in 0..restarts {
            let stream = derive_seed_indexed(
                seed,
                "hyperopt.restart.mc",
                (trial as u64) << 20 | attempt as u64,
            );
            let start = rng_from_seed(stream).gen_range(lo..hi);
            let outcome = hill_climb(&mut |x| objective(x), start, bounds, None);
            best = best.min(outcome.f);
        }
        if best > global_min + tolerance {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

/// Iterated local search until the objective is first evaluated within
/// `tolerance` of `global_min`, restarting per `policy`.  Returns the number
/// of objective evaluations at first arrival, capped (and flagged) at `cap`.
pub fn first_arrival_iterations(
    objective: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    global_min: f64,
    tolerance: f64,
    policy: &RestartPolicy,
    seed: u64,
    cap: usize,
) -> (usize, bool) {
    let (lo, hi) = bounds;
    let evaluations = Cell::new(0usize);
    let arrived = Cell::new(None::<usize>);
    let mut rng = rng_from_seed(seed);
    let mut wrapped = |x: f64| {
        let f = objective(x);
        evaluations.set(evaluations.get() + 1);
        if arrived.get().is_none() && f <= global_min + tolerance {
            arrived.set(Some(evaluations.get()));
        }
        f
    };
    loop {
        let start = rng.gen_range(lo..hi);
        hill_climb(&mut wrapped, start, bounds, policy.stall());
        if let Some(n) = arrived.get() {
            return (n.min(cap), false);
        }
        if evaluations.get() >= cap {
            return (cap, true);
        }
    }
}

/// Paired comparison of random and adaptive restarts on one objective.
#[derive(Debug, Clone)]
pub struct RestartBenchmark {
    /// Evaluations to first arrival per trial under the random policy.
    pub random_iterations: Vec<f64>,
    /// Evaluations to first arrival per trial under the adaptive policy.
    pub adaptive_iterations: Vec<f64>,
    pub capped_random: usize,
    pub capped_adaptive: usize,
    pub mean_random: f64,
    pub mean_adaptive: f64,
    /// One-sided Welch test of "adaptive mean < random mean".
    pub welch: WelchTest,
}

/// Runs `trials` paired comparisons of the adaptive policy against the
/// memoryless random baseline.  Both policies share each trial's start
/// stream, so on objectives where stalls never trigger the two runs are
/// identical and the test is exactly neutral.
pub fn restart_benchmark(
    objective: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    global_min: f64,
    tolerance: f64,
    adaptive: &RestartPolicy,
    trials: usize,
    seed: u64,
    cap: usize,
) -> Result<RestartBenchmark> {
    adaptive.validate()?;
    if trials < 2 {
        return Err(MedleyError::InvalidInput(
            "benchmark needs at least 2 trials".into(),
        ));
    }
    if cap == 0 {
        return Err(MedleyError::InvalidInput(
            "benchmark cap must be positive".into(),
        ));
    }
    let mut random_iterations = Vec::with_capacity(trials);
    let mut adaptive_iterations = Vec::with_capacity(trials);
    let mut capped_random = 0usize;
    let mut capped_adaptive = 0usize;
    for trial in 0..trials {
        let stream = derive_seed_indexed(seed, "hyperopt.restart.bench", trial as u64);
        let (n_random, hit_cap) = first_arrival_iterations(
            objective,
            bounds,
            global_min,
            tolerance,
            &RestartPolicy::Random,
            stream,
            cap,
        );
        if hit_cap {
            capped_random += 1;
        }
        let (n_adaptive, hit_cap) = first_arrival_iterations(
            objective,
            bounds,
            global_min,
            tolerance,
            adaptive,
            stream,
            cap,
        );
        if hit_cap {
            capped_adaptive += 1;
        }
        random_iterations.push(n_random as f64);
        adaptive_iterations.push(n_adaptive as f64);
    }
    let welch = stats::welch_test(&adaptive_iterations, &random_iterations);
    Ok(RestartBenchmark {
        mean_random: stats::mean(&random_iterations),
        mean_adaptive: stats::mean(&adaptive_iterations),
        random_iterations,
        adaptive_iterations,
        capped_random,
        capped_adaptive,
        welch,
    })
}

/// Two-basin benchmark objective on [0, 1]: a shallow local basin with value
/// 0.2 at x = 0.35 and the global basin with value 0 at x = 0.85.
pub fn two_basin_objective(x: f64) -> f64 {
    if x <= 0.7 {
        0.2 + 2.0 * (x - 0.35).powi(2)
    } else {
        19.78 * (x - 0.85).powi(2)
    }
}

/// Plateau benchmark objective on [0, 1]: a wide, nearly flat basin at value
/// 0.1 and a narrow global basin reaching -1 at x = 0.9.  The plateau wastes
/// full-convergence descents, which is what an adaptive stall rule exploits.
pub fn plateau_objective(x: f64) -> f64 {
    if x <= 0.8 {
        0.1 + 1e-6 * (x - 0.4).powi(2)
    } else {
        100.0 * (x - 0.9).powi(2) - 1.0
    }
}
