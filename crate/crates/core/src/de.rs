//! Differential evolution, DE/rand/1/bin.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSettings {
    /// Members; defaults to 15 × dimension.
    pub population: Option<usize>,
    /// Mutation factor F.
    pub mutation: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub max_generations: usize,
    /// Hard cap on objective evaluations, including the initial population.
    pub max_evaluations: Option<usize>,
    pub seed: u64,
    /// Stop once max − min of the population's objective values falls to
    /// `atol + rtol·|best|`.
    pub atol: f64,
    pub rtol: f64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            population: None,
            mutation: 0.8,
            crossover: 0.9,
            max_generations: 1000,
            max_evaluations: None,
            seed: 0,
            atol: 0.0,
            rtol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best objective after initialization and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
    /// Final population and its objective values.
    pub population: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Mirrors an out-of-range coordinate back inside, then clamps.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let y = if x < lo {
        lo + (lo - x)
    } else if x > hi {
        hi - (x - hi)
    } else {
        x
    };
    y.clamp(lo, hi)
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimizes `objective` within `bounds`. Non-finite objective values are
/// treated as +∞. Deterministic for a fixed seed: trial vectors are drawn
/// sequentially and only their evaluation runs in parallel.
pub fn differential_evolution<F>(objective: F, bounds: &[(f64, f64)], settings: &DeSettings) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    differential_evolution_from(objective, bounds, settings, &[])
}

/// As [`differential_evolution`], with the first members of the initial
/// population taken from `init`. NaN coordinates, and members beyond
/// `init`, are drawn uniformly; supplied values are clamped into bounds.
pub fn differential_evolution_from<F>(
    objective: F,
    bounds: &[(f64, f64)],
    settings: &DeSettings,
    init: &[Vec<f64>],
) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("no parameters to optimize".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("bound {i} = [{lo}, {hi}] is not a finite ordered interval")));
        }
    }
    let np = settings.population.unwrap_or(15 * dim);
    if np < 4 {
        return Err(Error::InvalidArgument(format!("population {np} is below the minimum of 4")));
    }
    if !(settings.mutation > 0.0 && settings.mutation <= 2.0) || !(0.0..=1.0).contains(&settings.crossover) {
        return Err(Error::InvalidArgument("mutation must lie in (0, 2] and crossover in [0, 1]".into()));
    }
    let budget = settings.max_evaluations.unwrap_or(usize::MAX);
    if budget < np {
        return Err(Error::InvalidArgument(format!("evaluation budget {budget} is smaller than the population {np}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    if init.len() > np || init.iter().any(|m| m.len() != dim) {
        return Err(Error::InvalidArgument(format!("initial members must number at most {np} with {dim} coordinates")));
    }
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            bounds
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| {
                    let drawn = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                    match init.get(i).map(|m| m[j]) {
                        Some(v) if !v.is_nan() => v.clamp(lo, hi),
                        _ => drawn,
                    }
                })
                .collect()
        })
        .collect();
    let mut values: Vec<f64> = pop.par_iter().map(|x| sanitize(objective(x))).collect();
    let mut evaluations = np;

    let best_index = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    let mut history = vec![values[best_index(&values)]];
    let mut generations = 0;

    while generations < settings.max_generations && evaluations + np <= budget {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let k = rng.random_range(0..np);
                    if k != i {
                        break k;
                    }
                };
                let a = pick();
                let b = loop {
                    let k = pick();
                    if k != a {
                        break k;
                    }
                };
                let c = loop {
                    let k = pick();
                    if k != a && k != b {
                        break k;
                    }
                };
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        let (lo, hi) = bounds[j];
                        if j == forced || rng.random::<f64>() < settings.crossover {
                            reflect(pop[a][j] + settings.mutation * (pop[b][j] - pop[c][j]), lo, hi)
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_values: Vec<f64> = trials.par_iter().map(|x| sanitize(objective(x))).collect();
        evaluations += np;
        for (i, (x, v)) in trials.into_iter().zip(trial_values).enumerate() {
            if v <= values[i] {
                pop[i] = x;
                values[i] = v;
            }
        }
        generations += 1;
        let b = best_index(&values);
        history.push(values[b]);

        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if max.is_finite() && max - min <= settings.atol + settings.rtol * min.abs() {
            break;
        }
    }
    let b = best_index(&values);
    Ok(DeResult { best: pop[b].clone(), best_value: values[b], history, evaluations, generations, population: pop, values })
}
