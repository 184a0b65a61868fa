//! Genetic programming over expression systems and Boolean networks.
//!
//! The same evolutionary loop drives both genomes. Fitness is supplied by
//! the caller (higher is better, `None` marks a failed evaluation) and an
//! optional judge adds a qualitative bonus to tournament winners.

mod alg;
mod boolean;
mod fitness;

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::FitConfig;
use crate::expr::{Func, Structure};

pub use fitness::{equivalent_skeleton, BnFitness, CdeFitness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GpError {
    #[error("seed has dimension {found}, expected {expected}")]
    SeedDimension { expected: usize, found: usize },
    #[error("crossover between genomes of dimension {0} and {1}")]
    IncompatibleParents(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Internal operators available to random algebraic trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Operator {
    fn func(self) -> Option<Func> {
        match self {
            Operator::Sin => Some(Func::Sin),
            Operator::Cos => Some(Func::Cos),
            Operator::Exp => Some(Func::Exp),
            Operator::Log => Some(Func::Log),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub depth_cap: usize,
    /// Depth range of ramped half-and-half initial trees.
    pub init_depth: (usize, usize),
    pub parsimony: f64,
    pub seed: u64,
    /// Weight of the judge bonus; 0 disables judging entirely.
    pub judge_weight: f64,
    pub elitism: usize,
    /// Number of distinct best individuals returned.
    pub top_k: usize,
    /// Stop once the best fitness reaches this value and the best combined
    /// score has not moved for `patience` generations.
    pub target_fitness: Option<f64>,
    pub patience: usize,
    pub operators: Vec<Operator>,
    /// Rows of the derivative target used for fitness; longer targets are
    /// subsampled uniformly.
    pub fitness_rows: usize,
    /// Coefficient fitting used during evolution; cheaper than a final refit.
    pub fit: FitConfig,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 200,
            generations: 50,
            tournament_size: 3,
            crossover_prob: 0.7,
            mutation_prob: 0.3,
            depth_cap: 8,
            init_depth: (2, 4),
            parsimony: 0.005,
            seed: 0,
            judge_weight: 0.0,
            elitism: 1,
            top_k: 5,
            target_fitness: None,
            patience: 5,
            operators: vec![Operator::Add, Operator::Sub, Operator::Mul, Operator::Div],
            fitness_rows: 100,
            fit: FitConfig {
                max_iterations: 60,
                starts: 4,
                gain_tolerance: 1e-9,
                ..FitConfig::default()
            },
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let bad = |m: &str| Err(GpError::Config(m.into()));
        if self.population_size == 0 || self.tournament_size == 0 || self.top_k == 0 {
            return bad("population, tournament and top-k sizes must be positive");
        }
        if self.depth_cap < 2 || self.init_depth.0 < 1 || self.init_depth.0 > self.init_depth.1 {
            return bad("depth settings are inconsistent");
        }
        if self.init_depth.1 > self.depth_cap {
            return bad("initial depth exceeds the depth cap");
        }
        for p in [self.crossover_prob, self.mutation_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.parsimony < 0.0 || self.judge_weight < 0.0 {
            return bad("weights must be non-negative");
        }
        if self.operators.is_empty() {
            return bad("at least one operator is required");
        }
        Ok(())
    }
}

/// A structure the evolutionary loop can manipulate.
pub trait Genome: Clone + Send + Sync + Sized {
    fn dim(&self) -> usize;
    fn key(&self) -> String;
    fn complexity(&self) -> usize;
    fn depth(&self) -> usize;
    /// A random genome of depth at most `depth`, fully grown when `full`.
    fn random(dim: usize, depth: usize, full: bool, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self;
    /// Applies one mutation; returns a clone when the depth cap would break.
    fn mutate(&self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> Self;
    /// Exchanges subtrees of one randomly chosen equation or rule.
    fn crossover(&self, other: &Self, cfg: &GpConfig, rng: &mut ChaCha8Rng) -> (Self, Self);
    fn to_structure(&self) -> Structure;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<G> {
    pub genome: G,
    /// `None` when the fitness function failed.
    pub fitness: Option<f64>,
    /// Judge bonus in `[0, 1]` when judged.
    pub judge: Option<f64>,
    /// Generation in which the individual was created.
    pub age: usize,
    pub combined: f64,
}

impl<G: Genome> Individual<G> {
    fn new(genome: G, age: usize) -> Self {
        Individual {
            genome,
            fitness: None,
            judge: None,
            age,
            combined: f64::NEG_INFINITY,
        }
    }

    fn score(&mut self, cfg: &GpConfig) {
        self.combined = match self.fitness {
            None => f64::NEG_INFINITY,
            Some(f) => {
                f - cfg.parsimony * self.genome.complexity() as f64
                    + cfg.judge_weight * self.judge.unwrap_or(0.0)
            }
        };
    }
}

/// A seed structure with an optional externally supplied score.
#[derive(Debug, Clone)]
pub struct Seed<G> {
    pub genome: G,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_combined: f64,
    pub best_fitness: Option<f64>,
    pub mean_fitness: Option<f64>,
    pub failed: usize,
    pub distinct: usize,
    /// Cumulative number of fitness evaluations (cache misses).
    pub evaluations: usize,
    pub judge_calls: usize,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome<G> {
    /// Distinct individuals ranked by combined score.
    pub top: Vec<Individual<G>>,
    /// The individual with the highest raw fitness seen.
    pub best_fitness: Option<Individual<G>>,
    pub history: Vec<GenerationStats>,
}

/// Builds the initial population: seeds first (best provided score first,
/// deduplicated), then ramped half-and-half random genomes with distinct keys.
pub fn init_population<G: Genome>(
    cfg: &GpConfig,
    dim: usize,
    seeds: &[Seed<G>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Individual<G>>, GpError> {
    cfg.validate()?;
    for s in seeds {
        if s.genome.dim() != dim {
            return Err(GpError::SeedDimension {
                expected: dim,
                found: s.genome.dim(),
            });
        }
    }
    let mut order: Vec<&Seed<G>> = seeds.iter().collect();
    order.sort_by(|a, b| {
        let key = |s: &Seed<G>| s.score.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a))
    });
    let mut seen = HashSet::new();
    let mut pop = Vec::with_capacity(cfg.population_size);
    for s in order {
        if pop.len() == cfg.population_size {
            break;
        }
        if seen.insert(s.genome.key()) {
            pop.push(Individual::new(s.genome.clone(), 0));
        }
    }
    let (lo, hi) = cfg.init_depth;
    let mut attempts = 0;
    while pop.len() < cfg.population_size {
        let slot = pop.len();
        let depth = lo + slot % (hi - lo + 1);
        let full = (slot / (hi - lo + 1)) % 2 == 0;
        let g = G::random(dim, depth, full, cfg, rng);
        attempts += 1;
        // give up on distinctness when the space is nearly exhausted
        if seen.insert(g.key()) || attempts > 50 * cfg.population_size {
            pop.push(Individual::new(g, 0));
        }
    }
    Ok(pop)
}

pub fn mutate<G: Genome>(ind: &Individual<G>, cfg: &GpConfig, rng: &mut ChaCha8Rng, age: usize) -> Individual<G> {
    Individual::new(ind.genome.mutate(cfg, rng), age)
}

pub fn crossover<G: Genome>(
    a: &Individual<G>,
    b: &Individual<G>,
    cfg: &GpConfig,
    rng: &mut ChaCha8Rng,
    age: usize,
) -> Result<(Individual<G>, Individual<G>), GpError> {
    if a.genome.dim() != b.genome.dim() {
        return Err(GpError::IncompatibleParents(a.genome.dim(), b.genome.dim()));
    }
    let (x, y) = a.genome.crossover(&b.genome, cfg, rng);
    Ok((Individual::new(x, age), Individual::new(y, age)))
}

/// Judge callback: maps a genome to a bonus in `[0, 1]`, `None` when absent.
pub type JudgeFn<'a, G> = dyn FnMut(&G) -> Option<f64> + 'a;

/// Runs the evolutionary loop.
///
/// Selection uses `fitness - parsimony * complexity + judge_weight * judge`.
/// Only tournament winners are judged, once per canonical key.
pub fn evolve<G, F>(
    cfg: &GpConfig,
    dim: usize,
    seeds: &[Seed<G>],
    fitness: F,
    mut judge: Option<&mut JudgeFn<'_, G>>,
) -> Result<EvolveOutcome<G>, GpError>
where
    G: Genome,
    F: Fn(&G) -> Option<f64> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = init_population(cfg, dim, seeds, &mut rng)?;
    let judging = cfg.judge_weight != 0.0 && judge.is_some();

    let mut cache: HashMap<String, Option<f64>> = HashMap::new();
    let mut judged: HashMap<String, Option<f64>> = HashMap::new();
    let mut evaluations = 0;
    let mut history = Vec::new();
    let mut best_fitness: Option<Individual<G>> = None;
    let mut hall: Vec<Individual<G>> = Vec::new();
    let mut stagnant = 0;
    let mut last_best = f64::NEG_INFINITY;

    for generation in 0..=cfg.generations {
        // evaluate unseen keys in first-appearance order
        let keys: Vec<String> = pop.iter().map(|i| i.genome.key()).collect();
        let mut fresh: Vec<(String, &G)> = Vec::new();
        let mut queued = HashSet::new();
        for (k, ind) in keys.iter().zip(&pop) {
            if !cache.contains_key(k) && queued.insert(k.clone()) {
                fresh.push((k.clone(), &ind.genome));
            }
        }
        let results: Vec<Option<f64>> = fresh
            .par_iter()
            .map(|(_, g)| fitness(g).filter(|f| f.is_finite()))
            .collect();
        evaluations += fresh.len();
        for ((k, _), r) in fresh.into_iter().zip(results) {
            cache.insert(k, r);
        }
        for (ind, k) in pop.iter_mut().zip(&keys) {
            ind.fitness = cache[k];
            ind.judge = judged.get(k).copied().flatten();
            ind.score(cfg);
        }

        for ind in &pop {
            if let Some(f) = ind.fitness {
                if best_fitness.as_ref().map_or(true, |b| f > b.fitness.unwrap()) {
                    best_fitness = Some(ind.clone());
                }
            }
        }
        merge_hall(&mut hall, &pop, cfg.top_k);

        let best = pop
            .iter()
            .map(|i| i.combined)
            .fold(f64::NEG_INFINITY, f64::max);
        let finite: Vec<f64> = pop.iter().filter_map(|i| i.fitness).collect();
        history.push(GenerationStats {
            generation,
            best_combined: best,
            best_fitness: finite.iter().copied().reduce(f64::max),
            mean_fitness: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            failed: pop.len() - finite.len(),
            distinct: keys.iter().collect::<HashSet<_>>().len(),
            evaluations,
            judge_calls: judged.len(),
        });

        if best > last_best {
            last_best = best;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if generation == cfg.generations {
            break;
        }
        if let (Some(target), Some(b)) = (cfg.target_fitness, &best_fitness) {
            if b.fitness.unwrap() >= target && stagnant >= cfg.patience {
                break;
            }
        }

        // elites: best distinct non-failed individuals
        let mut ranked: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_some()).collect();
        ranked.sort_by(|&a, &b| pop[b].combined.total_cmp(&pop[a].combined).then(a.cmp(&b)));
        let mut next: Vec<Individual<G>> = Vec::with_capacity(cfg.population_size);
        let mut elite_keys = HashSet::new();
        for &i in &ranked {
            if next.len() >= cfg.elitism.min(cfg.population_size) {
                break;
            }
            if elite_keys.insert(keys[i].clone()) {
                next.push(pop[i].clone());
            }
        }

        let age = generation + 1;
        let mut winners = Vec::new();
        while next.len() < cfg.population_size {
            let a = tournament(&pop, cfg.tournament_size, &mut rng);
            winners.push(a);
            if rng.gen::<f64>() < cfg.crossover_prob {
                let b = tournament(&pop, cfg.tournament_size, &mut rng);
                winners.push(b);
                let (mut c1, mut c2) = crossover(&pop[a], &pop[b], cfg, &mut rng, age)?;
                if rng.gen::<f64>() < cfg.mutation_prob {
                    c1 = mutate(&c1, cfg, &mut rng, age);
                }
                if rng.gen::<f64>() < cfg.mutation_prob {
                    c2 = mutate(&c2, cfg, &mut rng, age);
                }
                next.push(c1);
                if next.len() < cfg.population_size {
                    next.push(c2);
                }
            } else if rng.gen::<f64>() < cfg.mutation_prob {
                next.push(mutate(&pop[a], cfg, &mut rng, age));
            } else {
                let mut copy = pop[a].clone();
                copy.age = pop[a].age;
                next.push(copy);
            }
        }

        if judging {
            let judge = judge.as_mut().unwrap();
            for w in winners {
                let k = &keys[w];
                if pop[w].fitness.is_some() && !judged.contains_key(k) {
                    let bonus = judge(&pop[w].genome).map(|b| b.clamp(0.0, 1.0));
                    judged.insert(k.clone(), bonus);
                }
            }
            for ind in &mut next {
                if let Some(j) = judged.get(&ind.genome.key()) {
                    ind.judge = *j;
                    ind.score(cfg);
                }
            }
        }
        pop = next;
    }

    for ind in &mut hall {
        ind.judge = judged.get(&ind.genome.key()).copied().flatten();
        ind.score(cfg);
    }
    hall.sort_by(|a, b| b.combined.total_cmp(&a.combined));
    Ok(EvolveOutcome {
        top: hall,
        best_fitness,
        history,
    })
}

fn tournament<G>(pop: &[Individual<G>], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let c = rng.gen_range(0..pop.len());
        if pop[c].combined > pop[best].combined {
            best = c;
        }
    }
    best
}

/// Keeps the `k` best distinct non-failed individuals seen so far.
fn merge_hall<G: Genome>(hall: &mut Vec<Individual<G>>, pop: &[Individual<G>], k: usize) {
    let mut keys: HashSet<String> = hall.iter().map(|i| i.genome.key()).collect();
    for ind in pop {
        if ind.fitness.is_some() && keys.insert(ind.genome.key()) {
            hall.push(ind.clone());
        }
    }
    hall.sort_by(|a, b| b.combined.total_cmp(&a.combined).then(a.age.cmp(&b.age)));
    hall.truncate(k);
}

/// Uniformly picks one of `items`.
fn pick<'a, T>(items: &'a [T], rng: &mut ChaCha8Rng) -> &'a T {
    items.choose(rng).expect("non-empty choice")
}
