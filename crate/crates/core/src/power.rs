//! Normalized power, end-to-end delay of a threshold design, and the two
//! threshold searches (exhaustive and particle swarm).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{analyze_channel, ChannelSpec};
use crate::departure::{DepartureModel, DepartureOptions};
use crate::error::{positive, Error, Result};
use crate::policy::{ArrivalSpec, ThresholdPolicy};
use crate::queue::{DelayVariant, EpochMode, QueueAnalysis};
use crate::service::ServiceSpec;

/// Per-region clock frequencies; power in region `k` is `γ̄ f_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    /// Hz, non-decreasing.
    pub frequencies: Vec<f64>,
    /// `γ̄` (W/Hz). Cancels out of the normalized power.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl PowerSpec {
    pub fn new(frequencies: Vec<f64>, scale: f64) -> Result<Self> {
        positive("power scale", scale)?;
        if frequencies.is_empty() {
            return Err(Error::RegionMismatch { expected: 1, found: 0 });
        }
        for &f in &frequencies {
            positive("frequency", f)?;
        }
        if frequencies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidPolicy("frequencies must be non-decreasing".into()));
        }
        Ok(Self { frequencies, scale })
    }

    /// 100, 150 and 200 MHz.
    pub fn reference() -> Self {
        Self { frequencies: vec![1e8, 1.5e8, 2e8], scale: 1.0 }
    }

    /// Power drawn in each region (W).
    pub fn region_power(&self) -> Vec<f64> {
        self.frequencies.iter().map(|f| self.scale * f).collect()
    }
}

/// `NP = Σ_k mass_k P_k / P_1` over the disjoint regions of `policy`.
pub fn normalized_power(dist: &[f64], policy: &ThresholdPolicy, power: &PowerSpec) -> Result<f64> {
    policy.check_regions(power.frequencies.len())?;
    let masses = policy.region_masses(dist);
    let watts = power.region_power();
    Ok(masses.iter().zip(&watts).map(|(m, p)| m * p).sum::<f64>() / watts[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// `W_queue + W_channel <= W_bound`.
    #[default]
    System,
    /// `W_queue <= W_bound`.
    QueueOnly,
}

/// Distribution the power average is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerSource {
    #[default]
    ArbitraryEpoch,
    PostDeparture,
}

/// Fixed scenario a threshold design is evaluated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignContext {
    pub arrivals: ArrivalSpec,
    pub capacity: usize,
    pub services: ServiceSpec,
    pub channel: ChannelSpec,
    pub power: PowerSpec,
    /// Delay bound (s).
    pub w_bound: f64,
    pub constraint: ConstraintMode,
    pub delay_variant: DelayVariant,
    pub power_source: PowerSource,
    pub departure: DepartureOptions,
}

impl DesignContext {
    pub fn decision_dims(&self) -> usize {
        self.services.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub thresholds: Vec<usize>,
    pub np: Option<f64>,
    pub w_queue: Option<f64>,
    pub w_channel: Option<f64>,
    pub w_system: Option<f64>,
    pub feasible: bool,
    /// Why the design is infeasible, or why a delay term is missing.
    pub reason: Option<String>,
}

impl DesignEvaluation {
    fn rejected(thresholds: &[usize], reason: String) -> Self {
        Self {
            thresholds: thresholds.to_vec(),
            np: None,
            w_queue: None,
            w_channel: None,
            w_system: None,
            feasible: false,
            reason: Some(reason),
        }
    }

    /// Search objective: NP for feasible designs, `+∞` otherwise.
    pub fn objective(&self) -> f64 {
        match (self.feasible, self.np) {
            (true, Some(np)) => np,
            _ => f64::INFINITY,
        }
    }

    /// Ordering used by both searches: objective, then thresholds lexicographically.
    fn better_than(&self, other: &Self) -> bool {
        match self.objective().total_cmp(&other.objective()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => self.thresholds < other.thresholds,
            std::cmp::Ordering::Greater => false,
        }
    }
}

/// Runs the queue, departure and channel models for one threshold vector.
pub fn evaluate_design(thresholds: &[usize], ctx: &DesignContext) -> DesignEvaluation {
    if thresholds.len() != ctx.decision_dims() {
        return DesignEvaluation::rejected(
            thresholds,
            format!("expected {} thresholds, got {}", ctx.decision_dims(), thresholds.len()),
        );
    }
    let policy = match ThresholdPolicy::new(ctx.capacity, thresholds.to_vec()) {
        Ok(p) => p,
        Err(e) => return DesignEvaluation::rejected(thresholds, e.to_string()),
    };
    let analysis =
        match QueueAnalysis::run(&policy, &ctx.services, &ctx.arrivals, ctx.delay_variant, EpochMode::Renormalized) {
            Ok(a) => a,
            Err(e) => return DesignEvaluation::rejected(thresholds, e.to_string()),
        };
    let dist = match ctx.power_source {
        PowerSource::ArbitraryEpoch => &analysis.arbitrary_epoch.probs,
        PowerSource::PostDeparture => analysis.post_departure.probs(),
    };
    let np = match normalized_power(dist, &policy, &ctx.power) {
        Ok(np) => np,
        Err(e) => return DesignEvaluation::rejected(thresholds, e.to_string()),
    };
    let w_queue = analysis.summary.mean_system_time;
    let channel = DepartureModel::build(&analysis, &ctx.departure)
        .and_then(|model| analyze_channel(&model, &ctx.channel));
    let (w_channel, mut reason) = match channel {
        Ok(c) => (Some(c.wait), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let w_system = w_channel.map(|w| w_queue + w);
    let constrained = match ctx.constraint {
        ConstraintMode::System => w_system,
        ConstraintMode::QueueOnly => Some(w_queue),
    };
    let feasible = matches!(constrained, Some(w) if w <= ctx.w_bound);
    if !feasible && reason.is_none() {
        reason = Some(format!("delay {:.6e} s exceeds bound {:.6e} s", constrained.unwrap_or(f64::NAN), ctx.w_bound));
    }
    DesignEvaluation {
        thresholds: thresholds.to_vec(),
        np: Some(np),
        w_queue: Some(w_queue),
        w_channel,
        w_system,
        feasible,
        reason,
    }
}

/// One row of a search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `None` until a feasible design is seen.
    pub best_np: Option<f64>,
    pub thresholds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Best feasible design; `None` when nothing is feasible.
    pub best: Option<DesignEvaluation>,
    /// Model evaluations actually performed.
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

/// All non-decreasing threshold vectors in `[1, K-1]`; for two thresholds this
/// is `K(K-1)/2` candidates, ties included (they evaluate as invalid).
pub fn candidate_grid(capacity: usize, dims: usize) -> Vec<Vec<usize>> {
    fn fill(lo: usize, hi: usize, dims: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dims {
            out.push(prefix.clone());
            return;
        }
        for v in lo..=hi {
            prefix.push(v);
            fill(v, hi, dims, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if capacity >= 2 {
        fill(1, capacity - 1, dims, &mut Vec::new(), &mut out);
    }
    out
}

fn evaluate_all(candidates: &[Vec<usize>], ctx: &DesignContext) -> Vec<DesignEvaluation> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        candidates.par_iter().map(|t| evaluate_design(t, ctx)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        candidates.iter().map(|t| evaluate_design(t, ctx)).collect()
    }
}

/// Evaluates every point of [`candidate_grid`], in grid order.
pub fn evaluate_grid(ctx: &DesignContext) -> Vec<DesignEvaluation> {
    evaluate_all(&candidate_grid(ctx.capacity, ctx.decision_dims()), ctx)
}

/// Feasible minimum-NP design; ties go to the lexicographically smaller thresholds.
pub fn select_best(evaluations: &[DesignEvaluation]) -> Option<DesignEvaluation> {
    evaluations
        .iter()
        .filter(|e| e.feasible)
        .fold(None::<&DesignEvaluation>, |best, e| match best {
            Some(b) if !e.better_than(b) => Some(b),
            _ => Some(e),
        })
        .cloned()
}

/// Exhaustive search over [`candidate_grid`].
pub fn brute_force_search(ctx: &DesignContext) -> SearchOutcome {
    let evaluations = evaluate_grid(ctx);
    SearchOutcome { best: select_best(&evaluations), evaluations: evaluations.len(), trace: Vec::new() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-component velocity bound; defaults to `K / 4`.
    pub velocity_clamp: Option<f64>,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { swarm: 20, iterations: 100, inertia: 0.7, cognitive: 1.5, social: 1.5, velocity_clamp: None, seed: 1 }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm < 2 {
            return Err(Error::InvalidParameter { name: "swarm size", value: self.swarm as f64 });
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter { name: "iterations", value: 0.0 });
        }
        if !(0.0..1.0).contains(&self.inertia) {
            return Err(Error::InvalidParameter { name: "inertia", value: self.inertia });
        }
        positive("cognitive coefficient", self.cognitive)?;
        positive("social coefficient", self.social)?;
        if let Some(v) = self.velocity_clamp {
            positive("velocity clamp", v)?;
        }
        Ok(())
    }
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best: DesignEvaluation,
    best_position: Vec<f64>,
}

fn rounded(position: &[f64]) -> Option<Vec<usize>> {
    position.iter().map(|&x| if x >= 0.0 { Some(x.round() as usize) } else { None }).collect()
}

/// Memoized objective: each distinct valid threshold vector is evaluated once.
struct Evaluator<'a> {
    ctx: &'a DesignContext,
    cache: HashMap<Vec<usize>, DesignEvaluation>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    fn in_range(&self, t: &[usize]) -> bool {
        t.iter().all(|&v| v >= 1 && v < self.ctx.capacity) && t.windows(2).all(|w| w[0] < w[1])
    }

    fn prefetch(&mut self, positions: &[Option<Vec<usize>>]) {
        let mut pending: Vec<Vec<usize>> = Vec::new();
        for t in positions.iter().flatten() {
            if self.in_range(t) && !self.cache.contains_key(t) && !pending.contains(t) {
                pending.push(t.clone());
            }
        }
        self.evaluations += pending.len();
        let results = evaluate_all(&pending, self.ctx);
        for (t, e) in pending.into_iter().zip(results) {
            self.cache.insert(t, e);
        }
    }

    fn score(&self, position: &[f64], t: &Option<Vec<usize>>) -> DesignEvaluation {
        match t {
            Some(t) if self.in_range(t) => self.cache[t].clone(),
            Some(t) => DesignEvaluation::rejected(t, "thresholds out of order or out of range".into()),
            None => DesignEvaluation::rejected(&[], format!("position {position:?} out of range")),
        }
    }
}

fn random_valid_position(rng: &mut ChaCha8Rng, capacity: usize, dims: usize) -> Vec<f64> {
    let hi = (capacity - 1) as f64;
    loop {
        let mut x: Vec<f64> = (0..dims).map(|_| rng.random_range(1.0..=hi)).collect();
        x.sort_by(f64::total_cmp);
        let r = rounded(&x).expect("positive");
        if r.windows(2).all(|w| w[0] < w[1]) {
            return x;
        }
    }
}

/// Particle swarm over continuous positions rounded to integer thresholds.
///
/// Invalid positions score `+∞`; a component that leaves `[1, K-1]` has its
/// velocity reversed. Delay-infeasible designs also score `+∞`.
pub fn pso_search(ctx: &DesignContext, config: &PsoConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let dims = ctx.decision_dims();
    if ctx.capacity < dims + 1 || dims == 0 {
        return Err(Error::InvalidPolicy(format!("capacity {} leaves no room for {dims} thresholds", ctx.capacity)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = (0..config.swarm).map(|_| random_valid_position(&mut rng, ctx.capacity, dims)).collect();
    run_swarm(ctx, config, positions, rng)
}

/// Same as [`pso_search`] with caller-supplied initial positions.
pub fn pso_search_from(ctx: &DesignContext, config: &PsoConfig, positions: Vec<Vec<f64>>) -> Result<SearchOutcome> {
    config.validate()?;
    if positions.is_empty() || positions.iter().any(|p| p.len() != ctx.decision_dims()) {
        return Err(Error::InvalidPolicy("initial positions do not match the decision dimension".into()));
    }
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_swarm(ctx, config, positions, rng)
}

fn run_swarm(
    ctx: &DesignContext,
    config: &PsoConfig,
    positions: Vec<Vec<f64>>,
    mut rng: ChaCha8Rng,
) -> Result<SearchOutcome> {
    let dims = ctx.decision_dims();
    let lo = 1.0;
    let hi = (ctx.capacity - 1) as f64;
    let vmax = config.velocity_clamp.unwrap_or(ctx.capacity as f64 / 4.0);
    let mut evaluator = Evaluator { ctx, cache: HashMap::new(), evaluations: 0 };

    let mut particles: Vec<Particle> = positions
        .into_iter()
        .map(|position| {
            let velocity = (0..dims).map(|_| rng.random_range(-vmax..=vmax)).collect();
            Particle {
                best_position: position.clone(),
                best: DesignEvaluation::rejected(&[], "not yet evaluated".into()),
                position,
                velocity,
            }
        })
        .collect();
    let mut global: Option<(DesignEvaluation, Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let keys: Vec<Option<Vec<usize>>> = particles.iter().map(|p| rounded(&p.position)).collect();
        evaluator.prefetch(&keys);
        for (particle, key) in particles.iter_mut().zip(&keys) {
            let eval = evaluator.score(&particle.position, key);
            if iteration == 0 || eval.better_than(&particle.best) {
                particle.best = eval.clone();
                particle.best_position = particle.position.clone();
            }
            let improves = match &global {
                None => true,
                Some((g, _)) => eval.better_than(g),
            };
            if improves {
                global = Some((eval, particle.position.clone()));
            }
        }
        let (g, g_pos) = global.as_ref().expect("swarm is non-empty");
        let best_np = if g.feasible { g.np } else { None };
        trace.push(TraceRow { iteration, best_np, thresholds: g.thresholds.clone() });

        if iteration + 1 == config.iterations {
            break;
        }
        let g_pos = g_pos.clone();
        for particle in &mut particles {
            for d in 0..dims {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let x = particle.position[d];
                let v = config.inertia * particle.velocity[d]
                    + config.cognitive * r1 * (particle.best_position[d] - x)
                    + config.social * r2 * (g_pos[d] - x);
                let mut v = v.clamp(-vmax, vmax);
                let next = x + v;
                if next < lo || next > hi {
                    v = -v;
                }
                particle.velocity[d] = v;
                particle.position[d] = next;
            }
        }
    }

    let best = global.map(|(g, _)| g).filter(|g| g.feasible);
    Ok(SearchOutcome { best, evaluations: evaluator.evaluations, trace })
}
