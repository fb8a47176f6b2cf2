//! Channel access delay of a queue sharing a cyclically polled channel.
//!
//! Each of `Q` identical queues is attended at rate `μ_c = μ / Q`; the queue
//! is treated as G/M/1 fed by the departure law of the segmented queue. The
//! root `σ = L(μ_c (1 - σ))` in `(0, 1)` gives the mean wait
//! `σ / ((1 - σ) μ_c)`.

use serde::{Deserialize, Serialize};

use crate::departure::DepartureModel;
use crate::error::{positive, Error, Result};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 10_000;

/// Inter-arrival law seen by the channel queue.
pub trait InterarrivalLaw {
    /// `E[e^{-sX}]`.
    fn laplace(&self, s: f64) -> f64;
    fn mean(&self) -> f64;
}

impl InterarrivalLaw for DepartureModel {
    fn laplace(&self, s: f64) -> f64 {
        DepartureModel::laplace(self, s)
    }
    fn mean(&self) -> f64 {
        // Nominal throughput; the fitted model's own mean can differ slightly.
        1.0 / self.lambda
    }
}

/// Poisson inter-arrivals.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialArrivals(pub f64);

impl InterarrivalLaw for ExponentialArrivals {
    fn laplace(&self, s: f64) -> f64 {
        self.0 / (self.0 + s)
    }
    fn mean(&self) -> f64 {
        1.0 / self.0
    }
}

/// Constant inter-arrival spacing.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicArrivals(pub f64);

impl InterarrivalLaw for DeterministicArrivals {
    fn laplace(&self, s: f64) -> f64 {
        (-s * self.0).exp()
    }
    fn mean(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Channel packet service rate (1/s).
    pub rate: f64,
    /// Number of queues sharing the channel.
    pub queues: usize,
}

impl ChannelSpec {
    pub fn new(rate: f64, queues: usize) -> Result<Self> {
        positive("channel rate", rate)?;
        if queues == 0 {
            return Err(Error::InvalidParameter { name: "queue count", value: 0.0 });
        }
        Ok(Self { rate, queues })
    }

    /// `μ_c = μ / Q`.
    pub fn per_queue_rate(&self) -> f64 {
        self.rate / self.queues as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMethod {
    FixedPoint,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub sigma: f64,
    /// Mean wait before channel service (s).
    pub wait: f64,
    pub iterations: usize,
    pub method: RootMethod,
}

/// Finds the G/M/1 root by fixed-point iteration from 0.5, falling back to
/// bisection when the iteration does not settle.
pub fn solve_sigma<L: InterarrivalLaw + ?Sized>(law: &L, mu_c: f64) -> Result<(f64, usize, RootMethod)> {
    positive("per-queue channel rate", mu_c)?;
    let arrival_rate = 1.0 / law.mean();
    if !(arrival_rate < mu_c) {
        return Err(Error::Unstable { arrival_rate, service_rate: mu_c });
    }
    let map = |sigma: f64| law.laplace(mu_c * (1.0 - sigma));

    let mut sigma = 0.5;
    for iteration in 1..=MAX_ITERATIONS {
        let next = map(sigma);
        if !(next > 0.0 && next < 1.0) {
            break;
        }
        if (next - sigma).abs() < TOLERANCE {
            return Ok((next, iteration, RootMethod::FixedPoint));
        }
        sigma = next;
    }
    bisect(&map).map(|(s, it)| (s, it, RootMethod::Bisection))
}

fn bisect<F: Fn(f64) -> f64>(map: &F) -> Result<(f64, usize)> {
    let g = |s: f64| map(s) - s;
    let mut lo = 0.0;
    // g(1) = 0 is the trivial root; find a point just below 1 where g < 0.
    let mut hi = None;
    let mut gap = 1e-2;
    while gap > 1e-15 {
        if g(1.0 - gap) < 0.0 {
            hi = Some(1.0 - gap);
            break;
        }
        gap *= 0.1;
    }
    let mut hi = hi.ok_or(Error::NonConvergence(MAX_ITERATIONS))?;
    let mut iterations = 0;
    while hi - lo > TOLERANCE && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((0.5 * (lo + hi), iterations))
}

/// `W = σ / ((1 - σ) μ_c)`.
pub fn channel_wait(sigma: f64, mu_c: f64) -> Result<f64> {
    positive("per-queue channel rate", mu_c)?;
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::InvalidSigma(sigma));
    }
    Ok(sigma / ((1.0 - sigma) * mu_c))
}

pub fn analyze_channel<L: InterarrivalLaw + ?Sized>(law: &L, spec: &ChannelSpec) -> Result<ChannelResult> {
    let mu_c = spec.per_queue_rate();
    let (sigma, iterations, method) = solve_sigma(law, mu_c)?;
    Ok(ChannelResult { sigma, wait: channel_wait(sigma, mu_c)?, iterations, method })
}
