//! Embedded Markov chain of the threshold-controlled finite queue.
//!
//! The chain is observed just after departures and lives on `0..=K`. A
//! departure leaving `i` customers starts the next service with `max(i, 1)` in
//! system, so rows 0 and 1 coincide. Arrivals that would push the
//! post-departure count past `K` are lumped into column `K`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ArrivalSpec, ThresholdPolicy};
use crate::service::{tail_from, ServiceSpec};

/// Row-stochastic matrix over post-departure states `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.sum()).collect()
    }

    /// `p · P` for a row vector `p`.
    pub fn left_multiply(&self, p: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(p);
        (self.0.transpose() * v).iter().copied().collect()
    }
}

/// Lays out per-region count probabilities in the skip-free-to-the-left
/// pattern shared by the embedded and residual matrices.
fn lumped_matrix(policy: &ThresholdPolicy, per_region: &[Vec<f64>]) -> DMatrix<f64> {
    let k = policy.capacity();
    let n = k + 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let start = i.max(1);
        let probs = &per_region[policy.region_of(start)];
        for j in (start - 1)..k {
            m[(i, j)] = probs[j + 1 - start];
        }
        m[(i, k)] = tail_from(probs, k + 1 - start);
    }
    m
}

fn region_probabilities<F>(policy: &ThresholdPolicy, services: &ServiceSpec, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&crate::service::ServiceDist, usize) -> Result<Vec<f64>>,
{
    policy.check_regions(services.len())?;
    let count = policy.capacity() + 1;
    services.regions().iter().map(|d| f(d, count)).collect()
}

/// Embedded transition matrix: entry `(i, j) = a^{r}_{j-max(i,1)+1}` with the
/// tail `ā` in column `K`.
pub fn build_embedded_matrix(
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
    arrivals: &ArrivalSpec,
) -> Result<TransitionMatrix> {
    let probs = region_probabilities(policy, services, |d, n| d.arrival_probabilities(arrivals.rate(), n))?;
    Ok(TransitionMatrix(lumped_matrix(policy, &probs)))
}

/// Same layout as [`build_embedded_matrix`] with residual counts `c` in place of `a`.
pub fn build_residual_matrix(
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
    arrivals: &ArrivalSpec,
) -> Result<TransitionMatrix> {
    let probs = region_probabilities(policy, services, |d, n| d.residual_probabilities(arrivals.rate(), n))?;
    Ok(TransitionMatrix(lumped_matrix(policy, &probs)))
}

/// Stationary distribution of the system length just after departures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PostDepartureDist(Vec<f64>);

impl PostDepartureDist {
    /// Wraps an arbitrary probability vector (used for hypothetical inputs).
    pub fn from_probabilities(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter { name: "probability vector", value: f64::NAN });
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn idle(&self) -> f64 {
        self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Solves `p P = p`, `Σ p = 1` by Grassmann–Taksar–Heyman state reduction,
/// a subtraction-free Gaussian elimination that keeps small probabilities
/// accurate under heavy load.
pub fn solve_stationary(matrix: &TransitionMatrix) -> Result<PostDepartureDist> {
    let n = matrix.dim();
    let mut a = matrix.as_matrix().clone();
    // States below `floor` are transient: the reduced chain cannot leave `floor`.
    let mut floor = 0;
    let (mut max_pivot, mut min_pivot) = (0.0f64, f64::INFINITY);
    for k in (1..n).rev() {
        let out: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if out <= 0.0 {
            floor = k;
            break;
        }
        max_pivot = max_pivot.max(out);
        min_pivot = min_pivot.min(out);
        for i in 0..k {
            a[(i, k)] /= out;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for j in 0..k {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let condition = if min_pivot.is_finite() { max_pivot / min_pivot } else { 1.0 };

    let mut p = vec![0.0; n];
    p[floor] = 1.0;
    for j in floor + 1..n {
        p[j] = (floor..j).map(|i| p[i] * a[(i, j)]).sum();
        if p[j] > 1e200 {
            p[..=j].iter_mut().for_each(|v| *v *= 1e-200);
        }
    }
    let total: f64 = p.iter().sum();
    if !total.is_finite() {
        return Err(Error::IllConditioned { condition, reason: "state reduction overflowed".into() });
    }
    p.iter_mut().for_each(|v| *v /= total);

    let residual = matrix
        .left_multiply(&p)
        .iter()
        .zip(&p)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual >= 1e-10 {
        return Err(Error::IllConditioned { condition, reason: format!("fixed-point residual {residual:e}") });
    }
    Ok(PostDepartureDist(p))
}

fn check_len(p: &PostDepartureDist, policy: &ThresholdPolicy) -> Result<()> {
    if p.len() == policy.capacity() + 1 {
        Ok(())
    } else {
        Err(Error::InvalidPolicy(format!(
            "distribution has {} states, policy capacity implies {}",
            p.len(),
            policy.capacity() + 1
        )))
    }
}

/// Mean service time weighted by the region in force after each departure
/// (`p_0` is served by region 0).
fn busy_mass(p: &PostDepartureDist, services: &ServiceSpec, policy: &ThresholdPolicy) -> Result<f64> {
    check_len(p, policy)?;
    policy.check_regions(services.len())?;
    let means = services.means();
    let masses = policy.region_masses(p.probs());
    Ok(masses.iter().zip(&means).map(|(m, s)| m * s).sum())
}

/// Mean time between successive departures:
/// `p_0 (1/λ + E[S_1]) + Σ_{i≥1} p_i E[S_{r(i)}]`.
pub fn mean_departure_interval(
    p: &PostDepartureDist,
    services: &ServiceSpec,
    arrivals: &ArrivalSpec,
    policy: &ThresholdPolicy,
) -> Result<f64> {
    Ok(p.idle() / arrivals.rate() + busy_mass(p, services, policy)?)
}

/// Long-run fraction of time the server is busy.
pub fn carried_load(
    p: &PostDepartureDist,
    services: &ServiceSpec,
    policy: &ThresholdPolicy,
    t_mean: f64,
) -> Result<f64> {
    crate::error::positive("mean departure interval", t_mean)?;
    Ok((busy_mass(p, services, policy)? / t_mean).min(1.0))
}

/// How the first region counts services in the mean system time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayVariant {
    /// `(i + 1)` services in every region; equals `-W*'(0)`.
    #[default]
    TransformConsistent,
    /// First region counts `i` services (own service excluded there only).
    FirstRegionExclusive,
}

impl std::str::FromStr for DelayVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transform-consistent" => Ok(Self::TransformConsistent),
            "first-region-exclusive" => Ok(Self::FirstRegionExclusive),
            other => Err(Error::InvalidPolicy(format!("unknown delay variant `{other}`"))),
        }
    }
}

/// Number of services of each region an arrival seeing `i` in system waits
/// through. Segments are `[L_{k-1}, L_k - 1]` with `L_0 = 0`; the last one
/// extends to `K`.
fn staircase(policy: &ThresholdPolicy, i: usize, variant: DelayVariant) -> Vec<usize> {
    let th = policy.thresholds();
    let k = th.partition_point(|&l| l <= i);
    let mut counts = vec![0usize; policy.regions()];
    let mut prev = 0;
    for (m, count) in counts.iter_mut().enumerate().take(k) {
        *count = th[m] - prev;
        prev = th[m];
    }
    counts[k] = i + 1 - prev;
    if k == 0 && variant == DelayVariant::FirstRegionExclusive {
        counts[0] = i;
    }
    counts
}

/// Mean time in system.
pub fn mean_system_time(
    p: &PostDepartureDist,
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
    variant: DelayVariant,
) -> Result<f64> {
    check_len(p, policy)?;
    policy.check_regions(services.len())?;
    let means = services.means();
    Ok(p
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let stairs = staircase(policy, i, variant);
            pi * stairs.iter().zip(&means).map(|(&c, s)| c as f64 * s).sum::<f64>()
        })
        .sum())
}

/// Product-form transform `W*(s) = Σ_i p_i Π_k [G*_k(s)]^{n_k(i)}`.
pub fn system_time_lst(
    p: &PostDepartureDist,
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
    s: f64,
) -> Result<f64> {
    check_len(p, policy)?;
    policy.check_regions(services.len())?;
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter { name: "transform argument", value: s });
    }
    let g: Vec<f64> = services.regions().iter().map(|d| d.lst(s)).collect();
    Ok(p
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let stairs = staircase(policy, i, DelayVariant::TransformConsistent);
            pi * stairs.iter().zip(&g).map(|(&c, gk)| gk.powi(c as i32)).product::<f64>()
        })
        .sum())
}

/// Normalization of the arbitrary-epoch vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochMode {
    /// `ρ' · (p C)` as computed; sums to `ρ'`.
    Raw,
    /// The deficit `1 - Σπ` is added to `π_0`.
    #[default]
    Renormalized,
}

impl std::str::FromStr for EpochMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "renormalized" => Ok(Self::Renormalized),
            other => Err(Error::InvalidPolicy(format!("unknown epoch mode `{other}`"))),
        }
    }
}

/// Queue-length distribution at an arbitrary time.
///
/// Built by convolving `p` with the residual counts `c`, which indexes the
/// customers waiting behind the one in service. Compare it against the
/// time-average number waiting, not the number in system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitraryEpochDist {
    pub probs: Vec<f64>,
    pub mode: EpochMode,
}

pub fn arbitrary_epoch_distribution(
    p: &PostDepartureDist,
    carried_load: f64,
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
    arrivals: &ArrivalSpec,
    mode: EpochMode,
) -> Result<ArbitraryEpochDist> {
    check_len(p, policy)?;
    if !(carried_load > 0.0 && carried_load <= 1.0) {
        return Err(Error::InvalidParameter { name: "carried load", value: carried_load });
    }
    let c = build_residual_matrix(policy, services, arrivals)?;
    let mut probs: Vec<f64> = c.left_multiply(p.probs()).into_iter().map(|v| (carried_load * v).max(0.0)).collect();
    if mode == EpochMode::Renormalized {
        let deficit = 1.0 - probs.iter().sum::<f64>();
        probs[0] = (probs[0] + deficit).max(0.0);
    }
    Ok(ArbitraryEpochDist { probs, mode })
}

/// Headline delay figures of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    /// Mean time between departures (s).
    pub t_mean: f64,
    pub carried_load: f64,
    /// Mean system time under the selected variant (s).
    pub mean_system_time: f64,
    pub variant: DelayVariant,
    /// The other variant, for comparison (s).
    pub alternate_system_time: Option<f64>,
}

/// Everything the queue-level analysis produces for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueAnalysis {
    pub policy: ThresholdPolicy,
    pub services: ServiceSpec,
    pub arrivals: ArrivalSpec,
    pub post_departure: PostDepartureDist,
    pub arbitrary_epoch: ArbitraryEpochDist,
    pub summary: DelaySummary,
}

impl QueueAnalysis {
    pub fn run(
        policy: &ThresholdPolicy,
        services: &ServiceSpec,
        arrivals: &ArrivalSpec,
        variant: DelayVariant,
        mode: EpochMode,
    ) -> Result<Self> {
        let matrix = build_embedded_matrix(policy, services, arrivals)?;
        let p = solve_stationary(&matrix)?;
        let t_mean = mean_departure_interval(&p, services, arrivals, policy)?;
        let rho = carried_load(&p, services, policy, t_mean)?;
        let pi = arbitrary_epoch_distribution(&p, rho, policy, services, arrivals, mode)?;
        let other = match variant {
            DelayVariant::TransformConsistent => DelayVariant::FirstRegionExclusive,
            DelayVariant::FirstRegionExclusive => DelayVariant::TransformConsistent,
        };
        let summary = DelaySummary {
            t_mean,
            carried_load: rho,
            mean_system_time: mean_system_time(&p, policy, services, variant)?,
            variant,
            alternate_system_time: Some(mean_system_time(&p, policy, services, other)?),
        };
        Ok(Self {
            policy: policy.clone(),
            services: services.clone(),
            arrivals: *arrivals,
            post_departure: p,
            arbitrary_epoch: pi,
            summary,
        })
    }
}
