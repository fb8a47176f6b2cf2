//! Per-region service-time laws and the arrival counts they induce.
//!
//! For a Poisson stream of rate λ and a service time `S` with distribution `B`,
//! `a_n = P{n arrivals during S}` and the residual counterpart
//! `c_n = (1/E[S]) ∫ e^{-λt} (λt)^n / n! (1 - B(t)) dt` counts arrivals during
//! the elapsed (equivalently, residual) part of a service in progress.
//! Exponential and deterministic services use closed forms; other laws go
//! through adaptive quadrature.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::policy::ArrivalSpec;
use crate::quad;

const QUAD_TOL: f64 = 1e-12;

/// Service-time distribution of one region. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDist {
    Exponential { rate: f64 },
    Deterministic { duration: f64 },
    /// Sum of `phases` exponential stages of rate `rate` each.
    Erlang { phases: u32, rate: f64 },
}

impl ServiceDist {
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn deterministic(duration: f64) -> Result<Self> {
        Self::Deterministic { duration }.validated()
    }

    pub fn erlang(phases: u32, rate: f64) -> Result<Self> {
        Self::Erlang { phases, rate }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Exponential { rate } => positive("service rate", rate)?,
            Self::Deterministic { duration } => positive("service duration", duration)?,
            Self::Erlang { phases, rate } => {
                if phases == 0 {
                    return Err(Error::InvalidParameter { name: "erlang phases", value: 0.0 });
                }
                positive("service rate", rate)?
            }
        };
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { duration } => duration,
            Self::Erlang { phases, rate } => phases as f64 / rate,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic { .. })
    }

    /// Same law with its time axis scaled so that the mean becomes `mean`.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        positive("service mean", mean)?;
        match *self {
            Self::Exponential { .. } => Self::exponential(1.0 / mean),
            Self::Deterministic { .. } => Self::deterministic(mean),
            Self::Erlang { phases, .. } => Self::erlang(phases, phases as f64 / mean),
        }
    }

    /// Laplace–Stieltjes transform `E[e^{-sS}]`.
    pub fn lst(&self, s: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => rate / (rate + s),
            Self::Deterministic { duration } => (-s * duration).exp(),
            Self::Erlang { phases, rate } => (rate / (rate + s)).powi(phases as i32),
        }
    }

    /// `P{S > t}`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Deterministic { duration } => {
                if t < duration {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Erlang { phases, rate } => {
                let x = rate * t;
                let mut term = (-x).exp();
                let mut sum = term;
                for i in 1..phases {
                    term *= x / i as f64;
                    sum += term;
                }
                sum
            }
        }
    }

    fn log_density(&self, t: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => rate.ln() - rate * t,
            Self::Erlang { phases, rate } => {
                let k = phases as f64;
                k * rate.ln() + (k - 1.0) * t.ln() - rate * t - ln_factorial(phases as usize - 1)
            }
            Self::Deterministic { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Self::Deterministic { duration } => duration,
            Self::Erlang { phases, rate } => Gamma::new(phases as f64, 1.0 / rate)
                .expect("validated erlang")
                .sample(rng),
        }
    }

    /// `a_n` for `n = 0..count`.
    pub fn arrival_probabilities(&self, lambda: f64, count: usize) -> Result<Vec<f64>> {
        positive("arrival rate", lambda)?;
        match *self {
            Self::Exponential { rate } => {
                let ratio = lambda / (lambda + rate);
                let base = rate / (lambda + rate);
                Ok((0..count).map(|n| base * ratio.powi(n as i32)).collect())
            }
            Self::Deterministic { duration } => Ok(poisson_pmf(lambda * duration, count)),
            Self::Erlang { .. } => {
                let this = *self;
                (0..count)
                    .map(|n| {
                        let lf = ln_factorial(n);
                        quad::integrate_to_infinity(
                            move |t| {
                                if t <= 0.0 {
                                    return 0.0;
                                }
                                let x = lambda * t;
                                (n as f64 * x.ln() - x - lf + this.log_density(t)).exp()
                            },
                            0.0,
                            QUAD_TOL,
                        )
                    })
                    .collect()
            }
        }
    }

    /// Residual-service counts `c_n` for `n = 0..count`.
    pub fn residual_probabilities(&self, lambda: f64, count: usize) -> Result<Vec<f64>> {
        positive("arrival rate", lambda)?;
        match *self {
            // Memoryless: the residual has the service law itself.
            Self::Exponential { .. } => self.arrival_probabilities(lambda, count),
            Self::Deterministic { duration } => {
                let m = lambda * duration;
                Ok((0..count).map(|n| poisson_upper_tail(m, n + 1) / m).collect())
            }
            Self::Erlang { .. } => {
                let this = *self;
                let mean = self.mean();
                (0..count)
                    .map(|n| {
                        let lf = ln_factorial(n);
                        quad::integrate_to_infinity(
                            move |t| {
                                if t <= 0.0 {
                                    return if n == 0 { 1.0 } else { 0.0 };
                                }
                                let x = lambda * t;
                                (n as f64 * x.ln() - x - lf).exp() * this.survival(t)
                            },
                            0.0,
                            QUAD_TOL * mean,
                        )
                        .map(|v| v / mean)
                    })
                    .collect()
            }
        }
    }
}

/// `1 - Σ_{j<n} probs[j]`, clamped at zero against round-off.
pub fn tail_from(probs: &[f64], n: usize) -> f64 {
    (1.0 - probs[..n].iter().sum::<f64>()).max(0.0)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Poisson(mean) probabilities for `0..count`, evaluated in log space.
pub(crate) fn poisson_pmf(mean: f64, count: usize) -> Vec<f64> {
    let ln_mean = mean.ln();
    let mut lf = 0.0;
    (0..count)
        .map(|n| {
            if n > 0 {
                lf += (n as f64).ln();
            }
            (n as f64 * ln_mean - mean - lf).exp()
        })
        .collect()
}

/// `P{N >= n}` for `N ~ Poisson(mean)`, summing whichever side avoids cancellation.
pub(crate) fn poisson_upper_tail(mean: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if (n as f64) <= mean {
        let below: f64 = poisson_pmf(mean, n).iter().sum();
        return (1.0 - below).max(0.0);
    }
    let mut term = (n as f64 * mean.ln() - mean - ln_factorial(n)).exp();
    let mut sum = 0.0;
    let mut j = n;
    while term > 0.0 {
        sum += term;
        j += 1;
        term *= mean / j as f64;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Service laws indexed by region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceSpec(Vec<ServiceDist>);

impl ServiceSpec {
    pub fn new(regions: Vec<ServiceDist>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::RegionMismatch { expected: 1, found: 0 });
        }
        let regions = regions.into_iter().map(ServiceDist::validated).collect::<Result<_>>()?;
        Ok(Self(regions))
    }

    pub fn exponential(rates: &[f64]) -> Result<Self> {
        Self::new(rates.iter().map(|&rate| ServiceDist::Exponential { rate }).collect())
    }

    pub fn deterministic(durations: &[f64]) -> Result<Self> {
        Self::new(durations.iter().map(|&duration| ServiceDist::Deterministic { duration }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn regions(&self) -> &[ServiceDist] {
        &self.0
    }

    pub fn region(&self, k: usize) -> Result<&ServiceDist> {
        self.0.get(k).ok_or(Error::InvalidRegion { region: k, regions: self.0.len() })
    }

    pub fn means(&self) -> Vec<f64> {
        self.0.iter().map(ServiceDist::mean).collect()
    }

    /// Deterministic services with the same per-region means.
    pub fn deterministic_counterpart(&self) -> Self {
        Self(self.0.iter().map(|d| ServiceDist::Deterministic { duration: d.mean() }).collect())
    }

    /// `a^k_n`: probability of `n` arrivals during one region-`k` service.
    pub fn arrivals_during_service(&self, k: usize, n: usize, arrivals: &ArrivalSpec) -> Result<f64> {
        let probs = self.region(k)?.arrival_probabilities(arrivals.rate(), n + 1)?;
        Ok(probs[n])
    }

    /// `ā^k_n = 1 - Σ_{j<n} a^k_j`.
    pub fn tail_probability(&self, k: usize, n: usize, arrivals: &ArrivalSpec) -> Result<f64> {
        let probs = self.region(k)?.arrival_probabilities(arrivals.rate(), n)?;
        Ok(tail_from(&probs, n))
    }

    /// `c^k_n`: probability of `n` arrivals during the residual of a region-`k` service.
    pub fn residual_arrival_probability(&self, k: usize, n: usize, arrivals: &ArrivalSpec) -> Result<f64> {
        let probs = self.region(k)?.residual_probabilities(arrivals.rate(), n + 1)?;
        Ok(probs[n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrivals(rate: f64) -> ArrivalSpec {
        ArrivalSpec::new(rate).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let exp = ServiceSpec::exponential(&[1.0]).unwrap();
        assert!((exp.arrivals_during_service(0, 0, &arrivals(1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((exp.tail_probability(0, 1, &arrivals(1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exp.tail_probability(0, 0, &arrivals(1.0)).unwrap(), 1.0);
        assert!((exp.residual_arrival_probability(0, 0, &arrivals(1.0)).unwrap() - 0.5).abs() < 1e-15);

        let det = ServiceSpec::deterministic(&[0.5]).unwrap();
        let a0 = det.arrivals_during_service(0, 0, &arrivals(2.0)).unwrap();
        assert!((a0 - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_tail_matches_poisson() {
        let det = ServiceSpec::deterministic(&[1.0]).unwrap();
        let tail = det.tail_probability(0, 3, &arrivals(1.0)).unwrap();
        let e = (-1.0f64).exp();
        assert!((tail - (1.0 - e * (1.0 + 1.0 + 0.5))).abs() < 1e-15);
        assert!((tail - 0.080301).abs() < 1e-6);
    }

    #[test]
    fn invalid_region_is_rejected() {
        let spec = ServiceSpec::exponential(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            spec.arrivals_during_service(2, 0, &arrivals(1.0)),
            Err(Error::InvalidRegion { region: 2, regions: 2 })
        ));
        assert!(ServiceSpec::exponential(&[1.0, f64::INFINITY]).is_err());
        assert!(ServiceSpec::deterministic(&[-1.0]).is_err());
    }

    #[test]
    fn residual_probabilities_normalize() {
        for dist in [
            ServiceDist::exponential(3.0).unwrap(),
            ServiceDist::deterministic(0.7).unwrap(),
            ServiceDist::erlang(3, 4.0).unwrap(),
        ] {
            let c = dist.residual_probabilities(2.0, 60).unwrap();
            let total: f64 = c.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "{dist:?}: {total}");
            let a = dist.arrival_probabilities(2.0, 60).unwrap();
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10, "{dist:?}");
        }
    }

    #[test]
    fn transform_normalization_and_mean() {
        for dist in [
            ServiceDist::exponential(3.0).unwrap(),
            ServiceDist::deterministic(0.7).unwrap(),
            ServiceDist::erlang(4, 2.0).unwrap(),
        ] {
            assert_eq!(dist.lst(0.0), 1.0);
            let h = 1e-6;
            let slope = -(dist.lst(h) - dist.lst(0.0)) / h;
            assert!((slope - dist.mean()).abs() < 1e-5 * dist.mean(), "{dist:?}");
        }
    }

    #[test]
    fn large_counts_do_not_overflow() {
        let det = ServiceDist::deterministic(2.0).unwrap();
        let a = det.arrival_probabilities(400.0, 2000).unwrap();
        assert!(a.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(poisson_upper_tail(800.0, 1990) < 1e-100);
    }

    #[test]
    fn serde_tagging() {
        let d: ServiceDist = serde_json::from_str(r#"{"kind":"exponential","rate":200.0}"#).unwrap();
        assert_eq!(d, ServiceDist::Exponential { rate: 200.0 });
        assert!(serde_json::from_str::<ServiceDist>(r#"{"kind":"exponential","rate":1,"x":2}"#).is_err());
    }
}
