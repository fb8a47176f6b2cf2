use std::collections::VecDeque;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{substream, BatchMeans, Estimate, Stream};
use crate::error::{positive, Error, Result};
use crate::policy::ThresholdPolicy;
use crate::service::ServiceSpec;

/// Single-queue run. At most `K + 1` customers are in the system, so a
/// departure leaves between 0 and `K` behind, matching the embedded chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub arrival_rate: f64,
    pub policy: ThresholdPolicy,
    pub services: ServiceSpec,
    /// Departures simulated, warm-up included.
    pub horizon: u64,
    /// Departures discarded before statistics start; defaults to 10% of the horizon.
    #[serde(default)]
    pub warmup: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub record_interdepartures: bool,
    #[serde(default)]
    pub record_departure_times: bool,
}

impl SimConfig {
    pub fn new(arrival_rate: f64, policy: ThresholdPolicy, services: ServiceSpec, horizon: u64, seed: u64) -> Self {
        Self {
            arrival_rate,
            policy,
            services,
            horizon,
            warmup: None,
            seed,
            record_interdepartures: false,
            record_departure_times: false,
        }
    }

    pub fn warmup(&self) -> u64 {
        self.warmup.unwrap_or(self.horizon / 10)
    }

    pub fn validate(&self) -> Result<()> {
        positive("arrival rate", self.arrival_rate)?;
        self.policy.check_regions(self.services.len())?;
        if self.horizon <= self.warmup() {
            return Err(Error::InvalidSimConfig(format!(
                "horizon {} must exceed warm-up {}",
                self.horizon,
                self.warmup()
            )));
        }
        Ok(())
    }
}

/// Gap between consecutive departures, tagged by whether the departing
/// customer arrived to an empty system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdepartureSample {
    pub gap: f64,
    pub found_empty: bool,
    /// Region of the service that just ended.
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSimStats {
    pub seed: u64,
    /// Departures counted after warm-up.
    pub departures: u64,
    pub arrivals_total: u64,
    pub departures_total: u64,
    pub drops_total: u64,
    pub in_system_end: u64,
    /// Drops over arrivals inside the measurement window.
    pub blocking_fraction: f64,
    /// Length of the measurement window (s).
    pub elapsed: f64,
    pub sojourn: Estimate,
    pub mean_interdeparture: f64,
    pub empty_tagged: u64,
    pub non_empty_tagged: u64,
    pub mean_gap_empty: f64,
    pub mean_gap_non_empty: f64,
    pub region_services: Vec<u64>,
    pub mean_service: f64,
    pub busy_fraction: f64,
    /// Time-average number in system, states `0..=K+1`.
    pub length_histogram: Vec<f64>,
    pub interdepartures: Vec<InterdepartureSample>,
    /// Every departure epoch, warm-up included.
    pub departure_times: Vec<f64>,
}

impl QueueSimStats {
    pub fn mean_length(&self) -> f64 {
        self.length_histogram.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Time-average number waiting (excluding the one in service), states `0..=K`.
    pub fn waiting_histogram(&self) -> Vec<f64> {
        let h = &self.length_histogram;
        let mut w = h[1..].to_vec();
        w[0] += h[0];
        w
    }

    pub fn throughput(&self) -> f64 {
        self.departures as f64 / self.elapsed
    }

    /// `|L - X W| / L` for the time-average length `L`, throughput `X` and mean sojourn `W`.
    pub fn little_relative_error(&self) -> f64 {
        let l = self.mean_length();
        (l - self.throughput() * self.sojourn.mean).abs() / l
    }

    /// Arrivals = departures + drops + in system at the end.
    pub fn conserves_customers(&self) -> bool {
        self.arrivals_total == self.departures_total + self.drops_total + self.in_system_end
    }
}

struct InService {
    start: f64,
    end: f64,
    region: usize,
}

pub fn simulate_queue(config: &SimConfig) -> Result<QueueSimStats> {
    config.validate()?;
    let policy = &config.policy;
    let services = config.services.regions();
    let cap = policy.capacity() + 1;
    let warmup = config.warmup();
    let counted = config.horizon - warmup;

    let mut arrival_rng = substream(config.seed, Stream::Arrivals);
    let mut service_rng = substream(config.seed, Stream::Services);
    let spacing = Exp::new(config.arrival_rate).map_err(|_| Error::InvalidParameter {
        name: "arrival rate",
        value: config.arrival_rate,
    })?;

    let mut next_arrival = spacing.sample(&mut arrival_rng);
    let mut system: VecDeque<f64> = VecDeque::with_capacity(cap);
    let mut service: Option<InService> = None;
    let mut now = 0.0;
    let mut last_departure: Option<f64> = None;
    let mut left_empty = true;
    let mut window_start = 0.0;

    let mut arrivals_total = 0u64;
    let mut departures_total = 0u64;
    let mut drops_total = 0u64;
    let mut window_arrivals = 0u64;
    let mut window_drops = 0u64;
    let mut sojourn = BatchMeans::new(counted);
    let mut gap_sum = 0.0;
    let mut gaps = 0u64;
    let (mut empty_n, mut empty_sum, mut busy_n, mut busy_sum) = (0u64, 0.0, 0u64, 0.0);
    let mut region_services = vec![0u64; services.len()];
    let mut service_sum = 0.0;
    let mut time_in_state = vec![0.0; cap + 1];
    let mut interdepartures = Vec::new();
    let mut departure_times = Vec::new();
    if config.record_interdepartures {
        interdepartures.reserve(counted as usize);
    }
    if config.record_departure_times {
        departure_times.reserve(config.horizon as usize);
    }

    let start_service = |at: f64, length: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let region = policy.region_of(length);
        InService { start: at, end: at + services[region].sample(rng), region }
    };

    while departures_total < config.horizon {
        let departing = matches!(&service, Some(s) if s.end <= next_arrival);
        let t = if departing { service.as_ref().map_or(next_arrival, |s| s.end) } else { next_arrival };
        let in_window = departures_total >= warmup;
        if in_window {
            time_in_state[system.len()] += t - now;
        }
        now = t;

        if departing {
            let done = service.take().expect("departure needs a service");
            let arrived = system.pop_front().expect("departure needs a customer");
            departures_total += 1;
            let found_empty = left_empty;
            if in_window {
                sojourn.push(t - arrived);
                region_services[done.region] += 1;
                service_sum += t - done.start;
                if let Some(prev) = last_departure {
                    let gap = t - prev;
                    gap_sum += gap;
                    gaps += 1;
                    if found_empty {
                        empty_n += 1;
                        empty_sum += gap;
                    } else {
                        busy_n += 1;
                        busy_sum += gap;
                    }
                    if config.record_interdepartures {
                        interdepartures.push(InterdepartureSample { gap, found_empty, region: done.region });
                    }
                }
            }
            if departures_total == warmup {
                window_start = t;
            }
            if config.record_departure_times {
                departure_times.push(t);
            }
            last_departure = Some(t);
            left_empty = system.is_empty();
            if !system.is_empty() {
                service = Some(start_service(t, system.len(), &mut service_rng));
            }
        } else {
            arrivals_total += 1;
            if in_window {
                window_arrivals += 1;
            }
            if system.len() < cap {
                system.push_back(t);
                if system.len() == 1 {
                    service = Some(start_service(t, 1, &mut service_rng));
                }
            } else {
                drops_total += 1;
                if in_window {
                    window_drops += 1;
                }
            }
            next_arrival = t + spacing.sample(&mut arrival_rng);
        }
    }

    let observed: f64 = time_in_state.iter().sum();
    let length_histogram: Vec<f64> = time_in_state.iter().map(|x| x / observed).collect();
    let busy_fraction = 1.0 - length_histogram[0];
    let departures = departures_total - warmup;
    Ok(QueueSimStats {
        seed: config.seed,
        departures,
        arrivals_total,
        departures_total,
        drops_total,
        in_system_end: system.len() as u64,
        blocking_fraction: if window_arrivals == 0 { 0.0 } else { window_drops as f64 / window_arrivals as f64 },
        elapsed: now - window_start,
        sojourn: sojourn.finish(),
        mean_interdeparture: gap_sum / gaps as f64,
        empty_tagged: empty_n,
        non_empty_tagged: busy_n,
        mean_gap_empty: empty_sum / empty_n as f64,
        mean_gap_non_empty: busy_sum / busy_n as f64,
        region_services,
        mean_service: service_sum / departures as f64,
        busy_fraction,
        length_histogram,
        interdepartures,
        departure_times,
    })
}

/// Independent replications of `config` with the given seeds.
pub fn replicate(config: &SimConfig, seeds: &[u64]) -> Vec<Result<QueueSimStats>> {
    let run = |&seed: &u64| simulate_queue(&SimConfig { seed, ..config.clone() });
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm1(seed: u64) -> SimConfig {
        SimConfig::new(
            1.0,
            ThresholdPolicy::single_region(200).unwrap(),
            ServiceSpec::exponential(&[2.0]).unwrap(),
            20_000,
            seed,
        )
    }

    #[test]
    fn rejects_short_horizon() {
        let mut c = mm1(1);
        c.warmup = Some(c.horizon);
        assert!(simulate_queue(&c).is_err());
    }

    #[test]
    fn bookkeeping() {
        let mut c = mm1(9);
        c.record_interdepartures = true;
        c.record_departure_times = true;
        let s = simulate_queue(&c).unwrap();
        assert!(s.conserves_customers());
        assert_eq!(s.departures, 18_000);
        assert_eq!(s.departure_times.len(), 20_000);
        assert_eq!(s.empty_tagged + s.non_empty_tagged, s.interdepartures.len() as u64);
        assert!((s.length_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.waiting_histogram().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.region_services.iter().sum::<u64>(), s.departures);
    }

    #[test]
    fn tiny_buffer_blocks() {
        let c = SimConfig::new(
            5.0,
            ThresholdPolicy::single_region(1).unwrap(),
            ServiceSpec::exponential(&[1.0]).unwrap(),
            5_000,
            2,
        );
        let s = simulate_queue(&c).unwrap();
        assert!(s.blocking_fraction > 0.3);
        assert!(s.length_histogram.len() == 3);
        assert!(s.conserves_customers());
    }
}
