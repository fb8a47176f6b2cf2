use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::queue::{simulate_queue, SimConfig};
use super::{substream, BatchMeans, Estimate, Stream};
use crate::error::{positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotMode {
    /// Slot lengths exponential with mean `1/μ`.
    #[default]
    Exponential,
    /// Every slot lasts exactly `1/μ`.
    Deterministic,
}

/// Traffic offered to each channel buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkFeed {
    /// Departures of a segmented queue; each buffer gets its own seed.
    Segmented(SimConfig),
    /// Poisson packets at `rate`, `packets` per buffer.
    Poisson { rate: f64, packets: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub feed: NetworkFeed,
    pub queues: usize,
    /// Channel packet rate `μ` (1/s).
    pub channel_rate: f64,
    #[serde(default)]
    pub slot_mode: SlotMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub seed: u64,
    /// Time from arrival at the buffer until the packet reaches its head (s).
    pub wait: Estimate,
    /// Time from arrival at the buffer until transmission ends (s).
    pub sojourn: Estimate,
    pub delivered: u64,
    pub elapsed: f64,
    /// Channel visits per second to each buffer.
    pub visit_rate: Vec<f64>,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.queues == 0 {
            return Err(Error::InvalidSimConfig("at least one queue must share the channel".into()));
        }
        positive("channel rate", self.channel_rate)?;
        match &self.feed {
            NetworkFeed::Segmented(c) => c.validate(),
            NetworkFeed::Poisson { rate, packets } => {
                positive("arrival rate", *rate)?;
                if *packets < 10 {
                    return Err(Error::InvalidSimConfig("Poisson feed needs at least 10 packets".into()));
                }
                Ok(())
            }
        }
    }

    fn feed_seed(&self, queue: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(16 + queue as u64);
        rng.random()
    }

    fn arrivals(&self, queue: usize) -> Result<Vec<f64>> {
        let seed = self.feed_seed(queue);
        match &self.feed {
            NetworkFeed::Segmented(c) => {
                let cfg = SimConfig { seed, record_departure_times: true, record_interdepartures: false, ..c.clone() };
                Ok(simulate_queue(&cfg)?.departure_times)
            }
            NetworkFeed::Poisson { rate, packets } => {
                let mut rng = substream(seed, Stream::Arrivals);
                let spacing = Exp::new(*rate).map_err(|_| Error::InvalidParameter { name: "arrival rate", value: *rate })?;
                let mut t = 0.0;
                Ok((0..*packets)
                    .map(|_| {
                        t += spacing.sample(&mut rng);
                        t
                    })
                    .collect())
            }
        }
    }
}

/// Cyclic polling: slot `j` belongs to buffer `j mod Q` and ends by sending
/// that buffer's head-of-line packet, if one has arrived. Empty buffers still
/// receive their slot. The first 10% of each buffer's packets are discarded.
pub fn simulate_network(config: &NetworkConfig) -> Result<NetworkStats> {
    config.validate()?;
    let q_count = config.queues;
    let feeds: Vec<Result<Vec<f64>>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..q_count).into_par_iter().map(|q| config.arrivals(q)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..q_count).map(|q| config.arrivals(q)).collect()
        }
    };
    let feeds = feeds.into_iter().collect::<Result<Vec<_>>>()?;
    let horizon = feeds.iter().map(|f| *f.last().unwrap_or(&0.0)).fold(f64::INFINITY, f64::min);
    let warm: Vec<usize> = feeds.iter().map(|f| f.len() / 10).collect();
    let expected = feeds.iter().zip(&warm).map(|(f, w)| (f.len() - w) as u64).sum();

    let mut rng = substream(config.seed, Stream::Channel);
    let slot_len = 1.0 / config.channel_rate;
    let exp_slot = Exp::new(config.channel_rate).map_err(|_| Error::InvalidParameter {
        name: "channel rate",
        value: config.channel_rate,
    })?;
    let mut wait = BatchMeans::new(expected);
    let mut sojourn = BatchMeans::new(expected);
    let mut head = vec![0usize; q_count];
    let mut last_send = vec![0.0f64; q_count];
    let mut visits = vec![0u64; q_count];
    let mut delivered = 0u64;
    let mut t = 0.0;
    let mut q = 0;
    loop {
        t += match config.slot_mode {
            SlotMode::Exponential => exp_slot.sample(&mut rng),
            SlotMode::Deterministic => slot_len,
        };
        if t > horizon {
            break;
        }
        visits[q] += 1;
        let idx = head[q];
        if let Some(&arrived) = feeds[q].get(idx) {
            if arrived <= t {
                if idx >= warm[q] {
                    wait.push((last_send[q] - arrived).max(0.0));
                    sojourn.push(t - arrived);
                    delivered += 1;
                }
                last_send[q] = t;
                head[q] += 1;
            }
        }
        q = (q + 1) % q_count;
    }
    Ok(NetworkStats {
        seed: config.seed,
        wait: wait.finish(),
        sojourn: sojourn.finish(),
        delivered,
        elapsed: horizon,
        visit_rate: visits.iter().map(|&v| v as f64 / horizon).collect(),
    })
}
