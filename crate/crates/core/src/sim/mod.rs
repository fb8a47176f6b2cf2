//! Discrete-event simulation of the segmented queue and of several queues
//! sharing a cyclically polled channel.
//!
//! Random streams are ChaCha8 substreams of one seed: arrivals, services and
//! channel slots draw from separate streams, so changing one parameter does
//! not perturb the others.

mod empirical;
mod network;
mod queue;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use empirical::{empirical_interdeparture, ks_distance, EmpiricalSplit};
pub use network::{simulate_network, NetworkConfig, NetworkFeed, NetworkStats, SlotMode};
pub use queue::{replicate, simulate_queue, InterdepartureSample, QueueSimStats, SimConfig};

const BATCHES: usize = 50;

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Arrivals = 0,
    Services = 1,
    Channel = 2,
}

fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Mean with a 95% batch-means confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

/// Streaming batch means over a known number of observations.
#[derive(Debug, Clone)]
pub(crate) struct BatchMeans {
    batch_size: u64,
    in_batch: u64,
    batch_sum: f64,
    total: f64,
    count: u64,
    means: Vec<f64>,
}

impl BatchMeans {
    pub(crate) fn new(expected: u64) -> Self {
        Self {
            batch_size: (expected / BATCHES as u64).max(1),
            in_batch: 0,
            batch_sum: 0.0,
            total: 0.0,
            count: 0,
            means: Vec::with_capacity(BATCHES + 1),
        }
    }

    pub(crate) fn push(&mut self, x: f64) {
        self.total += x;
        self.count += 1;
        self.batch_sum += x;
        self.in_batch += 1;
        if self.in_batch == self.batch_size {
            self.means.push(self.batch_sum / self.batch_size as f64);
            self.batch_sum = 0.0;
            self.in_batch = 0;
        }
    }

    pub(crate) fn finish(&self) -> Estimate {
        let mean = if self.count == 0 { f64::NAN } else { self.total / self.count as f64 };
        let b = self.means.len();
        let half_width = if b < 2 {
            f64::INFINITY
        } else {
            let m = self.means.iter().sum::<f64>() / b as f64;
            let var = self.means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (b - 1) as f64).expect("positive dof").inverse_cdf(0.975);
            t * (var / b as f64).sqrt()
        };
        Estimate { mean, half_width, samples: self.count }
    }
}
