//! The λ = 150 reference configuration used by the examples, the CLI defaults
//! and the acceptance runs.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::departure::DepartureOptions;
use crate::error::{positive, Result};
use crate::policy::{ArrivalSpec, ThresholdPolicy};
use crate::power::{ConstraintMode, DesignContext, PowerSource, PowerSpec};
use crate::queue::DelayVariant;
use crate::service::ServiceSpec;

pub const ARRIVAL_RATE: f64 = 150.0;
pub const CAPACITY: usize = 50;
pub const THRESHOLDS: [usize; 2] = [15, 30];
/// Packets served per clock cycle; puts region-0 utilization at 0.75.
pub const PACKETS_PER_CYCLE: f64 = 2e-6;
pub const CHANNEL_RATE: f64 = 600.0;
pub const CHANNEL_QUEUES: usize = 3;

/// `μ_k = f_k × packets-per-cycle`.
pub fn service_rates(power: &PowerSpec, packets_per_cycle: f64) -> Result<Vec<f64>> {
    positive("packets per cycle", packets_per_cycle)?;
    Ok(power.frequencies.iter().map(|f| f * packets_per_cycle).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub arrivals: ArrivalSpec,
    pub policy: ThresholdPolicy,
    pub services: ServiceSpec,
    pub power: PowerSpec,
    pub channel: ChannelSpec,
}

impl Scenario {
    /// Exponential services at 200, 300 and 400 packets/s.
    pub fn reference() -> Self {
        let power = PowerSpec::reference();
        let rates = service_rates(&power, PACKETS_PER_CYCLE).expect("positive constant");
        Self {
            arrivals: ArrivalSpec::new(ARRIVAL_RATE).expect("positive constant"),
            policy: ThresholdPolicy::new(CAPACITY, THRESHOLDS.to_vec()).expect("valid constant"),
            services: ServiceSpec::exponential(&rates).expect("positive rates"),
            power,
            channel: ChannelSpec::new(CHANNEL_RATE, CHANNEL_QUEUES).expect("positive constant"),
        }
    }

    /// Same scenario with constant service times at the same means.
    pub fn deterministic_reference() -> Self {
        let mut s = Self::reference();
        s.services = s.services.deterministic_counterpart();
        s
    }

    pub fn with_arrival_rate(mut self, rate: f64) -> Result<Self> {
        self.arrivals = ArrivalSpec::new(rate)?;
        Ok(self)
    }

    pub fn design_context(&self, w_bound: f64, constraint: ConstraintMode) -> DesignContext {
        DesignContext {
            arrivals: self.arrivals,
            capacity: self.policy.capacity(),
            services: self.services.clone(),
            channel: self.channel,
            power: self.power.clone(),
            w_bound,
            constraint,
            delay_variant: DelayVariant::default(),
            power_source: PowerSource::default(),
            departure: DepartureOptions::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rates() {
        let s = Scenario::reference();
        assert_eq!(s.services.means(), vec![1.0 / 200.0, 1.0 / 300.0, 1.0 / 400.0]);
        assert!((ARRIVAL_RATE * s.services.means()[0] - 0.75).abs() < 1e-12);
        assert!(Scenario::deterministic_reference().services.regions()[0].is_deterministic());
    }
}
