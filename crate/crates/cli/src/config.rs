//! Scenario file: one TOML document per scenario, unknown keys rejected.

use std::path::{Path, PathBuf};

use segq::channel::ChannelSpec;
use segq::departure::DepartureOptions;
use segq::power::{ConstraintMode, DesignContext, PowerSource, PowerSpec, PsoConfig};
use segq::queue::{DelayVariant, EpochMode};
use segq::scenario;
use segq::sim::{SimConfig, SlotMode};
use segq::{ArrivalSpec, Scenario, ServiceDist, ServiceSpec, ThresholdPolicy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub arrivals: ArrivalsSection,
    pub policy: ThresholdPolicy,
    pub services: Vec<ServiceDist>,
    #[serde(default)]
    pub power: PowerSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub departure: DepartureOptions,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalsSection {
    /// Packets per second.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    /// Per-region clock frequencies (Hz). Defaults to service rate / packets-per-cycle.
    pub frequencies: Option<Vec<f64>>,
    pub scale: f64,
    pub packets_per_cycle: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { frequencies: None, scale: 1.0, packets_per_cycle: scenario::PACKETS_PER_CYCLE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub rate: f64,
    pub queues: usize,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { rate: scenario::CHANNEL_RATE, queues: scenario::CHANNEL_QUEUES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub delay_variant: DelayVariant,
    pub epoch_mode: EpochMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    /// Delay bound (s).
    pub w_bound: f64,
    pub constraint: ConstraintMode,
    pub power_source: PowerSource,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self { w_bound: 0.025, constraint: ConstraintMode::System, power_source: PowerSource::ArbitraryEpoch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Departures per run, warm-up included.
    pub horizon: u64,
    /// Defaults to 10% of the horizon.
    pub warmup: Option<u64>,
    pub seed: u64,
    pub slot_mode: SlotMode,
    /// Write every tagged inter-departure gap to CSV.
    pub record_samples: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { horizon: 1_000_000, warmup: None, seed: 1, slot_mode: SlotMode::Exponential, record_samples: false }
    }
}

impl Config {
    /// The λ = 150 reference scenario with every default applied.
    pub fn reference() -> Self {
        let s = Scenario::reference();
        Self {
            arrivals: ArrivalsSection { rate: s.arrivals.rate() },
            policy: s.policy,
            services: s.services.regions().to_vec(),
            power: PowerSection::default(),
            channel: ChannelSection::default(),
            analysis: AnalysisSection::default(),
            departure: DepartureOptions::default(),
            optimize: OptimizeSection::default(),
            pso: PsoConfig::default(),
            simulation: SimulationSection::default(),
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cross-checks region counts and parameter ranges.
    pub fn validate(&self) -> Result<(), CliError> {
        let input = |e: segq::Error| CliError::Input(e.to_string());
        ArrivalSpec::new(self.arrivals.rate).map_err(input)?;
        let regions = self.policy.regions();
        if self.services.len() != regions {
            return Err(CliError::Input(format!(
                "region-count mismatch: {} thresholds define {regions} regions but {} service specs are given",
                self.policy.thresholds().len(),
                self.services.len()
            )));
        }
        self.service_spec()?;
        let power = self.power_spec()?;
        if power.frequencies.len() != regions {
            return Err(CliError::Input(format!(
                "region-count mismatch: {regions} regions but {} frequencies are given",
                power.frequencies.len()
            )));
        }
        self.channel_spec()?;
        if !(self.optimize.w_bound >= 0.0) {
            return Err(CliError::Input(format!("optimize.w_bound must be non-negative, got {}", self.optimize.w_bound)));
        }
        self.pso.validate().map_err(input)?;
        if let Some(t0) = self.departure.t0 {
            if !(t0 > 0.0 && t0 < self.departure.t1) {
                return Err(CliError::Input(format!("departure.t0 must lie in (0, t1), got {t0}")));
            }
        }
        self.sim_config().validate().map_err(input)?;
        Ok(())
    }

    pub fn arrivals(&self) -> ArrivalSpec {
        ArrivalSpec::new(self.arrivals.rate).expect("validated")
    }

    pub fn service_spec(&self) -> Result<ServiceSpec, CliError> {
        let dists = self
            .services
            .iter()
            .map(|d| d.validated())
            .collect::<segq::Result<Vec<_>>>()
            .map_err(|e| CliError::Input(e.to_string()))?;
        ServiceSpec::new(dists).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn power_spec(&self) -> Result<PowerSpec, CliError> {
        let frequencies = match &self.power.frequencies {
            Some(f) => f.clone(),
            None => {
                if !(self.power.packets_per_cycle > 0.0) {
                    return Err(CliError::Input("power.packets_per_cycle must be positive".into()));
                }
                self.services.iter().map(|d| 1.0 / (d.mean() * self.power.packets_per_cycle)).collect()
            }
        };
        PowerSpec::new(frequencies, self.power.scale).map_err(|e| CliError::Input(format!("power: {e}")))
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec, CliError> {
        ChannelSpec::new(self.channel.rate, self.channel.queues).map_err(|e| CliError::Input(format!("channel: {e}")))
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            arrivals: self.arrivals(),
            policy: self.policy.clone(),
            services: self.service_spec().expect("validated"),
            power: self.power_spec().expect("validated"),
            channel: self.channel_spec().expect("validated"),
        }
    }

    pub fn design_context(&self) -> DesignContext {
        let mut ctx = self.scenario().design_context(self.optimize.w_bound, self.optimize.constraint);
        ctx.delay_variant = self.analysis.delay_variant;
        ctx.power_source = self.optimize.power_source;
        ctx.departure = self.departure;
        ctx
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut c = SimConfig::new(
            self.arrivals.rate,
            self.policy.clone(),
            self.service_spec().expect("validated"),
            self.simulation.horizon,
            self.simulation.seed,
        );
        c.warmup = self.simulation.warmup;
        c.record_interdepartures = self.simulation.record_samples;
        c
    }
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    Config::from_toml(&text)
}
