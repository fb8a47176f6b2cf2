//! WebAssembly bindings for the demo page in `www/`. Every export takes plain
//! numbers and typed arrays and returns a JSON string; the pure functions
//! behind them are ordinary Rust and tested natively.

use segq::departure::DepartureModel;
use segq::power::{evaluate_grid, ConstraintMode, DesignContext, PowerSpec};
use segq::queue::{DelayVariant, EpochMode, QueueAnalysis};
use segq::scenario;
use segq::{ArrivalSpec, ChannelSpec, DepartureOptions, ServiceSpec, ThresholdPolicy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Scenario assembled from the page controls.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub arrival_rate: f64,
    pub capacity: usize,
    pub thresholds: Vec<usize>,
    pub rates: Vec<f64>,
    /// Constant service times `1/rate` instead of exponential ones.
    pub constant: bool,
}

impl Inputs {
    fn services(&self) -> Result<ServiceSpec, String> {
        let spec = if self.constant {
            ServiceSpec::deterministic(&self.rates.iter().map(|r| 1.0 / r).collect::<Vec<_>>())
        } else {
            ServiceSpec::exponential(&self.rates)
        };
        spec.map_err(|e| e.to_string())
    }

    fn analysis(&self) -> Result<QueueAnalysis, String> {
        let policy = ThresholdPolicy::new(self.capacity, self.thresholds.clone()).map_err(|e| e.to_string())?;
        let services = self.services()?;
        if services.len() != policy.regions() {
            return Err(format!("{} regions need {} service rates", policy.regions(), policy.regions()));
        }
        let arrivals = ArrivalSpec::new(self.arrival_rate).map_err(|e| e.to_string())?;
        QueueAnalysis::run(&policy, &services, &arrivals, DelayVariant::TransformConsistent, EpochMode::Renormalized)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct Distributions {
    pub post_departure: Vec<f64>,
    pub arbitrary_epoch: Vec<f64>,
    pub region_masses: Vec<f64>,
    pub idle: f64,
    pub t_mean: f64,
    pub carried_load: f64,
    pub mean_system_time: f64,
}

pub fn distributions(inputs: &Inputs) -> Result<Distributions, String> {
    let a = inputs.analysis()?;
    Ok(Distributions {
        region_masses: a.policy.region_masses(a.post_departure.probs()),
        post_departure: a.post_departure.probs().to_vec(),
        arbitrary_epoch: a.arbitrary_epoch.probs.clone(),
        idle: a.post_departure.idle(),
        t_mean: a.summary.t_mean,
        carried_load: a.summary.carried_load,
        mean_system_time: a.summary.mean_system_time,
    })
}

#[derive(Debug, Serialize)]
pub struct DepartureCurves {
    pub p0: f64,
    pub mean: f64,
    /// `(time, absolute weight)` of the busy-departure atoms.
    pub atoms: Vec<(f64, f64)>,
    /// `(t, density)` of the empty-arrival part.
    pub density: Vec<(f64, f64)>,
    /// `(s, E[e^{-sX}])`.
    pub laplace: Vec<(f64, f64)>,
}

pub fn departure_curves(inputs: &Inputs, points: usize) -> Result<DepartureCurves, String> {
    let points = points.max(2);
    let model = DepartureModel::build(&inputs.analysis()?, &DepartureOptions::default()).map_err(|e| e.to_string())?;
    let t_end = model.empty.t1 + 8.0 / model.empty.alpha;
    let s_end = 10.0 * model.lambda;
    let grid = |end: f64| (0..points).map(move |i| end * i as f64 / (points - 1) as f64);
    Ok(DepartureCurves {
        p0: model.p0,
        mean: model.mean(),
        atoms: model.atoms.iter().map(|a| (a.time, a.weight)).collect(),
        density: grid(t_end).map(|t| (t, model.empty.density(t))).collect(),
        laplace: grid(s_end).map(|s| (s, model.laplace(s))).collect(),
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct TradeoffPoint {
    /// Constrained delay of the design (s).
    pub delay: f64,
    pub np: f64,
    pub thresholds: Vec<usize>,
}

/// Lower envelope of normalized power against delay over every two-threshold
/// design: each point is the cheapest design no slower than it.
pub fn tradeoff_curve(inputs: &Inputs, system_delay: bool, channel_rate: f64) -> Result<Vec<TradeoffPoint>, String> {
    if inputs.rates.len() < 2 {
        return Err("the trade-off needs at least two service rates".into());
    }
    let ctx = DesignContext {
        arrivals: ArrivalSpec::new(inputs.arrival_rate).map_err(|e| e.to_string())?,
        capacity: inputs.capacity,
        services: inputs.services()?,
        channel: ChannelSpec::new(channel_rate, scenario::CHANNEL_QUEUES).map_err(|e| e.to_string())?,
        power: PowerSpec::new(
            inputs.rates.iter().map(|r| r / scenario::PACKETS_PER_CYCLE).collect(),
            1.0,
        )
        .map_err(|e| e.to_string())?,
        w_bound: f64::MAX,
        constraint: if system_delay { ConstraintMode::System } else { ConstraintMode::QueueOnly },
        delay_variant: DelayVariant::TransformConsistent,
        power_source: Default::default(),
        departure: DepartureOptions::default(),
    };
    let mut designs: Vec<TradeoffPoint> = evaluate_grid(&ctx)
        .into_iter()
        .filter(|d| d.feasible)
        .filter_map(|d| {
            let delay = if system_delay { d.w_system } else { d.w_queue }?;
            Some(TradeoffPoint { delay, np: d.np?, thresholds: d.thresholds })
        })
        .collect();
    designs.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.np.total_cmp(&b.np)));
    let mut frontier: Vec<TradeoffPoint> = Vec::new();
    for d in designs {
        if frontier.last().is_none_or(|last| d.np < last.np) {
            frontier.push(d);
        }
    }
    Ok(frontier)
}

fn inputs(arrival_rate: f64, capacity: u32, thresholds: &[u32], rates: &[f64], constant: bool) -> Inputs {
    Inputs {
        arrival_rate,
        capacity: capacity as usize,
        thresholds: thresholds.iter().map(|&t| t as usize).collect(),
        rates: rates.to_vec(),
        constant,
    }
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analyze(arrival_rate: f64, capacity: u32, thresholds: &[u32], rates: &[f64], constant: bool) -> Result<String, JsValue> {
    to_js(distributions(&inputs(arrival_rate, capacity, thresholds, rates, constant)))
}

#[wasm_bindgen]
pub fn departure(
    arrival_rate: f64,
    capacity: u32,
    thresholds: &[u32],
    rates: &[f64],
    constant: bool,
    points: u32,
) -> Result<String, JsValue> {
    to_js(departure_curves(&inputs(arrival_rate, capacity, thresholds, rates, constant), points as usize))
}

#[wasm_bindgen]
pub fn tradeoff(
    arrival_rate: f64,
    capacity: u32,
    rates: &[f64],
    system_delay: bool,
    channel_rate: f64,
) -> Result<String, JsValue> {
    let i = inputs(arrival_rate, capacity, &[], rates, false);
    to_js(tradeoff_curve(&i, system_delay, channel_rate))
}
