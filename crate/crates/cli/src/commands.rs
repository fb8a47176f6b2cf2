//! One function per subcommand. Each writes its artifacts and returns the
//! lines printed to stdout.

use std::path::Path;

use segq::channel::{analyze_channel, ChannelResult, ChannelSpec};
use segq::departure::{atom_weights, effective_mean_service, DepartureModel, InterdepartureComponents};
use segq::power::{evaluate_grid, pso_search, select_best, DesignEvaluation, SearchOutcome};
use segq::queue::{arbitrary_epoch_distribution, DelayVariant, EpochMode, QueueAnalysis};
use segq::sim::{
    empirical_interdeparture, ks_distance, simulate_network, simulate_queue, NetworkConfig, NetworkFeed, NetworkStats,
    QueueSimStats, SimConfig,
};
use segq::{Scenario, ServiceSpec};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::output::{cell, header, join_thresholds, write_csv, write_json};
use crate::{CliError, Command};

/// Metadata written at the top of every JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub version: String,
    /// Seed of the randomized parts; `None` for purely analytic commands.
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub config: Config,
}

impl RunMeta {
    fn new(command: Command, config: &Config, randomized: bool) -> Self {
        Self {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: randomized.then_some(config.simulation.seed),
            horizon: randomized.then_some(config.simulation.horizon),
            config: config.clone(),
        }
    }
}

pub fn run_subcommand(command: Command, config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    match command {
        Command::Analyze => analyze(config, out),
        Command::Depart => depart(config, out),
        Command::Channel => channel(config, out),
        Command::Optimize => optimize(config, out),
        Command::Simulate => simulate(config, out),
        Command::Validate => validate(config, out),
    }
}

fn run_analysis(config: &Config, services: &ServiceSpec) -> Result<QueueAnalysis, CliError> {
    let s = config.scenario();
    Ok(QueueAnalysis::run(&s.policy, services, &s.arrivals, config.analysis.delay_variant, config.analysis.epoch_mode)?)
}

fn other_mode(mode: EpochMode) -> EpochMode {
    match mode {
        EpochMode::Raw => EpochMode::Renormalized,
        EpochMode::Renormalized => EpochMode::Raw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub meta: RunMeta,
    pub idle_probability: f64,
    pub t_mean: f64,
    pub carried_load: f64,
    pub mean_system_time_transform_consistent: f64,
    pub mean_system_time_first_region_exclusive: f64,
    /// Post-departure mass in each service region.
    pub region_masses: Vec<f64>,
    pub analysis: QueueAnalysis,
}

/// Columns of `distributions.csv`.
pub const DISTRIBUTION_COLUMNS: [&str; 5] =
    ["state", "region", "post_departure", "arbitrary_epoch_raw", "arbitrary_epoch_renormalized"];

fn analyze(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let s = config.scenario();
    let a = run_analysis(config, &s.services)?;
    let alt = arbitrary_epoch_distribution(
        &a.post_departure,
        a.summary.carried_load,
        &s.policy,
        &s.services,
        &s.arrivals,
        other_mode(a.arbitrary_epoch.mode),
    )?;
    let (raw, renorm) = match a.arbitrary_epoch.mode {
        EpochMode::Raw => (&a.arbitrary_epoch.probs, &alt.probs),
        EpochMode::Renormalized => (&alt.probs, &a.arbitrary_epoch.probs),
    };
    let alternate = a.summary.alternate_system_time.unwrap_or(a.summary.mean_system_time);
    let (tc, fre) = match a.summary.variant {
        DelayVariant::TransformConsistent => (a.summary.mean_system_time, alternate),
        DelayVariant::FirstRegionExclusive => (alternate, a.summary.mean_system_time),
    };
    let p = a.post_departure.probs();
    write_csv(
        out,
        "distributions.csv",
        &header(&DISTRIBUTION_COLUMNS),
        (0..p.len()).map(|i| {
            [
                i.to_string(),
                s.policy.region_of(i.max(1)).to_string(),
                p[i].to_string(),
                raw.get(i).copied().unwrap_or(0.0).to_string(),
                renorm.get(i).copied().unwrap_or(0.0).to_string(),
            ]
        }),
    )?;
    let summary = AnalyzeSummary {
        meta: RunMeta::new(Command::Analyze, config, false),
        idle_probability: a.post_departure.idle(),
        t_mean: a.summary.t_mean,
        carried_load: a.summary.carried_load,
        mean_system_time_transform_consistent: tc,
        mean_system_time_first_region_exclusive: fre,
        region_masses: s.policy.region_masses(p),
        analysis: a,
    };
    write_json(out, "summary.json", &summary)?;
    Ok(vec![
        format!("idle probability p0      {:.6}", summary.idle_probability),
        format!("mean departure interval  {:.6e} s", summary.t_mean),
        format!("carried load             {:.6}", summary.carried_load),
        format!("E[W] transform-consistent  {:.6e} s", tc),
        format!("E[W] first-region-exclusive {:.6e} s", fre),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartSummary {
    pub meta: RunMeta,
    pub model: DepartureModel,
    pub components: InterdepartureComponents,
    pub mean: f64,
    pub atom_mass: f64,
    pub empty_mass: f64,
}

pub const LAPLACE_COLUMNS: [&str; 2] = ["s", "laplace"];
pub const DENSITY_COLUMNS: [&str; 3] = ["t", "empty_density", "empty_cdf"];

fn departure_model(config: &Config) -> Result<DepartureModel, CliError> {
    let a = run_analysis(config, &config.service_spec()?)?;
    Ok(DepartureModel::build(&a, &config.departure)?)
}

fn depart(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let model = departure_model(config)?;
    let lambda = model.lambda;
    write_csv(
        out,
        "laplace.csv",
        &header(&LAPLACE_COLUMNS),
        (0..=200).map(|i| {
            let s = 10.0 * lambda * i as f64 / 200.0;
            [s.to_string(), model.laplace(s).to_string()]
        }),
    )?;
    let t_end = model.empty.t1 + 10.0 / model.empty.alpha;
    write_csv(
        out,
        "density.csv",
        &header(&DENSITY_COLUMNS),
        (0..=500).map(|i| {
            let t = t_end * i as f64 / 500.0;
            [t.to_string(), model.empty.density(t).to_string(), model.empty.cumulative(t).to_string()]
        }),
    )?;
    let summary = DepartSummary {
        meta: RunMeta::new(Command::Depart, config, false),
        components: model.components()?,
        mean: model.mean(),
        atom_mass: model.atom_mass(),
        empty_mass: model.empty.mass(),
        model,
    };
    write_json(out, "departure.json", &summary)?;
    let mut lines = vec![
        format!("p0 {:.6}, t_E {:.6e} s, model mean {:.6e} s", summary.model.p0, summary.model.t_e, summary.mean),
        format!("A (busy) {:.6e} s, B (empty) {:.6e} s", summary.components.non_empty, summary.components.empty),
    ];
    lines.extend(summary.model.atoms.iter().map(|a| format!("atom at {:.6e} s  weight {:.6}", a.time, a.weight)));
    Ok(lines)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub meta: RunMeta,
    pub spec: ChannelSpec,
    pub per_queue_rate: f64,
    pub result: ChannelResult,
}

fn channel(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let model = departure_model(config)?;
    let spec = config.channel_spec()?;
    let result = analyze_channel(&model, &spec)?;
    let summary =
        ChannelSummary { meta: RunMeta::new(Command::Channel, config, false), spec, per_queue_rate: spec.per_queue_rate(), result };
    write_json(out, "channel.json", &summary)?;
    Ok(vec![format!(
        "sigma {:.6}, channel wait {:.6e} s ({} iterations, {:?})",
        result.sigma, result.wait, result.iterations, result.method
    )])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub meta: RunMeta,
    pub brute_force: SearchOutcome,
    pub pso: SearchOutcome,
    /// Both searches reached the same minimum NP.
    pub agree: bool,
}

pub const TRACE_COLUMNS: [&str; 3] = ["iteration", "best_np", "thresholds"];
pub const DESIGN_COLUMNS: [&str; 7] = ["thresholds", "np", "w_queue", "w_channel", "w_system", "feasible", "reason"];

fn optimize(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let ctx = config.design_context();
    let designs: Vec<DesignEvaluation> = evaluate_grid(&ctx);
    write_csv(
        out,
        "designs.csv",
        &header(&DESIGN_COLUMNS),
        designs.iter().map(|d| {
            [
                join_thresholds(&d.thresholds),
                cell(d.np),
                cell(d.w_queue),
                cell(d.w_channel),
                cell(d.w_system),
                d.feasible.to_string(),
                d.reason.clone().unwrap_or_default(),
            ]
        }),
    )?;
    let brute_force = SearchOutcome { best: select_best(&designs), evaluations: designs.len(), trace: Vec::new() };
    let pso = pso_search(&ctx, &config.pso).map_err(|e| CliError::Input(e.to_string()))?;
    write_csv(
        out,
        "pso_trace.csv",
        &header(&TRACE_COLUMNS),
        pso.trace.iter().map(|r| [r.iteration.to_string(), cell(r.best_np), join_thresholds(&r.thresholds)]),
    )?;
    let np = |o: &SearchOutcome| o.best.as_ref().and_then(|b| b.np);
    let agree = match (np(&brute_force), np(&pso)) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * a.abs().max(1.0),
        (None, None) => true,
        _ => false,
    };
    let summary = OptimizeSummary { meta: RunMeta::new(Command::Optimize, config, true), brute_force, pso, agree };
    write_json(out, "optimize.json", &summary)?;
    let Some(best) = &summary.brute_force.best else {
        return Err(CliError::Model(format!(
            "no feasible design: no threshold vector meets the delay bound {} s",
            config.optimize.w_bound
        )));
    };
    let describe = |label: &str, o: &SearchOutcome| match &o.best {
        Some(b) => format!(
            "{label}: thresholds {:?}, NP {:.6}, {} evaluations",
            b.thresholds,
            b.np.unwrap_or(f64::NAN),
            o.evaluations
        ),
        None => format!("{label}: no feasible design found, {} evaluations", o.evaluations),
    };
    Ok(vec![
        describe("brute force", &summary.brute_force),
        describe("particle swarm", &summary.pso),
        format!(
            "queue delay {:.6e} s, system delay {} (bound {} s)",
            best.w_queue.unwrap_or(f64::NAN),
            best.w_system.map_or("n/a".to_string(), |w| format!("{w:.6e} s")),
            config.optimize.w_bound
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub meta: RunMeta,
    /// Per-sample vectors are written to CSV, not here.
    pub queue: QueueSimStats,
    pub network: NetworkStats,
    pub little_relative_error: f64,
}

pub const HISTOGRAM_COLUMNS: [&str; 3] = ["length", "time_fraction", "waiting_fraction"];
pub const INTERDEPARTURE_COLUMNS: [&str; 3] = ["gap", "found_empty", "region"];

fn network_config(config: &Config, feed: SimConfig) -> NetworkConfig {
    NetworkConfig {
        feed: NetworkFeed::Segmented(SimConfig { record_interdepartures: false, ..feed }),
        queues: config.channel.queues,
        channel_rate: config.channel.rate,
        slot_mode: config.simulation.slot_mode,
        seed: config.simulation.seed,
    }
}

fn simulate(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let sim = config.sim_config();
    let mut queue = simulate_queue(&sim)?;
    let network = simulate_network(&network_config(config, sim))?;
    let waiting = queue.waiting_histogram();
    write_csv(
        out,
        "length_histogram.csv",
        &header(&HISTOGRAM_COLUMNS),
        queue.length_histogram.iter().enumerate().map(|(n, p)| {
            [n.to_string(), p.to_string(), waiting.get(n).copied().unwrap_or(0.0).to_string()]
        }),
    )?;
    if config.simulation.record_samples {
        write_csv(
            out,
            "interdepartures.csv",
            &header(&INTERDEPARTURE_COLUMNS),
            queue.interdepartures.iter().map(|s| [s.gap.to_string(), s.found_empty.to_string(), s.region.to_string()]),
        )?;
    }
    queue.interdepartures = Vec::new();
    queue.departure_times = Vec::new();
    let summary = SimulateSummary {
        meta: RunMeta::new(Command::Simulate, config, true),
        little_relative_error: queue.little_relative_error(),
        queue,
        network,
    };
    write_json(out, "simulate.json", &summary)?;
    let q = &summary.queue;
    Ok(vec![
        format!("seed {}, {} departures measured", q.seed, q.departures),
        format!("sojourn {:.6e} ± {:.2e} s, blocking {:.3e}", q.sojourn.mean, q.sojourn.half_width, q.blocking_fraction),
        format!("mean gap {:.6e} s (empty {:.6e}, busy {:.6e})", q.mean_interdeparture, q.mean_gap_empty, q.mean_gap_non_empty),
        format!("channel wait {:.6e} ± {:.2e} s", summary.network.wait.mean, summary.network.wait.half_width),
    ])
}

/// How the error of a validation row is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// `|analytic / simulated - 1|`.
    Relative,
    /// A distance that is already dimensionless.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub analytic: f64,
    pub simulated: f64,
    pub error: f64,
    pub kind: ErrorKind,
    pub tolerance: f64,
    pub pass: bool,
}

impl ValidationRow {
    fn relative(quantity: &str, analytic: f64, simulated: f64, tolerance: f64) -> Self {
        let error = (analytic / simulated - 1.0).abs();
        Self {
            quantity: quantity.into(),
            analytic,
            simulated,
            error,
            kind: ErrorKind::Relative,
            tolerance,
            pass: error < tolerance,
        }
    }

    /// `distance` compared against zero.
    fn distance(quantity: &str, distance: f64, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            analytic: 0.0,
            simulated: distance,
            error: distance,
            kind: ErrorKind::Absolute,
            tolerance,
            pass: distance <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateSummary {
    pub meta: RunMeta,
    pub rows: Vec<ValidationRow>,
    pub all_pass: bool,
}

pub const VALIDATION_COLUMNS: [&str; 7] = ["quantity", "analytic", "simulated", "error", "kind", "tolerance", "pass"];

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n).map(|i| (a.get(i).unwrap_or(&0.0) - b.get(i).unwrap_or(&0.0)).abs()).sum::<f64>()
}

fn validation_rows(config: &Config) -> Result<Vec<ValidationRow>, CliError> {
    let s: Scenario = config.scenario();
    let a = run_analysis(config, &s.services)?;
    let model = DepartureModel::build(&a, &config.departure)?;
    let parts = model.components()?;
    let t_e = effective_mean_service(&a.post_departure, &s.policy, &s.services)?;
    let sim = simulate_queue(&config.sim_config())?;

    let mut rows = vec![
        ValidationRow::relative("mean system time", a.summary.mean_system_time, sim.sojourn.mean, 0.02),
        ValidationRow::relative("mean inter-departure time", a.summary.t_mean, sim.mean_interdeparture, 0.01),
        ValidationRow::relative("mean gap after busy departure", parts.non_empty, sim.mean_gap_non_empty, 0.02),
        ValidationRow::relative("mean gap after empty arrival", parts.empty, sim.mean_gap_empty, 0.02),
        ValidationRow::relative("effective service time", t_e, sim.mean_service, 0.01),
        ValidationRow::relative("carried load", a.summary.carried_load, sim.busy_fraction, 0.01),
        ValidationRow::distance(
            "waiting-count law (total variation)",
            total_variation(&a.arbitrary_epoch.probs, &sim.waiting_histogram()),
            0.02,
        ),
    ];

    // Atoms and the empty-arrival density are checked where the model is
    // exact in shape: the same scenario with constant service times.
    let constant = s.services.deterministic_counterpart();
    let ca = run_analysis(config, &constant)?;
    let cmodel = DepartureModel::build(&ca, &config.departure)?;
    let weights = atom_weights(&ca.post_departure, &s.policy, &constant)?;
    let mut csim = config.sim_config();
    csim.services = constant;
    csim.record_interdepartures = true;
    let cstats = simulate_queue(&csim)?;
    let split = empirical_interdeparture(&cstats.interdepartures, 1e-3, true)?;
    let atom_err = weights
        .iter()
        .map(|w| {
            let seen = split
                .non_empty_atoms
                .iter()
                .find(|atom| (atom.0 - w.time).abs() <= 1e-9 * w.time.max(1.0))
                .map_or(0.0, |atom| atom.1 / split.non_empty_fraction);
            (seen - w.weight).abs()
        })
        .fold(0.0, f64::max);
    rows.push(ValidationRow::distance("atom weights, constant services (max error)", atom_err, 0.02));
    let ks = ks_distance(&split.empty_gaps, |t| cmodel.empty.cumulative(t) / cmodel.p0);
    rows.push(ValidationRow::distance("empty-arrival law, constant services (KS)", ks, 0.1));

    let predicted = analyze_channel(&model, &config.channel_spec()?)?;
    let net = simulate_network(&network_config(config, config.sim_config()))?;
    rows.push(ValidationRow::relative("channel wait", predicted.wait, net.wait.mean, 0.10));
    Ok(rows)
}

fn validate(config: &Config, out: &Path) -> Result<Vec<String>, CliError> {
    let rows = validation_rows(config)?;
    write_csv(
        out,
        "validate.csv",
        &header(&VALIDATION_COLUMNS),
        rows.iter().map(|r| {
            [
                r.quantity.clone(),
                r.analytic.to_string(),
                r.simulated.to_string(),
                r.error.to_string(),
                serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                r.tolerance.to_string(),
                r.pass.to_string(),
            ]
        }),
    )?;
    let all_pass = rows.iter().all(|r| r.pass);
    let summary = ValidateSummary { meta: RunMeta::new(Command::Validate, config, true), rows, all_pass };
    write_json(out, "validate.json", &summary)?;
    let mut lines = vec![format!(
        "{:<46} {:>13} {:>13} {:>10} {:>9}  result",
        "quantity", "analytic", "simulated", "error", "tolerance"
    )];
    for r in &summary.rows {
        lines.push(format!(
            "{:<46} {:>13.6e} {:>13.6e} {:>10.2e} {:>9}  {}",
            r.quantity,
            r.analytic,
            r.simulated,
            r.error,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    if !all_pass {
        let failed: Vec<&str> = summary.rows.iter().filter(|r| !r.pass).map(|r| r.quantity.as_str()).collect();
        return Err(CliError::Model(format!(
            "{}\nvalidation failed for: {}",
            lines.join("\n"),
            failed.join(", ")
        )));
    }
    Ok(lines)
}
