//! Composite inter-departure law of the segmented queue.
//!
//! A departure whose packet found the queue busy leaves after one service,
//! modelled as atoms at each region's mean service time. A departure whose
//! packet arrived to an empty queue follows a two-piece exponential density
//!
//! ```text
//! f_E(t) = B e^{-βt}  on [t0, t1)
//!        = C e^{-αt}  on [t1, ∞)
//! ```
//!
//! with `α = λ`, `β = 2λμ/(λ+μ)` and `(B, C)` fixed by the mass `p0` and the
//! first moment `p0 · (1/(p0 λ) - t_E/p0 + t_E)`.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::policy::ThresholdPolicy;
use crate::queue::{PostDepartureDist, QueueAnalysis};
use crate::service::ServiceSpec;

/// Default upper breakpoint of the empty-arrival density (s).
pub const DEFAULT_BREAKPOINT: f64 = 0.011;

/// Mean service time of the segmented queue, `t_E = Σ_k mass_k E[S_k]` with
/// region 0 including the empty state.
pub fn effective_mean_service(
    p: &PostDepartureDist,
    policy: &ThresholdPolicy,
    services: &ServiceSpec,
) -> Result<f64> {
    policy.check_regions(services.len())?;
    let masses = policy.region_masses(p.probs());
    Ok(masses.iter().zip(services.means()).map(|(m, s)| m * s).sum())
}

/// Conditional means of the two departure classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdepartureComponents {
    /// Packet arrived to a busy queue (`A = t_E`).
    pub non_empty: f64,
    /// Packet arrived to an empty queue (`B`).
    pub empty: f64,
    /// `(1 - p0) A + p0 B`, which reduces to `1/λ`.
    pub total: f64,
}

pub fn interdeparture_components(p0: f64, lambda: f64, t_e: f64) -> Result<InterdepartureComponents> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::DegenerateDecomposition(p0));
    }
    positive("arrival rate", lambda)?;
    positive("effective mean service", t_e)?;
    let a = t_e;
    let b = 1.0 / (p0 * lambda) - t_e / p0 + t_e;
    Ok(InterdepartureComponents { non_empty: a, empty: b, total: (1.0 - p0) * a + p0 * b })
}

/// Point mass of the non-empty component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Location (s).
    pub time: f64,
    pub weight: f64,
}

/// One atom per region at its mean service time, weighted by the region's
/// share of the busy post-departure mass. Weights sum to one.
pub fn atom_weights(p: &PostDepartureDist, policy: &ThresholdPolicy, services: &ServiceSpec) -> Result<Vec<Atom>> {
    policy.check_regions(services.len())?;
    let p0 = p.idle();
    if !(p0 < 1.0) {
        return Err(Error::DegenerateDecomposition(p0));
    }
    let mut masses = policy.region_masses(p.probs());
    masses[0] -= p0;
    Ok(masses
        .iter()
        .zip(services.means())
        .map(|(m, time)| Atom { time, weight: (m / (1.0 - p0)).max(0.0) })
        .collect())
}

/// Parameters of the empty-arrival density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyComponent {
    /// Tail decay (1/s).
    pub alpha: f64,
    /// Decay on `[t0, t1)` (1/s).
    pub beta: f64,
    pub t0: f64,
    pub t1: f64,
    /// Amplitude on `[t0, t1)` (1/s).
    pub amp_b: f64,
    /// Amplitude on `[t1, ∞)` (1/s).
    pub amp_c: f64,
    pub determinant: f64,
    /// Set when either amplitude came out negative; the density is then only
    /// a moment fit, not a proper density.
    pub negative_amplitude: bool,
}

struct PieceIntegrals {
    mass_b: f64,
    mass_c: f64,
    moment_b: f64,
    moment_c: f64,
}

fn piece_integrals(alpha: f64, beta: f64, t0: f64, t1: f64) -> PieceIntegrals {
    let e0 = (-beta * t0).exp();
    let e1 = (-beta * t1).exp();
    let ea = (-alpha * t1).exp();
    PieceIntegrals {
        mass_b: (e0 - e1) / beta,
        mass_c: ea / alpha,
        moment_b: e0 * (t0 / beta + 1.0 / (beta * beta)) - e1 * (t1 / beta + 1.0 / (beta * beta)),
        moment_c: ea * (t1 / alpha + 1.0 / (alpha * alpha)),
    }
}

/// Solves the 2×2 mass/moment system for the amplitudes.
pub fn empty_component_params(
    lambda: f64,
    mu_eff: f64,
    p0: f64,
    t_e: f64,
    t0: f64,
    t1: f64,
) -> Result<EmptyComponent> {
    positive("arrival rate", lambda)?;
    positive("effective service rate", mu_eff)?;
    positive("t0", t0)?;
    if !(t1 > t0) || !t1.is_finite() {
        return Err(Error::InvalidParameter { name: "t1 (must exceed t0)", value: t1 });
    }
    let target = interdeparture_components(p0, lambda, t_e)?.empty;

    let alpha = lambda;
    let beta = 2.0 * lambda * mu_eff / (lambda + mu_eff);
    let g = piece_integrals(alpha, beta, t0, t1);
    let det = g.mass_b * g.moment_c - g.mass_c * g.moment_b;
    if !(det.abs() > 1e-14 * (g.mass_b * g.moment_c).abs()) {
        return Err(Error::SingularMomentSystem(det));
    }
    let mass = p0;
    let moment = p0 * target;
    let amp_b = (mass * g.moment_c - g.mass_c * moment) / det;
    let amp_c = (g.mass_b * moment - g.moment_b * mass) / det;
    Ok(EmptyComponent {
        alpha,
        beta,
        t0,
        t1,
        amp_b,
        amp_c,
        determinant: det,
        negative_amplitude: amp_b < 0.0 || amp_c < 0.0,
    })
}

impl EmptyComponent {
    pub fn density(&self, t: f64) -> f64 {
        if t < self.t0 {
            0.0
        } else if t < self.t1 {
            self.amp_b * (-self.beta * t).exp()
        } else {
            self.amp_c * (-self.alpha * t).exp()
        }
    }

    /// Mass on `[0, t]`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let g = piece_integrals(self.alpha, self.beta, self.t0, self.t1);
        if t < self.t0 {
            0.0
        } else if t < self.t1 {
            self.amp_b * ((-self.beta * self.t0).exp() - (-self.beta * t).exp()) / self.beta
        } else {
            self.amp_b * g.mass_b
                + self.amp_c * ((-self.alpha * self.t1).exp() - (-self.alpha * t).exp()) / self.alpha
        }
    }

    pub fn mass(&self) -> f64 {
        let g = piece_integrals(self.alpha, self.beta, self.t0, self.t1);
        self.amp_b * g.mass_b + self.amp_c * g.mass_c
    }

    pub fn first_moment(&self) -> f64 {
        let g = piece_integrals(self.alpha, self.beta, self.t0, self.t1);
        self.amp_b * g.moment_b + self.amp_c * g.moment_c
    }

    pub fn laplace(&self, s: f64) -> f64 {
        let sb = s + self.beta;
        let sa = s + self.alpha;
        self.amp_b * ((-sb * self.t0).exp() - (-sb * self.t1).exp()) / sb
            + self.amp_c * (-sa * self.t1).exp() / sa
    }
}

/// Which idle probability feeds the empty-arrival mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdleSource {
    #[default]
    PostDeparture,
    /// `π_0` of the renormalized arbitrary-epoch distribution.
    ArbitraryEpoch,
}

/// Tunables of the departure model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepartureOptions {
    /// Lower breakpoint; defaults to the region-0 mean service time.
    pub t0: Option<f64>,
    pub t1: f64,
    /// Service rate inside `β`; defaults to `1 / t_E`.
    pub mu_eff: Option<f64>,
    pub idle_source: IdleSource,
}

impl Default for DepartureOptions {
    fn default() -> Self {
        Self { t0: None, t1: DEFAULT_BREAKPOINT, mu_eff: None, idle_source: IdleSource::PostDeparture }
    }
}

/// Inter-departure law: atoms carrying `1 - p0` plus the empty-arrival density carrying `p0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartureModel {
    pub lambda: f64,
    pub p0: f64,
    pub t_e: f64,
    /// Atom locations with absolute masses (summing to `1 - p0`).
    pub atoms: Vec<Atom>,
    pub empty: EmptyComponent,
}

impl DepartureModel {
    pub fn build(analysis: &QueueAnalysis, options: &DepartureOptions) -> Result<Self> {
        let p = &analysis.post_departure;
        let lambda = analysis.arrivals.rate();
        let t_e = effective_mean_service(p, &analysis.policy, &analysis.services)?;
        let p0 = match options.idle_source {
            IdleSource::PostDeparture => p.idle(),
            IdleSource::ArbitraryEpoch => analysis.arbitrary_epoch.probs[0],
        };
        let weights = atom_weights(p, &analysis.policy, &analysis.services)?;
        let t0 = options.t0.unwrap_or_else(|| analysis.services.means()[0]);
        let mu_eff = options.mu_eff.unwrap_or(1.0 / t_e);
        let empty = empty_component_params(lambda, mu_eff, p0, t_e, t0, options.t1)?;
        let atoms = weights
            .into_iter()
            .map(|a| Atom { time: a.time, weight: (1.0 - p0) * a.weight })
            .collect();
        Ok(Self { lambda, p0, t_e, atoms, empty })
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.time).sum::<f64>() + self.empty.first_moment()
    }

    pub fn laplace(&self, s: f64) -> f64 {
        departure_laplace(self, s)
    }

    pub fn components(&self) -> Result<InterdepartureComponents> {
        interdeparture_components(self.p0, self.lambda, self.t_e)
    }
}

/// `L(s) = Σ_k m_k e^{-s t_k} + B (e^{-(s+β)t0} - e^{-(s+β)t1})/(s+β) + C e^{-(s+α)t1}/(s+α)`.
pub fn departure_laplace(model: &DepartureModel, s: f64) -> f64 {
    model.atoms.iter().map(|a| a.weight * (-s * a.time).exp()).sum::<f64>() + model.empty.laplace(s)
}
