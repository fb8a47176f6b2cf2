use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::queue::InterdepartureSample;
use crate::error::{positive, Error, Result};

/// Empirical inter-departure law split by arrival class. All masses are
/// fractions of the full sample, so the two parts together sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSplit {
    pub empty_fraction: f64,
    pub non_empty_fraction: f64,
    /// `(bin start, mass)` of empty-arrival gaps.
    pub empty_bins: Vec<(f64, f64)>,
    /// `(location, mass)` of non-empty gaps: exact-value clusters for
    /// constant services, bins otherwise.
    pub non_empty_atoms: Vec<(f64, f64)>,
    /// Sorted empty-arrival gaps.
    pub empty_gaps: Vec<f64>,
}

fn binned(values: &[f64], width: f64, total: f64) -> Vec<(f64, f64)> {
    let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
    for &v in values {
        *bins.entry((v / width).floor() as i64).or_default() += 1;
    }
    bins.into_iter().map(|(b, c)| (b as f64 * width, c as f64 / total)).collect()
}

fn clustered(values: &mut [f64], total: f64) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || values[i] - values[start] > 1e-9 * values[start].abs().max(1.0);
        if split {
            let group = &values[start..i];
            out.push((group.iter().sum::<f64>() / group.len() as f64, group.len() as f64 / total));
            start = i;
        }
    }
    out
}

pub fn empirical_interdeparture(
    samples: &[InterdepartureSample],
    bin_width: f64,
    constant_services: bool,
) -> Result<EmpiricalSplit> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    positive("bin width", bin_width)?;
    let total = samples.len() as f64;
    let mut empty_gaps: Vec<f64> = samples.iter().filter(|s| s.found_empty).map(|s| s.gap).collect();
    let mut busy: Vec<f64> = samples.iter().filter(|s| !s.found_empty).map(|s| s.gap).collect();
    empty_gaps.sort_by(f64::total_cmp);
    let non_empty_atoms = if constant_services { clustered(&mut busy, total) } else { binned(&busy, bin_width, total) };
    Ok(EmpiricalSplit {
        empty_fraction: empty_gaps.len() as f64 / total,
        non_empty_fraction: busy.len() as f64 / total,
        empty_bins: binned(&empty_gaps, bin_width, total),
        non_empty_atoms,
        empty_gaps,
    })
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
