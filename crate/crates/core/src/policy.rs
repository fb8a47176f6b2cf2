//! Threshold policies and Poisson arrival specifications.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Partition of post-departure system lengths `0..=K` into service regions.
///
/// Region 0 covers `0..=L_1`, region `k` covers `L_k + 1..=L_{k+1}` and the
/// last region ends at the capacity `K`. Region indices are zero based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy", into = "RawPolicy")]
pub struct ThresholdPolicy {
    capacity: usize,
    thresholds: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    capacity: usize,
    thresholds: Vec<usize>,
}

impl TryFrom<RawPolicy> for ThresholdPolicy {
    type Error = Error;
    fn try_from(raw: RawPolicy) -> Result<Self> {
        ThresholdPolicy::new(raw.capacity, raw.thresholds)
    }
}

impl From<ThresholdPolicy> for RawPolicy {
    fn from(p: ThresholdPolicy) -> Self {
        RawPolicy { capacity: p.capacity, thresholds: p.thresholds }
    }
}

impl ThresholdPolicy {
    /// Requires `1 <= L_1 < L_2 < ... < L_{T-1} < K`.
    pub fn new(capacity: usize, thresholds: Vec<usize>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidPolicy("capacity K must be at least 1".into()));
        }
        if let Some(&first) = thresholds.first() {
            if first < 1 {
                return Err(Error::InvalidPolicy("thresholds must be at least 1".into()));
            }
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPolicy(format!(
                "thresholds must be strictly increasing (L_i < L_j for i < j), got {thresholds:?}"
            )));
        }
        if let Some(&last) = thresholds.last() {
            if last >= capacity {
                return Err(Error::InvalidPolicy(format!(
                    "largest threshold {last} must be below the capacity {capacity}"
                )));
            }
        }
        Ok(Self { capacity, thresholds })
    }

    /// A single region covering every state.
    pub fn single_region(capacity: usize) -> Result<Self> {
        Self::new(capacity, Vec::new())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    pub fn regions(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Upper boundary `L_k` of each region, ending with `K`.
    pub fn upper_bounds(&self) -> impl Iterator<Item = usize> + '_ {
        self.thresholds.iter().copied().chain(std::iter::once(self.capacity))
    }

    /// Region serving a customer whose service starts with `length` in system.
    /// Lengths above `K` fall in the last region.
    pub fn region_of(&self, length: usize) -> usize {
        self.thresholds.partition_point(|&l| l < length)
    }

    /// Inclusive state range `lo..=hi` of region `k` over `0..=K`.
    pub fn region_states(&self, region: usize) -> Result<std::ops::RangeInclusive<usize>> {
        if region >= self.regions() {
            return Err(Error::InvalidRegion { region, regions: self.regions() });
        }
        let lo = if region == 0 { 0 } else { self.thresholds[region - 1] + 1 };
        let hi = self.upper_bounds().nth(region).unwrap_or(self.capacity);
        Ok(lo..=hi)
    }

    /// Mass of `dist` (indexed by state `0..=K`) in each disjoint region.
    pub fn region_masses(&self, dist: &[f64]) -> Vec<f64> {
        let mut masses = vec![0.0; self.regions()];
        for (state, &p) in dist.iter().enumerate().take(self.capacity + 1) {
            masses[self.region_of(state)] += p;
        }
        masses
    }

    pub(crate) fn check_regions(&self, found: usize) -> Result<()> {
        if found == self.regions() {
            Ok(())
        } else {
            Err(Error::RegionMismatch { expected: self.regions(), found })
        }
    }
}

/// Poisson arrival stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    rate: f64,
}

impl ArrivalSpec {
    pub fn new(rate: f64) -> Result<Self> {
        Ok(Self { rate: positive("arrival rate", rate)? })
    }

    /// Packets per second.
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_lookup_covers_every_state() {
        let policy = ThresholdPolicy::new(10, vec![3, 7]).unwrap();
        let regions: Vec<_> = (0..=10).map(|i| policy.region_of(i)).collect();
        assert_eq!(regions, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2]);
        assert_eq!(policy.region_states(0).unwrap(), 0..=3);
        assert_eq!(policy.region_states(1).unwrap(), 4..=7);
        assert_eq!(policy.region_states(2).unwrap(), 8..=10);
        assert!(policy.region_states(3).is_err());
    }

    #[test]
    fn rejects_bad_thresholds() {
        assert!(ThresholdPolicy::new(10, vec![5, 3]).is_err());
        assert!(ThresholdPolicy::new(10, vec![4, 4]).is_err());
        assert!(ThresholdPolicy::new(10, vec![0, 4]).is_err());
        assert!(ThresholdPolicy::new(10, vec![3, 10]).is_err());
        assert!(ThresholdPolicy::new(0, vec![]).is_err());
        let err = ThresholdPolicy::new(10, vec![5, 3]).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn masses_partition_the_distribution() {
        let policy = ThresholdPolicy::new(5, vec![1, 3]).unwrap();
        let dist = [0.1, 0.2, 0.3, 0.1, 0.2, 0.1];
        let m = policy.region_masses(&dist);
        assert!((m[0] - 0.3).abs() < 1e-15);
        assert!((m[1] - 0.4).abs() < 1e-15);
        assert!((m[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn arrival_rate_must_be_positive() {
        assert!(ArrivalSpec::new(0.0).is_err());
        assert!(ArrivalSpec::new(f64::NAN).is_err());
        assert_eq!(ArrivalSpec::new(2.5).unwrap().rate(), 2.5);
    }

    #[test]
    fn serde_validates() {
        let bad: std::result::Result<ThresholdPolicy, _> =
            serde_json::from_str(r#"{"capacity":10,"thresholds":[5,3]}"#);
        assert!(bad.is_err());
    }
}
