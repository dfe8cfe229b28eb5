use serde::{Deserialize, Serialize};

/// Default density of geometric sampling.
pub const POINTS_PER_DECADE: u32 = 32;

/// Which steps of a trajectory get recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSchedule {
    All,
    /// Roughly log-spaced steps, always including `k = 1` and `k = k_max`.
    Geometric(u32),
}

impl Default for SampleSchedule {
    fn default() -> Self {
        SampleSchedule::Geometric(POINTS_PER_DECADE)
    }
}

impl SampleSchedule {
    /// Sorted, deduplicated steps in `1..=k_max` selected by this schedule.
    pub fn steps(&self, k_max: u64) -> Vec<u64> {
        match *self {
            SampleSchedule::All => (1..=k_max).collect(),
            SampleSchedule::Geometric(per_decade) => geometric_steps(1, k_max, per_decade),
        }
    }
}

/// Log-spaced integers in `[k_min, k_max]`, both ends included.
pub fn geometric_steps(k_min: u64, k_max: u64, per_decade: u32) -> Vec<u64> {
    let k_min = k_min.max(1);
    if k_max < k_min {
        return Vec::new();
    }
    let per_decade = per_decade.max(1) as f64;
    let lo = (k_min as f64).log10();
    let hi = (k_max as f64).log10();
    let n = ((hi - lo) * per_decade).ceil() as u64;
    let mut ks = Vec::with_capacity(n as usize + 2);
    ks.push(k_min);
    for i in 1..n {
        let k = 10f64.powf(lo + i as f64 / per_decade).round() as u64;
        if k > k_min && k < k_max {
            ks.push(k);
        }
    }
    ks.push(k_max);
    ks.dedup();
    ks
}
