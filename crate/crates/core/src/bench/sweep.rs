use serde::{Deserialize, Serialize};

use super::{span_s, BenchError, BenchRow, RequestSample, SampleRow, SyntheticApp, WorkloadSpec};
use super::workload::run_workload;
use crate::actions::ManifestEntry;
use crate::jsorc::{ComponentConfig, JsorcError};
use crate::storage::TierConfig;

/// Five-number summary; quartiles interpolate linearly between ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(xs: &[f64]) -> BoxStats {
    assert!(!xs.is_empty(), "box stats of nothing");
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    BoxStats {
        min: s[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: s[s.len() - 1],
    }
}

/// Box statistics of per-config mean latency for one local-count group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub local_count: u32,
    pub configs: usize,
    pub min_us: f64,
    pub q1_us: f64,
    pub median_us: f64,
    pub q3_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// One row per configuration, in mask order.
    pub rows: Vec<BenchRow>,
    /// One row per local count 0..=n.
    pub groups: Vec<GroupRow>,
    pub samples: Vec<(ComponentConfig, Vec<RequestSample>)>,
}

impl SweepResult {
    pub fn row(&self, mask: ComponentConfig) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.config_mask == Some(mask.0))
    }

    pub fn sample_rows(&self) -> Vec<SampleRow> {
        self.samples
            .iter()
            .flat_map(|(m, ss)| ss.iter().map(move |s| SampleRow::new("sweep", &format!("mask={}", m.0), s)))
            .collect()
    }
}

/// Applies every configuration of the actions in turn and runs the seeded
/// workload under it. With a budget, an infeasible configuration is an error.
pub fn bench_config_sweep(spec: &WorkloadSpec, actions: &[ManifestEntry], budget: Option<i64>) -> Result<SweepResult, BenchError> {
    spec.validate()?;
    let n = actions.len();
    if n > 12 {
        return Err(BenchError::Spec(format!("2^{n} configurations is over the sweep limit of 4096")));
    }
    let footprints: Vec<u64> = actions.iter().map(|a| a.mem_footprint_bytes).collect();
    let app = SyntheticApp::new(actions)?;
    let (rt, mut graphs) = app.runtime(spec, TierConfig::default())?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for mask in (0..1u64 << n).map(ComponentConfig) {
        if let Some(b) = budget {
            if !mask.feasible(&footprints, b) {
                return Err(JsorcError::NoFeasibleConfig(b).into());
            }
        }
        app.apply_static(mask)?;
        let ss = run_workload(&rt, spec, &mut graphs)?;
        let refs: Vec<&RequestSample> = ss.iter().collect();
        let mut row = BenchRow::from_samples("sweep", &format!("mask={}", mask.0), "all", &refs, span_s(&ss));
        row.config_mask = Some(mask.0);
        row.local_count = Some(mask.local_count());
        rows.push(row);
        samples.push((mask, ss));
    }
    let groups = (0..=n as u32)
        .map(|k| {
            let means: Vec<f64> = rows.iter().filter(|r| r.local_count == Some(k)).map(|r| r.mean_us).collect();
            let b = box_stats(&means);
            GroupRow {
                local_count: k,
                configs: means.len(),
                min_us: b.min,
                q1_us: b.q1,
                median_us: b.median,
                q3_us: b.q3,
                max_us: b.max,
            }
        })
        .collect();
    Ok(SweepResult { rows, groups, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let b = box_stats(&[1.0, 2.0]);
        assert_eq!(b.median, 1.5);
        assert_eq!(box_stats(&[7.0]).q3, 7.0);
    }
}
