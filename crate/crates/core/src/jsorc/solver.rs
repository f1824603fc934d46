use serde::Serialize;

use super::{ComponentConfig, JsorcError, PolicyParams};
use crate::actions::ActionProfile;

/// Scores one candidate configuration; lower is better. Implementations
/// may apply the configuration and measure live traffic, or consult a model.
pub trait ConfigEvaluator {
    fn evaluate(&mut self, config: ComponentConfig) -> Result<f64, String>;
}

impl<F: FnMut(ComponentConfig) -> Result<f64, String>> ConfigEvaluator for F {
    fn evaluate(&mut self, config: ComponentConfig) -> Result<f64, String> {
        self(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Exhaustive,
    /// Our fallback above the exhaustive cap; not part of the original policy.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub config: ComponentConfig,
    pub method: SolveMethod,
    /// Every candidate that was scored, in evaluation order.
    pub scores: Vec<(ComponentConfig, f64)>,
}

impl Solution {
    pub fn score(&self) -> Option<f64> {
        self.scores.iter().find(|(c, _)| *c == self.config).map(|(_, s)| *s)
    }
}

/// All masks over `footprints.len()` actions whose local footprint fits.
pub fn feasible_configs(footprints: &[u64], budget: i64) -> Vec<ComponentConfig> {
    let n = footprints.len();
    assert!(n < 64, "too many actions to enumerate");
    (0..1u64 << n)
        .map(ComponentConfig)
        .filter(|c| c.feasible(footprints, budget))
        .collect()
}

/// The best-scoring candidate. Candidates within `tie` (relative) of the
/// best are tied; ties go to fewer local actions, then the lower mask.
pub fn pick_best(scored: &[(ComponentConfig, f64)], tie: f64) -> Option<ComponentConfig> {
    let best = scored.iter().map(|(_, s)| *s).min_by(f64::total_cmp)?;
    let limit = best + tie * best.abs();
    scored
        .iter()
        .filter(|(_, s)| *s <= limit)
        .map(|(c, _)| *c)
        .min_by_key(|c| (c.local_count(), c.0))
}

/// Localizes actions in descending cc order while the budget allows.
pub fn greedy_config(profiles: &[ActionProfile], budget: i64) -> ComponentConfig {
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|a, b| profiles[*b].cc.total_cmp(&profiles[*a].cc).then(a.cmp(b)));
    let mut left = budget.max(0) as u64;
    let mut mask = 0u64;
    for i in order {
        let f = profiles[i].mem_footprint_bytes;
        if profiles[i].cc > 1.0 && f <= left {
            left -= f;
            mask |= 1 << i;
        }
    }
    ComponentConfig(mask)
}

/// Chooses a configuration for `profiles` (in action order). Up to the
/// exhaustive cap every feasible mask is scored by `evaluator`; beyond it
/// the greedy placement is returned unevaluated.
pub fn solve_config(
    profiles: &[ActionProfile],
    params: &PolicyParams,
    budget: i64,
    evaluator: &mut dyn ConfigEvaluator,
) -> Result<Solution, JsorcError> {
    if budget < 0 {
        return Err(JsorcError::NoFeasibleConfig(budget));
    }
    if profiles.len() > params.max_exhaustive {
        return Ok(Solution {
            config: greedy_config(profiles, budget),
            method: SolveMethod::Greedy,
            scores: Vec::new(),
        });
    }
    let footprints: Vec<u64> = profiles.iter().map(|p| p.mem_footprint_bytes).collect();
    let mut scores = Vec::new();
    let mut last_err = None;
    for c in feasible_configs(&footprints, budget) {
        match evaluator.evaluate(c) {
            Ok(s) if s.is_finite() => scores.push((c, s)),
            Ok(s) => last_err = Some(format!("non-finite score {s} for {:#b}", c.0)),
            Err(e) => last_err = Some(e),
        }
    }
    let config = pick_best(&scores, params.tie_threshold)
        .ok_or_else(|| JsorcError::Evaluation(last_err.unwrap_or_else(|| "no candidates".into())))?;
    Ok(Solution {
        config,
        method: SolveMethod::Exhaustive,
        scores,
    })
}
