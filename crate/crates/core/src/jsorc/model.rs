use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComponentConfig, ConfigEvaluator};
use crate::actions::ActionProfile;

/// Additive request latency: a fixed base plus, per action, its calls per
/// request times its local or remote latency.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticModel {
    pub base_us: f64,
    pub local_us: Vec<f64>,
    pub remote_us: Vec<f64>,
    pub calls_per_request: Vec<f64>,
}

impl AnalyticModel {
    pub fn from_profiles(profiles: &[ActionProfile]) -> Self {
        AnalyticModel {
            base_us: 0.0,
            local_us: profiles.iter().map(|p| p.local_latency_us).collect(),
            remote_us: profiles.iter().map(|p| p.remote_latency_us).collect(),
            calls_per_request: vec![1.0; profiles.len()],
        }
    }

    pub fn latency_us(&self, config: ComponentConfig) -> f64 {
        self.base_us
            + (0..self.local_us.len())
                .map(|i| {
                    let per_call = if config.is_local(i) { self.local_us[i] } else { self.remote_us[i] };
                    self.calls_per_request[i] * per_call
                })
                .sum::<f64>()
    }
}

/// Scores configurations from the model, with optional uniform relative
/// noise drawn from a seeded generator.
pub struct ModelEvaluator {
    pub model: AnalyticModel,
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl ModelEvaluator {
    pub fn new(model: AnalyticModel, noise: f64, seed: u64) -> Self {
        ModelEvaluator {
            model,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ConfigEvaluator for ModelEvaluator {
    fn evaluate(&mut self, config: ComponentConfig) -> Result<f64, String> {
        let jitter = if self.noise > 0.0 {
            self.rng.gen_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        Ok(self.model.latency_us(config) * (1.0 + jitter))
    }
}
