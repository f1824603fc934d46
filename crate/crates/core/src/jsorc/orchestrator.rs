use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{solve_config, ComponentConfig, ConfigEvaluator, JsorcError, Objective, PolicyParams, Reconfigurator, SolveMethod};
use crate::actions::ActionProfile;
use crate::metrics::{window_of, MetricsRecorder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// Unix time in milliseconds.
    pub timestamp: u64,
    pub phase: String,
    pub config_mask: u64,
    pub objective_value: Option<f64>,
    pub applied: bool,
}

/// Append-only decision record, mirrored to a JSON-lines file if given.
#[derive(Default)]
pub struct DecisionLog {
    file: Option<Mutex<File>>,
    entries: Mutex<Vec<Decision>>,
}

impl DecisionLog {
    pub fn in_memory() -> Self {
        DecisionLog::default()
    }

    pub fn to_file(path: &Path) -> io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(DecisionLog {
            file: Some(Mutex::new(f)),
            entries: Mutex::default(),
        })
    }

    pub fn append(&self, d: Decision) {
        if let Some(f) = &self.file {
            let mut line = serde_json::to_string(&d).expect("decisions serialize");
            line.push('\n');
            if let Err(e) = f.lock().write_all(line.as_bytes()) {
                log::warn!("decision log write failed: {e}");
            }
        }
        self.entries.lock().push(d);
    }

    pub fn entries(&self) -> Vec<Decision> {
        self.entries.lock().clone()
    }

    pub fn last(&self) -> Option<Decision> {
        self.entries.lock().last().cloned()
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// The dynamic policy: evaluation phases, selection, application, and
/// budget enforcement. Every configuration it applies is feasible under the
/// budget in force at that moment.
pub struct Orchestrator {
    reconf: Reconfigurator,
    profiles: Vec<ActionProfile>,
    params: PolicyParams,
    /// Held while applying so a budget change cannot interleave.
    budget: Mutex<i64>,
    log: DecisionLog,
    applied: Mutex<Vec<(ComponentConfig, i64)>>,
    phases: Mutex<Vec<(Instant, Option<Instant>)>>,
    epochs: AtomicU64,
}

impl Orchestrator {
    /// `profiles` must follow the reconfigurator's action order.
    pub fn new(reconf: Reconfigurator, profiles: Vec<ActionProfile>, params: PolicyParams, log: DecisionLog) -> Self {
        assert_eq!(reconf.actions().len(), profiles.len(), "one profile per action");
        Orchestrator {
            budget: Mutex::new(params.memory_budget_bytes),
            reconf,
            profiles,
            params,
            log,
            applied: Mutex::default(),
            phases: Mutex::default(),
            epochs: AtomicU64::new(0),
        }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn current(&self) -> ComponentConfig {
        self.reconf.current()
    }

    pub fn budget(&self) -> i64 {
        *self.budget.lock()
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn epochs(&self) -> u64 {
        self.epochs.load(Ordering::SeqCst)
    }

    /// Every applied configuration with the budget in force when applied.
    pub fn applied_history(&self) -> Vec<(ComponentConfig, i64)> {
        self.applied.lock().clone()
    }

    /// Start and end of every evaluation phase so far.
    pub fn evaluation_phases(&self) -> Vec<(Instant, Option<Instant>)> {
        self.phases.lock().clone()
    }

    fn record(&self, phase: &str, mask: ComponentConfig, value: Option<f64>, applied: bool) {
        self.log.append(Decision {
            timestamp: unix_ms(),
            phase: phase.to_owned(),
            config_mask: mask.0,
            objective_value: value,
            applied,
        });
    }

    fn apply_under(&self, budget: i64, mask: ComponentConfig) -> Result<(), JsorcError> {
        self.reconf.apply(mask, budget)?;
        self.applied.lock().push((mask, budget));
        Ok(())
    }

    fn apply(&self, mask: ComponentConfig) -> Result<(), JsorcError> {
        let budget = self.budget.lock();
        self.apply_under(*budget, mask)
    }

    /// Drops local actions, lowest cc first, until `mask` fits `budget`.
    fn shrink(&self, mask: ComponentConfig, budget: i64) -> ComponentConfig {
        let mut order: Vec<usize> = (0..self.profiles.len()).filter(|i| mask.is_local(*i)).collect();
        order.sort_by(|a, b| self.profiles[*a].cc.total_cmp(&self.profiles[*b].cc).then(a.cmp(b)));
        let mut m = mask;
        for i in order {
            if m.feasible(self.reconf.footprints(), budget) {
                break;
            }
            m = ComponentConfig(m.0 & !(1 << i));
        }
        m
    }

    /// Changes the budget and, if the applied configuration no longer
    /// fits, immediately applies a reduced one.
    pub fn set_budget(&self, budget: i64) -> Result<ComponentConfig, JsorcError> {
        let mut b = self.budget.lock();
        *b = budget;
        let cur = self.reconf.current();
        if cur.feasible(self.reconf.footprints(), budget) {
            return Ok(cur);
        }
        if budget < 0 {
            return Err(JsorcError::NoFeasibleConfig(budget));
        }
        let reduced = self.shrink(cur, budget);
        let result = self.apply_under(budget, reduced);
        self.record("budget", reduced, None, result.is_ok());
        result.map(|()| reduced)
    }

    /// One evaluation phase followed by applying its choice. On failure the
    /// configuration in force before the phase is restored.
    pub fn run_epoch(&self, evaluator: &mut dyn ConfigEvaluator) -> Result<ComponentConfig, JsorcError> {
        self.epochs.fetch_add(1, Ordering::SeqCst);
        let before = self.current();
        let budget = self.budget();
        self.phases.lock().push((Instant::now(), None));
        let mut trial = |c: ComponentConfig| -> Result<f64, String> {
            self.apply(c).map_err(|e| e.to_string())?;
            let score = evaluator.evaluate(c)?;
            self.record("evaluate", c, Some(score), true);
            Ok(score)
        };
        let solved = solve_config(&self.profiles, &self.params, budget, &mut trial);
        let outcome = solved.and_then(|s| {
            let phase = match s.method {
                SolveMethod::Exhaustive => "select",
                SolveMethod::Greedy => "greedy",
            };
            let applied = self.apply(s.config);
            self.record(phase, s.config, s.score(), applied.is_ok());
            applied.map(|()| s.config)
        });
        // the phase ends once its choice is in force
        if let Some(p) = self.phases.lock().last_mut() {
            p.1 = Some(Instant::now());
        }
        match outcome {
            Ok(c) => Ok(c),
            Err(e) => {
                log::warn!("orchestrator epoch failed: {e}");
                let budget = self.budget.lock();
                let keep = self.shrink(before, *budget);
                let restored = self.apply_under(*budget, keep).is_ok();
                self.record("error", keep, None, restored);
                Err(e)
            }
        }
    }

    pub fn status(&self) -> serde_json::Value {
        json!({
            "config_mask": self.current().0,
            "actions": self.reconf.actions(),
            "memory_budget_bytes": self.budget(),
            "epochs": self.epochs(),
            "last_decision": self.log.last(),
        })
    }
}

/// Scores a configuration from live end-to-end request latencies: after it
/// is applied, `skip` completions are ignored (they may have started under
/// the previous configuration) and the next `window` are measured.
pub struct LiveEvaluator {
    pub metrics: Arc<MetricsRecorder>,
    pub window: usize,
    pub skip: usize,
    pub objective: Objective,
    pub timeout: Duration,
    /// Set to abandon a wait, e.g. when traffic is about to stop.
    pub cancel: Arc<AtomicBool>,
}

impl LiveEvaluator {
    pub fn new(metrics: Arc<MetricsRecorder>, params: &PolicyParams, skip: usize, timeout: Duration) -> Self {
        LiveEvaluator {
            metrics,
            window: params.eval_window,
            skip,
            objective: params.objective,
            timeout,
            cancel: Arc::default(),
        }
    }
}

impl ConfigEvaluator for LiveEvaluator {
    fn evaluate(&mut self, _config: ComponentConfig) -> Result<f64, String> {
        let mark = self.metrics.mark();
        let need = self.skip + self.window.max(1);
        let deadline = Instant::now() + self.timeout;
        while self.metrics.request_count_since(mark) < need {
            if Instant::now() > deadline {
                return Err(format!("fewer than {need} requests within {:?}", self.timeout));
            }
            if self.cancel.load(Ordering::SeqCst) {
                return Err("evaluation cancelled".into());
            }
            thread::sleep(Duration::from_micros(500));
        }
        let samples = self.metrics.requests_since(mark);
        Ok(self.objective.score(&window_of(&samples[self.skip..need])))
    }
}

/// Background controller running one epoch per interval.
pub struct ControllerHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

pub fn spawn_controller(orch: Arc<Orchestrator>, mut evaluator: Box<dyn ConfigEvaluator + Send>) -> ControllerHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::Builder::new()
        .name("jsorc".into())
        .spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                let began = Instant::now();
                // failures are logged by the epoch and never stop the loop
                let _ = orch.run_epoch(&mut *evaluator);
                while !flag.load(Ordering::SeqCst) && began.elapsed() < orch.params().epoch_interval {
                    thread::sleep(Duration::from_millis(5));
                }
            }
        })
        .expect("spawn controller thread");
    ControllerHandle {
        stop,
        thread: Some(thread),
    }
}

impl ControllerHandle {
    /// Stops after the current epoch completes.
    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ControllerHandle {
    fn drop(&mut self) {
        self.halt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionRegistry, ManifestEntry};
    use crate::jsorc::{AnalyticModel, ModelEvaluator, StaticEndpoints};

    fn setup(n: usize, mem: u64) -> (Orchestrator, AnalyticModel) {
        let reg = Arc::new(ActionRegistry::default());
        let names: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
        for name in &names {
            ManifestEntry::synth(name, mem, 0.0, 0.0).install(&reg).unwrap();
        }
        let eps = Arc::new(StaticEndpoints::shared(&names, "127.0.0.1:9".parse().unwrap()));
        let reconf = Reconfigurator::new(names.clone(), reg, eps).unwrap();
        let profiles: Vec<ActionProfile> = (0..n)
            .map(|i| ActionProfile::new(&names[i], 1000.0, 1000.0 * (2.0 + i as f64), mem, 1))
            .collect();
        let model = AnalyticModel::from_profiles(&profiles);
        (
            Orchestrator::new(reconf, profiles, PolicyParams::default(), DecisionLog::in_memory()),
            model,
        )
    }

    #[test]
    fn epoch_applies_the_best_feasible_config() {
        let (o, model) = setup(3, 10);
        o.set_budget(20).unwrap();
        let mut ev = ModelEvaluator::new(model, 0.0, 1);
        // the two highest-cc actions fit
        assert_eq!(o.run_epoch(&mut ev).unwrap(), ComponentConfig(0b110));
        assert_eq!(o.current(), ComponentConfig(0b110));
        let log = o.log().entries();
        assert_eq!(log.iter().filter(|d| d.phase == "evaluate").count(), 7);
        assert_eq!(log.last().unwrap().phase, "select");
        assert!(log.last().unwrap().applied);
    }

    #[test]
    fn shrinking_budget_is_enforced_immediately() {
        let (o, model) = setup(3, 10);
        o.run_epoch(&mut ModelEvaluator::new(model, 0.0, 1)).unwrap();
        assert_eq!(o.current(), ComponentConfig(0b111));
        assert_eq!(o.set_budget(10).unwrap(), ComponentConfig(0b100));
        assert_eq!(o.log().last().unwrap().phase, "budget");
        for (mask, budget) in o.applied_history() {
            assert!(mask.footprint(&[10, 10, 10]) as i64 <= budget);
        }
    }

    #[test]
    fn failed_evaluation_keeps_previous_config() {
        let (o, _) = setup(2, 10);
        let mut failing = |_: ComponentConfig| -> Result<f64, String> { Err("no traffic".into()) };
        assert!(o.run_epoch(&mut failing).is_err());
        assert_eq!(o.current(), ComponentConfig(0b11));
        assert_eq!(o.log().last().unwrap().phase, "error");
    }
}
