//! In-process metrics recorder: per-action call latencies tagged by binding,
//! and end-to-end request latencies. Samples are kept raw so every derived
//! statistic can be recomputed.

use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingTag {
    Local,
    Remote,
}

impl BindingTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingTag::Local => "local",
            BindingTag::Remote => "remote",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    /// Recorder-wide sequence number; strictly increasing.
    pub seq: u64,
    /// Completion time, microseconds since the recorder started.
    pub at_us: u64,
    pub latency_us: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricsWindow {
    pub count: usize,
    pub mean_us: f64,
    pub p99_us: f64,
    pub throughput_qps: f64,
}

impl MetricsWindow {
    /// Statistics over `latencies` observed during `span`.
    pub fn from_latencies(latencies: &[f64], span: Duration) -> MetricsWindow {
        if latencies.is_empty() {
            return MetricsWindow::default();
        }
        let secs = span.as_secs_f64();
        MetricsWindow {
            count: latencies.len(),
            mean_us: mean(latencies),
            p99_us: percentile(latencies, 0.99),
            throughput_qps: if secs > 0.0 { latencies.len() as f64 / secs } else { 0.0 },
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Median; an even count averages the two middle values.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

struct Inner {
    seq: u64,
    requests: VecDeque<Sample>,
    actions: HashMap<(String, BindingTag), VecDeque<Sample>>,
}

pub struct MetricsRecorder {
    start: Instant,
    capacity: usize,
    inner: Mutex<Inner>,
}

impl Default for MetricsRecorder {
    fn default() -> Self {
        MetricsRecorder::new(1 << 20)
    }
}

impl MetricsRecorder {
    /// Keeps at most `capacity` samples per series; older ones are dropped.
    pub fn new(capacity: usize) -> Self {
        MetricsRecorder {
            start: Instant::now(),
            capacity: capacity.max(1),
            inner: Mutex::new(Inner {
                seq: 0,
                requests: VecDeque::new(),
                actions: HashMap::new(),
            }),
        }
    }

    pub fn elapsed_us(&self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }

    /// The sequence number the next sample will receive.
    pub fn mark(&self) -> u64 {
        self.inner.lock().seq
    }

    fn sample(&self, inner: &mut Inner, latency: Duration) -> Sample {
        let s = Sample {
            seq: inner.seq,
            at_us: self.elapsed_us(),
            latency_us: latency.as_secs_f64() * 1e6,
        };
        inner.seq += 1;
        s
    }

    pub fn record_request(&self, latency: Duration) {
        let mut inner = self.inner.lock();
        let s = self.sample(&mut inner, latency);
        push_capped(&mut inner.requests, s, self.capacity);
    }

    pub fn record_action(&self, name: &str, binding: BindingTag, latency: Duration) {
        let mut inner = self.inner.lock();
        let s = self.sample(&mut inner, latency);
        let series = inner.actions.entry((name.to_owned(), binding)).or_default();
        push_capped(series, s, self.capacity);
    }

    /// End-to-end request samples with `seq >= from`.
    pub fn requests_since(&self, from: u64) -> Vec<Sample> {
        let inner = self.inner.lock();
        inner.requests.iter().filter(|s| s.seq >= from).copied().collect()
    }

    pub fn request_count_since(&self, from: u64) -> usize {
        let inner = self.inner.lock();
        inner.requests.iter().rev().take_while(|s| s.seq >= from).count()
    }

    pub fn action_samples(&self, name: &str, binding: BindingTag) -> Vec<Sample> {
        let inner = self.inner.lock();
        inner
            .actions
            .get(&(name.to_owned(), binding))
            .map(|d| d.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Calls per action since `from`, over both bindings.
    pub fn action_utilization(&self, from: u64) -> HashMap<String, usize> {
        let inner = self.inner.lock();
        let mut out: HashMap<String, usize> = HashMap::new();
        for ((name, _), series) in &inner.actions {
            *out.entry(name.clone()).or_default() += series.iter().filter(|s| s.seq >= from).count();
        }
        out
    }

    /// Window over request samples with `seq >= from`, throughput measured
    /// from the first to the last completion.
    pub fn request_window(&self, from: u64) -> MetricsWindow {
        window_of(&self.requests_since(from))
    }
}

pub fn window_of(samples: &[Sample]) -> MetricsWindow {
    let latencies: Vec<f64> = samples.iter().map(|s| s.latency_us).collect();
    let span = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => {
            // the first sample started one latency before it completed
            let begin = a.at_us as f64 - a.latency_us;
            Duration::from_secs_f64(((b.at_us as f64 - begin) / 1e6).max(0.0))
        }
        _ => Duration::ZERO,
    };
    MetricsWindow::from_latencies(&latencies, span)
}

fn push_capped(q: &mut VecDeque<Sample>, s: Sample, cap: usize) {
    if q.len() == cap {
        q.pop_front();
    }
    q.push_back(s);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&xs, 0.99), 99.0);
        assert_eq!(percentile(&xs, 0.5), 50.0);
        assert_eq!(percentile(&[7.0], 0.99), 7.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn window_counts_match_recorded_requests() {
        let m = MetricsRecorder::default();
        m.record_request(Duration::from_micros(100));
        let mark = m.mark();
        for _ in 0..5 {
            m.record_request(Duration::from_micros(200));
        }
        m.record_action("a", BindingTag::Local, Duration::from_micros(1));
        let w = m.request_window(mark);
        assert_eq!(w.count, 5);
        assert_eq!(m.request_count_since(mark), 5);
        assert!((w.mean_us - 200.0).abs() < 1e-9);
        assert_eq!(m.action_utilization(0)["a"], 1);
    }

    #[test]
    fn capacity_bounds_each_series() {
        let m = MetricsRecorder::new(3);
        for i in 0..10 {
            m.record_request(Duration::from_micros(i));
        }
        let s = m.requests_since(0);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].seq, 7);
    }
}
