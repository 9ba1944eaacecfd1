//! Wall-clock measurement helpers: monotonic clock, warm-up exclusion,
//! medians over repetitions with dispersion.

use std::time::Instant;

#[derive(Debug, Clone, Copy)]
pub struct TimingStats {
    pub reps: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl TimingStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty());
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let median = if n % 2 == 1 {
            samples[n / 2]
        } else {
            0.5 * (samples[n / 2 - 1] + samples[n / 2])
        };
        Self {
            reps: n,
            mean_s: mean,
            std_s: std,
            median_s: median,
            min_s: samples[0],
            max_s: samples[n - 1],
        }
    }
}

/// Time `run` over `reps` repetitions after `warmup` unrecorded ones; a
/// fresh input from `setup` feeds every repetition and is not timed.
pub fn measure_with_setup<T>(
    warmup: usize,
    reps: usize,
    mut setup: impl FnMut() -> T,
    mut run: impl FnMut(T),
) -> TimingStats {
    for _ in 0..warmup {
        run(setup());
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let input = setup();
        let start = Instant::now();
        run(input);
        samples.push(start.elapsed().as_secs_f64());
    }
    TimingStats::from_samples(samples)
}

/// Time a self-contained closure.
pub fn measure(warmup: usize, reps: usize, mut run: impl FnMut()) -> TimingStats {
    measure_with_setup(warmup, reps, || (), |()| run())
}

/// Accumulates per-call durations interleaved with other work.
#[derive(Debug, Default)]
pub struct StepTimer {
    samples: Vec<f64>,
}

impl StepTimer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn time<R>(&mut self, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.samples.push(start.elapsed().as_secs_f64());
        out
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn stats(&self) -> Option<TimingStats> {
        if self.samples.is_empty() {
            None
        } else {
            Some(TimingStats::from_samples(self.samples.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_from_known_samples() {
        let s = TimingStats::from_samples(vec![3.0, 1.0, 2.0]);
        assert_eq!(s.median_s, 2.0);
        assert_eq!(s.min_s, 1.0);
        assert_eq!(s.max_s, 3.0);
        assert!((s.mean_s - 2.0).abs() < 1e-15);
    }

    #[test]
    fn measure_runs_the_closure() {
        let mut count = 0usize;
        let s = measure(2, 5, || count += 1);
        assert_eq!(count, 7);
        assert_eq!(s.reps, 5);
        assert!(s.std_s >= 0.0);
    }
}
