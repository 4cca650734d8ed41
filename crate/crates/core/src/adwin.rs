//! ADWIN adaptive windowing over values in `[0, 1]`.
//!
//! The window is stored as an exponential histogram: row `r` holds up to
//! `max_buckets` buckets, each summarizing `2^r` consecutive elements. After
//! every insertion all bucket boundaries are tested as a split into an older
//! part `W0` and a newer part `W1`; the oldest bucket is dropped while
//! `|mean(W0) - mean(W1)| >= sqrt(ln(4W/δ) / (2m))`, `m = 1/(1/n0 + 1/n1)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.002;
pub const DEFAULT_MAX_BUCKETS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    sum: f64,
    count: u64,
}

#[derive(Debug, Clone)]
pub struct AdwinDetector {
    delta: f64,
    max_buckets: usize,
    /// `rows[r]` holds buckets of size `2^r`, oldest at the front.
    rows: Vec<VecDeque<Bucket>>,
    total_count: u64,
    total_sum: f64,
}

impl Default for AdwinDetector {
    fn default() -> Self {
        Self::new(DEFAULT_DELTA)
    }
}

impl AdwinDetector {
    pub fn new(delta: f64) -> Self {
        Self::with_max_buckets(delta, DEFAULT_MAX_BUCKETS)
    }

    pub fn with_max_buckets(delta: f64, max_buckets: usize) -> Self {
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        assert!(max_buckets >= 2, "max_buckets must be at least 2");
        AdwinDetector {
            delta,
            max_buckets,
            rows: Vec::new(),
            total_count: 0,
            total_sum: 0.0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn window_size(&self) -> usize {
        self.total_count as usize
    }

    pub fn mean(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.total_sum / self.total_count as f64
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.total_count = 0;
        self.total_sum = 0.0;
    }

    /// Adds a value and returns whether the window was cut.
    pub fn add_element(&mut self, value: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("ADWIN input {value} outside [0,1]")));
        }
        self.insert(value);
        let mut cut = false;
        while self.find_cut() {
            self.drop_oldest();
            cut = true;
        }
        Ok(cut)
    }

    fn insert(&mut self, value: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_back(Bucket {
            sum: value,
            count: 1,
        });
        self.total_count += 1;
        self.total_sum += value;
        let mut r = 0;
        while self.rows[r].len() > self.max_buckets {
            let a = self.rows[r].pop_front().expect("overfull row");
            let b = self.rows[r].pop_front().expect("overfull row");
            if r + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[r + 1].push_back(Bucket {
                sum: a.sum + b.sum,
                count: a.count + b.count,
            });
            r += 1;
        }
    }

    fn drop_oldest(&mut self) {
        while let Some(last) = self.rows.last_mut() {
            if let Some(b) = last.pop_front() {
                self.total_count -= b.count;
                self.total_sum -= b.sum;
                if last.is_empty() {
                    self.rows.pop();
                }
                if self.total_count == 0 {
                    self.total_sum = 0.0;
                }
                return;
            }
            self.rows.pop();
        }
    }

    fn find_cut(&self) -> bool {
        if self.total_count < 2 {
            return false;
        }
        let w = self.total_count as f64;
        let log_term = (4.0 * w / self.delta).ln();
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        // oldest to newest: highest row first, front to back within a row
        for row in self.rows.iter().rev() {
            for b in row {
                n0 += b.count;
                s0 += b.sum;
                let n1 = self.total_count - n0;
                if n1 == 0 {
                    return false;
                }
                let (f0, f1) = (n0 as f64, n1 as f64);
                let mean0 = s0 / f0;
                let mean1 = (self.total_sum - s0) / f1;
                let m = 1.0 / (1.0 / f0 + 1.0 / f1);
                let eps_cut = (log_term / (2.0 * m)).sqrt();
                if (mean0 - mean1).abs() >= eps_cut {
                    return true;
                }
            }
        }
        false
    }

    /// Checks the histogram invariants; used by tests.
    pub fn check_invariants(&self) -> bool {
        let mut count = 0;
        let mut sum = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() > self.max_buckets {
                return false;
            }
            for b in row {
                if b.count != 1u64 << r {
                    return false;
                }
                count += b.count;
                sum += b.sum;
            }
        }
        count == self.total_count && (sum - self.total_sum).abs() < 1e-9
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_stream_never_cuts() {
        let mut d = AdwinDetector::default();
        for _ in 0..5000 {
            assert!(!d.add_element(1.0).unwrap());
        }
        assert_eq!(d.window_size(), 5000);
    }

    #[test]
    fn window_size_basics() {
        let mut d = AdwinDetector::default();
        assert_eq!(d.window_size(), 0);
        for _ in 0..10 {
            d.add_element(0.0).unwrap();
        }
        assert_eq!(d.window_size(), 10);
        assert!(d.add_element(1.5).is_err());
    }

    #[test]
    fn step_change_is_cut_quickly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut d = AdwinDetector::new(0.002);
        for _ in 0..2000 {
            let bit = rng.random_bool(0.9);
            assert!(!d.add_element(bit as u8 as f64).unwrap());
        }
        let mut detected = None;
        for i in 0..2000 {
            let before = d.window_size();
            let bit = rng.random_bool(0.1);
            if d.add_element(bit as u8 as f64).unwrap() {
                assert!(d.window_size() < before + 1);
                detected.get_or_insert((i, d.window_size()));
            }
        }
        let (at, window) = detected.expect("drift detected");
        assert!(at < 300, "detected after {at}");
        assert!(window < 600);
    }

    proptest! {
        #[test]
        fn retained_window_is_a_suffix(bits in proptest::collection::vec(0u8..=1, 1..3000), flip in 0usize..3000) {
            let mut d = AdwinDetector::default();
            let mut history: Vec<f64> = Vec::new();
            let mut cut_happened = false;
            for (i, b) in bits.iter().enumerate() {
                // change the generating behaviour part-way to provoke cuts
                let v = if i >= flip { 1.0 - *b as f64 } else { *b as f64 };
                history.push(v);
                cut_happened |= d.add_element(v).unwrap();
                prop_assert!(d.check_invariants());
                let w = d.window_size();
                let suffix: f64 = history[history.len() - w..].iter().sum();
                prop_assert!((suffix / w as f64 - d.mean()).abs() < 1e-9);
                let bound = d.max_buckets as f64 * (1.0 + ((w + 1) as f64).log2());
                prop_assert!(d.bucket_count() as f64 <= bound);
            }
            if !cut_happened {
                prop_assert_eq!(d.window_size(), bits.len());
                let mean = history.iter().sum::<f64>() / history.len() as f64;
                prop_assert!((d.mean() - mean).abs() < 1e-12);
            }
        }
    }
}
