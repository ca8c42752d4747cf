//! Uniform experience replay.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed-capacity ring buffer sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    min_size: usize,
    storage: Vec<T>,
    write_cursor: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize, min_size: usize) -> Result<Self> {
        if capacity == 0 || min_size == 0 {
            return Err(Error::config("replay capacity and minimum size must be positive"));
        }
        if min_size > capacity {
            return Err(Error::config(format!(
                "replay minimum size {min_size} exceeds capacity {capacity}"
            )));
        }
        Ok(Self {
            capacity,
            min_size,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            write_cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn is_ready(&self, batch_size: usize) -> bool {
        self.len() >= self.min_size.max(batch_size)
    }

    /// Stores a copy, overwriting the oldest entry once full.
    pub fn push(&mut self, item: T) {
        if self.storage.len() < self.capacity {
            self.storage.push(item);
        } else {
            self.storage[self.write_cursor] = item;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
    }

    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<T>> {
        let required = self.min_size.max(batch_size);
        if self.len() < required {
            return Err(Error::NotReady {
                count: self.len(),
                required,
            });
        }
        let n = self.len();
        Ok((0..batch_size)
            .map(|_| self.storage[rng.random_range(0..n)].clone())
            .collect())
    }

    /// Stored items, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &T> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_cursor
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2, 1).unwrap();
        for i in 1..=3 {
            b.push(i);
        }
        assert_eq!(b.iter_oldest_first().copied().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn count_before_full() {
        let mut b = ReplayBuffer::new(10, 1).unwrap();
        for i in 0..7 {
            b.push(i);
        }
        assert_eq!(b.len(), 7);
    }

    #[test]
    fn long_run_keeps_last_capacity_items() {
        for cap in 1..8 {
            let mut b = ReplayBuffer::new(cap, 1).unwrap();
            for i in 0..10 * cap {
                b.push(i);
            }
            let kept: Vec<_> = b.iter_oldest_first().copied().collect();
            assert_eq!(kept, (9 * cap..10 * cap).collect::<Vec<_>>());
        }
    }

    #[test]
    fn not_ready_gating() {
        let mut b = ReplayBuffer::new(100, 10).unwrap();
        let mut r = rng::from_seed(0);
        for i in 0..9 {
            b.push(i);
        }
        assert!(matches!(b.sample(4, &mut r), Err(Error::NotReady { count: 9, required: 10 })));
        b.push(9);
        assert!(b.sample(4, &mut r).is_ok());
        assert!(matches!(b.sample(32, &mut r), Err(Error::NotReady { required: 32, .. })));
    }

    #[test]
    fn single_item_repeats() {
        let mut b = ReplayBuffer::new(5, 1).unwrap();
        b.push(42);
        let mut r = rng::from_seed(1);
        let drawn: Vec<i32> = (0..4).flat_map(|_| b.sample(1, &mut r).unwrap()).collect();
        assert_eq!(drawn, vec![42; 4]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut b = ReplayBuffer::new(50, 1).unwrap();
        (0..50).for_each(|i| b.push(i));
        let a = b.sample(20, &mut rng::from_seed(9)).unwrap();
        let c = b.sample(20, &mut rng::from_seed(9)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn uniformity_chi_squared() {
        let mut b = ReplayBuffer::new(10, 1).unwrap();
        (0..10).for_each(|i| b.push(i));
        let mut r = rng::from_seed(2024);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n / 10 {
            for x in b.sample(10, &mut r).unwrap() {
                counts[x] += 1;
            }
        }
        let expected = n as f64 / 10.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.001, "chi2 = {stat}, p = {p}");
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(ReplayBuffer::<u8>::new(0, 1).is_err());
        assert!(ReplayBuffer::<u8>::new(5, 6).is_err());
    }
}
