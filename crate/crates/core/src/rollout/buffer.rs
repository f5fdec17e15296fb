use rand::Rng as _;

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_CAPACITY: usize = 50_000;

/// One environment step as stored for IQN training.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.reward.is_finite() {
            return Err(Error::NonFinite("transition reward".into()));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Current contents in storage order (not insertion order once wrapped).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `batch_size` uniform draws with replacement. Any nonempty buffer can
    /// serve any batch size; the trainer enforces its own fill threshold.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::BufferUnderfilled {
                size: self.items.len(),
                requested: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| self.items[rng.gen_range(0..self.items.len())].clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn tr(reward: f64) -> Transition {
        Transition {
            obs: Observation::one_hot(2, 0),
            action: 0,
            reward,
            next_obs: Observation::one_hot(2, 1),
            done: false,
        }
    }

    #[test]
    fn single_item_repeats() {
        let mut buf = ReplayBuffer::new(8).unwrap();
        buf.push(tr(3.0)).unwrap();
        let mut rng = stream_rng(0, Stream::Iqn, 0);
        let b = buf.sample(4, &mut rng).unwrap();
        assert_eq!(b, vec![tr(3.0); 4]);
        let empty = ReplayBuffer::new(8).unwrap();
        assert!(matches!(empty.sample(4, &mut rng), Err(Error::BufferUnderfilled { .. })));
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(5).unwrap();
        for k in 0..7 {
            buf.push(tr(k as f64)).unwrap();
        }
        assert_eq!(buf.len(), 5);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert!(!rewards.contains(&0.0) && !rewards.contains(&1.0));
        assert!(rewards.contains(&6.0));
    }

    #[test]
    fn rejects_non_finite_reward() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        assert!(buf.push(tr(f64::NAN)).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for k in 0..10 {
            buf.push(tr(k as f64)).unwrap();
        }
        let a = buf.sample(16, &mut stream_rng(9, Stream::Iqn, 0)).unwrap();
        let b = buf.sample(16, &mut stream_rng(9, Stream::Iqn, 0)).unwrap();
        assert_eq!(a, b);
    }
}
