use rand::Rng as _;

use crate::error::{Error, Result};
use crate::ingest::InteractionSet;
use crate::rng::Rng;

/// `u` prefers observed item `i` over unobserved item `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub u: u32,
    pub i: u32,
    pub j: u32,
}

/// Draws triples: a training pair uniformly, then a negative for its user by
/// rejection.
#[derive(Debug)]
pub struct TripleSampler<'a> {
    data: &'a InteractionSet,
    /// Pair indices whose user still has an unobserved item.
    eligible: Vec<usize>,
    attempts: u64,
}

impl<'a> TripleSampler<'a> {
    /// Users who have interacted with every item are skipped with a warning.
    pub fn new(data: &'a InteractionSet) -> Result<Self> {
        let k = data.num_items();
        let degrees = data.user_degrees();
        let saturated = degrees.iter().filter(|&&d| d >= k && d > 0).count();
        if saturated > 0 {
            log::warn!("{saturated} users interacted with every item and are skipped by negative sampling");
        }
        let eligible: Vec<usize> = (0..data.nnz()).filter(|&p| degrees[data.pairs()[p].0 as usize] < k).collect();
        if eligible.is_empty() {
            return Err(Error::Config("no training pair has a negative item to sample".into()));
        }
        Ok(Self {
            data,
            eligible,
            attempts: 0,
        })
    }

    /// Negative draws made so far, accepted or not.
    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn sample(&mut self, count: usize, rng: &mut Rng) -> Vec<Triple> {
        let k = self.data.num_items() as u32;
        (0..count)
            .map(|_| {
                let (u, i) = self.data.pairs()[self.eligible[rng.random_range(0..self.eligible.len())]];
                loop {
                    self.attempts += 1;
                    let j = rng.random_range(0..k);
                    if !self.data.contains(u, j) {
                        return Triple { u, i, j };
                    }
                }
            })
            .collect()
    }
}

pub fn sample_triples(train: &InteractionSet, count: usize, rng: &mut Rng) -> Result<Vec<Triple>> {
    Ok(TripleSampler::new(train)?.sample(count, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn forced_negative() {
        let data = InteractionSet::from_index_pairs(1, 2, vec![(0, 1)]).unwrap();
        let t = sample_triples(&data, 50, &mut rng_from_seed(1)).unwrap();
        assert!(t.iter().all(|t| *t == Triple { u: 0, i: 1, j: 0 }));
    }

    #[test]
    fn acceptance_rate_at_half_density() {
        let data = InteractionSet::from_index_pairs(1, 1000, (0..500).map(|i| (0, 2 * i)).collect()).unwrap();
        let mut s = TripleSampler::new(&data).unwrap();
        let draws = 1_000_000;
        let t = s.sample(draws, &mut rng_from_seed(7));
        assert!(t.iter().all(|t| t.j % 2 == 1 && t.i % 2 == 0));
        let rate = draws as f64 / s.attempts() as f64;
        assert!((rate - 0.5).abs() <= 0.01, "{rate}");
    }

    #[test]
    fn deterministic_and_skips_saturated_users() {
        let data = InteractionSet::from_index_pairs(2, 3, vec![(0, 0), (0, 1), (0, 2), (1, 0)]).unwrap();
        let a = sample_triples(&data, 100, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, sample_triples(&data, 100, &mut rng_from_seed(3)).unwrap());
        assert!(a.iter().all(|t| t.u == 1 && t.j != 0));
        let full = InteractionSet::from_index_pairs(1, 1, vec![(0, 0)]).unwrap();
        assert!(sample_triples(&full, 1, &mut rng_from_seed(0)).is_err());
    }
}
