//! Synthetic block-structured interaction data.
//!
//! Users and items are split into `blocks` equal groups. Each user picks a
//! center item in its own block and draws interactions from a window of
//! consecutive items around it (wrapping inside the block), except that a
//! `noise` fraction of draws is uniform over the whole catalog.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::ingest::InteractionSet;
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockConfig {
    pub users: usize,
    pub items: usize,
    pub blocks: usize,
    /// Distinct interactions per user.
    pub per_user: usize,
    pub window: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            users: 300,
            items: 200,
            blocks: 2,
            per_user: 16,
            window: 20,
            noise: 0.05,
            seed: 0,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.users < self.blocks || self.items < self.blocks {
            return Err(Error::Config("need at least one user and item per block".into()));
        }
        let block_items = self.items / self.blocks;
        if self.window == 0 || self.window > block_items {
            return Err(Error::Config(format!("window must lie in 1..={block_items}")));
        }
        if self.per_user == 0 || self.per_user > self.window {
            return Err(Error::Config(format!("per_user must lie in 1..={}", self.window)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise must lie in [0, 1], got {}", self.noise)));
        }
        Ok(())
    }
}

/// Block of user `u`.
pub fn user_block(cfg: &BlockConfig, u: usize) -> usize {
    u * cfg.blocks / cfg.users
}

pub fn block_dataset(cfg: &BlockConfig) -> Result<InteractionSet> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, "synthetic");
    let block_items = cfg.items / cfg.blocks;
    let mut pairs = Vec::with_capacity(cfg.users * cfg.per_user);
    for u in 0..cfg.users {
        let start = user_block(cfg, u) * block_items;
        let center = rng.random_range(0..block_items);
        let mut items: Vec<u32> = Vec::with_capacity(cfg.per_user);
        while items.len() < cfg.per_user {
            let item = if rng.random::<f64>() < cfg.noise {
                rng.random_range(0..cfg.items)
            } else {
                let offset = rng.random_range(0..cfg.window);
                start + (center + block_items + offset - cfg.window / 2) % block_items
            } as u32;
            if !items.contains(&item) {
                items.push(item);
            }
        }
        pairs.extend(items.into_iter().map(|i| (u as u32, i)));
    }
    InteractionSet::from_index_pairs(cfg.users, cfg.items, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_block_purity() {
        let cfg = BlockConfig::default();
        let data = block_dataset(&cfg).unwrap();
        assert_eq!((data.num_users(), data.num_items(), data.nnz()), (300, 200, 300 * 16));
        let in_block = data
            .pairs()
            .iter()
            .filter(|&&(u, i)| user_block(&cfg, u as usize) == i as usize / 100)
            .count();
        let frac = in_block as f64 / data.nnz() as f64;
        // noise draws land in the own block half the time
        assert!(frac > 0.95 && frac < 0.995, "{frac}");
        assert_eq!(data, block_dataset(&cfg).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            BlockConfig {
                window: 0,
                ..Default::default()
            },
            BlockConfig {
                per_user: 30,
                ..Default::default()
            },
            BlockConfig {
                noise: 1.5,
                ..Default::default()
            },
            BlockConfig {
                blocks: 0,
                ..Default::default()
            },
        ] {
            assert!(block_dataset(&bad).is_err());
        }
    }
}
