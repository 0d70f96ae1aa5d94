//! Top-k ranking, Recall@k and NDCG@k, cohort breakdowns and the cold-start
//! protocol.

mod cold_start;
mod report;

pub use cold_start::{cold_start_suite, inversions, ColdStartRow, DEFAULT_CAPS};
pub use report::{MetricReport, SummaryRow, UserMetrics};

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::InteractionSet;
use crate::model::ForwardTrace;
use crate::rng::stream;
use crate::scalar::Scalar;

pub const DEFAULT_COHORT_BOUNDS: [usize; 3] = [25, 50, 100];

/// Recommendations for one user, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub user: usize,
    pub items: Vec<u32>,
    pub k: usize,
}

/// Top `k` items by descending score with ties going to the lower index.
/// `exclude` (sorted) is removed before ranking.
pub fn topk(user: usize, scores: &[f64], exclude: &[u32], k: usize) -> RankedList {
    let mut pool: Vec<u32> = (0..scores.len() as u32)
        .filter(|i| exclude.binary_search(i).is_err())
        .collect();
    let order = |a: &u32, b: &u32| scores[*b as usize].total_cmp(&scores[*a as usize]).then(a.cmp(b));
    let keep = k.min(pool.len());
    if keep > 0 && keep < pool.len() {
        pool.select_nth_unstable_by(keep - 1, order);
        pool.truncate(keep);
    }
    pool.sort_unstable_by(order);
    RankedList { user, items: pool, k }
}

/// Fraction of `test` (sorted) found in the list; `None` for an empty test
/// set.
pub fn recall_at_k(list: &RankedList, test: &[u32]) -> Option<f64> {
    if test.is_empty() {
        return None;
    }
    let hits = list.items.iter().filter(|i| test.binary_search(i).is_ok()).count();
    Some(hits as f64 / test.len() as f64)
}

/// Binary-relevance NDCG with the ideal list holding `min(k, |test|)` hits.
pub fn ndcg_at_k(list: &RankedList, test: &[u32]) -> Option<f64> {
    if test.is_empty() {
        return None;
    }
    let gain = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = list
        .items
        .iter()
        .enumerate()
        .filter(|(_, i)| test.binary_search(i).is_ok())
        .map(|(pos, _)| gain(pos))
        .sum();
    let idcg: f64 = (0..list.k.min(test.len())).map(gain).sum();
    Some(dcg / idcg)
}

/// Anything that can score every item for a user.
pub trait Scorer: Sync {
    fn num_items(&self) -> usize;
    fn score_user(&self, u: usize) -> Vec<f64>;
}

impl<T: Scalar> Scorer for ForwardTrace<T> {
    fn num_items(&self) -> usize {
        self.items.rows()
    }

    fn score_user(&self, u: usize) -> Vec<f64> {
        ForwardTrace::score_user(self, u)
            .into_iter()
            .map(|v| v.to_f64_lossless())
            .collect()
    }
}

/// Scores every item by its number of training interactions.
#[derive(Clone, Debug)]
pub struct PopularityScorer {
    counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn new(train: &InteractionSet) -> Self {
        Self {
            counts: train.item_degrees().into_iter().map(|d| d as f64).collect(),
        }
    }
}

impl Scorer for PopularityScorer {
    fn num_items(&self) -> usize {
        self.counts.len()
    }

    fn score_user(&self, _u: usize) -> Vec<f64> {
        self.counts.clone()
    }
}

/// Independent uniform scores per user, reproducible from a seed.
#[derive(Clone, Debug)]
pub struct RandomScorer {
    pub num_items: usize,
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_user(&self, u: usize) -> Vec<f64> {
        let mut rng = stream(self.seed, &format!("random/{u}"));
        (0..self.num_items).map(|_| rng.random::<f64>()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub k_values: Vec<usize>,
    /// Upper-exclusive training-count boundaries between cohorts.
    pub cohort_bounds: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k_values: vec![20],
            cohort_bounds: DEFAULT_COHORT_BOUNDS.to_vec(),
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::Config("k values must be a non-empty list of positive integers".into()));
        }
        if self.cohort_bounds.windows(2).any(|w| w[0] >= w[1]) || self.cohort_bounds.first() == Some(&0) {
            return Err(Error::Config("cohort bounds must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

/// Ranks every user with a non-empty test set, masking their training items.
/// `train` and `test` must share index maps.
pub fn evaluate(scorer: &dyn Scorer, train: &InteractionSet, test: &InteractionSet, opts: &EvalOptions) -> Result<MetricReport> {
    opts.validate()?;
    if train.num_users() != test.num_users() || train.num_items() != test.num_items() || scorer.num_items() != train.num_items() {
        return Err(Error::Shape("train, test and scorer disagree on sizes".into()));
    }
    let train_items = train.user_items();
    let test_items = test.user_items();
    let kmax = *opts.k_values.iter().max().expect("validated");
    let users: Vec<UserMetrics> = (0..train.num_users())
        .into_par_iter()
        .filter(|&u| !test_items[u].is_empty())
        .map(|u| {
            let scores = scorer.score_user(u);
            let full = topk(u, &scores, &train_items[u], kmax);
            let mut recall = Vec::with_capacity(opts.k_values.len());
            let mut ndcg = Vec::with_capacity(opts.k_values.len());
            for &k in &opts.k_values {
                let list = RankedList {
                    user: u,
                    items: full.items[..k.min(full.items.len())].to_vec(),
                    k,
                };
                recall.push(recall_at_k(&list, &test_items[u]).expect("non-empty"));
                ndcg.push(ndcg_at_k(&list, &test_items[u]).expect("non-empty"));
            }
            let train_count = train_items[u].len();
            UserMetrics {
                user: u,
                train_count,
                cohort: opts.cohort_bounds.iter().take_while(|&&b| train_count >= b).count(),
                recall,
                ndcg,
            }
        })
        .collect();
    if users.is_empty() {
        return Err(Error::NoEligibleUsers);
    }
    Ok(MetricReport {
        k_values: opts.k_values.clone(),
        cohort_bounds: opts.cohort_bounds.clone(),
        users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(items: &[u32], k: usize) -> RankedList {
        RankedList {
            user: 0,
            items: items.to_vec(),
            k,
        }
    }

    #[test]
    fn topk_tie_break_mask_and_dominance() {
        let flat = vec![0.5; 10];
        assert_eq!(topk(0, &flat, &[], 4).items, vec![0, 1, 2, 3]);
        let mut s = flat.clone();
        s[7] = 9.0;
        assert_eq!(topk(0, &s, &[], 3).items, vec![7, 0, 1]);
        assert_eq!(topk(0, &s, &[7], 3).items, vec![0, 1, 2]);
        assert_eq!(topk(0, &s, &[0, 1, 2, 3, 4, 5, 6, 8, 9], 3).items, vec![7]);
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_k(&list(&[1, 2, 3], 3), &[1, 2]), Some(1.0));
        assert_eq!(recall_at_k(&list(&[4, 5], 2), &[1, 2]), Some(0.0));
        assert_eq!(recall_at_k(&list(&[9, 1, 5], 3), &[1, 2, 3, 4]), Some(0.25));
        assert_eq!(recall_at_k(&list(&[1], 1), &[]), None);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&list(&[3, 1, 2], 3), &[1, 2, 3]), Some(1.0));
        assert_eq!(ndcg_at_k(&list(&[7, 8], 2), &[1]), Some(0.0));
        let v = ndcg_at_k(&list(&[1, 9, 2], 3), &[1, 2]).unwrap();
        let expect = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.9197).abs() < 5e-5);
    }

    #[test]
    fn evaluate_counts_and_full_catalog() {
        let train = InteractionSet::from_index_pairs(3, 6, vec![(0, 0), (1, 1), (1, 2), (2, 3)]).unwrap();
        let test = train.with_pairs(vec![(0, 4), (0, 5), (1, 0)]).unwrap();
        let pop = PopularityScorer::new(&train);
        let opts = EvalOptions {
            k_values: vec![6],
            cohort_bounds: vec![2],
        };
        let r = evaluate(&pop, &train, &test, &opts).unwrap();
        assert_eq!(r.users.len(), 2);
        assert!(r.users.iter().all(|u| u.recall[0] == 1.0));
        assert_eq!(r.users[0].cohort, 0);
        assert_eq!(r.users[1].cohort, 1);
        let empty = train.with_pairs(vec![]).unwrap();
        assert!(matches!(evaluate(&pop, &train, &empty, &opts), Err(Error::NoEligibleUsers)));
    }

    #[test]
    fn random_scorer_is_reproducible() {
        let r = RandomScorer { num_items: 5, seed: 3 };
        assert_eq!(r.score_user(2), r.score_user(2));
        assert_ne!(r.score_user(2), r.score_user(3));
    }
}
