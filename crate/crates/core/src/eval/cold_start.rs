use crate::error::{Error, Result};
use crate::ingest::InteractionSet;
use crate::pipeline::{run, PipelineConfig};
use crate::scalar::Scalar;

pub const DEFAULT_CAPS: [usize; 5] = [3, 5, 7, 9, 12];

#[derive(Clone, Debug, PartialEq)]
pub struct ColdStartRow {
    pub cap: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub users: usize,
}

/// Retrains with each per-user training cap and reports Recall@20 and
/// NDCG@20 on the (cap independent) test split.
pub fn cold_start_suite<T: Scalar>(data: &InteractionSet, caps: &[usize], cfg: &PipelineConfig) -> Result<Vec<ColdStartRow>> {
    if caps.is_empty() || caps.contains(&0) {
        return Err(Error::Config("caps must be a non-empty list of positive integers".into()));
    }
    let mut cfg = cfg.clone();
    if !cfg.eval.k_values.contains(&20) {
        cfg.eval.k_values.push(20);
    }
    caps.iter()
        .map(|&cap| {
            let out = run::<T>(
                data,
                &PipelineConfig {
                    per_user_cap: Some(cap),
                    ..cfg.clone()
                },
            )?;
            Ok(ColdStartRow {
                cap,
                recall: out.report.recall(20),
                ndcg: out.report.ndcg(20),
                users: out.report.users.len(),
            })
        })
        .collect()
}

/// Count of adjacent pairs where a larger cap scored lower.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
