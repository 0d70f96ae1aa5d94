//! End-to-end runs driven by one root seed.
//!
//! Stage seeds are derived from the root with [`crate::rng::derive_seed`]
//! under the labels `split`, `validation`, `lanczos`, `init` and `train`.

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, MetricReport};
use crate::graph::{laplacian_of, IsolatedNodes};
use crate::ingest::{content_hash, split, InteractionSet, SplitSpec};
use crate::model::{Checkpoint, ModelConfig, SpectralContext};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::spectral::{default_q, default_tolerance, eigensolve, CacheKey, LanczosOptions, SpectralDecomposition};
use crate::train::{fit, EpochRecord, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub per_user_cap: Option<usize>,
    /// Share of each user's training items held out for early stopping.
    pub validation_fraction: f64,
    /// Retained eigenpairs; `None` applies [`default_q`].
    pub q: Option<usize>,
    /// Eigen residual tolerance; `None` applies [`default_tolerance`].
    pub lanczos_tol: Option<f64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.8,
            per_user_cap: None,
            validation_fraction: 0.1,
            q: None,
            lanczos_tol: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: derive_seed(self.seed, "split"),
            per_user_cap: self.per_user_cap,
        }
    }

    pub fn validation_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: 1.0 - self.validation_fraction,
            seed: derive_seed(self.seed, "validation"),
            per_user_cap: None,
        }
    }

    pub fn lanczos_options<T: Scalar>(&self) -> LanczosOptions {
        LanczosOptions {
            tol: self.lanczos_tol.unwrap_or_else(default_tolerance::<T>),
            seed: derive_seed(self.seed, "lanczos"),
            ..LanczosOptions::default()
        }
    }

    /// Model and training configs with seeds taken from the root.
    pub fn seeded(&self) -> (ModelConfig, TrainConfig) {
        (
            ModelConfig {
                seed: derive_seed(self.seed, "init"),
                ..self.model.clone()
            },
            TrainConfig {
                seed: derive_seed(self.seed, "train"),
                ..self.train.clone()
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie strictly between 0 and 1, got {}",
                self.validation_fraction
            )));
        }
        if self.q == Some(0) {
            return Err(Error::Config("q must be positive".into()));
        }
        if let Some(tol) = self.lanczos_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Config(format!("lanczos_tol must be positive, got {tol}")));
            }
        }
        self.train.validate()?;
        self.eval.validate()
    }
}

/// The four disjoint views of a dataset used by a run. All share the index
/// maps of the source dataset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: InteractionSet,
    pub test: InteractionSet,
    /// `train` minus `validation`; the graph the model propagates over.
    pub fit: InteractionSet,
    pub validation: InteractionSet,
}

pub fn prepare(data: &InteractionSet, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (train, test) = split(data, &cfg.split_spec())?;
    let (fit, validation) = split(&train, &cfg.validation_spec())?;
    Ok(Prepared {
        train,
        test,
        fit,
        validation,
    })
}

/// `q` clamped to the node count, with a warning when that changes it.
pub fn clamp_q(q: Option<usize>, n: usize) -> usize {
    let q = q.unwrap_or_else(|| default_q(n));
    if q > n {
        log::warn!("q = {q} exceeds the {n} graph nodes; using {n}");
    }
    q.min(n)
}

/// Eigendecomposition of the `fit` graph. Nodes without training edges are
/// decoupled rather than rejected.
pub fn decompose<T: Scalar>(
    fit: &InteractionSet,
    q: Option<usize>,
    opts: &LanczosOptions,
) -> Result<(SpectralDecomposition<T>, CacheKey)> {
    let lap = laplacian_of::<T>(fit, IsolatedNodes::Decouple)?;
    if lap.isolated_nodes() > 0 {
        log::warn!("{} nodes have no training edges and are decoupled", lap.isolated_nodes());
    }
    let q = clamp_q(q, lap.n());
    let decomp = eigensolve(&lap, q, opts)?;
    let key = CacheKey {
        graph_hash: content_hash(fit),
        q,
        tol: opts.tol,
        seed: opts.seed,
    };
    Ok((decomp, key))
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    pub report: MetricReport,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Split, decompose, train and evaluate on the test split.
pub fn run<T: Scalar>(data: &InteractionSet, cfg: &PipelineConfig) -> Result<RunOutcome<T>> {
    let prepared = prepare(data, cfg)?;
    let (decomp, key) = decompose::<T>(&prepared.fit, cfg.q, &cfg.lanczos_options::<T>())?;
    let (model, train) = cfg.seeded();
    let ctx = SpectralContext::new(decomp, key.digest(), &model)?;
    let outcome = fit(
        &prepared.fit,
        &prepared.validation,
        &ctx,
        &model,
        &train,
        None,
        &mut |_, _| Ok(()),
    )?;
    let trace = crate::model::forward(&outcome.best, &ctx)?;
    let report = evaluate(&trace, &prepared.train, &prepared.test, &cfg.eval)?;
    Ok(RunOutcome {
        checkpoint: Checkpoint {
            config: model,
            dataset_hash: content_hash(data),
            spectral_key: ctx.key_digest.clone(),
            params: outcome.best,
        },
        report,
        log: outcome.log,
        best_epoch: outcome.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{block_dataset, BlockConfig};

    #[test]
    fn prepared_views_are_disjoint_and_cover() {
        let data = block_dataset(&BlockConfig::default()).unwrap();
        let p = prepare(&data, &PipelineConfig::default()).unwrap();
        assert_eq!(p.train.nnz() + p.test.nnz(), data.nnz());
        assert_eq!(p.fit.nnz() + p.validation.nnz(), p.train.nnz());
        assert_eq!(p.fit.intersection_count(&p.validation), 0);
        assert_eq!(p.train.intersection_count(&p.test), 0);
    }

    #[test]
    fn q_is_clamped() {
        assert_eq!(clamp_q(Some(50), 10), 10);
        assert_eq!(clamp_q(None, 500), 64);
        assert_eq!(clamp_q(Some(3), 10), 3);
    }

    #[test]
    fn invalid_settings_fail_before_compute() {
        let data = block_dataset(&BlockConfig::default()).unwrap();
        let cfg = PipelineConfig {
            validation_fraction: 1.0,
            ..PipelineConfig::default()
        };
        assert!(prepare(&data, &cfg).unwrap_err().is_config());
    }
}
