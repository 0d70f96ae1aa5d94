//! BPR training with Adam, validation-driven early stopping and grid search.

mod adam;
mod loss;
mod sampling;
mod state;

pub use adam::{adam_step, AdamState};
pub use loss::{backward, bpr_loss, embedding_gradient, Gradients};
pub use sampling::{sample_triples, Triple, TripleSampler};
pub use state::{read_state, read_state_file, write_state, write_state_file, TrainState, STATE_TAG};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::ingest::InteractionSet;
use crate::model::{forward, init_params, ModelConfig, ModelParams, SpectralContext};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::textio::sha256_hex;

/// Cutoff of the validation metrics that drive early stopping.
pub const MONITOR_K: usize = 20;

/// Learning rates searched when a grid is requested without explicit values.
pub const DEFAULT_LR_GRID: [f64; 10] = [0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1];
/// Wavelet scales searched when a grid is requested without explicit values.
pub const DEFAULT_T_GRID: [f64; 9] = [0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate == 0.0 {
            return Err(Error::Config("learning_rate 0 cannot train; use a positive rate".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::Config(format!("adam_eps must be positive, got {}", self.adam_eps)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss per triple.
    pub loss: f64,
    pub val_recall: f64,
    pub val_ndcg: f64,
    pub elapsed_ms: u64,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch loss val_recall@20 val_ndcg@20 elapsed_ms";

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(' ').collect();
        let [epoch, loss, r, n, ms] = f.as_slice() else {
            return None;
        };
        Some(Self {
            epoch: epoch.parse().ok()?,
            loss: loss.parse().ok()?,
            val_recall: r.parse().ok()?,
            val_ndcg: n.parse().ok()?,
            elapsed_ms: ms.parse().ok()?,
        })
    }
}

impl std::fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:?} {:?} {:?} {}",
            self.epoch, self.loss, self.val_recall, self.val_ndcg, self.elapsed_ms
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome<T> {
    pub best: ModelParams<T>,
    pub best_epoch: usize,
    /// Validation Recall@20 of `best` (negated mean loss when the validation
    /// slice has no eligible users).
    pub best_score: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Hash tying a resume state to the exact inputs of a run.
pub fn run_fingerprint(model: &ModelConfig, train: &TrainConfig, fit_hash: &str, spectral_key: &str) -> String {
    sha256_hex(format!("{model:?}|{train:?}|{fit_hash}|{spectral_key}").as_bytes())
}

/// Validation Recall@20 and NDCG@20, or `None` when no user has
/// validation items.
pub fn validation_metrics<T: Scalar>(
    params: &ModelParams<T>,
    ctx: &SpectralContext<T>,
    fit: &InteractionSet,
    validation: &InteractionSet,
) -> Result<Option<(f64, f64)>> {
    let trace = forward(params, ctx)?;
    let opts = EvalOptions {
        k_values: vec![MONITOR_K],
        ..EvalOptions::default()
    };
    match evaluate(&trace, fit, validation, &opts) {
        Ok(r) => Ok(Some((r.recall(MONITOR_K), r.ndcg(MONITOR_K)))),
        Err(Error::NoEligibleUsers) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fresh state for a run, parameters drawn from `model.seed`.
pub fn initial_state<T: Scalar>(
    model: &ModelConfig,
    ctx: &SpectralContext<T>,
    num_users: usize,
    fingerprint: String,
) -> TrainState<T> {
    let params = init_params(model, num_users, ctx.n() - num_users, ctx.q());
    TrainState {
        fingerprint,
        epoch: 0,
        adam: AdamState::new(&params),
        best: params.clone(),
        params,
        best_epoch: 0,
        best_score: f64::NEG_INFINITY,
        stale: 0,
        log: Vec::new(),
    }
}

/// Trains on `fit`, monitoring Recall@20 on `validation`.
///
/// Each epoch draws one triple per training pair from the stream
/// `epoch/<n>` of `train.seed`, so a run resumed from the state handed to
/// `on_epoch` follows the same trajectory as an uninterrupted one. Training
/// stops after `patience + 1` consecutive epochs without improvement.
pub fn fit<T: Scalar>(
    fit: &InteractionSet,
    validation: &InteractionSet,
    ctx: &SpectralContext<T>,
    model: &ModelConfig,
    train: &TrainConfig,
    resume: Option<TrainState<T>>,
    on_epoch: &mut dyn FnMut(&TrainState<T>, &EpochRecord) -> Result<()>,
) -> Result<FitOutcome<T>> {
    model.validate(fit.num_users(), fit.num_items())?;
    train.validate()?;
    if fit.num_nodes() != ctx.n() {
        return Err(Error::Shape(format!(
            "{} graph nodes but a {}-node spectrum",
            fit.num_nodes(),
            ctx.n()
        )));
    }
    let mut state = match resume {
        Some(s) => {
            s.params.check_shapes(fit.num_users(), fit.num_items(), ctx.q())?;
            s
        }
        None => initial_state(model, ctx, fit.num_users(), String::new()),
    };
    let eta = T::of(model.eta);
    let mut sampler = TripleSampler::new(fit)?;
    let mut stopped_early = state.stale > train.patience;
    let mut warned = false;
    while !stopped_early && state.epoch < train.max_epochs {
        let epoch = state.epoch + 1;
        let start = Instant::now();
        let mut rng = stream(train.seed, &format!("epoch/{epoch}"));
        let triples = sampler.sample(fit.nnz(), &mut rng);
        let mut loss = 0.0;
        for batch in triples.chunks(train.batch_size) {
            let trace = forward(&state.params, ctx)?;
            loss += bpr_loss(&trace, batch, eta)?.to_f64_lossless();
            let grads = backward(&trace, batch, &state.params, ctx, eta).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} in epoch {epoch}")),
                e => e,
            })?;
            adam_step(&mut state.params, &grads, &mut state.adam, train);
        }
        loss /= triples.len() as f64;
        let (val_recall, val_ndcg, score) = match validation_metrics(&state.params, ctx, fit, validation)? {
            Some((r, n)) => (r, n, r),
            None => {
                if !warned {
                    log::warn!("validation slice has no eligible users; monitoring training loss instead");
                    warned = true;
                }
                (f64::NAN, f64::NAN, -loss)
            }
        };
        state.epoch = epoch;
        if score > state.best_score {
            state.best_score = score;
            state.best_epoch = epoch;
            state.best = state.params.clone();
            state.stale = 0;
        } else {
            state.stale += 1;
        }
        let record = EpochRecord {
            epoch,
            loss,
            val_recall,
            val_ndcg,
            elapsed_ms: start.elapsed().as_millis() as u64,
        };
        state.log.push(record.clone());
        on_epoch(&state, &record)?;
        stopped_early = state.stale > train.patience;
    }
    Ok(FitOutcome {
        best: state.best,
        best_epoch: state.best_epoch,
        best_score: state.best_score,
        log: state.log,
        stopped_early,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub t: f64,
    pub best_score: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct GridOutcome<T> {
    /// Every run in enumeration order (scales outer, rates inner).
    pub points: Vec<GridPoint>,
    pub best_index: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub outcome: FitOutcome<T>,
}

/// Runs [`fit`] for every `(learning_rate, t)` pair and keeps the run with
/// the best validation score; ties go to the earlier run.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<T: Scalar>(
    fit_set: &InteractionSet,
    validation: &InteractionSet,
    ctx: &SpectralContext<T>,
    model: &ModelConfig,
    train: &TrainConfig,
    learning_rates: &[f64],
    scales: &[f64],
    on_run: &mut dyn FnMut(usize, &GridPoint),
) -> Result<GridOutcome<T>> {
    if learning_rates.is_empty() || scales.is_empty() {
        return Err(Error::Config("grid lists must be non-empty".into()));
    }
    for &lr in learning_rates {
        TrainConfig {
            learning_rate: lr,
            ..train.clone()
        }
        .validate()?;
    }
    let mut points = Vec::new();
    let mut best: Option<(usize, ModelConfig, TrainConfig, FitOutcome<T>)> = None;
    for &t in scales {
        let m = ModelConfig { t, ..model.clone() };
        let run_ctx = ctx.reconfigured(&m)?;
        for &lr in learning_rates {
            let tc = TrainConfig {
                learning_rate: lr,
                ..train.clone()
            };
            let out = fit(fit_set, validation, &run_ctx, &m, &tc, None, &mut |_, _| Ok(()))?;
            let point = GridPoint {
                learning_rate: lr,
                t,
                best_score: out.best_score,
                best_epoch: out.best_epoch,
            };
            on_run(points.len(), &point);
            if best.as_ref().is_none_or(|b| out.best_score > b.3.best_score) {
                best = Some((points.len(), m.clone(), tc, out));
            }
            points.push(point);
        }
    }
    let (best_index, model, train, outcome) = best.expect("non-empty grid");
    Ok(GridOutcome {
        points,
        best_index,
        model,
        train,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_rejected() {
        let err = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("learning_rate 0"));
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn epoch_record_round_trip() {
        let r = EpochRecord {
            epoch: 3,
            loss: 0.1 + 0.2,
            val_recall: f64::NAN,
            val_ndcg: 0.25,
            elapsed_ms: 17,
        };
        let back = EpochRecord::parse(&r.to_string()).unwrap();
        assert_eq!(back.loss, r.loss);
        assert!(back.val_recall.is_nan());
        assert_eq!(back.to_string(), r.to_string());
    }

    #[test]
    fn default_grid_has_ninety_points() {
        assert_eq!(DEFAULT_LR_GRID.len() * DEFAULT_T_GRID.len(), 90);
        assert!(DEFAULT_LR_GRID.iter().all(|&lr| lr > 0.0));
    }
}
