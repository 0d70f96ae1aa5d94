use std::fs::File;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::Path;

use wavelet_cf::eval::{cold_start_suite, evaluate as eval_report, inversions, topk, PopularityScorer, RandomScorer, Scorer};
use wavelet_cf::ingest::{
    content_hash, filter_by_activity, load_interactions, read_canonical_file, write_canonical_file, InteractionSet, TabularFormat,
};
use wavelet_cf::model::{
    forward, read_checkpoint_file, write_checkpoint_file, write_config, Checkpoint, ModelConfig, SpectralContext,
};
use wavelet_cf::pipeline::{clamp_q, decompose, prepare, Prepared};
use wavelet_cf::rng::derive_seed;
use wavelet_cf::spectral::{read_cache_file, write_cache_file, CacheKey, SpectralCache};
use wavelet_cf::synthetic::block_dataset;
use wavelet_cf::train::{fit, grid_search, initial_state, read_state_file, run_fingerprint, write_state_file, EpochRecord};
use wavelet_cf::Scalar;

use crate::config::{RunConfig, ScalarKind};
use crate::{CliError, ReportFormat};

type Result<T> = std::result::Result<T, CliError>;

macro_rules! dispatch {
    ($cfg:expr, $f:ident($($arg:expr),*)) => {
        match $cfg.scalar {
            ScalarKind::F64 => $f::<f64>($($arg),*),
            ScalarKind::F32 => $f::<f32>($($arg),*),
        }
    };
}

fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(CliError::config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn load_dataset(cfg: &RunConfig) -> Result<InteractionSet> {
    let path = &cfg.paths.dataset;
    read_canonical_file(path).map(|(data, _)| data).map_err(|e| match e {
        wavelet_cf::Error::Io(io) => io_error(path, io),
        e => CliError::data(format!("{}: {e}", path.display())),
    })
}

fn summary_line(data: &InteractionSet) -> String {
    format!(
        "{} interactions, {} users, {} items, sparsity {:.2}%",
        data.nnz(),
        data.num_users(),
        data.num_items(),
        data.sparsity_percent()
    )
}

pub fn ingest(cfg: &RunConfig, force: bool) -> Result<()> {
    let input = cfg
        .paths
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("ingest needs input (--input or the input key)"))?;
    ensure_writable(&cfg.paths.dataset, force)?;
    let raw = load_interactions(
        input,
        TabularFormat {
            delimiter: cfg.delimiter,
        },
    )
    .map_err(|e| match e {
        wavelet_cf::Error::Io(io) => io_error(input, io),
        e => CliError::data(format!("{}: {e}", input.display())),
    })?;
    let data = filter_by_activity(&raw, cfg.min_user, cfg.min_item)?;
    write_canonical_file(&data, cfg.pipeline.seed, &cfg.paths.dataset)?;
    println!("{} raw rows", raw.len());
    println!("{}", summary_line(&data));
    println!("dataset_hash {}", content_hash(&data));
    Ok(())
}

pub fn synth(cfg: &RunConfig, force: bool) -> Result<()> {
    ensure_writable(&cfg.paths.dataset, force)?;
    let data = block_dataset(&cfg.synth)?;
    write_canonical_file(&data, cfg.pipeline.seed, &cfg.paths.dataset)?;
    println!("{}", summary_line(&data));
    println!("dataset_hash {}", content_hash(&data));
    Ok(())
}

fn cache_key<T: Scalar>(cfg: &RunConfig, fit: &InteractionSet) -> CacheKey {
    let opts = cfg.pipeline.lanczos_options::<T>();
    CacheKey {
        graph_hash: content_hash(fit),
        q: clamp_q(cfg.pipeline.q, fit.num_nodes()),
        tol: opts.tol,
        seed: opts.seed,
    }
}

fn print_spectrum<T: Scalar>(ctx: &SpectralContext<T>) {
    let bc = &ctx.boxcox;
    let lambdas = &ctx.decomp.lambdas;
    println!("kappa {}", bc.kappa);
    println!("mean {}", bc.mean);
    println!("std {}", bc.std);
    println!("sum {}", bc.sum);
    println!("q {} of {} nodes", ctx.q(), ctx.n());
    println!("lambda_range {} {}", lambdas[0], lambdas[lambdas.len() - 1]);
}

fn spectral_typed<T: Scalar>(cfg: &RunConfig, force: bool) -> Result<()> {
    let data = load_dataset(cfg)?;
    let prepared = prepare(&data, &cfg.pipeline)?;
    let key = cache_key::<T>(cfg, &prepared.fit);
    let (model, _) = cfg.pipeline.seeded();
    let path = &cfg.paths.spectral_cache;
    if path.exists() {
        match read_cache_file::<T>(path) {
            Ok(cache) if cache.key == key => {
                let ctx = SpectralContext::new(cache.decomp, key.digest(), &model)?;
                println!("cache hit {}", path.display());
                print_spectrum(&ctx);
                return Ok(());
            }
            _ if !force => {
                return Err(CliError::config(format!(
                    "{} holds a different decomposition; pass --force to replace it",
                    path.display()
                )))
            }
            _ => {}
        }
    }
    let (decomp, key) = decompose::<T>(&prepared.fit, Some(key.q), &cfg.pipeline.lanczos_options::<T>())?;
    let ctx = SpectralContext::new(decomp, key.digest(), &model)?;
    let cache = SpectralCache {
        key,
        decomp: ctx.decomp.clone(),
        kappa: ctx.boxcox.kappa,
        t: T::of(model.t),
        drop_threshold: T::of(model.drop_threshold),
    };
    write_cache_file(&cache, path)?;
    println!("wrote {}", path.display());
    print_spectrum(&ctx);
    Ok(())
}

pub fn spectral(cfg: &RunConfig, force: bool) -> Result<()> {
    dispatch!(cfg, spectral_typed(cfg, force))
}

/// Split views plus the cached spectrum under `model`, refusing caches built
/// for another graph.
fn load_context<T: Scalar>(
    cfg: &RunConfig,
    data: &InteractionSet,
    model: &ModelConfig,
) -> Result<(Prepared, SpectralContext<T>)> {
    let prepared = prepare(data, &cfg.pipeline)?;
    let key = cache_key::<T>(cfg, &prepared.fit);
    let path = &cfg.paths.spectral_cache;
    let cache = read_cache_file::<T>(path).map_err(|e| match e {
        wavelet_cf::Error::Io(io) => io_error(path, io),
        e => CliError::data(format!("{}: {e}", path.display())),
    })?;
    if cache.key != key {
        return Err(CliError::data(format!(
            "{} was built for another training graph or eigensolver setting; rerun `wavelet-cf spectral`",
            path.display()
        )));
    }
    model.validate(prepared.fit.num_users(), prepared.fit.num_items())?;
    let ctx = SpectralContext::new(cache.decomp, key.digest(), model)?;
    Ok((prepared, ctx))
}

fn log_header(w: &mut impl Write, cfg: &RunConfig, model: &ModelConfig) -> std::io::Result<()> {
    let train = &cfg.pipeline.train;
    writeln!(
        w,
        "# batch_size {} layers {} width {} learning_rate {} t {} eta {} seed {}",
        train.batch_size, model.layers, model.width, train.learning_rate, model.t, model.eta, cfg.pipeline.seed
    )
}

fn stop_marker() -> wavelet_cf::Error {
    wavelet_cf::Error::Io(std::io::Error::new(ErrorKind::Interrupted, "stop requested"))
}

fn is_stop_marker(e: &wavelet_cf::Error) -> bool {
    matches!(e, wavelet_cf::Error::Io(io) if io.kind() == ErrorKind::Interrupted && io.to_string() == "stop requested")
}

fn train_typed<T: Scalar>(cfg: &RunConfig, grid: bool, resume: bool, force: bool, stop_after: Option<usize>) -> Result<()> {
    let data = load_dataset(cfg)?;
    let (model, train) = cfg.pipeline.seeded();
    let (prepared, ctx) = load_context::<T>(cfg, &data, &model)?;
    let paths = &cfg.paths;
    ensure_writable(&paths.checkpoint, force)?;
    if !resume {
        ensure_writable(&paths.train_log, force)?;
        if !grid {
            ensure_writable(&paths.train_state, force)?;
        }
    }
    let log_file = File::create(&paths.train_log).map_err(|e| io_error(&paths.train_log, e))?;
    let mut log_out = BufWriter::new(log_file);
    log_header(&mut log_out, cfg, &model).map_err(|e| io_error(&paths.train_log, e))?;

    let (final_model, best) = if grid {
        let (rates, scales) = cfg.grid();
        let total = rates.len() * scales.len();
        writeln!(
            log_out,
            "# grid {} learning rates x {} scales = {total} runs",
            rates.len(),
            scales.len()
        )
        .map_err(|e| io_error(&paths.train_log, e))?;
        let mut write_err = None;
        let outcome = grid_search(
            &prepared.fit,
            &prepared.validation,
            &ctx,
            &model,
            &train,
            &rates,
            &scales,
            &mut |i, p| {
                let line = format!(
                    "run {}/{total} learning_rate {} t {} best_val_recall@20 {} best_epoch {}",
                    i + 1,
                    p.learning_rate,
                    p.t,
                    p.best_score,
                    p.best_epoch
                );
                println!("{line}");
                if let Err(e) = writeln!(log_out, "{line}").and_then(|_| log_out.flush()) {
                    write_err.get_or_insert(e);
                }
            },
        )?;
        if let Some(e) = write_err {
            return Err(io_error(&paths.train_log, e));
        }
        let p = &outcome.points[outcome.best_index];
        let line = format!(
            "best run {} learning_rate {} t {} best_val_recall@20 {}",
            outcome.best_index + 1,
            p.learning_rate,
            p.t,
            p.best_score
        );
        println!("{line}");
        writeln!(log_out, "{line}").map_err(|e| io_error(&paths.train_log, e))?;
        (outcome.model, outcome.outcome.best)
    } else {
        let fingerprint = run_fingerprint(&model, &train, &content_hash(&prepared.fit), &ctx.key_digest);
        let state = if resume {
            let s = read_state_file::<T>(&paths.train_state).map_err(|e| match e {
                wavelet_cf::Error::Io(io) => io_error(&paths.train_state, io),
                e => CliError::data(format!("{}: {e}", paths.train_state.display())),
            })?;
            if s.fingerprint != fingerprint {
                return Err(CliError::config(format!(
                    "{} belongs to a run with different data or settings",
                    paths.train_state.display()
                )));
            }
            eprintln!("resuming after epoch {}", s.epoch);
            s
        } else {
            initial_state(&model, &ctx, prepared.fit.num_users(), fingerprint)
        };
        writeln!(log_out, "{}", EpochRecord::HEADER).map_err(|e| io_error(&paths.train_log, e))?;
        for r in &state.log {
            writeln!(log_out, "{r}").map_err(|e| io_error(&paths.train_log, e))?;
        }
        let start_epoch = state.epoch;
        let result = fit(
            &prepared.fit,
            &prepared.validation,
            &ctx,
            &model,
            &train,
            Some(state),
            &mut |s, record| {
                write_state_file(s, &paths.train_state)?;
                writeln!(log_out, "{record}")?;
                log_out.flush()?;
                log::info!(
                    "epoch {} loss {:.6} val_recall@20 {:.4}",
                    record.epoch,
                    record.loss,
                    record.val_recall
                );
                if stop_after.is_some_and(|n| record.epoch - start_epoch >= n) {
                    return Err(stop_marker());
                }
                Ok(())
            },
        );
        let outcome = match result {
            Err(e) if is_stop_marker(&e) => {
                log_out.flush().map_err(|e| io_error(&paths.train_log, e))?;
                println!("stopped; resume with `wavelet-cf train --resume`");
                return Ok(());
            }
            r => r?,
        };
        println!(
            "best_epoch {} val_recall@20 {} epochs {}{}",
            outcome.best_epoch,
            outcome.best_score,
            outcome.log.len(),
            if outcome.stopped_early { " (stopped early)" } else { "" }
        );
        (model, outcome.best)
    };
    log_out.flush().map_err(|e| io_error(&paths.train_log, e))?;
    let checkpoint = Checkpoint {
        config: final_model,
        dataset_hash: content_hash(&data),
        spectral_key: ctx.key_digest.clone(),
        params: best,
    };
    write_checkpoint_file(&checkpoint, &paths.checkpoint)?;
    println!("wrote {}", paths.checkpoint.display());
    Ok(())
}

pub fn train(cfg: &RunConfig, grid: bool, resume: bool, force: bool, stop_after: Option<usize>) -> Result<()> {
    dispatch!(cfg, train_typed(cfg, grid, resume, force, stop_after))
}

/// Dataset, split views, checkpoint and its matching spectral context.
fn load_trained<T: Scalar>(cfg: &RunConfig) -> Result<(InteractionSet, Prepared, Checkpoint<T>, SpectralContext<T>)> {
    let data = load_dataset(cfg)?;
    let path = &cfg.paths.checkpoint;
    let ckpt = read_checkpoint_file::<T>(path).map_err(|e| match e {
        wavelet_cf::Error::Io(io) => io_error(path, io),
        e => CliError::data(format!("{}: {e}", path.display())),
    })?;
    ckpt.ensure_dataset(&content_hash(&data))
        .map_err(|e| CliError::data(format!("refusing {}: {e}", path.display())))?;
    let (prepared, ctx) = load_context::<T>(cfg, &data, &ckpt.config)?;
    ckpt.ensure_spectral(&ctx.key_digest)
        .map_err(|e| CliError::data(format!("refusing {}: {e}", path.display())))?;
    ckpt.params.check_shapes(data.num_users(), data.num_items(), ctx.q())?;
    Ok((data, prepared, ckpt, ctx))
}

fn render(report: &wavelet_cf::eval::MetricReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => report.render_table(),
        ReportFormat::Lines => report.render_lines(),
        ReportFormat::Csv => report.render_csv(),
    }
}

fn evaluate_typed<T: Scalar>(cfg: &RunConfig, format: ReportFormat, baselines: bool) -> Result<()> {
    let (data, prepared, ckpt, ctx) = load_trained::<T>(cfg)?;
    let trace = forward(&ckpt.params, &ctx)?;
    let eval = &cfg.pipeline.eval;
    let report = eval_report(&trace, &prepared.train, &prepared.test, eval)?;
    let mut out = String::new();
    out.push_str("# config\n");
    for line in cfg.rendered.lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("# checkpoint model\n");
    let mut model = Vec::new();
    write_config(&mut model, &ckpt.config).expect("in-memory write");
    for line in String::from_utf8_lossy(&model).lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!("# dataset_hash {}\n", content_hash(&data)));
    out.push_str(&format!(
        "# split per-user, train_fraction {}, {} test users\n",
        cfg.pipeline.train_fraction,
        report.users.len()
    ));
    out.push_str("model\n");
    out.push_str(&render(&report, format));
    if baselines {
        let pop = PopularityScorer::new(&prepared.train);
        let random = RandomScorer {
            num_items: data.num_items(),
            seed: derive_seed(cfg.pipeline.seed, "random-baseline"),
        };
        for (name, scorer) in [("popularity", &pop as &dyn Scorer), ("random", &random)] {
            out.push_str(&format!("{name}\n"));
            out.push_str(&render(&eval_report(scorer, &prepared.train, &prepared.test, eval)?, format));
        }
    }
    print!("{out}");
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, format: ReportFormat, baselines: bool) -> Result<()> {
    dispatch!(cfg, evaluate_typed(cfg, format, baselines))
}

fn recommend_typed<T: Scalar>(cfg: &RunConfig, users: &[String], k: usize) -> Result<()> {
    if k == 0 {
        return Err(CliError::config("k must be positive"));
    }
    let (data, prepared, ckpt, ctx) = load_trained::<T>(cfg)?;
    let trace = forward(&ckpt.params, &ctx)?;
    let seen = prepared.train.user_items();
    let mut served = 0;
    for id in users {
        match data.user_index(id) {
            Some(u) => {
                let list = topk(u, &Scorer::score_user(&trace, u), &seen[u], k);
                let items: Vec<&str> = list.items.iter().map(|&i| data.item_id(i as usize)).collect();
                println!("{id}\t{}", items.join(","));
                served += 1;
            }
            None => {
                println!("{id}\terror: unknown user");
                eprintln!("unknown user {id:?}");
            }
        }
    }
    if served == 0 {
        return Err(CliError::data("none of the requested users are known"));
    }
    Ok(())
}

pub fn recommend(cfg: &RunConfig, users: &[String], k: usize) -> Result<()> {
    dispatch!(cfg, recommend_typed(cfg, users, k))
}

fn cold_start_typed<T: Scalar>(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let rows = cold_start_suite::<T>(&data, &cfg.cold_start_caps, &cfg.pipeline)?;
    println!("{:>5} {:>10} {:>10} {:>6}", "cap", "recall@20", "ndcg@20", "users");
    for r in &rows {
        println!("{:>5} {:>10.4} {:>10.4} {:>6}", r.cap, r.recall, r.ndcg, r.users);
    }
    let recall: Vec<f64> = rows.iter().map(|r| r.recall).collect();
    let ndcg: Vec<f64> = rows.iter().map(|r| r.ndcg).collect();
    println!("inversions recall {} ndcg {}", inversions(&recall), inversions(&ndcg));
    Ok(())
}

pub fn cold_start(cfg: &RunConfig) -> Result<()> {
    dispatch!(cfg, cold_start_typed(cfg))
}
