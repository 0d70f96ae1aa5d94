//! Resumable training state, written after every epoch.
//!
//! ```text
//! wavelet-cf-train-state v1
//! scalar f64
//! fingerprint <run fingerprint>
//! epoch <completed epochs>
//! step <Adam steps>
//! best_epoch <epoch>
//! best_score <score>
//! stale <epochs without improvement>
//! log <n>
//! <n epoch records>
//! current / adam_m / adam_v / best, each followed by a params block
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AdamState, EpochRecord};
use crate::error::{Error, Result};
use crate::model::{read_params, write_params, ModelParams};
use crate::scalar::Scalar;
use crate::textio::LineReader;

pub const STATE_TAG: &str = "wavelet-cf-train-state";
const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub fingerprint: String,
    /// Completed epochs.
    pub epoch: usize,
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    pub best: ModelParams<T>,
    pub best_epoch: usize,
    pub best_score: f64,
    pub stale: usize,
    pub log: Vec<EpochRecord>,
}

pub fn write_state<T: Scalar>(s: &TrainState<T>, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{STATE_TAG} {VERSION}")?;
    writeln!(w, "scalar {}", T::NAME)?;
    writeln!(w, "fingerprint {}", s.fingerprint)?;
    writeln!(w, "epoch {}", s.epoch)?;
    writeln!(w, "step {}", s.adam.step)?;
    writeln!(w, "best_epoch {}", s.best_epoch)?;
    writeln!(w, "best_score {:?}", s.best_score)?;
    writeln!(w, "stale {}", s.stale)?;
    writeln!(w, "log {}", s.log.len())?;
    for r in &s.log {
        writeln!(w, "{r}")?;
    }
    for (name, p) in [
        ("current", &s.params),
        ("adam_m", &s.adam.m),
        ("adam_v", &s.adam.v),
        ("best", &s.best),
    ] {
        writeln!(w, "{name}")?;
        write_params(w, p)?;
    }
    Ok(())
}

pub fn read_state<T: Scalar>(r: impl BufRead) -> Result<TrainState<T>> {
    let mut lines = LineReader::new(r, "train state");
    let header = lines.next_line()?.to_string();
    let Some(version) = header.strip_prefix(STATE_TAG).map(str::trim) else {
        return Err(lines.error("missing train state header"));
    };
    if version != VERSION {
        return Err(Error::VersionMismatch {
            what: "train state",
            expected: VERSION.into(),
            found: version.into(),
        });
    }
    let scalar = lines.keyed("scalar")?;
    if scalar != T::NAME {
        return Err(lines.error(format!("state holds {scalar} values, expected {}", T::NAME)));
    }
    let fingerprint = lines.keyed("fingerprint")?;
    let epoch = lines.keyed_parse("epoch")?;
    let step = lines.keyed_parse("step")?;
    let best_epoch = lines.keyed_parse("best_epoch")?;
    let best_score = lines.keyed_parse("best_score")?;
    let stale = lines.keyed_parse("stale")?;
    let n: usize = lines.keyed_parse("log")?;
    let mut log = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next_line()?.to_string();
        log.push(EpochRecord::parse(&line).ok_or_else(|| lines.error(format!("bad epoch record {line:?}")))?);
    }
    let mut block = |name: &str| -> Result<ModelParams<T>> {
        lines.keyed(name)?;
        read_params(&mut lines)
    };
    let params = block("current")?;
    let m = block("adam_m")?;
    let v = block("adam_v")?;
    let best = block("best")?;
    lines.expect_eof()?;
    Ok(TrainState {
        fingerprint,
        epoch,
        params,
        adam: AdamState { m, v, step },
        best,
        best_epoch,
        best_score,
        stale,
        log,
    })
}

/// Writes through a temporary file and renames, so an interruption leaves
/// the previous state intact.
pub fn write_state_file<T: Scalar>(s: &TrainState<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_state(s, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_state_file<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainState<T>> {
    read_state(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            layers: 1,
            width: 2,
            ..ModelConfig::default()
        };
        let params = init_params::<f32>(&cfg, 3, 4, 5);
        let mut adam = AdamState::new(&params);
        adam.step = 7;
        adam.m.x0[(1, 1)] = 0.1;
        let s = TrainState {
            fingerprint: "ff".into(),
            epoch: 2,
            best: params.clone(),
            params,
            adam,
            best_epoch: 1,
            best_score: 0.3,
            stale: 1,
            log: vec![EpochRecord {
                epoch: 1,
                loss: 0.6,
                val_recall: 0.3,
                val_ndcg: 0.2,
                elapsed_ms: 4,
            }],
        };
        let mut bytes = Vec::new();
        write_state(&s, &mut bytes).unwrap();
        let back: TrainState<f32> = read_state(bytes.as_slice()).unwrap();
        assert_eq!(back, s);
        assert!(read_state::<f64>(bytes.as_slice()).is_err());
    }
}
