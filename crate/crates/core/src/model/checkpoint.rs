//! Versioned text checkpoint.
//!
//! ```text
//! wavelet-cf-checkpoint v1
//! scalar f64
//! dataset_hash <sha256 of the canonical dataset>
//! spectral_key <digest of the spectral cache key>
//! <model config, one `key value` line per field>
//! params L P M K Q
//! x0
//! <M lines>
//! y0
//! <K lines>
//! w 0
//! <P lines>
//! theta 0
//! <one line of Q values>
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::spectral::FilterOptions;
use crate::textio::{write_floats, LineReader};

pub const CHECKPOINT_TAG: &str = "wavelet-cf-checkpoint";
const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub dataset_hash: String,
    pub spectral_key: String,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn ensure_dataset(&self, dataset_hash: &str) -> Result<()> {
        if self.dataset_hash != dataset_hash {
            return Err(Error::HashMismatch {
                what: "dataset",
                expected: self.dataset_hash.clone(),
                found: dataset_hash.into(),
            });
        }
        Ok(())
    }

    pub fn ensure_spectral(&self, key_digest: &str) -> Result<()> {
        if self.spectral_key != key_digest {
            return Err(Error::HashMismatch {
                what: "spectral cache",
                expected: self.spectral_key.clone(),
                found: key_digest.into(),
            });
        }
        Ok(())
    }
}

pub fn write_config(w: &mut impl Write, c: &ModelConfig) -> std::io::Result<()> {
    writeln!(w, "layers {}", c.layers)?;
    writeln!(w, "width {}", c.width)?;
    writeln!(w, "t {:?}", c.t)?;
    writeln!(w, "eta {:?}", c.eta)?;
    writeln!(w, "seed {}", c.seed)?;
    writeln!(w, "materialize_wavelets {}", c.materialize_wavelets)?;
    writeln!(w, "drop_threshold {:?}", c.drop_threshold)?;
    writeln!(w, "exponent_mode {}", c.filter.exponent_mode.as_str())?;
    writeln!(w, "inverse_mode {}", c.filter.inverse_mode.as_str())
}

fn read_config<R: BufRead>(lines: &mut LineReader<R>) -> Result<ModelConfig> {
    Ok(ModelConfig {
        layers: lines.keyed_parse("layers")?,
        width: lines.keyed_parse("width")?,
        t: lines.keyed_parse("t")?,
        eta: lines.keyed_parse("eta")?,
        seed: lines.keyed_parse("seed")?,
        materialize_wavelets: lines.keyed_parse("materialize_wavelets")?,
        drop_threshold: lines.keyed_parse("drop_threshold")?,
        filter: FilterOptions {
            exponent_mode: lines.keyed("exponent_mode")?.parse()?,
            inverse_mode: lines.keyed("inverse_mode")?.parse()?,
        },
    })
}

fn write_matrix<T: Scalar>(w: &mut impl Write, m: &Matrix<T>) -> std::io::Result<()> {
    for r in 0..m.rows() {
        write_floats(w, m.row(r))?;
    }
    Ok(())
}

fn read_matrix<T: Scalar, R: BufRead>(lines: &mut LineReader<R>, rows: usize, cols: usize) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        data.extend(lines.floats::<T>(cols)?);
    }
    Matrix::from_vec(rows, cols, data)
}

pub(crate) fn write_params<T: Scalar>(w: &mut impl Write, p: &ModelParams<T>) -> std::io::Result<()> {
    let q = p.theta.first().map_or(0, Vec::len);
    writeln!(
        w,
        "params {} {} {} {} {q}",
        p.layers(),
        p.width(),
        p.num_users(),
        p.num_items()
    )?;
    writeln!(w, "x0")?;
    write_matrix(w, &p.x0)?;
    writeln!(w, "y0")?;
    write_matrix(w, &p.y0)?;
    for (l, (wl, th)) in p.w.iter().zip(&p.theta).enumerate() {
        writeln!(w, "w {l}")?;
        write_matrix(w, wl)?;
        writeln!(w, "theta {l}")?;
        write_floats(w, th)?;
    }
    Ok(())
}

pub(crate) fn read_params<T: Scalar, R: BufRead>(lines: &mut LineReader<R>) -> Result<ModelParams<T>> {
    let dims = lines.keyed("params")?;
    let dims: Vec<usize> = dims
        .split(' ')
        .map(|s| s.parse().map_err(|_| lines.error(format!("bad params header {dims:?}"))))
        .collect::<Result<_>>()?;
    let &[layers, p, m, k, q] = dims.as_slice() else {
        return Err(lines.error("params header needs L P M K Q"));
    };
    lines.keyed("x0")?;
    let x0 = read_matrix(lines, m, p)?;
    lines.keyed("y0")?;
    let y0 = read_matrix(lines, k, p)?;
    let mut w = Vec::with_capacity(layers);
    let mut theta = Vec::with_capacity(layers);
    for l in 0..layers {
        let tag: usize = lines.keyed_parse("w")?;
        if tag != l {
            return Err(lines.error(format!("expected layer {l}, found {tag}")));
        }
        w.push(read_matrix(lines, p, p)?);
        lines.keyed_parse::<usize>("theta")?;
        theta.push(lines.floats::<T>(q)?);
    }
    Ok(ModelParams { x0, y0, w, theta })
}

pub fn write_checkpoint<T: Scalar>(c: &Checkpoint<T>, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{CHECKPOINT_TAG} {VERSION}")?;
    writeln!(w, "scalar {}", T::NAME)?;
    writeln!(w, "dataset_hash {}", c.dataset_hash)?;
    writeln!(w, "spectral_key {}", c.spectral_key)?;
    write_config(w, &c.config)?;
    write_params(w, &c.params)?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(r: impl BufRead) -> Result<Checkpoint<T>> {
    let mut lines = LineReader::new(r, "checkpoint");
    let header = lines.next_line()?.to_string();
    let Some(version) = header.strip_prefix(CHECKPOINT_TAG).map(str::trim) else {
        return Err(lines.error("missing checkpoint header"));
    };
    if version != VERSION {
        return Err(Error::VersionMismatch {
            what: "checkpoint",
            expected: VERSION.into(),
            found: version.into(),
        });
    }
    let scalar = lines.keyed("scalar")?;
    if scalar != T::NAME {
        return Err(lines.error(format!("checkpoint holds {scalar} values, expected {}", T::NAME)));
    }
    let dataset_hash = lines.keyed("dataset_hash")?;
    let spectral_key = lines.keyed("spectral_key")?;
    let config = read_config(&mut lines)?;
    let params: ModelParams<T> = read_params(&mut lines)?;
    lines.expect_eof()?;
    if params.layers() != config.layers || params.width() != config.width {
        return Err(Error::format("checkpoint", "parameter shapes disagree with the config"));
    }
    Ok(Checkpoint {
        config,
        dataset_hash,
        spectral_key,
        params,
    })
}

pub fn write_checkpoint_file<T: Scalar>(c: &Checkpoint<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(c, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint_file<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
