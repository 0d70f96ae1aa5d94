//! Versioned text dump of a decomposition so training runs can skip the
//! eigensolve.
//!
//! ```text
//! wavelet-cf-spectral v1
//! scalar f64
//! graph_hash <sha256 of the training graph's canonical encoding>
//! q <Q>
//! n <N>
//! tol <residual tolerance>
//! seed <start-vector seed>
//! kappa <κ>
//! t <scale recorded at build time>
//! drop_threshold <threshold>
//! lambdas
//! <Q values>
//! phi
//! <N lines of Q values>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::textio::{sha256_hex, write_floats, LineReader};

use super::SpectralDecomposition;

pub const CACHE_TAG: &str = "wavelet-cf-spectral";
const VERSION: &str = "v1";

/// Everything that determines the cached decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheKey {
    pub graph_hash: String,
    pub q: usize,
    pub tol: f64,
    pub seed: u64,
}

impl CacheKey {
    pub fn digest(&self) -> String {
        sha256_hex(format!("{}|{}|{:?}|{}", self.graph_hash, self.q, self.tol, self.seed).as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCache<T> {
    pub key: CacheKey,
    pub decomp: SpectralDecomposition<T>,
    pub kappa: T,
    pub t: T,
    pub drop_threshold: T,
}

pub fn write_cache<T: Scalar>(cache: &SpectralCache<T>, w: &mut impl Write) -> Result<()> {
    let d = &cache.decomp;
    writeln!(w, "{CACHE_TAG} {VERSION}")?;
    writeln!(w, "scalar {}", T::NAME)?;
    writeln!(w, "graph_hash {}", cache.key.graph_hash)?;
    writeln!(w, "q {}", d.q())?;
    writeln!(w, "n {}", d.n())?;
    writeln!(w, "tol {:?}", cache.key.tol)?;
    writeln!(w, "seed {}", cache.key.seed)?;
    writeln!(w, "kappa {:?}", cache.kappa.to_f64_lossless())?;
    writeln!(w, "t {:?}", cache.t.to_f64_lossless())?;
    writeln!(w, "drop_threshold {:?}", cache.drop_threshold.to_f64_lossless())?;
    writeln!(w, "lambdas")?;
    write_floats(w, &d.lambdas)?;
    writeln!(w, "phi")?;
    for r in 0..d.n() {
        write_floats(w, d.phi.row(r))?;
    }
    Ok(())
}

pub fn read_cache<T: Scalar>(r: impl BufRead) -> Result<SpectralCache<T>> {
    let mut lines = LineReader::new(r, "spectral cache");
    let header = lines.next_line()?.to_string();
    let Some(version) = header.strip_prefix(CACHE_TAG).map(str::trim) else {
        return Err(lines.error("missing spectral cache header"));
    };
    if version != VERSION {
        return Err(Error::VersionMismatch {
            what: "spectral cache",
            expected: VERSION.into(),
            found: version.into(),
        });
    }
    let scalar = lines.keyed("scalar")?;
    if scalar != T::NAME {
        return Err(lines.error(format!("cache holds {scalar} values, expected {}", T::NAME)));
    }
    let graph_hash = lines.keyed("graph_hash")?;
    let q: usize = lines.keyed_parse("q")?;
    let n: usize = lines.keyed_parse("n")?;
    let tol: f64 = lines.keyed_parse("tol")?;
    let seed: u64 = lines.keyed_parse("seed")?;
    let kappa: f64 = lines.keyed_parse("kappa")?;
    let t: f64 = lines.keyed_parse("t")?;
    let drop_threshold: f64 = lines.keyed_parse("drop_threshold")?;
    if q == 0 || q > n {
        return Err(lines.error(format!("invalid q {q} for n {n}")));
    }
    lines.keyed("lambdas")?;
    let lambdas = lines.floats::<T>(q)?;
    lines.keyed("phi")?;
    let mut data = Vec::with_capacity(n * q);
    for _ in 0..n {
        data.extend(lines.floats::<T>(q)?);
    }
    lines.expect_eof()?;
    Ok(SpectralCache {
        key: CacheKey {
            graph_hash,
            q,
            tol,
            seed,
        },
        decomp: SpectralDecomposition::new(lambdas, Matrix::from_vec(n, q, data)?)?,
        kappa: T::of(kappa),
        t: T::of(t),
        drop_threshold: T::of(drop_threshold),
    })
}

pub fn write_cache_file<T: Scalar>(cache: &SpectralCache<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cache(cache, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_cache_file<T: Scalar>(path: impl AsRef<Path>) -> Result<SpectralCache<T>> {
    read_cache(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SpectralCache<f64> {
        let phi = Matrix::from_vec(2, 2, vec![0.1, 1.0 / 3.0, -0.7, 1e-300]).unwrap();
        SpectralCache {
            key: CacheKey {
                graph_hash: "ab".into(),
                q: 2,
                tol: 1e-9,
                seed: 5,
            },
            decomp: SpectralDecomposition::new(vec![0.0, 2.0 / 3.0], phi).unwrap(),
            kappa: 0.123456789,
            t: 0.4,
            drop_threshold: 1e-7,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let mut bytes = Vec::new();
        write_cache(&c, &mut bytes).unwrap();
        let back: SpectralCache<f64> = read_cache(bytes.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_wrong_version_scalar_and_truncation() {
        let mut bytes = Vec::new();
        write_cache(&sample(), &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let v2 = text.replacen(" v1", " v2", 1);
        assert!(matches!(read_cache::<f64>(v2.as_bytes()), Err(Error::VersionMismatch { .. })));
        assert!(read_cache::<f32>(bytes.as_slice()).is_err());
        assert!(read_cache::<f64>(&bytes[..bytes.len() - 5]).is_err());
    }

    #[test]
    fn key_digest_tracks_every_field() {
        let k = sample().key;
        let mut k2 = k.clone();
        k2.seed += 1;
        assert_ne!(k.digest(), k2.digest());
        assert_eq!(k.digest(), k.clone().digest());
    }
}
