//! Canonical dataset file.
//!
//! ```text
//! wavelet-cf-dataset v1 M K NNZ seed
//! u<TAB>i            (NNZ lines, sorted, contiguous indices)
//! users M
//! <user id>          (M lines, index order)
//! items K
//! <item id>          (K lines, index order)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::InteractionSet;
use crate::error::{Error, Result};
use crate::textio::{sha256_hex, LineReader};

pub const FORMAT_TAG: &str = "wavelet-cf-dataset";
const VERSION: &str = "v1";

pub fn write_canonical(data: &InteractionSet, seed: u64, w: &mut impl Write) -> Result<()> {
    for id in data.user_ids().iter().chain(data.item_ids()) {
        if id.contains(['\t', '\n', '\r']) {
            return Err(Error::format("dataset", format!("id {id:?} contains a line or tab break")));
        }
    }
    writeln!(
        w,
        "{FORMAT_TAG} {VERSION} {} {} {} {seed}",
        data.num_users(),
        data.num_items(),
        data.nnz()
    )?;
    for &(u, i) in data.pairs() {
        writeln!(w, "{u}\t{i}")?;
    }
    writeln!(w, "users {}", data.num_users())?;
    for id in data.user_ids() {
        writeln!(w, "{id}")?;
    }
    writeln!(w, "items {}", data.num_items())?;
    for id in data.item_ids() {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

/// Returns the dataset and the seed recorded in its header.
pub fn read_canonical(r: impl BufRead) -> Result<(InteractionSet, u64)> {
    let mut lines = LineReader::new(r, "dataset");
    let header: Vec<String> = lines.next_line()?.split(' ').map(str::to_string).collect();
    if header.first().map(String::as_str) != Some(FORMAT_TAG) {
        return Err(lines.error("missing dataset header"));
    }
    if header.get(1).map(String::as_str) != Some(VERSION) {
        return Err(Error::VersionMismatch {
            what: "dataset",
            expected: VERSION.into(),
            found: header.get(1).cloned().unwrap_or_default(),
        });
    }
    if header.len() != 6 {
        return Err(lines.error("header must have 6 fields"));
    }
    let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| lines.error(format!("bad header field {s:?}"))) };
    let (m, k, nnz, seed) = (num(&header[2])?, num(&header[3])?, num(&header[4])?, num(&header[5])?);
    if m == 0 || k == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut pairs = Vec::with_capacity(nnz as usize);
    for _ in 0..nnz {
        let line = lines.next_line()?.to_string();
        let parsed = line
            .split_once('\t')
            .and_then(|(u, i)| Some((u.parse::<u32>().ok()?, i.parse::<u32>().ok()?)));
        match parsed {
            Some(p) => pairs.push(p),
            None => return Err(lines.error(format!("bad pair {line:?}"))),
        }
    }
    let users = read_ids(&mut lines, "users", m as usize)?;
    let items = read_ids(&mut lines, "items", k as usize)?;
    lines.expect_eof()?;
    let set = InteractionSet::new(users, items, pairs)?;
    if set.nnz() as u64 != nnz {
        return Err(Error::format("dataset", "duplicate pairs"));
    }
    Ok((set, seed))
}

fn read_ids<R: BufRead>(lines: &mut LineReader<R>, key: &str, count: usize) -> Result<Vec<String>> {
    let n: usize = lines.keyed_parse(key)?;
    if n != count {
        return Err(lines.error(format!("{key} section has {n} entries, header says {count}")));
    }
    (0..n).map(|_| lines.next_line().map(str::to_string)).collect()
}

pub fn write_canonical_file(data: &InteractionSet, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_canonical(data, seed, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_canonical_file(path: impl AsRef<Path>) -> Result<(InteractionSet, u64)> {
    read_canonical(BufReader::new(File::open(path)?))
}

/// SHA-256 of the canonical encoding with seed 0.
pub fn content_hash(data: &InteractionSet) -> String {
    let mut bytes = Vec::new();
    write_canonical(data, 0, &mut bytes).expect("in-memory write");
    sha256_hex(&bytes)
}
