//! Loading, filtering and splitting implicit-feedback logs.

mod canonical;
mod set;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use canonical::{content_hash, read_canonical, read_canonical_file, write_canonical, write_canonical_file, FORMAT_TAG};
pub use set::InteractionSet;

/// One row of a raw log. Ratings are kept only until binarization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    pub weight: Option<f64>,
    pub timestamp: Option<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delimiter {
    Tab,
    Comma,
    /// `::`, as used by the MovieLens `.dat` dumps.
    DoubleColon,
}

impl Delimiter {
    fn as_str(self) -> &'static str {
        match self {
            Delimiter::Tab => "\t",
            Delimiter::Comma => ",",
            Delimiter::DoubleColon => "::",
        }
    }

    fn detect(line: &str) -> Self {
        if line.contains('\t') {
            Delimiter::Tab
        } else if line.contains("::") {
            Delimiter::DoubleColon
        } else {
            Delimiter::Comma
        }
    }
}

/// Column layout of an input log. With `delimiter: None` the delimiter is
/// detected from the first data line.
#[derive(Clone, Copy, Debug, Default)]
pub struct TabularFormat {
    pub delimiter: Option<Delimiter>,
}

pub fn load_interactions(path: impl AsRef<Path>, format: TabularFormat) -> Result<Vec<RawInteraction>> {
    let file = File::open(path.as_ref())?;
    parse_interactions(BufReader::new(file), format)
}

/// Parses `user, item, [rating], [timestamp]` rows. Blank lines and lines
/// starting with `#` are skipped; line numbers in errors are 1-based.
pub fn parse_interactions(reader: impl BufRead, format: TabularFormat) -> Result<Vec<RawInteraction>> {
    let mut delimiter = format.delimiter;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let delim = *delimiter.get_or_insert_with(|| Delimiter::detect(trimmed));
        let cols: Vec<&str> = trimmed.split(delim.as_str()).map(str::trim).collect();
        if cols.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 2 columns, found {}", cols.len()),
            });
        }
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty user or item id".into(),
            });
        }
        let weight = match cols.get(2) {
            Some(s) if !s.is_empty() => Some(s.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad rating {s:?}: {e}"),
            })?),
            _ => None,
        };
        let timestamp = match cols.get(3) {
            Some(s) if !s.is_empty() => Some(s.parse::<i64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad timestamp {s:?}: {e}"),
            })?),
            _ => None,
        };
        out.push(RawInteraction {
            user_id: cols[0].to_string(),
            item_id: cols[1].to_string(),
            weight,
            timestamp,
        });
    }
    Ok(out)
}

/// Binarizes `raw` and removes users with fewer than `min_user` distinct
/// items and items with fewer than `min_item` distinct users, repeating until
/// nothing changes. Indices follow first appearance among surviving rows.
pub fn filter_by_activity(raw: &[RawInteraction], min_user: usize, min_item: usize) -> Result<InteractionSet> {
    if min_user == 0 || min_item == 0 {
        return Err(Error::Config("activity thresholds must be at least 1".into()));
    }

    // Intern ids in file order so that first-appearance order is preserved.
    let mut user_intern: HashMap<&str, usize> = HashMap::new();
    let mut item_intern: HashMap<&str, usize> = HashMap::new();
    let mut users: Vec<&str> = Vec::new();
    let mut items: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for r in raw {
        let u = *user_intern.entry(&r.user_id).or_insert_with(|| {
            users.push(&r.user_id);
            users.len() - 1
        });
        let i = *item_intern.entry(&r.item_id).or_insert_with(|| {
            items.push(&r.item_id);
            items.len() - 1
        });
        if seen.insert((u, i)) {
            pairs.push((u, i));
        }
    }

    loop {
        let mut udeg = vec![0usize; users.len()];
        let mut ideg = vec![0usize; items.len()];
        for &(u, i) in &pairs {
            udeg[u] += 1;
            ideg[i] += 1;
        }
        let before = pairs.len();
        pairs.retain(|&(u, i)| udeg[u] >= min_user && ideg[i] >= min_item);
        if pairs.len() == before {
            break;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut user_map = vec![u32::MAX; users.len()];
    let mut item_map = vec![u32::MAX; items.len()];
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut indexed = Vec::with_capacity(pairs.len());
    for &(u, i) in &pairs {
        if user_map[u] == u32::MAX {
            user_map[u] = user_ids.len() as u32;
            user_ids.push(users[u].to_string());
        }
        if item_map[i] == u32::MAX {
            item_map[i] = item_ids.len() as u32;
            item_ids.push(items[i].to_string());
        }
        indexed.push((user_map[u], item_map[i]));
    }
    InteractionSet::new(user_ids, item_ids, indexed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Cold-start protocol: keep at most this many training items per user.
    pub per_user_cap: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            per_user_cap: None,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if self.per_user_cap == Some(0) {
            return Err(Error::Config("per_user_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Number of training items for a user with `n` interactions.
pub fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction + 1e-9).floor() as usize).clamp(n.min(1), n)
}

/// Per-user random partition into train and test.
///
/// Each user's items are shuffled and the first `floor(n * fraction)`
/// (at least one) go to train. Users with a single interaction land wholly
/// in train and therefore never appear among test users. With a
/// `per_user_cap`, only the first `cap` shuffled training items are kept;
/// the rest are dropped from both sides. Both outputs share the index maps of
/// `data`, so either may have items (or users) without pairs.
pub fn split(data: &InteractionSet, spec: &SplitSpec) -> Result<(InteractionSet, InteractionSet)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (u, items) in data.user_items().into_iter().enumerate() {
        let mut items = items;
        items.shuffle(&mut rng);
        let n_train = train_count(items.len(), spec.train_fraction);
        let kept = spec.per_user_cap.map_or(n_train, |cap| cap.min(n_train));
        train.extend(items[..kept].iter().map(|&i| (u as u32, i)));
        test.extend(items[n_train..].iter().map(|&i| (u as u32, i)));
    }
    Ok((data.with_pairs(train)?, data.with_pairs(test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> Vec<RawInteraction> {
        pairs
            .iter()
            .map(|&(u, i)| RawInteraction {
                user_id: u.into(),
                item_id: i.into(),
                weight: None,
                timestamp: None,
            })
            .collect()
    }

    #[test]
    fn parses_three_line_tsv() {
        let rows = parse_interactions("u1\ti1\nu1\ti2\nu2\ti1\n".as_bytes(), TabularFormat::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].user_id, "u2");
        assert_eq!(rows[1].item_id, "i2");
    }

    #[test]
    fn empty_input_gives_no_rows() {
        let rows = parse_interactions("".as_bytes(), TabularFormat::default()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn single_column_row_is_an_error_at_its_line() {
        let err = parse_interactions("u1\n".as_bytes(), TabularFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_interactions("# c\nu1,i1\nu2\n".as_bytes(), TabularFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn optional_columns_and_comments() {
        let text = "# header\nu1,i1,4.5,978300760\n\nu2,i3\n";
        let rows = parse_interactions(text.as_bytes(), TabularFormat::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].weight, Some(4.5));
        assert_eq!(rows[0].timestamp, Some(978300760));
        assert_eq!(rows[1].weight, None);
        let rows = parse_interactions("1::1193::5::978300760\n".as_bytes(), TabularFormat::default()).unwrap();
        assert_eq!(rows[0].item_id, "1193");
        assert!(parse_interactions("u,i,x\n".as_bytes(), TabularFormat::default()).is_err());
    }

    #[test]
    fn vacuous_thresholds_keep_everything() {
        let set = filter_by_activity(&raw(&[("a", "x"), ("a", "y"), ("b", "x")]), 1, 1).unwrap();
        assert_eq!((set.num_users(), set.num_items(), set.nnz()), (2, 2, 3));
        assert_eq!(set.user_id(0), "a");
        assert_eq!(set.item_id(1), "y");
    }

    #[test]
    fn fixed_point_filtering_can_empty_the_dataset() {
        let err = filter_by_activity(&raw(&[("a", "x"), ("a", "y"), ("b", "x")]), 2, 2).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        assert_eq!(err.to_string(), "dataset fully filtered");
    }

    #[test]
    fn duplicates_collapse() {
        let set = filter_by_activity(&raw(&[("a", "x"), ("a", "x"), ("b", "x")]), 1, 1).unwrap();
        assert_eq!(set.nnz(), 2);
    }

    #[test]
    fn split_ratio_and_cap() {
        let pairs: Vec<(String, String)> = (0..10).map(|i| ("u".to_string(), format!("i{i}"))).collect();
        let rows: Vec<_> = pairs.iter().map(|(u, i)| (u.as_str(), i.as_str())).collect();
        let set = filter_by_activity(&raw(&rows), 1, 1).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 3,
            per_user_cap: None,
        };
        let (train, test) = split(&set, &spec).unwrap();
        assert_eq!((train.nnz(), test.nnz()), (8, 2));

        let capped = SplitSpec {
            per_user_cap: Some(3),
            ..spec
        };
        let (ctrain, ctest) = split(&set, &capped).unwrap();
        assert_eq!(ctrain.nnz(), 3);
        assert_eq!(ctest, test);
        assert!(ctrain.pairs().iter().all(|p| train.pairs().contains(p)));
    }

    #[test]
    fn single_interaction_user_goes_to_train() {
        let set = filter_by_activity(&raw(&[("a", "x"), ("b", "x"), ("b", "y")]), 1, 1).unwrap();
        let (train, test) = split(&set, &SplitSpec::default()).unwrap();
        assert!(train.pairs().contains(&(0, 0)));
        assert!(test.pairs().iter().all(|&(u, _)| u != 0));
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(train_count(10, 0.8), 8);
        assert_eq!(train_count(5, 0.8), 4);
        assert_eq!(train_count(2, 0.8), 1);
        assert_eq!(train_count(1, 0.8), 1);
        assert_eq!(train_count(3, 0.1), 1);
        assert_eq!(train_count(0, 0.8), 0);
    }

    #[test]
    fn invalid_fraction_rejected() {
        let set = filter_by_activity(&raw(&[("a", "x")]), 1, 1).unwrap();
        for f in [0.0, 1.0, -0.5, f64::NAN] {
            let spec = SplitSpec {
                train_fraction: f,
                ..Default::default()
            };
            assert!(matches!(split(&set, &spec), Err(Error::Config(_))));
        }
    }
}
