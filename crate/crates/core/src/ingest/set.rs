use std::collections::HashMap;

use crate::error::{Error, Result};

/// Binary user–item interaction matrix with its id maps.
///
/// Pairs are stored sorted and unique. Sets produced by filtering have no
/// orphan users or items; sets produced by splitting keep the parent's maps
/// and may contain rows or columns without pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionSet {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    pairs: Vec<(u32, u32)>,
}

fn index_of(ids: &[String], kind: &'static str) -> Result<HashMap<String, u32>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::format("interaction set", format!("empty {kind} id at index {i}")));
        }
        if map.insert(id.clone(), i as u32).is_some() {
            return Err(Error::format("interaction set", format!("duplicate {kind} id {id:?}")));
        }
    }
    Ok(map)
}

impl InteractionSet {
    pub fn new(user_ids: Vec<String>, item_ids: Vec<String>, mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        if user_ids.len() > u32::MAX as usize || item_ids.len() > u32::MAX as usize {
            return Err(Error::format("interaction set", "too many users or items"));
        }
        let user_index = index_of(&user_ids, "user")?;
        let item_index = index_of(&item_ids, "item")?;
        let (m, k) = (user_ids.len() as u32, item_ids.len() as u32);
        if let Some(&(u, i)) = pairs.iter().find(|&&(u, i)| u >= m || i >= k) {
            return Err(Error::format("interaction set", format!("pair ({u}, {i}) outside {m}x{k}")));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self {
            user_ids,
            item_ids,
            user_index,
            item_index,
            pairs,
        })
    }

    /// Set with ids `u0..u{m-1}` and `i0..i{k-1}`.
    pub fn from_index_pairs(num_users: usize, num_items: usize, pairs: Vec<(u32, u32)>) -> Result<Self> {
        let users = (0..num_users).map(|u| format!("u{u}")).collect();
        let items = (0..num_items).map(|i| format!("i{i}")).collect();
        Self::new(users, items, pairs)
    }

    /// Same index maps, different pairs.
    pub fn with_pairs(&self, pairs: Vec<(u32, u32)>) -> Result<Self> {
        let (m, k) = (self.num_users() as u32, self.num_items() as u32);
        let mut pairs = pairs;
        if pairs.iter().any(|&(u, i)| u >= m || i >= k) {
            return Err(Error::format("interaction set", "pair outside index range"));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self {
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            user_index: self.user_index.clone(),
            item_index: self.item_index.clone(),
            pairs,
        })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    #[inline]
    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    /// `M + K`.
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_users() + self.num_items()
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn user_id(&self, u: usize) -> &str {
        &self.user_ids[u]
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.item_ids[i]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).map(|&u| u as usize)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).map(|&i| i as usize)
    }

    /// Sorted item lists, one per user.
    pub fn user_items(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_users()];
        for &(u, i) in &self.pairs {
            out[u as usize].push(i);
        }
        out
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_users()];
        for &(u, _) in &self.pairs {
            d[u as usize] += 1;
        }
        d
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_items()];
        for &(_, i) in &self.pairs {
            d[i as usize] += 1;
        }
        d
    }

    /// `100 · (1 − NNZ / (M·K))`.
    pub fn sparsity_percent(&self) -> f64 {
        let cells = self.num_users() as f64 * self.num_items() as f64;
        if cells == 0.0 {
            return 100.0;
        }
        100.0 * (1.0 - self.nnz() as f64 / cells)
    }

    pub fn contains(&self, u: u32, i: u32) -> bool {
        self.pairs.binary_search(&(u, i)).is_ok()
    }

    /// Pairs present in both sets (used to check split disjointness).
    pub fn intersection_count(&self, other: &Self) -> usize {
        self.pairs.iter().filter(|&&(u, i)| other.contains(u, i)).count()
    }

    /// Union of the pairs of two sets sharing index maps.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.user_ids != other.user_ids || self.item_ids != other.item_ids {
            return Err(Error::Shape("union of sets with different index maps".into()));
        }
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        self.with_pairs(pairs)
    }
}
