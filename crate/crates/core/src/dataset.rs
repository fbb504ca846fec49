//! Set-valued records, item interning and the line-oriented text format.
//!
//! The text format holds one record per line. Tokens are separated by commas
//! and/or whitespace and are treated as opaque strings. Tokens are interned
//! to dense [`ItemId`]s in order of first appearance.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Dense integer identifier of an item, in `0..num_items`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A non-empty, strictly increasing set of items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Record {
    items: Vec<ItemId>,
}

impl Record {
    /// Sorts and deduplicates `items`; fails on an empty set.
    pub fn new(mut items: Vec<ItemId>) -> Result<Self> {
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Record { items })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    /// True if every item of `subset` is in this record.
    pub fn is_superset_of(&self, subset: &[ItemId]) -> bool {
        let mut rest = self.items.as_slice();
        for x in subset {
            match rest.binary_search(x) {
                Ok(p) => rest = &rest[p + 1..],
                Err(_) => return false,
            }
        }
        true
    }
}

/// A sorted, duplicate-free set of exactly `K >= 1` items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KApps(Vec<ItemId>);

impl KApps {
    /// Sorts `items`; rejects empty input and duplicates.
    pub fn new(mut items: Vec<ItemId>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidKApps("empty".into()));
        }
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidKApps("duplicate item".into()));
        }
        Ok(KApps(items))
    }

    /// Caller guarantees `items` is non-empty and strictly increasing.
    pub(crate) fn from_sorted(items: Vec<ItemId>) -> Self {
        debug_assert!(!items.is_empty() && items.windows(2).all(|w| w[0] < w[1]));
        KApps(items)
    }

    pub(crate) fn assign_sorted(&mut self, items: &[ItemId]) {
        self.0.clear();
        self.0.extend_from_slice(items);
    }

    pub fn from_ids(ids: impl IntoIterator<Item = u32>) -> Result<Self> {
        Self::new(ids.into_iter().map(ItemId).collect())
    }

    pub fn from_tokens<'t>(data: &Dataset, tokens: impl IntoIterator<Item = &'t str>) -> Result<Self> {
        let ids = tokens
            .into_iter()
            .map(|t| data.id(t).ok_or_else(|| Error::UnknownToken(t.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids)
    }

    pub fn items(&self) -> &[ItemId] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SymbolTable {
    tokens: Vec<String>,
    ids: HashMap<String, ItemId>,
}

impl SymbolTable {
    fn intern(&mut self, token: &str) -> ItemId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = ItemId(self.tokens.len() as u32);
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), ItemId(i as u32)))
            .collect();
        SymbolTable { tokens, ids }
    }
}

/// Record-size statistics. The standard deviation is the population one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetStats {
    pub num_users: usize,
    pub num_items: usize,
    pub max_record_size: usize,
    pub min_record_size: usize,
    pub mean_record_size: f64,
    pub stdev_record_size: f64,
}

/// An immutable, non-empty collection of records plus the token table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<Record>,
    symbols: SymbolTable,
}

/// Outcome of parsing: the dataset and how many blank lines were skipped.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub skipped_lines: usize,
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

/// Parses the text record format from `reader`.
pub fn load_dataset(reader: impl BufRead) -> Result<Loaded> {
    let mut symbols = SymbolTable::default();
    let mut records = Vec::new();
    let mut skipped_lines = 0;
    for line in reader.lines() {
        let line = line?;
        let items: Vec<ItemId> = tokens(&line).map(|t| symbols.intern(t)).collect();
        if items.is_empty() {
            skipped_lines += 1;
            continue;
        }
        records.push(Record::new(items)?);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if skipped_lines > 0 {
        log::warn!("skipped {skipped_lines} line(s) without tokens");
    }
    Ok(Loaded {
        dataset: Dataset { records, symbols },
        skipped_lines,
    })
}

impl Dataset {
    pub fn parse_str(text: &str) -> Result<Self> {
        load_dataset(text.as_bytes()).map(|l| l.dataset)
    }

    /// Builds a dataset from records of raw `u32` labels. Labels are
    /// renumbered densely in increasing label order and named by `name`.
    pub fn from_label_records(
        records: Vec<Vec<u32>>,
        name: impl Fn(u32) -> String,
    ) -> Result<Self> {
        let mut labels: Vec<u32> = records.iter().flatten().copied().collect();
        labels.sort_unstable();
        labels.dedup();
        let records = records
            .into_iter()
            .filter(|r| !r.is_empty())
            .map(|r| {
                let items = r
                    .into_iter()
                    .map(|l| ItemId(labels.binary_search(&l).expect("label collected") as u32))
                    .collect();
                Record::new(items)
            })
            .collect::<Result<Vec<_>>>()?;
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let symbols = SymbolTable::from_tokens(labels.into_iter().map(name).collect());
        Ok(Dataset { records, symbols })
    }

    /// Builds a dataset from records of integer ids, naming item `i` by its
    /// decimal id. Ids must be dense in `0..n`.
    pub fn from_id_records(records: Vec<Vec<u32>>) -> Result<Self> {
        Self::from_label_records(records, |l| l.to_string())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_items(&self) -> usize {
        self.symbols.tokens.len()
    }

    pub fn token(&self, id: ItemId) -> Option<&str> {
        self.symbols.tokens.get(id.index()).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<ItemId> {
        self.symbols.ids.get(token).copied()
    }

    pub fn max_record_size(&self) -> usize {
        self.records.iter().map(Record::len).max().unwrap_or(0)
    }

    /// Index of the first record of maximum size.
    pub fn largest_record(&self) -> usize {
        let max = self.max_record_size();
        self.records.iter().position(|r| r.len() == max).unwrap_or(0)
    }

    /// Writes the text format: tokens in id order, one record per line.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            let mut first = true;
            for &id in r.items() {
                if !first {
                    w.write_all(b" ")?;
                }
                first = false;
                w.write_all(self.symbols.tokens[id.index()].as_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are valid UTF-8")
    }

    /// Drops empty records and renumbers the surviving items, preserving
    /// their relative order.
    fn restrict(&self, records: Vec<Vec<ItemId>>) -> Result<Dataset> {
        let mut used = vec![false; self.num_items()];
        for r in &records {
            for id in r {
                used[id.index()] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.num_items()];
        let mut tokens = Vec::new();
        for (old, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            remap[old] = tokens.len() as u32;
            tokens.push(self.symbols.tokens[old].clone());
        }
        let records: Vec<Record> = records
            .into_iter()
            .filter(|r| !r.is_empty())
            // monotone remap keeps each record sorted
            .map(|r| Record {
                items: r.into_iter().map(|id| ItemId(remap[id.index()])).collect(),
            })
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            records,
            symbols: SymbolTable::from_tokens(tokens),
        })
    }

    /// Removes the blacklisted tokens from every record, dropping records
    /// that become empty.
    pub fn filter_items(&self, blacklist: &HashSet<String>) -> Result<Dataset> {
        let banned: Vec<bool> = self
            .symbols
            .tokens
            .iter()
            .map(|t| blacklist.contains(t))
            .collect();
        let records = self
            .records
            .iter()
            .map(|r| r.items.iter().copied().filter(|id| !banned[id.index()]).collect())
            .collect();
        self.restrict(records)
    }

    /// `m` records drawn uniformly without replacement, kept in their
    /// original relative order.
    pub fn subsample(&self, m: usize, seed: u64) -> Result<Dataset> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidSize { size: m, max: self.len() });
        }
        let mut rng = rng::from_seed(seed);
        let mut picked = index::sample(&mut rng, self.len(), m).into_vec();
        picked.sort_unstable();
        let records = picked.into_iter().map(|i| self.records[i].items.clone()).collect();
        self.restrict(records)
    }

    pub fn stats(&self) -> DatasetStats {
        let n = self.records.len() as f64;
        let sizes = self.records.iter().map(|r| r.len() as f64);
        let mean = sizes.clone().sum::<f64>() / n;
        let var = sizes.map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        DatasetStats {
            num_users: self.records.len(),
            num_items: self.num_items(),
            max_record_size: self.max_record_size(),
            min_record_size: self.records.iter().map(Record::len).min().unwrap_or(0),
            mean_record_size: mean,
            stdev_record_size: var.sqrt(),
        }
    }

    /// Fraction of records whose full item set equals no other record's.
    pub fn unique_record_fraction(&self) -> f64 {
        let mut counts: HashMap<&[ItemId], usize> = HashMap::new();
        for r in &self.records {
            *counts.entry(r.items()).or_default() += 1;
        }
        let unique = self
            .records
            .iter()
            .filter(|r| counts[r.items()] == 1)
            .count();
        unique as f64 / self.records.len() as f64
    }
}
