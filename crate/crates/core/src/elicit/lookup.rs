//! Precomputed robust queries keyed by the responses given so far.
//!
//! Because the robust query problem is deterministic, the query asked at
//! step `k` depends only on the first `k - 1` responses. The table maps
//! each such response sequence to its query, so a live questionnaire never
//! has to wait on the optimizer.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::RwLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::select::select_query_robust_with;
use super::NoiseParams;
use crate::error::{Error, Result};
use crate::model::{AlternativeSet, Query, QueryHistory, Response};
use crate::par::Execution;

pub const LOOKUP_TABLE_VERSION: u32 = 1;

/// A sequence of responses. Ordered by length, then lexicographically with
/// `1 < 0 < -1`, which is the breadth-first build order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ResponsePath(pub Vec<Response>);

impl ResponsePath {
    pub fn root() -> Self {
        ResponsePath(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, response: Response) -> Self {
        let mut next = self.0.clone();
        next.push(response);
        ResponsePath(next)
    }

    /// All `3^len` paths of the given length in canonical order.
    pub fn all_of_length(len: usize) -> Vec<ResponsePath> {
        let mut level = vec![ResponsePath::root()];
        for _ in 0..len {
            level = level
                .iter()
                .flat_map(|p| Response::ALL.iter().map(move |r| p.child(*r)))
                .collect();
        }
        level
    }
}

impl Ord for ResponsePath {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ResponsePath {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ResponsePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.value().to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ResponsePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(ResponsePath::root());
        }
        s.split(',')
            .map(|part| {
                let v: i8 = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad response {part:?} in path {s:?}")))?;
                Response::from_value(v)
            })
            .collect::<Result<Vec<_>>>()
            .map(ResponsePath)
    }
}

impl Serialize for ResponsePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ResponsePath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupParams {
    #[serde(rename = "I")]
    pub num_alternatives: usize,
    #[serde(rename = "J")]
    pub dim: usize,
    #[serde(rename = "K")]
    pub max_queries: usize,
    pub sigma: f64,
    pub p: f64,
}

impl LookupParams {
    pub fn noise(&self) -> NoiseParams {
        NoiseParams {
            sigma: self.sigma,
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub v: u32,
    pub params: LookupParams,
    pub alternatives_hash: String,
    pub entries: BTreeMap<ResponsePath, Query>,
}

impl LookupTable {
    pub fn empty(alternatives: &AlternativeSet, max_queries: usize, noise: NoiseParams) -> Self {
        LookupTable {
            v: LOOKUP_TABLE_VERSION,
            params: LookupParams {
                num_alternatives: alternatives.len(),
                dim: alternatives.dim(),
                max_queries,
                sigma: noise.sigma,
                p: noise.p,
            },
            alternatives_hash: alternatives.content_hash(),
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, path: &ResponsePath) -> Option<Query> {
        self.entries.get(path).copied()
    }

    /// The queries asked along `path` paired with its responses. Every
    /// proper prefix of `path` must be present.
    pub fn history_for(&self, path: &ResponsePath) -> Result<QueryHistory> {
        let mut history = QueryHistory::new();
        let mut prefix = ResponsePath::root();
        for &response in &path.0 {
            let query = self
                .get(&prefix)
                .ok_or_else(|| Error::TableMismatch(format!("missing entry for path {prefix:?}")))?;
            history.push(query, response);
            prefix = prefix.child(response);
        }
        Ok(history)
    }

    /// Reject a table built for a different alternative set or parameters.
    pub fn check_compatible(&self, alternatives: &AlternativeSet) -> Result<()> {
        if self.v != LOOKUP_TABLE_VERSION {
            return Err(Error::TableMismatch(format!("unsupported version {}", self.v)));
        }
        if self.params.num_alternatives != alternatives.len() || self.params.dim != alternatives.dim() {
            return Err(Error::TableMismatch(format!(
                "table is for I={}, J={} but alternatives have I={}, J={}",
                self.params.num_alternatives,
                self.params.dim,
                alternatives.len(),
                alternatives.dim()
            )));
        }
        if self.alternatives_hash != alternatives.content_hash() {
            return Err(Error::TableMismatch("alternatives hash differs".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let table: LookupTable = serde_json::from_str(s)?;
        if table.v != LOOKUP_TABLE_VERSION {
            return Err(Error::TableMismatch(format!("unsupported version {}", table.v)));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// The robust query after `history`. When the responses so far already
/// contradict every utility in the uncertainty set, no query is robustly
/// better than another, and the first pair not yet asked is used (or the
/// first pair, if all have been asked).
pub fn table_entry(
    alternatives: &AlternativeSet,
    history: &QueryHistory,
    noise: NoiseParams,
    max_queries: usize,
    execution: Execution,
) -> Result<Query> {
    match select_query_robust_with(alternatives, history, noise, max_queries, execution) {
        Ok(sel) => Ok(sel.query),
        Err(Error::NoFeasibleQuery) => {
            let all = alternatives.queries();
            Ok(all
                .iter()
                .copied()
                .find(|q| !history.contains_query(*q))
                .unwrap_or(all[0]))
        }
        Err(e) => Err(e),
    }
}

/// Eagerly solve every response sequence of length `0..depth`, level by
/// level. `progress` is called with `(entries done, entries total)` after
/// each level.
pub fn build_lookup_table(
    alternatives: &AlternativeSet,
    max_queries: usize,
    noise: NoiseParams,
    depth: usize,
    execution: Execution,
    mut progress: impl FnMut(usize, usize),
) -> Result<LookupTable> {
    noise.validate()?;
    if depth == 0 || depth > max_queries {
        return Err(Error::InvalidParameter(format!(
            "depth must lie in 1..={max_queries}, got {depth}"
        )));
    }
    let total: usize = (0..depth).map(|k| 3usize.pow(k as u32)).sum();
    let mut table = LookupTable::empty(alternatives, max_queries, noise);
    for level in 0..depth {
        let paths = ResponsePath::all_of_length(level);
        let histories = paths
            .iter()
            .map(|p| table.history_for(p))
            .collect::<Result<Vec<_>>>()?;
        let selected = execution.map(&histories, |h| {
            table_entry(alternatives, h, noise, max_queries, Execution::Sequential)
        });
        for (path, query) in paths.into_iter().zip(selected) {
            table.entries.insert(path, query?);
        }
        progress(table.len(), total);
    }
    Ok(table)
}

/// A lookup table that solves missing entries on first use.
///
/// Readers share the table; a miss takes the write lock only to insert.
/// Entries are a pure function of the path, so concurrent misses on the
/// same path insert identical values.
#[derive(Debug)]
pub struct LazyLookup {
    alternatives: AlternativeSet,
    noise: NoiseParams,
    max_queries: usize,
    execution: Execution,
    table: RwLock<LookupTable>,
}

impl LazyLookup {
    pub fn new(alternatives: AlternativeSet, max_queries: usize, noise: NoiseParams) -> Result<Self> {
        noise.validate()?;
        let table = LookupTable::empty(&alternatives, max_queries, noise);
        Ok(Self::from_table(alternatives, table, Execution::default()))
    }

    /// Wrap an existing (possibly partial) table.
    pub fn with_table(alternatives: AlternativeSet, table: LookupTable) -> Result<Self> {
        table.check_compatible(&alternatives)?;
        table.params.noise().validate()?;
        Ok(Self::from_table(alternatives, table, Execution::default()))
    }

    fn from_table(alternatives: AlternativeSet, table: LookupTable, execution: Execution) -> Self {
        LazyLookup {
            noise: table.params.noise(),
            max_queries: table.params.max_queries,
            alternatives,
            execution,
            table: RwLock::new(table),
        }
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn alternatives(&self) -> &AlternativeSet {
        &self.alternatives
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise
    }

    pub fn max_queries(&self) -> usize {
        self.max_queries
    }

    /// The robust query to ask after the responses in `path`.
    pub fn query_for(&self, path: &ResponsePath) -> Result<Query> {
        if let Some(q) = self.table.read().expect("lookup lock poisoned").get(path) {
            return Ok(q);
        }
        let history = self.history_for(path)?;
        let query = table_entry(&self.alternatives, &history, self.noise, self.max_queries, self.execution)?;
        self.table
            .write()
            .expect("lookup lock poisoned")
            .entries
            .insert(path.clone(), query);
        Ok(query)
    }

    /// Queries along `path`, solving any missing prefixes.
    pub fn history_for(&self, path: &ResponsePath) -> Result<QueryHistory> {
        let mut history = QueryHistory::new();
        let mut prefix = ResponsePath::root();
        for &response in &path.0 {
            let query = self.query_for(&prefix)?;
            history.push(query, response);
            prefix = prefix.child(response);
        }
        Ok(history)
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("lookup lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> LookupTable {
        self.table.read().expect("lookup lock poisoned").clone()
    }
}
