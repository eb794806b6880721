//! Alternatives, pairwise queries and the responses they elicit.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The finite set of alternatives, each a feature vector of dimension `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSet {
    labels: Vec<String>,
    features: Vec<Vec<f64>>,
}

impl AlternativeSet {
    pub fn new(labels: Vec<String>, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::TooFewAlternatives {
                required: 2,
                found: features.len(),
            });
        }
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("alternatives have no features".into()));
        }
        for row in &features {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite feature value".into()));
            }
        }
        Ok(AlternativeSet { labels, features })
    }

    /// Labels default to `policy 0`, `policy 1`, ...
    pub fn from_features(features: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..features.len()).map(|i| format!("policy {i}")).collect();
        Self::new(labels, features)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn get(&self, index: usize) -> Result<&[f64]> {
        self.features
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.len(),
            })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `x^first - x^second` for a query.
    pub fn difference(&self, query: Query) -> Result<Vec<f64>> {
        let a = self.get(query.first)?;
        let b = self.get(query.second)?;
        Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }

    /// Number of distinct pairwise queries, `I(I-1)/2`.
    pub fn num_queries(&self) -> usize {
        num_queries(self.len())
    }

    /// Every query `(i, i')` with `i < i'`, in lexicographic order.
    pub fn queries(&self) -> Vec<Query> {
        all_queries(self.len())
    }

    /// SHA-256 over the dimensions and the bit patterns of every feature.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        for row in &self.features {
            for v in row {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

pub fn num_queries(num_alternatives: usize) -> usize {
    num_alternatives * num_alternatives.saturating_sub(1) / 2
}

pub fn all_queries(num_alternatives: usize) -> Vec<Query> {
    let mut out = Vec::with_capacity(num_queries(num_alternatives));
    for i in 0..num_alternatives {
        for j in i + 1..num_alternatives {
            out.push(Query { first: i, second: j });
        }
    }
    out
}

/// A comparison between alternatives `first < second` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", try_from = "[usize; 2]")]
pub struct Query {
    pub first: usize,
    pub second: usize,
}

impl Query {
    pub fn new(first: usize, second: usize) -> Result<Self> {
        if first >= second {
            return Err(Error::InvalidParameter(format!(
                "query ({first}, {second}) must satisfy first < second"
            )));
        }
        Ok(Query { first, second })
    }

    pub fn check(self, num_alternatives: usize) -> Result<Self> {
        if self.second >= num_alternatives {
            return Err(Error::IndexOutOfRange {
                index: self.second,
                len: num_alternatives,
            });
        }
        Ok(self)
    }
}

impl From<Query> for [usize; 2] {
    fn from(q: Query) -> Self {
        [q.first, q.second]
    }
}

impl TryFrom<[usize; 2]> for Query {
    type Error = Error;

    fn try_from([a, b]: [usize; 2]) -> Result<Self> {
        Query::new(a, b)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// `1` prefers the first alternative, `0` indifferent, `-1` prefers the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Response {
    PrefersFirst,
    Indifferent,
    PrefersSecond,
}

impl Response {
    pub const ALL: [Response; 3] = [Response::PrefersFirst, Response::Indifferent, Response::PrefersSecond];

    pub fn value(self) -> i8 {
        match self {
            Response::PrefersFirst => 1,
            Response::Indifferent => 0,
            Response::PrefersSecond => -1,
        }
    }

    pub fn from_value(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Response::PrefersFirst),
            0 => Ok(Response::Indifferent),
            -1 => Ok(Response::PrefersSecond),
            other => Err(Error::InvalidParameter(format!("response {other} not in {{-1, 0, 1}}"))),
        }
    }

    /// The same preference expressed for the query with sides swapped.
    pub fn flipped(self) -> Self {
        match self {
            Response::PrefersFirst => Response::PrefersSecond,
            Response::Indifferent => Response::Indifferent,
            Response::PrefersSecond => Response::PrefersFirst,
        }
    }
}

impl From<Response> for i8 {
    fn from(r: Response) -> i8 {
        r.value()
    }
}

impl TryFrom<i8> for Response {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        Response::from_value(v)
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Queries asked so far together with the responses they received.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryHistory {
    entries: Vec<(Query, Response)>,
}

impl QueryHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(Query, Response)>) -> Self {
        QueryHistory { entries }
    }

    pub fn push(&mut self, query: Query, response: Response) {
        self.entries.push((query, response));
    }

    pub fn with(&self, query: Query, response: Response) -> Self {
        let mut next = self.clone();
        next.push(query, response);
        next
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Query, Response)] {
        &self.entries
    }

    pub fn contains_query(&self, query: Query) -> bool {
        self.entries.iter().any(|(q, _)| *q == query)
    }

    pub fn responses(&self) -> Vec<Response> {
        self.entries.iter().map(|(_, r)| *r).collect()
    }

    /// Concatenation of two histories, `self` first.
    pub fn concat(&self, other: &QueryHistory) -> Self {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        QueryHistory { entries }
    }

    pub fn validate(&self, num_alternatives: usize) -> Result<()> {
        for (q, _) in &self.entries {
            q.check(num_alternatives)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_universe_size() {
        assert_eq!(num_queries(25), 300);
        assert_eq!(all_queries(25).len(), 300);
        assert_eq!(all_queries(3), vec![Query { first: 0, second: 1 }, Query { first: 0, second: 2 }, Query { first: 1, second: 2 }]);
    }

    #[test]
    fn query_requires_ordered_pair() {
        assert!(Query::new(2, 1).is_err());
        assert!(Query::new(1, 1).is_err());
        assert!(Query::new(0, 3).unwrap().check(3).is_err());
    }

    #[test]
    fn response_serde_uses_ternary_values() {
        let json = serde_json::to_string(&[Response::PrefersFirst, Response::Indifferent, Response::PrefersSecond]).unwrap();
        assert_eq!(json, "[1,0,-1]");
        assert!(serde_json::from_str::<Response>("2").is_err());
        assert_eq!(serde_json::to_string(&Query { first: 3, second: 7 }).unwrap(), "[3,7]");
        assert!(serde_json::from_str::<Query>("[7,3]").is_err());
    }

    #[test]
    fn alternative_set_validation() {
        assert!(AlternativeSet::from_features(vec![vec![1.0]]).is_err());
        assert!(AlternativeSet::from_features(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        let x = AlternativeSet::from_features(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(x.difference(Query { first: 0, second: 1 }).unwrap(), vec![1.0, -1.0]);
        assert_eq!(x.content_hash().len(), 64);
    }
}
