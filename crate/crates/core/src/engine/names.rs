use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Interned name from the convention pool.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConventionId(pub u32);

impl ConventionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConventionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("name pool is empty")]
    Empty,
    #[error("empty label at position {0}")]
    EmptyLabel(usize),
    #[error("duplicate label {0:?}")]
    Duplicate(String),
}

/// Finite pool of payoff-equivalent labels, plus any names invented during a
/// run. Ids `0..fixed_len()` are the configured pool; invented ids follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePool {
    labels: Vec<String>,
    index: HashMap<String, ConventionId>,
    fixed: usize,
}

impl NamePool {
    pub fn new<I, S>(labels: I) -> Result<Self, PoolError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut pool = NamePool {
            labels: Vec::new(),
            index: HashMap::new(),
            fixed: 0,
        };
        for (i, label) in labels.into_iter().enumerate() {
            let label = label.into();
            if label.is_empty() {
                return Err(PoolError::EmptyLabel(i));
            }
            if pool.index.contains_key(&label) {
                return Err(PoolError::Duplicate(label));
            }
            pool.push(label);
        }
        if pool.labels.is_empty() {
            return Err(PoolError::Empty);
        }
        pool.fixed = pool.labels.len();
        Ok(pool)
    }

    /// Pool of `size` generated labels: `A`..`Z` when it fits, `c0`.. otherwise.
    pub fn with_size(size: usize) -> Result<Self, PoolError> {
        NamePool::new(default_labels(size))
    }

    /// A pool with no fixed names, used by invention-based dynamics.
    pub fn unbounded() -> Self {
        NamePool {
            labels: Vec::new(),
            index: HashMap::new(),
            fixed: 0,
        }
    }

    fn push(&mut self, label: String) -> ConventionId {
        let id = ConventionId(self.labels.len() as u32);
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    /// Adds a never-before-used name and returns its id.
    pub fn invent(&mut self) -> ConventionId {
        let mut k = self.labels.len() - self.fixed_len();
        let mut label = format!("w{k}");
        while self.index.contains_key(&label) {
            k += 1;
            label = format!("w{k}");
        }
        self.push(label)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of configured (non-invented) names.
    pub fn fixed_len(&self) -> usize {
        self.fixed
    }

    pub fn fixed_ids(&self) -> impl Iterator<Item = ConventionId> {
        (0..self.fixed as u32).map(ConventionId)
    }

    pub fn label(&self, id: ConventionId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn fixed_labels(&self) -> &[String] {
        &self.labels[..self.fixed]
    }

    pub fn id(&self, label: &str) -> Option<ConventionId> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, id: ConventionId) -> bool {
        id.index() < self.labels.len()
    }
}

pub fn default_labels(size: usize) -> Vec<String> {
    if size <= 26 {
        (0..size).map(|i| char::from(b'A' + i as u8).to_string()).collect()
    } else {
        (0..size).map(|i| format!("c{i}")).collect()
    }
}
