use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::names::ConventionId;

pub type AgentId = usize;

/// What a single agent learns from one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub step: u64,
    pub own_choice: ConventionId,
    pub partner_choice: ConventionId,
    pub success: bool,
    pub payoff: i32,
}

impl InteractionRecord {
    pub fn new(
        step: u64,
        own_choice: ConventionId,
        partner_choice: ConventionId,
        payoffs: (i32, i32),
    ) -> Self {
        let success = own_choice == partner_choice;
        InteractionRecord {
            step,
            own_choice,
            partner_choice,
            success,
            payoff: if success { payoffs.0 } else { payoffs.1 },
        }
    }
}

/// Duplicate-free, insertion-ordered set of known names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Inventory(Vec<ConventionId>);

impl Inventory {
    pub fn new() -> Self {
        Inventory(Vec::new())
    }

    pub fn singleton(name: ConventionId) -> Self {
        Inventory(vec![name])
    }

    /// Returns true if the name was not already present.
    pub fn insert(&mut self, name: ConventionId) -> bool {
        if self.0.contains(&name) {
            false
        } else {
            self.0.push(name);
            true
        }
    }

    pub fn contains(&self, name: ConventionId) -> bool {
        self.0.contains(&name)
    }

    pub fn collapse_to(&mut self, name: ConventionId) {
        self.0.clear();
        self.0.push(name);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[ConventionId] {
        &self.0
    }

    pub fn single(&self) -> Option<ConventionId> {
        match self.0.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ConventionId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<ConventionId> for Inventory {
    fn from_iter<T: IntoIterator<Item = ConventionId>>(iter: T) -> Self {
        let mut inv = Inventory::new();
        for name in iter {
            inv.insert(name);
        }
        inv
    }
}

/// Bounded FIFO of interaction records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    records: VecDeque<InteractionRecord>,
    capacity: usize,
}

impl Memory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be at least 1");
        Memory {
            records: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn push(&mut self, record: InteractionRecord) {
        self.records.push_back(record);
        while self.records.len() > self.capacity {
            self.records.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &InteractionRecord> + ExactSizeIterator {
        self.records.iter()
    }

    pub fn last(&self) -> Option<&InteractionRecord> {
        self.records.back()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyTag {
    MinimalNg,
    MemoryCoordination,
    Committed,
    ExternalModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub inventory: Inventory,
    pub memory: Memory,
    pub policy: PolicyTag,
    pub committed_to: Option<ConventionId>,
}

impl AgentState {
    pub fn new(id: AgentId, memory_capacity: usize, policy: PolicyTag) -> Self {
        AgentState {
            id,
            inventory: Inventory::new(),
            memory: Memory::new(memory_capacity),
            policy,
            committed_to: None,
        }
    }
}
