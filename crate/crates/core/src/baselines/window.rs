use std::collections::VecDeque;

use crate::space::Observation;

/// The most recent `capacity` observations, oldest first.
#[derive(Debug, Clone)]
pub struct Window {
    capacity: usize,
    items: VecDeque<Observation>,
}

impl Window {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1024)) }
    }

    pub fn push(&mut self, obs: Observation) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(obs);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Observation> + ExactSizeIterator {
        self.items.iter()
    }

    pub fn to_vec(&self) -> Vec<Observation> {
        self.items.iter().copied().collect()
    }
}
