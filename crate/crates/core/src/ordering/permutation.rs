use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{OrderingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Ordering of one cluster's features (or of all features, as seen by
    /// one sample cluster).
    Local { cluster: usize },
    /// Dataset-wide ordering of all `m` columns.
    Global,
}

/// An arrangement of feature indices. `order[p]` is the feature placed at
/// position `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Permutation {
    order: Vec<usize>,
    scope: Scope,
    cost: Option<f64>,
}

impl Permutation {
    pub fn global(order: Vec<usize>) -> Self {
        Self {
            order,
            scope: Scope::Global,
            cost: None,
        }
    }

    pub fn local(cluster: usize, order: Vec<usize>) -> Self {
        Self {
            order,
            scope: Scope::Local { cluster },
            cost: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::global((0..n).collect())
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn cost(&self) -> Option<f64> {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut r = self.clone();
        r.order.reverse();
        r
    }

    /// Position of every feature in this arrangement.
    pub fn positions(&self) -> HashMap<usize, usize> {
        self.order.iter().enumerate().map(|(p, &f)| (f, p)).collect()
    }

    /// Checks that the order is a bijection onto `0..n`.
    pub fn check_bijective(&self, n: usize) -> Result<()> {
        if self.order.len() != n {
            return Err(OrderingError::NotBijective(format!("length {} over {n} items", self.order.len())));
        }
        let mut sorted = self.order.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(OrderingError::NotBijective(format!("{:?} is not a permutation of 0..{n}", self.order)));
        }
        Ok(())
    }

    /// Checks that the order contains exactly the given (sorted) items.
    pub fn check_covers(&self, items: &[usize]) -> Result<()> {
        let mut sorted = self.order.clone();
        sorted.sort_unstable();
        if sorted != items {
            return Err(OrderingError::VertexMismatch(format!("order {:?} vs vertices {items:?}", self.order)));
        }
        Ok(())
    }
}
