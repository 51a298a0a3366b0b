//! Task collections: synthetic generators, CSV ingestion and splitting.

pub mod csv;
pub mod split;
pub mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{check_dim, Error, Result};

pub use self::csv::{read_bags, read_bags_from, write_bags, write_bags_to};
pub use split::split_collection;
pub use synth::{
    ellipse_label, gen_collection, gen_collection_with, gen_ellipse_task, gen_regression_collection, sample_rotation,
    task_params, EllipseTaskParams, DEFAULT_SEMI_MAJOR, DEFAULT_SEMI_MINOR,
};

/// Where a collection came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
}

/// Bags sharing one feature dimension, with unique task ids.
#[derive(Debug, Clone, PartialEq)]
pub struct BagCollection {
    bags: Vec<Bag>,
    dim: usize,
    provenance: Provenance,
}

impl BagCollection {
    pub fn new(bags: Vec<Bag>, provenance: Provenance) -> Result<Self> {
        let dim = bags
            .first()
            .map(Bag::dim)
            .ok_or_else(|| Error::invalid("a collection needs at least one bag"))?;
        Self::with_dim(bags, dim, provenance)
    }

    /// Like [`BagCollection::new`] but also accepts an empty list.
    pub fn with_dim(bags: Vec<Bag>, dim: usize, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::new();
        for b in &bags {
            check_dim(dim, b.dim())?;
            if !seen.insert(b.task_id()) {
                return Err(Error::invalid(format!("duplicate task id `{}`", b.task_id())));
            }
        }
        Ok(BagCollection { bags, dim, provenance })
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn into_bags(self) -> Vec<Bag> {
        self.bags
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_labeled(&self) -> bool {
        !self.bags.is_empty() && self.bags.iter().all(Bag::is_labeled)
    }

    pub fn get(&self, task_id: &str) -> Option<&Bag> {
        self.bags.iter().find(|b| b.task_id() == task_id)
    }
}
