use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{Array2, ArrayView2};

use crate::error::{check_finite, Error, Result};

/// One task's sample: `n` feature vectors of dimension `d`, optionally
/// labelled. A bag stands for the empirical marginal `(1/n) sum_j delta_{x_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    task_id: String,
    points: Array2<f64>,
    labels: Option<Vec<f64>>,
}

impl Bag {
    pub fn new(task_id: impl Into<String>, points: Array2<f64>, labels: Option<Vec<f64>>) -> Result<Self> {
        let task_id = task_id.into();
        if points.nrows() == 0 {
            return Err(Error::EmptyBag(task_id));
        }
        if points.ncols() == 0 {
            return Err(Error::invalid(format!("bag `{task_id}` has zero-dimensional points")));
        }
        let points = if points.is_standard_layout() {
            points
        } else {
            points.as_standard_layout().into_owned()
        };
        check_finite(points.as_slice().expect("standard layout"), "bag points")?;
        if let Some(labels) = &labels {
            if labels.len() != points.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: points.nrows(),
                    found: labels.len(),
                });
            }
            check_finite(labels, "bag labels")?;
        }
        Ok(Bag {
            task_id,
            points,
            labels,
        })
    }

    /// Build an unlabelled bag from row-major data.
    pub fn from_rows(task_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let task_id = task_id.into();
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        let points = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Bag::new(task_id, points, None)
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: labels.len(),
            });
        }
        check_finite(&labels, "bag labels")?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(&self) -> Bag {
        Bag {
            task_id: self.task_id.clone(),
            points: self.points.clone(),
            labels: None,
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    /// Always false: bags are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points
            .as_slice()
            .expect("standard layout")
            .chunks_exact(self.dim())
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Hash of the point contents (bit patterns), used with the task id to
    /// key cached embedding norms.
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.points.nrows().hash(&mut h);
        self.points.ncols().hash(&mut h);
        for v in self.points.iter() {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Bag> {
        let d = self.dim();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            flat.extend_from_slice(self.point(r));
        }
        let points = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::invalid(e.to_string()))?;
        let labels = self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect());
        Bag::new(self.task_id.clone(), points, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_empty_and_mismatched() {
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(Bag::new("t", empty, None), Err(Error::EmptyBag(_))));
        let pts = array![[0.0, 1.0], [2.0, 3.0]];
        assert!(matches!(
            Bag::new("t", pts.clone(), Some(vec![1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = array![[f64::NAN, 1.0]];
        assert!(matches!(Bag::new("t", bad, None), Err(Error::NonFinite(_))));
    }

    #[test]
    fn row_access() {
        let bag = Bag::from_rows("t", &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(bag.point(1), &[3.0, 4.0]);
        assert_eq!(bag.rows().count(), 2);
        assert_ne!(bag.content_hash(), bag.select(&[1, 0]).unwrap().content_hash());
    }
}
