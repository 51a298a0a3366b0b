use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    /// `max(0, 1 - y t)`, labels in {-1, +1}.
    Hinge,
    /// `max(0, |t - y| - epsilon)`.
    EpsInsensitive { epsilon: f64 },
}

impl Loss {
    pub fn eps_insensitive(epsilon: f64) -> Result<Self> {
        let l = Loss::EpsInsensitive { epsilon };
        l.validate()?;
        Ok(l)
    }

    /// Tube half-width `0.1 * sd(labels)` (population standard deviation).
    pub fn eps_from_labels(labels: &[f64]) -> Self {
        let n = labels.len().max(1) as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        Loss::EpsInsensitive {
            epsilon: 0.1 * var.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::EpsInsensitive { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Loss::Hinge)
    }

    /// Check that every label belongs to the loss's domain.
    pub fn check_labels(&self, labels: &[f64]) -> Result<()> {
        if self.is_classification() {
            if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
                return Err(Error::invalid(format!(
                    "hinge loss needs labels in {{-1, +1}}, found {bad}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match *self {
            Loss::Hinge => (1.0 - y * t).max(0.0),
            Loss::EpsInsensitive { epsilon } => ((t - y).abs() - epsilon).max(0.0),
        }
    }
}

pub fn loss_eval(loss: &Loss, t: f64, y: f64) -> f64 {
    loss.eval(t, y)
}
