use serde::{Deserialize, Serialize};

use super::{NnError, Result};

pub const ADAGRAD_EPS: f64 = 1e-8;

/// Per-parameter sums of squared gradients.
///
/// Accumulators are allocated lazily on the first step, one buffer per
/// parameter slice, in the order the slices are presented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdagradState {
    pub lr: f64,
    pub eps: f64,
    pub acc: Vec<Vec<f64>>,
}

impl AdagradState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            eps: ADAGRAD_EPS,
            acc: Vec::new(),
        }
    }

    /// `acc += g^2; p -= lr * g / (sqrt(acc) + eps)` for every slot.
    pub fn step(&mut self, slots: Vec<(&mut [f64], &[f64])>) -> Result<()> {
        if self.acc.is_empty() {
            self.acc = slots.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
        }
        if self.acc.len() != slots.len() {
            return Err(NnError::DimensionMismatch {
                context: "adagrad slot count",
                expected: self.acc.len(),
                actual: slots.len(),
            });
        }
        for (acc, (params, grads)) in self.acc.iter().zip(&slots) {
            if acc.len() != params.len() || params.len() != grads.len() {
                return Err(NnError::DimensionMismatch {
                    context: "adagrad slot length",
                    expected: acc.len(),
                    actual: grads.len(),
                });
            }
        }
        for (acc, (params, grads)) in self.acc.iter_mut().zip(slots) {
            for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
                *a += g * g;
                *p -= self.lr * g / (a.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Single-slot form of [`AdagradState::step`].
pub fn adagrad_step(params: &mut [f64], grads: &[f64], state: &mut AdagradState) -> Result<()> {
    state.step(vec![(params, grads)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut st = AdagradState::new(0.01);
        let mut p = vec![1.5, -2.0];
        adagrad_step(&mut p, &[0.0, 0.0], &mut st).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut st = AdagradState::new(0.01);
        let mut p = vec![0.0];
        adagrad_step(&mut p, &[3.0], &mut st).unwrap();
        let expect = -0.01 * 3.0 / (3.0 + 1e-8);
        assert_eq!(p[0], expect);
        assert!((p[0] + 0.01).abs() < 1e-10);
        assert_eq!(st.acc[0][0], 9.0);
    }

    #[test]
    fn repeated_gradient_shrinks_updates() {
        let mut st = AdagradState::new(0.01);
        let mut p = vec![0.0];
        adagrad_step(&mut p, &[1.0], &mut st).unwrap();
        let first = p[0];
        adagrad_step(&mut p, &[1.0], &mut st).unwrap();
        let second = p[0] - first;
        assert!(second.abs() < first.abs());
        assert!((second + 0.01 / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn shape_changes_are_rejected() {
        let mut st = AdagradState::new(0.01);
        let mut p = vec![0.0; 2];
        adagrad_step(&mut p, &[1.0, 1.0], &mut st).unwrap();
        let mut q = vec![0.0; 3];
        assert!(adagrad_step(&mut q, &[1.0; 3], &mut st).is_err());
    }
}
