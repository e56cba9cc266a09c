use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Huber,
    Mae,
    Mse,
}

impl LossKind {
    /// Mean loss and its gradient with respect to each prediction.
    pub fn evaluate(self, pred: &[f64], target: &[f64], delta: f64) -> Result<(f64, Vec<f64>), NetError> {
        match self {
            LossKind::Huber => huber_loss(pred, target, delta),
            LossKind::Mae => mae_loss(pred, target),
            LossKind::Mse => mse_loss(pred, target),
        }
    }
}

fn check(pred: &[f64], target: &[f64]) -> Result<(), NetError> {
    if pred.is_empty() {
        return Err(NetError::Empty("prediction vector"));
    }
    if pred.len() != target.len() {
        return Err(NetError::shape("loss target", pred.len(), target.len()));
    }
    Ok(())
}

/// Mean Huber loss: `e²/2` for `|e| <= delta`, `delta·(|e| - delta/2)` beyond.
pub fn huber_loss(pred: &[f64], target: &[f64], delta: f64) -> Result<(f64, Vec<f64>), NetError> {
    check(pred, target)?;
    if !(delta > 0.0) {
        return Err(NetError::InvalidConfig("huber delta must be positive".into()));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            if e.abs() <= delta {
                total += 0.5 * e * e;
                e / n
            } else {
                total += delta * (e.abs() - 0.5 * delta);
                delta * e.signum() / n
            }
        })
        .collect();
    Ok((total / n, grad))
}

/// Mean absolute error with its subgradient (0 where the error is 0).
pub fn mae_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NetError> {
    check(pred, target)?;
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            total += e.abs();
            if e == 0.0 {
                0.0
            } else {
                e.signum() / n
            }
        })
        .collect();
    Ok((total / n, grad))
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NetError> {
    check(pred, target)?;
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            total += e * e;
            2.0 * e / n
        })
        .collect();
    Ok((total / n, grad))
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64, NetError> {
    mae_loss(pred, target).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss(&[1.0], &[1.0], 1.0).unwrap(), (0.0, vec![0.0]));
        assert_eq!(huber_loss(&[0.5], &[0.0], 1.0).unwrap().0, 0.125);
        let (l, g) = huber_loss(&[2.0], &[0.0], 1.0).unwrap();
        assert_eq!((l, g), (1.5, vec![1.0]));
        // both branches meet at |e| = delta
        assert_eq!(huber_loss(&[1.0], &[0.0], 1.0).unwrap().0, 0.5);
        assert_eq!(huber_loss(&[-3.0], &[0.0], 1.0).unwrap().1, vec![-1.0]);
    }

    #[test]
    fn mae_values() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mae(&[3.0, 1.0], &[2.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(huber_loss(&[], &[], 1.0), Err(NetError::Empty(_))));
        assert!(matches!(mae(&[], &[]), Err(NetError::Empty(_))));
        assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(NetError::Shape { .. })));
    }

    proptest! {
        #[test]
        fn huber_tends_to_half_squared_error(e in -50.0f64..50.0) {
            let (l, _) = huber_loss(&[e], &[0.0], 1e6).unwrap();
            prop_assert!((l - 0.5 * e * e).abs() <= 1e-12 * (1.0 + e * e));
        }

        #[test]
        fn huber_linear_far_from_zero(e in 2.0f64..1e4, delta in 0.01f64..1.0, neg in any::<bool>()) {
            let e = if neg { -e } else { e };
            let (l, g) = huber_loss(&[e], &[0.0], delta).unwrap();
            prop_assert!((l - (delta * e.abs() - 0.5 * delta * delta)).abs() <= 1e-9 * e.abs());
            prop_assert_eq!(g[0], delta * e.signum());
        }

        #[test]
        fn mae_is_permutation_invariant(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let (mut pr, mut tr) = (p.clone(), t.clone());
            pr.reverse();
            tr.reverse();
            let a = mae(&p, &t).unwrap();
            let b = mae(&pr, &tr).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
