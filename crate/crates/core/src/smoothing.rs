//! Temporal smoothing of pairwise counts.
//!
//! Three matrices are carried from step to step:
//!
//! ```text
//!   ỹ_t  = α·y_t + (1−α)·ỹ_{t−1}                 smoothed counts
//!   λ̃_t  = α·λ_t + (1−α)·λ̃_{t−1}                 their expectation
//!   y*_t = max(α·ỹ_t + (1−α)·y*_{t−1}, λ̃_t)      reflected at the mean
//! ```
//!
//! All three start from λ_1. The reflected process smooths the already
//! smoothed ỹ, exactly as the recursion is written.

use crate::error::{Error, Result};
use crate::types::{Matrix, NetworkSnapshot, SelfPairs};

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherState {
    pub ytilde: Matrix,
    pub ltilde: Matrix,
    pub ystar: Matrix,
    /// Time of the last absorbed snapshot; 0 before the first.
    pub t: u32,
    pub alpha: f64,
    /// Nodes `0..active` took part in the last snapshot.
    pub active: usize,
    pub self_pairs: SelfPairs,
}

/// Seeds the smoother with λ_1. Team sums will skip self-pairs.
pub fn init_state(lambda_1: &Matrix, alpha: f64) -> Result<SmootherState> {
    init_state_with(lambda_1, alpha, SelfPairs::Exclude)
}

pub fn init_state_with(lambda_1: &Matrix, alpha: f64, self_pairs: SelfPairs) -> Result<SmootherState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::BadAlpha(alpha));
    }
    let n = lambda_1.n();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "networks need at least 2 nodes, got {n}"
        )));
    }
    check_positive(lambda_1, 1, n)?;
    Ok(SmootherState {
        ytilde: lambda_1.clone(),
        ltilde: lambda_1.clone(),
        ystar: lambda_1.clone(),
        t: 0,
        alpha,
        active: n,
        self_pairs,
    })
}

fn check_positive(lambda: &Matrix, t: u32, active: usize) -> Result<()> {
    let n = lambda.n();
    for i in 0..active {
        for j in 0..active {
            let v = lambda.as_slice()[i * n + j];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveMean {
                    src: i + 1,
                    dst: j + 1,
                    t,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Pure form of [`SmootherState::advance`].
pub fn step(state: &SmootherState, y: &NetworkSnapshot, lambda_t: &Matrix) -> Result<SmootherState> {
    let mut next = state.clone();
    next.advance(y, lambda_t)?;
    Ok(next)
}

impl SmootherState {
    pub fn n(&self) -> usize {
        self.ytilde.n()
    }

    /// Absorbs the snapshot for time `t + 1`.
    ///
    /// Only the active block `0..y.active` is updated; entries of inactive
    /// nodes keep their last values until the node returns.
    pub fn advance(&mut self, y: &NetworkSnapshot, lambda_t: &Matrix) -> Result<()> {
        let n = self.n();
        if y.t != self.t + 1 {
            return Err(Error::TimeSkew {
                state: self.t,
                found: y.t,
            });
        }
        if y.n() != n || lambda_t.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "state is {n}×{n}, snapshot {}×{}, means {}×{}",
                y.n(),
                y.n(),
                lambda_t.n(),
                lambda_t.n()
            )));
        }
        let active = y.active;
        check_positive(lambda_t, y.t, active)?;

        let a = self.alpha;
        let b = 1.0 - a;
        let counts = y.counts.as_slice();
        let lam = lambda_t.as_slice();
        let yt = self.ytilde.as_mut_slice();
        let lt = self.ltilde.as_mut_slice();
        let ys = self.ystar.as_mut_slice();
        for i in 0..active {
            let row = i * n..i * n + active;
            let (yt, lt, ys) = (&mut yt[row.clone()], &mut lt[row.clone()], &mut ys[row.clone()]);
            let (c, l) = (&counts[row.clone()], &lam[row]);
            for j in 0..active {
                let ytn = a * f64::from(c[j]) + b * yt[j];
                let ltn = a * l[j] + b * lt[j];
                let ysn = (a * ytn + b * ys[j]).max(ltn);
                debug_assert!(ysn >= ltn);
                yt[j] = ytn;
                lt[j] = ltn;
                ys[j] = ysn;
            }
        }
        self.t = y.t;
        self.active = active;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CountMatrix;

    fn snapshot(t: u32, n: usize, f: impl Fn(usize, usize) -> u32) -> NetworkSnapshot {
        let mut c = CountMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c.set(i, j, f(i, j));
                }
            }
        }
        NetworkSnapshot::new(t, c).unwrap()
    }

    #[test]
    fn init_copies_the_first_means() {
        let lam = Matrix::filled(3, 1.0);
        let s = init_state(&lam, 0.5).unwrap();
        assert_eq!(s.t, 0);
        assert_eq!(s.ytilde, lam);
        assert_eq!(s.ltilde, lam);
        assert_eq!(s.ystar, lam);
    }

    #[test]
    fn init_rejects_bad_inputs() {
        let lam = Matrix::filled(3, 1.0);
        assert_eq!(init_state(&lam, 1.2), Err(Error::BadAlpha(1.2)));
        let mut zero = lam.clone();
        zero.set(0, 2, 0.0);
        assert!(matches!(
            init_state(&zero, 0.5),
            Err(Error::NonPositiveMean { src: 1, dst: 3, .. })
        ));
    }

    #[test]
    fn two_step_hand_recursion() {
        let lam = Matrix::filled(2, 1.0);
        let s0 = init_state(&lam, 0.5).unwrap();
        let s1 = step(&s0, &snapshot(1, 2, |_, _| 2), &lam).unwrap();
        assert_eq!(s1.ytilde.get(0, 1), 1.5);
        assert_eq!(s1.ystar.get(0, 1), 1.25);
        assert_eq!(s1.ltilde.get(0, 1), 1.0);
        let s2 = step(&s1, &snapshot(2, 2, |_, _| 0), &lam).unwrap();
        assert_eq!(s2.ytilde.get(0, 1), 0.75);
        // 0.5·0.75 + 0.5·1.25 = 1.0, the floor binds exactly.
        assert_eq!(s2.ystar.get(0, 1), 1.0);
    }

    #[test]
    fn constant_input_at_the_mean_is_a_fixed_point() {
        // Off-diagonal counts equal to the mean; c is an integer so the
        // count matrix can carry it.
        let lam = Matrix::filled(3, 2.0);
        let mut s = init_state(&lam, 0.075).unwrap();
        for t in 1..=50 {
            s.advance(&snapshot(t, 3, |_, _| 2), &lam).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert_eq!(s.ytilde.get(i, j), 2.0);
                        assert_eq!(s.ystar.get(i, j), 2.0);
                    }
                    assert_eq!(s.ltilde.get(i, j), 2.0);
                }
            }
        }
    }

    #[test]
    fn time_skew_and_dimension_errors() {
        let lam = Matrix::filled(3, 1.0);
        let s = init_state(&lam, 0.5).unwrap();
        assert_eq!(
            step(&s, &snapshot(2, 3, |_, _| 0), &lam),
            Err(Error::TimeSkew { state: 0, found: 2 })
        );
        assert!(matches!(
            step(&s, &snapshot(1, 4, |_, _| 0), &Matrix::filled(4, 1.0)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inactive_nodes_are_frozen() {
        let lam = Matrix::filled(4, 1.0);
        let mut s = init_state(&lam, 0.5).unwrap();
        let mut c = CountMatrix::zeros(4);
        c.set(0, 1, 3);
        let snap = NetworkSnapshot::with_active(1, 2, c).unwrap();
        s.advance(&snap, &lam).unwrap();
        assert_eq!(s.active, 2);
        assert_eq!(s.ytilde.get(0, 1), 2.0);
        assert_eq!(s.ytilde.get(2, 3), 1.0);
        assert_eq!(s.ytilde.get(0, 3), 1.0);
    }
}
