//! Elementary-operation instrumentation.
//!
//! Simulation kernels are generic over [`Counter`]. Production runs use
//! [`NoCount`], which compiles away; the cost model checks itself against
//! runs that use [`OpTally`].

use serde::{Deserialize, Serialize};
use std::ops::AddAssign;

/// Sink for elementary-operation counts. Square roots and reciprocals are
/// tallied as `mul`, subtraction as `add`.
pub trait Counter {
    fn add(&mut self, n: u64);
    fn mul(&mut self, n: u64);
    fn exp_eval(&mut self, n: u64);
    fn compare(&mut self, n: u64);
    /// Fold in a tally collected elsewhere (e.g. on another thread).
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoCount;

impl Counter for NoCount {
    #[inline(always)]
    fn add(&mut self, _: u64) {}
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
    #[inline(always)]
    fn exp_eval(&mut self, _: u64) {}
    #[inline(always)]
    fn compare(&mut self, _: u64) {}
    #[inline(always)]
    fn merge(&mut self, _: Self) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpTally {
    pub add: u64,
    pub mul: u64,
    pub exp_eval: u64,
    pub compare: u64,
}

impl OpTally {
    pub fn total(&self) -> u64 {
        self.add + self.mul + self.exp_eval + self.compare
    }

    /// Entries as `(name, count)` in a fixed order.
    pub fn entries(&self) -> [(&'static str, u64); 4] {
        [
            ("add", self.add),
            ("mul", self.mul),
            ("exp_eval", self.exp_eval),
            ("compare", self.compare),
        ]
    }

    pub fn scaled(&self, k: u64) -> OpTally {
        OpTally {
            add: self.add * k,
            mul: self.mul * k,
            exp_eval: self.exp_eval * k,
            compare: self.compare * k,
        }
    }
}

impl Counter for OpTally {
    #[inline]
    fn add(&mut self, n: u64) {
        self.add += n;
    }
    #[inline]
    fn mul(&mut self, n: u64) {
        self.mul += n;
    }
    #[inline]
    fn exp_eval(&mut self, n: u64) {
        self.exp_eval += n;
    }
    #[inline]
    fn compare(&mut self, n: u64) {
        self.compare += n;
    }
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl AddAssign for OpTally {
    fn add_assign(&mut self, rhs: OpTally) {
        self.add += rhs.add;
        self.mul += rhs.mul;
        self.exp_eval += rhs.exp_eval;
        self.compare += rhs.compare;
    }
}

impl std::iter::Sum for OpTally {
    fn sum<I: Iterator<Item = OpTally>>(iter: I) -> OpTally {
        let mut acc = OpTally::default();
        for t in iter {
            acc += t;
        }
        acc
    }
}
