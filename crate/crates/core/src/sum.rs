//! Correctly rounded floating point summation.
//!
//! Keeps a list of non-overlapping partial sums (Shewchuk's algorithm) and
//! rounds once at the end, so the result does not depend on the order in
//! which terms were added. Means and Fréchet means use this to stay
//! invariant under row permutation.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct ExactSum<T> {
    partials: Vec<T>,
}

impl<T: Scalar> ExactSum<T> {
    pub fn new() -> Self {
        Self {
            partials: Vec::new(),
        }
    }

    pub fn add(&mut self, x: T) {
        let mut x = x;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != T::zero() {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Correctly rounded value of the sum so far. Does not consume state.
    pub fn value(&self) -> T {
        let p = &self.partials;
        let Some(&last) = p.last() else {
            return T::zero();
        };
        if !last.is_finite() {
            return p.iter().fold(T::zero(), |a, &b| a + b);
        }
        let mut n = p.len() - 1;
        let mut hi = last;
        let mut lo = T::zero();
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != T::zero() {
                break;
            }
        }
        // Half-way case: nudge towards the remaining partials.
        if n > 0
            && ((lo < T::zero() && p[n - 1] < T::zero()) || (lo > T::zero() && p[n - 1] > T::zero()))
        {
            let two = T::lit(2.0);
            let y = lo * two;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl<T: Scalar> Extend<T> for ExactSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Correctly rounded sum of a sequence.
pub fn exact_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    let mut s = ExactSum::new();
    s.extend(iter);
    s.value()
}
