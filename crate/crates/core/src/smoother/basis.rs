//! Uniform B-spline bases with difference penalties, in open and cyclic
//! flavours.
//!
//! Open bases live on a bounded interval with equally spaced knots extended
//! `degree` steps past each boundary; uniform spacing makes polynomials up to
//! the penalty order lie in the penalty null space, so a heavily penalized
//! fit collapses onto an unpenalized polynomial trend instead of distorting
//! it. Cyclic bases wrap `segments` uniform pieces around a fixed period and
//! are used for the annual and weekly calendar effects.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
enum BasisKind {
    Open {
        lo: f64,
        hi: f64,
        interior_knots: usize,
    },
    Cyclic {
        period: f64,
        segments: usize,
    },
}

/// A B-spline basis together with its difference-penalty order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    kind: BasisKind,
    degree: usize,
    penalty_order: usize,
}

impl SplineBasis {
    /// Basis on `[lo, hi]` with `interior_knots` equally spaced interior
    /// knots. Yields `interior_knots + degree + 1` basis functions.
    pub fn open(
        lo: f64,
        hi: f64,
        interior_knots: usize,
        degree: usize,
        penalty_order: usize,
    ) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(Error::invalid(format!(
                "basis domain [{lo}, {hi}] must be a finite non-degenerate interval"
            )));
        }
        let n_basis = interior_knots + degree + 1;
        Self::validate_shape(degree, penalty_order, n_basis)?;
        Ok(SplineBasis {
            kind: BasisKind::Open {
                lo,
                hi,
                interior_knots,
            },
            degree,
            penalty_order,
        })
    }

    /// Periodic basis with `segments` uniform pieces over `period`. Yields
    /// `segments` basis functions; requires `segments >= degree + 1` so the
    /// wrapped functions stay distinct.
    pub fn cyclic(period: f64, segments: usize, degree: usize, penalty_order: usize) -> Result<Self> {
        if !period.is_finite() || period <= 0.0 {
            return Err(Error::invalid(format!("period {period} must be positive")));
        }
        Self::validate_shape(degree, penalty_order, segments)?;
        if segments < degree + 1 {
            return Err(Error::invalid(format!(
                "cyclic basis needs at least degree + 1 = {} segments, got {segments}",
                degree + 1
            )));
        }
        Ok(SplineBasis {
            kind: BasisKind::Cyclic { period, segments },
            degree,
            penalty_order,
        })
    }

    fn validate_shape(degree: usize, penalty_order: usize, n_basis: usize) -> Result<()> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::invalid(format!(
                "degree {degree} out of supported range 1..={MAX_DEGREE}"
            )));
        }
        if penalty_order == 0 || penalty_order > 3 {
            return Err(Error::invalid(format!(
                "penalty order {penalty_order} out of supported range 1..=3"
            )));
        }
        if n_basis <= penalty_order {
            return Err(Error::invalid(format!(
                "basis with {n_basis} functions cannot carry an order-{penalty_order} penalty"
            )));
        }
        Ok(())
    }

    pub fn n_basis(&self) -> usize {
        match self.kind {
            BasisKind::Open {
                interior_knots, ..
            } => interior_knots + self.degree + 1,
            BasisKind::Cyclic { segments, .. } => segments,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn penalty_order(&self) -> usize {
        self.penalty_order
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self.kind, BasisKind::Cyclic { .. })
    }

    /// Knot step between adjacent knots or segment boundaries.
    pub fn step(&self) -> f64 {
        match self.kind {
            BasisKind::Open {
                lo,
                hi,
                interior_knots,
            } => (hi - lo) / (interior_knots + 1) as f64,
            BasisKind::Cyclic { period, segments } => period / segments as f64,
        }
    }

    /// The full knot vector (open) or the segment boundaries `0..=period`
    /// (cyclic).
    pub fn knots(&self) -> Vec<f64> {
        let h = self.step();
        match self.kind {
            BasisKind::Open {
                lo,
                interior_knots,
                ..
            } => {
                let count = interior_knots + 2 * self.degree + 2;
                (0..count)
                    .map(|i| lo + (i as f64 - self.degree as f64) * h)
                    .collect()
            }
            BasisKind::Cyclic { segments, .. } => {
                (0..=segments).map(|i| i as f64 * h).collect()
            }
        }
    }

    /// Writes the basis row for `x` into `row` (length `n_basis`, zeroed
    /// first). Open bases clamp `x` to the domain; cyclic bases wrap it.
    pub fn eval_into(&self, x: f64, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.n_basis());
        row.fill(0.0);
        let d = self.degree;
        let h = self.step();
        let mut values = [0.0f64; MAX_DEGREE + 1];
        match self.kind {
            BasisKind::Open {
                lo,
                interior_knots,
                ..
            } => {
                let x = x.clamp(lo, lo + h * (interior_knots + 1) as f64);
                let mut seg = ((x - lo) / h).floor() as i64;
                seg = seg.clamp(0, interior_knots as i64);
                // Span s in knot-index space; knot i sits at lo + (i - d) h.
                let s = seg + d as i64;
                let knot = |i: i64| lo + (i - d as i64) as f64 * h;
                de_boor(x, s, d, knot, &mut values);
                for (j, v) in values[..=d].iter().enumerate() {
                    row[(s as usize - d) + j] = *v;
                }
            }
            BasisKind::Cyclic { period, segments } => {
                let m = segments as i64;
                let mut xm = x.rem_euclid(period);
                if xm >= period {
                    xm = 0.0;
                }
                let mut s = (xm / h).floor() as i64;
                s = s.clamp(0, m - 1);
                let knot = |i: i64| i as f64 * h;
                de_boor(xm, s, d, knot, &mut values);
                for (j, v) in values[..=d].iter().enumerate() {
                    let col = (s - d as i64 + j as i64).rem_euclid(m) as usize;
                    row[col] += *v;
                }
            }
        }
    }

    /// Dense design matrix with one basis row per entry of `xs`.
    pub fn design_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let m = self.n_basis();
        let mut b = DMatrix::zeros(xs.len(), m);
        let mut row = vec![0.0; m];
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                b[(i, j)] = *v;
            }
        }
        b
    }

    /// The penalty matrix `DᵀD` built from order-`penalty_order` differences
    /// of adjacent coefficients; differences wrap around for cyclic bases.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        let m = self.n_basis();
        let q = self.penalty_order;
        let coef = diff_coefficients(q);
        match self.kind {
            BasisKind::Open { .. } => {
                let rows = m - q;
                let mut d = DMatrix::<f64>::zeros(rows, m);
                for r in 0..rows {
                    for (j, c) in coef.iter().enumerate() {
                        d[(r, r + j)] = *c;
                    }
                }
                d.transpose() * d
            }
            BasisKind::Cyclic { .. } => {
                let mut d = DMatrix::<f64>::zeros(m, m);
                for r in 0..m {
                    for (j, c) in coef.iter().enumerate() {
                        d[(r, (r + j) % m)] += *c;
                    }
                }
                d.transpose() * d
            }
        }
    }

    /// Greville abscissae: the x-locations whose basis rows reproduce linear
    /// functions through linear coefficient sequences.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let d = self.degree as f64;
        let h = self.step();
        match self.kind {
            BasisKind::Open { lo, .. } => (0..self.n_basis())
                .map(|i| {
                    // Mean of knots i+1 ..= i+degree with knot k at lo + (k - degree) h.
                    let first = (i + 1) as f64 - d;
                    lo + h * (first + (d - 1.0) / 2.0)
                })
                .collect(),
            BasisKind::Cyclic { .. } => (0..self.n_basis())
                .map(|i| h * (i as f64 + (d + 1.0) / 2.0))
                .collect(),
        }
    }
}

/// Evaluates the `degree + 1` B-spline basis functions that are nonzero on
/// the span `[knot(s), knot(s+1))` at `x`, writing them into `values`.
fn de_boor(x: f64, s: i64, degree: usize, knot: impl Fn(i64) -> f64, values: &mut [f64]) {
    let mut left = [0.0f64; MAX_DEGREE + 1];
    let mut right = [0.0f64; MAX_DEGREE + 1];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knot(s + 1 - j as i64);
        right[j] = knot(s + j as i64) - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
}

fn diff_coefficients(order: usize) -> Vec<f64> {
    let mut coef = vec![1.0f64];
    for _ in 0..order {
        let mut next = vec![0.0; coef.len() + 1];
        for (i, c) in coef.iter().enumerate() {
            next[i] -= c;
            next[i + 1] += c;
        }
        coef = next;
    }
    coef
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn open_basis_counts_functions() {
        let basis = SplineBasis::open(0.0, 10.0, 6, 3, 2).unwrap();
        assert_eq!(basis.n_basis(), 10);
        assert_eq!(basis.knots().len(), 14);
        assert!(!basis.is_cyclic());
    }

    #[test]
    fn open_basis_partition_of_unity() {
        let basis = SplineBasis::open(-2.0, 7.0, 5, 3, 2).unwrap();
        for i in 0..=100 {
            let x = -2.0 + 9.0 * i as f64 / 100.0;
            let mut row = vec![0.0; basis.n_basis()];
            basis.eval_into(x, &mut row);
            let sum: f64 = row.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(row.iter().all(|v| *v >= -1e-14));
        }
    }

    #[test]
    fn open_basis_reproduces_linear_functions() {
        let basis = SplineBasis::open(1.0, 9.0, 7, 3, 2).unwrap();
        let coefs: Vec<f64> = basis
            .greville_abscissae()
            .iter()
            .map(|g| 2.5 - 0.75 * g)
            .collect();
        for i in 0..=80 {
            let x = 1.0 + 8.0 * i as f64 / 80.0;
            let mut row = vec![0.0; basis.n_basis()];
            basis.eval_into(x, &mut row);
            let value: f64 = row.iter().zip(&coefs).map(|(b, c)| b * c).sum();
            assert_abs_diff_eq!(value, 2.5 - 0.75 * x, epsilon = 1e-10);
        }
    }

    #[test]
    fn open_penalty_annihilates_linear_coefficients() {
        let basis = SplineBasis::open(0.0, 1.0, 4, 3, 2).unwrap();
        let p = basis.penalty_matrix();
        let greville = basis.greville_abscissae();
        for j in 0..basis.n_basis() {
            let row_const: f64 = (0..basis.n_basis()).map(|k| p[(j, k)]).sum();
            assert_abs_diff_eq!(row_const, 0.0, epsilon = 1e-10);
            let row_linear: f64 = (0..basis.n_basis()).map(|k| p[(j, k)] * greville[k]).sum();
            assert_abs_diff_eq!(row_linear, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn open_basis_clamps_outside_domain() {
        let basis = SplineBasis::open(0.0, 10.0, 6, 3, 2).unwrap();
        let at = |x: f64| {
            let mut row = vec![0.0; basis.n_basis()];
            basis.eval_into(x, &mut row);
            row
        };
        assert_eq!(at(-5.0), at(0.0));
        assert_eq!(at(25.0), at(10.0));
    }

    #[test]
    fn cyclic_basis_partition_of_unity_and_wrap() {
        let basis = SplineBasis::cyclic(7.0, 7, 3, 2).unwrap();
        assert_eq!(basis.n_basis(), 7);
        for i in 0..=70 {
            let x = -7.0 + 21.0 * i as f64 / 70.0;
            let mut row = vec![0.0; 7];
            basis.eval_into(x, &mut row);
            let sum: f64 = row.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
        let at = |x: f64| {
            let mut row = vec![0.0; 7];
            basis.eval_into(x, &mut row);
            row
        };
        assert_eq!(at(0.0), at(7.0));
        for (a, b) in at(1.5).iter().zip(at(8.5).iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn cyclic_function_is_continuous_across_the_seam() {
        let basis = SplineBasis::cyclic(365.0, 20, 3, 2).unwrap();
        let coefs: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let f = |x: f64| {
            let mut row = vec![0.0; 20];
            basis.eval_into(x, &mut row);
            row.iter().zip(&coefs).map(|(b, c)| b * c).sum::<f64>()
        };
        let delta = 1e-6;
        assert_abs_diff_eq!(f(365.0 - delta), f(-delta), epsilon = 1e-12);
        // Slope continuity at the seam, checked by symmetric differences.
        let slope_before = (f(365.0 - delta) - f(365.0 - 3.0 * delta)) / (2.0 * delta);
        let slope_after = (f(3.0 * delta) - f(delta)) / (2.0 * delta);
        assert_abs_diff_eq!(slope_before, slope_after, epsilon = 1e-3);
    }

    #[test]
    fn cyclic_penalty_annihilates_constants() {
        let basis = SplineBasis::cyclic(365.0, 12, 3, 2).unwrap();
        let p = basis.penalty_matrix();
        for j in 0..12 {
            let row_sum: f64 = (0..12).map(|k| p[(j, k)]).sum();
            assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn difference_coefficients_match_pascal_pattern() {
        assert_eq!(diff_coefficients(1), vec![-1.0, 1.0]);
        assert_eq!(diff_coefficients(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(diff_coefficients(3), vec![-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn constructor_validation() {
        assert!(SplineBasis::open(1.0, 1.0, 5, 3, 2).is_err());
        assert!(SplineBasis::open(0.0, 1.0, 5, 0, 2).is_err());
        assert!(SplineBasis::open(0.0, 1.0, 5, 3, 0).is_err());
        assert!(SplineBasis::open(0.0, 1.0, 0, 1, 2).is_err());
        assert!(SplineBasis::cyclic(7.0, 3, 3, 2).is_err());
        assert!(SplineBasis::cyclic(0.0, 7, 3, 2).is_err());
        assert!(SplineBasis::cyclic(7.0, 7, 6, 2).is_err());
    }
}
