//! Penalized spline smoothing: weighted least squares with a difference
//! penalty, effective degrees of freedom, and generalized cross-validation
//! for picking the penalty weight.
//!
//! The fit solves `(BᵀWB + λP) c = BᵀWy` by Cholesky factorization. When the
//! system is singular despite the penalty, basis columns without data support
//! are reported as an error; otherwise a minimum-norm solve through the SVD
//! steps in, which makes the unpenalized saturated case (`λ = 0`, as many
//! basis functions as distinct points) behave like plain interpolation.

pub mod basis;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use basis::SplineBasis;

use crate::error::{Error, Result};

/// A fitted penalized smoother.
#[derive(Debug, Clone)]
pub struct SmootherFit {
    basis: SplineBasis,
    coefficients: Vec<f64>,
    lambda: f64,
    edf: f64,
    fitted: Vec<f64>,
    center: f64,
    rss: f64,
}

impl SmootherFit {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        basis: SplineBasis,
        coefficients: Vec<f64>,
        lambda: f64,
        edf: f64,
        fitted: Vec<f64>,
        center: f64,
        rss: f64,
    ) -> Self {
        SmootherFit {
            basis,
            coefficients,
            lambda,
            edf,
            fitted,
            center,
            rss,
        }
    }

    /// Fitted values at the training points.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Mean of the fitted values; subtracting it centers the curve so it can
    /// act as one component of an additive model.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Effective degrees of freedom, the trace of the smoother matrix.
    pub fn edf(&self) -> f64 {
        self.edf
    }

    /// Weighted residual sum of squares at the training points.
    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    /// Evaluates the curve at new points on the raw (uncentered) scale.
    pub fn predict(&self, xs: &[f64]) -> Vec<f64> {
        let m = self.basis.n_basis();
        let mut row = vec![0.0; m];
        xs.iter()
            .map(|&x| {
                self.basis.eval_into(x, &mut row);
                row.iter()
                    .zip(&self.coefficients)
                    .map(|(b, c)| b * c)
                    .sum()
            })
            .collect()
    }

    /// Evaluates the centered curve, `predict(xs) - center`.
    pub fn predict_centered(&self, xs: &[f64]) -> Vec<f64> {
        let mut out = self.predict(xs);
        for v in &mut out {
            *v -= self.center;
        }
        out
    }
}

/// Design information that depends on the covariate but not on `λ` or the
/// response, built once and reused across penalty weights and backfitting
/// cycles.
pub(crate) struct PenalizedDesign {
    pub basis: SplineBasis,
    pub b: DMatrix<f64>,
    pub btwb: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    weights: Option<Vec<f64>>,
    pub n: usize,
}

pub(crate) enum FactorKind {
    Chol(Cholesky<f64, Dyn>),
    Pinv(DMatrix<f64>),
}

/// A factorization of `BᵀWB + λP` for one penalty weight.
pub(crate) struct PenalizedFactor {
    kind: FactorKind,
    pub edf: f64,
}

impl PenalizedFactor {
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            FactorKind::Chol(chol) => chol.solve(rhs),
            FactorKind::Pinv(pinv) => pinv * rhs,
        }
    }
}

impl PenalizedDesign {
    pub fn new(basis: SplineBasis, x: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("smoother needs at least one observation"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariate contains non-finite values"));
        }
        if let Some(w) = weights {
            if w.len() != x.len() {
                return Err(Error::invalid(format!(
                    "weights length {} does not match data length {}",
                    w.len(),
                    x.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(
                    "weights must be finite and non-negative",
                ));
            }
        }
        let b = basis.design_matrix(x);
        let btwb = match weights {
            None => b.transpose() * &b,
            Some(w) => {
                let mut bw = b.clone();
                for (i, wi) in w.iter().enumerate() {
                    bw.row_mut(i).scale_mut(*wi);
                }
                b.transpose() * bw
            }
        };
        let penalty = basis.penalty_matrix();
        Ok(PenalizedDesign {
            basis,
            btwb,
            penalty,
            weights: weights.map(|w| w.to_vec()),
            n: x.len(),
            b,
        })
    }

    /// `Bᵀ W v` for a response-length vector `v`.
    pub fn btw(&self, v: &[f64]) -> DVector<f64> {
        let vec = match &self.weights {
            None => DVector::from_column_slice(v),
            Some(w) => DVector::from_iterator(v.len(), v.iter().zip(w).map(|(a, b)| a * b)),
        };
        self.b.transpose() * vec
    }

    pub fn fitted(&self, coefs: &DVector<f64>) -> Vec<f64> {
        (&self.b * coefs).iter().cloned().collect()
    }

    /// Weighted residual sum of squares of `y` against `fitted`.
    pub fn rss(&self, y: &[f64], fitted: &[f64]) -> f64 {
        y.iter()
            .zip(fitted)
            .enumerate()
            .map(|(i, (yi, fi))| {
                let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
                w * (yi - fi) * (yi - fi)
            })
            .sum()
    }

    /// Factorizes `BᵀWB + λP`, reporting the effective degrees of freedom
    /// `tr((BᵀWB + λP)⁻¹ BᵀWB)` alongside.
    pub fn factorize(&self, lambda: f64, label: &str) -> Result<PenalizedFactor> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "penalty weight must be finite and non-negative, got {lambda}"
            )));
        }
        let mut a = self.penalty.clone();
        a *= lambda;
        a += &self.btwb;
        let max_diag = (0..a.nrows()).fold(0.0f64, |m, j| m.max(a[(j, j)]));
        if let Some(chol) = Cholesky::new(a.clone()) {
            // A rounding-level pivot means the factorization slid through a
            // singular system; fall through to the diagnosis below instead of
            // returning coefficients with an arbitrary null-space component.
            let l = chol.l_dirty();
            let min_pivot_sq = (0..l.nrows()).fold(f64::INFINITY, |m, j| {
                m.min(l[(j, j)] * l[(j, j)])
            });
            if min_pivot_sq > 1e-13 * max_diag {
                let edf = chol.solve(&self.btwb).trace();
                return Ok(PenalizedFactor {
                    kind: FactorKind::Chol(chol),
                    edf,
                });
            }
        }
        let unsupported: Vec<usize> = (0..self.btwb.nrows())
            .filter(|&j| self.btwb[(j, j)] <= 0.0)
            .collect();
        if !unsupported.is_empty() {
            return Err(Error::SingularSystem {
                term: label.to_string(),
                detail: format!(
                    "{} of {} basis functions have no data support (columns {:?})",
                    unsupported.len(),
                    self.btwb.nrows(),
                    unsupported
                ),
            });
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Err(Error::SingularSystem {
                term: label.to_string(),
                detail: "penalized system is identically zero".to_string(),
            });
        }
        let pinv = svd.pseudo_inverse(smax * 1e-12).map_err(|e| {
            Error::SingularSystem {
                term: label.to_string(),
                detail: e.to_string(),
            }
        })?;
        let edf = (&pinv * &self.btwb).trace();
        Ok(PenalizedFactor {
            kind: FactorKind::Pinv(pinv),
            edf,
        })
    }
}

fn validate_response(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::invalid(format!(
            "response length {} does not match covariate length {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response contains non-finite values"));
    }
    Ok(())
}

/// Fits a penalized spline to `(x, y)` with fixed penalty weight `lambda`.
pub fn fit_smoother(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
    basis: &SplineBasis,
) -> Result<SmootherFit> {
    let design = PenalizedDesign::new(basis.clone(), x, weights)?;
    validate_response(y, design.n)?;
    let factor = design.factorize(lambda, "smoother")?;
    let coefs = factor.solve(&design.btw(y));
    let fitted = design.fitted(&coefs);
    if fitted.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem {
            term: "smoother".to_string(),
            detail: "solution contains non-finite values".to_string(),
        });
    }
    let rss = design.rss(y, &fitted);
    let center = fitted.iter().sum::<f64>() / fitted.len() as f64;
    Ok(SmootherFit {
        basis: design.basis,
        coefficients: coefs.iter().cloned().collect(),
        lambda,
        edf: factor.edf,
        fitted,
        center,
        rss,
    })
}

/// One evaluated point of a GCV profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvPoint {
    pub lambda: f64,
    pub score: f64,
    pub edf: f64,
}

/// Result of a GCV sweep over a penalty grid.
#[derive(Debug, Clone)]
pub struct GcvSelection {
    pub lambda: f64,
    pub profile: Vec<GcvPoint>,
}

/// The default grid used for penalty selection: 25 weights log-spaced over
/// `1e-4 ..= 1e6`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..25)
        .map(|i| 10f64.powf(-4.0 + 10.0 * i as f64 / 24.0))
        .collect()
}

/// Picks the penalty weight minimizing `GCV(λ) = n·RSS(λ) / (n - edf(λ))²`
/// over `grid`. Ties resolve to the larger weight, preferring the smoother
/// of equally scoring fits.
pub fn select_lambda_gcv(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    basis: &SplineBasis,
    grid: &[f64],
) -> Result<GcvSelection> {
    let design = PenalizedDesign::new(basis.clone(), x, weights)?;
    validate_response(y, design.n)?;
    gcv_on_design(&design, y, grid, "smoother")
}

pub(crate) fn gcv_on_design(
    design: &PenalizedDesign,
    y: &[f64],
    grid: &[f64],
    label: &str,
) -> Result<GcvSelection> {
    if grid.is_empty() {
        return Err(Error::invalid("penalty grid must not be empty"));
    }
    let mut grid = grid.to_vec();
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::invalid(
            "penalty grid must contain finite non-negative weights",
        ));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let btwy = design.btw(y);
    let n = design.n as f64;
    let mut profile = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let factor = design.factorize(lambda, label)?;
        let coefs = factor.solve(&btwy);
        let fitted = design.fitted(&coefs);
        let rss = design.rss(y, &fitted);
        let denom = n - factor.edf;
        let score = if denom > 1e-8 && rss.is_finite() {
            n * rss / (denom * denom)
        } else {
            f64::INFINITY
        };
        profile.push(GcvPoint {
            lambda,
            score,
            edf: factor.edf,
        });
    }
    let Some(lambda) = pick_best_lambda(&profile) else {
        return Err(Error::invalid(
            "no penalty weight in the grid produced a finite GCV score",
        ));
    };
    Ok(GcvSelection { lambda, profile })
}

/// Minimum-score weight over an ascending profile; scores matching the
/// running best within relative rounding slack count as ties and move the
/// choice to the larger weight.
fn pick_best_lambda(profile: &[GcvPoint]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for p in profile {
        if !p.score.is_finite() {
            continue;
        }
        match best {
            None => best = Some((p.score, p.lambda)),
            Some((s, _)) if p.score <= s + 1e-12 * s.abs() => best = Some((p.score.min(s), p.lambda)),
            _ => {}
        }
    }
    best.map(|(_, l)| l)
}
