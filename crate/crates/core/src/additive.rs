//! Additive model estimation by backfitting, plus the F-test comparing
//! nested additive fits.
//!
//! Each smooth term is a penalized spline refit to the partial residuals of
//! the other terms until the fitted values stabilize. Smooth contributions
//! are centered every pass, so the intercept carries the response level and
//! every curve is identified up to its shape. Penalty weights are resolved
//! once, before cycling starts, and held fixed afterwards; re-selecting
//! them every cycle would let terms trade roughness back and forth without
//! converging.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::smoother::{
    gcv_on_design, PenalizedDesign, PenalizedFactor, SmootherFit, SplineBasis,
};

/// How the penalty weight of a smooth term is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// Use this weight as given.
    Fixed(f64),
    /// Minimize GCV over the grid on the first backfitting pass, then freeze.
    Gcv(Vec<f64>),
    /// Pick the weight whose single-term smoother spends this many effective
    /// degrees of freedom. Unlike GCV this keeps the term's complexity fixed
    /// whether or not the data carry its signal, which hypothesis tests on
    /// the term need.
    FixedEdf(f64),
}

/// Shape parameters for a term's spline basis; the domain is taken from the
/// observed covariate range when the term is built.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub interior_knots: usize,
    pub degree: usize,
    pub penalty_order: usize,
    /// `Some(period)` builds a cyclic basis with `interior_knots` segments.
    pub cyclic_period: Option<f64>,
}

impl BasisSpec {
    /// Cubic open basis with an order-2 difference penalty.
    pub fn cubic(interior_knots: usize) -> Self {
        BasisSpec {
            interior_knots,
            degree: 3,
            penalty_order: 2,
            cyclic_period: None,
        }
    }

    /// Cubic cyclic basis with `segments` pieces over `period`.
    pub fn cyclic(period: f64, segments: usize) -> Self {
        BasisSpec {
            interior_knots: segments,
            degree: 3,
            penalty_order: 2,
            cyclic_period: Some(period),
        }
    }

    pub fn build(&self, xs: &[f64]) -> Result<SplineBasis> {
        match self.cyclic_period {
            Some(period) => SplineBasis::cyclic(
                period,
                self.interior_knots,
                self.degree,
                self.penalty_order,
            ),
            None => {
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                SplineBasis::open(lo, hi, self.interior_knots, self.degree, self.penalty_order)
            }
        }
    }
}

/// The role a covariate plays in the model.
#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    /// Penalized spline effect.
    Smooth {
        basis: BasisSpec,
        lambda: LambdaPolicy,
    },
    /// Plain linear coefficient, used for 0/1 dummies.
    LinearDummy,
}

/// One covariate of an additive model.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub name: String,
    pub values: Vec<f64>,
    pub kind: TermKind,
}

impl TermSpec {
    pub fn smooth(
        name: impl Into<String>,
        values: Vec<f64>,
        basis: BasisSpec,
        lambda: LambdaPolicy,
    ) -> Self {
        TermSpec {
            name: name.into(),
            values,
            kind: TermKind::Smooth { basis, lambda },
        }
    }

    pub fn dummy(name: impl Into<String>, values: Vec<f64>) -> Self {
        TermSpec {
            name: name.into(),
            values,
            kind: TermKind::LinearDummy,
        }
    }
}

/// The fitted state of one term.
#[derive(Debug, Clone)]
pub enum TermFit {
    Smooth(SmootherFit),
    Linear {
        coefficient: f64,
        /// Set when the covariate had no variation, leaving the coefficient
        /// pinned at zero.
        degenerate: bool,
    },
}

/// A term of a fitted additive model.
#[derive(Debug, Clone)]
pub struct FittedTerm {
    pub name: String,
    pub values: Vec<f64>,
    pub fit: TermFit,
    /// This term's additive contribution at the training points: centered
    /// for smooth terms, `coefficient * x` for dummies.
    pub contribution: Vec<f64>,
    /// Effective degrees of freedom: smoother-matrix trace for smooth terms,
    /// 1 for an active dummy, 0 for a degenerate one.
    pub edf: f64,
    /// Resolved penalty weight for smooth terms.
    pub lambda: Option<f64>,
}

/// A fitted additive model.
#[derive(Debug, Clone)]
pub struct AdditiveFit {
    pub intercept: f64,
    pub terms: Vec<FittedTerm>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Intercept plus the degrees of freedom each term adds beyond a
    /// constant.
    pub total_edf: f64,
    pub converged: bool,
    pub n_iter: usize,
}

impl AdditiveFit {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    pub fn term(&self, name: &str) -> Option<&FittedTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

enum WorkKind {
    Smooth {
        design: PenalizedDesign,
        policy: LambdaPolicy,
        factor: Option<PenalizedFactor>,
        lambda: Option<f64>,
        coefs: Option<DVector<f64>>,
    },
    Dummy {
        centered: Vec<f64>,
        sxx: f64,
        xbar: f64,
        delta: f64,
    },
}

struct WorkTerm {
    name: String,
    values: Vec<f64>,
    kind: WorkKind,
    /// Centered contribution used inside the backfitting loop.
    g: Vec<f64>,
}

fn validate_terms(y: &[f64], terms: &[TermSpec]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("response must not be empty"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response contains non-finite values"));
    }
    if terms.is_empty() {
        return Err(Error::invalid("additive model needs at least one term"));
    }
    for (i, t) in terms.iter().enumerate() {
        if t.name.is_empty() {
            return Err(Error::invalid(format!("term {i} has an empty name")));
        }
        if t.values.len() != y.len() {
            return Err(Error::invalid(format!(
                "term `{}` has {} values for {} observations",
                t.name,
                t.values.len(),
                y.len()
            )));
        }
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "term `{}` contains non-finite values",
                t.name
            )));
        }
        if terms[..i].iter().any(|p| p.name == t.name) {
            return Err(Error::invalid(format!("duplicate term name `{}`", t.name)));
        }
    }
    Ok(())
}

/// Reference budget used when splitting the response for GCV targeting:
/// roomy enough for typical component shapes, tight enough that a basis
/// cannot impersonate another term's signal through an incidental overlap
/// (a multi-year trend basis tracking an annual cycle, say).
fn reference_edf_cap(dim: usize) -> f64 {
    (dim as f64 / 3.0).ceil().max(2.0)
}

/// Penalty weight whose single-term smoother spends `target` effective
/// degrees of freedom, found by bisection in log weight. The edf of a
/// penalized design is continuous and strictly decreasing in the weight, so
/// the bracket below either straddles the target or the target lies outside
/// what the basis can spend at any weight; the nearest endpoint is returned
/// in that case (a basis of rank 6 asked for 10 edf smooths at its maximum).
fn lambda_for_edf(design: &PenalizedDesign, target: f64, name: &str) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::invalid(format!(
            "term `{name}` has a fixed-edf target of {target}; it must be positive and finite"
        )));
    }
    let (mut lo, mut hi) = (1e-10_f64, 1e12_f64);
    if design.factorize(lo, name)?.edf <= target {
        return Ok(lo);
    }
    if design.factorize(hi, name)?.edf >= target {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = (lo.ln() + hi.ln()) / 2.0;
        let mid = mid.exp();
        let edf = design.factorize(mid, name)?.edf;
        if (edf - target).abs() < 1e-9 {
            return Ok(mid);
        }
        if edf > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo.ln() / 2.0 + hi.ln() / 2.0).exp())
}

/// One GCV target per term, `None` where the penalty weight is fixed.
///
/// The response is first split over all terms at once by a penalized
/// least-squares solve at fixed reference budgets. The solve is symmetric in
/// the terms, and where spans overlap the penalties decide: reproducing an
/// annual cycle costs a cyclic day-of-year basis almost nothing but costs a
/// multi-year trend basis heavy curvature, and a smooth mean path is matched
/// exactly by its own covariates while a lagged-response proxy only tracks
/// it with noise. Each term is then scored against its own share of that
/// split plus the shared residual, so its budget reflects its own signal
/// and the noise level; whatever the capped reference fit missed of the
/// term's shape is still in the residual, so nothing is hidden from it.
fn gcv_targets(y: &[f64], work: &[WorkTerm]) -> Result<Vec<Option<Vec<f64>>>> {
    let needs: Vec<bool> = work
        .iter()
        .map(|t| {
            matches!(
                &t.kind,
                WorkKind::Smooth {
                    policy: LambdaPolicy::Gcv(_),
                    ..
                }
            )
        })
        .collect();
    if !needs.iter().any(|b| *b) {
        return Ok(vec![None; work.len()]);
    }
    let n = y.len();
    let mut cols: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0)];
    let mut ranges = Vec::with_capacity(work.len());
    for term in work {
        let start = cols.len();
        match &term.kind {
            WorkKind::Smooth { design, .. } => {
                for c in 0..design.b.ncols() {
                    cols.push(design.b.column(c).into_owned());
                }
            }
            WorkKind::Dummy { centered, .. } => {
                cols.push(DVector::from_column_slice(centered));
            }
        }
        ranges.push(start..cols.len());
    }
    let x = DMatrix::from_columns(&cols);
    let yv = DVector::from_column_slice(y);
    let mut a = x.transpose() * &x;
    let gy = x.transpose() * &yv;

    for (term, range) in work.iter().zip(&ranges) {
        let WorkKind::Smooth { design, policy, .. } = &term.kind else {
            continue;
        };
        let reference = match policy {
            LambdaPolicy::Fixed(l) => *l,
            LambdaPolicy::FixedEdf(e) => lambda_for_edf(design, *e, &term.name)?,
            LambdaPolicy::Gcv(grid) => {
                let cap = reference_edf_cap(design.b.ncols());
                let mut chosen = *grid.last().ok_or_else(|| {
                    Error::invalid(format!("term `{}` has an empty GCV grid", term.name))
                })?;
                for &l in grid {
                    if design.factorize(l, &term.name)?.edf <= cap {
                        chosen = l;
                        break;
                    }
                }
                chosen
            }
        };
        for (i, ii) in range.clone().enumerate() {
            for (j, jj) in range.clone().enumerate() {
                a[(ii, jj)] += reference * design.penalty[(i, j)];
            }
        }
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        let ybar = y.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        return Ok(needs
            .iter()
            .map(|&b| if b { Some(centered.clone()) } else { None })
            .collect());
    }
    let pinv = svd.pseudo_inverse(smax * 1e-10).map_err(|e| Error::SingularSystem {
        term: "reference split".to_string(),
        detail: e.to_string(),
    })?;
    let beta = pinv * &gy;
    let fitted = &x * &beta;
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();

    let mut out = Vec::with_capacity(work.len());
    for (j, range) in ranges.iter().enumerate() {
        if !needs[j] {
            out.push(None);
            continue;
        }
        let own = x.columns(range.start, range.len()) * beta.rows(range.start, range.len());
        out.push(Some(
            own.iter().zip(&resid).map(|(g, r)| g + r).collect(),
        ));
    }
    Ok(out)
}

/// Fits an additive model to `y` by backfitting.
///
/// Iteration stops when the largest absolute change in fitted values over a
/// full cycle drops below `tol` or after `max_iter` cycles, whichever comes
/// first; hitting the cap leaves `converged` unset on the result.
pub fn fit_additive(
    y: &[f64],
    terms: Vec<TermSpec>,
    max_iter: usize,
    tol: f64,
) -> Result<AdditiveFit> {
    validate_terms(y, &terms)?;
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!(
            "convergence tolerance must be positive and finite, got {tol}"
        )));
    }
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;

    let mut work: Vec<WorkTerm> = Vec::with_capacity(terms.len());
    for spec in terms {
        let kind = match spec.kind {
            TermKind::Smooth { basis, lambda } => {
                let built = basis.build(&spec.values)?;
                let design = PenalizedDesign::new(built, &spec.values, None)?;
                WorkKind::Smooth {
                    design,
                    policy: lambda,
                    factor: None,
                    lambda: None,
                    coefs: None,
                }
            }
            TermKind::LinearDummy => {
                let xbar = spec.values.iter().sum::<f64>() / n as f64;
                let centered: Vec<f64> = spec.values.iter().map(|v| v - xbar).collect();
                let sxx: f64 = centered.iter().map(|v| v * v).sum();
                WorkKind::Dummy {
                    centered,
                    sxx,
                    xbar,
                    delta: 0.0,
                }
            }
        };
        work.push(WorkTerm {
            name: spec.name,
            values: spec.values,
            kind,
            g: vec![0.0; n],
        });
    }

    // Smoothing budgets are resolved before any cycling: the response is
    // split once across all terms by a penalized reference fit, and each GCV
    // smooth is scored against its own share of the split plus the shared
    // residual. The split is symmetric in the terms, so the budgets, and
    // with them the backfitting fixed point, cannot depend on the order the
    // terms are listed in. Attributing overlapping signal through the joint
    // fit also keeps one term's signal from inflating another's budget: over
    // a multi-year sample the trend basis can track an annual cycle, and a
    // target still carrying that cycle would leave the trend enough slack to
    // chase noise for the rest of the fit.
    let targets = gcv_targets(y, &work)?;
    for (term, target) in work.iter_mut().zip(&targets) {
        if let WorkKind::Smooth {
            design,
            policy,
            factor,
            lambda,
            ..
        } = &mut term.kind
        {
            let resolved = match policy {
                LambdaPolicy::Fixed(l) => *l,
                LambdaPolicy::FixedEdf(e) => lambda_for_edf(design, *e, &term.name)?,
                LambdaPolicy::Gcv(grid) => {
                    let t = target.as_ref().expect("target built for every GCV smooth");
                    gcv_on_design(design, t, grid, &term.name)?.lambda
                }
            };
            *factor = Some(design.factorize(resolved, &term.name)?);
            *lambda = Some(resolved);
        }
    }

    let mut total_g = vec![0.0; n];
    let mut prev_fitted: Vec<f64> = vec![ybar; n];
    let mut partial = vec![0.0; n];
    let mut converged = false;
    let mut n_iter = 0;
    // Once the penalty weights freeze, a backfitting cycle is an affine
    // contraction of the stacked term contributions. Correlated covariates
    // (lagged prices against a free trend, say) push the contraction factor
    // toward 1 and plain iteration crawls, so when consecutive cycle updates
    // line up we jump along the dominant error mode (Aitken extrapolation).
    // The jump only relocates the state between cycles; every convergence
    // decision still follows a full refit, which keeps coefficients and
    // contributions consistent.
    let mut prev_g: Option<Vec<Vec<f64>>> = None;
    let mut prev_delta: Option<Vec<Vec<f64>>> = None;

    for iter in 1..=max_iter {
        n_iter = iter;
        for j in 0..work.len() {
            for i in 0..n {
                partial[i] = y[i] - ybar - (total_g[i] - work[j].g[i]);
            }
            let term = &mut work[j];
            match &mut term.kind {
                WorkKind::Smooth {
                    design,
                    factor,
                    coefs,
                    ..
                } => {
                    let fac = factor.as_ref().expect("factor resolved before cycling");
                    let c = fac.solve(&design.btw(&partial));
                    let raw = design.fitted(&c);
                    let center = raw.iter().sum::<f64>() / n as f64;
                    for (gi, ri) in term.g.iter_mut().zip(&raw) {
                        *gi = ri - center;
                    }
                    *coefs = Some(c);
                }
                WorkKind::Dummy {
                    centered,
                    sxx,
                    delta,
                    ..
                } => {
                    if *sxx > 0.0 && sxx.is_finite() {
                        let sxy: f64 = centered.iter().zip(&partial).map(|(a, b)| a * b).sum();
                        *delta = sxy / *sxx;
                    } else {
                        *delta = 0.0;
                    }
                    for (gi, xi) in term.g.iter_mut().zip(centered.iter()) {
                        *gi = *delta * xi;
                    }
                }
            }
            if term.g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    iteration: iter,
                    term: term.name.clone(),
                });
            }
            total_g.fill(0.0);
            for w in &work {
                for (ti, gi) in total_g.iter_mut().zip(&w.g) {
                    *ti += gi;
                }
            }
        }
        let mut delta_max = 0.0f64;
        for i in 0..n {
            let f = ybar + total_g[i];
            delta_max = delta_max.max((f - prev_fitted[i]).abs());
            prev_fitted[i] = f;
        }
        if delta_max < tol {
            converged = true;
            break;
        }

        if let Some(pg) = &prev_g {
            let delta: Vec<Vec<f64>> = work
                .iter()
                .zip(pg)
                .map(|(w, p)| w.g.iter().zip(p).map(|(a, b)| a - b).collect())
                .collect();
            let mut extrapolated = false;
            if let Some(pd) = &prev_delta {
                let mut num = 0.0;
                let mut den = 0.0;
                let mut cur = 0.0;
                for (dj, pj) in delta.iter().zip(pd) {
                    for (a, b) in dj.iter().zip(pj) {
                        num += a * b;
                        den += b * b;
                        cur += a * a;
                    }
                }
                if den > 0.0 && cur > 0.0 {
                    let rho = num / den;
                    let cosine = num / (den.sqrt() * cur.sqrt());
                    if rho > 0.5 && rho < 0.9999 && cosine > 0.999 {
                        let gain = rho / (1.0 - rho);
                        for (w, dj) in work.iter_mut().zip(&delta) {
                            for (gi, di) in w.g.iter_mut().zip(dj) {
                                *gi += gain * di;
                            }
                        }
                        total_g.fill(0.0);
                        for w in &work {
                            for (ti, gi) in total_g.iter_mut().zip(&w.g) {
                                *ti += gi;
                            }
                        }
                        for i in 0..n {
                            prev_fitted[i] = ybar + total_g[i];
                        }
                        extrapolated = true;
                    }
                }
            }
            prev_delta = if extrapolated { None } else { Some(delta) };
        }
        prev_g = Some(work.iter().map(|w| w.g.clone()).collect());
    }

    // Assemble the reported form: uncentered dummy contributions with the
    // centering folded into the intercept.
    let mut intercept = ybar;
    let mut total_edf = 1.0;
    let mut fitted_terms = Vec::with_capacity(work.len());
    for term in work {
        match term.kind {
            WorkKind::Smooth {
                design,
                factor,
                lambda,
                coefs,
                ..
            } => {
                let coefs = coefs.expect("smooth term updated at least once");
                let lambda = lambda.expect("lambda resolved before cycling");
                let edf = factor.expect("factor resolved before cycling").edf;
                let raw = design.fitted(&coefs);
                let center = raw.iter().sum::<f64>() / n as f64;
                let rss = design.rss(&term.g, &raw.iter().map(|v| v - center).collect::<Vec<_>>());
                total_edf += edf - 1.0;
                fitted_terms.push(FittedTerm {
                    name: term.name,
                    values: term.values,
                    contribution: term.g.clone(),
                    fit: TermFit::Smooth(SmootherFit::from_parts(
                        design.basis.clone(),
                        coefs.iter().cloned().collect(),
                        lambda,
                        edf,
                        raw,
                        center,
                        rss,
                    )),
                    edf,
                    lambda: Some(lambda),
                });
            }
            WorkKind::Dummy {
                sxx, xbar, delta, ..
            } => {
                let degenerate = !(sxx > 0.0 && sxx.is_finite());
                let edf = if degenerate { 0.0 } else { 1.0 };
                intercept -= delta * xbar;
                total_edf += edf;
                let contribution: Vec<f64> = term.values.iter().map(|v| delta * v).collect();
                fitted_terms.push(FittedTerm {
                    name: term.name,
                    values: term.values,
                    contribution,
                    fit: TermFit::Linear {
                        coefficient: delta,
                        degenerate,
                    },
                    edf,
                    lambda: None,
                });
            }
        }
    }

    let mut fitted = vec![intercept; n];
    for t in &fitted_terms {
        for (fi, ci) in fitted.iter_mut().zip(&t.contribution) {
            *fi += ci;
        }
    }
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|r| r * r).sum();
    Ok(AdditiveFit {
        intercept,
        terms: fitted_terms,
        fitted,
        residuals,
        rss,
        total_edf,
        converged,
        n_iter,
    })
}

/// Result of comparing nested additive fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p_value: f64,
}

/// F-test of a full additive fit against a reduced one on the same data.
///
/// The numerator degrees of freedom are the difference in effective degrees
/// of freedom. A reduced model fitting better than the full one (possible
/// since penalties are selected per model) clamps the statistic at zero.
pub fn anova_nested(full: &AdditiveFit, reduced: &AdditiveFit) -> Result<AnovaResult> {
    let n = full.n();
    if reduced.n() != n {
        return Err(Error::NotNested(format!(
            "fits cover {} and {} observations",
            n,
            reduced.n()
        )));
    }
    let df_num = full.total_edf - reduced.total_edf;
    let df_den = n as f64 - full.total_edf;
    if df_num < -1e-8 {
        return Err(Error::NotNested(format!(
            "full model has fewer effective degrees of freedom ({:.3}) than the reduced one ({:.3})",
            full.total_edf, reduced.total_edf
        )));
    }
    if df_den <= 0.0 {
        return Err(Error::invalid(format!(
            "no residual degrees of freedom: n = {n}, full edf = {:.3}",
            full.total_edf
        )));
    }
    if df_num.abs() <= 1e-8 {
        return Ok(AnovaResult {
            f_stat: 0.0,
            df_num: 0.0,
            df_den,
            p_value: 1.0,
        });
    }
    let extra = reduced.rss - full.rss;
    if extra <= 0.0 {
        return Ok(AnovaResult {
            f_stat: 0.0,
            df_num,
            df_den,
            p_value: 1.0,
        });
    }
    if full.rss <= 0.0 {
        return Err(Error::invalid(
            "full model has zero residual sum of squares; the F statistic is undefined",
        ));
    }
    let f_stat = (extra / df_num) / (full.rss / df_den);
    let dist = FisherSnedecor::new(df_num, df_den)
        .map_err(|e| Error::invalid(format!("invalid F distribution: {e}")))?;
    let p_value = dist.sf(f_stat);
    Ok(AnovaResult {
        f_stat,
        df_num,
        df_den,
        p_value,
    })
}
