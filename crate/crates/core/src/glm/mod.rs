//! Binomial GLMs over the cells of a stratified 2×2 table.
//!
//! One row per (stratum, exposure) cell with reference-cell coding: the
//! first stratum and the unexposed are the references, so the exposure
//! coefficient is the (log) measure of association for that link.

pub mod special;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PointTag, RiskPoint};
use crate::measures::Measure;
use crate::tables::StratifiedCohortTable;

pub use special::{chi_square_cdf, chi_square_quantile, chi_square_sf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("stratum '{stratum}' has no {group} individuals")]
    EmptyMargin { stratum: String, group: &'static str },
    #[error("IRLS did not converge after {iterations} iterations (deviance trace {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },
    #[error("fitted risk for stratum '{stratum}' ({}) is pinned at the boundary ({risk})",
            if *.exposed { "exposed" } else { "unexposed" })]
    Boundary {
        stratum: String,
        exposed: bool,
        risk: f64,
    },
    #[error("no starting values keep every fitted risk inside (0, 1)")]
    Infeasible,
    #[error("weighted least-squares system is singular")]
    Singular,
    #[error("likelihood ratio statistic {statistic} is negative; models are not nested")]
    NestingViolation { statistic: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logit,
    Log,
    Identity,
    Cloglog,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::Logit, Link::Log, Link::Identity, Link::Cloglog];

    /// The link whose exposure coefficient estimates `m`.
    pub fn for_measure(m: Measure) -> Link {
        match m {
            Measure::OddsRatio => Link::Logit,
            Measure::RiskRatio => Link::Log,
            Measure::RiskDifference => Link::Identity,
            Measure::HazardRatio => Link::Cloglog,
        }
    }

    pub fn measure(&self) -> Measure {
        match self {
            Link::Logit => Measure::OddsRatio,
            Link::Log => Measure::RiskRatio,
            Link::Identity => Measure::RiskDifference,
            Link::Cloglog => Measure::HazardRatio,
        }
    }

    pub fn link(&self, mu: f64) -> f64 {
        match self {
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Log => mu.ln(),
            Link::Identity => mu,
            Link::Cloglog => (-(-mu).ln_1p()).ln(),
        }
    }

    pub fn inverse(&self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Log => eta.exp(),
            Link::Identity => eta,
            Link::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    /// dμ/dη.
    pub fn mu_eta(&self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                let mu = self.inverse(eta);
                mu * (1.0 - mu)
            }
            Link::Log => eta.exp(),
            Link::Identity => 1.0,
            Link::Cloglog => (eta - eta.exp()).exp(),
        }
    }

    /// Exposure coefficient on the measure's natural scale.
    pub fn natural(&self, beta: f64) -> f64 {
        match self {
            Link::Identity => beta,
            _ => beta.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terms {
    ExposureOnly,
    ExposurePlusStratum,
    SaturatedWithInteraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub link: Link,
    pub terms: Terms,
    pub table: StratifiedCohortTable,
}

impl ModelSpec {
    pub fn new(link: Link, terms: Terms, table: StratifiedCohortTable) -> Self {
        ModelSpec { link, terms, table }
    }

    /// Log-likelihood at an arbitrary coefficient vector, `None` outside the
    /// model's domain.
    pub fn log_likelihood_at(&self, beta: &[f64]) -> Result<Option<f64>, GlmError> {
        let design = Design::build(self)?;
        let mu = design.fitted(self.link, &DVector::from_column_slice(beta), &design.zero_offset());
        Ok(mu.iter().all(|m| *m > 0.0 && *m < 1.0).then(|| design.log_likelihood(&mu)))
    }

    /// Score vector ∂ℓ/∂β at `beta`.
    pub fn score_at(&self, beta: &[f64]) -> Result<Vec<f64>, GlmError> {
        let design = Design::build(self)?;
        let offset = design.zero_offset();
        let beta = DVector::from_column_slice(beta);
        let eta = &design.x * &beta + &offset;
        let mut score = vec![0.0; beta.len()];
        for (i, row) in design.rows.iter().enumerate() {
            let mu = self.link.inverse(eta[i]);
            let g = (row.cases - row.total * mu) * self.link.mu_eta(eta[i]) / (mu * (1.0 - mu));
            for (j, s) in score.iter_mut().enumerate() {
                *s += design.x[(i, j)] * g;
            }
        }
        Ok(score)
    }
}

#[derive(Debug, Clone)]
struct Row {
    stratum: usize,
    exposed: bool,
    cases: f64,
    total: f64,
}

#[derive(Debug, Clone)]
struct Design {
    rows: Vec<Row>,
    x: DMatrix<f64>,
    names: Vec<String>,
    labels: Vec<String>,
}

const EXPOSURE: usize = 1;

impl Design {
    fn build(spec: &ModelSpec) -> Result<Design, GlmError> {
        let table = &spec.table;
        let k = table.len();
        if spec.terms == Terms::SaturatedWithInteraction && k < 2 {
            return Err(GlmError::InvalidSpec(
                "an exposure-stratum interaction needs at least two strata".into(),
            ));
        }
        let stratified = spec.terms != Terms::ExposureOnly;
        let mut rows = Vec::with_capacity(2 * k);
        for (s, stratum) in table.strata().iter().enumerate() {
            let c = &stratum.cell;
            for (exposed, cases, total) in [
                (false, c.unexposed_cases, c.unexposed_total),
                (true, c.exposed_cases, c.exposed_total),
            ] {
                if total == 0 {
                    if stratified {
                        return Err(GlmError::EmptyMargin {
                            stratum: stratum.label.clone(),
                            group: if exposed { "exposed" } else { "unexposed" },
                        });
                    }
                    continue;
                }
                rows.push(Row {
                    stratum: s,
                    exposed,
                    cases: cases as f64,
                    total: total as f64,
                });
            }
        }
        if !stratified {
            for (exposed, group) in [(false, "unexposed"), (true, "exposed")] {
                if !rows.iter().any(|r| r.exposed == exposed) {
                    return Err(GlmError::EmptyMargin {
                        stratum: "all".into(),
                        group,
                    });
                }
            }
        }

        let labels: Vec<String> = table.strata().iter().map(|s| s.label.clone()).collect();
        let mut names = vec!["(intercept)".to_string(), "exposure".to_string()];
        if stratified {
            names.extend(labels[1..].iter().map(|l| format!("stratum[{l}]")));
        }
        if spec.terms == Terms::SaturatedWithInteraction {
            names.extend(labels[1..].iter().map(|l| format!("exposure:stratum[{l}]")));
        }
        let p = names.len();
        let x = DMatrix::from_fn(rows.len(), p, |i, j| {
            let r = &rows[i];
            let e = if r.exposed { 1.0 } else { 0.0 };
            match j {
                0 => 1.0,
                1 => e,
                j if j < 2 + (k - 1) && stratified => {
                    if r.stratum == j - 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
                j => {
                    if r.stratum == j - k {
                        e
                    } else {
                        0.0
                    }
                }
            }
        });
        Ok(Design {
            rows,
            x,
            names,
            labels,
        })
    }

    fn zero_offset(&self) -> DVector<f64> {
        DVector::zeros(self.rows.len())
    }

    /// Same design with the exposure column removed and moved into the
    /// offset at coefficient `value`.
    fn with_fixed_exposure(&self, value: f64) -> (Design, DVector<f64>) {
        let offset = DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| if r.exposed { value } else { 0.0 }),
        );
        let mut names = self.names.clone();
        names.remove(EXPOSURE);
        let reduced = Design {
            rows: self.rows.clone(),
            x: self.x.clone().remove_column(EXPOSURE),
            names,
            labels: self.labels.clone(),
        };
        (reduced, offset)
    }

    /// Largest absolute component of ∂ℓ/∂β.
    fn score(&self, link: Link, beta: &DVector<f64>, offset: &DVector<f64>) -> f64 {
        let eta = &self.x * beta + offset;
        let mut score = DVector::<f64>::zeros(beta.len());
        for (i, row) in self.rows.iter().enumerate() {
            let mu = link.inverse(eta[i]);
            let g = (row.cases - row.total * mu) * link.mu_eta(eta[i]) / (mu * (1.0 - mu));
            score += self.x.row(i).transpose() * g;
        }
        score.amax()
    }

    fn fitted(&self, link: Link, beta: &DVector<f64>, offset: &DVector<f64>) -> Vec<f64> {
        let eta = &self.x * beta + offset;
        eta.iter().map(|&e| link.inverse(e)).collect()
    }

    fn log_likelihood(&self, mu: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(mu)
            .map(|(r, &m)| {
                let fail = r.total - r.cases;
                let mut l = special::ln_choose(r.total, r.cases);
                if r.cases > 0.0 {
                    l += r.cases * m.ln();
                }
                if fail > 0.0 {
                    l += fail * (-m).ln_1p();
                }
                l
            })
            .sum()
    }

    fn deviance(&self, mu: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(mu)
            .map(|(r, &m)| {
                let fail = r.total - r.cases;
                let mut d = 0.0;
                if r.cases > 0.0 {
                    d += r.cases * (r.cases / (r.total * m)).ln();
                }
                if fail > 0.0 {
                    d += fail * (fail / (r.total * (1.0 - m))).ln();
                }
                2.0 * d
            })
            .sum::<f64>()
            .max(0.0)
    }
}

const RISK_EPS: f64 = 1e-10;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: u32 = 32;
const DEVIANCE_TOL: f64 = 1e-10;
const SCORE_TOL: f64 = 1e-9;
const SCORE_FLOOR: f64 = 1e-7;
const STALL: usize = 5;
const PINNED: f64 = 1e-8;

fn in_domain(mu: &[f64]) -> bool {
    mu.iter().all(|&m| m > RISK_EPS && m < 1.0 - RISK_EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedRisk {
    pub stratum: String,
    pub exposed: bool,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub link: Link,
    pub terms: Terms,
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Standard errors from the expected information; `NaN` for a
    /// coefficient held fixed.
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub deviance: f64,
    pub fitted_risks: Vec<FittedRisk>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance_trace: Vec<f64>,
    /// Number of freely estimated coefficients.
    pub n_params: usize,
}

impl GlmFit {
    /// Common exposure effect on the natural scale (OR, RR, RD or HR).
    pub fn exposure_estimate(&self) -> f64 {
        self.link.natural(self.coefficients[EXPOSURE])
    }

    /// Exposure effect within each stratum on the natural scale.
    pub fn stratum_estimates(&self) -> Vec<f64> {
        let k = self.strata_labels().len();
        let base = self.coefficients[EXPOSURE];
        (0..k)
            .map(|s| {
                let extra = match self.terms {
                    Terms::SaturatedWithInteraction if s > 0 => self.coefficients[k + s],
                    _ => 0.0,
                };
                self.link.natural(base + extra)
            })
            .collect()
    }

    fn strata_labels(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = Vec::new();
        for f in &self.fitted_risks {
            if !labels.contains(&f.stratum.as_str()) {
                labels.push(&f.stratum);
            }
        }
        labels
    }

    /// Fitted (unexposed, exposed) risk pair for every stratum with both cells.
    pub fn fitted_points(&self) -> Vec<RiskPoint> {
        self.strata_labels()
            .into_iter()
            .filter_map(|label| {
                let get = |exposed| {
                    self.fitted_risks
                        .iter()
                        .find(|f| f.stratum == label && f.exposed == exposed)
                        .map(|f| f.risk)
                };
                Some(RiskPoint {
                    x: get(false)?,
                    y: get(true)?,
                    tag: PointTag::Stratum(label.to_string()),
                })
            })
            .collect()
    }
}

struct IrlsOutcome {
    beta: DVector<f64>,
    mu: Vec<f64>,
    deviance: f64,
    iterations: usize,
    trace: Vec<f64>,
    info: DMatrix<f64>,
}

fn weighted_least_squares(
    design: &Design,
    link: Link,
    eta: &DVector<f64>,
    offset: &DVector<f64>,
    working: impl Fn(usize, f64, f64) -> f64,
) -> Result<(DVector<f64>, DMatrix<f64>), GlmError> {
    let n = design.rows.len();
    let mut w = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    for (i, row) in design.rows.iter().enumerate() {
        let mu = link.inverse(eta[i]);
        let d = link.mu_eta(eta[i]);
        w[i] = row.total * d * d / (mu * (1.0 - mu));
        z[i] = working(i, mu, d) - offset[i];
    }
    let xtw = design.x.transpose() * DMatrix::from_diagonal(&w);
    let info = &xtw * &design.x;
    let rhs = &xtw * z;
    let beta = info.clone().lu().solve(&rhs).ok_or(GlmError::Singular)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(GlmError::Singular);
    }
    Ok((beta, info))
}

fn starting_values(
    design: &Design,
    link: Link,
    offset: &DVector<f64>,
    warm: Option<&DVector<f64>>,
) -> Result<DVector<f64>, GlmError> {
    if let Some(b) = warm {
        if in_domain(&design.fitted(link, b, offset)) {
            return Ok(b.clone());
        }
    }
    // Smoothed cell proportions mapped through the link.
    let smoothed: Vec<f64> = design
        .rows
        .iter()
        .map(|r| (r.cases + 0.5) / (r.total + 1.0))
        .collect();
    let eta0 = DVector::from_iterator(smoothed.len(), smoothed.iter().map(|&m| link.link(m)));
    if let Ok((b, _)) = weighted_least_squares(design, link, &eta0, offset, |i, _, _| eta0[i]) {
        if in_domain(&design.fitted(link, &b, offset)) {
            return Ok(b);
        }
    }
    // Intercept only, placed so every offset row stays inside the domain.
    let (lo, hi) = (link.link(1e-6), link.link(1.0 - 1e-6));
    let off_min = offset.iter().cloned().fold(f64::INFINITY, f64::min);
    let off_max = offset.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (a_lo, a_hi) = (lo - off_min, hi - off_max);
    if a_lo >= a_hi {
        return Err(GlmError::Infeasible);
    }
    let cases: f64 = design.rows.iter().map(|r| r.cases).sum();
    let total: f64 = design.rows.iter().map(|r| r.total).sum();
    let pbar = ((cases + 0.5) / (total + 1.0)).clamp(1e-3, 1.0 - 1e-3);
    let mean_off = offset.mean();
    let margin = 0.05 * (a_hi - a_lo);
    let a = (link.link(pbar) - mean_off).clamp(a_lo + margin, a_hi - margin);
    let mut b = DVector::zeros(design.x.ncols());
    b[0] = a;
    if in_domain(&design.fitted(link, &b, offset)) {
        Ok(b)
    } else {
        Err(GlmError::Infeasible)
    }
}

fn pinned_cell(design: &Design, link: Link, mu: &[f64]) -> Option<GlmError> {
    if link == Link::Logit {
        return None;
    }
    design.rows.iter().zip(mu).find_map(|(r, &m)| {
        (!(PINNED..=1.0 - PINNED).contains(&m)).then(|| GlmError::Boundary {
            stratum: design.labels[r.stratum].clone(),
            exposed: r.exposed,
            risk: m,
        })
    })
}

fn irls(
    design: &Design,
    link: Link,
    offset: &DVector<f64>,
    warm: Option<&DVector<f64>>,
) -> Result<IrlsOutcome, GlmError> {
    let mut beta = starting_values(design, link, offset, warm)?;
    let mut mu = design.fitted(link, &beta, offset);
    let mut dev = design.deviance(&mu);
    let mut trace = vec![dev];
    let mut flat = 0;

    for iter in 1..=MAX_ITER {
        let eta = &design.x * &beta + offset;
        let (target, _) = weighted_least_squares(design, link, &eta, offset, |i, m, d| {
            let r = &design.rows[i];
            eta[i] + (r.cases / r.total - m) / d
        })?;
        let step = &target - &beta;
        let mut accepted = None;
        if flat > 0 {
            // Deviance is flat to rounding here; judge the full step by the
            // score instead.
            let cand = &beta + &step;
            let cmu = design.fitted(link, &cand, offset);
            if in_domain(&cmu) && design.score(link, &cand, offset) < design.score(link, &beta, offset) {
                let cdev = design.deviance(&cmu);
                if cdev <= dev + DEVIANCE_TOL {
                    accepted = Some((cand, cmu, cdev));
                }
            }
        }
        for h in 0..=MAX_HALVINGS {
            if accepted.is_some() {
                break;
            }
            let cand = &beta + &step * 0.5f64.powi(h as i32);
            let cmu = design.fitted(link, &cand, offset);
            if !in_domain(&cmu) {
                continue;
            }
            let cdev = design.deviance(&cmu);
            if cdev <= dev {
                accepted = Some((cand, cmu, cdev));
                break;
            }
        }
        let Some((cand, cmu, cdev)) = accepted else {
            // No admissible step: either pressed against the domain edge or
            // already at the optimum to rounding.
            if let Some(err) = pinned_cell(design, link, &mu) {
                return Err(err);
            }
            return finish(design, link, offset, beta, mu, dev, iter, trace);
        };
        let change = (dev - cdev).abs();
        beta = cand;
        mu = cmu;
        dev = cdev;
        trace.push(dev);
        // A flat deviance alone can stop short of the optimum under
        // non-canonical links, so the score has to vanish as well.
        if change < DEVIANCE_TOL {
            flat += 1;
            let score = design.score(link, &beta, offset);
            if score < SCORE_TOL || (flat >= STALL && score < SCORE_FLOOR) {
                if let Some(err) = pinned_cell(design, link, &mu) {
                    return Err(err);
                }
                return finish(design, link, offset, beta, mu, dev, iter, trace);
            }
            if flat >= STALL {
                if let Some(err) = pinned_cell(design, link, &mu) {
                    return Err(err);
                }
            }
        } else {
            flat = 0;
        }
    }
    Err(GlmError::NonConvergence {
        iterations: MAX_ITER,
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    design: &Design,
    link: Link,
    offset: &DVector<f64>,
    beta: DVector<f64>,
    mu: Vec<f64>,
    deviance: f64,
    iterations: usize,
    trace: Vec<f64>,
) -> Result<IrlsOutcome, GlmError> {
    let eta = &design.x * &beta + offset;
    let (_, info) = weighted_least_squares(design, link, &eta, offset, |i, _, _| eta[i])?;
    Ok(IrlsOutcome {
        beta,
        mu,
        deviance,
        iterations,
        trace,
        info,
    })
}

fn assemble(
    spec: &ModelSpec,
    design: &Design,
    out: IrlsOutcome,
    fixed_exposure: Option<f64>,
) -> GlmFit {
    let se: Vec<f64> = match out.info.clone().try_inverse() {
        Some(cov) => (0..cov.nrows()).map(|i| cov[(i, i)].sqrt()).collect(),
        None => vec![f64::NAN; out.beta.len()],
    };
    let (mut coefficients, mut std_errors): (Vec<f64>, Vec<f64>) = (out.beta.iter().cloned().collect(), se);
    let mut names = design.names.clone();
    if let Some(v) = fixed_exposure {
        coefficients.insert(EXPOSURE, v);
        std_errors.insert(EXPOSURE, f64::NAN);
        names.insert(EXPOSURE, "exposure".into());
    }
    let n_params = out.beta.len();
    let fitted_risks = design
        .rows
        .iter()
        .zip(&out.mu)
        .map(|(r, &risk)| FittedRisk {
            stratum: design.labels[r.stratum].clone(),
            exposed: r.exposed,
            risk,
        })
        .collect();
    GlmFit {
        link: spec.link,
        terms: spec.terms,
        coefficient_names: names,
        coefficients,
        std_errors,
        log_likelihood: design.log_likelihood(&out.mu),
        deviance: out.deviance,
        fitted_risks,
        converged: true,
        iterations: out.iterations,
        deviance_trace: out.trace,
        n_params,
    }
}

/// Maximum-likelihood fit by IRLS with step halving.
pub fn fit(spec: &ModelSpec) -> Result<GlmFit, GlmError> {
    let design = Design::build(spec)?;
    let offset = design.zero_offset();
    let out = irls(&design, spec.link, &offset, None)?;
    Ok(assemble(spec, &design, out, None))
}

/// Fit with the exposure coefficient held at `value` (the restricted model
/// behind likelihood-ratio tests and profile intervals).
pub fn fit_fixed_exposure(spec: &ModelSpec, value: f64) -> Result<GlmFit, GlmError> {
    fit_fixed_from(spec, value, None)
}

fn fit_fixed_from(spec: &ModelSpec, value: f64, warm: Option<&GlmFit>) -> Result<GlmFit, GlmError> {
    let design = Design::build(spec)?;
    let (reduced, offset) = design.with_fixed_exposure(value);
    let warm = warm.map(|f| {
        let mut c = f.coefficients.clone();
        c.remove(EXPOSURE);
        DVector::from_vec(c)
    });
    let out = irls(&reduced, spec.link, &offset, warm.as_ref())?;
    Ok(assemble(spec, &reduced, out, Some(value)))
}

/// p-value of the likelihood-ratio test of `null_fit` within `alt_fit`.
pub fn lr_test(null_fit: &GlmFit, alt_fit: &GlmFit, df: u32) -> Result<f64, GlmError> {
    let statistic = 2.0 * (alt_fit.log_likelihood - null_fit.log_likelihood);
    if statistic < -1e-8 {
        return Err(GlmError::NestingViolation { statistic });
    }
    Ok(chi_square_sf(statistic.max(0.0), df))
}

/// Likelihood-ratio test of no exposure effect: the model against itself
/// with the exposure coefficient fixed at zero.
pub fn exposure_lr_test(spec: &ModelSpec) -> Result<(GlmFit, f64), GlmError> {
    let alt = fit(spec)?;
    let null = fit_fixed_from(spec, 0.0, Some(&alt))?;
    let p = lr_test(&null, &alt, 1)?;
    Ok((alt, p))
}

/// Likelihood-ratio test of the exposure-stratum interaction.
pub fn interaction_lr_test(
    link: Link,
    table: &StratifiedCohortTable,
) -> Result<(GlmFit, GlmFit, f64), GlmError> {
    let null = fit(&ModelSpec::new(link, Terms::ExposurePlusStratum, table.clone()))?;
    let alt = fit(&ModelSpec::new(link, Terms::SaturatedWithInteraction, table.clone()))?;
    let df = (table.len() - 1) as u32;
    let p = lr_test(&null, &alt, df)?;
    Ok((null, alt, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrInterval {
    pub estimate: f64,
    #[serde(serialize_with = "crate::json::real")]
    pub lower: f64,
    #[serde(serialize_with = "crate::json::real")]
    pub upper: f64,
    pub level: f64,
    pub lower_bounded: bool,
    pub upper_bounded: bool,
}

const PROFILE_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: u32 = 40;

/// Profile-likelihood interval for the exposure coefficient, reported on
/// the natural scale of the link's measure.
pub fn profile_interval(spec: &ModelSpec, level: f64) -> Result<LrInterval, GlmError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(GlmError::InvalidSpec(format!("confidence level {level} not in (0, 1)")));
    }
    let mle = fit(spec)?;
    let b_hat = mle.coefficients[EXPOSURE];
    let critical = chi_square_quantile(level, 1);
    let step = match mle.std_errors[EXPOSURE] {
        s if s.is_finite() && s > 0.0 => s,
        _ => 0.1,
    };
    // Infeasible or boundary-pinned restricted fits lie beyond the interval.
    let excess = |b: f64| -> Result<f64, GlmError> {
        match fit_fixed_from(spec, b, Some(&mle)) {
            Ok(f) => Ok(2.0 * (mle.log_likelihood - f.log_likelihood) - critical),
            Err(GlmError::Infeasible | GlmError::Boundary { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    let mut ends = [0.0; 2];
    let mut bounded = [true; 2];
    for (slot, dir) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut inner = b_hat;
        let mut outer = None;
        for j in 0..MAX_DOUBLINGS {
            let b = b_hat + dir * step * 2f64.powi(j as i32);
            if excess(b)? > 0.0 {
                outer = Some(b);
                break;
            }
            inner = b;
        }
        let Some(mut outer) = outer else {
            bounded[slot] = false;
            ends[slot] = dir * f64::INFINITY;
            continue;
        };
        while (outer - inner).abs() > PROFILE_TOL {
            let mid = 0.5 * (inner + outer);
            if excess(mid)? > 0.0 {
                outer = mid;
            } else {
                inner = mid;
            }
        }
        ends[slot] = 0.5 * (inner + outer);
    }
    let nat = |b: f64| spec.link.natural(b);
    Ok(LrInterval {
        estimate: nat(b_hat),
        lower: nat(ends[0]),
        upper: nat(ends[1]),
        level,
        lower_bounded: bounded[0],
        upper_bounded: bounded[1],
    })
}
