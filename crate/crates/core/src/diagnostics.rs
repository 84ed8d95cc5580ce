//! The full analysis of one stratified table: points, standardization,
//! confounding, per-measure estimates and collapsibility.

use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    self, association_points, confounding_rectangle, signed_distance, standard_population,
    standardize_table, standardized_hull, ConfoundingRectangle, Containment, GeometryError, Preset,
    RiskPoint, StandardPopulation,
};
use crate::glm::{self, GlmError, GlmFit, Link, LrInterval, ModelSpec, Terms};
use crate::measures::{self, CollapsibilityReport, EffectModification, Measure};
use crate::tables::StratifiedCohortTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("{stage}: {source}")]
    Geometry {
        stage: &'static str,
        source: GeometryError,
    },
}

impl DiagnosticsError {
    fn at(stage: &'static str) -> impl FnOnce(GeometryError) -> DiagnosticsError {
        move |source| DiagnosticsError::Geometry { stage, source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Containment tolerance for the crude point against the hull.
    pub tol: f64,
    /// Confidence level of the likelihood-ratio intervals.
    pub level: f64,
    /// Spread on the comparison scale above which stratum values differ.
    pub effect_tol: f64,
    pub custom_standards: Vec<StandardPopulation>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tol: geometry::DEFAULT_TOL,
            level: 0.95,
            effect_tol: 1e-9,
            custom_standards: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Points {
    pub crude: RiskPoint,
    pub strata: Vec<RiskPoint>,
    pub standardized: Vec<RiskPoint>,
    pub rectangle: ConfoundingRectangle,
    /// Stratum labels of the hull vertices, counterclockwise.
    pub hull: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfoundingFlag {
    OffSegment,
    OnSegment,
    Indeterminate,
}

pub const CAVEAT: &str = "crude point position is judged on sample proportions; \
the link between confounding and a crude point off the standardized hull holds exactly \
only in the population, so with finite samples it is approximate";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confounding {
    pub flag: ConfoundingFlag,
    pub containment: Containment,
    /// Distance from the crude point to the hull: positive outside,
    /// negative inside, zero on the boundary.
    pub signed_distance: f64,
    pub tol: f64,
    pub caveat: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub interval: LrInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumEstimate {
    pub stratum: String,
    #[serde(serialize_with = "crate::json::real")]
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub model: Terms,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    pub log_likelihood: f64,
}

impl From<&GlmFit> for FitSummary {
    fn from(f: &GlmFit) -> Self {
        FitSummary {
            model: f.terms,
            converged: f.converged,
            iterations: f.iterations,
            deviance: f.deviance,
            log_likelihood: f.log_likelihood,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureResult {
    pub measure: Measure,
    pub link: Link,
    pub crude: Option<Estimate>,
    pub stratum_estimates: Option<Vec<StratumEstimate>>,
    pub interaction_p_value: Option<f64>,
    pub interaction_df: usize,
    pub common: Option<Estimate>,
    pub effect_modification: Option<EffectModification>,
    pub fits: Vec<FitSummary>,
    pub errors: Vec<StageError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CollapsibilityEntry {
    Report(CollapsibilityReport),
    Error { measure: Measure, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub points: Points,
    pub confounding: Confounding,
    pub measures: Vec<MeasureResult>,
    pub collapsibility: Vec<CollapsibilityEntry>,
}

impl AnalysisReport {
    pub fn measure(&self, m: Measure) -> &MeasureResult {
        self.measures
            .iter()
            .find(|r| r.measure == m)
            .expect("every measure is reported")
    }

    pub fn to_json(&self) -> String {
        crate::json::to_report_string(self).expect("report serializes")
    }
}

/// Classifies the crude point against the standardized hull.
pub fn confounding(strata: &[RiskPoint], crude: &RiskPoint, tol: f64) -> Result<Confounding, GeometryError> {
    let hull = standardized_hull(strata)?;
    let containment = geometry::contains(&hull, crude, tol);
    let flag = match (strata.len(), containment) {
        (_, Containment::Outside) => ConfoundingFlag::OffSegment,
        (0..=2, _) => ConfoundingFlag::OnSegment,
        _ => ConfoundingFlag::Indeterminate,
    };
    Ok(Confounding {
        flag,
        containment,
        signed_distance: signed_distance(&hull, crude),
        tol,
        caveat: CAVEAT,
    })
}

fn estimate(spec: &ModelSpec, level: f64, with_p: bool) -> Result<(Estimate, Vec<FitSummary>), GlmError> {
    let (fit, p) = if with_p {
        let (fit, p) = glm::exposure_lr_test(spec)?;
        (fit, Some(p))
    } else {
        (glm::fit(spec)?, None)
    };
    let interval = glm::profile_interval(spec, level)?;
    Ok((
        Estimate {
            estimate: fit.exposure_estimate(),
            interval,
            p_value: p,
        },
        vec![FitSummary::from(&fit)],
    ))
}

fn analyze_measure(
    m: Measure,
    table: &StratifiedCohortTable,
    strata: &[RiskPoint],
    options: &AnalysisOptions,
) -> MeasureResult {
    let link = Link::for_measure(m);
    let k = table.len();
    let mut out = MeasureResult {
        measure: m,
        link,
        crude: None,
        stratum_estimates: None,
        interaction_p_value: None,
        interaction_df: k.saturating_sub(1),
        common: None,
        effect_modification: None,
        fits: Vec::new(),
        errors: Vec::new(),
    };
    let fail = |out: &mut MeasureResult, stage: &'static str, e: &dyn std::fmt::Display| {
        out.errors.push(StageError {
            stage,
            message: e.to_string(),
        })
    };

    let crude = ModelSpec::new(link, Terms::ExposureOnly, table.crude_table());
    match estimate(&crude, options.level, true) {
        Ok((e, fits)) => {
            out.crude = Some(e);
            out.fits.extend(fits);
        }
        Err(e) => fail(&mut out, "crude", &e),
    }

    let adjusted = ModelSpec::new(link, Terms::ExposurePlusStratum, table.clone());
    match estimate(&adjusted, options.level, true) {
        Ok((e, fits)) => {
            out.common = Some(e);
            out.fits.extend(fits);
        }
        Err(e) => fail(&mut out, "common", &e),
    }

    if k >= 2 {
        match glm::interaction_lr_test(link, table) {
            Ok((_, saturated, p)) => {
                out.interaction_p_value = Some(p);
                out.fits.push(FitSummary::from(&saturated));
                out.stratum_estimates = Some(
                    table
                        .strata()
                        .iter()
                        .zip(saturated.stratum_estimates())
                        .map(|(s, estimate)| StratumEstimate {
                            stratum: s.label.clone(),
                            estimate,
                        })
                        .collect(),
                );
            }
            Err(e) => fail(&mut out, "interaction", &e),
        }
        match measures::effect_modification(m, strata, options.effect_tol) {
            Ok(em) => out.effect_modification = Some(em),
            Err(e) => fail(&mut out, "effect_modification", &e),
        }
    } else if let Some(c) = &out.crude {
        out.stratum_estimates = Some(vec![StratumEstimate {
            stratum: table.strata()[0].label.clone(),
            estimate: c.estimate,
        }]);
    }

    // Observed values stand in when the saturated fit is unavailable.
    if out.stratum_estimates.is_none() {
        let observed: Option<Vec<StratumEstimate>> = strata
            .iter()
            .map(|p| {
                measures::measure_value(m, p).map(|estimate| StratumEstimate {
                    stratum: p.label().to_string(),
                    estimate,
                })
            })
            .collect();
        out.stratum_estimates = observed;
    }
    out
}

/// Runs the whole pipeline. Geometry failures abort; model failures are
/// recorded per measure and the rest of the report is still produced.
pub fn analyze(table: &StratifiedCohortTable, options: &AnalysisOptions) -> Result<AnalysisReport, DiagnosticsError> {
    let (crude, strata) = association_points(table).map_err(DiagnosticsError::at("association points"))?;

    let mut standardized = Vec::new();
    for preset in Preset::TABLE_PRESETS {
        let std = standard_population(table, preset).map_err(DiagnosticsError::at("standard population"))?;
        standardized.push(standardize_table(table, &std).map_err(DiagnosticsError::at("standardization"))?);
    }
    for std in &options.custom_standards {
        standardized.push(standardize_table(table, std).map_err(DiagnosticsError::at("standardization"))?);
    }

    let hull = standardized_hull(&strata).map_err(DiagnosticsError::at("hull"))?;
    let points = Points {
        rectangle: confounding_rectangle(&strata).map_err(DiagnosticsError::at("rectangle"))?,
        hull: hull
            .vertex_strata()
            .iter()
            .map(|&i| strata[i].label().to_string())
            .collect(),
        crude: crude.clone(),
        strata: strata.clone(),
        standardized,
    };
    let confounding = confounding(&strata, &crude, options.tol).map_err(DiagnosticsError::at("confounding"))?;

    // One thread per measure; joined in enumeration order.
    let measures: Vec<MeasureResult> = thread::scope(|scope| {
        let handles: Vec<_> = Measure::ALL
            .iter()
            .map(|&m| {
                let strata = &strata;
                scope.spawn(move || analyze_measure(m, table, strata, options))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("measure analysis panicked"))
            .collect()
    });

    let collapsibility = Measure::ALL
        .iter()
        .map(|&m| match measures::collapse_analysis(m, &strata) {
            Ok(r) => CollapsibilityEntry::Report(r),
            Err(e) => CollapsibilityEntry::Error {
                measure: m,
                error: e.to_string(),
            },
        })
        .collect();

    Ok(AnalysisReport {
        points,
        confounding,
        measures,
        collapsibility,
    })
}
