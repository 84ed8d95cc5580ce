//! Builders for the seven standard figures of the Whickham example.

use thiserror::Error;

use crate::fixtures;
use crate::geometry::{
    association_points, confounding_rectangle, standard_population, standardize, standardize_table,
    standardized_hull, GeometryError, PointTag, Preset, RiskPoint, StandardPopulation,
};
use crate::glm::{self, GlmError, GlmFit, Link, ModelSpec, Terms};
use crate::measures::{collapse_analysis, measure_value, Measure, MeasureError};
use crate::tables::StratifiedCohortTable;

use super::{DiagramSpec, Figure, LineStyle, PointStyle, Shape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FigureError {
    #[error("no figure {0}; figures are numbered 1 to 7")]
    Unknown(u8),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("{measure} is undefined at stratum '{stratum}'")]
    Undefined { measure: Measure, stratum: String },
}

pub const FIGURES: [(u8, &str); 7] = [
    (1, "standardized_points"),
    (2, "confounding_rectangle"),
    (3, "effect_modification"),
    (4, "standardized_hull"),
    (5, "contours"),
    (6, "collapsible"),
    (7, "noncollapsible"),
];

pub fn slug(n: u8) -> Option<&'static str> {
    FIGURES.iter().find(|(i, _)| *i == n).map(|(_, s)| *s)
}

/// `figN_<slug>.svg`.
pub fn file_name(n: u8) -> Option<String> {
    slug(n).map(|s| format!("fig{n}_{s}.svg"))
}

/// Builds figure `n` from `table`, or from the bundled table the figure is
/// drawn from by default (six age groups for figure 4, two otherwise).
pub fn figure(n: u8, table: Option<&StratifiedCohortTable>) -> Result<Figure, FigureError> {
    let default = || if n == 4 { fixtures::whickham_six() } else { fixtures::whickham() };
    let owned;
    let table = match table {
        Some(t) => t,
        None => {
            owned = default();
            &owned
        }
    };
    match n {
        1 => standardized_points(table),
        2 => rectangle(table),
        3 => effect_modification(table),
        4 => hull(table),
        5 => Ok(contours()),
        6 => collapsibility(table, Measure::RiskDifference),
        7 => collapsibility(table, Measure::OddsRatio),
        _ => Err(FigureError::Unknown(n)),
    }
}

fn preset_label(p: Preset) -> &'static str {
    match p {
        Preset::StudySample => "study sample",
        Preset::Exposed => "exposed",
        Preset::Unexposed => "unexposed",
        Preset::Custom => "custom",
    }
}

fn hull_shape(strata: &[RiskPoint]) -> Result<Option<Shape>, GeometryError> {
    let hull = standardized_hull(strata)?;
    let v: Vec<(f64, f64)> = hull.vertices().iter().map(|p| p.xy()).collect();
    Ok(match v.len() {
        0 | 1 => None,
        2 => Some(Shape::Segment(v[0], v[1])),
        _ => Some(Shape::Polygon(v)),
    })
}

fn with_strata(mut spec: DiagramSpec, strata: &[RiskPoint]) -> DiagramSpec {
    for p in strata {
        spec = spec.point(p.clone(), PointStyle::SolidCircle, p.label());
    }
    spec
}

fn base(table: &StratifiedCohortTable, title: &str) -> Result<(DiagramSpec, RiskPoint, Vec<RiskPoint>), FigureError> {
    let (crude, strata) = association_points(table)?;
    let mut spec = DiagramSpec::default().titled(title);
    if let Some(shape) = hull_shape(&strata)? {
        spec = spec.shape(shape, LineStyle::Solid);
    }
    Ok((spec, crude, strata))
}

fn standardized_points(table: &StratifiedCohortTable) -> Result<Figure, FigureError> {
    let (mut spec, crude, strata) = base(table, "Crude, stratum-specific and standardized points")?;
    spec = spec.point(crude, PointStyle::OpenCircle, "crude");
    spec = with_strata(spec, &strata);
    for preset in Preset::TABLE_PRESETS {
        let p = standardize_table(table, &standard_population(table, preset)?)?;
        spec = spec.point(p, PointStyle::OpenCircle, preset_label(preset));
    }
    Ok(Figure::single(spec))
}

fn rectangle(table: &StratifiedCohortTable) -> Result<Figure, FigureError> {
    let (mut spec, crude, strata) = base(table, "Standardized segment and confounding rectangle")?;
    spec = spec.shape(Shape::Rectangle(confounding_rectangle(&strata)?), LineStyle::Dashed);
    spec = spec.point(crude, PointStyle::OpenCircle, "crude");
    Ok(Figure::single(with_strata(spec, &strata)))
}

fn hull(table: &StratifiedCohortTable) -> Result<Figure, FigureError> {
    let (mut spec, crude, strata) = base(table, "Standardized hull and confounding rectangle")?;
    spec = spec.shape(Shape::Rectangle(confounding_rectangle(&strata)?), LineStyle::Dashed);
    spec = spec.point(crude, PointStyle::OpenCircle, "crude");
    Ok(Figure::single(with_strata(spec, &strata)))
}

fn value_label(m: Measure, v: f64) -> String {
    format!("{} = {v:.3}", m.abbreviation())
}

fn common_fit(table: &StratifiedCohortTable, m: Measure) -> Result<GlmFit, GlmError> {
    glm::fit(&ModelSpec::new(Link::for_measure(m), Terms::ExposurePlusStratum, table.clone()))
}

fn effect_modification(table: &StratifiedCohortTable) -> Result<Figure, FigureError> {
    let (_, strata) = association_points(table)?;
    let mut panels = Vec::new();
    for m in Measure::ALL {
        let mut spec = DiagramSpec::default().titled(m.as_str());
        for p in &strata {
            let v = measure_value(m, p).ok_or_else(|| FigureError::Undefined {
                measure: m,
                stratum: p.label().to_string(),
            })?;
            spec = spec.contour(m, v, LineStyle::Dashed, value_label(m, v));
        }
        let common = common_fit(table, m)?.exposure_estimate();
        spec = spec.contour(m, common, LineStyle::Solid, value_label(m, common));
        panels.push(with_strata(spec, &strata));
    }
    Ok(Figure { panels, columns: 2 })
}

/// Contour levels drawn for each measure.
pub fn contour_levels(m: Measure) -> &'static [f64] {
    if m.is_ratio() {
        &[0.25, 0.5, 0.75, 1.5, 2.0, 4.0]
    } else {
        &[-0.6, -0.4, -0.2, 0.2, 0.4, 0.6]
    }
}

fn contours() -> Figure {
    let panels = Measure::ALL
        .iter()
        .map(|&m| {
            contour_levels(m)
                .iter()
                .fold(DiagramSpec::default().titled(m.as_str()), |spec, &v| {
                    spec.contour(m, v, LineStyle::Dashed, format!("{v}"))
                })
        })
        .collect();
    Figure { panels, columns: 2 }
}

/// Fitted stratum points of the no-interaction model for `m`, i.e. the
/// stratum points that share the common estimate exactly.
pub fn fitted_strata(table: &StratifiedCohortTable, m: Measure) -> Result<(GlmFit, Vec<RiskPoint>), GlmError> {
    let fit = common_fit(table, m)?;
    let points = fit.fitted_points();
    Ok((fit, points))
}

fn collapsibility(table: &StratifiedCohortTable, m: Measure) -> Result<Figure, FigureError> {
    let (fit, strata) = fitted_strata(table, m)?;
    let common = fit.exposure_estimate();
    let title = if m.is_ratio() {
        "Noncollapsibility along a curved contour"
    } else {
        "Collapsibility along a straight contour"
    };
    let mut spec = DiagramSpec::default()
        .titled(title)
        .contour(m, common, LineStyle::Solid, value_label(m, common));
    if let Some(shape) = hull_shape(&strata)? {
        spec = spec.shape(shape, LineStyle::Solid);
    }
    spec = with_strata(spec, &strata);
    if m.is_ratio() {
        let report = collapse_analysis(m, &strata)?;
        let std = StandardPopulation::custom(report.argmin_weights.clone())?;
        let mut p = standardize(&strata, &std)?;
        p.tag = PointTag::Standardized("minimum".into());
        spec = spec.point(p, PointStyle::OpenCircle, format!("minimum {}", value_label(m, report.min_value)));
    }
    Ok(Figure::single(spec))
}
