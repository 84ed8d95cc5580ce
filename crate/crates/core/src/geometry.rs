//! Geometry of the unit square: association points, standardization as a
//! convex combination, standardized hulls and confounding rectangles.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tables::{collapse, stratum_risks, CohortCell, StratifiedCohortTable, TableError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies outside the unit square")]
    OutOfSquare { x: f64, y: f64 },
    #[error("{weights} weights supplied for {strata} strata")]
    LengthMismatch { weights: usize, strata: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{preset} standard population is undefined: no {group} individuals")]
    UndefinedWeights { preset: Preset, group: &'static str },
    #[error("stratum '{stratum}' has no {group} individuals")]
    EmptyMargin { stratum: String, group: &'static str },
    #[error("at least one point is required")]
    NoPoints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum PointTag {
    Crude,
    Stratum(String),
    Standardized(String),
    Causal(String),
}

/// A point of the unit square: risk in the unexposed (`x`) against risk in
/// the exposed (`y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub x: f64,
    pub y: f64,
    pub tag: PointTag,
}

impl RiskPoint {
    pub fn new(x: f64, y: f64, tag: PointTag) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(GeometryError::OutOfSquare { x, y });
        }
        Ok(RiskPoint { x, y, tag })
    }

    pub fn stratum(x: f64, y: f64, label: &str) -> Result<Self, GeometryError> {
        Self::new(x, y, PointTag::Stratum(label.to_string()))
    }

    pub fn label(&self) -> &str {
        match &self.tag {
            PointTag::Crude => "crude",
            PointTag::Stratum(s) | PointTag::Standardized(s) | PointTag::Causal(s) => s,
        }
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    StudySample,
    Exposed,
    Unexposed,
    Custom,
}

impl Preset {
    pub const TABLE_PRESETS: [Preset; 3] = [Preset::StudySample, Preset::Exposed, Preset::Unexposed];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::StudySample => "study_sample",
            Preset::Exposed => "exposed",
            Preset::Unexposed => "unexposed",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "study_sample" => Ok(Preset::StudySample),
            "exposed" => Ok(Preset::Exposed),
            "unexposed" => Ok(Preset::Unexposed),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown standard population '{other}'")),
        }
    }
}

/// A distribution over strata used for standardization.
///
/// Presets derived from a table also keep their weights as exact rationals,
/// so standardizing the same table reproduces crude margins bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardPopulation {
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    preset: Preset,
}

impl StandardPopulation {
    const SUM_TOL: f64 = 1e-12;

    /// Custom weights: nonnegative and summing to one within 1e-12.
    pub fn custom(weights: Vec<f64>) -> Result<Self, GeometryError> {
        Self::from_weights(weights, Preset::Custom)
    }

    fn from_weights(weights: Vec<f64>, preset: Preset) -> Result<Self, GeometryError> {
        if weights.is_empty() {
            return Err(GeometryError::InvalidWeights("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(GeometryError::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(GeometryError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(StandardPopulation {
            weights,
            exact: None,
            preset,
        })
    }

    fn from_counts(counts: &[u64], preset: Preset) -> Self {
        let total: u64 = counts.iter().sum();
        let exact: Vec<BigRational> = counts
            .iter()
            .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total)))
            .collect();
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        StandardPopulation {
            weights,
            exact: Some(exact),
            preset,
        }
    }

    /// Unit weight on stratum `index` of `k`.
    pub fn unit(k: usize, index: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[index] = 1.0;
        StandardPopulation {
            weights,
            exact: None,
            preset: Preset::Custom,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exact_weights(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn stratum_point(label: &str, cell: &CohortCell) -> Result<RiskPoint, GeometryError> {
    let (x, y) = stratum_risks(cell).map_err(|e| match e {
        TableError::EmptyMargin { group, .. } => GeometryError::EmptyMargin {
            stratum: label.to_string(),
            group,
        },
        other => GeometryError::InvalidWeights(other.to_string()),
    })?;
    RiskPoint::stratum(x, y, label)
}

/// Crude point from the collapsed counts and one point per stratum, in order.
pub fn association_points(
    table: &StratifiedCohortTable,
) -> Result<(RiskPoint, Vec<RiskPoint>), GeometryError> {
    let crude_cell = collapse(table);
    let mut crude = stratum_point("crude", &crude_cell)?;
    crude.tag = PointTag::Crude;
    let strata = table
        .strata()
        .iter()
        .map(|s| stratum_point(&s.label, &s.cell))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((crude, strata))
}

/// Componentwise convex combination of the stratum points.
pub fn standardize(strata: &[RiskPoint], std: &StandardPopulation) -> Result<RiskPoint, GeometryError> {
    if strata.len() != std.len() {
        return Err(GeometryError::LengthMismatch {
            weights: std.len(),
            strata: strata.len(),
        });
    }
    // A unit weight returns the stratum point itself, untouched by rounding.
    if let Some(i) = std.weights.iter().position(|&w| w == 1.0) {
        return RiskPoint::new(strata[i].x, strata[i].y, standardized_tag(std));
    }
    let (x, y) = strata
        .iter()
        .zip(&std.weights)
        .fold((0.0, 0.0), |(x, y), (p, w)| (x + w * p.x, y + w * p.y));
    RiskPoint::new(x.clamp(0.0, 1.0), y.clamp(0.0, 1.0), standardized_tag(std))
}

fn standardized_tag(std: &StandardPopulation) -> PointTag {
    PointTag::Standardized(std.preset.as_str().to_string())
}

/// Standardizes the table's own stratum risks.
///
/// With exact weights the whole sum is carried out in rational arithmetic
/// and rounded once, so e.g. the exposed standard reproduces the crude risk
/// in the exposed exactly.
pub fn standardize_table(
    table: &StratifiedCohortTable,
    std: &StandardPopulation,
) -> Result<RiskPoint, GeometryError> {
    let Some(exact) = std.exact_weights() else {
        let (_, strata) = association_points(table)?;
        return standardize(&strata, std);
    };
    if exact.len() != table.len() {
        return Err(GeometryError::LengthMismatch {
            weights: exact.len(),
            strata: table.len(),
        });
    }
    let mut x = BigRational::zero();
    let mut y = BigRational::zero();
    for (s, w) in table.strata().iter().zip(exact) {
        if w.is_zero() {
            continue;
        }
        let c = &s.cell;
        if c.unexposed_total == 0 || c.exposed_total == 0 {
            return Err(GeometryError::EmptyMargin {
                stratum: s.label.clone(),
                group: if c.exposed_total == 0 { "exposed" } else { "unexposed" },
            });
        }
        x += w * BigRational::new(c.unexposed_cases.into(), c.unexposed_total.into());
        y += w * BigRational::new(c.exposed_cases.into(), c.exposed_total.into());
    }
    RiskPoint::new(rational_to_f64(&x), rational_to_f64(&y), standardized_tag(std))
}

/// Correctly rounded conversion when numerator and denominator are exact
/// doubles; falls back to `num` otherwise.
pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    const EXACT: u64 = 1 << 53;
    let (n, d) = (r.numer(), r.denom());
    match (n.to_u64(), d.to_u64()) {
        (Some(n), Some(d)) if n <= EXACT && d <= EXACT => n as f64 / d as f64,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// The three standard populations that can be read off the table.
pub fn standard_population(
    table: &StratifiedCohortTable,
    preset: Preset,
) -> Result<StandardPopulation, GeometryError> {
    let counts: Vec<u64> = match preset {
        Preset::StudySample => table.strata().iter().map(|s| s.cell.total()).collect(),
        Preset::Exposed => table.strata().iter().map(|s| s.cell.exposed_total).collect(),
        Preset::Unexposed => table.strata().iter().map(|s| s.cell.unexposed_total).collect(),
        Preset::Custom => {
            return Err(GeometryError::InvalidWeights(
                "custom standard populations need explicit weights".into(),
            ))
        }
    };
    if counts.iter().sum::<u64>() == 0 {
        let group = match preset {
            Preset::Exposed => "exposed",
            Preset::Unexposed => "unexposed",
            _ => "study",
        };
        return Err(GeometryError::UndefinedWeights { preset, group });
    }
    Ok(StandardPopulation::from_counts(&counts, preset))
}

/// Convex hull of the stratum points, counterclockwise from the
/// lexicographically smallest point, with collinear boundary points dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedHull {
    vertices: Vec<RiskPoint>,
    vertex_strata: Vec<usize>,
    source_points: Vec<RiskPoint>,
}

impl StandardizedHull {
    pub fn vertices(&self) -> &[RiskPoint] {
        &self.vertices
    }

    /// Index into the source points for each vertex.
    pub fn vertex_strata(&self) -> &[usize] {
        &self.vertex_strata
    }

    pub fn source_points(&self) -> &[RiskPoint] {
        &self.source_points
    }

    /// Hull edges as pairs of vertex positions; a closed ring for polygons,
    /// one edge for a segment, none for a single point.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.vertices.len();
        match m {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        }
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn lex(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

pub fn standardized_hull(strata: &[RiskPoint]) -> Result<StandardizedHull, GeometryError> {
    if strata.is_empty() {
        return Err(GeometryError::NoPoints);
    }
    let mut order: Vec<usize> = (0..strata.len()).collect();
    // Stable sort keeps the first of several identical points.
    order.sort_by(|&a, &b| lex(strata[a].xy(), strata[b].xy()));
    order.dedup_by(|a, b| strata[*a].xy() == strata[*b].xy());

    let hull_idx = if order.len() < 3 {
        order
    } else {
        monotone_chain(strata, &order)
    };
    Ok(StandardizedHull {
        vertices: hull_idx.iter().map(|&i| strata[i].clone()).collect(),
        vertex_strata: hull_idx,
        source_points: strata.to_vec(),
    })
}

fn monotone_chain(points: &[RiskPoint], sorted: &[usize]) -> Vec<usize> {
    let mut lower: Vec<usize> = Vec::with_capacity(sorted.len());
    for &i in sorted {
        while lower.len() >= 2
            && cross(
                points[lower[lower.len() - 2]].xy(),
                points[lower[lower.len() - 1]].xy(),
                points[i].xy(),
            ) <= 0.0
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::with_capacity(sorted.len());
    for &i in sorted.iter().rev() {
        while upper.len() >= 2
            && cross(
                points[upper[upper.len() - 2]].xy(),
                points[upper[upper.len() - 1]].xy(),
                points[i].xy(),
            ) <= 0.0
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfoundingRectangle {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl ConfoundingRectangle {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }
}

pub fn confounding_rectangle(strata: &[RiskPoint]) -> Result<ConfoundingRectangle, GeometryError> {
    if strata.is_empty() {
        return Err(GeometryError::NoPoints);
    }
    let init = ConfoundingRectangle {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    Ok(strata.iter().fold(init, |r, p| ConfoundingRectangle {
        x_min: r.x_min.min(p.x),
        x_max: r.x_max.max(p.x),
        y_min: r.y_min.min(p.y),
        y_max: r.y_max.max(p.y),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Default tolerance for population-level containment queries.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - qx).hypot(p.1 - qy)
}

/// Distance from `p` to the hull boundary (for a point or segment hull, to
/// the hull itself).
pub fn boundary_distance(hull: &StandardizedHull, p: (f64, f64)) -> f64 {
    let v = &hull.vertices;
    match v.len() {
        0 => f64::INFINITY,
        1 => (p.0 - v[0].x).hypot(p.1 - v[0].y),
        _ => hull
            .edges()
            .into_iter()
            .map(|(i, j)| point_segment_distance(p, v[i].xy(), v[j].xy()))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Classifies `p` against the hull; within `tol` of the boundary counts as
/// `Boundary`.
pub fn contains(hull: &StandardizedHull, p: &RiskPoint, tol: f64) -> Containment {
    let xy = p.xy();
    if boundary_distance(hull, xy) <= tol {
        return Containment::Boundary;
    }
    let v = &hull.vertices;
    if v.len() < 3 {
        return Containment::Outside;
    }
    let inside = hull
        .edges()
        .into_iter()
        .all(|(i, j)| cross(v[i].xy(), v[j].xy(), xy) > 0.0);
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Signed distance from `p` to the hull: negative inside a polygon hull,
/// positive outside, zero on the boundary.
pub fn signed_distance(hull: &StandardizedHull, p: &RiskPoint) -> f64 {
    let d = boundary_distance(hull, p.xy());
    match contains(hull, p, 0.0) {
        Containment::Inside => -d,
        _ => d,
    }
}

/// Weights over the strata that reproduce `target`, or `None` when the
/// target is outside the standardized hull.
///
/// For more than two strata the solution is barycentric within a fan
/// triangulation from the first hull vertex, so it is deterministic but only
/// one of many valid weightings.
pub fn weights_for_point(strata: &[RiskPoint], target: &RiskPoint) -> Option<StandardPopulation> {
    let hull = standardized_hull(strata).ok()?;
    if contains(&hull, target, DEFAULT_TOL) == Containment::Outside {
        return None;
    }
    let k = strata.len();
    let v = hull.vertices();
    let ids = hull.vertex_strata();
    let p = target.xy();
    let mut weights = vec![0.0; k];
    match v.len() {
        1 => weights[ids[0]] = 1.0,
        2 => {
            let (a, b) = (v[0].xy(), v[1].xy());
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            weights[ids[0]] += 1.0 - t;
            weights[ids[1]] += t;
        }
        m => {
            let mut best: Option<(f64, usize, [f64; 3])> = None;
            for i in 1..m - 1 {
                let bary = barycentric(p, v[0].xy(), v[i].xy(), v[i + 1].xy());
                let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
                if best.is_none_or(|(w, _, _)| worst > w) {
                    best = Some((worst, i, bary));
                }
                if worst >= 0.0 {
                    break;
                }
            }
            let (_, i, bary) = best?;
            let clamped: Vec<f64> = bary.iter().map(|b| b.max(0.0)).collect();
            let sum: f64 = clamped.iter().sum();
            for (slot, w) in [ids[0], ids[i], ids[i + 1]].into_iter().zip(clamped) {
                weights[slot] += w / sum;
            }
        }
    }
    Some(StandardPopulation {
        weights,
        exact: None,
        preset: Preset::Custom,
    })
}

fn barycentric(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> [f64; 3] {
    let det = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let l1 = ((p.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (p.1 - a.1)) / det;
    let l2 = ((b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1)) / det;
    [1.0 - l1 - l2, l1, l2]
}
