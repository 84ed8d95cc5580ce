//! Measures of association as functions on the unit square, their contours,
//! effect modification, and collapsibility along the standardized hull.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{standardized_hull, GeometryError, RiskPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("{measure} needs at least {needed} strata, got {got}")]
    InsufficientStrata {
        measure: Measure,
        needed: usize,
        got: usize,
    },
    #[error("{measure} is undefined at stratum '{stratum}'")]
    Undefined { measure: Measure, stratum: String },
    #[error("{measure} is undefined everywhere on the standardized hull")]
    UndefinedOnHull { measure: Measure },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    OddsRatio,
    RiskRatio,
    RiskDifference,
    HazardRatio,
}

impl Measure {
    /// Report order.
    pub const ALL: [Measure; 4] = [
        Measure::OddsRatio,
        Measure::RiskRatio,
        Measure::RiskDifference,
        Measure::HazardRatio,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::OddsRatio => "odds_ratio",
            Measure::RiskRatio => "risk_ratio",
            Measure::RiskDifference => "risk_difference",
            Measure::HazardRatio => "hazard_ratio",
        }
    }

    pub fn abbreviation(&self) -> &'static str {
        match self {
            Measure::OddsRatio => "OR",
            Measure::RiskRatio => "RR",
            Measure::RiskDifference => "RD",
            Measure::HazardRatio => "HR",
        }
    }

    pub fn is_ratio(&self) -> bool {
        !matches!(self, Measure::RiskDifference)
    }

    /// Value at the null line.
    pub fn null_value(&self) -> f64 {
        if self.is_ratio() {
            1.0
        } else {
            0.0
        }
    }

    /// Maps a value onto the comparison scale: log for ratios, identity for
    /// the risk difference.
    pub fn to_scale(&self, v: f64) -> f64 {
        if self.is_ratio() {
            v.ln()
        } else {
            v
        }
    }

    pub fn from_scale(&self, s: f64) -> f64 {
        if self.is_ratio() {
            s.exp()
        } else {
            s
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "or" | "odds_ratio" => Ok(Measure::OddsRatio),
            "rr" | "risk_ratio" => Ok(Measure::RiskRatio),
            "rd" | "risk_difference" => Ok(Measure::RiskDifference),
            "hr" | "hazard_ratio" => Ok(Measure::HazardRatio),
            other => Err(format!("unknown measure '{other}'")),
        }
    }
}

/// `num / den` for nonnegative parts, with `None` for 0/0 and ∞/∞.
fn ratio(num: f64, den: f64) -> Option<f64> {
    match (num, den) {
        (0.0, 0.0) => None,
        (n, d) if n.is_infinite() && d.is_infinite() => None,
        (_, 0.0) => Some(f64::INFINITY),
        (n, d) => Some(n / d),
    }
}

/// Measure at `(x, y)`; `None` where the measure is undefined (0/0 forms).
/// Signed infinities are returned where a limit exists.
pub fn value_at(m: Measure, x: f64, y: f64) -> Option<f64> {
    match m {
        Measure::OddsRatio => ratio(y * (1.0 - x), x * (1.0 - y)),
        Measure::RiskRatio => ratio(y, x),
        Measure::RiskDifference => Some(y - x),
        Measure::HazardRatio => ratio(-(-y).ln_1p(), -(-x).ln_1p()),
    }
}

pub fn measure_value(m: Measure, p: &RiskPoint) -> Option<f64> {
    value_at(m, p.x, p.y)
}

/// The `y` on the contour `m = value` above `x`, if it lies in `[0, 1]`.
pub fn contour(m: Measure, value: f64, x: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&x) || !value.is_finite() {
        return None;
    }
    if m.is_ratio() && value < 0.0 {
        return None;
    }
    let y = match m {
        Measure::OddsRatio => {
            let den = 1.0 - x + value * x;
            if den == 0.0 {
                return None;
            }
            value * x / den
        }
        Measure::RiskRatio => value * x,
        Measure::RiskDifference => x + value,
        Measure::HazardRatio => -(value * (-x).ln_1p()).exp_m1(),
    };
    (0.0..=1.0).contains(&y).then_some(y)
}

/// Collapsible measures are exactly those whose contours are straight.
pub fn is_collapsible(m: Measure) -> bool {
    matches!(m, Measure::RiskRatio | Measure::RiskDifference)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectModification {
    pub measure: Measure,
    pub present: bool,
    #[serde(serialize_with = "crate::json::reals")]
    pub values: Vec<f64>,
    /// Largest pairwise difference on the comparison scale.
    #[serde(serialize_with = "crate::json::real")]
    pub spread: f64,
}

fn scale_spread(m: Measure, values: &[f64]) -> f64 {
    let scaled: Vec<f64> = values.iter().map(|&v| m.to_scale(v)).collect();
    if scaled.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

pub fn effect_modification(
    m: Measure,
    strata: &[RiskPoint],
    tol: f64,
) -> Result<EffectModification, MeasureError> {
    if strata.len() < 2 {
        return Err(MeasureError::InsufficientStrata {
            measure: m,
            needed: 2,
            got: strata.len(),
        });
    }
    let values = strata
        .iter()
        .map(|p| {
            measure_value(m, p).ok_or_else(|| MeasureError::Undefined {
                measure: m,
                stratum: p.label().to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spread = scale_spread(m, &values);
    Ok(EffectModification {
        measure: m,
        present: spread > tol,
        values,
        spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapsibilityReport {
    pub measure: Measure,
    /// Common stratum value, when every stratum agrees within 1e-9 on the
    /// comparison scale.
    #[serde(serialize_with = "crate::json::opt_real")]
    pub stratum_value: Option<f64>,
    #[serde(serialize_with = "crate::json::reals")]
    pub stratum_values: Vec<f64>,
    #[serde(serialize_with = "crate::json::real")]
    pub min_value: f64,
    #[serde(serialize_with = "crate::json::real")]
    pub max_value: f64,
    pub argmin_weights: Vec<f64>,
    pub argmax_weights: Vec<f64>,
    pub collapsible_here: bool,
    /// Some point of the hull has no defined value, so the reported extrema
    /// are an infimum/supremum over the remaining points.
    pub open_endpoints: bool,
}

const COLLAPSE_TOL: f64 = 1e-9;
const GRID: usize = 256;
const GOLDEN_TOL: f64 = 1e-10;

/// Minimum of `f` over `[0, 1]`: 256-interval grid scan followed by
/// golden-section refinement around the best grid point. `None` values are
/// skipped; the flag reports whether any were seen.
pub(crate) fn minimize_unit_interval<F>(f: F) -> Option<(f64, f64, bool)>
where
    F: Fn(f64) -> Option<f64>,
{
    let mut saw_undefined = false;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=GRID {
        let t = i as f64 / GRID as f64;
        match f(t) {
            Some(v) if !v.is_nan() => {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            _ => saw_undefined = true,
        }
    }
    let (i, grid_val) = best?;
    let mut a = i.saturating_sub(1) as f64 / GRID as f64;
    let mut b = (i + 1).min(GRID) as f64 / GRID as f64;
    let eval = |t: f64| f(t).filter(|v| !v.is_nan()).unwrap_or(f64::INFINITY);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let t = (a + b) / 2.0;
    let ft = eval(t);
    let grid_t = i as f64 / GRID as f64;
    Some(if ft < grid_val { (t, ft, saw_undefined) } else { (grid_t, grid_val, saw_undefined) })
}

struct Extremum {
    value: f64,
    weights: Vec<f64>,
}

/// `(t, value)` of the minimum and maximum, and whether either sits at an
/// open endpoint.
type SegmentExtrema = ((f64, f64), (f64, f64), bool);

fn segment_extrema(m: Measure, a: &RiskPoint, b: &RiskPoint) -> Option<SegmentExtrema> {
    let at = |t: f64| {
        let x = (1.0 - t) * a.x + t * b.x;
        let y = (1.0 - t) * a.y + t * b.y;
        value_at(m, x, y).map(|v| m.to_scale(v))
    };
    let (tmin, vmin, u1) = minimize_unit_interval(at)?;
    let (tmax, vmax, u2) = minimize_unit_interval(|t| at(t).map(|v| -v))?;
    Some(((tmin, vmin), (tmax, -vmax), u1 || u2))
}

/// Extrema of the measure over the standardized segment (two strata) or hull
/// (more strata), with the weights that reach them.
///
/// Every measure is monotone in each coordinate, so hull extrema lie on the
/// boundary and each edge is searched as a segment.
pub fn collapse_analysis(m: Measure, strata: &[RiskPoint]) -> Result<CollapsibilityReport, MeasureError> {
    let k = strata.len();
    if k < 2 {
        return Err(MeasureError::InsufficientStrata {
            measure: m,
            needed: 2,
            got: k,
        });
    }
    let stratum_values: Vec<f64> = strata
        .iter()
        .map(|p| measure_value(m, p).unwrap_or(f64::NAN))
        .collect();
    let stratum_value = (stratum_values.iter().all(|v| !v.is_nan())
        && scale_spread(m, &stratum_values) <= COLLAPSE_TOL)
        .then(|| stratum_values[0]);

    // (stratum index of edge start, stratum index of edge end)
    let edges: Vec<(usize, usize)> = if k == 2 {
        vec![(0, 1)]
    } else {
        let hull = standardized_hull(strata)?;
        let ids = hull.vertex_strata();
        match ids.len() {
            1 => vec![(ids[0], ids[0])],
            _ => hull.edges().into_iter().map(|(i, j)| (ids[i], ids[j])).collect(),
        }
    };

    let mut lo: Option<Extremum> = None;
    let mut hi: Option<Extremum> = None;
    let mut open = false;
    for (i, j) in edges {
        let Some(((tmin, vmin), (tmax, vmax), undefined)) = segment_extrema(m, &strata[i], &strata[j]) else {
            open = true;
            continue;
        };
        open |= undefined;
        let weights = |t: f64| {
            let mut w = vec![0.0; k];
            w[i] += 1.0 - t;
            w[j] += t;
            w
        };
        if lo.as_ref().is_none_or(|e| vmin < e.value) {
            lo = Some(Extremum { value: vmin, weights: weights(tmin) });
        }
        if hi.as_ref().is_none_or(|e| vmax > e.value) {
            hi = Some(Extremum { value: vmax, weights: weights(tmax) });
        }
    }
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(MeasureError::UndefinedOnHull { measure: m });
    };
    let collapsible_here = hi.value - lo.value <= COLLAPSE_TOL;
    Ok(CollapsibilityReport {
        measure: m,
        stratum_value,
        stratum_values,
        min_value: m.from_scale(lo.value),
        max_value: m.from_scale(hi.value),
        argmin_weights: lo.weights,
        argmax_weights: hi.weights,
        collapsible_here,
        open_endpoints: open,
    })
}
