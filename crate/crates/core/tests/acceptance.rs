//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails.

use std::process::Command;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use rothman::diagnostics::{analyze, AnalysisOptions, AnalysisReport};
use rothman::fixtures;
use rothman::geometry::{
    association_points, boundary_distance, contains, standard_population, standardize,
    standardize_table, standardized_hull, Containment, Preset, RiskPoint, StandardPopulation,
};
use rothman::glm::{self, chi_square_cdf, Link, ModelSpec, Terms};
use rothman::measures::{collapse_analysis, contour, value_at, Measure};
use rothman::render::figures::{self, fitted_strata};
use rothman::simulate::{population_truth, sample_table, PopulationSpec};
use rothman::tables::stratum_risks;

type Outcome = Result<(), Vec<String>>;

#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        if (got - want).abs().is_nan() || (got - want).abs() > tol {
            self.0.push(format!("{what}: got {got:.6}, want {want} ± {tol}"));
        }
    }

    fn that(&mut self, what: &str, ok: bool) {
        if !ok {
            self.0.push(what.to_string());
        }
    }

    fn done(self) -> Outcome {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self.0)
        }
    }
}

fn report() -> AnalysisReport {
    analyze(&fixtures::whickham(), &AnalysisOptions::default()).expect("bundled table analyzes")
}

fn crude_reproduction() -> Outcome {
    let r = report();
    let mut c = Checks::default();
    let expected = [
        (Measure::OddsRatio, 0.685, (0.535, 0.875)),
        (Measure::RiskRatio, 0.760, (0.633, 0.908)),
        (Measure::RiskDifference, -0.075, (-0.123, -0.027)),
        (Measure::HazardRatio, 0.724, (0.584, 0.892)),
    ];
    for (m, est, (lo, hi)) in expected {
        let Some(crude) = &r.measure(m).crude else {
            c.that(&format!("{m}: no crude estimate"), false);
            continue;
        };
        c.near(&format!("{m} crude"), crude.estimate, est, 0.001);
        c.near(&format!("{m} crude p"), crude.p_value.unwrap_or(f64::NAN), 0.0024, 0.0002);
        c.near(&format!("{m} crude lower"), crude.interval.lower, lo, 0.002);
        c.near(&format!("{m} crude upper"), crude.interval.upper, hi, 0.002);
    }
    c.done()
}

fn stratified_reproduction() -> Outcome {
    let r = report();
    let mut c = Checks::default();
    let expected = [
        (Measure::OddsRatio, (1.622, 1.018), 0.353, 1.537, (1.119, 2.125)),
        (Measure::RiskRatio, (1.509, 1.003), 0.010, 1.062, (0.952, 1.166)),
        (Measure::RiskDifference, (0.061, 0.002), 0.300, 0.052, (0.013, 0.091)),
        (Measure::HazardRatio, (1.563, 1.008), 0.085, 1.316, (1.034, 1.676)),
    ];
    for (m, (s1, s2), p, common, (lo, hi)) in expected {
        let res = r.measure(m);
        match &res.stratum_estimates {
            Some(s) if s.len() == 2 => {
                c.near(&format!("{m} 18-64"), s[0].estimate, s1, 0.001);
                c.near(&format!("{m} 65+"), s[1].estimate, s2, 0.001);
            }
            _ => c.that(&format!("{m}: missing stratum estimates"), false),
        }
        c.near(&format!("{m} interaction p"), res.interaction_p_value.unwrap_or(f64::NAN), p, 0.003);
        match &res.common {
            Some(e) => {
                c.near(&format!("{m} common"), e.estimate, common, 0.001);
                c.near(&format!("{m} common lower"), e.interval.lower, lo, 0.002);
                c.near(&format!("{m} common upper"), e.interval.upper, hi, 0.002);
            }
            None => c.that(&format!("{m}: no common estimate {:?}", res.errors), false),
        }
    }
    c.done()
}

fn standardization_arithmetic() -> Outcome {
    let t = fixtures::whickham();
    let (crude, _) = association_points(&t).unwrap();
    let point = |p: Preset| standardize_table(&t, &standard_population(&t, p).unwrap()).unwrap();
    let mut c = Checks::default();
    let s = point(Preset::StudySample);
    c.near("study sample x", s.x, 0.256, 0.0005);
    c.near("study sample y", s.y, 0.306, 0.0005);
    let e = point(Preset::Exposed);
    c.near("exposed x", e.x, 0.182, 0.0005);
    c.near("exposed y", e.y, 0.239, 0.0005);
    c.that("exposed-standard y equals crude y exactly", e.y.to_bits() == crude.y.to_bits());
    let u = point(Preset::Unexposed);
    c.that("unexposed-standard x equals crude x exactly", u.x.to_bits() == crude.x.to_bits());
    c.done()
}

fn collapsibility_reconstruction() -> Outcome {
    let t = fixtures::whickham();
    let mut c = Checks::default();
    let (_, logit) = fitted_strata(&t, Measure::OddsRatio).unwrap();
    let or = collapse_analysis(Measure::OddsRatio, &logit).unwrap();
    c.near("minimum OR", or.min_value, 1.229, 0.002);
    c.near("first-stratum weight at minimum", or.argmin_weights[0], 0.484, 0.005);
    let (fit, identity) = fitted_strata(&t, Measure::RiskDifference).unwrap();
    let rd = collapse_analysis(Measure::RiskDifference, &identity).unwrap();
    let common = fit.exposure_estimate();
    c.near("RD minimum", rd.min_value, common, 1e-6);
    c.near("RD maximum", rd.max_value, common, 1e-6);
    c.done()
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Random populations; `mode` 0 equalizes exposure across strata and 1
/// gives every stratum the same outcome distribution, so unconfounded
/// populations are well represented.
fn population(k: impl Strategy<Value = usize>) -> impl Strategy<Value = PopulationSpec> {
    k.prop_flat_map(|k| {
        (
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(0.05f64..0.95, k),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), k),
            0u8..4,
        )
    })
    .prop_map(|(w, mut e, po, mode)| {
        let mut po: Vec<[f64; 4]> = po
            .iter()
            .map(|p| {
                let n = normalized(p);
                [n[0], n[1], n[2], n[3]]
            })
            .collect();
        match mode {
            0 => {
                let e0 = e[0];
                e.iter_mut().for_each(|v| *v = e0);
            }
            1 => {
                let p0 = po[0];
                po.iter_mut().for_each(|p| *p = p0);
            }
            _ => {}
        }
        PopulationSpec::new(normalized(&w), e, po).expect("generated spec is valid")
    })
}

fn equivalence_fuzz() -> Outcome {
    let mut c = Checks::default();
    let segment = runner(1000).run(&population(Just(2usize)), |spec| {
        let truth = population_truth(&spec).unwrap();
        let pts = &truth.association_points;
        let shared = pts[0].xy() != pts[1].xy() && (pts[0].x == pts[1].x || pts[0].y == pts[1].y);
        if shared {
            return Ok(());
        }
        let hull = standardized_hull(pts).unwrap();
        let d = boundary_distance(&hull, truth.crude_point.xy());
        prop_assert_eq!(d > 1e-12, truth.confounded, "distance {} for {:?}", d, spec);
        Ok(())
    });
    if let Err(e) = segment {
        c.that(&format!("k = 2: {e}"), false);
    }
    let hull = runner(1000).run(&population(3usize..=6), |spec| {
        let truth = population_truth(&spec).unwrap();
        let hull = standardized_hull(&truth.association_points).unwrap();
        if contains(&hull, &truth.crude_point, 1e-12) == Containment::Outside {
            prop_assert!(truth.confounded, "crude outside the hull of an unconfounded {:?}", spec);
        }
        Ok(())
    });
    if let Err(e) = hull {
        c.that(&format!("k = 3..6: {e}"), false);
    }
    c.done()
}

fn collapsibility_law() -> Outcome {
    let mut c = Checks::default();
    let straight = (
        prop::sample::select(vec![Measure::RiskRatio, Measure::RiskDifference]),
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1.0,
    )
        .prop_map(|(m, a, b, v)| match m {
            Measure::RiskRatio => (m, 0.01 + 0.29 * a, 0.01 + 0.29 * b, 0.3 + 2.7 * v),
            _ => (m, 0.35 + 0.3 * a, 0.35 + 0.3 * b, -0.3 + 0.6 * v),
        });
    let r = runner(500).run(&straight, |(m, x1, x2, v)| {
        let p1 = (x1, contour(m, v, x1).unwrap());
        let p2 = (x2, contour(m, v, x2).unwrap());
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let (x, y) = ((1.0 - t) * p1.0 + t * p2.0, (1.0 - t) * p1.1 + t * p2.1);
            let got = value_at(m, x, y).unwrap();
            prop_assert!((got - v).abs() <= 1e-12, "{m} {got} vs {v}");
        }
        Ok(())
    });
    if let Err(e) = r {
        c.that(&format!("straight contours: {e}"), false);
    }

    let curved = (
        prop::sample::select(vec![Measure::OddsRatio, Measure::HazardRatio]),
        0.02f64..0.98,
        0.02f64..0.98,
        prop_oneof![0.2f64..0.8, 1.25f64..5.0],
    );
    let r = runner(500).run(&curved, |(m, x1, x2, v)| {
        if (x1 - x2).abs() < 0.05 {
            return Err(TestCaseError::reject("endpoints too close"));
        }
        let p1 = (x1, contour(m, v, x1).unwrap());
        let p2 = (x2, contour(m, v, x2).unwrap());
        for i in 1..=99 {
            let t = i as f64 / 100.0;
            let (x, y) = ((1.0 - t) * p1.0 + t * p2.0, (1.0 - t) * p1.1 + t * p2.1);
            let got = value_at(m, x, y).unwrap();
            let (lo, hi) = if v > 1.0 { (1.0, v) } else { (v, 1.0) };
            prop_assert!(lo < got && got < hi, "{m} v {v} t {t}: {got}");
        }
        Ok(())
    });
    if let Err(e) = r {
        c.that(&format!("curved contours: {e}"), false);
    }
    c.done()
}

/// ∫₀^√x 2u·f(u²) du with f the chi-square density; smooth for every df.
fn chi_square_oracle(x: f64, df: u32) -> f64 {
    let k = df as f64;
    // Γ(k/2) by recurrence from Γ(1/2) = √π or Γ(1) = 1
    let (mut a, mut gamma) = if df % 2 == 1 { (0.5, std::f64::consts::PI.sqrt()) } else { (1.0, 1.0) };
    while a < k / 2.0 {
        gamma *= a;
        a += 1.0;
    }
    let norm = 2f64.powf(k / 2.0) * gamma;
    let g = |u: f64| 2.0 * u.powf(k - 1.0) * (-u * u / 2.0).exp() / norm;
    adaptive_simpson(&g, 0.0, x.sqrt(), 1e-14, 50)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        eps: f64,
        whole: f64,
        m: f64,
        fm: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, eps / 2.0, left, lm, flm, depth - 1)
            + recurse(f, m, fm, b, fb, eps / 2.0, right, rm, frm, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, eps, whole, m, fm, depth)
}

fn numerical_hygiene() -> Outcome {
    let mut c = Checks::default();

    // saturated fits reproduce the observed cells
    let interior = PopulationSpec::new(
        vec![0.2, 0.3, 0.5],
        vec![0.3, 0.5, 0.7],
        vec![[0.7, 0.1, 0.1, 0.1], [0.5, 0.2, 0.1, 0.2], [0.3, 0.2, 0.2, 0.3]],
    )
    .unwrap();
    let mut tables = vec![fixtures::whickham()];
    tables.extend((1..=3).map(|seed| sample_table(&interior, 5000, seed).unwrap()));
    for table in &tables {
        for link in Link::ALL {
            let fit = match glm::fit(&ModelSpec::new(link, Terms::SaturatedWithInteraction, table.clone())) {
                Ok(f) => f,
                Err(e) => {
                    c.that(&format!("{link:?} saturated fit failed: {e}"), false);
                    continue;
                }
            };
            for (p, s) in fit.fitted_points().iter().zip(table.strata()) {
                let (x, y) = stratum_risks(&s.cell).unwrap();
                c.near(&format!("{link:?} {} unexposed", s.label), p.x, x, 1e-10);
                c.near(&format!("{link:?} {} exposed", s.label), p.y, y, 1e-10);
            }
        }
    }

    // the score vanishes at the optimum, confirmed by finite differences
    for link in Link::ALL {
        for terms in [Terms::ExposureOnly, Terms::ExposurePlusStratum, Terms::SaturatedWithInteraction] {
            let spec = ModelSpec::new(link, terms, fixtures::whickham());
            let fit = glm::fit(&spec).unwrap();
            let beta = fit.coefficients.clone();
            let score = spec.score_at(&beta).unwrap();
            let ll = |b: &[f64]| spec.log_likelihood_at(b).unwrap().expect("inside the domain");
            for (j, s) in score.iter().enumerate() {
                let h = 1e-4;
                let at = |d: f64| {
                    let mut b = beta.clone();
                    b[j] += d;
                    ll(&b)
                };
                // five-point stencil
                let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
                let what = format!("{link:?} {terms:?} coefficient {j}");
                c.that(&format!("{what}: score {s:e}"), s.abs() < 1e-6);
                c.that(&format!("{what}: finite-difference gradient {fd:e}"), fd.abs() < 1e-6);
                c.that(&format!("{what}: score {s:e} vs difference {fd:e}"), (s - fd).abs() < 1e-6);
            }
        }
    }

    // chi-square distribution against numerical integration
    let mut worst: f64 = 0.0;
    for df in [1u32, 2, 3, 5, 10] {
        for x in [0.05, 0.3, 1.0, 2.0, 3.841458820694124, 5.0, 8.0, 12.0, 20.0, 35.0] {
            let err = (chi_square_cdf(x, df) - chi_square_oracle(x, df)).abs();
            worst = worst.max(err);
            c.that(&format!("chi-square cdf df {df} x {x}: error {err:e}"), err < 1e-8);
        }
    }
    c.that("oracle grid covered", worst.is_finite());
    c.done()
}

struct Panel {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Panel {
    fn invert(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.x0) / (self.x1 - self.x0), (py - self.y0) / (self.y1 - self.y0))
    }

    fn pixels_per_unit(&self) -> f64 {
        (self.x1 - self.x0).abs().min((self.y1 - self.y0).abs())
    }
}

fn attr(node: roxmltree::Node, name: &str) -> f64 {
    node.attribute(name)
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("missing numeric attribute {name}"))
}

fn panel_of(node: roxmltree::Node) -> Panel {
    let g = node
        .ancestors()
        .find(|n| n.attribute("class") == Some("panel"))
        .expect("marks live inside panels");
    Panel {
        x0: attr(g, "data-x0"),
        y0: attr(g, "data-y0"),
        x1: attr(g, "data-x1"),
        y1: attr(g, "data-y1"),
    }
}

/// Expected (class, label, point) triples for the marks of figure `n`.
fn expected_points(n: u8) -> Vec<(&'static str, String, (f64, f64))> {
    let two = fixtures::whickham();
    let tag = |p: &RiskPoint, class: &'static str| (class, p.label().to_string(), p.xy());
    let observed = |t| {
        let (crude, strata) = association_points(t).unwrap();
        let mut v = vec![tag(&crude, "crude")];
        v.extend(strata.iter().map(|p| tag(p, "stratum")));
        v
    };
    match n {
        1 => {
            let mut v = observed(&two);
            for preset in Preset::TABLE_PRESETS {
                let p = standardize_table(&two, &standard_population(&two, preset).unwrap()).unwrap();
                v.push(tag(&p, "standardized"));
            }
            v
        }
        2 => observed(&two),
        3 => {
            let (_, strata) = association_points(&two).unwrap();
            strata.iter().map(|p| tag(p, "stratum")).collect()
        }
        4 => observed(&fixtures::whickham_six()),
        5 => Vec::new(),
        6 => {
            let (_, pts) = fitted_strata(&two, Measure::RiskDifference).unwrap();
            pts.iter().map(|p| tag(p, "stratum")).collect()
        }
        7 => {
            let (_, pts) = fitted_strata(&two, Measure::OddsRatio).unwrap();
            let mut v: Vec<_> = pts.iter().map(|p| tag(p, "stratum")).collect();
            let r = collapse_analysis(Measure::OddsRatio, &pts).unwrap();
            let min = standardize(&pts, &StandardPopulation::custom(r.argmin_weights).unwrap()).unwrap();
            v.push(("standardized", "minimum".to_string(), min.xy()));
            v
        }
        _ => unreachable!(),
    }
}

/// x at which the (increasing) contour reaches height `y`, by bisection.
fn contour_inverse(m: Measure, v: f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match contour(m, v, mid) {
            Some(c) if c < y => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

fn measure_from_abbreviation(a: &str) -> Measure {
    Measure::ALL.into_iter().find(|m| m.abbreviation() == a).expect("known measure")
}

fn figure_suite() -> Outcome {
    let mut c = Checks::default();
    let dir = tempfile::tempdir().unwrap();
    for n in 1..=7u8 {
        let status = Command::new(env!("CARGO_BIN_EXE_rothman"))
            .args(["plot", "--figure", &n.to_string(), "-o"])
            .arg(dir.path())
            .output()
            .unwrap();
        if !status.status.success() {
            c.that(&format!("figure {n}: plot exited {:?}", status.status.code()), false);
            continue;
        }
        let path = dir.path().join(figures::file_name(n).unwrap());
        let text = std::fs::read_to_string(&path).unwrap_or_default();
        let doc = match roxmltree::Document::parse(&text) {
            Ok(d) => d,
            Err(e) => {
                c.that(&format!("figure {n}: not well-formed: {e}"), false);
                continue;
            }
        };
        let root = doc.root_element();
        c.that(&format!("figure {n}: root is svg"), root.tag_name().name() == "svg");
        c.that(
            &format!("figure {n}: null line drawn in every panel"),
            doc.descendants().filter(|d| d.attribute("class") == Some("panel")).all(|p| {
                p.children().any(|ch| ch.attribute("class") == Some("null-line"))
            }),
        );

        let circles: Vec<_> = doc.descendants().filter(|d| d.tag_name().name() == "circle").collect();
        let expected = expected_points(n);
        let panels = doc.descendants().filter(|d| d.attribute("class") == Some("panel")).count();
        c.that(
            &format!("figure {n}: {} circles for {} expected marks", circles.len(), expected.len()),
            circles.len() == expected.len() * if n == 3 { 4 } else { 1 },
        );
        for circle in &circles {
            let panel = panel_of(*circle);
            let (x, y) = panel.invert(attr(*circle, "cx"), attr(*circle, "cy"));
            let class = circle.attribute("class").unwrap_or("").trim_start_matches("point ").to_string();
            let label = circle.attribute("data-label").unwrap_or("");
            match expected.iter().find(|(k, l, _)| *k == class && l == label) {
                Some((_, _, (ex, ey))) => {
                    let err = (x - ex).hypot(y - ey) * panel.pixels_per_unit();
                    c.that(&format!("figure {n} {class} {label}: off by {err:.3} px"), err <= 0.5);
                }
                None => c.that(&format!("figure {n}: unexpected {class} '{label}'"), false),
            }
        }

        // contour vertices lie on their contours
        for line in doc.descendants().filter(|d| d.attribute("class") == Some("contour")) {
            let panel = panel_of(line);
            let m = measure_from_abbreviation(line.attribute("data-measure").unwrap_or(""));
            let v = attr(line, "data-value");
            let pts: Vec<(f64, f64)> = line
                .attribute("points")
                .unwrap_or("")
                .split_whitespace()
                .map(|pair| {
                    let (a, b) = pair.split_once(',').unwrap();
                    panel.invert(a.parse().unwrap(), b.parse().unwrap())
                })
                .collect();
            c.that(&format!("figure {n}: {m} = {v} contour has {} vertices", pts.len()), pts.len() >= 2);
            for (x, y) in pts {
                // vertical residual, or horizontal where the curve leaves the square
                let err = match contour(m, v, x.clamp(0.0, 1.0)) {
                    Some(on) if (0.0..=1.0).contains(&on) => (y - on).abs(),
                    _ => (x - contour_inverse(m, v, y)).abs(),
                } * panel.pixels_per_unit();
                if err.is_nan() || err > 0.5 {
                    c.that(&format!("figure {n}: {m} = {v} vertex ({x:.4}, {y:.4}) off by {err:.3} px"), false);
                    break;
                }
            }
        }
        if n == 5 {
            c.that("figure 5: four panels", panels == 4);
            let count = doc.descendants().filter(|d| d.attribute("class") == Some("contour-label")).count();
            c.that(&format!("figure 5: {count} labelled contours"), count == 4 * 6);
        }
    }
    c.done()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("crude estimates, intervals and p-value", crude_reproduction),
        ("stratum, common and interaction estimates", stratified_reproduction),
        ("standardization arithmetic", standardization_arithmetic),
        ("collapsibility along fitted segments", collapsibility_reconstruction),
        ("crude point versus standardized hull (fuzz)", equivalence_fuzz),
        ("collapsibility law (property)", collapsibility_law),
        ("numerical hygiene", numerical_hygiene),
        ("figure suite", figure_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("criterion {} ({name}): PASS", i + 1),
            Err(problems) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL", i + 1);
                for p in problems.iter().take(20) {
                    println!("    {p}");
                }
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
