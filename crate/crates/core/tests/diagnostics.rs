use proptest::prelude::*;

use rothman::diagnostics::{analyze, confounding, AnalysisOptions, ConfoundingFlag};
use rothman::geometry::{association_points, boundary_distance, standardized_hull, Containment, DEFAULT_TOL};
use rothman::measures::Measure;
use rothman::simulate::{sample_table, PopulationSpec};
use rothman::tables::{CohortCell, Labels, Stratum, StratifiedCohortTable};

/// (exposed cases, exposed total, unexposed cases, unexposed total) per stratum.
fn table(cells: &[(u64, u64, u64, u64)]) -> StratifiedCohortTable {
    let strata = cells
        .iter()
        .enumerate()
        .map(|(i, &(a, n1, b, n0))| Stratum {
            label: format!("s{}", i + 1),
            cell: CohortCell::new(a, n1, b, n0).unwrap(),
        })
        .collect();
    StratifiedCohortTable::new(strata, Labels::default()).unwrap()
}

fn flags(t: &StratifiedCohortTable) -> (bool, bool) {
    let r = analyze(t, &AnalysisOptions::default()).unwrap();
    let off = r.confounding.flag == ConfoundingFlag::OffSegment;
    let modified = r.measure(Measure::RiskDifference).effect_modification.as_ref().unwrap().present;
    (off, modified)
}

#[test]
fn confounding_and_modification_are_independent() {
    // balanced exposure keeps the crude point at the segment's midpoint;
    // the second stratum's exposed risk switches RD modification on
    assert_eq!(flags(&table(&[(20, 100, 10, 100), (60, 100, 50, 100)])), (false, false));
    assert_eq!(flags(&table(&[(30, 100, 10, 100), (60, 100, 50, 100)])), (false, true));
    assert_eq!(flags(&table(&[(20, 100, 30, 300), (180, 300, 50, 100)])), (true, false));
    assert_eq!(flags(&table(&[(30, 100, 30, 300), (180, 300, 50, 100)])), (true, true));
}

fn unconfounded_three() -> PopulationSpec {
    PopulationSpec::new(
        vec![0.3, 0.3, 0.4],
        vec![0.4, 0.4, 0.4],
        vec![[0.8, 0.05, 0.05, 0.1], [0.4, 0.1, 0.3, 0.2], [0.3, 0.4, 0.1, 0.2]],
    )
    .unwrap()
}

#[test]
fn crude_inside_a_triangle_is_indeterminate() {
    let t = sample_table(&unconfounded_three(), 1_000_000, 11).unwrap();
    let (crude, strata) = association_points(&t).unwrap();
    let c = confounding(&strata, &crude, DEFAULT_TOL).unwrap();
    assert_eq!(c.containment, Containment::Inside);
    assert_eq!(c.flag, ConfoundingFlag::Indeterminate);
    assert!(c.signed_distance < 0.0);
}

#[test]
fn large_unconfounded_sample_stays_near_the_segment() {
    let spec = PopulationSpec::new(
        vec![0.6, 0.4],
        vec![0.3, 0.3],
        vec![[0.7, 0.1, 0.1, 0.1], [0.2, 0.3, 0.1, 0.4]],
    )
    .unwrap();
    assert!(!spec.is_confounded());
    let t = sample_table(&spec, 1_000_000, 3).unwrap();
    let (crude, strata) = association_points(&t).unwrap();
    let d = boundary_distance(&standardized_hull(&strata).unwrap(), crude.xy());
    assert!(d < 0.01, "{d}");
}

#[test]
fn large_confounded_sample_lies_outside() {
    let spec = PopulationSpec::new(
        vec![0.6, 0.4],
        vec![0.2, 0.8],
        vec![[0.7, 0.1, 0.1, 0.1], [0.2, 0.3, 0.1, 0.4]],
    )
    .unwrap();
    assert!(spec.is_confounded());
    let t = sample_table(&spec, 1_000_000, 5).unwrap();
    let (crude, strata) = association_points(&t).unwrap();
    let c = confounding(&strata, &crude, DEFAULT_TOL).unwrap();
    assert_eq!(c.containment, Containment::Outside);
    assert_eq!(c.flag, ConfoundingFlag::OffSegment);
}

fn random_table() -> impl Strategy<Value = StratifiedCohortTable> {
    prop::collection::vec((1u64..400, 1u64..400, 0.0f64..=1.0, 0.0f64..=1.0), 2..6).prop_map(|cells| {
        let cells: Vec<_> = cells
            .into_iter()
            .map(|(n1, n0, p1, p0)| ((p1 * n1 as f64) as u64, n1, (p0 * n0 as f64) as u64, n0))
            .collect();
        table(&cells)
    })
}

proptest! {
    #[test]
    fn flag_follows_containment(t in random_table()) {
        let (crude, strata) = association_points(&t).unwrap();
        let c = confounding(&strata, &crude, DEFAULT_TOL).unwrap();
        prop_assert_eq!(c.flag == ConfoundingFlag::OffSegment, c.containment == Containment::Outside);
        if c.containment == Containment::Outside {
            prop_assert!(c.signed_distance > 0.0);
        }
        if c.flag == ConfoundingFlag::Indeterminate {
            prop_assert!(strata.len() > 2);
        }
    }
}
