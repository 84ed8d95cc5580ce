//! Built-in Whickham smoking and 20-year mortality tables.

use crate::tables::{CohortCell, Labels, Stratum, StratifiedCohortTable};

fn labels() -> Labels {
    Labels {
        exposure: "smoking".into(),
        outcome: "death within 20 years".into(),
        covariate: "age".into(),
    }
}

fn table(rows: &[(&str, u64, u64, u64, u64)]) -> StratifiedCohortTable {
    let strata = rows
        .iter()
        .map(|&(label, ec, et, uc, ut)| Stratum {
            label: label.to_string(),
            cell: CohortCell::new(ec, et, uc, ut).expect("fixture counts are valid"),
        })
        .collect();
    StratifiedCohortTable::new(strata, labels()).expect("fixture is valid")
}

/// Two age strata, 18-64 and 65+.
pub fn whickham() -> StratifiedCohortTable {
    table(&[("18-64", 97, 533, 65, 539), ("65+", 42, 49, 165, 193)])
}

/// The crude (unstratified) table.
pub fn whickham_crude() -> StratifiedCohortTable {
    table(&[("all", 139, 582, 230, 732)])
}

/// Six age groups whose counts add up to the two-stratum table.
///
/// Used to draw a standardized hull with an interior stratum (45-54) and a
/// stratum at the top right corner of the confounding rectangle (75+).
pub fn whickham_six() -> StratifiedCohortTable {
    table(&[
        ("18-34", 5, 179, 6, 219),
        ("35-44", 14, 109, 7, 121),
        ("45-54", 27, 130, 12, 78),
        ("55-64", 51, 115, 40, 121),
        ("65-74", 29, 36, 101, 129),
        ("75+", 13, 13, 64, 64),
    ])
}

/// Looks up a built-in table by name.
pub fn builtin(name: &str) -> Option<StratifiedCohortTable> {
    match name {
        "whickham" => Some(whickham()),
        "whickham_crude" => Some(whickham_crude()),
        "whickham6" | "whickham_six" => Some(whickham_six()),
        _ => None,
    }
}
