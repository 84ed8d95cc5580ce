//! Potential-outcomes populations: exact truth and seeded samples.
//!
//! Within each stratum the exposure is independent of the potential
//! outcomes (D⁰, D¹), so the stratum association points equal the causal
//! points and any gap between crude and standardized comes from the
//! stratum variable alone.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rational_to_f64, PointTag, RiskPoint};
use crate::tables::{CohortCell, Labels, Stratum, StratifiedCohortTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("invalid population: {0}")]
    InvalidSpec(String),
    #[error("stratum {stratum} has no {group} individuals in the population")]
    ZeroMargin { stratum: usize, group: &'static str },
    #[error("sample size must be at least 1")]
    EmptySample,
}

const SUM_TOL: f64 = 1e-12;

/// `po_probs[c] = [p00, p01, p10, p11]` with `pab = Pr(D⁰ = a, D¹ = b | C = c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub stratum_probs: Vec<f64>,
    pub exposure_probs: Vec<f64>,
    pub po_probs: Vec<[f64; 4]>,
}

fn check_distribution(name: &str, probs: &[f64]) -> Result<(), SimulateError> {
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SimulateError::InvalidSpec(format!("{name} has a value {p} outside [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(SimulateError::InvalidSpec(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

impl PopulationSpec {
    pub fn new(
        stratum_probs: Vec<f64>,
        exposure_probs: Vec<f64>,
        po_probs: Vec<[f64; 4]>,
    ) -> Result<Self, SimulateError> {
        let spec = PopulationSpec {
            stratum_probs,
            exposure_probs,
            po_probs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let k = self.stratum_probs.len();
        if k == 0 {
            return Err(SimulateError::InvalidSpec("no strata".into()));
        }
        if self.exposure_probs.len() != k || self.po_probs.len() != k {
            return Err(SimulateError::InvalidSpec(format!(
                "{k} strata but {} exposure probabilities and {} outcome distributions",
                self.exposure_probs.len(),
                self.po_probs.len()
            )));
        }
        check_distribution("stratum_probs", &self.stratum_probs)?;
        if let Some(e) = self.exposure_probs.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(SimulateError::InvalidSpec(format!("exposure probability {e} outside [0, 1]")));
        }
        for (c, po) in self.po_probs.iter().enumerate() {
            check_distribution(&format!("po_probs[{c}]"), po)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.stratum_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stratum_probs.is_empty()
    }

    /// Causal risk pair (Pr(D⁰ = 1 | c), Pr(D¹ = 1 | c)).
    fn causal(&self, c: usize) -> (f64, f64) {
        let [_, p01, p10, p11] = self.po_probs[c];
        (p10 + p11, p01 + p11)
    }

    /// Exposure depends on the stratum and the stratum on the outcome.
    pub fn is_confounded(&self) -> bool {
        let e = &self.exposure_probs;
        let exposure_varies = e.iter().any(|&v| v != e[0]);
        let first = self.causal(0);
        let outcome_varies = (1..self.len()).any(|c| self.causal(c) != first);
        exposure_varies && outcome_varies
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationTruth {
    pub causal_points: Vec<RiskPoint>,
    pub marginal_causal_point: RiskPoint,
    pub association_points: Vec<RiskPoint>,
    pub crude_point: RiskPoint,
    pub confounded: bool,
}

fn stratum_label(c: usize) -> String {
    format!("c{}", c + 1)
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("validated probabilities are finite")
}

/// Exact expectations for the population; every sum is carried out in rational
/// arithmetic and rounded once.
pub fn population_truth(spec: &PopulationSpec) -> Result<PopulationTruth, SimulateError> {
    spec.validate()?;
    let k = spec.len();
    let pi: Vec<BigRational> = spec.stratum_probs.iter().map(|&p| rational(p)).collect();
    let e: Vec<BigRational> = spec.exposure_probs.iter().map(|&p| rational(p)).collect();
    let risks: Vec<(BigRational, BigRational)> = spec
        .po_probs
        .iter()
        .map(|&[_, p01, p10, p11]| {
            let (p01, p10, p11) = (rational(p01), rational(p10), rational(p11));
            (&p10 + &p11, &p01 + &p11)
        })
        .collect();

    let one = BigRational::one();
    let mut marg = (BigRational::zero(), BigRational::zero());
    let mut mass = (BigRational::zero(), BigRational::zero());
    let mut crude = (BigRational::zero(), BigRational::zero());
    for c in 0..k {
        let unexposed = &pi[c] * (&one - &e[c]);
        let exposed = &pi[c] * &e[c];
        if unexposed.is_zero() {
            return Err(SimulateError::ZeroMargin { stratum: c, group: "unexposed" });
        }
        if exposed.is_zero() {
            return Err(SimulateError::ZeroMargin { stratum: c, group: "exposed" });
        }
        marg.0 += &pi[c] * &risks[c].0;
        marg.1 += &pi[c] * &risks[c].1;
        crude.0 += &unexposed * &risks[c].0;
        crude.1 += &exposed * &risks[c].1;
        mass.0 += unexposed;
        mass.1 += exposed;
    }
    let point = |x: &BigRational, y: &BigRational, tag: PointTag| RiskPoint {
        x: rational_to_f64(x),
        y: rational_to_f64(y),
        tag,
    };
    let causal_points: Vec<RiskPoint> = risks
        .iter()
        .enumerate()
        .map(|(c, (x, y))| point(x, y, PointTag::Causal(stratum_label(c))))
        .collect();
    let association_points = risks
        .iter()
        .enumerate()
        .map(|(c, (x, y))| point(x, y, PointTag::Stratum(stratum_label(c))))
        .collect();
    Ok(PopulationTruth {
        causal_points,
        marginal_causal_point: point(&marg.0, &marg.1, PointTag::Causal("marginal".into())),
        association_points,
        crude_point: point(&(crude.0 / mass.0), &(crude.1 / mass.1), PointTag::Crude),
        confounded: spec.is_confounded(),
    })
}

/// Individuals drawn per generator stream. Block `b` uses stream `b` of the
/// ChaCha8 generator keyed by the seed, so a sample of size n is a prefix of
/// any larger sample with the same seed.
pub const BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Individual {
    stratum: usize,
    exposed: bool,
    d0: bool,
    d1: bool,
    outcome: bool,
}

fn categorical(u: f64, probs: &[f64]) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding in the cumulative sum: the last category with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn draw(spec: &PopulationSpec, rng: &mut ChaCha8Rng) -> Individual {
    let stratum = categorical(rng.random::<f64>(), &spec.stratum_probs);
    let exposed = rng.random::<f64>() < spec.exposure_probs[stratum];
    let po = categorical(rng.random::<f64>(), &spec.po_probs[stratum]);
    let (d0, d1) = (po >= 2, po % 2 == 1);
    Individual {
        stratum,
        exposed,
        d0,
        d1,
        outcome: if exposed { d1 } else { d0 },
    }
}

/// n independent individuals, tabulated by stratum `c1..ck`.
pub fn sample_table(spec: &PopulationSpec, n: u64, seed: u64) -> Result<StratifiedCohortTable, SimulateError> {
    spec.validate()?;
    if n == 0 {
        return Err(SimulateError::EmptySample);
    }
    let k = spec.len();
    let mut counts = vec![[0u64; 4]; k];
    let mut remaining = n;
    let mut block = 0;
    while remaining > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        for _ in 0..remaining.min(BLOCK) {
            let ind = draw(spec, &mut rng);
            // consistency: the observed outcome is the potential outcome
            // under the exposure actually received
            assert_eq!(ind.outcome, if ind.exposed { ind.d1 } else { ind.d0 });
            let c = &mut counts[ind.stratum];
            if ind.exposed {
                c[0] += ind.outcome as u64;
                c[1] += 1;
            } else {
                c[2] += ind.outcome as u64;
                c[3] += 1;
            }
        }
        remaining -= remaining.min(BLOCK);
        block += 1;
    }
    let strata = counts
        .iter()
        .enumerate()
        .map(|(c, &[ec, et, uc, ut])| Stratum {
            label: stratum_label(c),
            cell: CohortCell::new(ec, et, uc, ut).expect("counts are consistent"),
        })
        .collect();
    Ok(StratifiedCohortTable::new(strata, Labels::default()).expect("labels are unique"))
}
