//! Linguistic categories over the THD axis (percent) and threshold tests.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum MembershipFunction {
    Gaussian {
        center: f64,
        sigma: f64,
    },
    /// Negative slope gives a descending set.
    Sigmoid {
        midpoint: f64,
        slope: f64,
    },
}

impl MembershipFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MembershipFunction::Gaussian { center, sigma } => {
                if !center.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid(format!(
                        "gaussian needs finite center and sigma > 0, got ({center}, {sigma})"
                    )));
                }
            }
            MembershipFunction::Sigmoid { midpoint, slope } => {
                if !midpoint.is_finite() || !slope.is_finite() || slope == 0.0 {
                    return Err(Error::invalid(format!(
                        "sigmoid needs finite midpoint and nonzero slope, got ({midpoint}, {slope})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Degree of membership of `x`, in [0, 1].
    pub fn membership(&self, x: f64) -> f64 {
        let m = match *self {
            MembershipFunction::Gaussian { center, sigma } => {
                let z = (x - center) / sigma;
                (-0.5 * z * z).exp()
            }
            MembershipFunction::Sigmoid { midpoint, slope } => {
                1.0 / (1.0 + (-slope * (x - midpoint)).exp())
            }
        };
        if m.is_nan() {
            0.0
        } else {
            m.clamp(0.0, 1.0)
        }
    }
}

pub fn membership(f: &MembershipFunction, x: f64) -> f64 {
    f.membership(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub label: String,
    #[serde(flatten)]
    pub function: MembershipFunction,
}

/// Ordered family of labeled sets. Order breaks classification ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FuzzySet>", into = "Vec<FuzzySet>")]
pub struct FuzzyPartition {
    sets: Vec<FuzzySet>,
}

impl TryFrom<Vec<FuzzySet>> for FuzzyPartition {
    type Error = Error;

    fn try_from(sets: Vec<FuzzySet>) -> Result<Self> {
        Self::new(sets)
    }
}

impl From<FuzzyPartition> for Vec<FuzzySet> {
    fn from(p: FuzzyPartition) -> Self {
        p.sets
    }
}

impl FuzzyPartition {
    /// Builds a partition from non-empty, uniquely labeled, valid sets.
    pub fn new(sets: Vec<FuzzySet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::invalid("a fuzzy partition needs at least one set"));
        }
        for (i, s) in sets.iter().enumerate() {
            s.function
                .validate()
                .map_err(|e| e.context(format!("fuzzy set '{}'", s.label)))?;
            if sets[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::invalid(format!(
                    "duplicate fuzzy label '{}'",
                    s.label
                )));
            }
        }
        Ok(Self { sets })
    }

    pub fn sets(&self) -> &[FuzzySet] {
        &self.sets
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().map(|s| s.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.sets.iter().position(|s| s.label == label)
    }

    /// Checks that some set reaches at least `min_membership` everywhere in
    /// `[lo, hi]`, probing at `step` spacing. Returns the first gap.
    pub fn check_coverage(&self, lo: f64, hi: f64, step: f64, min_membership: f64) -> Result<()> {
        let n = ((hi - lo) / step).round() as usize;
        for i in 0..=n {
            let x = lo + step * i as f64;
            let best = self
                .sets
                .iter()
                .map(|s| s.function.membership(x))
                .fold(0.0, f64::max);
            if best < min_membership {
                return Err(Error::invalid(format!(
                    "fuzzy partition leaves a gap at {x} (max membership {best:.3})"
                )));
            }
        }
        Ok(())
    }

    /// Partition validity as a discrimination scale: two or more sets and
    /// max membership ≥ 0.05 over `[lo, hi]` percent.
    pub fn validate_scale(&self, lo: f64, hi: f64) -> Result<()> {
        if self.sets.len() < 2 {
            return Err(Error::invalid("a THD scale needs at least two fuzzy sets"));
        }
        self.check_coverage(lo, hi, 0.1, 0.05)
    }

    pub fn fuzzify(&self, x: f64) -> IndexMap<String, f64> {
        self.sets
            .iter()
            .map(|s| (s.label.clone(), s.function.membership(x)))
            .collect()
    }

    /// Label with the highest membership; ties go to the earlier set.
    pub fn classify(&self, x: f64) -> Classification {
        let memberships = self.fuzzify(x);
        let mut best = 0;
        let mut best_m = f64::NEG_INFINITY;
        for (i, m) in memberships.values().enumerate() {
            if *m > best_m {
                best = i;
                best_m = *m;
            }
        }
        Classification {
            label: self.sets[best].label.clone(),
            index: best,
            memberships,
        }
    }
}

pub fn fuzzify(p: &FuzzyPartition, x: f64) -> IndexMap<String, f64> {
    p.fuzzify(x)
}

pub fn classify(p: &FuzzyPartition, x: f64) -> Classification {
    p.classify(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    /// Position of `label` in the partition.
    pub index: usize,
    pub memberships: IndexMap<String, f64>,
}

/// Five sets over THD in percent: descending sigmoid "very low", gaussians
/// "low", "medium", "high", ascending sigmoid "very high".
pub fn default_partition() -> FuzzyPartition {
    let set = |label: &str, function| FuzzySet {
        label: label.to_string(),
        function,
    };
    use MembershipFunction::{Gaussian, Sigmoid};
    FuzzyPartition::new(vec![
        set(
            "very low",
            Sigmoid {
                midpoint: 5.0,
                slope: -1.5,
            },
        ),
        set(
            "low",
            Gaussian {
                center: 10.0,
                sigma: 4.0,
            },
        ),
        set(
            "medium",
            Gaussian {
                center: 20.0,
                sigma: 4.0,
            },
        ),
        set(
            "high",
            Gaussian {
                center: 30.0,
                sigma: 4.0,
            },
        ),
        set(
            "very high",
            Sigmoid {
                midpoint: 38.0,
                slope: 1.5,
            },
        ),
    ])
    .expect("default partition is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discrimination {
    Below,
    Above,
}

/// `Below` when `value < threshold`, otherwise `Above`.
pub fn threshold_discriminate(value: f64, threshold: f64) -> Discrimination {
    if value < threshold {
        Discrimination::Below
    } else {
        Discrimination::Above
    }
}
