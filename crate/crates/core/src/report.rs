//! Outcome of a single condition check, shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    Inconclusive,
}

/// How a result feeds into the overall verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Must hold at every local minimax point; a violation refutes the candidate.
    Necessary,
    /// Its satisfaction certifies the candidate.
    Sufficient,
    /// A constraint qualification that the necessary conditions rely on.
    Qualification,
    /// A hypothesis of the theory (smoothness, uniqueness, nonsingularity).
    Precondition,
    /// Reported for information only.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Sampled,
    Lp,
    Enumeration,
    Newton,
    Grid,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub status: Status,
    /// The measured quantity the status is decided on.
    #[serde(with = "real")]
    pub margin: f64,
    #[serde(with = "real")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "real_vec")]
    pub witness: Option<Vec<f64>>,
    pub method: Method,
    pub role: Role,
    pub detail: String,
}

impl ConditionResult {
    pub fn new(name: &str, role: Role, method: Method, status: Status, margin: f64, tolerance: f64) -> Self {
        ConditionResult {
            name: name.to_string(),
            status,
            margin,
            tolerance,
            witness: None,
            method,
            role,
            detail: String::new(),
        }
    }

    /// A check that could not be evaluated.
    pub fn skipped(name: &str, role: Role, reason: impl Into<String>) -> Self {
        ConditionResult::new(name, role, Method::Skipped, Status::Inconclusive, f64::NAN, f64::NAN).with_detail(reason)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_witness(mut self, w: impl IntoIterator<Item = f64>) -> Self {
        self.witness = Some(w.into_iter().collect());
        self
    }

    pub fn satisfied(&self) -> bool {
        self.status == Status::Satisfied
    }

    pub fn violated(&self) -> bool {
        self.status == Status::Violated
    }
}

/// Satisfied iff `value <= tol`.
pub fn at_most(value: f64, tol: f64) -> Status {
    if value <= tol {
        Status::Satisfied
    } else {
        Status::Violated
    }
}

/// Satisfied iff `value >= tol`.
pub fn at_least(value: f64, tol: f64) -> Status {
    if value >= tol {
        Status::Satisfied
    } else {
        Status::Violated
    }
}

/// Serde for `f64` that writes non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
pub mod real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct RealVisitor;

    impl Visitor<'_> for RealVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(RealVisitor)
    }

    /// Wrapper usable inside collections.
    #[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
    #[serde(transparent)]
    pub struct Real(#[serde(with = "self")] pub f64);
}

/// `Option<Vec<f64>>` with the same non-finite handling as [`real`].
pub mod real_vec {
    use super::real::Real;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|xs| xs.iter().map(|&x| Real(x)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let v: Option<Vec<Real>> = Option::deserialize(d)?;
        Ok(v.map(|xs| xs.into_iter().map(|r| r.0).collect()))
    }
}

/// `Vec<f64>` with the same non-finite handling as [`real`].
pub mod real_seq {
    use super::real::Real;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| Real(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Real> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|r| r.0).collect())
    }
}
