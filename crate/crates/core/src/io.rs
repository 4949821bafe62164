//! Number formatting and serde helpers shared by the report writers.

use serde::{Deserialize, Deserializer, Serializer};

/// Scientific notation with 17 significant digits; round-trips every finite f64.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Parse a number written by [`fmt17`] (accepts `inf`, `-inf`, `NaN`).
pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "Infinity" | "+inf" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        "NaN" | "nan" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// Serde adapter for values that may be infinite: finite values are JSON
/// numbers, non-finite ones the strings `"inf"`, `"-inf"` or `"NaN"`.
pub mod extended_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&fmt17(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => parse_f64(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("not a number: {s}"))),
        }
    }
}
