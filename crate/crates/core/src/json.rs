//! JSON output conventions shared by every report.
//!
//! Reals are written rounded to six significant digits, each with a
//! `<key>_full` sibling carrying the unrounded value. Infinities are the
//! strings `"inf"` / `"-inf"` and undefined values are `null`, since JSON
//! numbers cannot express either.

use serde::Serializer;
use serde_json::{Map, Value};

/// `serialize_with` helper for reals that may be infinite or NaN.
pub fn real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_nan() {
        s.serialize_none()
    } else if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub fn opt_real<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => real(v, s),
        None => s.serialize_none(),
    }
}

pub fn reals<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Real(*x))?;
    }
    seq.end()
}

pub fn opt_reals<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.map(Real))?;
    }
    seq.end()
}

struct Real(f64);

impl serde::Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        real(&self.0, s)
    }
}

/// Rounds to six significant digits.
pub fn round6(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

fn is_real(v: &Value) -> bool {
    matches!(v, Value::Number(n) if n.is_f64())
}

fn is_real_array(v: &Value) -> bool {
    match v {
        Value::Array(items) => {
            items.iter().any(is_real) && items.iter().all(|x| is_real(x) || x.is_string() || x.is_null())
        }
        _ => false,
    }
}

fn rounded(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round6(f)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.iter().map(rounded).collect()),
        other => other.clone(),
    }
}

/// Applies the rounding convention to a serialized report: every real
/// (or array of reals) under an object key is rounded and shadowed by a
/// full-precision `<key>_full` sibling.
pub fn with_shadow_fields(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut out = Map::new();
            for (key, v) in map {
                if is_real(&v) || is_real_array(&v) {
                    out.insert(key.clone(), rounded(&v));
                    out.insert(format!("{key}_full"), v);
                } else {
                    out.insert(key, with_shadow_fields(v));
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(with_shadow_fields).collect()),
        other => other,
    }
}

/// Pretty-printed report text with a trailing newline.
pub fn to_report_string<T: serde::Serialize>(report: &T) -> Result<String, serde_json::Error> {
    let value = with_shadow_fields(serde_json::to_value(report)?);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;
    use serde_json::json;

    #[derive(Serialize)]
    struct Sample {
        #[serde(serialize_with = "real")]
        a: f64,
        #[serde(serialize_with = "reals")]
        b: Vec<f64>,
        #[serde(serialize_with = "opt_real")]
        c: Option<f64>,
        n: u64,
    }

    #[test]
    fn rounding_and_shadows() {
        let s = Sample {
            a: 1.537_163_245,
            b: vec![0.123_456_789, f64::INFINITY],
            c: None,
            n: 12,
        };
        let v = with_shadow_fields(serde_json::to_value(&s).unwrap());
        assert_eq!(v["a"], json!(1.53716));
        assert_eq!(v["a_full"], json!(1.537_163_245));
        assert_eq!(v["b"], json!([0.123457, "inf"]));
        assert_eq!(v["b_full"], json!([0.123_456_789, "inf"]));
        assert_eq!(v["c"], Value::Null);
        assert!(v.get("c_full").is_none());
        assert_eq!(v["n"], json!(12));
        assert!(v.get("n_full").is_none());
    }

    #[test]
    fn round6_examples() {
        assert_eq!(round6(-0.075_395_1), -0.0753951);
        assert_eq!(round6(123_456_789.0), 123_457_000.0);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(round6(f64::NEG_INFINITY), f64::NEG_INFINITY);
    }
}
