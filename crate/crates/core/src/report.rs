//! Canonical JSON output.
//!
//! Reports are written with sorted object keys and every floating-point
//! number printed with 17 significant digits in exponent form, so equal
//! results always produce equal bytes and every `f64` survives a re-read.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// `1.2345678901234567e-3` style, 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign of negative zero out of diffs.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Serializes `value` as canonical JSON text (no trailing newline).
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_value(item, indent + 1, out);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes canonical JSON plus a trailing newline.
pub fn write_canonical_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = to_canonical_json(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_fixed() {
        let v = json!({"b": 1.5, "a": [1, -2, 0.1], "c": {"z": null, "y": "s\"q"}});
        let text = to_canonical_json(&v).unwrap();
        let a = text.find("\"a\"").unwrap();
        let b = text.find("\"b\"").unwrap();
        let c = text.find("\"c\"").unwrap();
        assert!(a < b && b < c);
        assert!(text.contains("1.5000000000000000e0"));
        assert!(text.contains("1.0000000000000001e-1"));
        assert!(text.contains("-2"));
        assert!(text.contains("\"s\\\"q\""));
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0] {
            let back: f64 = format_float(x).parse().unwrap();
            assert_eq!(back, x);
        }
        assert_eq!(format_float(-0.0), format_float(0.0));
    }

    #[test]
    fn reparse_is_lossless() {
        let v = json!({"x": [0.1, 0.2, 1e-17], "n": 3, "s": "ok", "e": {}, "a": []});
        let text = to_canonical_json(&v).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(to_canonical_json(&back).unwrap(), text);
    }
}
