//! JSON report emission and CSV tables.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

/// Significant digits for every reported float.
pub const SIG_DIGITS: usize = 12;

/// Keys whose subtrees hold profile documents, kept at full precision so they
/// re-load exactly.
const EXACT_KEYS: &[&str] = &["profile", "profiles", "mechanism"];

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

pub fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if !EXACT_KEYS.contains(&k.as_str()) {
                    round_floats(v);
                }
            }
        }
        _ => {}
    }
}

pub fn render(mut report: Value) -> String {
    round_floats(&mut report);
    let mut text = serde_json::to_string_pretty(&report).expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn fmt_float(v: f64) -> String {
    format!("{}", round_sig(v))
}

/// Writes `rows` under `header` to `dir/name`, creating `dir` if needed.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounds_reports_but_not_profiles() {
        let mut v = json!({"value": 1.0 / 3.0, "profile": {"z": [1.0 / 3.0]}, "n": 3});
        round_floats(&mut v);
        assert_eq!(v["value"], json!(0.333333333333));
        assert_eq!(v["profile"]["z"][0], json!(1.0 / 3.0));
        assert_eq!(v["n"], json!(3));
    }

    #[test]
    fn sig_digits() {
        assert_eq!(round_sig(6.000000000000001), 6.0);
        assert_eq!(round_sig(-1.23456789012345e-7), -1.23456789012e-7);
        assert_eq!(fmt_float(0.5), "0.5");
    }
}
