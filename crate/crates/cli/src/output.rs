//! Number formatting shared by all output formats.

use serde_json::{Number, Value};

const SIG_DIGITS: usize = 9;

/// Rounds to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Nine significant digits, plain decimal for moderate magnitudes.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-4..1e9).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| fmt_num(*x))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Rounds every non-integer number in a JSON tree in place.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}
