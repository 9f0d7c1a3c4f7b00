//! Deterministic number formatting for emitted files.

/// Six fixed decimals; `NA` for missing values, `Inf` for infinities.
pub fn fixed(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn fixed_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fixed)
}

/// Round to six decimals for JSON output. Non-finite values become `None`.
pub fn round6(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let r = (x * 1e6).round() / 1e6;
    Some(if r == 0.0 { 0.0 } else { r })
}

pub fn round6_opt(x: Option<f64>) -> Option<f64> {
    x.and_then(round6)
}

/// Integers print without decimals; everything else as [`fixed`].
pub fn compact(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fixed(x)
    }
}
