//! Stable numeric formatting for emitted artifacts.

/// Formats with 9 significant digits in plain decimal notation.
///
/// All CSV artifacts go through this so golden files compare equal across
/// platforms. Values whose integer part already exceeds 9 digits keep the
/// full integer part.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    // Take the decimal exponent from the scientific rendering; this avoids
    // log10 edge cases at exact powers of ten.
    let sci = format!("{x:e}");
    let exp: i32 = sci
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
