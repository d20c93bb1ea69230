/// Formats a float with 9 significant digits in plain decimal notation.
/// Non-finite values print as `NaN`, `inf` or `-inf`.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{x:.8e}");
    let exponent: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if !(-5..=15).contains(&exponent) {
        return sci;
    }
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn opt_sig9(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_else(|| "NaN".into())
}
