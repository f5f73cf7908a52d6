/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
