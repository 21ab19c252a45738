/// Formats a float with 17 significant digits, enough for exact round-trip.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}
