/// Nine significant digits in scientific notation, `-0` folded to `0`.
pub fn sig9(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}
