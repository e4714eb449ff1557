use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0`.
pub fn gamma_ln(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln Γ(x) requires finite x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}
