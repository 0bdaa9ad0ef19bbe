use crate::error::{Error, Result};

/// Largest `eps` for which the normal-variation bounds hold.
pub const EPS_LIMIT: f64 = 1.0 / 3.0;

fn check(eps: f64, name: &str, closed: bool) -> Result<()> {
    let ok = eps >= 0.0 && if closed { eps <= EPS_LIMIT } else { eps < EPS_LIMIT };
    if ok {
        Ok(())
    } else {
        let range = if closed { "[0, 1/3]" } else { "[0, 1/3)" };
        Err(Error::Precondition(format!("{name}: eps = {eps} outside {range}")))
    }
}

/// `eps / (1 - 3 eps)`, the older bound stated for `d <= eps min(f(q), f(q'))`.
pub fn bound_ab(eps: f64) -> Result<f64> {
    check(eps, "bound_ab", false)?;
    Ok(eps / (1.0 - 3.0 * eps))
}

/// `eps / (1 - eps)`, evaluated as `1 / (1/eps - 1)`, which is exact at the
/// limit `eps = 1/3`.
pub fn bound_new(eps: f64) -> Result<f64> {
    check(eps, "bound_new", true)?;
    if eps == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / eps - 1.0))
}

/// `-ln(1 - eps)`.
pub fn bound_log(eps: f64) -> Result<f64> {
    check(eps, "bound_log", true)?;
    Ok(-(-eps).ln_1p())
}
