/// Huber loss: `delta^2 / 2` inside `[-kappa, kappa]`, linear outside.
#[inline]
pub fn huber(delta: f64, kappa: f64) -> f64 {
    let a = delta.abs();
    if a <= kappa {
        0.5 * delta * delta
    } else {
        kappa * (a - 0.5 * kappa)
    }
}

/// `d huber / d delta`.
#[inline]
pub fn huber_grad(delta: f64, kappa: f64) -> f64 {
    delta.clamp(-kappa, kappa)
}

/// Asymmetric quantile-Huber loss `|tau - 1{delta < 0}| * huber(delta) / kappa`.
#[inline]
pub fn quantile_huber(delta: f64, tau: f64, kappa: f64) -> f64 {
    quantile_weight(delta, tau) * huber(delta, kappa) / kappa
}

/// `d quantile_huber / d delta`.
#[inline]
pub fn quantile_huber_grad(delta: f64, tau: f64, kappa: f64) -> f64 {
    quantile_weight(delta, tau) * huber_grad(delta, kappa) / kappa
}

#[inline]
fn quantile_weight(delta: f64, tau: f64) -> f64 {
    (tau - if delta < 0.0 { 1.0 } else { 0.0 }).abs()
}
