//! Clamped Cobb-Douglas matching technology `M = chi * u^eta * v^(1-eta)`.

/// Probability that a vacancy is filled, `min(1, chi * theta^-eta)`.
pub fn fill_prob(theta: f64, chi: f64, eta: f64) -> f64 {
    if theta <= 0.0 {
        return 1.0;
    }
    (chi * theta.powf(-eta)).min(1.0)
}

/// Probability that a searcher meets a vacancy, `min(1, chi * theta^(1-eta))`.
pub fn find_prob(theta: f64, chi: f64, eta: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    (chi * theta.powf(1.0 - eta)).min(1.0)
}

/// Tightness at which the fill probability hits 1 from below.
pub fn fill_prob_kink(chi: f64, eta: f64) -> f64 {
    chi.powf(1.0 / eta)
}
