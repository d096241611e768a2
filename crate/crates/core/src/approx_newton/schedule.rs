//! Step-size, finite-difference and inner-length schedules.

/// Smallest finite-difference step; below it forward differences lose all
/// significant digits to cancellation.
pub const MIN_HVP_DELTA: f64 = 1e-10;

/// Outer step `ρ_t = ρ₀ (t+1)^{−d_o}`.
pub fn outer_step(rho0: f64, d_o: f64, t: usize) -> f64 {
    rho0 * ((t + 1) as f64).powf(-d_o)
}

/// Inner step `τ_j = τ₀ (j+1)^{−d_i}`.
pub fn inner_step(tau0: f64, d_i: f64, j: usize) -> f64 {
    tau0 * ((j + 1) as f64).powf(-d_i)
}

/// Finite-difference step `δ = δ₀ ρ_t⁴ τ_j⁴`, clamped below.
pub fn hvp_delta(delta0: f64, rho_t: f64, tau_j: f64) -> f64 {
    let rt = rho_t * tau_j;
    let rt2 = rt * rt;
    (delta0 * rt2 * rt2).max(MIN_HVP_DELTA)
}

/// Inner loop length at outer step `t`: `ceil(L (t+1)^{d_L})`.
pub fn inner_len(base: usize, growth: f64, t: usize) -> usize {
    if growth == 0.0 {
        return base;
    }
    let v = base as f64 * ((t + 1) as f64).powf(growth);
    (v.ceil() as usize).max(1)
}
