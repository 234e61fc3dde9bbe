//! Central finite-difference gradient checking (real64 only).

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub passed: bool,
    /// Set when the loss evaluated to a non-finite value.
    pub failure: Option<String>,
}

/// Compare `analytic` against central finite differences of `loss` evaluated
/// at `theta`. `theta` is restored before returning. Relative error uses a
/// floored denominator so near-zero gradients are compared absolutely.
pub fn check_gradients<F>(
    mut loss: F,
    theta: &mut [f64],
    analytic: &[f64],
    rel_tol: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len());
    let mut max_rel_err = 0.0f64;
    let mut worst_index = 0usize;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + FD_STEP;
        let fp = loss(theta);
        theta[i] = orig - FD_STEP;
        let fm = loss(theta);
        theta[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return GradCheckReport {
                max_rel_err: f64::INFINITY,
                worst_index: i,
                passed: false,
                failure: Some(format!("non-finite loss while perturbing index {i}")),
            };
        }
        let fd = (fp - fm) / (2.0 * FD_STEP);
        let a = analytic[i];
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-3);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = i;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst_index,
        passed: max_rel_err < rel_tol,
        failure: None,
    }
}
