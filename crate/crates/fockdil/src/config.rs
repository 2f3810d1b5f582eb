/// Numerical tolerances shared by all modules.
///
/// `rank` is relative: a singular value counts when it exceeds
/// `rank * max(s_max, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub orth: f64,
    pub rank: f64,
    pub conv: f64,
    pub fix: f64,
    pub fit: f64,
    pub inner: f64,
    /// Generic comparison tolerance for predicates (coisometric, commuting, ...).
    pub tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            orth: 1e-10,
            rank: 1e-9,
            conv: 1e-12,
            fix: 1e-8,
            fit: 1e-7,
            inner: 1e-8,
            tol: 1e-9,
        }
    }
}

/// Iteration cap used by the fixed-point and stability iterations.
pub fn max_iter(dim: usize) -> usize {
    (10 * dim * dim).max(64)
}
