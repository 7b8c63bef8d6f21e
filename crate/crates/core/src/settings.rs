//! Library-wide numerical tolerances and resource limits.

/// Tolerances and limits. `Settings::default()` is what every convenience
/// constructor uses; pass a custom value to the `*_with` variants to override.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    /// Tolerance for exact identities (Hermiticity, unitarity, clipping).
    pub identity_tol: f64,
    /// Tolerance for accumulated sums such as spectrum normalization.
    pub accumulated_tol: f64,
    /// Largest N accepted by the dense engine.
    pub dense_qubit_limit: usize,
    /// Born probabilities at or below this are treated as exactly zero.
    pub zero_probability: f64,
    /// Channel eigenvalues with magnitude below this mark a mode unlearnable.
    pub unlearnable_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        DEFAULT
    }
}

pub const DEFAULT: Settings = Settings {
    identity_tol: 1e-10,
    accumulated_tol: 1e-8,
    dense_qubit_limit: 13,
    zero_probability: 1e-13,
    unlearnable_tol: 1e-12,
};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;
