use serde::{Deserialize, Serialize};

/// Per-stage diagnostics of one encode.
///
/// Vectors indexed by residual (`residual_norm2`, `delta`,
/// `typical_residual`) have `L + 1` entries, entry 0 describing the source.
/// Per-selection vectors have `L` entries, entry `i - 1` describing section
/// `i`. All norms are normalized, `|x|^2 = ||x||^2 / n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncodeTrace {
    /// `|R_i|^2`, i = 0..=L.
    pub residual_norm2: Vec<f64>,
    /// `Delta_i` with `|R_i|^2 = sigma^2 (1 - 2R/L)^i (1 + Delta_i)^2`.
    pub delta: Vec<f64>,
    /// `gamma_i = |A_{m_i}|^2 - 1`.
    pub gamma: Vec<f64>,
    /// `eps_i` with `<A_{m_i}, R_{i-1}/||R_{i-1}||> = sqrt(2 ln M) (1 + eps_i)`.
    pub eps: Vec<f64>,
    /// `<A_{m_i}, R_{i-1}/||R_{i-1}||>` (0 when the residual vanished).
    pub selected_stat: Vec<f64>,
    /// Raw `<A_{m_i}, R_{i-1}>`, as computed during selection.
    pub selected_dot: Vec<f64>,
    /// `sigma^2 (1 - 2R/L)^i`, i = 0..=L.
    pub typical_residual: Vec<f64>,
    /// Successive-refinement target `|R_{i-1}|^2 e^{-2R/L}` of stage i.
    pub refinement_target: Vec<f64>,
}

impl EncodeTrace {
    /// `|R_L|^2`, the realized distortion.
    pub fn final_distortion(&self) -> f64 {
        *self.residual_norm2.last().unwrap_or(&f64::NAN)
    }

    pub fn stages(&self) -> usize {
        self.gamma.len()
    }

    /// Mean of `eps_i` over all stages.
    pub fn mean_eps(&self) -> f64 {
        self.eps.iter().sum::<f64>() / self.eps.len() as f64
    }

    /// Residual reconstructed from `delta`, i.e. the deviation identity.
    pub fn residual_from_delta(&self, i: usize) -> f64 {
        let d = 1.0 + self.delta[i];
        self.typical_residual[i] * d * d
    }
}
