//! Scalar diagnostics: battery energy, level populations, purity, entropies
//! and mutual information.
//!
//! The battery energy uses `U = ħω_eg (p_e − p_g)`, so it ranges over
//! `[−1, 1]` in units of `ħω_eg` and a full charge from a thermal state
//! gains exactly `2 p_g`.

use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, DensityMatrix, Level, ProductSpace};

/// Eigenvalues below this floor make entropies fail instead of clamping.
pub const ENTROPY_FLOOR: f64 = -1e-6;

/// `p_e − p_g` in units of `ħω_eg` for a two- or three-level battery.
pub fn qubit_energy(rho_q: &DensityMatrix) -> f64 {
    let p = rho_q.populations();
    p[1] - p[0]
}

/// `Σ_n n ρ_nn` for a single truncated mode.
pub fn mean_number(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr ρ² = Σ_ij |ρ_ij|² for Hermitian ρ.
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// `−Σ λ ln λ` in nats, with eigenvalues in `(−1e-6, 0)` clamped to zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let mut s = 0.0;
    for lam in rho.eigenvalues()? {
        if lam < ENTROPY_FLOOR {
            return Err(Error::NegativeEigenvalue { value: lam });
        }
        if lam > 0.0 {
            s -= lam * lam.ln();
        }
    }
    Ok(s)
}

/// `I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)` for a bipartite state with
/// dimensions `[d_A, d_B]`.
pub fn mutual_information(rho: &DensityMatrix, dims: [usize; 2]) -> Result<f64> {
    let ra = partial_trace(rho, &[0], &dims)?;
    let rb = partial_trace(rho, &[1], &dims)?;
    Ok(von_neumann_entropy(&ra)? + von_neumann_entropy(&rb)? - von_neumann_entropy(rho)?)
}

/// Populations and energies of a state on `L ⊗ q ⊗ R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub u_q: f64,
    pub p_g: f64,
    pub p_e: f64,
    pub p_i: f64,
    pub n_l: f64,
    pub n_r: f64,
}

impl EnergyReport {
    /// Reads the report off the diagonal of a product-space state.
    pub fn new(rho: &DensityMatrix, space: ProductSpace) -> Result<Self> {
        if rho.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: rho.dim(),
            });
        }
        let mut report = Self {
            u_q: 0.0,
            p_g: 0.0,
            p_e: 0.0,
            p_i: 0.0,
            n_l: 0.0,
            n_r: 0.0,
        };
        for (k, label) in space.labels().enumerate() {
            let p = rho.matrix()[(k, k)].re;
            match label.level {
                Level::Ground => report.p_g += p,
                Level::Excited => report.p_e += p,
                Level::Intermediate => report.p_i += p,
            }
            report.n_l += label.m as f64 * p;
            report.n_r += label.n as f64 * p;
        }
        report.u_q = report.p_e - report.p_g;
        Ok(report)
    }
}
