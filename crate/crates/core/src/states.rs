//! Initial states: oscillator Gibbs states, N-photon-added thermal states
//! (NPATS), displaced thermal states (DTS), imperfect single-photon addition
//! and thermal qutrits.
//!
//! Temperatures are dimensionless, `T̄ = k_B T / ħω_ig`, and frequencies are
//! measured in units of `ω_ig`. Every constructor checks that the Fock
//! truncation holds the state to the documented tolerance instead of
//! silently renormalizing away a missing tail.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{c, CMatrix, DensityMatrix, ZERO};

/// Largest population allowed beyond the Fock cutoff.
pub const TAIL_TOL: f64 = 1e-8;
/// Required normalization of the well-converged displacement columns.
pub const DISPLACEMENT_TOL: f64 = 1e-6;

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Thermal parameters of one oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSpec {
    pub tbar: f64,
    pub omega_bar: f64,
    pub cutoff: usize,
}

impl ThermalSpec {
    pub fn new(tbar: f64, omega_bar: f64, cutoff: usize) -> Result<Self> {
        if !(tbar.is_finite() && tbar >= 0.0) {
            return Err(Error::param(
                "tbar",
                format!("must be finite and >= 0, got {tbar}"),
            ));
        }
        if !(omega_bar.is_finite() && omega_bar > 0.0) {
            return Err(Error::param(
                "omega_bar",
                format!("must be > 0, got {omega_bar}"),
            ));
        }
        if cutoff < 2 {
            return Err(Error::param(
                "cutoff",
                format!("must be >= 2, got {cutoff}"),
            ));
        }
        let spec = Self {
            tbar,
            omega_bar,
            cutoff,
        };
        let tail = spec.gibbs_tail();
        if tail >= TAIL_TOL {
            return Err(Error::TruncationInsufficient(format!(
                "Gibbs tail {tail:.3e} beyond cutoff {cutoff} at T̄={tbar}, ω̄={omega_bar}"
            )));
        }
        Ok(spec)
    }

    /// `e^{−ω̄/T̄}`, zero at `T̄ = 0`.
    pub fn boltzmann_ratio(&self) -> f64 {
        if self.tbar == 0.0 {
            0.0
        } else {
            (-self.omega_bar / self.tbar).exp()
        }
    }

    /// Single-mode partition function `Z₀ = (1 − e^{−ω̄/T̄})⁻¹`.
    pub fn z0(&self) -> f64 {
        1.0 / (1.0 - self.boltzmann_ratio())
    }

    /// Untruncated mean occupation `Z₀ − 1`.
    pub fn mean_occupation(&self) -> f64 {
        self.z0() - 1.0
    }

    /// Population of the untruncated Gibbs state at or above the cutoff.
    pub fn gibbs_tail(&self) -> f64 {
        self.boltzmann_ratio().powi(self.cutoff as i32)
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.tbar, self.omega_bar, cutoff)
    }
}

/// Partition functions of the N-photon-added thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonAddition {
    pub n: usize,
    pub z0: f64,
    pub zn: f64,
}

impl PhotonAddition {
    /// Closed form `Z_N = N! Z₀^{N+1}`.
    pub fn new(n: usize, spec: &ThermalSpec) -> Self {
        let z0 = spec.z0();
        let ln_n_fact = ln_factorials(n)[n];
        let zn = (ln_n_fact + (n as f64 + 1.0) * z0.ln()).exp();
        Self { n, z0, zn }
    }

    /// `Z_N` by direct summation of `Σ_k (k+N)!/k! x^k`, stopping once a term
    /// and the geometric bound on the remainder fall below `tail_tol` relative
    /// to the running sum.
    pub fn partition_by_summation(n: usize, spec: &ThermalSpec, tail_tol: f64) -> f64 {
        let x = spec.boltzmann_ratio();
        let mut sum = 0.0;
        // term_k = (k+N)!/k! x^k, built from term_{k-1} · (k+N)/k · x.
        let mut term: f64 = (1..=n).map(|k| k as f64).product();
        let mut k = 0usize;
        loop {
            sum += term;
            k += 1;
            let ratio = (k + n) as f64 / k as f64 * x;
            term *= ratio;
            if ratio < 1.0 && term / (1.0 - ratio) <= tail_tol * sum {
                break;
            }
            if k > 100_000 {
                break;
            }
        }
        sum
    }

    /// `⟨n⟩_N = (N + 1) Z₀ − 1`.
    pub fn mean_number(&self) -> f64 {
        (self.n as f64 + 1.0) * self.z0 - 1.0
    }
}

/// Truncated, normalized Gibbs state `p_n ∝ e^{−n ω̄/T̄}`.
pub fn gibbs_oscillator(spec: &ThermalSpec) -> DensityMatrix {
    let x = spec.boltzmann_ratio();
    let mut p: Vec<f64> = (0..spec.cutoff).map(|n| x.powi(n as i32)).collect();
    if x == 0.0 {
        p.iter_mut().skip(1).for_each(|v| *v = 0.0);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    diagonal_state(&p)
}

fn diagonal_state(p: &[f64]) -> DensityMatrix {
    DensityMatrix::from_matrix_unchecked(CMatrix::from_diagonal(&DVector::from_iterator(
        p.len(),
        p.iter().map(|&v| c(v)),
    )))
}

/// Populations of the N-photon-added thermal state on the truncated space.
pub fn npats_populations(n: usize, spec: &ThermalSpec) -> Result<Vec<f64>> {
    if spec.cutoff <= n {
        return Err(Error::param(
            "cutoff",
            format!(
                "cutoff {} must exceed the added photon number {n}",
                spec.cutoff
            ),
        ));
    }
    let x = spec.boltzmann_ratio();
    let lf = ln_factorials(spec.cutoff);
    let ln_zn = PhotonAddition::new(n, spec).zn.ln();
    let mut p = vec![0.0; spec.cutoff];
    for k in n..spec.cutoff {
        let shift = k - n;
        p[k] = if shift == 0 {
            (lf[k] - lf[0] - ln_zn).exp()
        } else if x == 0.0 {
            0.0
        } else {
            (lf[k] - lf[shift] + shift as f64 * x.ln() - ln_zn).exp()
        };
    }
    let kept: f64 = p.iter().sum();
    let tail = 1.0 - kept;
    if tail >= TAIL_TOL {
        return Err(Error::TruncationInsufficient(format!(
            "NPATS(N={n}) tail {tail:.3e} beyond cutoff {}",
            spec.cutoff
        )));
    }
    p.iter_mut().for_each(|v| *v /= kept);
    Ok(p)
}

/// N-photon-added thermal state `â†ᴺ e^{−β̄ω̄ â†â} âᴺ / Z_N`.
pub fn npats(n: usize, spec: &ThermalSpec) -> Result<DensityMatrix> {
    npats_populations(n, spec).map(|p| diagonal_state(&p))
}

/// Single-photon-added thermal state.
pub fn spats(spec: &ThermalSpec) -> Result<DensityMatrix> {
    npats(1, spec)
}

/// Fock-basis matrix of the displacement operator, `D_nm = ⟨n|D(α)|m⟩`,
/// evaluated from the exact finite sum (not the truncated exponential).
///
/// Each term of the sum is accumulated in log-magnitude form so large
/// factorials never overflow.
pub fn displacement_matrix(alpha: Complex64, cutoff: usize) -> Result<CMatrix> {
    if cutoff < 2 {
        return Err(Error::param(
            "cutoff",
            format!("must be >= 2, got {cutoff}"),
        ));
    }
    if alpha == ZERO {
        return Ok(CMatrix::identity(cutoff, cutoff));
    }
    let lf = ln_factorials(cutoff);
    let r = alpha.norm();
    let ln_r = r.ln();
    let theta = alpha.arg();
    let prefactor = -0.5 * r * r;
    let mut d = CMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        for m in 0..cutoff {
            // term_i = e^{−|α|²/2} √(m!n!) (−1)^i α^{n−m+i} (α*)^i / (i!(m−i)!(n−m+i)!)
            let lo = m.saturating_sub(n);
            let mut acc = 0.0;
            for i in lo..=m {
                let power = (n + 2 * i - m) as f64;
                let ln_mag = prefactor + 0.5 * (lf[m] + lf[n]) + power * ln_r
                    - lf[i]
                    - lf[m - i]
                    - lf[n + i - m];
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * ln_mag.exp();
            }
            d[(n, m)] = Complex64::from_polar(acc, (n as f64 - m as f64) * theta);
        }
    }
    for m in 0..=(cutoff / 2) {
        let norm: f64 = d.column(m).iter().map(|z| z.norm_sqr()).sum();
        if (1.0 - norm).abs() > DISPLACEMENT_TOL {
            return Err(Error::TruncationInsufficient(format!(
                "displacement column {m} has norm {norm:.9} at cutoff {cutoff} for |α| = {r}"
            )));
        }
    }
    Ok(d)
}

/// A displaced thermal state together with its truncation audit.
#[derive(Debug, Clone)]
pub struct DisplacedThermal {
    pub state: DensityMatrix,
    /// Trace of `D ρ_T D†` before renormalization.
    pub renormalization: f64,
}

/// Displaced thermal state `D(α) ρ_T D(α)†`, renormalized after truncation.
pub fn dts(alpha: Complex64, spec: &ThermalSpec) -> Result<DensityMatrix> {
    dts_with_audit(alpha, spec).map(|d| d.state)
}

pub fn dts_with_audit(alpha: Complex64, spec: &ThermalSpec) -> Result<DisplacedThermal> {
    let d = displacement_matrix(alpha, spec.cutoff)?;
    let thermal = gibbs_oscillator(spec);
    let rho = &d * thermal.matrix() * d.adjoint();
    let trace = rho.trace().re;
    if (1.0 - trace).abs() > DISPLACEMENT_TOL {
        return Err(Error::TruncationInsufficient(format!(
            "DTS renormalization factor {trace:.9} at cutoff {}",
            spec.cutoff
        )));
    }
    log::debug!(
        "DTS |α|={:.6} renormalization factor {trace:.12}",
        alpha.norm()
    );
    let rho = crate::hilbert::hermitize(&(rho / c(trace)));
    Ok(DisplacedThermal {
        state: DensityMatrix::from_matrix_unchecked(rho),
        renormalization: trace,
    })
}

/// Displacement giving the DTS the same mean excitation as NPATS(N):
/// `|α_opt|² = N Z₀`.
pub fn alpha_opt(n: usize, spec: &ThermalSpec) -> f64 {
    (n as f64 * spec.z0()).sqrt()
}

/// Imperfect single-photon addition `η ρ_SPATS + (1 − η) ρ_T`.
pub fn inefficient_spats(eta: f64, spec: &ThermalSpec) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param(
            "eta",
            format!("must lie in [0, 1], got {eta}"),
        ));
    }
    spats(spec)?.mix(&gibbs_oscillator(spec), eta)
}

/// Level populations of a thermal qutrit with level frequencies in `ω_ig` units.
pub fn qutrit_populations(tbar: f64, omega_g: f64, omega_e: f64, omega_i: f64) -> Result<[f64; 3]> {
    if !(omega_g < omega_e && omega_e < omega_i) {
        return Err(Error::param(
            "omega",
            format!("levels must satisfy ω_g < ω_e < ω_i, got ({omega_g}, {omega_e}, {omega_i})"),
        ));
    }
    if tbar.is_nan() || tbar < 0.0 {
        return Err(Error::param("tbar", format!("must be >= 0, got {tbar}")));
    }
    if tbar == 0.0 {
        return Ok([1.0, 0.0, 0.0]);
    }
    let w = [omega_g, omega_e, omega_i].map(|om| (-(om - omega_g) / tbar).exp());
    let z: f64 = w.iter().sum();
    Ok(w.map(|v| v / z))
}

/// Thermal qutrit `diag(p_g, p_e, p_i)`.
pub fn qutrit_thermal(
    tbar: f64,
    omega_g: f64,
    omega_e: f64,
    omega_i: f64,
) -> Result<DensityMatrix> {
    qutrit_populations(tbar, omega_g, omega_e, omega_i).map(|p| diagonal_state(&p))
}

/// Thermal two-level battery on `{g, e}` with splitting `ω_eg`.
pub fn qubit_thermal(tbar: f64, omega_eg: f64) -> Result<DensityMatrix> {
    if omega_eg.is_nan() || omega_eg <= 0.0 {
        return Err(Error::param(
            "omega_eg",
            format!("must be > 0, got {omega_eg}"),
        ));
    }
    if tbar.is_nan() || tbar < 0.0 {
        return Err(Error::param("tbar", format!("must be >= 0, got {tbar}")));
    }
    let pe = if tbar == 0.0 {
        0.0
    } else {
        let x = (-omega_eg / tbar).exp();
        x / (1.0 + x)
    };
    Ok(diagonal_state(&[1.0 - pe, pe]))
}

/// Diagonal qubit with a given ground population.
pub fn qubit_with_ground(p_g: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p_g) {
        return Err(Error::param(
            "p_g",
            format!("must lie in [0, 1], got {p_g}"),
        ));
    }
    Ok(diagonal_state(&[p_g, 1.0 - p_g]))
}

/// Fock state `|k⟩⟨k|` on a truncated mode.
pub fn fock(k: usize, cutoff: usize) -> Result<DensityMatrix> {
    DensityMatrix::basis(cutoff, k)
}
