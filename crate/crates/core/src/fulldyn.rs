//! The full Λ-system Hamiltonian on the truncated product space, used to
//! validate the dispersive effective dynamics.
//!
//! Frequencies are in units of `ω_ig` and times in units of `1/ω_ig`.
//! Evolution runs in the frame rotating with the two conserved charges
//!
//! ```text
//! Q₁ = a†_L a_L + a†_R a_R + σ_ii,     Q₂ = a†_L a_L + σ_ee + σ_ii,
//! H_rot = H_T − ω_R Q₁ − ω_eg Q₂ − ω_g = Δ σ_ii + H_int + H_drive,
//! ```
//!
//! which is exactly the frame of the effective Hamiltonian. Populations and
//! `⟨H_T⟩` are the same in both frames.

use nalgebra::DVector;

use crate::effective::{evolve_effective, EffectiveParams};
use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, c, hermiticity_deviation, kron_all, transition, CMatrix, DensityMatrix,
    HermitianEigen, Level, ProductSpace, HERMITIAN_TOL,
};
use crate::observables::EnergyReport;
use crate::states::{gibbs_oscillator, qutrit_thermal, ThermalSpec};

pub const DEFAULT_OMEGA_G: f64 = 0.0;
pub const DEFAULT_OMEGA_E: f64 = 0.05;
pub const DEFAULT_OMEGA_I: f64 = 1.0;
pub const DEFAULT_DETUNING: f64 = 0.01;

/// Every parameter of the full Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub omega_g: f64,
    pub omega_e: f64,
    pub omega_i: f64,
    pub delta: f64,
    pub omega_l_coupling: f64,
    pub omega_r_coupling: f64,
    pub m_drive: i64,
    pub n_drive: i64,
    pub n_left: usize,
    pub n_right: usize,
}

impl SystemSpec {
    /// Default level scheme with `Δ / max(Ω_L, Ω_R) = ratio` and `Ω_R/Ω_L = χ`.
    pub fn dispersive(chi: f64, ratio: f64, n_left: usize, n_right: usize) -> Result<Self> {
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::param(
                "chi",
                format!("must be finite and > 0, got {chi}"),
            ));
        }
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::param(
                "ratio",
                format!("must be finite and > 0, got {ratio}"),
            ));
        }
        let strongest = DEFAULT_DETUNING / ratio;
        let (omega_l, omega_r) = if chi <= 1.0 {
            (strongest, chi * strongest)
        } else {
            (strongest / chi, strongest)
        };
        let spec = Self {
            omega_g: DEFAULT_OMEGA_G,
            omega_e: DEFAULT_OMEGA_E,
            omega_i: DEFAULT_OMEGA_I,
            delta: DEFAULT_DETUNING,
            omega_l_coupling: omega_l,
            omega_r_coupling: omega_r,
            m_drive: 0,
            n_drive: -1,
            n_left,
            n_right,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_drive(self, m_drive: i64, n_drive: i64) -> Self {
        Self {
            m_drive,
            n_drive,
            ..self
        }
    }

    pub fn with_couplings(self, omega_l: f64, omega_r: f64) -> Self {
        Self {
            omega_l_coupling: omega_l,
            omega_r_coupling: omega_r,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_g < self.omega_e && self.omega_e < self.omega_i) {
            return Err(Error::param(
                "omega",
                format!(
                    "levels must satisfy ω_g < ω_e < ω_i, got ({}, {}, {})",
                    self.omega_g, self.omega_e, self.omega_i
                ),
            ));
        }
        if self.delta.is_nan() || self.delta <= 0.0 || self.delta >= self.omega_i - self.omega_e {
            return Err(Error::param(
                "delta",
                format!(
                    "must lie in (0, ω_ie) so both modes have positive frequency, got {}",
                    self.delta
                ),
            ));
        }
        if self.omega_l_coupling < 0.0 || self.omega_r_coupling < 0.0 {
            return Err(Error::param("coupling", "couplings must be >= 0"));
        }
        if self.n_left < 2 || self.n_right < 2 {
            return Err(Error::InvalidDimension(format!(
                "mode cutoffs must be >= 2, got ({}, {})",
                self.n_left, self.n_right
            )));
        }
        Ok(())
    }

    pub fn space(&self) -> ProductSpace {
        ProductSpace {
            n_left: self.n_left,
            levels: 3,
            n_right: self.n_right,
        }
    }

    pub fn omega_ig(&self) -> f64 {
        self.omega_i - self.omega_g
    }

    pub fn omega_ie(&self) -> f64 {
        self.omega_i - self.omega_e
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_e - self.omega_g
    }

    /// `ω_L = ω_ig − Δ`.
    pub fn omega_l(&self) -> f64 {
        self.omega_ig() - self.delta
    }

    /// `ω_R = ω_ie − Δ`.
    pub fn omega_r(&self) -> f64 {
        self.omega_ie() - self.delta
    }

    /// `λ = Ω_L Ω_R / Δ`.
    pub fn lambda_eff(&self) -> f64 {
        self.omega_l_coupling * self.omega_r_coupling / self.delta
    }

    pub fn dispersive_ratio(&self) -> f64 {
        self.delta / self.omega_l_coupling.max(self.omega_r_coupling)
    }

    /// The matching effective-model parameters.
    pub fn effective_params(&self) -> Result<EffectiveParams> {
        EffectiveParams::new(
            self.omega_l_coupling,
            self.omega_r_coupling,
            self.delta,
            self.m_drive,
            self.n_drive,
        )
    }

    /// Coefficient of `σ_z / 2` in the Stark drive,
    /// `(Ω_R²/Δ)(N+1) − (Ω_L²/Δ)M`.
    pub fn drive_splitting(&self) -> f64 {
        (self.omega_r_coupling.powi(2) * (self.n_drive as f64 + 1.0)
            - self.omega_l_coupling.powi(2) * self.m_drive as f64)
            / self.delta
    }
}

struct Operators {
    n_l: CMatrix,
    n_r: CMatrix,
    a_l: CMatrix,
    a_r: CMatrix,
    sigma: [[CMatrix; 3]; 3],
}

impl Operators {
    fn new(spec: &SystemSpec) -> Result<Self> {
        let (nl, nr) = (spec.n_left, spec.n_right);
        let il = CMatrix::identity(nl, nl);
        let iq = CMatrix::identity(3, 3);
        let ir = CMatrix::identity(nr, nr);
        let a_l = kron_all(&[&annihilation(nl)?, &iq, &ir])?;
        let a_r = kron_all(&[&il, &iq, &annihilation(nr)?])?;
        let sig = |j: usize, k: usize| kron_all(&[&il, &transition(3, j, k), &ir]);
        let sigma = [
            [sig(0, 0)?, sig(0, 1)?, sig(0, 2)?],
            [sig(1, 0)?, sig(1, 1)?, sig(1, 2)?],
            [sig(2, 0)?, sig(2, 1)?, sig(2, 2)?],
        ];
        Ok(Self {
            n_l: a_l.adjoint() * &a_l,
            n_r: a_r.adjoint() * &a_r,
            a_l,
            a_r,
            sigma,
        })
    }
}

const G: usize = 0;
const E: usize = 1;
const I: usize = 2;

/// Interaction plus drive, shared by the lab and rotating frames.
fn coupling_terms(ops: &Operators, spec: &SystemSpec) -> CMatrix {
    let s = &ops.sigma;
    let int_l = (&s[G][I] * ops.a_l.adjoint() + &s[I][G] * &ops.a_l) * c(spec.omega_l_coupling);
    let int_r = (&s[E][I] * ops.a_r.adjoint() + &s[I][E] * &ops.a_r) * c(spec.omega_r_coupling);
    let sigma_z = &s[E][E] - &s[G][G];
    int_l + int_r + sigma_z * c(0.5 * spec.drive_splitting())
}

/// Lab-frame `H_T = H_0^Λ + H_0^L + H_0^R + H_int^L + H_int^R + H_drive`.
pub fn build_full_hamiltonian(spec: &SystemSpec) -> Result<CMatrix> {
    spec.validate()?;
    let ops = Operators::new(spec)?;
    let s = &ops.sigma;
    let free = &s[G][G] * c(spec.omega_g)
        + &s[E][E] * c(spec.omega_e)
        + &s[I][I] * c(spec.omega_i)
        + &ops.n_l * c(spec.omega_l())
        + &ops.n_r * c(spec.omega_r());
    let h = free + coupling_terms(&ops, spec);
    check_hermitian(&h)?;
    Ok(h)
}

/// `H_rot = Δ σ_ii + H_int^L + H_int^R + H_drive`.
pub fn rotating_frame_hamiltonian(spec: &SystemSpec) -> Result<CMatrix> {
    spec.validate()?;
    let ops = Operators::new(spec)?;
    let h = &ops.sigma[I][I] * c(spec.delta) + coupling_terms(&ops, spec);
    check_hermitian(&h)?;
    Ok(h)
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let dev = hermiticity_deviation(h);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Diagonals of the conserved charges `(Q₁, Q₂)` in flat-index order.
pub fn conserved_charges(space: ProductSpace) -> Vec<(i64, i64)> {
    space
        .labels()
        .map(|l| {
            let (m, n) = (l.m as i64, l.n as i64);
            match l.level {
                Level::Ground => (m + n, m),
                Level::Excited => (m + n, m + 1),
                Level::Intermediate => (m + n + 1, m + 1),
            }
        })
        .collect()
}

/// Diagonal matrix of the total excitation number `Q₁`.
pub fn excitation_operator(space: ProductSpace) -> CMatrix {
    let q = conserved_charges(space);
    CMatrix::from_diagonal(&DVector::from_iterator(
        q.len(),
        q.iter().map(|&(q1, _)| c(q1 as f64)),
    ))
}

/// Unitary propagation under the full Hamiltonian, diagonalized once.
#[derive(Debug, Clone)]
pub struct FullEvolution {
    spec: SystemSpec,
    eigen: HermitianEigen,
}

impl FullEvolution {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        Ok(Self {
            spec: *spec,
            eigen: HermitianEigen::new(&rotating_frame_hamiltonian(spec)?)?,
        })
    }

    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let dim = self.spec.space().dim();
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho.dim(),
            });
        }
        Ok(DensityMatrix::from_matrix_unchecked(
            crate::hilbert::hermitize(&self.eigen.evolve(rho.matrix(), t)),
        ))
    }
}

/// `ρ(t) = U ρ U†` under the full Hamiltonian, in the rotating frame.
pub fn evolve_full(rho: &DensityMatrix, t: f64, spec: &SystemSpec) -> Result<DensityMatrix> {
    FullEvolution::new(spec)?.evolve(rho, t)
}

/// Gibbs state of the free Hamiltonian: thermal qutrit and thermal modes.
pub fn free_gibbs_state(spec: &SystemSpec, tbar: f64) -> Result<DensityMatrix> {
    let left = gibbs_oscillator(&ThermalSpec::new(tbar, spec.omega_l(), spec.n_left)?);
    let right = gibbs_oscillator(&ThermalSpec::new(tbar, spec.omega_r(), spec.n_right)?);
    let q = qutrit_thermal(tbar, spec.omega_g, spec.omega_e, spec.omega_i)?;
    left.tensor(&q)?.tensor(&right)
}

/// Largest deviations between effective and full dynamics over a time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveReport {
    pub max_dev_p_g: f64,
    pub max_dev_p_e: f64,
    pub max_dev_n_l: f64,
    pub max_dev_n_r: f64,
    /// Largest population of level `i` reached by the full dynamics.
    pub max_p_i: f64,
}

impl DispersiveReport {
    /// Largest battery-population deviation.
    pub fn max_population_deviation(&self) -> f64 {
        self.max_dev_p_g.max(self.max_dev_p_e)
    }
}

/// Runs both dynamics from `initial` and compares populations on `t_grid`.
pub fn dispersive_residual(
    spec: &SystemSpec,
    initial: &DensityMatrix,
    t_grid: &[f64],
) -> Result<DispersiveReport> {
    let full = FullEvolution::new(spec)?;
    let params = spec.effective_params()?;
    let space = spec.space();
    let mut report = DispersiveReport {
        max_dev_p_g: 0.0,
        max_dev_p_e: 0.0,
        max_dev_n_l: 0.0,
        max_dev_n_r: 0.0,
        max_p_i: 0.0,
    };
    for &t in t_grid {
        let f = EnergyReport::new(&full.evolve(initial, t)?, space)?;
        let e = EnergyReport::new(&evolve_effective(initial, space, t, &params)?, space)?;
        report.max_dev_p_g = report.max_dev_p_g.max((f.p_g - e.p_g).abs());
        report.max_dev_p_e = report.max_dev_p_e.max((f.p_e - e.p_e).abs());
        report.max_dev_n_l = report.max_dev_n_l.max((f.n_l - e.n_l).abs());
        report.max_dev_n_r = report.max_dev_n_r.max((f.n_r - e.n_r).abs());
        report.max_p_i = report.max_p_i.max(f.p_i);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{max_abs, ProductIndex};
    use crate::observables::purity;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn basis(spec: &SystemSpec, m: usize, level: Level, n: usize) -> DensityMatrix {
        let space = spec.space();
        DensityMatrix::basis(
            space.dim(),
            space.index(ProductIndex::new(m, level, n)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn free_spectrum() {
        let spec = SystemSpec::dispersive(1.0, 50.0, 3, 4)
            .unwrap()
            .with_couplings(0.0, 0.0);
        let h = build_full_hamiltonian(&spec).unwrap();
        assert!(hermiticity_deviation(&h) < 1e-12);
        for (k, l) in spec.space().labels().enumerate() {
            let w = [spec.omega_g, spec.omega_e, spec.omega_i][l.level.index()];
            let expected = w + l.m as f64 * spec.omega_l() + l.n as f64 * spec.omega_r();
            assert_abs_diff_eq!(h[(k, k)].re, expected, epsilon = 1e-14);
        }
        assert!(max_abs(&(&h - CMatrix::from_diagonal(&h.diagonal()))) == 0.0);
    }

    #[test]
    fn charges_commute_with_hamiltonian() {
        let spec = SystemSpec::dispersive(0.6, 5.0, 4, 3)
            .unwrap()
            .with_drive(2, 1);
        let h = build_full_hamiltonian(&spec).unwrap();
        let q1 = excitation_operator(spec.space());
        assert!(max_abs(&(&h * &q1 - &q1 * &h)) < 1e-12);
        let q = conserved_charges(spec.space());
        let q2 = CMatrix::from_diagonal(&DVector::from_iterator(
            q.len(),
            q.iter().map(|&(_, b)| c(b as f64)),
        ));
        assert!(max_abs(&(&h * &q2 - &q2 * &h)) < 1e-12);
        // The lab and rotating frames differ by a combination of the charges.
        let hr = rotating_frame_hamiltonian(&spec).unwrap();
        let id = CMatrix::identity(q.len(), q.len());
        let diff =
            &h - &hr - &q1 * c(spec.omega_r()) - &q2 * c(spec.omega_eg()) - id * c(spec.omega_g);
        assert!(max_abs(&diff) < 1e-13);
    }

    #[test]
    fn evolution_is_unitary() {
        let spec = SystemSpec::dispersive(1.0, 8.0, 4, 4).unwrap();
        let rho0 = basis(&spec, 1, Level::Ground, 0)
            .mix(&basis(&spec, 2, Level::Excited, 1), 0.3)
            .unwrap();
        let same = evolve_full(&rho0, 0.0, &spec).unwrap();
        assert!(max_abs(&(same.matrix() - rho0.matrix())) < 1e-12);
        let h = build_full_hamiltonian(&spec).unwrap();
        let e0 = (&h * rho0.matrix()).trace().re;
        for t in [10.0, 1e3, 3e4] {
            let rho = evolve_full(&rho0, t, &spec).unwrap();
            assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(purity(&rho), purity(&rho0), epsilon = 1e-9);
            assert_abs_diff_eq!((&h * rho.matrix()).trace().re, e0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dispersive_agreement_and_breakdown() {
        let spec = SystemSpec::dispersive(1.0, 50.0, 4, 4).unwrap();
        let rho0 = basis(&spec, 1, Level::Ground, 0);
        let period = 2.0 * PI / (2.0 * spec.lambda_eff());
        let grid: Vec<f64> = (0..=40).map(|k| k as f64 * period / 40.0).collect();
        let r = dispersive_residual(&spec, &rho0, &grid).unwrap();
        assert!(r.max_population_deviation() < 0.05, "{r:?}");
        assert!(r.max_p_i < 0.01);

        let strong = SystemSpec::dispersive(1.0, 3.0, 4, 4).unwrap();
        let r = dispersive_residual(&strong, &rho0, &grid_for(&strong)).unwrap();
        assert!(r.max_p_i > 0.05);

        let off = spec.with_couplings(1e-9, 1e-9);
        let r = dispersive_residual(&off, &rho0, &[0.0, 1e3, 1e5]).unwrap();
        assert!(r.max_population_deviation() < 1e-12);
    }

    fn grid_for(spec: &SystemSpec) -> Vec<f64> {
        let horizon = PI / spec.lambda_eff();
        (0..=400).map(|k| k as f64 * horizon / 400.0).collect()
    }

    #[test]
    fn drive_splitting_vanishes_without_drive() {
        let spec = SystemSpec::dispersive(0.3, 50.0, 3, 3).unwrap();
        assert_eq!(spec.drive_splitting(), 0.0);
        let driven = spec.with_drive(2, 0);
        let expected =
            (spec.omega_r_coupling.powi(2) - 2.0 * spec.omega_l_coupling.powi(2)) / spec.delta;
        assert_abs_diff_eq!(driven.drive_splitting(), expected, epsilon = 1e-18);
    }

    #[test]
    fn spec_validation() {
        assert!(SystemSpec::dispersive(0.0, 50.0, 4, 4).is_err());
        assert!(SystemSpec::dispersive(1.0, 50.0, 1, 4).is_err());
        let mut s = SystemSpec::dispersive(1.0, 50.0, 4, 4).unwrap();
        s.delta = 0.96;
        assert!(s.validate().is_err());
        assert_abs_diff_eq!(s.omega_l(), s.omega_ig() - s.delta, epsilon = 1e-12);
    }
}
