//! Exact evolution under the dispersive effective Hamiltonian
//!
//! ```text
//! H_LqR = −(Ω_L²/Δ)(a†_L a_L − M) σ_gg − (Ω_R²/Δ)(a†_R a_R − (N+1)) σ_ee
//!         − λ (a_L σ_eg a†_R + a†_L σ_ge a_R),          λ = Ω_L Ω_R / Δ
//! ```
//!
//! plus the Stark term `[(Ω_L²/Δ)(a†_L a_L + 1) + (Ω_R²/Δ)(a†_R a_R + 1)] σ_ii`
//! when the battery carries its upper level. The Hamiltonian is block
//! diagonal in the doublets `{|m,g,n⟩, |m−1,e,n+1⟩}`; every other basis
//! state of the truncated space is an eigenstate. Evolution therefore costs
//! `O(dim²)` and never touches a dense exponential.
//!
//! Times and frequencies share whatever unit the couplings are given in;
//! [`EffectiveParams::from_chi`] builds parameters with `λ` as the unit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{c, CMatrix, DensityMatrix, Level, ProductIndex, ProductSpace, ZERO};

/// Detuning-to-coupling ratio used by [`EffectiveParams::from_chi`].
pub const DEFAULT_DISPERSIVE_RATIO: f64 = 50.0;
/// Smallest `Δ / max(Ω_L, Ω_R)` considered dispersive.
pub const DISPERSIVE_THRESHOLD: f64 = 10.0;

/// Couplings, detuning and drive integers of the effective model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub omega_l_coupling: f64,
    pub omega_r_coupling: f64,
    pub detuning: f64,
    pub m_drive: i64,
    pub n_drive: i64,
}

impl EffectiveParams {
    pub fn new(
        omega_l_coupling: f64,
        omega_r_coupling: f64,
        detuning: f64,
        m_drive: i64,
        n_drive: i64,
    ) -> Result<Self> {
        for (name, v) in [
            ("omega_l_coupling", omega_l_coupling),
            ("omega_r_coupling", omega_r_coupling),
            ("detuning", detuning),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(Self {
            omega_l_coupling,
            omega_r_coupling,
            detuning,
            m_drive,
            n_drive,
        })
    }

    /// Parameters with a given `χ = Ω_R/Ω_L` and `λ`, at `Δ = 50 max(Ω_L, Ω_R)`.
    pub fn from_chi(chi: f64, lambda: f64, m_drive: i64, n_drive: i64) -> Result<Self> {
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::param(
                "chi",
                format!("must be finite and > 0, got {chi}"),
            ));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        let r = DEFAULT_DISPERSIVE_RATIO;
        let omega_l = if chi <= 1.0 {
            r * lambda / chi
        } else {
            r * lambda
        };
        let omega_r = chi * omega_l;
        let detuning = r * omega_l.max(omega_r);
        Self::new(omega_l, omega_r, detuning, m_drive, n_drive)
    }

    pub fn with_drive(&self, m_drive: i64, n_drive: i64) -> Self {
        Self {
            m_drive,
            n_drive,
            ..*self
        }
    }

    /// `λ = Ω_L Ω_R / Δ`.
    pub fn lambda_eff(&self) -> f64 {
        self.omega_l_coupling * self.omega_r_coupling / self.detuning
    }

    /// `χ = Ω_R / Ω_L`.
    pub fn chi(&self) -> f64 {
        self.omega_r_coupling / self.omega_l_coupling
    }

    pub fn is_dispersive(&self) -> bool {
        self.detuning >= DISPERSIVE_THRESHOLD * self.omega_l_coupling.max(self.omega_r_coupling)
    }

    /// Stark shift `Ω_L²/Δ = λ/χ` per left-mode excitation.
    fn shift_l(&self) -> f64 {
        self.omega_l_coupling * self.omega_l_coupling / self.detuning
    }

    /// Stark shift `Ω_R²/Δ = λχ` per right-mode excitation.
    fn shift_r(&self) -> f64 {
        self.omega_r_coupling * self.omega_r_coupling / self.detuning
    }

    /// Diagonal energy of `|m, j, n⟩` under the effective Hamiltonian.
    pub fn diagonal_energy(&self, idx: ProductIndex) -> f64 {
        let (m, n) = (idx.m as f64, idx.n as f64);
        match idx.level {
            Level::Ground => -self.shift_l() * (m - self.m_drive as f64),
            Level::Excited => -self.shift_r() * (n - (self.n_drive as f64 + 1.0)),
            Level::Intermediate => self.shift_l() * (m + 1.0) + self.shift_r() * (n + 1.0),
        }
    }
}

/// `Δ_mn = λ(χ⁻¹(m − M) − χ(n − N))`.
pub fn doublet_detuning(m: usize, n: usize, p: &EffectiveParams) -> f64 {
    let chi = p.chi();
    p.lambda_eff() * ((m as f64 - p.m_drive as f64) / chi - chi * (n as f64 - p.n_drive as f64))
}

/// `Ω_mn = √(4m(n+1)λ² + Δ_mn²)`.
pub fn doublet_rabi(m: usize, n: usize, p: &EffectiveParams) -> f64 {
    let lambda = p.lambda_eff();
    let delta = doublet_detuning(m, n, p);
    (4.0 * m as f64 * (n as f64 + 1.0) * lambda * lambda + delta * delta).sqrt()
}

/// Analytic propagator of one doublet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubletAmplitudes {
    pub m: usize,
    pub n: usize,
    pub delta_mn: f64,
    pub omega_mn: f64,
    pub a: Complex64,
    pub b: Complex64,
    /// Mean doublet energy `(E_g + E_e)/2`; the block propagator carries the
    /// global phase `e^{−i Ē t}`.
    pub mean_energy: f64,
    pub t: f64,
}

impl DoubletAmplitudes {
    /// Transfer probability `|B_mn(t)|²`.
    pub fn transfer(&self) -> f64 {
        self.b.norm_sqr()
    }

    /// Block propagator in the basis `(|m,g,n⟩, |m−1,e,n+1⟩)`.
    pub fn block(&self) -> [[Complex64; 2]; 2] {
        let phase = Complex64::from_polar(1.0, -self.mean_energy * self.t);
        [
            [phase * self.a, phase * self.b],
            [phase * self.b, phase * self.a.conj()],
        ]
    }
}

/// `A_mn(t) = cos(Ωt/2) + i(Δ/Ω) sin(Ωt/2)`, `B_mn(t) = i (2λ√(m(n+1))/Ω) sin(Ωt/2)`.
pub fn amplitudes(m: usize, n: usize, t: f64, p: &EffectiveParams) -> DoubletAmplitudes {
    let lambda = p.lambda_eff();
    let delta = doublet_detuning(m, n, p);
    let omega = doublet_rabi(m, n, p);
    let coupling = 2.0 * lambda * (m as f64 * (n as f64 + 1.0)).sqrt();
    let (s, cs) = (0.5 * omega * t).sin_cos();
    let (a, b) = if omega == 0.0 {
        (c(1.0), ZERO)
    } else {
        (
            Complex64::new(cs, delta / omega * s),
            Complex64::new(0.0, coupling / omega * s),
        )
    };
    let e_g = p.diagonal_energy(ProductIndex::new(m, Level::Ground, n));
    let e_e = p.diagonal_energy(ProductIndex::new(
        m.saturating_sub(1),
        Level::Excited,
        n + 1,
    ));
    DoubletAmplitudes {
        m,
        n,
        delta_mn: delta,
        omega_mn: omega,
        a,
        b,
        mean_energy: 0.5 * (e_g + e_e),
        t,
    }
}

/// Non-trivial eigenvalues `(E_g/λ, E_e/λ) = ((M − m)/χ, χ(N − n))`.
pub fn selective_eigenvalues(m: usize, n: usize, p: &EffectiveParams) -> (f64, f64) {
    let chi = p.chi();
    (
        (p.m_drive as f64 - m as f64) / chi,
        chi * (p.n_drive as f64 - n as f64),
    )
}

/// Time of maximal transfer in a doublet, `π/Ω_mn`.
pub fn optimal_tau(m: usize, n: usize, p: &EffectiveParams) -> f64 {
    PI / doublet_rabi(m, n, p)
}

/// The doublets `(m, n)` that fit inside a truncated space:
/// `1 ≤ m < n_left` and `n + 1 < n_right`.
pub fn active_doublets(n_left: usize, n_right: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n_left).flat_map(move |m| (0..n_right.saturating_sub(1)).map(move |n| (m, n)))
}

#[derive(Debug, Clone)]
enum Block {
    Single {
        index: usize,
        phase: Complex64,
    },
    Pair {
        g: usize,
        e: usize,
        u: [[Complex64; 2]; 2],
    },
}

/// Block-diagonal propagator `exp(−i H̃ t)` on a truncated product space.
#[derive(Debug, Clone)]
pub struct EffectivePropagator {
    space: ProductSpace,
    blocks: Vec<Block>,
}

impl EffectivePropagator {
    pub fn new(space: ProductSpace, t: f64, p: &EffectiveParams) -> Self {
        let mut paired = vec![false; space.dim()];
        let mut blocks = Vec::with_capacity(space.dim());
        for (m, n) in active_doublets(space.n_left, space.n_right) {
            let g = space
                .index(ProductIndex::new(m, Level::Ground, n))
                .expect("active doublet in range");
            let e = space
                .index(ProductIndex::new(m - 1, Level::Excited, n + 1))
                .expect("active doublet in range");
            paired[g] = true;
            paired[e] = true;
            blocks.push(Block::Pair {
                g,
                e,
                u: amplitudes(m, n, t, p).block(),
            });
        }
        for (index, label) in space.labels().enumerate() {
            if !paired[index] {
                let phase = Complex64::from_polar(1.0, -p.diagonal_energy(label) * t);
                blocks.push(Block::Single { index, phase });
            }
        }
        Self { space, blocks }
    }

    pub fn space(&self) -> ProductSpace {
        self.space
    }

    /// The propagator as a dense matrix.
    pub fn to_dense(&self) -> CMatrix {
        let mut u = CMatrix::zeros(self.space.dim(), self.space.dim());
        for block in &self.blocks {
            match *block {
                Block::Single { index, phase } => u[(index, index)] = phase,
                Block::Pair { g, e, u: b } => {
                    u[(g, g)] = b[0][0];
                    u[(g, e)] = b[0][1];
                    u[(e, g)] = b[1][0];
                    u[(e, e)] = b[1][1];
                }
            }
        }
        u
    }

    /// `U ρ U†`, applied block by block.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let dim = self.space.dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho.nrows(),
            });
        }
        // Left multiplication mixes rows within each block.
        let mut w = rho.clone();
        for block in &self.blocks {
            match *block {
                Block::Single { index, phase } => {
                    w.row_mut(index).iter_mut().for_each(|z| *z *= phase);
                }
                Block::Pair { g, e, u } => {
                    for col in 0..dim {
                        let (x, y) = (rho[(g, col)], rho[(e, col)]);
                        w[(g, col)] = u[0][0] * x + u[0][1] * y;
                        w[(e, col)] = u[1][0] * x + u[1][1] * y;
                    }
                }
            }
        }
        // Right multiplication by U† mixes columns.
        let mut out = w.clone();
        for block in &self.blocks {
            match *block {
                Block::Single { index, phase } => {
                    let pc = phase.conj();
                    out.column_mut(index).iter_mut().for_each(|z| *z *= pc);
                }
                Block::Pair { g, e, u } => {
                    for row in 0..dim {
                        let (x, y) = (w[(row, g)], w[(row, e)]);
                        out[(row, g)] = x * u[0][0].conj() + y * u[0][1].conj();
                        out[(row, e)] = x * u[1][0].conj() + y * u[1][1].conj();
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Evolves a state on `L ⊗ q ⊗ R` for a time `t` under the effective Hamiltonian.
pub fn evolve_effective(
    rho: &DensityMatrix,
    space: ProductSpace,
    t: f64,
    p: &EffectiveParams,
) -> Result<DensityMatrix> {
    let out = EffectivePropagator::new(space, t, p).apply(rho.matrix())?;
    Ok(DensityMatrix::from_matrix_unchecked(
        crate::hilbert::hermitize(&out),
    ))
}

fn check_distribution(name: &'static str, p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || (total - 1.0).abs() > 1e-10 || p.iter().any(|&x| x < -1e-12) {
        return Err(Error::param(
            name,
            format!("must be a normalized distribution, sums to {total}"),
        ));
    }
    Ok(())
}

/// Qubit energy change `ΔU = 2 Σ_{mn} (P(m,n) p_g − P(m−1,n+1) p_e) |B_mn(τ)|²`
/// in units of `ħω_eg`, for a charger with joint Fock populations
/// `P(m, n)` (rows `m`, columns `n`) and a diagonal qubit.
pub fn delta_u_joint(joint: &DMatrix<f64>, pq: (f64, f64), tau: f64, p: &EffectiveParams) -> f64 {
    let (n_left, n_right) = joint.shape();
    active_doublets(n_left, n_right)
        .map(|(m, n)| {
            let s = joint[(m, n)] * pq.0 - joint[(m - 1, n + 1)] * pq.1;
            if s == 0.0 {
                0.0
            } else {
                s * amplitudes(m, n, tau, p).transfer()
            }
        })
        .sum::<f64>()
        * 2.0
}

/// Qubit energy change for a product of diagonal inputs, in units of `ħω_eg`.
pub fn delta_u_q(
    pl: &[f64],
    pq: (f64, f64),
    pr: &[f64],
    tau: f64,
    p: &EffectiveParams,
) -> Result<f64> {
    check_distribution("p_left", pl)?;
    check_distribution("p_right", pr)?;
    check_distribution("p_qubit", &[pq.0, pq.1])?;
    let mut sum = 0.0;
    for (m, n) in active_doublets(pl.len(), pr.len()) {
        let s = pl[m] * pq.0 * pr[n] - pl[m - 1] * pq.1 * pr[n + 1];
        sum += s * amplitudes(m, n, tau, p).transfer();
    }
    Ok(2.0 * sum)
}

/// Raw-energy matrix `S_mn = p^L_m p_g p^R_n − p^L_{m−1} p_e p^R_{n+1}`.
///
/// The grid covers `1 ≤ m ≤ N_L` and `0 ≤ n < N_R`, treating populations
/// outside the truncation as zero, so the matrix holds every non-zero
/// element and its total equals `p_g(1 − p^L_0) − p_e(1 − p^R_0)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEnergyMatrix {
    /// Row `m − 1`, column `n`.
    values: DMatrix<f64>,
}

impl RawEnergyMatrix {
    pub fn new(pl: &[f64], pq: (f64, f64), pr: &[f64]) -> Result<Self> {
        check_distribution("p_left", pl)?;
        check_distribution("p_right", pr)?;
        check_distribution("p_qubit", &[pq.0, pq.1])?;
        let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        let values = DMatrix::from_fn(pl.len(), pr.len(), |row, n| {
            let m = row + 1;
            at(pl, m) * pq.0 * pr[n] - pl[m - 1] * pq.1 * at(pr, n + 1)
        });
        Ok(Self { values })
    }

    /// `S_mn` for `m ≥ 1`; zero outside the grid.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        if m == 0 || m > self.values.nrows() || n >= self.values.ncols() {
            0.0
        } else {
            self.values[(m - 1, n)]
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

pub fn raw_energy_matrix(pl: &[f64], pq: (f64, f64), pr: &[f64]) -> Result<RawEnergyMatrix> {
    RawEnergyMatrix::new(pl, pq, pr)
}

/// Closed form of `Σ S_mn = p_g(1 − p^L_0) − p_e(1 − p^R_0)`.
pub fn raw_energy_total(p_left_vacuum: f64, pq: (f64, f64), p_right_vacuum: f64) -> f64 {
    pq.0 * (1.0 - p_left_vacuum) - pq.1 * (1.0 - p_right_vacuum)
}
