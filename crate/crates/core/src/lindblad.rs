//! Thermal Lindblad dynamics of the full system,
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_μ γ⁺_μ D[l⁺_μ]ρ + γ⁻_μ D[l⁻_μ]ρ,
//! D[l]ρ = l ρ l† − ½{l†l, ρ},
//! ```
//!
//! over the channels `μ ∈ {ig, ie, L, R}` with thermal rates
//! `γ⁺ = γ₀ n̄(ω_μ)`, `γ⁻ = γ₀ (n̄(ω_μ) + 1)`. The `e ↔ g` channel is off
//! unless requested.
//!
//! Every jump operator shifts the conserved charges `(Q₁, Q₂)` by a fixed
//! amount, so the dissipators are unchanged in the rotating frame of
//! [`crate::fulldyn`] and the equation is integrated there. The same
//! property means an entry `ρ_ab` only ever feeds entries with the same
//! charge difference `q(a) − q(b)`: the integrator propagates only the
//! differences present in the initial state, which for a diagonal initial
//! state leaves a few thousand entries instead of `dim²`.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fulldyn::{conserved_charges, rotating_frame_hamiltonian, SystemSpec};
use crate::hilbert::{
    annihilation, kron_all, transition, CMatrix, DensityMatrix, SparseMatrix, I, ZERO,
};

/// Largest trace change tolerated over one step.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Most negative eigenvalue tolerated at output times.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

/// `n̄(ω) = 1/(e^{ω/T̄} − 1)`, zero at `T̄ = 0`.
pub fn bose_einstein(omega_bar: f64, tbar: f64) -> f64 {
    if tbar <= 0.0 {
        0.0
    } else {
        1.0 / (omega_bar / tbar).exp_m1()
    }
}

/// Bath coupling: a common bare rate `γ₀` (in `1/ω_ig` units) and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationSpec {
    pub gamma0: f64,
    pub tbar: f64,
    /// Adds the `e ↔ g` channel, normally omitted.
    pub include_eg: bool,
}

impl DissipationSpec {
    pub fn new(gamma0: f64, tbar: f64) -> Result<Self> {
        if !(gamma0.is_finite() && gamma0 >= 0.0) {
            return Err(Error::param(
                "gamma0",
                format!("must be finite and >= 0, got {gamma0}"),
            ));
        }
        if !(tbar.is_finite() && tbar >= 0.0) {
            return Err(Error::param(
                "tbar",
                format!("must be finite and >= 0, got {tbar}"),
            ));
        }
        Ok(Self {
            gamma0,
            tbar,
            include_eg: false,
        })
    }

    /// `γ₀ = gamma_over_lambda · λ` for the given system.
    pub fn in_lambda_units(gamma_over_lambda: f64, spec: &SystemSpec, tbar: f64) -> Result<Self> {
        Self::new(gamma_over_lambda * spec.lambda_eff(), tbar)
    }

    pub fn with_eg_channel(self, include_eg: bool) -> Self {
        Self { include_eg, ..self }
    }
}

/// One dissipation channel with its raising and lowering jump operators.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: &'static str,
    pub omega: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub raise: SparseMatrix,
    pub lower: SparseMatrix,
}

/// The thermal channels of the system with their rates.
pub fn channels(spec: &SystemSpec, diss: &DissipationSpec) -> Result<Vec<Channel>> {
    let (nl, nr) = (spec.n_left, spec.n_right);
    let il = CMatrix::identity(nl, nl);
    let iq = CMatrix::identity(3, 3);
    let ir = CMatrix::identity(nr, nr);
    let sig = |j: usize, k: usize| kron_all(&[&il, &transition(3, j, k), &ir]);
    let a_l = kron_all(&[&annihilation(nl)?, &iq, &ir])?;
    let a_r = kron_all(&[&il, &iq, &annihilation(nr)?])?;
    let mut list = vec![
        ("ig", spec.omega_ig(), sig(2, 0)?, sig(0, 2)?),
        ("ie", spec.omega_ie(), sig(2, 1)?, sig(1, 2)?),
        ("L", spec.omega_l(), a_l.adjoint(), a_l),
        ("R", spec.omega_r(), a_r.adjoint(), a_r),
    ];
    if diss.include_eg {
        list.push(("eg", spec.omega_eg(), sig(1, 0)?, sig(0, 1)?));
    }
    Ok(list
        .into_iter()
        .map(|(name, omega, raise, lower)| {
            let nbar = bose_einstein(omega, diss.tbar);
            Channel {
                name,
                omega,
                gamma_plus: diss.gamma0 * nbar,
                gamma_minus: diss.gamma0 * (nbar + 1.0),
                raise: SparseMatrix::from_dense(&raise),
                lower: SparseMatrix::from_dense(&lower),
            }
        })
        .collect())
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Truncated Taylor series of the propagator `e^{hL}`, with terms added
    /// until they drop below `1e-15`.
    Taylor,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Upper bound on `h · ‖L‖`, where `‖L‖` is a row-sum bound of the generator.
    pub step_scale: f64,
    /// Optional absolute cap on the step.
    pub max_step: Option<f64>,
    /// How many times a step may be halved to meet the drift bound.
    pub max_halvings: u32,
    /// Check the eigenvalue floor at each output time.
    pub check_positivity: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::Taylor,
            step_scale: 1.0,
            max_step: None,
            max_halvings: 8,
            check_positivity: true,
        }
    }
}

impl IntegratorOptions {
    pub fn rk4() -> Self {
        Self {
            method: Method::Rk4,
            step_scale: 0.2,
            ..Self::default()
        }
    }
}

/// Generator `L` restricted to the charge-difference sectors of one state.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    /// `H − (i/2) Σ γ l†l`, row-sparse.
    h_eff: SparseMatrix,
    /// `√γ l` for every jump with a non-zero rate.
    jumps: Vec<SparseMatrix>,
    /// Propagated entries `(a, b)` in row-major order.
    entries: Vec<(usize, usize)>,
    /// Flat `a·dim + b` → position in `entries`, `usize::MAX` when absent.
    position: Vec<usize>,
    /// Position of the transposed entry.
    transpose: Vec<usize>,
    norm_bound: f64,
}

impl Liouvillian {
    /// Builds the generator for all entries reachable from `rho0`.
    pub fn new(spec: &SystemSpec, diss: &DissipationSpec, rho0: &CMatrix) -> Result<Self> {
        let space = spec.space();
        let dim = space.dim();
        if rho0.nrows() != dim || rho0.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho0.nrows(),
            });
        }
        let h = rotating_frame_hamiltonian(spec)?;
        let mut h_eff = SparseMatrix::from_dense(&h);
        let mut jumps = Vec::new();
        for ch in channels(spec, diss)? {
            for (rate, op) in [(ch.gamma_plus, ch.raise), (ch.gamma_minus, ch.lower)] {
                if rate == 0.0 {
                    continue;
                }
                // l†l, accumulated row by row of l†.
                let adj = op.adjoint();
                for r in 0..dim {
                    for &(k, vk) in adj.row(r) {
                        for &(col, v) in op.row(k) {
                            h_eff.push(r, col, -I * vk * v * (0.5 * rate));
                        }
                    }
                }
                let mut scaled = SparseMatrix::zeros(dim, dim);
                for r in 0..dim {
                    for &(col, v) in op.row(r) {
                        scaled.push(r, col, v * rate.sqrt());
                    }
                }
                jumps.push(scaled);
            }
        }

        let charges = conserved_charges(space);
        let mut sectors = HashSet::new();
        for a in 0..dim {
            for b in 0..dim {
                if rho0[(a, b)] != ZERO {
                    sectors.insert((charges[a].0 - charges[b].0, charges[a].1 - charges[b].1));
                }
            }
        }
        let mut entries = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                let d = (charges[a].0 - charges[b].0, charges[a].1 - charges[b].1);
                if sectors.contains(&d) {
                    entries.push((a, b));
                }
            }
        }
        let mut position = vec![usize::MAX; dim * dim];
        for (k, &(a, b)) in entries.iter().enumerate() {
            position[a * dim + b] = k;
        }
        let transpose = entries
            .iter()
            .map(|&(a, b)| position[b * dim + a])
            .collect();

        let row_bound = |m: &SparseMatrix| {
            (0..dim)
                .map(|r| m.row(r).iter().map(|(_, v)| v.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let col_bound = |m: &SparseMatrix| row_bound(&m.adjoint());
        let norm_bound = 2.0 * row_bound(&h_eff)
            + jumps
                .iter()
                .map(|j| row_bound(j) * col_bound(j))
                .sum::<f64>();

        Ok(Self {
            dim,
            h_eff,
            jumps,
            entries,
            position,
            transpose,
            norm_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of propagated density-matrix entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Row-sum bound on the generator norm.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn pack(&self, rho: &CMatrix) -> Vec<Complex64> {
        self.entries.iter().map(|&(a, b)| rho[(a, b)]).collect()
    }

    pub fn unpack(&self, x: &[Complex64]) -> CMatrix {
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        for (&(a, b), &v) in self.entries.iter().zip(x) {
            rho[(a, b)] = v;
        }
        rho
    }

    fn at(&self, x: &[Complex64], a: usize, b: usize) -> Complex64 {
        match self.position[a * self.dim + b] {
            usize::MAX => ZERO,
            k => x[k],
        }
    }

    /// `out = L x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (k, &(a, b)) in self.entries.iter().enumerate() {
            let mut acc = ZERO;
            // −i (H_eff ρ − ρ H_eff†)
            for &(col, v) in self.h_eff.row(a) {
                acc -= I * v * self.at(x, col, b);
            }
            for &(col, v) in self.h_eff.row(b) {
                acc += I * self.at(x, a, col) * v.conj();
            }
            // Σ l ρ l†
            for jump in &self.jumps {
                for &(ka, va) in jump.row(a) {
                    for &(kb, vb) in jump.row(b) {
                        acc += va * self.at(x, ka, kb) * vb.conj();
                    }
                }
            }
            out[k] = acc;
        }
    }

    fn trace(&self, x: &[Complex64]) -> f64 {
        self.entries
            .iter()
            .zip(x)
            .filter(|((a, b), _)| a == b)
            .map(|(_, v)| v.re)
            .sum()
    }

    fn symmetrize(&self, x: &mut [Complex64]) {
        for k in 0..x.len() {
            let kt = self.transpose[k];
            if kt >= k {
                let v = 0.5 * (x[k] + x[kt].conj());
                x[k] = v;
                x[kt] = v.conj();
            }
        }
    }

    fn taylor_step(&self, x: &[Complex64], h: f64) -> Vec<Complex64> {
        let mut sum = x.to_vec();
        let mut term = x.to_vec();
        let mut next = vec![ZERO; x.len()];
        for k in 1..=60 {
            self.apply(&term, &mut next);
            let scale = h / k as f64;
            let mut largest: f64 = 0.0;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * scale;
                largest = largest.max(t.norm());
            }
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            if largest < 1e-15 {
                break;
            }
        }
        sum
    }

    fn rk4_step(&self, x: &[Complex64], h: f64) -> Vec<Complex64> {
        let n = x.len();
        let mut k1 = vec![ZERO; n];
        let mut k2 = vec![ZERO; n];
        let mut k3 = vec![ZERO; n];
        let mut k4 = vec![ZERO; n];
        let shifted = |k: &[Complex64], f: f64| -> Vec<Complex64> {
            x.iter().zip(k).map(|(a, b)| a + b * f).collect()
        };
        self.apply(x, &mut k1);
        self.apply(&shifted(&k1, 0.5 * h), &mut k2);
        self.apply(&shifted(&k2, 0.5 * h), &mut k3);
        self.apply(&shifted(&k3, h), &mut k4);
        (0..n)
            .map(|i| x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
            .collect()
    }

    fn step(&self, x: &[Complex64], h: f64, method: Method) -> Vec<Complex64> {
        let mut out = match method {
            Method::Taylor => self.taylor_step(x, h),
            Method::Rk4 => self.rk4_step(x, h),
        };
        self.symmetrize(&mut out);
        out
    }
}

/// `dρ/dt` at `ρ`, returned as a dense matrix.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    spec: &SystemSpec,
    diss: &DissipationSpec,
) -> Result<CMatrix> {
    let gen = Liouvillian::new(spec, diss, rho.matrix())?;
    let x = gen.pack(rho.matrix());
    let mut out = vec![ZERO; x.len()];
    gen.apply(&x, &mut out);
    Ok(gen.unpack(&out))
}

/// Integrates from `rho0` and hands the state at each time of `t_grid` to
/// `observe`. `t_grid` must be non-decreasing and start at or after zero.
pub fn integrate_observed<T>(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    spec: &SystemSpec,
    diss: &DissipationSpec,
    opts: &IntegratorOptions,
    mut observe: impl FnMut(f64, &DensityMatrix) -> Result<T>,
) -> Result<Vec<T>> {
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param(
            "t_grid",
            "must be non-negative and non-decreasing",
        ));
    }
    let gen = Liouvillian::new(spec, diss, rho0.matrix())?;
    let mut h_max = opts.step_scale / gen.norm_bound().max(1e-300);
    if let Some(cap) = opts.max_step {
        h_max = h_max.min(cap);
    }
    let mut x = gen.pack(rho0.matrix());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        while t < target {
            let remaining = target - t;
            let mut h = h_max.min(remaining);
            let tr0 = gen.trace(&x);
            let mut halvings = 0;
            let next = loop {
                let candidate = gen.step(&x, h, opts.method);
                let drift = (gen.trace(&candidate) - tr0).abs();
                if drift <= TRACE_DRIFT_TOL {
                    break candidate;
                }
                if halvings >= opts.max_halvings {
                    return Err(Error::IntegratorTolerance(format!(
                        "trace drift {drift:.3e} at t = {t} with step {h:.3e}"
                    )));
                }
                halvings += 1;
                h *= 0.5;
            };
            x = next;
            // Land exactly on the output time despite rounding.
            t = if h == remaining { target } else { t + h };
        }
        let rho = DensityMatrix::from_matrix_unchecked(gen.unpack(&x));
        if opts.check_positivity {
            let min = rho.min_eigenvalue()?;
            if min < POSITIVITY_FLOOR {
                return Err(Error::NegativeEigenvalue { value: min });
            }
        }
        out.push(observe(target, &rho)?);
    }
    Ok(out)
}

/// Trajectory of states at every time of `t_grid`.
pub fn integrate(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    spec: &SystemSpec,
    diss: &DissipationSpec,
) -> Result<Vec<DensityMatrix>> {
    integrate_observed(
        rho0,
        t_grid,
        spec,
        diss,
        &IntegratorOptions::default(),
        |_, rho| Ok(rho.clone()),
    )
}
