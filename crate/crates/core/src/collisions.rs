//! Collisional charging of a string of batteries by one persistent charger.
//!
//! Fresh two-level batteries meet the two-mode charger one at a time. Each
//! collision picks the drive integers `(M, N)` that select the most
//! profitable doublet family, evolves the joint state under the effective
//! Hamiltonian for the time that maximizes the energy gain, and discards
//! the battery. The charger keeps every correlation it builds up.
//!
//! Because the batteries arrive diagonal, `n_R + σ_gg` is conserved and the
//! charger stays block diagonal in the right-mode Fock number; this keeps
//! the entropy bookkeeping cheap.

use nalgebra::DMatrix;

use crate::effective::{
    active_doublets, delta_u_joint, doublet_rabi, EffectiveParams, EffectivePropagator,
};
use crate::error::{Error, Result};
use crate::hilbert::{c, partial_trace_matrix, CMatrix, DensityMatrix, ProductSpace};
use crate::observables::{mutual_information, purity, qubit_energy};

/// Points in the coarse scan of the interaction time.
pub const TAU_GRID_POINTS: usize = 400;
/// Relative tolerance of the golden-section refinement.
pub const TAU_REL_TOL: f64 = 1e-8;
/// Extractable raw energy below which the charger counts as drained.
pub const DRAINED_EPS: f64 = 1e-10;
/// Population tolerated on the two highest Fock levels at the end of a chain.
pub const TAIL_AUDIT_TOL: f64 = 1e-6;
/// Population below which a Fock level counts as empty when scanning families.
pub const POPULATED_TOL: f64 = 1e-12;

/// Two-mode charger state `ρ^{RL}` on `L ⊗ R`, left mode slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargerState {
    rho: DensityMatrix,
    n_left: usize,
    n_right: usize,
}

impl ChargerState {
    pub fn new(rho: DensityMatrix, n_left: usize, n_right: usize) -> Result<Self> {
        if rho.dim() != n_left * n_right {
            return Err(Error::DimensionMismatch {
                expected: n_left * n_right,
                found: rho.dim(),
            });
        }
        rho.validate()?;
        Ok(Self {
            rho,
            n_left,
            n_right,
        })
    }

    /// Uncorrelated charger `ρ_L ⊗ ρ_R`.
    pub fn product(left: &DensityMatrix, right: &DensityMatrix) -> Result<Self> {
        Self::new(left.tensor(right)?, left.dim(), right.dim())
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    /// `p(m, m′, n, n′) = ⟨m, n|ρ^{RL}|m′, n′⟩`.
    pub fn joint(&self, m: usize, mp: usize, n: usize, np: usize) -> num_complex::Complex64 {
        self.rho.matrix()[(m * self.n_right + n, mp * self.n_right + np)]
    }

    /// Joint Fock populations `P(m, n)`, rows `m`.
    pub fn joint_populations(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_left, self.n_right, |m, n| self.joint(m, m, n, n).re)
    }

    pub fn left(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(
            partial_trace_matrix(self.rho.matrix(), &[0], &[self.n_left, self.n_right])
                .expect("charger dims"),
        )
    }

    pub fn right(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(
            partial_trace_matrix(self.rho.matrix(), &[1], &[self.n_left, self.n_right])
                .expect("charger dims"),
        )
    }

    pub fn left_populations(&self) -> Vec<f64> {
        self.joint_populations()
            .column_sum()
            .iter()
            .copied()
            .collect()
    }

    pub fn right_populations(&self) -> Vec<f64> {
        self.joint_populations().row_sum().iter().copied().collect()
    }

    pub fn mean_left(&self) -> f64 {
        mean_of(&self.left_populations())
    }

    pub fn mean_right(&self) -> f64 {
        mean_of(&self.right_populations())
    }

    /// `I(R:L)` in nats.
    pub fn mutual_information(&self) -> Result<f64> {
        mutual_information(&self.rho, [self.n_left, self.n_right])
    }
}

fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(k, v)| k as f64 * v).sum()
}

fn qubit_populations(qubit: &DensityMatrix) -> Result<(f64, f64)> {
    if qubit.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: qubit.dim(),
        });
    }
    let p = qubit.populations();
    Ok((p[0], p[1]))
}

/// Closed form `Σ S^{(k)}_mn = p_g(1 − p^L_00) − p_e(1 − p^R_00)`.
pub fn raw_energy_sum_k(charger: &ChargerState, pq: (f64, f64)) -> f64 {
    let p_l0 = charger.left_populations()[0];
    let p_r0 = charger.right_populations()[0];
    pq.0 * (1.0 - p_l0) - pq.1 * (1.0 - p_r0)
}

/// `Σ_{m≥1, n≥0} P(m,n) p_g − P(m−1,n+1) p_e` summed term by term.
pub fn raw_energy_sum_brute(charger: &ChargerState, pq: (f64, f64)) -> f64 {
    let joint = charger.joint_populations();
    let (nl, nr) = joint.shape();
    let at = |m: usize, n: usize| if m < nl && n < nr { joint[(m, n)] } else { 0.0 };
    let mut sum = 0.0;
    for m in 1..=nl {
        for n in 0..nr {
            sum += at(m, n) * pq.0 - at(m - 1, n + 1) * pq.1;
        }
    }
    sum
}

/// Which coupling asymmetry the chain runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `χ < 1`: the left-mode family `m = M` is selected.
    SmallChi,
    /// `χ = 1`: no drive, every doublet with `m = n + 1` is resonant.
    Resonant,
    /// `χ > 1`: the right-mode family `n = N` is selected.
    LargeChi,
}

impl Regime {
    pub fn from_chi(chi: f64) -> Self {
        if (chi - 1.0).abs() < 1e-12 {
            Regime::Resonant
        } else if chi < 1.0 {
            Regime::SmallChi
        } else {
            Regime::LargeChi
        }
    }
}

/// Best interaction time and the energy it delivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauChoice {
    pub tau: f64,
    pub delta_u: f64,
}

/// Maximizes the exact `ΔU(τ)` over `[0, 2π/Ω_min]`: a 400-point scan
/// followed by golden-section refinement around the best grid point.
pub fn optimal_collision_tau(
    charger: &ChargerState,
    pq: (f64, f64),
    p: &EffectiveParams,
) -> TauChoice {
    let joint = charger.joint_populations();
    let objective = |t: f64| delta_u_joint(&joint, pq, t, p);
    let omega_min = active_doublets(charger.n_left, charger.n_right)
        .map(|(m, n)| doublet_rabi(m, n, p))
        .fold(f64::INFINITY, f64::min);
    if !omega_min.is_finite() {
        return TauChoice {
            tau: 0.0,
            delta_u: 0.0,
        };
    }
    let horizon = 2.0 * std::f64::consts::PI / omega_min;
    let step = horizon / (TAU_GRID_POINTS - 1) as f64;
    let mut best = TauChoice {
        tau: 0.0,
        delta_u: 0.0,
    };
    let mut best_k = 0;
    for k in 0..TAU_GRID_POINTS {
        let t = k as f64 * step;
        let du = objective(t);
        if du > best.delta_u {
            best = TauChoice {
                tau: t,
                delta_u: du,
            };
            best_k = k;
        }
    }
    if best_k == 0 {
        return best;
    }
    let (mut a, mut b) = (
        (best_k - 1) as f64 * step,
        ((best_k + 1) as f64 * step).min(horizon),
    );
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while b - a > TAU_REL_TOL * horizon {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = objective(x1);
        }
    }
    let (t, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if f > best.delta_u {
        TauChoice { tau: t, delta_u: f }
    } else {
        best
    }
}

/// Drive integers chosen for one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub m_drive: i64,
    pub n_drive: i64,
    pub choice: TauChoice,
}

fn highest_populated(p: &[f64]) -> usize {
    p.iter().rposition(|&v| v > POPULATED_TOL).unwrap_or(0)
}

/// Picks `(M, N)` for the next collision, or `None` once the charger is drained.
///
/// `χ = 1` removes the drive. For `χ < 1` every `M` over the populated
/// left-mode range is tried with `N = round(⟨n_R⟩)`, and the one with the
/// largest optimal `ΔU` wins; `χ > 1` mirrors this over `N`. Ties go to the
/// smaller `|M| + |N|`.
pub fn select_mn(
    charger: &ChargerState,
    pq: (f64, f64),
    params: &EffectiveParams,
) -> Option<Selection> {
    if raw_energy_sum_k(charger, pq) <= DRAINED_EPS {
        return None;
    }
    let candidates: Vec<(i64, i64)> = match Regime::from_chi(params.chi()) {
        Regime::Resonant => vec![(0, -1)],
        Regime::SmallChi => {
            let top = (highest_populated(&charger.left_populations()) + 1).min(charger.n_left - 1);
            let n = charger.mean_right().round() as i64;
            (1..=top.max(1)).map(|m| (m as i64, n)).collect()
        }
        Regime::LargeChi => {
            let top = highest_populated(&charger.right_populations())
                .min(charger.n_right.saturating_sub(2));
            let m = charger.mean_left().round() as i64;
            (0..=top).map(|n| (m, n as i64)).collect()
        }
    };
    let mut best: Option<Selection> = None;
    for (m, n) in candidates {
        let choice = optimal_collision_tau(charger, pq, &params.with_drive(m, n));
        let better = match best {
            None => true,
            Some(b) => {
                choice.delta_u > b.choice.delta_u + 1e-12
                    || ((choice.delta_u - b.choice.delta_u).abs() <= 1e-12
                        && m.abs() + n.abs() < b.m_drive.abs() + b.n_drive.abs())
            }
        };
        if better {
            best = Some(Selection {
                m_drive: m,
                n_drive: n,
                choice,
            });
        }
    }
    best
}

/// Outputs of one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRecord {
    pub k: usize,
    pub m_drive: i64,
    pub n_drive: i64,
    pub tau: f64,
    pub p_g: f64,
    pub p_e: f64,
    /// Energy gained by the battery, in units of `ħω_eg`.
    pub delta_u: f64,
    /// `Σ S^{(k)}_mn` of the charger and fresh battery entering the collision.
    pub raw_energy_sum: f64,
    /// `I(R:L)` of the charger after the collision, in nats.
    pub mutual_info: f64,
}

/// Joint state `ρ^{RL}` ⊗ battery on `L ⊗ q ⊗ R`.
fn embed(charger: &ChargerState, qubit: &DensityMatrix) -> CMatrix {
    let (nl, nr) = (charger.n_left, charger.n_right);
    let space = ProductSpace {
        n_left: nl,
        levels: 2,
        n_right: nr,
    };
    let rl = charger.rho.matrix();
    let q = qubit.matrix();
    CMatrix::from_fn(space.dim(), space.dim(), |a, b| {
        let (la, lb) = (space.label(a), space.label(b));
        let qv = q[(la.level.index(), lb.level.index())];
        if qv == c(0.0) {
            return qv;
        }
        rl[(la.m * nr + la.n, lb.m * nr + lb.n)] * qv
    })
}

/// One collision at the drive already set in `p`: the battery interacts for
/// the optimal time and is returned with the updated charger.
pub fn collide_one(
    charger: &ChargerState,
    qubit: &DensityMatrix,
    p: &EffectiveParams,
) -> Result<(ChargerState, DensityMatrix, CollisionRecord)> {
    let pq = qubit_populations(qubit)?;
    let choice = optimal_collision_tau(charger, pq, p);
    collide_for(charger, qubit, p, choice.tau, 1)
}

/// A collision of fixed duration `tau`.
pub fn collide_for(
    charger: &ChargerState,
    qubit: &DensityMatrix,
    p: &EffectiveParams,
    tau: f64,
    k: usize,
) -> Result<(ChargerState, DensityMatrix, CollisionRecord)> {
    let pq = qubit_populations(qubit)?;
    let (nl, nr) = (charger.n_left, charger.n_right);
    let space = ProductSpace::new(nl, 2, nr)?;
    let joint = embed(charger, qubit);
    let purity_before = purity(&DensityMatrix::from_matrix_unchecked(joint.clone()));
    let out = EffectivePropagator::new(space, tau, p).apply(&joint)?;
    let out = crate::hilbert::hermitize(&out);
    let trace = out.trace().re;
    if (trace - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "collision changed the trace to {trace}"
        )));
    }
    let purity_after = purity(&DensityMatrix::from_matrix_unchecked(out.clone()));
    if (purity_after - purity_before).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "collision changed the global purity from {purity_before} to {purity_after}"
        )));
    }
    let dims = space.dims();
    let rl = DensityMatrix::from_matrix_unchecked(partial_trace_matrix(&out, &[0, 2], &dims)?);
    let q = DensityMatrix::from_matrix_unchecked(partial_trace_matrix(&out, &[1], &dims)?);
    let raw = raw_energy_sum_k(charger, pq);
    let delta_u = qubit_energy(&q) - qubit_energy(qubit);
    let next = ChargerState {
        rho: rl,
        n_left: nl,
        n_right: nr,
    };
    let qp = q.populations();
    let record = CollisionRecord {
        k,
        m_drive: p.m_drive,
        n_drive: p.n_drive,
        tau,
        p_g: qp[0],
        p_e: qp[1],
        delta_u,
        raw_energy_sum: raw,
        mutual_info: next.mutual_information()?,
    };
    Ok((next, q, record))
}

/// Population on the two highest Fock levels of each charger mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailAudit {
    pub left: f64,
    pub right: f64,
}

impl TailAudit {
    pub fn of(charger: &ChargerState) -> Self {
        let top2 = |p: Vec<f64>| p.iter().rev().take(2).sum::<f64>();
        Self {
            left: top2(charger.left_populations()),
            right: top2(charger.right_populations()),
        }
    }

    pub fn passed(&self) -> bool {
        self.left < TAIL_AUDIT_TOL && self.right < TAIL_AUDIT_TOL
    }
}

/// A finished chain.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub records: Vec<CollisionRecord>,
    /// Collision index at which the charger was found drained, if any.
    pub drained_at: Option<usize>,
    pub final_charger: ChargerState,
    pub tail: TailAudit,
}

impl ChainResult {
    pub fn accumulated_energy(&self) -> f64 {
        self.records.iter().map(|r| r.delta_u).sum()
    }
}

/// Runs `k_total` collisions with copies of `qubit_template`. The drive
/// integers in `p` are ignored; each collision selects its own.
pub fn run_chain(
    k_total: usize,
    initial: &ChargerState,
    qubit_template: &DensityMatrix,
    p: &EffectiveParams,
) -> Result<ChainResult> {
    if k_total == 0 {
        return Err(Error::param("k", "a chain needs at least one collision"));
    }
    let pq = qubit_populations(qubit_template)?;
    let mut charger = initial.clone();
    let mut records = Vec::with_capacity(k_total);
    let mut drained_at = None;
    for k in 1..=k_total {
        let Some(sel) = select_mn(&charger, pq, p) else {
            log::info!("charger drained before collision {k}");
            drained_at = Some(k);
            break;
        };
        let params = p.with_drive(sel.m_drive, sel.n_drive);
        let (next, _, record) = collide_for(&charger, qubit_template, &params, sel.choice.tau, k)?;
        log::debug!(
            "collision {k}: (M,N)=({},{}) tau={:.6} p_e={:.6} dU={:.6}",
            record.m_drive,
            record.n_drive,
            record.tau,
            record.p_e,
            record.delta_u
        );
        records.push(record);
        charger = next;
    }
    let tail = TailAudit::of(&charger);
    if !tail.passed() {
        log::warn!(
            "charger tail audit failed: top-two populations L={:.3e}, R={:.3e}",
            tail.left,
            tail.right
        );
    }
    Ok(ChainResult {
        records,
        drained_at,
        final_charger: charger,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fock, gibbs_oscillator, qubit_thermal, ThermalSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn resonant() -> EffectiveParams {
        EffectiveParams::from_chi(1.0, 1.0, 0, -1).unwrap()
    }

    fn photon_charger(nl: usize, nr: usize) -> ChargerState {
        ChargerState::product(&fock(1, nl).unwrap(), &fock(0, nr).unwrap()).unwrap()
    }

    #[test]
    fn raw_energy_forms_agree() {
        let charger = photon_charger(4, 4);
        assert_abs_diff_eq!(raw_energy_sum_k(&charger, (0.7, 0.3)), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            raw_energy_sum_brute(&charger, (0.7, 0.3)),
            0.7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_photon_fully_charges() {
        let charger = photon_charger(5, 5);
        let q = qubit_thermal(0.1, 0.05).unwrap();
        let choice = optimal_collision_tau(
            &charger,
            (q.populations()[0], q.populations()[1]),
            &resonant(),
        );
        assert_abs_diff_eq!(choice.tau, PI / 2.0, epsilon = 1e-6);
        let (next, qf, rec) = collide_one(&charger, &q, &resonant()).unwrap();
        assert_abs_diff_eq!(qf.populations()[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rec.delta_u, 2.0 * q.populations()[0], epsilon = 1e-9);
        // The shielded |1,e,0⟩ share leaves the modes classically correlated.
        let (pg, pe) = (q.populations()[0], q.populations()[1]);
        let h = -pg * pg.ln() - pe * pe.ln();
        assert_abs_diff_eq!(next.mutual_information().unwrap(), h, epsilon = 1e-9);
    }

    #[test]
    fn equal_temperature_thermal_charger_is_inert() {
        let left = gibbs_oscillator(&ThermalSpec::new(0.2, 0.99, 14).unwrap());
        let right = gibbs_oscillator(&ThermalSpec::new(0.2, 0.94, 14).unwrap());
        let charger = ChargerState::product(&left, &right).unwrap();
        let q = qubit_thermal(0.2, 0.05).unwrap();
        let pq = (q.populations()[0], q.populations()[1]);
        assert!(raw_energy_sum_k(&charger, pq).abs() < 1e-12);
        assert!(select_mn(&charger, pq, &resonant()).is_none());
        let (_, qf, rec) = collide_for(&charger, &q, &resonant(), 1.3, 1).unwrap();
        assert!(rec.delta_u.abs() < 1e-12);
        assert!(crate::hilbert::max_abs(&(qf.matrix() - q.matrix())) < 1e-12);
    }

    #[test]
    fn resonant_regime_removes_drive() {
        let charger = photon_charger(4, 4);
        let sel = select_mn(&charger, (0.6, 0.4), &resonant()).unwrap();
        assert_eq!((sel.m_drive, sel.n_drive), (0, -1));
        assert_eq!(Regime::from_chi(0.1), Regime::SmallChi);
        assert_eq!(Regime::from_chi(10.0), Regime::LargeChi);
    }

    #[test]
    fn small_chi_selects_populated_family() {
        let charger = ChargerState::product(&fock(3, 8).unwrap(), &fock(0, 6).unwrap()).unwrap();
        let p = EffectiveParams::from_chi(0.1, 1.0, 0, -1).unwrap();
        let sel = select_mn(&charger, (1.0, 0.0), &p).unwrap();
        assert_eq!((sel.m_drive, sel.n_drive), (3, 0));
        assert_abs_diff_eq!(sel.choice.delta_u, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn optimal_tau_beats_grid() {
        let spec = ThermalSpec::new(0.1, 1.0, 36).unwrap();
        let left = crate::states::dts(num_complex::Complex64::new(1.0, 0.0), &spec).unwrap();
        let charger = ChargerState::product(&left, &fock(0, 8).unwrap()).unwrap();
        let pq = (0.62, 0.38);
        let best = optimal_collision_tau(&charger, pq, &resonant());
        let joint = charger.joint_populations();
        for k in 0..200 {
            let t = k as f64 * PI / 200.0;
            assert!(best.delta_u >= delta_u_joint(&joint, pq, t, &resonant()) - 1e-12);
        }
    }

    #[test]
    fn chain_threads_state() {
        let charger = photon_charger(4, 4);
        let q = qubit_thermal(0.1, 0.05).unwrap();
        let res = run_chain(3, &charger, &q, &resonant()).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.drained_at, Some(2));
        assert_abs_diff_eq!(res.records[0].p_e, 1.0, epsilon = 1e-9);
        assert!(run_chain(0, &charger, &q, &resonant()).is_err());
    }
}
