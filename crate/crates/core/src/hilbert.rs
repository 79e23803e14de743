//! Truncated Fock-space linear algebra.
//!
//! Every state of the charger-battery system lives on the product space
//! `L ⊗ q ⊗ R`: a left oscillator truncated at `n_left` Fock levels, a
//! two- or three-level battery, and a right oscillator truncated at
//! `n_right` levels. The flat index is fixed once in [`ProductSpace`]:
//! left mode slowest, battery level in the middle, right mode fastest.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for operators and density matrices.
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Elementwise Hermiticity tolerance for operators of unit scale.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Battery level. `Intermediate` is the upper level `|i⟩` of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Ground,
    Excited,
    Intermediate,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Ground, Level::Excited, Level::Intermediate];

    pub fn index(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
            Level::Intermediate => 2,
        }
    }

    pub fn from_index(j: usize) -> Option<Level> {
        Level::ALL.get(j).copied()
    }
}

/// A basis label `|m, j, n⟩ = |m⟩_L ⊗ |j⟩ ⊗ |n⟩_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductIndex {
    pub m: usize,
    pub level: Level,
    pub n: usize,
}

impl ProductIndex {
    pub fn new(m: usize, level: Level, n: usize) -> Self {
        Self { m, level, n }
    }
}

/// Shape of the truncated product space and the single flat-index convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductSpace {
    pub n_left: usize,
    pub levels: usize,
    pub n_right: usize,
}

impl ProductSpace {
    pub fn new(n_left: usize, levels: usize, n_right: usize) -> Result<Self> {
        if n_left < 1 || n_right < 1 {
            return Err(Error::InvalidDimension(format!(
                "mode cutoffs must be positive, got ({n_left}, {n_right})"
            )));
        }
        if levels != 2 && levels != 3 {
            return Err(Error::InvalidDimension(format!(
                "battery must have 2 or 3 levels, got {levels}"
            )));
        }
        Ok(Self {
            n_left,
            levels,
            n_right,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_left * self.levels * self.n_right
    }

    /// Subsystem dimensions in flat-index order, for [`partial_trace`].
    pub fn dims(&self) -> [usize; 3] {
        [self.n_left, self.levels, self.n_right]
    }

    pub fn contains(&self, idx: ProductIndex) -> bool {
        idx.m < self.n_left && idx.level.index() < self.levels && idx.n < self.n_right
    }

    /// Flat index, or `None` when the label lies outside the truncation.
    pub fn index(&self, idx: ProductIndex) -> Option<usize> {
        self.contains(idx)
            .then(|| (idx.m * self.levels + idx.level.index()) * self.n_right + idx.n)
    }

    pub fn label(&self, flat: usize) -> ProductIndex {
        debug_assert!(flat < self.dim());
        let n = flat % self.n_right;
        let rest = flat / self.n_right;
        let j = rest % self.levels;
        let m = rest / self.levels;
        ProductIndex::new(m, Level::from_index(j).expect("level index"), n)
    }

    pub fn labels(&self) -> impl Iterator<Item = ProductIndex> + '_ {
        (0..self.dim()).map(move |k| self.label(k))
    }
}

/// Truncated annihilation operator with `⟨n−1|â|n⟩ = √n`.
pub fn annihilation(cutoff: usize) -> Result<CMatrix> {
    if cutoff < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation operator needs cutoff >= 2, got {cutoff}"
        )));
    }
    let mut a = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    Ok(a)
}

/// Projector-like `|j⟩⟨k|` on a `dim`-level system.
pub fn transition(dim: usize, j: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(j, k)] = ONE;
    m
}

/// Kronecker product; the first factor is the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidDimension("kron of an empty matrix".into()));
    }
    let entries = a
        .len()
        .checked_mul(b.len())
        .ok_or_else(|| Error::InvalidDimension("kron dimension overflow".into()))?;
    if entries > (1 << 28) {
        return Err(Error::InvalidDimension(format!(
            "kron product with {entries} entries exceeds the dense limit"
        )));
    }
    Ok(a.kronecker(b))
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&CMatrix]) -> Result<CMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidDimension("kron of zero factors".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, f| kron(&acc, f))
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest elementwise deviation `max |A − A†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n != m.ncols() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    let scale = max_abs(m).max(1.0);
    let dev = hermiticity_deviation(m);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Partial trace of a matrix over a composite space with factor dimensions
/// `dims`, keeping the subsystems listed in `keep` (in their original order).
pub fn partial_trace_matrix(m: &CMatrix, keep: &[usize], dims: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: m.nrows(),
        });
    }
    if keep.is_empty() {
        return Err(Error::InvalidDimension(
            "partial trace must keep a subsystem".into(),
        ));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() || kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidDimension(format!(
            "invalid subsystem selection {keep:?} for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();

    // Stride of each factor in the flat index (last factor fastest).
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let offsets = |factors: &[usize]| -> Vec<usize> {
        let size: usize = factors.iter().map(|&k| dims[k]).product();
        (0..size)
            .map(|mut flat| {
                let mut off = 0;
                for &k in factors.iter().rev() {
                    off += (flat % dims[k]) * strides[k];
                    flat /= dims[k];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept);
    let traced_off = offsets(&traced);

    let d = kept_off.len();
    let mut out = CMatrix::zeros(d, d);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (cc, &co) in kept_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_off {
                acc += m[(ro + t, co + t)];
            }
            out[(r, cc)] = acc;
        }
    }
    Ok(out)
}

/// Partial trace of a density matrix.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    partial_trace_matrix(rho.matrix(), keep, dims).map(DensityMatrix::from_matrix_unchecked)
}

/// Eigendecomposition `H = V diag(E) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::InvalidDimension(
                "eigendecomposition of a non-square matrix".into(),
            ));
        }
        check_hermitian(h)?;
        let sym = hermitize(h);
        let eig = sym.symmetric_eigen();
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(−i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases = self.values.map(|e| Complex64::from_polar(1.0, -e * t));
        let mut scaled = self.vectors.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        scaled * self.vectors.adjoint()
    }

    /// `U ρ U†` with `U = exp(−i H t)`.
    pub fn evolve(&self, rho: &CMatrix, t: f64) -> CMatrix {
        let u = self.propagator(t);
        &u * rho * u.adjoint()
    }
}

/// `(A + A†)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Matrix exponential `exp(−i H t)` of a Hermitian generator.
pub fn expm(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(HermitianEigen::new(h)?.propagator(t))
}

/// Groups of basis indices that are connected through exactly non-zero
/// off-diagonal entries. A Hermitian matrix is block diagonal over these
/// groups, so its spectrum is the union of the block spectra.
pub fn block_components(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != ZERO || m[(j, i)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

/// Eigenvalues of a Hermitian matrix, exploiting its exact block structure.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    check_hermitian(m)?;
    let mut values = Vec::with_capacity(m.nrows());
    for group in block_components(m) {
        if group.len() == 1 {
            values.push(m[(group[0], group[0])].re);
            continue;
        }
        let block = CMatrix::from_fn(group.len(), group.len(), |r, cc| m[(group[r], group[cc])]);
        values.extend(hermitize(&block).symmetric_eigenvalues().iter().copied());
    }
    Ok(values)
}

/// Row-compressed sparse complex matrix, used for ladder operators and
/// Hamiltonians whose rows hold only a handful of entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter_map(|cc| {
                        let v = m[(r, cc)];
                        (v != ZERO).then_some((cc, v))
                    })
                    .collect()
            })
            .collect();
        Self {
            ncols: m.ncols(),
            rows,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    /// Adds `v` at `(r, col)`, merging with an existing entry.
    pub fn push(&mut self, r: usize, col: usize, v: Complex64) {
        assert!(col < self.ncols, "column out of range");
        if let Some(entry) = self.rows[r].iter_mut().find(|(cc, _)| *cc == col) {
            entry.1 += v;
        } else {
            self.rows[r].push((col, v));
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows(), self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(cc, v) in row {
                m[(r, cc)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> SparseMatrix {
        let mut out = SparseMatrix::zeros(self.ncols, self.nrows());
        for (r, row) in self.rows.iter().enumerate() {
            for &(cc, v) in row {
                out.rows[cc].push((r, v.conj()));
            }
        }
        out
    }

    /// `S ρ S†` for a dense square `ρ`.
    pub fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        let n = self.nrows();
        let inner = rho.nrows();
        // left = S ρ  (n × inner)
        let mut left = CMatrix::zeros(n, inner);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for col in 0..inner {
                    left[(r, col)] += v * rho[(k, col)];
                }
            }
        }
        // out = left S†,  out[a, b] = Σ_k left[a, k] conj(S[b, k])
        let mut out = CMatrix::zeros(n, n);
        for (b, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                let vc = v.conj();
                for a in 0..n {
                    out[(a, b)] += left[(a, k)] * vc;
                }
            }
        }
        out
    }
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_FLOOR: f64 = -1e-8;

    /// Validates the density-matrix invariants.
    pub fn new(data: CMatrix) -> Result<Self> {
        let rho = Self { data };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix produced by a trace- and positivity-preserving map.
    pub fn from_matrix_unchecked(data: CMatrix) -> Self {
        Self { data }
    }

    pub fn from_populations(p: &[f64]) -> Result<Self> {
        let data =
            CMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| c(x))));
        Self::new(data)
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state vector norm {norm}")));
        }
        Ok(Self {
            data: psi * psi.adjoint(),
        })
    }

    /// `|k⟩⟨k|` on a `dim`-dimensional space.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidDimension(format!("basis index {k} >= {dim}")));
        }
        Ok(Self {
            data: transition(dim, k, k),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            data: CMatrix::identity(dim, dim) * c(1.0 / dim as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.nrows() != d.ncols() || d.nrows() == 0 {
            return Err(Error::InvalidDimension(
                "density matrix must be square".into(),
            ));
        }
        let dev = hermiticity_deviation(d);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < Self::EIGEN_FLOOR {
            return Err(Error::NegativeEigenvalue { value: min });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.data[(k, k)].re).collect()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.data)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// `ρ_A ⊗ ρ_B`.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        kron(&self.data, &other.data).map(Self::from_matrix_unchecked)
    }

    /// Convex mixture `w ρ + (1 − w) σ`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self::from_matrix_unchecked(
            &self.data * c(w) + &other.data * c(1.0 - w),
        ))
    }
}
