//! Exact density-matrix engine.
//!
//! The matrix is stored row-major with unit trace; the true (possibly
//! unnormalized) operator is `exp(log_weight) * matrix`.

use crate::engine::MeasureOutcome;
use crate::error::{Error, Result};
use crate::haar::haar_unitary4;
use crate::pauli::{PauliLetter, PauliString};
use crate::settings::{Settings, DEFAULT};
use crate::subset::zeta;
use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A unitary acting on an ordered pair of qubits. The local basis index is
/// `2 a + b` with `a` the bit of `sites.0` and `b` the bit of `sites.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitGate {
    matrix: Matrix4<C64>,
    sites: (usize, usize),
}

impl TwoQubitGate {
    pub fn new(matrix: Matrix4<C64>, sites: (usize, usize)) -> Result<Self> {
        if sites.0 == sites.1 {
            return Err(Error::RepeatedSite(sites.0));
        }
        let dev = (matrix.adjoint() * matrix - Matrix4::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > DEFAULT.identity_tol {
            return Err(Error::NonUnitary(dev));
        }
        Ok(TwoQubitGate { matrix, sites })
    }

    pub(crate) fn new_unchecked(matrix: Matrix4<C64>, sites: (usize, usize)) -> Self {
        TwoQubitGate { matrix, sites }
    }

    pub fn identity(sites: (usize, usize)) -> Result<Self> {
        Self::new(Matrix4::identity(), sites)
    }

    pub fn swap(sites: (usize, usize)) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        Self::new(m, sites)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.matrix
    }

    pub fn sites(&self) -> (usize, usize) {
        self.sites
    }

    pub fn adjoint(&self) -> Self {
        TwoQubitGate { matrix: self.matrix.adjoint(), sites: self.sites }
    }
}

/// Haar-random two-qubit gate on `sites`.
pub fn haar_2q_gate<R: Rng + ?Sized>(sites: (usize, usize), rng: &mut R) -> Result<TwoQubitGate> {
    if sites.0 == sites.1 {
        return Err(Error::RepeatedSite(sites.0));
    }
    Ok(TwoQubitGate::new_unchecked(haar_unitary4(rng), sites))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n_qubits: usize,
    dim: usize,
    data: Vec<C64>,
    log_weight: f64,
}

/// Eigenvalue-derived quantities of a normalized state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralMoments {
    pub purity: f64,
    pub purity3: f64,
    pub max_eigenvalue: f64,
}

impl DenseState {
    fn check_size(n: usize, settings: &Settings) -> Result<usize> {
        if n > settings.dense_qubit_limit || n > 30 {
            return Err(Error::TooManyQubits { n, limit: settings.dense_qubit_limit, engine: "dense" });
        }
        Ok(1usize << n)
    }

    pub fn fully_mixed(n_qubits: usize) -> Result<Self> {
        Self::fully_mixed_with(n_qubits, &DEFAULT)
    }

    pub fn fully_mixed_with(n_qubits: usize, settings: &Settings) -> Result<Self> {
        let dim = Self::check_size(n_qubits, settings)?;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(DenseState { n_qubits, dim, data, log_weight: 0.0 })
    }

    /// Computational basis state |index><index|.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = Self::check_size(n_qubits, &DEFAULT)?;
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut data = vec![ZERO; dim * dim];
        data[index * dim + index] = ONE;
        Ok(DenseState { n_qubits, dim, data, log_weight: 0.0 })
    }

    /// |psi><psi| from (not necessarily normalized) amplitudes.
    pub fn from_pure(n_qubits: usize, amps: &[C64]) -> Result<Self> {
        let dim = Self::check_size(n_qubits, &DEFAULT)?;
        if amps.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, found: amps.len() });
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amps[i] * amps[j].conj() / norm2;
            }
        }
        Ok(DenseState { n_qubits, dim, data, log_weight: 0.0 })
    }

    /// From a Hermitian, positive semidefinite matrix; normalized to unit trace.
    pub fn from_matrix(n_qubits: usize, m: &DMatrix<C64>) -> Result<Self> {
        let dim = Self::check_size(n_qubits, &DEFAULT)?;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::LengthMismatch { expected: dim, found: m.nrows() });
        }
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = m[(i, j)];
            }
        }
        let mut s = DenseState { n_qubits, dim, data, log_weight: 0.0 };
        let herm = s.hermiticity_error();
        if herm > DEFAULT.identity_tol {
            return Err(Error::NonHermitian(herm));
        }
        let tr = s.raw_trace();
        if tr <= 0.0 {
            return Err(Error::InvalidArgument("matrix has non-positive trace".into()));
        }
        s.scale(1.0 / tr);
        s.log_weight = tr.ln();
        s.spectrum()?;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn set_log_weight(&mut self, w: f64) {
        self.log_weight = w;
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Trace of the stored (normalized) matrix.
    pub fn trace(&self) -> f64 {
        self.raw_trace()
    }

    fn raw_trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    fn scale(&mut self, f: f64) {
        for z in &mut self.data {
            *z *= f;
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut e: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                e = e.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        e
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_qubits {
            Err(Error::SiteOutOfRange { site, n_qubits: self.n_qubits })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, gate: &TwoQubitGate) -> Result<()> {
        let (a, b) = gate.sites;
        self.check_site(a)?;
        self.check_site(b)?;
        let mi = 1usize << a;
        let mj = 1usize << b;
        let mut u = [[ZERO; 4]; 4];
        for (r, row) in u.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = gate.matrix[(r, c)];
            }
        }
        let d = self.dim;
        let offs = [0, mj, mi, mi | mj];
        // rows: rho <- U rho
        let mut tmp = vec![ZERO; 4 * d];
        for r in 0..d {
            if r & (mi | mj) != 0 {
                continue;
            }
            for (k, o) in offs.iter().enumerate() {
                tmp[k * d..(k + 1) * d].copy_from_slice(&self.data[(r + o) * d..(r + o + 1) * d]);
            }
            for (k, o) in offs.iter().enumerate() {
                let row = &mut self.data[(r + o) * d..(r + o + 1) * d];
                let uk = u[k];
                for c in 0..d {
                    row[c] = uk[0] * tmp[c] + uk[1] * tmp[d + c] + uk[2] * tmp[2 * d + c] + uk[3] * tmp[3 * d + c];
                }
            }
        }
        // columns: rho <- rho U^dagger
        let mut ud = [[ZERO; 4]; 4];
        for l in 0..4 {
            for k in 0..4 {
                ud[l][k] = u[k][l].conj();
            }
        }
        for r in 0..d {
            let row = &mut self.data[r * d..(r + 1) * d];
            for c in 0..d {
                if c & (mi | mj) != 0 {
                    continue;
                }
                let v = [row[c], row[c + offs[1]], row[c + offs[2]], row[c + offs[3]]];
                for (k, o) in offs.iter().enumerate() {
                    row[c + o] = v[0] * ud[0][k] + v[1] * ud[1][k] + v[2] * ud[2][k] + v[3] * ud[3][k];
                }
            }
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, site: usize, u: &Matrix2<C64>) -> Result<()> {
        self.check_site(site)?;
        let m = 1usize << site;
        let d = self.dim;
        for r in 0..d {
            if r & m != 0 {
                continue;
            }
            for c in 0..d {
                let v0 = self.data[r * d + c];
                let v1 = self.data[(r | m) * d + c];
                self.data[r * d + c] = u[(0, 0)] * v0 + u[(0, 1)] * v1;
                self.data[(r | m) * d + c] = u[(1, 0)] * v0 + u[(1, 1)] * v1;
            }
        }
        for r in 0..d {
            for c in 0..d {
                if c & m != 0 {
                    continue;
                }
                let v0 = self.data[r * d + c];
                let v1 = self.data[r * d + (c | m)];
                self.data[r * d + c] = v0 * u[(0, 0)].conj() + v1 * u[(0, 1)].conj();
                self.data[r * d + (c | m)] = v0 * u[(1, 0)].conj() + v1 * u[(1, 1)].conj();
            }
        }
        Ok(())
    }

    /// Global unitary rho <- U rho U^dagger.
    pub fn apply_unitary(&mut self, u: &DMatrix<C64>) -> Result<()> {
        if u.nrows() != self.dim || u.ncols() != self.dim {
            return Err(Error::LengthMismatch { expected: self.dim, found: u.nrows() });
        }
        let m = u * self.matrix() * u.adjoint();
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] = m[(i, j)];
            }
        }
        Ok(())
    }

    /// Born probability of `outcome` for a Z measurement on `site`.
    pub fn outcome_probability(&self, site: usize, outcome: u8) -> Result<f64> {
        self.check_site(site)?;
        let (kept, total) = self.diag_split(site, outcome);
        Ok(kept / total)
    }

    fn diag_split(&self, site: usize, outcome: u8) -> (f64, f64) {
        let m = 1usize << site;
        let want = if outcome == 0 { 0 } else { m };
        let mut kept = 0.0;
        let mut total = 0.0;
        for x in 0..self.dim {
            let v = self.data[x * self.dim + x].re;
            total += v;
            if x & m == want {
                kept += v;
            }
        }
        (kept.max(0.0), total)
    }

    fn project(&mut self, site: usize, outcome: u8, kept: f64) {
        let m = 1usize << site;
        let want = if outcome == 0 { 0 } else { m };
        let d = self.dim;
        let inv = 1.0 / kept;
        for r in 0..d {
            let row_ok = r & m == want;
            let row = &mut self.data[r * d..(r + 1) * d];
            for (c, z) in row.iter_mut().enumerate() {
                if row_ok && c & m == want {
                    *z *= inv;
                } else {
                    *z = ZERO;
                }
            }
        }
    }

    /// Z measurement with the outcome drawn from the Born rule; the state is
    /// renormalized and `log_weight` is left unchanged.
    pub fn measure_z_sample<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        let (k0, total) = self.diag_split(site, 0);
        let p0 = (k0 / total).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        let outcome = if u < p0 { 0 } else { 1 };
        let (kept, _) = self.diag_split(site, outcome);
        let p = kept / total;
        self.project(site, outcome, kept);
        Ok(MeasureOutcome { outcome, probability: p })
    }

    /// Z measurement with a prescribed outcome; `log_weight` gains `ln p`.
    pub fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        let (kept, total) = self.diag_split(site, outcome);
        let p = kept / total;
        if !(p > DEFAULT.zero_probability) {
            return Err(Error::ImpossibleRecord { site, outcome });
        }
        self.project(site, outcome, kept);
        self.log_weight += p.ln();
        Ok(MeasureOutcome { outcome, probability: p })
    }

    /// Tr(rho^2) of the normalized state.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Reduced density matrix on the qubits in `mask` (qubit order preserved).
    pub fn partial_trace(&self, mask: u64) -> DMatrix<C64> {
        let (ia, ib) = self.split_indices(mask);
        let da = ia.len();
        let mut out = DMatrix::zeros(da, da);
        for (a, &xa) in ia.iter().enumerate() {
            for (a2, &xa2) in ia.iter().enumerate() {
                let mut s = ZERO;
                for &xb in &ib {
                    s += self.data[(xa | xb) * self.dim + (xa2 | xb)];
                }
                out[(a, a2)] = s;
            }
        }
        out
    }

    fn split_indices(&self, mask: u64) -> (Vec<usize>, Vec<usize>) {
        let mask = mask as usize & (self.dim - 1);
        let mut ia = Vec::new();
        let mut ib = Vec::new();
        for x in 0..self.dim {
            if x & !mask == 0 {
                ia.push(x);
            }
            if x & mask == 0 {
                ib.push(x);
            }
        }
        (ia, ib)
    }

    /// Tr(rho_A^2) by explicit partial trace.
    pub fn subsystem_purity(&self, mask: u64) -> f64 {
        if mask == 0 {
            return 1.0;
        }
        self.partial_trace(mask).iter().map(|z| z.norm_sqr()).sum::<f64>() / self.raw_trace().powi(2)
    }

    /// All 4^N Pauli expectations Tr(rho P). Entry `r * D + c` holds the string
    /// whose letter on qubit k is I, X, Y, Z for (r_k, c_k) = 00, 01, 10, 11.
    pub fn pauli_spectrum(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = self.data.clone();
        let i = C64::new(0.0, 1.0);
        for k in 0..self.n_qubits {
            let m = 1usize << k;
            for r in 0..d {
                if r & m != 0 {
                    continue;
                }
                for c in 0..d {
                    if c & m != 0 {
                        continue;
                    }
                    let v00 = a[r * d + c];
                    let v01 = a[r * d + (c | m)];
                    let v10 = a[(r | m) * d + c];
                    let v11 = a[(r | m) * d + (c | m)];
                    a[r * d + c] = v00 + v11;
                    a[r * d + (c | m)] = v01 + v10;
                    a[(r | m) * d + c] = i * (v01 - v10);
                    a[(r | m) * d + (c | m)] = v00 - v11;
                }
            }
        }
        a.into_iter().map(|z| z.re).collect()
    }

    /// Subsystem purities for every subset mask, via the Pauli spectrum:
    /// `P_A = 2^{-|A|} sum_{supp P subset A} Tr(rho P)^2`.
    pub fn all_subsystem_purities(&self) -> Vec<f64> {
        let d = self.dim;
        let spec = self.pauli_spectrum();
        let mut w = vec![0.0; d];
        for r in 0..d {
            for c in 0..d {
                let v = spec[r * d + c];
                w[r | c] += v * v;
            }
        }
        zeta(&mut w);
        for (a, v) in w.iter_mut().enumerate() {
            *v /= (1u64 << a.count_ones()) as f64;
        }
        w[0] = 1.0;
        w
    }

    /// Tr(rho P).
    pub fn pauli_expect(&self, p: &PauliString) -> Result<f64> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::LengthMismatch { expected: self.n_qubits, found: p.n_qubits() });
        }
        let xm = p.x_mask() as usize;
        let zm = p.z_mask() as usize;
        let base = C64::new(0.0, 1.0).powu(p.y_count());
        let mut s = ZERO;
        for x in 0..self.dim {
            let sign = if (x & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            s += self.data[x * self.dim + (x ^ xm)] * sign;
        }
        let v = base * s;
        if v.im.abs() > 1e-8 {
            return Err(Error::NonHermitian(v.im.abs()));
        }
        Ok(v.re)
    }

    /// Tr(rho O) for a diagonal operator given by its diagonal.
    pub fn diagonal_expect(&self, diag: &[f64]) -> f64 {
        (0..self.dim).map(|x| self.data[x * self.dim + x].re * diag[x]).sum()
    }

    /// Tr(self * other) for Hermitian operands.
    pub fn overlap(&self, other: &DenseState) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::LengthMismatch { expected: self.dim, found: other.dim });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a * b.conj()).re).sum())
    }

    fn eigen(&self) -> Result<nalgebra::SymmetricEigen<C64, nalgebra::Dyn>> {
        let herm = self.hermiticity_error();
        if herm > DEFAULT.identity_tol {
            return Err(Error::NonHermitian(herm));
        }
        Ok(self.matrix().symmetric_eigen())
    }

    /// Eigenvalues in descending order, clipped to [0, 1].
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let e = self.eigen()?;
        let tr = self.raw_trace();
        let mut v: Vec<f64> = e.eigenvalues.iter().map(|x| x / tr).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for x in &mut v {
            if *x < -DEFAULT.identity_tol {
                return Err(Error::NegativeEigenvalue(*x));
            }
            *x = x.clamp(0.0, 1.0);
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > DEFAULT.accumulated_tol {
            return Err(Error::NotNormalized(s));
        }
        Ok(v)
    }

    pub fn spectral_moments(&self) -> Result<SpectralMoments> {
        let v = self.spectrum()?;
        Ok(SpectralMoments {
            purity: v.iter().map(|x| x * x).sum(),
            purity3: v.iter().map(|x| x * x * x).sum(),
            max_eigenvalue: v[0],
        })
    }

    /// A unit eigenvector for the largest eigenvalue.
    pub fn leading_eigenvector(&self) -> Result<Vec<C64>> {
        let e = self.eigen()?;
        let mut best = 0;
        for i in 1..e.eigenvalues.len() {
            if e.eigenvalues[i] > e.eigenvalues[best] {
                best = i;
            }
        }
        Ok(e.eigenvectors.column(best).iter().cloned().collect())
    }

    /// Largest entry coupling basis states with different labels.
    pub fn off_block_norm(&self, label: &[i64]) -> f64 {
        let d = self.dim;
        let mut s: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                if label[r] != label[c] {
                    s = s.max(self.data[r * d + c].norm());
                }
            }
        }
        s
    }
}

/// Dense matrix of a Pauli string in the qubit-k-is-bit-k convention.
pub fn pauli_matrix(p: &PauliString) -> DMatrix<C64> {
    let n = p.n_qubits();
    let d = 1usize << n;
    let xm = p.x_mask() as usize;
    let zm = p.z_mask() as usize;
    let base = C64::new(0.0, 1.0).powu(p.y_count());
    let mut m = DMatrix::zeros(d, d);
    for x in 0..d {
        let sign = if (x & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        m[(x ^ xm, x)] = base * sign;
    }
    m
}

/// Single-qubit Pauli letter as a 2x2 matrix.
pub fn letter_matrix(l: PauliLetter) -> Matrix2<C64> {
    let i = C64::new(0.0, 1.0);
    match l {
        PauliLetter::I => Matrix2::identity(),
        PauliLetter::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
        PauliLetter::Y => Matrix2::new(ZERO, -i, i, ZERO),
        PauliLetter::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
    }
}
