//! Mixed-state stabilizer engine over GF(2), plus Clifford tableaux and
//! uniform random Clifford sampling. Limited to 64 qubits (one machine word
//! per Pauli component).

use crate::dense::DenseState;
use crate::engine::MeasureOutcome;
use crate::error::{Error, Result};
use crate::pauli::{PauliLetter, PauliString};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

pub const MAX_QUBITS: usize = 64;

/// `i^phase X^x Z^z`, with X and Z masks over qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    pub x: u64,
    pub z: u64,
    pub phase: u8,
}

fn parity(v: u64) -> u8 {
    (v.count_ones() & 1) as u8
}

impl Pauli {
    pub const IDENTITY: Pauli = Pauli { x: 0, z: 0, phase: 0 };

    pub fn x(k: usize) -> Self {
        Pauli { x: 1 << k, z: 0, phase: 0 }
    }

    pub fn z(k: usize) -> Self {
        Pauli { x: 0, z: 1 << k, phase: 0 }
    }

    pub fn y(k: usize) -> Self {
        Pauli { x: 1 << k, z: 1 << k, phase: 1 }
    }

    /// Hermitian Pauli `sign * letters` from masks.
    pub fn hermitian(x: u64, z: u64, negative: bool) -> Self {
        let base = ((x & z).count_ones() & 3) as u8;
        Pauli { x, z, phase: (base + if negative { 2 } else { 0 }) & 3 }
    }

    pub fn from_string(p: &PauliString) -> Self {
        Self::hermitian(p.x_mask(), p.z_mask(), false)
    }

    /// Letters and sign of a Hermitian Pauli.
    pub fn to_string_signed(&self, n: usize) -> Result<(PauliString, bool)> {
        if !self.is_hermitian() {
            return Err(Error::NonHermitian(1.0));
        }
        Ok((PauliString::from_masks(n, self.x, self.z), self.is_negative()))
    }

    pub fn is_hermitian(&self) -> bool {
        (self.phase & 1) == parity(self.x & self.z)
    }

    /// For Hermitian Paulis: whether the sign relative to the letter product is -1.
    pub fn is_negative(&self) -> bool {
        let base = ((self.x & self.z).count_ones() & 3) as u8;
        (self.phase.wrapping_sub(base)) & 3 == 2
    }

    pub fn negate(self) -> Self {
        Pauli { phase: (self.phase + 2) & 3, ..self }
    }

    pub fn mul(self, o: Pauli) -> Pauli {
        let extra = 2 * parity(self.z & o.x);
        Pauli { x: self.x ^ o.x, z: self.z ^ o.z, phase: (self.phase + o.phase + extra) & 3 }
    }

    pub fn commutes(&self, o: &Pauli) -> bool {
        parity(self.x & o.z) ^ parity(self.z & o.x) == 0
    }

    pub fn same_letters(&self, o: &Pauli) -> bool {
        self.x == o.x && self.z == o.z
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    fn vec(&self) -> u128 {
        (self.x as u128) | ((self.z as u128) << 64)
    }

    /// Apply to a state vector (qubit k is bit k of the index).
    pub fn apply_to_vector(&self, v: &[C64]) -> Vec<C64> {
        let ph = C64::new(0.0, 1.0).powu(self.phase as u32);
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (x, a) in v.iter().enumerate() {
            let s = if parity(x as u64 & self.z) == 0 { ph } else { -ph };
            out[x ^ self.x as usize] = s * a;
        }
        out
    }

    pub fn dense_matrix(&self, n: usize) -> DMatrix<C64> {
        let d = 1usize << n;
        let ph = C64::new(0.0, 1.0).powu(self.phase as u32);
        let mut m = DMatrix::zeros(d, d);
        for x in 0..d {
            let s = if parity(x as u64 & self.z) == 0 { ph } else { -ph };
            m[(x ^ self.x as usize, x)] = s;
        }
        m
    }
}

fn symp(a: (u64, u64), b: (u64, u64)) -> u8 {
    parity(a.0 & b.1) ^ parity(a.1 & b.0)
}

/// Clifford unitary C given by the images `C X_k C^dag` and `C Z_k C^dag`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CliffordTableau {
    n: usize,
    ximg: Vec<Pauli>,
    zimg: Vec<Pauli>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        CliffordTableau { n, ximg: (0..n).map(Pauli::x).collect(), zimg: (0..n).map(Pauli::z).collect() }
    }

    /// Builds from explicit images, checking the commutation relations.
    pub fn from_images(ximg: Vec<Pauli>, zimg: Vec<Pauli>) -> Result<Self> {
        let n = ximg.len();
        if zimg.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: zimg.len() });
        }
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { n, limit: MAX_QUBITS, engine: "stabilizer" });
        }
        let t = CliffordTableau { n, ximg, zimg };
        if !t.is_valid() {
            return Err(Error::InvalidArgument("images violate the Pauli commutation relations".into()));
        }
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, k: usize) -> Pauli {
        self.ximg[k]
    }

    pub fn z_image(&self, k: usize) -> Pauli {
        self.zimg[k]
    }

    /// Hermitian images obeying the symplectic relations.
    pub fn is_valid(&self) -> bool {
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let all: Vec<&Pauli> = self.ximg.iter().chain(&self.zimg).collect();
        if all.iter().any(|p| !p.is_hermitian() || p.x & !mask != 0 || p.z & !mask != 0) {
            return false;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                let xx = self.ximg[i].commutes(&self.ximg[j]);
                let zz = self.zimg[i].commutes(&self.zimg[j]);
                let xz = self.ximg[i].commutes(&self.zimg[j]);
                if !xx || !zz || xz != (i != j) {
                    return false;
                }
            }
        }
        true
    }

    pub fn hadamard(n: usize, k: usize) -> Self {
        let mut t = Self::identity(n);
        t.ximg[k] = Pauli::z(k);
        t.zimg[k] = Pauli::x(k);
        t
    }

    pub fn phase_s(n: usize, k: usize) -> Self {
        let mut t = Self::identity(n);
        t.ximg[k] = Pauli::y(k);
        t
    }

    pub fn cnot(n: usize, c: usize, tgt: usize) -> Self {
        let mut t = Self::identity(n);
        t.ximg[c] = Pauli::x(c).mul(Pauli::x(tgt));
        t.zimg[tgt] = Pauli::z(c).mul(Pauli::z(tgt));
        t
    }

    pub fn cz(n: usize, a: usize, b: usize) -> Self {
        let mut t = Self::identity(n);
        t.ximg[a] = Pauli::x(a).mul(Pauli::z(b));
        t.ximg[b] = Pauli::z(a).mul(Pauli::x(b));
        t
    }

    pub fn swap(n: usize, a: usize, b: usize) -> Self {
        let mut t = Self::identity(n);
        t.ximg.swap(a, b);
        t.zimg.swap(a, b);
        t
    }

    /// C P C^dag.
    pub fn conjugate(&self, p: Pauli) -> Pauli {
        let mut acc = Pauli::IDENTITY;
        let mut x = p.x;
        while x != 0 {
            let k = x.trailing_zeros() as usize;
            acc = acc.mul(self.ximg[k]);
            x &= x - 1;
        }
        let mut z = p.z;
        while z != 0 {
            let k = z.trailing_zeros() as usize;
            acc = acc.mul(self.zimg[k]);
            z &= z - 1;
        }
        Pauli { phase: (acc.phase + p.phase) & 3, ..acc }
    }

    /// The Clifford `then * self` (self acts first).
    pub fn then(&self, then: &CliffordTableau) -> CliffordTableau {
        CliffordTableau {
            n: self.n,
            ximg: self.ximg.iter().map(|p| then.conjugate(*p)).collect(),
            zimg: self.zimg.iter().map(|p| then.conjugate(*p)).collect(),
        }
    }

    pub fn inverse(&self) -> CliffordTableau {
        let n = self.n;
        let a: Vec<(u64, u64)> = self.ximg.iter().map(|p| (p.x, p.z)).collect();
        let b: Vec<(u64, u64)> = self.zimg.iter().map(|p| (p.x, p.z)).collect();
        let pre = |target: (u64, u64), want: Pauli| -> Pauli {
            // target = prod a_j^{alpha_j} b_j^{beta_j}, alpha_j = <t, b_j>, beta_j = <a_j, t>
            let mut x = 0u64;
            let mut z = 0u64;
            for j in 0..n {
                if symp(target, b[j]) == 1 {
                    x |= 1 << j;
                }
                if symp(a[j], target) == 1 {
                    z |= 1 << j;
                }
            }
            let cand = Pauli::hermitian(x, z, false);
            if self.conjugate(cand) == want {
                cand
            } else {
                cand.negate()
            }
        };
        CliffordTableau {
            n,
            ximg: (0..n).map(|k| pre((1 << k, 0), Pauli::x(k))).collect(),
            zimg: (0..n).map(|k| pre((0, 1 << k), Pauli::z(k))).collect(),
        }
    }

    /// Uniformly random element of the n-qubit Clifford group (modulo global
    /// phase): symplectic part drawn pair by pair, then uniform signs.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n <= MAX_QUBITS);
        let mut basis: Vec<(u64, u64)> = (0..n).flat_map(|k| [(1u64 << k, 0u64), (0, 1u64 << k)]).collect();
        let mut ximg = Vec::with_capacity(n);
        let mut zimg = Vec::with_capacity(n);
        let combo = |basis: &[(u64, u64)], rng: &mut R| -> (u64, u64) {
            let mut v = (0u64, 0u64);
            for b in basis {
                if rng.random::<bool>() {
                    v = (v.0 ^ b.0, v.1 ^ b.1);
                }
            }
            v
        };
        for _ in 0..n {
            let v = loop {
                let v = combo(&basis, rng);
                if v != (0, 0) {
                    break v;
                }
            };
            let w = loop {
                let w = combo(&basis, rng);
                if symp(v, w) == 1 {
                    break w;
                }
            };
            ximg.push(Pauli::hermitian(v.0, v.1, rng.random()));
            zimg.push(Pauli::hermitian(w.0, w.1, rng.random()));
            let rest: Vec<(u64, u64)> = basis.iter().map(|&b| project_out(b, v, w)).collect();
            basis = symplectic_basis(rest);
        }
        CliffordTableau { n, ximg, zimg }
    }

    /// Dense unitary (defined up to global phase), columns C|x>.
    pub fn to_unitary(&self) -> Result<DMatrix<C64>> {
        let n = self.n;
        if n > 13 {
            return Err(Error::TooManyQubits { n, limit: 13, engine: "dense" });
        }
        let d = 1usize << n;
        let mut psi0 = None;
        for y in 0..d {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[y] = C64::new(1.0, 0.0);
            for g in &self.zimg {
                let gv = g.apply_to_vector(&v);
                for (a, b) in v.iter_mut().zip(gv) {
                    *a = (*a + b) * 0.5;
                }
            }
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                psi0 = Some(v.into_iter().map(|a| a / norm).collect::<Vec<_>>());
                break;
            }
        }
        let psi0 = psi0.ok_or_else(|| Error::InvalidArgument("tableau has no stabilized state".into()))?;
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
        cols.push(psi0);
        for x in 1..d {
            let k = x.trailing_zeros() as usize;
            let prev = &cols[x ^ (1 << k)];
            cols.push(self.ximg[k].apply_to_vector(prev));
        }
        Ok(DMatrix::from_fn(d, d, |r, c| cols[c][r]))
    }
}

fn project_out(b: (u64, u64), v: (u64, u64), w: (u64, u64)) -> (u64, u64) {
    let mut r = b;
    if symp(b, w) == 1 {
        r = (r.0 ^ v.0, r.1 ^ v.1);
    }
    if symp(b, v) == 1 {
        r = (r.0 ^ w.0, r.1 ^ w.1);
    }
    r
}

/// Symplectic Gram-Schmidt; returns pairs flattened as [e1, f1, e2, f2, ...].
fn symplectic_basis(mut list: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    while let Some(a) = list.pop() {
        if a == (0, 0) {
            continue;
        }
        let Some(pos) = list.iter().position(|&b| symp(a, b) == 1) else {
            continue;
        };
        let b = list.swap_remove(pos);
        out.push(a);
        out.push(b);
        for x in list.iter_mut() {
            *x = project_out(*x, a, b);
        }
    }
    out
}

/// Rank over GF(2) of a set of 128-bit rows.
fn gf2_rank(mut rows: Vec<u128>) -> usize {
    let mut rank = 0;
    for i in 0..rows.len() {
        let r = rows[i];
        if r == 0 {
            continue;
        }
        rank += 1;
        let lead = r.trailing_zeros();
        for row in rows.iter_mut().skip(i + 1) {
            if *row >> lead & 1 == 1 {
                *row ^= r;
            }
        }
    }
    rank
}

/// Stabilizer mixed state `rho = 2^{-N} sum_{g in <generators>} g`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerMixedState {
    n: usize,
    gens: Vec<Pauli>,
    log_weight: f64,
}

enum Relation {
    /// Index of the first anticommuting generator.
    Anticommutes(usize),
    /// P is in the group up to sign; `true` when +P is.
    InGroup(bool),
    Independent,
}

impl StabilizerMixedState {
    pub fn fully_mixed(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { n, limit: MAX_QUBITS, engine: "stabilizer" });
        }
        Ok(StabilizerMixedState { n, gens: Vec::new(), log_weight: 0.0 })
    }

    /// |0...0>.
    pub fn zero_state(n: usize) -> Result<Self> {
        let mut s = Self::fully_mixed(n)?;
        s.gens = (0..n).map(Pauli::z).collect();
        Ok(s)
    }

    /// Computational basis state |bits>.
    pub fn basis_state(n: usize, bits: u64) -> Result<Self> {
        let mut s = Self::fully_mixed(n)?;
        s.gens = (0..n).map(|k| if bits >> k & 1 == 1 { Pauli::z(k).negate() } else { Pauli::z(k) }).collect();
        Ok(s)
    }

    pub fn from_generators(n: usize, gens: Vec<Pauli>) -> Result<Self> {
        let mut s = Self::fully_mixed(n)?;
        for g in &gens {
            if !g.is_hermitian() || g.is_identity_up_to_phase() {
                return Err(Error::InvalidArgument("generators must be non-identity Hermitian Paulis".into()));
            }
        }
        for (i, g) in gens.iter().enumerate() {
            if gens[..i].iter().any(|h| !h.commutes(g)) {
                return Err(Error::InvalidArgument("generators must commute".into()));
            }
        }
        if gf2_rank(gens.iter().map(|g| g.vec()).collect()) != gens.len() {
            return Err(Error::InvalidArgument("generators must be independent".into()));
        }
        s.gens = gens;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Pauli] {
        &self.gens
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    /// Entropy in bits, N - k.
    pub fn entropy(&self) -> usize {
        self.n - self.gens.len()
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn set_log_weight(&mut self, w: f64) {
        self.log_weight = w;
    }

    pub fn purity(&self) -> f64 {
        0.5f64.powi(self.entropy() as i32)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            Err(Error::SiteOutOfRange { site, n_qubits: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_tableau(&mut self, t: &CliffordTableau) -> Result<()> {
        if t.n != self.n {
            return Err(Error::LengthMismatch { expected: self.n, found: t.n });
        }
        for g in &mut self.gens {
            *g = t.conjugate(*g);
        }
        Ok(())
    }

    /// Apply a k-qubit tableau to the listed sites (local qubit j is `sites[j]`).
    pub fn apply_local(&mut self, t: &CliffordTableau, sites: &[usize]) -> Result<()> {
        if t.n != sites.len() {
            return Err(Error::LengthMismatch { expected: t.n, found: sites.len() });
        }
        for (i, &s) in sites.iter().enumerate() {
            self.check_site(s)?;
            if sites[..i].contains(&s) {
                return Err(Error::RepeatedSite(s));
            }
        }
        for g in &mut self.gens {
            *g = conjugate_local(t, sites, *g);
        }
        Ok(())
    }

    fn relation(&self, p: &Pauli) -> Relation {
        if let Some(i) = self.gens.iter().position(|g| !g.commutes(p)) {
            return Relation::Anticommutes(i);
        }
        match self.express(p) {
            Some(combo) => {
                let mut prod = Pauli::IDENTITY;
                for (i, g) in self.gens.iter().enumerate() {
                    if combo >> i & 1 == 1 {
                        prod = prod.mul(*g);
                    }
                }
                Relation::InGroup(prod.phase == p.phase)
            }
            None => Relation::Independent,
        }
    }

    /// Which generators multiply to p up to phase, if any.
    fn express(&self, p: &Pauli) -> Option<u64> {
        let mut pivots: Vec<(u32, u128, u64)> = Vec::with_capacity(self.gens.len());
        for (i, g) in self.gens.iter().enumerate() {
            let mut v = g.vec();
            let mut c = 1u64 << i;
            for &(b, pv, pc) in &pivots {
                if v >> b & 1 == 1 {
                    v ^= pv;
                    c ^= pc;
                }
            }
            if v != 0 {
                pivots.push((v.trailing_zeros(), v, c));
            }
        }
        let mut t = p.vec();
        let mut c = 0u64;
        for &(b, pv, pc) in &pivots {
            if t >> b & 1 == 1 {
                t ^= pv;
                c ^= pc;
            }
        }
        (t == 0).then_some(c)
    }

    fn apply_outcome(&mut self, p: Pauli, rel: Relation, outcome: u8) -> Result<f64> {
        let signed = if outcome == 0 { p } else { p.negate() };
        match rel {
            Relation::Anticommutes(first) => {
                let g0 = self.gens[first];
                for (i, g) in self.gens.iter_mut().enumerate() {
                    if i != first && !g.commutes(&p) {
                        *g = g.mul(g0);
                    }
                }
                self.gens[first] = signed;
                Ok(0.5)
            }
            Relation::InGroup(plus) => {
                let det = if plus { 0 } else { 1 };
                if det == outcome {
                    Ok(1.0)
                } else {
                    Ok(0.0)
                }
            }
            Relation::Independent => {
                self.gens.push(signed);
                Ok(0.5)
            }
        }
    }

    fn check_pauli(&self, p: &Pauli) -> Result<()> {
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        if !p.is_hermitian() || (p.x | p.z) & !mask != 0 || p.is_identity_up_to_phase() {
            return Err(Error::InvalidArgument("measured operator must be a non-identity Hermitian Pauli on the register".into()));
        }
        Ok(())
    }

    pub fn measure_pauli_sample<R: Rng + ?Sized>(&mut self, p: Pauli, rng: &mut R) -> Result<MeasureOutcome> {
        self.check_pauli(&p)?;
        let rel = self.relation(&p);
        let outcome = match rel {
            Relation::InGroup(plus) => {
                if plus {
                    0
                } else {
                    1
                }
            }
            _ => rng.random::<bool>() as u8,
        };
        let prob = self.apply_outcome(p, rel, outcome)?;
        Ok(MeasureOutcome { outcome, probability: prob })
    }

    pub fn measure_pauli_forced(&mut self, p: Pauli, outcome: u8, site_hint: usize) -> Result<MeasureOutcome> {
        self.check_pauli(&p)?;
        let rel = self.relation(&p);
        let prob = self.apply_outcome(p, rel, outcome)?;
        if prob == 0.0 {
            return Err(Error::ImpossibleRecord { site: site_hint, outcome });
        }
        self.log_weight += prob.ln();
        Ok(MeasureOutcome { outcome, probability: prob })
    }

    pub fn measure_z_sample<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        self.measure_pauli_sample(Pauli::z(site), rng)
    }

    pub fn measure_z_forced(&mut self, site: usize, outcome: u8) -> Result<MeasureOutcome> {
        self.check_site(site)?;
        self.measure_pauli_forced(Pauli::z(site), outcome, site)
    }

    /// Entropy in bits of the reduced state on `mask`.
    pub fn subsystem_entropy(&self, mask: u64) -> usize {
        let full = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let a = mask & full;
        let b = !a & full;
        let restricted: Vec<u128> = self
            .gens
            .iter()
            .map(|g| ((g.x & b) as u128) | (((g.z & b) as u128) << 64))
            .collect();
        let rank_b = gf2_rank(restricted);
        a.count_ones() as usize - (self.gens.len() - rank_b)
    }

    pub fn subsystem_purity(&self, mask: u64) -> f64 {
        0.5f64.powi(self.subsystem_entropy(mask) as i32)
    }

    pub fn all_subsystem_purities(&self) -> Result<Vec<f64>> {
        if self.n > 24 {
            return Err(Error::TooManyQubits { n: self.n, limit: 24, engine: "subset table" });
        }
        Ok((0..1u64 << self.n).map(|a| self.subsystem_purity(a)).collect())
    }

    /// Tr(rho P): the sign if +-P is in the group, else 0.
    pub fn pauli_expect(&self, p: &PauliString) -> Result<f64> {
        if p.n_qubits() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, found: p.n_qubits() });
        }
        let q = Pauli::from_string(p);
        if q.is_identity_up_to_phase() {
            return Ok(1.0);
        }
        Ok(match self.relation(&q) {
            Relation::InGroup(true) => 1.0,
            Relation::InGroup(false) => -1.0,
            _ => 0.0,
        })
    }

    /// Tr(self * other), by forcing +1 outcomes of other's generators.
    pub fn overlap(&self, other: &StabilizerMixedState) -> Result<f64> {
        if other.n != self.n {
            return Err(Error::LengthMismatch { expected: self.n, found: other.n });
        }
        let mut s = self.clone();
        let mut p = 1.0;
        for g in &other.gens {
            let rel = s.relation(g);
            let pr = s.apply_outcome(*g, rel, 0)?;
            if pr == 0.0 {
                return Ok(0.0);
            }
            p *= pr;
        }
        Ok(p * 0.5f64.powi((self.n - other.gens.len()) as i32))
    }

    /// Paulis commuting with every generator (basis of the symplectic complement).
    fn commutant_basis(&self) -> Vec<u128> {
        // <v, g> = v_x . g_z + v_z . g_x, i.e. dot product with swapped halves
        let rows: Vec<u128> = self.gens.iter().map(|g| (g.z as u128) | ((g.x as u128) << 64)).collect();
        let ncols = 128;
        let mut m = rows;
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for col in 0..ncols {
            let Some(p) = (r..m.len()).find(|&i| m[i] >> col & 1 == 1) else { continue };
            m.swap(r, p);
            for i in 0..m.len() {
                if i != r && m[i] >> col & 1 == 1 {
                    m[i] ^= m[r];
                }
            }
            pivot_cols.push(col);
            r += 1;
            if r == m.len() {
                break;
            }
        }
        let used = |c: usize| (c < 64 && c < self.n) || (c >= 64 && c - 64 < self.n);
        let mut basis = Vec::new();
        for free in (0..ncols).filter(|&c| used(c) && !pivot_cols.contains(&c)) {
            let mut v: u128 = 1 << free;
            for (row, &pc) in pivot_cols.iter().enumerate() {
                if m[row] >> free & 1 == 1 {
                    v |= 1 << pc;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// A pure stabilizer state inside the support of this state, completed by
    /// random commuting Paulis with random signs.
    pub fn random_support_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StabilizerMixedState> {
        let mut s = self.clone();
        let basis = self.commutant_basis();
        while s.gens.len() < s.n {
            let mut v: u128 = 0;
            for b in &basis {
                if rng.random::<bool>() {
                    v ^= b;
                }
            }
            let cand = Pauli::hermitian(v as u64, (v >> 64) as u64, rng.random());
            if cand.is_identity_up_to_phase() {
                continue;
            }
            if let Relation::Independent = s.relation(&cand) {
                s.gens.push(cand);
            }
        }
        s.log_weight = 0.0;
        Ok(s)
    }

    /// Dense density matrix (small N only).
    pub fn to_dense(&self) -> Result<DenseState> {
        let n = self.n;
        if n > 10 {
            return Err(Error::TooManyQubits { n, limit: 10, engine: "stabilizer-to-dense" });
        }
        let d = 1usize << n;
        let mut m = DMatrix::<C64>::identity(d, d);
        for g in &self.gens {
            let gm = g.dense_matrix(n);
            m = (&m + gm * &m) * C64::new(0.5, 0.0);
        }
        let mut s = DenseState::from_matrix(n, &m)?;
        s.set_log_weight(0.0);
        Ok(s)
    }

    /// Row-reduced generator list, a canonical form of the stabilizer group.
    pub fn canonical_generators(&self) -> Vec<Pauli> {
        let mut g = self.gens.clone();
        let mut r = 0;
        for col in 0..128u32 {
            let bit = |p: &Pauli| p.vec() >> col & 1 == 1;
            let Some(p) = (r..g.len()).find(|&i| bit(&g[i])) else { continue };
            g.swap(r, p);
            let pr = g[r];
            for i in 0..g.len() {
                if i != r && bit(&g[i]) {
                    g[i] = g[i].mul(pr);
                }
            }
            r += 1;
        }
        g
    }

    /// Charge moments <Q>, <Q^2> with Q = (1/2) sum Z_i.
    pub fn charge_moments(&self) -> Result<(f64, f64)> {
        let n = self.n;
        let mut q1 = 0.0;
        let mut q2 = n as f64 / 4.0;
        for i in 0..n {
            q1 += 0.5 * self.pauli_expect(&PauliString::single(n, i, PauliLetter::Z)?)?;
            for j in (i + 1)..n {
                let mut p = PauliString::single(n, i, PauliLetter::Z)?;
                p = {
                    let mut l = p.letters().to_vec();
                    l[j] = PauliLetter::Z;
                    PauliString::new(l)
                };
                q2 += 0.5 * self.pauli_expect(&p)?;
            }
        }
        Ok((q1, q2))
    }
}

pub(crate) fn conjugate_local(t: &CliffordTableau, sites: &[usize], g: Pauli) -> Pauli {
    let mut lx = 0u64;
    let mut lz = 0u64;
    let mut clear = 0u64;
    for (j, &s) in sites.iter().enumerate() {
        lx |= (g.x >> s & 1) << j;
        lz |= (g.z >> s & 1) << j;
        clear |= 1 << s;
    }
    let img = t.conjugate(Pauli { x: lx, z: lz, phase: 0 });
    let mut nx = g.x & !clear;
    let mut nz = g.z & !clear;
    for (j, &s) in sites.iter().enumerate() {
        nx |= (img.x >> j & 1) << s;
        nz |= (img.z >> j & 1) << s;
    }
    Pauli { x: nx, z: nz, phase: (g.phase + img.phase) & 3 }
}
