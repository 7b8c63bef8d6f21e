//! Haar-random unitaries and pure states.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed d x d unitary: QR of a Ginibre matrix with the phases of
/// R's diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary4<R: Rng + ?Sized>(rng: &mut R) -> Matrix4<C64> {
    let u = haar_unitary(4, rng);
    Matrix4::from_fn(|i, j| u[(i, j)])
}

/// Haar-random pure state of dimension d.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Uniform phase e^{i theta}.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(1.0, t)
}
