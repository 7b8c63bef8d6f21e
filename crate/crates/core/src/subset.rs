//! Subset-lattice transforms over bitmask-indexed tables, and the map between
//! entanglement features and channel eigenvalues.

/// In-place zeta transform: `f[A] <- sum_{B subset of A} f[B]`.
pub fn zeta(f: &mut [f64]) {
    let n = f.len();
    assert!(n.is_power_of_two());
    let mut bit = 1;
    while bit < n {
        for a in 0..n {
            if a & bit != 0 {
                f[a] += f[a ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// In-place Moebius transform, the inverse of [`zeta`].
pub fn mobius(f: &mut [f64]) {
    let n = f.len();
    assert!(n.is_power_of_two());
    let mut bit = 1;
    while bit < n {
        for a in 0..n {
            if a & bit != 0 {
                f[a] -= f[a ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// Channel eigenvalues from subsystem purities:
/// `lambda_A = (1 - q^2)^{-|A|} sum_{B subset A} P_B (-q)^{|B|}`.
pub fn lambdas_from_purities(purities: &[f64], q: f64) -> Vec<f64> {
    let mut f: Vec<f64> = purities
        .iter()
        .enumerate()
        .map(|(b, p)| p * (-q).powi(b.count_ones() as i32))
        .collect();
    zeta(&mut f);
    for (a, v) in f.iter_mut().enumerate() {
        *v /= (1.0 - q * q).powi(a.count_ones() as i32);
    }
    f
}

/// Inverse map: `q^{|A|} P_A = sum_{B subset A} (q^2 - 1)^{|B|} lambda_B`.
pub fn purities_from_lambdas(lambdas: &[f64], q: f64) -> Vec<f64> {
    let mut f: Vec<f64> = lambdas
        .iter()
        .enumerate()
        .map(|(b, l)| l * (q * q - 1.0).powi(b.count_ones() as i32))
        .collect();
    zeta(&mut f);
    for (a, v) in f.iter_mut().enumerate() {
        *v /= q.powi(a.count_ones() as i32);
    }
    f
}
