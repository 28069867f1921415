//! Seeded random states and unitaries for property tests, benches and
//! searches.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, DensityMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state vector.
pub fn pure_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

/// Density matrix from the Ginibre ensemble, `G G^dagger / Tr`, with `rank`
/// columns (full rank when `rank == dim`).
pub fn density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g: Vec<C64> = (0..dim * rank).map(|_| gaussian(rng)).collect();
    let mut m = ComplexMatrix::from_fn(dim, |i, j| {
        (0..rank)
            .map(|k| g[i * rank + k] * g[j * rank + k].conj())
            .sum()
    });
    let tr = m.trace().re;
    m = m.scale_real(1.0 / tr).hermitize();
    DensityMatrix::from_trusted(m)
}

/// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        for e in &cols {
            let ov: C64 = e.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= ov * ei;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|z| *z /= norm);
            cols.push(v);
        }
    }
    ComplexMatrix::from_fn(dim, |i, j| cols[j][i])
}

/// `U ρ U^dagger`.
pub fn conjugate(rho: &DensityMatrix, u: &ComplexMatrix) -> DensityMatrix {
    let m = (&(u * rho.matrix()) * &u.adjoint()).hermitize();
    DensityMatrix::from_trusted(m)
}
