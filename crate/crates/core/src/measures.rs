//! Two-qubit correlation measures and their single-qubit potentials.
//!
//! * concurrence (Wootters),
//! * three-setting steering `S = max(0, (sqrt(Tr R) - 1) / (sqrt(3) - 1))`,
//! * Bell nonlocality `B = max(0, (sqrt(Tr R - min eig R) - 1) / (sqrt(2) - 1))`,
//!
//! with `R = TᵀT` built from the correlation matrix of the Bloch form
//!
//! ```text
//! ρ = ¼ (I⊗I + u·σ⊗I + I⊗v·σ + Σ_{m,n} T_mn σ_n⊗σ_m)
//! ```
//!
//! Note the index placement: the row index of `T` belongs to the second qubit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, pauli, singular_values, sqrt_psd, ComplexMatrix, DensityMatrix, C64,
};
use crate::states::{mix_on_ideal_bs, mix_on_imperfect_bs, BeamSplitter, QubitState};

/// Tolerance of the hierarchy check in [`measure_triple`].
pub const HIERARCHY_TOL: f64 = 1e-9;

/// Values in `[-ZERO_SNAP, 0]` before `max(0, ·)` are boundary states.
const ZERO_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDecomposition {
    /// First-party Bloch vector.
    pub u: [f64; 3],
    /// Second-party Bloch vector.
    pub v: [f64; 3],
    /// `t[m][n] = Tr[ρ (σ_n ⊗ σ_m)]`.
    pub t: [[f64; 3]; 3],
}

impl BlochDecomposition {
    /// `R = TᵀT`.
    pub fn r_matrix(&self) -> [[f64; 3]; 3] {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..3).map(|k| self.t[k][i] * self.t[k][j]).sum();
            }
        }
        r
    }

    /// Rebuilds the density matrix from the Bloch form.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let id = pauli::identity();
        let sig = pauli::all();
        let mut m = id.kron(&id).expect("4x4");
        for n in 0..3 {
            m = &m + &sig[n].kron(&id).expect("4x4").scale_real(self.u[n]);
            m = &m + &id.kron(&sig[n]).expect("4x4").scale_real(self.v[n]);
        }
        for (mi, row) in self.t.iter().enumerate() {
            for (ni, &tv) in row.iter().enumerate() {
                m = &m + &sig[ni].kron(&sig[mi]).expect("4x4").scale_real(tv);
            }
        }
        m.scale_real(0.25)
    }
}

/// Concurrence, steering and Bell-nonlocality values of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureTriple {
    pub c: f64,
    pub s: f64,
    pub b: f64,
}

impl MeasureTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.c, self.s, self.b]
    }
}

fn require_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::InvalidState(format!(
            "two-qubit measure applied to a {}-dimensional state",
            rho.dim()
        )));
    }
    Ok(())
}

fn expectation(rho: &ComplexMatrix, op: &ComplexMatrix) -> f64 {
    (rho * op).trace().re
}

pub fn bloch_decompose(rho: &DensityMatrix) -> Result<BlochDecomposition> {
    require_two_qubit(rho)?;
    let m = rho.matrix();
    let id = pauli::identity();
    let sig = pauli::all();
    let mut out = BlochDecomposition {
        u: [0.0; 3],
        v: [0.0; 3],
        t: [[0.0; 3]; 3],
    };
    for n in 0..3 {
        out.u[n] = expectation(m, &sig[n].kron(&id)?);
        out.v[n] = expectation(m, &id.kron(&sig[n])?);
    }
    for (mi, row) in out.t.iter_mut().enumerate() {
        for (ni, entry) in row.iter_mut().enumerate() {
            *entry = expectation(m, &sig[ni].kron(&sig[mi])?);
        }
    }
    Ok(out)
}

fn clamp_measure(x: f64) -> f64 {
    if x.is_nan() {
        return 0.0;
    }
    if x <= ZERO_SNAP {
        0.0
    } else {
        x.min(1.0)
    }
}

/// Wootters concurrence `max(0, λ₁ - λ₂ - λ₃ - λ₄)`.
///
/// The `λ_i`, in descending order, are the square roots of the eigenvalues
/// of `ρ (σ₂⊗σ₂) ρ* (σ₂⊗σ₂)`. They equal the singular values of
/// `sqrt(ρ) (σ₂⊗σ₂) sqrt(ρ)*`, which is how they are computed here: taking
/// square roots of near-zero eigenvalues would cost half the digits on
/// rank-deficient (e.g. pure) states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    let yy = pauli::y().kron(&pauli::y())?;
    let root = sqrt_psd(rho.matrix())?;
    let lambdas = singular_values(&(&(&root * &yy) * &root.conj()));
    Ok(clamp_measure(
        lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3],
    ))
}

fn r_trace_and_min(d: &BlochDecomposition) -> Result<(f64, f64)> {
    let r = d.r_matrix();
    let rows: Vec<Vec<f64>> = r.iter().map(|row| row.to_vec()).collect();
    let ev = hermitian_eigenvalues(&ComplexMatrix::from_real_rows(&rows)?)?;
    let tr = r[0][0] + r[1][1] + r[2][2];
    Ok((tr, ev[0]))
}

fn steering_from(tr: f64) -> f64 {
    clamp_measure((tr.max(0.0).sqrt() - 1.0) / (3f64.sqrt() - 1.0))
}

fn bell_from(tr: f64, min_eig: f64) -> f64 {
    clamp_measure(((tr - min_eig).max(0.0).sqrt() - 1.0) / (2f64.sqrt() - 1.0))
}

/// Three-measurement steering measure.
pub fn steering(rho: &DensityMatrix) -> Result<f64> {
    let (tr, _) = r_trace_and_min(&bloch_decompose(rho)?)?;
    Ok(steering_from(tr))
}

/// Two-measurement Bell-nonlocality measure.
pub fn bell(rho: &DensityMatrix) -> Result<f64> {
    let (tr, min) = r_trace_and_min(&bloch_decompose(rho)?)?;
    Ok(bell_from(tr, min))
}

/// All three measures, with the set-inclusion hierarchy
/// (Bell-nonlocal ⊂ steerable ⊂ entangled) enforced.
pub fn measure_triple(rho: &DensityMatrix) -> Result<MeasureTriple> {
    let c = concurrence(rho)?;
    let (tr, min) = r_trace_and_min(&bloch_decompose(rho)?)?;
    let s = steering_from(tr);
    let b = bell_from(tr, min);
    if s > HIERARCHY_TOL && c <= 0.0 {
        return Err(Error::HierarchyViolation(format!(
            "steering {s:e} on a state with zero concurrence"
        )));
    }
    if b > HIERARCHY_TOL && s <= 0.0 {
        return Err(Error::HierarchyViolation(format!(
            "Bell nonlocality {b:e} on a non-steerable state"
        )));
    }
    Ok(MeasureTriple { c, s, b })
}

/// Concurrence, steering and Bell potentials of `σ(p, x)`: the measures of
/// its output behind `bs`, or behind the balanced coherent splitter when
/// `bs` is `None`.
pub fn potentials(s: &QubitState, bs: Option<&BeamSplitter>) -> Result<MeasureTriple> {
    let rho = match bs {
        None => mix_on_ideal_bs(s),
        Some(bs) => mix_on_imperfect_bs(s, bs),
    };
    measure_triple(&rho)
}

/// Smallest eigenvalue of the partial transpose on the second qubit.
/// Negative iff the state is entangled (Peres-Horodecki).
pub fn partial_transpose_min_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    let m = rho.matrix();
    let pt = ComplexMatrix::from_fn(4, |i, j| {
        let (a, b) = (i / 2, i % 2);
        let (c, d) = (j / 2, j % 2);
        m[(a * 2 + d, c * 2 + b)]
    });
    Ok(hermitian_eigenvalues(&pt)?[0])
}

/// `2 |ad - bc|` for a pure two-qubit vector `(a, b, c, d)`.
pub fn pure_state_concurrence(psi: &[C64; 4]) -> f64 {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm() / norm
}
