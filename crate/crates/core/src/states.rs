//! State families: the vacuum/one-photon qubit `σ(p, x)`, its two-qubit
//! images behind an ideal or imperfect beam splitter, and the reference
//! states used as analytic oracles.
//!
//! Two-qubit matrices use the basis order `|00>, |01>, |10>, |11>`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, C64};

/// Slack on `|x|² <= p(1-p)`.
pub const PHYSICALITY_TOL: f64 = 1e-12;

/// Slack on `r² + t² = 1`.
pub const BS_NORM_TOL: f64 = 1e-9;

/// Single-qubit state in the `{|vac>, |1>}` basis: `[[1-p, x], [x*, p]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    p: f64,
    x: C64,
}

impl QubitState {
    pub fn new(p: f64, x: C64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::NonPhysical(format!(
                "single-photon probability p = {p} is outside [0, 1]"
            )));
        }
        if !x.re.is_finite() || !x.im.is_finite() {
            return Err(Error::NonPhysical("coherence x is not finite".into()));
        }
        let bound = p * (1.0 - p);
        if x.norm_sqr() > bound + PHYSICALITY_TOL {
            return Err(Error::NonPhysical(format!(
                "|x|^2 = {:.3e} exceeds p(1-p) = {bound:.3e}",
                x.norm_sqr()
            )));
        }
        Ok(QubitState { p, x })
    }

    pub fn real(p: f64, x: f64) -> Result<Self> {
        Self::new(p, C64::new(x, 0.0))
    }

    /// The pure state `sqrt(1-p)|vac> + sqrt(p)|1>` (x = sqrt(p(1-p))).
    pub fn pure(p: f64) -> Result<Self> {
        Self::real(p, (p * (1.0 - p)).max(0.0).sqrt())
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn x(&self) -> C64 {
        self.x
    }

    /// Same state with the coherence rotated to `|x|` (local phase gauge).
    pub fn canonical(&self) -> Self {
        QubitState {
            p: self.p,
            x: C64::new(self.x.norm(), 0.0),
        }
    }

    /// Degree of coherence `|x| / sqrt(p(1-p))`, zero for the Fock states.
    pub fn coherence_ratio(&self) -> f64 {
        let bound = (self.p * (1.0 - self.p)).sqrt();
        if bound <= 0.0 {
            0.0
        } else {
            (self.x.norm() / bound).min(1.0)
        }
    }
}

/// Beam splitter with reflection `r`, transmission `t` and output
/// decoherence `q` (`q = 0` is fully coherent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    r: f64,
    t: f64,
    q: f64,
}

impl BeamSplitter {
    pub fn new(r: f64, t: f64, q: f64) -> Result<Self> {
        for (name, v) in [("r", r), ("t", t), ("q", q)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::NonPhysical(format!(
                    "{name} = {v} is outside [0, 1]"
                )));
            }
        }
        if (r * r + t * t - 1.0).abs() > BS_NORM_TOL {
            return Err(Error::NonPhysical(format!(
                "r^2 + t^2 = {} is not 1",
                r * r + t * t
            )));
        }
        Ok(BeamSplitter { r, t, q })
    }

    /// Lossless splitter parametrized by `r`; `t = sqrt(1 - r²)`.
    pub fn from_reflection(r: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::NonPhysical(format!("r = {r} is outside [0, 1]")));
        }
        Self::new(r, (1.0 - r * r).max(0.0).sqrt(), q)
    }

    /// Balanced, coherent splitter.
    pub fn balanced() -> Self {
        BeamSplitter {
            r: FRAC_1_SQRT_2,
            t: FRAC_1_SQRT_2,
            q: 0.0,
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Coherence factor `Q = sqrt(1 - q)`.
    pub fn coherence(&self) -> f64 {
        (1.0 - self.q).sqrt()
    }
}

impl Default for BeamSplitter {
    fn default() -> Self {
        Self::balanced()
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `σ(p, x)` as a 2×2 density matrix.
pub fn vops_state(p: f64, x: C64) -> Result<DensityMatrix> {
    Ok(qubit_matrix(&QubitState::new(p, x)?))
}

pub fn qubit_matrix(s: &QubitState) -> DensityMatrix {
    let m = ComplexMatrix::from_rows(&[vec![c(1.0 - s.p), s.x], vec![s.x.conj(), c(s.p)]])
        .expect("2x2 shape");
    DensityMatrix::from_trusted(m)
}

/// Output of `σ(p, x)` mixed with the vacuum on a balanced lossless splitter.
pub fn mix_on_ideal_bs(s: &QubitState) -> DensityMatrix {
    let (p, x) = (s.p, s.x);
    let h = FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = c(1.0 - p);
    m[(0, 1)] = -x * h;
    m[(0, 2)] = x * h;
    m[(1, 0)] = -x.conj() * h;
    m[(1, 1)] = c(0.5 * p);
    m[(1, 2)] = c(-0.5 * p);
    m[(2, 0)] = x.conj() * h;
    m[(2, 1)] = c(-0.5 * p);
    m[(2, 2)] = c(0.5 * p);
    DensityMatrix::from_trusted(m)
}

/// Output behind an imperfect splitter: coherences to the vacuum scale with
/// `Q r`, `Q t`; the one-photon coherence with `Q²`. The matrix is built from
/// its upper triangle and completed Hermitian.
pub fn mix_on_imperfect_bs(s: &QubitState, bs: &BeamSplitter) -> DensityMatrix {
    let (p, x) = (s.p, s.x);
    let (r, t) = (bs.r, bs.t);
    let qc = bs.coherence();
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = c(1.0 - p);
    m[(1, 1)] = c(p * r * r);
    m[(2, 2)] = c(p * t * t);
    m[(0, 1)] = -x * (qc * r);
    m[(0, 2)] = x * (qc * t);
    m[(1, 2)] = c(-p * qc * qc * r * t);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        m[(j, i)] = m[(i, j)].conj();
    }
    DensityMatrix::from_trusted(m)
}

/// `(|01> - |10>) / sqrt(2)` projector.
pub fn singlet() -> DensityMatrix {
    let h = FRAC_1_SQRT_2;
    DensityMatrix::from_trusted(ComplexMatrix::projector(&[c(0.0), c(h), c(-h), c(0.0)]))
}

/// Computational-basis projector `|k><k|` in dimension `dim`.
pub fn basis_state(dim: usize, k: usize) -> DensityMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    m[(k, k)] = c(1.0);
    DensityMatrix::from_trusted(m)
}

pub fn maximally_mixed(dim: usize) -> DensityMatrix {
    DensityMatrix::from_trusted(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
}

/// `w · singlet + (1 - w) · I/4`.
pub fn werner_state(w: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::OutOfRange(format!(
            "Werner weight w = {w} is outside [0, 1]"
        )));
    }
    let m =
        &singlet().matrix().scale_real(w) + &ComplexMatrix::identity(4).scale_real((1.0 - w) / 4.0);
    Ok(DensityMatrix::from_trusted(m))
}

/// Convex combination `beta · a + (1 - beta) · b`.
pub fn interpolate(a: &DensityMatrix, b: &DensityMatrix, beta: f64) -> Result<DensityMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange(format!(
            "beta = {beta} is outside [0, 1]"
        )));
    }
    let m = &a.matrix().scale_real(beta) + &b.matrix().scale_real(1.0 - beta);
    Ok(DensityMatrix::from_trusted(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vops_examples() {
        let vac = vops_state(0.0, c(0.0)).unwrap();
        assert_eq!(vac, basis_state(2, 0));
        let one = vops_state(1.0, c(0.0)).unwrap();
        assert_eq!(one, basis_state(2, 1));
        let plus = vops_state(0.5, c(0.5)).unwrap();
        let ev = plus.eigenvalues();
        assert!(ev[0].abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vops_rejects_excess_coherence() {
        assert!(matches!(
            vops_state(0.5, c(0.51)),
            Err(Error::NonPhysical(_))
        ));
        assert!(matches!(
            vops_state(1.5, c(0.0)),
            Err(Error::NonPhysical(_))
        ));
        assert!(vops_state(0.5, C64::new(0.3, 0.4)).is_ok());
    }

    #[test]
    fn ideal_bs_examples() {
        let s = mix_on_ideal_bs(&QubitState::real(1.0, 0.0).unwrap());
        assert!(s.matrix().max_abs_diff(singlet().matrix()) < 1e-15);

        let v = mix_on_ideal_bs(&QubitState::real(0.0, 0.0).unwrap());
        assert_eq!(v, basis_state(4, 0));

        let pure = mix_on_ideal_bs(&QubitState::real(0.5, 0.5).unwrap());
        assert!((pure.matrix()[(0, 1)].re + 0.5 * FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((pure.matrix()[(0, 1)].re + 0.3536).abs() < 1e-4);
        let ev = pure.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn imperfect_bs_special_cases() {
        let photon = QubitState::real(1.0, 0.0).unwrap();
        let r0 = mix_on_imperfect_bs(&photon, &BeamSplitter::new(0.0, 1.0, 0.0).unwrap());
        // With r = 0 the photon leaves through a single port: |10><10|.
        assert_eq!(r0, basis_state(4, 2));

        let bs = BeamSplitter::from_reflection(0.6, 1.0).unwrap();
        let dephased = mix_on_imperfect_bs(&photon, &bs);
        let want = ComplexMatrix::diag(&[0.0, 0.36, 0.64, 0.0]);
        assert!(dephased.matrix().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn imperfect_bs_is_valid() {
        let s = QubitState::real(0.4, 0.3).unwrap();
        let bs = BeamSplitter::from_reflection(0.3, 0.2).unwrap();
        let rho = mix_on_imperfect_bs(&s, &bs);
        assert!(DensityMatrix::new(rho.into_matrix()).is_ok());
    }

    #[test]
    fn werner_examples() {
        assert_eq!(
            werner_state(1.0)
                .unwrap()
                .matrix()
                .max_abs_diff(singlet().matrix()),
            0.0
        );
        assert!(
            werner_state(0.0)
                .unwrap()
                .matrix()
                .max_abs_diff(maximally_mixed(4).matrix())
                < 1e-16
        );
        let ev = werner_state(0.5).unwrap().eigenvalues();
        for (got, want) in ev.iter().zip([0.125, 0.125, 0.125, 0.625]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(werner_state(1.1), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn interpolate_examples() {
        let a = basis_state(4, 0);
        let b = singlet();
        assert_eq!(interpolate(&a, &b, 1.0).unwrap(), a);
        assert_eq!(interpolate(&a, &b, 0.0).unwrap(), b);
        // |00> is orthogonal to the singlet: spectrum {0, 0, 1/2, 1/2}.
        let ev = interpolate(&a, &b, 0.5).unwrap().eigenvalues();
        for (got, want) in ev.iter().zip([0.0, 0.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(
            interpolate(&a, &basis_state(3, 0), 0.5),
            Err(Error::DimMismatch(4, 3))
        ));
        assert!(matches!(
            interpolate(&a, &b, -0.1),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn beam_splitter_validation() {
        assert!(BeamSplitter::new(0.6, 0.6, 0.0).is_err());
        assert!(BeamSplitter::new(0.6, 0.8, 1.5).is_err());
        assert!(
            (BeamSplitter::from_reflection(0.6, 0.19)
                .unwrap()
                .coherence()
                - 0.9)
                .abs()
                < 1e-15
        );
    }
}
