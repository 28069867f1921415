//! Displaced-parity Wigner functions for states living in the lowest two or
//! three Fock levels.
//!
//! `W(α) = (2/π) Tr[ρ D(α) Π D(α)^†]` with `Π = (-1)^n`, normalized so that
//! `∫ W d²α = 1` with `d²α = d(Re α) d(Im α)`.
//!
//! The displacement is built in a truncated Fock space of dimension
//! [`FOCK_TRUNCATION`]. Writing `α = |α| e^{iθ}`,
//!
//! ```text
//! D(α) = U_θ S exp(-i|α| J) S^† U_θ^†,   U_θ = diag(e^{ikθ}),  S = diag(i^k)
//! ```
//!
//! where `J` is the real symmetric tridiagonal matrix with off-diagonal
//! `sqrt(k+1)`. `J` is diagonalized once, so every grid point costs one
//! diagonal exponential and a few matrix-vector products.

use std::f64::consts::FRAC_2_PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fmt_sig, round_sig};
use crate::linalg::{symmetric_eigen, ComplexMatrix, DensityMatrix, C64, JACOBI_TOL};

/// Fock-space dimension used to build `D(α)`. Keeps the truncation error of
/// `W` below 1e-9 for `|α| ≤ 3√2`, the corner of the default grid.
pub const FOCK_TRUNCATION: usize = 64;

pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Largest `|11⟩` population accepted by [`qutrit_encode`].
pub const ELEVEN_TOL: f64 = 1e-6;

/// Largest imaginary part of `Tr[ρ D Π D^†]` tolerated before it is discarded.
pub const IMAG_TOL: f64 = 1e-10;

/// Grid values smaller in magnitude than this are below the truncation
/// accuracy and are written as zero.
pub const NOISE_FLOOR: f64 = 1e-12;

pub const CSV_HEADER: &str = "alpha_re,alpha_im,w";

/// Rectangular grid in the complex `α` plane (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::square(3.0, 121)
    }
}

impl GridSpec {
    /// `[-half_width, half_width]²` with `n` points per axis.
    pub fn square(half_width: f64, n: usize) -> Self {
        GridSpec {
            re_min: -half_width,
            re_max: half_width,
            n_re: n,
            im_min: -half_width,
            im_max: half_width,
            n_im: n,
        }
    }

    pub fn points(&self) -> usize {
        self.n_re.saturating_mul(self.n_im)
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = [self.re_min, self.re_max, self.im_min, self.im_max];
        if bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::OutOfRange("grid bounds must be finite".into()));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(Error::OutOfRange(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        if self.re_max <= self.re_min || self.im_max <= self.im_min {
            return Err(Error::OutOfRange("grid bounds must be increasing".into()));
        }
        if self.points() > MAX_GRID_POINTS {
            return Err(Error::GridTooLarge(self.points()));
        }
        Ok(())
    }

    pub fn re_axis(&self) -> Vec<f64> {
        axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        axis(self.im_min, self.im_max, self.n_im)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `lo:hi:n` for a square grid, or `lo:hi:n,lo:hi:n` for (re, im).
    fn from_str(s: &str) -> Result<Self> {
        fn part(s: &str) -> Result<(f64, f64, usize)> {
            let bad = || Error::OutOfRange(format!("grid axis '{s}' is not lo:hi:n"));
            let fields: Vec<&str> = s.trim().split(':').collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let lo = fields[0].trim().parse().map_err(|_| bad())?;
            let hi = fields[1].trim().parse().map_err(|_| bad())?;
            let n = fields[2].trim().parse().map_err(|_| bad())?;
            Ok((lo, hi, n))
        }
        let axes: Vec<&str> = s.split(',').collect();
        let (re, im) = match axes.as_slice() {
            [one] => {
                let a = part(one)?;
                (a, a)
            }
            [re, im] => (part(re)?, part(im)?),
            _ => return Err(Error::OutOfRange(format!("cannot parse grid '{s}'"))),
        };
        let spec = GridSpec {
            re_min: re.0,
            re_max: re.1,
            n_re: re.2,
            im_min: im.0,
            im_max: im.1,
            n_im: im.2,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GridSpec {
    /// Inverse of the `FromStr` form; square grids print as one axis.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = (
            (self.re_min, self.re_max, self.n_re),
            (self.im_min, self.im_max, self.n_im),
        );
        if re == im {
            write!(f, "{}:{}:{}", re.0, re.1, re.2)
        } else {
            write!(f, "{}:{}:{},{}:{}:{}", re.0, re.1, re.2, im.0, im.1, im.2)
        }
    }
}

/// Wigner function sampled on a grid; `values[i][j]` is `W(alpha_re[i] + i·alpha_im[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub alpha_re: Vec<f64>,
    pub alpha_im: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl PhaseSpaceGrid {
    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid-rule integral of `f(W)` over the grid.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let wr = trapezoid_weights(&self.alpha_re);
        let wi = trapezoid_weights(&self.alpha_im);
        let mut total = 0.0;
        for (i, row) in self.values.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                total += wr[i] * wi[j] * f(w);
            }
        }
        total
    }

    pub fn normalization(&self) -> f64 {
        self.integrate(|w| w)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.alpha_re.len() * self.alpha_im.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, &re) in self.alpha_re.iter().enumerate() {
            for (j, &im) in self.alpha_im.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_sig(re),
                    fmt_sig(im),
                    fmt_sig(self.values[i][j])
                );
            }
        }
        out
    }

    /// Parses the CSV written by [`PhaseSpaceGrid::to_csv`] (rows ordered by
    /// `alpha_re`, then `alpha_im`).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Format(format!("expected header '{CSV_HEADER}'")));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", k + 2)))?;
            if fields.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 fields", k + 2)));
            }
            rows.push((fields[0], fields[1], fields[2]));
        }
        let mut alpha_im: Vec<f64> = Vec::new();
        for r in &rows {
            if alpha_im.contains(&r.1) {
                break;
            }
            alpha_im.push(r.1);
        }
        let n_im = alpha_im.len();
        if n_im == 0 || rows.len() % n_im != 0 {
            return Err(Error::Format("rows do not form a rectangular grid".into()));
        }
        let mut alpha_re = Vec::new();
        let mut values = Vec::new();
        for chunk in rows.chunks(n_im) {
            let re = chunk[0].0;
            if chunk
                .iter()
                .zip(&alpha_im)
                .any(|(r, &im)| r.0 != re || r.1 != im)
            {
                return Err(Error::Format("rows do not form a rectangular grid".into()));
            }
            alpha_re.push(re);
            values.push(chunk.iter().map(|r| r.2).collect());
        }
        Ok(PhaseSpaceGrid {
            alpha_re,
            alpha_im,
            values,
        })
    }
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[k + 1] - x[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// Maps a two-qubit state with an empty `|11⟩` sector onto a qutrit via
/// `|00⟩ → |0⟩, |01⟩ → |1⟩, |10⟩ → |2⟩`.
pub fn qutrit_encode(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimMismatch(rho.dim(), 4));
    }
    let m = rho.matrix();
    let eleven = m[(3, 3)].re;
    if eleven > ELEVEN_TOL {
        return Err(Error::ElevenPopulated(eleven));
    }
    let block = m.submatrix(&[0, 1, 2]);
    let tr = block.trace().re;
    DensityMatrix::new(block.scale_real(1.0 / tr))
}

/// Rows `0..rows` of the truncated displacement operator, reusable across
/// grid points.
#[derive(Debug, Clone)]
pub struct Displacement {
    n: usize,
    lambda: Vec<f64>,
    /// Row-major `n×n`, column `l` is the eigenvector of `lambda[l]`.
    vectors: Vec<f64>,
}

impl Displacement {
    pub fn new(n_trunc: usize) -> Self {
        let n = n_trunc.max(2);
        let mut j = vec![0.0; n * n];
        for k in 0..n - 1 {
            let s = ((k + 1) as f64).sqrt();
            j[k * n + k + 1] = s;
            j[(k + 1) * n + k] = s;
        }
        let eig = symmetric_eigen(&j, n, JACOBI_TOL);
        Displacement {
            n,
            lambda: eig.values,
            vectors: eig.vectors,
        }
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    /// `⟨m| D(α) |k⟩` for `m < rows`, `k < n_trunc`, as `rows` vectors.
    pub fn rows(&self, alpha: C64, rows: usize) -> Vec<Vec<C64>> {
        let n = self.n;
        let (r, theta) = (alpha.norm(), alpha.arg());
        let phases: Vec<C64> = self
            .lambda
            .iter()
            .map(|&l| C64::from_polar(1.0, -r * l))
            .collect();
        let i_pow = |k: usize| match k % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        (0..rows)
            .map(|m| {
                let weighted: Vec<C64> = (0..n)
                    .map(|l| phases[l] * self.vectors[m * n + l])
                    .collect();
                let left = i_pow(m) * C64::from_polar(1.0, m as f64 * theta);
                (0..n)
                    .map(|k| {
                        let e: C64 = (0..n).map(|l| weighted[l] * self.vectors[k * n + l]).sum();
                        let right = i_pow(k).conj() * C64::from_polar(1.0, -(k as f64) * theta);
                        left * e * right
                    })
                    .collect()
            })
            .collect()
    }

    /// `W(α)` for a state on the lowest `rho.dim()` Fock levels.
    pub fn wigner_at(&self, rho: &ComplexMatrix, alpha: C64) -> Result<f64> {
        let d = rho.dim();
        let rows = self.rows(alpha, d);
        let mut total = C64::new(0.0, 0.0);
        for m in 0..d {
            for nn in 0..d {
                let mut parity = C64::new(0.0, 0.0);
                for k in 0..self.n {
                    let term = rows[m][k] * rows[nn][k].conj();
                    parity += if k % 2 == 0 { term } else { -term };
                }
                total += rho[(nn, m)] * parity;
            }
        }
        if total.im.abs() > IMAG_TOL {
            return Err(Error::NonHermitian(total.im.abs()));
        }
        Ok(FRAC_2_PI * total.re)
    }
}

fn check_fock_state(rho: &DensityMatrix, n_trunc: usize) -> Result<()> {
    if rho.dim() > 3 || rho.dim() >= n_trunc {
        return Err(Error::OutOfRange(format!(
            "Wigner functions need a state on at most 3 Fock levels, got dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// Wigner function at one point.
pub fn wigner_point(rho: &DensityMatrix, alpha: C64) -> Result<f64> {
    check_fock_state(rho, FOCK_TRUNCATION)?;
    Displacement::new(FOCK_TRUNCATION).wigner_at(rho.matrix(), alpha)
}

pub fn wigner_function(rho: &DensityMatrix, grid: &GridSpec) -> Result<PhaseSpaceGrid> {
    wigner_function_with(rho, grid, FOCK_TRUNCATION)
}

/// Wigner function on a grid with an explicit Fock truncation.
pub fn wigner_function_with(
    rho: &DensityMatrix,
    grid: &GridSpec,
    n_trunc: usize,
) -> Result<PhaseSpaceGrid> {
    grid.validate()?;
    check_fock_state(rho, n_trunc)?;
    let disp = Displacement::new(n_trunc);
    let alpha_re = grid.re_axis();
    let alpha_im = grid.im_axis();
    let values = alpha_re
        .par_iter()
        .map(|&re| {
            alpha_im
                .iter()
                .map(|&im| disp.wigner_at(rho.matrix(), C64::new(re, im)).map(snap))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseSpaceGrid {
        alpha_re: alpha_re.into_iter().map(round_sig).collect(),
        alpha_im: alpha_im.into_iter().map(round_sig).collect(),
        values,
    })
}

fn snap(w: f64) -> f64 {
    if w.abs() < NOISE_FLOOR {
        0.0
    } else {
        round_sig(w)
    }
}

/// Phase-space volume of the negative part, `∫ max(0, -W) d²α` (trapezoid).
pub fn wigner_negativity(g: &PhaseSpaceGrid) -> f64 {
    g.integrate(|w| (-w).max(0.0))
}

/// Closed forms used as oracles: `W` of `|0⟩` and `|1⟩`.
pub fn vacuum_wigner(alpha: C64) -> f64 {
    FRAC_2_PI * (-2.0 * alpha.norm_sqr()).exp()
}

pub fn one_photon_wigner(alpha: C64) -> f64 {
    let r2 = alpha.norm_sqr();
    FRAC_2_PI * (4.0 * r2 - 1.0) * (-2.0 * r2).exp()
}

/// Exact negativity of `|1⟩`: `2 e^{-1/2} - 1`.
pub fn one_photon_negativity() -> f64 {
    2.0 * (-0.5_f64).exp() - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{basis_state, mix_on_ideal_bs, qubit_matrix, singlet};
    use crate::QubitState;

    fn fock(k: usize) -> DensityMatrix {
        basis_state(2, k)
    }

    #[test]
    fn origin_values() {
        let w0 = wigner_point(&fock(0), C64::new(0.0, 0.0)).unwrap();
        let w1 = wigner_point(&fock(1), C64::new(0.0, 0.0)).unwrap();
        assert!((w0 - FRAC_2_PI).abs() < 1e-12);
        assert!((w1 + FRAC_2_PI).abs() < 1e-12);
    }

    #[test]
    fn truncation_error_below_1e9_on_grid_corner() {
        let disp = Displacement::new(FOCK_TRUNCATION);
        let corner = 3.0 * 2f64.sqrt();
        for k in 0..=40 {
            let r = corner * k as f64 / 40.0;
            for theta in [0.0, 0.7, 2.1, -1.3] {
                let a = C64::from_polar(r, theta);
                let w0 = disp.wigner_at(fock(0).matrix(), a).unwrap();
                let w1 = disp.wigner_at(fock(1).matrix(), a).unwrap();
                assert!((w0 - vacuum_wigner(a)).abs() < 1e-9, "r={r}");
                assert!((w1 - one_photon_wigner(a)).abs() < 1e-9, "r={r}");
            }
        }
    }

    #[test]
    fn short_truncation_is_visibly_wrong() {
        let disp = Displacement::new(10);
        let a = C64::new(3.0, 3.0);
        let w = disp.wigner_at(fock(0).matrix(), a).unwrap();
        assert!((w - vacuum_wigner(a)).abs() > 1e-6);
    }

    #[test]
    fn qubit_coherence_matches_closed_form() {
        let s = QubitState::new(0.3, C64::new(0.2, -0.3)).unwrap();
        let rho = qubit_matrix(&s);
        for a in [C64::new(0.4, -0.2), C64::new(-1.1, 0.5), C64::new(0.0, 0.9)] {
            // ρ = [[1-p, x], [x*, p]] has ⟨a⟩ = x*, so the cross term is 4 Re(x α).
            let x = s.x();
            let expect = FRAC_2_PI
                * (-2.0 * a.norm_sqr()).exp()
                * (1.0 - 2.0 * s.p() + 4.0 * s.p() * a.norm_sqr() + 4.0 * (x * a).re);
            let got = wigner_point(&rho, a).unwrap();
            assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        }
    }

    #[test]
    fn vacuum_grid_nonnegative_and_normalized() {
        let g = wigner_function(&fock(0), &GridSpec::default()).unwrap();
        assert!(g.min() >= 0.0);
        assert!((g.normalization() - 1.0).abs() < 2e-3);
        assert_eq!(wigner_negativity(&g), 0.0);
    }

    #[test]
    fn photon_negativity_matches_exact_value() {
        let g = wigner_function(&fock(1), &GridSpec::square(3.0, 241)).unwrap();
        assert!((wigner_negativity(&g) - one_photon_negativity()).abs() < 1e-3);
        assert!((g.min() + FRAC_2_PI).abs() < 1e-6);
    }

    #[test]
    fn qutrit_encoding() {
        let q = qutrit_encode(&basis_state(4, 0)).unwrap();
        assert!(q.matrix().max_abs_diff(basis_state(3, 0).matrix()) < 1e-15);

        let q = qutrit_encode(&singlet()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = [C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)];
        assert!(q.matrix().max_abs_diff(&ComplexMatrix::projector(&v)) < 1e-15);

        let rho = mix_on_ideal_bs(&QubitState::real(0.6, 0.3).unwrap());
        let q = qutrit_encode(&rho).unwrap();
        assert!(q.matrix().max_abs_diff(&rho.matrix().submatrix(&[0, 1, 2])) < 1e-15);

        let err = qutrit_encode(&basis_state(4, 3)).unwrap_err();
        assert!(matches!(err, Error::ElevenPopulated(_)));
    }

    #[test]
    fn grid_limits() {
        let huge = GridSpec::square(3.0, 1001);
        assert_eq!(
            wigner_function(&fock(0), &huge).unwrap_err(),
            Error::GridTooLarge(1_002_001)
        );
        assert!(GridSpec::square(f64::NAN, 11).validate().is_err());
        assert!(wigner_function(&basis_state(4, 0), &GridSpec::square(1.0, 5)).is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        assert_eq!("-3:3:121".parse::<GridSpec>().unwrap(), GridSpec::default());
        let g: GridSpec = "-1:2:5, -3:0:7".parse().unwrap();
        assert_eq!((g.re_min, g.re_max, g.n_re), (-1.0, 2.0, 5));
        assert_eq!((g.im_min, g.im_max, g.n_im), (-3.0, 0.0, 7));
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("0:0:5".parse::<GridSpec>().is_err());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let rho = qubit_matrix(&QubitState::real(0.4, 0.3).unwrap());
        let g = wigner_function(&rho, &GridSpec::square(2.0, 9)).unwrap();
        let csv = g.to_csv();
        let back = PhaseSpaceGrid::from_csv(&csv).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_csv(), csv);
    }

    #[test]
    fn mixed_qubit_can_be_wigner_positive_yet_nonclassical() {
        // x² ≤ p(1 - 2p) keeps W ≥ 0 while the concurrence potential is p.
        let s = QubitState::real(0.2, 0.2).unwrap();
        let g = wigner_function(&qubit_matrix(&s), &GridSpec::default()).unwrap();
        assert!(g.min() >= 0.0);
        let cp = crate::potentials(&s, None).unwrap().c;
        assert!((cp - 0.2).abs() < 1e-9);
    }

    #[test]
    fn pure_state_negativity_vanishes_with_p() {
        let neg = |p: f64| {
            let s = QubitState::real(p, (p * (1.0 - p)).sqrt()).unwrap();
            let g = wigner_function(&qubit_matrix(&s), &GridSpec::default()).unwrap();
            wigner_negativity(&g)
        };
        let (n1, n01) = (neg(0.1), neg(0.01));
        assert!(n01 < n1);
        assert!(n01 < 1e-2);
    }
}
