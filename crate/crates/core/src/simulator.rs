//! Forward model of the polarization-encoded experiment.
//!
//! The vacuum/one-photon qubit is carried by a photon whose H polarization
//! stands for `|1⟩` and V polarization for the vacuum; a second, always
//! V-polarized photon plays the vacuum input. Both photons pass a
//! polarization-dependent beam splitter (a PBS/HWP/PBS interferometer) and
//! the two-photon output in ports 3 and 4 is analysed with wave plates,
//! PBSs, a fiber beam splitter (FBS) and three detectors A, B, C.
//!
//! Two-photon states are stored as a symmetric coefficient matrix `C` over
//! the four output modes `[H3, V3, H4, V4]`, meaning `Σ C_ij a†_i a†_j |0⟩`.
//! A linear-optics element with creation-operator map `U` acts as
//! `C → U C Uᵀ`.
//!
//! Coincidence counts are Poisson draws whose means come from the exact
//! detection probabilities, the detector efficiencies, and a dark-coincidence
//! rate. The simulator emits raw counts; all correction factors belong to
//! [`crate::reconstruction`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::round_sig;
use crate::linalg::{ComplexMatrix, C64};
use crate::states::{BeamSplitter, QubitState};

pub const SCHEDULE_VERSION: u32 = 1;

/// Integration time of the M_A, tomography and calibration records.
pub const LONG_RECORD_S: f64 = 50.0;
/// Integration time of one visibility-sweep sample.
pub const SWEEP_SAMPLE_S: f64 = 5.0;
pub const SWEEP_SAMPLES: usize = 50;

/// Output modes, in the order used by [`TwoPhotonState`].
pub const H3: usize = 0;
pub const V3: usize = 1;
pub const H4: usize = 2;
pub const V4: usize = 3;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Half-wave plate at `theta` degrees, `[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]`
/// acting on `(H, V)` amplitudes.
pub fn hwp_matrix(theta_deg: f64) -> ComplexMatrix {
    let t = 2.0 * theta_deg.to_radians();
    let (s, co) = t.sin_cos();
    ComplexMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => c(co),
        (1, 1) => c(-co),
        _ => c(s),
    })
}

/// Quarter-wave plate at `theta` degrees, `R(-θ) diag(1, i) R(θ)`.
pub fn qwp_matrix(theta_deg: f64) -> ComplexMatrix {
    let (s, co) = theta_deg.to_radians().sin_cos();
    let rot = |sgn: f64| {
        ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c(co),
            (0, 1) => c(sgn * s),
            _ => c(-sgn * s),
        })
    };
    let mut phase = ComplexMatrix::identity(2);
    phase[(1, 1)] = C64::new(0.0, 1.0);
    &(&rot(-1.0) * &phase) * &rot(1.0)
}

/// Creation-operator map of a PBS on modes `[H_a, V_a, H_b, V_b]`
/// (inputs a, b) to `[H_1, V_1, H_2, V_2]` (outputs 1, 2): H is transmitted,
/// V is reflected, and the V of input a picks up a sign.
///
/// Column `k` holds the output amplitudes of input mode `k`.
pub fn pbs_transform() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = c(1.0);
    m[(3, 1)] = c(-1.0);
    m[(2, 2)] = c(1.0);
    m[(1, 3)] = c(1.0);
    m
}

/// Embeds a 2×2 polarization element acting on port `port` (0 or 1) of a
/// four-mode space.
fn on_port(op: &ComplexMatrix, port: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(4);
    let o = 2 * port;
    for i in 0..2 {
        for j in 0..2 {
            m[(o + i, o + j)] = op[(i, j)];
        }
    }
    m
}

/// Two-photon state `Σ C_ij a†_i a†_j |0⟩` over four modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    c: [[C64; 4]; 4],
}

impl TwoPhotonState {
    pub fn zero() -> Self {
        TwoPhotonState {
            c: [[C64::new(0.0, 0.0); 4]; 4],
        }
    }

    /// `(u·a†)(v·a†)|0⟩`.
    pub fn product(u: &[C64; 4], v: &[C64; 4]) -> Self {
        let mut s = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                s.c[i][j] = 0.5 * (u[i] * v[j] + v[i] * u[j]);
            }
        }
        s
    }

    /// `a†_i a†_j |0⟩`.
    pub fn pair(i: usize, j: usize) -> Self {
        let mut u = [C64::new(0.0, 0.0); 4];
        let mut v = u;
        u[i] = c(1.0);
        v[j] = c(1.0);
        Self::product(&u, &v)
    }

    pub fn coefficients(&self) -> &[[C64; 4]; 4] {
        &self.c
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.c.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..4 {
            for j in 0..4 {
                out.c[i][j] += other.c[i][j];
            }
        }
        out
    }

    /// Applies the creation-operator map `u` (4×4): `C → U C Uᵀ`.
    pub fn transform(&self, u: &ComplexMatrix) -> Self {
        let mut out = Self::zero();
        for a in 0..4 {
            for b in 0..4 {
                let mut z = C64::new(0.0, 0.0);
                for i in 0..4 {
                    for j in 0..4 {
                        z += u[(a, i)] * self.c[i][j] * u[(b, j)];
                    }
                }
                out.c[a][b] = z;
            }
        }
        out
    }

    /// `⟨self|other⟩ = 2 Σ conj(C_ij) C'_ij`.
    pub fn inner(&self, other: &Self) -> C64 {
        let mut z = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                z += self.c[i][j].conj() * other.c[i][j];
            }
        }
        2.0 * z
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self).re
    }

    /// Amplitude on the normalized Fock state `|1_i 1_j⟩` (i ≠ j) or `|2_i⟩`.
    pub fn fock_amplitude(&self, i: usize, j: usize) -> C64 {
        if i == j {
            self.c[i][i] * 2f64.sqrt()
        } else {
            2.0 * self.c[i][j]
        }
    }

    /// Amplitude for one photon at each of two distinct detectors, given the
    /// detector-by-mode amplitude matrix `l`.
    pub fn coincidence_amplitude(&self, l: &[[C64; 4]; 3], d1: usize, d2: usize) -> C64 {
        let mut z = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                z += l[d1][i] * self.c[i][j] * l[d2][j];
            }
        }
        2.0 * z
    }
}

/// Wave-plate angles (degrees) of the source and the interferometer for a
/// given input and splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceAngles {
    /// Preparation plate acting on the V-polarized first photon.
    pub hwp1: f64,
    /// Bit flip in front of the interferometer.
    pub hwp2: f64,
    pub theta_h: f64,
    pub theta_v: f64,
}

impl SourceAngles {
    pub fn new(p: f64, bs: &BeamSplitter) -> Self {
        SourceAngles {
            hwp1: 0.5 * p.sqrt().atan2(-(1.0 - p).sqrt()).to_degrees(),
            hwp2: 45.0,
            theta_h: 0.5 * (-bs.r()).atan2(-bs.t()).to_degrees(),
            theta_v: -22.5,
        }
    }
}

/// Bias of HWP₃ that undoes the bit flip of HWP₂ on port 3.
pub const HWP3_BIAS: f64 = 45.0;

/// Propagates the pure input `√(1-p)|V⟩₁ + b|H⟩₁` (with `|V⟩₂` in the other
/// input) through HWP₂, PBS₁, the arm plates, PBS₂ and the HWP₃ bias.
pub fn propagate_pure(p: f64, b: C64, bs: &BeamSplitter) -> TwoPhotonState {
    let angles = SourceAngles::new(p, bs);
    // Input modes [H1, V1, H2, V2].
    let photon1 = [b, c((1.0 - p).max(0.0).sqrt()), c(0.0), c(0.0)];
    let photon2 = [c(0.0), c(0.0), c(0.0), c(1.0)];
    let mut state = TwoPhotonState::product(&photon1, &photon2);
    state = state.transform(&on_port(&hwp_matrix(angles.hwp2), 0));
    // PBS₁: output 1 is arm_V, output 2 is arm_H.
    state = state.transform(&pbs_transform());
    let arms = &on_port(&hwp_matrix(angles.theta_v), 0) * &on_port(&hwp_matrix(angles.theta_h), 1);
    state = state.transform(&arms);
    // PBS₂: input a is arm_V, input b is arm_H; outputs are ports 3 and 4.
    state = state.transform(&pbs_transform());
    state = state.transform(&on_port(&hwp_matrix(HWP3_BIAS), 0));
    // Drop the global sign so the no-photon term enters with +√(1-p)/2.
    state.scale(c(-1.0))
}

/// A pure two-photon state with its probability in the output ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedState {
    pub weight: f64,
    pub state: TwoPhotonState,
}

/// Output ensemble for a mixed input and a decohering splitter.
///
/// Input coherence below `√(p(1-p))` is produced by a random phase flip of
/// the photon amplitude; splitter decoherence `q` by independent random sign
/// flips of the H photon in port 3 and in port 4, each with probability
/// `(1 - √(1-q))/2`.
pub fn propagate(s: &QubitState, bs: &BeamSplitter) -> Result<Vec<WeightedState>> {
    let p = s.p();
    let x = s.x();
    let eta = s.coherence_ratio();
    if !(0.0..=1.0 + 1e-12).contains(&eta) {
        return Err(Error::NonPhysical(format!(
            "coherence ratio {eta} outside [0, 1]"
        )));
    }
    let phase = if x.norm() > 0.0 {
        C64::from_polar(1.0, -x.arg())
    } else {
        c(1.0)
    };
    let b = phase * p.sqrt();
    let flip_prob = 0.5 * (1.0 - bs.coherence());
    let mut out = Vec::with_capacity(8);
    for (w_in, sign_in) in [(0.5 * (1.0 + eta), 1.0), (0.5 * (1.0 - eta), -1.0)] {
        let pure = propagate_pure(p, b * sign_in, bs);
        for (w3, s3) in [(1.0 - flip_prob, 1.0), (flip_prob, -1.0)] {
            for (w4, s4) in [(1.0 - flip_prob, 1.0), (flip_prob, -1.0)] {
                let weight = w_in * w3 * w4;
                if weight == 0.0 {
                    continue;
                }
                let flips = ComplexMatrix::diag(&[s3, 1.0, s4, 1.0]);
                out.push(WeightedState {
                    weight,
                    state: pure.transform(&flips),
                });
            }
        }
    }
    Ok(out)
}

/// Physical states carrying the logical basis `|00⟩, |01⟩, |10⟩` of the
/// vacuum/one-photon output (port 3 is the first qubit, port 4 the second).
pub fn logical_basis() -> [TwoPhotonState; 3] {
    let h = FRAC_1_SQRT_2;
    let l00 = TwoPhotonState::pair(V3, V3)
        .add(&TwoPhotonState::pair(V4, V4).scale(c(-1.0)))
        .scale(c(0.5));
    let l01 = TwoPhotonState::pair(H4, V3)
        .add(&TwoPhotonState::pair(H4, V4).scale(c(-1.0)))
        .scale(c(-h));
    let l10 = TwoPhotonState::pair(H3, V3)
        .add(&TwoPhotonState::pair(H3, V4).scale(c(-1.0)))
        .scale(c(-h));
    [l00, l01, l10]
}

/// Density matrix of an ensemble in the logical basis (3×3).
pub fn logical_density(ensemble: &[WeightedState]) -> ComplexMatrix {
    let basis = logical_basis();
    let mut rho = ComplexMatrix::zeros(3);
    for member in ensemble {
        let amps: Vec<C64> = basis.iter().map(|l| l.inner(&member.state)).collect();
        for i in 0..3 {
            for j in 0..3 {
                rho[(i, j)] += member.weight * amps[i] * amps[j].conj();
            }
        }
    }
    rho
}

/// Pair of detectors whose coincidences a record counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorPair {
    AB,
    AC,
    BC,
}

impl DetectorPair {
    pub fn indices(self) -> (usize, usize) {
        match self {
            DetectorPair::AB => (0, 1),
            DetectorPair::AC => (0, 2),
            DetectorPair::BC => (1, 2),
        }
    }
}

/// Wave-plate angles (degrees), shutter and piezo phase (radians) of one
/// record. `hwp3` is measured from the 45° bias of that plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalSetting {
    pub hwp1: f64,
    pub hwp2: f64,
    pub hwp3: f64,
    pub hwp4: f64,
    pub qwp3: f64,
    pub qwp4: f64,
    #[serde(rename = "theta_H")]
    pub theta_h: f64,
    #[serde(rename = "theta_V")]
    pub theta_v: f64,
    pub shutter_open: bool,
    pub piezo_phase: f64,
}

impl OpticalSetting {
    pub fn new(source: &SourceAngles) -> Self {
        OpticalSetting {
            hwp1: round_sig(source.hwp1),
            hwp2: round_sig(source.hwp2),
            hwp3: 0.0,
            hwp4: 0.0,
            qwp3: 0.0,
            qwp4: 0.0,
            theta_h: round_sig(source.theta_h),
            theta_v: round_sig(source.theta_v),
            shutter_open: false,
            piezo_phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let angles = [
            self.hwp1,
            self.hwp2,
            self.hwp3,
            self.hwp4,
            self.qwp3,
            self.qwp4,
            self.theta_h,
            self.theta_v,
        ];
        if angles.iter().any(|a| !a.is_finite() || a.abs() > 90.0) {
            return Err(Error::OutOfRange(
                "wave-plate angles must lie in [-90, 90] degrees".into(),
            ));
        }
        if !self.piezo_phase.is_finite() {
            return Err(Error::OutOfRange("piezo phase must be finite".into()));
        }
        Ok(())
    }

    /// Detector-by-mode amplitude matrix `L[d][mode]` for detectors A, B, C
    /// and modes `[H3, V3, H4, V4]`.
    ///
    /// In each port the light passes a QWP then a HWP; the PBS sends V to
    /// A (port 3) or C (port 4) and H towards the FBS, whose output feeds B.
    /// The port-4 branch passes the shutter and the piezo phase.
    pub fn detection_matrix(&self) -> [[C64; 4]; 3] {
        let w3 = &hwp_matrix(self.hwp3) * &qwp_matrix(self.qwp3);
        let w4 = &hwp_matrix(self.hwp4) * &qwp_matrix(self.qwp4);
        let fbs = c(FRAC_1_SQRT_2);
        let arm4 = if self.shutter_open {
            fbs * C64::from_polar(1.0, self.piezo_phase)
        } else {
            c(0.0)
        };
        let mut l = [[C64::new(0.0, 0.0); 4]; 3];
        for pol in 0..2 {
            l[0][pol] = w3[(1, pol)];
            l[1][pol] = fbs * w3[(0, pol)];
            l[1][2 + pol] = arm4 * w4[(0, pol)];
            l[2][2 + pol] = w4[(1, pol)];
        }
        l
    }
}

/// Probability that one emitted pair yields a coincidence on `pair`,
/// before detector efficiencies.
pub fn coincidence_probability(
    ensemble: &[WeightedState],
    setting: &OpticalSetting,
    pair: DetectorPair,
) -> f64 {
    let l = setting.detection_matrix();
    let (d1, d2) = pair.indices();
    ensemble
        .iter()
        .map(|m| m.weight * m.state.coincidence_amplitude(&l, d1, d2).norm_sqr())
        .sum()
}

/// Detection efficiencies, pair flux and dark-coincidence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency_a: f64,
    pub efficiency_b: f64,
    pub efficiency_c: f64,
    pub pair_rate_hz: f64,
    pub dark_coincidence_hz: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            efficiency_a: 0.5,
            efficiency_b: 0.4,
            efficiency_c: 0.45,
            pair_rate_hz: 1e3,
            dark_coincidence_hz: 1.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("efficiency_a", self.efficiency_a),
            ("efficiency_b", self.efficiency_b),
            ("efficiency_c", self.efficiency_c),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::OutOfRange(format!("{name} = {e} not in (0, 1]")));
            }
        }
        if !(self.pair_rate_hz >= 0.0 && self.pair_rate_hz.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "pair_rate_hz = {} must be finite and nonnegative",
                self.pair_rate_hz
            )));
        }
        if !(self.dark_coincidence_hz >= 0.0 && self.dark_coincidence_hz.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "dark_coincidence_hz = {} must be finite and nonnegative",
                self.dark_coincidence_hz
            )));
        }
        Ok(())
    }

    /// Pair rate giving `pairs` emitted pairs per long (50 s) record.
    pub fn with_pairs_per_record(mut self, pairs: f64) -> Self {
        self.pair_rate_hz = pairs / LONG_RECORD_S;
        self
    }

    pub fn pair_efficiency(&self, pair: DetectorPair) -> f64 {
        match pair {
            DetectorPair::AB => self.efficiency_a * self.efficiency_b,
            DetectorPair::AC => self.efficiency_a * self.efficiency_c,
            DetectorPair::BC => self.efficiency_b * self.efficiency_c,
        }
    }
}

/// One coincidence-count measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    /// Schedule slot: `MA`, `MB:<port3><port4>`, `MC`, `MD`, `CAL:AB`, `CAL:AC`.
    pub label: String,
    pub setting: OpticalSetting,
    pub detector_pair: DetectorPair,
    pub duration_s: f64,
    pub counts: u64,
}

/// Ground truth stored alongside simulated counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub p: f64,
    pub x_re: f64,
    pub x_im: f64,
    pub r: f64,
    pub t: f64,
    pub q: f64,
}

impl SourceInfo {
    pub fn new(s: &QubitState, bs: &BeamSplitter) -> Self {
        SourceInfo {
            p: round_sig(s.p()),
            x_re: round_sig(s.x().re),
            x_im: round_sig(s.x().im),
            r: round_sig(bs.r()),
            t: round_sig(bs.t()),
            q: round_sig(bs.q()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsHeader {
    pub seed: u64,
    pub detector: DetectorModel,
    pub schedule_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    pub header: CountsHeader,
    pub records: Vec<CountsRecord>,
}

impl CountsFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("counts serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CountsFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("counts file: {e}")))?;
        for r in &file.records {
            if !(r.duration_s > 0.0 && r.duration_s.is_finite()) {
                return Err(Error::Format(format!(
                    "record {} has nonpositive duration {}",
                    r.label, r.duration_s
                )));
            }
            r.setting.validate()?;
        }
        Ok(file)
    }
}

/// Polarization projections of the tomography, as (label, hwp, qwp) that
/// route the named state to the V output of a port's PBS.
pub const TOMOGRAPHY_BASIS: [(char, f64, f64); 6] = [
    ('H', 45.0, 0.0),
    ('V', 0.0, 0.0),
    ('D', -22.5, 45.0),
    ('A', 22.5, 45.0),
    ('R', 22.5, 0.0),
    ('L', -22.5, 0.0),
];

/// Polarization state `(H, V)` named by a tomography label.
pub fn basis_vector(label: char) -> Option<[C64; 2]> {
    let h = FRAC_1_SQRT_2;
    Some(match label {
        'H' => [c(1.0), c(0.0)],
        'V' => [c(0.0), c(1.0)],
        'D' => [c(h), c(h)],
        'A' => [c(h), c(-h)],
        'R' => [c(h), C64::new(0.0, h)],
        'L' => [c(h), C64::new(0.0, -h)],
        _ => return None,
    })
}

pub const LABEL_MA: &str = "MA";
pub const LABEL_MC: &str = "MC";
pub const LABEL_MD: &str = "MD";
pub const LABEL_CAL_AB: &str = "CAL:AB";
pub const LABEL_CAL_AC: &str = "CAL:AC";
pub const TOMOGRAPHY_PREFIX: &str = "MB:";

/// One planned record before the piezo phase and counts are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRecord {
    pub label: String,
    pub setting: OpticalSetting,
    pub detector_pair: DetectorPair,
    pub duration_s: f64,
    /// Sweep samples get a fresh uniform piezo phase.
    pub sweep: bool,
}

/// Measurement schedule: M_A, 36 tomography projections, the two coherence
/// sweeps, and the two calibration records.
pub fn plan_schedule(source: &SourceAngles) -> Vec<PlannedRecord> {
    let base = OpticalSetting::new(source);
    let mut plan = Vec::new();
    let mut push = |label: String, setting: OpticalSetting, pair, duration_s, sweep| {
        plan.push(PlannedRecord {
            label,
            setting,
            detector_pair: pair,
            duration_s,
            sweep,
        })
    };

    // M_A: the |2V⟩ term in port 3 split by HWP₃ at 22.5°, port 4 blocked.
    push(
        LABEL_MA.into(),
        OpticalSetting { hwp3: 22.5, ..base },
        DetectorPair::AB,
        LONG_RECORD_S,
        false,
    );

    for &(l3, h3, q3) in &TOMOGRAPHY_BASIS {
        for &(l4, h4, q4) in &TOMOGRAPHY_BASIS {
            push(
                format!("{TOMOGRAPHY_PREFIX}{l3}{l4}"),
                OpticalSetting {
                    hwp3: h3,
                    qwp3: q3,
                    hwp4: h4,
                    qwp4: q4,
                    ..base
                },
                DetectorPair::AC,
                LONG_RECORD_S,
                false,
            );
        }
    }

    // ρ₁₂ fringe: |2V₃⟩ against |H₄V₃⟩ on A and B.
    for _ in 0..SWEEP_SAMPLES {
        push(
            LABEL_MC.into(),
            OpticalSetting {
                hwp3: 22.5,
                shutter_open: true,
                ..base
            },
            DetectorPair::AB,
            SWEEP_SAMPLE_S,
            true,
        );
    }
    // ρ₁₃ fringe: |2V₄⟩ against |H₃V₄⟩ on B and C.
    for _ in 0..SWEEP_SAMPLES {
        push(
            LABEL_MD.into(),
            OpticalSetting {
                hwp4: 22.5,
                shutter_open: true,
                ..base
            },
            DetectorPair::BC,
            SWEEP_SAMPLE_S,
            true,
        );
    }

    push(
        LABEL_CAL_AB.into(),
        base,
        DetectorPair::AB,
        LONG_RECORD_S,
        false,
    );
    push(
        LABEL_CAL_AC.into(),
        base,
        DetectorPair::AC,
        LONG_RECORD_S,
        false,
    );
    plan
}

/// Routing probability of the calibration reference on each detector pair:
/// a pair fully steered onto A and B reaches B through one FBS arm.
pub fn calibration_probability(pair: DetectorPair) -> f64 {
    match pair {
        DetectorPair::AB => 0.5,
        DetectorPair::AC => 1.0,
        DetectorPair::BC => 0.5,
    }
}

/// Expected coincidences of one record (signal plus dark).
pub fn expected_counts(
    ensemble: &[WeightedState],
    det: &DetectorModel,
    label: &str,
    setting: &OpticalSetting,
    pair: DetectorPair,
    duration_s: f64,
) -> f64 {
    let prob = if label.starts_with("CAL:") {
        calibration_probability(pair)
    } else {
        coincidence_probability(ensemble, setting, pair)
    };
    det.pair_rate_hz * duration_s * det.pair_efficiency(pair) * prob
        + det.dark_coincidence_hz * duration_s
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng);
    draw as u64
}

/// Runs the full schedule for one input state on one splitter.
///
/// A single ChaCha stream seeded with `seed` draws every piezo phase and
/// count in schedule order, so equal seeds give identical files.
pub fn simulate_schedule(
    s: &QubitState,
    bs: &BeamSplitter,
    det: &DetectorModel,
    seed: u64,
) -> Result<CountsFile> {
    det.validate()?;
    let ensemble = propagate(s, bs)?;
    let source = SourceAngles::new(s.p(), bs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for planned in plan_schedule(&source) {
        let mut setting = planned.setting;
        if planned.sweep {
            setting.piezo_phase = round_sig(rng.random_range(0.0..2.0 * PI));
        }
        let mean = expected_counts(
            &ensemble,
            det,
            &planned.label,
            &setting,
            planned.detector_pair,
            planned.duration_s,
        );
        records.push(CountsRecord {
            label: planned.label,
            setting,
            detector_pair: planned.detector_pair,
            duration_s: planned.duration_s,
            counts: poisson(mean, &mut rng),
        });
    }
    Ok(CountsFile {
        header: CountsHeader {
            seed,
            detector: *det,
            schedule_version: SCHEDULE_VERSION,
            source: Some(SourceInfo::new(s, bs)),
        },
        records,
    })
}

/// Noise-free fringe visibility of a sweep configuration, from
/// `P(φ) = A + Re(B e^{iφ})`.
pub fn expected_visibility(
    ensemble: &[WeightedState],
    setting: &OpticalSetting,
    pair: DetectorPair,
) -> f64 {
    let at = |phi: f64| {
        let s = OpticalSetting {
            piezo_phase: phi,
            ..*setting
        };
        coincidence_probability(ensemble, &s, pair)
    };
    let (p0, p1, p2) = (at(0.0), at(0.5 * PI), at(PI));
    let mean = 0.5 * (p0 + p2);
    if mean <= 0.0 {
        return 0.0;
    }
    let re = 0.5 * (p0 - p2);
    let im = mean - p1;
    (re * re + im * im).sqrt() / mean
}
