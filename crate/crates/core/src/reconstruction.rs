//! Counts → output density matrix.
//!
//! The output state has the block form
//!
//! ```text
//!         |00⟩  |01⟩  |10⟩
//!  ⟨00|  [ M_A   M_C   M_D ]
//!  ⟨01|  [ M_C*  M_B       ]
//!  ⟨10|  [ M_D*            ]
//! ```
//!
//! M_A comes directly from one coincidence rate, M_B from maximum-likelihood
//! tomography of the one-photon-per-port sector, and the magnitudes of M_C and
//! M_D from fringe visibilities. M_A and M_B are then held fixed while M_C and
//! M_D are shrunk, if needed, until every principal minor is nonnegative.
//!
//! Off-diagonal phases are not measured. Estimates are formed in the gauge
//! where all off-diagonals are real and nonnegative; the returned state uses
//! the sign pattern `(ρ₁₂, ρ₁₃, ρ₂₃) = (−, +, −)` of the ideal beam-splitter
//! output, which differs from the nonnegative gauge by the local unitary
//! `I ⊗ Z`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::round_sig;
use crate::linalg::{ComplexMatrix, DensityMatrix, DensityMatrixFile, C64};
use crate::simulator::{
    basis_vector, CountsFile, CountsRecord, LABEL_CAL_AB, LABEL_CAL_AC, LABEL_MA, LABEL_MC,
    LABEL_MD, TOMOGRAPHY_BASIS, TOMOGRAPHY_PREFIX,
};

/// Log-likelihood change (per count) below which the iteration stops.
pub const ML_TOL: f64 = 1e-10;
pub const ML_MAX_ITER: usize = 10_000;
/// Weight of the `R ρ R` update against the identity in the diluted step.
pub const ML_MIXING: f64 = 0.5;

/// Slack for the Sylvester conditions on the fixed blocks and the final
/// spectrum.
pub const REPAIR_TOL: f64 = 1e-10;

/// Coincidence correction for M_A: half the bunched pairs split on the PBS,
/// half sit in the blocked port.
pub const MA_FACTOR: f64 = 4.0;
/// Coincidence correction for the tomography diagonals: half of each
/// one-photon term has its place-holder photon in the other port.
pub const MB_FACTOR: f64 = 2.0;

/// Counts and integration time summed over records sharing a label.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    counts: u64,
    duration: f64,
    records: usize,
}

impl Tally {
    fn rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.counts as f64 / self.duration
        } else {
            0.0
        }
    }
}

/// Records grouped by label. Sweep samples are kept individually.
#[derive(Debug, Clone)]
pub struct RecordIndex {
    tallies: BTreeMap<String, Tally>,
    sweeps: BTreeMap<String, Vec<f64>>,
}

impl RecordIndex {
    pub fn new(records: &[CountsRecord]) -> Self {
        let mut sorted: Vec<&CountsRecord> = records.iter().collect();
        sorted.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then(a.counts.cmp(&b.counts))
                .then(a.duration_s.total_cmp(&b.duration_s))
                .then(a.setting.piezo_phase.total_cmp(&b.setting.piezo_phase))
        });
        let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
        let mut sweeps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in sorted {
            let t = tallies.entry(r.label.clone()).or_default();
            t.counts += r.counts;
            t.duration += r.duration_s;
            t.records += 1;
            if r.label == LABEL_MC || r.label == LABEL_MD {
                sweeps
                    .entry(r.label.clone())
                    .or_default()
                    .push(r.counts as f64 / r.duration_s);
            }
        }
        RecordIndex { tallies, sweeps }
    }

    fn tally(&self, label: &str) -> Result<Tally> {
        self.tallies
            .get(label)
            .copied()
            .ok_or_else(|| Error::MissingRecord(label.to_string()))
    }

    fn sweep(&self, label: &str) -> &[f64] {
        self.sweeps.get(label).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// AB:AC detection-efficiency ratio from the calibration records; `None`
/// when either record is absent or empty.
pub fn efficiency_ratio(index: &RecordIndex) -> Option<f64> {
    let ab = index.tally(LABEL_CAL_AB).ok()?;
    let ac = index.tally(LABEL_CAL_AC).ok()?;
    if ab.counts == 0 || ac.counts == 0 {
        return None;
    }
    Some(ab.rate() / ac.rate())
}

/// Efficiency-corrected M_A rate on the AC scale, `4 n / (T k)`.
pub fn estimate_m_a(index: &RecordIndex, ratio: f64) -> Result<f64> {
    let t = index.tally(LABEL_MA)?;
    Ok(MA_FACTOR * t.rate() / ratio)
}

/// Result of the maximum-likelihood tomography.
#[derive(Debug, Clone)]
pub struct MlTomography {
    /// Two-qubit polarization state, port 3 ⊗ port 4, basis `H = 0, V = 1`.
    pub rho: DensityMatrix,
    pub iterations: usize,
    /// Mean log-likelihood per count at the returned state.
    pub log_likelihood: f64,
}

/// Two-qubit projector states of the tomography with their labels.
pub fn tomography_projectors() -> Vec<(String, [C64; 4])> {
    let mut out = Vec::with_capacity(36);
    for &(l3, _, _) in &TOMOGRAPHY_BASIS {
        for &(l4, _, _) in &TOMOGRAPHY_BASIS {
            let a = basis_vector(l3).expect("tomography label");
            let b = basis_vector(l4).expect("tomography label");
            out.push((
                format!("{TOMOGRAPHY_PREFIX}{l3}{l4}"),
                [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]],
            ));
        }
    }
    out
}

fn projector_prob(rho: &ComplexMatrix, v: &[C64; 4]) -> f64 {
    rho.expectation(v).re
}

/// Diluted `R ρ R` iteration on rates `rates[j]` for projectors `proj[j]`,
/// whose sum must be a multiple of the identity.
pub fn ml_fixed_point(rates: &[f64], proj: &[[C64; 4]]) -> Result<MlTomography> {
    assert_eq!(rates.len(), proj.len());
    let total: f64 = rates.iter().sum();
    let frame: f64 = proj
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / 4.0;
    let mut rho = ComplexMatrix::identity(4).scale_real(0.25);
    if total <= 0.0 {
        return Ok(MlTomography {
            rho: DensityMatrix::from_trusted(rho),
            iterations: 0,
            log_likelihood: 0.0,
        });
    }
    let freqs: Vec<f64> = rates.iter().map(|r| r / total).collect();
    let loglik = |rho: &ComplexMatrix| -> f64 {
        freqs
            .iter()
            .zip(proj)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, v)| f * (projector_prob(rho, v) / frame).max(f64::MIN_POSITIVE).ln())
            .sum()
    };
    let mut ll = loglik(&rho);
    for iter in 1..=ML_MAX_ITER {
        let mut r = ComplexMatrix::zeros(4);
        for (f, v) in freqs.iter().zip(proj) {
            if *f == 0.0 {
                continue;
            }
            let q = (projector_prob(&rho, v) / frame).max(f64::MIN_POSITIVE);
            let w = f / q / frame;
            for i in 0..4 {
                for j in 0..4 {
                    r[(i, j)] += v[i] * v[j].conj() * w;
                }
            }
        }
        let step =
            &ComplexMatrix::identity(4).scale_real(1.0 - ML_MIXING) + &r.scale_real(ML_MIXING);
        let next = &(&step * &rho) * &step;
        let tr = next.trace().re;
        rho = next.scale_real(1.0 / tr).hermitize();
        let new_ll = loglik(&rho);
        let delta = (new_ll - ll).abs();
        ll = new_ll;
        if delta < ML_TOL {
            return Ok(MlTomography {
                rho: DensityMatrix::from_trusted(rho),
                iterations: iter,
                log_likelihood: ll,
            });
        }
    }
    Err(Error::NonConvergence(ML_MAX_ITER))
}

/// Maximum-likelihood tomography of the 36 AC projection records.
pub fn ml_tomography(index: &RecordIndex) -> Result<MlTomography> {
    let projectors = tomography_projectors();
    let mut rates = Vec::with_capacity(projectors.len());
    let mut vecs = Vec::with_capacity(projectors.len());
    for (label, v) in projectors {
        rates.push(index.tally(&label)?.rate());
        vecs.push(v);
    }
    ml_fixed_point(&rates, &vecs)
}

/// Central block of the tomography in the logical `|01⟩, |10⟩` basis of the
/// output state, trace 1. The logical states carry signs relative to the
/// polarization basis: `|01⟩ ↔ −|V₃H₄⟩` (index 2) and `|10⟩ ↔ +|H₃V₄⟩`
/// (index 1).
pub fn central_block(rho_b: &DensityMatrix) -> ComplexMatrix {
    let m = rho_b.matrix();
    let idx = [2, 1];
    let sign = [-1.0, 1.0];
    let block = ComplexMatrix::from_fn(2, |i, j| m[(idx[i], idx[j])] * (sign[i] * sign[j]));
    let tr = block.trace().re;
    if tr > 0.0 {
        block.scale_real(1.0 / tr)
    } else {
        ComplexMatrix::identity(2).scale_real(0.5)
    }
}

/// Fringe visibility `(I_max − I_min)/(I_max + I_min)` of a sweep.
pub fn visibility(samples: &[f64], label: &str) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::EmptySweep(label.to_string()));
    }
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

/// `|b| = v (a + c) / 2` for the 2×2 submatrix `[[a, b], [b*, c]]` probed
/// by the sweep.
pub fn visibility_to_coherence(samples: &[f64], label: &str, a: f64, c: f64) -> Result<f64> {
    Ok(visibility(samples, label)? * (a + c) / 2.0)
}

/// Stage-one estimates in the nonnegative gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    pub m_a: f64,
    /// 2×2 block over `|01⟩, |10⟩`, real with nonnegative off-diagonal.
    pub m_b: [[f64; 2]; 2],
    pub m_c: f64,
    pub m_d: f64,
}

impl BlockEstimate {
    /// Real symmetric 3×3 matrix of the blocks.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let b = self.m_b;
        [
            [self.m_a, self.m_c, self.m_d],
            [self.m_c, b[0][0], b[0][1]],
            [self.m_d, b[1][0], b[1][1]],
        ]
    }
}

/// What the repair changed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub clamped_12: bool,
    pub clamped_13: bool,
    /// Common factor applied to ρ₁₂ and ρ₁₃ when the 3×3 determinant was negative.
    pub determinant_scale: Option<f64>,
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * m[1][1] * m[2][2] + 2.0 * m[0][1] * m[1][2] * m[0][2]
        - m[0][0] * m[1][2] * m[1][2]
        - m[1][1] * m[0][2] * m[0][2]
        - m[2][2] * m[0][1] * m[0][1]
}

/// Enforces the seven Sylvester conditions with M_A and M_B fixed.
///
/// Returns the repaired real matrix in the nonnegative gauge.
pub fn physicality_repair(b: &BlockEstimate) -> Result<([[f64; 3]; 3], RepairReport)> {
    let mut m = b.matrix();
    let mut report = RepairReport::default();
    if [m[0][1], m[0][2], m[1][2]]
        .iter()
        .any(|&x| x.is_nan() || x < 0.0)
    {
        return Err(Error::IrreparableBlock(
            "off-diagonal estimates must be real and nonnegative".into(),
        ));
    }
    for j in 0..3 {
        if m[j][j].is_nan() || m[j][j] < -REPAIR_TOL {
            return Err(Error::IrreparableBlock(format!(
                "diagonal element {} is {}",
                j + 1,
                m[j][j]
            )));
        }
        m[j][j] = m[j][j].max(0.0);
    }
    let minor_b = m[1][1] * m[2][2] - m[1][2] * m[1][2];
    if minor_b < -REPAIR_TOL {
        return Err(Error::IrreparableBlock(format!(
            "M_B has negative determinant {minor_b}"
        )));
    }
    let bound12 = (m[0][0] * m[1][1]).sqrt();
    if m[0][1] > bound12 {
        m[0][1] = bound12;
        report.clamped_12 = true;
    }
    let bound13 = (m[0][0] * m[2][2]).sqrt();
    if m[0][2] > bound13 {
        m[0][2] = bound13;
        report.clamped_13 = true;
    }
    m[1][0] = m[0][1];
    m[2][0] = m[0][2];
    if det3(&m) < 0.0 {
        let fixed = m[0][0] * m[1][1] * m[2][2] - m[0][0] * m[1][2] * m[1][2];
        let scaled = 2.0 * m[0][1] * m[1][2] * m[0][2]
            - m[1][1] * m[0][2] * m[0][2]
            - m[2][2] * m[0][1] * m[0][1];
        let c2 = if scaled < 0.0 {
            (-fixed / scaled).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = c2.sqrt();
        m[0][1] *= c;
        m[0][2] *= c;
        m[1][0] = m[0][1];
        m[2][0] = m[0][2];
        report.determinant_scale = Some(c);
    }
    Ok((m, report))
}

/// Metadata reported alongside a reconstructed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMetadata {
    pub ml_iterations: usize,
    pub ml_log_likelihood: f64,
    pub efficiency_ratio: f64,
    /// Calibration records were absent or empty and a ratio of 1 was assumed.
    pub calibration_missing: bool,
    pub visibility_mc: f64,
    pub visibility_md: f64,
    pub rate_a: f64,
    pub rate_b: f64,
    pub blocks: BlockSummary,
    pub repair: RepairReport,
    /// Filled in by callers that know the intended state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_to_source: Option<f64>,
}

/// Stage-one block estimates (before repair) in the nonnegative gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub m_a: f64,
    pub m_b: [[f64; 2]; 2],
    pub m_c: f64,
    pub m_d: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// 3×3 state over `|00⟩, |01⟩, |10⟩`.
    pub qutrit: DensityMatrix,
    pub blocks: BlockEstimate,
    pub tomography: MlTomography,
    pub metadata: ReconstructionMetadata,
}

impl Reconstruction {
    /// Two-qubit embedding with an empty `|11⟩` row and column.
    pub fn two_qubit(&self) -> DensityMatrix {
        let q = self.qutrit.matrix();
        let m = ComplexMatrix::from_fn(4, |i, j| {
            if i < 3 && j < 3 {
                q[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        DensityMatrix::from_trusted(m)
    }

    pub fn to_output(&self) -> ReconstructionOutput {
        let mut metadata = self.metadata.clone();
        round_metadata(&mut metadata);
        ReconstructionOutput {
            density_matrix: DensityMatrixFile::from_matrix(self.two_qubit().matrix()),
            metadata,
        }
    }
}

fn round_metadata(m: &mut ReconstructionMetadata) {
    m.ml_log_likelihood = round_sig(m.ml_log_likelihood);
    m.efficiency_ratio = round_sig(m.efficiency_ratio);
    m.visibility_mc = round_sig(m.visibility_mc);
    m.visibility_md = round_sig(m.visibility_md);
    m.rate_a = round_sig(m.rate_a);
    m.rate_b = round_sig(m.rate_b);
    m.blocks.m_a = round_sig(m.blocks.m_a);
    m.blocks.m_c = round_sig(m.blocks.m_c);
    m.blocks.m_d = round_sig(m.blocks.m_d);
    m.blocks
        .m_b
        .iter_mut()
        .flatten()
        .for_each(|x| *x = round_sig(*x));
    m.repair.determinant_scale = m.repair.determinant_scale.map(round_sig);
    m.fidelity_to_source = m.fidelity_to_source.map(round_sig);
}

/// File written by the reconstruction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOutput {
    pub density_matrix: DensityMatrixFile,
    pub metadata: ReconstructionMetadata,
}

impl ReconstructionOutput {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reconstruction serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("reconstruction file: {e}")))
    }
}

/// Stage one: block estimates from the records.
pub fn estimate_blocks(
    index: &RecordIndex,
) -> Result<(BlockEstimate, MlTomography, ReconstructionMetadata)> {
    let ratio = efficiency_ratio(index);
    let k = ratio.unwrap_or(1.0);
    let rate_a = estimate_m_a(index, k)?;
    let tomo = ml_tomography(index)?;
    let rate_b = MB_FACTOR
        * (index.tally(&format!("{TOMOGRAPHY_PREFIX}VH"))?.rate()
            + index.tally(&format!("{TOMOGRAPHY_PREFIX}HV"))?.rate());
    let total = rate_a + rate_b;
    if total <= 0.0 {
        return Err(Error::IrreparableBlock(
            "no coincidences in the M_A and tomography diagonal records".into(),
        ));
    }
    let m_a = rate_a / total;
    let block = central_block(&tomo.rho);
    let weight = 1.0 - m_a;
    let m_b = [
        [weight * block[(0, 0)].re, weight * block[(0, 1)].norm()],
        [weight * block[(1, 0)].norm(), weight * block[(1, 1)].re],
    ];
    let mc = index.sweep(LABEL_MC);
    let md = index.sweep(LABEL_MD);
    let v_mc = visibility(mc, LABEL_MC)?;
    let v_md = visibility(md, LABEL_MD)?;
    let m_c = v_mc * (m_a + m_b[0][0]) / 2.0;
    let m_d = v_md * (m_a + m_b[1][1]) / 2.0;
    let blocks = BlockEstimate { m_a, m_b, m_c, m_d };
    let metadata = ReconstructionMetadata {
        ml_iterations: tomo.iterations,
        ml_log_likelihood: tomo.log_likelihood,
        efficiency_ratio: k,
        calibration_missing: ratio.is_none(),
        visibility_mc: v_mc,
        visibility_md: v_md,
        rate_a,
        rate_b,
        blocks: BlockSummary { m_a, m_b, m_c, m_d },
        repair: RepairReport::default(),
        fidelity_to_source: None,
    };
    Ok((blocks, tomo, metadata))
}

/// Applies the `(−, +, −)` sign pattern to a nonnegative-gauge real matrix.
pub fn signed_state(m: &[[f64; 3]; 3]) -> ComplexMatrix {
    let sign = [[1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, 1.0]];
    ComplexMatrix::from_fn(3, |i, j| C64::new(sign[i][j] * m[i][j], 0.0))
}

/// Full pipeline on a record set.
pub fn reconstruct(records: &[CountsRecord]) -> Result<Reconstruction> {
    let index = RecordIndex::new(records);
    let (blocks, tomography, mut metadata) = estimate_blocks(&index)?;
    let (repaired, report) = physicality_repair(&blocks)?;
    metadata.repair = report;
    let m = signed_state(&repaired);
    let tr = m.trace().re;
    let qutrit = DensityMatrix::new(m.scale_real(1.0 / tr))?;
    Ok(Reconstruction {
        qutrit,
        blocks,
        tomography,
        metadata,
    })
}

pub fn reconstruct_file(file: &CountsFile) -> Result<Reconstruction> {
    reconstruct(&file.records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fidelity, hermitian_eigenvalues};
    use crate::simulator::{simulate_schedule, DetectorModel, DetectorPair, OpticalSetting};
    use crate::states::{mix_on_ideal_bs, mix_on_imperfect_bs};
    use crate::{BeamSplitter, QubitState};

    fn record(label: &str, counts: u64, duration: f64) -> CountsRecord {
        CountsRecord {
            label: label.into(),
            setting: OpticalSetting {
                hwp1: 0.0,
                hwp2: 45.0,
                hwp3: 0.0,
                hwp4: 0.0,
                qwp3: 0.0,
                qwp4: 0.0,
                theta_h: 0.0,
                theta_v: -22.5,
                shutter_open: false,
                piezo_phase: 0.0,
            },
            detector_pair: DetectorPair::AC,
            duration_s: duration,
            counts,
        }
    }

    /// Noise-free expected tomography rates for a two-qubit state.
    fn expected_rates(rho: &ComplexMatrix) -> Vec<f64> {
        tomography_projectors()
            .iter()
            .map(|(_, v)| projector_prob(rho, v))
            .collect()
    }

    #[test]
    fn ml_recovers_known_state_from_noiseless_rates() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // Mixed state supported on |HV⟩, |VH⟩ plus a little white noise.
        let psi = [
            C64::new(0.0, 0.0),
            C64::new(h, 0.0),
            C64::new(0.0, -h),
            C64::new(0.0, 0.0),
        ];
        let target = &ComplexMatrix::projector(&psi).scale_real(0.8)
            + &ComplexMatrix::identity(4).scale_real(0.05);
        let proj: Vec<[C64; 4]> = tomography_projectors()
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        let ml = ml_fixed_point(&expected_rates(&target), &proj).unwrap();
        let d = ml.rho.matrix().max_abs_diff(&target);
        assert!(d < 1e-3, "max diff {d}");
    }

    #[test]
    fn isotropic_counts_give_maximally_mixed_block() {
        let proj: Vec<[C64; 4]> = tomography_projectors()
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        let ml = ml_fixed_point(&vec![100.0; 36], &proj).unwrap();
        assert!(
            ml.rho
                .matrix()
                .max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25))
                < 1e-12
        );
        let block = central_block(&ml.rho);
        assert!(block.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-12);
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(
            visibility_to_coherence(&[5.0, 5.0, 5.0], "MC", 0.3, 0.2).unwrap(),
            0.0
        );
        let full = visibility_to_coherence(&[0.0, 1.0], "MC", 0.5, 0.5).unwrap();
        assert!((full - 0.5).abs() < 1e-15);
        assert_eq!(
            visibility_to_coherence(&[3.0], "MD", 0.5, 0.5).unwrap_err(),
            Error::EmptySweep("MD".into())
        );
        assert_eq!(visibility(&[0.0, 0.0], "MC").unwrap(), 0.0);
    }

    fn physical_blocks() -> BlockEstimate {
        BlockEstimate {
            m_a: 0.5,
            m_b: [[0.25, 0.2], [0.2, 0.25]],
            m_c: 0.2,
            m_d: 0.2,
        }
    }

    #[test]
    fn repair_leaves_physical_input_unchanged() {
        let b = physical_blocks();
        let (m, report) = physicality_repair(&b).unwrap();
        assert_eq!(m, b.matrix());
        assert_eq!(report, RepairReport::default());
    }

    #[test]
    fn repair_clamps_to_sqrt_bound() {
        let b = BlockEstimate {
            m_c: 0.9,
            ..physical_blocks()
        };
        let (m, report) = physicality_repair(&b).unwrap();
        assert!(report.clamped_12);
        let bound = (0.5f64 * 0.25).sqrt();
        assert!(m[0][1] <= bound + 1e-15);
    }

    #[test]
    fn repair_fixes_negative_determinant_only() {
        // All 2×2 minors fine, 3×3 determinant negative because ρ₂₃ is large
        // while ρ₁₂, ρ₁₃ sit near their bounds with the opposite sign pattern
        // in effect (all positive here).
        let b = BlockEstimate {
            m_a: 0.4,
            m_b: [[0.3, 0.05], [0.05, 0.3]],
            m_c: 0.34,
            m_d: 0.34,
        };
        assert!(det3(&b.matrix()) < 0.0);
        let (m, report) = physicality_repair(&b).unwrap();
        assert!(report.determinant_scale.unwrap() < 1.0);
        assert!(det3(&m).abs() < 1e-15);
        let ev = hermitian_eigenvalues(&signed_state(&m)).unwrap();
        assert!(ev[0] >= -REPAIR_TOL, "{ev:?}");
        assert_eq!(m[0][0], b.m_a);
        assert_eq!([[m[1][1], m[1][2]], [m[2][1], m[2][2]]], b.m_b);
    }

    #[test]
    fn repair_rejects_broken_fixed_block() {
        let b = BlockEstimate {
            m_b: [[0.1, 0.3], [0.3, 0.1]],
            ..physical_blocks()
        };
        assert!(matches!(
            physicality_repair(&b),
            Err(Error::IrreparableBlock(_))
        ));
    }

    #[test]
    fn missing_records_are_named() {
        let s = QubitState::real(0.5, 0.3).unwrap();
        let det = DetectorModel::default();
        let file = simulate_schedule(&s, &BeamSplitter::balanced(), &det, 1).unwrap();
        let without_ma: Vec<CountsRecord> = file
            .records
            .iter()
            .filter(|r| r.label != LABEL_MA)
            .cloned()
            .collect();
        assert_eq!(
            reconstruct(&without_ma).unwrap_err(),
            Error::MissingRecord("MA".into())
        );
        let without_vh: Vec<CountsRecord> = file
            .records
            .iter()
            .filter(|r| r.label != "MB:VH")
            .cloned()
            .collect();
        assert_eq!(
            reconstruct(&without_vh).unwrap_err(),
            Error::MissingRecord("MB:VH".into())
        );
        let short_sweep: Vec<CountsRecord> = {
            let mut seen = 0;
            file.records
                .iter()
                .filter(|r| {
                    if r.label == LABEL_MD {
                        seen += 1;
                        seen == 1
                    } else {
                        true
                    }
                })
                .cloned()
                .collect()
        };
        assert_eq!(
            reconstruct(&short_sweep).unwrap_err(),
            Error::EmptySweep("MD".into())
        );
    }

    #[test]
    fn missing_calibration_defaults_ratio_with_flag() {
        let s = QubitState::real(0.5, 0.3).unwrap();
        let file =
            simulate_schedule(&s, &BeamSplitter::balanced(), &DetectorModel::default(), 2).unwrap();
        let records: Vec<CountsRecord> = file
            .records
            .iter()
            .filter(|r| !r.label.starts_with("CAL:"))
            .cloned()
            .collect();
        let rec = reconstruct(&records).unwrap();
        assert!(rec.metadata.calibration_missing);
        assert_eq!(rec.metadata.efficiency_ratio, 1.0);
    }

    #[test]
    fn record_order_does_not_matter() {
        let s = QubitState::real(0.3, 0.35).unwrap();
        let det = DetectorModel::default().with_pairs_per_record(1e5);
        let file = simulate_schedule(&s, &BeamSplitter::balanced(), &det, 11).unwrap();
        let a = reconstruct(&file.records).unwrap();
        let mut shuffled = file.records.clone();
        shuffled.reverse();
        shuffled.swap(3, 90);
        let b = reconstruct(&shuffled).unwrap();
        assert_eq!(a.to_output().to_json(), b.to_output().to_json());
    }

    #[test]
    fn end_to_end_examples() {
        let det = DetectorModel::default().with_pairs_per_record(1e6);
        let bs = BeamSplitter::balanced();
        for (p, x, seed) in [(1.0, 0.0, 5u64), (0.0, 0.0, 6), (0.5, 0.5, 7)] {
            let s = QubitState::real(p, x).unwrap();
            let file = simulate_schedule(&s, &bs, &det, seed).unwrap();
            let rec = reconstruct(&file.records).unwrap();
            let f = fidelity(&rec.two_qubit(), &mix_on_ideal_bs(&s)).unwrap();
            assert!(f >= 0.99, "p={p} x={x}: fidelity {f}");
        }
    }

    #[test]
    fn vacuum_and_photon_limits_of_m_a() {
        let det = DetectorModel::default().with_pairs_per_record(1e6);
        let bs = BeamSplitter::balanced();
        let vac = simulate_schedule(&QubitState::pure(0.0).unwrap(), &bs, &det, 9).unwrap();
        let (b, _, _) = estimate_blocks(&RecordIndex::new(&vac.records)).unwrap();
        assert!(b.m_a > 0.98, "{}", b.m_a);
        let one = simulate_schedule(&QubitState::pure(1.0).unwrap(), &bs, &det, 9).unwrap();
        let (b, tomo, _) = estimate_blocks(&RecordIndex::new(&one.records)).unwrap();
        assert!(b.m_a < 0.01, "{}", b.m_a);
        // Balanced single photon: ρ₂₃ = −p r t, so the normalized block has
        // off-diagonal ≈ −1/2.
        let block = central_block(&tomo.rho);
        assert!((block[(0, 1)].re + 0.5).abs() < 0.02, "{:?}", block);
    }

    #[test]
    fn zero_counts_everywhere_is_rejected() {
        let mut records = Vec::new();
        records.push(record(LABEL_MA, 0, 50.0));
        for (label, _) in tomography_projectors() {
            records.push(record(&label, 0, 50.0));
        }
        for _ in 0..3 {
            records.push(record(LABEL_MC, 0, 5.0));
            records.push(record(LABEL_MD, 0, 5.0));
        }
        assert!(matches!(
            reconstruct(&records),
            Err(Error::IrreparableBlock(_))
        ));
    }

    #[test]
    fn imperfect_splitter_round_trip() {
        let det = DetectorModel::default().with_pairs_per_record(1e6);
        let s = QubitState::real(0.6, 0.4).unwrap();
        let bs = BeamSplitter::from_reflection(0.6, 0.1).unwrap();
        let file = simulate_schedule(&s, &bs, &det, 21).unwrap();
        let rec = reconstruct(&file.records).unwrap();
        let f = fidelity(&rec.two_qubit(), &mix_on_imperfect_bs(&s, &bs)).unwrap();
        assert!(f >= 0.99, "fidelity {f}");
    }
}
