//! Fitting reconstructed states to the imperfect-splitter family, input and
//! output fidelities, and measure curves along interpolations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fmt_sig, round_sig};
use crate::linalg::{bures_from_fidelity, fidelity, DensityMatrix, FidelityReference};
use crate::measures::measure_triple;
use crate::states::{interpolate, mix_on_ideal_bs, mix_on_imperfect_bs, qubit_matrix};
use crate::{BeamSplitter, QubitState};

pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_EVALS: usize = 2000;
pub const DEFAULT_STEPS: usize = 101;
pub const MIN_EXTREMA_POINTS: usize = 5;
/// First differences smaller than this count as flat.
pub const FLAT_TOL: f64 = 1e-12;

pub const SWEEP_CSV_HEADER: &str = "beta,c,s,b";

/// Parameters of `ρ_qr(p, x)` with `x` real and nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub p: f64,
    pub x: f64,
    pub r: f64,
    pub q: f64,
}

impl FamilyParams {
    /// Box transform: every `θ ∈ R⁴` maps to a valid parameter set.
    pub fn from_angles(theta: &[f64; 4]) -> Self {
        let s2 = |a: f64| a.sin().powi(2);
        let p = s2(theta[0]);
        FamilyParams {
            p,
            x: s2(theta[1]) * (p * (1.0 - p)).max(0.0).sqrt(),
            r: s2(theta[2]),
            q: s2(theta[3]),
        }
    }

    /// One preimage of [`FamilyParams::from_angles`].
    pub fn to_angles(&self) -> [f64; 4] {
        let inv = |v: f64| v.clamp(0.0, 1.0).sqrt().asin();
        let bound = (self.p * (1.0 - self.p)).max(0.0).sqrt();
        let ratio = if bound > 0.0 { self.x / bound } else { 0.0 };
        [inv(self.p), inv(ratio), inv(self.r), inv(self.q)]
    }

    pub fn qubit(&self) -> Result<QubitState> {
        QubitState::real(self.p, self.x)
    }

    pub fn beam_splitter(&self) -> Result<BeamSplitter> {
        BeamSplitter::from_reflection(self.r, self.q)
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        Ok(mix_on_imperfect_bs(&self.qubit()?, &self.beam_splitter()?))
    }
}

/// Fit of a two-qubit state to `ρ_qr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p: f64,
    pub x: f64,
    pub r: f64,
    pub t: f64,
    pub q: f64,
    /// Bures distance between the target and the fitted family member.
    pub bures: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_out: Option<f64>,
    pub seed: u64,
    pub restarts: usize,
    pub evaluations: usize,
}

impl FitResult {
    pub fn params(&self) -> FamilyParams {
        FamilyParams {
            p: self.p,
            x: self.x,
            r: self.r,
            q: self.q,
        }
    }

    /// Copy with every real rounded to 9 significant digits.
    pub fn rounded(&self) -> Self {
        FitResult {
            p: round_sig(self.p),
            x: round_sig(self.x),
            r: round_sig(self.r),
            t: round_sig(self.t),
            q: round_sig(self.q),
            bures: round_sig(self.bures),
            fidelity_in: self.fidelity_in.map(round_sig),
            fidelity_out: self.fidelity_out.map(round_sig),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.rounded()).expect("fit serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

/// Outcome of one simplex run.
#[derive(Debug, Clone, Copy)]
struct LocalMin {
    theta: [f64; 4],
    value: f64,
    evals: usize,
}

/// Nelder–Mead on `R⁴` with standard coefficients.
fn nelder_mead(
    f: &impl Fn(&[f64; 4]) -> f64,
    start: [f64; 4],
    step: f64,
    max_evals: usize,
) -> LocalMin {
    const N: usize = 4;
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; 4]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let v0 = eval(&start);
    simplex.push((start, v0));
    for i in 0..N {
        let mut x = start;
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let lerp = |a: &[f64; N], b: &[f64; N], t: f64| {
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        out
    };
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[N].1);
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                (0..N)
                    .map(|i| (x[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if worst - best <= 1e-16 * (1.0 + best.abs()) && size < 1e-10 {
            break;
        }
        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let worst_x = simplex[N].0;
        let reflected = lerp(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded);
            simplex[N] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[N].1 {
            let x = lerp(&centroid, &worst_x, -0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = lerp(&centroid, &worst_x, 0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < fr.min(simplex[N].1) {
            simplex[N] = (contracted, fc);
            continue;
        }
        let best_x = simplex[0].0;
        for entry in simplex.iter_mut().skip(1) {
            let x = lerp(&best_x, &entry.0, 0.5);
            *entry = (x, eval(&x));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    LocalMin {
        theta: simplex[0].0,
        value: simplex[0].1,
        evals: evals.get(),
    }
}

/// Squared Bures distance `2(1 − √F)` from the cached target to `ρ_qr(θ)`.
fn objective(reference: &FidelityReference, theta: &[f64; 4]) -> f64 {
    let params = FamilyParams::from_angles(theta);
    match params.state() {
        Ok(rho) => match reference.fidelity_to(rho.matrix()) {
            Ok(f) => 2.0 * (1.0 - f.sqrt()),
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

/// Closest `ρ_qr(p, x)` in Bures distance, by multi-start Nelder–Mead.
///
/// Restart `k` starts from a point drawn uniformly over the parameter box by
/// its own ChaCha stream (`seed`, stream `k`), so the result is independent of
/// thread scheduling. Ties keep the lowest restart index.
pub fn fit_rho_qr(target: &DensityMatrix, opts: &FitOptions) -> Result<FitResult> {
    if target.dim() != 4 {
        return Err(Error::DimMismatch(target.dim(), 4));
    }
    let reference = FidelityReference::new(target)?;
    let f = |theta: &[f64; 4]| objective(&reference, theta);
    let restarts = opts.restarts.max(1);
    let runs: Vec<LocalMin> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            let start = FamilyParams {
                p: rng.random(),
                x: 0.0,
                r: rng.random(),
                q: rng.random(),
            };
            let mut theta = start.to_angles();
            theta[1] = rng.random::<f64>().sqrt().asin();
            // A short second pass from the first optimum polishes the minimum.
            let first = nelder_mead(&f, theta, 0.3, opts.max_evals / 2);
            let second = nelder_mead(
                &f,
                first.theta,
                1e-3,
                opts.max_evals.saturating_sub(first.evals),
            );
            LocalMin {
                evals: first.evals + second.evals,
                ..if second.value <= first.value {
                    second
                } else {
                    first
                }
            }
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.evals).sum();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, r)| *r)
        .expect("at least one restart");
    let params = FamilyParams::from_angles(&best.theta);
    let fitted = params.state()?;
    let bures = bures_from_fidelity(reference.fidelity_to(fitted.matrix())?);
    Ok(FitResult {
        p: params.p,
        x: params.x,
        r: params.r,
        t: (1.0 - params.r * params.r).max(0.0).sqrt(),
        q: params.q,
        bures,
        fidelity_in: None,
        fidelity_out: None,
        seed: opts.seed,
        restarts,
        evaluations,
    })
}

/// `(F(σ(p_fit, x_fit), σ_intended), F(target, ρ(p_int, x_int)))`.
pub fn fidelities(
    fit: &FitResult,
    intended: &QubitState,
    target: &DensityMatrix,
) -> Result<(f64, f64)> {
    let fitted_input = qubit_matrix(&fit.params().qubit()?);
    let intended_input = qubit_matrix(intended);
    let f_in = fidelity(&fitted_input, &intended_input)?;
    let f_out = fidelity(target, &mix_on_ideal_bs(intended))?;
    Ok((f_in, f_out))
}

/// Fit plus fidelities against an intended input.
pub fn fit_with_intent(
    target: &DensityMatrix,
    intended: &QubitState,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut fit = fit_rho_qr(target, opts)?;
    let (f_in, f_out) = fidelities(&fit, intended, target)?;
    fit.fidelity_in = Some(f_in);
    fit.fidelity_out = Some(f_out);
    Ok(fit)
}

/// Measures along `ρ(β) = β a + (1 − β) b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "c")]
    Concurrence,
    #[serde(rename = "s")]
    Steering,
    #[serde(rename = "b")]
    Bell,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Concurrence, Measure::Steering, Measure::Bell];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Concurrence => "c",
            Measure::Steering => "s",
            Measure::Bell => "b",
        }
    }
}

impl SweepCurve {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn values(&self, m: Measure) -> &[f64] {
        match m {
            Measure::Concurrence => &self.c,
            Measure::Steering => &self.s,
            Measure::Bell => &self.b,
        }
    }

    /// `max − min` of one measure over the curve.
    pub fn range(&self, m: Measure) -> f64 {
        let v = self.values(m);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig(self.beta[k]),
                fmt_sig(self.c[k]),
                fmt_sig(self.s[k]),
                fmt_sig(self.b[k])
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SWEEP_CSV_HEADER) {
            return Err(Error::Format(format!(
                "expected header '{SWEEP_CSV_HEADER}'"
            )));
        }
        let mut curve = SweepCurve {
            beta: vec![],
            c: vec![],
            s: vec![],
            b: vec![],
        };
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", k + 2)))?;
            if v.len() != 4 {
                return Err(Error::Format(format!("line {}: expected 4 fields", k + 2)));
            }
            curve.beta.push(v[0]);
            curve.c.push(v[1]);
            curve.s.push(v[2]);
            curve.b.push(v[3]);
        }
        Ok(curve)
    }
}

/// Measure triples at `β = k/(n_steps − 1)`, `k = 0..n_steps`.
pub fn sweep_interpolation(
    a: &DensityMatrix,
    b: &DensityMatrix,
    n_steps: usize,
) -> Result<SweepCurve> {
    if n_steps < 2 {
        return Err(Error::OutOfRange(format!(
            "n_steps = {n_steps} must be at least 2"
        )));
    }
    if a.dim() != 4 || b.dim() != 4 {
        return Err(Error::DimMismatch(a.dim().max(b.dim()), 4));
    }
    let last = (n_steps - 1) as f64;
    let points = (0..n_steps)
        .into_par_iter()
        .map(|k| {
            let beta = k as f64 / last;
            let t = measure_triple(&interpolate(a, b, beta)?)?;
            Ok((beta, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve = SweepCurve {
        beta: Vec::with_capacity(n_steps),
        c: Vec::with_capacity(n_steps),
        s: Vec::with_capacity(n_steps),
        b: Vec::with_capacity(n_steps),
    };
    for (beta, t) in points {
        curve.beta.push(beta);
        curve.c.push(t.c);
        curve.s.push(t.s);
        curve.b.push(t.b);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub measure: Measure,
    pub beta: f64,
    pub kind: ExtremumKind,
}

fn sign(d: f64) -> i8 {
    if d > FLAT_TOL {
        1
    } else if d < -FLAT_TOL {
        -1
    } else {
        0
    }
}

/// Interior extrema of one sequence: sign changes of the first differences,
/// flat stretches skipped, a flat-bottomed (or topped) extremum reported at
/// its smallest index.
pub fn extrema_indices(values: &[f64]) -> Vec<(usize, ExtremumKind)> {
    let mut out = Vec::new();
    let mut last_sign = 0i8;
    let mut run_end = 0usize;
    for k in 0..values.len().saturating_sub(1) {
        let s = sign(values[k + 1] - values[k]);
        if s == 0 {
            continue;
        }
        if last_sign != 0 && s != last_sign {
            let kind = if last_sign < 0 {
                ExtremumKind::Minimum
            } else {
                ExtremumKind::Maximum
            };
            out.push((run_end, kind));
        }
        last_sign = s;
        run_end = k + 1;
    }
    out
}

/// Interior local minima and maxima of each measure on the β grid.
pub fn locate_extrema(curve: &SweepCurve) -> Result<Vec<Extremum>> {
    if curve.len() < MIN_EXTREMA_POINTS {
        return Err(Error::CurveTooShort(curve.len()));
    }
    let mut out = Vec::new();
    for m in Measure::ALL {
        for (k, kind) in extrema_indices(curve.values(m)) {
            out.push(Extremum {
                measure: m,
                beta: curve.beta[k],
                kind,
            });
        }
    }
    Ok(out)
}

/// Maximal β-intervals on which `up` strictly increases while `down`
/// strictly decreases, as `(β_start, β_end)`.
pub fn opposing_windows(curve: &SweepCurve, up: Measure, down: Measure) -> Vec<(f64, f64)> {
    let (u, d) = (curve.values(up), curve.values(down));
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..curve.len().saturating_sub(1) {
        let ok = sign(u[k + 1] - u[k]) > 0 && sign(d[k + 1] - d[k]) < 0;
        match (ok, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((curve.beta[s], curve.beta[k]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((curve.beta[s], curve.beta[curve.len() - 1]));
    }
    out
}

/// Uniform draw over the `ρ_qr` parameter box: `p, r, q ~ U(0, 1)`,
/// `x = u √(p(1−p))`.
pub fn random_family_params<R: Rng + ?Sized>(rng: &mut R) -> FamilyParams {
    let p: f64 = rng.random();
    let u: f64 = rng.random();
    FamilyParams {
        p,
        x: u * (p * (1.0 - p)).sqrt(),
        r: rng.random(),
        q: rng.random(),
    }
}

/// A pair of family states and the sweep between them.
#[derive(Debug, Clone)]
pub struct SearchHit {
    pub draw: usize,
    pub a: FamilyParams,
    pub b: FamilyParams,
    pub curve: SweepCurve,
}

/// Seeded random search over pairs of family states for a sweep satisfying
/// `accept`. Returns the first hit within `max_draws` pairs.
pub fn search_pairs(
    seed: u64,
    max_draws: usize,
    n_steps: usize,
    accept: impl Fn(&SweepCurve) -> bool,
) -> Result<Option<SearchHit>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for draw in 0..max_draws {
        let a = random_family_params(&mut rng);
        let b = random_family_params(&mut rng);
        let curve = sweep_interpolation(&a.state()?, &b.state()?, n_steps)?;
        if accept(&curve) {
            return Ok(Some(SearchHit { draw, a, b, curve }));
        }
    }
    Ok(None)
}

/// Nearly-constant concurrence with steering and Bell varying strongly.
pub fn flat_concurrence(curve: &SweepCurve, c_range: f64, sb_range: f64) -> bool {
    curve.range(Measure::Concurrence) < c_range
        && curve.range(Measure::Steering) > sb_range
        && curve.range(Measure::Bell) > sb_range
}

/// Some β-window with steering rising while Bell falls.
pub fn steering_up_bell_down(curve: &SweepCurve) -> bool {
    !opposing_windows(curve, Measure::Steering, Measure::Bell).is_empty()
}
