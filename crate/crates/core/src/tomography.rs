//! Simulated two-qubit state tomography.
//!
//! Nine local Pauli settings (`{Z, X, Y}` on each qubit, four joint outcomes
//! each) are sampled with multinomial shot noise, reconstructed by the
//! iterative `RρR` maximum-likelihood map, and scored with the Uhlmann
//! fidelity.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{c64, dagger, hermitian_eigen, real, tensor, C64, ComplexMatrix, ComplexVector, LinalgError};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE: f64 = -1e-8;

/// Floor on predicted probabilities inside the `R` operator.
const PROB_FLOOR: f64 = 1e-12;
/// First dilution tried when a full `RρR` step lowers the likelihood.
const DILUTION: f64 = 0.1;
/// Below this dilution a step counts as stalled.
const MIN_DILUTION: f64 = 1e-6;
/// Longest extension `t` tried past the plain `RρR` step.
const MAX_EXTENSION: f64 = 1048576.0;
/// Extended steps keep `X_t ≥ EXTENSION_FLOOR · I`, so no direction is
/// annihilated and later unable to regrow.
const EXTENSION_FLOOR: f64 = 1e-2;
/// Optimality slack: at the maximum, `R ≤ (1 + KKT_TOL) I`.
const KKT_TOL: f64 = 1e-7;
/// Eigenvalues below this fraction of the largest count as the tail.
const TAIL_FRACTION: f64 = 1e-2;
const TAIL_SCALES: [f64; 3] = [1.0 / 16.0, 0.25, 0.5];
/// Eigenvalues at or below this are treated as outside a state's support.
const SUPPORT_EPS: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("not a valid density matrix: {0}")]
    InvalidState(String),
    #[error("shots must be at least 1")]
    NoShots,
    #[error("depolarizing probability {0} outside [0, 1]")]
    BadNoise(f64),
    #[error("counts {counts:?} do not sum to shots = {shots}")]
    CountsMismatch { shots: u64, counts: [u64; 4] },
    #[error("missing measurement settings: {0}")]
    MissingSettings(String),
    #[error("no observations")]
    NoData,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, TomographyError>;

/// Single-qubit Pauli measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliBasis {
    Z,
    X,
    Y,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::Z, PauliBasis::X, PauliBasis::Y];

    /// Eigenkets for outcomes 0 (eigenvalue +1) and 1 (eigenvalue −1).
    pub fn kets(self) -> [ComplexVector; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PauliBasis::Z => [ComplexVector::basis(2, 0), ComplexVector::basis(2, 1)],
            PauliBasis::X => [ComplexVector::from_real(&[h, h]), ComplexVector::from_real(&[h, -h])],
            PauliBasis::Y => [
                ComplexVector::new(vec![real(h), c64(0.0, h)]),
                ComplexVector::new(vec![real(h), c64(0.0, -h)]),
            ],
        }
    }

    pub fn pauli(self) -> ComplexMatrix {
        match self {
            PauliBasis::Z => ComplexMatrix::diag(&[1.0, -1.0]),
            PauliBasis::X => ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap(),
            PauliBasis::Y => {
                ComplexMatrix::from_rows(&[&[C64::default(), c64(0.0, -1.0)], &[c64(0.0, 1.0), C64::default()]])
                    .unwrap()
            }
        }
    }
}

impl fmt::Display for PauliBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliBasis::Z => "Z",
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
        })
    }
}

impl FromStr for PauliBasis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Z" => Ok(PauliBasis::Z),
            "X" => Ok(PauliBasis::X),
            "Y" => Ok(PauliBasis::Y),
            other => Err(format!("unknown basis '{other}'")),
        }
    }
}

/// A joint local measurement; outcome `k = 2a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub basis_a: PauliBasis,
    pub basis_b: PauliBasis,
    kets: [ComplexVector; 4],
}

impl MeasurementSetting {
    pub fn new(basis_a: PauliBasis, basis_b: PauliBasis) -> Self {
        let ka = basis_a.kets();
        let kb = basis_b.kets();
        let kets = [tensor(&ka[0], &kb[0]), tensor(&ka[0], &kb[1]), tensor(&ka[1], &kb[0]), tensor(&ka[1], &kb[1])];
        Self { basis_a, basis_b, kets }
    }

    pub fn kets(&self) -> &[ComplexVector; 4] {
        &self.kets
    }

    pub fn projectors(&self) -> [ComplexMatrix; 4] {
        std::array::from_fn(|k| self.kets[k].projector())
    }

    /// `Tr(ρ Π_k)` for each outcome.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> [f64; 4] {
        std::array::from_fn(|k| rho.expectation(&self.kets[k]).re)
    }
}

/// All nine pairs from `{Z, X, Y}²`, qubit A's basis varying slowest.
pub fn setting_grid() -> Vec<MeasurementSetting> {
    PauliBasis::ALL
        .iter()
        .flat_map(|&a| PauliBasis::ALL.iter().map(move |&b| MeasurementSetting::new(a, b)))
        .collect()
}

/// A validated density matrix: Hermitian, unit trace, PSD up to round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(TomographyError::InvalidState("not square".into()));
        }
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(TomographyError::InvalidState(format!("Hermitian deviation {dev:.3e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(TomographyError::InvalidState(format!("trace {tr}")));
        }
        let min = *hermitian_eigen(&m)?.values.last().unwrap();
        if min < MIN_EIGENVALUE {
            return Err(TomographyError::InvalidState(format!("eigenvalue {min:.3e}")));
        }
        Ok(Self(m))
    }

    pub fn from_pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm_sqr();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(TomographyError::InvalidState(format!("state norm^2 {n}")));
        }
        Ok(Self(psi.projector()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(real(1.0 / dim as f64)))
    }

    /// `(1 − p) ρ + p I/d`.
    pub fn depolarized(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(TomographyError::BadNoise(p));
        }
        let d = self.dim();
        let mixed = Self::maximally_mixed(d);
        Ok(Self(&self.0.scale(real(1.0 - p)) + &mixed.0.scale(real(p))))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Raw coincidence counts for one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsRecord {
    pub setting: MeasurementSetting,
    pub shots: u64,
    pub counts: [u64; 4],
}

impl CountsRecord {
    pub fn new(setting: MeasurementSetting, counts: [u64; 4]) -> Result<Self> {
        let shots = counts.iter().sum();
        if shots == 0 {
            return Err(TomographyError::NoShots);
        }
        Ok(Self { setting, shots, counts })
    }

    pub fn with_shots(setting: MeasurementSetting, shots: u64, counts: [u64; 4]) -> Result<Self> {
        if counts.iter().sum::<u64>() != shots {
            return Err(TomographyError::CountsMismatch { shots, counts });
        }
        Self::new(setting, counts)
    }

    pub fn frequencies(&self) -> SettingFrequencies {
        let n = self.shots as f64;
        SettingFrequencies {
            setting: self.setting.clone(),
            freqs: self.counts.map(|c| c as f64 / n),
            weight: n,
        }
    }
}

/// Relative frequencies for one setting; `weight` is the number of shots
/// (any positive value for idealized data).
#[derive(Debug, Clone, PartialEq)]
pub struct SettingFrequencies {
    pub setting: MeasurementSetting,
    pub freqs: [f64; 4],
    pub weight: f64,
}

/// Infinite-shot frequencies `Tr(ρ Π_k)`.
pub fn exact_frequencies(rho: &DensityMatrix, settings: &[MeasurementSetting]) -> Vec<SettingFrequencies> {
    settings
        .iter()
        .map(|s| SettingFrequencies {
            setting: s.clone(),
            freqs: s.probabilities(rho.matrix()).map(|p| p.max(0.0)),
            weight: 1.0,
        })
        .collect()
}

fn multinomial(rng: &mut ChaCha8Rng, shots: u64, probs: [f64; 4]) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut left = shots;
    let mut mass: f64 = probs.iter().sum();
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, p).expect("p in [0, 1]").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= probs[k];
    }
    out[3] = left;
    out
}

/// Multinomial counts per setting from `(1 − p)ρ + p I/4`.
///
/// Setting `i` draws from its own ChaCha stream `i` under `seed`, so results
/// do not depend on evaluation order.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    shots: u64,
    seed: u64,
    noise: Option<f64>,
) -> Result<Vec<CountsRecord>> {
    if shots == 0 {
        return Err(TomographyError::NoShots);
    }
    let noisy = match noise {
        Some(p) => rho.depolarized(p)?,
        None => rho.clone(),
    };
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let probs = s.probabilities(noisy.matrix()).map(|p| p.max(0.0));
            CountsRecord::with_shots(s.clone(), shots, multinomial(&mut rng, shots, probs))
        })
        .collect()
}

fn expectation_from(freqs: &[f64; 4], on_a: bool, on_b: bool) -> f64 {
    (0..4)
        .map(|k| {
            let a = (k >> 1) & 1;
            let b = k & 1;
            let mut sign = 1.0;
            if on_a && a == 1 {
                sign = -sign;
            }
            if on_b && b == 1 {
                sign = -sign;
            }
            sign * freqs[k]
        })
        .sum()
}

/// Pauli-expectation reconstruction `Σ ⟨σ_i⊗σ_j⟩ σ_i⊗σ_j / 4`.
///
/// Hermitian with unit trace, but not necessarily positive for finite data.
/// Single-qubit expectations are averaged over every setting that measures
/// that qubit in the relevant basis.
pub fn linear_inversion(data: &[SettingFrequencies]) -> Result<ComplexMatrix> {
    let index = |b: PauliBasis| PauliBasis::ALL.iter().position(|&x| x == b).unwrap();
    let mut corr = [[0.0f64; 3]; 3];
    let mut corr_n = [[0usize; 3]; 3];
    let mut single_a = [0.0f64; 3];
    let mut single_a_n = [0usize; 3];
    let mut single_b = [0.0f64; 3];
    let mut single_b_n = [0usize; 3];

    for d in data {
        let (i, j) = (index(d.setting.basis_a), index(d.setting.basis_b));
        corr[i][j] += expectation_from(&d.freqs, true, true);
        corr_n[i][j] += 1;
        single_a[i] += expectation_from(&d.freqs, true, false);
        single_a_n[i] += 1;
        single_b[j] += expectation_from(&d.freqs, false, true);
        single_b_n[j] += 1;
    }
    let missing: Vec<String> = PauliBasis::ALL
        .iter()
        .flat_map(|&a| PauliBasis::ALL.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| corr_n[index(a)][index(b)] == 0)
        .map(|(a, b)| format!("{a}{b}"))
        .collect();
    if !missing.is_empty() {
        return Err(TomographyError::MissingSettings(missing.join(",")));
    }

    let id = ComplexMatrix::identity(2);
    let mut rho = tensor(&id, &id);
    for (i, &a) in PauliBasis::ALL.iter().enumerate() {
        let pa = a.pauli();
        rho = &rho + &tensor(&pa, &id).scale(real(single_a[i] / single_a_n[i] as f64));
        for (j, &b) in PauliBasis::ALL.iter().enumerate() {
            let pb = b.pauli();
            if i == 0 {
                rho = &rho + &tensor(&id, &pb).scale(real(single_b[j] / single_b_n[j] as f64));
            }
            rho = &rho + &tensor(&pa, &pb).scale(real(corr[i][j] / corr_n[i][j] as f64));
        }
    }
    Ok(rho.scale(real(0.25)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Stop when the max-norm change of ρ falls to this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    /// Log-likelihood per shot, `Σ f_k ln p_k` over all settings.
    pub log_likelihood: f64,
    pub fidelity_vs_target: Option<f64>,
    pub converged: bool,
    /// Iterations that fell back to a diluted step.
    pub diluted_steps: usize,
    /// Iterations that extended past the plain step.
    pub extended_steps: usize,
    /// Iterations that also shrank near-zero eigenvalues.
    pub tail_shrinks: usize,
    /// Directions mixed back in after a stall.
    pub regrowths: usize,
    /// Log-likelihood after every accepted iteration, starting from `I/4`.
    pub likelihood_trace: Vec<f64>,
}

impl TomographyResult {
    pub fn with_target(mut self, target: &DensityMatrix) -> Result<Self> {
        self.fidelity_vs_target = Some(uhlmann_fidelity(target, &self.rho)?);
        Ok(self)
    }

    pub fn is_monotone(&self) -> bool {
        self.likelihood_trace.windows(2).all(|w| w[1] >= w[0])
    }
}

struct Observation {
    ket: ComplexVector,
    freq: f64,
}

fn observations(data: &[SettingFrequencies]) -> Result<(usize, Vec<Observation>)> {
    let total: f64 = data.iter().map(|d| d.weight).sum();
    if data.is_empty() || total <= 0.0 {
        return Err(TomographyError::NoData);
    }
    let dim = data[0].setting.kets()[0].dim();
    let mut obs = Vec::new();
    for d in data {
        for k in 0..4 {
            // Settings weighted by their share of the shots.
            let freq = d.freqs[k] * d.weight / total;
            if freq > 0.0 {
                obs.push(Observation { ket: d.setting.kets()[k].clone(), freq });
            }
        }
    }
    Ok((dim, obs))
}

/// `Σ f ln f`, the likelihood of a model reproducing the data exactly.
fn data_entropy(obs: &[Observation]) -> f64 {
    obs.iter().map(|o| o.freq * o.freq.ln()).sum()
}

/// `Σ f ln(p / f)`: the log-likelihood minus [`data_entropy`]. Computed via
/// `ln_1p` so that gains far below the likelihood's own magnitude still
/// register near a perfect fit.
fn relative_likelihood(rho: &ComplexMatrix, obs: &[Observation]) -> f64 {
    obs.iter()
        .map(|o| {
            let p = rho.expectation(&o.ket).re.max(PROB_FLOOR);
            o.freq * ((p - o.freq) / o.freq).ln_1p()
        })
        .sum()
}

fn r_operator(rho: &ComplexMatrix, obs: &[Observation], dim: usize) -> ComplexMatrix {
    let mut r = ComplexMatrix::zeros(dim, dim);
    for o in obs {
        let p = rho.expectation(&o.ket).re.max(PROB_FLOOR);
        let w = o.freq / p;
        for i in 0..dim {
            let vi = o.ket[i] * w;
            for j in 0..dim {
                r[(i, j)] += vi * o.ket[j].conj();
            }
        }
    }
    r
}

/// An iterate kept as `ρ = TT†`, so every update is a Gram matrix and stays
/// positive semidefinite under rounding.
#[derive(Clone)]
struct Point {
    factor: ComplexMatrix,
    rho: ComplexMatrix,
}

impl Point {
    fn from_factor(factor: ComplexMatrix) -> Self {
        let gram = &factor * &dagger(&factor);
        let tr = gram.trace().re;
        Self { factor: factor.scale(real(1.0 / tr.sqrt())), rho: gram.scale(real(1.0 / tr)).hermitian_part() }
    }

    fn from_rho(rho: &ComplexMatrix) -> Result<Self> {
        let eig = hermitian_eigen(rho)?;
        let mut factor = eig.vectors;
        for (j, &v) in eig.values.iter().enumerate() {
            for i in 0..factor.rows() {
                factor[(i, j)] *= v.max(0.0).sqrt();
            }
        }
        Ok(Self::from_factor(factor))
    }

    /// `XρX† / Tr`.
    fn moved(&self, x: &ComplexMatrix) -> Self {
        Self::from_factor(x * &self.factor)
    }
}

pub fn mle_reconstruct(records: &[CountsRecord], opts: MleOptions) -> Result<TomographyResult> {
    let data: Vec<SettingFrequencies> = records.iter().map(CountsRecord::frequencies).collect();
    mle_reconstruct_frequencies(&data, opts)
}

/// Scales eigenvalues below `TAIL_FRACTION · λ_max` by the smallest factor in
/// `TAIL_SCALES` that raises the likelihood above `gap`. Only directions
/// where the likelihood gradient points inward (`⟨v|R|v⟩ < 1`) are touched;
/// the others must stay free to regrow.
fn shrink_tail(point: &Point, gap: f64, obs: &[Observation]) -> Result<Option<(Point, f64)>> {
    let eig = hermitian_eigen(&point.rho)?;
    let r = r_operator(&point.rho, obs, point.rho.rows());
    let cut = TAIL_FRACTION * eig.values[0];
    let shrink: Vec<bool> = eig
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| v < cut && r.expectation(&eig.vectors.column(j)).re < 1.0)
        .collect();
    if !shrink.contains(&true) {
        return Ok(None);
    }
    for scale in TAIL_SCALES {
        let root = eig.vectors.clone();
        let mut factor = root;
        for (j, &v) in eig.values.iter().enumerate() {
            let w = if shrink[j] { v.max(0.0) * scale } else { v.max(0.0) };
            for i in 0..factor.rows() {
                factor[(i, j)] *= w.sqrt();
            }
        }
        let candidate = Point::from_factor(factor);
        let g = relative_likelihood(&candidate.rho, obs);
        if g > gap {
            return Ok(Some((candidate, g)));
        }
    }
    Ok(None)
}

/// Multiplicative steps cannot revive a direction whose weight has
/// underflowed. If the top eigenvector `v` of `R` still has `⟨v|R|v⟩ > 1`,
/// mixes it in, `(1 − s)ρ + s|v⟩⟨v|`, with the best halving `s ≤ 1/2`.
fn regrow(point: &Point, gap: f64, obs: &[Observation]) -> Result<Option<(Point, f64)>> {
    let eig = hermitian_eigen(&r_operator(&point.rho, obs, point.rho.rows()))?;
    if eig.values[0] <= 1.0 + KKT_TOL {
        return Ok(None);
    }
    let v = eig.vectors.column(0).projector();
    let mut best: Option<(Point, f64)> = None;
    let mut s = 0.5;
    while s >= 1e-15 {
        let candidate = Point::from_rho(&(&point.rho.scale(real(1.0 - s)) + &v.scale(real(s))))?;
        let g = relative_likelihood(&candidate.rho, obs);
        match &best {
            Some((_, b)) if g <= *b => break,
            _ if g > gap => best = Some((candidate, g)),
            _ => {}
        }
        s *= 0.5;
    }
    Ok(best)
}

/// Iterates `ρ ← RρR / Tr(RρR)` from `I/d`.
///
/// A step that would lower the likelihood is retried diluted, as
/// `(I + εR)ρ(I + εR)` with ε halving from 0.1; if no ε ≥ 1e-6 helps, the
/// iteration has stalled at the optimum and stops.
///
/// Near a rank-deficient optimum with full-support data, `R → I` and the
/// plain map closes the gap only like `1/k`. So after an improving plain
/// step the same family is extended past it, `X_t = I + t(R − I)` for
/// `t = 2, 4, 8, …`, keeping the best point while the likelihood still rises.
/// (`t = 1` is the plain step; dilution is `t = ε/(1 + ε)`.) The same
/// degeneracy makes vanishing eigenvalues decay slowly, so eigenvalues far
/// below the largest are also shrunk when that raises the likelihood.
/// Before stopping, a stalled iterate is checked for optimality and, if a
/// missing direction would help, it is mixed back in (see [`regrow`]).
pub fn mle_reconstruct_frequencies(data: &[SettingFrequencies], opts: MleOptions) -> Result<TomographyResult> {
    let (dim, obs) = observations(data)?;
    let entropy = data_entropy(&obs);
    let id = ComplexMatrix::identity(dim);
    let mut point = Point::from_factor(id.clone());
    let mut gap = relative_likelihood(&point.rho, &obs);
    let mut trace = vec![entropy + gap];
    let mut diluted_steps = 0;
    let mut extended_steps = 0;
    let mut tail_shrinks = 0;
    let mut regrowths = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let r = r_operator(&point.rho, &obs, dim);
        let mut next = point.moved(&r);
        let mut next_gap = relative_likelihood(&next.rho, &obs);
        if next_gap >= gap {
            let excess = &r - &id;
            let lowest = hermitian_eigen(&r)?.values.iter().copied().fold(f64::INFINITY, f64::min);
            let limit = if lowest < 1.0 { (1.0 - EXTENSION_FLOOR) / (1.0 - lowest) } else { f64::INFINITY };
            let mut t = 2.0;
            let mut extended = false;
            while t <= MAX_EXTENSION.min(limit) {
                let candidate = point.moved(&(&id + &excess.scale(real(t))));
                let g = relative_likelihood(&candidate.rho, &obs);
                if g <= next_gap {
                    break;
                }
                next = candidate;
                next_gap = g;
                extended = true;
                t *= 2.0;
            }
            extended_steps += usize::from(extended);
            if let Some((shrunk, g)) = shrink_tail(&next, next_gap, &obs)? {
                next = shrunk;
                next_gap = g;
                tail_shrinks += 1;
            }
        } else {
            let mut eps = DILUTION;
            let mut accepted = false;
            while eps >= MIN_DILUTION {
                next = point.moved(&(&id + &r.scale(real(eps))));
                next_gap = relative_likelihood(&next.rho, &obs);
                if next_gap >= gap {
                    accepted = true;
                    break;
                }
                eps *= 0.5;
            }
            if accepted {
                diluted_steps += 1;
            } else {
                next = point.clone();
                next_gap = gap;
            }
        }
        let mut delta = next.rho.max_abs_diff(&point.rho);
        if delta <= opts.tol {
            match regrow(&next, next_gap, &obs)? {
                Some((grown, g)) => {
                    delta = grown.rho.max_abs_diff(&point.rho);
                    next = grown;
                    next_gap = g;
                    regrowths += 1;
                }
                None => converged = true,
            }
        }
        if next_gap > gap || delta > 0.0 {
            iterations += 1;
            point = next;
            gap = next_gap;
            trace.push(entropy + gap);
        }
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("MLE did not converge within {} iterations", opts.max_iter);
    }
    Ok(TomographyResult {
        rho: DensityMatrix::new(point.rho)?,
        iterations,
        log_likelihood: entropy + gap,
        fidelity_vs_target: None,
        converged,
        diluted_steps,
        extended_steps,
        tail_shrinks,
        regrowths,
        likelihood_trace: trace,
    })
}

/// `[Tr √(√a b √a)]²`, clamped to `[0, 1]`.
///
/// The square root is taken on the lower-rank argument and the product is
/// formed on its support only; this keeps round-off eigenvalues near zero
/// from leaking `√ε`-sized errors into the trace. Symmetric in its arguments.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(TomographyError::InvalidState(format!("dimension {} vs {}", a.dim(), b.dim())));
    }
    let ea = hermitian_eigen(a.matrix())?;
    let eb = hermitian_eigen(b.matrix())?;
    let rank = |v: &[f64]| v.iter().filter(|&&x| x > SUPPORT_EPS).count();
    let (root, other) = if rank(&ea.values) <= rank(&eb.values) { (&ea, b) } else { (&eb, a) };

    let support: Vec<usize> = (0..root.values.len()).filter(|&k| root.values[k] > SUPPORT_EPS).collect();
    let r = support.len();
    if r == 0 {
        return Ok(0.0);
    }
    let cols: Vec<ComplexVector> = support.iter().map(|&k| root.vectors.column(k)).collect();
    let mut m = ComplexMatrix::zeros(r, r);
    for (i, &ki) in support.iter().enumerate() {
        let bi = other.matrix().apply(&cols[i]);
        for (j, &kj) in support.iter().enumerate() {
            let w = (root.values[ki] * root.values[kj]).sqrt();
            m[(j, i)] = cols[j].inner(&bi) * w;
        }
    }
    let eig = hermitian_eigen(&m.hermitian_part())?;
    let tr: f64 = eig.values.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
