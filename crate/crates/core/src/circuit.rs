//! The two-qubit circuit: `U` on A, controlled-H (A controls B), H on A,
//! then `G(θ)` on B, starting from `|00⟩`.
//!
//! ```text
//! A: |0⟩ ─ U ─ ● ─────── H ───────────── measure
//! B: |0⟩ ───── H ─ (I) ───── (II) ─ G ─ (III) measure
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{real, tensor, C64, ComplexMatrix, ComplexVector, LinalgError};

/// Normalization tolerance for amplitudes and states.
pub const NORM_TOL: f64 = 1e-12;

/// Branches whose probability falls at or below this are treated as impossible.
pub const IMPOSSIBLE_PROB: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("|alpha|^2 + |beta|^2 = {0} (must be 1)")]
    NotNormalized(f64),
    #[error("state has norm^2 {0}, expected 1")]
    StateNotNormalized(f64),
    #[error("expected a {expected}-dimensional state, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("impossible outcome: qubit {qubit} = {outcome} has probability {prob:.3e}")]
    ImpossibleOutcome { qubit: Qubit, outcome: u8, prob: f64 },
    #[error("theta grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    A,
    B,
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Qubit::A => "A",
            Qubit::B => "B",
        })
    }
}

/// Selects `U₊` or `U₋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// The qubit-A outcome that triggers the deduction chain for this sign.
    pub fn trigger(self) -> u8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => 0,
        }
    }

    pub fn params(self) -> UnitaryParams {
        match self {
            Sign::Plus => UnitaryParams::u_plus(),
            Sign::Minus => UnitaryParams::u_minus(),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(format!("invalid sign '{other}' (expected + or -)")),
        }
    }
}

/// Amplitudes of the single-qubit unitary `U = [[α, −β*], [β, α*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryParams {
    alpha: C64,
    beta: C64,
}

impl UnitaryParams {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(CircuitError::NotNormalized(n));
        }
        Ok(Self { alpha, beta })
    }

    pub fn real(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(real(alpha), real(beta))
    }

    /// `α = √(1/3)`, `β = √(2/3)`: zeroes the `|10⟩` amplitude of region II.
    pub fn u_plus() -> Self {
        Self { alpha: real((1.0f64 / 3.0).sqrt()), beta: real((2.0f64 / 3.0).sqrt()) }
    }

    /// `α = √(1/3)`, `β = −√(2/3)`: zeroes the `|00⟩` amplitude of region II.
    pub fn u_minus() -> Self {
        Self { alpha: real((1.0f64 / 3.0).sqrt()), beta: real(-(2.0f64 / 3.0).sqrt()) }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// Single-qubit state `U|0⟩ = α|0⟩ + β|1⟩`.
    pub fn prepared_state(&self) -> ComplexVector {
        ComplexVector::new(vec![self.alpha, self.beta])
    }
}

/// The `G` gate angle. Probabilities are `2π`-periodic in θ (the matrix flips
/// sign), so out-of-range angles are folded into `[0, 2π)` with a warning.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GateAngle(f64);

impl GateAngle {
    pub fn new(theta: f64) -> Self {
        if (0.0..=PI).contains(&theta) {
            return Self(theta);
        }
        let folded = theta.rem_euclid(2.0 * PI);
        log::warn!("theta {theta} outside [0, pi]; using {folded} (same statistics, global phase may flip)");
        Self(folded)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// `(c, s) = (cos θ/2, sin θ/2)`.
    pub fn half_cos_sin(self) -> (f64, f64) {
        let (s, c) = (self.0 / 2.0).sin_cos();
        (c, s)
    }
}

impl From<f64> for GateAngle {
    fn from(theta: f64) -> Self {
        GateAngle::new(theta)
    }
}

/// Where a gate sits in the two-qubit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    On(Qubit),
    /// Two-qubit gate, qubit A as the control/most significant index.
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub matrix: ComplexMatrix,
    pub placement: Placement,
}

impl Gate {
    pub fn single(name: impl Into<String>, matrix: ComplexMatrix, qubit: Qubit) -> Self {
        debug_assert_eq!(matrix.rows(), 2);
        Self { name: name.into(), matrix, placement: Placement::On(qubit) }
    }

    pub fn arity(&self) -> usize {
        match self.placement {
            Placement::On(_) => 1,
            Placement::Both => 2,
        }
    }

    pub fn on(mut self, qubit: Qubit) -> Self {
        assert_eq!(self.arity(), 1, "only single-qubit gates can be re-placed");
        self.placement = Placement::On(qubit);
        self
    }

    /// The gate lifted to the 4-dimensional register.
    pub fn embedded(&self) -> ComplexMatrix {
        let id = ComplexMatrix::identity(2);
        match self.placement {
            Placement::On(Qubit::A) => tensor(&self.matrix, &id),
            Placement::On(Qubit::B) => tensor(&id, &self.matrix),
            Placement::Both => self.matrix.clone(),
        }
    }

    pub fn apply(&self, state: &ComplexVector) -> ComplexVector {
        self.embedded().apply(state)
    }
}

pub fn build_u(params: &UnitaryParams) -> Gate {
    let (a, b) = (params.alpha, params.beta);
    let m = ComplexMatrix::from_rows(&[&[a, -b.conj()], &[b, a.conj()]]).expect("2x2");
    Gate::single("U", m, Qubit::A)
}

pub fn u_plus() -> Gate {
    build_u(&UnitaryParams::u_plus())
}

pub fn u_minus() -> Gate {
    build_u(&UnitaryParams::u_minus())
}

pub fn hadamard_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
        .expect("2x2")
}

pub fn hadamard(qubit: Qubit) -> Gate {
    Gate::single("H", hadamard_matrix(), qubit)
}

pub fn g_matrix(angle: GateAngle) -> ComplexMatrix {
    let (c, s) = angle.half_cos_sin();
    ComplexMatrix::from_real_rows(&[&[c, s], &[s, -c]]).expect("2x2")
}

/// `G(θ) = [[c, s], [s, −c]]`, placed on qubit B.
pub fn build_g(angle: GateAngle) -> Gate {
    Gate::single("G", g_matrix(angle), Qubit::B)
}

/// `block-diag(I₂, H)`: applies H to B when A is `|1⟩`.
pub fn controlled_h() -> Gate {
    let h = hadamard_matrix();
    let mut m = ComplexMatrix::identity(4);
    for i in 0..2 {
        for j in 0..2 {
            m[(2 + i, 2 + j)] = h[(i, j)];
        }
    }
    Gate { name: "CH".into(), matrix: m, placement: Placement::Both }
}

/// Snapshots of the register along the circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStates {
    pub input: ComplexVector,
    pub post_u: ComplexVector,
    pub region_i: ComplexVector,
    pub region_ii: ComplexVector,
    pub region_iii: ComplexVector,
}

/// Named snapshot positions, in circuit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Snapshot {
    Input,
    PostU,
    I,
    II,
    III,
}

impl Snapshot {
    pub const ALL: [Snapshot; 5] = [Snapshot::Input, Snapshot::PostU, Snapshot::I, Snapshot::II, Snapshot::III];

    pub fn label(self) -> &'static str {
        match self {
            Snapshot::Input => "input",
            Snapshot::PostU => "post_u",
            Snapshot::I => "I",
            Snapshot::II => "II",
            Snapshot::III => "III",
        }
    }
}

impl FromStr for Snapshot {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "input" => Ok(Snapshot::Input),
            "post_u" | "post-u" => Ok(Snapshot::PostU),
            "i" | "1" => Ok(Snapshot::I),
            "ii" | "2" => Ok(Snapshot::II),
            "iii" | "3" => Ok(Snapshot::III),
            other => Err(format!("unknown region '{other}' (expected i, ii or iii)")),
        }
    }
}

impl RegionStates {
    pub fn get(&self, which: Snapshot) -> &ComplexVector {
        match which {
            Snapshot::Input => &self.input,
            Snapshot::PostU => &self.post_u,
            Snapshot::I => &self.region_i,
            Snapshot::II => &self.region_ii,
            Snapshot::III => &self.region_iii,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Snapshot, &ComplexVector)> {
        Snapshot::ALL.into_iter().map(move |s| (s, self.get(s)))
    }
}

/// Evolves `|00⟩` gate by gate. This is the authoritative path.
pub fn evolve_regions(params: &UnitaryParams, angle: GateAngle) -> RegionStates {
    let input = ComplexVector::basis(4, 0);
    let post_u = build_u(params).apply(&input);
    let region_i = controlled_h().apply(&post_u);
    let region_ii = hadamard(Qubit::A).apply(&region_i);
    let region_iii = build_g(angle).apply(&region_ii);
    RegionStates { input, post_u, region_i, region_ii, region_iii }
}

/// Closed-form amplitudes for every snapshot, written out coefficient by
/// coefficient. Kept independent of the gate builders so the two paths can
/// cross-check each other.
pub fn closed_form_regions(params: &UnitaryParams, angle: GateAngle) -> RegionStates {
    let (a, b) = (params.alpha, params.beta);
    let (c, s) = angle.half_cos_sin();
    let r2 = FRAC_1_SQRT_2;
    let zero = C64::default();
    // Entries in (00, 01, 10, 11) order.
    let input = ComplexVector::basis(4, 0);
    let post_u = ComplexVector::new(vec![a, zero, b, zero]);
    let region_i = ComplexVector::new(vec![a, zero, b * r2, b * r2]);
    let region_ii = ComplexVector::new(vec![a * r2 + b / 2.0, b / 2.0, a * r2 - b / 2.0, -b / 2.0]);
    let region_iii = ComplexVector::new(vec![
        a * (c * r2) + b * ((c + s) / 2.0),
        a * (s * r2) + b * ((s - c) / 2.0),
        a * (c * r2) - b * ((c + s) / 2.0),
        a * (s * r2) + b * ((c - s) / 2.0),
    ]);
    RegionStates { input, post_u, region_i, region_ii, region_iii }
}

/// Joint computational-basis probabilities, indexed `p{a}{b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl OutcomeTable {
    pub fn from_array(p: [f64; 4]) -> Self {
        Self { p00: p[0], p01: p[1], p10: p[2], p11: p[3] }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }

    pub fn get(&self, a: u8, b: u8) -> f64 {
        self.as_array()[(2 * a + b) as usize]
    }

    pub fn set(&mut self, a: u8, b: u8, value: f64) {
        let mut arr = self.as_array();
        arr[(2 * a + b) as usize] = value;
        *self = Self::from_array(arr);
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    pub fn marginal(&self, qubit: Qubit, value: u8) -> f64 {
        match qubit {
            Qubit::A => self.get(value, 0) + self.get(value, 1),
            Qubit::B => self.get(0, value) + self.get(1, value),
        }
    }
}

fn check_state(state: &ComplexVector) -> Result<()> {
    if state.dim() != 4 {
        return Err(CircuitError::WrongDimension { expected: 4, got: state.dim() });
    }
    let n = state.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(CircuitError::StateNotNormalized(n));
    }
    Ok(())
}

pub fn outcome_probabilities(state: &ComplexVector) -> Result<OutcomeTable> {
    check_state(state)?;
    let e = state.entries();
    Ok(OutcomeTable::from_array([e[0].norm_sqr(), e[1].norm_sqr(), e[2].norm_sqr(), e[3].norm_sqr()]))
}

fn bit_of(index: usize, qubit: Qubit) -> u8 {
    match qubit {
        Qubit::A => (index >> 1) as u8 & 1,
        Qubit::B => index as u8 & 1,
    }
}

/// Projects `qubit` onto `outcome` in the computational basis, returning the
/// renormalized post-measurement state and the branch probability.
pub fn conditional_state(state: &ComplexVector, qubit: Qubit, outcome: u8) -> Result<(ComplexVector, f64)> {
    check_state(state)?;
    assert!(outcome <= 1, "outcome must be 0 or 1");
    let mut projected = state.clone();
    for i in 0..4 {
        if bit_of(i, qubit) != outcome {
            projected[i] = C64::default();
        }
    }
    let prob = projected.norm_sqr();
    if prob <= IMPOSSIBLE_PROB {
        return Err(CircuitError::ImpossibleOutcome { qubit, outcome, prob });
    }
    let post = projected.scale(real(1.0 / prob.sqrt()));
    Ok((post, prob))
}

/// Region-III statistics over a θ grid, in grid order.
pub fn sweep_theta(params: &UnitaryParams, grid: &[f64]) -> Result<Vec<(f64, OutcomeTable)>> {
    if grid.is_empty() {
        return Err(CircuitError::EmptyGrid);
    }
    grid.iter()
        .map(|&theta| {
            let states = evolve_regions(params, GateAngle::new(theta));
            Ok((theta, outcome_probabilities(&states.region_iii)?))
        })
        .collect()
}

/// `n` evenly spaced points on `[start, stop]` (a single point yields `start`).
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub mod printed {
    //! Term-by-term ket listings of the `U±` region states, each tagged with
    //! the qubit order its labels use.
    //!
    //! The region-I listing labels its kets qubit-B-first (`|01⟩` there means
    //! `|0_B 1_A⟩`); regions II and III are labelled qubit-A-first. Reading the
    //! region-I listing A-first would put weight on `|01⟩`, which the
    //! controlled-H can never populate from `α|00⟩ + β|10⟩`. Reading it B-first
    //! reproduces the simulated state exactly. The `KetOrder` on each entry
    //! records this rather than silently reordering.

    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum KetOrder {
        /// `|xy⟩` = `|x_A y_B⟩`.
        AFirst,
        /// `|xy⟩` = `|x_B y_A⟩`.
        BFirst,
    }

    #[derive(Debug, Clone)]
    pub struct PrintedState {
        /// `(ket label, amplitude)` in the order they appear.
        pub terms: Vec<(&'static str, f64)>,
        pub order: KetOrder,
    }

    impl PrintedState {
        /// Amplitudes in this crate's A-first index order.
        pub fn to_state(&self) -> ComplexVector {
            let mut v = ComplexVector::zeros(4);
            for &(label, amp) in &self.terms {
                let bits: Vec<usize> = label.bytes().map(|b| (b - b'0') as usize).collect();
                let (a, b) = match self.order {
                    KetOrder::AFirst => (bits[0], bits[1]),
                    KetOrder::BFirst => (bits[1], bits[0]),
                };
                v[2 * a + b] += real(amp);
            }
            v
        }
    }

    pub fn region_i(sign: Sign) -> PrintedState {
        let k = sign.factor();
        let r3 = (1.0f64 / 3.0).sqrt();
        PrintedState { terms: vec![("00", r3), ("01", k * r3), ("11", k * r3)], order: KetOrder::BFirst }
    }

    pub fn region_ii(sign: Sign) -> PrintedState {
        let r6 = 1.0 / 6.0f64.sqrt();
        let terms = match sign {
            Sign::Plus => vec![("00", 2.0 * r6), ("01", r6), ("11", -r6)],
            Sign::Minus => vec![("10", 2.0 * r6), ("01", -r6), ("11", r6)],
        };
        PrintedState { terms, order: KetOrder::AFirst }
    }

    pub fn region_iii(sign: Sign, angle: GateAngle) -> PrintedState {
        let (c, s) = angle.half_cos_sin();
        let r6 = 1.0 / 6.0f64.sqrt();
        let terms = match sign {
            Sign::Plus => vec![
                ("00", (2.0 * c + s) * r6),
                ("01", (2.0 * s - c) * r6),
                ("10", -s * r6),
                ("11", c * r6),
            ],
            Sign::Minus => vec![
                ("10", (2.0 * c + s) * r6),
                ("11", (2.0 * s - c) * r6),
                ("00", -s * r6),
                ("01", c * r6),
            ],
        };
        PrintedState { terms, order: KetOrder::AFirst }
    }
}
