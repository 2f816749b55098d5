//! Classical deductions about the circuit, the check that exposes why they
//! cannot be chained, and what that chain would predict if it were taken at
//! face value.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{
    conditional_state, evolve_regions, g_matrix, hadamard_matrix, outcome_probabilities, CircuitError, GateAngle,
    OutcomeTable, Qubit, Sign, UnitaryParams, IMPOSSIBLE_PROB,
};
use crate::qcore::{commutator, ComplexMatrix, ComplexVector};

/// `‖[gate, projector]‖_max` above this means the two do not commute.
pub const COMMUTATION_TOL: f64 = 1e-10;

/// A conditional probability at least this close to 1 counts as certain.
pub const CERTAINTY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("deduction chain is empty")]
    EmptyChain,
    #[error("deduction {index}: conclusion {conclusion} does not match next premise {premise}")]
    MalformedChain { index: usize, conclusion: Proposition, premise: Proposition },
    #[error("deduction regions are not monotone along the chain")]
    NonMonotone,
    #[error("a deduction cannot conclude its own premise ({0})")]
    Circular(Proposition),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("state has norm^2 {0}, expected 1")]
    NotNormalized(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub type Result<T> = std::result::Result<T, LogicError>;

/// Circuit regions in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Region {
    I,
    II,
    III,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    /// Projector onto `value` (`0 ↦ |0⟩ or |+⟩`, `1 ↦ |1⟩ or |−⟩`).
    pub fn projector(self, value: u8) -> ComplexMatrix {
        let ket = match (self, value) {
            (Basis::Z, v) => ComplexVector::basis(2, v as usize),
            (Basis::X, 0) => ComplexVector::from_real(&[1.0, 1.0]).normalized().unwrap(),
            (Basis::X, _) => ComplexVector::from_real(&[1.0, -1.0]).normalized().unwrap(),
        };
        ket.projector()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// "Qubit `qubit`, measured in `basis` in `region`, yields `value`."
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Proposition {
    pub qubit: Qubit,
    pub region: Region,
    pub basis: Basis,
    pub value: u8,
}

impl Proposition {
    pub fn z(qubit: Qubit, region: Region, value: u8) -> Self {
        assert!(value <= 1);
        Self { qubit, region, basis: Basis::Z, value }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]@{} = {}", self.qubit, self.basis, self.region, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deduction {
    premise: Proposition,
    conclusion: Proposition,
    pub justification: String,
}

impl Deduction {
    pub fn new(premise: Proposition, conclusion: Proposition, justification: impl Into<String>) -> Result<Self> {
        if premise == conclusion {
            return Err(LogicError::Circular(premise));
        }
        Ok(Self { premise, conclusion, justification: justification.into() })
    }

    pub fn premise(&self) -> Proposition {
        self.premise
    }

    pub fn conclusion(&self) -> Proposition {
        self.conclusion
    }
}

/// The two individually valid steps: A's final outcome fixes B in region II,
/// and B in region II fixes A in region I.
pub fn standard_chain(sign: Sign) -> Vec<Deduction> {
    let trigger = sign.trigger();
    vec![
        Deduction::new(
            Proposition::z(Qubit::A, Region::III, trigger),
            Proposition::z(Qubit::B, Region::II, 1),
            "A's outcome branch of region II contains only B = 1",
        )
        .unwrap(),
        Deduction::new(
            Proposition::z(Qubit::B, Region::II, 1),
            Proposition::z(Qubit::A, Region::I, 1),
            "the B = 1 component of region I only exists alongside A = 1",
        )
        .unwrap(),
    ]
}

/// A single-qubit gate sitting between `after` and the next region.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedGate {
    pub name: String,
    pub qubit: Qubit,
    pub matrix: ComplexMatrix,
    pub after: Region,
}

/// The single-qubit gates that separate the regions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitLayout {
    pub gates: Vec<PlacedGate>,
}

impl CircuitLayout {
    /// H on A between I and II, `G(θ)` on B between II and III.
    pub fn standard(theta: f64) -> Self {
        Self::default()
            .with_gate("H", Qubit::A, hadamard_matrix(), Region::I)
            .with_gate("G", Qubit::B, g_matrix(GateAngle::new(theta)), Region::II)
    }

    pub fn with_gate(mut self, name: &str, qubit: Qubit, matrix: ComplexMatrix, after: Region) -> Self {
        self.gates.push(PlacedGate { name: name.into(), qubit, matrix, after });
        self
    }

    pub fn without(mut self, name: &str) -> Self {
        self.gates.retain(|g| g.name != name);
        self
    }

    fn between(&self, qubit: Qubit, from: Region, to: Region) -> impl Iterator<Item = &PlacedGate> {
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        self.gates.iter().filter(move |g| g.qubit == qubit && g.after >= lo && g.after < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Twist {
    pub qubit: Qubit,
    pub gate: String,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ChainVerdict {
    Valid,
    Twisted(Twist),
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }

    pub fn twist(&self) -> Option<&Twist> {
        match self {
            ChainVerdict::Valid => None,
            ChainVerdict::Twisted(t) => Some(t),
        }
    }
}

fn is_monotone(regions: &[Region]) -> bool {
    regions.windows(2).all(|w| w[0] <= w[1]) || regions.windows(2).all(|w| w[0] >= w[1])
}

/// Checks whether a sequence of deductions may be composed.
///
/// Every qubit that appears in more than one region along the chain carries
/// a definite value across the gates acting on it in between. The chain is
/// valid only if each such gate commutes with the projector of every
/// proposition made about that qubit; the first gate that does not is
/// reported as the twist.
pub fn validate_chain(deductions: &[Deduction], layout: &CircuitLayout) -> Result<ChainVerdict> {
    let first = deductions.first().ok_or(LogicError::EmptyChain)?;
    for (index, pair) in deductions.windows(2).enumerate() {
        if pair[0].conclusion != pair[1].premise {
            return Err(LogicError::MalformedChain {
                index,
                conclusion: pair[0].conclusion,
                premise: pair[1].premise,
            });
        }
    }
    let props: Vec<Proposition> =
        std::iter::once(first.premise).chain(deductions.iter().map(|d| d.conclusion)).collect();
    let regions: Vec<Region> = props.iter().map(|p| p.region).collect();
    if !is_monotone(&regions) {
        return Err(LogicError::NonMonotone);
    }

    for (i, p) in props.iter().enumerate() {
        for q in &props[i + 1..] {
            if p.qubit != q.qubit || p.region == q.region {
                continue;
            }
            for gate in layout.between(p.qubit, p.region, q.region) {
                for prop in [p, q] {
                    let comm = commutator(&gate.matrix, &prop.basis.projector(prop.value))
                        .map_err(CircuitError::from)?;
                    if comm.max_abs() > COMMUTATION_TOL {
                        return Ok(ChainVerdict::Twisted(Twist {
                            qubit: p.qubit,
                            gate: gate.name.clone(),
                            basis: prop.basis,
                        }));
                    }
                }
            }
        }
    }
    Ok(ChainVerdict::Valid)
}

fn prob_of(state: &ComplexVector, qubit: Qubit, value: u8) -> f64 {
    let t = outcome_probabilities(state).expect("normalized register state");
    t.marginal(qubit, value)
}

/// Checks the two single deductions quantum mechanically.
///
/// * d1: some outcome `a*` of A (measured in Z; G acts on B only, so region
///   II and the final readout agree) leaves B certainly `1` in region II.
/// * d2: B = 1 in region I leaves A certainly `1`.
///
/// Errors when the d2 premise is impossible (`β = 0`: the controlled-H never
/// fires and no B = 1 branch exists to reason from).
pub fn verify_single_deductions(params: &UnitaryParams) -> Result<(bool, bool)> {
    let states = evolve_regions(params, GateAngle::new(0.0));

    let (given_b1, _) = conditional_state(&states.region_i, Qubit::B, 1).map_err(|e| match e {
        CircuitError::ImpossibleOutcome { prob, .. } => {
            LogicError::Degenerate(format!("B = 1 in region I has probability {prob:.3e}; no trigger branch exists"))
        }
        other => other.into(),
    })?;
    let d2 = prob_of(&given_b1, Qubit::A, 1) >= 1.0 - CERTAINTY_TOL;

    let d1 = [1u8, 0u8].into_iter().any(|a| match conditional_state(&states.region_ii, Qubit::A, a) {
        Ok((post, _)) => prob_of(&post, Qubit::B, 1) >= 1.0 - CERTAINTY_TOL,
        Err(_) => false,
    });
    Ok((d1, d2))
}

/// What the chained deduction predicts for region III.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalPrediction {
    pub sign: Sign,
    pub theta: f64,
    /// Qubit-A outcome the chain conditions on.
    pub trigger: u8,
    /// Joint table; only the trigger row is a classical prediction, the other
    /// row is copied from quantum theory for completeness.
    pub table: OutcomeTable,
    /// `(p(B=0|A=a*), p(B=1|A=a*))` under the chain.
    pub conditional_b: [f64; 2],
}

impl ClassicalPrediction {
    pub fn is_predicted(&self, a: u8) -> bool {
        a == self.trigger
    }
}

/// The chain concludes A was `1` in region I, so the controlled-H must have
/// put B into `|+⟩`; B then meets `G(θ)` and is read out. The trigger row is
/// the (uncontested) quantum marginal `p(A=a*)` times that conditional.
pub fn classical_prediction(sign: Sign, theta: f64) -> ClassicalPrediction {
    let angle = GateAngle::new(theta);
    let plus = ComplexVector::from_real(&[1.0, 1.0]).normalized().unwrap();
    let out = g_matrix(angle).apply(&plus);
    let conditional_b = [out[0].norm_sqr(), out[1].norm_sqr()];

    let trigger = sign.trigger();
    let quantum = outcome_probabilities(&evolve_regions(&sign.params(), angle).region_iii).unwrap();
    let marginal = quantum.marginal(Qubit::A, trigger);
    let mut table = quantum;
    table.set(trigger, 0, marginal * conditional_b[0]);
    table.set(trigger, 1, marginal * conditional_b[1]);
    ClassicalPrediction { sign, theta, trigger, table, conditional_b }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub theta: f64,
    pub quantum: OutcomeTable,
    pub classical: ClassicalPrediction,
    /// Largest absolute difference over the trigger row.
    pub divergence: f64,
}

pub fn compare_at(sign: Sign, theta: f64) -> Comparison {
    let quantum = outcome_probabilities(&evolve_regions(&sign.params(), GateAngle::new(theta)).region_iii).unwrap();
    let classical = classical_prediction(sign, theta);
    let a = classical.trigger;
    let divergence = (0..2)
        .map(|b| (quantum.get(a, b) - classical.table.get(a, b)).abs())
        .fold(0.0, f64::max);
    Comparison { theta, quantum, classical, divergence }
}

pub fn compare_predictions(sign: Sign, grid: &[f64]) -> Result<Vec<Comparison>> {
    if grid.is_empty() {
        return Err(CircuitError::EmptyGrid.into());
    }
    Ok(grid.iter().map(|&t| compare_at(sign, t)).collect())
}

/// Signed gap `p_QM(a*, 1) − p_CL(a*, 1)`; its zeros are where the curves meet.
fn signed_gap(sign: Sign, theta: f64) -> f64 {
    let c = compare_at(sign, theta);
    c.quantum.get(c.classical.trigger, 1) - c.classical.table.get(c.classical.trigger, 1)
}

/// Angles in `[lo, hi]` where the quantum and classical trigger rows agree.
/// Brackets sign changes on an `n`-point grid, then bisects.
pub fn find_crossings(sign: Sign, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let grid = crate::circuit::linspace(lo, hi, n.max(2));
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (signed_gap(sign, a), signed_gap(sign, b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = signed_gap(sign, m);
            if fm == 0.0 || (b - a) < 1e-15 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if let Some(&last) = grid.last() {
        if signed_gap(sign, last) == 0.0 {
            roots.push(last);
        }
    }
    roots
}

/// Optimal single-shot success probability for telling two pure states apart
/// with equal priors: `½(1 + √(1 − |⟨a|b⟩|²))`.
pub fn helstrom_bound(psi_a: &ComplexVector, psi_b: &ComplexVector) -> Result<f64> {
    for v in [psi_a, psi_b] {
        let n = v.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(LogicError::NotNormalized(n));
        }
    }
    let overlap = psi_a.inner(psi_b).norm_sqr().min(1.0);
    Ok(0.5 * (1.0 + (1.0 - overlap).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminationReport {
    pub theta: f64,
    /// `P(B=0)` under `U₊` and `U₋`.
    pub p_b0_plus: f64,
    pub p_b0_minus: f64,
    pub p_a1_given_b0_plus: f64,
    pub p_a0_given_b0_minus: f64,
    /// Success of "A=1 ⇒ U₊, A=0 ⇒ U₋" given B = 0, equal priors.
    pub rule_success: f64,
    /// What the chained deduction claims the rule achieves.
    pub naive_claim: f64,
    pub helstrom: f64,
    pub within_helstrom: bool,
}

pub fn discrimination_analysis(theta: f64) -> DiscriminationReport {
    let angle = GateAngle::new(theta);
    let plus = outcome_probabilities(&evolve_regions(&UnitaryParams::u_plus(), angle).region_iii).unwrap();
    let minus = outcome_probabilities(&evolve_regions(&UnitaryParams::u_minus(), angle).region_iii).unwrap();

    let p_b0_plus = plus.marginal(Qubit::B, 0);
    let p_b0_minus = minus.marginal(Qubit::B, 0);
    let cond = |num: f64, den: f64| if den > IMPOSSIBLE_PROB { num / den } else { 0.0 };
    let p_a1_given_b0_plus = cond(plus.p10, p_b0_plus);
    let p_a0_given_b0_minus = cond(minus.p00, p_b0_minus);

    // P(correct | B = 0) with P(U±) = ½.
    let p_b0 = 0.5 * (p_b0_plus + p_b0_minus);
    let rule_success = cond(0.5 * plus.p10 + 0.5 * minus.p00, p_b0);

    let helstrom = helstrom_bound(
        &UnitaryParams::u_plus().prepared_state(),
        &UnitaryParams::u_minus().prepared_state(),
    )
    .expect("U± states are normalized");
    DiscriminationReport {
        theta,
        p_b0_plus,
        p_b0_minus,
        p_a1_given_b0_plus,
        p_a0_given_b0_minus,
        rule_success,
        naive_claim: 1.0,
        helstrom,
        within_helstrom: rule_success <= helstrom,
    }
}
