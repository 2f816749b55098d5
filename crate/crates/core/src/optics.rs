//! Jones-calculus model of the photonic setup.
//!
//! Polarization encodes the qubits, `|0⟩ = H` and `|1⟩ = V`. Photon pairs come
//! from a Sagnac source. Photon B passes a Mach-Zehnder built from a
//! polarizing splitter and a 50:50 splitter; keeping one output port
//! post-selects the region-I state. Removable wave plates then give regions
//! II and III.
//!
//! Conventions: `HWP(φ) = [[cos2φ, sin2φ], [sin2φ, −cos2φ]]` with the global
//! phase dropped, `QWP(φ) = R(φ) diag(1, i) R(−φ)`, and a symmetric beam
//! splitter (`t = 1/√2`, `r = i/√2`). The kept port is fixed and its phase is
//! absorbed by [`phase_calibrate`].

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, PI};

use thiserror::Error;

use crate::circuit::{self, GateAngle, Sign, Snapshot};
use crate::qcore::{c64, real, tensor, C64, ComplexMatrix, ComplexVector};

/// Default photon wavelength in nm.
pub const WAVELENGTH_NM: f64 = 810.0;
pub const HWP_HAD_ANGLE: f64 = FRAC_PI_8;
pub const HWP_INT_ANGLE: f64 = 3.0 * FRAC_PI_8;
pub const DESTRUCTIVE_PROB: f64 = 1e-12;
pub const EQUIVALENCE_TOL: f64 = 1e-9;

const COARSE_STEPS: usize = 720;
const GOLDEN_ITERS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("fully destructive post-selection (success probability {0:.3e})")]
    FullyDestructive(f64),
    #[error("input state not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("expected a two-photon state of dimension 4, got {0}")]
    WrongDimension(usize),
    #[error("wavelength must be positive, got {0}")]
    BadWavelength(f64),
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// A 2×2 operator on `(H, V)` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct JonesMatrix(ComplexMatrix);

impl JonesMatrix {
    pub fn new(m: [[C64; 2]; 2]) -> Self {
        Self(ComplexMatrix::from_rows(&[&m[0], &m[1]]).expect("2x2"))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    /// Applies `self` after `first`.
    pub fn after(&self, first: &JonesMatrix) -> JonesMatrix {
        JonesMatrix(&self.0 * &first.0)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.0.is_unitary(tol)
    }

    /// Acting on photon A of a two-photon state.
    pub fn on_a(&self) -> ComplexMatrix {
        tensor(&self.0, &ComplexMatrix::identity(2))
    }

    pub fn on_b(&self) -> ComplexMatrix {
        tensor(&ComplexMatrix::identity(2), &self.0)
    }
}

fn rotation(phi: f64) -> ComplexMatrix {
    let (s, c) = phi.sin_cos();
    ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]]).unwrap()
}

/// Half-wave plate with fast axis at `angle` from horizontal.
pub fn hwp(angle: f64) -> JonesMatrix {
    let (s, c) = (2.0 * angle).sin_cos();
    JonesMatrix::new([[real(c), real(s)], [real(s), real(-c)]])
}

pub fn qwp(angle: f64) -> JonesMatrix {
    let d = ComplexMatrix::from_rows(&[&[real(1.0), C64::default()], &[C64::default(), c64(0.0, 1.0)]]).unwrap();
    JonesMatrix(&(&rotation(angle) * &d) * &rotation(-angle))
}

/// Plate angle realizing `G(θ)`: matching `2φ` to the gate's `θ/2`.
pub fn g_plate_angle(theta: f64) -> f64 {
    theta / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    /// Pump polarization angle ϑ.
    pub vartheta: f64,
    pub phi: f64,
}

impl SourceConfig {
    /// ϑ is twice the pump half-wave plate angle.
    pub fn from_plate_angle(plate: f64, phi: f64) -> Self {
        Self { vartheta: 2.0 * plate, phi }
    }

    /// The amplitude split `cos ϑ = √(1/3)` used for the U± branches.
    pub fn standard() -> Self {
        Self { vartheta: (1.0f64 / 3.0).sqrt().acos(), phi: 0.0 }
    }
}

/// `cos ϑ |H_A V_B⟩ + e^{iφ} sin ϑ |V_A H_B⟩`; with `swap_b` a half-wave
/// plate exchanges H and V on photon B.
pub fn sagnac_source(cfg: SourceConfig, swap_b: bool) -> ComplexVector {
    let (s, c) = cfg.vartheta.sin_cos();
    let phase = C64::from_polar(1.0, cfg.phi);
    let mut amps = vec![C64::default(); 4];
    let (hv, vh) = if swap_b { (0, 3) } else { (1, 2) };
    amps[hv] = real(c);
    amps[vh] = phase * s;
    ComplexVector::new(amps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig {
    pub delta_l: f64,
    pub lambda: f64,
    pub hwp_int_angle: f64,
}

impl InterferometerConfig {
    pub fn new(delta_l: f64, lambda: f64, hwp_int_angle: f64) -> Result<Self> {
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(OpticsError::BadWavelength(lambda));
        }
        Ok(Self { delta_l, lambda, hwp_int_angle })
    }

    pub fn with_delta_l(delta_l: f64) -> Self {
        Self { delta_l, lambda: WAVELENGTH_NM, hwp_int_angle: HWP_INT_ANGLE }
    }

    /// `π Δl / λ`, the phase picked up on the V path.
    pub fn phase(&self) -> f64 {
        PI * self.delta_l / self.lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostselectedState {
    pub state: ComplexVector,
    pub success_probability: f64,
    /// Probability of the photon leaving through the discarded port.
    pub discarded_probability: f64,
}

impl PostselectedState {
    /// `success · ‖state‖² + discarded`, which should be 1.
    pub fn total_probability(&self) -> f64 {
        self.success_probability * self.state.norm_sqr() + self.discarded_probability
    }
}

/// Photon B through the Mach-Zehnder, keeping the `(h + i·v)/√2` port.
pub fn mach_zehnder_b(cfg: &InterferometerConfig, input: &ComplexVector) -> Result<PostselectedState> {
    if input.dim() != 4 {
        return Err(OpticsError::WrongDimension(input.dim()));
    }
    let n = input.norm_sqr();
    if (n - 1.0).abs() > circuit::NORM_TOL {
        return Err(OpticsError::NotNormalized(n));
    }
    if cfg.lambda.is_nan() || cfg.lambda <= 0.0 {
        return Err(OpticsError::BadWavelength(cfg.lambda));
    }

    // The polarizing splitter routes B=H and B=V to separate arms.
    let mut h_arm = input.clone();
    let mut v_arm = input.clone();
    for a in 0..2 {
        h_arm[2 * a + 1] = C64::default();
        v_arm[2 * a] = C64::default();
    }
    let v_arm = hwp(cfg.hwp_int_angle).on_b().apply(&v_arm).scale(C64::from_polar(1.0, cfg.phase()));

    let t = real(FRAC_1_SQRT_2);
    let r = c64(0.0, FRAC_1_SQRT_2);
    let kept = &h_arm.scale(t) + &v_arm.scale(r);
    let lost = &h_arm.scale(r) + &v_arm.scale(t);

    let success = kept.norm_sqr();
    if success < DESTRUCTIVE_PROB {
        return Err(OpticsError::FullyDestructive(success));
    }
    Ok(PostselectedState {
        state: kept.scale(real(1.0 / success.sqrt())),
        success_probability: success,
        discarded_probability: lost.norm_sqr(),
    })
}

/// Plate angles of the assembled setup; overriding them gives negative controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupAngles {
    pub hwp_had: f64,
    pub hwp_int: f64,
    /// `None` uses [`g_plate_angle`] of the requested θ.
    pub hwp_g: Option<f64>,
}

impl Default for SetupAngles {
    fn default() -> Self {
        Self { hwp_had: HWP_HAD_ANGLE, hwp_int: HWP_INT_ANGLE, hwp_g: None }
    }
}

/// Source → Mach-Zehnder (phase calibrated for `sign`) → optional Hadamard
/// plate on A → optional G plate on B.
pub fn assemble_setup(sign: Sign, insert_h: bool, insert_g: bool, theta: f64) -> Result<PostselectedState> {
    assemble_setup_with(sign, insert_h, insert_g, theta, SetupAngles::default())
}

pub fn assemble_setup_with(
    sign: Sign,
    insert_h: bool,
    insert_g: bool,
    theta: f64,
    angles: SetupAngles,
) -> Result<PostselectedState> {
    let delta_l = phase_calibrate(sign).delta_l;
    let cfg = InterferometerConfig { delta_l, lambda: WAVELENGTH_NM, hwp_int_angle: angles.hwp_int };
    let mut out = mach_zehnder_b(&cfg, &sagnac_source(SourceConfig::standard(), true))?;
    if insert_h {
        out.state = hwp(angles.hwp_had).on_a().apply(&out.state);
    }
    if insert_g {
        let angle = angles.hwp_g.unwrap_or_else(|| g_plate_angle(theta));
        out.state = hwp(angle).on_b().apply(&out.state);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub delta_l: f64,
    pub fidelity: f64,
}

fn region_i_fidelity(sign: Sign, delta_l: f64, target: &ComplexVector) -> f64 {
    let cfg = InterferometerConfig::with_delta_l(delta_l);
    match mach_zehnder_b(&cfg, &sagnac_source(SourceConfig::standard(), true)) {
        Ok(out) => out.state.overlap_sqr(target),
        Err(_) => {
            log::debug!("destructive point at delta_l={delta_l} for {sign}");
            0.0
        }
    }
}

/// Path mismatch in `[0, 2λ)` whose region-I output best matches the `sign`
/// target. The phase `πΔl/λ` has period `2λ`, so that is the scanned range;
/// a coarse grid brackets the peak and golden-section search refines it.
pub fn phase_calibrate(sign: Sign) -> Calibration {
    let target = circuit::closed_form_regions(&sign.params(), GateAngle::new(0.0)).region_i;
    let period = 2.0 * WAVELENGTH_NM;
    let step = period / COARSE_STEPS as f64;
    let f = |dl: f64| region_i_fidelity(sign, dl, &target);

    let best = (0..COARSE_STEPS)
        .map(|k| k as f64 * step)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();

    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best - step, best + step);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let delta_l = (0.5 * (lo + hi)).rem_euclid(period);
    Calibration { delta_l, fidelity: f(delta_l) }
}

/// Overlap of one assembled configuration with its circuit snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCheck {
    pub region: Snapshot,
    pub overlap: f64,
    pub probability_total: f64,
    pub pass: bool,
}

/// Compares the three plate configurations with the circuit regions I–III.
pub fn check_equivalence(sign: Sign, theta: f64, angles: SetupAngles) -> Result<Vec<RegionCheck>> {
    let regions = circuit::evolve_regions(&sign.params(), GateAngle::new(theta));
    [(Snapshot::I, false, false), (Snapshot::II, true, false), (Snapshot::III, true, true)]
        .into_iter()
        .map(|(region, h, g)| {
            let out = assemble_setup_with(sign, h, g, theta, angles)?;
            let overlap = out.state.overlap_sqr(regions.get(region));
            Ok(RegionCheck {
                region,
                overlap,
                probability_total: out.total_probability(),
                pass: overlap >= 1.0 - EQUIVALENCE_TOL,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{g_matrix, hadamard_matrix};
    use crate::tomography::{
        exact_frequencies, mle_reconstruct_frequencies, setting_grid, uhlmann_fidelity, DensityMatrix, MleOptions,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn third() -> f64 {
        (1.0f64 / 3.0).sqrt()
    }

    #[test]
    fn plate_examples() {
        assert!(hwp(FRAC_PI_8).matrix().max_abs_diff(&hadamard_matrix()) <= 1e-12);
        let out = hwp(3.0 * FRAC_PI_8).matrix().apply(&ComplexVector::basis(2, 1));
        assert!(out.max_abs_diff(&ComplexVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])) <= 1e-12);
        assert!(hwp(0.0).matrix().max_abs_diff(&ComplexMatrix::diag(&[1.0, -1.0])) <= 1e-12);
    }

    #[test]
    fn qwp_squares_to_hwp() {
        for k in 0..16 {
            let a = k as f64 * 0.2;
            let q = qwp(a);
            assert!(q.is_unitary(1e-12));
            assert!(q.after(&q).matrix().max_abs_diff(hwp(a).matrix()) <= 1e-12);
        }
    }

    #[test]
    fn g_plate_realizes_gate() {
        for theta in [0.0, FRAC_PI_4, FRAC_PI_2, 2.0, PI] {
            let m = hwp(g_plate_angle(theta));
            assert!(m.matrix().max_abs_diff(&g_matrix(GateAngle::new(theta))) <= 1e-12, "theta={theta}");
        }
        // The θ/2 plate angle only agrees at θ = 0.
        assert!(hwp(FRAC_PI_4).matrix().max_abs_diff(&hadamard_matrix()) > 0.1);
    }

    #[test]
    fn source_examples() {
        let cfg = SourceConfig::from_plate_angle(27.37f64.to_radians(), 0.0);
        let psi = sagnac_source(cfg, true);
        let want = ComplexVector::from_real(&[third(), 0.0, 0.0, (2.0f64 / 3.0).sqrt()]);
        assert!(psi.max_abs_diff(&want) <= 2e-3);

        let hv = sagnac_source(SourceConfig { vartheta: 0.0, phi: 0.3 }, false);
        assert_eq!(hv, ComplexVector::basis(4, 1));

        let singlet = sagnac_source(SourceConfig { vartheta: FRAC_PI_4, phi: PI }, false);
        let want = ComplexVector::from_real(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]);
        assert!(singlet.max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn interferometer_examples() {
        let input = sagnac_source(SourceConfig::standard(), true);
        let r3 = third();

        // i·e^{iπΔl/λ} = 1 at Δl = 3λ/2.
        let plus = mach_zehnder_b(&InterferometerConfig::with_delta_l(1.5 * WAVELENGTH_NM), &input).unwrap();
        assert!(plus.state.max_abs_diff(&ComplexVector::from_real(&[r3, 0.0, r3, r3])) <= 1e-12);
        assert_abs_diff_eq!(plus.success_probability, 0.5, epsilon = 1e-12);

        let minus = mach_zehnder_b(&InterferometerConfig::with_delta_l(0.5 * WAVELENGTH_NM), &input).unwrap();
        assert!(minus.state.max_abs_diff(&ComplexVector::from_real(&[r3, 0.0, -r3, -r3])) <= 1e-12);

        let lone = mach_zehnder_b(&InterferometerConfig::with_delta_l(123.0), &ComplexVector::basis(4, 0)).unwrap();
        assert_abs_diff_eq!(lone.success_probability, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interferometer_errors() {
        // B diagonal, V arm rotated onto H, arms out of phase: nothing exits.
        let input = ComplexVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]);
        let cfg = InterferometerConfig::new(0.5 * WAVELENGTH_NM, WAVELENGTH_NM, FRAC_PI_4).unwrap();
        assert!(matches!(mach_zehnder_b(&cfg, &input), Err(OpticsError::FullyDestructive(_))));

        assert!(InterferometerConfig::new(0.0, 0.0, 0.0).is_err());
        let unnormalized = ComplexVector::from_real(&[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            mach_zehnder_b(&InterferometerConfig::with_delta_l(0.0), &unnormalized),
            Err(OpticsError::NotNormalized(_))
        ));
        assert!(matches!(
            mach_zehnder_b(&InterferometerConfig::with_delta_l(0.0), &ComplexVector::basis(2, 0)),
            Err(OpticsError::WrongDimension(2))
        ));
    }

    #[test]
    fn calibration() {
        let p = phase_calibrate(Sign::Plus);
        let m = phase_calibrate(Sign::Minus);
        assert!(p.fidelity >= 1.0 - 1e-9);
        assert!(m.fidelity >= 1.0 - 1e-9);
        assert_abs_diff_eq!(p.delta_l, 1.5 * WAVELENGTH_NM, epsilon = 1e-3);
        assert_abs_diff_eq!(m.delta_l, 0.5 * WAVELENGTH_NM, epsilon = 1e-3);

        // One wavelength of extra path flips the sign.
        let shifted = (p.delta_l + WAVELENGTH_NM).rem_euclid(2.0 * WAVELENGTH_NM);
        let target = circuit::closed_form_regions(&Sign::Minus.params(), GateAngle::new(0.0)).region_i;
        assert!(region_i_fidelity(Sign::Minus, shifted, &target) >= 1.0 - 1e-9);
        // Half a wavelength lands in between: 5/9.
        let half = p.delta_l + 0.5 * WAVELENGTH_NM;
        assert_abs_diff_eq!(region_i_fidelity(Sign::Minus, half, &target), 5.0 / 9.0, epsilon = 1e-6);
    }

    #[test]
    fn assembled_setup_matches_circuit() {
        for sign in [Sign::Plus, Sign::Minus] {
            for theta in [0.0, FRAC_PI_4, FRAC_PI_2] {
                for check in check_equivalence(sign, theta, SetupAngles::default()).unwrap() {
                    assert!(check.pass, "{sign} {theta} {:?}", check);
                    assert_abs_diff_eq!(check.probability_total, 1.0, epsilon = 1e-10);
                }
            }
        }
        let printed = circuit::printed::region_iii(Sign::Plus, GateAngle::new(FRAC_PI_2)).to_state();
        let out = assemble_setup(Sign::Plus, true, true, FRAC_PI_2).unwrap();
        assert!(out.state.overlap_sqr(&printed) >= 1.0 - 1e-9);
    }

    #[test]
    fn wrong_plate_fails_equivalence() {
        let angles = SetupAngles { hwp_had: FRAC_PI_4, ..SetupAngles::default() };
        let checks = check_equivalence(Sign::Plus, FRAC_PI_2, angles).unwrap();
        assert!(checks[0].pass);
        assert!(!checks[1].pass && !checks[2].pass);

        let angles = SetupAngles { hwp_g: Some(FRAC_PI_4), ..SetupAngles::default() };
        assert!(!check_equivalence(Sign::Plus, FRAC_PI_2, angles).unwrap()[2].pass);
    }

    #[test]
    fn tomography_of_optical_states() {
        for sign in [Sign::Plus, Sign::Minus] {
            let targets = circuit::closed_form_regions(&sign.params(), GateAngle::new(FRAC_PI_2));
            for (region, h, g) in [(Snapshot::I, false, false), (Snapshot::II, true, false), (Snapshot::III, true, true)] {
                let out = assemble_setup(sign, h, g, FRAC_PI_2).unwrap();
                let rho = DensityMatrix::from_pure(&out.state).unwrap();
                let res = mle_reconstruct_frequencies(&exact_frequencies(&rho, &setting_grid()), MleOptions::default())
                    .unwrap();
                let target = DensityMatrix::from_pure(targets.get(region)).unwrap();
                assert!(uhlmann_fidelity(&target, &res.rho).unwrap() >= 1.0 - 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn plates_are_unitary_involutions(a in -10.0..10.0f64) {
            let h = hwp(a);
            prop_assert!(h.is_unitary(1e-12));
            prop_assert!(h.after(&h).matrix().max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-12);
            prop_assert!(qwp(a).is_unitary(1e-12));
        }

        #[test]
        fn interferometer_conserves_probability(
            raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4),
            dl in 0.0..2000.0f64,
            angle in 0.0..PI,
        ) {
            let v = ComplexVector::new(raw.into_iter().map(|(re, im)| c64(re, im)).collect());
            prop_assume!(v.norm() > 1e-3);
            let v = v.normalized().unwrap();
            let cfg = InterferometerConfig::new(dl, WAVELENGTH_NM, angle).unwrap();
            if let Ok(out) = mach_zehnder_b(&cfg, &v) {
                prop_assert!((out.total_probability() - 1.0).abs() <= 1e-10);
                prop_assert!((out.state.norm_sqr() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
