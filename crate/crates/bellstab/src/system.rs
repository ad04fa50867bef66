//! Physical model of the stabilization protocol: system parameters, the
//! time-dependent drive Hamiltonian and the five dissipation channels.
//!
//! Everything is expressed in the rotating frame in which the protocol's six
//! CW tones reduce to four Hamiltonian terms
//!
//! ```text
//! H(t) = (χ_A σz^A/2 + χ_B σz^B/2) a†a
//!      + 2 ε_c cos((χ_A+χ_B)/2 · t) (a + a†)
//!      + Ω⁰ (σx^A + σx^B)
//!      + Ωⁿ̄ (e^{-i n̄ (χ_A+χ_B)/2 · t} (σ+^A - σ+^B) + h.c.)
//! ```
//!
//! All frequencies are angular rates in rad/µs and all times in µs (ħ = 1).
//! Configuration files speak ordinary MHz; the loader multiplies by 2π.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::operators::{annihilation, lift, number, pauli, Operator, Pauli, Slot, SpaceLayout};
use crate::{Error, Result};

/// All physical rates and drive amplitudes of the protocol.
///
/// `t1_*` / `t2_*` may be `f64::INFINITY` to switch qubit decoherence off
/// (the corresponding channel rates become zero).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Dispersive shift of qubit A, rad/µs.
    pub chi_a: f64,
    /// Dispersive shift of qubit B, rad/µs.
    pub chi_b: f64,
    /// Cavity linewidth κ, rad/µs.
    pub kappa: f64,
    /// Relaxation times, µs.
    pub t1_a: f64,
    pub t1_b: f64,
    /// Coherence times, µs. Physicality requires T2 ≤ 2 T1.
    pub t2_a: f64,
    pub t2_b: f64,
    /// Target mean photon number of the cavity pointer states.
    pub nbar: f64,
    /// Rabi amplitude of the Bell-selection drives, rad/µs.
    pub omega0: f64,
    /// Rabi amplitude of the repump drives, rad/µs.
    pub omega_nbar: f64,
    /// Cavity drive amplitude, rad/µs. Conventionally (κ/2)√n̄.
    pub epsilon_c: f64,
    /// Fock-space truncation.
    pub n_cav: usize,
}

impl Default for SystemParams {
    /// The reference operating point: χ_A/2π = 10 MHz, χ_B/2π = 9.5 MHz,
    /// κ/2π = 2 MHz, T1 = T2 = 50 µs, n̄ = 4, Ω⁰ = κ/2, Ωⁿ̄ = κ,
    /// ε_c = (κ/2)√n̄, N_cav = 16.
    fn default() -> Self {
        let kappa = TAU * 2.0;
        let nbar = 4.0;
        Self {
            chi_a: TAU * 10.0,
            chi_b: TAU * 9.5,
            kappa,
            t1_a: 50.0,
            t1_b: 50.0,
            t2_a: 50.0,
            t2_b: 50.0,
            nbar,
            omega0: kappa / 2.0,
            omega_nbar: kappa,
            epsilon_c: epsilon_c_default(kappa, nbar).expect("nbar ≥ 0"),
            n_cav: 16,
        }
    }
}

/// Smallest truncation that covers the coherent-state tail: ⌈n̄ + 5√n̄⌉.
pub fn min_n_cav(nbar: f64) -> usize {
    ((nbar + 5.0 * nbar.sqrt()).ceil() as usize).max(2)
}

/// Default truncation: tail coverage plus two guard levels (16 for n̄ = 4).
pub fn default_n_cav(nbar: f64) -> usize {
    min_n_cav(nbar) + 2
}

impl SystemParams {
    /// Full validation, including coherent-tail coverage of the truncation.
    pub fn validate(&self) -> Result<()> {
        self.validate_dynamics()?;
        let floor = min_n_cav(self.nbar);
        if self.n_cav < floor {
            return Err(Error::InvalidParameter(format!(
                "N_cav = {} does not cover the coherent-state tail for n̄ = {} \
                 (need at least ⌈n̄ + 5√n̄⌉ = {floor})",
                self.n_cav, self.nbar
            )));
        }
        Ok(())
    }

    /// Physicality checks only, with the loose truncation floor N_cav ≥ ⌈n̄⌉+2.
    ///
    /// This is what simulation entry points enforce; it admits the deliberately
    /// under-truncated runs of the convergence study.
    pub fn validate_dynamics(&self) -> Result<()> {
        let positive_rate = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
            Ok(())
        };
        positive_rate("chi_a", self.chi_a)?;
        positive_rate("chi_b", self.chi_b)?;
        positive_rate("kappa", self.kappa)?;
        for (name, t) in [
            ("t1_a", self.t1_a),
            ("t1_b", self.t1_b),
            ("t2_a", self.t2_a),
            ("t2_b", self.t2_b),
        ] {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {t}"
                )));
            }
        }
        if self.t2_a > 2.0 * self.t1_a {
            return Err(Error::InvalidParameter(format!(
                "t2_a = {} violates T2 ≤ 2·T1 (t1_a = {})",
                self.t2_a, self.t1_a
            )));
        }
        if self.t2_b > 2.0 * self.t1_b {
            return Err(Error::InvalidParameter(format!(
                "t2_b = {} violates T2 ≤ 2·T1 (t1_b = {})",
                self.t2_b, self.t1_b
            )));
        }
        let nonnegative = |name: &str, v: f64| -> Result<()> {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
            Ok(())
        };
        nonnegative("nbar", self.nbar)?;
        nonnegative("omega0", self.omega0)?;
        nonnegative("omega_nbar", self.omega_nbar)?;
        nonnegative("epsilon_c", self.epsilon_c)?;
        if self.n_cav < 2 {
            return Err(Error::InvalidParameter(format!(
                "N_cav = {} must be at least 2",
                self.n_cav
            )));
        }
        let floor = (self.nbar.ceil() as usize) + 2;
        if self.n_cav < floor {
            return Err(Error::InvalidParameter(format!(
                "N_cav = {} cannot hold a coherent state with n̄ = {} (need ≥ {floor})",
                self.n_cav, self.nbar
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::new(self.n_cav)
    }

    /// (χ_A + χ_B)/2, the rotation frequency of the cavity drive frame.
    pub fn half_chi_sum(&self) -> f64 {
        (self.chi_a + self.chi_b) / 2.0
    }

    /// Conventional cavity drive amplitude (κ/2)√n̄ for these parameters.
    pub fn epsilon_c_default(&self) -> Result<f64> {
        epsilon_c_default(self.kappa, self.nbar)
    }

    /// Dimensionless figure of merit of the drive-induced dephasing condition:
    /// r = |χ_A − χ_B| · κ √n̄ / (χ_A χ_B). The protocol regime requires r ≪ 1.
    pub fn validity_ratio(&self) -> Result<f64> {
        let denom = self.chi_a * self.chi_b;
        if denom == 0.0 {
            return Err(Error::InvalidParameter(
                "validity ratio undefined for chi_a·chi_b = 0".into(),
            ));
        }
        Ok((self.chi_a - self.chi_b).abs() * self.kappa * self.nbar.sqrt() / denom)
    }
}

/// Drive amplitude ε_c = (κ/2)√n̄ that targets mean photon number n̄.
pub fn epsilon_c_default(kappa: f64, nbar: f64) -> Result<f64> {
    if nbar < 0.0 {
        return Err(Error::InvalidParameter(format!("nbar must be ≥ 0, got {nbar}")));
    }
    Ok(kappa / 2.0 * nbar.sqrt())
}

/// Result of the dispersive reduction χ = 2g²/Δ.
#[derive(Clone, Copy, Debug)]
pub struct DispersiveShift {
    /// χ, rad/µs; its sign follows the sign of Δ.
    pub chi: f64,
    /// |g/Δ|, the small parameter of the dispersive approximation.
    pub g_over_delta: f64,
}

impl DispersiveShift {
    /// The approximation degrades noticeably beyond |g/Δ| = 0.1.
    pub fn regime_degraded(&self) -> bool {
        self.g_over_delta > 0.1
    }
}

/// Dispersive coupling strength χ = 2g²/Δ from the coupling g and detuning Δ.
pub fn dispersive_shift(g: f64, delta: f64) -> Result<DispersiveShift> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter(
            "dispersive shift undefined at zero detuning".into(),
        ));
    }
    Ok(DispersiveShift { chi: 2.0 * g * g / delta, g_over_delta: (g / delta).abs() })
}

/// Pure dephasing rate 1/T_φ = 1/T2 − 1/(2 T1).
pub fn pure_dephasing_rate(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "T1 = {t1}, T2 = {t2} must be strictly positive"
        )));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::InvalidParameter(format!(
            "T2 = {t2} > 2·T1 = {} implies a negative pure dephasing rate",
            2.0 * t1
        )));
    }
    let rate = 1.0 / t2 - 1.0 / (2.0 * t1);
    // Guard against -0.0 / rounding at the T2 = 2T1 boundary.
    Ok(rate.max(0.0))
}

/// One Lindblad channel: a rate and a jump operator lifted to the full space.
#[derive(Clone, Debug)]
pub struct CollapseChannel {
    /// γ in 1/µs; may be zero (channel kept for structural fidelity).
    pub rate: f64,
    pub operator: Operator,
    pub label: &'static str,
}

/// The five dissipation channels: κ D[a], (1/T1ʲ) D[σ-ʲ] and (1/2T_φʲ) D[σzʲ]
/// for j = A, B, all lifted to the full space.
pub fn collapse_channels(params: &SystemParams) -> Result<Vec<CollapseChannel>> {
    let layout = params.layout()?;
    let a = lift(&annihilation(params.n_cav)?, Slot::Cavity, layout)?;
    let sm_a = lift(&pauli(Pauli::Minus), Slot::QubitA, layout)?;
    let sm_b = lift(&pauli(Pauli::Minus), Slot::QubitB, layout)?;
    let sz_a = lift(&pauli(Pauli::Z), Slot::QubitA, layout)?;
    let sz_b = lift(&pauli(Pauli::Z), Slot::QubitB, layout)?;

    let inv = |t: f64| if t.is_finite() { 1.0 / t } else { 0.0 };
    Ok(vec![
        CollapseChannel { rate: params.kappa, operator: a, label: "cavity_loss" },
        CollapseChannel { rate: inv(params.t1_a), operator: sm_a, label: "relaxation_a" },
        CollapseChannel { rate: inv(params.t1_b), operator: sm_b, label: "relaxation_b" },
        CollapseChannel {
            rate: pure_dephasing_rate(params.t1_a, params.t2_a)? / 2.0,
            operator: sz_a,
            label: "dephasing_a",
        },
        CollapseChannel {
            rate: pure_dephasing_rate(params.t1_b, params.t2_b)? / 2.0,
            operator: sz_b,
            label: "dephasing_b",
        },
    ])
}

/// Scalar time dependence of one Hamiltonian block.
#[derive(Clone, Copy, Debug)]
pub enum Coefficient {
    Constant(f64),
    /// amplitude · cos(frequency · t)
    Cosine { amplitude: f64, frequency: f64 },
    /// amplitude · e^{-i · frequency · t}; negate the frequency for the h.c.
    Phasor { amplitude: f64, frequency: f64 },
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> C64 {
        match *self {
            Self::Constant(c) => C64::new(c, 0.0),
            Self::Cosine { amplitude, frequency } => {
                C64::new(amplitude * (frequency * t).cos(), 0.0)
            }
            Self::Phasor { amplitude, frequency } => C64::from_polar(amplitude, -frequency * t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Constant(c) => c == 0.0,
            Self::Cosine { amplitude, .. } | Self::Phasor { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// One block of H(t): a time-independent sparse operator with a scalar
/// time-dependent coefficient.
#[derive(Clone, Debug)]
pub struct HamiltonianTerm {
    pub coefficient: Coefficient,
    pub operator: Operator,
}

/// H(t) = Σ_k c_k(t) B_k with the operator blocks precomputed once.
///
/// Immutable after construction; evaluation is a pure function of `t` and is
/// safe to call concurrently.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    dim: usize,
    terms: Vec<HamiltonianTerm>,
}

impl TimeDependentHamiltonian {
    pub fn new(dim: usize, terms: Vec<HamiltonianTerm>) -> Result<Self> {
        for term in &terms {
            if term.operator.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Hamiltonian term dim {} does not match {}",
                    term.operator.dim(),
                    dim
                )));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    /// Materialize H(t) at one instant.
    pub fn evaluate(&self, t: f64) -> Operator {
        let mut total = Operator::sparse(self.dim, Vec::new()).expect("empty is valid");
        for term in &self.terms {
            let c = term.coefficient.eval(t);
            if c != C64::new(0.0, 0.0) {
                total = total.add(&term.operator.scale(c)).expect("dims checked");
            }
        }
        total
    }
}

/// Assemble the four-block drive Hamiltonian for the given parameters.
///
/// The relative phase of the two repump drives is fixed to the minus sign in
/// (σ+^A − σ+^B); no phase knob is exposed.
pub fn build_hamiltonian(params: &SystemParams) -> Result<TimeDependentHamiltonian> {
    let layout = params.layout()?;
    let half_sum = params.half_chi_sum();

    let sz_a = lift(&pauli(Pauli::Z), Slot::QubitA, layout)?;
    let sz_b = lift(&pauli(Pauli::Z), Slot::QubitB, layout)?;
    let n_op = lift(&number(params.n_cav)?, Slot::Cavity, layout)?;
    let dispersive = sz_a
        .scale(C64::new(params.chi_a / 2.0, 0.0))
        .add(&sz_b.scale(C64::new(params.chi_b / 2.0, 0.0)))?
        .matmul(&n_op)?;

    let a = lift(&annihilation(params.n_cav)?, Slot::Cavity, layout)?;
    let quadrature = a.add(&a.dagger())?;

    let sx = lift(&pauli(Pauli::X), Slot::QubitA, layout)?
        .add(&lift(&pauli(Pauli::X), Slot::QubitB, layout)?)?;

    let pump_raise = lift(&pauli(Pauli::Plus), Slot::QubitA, layout)?
        .sub(&lift(&pauli(Pauli::Plus), Slot::QubitB, layout)?)?;
    let pump_lower = pump_raise.dagger();

    TimeDependentHamiltonian::new(
        layout.dim(),
        vec![
            HamiltonianTerm { coefficient: Coefficient::Constant(1.0), operator: dispersive },
            HamiltonianTerm {
                coefficient: Coefficient::Cosine {
                    amplitude: 2.0 * params.epsilon_c,
                    frequency: half_sum,
                },
                operator: quadrature,
            },
            HamiltonianTerm {
                coefficient: Coefficient::Constant(params.omega0),
                operator: sx,
            },
            HamiltonianTerm {
                coefficient: Coefficient::Phasor {
                    amplitude: params.omega_nbar,
                    frequency: params.nbar * half_sum,
                },
                operator: pump_raise,
            },
            HamiltonianTerm {
                coefficient: Coefficient::Phasor {
                    amplitude: params.omega_nbar,
                    frequency: -params.nbar * half_sum,
                },
                operator: pump_lower,
            },
        ],
    )
}

/// H(t) materialized at time `t` (µs).
pub fn hamiltonian_at(params: &SystemParams, t: f64) -> Result<Operator> {
    Ok(build_hamiltonian(params)?.evaluate(t))
}
