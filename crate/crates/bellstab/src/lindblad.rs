//! Fixed-step RK4 integration of the Lindblad master equation
//!
//! ```text
//! dρ/dt = -i [H(t), ρ] + Σ_k γ_k (L_k ρ L_k† - ½ L_k†L_k ρ - ½ ρ L_k†L_k)
//! ```
//!
//! with trace, Hermiticity and positivity monitoring at recorded samples.
//!
//! The right-hand side is assembled from precomputed sparse operator blocks,
//! combined with scalar time-dependent coefficients at each call. Hermiticity
//! is enforced structurally: the commutator is built as -i(A - A†) with
//! A = H(t)ρ, and the assembled derivative is symmetrized, so ρ remains exactly
//! Hermitian under stepping and the recorded Hermiticity deviation measures
//! genuine bugs rather than float noise.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::observables::{BellObservables, ObservableRecord};
use crate::operators::{Operator, SparseOp, StateVector};
use crate::system::{
    build_hamiltonian, collapse_channels, Coefficient, CollapseChannel, SystemParams,
    TimeDependentHamiltonian,
};
use crate::{Error, Result, Snapshot};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Trace deviation below which a sample is accepted as-is.
pub const TRACE_TOL: f64 = 1e-8;
/// Trace deviation up to which the state is renormalized by division; beyond
/// this the run aborts (silent renormalization would mask integrator bugs).
pub const TRACE_RENORM_MAX: f64 = 1e-6;
/// Maximum tolerated |ρ - ρ†| element.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Most negative tolerated eigenvalue of ρ.
pub const MIN_EIGENVALUE_TOL: f64 = -1e-7;

/// Density matrix at a time point.
#[derive(Clone, Debug)]
pub struct DensityState {
    pub rho: Array2<C64>,
    /// Time, µs.
    pub t: f64,
}

impl DensityState {
    pub fn new(rho: Array2<C64>, t: f64) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}×{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(Self { rho, t })
    }

    pub fn from_pure(psi: &StateVector, t: f64) -> Self {
        Self { rho: psi.density(), t }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.diag().sum()
    }

    /// |tr ρ - 1|
    pub fn trace_deviation(&self) -> f64 {
        (self.trace() - ONE).norm()
    }

    /// max_ij |ρ_ij - conj(ρ_ji)|
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.rho[[i, j]] - self.rho[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of ρ (Hermitian eigensolve, O(d³): used only at
    /// recorded samples).
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| self.rho[[i, j]]);
        let eigenvalues = m.symmetric_eigenvalues();
        eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Fixed-step integration plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    /// Step size, µs. The default 0.0002 µs resolves the dispersive ladder
    /// (~N_cav·χ) with ω·dt ≈ 0.2 rad.
    pub dt: f64,
    /// End time, µs.
    pub t_final: f64,
    /// Sample stride in steps.
    pub record_every: usize,
    /// Check positivity (and abort on violation) at recorded samples.
    pub enforce_invariants: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { dt: 2e-4, t_final: 20.0, record_every: 500, enforce_invariants: true }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_final = {} must be at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

/// Reference implementation of the Lindblad right-hand side for a static H,
/// straight from the defining formula (dense arithmetic).
///
/// The production path is [`LindbladGenerator::rhs_into`]; the two are checked
/// against each other in the tests.
pub fn lindblad_rhs(
    h: &Operator,
    channels: &[CollapseChannel],
    rho: &Array2<C64>,
) -> Result<Array2<C64>> {
    let d = rho.nrows();
    if rho.ncols() != d || h.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "H dim {} vs state {}×{}",
            h.dim(),
            d,
            rho.ncols()
        )));
    }
    let h = h.to_dense();
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (h.dot(rho) - rho.dot(&h)).mapv(|v| v * minus_i);
    for channel in channels {
        if channel.operator.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "channel '{}' dim {} vs state dim {}",
                channel.label,
                channel.operator.dim(),
                d
            )));
        }
        if channel.rate == 0.0 {
            continue;
        }
        let l = channel.operator.to_dense();
        let l_dag = channel.operator.dagger().to_dense();
        let ldl = l_dag.dot(&l);
        let gamma = C64::new(channel.rate, 0.0);
        let half = C64::new(0.5, 0.0);
        let jump = l.dot(rho).dot(&l_dag);
        let anti = ldl.dot(rho).mapv(|v| v * half) + rho.dot(&ldl).mapv(|v| v * half);
        out = out + (jump - anti).mapv(|v| v * gamma);
    }
    Ok(out)
}

struct PreparedChannel {
    rate: f64,
    l: SparseOp,
    l_dag: SparseOp,
    /// L†L, precomputed.
    ldl: SparseOp,
}

/// The master-equation generator with all operator blocks frozen in sparse
/// form. Immutable after construction and shareable across threads.
pub struct LindbladGenerator {
    dim: usize,
    h_terms: Vec<(Coefficient, SparseOp)>,
    channels: Vec<PreparedChannel>,
}

impl LindbladGenerator {
    pub fn new(
        hamiltonian: &TimeDependentHamiltonian,
        channels: &[CollapseChannel],
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        let h_terms = hamiltonian
            .terms()
            .iter()
            .map(|term| (term.coefficient, term.operator.to_sparse_op()))
            .collect();
        let channels = channels
            .iter()
            .map(|channel| {
                if channel.operator.dim() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "channel '{}' dim {} vs Hamiltonian dim {}",
                        channel.label,
                        channel.operator.dim(),
                        dim
                    )));
                }
                if channel.rate < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "channel '{}' has negative rate {}",
                        channel.label, channel.rate
                    )));
                }
                let ldl = channel.operator.dagger().matmul(&channel.operator)?;
                Ok(PreparedChannel {
                    rate: channel.rate,
                    l: channel.operator.to_sparse_op(),
                    l_dag: channel.operator.dagger().to_sparse_op(),
                    ldl: ldl.to_sparse_op(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, h_terms, channels })
    }

    /// Generator for the Bell-stabilization system described by `params`.
    pub fn for_params(params: &SystemParams) -> Result<Self> {
        Self::new(&build_hamiltonian(params)?, &collapse_channels(params)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dρ/dt at time `t`, written into `out`.
    pub fn rhs_into(
        &self,
        t: f64,
        rho: &Array2<C64>,
        out: &mut Array2<C64>,
        buffers: &mut RhsBuffers,
    ) {
        let d = self.dim;
        // A = H(t)·ρ; since ρ = ρ†, the commutator is -i(A - A†).
        buffers.acc.fill(ZERO);
        for (coefficient, op) in &self.h_terms {
            let c = coefficient.eval(t);
            if c != ZERO {
                op.acc_left_mul(c, rho, &mut buffers.acc);
            }
        }
        {
            let a = buffers.acc.as_slice().expect("contiguous");
            let o = out.as_slice_mut().expect("contiguous");
            for i in 0..d {
                for j in 0..d {
                    let m = a[i * d + j] - a[j * d + i].conj();
                    o[i * d + j] = C64::new(m.im, -m.re); // -i · m
                }
            }
        }

        for channel in &self.channels {
            if channel.rate == 0.0 {
                continue;
            }
            // out += γ L ρ L†
            buffers.tmp.fill(ZERO);
            channel.l.acc_left_mul(C64::new(channel.rate, 0.0), rho, &mut buffers.tmp);
            channel.l_dag.acc_right_mul(ONE, &buffers.tmp, out);
            // out -= (γ/2)(M + M†) with M = L†L ρ
            buffers.acc.fill(ZERO);
            channel.ldl.acc_left_mul(C64::new(channel.rate / 2.0, 0.0), rho, &mut buffers.acc);
            let m = buffers.acc.as_slice().expect("contiguous");
            let o = out.as_slice_mut().expect("contiguous");
            for i in 0..d {
                for j in 0..d {
                    o[i * d + j] -= m[i * d + j] + m[j * d + i].conj();
                }
            }
        }

        hermitize(out);
    }

    /// Allocating convenience wrapper around [`Self::rhs_into`].
    pub fn rhs(&self, t: f64, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        let mut buffers = RhsBuffers::new(self.dim);
        self.rhs_into(t, rho, &mut out, &mut buffers);
        out
    }
}

/// Scratch matrices for one RHS evaluation.
pub struct RhsBuffers {
    acc: Array2<C64>,
    tmp: Array2<C64>,
}

impl RhsBuffers {
    pub fn new(dim: usize) -> Self {
        Self { acc: Array2::zeros((dim, dim)), tmp: Array2::zeros((dim, dim)) }
    }
}

/// Scratch state for RK4 stepping; allocate once per evolution.
pub struct StepWorkspace {
    k1: Array2<C64>,
    k2: Array2<C64>,
    k3: Array2<C64>,
    k4: Array2<C64>,
    stage: Array2<C64>,
    rhs: RhsBuffers,
}

impl StepWorkspace {
    pub fn new(dim: usize) -> Self {
        let z = || Array2::zeros((dim, dim));
        Self { k1: z(), k2: z(), k3: z(), k4: z(), stage: z(), rhs: RhsBuffers::new(dim) }
    }
}

/// out = base + c·k, elementwise.
fn set_axpy(out: &mut Array2<C64>, base: &Array2<C64>, c: f64, k: &Array2<C64>) {
    let o = out.as_slice_mut().expect("contiguous");
    let b = base.as_slice().expect("contiguous");
    let kk = k.as_slice().expect("contiguous");
    for idx in 0..o.len() {
        o[idx] = b[idx] + c * kk[idx];
    }
}

/// m ← (m + m†)/2; exact for already-Hermitian input.
fn hermitize(m: &mut Array2<C64>) {
    let d = m.nrows();
    let s = m.as_slice_mut().expect("contiguous");
    for i in 0..d {
        s[i * d + i] = C64::new(s[i * d + i].re, 0.0);
        for j in (i + 1)..d {
            let avg = 0.5 * (s[i * d + j] + s[j * d + i].conj());
            s[i * d + j] = avg;
            s[j * d + i] = avg.conj();
        }
    }
}

/// One classical RK4 update with H evaluated at the exact substage times
/// t, t+dt/2, t+dt. Advances `state.t` by `dt`.
pub fn rk4_step(
    generator: &LindbladGenerator,
    state: &mut DensityState,
    dt: f64,
    ws: &mut StepWorkspace,
) -> Result<()> {
    let t = state.t;
    let StepWorkspace { k1, k2, k3, k4, stage, rhs } = ws;

    generator.rhs_into(t, &state.rho, k1, rhs);
    set_axpy(stage, &state.rho, dt / 2.0, k1);
    generator.rhs_into(t + dt / 2.0, stage, k2, rhs);
    set_axpy(stage, &state.rho, dt / 2.0, k2);
    generator.rhs_into(t + dt / 2.0, stage, k3, rhs);
    set_axpy(stage, &state.rho, dt, k3);
    generator.rhs_into(t + dt, stage, k4, rhs);

    {
        let r = state.rho.as_slice_mut().expect("contiguous");
        let (k1, k2, k3, k4) = (
            k1.as_slice().expect("contiguous"),
            k2.as_slice().expect("contiguous"),
            k3.as_slice().expect("contiguous"),
            k4.as_slice().expect("contiguous"),
        );
        let w = dt / 6.0;
        for idx in 0..r.len() {
            r[idx] += w * (k1[idx] + 2.0 * (k2[idx] + k3[idx]) + k4[idx]);
        }
    }
    state.t = t + dt;

    let trace = state.trace();
    if !trace.re.is_finite() || !trace.im.is_finite() {
        return Err(Error::NumericalBlowup {
            t: state.t,
            detail: "non-finite trace after RK4 step (dt too large or rates too stiff?)".into(),
        });
    }
    Ok(())
}

/// Step from t = 0 to `cfg.t_final`, invoking `on_sample` every
/// `cfg.record_every` steps (including step 0). Returns the final state.
///
/// At each sample the trace policy is applied: deviations ≤ 1e-8 pass, in
/// (1e-8, 1e-6] the state is renormalized by division, beyond that the run
/// aborts carrying the last good sample. Hermiticity and (when
/// `enforce_invariants`) positivity violations abort likewise.
pub fn evolve_with<F>(
    generator: &LindbladGenerator,
    initial: DensityState,
    cfg: &EvolutionConfig,
    mut on_sample: F,
) -> Result<DensityState>
where
    F: FnMut(&DensityState) -> Result<()>,
{
    cfg.validate()?;
    if initial.dim() != generator.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state dim {} vs generator dim {}",
            initial.dim(),
            generator.dim()
        )));
    }

    let n_steps = cfg.n_steps();
    let mut state = initial;
    state.t = 0.0;
    let mut ws = StepWorkspace::new(generator.dim());
    let mut last_good: Option<DensityState> = None;

    for step in 0..=n_steps {
        state.t = step as f64 * cfg.dt;
        if step % cfg.record_every == 0 {
            inspect_sample(&state, cfg, &last_good)?;
            // the sample sees the raw state; renormalization happens after,
            // so diagnostics measure genuine integrator drift
            on_sample(&state)?;
            renormalize_in_band(&mut state);
            last_good = Some(state.clone());
        }
        if step == n_steps {
            break;
        }
        rk4_step(generator, &mut state, cfg.dt, &mut ws)?;
    }
    Ok(state)
}

fn inspect_sample(
    state: &DensityState,
    cfg: &EvolutionConfig,
    last_good: &Option<DensityState>,
) -> Result<()> {
    let snapshot = || last_good.as_ref().map(|s| Snapshot(Box::new(s.clone())));

    let herm = state.hermiticity_deviation();
    if herm >= HERMITICITY_TOL {
        return Err(Error::InvariantViolation {
            t: state.t,
            detail: format!("Hermiticity deviation {herm:.3e} ≥ {HERMITICITY_TOL:.0e}"),
            last_good: snapshot(),
        });
    }

    let trace_dev = state.trace_deviation();
    if trace_dev > TRACE_RENORM_MAX {
        return Err(Error::InvariantViolation {
            t: state.t,
            detail: format!("trace deviation {trace_dev:.3e} > {TRACE_RENORM_MAX:.0e}"),
            last_good: snapshot(),
        });
    }

    if cfg.enforce_invariants {
        let min_eig = state.min_eigenvalue();
        if min_eig <= MIN_EIGENVALUE_TOL {
            return Err(Error::InvariantViolation {
                t: state.t,
                detail: format!("min eigenvalue {min_eig:.3e} ≤ {MIN_EIGENVALUE_TOL:.0e}"),
                last_good: snapshot(),
            });
        }
    }
    Ok(())
}

/// Divide by the trace only inside the narrow band (1e-8, 1e-6]; smaller
/// deviations pass untouched and larger ones have already aborted.
fn renormalize_in_band(state: &mut DensityState) {
    let trace_dev = state.trace_deviation();
    if trace_dev > TRACE_TOL && trace_dev <= TRACE_RENORM_MAX {
        let tr = state.trace().re;
        state.rho.mapv_inplace(|v| v / tr);
    }
}

#[cfg(test)]
fn check_sample(
    state: &mut DensityState,
    cfg: &EvolutionConfig,
    last_good: &Option<DensityState>,
) -> Result<()> {
    inspect_sample(state, cfg, last_good)?;
    renormalize_in_band(state);
    Ok(())
}

/// Evolve the Bell system from `initial`, sampling the protocol observables.
pub fn evolve(
    params: &SystemParams,
    initial: &DensityState,
    cfg: &EvolutionConfig,
) -> Result<Vec<ObservableRecord>> {
    params.validate_dynamics()?;
    let generator = LindbladGenerator::for_params(params)?;
    let observables = BellObservables::new(params.n_cav)?;
    let mut records =
        Vec::with_capacity(cfg.n_steps() / cfg.record_every.max(1) + 2);
    evolve_with(&generator, initial.clone(), cfg, |state| {
        records.push(observables.record(state.t, &state.rho)?);
        Ok(())
    })?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{annihilation, pauli, Pauli};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn empty_hamiltonian(dim: usize) -> TimeDependentHamiltonian {
        TimeDependentHamiltonian::new(dim, Vec::new()).unwrap()
    }

    fn random_hermitian(dim: usize, seed: u64) -> Array2<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Array2::from_shape_fn((dim, dim), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let gdag = g.t().mapv(|v: C64| v.conj());
        g.dot(&gdag)
    }

    fn random_density(dim: usize, seed: u64) -> Array2<C64> {
        let mut rho = random_hermitian(dim, seed);
        let tr: C64 = rho.diag().sum();
        rho.mapv_inplace(|v| v / tr);
        rho
    }

    #[test]
    fn rhs_zero_without_generator_terms() {
        let rho = random_density(4, 7);
        let h = Operator::sparse(4, Vec::new()).unwrap();
        let out = lindblad_rhs(&h, &[], &rho).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rhs_is_traceless() {
        let params = SystemParams::default();
        let h = crate::system::hamiltonian_at(&params, 0.31).unwrap();
        let channels = collapse_channels(&params).unwrap();
        for seed in [1, 2, 3] {
            let rho = random_density(params.n_cav * 4, seed);
            let out = lindblad_rhs(&h, &channels, &rho).unwrap();
            let tr: C64 = out.diag().sum();
            assert!(tr.norm() < 1e-12, "trace(rhs) = {:.3e}", tr.norm());
        }
    }

    proptest::proptest! {
        /// The generator annihilates the trace for any Hermitian input.
        #[test]
        fn rhs_traceless_property(raw in proptest::collection::vec(-1.0f64..1.0, 128), t in 0.0f64..2.0) {
            let params = SystemParams { nbar: 0.0, n_cav: 2, ..SystemParams::default() };
            let h = crate::system::hamiltonian_at(&params, t).unwrap();
            let channels = collapse_channels(&params).unwrap();
            let d = 8;
            let mut g = Array2::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    g[[i, j]] = C64::new(raw[2 * (d * i + j)], raw[2 * (d * i + j) + 1]);
                }
            }
            let gdag = g.t().mapv(|v: C64| v.conj());
            let mut hermitian = g.dot(&gdag);
            let norm: C64 = hermitian.diag().sum();
            proptest::prop_assume!(norm.re > 1e-6);
            hermitian.mapv_inplace(|v| v / norm);
            let out = lindblad_rhs(&h, &channels, &hermitian).unwrap();
            let tr: C64 = out.diag().sum();
            proptest::prop_assert!(tr.norm() < 1e-12, "trace(rhs) = {:.3e}", tr.norm());
        }
    }

    #[test]
    fn amplitude_damping_rate() {
        // single channel (γ, σ-) on ρ = |e⟩⟨e|: dρ_ee/dt = -γ
        let gamma = 0.37;
        let channel =
            CollapseChannel { rate: gamma, operator: pauli(Pauli::Minus), label: "t1" };
        let e = StateVector::basis(2, 1).unwrap();
        let h = Operator::sparse(2, Vec::new()).unwrap();
        let out = lindblad_rhs(&h, &[channel], &e.density()).unwrap();
        assert_abs_diff_eq!(out[[1, 1]].re, -gamma, epsilon = 1e-14);
        assert_abs_diff_eq!(out[[0, 0]].re, gamma, epsilon = 1e-14);
    }

    #[test]
    fn sparse_rhs_matches_dense_reference() {
        // the production sparse path against the textbook dense formula
        let params = SystemParams { n_cav: 6, nbar: 2.0, ..SystemParams::default() };
        let generator = LindbladGenerator::for_params(&params).unwrap();
        let hamiltonian = build_hamiltonian(&params).unwrap();
        let channels = collapse_channels(&params).unwrap();
        for (seed, t) in [(11u64, 0.0), (12, 0.173), (13, 2.5)] {
            let rho = random_density(24, seed);
            let fast = generator.rhs(t, &rho);
            let reference = lindblad_rhs(&hamiltonian.evaluate(t), &channels, &rho).unwrap();
            let diff = fast
                .iter()
                .zip(reference.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-11, "sparse vs dense rhs differ by {diff:.3e} at t = {t}");
        }
    }

    #[test]
    fn rk4_identity_evolution() {
        let generator = LindbladGenerator::new(&empty_hamiltonian(4), &[]).unwrap();
        let rho0 = random_density(4, 21);
        let mut state = DensityState::new(rho0.clone(), 0.0).unwrap();
        let mut ws = StepWorkspace::new(4);
        rk4_step(&generator, &mut state, 0.1, &mut ws).unwrap();
        let diff = state
            .rho
            .iter()
            .zip(rho0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15);
        assert_abs_diff_eq!(state.t, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rk4_single_step_cavity_decay() {
        // κ decay of |1⟩⟨1|: ρ_11(dt) = e^{-κ dt} + O(dt⁵)
        let kappa = std::f64::consts::TAU * 2.0;
        let dt = 2e-4;
        let channel =
            CollapseChannel { rate: kappa, operator: annihilation(3).unwrap(), label: "cavity" };
        let generator = LindbladGenerator::new(&empty_hamiltonian(3), &[channel]).unwrap();
        let mut state =
            DensityState::from_pure(&StateVector::basis(3, 1).unwrap(), 0.0);
        let mut ws = StepWorkspace::new(3);
        rk4_step(&generator, &mut state, dt, &mut ws).unwrap();
        assert_abs_diff_eq!(state.rho[[1, 1]].re, (-kappa * dt).exp(), epsilon = 1e-14);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // Fixed-interval Richardson check on the driven system: halving dt
        // shrinks the error by ~2⁴.
        let params = SystemParams {
            nbar: 1.0,
            n_cav: 4,
            epsilon_c: epsilon_c(),
            ..SystemParams::default()
        };
        fn epsilon_c() -> f64 {
            crate::system::epsilon_c_default(std::f64::consts::TAU * 2.0, 1.0).unwrap()
        }
        let generator = LindbladGenerator::for_params(&params).unwrap();
        let rho0 = {
            let layout = params.layout().unwrap();
            let gg0 = StateVector::basis(layout.dim(), 0).unwrap();
            gg0.density()
        };
        let interval = 0.002;

        let run = |n: usize| -> Array2<C64> {
            let mut state = DensityState::new(rho0.clone(), 0.0).unwrap();
            let mut ws = StepWorkspace::new(generator.dim());
            for _ in 0..n {
                rk4_step(&generator, &mut state, interval / n as f64, &mut ws).unwrap();
            }
            state.rho
        };

        let reference = run(64);
        let err = |rho: &Array2<C64>| {
            rho.iter()
                .zip(reference.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err(&run(1));
        let e2 = err(&run(2));
        let ratio = e1 / e2;
        assert!(
            (10.0..26.0).contains(&ratio),
            "RK4 order check: error ratio {ratio:.2} not ≈ 16 (e1 = {e1:.3e}, e2 = {e2:.3e})"
        );
    }

    #[test]
    fn evolve_t1_decay() {
        // ρ_ee(t) = e^{-t/T1} for a single qubit with only the T1 channel
        let t1 = 2.0;
        let channel =
            CollapseChannel { rate: 1.0 / t1, operator: pauli(Pauli::Minus), label: "t1" };
        let generator = LindbladGenerator::new(&empty_hamiltonian(2), &[channel]).unwrap();
        let initial = DensityState::from_pure(&StateVector::basis(2, 1).unwrap(), 0.0);
        let cfg = EvolutionConfig {
            dt: 1e-3,
            t_final: t1,
            record_every: 500,
            enforce_invariants: true,
        };
        let last = evolve_with(&generator, initial, &cfg, |_| Ok(())).unwrap();
        let expected = (-1.0f64).exp();
        let rel = (last.rho[[1, 1]].re - expected).abs() / expected;
        assert!(rel < 1e-3, "T1 decay off by {rel:.2e} relative");
    }

    #[test]
    fn evolve_is_linear() {
        let params = SystemParams { nbar: 1.0, n_cav: 4, ..SystemParams::default() };
        let generator = LindbladGenerator::for_params(&params).unwrap();
        let dim = generator.dim();
        let cfg = EvolutionConfig {
            dt: 2e-4,
            t_final: 0.2,
            record_every: 100,
            enforce_invariants: false, // mixtures of random states need not be positive
        };
        let rho1 = random_density(dim, 5);
        let rho2 = random_density(dim, 6);
        let mixed = (&rho1 + &rho2).mapv(|v| v * c(0.5));

        let run = |rho: Array2<C64>| {
            evolve_with(&generator, DensityState::new(rho, 0.0).unwrap(), &cfg, |_| Ok(()))
                .unwrap()
                .rho
        };
        let evolved_mixture = run(mixed);
        let mixture_of_evolved = (&run(rho1) + &run(rho2)).mapv(|v| v * c(0.5));
        let diff = evolved_mixture
            .iter()
            .zip(mixture_of_evolved.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "evolution is not linear: diff = {diff:.3e}");
    }

    #[test]
    fn evolve_preserves_invariants_structurally() {
        let params = SystemParams { nbar: 1.0, n_cav: 4, ..SystemParams::default() };
        let generator = LindbladGenerator::for_params(&params).unwrap();
        let layout = params.layout().unwrap();
        let initial =
            DensityState::from_pure(&StateVector::basis(layout.dim(), 0).unwrap(), 0.0);
        let cfg = EvolutionConfig {
            dt: 2e-4,
            t_final: 0.5,
            record_every: 250,
            enforce_invariants: true,
        };
        let mut worst_trace = 0.0f64;
        let mut worst_herm = 0.0f64;
        let mut worst_eig = f64::INFINITY;
        evolve_with(&generator, initial, &cfg, |state| {
            worst_trace = worst_trace.max(state.trace_deviation());
            worst_herm = worst_herm.max(state.hermiticity_deviation());
            worst_eig = worst_eig.min(state.min_eigenvalue());
            Ok(())
        })
        .unwrap();
        assert!(worst_trace < 1e-8);
        assert!(worst_herm < 1e-10);
        assert!(worst_eig > -1e-7);
    }

    #[test]
    fn blowup_is_detected() {
        // absurd rate + large step → non-finite state → clean error
        let channel = CollapseChannel {
            rate: 1e30,
            operator: pauli(Pauli::Minus),
            label: "broken",
        };
        let generator = LindbladGenerator::new(&empty_hamiltonian(2), &[channel]).unwrap();
        let initial = DensityState::from_pure(&StateVector::basis(2, 1).unwrap(), 0.0);
        let cfg =
            EvolutionConfig { dt: 1.0, t_final: 10.0, record_every: 1, enforce_invariants: true };
        let err = evolve_with(&generator, initial, &cfg, |_| Ok(())).unwrap_err();
        assert!(matches!(
            err,
            Error::NumericalBlowup { .. } | Error::InvariantViolation { .. }
        ));
    }

    #[test]
    fn trace_renormalization_band() {
        let cfg = EvolutionConfig::default();
        // deviation inside (1e-8, 1e-6]: renormalized silently
        let mut rho = Array2::zeros((2, 2));
        rho[[0, 0]] = c(1.0 + 5e-7);
        let mut state = DensityState::new(rho, 0.0).unwrap();
        check_sample(&mut state, &cfg, &None).unwrap();
        assert!(state.trace_deviation() < 1e-12);

        // deviation beyond 1e-6: abort
        let mut rho = Array2::zeros((2, 2));
        rho[[0, 0]] = c(1.0 + 5e-5);
        let mut state = DensityState::new(rho, 0.0).unwrap();
        assert!(matches!(
            check_sample(&mut state, &cfg, &None),
            Err(Error::InvariantViolation { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_diagnostic() {
        let mut rho = Array2::zeros((2, 2));
        rho[[0, 0]] = c(0.5);
        rho[[1, 1]] = c(0.5);
        let state = DensityState::new(rho, 0.0).unwrap();
        assert_abs_diff_eq!(state.min_eigenvalue(), 0.5, epsilon = 1e-12);

        // |+⟩⟨-|-like Hermitian matrix with a negative eigenvalue
        let mut m = Array2::zeros((2, 2));
        m[[0, 1]] = c(0.6);
        m[[1, 0]] = c(0.6);
        m[[0, 0]] = c(0.5);
        m[[1, 1]] = c(0.5);
        let state = DensityState::new(m, 0.0).unwrap();
        assert_abs_diff_eq!(state.min_eigenvalue(), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn record_count_matches_stride() {
        let params = SystemParams { nbar: 1.0, n_cav: 4, ..SystemParams::default() };
        let cfg = EvolutionConfig {
            dt: 2e-4,
            t_final: 0.02,
            record_every: 20,
            enforce_invariants: true,
        };
        let layout = params.layout().unwrap();
        let initial =
            DensityState::from_pure(&StateVector::basis(layout.dim(), 0).unwrap(), 0.0);
        let records = evolve(&params, &initial, &cfg).unwrap();
        // floor(steps / record_every) + 1 = floor(100/20) + 1
        assert_eq!(records.len(), 6);
        assert!(records.windows(2).all(|w| w[0].t < w[1].t));
    }
}
