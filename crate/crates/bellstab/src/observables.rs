//! Figures of merit of the protocol: Bell fidelity, CHSH correlation and
//! diagnostic populations.
//!
//! CHSH is a fixed-operator expectation (no measurement-axis optimization), so
//! the reported values stay comparable across runs.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::operators::{
    lift, number, pauli, Operator, Pauli, Slot, SpaceLayout, SparseOp, StateVector,
};
use crate::{Error, Result};

pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Observables sampled at one time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    /// Time, µs.
    pub t: f64,
    /// Overlap with the target Bell state, in [0, 1].
    pub fidelity: f64,
    /// CHSH correlation, in [-2√2, 2√2].
    pub chsh: f64,
    /// Mean cavity photon number ⟨a†a⟩.
    pub photon_number: f64,
    /// Populations of the even computational states and the odd-parity manifold.
    pub p_gg: f64,
    pub p_ee: f64,
    pub p_odd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellSign {
    Plus,
    Minus,
}

/// The odd-parity Bell states |φ_±⟩ = (|ge⟩ ± |eg⟩)/√2 on the two-qubit space.
pub fn bell_state(sign: BellSign) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::new(0.0, 0.0); 4];
    amps[1] = C64::new(s, 0.0); // |ge⟩
    amps[2] = match sign {
        BellSign::Plus => C64::new(s, 0.0), // |eg⟩
        BellSign::Minus => C64::new(-s, 0.0),
    };
    StateVector::from_amplitudes(amps)
}

/// The fixed-axis CHSH operator on the two-qubit space,
///
/// ```text
/// O = σy^A (-σy^B - σx^B)/√2 + σx^A (-σy^B - σx^B)/√2
///   + σx^A ( σy^B - σx^B)/√2 - σy^A ( σy^B - σx^B)/√2
/// ```
///
/// which collects to -√2 (σx^A σx^B + σy^A σy^B).
pub fn chsh_operator() -> Operator {
    let sx = pauli(Pauli::X);
    let sy = pauli(Pauli::Y);
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let y_plus_x = sy.add(&sx).expect("2x2");
    let y_minus_x = sy.sub(&sx).expect("2x2");
    let t1 = sy.kron(&y_plus_x.scale(-s));
    let t2 = sx.kron(&y_plus_x.scale(-s));
    let t3 = sx.kron(&y_minus_x.scale(s));
    let t4 = sy.kron(&y_minus_x.scale(s)).scale(C64::new(-1.0, 0.0));
    t1.add(&t2)
        .and_then(|m| m.add(&t3))
        .and_then(|m| m.add(&t4))
        .expect("all terms are 4x4")
}

/// Precomputed full-space observables for the Bell system.
///
/// Pure functions over immutable state; safe to share across threads.
#[derive(Clone, Debug)]
pub struct BellObservables {
    layout: SpaceLayout,
    fidelity_op: SparseOp,
    chsh_op: SparseOp,
    number_op: SparseOp,
    p_gg: SparseOp,
    p_ee: SparseOp,
    p_odd: SparseOp,
}

impl BellObservables {
    pub fn new(n_cav: usize) -> Result<Self> {
        let layout = SpaceLayout::new(n_cav)?;
        let id_c = Operator::identity(n_cav);

        let as_sparse =
            |dense: Array2<C64>| Operator::dense(dense).and_then(|m| Operator::sparse(4, m.coords()));

        let target = as_sparse(bell_state(BellSign::Minus).density())?;
        let fidelity_op = target.kron(&id_c).to_sparse_op();
        let chsh_op = chsh_operator().kron(&id_c).to_sparse_op();
        let number_op = lift(&number(n_cav)?, Slot::Cavity, layout)?.to_sparse_op();

        let projector = |index: usize| -> Result<SparseOp> {
            let p = Operator::sparse(4, vec![(index, index, C64::new(1.0, 0.0))])?;
            Ok(p.kron(&id_c).to_sparse_op())
        };
        let p_gg = projector(0)?;
        let p_ee = projector(3)?;
        let p_odd = Operator::sparse(
            4,
            vec![(1, 1, C64::new(1.0, 0.0)), (2, 2, C64::new(1.0, 0.0))],
        )?
        .kron(&id_c)
        .to_sparse_op();

        Ok(Self { layout, fidelity_op, chsh_op, number_op, p_gg, p_ee, p_odd })
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    /// F = tr[(|φ_-⟩⟨φ_-| ⊗ I_c) ρ].
    pub fn fidelity(&self, rho: &Array2<C64>) -> Result<f64> {
        self.check_dim(rho)?;
        let f = self.fidelity_op.expectation_hermitian(rho)?;
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(Error::OutOfRange(format!("fidelity {f} outside [0, 1]")));
        }
        Ok(f)
    }

    /// B = tr[(O_CHSH ⊗ I_c) ρ].
    pub fn chsh(&self, rho: &Array2<C64>) -> Result<f64> {
        self.check_dim(rho)?;
        let b = self.chsh_op.expectation_hermitian(rho)?;
        if b.abs() > TSIRELSON + 1e-6 {
            return Err(Error::OutOfRange(format!("CHSH {b} exceeds the 2√2 bound")));
        }
        Ok(b)
    }

    /// Sample all observables at time `t`.
    pub fn record(&self, t: f64, rho: &Array2<C64>) -> Result<ObservableRecord> {
        let fidelity = self.fidelity(rho)?;
        let chsh = self.chsh(rho)?;
        let photon_number = self.number_op.expectation_hermitian(rho)?;
        let p_gg = self.p_gg.expectation_hermitian(rho)?;
        let p_ee = self.p_ee.expectation_hermitian(rho)?;
        let p_odd = self.p_odd.expectation_hermitian(rho)?;
        let total = p_gg + p_ee + p_odd;
        if (total - 1.0).abs() >= 1e-8 {
            return Err(Error::OutOfRange(format!(
                "parity populations sum to {total}, expected 1"
            )));
        }
        if photon_number < -1e-9 {
            return Err(Error::OutOfRange(format!("negative photon number {photon_number}")));
        }
        Ok(ObservableRecord { t, fidelity, chsh, photon_number, p_gg, p_ee, p_odd })
    }

    fn check_dim(&self, rho: &Array2<C64>) -> Result<()> {
        if rho.nrows() != self.layout.dim() || rho.ncols() != self.layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state {}×{} does not match layout dim {}",
                rho.nrows(),
                rho.ncols(),
                self.layout.dim()
            )));
        }
        Ok(())
    }
}
