use crate::circuit::{
    build_hamiltonian, coupler_number_operator, idle_eigenbasis, CircuitParams, LabeledBasis, LevelLabel,
    COMPUTATIONAL, TRACKED,
};
use crate::error::{precondition, Result};
use crate::numerics::{herm_eig, ComplexMatrix, HermEig};

/// The circuit during a gate, expressed in the labeled idle eigenbasis.
///
/// During the gate qubit 1 sits at `gate_w1` and the coupler follows the
/// pulse; the Hamiltonian is affine in the coupler frequency, so it is stored
/// as `static + wc * number`.
#[derive(Clone, Debug)]
pub struct GateModel {
    params: CircuitParams,
    basis: LabeledBasis,
    gate_w1: f64,
    static_part: ComplexMatrix,
    coupler_number: ComplexMatrix,
    computational: [usize; 4],
    tracked: [usize; TRACKED.len()],
}

impl GateModel {
    /// Gate model with qubit 1 moved onto the `|101> <-> |002>` resonance.
    pub fn new(params: &CircuitParams) -> Result<Self> {
        Self::with_gate_w1(params, params.resonant_gate_w1())
    }

    pub fn with_gate_w1(params: &CircuitParams, gate_w1: f64) -> Result<Self> {
        params.validate()?;
        let basis = idle_eigenbasis(params)?;
        let v = basis.vectors();
        let number = coupler_number_operator(params);
        // H(wc) = H(wc_ref) + (wc - wc_ref) * 2 pi n_c
        let wc_ref = params.coupler.freq;
        let h_ref = build_hamiltonian(params, wc_ref, Some(gate_w1))?;
        let static_full = h_ref.add_scaled(&number, -wc_ref);
        let rotate = |m: &ComplexMatrix| hermitize(&v.adjoint_mul(m).matmul(v));
        let computational = COMPUTATIONAL.map(|l| basis.column(l));
        let tracked = TRACKED.map(|l| basis.column(l));
        Ok(Self {
            params: *params,
            static_part: rotate(&static_full),
            coupler_number: rotate(&number),
            basis,
            gate_w1,
            computational,
            tracked,
        })
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    pub fn basis(&self) -> &LabeledBasis {
        &self.basis
    }

    pub fn gate_w1(&self) -> f64 {
        self.gate_w1
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Columns of 000, 001, 100, 101.
    pub fn computational_columns(&self) -> &[usize; 4] {
        &self.computational
    }

    pub fn tracked_columns(&self) -> &[usize; TRACKED.len()] {
        &self.tracked
    }

    pub fn column(&self, label: LevelLabel) -> usize {
        self.basis.column(label)
    }

    /// `dH/dwc` in the idle eigenbasis.
    pub fn coupler_number(&self) -> &ComplexMatrix {
        &self.coupler_number
    }

    /// Gate Hamiltonian at coupler frequency `wc`, idle eigenbasis, rad/ns.
    pub fn hamiltonian(&self, wc: f64) -> ComplexMatrix {
        self.static_part.add_scaled(&self.coupler_number, wc)
    }

    pub fn step_eig(&self, wc: f64) -> Result<HermEig> {
        if !(wc > 0.0) {
            return Err(precondition(format!("coupler frequency must be positive, got {wc}")));
        }
        herm_eig(&self.hamiltonian(wc))
    }

    /// `exp(-i H(wc) dt)` in the idle eigenbasis.
    pub fn step_unitary(&self, wc: f64, dt: f64) -> Result<ComplexMatrix> {
        Ok(self.step_eig(wc)?.unitary(dt))
    }

    /// Computational 4x4 block of a full-space unitary.
    pub fn computational_block(&self, u: &ComplexMatrix) -> ComplexMatrix {
        let c = &self.computational;
        ComplexMatrix::from_fn(4, 4, |r, k| u[(c[r], c[k])])
    }

    /// `P[label][initial]` for the tracked labels and the four computational
    /// initial states.
    pub fn tracked_populations(&self, u: &ComplexMatrix) -> [[f64; 4]; TRACKED.len()] {
        std::array::from_fn(|l| std::array::from_fn(|s| u[(self.tracked[l], self.computational[s])].norm_sqr()))
    }
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5)
}

/// Accumulates `U = U_k ... U_1` step by step.
#[derive(Clone, Debug)]
pub struct Propagator {
    unitary: ComplexMatrix,
    steps: usize,
}

impl Propagator {
    pub fn new(dim: usize) -> Self {
        Self { unitary: ComplexMatrix::identity(dim), steps: 0 }
    }

    pub fn reset(&mut self) {
        self.unitary = ComplexMatrix::identity(self.unitary.rows());
        self.steps = 0;
    }

    pub fn apply(&mut self, model: &GateModel, wc: f64, dt: f64) -> Result<()> {
        let step = model.step_unitary(wc, dt)?;
        self.unitary = step.matmul(&self.unitary);
        self.steps += 1;
        Ok(())
    }

    /// Apply a precomputed step unitary.
    pub fn apply_unitary(&mut self, step: &ComplexMatrix) {
        self.unitary = step.matmul(&self.unitary);
        self.steps += 1;
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}
