//! Two data transmons and a tunable coupler, each truncated to a few levels.
//!
//! Frequencies are linear (GHz) at the API boundary; Hamiltonians carry the
//! factor `2 pi` so that they are angular frequencies in rad/ns and times are
//! in ns.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::numerics::{herm_eig, ComplexMatrix, HermEig, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Linear frequency, GHz.
    pub freq: f64,
    /// Linear anharmonicity, GHz (negative).
    pub anharm: f64,
    pub levels: usize,
}

impl TransmonParams {
    pub fn new(freq: f64, anharm: f64, levels: usize) -> Self {
        Self { freq, anharm, levels }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.freq > 0.0) {
            return Err(precondition(format!("{name}: frequency must be positive")));
        }
        if !(self.anharm < 0.0) {
            return Err(precondition(format!("{name}: anharmonicity must be negative")));
        }
        if self.levels < 3 {
            return Err(precondition(format!("{name}: at least 3 levels are required")));
        }
        Ok(())
    }

    /// Bare level energy in rad/ns.
    pub fn level_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        TAU * (self.freq * n + 0.5 * self.anharm * n * (n - 1.0))
    }
}

/// Circuit parameters. Serialized flat with the keys
/// `w1, w2, wc, a1, ac, a2, g12, g1c, g2c, levels`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "FlatCircuit", into = "FlatCircuit")]
pub struct CircuitParams {
    pub q1: TransmonParams,
    pub coupler: TransmonParams,
    pub q2: TransmonParams,
    pub g12: f64,
    pub g1c: f64,
    pub g2c: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            q1: TransmonParams::new(4.2, -0.200, 3),
            coupler: TransmonParams::new(6.38, -0.100, 3),
            q2: TransmonParams::new(5.2, -0.200, 3),
            g12: 0.007,
            g1c: 0.085,
            g2c: 0.085,
        }
    }
}

impl CircuitParams {
    pub fn with_levels(mut self, levels: usize) -> Self {
        self.q1.levels = levels;
        self.coupler.levels = levels;
        self.q2.levels = levels;
        self
    }

    pub fn uncoupled(mut self) -> Self {
        self.g12 = 0.0;
        self.g1c = 0.0;
        self.g2c = 0.0;
        self
    }

    /// Exchange the roles of the two data qubits.
    pub fn swapped(mut self) -> Self {
        std::mem::swap(&mut self.q1, &mut self.q2);
        std::mem::swap(&mut self.g1c, &mut self.g2c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.q1.validate("q1")?;
        self.coupler.validate("coupler")?;
        self.q2.validate("q2")?;
        if self.g12 < 0.0 || self.g1c < 0.0 || self.g2c < 0.0 {
            return Err(precondition("couplings must be non-negative"));
        }
        let all_zero = self.g12 == 0.0 && self.g1c == 0.0 && self.g2c == 0.0;
        if !all_zero && !(self.g12 < self.g1c && self.g12 < self.g2c) {
            return Err(precondition("direct coupling g12 must be weaker than g1c and g2c"));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.q1.levels, self.coupler.levels, self.q2.levels]
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Tensor index of `|ijk>`, qubit 1 slowest.
    pub fn index_of(&self, label: LevelLabel) -> usize {
        let [_, dc, d2] = self.dims();
        (label.i * dc + label.j) * d2 + label.k
    }

    pub fn label_of(&self, index: usize) -> LevelLabel {
        let [_, dc, d2] = self.dims();
        LevelLabel { i: index / (dc * d2), j: (index / d2) % dc, k: index % d2 }
    }

    /// Qubit-1 gate frequency that makes `|101>` and `|002>` resonant.
    pub fn resonant_gate_w1(&self) -> f64 {
        self.q2.freq + self.q2.anharm
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatCircuit {
    w1: f64,
    w2: f64,
    wc: f64,
    a1: f64,
    ac: f64,
    a2: f64,
    g12: f64,
    g1c: f64,
    g2c: f64,
    levels: usize,
}

impl Default for FlatCircuit {
    fn default() -> Self {
        CircuitParams::default().into()
    }
}

impl From<FlatCircuit> for CircuitParams {
    fn from(f: FlatCircuit) -> Self {
        Self {
            q1: TransmonParams::new(f.w1, f.a1, f.levels),
            coupler: TransmonParams::new(f.wc, f.ac, f.levels),
            q2: TransmonParams::new(f.w2, f.a2, f.levels),
            g12: f.g12,
            g1c: f.g1c,
            g2c: f.g2c,
        }
    }
}

impl From<CircuitParams> for FlatCircuit {
    fn from(p: CircuitParams) -> Self {
        Self {
            w1: p.q1.freq,
            w2: p.q2.freq,
            wc: p.coupler.freq,
            a1: p.q1.anharm,
            ac: p.coupler.anharm,
            a2: p.q2.anharm,
            g12: p.g12,
            g1c: p.g1c,
            g2c: p.g2c,
            levels: p.q1.levels.max(p.coupler.levels).max(p.q2.levels),
        }
    }
}

/// Occupation numbers of qubit 1, coupler and qubit 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelLabel {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl LevelLabel {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.i, self.j, self.k)
    }
}

/// Computational states in basis order 000, 001, 100, 101.
pub const COMPUTATIONAL: [LevelLabel; 4] =
    [LevelLabel::new(0, 0, 0), LevelLabel::new(0, 0, 1), LevelLabel::new(1, 0, 0), LevelLabel::new(1, 0, 1)];

/// Labels whose populations are tracked during a gate.
pub const TRACKED: [LevelLabel; 9] = [
    LevelLabel::new(0, 0, 0),
    LevelLabel::new(0, 0, 1),
    LevelLabel::new(1, 0, 0),
    LevelLabel::new(1, 0, 1),
    LevelLabel::new(0, 1, 0),
    LevelLabel::new(1, 1, 0),
    LevelLabel::new(0, 1, 1),
    LevelLabel::new(0, 0, 2),
    LevelLabel::new(2, 0, 0),
];

fn lowering(d: usize) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; d]; d];
    for n in 1..d {
        b[n - 1][n] = (n as f64).sqrt();
    }
    b
}

/// Circuit Hamiltonian in rad/ns on the full tensor-product space, with the
/// coupler at `wc` and optionally qubit 1 moved to `w1_override`.
pub fn build_hamiltonian(p: &CircuitParams, wc: f64, w1_override: Option<f64>) -> Result<ComplexMatrix> {
    p.validate()?;
    if !(wc > 0.0) {
        return Err(precondition(format!("coupler frequency must be positive, got {wc}")));
    }
    if let Some(w1) = w1_override {
        if !(w1 > 0.0) {
            return Err(precondition(format!("qubit-1 override must be positive, got {w1}")));
        }
    }
    let q1 = TransmonParams { freq: w1_override.unwrap_or(p.q1.freq), ..p.q1 };
    let qc = TransmonParams { freq: wc, ..p.coupler };
    Ok(assemble(p, &q1, &qc, &p.q2))
}

/// Coupler number operator times `2 pi`, i.e. `dH / d wc`.
pub fn coupler_number_operator(p: &CircuitParams) -> ComplexMatrix {
    let n = p.dim();
    let mut m = ComplexMatrix::zeros(n, n);
    for idx in 0..n {
        m[(idx, idx)] = C64::new(TAU * p.label_of(idx).j as f64, 0.0);
    }
    m
}

fn assemble(p: &CircuitParams, q1: &TransmonParams, qc: &TransmonParams, q2: &TransmonParams) -> ComplexMatrix {
    let [d1, dc, d2] = p.dims();
    let n = d1 * dc * d2;
    let mut h = ComplexMatrix::zeros(n, n);
    for idx in 0..n {
        let l = p.label_of(idx);
        h[(idx, idx)] = C64::new(q1.level_energy(l.i) + qc.level_energy(l.j) + q2.level_energy(l.k), 0.0);
    }

    // (b + b^dagger) on each mode, as dense single-mode matrices.
    let x = |d: usize| {
        let b = lowering(d);
        let mut x = vec![vec![0.0; d]; d];
        for r in 0..d {
            for c in 0..d {
                x[r][c] = b[r][c] + b[c][r];
            }
        }
        x
    };
    let (x1, xc, x2) = (x(d1), x(dc), x(d2));

    for row in 0..n {
        let a = p.label_of(row);
        for col in 0..n {
            let b = p.label_of(col);
            let mut v = 0.0;
            if a.j == b.j {
                v += p.g12 * x1[a.i][b.i] * x2[a.k][b.k];
            }
            if a.k == b.k {
                v += p.g1c * x1[a.i][b.i] * xc[a.j][b.j];
            }
            if a.i == b.i {
                v += p.g2c * x2[a.k][b.k] * xc[a.j][b.j];
            }
            if v != 0.0 {
                h[(row, col)] += C64::new(TAU * v, 0.0);
            }
        }
    }
    h
}

/// Eigenbasis of the circuit with each eigenvector labeled by the bare state
/// it overlaps most.
#[derive(Clone, Debug)]
pub struct LabeledBasis {
    pub eig: HermEig,
    dims: [usize; 3],
    /// Bare tensor index -> eigenvector column.
    column_of: Vec<usize>,
    /// Eigenvector column -> bare tensor index.
    label_at: Vec<usize>,
    /// `|<bare|eig>|^2` of each matched pair, indexed by bare index.
    overlap: Vec<f64>,
}

impl LabeledBasis {
    fn index(&self, label: LevelLabel) -> usize {
        (label.i * self.dims[1] + label.j) * self.dims[2] + label.k
    }

    fn label(&self, index: usize) -> LevelLabel {
        let [_, dc, d2] = self.dims;
        LevelLabel { i: index / (dc * d2), j: (index / d2) % dc, k: index % d2 }
    }

    pub fn dim(&self) -> usize {
        self.column_of.len()
    }

    pub fn column(&self, label: LevelLabel) -> usize {
        self.column_of[self.index(label)]
    }

    pub fn label_of_column(&self, col: usize) -> LevelLabel {
        self.label(self.label_at[col])
    }

    /// Eigenvalue of the labeled state, rad/ns.
    pub fn energy(&self, label: LevelLabel) -> f64 {
        self.eig.values[self.column(label)]
    }

    pub fn overlap(&self, label: LevelLabel) -> f64 {
        self.overlap[self.index(label)]
    }

    pub fn columns(&self, labels: &[LevelLabel]) -> Vec<usize> {
        labels.iter().map(|&l| self.column(l)).collect()
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.eig.vectors
    }
}

/// Label the eigenstates of `h` by greedy maximum overlap with bare states.
pub fn label_eigenbasis(p: &CircuitParams, h: &ComplexMatrix) -> Result<LabeledBasis> {
    let eig = herm_eig(h)?;
    let n = eig.dim();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for bare in 0..n {
        for col in 0..n {
            pairs.push((eig.vectors[(bare, col)].norm_sqr(), bare, col));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut column_of = vec![usize::MAX; n];
    let mut label_at = vec![usize::MAX; n];
    let mut overlap = vec![0.0; n];
    let mut assigned = 0;
    for (ov, bare, col) in pairs {
        if column_of[bare] != usize::MAX || label_at[col] != usize::MAX {
            continue;
        }
        column_of[bare] = col;
        label_at[col] = bare;
        overlap[bare] = ov;
        assigned += 1;
        if assigned == n {
            break;
        }
    }

    let basis = LabeledBasis { eig, dims: p.dims(), column_of, label_at, overlap };
    if let Some(bare) = (0..n).min_by(|&a, &b| basis.overlap[a].total_cmp(&basis.overlap[b])) {
        if basis.overlap[bare] < 0.5 {
            return Err(Error::LabelingAmbiguity { label: basis.label(bare), overlap: basis.overlap[bare] });
        }
    }
    Ok(basis)
}

/// Labeled eigenbasis at the idle point described by `p`.
pub fn idle_eigenbasis(p: &CircuitParams) -> Result<LabeledBasis> {
    let h = build_hamiltonian(p, p.coupler.freq, None)?;
    label_eigenbasis(p, &h)
}

/// Residual longitudinal coupling `E101 - E100 - E001 + E000` in kHz.
pub fn zz_coupling(p: &CircuitParams) -> Result<f64> {
    let basis = idle_eigenbasis(p)?;
    let [e000, e001, e100, e101] = COMPUTATIONAL.map(|l| basis.energy(l));
    let zz = e101 - e100 - e001 + e000;
    Ok(zz / TAU * 1e6)
}

/// Coupler-mediated transverse coupling from the dispersive (Schrieffer-Wolff)
/// formula `g12 + g1c g2c (1/D1c + 1/D2c) / 2`, in MHz.
pub fn xx_coupling_sw(p: &CircuitParams) -> Result<f64> {
    let d1c = p.q1.freq - p.coupler.freq;
    let d2c = p.q2.freq - p.coupler.freq;
    if d1c == 0.0 || d2c == 0.0 {
        return Err(Error::SingularDetuning(format!(
            "qubit-coupler detuning vanishes (D1c = {d1c}, D2c = {d2c})"
        )));
    }
    Ok((p.g12 + 0.5 * p.g1c * p.g2c * (1.0 / d1c + 1.0 / d2c)) * 1e3)
}

/// Error from decoherence over a gate, `1 - exp(-t_gate / t_coh)`.
pub fn decoherence_error(t_gate: f64, t_coh: f64) -> f64 {
    -(-t_gate / t_coh).exp_m1()
}
