// Copyright 2026 The bqcsim Developers
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except
// in compliance with the License. You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under
// the License.

//! Dense state-vector simulator for small labeled qubit registers.
//!
//! The register is the referee's ground truth: it prepares states, applies the
//! handful of gates the protocol needs, performs Pauli and rotated-basis
//! measurements, post-selects on two-qubit parity, and evaluates exact
//! expectation values. Registers are capped at [`MAX_QUBITS`] qubits; the
//! protocol itself needs six.
//!
//! Amplitude ordering is little-endian in the label list: the qubit at
//! position `k` of the label list corresponds to bit `k` (weight `1 << k`) of
//! the amplitude index.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use thiserror::Error;

/// Hard cap on register width.
pub const MAX_QUBITS: usize = 12;

/// Tolerance on the L2 norm after public operations.
pub const NORM_TOL: f64 = 1e-9;

/// Which machine holds a qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Owner {
    Alice,
    Bob,
    /// A register that lives on a single machine (reference circuits, tests).
    Local,
}

/// Identifier of one logical qubit: owner tag plus 1-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitLabel {
    pub owner: Owner,
    pub index: u8,
}

impl QubitLabel {
    pub const fn alice(index: u8) -> Self {
        QubitLabel { owner: Owner::Alice, index }
    }

    pub const fn bob(index: u8) -> Self {
        QubitLabel { owner: Owner::Bob, index }
    }

    pub const fn local(index: u8) -> Self {
        QubitLabel { owner: Owner::Local, index }
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.owner {
            Owner::Alice => write!(f, "{}A", self.index),
            Owner::Bob => write!(f, "{}B", self.index),
            Owner::Local => write!(f, "q{}", self.index),
        }
    }
}

/// A measurement outcome, always +1 or -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct Outcome(i8);

impl Outcome {
    pub const PLUS: Outcome = Outcome(1);
    pub const MINUS: Outcome = Outcome(-1);

    pub fn from_value(value: i8) -> Result<Self, QsimError> {
        match value {
            1 => Ok(Outcome::PLUS),
            -1 => Ok(Outcome::MINUS),
            other => Err(QsimError::BadOutcome(other)),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// Classical bit under the fixed convention +1 -> 0, -1 -> 1.
    pub fn bit(self) -> u8 {
        if self.0 == 1 {
            0
        } else {
            1
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Outcome::PLUS
        } else {
            Outcome::MINUS
        }
    }

    pub fn flipped(self) -> Self {
        Outcome(-self.0)
    }
}

impl std::ops::Mul for Outcome {
    type Output = Outcome;

    fn mul(self, rhs: Outcome) -> Outcome {
        Outcome(self.0 * rhs.0)
    }
}

impl TryFrom<i8> for Outcome {
    type Error = QsimError;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        Outcome::from_value(value)
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.0
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// Single-qubit Pauli operator, used in expectation strings and noise insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

/// Measurement axis in the X-Z plane of the Bloch sphere.
///
/// `BlochAngle(theta)` measures the observable `cos(theta) Z + sin(theta) X`,
/// so `PauliZ` is `BlochAngle(0)` and `PauliX` is `BlochAngle(pi/2)`; the
/// equivalence is exact because every measurement goes through the same
/// rotated-frame code path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasurementBasis {
    PauliZ,
    PauliX,
    BlochAngle(f64),
}

impl MeasurementBasis {
    /// Bloch angle of the measured observable.
    pub fn angle(self) -> f64 {
        match self {
            MeasurementBasis::PauliZ => 0.0,
            MeasurementBasis::PauliX => FRAC_PI_2,
            MeasurementBasis::BlochAngle(theta) => theta,
        }
    }
}

/// The gate set the protocol needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    H(QubitLabel),
    X(QubitLabel),
    Z(QubitLabel),
    Cnot { control: QubitLabel, target: QubitLabel },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QsimError {
    #[error("duplicate qubit label {0}")]
    DuplicateLabel(QubitLabel),
    #[error("register needs at least one qubit")]
    EmptyRegister,
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit cap")]
    RegisterTooLarge(usize),
    #[error("unknown qubit label {0}")]
    UnknownLabel(QubitLabel),
    #[error("control and target are the same qubit {0}")]
    IdenticalQubits(QubitLabel),
    #[error("outcome must be +1 or -1, got {0}")]
    BadOutcome(i8),
    #[error("{got} amplitudes do not fit a {qubits}-qubit register")]
    BadAmplitudeCount { got: usize, qubits: usize },
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
}

/// Complex amplitude vector over a labeled qubit register.
#[derive(Clone, Debug)]
pub struct StateVector {
    labels: Vec<QubitLabel>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// All-zeros computational basis state over the given labels.
    pub fn new_register(labels: &[QubitLabel]) -> Result<Self, QsimError> {
        if labels.is_empty() {
            return Err(QsimError::EmptyRegister);
        }
        if labels.len() > MAX_QUBITS {
            return Err(QsimError::RegisterTooLarge(labels.len()));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(QsimError::DuplicateLabel(*label));
            }
        }
        let mut amps = vec![Complex64::ZERO; 1 << labels.len()];
        amps[0] = Complex64::ONE;
        Ok(StateVector { labels: labels.to_vec(), amps })
    }

    /// Build a state from explicit amplitudes; they must be normalized.
    pub fn with_amplitudes(labels: &[QubitLabel], amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let mut state = StateVector::new_register(labels)?;
        if amps.len() != state.amps.len() {
            return Err(QsimError::BadAmplitudeCount { got: amps.len(), qubits: labels.len() });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized(norm));
        }
        state.amps = amps;
        Ok(state)
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn position(&self, label: QubitLabel) -> Result<usize, QsimError> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(QsimError::UnknownLabel(label))
    }

    /// `|<self|other>|^2`; both states must share the same label list.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64, QsimError> {
        if self.labels != other.labels {
            return Err(QsimError::UnknownLabel(
                *other.labels.first().unwrap_or(&QubitLabel::local(0)),
            ));
        }
        let ip: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(ip.norm_sqr())
    }

    pub fn apply_gate(&mut self, gate: Gate) -> Result<(), QsimError> {
        match gate {
            Gate::H(q) => {
                let k = self.position(q)?;
                self.butterfly(k, |a, b| {
                    let f = std::f64::consts::FRAC_1_SQRT_2;
                    (f * (a + b), f * (a - b))
                });
            }
            Gate::X(q) => {
                let k = self.position(q)?;
                self.butterfly(k, |a, b| (b, a));
            }
            Gate::Z(q) => {
                let k = self.position(q)?;
                let mask = 1usize << k;
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                if control == target {
                    return Err(QsimError::IdenticalQubits(control));
                }
                let c = self.position(control)?;
                let t = self.position(target)?;
                let cmask = 1usize << c;
                let tmask = 1usize << t;
                for i in 0..self.amps.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amps.swap(i, i | tmask);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, qubit: QubitLabel, op: PauliOp) -> Result<(), QsimError> {
        match op {
            PauliOp::I => Ok(()),
            PauliOp::X => self.apply_gate(Gate::X(qubit)),
            PauliOp::Z => self.apply_gate(Gate::Z(qubit)),
            PauliOp::Y => {
                let k = self.position(qubit)?;
                self.butterfly(k, |a, b| (-Complex64::I * b, Complex64::I * a));
                Ok(())
            }
        }
    }

    /// Y-axis rotation by `theta` (maps |0> to cos(theta/2)|0> + sin(theta/2)|1>).
    fn apply_ry(&mut self, k: usize, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        self.butterfly(k, |a, b| (c * a - s * b, s * a + c * b));
    }

    /// Apply a 2x2 update to every amplitude pair split on bit `k`.
    fn butterfly(&mut self, k: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let mask = 1usize << k;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a, b) = (self.amps[i], self.amps[i | mask]);
                let (na, nb) = f(a, b);
                self.amps[i] = na;
                self.amps[i | mask] = nb;
            }
        }
    }

    /// Sample a measurement of `qubit` along `basis` and collapse the state.
    pub fn measure(
        &mut self,
        qubit: QubitLabel,
        basis: MeasurementBasis,
        rng: &mut impl Rng,
    ) -> Result<Outcome, QsimError> {
        let k = self.position(qubit)?;
        let theta = basis.angle();
        // Rotate the measurement axis onto Z, collapse there, rotate back.
        self.apply_ry(k, -theta);
        let mask = 1usize << k;
        let prob_plus: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let outcome = if rng.random::<f64>() < prob_plus {
            Outcome::PLUS
        } else {
            Outcome::MINUS
        };
        self.collapse_bit(k, outcome.bit());
        self.apply_ry(k, theta);
        Ok(outcome)
    }

    /// Probability of observing `outcome` on `qubit` along `basis`, together
    /// with the renormalized post-measurement state (`None` when the branch
    /// has zero weight). Does not modify `self`.
    pub fn project_onto(
        &self,
        qubit: QubitLabel,
        basis: MeasurementBasis,
        outcome: Outcome,
    ) -> Result<(f64, Option<StateVector>), QsimError> {
        let k = self.position(qubit)?;
        let theta = basis.angle();
        let mut branch = self.clone();
        branch.apply_ry(k, -theta);
        let mask = 1usize << k;
        let bit = outcome.bit() as usize;
        let prob: f64 = branch
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & mask != 0) as usize == bit)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if prob < 1e-15 {
            return Ok((prob.max(0.0), None));
        }
        branch.collapse_bit(k, outcome.bit());
        branch.apply_ry(k, theta);
        Ok((prob, Some(branch)))
    }

    fn collapse_bit(&mut self, k: usize, bit: u8) {
        let mask = 1usize << k;
        let keep = bit as usize;
        let mut norm_sqr = 0.0;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if (i & mask != 0) as usize == keep {
                norm_sqr += amp.norm_sqr();
            } else {
                *amp = Complex64::ZERO;
            }
        }
        let scale = 1.0 / norm_sqr.sqrt();
        for amp in &mut self.amps {
            *amp *= scale;
        }
    }

    /// Project the pair `(q1, q2)` onto even parity (span of |00> and |11>).
    ///
    /// Succeeds with probability `||P psi||^2`; on success the state is the
    /// renormalized projection, on failure it is the complementary branch and
    /// the caller must discard it.
    pub fn project_parity(
        &mut self,
        q1: QubitLabel,
        q2: QubitLabel,
        rng: &mut impl Rng,
    ) -> Result<bool, QsimError> {
        if q1 == q2 {
            return Err(QsimError::IdenticalQubits(q1));
        }
        let m1 = 1usize << self.position(q1)?;
        let m2 = 1usize << self.position(q2)?;
        let even: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & m1 != 0) == (i & m2 != 0))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let success = rng.random::<f64>() < even;
        let mut norm_sqr = 0.0;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            let is_even = (i & m1 != 0) == (i & m2 != 0);
            if is_even == success {
                norm_sqr += amp.norm_sqr();
            } else {
                *amp = Complex64::ZERO;
            }
        }
        let scale = 1.0 / norm_sqr.sqrt();
        for amp in &mut self.amps {
            *amp *= scale;
        }
        Ok(success)
    }

    /// Probability that a parity projection on `(q1, q2)` would succeed.
    pub fn parity_success_probability(
        &self,
        q1: QubitLabel,
        q2: QubitLabel,
    ) -> Result<f64, QsimError> {
        if q1 == q2 {
            return Err(QsimError::IdenticalQubits(q1));
        }
        let m1 = 1usize << self.position(q1)?;
        let m2 = 1usize << self.position(q2)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & m1 != 0) == (i & m2 != 0))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Collapse the even-parity branch in place (used by exact enumeration).
    pub fn project_parity_success(
        &mut self,
        q1: QubitLabel,
        q2: QubitLabel,
    ) -> Result<f64, QsimError> {
        let prob = self.parity_success_probability(q1, q2)?;
        if prob < 1e-15 {
            return Ok(0.0);
        }
        let m1 = 1usize << self.position(q1)?;
        let m2 = 1usize << self.position(q2)?;
        let mut norm_sqr = 0.0;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if (i & m1 != 0) == (i & m2 != 0) {
                norm_sqr += amp.norm_sqr();
            } else {
                *amp = Complex64::ZERO;
            }
        }
        let scale = 1.0 / norm_sqr.sqrt();
        for amp in &mut self.amps {
            *amp *= scale;
        }
        Ok(prob)
    }

    /// Exact expectation value of a Pauli string.
    ///
    /// `ops` maps labels to Pauli operators; omitted qubits are implicitly I.
    pub fn expectation(&self, ops: &[(QubitLabel, PauliOp)]) -> Result<f64, QsimError> {
        let mut xmask = 0usize; // bits flipped by X or Y
        let mut ymask = 0usize;
        let mut zmask = 0usize;
        for (i, (label, op)) in ops.iter().enumerate() {
            if ops[..i].iter().any(|(l, _)| l == label) {
                return Err(QsimError::DuplicateLabel(*label));
            }
            let bit = 1usize << self.position(*label)?;
            match op {
                PauliOp::I => {}
                PauliOp::X => xmask |= bit,
                PauliOp::Y => {
                    xmask |= bit;
                    ymask |= bit;
                }
                PauliOp::Z => zmask |= bit,
            }
        }
        let mut acc = Complex64::ZERO;
        for (i, amp) in self.amps.iter().enumerate() {
            if amp == &Complex64::ZERO {
                continue;
            }
            let j = i ^ xmask;
            // Sign from Z factors on set bits.
            let z_sign = if (i & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            // Each Y factor contributes i on |0> and -i on |1>.
            let y_total = ymask.count_ones();
            let y_minus = (i & ymask).count_ones();
            let mut phase = Complex64::new(z_sign, 0.0);
            phase *= Complex64::I.powu(y_total);
            if y_minus % 2 == 1 {
                phase = -phase;
            }
            acc += self.amps[j].conj() * phase * amp;
        }
        debug_assert!(acc.im.abs() < 1e-9, "expectation has imaginary part {}", acc.im);
        Ok(acc.re)
    }

    /// Exact expectation of a product of X-Z-plane observables
    /// `cos(theta) Z + sin(theta) X`, one per listed qubit.
    pub fn expectation_rotated(&self, obs: &[(QubitLabel, f64)]) -> Result<f64, QsimError> {
        let k = obs.len();
        let mut total = 0.0;
        for subset in 0..(1usize << k) {
            let mut coeff = 1.0;
            let mut string = Vec::with_capacity(k);
            for (bit, (label, theta)) in obs.iter().enumerate() {
                if subset & (1 << bit) != 0 {
                    coeff *= theta.sin();
                    string.push((*label, PauliOp::X));
                } else {
                    coeff *= theta.cos();
                    string.push((*label, PauliOp::Z));
                }
            }
            if coeff != 0.0 {
                total += coeff * self.expectation(&string)?;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn q(i: u8) -> QubitLabel {
        QubitLabel::local(i)
    }

    fn bell_phi_plus(a: QubitLabel, b: QubitLabel) -> StateVector {
        let mut s = StateVector::new_register(&[a, b]).unwrap();
        s.apply_gate(Gate::H(a)).unwrap();
        s.apply_gate(Gate::Cnot { control: a, target: b }).unwrap();
        s
    }

    #[test]
    fn new_register_ground_state() {
        let s = StateVector::new_register(&[q(0)]).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::ONE, Complex64::ZERO]);

        let s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == Complex64::ZERO));
    }

    #[test]
    fn new_register_rejects_bad_labels() {
        assert!(matches!(
            StateVector::new_register(&[q(0), q(0)]),
            Err(QsimError::DuplicateLabel(_))
        ));
        assert!(matches!(StateVector::new_register(&[]), Err(QsimError::EmptyRegister)));
        let labels: Vec<_> = (0..13).map(q).collect();
        assert!(matches!(
            StateVector::new_register(&labels),
            Err(QsimError::RegisterTooLarge(13))
        ));
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::new_register(&[q(0)]).unwrap();
        s.apply_gate(Gate::H(q(0))).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - f).abs() < 1e-12);
        assert!((s.amplitudes()[1].re - f).abs() < 1e-12);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10> means qubit 0 (control) is 1, qubit 1 (target) is 0.
        let mut s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        s.apply_gate(Gate::X(q(0))).unwrap();
        s.apply_gate(Gate::Cnot { control: q(0), target: q(1) }).unwrap();
        assert!((s.amplitudes()[0b11].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_is_an_involution() {
        let mut s = StateVector::new_register(&[q(0)]).unwrap();
        s.apply_gate(Gate::H(q(0))).unwrap();
        s.apply_gate(Gate::H(q(0))).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-12);
        assert!(s.amplitudes()[1].norm() < 1e-12);
    }

    #[test]
    fn gate_errors() {
        let mut s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        assert!(matches!(
            s.apply_gate(Gate::H(q(7))),
            Err(QsimError::UnknownLabel(_))
        ));
        assert!(matches!(
            s.apply_gate(Gate::Cnot { control: q(0), target: q(0) }),
            Err(QsimError::IdenticalQubits(_))
        ));
    }

    #[test]
    fn z_measurement_on_ground_state_is_deterministic() {
        let mut r = rng(1);
        for _ in 0..32 {
            let mut s = StateVector::new_register(&[q(0)]).unwrap();
            let o = s.measure(q(0), MeasurementBasis::PauliZ, &mut r).unwrap();
            assert_eq!(o, Outcome::PLUS);
        }
    }

    #[test]
    fn x_measurement_on_ground_state_is_unbiased() {
        let mut r = rng(2);
        let mut plus = 0u32;
        let n = 10_000;
        for _ in 0..n {
            let mut s = StateVector::new_register(&[q(0)]).unwrap();
            if s.measure(q(0), MeasurementBasis::PauliX, &mut r).unwrap() == Outcome::PLUS {
                plus += 1;
            }
        }
        let freq = f64::from(plus) / f64::from(n);
        assert!((freq - 0.5).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn bell_pair_z_outcomes_are_perfectly_correlated() {
        let mut r = rng(3);
        for _ in 0..200 {
            let mut s = bell_phi_plus(q(0), q(1));
            let a = s.measure(q(0), MeasurementBasis::PauliZ, &mut r).unwrap();
            let b = s.measure(q(1), MeasurementBasis::PauliZ, &mut r).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn repeated_measurement_is_stable() {
        let mut r = rng(4);
        for seed in 0..20u64 {
            let mut rr = rng(seed);
            let mut s = bell_phi_plus(q(0), q(1));
            let basis = MeasurementBasis::BlochAngle(0.77);
            let first = s.measure(q(0), basis, &mut rr).unwrap();
            for _ in 0..5 {
                assert_eq!(s.measure(q(0), basis, &mut r).unwrap(), first);
            }
        }
    }

    #[test]
    fn parity_projection_on_even_state_always_succeeds() {
        let mut r = rng(5);
        let mut s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        assert!(s.project_parity(q(0), q(1), &mut r).unwrap());
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_projection_on_odd_state_always_fails() {
        let mut r = rng(6);
        let mut s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        s.apply_gate(Gate::X(q(1))).unwrap();
        assert!(!s.project_parity(q(0), q(1), &mut r).unwrap());
    }

    #[test]
    fn parity_projection_fuses_two_bell_pairs() {
        // Pairs (0,1) and (2,3); project halves 0 and 2 of different pairs.
        let build = || {
            let mut s = StateVector::new_register(&[q(0), q(1), q(2), q(3)]).unwrap();
            s.apply_gate(Gate::H(q(0))).unwrap();
            s.apply_gate(Gate::Cnot { control: q(0), target: q(1) }).unwrap();
            s.apply_gate(Gate::H(q(2))).unwrap();
            s.apply_gate(Gate::Cnot { control: q(2), target: q(3) }).unwrap();
            s
        };
        assert!((build().parity_success_probability(q(0), q(2)).unwrap() - 0.5).abs() < 1e-12);

        let mut successes = 0u32;
        let n = 10_000;
        let mut r = rng(7);
        for _ in 0..n {
            let mut s = build();
            if s.project_parity(q(0), q(2), &mut r).unwrap() {
                successes += 1;
            }
        }
        let freq = f64::from(successes) / f64::from(n);
        assert!((freq - 0.5).abs() < 0.015, "freq = {freq}");

        // Post-selected state is the 4-qubit GHZ state.
        let mut s = build();
        s.project_parity_success(q(0), q(2)).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        let mut ghz = vec![Complex64::ZERO; 16];
        ghz[0b0000] = Complex64::new(f, 0.0);
        ghz[0b1111] = Complex64::new(f, 0.0);
        let ghz = StateVector::with_amplitudes(&[q(0), q(1), q(2), q(3)], ghz).unwrap();
        assert!((s.fidelity(&ghz).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_projection_rejects_identical_labels() {
        let mut r = rng(8);
        let mut s = StateVector::new_register(&[q(0), q(1)]).unwrap();
        assert!(matches!(
            s.project_parity(q(0), q(0), &mut r),
            Err(QsimError::IdenticalQubits(_))
        ));
    }

    #[test]
    fn stabilizer_expectations_on_bell_states() {
        let phi_plus = bell_phi_plus(q(0), q(1));
        let xx = [(q(0), PauliOp::X), (q(1), PauliOp::X)];
        let zz = [(q(0), PauliOp::Z), (q(1), PauliOp::Z)];
        assert!((phi_plus.expectation(&xx).unwrap() - 1.0).abs() < 1e-12);
        assert!((phi_plus.expectation(&zz).unwrap() - 1.0).abs() < 1e-12);

        let mut phi_minus = bell_phi_plus(q(0), q(1));
        phi_minus.apply_gate(Gate::Z(q(0))).unwrap();
        assert!((phi_minus.expectation(&zz).unwrap() - 1.0).abs() < 1e-12);
        assert!((phi_minus.expectation(&xx).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_expectation_on_bell_pair() {
        // <(Z+X)/sqrt(2) (x) Z> on |Phi+> is 1/sqrt(2).
        let s = bell_phi_plus(q(0), q(1));
        let e = s
            .expectation_rotated(&[(q(0), std::f64::consts::FRAC_PI_4), (q(1), 0.0)])
            .unwrap();
        assert!((e - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_bad_strings() {
        let s = bell_phi_plus(q(0), q(1));
        assert!(matches!(
            s.expectation(&[(q(9), PauliOp::X)]),
            Err(QsimError::UnknownLabel(_))
        ));
        assert!(matches!(
            s.expectation(&[(q(0), PauliOp::X), (q(0), PauliOp::Z)]),
            Err(QsimError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn pauli_y_squares_to_identity() {
        let mut s = bell_phi_plus(q(0), q(1));
        let before = s.amplitudes().to_vec();
        s.apply_pauli(q(0), PauliOp::Y).unwrap();
        s.apply_pauli(q(0), PauliOp::Y).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&before) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn identical_seed_gives_identical_outcomes() {
        let run = |seed| {
            let mut r = rng(seed);
            let mut s = bell_phi_plus(q(0), q(1));
            let a = s.measure(q(0), MeasurementBasis::PauliX, &mut r).unwrap();
            let b = s.measure(q(1), MeasurementBasis::BlochAngle(0.3), &mut r).unwrap();
            (a, b)
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn sampled_mean_tracks_expectation() {
        // Born rule check: empirical mean of outcomes vs exact expectation.
        let mut r = rng(9);
        let theta = 0.9;
        let exact = {
            let mut s = StateVector::new_register(&[q(0)]).unwrap();
            s.apply_gate(Gate::H(q(0))).unwrap();
            s.expectation_rotated(&[(q(0), theta)]).unwrap()
        };
        let n = 10_000;
        let mut sum = 0i64;
        for _ in 0..n {
            let mut s = StateVector::new_register(&[q(0)]).unwrap();
            s.apply_gate(Gate::H(q(0))).unwrap();
            sum += i64::from(
                s.measure(q(0), MeasurementBasis::BlochAngle(theta), &mut r).unwrap().value(),
            );
        }
        let mean = sum as f64 / f64::from(n);
        let sigma = ((1.0 - exact * exact) / f64::from(n)).sqrt();
        assert!((mean - exact).abs() < 3.0 * sigma, "mean {mean} exact {exact}");
    }

    #[test]
    fn outcome_round_trip_and_serde() {
        assert_eq!(Outcome::PLUS.bit(), 0);
        assert_eq!(Outcome::MINUS.bit(), 1);
        assert!(Outcome::from_value(0).is_err());
        let json = serde_json::to_string(&Outcome::MINUS).unwrap();
        assert_eq!(json, "-1");
        let back: Outcome = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Outcome::MINUS);
        assert!(serde_json::from_str::<Outcome>("3").is_err());
    }

    proptest! {
        #[test]
        fn random_gate_sequences_preserve_norm(ops in proptest::collection::vec(0..4u8, 1..40)) {
            let labels = [q(0), q(1), q(2)];
            let mut s = StateVector::new_register(&labels).unwrap();
            let mut r = rng(11);
            for (step, op) in ops.iter().enumerate() {
                let a = labels[step % 3];
                let b = labels[(step + 1) % 3];
                match op {
                    0 => s.apply_gate(Gate::H(a)).unwrap(),
                    1 => s.apply_gate(Gate::X(a)).unwrap(),
                    2 => s.apply_gate(Gate::Cnot { control: a, target: b }).unwrap(),
                    _ => {
                        let _ = s.measure(a, MeasurementBasis::BlochAngle(0.1 * step as f64), &mut r).unwrap();
                    }
                }
                prop_assert!((s.norm() - 1.0).abs() < NORM_TOL);
            }
        }

        #[test]
        fn pauli_z_matches_bloch_angle_zero(re in proptest::collection::vec(-1.0..1.0f64, 4),
                                            im in proptest::collection::vec(-1.0..1.0f64, 4)) {
            let amps: Vec<Complex64> = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let amps: Vec<Complex64> = amps.into_iter().map(|a| a / norm).collect();
            let s = StateVector::with_amplitudes(&[q(0), q(1)], amps).unwrap();
            for qq in [q(0), q(1)] {
                let (pz, _) = s.project_onto(qq, MeasurementBasis::PauliZ, Outcome::PLUS).unwrap();
                let (pa, _) = s.project_onto(qq, MeasurementBasis::BlochAngle(0.0), Outcome::PLUS).unwrap();
                prop_assert!((pz - pa).abs() < 1e-12);
                let (px, _) = s.project_onto(qq, MeasurementBasis::PauliX, Outcome::PLUS).unwrap();
                let (pb, _) = s.project_onto(qq, MeasurementBasis::BlochAngle(FRAC_PI_2), Outcome::PLUS).unwrap();
                prop_assert!((px - pb).abs() < 1e-12);
            }
        }
    }
}
