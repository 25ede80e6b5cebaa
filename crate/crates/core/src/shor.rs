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

//! Classical side of period finding for N = 15, a = 11.
//!
//! Only this instance has a compiled quantum circuit: after dropping the
//! inverse QFT (unnecessary for power-of-two orders) and the trivially
//! evolving qubits, three qubits and three gates remain. One output qubit is
//! measured; the second output-register qubit stays |0> and enters the
//! classical post-processing as a known redundant bit.

use crate::qsim::{Gate, MeasurementBasis, Outcome, QubitLabel, StateVector};
use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShorError {
    #[error("N must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("base must satisfy 2 <= a < N, got a = {a}, N = {n}")]
    BaseOutOfRange { a: u64, n: u64 },
    #[error("gcd({a}, {n}) = {gcd} is already a factor; no quantum step needed")]
    NotCoprime { a: u64, n: u64, gcd: u64 },
}

/// A validated factoring instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoringInstance {
    pub n: u64,
    pub base: u64,
    /// Output-register width in bits: one measured qubit plus the redundant
    /// |0> qubit.
    pub output_bits: u32,
}

impl FactoringInstance {
    /// The compiled instance from the demonstration.
    pub fn shor_15() -> FactoringInstance {
        validate_instance(15, 11).expect("15/11 is a valid instance")
    }
}

/// Validate `(N, a)`: the base must be coprime to N (otherwise the gcd is
/// already a factor and the caller should take it directly).
pub fn validate_instance(n: u64, a: u64) -> Result<FactoringInstance, ShorError> {
    if n < 2 {
        return Err(ShorError::BadModulus(n));
    }
    if a < 2 || a >= n {
        return Err(ShorError::BaseOutOfRange { a, n });
    }
    let gcd = a.gcd(&n);
    if gcd != 1 {
        return Err(ShorError::NotCoprime { a, n, gcd });
    }
    Ok(FactoringInstance { n, base: a, output_bits: 2 })
}

/// Smallest positive `r` with `a^r = 1 (mod N)`, by brute force. This is the
/// test oracle the quantum readout is checked against.
pub fn classical_order(a: u64, n: u64) -> Result<u64, ShorError> {
    if a.gcd(&n) != 1 {
        return Err(ShorError::NotCoprime { a, n, gcd: a.gcd(&n) });
    }
    let mut acc = a % n;
    let mut r = 1;
    while acc != 1 {
        acc = acc * a % n;
        r += 1;
    }
    Ok(r)
}

fn mod_pow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut acc: u64 = 1;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = (u128::from(acc) * u128::from(base) % u128::from(modulus)) as u64;
        }
        base = (u128::from(base) * u128::from(base) % u128::from(modulus)) as u64;
        exp >>= 1;
    }
    acc
}

/// What the quantum servers hand back for one computation round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodReadout {
    pub measured_bit: u8,
    /// Known constants of the compiled circuit, never measured.
    pub redundant_bits: Vec<u8>,
}

impl PeriodReadout {
    pub fn new(measured_bit: u8) -> PeriodReadout {
        PeriodReadout { measured_bit, redundant_bits: vec![0] }
    }
}

/// Result of classical post-processing of one readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShorOutcome {
    Success { factors: (u64, u64) },
    Failure,
}

/// Assemble the phase numerator from the readout (measured bit is the most
/// significant, redundant bits fill the low end), infer the period, and take
/// gcds. A zero numerator carries no period information and is a failure,
/// not an error.
pub fn postprocess(readout: &PeriodReadout, instance: &FactoringInstance) -> ShorOutcome {
    let m = 1 + readout.redundant_bits.len() as u32;
    debug_assert_eq!(m, instance.output_bits);
    let mut k = u64::from(readout.measured_bit);
    for &bit in &readout.redundant_bits {
        k = (k << 1) | u64::from(bit);
    }
    if k == 0 {
        return ShorOutcome::Failure;
    }
    let denom = 1u64 << m;
    let r = denom / k.gcd(&denom);
    if r % 2 != 0 {
        return ShorOutcome::Failure;
    }
    let half = mod_pow(instance.base, r / 2, instance.n);
    if half == instance.n - 1 {
        return ShorOutcome::Failure;
    }
    let f1 = (half + instance.n - 1).gcd(&instance.n);
    let f2 = (half + 1).gcd(&instance.n);
    if f1 <= 1 || f2 <= 1 || f1 >= instance.n || f2 >= instance.n {
        return ShorOutcome::Failure;
    }
    ShorOutcome::Success { factors: (f1.min(f2), f1.max(f2)) }
}

/// The compiled three-qubit circuit and its designated output.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledCircuit {
    pub qubits: [QubitLabel; 3],
    pub gates: Vec<Gate>,
    pub output_qubit: QubitLabel,
    pub output_basis: MeasurementBasis,
}

/// The compiled circuit for (15, 11): `H q1; CNOT q1->q2; CNOT q2->q3`, with
/// the period read out as the X-basis outcome of q2. The wiring matches the
/// two-server split, where the first CNOT is done by fusing entangled pairs
/// and the second by the remote server.
pub fn compiled_circuit() -> CompiledCircuit {
    let q1 = QubitLabel::local(1);
    let q2 = QubitLabel::local(2);
    let q3 = QubitLabel::local(3);
    CompiledCircuit {
        qubits: [q1, q2, q3],
        gates: vec![
            Gate::H(q1),
            Gate::Cnot { control: q1, target: q2 },
            Gate::Cnot { control: q2, target: q3 },
        ],
        output_qubit: q2,
        output_basis: MeasurementBasis::PauliX,
    }
}

/// Run the compiled circuit once on the local simulator and return the
/// output bit.
pub fn sample_compiled_output(rng: &mut impl Rng) -> u8 {
    let circuit = compiled_circuit();
    let mut state = StateVector::new_register(&circuit.qubits).expect("three local qubits");
    for gate in &circuit.gates {
        state.apply_gate(*gate).expect("compiled gates are valid");
    }
    state
        .measure(circuit.output_qubit, circuit.output_basis, rng)
        .expect("output qubit exists")
        .bit()
}

/// Map a reported output outcome to a readout under the fixed +1 -> 0
/// convention.
pub fn readout_from_outcome(outcome: Outcome) -> PeriodReadout {
    PeriodReadout::new(outcome.bit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instance_validation() {
        assert!(validate_instance(15, 11).is_ok());
        assert!(validate_instance(15, 14).is_ok());
        assert!(matches!(
            validate_instance(15, 3),
            Err(ShorError::NotCoprime { gcd: 3, .. })
        ));
        assert!(validate_instance(15, 16).is_err());
        assert!(validate_instance(1, 1).is_err());
    }

    #[test]
    fn orders_by_brute_force() {
        assert_eq!(classical_order(11, 15).unwrap(), 2);
        assert_eq!(classical_order(2, 15).unwrap(), 4);
        assert_eq!(classical_order(14, 15).unwrap(), 2);
        assert!(classical_order(6, 15).is_err());
    }

    #[test]
    fn postprocess_one_yields_the_factors() {
        let inst = FactoringInstance::shor_15();
        match postprocess(&PeriodReadout::new(1), &inst) {
            ShorOutcome::Success { factors } => {
                assert_eq!(factors, (3, 5));
                assert_eq!(factors.0 * factors.1, 15);
            }
            ShorOutcome::Failure => panic!("output 1 must factor"),
        }
    }

    #[test]
    fn postprocess_zero_is_a_failure() {
        let inst = FactoringInstance::shor_15();
        assert_eq!(postprocess(&PeriodReadout::new(0), &inst), ShorOutcome::Failure);
    }

    #[test]
    fn implied_period_agrees_with_the_classical_oracle() {
        // Output 1 implies k = 2, so r = 4 / gcd(2, 4) = 2.
        let inst = FactoringInstance::shor_15();
        assert_eq!(classical_order(inst.base, inst.n).unwrap(), 2);
        let readout = PeriodReadout::new(1);
        let mut k = u64::from(readout.measured_bit);
        for &b in &readout.redundant_bits {
            k = (k << 1) | u64::from(b);
        }
        let r = 4 / k.gcd(&4);
        assert_eq!(r, 2);
    }

    #[test]
    fn compiled_output_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000u32;
        let mut ones = 0u32;
        for _ in 0..n {
            ones += u32::from(sample_compiled_output(&mut rng));
        }
        let freq = f64::from(ones) / f64::from(n);
        assert!((freq - 0.5).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn every_success_multiplies_back() {
        let inst = FactoringInstance::shor_15();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let bit = sample_compiled_output(&mut rng);
            if let ShorOutcome::Success { factors } = postprocess(&PeriodReadout::new(bit), &inst) {
                assert_eq!(factors.0 * factors.1, inst.n);
                assert!(factors.0 > 1 && factors.1 > 1);
            }
        }
    }
}
