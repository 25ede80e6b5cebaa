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

//! Shared entanglement between the two servers.
//!
//! The referee prepares three EPR pairs per round, splits them between Alice
//! and Bob according to a fixed ownership map, and optionally degrades them
//! with Bell-diagonal noise (a random Pauli on Bob's half of each pair with
//! probability `1 - werner_p`). Per-server angle offsets model miscalibrated
//! measurement hardware and apply to every measurement that server performs.

use crate::qsim::{Gate, MeasurementBasis, Owner, PauliOp, QsimError, QubitLabel, StateVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

/// Number of EPR pairs shared per round.
pub const PAIR_COUNT: usize = 3;

/// One of the two quantum servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl From<Party> for Owner {
    fn from(p: Party) -> Owner {
        match p {
            Party::Alice => Owner::Alice,
            Party::Bob => Owner::Bob,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => write!(f, "alice"),
            Party::Bob => write!(f, "bob"),
        }
    }
}

/// A value per server, addressable by [`Party`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerServer<T> {
    pub alice: T,
    pub bob: T,
}

impl<T> PerServer<T> {
    pub fn new(alice: T, bob: T) -> Self {
        PerServer { alice, bob }
    }

    pub fn get(&self, party: Party) -> &T {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn get_mut(&mut self, party: Party) -> &mut T {
        match party {
            Party::Alice => &mut self.alice,
            Party::Bob => &mut self.bob,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResourceError {
    #[error("werner_p must lie in [0, 1], got {0}")]
    WernerOutOfRange(f64),
    #[error("angle offset must lie in (-pi, pi], got {0}")]
    OffsetOutOfRange(f64),
    #[error("pair index {0} out of range")]
    BadPair(usize),
    #[error(transparent)]
    Sim(#[from] QsimError),
}

/// Fixed assignment of the six qubits to the two servers.
///
/// Pair `i` (1-based) is split as `iA` for Alice and `iB` for Bob.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipMap {
    alice: [QubitLabel; PAIR_COUNT],
    bob: [QubitLabel; PAIR_COUNT],
}

impl OwnershipMap {
    pub fn standard() -> Self {
        OwnershipMap {
            alice: [QubitLabel::alice(1), QubitLabel::alice(2), QubitLabel::alice(3)],
            bob: [QubitLabel::bob(1), QubitLabel::bob(2), QubitLabel::bob(3)],
        }
    }

    pub fn qubits(&self, party: Party) -> &[QubitLabel; PAIR_COUNT] {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    /// Label of `party`'s qubit at the given 0-based position.
    pub fn qubit(&self, party: Party, position: usize) -> Result<QubitLabel, ResourceError> {
        self.qubits(party)
            .get(position)
            .copied()
            .ok_or(ResourceError::BadPair(position))
    }

    /// Both halves of pair `i` (0-based).
    pub fn pair(&self, i: usize) -> Result<(QubitLabel, QubitLabel), ResourceError> {
        if i >= PAIR_COUNT {
            return Err(ResourceError::BadPair(i));
        }
        Ok((self.alice[i], self.bob[i]))
    }

    pub fn owns(&self, party: Party, label: QubitLabel) -> bool {
        self.qubits(party).contains(&label)
    }

    /// Register label order: Alice's qubits first, then Bob's.
    pub fn register_labels(&self) -> Vec<QubitLabel> {
        self.alice.iter().chain(self.bob.iter()).copied().collect()
    }
}

impl Default for OwnershipMap {
    fn default() -> Self {
        OwnershipMap::standard()
    }
}

/// Noise applied when distributing pairs and measuring.
///
/// Each pair survives as the ideal Phi+ with probability `werner_p`;
/// otherwise a uniformly random Pauli from {X, Y, Z} lands on Bob's half,
/// producing one of the other three Bell states. Angle offsets (radians,
/// Bloch sphere) shift every measurement axis of the corresponding server.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub werner_p: f64,
    pub alice_angle_offset: f64,
    pub bob_angle_offset: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel { werner_p: 1.0, alice_angle_offset: 0.0, bob_angle_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        if !(0.0..=1.0).contains(&self.werner_p) || self.werner_p.is_nan() {
            return Err(ResourceError::WernerOutOfRange(self.werner_p));
        }
        for offset in [self.alice_angle_offset, self.bob_angle_offset] {
            if !(-PI < offset && offset <= PI) {
                return Err(ResourceError::OffsetOutOfRange(offset));
            }
        }
        Ok(())
    }

    pub fn offset(&self, party: Party) -> f64 {
        match party {
            Party::Alice => self.alice_angle_offset,
            Party::Bob => self.bob_angle_offset,
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

/// The referee's view of the shared state plus the ownership map.
///
/// Servers never see this; they only receive commands and report outcomes.
#[derive(Clone, Debug)]
pub struct JointRegister {
    pub state: StateVector,
    pub ownership: OwnershipMap,
}

/// The Pauli error inserted on Bob's half of each pair, if any.
/// Exposed so exact enumeration can weight the same branches the sampler draws.
pub fn pair_error_distribution(noise: &NoiseModel) -> [(PauliOp, f64); 4] {
    let p = noise.werner_p;
    let q = (1.0 - p) / 3.0;
    [(PauliOp::I, p), (PauliOp::X, q), (PauliOp::Y, q), (PauliOp::Z, q)]
}

/// Prepare the three shared pairs with the given noise model.
pub fn distribute_pairs(
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<JointRegister, ResourceError> {
    noise.validate()?;
    let ownership = OwnershipMap::standard();
    let mut errors = [PauliOp::I; PAIR_COUNT];
    for e in &mut errors {
        if rng.random::<f64>() >= noise.werner_p {
            *e = match rng.random_range(0..3) {
                0 => PauliOp::X,
                1 => PauliOp::Y,
                _ => PauliOp::Z,
            };
        }
    }
    distribute_with_errors(&ownership, &errors)
}

/// Deterministic variant used by exact enumeration: the Pauli landing on
/// Bob's half of each pair is given instead of sampled.
pub fn distribute_with_errors(
    ownership: &OwnershipMap,
    errors: &[PauliOp; PAIR_COUNT],
) -> Result<JointRegister, ResourceError> {
    let mut state = StateVector::new_register(&ownership.register_labels())?;
    for i in 0..PAIR_COUNT {
        let (a, b) = ownership.pair(i)?;
        state.apply_gate(Gate::H(a))?;
        state.apply_gate(Gate::Cnot { control: a, target: b })?;
        state.apply_pauli(b, errors[i])?;
    }
    Ok(JointRegister { state, ownership: ownership.clone() })
}

/// The basis a server's hardware actually measures when commanded `basis`.
///
/// Pauli bases are first converted to their Bloch-angle equivalents, then the
/// server's offset is added and the result normalized into (-pi, pi].
pub fn effective_basis(basis: MeasurementBasis, party: Party, noise: &NoiseModel) -> MeasurementBasis {
    MeasurementBasis::BlochAngle(normalize_angle(basis.angle() + noise.offset(party)))
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}
