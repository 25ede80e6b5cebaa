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

//! The client, the two server state machines, and the referee between them.
//!
//! The client picks a sub-protocol per round and issues one command to each
//! server. Commands are drawn from a single shared alphabet, and each server's
//! command distribution is exactly the same mixture in every sub-protocol
//! (half compute commands, half measurement commands over a fixed basis
//! family). Sub-protocols differ only in how the two servers' commands are
//! *correlated*, which neither server can observe without communicating:
//!
//! - `Computation` / `ChshTest`: both servers compute together or both
//!   measure together (the measuring rounds carry CHSH questions),
//! - `StateTomo` / `ProcessTomo`: one server computes while the other
//!   measures, which is what makes the stabilizer checks possible.
//!
//! The client tallies every round by the shape that actually occurred: a
//! both-measure round is a CHSH round, a both-compute round produces
//! computation output, and a mixed round whose measurement bases landed on a
//! checkable string becomes a tomography check.

mod referee;

pub use referee::{
    execute_round, plan_actions, report_transform, run_round, ActionPlan, AuditEntry, RoundTranscript,
    ServerExec, Step,
};

use crate::qsim::{MeasurementBasis, Outcome, QsimError, QubitLabel};
use crate::resources::{Party, ResourceError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use thiserror::Error;

/// Which of the four round types the client sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubProtocol {
    Computation,
    ChshTest,
    StateTomo,
    ProcessTomo,
}

impl SubProtocol {
    pub const ALL: [SubProtocol; 4] = [
        SubProtocol::Computation,
        SubProtocol::ChshTest,
        SubProtocol::StateTomo,
        SubProtocol::ProcessTomo,
    ];
}

impl fmt::Display for SubProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SubProtocol::Computation => "computation",
            SubProtocol::ChshTest => "chsh-test",
            SubProtocol::StateTomo => "state-tomo",
            SubProtocol::ProcessTomo => "process-tomo",
        };
        write!(f, "{s}")
    }
}

/// Commandable measurement axis; the whole protocol uses only these four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisTag {
    Z,
    X,
    /// `(Z + X)/sqrt(2)`, Bloch angle +pi/4.
    DiagPlus,
    /// `(Z - X)/sqrt(2)`, Bloch angle -pi/4.
    DiagMinus,
}

impl BasisTag {
    pub fn to_basis(self) -> MeasurementBasis {
        match self {
            BasisTag::Z => MeasurementBasis::PauliZ,
            BasisTag::X => MeasurementBasis::PauliX,
            BasisTag::DiagPlus => MeasurementBasis::BlochAngle(FRAC_PI_4),
            BasisTag::DiagMinus => MeasurementBasis::BlochAngle(-FRAC_PI_4),
        }
    }

    pub fn angle(self) -> f64 {
        match self {
            BasisTag::Z => 0.0,
            BasisTag::X => FRAC_PI_2,
            BasisTag::DiagPlus => FRAC_PI_4,
            BasisTag::DiagMinus => -FRAC_PI_4,
        }
    }
}

/// Gate work a command may ask for before the measurements.
/// Positions are 0-based indices into the server's own qubit triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreludeOp {
    ParityProject { first: usize, second: usize },
    Cnot { control: usize, target: usize },
}

/// One round's instruction for one server: optional prelude gates, then a
/// measurement basis for each of the server's three qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Command {
    pub prelude: Vec<PreludeOp>,
    pub bases: [BasisTag; 3],
}

impl Command {
    /// Alice's compute command: fuse pairs 1 and 2 by parity projection, then
    /// measure the first two qubits in X and the third in Z.
    pub fn computation_a() -> Command {
        Command {
            prelude: vec![PreludeOp::ParityProject { first: 0, second: 1 }],
            bases: [BasisTag::X, BasisTag::X, BasisTag::Z],
        }
    }

    /// Bob's compute command: CNOT from qubit 2 onto qubit 3, then measure
    /// Z on qubit 1, X on qubit 2 (the output), Z on qubit 3.
    pub fn computation_b() -> Command {
        Command {
            prelude: vec![PreludeOp::Cnot { control: 1, target: 2 }],
            bases: [BasisTag::Z, BasisTag::X, BasisTag::Z],
        }
    }

    pub fn measure(bases: [BasisTag; 3]) -> Command {
        Command { prelude: Vec::new(), bases }
    }

    /// Whether this is a compute command (has prelude gate work).
    pub fn is_compute(&self) -> bool {
        !self.prelude.is_empty()
    }
}

/// Which server measures the rotated CHSH bases this round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    AliceRotated,
    BobRotated,
}

/// The client's secret for a CHSH round: the questions and the orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshPlan {
    pub alice_question: u8,
    pub bob_question: u8,
    pub orientation: Orientation,
}

impl ChshPlan {
    /// Win condition `A*B == M xor N` with the outcome-to-bit convention
    /// +1 -> 0, -1 -> 1.
    pub fn wins(&self, alice: Outcome, bob: Outcome) -> bool {
        self.alice_question * self.bob_question == alice.bit() ^ bob.bit()
    }
}

/// Three-qubit basis strings the client can actually check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TomoBasis {
    X1X2Z3,
    Z1Z2Z3,
    Z1X2X3,
}

impl fmt::Display for TomoBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TomoBasis::X1X2Z3 => "X1X2Z3",
            TomoBasis::Z1Z2Z3 => "Z1Z2Z3",
            TomoBasis::Z1X2X3 => "Z1X2X3",
        };
        write!(f, "{s}")
    }
}

/// What actually happened this round, as the client planned it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RoundShape {
    /// Alice ran her compute command and Bob ran his: a computation round.
    BothCompute,
    /// Both servers measured; the round carries CHSH questions.
    BothMeasure(ChshPlan),
    /// Alice computed while Bob measured; checkable when Bob's drawn bases
    /// form one of the two state-check strings.
    AliceComputes { state_basis: Option<TomoBasis> },
    /// Bob computed while Alice measured; checkable when Alice's drawn bases
    /// form one of the two process-check strings.
    BobComputes { process_basis: Option<TomoBasis> },
}

/// Per-round record of the client's choices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub sub_protocol: SubProtocol,
    pub shape: RoundShape,
}

/// How a server behaves when executing commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ServerStrategy {
    /// Execute every command exactly as instructed.
    Honest,
    /// Execute honestly but report the negated outcome for the first qubit.
    FlipFirstReport,
    /// Whenever qubit 3 is commanded in Z, measure X instead.
    MeasureX3InsteadOfZ3,
    /// In compute commands, measure the CNOT control qubit (position 2) in Z
    /// instead of the commanded X.
    BellControlInZ,
    /// In compute commands, swap the qubit-1 basis between Z and X.
    FirstQubitBasisSwap,
    /// Measure every axis shifted by this Bloch angle (radians).
    AngleOffset(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("eta must lie strictly between 0 and 1, got {0}")]
    EtaOutOfRange(f64),
    #[error("{party} command touches non-owned qubit {label}")]
    AuditViolation { party: Party, label: QubitLabel },
    #[error("command must measure exactly 3 qubits")]
    MalformedCommand,
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Sim(#[from] QsimError),
}

/// Draw the sub-protocol for one round: `Computation` with probability `eta`,
/// each test protocol with probability `(1 - eta)/3`.
pub fn sample_subprotocol(eta: f64, rng: &mut impl Rng) -> Result<SubProtocol, ProtocolError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(ProtocolError::EtaOutOfRange(eta));
    }
    if rng.random::<f64>() < eta {
        Ok(SubProtocol::Computation)
    } else {
        Ok(match rng.random_range(0..3u8) {
            0 => SubProtocol::ChshTest,
            1 => SubProtocol::StateTomo,
            _ => SubProtocol::ProcessTomo,
        })
    }
}

fn random_first_basis(rng: &mut impl Rng) -> BasisTag {
    match rng.random_range(0..4u8) {
        0 => BasisTag::Z,
        1 => BasisTag::X,
        2 => BasisTag::DiagPlus,
        _ => BasisTag::DiagMinus,
    }
}

/// Alice's measurement command family: any of the four axes on qubit 1,
/// and either X,X or Z,Z on qubits 2 and 3.
fn alice_measure_command(rng: &mut impl Rng) -> Command {
    let first = random_first_basis(rng);
    let fillers = if rng.random::<bool>() {
        [BasisTag::X, BasisTag::X]
    } else {
        [BasisTag::Z, BasisTag::Z]
    };
    Command::measure([first, fillers[0], fillers[1]])
}

/// Bob's measurement command family: any of the four axes on qubit 1,
/// and either X,Z or Z,Z on qubits 2 and 3.
fn bob_measure_command(rng: &mut impl Rng) -> Command {
    let first = random_first_basis(rng);
    let fillers = if rng.random::<bool>() {
        [BasisTag::X, BasisTag::Z]
    } else {
        [BasisTag::Z, BasisTag::Z]
    };
    Command::measure([first, fillers[0], fillers[1]])
}

/// The process-check string measured by an Alice command, if any.
fn alice_process_basis(cmd: &Command) -> Option<TomoBasis> {
    match cmd.bases {
        [BasisTag::Z, BasisTag::X, BasisTag::X] => Some(TomoBasis::Z1X2X3),
        [BasisTag::Z, BasisTag::Z, BasisTag::Z] => Some(TomoBasis::Z1Z2Z3),
        _ => None,
    }
}

/// The state-check string measured by a Bob command, if any.
fn bob_state_basis(cmd: &Command) -> Option<TomoBasis> {
    match cmd.bases {
        [BasisTag::X, BasisTag::X, BasisTag::Z] => Some(TomoBasis::X1X2Z3),
        [BasisTag::Z, BasisTag::Z, BasisTag::Z] => Some(TomoBasis::Z1Z2Z3),
        _ => None,
    }
}

/// Draw a CHSH-correlated pair of measurement commands.
///
/// The rotated side measures `(Z + (-1)^q X)/sqrt(2)` for its question bit
/// `q`; the other side measures Z for 0 and X for 1. Which side is rotated is
/// chosen uniformly, so each server's qubit-1 axis is uniform over all four
/// tags regardless of orientation.
pub fn chsh_commands(rng: &mut impl Rng) -> (Command, Command, ChshPlan) {
    let orientation = if rng.random::<bool>() {
        Orientation::AliceRotated
    } else {
        Orientation::BobRotated
    };
    let alice_question = u8::from(rng.random::<bool>());
    let bob_question = u8::from(rng.random::<bool>());
    let rotated = |q: u8| if q == 0 { BasisTag::DiagPlus } else { BasisTag::DiagMinus };
    let straight = |q: u8| if q == 0 { BasisTag::Z } else { BasisTag::X };
    let (alice_first, bob_first) = match orientation {
        Orientation::AliceRotated => (rotated(alice_question), straight(bob_question)),
        Orientation::BobRotated => (straight(alice_question), rotated(bob_question)),
    };
    let alice_fillers = if rng.random::<bool>() {
        [BasisTag::X, BasisTag::X]
    } else {
        [BasisTag::Z, BasisTag::Z]
    };
    let bob_fillers = if rng.random::<bool>() {
        [BasisTag::X, BasisTag::Z]
    } else {
        [BasisTag::Z, BasisTag::Z]
    };
    (
        Command::measure([alice_first, alice_fillers[0], alice_fillers[1]]),
        Command::measure([bob_first, bob_fillers[0], bob_fillers[1]]),
        ChshPlan { alice_question, bob_question, orientation },
    )
}

/// Generate the pair of commands for one round of the given sub-protocol.
///
/// Every sub-protocol gives each server a compute command with probability
/// 1/2 and a measurement command (with the server's fixed basis mixture)
/// otherwise, so command distributions are identical across sub-protocols.
/// Only the correlation between the two servers' commands differs.
pub fn commands_for(
    sub: SubProtocol,
    rng: &mut impl Rng,
) -> (Command, Command, RoundPlan) {
    let heads = rng.random::<bool>();
    let (alice, bob, shape) = match (sub, heads) {
        (SubProtocol::Computation, true) | (SubProtocol::ChshTest, false) => {
            (Command::computation_a(), Command::computation_b(), RoundShape::BothCompute)
        }
        (SubProtocol::Computation, false) | (SubProtocol::ChshTest, true) => {
            let (a, b, plan) = chsh_commands(rng);
            (a, b, RoundShape::BothMeasure(plan))
        }
        (SubProtocol::StateTomo, true) | (SubProtocol::ProcessTomo, false) => {
            let b = bob_measure_command(rng);
            let state_basis = bob_state_basis(&b);
            (Command::computation_a(), b, RoundShape::AliceComputes { state_basis })
        }
        (SubProtocol::StateTomo, false) | (SubProtocol::ProcessTomo, true) => {
            let a = alice_measure_command(rng);
            let process_basis = alice_process_basis(&a);
            (a, Command::computation_b(), RoundShape::BobComputes { process_basis })
        }
    };
    (alice, bob, RoundPlan { sub_protocol: sub, shape })
}

/// The measurement command that realizes a given basis string, used to force
/// a particular check round shape when estimating pass rates.
pub fn tomo_command(basis: TomoBasis) -> Command {
    match basis {
        TomoBasis::X1X2Z3 => Command::measure([BasisTag::X, BasisTag::X, BasisTag::Z]),
        TomoBasis::Z1Z2Z3 => Command::measure([BasisTag::Z, BasisTag::Z, BasisTag::Z]),
        TomoBasis::Z1X2X3 => Command::measure([BasisTag::Z, BasisTag::X, BasisTag::X]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn subprotocol_frequencies_at_symmetric_eta() {
        let mut r = rng(1);
        let n = 10_000;
        let mut counts: HashMap<SubProtocol, u32> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_subprotocol(0.25, &mut r).unwrap()).or_default() += 1;
        }
        for sub in SubProtocol::ALL {
            let freq = f64::from(counts[&sub]) / f64::from(n);
            assert!((freq - 0.25).abs() < 0.01, "{sub}: {freq}");
        }
    }

    #[test]
    fn subprotocol_frequencies_at_small_eta() {
        let mut r = rng(2);
        let n = 10_000;
        let mut counts: HashMap<SubProtocol, u32> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_subprotocol(0.1, &mut r).unwrap()).or_default() += 1;
        }
        let comp = f64::from(counts[&SubProtocol::Computation]) / f64::from(n);
        assert!((comp - 0.1).abs() < 0.01, "computation: {comp}");
        for sub in [SubProtocol::ChshTest, SubProtocol::StateTomo, SubProtocol::ProcessTomo] {
            let freq = f64::from(counts[&sub]) / f64::from(n);
            assert!((freq - 0.3).abs() < 0.01, "{sub}: {freq}");
        }
    }

    #[test]
    fn subprotocol_rejects_eta_out_of_range() {
        let mut r = rng(3);
        assert!(sample_subprotocol(1.2, &mut r).is_err());
        assert!(sample_subprotocol(0.0, &mut r).is_err());
        assert!(sample_subprotocol(1.0, &mut r).is_err());
    }

    #[test]
    fn state_tomo_compute_command_is_byte_identical_to_computation() {
        let mut r = rng(4);
        let from_state_tomo = loop {
            let (a, _, plan) = commands_for(SubProtocol::StateTomo, &mut r);
            if matches!(plan.shape, RoundShape::AliceComputes { .. }) {
                break a;
            }
        };
        let from_computation = loop {
            let (a, _, plan) = commands_for(SubProtocol::Computation, &mut r);
            if matches!(plan.shape, RoundShape::BothCompute) {
                break a;
            }
        };
        assert_eq!(
            serde_json::to_string(&from_state_tomo).unwrap(),
            serde_json::to_string(&from_computation).unwrap()
        );
    }

    #[test]
    fn process_tomo_compute_command_is_byte_identical_to_computation() {
        let mut r = rng(5);
        let from_process_tomo = loop {
            let (_, b, plan) = commands_for(SubProtocol::ProcessTomo, &mut r);
            if matches!(plan.shape, RoundShape::BobComputes { .. }) {
                break b;
            }
        };
        assert_eq!(
            serde_json::to_string(&from_process_tomo).unwrap(),
            serde_json::to_string(&Command::computation_b()).unwrap()
        );
    }

    #[test]
    fn chsh_question_zero_rotated_alice_measures_diag_plus() {
        let mut r = rng(6);
        let mut seen = false;
        for _ in 0..200 {
            let (a, _, plan) = chsh_commands(&mut r);
            if plan.orientation == Orientation::AliceRotated && plan.alice_question == 0 {
                assert_eq!(a.bases[0], BasisTag::DiagPlus);
                seen = true;
            }
        }
        assert!(seen);
    }

    #[test]
    fn compute_commands_appear_half_the_time_in_every_subprotocol() {
        let mut r = rng(7);
        let n = 20_000;
        for sub in SubProtocol::ALL {
            let mut alice_compute = 0u32;
            let mut bob_compute = 0u32;
            for _ in 0..n {
                let (a, b, _) = commands_for(sub, &mut r);
                alice_compute += u32::from(a.is_compute());
                bob_compute += u32::from(b.is_compute());
            }
            for count in [alice_compute, bob_compute] {
                let freq = f64::from(count) / f64::from(n);
                assert!((freq - 0.5).abs() < 0.015, "{sub}: {freq}");
            }
        }
    }

    #[test]
    fn chsh_win_condition() {
        let plan = ChshPlan {
            alice_question: 1,
            bob_question: 1,
            orientation: Orientation::AliceRotated,
        };
        // A*B = 1: win requires M xor N = 1, i.e. opposite outcomes.
        assert!(plan.wins(Outcome::PLUS, Outcome::MINUS));
        assert!(!plan.wins(Outcome::PLUS, Outcome::PLUS));

        let plan = ChshPlan { alice_question: 0, ..plan };
        // A*B = 0: win requires equal outcomes.
        assert!(plan.wins(Outcome::MINUS, Outcome::MINUS));
        assert!(!plan.wins(Outcome::MINUS, Outcome::PLUS));
    }

    #[test]
    fn checkable_bases_are_recognized() {
        assert_eq!(
            bob_state_basis(&Command::measure([BasisTag::X, BasisTag::X, BasisTag::Z])),
            Some(TomoBasis::X1X2Z3)
        );
        assert_eq!(
            bob_state_basis(&Command::measure([BasisTag::DiagPlus, BasisTag::X, BasisTag::Z])),
            None
        );
        assert_eq!(
            alice_process_basis(&Command::measure([BasisTag::Z, BasisTag::X, BasisTag::X])),
            Some(TomoBasis::Z1X2X3)
        );
        assert_eq!(
            alice_process_basis(&Command::measure([BasisTag::X, BasisTag::X, BasisTag::X])),
            None
        );
    }
}
