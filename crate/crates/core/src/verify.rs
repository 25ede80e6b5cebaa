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

//! Client-side verification.
//!
//! Three independent checks feed the accept/reject decision:
//! - the CHSH win rate against the threshold `omega_star - epsilon(n)`,
//! - stabilizer syndrome predictions for the two tomography round shapes,
//! - Hofmann-style process-fidelity bounds for the CNOT from classical
//!   truth-table fidelities in complementary bases.

use crate::parties::{RoundShape, RoundTranscript, TomoBasis};
use crate::qsim::{Gate, MeasurementBasis, Outcome, PauliOp, QsimError, StateVector};
use crate::resources::{
    distribute_with_errors, pair_error_distribution, NoiseModel, OwnershipMap, Party,
};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

/// Optimal quantum CHSH win probability, `cos^2(pi/8)`.
pub const OMEGA_STAR: f64 = (2.0 + std::f64::consts::SQRT_2) / 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("CHSH threshold needs at least 2 rounds, got {0}")]
    TooFewRounds(u64),
    #[error("basis {basis} is not checkable in a {kind:?} round")]
    BasisMismatch { kind: TomoKind, basis: TomoBasis },
    #[error("transcript is not a completed {0:?} check round")]
    MalformedTranscript(TomoKind),
    #[error("fidelity inputs must lie in [0, 1], got {0}")]
    FidelityOutOfRange(f64),
    #[error("truth table row {0} has no counts")]
    EmptyRow(usize),
    #[error("ideal table {0:?} is not a permutation of 0..4")]
    NotAPermutation([usize; 4]),
    #[error(transparent)]
    Sim(#[from] QsimError),
}

/// Error threshold `epsilon = (1/(2*sqrt(2))) * sqrt(ln(n)/n)`.
///
/// Natural logarithm: at n = 6000 this evaluates to 0.01346, the value the
/// acceptance threshold is calibrated against.
pub fn chsh_threshold(n: u64) -> Result<f64, VerifyError> {
    if n < 2 {
        return Err(VerifyError::TooFewRounds(n));
    }
    let n = n as f64;
    Ok((n.ln() / n).sqrt() / (2.0 * std::f64::consts::SQRT_2))
}

/// Running CHSH score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshTally {
    pub n: u64,
    pub wins: u64,
}

impl ChshTally {
    pub fn record(&mut self, win: bool) {
        self.n += 1;
        self.wins += u64::from(win);
    }

    pub fn merge(&mut self, other: &ChshTally) {
        self.n += other.n;
        self.wins += other.wins;
    }

    pub fn win_rate(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.wins as f64 / self.n as f64
    }

    pub fn epsilon(&self) -> Result<f64, VerifyError> {
        chsh_threshold(self.n)
    }

    /// The deviation `omega_star - win_rate`; rejecting when this exceeds
    /// epsilon is the same decision as comparing wins to the threshold.
    pub fn estimated_epsilon(&self) -> f64 {
        OMEGA_STAR - self.win_rate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictCause {
    Clean,
    ChshBelowThreshold,
    StabilizerMismatch { round_index: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub cause: VerdictCause,
}

impl Verdict {
    pub fn accept() -> Verdict {
        Verdict { decision: Decision::Accept, cause: VerdictCause::Clean }
    }
}

/// Accept unless the servers failed to win at least `(omega_star - eps) * n`
/// rounds. The boundary is inclusive: winning exactly the threshold count
/// accepts.
pub fn chsh_verdict(tally: &ChshTally) -> Result<Verdict, VerifyError> {
    let eps = tally.epsilon()?;
    let required = (OMEGA_STAR - eps) * tally.n as f64;
    if (tally.wins as f64) < required - 1e-9 {
        Ok(Verdict { decision: Decision::Reject, cause: VerdictCause::ChshBelowThreshold })
    } else {
        Ok(Verdict::accept())
    }
}

/// Which tomography check a round belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TomoKind {
    /// Bob measures a check string; Alice's compute work is being tested.
    State,
    /// Alice measures a check string; Bob's compute work is being tested.
    Process,
}

impl TomoKind {
    /// The server whose reported outcomes are checked against predictions.
    pub fn checked_party(self) -> Party {
        match self {
            TomoKind::State => Party::Bob,
            TomoKind::Process => Party::Alice,
        }
    }
}

/// One deterministic prediction: the product of the reported outcomes at
/// `positions` must equal `expected`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeCheck {
    pub positions: CheckPositions,
    pub expected: Outcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckPositions {
    Single(usize),
    Pair(usize, usize),
}

/// The full set of deterministic predictions for one check round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeExpectation {
    pub kind: TomoKind,
    pub basis: TomoBasis,
    pub checks: Vec<SyndromeCheck>,
}

/// How one stabilizer of the steered state depends on the steering server's
/// reported outcomes: its value equals `sign` times the product of the
/// outcomes at the masked positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SignRule {
    mask: u8,
    sign: i8,
}

impl SignRule {
    fn predict(&self, steering: &[Outcome; 3]) -> Outcome {
        let mut v = self.sign;
        for (i, o) in steering.iter().enumerate() {
            if self.mask & (1 << i) != 0 {
                v *= o.value();
            }
        }
        Outcome::from_value(v).expect("product of outcomes is +/-1")
    }
}

/// Sign rules for the three stabilizers of Alice's steered state in a
/// process-check round (Z on qubit 1, XX and ZZ on the pair 2-3).
#[derive(Clone, Copy, Debug)]
struct ProcessSignTable {
    z1: SignRule,
    x2x3: SignRule,
    z2z3: SignRule,
}

/// Derive the process-check sign table from the simulator instead of writing
/// it down: enumerate Bob's eight outcome patterns on ideal pairs, read off
/// Alice's stabilizer eigenvalues, and fit each to a product of Bob's
/// outcomes. Computed once and cached.
fn process_sign_table() -> &'static ProcessSignTable {
    static TABLE: OnceLock<ProcessSignTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let ownership = OwnershipMap::standard();
        let a = |i: usize| ownership.qubit(Party::Alice, i).unwrap();
        let b = |i: usize| ownership.qubit(Party::Bob, i).unwrap();

        let mut rows: Vec<([Outcome; 3], [f64; 3])> = Vec::with_capacity(8);
        for pattern in 0..8u8 {
            let outcomes = [
                Outcome::from_bit((pattern >> 0) & 1),
                Outcome::from_bit((pattern >> 1) & 1),
                Outcome::from_bit((pattern >> 2) & 1),
            ];
            let mut reg = distribute_with_errors(&ownership, &[PauliOp::I; 3])
                .expect("ideal distribution");
            reg.state
                .apply_gate(Gate::Cnot { control: b(1), target: b(2) })
                .expect("bob cnot");
            let bases =
                [MeasurementBasis::PauliZ, MeasurementBasis::PauliX, MeasurementBasis::PauliZ];
            let mut state = reg.state;
            for i in 0..3 {
                let (p, next) = state.project_onto(b(i), bases[i], outcomes[i]).unwrap();
                assert!(p > 1e-12, "bob outcome pattern has zero weight");
                state = next.unwrap();
            }
            let z1 = state.expectation(&[(a(0), PauliOp::Z)]).unwrap();
            let x2x3 = state.expectation(&[(a(1), PauliOp::X), (a(2), PauliOp::X)]).unwrap();
            let z2z3 = state.expectation(&[(a(1), PauliOp::Z), (a(2), PauliOp::Z)]).unwrap();
            for v in [z1, x2x3, z2z3] {
                assert!((v.abs() - 1.0).abs() < 1e-9, "stabilizer not deterministic: {v}");
            }
            rows.push((outcomes, [z1, x2x3, z2z3]));
        }

        let fit = |col: usize| -> SignRule {
            for mask in 0..8u8 {
                for sign in [1i8, -1] {
                    let rule = SignRule { mask, sign };
                    if rows.iter().all(|(outcomes, vals)| {
                        rule.predict(outcomes).value() as f64 == vals[col].round()
                    }) {
                        return rule;
                    }
                }
            }
            panic!("no product rule fits stabilizer column {col}");
        };
        ProcessSignTable { z1: fit(0), x2x3: fit(1), z2z3: fit(2) }
    })
}

/// Predict the checked server's outcomes from the steering server's reports.
///
/// State checks (Bob measures, Alice steered him): in X1X2Z3 the pair product
/// `b1*b2` must equal `a1*a2` and `b3` must equal `a3`; in Z1Z2Z3 the pair
/// product is +1 for either Bell state and `b3 = a3` again. Process checks
/// use the generated sign table.
pub fn expected_syndromes(
    kind: TomoKind,
    basis: TomoBasis,
    steering: &[Outcome; 3],
) -> Result<SyndromeExpectation, VerifyError> {
    let checks = match (kind, basis) {
        (TomoKind::State, TomoBasis::X1X2Z3) => vec![
            SyndromeCheck { positions: CheckPositions::Pair(0, 1), expected: steering[0] * steering[1] },
            SyndromeCheck { positions: CheckPositions::Single(2), expected: steering[2] },
        ],
        (TomoKind::State, TomoBasis::Z1Z2Z3) => vec![
            SyndromeCheck { positions: CheckPositions::Pair(0, 1), expected: Outcome::PLUS },
            SyndromeCheck { positions: CheckPositions::Single(2), expected: steering[2] },
        ],
        (TomoKind::Process, TomoBasis::Z1X2X3) => {
            let table = process_sign_table();
            vec![
                SyndromeCheck {
                    positions: CheckPositions::Single(0),
                    expected: table.z1.predict(steering),
                },
                SyndromeCheck {
                    positions: CheckPositions::Pair(1, 2),
                    expected: table.x2x3.predict(steering),
                },
            ]
        }
        (TomoKind::Process, TomoBasis::Z1Z2Z3) => {
            let table = process_sign_table();
            vec![
                SyndromeCheck {
                    positions: CheckPositions::Single(0),
                    expected: table.z1.predict(steering),
                },
                SyndromeCheck {
                    positions: CheckPositions::Pair(1, 2),
                    expected: table.z2z3.predict(steering),
                },
            ]
        }
        (kind, basis) => return Err(VerifyError::BasisMismatch { kind, basis }),
    };
    Ok(SyndromeExpectation { kind, basis, checks })
}

/// Evaluate predictions against a reported outcome triple.
pub fn check_outcomes(reported: &[Outcome; 3], expectation: &SyndromeExpectation) -> bool {
    expectation.checks.iter().all(|check| {
        let actual = match check.positions {
            CheckPositions::Single(i) => reported[i],
            CheckPositions::Pair(i, j) => reported[i] * reported[j],
        };
        actual == check.expected
    })
}

/// Check one tomography round transcript; errors if the transcript is not a
/// completed check round of the expected kind.
pub fn check_round(
    transcript: &RoundTranscript,
    expectation: &SyndromeExpectation,
) -> Result<bool, VerifyError> {
    let shape_matches = matches!(
        (expectation.kind, &transcript.plan.shape),
        (TomoKind::State, RoundShape::AliceComputes { state_basis: Some(_) })
            | (TomoKind::Process, RoundShape::BobComputes { process_basis: Some(_) })
    );
    if !shape_matches || !transcript.parity_success {
        return Err(VerifyError::MalformedTranscript(expectation.kind));
    }
    let reported = transcript
        .reported(expectation.kind.checked_party())
        .ok_or(VerifyError::MalformedTranscript(expectation.kind))?;
    Ok(check_outcomes(reported, expectation))
}

/// Process-fidelity sandwich from truth-table fidelities in the two
/// complementary bases: `max(0, f_zz + f_xx - 1) <= F <= min(f_zz, f_xx)`.
pub fn hofmann_bounds(f_zz: f64, f_xx: f64) -> Result<(f64, f64), VerifyError> {
    for f in [f_zz, f_xx] {
        if !(0.0..=1.0).contains(&f) || f.is_nan() {
            return Err(VerifyError::FidelityOutOfRange(f));
        }
    }
    Ok(((f_zz + f_xx - 1.0).max(0.0), f_zz.min(f_xx)))
}

/// Ideal CNOT truth table in the computational basis, as the output index
/// expected for each input index (control bit high).
pub const CNOT_TABLE_Z: [usize; 4] = [0, 1, 3, 2];

/// Ideal CNOT phase-propagation table in the X basis: the target's X value
/// multiplies onto the control, so `(p, q) -> (p xor q, q)` in bit form.
pub const CNOT_TABLE_X: [usize; 4] = [0, 3, 2, 1];

/// Average over the four basis inputs of the fraction of outcomes that match
/// the ideal table. `counts[input][output]` may be shot counts or exact
/// probabilities.
pub fn truth_table_fidelity(
    counts: &[[f64; 4]; 4],
    ideal_table: &[usize; 4],
) -> Result<f64, VerifyError> {
    let mut seen = [false; 4];
    for &t in ideal_table {
        if t >= 4 || seen[t] {
            return Err(VerifyError::NotAPermutation(*ideal_table));
        }
        seen[t] = true;
    }
    let mut total = 0.0;
    for (input, row) in counts.iter().enumerate() {
        if row.iter().any(|&c| c < 0.0 || c.is_nan()) {
            return Err(VerifyError::FidelityOutOfRange(-1.0));
        }
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(VerifyError::EmptyRow(input));
        }
        total += row[ideal_table[input]] / sum;
    }
    Ok(total / 4.0)
}

/// Per-qubit stochastic Pauli error: apply X, Y, Z with the given
/// probabilities, identity otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliNoise {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl PauliNoise {
    pub fn depolarizing(rate: f64) -> PauliNoise {
        PauliNoise { px: rate / 3.0, py: rate / 3.0, pz: rate / 3.0 }
    }

    pub fn identity_probability(&self) -> f64 {
        1.0 - self.px - self.py - self.pz
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let ok = [self.px, self.py, self.pz].iter().all(|p| (0.0..=1.0).contains(p))
            && self.identity_probability() >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(VerifyError::FidelityOutOfRange(self.identity_probability()))
        }
    }

    fn distribution(&self) -> [(PauliOp, f64); 4] {
        [
            (PauliOp::I, self.identity_probability()),
            (PauliOp::X, self.px),
            (PauliOp::Y, self.py),
            (PauliOp::Z, self.pz),
        ]
    }
}

/// Basis in which a CNOT truth table is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthBasis {
    Computational,
    Hadamard,
}

impl TruthBasis {
    pub fn ideal_table(self) -> &'static [usize; 4] {
        match self {
            TruthBasis::Computational => &CNOT_TABLE_Z,
            TruthBasis::Hadamard => &CNOT_TABLE_X,
        }
    }
}

/// Exact outcome distributions for the four basis inputs of a CNOT followed
/// by independent per-qubit stochastic Pauli noise. Rows sum to 1.
pub fn cnot_truth_table_counts(
    control_noise: &PauliNoise,
    target_noise: &PauliNoise,
    basis: TruthBasis,
) -> Result<[[f64; 4]; 4], VerifyError> {
    control_noise.validate()?;
    target_noise.validate()?;
    let c = crate::qsim::QubitLabel::local(0);
    let t = crate::qsim::QubitLabel::local(1);
    let mut counts = [[0.0; 4]; 4];
    for input in 0..4usize {
        let mut base = StateVector::new_register(&[c, t])?;
        // Input index is (control, target) with control as the high bit.
        if input & 0b10 != 0 {
            base.apply_gate(Gate::X(c))?;
        }
        if input & 0b01 != 0 {
            base.apply_gate(Gate::X(t))?;
        }
        if basis == TruthBasis::Hadamard {
            base.apply_gate(Gate::H(c))?;
            base.apply_gate(Gate::H(t))?;
        }
        base.apply_gate(Gate::Cnot { control: c, target: t })?;
        for (ec, wc) in control_noise.distribution() {
            for (et, wt) in target_noise.distribution() {
                let weight = wc * wt;
                if weight == 0.0 {
                    continue;
                }
                let mut branch = base.clone();
                branch.apply_pauli(c, ec)?;
                branch.apply_pauli(t, et)?;
                if basis == TruthBasis::Hadamard {
                    branch.apply_gate(Gate::H(c))?;
                    branch.apply_gate(Gate::H(t))?;
                }
                for (idx, amp) in branch.amplitudes().iter().enumerate() {
                    // Register is little-endian: bit 0 is the control.
                    let out = ((idx & 1) << 1) | ((idx >> 1) & 1);
                    counts[input][out] += weight * amp.norm_sqr();
                }
            }
        }
    }
    Ok(counts)
}

/// Exact per-round CHSH win probability under the given pair noise and
/// per-server extra angle offsets, averaged over questions and orientation.
///
/// Evaluated with exact expectation values: for each Bell-state branch of the
/// noise and each setting pair, the correlator of the two rotated observables
/// gives the win probability directly.
pub fn chsh_win_probability(noise: &NoiseModel, extra: &crate::resources::PerServer<f64>) -> f64 {
    let ownership = OwnershipMap::standard();
    let (qa, qb) = ownership.pair(0).expect("pair 0 exists");
    let mut total = 0.0;
    for (error, weight) in pair_error_distribution(noise) {
        if weight == 0.0 {
            continue;
        }
        let reg = distribute_with_errors(&ownership, &[error, PauliOp::I, PauliOp::I])
            .expect("distribution");
        for orientation in [true, false] {
            for a_question in 0..2u8 {
                for b_question in 0..2u8 {
                    let rotated = |q: u8| {
                        if q == 0 {
                            std::f64::consts::FRAC_PI_4
                        } else {
                            -std::f64::consts::FRAC_PI_4
                        }
                    };
                    let straight = |q: u8| if q == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
                    let (alpha, beta) = if orientation {
                        (rotated(a_question), straight(b_question))
                    } else {
                        (straight(a_question), rotated(b_question))
                    };
                    let alpha = alpha + noise.alice_angle_offset + extra.alice;
                    let beta = beta + noise.bob_angle_offset + extra.bob;
                    let correlator =
                        reg.state.expectation_rotated(&[(qa, alpha), (qb, beta)]).expect("correlator");
                    let win = if a_question & b_question == 1 {
                        (1.0 - correlator) / 2.0
                    } else {
                        (1.0 + correlator) / 2.0
                    };
                    total += weight * win / 8.0;
                }
            }
        }
    }
    total
}
