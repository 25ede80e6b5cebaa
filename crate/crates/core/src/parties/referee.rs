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

//! Round execution: the referee applies each server's actions to the joint
//! register, enforcing that a server only ever touches its own qubits.
//!
//! Within a round Alice's steps run before Bob's. The measurements commute
//! across the ownership split, so the serialized order only fixes the random
//! stream, not the statistics.

use super::{Command, ProtocolError, RoundPlan, ServerStrategy, SubProtocol};
use crate::qsim::{Gate, MeasurementBasis, Outcome, QubitLabel};
use crate::resources::{
    distribute_pairs, effective_basis, normalize_angle, JointRegister, NoiseModel, OwnershipMap,
    Party, PerServer,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One low-level referee step, fully resolved to qubit labels.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    ParityProject(QubitLabel, QubitLabel),
    Cnot { control: QubitLabel, target: QubitLabel },
    Measure { qubit: QubitLabel, basis: MeasurementBasis },
}

/// A server's resolved actions for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionPlan {
    pub steps: Vec<Step>,
    /// Extra Bloch-angle shift this server applies to every measurement.
    pub extra_offset: f64,
}

/// One audited referee operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub party: Party,
    pub op: String,
    pub allowed: bool,
}

/// Raw execution result for one server within a round.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerExec {
    pub outcomes: Vec<Outcome>,
    pub parity_failed: bool,
}

/// Everything the client records about one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round_index: u64,
    pub sub_protocol: SubProtocol,
    pub commands: PerServer<Command>,
    pub outcomes: PerServer<Option<[Outcome; 3]>>,
    pub parity_success: bool,
    pub audit_ok: bool,
    pub plan: RoundPlan,
}

impl RoundTranscript {
    /// Reported outcomes of one server, when the round completed.
    pub fn reported(&self, party: Party) -> Option<&[Outcome; 3]> {
        self.outcomes.get(party).as_ref()
    }
}

/// Resolve a command into concrete referee steps for one server, applying the
/// server's strategy: basis substitutions happen here, report tampering in
/// [`report_transform`].
pub fn plan_actions(
    cmd: &Command,
    party: Party,
    strategy: &ServerStrategy,
    ownership: &OwnershipMap,
) -> Result<ActionPlan, ProtocolError> {
    let mut bases = cmd.bases;
    match strategy {
        ServerStrategy::MeasureX3InsteadOfZ3 => {
            if bases[2] == super::BasisTag::Z {
                bases[2] = super::BasisTag::X;
            }
        }
        ServerStrategy::BellControlInZ if cmd.is_compute() => {
            if bases[1] == super::BasisTag::X {
                bases[1] = super::BasisTag::Z;
            }
        }
        ServerStrategy::FirstQubitBasisSwap if cmd.is_compute() => {
            bases[0] = match bases[0] {
                super::BasisTag::Z => super::BasisTag::X,
                super::BasisTag::X => super::BasisTag::Z,
                other => other,
            };
        }
        _ => {}
    }
    let extra_offset = match strategy {
        ServerStrategy::AngleOffset(delta) => *delta,
        _ => 0.0,
    };

    let mut steps = Vec::with_capacity(cmd.prelude.len() + 3);
    for op in &cmd.prelude {
        steps.push(match *op {
            super::PreludeOp::ParityProject { first, second } => Step::ParityProject(
                ownership.qubit(party, first)?,
                ownership.qubit(party, second)?,
            ),
            super::PreludeOp::Cnot { control, target } => Step::Cnot {
                control: ownership.qubit(party, control)?,
                target: ownership.qubit(party, target)?,
            },
        });
    }
    for (position, tag) in bases.iter().enumerate() {
        steps.push(Step::Measure {
            qubit: ownership.qubit(party, position)?,
            basis: tag.to_basis(),
        });
    }
    Ok(ActionPlan { steps, extra_offset })
}

/// Apply report tampering to the raw outcomes a server measured.
pub fn report_transform(strategy: &ServerStrategy, mut outcomes: Vec<Outcome>) -> Vec<Outcome> {
    if matches!(strategy, ServerStrategy::FlipFirstReport) {
        if let Some(first) = outcomes.first_mut() {
            *first = first.flipped();
        }
    }
    outcomes
}

fn check_owned(
    party: Party,
    label: QubitLabel,
    ownership: &OwnershipMap,
    op: &str,
    audit: &mut Vec<AuditEntry>,
) -> Result<(), ProtocolError> {
    let allowed = ownership.owns(party, label);
    audit.push(AuditEntry { party, op: format!("{op} {label}"), allowed });
    if allowed {
        Ok(())
    } else {
        Err(ProtocolError::AuditViolation { party, label })
    }
}

/// Execute one server's resolved actions on the joint register.
pub(crate) fn execute_actions(
    register: &mut JointRegister,
    party: Party,
    plan: &ActionPlan,
    noise: &NoiseModel,
    audit: &mut Vec<AuditEntry>,
    rng: &mut impl Rng,
) -> Result<ServerExec, ProtocolError> {
    let mut outcomes = Vec::with_capacity(3);
    for step in &plan.steps {
        match step {
            Step::ParityProject(q1, q2) => {
                check_owned(party, *q1, &register.ownership, "parity", audit)?;
                check_owned(party, *q2, &register.ownership, "parity", audit)?;
                if !register.state.project_parity(*q1, *q2, rng)? {
                    return Ok(ServerExec { outcomes, parity_failed: true });
                }
            }
            Step::Cnot { control, target } => {
                check_owned(party, *control, &register.ownership, "cnot", audit)?;
                check_owned(party, *target, &register.ownership, "cnot", audit)?;
                register.state.apply_gate(Gate::Cnot { control: *control, target: *target })?;
            }
            Step::Measure { qubit, basis } => {
                check_owned(party, *qubit, &register.ownership, "measure", audit)?;
                let mut hw = effective_basis(*basis, party, noise);
                if plan.extra_offset != 0.0 {
                    hw = MeasurementBasis::BlochAngle(normalize_angle(
                        hw.angle() + plan.extra_offset,
                    ));
                }
                outcomes.push(register.state.measure(*qubit, hw, rng)?);
            }
        }
    }
    Ok(ServerExec { outcomes, parity_failed: false })
}

/// Run one fully specified round: distribute fresh pairs, execute Alice's
/// command and then Bob's, and assemble the transcript.
///
/// A failed parity projection flags the round; the harness counts it and
/// moves on with fresh pairs next round.
pub fn execute_round(
    round_index: u64,
    alice_cmd: Command,
    bob_cmd: Command,
    plan: RoundPlan,
    strategies: &PerServer<ServerStrategy>,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<RoundTranscript, ProtocolError> {
    let mut register = distribute_pairs(noise, rng)?;
    let mut audit = Vec::new();

    let alice_actions = plan_actions(&alice_cmd, Party::Alice, &strategies.alice, &register.ownership)?;
    let alice_exec =
        execute_actions(&mut register, Party::Alice, &alice_actions, noise, &mut audit, rng)?;
    if alice_exec.parity_failed {
        return Ok(RoundTranscript {
            round_index,
            sub_protocol: plan.sub_protocol,
            commands: PerServer::new(alice_cmd, bob_cmd),
            outcomes: PerServer::new(None, None),
            parity_success: false,
            audit_ok: audit.iter().all(|e| e.allowed),
            plan,
        });
    }

    let bob_actions = plan_actions(&bob_cmd, Party::Bob, &strategies.bob, &register.ownership)?;
    let bob_exec = execute_actions(&mut register, Party::Bob, &bob_actions, noise, &mut audit, rng)?;
    debug_assert!(!bob_exec.parity_failed);

    let alice_reported = report_transform(&strategies.alice, alice_exec.outcomes);
    let bob_reported = report_transform(&strategies.bob, bob_exec.outcomes);
    let triple = |v: Vec<Outcome>| -> Result<[Outcome; 3], ProtocolError> {
        v.try_into().map_err(|_| ProtocolError::MalformedCommand)
    };

    Ok(RoundTranscript {
        round_index,
        sub_protocol: plan.sub_protocol,
        commands: PerServer::new(alice_cmd, bob_cmd),
        outcomes: PerServer::new(Some(triple(alice_reported)?), Some(triple(bob_reported)?)),
        parity_success: true,
        audit_ok: audit.iter().all(|e| e.allowed),
        plan,
    })
}

/// Run one round of the full protocol: sample the sub-protocol, issue
/// commands, and execute them.
pub fn run_round(
    round_index: u64,
    eta: f64,
    strategies: &PerServer<ServerStrategy>,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<RoundTranscript, ProtocolError> {
    let sub = super::sample_subprotocol(eta, rng)?;
    let (alice_cmd, bob_cmd, plan) = super::commands_for(sub, rng);
    execute_round(round_index, alice_cmd, bob_cmd, plan, strategies, noise, rng)
}
