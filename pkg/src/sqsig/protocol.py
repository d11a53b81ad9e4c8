"""End-to-end orchestration of one signing + verification round."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adversary import AttackStrategy, Channel, NoAttack, TapPoint
from .detection import (
    DetectionMode,
    DetectionReport,
    Verdict,
    loc_announcement_bits,
    permutation_announcement_bits,
    run_detection_round,
)
from .keys import Bits, KeyStore, keygen_init
from .parties import Party, classical_party, quantum_party
from .roles import (
    HashFn,
    alice_sign,
    bob_accept,
    bob_measure,
    Evidence,
    hash_message,
    trent_conclude,
    trent_receive,
    VerificationOutcome,
)


def key_budget(n: int, d_z: int, d_x: int, mode: DetectionMode) -> int:
    """Key bits one run consumes: the signing pad plus inline OTP traffic."""
    budget = n
    if mode is DetectionMode.IMPROVED_INLINE_OTP:
        budget += loc_announcement_bits(d_z, d_x)
        budget += permutation_announcement_bits(d_z + d_x)
    return budget


@dataclass
class TrialResult:
    detection: DetectionReport
    aborted: bool
    outcome: VerificationOutcome | None
    accepted: bool
    evidence: Evidence | None
    g_alice: Bits
    g_trent: Bits | None
    t_bits: Bits | None
    b_bits: Bits | None
    recovered_m: Bits | None
    alice: Party
    bob: Party
    trent: Party
    store: KeyStore
    transcript: list | None


def run_protocol_round(
    n: int,
    message: Bits,
    mode: DetectionMode,
    strategy: AttackStrategy | None,
    rng: np.random.Generator,
    d_z: int | None = None,
    d_x: int | None = None,
    threshold: float = 0.0,
    noise_p: float = 0.0,
    hash_fn: HashFn = hash_message,
    store: KeyStore | None = None,
    record_transcript: bool = True,
) -> TrialResult:
    """One full protocol run under the given detection mode and attack.

    Signing, the eavesdropping-detection round on the Trent leg, carrier
    measurement, the Bob leg, and both verification steps. Aborted
    detection short-circuits the rest of the round.
    """
    if len(message) != n:
        raise ValueError("message length must equal n")
    if d_z is None:
        d_z = n
    if d_x is None:
        d_x = n
    strategy = strategy or NoAttack()
    alice = quantum_party("alice")
    bob = classical_party("bob")
    trent = classical_party("trent")
    transcript: list | None = [] if record_transcript else None
    channel = Channel(strategy, noise_p=noise_p, transcript=transcript)
    if store is None:
        store = keygen_init(key_budget(n, d_z, d_x, mode), rng)

    signed = alice_sign(message, store, alice, rng, d_z=d_z, d_x=d_x)
    detection = run_detection_round(
        mode, channel, signed.transmission, threshold, alice, trent, store, rng
    )
    if detection.report.verdict is Verdict.ABORT:
        return TrialResult(
            detection=detection.report, aborted=True, outcome=None,
            accepted=False, evidence=None, g_alice=signed.g, g_trent=None,
            t_bits=None, b_bits=None, recovered_m=None,
            alice=alice, bob=bob, trent=trent, store=store,
            transcript=transcript,
        )

    if mode is DetectionMode.DIRECT_REFLECTION:
        # Reflected decoys cannot carry the message; it travels in clear.
        recovered_m = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "message_to_trent", message, rng
        )
    else:
        recovered_m = detection.recovered_m

    t_bits, recovered_m, g_trent = trent_receive(
        detection.carriers, recovered_m, store, trent, rng
    )

    m_received = channel.send_classical(
        TapPoint.ALICE_TO_BOB_CLASSICAL, "message", message, rng
    )
    b_refs = channel.send_qubits(
        TapPoint.ALICE_TO_BOB_QUANTUM, signed.bundle.b_sequence, rng
    )
    b_bits = bob_measure(b_refs, bob, rng)
    b_received = channel.send_classical(
        TapPoint.BOB_TO_TRENT_CLASSICAL, "b_string", b_bits, rng
    )

    outcome, evidence = trent_conclude(
        g_trent, t_bits, b_received, recovered_m, hash_fn
    )
    accepted = bob_accept(m_received, outcome, hash_fn)
    if transcript is not None:
        digest = "".join(str(b) for b in outcome.digest) if outcome.digest else ""
        transcript.append({"event": "verdict",
                           "verdict": "yes" if outcome.verdict else "no",
                           "digest": digest})
        transcript.append({"event": "bob_decision",
                           "accepted": "accept" if accepted else "reject"})

    return TrialResult(
        detection=detection.report, aborted=False, outcome=outcome,
        accepted=accepted, evidence=evidence, g_alice=signed.g,
        g_trent=g_trent, t_bits=t_bits, b_bits=b_bits,
        recovered_m=recovered_m, alice=alice, bob=bob, trent=trent,
        store=store, transcript=transcript,
    )
