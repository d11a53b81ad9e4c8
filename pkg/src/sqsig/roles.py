"""Signing, verification, and evidence handling for the three participants.

Alice (quantum) signs by encoding g = m XOR k into Bell pairs; Trent and
Bob (classical) verify through Z-basis measurements only. The message
digest check binds the plaintext message Bob received to the message
Trent recovered.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .detection import TrentTransmission, assemble_transmission, build_decoys
from .keys import Bits, KeyStore, compute_g, xor_bits
from .parties import Party
from .quantum import Basis
from .register import QubitRef

HashFn = Callable[[Sequence[int]], Bits]

DEFAULT_DIGEST_BITS = 256


# Bit expansion of every byte value, precomputed once.
_BYTE_BITS = tuple(
    tuple((value >> (7 - i)) & 1 for i in range(8)) for value in range(256)
)


def hash_message(m: Sequence[int]) -> Bits:
    """Fixed public 256-bit digest of a bit string (SHA-256 of its text form)."""
    payload = "".join(str(b) for b in m).encode("ascii")
    digest = hashlib.sha256(payload).digest()
    out: list[int] = []
    for byte in digest:
        out.extend(_BYTE_BITS[byte])
    return tuple(out)


def toy_hash8(m: Sequence[int]) -> Bits:
    """8-bit truncation for property tests that need reachable collisions."""
    return hash_message(m)[:8]


@dataclass
class SignatureBundle:
    message: Bits
    b_sequence: list[QubitRef]

    def __post_init__(self) -> None:
        if len(self.message) != len(self.b_sequence):
            raise ValueError("message and qubit sequence lengths differ")


@dataclass
class Evidence:
    message: Bits
    t_bits: Bits
    b_bits: Bits

    def __post_init__(self) -> None:
        if not len(self.message) == len(self.t_bits) == len(self.b_bits):
            raise ValueError("evidence components must have equal length")


@dataclass
class VerificationOutcome:
    verdict: bool  # True = Yes
    digest: Bits | None = None
    failing_positions: tuple[int, ...] = ()


@dataclass
class AliceSignOutput:
    g: Bits
    transmission: TrentTransmission
    bundle: SignatureBundle


def alice_sign(
    m: Sequence[int],
    store: KeyStore,
    alice: Party,
    rng: np.random.Generator,
    d_z: int | None = None,
    d_x: int | None = None,
) -> AliceSignOutput:
    """Encode g into Bell pairs and build the decoy-laden Trent transmission.

    The message rides in the leading Z-decoys; the Bob halves plus the
    plaintext message form the signature bundle.
    """
    m = tuple(int(b) for b in m)
    n = len(m)
    if d_z is None:
        d_z = n
    if d_x is None:
        d_x = n
    g = compute_g(m, store)
    t_refs: list[QubitRef] = []
    b_refs: list[QubitRef] = []
    for g_i in g:
        t_half, b_half = alice.prepare_bell_pair(g_i)
        t_refs.append(t_half)
        b_refs.append(b_half)
    decoy_refs, records = build_decoys(d_z, d_x, m, rng, alice)
    transmission = assemble_transmission(t_refs, decoy_refs, records, rng)
    bundle = SignatureBundle(message=m, b_sequence=b_refs)
    return AliceSignOutput(g=g, transmission=transmission, bundle=bundle)


def trent_receive(
    carriers: Sequence[QubitRef],
    recovered_m: Sequence[int],
    store: KeyStore,
    trent: Party,
    rng: np.random.Generator,
) -> tuple[Bits, Bits, Bits]:
    """Measure the carrier halves and recompute g from the shared key.

    Returns (T, recovered message, g).
    """
    t_bits = tuple(trent.measure(ref, Basis.Z, rng) for ref in carriers)
    trent.classical_compute()
    g = compute_g(recovered_m, store)
    return t_bits, tuple(recovered_m), g


def bob_measure(
    bundle_qubits: Sequence[QubitRef], bob: Party, rng: np.random.Generator
) -> Bits:
    """Z-measure every signature qubit in order."""
    return tuple(bob.measure(ref, Basis.Z, rng) for ref in bundle_qubits)


def trent_verify(g: Sequence[int], t: Sequence[int], b: Sequence[int]) -> VerificationOutcome:
    """Position i passes iff b_i = t_i XOR g_i; verdict Yes iff all pass.

    The digest is left unset; the caller attaches it on Yes once the
    message is known.
    """
    if not len(g) == len(t) == len(b):
        raise ValueError("g, T, B must have equal length")
    failing = tuple(
        i for i, (gi, ti, bi) in enumerate(zip(g, t, b)) if bi != (ti ^ gi)
    )
    return VerificationOutcome(verdict=not failing, failing_positions=failing)


def trent_conclude(
    g: Sequence[int],
    t: Sequence[int],
    b: Sequence[int],
    m: Sequence[int],
    hash_fn: HashFn = hash_message,
) -> tuple[VerificationOutcome, Evidence | None]:
    """Full verification step: verdict, digest on Yes, and evidence retention."""
    outcome = trent_verify(g, t, b)
    if outcome.verdict:
        outcome.digest = hash_fn(m)
        evidence = Evidence(message=tuple(m), t_bits=tuple(t), b_bits=tuple(b))
        return outcome, evidence
    return outcome, None


def bob_accept(
    m_received: Sequence[int],
    outcome: VerificationOutcome,
    hash_fn: HashFn = hash_message,
) -> bool:
    """Accept iff Trent said Yes and the digest matches Bob's own hash of m."""
    if not outcome.verdict or outcome.digest is None:
        return False
    return hash_fn(m_received) == outcome.digest
