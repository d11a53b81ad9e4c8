"""Decoy-based eavesdropping detection rounds.

Implements the improved two-sided detection round (receiver checks the
Z-basis decoys immediately, then returns all decoys reordered for the
sender's final check), its one-time-pad inline variant that collapses the
four classical messages into the quantum transmissions, and two
deliberately vulnerable baseline modes kept for attack demonstrations:
direct reflection and measure-then-return without comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .adversary import Channel, TapPoint
from .keys import Bits, KeyStore, otp_decrypt, otp_encrypt
from .parties import Party
from .quantum import Basis
from .register import QubitRef


class DetectionMode(str, Enum):
    IMPROVED = "improved"
    IMPROVED_INLINE_OTP = "improved_inline_otp"
    DIRECT_REFLECTION = "direct_reflection"
    MEASURE_THEN_RETURN = "measure_then_return"


class Verdict(str, Enum):
    CONTINUE = "continue"
    ABORT = "abort"


class DetectionAbort(RuntimeError):
    """Raised when a checked error rate exceeds the threshold."""


@dataclass
class DecoyRecord:
    position: int  # index in the transmitted sequence; -1 until interleaved
    basis: Basis
    bit: int
    embeds_message_bit: int | None = None

    def __post_init__(self) -> None:
        if self.basis is Basis.X and self.embeds_message_bit is not None:
            raise ValueError("only Z-basis decoys may carry message bits")


@dataclass
class LocTable:
    entries: list[DecoyRecord] = field(default_factory=list)

    def validate(self) -> None:
        positions = [e.position for e in self.entries]
        if positions != sorted(set(positions)):
            raise ValueError("LOC positions must be strictly increasing and unique")

    def positions(self) -> tuple[int, ...]:
        return tuple(e.position for e in self.entries)


@dataclass
class PermutationRecord:
    mapping: tuple[int, ...]  # mapping[j] = original index of j-th returned decoy

    def __post_init__(self) -> None:
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError("mapping is not a bijection")

    def inverse(self) -> tuple[int, ...]:
        inv = [0] * len(self.mapping)
        for j, orig in enumerate(self.mapping):
            inv[orig] = j
        return tuple(inv)


@dataclass
class DetectionReport:
    mode: DetectionMode
    threshold: float
    bob_z_errors: int = 0
    bob_z_checked: int = 0
    alice_z_errors: int = 0
    alice_z_checked: int = 0
    alice_x_errors: int = 0
    alice_x_checked: int = 0
    verdict: Verdict = Verdict.CONTINUE

    @staticmethod
    def _rate(errors: int, checked: int) -> float:
        return errors / checked if checked else 0.0

    def bob_z_rate(self) -> float:
        return self._rate(self.bob_z_errors, self.bob_z_checked)

    def alice_z_rate(self) -> float:
        return self._rate(self.alice_z_errors, self.alice_z_checked)

    def alice_x_rate(self) -> float:
        return self._rate(self.alice_x_errors, self.alice_x_checked)


@dataclass
class TrentTransmission:
    """Interleaved carrier + decoy sequence plus the sender's private records."""

    sequence: list[QubitRef]
    records: list[DecoyRecord]  # all decoys, sorted by position
    loc_z: LocTable
    loc_x: LocTable
    decoy_positions: tuple[int, ...]
    carrier_positions: tuple[int, ...]
    embedded_len: int


@dataclass
class DetectionResult:
    report: DetectionReport
    carriers: list[QubitRef]
    recovered_m: Bits | None
    receiver_z_bits: dict[int, int]  # position -> receiver's measured bit


# ---------------------------------------------------------------------------
# Wire encodings (bit-exact external interface)
# ---------------------------------------------------------------------------

POSITION_FIELD_BITS = 16
RECORD_BITS = POSITION_FIELD_BITS + 2


@lru_cache(maxsize=None)
def _int_to_bits(value: int, width: int) -> Bits:
    if value < 0 or value >= (1 << width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def _bits_to_int(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def encode_loc(entries: Sequence[DecoyRecord], include_values: bool = True) -> Bits:
    """18 bits per decoy: 16-bit big-endian position, basis bit (0=Z), value."""
    out: list[int] = []
    for e in sorted(entries, key=lambda r: r.position):
        out.extend(_int_to_bits(e.position, POSITION_FIELD_BITS))
        out.append(0 if e.basis is Basis.Z else 1)
        out.append(e.bit if include_values else 0)
    return tuple(out)


def decode_loc(bits: Sequence[int]) -> list[DecoyRecord]:
    if len(bits) % RECORD_BITS != 0:
        raise ValueError("LOC payload length is not a multiple of 18 bits")
    entries = []
    for i in range(0, len(bits), RECORD_BITS):
        chunk = bits[i:i + RECORD_BITS]
        pos = _bits_to_int(chunk[:POSITION_FIELD_BITS])
        basis = Basis.Z if chunk[POSITION_FIELD_BITS] == 0 else Basis.X
        entries.append(DecoyRecord(position=pos, basis=basis,
                                   bit=chunk[POSITION_FIELD_BITS + 1]))
    return entries


def encode_permutation(perm: PermutationRecord) -> Bits:
    """d entries of 16-bit big-endian original indices, in returned order."""
    out: list[int] = []
    for orig in perm.mapping:
        out.extend(_int_to_bits(orig, POSITION_FIELD_BITS))
    return tuple(out)


def decode_permutation(bits: Sequence[int]) -> PermutationRecord:
    if len(bits) % POSITION_FIELD_BITS != 0:
        raise ValueError("permutation payload length is not a multiple of 16 bits")
    d = len(bits) // POSITION_FIELD_BITS
    mapping = []
    for i in range(0, len(bits), POSITION_FIELD_BITS):
        value = _bits_to_int(bits[i:i + POSITION_FIELD_BITS])
        if value >= d:
            raise ValueError(f"permutation entry {value} out of range for d={d}")
        mapping.append(value)
    return PermutationRecord(mapping=tuple(mapping))


def loc_announcement_bits(d_z: int, d_x: int) -> int:
    """Key budget for the inline-OTP announcement of all decoy records."""
    return RECORD_BITS * (d_z + d_x)


def permutation_announcement_bits(d_total: int) -> int:
    return POSITION_FIELD_BITS * d_total


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def build_decoys(
    d_z: int,
    d_x: int,
    embedded_m: Sequence[int] | None,
    rng: np.random.Generator,
    preparer: Party,
) -> tuple[list[QubitRef], list[DecoyRecord]]:
    """Prepare the mixed decoy sequence D, message bits leading the Z-decoys.

    Returned records are in decoy-sequence order with position unset (-1);
    interleave() assigns transmitted positions.
    """
    embedded = tuple(embedded_m) if embedded_m is not None else ()
    if len(embedded) > d_z:
        raise ValueError(
            f"cannot embed {len(embedded)} message bits into {d_z} Z-decoys"
        )
    bases = [Basis.Z] * d_z + [Basis.X] * d_x
    order = rng.permutation(d_z + d_x)
    fill_bits = rng.integers(0, 2, size=d_z + d_x).tolist()
    refs: list[QubitRef] = []
    records: list[DecoyRecord] = []
    z_seen = 0
    for slot, idx in enumerate(order):
        basis = bases[idx]
        embeds = None
        if basis is Basis.Z and z_seen < len(embedded):
            bit = embedded[z_seen]
            embeds = z_seen
            z_seen += 1
        else:
            bit = fill_bits[slot]
        refs.append(preparer.prepare(basis, bit))
        records.append(DecoyRecord(position=-1, basis=basis, bit=bit,
                                   embeds_message_bit=embeds))
    return refs, records


def interleave(
    carriers: Sequence[QubitRef],
    decoys: Sequence[QubitRef],
    rng: np.random.Generator,
) -> tuple[list[QubitRef], tuple[int, ...], tuple[int, ...]]:
    """Insert decoys uniformly among the carriers, preserving both orders.

    Returns (sequence, decoy_positions, carrier_positions), positions in
    the order of the respective input subsequences.
    """
    n, d = len(carriers), len(decoys)
    total = n + d
    if d:
        decoy_pos = sorted(int(p) for p in rng.choice(total, size=d, replace=False))
    else:
        decoy_pos = []
    decoy_set = set(decoy_pos)
    carrier_pos = [p for p in range(total) if p not in decoy_set]
    sequence: list[QubitRef] = [None] * total  # type: ignore[list-item]
    for p, ref in zip(decoy_pos, decoys):
        sequence[p] = ref
    for p, ref in zip(carrier_pos, carriers):
        sequence[p] = ref
    return sequence, tuple(decoy_pos), tuple(carrier_pos)


def assemble_transmission(
    carriers: Sequence[QubitRef],
    decoy_refs: Sequence[QubitRef],
    records: Sequence[DecoyRecord],
    rng: np.random.Generator,
) -> TrentTransmission:
    sequence, decoy_pos, carrier_pos = interleave(carriers, decoy_refs, rng)
    positioned = []
    for pos, rec in zip(decoy_pos, records):
        positioned.append(DecoyRecord(position=pos, basis=rec.basis, bit=rec.bit,
                                      embeds_message_bit=rec.embeds_message_bit))
    positioned.sort(key=lambda r: r.position)
    loc_z = LocTable([r for r in positioned if r.basis is Basis.Z])
    loc_x = LocTable([r for r in positioned if r.basis is Basis.X])
    loc_z.validate()
    loc_x.validate()
    embedded_len = sum(1 for r in positioned if r.embeds_message_bit is not None)
    return TrentTransmission(
        sequence=list(sequence),
        records=positioned,
        loc_z=loc_z,
        loc_x=loc_x,
        decoy_positions=decoy_pos,
        carrier_positions=carrier_pos,
        embedded_len=embedded_len,
    )


def bob_z_check(
    receiver: Party,
    sequence: Sequence[QubitRef],
    loc_z: Sequence[DecoyRecord],
    rng: np.random.Generator,
    compare: bool = True,
) -> tuple[int, int, dict[int, int]]:
    """Measure announced Z-decoys; optionally compare against announced bits.

    Returns (errors, checked, measured bits by position). The decoys stay
    in their post-measurement states. With compare=False (the prior-scheme
    baseline) nothing counts as checked.
    """
    errors = 0
    measured: dict[int, int] = {}
    for rec in loc_z:
        bit = receiver.measure(sequence[rec.position], Basis.Z, rng)
        measured[rec.position] = bit
        if compare and bit != rec.bit:
            errors += 1
    checked = len(loc_z) if compare else 0
    return errors, checked, measured


def extract_decoys(
    sequence: Sequence[QubitRef], decoy_positions: Sequence[int]
) -> tuple[list[QubitRef], list[QubitRef]]:
    """Split the received sequence into (decoys in position order, carriers)."""
    decoy_set = set(decoy_positions)
    decoys = [sequence[p] for p in sorted(decoy_set)]
    carriers = [ref for p, ref in enumerate(sequence) if p not in decoy_set]
    return decoys, carriers


def extract_shuffle_return(
    receiver: Party,
    sequence: Sequence[QubitRef],
    decoy_positions: Sequence[int],
    rng: np.random.Generator,
) -> tuple[list[QubitRef], PermutationRecord, list[QubitRef]]:
    """Extract all decoys, return them uniformly shuffled, keep the carriers."""
    decoys, carriers = extract_decoys(sequence, decoy_positions)
    perm = [int(p) for p in rng.permutation(len(decoys))]
    returned = receiver.reorder(decoys, perm)
    return returned, PermutationRecord(mapping=tuple(perm)), carriers


def alice_final_check(
    alice: Party,
    returned: Sequence[QubitRef],
    perm: PermutationRecord,
    loc_z: Sequence[DecoyRecord],
    loc_x: Sequence[DecoyRecord],
    rng: np.random.Generator,
) -> tuple[int, int, int, int]:
    """Restore decoy order, measure each in its recorded basis, count errors.

    Returns (z_errors, z_checked, x_errors, x_checked).
    """
    all_records = sorted(list(loc_z) + list(loc_x), key=lambda r: r.position)
    if len(perm.mapping) != len(returned) or len(returned) != len(all_records):
        raise ValueError("permutation inconsistent with decoy count")
    restored: list[QubitRef] = [None] * len(returned)  # type: ignore[list-item]
    for j, ref in enumerate(returned):
        restored[perm.mapping[j]] = ref
    z_err = z_chk = x_err = x_chk = 0
    for rec, ref in zip(all_records, restored):
        bit = alice.measure(ref, rec.basis, rng)
        if rec.basis is Basis.Z:
            z_chk += 1
            z_err += bit != rec.bit
        else:
            x_chk += 1
            x_err += bit != rec.bit
    return z_err, z_chk, x_err, x_chk


def recover_embedded_message(
    loc_z: Sequence[DecoyRecord], measured: dict[int, int], embedded_len: int
) -> Bits:
    """Read message bits from the first embedded_len Z-decoys in position order."""
    ordered = sorted(loc_z, key=lambda r: r.position)
    if embedded_len > len(ordered):
        raise ValueError("embedded length exceeds Z-decoy count")
    return tuple(measured[rec.position] for rec in ordered[:embedded_len])


# ---------------------------------------------------------------------------
# Round orchestration
# ---------------------------------------------------------------------------

def run_detection_round(
    mode: DetectionMode,
    channel: Channel,
    transmission: TrentTransmission,
    threshold: float,
    sender: Party,
    receiver: Party,
    store: KeyStore | None,
    rng: np.random.Generator,
) -> DetectionResult:
    """Run the chosen detection mode end to end over the adversarial channel.

    The forward transmission, all classical announcements, the receiver's
    check (where the mode has one), the decoy return, and the sender's
    final check all happen here. The verdict is Abort as soon as any
    checked error rate exceeds the threshold.
    """
    report = DetectionReport(mode=mode, threshold=threshold)
    loc_z = transmission.loc_z.entries
    loc_x = transmission.loc_x.entries
    d_total = len(transmission.decoy_positions)

    inline = mode is DetectionMode.IMPROVED_INLINE_OTP
    if inline and store is None:
        raise ValueError("inline-OTP mode requires the shared key store")

    # Forward transmission (with the inline announcement when applicable).
    seq = channel.send_qubits(
        TapPoint.FORWARD_ALICE_TO_TRENT, transmission.sequence, rng
    )
    if inline:
        cipher = otp_encrypt(store, "loc_announce",
                             encode_loc(transmission.records))
        wire = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "loc_ciphertext", cipher, rng
        )
        announced = decode_loc(otp_decrypt(store, "loc_announce", wire))
        receiver.classical_compute()
        announced_z = [r for r in announced if r.basis is Basis.Z]
        announced_all_pos = [r.position for r in announced]
    elif mode is DetectionMode.IMPROVED:
        channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "confirm_receipt", (1,), rng
        )
        wire_z = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "loc_z", encode_loc(loc_z), rng
        )
        wire_x = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "decoy_positions_x",
            encode_loc(loc_x, include_values=False), rng,
        )
        announced_z = decode_loc(wire_z)
        announced_all_pos = [r.position for r in announced_z]
        announced_all_pos += [r.position for r in decode_loc(wire_x)]
    elif mode is DetectionMode.MEASURE_THEN_RETURN:
        channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "confirm_receipt", (1,), rng
        )
        wire_z = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "decoy_positions_z",
            encode_loc(loc_z, include_values=False), rng,
        )
        wire_x = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "decoy_positions_x",
            encode_loc(loc_x, include_values=False), rng,
        )
        announced_z = decode_loc(wire_z)
        announced_all_pos = [r.position for r in announced_z]
        announced_all_pos += [r.position for r in decode_loc(wire_x)]
    else:  # DIRECT_REFLECTION
        channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "confirm_receipt", (1,), rng
        )
        wire = channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "decoy_positions",
            encode_loc(transmission.records, include_values=False), rng,
        )
        announced_z = []
        announced_all_pos = [r.position for r in decode_loc(wire)]

    measured: dict[int, int] = {}
    recovered_m: Bits | None = None

    if mode in (DetectionMode.IMPROVED, DetectionMode.IMPROVED_INLINE_OTP):
        # Receiver-side check against the announced contents.
        errors, checked, measured = bob_z_check(
            receiver, seq, [r for r in loc_z], rng, compare=True
        )
        report.bob_z_errors, report.bob_z_checked = errors, checked
        if checked and errors / checked > threshold:
            report.verdict = Verdict.ABORT
            return DetectionResult(report, [], None, measured)
        recovered_m = recover_embedded_message(
            loc_z, measured, transmission.embedded_len
        )
        returned, perm, carriers = extract_shuffle_return(
            receiver, seq, announced_all_pos, rng
        )
    elif mode is DetectionMode.MEASURE_THEN_RETURN:
        # Prior scheme: the receiver measures but never compares.
        _, _, measured = bob_z_check(
            receiver, seq, [r for r in loc_z], rng, compare=False
        )
        recovered_m = recover_embedded_message(
            loc_z, measured, transmission.embedded_len
        )
        returned, perm, carriers = extract_shuffle_return(
            receiver, seq, announced_all_pos, rng
        )
    else:  # DIRECT_REFLECTION: reflect unmeasured, original order.
        receiver.delay()
        decoys, carriers = extract_decoys(seq, announced_all_pos)
        returned = receiver.reflect(decoys)
        perm = PermutationRecord(mapping=tuple(range(d_total)))

    returned = channel.send_qubits(TapPoint.RETURN_TRENT_TO_ALICE, returned, rng)

    if mode is DetectionMode.IMPROVED:
        channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "confirm_return_receipt", (1,), rng
        )
        wire = channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "permutation",
            encode_permutation(perm), rng,
        )
        perm_for_alice = decode_permutation(wire)
    elif mode is DetectionMode.IMPROVED_INLINE_OTP:
        cipher = otp_encrypt(store, "perm_announce", encode_permutation(perm))
        wire = channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "perm_ciphertext", cipher, rng
        )
        perm_for_alice = decode_permutation(
            otp_decrypt(store, "perm_announce", wire)
        )
    elif mode is DetectionMode.MEASURE_THEN_RETURN:
        channel.send_classical(
            TapPoint.FORWARD_ALICE_TO_TRENT, "confirm_return_receipt", (1,), rng
        )
        wire = channel.send_classical(
            TapPoint.RETURN_TRENT_TO_ALICE, "permutation",
            encode_permutation(perm), rng,
        )
        perm_for_alice = decode_permutation(wire)
    else:
        perm_for_alice = perm

    z_err, z_chk, x_err, x_chk = alice_final_check(
        sender, returned, perm_for_alice, loc_z, loc_x, rng
    )
    report.alice_z_errors, report.alice_z_checked = z_err, z_chk
    report.alice_x_errors, report.alice_x_checked = x_err, x_chk
    if (z_chk and z_err / z_chk > threshold) or (x_chk and x_err / x_chk > threshold):
        report.verdict = Verdict.ABORT
        return DetectionResult(report, [], None, measured)

    return DetectionResult(report, carriers, recovered_m, measured)
