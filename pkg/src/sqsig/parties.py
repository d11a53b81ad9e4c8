"""Participant capability model.

A quantum party may prepare arbitrary states and measure in any basis.
A classical party is restricted to Z-basis preparation and measurement,
reflection, reordering, delaying, and classical computation. Every
primitive operation a party performs is appended to its op_log, and a
classical party attempting a non-classical operation is rejected at the
interface with CapabilityError.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .quantum import Basis, StateVector, prepare_bell, prepare_single, QubitRole
from .register import QubitRef, Register, measure_qubit, new_qubit


class OpKind(str, Enum):
    PREPARE_Z = "prepare_z"
    PREPARE_X = "prepare_x"
    PREPARE_ENTANGLED = "prepare_entangled"
    MEASURE_Z = "measure_z"
    MEASURE_X = "measure_x"
    REFLECT = "reflect"
    REORDER = "reorder"
    DELAY = "delay"
    CLASSICAL_COMPUTE = "classical_compute"


CLASSICAL_ALLOWED = frozenset(
    {
        OpKind.PREPARE_Z,
        OpKind.MEASURE_Z,
        OpKind.REFLECT,
        OpKind.REORDER,
        OpKind.DELAY,
        OpKind.CLASSICAL_COMPUTE,
    }
)


class PartyKind(str, Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


class CapabilityError(RuntimeError):
    """A classical party attempted an operation outside its capability set."""


@dataclass
class Party:
    name: str
    kind: PartyKind
    op_log: list[OpKind] = field(default_factory=list)

    def _record(self, op: OpKind) -> None:
        if self.kind is PartyKind.CLASSICAL and op not in CLASSICAL_ALLOWED:
            raise CapabilityError(
                f"classical party {self.name} may not perform {op.value}"
            )
        self.op_log.append(op)

    def prepare(
        self, basis: Basis, bit: int, label: QubitRole = QubitRole.DECOY
    ) -> QubitRef:
        self._record(OpKind.PREPARE_Z if basis is Basis.Z else OpKind.PREPARE_X)
        return new_qubit(prepare_single(basis, bit, label))

    def prepare_bell_pair(self, g_bit: int) -> tuple[QubitRef, QubitRef]:
        """Returns (trent_half, bob_half) handles of a fresh Bell pair."""
        self._record(OpKind.PREPARE_ENTANGLED)
        reg = Register(prepare_bell(g_bit))
        trent_half, bob_half = reg.refs()
        return trent_half, bob_half

    def measure(self, ref: QubitRef, basis: Basis, rng: np.random.Generator) -> int:
        self._record(OpKind.MEASURE_Z if basis is Basis.Z else OpKind.MEASURE_X)
        return measure_qubit(ref, basis, rng)

    def reflect(self, refs: Sequence[QubitRef]) -> list[QubitRef]:
        """Send qubits back undisturbed."""
        self._record(OpKind.REFLECT)
        return list(refs)

    def reorder(self, refs: Sequence[QubitRef], perm: Sequence[int]) -> list[QubitRef]:
        """Return refs permuted so that result[j] = refs[perm[j]]."""
        self._record(OpKind.REORDER)
        if sorted(perm) != list(range(len(refs))):
            raise ValueError("perm is not a bijection on the refs")
        return [refs[p] for p in perm]

    def delay(self) -> None:
        self._record(OpKind.DELAY)

    def classical_compute(self) -> None:
        self._record(OpKind.CLASSICAL_COMPUTE)


def quantum_party(name: str) -> Party:
    return Party(name=name, kind=PartyKind.QUANTUM)


def classical_party(name: str) -> Party:
    return Party(name=name, kind=PartyKind.CLASSICAL)
