"""Dense state-vector simulation for small labeled qubit registers.

Registers hold one to four qubits. Supported operations: preparation in
the Z and X bases, Bell-pair preparation, unitary application, projective
Z/X measurement with Born-rule collapse, partial trace, trace distance,
and tensor products. Every operation is pure: it returns a new state (or
an outcome plus a post-measurement state) and never mutates its inputs.

Index convention: qubit 0 is the leftmost label and the most significant
bit of the amplitude index, so for two qubits the amplitude order is
|00>, |01>, |10>, |11>.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

MAX_REGISTER_QUBITS = 4

# Numeric tolerances; single source of truth for the whole package.
NORM_ATOL = 1e-12
DENSITY_ATOL = 1e-12
PSD_ATOL = 1e-10
UNITARY_ATOL = 1e-10
PHASE_FIDELITY_ATOL = 1e-10


class Basis(str, Enum):
    Z = "Z"
    X = "X"


class QubitRole(str, Enum):
    TRENT_HALF = "trent_half"
    BOB_HALF = "bob_half"
    DECOY = "decoy"
    EVE_ANCILLA = "eve_ancilla"


_SQRT2_INV = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]],
    dtype=complex,
)


class RegisterSizeError(ValueError):
    """Register would exceed the supported qubit count."""


class NonUnitaryError(ValueError):
    """Matrix passed as a gate is not unitary within tolerance."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class StateVector:
    """Normalized complex amplitudes over a labeled qubit register."""

    __slots__ = ("amplitudes", "qubit_labels")

    def __init__(
        self,
        amplitudes: Sequence[complex] | np.ndarray,
        qubit_labels: Sequence[QubitRole],
        check: bool = True,
    ) -> None:
        amps = np.asarray(amplitudes, dtype=complex)
        labels = tuple(qubit_labels)
        if check:
            n = len(labels)
            if not 1 <= n <= MAX_REGISTER_QUBITS:
                raise RegisterSizeError(
                    f"register must hold 1..{MAX_REGISTER_QUBITS} qubits, got {n}"
                )
            if amps.shape != (2 ** n,):
                raise DimensionMismatchError(
                    f"expected {2 ** n} amplitudes for {n} qubits, got {amps.shape}"
                )
            norm = float(np.sum(np.abs(amps) ** 2))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"state not normalized: |amps|^2 = {norm}")
        self.amplitudes = amps
        self.qubit_labels = labels

    @property
    def num_qubits(self) -> int:
        return len(self.qubit_labels)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.qubit_labels, check=False)

    def __repr__(self) -> str:
        roles = ",".join(lab.value for lab in self.qubit_labels)
        return f"StateVector(n={self.num_qubits}, roles=[{roles}])"


@dataclass
class DensityMatrix:
    """A dim x dim density operator (Hermitian, unit trace, PSD)."""

    dim: int
    entries: np.ndarray

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        rho = np.outer(state.amplitudes, state.amplitudes.conj())
        return cls(dim=rho.shape[0], entries=rho)

    @classmethod
    def maximally_mixed(cls, num_qubits: int = 1) -> "DensityMatrix":
        d = 2 ** num_qubits
        return cls(dim=d, entries=np.eye(d, dtype=complex) / d)

    def validate(self) -> None:
        if self.entries.shape != (self.dim, self.dim):
            raise DimensionMismatchError("entries shape does not match dim")
        if not np.allclose(self.entries, self.entries.conj().T, atol=DENSITY_ATOL):
            raise ValueError("density matrix is not Hermitian")
        tr = complex(np.trace(self.entries))
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        eigvals = np.linalg.eigvalsh(self.entries)
        if eigvals.min() < -PSD_ATOL:
            raise ValueError(f"density matrix not PSD: min eigenvalue {eigvals.min()}")


@dataclass
class MeasurementOutcome:
    """Result of a projective measurement: sampled bit and collapsed state."""

    bit: int
    basis: Basis
    post_state: StateVector


# Amplitude templates for the four single-qubit preparation states.
_SINGLE_AMPS = {
    (Basis.Z, 0): np.array([1.0, 0.0], dtype=complex),
    (Basis.Z, 1): np.array([0.0, 1.0], dtype=complex),
    (Basis.X, 0): np.array([_SQRT2_INV, _SQRT2_INV], dtype=complex),
    (Basis.X, 1): np.array([_SQRT2_INV, -_SQRT2_INV], dtype=complex),
}

# StateVector instances are immutable by convention (operations replace,
# never modify), so prepared single-qubit states can be shared.
_SINGLE_CACHE: dict[tuple[Basis, int, QubitRole], StateVector] = {}


def prepare_single(
    basis: Basis, bit: int, label: QubitRole = QubitRole.DECOY
) -> StateVector:
    """Prepare |0>, |1>, |+> or |-> as a one-qubit register."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    key = (basis, bit, label)
    state = _SINGLE_CACHE.get(key)
    if state is None:
        state = StateVector(_SINGLE_AMPS[(basis, bit)].copy(), (label,),
                            check=False)
        _SINGLE_CACHE[key] = state
    return state


def prepare_bell(g_bit: int) -> StateVector:
    """Prepare (|00>+|11>)/sqrt2 for g_bit=0, (|01>+|10>)/sqrt2 for g_bit=1.

    Qubit 0 carries the half destined for Trent, qubit 1 the half for Bob.
    """
    if g_bit not in (0, 1):
        raise ValueError(f"g_bit must be 0 or 1, got {g_bit}")
    amps = np.zeros(4, dtype=complex)
    if g_bit == 0:
        amps[0] = amps[3] = _SQRT2_INV
    else:
        amps[1] = amps[2] = _SQRT2_INV
    return StateVector(
        amps, (QubitRole.TRENT_HALF, QubitRole.BOB_HALF), check=False
    )


def _check_unitary(u: np.ndarray, dim: int) -> None:
    if u.shape != (dim, dim):
        raise DimensionMismatchError(f"gate must be {dim}x{dim}, got {u.shape}")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=UNITARY_ATOL):
        raise NonUnitaryError("matrix is not unitary within tolerance")


def _apply_gate_unchecked(
    state: StateVector, u: np.ndarray, targets: Sequence[int]
) -> StateVector:
    n = state.num_qubits
    k = len(targets)
    if k == 1:
        # Slice the target qubit out by reshaping; cheaper than tensordot.
        a = state.amplitudes.reshape((1 << targets[0], 2, -1))
        out = np.empty_like(a)
        out[:, 0, :] = u[0, 0] * a[:, 0, :] + u[0, 1] * a[:, 1, :]
        out[:, 1, :] = u[1, 0] * a[:, 0, :] + u[1, 1] * a[:, 1, :]
        return StateVector(out.reshape(1 << n), state.qubit_labels, check=False)
    if n == 2 and tuple(targets) == (0, 1):
        return StateVector(u @ state.amplitudes, state.qubit_labels, check=False)
    amps = state.amplitudes.reshape((2,) * n)
    mat = u.reshape((2,) * (2 * k))
    moved = np.tensordot(mat, amps, axes=(tuple(range(k, 2 * k)), tuple(targets)))
    moved = np.moveaxis(moved, tuple(range(k)), tuple(targets))
    return StateVector(moved.reshape(2 ** n), state.qubit_labels, check=False)


def apply_unitary(
    state: StateVector, u: np.ndarray | Sequence[Sequence[complex]], targets: Sequence[int]
) -> StateVector:
    """Apply a 2x2 or 4x4 unitary to the listed target qubits.

    Raises NonUnitaryError for a non-unitary matrix and ValueError for
    invalid or repeated targets.
    """
    u = np.asarray(u, dtype=complex)
    targets = tuple(targets)
    k = len(targets)
    if k not in (1, 2):
        raise ValueError("gates act on one or two qubits")
    if len(set(targets)) != k:
        raise ValueError(f"targets must be distinct, got {targets}")
    n = state.num_qubits
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"targets {targets} out of range for {n} qubits")
    _check_unitary(u, 2 ** k)
    return _apply_gate_unchecked(state, u, targets)


def measurement_branches(
    state: StateVector, qubit: int, basis: Basis
) -> tuple[tuple[float, StateVector | None], tuple[float, StateVector | None]]:
    """Deterministic projection of a measurement: ((p0, post0), (p1, post1)).

    A branch with zero probability carries post-state None. Used both by
    the sampling path and by exhaustive outcome-enumeration oracles.
    """
    n = state.num_qubits
    if qubit < 0 or qubit >= n:
        raise ValueError(f"qubit {qubit} out of range for {n}-qubit register")
    work = state
    if basis is Basis.X:
        work = _apply_gate_unchecked(state, HADAMARD, (qubit,))
    amps = work.amplitudes.reshape((2,) * n)
    branches = []
    for bit in (0, 1):
        proj = np.zeros_like(amps)
        sel = [slice(None)] * n
        sel[qubit] = bit
        proj[tuple(sel)] = amps[tuple(sel)]
        p = float(np.sum(np.abs(proj) ** 2))
        if p > 1e-15:
            post = StateVector(
                proj.reshape(2 ** n) / np.sqrt(p), state.qubit_labels, check=False
            )
            if basis is Basis.X:
                post = _apply_gate_unchecked(post, HADAMARD, (qubit,))
            branches.append((p, post))
        else:
            branches.append((0.0, None))
    return branches[0], branches[1]


def measure(
    state: StateVector, qubit: int, basis: Basis, rng: np.random.Generator
) -> MeasurementOutcome:
    """Born-rule projective measurement of one qubit with collapse."""
    if state.num_qubits == 1:
        # Hot path: scalar arithmetic avoids the generic tensor machinery.
        a0, a1 = state.amplitudes.tolist()
        if basis is Basis.X:
            b0 = (a0 + a1) * _SQRT2_INV
        else:
            b0 = a0
        p0 = b0.real * b0.real + b0.imag * b0.imag
        bit = 0 if rng.random() < p0 else 1
        post = prepare_single(basis, bit, state.qubit_labels[0])
        return MeasurementOutcome(bit=bit, basis=basis, post_state=post)

    n = state.num_qubits
    if qubit < 0 or qubit >= n:
        raise ValueError(f"qubit {qubit} out of range for {n}-qubit register")
    # Slice the target qubit out by reshaping; cheaper than tensordot.
    a = state.amplitudes.reshape((1 << qubit, 2, -1))
    if basis is Basis.X:
        w0 = (a[:, 0, :] + a[:, 1, :]) * _SQRT2_INV
        w1 = (a[:, 0, :] - a[:, 1, :]) * _SQRT2_INV
    else:
        w0 = a[:, 0, :]
        w1 = a[:, 1, :]
    p0 = float(np.vdot(w0, w0).real)
    bit = 0 if rng.random() < p0 else 1
    if bit == 0:
        w, p = w0, p0
    else:
        w = w1
        p = float(np.vdot(w1, w1).real)
    if p <= 1e-15:  # zero-probability branch cannot be sampled
        raise RuntimeError("sampled a zero-probability branch")
    w = w / np.sqrt(p)
    out = np.zeros_like(a)
    if basis is Basis.X:
        out[:, 0, :] = w * _SQRT2_INV
        out[:, 1, :] = w * (_SQRT2_INV if bit == 0 else -_SQRT2_INV)
    else:
        out[:, bit, :] = w
    post = StateVector(out.reshape(1 << n), state.qubit_labels, check=False)
    return MeasurementOutcome(bit=bit, basis=basis, post_state=post)


def partial_trace(
    obj: Union[StateVector, DensityMatrix], keep: Iterable[int]
) -> DensityMatrix:
    """Reduced density matrix over the kept qubit indices (in ascending order)."""
    if isinstance(obj, StateVector):
        rho = np.outer(obj.amplitudes, obj.amplitudes.conj())
        n = obj.num_qubits
    else:
        rho = obj.entries
        n = int(round(np.log2(obj.dim)))
    keep = tuple(sorted(set(keep)))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(q < 0 or q >= n for q in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} qubits")

    tensor_form = rho.reshape((2,) * (2 * n))
    traced = [q for q in range(n) if q not in keep]
    # Trace out each discarded qubit by contracting its row/column axes.
    for q in sorted(traced, reverse=True):
        cur_n = int(len(tensor_form.shape) / 2)
        tensor_form = np.trace(tensor_form, axis1=q, axis2=cur_n + q)
    k = len(keep)
    reduced = tensor_form.reshape(2 ** k, 2 ** k)
    return DensityMatrix(dim=2 ** k, entries=reduced)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Trace distance 0.5 * tr|rho - sigma| via singular values."""
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(
            f"dimension mismatch: {rho.dim} vs {sigma.dim}"
        )
    diff = rho.entries - sigma.entries
    return float(0.5 * np.sum(np.linalg.svd(diff, compute_uv=False)))


def tensor(states: Sequence[StateVector]) -> StateVector:
    """Kronecker product of registers in the given order; labels concatenate."""
    if not states:
        raise ValueError("tensor of zero states is undefined")
    total = sum(s.num_qubits for s in states)
    if total > MAX_REGISTER_QUBITS:
        raise RegisterSizeError(
            f"combined register of {total} qubits exceeds cap {MAX_REGISTER_QUBITS}"
        )
    amps = states[0].amplitudes
    labels: tuple[QubitRole, ...] = states[0].qubit_labels
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
        labels = labels + s.qubit_labels
    return StateVector(amps, labels, check=False)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for equal-size registers."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatchError("fidelity requires equal register sizes")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def equal_up_to_phase(a: StateVector, b: StateVector) -> bool:
    """States compare equal when fidelity is 1 within tolerance."""
    return fidelity(a, b) >= 1.0 - PHASE_FIDELITY_ATOL
