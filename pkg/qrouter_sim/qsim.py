"""
State-vector simulator shared by every node of a simulation run

Entangled pairs span nodes, so one register holds the joint state of all live
qubits. Node-locality is enforced by the router layer, not here.
"""

import cmath
import math
from typing import Annotated, Sequence, TypeAlias

import numpy as np
from pydantic import BaseModel, Field

from qrouter_sim.errors import (
    EntangledSubsetError,
    MeasuredQubitError,
    NotNormalizableError,
    QRouterError,
    RegisterCapacityError,
    SameQubitError,
)
from qrouter_sim.log import logger

MAX_QUBITS = 24
NORM_TOLERANCE = 1e-9
INPUT_TOLERANCE = 1e-6
PRINT_CUTOFF = 5e-5
_ZERO_PROBABILITY = 1e-12

Amplitude: TypeAlias = complex

_SQRT2_INV = 1 / math.sqrt(2)
H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)
Z_GATE = np.array([[1, 0], [0, -1]], dtype=complex)


class QubitHandle(BaseModel):
    """Reference to one qubit of the register (the qubitId handed to routers)"""

    id: Annotated[int, Field(ge=0, description="Unique qubit id, never reused")]
    measured: Annotated[
        int | None, Field(description="Collapsed bit, None while the qubit is live")
    ] = None

    @property
    def live(self) -> bool:
        return self.measured is None

    @property
    def state_tag(self) -> str:
        return "live" if self.live else f"measured({self.measured})"


def _normalize_pair(alpha: Amplitude, beta: Amplitude) -> np.ndarray:
    alpha, beta = complex(alpha), complex(beta)
    if not (cmath.isfinite(alpha) and cmath.isfinite(beta)):
        raise NotNormalizableError(f"Amplitudes ({alpha}, {beta}) are not finite")
    norm = math.hypot(abs(alpha), abs(beta))
    if norm < 1e-15:
        raise NotNormalizableError("Cannot normalize the zero vector")
    if abs(norm * norm - 1) > INPUT_TOLERANCE:
        logger.warning(
            f"Amplitudes ({alpha}, {beta}) have squared norm {norm * norm:.6f}; renormalizing"
        )
    return np.array([alpha, beta], dtype=complex) / norm


def _format_amplitude(amplitude: Amplitude) -> str:
    re = amplitude.real if abs(amplitude.real) >= PRINT_CUTOFF else 0.0
    im = amplitude.imag if abs(amplitude.imag) >= PRINT_CUTOFF else 0.0
    if im == 0.0:
        return f"{re:.4f}"
    return f"{re:.4f}{im:+.4f}i"


def format_state(terms: Sequence[tuple[str, Amplitude]]) -> str:
    """Render amplitudes as "(0.4091)|0> + (0.9125)|1>", omitting zero terms"""
    return " + ".join(
        f"({_format_amplitude(amplitude)})|{label}>"
        for label, amplitude in terms
        if abs(amplitude) >= PRINT_CUTOFF
    )


def random_state(rng: np.random.Generator) -> tuple[Amplitude, Amplitude]:
    """Draw Haar-random single-qubit amplitudes"""
    vec = rng.normal(size=2) + 1j * rng.normal(size=2)
    vec /= np.linalg.norm(vec)
    return complex(vec[0]), complex(vec[1])


class QuantumRegister:
    """Global state vector over every live qubit of a run"""

    def __init__(
        self,
        seed: int | np.random.SeedSequence = 0,
        max_qubits: int = MAX_QUBITS,
    ):
        """
        Initialize an empty register

        Args:
            seed: Seed of the measurement RNG. Only measure() draws from it.
            max_qubits: Qubit cap, at most MAX_QUBITS
        """
        if not 1 <= max_qubits <= MAX_QUBITS:
            raise RegisterCapacityError(
                f"Register cap must be between 1 and {MAX_QUBITS}, got {max_qubits}"
            )
        self.max_qubits = max_qubits
        self.rng = np.random.default_rng(seed)
        self.amplitudes = np.ones(1, dtype=complex)
        self.qubit_order: list[QubitHandle] = []
        self.operation_count = 0
        self.max_norm_error = 0.0
        self._handles: dict[int, QubitHandle] = {}
        self._positions: dict[int, int] = {}
        self._next_id = 0

    @classmethod
    def from_amplitudes(
        cls, amplitudes: Sequence[Amplitude], seed: int = 0
    ) -> tuple["QuantumRegister", list[QubitHandle]]:
        """Build a register holding an arbitrary normalized state (test fixture helper)"""
        vec = np.asarray(amplitudes, dtype=complex)
        n = int(round(math.log2(vec.size)))
        if vec.size != 2**n:
            raise QRouterError(f"State length {vec.size} is not a power of two")
        register = cls(seed=seed, max_qubits=max(n, 1))
        norm = np.linalg.norm(vec)
        if norm < 1e-15:
            raise NotNormalizableError("Cannot normalize the zero vector")
        register.amplitudes = vec / norm
        handles = [register._new_handle() for _ in range(n)]
        register.qubit_order = handles
        register._reindex()
        return register, handles

    @property
    def size(self) -> int:
        """Number of qubits currently held in the state vector"""
        return len(self.qubit_order)

    def live_qubits(self) -> list[QubitHandle]:
        return [handle for handle in self.qubit_order if handle.live]

    def state_tag(self, q: QubitHandle) -> str:
        return self._handle(q).state_tag

    def require_live(self, q: QubitHandle) -> None:
        """Raise MeasuredQubitError unless q can still receive gates"""
        self._live_position(q)

    def alloc_qubit(self, alpha: Amplitude, beta: Amplitude) -> QubitHandle:
        """
        Add a qubit in state alpha|0> + beta|1>, unentangled with the rest

        Raises:
            NotNormalizableError: If the amplitudes are zero or not finite
            RegisterCapacityError: If the register is full
        """
        vec = _normalize_pair(alpha, beta)
        self.compact()
        if self.size >= self.max_qubits:
            raise RegisterCapacityError(
                f"Register already holds {self.size} qubits (cap {self.max_qubits})"
            )
        self.amplitudes = np.kron(self.amplitudes, vec)
        handle = self._new_handle()
        self.qubit_order.append(handle)
        self._positions[handle.id] = self.size - 1
        self._canonicalize_phase()
        self._audit()
        return handle

    def apply_h(self, q: QubitHandle) -> None:
        self._apply_single(q, H_GATE)

    def apply_x(self, q: QubitHandle) -> None:
        self._apply_single(q, X_GATE)

    def apply_z(self, q: QubitHandle) -> None:
        self._apply_single(q, Z_GATE)

    def apply_cnot(self, control: QubitHandle, target: QubitHandle) -> None:
        """Flip target on the basis states where control is 1"""
        c = self._live_position(control)
        t = self._live_position(target)
        if c == t:
            raise SameQubitError(f"CNOT control and target are both qubit {control.id}")
        n = self.size
        psi = self.amplitudes.reshape([2] * n)
        flipped = psi.copy()
        selector: list[int | slice] = [slice(None)] * n
        selector[c] = 1
        # indexing the control axis away shifts later axes down by one
        flipped[tuple(selector)] = np.flip(psi[tuple(selector)], axis=t if t < c else t - 1)
        self.amplitudes = flipped.reshape(-1)
        self._audit()

    def measure(self, q: QubitHandle, forced: int | None = None) -> int:
        """
        Projective measurement in the computational basis

        Args:
            q: Qubit to measure
            forced: Project onto this outcome instead of sampling. The RNG is not consumed.

        Returns:
            The measured bit
        """
        pos = self._live_position(q)
        n = self.size
        psi = self.amplitudes.reshape([2] * n)
        p1 = float(np.sum(np.abs(np.take(psi, 1, axis=pos)) ** 2))
        p1 = min(max(p1, 0.0), 1.0)
        if forced is None:
            bit = 1 if self.rng.random() < p1 else 0
        else:
            if forced not in (0, 1):
                raise QRouterError(f"Forced outcome must be 0 or 1, got {forced}")
            bit = forced
        probability = p1 if bit else 1.0 - p1
        if probability < _ZERO_PROBABILITY:
            raise QRouterError(f"Outcome {bit} of qubit {q.id} has zero probability")

        collapsed = np.zeros_like(psi)
        selector: list[int | slice] = [slice(None)] * n
        selector[pos] = bit
        collapsed[tuple(selector)] = np.take(psi, bit, axis=pos) / math.sqrt(probability)
        self.amplitudes = collapsed.reshape(-1)
        self._handles[q.id].measured = bit
        q.measured = bit
        self._canonicalize_phase()
        self._audit()
        return bit

    def compact(self) -> None:
        """Trace out measured qubits; they are factored basis states, so nothing else moves"""
        if all(handle.live for handle in self.qubit_order):
            return
        index = tuple(
            slice(None) if handle.live else handle.measured for handle in self.qubit_order
        )
        dropped = sum(1 for handle in self.qubit_order if not handle.live)
        psi = self.amplitudes.reshape([2] * self.size)
        self.amplitudes = np.ascontiguousarray(psi[index]).reshape(-1)
        self.qubit_order = self.live_qubits()
        self._reindex()
        logger.debug(f"Compacted {dropped} measured qubits, {self.size} remain")

    def peek_joint_state(self, qs: Sequence[QubitHandle]) -> list[tuple[str, Amplitude]]:
        """
        Read the joint state of a subset of qubits without collapsing it

        The first qubit of the list is the leftmost ket symbol. The subset must
        factor out of the register.

        Raises:
            EntangledSubsetError: If the subset is entangled with the other qubits
        """
        positions = [self._live_position(q) for q in qs]
        if len(set(positions)) != len(positions):
            raise SameQubitError("Peek list contains the same qubit twice")
        k = len(positions)
        rest = [p for p in range(self.size) if p not in positions]
        psi = np.transpose(self.amplitudes.reshape([2] * self.size), positions + rest)
        matrix = psi.reshape(2**k, -1)

        # a product state has exactly one Schmidt coefficient
        u, s, _ = np.linalg.svd(matrix, full_matrices=False)
        if float(np.sum(s[1:] ** 2)) > NORM_TOLERANCE:
            raise EntangledSubsetError(
                f"Qubits {[q.id for q in qs]} are entangled with the rest of the register"
            )
        vec = u[:, 0] / np.linalg.norm(u[:, 0])
        leading = np.flatnonzero(np.abs(vec) >= PRINT_CUTOFF)
        if leading.size:
            first = vec[leading[0]]
            vec = vec * (abs(first) / first)
        return [(format(i, f"0{k}b"), complex(vec[i])) for i in range(2**k)]

    def describe(self, qs: Sequence[QubitHandle]) -> str:
        """Format the joint state of qs, or "(entangled)" when it does not factor out"""
        try:
            return format_state(self.peek_joint_state(qs))
        except EntangledSubsetError:
            return "(entangled)"

    def fidelity(self, q: QubitHandle, alpha: Amplitude, beta: Amplitude) -> float:
        """Overlap |<target|q>|^2 of an unentangled qubit with alpha|0> + beta|1>"""
        target = _normalize_pair(alpha, beta)
        state = np.array([amplitude for _, amplitude in self.peek_joint_state([q])])
        return float(min(1.0, abs(np.vdot(target, state)) ** 2))

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def _apply_single(self, q: QubitHandle, gate: np.ndarray) -> None:
        pos = self._live_position(q)
        psi = self.amplitudes.reshape([2] * self.size)
        psi = np.tensordot(gate, psi, axes=([1], [pos]))
        self.amplitudes = np.moveaxis(psi, 0, pos).reshape(-1)
        self._audit()

    def _new_handle(self) -> QubitHandle:
        handle = QubitHandle(id=self._next_id)
        self._next_id += 1
        self._handles[handle.id] = handle
        return handle

    def _reindex(self) -> None:
        self._positions = {handle.id: pos for pos, handle in enumerate(self.qubit_order)}

    def _handle(self, q: QubitHandle) -> QubitHandle:
        handle = self._handles.get(q.id)
        if handle is None:
            raise QRouterError(f"Qubit {q.id} does not belong to this register")
        return handle

    def _live_position(self, q: QubitHandle) -> int:
        handle = self._handle(q)
        if not handle.live:
            raise MeasuredQubitError(f"Qubit {q.id} is already {handle.state_tag}")
        return self._positions[q.id]

    def _canonicalize_phase(self) -> None:
        nonzero = np.flatnonzero(np.abs(self.amplitudes) > NORM_TOLERANCE)
        if nonzero.size:
            first = self.amplitudes[nonzero[0]]
            self.amplitudes = self.amplitudes * (abs(first) / first)

    def _audit(self) -> None:
        if not np.all(np.isfinite(self.amplitudes)):
            raise QRouterError("State vector contains non-finite amplitudes")
        error = self.norm_error()
        self.operation_count += 1
        self.max_norm_error = max(self.max_norm_error, error)
        if error > NORM_TOLERANCE:
            raise QRouterError(f"State norm drifted by {error:.3e}")
