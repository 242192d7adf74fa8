"""
Teleportation protocol: Bell pairs, Bell State Measurement, quantum state recovery
"""

from typing import Annotated

from pydantic import ConfigDict, Field, RootModel

from qrouter_sim.errors import RegisterCapacityError, SameQubitError
from qrouter_sim.qsim import QuantumRegister, QubitHandle


class BsmResult(RootModel[Annotated[int, Field(ge=0, le=3)]]):
    """Outcome of a Bell State Measurement, encoded as 2*m_source + m_epr"""

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_bits(cls, m_source: int, m_epr: int) -> "BsmResult":
        return cls(2 * m_source + m_epr)

    @property
    def value(self) -> int:
        return self.root

    @property
    def m_source(self) -> int:
        return self.root >> 1

    @property
    def m_epr(self) -> int:
        return self.root & 1


def make_bell_pair(register: QuantumRegister) -> tuple[QubitHandle, QubitHandle]:
    """Create two fresh qubits in (|00> + |11>)/sqrt(2)"""
    register.compact()
    if register.size + 2 > register.max_qubits:
        raise RegisterCapacityError(
            f"No room for a Bell pair: {register.size} of {register.max_qubits} qubits in use"
        )
    first = register.alloc_qubit(1, 0)
    second = register.alloc_qubit(1, 0)
    register.apply_h(first)
    register.apply_cnot(first, second)
    return first, second


def bell_state_measurement(
    register: QuantumRegister,
    source: QubitHandle,
    epr_half: QubitHandle,
    forced: BsmResult | None = None,
) -> BsmResult:
    """
    Measure source and epr_half in the Bell basis; both collapse

    Args:
        forced: Project onto this branch instead of sampling
    """
    if source.id == epr_half.id:
        raise SameQubitError(f"BSM operands are both qubit {source.id}")
    register.apply_cnot(source, epr_half)
    register.apply_h(source)
    m_source = register.measure(source, None if forced is None else forced.m_source)
    m_epr = register.measure(epr_half, None if forced is None else forced.m_epr)
    return BsmResult.from_bits(m_source, m_epr)


def quantum_state_recovery(register: QuantumRegister, q: QubitHandle, r: BsmResult) -> None:
    """Apply X if m_epr is set, then Z if m_source is set"""
    register.require_live(q)
    if r.m_epr:
        register.apply_x(q)
    if r.m_source:
        register.apply_z(q)


def teleport(
    register: QuantumRegister,
    source: QubitHandle,
    epr_local: QubitHandle,
    epr_remote: QubitHandle,
    forced: BsmResult | None = None,
) -> BsmResult:
    """Move the state of source onto epr_remote through the pair (epr_local, epr_remote)"""
    register.require_live(epr_remote)
    result = bell_state_measurement(register, source, epr_local, forced)
    quantum_state_recovery(register, epr_remote, result)
    return result
