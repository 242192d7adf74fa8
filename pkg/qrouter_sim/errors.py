"""
Exceptions raised by the quantum router simulator
"""


class QRouterError(ValueError):
    """Base class for every simulator error"""


class RegisterCapacityError(QRouterError):
    """The register would exceed its qubit cap"""


class NotNormalizableError(QRouterError):
    """Amplitudes cannot be normalized to a qubit state"""


class MeasuredQubitError(QRouterError):
    """A gate or measurement targeted a qubit that has already collapsed"""


class SameQubitError(QRouterError):
    """A two-qubit operation was given the same qubit twice"""


class EntangledSubsetError(QRouterError):
    """The requested qubits are entangled with qubits outside the subset"""


class UnknownNodeError(QRouterError):
    """A node name is not part of the topology"""


class DegeneratePairError(QRouterError):
    """An entangled pair was requested between a node and itself"""


class UnknownEprError(QRouterError):
    """No entangled pair record exists for the given id"""


class NotAnEndpointError(QRouterError):
    """The node does not hold either half of the entangled pair"""


class UnroutableError(QRouterError):
    """The forwarding table has no entry for the destination"""


class ForeignQubitError(QRouterError):
    """A node tried to use a qubit it does not own"""


class TopologyError(QRouterError):
    """The topology or its forwarding tables are inconsistent"""


class SimulationError(QRouterError):
    """An event failed while the simulation was running"""

    def __init__(self, seq: int, cause: Exception):
        self.seq = seq
        self.cause = cause
        super().__init__(f"event {seq}: {cause}")
