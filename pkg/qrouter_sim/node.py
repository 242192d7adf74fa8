"""
Quantum router node: binds the digital and quantum forwarding planes through
the getQubits / teleport / forward / qsr commands
"""

from typing import TYPE_CHECKING, Annotated, Literal, TypeAlias

from pydantic import BaseModel, ConfigDict, Field

from qrouter_sim.epm import EntangledPairManager
from qrouter_sim.errors import ForeignQubitError
from qrouter_sim.qsim import Amplitude, QuantumRegister, QubitHandle
from qrouter_sim.routing import ForwardingTable, NodeId, shared_table_lookup
from qrouter_sim.teleport import BsmResult, bell_state_measurement, quantum_state_recovery

if TYPE_CHECKING:
    from qrouter_sim.netsim import Trace

NodeRole: TypeAlias = Literal["source", "router", "destination"]

QubitSpec: TypeAlias = tuple[Amplitude, Amplitude] | QubitHandle


class TeleportResult(BaseModel):
    """Pair id and BSM outcome returned by a teleport command"""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    ep_id: Annotated[int, Field(ge=0, alias="epId")]
    bsm_result: Annotated[BsmResult, Field(alias="bsmResult")]


class ForwardMessage(BaseModel):
    """Classical datagram carrying a teleport result toward the destination"""

    model_config = ConfigDict(populate_by_name=True)

    src: NodeId
    dest: NodeId
    teleport_result: Annotated[TeleportResult, Field(alias="teleportResult")]
    next_hop: Annotated[
        str | None, Field(exclude=True, description="Node this copy is addressed to")
    ] = None

    def wire(self) -> str:
        """Compact JSON as carried on the digital plane"""
        return self.model_dump_json(by_alias=True)


class QuantumRouter:
    """One network node: source, router or destination depending on the flow"""

    def __init__(
        self,
        name: str,
        table: ForwardingTable,
        register: QuantumRegister,
        epm: EntangledPairManager,
        trace: "Trace",
    ):
        self.name = name
        self.table = table
        self.register = register
        self.epm = epm
        self.trace = trace
        self._owned: set[int] = set()

    def role_in(self, source: str, dest: str) -> NodeRole:
        if self.name == source:
            return "source"
        if self.name == dest:
            return "destination"
        return "router"

    def owns(self, q: QubitHandle) -> bool:
        """Qubits this node allocated or recovered, plus its registered EPR halves"""
        return q.id in self._owned or self.epm.holder_of(q) == self.name

    def get_qubit(self, spec: QubitSpec) -> QubitHandle:
        """
        Select the qubit to transfer: a new qubit alpha|0> + beta|1>, or an
        existing one this node owns
        """
        if isinstance(spec, QubitHandle):
            self._require_owned(spec)
            self.register.require_live(spec)
            self.epm.claim(spec)
            q = spec
        else:
            alpha, beta = spec
            q = self.register.alloc_qubit(alpha, beta)
            self._owned.add(q.id)
        self._log("getqubit()")
        self._log(f"  return {self.register.describe([q])}")
        return q

    def send_qubit(self, q: QubitHandle, dest: str, src: str | None = None) -> ForwardMessage:
        """
        Teleport q to the next hop toward dest and build the forward message

        Args:
            q: Live qubit owned by this node
            dest: Final destination
            src: Original source of the flow, this node when omitted
        """
        self._require_owned(q)
        self.register.require_live(q)
        result = self._teleport(q, dest)
        return self._forward(src or self.name, dest, result)

    def receive_forward(self, msg: ForwardMessage) -> QubitHandle | ForwardMessage:
        """
        Recover the teleported state from this node's half of msg's pair

        Returns:
            The recovered qubit at the destination, otherwise the message
            re-teleporting it one hop further
        """
        result = msg.teleport_result
        q = self.epm.lookup_remote_half(result.ep_id, self.name)
        self.epm.mark_recovered(result.ep_id)
        self._log(f"qsr({result.model_dump_json(by_alias=True)})")
        quantum_state_recovery(self.register, q, result.bsm_result)
        self._owned.add(q.id)
        self._log(f"  return(qubit: {self.register.describe([q])})")
        if msg.dest == self.name:
            return q
        return self.send_qubit(q, msg.dest, src=msg.src)

    def _teleport(self, q: QubitHandle, dest: str) -> TeleportResult:
        # quantum plane: pick the pair toward the next hop
        hop = shared_table_lookup(self.table, dest)
        self._log(f"teleport(qubit: {self.register.describe([q])}, nextHop: {hop})")
        ep_id, local_half = self.epm.take_epr(self.name, hop)
        remote_half = self.epm.lookup_remote_half(ep_id, hop)
        pair_state = self.register.describe([local_half, remote_half])
        self._log(f"  Entangled Pair ID: {ep_id}, state: {pair_state}")
        self._log(f"  Bell State: {self.register.describe([q, local_half, remote_half])}")
        bsm = bell_state_measurement(self.register, q, local_half)
        self._owned.discard(q.id)
        self._log(f"  return(epId: {ep_id}, bsmResult: {bsm.value})")
        return TeleportResult(ep_id=ep_id, bsm_result=bsm)

    def _forward(self, src: str, dest: str, result: TeleportResult) -> ForwardMessage:
        # digital plane: address the message through the same table
        hop = shared_table_lookup(self.table, dest)
        message = ForwardMessage(src=src, dest=dest, teleport_result=result, next_hop=hop)
        self._log(f"forward({message.wire()})")
        return message

    def _require_owned(self, q: QubitHandle) -> None:
        if not self.owns(q):
            raise ForeignQubitError(f"Node '{self.name}' does not own qubit {q.id}")

    def _log(self, line: str) -> None:
        self.trace.append(self.name, line)
