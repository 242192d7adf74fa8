"""
Entangled Pair Management: creates, labels and hands out entangled pairs
"""

from typing import Annotated, Iterable, Literal

from pydantic import BaseModel, Field, model_validator

from qrouter_sim.errors import (
    DegeneratePairError,
    NotAnEndpointError,
    QRouterError,
    UnknownEprError,
    UnknownNodeError,
)
from qrouter_sim.log import logger
from qrouter_sim.qsim import QuantumRegister, QubitHandle
from qrouter_sim.teleport import make_bell_pair


class EprRecord(BaseModel):
    """One labeled entangled pair and the node holding each half"""

    id: Annotated[int, Field(ge=0, description="Entangled pair id (epId)")]
    node_a: Annotated[str, Field(description="Node holding qubit_a")]
    node_b: Annotated[str, Field(description="Node holding qubit_b")]
    qubit_a: QubitHandle
    qubit_b: QubitHandle
    status: Literal["available", "consumed", "recovered"] = "available"

    @model_validator(mode="after")
    def _distinct_halves(self) -> "EprRecord":
        if self.node_a == self.node_b:
            raise ValueError(f"Pair {self.id} has both halves at node {self.node_a}")
        if self.qubit_a.id == self.qubit_b.id:
            raise ValueError(f"Pair {self.id} uses qubit {self.qubit_a.id} twice")
        return self

    def connects(self, a: str, b: str) -> bool:
        return {self.node_a, self.node_b} == {a, b}

    @property
    def intact(self) -> bool:
        return self.qubit_a.live and self.qubit_b.live

    def half_of(self, holder: str) -> QubitHandle:
        if holder == self.node_a:
            return self.qubit_a
        if holder == self.node_b:
            return self.qubit_b
        raise NotAnEndpointError(
            f"Node '{holder}' is not an endpoint of pair {self.id} "
            f"({self.node_a}, {self.node_b})"
        )


class ReserveEntry(BaseModel):
    """Number of pairs to pre-create on a link before the first injection"""

    a: Annotated[str, Field(description="First endpoint")]
    b: Annotated[str, Field(description="Second endpoint")]
    count: Annotated[int, Field(ge=0, description="Pairs to pre-create")]


class EntangledPairManager:
    """Single logical EPM service with a view of every node"""

    def __init__(self, register: QuantumRegister, nodes: Iterable[str]):
        self.register = register
        self.nodes: set[str] = set(nodes)
        self._records: dict[int, EprRecord] = {}
        self._holders: dict[int, str] = {}
        self._pair_of: dict[int, int] = {}
        self._next_id = 0

    def create_epr(self, src: str, dest: str) -> int:
        """
        Create an entangled pair between src and dest and register its halves

        Returns:
            The new pair's id
        """
        self._require_node(src)
        self._require_node(dest)
        if src == dest:
            raise DegeneratePairError(f"Cannot create a pair between '{src}' and itself")
        qubit_a, qubit_b = make_bell_pair(self.register)
        record = EprRecord(
            id=self._next_id,
            node_a=src,
            node_b=dest,
            qubit_a=qubit_a,
            qubit_b=qubit_b,
        )
        self._records[record.id] = record
        self._holders[qubit_a.id] = src
        self._holders[qubit_b.id] = dest
        self._pair_of[qubit_a.id] = self._pair_of[qubit_b.id] = record.id
        self._next_id += 1
        logger.debug(f"createEpr({src}, {dest}) -> epId {record.id}")
        return record.id

    def provision(self, src: str, dest: str, count: int) -> list[int]:
        """Pre-create a reserve of pairs on one link"""
        return [self.create_epr(src, dest) for _ in range(count)]

    def available(self, a: str, b: str) -> list[EprRecord]:
        """Available pairs between a and b with both halves live, lowest id first"""
        return [
            record
            for record in self._records.values()
            if record.status == "available" and record.intact and record.connects(a, b)
        ]

    def claim(self, q: QubitHandle) -> int | None:
        """
        Withdraw the pair whose half q is, so it is never handed out by take_epr

        Returns:
            The pair id, or None if q is not an EPR half
        """
        id = self._pair_of.get(q.id)
        if id is None:
            return None
        record = self._records[id]
        if record.status == "available":
            record.status = "consumed"
            logger.debug(f"Pair {id} claimed as payload by {self._holders[q.id]}")
        return id

    def mark_recovered(self, id: int) -> None:
        """
        Record that the receiving end applied its correction for pair id

        Raises:
            QRouterError: If the pair was never used by a sender or was already recovered
        """
        record = self.record(id)
        if record.status == "recovered":
            raise QRouterError(f"Pair {id} was already recovered; duplicate forward rejected")
        if record.status != "consumed":
            raise QRouterError(f"Pair {id} was never used by a sender")
        record.status = "recovered"

    def take_epr(self, local: str, next_hop: str) -> tuple[int, QubitHandle]:
        """
        Consume the lowest-id available pair between local and next_hop,
        creating one on demand when none is available

        Returns:
            The pair id and the half held by local
        """
        self._require_node(local)
        self._require_node(next_hop)
        candidates = self.available(local, next_hop)
        if candidates:
            record = candidates[0]
        else:
            record = self._records[self.create_epr(local, next_hop)]
        record.status = "consumed"
        return record.id, record.half_of(local)

    def lookup_remote_half(self, id: int, holder: str) -> QubitHandle:
        """Half of pair id registered to holder; the status is left unchanged"""
        return self.record(id).half_of(holder)

    def record(self, id: int) -> EprRecord:
        record = self._records.get(id)
        if record is None:
            raise UnknownEprError(f"Entangled pair {id} does not exist")
        return record

    def records(self) -> list[EprRecord]:
        return list(self._records.values())

    def held_by(self, node: str) -> list[int]:
        """Labels distributed to node, in creation order"""
        return [
            record.id
            for record in self._records.values()
            if node in (record.node_a, record.node_b)
        ]

    def holder_of(self, q: QubitHandle) -> str | None:
        return self._holders.get(q.id)

    def _require_node(self, node: str) -> None:
        if node not in self.nodes:
            raise UnknownNodeError(
                f"Node '{node}' not in topology. Available nodes: {', '.join(sorted(self.nodes))}"
            )
