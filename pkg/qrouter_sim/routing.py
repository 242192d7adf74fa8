"""
Forwarding tables shared by the digital and quantum forwarding planes
"""

from typing import Annotated, Iterable

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qrouter_sim.errors import UnroutableError
from qrouter_sim.log import logger

NodeId = Annotated[str, Field(min_length=1, description="Node name, unique in a topology")]


class ForwardingEntry(BaseModel):
    """One row of a forwarding table"""

    model_config = ConfigDict(extra="forbid")

    destination: NodeId
    forwarding_interface: Annotated[str, Field(min_length=1, description="Next hop")]
    link_metric: Annotated[int, Field(ge=1, description="Cost of the first link")]


class ForwardingTable(BaseModel):
    """Destinations reachable from owner, with the next hop for each"""

    owner: NodeId
    entries: list[ForwardingEntry] = []

    @model_validator(mode="after")
    def _unique_rows(self) -> "ForwardingTable":
        seen = set()
        for entry in self.entries:
            key = (entry.destination, entry.forwarding_interface)
            if key in seen:
                raise ValueError(
                    f"Table of '{self.owner}' has two entries for {entry.destination} "
                    f"via {entry.forwarding_interface}"
                )
            seen.add(key)
        return self

    def destinations(self) -> list[str]:
        return sorted({entry.destination for entry in self.entries})

    def render(self) -> str:
        """Print the table in the Destination / Forwarding Interface / Link Metric layout"""
        lines = [f"{self.owner} Forwarding Table", "Destination\tForwarding Interface\tLink Metric"]
        for entry in self.entries:
            lines.append(
                f'"{entry.destination}"\t"{entry.forwarding_interface}"\t{entry.link_metric}'
            )
        return "\n".join(lines)


def next_hop(table: ForwardingTable, dest: str) -> str:
    """
    Next hop toward dest: the lowest link metric wins, ties go to the
    lexicographically smallest interface name

    Raises:
        UnroutableError: If the table has no entry for dest
    """
    candidates = [entry for entry in table.entries if entry.destination == dest]
    if not candidates:
        raise UnroutableError(f"Node '{table.owner}' has no route to '{dest}'")
    best = min(candidates, key=lambda entry: (entry.link_metric, entry.forwarding_interface))
    return best.forwarding_interface


def shared_table_lookup(table: ForwardingTable, dest: str) -> str:
    """The single lookup used by both the digital and the quantum plane"""
    return next_hop(table, dest)


class Link(BaseModel):
    """Bidirectional link carrying both a classical channel and entangled pairs"""

    model_config = ConfigDict(extra="forbid")

    a: NodeId
    b: NodeId
    metric: Annotated[int, Field(ge=1, description="Additive link cost")] = 1

    @model_validator(mode="after")
    def _no_self_link(self) -> "Link":
        if self.a == self.b:
            raise ValueError(f"Link from '{self.a}' to itself")
        return self


def topology_graph(links: Iterable[Link], nodes: Iterable[str] = ()) -> nx.Graph:
    """Undirected graph of the topology; parallel links keep the lowest metric"""
    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    for link in links:
        if graph.has_edge(link.a, link.b) and graph[link.a][link.b]["metric"] <= link.metric:
            continue
        graph.add_edge(link.a, link.b, metric=link.metric)
    return graph


def build_tables(
    links: Iterable[Link], nodes: Iterable[str] = ()
) -> tuple[dict[str, ForwardingTable], list[str]]:
    """
    Derive every node's forwarding table from shortest paths

    Args:
        links: Topology links
        nodes: Extra nodes, so isolated ones get an (empty) table

    Returns:
        The tables by owner, and one warning per unreachable (node, destination)
    """
    tables, warnings = _derive_tables(topology_graph(links, nodes))
    for warning in warnings:
        logger.warning(f"Disconnected topology: {warning}")
    return tables, warnings


def _derive_tables(graph: nx.Graph) -> tuple[dict[str, ForwardingTable], list[str]]:
    names = sorted(graph.nodes)
    tables = {name: ForwardingTable(owner=name) for name in names}
    warnings: list[str] = []

    for dest in names:
        distance = nx.single_source_dijkstra_path_length(graph, dest, weight="metric")
        for name in names:
            if name == dest:
                continue
            if name not in distance:
                warnings.append(f"'{name}' cannot reach '{dest}'")
                continue
            _, hop = min(
                (graph[name][neighbor]["metric"] + distance[neighbor], neighbor)
                for neighbor in graph.neighbors(name)
                if neighbor in distance
            )
            tables[name].entries.append(
                ForwardingEntry(
                    destination=dest,
                    forwarding_interface=hop,
                    link_metric=graph[name][hop]["metric"],
                )
            )
    return tables, warnings


def forwarding_loop(tables: dict[str, ForwardingTable], dest: str) -> list[str] | None:
    """
    Follow next hops toward dest from every node

    Returns:
        The first cycle found, repeated node at both ends, or None
    """
    for start in sorted(tables):
        path = [start]
        node = start
        while node != dest:
            try:
                node = next_hop(tables[node], dest)
            except UnroutableError:
                break
            if node in path:
                return path[path.index(node):] + [node]
            path.append(node)
    return None


class Topology(BaseModel):
    """Nodes, links and optional explicit forwarding tables"""

    model_config = ConfigDict(extra="forbid")

    nodes: list[NodeId]
    links: list[Link] = []
    tables: dict[str, list[ForwardingEntry]] = {}

    @model_validator(mode="after")
    def _consistent(self) -> "Topology":
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            duplicates = sorted({n for n in self.nodes if self.nodes.count(n) > 1})
            raise ValueError(f"Duplicate nodes: {', '.join(duplicates)}")

        pairs = set()
        for link in self.links:
            for end in (link.a, link.b):
                if end not in known:
                    raise ValueError(f"Link endpoint '{end}' is not a declared node")
            pair = frozenset((link.a, link.b))
            if pair in pairs:
                raise ValueError(f"Duplicate link between '{link.a}' and '{link.b}'")
            pairs.add(pair)

        for owner, entries in self.tables.items():
            if owner not in known:
                raise ValueError(f"Table owner '{owner}' is not a declared node")
            neighbors = self.neighbors(owner)
            for entry in entries:
                if entry.destination not in known:
                    raise ValueError(
                        f"Table of '{owner}' routes to unknown node '{entry.destination}'"
                    )
                if entry.forwarding_interface not in neighbors:
                    raise ValueError(
                        f"Table of '{owner}' forwards via '{entry.forwarding_interface}', "
                        f"which is not a neighbor"
                    )
            ForwardingTable(owner=owner, entries=entries)

        if self.tables:
            tables = self._apply_explicit(_derive_tables(self.graph())[0])
            for dest in self.nodes:
                loop = forwarding_loop(tables, dest)
                if loop:
                    raise ValueError(f"Forwarding loop toward '{dest}': {' -> '.join(loop)}")
        return self

    def neighbors(self, node: str) -> set[str]:
        found = set()
        for link in self.links:
            if link.a == node:
                found.add(link.b)
            elif link.b == node:
                found.add(link.a)
        return found

    def graph(self) -> nx.Graph:
        return topology_graph(self.links, self.nodes)

    def resolve_tables(self) -> tuple[dict[str, ForwardingTable], list[str]]:
        """
        Derived tables with explicit entries applied on top

        Explicit entries for a destination replace the derived entry for it.
        """
        tables, warnings = build_tables(self.links, self.nodes)
        return self._apply_explicit(tables), warnings

    def _apply_explicit(
        self, tables: dict[str, ForwardingTable]
    ) -> dict[str, ForwardingTable]:
        for owner, entries in self.tables.items():
            explicit = {entry.destination for entry in entries}
            kept = [entry for entry in tables[owner].entries if entry.destination not in explicit]
            tables[owner] = ForwardingTable(owner=owner, entries=kept + list(entries))
        return tables
