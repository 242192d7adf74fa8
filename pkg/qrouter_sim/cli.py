"""
Command-line front end: load a topology, run a scenario, print the trace or a report
"""

import json
import os
from enum import Enum
from pathlib import Path
from typing import Annotated

import typer
from pydantic import BaseModel, ValidationError, model_validator

from qrouter_sim.epm import ReserveEntry
from qrouter_sim.errors import QRouterError, TopologyError
from qrouter_sim.log import logger
from qrouter_sim.netsim import HopRecord, Injection, Scenario, SimulationResult, TraceEntry
from qrouter_sim.netsim import run, search_seed
from qrouter_sim.qsim import MAX_QUBITS
from qrouter_sim.routing import ForwardingEntry, Topology

DEFAULT_MAX_QUBITS = int(os.environ.get("QROUTER_MAX_QUBITS", str(MAX_QUBITS)))

app = typer.Typer()


class TopologyFile(Topology):
    """Topology JSON document: nodes, links, optional tables and pair reserve"""

    reserve: list[ReserveEntry] = []

    @model_validator(mode="after")
    def _reserve_on_known_nodes(self) -> "TopologyFile":
        known = set(self.nodes)
        for entry in self.reserve:
            for name in (entry.a, entry.b):
                if name not in known:
                    raise ValueError(f"Reserve entry uses unknown node '{name}'")
        return self

    @classmethod
    def load(cls, path: str | Path) -> "TopologyFile":
        """
        Load and validate a topology file

        Raises:
            TopologyError: With a line/column or field-path diagnostic
        """
        try:
            with open(path, "r") as f:
                document = json.load(f)
        except OSError as e:
            raise TopologyError(f"Cannot read topology file '{path}': {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise TopologyError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e

        try:
            return cls.model_validate(document)
        except ValidationError as e:
            details = "; ".join(
                f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
                for error in e.errors()
            )
            raise TopologyError(f"{path}: {details}") from e

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))


class RunReport(BaseModel):
    """Machine-readable summary of a run"""

    terminal_fidelity: float
    hop_count: int
    ep_ids_used: list[int]
    bsm_results: list[int]
    hops: list[HopRecord]
    trace: list[TraceEntry]
    tables: dict[str, list[ForwardingEntry]] | None = None

    @model_validator(mode="after")
    def _one_entry_per_hop(self) -> "RunReport":
        if not self.hop_count == len(self.ep_ids_used) == len(self.bsm_results):
            raise ValueError("hop_count, ep_ids_used and bsm_results disagree")
        return self

    @classmethod
    def from_result(
        cls, result: SimulationResult, tables: dict[str, list[ForwardingEntry]] | None = None
    ) -> "RunReport":
        hops = result.hops
        fidelities = [flow.fidelity for flow in result.flows]
        return cls(
            terminal_fidelity=min(
                (fidelity if fidelity is not None else 0.0 for fidelity in fidelities),
                default=0.0,
            ),
            hop_count=len(hops),
            ep_ids_used=[hop.ep_id for hop in hops],
            bsm_results=[hop.bsm_result for hop in hops],
            hops=hops,
            trace=result.trace.entries,
            tables=tables,
        )


class OutputFormat(str, Enum):
    text = "text"
    report = "report"


def _parse_numbers(value: str, count: int, flag: str) -> list[float]:
    try:
        numbers = [float(part) for part in value.split(",")]
    except ValueError:
        raise typer.BadParameter(f"expected {count} comma-separated numbers", param_hint=flag)
    if len(numbers) != count:
        raise typer.BadParameter(f"expected {count} comma-separated numbers", param_hint=flag)
    return numbers


def _parse_state(
    state: str | None, state_complex: str | None, random_state: bool
) -> tuple[complex, complex] | None:
    chosen = sum(option is not None for option in (state, state_complex)) + int(random_state)
    if chosen != 1:
        raise typer.BadParameter(
            "give exactly one of --state, --state-complex, --random-state",
            param_hint="--state",
        )
    if state is not None:
        alpha, beta = _parse_numbers(state, 2, "--state")
        return complex(alpha), complex(beta)
    if state_complex is not None:
        re_a, im_a, re_b, im_b = _parse_numbers(state_complex, 4, "--state-complex")
        return complex(re_a, im_a), complex(re_b, im_b)
    return None


def _parse_reserve(overrides: list[str]) -> list[ReserveEntry]:
    entries = []
    for override in overrides:
        parts = override.split(",")
        if len(parts) != 3 or not parts[2].strip().isdigit():
            raise typer.BadParameter(
                f"'{override}' should look like A,B,COUNT", param_hint="--reserve-override"
            )
        entries.append(ReserveEntry(a=parts[0].strip(), b=parts[1].strip(), count=int(parts[2])))
    return entries


def _merge_reserve(base: list[ReserveEntry], overrides: list[ReserveEntry]) -> list[ReserveEntry]:
    merged = {frozenset((entry.a, entry.b)): entry for entry in base}
    for entry in overrides:
        merged[frozenset((entry.a, entry.b))] = entry
    return list(merged.values())


@app.command()
def main(
    source: Annotated[
        list[str], typer.Option("--source", "-s", help="Source node (repeat for more flows)")
    ],
    dest: Annotated[
        list[str], typer.Option("--dest", "-d", help="Destination node, paired with --source")
    ],
    topology: Annotated[
        str | None,
        typer.Option(
            "--topology",
            "-t",
            help="Path to topology file (default: topology.json or QROUTER_TOPOLOGY_PATH env var)",
        ),
    ] = None,
    state: Annotated[
        str | None, typer.Option("--state", help="Real amplitudes ALPHA,BETA")
    ] = None,
    state_complex: Annotated[
        str | None,
        typer.Option("--state-complex", help="Complex amplitudes RE,IM,RE,IM"),
    ] = None,
    random_state: Annotated[
        bool, typer.Option("--random-state", help="Send a random state from the seeded RNG")
    ] = False,
    seed: Annotated[int, typer.Option("--seed", help="Simulation seed")] = 0,
    output: Annotated[
        OutputFormat, typer.Option("--format", help="Print the text trace or a JSON report")
    ] = OutputFormat.text,
    reserve_override: Annotated[
        list[str] | None,
        typer.Option("--reserve-override", help="Pre-created pairs A,B,COUNT (repeatable)"),
    ] = None,
    interleave: Annotated[
        bool, typer.Option("--interleave", help="Interleave the events of multiple flows")
    ] = False,
    find_seed: Annotated[
        str | None,
        typer.Option("--find-seed", help="Print the first seed yielding these bsmResults, e.g. 0,3"),
    ] = None,
    seed_limit: Annotated[
        int, typer.Option("--seed-limit", help="Seeds tried by --find-seed")
    ] = 10_000,
    show_tables: Annotated[
        bool, typer.Option("--show-tables", help="Print the resolved forwarding tables first, or add them to the report")
    ] = False,
):
    """Quantum router simulator - teleport a qubit across a network of routers"""
    if len(source) != len(dest):
        raise typer.BadParameter("every --source needs a matching --dest", param_hint="--dest")
    amplitudes = _parse_state(state, state_complex, random_state)
    overrides = _parse_reserve(reserve_override or [])
    wanted = None
    if find_seed is not None:
        try:
            wanted = [int(part) for part in find_seed.split(",")]
        except ValueError:
            raise typer.BadParameter("expected comma-separated integers", param_hint="--find-seed")
    if not 1 <= DEFAULT_MAX_QUBITS <= MAX_QUBITS:
        typer.echo(
            f"error: QROUTER_MAX_QUBITS must be between 1 and {MAX_QUBITS}", err=True
        )
        raise typer.Exit(code=2)

    # Priority: --topology > QROUTER_TOPOLOGY_PATH env var > topology.json
    path = topology or os.environ.get("QROUTER_TOPOLOGY_PATH", "topology.json")
    try:
        document = TopologyFile.load(path)
    except TopologyError as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=2)
    logger.info(f"Loaded topology {path}: {len(document.nodes)} nodes, {len(document.links)} links")

    try:
        scenario = Scenario(
            topology=Topology(nodes=document.nodes, links=document.links, tables=document.tables),
            injections=[
                Injection(source=s, dest=d, state=amplitudes) for s, d in zip(source, dest)
            ],
            reserve=_merge_reserve(document.reserve, overrides),
            seed=seed,
            interleaved=interleave,
            max_qubits=DEFAULT_MAX_QUBITS,
        )
    except ValidationError as e:
        typer.echo(f"error: {e.errors()[0]['msg']}", err=True)
        raise typer.Exit(code=2)

    try:
        if wanted is not None:
            found = search_seed(scenario, wanted, limit=seed_limit)
            if found is None:
                typer.echo(f"error: no seed below {seed_limit} yields {wanted}", err=True)
                raise typer.Exit(code=1)
            typer.echo(str(found))
            return
        result = run(scenario)
    except QRouterError as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=1)

    tables = scenario.topology.resolve_tables()[0] if show_tables else None
    if output == OutputFormat.report:
        entries = None
        if tables is not None:
            entries = {name: tables[name].entries for name in scenario.topology.nodes}
        typer.echo(RunReport.from_result(result, entries).model_dump_json(indent=2))
        return

    if tables is not None:
        for name in scenario.topology.nodes:
            typer.echo(tables[name].render())
            typer.echo("")
    typer.echo(result.trace.render())
