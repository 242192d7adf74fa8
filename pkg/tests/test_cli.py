"""
Tests for the command-line front end
"""

import json
import logging
from pathlib import Path

import pytest
from typer.testing import CliRunner

from qrouter_sim.cli import TopologyFile, app
from qrouter_sim.errors import TopologyError
from qrouter_sim.log import logger
from tests.test_netsim import GOLDEN_TRACE

HERE = Path(__file__).parent
LINE3 = str(HERE / "line3.json")
TABLE1 = str(HERE / "table1.json")

runner = CliRunner()


@pytest.fixture(autouse=True)
def quiet_logger():
    """只保留 error 级别日志，避免混入输出"""
    logger.setLevel(logging.ERROR)
    yield
    logger.setLevel(logging.INFO)


def _invoke(*args: str):
    return runner.invoke(app, list(args))


def _prototype(*args: str):
    return _invoke(
        "-s", "Source", "-d", "Destination", "-t", LINE3, "--state", "0.4091,0.9125", *args
    )


def test_find_seed_then_golden_trace() -> None:
    """测试先查找种子，再用该种子复现原型打印"""
    found = _prototype("--find-seed", "0,3")
    assert found.exit_code == 0, found.output
    seed = int(found.stdout.strip())

    result = _prototype("--seed", str(seed))
    assert result.exit_code == 0, result.output
    assert result.stdout == GOLDEN_TRACE + "\n"


def test_basis_state() -> None:
    """测试传输 |0>"""
    result = _invoke("-s", "Source", "-d", "Destination", "-t", LINE3, "--state", "1,0")
    assert result.exit_code == 0, result.output
    assert result.stdout.rstrip().endswith("return(qubit: (1.0000)|0>)")


def test_complex_state() -> None:
    """测试复数振幅"""
    result = _invoke(
        "-s", "Source", "-d", "Destination", "-t", LINE3, "--state-complex", "0.6,0,0,0.8"
    )
    assert result.exit_code == 0, result.output
    assert result.stdout.rstrip().endswith(
        "return(qubit: (0.6000)|0> + (0.0000+0.8000i)|1>)"
    )


def test_random_state_report() -> None:
    """测试随机态的 JSON 报告"""
    result = _invoke(
        "-s", "Source", "-d", "Destination", "-t", LINE3,
        "--random-state", "--seed", "7", "--format", "report",
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["terminal_fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert report["hop_count"] == 2
    assert report["ep_ids_used"] == [0, 1]
    assert all(0 <= value <= 3 for value in report["bsm_results"])


def test_text_and_report_agree() -> None:
    """测试文本打印与 JSON 报告的 epId/bsmResult 一致"""
    text = _prototype("--seed", "5")
    report = json.loads(_prototype("--seed", "5", "--format", "report").stdout)

    returned = [
        line.strip() for line in text.stdout.splitlines() if line.startswith("  return(epId:")
    ]
    assert returned == [
        f"return(epId: {ep_id}, bsmResult: {bsm})"
        for ep_id, bsm in zip(report["ep_ids_used"], report["bsm_results"])
    ]
    assert [entry["line"] for entry in report["trace"]] == [
        line for line in text.stdout.splitlines() if line.startswith((" ", "getqubit", "teleport",
                                                                     "forward", "qsr"))
    ]


def test_reserve_override() -> None:
    """测试预先创建两对 Source-QIR 纠缠对"""
    result = _prototype("--reserve-override", "Source,QIR,2", "--format", "report")
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["ep_ids_used"] == [0, 2]


def test_reserve_override_malformed() -> None:
    """测试格式错误的预留参数"""
    assert _prototype("--reserve-override", "Source,QIR").exit_code == 2


def test_show_tables() -> None:
    """测试打印转发表"""
    result = _invoke(
        "-s", "Source", "-d", "Dest", "-t", TABLE1, "--state", "1,0", "--show-tables"
    )
    assert result.exit_code == 0, result.output
    assert "QR1 Forwarding Table" in result.stdout
    assert '"Dest"\t"QR3"\t1' in result.stdout
    assert "nextHop: QR3" in result.stdout


def test_show_tables_in_report() -> None:
    """测试 JSON 报告中包含转发表且输出仍是合法 JSON"""
    result = _invoke(
        "-s", "Source", "-d", "Dest", "-t", TABLE1, "--state", "1,0",
        "--show-tables", "--format", "report",
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert {"destination": "Dest", "forwarding_interface": "QR3", "link_metric": 1} in (
        report["tables"]["QR1"]
    )
    assert set(report["tables"]) == {"Source", "QR1", "QR2", "QR3", "Dest"}


def test_report_without_tables() -> None:
    """测试未指定 --show-tables 时报告不含转发表"""
    result = _prototype("--format", "report")
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["tables"] is None


def test_forwarding_loop_rejected(tmp_path: Path) -> None:
    """测试显式转发表形成环路时退出码为 2"""
    path = tmp_path / "topology.json"
    path.write_text(json.dumps({
        "nodes": ["A", "B", "D"],
        "links": [{"a": "A", "b": "B"}, {"a": "B", "b": "D"}, {"a": "A", "b": "D"}],
        "tables": {
            "A": [{"destination": "D", "forwarding_interface": "B", "link_metric": 1}],
            "B": [{"destination": "D", "forwarding_interface": "A", "link_metric": 1}],
        },
    }))
    result = _invoke("-s", "A", "-d", "D", "-t", str(path), "--state", "1,0")
    assert result.exit_code == 2
    assert "Forwarding loop toward 'D'" in result.output


def test_interleaved_flows() -> None:
    """测试两条交错的流"""
    result = _invoke(
        "-s", "Source", "-d", "Destination", "-s", "Destination", "-d", "Source",
        "-t", LINE3, "--state", "0.6,0.8", "--interleave", "--format", "report",
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["hop_count"] == 4
    assert {hop["flow"] for hop in report["hops"]} == {0, 1}


def test_topology_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """测试从环境变量读取拓扑路径"""
    monkeypatch.setenv("QROUTER_TOPOLOGY_PATH", LINE3)
    result = _invoke("-s", "Source", "-d", "Destination", "--state", "1,0")
    assert result.exit_code == 0, result.output
    assert result.stdout.startswith("Source\n")


def test_missing_state() -> None:
    """测试没有给出量子态"""
    assert _invoke("-s", "Source", "-d", "Destination", "-t", LINE3).exit_code == 2


def test_two_states() -> None:
    """测试同时给出两种量子态"""
    result = _prototype("--random-state")
    assert result.exit_code == 2


def test_unpaired_source() -> None:
    """测试 --source 与 --dest 数量不一致"""
    result = _invoke("-s", "Source", "-s", "QIR", "-d", "Destination", "-t", LINE3,
                     "--state", "1,0")
    assert result.exit_code == 2


def test_unknown_node() -> None:
    """测试拓扑中不存在的源节点"""
    result = _invoke("-s", "Mars", "-d", "Destination", "-t", LINE3, "--state", "1,0")
    assert result.exit_code == 2
    assert "Mars" in result.output


def test_missing_topology_file(tmp_path: Path) -> None:
    """测试拓扑文件不存在"""
    result = _invoke("-s", "A", "-d", "B", "-t", str(tmp_path / "nope.json"), "--state", "1,0")
    assert result.exit_code == 2
    assert "Cannot read topology file" in result.output


def test_unknown_topology_key(tmp_path: Path) -> None:
    """测试拓扑文件包含未知字段"""
    path = tmp_path / "topology.json"
    path.write_text(json.dumps({"nodes": ["A", "B"], "linkz": []}))
    result = _invoke("-s", "A", "-d", "B", "-t", str(path), "--state", "1,0")
    assert result.exit_code == 2
    assert "linkz: Extra inputs are not permitted" in result.output


def test_malformed_topology_json(tmp_path: Path) -> None:
    """测试 JSON 语法错误时报告行号与列号"""
    path = tmp_path / "topology.json"
    path.write_text('{\n  "nodes": [\n    "A"\n  ]\n  "links": []\n}')
    result = _invoke("-s", "A", "-d", "B", "-t", str(path), "--state", "1,0")
    assert result.exit_code == 2
    assert f"{path}:5:3:" in result.output


def test_unroutable_destination(tmp_path: Path) -> None:
    """测试目的地不可达时退出码为 1"""
    path = tmp_path / "topology.json"
    path.write_text(json.dumps({
        "nodes": ["A", "B", "Island"],
        "links": [{"a": "A", "b": "B"}],
    }))
    result = _invoke("-s", "A", "-d", "Island", "-t", str(path), "--state", "1,0")
    assert result.exit_code == 1
    assert "no route to 'Island'" in result.output


def test_topology_file_save_and_load(tmp_path: Path) -> None:
    """测试拓扑文件保存后重新加载不变"""
    document = TopologyFile.load(TABLE1)
    path = tmp_path / "saved.json"
    document.save(path)
    assert TopologyFile.load(path) == document


def test_topology_file_reserve_unknown_node(tmp_path: Path) -> None:
    """测试预留条目使用未知节点"""
    path = tmp_path / "topology.json"
    path.write_text(json.dumps({
        "nodes": ["A", "B"],
        "links": [{"a": "A", "b": "B"}],
        "reserve": [{"a": "A", "b": "Z", "count": 1}],
    }))
    with pytest.raises(TopologyError, match="unknown node 'Z'"):
        TopologyFile.load(path)
