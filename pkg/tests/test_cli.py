"""Command-line interface: subcommands, output and exit codes."""

import io
import json
import shutil
import subprocess

import pytest

from dfsm import cli, parse
from dfsm.typecheck import typecheck


@pytest.fixture
def prog(tmp_path):
    def write(text, name="p.f"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def run_main(capsys, monkeypatch, argv, stdin=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_run_reads_records(prog, capsys, monkeypatch):
    p = prog("fun (v: Vector) (s: Double) -> vectorSMul v s")
    code, out, _ = run_main(capsys, monkeypatch, ["run", p], "2 1.0 2.0 3.0\n1 4.0 0.5\n")
    assert code == 0
    assert out.split("\n")[:2] == ["2 3 6", "1 2"]


def test_run_without_parameters(prog, capsys, monkeypatch):
    code, out, _ = run_main(capsys, monkeypatch, ["run", prog("vectorSum (build 3 (fun i -> 1.5))")])
    assert (code, out.strip()) == (0, "4.5")


def test_run_no_opt_gives_same_answer(prog, capsys, monkeypatch):
    p = prog("fun (v: Vector) -> vectorNorm (vectorAdd v v)")
    outs = [run_main(capsys, monkeypatch, ["run", p, *flag], "2 3.0 4.0\n")[1] for flag in ([], ["--no-opt"])]
    assert outs[0] == outs[1] == "10\n"


def test_deriv_output_reparses(prog, capsys, monkeypatch):
    p = prog("fun (W: Matrix) (x: Vector) -> vectorSum (build (length W) (fun i -> vectorDot W[i] x))")
    code, out, _ = run_main(capsys, monkeypatch, ["deriv", p, "--wrt", "x"])
    assert code == 0
    typecheck({}, parse(out))


def test_deriv_emits_c(prog, capsys, monkeypatch):
    p = prog("fun (v1: Vector) (v2: Vector) -> vectorDot v1 v2")
    code, out, _ = run_main(capsys, monkeypatch, ["deriv", p, "--wrt", "v1", "--emit", "c", "--name", "dot_d"])
    assert code == 0
    assert "vector dot_d(storage s, vector v1, vector v2)" in out


def test_check_grad_passes(prog, capsys, monkeypatch):
    p = prog("fun (v: Vector) -> vectorSum (vectorMap v (fun a -> sin a * a))")
    code, out, _ = run_main(capsys, monkeypatch, ["check-grad", p, "--wrt", "v", "--n", "5", "--show"])
    assert code == 0
    assert "PASS" in out and out.startswith("ad:")


def test_check_grad_with_input_file(prog, capsys, monkeypatch):
    p = prog("fun (x: Double) (y: Double) -> x * y")
    inputs = prog("2.0 3.0", "in.txt")
    code, out, _ = run_main(capsys, monkeypatch, ["check-grad", p, "--wrt", "x", "--inputs", inputs])
    assert code == 0 and "checked 1 entries" in out


def test_bench_json(capsys, monkeypatch):
    code, out, _ = run_main(capsys, monkeypatch, ["bench", "dot-grad", "--sizes", "8,16", "--json"])
    assert code == 0
    rows = [json.loads(line) for line in out.strip().split("\n")]
    assert [r["size"] for r in rows] == [8, 16]
    assert set(rows[0]) == {"size", "scalarOpsBase", "scalarOpsOpt", "allocsBase", "allocsOpt"}


def test_bench_table(capsys, monkeypatch):
    code, out, _ = run_main(capsys, monkeypatch, ["bench", "lse", "--sizes", "4"])
    assert code == 0 and out.split()[0] == "size"


@pytest.mark.parametrize("argv, stdin", [
    (["run", "{p}"], "0\n"),                                  # empty vector
    (["run", "{p}"], "2 1.0\n"),                              # truncated record
    (["run", "{p}"], ""),                                     # no input at all
    (["run", "{missing}"], None),
    (["deriv", "{p}", "--wrt", "nope"], None),
    (["bench", "nope"], None),
    (["bench", "lse", "--sizes", "0"], None),
    (["deriv", "{p}"], None),                                 # --wrt is required
    (["run", "{p}", "--pipeline", "{bad}"], "1 1.0\n"),
])
def test_usage_errors_exit_two(prog, capsys, monkeypatch, tmp_path, argv, stdin):
    files = {"p": prog("fun (v: Vector) -> vectorSum v"), "missing": str(tmp_path / "none.f"),
             "bad": prog("NoSuchFamily 3", "bad.pipe")}
    argv = [a.format(**files) for a in argv]
    code, _, err = run_main(capsys, monkeypatch, argv, stdin)
    assert code == 2
    assert err


def test_type_and_parse_errors_exit_two(prog, capsys, monkeypatch):
    assert run_main(capsys, monkeypatch, ["deriv", prog("fun (x: Double) -> x[0]"), "--wrt", "x"])[0] == 2
    assert run_main(capsys, monkeypatch, ["deriv", prog("fun (x: Double) ->"), "--wrt", "x"])[0] == 2
    assert run_main(capsys, monkeypatch,
                    ["deriv", prog("fun (k: Index) (v: Vector) -> v[k]"), "--wrt", "k"])[0] == 2


def test_runtime_failure_exits_one(prog, capsys, monkeypatch):
    p = prog("fun (v: Vector) -> v[5]")
    code, _, err = run_main(capsys, monkeypatch, ["run", p], "1 1.0\n")
    assert code == 1 and "dfsm:" in err


def test_codegen_failure_exits_one(prog, capsys, monkeypatch):
    p = prog("fun (v: Vector) -> build (length v) (fun i -> build 2 (fun j -> build 2 (fun k -> v[i])))")
    code, _, _ = run_main(capsys, monkeypatch, ["deriv", p, "--wrt", "v", "--emit", "c"])
    assert code == 1


@pytest.mark.skipif(shutil.which("dfsm") is None, reason="console script not installed")
def test_console_script(prog):
    p = prog("fun (a: Double) -> cos a")
    proc = subprocess.run(["dfsm", "deriv", p, "--wrt", "a"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "fun (a: Double) -> -sin a"
