import json
import shutil
import subprocess
import sys

import pytest

from hardyforge.cli import cli_main


def run(tmp_path, *argv):
    code = cli_main([*argv, "--out-dir", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    return code, manifest


def write_config(tmp_path, kind="punctured_space", n=3, **op):
    cfg = {"domain": {"kind": kind, "n": n}}
    if op:
        cfg["operator"] = op
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


# --------------------------------------------------------------------------- exit codes


def test_verify_1d_classical(tmp_path):
    code, manifest = run(tmp_path, "verify-1d", "--w", "1/(4*t^2)", "--psi", "sqrt(t)")
    assert code == 0
    assert manifest["verdicts"]["verify-1d"] == "Optimal"
    assert manifest["exit_code"] == 0 and manifest["error"] is None
    report = json.loads((tmp_path / "verify_1d.json").read_text())
    assert report["overall"] == "Optimal"


def test_verify_1d_family_on_finite_interval(tmp_path):
    code, _ = run(tmp_path, "verify-1d", "--w", "(2*t - t^2)^(-2)", "--psi", "sqrt(2*t - t^2)", "--interval", "0,2")
    assert code == 0


def test_verify_1d_euler_pair_fails(tmp_path):
    code, manifest = run(tmp_path, "verify-1d", "--w", "3/(16*t^2)", "--psi", "t^(1/4)")
    assert code == 1
    assert manifest["verdicts"]["verify-1d"] == "NotOptimal"


def test_bad_expression_is_usage_error(tmp_path):
    code, manifest = run(tmp_path, "verify-1d", "--w", "__import__('os')", "--psi", "t")
    assert code == 2
    assert manifest["error"].startswith("ExpressionError")


def test_bad_interval(tmp_path):
    assert run(tmp_path, "verify-1d", "--w", "1/t^2", "--psi", "t", "--interval", "2,1")[0] == 2


def test_missing_config(tmp_path):
    code, manifest = run(tmp_path, "construct", "--config", str(tmp_path / "nope.json"))
    assert code == 2
    assert "not found" in manifest["error"]


def test_unknown_domain_kind(tmp_path):
    code, _ = run(tmp_path, "construct", "--config", write_config(tmp_path, kind="torus"))
    assert code == 2


def test_unknown_option(tmp_path):
    assert cli_main(["compare-kl", "--bogus", "--out-dir", str(tmp_path)]) == 2


def test_compare_kl(tmp_path):
    code, manifest = run(tmp_path, "compare-kl", "--n", "3", "--gamma", "1")
    assert code == 0
    assert manifest["verdicts"]["dominates"] is True
    lines = (tmp_path / "compare_kl.csv").read_text().splitlines()
    assert lines[0] == "r,W_ours,W_KL,ratio"
    assert lines[1].split(",")[-1] == "4"


def test_compare_kl_bad_dimension(tmp_path):
    assert run(tmp_path, "compare-kl", "--n", "2")[0] == 2


def test_construct_punctured(tmp_path):
    code, manifest = run(tmp_path, "construct", "--config", write_config(tmp_path), "--points", "200")
    assert code == 0
    lines = (tmp_path / "weight.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,x3,r,t,W,v,h"
    assert len(lines) == 201
    assert manifest["inputs"]["route"] == "green potential"


def test_eig_from_constructed_weight(tmp_path):
    cfg = write_config(tmp_path)
    # the weight CSV from construct only covers one exhaustion member, too narrow for three annuli
    run(tmp_path, "construct", "--config", cfg, "--points", "200")
    code, manifest = run(tmp_path, "eig", "--config", cfg, "--weight", str(tmp_path / "weight.csv"))
    assert code == 2
    assert "cover" in manifest["error"]


def test_eig_punctured(tmp_path):
    code, manifest = run(tmp_path, "eig", "--config", write_config(tmp_path), "--h", "0.02")
    assert code == 0
    assert manifest["verdicts"]["eig"] == "PASS"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema"] == "hardy-forge/1"
    assert (tmp_path / "report.csv").exists()


def test_eig_rejects_bounded_domain(tmp_path):
    assert run(tmp_path, "eig", "--config", write_config(tmp_path, kind="half_ball"))[0] == 2


def test_green_dump(tmp_path):
    code, _ = run(tmp_path, "green-dump", "--config", write_config(tmp_path, kind="half_space"), "--points", "50")
    assert code == 0
    header = (tmp_path / "green_potential.csv").read_text().splitlines()[0]
    assert header == "x1,x2,x3,G,dG_dx1,dG_dx2,dG_dx3"


def test_green_dump_exterior_ball(tmp_path):
    cfg = write_config(tmp_path, kind="exterior_ball", preset="laplacian_robin", gamma=1.0)
    assert run(tmp_path, "green-dump", "--config", cfg)[0] == 2


def test_example_ext_ball(tmp_path):
    code, manifest = run(tmp_path, "example", "ext-ball")
    assert code == 0
    assert manifest["inputs"]["route"] == "explicit supersolution"
    assert manifest["verdicts"]["optimality_at_infinity"] == "PASS"
    assert all(manifest["verdicts"]["checks"].values())


# --------------------------------------------------------------------------- reproducibility


def test_manifest_fields(tmp_path):
    _, manifest = run(tmp_path, "compare-kl", "--seed", "7")
    for key in ("schema", "command", "argv", "seed", "threads", "tol", "strict", "csv_float_format", "inputs",
                "versions", "verdicts", "files", "exit_code", "error"):
        assert key in manifest
    assert manifest["seed"] == 7
    assert "timestamp" not in json.dumps(manifest)


def test_byte_identical_reruns(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    cli_main(["construct", "--config", cfg, "--points", "300", "--seed", "3", "--out-dir", str(out)])
    first = snapshot(out)
    cli_main(["construct", "--config", cfg, "--points", "300", "--seed", "3", "--out-dir", str(out)])
    assert snapshot(out) == first


def test_threads_do_not_change_results(tmp_path):
    cfg = write_config(tmp_path)
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        cli_main(["construct", "--config", cfg, "--points", "300", "--threads", threads, "--out-dir", str(out)])
        outs.append(out)
    a, b = snapshot(outs[0]), snapshot(outs[1])
    assert a["weight.csv"] == b["weight.csv"]
    ma, mb = json.loads(a["manifest.json"]), json.loads(b["manifest.json"])
    assert ma["verdicts"] == mb["verdicts"] and ma["threads"] == 1 and mb["threads"] == 4


def test_installed_script(tmp_path):
    exe = shutil.which("hardy-forge")
    cmd = [exe] if exe else [sys.executable, "-m", "hardyforge.cli"]
    proc = subprocess.run([*cmd, "compare-kl", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ratio at r=1: 4" in proc.stdout


def test_no_command_is_usage_error(tmp_path, capsys):
    assert cli_main([]) == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["--version"])
    assert exc.value.code == 0
