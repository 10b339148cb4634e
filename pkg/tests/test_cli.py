import copy
import json

import pytest

from graphheat import config as cfgmod
from graphheat.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_REFUSED, main


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


IDENTITIES = {"kind": "identities", "graph": {"family": "lattice", "n": 2},
              "params": {"radius": 4, "samples": 5, "points": 20}}


def test_presets_are_listed_and_valid(capsys):
    names = cfgmod.preset_names()
    for want in ("thm34-tree", "cor311-tree", "cor44-z3", "lemma91-z2", "lemma94-antitree",
                 "thm42-z3-alpha0", "thm42-z3-alpha1", "thm42-z3-alpha2"):
        assert want in names
        cfgmod.load_preset(want)
    assert main(["presets"]) == EXIT_OK
    assert "thm34-tree" in capsys.readouterr().out


def test_identities_pass(tmp_path):
    path = write_config(tmp_path, IDENTITIES)
    assert main(["identities", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
    text = (tmp_path / "o" / "identities.csv").read_text()
    assert "summation_by_parts" in text and "lattice_neighbor_sums" in text


@pytest.mark.parametrize("what, check", [("weight", "symmetry"), ("measure", "weak_symmetry")])
def test_identities_self_test_corruption(tmp_path, capsys, what, check):
    cfg = {"kind": "identities", "graph": {"family": "tree", "branching": "const:2", "depth": 12},
           "params": {"radius": 4, "samples": 5, "max_shell": 4}, "self_test_corrupt": what}
    path = write_config(tmp_path, cfg)
    assert main(["identities", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_FAIL
    failed = [l for l in capsys.readouterr().err.splitlines() if l.startswith("FAILED: ")]
    assert f"FAILED: {check}" in failed


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = copy.deepcopy(IDENTITIES)
    cfg["params"]["bogus"] = 1
    path = write_config(tmp_path, cfg)
    assert main(["identities", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err


def test_kind_mismatch_and_bad_json(tmp_path):
    path = write_config(tmp_path, IDENTITIES)
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["identities", "--config", str(broken)]) == EXIT_CONFIG
    assert main(["certify", "--preset", "no-such-preset"]) == EXIT_CONFIG


def test_missing_antitree_convention_is_config_error(tmp_path):
    cfg = {"kind": "certify", "graph": {"family": "antitree", "sphere": "affine:1,1"}}
    assert main(["certify", "--config", str(write_config(tmp_path, cfg))]) == EXIT_CONFIG


def test_refusal_exit_code(tmp_path):
    cfg = cfgmod.load_preset("cor44-z3")
    cfg["density"]["alpha"] = 1.5
    path = write_config(tmp_path, cfg)
    out = tmp_path / "o"
    assert main(["nonuniqueness", "--config", str(path), "--out", str(out)]) == EXIT_REFUSED
    assert "alpha > 2" in json.loads((out / "refusal.json").read_text())["refused"]


def test_certify_preset_and_failure(tmp_path):
    out = tmp_path / "ok"
    assert main(["certify", "--preset", "thm34-tree", "--out", str(out)]) == EXIT_OK
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["pass"] and (out / "q_search.csv").exists()
    cfg = {"kind": "certify", "graph": {"family": "tree", "branching": "const:2", "depth": 40},
           "density": {"family": "outer_degree_scaled", "rho0": 1.0},
           "params": {"barrier": {"family": "thm34", "A": 1.0, "Q": 3.0}, "radius": 20}}
    # Q below the threshold fails off the seed set
    bad = tmp_path / "bad"
    assert main(["certify", "--config", str(write_config(tmp_path, cfg)), "--out", str(bad)]) == EXIT_FAIL


def test_solve_and_spectrum(tmp_path):
    solve = {"kind": "solve", "graph": {"family": "lattice", "n": 2},
             "params": {"radius": 3, "T": 0.5, "dt": 0.05, "solver": "euler",
                        "initial": {"type": "indicator", "vertices": [[0, 0]]}}}
    assert main(["solve", "--config", str(write_config(tmp_path, solve)),
                 "--out", str(tmp_path / "s")]) == EXIT_OK
    spectrum_cfg = {"kind": "spectrum", "graph": {"family": "lattice", "n": 1}, "params": {"radius": 3}}
    assert main(["spectrum", "--config", str(write_config(tmp_path, spectrum_cfg, "sp.json")),
                 "--out", str(tmp_path / "p")]) == EXIT_OK


def test_exhaust_command(tmp_path):
    cfg = {"kind": "exhaust", "graph": {"family": "tree", "branching": "const:2", "depth": 40},
           "density": {"family": "power_decay", "alpha": 2.0},
           "params": {"initial": {"type": "indicator", "vertices": [[0, 0]]}, "j_list": [5, 10],
                      "T": 0.5, "dt": 0.05}}
    out = tmp_path / "e"
    assert main(["exhaust", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "exhaust.json").read_text())
    assert summary["time_derivative"]["holds"]


def test_preset_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["nonuniqueness", "--preset", "cor311-tree", "--out", str(a), "--seed", "7"]) == EXIT_OK
    assert main(["nonuniqueness", "--preset", "cor311-tree", "--out", str(b), "--seed", "7"]) == EXIT_OK
    for name in ("profiles.csv", "nonuniqueness.json", "nonuniqueness.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_table1_subset(tmp_path):
    cfg = {"kind": "table1", "params": {"rows": ["tree", "antitree"]}}
    out = tmp_path / "t"
    assert main(["table1", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == EXIT_OK
    md = (out / "table1.md").read_text()
    assert md.count("PASS") >= 4
    cfg["params"]["antitree_convention"] = "B"
    cfg["params"]["rows"] = ["antitree"]
    out_b = tmp_path / "tb"
    assert main(["table1", "--config", str(write_config(tmp_path, cfg, "b.json")),
                 "--out", str(out_b)]) == EXIT_FAIL
    assert "convention B" in (out_b / "table1.md").read_text()


def test_seed_out_of_range(tmp_path):
    path = write_config(tmp_path, IDENTITIES)
    assert main(["identities", "--config", str(path), "--seed", str(2 ** 64)]) == EXIT_CONFIG
