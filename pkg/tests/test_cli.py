import copy
import json
import subprocess
import sys

import pytest

from tkbundle.cli import REGISTRY, bundled_scenarios, list_checks, main, resolve_scenario, run_scenario
from tkbundle.scenario import ScenarioError, parse_scenario

FLAT = {
    "name": "tiny",
    "backend": "exact",
    "seed": 3,
    "charts": {"e": {"dim": 1, "domain": [[-1, 1]]}},
    "metrics": {"m": {"chart": "e", "components": [["1"]]}},
    "connections": {"flat": {"chart": "e", "type": "flat"}},
    "maps": {"id": {"source": "e", "target": "e", "exprs": ["x1"]}},
    "checks": [{"check": "round-trip", "connection": "flat", "order": 2, "samples": 3}],
}


def write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


class TestExitCodes:
    def test_flat_identity_passes(self, capsys):
        assert main(["run", "flat-identity"]) == 0
        assert "overall PASS" in capsys.readouterr().out

    def test_sphere_rotation_passes(self, capsys):
        assert main(["run", "sphere-rotation", "--order", "3", "--samples", "5"]) == 0

    def test_failing_check_exits_one(self, tmp_path, capsys):
        data = copy.deepcopy(FLAT)
        data["backend"] = "float"
        data["charts"]["e"]["domain"] = [[0.2, 1]]
        data["maps"]["cube"] = {"source": "e", "target": "e", "exprs": ["x1^3"]}
        data["checks"] = [{"check": "transition-linearity", "map": "cube",
                           "source_connection": "flat", "target_connection": "flat", "order": 2}]
        assert main(["run", write(tmp_path, data)]) == 1
        assert "FAIL transition-linearity" in capsys.readouterr().out

    def test_undeclared_metric_exits_two_with_key_path(self, tmp_path, capsys):
        data = copy.deepcopy(FLAT)
        data["checks"] = [{"check": "koszul", "metric": "nope"}]
        assert main(["run", write(tmp_path, data)]) == 2
        err = capsys.readouterr().err
        assert "checks[0].metric" in err and "nope" in err

    def test_invalid_json_exits_two(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["run", str(p)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_unknown_scenario(self, capsys):
        assert main(["run", "no-such-thing"]) == 2

    @pytest.mark.parametrize("flag", [["--order", "0"], ["--samples", "0"], ["--only", "bogus"]])
    def test_bad_flags(self, flag, capsys):
        assert main(["run", "flat-identity", *flag]) == 2


class TestValidation:
    def test_unknown_check(self):
        data = copy.deepcopy(FLAT)
        data["checks"] = [{"check": "bogus"}]
        with pytest.raises(ScenarioError) as err:
            run_scenario(parse_scenario(data, "x"))
        assert err.value.path == "checks[0].check"

    def test_bad_expression_location(self):
        data = copy.deepcopy(FLAT)
        data["maps"]["id"]["exprs"] = ["x1 +"]
        with pytest.raises(ScenarioError) as err:
            parse_scenario(data, "x")
        assert err.value.path.startswith("maps.id")

    def test_unknown_backend(self):
        data = copy.deepcopy(FLAT)
        data["backend"] = "quad"
        with pytest.raises(ScenarioError):
            parse_scenario(data, "x")

    def test_max_order_env(self, monkeypatch, capsys):
        monkeypatch.setenv("TKBUNDLE_MAX_ORDER", "2")
        assert main(["run", "flat-identity"]) == 2
        assert "exceeds the configured maximum 2" in capsys.readouterr().err
        monkeypatch.setenv("TKBUNDLE_MAX_ORDER", "9")
        assert main(["run", "flat-identity", "--only", "koszul"]) == 0


class TestReports:
    def test_json_is_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for p in (a, b):
            assert main(["run", "convex-combination", "--json", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()
        rows = [json.loads(line) for line in a.read_text().splitlines()]
        assert rows[-1]["summary"] and rows[-1]["pass"]
        keys = {"name", "k", "samples", "max_abs_residual", "max_rel_residual", "tolerance", "pass"}
        assert all(keys <= set(r) for r in rows[:-1])

    def test_seed_changes_output(self, capsys):
        main(["run", "sphere-rotation", "--only", "koszul", "--json", "-", "--seed", "1"])
        one = capsys.readouterr().out
        main(["run", "sphere-rotation", "--only", "koszul", "--json", "-", "--seed", "2"])
        assert one != capsys.readouterr().out

    def test_only_filters(self, capsys):
        main(["run", "flat-identity", "--only", "koszul", "--json", "-"])
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [r["name"] for r in rows[:-1]] == ["koszul"]

    def test_record_order_follows_declaration(self):
        scn = resolve_scenario("flat-identity")
        names = [r.name for r in run_scenario(scn, samples=2).records]
        assert names == [c["check"] for c in scn.checks]


class TestRegistry:
    NAMES = ["transition-linearity", "g-related-global", "g-related-local", "lifted-relatedness",
             "projective-consistency", "gauss-residual", "lifted-isometry", "lemma-A1", "lemma-A2",
             "convex-fibre"]

    def test_list_checks_names(self, capsys):
        assert main(["list-checks"]) == 0
        out = capsys.readouterr().out
        assert all(n in out for n in self.NAMES)
        assert out == list_checks() + "\n"

    def test_each_check_maps_to_one_operation(self):
        ops = [spec.operation for spec in REGISTRY.values()]
        assert len(set(ops)) == len(ops)
        assert all(callable(op) and op.__module__.startswith("tkbundle.") for op in ops)

    def test_every_check_is_exercised_by_a_bundled_scenario(self):
        used = {c["check"] for name in bundled_scenarios() for c in resolve_scenario(name).checks}
        assert used == set(REGISTRY)


@pytest.mark.parametrize("name", ["flat-identity", "sphere-rotation", "circle-immersion",
                                  "polar-cartesian", "convex-combination", "cubic-transition",
                                  "lemmas"])
def test_bundled_scenarios_pass(name, capsys):
    assert name in bundled_scenarios()
    assert main(["run", name, "--samples", "4"]) == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tkbundle", "list-scenarios"],
                         capture_output=True, text=True, check=True)
    assert "sphere-rotation" in out.stdout.split()

