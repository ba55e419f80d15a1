import copy
import json

import pytest

from ablsim.cli import emit, main, parse
from ablsim.cohen import build_scenario, forward_probabilities
from ablsim.scenario_file import ScenarioParseError, load_scenario, parse_scenario, shipped_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def original_doc():
    return json.loads(shipped_path("cohen_original").read_text())


def write(tmp_path, doc, name="s.scn"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestPreset:
    def test_original_present(self, capsys):
        code, out, _ = run(capsys, "preset", "--variant", "original", "--d3", "present")
        assert code == 0
        assert "Prob(D3|D1) = 0.166666666667" in out

    def test_original_absent(self, capsys):
        code, out, _ = run(capsys, "preset", "--variant", "original", "--d3", "absent")
        assert code == 0
        assert "Prob(D1) = 0.5" in out and "Prob(D2) = 0.5" in out
        assert "ABL" not in out

    def test_plusminus_machine(self, capsys):
        code, out, _ = run(capsys, "--format", "machine", "preset", "--variant", "plusminus")
        probs = parse(out)["probabilities"]
        assert abs(probs["D1+"] - 0.625) <= 1e-12
        assert abs(probs["D1-"] - 0.125) <= 1e-12
        assert abs(probs["D2"] - 0.25) <= 1e-12

    def test_bad_flag(self, capsys):
        code, _, err = run(capsys, "preset", "--variant", "sideways")
        assert code == 2
        assert "invalid choice" in err

    def test_format_after_subcommand(self, capsys):
        _, a, _ = run(capsys, "--format", "machine", "preset")
        _, b, _ = run(capsys, "preset", "--format", "machine")
        assert a == b


class TestTable:
    def test_rows_and_exit(self, capsys):
        code, out, _ = run(capsys, "table")
        assert code == 0
        line = next(l for l in out.splitlines() if l.startswith("mix.original.published.absent"))
        assert "0.375" in line and "FALLACY" in line
        line = next(l for l in out.splitlines() if l.startswith("mix.original.present"))
        assert "0.25" in line and line.rstrip().endswith("OK")
        assert "marginals computed with D3 absent" in out

    def test_machine_round_trip(self, capsys):
        _, out, _ = run(capsys, "--format", "machine", "table")
        assert emit(parse(out)) == out
        doc = parse(out)
        assert doc["all_match"] is True


class TestRun:
    @pytest.mark.parametrize("name, variant", [("cohen_original", "subspace"),
                                               ("cohen_plusminus", "plus_minus")])
    def test_shipped_file_equals_preset(self, capsys, name, variant):
        preset_variant = "original" if variant == "subspace" else "plusminus"
        _, from_file, _ = run(capsys, "--format", "machine", "run", str(shipped_path(name)))
        _, from_preset, _ = run(capsys, "--format", "machine", "preset",
                                "--variant", preset_variant)
        assert from_file == from_preset

    def test_bare_shipped_name(self, capsys):
        code, out, _ = run(capsys, "run", "cohen_original.scn")
        assert code == 0 and "Prob(D1) = 0.75" in out

    def test_unnormalized_initial(self, capsys, tmp_path, original_doc):
        original_doc["initial"] = [["b", 1], ["a", 1]]
        code, _, err = run(capsys, "run", write(tmp_path, original_doc))
        assert code == 3
        assert "normalization" in err

    def test_normalize_flag_accepts_it(self, capsys, tmp_path, original_doc):
        original_doc["initial"] = [["b", 1], ["a", 1]]
        original_doc["normalize"] = True
        code, _, _ = run(capsys, "run", write(tmp_path, original_doc))
        assert code == 0

    def test_empty_elements_is_born_of_initial(self, capsys, tmp_path):
        doc = {
            "name": "bare",
            "modes": ["a", "e"],
            "initial": [["a", "1/2"], ["e", "1/2"]],
            "normalize": True,
            "elements": [],
            "detectors": [{"name": "D1", "generators": [[["a", 1]]]},
                          {"name": "D2", "generators": [[["e", 1]]]}],
        }
        code, out, _ = run(capsys, "--format", "machine", "run", write(tmp_path, doc))
        assert code == 0
        assert parse(out)["probabilities"] == {"D1": pytest.approx(0.5), "D2": pytest.approx(0.5)}

    def test_json_syntax_error_has_line(self, capsys, tmp_path):
        path = tmp_path / "bad.scn"
        path.write_text('{\n  "modes": [\n}')
        code, _, err = run(capsys, "run", str(path))
        assert code == 2
        assert "bad.scn:3:" in err

    def test_missing_field(self, capsys, tmp_path, original_doc):
        del original_doc["elements"][0]["out2"]
        code, _, err = run(capsys, "run", write(tmp_path, original_doc))
        assert code == 2
        assert "elements[0].out2" in err

    def test_unknown_mode(self, capsys, tmp_path, original_doc):
        original_doc["detectors"][1]["generators"] = [[["z", 1]]]
        code, _, err = run(capsys, "run", write(tmp_path, original_doc))
        assert code == 2 and "unknown mode 'z'" in err

    def test_overlapping_detectors(self, capsys, tmp_path, original_doc):
        original_doc["detectors"][1]["generators"] = [[["e", 1]], [["a", 1]]]
        code, _, err = run(capsys, "run", write(tmp_path, original_doc))
        assert code == 3 and "orthogonality" in err

    def test_missing_file(self, capsys):
        code, _, _ = run(capsys, "run", "/nonexistent/nothing.scn")
        assert code == 2


class TestAbl:
    def test_condition_d1(self, capsys):
        code, out, _ = run(capsys, "--format", "machine", "abl", "cohen_original.scn",
                           "--condition", "D1")
        doc = parse(out)
        assert code == 0 and doc["rule"] == "generalized"
        assert abs(doc["distribution"]["click"] - 1 / 6) <= 1e-12

    def test_condition_d2(self, capsys):
        code, out, _ = run(capsys, "abl", "cohen_original.scn", "--condition", "D2")
        assert code == 0 and "Prob(D3|D2) = 0.5" in out

    def test_unknown_detector(self, capsys):
        code, _, _ = run(capsys, "abl", "cohen_original.scn", "--condition", "D9")
        assert code == 2

    def test_never_firing_detector(self, capsys, tmp_path, original_doc):
        # mode c is empty at the final time
        original_doc["detectors"].append({"name": "D4", "generators": [[["c", 1]]]})
        code, _, err = run(capsys, "abl", write(tmp_path, original_doc), "--condition", "D4")
        assert code == 4
        assert "impossible" in err

    def test_no_intermediate(self, capsys, tmp_path, original_doc):
        doc = copy.deepcopy(original_doc)
        doc.pop("ancilla")
        doc.pop("intermediate")
        doc["elements"] = [e for e in doc["elements"] if e["type"] != "whichway"]
        code, _, _ = run(capsys, "abl", write(tmp_path, doc), "--condition", "D1")
        assert code == 2


class TestVerify:
    def test_preset_million_shots(self, capsys):
        code, out, _ = run(capsys, "verify", "--preset", "original", "--shots", "1000000",
                           "--seed", "7")
        assert code == 0 and "all within 4 standard errors" in out

    def test_single_shot(self, capsys):
        code, out, _ = run(capsys, "--format", "machine", "verify", "--shots", "1",
                           "--seed", "7")
        doc = parse(out)
        assert doc["shots"] == 1 and code in (0, 1)
        assert emit(doc) == out

    def test_deterministic_bytes(self, capsys):
        argv = ("--format", "machine", "verify", "--preset", "plusminus", "--shots", "200000",
                "--seed", "3")
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv, "--workers", "4")
        assert a == b

    @pytest.mark.parametrize("shots", ["0", "-5", "many"])
    def test_bad_shots(self, capsys, shots):
        code, _, _ = run(capsys, "verify", "--shots", shots)
        assert code == 2

    def test_file_and_preset_conflict(self, capsys):
        code, _, _ = run(capsys, "verify", "cohen_original.scn", "--preset", "original")
        assert code == 2

    def test_file_target(self, capsys):
        code, _, _ = run(capsys, "verify", "cohen_plusminus.scn", "--shots", "50000")
        assert code == 0


class TestDecompose:
    def test_absent_original(self, capsys):
        code, out, _ = run(capsys, "decompose", "--variant", "original",
                           "--marginals-from", "absent")
        assert code == 0
        assert "= 0.333333333333" in out and "MISMATCH" in out and "0.25" in out

    def test_present_plusminus_terms(self, capsys):
        code, out, _ = run(capsys, "decompose", "--variant", "plusminus",
                           "--marginals-from", "present")
        assert "(1/10)(5/8) + (1/2)(1/8) + (1/2)(1/4) = 0.25" in out

    def test_published(self, capsys):
        _, out, _ = run(capsys, "--format", "machine", "decompose", "--marginals-from",
                        "absent", "--published")
        doc = parse(out)
        assert abs(doc["value"] - 3 / 8) <= 1e-12 and doc["mismatch"]

    def test_published_needs_original(self, capsys):
        code, _, _ = run(capsys, "decompose", "--variant", "plusminus", "--published")
        assert code == 2


class TestScenarioFile:
    def test_rational_literals(self, original_doc):
        original_doc["initial"] = [["b", "1/2", 0], ["a", "3/4", "0"], ["e", 0, "-1/2"],
                                   ["d", "0.5", 0]]
        original_doc["normalize"] = True
        s = parse_scenario(original_doc)
        amps = s.initial.as_dict()
        norm = (0.25 + 9 / 16 + 0.25 + 0.25) ** 0.5
        assert amps["a"] == pytest.approx(0.75 / norm)
        assert amps["e"] == pytest.approx(-0.5j / norm)

    def test_bad_rational(self, original_doc):
        original_doc["initial"] = [["b", "one"]]
        with pytest.raises(ScenarioParseError, match="initial\\[0\\]\\[1\\]"):
            parse_scenario(original_doc)

    def test_whichway_needs_ancilla(self, original_doc):
        original_doc.pop("ancilla")
        with pytest.raises(ScenarioParseError, match="ancilla"):
            parse_scenario(original_doc)

    def test_intermediate_must_match_coupler(self, original_doc):
        original_doc["intermediate"]["mode"] = "d"
        with pytest.raises(ScenarioParseError, match="intermediate.mode"):
            parse_scenario(original_doc)

    def test_unknown_element(self, original_doc):
        original_doc["elements"][0]["type"] = "mirror"
        with pytest.raises(ScenarioParseError, match="elements\\[0\\].type"):
            parse_scenario(original_doc)

    def test_loaded_equals_builder(self):
        s = load_scenario(shipped_path("cohen_plusminus"))
        assert forward_probabilities(s) == forward_probabilities(build_scenario(True, "plus_minus"))
