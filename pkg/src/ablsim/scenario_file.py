"""Reader for ``.scn`` scenario files (JSON).

Layout::

    {
      "name": "cohen_original",
      "modes": ["a", "c", "d", "b", "e"],
      "ancilla": ["anc0", "anc1"],          # optional, needed by a whichway element
      "normalize": false,                   # optional, default false
      "initial": [["b", 1, 0]],             # (label, re, im)
      "elements": [
        {"type": "beamsplitter", "name": "BS1", "in1": "b", "in2": "c", "out1": "a", "out2": "e"},
        {"type": "whichway", "mode": "c"}
      ],
      "detectors": [
        {"name": "D1", "generators": [[["a", 1]], [["b", 1]]]}
      ],
      "intermediate": {"name": "D3", "mode": "c"}
    }

Numbers may be JSON numbers or strings holding exact rationals such as
``"1/2"``.  Generator weights are a number or an ``[re, im]`` pair.
"""
from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

from .cohen import Scenario
from .errors import AblSimError
from .hilbert import make_state
from .optics import BeamSplitter, Circuit, DetectorSpec, ModeRegistry, WhichWayCoupler

__all__ = ["ScenarioParseError", "load_scenario", "parse_scenario", "shipped_path", "SHIPPED"]

SHIPPED = ("cohen_original", "cohen_plusminus")


class ScenarioParseError(AblSimError):
    """Malformed file: bad JSON, a missing field or a wrong type."""


def _fail(where: str, msg: str):
    raise ScenarioParseError(f"field {where!r}: {msg}")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        _fail(where, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            _fail(where, f"cannot parse {value!r} as a rational number")
    _fail(where, f"expected a number, got {type(value).__name__}")


def _weight(value: Any, where: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            _fail(where, "complex weights are [re, im] pairs")
        return complex(_number(value[0], where + "[0]"), _number(value[1], where + "[1]"))
    return complex(_number(value, where), 0.0)


def _field(obj: dict, key: str, where: str, kind: type | tuple = object, required: bool = True,
           default: Any = None):
    if key not in obj:
        if required:
            _fail(f"{where}.{key}" if where else key, "missing")
        return default
    value = obj[key]
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        _fail(f"{where}.{key}" if where else key,
              f"expected {names}, got {type(value).__name__}")
    return value


def _label(value: Any, where: str, known: tuple[str, ...]) -> str:
    if not isinstance(value, str):
        _fail(where, f"expected a mode label, got {type(value).__name__}")
    if value not in known:
        _fail(where, f"unknown mode {value!r} (modes: {', '.join(known)})")
    return value


def parse_scenario(doc: Any, default_name: str = "scenario") -> Scenario:
    """Build a :class:`Scenario` from a decoded JSON document.

    Shape problems raise :class:`ScenarioParseError`; physical invariants
    (normalization, orthogonal detectors...) raise the usual validation errors.
    """
    if not isinstance(doc, dict):
        raise ScenarioParseError("top level must be an object")
    name = _field(doc, "name", "", str, required=False, default=default_name)
    modes = _field(doc, "modes", "", list)
    if not modes or not all(isinstance(m, str) for m in modes):
        _fail("modes", "expected a nonempty list of strings")
    if len(set(modes)) != len(modes):
        _fail("modes", "duplicate labels")
    modes = tuple(modes)
    ancilla = _field(doc, "ancilla", "", (list, type(None)), required=False)
    if ancilla is not None:
        if len(ancilla) != 2 or not all(isinstance(x, str) for x in ancilla):
            _fail("ancilla", "expected two labels")
        if set(ancilla) & set(modes) or ancilla[0] == ancilla[1]:
            _fail("ancilla", "labels must be distinct from each other and from the modes")
        ancilla = tuple(ancilla)
    normalize = _field(doc, "normalize", "", bool, required=False, default=False)

    amps = {m: 0j for m in modes}
    initial = _field(doc, "initial", "", list)
    for i, term in enumerate(initial):
        where = f"initial[{i}]"
        if not isinstance(term, list) or len(term) not in (2, 3):
            _fail(where, "expected [label, re] or [label, re, im]")
        label = _label(term[0], where + "[0]", modes)
        im = _number(term[2], where + "[2]") if len(term) == 3 else 0.0
        amps[label] += complex(_number(term[1], where + "[1]"), im)
    initial_state = make_state(modes, [amps[m] for m in modes], normalize=normalize)

    elements = []
    for i, el in enumerate(_field(doc, "elements", "", list)):
        where = f"elements[{i}]"
        if not isinstance(el, dict):
            _fail(where, "expected an object")
        kind = _field(el, "type", where, str)
        el_name = _field(el, "name", where, str, required=False, default="")
        if kind == "beamsplitter":
            ports = [_label(_field(el, k, where), f"{where}.{k}", modes)
                     for k in ("in1", "in2", "out1", "out2")]
            if len(set(ports)) != 4:
                _fail(where, "beam splitter ports must be distinct")
            elements.append(BeamSplitter(*ports, name=el_name))
        elif kind == "whichway":
            if ancilla is None:
                _fail(where, "a whichway element needs an 'ancilla' declaration")
            mode = _label(_field(el, "mode", where), f"{where}.mode", modes)
            elements.append(WhichWayCoupler(mode, name=el_name or "D3"))
        else:
            _fail(f"{where}.type", f"unknown element type {kind!r} "
                                   "(expected 'beamsplitter' or 'whichway')")
    couplers = [e for e in elements if isinstance(e, WhichWayCoupler)]
    if len(couplers) > 1:
        _fail("elements", "at most one whichway element is supported")
    if ancilla is not None and not couplers:
        _fail("ancilla", "declared but no whichway element uses it")

    detectors = []
    for i, det in enumerate(_field(doc, "detectors", "", list)):
        where = f"detectors[{i}]"
        if not isinstance(det, dict):
            _fail(where, "expected an object")
        det_name = _field(det, "name", where, str)
        gens = _field(det, "generators", where, list)
        if not gens:
            _fail(f"{where}.generators", "expected at least one generator")
        vectors = []
        for j, gen in enumerate(gens):
            gwhere = f"{where}.generators[{j}]"
            if not isinstance(gen, list) or not gen:
                _fail(gwhere, "expected a nonempty list of [label, weight] pairs")
            weights = {m: 0j for m in modes}
            for k, pair in enumerate(gen):
                pwhere = f"{gwhere}[{k}]"
                if not isinstance(pair, list) or len(pair) != 2:
                    _fail(pwhere, "expected [label, weight]")
                weights[_label(pair[0], pwhere + "[0]", modes)] += _weight(pair[1], pwhere + "[1]")
            vectors.append(make_state(modes, [weights[m] for m in modes]))
        detectors.append(DetectorSpec(det_name, tuple(vectors)))

    intermediate_name = "D3"
    inter = _field(doc, "intermediate", "", (dict, type(None)), required=False)
    if inter is not None:
        intermediate_name = _field(inter, "name", "intermediate", str, required=False,
                                   default="D3")
        mode = _label(_field(inter, "mode", "intermediate"), "intermediate.mode", modes)
        if not couplers or couplers[0].watched != mode:
            _fail("intermediate.mode", f"no whichway element watches mode {mode!r}")
    elif couplers:
        intermediate_name = couplers[0].name

    registry = ModeRegistry(modes, ancilla)
    return Scenario(
        name=name,
        circuit=Circuit(registry, tuple(elements)),
        initial=initial_state,
        detectors=tuple(detectors),
        intermediate_name=intermediate_name,
    )


def shipped_path(name: str) -> Path:
    stem = name[:-4] if name.endswith(".scn") else name
    if stem not in SHIPPED:
        raise FileNotFoundError(name)
    return Path(str(resources.files("ablsim") / "scenarios" / f"{stem}.scn"))


def load_scenario(path: str | Path) -> Scenario:
    """Load a ``.scn`` file; bare shipped names resolve to the bundled copies."""
    path = Path(path)
    if not path.exists():
        try:
            path = shipped_path(path.name)
        except FileNotFoundError:
            raise ScenarioParseError(f"{path}: no such scenario file") from None
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_scenario(doc, default_name=path.stem)
    except ScenarioParseError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
