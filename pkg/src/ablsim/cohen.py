"""Cohen's Mach-Zehnder experiment with a which-way detector D3.

Geometry (five particle modes, all distinct labels)::

    source |b⟩ --BS1--> a (towards D1)      e (towards BS2)
                        e --BS2--> c, d      (inner arms; D3 watches c)
                        d, c --BS3--> e (D2), b (D1)

BS1 and BS2 reuse ports that are vacant at that stage, so the particle
space stays five-dimensional.  Without D3 the second interferometer sends
everything from the inner arms to D2.  D1 collects both ``a`` and ``b``
(subspace variant) or resolves ``(a ± b)/√2`` (plus/minus variant).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .abl import AblQuery, DecompositionInput, abl, decompose_total
from .errors import ImpossiblePostSelection, ValidationError
from .hilbert import StateVector, basis_state, born_probabilities, make_state
from .optics import (
    ANCILLA,
    CLICK,
    PARTICLE_MODES,
    UNDETECTED,
    BeamSplitter,
    Circuit,
    DetectorSpec,
    ModeRegistry,
    WhichWayCoupler,
    circuit_unitary,
    click_measurement,
    detector_measurement,
    detector_projector,
    run_circuit,
    watched_measurement,
)

__all__ = [
    "D1Variant",
    "Scenario",
    "TableRow",
    "TableReport",
    "Decomposition",
    "COHEN_PUBLISHED_D3_GIVEN_D1",
    "PUBLISHED_VALUES",
    "build_scenario",
    "forward_probabilities",
    "abl_query",
    "abl_conditional",
    "abl_conditionals",
    "decomposition",
    "reproduce_table",
]

MATCH_TOL = 1e-9

BS1 = BeamSplitter("b", "c", "a", "e", name="BS1")
BS2 = BeamSplitter("e", "b", "c", "d", name="BS2")
# Input order (d, c) fixes the sign that sends (a+b)/√2 the larger D1 weight.
BS3 = BeamSplitter("d", "c", "e", "b", name="BS3")
SOURCE_MODE = "b"
WATCHED_MODE = "c"

# Conditional published for the original arrangement; never computed here.
COHEN_PUBLISHED_D3_GIVEN_D1 = Fraction(1, 4)


class D1Variant(str, enum.Enum):
    SUBSPACE = "subspace"
    PLUS_MINUS = "plus_minus"


@dataclass(frozen=True, eq=False)
class Scenario:
    """A wired interferometer: circuit, source state, detectors, optional D3.

    ``initial`` lives on the particle modes; the ancilla (when present)
    starts in its no-click level.
    """

    name: str
    circuit: Circuit
    initial: StateVector
    detectors: tuple[DetectorSpec, ...]
    d1_variant: D1Variant | None = None
    intermediate_name: str = "D3"

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        reg = self.circuit.registry
        if self.initial.space != reg.modes:
            raise ValidationError(f"initial state lives on {self.initial.space}, "
                                  f"expected particle modes {reg.modes}")
        names = [d.name for d in self.detectors]
        if len(set(names)) != len(names) or self.intermediate_name in names:
            raise ValidationError(f"detector names must be unique: {names}")
        if self.d3_present != reg.has_ancilla:
            raise ValidationError("an ancilla is required exactly when a which-way coupler "
                                  "is placed")
        if self.d1_variant is D1Variant.PLUS_MINUS:
            d1 = [d for d in self.detectors if d.name.startswith("D1")]
            if len(d1) != 2 or any(detector_projector(reg.particle_only(), d).rank != 1
                                   for d in d1):
                raise ValidationError("plus/minus variant needs two rank-1 D1 detectors")
        # validates orthogonality and completeness of the detector family
        self.final_measurement

    @property
    def registry(self) -> ModeRegistry:
        return self.circuit.registry

    @property
    def d3_present(self) -> bool:
        return self.circuit.coupler_index() is not None

    @property
    def watched_mode(self) -> str | None:
        i = self.circuit.coupler_index()
        return None if i is None else self.circuit.elements[i].watched

    @property
    def detector_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.detectors)

    @property
    def final_measurement(self):
        return detector_measurement(self.registry, self.detectors)

    @property
    def intermediate(self):
        """D3 click/no-click read off the ancilla, or None when D3 is absent."""
        if not self.d3_present:
            return None
        return click_measurement(self.registry, self.intermediate_name)

    def initial_full(self) -> StateVector:
        return self.registry.embed(self.initial)

    def split(self) -> tuple[tuple, tuple]:
        """Elements strictly before and strictly after the which-way coupler."""
        i = self.circuit.coupler_index()
        if i is None:
            raise ValidationError(f"scenario {self.name!r} has no intermediate measurement")
        return self.circuit.elements[:i], self.circuit.elements[i + 1:]


def _ket(label: str) -> StateVector:
    return basis_state(PARTICLE_MODES, label)


def _detectors(variant: D1Variant) -> tuple[DetectorSpec, ...]:
    if variant is D1Variant.SUBSPACE:
        d1 = (DetectorSpec("D1", (_ket("a"), _ket("b"))),)
    else:
        amps_plus = {"a": 1.0, "b": 1.0}
        amps_minus = {"a": 1.0, "b": -1.0}
        d1 = tuple(
            DetectorSpec(name, (make_state(PARTICLE_MODES,
                                           [amps.get(m, 0.0) for m in PARTICLE_MODES]),))
            for name, amps in (("D1+", amps_plus), ("D1-", amps_minus))
        )
    return d1 + (DetectorSpec("D2", (_ket("e"),)),)


def scenario_name(d3_present: bool, d1_variant: D1Variant | str) -> str:
    variant = D1Variant(d1_variant)
    base = "cohen_original" if variant is D1Variant.SUBSPACE else "cohen_plusminus"
    return base if d3_present else base + "_d3_absent"


def build_scenario(d3_present: bool, d1_variant: D1Variant | str = D1Variant.SUBSPACE) -> Scenario:
    variant = D1Variant(d1_variant)
    registry = ModeRegistry(PARTICLE_MODES, ANCILLA if d3_present else None)
    elements: list = [BS1, BS2]
    if d3_present:
        elements.append(WhichWayCoupler(WATCHED_MODE, name="D3"))
    elements.append(BS3)
    return Scenario(
        name=scenario_name(d3_present, variant),
        circuit=Circuit(registry, tuple(elements)),
        initial=_ket(SOURCE_MODE),
        detectors=_detectors(variant),
        d1_variant=variant,
    )


def forward_probabilities(s: Scenario) -> dict[str, float]:
    """Born probabilities of every detector (and the D3 click, when placed)."""
    final = run_circuit(s.initial_full(), s.circuit)
    probs = born_probabilities(final, s.final_measurement)
    if probs.get(UNDETECTED, 1.0) <= 1e-12:
        probs.pop(UNDETECTED)
    if s.d3_present:
        probs[s.intermediate_name] = born_probabilities(final, s.intermediate)[CLICK]
    return probs


def abl_query(s: Scenario, detector: str) -> AblQuery:
    """ABL query for Prob(D3 click | ``detector``).

    Pre-state: the source propagated up to the coupler.  The elements after
    the coupler become ``u2`` and the detector is used in its own (final)
    picture.  Everything lives on the particle modes alone.
    """
    before, after = s.split()
    particle = s.registry.particle_only()
    pre = run_circuit(s.initial, Circuit(particle, before))
    u2 = circuit_unitary(particle, after)
    spec = next((d for d in s.detectors if d.name == detector), None)
    if spec is None:
        raise ValidationError(f"scenario {s.name!r} has no detector {detector!r}")
    proj = detector_projector(particle, spec)
    final = make_state(particle.modes, spec.generators[0].amps) if proj.rank == 1 else proj
    meas = watched_measurement(particle.modes, s.watched_mode, s.intermediate_name)
    return AblQuery(pre=pre, intermediate=meas, final=final, u2=u2)


def abl_conditional(s: Scenario, detector: str) -> float:
    return abl(abl_query(s, detector))[CLICK]


def abl_conditionals(s: Scenario, skip_impossible: bool = False) -> dict[str, float]:
    """Prob(D3 click | detector) for every detector of ``s``."""
    out = {}
    for name in s.detector_names:
        try:
            out[name] = abl_conditional(s, name)
        except ImpossiblePostSelection:
            if not skip_impossible:
                raise
    return out


@dataclass(frozen=True)
class Decomposition:
    """Total-probability mixture with provenance of its marginals."""

    variant: D1Variant
    marginals_from: str       # "present" or "absent"
    published_conditional: bool
    inputs: DecompositionInput
    value: float
    direct: float             # Prob(D3) computed directly with D3 present

    @property
    def fallacy(self) -> bool:
        return abs(self.value - self.direct) > MATCH_TOL


def decomposition(variant: D1Variant | str, marginals_from: str,
                  published_conditional: bool = False) -> Decomposition:
    """Mix ABL conditionals (D3 present) with marginals from either arrangement.

    ``published_conditional`` swaps the computed Prob(D3|D1) for the value
    published in the original analysis (subspace variant only).
    """
    variant = D1Variant(variant)
    if marginals_from not in ("present", "absent"):
        raise ValueError(f"marginals_from must be 'present' or 'absent', not {marginals_from!r}")
    present = build_scenario(True, variant)
    conditionals: dict[str, float] = abl_conditionals(present)
    if published_conditional:
        if variant is not D1Variant.SUBSPACE:
            raise ValueError("the published conditional refers to the subspace variant")
        conditionals["D1"] = float(COHEN_PUBLISHED_D3_GIVEN_D1)
    source = present if marginals_from == "present" else build_scenario(False, variant)
    fwd = forward_probabilities(source)
    marginals = {name: fwd[name] for name in source.detector_names}
    inputs = DecompositionInput(conditionals, marginals, target=present.intermediate_name)
    return Decomposition(
        variant=variant,
        marginals_from=marginals_from,
        published_conditional=published_conditional,
        inputs=inputs,
        value=float(decompose_total(inputs)),
        direct=forward_probabilities(present)[present.intermediate_name],
    )


# Values printed in the analysis of the experiment, keyed by row id.
PUBLISHED_VALUES: dict[str, Fraction] = {
    "original.absent.P(D1)": Fraction(1, 2),
    "original.absent.P(D2)": Fraction(1, 2),
    "original.present.P(D3)": Fraction(1, 4),
    "original.present.P(D1)": Fraction(3, 4),
    "original.present.P(D2)": Fraction(1, 4),
    "original.present.P(D3|D1)": Fraction(1, 6),
    "original.present.P(D3|D2)": Fraction(1, 2),
    "plusminus.present.P(D3|D1+)": Fraction(1, 10),
    "plusminus.present.P(D3|D1-)": Fraction(1, 2),
    "plusminus.present.P(D3|D2)": Fraction(1, 2),
    "plusminus.present.P(D1+)": Fraction(5, 8),
    "plusminus.present.P(D1-)": Fraction(1, 8),
    "plusminus.present.P(D2)": Fraction(1, 4),
    "plusminus.absent.P(D1+)": Fraction(1, 4),
    "plusminus.absent.P(D1-)": Fraction(1, 4),
    "plusminus.absent.P(D2)": Fraction(1, 2),
    "mix.original.published.absent": Fraction(3, 8),
    "mix.plusminus.absent": Fraction(2, 5),
    "mix.plusminus.present": Fraction(1, 4),
    "mix.original.absent": Fraction(1, 3),
    "mix.original.present": Fraction(1, 4),
}

ABSENT_NOTE = "marginals computed with D3 absent"
PRESENT_NOTE = "marginals computed with D3 present"


@dataclass(frozen=True)
class TableRow:
    key: str
    quantity: str
    arrangement: str
    computed: float
    published: Fraction
    kind: str = "primitive"          # or "decomposition"
    fallacy: bool = False
    direct: float | None = None
    note: str = ""
    terms: tuple[tuple[str, float, float], ...] = ()

    @property
    def match(self) -> bool:
        return abs(self.computed - float(self.published)) <= MATCH_TOL


@dataclass(frozen=True)
class TableReport:
    rows: tuple[TableRow, ...] = field(default_factory=tuple)

    @property
    def all_match(self) -> bool:
        return all(r.match for r in self.rows)

    def row(self, key: str) -> TableRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)


def _arrangement(variant: D1Variant, present: bool) -> str:
    name = "original" if variant is D1Variant.SUBSPACE else "plusminus"
    return f"{name}, D3 {'present' if present else 'absent'}"


def reproduce_table() -> TableReport:
    rows: list[TableRow] = []

    for variant in D1Variant:
        vname = "original" if variant is D1Variant.SUBSPACE else "plusminus"
        for present in (False, True):
            s = build_scenario(present, variant)
            tag = "present" if present else "absent"
            probs = forward_probabilities(s)
            quantities = [(f"P({k})", v) for k, v in probs.items()]
            if present:
                quantities += [(f"P(D3|{k})", v) for k, v in abl_conditionals(s).items()]
            for quantity, value in quantities:
                key = f"{vname}.{tag}.{quantity}"
                if key in PUBLISHED_VALUES:
                    rows.append(TableRow(key, quantity.replace("P(", "Prob("),
                                         _arrangement(variant, present), value,
                                         PUBLISHED_VALUES[key]))

    mixes = [
        ("mix.original.published.absent", D1Variant.SUBSPACE, "absent", True),
        ("mix.plusminus.absent", D1Variant.PLUS_MINUS, "absent", False),
        ("mix.plusminus.present", D1Variant.PLUS_MINUS, "present", False),
        ("mix.original.absent", D1Variant.SUBSPACE, "absent", False),
        ("mix.original.present", D1Variant.SUBSPACE, "present", False),
    ]
    for key, variant, source, published in mixes:
        dec = decomposition(variant, source, published)
        note = ABSENT_NOTE if source == "absent" else PRESENT_NOTE
        if published:
            note += "; published Prob(D3|D1)"
        rows.append(TableRow(
            key=key,
            quantity="Σ Prob(D3|f)·Prob(f)",
            arrangement=_arrangement(variant, True),
            computed=dec.value,
            published=PUBLISHED_VALUES[key],
            kind="decomposition",
            fallacy=dec.fallacy and source == "absent",
            direct=dec.direct,
            note=note,
            terms=tuple((f, float(c), float(m)) for f, c, m in dec.inputs.terms()),
        ))
    return TableReport(tuple(rows))

