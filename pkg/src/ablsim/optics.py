"""Mach-Zehnder optics: beam splitters, a which-way coupler and detectors.

Particle modes are basis labels.  When a which-way detector is placed the
space is extended by a two-level ancilla (``anc0`` = no click, ``anc1`` =
click) and every particle operator acts as ``op ⊗ I_ancilla``.

Beam-splitter convention (real Hadamard block)::

    in1 -> (out1 + out2)/√2
    in2 -> (out1 - out2)/√2

A beam splitter whose four ports are distinct is completed to a unitary on
the whole space by sending the output ports back onto the input ports with
the transposed block, which makes the element an involution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InvalidMeasurementError, NoAncillaError, UnknownLabelError, ValidationError
from .hilbert import (
    STRUCTURE_TOL,
    Measurement,
    Operator,
    Projector,
    StateVector,
    apply,
    projector_from_vectors,
    tensor_space,
)

__all__ = [
    "ModeRegistry",
    "BeamSplitter",
    "WhichWayCoupler",
    "Circuit",
    "DetectorSpec",
    "HALF_SILVERED",
    "beam_splitter_unitary",
    "which_way_unitary",
    "element_unitary",
    "circuit_unitary",
    "run_circuit",
    "detector_projector",
    "detector_measurement",
    "d3_click_projector",
    "click_measurement",
]

HALF_SILVERED = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)

NO_CLICK, CLICK = "no-click", "click"
UNDETECTED = "undetected"

PARTICLE_MODES = ("a", "c", "d", "b", "e")
ANCILLA = ("anc0", "anc1")


@dataclass(frozen=True)
class ModeRegistry:
    modes: tuple[str, ...] = PARTICLE_MODES
    ancilla: tuple[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        labels = list(self.modes) + list(self.ancilla or ())
        if not self.modes:
            raise ValidationError("a registry needs at least one particle mode")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate labels in registry: {labels}")
        if self.ancilla is not None:
            if len(self.ancilla) != 2:
                raise ValidationError("the which-way ancilla has exactly two levels")
            object.__setattr__(self, "ancilla", tuple(self.ancilla))

    @property
    def has_ancilla(self) -> bool:
        return self.ancilla is not None

    @property
    def space(self) -> tuple[str, ...]:
        if self.ancilla is None:
            return self.modes
        return tensor_space(self.modes, self.ancilla)

    @property
    def dim(self) -> int:
        return len(self.space)

    def particle_only(self) -> ModeRegistry:
        return ModeRegistry(self.modes, None)

    def mode_index(self, mode: str) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise UnknownLabelError(f"unknown mode {mode!r}") from None

    def lift(self, particle_matrix: np.ndarray) -> np.ndarray:
        """``M ⊗ I_ancilla`` (or ``M`` itself without an ancilla)."""
        if self.ancilla is None:
            return particle_matrix
        return np.kron(particle_matrix, np.eye(2))

    def ket(self, mode: str, ancilla: str | None = None) -> StateVector:
        i = self.mode_index(mode)
        amps = np.zeros(self.dim, dtype=complex)
        if self.ancilla is None:
            if ancilla is not None:
                raise NoAncillaError("registry has no ancilla")
            amps[i] = 1.0
        else:
            level = self.ancilla.index(ancilla or self.ancilla[0])
            amps[2 * i + level] = 1.0
        return StateVector(self.space, amps)

    def embed(self, particle_state: StateVector, ancilla: str | None = None) -> StateVector:
        """``|ψ⟩ ⊗ |ancilla⟩`` (ancilla defaults to the no-click level)."""
        if particle_state.space != self.modes:
            raise UnknownLabelError(f"state space {particle_state.space} is not {self.modes}")
        if self.ancilla is None:
            return particle_state
        level = np.zeros(2)
        level[self.ancilla.index(ancilla or self.ancilla[0])] = 1.0
        return StateVector(self.space, np.kron(particle_state.amps, level))


@dataclass(frozen=True)
class BeamSplitter:
    in1: str
    in2: str
    out1: str
    out2: str
    name: str = ""

    @property
    def ports(self) -> tuple[str, str, str, str]:
        return (self.in1, self.in2, self.out1, self.out2)


@dataclass(frozen=True)
class WhichWayCoupler:
    watched: str
    name: str = "D3"


CircuitElement = Union[BeamSplitter, WhichWayCoupler]


@dataclass(frozen=True)
class Circuit:
    registry: ModeRegistry
    elements: tuple[CircuitElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            if isinstance(el, BeamSplitter):
                for port in el.ports:
                    self.registry.mode_index(port)
                if len(set(el.ports)) != 4:
                    raise ValidationError(f"beam splitter {el.name or el.ports} needs four "
                                          "distinct ports")
            elif isinstance(el, WhichWayCoupler):
                self.registry.mode_index(el.watched)
                if not self.registry.has_ancilla:
                    raise NoAncillaError("a which-way coupler needs an ancilla in the registry")
            else:
                raise ValidationError(f"unknown circuit element {el!r}")

    def coupler_index(self) -> int | None:
        """Position of the (first) which-way coupler, if any."""
        for i, el in enumerate(self.elements):
            if isinstance(el, WhichWayCoupler):
                return i
        return None


@dataclass(frozen=True, eq=False)
class DetectorSpec:
    """A detector clicking on span(generators); generators live on particle modes."""

    name: str
    generators: tuple[StateVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValidationError(f"detector {self.name!r} has no generators")
        for g in self.generators:
            if g.norm < 1e-12:
                raise ValidationError(f"detector {self.name!r} has a zero generator")


def beam_splitter_unitary(registry: ModeRegistry, element: BeamSplitter) -> Operator:
    idx = [registry.mode_index(p) for p in element.ports]
    if len(set(idx)) != 4:
        raise ValidationError("beam splitter ports must be distinct")
    i1, i2, o1, o2 = idx
    u = np.eye(len(registry.modes), dtype=complex)
    ins, outs = [i1, i2], [o1, o2]
    for k in ins + outs:
        u[k, k] = 0.0
    u[np.ix_(outs, ins)] = HALF_SILVERED
    u[np.ix_(ins, outs)] = HALF_SILVERED.T
    return Operator(registry.space, registry.lift(u)).require_unitary(
        f"beam splitter {element.name}".strip())


def which_way_unitary(registry: ModeRegistry, watched_mode: str) -> Operator:
    """Flip the ancilla iff the particle is in ``watched_mode`` (nondemolition)."""
    if not registry.has_ancilla:
        raise NoAncillaError("which-way coupler needs an ancilla")
    w = registry.mode_index(watched_mode)
    n = len(registry.modes)
    watched = np.zeros((n, n))
    watched[w, w] = 1.0
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    u = np.kron(np.eye(n) - watched, np.eye(2)) + np.kron(watched, flip)
    return Operator(registry.space, u).require_unitary("which-way coupler")


def element_unitary(registry: ModeRegistry, element: CircuitElement) -> Operator:
    if isinstance(element, BeamSplitter):
        return beam_splitter_unitary(registry, element)
    if isinstance(element, WhichWayCoupler):
        return which_way_unitary(registry, element.watched)
    raise ValidationError(f"unknown circuit element {element!r}")


def circuit_unitary(registry: ModeRegistry, elements: Sequence[CircuitElement]) -> Operator:
    """Product of element unitaries, first element applied first."""
    total = np.eye(registry.dim, dtype=complex)
    for el in elements:
        total = element_unitary(registry, el).matrix @ total
    return Operator(registry.space, total)


def run_circuit(initial: StateVector, circuit: Circuit) -> StateVector:
    state = initial
    for el in circuit.elements:
        state = apply(element_unitary(circuit.registry, el), state)
    return state


def detector_projector(registry: ModeRegistry, spec: DetectorSpec) -> Projector:
    """Projector onto span(generators) ⊗ I_ancilla."""
    particle = projector_from_vectors(list(spec.generators))
    if particle.space != registry.modes:
        raise UnknownLabelError(
            f"detector {spec.name!r} generators live on {particle.space}, not {registry.modes}")
    return Projector(registry.space, registry.lift(particle.matrix))


def detector_measurement(registry: ModeRegistry, specs: Sequence[DetectorSpec],
                         name: str = "detectors") -> Measurement:
    """Detector projectors plus an ``undetected`` remainder when they do not span."""
    outcomes = [(s.name, detector_projector(registry, s)) for s in specs]
    for i, (li, pi) in enumerate(outcomes):
        for lj, pj in outcomes[i + 1:]:
            overlap = float(np.max(np.abs(pi.matrix @ pj.matrix)))
            if overlap > STRUCTURE_TOL:
                raise InvalidMeasurementError(
                    f"{name!r}: detectors {li!r} and {lj!r} are not orthogonal "
                    f"(‖P_i P_j‖_max = {overlap:.3e})",
                    invariant="orthogonality",
                )
    rest = np.eye(registry.dim) - sum(p.matrix for _, p in outcomes)
    if np.max(np.abs(rest)) > 1e-12:
        outcomes.append((UNDETECTED, Projector(registry.space, rest)))
    return Measurement(name, tuple(outcomes))


def d3_click_projector(registry: ModeRegistry) -> Projector:
    """``I_particle ⊗ |anc1⟩⟨anc1|``."""
    if not registry.has_ancilla:
        raise NoAncillaError("no ancilla, so no which-way record to read")
    m = np.kron(np.eye(len(registry.modes)), np.diag([0.0, 1.0]))
    return Projector(registry.space, m)


def click_measurement(registry: ModeRegistry, name: str = "D3") -> Measurement:
    click = d3_click_projector(registry)
    return Measurement(name, ((CLICK, click), (NO_CLICK, click.complement())))


def watched_measurement(modes: Sequence[str], watched: str, name: str = "D3") -> Measurement:
    """``{P_watched, I − P_watched}`` on particle modes alone (no ancilla)."""
    registry = ModeRegistry(tuple(modes))
    i = registry.mode_index(watched)
    p = np.zeros((len(registry.modes),) * 2)
    p[i, i] = 1.0
    proj = Projector(registry.space, p)
    return Measurement(name, ((CLICK, proj), (NO_CLICK, proj.complement())))
