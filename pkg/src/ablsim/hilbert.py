"""Finite-dimensional Hilbert-space kernel over labeled orthonormal bases.

States, operators and projectors are dense numpy arrays tagged with the
ordered tuple of basis labels they live on.  Every value is immutable after
construction (the underlying arrays are flagged read-only), so instances can
be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySpanError,
    ImpossibleOutcome,
    InvalidMeasurementError,
    NormalizationError,
    NotProjectorError,
    NotUnitaryError,
    UnknownLabelError,
    ZeroStateError,
)

__all__ = [
    "Space",
    "StateVector",
    "Operator",
    "Projector",
    "Measurement",
    "make_state",
    "basis_state",
    "identity",
    "tensor_space",
    "projector_from_vectors",
    "apply",
    "born_probabilities",
    "collapse",
]

Space = tuple[str, ...]

STRUCTURE_TOL = 1e-12   # hermiticity, idempotence, orthogonality, unitarity
PROBABILITY_TOL = 1e-10  # probability sums, rank-1 trace test
NORM_TOL = 1e-9          # accepted deviation of a user-supplied norm from 1
ZERO_NORM = 1e-12
GRAM_SCHMIDT_CUTOFF = 1e-10
IMPOSSIBLE_PROB = 1e-14


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_space(space: Sequence[str]) -> Space:
    space = tuple(str(label) for label in space)
    if not space:
        raise DimensionMismatch("a space needs at least one basis label")
    if len(set(space)) != len(space):
        raise DimensionMismatch(f"duplicate basis labels in {space}")
    return space


def _same_space(a: Space, b: Space, what: str = "operands") -> None:
    if a != b:
        raise DimensionMismatch(f"{what} live on different spaces: {a} vs {b}")


def tensor_space(first: Sequence[str], second: Sequence[str]) -> Space:
    """Labels of ``first ⊗ second`` in row-major (kron) order, joined by ':'."""
    return tuple(f"{x}:{y}" for x in first for y in second)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a labeled basis.

    Instances built with :func:`make_state` are normalized; :func:`apply`
    deliberately returns unnormalized vectors because squared norms of
    projected states are the quantities of interest.
    """

    space: Space
    amps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space", _check_space(self.space))
        amps = _frozen(self.amps).reshape(-1)
        if amps.shape[0] != len(self.space):
            raise DimensionMismatch(
                f"{amps.shape[0]} amplitudes for a {len(self.space)}-dimensional space"
            )
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return len(self.space)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def index(self, label: str) -> int:
        try:
            return self.space.index(label)
        except ValueError:
            raise UnknownLabelError(f"unknown basis label {label!r}") from None

    def amplitude(self, label: str) -> complex:
        return complex(self.amps[self.index(label)])

    def inner(self, other: StateVector) -> complex:
        """⟨self|other⟩."""
        _same_space(self.space, other.space)
        return complex(np.vdot(self.amps, other.amps))

    def as_dict(self) -> dict[str, complex]:
        return {label: complex(a) for label, a in zip(self.space, self.amps)}

    def __repr__(self) -> str:
        terms = " + ".join(
            f"({a.real:.6g}{a.imag:+.6g}j)|{label}⟩"
            for label, a in zip(self.space, self.amps)
            if abs(a) > 1e-15
        )
        return f"StateVector({terms or '0'})"


@dataclass(frozen=True, eq=False)
class Operator:
    space: Space
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space", _check_space(self.space))
        matrix = _frozen(self.matrix)
        n = len(self.space)
        if matrix.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {matrix.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return len(self.space)

    def dagger(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return apply(self, other)
        if isinstance(other, Operator):
            _same_space(self.space, other.space)
            return Operator(self.space, self.matrix @ other.matrix)
        return NotImplemented

    def unitarity_error(self) -> float:
        """max |(U†U − I)_ij|."""
        gram = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def is_unitary(self, tol: float = STRUCTURE_TOL) -> bool:
        return self.unitarity_error() <= tol

    def require_unitary(self, what: str = "operator", tol: float = STRUCTURE_TOL) -> Operator:
        err = self.unitarity_error()
        if err > tol:
            raise NotUnitaryError(f"{what} is not unitary: ‖U†U − I‖_max = {err:.3e}")
        return self


class Projector(Operator):
    """Hermitian idempotent operator, checked at construction."""

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > STRUCTURE_TOL:
            raise NotProjectorError(f"projector is not Hermitian (error {herm:.3e})")
        idem = float(np.max(np.abs(m @ m - m)))
        if idem > STRUCTURE_TOL:
            raise NotProjectorError(f"projector is not idempotent (error {idem:.3e})")

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.matrix).real)))

    def complement(self) -> Projector:
        return Projector(self.space, np.eye(self.dim) - self.matrix)


@dataclass(frozen=True, eq=False)
class Measurement:
    """A named complete family of mutually orthogonal projectors."""

    name: str
    outcomes: tuple[tuple[str, Projector], ...]

    def __post_init__(self):
        outcomes = tuple((str(label), proj) for label, proj in self.outcomes)
        if not outcomes:
            raise InvalidMeasurementError(f"measurement {self.name!r} has no outcomes")
        labels = [label for label, _ in outcomes]
        if len(set(labels)) != len(labels):
            raise InvalidMeasurementError(f"duplicate outcome labels in {self.name!r}: {labels}")
        space = outcomes[0][1].space
        for label, proj in outcomes:
            if not isinstance(proj, Projector):
                raise InvalidMeasurementError(f"outcome {label!r} is not a Projector")
            _same_space(space, proj.space, f"outcomes of {self.name!r}")
        for i, (li, pi) in enumerate(outcomes):
            for lj, pj in outcomes[i + 1:]:
                overlap = float(np.max(np.abs(pi.matrix @ pj.matrix)))
                if overlap > STRUCTURE_TOL:
                    raise InvalidMeasurementError(
                        f"{self.name!r}: outcomes {li!r} and {lj!r} are not orthogonal "
                        f"(‖P_i P_j‖_max = {overlap:.3e})",
                        invariant="orthogonality",
                    )
        total = sum(p.matrix for _, p in outcomes)
        gap = float(np.max(np.abs(total - np.eye(len(space)))))
        if gap > STRUCTURE_TOL:
            raise InvalidMeasurementError(
                f"{self.name!r}: projectors do not sum to identity (gap {gap:.3e})",
                invariant="completeness",
            )
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def space(self) -> Space:
        return self.outcomes[0][1].space

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.outcomes)

    def projector(self, label: str) -> Projector:
        for name, proj in self.outcomes:
            if name == label:
                return proj
        raise UnknownLabelError(f"measurement {self.name!r} has no outcome {label!r}")

    @property
    def is_complete(self) -> bool:
        """True iff every outcome projector has rank one."""
        return all(
            abs(float(np.trace(p.matrix).real) - 1.0) <= PROBABILITY_TOL for _, p in self.outcomes
        )


def make_state(space: Sequence[str], amps: Iterable[complex], normalize: bool = True) -> StateVector:
    """Build a normalized state.

    With ``normalize=False`` the amplitudes must already have unit norm
    (within 1e-9); they are still divided by their exact norm.
    """
    space = _check_space(space)
    amps = np.asarray(list(amps), dtype=complex).reshape(-1)
    if amps.shape[0] != len(space):
        raise DimensionMismatch(f"{amps.shape[0]} amplitudes for a {len(space)}-dimensional space")
    norm = float(np.linalg.norm(amps))
    if norm < ZERO_NORM:
        raise ZeroStateError("cannot normalize the zero vector")
    if not normalize and abs(norm - 1.0) > NORM_TOL:
        raise NormalizationError(f"state has norm {norm!r}, expected 1 (normalization is off)")
    return StateVector(space, amps / norm)


def basis_state(space: Sequence[str], label: str) -> StateVector:
    space = _check_space(space)
    if label not in space:
        raise UnknownLabelError(f"unknown basis label {label!r}")
    amps = np.zeros(len(space), dtype=complex)
    amps[space.index(label)] = 1.0
    return StateVector(space, amps)


def state_from_mapping(space: Sequence[str], amps: Mapping[str, complex],
                       normalize: bool = True) -> StateVector:
    """Like :func:`make_state` but with sparse ``{label: amplitude}`` input."""
    space = _check_space(space)
    unknown = set(amps) - set(space)
    if unknown:
        raise UnknownLabelError(f"unknown basis labels {sorted(unknown)}")
    return make_state(space, [amps.get(label, 0.0) for label in space], normalize=normalize)


def identity(space: Sequence[str]) -> Operator:
    space = _check_space(space)
    return Operator(space, np.eye(len(space)))


def projector_from_vectors(vectors: Sequence[StateVector]) -> Projector:
    """Projector onto the span of ``vectors``.

    Modified Gram-Schmidt with one re-orthogonalization pass; vectors whose
    residual norm falls below 1e-10 are treated as linearly dependent.
    """
    vectors = list(vectors)
    if not vectors:
        raise EmptySpanError("cannot build a projector from an empty list")
    space = vectors[0].space
    for v in vectors[1:]:
        _same_space(space, v.space, "spanning vectors")
    basis: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v.amps)
        for _ in range(2):
            for q in basis:
                w = w - np.vdot(q, w) * q
        n = np.linalg.norm(w)
        if n < GRAM_SCHMIDT_CUTOFF:
            continue
        basis.append(w / n)
    if not basis:
        raise EmptySpanError("spanning vectors are all zero")
    q = np.column_stack(basis)
    return Projector(space, q @ q.conj().T)


def apply(op: Operator, state: StateVector) -> StateVector:
    """Matrix-vector product; the result is NOT renormalized."""
    _same_space(op.space, state.space)
    return StateVector(state.space, op.matrix @ state.amps)


def _require_normalized(state: StateVector) -> None:
    if abs(state.norm - 1.0) > NORM_TOL:
        raise NormalizationError(f"state has norm {state.norm!r}, expected 1")


def born_probabilities(state: StateVector, meas: Measurement) -> dict[str, float]:
    """Outcome probabilities ‖P_o|ψ⟩‖² in measurement order."""
    _same_space(meas.space, state.space)
    _require_normalized(state)
    return {
        label: float(np.linalg.norm(proj.matrix @ state.amps) ** 2)
        for label, proj in meas.outcomes
    }


def collapse(state: StateVector, proj: Projector) -> tuple[float, StateVector]:
    """Project and renormalize; returns ``(probability, post-measurement state)``."""
    _same_space(proj.space, state.space)
    _require_normalized(state)
    projected = proj.matrix @ state.amps
    norm = float(np.linalg.norm(projected))
    prob = norm ** 2
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcome(f"outcome has probability {prob:.3e}")
    return prob, StateVector(state.space, projected / norm)
