"""The ABL rule for pre- and post-selected ensembles.

Two flavours are provided:

* :func:`abl_probability` -- complete post-selection on a state ``|Ψ2⟩``::

      Prob(c_n) = |⟨Ψ2|U2 P_n U1|Ψ1⟩|² / Σ_i |⟨Ψ2|U2 P_i U1|Ψ1⟩|²

* :func:`abl_generalized` -- post-selection on a (possibly degenerate)
  final outcome with projector ``P_B``::

      Prob(c_n) = ‖P_B U2 P_n U1|Ψ1⟩‖² / Σ_i ‖P_B U2 P_i U1|Ψ1⟩‖²

``U1`` (preparation to intermediate time) and ``U2`` (intermediate to final
time) default to the identity.  :func:`decompose_total` is the
law-of-total-probability mixer used to show which marginals make a
decomposition come out right.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from .errors import DimensionMismatch, ImpossiblePostSelection, IncompleteTable, ValidationError
from .hilbert import (
    PROBABILITY_TOL,
    Measurement,
    Operator,
    Projector,
    StateVector,
    identity,
)

__all__ = [
    "AblQuery",
    "DecompositionInput",
    "abl_probability",
    "abl_generalized",
    "abl",
    "decompose_total",
]

DENOMINATOR_FLOOR = 1e-14

Number = Union[float, Fraction]


@dataclass(frozen=True, eq=False)
class AblQuery:
    """Pre-state, intermediate observable and post-selection.

    ``final`` is a :class:`StateVector` for complete post-selection or a
    :class:`Projector` for an incomplete final measurement.
    """

    pre: StateVector
    intermediate: Measurement
    final: Union[StateVector, Projector]
    u1: Operator | None = None
    u2: Operator | None = None

    def __post_init__(self):
        space = self.pre.space
        if self.intermediate.space != space or self.final.space != space:
            raise DimensionMismatch("pre-state, intermediate measurement and final condition "
                                    "must share one space")
        for name in ("u1", "u2"):
            u = getattr(self, name)
            if u is None:
                object.__setattr__(self, name, identity(space))
            else:
                if u.space != space:
                    raise DimensionMismatch(f"{name} acts on {u.space}, expected {space}")
                u.require_unitary(name)
        if not isinstance(self.final, (StateVector, Projector)):
            raise ValidationError("final must be a StateVector or a Projector")

    @property
    def complete_final(self) -> bool:
        return isinstance(self.final, StateVector)


def _normalize(weights: dict[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    if total <= DENOMINATOR_FLOOR:
        raise ImpossiblePostSelection(
            f"post-selection never succeeds (denominator {total:.3e})"
        )
    return {label: w / total for label, w in weights.items()}


def abl_probability(q: AblQuery) -> dict[str, float]:
    """Intermediate-outcome distribution given complete post-selection on ``q.final``."""
    if not isinstance(q.final, StateVector):
        raise ValidationError("abl_probability needs a post-selected StateVector; "
                              "use abl_generalized for a projector")
    bra = q.final.amps.conj() @ q.u2.matrix
    evolved = q.u1.matrix @ q.pre.amps
    weights = {
        label: float(abs(bra @ (proj.matrix @ evolved)) ** 2)
        for label, proj in q.intermediate.outcomes
    }
    return _normalize(weights)


def abl_generalized(q: AblQuery) -> dict[str, float]:
    """Intermediate-outcome distribution given the final outcome ``P_B = q.final``."""
    if isinstance(q.final, StateVector):
        raise ValidationError("abl_generalized needs a final Projector; "
                              "use abl_probability for a post-selected state")
    after = q.final.matrix @ q.u2.matrix
    evolved = q.u1.matrix @ q.pre.amps
    weights = {
        label: float(np.linalg.norm(after @ (proj.matrix @ evolved)) ** 2)
        for label, proj in q.intermediate.outcomes
    }
    return _normalize(weights)


def abl(q: AblQuery) -> dict[str, float]:
    """Dispatch on the kind of post-selection."""
    return abl_probability(q) if q.complete_final else abl_generalized(q)


@dataclass(frozen=True)
class DecompositionInput:
    """Terms of Σ_f Prob(target | f) · Prob(f).

    Values may be floats or exact :class:`~fractions.Fraction` instances.
    """

    conditionals: Mapping[str, Number]
    marginals: Mapping[str, Number]
    target: str = "D3"

    def __post_init__(self):
        total = sum(self.marginals.values())
        if abs(float(total) - 1.0) > PROBABILITY_TOL:
            raise ValidationError(f"marginals sum to {float(total)!r}, expected 1",
                                  invariant="marginal normalization")
        for outcome, p in self.conditionals.items():
            if not 0 <= p <= 1:
                raise ValidationError(f"conditional for {outcome!r} is {p!r}, outside [0, 1]",
                                      invariant="probability range")

    def terms(self) -> list[tuple[str, Number, Number]]:
        """``(outcome, conditional, marginal)`` in marginal order."""
        missing = set(self.conditionals) ^ set(self.marginals)
        if missing:
            raise IncompleteTable(
                f"outcomes {sorted(missing)} appear in only one of conditionals/marginals"
            )
        return [(f, self.conditionals[f], self.marginals[f]) for f in self.marginals]


def decompose_total(d: DecompositionInput) -> Number:
    """Σ_f conditionals[f] · marginals[f].

    Pure arithmetic: whether the marginals belong to the same arrangement
    as the conditionals is the caller's business.  Exact Fractions in give an
    exact Fraction out.
    """
    terms = d.terms()
    if all(isinstance(c, Fraction) and isinstance(m, Fraction) for _, c, m in terms):
        return sum((c * m for _, c, m in terms), Fraction(0))
    return float(sum(float(c) * float(m) for _, c, m in terms))
