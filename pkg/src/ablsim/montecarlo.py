"""Sequential-collapse oracle for conditional probabilities.

Shots are simulated on the full particle ⊗ ancilla space: the circuit runs
up to the which-way coupler (inclusive), the ancilla is read with Born
weights and the state collapsed, the rest of the circuit runs, and the final
detectors fire with Born weights.  Nothing here calls into :mod:`ablsim.abl`;
the ABL values only enter as the analytic column of the report.

Streams: shots are cut into fixed-size chunks and chunk ``k`` draws from
``Philox(SeedSequence(seed, spawn_key=(k,)))``.  The chunking depends only on
``shots``, so any number of workers reproduces the single-threaded counts.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .cohen import Scenario, abl_conditionals, forward_probabilities
from .errors import EmptySample, ImpossibleOutcome
from .hilbert import Measurement, Operator, StateVector, apply, born_probabilities, collapse
from .optics import CLICK, Circuit, circuit_unitary, run_circuit

__all__ = [
    "Trajectory",
    "EstimateEntry",
    "EstimateReport",
    "collapse_joint",
    "branch_tree",
    "sample_trajectory",
    "estimate",
    "make_rng",
]

CHUNK_SHOTS = 1 << 16
Z_THRESHOLD = 4.0


@dataclass(frozen=True)
class Trajectory:
    d3_outcome: Optional[str]   # "click", "no-click" or None when D3 is absent
    final_outcome: str


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def collapse_joint(state: StateVector, first: Measurement, evolve: Operator | None,
                   second: Measurement) -> dict[tuple[str, str], float]:
    """Exact joint distribution of two sequential projective measurements.

    P(o1, o2) = P(o1) · P(o2 | collapsed state), chaining :func:`collapse`.
    Branches with vanishing probability are reported as 0.
    """
    joint = {}
    for o1, p1 in first.outcomes:
        try:
            w1, post = collapse(state, p1)
        except ImpossibleOutcome:
            for o2 in second.labels:
                joint[(o1, o2)] = 0.0
            continue
        if evolve is not None:
            post = apply(evolve, post)
        for o2, w2 in born_probabilities(post, second).items():
            joint[(o1, o2)] = w1 * w2
    return joint


@dataclass(frozen=True)
class _Branch:
    d3_outcome: Optional[str]
    prob: float
    finals: tuple[str, ...]
    final_probs: np.ndarray


def _final_distribution(state: StateVector, meas: Measurement):
    probs = born_probabilities(state, meas)
    return tuple(probs), np.array(list(probs.values()))


def _stages(s: Scenario):
    """(state just after the coupler, unitary for the remaining elements)."""
    i = s.circuit.coupler_index()
    head = Circuit(s.registry, s.circuit.elements[: i + 1])
    state = run_circuit(s.initial_full(), head)
    return state, circuit_unitary(s.registry, s.circuit.elements[i + 1:])


def branch_tree(s: Scenario) -> tuple[_Branch, ...]:
    """All (D3 outcome -> final outcome) branches with their Born weights."""
    if not s.d3_present:
        final = run_circuit(s.initial_full(), s.circuit)
        finals, probs = _final_distribution(final, s.final_measurement)
        return (_Branch(None, 1.0, finals, probs),)
    state, rest = _stages(s)
    branches = []
    for label, proj in s.intermediate.outcomes:
        try:
            p, post = collapse(state, proj)
        except ImpossibleOutcome:
            continue
        finals, probs = _final_distribution(apply(rest, post), s.final_measurement)
        branches.append(_Branch(label, p, finals, probs))
    return tuple(branches)


def _pick(probs: np.ndarray, u):
    cum = np.cumsum(probs)
    cum = cum / cum[-1]
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(probs) - 1)


def sample_trajectory(s: Scenario, rng: np.random.Generator) -> Trajectory:
    """One shot by literal sequential collapse; consumes two uniforms."""
    u = rng.random(2)
    if s.d3_present:
        state, rest = _stages(s)
        first = born_probabilities(state, s.intermediate)
        labels = list(first)
        d3 = labels[int(_pick(np.array(list(first.values())), u[0]))]
        _, post = collapse(state, s.intermediate.projector(d3))
        final = apply(rest, post)
    else:
        d3 = None
        final = run_circuit(s.initial_full(), s.circuit)
    finals, probs = _final_distribution(final, s.final_measurement)
    return Trajectory(d3, finals[int(_pick(probs, u[1]))])


def _chunk_counts(tree, seed: int, stream: int, n: int) -> np.ndarray:
    rng = make_rng(seed, stream)
    u = rng.random((n, 2))
    first = _pick(np.array([b.prob for b in tree]), u[:, 0])
    width = max(len(b.finals) for b in tree)
    counts = np.zeros((len(tree), width), dtype=np.int64)
    for i, branch in enumerate(tree):
        mask = first == i
        finals = _pick(branch.final_probs, u[mask, 1])
        counts[i, : len(branch.finals)] = np.bincount(finals, minlength=len(branch.finals))
    return counts


@dataclass(frozen=True)
class EstimateEntry:
    name: str              # e.g. "P(D1)" or "P(D3|D1)"
    kind: str              # "marginal" or "conditional"
    hits: int
    n: int
    frequency: Optional[float]
    analytic: Optional[float]
    stderr: Optional[float]
    z: Optional[float]

    @property
    def passed(self) -> bool:
        return self.z is None or abs(self.z) <= Z_THRESHOLD


@dataclass(frozen=True)
class EstimateReport:
    scenario: str
    shots: int
    seed: int
    streams: int
    counts: dict[str, dict[str, int]]   # d3 outcome ("none" if absent) -> final -> hits
    entries: tuple[EstimateEntry, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> EstimateEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def mixture_identity(self) -> tuple[Fraction, Fraction]:
        """(Σ_f freq(click|f)·freq(f), freq(click)) as exact fractions."""
        click = self.counts.get(CLICK, {})
        finals = {f for row in self.counts.values() for f in row}
        mix = Fraction(0)
        for f in finals:
            n_f = sum(row.get(f, 0) for row in self.counts.values())
            if n_f:
                mix += Fraction(click.get(f, 0), n_f) * Fraction(n_f, self.shots)
        return mix, Fraction(sum(click.values()), self.shots)


def _entry(name: str, kind: str, hits: int, n: int, analytic: Optional[float]) -> EstimateEntry:
    if n == 0:
        return EstimateEntry(name, kind, hits, n, None, analytic, None, None)
    freq = hits / n
    se = math.sqrt(freq * (1.0 - freq) / n)
    if se == 0.0 and analytic is not None:
        # all-or-nothing sample: fall back to the analytic variance
        se = math.sqrt(analytic * (1.0 - analytic) / n)
    if analytic is None:
        z = None
    elif se == 0.0:
        z = 0.0 if freq == analytic else math.copysign(math.inf, freq - analytic)
    else:
        z = (freq - analytic) / se
    return EstimateEntry(name, kind, hits, n, freq, analytic, se, z)


def estimate(s: Scenario, shots: int, seed: int, workers: int = 1) -> EstimateReport:
    """Sample ``shots`` trajectories and compare frequencies with analytic values.

    Marginals are checked against forward Born probabilities and the D3
    conditionals against the ABL values.
    """
    if shots < 1:
        raise EmptySample("shots must be at least 1")
    tree = branch_tree(s)
    sizes = [CHUNK_SHOTS] * (shots // CHUNK_SHOTS)
    if shots % CHUNK_SHOTS:
        sizes.append(shots % CHUNK_SHOTS)
    jobs = list(enumerate(sizes))
    run = lambda job: _chunk_counts(tree, seed, job[0], job[1])  # noqa: E731
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    total = sum(parts[1:], parts[0].copy())

    counts: dict[str, dict[str, int]] = {}
    for i, branch in enumerate(tree):
        key = branch.d3_outcome if branch.d3_outcome is not None else "none"
        counts[key] = {f: int(total[i, j]) for j, f in enumerate(branch.finals)}

    forward = forward_probabilities(s)
    entries = []
    per_final = {f: sum(row.get(f, 0) for row in counts.values())
                 for f in s.detector_names}
    for f in s.detector_names:
        entries.append(_entry(f"P({f})", "marginal", per_final[f], shots, forward.get(f)))
    if s.d3_present:
        click_row = counts.get(CLICK, {})
        name = s.intermediate_name
        entries.append(_entry(f"P({name})", "marginal", sum(click_row.values()), shots,
                              forward[name]))
        conditionals = abl_conditionals(s, skip_impossible=True)
        for f in s.detector_names:
            entries.append(_entry(f"P({name}|{f})", "conditional", click_row.get(f, 0),
                                  per_final[f], conditionals.get(f)))
    return EstimateReport(s.name, shots, seed, len(sizes), counts, tuple(entries))
