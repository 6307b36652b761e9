"""Noncontextual hidden-variable models.

An assignment gives every observable a fixed value. Measuring simply reveals
the stored value, so no route can leave a trace: the joint statistics of any
set of revealed values are identical whichever way C is obtained.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .contexts import Route, RouteTag
from .errors import InvalidWeights, TooManyLabels

MAX_LABELS = 20
PM = (1, -1)
ONE_ZERO = (1, 0)

CONTEXT5_LABELS = ("A", "B", "A'", "B'", "C")
MERMIN9_LABELS = (
    "s1x", "s2x", "s1x s2x",
    "s2y", "s1y", "s1y s2y",
    "s1x s2y", "s2x s1y", "s1z s2z",
)


@dataclass(frozen=True)
class Constraint:
    """``prod(values) == target`` for ``kind='product'``; ``sum(coef*value) == target`` for ``'sum'``."""

    labels: tuple[str, ...]
    target: int
    kind: str = "product"
    coefficients: tuple[int, ...] = ()

    def satisfied(self, values: Mapping[str, int]) -> bool:
        if self.kind == "product":
            return math.prod(values[k] for k in self.labels) == self.target
        coef = self.coefficients or (1,) * len(self.labels)
        return sum(c * values[k] for c, k in zip(coef, self.labels)) == self.target

    def describe(self) -> str:
        if self.kind == "product":
            return f"{'*'.join(self.labels)} = {self.target:+d}"
        coef = self.coefficients or (1,) * len(self.labels)
        terms = " ".join(f"{c:+d}*{k}" for c, k in zip(coef, self.labels))
        return f"{terms} = {self.target}"


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...]

    def check_labels(self, labels: Sequence[str]) -> None:
        known = set(labels)
        for c in self.constraints:
            missing = set(c.labels) - known
            if missing:
                raise ValueError(f"constraint {c.describe()} references undeclared {sorted(missing)}")

    def without(self, index: int) -> "ConstraintSet":
        return ConstraintSet(self.constraints[:index] + self.constraints[index + 1:])

    def __len__(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class HVAssignment:
    values: Mapping[str, int]

    def key(self, labels: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.values[k] for k in labels)

    def __getitem__(self, label: str) -> int:
        return self.values[label]


def context5_constraints() -> ConstraintSet:
    # for +-1 values, AB = C is the same as A*B*C = +1
    return ConstraintSet((
        Constraint(("A", "B", "C"), 1),
        Constraint(("A'", "B'", "C"), 1),
    ))


def mermin9_constraints() -> ConstraintSet:
    L = MERMIN9_LABELS
    rows = [Constraint(tuple(L[3 * r:3 * r + 3]), 1) for r in range(3)]
    cols = [Constraint((L[c], L[c + 3], L[c + 6]), t) for c, t in zip(range(3), (1, 1, -1))]
    return ConstraintSet(tuple(rows + cols))


def additive_constraints() -> ConstraintSet:
    # C is the identity, whose only eigenvalue is +1
    return ConstraintSet((
        Constraint(("A", "B", "C"), 0, kind="sum", coefficients=(1, 1, -1)),
        Constraint(("C",), 1),
    ))


def enumerate_assignments(
    labels: Sequence[str],
    constraints: ConstraintSet,
    domain: Sequence[int] = PM,
) -> list[HVAssignment]:
    """Every assignment over ``domain`` satisfying all constraints.

    Order is lexicographic over ``labels`` with ``domain`` order per label
    (for the default domain, +1 before -1).
    """
    labels = tuple(labels)
    if len(labels) > MAX_LABELS:
        raise TooManyLabels(f"{len(labels)} labels exceeds the exhaustive limit of {MAX_LABELS}")
    constraints.check_labels(labels)
    found = []
    for combo in itertools.product(domain, repeat=len(labels)):
        values = dict(zip(labels, combo))
        if all(c.satisfied(values) for c in constraints.constraints):
            found.append(HVAssignment(values))
    return found


def additive_hv_table() -> list[HVAssignment]:
    """The two {+1, 0} assignments with A + B = C = 1."""
    return enumerate_assignments(("A", "B", "C"), additive_constraints(), ONE_ZERO)


# -- route statistics ----------------------------------------------------------

def _revealed_c(a: HVAssignment, route: Route) -> int:
    tag = route.tag
    if tag is RouteTag.DIRECT_C or tag is RouteTag.DIRECT_IDENTITY:
        return a["C"]
    if tag is RouteTag.VIA_AB:
        return a["A"] * a["B"]
    if tag is RouteTag.VIA_APRIME_BPRIME:
        return a["A'"] * a["B'"]
    if tag is RouteTag.VIA_A_PLUS_B:
        return a["A"] + a["B"]
    raise ValueError(f"unsupported route {tag}")


def routes_for(assignments: Sequence[HVAssignment]) -> tuple[Route, ...]:
    labels = set(assignments[0].values) if assignments else set()
    if {"A'", "B'"} <= labels:
        return tuple(Route(t) for t in (RouteTag.DIRECT_C, RouteTag.VIA_AB, RouteTag.VIA_APRIME_BPRIME))
    return (Route(RouteTag.DIRECT_IDENTITY), Route(RouteTag.VIA_A_PLUS_B))


def _joint(assignments, weights, route, observed) -> dict[tuple[int, ...], float]:
    dist: dict[tuple[int, ...], float] = defaultdict(float)
    for a, w in zip(assignments, weights):
        dist[a.key(observed) + (_revealed_c(a, route),)] += w
    return dict(dist)


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class HVRouteStatistics:
    route: Route
    observed: tuple[str, ...]
    distribution: dict[tuple[int, ...], float]
    means: dict[str, float]
    route_independence: float
    per_route_tv: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "route": self.route.name,
            "observed": list(self.observed) + ["c"],
            "distribution": [
                {"values": list(k), "probability": p} for k, p in sorted(self.distribution.items())
            ],
            "means": self.means,
            "route_independence_tv": self.route_independence,
        }


def hv_route_statistics(
    assignments: Sequence[HVAssignment],
    weights: Sequence[float],
    route: Route,
    observed: Sequence[str] | None = None,
) -> HVRouteStatistics:
    """Joint distribution of revealed values and of the route's value for C.

    ``route_independence`` is the largest total-variation distance between this
    route's distribution and that of any other route on the same model.
    """
    if len(assignments) == 0:
        raise InvalidWeights("no assignments to weight")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(assignments),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidWeights("weights must be non-negative, one per assignment, summing to 1")
    observed = tuple(observed) if observed is not None else tuple(sorted(assignments[0].values))
    dist = _joint(assignments, w, route, observed)
    c_col = len(observed)
    means = {k: float(sum(p * key[i] for key, p in dist.items())) for i, k in enumerate(observed)}
    means["c"] = float(sum(p * key[c_col] for key, p in dist.items()))
    per_route = {}
    for other in routes_for(assignments):
        per_route[other.name] = total_variation(dist, _joint(assignments, w, other, observed))
    return HVRouteStatistics(route, observed, dist, means, max(per_route.values()), per_route)
