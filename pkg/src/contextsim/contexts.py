"""Three routes to measure C = AB = A'B' and what each leaves behind.

Every final state is available two ways: numerically, by running the
projective updates, and in closed form from the ``r`` coefficients of the
initial pure state. The two are cross-checked in the test suite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qlinalg as ql
from .errors import InvalidState, NotNormalized
from .measurement import (
    DensityMatrix,
    expectation,
    lueders_update,
    sequential_lueders,
)
from .observables import PHI_BASIS, ContextOperators, Observable, build_context_operators

NORM_TOL = 1e-12
OBSERVABLE_LABELS = ("A", "B", "A'", "B'", "C")


class RouteTag(str, enum.Enum):
    DIRECT_C = "DirectC"
    VIA_AB = "ViaAB"
    VIA_APRIME_BPRIME = "ViaAPrimeBPrime"
    DIRECT_IDENTITY = "DirectIdentity"
    VIA_A_PLUS_B = "ViaAplusB"

    @property
    def is_product(self) -> bool:
        return self in (RouteTag.VIA_AB, RouteTag.VIA_APRIME_BPRIME)

    @property
    def is_sequential(self) -> bool:
        return self.is_product or self is RouteTag.VIA_A_PLUS_B


class Order(str, enum.Enum):
    FIRST_THEN_SECOND = "first-then-second"
    SECOND_THEN_FIRST = "second-then-first"


@dataclass(frozen=True)
class Route:
    """A measurement context for C. Sequential routes always carry an order."""

    tag: RouteTag
    order: Order | None = None

    def __post_init__(self):
        tag = RouteTag(self.tag)
        object.__setattr__(self, "tag", tag)
        if tag.is_sequential:
            object.__setattr__(self, "order", Order(self.order or Order.FIRST_THEN_SECOND))
        elif self.order is not None:
            raise ValueError(f"route {tag.value} takes no order")

    @classmethod
    def parse(cls, text: str) -> "Route":
        key = text.strip().lower().replace("_", "-")
        aliases = {
            "directc": RouteTag.DIRECT_C, "direct-c": RouteTag.DIRECT_C, "c": RouteTag.DIRECT_C,
            "viaab": RouteTag.VIA_AB, "via-ab": RouteTag.VIA_AB, "ab": RouteTag.VIA_AB,
            "viaaprimebprime": RouteTag.VIA_APRIME_BPRIME, "via-apbp": RouteTag.VIA_APRIME_BPRIME,
            "via-aprime-bprime": RouteTag.VIA_APRIME_BPRIME, "apbp": RouteTag.VIA_APRIME_BPRIME,
            "a'b'": RouteTag.VIA_APRIME_BPRIME,
            "directidentity": RouteTag.DIRECT_IDENTITY, "direct-identity": RouteTag.DIRECT_IDENTITY,
            "viaaplusb": RouteTag.VIA_A_PLUS_B, "via-a-plus-b": RouteTag.VIA_A_PLUS_B,
        }
        if key not in aliases:
            raise ValueError(f"unknown route {text!r}")
        return cls(aliases[key])

    @property
    def name(self) -> str:
        return self.tag.value

    def to_dict(self) -> dict:
        d = {"tag": self.tag.value}
        if self.order is not None:
            d["order"] = self.order.value
        return d


DIRECT_C = Route(RouteTag.DIRECT_C)
VIA_AB = Route(RouteTag.VIA_AB)
VIA_APRIME_BPRIME = Route(RouteTag.VIA_APRIME_BPRIME)
PRODUCT_ROUTES = (DIRECT_C, VIA_AB, VIA_APRIME_BPRIME)


@dataclass(frozen=True)
class StateSpec:
    """Pure two-qubit state ``alpha|++> + beta|+-> + gamma|-+> + delta|-->``."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        amps = [complex(a) for a in (self.alpha, self.beta, self.gamma, self.delta)]
        if not all(np.isfinite(a.real) and np.isfinite(a.imag) for a in amps):
            raise InvalidState("amplitudes must be finite")
        for name, a in zip(("alpha", "beta", "gamma", "delta"), amps):
            object.__setattr__(self, name, a)
        norm2 = sum(abs(a) ** 2 for a in amps)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NotNormalized(f"sum of |amplitude|^2 is {norm2:.15g}, expected 1")

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex], renormalize: bool = False) -> "StateSpec":
        amps = [complex(a) for a in amps]
        if len(amps) != 4:
            raise InvalidState(f"need 4 amplitudes, got {len(amps)}")
        if renormalize:
            n = float(np.sqrt(sum(abs(a) ** 2 for a in amps)))
            if n == 0.0:
                raise NotNormalized("zero vector")
            amps = [a / n for a in amps]
        return cls(*amps)

    @classmethod
    def example(cls) -> "StateSpec":
        """``(|++> - i|+-> + |-->) / sqrt(3)``, the standard demonstration state."""
        s = 1 / np.sqrt(3.0)
        return cls(s, -1j * s, 0.0, s)

    @classmethod
    def uniform(cls) -> "StateSpec":
        return cls(0.5, 0.5, 0.5, 0.5)

    @classmethod
    def plusplus(cls) -> "StateSpec":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "StateSpec":
        return cls(*ql.random_pure_state(4, rng))

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=complex)

    def amplitudes(self) -> list[complex]:
        return [self.alpha, self.beta, self.gamma, self.delta]


NAMED_STATES = {
    "example": StateSpec.example,
    "uniform": StateSpec.uniform,
    "plusplus": StateSpec.plusplus,
}


@dataclass(frozen=True)
class RCoefficients:
    r11: float
    r22: float
    r33: float
    r44: float
    r12: complex
    r13: complex
    r14: complex
    r23: complex
    r24: complex
    r34: complex

    def matrix(self) -> np.ndarray:
        m = np.diag([self.r11, self.r22, self.r33, self.r44]).astype(complex)
        for (i, j), v in self.offdiagonal().items():
            m[i - 1, j - 1] = v
            m[j - 1, i - 1] = np.conj(v)
        return m

    def offdiagonal(self) -> dict[tuple[int, int], complex]:
        return {
            (1, 2): self.r12, (1, 3): self.r13, (1, 4): self.r14,
            (2, 3): self.r23, (2, 4): self.r24, (3, 4): self.r34,
        }


def _require_spec(spec) -> StateSpec:
    if not isinstance(spec, StateSpec):
        raise TypeError("expected a StateSpec")
    return spec


def r_coefficients(spec: StateSpec) -> RCoefficients:
    """Entries ``r_ij = amp_i * conj(amp_j)`` of ``|psi><psi|``."""
    a, b, g, d = _require_spec(spec).amplitudes()
    c = np.conj
    return RCoefficients(
        r11=abs(a) ** 2, r22=abs(b) ** 2, r33=abs(g) ** 2, r44=abs(d) ** 2,
        r12=a * c(b), r13=a * c(g), r14=a * c(d),
        r23=b * c(g), r24=b * c(d), r34=g * c(d),
    )


def density_from_spec(spec: StateSpec) -> DensityMatrix:
    return DensityMatrix(r_coefficients(spec).matrix())


@dataclass(frozen=True)
class CDCoefficients:
    c11: float
    c22: float
    c33: float
    c44: float
    c14: complex
    c23: complex
    d11: float
    d22: float
    d14: float
    d23: float

    @property
    def c41(self) -> complex:
        return np.conj(self.c14)

    @property
    def c32(self) -> complex:
        return np.conj(self.c23)


def cd_coefficients(r: RCoefficients) -> CDCoefficients:
    """Coefficients of the three final states in the phi basis (times 4)."""
    re, im = np.real, np.imag
    i12, i13, i14, i23, i24, i34 = (im(x) for x in (r.r12, r.r13, r.r14, r.r23, r.r24, r.r34))
    e12, e13, e24, e34 = re(r.r12), re(r.r13), re(r.r24), re(r.r34)
    diag = r.r11 - r.r22 - r.r33 + r.r44
    return CDCoefficients(
        c11=1 - 2 * i12 + 2 * e13 - 2 * i14 + 2 * i23 + 2 * e24 - 2 * i34,
        c22=1 + 2 * i12 + 2 * e13 + 2 * i14 - 2 * i23 + 2 * e24 + 2 * i34,
        c33=1 - 2 * i12 - 2 * e13 + 2 * i14 - 2 * i23 - 2 * e24 - 2 * i34,
        c44=1 + 2 * i12 - 2 * e13 - 2 * i14 + 2 * i23 - 2 * e24 + 2 * i34,
        c14=diag - 2j * e12 - 2j * i13 - 2 * i14 - 2 * i23 + 2j * i24 + 2j * e34,
        c23=diag + 2j * e12 - 2j * i13 + 2 * i14 + 2 * i23 + 2j * i24 - 2j * e34,
        d11=1 - 2 * i14 + 2 * i23,
        d22=1 + 2 * i14 - 2 * i23,
        d14=diag - 2 * i14 - 2 * i23,
        d23=diag + 2 * i14 + 2 * i23,
    )


def _phi_operator(coeffs: np.ndarray) -> np.ndarray:
    """``sum_jk coeffs[j,k] |phi_j><phi_k|`` in the computational basis."""
    u = np.column_stack(PHI_BASIS)
    return u @ coeffs @ ql.dagger(u)


def closed_form_phi_coefficients(r: RCoefficients, route: Route) -> np.ndarray:
    """Final-state matrix elements in the phi basis, assembled from ``cd_coefficients``."""
    cd = cd_coefficients(r)
    k = np.zeros((4, 4), dtype=complex)
    tag = route.tag
    if tag in (RouteTag.DIRECT_C, RouteTag.VIA_AB):
        k[np.diag_indices(4)] = [cd.c11, cd.c22, cd.c33, cd.c44]
        if tag is RouteTag.DIRECT_C:
            k[0, 3], k[3, 0] = cd.c14, cd.c41
            k[1, 2], k[2, 1] = cd.c23, cd.c32
    elif tag is RouteTag.VIA_APRIME_BPRIME:
        # d11 sits on the C=+1 pair (phi1, phi4), d22 on the C=-1 pair (phi2, phi3)
        k[np.diag_indices(4)] = [cd.d11, cd.d22, cd.d22, cd.d11]
        k[0, 3] = k[3, 0] = cd.d14
        k[1, 2] = k[2, 1] = cd.d23
    else:
        raise ValueError(f"no closed form for route {tag.value}")
    return k / 4


def closed_form_final_state(r: RCoefficients, route: Route) -> DensityMatrix:
    return DensityMatrix(_phi_operator(closed_form_phi_coefficients(r, route)))


def _route_sequence(route: Route, ops: ContextOperators) -> list[Observable]:
    tag = route.tag
    if tag is RouteTag.DIRECT_C:
        return [ops.C]
    if tag is RouteTag.VIA_AB:
        seq = [ops.A, ops.B]
    elif tag is RouteTag.VIA_APRIME_BPRIME:
        seq = [ops.Aprime, ops.Bprime]
    else:
        raise ValueError(f"route {tag.value} does not measure C = AB = A'B'")
    return seq if route.order is Order.FIRST_THEN_SECOND else seq[::-1]


def route_sequence(route: Route, ops: ContextOperators | None = None) -> list[Observable]:
    """Observables measured, in order, along ``route``."""
    return _route_sequence(route, ops or build_context_operators())


def final_state_numeric(rho: DensityMatrix, route: Route, ops: ContextOperators | None = None) -> DensityMatrix:
    ops = ops or build_context_operators()
    if route.tag is RouteTag.DIRECT_C:
        return lueders_update(rho, ops.C)
    return sequential_lueders(rho, _route_sequence(route, ops))


@dataclass
class ExpectationTable:
    """``values[(observable_label, route_tag)]`` for the five observables and three routes."""

    values: dict[tuple[str, RouteTag], float] = field(default_factory=dict)

    def get(self, label: str, route: Route | RouteTag) -> float:
        tag = route.tag if isinstance(route, Route) else RouteTag(route)
        return self.values[(label, tag)]

    def row(self, label: str) -> tuple[float, float, float]:
        return tuple(self.values[(label, r.tag)] for r in PRODUCT_ROUTES)

    def max_abs_diff(self, other: "ExpectationTable") -> float:
        return max(abs(v - other.values[k]) for k, v in self.values.items())

    def to_dict(self) -> dict:
        return {
            label: {r.name: self.values[(label, r.tag)] for r in PRODUCT_ROUTES}
            for label in OBSERVABLE_LABELS
        }


def closed_form_expectations(r: RCoefficients) -> ExpectationTable:
    """Expectation values of A, B, A', B', C after each route, from ``r`` alone.

    The zeros are structural: dephasing in the {A', B', C} eigenbasis kills
    <A> and <B>, and dephasing in the {A, B, C} eigenbasis kills <A'> and <B'>.
    """
    re, im = np.real, np.imag
    a = 2 * re(r.r13) + 2 * re(r.r24)
    b = -2 * im(r.r12) - 2 * im(r.r34)
    ap = -2 * im(r.r14) - 2 * im(r.r23)
    bp = r.r11 - r.r22 - r.r33 + r.r44
    c = -2 * im(r.r14) + 2 * im(r.r23)
    C, AB, PP = RouteTag.DIRECT_C, RouteTag.VIA_AB, RouteTag.VIA_APRIME_BPRIME
    vals = {
        ("A", C): a, ("A", AB): a, ("A", PP): 0.0,
        ("B", C): b, ("B", AB): b, ("B", PP): 0.0,
        ("A'", C): ap, ("A'", AB): 0.0, ("A'", PP): ap,
        ("B'", C): bp, ("B'", AB): 0.0, ("B'", PP): bp,
        ("C", C): c, ("C", AB): c, ("C", PP): c,
    }
    return ExpectationTable({k: float(v) + 0.0 for k, v in vals.items()})


def numeric_expectations(rho: DensityMatrix, ops: ContextOperators | None = None) -> ExpectationTable:
    """The same table computed as ``tr(rho_route X)`` from the numeric final states."""
    ops = ops or build_context_operators()
    by_label = ops.by_label()
    table = ExpectationTable()
    for route in PRODUCT_ROUTES:
        final = final_state_numeric(rho, route, ops)
        for label in OBSERVABLE_LABELS:
            table.values[(label, route.tag)] = expectation(final, by_label[label])
    return table


def discriminate_route(mean_b: float, mean_bprime: float, threshold: float) -> Route:
    """Infer the route from the means of B and B' measured after it.

    <B> vanishes only via A'B'; otherwise <B'> vanishes only via AB.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if abs(mean_b) <= threshold:
        return VIA_APRIME_BPRIME
    if abs(mean_bprime) > threshold:
        return DIRECT_C
    return VIA_AB


# --- one-qubit additive decomposition: 1 = |+><+| + |-><-| -------------------

KET_UP = np.array([1, 0], dtype=complex)
KET_DOWN = np.array([0, 1], dtype=complex)


def additive_operators() -> dict[str, Observable]:
    return {
        "1": Observable.from_matrix("1", np.eye(2), [KET_UP, KET_DOWN]),
        "A": Observable.from_matrix("A", ql.outer(KET_UP), [KET_UP, KET_DOWN]),
        "B": Observable.from_matrix("B", ql.outer(KET_DOWN), [KET_UP, KET_DOWN]),
        "sx": Observable.from_matrix("sx", [[0, 1], [1, 0]]),
    }


@dataclass(frozen=True)
class AdditiveReport:
    rho_initial: DensityMatrix
    rho_direct: DensityMatrix
    rho_sum: DensityMatrix
    sx_direct: float
    sx_sum: float
    sx_direct_closed_form: float

    @property
    def discriminable(self) -> bool:
        return abs(self.sx_direct - self.sx_sum) > 1e-10


def additive_case(alpha: complex, beta: complex, gamma: complex, delta: complex) -> AdditiveReport:
    """Measure the identity directly versus as A then B with A + B = 1.

    Arguments are the entries of ``rho = alpha|+><+| + beta|+><-| + gamma|-><+| + delta|-><-|``.
    ``gamma`` must equal ``conj(beta)`` for ``rho`` to be a state.
    """
    m = np.array([[alpha, beta], [gamma, delta]], dtype=complex)
    if abs(complex(gamma) - np.conj(complex(beta))) > 1e-12:
        raise InvalidState("gamma must be the complex conjugate of beta")
    try:
        rho = DensityMatrix(m)
    except InvalidState as exc:
        raise InvalidState(f"not a valid one-qubit state: {exc}") from None
    ops = additive_operators()
    direct = lueders_update(rho, ops["1"])
    summed = sequential_lueders(rho, [ops["A"], ops["B"]])
    return AdditiveReport(
        rho_initial=rho,
        rho_direct=direct,
        rho_sum=summed,
        sx_direct=expectation(direct, ops["sx"]),
        sx_sum=expectation(summed, ops["sx"]),
        sx_direct_closed_form=float((complex(beta) + complex(gamma)).real),
    )
