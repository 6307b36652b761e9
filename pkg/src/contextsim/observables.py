"""Pauli operators, the Mermin square and the two measurement contexts of C.

Labels are stable strings and show up in reports and CLI output. The two
commuting triples used for route discrimination are::

    A  = s1x           B  = s2y           C = A B
    A' = s1y s2x       B' = s1z s2z       C = A' B'

with ``{A, B, C}`` diagonal in the ``PHI_BASIS`` and ``{A', B', C}`` diagonal
in the ``PSI_BASIS``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import qlinalg as ql
from .errors import NotOrthonormal

# eigenvalues closer than this are one degenerate eigenspace
CLUSTER_TOL = 1e-9
ALGEBRA_TOL = 1e-12

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)

# Common eigenbasis of {A, B, C}; computational order |++>, |+->, |-+>, |-->.
PHI_BASIS = (
    np.array([1, 1j, 1, 1j]) / 2,
    np.array([1, -1j, 1, -1j]) / 2,
    np.array([1, 1j, -1, -1j]) / 2,
    np.array([1, -1j, -1, 1j]) / 2,
)
# Common eigenbasis of {A', B', C}, ordered so (a', b', c) runs
# (+,+,+), (-,-,+), (-,+,-), (+,-,-).
_R2 = np.sqrt(2.0)
PSI_BASIS = (
    np.array([1, 0, 0, 1j]) / _R2,
    np.array([0, 1, -1j, 0]) / _R2,
    np.array([1, 0, 0, -1j]) / _R2,
    np.array([0, 1, 1j, 0]) / _R2,
)


@dataclass(frozen=True)
class SpectralComponent:
    eigenvalue: float
    projector: np.ndarray
    rank: int


@dataclass(frozen=True, eq=False)
class Observable:
    """A Hermitian operator with its spectral decomposition cached.

    ``spectrum`` holds one entry per distinct eigenvalue (descending), with the
    eigenspace projector. ``eigenbasis`` is one chosen orthonormal eigenbasis,
    needed by the von Neumann update when the spectrum is degenerate.
    """

    label: str
    matrix: np.ndarray
    spectrum: tuple[SpectralComponent, ...]
    eigenbasis: tuple[np.ndarray, ...]
    eigenvalues: tuple[float, ...] = field(default=())

    @classmethod
    def from_matrix(cls, label: str, matrix, eigenbasis: Sequence | None = None) -> "Observable":
        m = ql.as_matrix(matrix)
        pairs = ql.hermitian_eig(m)
        if eigenbasis is None:
            basis = tuple(v for _, v in pairs)
            values = tuple(lam for lam, _ in pairs)
        else:
            basis = tuple(ql.as_vector(v) for v in eigenbasis)
            values = _eigenvalues_of(m, basis)
        spectrum = _cluster(values, basis)
        return cls(label, m, spectrum, basis, values)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_degenerate(self) -> bool:
        return any(c.rank > 1 for c in self.spectrum)

    def with_eigenbasis(self, basis: Sequence, label: str | None = None) -> "Observable":
        return Observable.from_matrix(label or self.label, self.matrix, basis)

    def relabel(self, label: str) -> "Observable":
        return Observable(label, self.matrix, self.spectrum, self.eigenbasis, self.eigenvalues)

    def __matmul__(self, other: "Observable") -> np.ndarray:
        return self.matrix @ other.matrix

    def __repr__(self) -> str:
        spec = ", ".join(f"{c.eigenvalue:+g}x{c.rank}" for c in self.spectrum)
        return f"Observable({self.label!r}, dim={self.dim}, spectrum=[{spec}])"


def _eigenvalues_of(m: np.ndarray, basis: tuple[np.ndarray, ...]) -> tuple[float, ...]:
    if len(basis) != m.shape[0]:
        raise NotOrthonormal(f"eigenbasis needs {m.shape[0]} vectors, got {len(basis)}")
    ql.check_orthonormal(basis)
    values = []
    for v in basis:
        lam = np.vdot(v, m @ v)
        if ql.max_abs_diff(m @ v, lam * v) > 1e-10:
            raise ValueError("supplied basis vector is not an eigenvector")
        values.append(float(lam.real))
    return tuple(values)


def _cluster(values: Sequence[float], basis: Sequence[np.ndarray]) -> tuple[SpectralComponent, ...]:
    order = sorted(range(len(values)), key=lambda i: -values[i])
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(values[groups[-1][0]] - values[i]) <= CLUSTER_TOL:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g in groups:
        lam = float(np.mean([values[i] for i in g]))
        if abs(lam - round(lam)) <= 1e-12:
            lam = float(round(lam))
        out.append(SpectralComponent(lam, ql.projector_onto([basis[i] for i in g]), len(g)))
    return tuple(out)


def pauli(axis: str) -> Observable:
    """Single-qubit Pauli operator for ``axis`` in ``{'x', 'y', 'z'}``."""
    return Observable.from_matrix(f"s{axis}", SIGMA[axis])


def two_qubit(label: str, first: str | None, second: str | None, eigenbasis=None) -> Observable:
    """Product operator ``sigma_first (x) sigma_second``; ``None`` means identity."""
    left = I2 if first is None else SIGMA[first]
    right = I2 if second is None else SIGMA[second]
    return Observable.from_matrix(label, ql.tensor_product(left, right), eigenbasis)


@dataclass(frozen=True)
class MerminSquare:
    grid: tuple[tuple[Observable, ...], ...]

    def row(self, r: int) -> tuple[Observable, ...]:
        return self.grid[r]

    def column(self, c: int) -> tuple[Observable, ...]:
        return tuple(self.grid[r][c] for r in range(3))

    def labels(self) -> list[str]:
        return [o.label for row in self.grid for o in row]

    def negate(self, r: int, c: int) -> "MerminSquare":
        """Copy with one entry sign-flipped (used to exercise failing checks)."""
        rows = [list(row) for row in self.grid]
        o = rows[r][c]
        rows[r][c] = Observable.from_matrix("-" + o.label, -o.matrix)
        return MerminSquare(tuple(tuple(row) for row in rows))


def build_mermin_square() -> MerminSquare:
    """The nine two-qubit observables, rows/columns of mutually commuting triples."""
    grid = (
        (two_qubit("s1x", "x", None), two_qubit("s2x", None, "x"), two_qubit("s1x s2x", "x", "x")),
        (two_qubit("s2y", None, "y"), two_qubit("s1y", "y", None), two_qubit("s1y s2y", "y", "y")),
        (two_qubit("s1x s2y", "x", "y"), two_qubit("s2x s1y", "y", "x"), two_qubit("s1z s2z", "z", "z")),
    )
    return MerminSquare(grid)


@dataclass(frozen=True)
class ContextOperators:
    A: Observable
    B: Observable
    Aprime: Observable
    Bprime: Observable
    C: Observable
    phi_basis: tuple[np.ndarray, ...] = PHI_BASIS
    psi_basis: tuple[np.ndarray, ...] = PSI_BASIS

    def by_label(self) -> dict[str, Observable]:
        return {o.label: o for o in (self.A, self.B, self.Aprime, self.Bprime, self.C)}

    def C_in(self, basis: str) -> Observable:
        """``C`` carrying the phi or psi eigenbasis (for von Neumann updates)."""
        if basis == "phi":
            return self.C
        if basis == "psi":
            return self.C.with_eigenbasis(self.psi_basis)
        raise ValueError(f"unknown basis {basis!r}")


def build_context_operators() -> ContextOperators:
    phi, psi = PHI_BASIS, PSI_BASIS
    return ContextOperators(
        A=two_qubit("A", "x", None, phi),
        B=two_qubit("B", None, "y", phi),
        Aprime=two_qubit("A'", "y", "x", psi),
        Bprime=two_qubit("B'", "z", "z", psi),
        C=two_qubit("C", "x", "y", phi),
    )


def row_column_context(square: MerminSquare, r: int, c: int) -> ContextOperators:
    """Context built from row ``r`` and column ``c``; their shared entry plays ``C``.

    The other two column entries become ``A, B`` and the other two row entries
    ``A', B'``. Spectral bases are whatever the eigensolver returns.
    """
    col = [o for i, o in enumerate(square.column(c)) if i != r]
    row = [o for j, o in enumerate(square.row(r)) if j != c]
    return ContextOperators(
        A=col[0].relabel("A"),
        B=col[1].relabel("B"),
        Aprime=row[0].relabel("A'"),
        Bprime=row[1].relabel("B'"),
        C=square.grid[r][c].relabel("C"),
        phi_basis=(),
        psi_basis=(),
    )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name, "passed": self.passed, "residual": self.residual}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class VerificationReport:
    subject: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _close(name: str, a, b, tol: float) -> Check:
    r = ql.max_abs_diff(a, b)
    return Check(name, r <= tol, r)


def _commutes(x: Observable, y: Observable, tol: float) -> Check:
    r = float(np.max(np.abs(ql.commutator(x.matrix, y.matrix))))
    return Check(f"[{x.label},{y.label}]=0", r <= tol, r)


def _triple_commutes(name: str, triple: Sequence[Observable], tol: float) -> Check:
    r = max(
        float(np.max(np.abs(ql.commutator(triple[i].matrix, triple[j].matrix))))
        for i in range(3)
        for j in range(i + 1, 3)
    )
    return Check(name, r <= tol, r, " ".join(o.label for o in triple))


def verify_algebra(ops: Union[ContextOperators, MerminSquare], tol: float = ALGEBRA_TOL) -> VerificationReport:
    """Mechanically check the operator identities; failures are report entries."""
    if isinstance(ops, MerminSquare):
        return _verify_square(ops, tol)
    return _verify_context(ops, tol)


def _verify_square(sq: MerminSquare, tol: float) -> VerificationReport:
    rep = VerificationReport("mermin_square")
    for r in range(3):
        rep.checks.append(_triple_commutes(f"row{r}_commuting", sq.row(r), tol))
    for c in range(3):
        rep.checks.append(_triple_commutes(f"col{c}_commuting", sq.column(c), tol))
    for r in range(3):
        x, y, z = sq.row(r)
        rep.checks.append(_close(f"row{r}_product=+I", x.matrix @ y.matrix @ z.matrix, I4, tol))
    for c, sign in zip(range(3), (1, 1, -1)):
        x, y, z = sq.column(c)
        tag = "+I" if sign > 0 else "-I"
        rep.checks.append(_close(f"col{c}_product={tag}", x.matrix @ y.matrix @ z.matrix, sign * I4, tol))
    return rep


def _verify_context(ops: ContextOperators, tol: float) -> VerificationReport:
    A, B, Ap, Bp, C = ops.A, ops.B, ops.Aprime, ops.Bprime, ops.C
    rep = VerificationReport("context_operators")
    rep.checks.append(_close("C=AB", A.matrix @ B.matrix, C.matrix, tol))
    rep.checks.append(_close("C=A'B'", Ap.matrix @ Bp.matrix, C.matrix, tol))
    for x, y in ((A, B), (A, C), (B, C), (Ap, Bp), (Ap, C), (Bp, C)):
        rep.checks.append(_commutes(x, y, tol))
    for x, y in ((A, Ap), (A, Bp), (B, Ap), (B, Bp)):
        r = float(np.max(np.abs(ql.commutator(x.matrix, y.matrix))))
        rep.checks.append(Check(f"[{x.label},{y.label}]!=0", r >= 1.0, r))
    # a two-fold degenerate +-1 spectrum is what lets the routes differ
    ranks = {round(c.eigenvalue): c.rank for c in C.spectrum}
    ok = ranks == {1: 2, -1: 2}
    resid = max((abs(c.eigenvalue - round(c.eigenvalue)) for c in C.spectrum), default=0.0)
    detail = ", ".join(f"{c.eigenvalue:+g} x{c.rank}" for c in C.spectrum)
    rep.checks.append(Check("C_degenerate(+1x2,-1x2)", ok and resid <= tol, resid, detail))
    return rep
