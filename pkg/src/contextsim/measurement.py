"""Projective state updates: Lueders, von Neumann and the Born rule.

Lueders projects with eigenspace projectors, so coherences inside a degenerate
eigenspace survive. von Neumann projects onto a chosen eigenbasis one vector
at a time and removes every off-diagonal term in that basis. The two agree
whenever the spectrum is nondegenerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from . import qlinalg as ql
from .errors import DimensionMismatch, InvalidState, NumericalDrift
from .observables import Observable

STATE_TOL = 1e-10
# outcomes with probability at or below this are dropped
ZERO_PROB = 1e-14
# max correction the post-update hygiene step may apply silently
DRIFT_TOL = 1e-10


class DensityMatrix:
    """Validated density operator: Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, *, tol: float = STATE_TOL, check: bool = True):
        m = ql.as_matrix(matrix)
        if check:
            _validate(m, tol)
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = ql.as_vector(psi)
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidState(f"state vector has norm {norm!r}")
        return cls(ql.outer(psi))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def in_basis(self, basis: Sequence) -> np.ndarray:
        """Matrix elements ``<b_j| rho |b_k>`` for an orthonormal basis."""
        u = np.column_stack([ql.as_vector(b) for b in basis])
        return ql.dagger(u) @ self.matrix @ u

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


def _validate(m: np.ndarray, tol: float) -> None:
    herm = ql.hermiticity_residual(m)
    if herm > tol:
        raise InvalidState(f"density matrix not Hermitian (residual {herm:.3e})")
    tr = np.trace(m)
    if abs(tr - 1.0) > tol:
        raise InvalidState(f"density matrix trace is {tr.real:.12g}, expected 1")
    lowest = ql.hermitian_eig(m, tol=tol)[-1][0]
    if lowest < -tol:
        raise InvalidState(f"density matrix has negative eigenvalue {lowest:.3e}")


def _check_dims(rho: DensityMatrix, obs: Observable) -> None:
    if rho.dim != obs.dim:
        raise DimensionMismatch(f"state has dim {rho.dim}, observable {obs.label!r} has dim {obs.dim}")


def _tidy(m: np.ndarray, selective: bool = False) -> DensityMatrix:
    """Re-symmetrize and renormalize; refuse silently large corrections.

    Selective post states are conditioned on one outcome, so their trace is
    restored by division and only the Hermiticity correction is policed.
    """
    sym = 0.5 * (m + ql.dagger(m))
    tr = np.trace(sym).real
    drift = ql.max_abs_diff(sym, m) / max(tr, 1e-300) if selective else max(ql.max_abs_diff(sym, m), abs(tr - 1.0))
    if drift > DRIFT_TOL:
        raise NumericalDrift(f"state update drifted by {drift:.3e}")
    return DensityMatrix(sym / tr, check=False)


def lueders_update(rho: DensityMatrix, obs: Observable) -> DensityMatrix:
    """Non-selective Lueders update ``sum_n P_n rho P_n``."""
    _check_dims(rho, obs)
    m = rho.matrix
    return _tidy(sum(c.projector @ m @ c.projector for c in obs.spectrum))


def von_neumann_update(rho: DensityMatrix, obs: Observable) -> DensityMatrix:
    """Full dephasing of ``rho`` in ``obs.eigenbasis``."""
    _check_dims(rho, obs)
    m = rho.matrix
    out = np.zeros_like(m)
    for v in obs.eigenbasis:
        p = np.vdot(v, m @ v)
        out = out + p * ql.outer(v)
    return _tidy(out)


def sequential_lueders(rho: DensityMatrix, sequence: Sequence[Observable]) -> DensityMatrix:
    return reduce(lueders_update, sequence, rho)


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    _check_dims(rho, obs)
    val = np.trace(rho.matrix @ obs.matrix)
    if abs(val.imag) > 1e-10:
        raise NumericalDrift(f"<{obs.label}> has imaginary part {val.imag:.3e}")
    return float(val.real)


@dataclass(frozen=True)
class Outcome:
    eigenvalue: float
    probability: float
    post_state: DensityMatrix


@dataclass(frozen=True)
class OutcomeDistribution:
    entries: tuple[Outcome, ...]

    def probabilities(self) -> dict[float, float]:
        return {e.eigenvalue: e.probability for e in self.entries}

    def mixture(self) -> np.ndarray:
        """Probability-weighted sum of post states (the non-selective state)."""
        return sum(e.probability * e.post_state.matrix for e in self.entries)

    def mean(self) -> float:
        return float(sum(e.eigenvalue * e.probability for e in self.entries))


def outcome_distribution(rho: DensityMatrix, obs: Observable) -> OutcomeDistribution:
    """Born probabilities ``tr(P_n rho)`` with the selective Lueders post states.

    Entries follow ``obs.spectrum`` (descending eigenvalue); outcomes whose
    probability is at or below ``ZERO_PROB`` are omitted. Probabilities are
    renormalized over the kept outcomes.
    """
    _check_dims(rho, obs)
    m = rho.matrix
    kept = []
    for comp in obs.spectrum:
        p = float(np.trace(comp.projector @ m).real)
        if p > ZERO_PROB:
            kept.append((comp, p))
    total = sum(p for _, p in kept)
    entries = []
    for comp, p in kept:
        post = comp.projector @ m @ comp.projector
        entries.append(Outcome(comp.eigenvalue, p / total, _tidy(post, selective=True)))
    return OutcomeDistribution(tuple(entries))
