"""Monte Carlo individual measurements and the route / apparatus tests.

Randomness is counter based. Shot ``i`` of an experiment with seed ``s`` draws
its uniforms from Philox block ``i`` under key ``s``, so every shot is a pure
function of ``(s, i)`` and the result does not depend on how shots are split
across threads.
"""

from __future__ import annotations

import enum
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contexts import (
    Order,
    Route,
    RouteTag,
    StateSpec,
    density_from_spec,
    discriminate_route,
)
from .errors import DegeneratePreparation, DimensionMismatch, NonDiscriminable
from .measurement import DensityMatrix, Outcome, OutcomeDistribution, expectation, outcome_distribution
from .observables import ContextOperators, Observable, build_context_operators
from . import qlinalg as ql

DRAWS_PER_STREAM = 4
CHUNK = 2048
THREADS_ENV = "CONTEXTSIM_THREADS"

_MASK64 = (1 << 64) - 1


def _uniforms(raw: np.ndarray) -> np.ndarray:
    # top 53 bits -> [0, 1)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class RngStream:
    """Up to four uniforms for one shot, from Philox block ``stream_id`` under key ``seed``."""

    __slots__ = ("seed", "stream_id", "_draws", "_pos")

    def __init__(self, seed: int, stream_id: int, draws: Sequence[float] | None = None):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id)
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")
        self._draws = None if draws is None else list(draws)
        self._pos = 0

    @classmethod
    def batch(cls, seed: int, start: int, count: int) -> list["RngStream"]:
        """Streams ``start .. start+count-1`` generated in one vectorized call."""
        bg = np.random.Philox(key=int(seed) & _MASK64)
        if start:
            bg.advance(start)
        u = _uniforms(bg.random_raw(DRAWS_PER_STREAM * count)).reshape(count, DRAWS_PER_STREAM)
        return [cls(seed, start + i, u[i].tolist()) for i in range(count)]

    def next_uniform(self) -> float:
        if self._draws is None:
            bg = np.random.Philox(key=self.seed)
            if self.stream_id:
                bg.advance(self.stream_id)
            self._draws = _uniforms(bg.random_raw(DRAWS_PER_STREAM)).tolist()
        if self._pos >= DRAWS_PER_STREAM:
            raise RuntimeError(f"stream exhausted after {DRAWS_PER_STREAM} draws")
        u = self._draws[self._pos]
        self._pos += 1
        return u

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, used={self._pos})"


def _pick(entries: Sequence[Outcome], u: float) -> Outcome:
    acc = 0.0
    for e in entries:
        acc += e.probability
        if u < acc:
            return e
    return entries[-1]


def sample_measurement(rho: DensityMatrix, obs: Observable, rng: RngStream) -> tuple[float, DensityMatrix]:
    """One individual measurement: Born-sampled eigenvalue and selective Lueders post state."""
    dist = outcome_distribution(rho, obs)
    hit = _pick(dist.entries, rng.next_uniform())
    return hit.eigenvalue, hit.post_state


class Probe(str, enum.Enum):
    B = "B"
    BPRIME = "B'"
    NONE = "none"


class _BranchCache:
    """Outcome distributions keyed by the outcome history from a fixed initial state.

    After a given sequence of selective outcomes the state is fully determined,
    so shots sharing a history can share the (expensive) spectral work.
    """

    def __init__(self, rho: DensityMatrix):
        self.rho = rho
        self._dists: dict[tuple, OutcomeDistribution] = {}
        self._lock = threading.Lock()

    def distribution(self, path: tuple, state: DensityMatrix, obs: Observable) -> OutcomeDistribution:
        key = path + (obs.label,)
        dist = self._dists.get(key)
        if dist is None:
            dist = outcome_distribution(state, obs)
            with self._lock:
                dist = self._dists.setdefault(key, dist)
        return dist


@dataclass(frozen=True)
class ShotRecord:
    shot: int
    route: str
    c: int
    a: int | None = None
    b: int | None = None
    aprime: int | None = None
    bprime: int | None = None
    probe: str = "none"
    probe_outcome: int | None = None

    CSV_HEADER = ("shot", "route", "a", "b", "aprime", "bprime", "c", "probe", "probe_outcome")

    def csv_row(self) -> list[str]:
        def f(v):
            return "" if v is None else str(v)
        return [str(self.shot), self.route, f(self.a), f(self.b), f(self.aprime), f(self.bprime),
                str(self.c), "" if self.probe == "none" else self.probe, f(self.probe_outcome)]


def _int(x: float) -> int:
    return int(round(x))


def run_shot(
    rho: DensityMatrix,
    route: Route,
    probe: Probe | str,
    rng: RngStream,
    ops: ContextOperators | None = None,
    cache: _BranchCache | None = None,
    shot: int | None = None,
) -> ShotRecord:
    """Prepare ``rho``, measure C along ``route``, then optionally measure a probe."""
    ops = ops or build_context_operators()
    if rho.dim != ops.C.dim:
        raise DimensionMismatch(f"state has dim {rho.dim}, operators act on dim {ops.C.dim}")
    probe = Probe(probe)
    if cache is None or cache.rho is not rho:
        cache = _BranchCache(rho)
    tag = route.tag
    if tag is RouteTag.DIRECT_C:
        seq = [ops.C]
    elif tag is RouteTag.VIA_AB:
        seq = [ops.A, ops.B]
    elif tag is RouteTag.VIA_APRIME_BPRIME:
        seq = [ops.Aprime, ops.Bprime]
    else:
        raise ValueError(f"route {tag.value} does not measure C = AB = A'B'")
    if route.order is Order.SECOND_THEN_FIRST:
        seq = seq[::-1]

    state, path, got = rho, (), {}
    for obs in seq:
        hit = _pick(cache.distribution(path, state, obs).entries, rng.next_uniform())
        got[obs.label] = _int(hit.eigenvalue)
        path += ((obs.label, got[obs.label]),)
        state = hit.post_state

    probe_outcome = None
    if probe is not Probe.NONE:
        pobs = ops.B if probe is Probe.B else ops.Bprime
        hit = _pick(cache.distribution(path, state, pobs).entries, rng.next_uniform())
        probe_outcome = _int(hit.eigenvalue)

    if tag is RouteTag.DIRECT_C:
        c = got["C"]
    elif tag is RouteTag.VIA_AB:
        c = got["A"] * got["B"]
    else:
        c = got["A'"] * got["B'"]
    return ShotRecord(
        shot=rng.stream_id if shot is None else shot,
        route=route.name,
        c=c,
        a=got.get("A"),
        b=got.get("B"),
        aprime=got.get("A'"),
        bprime=got.get("B'"),
        probe=probe.value,
        probe_outcome=probe_outcome,
    )


def resolve_threads(threads: int | None = None) -> int:
    """Explicit ``threads`` wins; otherwise ``CONTEXTSIM_THREADS`` (0 or unset = auto)."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        threads = int(raw)
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    if threads == 0:
        threads = min(8, os.cpu_count() or 1)
    return threads


def _run_chunked(n: int, seed: int, work: Callable[[RngStream], object], threads: int | None) -> list:
    """Apply ``work`` to streams ``0..n-1`` and return results in shot order."""
    starts = list(range(0, n, CHUNK))

    def do(start: int) -> list:
        return [work(s) for s in RngStream.batch(seed, start, min(CHUNK, n - start))]

    nthreads = resolve_threads(threads)
    if nthreads == 1 or len(starts) == 1:
        parts = [do(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(do, starts))
    return [r for part in parts for r in part]


def _mean_stderr(xs: Sequence[int]) -> tuple[float, float]:
    n = len(xs)
    # fsum is exactly rounded, hence independent of summation order
    mean = math.fsum(xs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class ExperimentConfig:
    state: StateSpec
    route: Route
    seed: int
    shots: int = 1000
    split: float = 0.5
    threshold_k: float = 3.0

    def __post_init__(self):
        if self.shots < 2:
            raise ValueError("need at least 2 shots")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie strictly between 0 and 1")
        nb = self.n_probe_b
        if nb < 1 or self.shots - nb < 1:
            raise ValueError("split leaves one probe group empty")
        if self.threshold_k <= 0:
            raise ValueError("threshold_k must be positive")

    @property
    def n_probe_b(self) -> int:
        return math.ceil(self.split * self.shots)

    @property
    def threshold(self) -> float:
        # a mean of N outcomes in [-1, 1] has standard error at most 1/sqrt(N)
        return self.threshold_k / math.sqrt(min(self.n_probe_b, self.shots - self.n_probe_b))


@dataclass
class ExperimentResult:
    c_mean: float
    b_mean: float
    b_stderr: float
    bprime_mean: float
    bprime_stderr: float
    threshold: float
    inferred_route: Route
    true_route: Route
    shots: int
    seed: int
    records: list[ShotRecord] | None = field(default=None, repr=False)

    @property
    def correct(self) -> bool:
        return self.inferred_route.tag is self.true_route.tag

    def to_dict(self) -> dict:
        return {
            "c_mean": self.c_mean,
            "b_mean": self.b_mean,
            "b_stderr": self.b_stderr,
            "bprime_mean": self.bprime_mean,
            "bprime_stderr": self.bprime_stderr,
            "threshold": self.threshold,
            "inferred_route": self.inferred_route.name,
            "true_route": self.true_route.to_dict(),
            "correct": self.correct,
            "shots": self.shots,
            "seed": self.seed,
        }


def check_preparation(rho: DensityMatrix, threshold: float, ops: ContextOperators | None = None) -> tuple[float, float]:
    """Analytic <B>, <B'> of ``rho``; raise if either sits inside the decision band."""
    ops = ops or build_context_operators()
    mb, mbp = expectation(rho, ops.B), expectation(rho, ops.Bprime)
    for name, m in (("B", mb), ("B'", mbp)):
        if abs(m) <= threshold:
            raise DegeneratePreparation(
                f"<{name}> = {m:.6g} of the prepared state is within the decision threshold "
                f"{threshold:.6g}; prepare a different state"
            )
    return mb, mbp


def run_discrimination_experiment(
    config: ExperimentConfig,
    threads: int | None = None,
    keep_records: bool = False,
    ops: ContextOperators | None = None,
) -> ExperimentResult:
    """Measure C on ``shots`` fresh copies, probe B on the first group and B' on the rest."""
    ops = ops or build_context_operators()
    rho = density_from_spec(config.state)
    threshold = config.threshold
    check_preparation(rho, threshold, ops)
    cache = _BranchCache(rho)
    nb = config.n_probe_b

    def work(stream: RngStream) -> ShotRecord:
        probe = Probe.B if stream.stream_id < nb else Probe.BPRIME
        return run_shot(rho, config.route, probe, stream, ops, cache)

    records = _run_chunked(config.shots, config.seed, work, threads)
    c_mean, _ = _mean_stderr([r.c for r in records])
    b_mean, b_err = _mean_stderr([r.probe_outcome for r in records[:nb]])
    bp_mean, bp_err = _mean_stderr([r.probe_outcome for r in records[nb:]])
    return ExperimentResult(
        c_mean=c_mean,
        b_mean=b_mean,
        b_stderr=b_err,
        bprime_mean=bp_mean,
        bprime_stderr=bp_err,
        threshold=threshold,
        inferred_route=discriminate_route(b_mean, bp_mean, threshold),
        true_route=config.route,
        shots=config.shots,
        seed=config.seed,
        records=records if keep_records else None,
    )


# -- black-box apparatus -------------------------------------------------------

class BlackBoxApparatus:
    """Measures ``observable`` and hands back (outcome, post state).

    Whether it applies the Lueders or the von Neumann rule is hidden; use
    :func:`lueders_apparatus` or :func:`von_neumann_apparatus` to build one.
    """

    def __init__(self, observable: Observable, _kind: str):
        if _kind not in ("lueders", "von-neumann"):
            raise ValueError(f"unknown apparatus kind {_kind!r}")
        self.observable = observable
        self._kind = _kind
        self._tables: dict[bytes, tuple[Outcome, ...]] = {}
        self._lock = threading.Lock()

    def _table(self, rho: DensityMatrix) -> tuple[Outcome, ...]:
        key = rho.matrix.tobytes()
        table = self._tables.get(key)
        if table is None:
            if self._kind == "lueders":
                table = outcome_distribution(rho, self.observable).entries
            else:
                table = _von_neumann_outcomes(rho, self.observable)
            with self._lock:
                table = self._tables.setdefault(key, table)
        return table

    def measure(self, rho: DensityMatrix, rng: RngStream) -> tuple[float, DensityMatrix]:
        hit = _pick(self._table(rho), rng.next_uniform())
        return hit.eigenvalue, hit.post_state

    def __repr__(self) -> str:
        return f"BlackBoxApparatus({self.observable.label!r})"


def _von_neumann_outcomes(rho: DensityMatrix, obs: Observable) -> tuple[Outcome, ...]:
    if rho.dim != obs.dim:
        raise DimensionMismatch(f"state has dim {rho.dim}, observable has dim {obs.dim}")
    out = []
    for lam, v in zip(obs.eigenvalues, obs.eigenbasis):
        p = float(np.vdot(v, rho.matrix @ v).real)
        if p > 1e-14:
            out.append((lam, p, v))
    total = sum(p for _, p, _ in out)
    return tuple(Outcome(lam, p / total, DensityMatrix(ql.outer(v), check=False)) for lam, p, v in out)


def lueders_apparatus(obs: Observable) -> BlackBoxApparatus:
    return BlackBoxApparatus(obs, "lueders")


def von_neumann_apparatus(obs: Observable) -> BlackBoxApparatus:
    """Rank-one projections onto ``obs.eigenbasis``."""
    return BlackBoxApparatus(obs, "von-neumann")


@dataclass(frozen=True)
class ApparatusVerdict:
    decision: str
    probe_mean: float
    probe_stderr: float
    threshold: float
    confidence: float
    shots: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "probe": "B'",
            "probe_mean": self.probe_mean,
            "probe_stderr": self.probe_stderr,
            "threshold": self.threshold,
            "confidence_sigmas": self.confidence,
            "shots": self.shots,
            "seed": self.seed,
        }


def discriminate_apparatus(
    box: BlackBoxApparatus,
    spec: StateSpec,
    shots: int,
    seed: int,
    threshold_k: float = 3.0,
    threads: int | None = None,
    ops: ContextOperators | None = None,
) -> ApparatusVerdict:
    """Tell a Lueders box from a von Neumann box by probing B' afterwards.

    With C measured by a Lueders box, <B'> survives unchanged; dephasing in the
    {A, B, C} eigenbasis sends it to zero. ``confidence`` is the observed
    |<B'>| in units of the worst-case standard error ``1/sqrt(shots)``.
    """
    ops = ops or build_context_operators()
    if not box.observable.is_degenerate:
        raise NonDiscriminable(
            f"{box.observable.label!r} has a nondegenerate spectrum; both rules give the same state"
        )
    if shots < 2:
        raise ValueError("need at least 2 shots")
    rho = density_from_spec(spec)
    threshold = threshold_k / math.sqrt(shots)
    mbp = expectation(rho, ops.Bprime)
    if abs(mbp) <= threshold:
        raise DegeneratePreparation(
            f"<B'> = {mbp:.6g} of the prepared state is within the decision threshold {threshold:.6g}"
        )
    probe_cache: dict[bytes, OutcomeDistribution] = {}

    def work(stream: RngStream) -> int:
        _, post = box.measure(rho, stream)
        key = post.matrix.tobytes()
        dist = probe_cache.get(key)
        if dist is None:
            dist = probe_cache.setdefault(key, outcome_distribution(post, ops.Bprime))
        return _int(_pick(dist.entries, stream.next_uniform()).eigenvalue)

    outcomes = _run_chunked(shots, seed, work, threads)
    mean, err = _mean_stderr(outcomes)
    decision = "Lueders" if abs(mean) > threshold else "VonNeumann"
    return ApparatusVerdict(decision, mean, err, threshold, abs(mean) * math.sqrt(shots), shots, seed)
