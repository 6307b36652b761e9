"""Monte Carlo engine: streams, single shots, experiments and black boxes."""

import math
from collections import Counter

import numpy as np
import pytest

from contextsim import contexts as cx
from contextsim.errors import DegeneratePreparation, NonDiscriminable
from contextsim.measurement import expectation, outcome_distribution
from contextsim.observables import Observable, build_context_operators
from contextsim.sampling import (
    ExperimentConfig,
    Probe,
    RngStream,
    ShotRecord,
    discriminate_apparatus,
    lueders_apparatus,
    resolve_threads,
    run_discrimination_experiment,
    run_shot,
    von_neumann_apparatus,
)

OPS = build_context_operators()
EXAMPLE = cx.StateSpec.example()


def test_stream_lazy_matches_batch():
    batch = RngStream.batch(99, 5000, 10)
    for s in batch:
        lazy = RngStream(99, s.stream_id)
        assert [lazy.next_uniform() for _ in range(4)] == [s.next_uniform() for _ in range(4)]


def test_stream_bounds():
    s = RngStream(1, 0)
    draws = [s.next_uniform() for _ in range(4)]
    assert all(0.0 <= u < 1.0 for u in draws)
    with pytest.raises(RuntimeError):
        s.next_uniform()
    with pytest.raises(ValueError):
        RngStream(1, -1)


def test_uniforms_are_uniform():
    u = np.array([s.next_uniform() for s in RngStream.batch(5, 0, 20000)])
    counts, _ = np.histogram(u, bins=10, range=(0, 1))
    chi2 = float(np.sum((counts - 2000) ** 2 / 2000))
    assert chi2 < 30  # 9 dof, p ~ 4e-4


@pytest.mark.parametrize("route", cx.PRODUCT_ROUTES, ids=lambda r: r.name)
def test_shot_record_consistency(route):
    rho = cx.density_from_spec(EXAMPLE)
    for s in RngStream.batch(3, 0, 200):
        rec = run_shot(rho, route, Probe.B, s, OPS)
        if route.tag is cx.RouteTag.VIA_AB:
            assert rec.c == rec.a * rec.b and rec.aprime is None
        elif route.tag is cx.RouteTag.VIA_APRIME_BPRIME:
            assert rec.c == rec.aprime * rec.bprime and rec.a is None
        assert rec.c in (1, -1) and rec.probe_outcome in (1, -1)


def test_cache_does_not_change_results():
    rho = cx.density_from_spec(EXAMPLE)
    a = [run_shot(rho, cx.VIA_AB, "B'", s, OPS) for s in RngStream.batch(8, 0, 100)]
    b = [run_shot(rho, cx.VIA_AB, "B'", RngStream(8, i), OPS, cache=None) for i in range(100)]
    assert a == b


def test_csv_row_blanks():
    rec = ShotRecord(shot=3, route="DirectC", c=-1, probe="none")
    assert rec.csv_row() == ["3", "DirectC", "", "", "", "", "-1", "", ""]
    assert len(ShotRecord.CSV_HEADER) == len(rec.csv_row())


@pytest.mark.parametrize("route", cx.PRODUCT_ROUTES, ids=lambda r: r.name)
def test_convergence_within_three_sigma(route):
    cfg = ExperimentConfig(EXAMPLE, route, seed=2024, shots=20000)
    res = run_discrimination_experiment(cfg, threads=1)
    exact = cx.closed_form_expectations(cx.r_coefficients(EXAMPLE))
    assert abs(res.b_mean - exact.get("B", route)) <= 3 * res.b_stderr + 1e-12
    assert abs(res.bprime_mean - exact.get("B'", route)) <= 3 * res.bprime_stderr + 1e-12
    assert abs(res.c_mean - exact.get("C", route)) <= 3 / math.sqrt(cfg.shots)


def test_order_invariance_of_joint_outcomes():
    # A then B and B then A share one joint law for (a, b)
    rho = cx.density_from_spec(EXAMPLE)
    dist_a = outcome_distribution(rho, OPS.A)
    exact = {}
    for ea in dist_a.entries:
        for eb in outcome_distribution(ea.post_state, OPS.B).entries:
            exact[(int(ea.eigenvalue), int(eb.eigenvalue))] = ea.probability * eb.probability
    n = 20000
    for order in cx.Order:
        route = cx.Route(cx.RouteTag.VIA_AB, order)
        counts = Counter((r.a, r.b) for r in (run_shot(rho, route, "none", s, OPS)
                                              for s in RngStream.batch(11, 0, n)))
        chi2 = sum((counts.get(k, 0) - n * p) ** 2 / (n * p) for k, p in exact.items() if p > 0)
        assert chi2 < 16.3  # 3 dof, p = 1e-3


def test_thread_count_determinism():
    cfg = ExperimentConfig(EXAMPLE, cx.VIA_APRIME_BPRIME, seed=5, shots=9000)
    ref = run_discrimination_experiment(cfg, threads=1, keep_records=True)
    for t in (2, 3, 8):
        other = run_discrimination_experiment(cfg, threads=t, keep_records=True)
        assert other.to_dict() == ref.to_dict()
        assert other.records == ref.records


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("CONTEXTSIM_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("CONTEXTSIM_THREADS", "0")
    assert 1 <= resolve_threads() <= 8
    with pytest.raises(ValueError):
        resolve_threads(-1)


def test_config_threshold_and_validation():
    cfg = ExperimentConfig(EXAMPLE, cx.VIA_AB, seed=0, shots=1000)
    assert cfg.n_probe_b == 500
    assert abs(cfg.threshold - 3 / math.sqrt(500)) < 1e-15
    for bad in (dict(shots=1), dict(split=1.0), dict(threshold_k=0)):
        with pytest.raises(ValueError):
            ExperimentConfig(EXAMPLE, cx.VIA_AB, seed=0, **{"shots": 1000, **bad})


@pytest.mark.parametrize("state", ["uniform", "plusplus"])
def test_degenerate_preparation(state):
    cfg = ExperimentConfig(cx.NAMED_STATES[state](), cx.VIA_AB, seed=0)
    with pytest.raises(DegeneratePreparation):
        run_discrimination_experiment(cfg)


def test_apparatus_boxes():
    lu = discriminate_apparatus(lueders_apparatus(OPS.C), EXAMPLE, 10000, seed=1)
    vn = discriminate_apparatus(von_neumann_apparatus(OPS.C), EXAMPLE, 10000, seed=1)
    assert lu.decision == "Lueders" and vn.decision == "VonNeumann"
    rho = cx.density_from_spec(EXAMPLE)
    assert abs(lu.probe_mean - expectation(rho, OPS.Bprime)) <= 3 * lu.probe_stderr


def test_apparatus_rejects_nondegenerate():
    obs = Observable.from_matrix("diag", np.diag([4.0, 3.0, 2.0, 1.0]))
    with pytest.raises(NonDiscriminable):
        discriminate_apparatus(lueders_apparatus(obs), EXAMPLE, 100, seed=0)


def test_apparatus_in_psi_basis_keeps_bprime():
    # dephasing in the {A', B', C} basis leaves <B'> intact: that box looks Lueders to this probe
    v = discriminate_apparatus(von_neumann_apparatus(OPS.C_in("psi")), EXAMPLE, 10000, seed=4)
    assert v.decision == "Lueders"
