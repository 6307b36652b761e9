"""Jacobi eigensolver and helpers, checked against LAPACK and algebraic identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contextsim import qlinalg as ql
from contextsim.errors import NotHermitian, NotOrthonormal

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_random_hermitian_reconstruction(rng):
    worst = 0.0
    for _ in range(1000):
        m = ql.random_hermitian(4, rng)
        pairs = ql.hermitian_eig(m)
        vals = np.array([lam for lam, _ in pairs])
        vecs = np.column_stack([v for _, v in pairs])
        worst = max(
            worst,
            ql.max_abs_diff(vecs @ np.diag(vals) @ ql.dagger(vecs), m),
            ql.max_abs_diff(ql.dagger(vecs) @ vecs, np.eye(4)),
            float(np.max(np.abs(np.sort(vals) - np.linalg.eigvalsh(m)))),
        )
        assert np.all(np.diff(vals) <= 0)
    assert worst <= 1e-12


@pytest.mark.parametrize("dim", [1, 2, 3, 4, 6])
def test_dimensions(dim, rng):
    m = ql.random_hermitian(dim, rng)
    vals = [lam for lam, _ in ql.hermitian_eig(m)]
    assert np.allclose(sorted(vals), np.linalg.eigvalsh(m), atol=1e-12)


def test_degenerate_spectrum_gives_orthonormal_vectors():
    m = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    u = np.linalg.qr(np.arange(16).reshape(4, 4) + 1j * np.eye(4))[0]
    pairs = ql.hermitian_eig(u @ m @ ql.dagger(u))
    assert [round(lam, 12) for lam, _ in pairs] == [1.0, 1.0, -1.0, -1.0]
    assert ql.check_orthonormal([v for _, v in pairs]) <= 1e-12


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        ql.hermitian_eig([[0, 1], [0, 0]])


def test_rejects_bad_shapes_and_nan():
    with pytest.raises(ValueError):
        ql.as_matrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ql.as_matrix([[np.nan, 0], [0, 1]])


def test_projector_and_orthonormal_check():
    e0, e1 = np.eye(2, dtype=complex)
    p = ql.projector_onto([e0])
    assert ql.max_abs_diff(p @ p, p) == 0.0
    with pytest.raises(NotOrthonormal):
        ql.projector_onto([e0, e0])
    with pytest.raises(ValueError):
        ql.projector_onto([])


def test_kron_identities(rng):
    for _ in range(100):
        a, b = ql.random_hermitian(2, rng), ql.random_hermitian(2, rng)
        c, d = ql.random_hermitian(2, rng), ql.random_hermitian(2, rng)
        ab = ql.tensor_product(a, b)
        assert np.isclose(np.trace(ab), np.trace(a) * np.trace(b), atol=1e-12)
        assert ql.max_abs_diff(ab @ ql.tensor_product(c, d), ql.tensor_product(a @ c, b @ d)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, (4, 4), elements=finite))
def test_eig_property(re, im):
    g = re + 1j * im
    m = 0.5 * (g + g.conj().T)
    pairs = ql.hermitian_eig(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    for lam, v in pairs:
        assert ql.max_abs_diff(m @ v, lam * v) <= 1e-11 * scale
        assert abs(np.linalg.norm(v) - 1) <= 1e-12
    assert abs(sum(lam for lam, _ in pairs) - np.trace(m).real) <= 1e-11 * scale


def test_random_density_is_a_state(rng):
    for rank in (1, 2, 4):
        rho = ql.random_density(4, rng, rank)
        vals = [lam for lam, _ in ql.hermitian_eig(rho)]
        assert abs(np.trace(rho) - 1) < 1e-12
        assert min(vals) > -1e-12
        assert sum(v > 1e-9 for v in vals) == rank
