"""Operator algebra of the Mermin square and the five context operators."""

import numpy as np
import pytest

from contextsim import qlinalg as ql
from contextsim.observables import (
    I4,
    PHI_BASIS,
    PSI_BASIS,
    Observable,
    build_context_operators,
    build_mermin_square,
    pauli,
    row_column_context,
    verify_algebra,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture(scope="module")
def ops():
    return build_context_operators()


def test_pauli_algebra():
    sx, sy, sz = (pauli(a).matrix for a in "xyz")
    assert ql.max_abs_diff(sx @ sy, 1j * sz) == 0.0
    for s in (sx, sy, sz):
        assert ql.max_abs_diff(s @ s, np.eye(2)) == 0.0


def test_operators_are_hand_built_products(ops):
    # particle 1 is the left Kronecker factor
    assert ql.max_abs_diff(ops.A.matrix, np.kron(X, np.eye(2))) == 0
    assert ql.max_abs_diff(ops.B.matrix, np.kron(np.eye(2), Y)) == 0
    assert ql.max_abs_diff(ops.C.matrix, np.kron(X, Y)) == 0
    assert ql.max_abs_diff(ops.Aprime.matrix, np.kron(Y, X)) == 0
    assert ql.max_abs_diff(ops.Bprime.matrix, np.kron(Z, Z)) == 0


def test_square_and_context_verify(ops):
    sq = verify_algebra(build_mermin_square())
    cx = verify_algebra(ops)
    assert sq.passed and cx.passed
    assert len(sq.checks) == 12
    assert all(c.residual <= 1e-12 for c in sq.checks)
    names = [c.name for c in cx.checks]
    assert "C_degenerate(+1x2,-1x2)" in names


def test_negated_entry_fails():
    rep = verify_algebra(build_mermin_square().negate(0, 0))
    failed = {c.name for c in rep.failures()}
    assert failed == {"row0_product=+I", "col0_product=+I"}


@pytest.mark.parametrize("r", range(3))
@pytest.mark.parametrize("c", range(3))
def test_row_column_contexts(r, c):
    # the third column multiplies to -I, so only there does C = AB fail
    rep = verify_algebra(row_column_context(build_mermin_square(), r, c))
    if c == 2:
        assert {x.name for x in rep.failures()} == {"C=AB"}
    else:
        assert rep.passed


def test_phi_basis_joint_eigenvectors(ops):
    expected = {0: (1, 1, 1), 1: (1, -1, -1), 2: (-1, 1, -1), 3: (-1, -1, 1)}
    for i, v in enumerate(PHI_BASIS):
        for o, lam in zip((ops.A, ops.B, ops.C), expected[i]):
            assert ql.max_abs_diff(o.matrix @ v, lam * v) <= 1e-15


def test_psi_basis_joint_eigenvectors(ops):
    for v in PSI_BASIS:
        for o in (ops.Aprime, ops.Bprime, ops.C):
            lam = np.vdot(v, o.matrix @ v)
            assert abs(abs(lam) - 1) <= 1e-15
            assert ql.max_abs_diff(o.matrix @ v, lam * v) <= 1e-15


def test_c_plus_one_eigenspace_is_phi1_phi4(ops):
    plus = [c for c in ops.C.spectrum if c.eigenvalue == 1.0][0]
    assert plus.rank == 2
    assert ql.max_abs_diff(plus.projector, ql.projector_onto([PHI_BASIS[0], PHI_BASIS[3]])) <= 1e-15


def test_spectral_decomposition_sums(ops):
    for o in ops.by_label().values():
        assert ql.max_abs_diff(sum(c.projector for c in o.spectrum), I4) <= 1e-12
        assert ql.max_abs_diff(sum(c.eigenvalue * c.projector for c in o.spectrum), o.matrix) <= 1e-12


def test_c_in_psi_basis(ops):
    c_psi = ops.C_in("psi")
    assert ql.max_abs_diff(c_psi.matrix, ops.C.matrix) == 0
    assert ql.max_abs_diff(np.array(c_psi.eigenbasis), np.array(PSI_BASIS)) == 0
    with pytest.raises(ValueError):
        ops.C_in("chi")


def test_bad_eigenbasis_rejected():
    with pytest.raises(ValueError):
        Observable.from_matrix("x", X, [np.array([1, 0]), np.array([0, 1])])


def test_nondegenerate_flag():
    assert not pauli("z").is_degenerate
    assert build_context_operators().C.is_degenerate
