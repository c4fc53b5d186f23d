import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.boundary import (boundary_data, c_coefficients, classify_point, depth_and_L,
                               depth_of, jordan_chains, pp_spectrum, property_M, type_I_space)
from artifact.embedded import (construct_embedded_example, witness_property_S_fail, witness_S_not_P)
from artifact.errors import VectorNotInSpace
from artifact.index_flow import real_resonance_points
from artifact.linalg_core import opnorm, range_basis
from artifact.reporting import triple_crossing_pencil, four_level_pencil
from artifact.suite import random_pencil

seeds = st.integers(0, 2**32 - 1)

EMBEDDED = [(d, s) for d in (1, 2, 3, 4) for s in range(3)]


@pytest.fixture(scope="module")
def embedded_cases():
    out = {}
    for d, s in EMBEDDED:
        e = construct_embedded_example(d, s)
        bd = boundary_data(e, e.lam, e.r_lambda)
        out[(d, s)] = (e, bd, classify_point(e, e.lam, e.r_lambda, bd))
    return out


def check_common(bc):
    # type I => P => S
    if bc.type_I_point:
        assert bc.property_P
    if bc.property_P:
        assert bc.property_S
    assert bc.pp_spectrum_ok
    assert bc.diagnostics["property_M_min_singular"] > 1e-8
    assert bc.diagnostics["sqrtImT_JP_sqrtImT"] <= 1e-7
    # the Im T J P = 0 form agrees with the square-root form
    assert (bc.diagnostics["imT_JP"] < 1e-6) == bc.type_I_point or bc.indeterminate
    assert bc.diagnostics["clLw_orthogonality"] <= 1e-7
    assert bc.diagnostics["type_I_criterion5_residual"] <= 1e-6
    if bc.property_S:
        assert max(bc.diagnostics["property_S_items"].values()) <= 1e-7


@pytest.mark.parametrize("key", EMBEDDED)
def test_embedded_classification(embedded_cases, key):
    e, bd, bc = embedded_cases[key]
    d = key[0]
    check_common(bc)
    assert bc.order_d == d
    if d == 1:
        assert bc.type_I_point
    if d in (2, 3):
        assert not bc.property_S
    if d >= 2:
        # the eigen-direction e_last is the only order-1 vector and it is of type I
        assert bc.dim_type_I_space >= 1


@given(seeds)
def test_finite_points_are_type_I(seed):
    rng = np.random.default_rng(seed)
    p, lam = random_pencil(rng, 2, 6, -2.0, 2.0)
    for r, _ in real_resonance_points(p, lam, -2.0, 2.0):
        bc = classify_point(p, lam, r)
        check_common(bc)
        assert bc.type_I_point and bc.property_P and bc.dim_type_I_space == bc.N


def test_witnesses():
    a = classify_point(witness_property_S_fail(), 0.0, 0.0)
    assert not a.property_S and not a.property_P
    b = classify_point(witness_S_not_P(), 0.0, 0.0)
    assert b.property_S and not b.property_P and not b.type_I_point
    check_common(b)


@pytest.mark.parametrize("key", EMBEDDED)
def test_type_I_space_structure(embedded_cases, key):
    e, bd, _ = embedded_cases[key]
    t1 = type_I_space(e, e.lam, e.r_lambda, bd)
    B = t1.basis
    U1 = bd.rec_plus.upsilon(1)
    proj = B @ B.conj().T if B.shape[1] else np.zeros((e.dim, e.dim))
    # all order-1 vectors are of type I
    assert opnorm(U1 - proj @ U1) <= 1e-6
    # nilA maps type-I vectors to type-I vectors
    if B.shape[1]:
        X = bd.rec_plus.nilA @ B
        assert opnorm(X - proj @ X) <= 1e-6 * max(1.0, opnorm(bd.rec_plus.nilA))


@pytest.mark.parametrize("key", [k for k in EMBEDDED if k[0] >= 2])
def test_c_coefficients(embedded_cases, key):
    e, bd, _ = embedded_cases[key]
    rng = np.random.default_rng(sum(key))
    U = range_basis(bd.P_plus, 1e-9)
    for _ in range(3):
        u = U @ (rng.normal(size=U.shape[1]) + 1j * rng.normal(size=U.shape[1]))
        cc = c_coefficients(e, e.lam, e.r_lambda, u, "+", bd)
        c = np.asarray(cc.c)
        assert cc.fit_residual < 1e-6 and cc.agreement < 1e-6
        big = [j + 2 for j, x in enumerate(c) if abs(x) > 1e-8 * max(1.0, np.abs(c).max())]
        if big:
            assert big[-1] % 2 == 0
            assert c[big[-1] - 2] > 0
        assert c[0] >= -1e-10


def test_c_coefficients_order_one_vector(embedded_cases):
    e, bd, _ = embedded_cases[(2, 0)]
    u = bd.rec_plus.upsilon(1)[:, 0]
    cc = c_coefficients(e, e.lam, e.r_lambda, u, "+", bd)
    assert np.allclose(cc.c, 0.0, atol=1e-9)


def test_c_coefficients_rejects_foreign_vector(embedded_cases):
    e, bd, _ = embedded_cases[(2, 0)]
    P = bd.P_plus
    K = np.eye(e.dim) - P
    v = K[:, int(np.argmax(np.linalg.norm(K, axis=0)))]
    with pytest.raises(VectorNotInSpace):
        c_coefficients(e, e.lam, e.r_lambda, v, "+", bd)


def test_pp_spectrum_rule():
    P = np.diag([1.0, 0.0])
    assert pp_spectrum(P, P, 1)[0]
    assert not pp_spectrum(P, P, 2)[0]
    Q = np.array([[1.0, 0.0], [0.5, 0.0]])  # another idempotent with the same kernel
    assert pp_spectrum(P, Q, 1)[0]


def test_jordan_chains_and_depth():
    K = np.zeros((3, 3))
    K[0, 1] = K[1, 2] = 1.0
    chains = jordan_chains(K)
    assert [len(c) for c in chains] == [3]
    e1 = np.array([1.0, 0, 0])
    e3 = np.array([0, 0, 1.0])
    assert depth_of(e1, K, 3) == 2 and depth_of(e3, K, 3) == 0


def test_triple_crossing_depth_table():
    p = triple_crossing_pencil(0.5)
    dep = depth_and_L(p, 0.0, 0.0)
    assert sorted(dep.depth_table) == [(1, 2), (2, 1), (3, 0)]
    assert dep.clLw.shape[1] == 1 and dep.orthogonality_residual <= 1e-10


def test_four_level_type_I():
    for which in ("v2", "v3"):
        bc = classify_point(four_level_pencil(which), 0.0, 0.0)
        assert bc.type_I_point and bc.dim_type_I_space == bc.N
        assert property_M(boundary_data(four_level_pencil(which), 0.0, 0.0)) > 1e-8
