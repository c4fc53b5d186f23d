import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.embedded import construct_embedded_example, witness_base
from artifact.errors import (EndpointSingularity, NotRegularizing, ResonantCoupling,
                             SingularResolvent, ValidationError)
from artifact.linalg_core import opnorm
from artifact.operator_models import (ContinuumModel, CouplingFamily, EmbeddedModel, FinitePencil,
                                      SpectralPoint, continuum_base_T, embed_eigenvalue,
                                      embedded_T, embedded_T_via_identity, im_T, model_T, op_A)
from artifact.suite import random_pencil

seeds = st.integers(0, 2**32 - 1)


def random_continuum(rng, m=None):
    m = int(rng.integers(1, 4)) if m is None else m
    edges = np.sort(rng.uniform(-4, 4, 4))
    ivs = []
    for a, b in ((edges[0], edges[1]), (edges[2], edges[3])):
        G = rng.normal(size=(m, m))
        ivs.append((float(a), float(b), G @ G.T / m))
    G = rng.normal(size=(m, m))
    return ContinuumModel(ivs, 0.5 * (G + G.T))


def random_model(seed):
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        return random_pencil(rng, 2, 6)[0], rng
    if kind == 1:
        return random_continuum(rng), rng
    return construct_embedded_example(int(rng.integers(1, 4)), int(rng.integers(0, 50))), rng


def random_z(rng):
    return SpectralPoint.off_axis(float(rng.normal()), float(rng.choice([-1, 1]) * 10 ** rng.uniform(-1, 0.5)))


@given(seeds)
def test_second_resolvent_identity(seed):
    m, rng = random_model(seed)
    z = random_z(rng)
    r, s = rng.normal(size=2)
    Ar, _ = op_A(m, z, r)
    As, _ = op_A(m, z, s)
    scale = max(1.0, opnorm(Ar), opnorm(As)) ** 2
    assert opnorm(Ar - As - (s - r) * Ar @ As) <= 1e-9 * scale


@given(seeds)
def test_adjoint_symmetry(seed):
    m, rng = random_model(seed)
    z = random_z(rng)
    s = float(rng.normal())
    T = model_T(m, z, s)
    assert opnorm(model_T(m, z.conj(), s) - T.conj().T) <= 1e-10 * max(1.0, opnorm(T))


@given(seeds)
def test_boundary_positivity(seed):
    rng = np.random.default_rng(seed)
    m = random_continuum(rng)
    lam = float(rng.uniform(-4, 4))
    try:
        T = model_T(m, SpectralPoint.plus_i0(lam), float(rng.normal()))
    except (EndpointSingularity, ResonantCoupling, SingularResolvent):
        return
    w = np.linalg.eigvalsh((T - T.conj().T) / 2j)
    assert w.min() >= -1e-8 * max(1.0, opnorm(T))


@given(seeds)
def test_sign_definite_eigenvalues_upper(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Y = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    p = FinitePencil(0.5 * (X + X.conj().T), Y @ Y.conj().T)
    A, _ = op_A(p, SpectralPoint.off_axis(float(rng.normal()), 0.5), float(rng.normal()))
    w = np.linalg.eigvals(A)
    big = np.abs(w) > 1e-8 * max(1.0, opnorm(A))
    assert np.all(w[big].imag > 0)


@given(seeds, st.integers(2, 4))
def test_product_identity(seed, k):
    m, rng = random_model(seed)
    z = random_z(rng)
    fam = CouplingFamily.at(m, z)
    r = complex(rng.normal(), rng.normal())
    s = rng.normal(size=k) + np.arange(k)  # distinct couplings
    eye = np.eye(fam.n)
    factors = [eye + (r - t) * fam.A_at([t])[0] for t in s]
    lhs = eye.astype(complex)
    for f in factors:
        lhs = lhs @ f
    rhs = sum((t - r) ** (k - 1) * f / np.prod([t - u for u in s if u != t]) for t, f in zip(s, factors))
    assert opnorm(lhs - rhs) <= 1e-8 * max(1.0, opnorm(lhs))


@given(seeds)
def test_family_matches_model(seed):
    m, rng = random_model(seed)
    z = random_z(rng)
    fam = CouplingFamily.at(m, z)
    s2 = float(rng.normal())
    ref = model_T(m, z, s2) @ m.J
    assert opnorm(fam.A_at([s2])[0] - ref) <= 1e-9 * max(1.0, opnorm(ref))


def test_continuum_imaginary_part():
    m = witness_base(0.0)
    T = continuum_base_T(m, SpectralPoint.plus_i0(0.3))
    Tm = continuum_base_T(m, SpectralPoint.minus_i0(0.3))
    assert np.allclose(T.imag, np.pi * np.diag([1.0, 0, 0, 0]), atol=1e-14)
    assert np.allclose(Tm, T.conj())
    gap = continuum_base_T(m, SpectralPoint.plus_i0(1.5))
    assert np.allclose(gap.imag, 0.0, atol=1e-14)


def test_continuum_off_axis_converges_to_boundary():
    m = witness_base(0.0)
    T0 = continuum_base_T(m, SpectralPoint.plus_i0(0.2))
    Ty = continuum_base_T(m, SpectralPoint.off_axis(0.2, 1e-9))
    assert opnorm(T0 - Ty) < 1e-7


@given(seeds)
def test_embedded_block_formula(seed):
    rng = np.random.default_rng(seed)
    e = construct_embedded_example(int(rng.integers(1, 5)), int(rng.integers(0, 20)))
    for _ in range(20):
        z = random_z(rng)
        s = float(rng.normal())
        a, b = embedded_T(e, z, s), embedded_T_via_identity(e, z, s)
        assert opnorm(a - b) <= 1e-9 * max(1.0, opnorm(b))


def test_spectral_point_rules():
    with pytest.raises(ValidationError):
        SpectralPoint.off_axis(0.0, 0.0)
    p = SpectralPoint.plus_i0(1.0)
    assert p.conj() == SpectralPoint.minus_i0(1.0)
    z = SpectralPoint.off_axis(1.0, 0.5)
    assert z.conj().value == np.conj(z.value)


def test_finite_pencil_rigging():
    rng = np.random.default_rng(0)
    H0 = np.diag([1.0, 2.0, 3.0])
    V = np.array([[1.0, 0.5, 0], [0.5, -1.0, 0.2], [0, 0.2, 0.3]])
    F = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
    p = FinitePencil(H0, V, F=F)
    assert np.allclose(F.conj().T @ p.J @ F, V)
    with pytest.raises(ValidationError):
        FinitePencil(H0, V, F=np.diag([1.0, 1.0, 1e-12]))
    with pytest.raises(ValidationError):
        FinitePencil(H0, np.array([[0, 1.0, 0], [0, 0, 0], [0, 0, 0]]))


def test_finite_boundary_at_eigenvalue_raises():
    p = FinitePencil(np.diag([0.0, 1.0]), np.eye(2))
    with pytest.raises(SingularResolvent):
        model_T(p, SpectralPoint.plus_i0(0.0), 0.0)
    T = model_T(p, SpectralPoint.plus_i0(0.5), 0.0)
    assert np.allclose(T, np.diag([1 / -0.5, 1 / 0.5]))


def test_embedded_requires_interior_lambda():
    base = witness_base(0.0)
    with pytest.raises(ValidationError):
        EmbeddedModel(base, np.ones(base.m), 0.0, 1.5, 0.0)
    with pytest.raises(ValidationError):
        EmbeddedModel(base, np.ones(base.m + 1), 0.0, 0.0, 0.0)


def test_not_regularizing_detected():
    base = witness_base(0.0)
    # psi orthogonal to the range of Im T^ and with zero real part: alpha = 0 fails
    zero_base = ContinuumModel([(iv.a, iv.b, iv.C) for iv in base.intervals], np.zeros((base.m, base.m)))
    with pytest.raises(NotRegularizing):
        embed_eigenvalue(zero_base, np.zeros(base.m), 0.0, 0.0, 0.0)


def test_im_T_boundary_embedded_positive():
    e = construct_embedded_example(2, 0)
    w = np.linalg.eigvalsh(im_T(e, SpectralPoint.plus_i0(e.lam), 0.7))
    assert w.min() > -1e-10
