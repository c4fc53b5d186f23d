"""Closed-form theory of a simple embedded eigenvalue.

The model (see ``operator_models.EmbeddedModel``) is a continuum base H^_s on
C^m plus one eigen-direction with eigenvalue lambda at coupling r_lambda, with
J = [[J^, psi], [psi*, alpha]].  Everything here is expressed through

    u_+-  = T^_{l+-i0}(H^_{r}) psi,   A^_+- = T^_{l+-i0}(H^_{r}) J^,
    a_{j,+-} = <psi, A^_+-^j u_+->.

The order of r_lambda is 1 when alpha != 0, otherwise 2 + (index of the
first nonzero a_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConstructionFailed, NotRegularizing, OrderMismatch, ValidationError
from .linalg_core import opnorm, range_basis
from .operator_models import (
    ContinuumModel,
    EmbeddedModel,
    FinitePencil,
    SpectralPoint,
    continuum_base_T,
    embedded_D,
    embedded_hat_T,
    is_regularizing,
)

#: relative size under which an a_j coefficient counts as zero
A_ZERO_TOL = 1e-9
#: constructors reject instances whose leading coefficient is below this
#: fraction of ||psi||^2
NONDEGENERACY = 0.1


# ---------------------------------------------------------------------------
# diagnostics

@dataclass
class EmbeddedDiagnostics:
    u_hat_plus: np.ndarray
    u_hat_minus: np.ndarray
    a_coeffs: dict              # {"+": [a_0, a_1, ...], "-": [...]}
    order_predicted: int
    D_function: Callable
    regularizing: bool
    A_hat_plus: np.ndarray = field(repr=False, default=None)
    A_hat_minus: np.ndarray = field(repr=False, default=None)


def _coeff_scale(psi, T, J, j):
    return max(np.linalg.norm(psi) ** 2, 1e-300) * max(1.0, opnorm(T)) ** (j + 1) * max(1.0, opnorm(J)) ** j


def a_coefficients(psi, T, J, j_max):
    """[<psi, (T J)^j T psi>] for j = 0..j_max, and the zero flags."""
    A = T @ J
    v = T @ psi
    out, zero = [], []
    for j in range(j_max + 1):
        a = complex(np.vdot(psi, v))
        out.append(a)
        zero.append(abs(a) <= A_ZERO_TOL * _coeff_scale(psi, T, J, j))
        v = A @ v
    return out, zero


def predicted_order(alpha: float, zero_flags: list) -> int:
    if alpha != 0:
        return 1
    for j, z in enumerate(zero_flags):
        if not z:
            return j + 2
    raise ValidationError("all computed a_j vanish: raise j_max or the direction is not regularizing")


def embedded_diagnostics(e: EmbeddedModel, j_max: Optional[int] = None) -> EmbeddedDiagnostics:
    reg = is_regularizing(e)
    if not reg:
        raise NotRegularizing("alpha = 0 and psi is orthogonal to u_{lambda+i0}(s)")
    Tp = embedded_hat_T(e, SpectralPoint.plus_i0(e.lam), e.r_lambda)
    Tm = embedded_hat_T(e, SpectralPoint.minus_i0(e.lam), e.r_lambda)
    Jh = e.J_hat
    if j_max is None:
        j_max = e.m + 3
    ap, zp = a_coefficients(e.psi, Tp, Jh, j_max)
    am, zm = a_coefficients(e.psi, Tm, Jh, j_max)
    order = predicted_order(e.alpha, zp)

    def D(z: SpectralPoint, s):
        return embedded_D(e, z, s)

    return EmbeddedDiagnostics(Tp @ e.psi, Tm @ e.psi, {"+": ap, "-": am}, order, D, reg,
                               Tp @ Jh, Tm @ Jh)


def generator_bases(e: EmbeddedModel, d: int, sign: str = "+"):
    """Generators of Upsilon^d and Psi at lambda +- i0 (columns), in order."""
    z = SpectralPoint.plus_i0(e.lam) if sign == "+" else SpectralPoint.minus_i0(e.lam)
    T = embedded_hat_T(e, z, e.r_lambda)
    A = T @ e.J_hat
    m = e.m
    ups = [np.r_[np.zeros(m), 1.0]]
    v = T @ e.psi
    chain = []
    for _ in range(d - 1):
        chain.append(v)
        ups.append(np.r_[v, 0.0])
        v = A @ v
    if d == 1:
        return np.column_stack(ups), (e.J @ ups[0]).reshape(-1, 1)
    psi_gen = [np.r_[e.psi, 0.0]]
    for k, w in enumerate(chain):
        last = k == len(chain) - 1
        psi_gen.append(np.r_[e.J_hat @ w, np.vdot(e.psi, w) if last else 0.0])
    return np.column_stack(ups), np.column_stack(psi_gen)


def subspace_distance(X: np.ndarray, Y: np.ndarray) -> float:
    """Sine of the largest principal angle between the column spans."""
    qx, qy = range_basis(X, 1e-10), range_basis(Y, 1e-10)
    if qx.shape[1] != qy.shape[1]:
        return 1.0
    return float(opnorm(qx - qy @ (qy.conj().T @ qx)))


# ---------------------------------------------------------------------------
# closed-form idempotents for orders 1, 2, 3

def _block(m, tl, bl, br=1.0):
    out = np.zeros((m + 1, m + 1), dtype=complex)
    out[:m, :m] = tl
    out[m, :m] = bl
    out[m, m] = br
    return out


def closed_form_idempotents(e: EmbeddedModel, d: int, diag: Optional[EmbeddedDiagnostics] = None):
    """(P_plus, P_minus, nilA_plus, nilA_minus) from the block formulas."""
    diag = embedded_diagnostics(e) if diag is None else diag
    if d not in (1, 2, 3):
        raise ValidationError("closed forms exist for d = 1, 2, 3")
    if diag.order_predicted != d:
        raise OrderMismatch(f"model has predicted order {diag.order_predicted}, not {d}")
    m = e.m
    psi = e.psi
    ph = psi.conj()
    if d == 1:
        P = _block(m, np.zeros((m, m)), ph / e.alpha)
        Z = np.zeros((m + 1, m + 1), dtype=complex)
        return P, P.copy(), Z, Z.copy()
    out = {}
    for sg, other in (("+", "-"), ("-", "+")):
        a = diag.a_coeffs[sg]
        u = diag.u_hat_plus if sg == "+" else diag.u_hat_minus
        A = diag.A_hat_plus if sg == "+" else diag.A_hat_minus
        # B^_{other} psi, with B^ = J^ T^; its adjoint row is psi^H A^_{sg}
        T_o = embedded_hat_T(e, SpectralPoint.plus_i0(e.lam) if other == "+" else SpectralPoint.minus_i0(e.lam),
                             e.r_lambda)
        Bpsi = e.J_hat @ T_o @ psi
        if d == 2:
            a0, a1 = a[0], a[1]
            tl = np.outer(u, ph) / a0
            bl = -(a1 / a0 ** 2) * ph + Bpsi.conj() / a0
            P = _block(m, tl, bl)
            nil = np.zeros((m + 1, m + 1), dtype=complex)
            nil[m, :m] = -ph / a0
        else:
            a1, a2, a3 = a[1], a[2], a[3]
            B2psi = e.J_hat @ T_o @ Bpsi
            tl = -(a2 / a1 ** 2) * np.outer(u, ph) + (np.outer(A @ u, ph) + np.outer(u, Bpsi.conj())) / a1
            bl = ((a2 ** 2 - a1 * a3) / a1 ** 3) * ph - (a2 / a1 ** 2) * Bpsi.conj() + B2psi.conj() / a1
            P = _block(m, tl, bl)
            nil = np.zeros((m + 1, m + 1), dtype=complex)
            nil[:m, :m] = -np.outer(u, ph) / a1
            nil[m, :m] = (a2 / a1 ** 2) * ph - Bpsi.conj() / a1
        out[sg] = (P, nil)
    return out["+"][0], out["-"][0], out["+"][1], out["-"][1]


# ---------------------------------------------------------------------------
# J^ = 0: the quadratic for the two nonzero eigenvalues of A_z(s)

@dataclass
class RankOneAnalysis:
    ys: list
    roots: list            # [(sigma_1, sigma_2)] per y
    group_roots: list      # roots that tend to 1/(s - r) at each y
    index: int
    n_plus: int
    n_minus: int
    slope: Optional[complex]
    slope_expected: Optional[complex]
    slope_ok: bool
    model_index: Optional[int] = None


def quadratic_roots(e: EmbeddedModel, z: SpectralPoint, s: float):
    """Roots of sigma^2 - sigma D (2 (r - s) w + alpha) - D w = 0, w = <psi, u_z(s)>."""
    if opnorm(e.J_hat) != 0:
        raise ValidationError("the quadratic needs J^ = 0")
    u = embedded_hat_T(e, z, s) @ e.psi
    w = complex(np.vdot(e.psi, u))
    D = embedded_D(e, z, s, u)
    b = -D * (2 * (e.r_lambda - s) * w + e.alpha)
    c = -D * w
    return tuple(np.roots([1.0, b, c]))


def rank_one_analysis(e: EmbeddedModel, ys=(1e-2, 1e-3, 1e-4), s: Optional[float] = None,
                      with_model: bool = False) -> RankOneAnalysis:
    """Group roots, index and the slope d sigma / d y of the J^ = 0 model."""
    if opnorm(e.J_hat) != 0:
        raise ValidationError("rank-one analysis needs J^ = 0")
    s = e.r_lambda + 1.0 if s is None else s
    target = 1.0 / (s - e.r_lambda)
    roots, groups = [], []
    for y in ys:
        rr = quadratic_roots(e, SpectralPoint.off_axis(e.lam, y), s)
        roots.append(rr)
    # group size from the boundary: roots equal to the target at y = 0
    r0 = quadratic_roots(e, SpectralPoint.plus_i0(e.lam), s)
    n_group = sum(1 for x in r0 if abs(x - target) < 1e-6 * max(1.0, abs(target)))
    if n_group == 0:
        raise ValidationError("1/(s - r) is not a root at the boundary")
    for rr in roots:
        groups.append(sorted(rr, key=lambda x: abs(x - target))[:n_group])
    last = groups[-1]
    n_plus = sum(1 for x in last if x.imag > 0)
    n_minus = sum(1 for x in last if x.imag < 0)
    slope = expected = None
    ok = True
    if e.alpha != 0:
        slope = complex((last[0] - target) / ys[-1])
        expected = 1j / e.alpha
        ok = abs(slope - expected) <= 0.05 * abs(expected)
    else:
        ok = n_plus == 1 and n_minus == 1
    rep = RankOneAnalysis(list(ys), roots, groups, n_plus - n_minus, n_plus, n_minus, slope, expected, ok)
    if with_model:
        from .index_flow import resonance_index
        rep.model_index = resonance_index(e, e.lam, e.r_lambda).ind_splitting
    return rep


# ---------------------------------------------------------------------------
# finite pencils of prescribed order

def _divided_difference_weights(x: np.ndarray) -> np.ndarray:
    """w_i = 1 / prod_{k != i}(x_i - x_k): sum w x^j = 0 for j < n-1, = 1 at j = n-1."""
    n = len(x)
    return np.array([1.0 / np.prod([x[i] - x[k] for k in range(n) if k != i]) for i in range(n)])


def construct_finite_example(lam: float, d: int, seed: int = 0, spectators: int = 2,
                             check: bool = True) -> FinitePencil:
    """Finite pencil (dimension d + 2) whose resonance point r = 0 at lambda has order d.

    Coupled coordinates: H^ = diag(h_i), V^ = diag(v_i), so T^ = diag(t_i) with
    t_i = 1/(h_i - lambda) and A^ = diag(x_i), x_i = t_i v_i.  Then
    a_j = sum psi_i^2 t_i x_i^j; choosing psi_i^2 t_i equal to divided-difference
    weights of distinct nodes x_i makes a_0 = ... = a_{n-2} = 0 and a_{n-1} = 1,
    i.e. order n + 1.  Spectator coordinates (psi = 0) keep their own resonance
    points at |r| >= 1/2.
    """
    if d not in (1, 2, 3, 4, 5):
        raise ValidationError("d must be in 1..5")
    rng = np.random.default_rng(seed)
    for _ in range(50):
        if d == 1:
            n_c = 1
            t = rng.uniform(0.5, 2.0, n_c) * rng.choice([-1, 1], n_c)
            psi = rng.uniform(0.5, 1.5, n_c)
            x = rng.uniform(-2, 2, n_c)
            alpha = float(rng.choice([-1.0, 1.0]))
        elif d == 2:
            n_c = 1
            t = rng.uniform(0.5, 2.0, n_c) * rng.choice([-1, 1], n_c)
            psi = rng.uniform(0.5, 1.5, n_c)
            x = rng.uniform(-2, 2, n_c)
            alpha = 0.0
            if abs(np.sum(psi ** 2 * t)) <= 0.1:
                continue
        else:
            n_c = d - 1
            # well separated nodes in [-2, 2]
            x = np.sort(rng.uniform(-2, 2, n_c))
            if n_c > 1 and np.min(np.diff(x)) < 0.5:
                continue
            w = _divided_difference_weights(x)
            mag = rng.uniform(0.5, 2.0, n_c)
            t = np.sign(w) * mag
            psi = np.sqrt(np.abs(w) / mag)
            alpha = 0.0
        if np.any(np.abs(x) < 1e-3):
            continue
        v = x / t
        h = lam + 1.0 / t
        # spectators: |x| <= 2 keeps their resonance points -1/x at |r| >= 1/2
        xs = rng.uniform(0.5, 2.0, spectators) * rng.choice([-1, 1], spectators)
        ts = rng.uniform(0.5, 2.0, spectators) * rng.choice([-1, 1], spectators)
        hs = lam + 1.0 / ts
        vs = xs / ts
        n = n_c + spectators + 1
        H0 = np.diag(np.r_[h, hs, lam]).astype(float)
        V = np.zeros((n, n))
        V[np.arange(n - 1), np.arange(n - 1)] = np.r_[v, vs]
        V[:n_c, -1] = psi
        V[-1, :n_c] = psi
        V[-1, -1] = alpha
        p = FinitePencil(H0, V)
        if not check:
            return p
        try:
            if measured_order(p, lam) == d:
                return p
        except Exception:
            continue
    raise ConstructionFailed(f"could not build an order-{d} example (seed {seed})")


def measured_order(p, lam: float, r: float = 0.0) -> int:
    from .resonance import point_structure
    from .operator_models import CouplingFamily
    z = SpectralPoint.plus_i0(lam)
    fam = CouplingFamily.at(p, z, avoid=[r])
    return point_structure(p, z, r, fam).order_d


def finite_a_coefficients(p: FinitePencil, lam: float, j_max: int = 6):
    """a_j for a finite pencil whose last coordinate is the eigen-direction at r = 0."""
    n = p.n
    Hh = p.H0[:n - 1, :n - 1]
    T = np.linalg.inv(Hh - lam * np.eye(n - 1))
    return a_coefficients(p.V[:n - 1, -1], T, p.V[:n - 1, :n - 1], j_max)


# ---------------------------------------------------------------------------
# continuum instances

def witness_base(lam: float = 0.0, c0=None) -> ContinuumModel:
    """Four-channel base: lambda inside [-1, 1] with density c0 (default e1 e1^T);
    two outside intervals make Re T^ indefinite on ker c0.  The fourth channel
    keeps an order-4 resonance space a proper subspace of the 5-dim model."""
    C0 = np.diag([1.0, 0.0, 0.0, 0.0]) if c0 is None else np.asarray(c0, dtype=float)
    C1 = np.diag([0.0, 1.0, 0.0, 0.0])
    C2 = np.diag([0.0, 0.0, 1.0, 0.0])
    C3 = np.diag([0.0, 0.0, 0.0, 1.0])
    ivs = [(-1.0, 1.0, C0), (2.0, 3.0, C1), (-3.0, -2.0, C2), (4.0, 5.0, C3)]
    if not -1.0 < lam < 1.0:
        raise ValidationError("lambda must lie in (-1, 1)")
    return ContinuumModel(ivs, np.zeros((4, 4)))


def _with_J(base: ContinuumModel, J) -> ContinuumModel:
    return ContinuumModel([(iv.a, iv.b, iv.C) for iv in base.intervals], J, base.s0)


def _re_T(base: ContinuumModel, lam: float) -> np.ndarray:
    T = continuum_base_T(base, SpectralPoint.plus_i0(lam))
    return 0.5 * (T + T.conj().T).real


def construct_embedded_example(d: int, seed: int = 0, lam: float = 0.0) -> EmbeddedModel:
    """Continuum embedded model with a real resonance point r = 0 of order d (1..4).

    d = 1: alpha != 0.  d = 2: alpha = 0, psi with Im <psi, u_+> > 0.
    d >= 3: psi in ker C0 (density at lambda) and isotropic for Re T^, so
    a_0 = 0 and u_+ = u_- = w = Re T^ psi; a_1 = <w, J^ w>.  d = 4 projects
    J^ so that <w, J^ w> = 0, leaving a_2 with imaginary part pi <J^w, C0 J^w>.
    """
    rng = np.random.default_rng(seed)
    base0 = witness_base(lam)
    m = base0.m
    for _ in range(50):
        G = rng.normal(size=(m, m))
        Jh = 0.5 * (G + G.T)
        if d == 1:
            psi = rng.normal(size=m)
            alpha = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))
        elif d == 2:
            psi = rng.normal(size=m)
            alpha = 0.0
        else:
            R = _re_T(base0, lam)
            # isotropic vector of R on span(e2, e3) inside ker C0: R is diagonal there
            r2, r3 = R[1, 1], R[2, 2]
            if r2 * r3 >= 0:
                raise ConstructionFailed("Re T^ is not indefinite on ker C0")
            c = rng.uniform(0.5, 2.0)
            psi = c * np.array([0.0, np.sqrt(abs(r3)), rng.choice([-1, 1]) * np.sqrt(abs(r2)), 0.0])
            alpha = 0.0
            w = R @ psi
            if d == 4:
                Jh = Jh - (w @ Jh @ w) / (w @ w) ** 2 * np.outer(w, w)
        e = EmbeddedModel(_with_J(base0, Jh), psi, alpha, lam, 0.0)
        try:
            dg = embedded_diagnostics(e)
        except NotRegularizing:
            continue
        if dg.order_predicted != d:
            continue
        # nondegeneracy: the first nonzero coefficient must not be small, which
        # keeps the Riesz idempotents well conditioned
        if d >= 2 and abs(dg.a_coeffs["+"][d - 2]) < NONDEGENERACY * np.linalg.norm(psi) ** 2:
            continue
        return e
    raise ConstructionFailed(f"could not build an embedded order-{d} example (seed {seed})")


def witness_property_S_fail(seed: int = 1, lam: float = 0.0) -> EmbeddedModel:
    """Order 2 with generic J^ != 0: property S fails."""
    return construct_embedded_example(2, seed, lam)


def witness_S_not_P(lam: float = 0.0) -> EmbeddedModel:
    """J^ = 0, alpha = 0, psi with C0 psi != 0: property S holds, P_+ != P_-."""
    base = witness_base(lam)
    return EmbeddedModel(base, np.array([1.0, 0.5, 0.0, 0.0]), 0.0, lam, 0.0)


def scalar_model(alpha: float, lam: float = 0.0) -> EmbeddedModel:
    """Scalar base on [-1, 1] with density 1, J^ = 0, psi = 1 (the J^ = 0 quadratic case)."""
    base = ContinuumModel([(-1.0, 1.0, np.eye(1))], np.zeros((1, 1)))
    return EmbeddedModel(base, np.ones(1), alpha, lam, 0.0)
