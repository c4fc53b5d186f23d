"""Operator models and the sandwiched resolvent.

Three model classes share one interface: ``model_T(m, z, s)`` returns
T_z(H_s) = F (H_s - z)^{-1} F* on the auxiliary space, for off-axis z or for
a boundary point lambda +/- i0 when the model has a closed-form limit there.

* ``FinitePencil``: Hermitian H0, V = F* J F on C^n.
* ``ContinuumModel``: multiplication operator whose sandwiched resolvent is a
  sum of log kernels C_j log((b_j - z)/(a_j - z)), coupled through J.
* ``EmbeddedModel``: a continuum model plus one eigen-direction with
  eigenvalue lambda at coupling r_lambda, evaluated by the 2x2 block formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    EndpointSingularity,
    NotRegularizing,
    NumericalFailure,
    ResonantCoupling,
    SingularResolvent,
    ValidationError,
)
from .linalg_core import as_cmatrix, as_hermitian, opnorm
from .tolerances import tolerances

#: default coupling probes tried in order when a non-resonant s is needed
PROBES = (0.0, 1.0, -1.0, 0.5, math.pi / 10)
#: extra deterministic probes used only if all default probes fail
EXTRA_PROBES = (0.3, -0.7, 0.8, -0.45, 1.7, -1.3, 2.5, 0.15)


@dataclass(frozen=True)
class SpectralPoint:
    """A point z = lam + i y off the axis, or a boundary point lam +/- i0."""

    lam: float
    y: float = 0.0
    side: str = "off"  # "off", "plus" or "minus"

    def __post_init__(self):
        if self.side not in ("off", "plus", "minus"):
            raise ValidationError(f"unknown side {self.side!r}")
        if self.side == "off" and self.y == 0:
            raise ValidationError("off-axis point needs y != 0")
        if self.side != "off" and self.y != 0:
            raise ValidationError("boundary point needs y = 0")

    @classmethod
    def off_axis(cls, lam, y):
        return cls(float(lam), float(y), "off")

    @classmethod
    def plus_i0(cls, lam):
        return cls(float(lam), 0.0, "plus")

    @classmethod
    def minus_i0(cls, lam):
        return cls(float(lam), 0.0, "minus")

    @classmethod
    def from_complex(cls, z):
        z = complex(z)
        return cls.off_axis(z.real, z.imag)

    @property
    def value(self) -> complex:
        return complex(self.lam, self.y)

    @property
    def is_boundary(self) -> bool:
        return self.side != "off"

    @property
    def upper(self) -> bool:
        return self.side == "plus" or (self.side == "off" and self.y > 0)

    def conj(self) -> "SpectralPoint":
        flip = {"off": "off", "plus": "minus", "minus": "plus"}[self.side]
        return SpectralPoint(self.lam, -self.y if self.y else 0.0, flip)

    def __str__(self):
        if self.side == "plus":
            return f"{self.lam}+i0"
        if self.side == "minus":
            return f"{self.lam}-i0"
        return f"{self.lam}{self.y:+}i"


def _check_factor(mat, what="coupling factor"):
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > tolerances().cond_cap:
        raise ResonantCoupling(f"{what} is singular (cond {cond:.2e})")


# ---------------------------------------------------------------------------
# finite pencils

class FinitePencil:
    """H_s = H0 + s V on C^n with V = F* J F."""

    kind = "finite"

    def __init__(self, H0, V=None, *, F=None, J=None):
        self.H0 = as_hermitian(H0)
        n = self.H0.shape[0]
        self.F = np.eye(n, dtype=complex) if F is None else as_cmatrix(F, square=True)
        if self.F.shape != (n, n):
            raise ValidationError("F must be n x n")
        if np.linalg.cond(self.F) > tolerances().cond_cap:
            raise ValidationError("F is not numerically invertible")
        if J is None and V is None:
            raise ValidationError("need V or J")
        if J is None:
            self.V = as_hermitian(V)
            Finv = np.linalg.inv(self.F)
            self.J = as_hermitian(Finv.conj().T @ self.V @ Finv, tol=1e-8)
        else:
            self.J = as_hermitian(J)
            v = self.F.conj().T @ self.J @ self.F
            self.V = 0.5 * (v + v.conj().T)
            if V is not None and opnorm(as_hermitian(V) - self.V) > 1e-8 * max(1, opnorm(self.V)):
                raise ValidationError("V does not match F* J F")
        if self.V.shape != (n, n):
            raise ValidationError("V must be n x n")

    @property
    def n(self) -> int:
        return self.H0.shape[0]

    @property
    def dim(self) -> int:
        return self.n

    def H(self, s) -> np.ndarray:
        return self.H0 + s * self.V

    def __repr__(self):
        return f"FinitePencil(n={self.n})"


def finite_T(p: FinitePencil, z: SpectralPoint, s) -> np.ndarray:
    """F (H_s - z)^{-1} F*; at lambda +/- i0 the real-axis resolvent."""
    n = p.n
    mat = p.H(s) - z.value * np.eye(n)
    if z.is_boundary:
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > tolerances().cond_cap:
            raise SingularResolvent(f"lambda={z.lam} is an eigenvalue of H_s (s={s})")
    try:
        res = np.linalg.solve(mat, p.F.conj().T)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return p.F @ res


# ---------------------------------------------------------------------------
# continuum model

@dataclass(frozen=True)
class Interval:
    a: float
    b: float
    C: np.ndarray


def log_kernel(z: SpectralPoint, a: float, b: float) -> complex:
    """L(z) = log((b - z)/(a - z)), with the boundary branch rule on the axis."""
    if z.is_boundary:
        lam = z.lam
        if lam == a or lam == b:
            raise EndpointSingularity(f"lambda={lam} is an interval endpoint")
        if a < lam < b:
            sgn = 1.0 if z.side == "plus" else -1.0
            return complex(math.log((b - lam) / (lam - a)), sgn * math.pi)
        return complex(math.log(abs((b - lam) / (a - lam))), 0.0)
    zz = z.value
    return complex(np.log((b - zz) / (a - zz)))


class ContinuumModel:
    """Sandwiched resolvent T0(z) = sum_j C_j log((b_j - z)/(a_j - z)), coupled via J."""

    kind = "continuum"

    def __init__(self, intervals: Sequence, J, s0: float = 0.0):
        ivs = []
        for item in intervals:
            if isinstance(item, Interval):
                a, b, C = item.a, item.b, item.C
            else:
                a, b, C = item
            a, b = float(a), float(b)
            if not a < b:
                raise ValidationError(f"interval needs a < b, got [{a}, {b}]")
            C = as_hermitian(C)
            ev = np.linalg.eigvalsh(C)
            if ev[0] < -tolerances().psd_tol * max(1.0, abs(ev[-1])):
                raise ValidationError("interval density C is not PSD")
            ivs.append(Interval(a, b, C))
        ivs.sort(key=lambda iv: iv.a)
        for left, right in zip(ivs, ivs[1:]):
            if right.a < left.b:
                raise ValidationError("intervals overlap")
        if not ivs:
            raise ValidationError("need at least one interval")
        self.intervals = tuple(ivs)
        self.J = as_hermitian(J)
        self.s0 = float(s0)
        m = self.J.shape[0]
        if any(iv.C.shape != (m, m) for iv in ivs):
            raise ValidationError("C_j and J must share the auxiliary dimension")

    @property
    def m(self) -> int:
        return self.J.shape[0]

    @property
    def dim(self) -> int:
        return self.m

    def essential_spectrum(self):
        return [(iv.a, iv.b) for iv in self.intervals]

    def inside(self, lam: float) -> bool:
        return any(iv.a < lam < iv.b for iv in self.intervals)

    def __repr__(self):
        return f"ContinuumModel(m={self.m}, intervals={len(self.intervals)})"


def continuum_base_T(c: ContinuumModel, z: SpectralPoint) -> np.ndarray:
    """T0(z) = sum_j C_j L(z; a_j, b_j)."""
    out = np.zeros((c.m, c.m), dtype=complex)
    for iv in c.intervals:
        out += iv.C * log_kernel(z, iv.a, iv.b)
    return out


def coupled_T(T0: np.ndarray, J: np.ndarray, ds) -> np.ndarray:
    """(1 + ds T0 J)^{-1} T0, the sandwiched second resolvent identity."""
    if ds == 0:
        return T0.copy()
    fac = np.eye(T0.shape[0]) + ds * (T0 @ J)
    _check_factor(fac)
    return np.linalg.solve(fac, T0)


# ---------------------------------------------------------------------------
# embedded eigenvalue model

class EmbeddedModel:
    """Continuum base plus a one-dimensional eigen-direction.

    At coupling r_lambda the operator is diag(H^_{r_lambda}, lambda); the
    auxiliary space is C^m + C with J = [[J^, psi], [psi*, alpha]].
    """

    kind = "embedded"

    def __init__(self, base: ContinuumModel, psi_hat, alpha: float, lam: float, r_lambda: float):
        self.base = base
        self.psi = np.asarray(psi_hat, dtype=complex).reshape(-1)
        if self.psi.shape[0] != base.m:
            raise ValidationError("psi_hat length must equal the base auxiliary dimension")
        self.alpha = float(alpha)
        self.lam = float(lam)
        self.r_lambda = float(r_lambda)
        if not base.inside(self.lam):
            raise ValidationError("lambda must lie in the interior of a base interval")
        m = base.m
        J = np.zeros((m + 1, m + 1), dtype=complex)
        J[:m, :m] = base.J
        J[:m, m] = self.psi
        J[m, :m] = self.psi.conj()
        J[m, m] = self.alpha
        self.J = J

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def dim(self) -> int:
        return self.base.m + 1

    @property
    def J_hat(self) -> np.ndarray:
        return self.base.J

    def __repr__(self):
        return f"EmbeddedModel(m={self.m}, alpha={self.alpha}, r_lambda={self.r_lambda})"


def embedded_hat_T(e: EmbeddedModel, z: SpectralPoint, s) -> np.ndarray:
    """T_z(H^_s) of the base, coupled from r_lambda."""
    return coupled_T(continuum_base_T(e.base, z), e.base.J, s - e.r_lambda)


def embedded_D(e: EmbeddedModel, z: SpectralPoint, s, u=None) -> complex:
    """D_z(s) = (lambda - z + (s - r) alpha - (s - r)^2 <psi, u_z(s)>)^{-1}."""
    if u is None:
        u = embedded_hat_T(e, z, s) @ e.psi
    ds = s - e.r_lambda
    shift = 0.0 if z.is_boundary else (e.lam - z.value)
    den = shift + ds * e.alpha - ds * ds * np.vdot(e.psi, u)
    scale = max(1.0, abs(ds) * abs(e.alpha), abs(ds) ** 2 * np.linalg.norm(e.psi) * np.linalg.norm(u))
    if abs(den) <= scale / tolerances().cond_cap:
        raise ResonantCoupling(f"D_z(s) singular at s={s}")
    return 1.0 / den


def embedded_T(e: EmbeddedModel, z: SpectralPoint, s) -> np.ndarray:
    """Block formula for T_z(H_s) of the embedded model."""
    That = embedded_hat_T(e, z, s)
    That_c = embedded_hat_T(e, z.conj(), np.conj(s))
    u = That @ e.psi            # u_z(s)
    u_c = That_c @ e.psi        # u_{conj z}(conj s)
    D = embedded_D(e, z, s, u)
    ds = s - e.r_lambda
    m = e.m
    out = np.empty((m + 1, m + 1), dtype=complex)
    out[:m, :m] = That + ds * ds * D * np.outer(u, u_c.conj())
    out[:m, m] = -ds * D * u
    out[m, :m] = -ds * D * u_c.conj()
    out[m, m] = D
    return out


def embedded_T_via_identity(e: EmbeddedModel, z: SpectralPoint, s) -> np.ndarray:
    """Off-axis cross-check: couple diag(T0(z), 1/(lambda - z)) from r_lambda."""
    if z.is_boundary:
        raise ValidationError("the identity route needs an off-axis point")
    m = e.m
    T = np.zeros((m + 1, m + 1), dtype=complex)
    T[:m, :m] = continuum_base_T(e.base, z)
    T[m, m] = 1.0 / (e.lam - z.value)
    return coupled_T(T, e.J, s - e.r_lambda)


def embed_eigenvalue(base: ContinuumModel, psi_hat, alpha, lam, r_lambda,
                     check_regular: bool = True) -> EmbeddedModel:
    """Build an embedded model, checking the regularizing condition."""
    e = EmbeddedModel(base, psi_hat, alpha, lam, r_lambda)
    for iv in base.intervals:
        if lam in (iv.a, iv.b):
            raise EndpointSingularity(f"lambda={lam} is an interval endpoint")
    if check_regular and not is_regularizing(e):
        raise NotRegularizing("alpha = 0 and <psi, u_{lambda+i0}(s)> = 0 at the probes")
    return e


def is_regularizing(e: EmbeddedModel) -> bool:
    """alpha != 0, or <psi, u_{lambda+i0}(s)> != 0 at some probe s."""
    if e.alpha != 0:
        return True
    zp = SpectralPoint.plus_i0(e.lam)
    scale = max(1.0, np.linalg.norm(e.psi) ** 2)
    for s in PROBES + EXTRA_PROBES:
        s = e.r_lambda + 1.0 + s  # keep away from r_lambda itself
        try:
            u = embedded_hat_T(e, zp, s) @ e.psi
        except ResonantCoupling:
            continue
        if abs(np.vdot(e.psi, u)) > 1e-10 * scale * max(1.0, opnorm(embedded_hat_T(e, zp, s))):
            return True
    return False


# ---------------------------------------------------------------------------
# dispatch

OperatorModel = Union[FinitePencil, ContinuumModel, EmbeddedModel]


def model_T(m: OperatorModel, z: SpectralPoint, s) -> np.ndarray:
    """T_z(H_s) for any model."""
    if isinstance(m, FinitePencil):
        return finite_T(m, z, s)
    if isinstance(m, ContinuumModel):
        return coupled_T(continuum_base_T(m, z), m.J, s - m.s0)
    if isinstance(m, EmbeddedModel):
        return embedded_T(m, z, s)
    raise TypeError(f"unknown model type {type(m).__name__}")


def op_A(m: OperatorModel, z: SpectralPoint, s):
    """(A_z(s), B_z(s)) = (T J, J T)."""
    T = model_T(m, z, s)
    return T @ m.J, m.J @ T


def im_T(m: OperatorModel, z: SpectralPoint, s) -> np.ndarray:
    """Im T = (T - T*)/(2i) at a real coupling s."""
    T = model_T(m, z, s)
    return (T - T.conj().T) / 2j


def probe_coupling(m: OperatorModel, z: SpectralPoint, avoid: Sequence[complex] = (),
                   min_gap: float = 0.05):
    """First probe s with a well-conditioned resolvent factor.

    Returns (s, T_z(H_s)).  Probes within ``min_gap`` of a point in ``avoid``
    (typically known resonance points) are skipped.
    """
    last = None
    for s in PROBES + EXTRA_PROBES:
        if any(abs(s - r) < min_gap * max(1.0, abs(r)) for r in avoid):
            continue
        try:
            T = model_T(m, z, s)
        except (ResonantCoupling, SingularResolvent) as exc:
            last = exc
            continue
        return s, T
    raise ResonantCoupling(f"no non-resonant probe found at {z}: {last}")


@dataclass
class CouplingFamily:
    """The meromorphic family s -> A_z(s), generated from one probe value.

    A_z(s') = (1 + (s' - s) A_z(s))^{-1} A_z(s) holds for every complex s',
    so a single evaluation of the model fixes the whole family.
    """

    model: OperatorModel
    z: SpectralPoint
    s: float
    T: np.ndarray
    A: np.ndarray = field(init=False)
    B: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = self.T @ self.model.J
        self.B = self.model.J @ self.T

    @classmethod
    def at(cls, m: OperatorModel, z: SpectralPoint, s: Optional[float] = None, avoid=()):
        if s is None:
            s, T = probe_coupling(m, z, avoid)
        else:
            T = model_T(m, z, s)
        return cls(m, z, float(s), T)

    @property
    def J(self):
        return self.model.J

    @property
    def n(self):
        return self.A.shape[0]

    def _couple(self, X, s_vals):
        s_vals = np.atleast_1d(np.asarray(s_vals, dtype=complex))
        eye = np.eye(self.n)
        fac = eye[None] + (s_vals - self.s)[:, None, None] * X[None]
        return np.linalg.solve(fac, np.broadcast_to(X, fac.shape))

    def A_at(self, s_vals) -> np.ndarray:
        """A_z(s') for an array of complex couplings, shape (k, n, n)."""
        return self._couple(self.A, s_vals)

    def B_at(self, s_vals) -> np.ndarray:
        return self._couple(self.B, s_vals)

    def T_at(self, s_vals) -> np.ndarray:
        s_vals = np.atleast_1d(np.asarray(s_vals, dtype=complex))
        eye = np.eye(self.n)
        fac = eye[None] + (s_vals - self.s)[:, None, None] * self.A[None]
        return np.linalg.solve(fac, np.broadcast_to(self.T, fac.shape))

    def factor(self, r) -> np.ndarray:
        """1 + (r - s) A_z(s); singular exactly at resonance points."""
        return np.eye(self.n) + (r - self.s) * self.A
