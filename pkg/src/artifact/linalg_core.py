"""Dense complex linear algebra primitives.

Matrices are plain complex ``numpy`` arrays.  ``as_cmatrix`` and
``as_hermitian`` validate and normalise inputs; everything else is a pure
function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.cluster import hierarchy

from .errors import (
    EvaluationFailure,
    NonSquare,
    NotPSD,
    NumericalFailure,
    QuadratureNotConverged,
    RankMismatch,
    ValidationError,
)
from .tolerances import EPS, tolerances


def as_cmatrix(a, square: bool = False) -> np.ndarray:
    """Return ``a`` as a finite 2-d complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"expected a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {m.shape}")
    return m


def as_hermitian(a, tol: Optional[float] = None) -> np.ndarray:
    """Validate Hermitian symmetry and return the symmetrised matrix."""
    m = as_cmatrix(a, square=True)
    tol = tolerances().tol_herm if tol is None else tol
    scale = max(1.0, np.linalg.norm(m, 2))
    if np.linalg.norm(m - m.conj().T, 2) > tol * scale:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def opnorm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


# ---------------------------------------------------------------------------
# eigenvalues

@dataclass
class EigenPairs:
    """Clustered spectrum of a square matrix."""

    values: np.ndarray          # cluster centres (means of the members)
    multiplicities: np.ndarray  # algebraic multiplicities
    vectors: Optional[np.ndarray]  # one representative eigenvector per cluster (columns)
    cluster_tol: float
    spreads: np.ndarray = field(default_factory=lambda: np.zeros(0))  # max member distance from centre
    raw: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    members: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)


#: perturbation level (relative) under which a set of eigenvalues is treated
#: as one perturbed multiple eigenvalue
DEFECT_LEVEL = 1e4 * EPS


def is_perturbed_multiple(x: np.ndarray, scale: float, level: float = DEFECT_LEVEL) -> bool:
    """Whether the values ``x`` look like one multiple eigenvalue after rounding.

    A k-fold eigenvalue mu perturbed at relative size eta moves to points whose
    characteristic polynomial is (t - mu)^k + O(eta scale^k): after centring,
    every elementary symmetric function e_j (j >= 2) is at most ~ eta scale^j.
    This holds for any Jordan structure (a single block gives a ring of radius
    eta^(1/k) scale with e_j = 0 for j < k), while distinct eigenvalues with
    spacing h give e_2 ~ h^2.
    """
    x = np.asarray(x, dtype=complex)
    if len(x) < 2:
        return True
    coef = np.poly(x - np.mean(x))
    return all(abs(coef[j]) <= level * scale ** j for j in range(2, len(x) + 1))


def cluster_values(w: np.ndarray, scale: float, base: Optional[float] = None) -> list[list[int]]:
    """Cluster eigenvalues (indices into ``w``).

    Candidate groups are the nodes of a single-linkage dendrogram, examined
    from the root: a node is one cluster if its members are within the plain
    relative tolerance ``base`` of each other or pass ``is_perturbed_multiple``;
    otherwise its two children are examined.
    """
    n = len(w)
    if n == 0:
        return []
    if n == 1:
        return [[0]]
    base = tolerances().cluster_tol if base is None else base
    pts = np.column_stack([np.real(w), np.imag(w)])
    tree = hierarchy.to_tree(hierarchy.linkage(pts, method="single"))

    def accept(idx):
        x = w[idx]
        if np.max(np.abs(x[:, None] - x[None, :])) <= base * scale:
            return True
        return is_perturbed_multiple(x, scale)

    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        idx = node.pre_order()
        if node.is_leaf() or accept(idx):
            out.append(sorted(idx))
        else:
            stack += [node.get_right(), node.get_left()]
    return out


def eig_general(a, cluster_tol: Optional[float] = None, vectors: bool = True) -> EigenPairs:
    """All eigenvalues of a square matrix, clustered into multiplicities."""
    a = as_cmatrix(a, square=True)
    cluster_tol = tolerances().cluster_tol if cluster_tol is None else cluster_tol
    try:
        w = sla.eigvals(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigenvalue iteration failed: {exc}") from exc
    scale = max(opnorm(a), 1e-300)
    groups = cluster_values(w, scale, cluster_tol)
    groups.sort(key=lambda g: (np.mean(w[g]).real, np.mean(w[g]).imag))
    centres = np.array([np.mean(w[g]) for g in groups], dtype=complex)
    mult = np.array([len(g) for g in groups], dtype=int)
    spreads = np.array([np.max(np.abs(w[g] - c)) for g, c in zip(groups, centres)])
    vecs = None
    if vectors:
        n = a.shape[0]
        vecs = np.zeros((n, len(groups)), dtype=complex)
        for k, c in enumerate(centres):
            # smallest right singular vector of (A - c) is a robust eigenvector
            # even when the cluster comes from a split Jordan block
            _, _, vh = np.linalg.svd(a - c * np.eye(n))
            vecs[:, k] = vh[-1].conj()
    return EigenPairs(centres, mult, vecs, cluster_tol, spreads, w, groups)


def eig_hermitian(a):
    """Ascending real eigenvalues and orthonormal eigenvectors."""
    h = as_hermitian(a)
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return vals, vecs


# ---------------------------------------------------------------------------
# kernels, square roots, signatures

def default_rank_tol(shape) -> float:
    return max(max(shape) * EPS, tolerances().rank_floor)


def kernel_basis(a, tol_rank: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel of ``a``."""
    a = as_cmatrix(a)
    tol_rank = default_rank_tol(a.shape) if tol_rank is None else tol_rank
    try:
        _, sv, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    smax = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > tol_rank * smax)) if smax > 0 else 0
    return vh[rank:].conj().T


def numerical_rank(a, tol_rank: Optional[float] = None) -> int:
    a = np.asarray(a)
    if a.size == 0:
        return 0
    tol_rank = default_rank_tol(a.shape) if tol_rank is None else tol_rank
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > tol_rank * sv[0])) if sv[0] > 0 else 0


def range_basis(a, tol_rank: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis of the numerical range (column space)."""
    a = as_cmatrix(a)
    tol_rank = default_rank_tol(a.shape) if tol_rank is None else tol_rank
    u, sv, _ = np.linalg.svd(a)
    rank = int(np.sum(sv > tol_rank * sv[0])) if sv[0] > 0 else 0
    return u[:, :rank]


def hermitian_sqrt(a, psd_tol: Optional[float] = None) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix.

    Slightly negative eigenvalues (above ``-psd_tol * ||A||``) are clamped to 0.
    """
    h = as_hermitian(a)
    psd_tol = tolerances().psd_tol if psd_tol is None else psd_tol
    vals, vecs = np.linalg.eigh(h)
    scale = max(np.max(np.abs(vals)), 1e-300)
    if vals[0] < -psd_tol * scale:
        raise NotPSD(f"eigenvalue {vals[0]:.3e} below -psd_tol*||A||")
    root = np.sqrt(np.clip(vals, 0.0, None))
    r = (vecs * root) @ vecs.conj().T
    return 0.5 * (r + r.conj().T)


@dataclass(frozen=True)
class Signature:
    n_plus: int
    n_minus: int
    ill_conditioned: bool = False

    @property
    def sign(self) -> int:
        return self.n_plus - self.n_minus

    def __iter__(self):
        return iter((self.n_plus, self.n_minus, self.sign))


def signature(m, zero_tol: Optional[float] = None, expected_rank: Optional[int] = None,
              strict: bool = False) -> Signature:
    """Inertia (n_plus, n_minus) of a Hermitian matrix."""
    h = as_hermitian(m, tol=max(tolerances().tol_herm, 1e-8))
    zero_tol = tolerances().zero_tol if zero_tol is None else zero_tol
    vals = np.linalg.eigvalsh(h)
    scale = max(np.max(np.abs(vals)), 1e-300)
    n_plus = int(np.sum(vals > zero_tol * scale))
    n_minus = int(np.sum(vals < -zero_tol * scale))
    bad = expected_rank is not None and n_plus + n_minus != expected_rank
    if bad and strict:
        raise RankMismatch(f"signature rank {n_plus + n_minus} != expected {expected_rank}")
    return Signature(n_plus, n_minus, bad)


# ---------------------------------------------------------------------------
# contour quadrature

def circle_integral(f: Callable, center: complex, radius: float, nodes: int = 32,
                    tol: Optional[float] = None, max_nodes: int = 4096,
                    batched: bool = False) -> np.ndarray:
    """(1/2 pi i) times the integral of ``f`` over a positively oriented circle.

    Trapezoid rule, doubling the node count (reusing previous nodes) until two
    successive values agree within ``tol`` relative to max(1, |value|).
    ``f`` maps a complex scalar to an array, or with ``batched=True`` an array
    of k points to an array of shape (k, ...).
    """
    if nodes < 8 or nodes & (nodes - 1):
        raise ValueError("nodes must be a power of two >= 8")
    if not radius > 0:
        raise ValueError("radius must be positive")
    tol = tolerances().quad_tol if tol is None else tol

    def evaluate(theta):
        zeta = center + radius * np.exp(1j * theta)
        try:
            if batched:
                vals = np.asarray(f(zeta))
            else:
                vals = np.array([np.asarray(f(z)) for z in zeta])
        except (np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError) as exc:
            raise EvaluationFailure(f"integrand failed on the contour: {exc}") from exc
        if not np.all(np.isfinite(vals)):
            raise EvaluationFailure("integrand not finite on the contour")
        w = (zeta - center).reshape((-1,) + (1,) * (vals.ndim - 1))
        return np.sum(vals * w, axis=0)

    n = nodes
    total = evaluate(2 * np.pi * np.arange(n) / n)
    value = total / n
    while n < max_nodes:
        total = total + evaluate(2 * np.pi * (np.arange(n) + 0.5) / n)
        n *= 2
        new = total / n
        diff = np.max(np.abs(new - value))
        value = new
        if diff < tol * max(1.0, np.max(np.abs(value))):
            return value
    raise QuadratureNotConverged(f"no convergence with {max_nodes} nodes (radius {radius:.3e})")


def resolvent_stack(a: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """(zeta_k - A)^{-1} for every node, shape (k, n, n)."""
    n = a.shape[0]
    eye = np.eye(n)
    mats = zeta[:, None, None] * eye[None] - a[None]
    return np.linalg.solve(mats, np.broadcast_to(eye, mats.shape))


def riesz_projection(a: np.ndarray, center: complex, radius: float, **kw) -> np.ndarray:
    """Spectral projection of ``a`` for eigenvalues inside a circle."""
    return circle_integral(lambda z: resolvent_stack(a, z), center, radius, batched=True, **kw)
