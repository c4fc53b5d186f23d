"""Resonance index, total index over a coupling interval and flow oracles.

Orientation: index +1 means an eigenvalue crosses lambda upwards as the
coupling r increases.  The splitting count, the R-index of the group and the
signature of the resonance matrix all use this orientation; ``ssf_counting``
and ``spectral_flow_oracle`` are counted so that they agree with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import (
    EigenvalueAtLambda,
    EndpointResonant,
    GridTooCoarse,
    NotClassR,
    RankMismatch,
    ValidationError,
)
from .linalg_core import as_cmatrix, opnorm, riesz_projection, signature
from .operator_models import CouplingFamily, FinitePencil, OperatorModel, SpectralPoint, finite_T
from .resonance import (
    GroupSplitting,
    boundary_families,
    family_points,
    find_resonance_points,
    group_splitting,
    locate,
    point_structure,
    sigma_radius,
)
from .tolerances import tolerances


# ---------------------------------------------------------------------------
# R-index and the Krein check

def r_index(a, tol: Optional[float] = None) -> int:
    """Eigenvalues of ``a`` in the upper half-plane minus those in the lower.

    Eigenvalues with modulus <= tol*||a|| count as zero.  A nonzero eigenvalue
    with |Im| <= tol*||a|| means ``a`` is not of class R.
    """
    a = as_cmatrix(a, square=True)
    tol = tolerances().zero_tol if tol is None else tol
    scale = opnorm(a)
    if scale == 0.0:
        return 0
    w = np.linalg.eigvals(a)
    n_up = n_down = 0
    for x in w:
        if abs(x) <= tol * scale:
            continue
        if abs(x.imag) <= tol * scale:
            raise NotClassR(f"eigenvalue {x:.6g} is numerically real and nonzero")
        if x.imag > 0:
            n_up += 1
        else:
            n_down += 1
    return n_up - n_down


def krein_sign_check(p: FinitePencil, z: SpectralPoint, s: float = 0.0):
    """(Rindex(T_z(H_s) J), signature of V, agree) for Im z > 0."""
    if z.is_boundary or not z.y > 0:
        raise ValidationError("the Krein check needs an off-axis z with Im z > 0")
    T = finite_T(p, z, s)
    ri = r_index(T @ p.J)
    sv = signature(p.V).sign
    return ri, sv, ri == sv


# ---------------------------------------------------------------------------
# resonance matrix

@dataclass
class ResonanceMatrix:
    M_minus_plus: np.ndarray   # Q_{l-i0} J P_{l+i0}
    M_plus_minus: np.ndarray   # Q_{l+i0} J P_{l-i0}
    sig_minus_plus: object
    sig_plus_minus: object
    N: int
    hermitian_residual: float


def resonance_matrix(m: OperatorModel, lam: float, r_lambda: float,
                     gs: Optional[GroupSplitting] = None, strict: Optional[bool] = None,
                     families=None) -> ResonanceMatrix:
    """Both orderings of the resonance matrix and their signatures."""
    strict = tolerances().strict if strict is None else strict
    if gs is None:
        fp, fm = boundary_families(m, lam, avoid=[r_lambda]) if families is None else families
        from .resonance import riesz_idempotents
        P_p, Q_p, _ = riesz_idempotents(m, fp.z, r_lambda, fp)
        P_m, Q_m, _ = riesz_idempotents(m, fm.z, r_lambda, fm)
        N = locate(fp, r_lambda).mult
    else:
        P_p, Q_p, P_m, Q_m, N = gs.P_plus_i0, gs.Q_plus_i0, gs.P_minus_i0, gs.Q_minus_i0, gs.N
    J = m.J
    Mmp = Q_m @ J @ P_p
    Mpm = Q_p @ J @ P_m
    scale = max(opnorm(Mmp), opnorm(Mpm), 1e-300)
    herm = max(opnorm(Mmp - Mmp.conj().T), opnorm(Mpm - Mpm.conj().T)) / scale
    if herm > 1e-8:
        raise RankMismatch(f"resonance matrix not Hermitian (residual {herm:.2e})")
    s1 = signature(Mmp, expected_rank=N, strict=strict)
    s2 = signature(Mpm, expected_rank=N, strict=strict)
    return ResonanceMatrix(Mmp, Mpm, s1, s2, N, herm)


# ---------------------------------------------------------------------------
# resonance index

@dataclass
class IndexReport:
    r_lambda: float
    ind_splitting: int
    ind_rindex: int
    ind_signature: int
    dim_upsilon1: int
    uturn_ok: bool
    consistency: bool
    diagnostics: list = field(default_factory=list)
    order_d: int = 0
    N: int = 0
    N_plus: int = 0
    N_minus: int = 0
    split_points: list = field(default_factory=list)

    @property
    def index(self) -> int:
        return self.ind_splitting


def resonance_index(m: OperatorModel, lam: float, r_lambda: float, families=None,
                    strict: Optional[bool] = None) -> IndexReport:
    """Resonance index of the real point r_lambda, computed three ways."""
    fams = boundary_families(m, lam, avoid=[r_lambda]) if families is None else families
    gs = group_splitting(m, lam, r_lambda, families=fams)
    r_lambda = gs.r_lambda
    ind_split = gs.N_plus - gs.N_minus
    ind_r = r_index(gs.A_group)
    rm = resonance_matrix(m, lam, r_lambda, gs, strict=strict)
    ind_sig = rm.sig_minus_plus.sign
    rec = point_structure(m, fams[0].z, r_lambda, fams[0])
    dim1 = rec.geom_mult_m
    diag = [
        f"y_used={gs.y_used:.3e}",
        f"ball={gs.ball:.3e}",
        f"signature(M-+)={tuple(rm.sig_minus_plus)[:2]} signature(M+-)={tuple(rm.sig_plus_minus)[:2]}",
        f"idempotent residuals +/-: {gs.diagnostics['idempotent_residual_plus']:.2e}"
        f" / {gs.diagnostics['idempotent_residual_minus']:.2e}",
    ]
    if rm.sig_minus_plus.ill_conditioned or rm.sig_plus_minus.ill_conditioned:
        diag.append(f"resonance matrix rank differs from N={gs.N}")
    if rm.sig_minus_plus.sign != rm.sig_plus_minus.sign:
        diag.append("the two orderings of the resonance matrix disagree")
    consistent = ind_split == ind_r == ind_sig and rm.sig_plus_minus.sign == ind_sig
    return IndexReport(
        r_lambda=float(r_lambda), ind_splitting=ind_split, ind_rindex=ind_r, ind_signature=ind_sig,
        dim_upsilon1=dim1, uturn_ok=abs(ind_split) <= dim1, consistency=consistent,
        diagnostics=diag, order_d=rec.order_d, N=gs.N, N_plus=gs.N_plus, N_minus=gs.N_minus,
        split_points=[r for r, _ in gs.split_points],
    )


# ---------------------------------------------------------------------------
# total index over [a, b]

@dataclass
class FlowReport:
    lam: float
    interval: tuple
    per_point: list
    total: int
    ssf_value: Optional[int] = None
    tracking_value: Optional[int] = None
    agreement: bool = True


def _polish(fam: CouplingFamily, r0: float, width: float) -> tuple[float, float]:
    """Golden-section minimisation of smin(1 + (r - s) A) near r0."""
    def smin(r):
        return np.linalg.svd(fam.factor(r), compute_uv=False)[-1]

    lo, hi = r0 - width, r0 + width
    res = minimize_scalar(smin, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    r1 = float(res.x) if res.fun < smin(r0) else r0
    return r1, float(min(res.fun, smin(r0)))


def real_resonance_points(m: OperatorModel, lam: float, a: float, b: float, families=None,
                          tol: float = 1e-7):
    """Real resonance points at lambda + i0 inside [a, b] (polished)."""
    fp, _ = boundary_families(m, lam) if families is None else families
    find_resonance_points(m, fp.z, fp.s)  # probe-independence check
    pts = []
    all_r = [p.r for p in family_points(fp)]
    for p in family_points(fp):
        r = p.r
        if abs(r.imag) > 1e-6 * max(1.0, abs(r)):
            continue
        gap = min((abs(q - r) for q in all_r if q is not p.r), default=1.0)
        width = min(1e-6 * max(1.0, abs(r)), 0.25 * gap)
        r1, sm = _polish(fp, r.real, width)
        if sm > tol:
            continue
        pts.append((r1, p.mult))
    span = max(1.0, abs(a), abs(b))
    for r, _ in pts:
        if min(abs(r - a), abs(r - b)) <= 1e-8 * span:
            raise EndpointResonant(f"resonance point {r} at an endpoint of [{a}, {b}]")
    return sorted((r, k) for r, k in pts if a < r < b)


def total_resonance_index(m: OperatorModel, lam: float, a: float, b: float,
                          with_oracles: bool = True) -> FlowReport:
    """Sum of resonance indices of all real resonance points in [a, b]."""
    if not a < b:
        raise ValidationError("need a < b")
    fams = boundary_families(m, lam)
    pts = real_resonance_points(m, lam, a, b, fams)
    per_point = []
    for r, _ in pts:
        # families are shared when the probe is not too close to r
        use = fams if min(abs(r - f.s) for f in fams) > 0.05 * max(1.0, abs(r)) else None
        per_point.append((r, resonance_index(m, lam, r, families=use)))
    total = sum(rep.ind_splitting for _, rep in per_point)
    report = FlowReport(lam, (a, b), per_point, total)
    if with_oracles and isinstance(m, FinitePencil):
        report.ssf_value = ssf_counting(m, lam, a, b)
        report.tracking_value = spectral_flow_oracle(m, lam, a, b)
        report.agreement = total == report.ssf_value == report.tracking_value
    return report


# ---------------------------------------------------------------------------
# finite-dimensional flow counts

def _count_below(p: FinitePencil, lam: float, r: float) -> int:
    w = np.linalg.eigvalsh(p.H(r))
    scale = max(1.0, np.max(np.abs(w)))
    if np.min(np.abs(w - lam)) <= 1e-10 * scale:
        raise EigenvalueAtLambda(f"lambda={lam} is an eigenvalue of H_r at r={r}")
    return int(np.sum(w <= lam))


def ssf_counting(p: FinitePencil, lam: float, a: float, b: float) -> int:
    """#(eig H_a <= lambda) - #(eig H_b <= lambda): net upward crossings."""
    ca = _count_below(p, lam, a)
    if a == b:
        return 0
    return ca - _count_below(p, lam, b)


def _match(w0, v0, w1, v1):
    """Permutation pi with curve k at the left node continuing as pi[k]."""
    cost = np.abs(w0[:, None] - w1[None, :])
    scale = max(1e-300, np.max(cost))
    overlap = np.abs(v0.conj().T @ v1)
    # ties in displacement are broken by eigenvector overlap
    _, pi = linear_sum_assignment(cost - 1e-9 * scale * overlap)
    return pi


def eigenvalue_crossings(p: FinitePencil, lam: float, a: float, b: float, grid: int = 200,
                         xtol: float = 1e-9):
    """Crossings (r, sign) of the level lambda by tracked eigenvalue curves."""
    if not a < b:
        return []
    _count_below(p, lam, a)
    _count_below(p, lam, b)
    rs = np.linspace(a, b, max(grid, 2) + 1)
    crossings = []

    def eig(r):
        return np.linalg.eigh(p.H(r))

    def count(r):
        return int(np.sum(np.linalg.eigvalsh(p.H(r)) <= lam))

    def refine(lo, hi, e_lo, e_hi, depth=0):
        w0, v0 = e_lo
        w1, v1 = e_hi
        pi = _match(w0, v0, w1, v1)
        below0 = w0 <= lam
        below1 = w1[pi] <= lam
        signs = [int(b0) - int(b1) for b0, b1 in zip(below0, below1) if b0 != b1]
        net = count(lo) - count(hi)
        if sum(signs) != net:
            raise GridTooCoarse(f"count change {net} but {sum(signs)} tracked crossings in [{lo}, {hi}]")
        if not signs:
            return
        if hi - lo <= xtol:
            crossings.extend((0.5 * (lo + hi), sg) for sg in signs)
            return
        if len(signs) == 1 and depth > 0 or hi - lo <= 64 * xtol:
            # bisection on the counting function localises a single crossing
            c_lo = count(lo)
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if count(mid) == c_lo:
                    lo = mid
                else:
                    hi = mid
            if len(signs) == 1:
                crossings.append((0.5 * (lo + hi), signs[0]))
            else:
                crossings.extend((0.5 * (lo + hi), sg) for sg in signs)
            return
        mid = 0.5 * (lo + hi)
        e_mid = eig(mid)
        refine(lo, mid, e_lo, e_mid, depth + 1)
        refine(mid, hi, e_mid, e_hi, depth + 1)

    prev = eig(rs[0])
    for lo, hi in zip(rs[:-1], rs[1:]):
        cur = eig(hi)
        refine(lo, hi, prev, cur)
        prev = cur
    return crossings


def spectral_flow_oracle(p: FinitePencil, lam: float, a: float, b: float, grid: int = 200) -> int:
    """Net signed count of crossings of lambda by tracked eigenvalue curves."""
    return int(sum(sg for _, sg in eigenvalue_crossings(p, lam, a, b, grid)))


# ---------------------------------------------------------------------------
# point-set matrices at off-axis z

def point_set_projection(fam: CouplingFamily, points) -> np.ndarray:
    """Sum of the Riesz idempotents P_z(r) of the given resonance points."""
    P = np.zeros_like(fam.A)
    for r in points:
        cl = locate(fam, r)
        P = P + riesz_projection(fam.A, cl.sigma, sigma_radius(fam, cl))
    return P


def point_set_matrix(m: OperatorModel, z: SpectralPoint, points, s: Optional[float] = None):
    """(Q_{z-bar}(conj set) J P_z(set), P_z(set), A_z(s) P_z(set)) for off-axis z."""
    fp = CouplingFamily.at(m, z, s, avoid=list(points))
    fm = CouplingFamily.at(m, z.conj(), fp.s)
    P = point_set_projection(fp, points)
    Q = _b_side(fm, [np.conj(r) for r in points])
    return Q @ m.J @ P, P, fp.A @ P


def _b_side(fam: CouplingFamily, points) -> np.ndarray:
    Q = np.zeros_like(fam.B)
    for r in points:
        cl = locate(fam, r)
        Q = Q + riesz_projection(fam.B, cl.sigma, sigma_radius(fam, cl))
    return Q
