"""Resonance points of s -> A_z(s), their idempotents, nilpotents and structure.

A resonance point r_z is a pole of the meromorphic family A_z(s); for any
non-resonant probe s, (s - r_z)^{-1} is an eigenvalue of A_z(s).  The Riesz
idempotent P_z(r_z) is computed twice: as the spectral projection of A_z(s)
(circle in the sigma-plane) and as the residue of A_z(.) at r_z (circle in the
s-plane).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ContourTooClose,
    GroupingUnstable,
    InconsistentProbes,
    RealSplitPoint,
    ValidationError,
)
from .linalg_core import (
    EigenPairs,
    circle_integral,
    eig_general,
    kernel_basis,
    opnorm,
    range_basis,
    riesz_projection,
)
from .operator_models import PROBES, EXTRA_PROBES, CouplingFamily, OperatorModel, SpectralPoint
from .tolerances import EPS, tolerances

#: largest s-plane contour radius
S_RADIUS_CAP = 1.0
#: threshold (relative to ||K||-scale) for ranks of the nilpotent part
NIL_RANK_TOL = 1e-8


# ---------------------------------------------------------------------------
# spectrum of a family

def family_spectrum(fam: CouplingFamily) -> EigenPairs:
    ep = fam.__dict__.get("_spectrum")
    if ep is None:
        ep = eig_general(fam.A, vectors=False)
        fam.__dict__["_spectrum"] = ep
    return ep


def _scale(fam: CouplingFamily) -> float:
    return max(opnorm(fam.A), 1e-300)


@dataclass
class _Cluster:
    r: complex
    sigma: complex
    mult: int
    spread: float
    index: int


def family_points(fam: CouplingFamily) -> list[_Cluster]:
    """All resonance points visible from the family's probe (finite ones)."""
    ep = family_spectrum(fam)
    scale = _scale(fam)
    zt = tolerances().zero_tol
    out = []
    for k, (c, mu, sp) in enumerate(zip(ep.values, ep.multiplicities, ep.spreads)):
        if abs(c) <= zt * scale or abs(c) <= 2 * sp:
            continue  # eigenvalue zero: resonance point at infinity
        out.append(_Cluster(fam.s - 1.0 / c, c, int(mu), float(sp), k))
    return out


def find_resonance_points(m: OperatorModel, z: SpectralPoint, s: Optional[float] = None,
                          region: Optional[tuple] = None, check: bool = True):
    """Resonance points r_z with algebraic multiplicities.

    ``region`` is an optional disk (center, radius).  With ``check`` the set is
    recomputed from a second probe and compared (s-independence).
    """
    fam = CouplingFamily.at(m, z, s)
    pts = family_points(fam)
    if check:
        second = None
        for s2 in PROBES + EXTRA_PROBES:
            if abs(s2 - fam.s) < 0.1 or any(abs(s2 - p.r) < 0.05 for p in pts):
                continue
            try:
                second = CouplingFamily.at(m, z, s2)
                break
            except ValidationError:
                raise
            except Exception:
                continue
        if second is not None:
            other = family_points(second)
            scale2 = _scale(second)
            scale1 = _scale(fam)
            for p in pts:
                # only points that are well resolved from both probes
                if abs(p.sigma) < 1e-5 * scale1 or abs(1.0 / (second.s - p.r)) < 1e-5 * scale2:
                    continue
                tol = 1e-7 * max(1.0, abs(p.r)) ** 2 + 4 * (p.spread / abs(p.sigma) ** 2)
                if not other or min(abs(q.r - p.r) for q in other) > tol:
                    raise InconsistentProbes(f"point {p.r} not reproduced from probe {second.s}")
    res = [(p.r, p.mult) for p in pts]
    if region is not None:
        c, rad = region
        res = [(r, k) for r, k in res if abs(r - c) <= rad]
    res.sort(key=lambda t: (t[0].real, t[0].imag))
    return res


def locate(fam: CouplingFamily, r: complex) -> _Cluster:
    """The eigenvalue cluster of A_z(s) that corresponds to the point r."""
    pts = family_points(fam)
    if not pts:
        raise ValidationError(f"no resonance points at {fam.z}")
    sigma = 1.0 / (fam.s - r)
    best = min(pts, key=lambda p: abs(p.sigma - sigma))
    tol = max(3 * best.spread, 1e-7 * _scale(fam), 1e-9 * abs(sigma))
    if abs(best.sigma - sigma) > tol:
        raise ValidationError(f"{r} is not a resonance point at {fam.z}")
    return best


def sigma_radius(fam: CouplingFamily, cl: _Cluster) -> float:
    """Radius of a sigma-plane circle isolating the cluster."""
    ep = family_spectrum(fam)
    own = set(ep.members[cl.index])
    others = [w for i, w in enumerate(ep.raw) if i not in own]
    if not others:
        return max(cl.spread * 2, 0.5 * abs(cl.sigma), 1e-8)
    gap = min(abs(w - cl.sigma) for w in others)
    if gap <= 1.05 * cl.spread or gap < 1e-12 * _scale(fam):
        raise ContourTooClose(f"cluster at sigma={cl.sigma} not isolated")
    return max(0.5 * (cl.spread + gap), 1e-8 * min(1.0, gap))


def s_radius(fam: CouplingFamily, r: complex) -> float:
    """Radius of an s-plane circle around r excluding all other points."""
    others = [p.r for p in family_points(fam) if abs(p.r - r) > 1e-9 * max(1, abs(r))]
    if not others:
        return S_RADIUS_CAP
    gap = min(abs(q - r) for q in others)
    return min(0.5 * gap, S_RADIUS_CAP)


# ---------------------------------------------------------------------------
# idempotents and nilpotents

def residue(fam: CouplingFamily, r: complex, j: int = 0, which: str = "A",
            radius: Optional[float] = None) -> np.ndarray:
    """(1/2 pi i) contour integral of (s' - r)^j A_z(s') ds' around r."""
    radius = s_radius(fam, r) if radius is None else radius
    evalf = fam.A_at if which == "A" else fam.B_at

    def f(sv):
        vals = evalf(sv)
        if j:
            vals = vals * ((sv - r) ** j)[:, None, None]
        return vals

    return circle_integral(f, r, radius, batched=True)


def sigma_projection(fam: CouplingFamily, r: complex, which: str = "A") -> np.ndarray:
    cl = locate(fam, r)
    rad = sigma_radius(fam, cl)
    mat = fam.A if which == "A" else fam.B
    return riesz_projection(mat, cl.sigma, rad)


def riesz_idempotents(m: OperatorModel, z: SpectralPoint, r_z: complex,
                      fam: Optional[CouplingFamily] = None):
    """(P, Q, residual): sigma-plane projections and their s-plane disagreement."""
    fam = CouplingFamily.at(m, z, avoid=[r_z]) if fam is None else fam
    P = sigma_projection(fam, r_z, "A")
    Q = sigma_projection(fam, r_z, "B")
    P_s = residue(fam, r_z, 0, "A")
    Q_s = residue(fam, r_z, 0, "B")
    scale = max(1.0, opnorm(P))
    residual = max(opnorm(P - P_s), opnorm(Q - Q_s)) / scale
    return P, Q, residual


def nilpotents(m: OperatorModel, z: SpectralPoint, r_z: complex,
               fam: Optional[CouplingFamily] = None):
    """(nilA, nilB): weighted residues of A_z and B_z at r_z."""
    fam = CouplingFamily.at(m, z, avoid=[r_z]) if fam is None else fam
    locate(fam, r_z)
    return residue(fam, r_z, 1, "A"), residue(fam, r_z, 1, "B")


def resonance_space(m: OperatorModel, z: SpectralPoint, s: Optional[float], r_z: complex, k: int,
                    tol_rank: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis of ker (1 + (r_z - s) A_z(s))^k, computed directly."""
    fam = CouplingFamily.at(m, z, s, avoid=[r_z])
    F = fam.factor(r_z)
    return kernel_basis(np.linalg.matrix_power(F, k), tol_rank if tol_rank is not None else 1e-9)


def _restricted_factor(fam: CouplingFamily, r: complex, P: np.ndarray):
    """Orthonormal basis U of range P and K = U* (1 + (r - s) A) U."""
    N = int(round(np.trace(P).real))
    u, sv, _ = np.linalg.svd(P)
    U = u[:, :N]
    K = U.conj().T @ fam.factor(r) @ U
    return U, K


def nilpotent_staircase(K: np.ndarray, ref: float, tol: float = NIL_RANK_TOL) -> list[int]:
    """ranks of K^0, K^1, ..., down to the first zero power."""
    N = K.shape[0]
    ranks = [N]
    X = np.eye(N, dtype=complex)
    ref = max(ref, opnorm(K), 1e-300)
    for j in range(1, N + 1):
        X = X @ K
        sv = np.linalg.svd(X, compute_uv=False)
        ranks.append(int(np.sum(sv > tol * ref ** j)))
        if ranks[-1] == 0:
            break
    while ranks[-1] != 0:
        ranks.append(0)
    return ranks


def chains_from_staircase(ranks: list[int]) -> list[int]:
    """Jordan chain lengths (descending) from ranks of powers of a nilpotent."""
    # number of chains of length >= j is rank(K^{j-1}) - rank(K^j)
    ge = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))]
    lengths = []
    for j in range(len(ge), 0, -1):
        exact = ge[j - 1] - (ge[j] if j < len(ge) else 0)
        lengths += [j] * max(exact, 0)
    return sorted(lengths, reverse=True)


@dataclass
class ResonancePointRecord:
    r_z: complex
    z: SpectralPoint
    s: float
    order_d: int
    geom_mult_m: int
    alg_mult_N: int
    P: np.ndarray
    Q: np.ndarray
    nilA: np.ndarray
    nilB: np.ndarray
    upsilon_bases: list
    jordan_chain_lengths: list
    residual: float  # sigma-plane vs s-plane disagreement
    diagnostics: dict = field(default_factory=dict)

    def upsilon(self, k: Optional[int] = None) -> np.ndarray:
        k = self.order_d if k is None else min(k, self.order_d)
        return self.upsilon_bases[k - 1]


def point_structure(m: OperatorModel, z: SpectralPoint, r_z: complex,
                    fam: Optional[CouplingFamily] = None) -> ResonancePointRecord:
    """Full record of one resonance point."""
    fam = CouplingFamily.at(m, z, avoid=[r_z]) if fam is None else fam
    P, Q, residual = riesz_idempotents(m, z, r_z, fam)
    nilA, nilB = residue(fam, r_z, 1, "A"), residue(fam, r_z, 1, "B")
    U, K = _restricted_factor(fam, r_z, P)
    ref = abs(r_z - fam.s) * _scale(fam)
    ranks = nilpotent_staircase(K, ref)
    chains = chains_from_staircase(ranks)
    N = K.shape[0]
    d = max(chains) if chains else 0
    mgeo = N - ranks[1]
    bases = []
    X = np.eye(N, dtype=complex)
    for k in range(1, d + 1):
        X = X @ K
        sv_tol = NIL_RANK_TOL * max(ref, opnorm(K), 1e-300) ** k
        _, sv, vh = np.linalg.svd(X)
        rank = int(np.sum(sv > sv_tol))
        bases.append(U @ vh[rank:].conj().T)
    rec = ResonancePointRecord(complex(r_z), z, fam.s, d, mgeo, N, P, Q, nilA, nilB, bases, chains,
                               residual)
    rec.diagnostics["rank_staircase"] = ranks
    return rec


def record_invariants(rec: ResonancePointRecord, fam: CouplingFamily) -> dict:
    """Residuals of the algebraic identities a point record must satisfy."""
    P, Q, nA = rec.P, rec.Q, rec.nilA
    sc = max(1.0, opnorm(P))
    J = fam.J
    out = {
        "idempotent_P": opnorm(P @ P - P) / sc,
        "idempotent_Q": opnorm(Q @ Q - Q) / max(1.0, opnorm(Q)),
        "JP_QJ": opnorm(J @ P - Q @ J) / (sc * max(1.0, opnorm(J))),
        "AP_PA": max(opnorm(nA @ P - nA), opnorm(P @ nA - nA)) / max(1.0, opnorm(nA)),
        "sigma_vs_s": rec.residual,
    }
    d = rec.order_d
    nd = np.linalg.matrix_power(nA, d)
    out["nil_power"] = opnorm(nd) / max(1.0, opnorm(nA)) ** d
    out["d_m_N"] = rec.order_d + rec.geom_mult_m - 1 <= rec.alg_mult_N
    # Laurent truncation at a point on a circle of half the s-radius
    rad = 0.5 * s_radius(fam, rec.r_z)
    s_test = rec.r_z + rad * np.exp(0.7j)
    lhs = fam.A_at([s_test])[0] @ P
    rhs = np.zeros_like(lhs)
    X = P.copy()
    for j in range(d):
        rhs += X / (s_test - rec.r_z) ** (j + 1)
        X = X @ nA
    out["laurent"] = opnorm(lhs - rhs) / max(1.0, opnorm(lhs))
    return out


# ---------------------------------------------------------------------------
# group splitting of a real point

@dataclass
class GroupSplitting:
    r_lambda: float
    lam: float
    y_used: float
    split_points: list  # (r, multiplicity)
    N_plus: int
    N_minus: int
    N: int
    P_plus_i0: np.ndarray
    P_minus_i0: np.ndarray
    Q_plus_i0: np.ndarray
    Q_minus_i0: np.ndarray
    nilA_plus_i0: np.ndarray
    nilA_minus_i0: np.ndarray
    P_group: np.ndarray   # P_{lambda+iy} of the group
    A_group: np.ndarray   # A_{lambda+iy}(s) P_{lambda+iy}
    s: float
    ball: float
    diagnostics: dict = field(default_factory=dict)


def boundary_families(m: OperatorModel, lam: float, avoid=()):
    """Families at lambda+i0 and lambda-i0 sharing one real probe."""
    fp = CouplingFamily.at(m, SpectralPoint.plus_i0(lam), avoid=avoid)
    fm = CouplingFamily.at(m, SpectralPoint.minus_i0(lam), fp.s)
    return fp, fm


def real_points(fam: CouplingFamily, tol: float = 1e-7):
    """Real resonance points (cluster means with negligible imaginary part)."""
    out = []
    for p in family_points(fam):
        if abs(p.r.imag) <= tol * max(1.0, abs(p.r)) ** 2 + 2 * p.spread / abs(p.sigma) ** 2:
            out.append(p)
    return out


def _group_counts(famy: CouplingFamily, r_lambda: float, ball: float):
    w = np.linalg.eigvals(famy.A)
    scale = _scale(famy)
    inside, outside = [], []
    for x in w:
        if abs(x) <= tolerances().zero_tol * scale:
            outside.append((x, None))
            continue
        r = famy.s - 1.0 / x
        (inside if abs(r - r_lambda) < ball else outside).append((x, r))
    return inside, outside


def group_splitting(m: OperatorModel, lam: float, r_lambda: float, y: Optional[float] = None,
                    families=None) -> GroupSplitting:
    """Split the real point r_lambda by moving lambda to lambda + i y."""
    tol = tolerances()
    fp, fm = boundary_families(m, lam, avoid=[r_lambda]) if families is None else families
    cl = locate(fp, r_lambda)
    r_lambda = float(np.real(cl.r)) if abs(np.imag(cl.r)) < 1e-6 * max(1, abs(cl.r)) else r_lambda
    N = cl.mult
    others = [p.r for p in family_points(fp) if p.index != cl.index]
    real_others = [q for q in others if abs(q.imag) <= 1e-7 * max(1.0, abs(q))]
    dist_real = min((abs(q - r_lambda) for q in real_others), default=None)
    dist_all = min((abs(q - r_lambda) for q in others), default=None)
    ball = (dist_all / 3.0) if dist_all is not None else 1.0 / 3.0
    ball = min(ball, 1.0 / 3.0 * max(1.0, abs(r_lambda)))
    y0 = (dist_real if dist_real is not None else 1.0) / 10.0

    # boundary idempotents and nilpotents
    P_p, Q_p, res_p = riesz_idempotents(m, fp.z, r_lambda, fp)
    P_m, Q_m, res_m = riesz_idempotents(m, fm.z, r_lambda, fm)
    nil_p = residue(fp, r_lambda, 1, "A")
    nil_m = residue(fm, r_lambda, 1, "A")
    rad_sigma = sigma_radius(fp, cl)

    im_floor = 1e3 * EPS * abs(r_lambda) + 1e-12
    history = []
    yy = y0 if y is None else float(y)
    accepted = None
    while True:
        famy = CouplingFamily.at(m, SpectralPoint.off_axis(lam, yy), fp.s)
        inside, outside = _group_counts(famy, r_lambda, ball)
        rs = [r for _, r in inside]
        npl = sum(1 for r in rs if r.imag > 0)
        nmi = sum(1 for r in rs if r.imag < 0)
        min_im = min((abs(r.imag) for r in rs), default=0.0)
        history.append((yy, npl, nmi, min_im))
        if y is not None:
            if len(rs) != N:
                raise GroupingUnstable(f"{len(rs)} split points in the ball, expected {N} (y={yy})")
            if min_im <= im_floor:
                raise RealSplitPoint(f"split point with |Im r| = {min_im:.2e} at y={yy}")
            accepted = (famy, inside, outside)
            break
        ok = len(rs) == N and min_im > max(1e4 * EPS, im_floor)
        if ok and len(history) >= 2 and history[-2][1:3] == (npl, nmi) and history[-2][1] + history[-2][2] == N:
            accepted = (famy, inside, outside)
            break
        if yy / 2 < tol.y_floor:
            if len(rs) == N and min_im <= im_floor:
                raise RealSplitPoint(f"split point with |Im r| = {min_im:.2e} at the y floor")
            raise GroupingUnstable(f"group count not stable down to y={yy:.1e}: {history[-3:]}")
        yy /= 2

    famy, inside, outside = accepted
    sig_in = [abs(x - cl.sigma) for x, _ in inside]
    sig_out = [abs(x - cl.sigma) for x, _ in outside]
    g_in = max(sig_in)
    g_out = min(sig_out) if sig_out else 2 * g_in + abs(cl.sigma)
    if g_in >= g_out:
        raise GroupingUnstable("group not separable from the rest of the spectrum in the sigma-plane")
    group_radius = 0.5 * (g_in + g_out)
    P_group = riesz_projection(famy.A, cl.sigma, group_radius)
    gs = GroupSplitting(
        r_lambda=r_lambda, lam=lam, y_used=yy,
        split_points=[(r, 1) for _, r in sorted(inside, key=lambda t: (t[1].real, t[1].imag))],
        N_plus=sum(1 for _, r in inside if r.imag > 0),
        N_minus=sum(1 for _, r in inside if r.imag < 0),
        N=N, P_plus_i0=P_p, P_minus_i0=P_m, Q_plus_i0=Q_p, Q_minus_i0=Q_m,
        nilA_plus_i0=nil_p, nilA_minus_i0=nil_m, P_group=P_group,
        A_group=famy.A @ P_group, s=fp.s, ball=ball,
    )
    gs.diagnostics.update(
        y_history=history,
        idempotent_residual_plus=res_p,
        idempotent_residual_minus=res_m,
        sigma_radius=rad_sigma,
        group_radius=group_radius,
    )
    return gs


def extrapolated_boundary(m: OperatorModel, gs: GroupSplitting, y: Optional[float] = None,
                          tol: float = 1e-9) -> np.ndarray:
    """Richardson y -> 0 limit of the group idempotent at lambda + i y.

    Starting from ``y`` (default min(y_used, 1e-3)) the step is divided by 4
    until two successive extrapolants agree to ``tol`` (relative).
    """
    y = min(gs.y_used, 1e-3) if y is None else y
    sigma = 1.0 / (gs.s - gs.r_lambda)
    rad = gs.diagnostics["group_radius"]

    def at(yy):
        famy = CouplingFamily.at(m, SpectralPoint.off_axis(gs.lam, yy), gs.s)
        return riesz_projection(famy.A, sigma, rad)

    vals = [at(y), at(y / 2), at(y / 4)]
    best = (8 * vals[2] - 6 * vals[1] + vals[0]) / 3
    while y / 4 > tolerances().y_floor:
        y /= 4
        vals = [vals[2], at(y / 2), at(y / 4)]
        new = (8 * vals[2] - 6 * vals[1] + vals[0]) / 3
        diff = np.max(np.abs(new - best))
        best = new
        if diff < tol * max(1.0, np.max(np.abs(best))):
            break
    return best


def contour_identity_residual(m: OperatorModel, gs: GroupSplitting) -> float:
    """(1/pi) int Im T_{l+iy} J ds over a circle around the group minus (P_{l+iy} - P_{l-iy})."""
    zp = SpectralPoint.off_axis(gs.lam, gs.y_used)
    fp = CouplingFamily.at(m, zp, gs.s)
    fm = CouplingFamily.at(m, zp.conj(), gs.s)
    radius = gs.ball

    # (1/pi) * (1/2i) * (2 pi i) = 1 in units of circle_integral
    lhs = circle_integral(lambda sv: fp.A_at(sv) - fm.A_at(sv), gs.r_lambda, radius, batched=True)
    sigma = 1.0 / (gs.s - gs.r_lambda)
    Pp = gs.P_group
    Pm = riesz_projection(fm.A, np.conj(sigma), gs.diagnostics["group_radius"])
    return opnorm(lhs - (Pp - Pm)) / max(1.0, opnorm(Pp))
