"""Classification of real resonance points at the boundary lambda +/- i0.

Type-I vectors, the c-coefficients of the imaginary part of the sandwiched
resolvent, properties S and P, depth and the property-L space, and the
spectrum of P_{l+i0} P_{l-i0}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NotPSD, VectorNotInSpace
from .linalg_core import eig_general, kernel_basis, opnorm, range_basis
from .operator_models import CouplingFamily, OperatorModel
from .resonance import (
    NIL_RANK_TOL,
    ResonancePointRecord,
    boundary_families,
    family_points,
    point_structure,
    s_radius,
)
from .tolerances import tolerances


# ---------------------------------------------------------------------------
# boundary data shared by the classifiers

@dataclass
class BoundaryData:
    lam: float
    r_lambda: float
    fam_plus: CouplingFamily
    fam_minus: CouplingFamily
    rec_plus: ResonancePointRecord
    rec_minus: ResonancePointRecord

    @property
    def P_plus(self):
        return self.rec_plus.P

    @property
    def P_minus(self):
        return self.rec_minus.P

    @property
    def J(self):
        return self.fam_plus.J

    def fam(self, sign: str) -> CouplingFamily:
        return self.fam_plus if sign == "+" else self.fam_minus

    def rec(self, sign: str) -> ResonancePointRecord:
        return self.rec_plus if sign == "+" else self.rec_minus


def boundary_data(m: OperatorModel, lam: float, r_lambda: float, families=None) -> BoundaryData:
    fp, fm = boundary_families(m, lam, avoid=[r_lambda]) if families is None else families
    rp = point_structure(m, fp.z, r_lambda, fp)
    rm = point_structure(m, fm.z, r_lambda, fm)
    return BoundaryData(lam, float(np.real(r_lambda)), fp, fm, rp, rm)


def _im_part(T):
    return (T - T.conj().T) / 2j


def probe_values(bd: BoundaryData, count: int, avoid_radius: Optional[float] = None):
    """Real couplings away from every resonance point (for sampling and probing)."""
    r = bd.r_lambda
    others = [p.r for p in family_points(bd.fam_plus)] + [p.r for p in family_points(bd.fam_minus)]
    rad = s_radius(bd.fam_plus, r) if avoid_radius is None else avoid_radius
    out = []
    k = 0
    while len(out) < count and k < 20 * count:
        k += 1
        # points on both sides of r at radii between rad/2 and rad
        t = 0.5 + 0.5 * ((k * 0.6180339887498949) % 1.0)
        s = r + (t * rad if k % 2 else -t * rad)
        if all(abs(s - q) > 0.2 * rad for q in others):
            out.append(s)
    return out


def im_T_at(fam: CouplingFamily, s: float) -> np.ndarray:
    return _im_part(fam.T_at([s])[0])


# ---------------------------------------------------------------------------
# c coefficients

@dataclass
class CCoefficients:
    sign: str
    c: list             # c_j for j = 2..k, from the nilpotent formula
    c_fit: list         # the same from the sampled rational function
    fit_residual: float
    agreement: float    # max |c - c_fit| relative to max(1, |c|)


def c_coefficients(m: OperatorModel, lam: float, r_lambda: float, u, sign: str = "+",
                   bd: Optional[BoundaryData] = None) -> CCoefficients:
    """c_j = Im <u, J nilA^{j-1} u>, j = 2..k, checked against samples of
    s -> <Ju, Im T_{lambda +/- i0}(H_s) J u>."""
    bd = boundary_data(m, lam, r_lambda) if bd is None else bd
    rec = bd.rec(sign)
    u = np.asarray(u, dtype=complex).reshape(-1)
    U = range_basis(rec.P, 1e-9)
    res = np.linalg.norm(u - U @ (U.conj().T @ u)) / max(np.linalg.norm(u), 1e-300)
    if res > 1e-7:
        raise VectorNotInSpace(f"vector is not in the resonance space (residual {res:.2e})")
    J = bd.J
    k = max(rec.order_d, 1)
    c = []
    X = rec.nilA.copy()
    for _ in range(2, k + 1):
        c.append(float(np.vdot(u, J @ X @ u).imag))
        X = X @ rec.nilA
    ss = probe_values(bd, max(2 * k, 4))
    fam = bd.fam(sign)
    Ju = J @ u
    f = np.array([np.vdot(Ju, im_T_at(fam, s) @ Ju).real for s in ss])
    js = list(range(2, k + 1))
    if js:
        basis = np.array([[(s - bd.r_lambda) ** (-j) for j in js] for s in ss])
        c_fit, *_ = np.linalg.lstsq(basis, f, rcond=None)
        fit = basis @ c_fit
    else:
        c_fit, fit = np.zeros(0), np.zeros_like(f)
    fscale = max(1.0, np.max(np.abs(f)))
    resid = float(np.max(np.abs(f - fit)) / fscale) if len(f) else 0.0
    cs = max([1.0] + [abs(x) for x in c])
    agree = float(max([0.0] + [abs(a - b) for a, b in zip(c, c_fit)]) / cs)
    return CCoefficients(sign, c, [float(x) for x in c_fit], resid, agree)


# ---------------------------------------------------------------------------
# type-I vectors

@dataclass
class TypeISpace:
    basis: np.ndarray          # columns, orthonormal, inside Upsilon_{l+i0}
    criterion5_residual: float  # max |(P+ - P-) u|, |(nilA+^j - nilA-^j) u| over the basis
    magnitude: float           # ||sqrt(Im T) J P+|| / (||J|| ||P+||) at the probes
    probes: list


def _sqrt_im(fam: CouplingFamily, s: float) -> np.ndarray:
    """sqrt(Im T_{l+i0}(H_s)); Im T >= 0 up to rounding relative to ||T||."""
    T = fam.T_at([s])[0]
    im = _im_part(T)
    vals, vecs = np.linalg.eigh(0.5 * (im + im.conj().T))
    if vals[0] < -1e-6 * max(opnorm(T), 1e-300):
        raise NotPSD(f"Im T has eigenvalue {vals[0]:.3e}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.conj().T


def type_I_space(m: OperatorModel, lam: float, r_lambda: float,
                 bd: Optional[BoundaryData] = None) -> TypeISpace:
    """Vectors u of Upsilon_{l+i0} with sqrt(Im T_{l+i0}(H_s)) J u = 0 at two probes."""
    bd = boundary_data(m, lam, r_lambda) if bd is None else bd
    tol = tolerances()
    P = bd.P_plus
    U = range_basis(P, 1e-9)
    J = bd.J
    probes = probe_values(bd, 2)
    rows = []
    mags = []
    # sqrt(Im T) scales like sqrt(||T||); thresholds are relative to that
    ref = max(max(np.sqrt(opnorm(bd.fam_plus.T_at([s])[0])) for s in probes) * opnorm(J), 1e-300)
    for s in probes:
        S = _sqrt_im(bd.fam_plus, s)
        rows.append(S @ J @ U)
        mags.append(opnorm(S @ J @ P) / (ref * max(opnorm(P), 1e-300)))
    stack = np.vstack(rows)
    _, sv, vh = np.linalg.svd(stack)
    keep = [i for i in range(U.shape[1]) if (sv[i] if i < len(sv) else 0.0) <= tol.type_one * ref]
    null = vh[keep].conj().T if keep else np.zeros((U.shape[1], 0))
    basis = U @ null
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    # criterion (5): A+(s) u = A-(s) u, equivalently P and nilA powers agree on u
    resid = 0.0
    if basis.shape[1]:
        d = max(bd.rec_plus.order_d, bd.rec_minus.order_d)
        Xp, Xm = bd.P_plus.copy(), bd.P_minus.copy()
        for _ in range(d + 1):
            resid = max(resid, opnorm((Xp - Xm) @ basis) / max(1.0, opnorm(Xp)))
            Xp, Xm = Xp @ bd.rec_plus.nilA, Xm @ bd.rec_minus.nilA
    return TypeISpace(basis, resid, max(mags), probes)


# ---------------------------------------------------------------------------
# depth and property L

@dataclass
class DepthReport:
    depth_table: list          # (order, depth) per Jordan-basis vector
    jordan_basis: np.ndarray   # columns u^(1..L) of each chain, chain after chain
    clLw: np.ndarray           # basis (columns) of the property-L space
    orthogonality_residual: float


def _restricted(nil: np.ndarray, U: np.ndarray) -> np.ndarray:
    return U.conj().T @ nil @ U


def _split_svd(X: np.ndarray, thr: float):
    """(range basis, kernel basis) of X with singular values above ``thr``."""
    u, sv, vh = np.linalg.svd(X)
    rank = int(np.sum(sv > thr))
    return u[:, :rank], vh[rank:].conj().T


def jordan_chains(K: np.ndarray, tol: float = NIL_RANK_TOL, ref: float = 1.0) -> list[list[np.ndarray]]:
    """Jordan chains [u1, ..., uL] (u1 = K^{L-1} uL, K u1 = 0) of a nilpotent K.

    Ranks of K^j use the threshold tol * max(||K||, ref)^j.
    """
    N = K.shape[0]
    ref = max(opnorm(K), ref)
    kernels = [np.zeros((N, 0), dtype=complex)]
    X = np.eye(N, dtype=complex)
    while kernels[-1].shape[1] < N:
        X = X @ K
        kernels.append(_split_svd(X, tol * ref ** len(kernels))[1])
    d = len(kernels) - 1
    chains = []
    covered = {j: [] for j in range(1, d + 1)}
    for j in range(d, 0, -1):
        below = np.hstack([kernels[j - 1]] + [v.reshape(-1, 1) for v in covered[j]])
        qb = range_basis(below, 1e-9) if below.shape[1] else below
        W = kernels[j]
        need = W.shape[1] - qb.shape[1]
        if need <= 0:
            continue
        proj = W - qb @ (qb.conj().T @ W) if qb.shape[1] else W
        tops = range_basis(proj, 1e-8)[:, :need]
        for t in tops.T:
            chain = [t]
            for _ in range(j - 1):
                chain.insert(0, K @ chain[0])
            for lvl, v in enumerate(chain[:-1], start=1):
                covered[lvl].append(v)
            chains.append(chain)
    return chains


def depth_of(u: np.ndarray, K: np.ndarray, max_power: int, tol: float = 1e-7,
             rank_tol: float = NIL_RANK_TOL, ref: float = 1.0) -> int:
    """max k with u in range(K^k), by least-squares residual."""
    depth = 0
    ref = max(opnorm(K), ref)
    X = np.eye(K.shape[0], dtype=complex)
    nu = max(np.linalg.norm(u), 1e-300)
    for k in range(1, max_power + 1):
        X = X @ K
        R = _split_svd(X, rank_tol * ref ** k)[0]
        if R.shape[1] == 0 or np.linalg.norm(u - R @ (R.conj().T @ u)) / nu >= tol:
            break
        depth = k
    return depth


def depth_and_L(m: OperatorModel, lam: float, r_lambda: float, sign: str = "+",
                bd: Optional[BoundaryData] = None) -> DepthReport:
    bd = boundary_data(m, lam, r_lambda) if bd is None else bd
    rec = bd.rec(sign)
    U = range_basis(rec.P, 1e-9)
    K = _restricted(rec.nilA, U)
    ref = max(1.0, opnorm(rec.P))
    chains = jordan_chains(K, ref=ref)
    table, vecs, L = [], [], []
    for chain in chains:
        for order, v in enumerate(chain, start=1):
            dep = depth_of(v, K, len(K), ref=ref)
            table.append((order, dep))
            vecs.append(U @ v)
            if dep >= order:
                L.append(U @ v)
    jb = np.column_stack(vecs) if vecs else np.zeros((U.shape[0], 0), dtype=complex)
    clLw = range_basis(np.column_stack(L), 1e-9) if L else np.zeros((U.shape[0], 0), dtype=complex)
    J = bd.J
    resid = 0.0
    if L:
        Ln = [v / np.linalg.norm(v) for v in L]
        resid = max(abs(np.vdot(a, J @ b)) for a in Ln for b in Ln) / max(1.0, opnorm(J))
    return DepthReport(table, jb, clLw, float(resid))


# ---------------------------------------------------------------------------
# point classification

@dataclass
class BoundaryClassification:
    type_I_point: bool
    property_S: bool
    property_P: bool
    dim_type_I_space: int
    pp_spectrum_ok: bool
    depth_table: list
    clLw_dim: int
    indeterminate: bool = False
    N: int = 0
    order_d: int = 0
    diagnostics: dict = field(default_factory=dict)


def pp_spectrum(Pp: np.ndarray, Pm: np.ndarray, N: int, tol: float = 1e-6):
    """(ok, cluster centres) for the spectrum of P+ P-."""
    ep = eig_general(Pp @ Pm, vectors=False)
    ones = 0
    ok = True
    for c, k in zip(ep.values, ep.multiplicities):
        if abs(c - 1) <= tol:
            ones += int(k)
        elif abs(c) > tol:
            ok = False
    return ok and ones == N, ep.values


def property_M(bd: BoundaryData) -> float:
    """Smallest singular value of P_{+-} restricted to Upsilon_{-+}, relative to the largest."""
    out = np.inf
    for A, B in ((bd.P_plus, bd.P_minus), (bd.P_minus, bd.P_plus)):
        U = range_basis(B, 1e-9)
        sv = np.linalg.svd(A @ U, compute_uv=False)
        out = min(out, sv[-1] / max(sv[0], 1e-300))
    return float(out)


def classify_point(m: OperatorModel, lam: float, r_lambda: float,
                   bd: Optional[BoundaryData] = None) -> BoundaryClassification:
    bd = boundary_data(m, lam, r_lambda) if bd is None else bd
    tol = tolerances()
    Pp, Pm = bd.P_plus, bd.P_minus
    Qp, Qm = bd.rec_plus.Q, bd.rec_minus.Q
    J = bd.J
    N = bd.rec_plus.alg_mult_N
    scale = max(1.0, opnorm(Pp), opnorm(Pm))
    s_res = max(opnorm(Pp @ Pm - Pp), opnorm(Pm @ Pp - Pm)) / scale ** 2
    prop_S = s_res < tol.property_tol
    p_res = opnorm(Pp - Pm) / scale
    prop_P = p_res < tol.property_tol

    t1 = type_I_space(m, lam, r_lambda, bd)
    mag = t1.magnitude
    type_I = mag < tol.type_one
    indeterminate = tol.type_one <= mag < tol.type_one_band
    ok_pp, pp_vals = pp_spectrum(Pp, Pm, N)
    dep = depth_and_L(m, lam, r_lambda, "+", bd)

    diag = {
        "property_S_residual": s_res,
        "property_P_residual": p_res,
        "type_I_magnitude": mag,
        "type_I_criterion5_residual": t1.criterion5_residual,
        "pp_eigenvalues": [complex(x) for x in pp_vals],
        "property_M_min_singular": property_M(bd),
        "clLw_orthogonality": dep.orthogonality_residual,
        "principal_angles_kernels": _kernel_angles(Pp, Pm),
    }
    # Im T J P = 0 form of the type-I test and sqrt(Im T) J P sqrt(Im T) = 0
    s0 = t1.probes[0]
    imT = im_T_at(bd.fam_plus, s0)
    S = _sqrt_im(bd.fam_plus, s0)
    nJ = max(opnorm(J), 1e-300)
    nT = max(opnorm(bd.fam_plus.T_at([s0])[0]), 1e-300)
    diag["imT_JP"] = opnorm(imT @ J @ Pp) / (nT * nJ * scale)
    diag["sqrtImT_JP_sqrtImT"] = max(opnorm(S @ J @ P @ S) / (nT * nJ * scale) for P in (Pp, Pm))
    # intersection of the two resonance spaces (open question: equal to Upsilon^I?)
    Up, Um = range_basis(Pp, 1e-9), range_basis(Pm, 1e-9)
    diag["dim_intersection"] = int(Up.shape[1] + Um.shape[1] - range_basis(np.hstack([Up, Um]), 1e-8).shape[1])
    if prop_S:
        Mmp, Mpm = Qm @ J @ Pp, Qp @ J @ Pm
        sc = nJ * scale ** 2
        diag["property_S_items"] = {
            "iv": max(opnorm(Qp @ Qm - Qm), opnorm(Qm @ Qp - Qp)) / scale ** 2,
            "v": opnorm(Mmp - J @ Pp) / sc,
            "vi": opnorm(Mpm - J @ Pm) / sc,
            "vii": opnorm(Mmp - Qm @ J) / sc,
            "viii": opnorm(Mpm - Qp @ J) / sc,
            "ix": opnorm(Mmp - Mpm) / sc,
        }
    return BoundaryClassification(
        type_I_point=bool(type_I), property_S=bool(prop_S), property_P=bool(prop_P),
        dim_type_I_space=int(t1.basis.shape[1]), pp_spectrum_ok=bool(ok_pp),
        depth_table=dep.depth_table, clLw_dim=int(dep.clLw.shape[1]), indeterminate=bool(indeterminate),
        N=N, order_d=bd.rec_plus.order_d, diagnostics=diag,
    )


def _kernel_angles(Pp, Pm) -> list:
    kp, km = kernel_basis(Pp, 1e-9), kernel_basis(Pm, 1e-9)
    if kp.shape[1] == 0 or km.shape[1] == 0:
        return []
    sv = np.linalg.svd(kp.conj().T @ km, compute_uv=False)
    return [float(np.arccos(min(1.0, x))) for x in sv]
