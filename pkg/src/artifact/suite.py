"""Randomized verification suite and the built-in reference examples.

Every trial draws one finite pencil from a seeded generator and runs a fixed
list of property checks.  Conditioning errors are counted per property, any
other exception or a violated bound is a failure with an instance dump.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import classify_point
from .embedded import (embedded_diagnostics, rank_one_analysis, scalar_model,
                       witness_property_S_fail, witness_S_not_P)
from .errors import CONDITIONING_ERRORS, UnknownExample
from .index_flow import (krein_sign_check, point_set_matrix, resonance_index, total_resonance_index)
from .linalg_core import opnorm
from .operator_models import CouplingFamily, FinitePencil, SpectralPoint, model_T
from .reporting import triple_crossing_pencil, four_level_pencil, model_to_dict, to_jsonable
from .resonance import family_points, point_structure, record_invariants
from .tolerances import tolerances

PROPERTIES = ("resolvent_identity", "krein", "riesz_algebra", "positivity", "three_way",
              "uturn", "flow_identity", "F_independence", "boundary_type_I")


def random_pencil(rng: np.random.Generator, lo: int = 2, hi: int = 8, a: float = 0.0,
                  b: float = 1.0):
    """(pencil, lambda): complex Hermitian H0, V of random rank and inertia, lambda
    kept away from the eigenvalues of H_a and H_b."""
    n = int(rng.integers(lo, hi + 1))
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H0 = 0.5 * (X + X.conj().T)
    k = int(rng.integers(1, n + 1))
    Y = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    V = Y @ np.diag(rng.choice([-1.0, 1.0], k)) @ Y.conj().T / n
    p = FinitePencil(H0, V)
    ends = np.concatenate([np.linalg.eigvalsh(p.H(a)), np.linalg.eigvalsh(p.H(b))])
    while True:
        lam = float(rng.normal())
        if np.min(np.abs(ends - lam)) > 1e-6 * max(1.0, np.max(np.abs(ends))):
            return p, lam


@dataclass
class Tally:
    passed: int = 0
    failed: int = 0
    errored: int = 0


@dataclass
class VerifySummary:
    seed: int
    trials: int
    dims: tuple
    tallies: dict = field(default_factory=lambda: {k: Tally() for k in PROPERTIES})
    failures: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "trials": self.trials, "dims": list(self.dims), "ok": self.ok,
            "properties": {k: vars(t) for k, t in self.tallies.items()},
            "failures": self.failures, "errors": self.errors,
        }

    def lines(self) -> list[str]:
        out = []
        for k, t in self.tallies.items():
            if t.passed + t.failed + t.errored == 0:
                continue
            out.append(f"{k:20s} pass {t.passed:4d}  fail {t.failed:4d}  errored {t.errored:4d}")
        return out


def _check_resolvent(p, z, rng, thr):
    fam = CouplingFamily.at(p, z)
    s2 = float(rng.normal())
    lhs = fam.A_at([s2])[0]
    rhs = model_T(p, z, s2) @ p.J
    res = opnorm(lhs - rhs) / max(1.0, opnorm(rhs))
    return res <= thr, {"residual": res, "s": s2}


def _check_krein(p, z, rng, thr):
    ri, sv, agree = krein_sign_check(p, z)
    return agree, {"rindex": ri, "signature_V": sv}


def _check_riesz(p, z, rng, thr):
    fam = CouplingFamily.at(p, z)
    recs = [point_structure(p, z, cl.r, fam) for cl in family_points(fam)]
    worst = {}
    ok = True
    for rec in recs:
        inv = record_invariants(rec, fam)
        ok &= bool(inv.pop("d_m_N"))
        for k, v in inv.items():
            worst[k] = max(worst.get(k, 0.0), v)
    for i, r1 in enumerate(recs):
        for r2 in recs[i + 1:]:
            v = opnorm(r1.P @ r2.P) / max(1.0, opnorm(r1.P) * opnorm(r2.P))
            worst["orthogonality"] = max(worst.get("orthogonality", 0.0), v)
    return ok and all(v <= thr for v in worst.values()), worst


def _check_positivity(p, z, rng, thr):
    fam = CouplingFamily.at(p, z)
    up = [cl.r for cl in family_points(fam) if cl.r.imag > 0]
    if not up:
        return True, {"up_points": 0}
    M, P, _ = point_set_matrix(p, z, up)
    H = z.y * M
    sc = max(1.0, opnorm(H))
    herm = opnorm(H - H.conj().T) / sc
    w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    rank_H = int(np.sum(np.abs(w) > 1e-8 * sc))
    rank_P = int(np.linalg.matrix_rank(P, 1e-8 * max(1.0, opnorm(P))))
    ok = herm <= 10 * thr and w.min() >= -1e-8 * sc and rank_H == rank_P
    return ok, {"min_eig": float(w.min()), "rank_matrix": rank_H, "rank_P": rank_P, "hermitian": herm}


def verify(seed: int = 42, trials: int = 50, dims: tuple = (2, 6), corrupt: bool = False) -> VerifySummary:
    """Run ``trials`` random instances; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    summary = VerifySummary(seed, trials, tuple(dims))
    thr = 1e-30 if corrupt else tolerances().property_tol

    def run(name, trial, inst, fn, *args):
        t = summary.tallies[name]
        try:
            ok, detail = fn(*args)
        except CONDITIONING_ERRORS as exc:
            t.errored += 1
            summary.errors.append({"trial": trial, "property": name, "error": exc.code})
            return None
        except Exception as exc:  # a failure, reported with the instance
            ok, detail = False, {"exception": f"{type(exc).__name__}: {exc}"}
        if ok:
            t.passed += 1
        else:
            t.failed += 1
            summary.failures.append(to_jsonable({"trial": trial, "property": name, "detail": detail,
                                                 "instance": inst}))
        return ok

    for trial in range(trials):
        p, lam = random_pencil(rng, dims[0], dims[1])
        y = float(10 ** rng.uniform(-2, 0))
        z = SpectralPoint.off_axis(lam, y)
        zz = SpectralPoint.off_axis(lam, float(rng.choice([-1.0, 1.0])) * y)
        F = np.eye(p.n) + 0.3 * (rng.normal(size=(p.n, p.n)) + 1j * rng.normal(size=(p.n, p.n))) / np.sqrt(p.n)
        inst = {"model": model_to_dict(p), "lambda": lam, "y": y}
        run("resolvent_identity", trial, inst, _check_resolvent, p, z, rng, thr)
        run("krein", trial, inst, _check_krein, p, z, rng, thr)
        run("riesz_algebra", trial, inst, _check_riesz, p, zz, rng, thr)
        run("positivity", trial, inst, _check_positivity, p, zz, rng, thr)

        holder = {}

        def flow():
            holder["fr"] = total_resonance_index(p, lam, 0.0, 1.0)
            fr = holder["fr"]
            return fr.agreement, {"total": fr.total, "ssf": fr.ssf_value, "tracking": fr.tracking_value}
        run("flow_identity", trial, inst, flow)
        fr = holder.get("fr")
        if fr is None:
            continue
        for r, rep in fr.per_point:
            pinst = dict(inst, r_lambda=r)
            run("three_way", trial, pinst, lambda rep=rep: (rep.consistency, {
                "splitting": rep.ind_splitting, "rindex": rep.ind_rindex, "signature": rep.ind_signature}))
            run("uturn", trial, pinst, lambda rep=rep: (rep.uturn_ok, {
                "index": rep.ind_splitting, "dim_upsilon1": rep.dim_upsilon1}))
            run("boundary_type_I", trial, pinst, _check_type_I, p, lam, r, thr)

        def f_indep():
            q = FinitePencil(p.H0, p.V, F=F)
            fr2 = total_resonance_index(q, lam, 0.0, 1.0, with_oracles=False)
            a = [rep.ind_splitting for _, rep in fr.per_point]
            b = [rep.ind_splitting for _, rep in fr2.per_point]
            return a == b, {"indices": a, "indices_with_F": b}
        run("F_independence", trial, inst, f_indep)
    return summary


def _check_type_I(p, lam, r, thr):
    # outside essential spectrum every real point is of type I, with S and P
    bc = classify_point(p, lam, r)
    ok = (bc.type_I_point and bc.property_S and bc.property_P and bc.pp_spectrum_ok
          and bc.diagnostics["property_P_residual"] <= max(thr, 1e-30))
    return ok, {"type_I": bc.type_I_point, "S": bc.property_S, "P": bc.property_P,
                "P_residual": bc.diagnostics["property_P_residual"]}


# ---------------------------------------------------------------------------
# built-in reference examples

def _finite_point(p, r=0.0, lam=0.0):
    rep = resonance_index(p, lam, r)
    rec = point_structure(p, SpectralPoint.plus_i0(lam), r)
    return rep, rec.order_d


def _ex_triple():
    measured = {}
    for eps in (0.5, 1.0):
        p = triple_crossing_pencil(eps)
        rep, d = _finite_point(p)
        fr = total_resonance_index(p, 0.0, -0.5, 0.5)
        measured[f"eps={eps}"] = {"index": rep.ind_splitting, "consistency": rep.consistency,
                                  "total": fr.total, "spectral_flow": fr.tracking_value, "order": d}
    ok = all(v["index"] == 1 and v["consistency"] and v["total"] == 1 and v["spectral_flow"] == 1
             for v in measured.values())
    return {"index": 1}, measured, ok


def _ex_four_level(which, order, index):
    def run():
        rep, d = _finite_point(four_level_pencil(which))
        measured = {"order": d, "index": rep.ind_splitting, "rindex": rep.ind_rindex,
                    "signature": rep.ind_signature, "N_plus": rep.N_plus, "N_minus": rep.N_minus}
        return {"order": order, "index": index}, measured, (d, rep.ind_splitting) == (order, index)
    return run


def _ex_alpha(alpha, index):
    def run():
        ra = rank_one_analysis(scalar_model(alpha), with_model=True)
        measured = {"index": ra.index, "N_plus": ra.n_plus, "N_minus": ra.n_minus,
                    "slope": ra.slope, "slope_ok": ra.slope_ok, "contour_index": ra.model_index}
        ref = {"index": index}
        ok = ra.index == index and ra.model_index == index and ra.slope_ok
        if alpha == 0:
            ref.update(N_plus=1, N_minus=1)
            ok = ok and ra.n_plus == 1 and ra.n_minus == 1
        return ref, measured, ok
    return run


def _ex_S_fail():
    e = witness_property_S_fail()
    bc = classify_point(e, e.lam, e.r_lambda)
    order = embedded_diagnostics(e).order_predicted
    return ({"property_S": False}, {"property_S": bc.property_S, "order": order, "N": bc.N},
            not bc.property_S)


def _ex_S_noP():
    e = witness_S_not_P()
    bc = classify_point(e, e.lam, e.r_lambda)
    return ({"property_S": True, "property_P": False, "type_I_point": False},
            {"property_S": bc.property_S, "property_P": bc.property_P, "type_I_point": bc.type_I_point},
            bc.property_S and not bc.property_P and not bc.type_I_point)


EXAMPLES = {
    "paper-14-1": _ex_triple,
    "paper-14-2-v2": _ex_four_level("v2", 3, 1),
    "paper-14-2-v3": _ex_four_level("v3", 4, 0),
    "paper-13-4-alpha-pos": _ex_alpha(1.0, 1),
    "paper-13-4-alpha-neg": _ex_alpha(-1.0, -1),
    "paper-13-4-alpha-zero": _ex_alpha(0.0, 0),
    "paper-13-3-2-S-fail": _ex_S_fail,
    "paper-13-3-2-S-noP": _ex_S_noP,
}


def run_example(name: str) -> dict:
    if name not in EXAMPLES:
        raise UnknownExample(f"unknown example {name!r}; known: {', '.join(EXAMPLES)}")
    ref, measured, ok = EXAMPLES[name]()
    return to_jsonable({"example": name, "reference": ref, "measured": measured, "match": bool(ok)})
