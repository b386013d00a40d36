"""Adapters from :class:`ConicProgram` to native conic solvers."""

from __future__ import annotations

import os
import time
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from qextrap.solver.program import FREE, NONNEG, PSD, ConicProgram, SolveResult, Tolerances, svec_order

BACKENDS: dict[str, Callable] = {}


def backend(name: str):
    def register(fn):
        BACKENDS[name] = fn
        return fn

    return register


def default_backend() -> str:
    return os.environ.get("QEXTRAP_BACKEND", "clarabel").strip().lower() or "clarabel"


def solve(p: ConicProgram, backend: Optional[str] = None, tol: Optional[Tolerances] = None, threads: int = 1) -> SolveResult:
    """Solve ``p`` with the named backend (default from ``QEXTRAP_BACKEND``)."""
    name = (backend or default_backend()).lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}")
    tol = tol or Tolerances()
    sign = -1.0 if p.sense == "max" else 1.0
    t0 = time.perf_counter()
    try:
        res = BACKENDS[name](p, sign * p.c, tol, threads)
    except Exception as exc:  # never crash on valid input
        return SolveResult("numerical-failure", float("nan"), None, info={"error": repr(exc), "backend": name})
    res.info.setdefault("backend", name)
    res.info["wall_time"] = time.perf_counter() - t0
    res.info["n_vars"] = p.n_vars
    res.info["n_eq"] = int(p.b_eq.size)
    res.info["n_in"] = int(p.b_in.size)
    if res.x is not None:
        res.objective = float(p.c @ res.x + p.c0)
    return res


def _scale(n: int) -> np.ndarray:
    iu, ju = svec_order(n)
    return np.where(iu == ju, 1.0, np.sqrt(2.0))


# settings tried in order until one run ends in a definite status; the
# default equilibration occasionally stalls on degenerate optimal faces
CLARABEL_RETRIES = (
    {},
    {"equilibrate_enable": False},
    {"static_regularization_constant": 1e-7},
    {"direct_solve_method": "faer"},
)


@backend("clarabel")
def _clarabel(p: ConicProgram, q: np.ndarray, tol: Tolerances, threads: int) -> SolveResult:
    import clarabel

    n = p.n_vars
    blocks = [p.A_eq, p.A_in]
    rhs = [p.b_eq, p.b_in]
    cones = []
    if p.b_eq.size:
        cones.append(clarabel.ZeroConeT(int(p.b_eq.size)))
    if p.b_in.size:
        cones.append(clarabel.NonnegativeConeT(int(p.b_in.size)))
    off = 0
    for cn in p.cones:
        ln = cn.length
        if cn.kind == NONNEG:
            rows = sp.csr_matrix((-np.ones(ln), (np.arange(ln), off + np.arange(ln))), shape=(ln, n))
            blocks.append(rows)
            rhs.append(np.zeros(ln))
            cones.append(clarabel.NonnegativeConeT(ln))
        elif cn.kind == PSD:
            rows = sp.csr_matrix((-_scale(cn.size), (np.arange(ln), off + np.arange(ln))), shape=(ln, n))
            blocks.append(rows)
            rhs.append(np.zeros(ln))
            cones.append(clarabel.PSDTriangleConeT(cn.size))
        off += ln
    A = sp.vstack(blocks, format="csc")
    b = np.concatenate(rhs)
    P = sp.csc_matrix((n, n))
    if A.shape[0] == 0:
        # nothing constrains x: bounded only if q vanishes
        if np.any(q != 0):
            return SolveResult("unbounded", float("nan"), None)
        return SolveResult("optimal", 0.0, np.zeros(n), residuals={"primal": 0.0, "dual": 0.0, "gap": 0.0})
    ne, ni = p.b_eq.size, p.b_in.size
    tries = []
    best = None
    for extra in CLARABEL_RETRIES:
        s = clarabel.DefaultSettings()
        s.verbose = False
        s.tol_feas = min(tol.primal, tol.dual)
        s.tol_gap_abs = tol.gap
        s.tol_gap_rel = tol.gap
        s.max_iter = 400
        s.max_threads = max(1, int(threads))
        for k, v in extra.items():
            setattr(s, k, v)
        sol = clarabel.DefaultSolver(P, np.asarray(q, dtype=float), A, b, cones, s).solve()
        st = str(sol.status)
        tries.append(st)
        pobj, dobj = float(sol.obj_val), float(sol.obj_val_dual)
        gap = abs(pobj - dobj) / max(1.0, min(abs(pobj), abs(dobj)))
        res = {"primal": float(sol.r_prim), "dual": float(sol.r_dual), "gap": gap}
        if st == "Solved" or (st == "AlmostSolved" and res["primal"] <= tol.primal and res["dual"] <= tol.dual):
            status = "optimal"
        elif st == "PrimalInfeasible":
            status = "infeasible"
        elif st == "DualInfeasible":
            status = "unbounded"
        else:
            status = "numerical-failure"
        info = {"solver_status": st, "iterations": int(sol.iterations), "solve_time": float(sol.solve_time), "attempts": tries}
        z = np.array(sol.z)
        best = SolveResult(status, float("nan"), np.array(sol.x), z[:ne], z[ne : ne + ni], res, info)
        if status != "numerical-failure":
            break
    else:
        for st, verdict in (("AlmostPrimalInfeasible", "infeasible"), ("AlmostDualInfeasible", "unbounded")):
            if st in tries:
                best.status = verdict
                break
    return best


def _independent_rows(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    from scipy.linalg import qr

    if A.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, r, piv = qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > tol * max(1.0, d[0] if d.size else 1.0)))
    return np.sort(piv[:rank])


@backend("cvxopt")
def _cvxopt(p: ConicProgram, q: np.ndarray, tol: Tolerances, threads: int) -> SolveResult:
    import cvxopt
    from cvxopt import solvers

    n = p.n_vars
    g_rows = [p.A_in.toarray()]
    h = [p.b_in]
    n_lin = p.b_in.size
    psd_sizes = []
    off = 0
    for cn in p.cones:
        if cn.kind == NONNEG:
            g = np.zeros((cn.size, n))
            g[np.arange(cn.size), off + np.arange(cn.size)] = -1.0
            g_rows.append(g)
            h.append(np.zeros(cn.size))
            n_lin += cn.size
        off += cn.length
    off = 0
    for cn in p.cones:
        if cn.kind == PSD:
            k = cn.size
            g = np.zeros((k * k, n))
            iu, ju = svec_order(k)
            for pos, (i, j) in enumerate(zip(iu, ju)):
                g[j * k + i, off + pos] = -1.0
                g[i * k + j, off + pos] = -1.0
            g_rows.append(g)
            h.append(np.zeros(k * k))
            psd_sizes.append(k)
        off += cn.length
    G = np.vstack(g_rows) if g_rows else np.zeros((0, n))
    hv = np.concatenate(h) if h else np.zeros(0)
    Aeq = p.A_eq.toarray()
    keep = _independent_rows(Aeq)
    Aeq, beq = Aeq[keep], p.b_eq[keep]
    opts = {"show_progress": False, "abstol": tol.gap, "reltol": tol.gap, "feastol": min(tol.primal, tol.dual), "maxiters": 200}
    dims = {"l": int(n_lin), "q": [], "s": psd_sizes}
    args = [cvxopt.matrix(np.asarray(q, dtype=float)), cvxopt.matrix(G), cvxopt.matrix(hv), dims]
    if beq.size:
        args += [cvxopt.matrix(Aeq), cvxopt.matrix(beq)]
    out = solvers.conelp(*args, options=opts)
    st = out["status"]
    x = np.array(out["x"]).reshape(-1) if out["x"] is not None else None
    res = {
        "primal": float(out.get("primal infeasibility") or np.nan),
        "dual": float(out.get("dual infeasibility") or np.nan),
        "gap": float(out.get("relative gap") or np.nan) if out.get("relative gap") is not None else float("nan"),
    }
    status = {"optimal": "optimal", "primal infeasible": "infeasible", "dual infeasible": "unbounded"}.get(st, "numerical-failure")
    if status == "optimal" and x is None:
        status = "numerical-failure"
    return SolveResult(status, float("nan"), x, residuals=res, info={"solver_status": st, "iterations": int(out.get("iterations", 0))})
