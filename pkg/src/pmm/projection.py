"""Projection of an anchor onto the solver's per-iteration target set.

The target set stacks minorant cut rows (F x <= g), equality rows
(A x = b), and optional epigraph liftings for multi-block pools.  Two
routes compute the Euclidean projection: a direct QP in the original
variables, and the reduced QP over the multiplier space (built from the
Gram matrices F F^T, F A^T, A A^T) whose solution recovers
x_next = anchor - F^T lambda - A^T nu.  Both sit on the embedded dense
Mehrotra predictor-corrector QP solver at the bottom of this module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import NumericalError, spd_solve
from .minorant import AffineCut, CutPool


class EmptyTargetSet(RuntimeError):
    """The projection target set is empty: inconsistent minorants or incorrect f_star."""


@dataclass
class LiftBlock:
    weight: float
    clip_at_zero: bool
    cuts: list[AffineCut]


@dataclass
class LiftedPool:
    """One multi-block pool: sum over blocks of weight*max(cuts) <= level."""

    level: float
    blocks: list[LiftBlock]

    def cut_rows(self) -> int:
        extra = sum(1 for b in self.blocks if b.clip_at_zero)
        return sum(len(b.cuts) for b in self.blocks) + extra + 1


@dataclass
class ProjectionProblem:
    """Data of one projection: min ||x - anchor||^2 s.t. Fx <= g, Ax = b, lifts."""

    F: np.ndarray
    g: np.ndarray
    A: np.ndarray
    b: np.ndarray
    anchor: np.ndarray
    lifts: list[LiftedPool] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.anchor.shape[0]

    @property
    def q(self) -> int:
        return self.F.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def total_cut_rows(self) -> int:
        return self.q + sum(lp.cut_rows() for lp in self.lifts)

    def max_violation(self, x: np.ndarray) -> float:
        """Worst constraint violation of x over all rows and lifted pools."""
        worst = 0.0
        if self.q:
            worst = max(worst, float(np.max(self.F @ x - self.g)))
        if self.p:
            worst = max(worst, float(np.max(np.abs(self.A @ x - self.b))))
        for lp in self.lifts:
            total = 0.0
            for blk in lp.blocks:
                m = max(c.value(x) for c in blk.cuts)
                if blk.clip_at_zero:
                    m = max(m, 0.0)
                total += blk.weight * m
            worst = max(worst, total - lp.level)
        return worst


@dataclass
class QpSolution:
    """Primal/dual answer of one QP solve; kkt_residual is reported honestly."""

    primal: np.ndarray
    ineq_duals: np.ndarray
    eq_duals: np.ndarray
    kkt_residual: float
    iterations: int
    status: str = "optimal"


_TRIVIAL_TOL = 1e-12


def assemble(objective_pool: CutPool | None, constraint_pools: list[CutPool],
             f_star: float, A: np.ndarray, b: np.ndarray,
             anchor: np.ndarray) -> ProjectionProblem:
    """Stack pool cuts into projection data.

    Objective cuts get right-hand level f_star (row a.x <= f_star - beta);
    constraint cuts get level 0.  Zero-coefficient rows are checked and
    dropped; a statically unsatisfiable row raises EmptyTargetSet.
    Multi-block pools become epigraph lifts.
    """
    anchor = np.asarray(anchor, dtype=float)
    n = anchor.shape[0]
    rows: list[np.ndarray] = []
    levels: list[float] = []
    lifts: list[LiftedPool] = []

    pairs: list[tuple[CutPool, float]] = []
    if objective_pool is not None:
        pairs.append((objective_pool, float(f_star)))
    pairs.extend((pool, 0.0) for pool in constraint_pools)

    for pool, level in pairs:
        live = [blk for blk in pool.blocks if blk.cuts and blk.weight > 0.0]
        if not live:
            if level < -_TRIVIAL_TOL:
                raise EmptyTargetSet(
                    "inconsistent minorants or incorrect f_star: "
                    f"constant minorant 0 exceeds level {level}")
            continue
        if len(live) == 1:
            blk = live[0]
            if blk.clip_at_zero and level < -_TRIVIAL_TOL:
                raise EmptyTargetSet(
                    "inconsistent minorants or incorrect f_star: "
                    f"nonnegative minorant cannot reach level {level}")
            for cut in blk.cuts:
                coeff = blk.weight * cut.coeff
                rhs = level - blk.weight * cut.offset
                if np.max(np.abs(coeff), initial=0.0) == 0.0:
                    if rhs < -_TRIVIAL_TOL:
                        raise EmptyTargetSet(
                            "inconsistent minorants or incorrect f_star: "
                            f"constant cut {blk.weight * cut.offset} exceeds level {level}")
                    continue
                rows.append(coeff)
                levels.append(rhs)
        else:
            lifts.append(LiftedPool(
                level=level,
                blocks=[LiftBlock(blk.weight, blk.clip_at_zero, list(blk.cuts))
                        for blk in live]))

    F = np.array(rows) if rows else np.zeros((0, n))
    g = np.array(levels) if levels else np.zeros(0)
    A = np.asarray(A, dtype=float) if A is not None else np.zeros((0, n))
    if A.size == 0:
        A = A.reshape(0, n)
    b = np.asarray(b, dtype=float) if b is not None else np.zeros(0)
    return ProjectionProblem(F=F, g=g, A=A, b=b, anchor=anchor, lifts=lifts)


def project_dual(P: ProjectionProblem, tol: float = 1e-10) -> tuple[np.ndarray, QpSolution]:
    """Projection via the reduced QP over multipliers u = (lambda, nu).

    Forms the Gram matrix of the stacked rows [F; A] (never an n x n
    matrix), solves min ||F^T lambda + A^T nu||^2 subject to the shifted
    rows, and recovers x_next = anchor - F^T lambda - A^T nu.  Requires a
    lift-free problem.
    """
    if P.lifts:
        raise ValueError("dual reduction requires a lift-free problem")
    q, p = P.q, P.p
    if q + p == 0:
        x = P.anchor.copy()
        return x, QpSolution(x, np.zeros(0), np.zeros(0), 0.0, 0)
    M = np.vstack([P.F, P.A]) if (q and p) else (P.F if q else P.A)
    rhs = np.concatenate([P.g - P.F @ P.anchor, P.A @ P.anchor - P.b])
    # normalize the stacked rows so the Gram matrix has unit diagonal;
    # this only rescales the multipliers, not the projection itself
    d_rows = np.maximum(np.linalg.norm(M, axis=1), 1e-300)
    Ms = M / d_rows[:, None]
    rhs = rhs / d_rows
    K = Ms @ Ms.T
    K = 0.5 * (K + K.T)
    H = 2.0 * K
    f = np.zeros(q + p)
    C_ineq = -K[:q, :] if q else None
    d = rhs[:q] if q else None
    C_eq = K[q:, :] if p else None
    e = rhs[q:] if p else None
    sol = qp_solve(H, f, C_ineq, d, C_eq, e, tol=tol)
    if sol.status == "infeasible":
        raise EmptyTargetSet("inconsistent minorants or incorrect f_star")
    if sol.status != "optimal":
        raise NumericalError(f"reduced projection QP did not converge ({sol.status})")
    u = sol.primal
    x_next = P.anchor - Ms.T @ u
    u_orig = u / d_rows
    return x_next, QpSolution(
        primal=x_next, ineq_duals=u_orig[:q], eq_duals=u_orig[q:],
        kkt_residual=sol.kkt_residual, iterations=sol.iterations, status=sol.status)


def project_primal(P: ProjectionProblem, tol: float = 1e-10) -> tuple[np.ndarray, QpSolution]:
    """Projection by solving the QP directly in x (plus epigraph scalars for lifts)."""
    n = P.n
    n_t = sum(len(lp.blocks) for lp in P.lifts)
    dim = n + n_t

    rows: list[np.ndarray] = []
    rhs: list[float] = []
    if P.q:
        block = np.zeros((P.q, dim))
        block[:, :n] = P.F
        rows.extend(block)
        rhs.extend(P.g.tolist())
    t_index = n
    for lp in P.lifts:
        pool_row = np.zeros(dim)
        for blk in lp.blocks:
            for cut in blk.cuts:
                row = np.zeros(dim)
                row[:n] = blk.weight * cut.coeff
                row[t_index] = -1.0
                rows.append(row)
                rhs.append(-blk.weight * cut.offset)
            if blk.clip_at_zero:
                row = np.zeros(dim)
                row[t_index] = -1.0
                rows.append(row)
                rhs.append(0.0)
            pool_row[t_index] = 1.0
            t_index += 1
        rows.append(pool_row)
        rhs.append(float(lp.level))

    G = np.array(rows) if rows else np.zeros((0, dim))
    h = np.array(rhs) if rhs else np.zeros(0)
    A_full = np.zeros((P.p, dim))
    if P.p:
        A_full[:, :n] = P.A

    H = np.zeros((dim, dim))
    H[:n, :n] = 2.0 * np.eye(n)
    f = np.zeros(dim)
    f[:n] = -2.0 * P.anchor
    x0 = np.zeros(dim)
    x0[:n] = P.anchor

    sol = qp_solve(H, f, G if G.size else None, h if G.size else None,
                   A_full if P.p else None, P.b if P.p else None, tol=tol, x0=x0)
    if sol.status == "infeasible":
        raise EmptyTargetSet("inconsistent minorants or incorrect f_star")
    if sol.status != "optimal":
        raise NumericalError(f"projection QP did not converge ({sol.status})")
    x_next = sol.primal[:n]
    return x_next, QpSolution(
        primal=x_next, ineq_duals=sol.ineq_duals, eq_duals=sol.eq_duals,
        kkt_residual=sol.kkt_residual, iterations=sol.iterations, status=sol.status)


def project_auto(P: ProjectionProblem, tol: float = 1e-10) -> tuple[np.ndarray, QpSolution]:
    """Route to the dual reduction when it is applicable and actually smaller."""
    if P.lifts:
        return project_primal(P, tol=tol)
    if P.q + P.p == 0:
        x = P.anchor.copy()
        return x, QpSolution(x, np.zeros(0), np.zeros(0), 0.0, 0)
    if P.q + P.p <= P.n:
        return project_dual(P, tol=tol)
    return project_primal(P, tol=tol)


# ---------------------------------------------------------------------------
# Embedded dense QP solver
# ---------------------------------------------------------------------------


def _data_scale(*arrays: np.ndarray | None) -> float:
    worst = 0.0
    for arr in arrays:
        if arr is not None and arr.size:
            worst = max(worst, float(np.max(np.abs(arr))))
    return 1.0 + worst


def _kkt_residual(H, f, G, h, A, b, x, z, y) -> float:
    """Max of stationarity, primal feasibility, and complementarity (inf norms)."""
    stat = H @ x + f
    if G is not None:
        stat = stat + G.T @ z
    if A is not None:
        stat = stat + A.T @ y
    worst = float(np.max(np.abs(stat), initial=0.0))
    if G is not None:
        slack = h - G @ x
        worst = max(worst, float(np.max(-slack, initial=0.0)))
        worst = max(worst, float(np.max(-z, initial=0.0)))
        worst = max(worst, float(np.max(np.abs(z * slack), initial=0.0)))
    if A is not None:
        worst = max(worst, float(np.max(np.abs(A @ x - b), initial=0.0)))
    return worst


def _solve_equality_qp(H, f, A, b, scale, tol):
    """Direct KKT solve for QPs with no inequality constraints."""
    n = H.shape[0]
    if A is None:
        x, *_ = np.linalg.lstsq(H, -f, rcond=None)
        return QpSolution(x, np.zeros(0), np.zeros(0),
                          _kkt_residual(H, f, None, None, None, None, x, None, None),
                          iterations=0)
    p = A.shape[0]
    kkt = np.zeros((n + p, n + p))
    kkt[:n, :n] = H
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.concatenate([-f, b])
    try:
        sol = scipy.linalg.lu_solve(scipy.linalg.lu_factor(kkt, check_finite=False), rhs,
                                    check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        sol = None
    if sol is None or not np.all(np.isfinite(sol)) or \
            np.max(np.abs(kkt @ sol - rhs)) > 1e-8 * scale:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    x, y = sol[:n], sol[n:]
    resid = _kkt_residual(H, f, None, None, A, b, x, None, y)
    status = "optimal" if resid <= 1e-8 * scale else "infeasible"
    return QpSolution(x, np.zeros(0), y, resid, iterations=0, status=status)


def _polish_candidate(H, f, G, h, A, b, active):
    """Raw equality KKT solve treating `active` inequality rows as tight."""
    mi = G.shape[0]
    na = active.shape[0]
    n = H.shape[0]
    p = 0 if A is None else A.shape[0]
    kkt = np.zeros((n + na + p, n + na + p))
    kkt[:n, :n] = H
    rhs = np.concatenate([-f, h[active], b if A is not None else np.zeros(0)])
    if na:
        kkt[:n, n:n + na] = G[active].T
        kkt[n:n + na, :n] = G[active]
    if p:
        kkt[:n, n + na:] = A.T
        kkt[n + na:, :n] = A
    sol = None
    # singular active sets are routine here; probe with LU quietly and fall
    # back to the minimum-norm solve when it degenerates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with np.errstate(invalid="ignore", over="ignore"):
            try:
                lu = scipy.linalg.lu_factor(kkt, check_finite=False)
                cand = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
                cand += scipy.linalg.lu_solve(lu, rhs - kkt @ cand, check_finite=False)
                if np.all(np.isfinite(cand)) and \
                        np.max(np.abs(kkt @ cand - rhs)) <= 1e-9 * (1.0 + np.max(np.abs(rhs))):
                    sol = cand
            except (scipy.linalg.LinAlgError, ValueError):
                sol = None
    if sol is None:
        # singular active set (redundant rows): minimum-norm multipliers
        try:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        except np.linalg.LinAlgError:
            return None
    x_new = sol[:n]
    z_new = np.zeros(mi)
    z_new[active] = sol[n:n + na]
    y_new = sol[n + na:]
    if not np.all(np.isfinite(x_new)) or not np.all(np.isfinite(z_new)):
        return None
    return x_new, z_new, y_new


class _PolishState:
    def __init__(self, H, f, G, h, A, b, scale, x, z, y):
        self.data = (H, f, G, h, A, b)
        self.scale = scale
        self.best = (x, z, y)
        self.best_resid = _kkt_residual(H, f, G, h, A, b, x, z, y)
        self.seen: set = set()

    def exchange(self, active: np.ndarray, rounds: int, add_all: bool) -> None:
        """Active-set exchange: solve, admit violated rows, drop negatives.

        add_all admits every violated row per round (fast when the seed is
        near the truth); otherwise only the worst violation enters, which
        stays consistent on near-duplicate rows at the cost of more rounds.
        Only clean candidates (feasible, nonnegative multipliers) can
        become the incumbent.
        """
        H, f, G, h, A, b = self.data
        for _ in range(rounds):
            key = active.tobytes()
            if key in self.seen:
                return
            self.seen.add(key)
            out = _polish_candidate(H, f, G, h, A, b, active)
            if out is None:
                return
            x_new, z_new, y_new = out
            violations = G @ x_new - h
            violated = np.flatnonzero(violations > 1e-11 * self.scale)
            negative = np.flatnonzero(z_new < -1e-11 * self.scale)
            if violated.size == 0 and negative.size == 0:
                clipped = np.maximum(z_new, 0.0)
                resid = _kkt_residual(H, f, G, h, A, b, x_new, clipped, y_new)
                if resid < self.best_resid:
                    self.best, self.best_resid = (x_new, clipped, y_new), resid
                return
            nxt = set(active.tolist())
            if add_all:
                nxt |= set(violated.tolist())
            elif violated.size:
                nxt.add(int(violated[np.argmax(violations[violated])]))
            if negative.size:
                nxt.discard(int(negative[np.argmin(z_new[negative])]))
            active = np.array(sorted(nxt), dtype=int)


def _polish(H, f, G, h, A, b, x, z, y, scale):
    """Active-set refinement seeded by the interior-point iterate.

    Seeded exchanges handle the common case; when they cannot reach the
    KKT target (degenerate near-duplicate rows), a from-scratch build that
    admits one row at a time takes over.
    """
    slack = np.maximum(h - G @ x, 0.0)
    # scale-free indicator: row i looks active when its normalized
    # multiplier dominates its normalized slack
    z_top = max(float(np.max(z, initial=0.0)), 1e-300)
    s_top = max(float(np.max(slack, initial=0.0)), 1e-300)
    state = _PolishState(H, f, G, h, A, b, scale, x, z, y)
    state.exchange(np.flatnonzero(z * s_top >= slack * z_top), 14, add_all=True)
    state.exchange(np.flatnonzero(z > slack), 14, add_all=True)
    state.exchange(np.flatnonzero(slack <= 1e-7 * (1.0 + np.abs(h))), 14, add_all=True)
    if state.best_resid > 1e-8 * scale:
        rounds = min(2 * G.shape[0] + 10, 60)
        state.exchange(np.zeros(0, dtype=int), rounds, add_all=False)
    return state.best


def qp_solve(H, f, C_ineq=None, d=None, C_eq=None, e=None, *,
             tol: float = 1e-10, max_iterations: int = 200,
             x0: np.ndarray | None = None) -> QpSolution:
    """Dense convex QP: min 0.5 x^T H x + f^T x s.t. C_ineq x <= d, C_eq x = e.

    Mehrotra predictor-corrector interior point on dense factorizations,
    followed by an active-set polish.  H must be symmetric positive
    semidefinite.  Status is "optimal" when every KKT residual (inf norm)
    is within 1e-8 * (1 + data norms); "infeasible" when primal residuals
    provably stall; "max-iterations" otherwise (best iterate returned).
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    n = H.shape[0]
    G0 = np.asarray(C_ineq, dtype=float) if C_ineq is not None else None
    h0 = np.asarray(d, dtype=float) if d is not None else None
    A0 = np.asarray(C_eq, dtype=float) if C_eq is not None else None
    b0 = np.asarray(e, dtype=float) if e is not None else None
    if G0 is not None and G0.shape[0] == 0:
        G0, h0 = None, None
    if A0 is not None and A0.shape[0] == 0:
        A0, b0 = None, None

    # row equilibration: unit inf-norm constraint rows condition the
    # iterations; multipliers are scaled back before returning
    if G0 is not None:
        dG = np.maximum(np.max(np.abs(G0), axis=1), 1e-300)
        G, h = G0 / dG[:, None], h0 / dG
    else:
        G, h = None, None
    if A0 is not None:
        dA = np.maximum(np.max(np.abs(A0), axis=1), 1e-300)
        A, b = A0 / dA[:, None], b0 / dA
    else:
        A, b = None, None

    scale = _data_scale(H, f, G, h, A, b)
    scale0 = _data_scale(H, f, G0, h0, A0, b0)
    if G is None:
        sol = _solve_equality_qp(H, f, A, b, scale, tol)
        y0 = sol.eq_duals / dA if A is not None else sol.eq_duals
        resid = _kkt_residual(H, f, None, None, A0, b0, sol.primal, None, y0)
        status = "optimal" if resid <= 1e-8 * scale0 else sol.status
        return QpSolution(sol.primal, sol.ineq_duals, y0, resid, sol.iterations, status)

    mi = G.shape[0]
    p = 0 if A is None else A.shape[0]
    delta = 1e-10 * (1.0 + float(np.max(np.abs(H))))

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(p)
    s = np.maximum(h - G @ x, 1.0)
    z = np.ones(mi)

    best = (math.inf, x.copy(), z.copy(), y.copy())
    best_pfeas = math.inf
    status = "max-iterations"
    iterations = 0
    stall_best = math.inf
    stall_count = 0
    kkt_buf = None

    for it in range(max_iterations):
        iterations = it + 1
        Hx = H @ x
        r_dual = Hx + f + G.T @ z + (A.T @ y if A is not None else 0.0)
        r_pri = G @ x + s - h
        r_eq = (A @ x - b) if A is not None else np.zeros(0)
        mu = float(s @ z) / mi
        if not (np.isfinite(mu) and np.all(np.isfinite(r_dual))):
            if best_pfeas > 1e-6 * scale:
                status = "infeasible"
            break

        pfeas = max(float(np.max(np.abs(r_pri), initial=0.0)),
                    float(np.max(np.abs(r_eq), initial=0.0)))
        dfeas = float(np.max(np.abs(r_dual), initial=0.0))
        best_pfeas = min(best_pfeas, pfeas)
        kkt_now = max(pfeas, dfeas, mu)
        if kkt_now < best[0]:
            best = (kkt_now, x.copy(), z.copy(), y.copy())

        # convergence relative to the terms composing each residual; the
        # complementarity gap is relative to the objective value, and the
        # polish below turns active-set identification into full precision
        s_dual = 1.0 + max(float(np.max(np.abs(Hx), initial=0.0)),
                           float(np.max(np.abs(f), initial=0.0)))
        s_pri = 1.0 + max(float(np.max(np.abs(G @ x), initial=0.0)),
                          float(np.max(np.abs(h), initial=0.0)))
        s_gap = 1.0 + abs(0.5 * float(x @ Hx) + float(f @ x))
        if pfeas <= tol * s_pri and dfeas <= tol * s_dual and mi * mu <= tol * s_gap:
            status = "optimal"
            break
        # stop early when the residuals sit on their floating-point floor;
        # the polish turns a stalled-but-centered iterate into full precision
        ratio = max(pfeas / s_pri, dfeas / s_dual, mi * mu / s_gap)
        if ratio < 0.9 * stall_best:
            stall_best, stall_count = ratio, 0
        else:
            stall_count += 1
            if stall_count >= 5:
                break
        # primal residual stalls while duals blow up: the QP is infeasible
        if it >= 15 and best_pfeas > 1e-6 * scale and \
                (float(np.max(z)) > 1e10 * scale or mu < 1e-12 * scale):
            status = "infeasible"
            break

        # the cap bounds the KKT norm so iterative refinement stays meaningful
        w = np.minimum(z / s, 1e10)
        Q = H + (G.T * w) @ G
        reg = delta + 1e-13 * float(np.max(np.abs(Q)))
        Q[np.diag_indices_from(Q)] += reg

        # one factorization per iteration, shared by predictor and corrector:
        # Cholesky on Q with a Schur complement over the equality rows, and
        # a quasi-definite LU fallback when Q is numerically indefinite
        solve_kkt = None
        if A is not None:
            try:
                cho_Q = scipy.linalg.cho_factor(Q, lower=True, check_finite=False)
                QiAt = scipy.linalg.cho_solve(cho_Q, A.T, check_finite=False)
                S = A @ QiAt
                S[np.diag_indices_from(S)] += reg
                cho_S = scipy.linalg.cho_factor(S, lower=True, check_finite=False)

                def solve_kkt(rx, re, _cq=cho_Q, _cs=cho_S, _QiAt=QiAt):
                    t = scipy.linalg.cho_solve(_cq, rx, check_finite=False)
                    dy = scipy.linalg.cho_solve(_cs, A @ t - re, check_finite=False)
                    dx = t - _QiAt @ dy
                    # one refinement pass against the unfactored blocks
                    r1 = rx - (Q @ dx + A.T @ dy)
                    r2 = re - (A @ dx - reg * dy)
                    t = scipy.linalg.cho_solve(_cq, r1, check_finite=False)
                    ey = scipy.linalg.cho_solve(_cs, A @ t - r2, check_finite=False)
                    return dx + (t - _QiAt @ ey), dy + ey
            except scipy.linalg.LinAlgError:
                solve_kkt = None
            if solve_kkt is None:
                if kkt_buf is None:
                    dim = n + p
                    kkt_buf = np.zeros((dim, dim))
                    kkt_buf[:n, n:] = A.T
                    kkt_buf[n:, :n] = A
                kkt = kkt_buf
                kkt[:n, :n] = Q
                kkt[n:, n:] = 0.0
                kkt[n + np.arange(p), n + np.arange(p)] = -reg
                lu_cache = scipy.linalg.lu_factor(kkt, check_finite=False)

                def solve_kkt(rx, re, _lu=lu_cache, _kkt=kkt):
                    rhs = np.concatenate([rx, re])
                    sol = scipy.linalg.lu_solve(_lu, rhs, check_finite=False)
                    sol += scipy.linalg.lu_solve(_lu, rhs - _kkt @ sol, check_finite=False)
                    return sol[:n], sol[n:]
        else:
            def solve_kkt(rx, re, _Q=Q):
                try:
                    return spd_solve(_Q, rx), np.zeros(0)
                except NumericalError:
                    bumped = _Q + (1e-10 * float(np.max(np.abs(_Q)))) * np.eye(n)
                    return spd_solve(bumped, rx), np.zeros(0)

        def direction(rc):
            rhs_x = -r_dual + G.T @ ((rc - z * r_pri) / s)
            dx, dy = solve_kkt(rhs_x, -r_eq)
            ds = -r_pri - G @ dx
            dz = (-rc - z * ds) / s
            return dx, ds, dz, dy

        try:
            # predictor
            dx_a, ds_a, dz_a, dy_a = direction(s * z)
            alpha_aff = min(_max_step(s, ds_a), _max_step(z, dz_a))
            mu_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a)) / mi
            sigma = (mu_aff / mu) ** 3 if mu > 0.0 else 0.0
            sigma = min(max(sigma, 0.0), 1.0)
            # keep the barrier from collapsing while residuals still lag,
            # or the scaling matrix degrades before feasibility is reached
            if mu > 0.0 and max(pfeas, dfeas) > 10.0 * mu:
                sigma = max(sigma, 0.5)

            # corrector
            rc = s * z + ds_a * dz_a - sigma * mu
            dx, ds, dz, dy = direction(rc)
        except (NumericalError, scipy.linalg.LinAlgError, ValueError):
            break  # factorization broke down; best iterate + polish take over
        if not all(np.all(np.isfinite(v)) for v in (dx, ds, dz, dy)):
            break

        eta = min(0.9999, max(0.995, 1.0 - 10.0 * mu / scale))
        alpha = min(1.0, eta * _max_step(s, ds), eta * _max_step(z, dz))
        if alpha < 1e-13:
            break
        # floors keep the scaling matrix and products inside normal floats
        x = x + alpha * dx
        s = np.maximum(s + alpha * ds, 1e-30)
        z = np.maximum(z + alpha * dz, 1e-30)
        y = y + alpha * dy

    if status != "optimal":
        _, x, z, y = best
    x, z, y = _polish(H, f, G, h, A, b, x, z, y, scale)
    z0 = z / dG
    y0 = y / dA if A is not None else y
    resid = _kkt_residual(H, f, G0, h0, A0, b0, x, z0, y0)
    if resid <= 1e-8 * scale0:
        status = "optimal"
    elif status != "infeasible":
        # no iterate ever came close to primal feasibility: the QP has no solution
        status = "infeasible" if best_pfeas > 1e-6 * scale else "max-iterations"
    return QpSolution(primal=x, ineq_duals=z0, eq_duals=y0,
                      kkt_residual=resid, iterations=iterations, status=status)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha in (0, 1] keeping v + alpha dv >= 0."""
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))
