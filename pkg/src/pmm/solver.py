"""The Polyak minorant method: project the iterate onto the set where all
current minorants sit at or below their levels (the known optimal value for
the objective, zero for constraints) and the equality rows hold.

Variants: the standard method, an alternating version that projects onto
the objective sublevel set on even iterations and the constraint set on odd
ones, and a fast path for the unconstrained subgradient case that reduces
to the classic Polyak step."""

from __future__ import annotations

import contextlib
import math
import time
from dataclasses import dataclass, field

import numpy as np
import threadpoolctl

from .atoms import AffineFunction, ConvexFunction
from .linalg import NumericalError
from .minorant import AffineCut, CutPool
from .projection import EmptyTargetSet, assemble, project_auto


def blas_thread_context(limit: int | None):
    """Cap BLAS thread pools for the duration of a solve.

    The dense kernels here are small; on machines with few cores the
    constant pool park/unpark between LAPACK and GEMM calls costs far more
    than the parallelism buys.  None leaves the ambient settings alone.
    """
    if limit is None:
        return contextlib.nullcontext()
    return threadpoolctl.threadpool_limits(limits=limit)

VARIANTS = ("standard", "alternating", "polyak-fast-path")


class ZeroSubgradient(Exception):
    """Optimal-point signal: a zero subgradient means the iterate minimizes f."""


@dataclass
class ProblemSpec:
    """Oracles and data of one convex problem with known optimal value.

    objective may be None for feasibility problems (the zero function);
    constraints are ConvexFunction oracles required to be <= 0; A, b are
    the equality rows; domain is an optional membership test for the
    objective's domain (None means all of R^n).
    """

    dim: int
    objective: ConvexFunction | None
    constraints: list[ConvexFunction]
    A: np.ndarray
    b: np.ndarray
    f_star: float
    domain: object = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.dim) \
            if np.asarray(self.A).size else np.zeros((0, self.dim))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")
        if self.objective is not None and self.objective.dim != self.dim:
            raise ValueError("objective dimension mismatch")
        for i, oracle in enumerate(self.constraints):
            if oracle.dim != self.dim:
                raise ValueError(f"constraint {i} dimension mismatch")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def in_domain(self, x: np.ndarray) -> bool:
        return True if self.domain is None else bool(self.domain(x))


@dataclass
class SolverConfig:
    memory: int = 0
    epsilon: float = 1e-6
    max_iterations: int = 5000
    variant: str = "standard"
    equality_tol: float = 1e-8
    qp_tol: float = 1e-10
    store_iterates: bool = False
    blas_threads: int | None = 1

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.memory < 0:
            raise ValueError("memory must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class IterationRecord:
    k: int
    violation: float
    step_norm: float
    cuts_total: int
    qp_iterations: int
    solve_ms: float


@dataclass
class SolveResult:
    x: np.ndarray
    trace: list[IterationRecord]
    status: str  # solved | iteration-cap | numerical-failure
    message: str = ""
    iterates: list[np.ndarray] | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def final_violation(self) -> float:
        return self.trace[-1].violation if self.trace else math.inf


@dataclass
class SharpnessTestConfig:
    """Growth data of a sharp test function: f(x) - f_star >= mu * dist(x, argmin)."""

    mu: float
    lipschitz: float

    def __post_init__(self):
        if not 0.0 < self.mu <= self.lipschitz:
            raise ValueError("need 0 < mu <= lipschitz")

    @property
    def contraction(self) -> float:
        """Per-iteration distance contraction sqrt(1 - (mu/G)^2)."""
        return math.sqrt(1.0 - (self.mu / self.lipschitz) ** 2)


def violation(spec: ProblemSpec, x: np.ndarray, equality_tol: float = 1e-8) -> float:
    """Maximum violation max{f_0(x) - f_star, f_1(x), ..., f_m(x)}.

    Infinite when x is outside the objective domain or any equality row is
    off by more than equality_tol.
    """
    x = np.asarray(x, dtype=float)
    if not spec.in_domain(x):
        return math.inf
    if spec.p and float(np.max(np.abs(spec.A @ x - spec.b))) > equality_tol:
        return math.inf
    f0 = spec.objective.value(x) if spec.objective is not None else 0.0
    worst = f0 - spec.f_star
    for oracle in spec.constraints:
        worst = max(worst, oracle.value(x))
    return float(worst)


def polyak_step(x: np.ndarray, fx: float, f_star: float, g: np.ndarray) -> np.ndarray:
    """One Polyak subgradient step x - ((fx - f_star) / ||g||^2) g.

    Raises ZeroSubgradient when g = 0, which signals that x is optimal
    rather than an error.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    gnorm2 = float(g @ g)
    if gnorm2 == 0.0:
        raise ZeroSubgradient("zero subgradient: the current point is optimal")
    return x - ((float(fx) - float(f_star)) / gnorm2) * g


def _objective_oracle(spec: ProblemSpec) -> ConvexFunction:
    if spec.objective is not None:
        return spec.objective
    return AffineFunction(np.zeros(spec.dim), 0.0)


def _append_cuts(pool: CutPool, blocks, k: int) -> None:
    for b, cuts in enumerate(blocks):
        for cut in cuts:
            pool.insert(b, AffineCut(cut.coeff, cut.offset, birth_iter=k))


def pmm_solve(spec: ProblemSpec, config: SolverConfig,
              x1: np.ndarray | None = None) -> SolveResult:
    """Run the Polyak minorant method from x1 (default: the origin).

    Per iteration: refresh constraint minorants at x^k, refresh the
    objective minorant when x^k is in the domain (else keep the previous
    pool as a lower bound, seeding the constant f_star when empty),
    project x^k onto the assembled target set, and stop once the true
    violation of the new iterate is at most epsilon.
    """
    if config.variant == "polyak-fast-path":
        return _polyak_fast_path(spec, config, x1)
    with blas_thread_context(config.blas_threads):
        return _pmm_projection_loop(spec, config, x1)


def _pmm_projection_loop(spec: ProblemSpec, config: SolverConfig,
                         x1: np.ndarray | None) -> SolveResult:
    alternating = config.variant == "alternating"

    x = np.zeros(spec.dim) if x1 is None else np.asarray(x1, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("x1 must be finite")

    objective = _objective_oracle(spec)
    obj_pool = objective.make_pool(memory=config.memory)
    con_pools = [c.make_pool(memory=config.memory) for c in spec.constraints]

    trace: list[IterationRecord] = []
    iterates = [x.copy()] if config.store_iterates else None

    v = violation(spec, x, config.equality_tol)
    if v <= config.epsilon:
        trace.append(IterationRecord(1, v, 0.0, 0, 0, 0.0))
        return SolveResult(x, trace, "solved", iterates=iterates)

    status = "iteration-cap"
    message = ""
    for k in range(1, config.max_iterations + 1):
        tick = time.perf_counter()
        project_constraints = (not alternating) or (k % 2 == 1)
        project_objective = (not alternating) or (k % 2 == 0)

        if project_constraints:
            for oracle, pool in zip(spec.constraints, con_pools):
                val, blocks = oracle.cuts_at(x)
                _append_cuts(pool, blocks, k)
                pool.tight_value = val
        if project_objective:
            if spec.in_domain(x):
                val, blocks = objective.cuts_at(x)
                _append_cuts(obj_pool, blocks, k)
                obj_pool.tight_value = val
            elif obj_pool.is_empty():
                # fall back to the constant lower bound f_star
                obj_pool.insert(0, AffineCut(np.zeros(spec.dim), spec.f_star, birth_iter=k))

        try:
            P = assemble(
                obj_pool if project_objective else None,
                con_pools if project_constraints else [],
                spec.f_star,
                spec.A if project_constraints else np.zeros((0, spec.dim)),
                spec.b if project_constraints else np.zeros(0),
                x)
            x_next, qp = project_auto(P, tol=config.qp_tol)
        except EmptyTargetSet as exc:
            status, message = "numerical-failure", str(exc)
            trace.append(IterationRecord(k, v, 0.0, 0, 0,
                                         (time.perf_counter() - tick) * 1e3))
            break
        except NumericalError as exc:
            status, message = "numerical-failure", f"projection failed: {exc}"
            trace.append(IterationRecord(k, v, 0.0, 0, 0,
                                         (time.perf_counter() - tick) * 1e3))
            break

        v_next = violation(spec, x_next, config.equality_tol)
        step = float(np.linalg.norm(x - x_next))
        trace.append(IterationRecord(k, v, step, P.total_cut_rows(), qp.iterations,
                                     (time.perf_counter() - tick) * 1e3))
        if iterates is not None:
            iterates.append(x_next.copy())
        x, v = x_next, v_next
        if v <= config.epsilon:
            trace.append(IterationRecord(k + 1, v, 0.0, 0, 0, 0.0))
            status = "solved"
            break
    else:
        trace.append(IterationRecord(config.max_iterations + 1, v, 0.0, 0, 0, 0.0))

    return SolveResult(x, trace, status, message=message, iterates=iterates)


def _polyak_fast_path(spec: ProblemSpec, config: SolverConfig,
                      x1: np.ndarray | None) -> SolveResult:
    """Unconstrained subgradient special case: closed-form halfspace projections."""
    if spec.m or spec.p:
        raise ValueError("the Polyak fast path requires m = 0 and p = 0")
    objective = _objective_oracle(spec)
    x = np.zeros(spec.dim) if x1 is None else np.asarray(x1, dtype=float).copy()

    trace: list[IterationRecord] = []
    iterates = [x.copy()] if config.store_iterates else None
    v = violation(spec, x, config.equality_tol)
    if v <= config.epsilon:
        trace.append(IterationRecord(1, v, 0.0, 0, 0, 0.0))
        return SolveResult(x, trace, "solved", iterates=iterates)

    status = "iteration-cap"
    message = ""
    for k in range(1, config.max_iterations + 1):
        tick = time.perf_counter()
        fx, blocks = objective.cuts_at(x)
        cuts = [c for block in blocks for c in block]
        if len(cuts) != 1:
            raise ValueError("the Polyak fast path needs a single affine minorant")
        g = cuts[0].coeff
        try:
            x_next = polyak_step(x, fx, spec.f_star, g)
        except ZeroSubgradient:
            v = violation(spec, x, config.equality_tol)
            trace.append(IterationRecord(k, v, 0.0, 1, 0,
                                         (time.perf_counter() - tick) * 1e3))
            if v <= config.epsilon:
                status = "solved"
            else:
                status, message = "numerical-failure", \
                    "zero subgradient at a point that is not optimal (wrong f_star?)"
            break
        v_next = violation(spec, x_next, config.equality_tol)
        step = float(np.linalg.norm(x - x_next))
        trace.append(IterationRecord(k, v, step, 1, 0,
                                     (time.perf_counter() - tick) * 1e3))
        if iterates is not None:
            iterates.append(x_next.copy())
        x, v = x_next, v_next
        if v <= config.epsilon:
            trace.append(IterationRecord(k + 1, v, 0.0, 0, 0, 0.0))
            status = "solved"
            break
    else:
        trace.append(IterationRecord(config.max_iterations + 1, v, 0.0, 0, 0, 0.0))
    return SolveResult(x, trace, status, message=message, iterates=iterates)


def pmm_alternating(spec: ProblemSpec, config: SolverConfig,
                    x1: np.ndarray | None = None) -> SolveResult:
    """Alternating-update variant: objective set on even k, constraints on odd k."""
    cfg = SolverConfig(memory=config.memory, epsilon=config.epsilon,
                       max_iterations=config.max_iterations, variant="alternating",
                       equality_tol=config.equality_tol, qp_tol=config.qp_tol,
                       store_iterates=config.store_iterates)
    return pmm_solve(spec, cfg, x1)
