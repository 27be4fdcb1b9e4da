"""Seeded instance generators and problem builders.

Both experiment families ship a feasibility certificate so tests can check
Fejer monotonicity and zero violation without an external solver.  Random
draws come from an explicit 64-bit LCG with Box-Muller normals, so a seed
pins the instance bit-for-bit regardless of the ecosystem RNG in use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .atoms import AffineSymMap, L1Norm, MaxEigAtom, SocDistanceAtom, soc_dist_subgrad
from .linalg import svec, svec_dim, sym_eig
from .solver import ProblemSpec, SharpnessTestConfig

GENERATOR_ID = "lcg64-boxmuller-v1"

_LCG_MULT = 6364136223846793005  # Knuth's MMIX constants
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1
_TWO53 = float(1 << 53)


class SeededRng:
    """Deterministic uniform/normal stream: 64-bit LCG plus Box-Muller.

    The state update is exact integer arithmetic, so identical
    (algorithm, seed) pairs give identical streams on every platform;
    position counts raw 64-bit draws.
    """

    algorithm = GENERATOR_ID

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = self.seed
        self.position = 0
        self._spare_normal: float | None = None

    def _next_u64(self) -> int:
        self._state = (_LCG_MULT * self._state + _LCG_INC) & _MASK64
        self.position += 1
        return self._state

    def uniform(self) -> float:
        """Uniform draw in (0, 1]: top 53 bits shifted away from zero."""
        return ((self._next_u64() >> 11) + 1) / _TWO53

    def normal(self) -> float:
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def normals(self, count: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(count)])

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        """Row-major matrix fill; the draw order is part of the stream contract."""
        return self.normals(rows * cols).reshape(rows, cols)


@dataclass
class ConeProgramInstance:
    """Primal-dual cone program data plus the planted zero-gap certificate."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cone_dims: list[int]
    certificate_u: np.ndarray
    certificate_v: np.ndarray
    certificate_s: np.ndarray
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[0]

    def cone_spans(self) -> list[tuple[int, int]]:
        return _cone_spans(self.cone_dims)


@dataclass
class LmiInstance:
    """Lyapunov-type matrix inequality data with a planted feasible X >= I."""

    matrices: list[np.ndarray]
    x_feasible: np.ndarray
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def q(self) -> int:
        return self.x_feasible.shape[0]

    @property
    def k(self) -> int:
        return len(self.matrices)


def _cone_spans(cone_dims) -> list[tuple[int, int]]:
    spans = []
    offset = 0
    for d in cone_dims:
        spans.append((offset, offset + d))
        offset += d
    return spans


def _project_soc_blocks(z: np.ndarray, spans) -> np.ndarray:
    """Blockwise second-order cone projection via the distance residual."""
    u = np.empty_like(z)
    for lo, hi in spans:
        s, t = z[lo:hi - 1], float(z[hi - 1])
        d, g_dir = soc_dist_subgrad(s, t)
        u[lo:hi] = z[lo:hi] - d * g_dir
    return u


def gen_socp(seed: int, n: int = 100, p: int = 40, l: int = 5,
             cone_dims: list[int] | None = None) -> ConeProgramInstance:
    """Generate a zero-duality-gap cone program instance.

    Draw order (fixed): z, then A row-major, then v.  u is the cone
    projection of z, s = u - z lives in the dual cone with s.u = 0, and
    b = A u, c = s + A^T v close the primal-dual identities.
    """
    if cone_dims is None:
        if n % l:
            raise ValueError("n must split evenly over l cones when cone_dims is omitted")
        cone_dims = [n // l] * l
    if sum(cone_dims) != n:
        raise ValueError("cone dimensions must sum to n")
    if any(d < 2 for d in cone_dims):
        raise ValueError("each cone needs dimension >= 2")
    if len(cone_dims) != l:
        raise ValueError("cone count must equal l")

    rng = SeededRng(seed)
    z = rng.normals(n)
    u = _project_soc_blocks(z, _cone_spans(cone_dims))
    s = u - z
    A = rng.normal_matrix(p, n)
    v = rng.normals(p)
    b = A @ u
    c = s + A.T @ v
    return ConeProgramInstance(
        A=A, b=b, c=c, cone_dims=list(cone_dims),
        certificate_u=u, certificate_v=v, certificate_s=s, seed=int(seed),
        metadata={"generator": GENERATOR_ID, "n": n, "p": p, "l": l,
                  "draw_order": "z, A row-major, v"})


def build_pd_feasibility(inst: ConeProgramInstance) -> ProblemSpec:
    """Primal-dual feasibility problem over x = (u, v, s) with f_star = 0.

    2l cone-distance constraints (primal cones on u, dual cones on s) plus
    the n + p + 1 equality rows s + A^T v = c, A u = b, -c^T u + b^T v = 0.
    """
    n, p = inst.n, inst.p
    dim = 2 * n + p
    spans = inst.cone_spans()

    constraints = []
    for lo, hi in spans:
        constraints.append(SocDistanceAtom(dim=dim, start=lo, stop=hi))
    for lo, hi in spans:
        constraints.append(SocDistanceAtom(dim=dim, start=n + p + lo, stop=n + p + hi,
                                           dual_flag=True))

    A_eq = np.zeros((n + p + 1, dim))
    b_eq = np.zeros(n + p + 1)
    # s + A^T v = c
    A_eq[:n, n:n + p] = inst.A.T
    A_eq[:n, n + p:] = np.eye(n)
    b_eq[:n] = inst.c
    # A u = b
    A_eq[n:n + p, :n] = inst.A
    b_eq[n:n + p] = inst.b
    # -c^T u + b^T v = 0
    A_eq[n + p, :n] = -inst.c
    A_eq[n + p, n:n + p] = inst.b

    return ProblemSpec(dim=dim, objective=None, constraints=constraints,
                       A=A_eq, b=b_eq, f_star=0.0)


def pd_certificate_vector(inst: ConeProgramInstance) -> np.ndarray:
    """The planted solution (u, v, s) in solver coordinates."""
    return np.concatenate([inst.certificate_u, inst.certificate_v, inst.certificate_s])


def gen_lmi(seed: int, q: int = 10, k: int = 5) -> LmiInstance:
    """Generate matrices A_i = F^{-1} (-B_i B_i^T + C_i - C_i^T) F.

    The similarity transform keeps A_i^T X + X A_i <= 0 solvable by
    X = F^T F scaled up to X >= I; the scaled matrix ships as the
    certificate.  Draw order (fixed): B_1, C_1, ..., B_k, C_k, then F.
    A singular F (probability zero) regenerates from a perturbed seed,
    recorded in metadata.
    """
    attempt_seed = int(seed)
    regenerated_from = []
    while True:
        rng = SeededRng(attempt_seed)
        tildes = []
        for _ in range(k):
            B = rng.normal_matrix(q, q)
            C = rng.normal_matrix(q, q)
            tildes.append(-B @ B.T + C - C.T)
        F = rng.normal_matrix(q, q)
        try:
            lu, piv = scipy.linalg.lu_factor(F)
        except scipy.linalg.LinAlgError:
            lu = None
        if lu is None or np.min(np.abs(np.diag(lu))) < 1e-12 * np.max(np.abs(F)):
            regenerated_from.append(attempt_seed)
            attempt_seed = (attempt_seed ^ 0x9E3779B97F4A7C15) & _MASK64
            continue
        break

    matrices = [scipy.linalg.lu_solve((lu, piv), tilde) @ F for tilde in tildes]
    gram = F.T @ F
    eig = sym_eig(0.5 * (gram + gram.T))
    lam_min = float(eig.eigenvalues[-1])
    lam_max = float(eig.eigenvalues[0])
    x_feasible = gram / lam_min  # smallest eigenvalue becomes exactly 1
    metadata = {"generator": GENERATOR_ID, "q": q, "k": k,
                "draw_order": "B_i, C_i per i, then F",
                "gram_condition": lam_max / lam_min}
    if regenerated_from:
        metadata["regenerated_from"] = regenerated_from
    return LmiInstance(matrices=matrices, x_feasible=0.5 * (x_feasible + x_feasible.T),
                       seed=int(seed), metadata=metadata)


def build_lmi_feasibility(inst: LmiInstance, r: int = 2) -> ProblemSpec:
    """Feasibility over svec(X): lambda_max(I - X) <= 0 and the k Lyapunov rows.

    Every constraint uses the rank-r diagonal eigenvalue minorant, which
    keeps the projection subproblem a plain QP.
    """
    if r < 1:
        raise ValueError("rank must be >= 1")
    q = inst.q
    constraints = [MaxEigAtom(AffineSymMap.scaled_identity(q, scale=-1.0, const=np.eye(q)),
                              rank=r, variant="diag")]
    for Ai in inst.matrices:
        constraints.append(MaxEigAtom(AffineSymMap.lyapunov(Ai), rank=r, variant="diag"))
    dim = svec_dim(q)
    return ProblemSpec(dim=dim, objective=None, constraints=constraints,
                       A=np.zeros((0, dim)), b=np.zeros(0), f_star=0.0)


def lmi_certificate_vector(inst: LmiInstance) -> np.ndarray:
    return svec(inst.x_feasible)


def gen_sharp_l1(n: int) -> tuple[ProblemSpec, SharpnessTestConfig]:
    """minimize ||x||_1 with f_star = 0: 1-sharp, sqrt(n)-Lipschitz."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = ProblemSpec(dim=n, objective=L1Norm(dim=n), constraints=[],
                       A=np.zeros((0, n)), b=np.zeros(0), f_star=0.0)
    return spec, SharpnessTestConfig(mu=1.0, lipschitz=math.sqrt(n))


# ---------------------------------------------------------------------------
# JSON serialization (schema "pmm-instance/1")
# ---------------------------------------------------------------------------


def instance_to_json(inst: ConeProgramInstance | LmiInstance) -> str:
    """Serialize an instance; matrices are nested float lists, full precision."""
    if isinstance(inst, ConeProgramInstance):
        payload = {
            "schema": "pmm-instance/1",
            "kind": "socp",
            "seed": inst.seed,
            "metadata": inst.metadata,
            "cone_dims": inst.cone_dims,
            "A": inst.A.tolist(),
            "b": inst.b.tolist(),
            "c": inst.c.tolist(),
            "certificate": {
                "u": inst.certificate_u.tolist(),
                "v": inst.certificate_v.tolist(),
                "s": inst.certificate_s.tolist(),
            },
        }
    elif isinstance(inst, LmiInstance):
        payload = {
            "schema": "pmm-instance/1",
            "kind": "lmi",
            "seed": inst.seed,
            "metadata": inst.metadata,
            "matrices": [m.tolist() for m in inst.matrices],
            "x_feasible": inst.x_feasible.tolist(),
        }
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    return json.dumps(payload, indent=1)


def instance_from_json(text: str) -> ConeProgramInstance | LmiInstance:
    payload = json.loads(text)
    if payload.get("schema") != "pmm-instance/1":
        raise ValueError(f"unsupported schema {payload.get('schema')!r}")
    kind = payload.get("kind")
    if kind == "socp":
        cert = payload["certificate"]
        return ConeProgramInstance(
            A=np.array(payload["A"], dtype=float),
            b=np.array(payload["b"], dtype=float),
            c=np.array(payload["c"], dtype=float),
            cone_dims=[int(d) for d in payload["cone_dims"]],
            certificate_u=np.array(cert["u"], dtype=float),
            certificate_v=np.array(cert["v"], dtype=float),
            certificate_s=np.array(cert["s"], dtype=float),
            seed=int(payload["seed"]),
            metadata=payload.get("metadata", {}))
    if kind == "lmi":
        return LmiInstance(
            matrices=[np.array(m, dtype=float) for m in payload["matrices"]],
            x_feasible=np.array(payload["x_feasible"], dtype=float),
            seed=int(payload["seed"]),
            metadata=payload.get("metadata", {}))
    raise ValueError(f"unknown instance kind {kind!r}")
