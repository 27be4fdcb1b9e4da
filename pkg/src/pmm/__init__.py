"""Polyak minorant method solver for convex problems with known optimal value.

The solver projects each iterate onto the set where limited-memory
piecewise-affine minorants of the objective and constraints sit at or
below their levels; with no constraints, memory zero, and the subgradient
minorant it reduces to the classic Polyak subgradient step.
"""

from .atoms import (
    AffineFunction,
    AffineSymMap,
    ConvexFunction,
    DcpError,
    EuclideanNorm,
    ExprNode,
    ExprOracle,
    L1Norm,
    LinfNorm,
    MaxEigAtom,
    SocDistanceAtom,
    dcp_minorant,
    dcp_verify,
    maxeig_minorant,
    soc_dist_subgrad,
)
from .linalg import (
    EigDecomposition,
    NotSpdError,
    NumericalError,
    smat,
    spd_solve,
    svec,
    svec_dim,
    sym_eig,
)
from .minorant import AffineCut, CutBlock, CutPool, cut_from_subgradient
from .problems import (
    ConeProgramInstance,
    LmiInstance,
    SeededRng,
    build_lmi_feasibility,
    build_pd_feasibility,
    gen_lmi,
    gen_socp,
    gen_sharp_l1,
    instance_from_json,
    instance_to_json,
    lmi_certificate_vector,
    pd_certificate_vector,
)
from .projection import (
    EmptyTargetSet,
    ProjectionProblem,
    QpSolution,
    assemble,
    project_auto,
    project_dual,
    project_primal,
    qp_solve,
)
from .solver import (
    IterationRecord,
    ProblemSpec,
    SharpnessTestConfig,
    SolveResult,
    SolverConfig,
    ZeroSubgradient,
    pmm_alternating,
    pmm_solve,
    polyak_step,
    violation,
)

__version__ = "0.1.0"

__all__ = [
    "AffineCut", "AffineFunction", "AffineSymMap", "ConeProgramInstance",
    "ConvexFunction", "CutBlock", "CutPool", "DcpError", "EigDecomposition",
    "EmptyTargetSet", "EuclideanNorm", "ExprNode", "ExprOracle",
    "IterationRecord", "L1Norm", "LinfNorm", "LmiInstance", "MaxEigAtom",
    "NotSpdError", "NumericalError", "ProblemSpec", "ProjectionProblem",
    "QpSolution", "SeededRng", "SharpnessTestConfig", "SocDistanceAtom",
    "SolveResult", "SolverConfig", "ZeroSubgradient", "assemble",
    "build_lmi_feasibility", "build_pd_feasibility", "cut_from_subgradient",
    "dcp_minorant", "dcp_verify", "gen_lmi", "gen_socp", "gen_sharp_l1",
    "instance_from_json", "instance_to_json", "lmi_certificate_vector",
    "maxeig_minorant", "pd_certificate_vector", "pmm_alternating", "pmm_solve",
    "polyak_step", "project_auto", "project_dual", "project_primal",
    "qp_solve", "smat", "soc_dist_subgrad", "spd_solve", "svec", "svec_dim",
    "sym_eig", "violation",
]
