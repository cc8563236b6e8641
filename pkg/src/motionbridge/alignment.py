"""Order-preserving Wasserstein alignment between motion clips.

Two clips are treated as uniform empirical measures over their frames. On
top of the pairwise pose-distance cost, two temporal regularizers shape
the coupling: an inverse-difference-moment bonus that rewards transporting
between frames with similar normalized timestamps, and a KL penalty toward
a Gaussian prior peaked on the normalized diagonal. The combined objective
is minimized with Sinkhorn scaling of the kernel P * exp((H - D) / lambda2),
which is the stationarity condition of the regularized objective.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError, EmptyInputError, NumericOverflowError
from .pose import MetricConfig, MotionClip

# Kernel exponents are clamped here before exponentiation; doubles overflow
# just past 709.
_EXP_CLAMP = 700.0
_KERNEL_FLOOR = 1e-300

SOLVER_MODES = ("standard", "log")


@dataclass
class OpwParams:
    """Regularizer weights and Sinkhorn iteration budget.

    lambda1 weights the temporal-locality bonus, lambda2 the entropic/KL
    smoothing, delta the prior's standard deviation. tolerance=0 runs
    exactly max_iters sweeps; a positive tolerance stops early once the L1
    marginal violation drops below it.
    """

    lambda1: float = 50.0
    lambda2: float = 0.1
    delta: float = 1.0
    max_iters: int = 20
    tolerance: float = 0.0

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")
        if self.lambda2 <= 0:
            raise ValueError(f"lambda2 must be positive, got {self.lambda2}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(eq=False)
class TransportPlan:
    """Nonnegative N x M coupling with uniform prescribed marginals."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.row_marginal = np.asarray(self.row_marginal, dtype=float)
        self.col_marginal = np.asarray(self.col_marginal, dtype=float)
        n, m = self.matrix.shape
        if self.row_marginal.shape != (n,) or self.col_marginal.shape != (m,):
            raise DimensionMismatchError(
                f"marginals {self.row_marginal.shape}/{self.col_marginal.shape} "
                f"do not fit a {n}x{m} plan"
            )

    @classmethod
    def uniform(cls, matrix: np.ndarray) -> "TransportPlan":
        matrix = np.asarray(matrix, dtype=float)
        n, m = matrix.shape
        return cls(matrix, np.full(n, 1.0 / n), np.full(m, 1.0 / m))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def marginal_violation(self) -> float:
        """L1 deviation of the plan's actual marginals from the targets."""
        row_err = np.abs(self.matrix.sum(axis=1) - self.row_marginal).sum()
        col_err = np.abs(self.matrix.sum(axis=0) - self.col_marginal).sum()
        return float(row_err + col_err)


@dataclass(eq=False)
class AlignmentResult:
    plan: TransportPlan
    distance: float
    iterations_used: int
    marginal_error: float
    regularized_objective: float = 0.0


def cost_matrix(s: MotionClip, t: MotionClip, cfg: MetricConfig | None = None) -> np.ndarray:
    """Pairwise pose distances, shape (N, M)."""
    cfg = cfg or MetricConfig()
    if s.joint_count != t.joint_count:
        raise DimensionMismatchError(
            f"clips have {s.joint_count} and {t.joint_count} joints"
        )
    roots_s = s.roots()
    roots_t = t.roots()
    diff = roots_s[:, None, :] - roots_t[None, :, :]
    root_d = np.sqrt(np.sum(diff * diff, axis=2))
    rot_s = s.rotation_array()
    rot_t = t.rotation_array()
    norm_s = np.linalg.norm(rot_s, axis=2)
    norm_t = np.linalg.norm(rot_t, axis=2)
    dots = np.abs(np.einsum("njk,mjk->nmj", rot_s, rot_t))
    dots = np.clip(dots / (norm_s[:, None, :] * norm_t[None, :, :]), -1.0, 1.0)
    rot_d = np.sum(2.0 * np.arccos(dots), axis=2)
    return root_d + cfg.w * rot_d


def idm_matrix(n: int, m: int, p: OpwParams) -> np.ndarray:
    """Temporal-locality bonus: lambda1 / ((i/n - j/m)^2 + 1), 1-based."""
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be >= 1")
    rows = np.arange(1, n + 1)[:, None] / n
    cols = np.arange(1, m + 1)[None, :] / m
    return p.lambda1 / ((rows - cols) ** 2 + 1.0)


def gaussian_prior(n: int, m: int, p: OpwParams) -> np.ndarray:
    """Gaussian prior over normalized timestamp differences, 1-based.

    The difference |i/n - j/m| is standardized by sqrt(1/n^2 + 1/m^2), so
    the peak 1/(delta*sqrt(2*pi)) sits on the normalized diagonal and all
    entries are strictly positive.
    """
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be >= 1")
    rows = np.arange(1, n + 1)[:, None] / n
    cols = np.arange(1, m + 1)[None, :] / m
    d = np.abs(rows - cols) / np.sqrt(1.0 / n**2 + 1.0 / m**2)
    peak = 1.0 / (p.delta * np.sqrt(2.0 * np.pi))
    return peak * np.exp(-(d**2) / (2.0 * p.delta**2))


def sinkhorn_plan(
    cost: np.ndarray,
    locality: np.ndarray,
    prior: np.ndarray,
    lambda2: float,
    max_iters: int,
    tolerance: float = 0.0,
    mode: str = "standard",
) -> tuple[np.ndarray, int, float]:
    """Sinkhorn scaling of the kernel prior * exp((locality - cost)/lambda2).

    Returns (plan, iterations_used, final L1 marginal violation). The
    standard mode clamps exponents at +700 and floors kernel entries at
    1e-300; if scaling still leaves the finite range it raises
    NumericOverflowError suggesting a larger lambda2 or the log mode. The
    log mode runs entirely in log space and cannot overflow.
    """
    if mode not in SOLVER_MODES:
        raise ValueError(f"mode must be one of {SOLVER_MODES}")
    n, m = cost.shape
    if locality.shape != (n, m) or prior.shape != (n, m):
        raise DimensionMismatchError("cost, locality, and prior shapes differ")
    alpha = np.full(n, 1.0 / n)
    beta = np.full(m, 1.0 / m)
    exponent = (locality - cost) / lambda2

    def finish(plan, iters):
        row_err = np.abs(plan.sum(axis=1) - alpha).sum()
        col_err = np.abs(plan.sum(axis=0) - beta).sum()
        return plan, iters, float(row_err + col_err)

    if mode == "log":
        log_kernel = np.log(prior) + exponent
        f = np.zeros(n)
        g = np.zeros(m)
        iters = 0
        for _ in range(max_iters):
            f = np.log(alpha) - logsumexp(log_kernel + g[None, :], axis=1)
            g = np.log(beta) - logsumexp(log_kernel + f[:, None], axis=0)
            iters += 1
            if tolerance > 0:
                plan = np.exp(f[:, None] + log_kernel + g[None, :])
                if TransportPlan.uniform(plan).marginal_violation() < tolerance:
                    break
        plan = np.exp(f[:, None] + log_kernel + g[None, :])
        return finish(plan, iters)

    with np.errstate(over="ignore"):
        kernel = prior * np.exp(np.minimum(exponent, _EXP_CLAMP))
    if not np.all(np.isfinite(kernel)):
        raise NumericOverflowError(
            "Sinkhorn kernel overflowed; increase lambda2 or use mode='log'"
        )
    kernel = np.maximum(kernel, _KERNEL_FLOOR)
    u = np.ones(n)
    v = np.ones(m)
    iters = 0
    for _ in range(max_iters):
        u = alpha / (kernel @ v)
        v = beta / (kernel.T @ u)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericOverflowError(
                "Sinkhorn scaling vectors overflowed; increase lambda2 or use mode='log'"
            )
        iters += 1
        if tolerance > 0:
            plan = u[:, None] * kernel * v[None, :]
            if TransportPlan.uniform(plan).marginal_violation() < tolerance:
                break
    plan = u[:, None] * kernel * v[None, :]
    return finish(plan, iters)


def opw_align(
    s: MotionClip,
    t: MotionClip,
    p: OpwParams | None = None,
    cfg: MetricConfig | None = None,
    mode: str = "standard",
) -> AlignmentResult:
    """Align two clips and return the coupling plus the transport cost.

    The reported distance is the Frobenius inner product of the returned
    plan with the cost matrix (regularizer terms are bookkeeping, exposed
    separately in regularized_objective).
    """
    p = p or OpwParams()
    if len(s.frames) == 0 or len(t.frames) == 0:
        raise EmptyInputError("cannot align empty clips")
    cost = cost_matrix(s, t, cfg)
    n, m = cost.shape
    locality = idm_matrix(n, m, p)
    prior = gaussian_prior(n, m, p)
    matrix, iters, marginal_error = sinkhorn_plan(
        cost, locality, prior, p.lambda2, p.max_iters, p.tolerance, mode
    )
    plan = TransportPlan.uniform(matrix)
    distance = float(np.sum(matrix * cost))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(matrix > 0, matrix / prior, 1.0)
        kl = float(np.sum(np.where(matrix > 0, matrix * np.log(ratio), 0.0)))
    idm_term = float(np.sum(matrix * locality))
    objective = distance - idm_term + p.lambda2 * kl
    return AlignmentResult(
        plan=plan,
        distance=distance,
        iterations_used=iters,
        marginal_error=marginal_error,
        regularized_objective=objective,
    )
