"""Profile functions, connection kernels, Pareto weights, model specs.

Three shipped profile families (with connection probability
phi(distance^d / kernel(weights))):

  polynomial_tail   phi(x) = min(1, x**-alpha)
  stretched_exp     phi(x) = 1 - exp(-x**-alpha)
  indicator         phi(x) = 1 for x <= 1, else 0

and three kernel families:

  product           kappa(v, w) = v * w
  boolean_sum       kappa(v, w) = (v**(1/d) + w**(1/d))**d
  age_min_max       kappa(v, w) = min(v,w)**(1/gamma - 1) * max(v,w)

Vertex weights are Pareto with density (beta - 1) t**-beta on [1, inf).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation

__all__ = [
    "PROFILE_VARIANTS",
    "KERNEL_VARIANTS",
    "ProfileSpec",
    "KernelSpec",
    "ModelSpec",
    "AssumptionAReport",
    "profile_eval",
    "kernel_eval",
    "limiting_kernel_eval",
    "weight_quantile",
    "audit_assumption_a",
    "boolean_model",
    "scale_free_percolation",
    "age_attachment",
]

PROFILE_VARIANTS = ("polynomial_tail", "stretched_exp", "indicator")
KERNEL_VARIANTS = ("product", "boolean_sum", "age_min_max")


@dataclass(frozen=True)
class ProfileSpec:
    variant: str
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.variant not in PROFILE_VARIANTS:
            raise ContractViolation(f"unknown profile variant {self.variant!r}")
        if self.variant != "indicator":
            if self.alpha is None or not (self.alpha > 1):
                raise ContractViolation(
                    f"profile {self.variant!r} needs alpha > 1, got {self.alpha}"
                )

    @property
    def tail_exponent(self) -> float:
        """Exponent alpha with phi(x) <= min(1, C x**-alpha); the
        indicator profile satisfies the bound for every alpha."""
        return math.inf if self.variant == "indicator" else float(self.alpha)

    @property
    def compact_support(self) -> bool:
        return self.variant == "indicator"

    @property
    def integral(self) -> float:
        """Closed form of the total mass integral of phi over [0, inf)."""
        if self.variant == "indicator":
            return 1.0
        if self.variant == "polynomial_tail":
            return self.alpha / (self.alpha - 1.0)
        return math.gamma(1.0 - 1.0 / self.alpha)


def profile_eval(p: ProfileSpec, x):
    """Connection probability profile, vectorised over x >= 0."""
    x = np.asarray(x, dtype=float)
    if p.variant == "indicator":
        out = np.where(x <= 1.0, 1.0, 0.0)
    elif p.variant == "polynomial_tail":
        with np.errstate(divide="ignore"):
            out = np.minimum(1.0, x ** (-p.alpha))
    else:  # stretched_exp; continuous at 0 with value 1
        with np.errstate(divide="ignore", over="ignore"):
            out = -np.expm1(-(x ** (-p.alpha)))
        out = np.where(x == 0.0, 1.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelSpec:
    variant: str
    gamma: Optional[float] = None   # age_min_max only
    d: Optional[int] = None         # boolean_sum only

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise ContractViolation(f"unknown kernel variant {self.variant!r}")
        if self.variant == "age_min_max":
            if self.gamma is None or not (0.0 < self.gamma < 1.0):
                raise ContractViolation(f"age_min_max needs gamma in (0,1), got {self.gamma}")
        if self.variant == "boolean_sum":
            if self.d is None or self.d < 1:
                raise ContractViolation("boolean_sum needs the spatial dimension d")


def kernel_eval(k: KernelSpec, v, w):
    """Symmetric connection kernel kappa(v, w) for weights v, w >= 1."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(v < 1.0) or np.any(w < 1.0):
        raise ContractViolation("kernel arguments must be >= 1")
    if k.variant == "product":
        out = v * w
    elif k.variant == "boolean_sum":
        inv = 1.0 / k.d
        out = (v ** inv + w ** inv) ** k.d
    else:
        expo = 1.0 / k.gamma - 1.0
        out = np.minimum(v, w) ** expo * np.maximum(v, w)
    return out if out.ndim else float(out)


def limiting_kernel_eval(k: KernelSpec, v, w):
    """Rescaled limit of kappa(x*v, w)/x as x grows; linear in v.

    Closed forms: product -> v*w, boolean_sum -> v,
    age_min_max -> v * w**(1/gamma - 1).
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if k.variant == "product":
        out = v * w
    elif k.variant == "boolean_sum":
        out = v * np.ones_like(w)
    else:
        out = v * w ** (1.0 / k.gamma - 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModelSpec:
    d: int
    beta: float
    profile: ProfileSpec
    kernel: KernelSpec
    vertex_case: str = "poisson"

    def __post_init__(self):
        if self.d < 1:
            raise ContractViolation("d must be >= 1")
        if not (self.beta > 2.0):
            raise ContractViolation(f"beta must exceed 2, got {self.beta}")
        if self.vertex_case not in ("lattice", "poisson"):
            raise ContractViolation(f"vertex_case must be lattice or poisson, got {self.vertex_case!r}")
        if self.kernel.variant == "boolean_sum" and self.kernel.d != self.d:
            raise ContractViolation("boolean_sum kernel dimension must match the model dimension")
        if self.kernel.variant == "age_min_max":
            implied = 1.0 + 1.0 / self.kernel.gamma
            if abs(self.beta - implied) > 1e-9:
                raise ContractViolation(
                    f"age_min_max requires beta = 1 + 1/gamma = {implied}, got beta={self.beta}"
                )


def boolean_model(d: int, beta: float, vertex_case: str = "poisson") -> ModelSpec:
    """Heavy-tailed Boolean model: balls of radius W**(1/d) touching."""
    return ModelSpec(
        d=d,
        beta=beta,
        profile=ProfileSpec("indicator"),
        kernel=KernelSpec("boolean_sum", d=d),
        vertex_case=vertex_case,
    )


def scale_free_percolation(d: int, beta: float, alpha: float, vertex_case: str = "lattice") -> ModelSpec:
    return ModelSpec(
        d=d,
        beta=beta,
        profile=ProfileSpec("stretched_exp", alpha=alpha),
        kernel=KernelSpec("product"),
        vertex_case=vertex_case,
    )


def age_attachment(d: int, gamma: float, alpha: float, vertex_case: str = "poisson") -> ModelSpec:
    """Static rescaled form of the age-based preferential attachment graph."""
    return ModelSpec(
        d=d,
        beta=1.0 + 1.0 / gamma,
        profile=ProfileSpec("polynomial_tail", alpha=alpha),
        kernel=KernelSpec("age_min_max", gamma=gamma),
        vertex_case=vertex_case,
    )


def weight_quantile(beta: float, u):
    """Inverse CDF of the Pareto weight law: (1-u)**(-1/(beta-1))."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ContractViolation("quantile argument must lie in (0,1)")
    out = (1.0 - u) ** (-1.0 / (beta - 1.0))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Heuristic numerical audit of the standing kernel/profile assumptions.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionAReport:
    kernel_bounds_ok: bool
    kernel_c: float
    kernel_C: float
    profile_bounds_ok: bool
    profile_c: float
    profile_C: float
    limiting_kernel_converged: bool
    max_rel_residual: float
    flat_pieces_suspect: bool
    grid_size: int
    weight_grid_max: float

    @property
    def all_ok(self) -> bool:
        return (
            self.kernel_bounds_ok
            and self.profile_bounds_ok
            and self.limiting_kernel_converged
        )


def _growth_suspect(outer: float, inner: float, factor: float = 3.0) -> bool:
    # Witness keeps growing across the outermost grid decade.
    if inner <= 0.0:
        return outer > 0.0
    return outer / inner > factor


def audit_assumption_a(
    m: ModelSpec,
    grid_size: int = 48,
    kernel_fn: Optional[Callable] = None,
    profile_fn: Optional[Callable] = None,
) -> AssumptionAReport:
    """Grid-based check of the kernel/profile growth bounds.

    This verifies falsifiable finite evidence for the inequalities
    c*v <= kappa(v,w) <= C*v*w**((beta-2) or 1)  (v >= w >= 1),
    c*1{x<=c} <= phi(x) <= min(1, C x**-alpha), convergence of
    kappa(x*v, w)/x, and the absence of interior flat pieces of phi.
    Failures are reported in the flags, never raised.  `kernel_fn` and
    `profile_fn` are audit seams for examining candidate models that are
    not part of the shipped families.
    """
    if grid_size < 16:
        raise ContractViolation("grid_size must be >= 16")
    kfn = kernel_fn or (lambda v, w: kernel_eval(m.kernel, v, w))
    pfn = profile_fn or (lambda x: profile_eval(m.profile, x))
    w_hi = 1e6
    ws = np.logspace(0.0, math.log10(w_hi), grid_size)
    v_col = ws[:, None]
    w_row = ws[None, :]
    mask = v_col >= w_row
    m_exp = max(m.beta - 2.0, 1.0)

    with np.errstate(over="ignore"):
        ratio_lo = np.where(mask, kfn(v_col, w_row) / v_col, np.nan)
        ratio_up = np.where(mask, kfn(v_col, w_row) / (v_col * w_row ** m_exp), np.nan)
    inner = w_row <= w_hi / 10.0
    c_wit = float(np.nanmin(ratio_lo))
    C_wit = float(np.nanmax(ratio_up))
    lo_inner = float(np.nanmin(np.where(inner, ratio_lo, np.nan)))
    up_inner = float(np.nanmax(np.where(inner, ratio_up, np.nan)))
    kernel_ok = (
        c_wit > 0.0
        and not _growth_suspect(C_wit, up_inner)
        and not _growth_suspect(1.0 / max(c_wit, 1e-300), 1.0 / max(lo_inner, 1e-300))
    )

    alpha = m.profile.tail_exponent
    alpha_eff = alpha if math.isfinite(alpha) else 2.0
    xs = np.logspace(-3.0, 6.0, 4 * grid_size)
    phi = np.asarray(pfn(xs), dtype=float)
    wit = phi * xs ** alpha_eff
    outer_mask = xs > 1e5
    C_prof = float(np.max(wit))
    C_prof_inner = float(np.max(wit[~outer_mask]))
    upper_ok = not _growth_suspect(float(np.max(wit[outer_mask])), C_prof_inner)
    # Lower witness: largest grid x with phi(x) >= x gives c*1{x<=c} <= phi.
    feas = xs[(phi >= xs) & (xs <= 1.0)]
    c_prof = float(feas.max()) if feas.size else 0.0
    profile_ok = upper_ok and c_prof > 0.0

    # Cauchy convergence of kappa(x*v, w)/x along x = 1e2 .. 1e8.
    xs_lim = 10.0 ** np.arange(2, 9)
    v_s = np.array([0.5, 1.0, 3.7, 10.0])
    w_s = np.array([1.0, 2.5, 30.0, 1e3])
    resid = 0.0
    prev = None
    diffs = []
    for x in xs_lim:
        cur = np.asarray(kfn(x * v_s[:, None], w_s[None, :]), dtype=float) / x
        if prev is not None:
            diffs.append(float(np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-30))))
        prev = cur
    resid = diffs[-1]
    limiting_ok = resid < 5e-2 and (diffs[-1] <= diffs[0] + 1e-12)

    # Flat pieces strictly between inf and sup on >= 2 adjacent cells.
    xs_flat = np.linspace(0.0, 4.0, 6 * grid_size)
    ph = np.asarray(pfn(xs_flat), dtype=float)
    lo, hi = float(ph.min()), float(ph.max())
    tol = 1e-9
    interior = (ph > lo + 1e-6) & (ph < hi - 1e-6)
    same = np.abs(np.diff(ph)) < tol
    runs = same[:-1] & same[1:] & interior[1:-1]
    flat_suspect = bool(np.any(runs))

    return AssumptionAReport(
        kernel_bounds_ok=bool(kernel_ok),
        kernel_c=c_wit,
        kernel_C=C_wit,
        profile_bounds_ok=bool(profile_ok),
        profile_c=c_prof,
        profile_C=C_prof,
        limiting_kernel_converged=bool(limiting_ok),
        max_rel_residual=resid,
        flat_pieces_suspect=flat_suspect,
        grid_size=grid_size,
        weight_grid_max=w_hi,
    )
