"""Numerical evaluation of the limit objects of the model.

Central quantities, all deterministic up to stated tolerances unless a
Monte-Carlo method is documented:

  big_lambda_wz(w, z)   expected connection probability between a hub of
                        scaled weight w at the origin and a point z of the
                        unit cube, weight integrated out (limiting kernel)
  big_lambda(w)         its integral over the unit cube; the asymptotic
                        fraction of vertices a hub of scaled weight w grabs
  small_lambda_wz(w, z) same with the finite-volume kernel, z in R^d
  lambda_f(w)           degree-type functionals of a weight-w vertex
  mu()                  asymptotic edge density
  f_rho(rho)            rate constant of the polynomial tail of the
                        excess-edge event
  s_tail / atom         conditional law of the limiting excess
  wave_integral         macroscopic edge-length measure of planted hubs
  d_infty_pmf           degree law of a typical weight-w vertex
  pi_ab_oracle          joint law of bulk/hub degrees given planted hubs
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ContractViolation, NumericsError
from .models import (
    ModelSpec,
    kernel_eval,
    limiting_kernel_eval,
    profile_eval,
)
from .rng import RngStream, TAG_MC
from .torus import TorusSpec, cube_ball_volume, torus_distance

__all__ = [
    "QuadSpec",
    "LambdaTable",
    "WaveSpec",
    "RadialFunction",
    "radial_indicator",
    "radial_one",
    "big_lambda_wz",
    "big_lambda",
    "build_lambda_table",
    "small_lambda_wz",
    "lambda_f",
    "lambda_f_with_tail",
    "mu",
    "FRhoResult",
    "f_rho",
    "s_tail",
    "excess_atom_mass",
    "wave_integral",
    "d_infty_pmf",
    "d_infty_pmf_vector",
    "PiAbTable",
    "pi_ab_table",
    "pi_ab_oracle",
]


@dataclass(frozen=True)
class QuadSpec:
    """Knobs for quadrature and Monte-Carlo estimators."""

    mc_samples: int = 200_000
    quad_points_per_axis: int = 32
    truncation_radius: float = 50.0
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9

    def __post_init__(self):
        if self.mc_samples < 1000:
            raise ContractViolation("mc_samples must be >= 1000")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ContractViolation("tolerances must be positive")
        if self.quad_points_per_axis < 4:
            raise ContractViolation("quad_points_per_axis must be >= 4")
        if not (self.truncation_radius > 0):
            raise ContractViolation("truncation_radius must be positive")


@lru_cache(maxsize=64)
def _gl_nodes(n: int):
    # Gauss-Legendre nodes/weights mapped onto [0, 1].
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _converge(eval_fn: Callable[[int], float], start: int, q: QuadSpec, what: str,
              max_doubles: int = 7) -> float:
    prev = eval_fn(start)
    n = start
    for _ in range(max_doubles):
        n *= 2
        cur = eval_fn(n)
        if abs(cur - prev) <= max(q.abs_tol, q.rel_tol * abs(cur)):
            return cur
        prev = cur
    raise NumericsError(f"{what}: no convergence, residual {abs(cur - prev):.3e} at {n} points")


# ---------------------------------------------------------------------------
# Expected profile value over a Pareto weight in the second kernel slot.
# ---------------------------------------------------------------------------

def _kernel_on_weights(m: ModelSpec, w: float, W: np.ndarray, limiting: bool) -> np.ndarray:
    if limiting:
        return limiting_kernel_eval(m.kernel, w, W)
    return kernel_eval(m.kernel, w, W)


def _kernel_inverse_weight(m: ModelSpec, w: float, t: np.ndarray, limiting: bool) -> np.ndarray:
    """Smallest weight W* >= 1 with kernel(w, W*) >= t (inf if none)."""
    t = np.asarray(t, dtype=float)
    k = m.kernel
    if k.variant == "product":
        ws = t / w
    elif k.variant == "boolean_sum":
        if limiting:
            # kernel equals w independently of W; no finite crossing
            return np.where(t <= w, 1.0, np.inf)
        s = t ** (1.0 / k.d) - w ** (1.0 / k.d)
        ws = np.where(s > 0.0, s, 0.0) ** k.d
    else:  # age_min_max
        expo = 1.0 / k.gamma - 1.0
        if limiting:
            ws = (t / w) ** (1.0 / expo)
        else:
            low = t <= w * np.ones_like(t)
            mid = t <= w ** (expo + 1.0)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                ws_mid = (t / w) ** (1.0 / expo)
                ws_hi = t / w ** expo
            ws = np.where(low, 1.0, np.where(mid, ws_mid, ws_hi))
    return np.maximum(ws, 1.0)


def _weight_mean_profile(m: ModelSpec, w: float, t, limiting: bool, n_nodes: int) -> np.ndarray:
    """E[ phi(t / kernel(w, W)) ] over the Pareto weight W, vectorised in t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    beta = m.beta
    if m.kernel.variant == "boolean_sum" and limiting:
        # Limiting kernel is constant in the weight.
        return np.asarray(profile_eval(m.profile, t / w), dtype=float)
    if m.profile.variant == "indicator":
        wstar = _kernel_inverse_weight(m, w, t, limiting)
        out = np.where(np.isfinite(wstar), np.maximum(wstar, 1.0) ** (1.0 - beta), 0.0)
        return out
    # Smooth profiles: substitute W = (1-u)^(-1/(beta-1)) and integrate on
    # (0,1) with panels refined around the weight scale W* at which the
    # profile argument crosses 1; the integrand transitions there and can
    # otherwise hide in a boundary sliver near u = 1.
    wstar = np.maximum(_kernel_inverse_weight(m, w, t, limiting), 1.0)
    scales = 16.0 ** np.arange(-1, 3)
    with np.errstate(over="ignore", invalid="ignore"):
        breaks = 1.0 - (wstar[:, None] * scales[None, :]) ** (1.0 - beta)
    breaks = np.clip(np.nan_to_num(breaks, nan=1.0), 0.0, 1.0)
    edges = np.concatenate(
        [np.zeros((t.shape[0], 1)), np.sort(breaks, axis=1), np.ones((t.shape[0], 1))],
        axis=1,
    )
    x_std, w_std = _gl_nodes(n_nodes)
    total = np.zeros_like(t)
    for p in range(edges.shape[1] - 1):
        lo = edges[:, p]
        width = edges[:, p + 1] - lo
        u = lo[:, None] + width[:, None] * x_std[None, :]
        with np.errstate(divide="ignore", over="ignore"):
            W = (1.0 - u) ** (-1.0 / (beta - 1.0))
            K = _kernel_on_weights(m, w, W, limiting)
            vals = profile_eval(m.profile, t[:, None] / K)
        total += width * (vals @ w_std)
    return total


def big_lambda_wz(m: ModelSpec, w: float, z, q: QuadSpec) -> float:
    """Expected connection probability of a scaled-weight-w hub to cube point z."""
    if not (w > 0):
        raise ContractViolation("w must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (m.d,):
        raise ContractViolation(f"z must have dimension {m.d}")
    t = float(np.linalg.norm(z)) ** m.d
    if m.kernel.variant == "boolean_sum" or m.profile.variant == "indicator":
        return float(_weight_mean_profile(m, w, t, True, q.quad_points_per_axis)[0])
    return _converge(
        lambda n: float(_weight_mean_profile(m, w, t, True, n)[0]),
        q.quad_points_per_axis,
        q,
        "big_lambda_wz",
    )


def small_lambda_wz(m: ModelSpec, w: float, z, q: QuadSpec) -> float:
    """Expected connection probability of a weight-w vertex to a point z of R^d."""
    if not (w >= 1):
        raise ContractViolation("w must be >= 1")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (m.d,):
        raise ContractViolation(f"z must have dimension {m.d}")
    t = float(np.linalg.norm(z)) ** m.d
    if m.profile.variant == "indicator":
        return float(_weight_mean_profile(m, w, t, False, q.quad_points_per_axis)[0])
    return _converge(
        lambda n: float(_weight_mean_profile(m, w, t, False, n)[0]),
        q.quad_points_per_axis,
        q,
        "small_lambda_wz",
    )


# ---------------------------------------------------------------------------
# Radial test functions and integrals over the unit cube.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialFunction:
    """Nonnegative radial test function r -> fn(r) with declared support."""

    fn: Callable[[np.ndarray], np.ndarray]
    support: tuple = (0.0, math.inf)
    breakpoints: tuple = ()

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=float))


def radial_indicator(lo: float, hi: float) -> RadialFunction:
    if not (0.0 <= lo < hi):
        raise ContractViolation("need 0 <= lo < hi")
    return RadialFunction(
        fn=lambda r: ((r >= lo) & (r < hi)).astype(float),
        support=(lo, hi),
        breakpoints=(lo, hi),
    )


def radial_one() -> RadialFunction:
    return RadialFunction(fn=lambda r: np.ones_like(r), support=(0.0, math.inf))


def _hub_profile_breaks(m: ModelSpec, w: float) -> tuple:
    # Radii where r -> E[phi(r^d / K(w, W))] has a jump or kink.
    if m.profile.variant not in ("indicator", "polynomial_tail"):
        return ()
    k1 = float(limiting_kernel_eval(m.kernel, w, 1.0))
    return (k1 ** (1.0 / m.d),)


def _cube_radial_integral(fn_r: Callable, d: int, r_lo: float, r_hi: float,
                          breaks: Sequence[float], n_shells: int) -> float:
    """Integral of fn_r(|z|) over the part of the unit cube with |z| in
    [r_lo, r_hi], via radial shells weighted by exact shell volumes."""
    half_diag = math.sqrt(d) / 2.0
    r_hi = min(r_hi, half_diag)
    if r_hi <= r_lo:
        return 0.0
    edges = np.linspace(r_lo, r_hi, n_shells + 1)
    br = [b for b in breaks if r_lo < b < r_hi]
    if br:
        edges = np.unique(np.concatenate([edges, np.asarray(br, dtype=float)]))
    vols = np.array([cube_ball_volume(float(r), d) for r in edges])
    masses = np.diff(vols)
    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = np.asarray(fn_r(mids), dtype=float)
    return float(np.dot(vals, masses))


def _lambda_f_cube(m: ModelSpec, w: float, f: RadialFunction, q: QuadSpec) -> float:
    lo = max(0.0, f.support[0])
    hi = min(f.support[1], math.sqrt(m.d) / 2.0)
    breaks = tuple(f.breakpoints) + _hub_profile_breaks(m, w)

    def fn_r(r):
        h = _weight_mean_profile(m, w, r ** m.d, True, q.quad_points_per_axis)
        return np.asarray(f(r), dtype=float) * h

    return _converge(
        lambda n: _cube_radial_integral(fn_r, m.d, lo, hi, breaks, n),
        64,
        q,
        "cube radial integral",
    )


def wave_integral(f: RadialFunction, spec: "WaveSpec", m: ModelSpec, q: QuadSpec) -> float:
    """Macroscopic edge-length functional sum_i int f(|z|) Lambda(y_i, z) dz."""
    return float(sum(_lambda_f_cube(m, float(y), f, q) for y in spec.ys))


def big_lambda(m: ModelSpec, w: float, q: QuadSpec) -> float:
    """Asymptotic fraction of the vertex set adjacent to a hub of scaled weight w."""
    if not (w > 0):
        raise ContractViolation("w must be positive")
    if m.kernel.variant == "boolean_sum" and m.profile.variant == "indicator":
        return cube_ball_volume(w ** (1.0 / m.d), m.d)
    return _lambda_f_cube(m, w, radial_one(), q)


@dataclass(frozen=True)
class WaveSpec:
    """Scaled hub weights (descending) defining a macroscopic wave measure."""

    ys: tuple

    def __post_init__(self):
        ys = tuple(float(y) for y in self.ys)
        if len(ys) == 0 or any(y <= 0 for y in ys):
            raise ContractViolation("weight scales must be positive and nonempty")
        if any(ys[i] < ys[i + 1] for i in range(len(ys) - 1)):
            raise ContractViolation("weight scales must be sorted descending")
        object.__setattr__(self, "ys", ys)


# ---------------------------------------------------------------------------
# Tabulated big_lambda with monotone interpolation and inversion.
# ---------------------------------------------------------------------------

def _isotonic_nondecreasing(values: np.ndarray) -> np.ndarray:
    # Pool-adjacent-violators projection onto nondecreasing sequences.
    vals = list(map(float, values))
    level = []
    weight = []
    for v in vals:
        level.append(v)
        weight.append(1.0)
        while len(level) > 1 and level[-2] > level[-1]:
            w_new = weight[-2] + weight[-1]
            v_new = (level[-2] * weight[-2] + level[-1] * weight[-1]) / w_new
            level = level[:-2] + [v_new]
            weight = weight[:-2] + [w_new]
    out = []
    for v, wgt in zip(level, weight):
        out.extend([v] * int(wgt))
    return np.asarray(out)


@dataclass
class LambdaTable:
    """Monotone piecewise-linear tabulation of big_lambda on a weight grid."""

    model: ModelSpec
    grid: np.ndarray
    values: np.ndarray

    def eval(self, w):
        w = np.asarray(w, dtype=float)
        out = np.interp(w, self.grid, self.values)
        # Linear to the origin below the grid; the function vanishes at 0.
        low = w < self.grid[0]
        if np.any(low):
            out = np.where(low, self.values[0] * w / self.grid[0], out)
        return out if out.ndim else float(out)

    def b_star(self, target: float) -> float:
        """Largest weight scale whose tabulated value stays <= target."""
        vals, grid = self.values, self.grid
        if target < vals[0]:
            raise NumericsError(
                f"table starts above target {target}; rebuild with smaller w_min"
            )
        if target >= vals[-1]:
            raise NumericsError(
                f"table tops out at {vals[-1]} below target {target}; rebuild with larger w_max"
            )
        i = int(np.searchsorted(vals, target, side="right"))
        v0, v1 = vals[i - 1], vals[i]
        if v1 <= v0:
            return float(grid[i - 1])
        return float(grid[i - 1] + (target - v0) / (v1 - v0) * (grid[i] - grid[i - 1]))

    def invert(self, target: float) -> float:
        return self.b_star(target)

    def strictly_increasing_at(self, target: float) -> bool:
        i = int(np.searchsorted(self.values, target, side="right"))
        if i <= 0 or i >= len(self.values):
            return False
        return self.values[i] > self.values[i - 1] + 1e-15


def build_lambda_table(m: ModelSpec, w_max: float, grid_size: int, q: QuadSpec,
                       w_min: Optional[float] = None) -> LambdaTable:
    """Log-spaced tabulation of big_lambda on (w_min, w_max].

    w_min defaults to the largest power-of-4 subdivision with
    big_lambda(w_min) < 0.01.  Raw quadrature values are projected onto
    nondecreasing sequences and clipped to [0, 1].
    """
    if grid_size < 32:
        raise ContractViolation("grid_size must be >= 32")
    if w_min is None:
        w_min = w_max * 1e-4
        for _ in range(60):
            if big_lambda(m, w_min, q) < 0.01:
                break
            w_min /= 4.0
    grid = np.geomspace(w_min, w_max, grid_size)
    plateau = (math.sqrt(m.d) / 2.0) ** m.d
    if w_min < plateau < w_max:
        grid = np.unique(np.concatenate([grid, [plateau]]))
    values = np.array([big_lambda(m, float(w), q) for w in grid])
    values = np.clip(_isotonic_nondecreasing(values), 0.0, 1.0)
    return LambdaTable(model=m, grid=grid, values=values)


# ---------------------------------------------------------------------------
# Degree-type functionals lambda_f at finite kernel scale.
# ---------------------------------------------------------------------------

def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _radial_profile_integral(m: ModelSpec, w: float, f: Optional[RadialFunction],
                             r_lo: float, r_hi: float, q: QuadSpec, n_panels: int) -> float:
    """integral over r in [r_lo, r_hi] of f(r) lambda(w, r) S_{d-1} r^{d-1} dr."""
    breaks = [r_lo, r_hi]
    if m.profile.variant in ("indicator", "polynomial_tail"):
        k1 = float(kernel_eval(m.kernel, w, 1.0)) ** (1.0 / m.d)
        if r_lo < k1 < r_hi:
            breaks.append(k1)
    if f is not None:
        breaks.extend(b for b in f.breakpoints if r_lo < b < r_hi)
    breaks = np.unique(np.asarray(breaks, dtype=float))
    x_std, w_std = _gl_nodes(q.quad_points_per_axis)
    total = 0.0
    area = _sphere_area(m.d)
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, n_panels + 1)
        lo = edges[:-1]
        width = np.diff(edges)
        r = lo[:, None] + width[:, None] * x_std[None, :]
        rf = r.ravel()
        lam = _weight_mean_profile(m, w, rf ** m.d, False, q.quad_points_per_axis)
        vals = lam * rf ** (m.d - 1)
        if f is not None:
            vals = vals * np.asarray(f(rf), dtype=float)
        vals = vals.reshape(r.shape)
        total += float(np.sum(width * (vals @ w_std)))
    return area * total


def _lattice_points_by_norm(d: int, r_lo: float, r_hi: float):
    """Unique norms and multiplicities of lattice points with r_lo < |z| <= r_hi."""
    if d == 1:
        js = np.arange(math.floor(r_lo) + 1, math.floor(r_hi) + 1)
        js = js[(js > r_lo) & (js <= r_hi)]
        return js.astype(float), np.full(js.shape, 2.0)
    rng_1d = np.arange(-math.floor(r_hi), math.floor(r_hi) + 1)
    grids = np.meshgrid(*([rng_1d] * d), indexing="ij")
    sq = np.zeros(grids[0].shape, dtype=np.int64)
    for g in grids:
        sq += g.astype(np.int64) ** 2
    sq = sq.ravel()
    lo2 = int(math.floor(r_lo ** 2))
    keep = (sq > 0) & (sq > r_lo ** 2) & (sq <= r_hi ** 2)
    uniq, counts = np.unique(sq[keep], return_counts=True)
    return np.sqrt(uniq.astype(float)), counts.astype(float)


def _lattice_profile_sum(m: ModelSpec, w: float, f: Optional[RadialFunction],
                         r_lo: float, r_hi: float, q: QuadSpec) -> float:
    norms, mult = _lattice_points_by_norm(m.d, r_lo, r_hi)
    if norms.size == 0:
        return 0.0
    total = 0.0
    for s in range(0, norms.size, 100_000):
        chunk = norms[s:s + 100_000]
        lam = _weight_mean_profile(m, w, chunk ** m.d, False, q.quad_points_per_axis)
        if f is not None:
            lam = lam * np.asarray(f(chunk), dtype=float)
        total += float(np.dot(lam, mult[s:s + 100_000]))
    return total


def _shifted_radial_integral(m: ModelSpec, w: float, a: float, b: float,
                             shift: float, q: QuadSpec) -> float:
    # integral of lambda(w, r + shift) * S_{d-1} r^{d-1} over r in [a, b]
    if b <= a:
        return 0.0
    x_std, w_std = _gl_nodes(q.quad_points_per_axis)
    edges = np.linspace(a, b, 9)
    area = _sphere_area(m.d)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = lo + (hi - lo) * x_std
        arg = np.maximum(r + shift, 0.0)
        lam = _weight_mean_profile(m, w, arg ** m.d, False, q.quad_points_per_axis)
        total += (hi - lo) * float(np.dot(lam * r ** (m.d - 1), w_std))
    return area * total


def _lattice_block_bracket(m: ModelSpec, w: float, a: float, b: float,
                           q: QuadSpec) -> tuple:
    """Monotone-comparison bracket of the lattice shell sum over a < |z| <= b.

    Each lattice point owns a unit cell within half a diagonal of it, so
    the shell sum is squeezed between shifted continuum integrals.
    Returns (midpoint, half-width)."""
    delta = math.sqrt(m.d) / 2.0
    upper = _shifted_radial_integral(m, w, max(a - delta, 0.0), b + delta, -delta, q)
    lower = _shifted_radial_integral(m, w, a + delta, b - delta, +delta, q)
    return 0.5 * (upper + lower), 0.5 * (upper - lower)


def lambda_f_with_tail(m: ModelSpec, w: float, f: Optional[RadialFunction],
                       q: QuadSpec) -> tuple:
    """(value, tail_bound) for the degree functional of a weight-w vertex.

    f = None means the constant function 1 over all of space; the radial
    extent is then grown geometrically until the leftover tail, estimated
    from the decay rate of successive increments, drops below tolerance.
    """
    if not (w >= 1):
        raise ContractViolation("w must be >= 1")
    lattice = m.vertex_case == "lattice"
    if f is not None and math.isfinite(f.support[1]):
        lo, hi = max(0.0, f.support[0]), f.support[1]
        if lattice:
            return _lattice_profile_sum(m, w, f, lo, hi, q), 0.0
        value = _converge(
            lambda n: _radial_profile_integral(m, w, f, lo, hi, q, n),
            4, q, "radial profile integral",
        )
        return value, 0.0
    # Unbounded support: geometric extension with tail extrapolation.
    scale = float(kernel_eval(m.kernel, w, 1.0)) ** (1.0 / m.d)
    r_edge = max(q.truncation_radius, 4.0 * scale)
    ball_vol = math.pi ** (m.d / 2.0) / math.gamma(m.d / 2.0 + 1.0)
    if lattice:
        def block(a, b, adaptive=False):
            # beyond ~2e5 lattice points per shell, bracket by integrals
            if ball_vol * (b ** m.d - a ** m.d) <= 2e5:
                return _lattice_profile_sum(m, w, f, a, b, q), 0.0
            return _lattice_block_bracket(m, w, a, b, q)
    else:
        def block(a, b, adaptive=False):
            if adaptive:
                return _converge(
                    lambda n: _radial_profile_integral(m, w, f, a, b, q, n),
                    4, q, "radial profile integral",
                ), 0.0
            # extension blocks are smooth decaying annuli
            return _radial_profile_integral(m, w, f, a, b, q, 8), 0.0
    total, bracket_err = block(0.0, r_edge, adaptive=True)
    prev_inc = None
    prev_ratio = None
    tail_err = math.inf
    for _ in range(60):
        inc, berr = block(r_edge, 2.0 * r_edge)
        total += inc
        bracket_err += berr
        r_edge *= 2.0
        if inc <= 0.0:
            return total, bracket_err
        if prev_inc is not None and prev_inc > 0.0:
            ratio = inc / prev_inc
            if ratio < 0.95 and prev_ratio is not None:
                # geometric extrapolation of the leftover annuli; its
                # uncertainty comes from the drift of the measured ratio
                tail_corr = inc * ratio / (1.0 - ratio)
                tail_err = (
                    abs(ratio - prev_ratio) * inc / (1.0 - ratio) ** 2
                    + 1e-3 * tail_corr + bracket_err
                )
                if tail_err <= max(q.abs_tol, 0.5 * q.rel_tol * total):
                    return total + tail_corr, tail_err
            prev_ratio = ratio if ratio < 1.0 else None
        prev_inc = inc
    raise NumericsError(
        f"lambda_f tail uncertainty {tail_err:.3e} still above tolerance at"
        f" radius {r_edge:.3e}; increase truncation_radius"
    )


def lambda_f(m: ModelSpec, w: float, f: Optional[RadialFunction], q: QuadSpec) -> float:
    value, _ = lambda_f_with_tail(m, w, f, q)
    return value


# ---------------------------------------------------------------------------
# Asymptotic edge density.
# ---------------------------------------------------------------------------

def mu(m: ModelSpec, q: QuadSpec) -> float:
    """Asymptotic edges-per-vertex density, half the mean degree functional."""
    beta = m.beta

    def lam1(w: float) -> float:
        return lambda_f(m, float(w), None, q)

    def head(w_hi: float) -> float:
        edges = np.geomspace(1.0, w_hi, max(int(math.ceil(math.log10(w_hi))), 1) + 1)
        x_std, w_std = _gl_nodes(24)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            ws = a + (b - a) * x_std
            dens = (beta - 1.0) * ws ** (-beta)
            vals = np.array([lam1(wv) for wv in ws])
            total += (b - a) * float(np.dot(vals * dens, w_std))
        return total

    w_hi = 1000.0
    for _ in range(10):
        slope_hi = lam1(w_hi) / w_hi
        slope_lo = lam1(w_hi / 4.0) / (w_hi / 4.0)
        tail_est = slope_hi * (beta - 1.0) / (beta - 2.0) * w_hi ** (2.0 - beta)
        drift = abs(slope_lo - slope_hi) / max(slope_hi, 1e-300)
        head_val = head(w_hi)
        value = head_val + tail_est
        if drift * tail_est <= max(q.abs_tol, 10.0 * q.rel_tol * value):
            if value <= 0.0 or not math.isfinite(value):
                raise NumericsError("edge density evaluated non-finite or non-positive")
            return 0.5 * value
        w_hi *= 10.0
    raise NumericsError("edge density integral did not stabilise; possible divergence")


# ---------------------------------------------------------------------------
# Rate constant of the excess-edge event and the conditional excess law.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FRhoResult:
    value: float
    std_error: float
    deterministic: Optional[float]
    b_star: float
    k: int
    acceptance: float


def _check_rho(rho: float) -> int:
    if not (rho > 0):
        raise ContractViolation("rho must be positive")
    if abs(rho - round(rho)) < 1e-12:
        raise ContractViolation(
            f"rho must be non-integer (the decay exponent jumps at integers), got {rho}"
        )
    return int(math.ceil(rho))


def _truncated_pareto(beta: float, b_star: float, shape, rng: RngStream) -> np.ndarray:
    g = rng.generator()
    u = 1.0 - g.random(shape)  # in (0, 1]
    return b_star * u ** (-1.0 / (beta - 1.0))


def f_rho(rho: float, m: ModelSpec, table: LambdaTable, q: QuadSpec,
          rng: Optional[RngStream] = None) -> FRhoResult:
    """Rate constant of the polynomial excess-edge tail.

    Monte-Carlo over k i.i.d. weight scales from the tail-truncated
    proposal, with the exact truncation point below which the excess
    indicator cannot fire.  For k = 1 a deterministic table inversion is
    also returned when the tabulated curve is strictly increasing at the
    crossing.
    """
    k = _check_rho(rho)
    rng = rng or RngStream(0)
    beta = m.beta
    bstar = table.b_star(rho - (k - 1))
    zs = _truncated_pareto(beta, bstar, (q.mc_samples, k), rng.child(TAG_MC))
    sums = table.eval(zs).sum(axis=1) if k > 1 else np.asarray(table.eval(zs[:, 0]))
    acc = float(np.mean(sums > rho))
    mass = bstar ** ((1.0 - beta) * k) / math.factorial(k)
    se = mass * math.sqrt(max(acc * (1.0 - acc), 0.0) / q.mc_samples)
    det = None
    if k == 1 and table.strictly_increasing_at(rho):
        det = table.b_star(rho) ** (1.0 - beta)
    return FRhoResult(
        value=mass * acc,
        std_error=se,
        deterministic=det,
        b_star=bstar,
        k=k,
        acceptance=acc,
    )


def s_tail(s: float, rho: float, m: ModelSpec, table: LambdaTable, q: QuadSpec,
           rng: Optional[RngStream] = None) -> float:
    """Conditional tail P(excess > s) given the excess event at level rho.

    Shared proposal draws serve numerator and denominator, which cancels
    the truncation mass and most Monte-Carlo noise.
    """
    k = _check_rho(rho)
    if not (rho <= s < k):
        raise ContractViolation(f"need rho <= s < k, got s={s}, rho={rho}, k={k}")
    rng = rng or RngStream(0)
    bstar = table.b_star(rho - (k - 1))
    zs = _truncated_pareto(m.beta, bstar, (q.mc_samples, k), rng.child(TAG_MC))
    sums = table.eval(zs).sum(axis=1) if k > 1 else np.asarray(table.eval(zs[:, 0]))
    den = float(np.mean(sums > rho))
    if den <= 0.0:
        raise NumericsError(f"no accepted samples at rho={rho}, b*={bstar}")
    return float(np.mean(sums > s)) / den


def excess_atom_mass(rho: float, m: ModelSpec, table: LambdaTable, q: QuadSpec,
                     rng: Optional[RngStream] = None) -> float:
    """Mass of the atom of the limiting excess at its upper end k.

    Positive exactly when the tabulated curve reaches 1 at finite weight
    (each hub then saturates), e.g. for compact-support profiles.
    """
    k = _check_rho(rho)
    rng = rng or RngStream(0)
    bstar = table.b_star(rho - (k - 1))
    zs = _truncated_pareto(m.beta, bstar, (q.mc_samples, k), rng.child(TAG_MC))
    vals = table.eval(zs)
    if k > 1:
        sums = vals.sum(axis=1)
        saturated = np.all(vals >= 1.0 - 1e-12, axis=1)
    else:
        sums = np.asarray(vals[:, 0])
        saturated = vals[:, 0] >= 1.0 - 1e-12
    den = float(np.mean(sums > rho))
    if den <= 0.0:
        raise NumericsError(f"no accepted samples at rho={rho}, b*={bstar}")
    return float(np.mean(saturated)) / den


# ---------------------------------------------------------------------------
# Degree law of a typical vertex in the infinite-volume graph.
# ---------------------------------------------------------------------------

def d_infty_pmf_vector(m: ModelSpec, w: float, a_max: int, q: QuadSpec):
    """pmf of the root degree given weight w, on 0..a_max.

    Poisson case: Poisson with the mean degree functional.  Lattice
    case: exact convolution of the per-site connection Bernoullis out to
    a truncation radius grown until the leftover mean drops below
    abs_tol; returns (pmf, truncation_bound).
    """
    if a_max < 0:
        raise ContractViolation("a_max must be >= 0")
    if m.vertex_case == "poisson":
        lam1, tail = lambda_f_with_tail(m, w, None, q)
        return stats.poisson.pmf(np.arange(a_max + 1), lam1), float(tail)
    # Lattice: exact Bernoulli convolution over the nearby sites, the far
    # field Poissonised (error controlled by the Le Cam bound sum p^2).
    r_edge = max(q.truncation_radius, 4.0 * float(kernel_eval(m.kernel, w, 1.0)) ** (1.0 / m.d))
    norms, mult = _lattice_points_by_norm(m.d, 0.0, r_edge)
    probs = _weight_mean_profile(m, w, norms ** m.d, False, q.quad_points_per_axis)
    p_cut = 1e-4
    exact = probs >= p_cut
    lam_far = float(np.dot(probs[~exact], mult[~exact]))
    le_cam = float(np.dot(probs[~exact] ** 2, mult[~exact]))
    tail_val, tail_err = _lattice_tail_sum(m, w, r_edge, q)
    lam_far += tail_val
    le_cam += p_cut * tail_val
    pmf = np.zeros(a_max + 1)
    pmf[0] = 1.0
    for p, cnt in zip(probs[exact], mult[exact]):
        n_int = int(round(cnt))
        binom_pmf = stats.binom.pmf(np.arange(0, min(n_int, a_max) + 1), n_int, min(p, 1.0))
        pmf = np.convolve(pmf, binom_pmf)[: a_max + 1]
    pmf = np.convolve(pmf, stats.poisson.pmf(np.arange(a_max + 1), lam_far))[: a_max + 1]
    return pmf, float(le_cam + tail_err)


def _lattice_tail_sum(m: ModelSpec, w: float, r_from: float, q: QuadSpec) -> tuple:
    """Sum of connection probabilities over lattice sites beyond r_from,
    by geometric block extension with ratio extrapolation."""
    ball_vol = math.pi ** (m.d / 2.0) / math.gamma(m.d / 2.0 + 1.0)
    r_edge = r_from
    total = 0.0
    err = 0.0
    prev_inc = None
    prev_ratio = None
    for _ in range(60):
        if ball_vol * ((2 * r_edge) ** m.d - r_edge ** m.d) <= 2e5:
            inc, berr = _lattice_profile_sum(m, w, None, r_edge, 2 * r_edge, q), 0.0
        else:
            inc, berr = _lattice_block_bracket(m, w, r_edge, 2 * r_edge, q)
        total += inc
        err += berr
        r_edge *= 2.0
        if inc <= 0.0:
            return total, err
        if prev_inc is not None and prev_inc > 0.0:
            ratio = inc / prev_inc
            if ratio < 0.95 and prev_ratio is not None:
                corr = inc * ratio / (1.0 - ratio)
                corr_err = (abs(ratio - prev_ratio) * inc / (1.0 - ratio) ** 2
                            + 1e-3 * corr + err)
                if corr_err <= max(q.abs_tol, 1e-2 * q.rel_tol * max(total, 1.0)):
                    return total + corr, corr_err
            prev_ratio = ratio if ratio < 1.0 else None
        prev_inc = inc
    raise NumericsError(
        f"lattice degree tail not converged at radius {r_edge:.3e};"
        " increase truncation_radius"
    )


def d_infty_pmf(m: ModelSpec, w: float, a: int, q: QuadSpec) -> float:
    if a < 0:
        raise ContractViolation("a must be >= 0")
    pmf, _ = d_infty_pmf_vector(m, w, a, q)
    return float(pmf[a])


# ---------------------------------------------------------------------------
# Joint bulk/hub degree law of a typical vertex given planted hubs.
# ---------------------------------------------------------------------------

@dataclass
class PiAbTable:
    values: np.ndarray      # shape (a_max+1, k+1)
    std_errors: np.ndarray
    a_max: int
    k: int
    degree_tail_mass: float

    def total_mass(self) -> float:
        return float(self.values.sum())


def _poisson_mean_interpolator(m: ModelSpec, q: QuadSpec, w_hi: float):
    grid = np.geomspace(1.0, w_hi, 96)
    vals = np.array([lambda_f(m, float(wv), None, q) for wv in grid])

    def lam(w: np.ndarray) -> np.ndarray:
        out = np.interp(w, grid, vals)
        high = w > grid[-1]
        if np.any(high):
            out = np.where(high, vals[-1] / grid[-1] * w, out)
        return out

    return lam


def pi_ab_table(hubs: Sequence, a_max: int, m: ModelSpec, q: QuadSpec,
                rng: Optional[RngStream] = None) -> PiAbTable:
    """Monte-Carlo law of (bulk degree, hub degree) of a typical vertex.

    Draws (location U on the unit torus, weight W), multiplies the
    degree pmf at each a by the exact hub-connection count distribution
    (a small Poisson-binomial over the k planted hubs), and averages.
    """
    rng = rng or RngStream(0)
    k = len(hubs)
    if k < 1:
        raise ContractViolation("need at least one hub")
    unit = TorusSpec(d=m.d, volume=1.0)
    us = np.stack([np.mod(np.asarray(u, dtype=float).reshape(m.d), 1.0) for u, _ in hubs])
    ys = np.asarray([float(y) for _, y in hubs])
    if np.any(ys <= 0):
        raise ContractViolation("hub weight scales must be positive")
    g = rng.child(TAG_MC).generator()
    n_draws = q.mc_samples
    U = g.random((n_draws, m.d))
    W = (1.0 - g.random(n_draws)) ** (-1.0 / (m.beta - 1.0))

    # Hub connection parameters, (draws, k).
    params = np.empty((n_draws, k))
    for i in range(k):
        dist = torus_distance(U, us[i], unit)
        params[:, i] = profile_eval(
            m.profile, dist ** m.d / limiting_kernel_eval(m.kernel, ys[i], W)
        )

    # Bulk degree pmf machinery, shared across draws.
    w_hi = (n_draws * 50.0) ** (1.0 / (m.beta - 1.0))
    if m.vertex_case == "poisson":
        lam_of_w = _poisson_mean_interpolator(m, q, w_hi)
        pmf_nodes = wgrid = None
    else:
        wgrid = np.geomspace(1.0, w_hi, 32)
        pmf_nodes = np.stack([d_infty_pmf_vector(m, float(wv), a_max, q)[0] for wv in wgrid])
        lam_of_w = None

    sum1 = np.zeros((a_max + 1, k + 1))
    sum2 = np.zeros((a_max + 1, k + 1))
    tail_sum = 0.0
    chunk = 50_000
    for s in range(0, n_draws, chunk):
        e = min(s + chunk, n_draws)
        Wc = W[s:e]
        pc = params[s:e]
        nc = e - s
        # Poisson-binomial over the k hubs.
        pb = np.zeros((nc, k + 1))
        pb[:, 0] = 1.0
        for i in range(k):
            p = pc[:, i][:, None]
            shifted = np.zeros_like(pb)
            shifted[:, 1:] = pb[:, :-1]
            pb = pb * (1.0 - p) + shifted * p
        if m.vertex_case == "poisson":
            deg_pmf = stats.poisson.pmf(np.arange(a_max + 1)[:, None], lam_of_w(Wc)[None, :])
        else:
            idx = np.clip(np.searchsorted(wgrid, Wc) - 1, 0, len(wgrid) - 2)
            frac = np.clip((Wc - wgrid[idx]) / (wgrid[idx + 1] - wgrid[idx]), 0.0, 1.0)
            deg_pmf = (
                pmf_nodes[idx] * (1.0 - frac[:, None]) + pmf_nodes[idx + 1] * frac[:, None]
            ).T
        joint = deg_pmf[:, :, None] * pb[None, :, :]   # (a, chunk, b)
        sum1 += joint.sum(axis=1)
        sum2 += (joint * joint).sum(axis=1)
        tail_sum += float(np.sum(1.0 - deg_pmf.sum(axis=0)))
    values = sum1 / n_draws
    var = np.maximum(sum2 / n_draws - values ** 2, 0.0)
    std_errors = np.sqrt(var / n_draws)
    return PiAbTable(
        values=values,
        std_errors=std_errors,
        a_max=a_max,
        k=k,
        degree_tail_mass=tail_sum / n_draws,
    )


def pi_ab_oracle(hubs: Sequence, a: int, b: int, m: ModelSpec, q: QuadSpec,
                 rng: Optional[RngStream] = None) -> float:
    k = len(hubs)
    if not (0 <= b <= k):
        raise ContractViolation(f"b must lie in 0..{k}")
    if a < 0:
        raise ContractViolation("a must be >= 0")
    table = pi_ab_table(hubs, a, m, q, rng)
    return float(table.values[a, b])
