"""Statistics extracted from sampled graphs.

Edge partition by length/weight thresholds, dual-scale length
histograms, joint bulk/hub degree counts, hub order statistics, binned
conditional mean degree, and the naive rare-event tail scan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation
from .models import ModelSpec
from .rng import RngStream
from .sampler import SampledGraph, VertexSet, count_edges, sample_vertices

__all__ = [
    "EdgePartitionParams",
    "partition_edges",
    "LengthHistogram",
    "length_histogram",
    "DegreeJoint",
    "degree_joint",
    "HubReport",
    "hub_report",
    "conditional_mean_degree",
    "TailScanResult",
    "tail_probability_naive",
    "wilson_interval",
]


@dataclass(frozen=True)
class EdgePartitionParams:
    """Exponents (gamma, a) splitting edges into main/long/high classes.

    An edge is `high` when either endpoint weight exceeds n**a, else
    `long` when its length exceeds n**((1-gamma)/d), else `main`.  The
    exponents must satisfy 0 < gamma < (1 - 1/alpha) and gamma < 1/d,
    and a * (2 or (beta-1), whichever larger) < (1 - gamma - 1/alpha)
    and < 1/2, strictly.
    """

    gamma_exp: float
    a_exp: float
    alpha: float
    beta: float
    d: int

    def __post_init__(self):
        inv_alpha = 0.0 if math.isinf(self.alpha) else 1.0 / self.alpha
        g_cap = min(1.0 - inv_alpha, 1.0 / self.d)
        if not (0.0 < self.gamma_exp < g_cap):
            raise ContractViolation(
                f"gamma_exp must lie in (0, {g_cap}), got {self.gamma_exp}"
            )
        a_cap = min(1.0 - self.gamma_exp - inv_alpha, 0.5) / max(2.0, self.beta - 1.0)
        if not (0.0 < self.a_exp < a_cap):
            raise ContractViolation(
                f"a_exp must lie in (0, {a_cap}), got {self.a_exp}"
            )

    @classmethod
    def from_model(cls, m: ModelSpec, gamma_exp: Optional[float] = None,
                   a_exp: Optional[float] = None) -> "EdgePartitionParams":
        """Midpoint defaults inside the admissible exponent ranges."""
        alpha = m.profile.tail_exponent
        inv_alpha = 0.0 if math.isinf(alpha) else 1.0 / alpha
        if gamma_exp is None:
            gamma_exp = 0.5 * min(1.0 - inv_alpha, 1.0 / m.d)
        if a_exp is None:
            a_exp = 0.5 * min(1.0 - gamma_exp - inv_alpha, 0.5) / max(2.0, m.beta - 1.0)
        return cls(gamma_exp=gamma_exp, a_exp=a_exp, alpha=alpha, beta=m.beta, d=m.d)

    def length_cut(self, n: float) -> float:
        return n ** ((1.0 - self.gamma_exp) / self.d)

    def weight_cut(self, n: float) -> float:
        return n ** self.a_exp


def partition_edges(g: SampledGraph, p: EdgePartitionParams):
    """(main, long, high) edge counts; always sums to the edge total."""
    n = g.volume
    w = g.vertices.weights
    wmax = np.maximum(w[g.edge_i], w[g.edge_j])
    high = wmax > p.weight_cut(n)
    long_ = ~high & (g.edge_len > p.length_cut(n))
    main = ~high & ~long_
    return int(main.sum()), int(long_.sum()), int(high.sum())


@dataclass
class LengthHistogram:
    scale: str                  # fixed | macroscopic
    bin_edges: np.ndarray
    masses: np.ndarray          # per-bin counts divided by n
    n: float

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def length_histogram(g: SampledGraph, scale: str, bin_edges) -> LengthHistogram:
    """Edge-length histogram, counts divided by the volume n.

    `fixed` bins absolute lengths; `macroscopic` bins lengths divided by
    n**(1/d), the scale on which planted-hub edges live.
    """
    if scale not in ("fixed", "macroscopic"):
        raise ContractViolation(f"unknown scale {scale!r}")
    bin_edges = np.asarray(bin_edges, dtype=float)
    if np.any(np.diff(bin_edges) <= 0):
        raise ContractViolation("bin edges must be strictly increasing")
    n = g.volume
    lengths = g.edge_len
    if scale == "macroscopic":
        lengths = lengths / n ** (1.0 / g.vertices.spec.d)
    counts, _ = np.histogram(lengths, bins=bin_edges)
    return LengthHistogram(scale=scale, bin_edges=bin_edges, masses=counts / n, n=n)


def top_weight_indices(v: VertexSet, k: int) -> np.ndarray:
    """Indices of the k largest weights, descending; ties break by index."""
    if k == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(v)), -v.weights))
    return order[:k].astype(np.int64)


@dataclass
class DegreeJoint:
    k: int
    a_max: int
    counts: np.ndarray     # (a_max + 2, k + 1); last row = bulk-degree overflow
    normalizer: int

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.normalizer

    def restricted(self, a_cap: int) -> np.ndarray:
        return self.proportions[: a_cap + 1, :]


def degree_joint(g: SampledGraph, k: int, a_max: int = 64) -> DegreeJoint:
    """Joint counts of (neighbours among non-hubs, neighbours among the
    k largest-weight vertices) over all vertices."""
    v = g.vertices
    if k >= len(v):
        raise ContractViolation("k must be smaller than the vertex count")
    hubs = top_weight_indices(v, k)
    is_hub = np.zeros(len(v), dtype=bool)
    is_hub[hubs] = True
    deg = g.degrees()
    hub_deg = np.zeros(len(v), dtype=np.int64)
    for e_a, e_b in ((g.edge_i, g.edge_j), (g.edge_j, g.edge_i)):
        sel = is_hub[e_b]
        if np.any(sel):
            hub_deg += np.bincount(e_a[sel], minlength=len(v))
    bulk = deg - hub_deg
    a_idx = np.minimum(bulk, a_max + 1)
    counts = np.zeros((a_max + 2, k + 1), dtype=np.int64)
    np.add.at(counts, (a_idx, np.minimum(hub_deg, k)), 1)
    return DegreeJoint(k=k, a_max=a_max, counts=counts, normalizer=len(v))


@dataclass
class HubReport:
    top_weights: np.ndarray
    hub_degrees: np.ndarray
    hub_degrees_scaled: np.ndarray
    clique: bool
    snap_displacements: Optional[np.ndarray]

    @property
    def k(self) -> int:
        return len(self.top_weights)


def hub_report(g: SampledGraph, k: int) -> HubReport:
    """Largest-weight vertices: weights, degrees, pairwise adjacency."""
    v = g.vertices
    if k > len(v):
        raise ContractViolation("k exceeds the vertex count")
    hubs = top_weight_indices(v, k)
    deg = g.degrees()
    clique = all(
        g.has_edge(int(hubs[a]), int(hubs[b]))
        for a in range(k) for b in range(a + 1, k)
    )
    snap = g.planted.displacements.copy() if g.planted is not None else None
    return HubReport(
        top_weights=v.weights[hubs].copy(),
        hub_degrees=deg[hubs].copy(),
        hub_degrees_scaled=deg[hubs] / g.volume,
        clique=bool(clique),
        snap_displacements=snap,
    )


def conditional_mean_degree(replicas: Sequence[SampledGraph], weight_bins):
    """Mean degree of vertices binned by weight, pooled across replicas.

    Returns (bin_lo, bin_hi, mean_weight, mean_degree, count) rows;
    empty bins report count 0 and NaN means.
    """
    if len(replicas) == 0:
        raise ContractViolation("need at least one replica")
    weight_bins = np.asarray(weight_bins, dtype=float)
    nb = len(weight_bins) - 1
    deg_sum = np.zeros(nb)
    w_sum = np.zeros(nb)
    cnt = np.zeros(nb, dtype=np.int64)
    for g in replicas:
        w = g.vertices.weights
        deg = g.degrees()
        idx = np.digitize(w, weight_bins) - 1
        ok = (idx >= 0) & (idx < nb)
        np.add.at(deg_sum, idx[ok], deg[ok])
        np.add.at(w_sum, idx[ok], w[ok])
        np.add.at(cnt, idx[ok], 1)
    with np.errstate(invalid="ignore"):
        mean_deg = np.where(cnt > 0, deg_sum / np.maximum(cnt, 1), np.nan)
        mean_w = np.where(cnt > 0, w_sum / np.maximum(cnt, 1), np.nan)
    return [
        (float(weight_bins[b]), float(weight_bins[b + 1]), float(mean_w[b]),
         float(mean_deg[b]), int(cnt[b]))
        for b in range(nb)
    ]


def wilson_interval(hits: int, total: int, z: float = 1.96):
    """Wilson 95% score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 1.0
    phat = hits / total
    denom = 1.0 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z * z / (4 * total * total)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)


@dataclass
class TailScanRow:
    n: float
    replicas: int
    hits: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    threshold: float
    included: bool


@dataclass
class TailScanResult:
    rows: list
    slope: Optional[float]
    slope_stderr: Optional[float]
    excluded_n: list


def tail_probability_naive(m: ModelSpec, n_values: Sequence[float], rho: float,
                           replicas_per_n: int, rng: RngStream, mu_value: float,
                           progress: Optional[callable] = None) -> TailScanResult:
    """Naive Monte-Carlo of the excess-edge probability across volumes.

    For each n, the fraction of replicas whose edge count reaches
    n*(mu + rho), with Wilson intervals, and the least-squares slope of
    log p-hat against log n over the volumes with at least 10 hits.
    """
    if abs(rho - round(rho)) < 1e-12 or rho <= 0:
        raise ContractViolation("rho must be positive non-integer")
    rows = []
    for n_pos, n in enumerate(n_values):
        threshold = n * (mu_value + rho)
        hits = 0
        for r in range(replicas_per_n):
            stream = rng.child(n_pos, r)
            v = sample_vertices(m, float(n), stream)
            if count_edges(v, m, stream) >= threshold:
                hits += 1
            if progress is not None and (r + 1) % 20000 == 0:
                progress(n, r + 1)
        lo, hi = wilson_interval(hits, replicas_per_n)
        rows.append(TailScanRow(
            n=float(n), replicas=replicas_per_n, hits=hits,
            p_hat=hits / replicas_per_n, ci_lo=lo, ci_hi=hi,
            threshold=threshold, included=hits >= 10,
        ))
    used = [r for r in rows if r.included]
    slope = slope_se = None
    if len(used) >= 2:
        xs = np.log([r.n for r in used])
        ys = np.log([r.p_hat for r in used])
        coeffs, cov = np.polyfit(xs, ys, 1, cov=True) if len(used) > 2 else (
            np.polyfit(xs, ys, 1), None)
        slope = float(coeffs[0])
        slope_se = float(math.sqrt(cov[0, 0])) if cov is not None else None
    return TailScanResult(
        rows=rows,
        slope=slope,
        slope_stderr=slope_se,
        excluded_n=[r.n for r in rows if not r.included],
    )
