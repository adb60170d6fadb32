"""Sampling of the weight-dependent random connection model on the torus.

Vertices are either the integer lattice (volume must be a d-th power) or
a Poisson process of unit intensity; weights are i.i.d. Pareto.  Each
unordered vertex pair is an independent Bernoulli with success
probability phi(distance^d / kappa(weights)); the Bernoulli variate is a
counter-based function of (stream key, i, j), so the naive and
grid-assisted pair iterations produce bit-identical graphs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, NumericsError, PlantingError
from .models import ModelSpec, kernel_eval, profile_eval
from .rng import RngStream, TAG_EDGES, TAG_MC, TAG_PLANT, TAG_VERTICES, pair_uniform
from .theory import LambdaTable
from .torus import TorusSpec, torus_distance

__all__ = [
    "VertexSet",
    "SampledGraph",
    "CondensatePlan",
    "PlantingRecord",
    "sample_vertices",
    "sample_edges",
    "count_edges",
    "plant_condensate",
    "sample_planted_graph",
    "sample_y_law",
    "sample_y_law_many",
    "write_edge_list",
    "read_edge_list",
]

_TAG_RETRY = 0x52545259
_BLOCK = 2048


@dataclass
class VertexSet:
    spec: TorusSpec
    positions: np.ndarray          # (N, d), canonical [0, L)
    weights: np.ndarray            # (N,), all >= 1
    case: str

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, self.spec.d)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.positions) != len(self.weights):
            raise ContractViolation("positions and weights must have equal length")
        if self.case not in ("lattice", "poisson"):
            raise ContractViolation(f"unknown vertex case {self.case!r}")
        if len(self.weights) and self.weights.min() < 1.0:
            raise ContractViolation("weights must be >= 1")

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class CondensatePlan:
    """Hub locations on the unit torus and weight scales, descending."""

    hubs: tuple   # of (u: array shape (d,), y: float)

    def __post_init__(self):
        hubs = tuple((np.mod(np.asarray(u, dtype=float).reshape(-1), 1.0), float(y))
                     for u, y in self.hubs)
        if len(hubs) < 1:
            raise ContractViolation("a condensate plan needs at least one hub")
        ys = [y for _, y in hubs]
        if any(y <= 0 for y in ys):
            raise ContractViolation("hub weight scales must be positive")
        if any(ys[i] < ys[i + 1] for i in range(len(ys) - 1)):
            raise ContractViolation("hub weight scales must be sorted descending")
        object.__setattr__(self, "hubs", hubs)

    @property
    def k(self) -> int:
        return len(self.hubs)

    @property
    def ys(self) -> np.ndarray:
        return np.asarray([y for _, y in self.hubs])


@dataclass
class PlantingRecord:
    hub_indices: np.ndarray
    displacements: np.ndarray
    plan: CondensatePlan
    retries: int = 0


@dataclass
class SampledGraph:
    vertices: VertexSet
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_len: np.ndarray
    rng: RngStream
    planted: Optional[PlantingRecord] = None

    @property
    def n_edges(self) -> int:
        return len(self.edge_i)

    @property
    def volume(self) -> float:
        return self.vertices.spec.volume

    def degrees(self) -> np.ndarray:
        n = len(self.vertices)
        return np.bincount(self.edge_i, minlength=n) + np.bincount(self.edge_j, minlength=n)

    def edge_codes(self) -> np.ndarray:
        return self.edge_i.astype(np.int64) * len(self.vertices) + self.edge_j

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        lo, hi = min(i, j), max(i, j)
        code = lo * len(self.vertices) + hi
        codes = self.edge_codes()
        pos = np.searchsorted(codes, code)
        return pos < len(codes) and codes[pos] == code


def sample_vertices(m: ModelSpec, n: float, rng: RngStream) -> VertexSet:
    """Vertex positions and Pareto weights for a torus of volume n."""
    spec = TorusSpec(d=m.d, volume=float(n))
    g = rng.child(TAG_VERTICES).generator()
    if m.vertex_case == "lattice":
        side = n ** (1.0 / m.d)
        side_int = round(side)
        if abs(side - side_int) > 1e-9 or side_int < 1:
            raise ContractViolation(
                f"lattice case needs n**(1/d) integer, got {side} for n={n}, d={m.d}"
            )
        axes = [np.arange(side_int, dtype=float)] * m.d
        mesh = np.meshgrid(*axes, indexing="ij")
        positions = np.stack([g_.ravel() for g_ in mesh], axis=1)
    else:
        count = int(g.poisson(n))
        positions = g.random((count, m.d)) * spec.side
    weights = (1.0 - g.random(len(positions))) ** (-1.0 / (m.beta - 1.0))
    return VertexSet(spec=spec, positions=positions, weights=weights, case=m.vertex_case)


# ---------------------------------------------------------------------------
# Pair iteration strategies.
# ---------------------------------------------------------------------------

def _pair_blocks_naive(n: int):
    for a0 in range(0, n, _BLOCK):
        a1 = min(a0 + _BLOCK, n)
        ii, jj = np.triu_indices(a1 - a0, k=1)
        if ii.size:
            yield ii + a0, jj + a0
        for b0 in range(a1, n, _BLOCK):
            b1 = min(b0 + _BLOCK, n)
            ii = np.repeat(np.arange(a0, a1), b1 - b0)
            jj = np.tile(np.arange(b0, b1), a1 - a0)
            yield ii, jj


def _pair_blocks_grid(positions: np.ndarray, spec: TorusSpec, cutoff: float):
    """Candidate pairs whose torus distance can be <= cutoff.

    Cells of side >= cutoff would need only one ring; the cell count per
    axis is capped, so a ring of ceil(cutoff / cell_side) cells is used.
    Produces every qualifying pair exactly once (plus nearby extras).
    """
    n = len(positions)
    L = spec.side
    d = spec.d
    cpa = max(int(L / cutoff), 1)
    cpa = min(cpa, max(int(math.ceil(n ** (1.0 / d))), 1), 512)
    if cpa <= 2:
        yield from _pair_blocks_naive(n)
        return
    cell_side = L / cpa
    ring = int(math.ceil(cutoff / cell_side))
    if 2 * ring + 1 >= cpa:
        yield from _pair_blocks_naive(n)
        return
    idx = np.floor(positions / cell_side).astype(np.int64)
    idx = np.clip(idx, 0, cpa - 1)
    flat = np.zeros(n, dtype=np.int64)
    for axis in range(d):
        flat = flat * cpa + idx[:, axis]
    order = np.argsort(flat, kind="stable")
    starts = np.zeros(cpa ** d + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=cpa ** d), out=starts[1:])

    offsets_1d = np.arange(-ring, ring + 1)
    grids = np.meshgrid(*([offsets_1d] * d), indexing="ij")
    offsets = np.stack([g.ravel() for g in grids], axis=1)
    nonempty = np.flatnonzero(np.diff(starts) > 0)
    multi = np.empty(d, dtype=np.int64)
    acc = 1
    for axis in range(d - 1, -1, -1):
        multi[axis] = acc
        acc *= cpa
    seen = set()
    for c in nonempty:
        members = order[starts[c]:starts[c + 1]]
        coords = np.empty(d, dtype=np.int64)
        rem = int(c)
        for axis in range(d):
            coords[axis] = rem // multi[axis]
            rem %= multi[axis]
        for off in offsets:
            nb_coords = (coords + off) % cpa
            nb = int(np.dot(nb_coords, multi))
            keypair = (min(int(c), nb), max(int(c), nb))
            if keypair in seen:
                continue
            seen.add(keypair)
            if nb == c:
                ii, jj = np.triu_indices(len(members), k=1)
                if ii.size:
                    yield members[ii], members[jj]
            else:
                other = order[starts[nb]:starts[nb + 1]]
                if len(other) == 0:
                    continue
                ii = np.repeat(members, len(other))
                jj = np.tile(other, len(members))
                yield ii, jj


def _support_cutoff(m: ModelSpec, weights: np.ndarray) -> Optional[float]:
    # Exact skip radius: beyond it the indicator profile forces p = 0.
    if not m.profile.compact_support or len(weights) == 0:
        return None
    wmax = float(weights.max())
    return float(kernel_eval(m.kernel, wmax, wmax)) ** (1.0 / m.d)


def sample_edges(v: VertexSet, m: ModelSpec, rng: RngStream,
                 mode: str = "grid_assisted") -> SampledGraph:
    """Independent Bernoulli edges over all unordered vertex pairs.

    Both modes draw the identical graph: per-pair variates are keyed by
    (stream, i, j), and grid assistance only skips pairs whose connection
    probability is exactly zero (possible when the profile has compact
    support).
    """
    if mode not in ("naive", "grid_assisted"):
        raise ContractViolation(f"unknown mode {mode!r}")
    n = len(v)
    key = rng.pair_key(TAG_EDGES)
    if n < 2:
        empty = np.empty(0, dtype=np.int64)
        return SampledGraph(v, empty, empty.copy(), np.empty(0), rng)
    cutoff = _support_cutoff(m, v.weights)
    if mode == "grid_assisted" and cutoff is not None and cutoff < v.spec.half_diagonal:
        blocks = _pair_blocks_grid(v.positions, v.spec, cutoff)
    else:
        blocks = _pair_blocks_naive(n)
    out_i, out_j, out_len = [], [], []
    for ii, jj in blocks:
        dist = torus_distance(v.positions[ii], v.positions[jj], v.spec)
        kappa = kernel_eval(m.kernel, v.weights[ii], v.weights[jj])
        p = np.asarray(profile_eval(m.profile, dist ** m.d / kappa))
        keep = p >= 1.0
        mid = ~keep & (p > 0.0)
        if np.any(mid):
            keep[mid] = pair_uniform(key, ii[mid], jj[mid]) < p[mid]
        if np.any(keep):
            out_i.append(np.minimum(ii[keep], jj[keep]).astype(np.int64))
            out_j.append(np.maximum(ii[keep], jj[keep]).astype(np.int64))
            out_len.append(dist[keep])
    if out_i:
        ei = np.concatenate(out_i)
        ej = np.concatenate(out_j)
        el = np.concatenate(out_len)
        order = np.lexsort((ej, ei))
        ei, ej, el = ei[order], ej[order], el[order]
        codes = ei * n + ej
        if np.any(np.diff(codes) == 0):
            raise NumericsError("pair iteration produced a duplicate pair")
    else:
        ei = np.empty(0, dtype=np.int64)
        ej = np.empty(0, dtype=np.int64)
        el = np.empty(0)
    return SampledGraph(v, ei, ej, el, rng)


# ---------------------------------------------------------------------------
# Fast exact edge counting for the compact-support d=1 model.
# ---------------------------------------------------------------------------

def _count_edges_sweep_1d(x: np.ndarray, radii: np.ndarray, L: float) -> int:
    """Pairs with circular distance <= r_i + r_j, by endpoint sweeps.

    Vertices with huge radii (>= L/4) are handled directly so the two
    line conditions (plain gap, wrapped gap) stay mutually exclusive for
    the rest.
    """
    n = len(x)
    if n < 2:
        return 0
    big = radii >= L / 4.0
    count = 0
    if np.any(big):
        all_idx = np.arange(n)
        for h in np.flatnonzero(big):
            delta = np.abs(x - x[h])
            delta = np.minimum(delta, L - delta)
            hit = delta <= radii + radii[h]
            hit[h] = False
            # count each pair once: big-big only from the lower index
            count += int(np.count_nonzero(hit & (~big | (all_idx > h))))
    xs = x[~big]
    rs = radii[~big]
    m_small = len(xs)
    if m_small >= 2:
        a = xs - rs
        b = xs + rs
        b_sorted = np.sort(b)
        a_sorted = np.sort(a)
        disjoint = int(np.searchsorted(b_sorted, a, side="left").sum())
        count += m_small * (m_small - 1) // 2 - disjoint
        count += int(np.searchsorted(a_sorted, b - L, side="right").sum())
    return count


def count_edges(v: VertexSet, m: ModelSpec, rng: RngStream) -> int:
    """Total edge count of the graph sample_edges would return.

    For the compact-support kernel-sum model in one dimension, the graph
    is a deterministic function of the vertex draw and the count comes
    from an O(N log N) interval sweep; otherwise the edges are sampled.
    """
    if (
        m.profile.variant == "indicator"
        and m.kernel.variant == "boolean_sum"
        and m.d == 1
    ):
        return _count_edges_sweep_1d(
            v.positions[:, 0].copy(), v.weights.copy(), v.spec.side
        )
    return sample_edges(v, m, rng).n_edges


# ---------------------------------------------------------------------------
# Condensate planting.
# ---------------------------------------------------------------------------

def plant_condensate(g: SampledGraph, plan: CondensatePlan, m: ModelSpec,
                     rng: RngStream) -> SampledGraph:
    """Overwrite the weights of the vertices nearest the planned hub
    locations with y_i * n and resample exactly their incident edges.

    Non-incident edges are carried over untouched.  Raises
    PlantingError when the planted weights would not dominate every
    ambient weight (the caller should resample the base graph)."""
    v = g.vertices
    n_vertices = len(v)
    if plan.k > n_vertices:
        raise ContractViolation("more hubs than vertices")
    volume = v.spec.volume
    targets = np.stack([u * v.spec.side for u, _ in plan.hubs])
    hub_idx = np.empty(plan.k, dtype=np.int64)
    disp = np.empty(plan.k)
    for i in range(plan.k):
        dist = torus_distance(v.positions, targets[i], v.spec)
        hub_idx[i] = int(np.argmin(dist))
        disp[i] = float(dist[hub_idx[i]])
    if len(set(hub_idx.tolist())) != plan.k:
        raise ContractViolation("two hubs map to the same vertex; spread the plan out")
    planted_w = plan.ys * volume
    ambient = np.delete(v.weights, hub_idx)
    if len(ambient) and ambient.max() >= planted_w[-1]:
        raise PlantingError(
            f"ambient weight {ambient.max():.6g} >= smallest planted weight "
            f"{planted_w[-1]:.6g}; resample the base graph or increase n"
        )
    new_weights = v.weights.copy()
    new_weights[hub_idx] = planted_w
    new_v = VertexSet(spec=v.spec, positions=v.positions, weights=new_weights, case=v.case)

    hub_set = np.zeros(n_vertices, dtype=bool)
    hub_set[hub_idx] = True
    keep = ~(hub_set[g.edge_i] | hub_set[g.edge_j])
    out_i = [g.edge_i[keep]]
    out_j = [g.edge_j[keep]]
    out_len = [g.edge_len[keep]]

    key = rng.pair_key(TAG_PLANT)
    done = np.zeros(n_vertices, dtype=bool)
    for i in range(plan.k):
        h = int(hub_idx[i])
        partner_mask = ~done
        partner_mask[h] = False
        partners = np.flatnonzero(partner_mask)
        dist = torus_distance(v.positions[partners], v.positions[h], v.spec)
        kappa = kernel_eval(m.kernel, new_weights[h], new_weights[partners])
        p = np.asarray(profile_eval(m.profile, dist ** m.d / kappa))
        hh = np.full(partners.shape, h, dtype=np.int64)
        keep_p = p >= 1.0
        mid = ~keep_p & (p > 0.0)
        if np.any(mid):
            keep_p[mid] = pair_uniform(key, hh[mid], partners[mid]) < p[mid]
        out_i.append(np.minimum(hh[keep_p], partners[keep_p]))
        out_j.append(np.maximum(hh[keep_p], partners[keep_p]))
        out_len.append(dist[keep_p])
        done[h] = True

    ei = np.concatenate(out_i)
    ej = np.concatenate(out_j)
    el = np.concatenate(out_len)
    order = np.lexsort((ej, ei))
    record = PlantingRecord(hub_indices=hub_idx, displacements=disp, plan=plan)
    return SampledGraph(new_v, ei[order], ej[order], el[order], g.rng, planted=record)


def sample_planted_graph(m: ModelSpec, n: float, plan: CondensatePlan,
                         rng: RngStream, max_tries: int = 64) -> SampledGraph:
    """Sample a base graph and plant the condensate, resampling the base
    on the rare draws whose ambient weights reach the planted scale."""
    for attempt in range(max_tries):
        stream = rng if attempt == 0 else rng.child(_TAG_RETRY, attempt)
        v = sample_vertices(m, n, stream)
        g = sample_edges(v, m, stream)
        try:
            planted = plant_condensate(g, plan, m, stream)
        except PlantingError:
            continue
        planted.planted.retries = attempt
        return planted
    raise PlantingError(
        f"no admissible base graph in {max_tries} attempts; planted weights too small"
    )


# ---------------------------------------------------------------------------
# Limiting law of the k largest scaled weights under the excess event.
# ---------------------------------------------------------------------------

def sample_y_law_many(rho: float, m: ModelSpec, table: LambdaTable, rng: RngStream,
                      size: int) -> np.ndarray:
    """Rejection sampler for the limiting hub weight-scale law.

    Proposals are k i.i.d. tail-truncated Pareto scales; a proposal is
    accepted when the tabulated connect-fraction sum exceeds rho.
    Returns rows sorted descending.
    """
    if not (rho > 0) or abs(rho - round(rho)) < 1e-12:
        raise ContractViolation("rho must be positive and non-integer")
    k = int(math.ceil(rho))
    bstar = table.b_star(rho - (k - 1))
    g = rng.child(TAG_MC).generator()
    beta = m.beta
    out = []
    got = 0
    proposed = 0
    batch = 8192
    while got < size:
        u = 1.0 - g.random((batch, k))
        zs = bstar * u ** (-1.0 / (beta - 1.0))
        acc = zs[np.asarray(table.eval(zs)).sum(axis=1) > rho]
        proposed += batch
        if len(acc):
            out.append(acc[: size - got])
            got += len(out[-1])
        if proposed >= 10_000_000 and got == 0:
            raise NumericsError(
                f"acceptance below 1e-6 sampling the hub law at rho={rho}, b*={bstar}"
            )
    samples = np.concatenate(out, axis=0)
    return -np.sort(-samples, axis=1)


def sample_y_law(rho: float, m: ModelSpec, table: LambdaTable, rng: RngStream) -> np.ndarray:
    """One draw of the k descending limiting hub weight scales."""
    return sample_y_law_many(rho, m, table, rng, 1)[0]


# ---------------------------------------------------------------------------
# Edge-list text serialization.
# ---------------------------------------------------------------------------

def write_edge_list(g: SampledGraph, m: ModelSpec, path) -> None:
    """Documented text format: header `d beta n case seed`, one
    `i j length` line per edge, then one `i weight` line per vertex."""
    v = g.vertices
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{v.spec.d} {m.beta:.17g} {v.spec.volume:.17g} {v.case} {g.rng.seed}\n")
        for i, j, length in zip(g.edge_i, g.edge_j, g.edge_len):
            fh.write(f"{i} {j} {length:.17g}\n")
        for i, w in enumerate(v.weights):
            fh.write(f"{i} {w:.17g}\n")


def read_edge_list(path) -> dict:
    """Parse the edge-list text format back into arrays.

    Edge lines carry three fields, weight lines two; the two sections
    need no separator.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ContractViolation("malformed edge-list header")
        d, beta, volume, case, seed = header
        ei, ej, el = [], [], []
        weights = {}
        for line in fh:
            parts = line.split()
            if len(parts) == 3:
                ei.append(int(parts[0]))
                ej.append(int(parts[1]))
                el.append(float(parts[2]))
            elif len(parts) == 2:
                weights[int(parts[0])] = float(parts[1])
            elif parts:
                raise ContractViolation(f"malformed edge-list line: {line!r}")
    n_vertices = max(weights) + 1 if weights else 0
    warr = np.zeros(n_vertices)
    for i, w in weights.items():
        warr[i] = w
    return {
        "d": int(d),
        "beta": float(beta),
        "n": float(volume),
        "case": case,
        "seed": int(seed),
        "edge_i": np.asarray(ei, dtype=np.int64),
        "edge_j": np.asarray(ej, dtype=np.int64),
        "edge_len": np.asarray(el),
        "weights": warr,
    }
