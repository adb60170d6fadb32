import math

import numpy as np
import pytest

from condensim.empirics import (
    EdgePartitionParams,
    conditional_mean_degree,
    degree_joint,
    hub_report,
    length_histogram,
    partition_edges,
    tail_probability_naive,
    wilson_interval,
)
from condensim.errors import ContractViolation
from condensim.models import boolean_model, scale_free_percolation
from condensim.rng import RngStream
from condensim.sampler import (
    CondensatePlan,
    SampledGraph,
    VertexSet,
    sample_edges,
    sample_planted_graph,
    sample_vertices,
)
from condensim.theory import QuadSpec, pi_ab_table, radial_indicator, lambda_f

BOOL1 = boolean_model(1, 3.0)
Q = QuadSpec(mc_samples=50_000)


def make_graph(n=2000.0, seed=0, m=BOOL1):
    rng = RngStream(seed)
    v = sample_vertices(m, n, rng)
    return sample_edges(v, m, rng)


# ---------------------------------------------------------------------------
# edge partition
# ---------------------------------------------------------------------------

def test_partition_defaults_valid():
    p = EdgePartitionParams.from_model(BOOL1)
    assert p.gamma_exp == pytest.approx(0.5)
    assert p.a_exp == pytest.approx(0.125)


def test_partition_constraints_enforced():
    with pytest.raises(ContractViolation):
        EdgePartitionParams(gamma_exp=0.99, a_exp=0.1, alpha=2.0, beta=3.0, d=1)
    with pytest.raises(ContractViolation):
        EdgePartitionParams(gamma_exp=0.3, a_exp=0.4, alpha=math.inf, beta=3.0, d=1)


def test_partition_sums_to_edge_total():
    g = make_graph(3000.0, 3)
    p = EdgePartitionParams.from_model(BOOL1)
    main, long_, high = partition_edges(g, p)
    assert main + long_ + high == g.n_edges


def test_partition_matches_analytic_oracle():
    # Expected class masses for the d=1 kernel-sum indicator model:
    # a pair at weights (W1, W2) connects within length W1 + W2, so
    # main/n -> E[(W1+W2) 1{both <= T}] and long is empty since
    # 2 T << the length cut at these exponents.
    n = 10_000.0
    p = EdgePartitionParams.from_model(BOOL1)
    T = p.weight_cut(n)
    e_w_trunc = 2.0 * (1.0 - 1.0 / T)       # E[W; W <= T] for beta = 3
    p_below = 1.0 - T ** -2.0
    main_want = 2.0 * e_w_trunc * p_below
    high_want = 4.0 - main_want
    mains, longs, highs = [], [], []
    for seed in range(6):
        g = make_graph(n, seed)
        main, long_, high = partition_edges(g, p)
        mains.append(main / n)
        longs.append(long_)
        highs.append(high / n)
    assert np.mean(mains) == pytest.approx(main_want, rel=0.05)
    assert np.mean(highs) == pytest.approx(high_want, rel=0.05)
    assert sum(longs) == 0


def test_partition_planted_hub_edges_are_high():
    n = 5000.0
    plan = CondensatePlan(hubs=(((0.4,), 0.45),))
    g = sample_planted_graph(BOOL1, n, plan, RngStream(9))
    p = EdgePartitionParams.from_model(BOOL1)
    hub = g.planted.hub_indices[0]
    incident = (g.edge_i == hub) | (g.edge_j == hub)
    _, _, high = partition_edges(g, p)
    assert high >= int(incident.sum())


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

def test_histogram_empty_graph():
    spec_v = VertexSet(
        spec=make_graph(100.0, 1).vertices.spec,
        positions=np.empty((0, 1)),
        weights=np.empty(0),
        case="poisson",
    )
    g = SampledGraph(spec_v, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                     np.empty(0), RngStream(0))
    h = length_histogram(g, "fixed", [0.0, 1.0, 2.0])
    assert np.all(h.masses == 0.0)


def test_histogram_total_mass_identity():
    g = make_graph(2000.0, 4)
    edges = np.linspace(0.0, g.vertices.spec.half_diagonal + 1e-9, 40)
    h = length_histogram(g, "fixed", edges)
    assert h.total_mass == pytest.approx(g.n_edges / 2000.0, abs=1e-12)


def test_histogram_fixed_scale_matches_theory():
    n = 10_000.0
    masses = []
    for seed in range(8):
        g = make_graph(n, seed + 20)
        h = length_histogram(g, "fixed", [0.0, 3.0])
        masses.append(h.masses[0])
    want = 0.5 * _pareto_mean(lambda w: lambda_f(BOOL1, w, radial_indicator(0.0, 3.0), Q))
    assert np.mean(masses) == pytest.approx(want, rel=0.05)


def _pareto_mean(fn, beta=3.0, nodes=400):
    # plain Pareto expectation on a log grid, for test oracles only
    ws = np.geomspace(1.0, 1e5, nodes)
    vals = np.array([fn(float(w)) for w in ws])
    dens = (beta - 1.0) * ws ** -beta
    return float(np.trapezoid(vals * dens, ws))


def test_histogram_macroscopic_planted_wave():
    n = 10_000.0
    plan = CondensatePlan(hubs=(((0.6,), 0.3),))
    masses = []
    for seed in range(20):
        g = sample_planted_graph(BOOL1, n, plan, RngStream(seed + 50))
        h = length_histogram(g, "macroscopic", [0.1, 0.25])
        masses.append(h.masses[0])
    # annulus of the planted hub: 2 * (0.25 - 0.1)
    assert np.mean(masses) == pytest.approx(0.3, rel=0.10)


def test_histogram_rejects_bad_bins():
    g = make_graph(200.0, 5)
    with pytest.raises(ContractViolation):
        length_histogram(g, "fixed", [0.0, 0.0, 1.0])
    with pytest.raises(ContractViolation):
        length_histogram(g, "weird", [0.0, 1.0])


# ---------------------------------------------------------------------------
# joint degrees
# ---------------------------------------------------------------------------

def test_degree_joint_k0_is_plain_degree():
    g = make_graph(1000.0, 6)
    joint = degree_joint(g, 0, a_max=2000)
    deg = g.degrees()
    marg = joint.counts[:, 0]
    want = np.bincount(deg, minlength=2002)[:2002]
    assert np.array_equal(marg, want)


def test_degree_joint_handshake():
    g = make_graph(1500.0, 7)
    joint = degree_joint(g, 2, a_max=100_000)
    a_idx = np.arange(joint.counts.shape[0])[:, None]
    b_idx = np.arange(joint.counts.shape[1])[None, :]
    total = int(((a_idx + b_idx) * joint.counts).sum())
    assert total == 2 * g.n_edges


def test_degree_joint_proportions_normalized():
    g = make_graph(800.0, 8)
    joint = degree_joint(g, 1, a_max=64)
    assert joint.proportions.sum() == pytest.approx(1.0)


def test_degree_joint_matches_oracle_small():
    n = 4000.0
    hubs = [((0.7,), 0.6), ((0.2,), 0.3)]
    plan = CondensatePlan(hubs=tuple((np.asarray(u), y) for u, y in hubs))
    counts = None
    reps = 4
    for seed in range(reps):
        g = sample_planted_graph(BOOL1, n, plan, RngStream(seed + 70))
        joint = degree_joint(g, 2, a_max=16)
        counts = joint.counts if counts is None else counts + joint.counts
    emp = counts / counts.sum()
    oracle = pi_ab_table(hubs, 16, BOOL1, QuadSpec(mc_samples=100_000), RngStream(5))
    tv = 0.5 * float(np.abs(emp[:9, :] - oracle.values[:9, :]).sum())
    assert tv < 0.1


# ---------------------------------------------------------------------------
# hub report
# ---------------------------------------------------------------------------

def test_hub_report_planted_degree_and_next_rank():
    n = 10_000.0
    plan = CondensatePlan(hubs=(((0.3,), 0.4),))
    scaled, nxt = [], []
    for seed in range(10):
        g = sample_planted_graph(BOOL1, n, plan, RngStream(seed + 90))
        rep = hub_report(g, 2)
        scaled.append(rep.hub_degrees_scaled[0])
        nxt.append(rep.hub_degrees_scaled[1])
        assert rep.snap_displacements is not None
    assert np.mean(scaled) == pytest.approx(0.8, rel=0.05)
    assert np.mean(nxt) < 0.05


def test_hub_report_permutation_invariant():
    g = make_graph(600.0, 11)
    perm = np.random.default_rng(0).permutation(len(g.vertices))
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    v2 = VertexSet(spec=g.vertices.spec, positions=g.vertices.positions[perm],
                   weights=g.vertices.weights[perm], case=g.vertices.case)
    ei = inv[g.edge_i]
    ej = inv[g.edge_j]
    lo = np.minimum(ei, ej)
    hi = np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    g2 = SampledGraph(v2, lo[order], hi[order], g.edge_len[order], g.rng)
    r1 = hub_report(g, 3)
    r2 = hub_report(g2, 3)
    assert np.allclose(r1.top_weights, r2.top_weights)
    assert np.array_equal(r1.hub_degrees, r2.hub_degrees)
    assert r1.clique == r2.clique


def test_hub_clique_flag_boolean():
    plan = CondensatePlan(hubs=(((0.25,), 0.6), ((0.75,), 0.4)))
    g = sample_planted_graph(BOOL1, 4000.0, plan, RngStream(13))
    rep = hub_report(g, 2)
    # radii 2400 + 1600 = torus circumference: always adjacent
    assert rep.clique


# ---------------------------------------------------------------------------
# conditional mean degree
# ---------------------------------------------------------------------------

def test_conditional_mean_degree_linear_bounds():
    n = 10_000.0
    replicas = [make_graph(n, seed + 30) for seed in range(3)]
    bins = np.geomspace(1.0, n ** 0.4, 12)
    rows = conditional_mean_degree(replicas, bins)
    ratios = [md / mw for (_, _, mw, md, cnt) in rows if cnt >= 50]
    assert len(ratios) >= 6
    assert max(ratios) / min(ratios) < 20.0


def test_conditional_mean_degree_planted_bin():
    n = 10_000.0
    plan = CondensatePlan(hubs=(((0.4,), 0.3),))
    replicas = [sample_planted_graph(BOOL1, n, plan, RngStream(seed + 40))
                for seed in range(6)]
    bins = [0.29 * n, 0.31 * n]
    rows = conditional_mean_degree(replicas, bins)
    lo, hi, mw, md, cnt = rows[0]
    assert cnt == 6
    assert md / n == pytest.approx(0.6, rel=0.05)


def test_conditional_mean_degree_empty_bin():
    g = make_graph(500.0, 14)
    rows = conditional_mean_degree([g], [1e6, 2e6])
    assert rows[0][4] == 0
    assert math.isnan(rows[0][3])


# ---------------------------------------------------------------------------
# naive tail scan
# ---------------------------------------------------------------------------

def test_wilson_interval_basics():
    lo, hi = wilson_interval(5, 100)
    assert 0.0 < lo < 0.05 < hi < 0.12
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_tail_scan_zero_hits_excluded():
    m = boolean_model(1, 2.5)
    res = tail_probability_naive(m, [50.0], 50.9, 40, RngStream(1), mu_value=6.0)
    assert res.rows[0].hits == 0
    assert res.slope is None
    assert res.excluded_n == [50.0]


def test_tail_scan_monotone_and_slope():
    m = boolean_model(1, 2.5)
    res = tail_probability_naive(
        m, [250.0, 1000.0], 0.9, 4000, RngStream(2), mu_value=6.0
    )
    rows = res.rows
    assert rows[0].p_hat >= rows[1].p_hat - 0.02
    assert rows[0].included and rows[1].included
    assert res.slope is not None and res.slope < 0.0


def test_tail_scan_rejects_integer_rho():
    with pytest.raises(ContractViolation):
        tail_probability_naive(BOOL1, [100.0], 1.0, 10, RngStream(3), mu_value=4.0)
