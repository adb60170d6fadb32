import math

import numpy as np
import pytest

from condensim.errors import ContractViolation, PlantingError
from condensim.models import (
    age_attachment,
    boolean_model,
    kernel_eval,
    profile_eval,
    scale_free_percolation,
)
from condensim.rng import RngStream, pair_uniform
from condensim.sampler import (
    CondensatePlan,
    VertexSet,
    count_edges,
    plant_condensate,
    read_edge_list,
    sample_edges,
    sample_planted_graph,
    sample_vertices,
    sample_y_law,
    sample_y_law_many,
    write_edge_list,
)
from condensim.theory import QuadSpec, build_lambda_table
from condensim.torus import TorusSpec, torus_distance

BOOL1 = boolean_model(1, 3.0)
Q = QuadSpec(mc_samples=50_000)


@pytest.fixture(scope="module")
def bool_table():
    return build_lambda_table(BOOL1, 1e3, 128, Q)


# ---------------------------------------------------------------------------
# rng streams
# ---------------------------------------------------------------------------

def test_stream_reproducibility():
    a = RngStream(123, 5).generator().random(8)
    b = RngStream(123, 5).generator().random(8)
    assert np.array_equal(a, b)
    c = RngStream(123, 6).generator().random(8)
    assert not np.array_equal(a, c)


def test_pair_uniform_is_order_free_and_keyed():
    key = RngStream(9).pair_key(7)
    i = np.array([3, 10, 2])
    j = np.array([7, 1, 2000])
    u1 = pair_uniform(key, i, j)
    u2 = pair_uniform(key, j, i)
    assert np.array_equal(u1, u2)
    assert np.all((u1 >= 0) & (u1 < 1))
    other = pair_uniform(RngStream(10).pair_key(7), i, j)
    assert not np.array_equal(u1, other)


def test_pair_uniform_looks_uniform():
    key = RngStream(4).pair_key(1)
    n = 2000
    ii, jj = np.triu_indices(n, k=1)
    u = pair_uniform(key, ii, jj)
    assert abs(u.mean() - 0.5) < 0.002
    hist, _ = np.histogram(u, bins=20, range=(0, 1))
    assert hist.min() > 0.9 * len(u) / 20


# ---------------------------------------------------------------------------
# vertices
# ---------------------------------------------------------------------------

def test_lattice_positions_1d():
    m = boolean_model(1, 3.0, vertex_case="lattice")
    v = sample_vertices(m, 10.0, RngStream(0))
    assert sorted(v.positions[:, 0].tolist()) == list(map(float, range(10)))
    assert len(v) == 10


def test_lattice_positions_2d():
    m = boolean_model(2, 3.0, vertex_case="lattice")
    v = sample_vertices(m, 9.0, RngStream(0))
    got = {tuple(p) for p in v.positions.tolist()}
    assert got == {(float(a), float(b)) for a in range(3) for b in range(3)}


def test_lattice_requires_integer_side():
    m = boolean_model(1, 3.0, vertex_case="lattice")
    with pytest.raises(ContractViolation):
        sample_vertices(m, 10.5, RngStream(0))


def test_poisson_count_concentration():
    hits = 0
    for seed in range(100):
        v = sample_vertices(BOOL1, 1e4, RngStream(seed))
        if abs(len(v) - 1e4) <= 400:
            hits += 1
    assert hits >= 95


def test_weight_mean():
    v = sample_vertices(BOOL1, 1e5, RngStream(7))
    assert abs(v.weights.mean() - 2.0) / 2.0 < 0.03
    assert v.weights.min() >= 1.0


# ---------------------------------------------------------------------------
# edges
# ---------------------------------------------------------------------------

def test_two_vertex_boolean_rule():
    spec = TorusSpec(d=1, volume=100.0)
    for r, w1, w2 in ((4.9, 2.0, 3.0), (5.1, 2.0, 3.0), (5.0, 2.0, 3.0)):
        v = VertexSet(spec=spec, positions=np.array([[0.0], [r]]),
                      weights=np.array([w1, w2]), case="poisson")
        g = sample_edges(v, BOOL1, RngStream(1))
        assert g.n_edges == (1 if r <= w1 + w2 else 0)


def test_single_vertex_no_edges():
    v = sample_vertices(BOOL1, 1.0, RngStream(3))
    g = sample_edges(VertexSet(spec=v.spec, positions=np.array([[0.2]]),
                               weights=np.array([1.5]), case="poisson"),
                     BOOL1, RngStream(3))
    assert g.n_edges == 0


@pytest.mark.parametrize(
    "m,n",
    [
        (boolean_model(1, 3.0), 1000.0),
        (boolean_model(1, 2.3), 600.0),
        (boolean_model(2, 3.0), 900.0),
        (scale_free_percolation(1, 3.0, 2.0, "poisson"), 700.0),
        (scale_free_percolation(2, 2.7, 1.5, "lattice"), 625.0),
        (age_attachment(1, gamma=0.5, alpha=2.0), 800.0),
        (boolean_model(1, 3.0, vertex_case="lattice"), 1000.0),
    ],
)
def test_naive_equals_grid_assisted(m, n):
    for seed in (0, 1, 2):
        rng = RngStream(seed)
        v = sample_vertices(m, n, rng)
        g1 = sample_edges(v, m, rng, "naive")
        g2 = sample_edges(v, m, rng, "grid_assisted")
        assert np.array_equal(g1.edge_i, g2.edge_i)
        assert np.array_equal(g1.edge_j, g2.edge_j)
        assert np.allclose(g1.edge_len, g2.edge_len, atol=1e-12)


def test_edge_lengths_are_torus_distances():
    rng = RngStream(5)
    v = sample_vertices(BOOL1, 500.0, rng)
    g = sample_edges(v, BOOL1, rng)
    want = torus_distance(v.positions[g.edge_i], v.positions[g.edge_j], v.spec)
    assert np.allclose(g.edge_len, want, atol=1e-9)
    assert np.all(g.edge_i < g.edge_j)


def test_edge_presence_frequency():
    # fixed two-vertex configuration, resampled under fresh streams
    m = scale_free_percolation(1, 3.0, 2.0, "poisson")
    spec = TorusSpec(d=1, volume=50.0)
    v = VertexSet(spec=spec, positions=np.array([[0.0], [2.0]]),
                  weights=np.array([1.5, 2.0]), case="poisson")
    p = float(profile_eval(m.profile, 2.0 / kernel_eval(m.kernel, 1.5, 2.0)))
    hits = sum(
        sample_edges(v, m, RngStream(1000, s)).n_edges for s in range(10_000)
    )
    se = math.sqrt(p * (1 - p) / 10_000)
    assert abs(hits / 10_000 - p) < 3 * se


# ---------------------------------------------------------------------------
# fast counting
# ---------------------------------------------------------------------------

def test_count_edges_matches_sampler_random_instances():
    rng = np.random.default_rng(8)
    for trial in range(120):
        beta = 2.2 + 1.8 * rng.random()
        m = boolean_model(1, float(beta))
        n = float(rng.integers(40, 900))
        stream = RngStream(int(rng.integers(1 << 30)))
        v = sample_vertices(m, n, stream)
        if len(v) >= 2 and trial % 3 == 0:
            # force huge radii to exercise the wrap/big-vertex paths
            w = v.weights.copy()
            w[int(rng.integers(len(v)))] = n / 3.0
            w[int(rng.integers(len(v)))] = n / 1.8
            v = VertexSet(spec=v.spec, positions=v.positions, weights=w, case=v.case)
        assert count_edges(v, m, stream) == sample_edges(v, m, stream, "naive").n_edges


def test_count_edges_non_compact_delegates():
    m = scale_free_percolation(1, 3.0, 2.0, "poisson")
    stream = RngStream(77)
    v = sample_vertices(m, 300.0, stream)
    assert count_edges(v, m, stream) == sample_edges(v, m, stream).n_edges


# ---------------------------------------------------------------------------
# planting
# ---------------------------------------------------------------------------

def test_plan_validation():
    with pytest.raises(ContractViolation):
        CondensatePlan(hubs=())
    with pytest.raises(ContractViolation):
        CondensatePlan(hubs=(((0.1,), 0.2), ((0.2,), 0.5)))
    with pytest.raises(ContractViolation):
        CondensatePlan(hubs=(((0.1,), -0.2),))


def test_plant_preserves_nonincident_edges():
    rng = RngStream(21)
    v = sample_vertices(BOOL1, 3000.0, rng)
    g = sample_edges(v, BOOL1, rng)
    plan = CondensatePlan(hubs=(((0.25,), 0.5), ((0.75,), 0.3)))
    planted = plant_condensate(g, plan, BOOL1, rng)
    hubs = set(planted.planted.hub_indices.tolist())
    base = {(int(i), int(j)) for i, j in zip(g.edge_i, g.edge_j)
            if i not in hubs and j not in hubs}
    kept = {(int(i), int(j)) for i, j in zip(planted.edge_i, planted.edge_j)
            if i not in hubs and j not in hubs}
    assert base == kept
    # hub weights overwritten to y * n
    w = planted.vertices.weights[planted.planted.hub_indices]
    assert np.allclose(w, np.array([0.5, 0.3]) * 3000.0)
    # original untouched
    assert g.vertices.weights.max() < 1500.0


def test_plant_hub_collision_rejected():
    rng = RngStream(22)
    v = sample_vertices(BOOL1, 500.0, rng)
    g = sample_edges(v, BOOL1, rng)
    plan = CondensatePlan(hubs=(((0.5,), 0.5), ((0.5,), 0.4)))
    with pytest.raises(ContractViolation):
        plant_condensate(g, plan, BOOL1, rng)


def test_plant_requires_dominant_weights():
    rng = RngStream(23)
    v = sample_vertices(BOOL1, 400.0, rng)
    g = sample_edges(v, BOOL1, rng)
    tiny = CondensatePlan(hubs=(((0.5,), 0.004),))  # y*n = 1.6, below ambient max
    with pytest.raises(PlantingError):
        plant_condensate(g, tiny, BOOL1, rng)
    planted = sample_planted_graph(BOOL1, 400.0, CondensatePlan(hubs=(((0.5,), 0.4),)),
                                   RngStream(23))
    assert planted.planted.retries >= 0


def test_plant_huge_hub_grabs_almost_everything():
    plan = CondensatePlan(hubs=(((0.5,), 4.0),))
    g = sample_planted_graph(BOOL1, 2000.0, plan, RngStream(24))
    hub = g.planted.hub_indices[0]
    deg = g.degrees()[hub]
    assert deg == len(g.vertices) - 1  # radius 8000 covers the whole torus


def test_plant_hub_degree_tracks_connect_fraction():
    plan = CondensatePlan(hubs=(((0.3,), 0.4),))
    scaled = []
    for seed in range(8):
        g = sample_planted_graph(BOOL1, 10_000.0, plan, RngStream(seed))
        scaled.append(g.degrees()[g.planted.hub_indices[0]] / 10_000.0)
    assert abs(np.mean(scaled) - 0.8) < 0.04


def test_plant_clique_stretched_profile():
    m = scale_free_percolation(1, 3.0, 2.0, "poisson")
    plan = CondensatePlan(hubs=(((0.2,), 0.6), ((0.8,), 0.3)))
    cliques = 0
    for seed in range(40):
        g = sample_planted_graph(m, 4000.0, plan, RngStream(seed))
        h = g.planted.hub_indices
        cliques += g.has_edge(int(h[0]), int(h[1]))
    assert cliques >= 38


# ---------------------------------------------------------------------------
# hub weight-scale law
# ---------------------------------------------------------------------------

def test_y_law_descending_and_accepted(bool_table):
    ys = sample_y_law_many(1.5, BOOL1, bool_table, RngStream(31), 2000)
    assert np.all(ys[:, 0] >= ys[:, 1])
    sums = np.asarray(bool_table.eval(ys)).sum(axis=1)
    assert np.all(sums > 1.5)
    # forced by the acceptance indicator: the second scale clears rho - 1
    assert np.all(np.asarray(bool_table.eval(ys[:, 1])) > 0.5 - 1e-9)


def test_y_law_small_rho_terminates(bool_table):
    ys = sample_y_law_many(0.02, BOOL1, bool_table, RngStream(32), 5000)
    assert np.all(ys > 0)
    scale = 0.01  # b* for rho = 0.02 in this model
    assert ys.min() >= scale - 1e-12


def test_y_law_single_draw(bool_table):
    y = sample_y_law(0.6, BOOL1, bool_table, RngStream(33))
    assert y.shape == (1,)
    assert y[0] >= 0.3


def test_y_law_tail_matches_closed_form(bool_table):
    ys = sample_y_law_many(0.6, BOOL1, bool_table, RngStream(34), 30_000)[:, 0]
    s = np.sort(ys)
    emp = 1.0 - np.arange(1, len(s) + 1) / len(s)
    theo = np.minimum((s / 0.3) ** (1.0 - 3.0), 1.0)
    assert np.max(np.abs(emp - theo)) < 0.02


def test_y_law_rejects_integer_rho(bool_table):
    with pytest.raises(ContractViolation):
        sample_y_law(2.0, BOOL1, bool_table, RngStream(35))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_edge_list_round_trip(tmp_path):
    rng = RngStream(41)
    v = sample_vertices(BOOL1, 300.0, rng)
    g = sample_edges(v, BOOL1, rng)
    path = tmp_path / "graph.txt"
    write_edge_list(g, BOOL1, path)
    back = read_edge_list(path)
    assert back["d"] == 1
    assert back["beta"] == 3.0
    assert back["n"] == 300.0
    assert back["case"] == "poisson"
    assert back["seed"] == 41
    assert np.array_equal(back["edge_i"], g.edge_i)
    assert np.array_equal(back["edge_j"], g.edge_j)
    assert np.allclose(back["edge_len"], g.edge_len)
    assert np.allclose(back["weights"], v.weights)
