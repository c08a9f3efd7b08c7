import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optrack.graphs import (
    GraphError,
    build_mixing,
    consensus_spectral_radius,
    erdos_renyi_edges,
    metropolis_weights,
    path_edges,
    ring_edges,
    validate_mixing,
)


class TestMetropolis:
    def test_triangle_is_uniform(self):
        m = metropolis_weights(ring_edges(3), 3)
        assert np.allclose(m.W, np.full((3, 3), 1 / 3))

    def test_two_node_path(self):
        m = metropolis_weights(path_edges(2), 2)
        assert np.allclose(m.W, [[0.5, 0.5], [0.5, 0.5]])

    def test_star_weights(self):
        # center 0 with leaves 1..3: leaf-center weight 1/4, leaf self 3/4, center self 1/4
        m = metropolis_weights([(0, 1), (0, 2), (0, 3)], 4)
        assert m.W[0, 1] == pytest.approx(0.25)
        assert m.W[1, 1] == pytest.approx(0.75)
        assert m.W[0, 0] == pytest.approx(0.25)

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError, match="connected"):
            metropolis_weights([(0, 1), (2, 3)], 4)

    def test_single_node_rejected(self):
        with pytest.raises(GraphError):
            metropolis_weights([], 1)

    def test_symmetric_output(self):
        m = metropolis_weights(erdos_renyi_edges(8, 0.4, seed=5), 8)
        assert np.array_equal(m.W, m.W.T)


class TestValidate:
    def test_identity_not_strongly_connected(self):
        with pytest.raises(GraphError, match="strongly connected"):
            validate_mixing(np.eye(3))

    def test_uniform_complete_valid(self):
        m = validate_mixing(np.full((4, 4), 0.25))
        assert m.N == 4
        assert all(len(nbrs) == 4 for nbrs in m.neighbors)

    def test_row_but_not_column_stochastic(self):
        W = np.array([[0.9, 0.1], [0.5, 0.5]])
        with pytest.raises(GraphError, match="column"):
            validate_mixing(W)

    def test_negative_weight(self):
        W = np.array([[1.2, -0.2], [-0.2, 1.2]])
        with pytest.raises(GraphError, match="negative"):
            validate_mixing(W)

    def test_single_node_trivial(self):
        m = validate_mixing(np.ones((1, 1)))
        assert m.directed_edge_count() == 0


class TestSpectralRadius:
    def test_uniform_complete_is_zero(self):
        assert consensus_spectral_radius(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)

    def test_two_node_path_is_zero(self):
        m = metropolis_weights(path_edges(2), 2)
        assert consensus_spectral_radius(m.W) == pytest.approx(0.0, abs=1e-12)

    def test_directed_ring(self):
        # self weight 1/2, predecessor weight 1/2: doubly stochastic digraph
        W = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
        m = validate_mixing(W)
        sigma = consensus_spectral_radius(m.W)
        assert sigma < 1.0
        oracle = np.abs(np.linalg.eigvals(W - np.full((3, 3), 1 / 3))).max()
        assert sigma == pytest.approx(oracle, abs=0.05)

    def test_matches_eig_oracle_on_symmetric(self):
        for seed in (0, 1, 2):
            m = metropolis_weights(erdos_renyi_edges(7, 0.4, seed=seed), 7)
            B = m.W - np.full((7, 7), 1 / 7)
            oracle = np.abs(np.linalg.eigvals(B)).max()
            assert m.sigma == pytest.approx(oracle, abs=1e-8)
            assert m.sigma < 1.0


@settings(deadline=None, max_examples=40)
@given(
    n=st.integers(2, 12),
    kind=st.sampled_from(["complete", "ring", "path", "erdos_renyi"]),
    seed=st.integers(0, 10_000),
)
def test_generated_matrices_doubly_stochastic(n, kind, seed):
    spec = {"kind": kind}
    if kind == "erdos_renyi":
        spec["p"] = 0.5
        spec["seed"] = seed
    m = build_mixing(spec, n)
    assert np.abs(m.W.sum(axis=1) - 1).max() <= 1e-10
    assert np.abs(m.W.sum(axis=0) - 1).max() <= 1e-10
    assert consensus_spectral_radius(m.W) < 1.0


class TestBuildMixing:
    def test_unknown_kind(self):
        with pytest.raises(GraphError, match="kind"):
            build_mixing({"kind": "torus"}, 4)

    def test_unknown_keys_rejected(self):
        with pytest.raises(GraphError, match="unknown"):
            build_mixing({"kind": "ring", "q": 1}, 4)

    def test_explicit_edges(self):
        m = build_mixing({"kind": "edges", "edges": [[0, 1], [1, 2]]}, 3)
        assert m.W[0, 2] == 0.0

    def test_matrix_passthrough(self):
        m = build_mixing({"kind": "matrix", "w": [[0.5, 0.5], [0.5, 0.5]]}, 2)
        assert m.N == 2

    def test_single_agent(self):
        m = build_mixing({"kind": "complete"}, 1)
        assert np.array_equal(m.W, [[1.0]])

    def test_complete_edge_count(self):
        m = build_mixing({"kind": "complete"}, 5)
        assert m.directed_edge_count() == 20
